use super::*;
use crate::model::{ModelConfig, SymTensor};
use proptest::prelude::{prop_assert, proptest};

fn params(r: usize, layers: &[(usize, f64, f64)]) -> ModelParams {
    let k = layers.len();
    ModelConfig::balanced(r, layers, vec![1.0; k]).to_params().unwrap()
}

fn demo_model() -> ModelParams {
    params(2, &[(2, 2.0, 1.0), (4, 4.0, 1.0)])
}

/// Graph layers on three uniform blocks given by their `Q` matrices.
fn graph_layers(qs: &[[[f64; 3]; 3]]) -> ModelParams {
    let tensors: Vec<SymTensor> = qs
        .iter()
        .map(|m| {
            let mut t = SymTensor::zeros(2, 3).unwrap();
            for i in 0..3 {
                for j in i..3 {
                    let mut c = vec![0u32; 3];
                    c[i] += 1;
                    c[j] += 1;
                    t.set(&c, 3.0 * m[i][j]).unwrap();
                }
            }
            t
        })
        .collect();
    ModelParams::new(vec![1.0 / 3.0; 3], &tensors, vec![1.0; qs.len()]).unwrap()
}

fn non_commuting() -> ModelParams {
    graph_layers(&[
        [
            [7.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            [1.0 / 6.0, 7.0 / 6.0, 2.0 / 3.0],
            [2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
        ],
        [
            [16.0 / 15.0, 7.0 / 15.0, 7.0 / 15.0],
            [7.0 / 15.0, 23.0 / 30.0, 23.0 / 30.0],
            [7.0 / 15.0, 23.0 / 30.0, 23.0 / 30.0],
        ],
    ])
}

/// `Q = (d/3) J + mu2 u2 u2^T + mu3 u3 u3^T` with fixed `u2, u3`.
fn shared_q(d: f64, mu2: f64, mu3: f64) -> [[f64; 3]; 3] {
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    let u2 = [1.0 / s2, -1.0 / s2, 0.0];
    let u3 = [1.0 / s6, 1.0 / s6, -2.0 / s6];
    let mut q = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            q[i][j] = d / 3.0 + mu2 * u2[i] * u2[j] + mu3 * u3[i] * u3[j];
        }
    }
    q
}

/// Nontrivial eigenvalues of `w1 Q1 + w2 Q2` in the non-commuting example,
/// written out in closed form.
fn non_commuting_snr(w1: f64, w2: f64) -> f64 {
    let disc = ((w1 - 0.6 * w2).powi(2) + 1.8 * w1 * w2).sqrt();
    let lp = (w1 + 0.6 * w2 + disc) / 2.0;
    let lm = (w1 + 0.6 * w2 - disc) / 2.0;
    lp.abs().max(lm.abs()).powi(2) / (2.0 * (w1 * w1 + w2 * w2))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn unit_weights_demo_model() {
    let res = weights_unit(&demo_model()).unwrap();
    assert_eq!(res.w, vec![1.0, 1.0]);
    // (1*1 + 3*1)^2 / (1*2 + 3*4)
    assert!(close(res.achieved_snr, 16.0 / 14.0, 1e-12), "{}", res.achieved_snr);
    assert!(res.above_ks);
}

#[test]
fn unit_weights_single_layer() {
    for &(q, d, mu) in &[(2, 3.0, 1.2), (3, 2.5, -0.7), (4, 4.0, 1.0)] {
        let res = weights_unit(&params(2, &[(q, d, mu)])).unwrap();
        let expect = (q as f64 - 1.0) * mu * mu / d;
        assert!(close(res.achieved_snr, expect, 1e-12), "q={q}: {}", res.achieved_snr);
    }
}

#[test]
fn cancelling_layers() {
    let p = params(2, &[(2, 3.0, 1.0), (2, 3.0, -1.0)]);
    let unit = weights_unit(&p).unwrap();
    assert!(unit.achieved_snr.abs() < 1e-12);
    assert!(!unit.above_ks);
    let opt = weights_optimal_r2(&p).unwrap();
    assert!((opt.w[0] - 1.0).abs() < 1e-12 && (opt.w[1] + 1.0).abs() < 1e-12);
    assert!(close(opt.achieved_snr, 2.0 / 3.0, 1e-12));
}

#[test]
fn closed_form_r2_demo_model() {
    let p = demo_model();
    let res = weights_optimal_r2(&p).unwrap();
    assert!((res.w[0] - 1.0).abs() < 1e-12 && (res.w[1] - 0.5).abs() < 1e-12, "{:?}", res.w);
    assert!(close(res.achieved_snr, 1.25, 1e-12));
    let consts = crate::model::weighted_signal(&p.with_weights(vec![0.5, 0.25]).unwrap()).unwrap();
    assert!(close(1.0 / consts.tau[1], 1.25, 1e-12));
}

#[test]
fn closed_form_r2_disassortative() {
    let p = params(2, &[(2, 4.0, 2.0), (3, 3.0, -0.6)]);
    let res = weights_optimal_r2(&p).unwrap();
    assert!((res.w[0] - 1.0).abs() < 1e-12 && (res.w[1] + 0.4).abs() < 1e-12, "{:?}", res.w);
    let expect = 4.0 / 4.0 + 2.0 * 0.36 / 3.0;
    assert!(close(res.achieved_snr, expect, 1e-12));
    let flipped = weights_optimal_r2(&params(2, &[(2, 4.0, 2.0), (3, 3.0, 0.6)])).unwrap();
    assert!(close(flipped.achieved_snr, res.achieved_snr, 1e-12));
}

#[test]
fn closed_form_r2_degenerate_and_wrong_r() {
    let res = weights_optimal_r2(&params(2, &[(2, 2.0, 0.0), (3, 3.0, 0.0)])).unwrap();
    assert!(res.w.iter().all(|&x| x == 0.0));
    assert_eq!(res.achieved_snr, 0.0);
    assert!(!res.above_ks);
    assert!(matches!(
        weights_optimal_r2(&params(3, &[(2, 3.0, 1.0)])),
        Err(Error::NotApplicable(_))
    ));
}

#[test]
fn numeric_agrees_with_closed_form_r2() {
    for p in [
        demo_model(),
        params(2, &[(2, 4.0, 2.0), (3, 3.0, -0.6)]),
        params(2, &[(2, 2.0, 0.5), (3, 3.0, 1.0), (4, 3.0, -0.4)]),
    ] {
        let r2 = weights_optimal_r2(&p).unwrap();
        let num = weights_numeric(&p, &NumericOptions::default()).unwrap();
        assert!(
            (num.achieved_snr - r2.achieved_snr).abs() <= 1e-6,
            "{} vs {}",
            num.achieved_snr,
            r2.achieved_snr
        );
    }
}

#[test]
fn objective_matches_non_commuting_closed_form() {
    let p = non_commuting();
    for &(a, b) in &[(1.0, 0.0), (0.0, 1.0), (1.0, 0.51), (1.0, 1.0), (0.3, -0.8), (-2.0, 0.7)] {
        let got = snr(&p, &[a, b]).unwrap();
        let want = non_commuting_snr(a, b);
        assert!(close(got, want, 1e-10), "w=({a},{b}): {got} vs {want}");
    }
}

#[test]
fn numeric_non_commuting_optimum() {
    let p = non_commuting();
    let res = weights_numeric(&p, &NumericOptions::default()).unwrap();
    let ratio = res.w[1] / res.w[0];
    assert!((ratio - 0.51).abs() <= 0.02, "w = {:?}", res.w);
    // Dense scan of the closed form over directions.
    let best = (0..200_000)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / 200_000.0;
            non_commuting_snr(t.cos(), t.sin())
        })
        .fold(0.0f64, f64::max);
    assert!((res.achieved_snr - best).abs() <= 1e-8, "{} vs {best}", res.achieved_snr);
}

#[test]
fn numeric_shared_eigenbasis() {
    let layers = [(4.0, 2.0, 0.5), (3.0, -0.3, 1.5)];
    let p = graph_layers(&layers.map(|(d, m2, m3)| shared_q(d, m2, m3)));
    // Each eigendirection is a separate Cauchy-Schwarz problem.
    let per_dir = |pick: fn(&(f64, f64, f64)) -> f64| {
        layers.iter().map(|l| pick(l).powi(2) / l.0).sum::<f64>()
    };
    let expect = per_dir(|l| l.1).max(per_dir(|l| l.2));
    let res = weights_numeric(&p, &NumericOptions::default()).unwrap();
    assert!((res.achieved_snr - expect).abs() <= 1e-6, "{} vs {expect}", res.achieved_snr);
    assert!((res.w[1] / res.w[0] + 0.2).abs() < 1e-3, "{:?}", res.w);
}

#[test]
fn numeric_single_layer() {
    let res = weights_numeric(&params(2, &[(3, 3.0, 1.5)]), &NumericOptions::default()).unwrap();
    assert_eq!(res.w, vec![1.0]);
}

#[test]
fn numeric_needs_two_communities() {
    let t = SymTensor::from_entries(2, 1, [(vec![2], 3.0)]).unwrap();
    let p = ModelParams::new(vec![1.0], &[t], vec![1.0]).unwrap();
    assert!(matches!(
        weights_numeric(&p, &NumericOptions::default()),
        Err(Error::NotApplicable(_))
    ));
}

#[test]
fn numeric_is_seed_deterministic() {
    let p = non_commuting();
    let opts = NumericOptions { seed: 9, ..Default::default() };
    let a = weights_numeric(&p, &opts).unwrap();
    let b = weights_numeric(&p, &opts).unwrap();
    assert_eq!(a.w, b.w);
    assert_eq!(a.achieved_snr, b.achieved_snr);
}

#[test]
fn tie_reported_for_degenerate_bulk() {
    // Three balanced blocks: mu_2 = mu_3.
    let res = weights_unit(&params(3, &[(2, 3.0, 1.0), (3, 3.0, 0.5)])).unwrap();
    assert!(res.tie);
    let res = weights_unit(&non_commuting()).unwrap();
    assert!(!res.tie);
}

proptest! {
    #[test]
    fn objective_is_scale_free(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        prop_assume_nonzero(a, b)?;
        for p in [demo_model(), non_commuting()] {
            let base = snr(&p, &[a, b]).unwrap();
            for c in [-1.0, 0.1, 10.0] {
                let s = snr(&p, &[c * a, c * b]).unwrap();
                prop_assert!((s - base).abs() <= 1e-12 * base.abs().max(1e-300) + 1e-15);
            }
        }
    }

    #[test]
    fn numeric_never_below_baseline(d1 in 1.0f64..5.0, m1 in -1.5f64..1.5, d2 in 1.0f64..5.0, m2 in -1.5f64..1.5) {
        let p = params(2, &[(2, d1, m1.clamp(-d1, d1)), (3, d2, m2.clamp(-d2 / 3.0, d2))]);
        let base = weights_unit(&p).unwrap().achieved_snr;
        let opts = NumericOptions { restarts: 6, ..Default::default() };
        let res = weights_numeric(&p, &opts).unwrap();
        prop_assert!(res.achieved_snr >= base - 1e-12);
    }

    #[test]
    fn normalized_has_unit_max(v in proptest::collection::vec(-5.0f64..5.0, 1..6)) {
        let n = normalize(&v);
        let m = n.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if v.iter().any(|&x| x != 0.0) {
            prop_assert!((m - 1.0).abs() < 1e-15);
            prop_assert!(n.iter().any(|&x| x == 1.0));
        }
    }
}

fn prop_assume_nonzero(a: f64, b: f64) -> std::result::Result<(), proptest::test_runner::TestCaseError> {
    if a.abs() + b.abs() < 1e-3 {
        return Err(proptest::test_runner::TestCaseError::reject("zero weights"));
    }
    Ok(())
}
