use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{weighted_signal, ModelConfig};
use crate::operators::build_reduced;
use crate::sampler::{random_layered, sample_hsbm, LabelMode, SampleConfig};

struct Diag(Vec<f64>);

impl LinearOperator for Diag {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = d * xi;
        }
    }
}

/// Greedy matching distance between two value lists of equal length.
fn match_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn sorted_dense_top(a: &Mat<f64>, k: usize) -> Vec<C64> {
    let mut vals = dense::eigenvalues(a).unwrap();
    vals.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    vals.truncate(k);
    vals
}

#[test]
fn diagonal_operator() {
    let mut d = vec![5.0, -3.0, 1.0];
    d.extend((0..197).map(|i| 0.9 * ((i as f64) / 197.0 - 0.5)));
    let res = top_eigs(&Diag(d), &EigOptions::new(2).tol(1e-12)).unwrap();
    assert!(res.converged);
    let v = res.values();
    assert!((v[0] - 5.0).norm() < 1e-12);
    assert!((v[1] + 3.0).norm() < 1e-12);
    for p in &res.pairs {
        assert!(p.residual <= 1e-12, "{}", p.residual);
    }
    let e0 = &res.pairs[0].vector;
    assert!((e0[0].re - 1.0).abs() < 1e-12);
}

#[test]
fn random_dense_matrix_matches_dense_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &(n, k) in &[(60, 4), (200, 6), (300, 5)] {
        let a = Mat::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) / (n as f64).sqrt());
        let res = top_eigs(&a, &EigOptions::new(k).tol(1e-11).seed(3)).unwrap();
        assert!(res.converged, "n = {n}");
        let got = res.values();
        let want = sorted_dense_top(&a, got.len());
        assert!(match_distance(&got, &want) <= 1e-7, "n = {n}: {got:?} vs {want:?}");
        for p in &res.pairs {
            assert!(p.residual <= 1e-9);
        }
    }
}

#[test]
fn conjugate_pairs_stay_together() {
    // Rotation block with eigenvalues 2 +- i, then 1.5, then small values.
    let n = 40;
    let a = Mat::<f64>::from_fn(n, n, |i, j| match (i, j) {
        (0, 0) | (1, 1) => 2.0,
        (0, 1) => -1.0,
        (1, 0) => 1.0,
        (2, 2) => 1.5,
        _ if i == j => 0.5 * (i as f64) / n as f64,
        _ => 0.0,
    });
    let res = top_eigs(&a, &EigOptions::new(1).tol(1e-12)).unwrap();
    assert_eq!(res.pairs.len(), 2);
    let v = res.values();
    assert!((v[0] - v[1].conj()).norm() < 1e-10);
    assert!((v[0].re - 2.0).abs() < 1e-10 && (v[0].im.abs() - 1.0).abs() < 1e-10);
}

#[test]
fn k_larger_than_dimension_is_rejected() {
    let err = top_eigs(&Diag(vec![1.0, 2.0]), &EigOptions::new(3)).unwrap_err();
    assert!(matches!(err, Error::IndexOutOfRange { .. }));
}

#[test]
fn small_operator_uses_full_space() {
    let res = top_eigs(&Diag(vec![1.0, -4.0, 2.0]), &EigOptions::new(3)).unwrap();
    let v = res.values();
    assert_eq!(v.len(), 3);
    assert!((v[0] + 4.0).norm() < 1e-12 && (v[1] - 2.0).norm() < 1e-12);
}

#[test]
fn zero_operator_converges() {
    let res = top_eigs(&Diag(vec![0.0; 50]), &EigOptions::new(2)).unwrap();
    assert!(res.converged);
    assert!(res.values().iter().all(|z| z.norm() < 1e-14));
}

#[test]
fn unconverged_run_is_flagged() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 400;
    let a = Mat::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let opts = EigOptions {
        k: 10,
        tol: 1e-14,
        max_restarts: 0,
        krylov_dim: Some(12),
        converge_above: None,
        seed: 0,
    };
    let res = top_eigs(&a, &opts).unwrap();
    assert!(!res.converged);
    assert!(matches!(
        res.require_converged(),
        Err(Error::NoConvergence { iterations: 0, .. })
    ));
}

#[test]
fn seeded_runs_are_reproducible() {
    let (g, _) = {
        let cfg = SampleConfig {
            params: ModelConfig::two_layer_demo().to_params().unwrap(),
            n: 400,
            seed: 2,
            label_mode: LabelMode::DeterministicBlocks,
        };
        sample_hsbm(&cfg).unwrap()
    };
    let op = build_reduced(&g, &[0.5, 0.25]).unwrap();
    let a = top_eigs(&op, &EigOptions::new(4).seed(9)).unwrap();
    let b = top_eigs(&op, &EigOptions::new(4).seed(9)).unwrap();
    assert_eq!(a.values(), b.values());
    assert_eq!(a.pairs[0].vector, b.pairs[0].vector);
}

#[test]
fn reduced_operator_matches_dense_spectrum() {
    let g = random_layered(40, &[2, 3], &[50, 30], 5).unwrap();
    let op = build_reduced(&g, &[0.7, -0.4]).unwrap();
    let res = top_eigs(&op, &EigOptions::new(6).tol(1e-10)).unwrap();
    assert!(res.converged);
    let got = res.values();
    let want = sorted_dense_top(&op.to_dense(), got.len());
    assert!(match_distance(&got, &want) <= 1e-7);
}

fn sample(cfg: &ModelConfig, n: usize, seed: u64) -> (LayeredHypergraph, Assignment, ModelParams) {
    let params = cfg.to_params().unwrap();
    let (g, a) = sample_hsbm(&SampleConfig {
        params: params.clone(),
        n,
        seed,
        label_mode: LabelMode::DeterministicBlocks,
    })
    .unwrap();
    (g, a, params)
}

#[test]
fn single_layer_below_threshold_has_one_outlier() {
    for (q, d) in [(2usize, 2.0f64), (4, 4.0)] {
        let cfg = ModelConfig::balanced(2, &[(q, d, 1.0)], vec![1.0]);
        let (g, _, params) = sample(&cfg, 5000, 0);
        let consts = weighted_signal(&params).unwrap();
        let s = analyze(&g, &[1.0], Some(&consts), &EigOptions::new(4), &OutlierOptions::default())
            .unwrap();
        assert_eq!(s.outliers.len(), 1, "q = {q}: {:?}", s.ritz);
        let perron = (q as f64 - 1.0) * d;
        assert!((s.outliers[0].lambda - perron).abs() <= 0.05 * perron);
        for r in s.ritz.iter().filter(|r| r.converged) {
            assert!(r.residual <= 1e-8);
        }
    }
}

#[test]
fn single_community_has_perron_outlier() {
    let cfg = ModelConfig::balanced(1, &[(3, 5.0, 0.0)], vec![1.0]);
    let (g, _, params) = sample(&cfg, 2000, 4);
    let consts = weighted_signal(&params).unwrap();
    let s = analyze(&g, &[1.0], Some(&consts), &EigOptions::new(3), &OutlierOptions::default())
        .unwrap();
    assert_eq!(s.outliers.len(), 1);
    assert!((s.outliers[0].lambda - consts.d_w).abs() < 0.05 * consts.d_w);
    assert_eq!(s.outliers[0].mu_index, Some(0));
}

#[test]
fn classification_is_scale_invariant() {
    let (g, _, _) = sample(&ModelConfig::two_layer_demo(), 2000, 3);
    let base = [0.5, 0.25];
    let labels: Vec<Vec<bool>> = [0.5, 1.0, 2.0]
        .iter()
        .map(|c| {
            let w: Vec<f64> = base.iter().map(|x| c * x).collect();
            let s = analyze(&g, &w, None, &EigOptions::new(5), &OutlierOptions::default())
                .unwrap();
            assert_eq!(s.vartheta_source, VarthetaSource::PlugIn);
            s.ritz.iter().map(|r| r.outlier).collect()
        })
        .collect();
    assert_eq!(labels[0], labels[1]);
    assert_eq!(labels[1], labels[2]);
}

#[test]
fn two_layer_outliers_and_orthogonality() {
    let cfg = ModelConfig::balanced(2, &[(2, 3.0, 1.5), (4, 4.0, 1.5)], vec![0.5, 0.375]);
    let (g, _, params) = sample(&cfg, 4000, 1);
    let consts = weighted_signal(&params).unwrap();
    let s = analyze(&g, &params.weights, Some(&consts), &EigOptions::new(4), &OutlierOptions::default())
        .unwrap();
    assert_eq!(s.outliers.len(), 2, "{:?}", s.ritz);
    assert_eq!(s.outliers[0].mu_index, Some(0));
    assert_eq!(s.outliers[1].mu_index, Some(1));
    assert!((s.outliers[0].lambda - consts.mu[0]).abs() < 0.05 * consts.mu[0]);
    assert!((s.outliers[1].lambda - consts.mu[1]).abs() < 0.1 * consts.mu[1]);
    let y = &s.y_vectors[1];
    let ones: f64 = y.iter().sum();
    let ratio = ones.abs() / ((y.len() as f64).sqrt() * dense::norm(y));
    assert!(ratio <= 0.1, "{ratio}");
    // The aggregated vector is the B~ eigenvector's weighted forward part.
    let op = build_reduced(&g, &params.weights).unwrap();
    let eig = top_eigs(&op, &EigOptions::new(4)).unwrap();
    let x: Vec<f64> = eig.pairs[s.outliers[1].ritz_index].vector.iter().map(|z| z.re).collect();
    let agg = op.aggregate(&x);
    let c = dense::norm(&agg) / dense::norm(y);
    assert!((c - 1.0).abs() < 1e-6);
}

#[test]
fn plug_in_vartheta_uses_observed_degrees() {
    let g = LayeredHypergraph::new(4, vec![2, 3], vec![vec![vec![0, 1]], vec![vec![0, 1, 2]]]).unwrap();
    let op = build_reduced(&g, &[2.0, 1.0]).unwrap();
    // Degree sums 2 and 3 over n = 4.
    let want = 4.0 * 1.0 * 2.0 / 4.0 + 1.0 * 2.0 * 3.0 / 4.0;
    assert!((vartheta_plugin(&op) - want).abs() < 1e-15);
}

/// Definitional dense `B` with rows and columns in the oriented-index order.
fn dense_b(g: &LayeredHypergraph, w: &[f64]) -> Mat<f64> {
    let idx = crate::OrientedIndex::new(g);
    let m = idx.m();
    Mat::from_fn(m, m, |i, j| {
        let (k, e, px) = idx.locate(i);
        let (l, f, py) = idx.locate(j);
        let ev = g.edge(k, e);
        let fv = g.edge(l, f);
        let (x, y) = (ev[px], fv[py]);
        if y != x && ev.contains(&y) && (k, e) != (l, f) {
            w[l]
        } else {
            0.0
        }
    })
}

#[test]
fn pseudo_eigs_depth_one_by_double_sum() {
    let cfg = ModelConfig::balanced(2, &[(2, 2.0, 1.5), (3, 3.0, 1.5)], vec![0.6, 0.3]);
    let params = cfg.to_params().unwrap();
    let consts = weighted_signal(&params).unwrap();
    let g = random_layered(10, &[2, 3], &[9, 5], 8).unwrap();
    let labels = Assignment::new((0..10).map(|x| (x % 2) as u32).collect(), 2).unwrap();
    let w = params.weights.clone();
    let pe = build_pseudo_eigs(&g, &w, &consts, &labels, 1, None).unwrap();

    let idx = crate::OrientedIndex::new(&g);
    let m = idx.m();
    let b = dense_b(&g, &w);
    let sqrt_n = 10f64.sqrt();
    // (J chi)(x -> e) = sum over (y -> e), y != x, of chi(y -> e).
    let chi = |i: usize, id: usize| consts.phi[i][labels.labels[idx.tail(id)] as usize];
    let jchi = |i: usize, a: usize| -> f64 {
        let (k, e, _) = idx.locate(a);
        (0..m)
            .filter(|&c| {
                let (l, f, _) = idx.locate(c);
                (l, f) == (k, e) && c != a
            })
            .map(|c| chi(i, c))
            .sum()
    };
    let r0 = consts.r0;
    for i in 0..r0 {
        for j in 0..r0 {
            let (mi, mj) = (consts.mu[i], consts.mu[j]);
            let mut s = 0.0;
            for a in 0..m {
                let ui: f64 = (0..m).map(|c| b[(a, c)] * jchi(i, c)).sum::<f64>() / (sqrt_n * mi);
                let vj: f64 = (0..m)
                    .map(|c| b[(c, a)] * w[idx.locate(c).0] * chi(j, c))
                    .sum::<f64>()
                    / (sqrt_n * mj * mj);
                s += ui * vj;
            }
            assert!((pe.utv[(i, j)] - s).abs() < 1e-12, "({i},{j}) {} vs {s}", pe.utv[(i, j)]);
        }
    }
}

#[test]
fn pseudo_eigs_depth_guard() {
    let params = ModelConfig::two_layer_demo().to_params().unwrap();
    let consts = weighted_signal(&params).unwrap();
    let g = random_layered(10, &[2, 4], &[5, 3], 1).unwrap();
    let labels = Assignment::new(vec![0; 10], 2).unwrap();
    let err = build_pseudo_eigs(&g, &params.weights, &consts, &labels, 3, Some(1)).unwrap_err();
    assert!(matches!(err, Error::DepthTooLarge { depth: 3, cap: 1 }));
    assert_eq!(depth_cap(&params, &consts, 4000), 1);
}
