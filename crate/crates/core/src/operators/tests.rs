use super::*;
use crate::dense;
use crate::sampler::random_layered;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// `(x, layer, edge, vertex set)` for every oriented edge in id order,
/// enumerated straight from the edge lists.
fn oriented(g: &LayeredHypergraph) -> Vec<(u32, usize, usize, Vec<u32>)> {
    let mut out = Vec::new();
    for k in 0..g.num_layers() {
        for (e, verts) in g.edges(k).enumerate() {
            for &x in verts {
                out.push((x, k, e, verts.to_vec()));
            }
        }
    }
    out
}

/// Definitional `O(m^2)` construction of `B`.
fn naive_b(g: &LayeredHypergraph, w: &[f64]) -> Mat<f64> {
    let o = oriented(g);
    let m = o.len();
    let mut b = Mat::<f64>::zeros(m, m);
    for (i, (x, ke, ee, e)) in o.iter().enumerate() {
        for (j, (y, kf, ef, f)) in o.iter().enumerate() {
            let y_in_e_minus_x = y != x && e.contains(y);
            let different = (ke, ee) != (kf, ef);
            if y_in_e_minus_x && different && f.contains(y) {
                b[(i, j)] = w[*kf];
            }
        }
    }
    b
}

fn random_instance(seed: u64, n: usize, q_sizes: &[usize], per_layer: usize) -> (LayeredHypergraph, Vec<f64>) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<usize> = q_sizes.iter().map(|_| rng.random_range(0..=per_layer)).collect();
    let g = random_layered(n, q_sizes, &edges, seed).unwrap();
    let w = q_sizes
        .iter()
        .map(|_| {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * rng.random_range(0.2..1.5)
        })
        .collect();
    (g, w)
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[i] = 1.0;
    e
}

#[test]
fn single_edge_has_no_step() {
    let g = LayeredHypergraph::new(2, vec![2], vec![vec![vec![0, 1]]]).unwrap();
    let op = NonBacktracking::new(&g, &[1.0]).unwrap();
    assert_eq!(op.matvec(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn path_single_step() {
    // ids: 0 = (0 -> {0,1}), 1 = (1 -> {0,1}), 2 = (1 -> {1,2}), 3 = (2 -> {1,2})
    let g = LayeredHypergraph::new(3, vec![2], vec![vec![vec![0, 1], vec![1, 2]]]).unwrap();
    let op = NonBacktracking::new(&g, &[1.0]).unwrap();
    assert_eq!(op.matvec_transpose(&unit(4, 0)).unwrap(), unit(4, 2));
    assert_eq!(op.matvec(&unit(4, 2)).unwrap(), unit(4, 0));
    assert_eq!(op.matvec(&unit(4, 1)).unwrap(), unit(4, 3));
}

#[test]
fn dimension_is_checked() {
    let g = LayeredHypergraph::new(3, vec![2], vec![vec![vec![0, 1]]]).unwrap();
    let op = NonBacktracking::new(&g, &[1.0]).unwrap();
    assert!(matches!(op.matvec(&[1.0]), Err(Error::DimensionMismatch { .. })));
    assert!(NonBacktracking::new(&g, &[1.0, 2.0]).is_err());
}

fn arb_instance() -> impl Strategy<Value = (LayeredHypergraph, Vec<f64>)> {
    (
        5usize..40,
        prop::collection::vec((2usize..5, 0usize..40, -2.0f64..2.0), 1..4),
        any::<u64>(),
    )
        .prop_map(|(n, layers, seed)| {
            let q: Vec<usize> = layers.iter().map(|l| l.0).collect();
            let m: Vec<usize> = layers
                .iter()
                .map(|l| l.1.min(crate::sampler::binom_u128(n, l.0).unwrap() as usize))
                .collect();
            let w: Vec<f64> = layers.iter().map(|l| l.2).collect();
            (random_layered(n, &q, &m, seed).unwrap(), w)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn implicit_b_matches_definition((g, w) in arb_instance(), seed in any::<u64>()) {
        let op = NonBacktracking::new(&g, &w).unwrap();
        let naive = naive_b(&g, &w);
        prop_assert_eq!(op.m(), g.edge_counts().iter().zip(g.q_sizes()).map(|(e, q)| e * q).sum::<usize>());
        prop_assert!(dense::max_abs(&(&op.to_dense() - &naive)) == 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..op.m()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = op.matvec(&u).unwrap();
        let slow: Vec<f64> = (0..op.m()).map(|i| (0..op.m()).map(|j| naive[(i, j)] * u[j]).sum()).collect();
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
        let fast_t = op.matvec_transpose(&u).unwrap();
        let slow_t: Vec<f64> = (0..op.m()).map(|j| (0..op.m()).map(|i| naive[(i, j)] * u[i]).sum()).collect();
        for (a, b) in fast_t.iter().zip(&slow_t) {
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn j_counts_and_quadratic_identity((g, w) in arb_instance()) {
        let op = NonBacktracking::new(&g, &w).unwrap();
        prop_assume!(op.m() <= 500);
        prop_assert_eq!(j_spectrum_dense(&op).unwrap(), j_spectrum_counts(&g));
        let u: Vec<f64> = (0..op.m()).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let ju = op.j_apply(&u).unwrap();
        let jju = op.j_apply(&ju).unwrap();
        for id in 0..op.m() {
            let (k, _, _) = op.index().locate(id);
            let q = g.q(k) as f64;
            prop_assert!((jju[id] - ((q - 2.0) * ju[id] + (q - 1.0) * u[id])).abs() < 1e-12);
        }
    }
}

#[test]
fn single_edge_j_block() {
    for q in 2..6 {
        let g = LayeredHypergraph::new(q, vec![q], vec![vec![(0..q as u32).collect()]]).unwrap();
        let op = NonBacktracking::new(&g, &[1.0]).unwrap();
        let counts = j_spectrum_dense(&op).unwrap();
        let mut expect = BTreeMap::new();
        *expect.entry(q as i64 - 1).or_insert(0) += 1;
        *expect.entry(-1).or_insert(0) += q - 1;
        assert_eq!(counts, expect);
    }
}

#[test]
fn j_inverse_closed_form() {
    let (g, w) = random_instance(3, 15, &[2, 3, 5], 10);
    let op = NonBacktracking::new(&g, &w).unwrap();
    let u: Vec<C64> = (0..op.m()).map(|i| C64::new(i as f64, 1.0 - i as f64 * 0.5)).collect();
    let inv = op.j_inv_apply_c(&u);
    let re: Vec<f64> = inv.iter().map(|z| z.re).collect();
    let im: Vec<f64> = inv.iter().map(|z| z.im).collect();
    let (jr, ji) = (op.j_apply(&re).unwrap(), op.j_apply(&im).unwrap());
    for i in 0..op.m() {
        assert!((C64::new(jr[i], ji[i]) - u[i]).norm() < 1e-12);
    }
}

#[test]
fn parity_time_power_zero_is_exact() {
    let (g, w) = random_instance(11, 20, &[2, 3], 15);
    let op = NonBacktracking::new(&g, &w).unwrap();
    let r = parity_time_residual(&op, 0, ResidualMode::Dense, 0).unwrap();
    assert_eq!(r.residual, 0.0);
}

#[test]
fn parity_time_dense_small_powers() {
    for seed in 0..5 {
        let (g, w) = random_instance(seed, 20, &[2, 3, 4], 12);
        let op = NonBacktracking::new(&g, &w).unwrap();
        let r1 = parity_time_residual(&op, 1, ResidualMode::Dense, 0).unwrap();
        assert!(r1.residual <= 1e-12, "{}", r1.residual);
        for k in 2..=6 {
            let r = parity_time_residual(&op, k, ResidualMode::Dense, 0).unwrap();
            assert!(r.ok, "k={k}: {} > {}", r.residual, r.bound);
        }
    }
}

#[test]
fn parity_time_probes_large() {
    let g = random_layered(3000, &[2, 3], &[3000, 1400], 5).unwrap();
    let op = NonBacktracking::new(&g, &[0.8, -0.6]).unwrap();
    assert!(op.m() >= 10_000);
    let r = parity_time_residual(&op, 5, ResidualMode::Probes(4), 1).unwrap();
    assert!(r.residual <= 1e-9, "{}", r.residual);
}

/// Direct block assembly of the reduced matrix.
fn naive_reduced(g: &LayeredHypergraph, w: &[f64]) -> Mat<f64> {
    let n = g.n();
    let kk = g.num_layers();
    let mut out = Mat::<f64>::zeros(2 * kk * n, 2 * kk * n);
    for k in 0..kk {
        let a = g.adjacency(k).to_dense();
        let d = g.degrees(k);
        for l in 0..kk {
            let delta = if k == l { 1.0 } else { 0.0 };
            let ql = g.q(l) as f64;
            for i in 0..n {
                for j in 0..n {
                    let id = if i == j { 1.0 } else { 0.0 };
                    let dk = if i == j { d[i] as f64 } else { 0.0 };
                    let (r0, c0) = (2 * k * n, 2 * l * n);
                    out[(r0 + i, c0 + n + j)] = w[l] * (dk - delta * id);
                    out[(r0 + n + i, c0 + j)] = -w[l] * (ql - 1.0) * delta * id;
                    out[(r0 + n + i, c0 + n + j)] = w[l] * (a[(i, j)] - (ql - 2.0) * delta * id);
                }
            }
        }
    }
    out
}

#[test]
fn reduced_matches_block_formula() {
    for seed in 0..10 {
        let (g, w) = random_instance(seed, 9, &[2, 3, 4], 8);
        let red = build_reduced(&g, &w).unwrap();
        let diff = &red.to_dense() - &naive_reduced(&g, &w);
        assert!(dense::max_abs(&diff) < 1e-14);
    }
}

#[test]
fn reduced_graph_layer_is_classical() {
    let (g, _) = random_instance(4, 10, &[2], 12);
    let red = build_reduced(&g, &[1.0]).unwrap();
    let n = g.n();
    let a = g.adjacency(0).to_dense();
    let d = g.degrees(0);
    let dm = red.to_dense();
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            assert_eq!(dm[(i, j)], 0.0);
            assert_eq!(dm[(i, n + j)], if i == j { d[i] as f64 - 1.0 } else { 0.0 });
            assert_eq!(dm[(n + i, j)], -id);
            assert_eq!(dm[(n + i, n + j)], a[(i, j)]);
        }
    }
}

#[test]
fn empty_reduced_spectrum() {
    let g = LayeredHypergraph::empty(4, vec![2, 3]);
    let w = [0.7, -1.3];
    let red = build_reduced(&g, &w).unwrap();
    let mut vals: Vec<C64> = dense::eigenvalues(&red.to_dense()).unwrap();
    let mut expect = Vec::new();
    for (k, &q) in [2usize, 3].iter().enumerate() {
        let blk = Mat::from_fn(2, 2, |i, j| w[k] * [[0.0, -1.0], [-(q as f64 - 1.0), -(q as f64 - 2.0)]][i][j]);
        for _ in 0..4 {
            expect.extend(dense::eigenvalues(&blk).unwrap());
        }
    }
    let key = |z: &C64| (z.re * 1e6).round() as i64;
    vals.sort_by_key(key);
    expect.sort_by_key(key);
    for (a, b) in vals.iter().zip(&expect) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn ihara_bass_small_instances() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let g = random_layered(8, &[3], &[10], 2).unwrap();
    for _ in 0..5 {
        let lam = C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let r = ihara_bass_verify(&g, &[1.0], lam, 1e-8).unwrap();
        assert!(r.ok, "{r:?}");
    }
    let g = random_layered(10, &[2, 3], &[12, 6], 3).unwrap();
    let r = ihara_bass_verify(&g, &[0.9, -0.4], C64::new(2.0, 1.0), 1e-8).unwrap();
    assert!(r.ok, "{r:?}");
    let e = LayeredHypergraph::empty(5, vec![3]);
    let r = ihara_bass_verify(&e, &[1.0], C64::new(0.5, 0.5), 1e-8).unwrap();
    assert!(r.ok, "{r:?}");
    assert!(matches!(
        ihara_bass_verify(&g, &[0.9, -0.4], C64::new(0.9, 0.0), 1e-8),
        Err(Error::PoleError { .. })
    ));
}

/// Greedy nearest matching of two multisets; returns the worst distance.
fn multiset_distance(mut a: Vec<C64>, mut b: Vec<C64>) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut worst = 0.0f64;
    a.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    while let Some(x) = a.pop() {
        let (j, d) = b
            .iter()
            .enumerate()
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        b.swap_remove(j);
    }
    worst
}

#[test]
fn reduced_spectrum_accounts_for_b() {
    for seed in 0..6 {
        let (g, w) = random_instance(100 + seed, 10, &[2, 3], 14);
        let op = NonBacktracking::new(&g, &w).unwrap();
        let mut left = dense::eigenvalues(&op.to_dense()).unwrap();
        let mut right = dense::eigenvalues(&build_reduced(&g, &w).unwrap().to_dense()).unwrap();
        let n = g.n() as i64;
        for k in 0..g.num_layers() {
            let q = g.q(k) as i64;
            let mk = g.num_edges(k) as i64;
            for (root, e) in [
                (w[k], (q - 1) * mk - n),
                (-w[k] * (q as f64 - 1.0), mk - n),
            ] {
                let target = if e >= 0 { &mut right } else { &mut left };
                target.extend(std::iter::repeat_n(C64::new(root, 0.0), e.unsigned_abs() as usize));
            }
        }
        let d = multiset_distance(left, right);
        assert!(d < 1e-6, "seed {seed}: {d}");
    }
}

fn normalized_columns(vecs: &Mat<C64>) -> Vec<Vec<C64>> {
    (0..vecs.ncols())
        .map(|j| {
            let v: Vec<C64> = (0..vecs.nrows()).map(|i| vecs[(i, j)]).collect();
            let s = dense::norm_c(&v);
            v.iter().map(|z| z / s).collect()
        })
        .collect()
}

#[test]
fn lifted_eigenvectors_satisfy_both_relations() {
    for seed in 0..4 {
        let (g, w) = random_instance(200 + seed, 20, &[2, 3], 20);
        let op = NonBacktracking::new(&g, &w).unwrap();
        let red = build_reduced(&g, &w).unwrap();
        let (vals, vecs) = dense::eigen(&op.to_dense()).unwrap();
        let mut checked = 0;
        for (lam, v) in vals.iter().zip(normalized_columns(&vecs)) {
            let Ok(l) = eigvec_lift_and_aggregate(&op, *lam, &v) else {
                continue;
            };
            checked += 1;
            assert!(red.residual(*lam, &l.tilde_v) <= 1e-8);
            let hy = red.bethe_hessian_apply(*lam, &l.y).unwrap();
            assert!(dense::norm_c(&hy) <= 1e-8, "{lam}: {}", dense::norm_c(&hy));
        }
        assert!(checked > 0);
    }
}

#[test]
fn lift_of_zero_is_zero() {
    let (g, w) = random_instance(5, 10, &[3], 6);
    let op = NonBacktracking::new(&g, &w).unwrap();
    let z = vec![C64::new(0.0, 0.0); op.m()];
    let l = eigvec_lift_and_aggregate(&op, C64::new(2.5, 0.0), &z).unwrap();
    assert!(l.tilde_v.iter().chain(&l.y).all(|x| x.norm() == 0.0));
}

#[test]
fn graph_aggregation_sums_outgoing_messages() {
    let (g, _) = random_instance(6, 12, &[2], 20);
    let op = NonBacktracking::new(&g, &[0.7]).unwrap();
    let v: Vec<C64> = (0..op.m()).map(|i| C64::new((i as f64).sin(), 0.0)).collect();
    let l = eigvec_lift_and_aggregate(&op, C64::new(3.0, 0.0), &v).unwrap();
    let mut expect = vec![0.0; g.n()];
    for (e, verts) in g.edges(0).enumerate() {
        for (pos, &x) in verts.iter().enumerate() {
            expect[x as usize] += 0.7 * v[2 * e + pos].re;
        }
    }
    for (a, b) in l.y.iter().zip(&expect) {
        assert!((a.re - b).abs() < 1e-14 && a.im == 0.0);
    }
}

#[test]
fn bethe_hessian_graph_specialisation() {
    let (g, _) = random_instance(7, 12, &[2], 20);
    let lam = 2.3;
    let h = bethe_hessian(&g, &[1.0], lam).unwrap().h.to_dense();
    let a = g.adjacency(0).to_dense();
    let d = g.degrees(0);
    let s = lam * lam - 1.0;
    for i in 0..g.n() {
        for j in 0..g.n() {
            let id = if i == j { 1.0 } else { 0.0 };
            let classical = s * id - lam * a[(i, j)] + id * d[i] as f64;
            assert!((s * h[(i, j)] - classical).abs() < 1e-12);
        }
    }
}

#[test]
fn bethe_hessian_limits_and_symmetry() {
    let (g, w) = random_instance(8, 15, &[2, 3, 4], 10);
    let h = bethe_hessian(&g, &w, 1e8).unwrap().h;
    let hd = h.to_dense();
    for i in 0..g.n() {
        for j in 0..g.n() {
            let id = if i == j { 1.0 } else { 0.0 };
            assert!((hd[(i, j)] - id).abs() < 1e-7);
        }
    }
    let h = bethe_hessian(&g, &w, 1.7).unwrap().h;
    assert!(h.asymmetry() <= 1e-12);
    let pole = -w[1] * 2.0;
    assert!(matches!(bethe_hessian(&g, &w, pole), Err(Error::PoleError { .. })));
}

#[test]
fn assembled_and_implicit_bethe_hessian_agree() {
    let (g, w) = random_instance(9, 15, &[2, 4], 10);
    let red = build_reduced(&g, &w).unwrap();
    let h = bethe_hessian(&g, &w, 1.9).unwrap().h;
    let y: Vec<f64> = (0..g.n()).map(|i| (i as f64 * 0.3).cos()).collect();
    let mut hy = vec![0.0; g.n()];
    h.matvec(&y, &mut hy);
    let yc: Vec<C64> = y.iter().map(|&x| C64::new(x, 0.0)).collect();
    let hy2 = red.bethe_hessian_apply(C64::new(1.9, 0.0), &yc).unwrap();
    for (a, b) in hy.iter().zip(&hy2) {
        assert!((a - b.re).abs() < 1e-12);
    }
}
