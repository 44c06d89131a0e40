use faer::Mat;
use serde::Serialize;

use super::{LinearOperator, NonBacktracking};
use crate::dense::{self, C64};
use crate::hypergraph::LayeredHypergraph;
use crate::sparse::CsrMatrix;
use crate::{par, Error, Result};

/// The reduced non-backtracking matrix on `R^{2Kn}`.
///
/// Layer `k` owns the coordinates `[2kn, 2kn + n)` (incoming part) and
/// `[2kn + n, 2kn + 2n)` (outgoing part). Block `(k, l)` is
/// `w_l [[0, D_k - d_kl I], [-(q_l - 1) d_kl I, A_k - (q_l - 2) d_kl I]]`.
#[derive(Debug, Clone)]
pub struct ReducedNB {
    n: usize,
    q: Vec<usize>,
    w: Vec<f64>,
    adj: Vec<CsrMatrix>,
    deg: Vec<Vec<f64>>,
}

pub fn build_reduced(g: &LayeredHypergraph, w: &[f64]) -> Result<ReducedNB> {
    if w.len() != g.num_layers() {
        return Err(Error::DimensionMismatch {
            expected: g.num_layers(),
            got: w.len(),
        });
    }
    let kk = g.num_layers();
    Ok(ReducedNB {
        n: g.n(),
        q: g.q_sizes().to_vec(),
        w: w.to_vec(),
        adj: (0..kk).map(|k| g.adjacency(k)).collect(),
        deg: (0..kk)
            .map(|k| g.degrees(k).into_iter().map(f64::from).collect())
            .collect(),
    })
}

fn check_poles(w: &[f64], q: &[usize], lambda: C64) -> Result<()> {
    for (&wk, &qk) in w.iter().zip(q) {
        for pole in [wk, -wk * (qk as f64 - 1.0)] {
            if (lambda - pole).norm() <= 1e-9 * pole.abs().max(1.0) {
                return Err(Error::PoleError { lambda: lambda.re });
            }
        }
    }
    Ok(())
}

impl ReducedNB {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_layers(&self) -> usize {
        self.q.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn q_sizes(&self) -> &[usize] {
        &self.q
    }

    pub fn adjacency(&self, k: usize) -> &CsrMatrix {
        &self.adj[k]
    }

    pub fn degrees(&self, k: usize) -> &[f64] {
        &self.deg[k]
    }

    /// Weighted aggregation `y = sum_k w_k v_k^->` of a vector in `R^{2Kn}`.
    pub fn aggregate<T>(&self, v: &[T]) -> Vec<T>
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let n = self.n;
        (0..n)
            .map(|x| {
                (0..self.num_layers()).fold(T::default(), |acc, k| {
                    acc + v[2 * k * n + n + x] * self.w[k]
                })
            })
            .collect()
    }

    /// Dense copy, one column per basis vector.
    pub fn to_dense(&self) -> Mat<f64> {
        let d = self.dim();
        let mut out = Mat::<f64>::zeros(d, d);
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..d {
                out[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        out
    }

    /// `H(lambda) y` for complex `lambda`, without assembling `H`.
    pub fn bethe_hessian_apply(&self, lambda: C64, y: &[C64]) -> Result<Vec<C64>> {
        check_poles(&self.w, &self.q, lambda)?;
        let mut out = y.to_vec();
        for k in 0..self.num_layers() {
            let wk = self.w[k];
            let qk = self.q[k] as f64;
            let delta = (lambda - wk) * (lambda + wk * (qk - 1.0));
            let alpha = lambda * wk / delta;
            let beta = C64::new(wk * wk * (qk - 1.0), 0.0) / delta;
            for (x, o) in out.iter_mut().enumerate() {
                let ay: C64 = self.adj[k].row(x).map(|(c, v)| y[c] * v).sum();
                *o += -alpha * ay + beta * self.deg[k][x] * y[x];
            }
        }
        Ok(out)
    }

    /// `||B~ v - lambda v||`.
    pub fn residual(&self, lambda: C64, v: &[C64]) -> f64 {
        let bv = self.apply_c(v);
        bv.iter()
            .zip(v)
            .map(|(a, b)| (a - lambda * b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl LinearOperator for ReducedNB {
    fn dim(&self) -> usize {
        2 * self.num_layers() * self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let kk = self.num_layers();
        assert_eq!(x.len(), 2 * kk * n);
        assert_eq!(y.len(), 2 * kk * n);
        let s: Vec<f64> = par::map_range(n, |v| {
            (0..kk).map(|l| self.w[l] * x[2 * l * n + n + v]).sum()
        });
        for k in 0..kk {
            let (wk, qk) = (self.w[k], self.q[k] as f64);
            let back_in = &x[2 * k * n..2 * k * n + n];
            let fwd_in = &x[2 * k * n + n..2 * k * n + 2 * n];
            let (back_out, fwd_out) = y[2 * k * n..2 * k * n + 2 * n].split_at_mut(n);
            par::for_each_mut(back_out, |v, o| {
                *o = self.deg[k][v] * s[v] - wk * fwd_in[v];
            });
            let a = &self.adj[k];
            par::for_each_mut(fwd_out, |v, o| {
                let as_: f64 = a.row(v).map(|(c, val)| val * s[c]).sum();
                *o = as_ - wk * (qk - 2.0) * fwd_in[v] - wk * (qk - 1.0) * back_in[v];
            });
        }
    }
}

/// Assembled `H(lambda) = I - sum_k [w_k lambda / D_k] A_k
/// + sum_k [w_k^2 (q_k - 1) / D_k] D_k` with
/// `D_k = (lambda - w_k)(lambda + w_k (q_k - 1))`.
#[derive(Debug, Clone)]
pub struct BetheHessian {
    pub lambda: f64,
    pub h: CsrMatrix,
}

pub fn bethe_hessian(g: &LayeredHypergraph, w: &[f64], lambda: f64) -> Result<BetheHessian> {
    if w.len() != g.num_layers() {
        return Err(Error::DimensionMismatch {
            expected: g.num_layers(),
            got: w.len(),
        });
    }
    check_poles(w, g.q_sizes(), C64::new(lambda, 0.0))?;
    let n = g.n();
    let mut trip: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
    for k in 0..g.num_layers() {
        let (wk, qk) = (w[k], g.q(k) as f64);
        let delta = (lambda - wk) * (lambda + wk * (qk - 1.0));
        let alpha = wk * lambda / delta;
        let beta = wk * wk * (qk - 1.0) / delta;
        let a = g.adjacency(k);
        for x in 0..n {
            for (y, v) in a.row(x) {
                trip.push((x, y, -alpha * v));
            }
        }
        for (x, d) in g.degrees(k).into_iter().enumerate() {
            if d > 0 {
                trip.push((x, x, beta * d as f64));
            }
        }
    }
    Ok(BetheHessian {
        lambda,
        h: CsrMatrix::from_triplets(n, n, trip),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IharaBassReport {
    pub lambda: (f64, f64),
    /// `log det(lambda I - B)` as (log-modulus, phase).
    pub lhs: (f64, f64),
    /// Log of the reduced determinant times the trivial factors.
    pub rhs: (f64, f64),
    pub log_modulus_rel_err: f64,
    pub phase_err: f64,
    pub ok: bool,
}

/// Largest `m` for which the dense determinant is attempted.
pub const IHARA_BASS_MAX_M: usize = 3000;

/// Compares `det(lambda I - B)` with
/// `det(lambda I - B~) prod_k (lambda - w_k)^{(q_k - 1) m_k - n}
/// (lambda + w_k (q_k - 1))^{m_k - n}` in log form.
pub fn ihara_bass_verify(
    g: &LayeredHypergraph,
    w: &[f64],
    lambda: C64,
    tol: f64,
) -> Result<IharaBassReport> {
    let op = NonBacktracking::new(g, w)?;
    if op.m() > IHARA_BASS_MAX_M {
        return Err(Error::NotApplicable(format!(
            "m = {} exceeds the dense determinant limit {IHARA_BASS_MAX_M}",
            op.m()
        )));
    }
    check_poles(w, g.q_sizes(), lambda)?;
    let shifted = |a: Mat<f64>| {
        let d = a.nrows();
        Mat::<C64>::from_fn(d, d, |i, j| {
            let diag = if i == j { lambda } else { C64::new(0.0, 0.0) };
            diag - a[(i, j)]
        })
    };
    let lhs = dense::log_det(&shifted(op.to_dense()))?;
    let red = build_reduced(g, w)?;
    let (mut rm, mut rp) = dense::log_det(&shifted(red.to_dense()))?;
    let n = g.n() as f64;
    for k in 0..g.num_layers() {
        let qk = g.q(k) as f64;
        let mk = g.num_edges(k) as f64;
        for (base, e) in [
            (lambda - w[k], (qk - 1.0) * mk - n),
            (lambda + w[k] * (qk - 1.0), mk - n),
        ] {
            rm += e * base.norm().ln();
            rp += e * base.arg();
        }
    }
    let rhs = (rm, dense::wrap_phase(rp));
    let scale = 1.0f64.max(lhs.0.abs()).max(rhs.0.abs());
    let log_modulus_rel_err = (lhs.0 - rhs.0).abs() / scale;
    let phase_err = dense::wrap_phase(lhs.1 - rhs.1).abs();
    Ok(IharaBassReport {
        lambda: (lambda.re, lambda.im),
        lhs,
        rhs,
        log_modulus_rel_err,
        phase_err,
        ok: log_modulus_rel_err <= tol && phase_err <= tol,
    })
}

/// Reduced lift `v~` and aggregated vector `y` of a `B`-eigenvector.
#[derive(Debug, Clone)]
pub struct Lifted {
    pub tilde_v: Vec<C64>,
    pub y: Vec<C64>,
}

/// Maps an eigenvector `v` of `B` (eigenvalue `lambda`) to
/// `v_k^<- = S_k J_k^{-1} v`, `v_k^-> = S_k v` and `y = sum_k w_k v_k^->`.
pub fn eigvec_lift_and_aggregate(
    op: &NonBacktracking,
    lambda: C64,
    v: &[C64],
) -> Result<Lifted> {
    let g = op.graph();
    check_poles(op.weights(), g.q_sizes(), lambda)?;
    if v.len() != op.m() {
        return Err(Error::DimensionMismatch {
            expected: op.m(),
            got: v.len(),
        });
    }
    let n = g.n();
    let kk = g.num_layers();
    let jinv = op.j_inv_apply_c(v);
    let mut tilde_v = vec![C64::new(0.0, 0.0); 2 * kk * n];
    let mut y = vec![C64::new(0.0, 0.0); n];
    for k in 0..kk {
        let back = op.start_apply_c(k, &jinv);
        let fwd = op.start_apply_c(k, v);
        tilde_v[2 * k * n..2 * k * n + n].copy_from_slice(&back);
        tilde_v[2 * k * n + n..2 * k * n + 2 * n].copy_from_slice(&fwd);
        for (yx, f) in y.iter_mut().zip(&fwd) {
            *yx += f * op.weights()[k];
        }
    }
    Ok(Lifted { tilde_v, y })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigRelationReport {
    /// Eigenpairs of `B` that were lifted (poles are skipped).
    pub checked: usize,
    pub skipped: usize,
    /// Computed pairs near zero whose vector is not an eigenvector
    /// (`||B v - lambda v|| > EIGVEC_RTOL ||B||`). `B` is typically defective
    /// at zero; those pairs are replaced by an exact kernel basis.
    pub defective_zero: usize,
    /// Dimension of the kernel basis checked with `lambda = 0`.
    pub kernel_dim: usize,
    /// Inaccurate pairs away from zero; any makes the check fail.
    pub unresolved: usize,
    /// `max ||B~ v~ - lambda v~||` for unit eigenvectors `v`.
    pub max_lift_residual: f64,
    /// `max ||H(lambda) y||` for unit eigenvectors `v`.
    pub max_bethe_residual: f64,
    pub ok: bool,
}

/// Backward-error bound, relative to `||B||_F`, for a computed eigenvector to
/// count as one.
pub const EIGVEC_RTOL: f64 = 1e-10;

/// Dense eigendecomposition of `B`, then both residuals for every pair.
pub fn eig_relation_check(g: &LayeredHypergraph, w: &[f64], tol: f64) -> Result<EigRelationReport> {
    let op = NonBacktracking::new(g, w)?;
    if op.m() > IHARA_BASS_MAX_M {
        return Err(Error::NotApplicable(format!(
            "m = {} exceeds the dense eigensolver limit {IHARA_BASS_MAX_M}",
            op.m()
        )));
    }
    let red = build_reduced(g, w)?;
    let b = op.to_dense();
    let bnorm = b.norm_l2().max(1.0);
    let (vals, vecs) = dense::eigen(&b)?;
    let (mut checked, mut skipped, mut defective_zero, mut unresolved) = (0, 0, 0, 0);
    let (mut lift, mut bethe) = (0.0f64, 0.0f64);
    let mut check = |lam: C64, v: &[C64]| -> Result<bool> {
        let l = match eigvec_lift_and_aggregate(&op, lam, v) {
            Ok(l) => l,
            Err(Error::PoleError { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        lift = lift.max(red.residual(lam, &l.tilde_v));
        bethe = bethe.max(dense::norm_c(&red.bethe_hessian_apply(lam, &l.y)?));
        Ok(true)
    };
    for (j, lam) in vals.iter().enumerate() {
        let v: Vec<C64> = (0..vecs.nrows()).map(|i| vecs[(i, j)]).collect();
        let s = dense::norm_c(&v);
        let v: Vec<C64> = v.iter().map(|z| z / s).collect();
        let bv = op.apply_c(&v);
        let res = bv.iter().zip(&v).map(|(a, x)| (a - lam * x).norm_sqr()).sum::<f64>().sqrt();
        if res > EIGVEC_RTOL * bnorm {
            if lam.norm() <= 1e-3 {
                defective_zero += 1;
            } else {
                unresolved += 1;
            }
            continue;
        }
        if check(*lam, &v)? {
            checked += 1;
        } else {
            skipped += 1;
        }
    }
    let mut kernel_dim = 0;
    if defective_zero > 0 {
        for k in dense::kernel(&b, 1e-12)? {
            let v: Vec<C64> = k.iter().map(|&x| C64::new(x, 0.0)).collect();
            check(C64::new(0.0, 0.0), &v)?;
            kernel_dim += 1;
        }
    }
    Ok(EigRelationReport {
        checked,
        skipped,
        defective_zero,
        kernel_dim,
        unresolved,
        max_lift_residual: lift,
        max_bethe_residual: bethe,
        ok: lift <= tol && bethe <= tol && unresolved == 0,
    })
}
