//! Top eigenpairs of non-backtracking operators and their post-processing.
//!
//! [`top_eigs`] is a restarted Arnoldi method in real arithmetic. After each
//! cycle a real basis of the wanted Ritz vectors (conjugate pairs kept
//! together) is orthonormalised and kept as the start of the next Krylov
//! decomposition `A V = V G + f b^T`. This thick restart keeps the same
//! subspace as implicit restarting with exact shifts.

use faer::Mat;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dense::{self, C64};
use crate::hypergraph::{Assignment, LayeredHypergraph};
use crate::model::{ModelParams, SpectralConstants};
use crate::operators::{LinearOperator, NonBacktracking, ReducedNB};
use crate::rng::{substream, tag, StreamRng};
use crate::{par, Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Serialize)]
pub struct EigOptions {
    /// Number of largest-modulus eigenvalues wanted.
    pub k: usize,
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov dimension; `max(30, 4k)` when unset.
    pub krylov_dim: Option<usize>,
    /// Wanted values of modulus below this bound only need a residual of
    /// `sqrt(tol)`.
    pub converge_above: Option<f64>,
    pub seed: u64,
}

impl EigOptions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            tol: 1e-8,
            max_restarts: 300,
            krylov_dim: None,
            converge_above: None,
            seed: 0,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: C64,
    /// Unit vector; for real eigenvalues the largest entry is real positive.
    pub vector: Vec<C64>,
    /// `||A x - value x||` for the unit vector `x`.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Ordered by modulus, descending.
    pub pairs: Vec<RitzPair>,
    pub converged: bool,
    pub restarts: usize,
    pub matvecs: usize,
    pub krylov_dim: usize,
    pub seed: u64,
}

impl EigResult {
    pub fn values(&self) -> Vec<C64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    /// Turns an unconverged result into [`Error::NoConvergence`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.restarts,
                converged: self.pairs.iter().filter(|p| p.converged).count(),
                wanted: self.pairs.len(),
            })
        }
    }
}

fn gaussian(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

const CHUNK: usize = 4096;

/// Dot product summed per fixed chunk, so the result does not depend on
/// the thread count.
fn pdot(a: &[f64], b: &[f64]) -> f64 {
    let chunks = a.len().div_ceil(CHUNK);
    let parts = par::map_range(chunks, |c| {
        let r = c * CHUNK..((c + 1) * CHUNK).min(a.len());
        a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum::<f64>()
    });
    parts.iter().sum()
}

fn pnorm(a: &[f64]) -> f64 {
    pdot(a, a).sqrt()
}

fn scale(v: &mut [f64], s: f64) {
    par::for_each_chunk_mut(v, CHUNK, |_, ch| ch.iter_mut().for_each(|x| *x *= s));
}

/// `w -= c v`.
fn psub(w: &mut [f64], c: f64, v: &[f64]) {
    par::for_each_chunk_mut(w, CHUNK, |ci, ch| {
        let v = &v[ci * CHUNK..];
        for (x, vi) in ch.iter_mut().zip(v) {
            *x -= c * vi;
        }
    });
}

/// Modified Gram–Schmidt against `basis`, repeated once when more than
/// `1 - 1/sqrt 2` of the norm is lost. Returns the projection coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut h = vec![0.0; basis.len()];
    for pass in 0..2 {
        let before = pnorm(w);
        for (hi, v) in h.iter_mut().zip(basis) {
            let c = pdot(v, w);
            psub(w, c, v);
            *hi += c;
        }
        if pass == 0 && pnorm(w) > std::f64::consts::FRAC_1_SQRT_2 * before {
            break;
        }
    }
    h
}

/// Real Krylov decomposition `A V = V G + f b^T` with orthonormal `V` and
/// unit `f` orthogonal to `V`.
struct Krylov<'a> {
    op: &'a dyn LinearOperator,
    basis: Vec<Vec<f64>>,
    g: Mat<f64>,
    f: Vec<f64>,
    b: Vec<f64>,
    matvecs: usize,
    rng: StreamRng,
}

impl<'a> Krylov<'a> {
    fn new(op: &'a dyn LinearOperator, p: usize, seed: u64) -> Result<Self> {
        let mut rng = substream(seed, &[tag::SPECTRAL_START]);
        let mut f = gaussian(&mut rng, op.dim());
        let nf = pnorm(&f);
        if nf == 0.0 {
            return Err(Error::ZeroVector);
        }
        scale(&mut f, 1.0 / nf);
        Ok(Self {
            op,
            basis: Vec::with_capacity(p),
            g: Mat::zeros(p, p),
            f,
            b: Vec::new(),
            matvecs: 0,
            rng,
        })
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn restart_from(&mut self, mut f: Vec<f64>) {
        let nf = pnorm(&f);
        if nf > 0.0 {
            scale(&mut f, 1.0 / nf);
            self.f = f;
        }
        self.basis.clear();
        self.b.clear();
    }

    /// A fresh unit vector orthogonal to the basis.
    fn random_orthogonal(&mut self) -> Vec<f64> {
        loop {
            let mut v = gaussian(&mut self.rng, self.op.dim());
            let before = pnorm(&v);
            orthogonalize(&self.basis, &mut v);
            let nv = pnorm(&v);
            if nv > 1e-8 * before {
                scale(&mut v, 1.0 / nv);
                return v;
            }
        }
    }

    fn expand(&mut self, p: usize) {
        let n = self.op.dim();
        while self.m() < p {
            let j = self.m();
            let v = std::mem::take(&mut self.f);
            for (i, bi) in self.b.iter().enumerate() {
                self.g[(j, i)] = *bi;
            }
            let mut w = vec![0.0; n];
            self.op.apply(&v, &mut w);
            self.matvecs += 1;
            let norm_av = pnorm(&w);
            self.basis.push(v);
            let h = orthogonalize(&self.basis, &mut w);
            for (i, hi) in h.into_iter().enumerate() {
                self.g[(i, j)] = hi;
            }
            for r in (j + 1)..self.g.nrows() {
                self.g[(r, j)] = 0.0;
            }
            let beta = pnorm(&w);
            self.b = vec![0.0; j + 1];
            if j + 1 == n {
                break;
            }
            if beta > 1e-12 * norm_av && beta > 0.0 {
                scale(&mut w, 1.0 / beta);
                self.b[j] = beta;
                self.f = w;
            } else {
                self.f = self.random_orthogonal();
            }
        }
    }

    fn rayleigh(&self) -> Mat<f64> {
        let m = self.m();
        Mat::from_fn(m, m, |i, j| self.g[(i, j)])
    }

    fn combine(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.op.dim()];
        par::for_each_chunk_mut(&mut x, CHUNK, |ci, ch| {
            for (v, &c) in self.basis.iter().zip(y) {
                if c != 0.0 {
                    for (xi, vi) in ch.iter_mut().zip(&v[ci * CHUNK..]) {
                        *xi += c * vi;
                    }
                }
            }
        });
        x
    }

    fn combine_c(&self, y: &[C64]) -> Vec<C64> {
        let re: Vec<f64> = y.iter().map(|z| z.re).collect();
        let im: Vec<f64> = y.iter().map(|z| z.im).collect();
        let (xr, xi) = (self.combine(&re), self.combine(&im));
        xr.into_iter().zip(xi).map(|(a, b)| C64::new(a, b)).collect()
    }

    /// Keeps `span(V Q)` for orthonormal `q` (m x s) spanning an invariant
    /// subspace of `G`. Returns false if `q` is not invariant enough, in
    /// which case nothing changes.
    fn compress(&mut self, q: &Mat<f64>) -> bool {
        let m = self.m();
        let s = q.ncols();
        let g = self.rayleigh();
        let gq = &g * q;
        let gn = q.transpose() * &gq;
        let err = &gq - q * &gn;
        if err.norm_l2() > 1e-8 * g.norm_l2().max(1e-300) {
            return false;
        }
        let new_basis: Vec<Vec<f64>> = (0..s)
            .map(|j| {
                let col: Vec<f64> = (0..m).map(|i| q[(i, j)]).collect();
                self.combine(&col)
            })
            .collect();
        let new_b: Vec<f64> = (0..s)
            .map(|j| (0..m).map(|i| self.b[i] * q[(i, j)]).sum())
            .collect();
        self.basis = new_basis;
        self.b = new_b;
        self.g.fill(0.0);
        for i in 0..s {
            for j in 0..s {
                self.g[(i, j)] = gn[(i, j)];
            }
        }
        true
    }
}

/// Orthonormal basis of the columns of `y` by two passes of modified
/// Gram–Schmidt, or `None` if they are numerically dependent.
fn orthonormal_columns(y: &[Vec<f64>]) -> Option<Mat<f64>> {
    let m = y.first().map_or(0, Vec::len);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(y.len());
    for c in y {
        let mut c = c.clone();
        let before = pnorm(&c);
        orthogonalize(&cols, &mut c);
        orthogonalize(&cols, &mut c);
        let nc = pnorm(&c);
        if nc <= 1e-8 * before || nc == 0.0 {
            return None;
        }
        scale(&mut c, 1.0 / nc);
        cols.push(c);
    }
    Some(Mat::from_fn(m, cols.len(), |i, j| cols[j][i]))
}

fn by_modulus(vals: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (vals[a], vals[b]);
        y.norm()
            .total_cmp(&x.norm())
            .then(y.re.total_cmp(&x.re))
            .then(y.im.total_cmp(&x.im))
    });
    order
}

fn is_real(z: C64) -> bool {
    z.im.abs() <= 1e-10 * z.norm().max(1.0)
}

fn conj_close(a: C64, b: C64) -> bool {
    (a - b.conj()).norm() <= 1e-6 * a.norm().max(1.0)
}

/// Number of leading entries of `order` to report: `k`, plus one if the
/// `k`-th value is complex and its conjugate would otherwise be cut off.
/// The partner is moved into position `k`.
fn wanted_count(vals: &[C64], order: &mut [usize], k: usize) -> usize {
    let kw = k.min(order.len());
    if kw == 0 || kw == order.len() {
        return kw;
    }
    let last = vals[order[kw - 1]];
    if is_real(last) || order[..kw - 1].iter().any(|&i| conj_close(vals[i], last)) {
        return kw;
    }
    match order[kw..].iter().position(|&i| conj_close(vals[i], last)) {
        Some(pos) => {
            order.swap(kw, kw + pos);
            kw + 1
        }
        None => kw,
    }
}

/// Rotates `x` so that its largest entry is real positive and scales it to
/// unit norm.
fn normalize_phase(x: &mut [C64]) {
    let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nx == 0.0 {
        return;
    }
    let piv = x
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(ZERO);
    let rot = piv.conj() / (piv.norm() * nx);
    for xi in x.iter_mut() {
        *xi *= rot;
    }
}

/// Real basis of the span of the eigenvectors `idx` of `G`: real parts of
/// real eigenvectors, real and imaginary parts of one member per complex
/// pair.
fn real_span(vals: &[C64], vecs: &Mat<C64>, idx: &[usize]) -> Vec<Vec<f64>> {
    let m = vecs.nrows();
    let mut out = Vec::new();
    for (pos, &i) in idx.iter().enumerate() {
        let mut y: Vec<C64> = (0..m).map(|r| vecs[(r, i)]).collect();
        if is_real(vals[i]) {
            normalize_phase(&mut y);
            out.push(y.iter().map(|z| z.re).collect());
        } else if !idx[..pos].iter().any(|&j| conj_close(vals[j], vals[i])) {
            out.push(y.iter().map(|z| z.re).collect());
            out.push(y.iter().map(|z| z.im).collect());
        }
    }
    out
}

/// The `k` eigenvalues of largest modulus of a real operator, with unit
/// eigenvectors. Complex-conjugate pairs are never split, so up to `k + 1`
/// pairs may be returned.
pub fn top_eigs(op: &dyn LinearOperator, opts: &EigOptions) -> Result<EigResult> {
    let n = op.dim();
    let k = opts.k;
    if k > n {
        return Err(Error::IndexOutOfRange { index: k, limit: n });
    }
    if k == 0 {
        return Ok(EigResult {
            pairs: Vec::new(),
            converged: true,
            restarts: 0,
            matvecs: 0,
            krylov_dim: 0,
            seed: opts.seed,
        });
    }
    let p = opts
        .krylov_dim
        .unwrap_or_else(|| 30.max(4 * k))
        .max(k + 3)
        .min(n);
    let mut kr = Krylov::new(op, p, opts.seed)?;
    let mut restarts = 0;
    loop {
        kr.expand(p);
        let (vals, vecs) = dense::eigen(&kr.rayleigh())?;
        let m = vals.len();
        let est: Vec<f64> = (0..m)
            .map(|i| {
                let bi: C64 = (0..m).map(|j| vecs[(j, i)] * kr.b[j]).sum();
                let ny = (0..m).map(|j| vecs[(j, i)].norm_sqr()).sum::<f64>().sqrt();
                bi.norm() / ny.max(1e-300)
            })
            .collect();
        let mut order = by_modulus(&vals);
        let kw = wanted_count(&vals, &mut order, k);
        let floor = opts.converge_above.unwrap_or(f64::NEG_INFINITY);
        let done = order[..kw].iter().all(|&i| {
            est[i] <= opts.tol || (vals[i].norm() < floor && est[i] <= opts.tol.sqrt())
        });
        if done || restarts >= opts.max_restarts {
            let pairs = order[..kw]
                .iter()
                .map(|&i| {
                    let y: Vec<C64> = (0..m).map(|j| vecs[(j, i)]).collect();
                    let mut x = kr.combine_c(&y);
                    normalize_phase(&mut x);
                    let ax = op.apply_c(&x);
                    let residual = ax
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - vals[i] * b).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    RitzPair {
                        value: vals[i],
                        vector: x,
                        residual,
                        converged: est[i] <= opts.tol,
                    }
                })
                .collect();
            return Ok(EigResult {
                pairs,
                converged: done,
                restarts,
                matvecs: kr.matvecs + 2 * kw,
                krylov_dim: p,
                seed: opts.seed,
            });
        }
        restarts += 1;
        let keep = (kw + (p - kw) / 2).min(p - 2).max(kw);
        let keep = wanted_count(&vals, &mut order, keep);
        let span = real_span(&vals, &vecs, &order[..keep]);
        let compressed = span.len() < p
            && match orthonormal_columns(&span) {
                Some(q) => kr.compress(&q),
                None => false,
            };
        if !compressed {
            let mut start = vec![0.0; n];
            for y in real_span(&vals, &vecs, &order[..kw]) {
                for (s, x) in start.iter_mut().zip(kr.combine(&y)) {
                    *s += x;
                }
            }
            kr.restart_from(start);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarthetaSource {
    Given,
    Theory,
    PlugIn,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierOptions {
    pub delta_bulk: f64,
    /// Overrides both the theoretical and the plug-in value.
    pub vartheta: Option<f64>,
    /// Bound on `||Im x|| / ||Re x||` for outlier eigenvectors.
    pub imag_tol: f64,
}

impl Default for OutlierOptions {
    fn default() -> Self {
        Self {
            delta_bulk: 0.05,
            vartheta: None,
            imag_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RitzEntry {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub converged: bool,
    pub outlier: bool,
    /// Real value at `w_k` or `-w_k (q_k - 1)`, where `B~` can have
    /// eigenvalues that `B` lacks.
    pub trivial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outlier {
    pub ritz_index: usize,
    pub lambda: f64,
    pub mu_index: Option<usize>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub ritz: Vec<RitzEntry>,
    /// Sorted by `|lambda|` descending.
    pub outliers: Vec<Outlier>,
    pub vartheta: f64,
    pub vartheta_source: VarthetaSource,
    pub sqrt_vartheta: f64,
    pub delta_bulk: f64,
    pub threshold: f64,
    pub bulk_radius_est: f64,
    /// Aggregated vectors `y_i`, one per outlier.
    #[serde(skip)]
    pub y_vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub matvecs: usize,
    pub seed: u64,
    pub converged: bool,
}

/// `sum_k w_k^2 (q_k - 1) d_k` with `d_k` the observed mean degree.
pub fn vartheta_plugin(op: &ReducedNB) -> f64 {
    let n = op.n().max(1) as f64;
    (0..op.num_layers())
        .map(|k| {
            let wk = op.weights()[k];
            let deg_sum: f64 = op.degrees(k).iter().sum();
            wk * wk * (op.q_sizes()[k] as f64 - 1.0) * deg_sum / n
        })
        .sum()
}

fn resolve_vartheta(
    op: &ReducedNB,
    consts: Option<&SpectralConstants>,
    opts: &OutlierOptions,
) -> Result<(f64, VarthetaSource)> {
    let (vartheta, source) = match (opts.vartheta, consts) {
        (Some(v), _) => (v, VarthetaSource::Given),
        (None, Some(c)) => (c.vartheta, VarthetaSource::Theory),
        (None, None) => (vartheta_plugin(op), VarthetaSource::PlugIn),
    };
    if !(vartheta > 0.0) || !vartheta.is_finite() {
        return Err(Error::InvalidThreshold(vartheta));
    }
    Ok((vartheta, source))
}

fn is_trivial(op: &ReducedNB, z: C64) -> bool {
    op.weights()
        .iter()
        .zip(op.q_sizes())
        .flat_map(|(&w, &q)| [w, -w * (q as f64 - 1.0)])
        .any(|t| (z - t).norm() <= 1e-6 * t.abs().max(1.0))
}

/// Splits the Ritz values of `B~` into outliers and bulk and computes the
/// aggregated vectors of the outliers.
pub fn detect_outliers(
    op: &ReducedNB,
    eig: &EigResult,
    consts: Option<&SpectralConstants>,
    opts: &OutlierOptions,
) -> Result<SpectralSummary> {
    let (vartheta, source) = resolve_vartheta(op, consts, opts)?;
    let sqrt_vartheta = vartheta.sqrt();
    let threshold = (1.0 + opts.delta_bulk) * sqrt_vartheta;
    let mut ritz = Vec::with_capacity(eig.pairs.len());
    let mut outliers = Vec::new();
    let mut y_vectors = Vec::new();
    let mut bulk_radius_est = 0.0f64;
    for (idx, p) in eig.pairs.iter().enumerate() {
        let z = p.value;
        let real = z.im.abs() <= 1e-6 * z.norm().max(1.0);
        let trivial = real && is_trivial(op, z);
        let outlier = real && !trivial && z.norm() > threshold;
        if outlier {
            let re: Vec<f64> = p.vector.iter().map(|c| c.re).collect();
            let im_norm = p.vector.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
            let ratio = im_norm / dense::norm(&re).max(1e-300);
            if ratio > opts.imag_tol {
                return Err(Error::ComplexOutlier { index: idx, ratio });
            }
            let (mu_index, mu) = match consts {
                Some(c) if !c.mu.is_empty() => {
                    let i = (0..c.mu.len())
                        .min_by(|&a, &b| {
                            (c.mu[a] - z.re).abs().total_cmp(&(c.mu[b] - z.re).abs())
                        })
                        .unwrap_or(0);
                    (Some(i), Some(c.mu[i]))
                }
                _ => (None, None),
            };
            outliers.push(Outlier {
                ritz_index: idx,
                lambda: z.re,
                mu_index,
                mu,
            });
            y_vectors.push(op.aggregate(&re));
        } else {
            bulk_radius_est = bulk_radius_est.max(z.norm());
        }
        ritz.push(RitzEntry {
            re: z.re,
            im: z.im,
            residual: p.residual,
            converged: p.converged,
            outlier,
            trivial,
        });
    }
    let mut order: Vec<usize> = (0..outliers.len()).collect();
    order.sort_by(|&a, &b| outliers[b].lambda.abs().total_cmp(&outliers[a].lambda.abs()));
    let outliers = order.iter().map(|&i| outliers[i].clone()).collect();
    let y_vectors = order.iter().map(|&i| y_vectors[i].clone()).collect();
    Ok(SpectralSummary {
        ritz,
        outliers,
        vartheta,
        vartheta_source: source,
        sqrt_vartheta,
        delta_bulk: opts.delta_bulk,
        threshold,
        bulk_radius_est,
        y_vectors,
        iterations: eig.restarts,
        matvecs: eig.matvecs,
        seed: eig.seed,
        converged: eig.converged,
    })
}

/// Top eigenpairs of `B~` followed by [`detect_outliers`]. Unless set in
/// `eig_opts`, only values of modulus above `(1 + delta_bulk / 2) sqrt(theta)`
/// are required to converge to full tolerance.
pub fn analyze(
    g: &LayeredHypergraph,
    w: &[f64],
    consts: Option<&SpectralConstants>,
    eig_opts: &EigOptions,
    opts: &OutlierOptions,
) -> Result<SpectralSummary> {
    let op = crate::operators::build_reduced(g, w)?;
    let (vartheta, _) = resolve_vartheta(&op, consts, opts)?;
    let mut eig_opts = eig_opts.clone();
    eig_opts
        .converge_above
        .get_or_insert((1.0 + 0.5 * opts.delta_bulk) * vartheta.sqrt());
    let eig = top_eigs(&op, &eig_opts)?;
    detect_outliers(&op, &eig, consts, opts)
}

/// `max(1, floor(log_R(n) / 12))` with `R` the growth constant of `params`.
pub fn depth_cap(params: &ModelParams, consts: &SpectralConstants, n: usize) -> usize {
    let r = params.growth_constant(consts.vartheta);
    if !(r > 1.0) || n < 2 {
        return 1;
    }
    (((n as f64).ln() / r.ln()) / 12.0).floor().max(1.0) as usize
}

/// Pseudo left and right eigenvectors together with their Gram matrices.
#[derive(Debug, Clone)]
pub struct PseudoEigs {
    pub ell: usize,
    /// `u_i = B^l J chi_i / (sqrt(n) mu_i^l)`.
    pub u: Vec<Vec<f64>>,
    /// `v_i = (B^T)^l D_w chi_i / (sqrt(n) mu_i^(l+1))`.
    pub v: Vec<Vec<f64>>,
    pub utu: Mat<f64>,
    pub vtv: Mat<f64>,
    pub utv: Mat<f64>,
    /// `<v_i, B^l u_j>`.
    pub vtbu: Mat<f64>,
}

/// Builds `u_i, v_i` for the `r0` informative eigenvalues from the lifts
/// `chi_i(x -> e) = phi_i(sigma(x))`. With `cap` set, a depth beyond it is
/// an error.
pub fn build_pseudo_eigs(
    g: &LayeredHypergraph,
    w: &[f64],
    consts: &SpectralConstants,
    labels: &Assignment,
    ell: usize,
    cap: Option<usize>,
) -> Result<PseudoEigs> {
    if ell == 0 {
        return Err(Error::InvalidModel("depth must be at least 1".into()));
    }
    if let Some(cap) = cap {
        if ell > cap {
            return Err(Error::DepthTooLarge { depth: ell, cap });
        }
    }
    if labels.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: labels.len(),
        });
    }
    let r0 = consts.r0;
    if let Some(i) = (0..r0).find(|&i| consts.mu[i] == 0.0) {
        return Err(Error::DegenerateModel(format!("mu_{i} = 0")));
    }
    let op = NonBacktracking::new(g, w)?;
    let tails = op.index().tails();
    let sqrt_n = (g.n() as f64).sqrt();
    let power = |mut x: Vec<f64>, transpose: bool| -> Result<Vec<f64>> {
        for _ in 0..ell {
            x = if transpose {
                op.matvec_transpose(&x)?
            } else {
                op.matvec(&x)?
            };
        }
        Ok(x)
    };
    let mut u = Vec::with_capacity(r0);
    let mut v = Vec::with_capacity(r0);
    for i in 0..r0 {
        let phi = &consts.phi[i];
        let chi: Vec<f64> = tails
            .iter()
            .map(|&x| phi[labels.labels[x as usize] as usize])
            .collect();
        let mu = consts.mu[i];
        let su = 1.0 / (sqrt_n * mu.powi(ell as i32));
        let sv = su / mu;
        let mut ui = power(op.j_apply(&chi)?, false)?;
        let mut vi = power(op.dw_apply(&chi), true)?;
        ui.iter_mut().for_each(|x| *x *= su);
        vi.iter_mut().for_each(|x| *x *= sv);
        u.push(ui);
        v.push(vi);
    }
    let bu: Vec<Vec<f64>> = u
        .iter()
        .map(|x| power(x.clone(), false))
        .collect::<Result<_>>()?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gram = |a: &[Vec<f64>], b: &[Vec<f64>]| Mat::from_fn(r0, r0, |i, j| dot(&a[i], &b[j]));
    Ok(PseudoEigs {
        ell,
        utu: gram(&u, &u),
        vtv: gram(&v, &v),
        utv: gram(&u, &v),
        vtbu: gram(&v, &bu),
        u,
        v,
    })
}

#[cfg(test)]
mod tests;
