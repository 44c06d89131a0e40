//! Layer weight selection.
//!
//! The quality of a weight vector is the best nontrivial signal-to-noise
//! ratio `max_i mu_i(w)^2 / theta(w)`, where the `mu_i` range over the
//! eigenvalues of `Q_w` other than the Perron value `d_w`. The objective is
//! invariant under `w -> c w`, so results are reported with `||w||_inf = 1`.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use faer::Mat;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::par;
use crate::rng::{substream, tag};

/// Relative gap under which the two leading nontrivial eigenvalues count as
/// tied.
pub const TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMethod {
    Unit,
    R2,
    Numeric,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightResult {
    pub w: Vec<f64>,
    pub achieved_snr: f64,
    pub above_ks: bool,
    pub method: WeightMethod,
    /// The leading nontrivial eigenvalue is tied in modulus with another one,
    /// so the maximiser need not be unique.
    pub tie: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NumericOptions {
    pub restarts: usize,
    /// Simplex size tolerance.
    pub tol: f64,
    pub max_iters: u64,
    pub seed: u64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            tol: 1e-9,
            max_iters: 4000,
            seed: 0,
        }
    }
}

/// Nontrivial eigenvalues of `Q_w`, sorted by decreasing modulus.
///
/// Computed on the symmetric form `Pi^{1/2} D_w Pi^{1/2}` after removing the
/// eigenvector closest to `Pi^{1/2} 1`.
pub fn nontrivial_eigenvalues(params: &ModelParams, w: &[f64]) -> Result<Vec<f64>> {
    let r = params.r;
    if w.len() != params.num_layers() {
        return Err(Error::DimensionMismatch {
            expected: params.num_layers(),
            got: w.len(),
        });
    }
    let dw = params.d_matrix_weighted(w);
    let sq: Vec<f64> = params.pi.iter().map(|p| p.sqrt()).collect();
    let s = Mat::from_fn(r, r, |i, j| sq[i] * dw[(i, j)] * sq[j]);
    let (vals, vecs) = dense::sym_eig(&s)?;
    let perron = (0..r)
        .max_by(|&a, &b| {
            let ca: f64 = (0..r).map(|i| vecs[(i, a)] * sq[i]).sum::<f64>().abs();
            let cb: f64 = (0..r).map(|i| vecs[(i, b)] * sq[i]).sum::<f64>().abs();
            ca.total_cmp(&cb).then(b.cmp(&a))
        })
        .unwrap_or(0);
    let mut out: Vec<f64> = (0..r).filter(|&c| c != perron).map(|c| vals[c]).collect();
    out.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    Ok(out)
}

/// `max_i mu_i(w)^2 / theta(w)` over the nontrivial eigenvalues; zero when
/// `theta(w) = 0` or `r = 1`.
pub fn snr(params: &ModelParams, w: &[f64]) -> Result<f64> {
    let w2: Vec<f64> = w.iter().map(|x| x * x).collect();
    let theta = params.d_weighted(&w2);
    if !(theta > 0.0) {
        return Ok(0.0);
    }
    let ev = nontrivial_eigenvalues(params, w)?;
    Ok(ev.first().map_or(0.0, |m| m * m / theta))
}

/// Scales `w` so that its largest-modulus entry equals 1. The zero vector is
/// returned unchanged.
pub fn normalize(w: &[f64]) -> Vec<f64> {
    let mut best = 0.0f64;
    for &x in w {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best == 0.0 {
        return w.to_vec();
    }
    w.iter().map(|x| x / best).collect()
}

fn finish(params: &ModelParams, w: Vec<f64>, method: WeightMethod) -> Result<WeightResult> {
    let w = normalize(&w);
    let achieved_snr = snr(params, &w)?;
    let ev = if w.iter().any(|&x| x != 0.0) {
        nontrivial_eigenvalues(params, &w)?
    } else {
        Vec::new()
    };
    let tie = ev.len() >= 2 && {
        let (a, b) = (ev[0].abs(), ev[1].abs());
        a > 0.0 && (a - b) <= TIE_RTOL * a
    };
    Ok(WeightResult {
        w,
        achieved_snr,
        above_ks: achieved_snr > 1.0,
        method,
        tie,
    })
}

/// The unweighted baseline `w = 1`.
pub fn weights_unit(params: &ModelParams) -> Result<WeightResult> {
    finish(params, vec![1.0; params.num_layers()], WeightMethod::Unit)
}

/// Second eigenvalue of each layer for `r = 2`: the trace minus the Perron
/// value `d_k`.
pub fn layer_mu2(params: &ModelParams) -> Result<Vec<f64>> {
    if params.r != 2 {
        return Err(Error::NotApplicable(format!(
            "closed-form weights need two communities, model has {}",
            params.r
        )));
    }
    Ok(params
        .layers
        .iter()
        .map(|l| l.qmat[(0, 0)] + l.qmat[(1, 1)] - l.d)
        .collect())
}

/// `w_k = mu_2^(k) / d_k`, optimal for two communities.
pub fn weights_optimal_r2(params: &ModelParams) -> Result<WeightResult> {
    let mu2 = layer_mu2(params)?;
    let w = params
        .layers
        .iter()
        .zip(&mu2)
        .map(|(l, m)| if l.d > 0.0 { m / l.d } else { 0.0 })
        .collect();
    finish(params, w, WeightMethod::R2)
}

struct NegSnr<'a> {
    params: &'a ModelParams,
}

impl CostFunction for NegSnr<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let w = from_angles(theta);
        snr(self.params, &w)
            .map(|s| -s)
            .map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

/// Point on the unit sphere in `R^{len + 1}` from hyperspherical angles.
fn from_angles(theta: &[f64]) -> Vec<f64> {
    let k = theta.len() + 1;
    let mut w = vec![0.0; k];
    let mut s = 1.0;
    for (i, t) in theta.iter().enumerate() {
        w[i] = s * t.cos();
        s *= t.sin();
    }
    w[k - 1] = s;
    w
}

fn to_angles(w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let mut theta = vec![0.0; k - 1];
    for i in 0..k - 1 {
        if i == k - 2 {
            theta[i] = w[k - 1].atan2(w[k - 2]);
        } else {
            let tail = w[i + 1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            theta[i] = tail.atan2(w[i]);
        }
    }
    theta
}

/// Starting directions: `1`, the two-community optimum when defined, the
/// coordinate vectors, then seeded Gaussian directions.
fn starts(params: &ModelParams, opts: &NumericOptions) -> Vec<Vec<f64>> {
    let k = params.num_layers();
    let mut out = vec![vec![1.0; k]];
    if let Ok(r2) = weights_optimal_r2(params) {
        if r2.w.iter().any(|&x| x != 0.0) {
            out.push(r2.w);
        }
    }
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        out.push(e);
    }
    let mut i = 0u64;
    while out.len() < opts.restarts.max(out.len()) {
        let mut rng = substream(opts.seed, &[tag::WEIGHTS, i]);
        let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        if dense::norm(&v) > 1e-12 {
            out.push(v);
        }
        i += 1;
    }
    out
}

fn run_nelder_mead(params: &ModelParams, start: &[f64], opts: &NumericOptions) -> Result<(Vec<f64>, f64)> {
    let nrm = dense::norm(start);
    let unit: Vec<f64> = start.iter().map(|x| x / nrm).collect();
    let t0 = to_angles(&unit);
    let mut simplex = vec![t0.clone()];
    for i in 0..t0.len() {
        let mut v = t0.clone();
        v[i] += 0.25;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(opts.tol * opts.tol)
        .map_err(|e| Error::InvalidModel(e.to_string()))?;
    let res = Executor::new(NegSnr { params }, solver)
        .configure(|s| s.max_iters(opts.max_iters))
        .run()
        .map_err(|e| Error::InvalidModel(e.to_string()))?;
    let state = res.state();
    let theta = state.best_param.clone().unwrap_or(t0);
    let w = from_angles(&theta);
    let f = snr(params, &w)?;
    Ok((w, f))
}

/// Maximises [`snr`] over directions by Nelder–Mead from several starts.
pub fn weights_numeric(params: &ModelParams, opts: &NumericOptions) -> Result<WeightResult> {
    if params.r < 2 {
        return Err(Error::NotApplicable(
            "weight optimisation needs at least two communities".into(),
        ));
    }
    let k = params.num_layers();
    if k == 1 {
        return finish(params, vec![1.0], WeightMethod::Numeric);
    }
    let baseline = snr(params, &vec![1.0; k])?;
    let runs = par::map_slice(&starts(params, opts), |s| run_nelder_mead(params, s, opts));
    let mut best: Option<(Vec<f64>, f64)> = None;
    for run in runs {
        let (w, f) = run?;
        if best.as_ref().is_none_or(|(_, b)| f > *b) {
            best = Some((w, f));
        }
    }
    let (w, f) = best.expect("at least one start");
    if f < baseline - 1e-12 {
        return Err(Error::NoImprovement);
    }
    finish(params, w, WeightMethod::Numeric)
}

#[cfg(test)]
mod tests;
