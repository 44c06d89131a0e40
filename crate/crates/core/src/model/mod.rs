//! Deterministic model algebra: layer tensors, degree and signal matrices,
//! weighted combinations, thresholds and the theoretical overlap constants.
//!
//! Indices are 0-based throughout: `mu[0]` is the eigenvalue of largest
//! modulus of the weighted signal matrix.

mod config;
mod tensor;

pub use config::{LayerConfig, ModelConfig, TensorSpec};
pub use tensor::{compositions, multinomial, two_param_from_degree, SymTensor};

use faer::Mat;
use serde::Serialize;

use crate::dense::{self, to_rows};
use crate::{Error, Result};

/// Relative tolerance for the constant-degree check.
pub const DEGREE_RTOL: f64 = 1e-8;

/// One layer: its tensor plus the derived two-type degree matrix `D`, the
/// signal matrix `Q = D Pi` and the expected degree `d`.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub tensor: SymTensor,
    pub q: usize,
    pub d: f64,
    pub dmat: Mat<f64>,
    pub qmat: Mat<f64>,
}

/// Contracts a layer tensor against the community proportions.
///
/// `D_ij = sum over (q-2)-tuples k of p(i, j, k) prod_l pi_{k_l}`, evaluated by
/// summing over compositions of `q - 2` with multinomial multiplicities.
pub fn layer_from_tensor(tensor: &SymTensor, pi: &[f64]) -> Result<LayerParams> {
    let r = tensor.r();
    let q = tensor.q();
    if pi.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: pi.len(),
        });
    }
    tensor.validate()?;
    let rest = compositions(q - 2, r);
    let weights: Vec<f64> = rest.iter().map(|c| multinomial(c) * pi_power(pi, c)).collect();
    let mut dmat = Mat::<f64>::zeros(r, r);
    let mut key = vec![0u32; r];
    for i in 0..r {
        for j in i..r {
            let mut acc = 0.0;
            for (c, wt) in rest.iter().zip(&weights) {
                key.copy_from_slice(c);
                key[i] += 1;
                key[j] += 1;
                acc += wt * tensor.get(&key);
            }
            dmat[(i, j)] = acc;
            dmat[(j, i)] = acc;
        }
    }
    let qmat = Mat::from_fn(r, r, |i, j| dmat[(i, j)] * pi[j]);
    let rows: Vec<f64> = (0..r).map(|i| (0..r).map(|j| qmat[(i, j)]).sum()).collect();
    let dmax = rows.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let spread = rows.iter().fold(0.0f64, |m, x| m.max((x - rows[0]).abs()));
    if spread > DEGREE_RTOL * dmax.max(f64::MIN_POSITIVE) {
        return Err(Error::AssumptionViolation(format!(
            "layer with q = {q}: expected degrees differ across communities: {rows:?}"
        )));
    }
    let d = rows.iter().sum::<f64>() / r as f64;
    Ok(LayerParams {
        tensor: tensor.clone(),
        q,
        d,
        dmat,
        qmat,
    })
}

pub(crate) fn pi_power(pi: &[f64], c: &[u32]) -> f64 {
    pi.iter().zip(c).map(|(p, &e)| p.powi(e as i32)).product()
}

/// Full parameterisation of a non-uniform HSBM with layer weights.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub r: usize,
    pub pi: Vec<f64>,
    pub layers: Vec<LayerParams>,
    pub weights: Vec<f64>,
}

impl ModelParams {
    /// Validates proportions, layer shapes and the average degree lower
    /// bound `sum_k (q_k - 1) d_k > 1`.
    pub fn new(pi: Vec<f64>, tensors: &[SymTensor], weights: Vec<f64>) -> Result<Self> {
        let p = Self::new_relaxed(pi, tensors, weights)?;
        let total: f64 = p.layers.iter().map(|l| (l.q as f64 - 1.0) * l.d).sum();
        if total <= 1.0 {
            return Err(Error::AssumptionViolation(format!(
                "sum_k (q_k - 1) d_k = {total} must exceed 1"
            )));
        }
        Ok(p)
    }

    /// Like [`ModelParams::new`] but without the average degree bound. Used
    /// for degenerate sampling scenarios (empty or subcritical models).
    pub fn new_relaxed(pi: Vec<f64>, tensors: &[SymTensor], weights: Vec<f64>) -> Result<Self> {
        let r = pi.len();
        if r == 0 {
            return Err(Error::InvalidModel("at least one community required".into()));
        }
        if pi.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidModel(format!("proportions must be positive: {pi:?}")));
        }
        let s: f64 = pi.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("proportions sum to {s}, not 1")));
        }
        if tensors.is_empty() {
            return Err(Error::InvalidModel("at least one layer required".into()));
        }
        if weights.len() != tensors.len() {
            return Err(Error::DimensionMismatch {
                expected: tensors.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel("weights must be finite".into()));
        }
        let layers = tensors
            .iter()
            .map(|t| {
                if t.r() != r {
                    return Err(Error::InvalidModel(format!(
                        "tensor has r = {}, model has r = {r}",
                        t.r()
                    )));
                }
                layer_from_tensor(t, &pi)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            r,
            pi,
            layers,
            weights,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn q_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.q).collect()
    }

    pub fn q_max(&self) -> usize {
        self.layers.iter().map(|l| l.q).max().unwrap_or(2)
    }

    /// Same model with a different weight vector.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                got: weights.len(),
            });
        }
        let mut p = self.clone();
        p.weights = weights;
        Ok(p)
    }

    /// Applies `f(q_k, w_k)` per layer, e.g. `|q, w| (q - 2.0) * w * w`.
    pub fn layer_coeffs(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.layers
            .iter()
            .zip(&self.weights)
            .map(|(l, &w)| f(l.q as f64, w))
            .collect()
    }

    /// `Q_a = sum_k a_k (q_k - 1) Q^(k)`.
    pub fn q_weighted(&self, a: &[f64]) -> Mat<f64> {
        self.combine(a, |l| &l.qmat)
    }

    /// `D_a = sum_k a_k (q_k - 1) D^(k)`.
    pub fn d_matrix_weighted(&self, a: &[f64]) -> Mat<f64> {
        self.combine(a, |l| &l.dmat)
    }

    /// `d_a = sum_k a_k (q_k - 1) d_k`.
    pub fn d_weighted(&self, a: &[f64]) -> f64 {
        self.layers
            .iter()
            .zip(a)
            .map(|(l, &ak)| ak * (l.q as f64 - 1.0) * l.d)
            .sum()
    }

    fn combine(&self, a: &[f64], pick: impl Fn(&LayerParams) -> &Mat<f64>) -> Mat<f64> {
        assert_eq!(a.len(), self.layers.len());
        let mut out = Mat::<f64>::zeros(self.r, self.r);
        for (l, &ak) in self.layers.iter().zip(a) {
            let c = ak * (l.q as f64 - 1.0);
            let m = pick(l);
            for j in 0..self.r {
                for i in 0..self.r {
                    out[(i, j)] += c * m[(i, j)];
                }
            }
        }
        out
    }

    /// `x^T Pi Q_a y`.
    pub fn pi_form(&self, a: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let qa = self.q_weighted(a);
        let mut s = 0.0;
        for i in 0..self.r {
            for j in 0..self.r {
                s += x[i] * self.pi[i] * qa[(i, j)] * y[j];
            }
        }
        s
    }

    /// `(q_max - 1) sum_k max p^(k)` times `||w||_inf^2 / sqrt(theta)`
    /// scaling; the growth constant used to choose the pseudo-eigenvector
    /// depth.
    pub fn growth_constant(&self, vartheta: f64) -> f64 {
        let rg = (self.q_max() as f64 - 1.0)
            * self.layers.iter().map(|l| l.tensor.max_entry()).sum::<f64>();
        let wmax = self.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        rg * rg * wmax / vartheta.sqrt()
    }
}

/// Spectral data of the weighted signal matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralConstants {
    #[serde(serialize_with = "ser_mat")]
    pub q_w: Mat<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub k_mat: Mat<f64>,
    /// Eigenvalues ordered by |mu| descending, then signed value descending.
    pub mu: Vec<f64>,
    /// Pi-orthonormal eigenvectors, `phi[i]` belongs to `mu[i]`.
    pub phi: Vec<Vec<f64>>,
    pub vartheta: f64,
    pub tau: Vec<f64>,
    /// Number of leading eigenvalues above the Kesten–Stigum threshold.
    pub r0: usize,
    pub d_w: f64,
    /// `gamma[i]` for `i < r0`.
    pub gamma: Vec<f64>,
}

fn ser_mat<S: serde::Serializer>(m: &Mat<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize as _;
    to_rows(m).serialize(s)
}

impl SpectralConstants {
    /// Index of the eigenvalue whose eigenvector is (a multiple of) the
    /// all-ones vector.
    pub fn perron_index(&self) -> Option<usize> {
        self.phi.iter().position(|p| {
            let m = p.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            p.iter().all(|x| (x - p[0]).abs() <= 1e-8 * m.max(1e-300))
        })
    }

    /// `tau_ij = theta / (mu_i mu_j)`.
    pub fn tau_ij(&self, i: usize, j: usize) -> f64 {
        self.vartheta / (self.mu[i] * self.mu[j])
    }
}

/// Eigen-structure of `Q_w = sum_k w_k (q_k - 1) Q^(k)` together with the
/// variance parameter, thresholds and overlap constants.
pub fn weighted_signal(params: &ModelParams) -> Result<SpectralConstants> {
    let r = params.r;
    let w = &params.weights;
    let w2: Vec<f64> = w.iter().map(|x| x * x).collect();
    let q_w = params.q_weighted(w);
    let k_mat = params.q_weighted(&w2);
    let dw = params.d_matrix_weighted(w);
    let sq: Vec<f64> = params.pi.iter().map(|p| p.sqrt()).collect();
    let sym = Mat::from_fn(r, r, |i, j| sq[i] * dw[(i, j)] * sq[j]);
    let (vals, vecs) = dense::sym_eig(&sym)?;

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        vals[b]
            .abs()
            .total_cmp(&vals[a].abs())
            .then(vals[b].total_cmp(&vals[a]))
            .then(a.cmp(&b))
    });
    let mu: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let phi: Vec<Vec<f64>> = order
        .iter()
        .map(|&c| {
            let mut v: Vec<f64> = (0..r).map(|i| vecs[(i, c)] / sq[i]).collect();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            v
        })
        .collect();

    let vartheta = params.d_weighted(&w2);
    let d_w = params.d_weighted(w);
    if !(vartheta > 0.0) {
        return Err(Error::DegenerateModel("all weights vanish (theta = 0)".into()));
    }
    let tau: Vec<f64> = mu
        .iter()
        .map(|&m| if m == 0.0 { f64::INFINITY } else { vartheta / (m * m) })
        .collect();
    let r0 = tau.iter().take_while(|&&t| t < 1.0).count();
    if r0 == 0 {
        return Err(Error::DegenerateModel(
            "no eigenvalue of the signal matrix is above the Kesten–Stigum threshold".into(),
        ));
    }
    let mut consts = SpectralConstants {
        q_w,
        k_mat,
        mu,
        phi,
        vartheta,
        tau,
        r0,
        d_w,
        gamma: Vec::new(),
    };
    consts.gamma = (0..r0)
        .map(|i| gamma_overlap(&consts, params, i))
        .collect::<Result<_>>()?;
    Ok(consts)
}

/// `gamma_i = (1 + tau_i phi_i^T Pi Q_{(q-2) w^2 / theta} phi_i) / (1 - tau_i)`.
///
/// The cosine between the aggregated vector `y_i` and the lifted eigenvector
/// concentrates around `gamma_i^{-1/2}`.
pub fn gamma_overlap(consts: &SpectralConstants, params: &ModelParams, i: usize) -> Result<f64> {
    if i >= consts.r0 {
        return Err(Error::IndexOutOfRange {
            index: i,
            limit: consts.r0,
        });
    }
    let th = consts.vartheta;
    let a = params.layer_coeffs(|q, w| (q - 2.0) * w * w / th);
    let t = consts.tau[i];
    let form = params.pi_form(&a, &consts.phi[i], &consts.phi[i]);
    Ok((1.0 + t * form) / (1.0 - t))
}

/// Theoretical covariance matrices at depth `t` (all `r0 × r0`).
#[derive(Debug, Clone, Serialize)]
pub struct CovTheory {
    pub t: usize,
    #[serde(serialize_with = "ser_mat")]
    pub c: Mat<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub c_u: Mat<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub c_v: Mat<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub tau_ij: Mat<f64>,
}

/// `sum_{s < n} tau^s`, with the `tau = 1` limit `n`.
pub fn geometric_sum(tau: f64, n: usize) -> f64 {
    if (tau - 1.0).abs() < 1e-12 {
        n as f64
    } else {
        (1.0 - tau.powi(n as i32)) / (1.0 - tau)
    }
}

pub fn cov_matrices(consts: &SpectralConstants, params: &ModelParams, t: usize) -> CovTheory {
    let r0 = consts.r0;
    let th = consts.vartheta;
    let a_c = params.layer_coeffs(|q, w| (q - 2.0) * w * w / th);
    let a_u = params.layer_coeffs(|q, _| q - 2.0);
    let a_v = params.layer_coeffs(|q, w| w * w * (q - 2.0) / ((q - 1.0) * th));
    let ones = vec![1.0; params.num_layers()];
    let d1 = params.d_weighted(&ones);
    let dv = params.d_weighted(&params.layer_coeffs(|q, w| w * w / ((q - 1.0) * th)));
    let tau_ij = Mat::from_fn(r0, r0, |i, j| consts.tau_ij(i, j));
    let c = Mat::from_fn(r0, r0, |i, j| {
        let tij = tau_ij[(i, j)];
        let diag = if i == j { geometric_sum(tij, t + 1) } else { 0.0 };
        diag + tij
            * geometric_sum(tij, t)
            * params.pi_form(&a_c, &consts.phi[i], &consts.phi[j])
    });
    let c_u = Mat::from_fn(r0, r0, |i, j| {
        d1 * c[(i, j)] + params.pi_form(&a_u, &consts.phi[i], &consts.phi[j])
    });
    let c_v = Mat::from_fn(r0, r0, |i, j| {
        dv * c[(i, j)] + params.pi_form(&a_v, &consts.phi[i], &consts.phi[j])
    });
    CovTheory {
        t,
        c,
        c_u,
        c_v,
        tau_ij,
    }
}

/// Upper eigenvalue bound for `C^(t)`: `1 + tau_{r0} (q_max - 1) / (1 - tau_{r0})`.
pub fn cov_upper_bound(consts: &SpectralConstants, params: &ModelParams) -> f64 {
    let t = consts.tau[consts.r0 - 1];
    1.0 + t * (params.q_max() as f64 - 1.0) / (1.0 - t)
}

/// Convenience constructor: probability `a_in` when all `q` vertices share a
/// community and `b_out` otherwise. With balanced proportions every
/// community has the same expected degree.
pub fn tensor_two_param(r: usize, q: usize, a_in: f64, b_out: f64) -> Result<SymTensor> {
    if !(a_in >= 0.0 && b_out >= 0.0) {
        return Err(Error::InvalidTensor(format!(
            "two-parameter tensor needs a, b >= 0 (got {a_in}, {b_out})"
        )));
    }
    let mut t = SymTensor::zeros(q, r)?;
    for c in compositions(q, r) {
        let pure = c.iter().filter(|&&x| x > 0).count() == 1;
        t.set(&c, if pure { a_in } else { b_out })?;
    }
    Ok(t)
}
