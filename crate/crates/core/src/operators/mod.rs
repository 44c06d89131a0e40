//! The weighted non-backtracking operator `B` on oriented hyperedges, the
//! edge reversal `J`, and the reduced `2Kn x 2Kn` matrix with its
//! Bethe–Hessian and Ihara–Bass companions.

mod reduced;

pub use reduced::{
    bethe_hessian, build_reduced, eig_relation_check, eigvec_lift_and_aggregate, ihara_bass_verify,
    BetheHessian, EigRelationReport, IharaBassReport, Lifted, ReducedNB, IHARA_BASS_MAX_M,
};

use std::collections::BTreeMap;

use faer::Mat;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dense::C64;
use crate::hypergraph::{LayeredHypergraph, OrientedIndex};
use crate::rng::{substream, tag};
use crate::{par, Error, Result};

/// A real square operator known only through its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_c(&self, x: &[C64]) -> Vec<C64> {
        let re: Vec<f64> = x.iter().map(|z| z.re).collect();
        let im: Vec<f64> = x.iter().map(|z| z.im).collect();
        let mut yr = vec![0.0; x.len()];
        let mut yi = vec![0.0; x.len()];
        self.apply(&re, &mut yr);
        self.apply(&im, &mut yi);
        yr.iter().zip(&yi).map(|(&a, &b)| C64::new(a, b)).collect()
    }
}

impl LinearOperator for Mat<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        par::for_each_mut(y, |i, yi| {
            *yi = (0..self.ncols()).map(|j| self[(i, j)] * x[j]).sum();
        });
    }
}

/// Matrix-free weighted non-backtracking operator
/// `B_{(x->e),(y->f)} = w_f` when `y in e \ {x}` and `f != e` contains `y`.
#[derive(Debug, Clone)]
pub struct NonBacktracking<'a> {
    g: &'a LayeredHypergraph,
    idx: OrientedIndex,
    w: Vec<f64>,
    /// Weight of the edge behind each oriented id (the diagonal of `D_w`).
    id_weight: Vec<f64>,
}

impl<'a> NonBacktracking<'a> {
    pub fn new(g: &'a LayeredHypergraph, w: &[f64]) -> Result<Self> {
        if w.len() != g.num_layers() {
            return Err(Error::DimensionMismatch {
                expected: g.num_layers(),
                got: w.len(),
            });
        }
        let idx = OrientedIndex::new(g);
        let mut id_weight = Vec::with_capacity(idx.m());
        for k in 0..g.num_layers() {
            id_weight.extend(std::iter::repeat_n(w[k], idx.layer_range(k).len()));
        }
        Ok(Self {
            g,
            idx,
            w: w.to_vec(),
            id_weight,
        })
    }

    pub fn graph(&self) -> &LayeredHypergraph {
        self.g
    }

    pub fn index(&self) -> &OrientedIndex {
        &self.idx
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn m(&self) -> usize {
        self.idx.m()
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// `t(y) = sum_{f ni y} w_f u(y -> f)`.
    fn vertex_totals(&self, u: &[f64], weighted: bool) -> Vec<f64> {
        par::map_range(self.g.n(), |y| {
            self.idx
                .out_of(y)
                .iter()
                .map(|&id| if weighted { self.id_weight[id] * u[id] } else { u[id] })
                .sum()
        })
    }

    /// Runs `f(k, e_base, chunk)` over every edge, where `chunk` is the
    /// output slice of the edge's `q_k` oriented ids.
    fn per_edge(&self, out: &mut [f64], f: impl Fn(usize, usize, &mut [f64]) + Sync + Send) {
        let mut rest = out;
        for k in 0..self.g.num_layers() {
            let len = self.idx.layer_range(k).len();
            let (head, tail) = rest.split_at_mut(len);
            rest = tail;
            let q = self.g.q(k);
            let off = self.idx.layer_range(k).start;
            par::for_each_chunk_mut(head, q, |e, chunk| f(k, off + e * q, chunk));
        }
    }

    /// `(Bu)(x->e) = sum_{y in e \ x} [t(y) - w_e u(y->e)]`.
    pub fn matvec(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let t = self.vertex_totals(u, true);
        let tails = self.idx.tails();
        let mut out = vec![0.0; self.m()];
        self.per_edge(&mut out, |k, base, chunk| {
            let wk = self.w[k];
            let q = chunk.len();
            for (pos, o) in chunk.iter_mut().enumerate() {
                let mut s = 0.0;
                for other in 0..q {
                    if other != pos {
                        let id = base + other;
                        s += t[tails[id] as usize] - wk * u[id];
                    }
                }
                *o = s;
            }
        });
        Ok(out)
    }

    /// `(B^T u)(y->f) = w_f [s(y) - (Ju)(y->f)]` with `s(y) = sum_{e ni y} (Ju)(y->e)`.
    pub fn matvec_transpose(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let ju = self.j_apply(u)?;
        let s = self.vertex_totals(&ju, false);
        let tails = self.idx.tails();
        Ok(par::map_range(self.m(), |id| {
            self.id_weight[id] * (s[tails[id] as usize] - ju[id])
        }))
    }

    /// `(Ju)(x->e) = sum_{y in e, y != x} u(y->e)`.
    pub fn j_apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let mut out = vec![0.0; self.m()];
        self.per_edge(&mut out, |_, base, chunk| {
            let q = chunk.len();
            for (pos, o) in chunk.iter_mut().enumerate() {
                *o = (0..q).filter(|&p| p != pos).map(|p| u[base + p]).sum();
            }
        });
        Ok(out)
    }

    /// `J^{-1} = (J - (q - 2) I) / (q - 1)` blockwise.
    pub fn j_inv_apply_c(&self, u: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.m()];
        for k in 0..self.g.num_layers() {
            let q = self.g.q(k);
            let qf = q as f64;
            for base in self.idx.layer_range(k).step_by(q) {
                let total: C64 = u[base..base + q].iter().sum();
                for pos in 0..q {
                    let ju = total - u[base + pos];
                    out[base + pos] = (ju - u[base + pos] * (qf - 2.0)) / (qf - 1.0);
                }
            }
        }
        out
    }

    /// `D_w u`.
    pub fn dw_apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.id_weight).map(|(a, b)| a * b).collect()
    }

    /// Start matrices `S_k`: `(S_k u)(x) = sum_{e in E_k, e ni x} u(x->e)`.
    pub fn start_apply_c(&self, k: usize, u: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.g.n()];
        for id in self.idx.layer_range(k) {
            out[self.idx.tail(id)] += u[id];
        }
        out
    }

    /// Dense `B`, assembled from its definition. Intended for `m` in the
    /// low thousands at most.
    pub fn to_dense(&self) -> Mat<f64> {
        let m = self.m();
        let mut b = Mat::<f64>::zeros(m, m);
        for row in 0..m {
            let (k, e, pos) = self.idx.locate(row);
            let q = self.g.q(k);
            let base = self.idx.id(k, e, 0);
            for other in 0..q {
                if other == pos {
                    continue;
                }
                let y = self.idx.tail(base + other);
                for &col in self.idx.out_of(y) {
                    if col != base + other {
                        b[(row, col)] += self.id_weight[col];
                    }
                }
            }
        }
        b
    }

    /// Dense `J`.
    pub fn j_dense(&self) -> Mat<f64> {
        let m = self.m();
        let mut j = Mat::<f64>::zeros(m, m);
        for k in 0..self.g.num_layers() {
            let q = self.g.q(k);
            for base in self.idx.layer_range(k).step_by(q) {
                for a in 0..q {
                    for b in 0..q {
                        if a != b {
                            j[(base + a, base + b)] = 1.0;
                        }
                    }
                }
            }
        }
        j
    }
}

impl LinearOperator for NonBacktracking<'_> {
    fn dim(&self) -> usize {
        self.m()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.matvec(x).expect("dimension checked by caller"));
    }
}

/// Predicted spectrum of `J`: eigenvalue `q_k - 1` with multiplicity
/// `|E_k|` and `-1` with multiplicity `sum_k (q_k - 1)|E_k|`.
pub fn j_spectrum_counts(g: &LayeredHypergraph) -> BTreeMap<i64, usize> {
    let mut out = BTreeMap::new();
    for k in 0..g.num_layers() {
        let q = g.q(k) as i64;
        let e = g.num_edges(k);
        if e > 0 {
            *out.entry(q - 1).or_insert(0) += e;
            *out.entry(-1).or_insert(0) += (q as usize - 1) * e;
        }
    }
    out
}

/// Eigenvalue multiplicities of dense `J`, rounded to integers.
pub fn j_spectrum_dense(op: &NonBacktracking) -> Result<BTreeMap<i64, usize>> {
    let (vals, _) = crate::dense::sym_eig(&op.j_dense())?;
    let mut out = BTreeMap::new();
    for v in vals {
        let r = v.round();
        if (v - r).abs() > 1e-8 {
            return Err(Error::SingularMatrix(format!("non-integer J eigenvalue {v}")));
        }
        *out.entry(r as i64).or_insert(0) += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualMode {
    /// Every column through unit basis vectors.
    Dense,
    /// A fixed number of Gaussian probe vectors.
    Probes(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct ParityTimeReport {
    pub power: usize,
    pub mode: ResidualMode,
    pub residual: f64,
    /// `1e-10 ||w||_inf^k m`.
    pub bound: f64,
    pub ok: bool,
}

/// `max |(D_w B^k J - J (B^T)^k D_w) u|` over basis or probe vectors `u`.
pub fn parity_time_residual(
    op: &NonBacktracking,
    power: usize,
    mode: ResidualMode,
    seed: u64,
) -> Result<ParityTimeReport> {
    let m = op.m();
    let side = |u: &[f64]| -> Result<f64> {
        let mut l = op.j_apply(u)?;
        for _ in 0..power {
            l = op.matvec(&l)?;
        }
        let l = op.dw_apply(&l);
        let mut r = op.dw_apply(u);
        for _ in 0..power {
            r = op.matvec_transpose(&r)?;
        }
        let r = op.j_apply(&r)?;
        Ok(l.iter().zip(&r).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())))
    };
    let mut residual = 0.0f64;
    match mode {
        ResidualMode::Dense => {
            let mut e = vec![0.0; m];
            for j in 0..m {
                e[j] = 1.0;
                residual = residual.max(side(&e)?);
                e[j] = 0.0;
            }
        }
        ResidualMode::Probes(p) => {
            let mut rng = substream(seed, &[tag::PROBES]);
            for _ in 0..p {
                let u: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                residual = residual.max(side(&u)?);
            }
        }
    }
    let wmax = op.weights().iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let bound = 1e-10 * wmax.powi(power as i32) * m.max(1) as f64;
    Ok(ParityTimeReport {
        power,
        mode,
        residual,
        bound,
        ok: residual <= bound,
    })
}

#[cfg(test)]
mod tests;
