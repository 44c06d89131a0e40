//! Monte Carlo checks of functionals on Galton–Watson hypertrees.
//!
//! For an eigenpair `(mu, phi)` of `Q_w` the path-weighted boundary sum
//! `f_{phi,t}` rescaled by `mu^-t` is a martingale. Its first and second
//! moments, and those of its increments, have closed forms in terms of
//! `K = Q_{w^2}` and the third-order tensor `Q^(3)`. [`martingale_check`]
//! samples trees per root type and compares.

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{compositions, multinomial, pi_power, ModelParams, SpectralConstants};
use crate::par;
use crate::rng::{substream, tag};
use crate::sampler::{sample_generations, Generation, HyperTree, OffspringLaw, DEFAULT_POPULATION_CAP};

/// Statistical tolerance in standard errors.
pub const SE_TOL: f64 = 4.0;

/// Default depth limit for tree checks.
pub const DEFAULT_DEPTH_CAP: usize = 6;

/// `f_{xi,t}(T, rho)`: sum over generation `t` of path weight times
/// `xi(type)`.
pub fn eval_functional(tree: &HyperTree, xi: &[f64], t: usize) -> Result<f64> {
    if t > tree.depth {
        return Err(Error::DepthExceeded {
            requested: t,
            available: tree.depth,
        });
    }
    let mut pw = vec![1.0; tree.nodes.len()];
    let mut s = 0.0;
    for (v, node) in tree.nodes.iter().enumerate() {
        if let Some(e) = node.parent_edge {
            let e = &tree.edges[e as usize];
            pw[v] = pw[e.parent as usize] * e.weight;
        }
        if node.depth as usize == t {
            s += pw[v] * xi[node.typ as usize];
        }
    }
    Ok(s)
}

/// Same functional evaluated on an aggregated generation profile.
pub fn eval_generation(gen: &Generation, weights: &[f64], xi: &[f64]) -> f64 {
    gen.iter()
        .map(|((typ, path), &cnt)| {
            let pw: f64 = path
                .iter()
                .zip(weights)
                .map(|(&e, w)| w.powi(e as i32))
                .product();
            cnt as f64 * pw * xi[*typ as usize]
        })
        .sum()
}

/// Third-order signal tensors, stored row-major as `[i][j][l]`.
#[derive(Debug, Clone, Serialize)]
pub struct QThree {
    pub r: usize,
    /// `Q^(3,k)_{ijl} = pi_j pi_l sum_m p_{ijlm} prod pi_m`.
    pub layers: Vec<Vec<f64>>,
    /// `sum_k w_k^2 (q_k - 1)(q_k - 2) Q^(3,k)`.
    pub weighted: Vec<f64>,
}

impl QThree {
    fn idx(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.r + j) * self.r + l
    }

    pub fn layer(&self, k: usize, i: usize, j: usize, l: usize) -> f64 {
        self.layers[k][self.idx(i, j, l)]
    }

    /// `sum_k a_k (q_k - 1)(q_k - 2) Q^(3,k)` for arbitrary `a`.
    pub fn combine(&self, params: &ModelParams, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.r * self.r * self.r];
        for ((t, l), &ak) in self.layers.iter().zip(&params.layers).zip(a) {
            let q = l.q as f64;
            let c = ak * (q - 1.0) * (q - 2.0);
            out.iter_mut().zip(t).for_each(|(o, x)| *o += c * x);
        }
        out
    }

    /// `(T x_1 x x_2 y)_i = sum_{j,l} T_{ijl} x_j y_l`.
    pub fn contract(&self, t: &[f64], x: &[f64], y: &[f64]) -> Vec<f64> {
        let r = self.r;
        (0..r)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..r {
                    for l in 0..r {
                        s += t[self.idx(i, j, l)] * x[j] * y[l];
                    }
                }
                s
            })
            .collect()
    }

    /// `sum_i v_i Q^(3,k)_{ijl}` as an `r x r` matrix.
    pub fn contract_first(&self, k: usize, v: &[f64]) -> Mat<f64> {
        Mat::from_fn(self.r, self.r, |j, l| {
            (0..self.r).map(|i| v[i] * self.layer(k, i, j, l)).sum()
        })
    }

    /// `sum_l v_l Q^(3,k)_{ijl}` as an `r x r` matrix.
    pub fn contract_last(&self, k: usize, v: &[f64]) -> Mat<f64> {
        Mat::from_fn(self.r, self.r, |i, j| {
            (0..self.r).map(|l| v[l] * self.layer(k, i, j, l)).sum()
        })
    }
}

/// Builds `Q^(3,k)` per layer by summing over compositions of `q_k - 3`.
/// Graph layers (`q = 2`) give the zero tensor.
pub fn q3_tensor(params: &ModelParams) -> QThree {
    let r = params.r;
    let pi = &params.pi;
    let layers = params
        .layers
        .iter()
        .map(|l| {
            let mut t = vec![0.0; r * r * r];
            if l.q < 3 {
                return t;
            }
            let comps = compositions(l.q - 3, r);
            for i in 0..r {
                for j in 0..r {
                    for m in 0..r {
                        let mut s = 0.0;
                        for c in &comps {
                            let mut key = c.clone();
                            key[i] += 1;
                            key[j] += 1;
                            key[m] += 1;
                            s += multinomial(c) * l.tensor.get(&key) * pi_power(pi, c);
                        }
                        t[(i * r + j) * r + m] = pi[j] * pi[m] * s;
                    }
                }
            }
            t
        })
        .collect();
    let mut q3 = QThree {
        r,
        layers,
        weighted: Vec::new(),
    };
    let w2: Vec<f64> = params.weights.iter().map(|w| w * w).collect();
    q3.weighted = q3.combine(params, &w2);
    q3
}

fn mat_vec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

/// `y = K (phi o phi') + Q^(3) x_1 phi x_2 phi'`.
pub fn y_vec(params: &ModelParams, q3: &QThree, phi: &[f64], phi2: &[f64]) -> Vec<f64> {
    let w2: Vec<f64> = params.weights.iter().map(|w| w * w).collect();
    let k = params.q_weighted(&w2);
    let had: Vec<f64> = phi.iter().zip(phi2).map(|(a, b)| a * b).collect();
    let mut y = mat_vec(&k, &had);
    let t = q3.contract(&q3.weighted, phi, phi2);
    y.iter_mut().zip(t).for_each(|(a, b)| *a += b);
    y
}

/// Closed-form moments for eigenpairs `(mu, phi)`, `(mu', phi')`, indexed
/// by root type.
#[derive(Debug, Clone)]
pub struct MomentTheory {
    /// `E[Z_t Z'_t]` for `t = 0..=t_max`.
    pub cross: Vec<Vec<f64>>,
    /// `E[(f_{phi,t+1} - mu f_{phi,t})^2] = K^t y^(phi,phi)` for `t < t_max`.
    pub increment: Vec<Vec<f64>>,
}

pub fn moment_theory(
    params: &ModelParams,
    q3: &QThree,
    (mu, phi): (f64, &[f64]),
    (mu2, phi2): (f64, &[f64]),
    t_max: usize,
) -> MomentTheory {
    let w2: Vec<f64> = params.weights.iter().map(|w| w * w).collect();
    let k = params.q_weighted(&w2);
    let y = y_vec(params, q3, phi, phi2);
    let yy = y_vec(params, q3, phi, phi);
    let mm = mu * mu2;
    let mut cross = vec![phi.iter().zip(phi2).map(|(a, b)| a * b).collect::<Vec<f64>>()];
    let mut ks_y = y;
    let mut ks_yy = yy;
    let mut increment = Vec::new();
    for s in 0..t_max {
        let scale = mm.powi(s as i32 + 1);
        let next: Vec<f64> = cross[s].iter().zip(&ks_y).map(|(c, v)| c + v / scale).collect();
        cross.push(next);
        increment.push(ks_yy.clone());
        ks_y = mat_vec(&k, &ks_y);
        ks_yy = mat_vec(&k, &ks_yy);
    }
    MomentTheory { cross, increment }
}

/// One empirical-versus-theory comparison.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCheck {
    pub t: usize,
    pub empirical: f64,
    pub se: f64,
    pub theory: f64,
    /// `|empirical - theory| / se`; zero when they agree to rounding.
    pub z: f64,
}

impl MomentCheck {
    fn new(t: usize, xs: &[f64], theory: f64) -> Self {
        let (empirical, se) = mean_se(xs);
        let diff = (empirical - theory).abs();
        let z = if diff <= 1e-12 * theory.abs().max(1.0) {
            0.0
        } else if se > 0.0 {
            diff / se
        } else {
            f64::INFINITY
        };
        Self {
            t,
            empirical,
            se,
            theory,
            z,
        }
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = par::pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if xs.len() > 1 {
        par::pairwise_sum(&dev) / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct RootTypeReport {
    pub root_type: usize,
    /// `E[Z_t] = phi_i(root)`.
    pub mean_i: Vec<MomentCheck>,
    pub mean_j: Vec<MomentCheck>,
    /// `E[Z_{t+1} - Z_t] = 0`.
    pub flatness: Vec<MomentCheck>,
    /// `E[Z_t Z'_t]`.
    pub cross: Vec<MomentCheck>,
    /// `E[(f_{phi_i,t+1} - mu_i f_{phi_i,t})^2]`.
    pub increment: Vec<MomentCheck>,
    /// `Var(Z_t)` for eigenpair `i`. Implied by `cross` when `i = j`, so
    /// not part of the pass criterion.
    pub var_i: Vec<MomentCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeFunctionalReport {
    pub depth: usize,
    pub samples: usize,
    pub eig: (usize, usize),
    pub mu: (f64, f64),
    pub tau: (f64, f64),
    pub seed: u64,
    pub roots: Vec<RootTypeReport>,
    pub max_z: f64,
    pub pass: bool,
}

impl TreeFunctionalReport {
    pub fn checks(&self) -> impl Iterator<Item = &MomentCheck> {
        self.roots.iter().flat_map(|r| {
            r.mean_i
                .iter()
                .chain(&r.mean_j)
                .chain(&r.flatness)
                .chain(&r.cross)
                .chain(&r.increment)
        })
    }
}

/// Samples `samples` trees per root type and compares the moments of the
/// martingales for eigenpairs `i` and `j` of `Q_w` with their closed forms.
pub fn martingale_check(
    params: &ModelParams,
    consts: &SpectralConstants,
    (i, j): (usize, usize),
    t_max: usize,
    samples: usize,
    seed: u64,
) -> Result<TreeFunctionalReport> {
    let r = params.r;
    for &e in &[i, j] {
        if e >= r {
            return Err(Error::IndexOutOfRange { index: e, limit: r });
        }
        if consts.mu[e] == 0.0 {
            return Err(Error::DegenerateModel(format!("eigenvalue {e} is zero")));
        }
    }
    if t_max > DEFAULT_DEPTH_CAP {
        return Err(Error::DepthTooLarge {
            depth: t_max,
            cap: DEFAULT_DEPTH_CAP,
        });
    }
    if samples < 2 {
        return Err(Error::InvalidModel("at least two samples are needed".into()));
    }
    let (mu_i, mu_j) = (consts.mu[i], consts.mu[j]);
    let (phi_i, phi_j) = (&consts.phi[i], &consts.phi[j]);
    let q3 = q3_tensor(params);
    let theory = moment_theory(params, &q3, (mu_i, phi_i), (mu_j, phi_j), t_max);
    let theory_ii = moment_theory(params, &q3, (mu_i, phi_i), (mu_i, phi_i), t_max);
    let law = OffspringLaw::new(params);
    let w = &params.weights;

    let mut roots = Vec::with_capacity(r);
    for a in 0..r {
        // Per sample: f_{phi_i,t} and f_{phi_j,t} for t = 0..=t_max.
        let runs = par::map_range(samples, |s| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut rng = substream(seed, &[tag::GW_TREE, a as u64, s as u64]);
            let gens = sample_generations(&law, a, t_max, DEFAULT_POPULATION_CAP, &mut rng)?;
            let fi = gens.iter().map(|g| eval_generation(g, w, phi_i)).collect();
            let fj = gens.iter().map(|g| eval_generation(g, w, phi_j)).collect();
            Ok((fi, fj))
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let column = |f: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
        let zi = |t: usize| column(&|x| x.0[t] / mu_i.powi(t as i32));
        let zj = |t: usize| column(&|x| x.1[t] / mu_j.powi(t as i32));

        let mut rep = RootTypeReport {
            root_type: a,
            mean_i: Vec::new(),
            mean_j: Vec::new(),
            flatness: Vec::new(),
            cross: Vec::new(),
            increment: Vec::new(),
            var_i: Vec::new(),
        };
        for t in 0..=t_max {
            let (a_i, a_j) = (zi(t), zj(t));
            rep.mean_i.push(MomentCheck::new(t, &a_i, phi_i[a]));
            rep.mean_j.push(MomentCheck::new(t, &a_j, phi_j[a]));
            let prod: Vec<f64> = a_i.iter().zip(&a_j).map(|(x, y)| x * y).collect();
            rep.cross.push(MomentCheck::new(t, &prod, theory.cross[t][a]));
            let (m, _) = mean_se(&a_i);
            let sq: Vec<f64> = a_i.iter().map(|x| (x - m) * (x - m)).collect();
            let v = theory_ii.cross[t][a] - phi_i[a] * phi_i[a];
            rep.var_i.push(MomentCheck::new(t, &sq, v));
            if t < t_max {
                let next = zi(t + 1);
                let diff: Vec<f64> = next.iter().zip(&a_i).map(|(x, y)| x - y).collect();
                rep.flatness.push(MomentCheck::new(t, &diff, 0.0));
                let inc = column(&|x| (x.0[t + 1] - mu_i * x.0[t]).powi(2));
                rep.increment.push(MomentCheck::new(t, &inc, theory_ii.increment[t][a]));
            }
        }
        roots.push(rep);
    }
    let mut report = TreeFunctionalReport {
        depth: t_max,
        samples,
        eig: (i, j),
        mu: (mu_i, mu_j),
        tau: (consts.tau[i], consts.tau[j]),
        seed,
        roots,
        max_z: 0.0,
        pass: false,
    };
    report.max_z = report.checks().fold(0.0f64, |m, c| m.max(c.z));
    report.pass = report.max_z <= SE_TOL;
    Ok(report)
}
