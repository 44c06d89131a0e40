//! Two-community reconstruction from aggregated vectors and the overlap
//! score.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::hypergraph::Assignment;
use crate::model::SpectralConstants;
use crate::rng::{substream, tag};
use crate::{dense, par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMode {
    /// Randomised rounding with a clamp at `T`.
    #[default]
    Randomized,
    /// Sign of `u`; zero entries by a fair coin.
    Sign,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub mode: ClusterMode,
    /// `T`; when unset, `2 sqrt(2) r sqrt(gamma)` from the model.
    pub threshold: Option<f64>,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            mode: ClusterMode::Randomized,
            threshold: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InformativeChoice {
    /// Rescaled to `||u||^2 = n`.
    #[serde(skip)]
    pub u: Vec<f64>,
    /// True when `y_2` was taken because `y_1` is aligned with the ones
    /// vector.
    pub chose_second: bool,
    /// `|<y_1, 1>| / (sqrt(n) ||y_1||)`.
    pub alignment: f64,
    /// `1 / log n`.
    pub cutoff: f64,
}

fn rescale(y: &[f64]) -> Result<Vec<f64>> {
    let ny = dense::norm(y);
    if ny == 0.0 || !ny.is_finite() {
        return Err(Error::ZeroVector);
    }
    let s = (y.len() as f64).sqrt() / ny;
    Ok(y.iter().map(|x| x * s).collect())
}

/// Takes `y_2` if `y_1` is aligned with the ones vector beyond `1/log n`,
/// otherwise `y_1`.
pub fn select_informative(y1: &[f64], y2: &[f64]) -> Result<InformativeChoice> {
    if y1.len() != y2.len() {
        return Err(Error::LengthMismatch(y1.len(), y2.len()));
    }
    let n = y1.len();
    let n1 = dense::norm(y1);
    if n1 == 0.0 || dense::norm(y2) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let alignment = y1.iter().sum::<f64>().abs() / ((n as f64).sqrt() * n1);
    let cutoff = 1.0 / (n as f64).ln();
    let chose_second = alignment > cutoff;
    let u = rescale(if chose_second { y2 } else { y1 })?;
    Ok(InformativeChoice {
        u,
        chose_second,
        alignment,
        cutoff,
    })
}

/// `2 sqrt(2) r sqrt(gamma)`, with `gamma_2` when the second vector was
/// selected and `gamma_1` otherwise.
pub fn default_threshold(consts: &SpectralConstants, r: usize, chose_second: bool) -> Result<f64> {
    let i = usize::from(chose_second);
    let gamma = consts.gamma.get(i).copied().ok_or_else(|| {
        Error::NotApplicable(format!("gamma_{} is undefined (r0 = {})", i + 1, consts.r0))
    })?;
    Ok(2.0 * std::f64::consts::SQRT_2 * r as f64 * gamma.sqrt())
}

const ROUND_CHUNK: usize = 1024;

/// Bernoulli draws `coin(x, p)` from per-chunk streams, so the result does
/// not depend on the thread count.
fn draw(n: usize, seed: u64, p: impl Fn(usize) -> f64 + Sync + Send) -> Vec<bool> {
    let mut out = vec![false; n];
    par::for_each_chunk_mut(&mut out, ROUND_CHUNK, |c, ch| {
        let mut rng = substream(seed, &[tag::ROUNDING, c as u64]);
        for (i, o) in ch.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *o = u < p(c * ROUND_CHUNK + i);
        }
    });
    out
}

fn to_assignment(plus: &[bool]) -> Assignment {
    Assignment {
        labels: plus.iter().map(|&b| if b { 0 } else { 1 }).collect(),
    }
}

/// `P(x in V+) = 1/2 + u(x) 1{|u(x)| <= T} / (2T)`; `V+` gets label 0.
pub fn round_randomized(u: &[f64], t: f64, seed: u64) -> Result<Assignment> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidThreshold(t));
    }
    let plus = draw(u.len(), seed, |x| {
        let ux = u[x];
        if ux.abs() <= t {
            0.5 + ux / (2.0 * t)
        } else {
            0.5
        }
    });
    Ok(to_assignment(&plus))
}

/// Label 0 where `u > 0`, label 1 where `u < 0`, a fair coin where `u = 0`.
pub fn round_sign(u: &[f64], seed: u64) -> Assignment {
    let plus = draw(u.len(), seed, |x| {
        if u[x] > 0.0 {
            1.0
        } else if u[x] < 0.0 {
            0.0
        } else {
            0.5
        }
    });
    to_assignment(&plus)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterResult {
    pub assignment: Assignment,
    pub choice: InformativeChoice,
    pub mode: ClusterMode,
    pub threshold: Option<f64>,
}

/// Selection followed by rounding. `consts` is needed for the randomised
/// mode unless a threshold is given.
pub fn cluster(
    y1: &[f64],
    y2: &[f64],
    consts: Option<&SpectralConstants>,
    r: usize,
    cfg: &ClusterConfig,
) -> Result<ClusterResult> {
    let choice = select_informative(y1, y2)?;
    let (assignment, threshold) = match cfg.mode {
        ClusterMode::Sign => (round_sign(&choice.u, cfg.seed), None),
        ClusterMode::Randomized => {
            let t = match (cfg.threshold, consts) {
                (Some(t), _) => t,
                (None, Some(c)) => default_threshold(c, r, choice.chose_second)?,
                (None, None) => {
                    return Err(Error::NotApplicable(
                        "randomised rounding needs a threshold or model constants".into(),
                    ))
                }
            };
            (round_randomized(&choice.u, t, cfg.seed)?, Some(t))
        }
    };
    Ok(ClusterResult {
        assignment,
        choice,
        mode: cfg.mode,
        threshold,
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// `max_p (1/n) #{x : est(x) = p(truth(x))}` over permutations of the
/// labels; exhaustive up to 8 labels, an optimal assignment beyond.
pub fn overlap(truth: &Assignment, est: &Assignment, r: usize) -> Result<f64> {
    let n = truth.len();
    if est.len() != n {
        return Err(Error::LengthMismatch(n, est.len()));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let size = truth
        .labels
        .iter()
        .chain(&est.labels)
        .map(|&l| l as usize + 1)
        .max()
        .unwrap_or(0)
        .max(r);
    let mut conf = vec![vec![0i64; size]; size];
    for (&t, &e) in truth.labels.iter().zip(&est.labels) {
        conf[t as usize][e as usize] += 1;
    }
    let best = if size <= 8 {
        permutations(size)
            .iter()
            .map(|p| (0..size).map(|i| conf[i][p[i]]).sum::<i64>())
            .max()
            .unwrap_or(0)
    } else {
        let m = Matrix::from_rows(conf).map_err(|e| Error::NotApplicable(e.to_string()))?;
        kuhn_munkres(&m).0
    };
    Ok(best as f64 / n as f64)
}
