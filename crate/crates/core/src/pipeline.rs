//! End-to-end run: sample, reduce, eigensolve, cluster, score.

use serde::Serialize;

use crate::cluster::{cluster, overlap, ClusterConfig, ClusterMode};
use crate::dense;
use crate::error::{Error, Result};
use crate::hypergraph::{Assignment, LayeredHypergraph};
use crate::model::{weighted_signal, ModelConfig, ModelParams, SpectralConstants};
use crate::operators::build_reduced;
use crate::sampler::{sample_hsbm, LabelMode, SampleConfig};
use crate::spectral::{detect_outliers, top_eigs, EigOptions, OutlierOptions, SpectralSummary};

/// Below `MIN_REGIME_FACTOR * q_max` vertices the sparse asymptotics say
/// nothing and the report carries a warning.
pub const MIN_REGIME_FACTOR: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub n: usize,
    pub seed: u64,
    /// Number of Ritz values computed.
    pub k: usize,
    pub tol: f64,
    pub delta_bulk: f64,
    pub label_mode: LabelMode,
}

/// Eigensolver and outlier settings for [`embed`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmbedOptions {
    pub k: usize,
    pub tol: f64,
    pub delta_bulk: f64,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn embed_options(&self) -> EmbedOptions {
        EmbedOptions {
            k: self.k,
            tol: self.tol,
            delta_bulk: self.delta_bulk,
            seed: self.seed,
        }
    }

    pub fn new(model: ModelConfig, n: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            seed,
            k: 10,
            tol: 1e-8,
            delta_bulk: 0.05,
            label_mode: LabelMode::DeterministicBlocks,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheorySummary {
    pub mu: Vec<f64>,
    pub tau: Vec<f64>,
    pub vartheta: f64,
    pub d_w: f64,
    pub r0: usize,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierReport {
    pub lambda: f64,
    pub mu_index: Option<usize>,
    pub mu: Option<f64>,
    /// `|<y, phi~>| / (||y|| ||phi~||)` with `phi~(x) = phi(sigma(x))`.
    pub cosine: Option<f64>,
    /// `gamma^{-1/2}` for informative eigenvalues.
    pub cosine_theory: Option<f64>,
    /// `|<y, 1>| / (sqrt(n) ||y||)`.
    pub ones_alignment: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusteringReport {
    pub mode: ClusterMode,
    pub overlap: f64,
    pub threshold: Option<f64>,
    pub chose_second: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub n: usize,
    pub seed: u64,
    pub r: usize,
    pub q_sizes: Vec<usize>,
    pub weights: Vec<f64>,
    pub edges: Vec<usize>,
    pub theory: Option<TheorySummary>,
    pub spectrum: SpectralSummary,
    pub outliers: Vec<OutlierReport>,
    /// The second clustering input came from the largest bulk Ritz vector
    /// because fewer than two outliers were found.
    pub second_from_bulk: bool,
    pub clustering: Vec<ClusteringReport>,
    pub warnings: Vec<String>,
}

impl PipelineReport {
    pub fn overlap(&self, mode: ClusterMode) -> Option<f64> {
        self.clustering.iter().find(|c| c.mode == mode).map(|c| c.overlap)
    }
}

fn lifted(phi: &[f64], truth: &Assignment) -> Vec<f64> {
    truth.labels.iter().map(|&l| phi[l as usize]).collect()
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (dense::norm(a), dense::norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs() / (na * nb))
}

/// Outlier detection together with the two clustering inputs.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub spectrum: SpectralSummary,
    /// The two leading outlier vectors, topped up from the bulk.
    pub vectors: Vec<Vec<f64>>,
    pub second_from_bulk: bool,
    pub converged: bool,
}

/// Builds `B~`, computes its top `cfg.k` eigenpairs and aggregates the
/// leading ones.
pub fn embed(
    g: &LayeredHypergraph,
    w: &[f64],
    consts: Option<&SpectralConstants>,
    cfg: &EmbedOptions,
) -> Result<Embedding> {
    let op = build_reduced(g, w)?;
    let opts = OutlierOptions {
        delta_bulk: cfg.delta_bulk,
        ..OutlierOptions::default()
    };
    let dim = crate::operators::LinearOperator::dim(&op);
    let vartheta = consts
        .map(|c| c.vartheta)
        .unwrap_or_else(|| crate::spectral::vartheta_plugin(&op));
    let mut eig_opts = EigOptions::new(cfg.k.min(dim)).seed(cfg.seed).tol(cfg.tol);
    if vartheta > 0.0 {
        eig_opts.converge_above = Some((1.0 + 0.5 * cfg.delta_bulk) * vartheta.sqrt());
    }
    let eig = top_eigs(&op, &eig_opts)?;
    let spectrum = detect_outliers(&op, &eig, consts, &opts)?;
    let mut vectors: Vec<Vec<f64>> = spectrum.y_vectors.iter().take(2).cloned().collect();
    let mut second_from_bulk = false;
    if vectors.len() < 2 {
        let extra = eig
            .pairs
            .iter()
            .zip(&spectrum.ritz)
            .filter(|(_, e)| !e.outlier && !e.trivial)
            .map(|(p, _)| op.aggregate(&p.vector.iter().map(|c| c.re).collect::<Vec<f64>>()));
        for y in extra.take(2 - vectors.len()) {
            vectors.push(y);
            second_from_bulk = true;
        }
    }
    Ok(Embedding {
        spectrum,
        vectors,
        second_from_bulk,
        converged: eig.converged,
    })
}

/// Runs the spectral part on a given hypergraph and scores against `truth`.
pub fn run_on(
    g: &LayeredHypergraph,
    truth: &Assignment,
    params: &ModelParams,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    let mut warnings = Vec::new();
    let n = g.n();
    let r = params.r;
    let w = &params.weights;
    if n < MIN_REGIME_FACTOR * params.q_max() {
        warnings.push(format!(
            "degenerate: n = {n} is far below the sparse regime (q_max = {})",
            params.q_max()
        ));
    }
    if params.pi.iter().any(|p| (p - 1.0 / r as f64).abs() > 1e-12) {
        warnings.push("unbalanced communities: the rounding guarantee assumes pi = 1/r".into());
    }
    if r != 2 {
        warnings.push(format!("two-way rounding applied to r = {r} communities"));
    }
    let consts: Option<SpectralConstants> = match weighted_signal(params) {
        Ok(c) => Some(c),
        Err(Error::DegenerateModel(msg)) => {
            warnings.push(format!("no theoretical constants: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };

    let emb = embed(g, w, consts.as_ref(), &cfg.embed_options())?;
    if !emb.converged {
        warnings.push("eigensolver did not converge for every wanted pair".into());
    }
    let spectrum = emb.spectrum;

    let outliers: Vec<OutlierReport> = spectrum
        .outliers
        .iter()
        .zip(&spectrum.y_vectors)
        .map(|(o, y)| {
            let ones = vec![1.0; n];
            let (cos, cos_theory) = match (&consts, o.mu_index) {
                (Some(c), Some(i)) => (
                    cosine(y, &lifted(&c.phi[i], truth)),
                    c.gamma.get(i).map(|g| 1.0 / g.sqrt()),
                ),
                _ => (None, None),
            };
            OutlierReport {
                lambda: o.lambda,
                mu_index: o.mu_index,
                mu: o.mu,
                cosine: cos,
                cosine_theory: cos_theory,
                ones_alignment: cosine(y, &ones).unwrap_or(0.0),
            }
        })
        .collect();
    if let Some(c) = &consts {
        if spectrum.outliers.len() != c.r0 {
            warnings.push(format!(
                "{} outliers found, {} expected from the model",
                spectrum.outliers.len(),
                c.r0
            ));
        }
    }

    let ys = emb.vectors;
    let second_from_bulk = emb.second_from_bulk;
    let mut clustering = Vec::new();
    if ys.len() == 2 {
        for mode in [ClusterMode::Sign, ClusterMode::Randomized] {
            let ccfg = ClusterConfig {
                mode,
                threshold: None,
                seed: cfg.seed,
            };
            match cluster(&ys[0], &ys[1], consts.as_ref(), r, &ccfg) {
                Ok(res) => clustering.push(ClusteringReport {
                    mode,
                    overlap: overlap(truth, &res.assignment, r)?,
                    threshold: res.threshold,
                    chose_second: res.choice.chose_second,
                }),
                Err(e) => warnings.push(format!("{mode:?} clustering skipped: {e}")),
            }
        }
    } else {
        warnings.push("fewer than two Ritz vectors available; clustering skipped".into());
    }

    Ok(PipelineReport {
        n,
        seed: cfg.seed,
        r,
        q_sizes: params.q_sizes(),
        weights: w.clone(),
        edges: g.edge_counts(),
        theory: consts.map(|c| TheorySummary {
            mu: c.mu,
            tau: c.tau,
            vartheta: c.vartheta,
            d_w: c.d_w,
            r0: c.r0,
            gamma: c.gamma,
        }),
        spectrum,
        outliers,
        second_from_bulk,
        clustering,
        warnings,
    })
}

/// Samples from `cfg.model` and calls [`run_on`].
pub fn run(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let params = cfg.model.to_params()?;
    let (g, truth) = sample_hsbm(&SampleConfig {
        params: params.clone(),
        n: cfg.n,
        seed: cfg.seed,
        label_mode: cfg.label_mode,
    })?;
    run_on(&g, &truth, &params, cfg)
}
