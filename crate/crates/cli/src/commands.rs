use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hypernb::cluster::{cluster, overlap, ClusterConfig, ClusterMode};
use hypernb::dense::C64;
use hypernb::model::weighted_signal;
use hypernb::operators::{
    eig_relation_check, ihara_bass_verify, j_spectrum_counts, j_spectrum_dense,
    parity_time_residual, NonBacktracking, ResidualMode,
};
use hypernb::pipeline::{embed, EmbedOptions, PipelineConfig, MIN_REGIME_FACTOR};
use hypernb::rng::{substream, tag};
use hypernb::sampler::{sample_hsbm, LabelMode, SampleConfig};
use hypernb::spectral::{analyze, EigOptions, OutlierOptions};
use hypernb::treecheck::martingale_check;
use hypernb::weights::{self, NumericOptions};
use hypernb::{io, par, Error, LayeredHypergraph, ModelConfig, ModelParams, SpectralConstants};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    Check, Cli, ClusterArgs, Command, GraphInput, Method, Mode, PipelineArgs, SampleArgs,
    SpectrumArgs, TreeArgs, VerifyArgs, WeightsArgs,
};
use crate::manifest::{version, RunManifest};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Collects outputs, warnings and the resolved model for the manifest.
struct Run<'a> {
    cli: &'a Cli,
    outputs: Vec<PathBuf>,
    warnings: Vec<String>,
    model: Option<ModelConfig>,
    substreams: Vec<&'static str>,
    /// Set when the run produced a result that failed its own check.
    failure: Option<String>,
}

impl Run<'_> {
    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.cli.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn write(&mut self, p: &Path, text: &str) -> CliResult<()> {
        let p = self.resolve(p);
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&p, text)?;
        self.outputs.push(p);
        Ok(())
    }

    /// Writes to `out` when given, otherwise to stdout.
    fn emit(&mut self, out: Option<&Path>, text: &str) -> CliResult<()> {
        match out {
            Some(p) => self.write(p, text),
            None => {
                let mut so = std::io::stdout().lock();
                so.write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    fn emit_json<T: Serialize>(&mut self, out: Option<&Path>, v: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.emit(out, &text)
    }

    fn load_model(&mut self, p: &Path) -> CliResult<ModelParams> {
        let cfg = ModelConfig::load(p)?;
        let params = cfg.to_params()?;
        self.model = Some(cfg);
        Ok(params)
    }
}

fn load_graph(g: &GraphInput) -> CliResult<(LayeredHypergraph, Vec<f64>)> {
    let graph = io::read_hypergraph(&g.input)?;
    let w = match &g.weights {
        Some(w) => w.clone(),
        None => vec![1.0; graph.num_layers()],
    };
    if w.len() != graph.num_layers() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_layers(),
            got: w.len(),
        }
        .into());
    }
    Ok((graph, w))
}

/// Model constants for `w`; a model without informative structure yields
/// `None` and a warning.
fn constants(run: &mut Run, params: &ModelParams, w: &[f64]) -> CliResult<Option<SpectralConstants>> {
    let params = params.with_weights(w.to_vec())?;
    match weighted_signal(&params) {
        Ok(c) => Ok(Some(c)),
        Err(Error::DegenerateModel(m)) => {
            run.warnings.push(format!("no theoretical constants: {m}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn sample(run: &mut Run, a: &SampleArgs) -> CliResult<()> {
    let params = run.load_model(&a.config)?;
    if a.n < MIN_REGIME_FACTOR * params.q_max() {
        run.warnings.push(format!(
            "degenerate: n = {} is far below the sparse regime (q_max = {})",
            a.n,
            params.q_max()
        ));
    }
    run.substreams = vec!["sampler", "labels"];
    let (g, truth) = sample_hsbm(&SampleConfig {
        params,
        n: a.n,
        seed: run.cli.seed,
        label_mode: if a.shuffle {
            LabelMode::Shuffled
        } else {
            LabelMode::DeterministicBlocks
        },
    })?;
    run.write(&a.out, &io::format_hypergraph(&g))?;
    if let Some(p) = &a.labels_out {
        run.write(p, &io::format_labels(&truth))?;
    }
    let summary = json!({ "n": g.n(), "q": g.q_sizes(), "edges": g.edge_counts() });
    run.emit_json(None, &summary)
}

#[derive(Serialize)]
struct SpectrumOut {
    #[serde(flatten)]
    summary: hypernb::spectral::SpectralSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    y_vectors: Option<Vec<Vec<f64>>>,
}

fn spectrum(run: &mut Run, a: &SpectrumArgs) -> CliResult<()> {
    let (g, w) = load_graph(&a.graph)?;
    let consts = match &a.config {
        Some(p) => {
            let params = run.load_model(p)?;
            constants(run, &params, &w)?
        }
        None => None,
    };
    run.substreams = vec!["spectral-start"];
    let dim = 2 * g.num_layers() * g.n();
    let eig = EigOptions::new(a.k.min(dim)).seed(run.cli.seed).tol(a.tol);
    let opts = OutlierOptions {
        delta_bulk: a.delta_bulk,
        ..OutlierOptions::default()
    };
    let summary = analyze(&g, &w, consts.as_ref(), &eig, &opts)?;
    if !summary.converged {
        run.warnings
            .push("eigensolver did not converge for every wanted pair".into());
    }
    if a.csv {
        let mut text = String::from("re,im\n");
        for e in &summary.ritz {
            text.push_str(&format!("{},{}\n", e.re, e.im));
        }
        return run.emit(a.out.as_deref(), &text);
    }
    let y_vectors = a.emit_vectors.then(|| summary.y_vectors.clone());
    run.emit_json(a.out.as_deref(), &SpectrumOut { summary, y_vectors })
}

fn cluster_cmd(run: &mut Run, a: &ClusterArgs) -> CliResult<()> {
    let (g, w) = load_graph(&a.graph)?;
    let consts = match &a.config {
        Some(p) => {
            let params = run.load_model(p)?;
            constants(run, &params, &w)?
        }
        None => None,
    };
    run.substreams = vec!["spectral-start", "rounding"];
    let opts = EmbedOptions {
        k: a.k,
        tol: a.tol,
        delta_bulk: 0.05,
        seed: run.cli.seed,
    };
    let emb = embed(&g, &w, consts.as_ref(), &opts)?;
    if !emb.converged {
        run.warnings
            .push("eigensolver did not converge for every wanted pair".into());
    }
    if emb.second_from_bulk {
        run.warnings
            .push("fewer than two outliers; second vector taken from the bulk".into());
    }
    if emb.vectors.len() < 2 {
        return Err(CliError::Numerical("fewer than two Ritz vectors available".into()));
    }
    let mode = match a.mode {
        Mode::Alg1 => ClusterMode::Randomized,
        Mode::Sign => ClusterMode::Sign,
    };
    let cfg = ClusterConfig {
        mode,
        threshold: a.threshold,
        seed: run.cli.seed,
    };
    let res = cluster(&emb.vectors[0], &emb.vectors[1], consts.as_ref(), 2, &cfg)?;
    run.write(&a.out, &io::format_labels(&res.assignment))?;
    let ov = match &a.labels {
        Some(p) => {
            let truth = io::read_labels(p)?;
            let r = truth.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(1).max(2);
            Some(overlap(&truth, &res.assignment, r)?)
        }
        None => None,
    };
    let summary = json!({
        "mode": a.mode,
        "threshold": res.threshold,
        "chose_second": res.choice.chose_second,
        "alignment": res.choice.alignment,
        "outliers": emb.spectrum.outliers.len(),
        "second_from_bulk": emb.second_from_bulk,
        "overlap": ov,
    });
    run.emit_json(None, &summary)
}

fn weights_cmd(run: &mut Run, a: &WeightsArgs) -> CliResult<()> {
    let params = run.load_model(&a.config)?;
    let res = match a.method {
        Method::Unit => weights::weights_unit(&params)?,
        Method::R2 => weights::weights_optimal_r2(&params)?,
        Method::Numeric => {
            run.substreams = vec!["weights"];
            let opts = NumericOptions {
                restarts: a.restarts,
                seed: run.cli.seed,
                ..NumericOptions::default()
            };
            weights::weights_numeric(&params, &opts)?
        }
    };
    if res.tie {
        run.warnings
            .push("leading eigenvalues are tied; the optimum is not unique".into());
    }
    if !res.above_ks {
        run.warnings
            .push("no weighting reaches the Kesten-Stigum threshold".into());
    }
    let baseline = weights::snr(&params, &vec![1.0; params.num_layers()])?;
    let out = json!({ "result": res, "unit_snr": baseline });
    run.emit_json(a.out.as_deref(), &out)
}

/// Five evaluation points: two real, three complex, away from the poles.
fn ihara_bass_points(g: &LayeredHypergraph, w: &[f64], seed: u64) -> Vec<C64> {
    let poles: Vec<f64> = w
        .iter()
        .zip(g.q_sizes())
        .flat_map(|(&wk, &q)| [wk, -wk * (q as f64 - 1.0)])
        .collect();
    let radius = 1.0 + poles.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    let mut rng = substream(seed, &[tag::PROBES, 1]);
    let mut out = Vec::new();
    while out.len() < 5 {
        let re = rng.random_range(-radius..radius);
        let im = if out.len() < 2 {
            0.0
        } else {
            rng.random_range(-radius..radius)
        };
        let z = C64::new(re, im);
        if poles.iter().all(|&p| (z - p).norm() > 1e-3) {
            out.push(z);
        }
    }
    out
}

fn verify(run: &mut Run, a: &VerifyArgs) -> CliResult<()> {
    let (g, w) = load_graph(&a.graph)?;
    let seed = run.cli.seed;
    let (ok, details): (bool, Value) = match a.check {
        Check::IharaBass => {
            run.substreams = vec!["probes"];
            let reps = ihara_bass_points(&g, &w, seed)
                .into_iter()
                .map(|z| ihara_bass_verify(&g, &w, z, 1e-8))
                .collect::<Result<Vec<_>, _>>()?;
            (reps.iter().all(|r| r.ok), json!(reps))
        }
        Check::ParityTime => {
            let op = NonBacktracking::new(&g, &w)?;
            let mode = if op.m() <= 500 {
                ResidualMode::Dense
            } else {
                run.substreams = vec!["probes"];
                ResidualMode::Probes(16)
            };
            let reps = (0..=a.max_power)
                .map(|k| parity_time_residual(&op, k, mode, seed))
                .collect::<Result<Vec<_>, _>>()?;
            (reps.iter().all(|r| r.ok), json!(reps))
        }
        Check::EigRelation => {
            let rep = eig_relation_check(&g, &w, 1e-8)?;
            (rep.ok, json!(rep))
        }
        Check::JSpectrum => {
            let op = NonBacktracking::new(&g, &w)?;
            if op.m() > hypernb::operators::IHARA_BASS_MAX_M {
                return Err(Error::NotApplicable(format!("m = {} is too large for a dense check", op.m())).into());
            }
            let predicted = j_spectrum_counts(&g);
            let observed = j_spectrum_dense(&op)?;
            (
                predicted == observed,
                json!({ "predicted": predicted, "observed": observed }),
            )
        }
    };
    run.emit_json(a.out.as_deref(), &json!({ "check": a.check, "ok": ok, "details": details }))?;
    if !ok {
        run.failure = Some(format!("{:?} check failed", a.check));
    }
    Ok(())
}

fn tree(run: &mut Run, a: &TreeArgs) -> CliResult<()> {
    let params = run.load_model(&a.config)?;
    let consts = weighted_signal(&params)?;
    run.substreams = vec!["gw-tree"];
    let rep = martingale_check(&params, &consts, a.eig, a.depth, a.samples, run.cli.seed)?;
    if !rep.pass {
        run.warnings.push(format!(
            "moment check exceeds the tolerance (max |z| = {:.2})",
            rep.max_z
        ));
    }
    run.emit_json(a.out.as_deref(), &rep)
}

fn pipeline(run: &mut Run, a: &PipelineArgs) -> CliResult<()> {
    let model = ModelConfig::load(&a.config)?;
    run.model = Some(model.clone());
    run.substreams = vec!["sampler", "labels", "spectral-start", "rounding"];
    let cfg = PipelineConfig {
        model,
        n: a.n,
        seed: run.cli.seed,
        k: a.k,
        tol: a.tol,
        delta_bulk: a.delta_bulk,
        label_mode: if a.shuffle {
            LabelMode::Shuffled
        } else {
            LabelMode::DeterministicBlocks
        },
    };
    let rep = hypernb::pipeline::run(&cfg)?;
    run.warnings.extend(rep.warnings.iter().cloned());
    run.emit_json(a.out.as_deref(), &rep)
}

/// Runs the subcommand and writes its manifest. Returns the warnings.
pub fn execute(cli: &Cli) -> CliResult<Vec<String>> {
    par::init_threads(cli.threads);
    let start = Instant::now();
    let mut run = Run {
        cli,
        outputs: Vec::new(),
        warnings: Vec::new(),
        model: None,
        substreams: Vec::new(),
        failure: None,
    };
    match &cli.command {
        Command::Sample(a) => sample(&mut run, a)?,
        Command::Spectrum(a) => spectrum(&mut run, a)?,
        Command::Cluster(a) => cluster_cmd(&mut run, a)?,
        Command::Weights(a) => weights_cmd(&mut run, a)?,
        Command::Verify(a) => verify(&mut run, a)?,
        Command::Tree(a) => tree(&mut run, a)?,
        Command::Pipeline(a) => pipeline(&mut run, a)?,
    }
    let manifest = RunManifest {
        subcommand: cli.command.name().into(),
        config: json!({ "args": cli, "model": run.model }),
        seed: cli.seed,
        version: version(),
        substreams: run.substreams.clone(),
        threads: par::current_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: run.outputs.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numerical(e.to_string()))?;
    match run.outputs.first() {
        Some(p) => fs::write(RunManifest::path_for(p), text + "\n")?,
        None => match &cli.out_dir {
            Some(d) => {
                fs::create_dir_all(d)?;
                fs::write(d.join(format!("{}.manifest.json", cli.command.name())), text + "\n")?;
            }
            None => eprintln!("{text}"),
        },
    }
    if let Some(msg) = run.failure {
        return Err(CliError::Numerical(msg));
    }
    Ok(run.warnings)
}
