//! Command-line front end: `discover`, `simulate`, `omit`, `evaluate` and
//! `bench`.
//!
//! Every command writes a `<output>.manifest.json` next to its main output
//! recording the configuration, input hashes, counters and the list of
//! files written. JSON outputs carry the manifest's file name under
//! `"manifest"`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dataset::{self, DataMatrix};
use crate::discovery::{self, CausalGraph, Config, DiscoveryTrace};
use crate::error::{Error, Result};
use crate::eval::{self, EdgeKind, ScoreRow, SCORE_HEADER};
use crate::hsic::DEFAULT_MAX_N;
use crate::synth::{gen_structure, CausalStructure, SynthConfig};

/// Environment variable overriding the HSIC subsample cap; `0` or `none`
/// disables subsampling.
pub const HSIC_MAX_N_VAR: &str = "CAMUV_HSIC_MAX_N";

#[derive(Debug, Parser)]
#[command(
    name = "camuv",
    version,
    about = "Causal discovery with unobserved variables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infer a causal graph from a CSV file.
    Discover(DiscoverArgs),
    /// Generate synthetic data with a known structure.
    Simulate(SimulateArgs),
    /// Hide observed variables of a simulated dataset.
    Omit(OmitArgs),
    /// Score an estimated graph against a known structure.
    Evaluate(EvaluateArgs),
    /// Simulate, discover and evaluate over several trials and sample sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3)]
    pub max_set_size: usize,
    /// Use the columns as given instead of scaling to zero mean and unit
    /// variance.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dot: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub common: usize,
    #[arg(long, default_value_t = 2)]
    pub intermediate: usize,
    #[arg(long, default_value_t = 0.3)]
    pub er: f64,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct OmitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Number of observed variables to hide.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Treat this many observed variables as hidden, chosen as `omit` does.
    #[arg(long)]
    pub omit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    #[arg(long, value_delimiter = ',', default_value = "100,200,500,1000")]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3)]
    pub max_set_size: usize,
    #[arg(long, default_value_t = 2)]
    pub common: usize,
    #[arg(long, default_value_t = 2)]
    pub intermediate: usize,
    #[arg(long, default_value_t = 0.3)]
    pub er: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Discover(a) => cmd_discover(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Omit(a) => cmd_omit(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

/// The subsample cap from [`HSIC_MAX_N_VAR`], defaulting to
/// [`DEFAULT_MAX_N`].
pub fn hsic_max_n_from_env() -> Result<Option<usize>> {
    match std::env::var(HSIC_MAX_N_VAR) {
        Err(_) => Ok(Some(DEFAULT_MAX_N)),
        Ok(v) if v.trim().eq_ignore_ascii_case("none") || v.trim() == "0" => Ok(None),
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("{HSIC_MAX_N_VAR}={v:?} is not a count"))),
    }
}

struct Manifest {
    path: PathBuf,
    command: &'static str,
    config: Value,
    inputs: Vec<Value>,
    seed: u64,
    started: Instant,
    counters: Value,
    artifacts: Vec<PathBuf>,
}

impl Manifest {
    fn new(main_output: &Path, command: &'static str, seed: u64, config: Value) -> Self {
        Self {
            path: with_suffix(main_output, ".manifest.json"),
            command,
            config,
            inputs: Vec::new(),
            seed,
            started: Instant::now(),
            counters: json!({}),
            artifacts: Vec::new(),
        }
    }

    fn file_name(&self) -> String {
        self.path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs
            .push(json!({"path": path.display().to_string(), "sha256": hex}));
        Ok(bytes)
    }

    fn write(&mut self, path: &Path, contents: &[u8]) -> Result<()> {
        fs::write(path, contents).map_err(|e| Error::io(path, e))?;
        self.artifacts.push(path.to_path_buf());
        Ok(())
    }

    fn write_json(&mut self, path: &Path, mut value: Value) -> Result<()> {
        if let Value::Object(map) = &mut value {
            map.insert("manifest".into(), json!(self.file_name()));
        }
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    fn finish(self) -> Result<()> {
        let artifacts: Vec<String> = self
            .artifacts
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        let value = json!({
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.seed,
            "wall_clock_ms": self.started.elapsed().as_millis() as u64,
            "counters": self.counters,
            "artifacts": artifacts,
        });
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        fs::write(&self.path, text).map_err(|e| Error::io(&self.path, e))
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn counters(trace: &DiscoveryTrace) -> Value {
    json!({
        "regressions": trace.regression_count,
        "hsic_tests": trace.hsic_count,
        "sink_search_evaluations": trace.sink_search_evaluations,
        "final_sweep_evaluations": trace.final_sweep_evaluations(),
        "phase1_sweeps": trace.phase1_sweeps,
        "acceptances": trace.acceptances,
        "warnings": trace.warnings,
    })
}

fn parse_json(bytes: &[u8], path: &Path) -> Result<Value> {
    serde_json::from_slice(bytes).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn cmd_discover(a: &DiscoverArgs) -> Result<()> {
    let config = Config {
        alpha: a.alpha,
        max_set_size: a.max_set_size,
        seed: a.seed,
        hsic_max_n: hsic_max_n_from_env()?,
    };
    config.validate()?;
    let mut manifest = Manifest::new(&a.out, "discover", a.seed, Value::Null);
    let bytes = manifest.input(&a.input)?;
    let raw = dataset::read_csv(bytes.as_slice()).map_err(|e| match e {
        Error::Parse {
            row,
            column,
            message,
        } => Error::Parse {
            row,
            column,
            message: format!("{}: {message}", a.input.display()),
        },
        other => other,
    })?;
    let data = if a.no_standardize {
        raw
    } else {
        raw.standardize()?
    };
    let (graph, trace) = discovery::discover(&data, &config)?;
    for w in &trace.warnings {
        log::warn!("{w}");
    }
    manifest.config = json!({
        "alpha": config.alpha,
        "max_set_size": config.max_set_size,
        "standardize": !a.no_standardize,
        "hsic_max_n": config.hsic_max_n,
        "n": data.n(),
        "p": data.p(),
    });
    manifest.counters = counters(&trace);
    manifest.write_json(&a.out, graph.to_json())?;
    if let Some(dot) = &a.dot {
        manifest.write(dot, graph.to_dot().as_bytes())?;
    }
    manifest.finish()
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = SynthConfig {
        p: a.p,
        er_prob: a.er,
        n_common: a.common,
        n_intermediate: a.intermediate,
        n: a.n,
        seed: a.seed,
    };
    let truth = gen_structure(&cfg)?;
    let data = truth.sample(a.n, a.seed)?;
    let csv_path = with_suffix(&a.out_prefix, ".csv");
    let truth_path = with_suffix(&a.out_prefix, ".truth.json");
    let config = json!({
        "p": a.p, "n": a.n, "common": a.common, "intermediate": a.intermediate, "er": a.er,
    });
    let mut manifest = Manifest::new(&a.out_prefix, "simulate", a.seed, config);
    let mut buf = Vec::new();
    data.write_csv_to(&mut buf)?;
    manifest.write(&csv_path, &buf)?;
    manifest.write_json(&truth_path, truth.structure.to_json())?;
    manifest.finish()
}

fn cmd_omit(a: &OmitArgs) -> Result<()> {
    let mut manifest = Manifest::new(&a.out_prefix, "omit", a.seed, json!({"m": a.m}));
    let data = dataset::read_csv(manifest.input(&a.data)?.as_slice())?;
    let truth_bytes = manifest.input(&a.truth)?;
    let structure = CausalStructure::from_json(&parse_json(&truth_bytes, &a.truth)?)?;
    let (reduced_data, reduced, _) = eval::omit_variables(&structure, &data, a.m, a.seed)?;
    let mut buf = Vec::new();
    reduced_data.write_csv_to(&mut buf)?;
    manifest.write(&with_suffix(&a.out_prefix, ".csv"), &buf)?;
    manifest.write_json(
        &with_suffix(&a.out_prefix, ".truth.json"),
        reduced.to_json(),
    )?;
    manifest.finish()
}

/// Reorders `graph` to the variable order `names`; both must name the same
/// variables.
fn align(graph: &CausalGraph, names: &[String]) -> Result<CausalGraph> {
    let order = names
        .iter()
        .map(|n| graph.names.iter().position(|g| g == n))
        .collect::<Option<Vec<_>>>();
    match order {
        Some(order) if order.len() == graph.p() => Ok(graph.permuted(&order)),
        _ => Err(Error::Schema(format!(
            "graph variables {:?} do not match truth variables {:?}",
            graph.names, names
        ))),
    }
}

/// Run context recorded by `discover`, if the graph's manifest is readable.
fn discover_context(
    graph_path: &Path,
    graph_json: &Value,
) -> (Option<usize>, Option<f64>, Option<usize>) {
    let manifest = graph_json
        .get("manifest")
        .and_then(Value::as_str)
        .map(|name| graph_path.parent().unwrap_or(Path::new("")).join(name))
        .and_then(|p| fs::read(p).ok())
        .and_then(|b| serde_json::from_slice::<Value>(&b).ok());
    let config = manifest.as_ref().and_then(|m| m.get("config"));
    let field = |k: &str| config.and_then(|c| c.get(k)).cloned();
    (
        field("n").and_then(|v| v.as_u64()).map(|v| v as usize),
        field("alpha").and_then(|v| v.as_f64()),
        field("max_set_size")
            .and_then(|v| v.as_u64())
            .map(|v| v as usize),
    )
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut manifest = Manifest::new(
        &a.out,
        "evaluate",
        a.seed,
        json!({"omit": a.omit, "trial": a.trial}),
    );
    let graph_json = parse_json(&manifest.input(&a.graph)?, &a.graph)?;
    let graph = CausalGraph::from_json(&graph_json)?;
    let truth_bytes = manifest.input(&a.truth)?;
    let mut structure = CausalStructure::from_json(&parse_json(&truth_bytes, &a.truth)?)?;
    if let Some(m) = a.omit {
        let hidden = eval::omit_selection(structure.num_observed(), m, a.seed)?;
        structure = structure.with_omitted(&hidden)?;
    }
    let truth = eval::project_truth(&structure)?;
    let graph = align(&graph, &truth.names)?;
    let (n, alpha, d) = discover_context(&a.graph, &graph_json);
    let rows = [
        (EdgeKind::Directed, eval::score_directed(&graph, &truth)?),
        (EdgeKind::Dashed, eval::score_dashed(&graph, &truth)?),
    ]
    .map(|(kind, scores)| ScoreRow {
        trial: a.trial,
        n,
        alpha,
        d,
        kind,
        scores,
    });
    let fresh = fs::metadata(&a.out).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&a.out)
        .map_err(|e| Error::io(&a.out, e))?;
    eval::write_score_rows(file, &rows, fresh)?;
    manifest.artifacts.push(a.out.clone());
    manifest.finish()
}

/// Outcome of one simulate → discover → evaluate round in `bench`.
struct BenchRecord {
    rows: [ScoreRow; 2],
    trace: DiscoveryTrace,
    millis: u128,
}

fn bench_one(a: &BenchArgs, config: &Config, trial: u64, n: usize) -> Result<BenchRecord> {
    let structure_seed = a.seed.wrapping_add(trial);
    let cfg = SynthConfig {
        p: a.p,
        er_prob: a.er,
        n_common: a.common,
        n_intermediate: a.intermediate,
        n,
        seed: structure_seed,
    };
    let truth = gen_structure(&cfg)?;
    let data: DataMatrix = truth
        .sample(n, structure_seed ^ ((n as u64) << 32))?
        .standardize()?;
    let started = Instant::now();
    let (graph, trace) = discovery::discover(&data, config)?;
    let millis = started.elapsed().as_millis();
    let projected = eval::project_truth(&truth.structure)?;
    let row = |kind, scores| ScoreRow {
        trial,
        n: Some(n),
        alpha: Some(config.alpha),
        d: Some(config.max_set_size),
        kind,
        scores,
    };
    Ok(BenchRecord {
        rows: [
            row(
                EdgeKind::Directed,
                eval::score_directed(&graph, &projected)?,
            ),
            row(EdgeKind::Dashed, eval::score_dashed(&graph, &projected)?),
        ],
        trace,
        millis,
    })
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let config = Config {
        alpha: a.alpha,
        max_set_size: a.max_set_size,
        seed: a.seed,
        hsic_max_n: hsic_max_n_from_env()?,
    };
    config.validate()?;
    let settings = json!({
        "trials": a.trials, "sizes": a.sizes, "p": a.p, "alpha": a.alpha,
        "max_set_size": a.max_set_size, "common": a.common,
        "intermediate": a.intermediate, "er": a.er,
    });
    let mut manifest = Manifest::new(&a.out, "bench", a.seed, settings);
    let jobs: Vec<(usize, u64)> = a
        .sizes
        .iter()
        .flat_map(|&n| (0..a.trials).map(move |t| (n, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let r = bench_one(a, &config, trial, n);
            log::info!("bench n={n} trial={trial} done");
            r
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = SCORE_HEADER.to_vec();
    header.extend([
        "regressions",
        "hsic_tests",
        "sink_search_evaluations",
        "final_sweep_evaluations",
        "phase1_sweeps",
    ]);
    w.write_record(&header)?;
    let mut timing = csv::Writer::from_writer(Vec::new());
    timing.write_record(["trial", "n", "wall_clock_ms"])?;
    let mut total = (0u64, 0u64);
    for (&(n, trial), rec) in jobs.iter().zip(&records) {
        let t = &rec.trace;
        for row in &rec.rows {
            let mut fields = row.fields().to_vec();
            fields.extend(
                [
                    t.regression_count,
                    t.hsic_count,
                    t.sink_search_evaluations,
                    t.final_sweep_evaluations(),
                    t.phase1_sweeps,
                ]
                .map(|c| c.to_string()),
            );
            w.write_record(&fields)?;
        }
        timing.write_record([trial.to_string(), n.to_string(), rec.millis.to_string()])?;
        total.0 += t.regression_count;
        total.1 += t.hsic_count;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))?;
    manifest.write(&a.out, &bytes)?;
    let bytes = timing
        .into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))?;
    manifest.write(&with_suffix(&a.out, ".timing.csv"), &bytes)?;
    manifest.counters = json!({"regressions": total.0, "hsic_tests": total.1, "runs": jobs.len()});
    manifest.finish()
}

/// Parses arguments, runs the command, and maps the outcome to an exit
/// code after printing any error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            1
        }
    }
}
