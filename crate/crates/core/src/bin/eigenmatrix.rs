use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use eigenmatrix::domains::{map_forward, probe_grid};
use eigenmatrix::eigenmatrix::{build, diagnostic_points, residual_diagnostic};
use eigenmatrix::harness::io::{model_rows, report_csv, PlotRow};
use eigenmatrix::harness::{
    probe_count, read_observations_file, run_experiment, trial_samples, write_outputs, Difficulty,
    EigenmatrixExport, ExperimentConfig, Scenario,
};
use eigenmatrix::kernels::SampleSet;
use eigenmatrix::numerics::C64;
use eigenmatrix::recovery::{recover, Estimator, Problem, RecoveryOptions, RecoveryResult};
use eigenmatrix::refine::{select_model_order, DEFAULT_NOISE_FACTOR};
use eigenmatrix::{Error, Result};

#[derive(Parser)]
#[command(name = "eigenmatrix", version, about = "Sparse spike recovery from unstructured kernel samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover spikes from an observation file (columns s_re,s_im,u_re,u_im).
    Recover(RecoverArgs),
    /// Run a seeded Monte Carlo experiment for a scenario or config file.
    Experiment(ExperimentArgs),
    /// Eigenmatrix construction and diagnostics.
    Eigenmatrix {
        #[command(subcommand)]
        action: EigenmatrixAction,
    },
    /// Emit the probe grid and the sample set.
    Grid(GridArgs),
}

#[derive(Subcommand)]
enum EigenmatrixAction {
    /// Build the eigenmatrix and write it as JSON.
    Build(BuildArgs),
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

/// Problem definition: a named scenario or a JSON config, plus overrides.
#[derive(Args)]
struct SetupArgs {
    #[arg(long, value_parser = parse_scenario, required_unless_present = "config", conflicts_with = "config")]
    scenario: Option<Scenario>,
    #[arg(long, value_parser = parse_difficulty, default_value = "easy")]
    difficulty: Difficulty,
    /// Experiment config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_a: Option<usize>,
    /// Use exactly --n-a probes instead of shrinking to a well-conditioned count.
    #[arg(long)]
    no_auto_n_a: bool,
    #[arg(long)]
    norm_bound: Option<f64>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<Estimator>,
    #[arg(long)]
    n_x: Option<usize>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    gradient_tolerance: Option<f64>,
    #[arg(long)]
    step_tolerance: Option<f64>,
    #[arg(long)]
    damping_init: Option<f64>,
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for output files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    setup: SetupArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Choose the spike count by sweeping 1..=N instead of using --n-x.
    #[arg(long, value_name = "N")]
    select_order: Option<usize>,
    /// Noise level estimate used by --select-order.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    setup: SetupArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    setup: SetupArgs,
    /// Take the sample points from an observation file instead of the scenario.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of test points for the eigen-residual diagnostic.
    #[arg(long, default_value_t = 100)]
    residual_points: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    setup: SetupArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_difficulty(s: &str) -> std::result::Result<Difficulty, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl SetupArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.scenario) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text)?
            }
            (None, Some(sc)) => ExperimentConfig::scenario(sc, self.difficulty),
            (None, None) => return Err(Error::Config("need --scenario or --config".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n_a) = self.n_a {
            cfg.n_a = n_a;
        }
        if self.no_auto_n_a {
            cfg.auto_n_a = false;
        }
        if let Some(b) = self.norm_bound {
            cfg.norm_bound = b;
        }
        Ok(cfg)
    }
}

impl EstimatorArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(e) = self.estimator {
            cfg.estimator = e;
        }
        if self.n_x.is_some() {
            cfg.n_x = self.n_x;
        }
        if self.ell.is_some() {
            cfg.ell = self.ell;
        }
        let r = &mut cfg.refine;
        if let Some(v) = self.max_iterations {
            r.max_iterations = v;
        }
        if let Some(v) = self.gradient_tolerance {
            r.gradient_tolerance = v;
        }
        if let Some(v) = self.step_tolerance {
            r.step_tolerance = v;
        }
        if let Some(v) = self.damping_init {
            r.damping_init = v;
        }
    }
}

/// Writes `body` to `dir/name`, or to stdout without `--out`.
fn emit(output: &OutputArgs, name: &str, body: &str) -> Result<()> {
    match &output.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, body)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            if !body.ends_with('\n') {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct RecoverReport {
    n_a_used: usize,
    result: RecoveryResult,
    /// Objective per candidate order when the order was selected by sweep.
    order_objectives: Option<Vec<Option<f64>>>,
    order_threshold: Option<f64>,
    order_converged: Option<bool>,
}

/// Exit status 2 marks a numerical failure of the (single) recovery.
fn run_recover(args: &RecoverArgs) -> Result<()> {
    let mut cfg = args.setup.config()?;
    args.estimator.apply(&mut cfg);
    cfg.refine.validate()?;
    if cfg.norm_bound.is_nan() || cfg.norm_bound <= 0.0 || cfg.n_a == 0 {
        return Err(Error::Config("need n_a >= 1 and a positive norm bound".into()));
    }
    let (samples, u) = read_observations_file(&args.data)?;
    let n_a = probe_count(&cfg, &samples)?;
    let e = build(&cfg.kernel, &samples, cfg.domain, &cfg.map, n_a, cfg.norm_bound)?;
    let problem = Problem::new(&cfg.kernel, &samples, cfg.domain, cfg.map);
    let opts = RecoveryOptions {
        estimator: cfg.estimator,
        n_x: cfg.recovery_order(),
        ell: cfg.ell,
        refine: cfg.refine,
    };
    let report = match args.select_order {
        Some(n_max) => {
            let sel = select_model_order(&problem, &e, &u, args.sigma, n_max, &opts, DEFAULT_NOISE_FACTOR)?;
            RecoverReport {
                n_a_used: n_a,
                result: sel.result,
                order_objectives: Some(sel.objectives),
                order_threshold: Some(sel.threshold),
                order_converged: Some(sel.converged),
            }
        }
        None => {
            if let Some(ell) = opts.ell {
                if ell <= opts.n_x {
                    return Err(Error::Config(format!("ell = {ell} must exceed n_x = {}", opts.n_x)));
                }
            }
            RecoverReport {
                n_a_used: n_a,
                result: recover(&problem, &e, &u, &opts)?,
                order_objectives: None,
                order_threshold: None,
                order_converged: None,
            }
        }
    };
    match args.output.format {
        Format::Json => emit(&args.output, "recovery.json", &serde_json::to_string_pretty(&report)?),
        Format::Csv => {
            let mut rows: Vec<PlotRow> = model_rows(&report.result.raw, "raw");
            rows.extend(model_rows(&report.result.refined, "refined"));
            emit(&args.output, "recovery.csv", &to_csv(rows)?)
        }
    }
}

/// Returns whether every trial failed.
fn run_experiment_cmd(args: &ExperimentArgs) -> Result<bool> {
    let mut cfg = args.setup.config()?;
    args.estimator.apply(&mut cfg);
    if let Some(s) = args.sigma {
        cfg.sigma = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let report = run_experiment(&cfg)?;
    match &args.output.out {
        Some(dir) => {
            for p in write_outputs(&report, dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => match args.output.format {
            Format::Json => emit(&args.output, "report.json", &report.to_json()?)?,
            Format::Csv => emit(&args.output, "report.csv", &report_csv(&report)?)?,
        },
    }
    Ok(report.all_failed())
}

fn samples_for(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<SampleSet> {
    match data {
        Some(p) => Ok(read_observations_file(p)?.0),
        None => trial_samples(cfg, 0),
    }
}

#[derive(Serialize)]
struct MatrixEntry {
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

fn run_build(args: &BuildArgs) -> Result<()> {
    let cfg = args.setup.config()?;
    cfg.validate()?;
    let samples = samples_for(&cfg, args.data.as_deref())?;
    let n_a = probe_count(&cfg, &samples)?;
    let e = build(&cfg.kernel, &samples, cfg.domain, &cfg.map, n_a, cfg.norm_bound)?;
    let points = diagnostic_points(cfg.domain, args.residual_points, 0.95);
    let residual = if points.is_empty() {
        None
    } else {
        Some(residual_diagnostic(&e, &cfg.kernel, &samples, &cfg.map, &points)?)
    };
    match args.output.format {
        Format::Json => {
            let export = EigenmatrixExport::new(&e, residual);
            emit(&args.output, "eigenmatrix.json", &serde_json::to_string_pretty(&export)?)
        }
        Format::Csv => {
            let n = e.matrix.nrows();
            let entries = (0..n).flat_map(|i| {
                let e = &e;
                (0..n).map(move |j| MatrixEntry { row: i, col: j, re: e.matrix[(i, j)].re, im: e.matrix[(i, j)].im })
            });
            emit(&args.output, "eigenmatrix.csv", &to_csv(entries)?)
        }
    }
}

#[derive(Serialize)]
struct GridRow {
    series: &'static str,
    index: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct GridReport {
    n_a: usize,
    probe_nodes: Vec<C64>,
    probe_images: Vec<C64>,
    samples: Vec<C64>,
}

fn run_grid(args: &GridArgs) -> Result<()> {
    let cfg = args.setup.config()?;
    cfg.validate()?;
    let samples = samples_for(&cfg, None)?;
    let n_a = probe_count(&cfg, &samples)?;
    let grid = probe_grid(cfg.domain, n_a)?;
    let report = GridReport {
        n_a,
        probe_images: grid.nodes.iter().map(|&t| map_forward(&cfg.map, t)).collect(),
        probe_nodes: grid.nodes,
        samples: samples.as_slice().to_vec(),
    };
    match args.output.format {
        Format::Json => emit(&args.output, "grid.json", &serde_json::to_string_pretty(&report)?),
        Format::Csv => {
            let series = [
                ("probe", &report.probe_nodes),
                ("probe_image", &report.probe_images),
                ("sample", &report.samples),
            ];
            let rows = series.into_iter().flat_map(|(name, pts)| {
                pts.iter().enumerate().map(move |(index, z)| GridRow { series: name, index, re: z.re, im: z.im })
            });
            emit(&args.output, "grid.csv", &to_csv(rows)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Recover(a) => run_recover(a).map(|_| false),
        Command::Experiment(a) => run_experiment_cmd(a),
        Command::Eigenmatrix { action: EigenmatrixAction::Build(a) } => run_build(a).map(|_| false),
        Command::Grid(a) => run_grid(a).map(|_| false),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: every trial failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
