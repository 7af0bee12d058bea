mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mixsel_core::data::{load_dataset, read_labels, write_dataset, write_labels};
use mixsel_core::pipeline::{fit, replicate, ReplicateSpec};
use mixsel_core::sampler::{ChainOutput, RunConfig};
use mixsel_core::simulate::{apply_censoring, generate, naive_fill, CensorSpec, NormalParam, ScenarioId, ScenarioSpec};
use mixsel_core::summary::{assignments_csv, estimates_csv, weights_csv};
use mixsel_core::{adjusted_rand_index, Dataset};

use manifest::Manifest;

/// Marks an error as a command-line misuse (exit code 2).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "mixsel", version, about = "Bayesian mixture clustering with variable weights and censored data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scenario with true labels.
    Simulate(SimulateArgs),
    /// Fit the model to a dataset and write assignments, weights and estimates.
    Fit(FitArgs),
    /// Adjusted Rand index between two labelings.
    Evaluate(EvaluateArgs),
    /// Simulate and fit a scenario repeatedly and summarize ARI and weights.
    Replicate(ReplicateArgs),
}

#[derive(Args, Debug, Clone)]
struct CensorArgs {
    /// Comma-separated continuous columns to censor from below.
    #[arg(long, value_delimiter = ',')]
    censor: Vec<String>,
    /// Fraction of each censored column below its detection limit.
    #[arg(long, default_value_t = 0.2)]
    prop: f64,
    /// Fill censored cells with half their limit instead of imputing them.
    #[arg(long)]
    naive: bool,
}

impl CensorArgs {
    fn spec(&self) -> Option<CensorSpec> {
        (!self.censor.is_empty()).then(|| CensorSpec {
            variables: self.censor.clone(),
            proportion: self.prop,
        })
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Whether the second normal parameter is a standard deviation or a variance.
    #[arg(long, default_value = "sd")]
    normal_param: String,
    #[command(flatten)]
    censor: CensorArgs,
}

#[derive(Args, Debug, Clone)]
struct SamplerArgs {
    /// Run-configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Update variables on the thread pool (same results, less wall-clock).
    #[arg(long)]
    parallel: bool,
}

impl SamplerArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                RunConfig::parse(&text).map_err(|e| usage(e.to_string()))?
            }
            None => RunConfig::default(),
        };
        let m = &mut cfg.mcmc;
        if let Some(v) = self.seed {
            m.seed = v;
        }
        if let Some(v) = self.clusters {
            m.clusters = v;
        }
        if let Some(v) = self.iters {
            m.iterations = v;
        }
        if let Some(v) = self.burnin {
            m.burn_in = v;
        }
        if let Some(v) = self.thin {
            m.thin = v;
        }
        m.parallel |= self.parallel;
        m.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write every retained (relabeled) draw to draws.csv.
    #[arg(long)]
    dump_draws: bool,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Assignments CSV or labels file.
    #[arg(long)]
    assignments: PathBuf,
    /// Labels file or assignments CSV.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Replicate r uses seed base + r for both data and chain.
    #[arg(long = "base-seed", default_value_t = 1)]
    base_seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value = "sd")]
    normal_param: String,
    #[command(flatten)]
    censor: CensorArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
}

fn scenario(name: &str, normal_param: &str) -> Result<ScenarioSpec> {
    let id: ScenarioId = name.parse().map_err(|e: mixsel_core::Error| usage(e.to_string()))?;
    let np: NormalParam = normal_param.parse().map_err(|e: mixsel_core::Error| usage(e.to_string()))?;
    Ok(ScenarioSpec::new(id).with_normal_param(np))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("{what} file {} does not exist", path.display())));
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, manifest: &mut Manifest) -> Result<()> {
    let spec = scenario(&args.scenario, &args.normal_param)?;
    let (mut ds, labels) = generate(&spec, args.seed)?;
    if let Some(cs) = args.censor.spec() {
        ds = apply_censoring(&ds, &cs).map_err(|e| usage(e.to_string()))?;
    }
    if args.censor.naive {
        ds = naive_fill(&ds)?;
    }
    create_dir(&args.out)?;
    let data = args.out.join("data.csv");
    let schema = args.out.join("schema.txt");
    let labels_path = args.out.join("labels.csv");
    write_dataset(&ds, &data, &schema)?;
    write_labels(&labels, &labels_path)?;
    manifest.seed = Some(args.seed);
    manifest.setting("scenario", spec.id.name());
    manifest.setting("normal_param", &args.normal_param);
    manifest.setting("censor", &args.censor.censor.join(","));
    manifest.setting("prop", &args.censor.prop.to_string());
    manifest.setting("naive", &args.censor.naive.to_string());
    for p in [data, schema, labels_path] {
        manifest.output(&p);
    }
    Ok(())
}

/// Retained draws in long form: one row per (draw, parameter, cluster).
fn draws_csv(draws: &ChainOutput, ds: &Dataset) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("draw,parameter,cluster,value\n");
    for (t, p) in draws.params.iter().enumerate() {
        let t = t + 1;
        for (g, v) in p.tau.iter().enumerate() {
            let _ = writeln!(s, "{t},tau,{},{v}", g + 1);
        }
        let _ = writeln!(s, "{t},sigma2_delta0,,{}", p.sigma2_delta0);
        for (j, c) in p.continuous.iter().enumerate() {
            let name = &ds.continuous_schema(j).name;
            let _ = writeln!(s, "{t},A1:{name},,{}", c.a1);
            for g in 0..c.mu.len() {
                let _ = writeln!(s, "{t},mu:{name},{},{}", g + 1, c.mu[g]);
                let _ = writeln!(s, "{t},delta:{name},{},{}", g + 1, u8::from(c.delta[g]));
            }
            let _ = writeln!(s, "{t},gamma:{name},,{}", c.gamma);
            let _ = writeln!(s, "{t},p1:{name},,{}", c.p1);
        }
        for (k, c) in p.categorical.iter().enumerate() {
            let col = ds.categorical_schema(k);
            for (g, row) in c.theta.iter().enumerate() {
                for (level, v) in col.levels.iter().zip(row) {
                    let _ = writeln!(s, "{t},theta:{}={level},{},{v}", col.name, g + 1);
                }
                let _ = writeln!(s, "{t},delta:{},{},{}", col.name, g + 1, u8::from(c.delta[g]));
            }
            let _ = writeln!(s, "{t},p2:{},,{}", col.name, c.p2);
        }
    }
    s
}

fn cmd_fit(args: &FitArgs, manifest: &mut Manifest) -> Result<()> {
    require_file(&args.data, "data")?;
    require_file(&args.schema, "schema")?;
    let cfg = args.sampler.run_config()?;
    let ds = load_dataset(&args.data, &args.schema)?;
    let hp = cfg.hyperparameters(&ds)?;
    manifest.input(&args.data)?;
    manifest.input(&args.schema)?;
    manifest.seed = Some(cfg.mcmc.seed);
    manifest.config = Some(cfg.to_text());

    let out = fit(&ds, &hp, &cfg.mcmc)?;
    if !out.relabel.converged {
        log::warn!("relabeling stopped after {} sweeps without converging", out.relabel.sweeps);
    }
    manifest.setting("retained_draws", &out.draws.retained().to_string());
    manifest.setting("relabel_sweeps", &out.relabel.sweeps.to_string());
    manifest.setting("relabel_converged", &out.relabel.converged.to_string());

    create_dir(&args.out)?;
    let files = [
        ("assignments.csv", assignments_csv(&out.summary)),
        ("weights.csv", weights_csv(&out.summary, &ds)),
        ("estimates.csv", estimates_csv(&out.summary, &ds)),
    ];
    for (name, text) in files {
        let path = args.out.join(name);
        write(&path, &text)?;
        manifest.output(&path);
    }
    if args.dump_draws {
        let path = args.out.join("draws.csv");
        write(&path, &draws_csv(&out.draws, &ds))?;
        manifest.output(&path);
    }
    Ok(())
}

/// Labels from either an assignments CSV (its `cluster` column) or a labels file.
fn read_any_labels(path: &Path) -> Result<Vec<usize>> {
    require_file(path, "labels")?;
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header = text.lines().next().unwrap_or("");
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if let Some(col) = fields.iter().position(|&f| f == "cluster") {
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let value = line.split(',').nth(col).unwrap_or("").trim();
            let label = value
                .parse()
                .with_context(|| format!("{}: line {}: bad cluster `{value}`", path.display(), i + 1))?;
            labels.push(label);
        }
        return Ok(labels);
    }
    Ok(read_labels(path)?.labels)
}

fn cmd_evaluate(args: &EvaluateArgs, manifest: &mut Manifest) -> Result<()> {
    let a = read_any_labels(&args.assignments)?;
    let b = read_any_labels(&args.labels)?;
    manifest.input(&args.assignments)?;
    manifest.input(&args.labels)?;
    let ari = adjusted_rand_index(&a, &b)?;
    println!("{ari:?}");
    Ok(())
}

fn cmd_replicate(args: &ReplicateArgs, manifest: &mut Manifest) -> Result<()> {
    if args.reps == 0 {
        bail!(usage("--reps must be at least 1"));
    }
    let spec = ReplicateSpec {
        scenario: scenario(&args.scenario, &args.normal_param)?,
        reps: args.reps,
        base_seed: args.base_seed,
        censor: args.censor.spec(),
        naive: args.censor.naive,
        config: args.sampler.run_config()?,
        workers: args.workers,
    };
    manifest.seed = Some(args.base_seed);
    manifest.config = Some(spec.config.to_text());
    manifest.setting("scenario", spec.scenario.id.name());
    manifest.setting("normal_param", &args.normal_param);
    manifest.setting("reps", &args.reps.to_string());
    manifest.setting("censor", &args.censor.censor.join(","));
    manifest.setting("prop", &args.censor.prop.to_string());
    manifest.setting("naive", &args.censor.naive.to_string());
    manifest.setting("workers", &args.workers.to_string());

    let report = replicate(&spec)?;
    create_dir(&args.out)?;
    let summary = args.out.join("summary.csv");
    let detail = args.out.join("replicates.csv");
    let table = report.table();
    write(&summary, &table)?;
    write(&detail, &report.detail())?;
    manifest.output(&summary);
    manifest.output(&detail);
    print!("{table}");
    Ok(())
}

fn out_dir(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Simulate(a) => Some(&a.out),
        Command::Fit(a) => Some(&a.out),
        Command::Replicate(a) => Some(&a.out),
        Command::Evaluate(_) => None,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    let mut manifest = Manifest::new(std::env::args().collect());
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &mut manifest)?,
        Command::Fit(a) => cmd_fit(a, &mut manifest)?,
        Command::Evaluate(a) => cmd_evaluate(a, &mut manifest)?,
        Command::Replicate(a) => cmd_replicate(a, &mut manifest)?,
    }
    if let Some(dir) = out_dir(&cli.command) {
        manifest.wall_clock = start.elapsed();
        write(&dir.join("manifest.txt"), &manifest.render())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
