//! `netcomp`: run, sweep, bound and compare in-network computation scenarios.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use netcomp::capacity::{solve_lambda_star, BoundMode, CapacityProblem, LinkModel};
use netcomp::scenario::{parse_json, parse_scenario, ScenarioFile};
use netcomp::sim::{run, run_coupled, SharedStreams, SimOptions, DEFAULT_STRIDE};
use netcomp::sweep::{run_sweep, SweepSpec};
use netcomp::{LpError, Scenario, SimError};

mod plotdata;
mod schema;

#[derive(Debug, Parser)]
#[command(name = "netcomp", version, about = "Slotted simulator and capacity bound for in-network computation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    /// Print the column layout of every CSV this tool writes, then exit.
    #[arg(long, global = true)]
    schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct Global {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the scenario horizon (slots).
    #[arg(long, global = true)]
    horizon: Option<u64>,
    /// Record every N slots.
    #[arg(long, global = true)]
    stride: Option<u64>,
    /// Per-slot constraint checks.
    #[arg(long = "assert", value_enum, global = true, default_value_t = Toggle::On)]
    assert_mode: Toggle,
    /// Parallel runs for `sweep` (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario; write the trace CSV and print a JSON summary.
    Run {
        scenario: PathBuf,
        /// Trace CSV (default: stdout, summary then goes to stderr).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the summary JSON here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Sweep query rates; write one row per (rate, seed) and a per-rate file.
    Sweep {
        sweep: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Per-rate averages (default: `<out stem>.points.csv`).
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Maximum sustainable query rate from the flow LP.
    Bound {
        scenario: PathBuf,
        /// `multi` or `single:<node>`.
        #[arg(long, default_value = "multi")]
        mode: String,
        /// Give each direction of a link its own capacity.
        #[arg(long)]
        directed: bool,
        /// Print the optimal flows as JSON after the value.
        #[arg(long)]
        certificate: bool,
    },
    /// Run two policies in lockstep and compare computation queues.
    Couple {
        scenario_a: PathBuf,
        scenario_b: PathBuf,
        /// Streams drawn once and fed to both runs: `arrivals`, `B`.
        #[arg(long, default_value = "arrivals")]
        shared: String,
        /// Number of seeds, counting up from the scenario seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Compare time-averaged X per seed instead of per-slot ordering.
        #[arg(long)]
        distributional: bool,
    },
    /// Parse and check a scenario file.
    Validate { scenario: PathBuf },
    /// Reshape sweep CSVs into `x,y,series` rows.
    Plotdata {
        /// Sweep CSVs, optionally `path=label`.
        #[arg(required = true)]
        inputs: Vec<String>,
        /// Column to plot against lambda.
        #[arg(long, default_value = "mean_backlog")]
        y: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

/// Process exit codes.
mod exit {
    pub const PARSE: u8 = 1;
    pub const CONSTRAINT: u8 = 2;
    pub const OVERFLOW: u8 = 3;
    pub const DEGENERATE: u8 = 4;
    pub const MISMATCH: u8 = 5;
    pub const NOT_DOMINATED: u8 = 6;
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::new(exit::PARSE, error)
    }
}

fn sim_failure(err: SimError) -> Failure {
    match err {
        SimError::ScenarioMismatch(_) => Failure::new(exit::MISMATCH, err),
        SimError::Constraint { .. } | SimError::Invariant { .. } => Failure::new(exit::CONSTRAINT, err),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.schema {
        print!("{}", schema::SCHEMA);
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (try --help)");
        return ExitCode::from(exit::PARSE);
    };
    match dispatch(&cli.global, command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(g: &Global, command: Command) -> Outcome {
    match command {
        Command::Run { scenario, out, summary } => cmd_run(g, &scenario, out.as_deref(), summary.as_deref()),
        Command::Sweep { sweep, out, points } => cmd_sweep(g, &sweep, &out, points),
        Command::Bound {
            scenario,
            mode,
            directed,
            certificate,
        } => cmd_bound(&scenario, &mode, directed, certificate),
        Command::Couple {
            scenario_a,
            scenario_b,
            shared,
            seeds,
            distributional,
        } => cmd_couple(g, &scenario_a, &scenario_b, &shared, seeds, distributional),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Plotdata { inputs, y, out } => {
            let rows = plotdata::reshape(&inputs, &y)?;
            with_output(out.as_deref(), |w| plotdata::write(&rows, w))?;
            Ok(0)
        }
    }
}

fn options(g: &Global, default_stride: u64) -> SimOptions {
    SimOptions::default()
        .with_stride(g.stride.unwrap_or(default_stride))
        .with_asserts(g.assert_mode == Toggle::On)
}

fn load_scenario(path: &Path, g: &Global) -> anyhow::Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut s = parse_scenario(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(seed) = g.seed {
        s = s.with_seed(seed);
    }
    if let Some(h) = g.horizon {
        s = s.with_horizon(h);
    }
    Ok(s)
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

fn cmd_run(g: &Global, path: &Path, out: Option<&Path>, summary_path: Option<&Path>) -> Outcome {
    let scenario = load_scenario(path, g)?;
    let result = run(&scenario, options(g, DEFAULT_STRIDE)).map_err(sim_failure)?;
    with_output(out, |w| Ok(result.write_csv(w)?))?;
    let summary = serde_json::to_string_pretty(&result.summary).map_err(anyhow::Error::from)?;
    if out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    if let Some(p) = summary_path {
        std::fs::write(p, summary + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(if result.summary.halted { exit::OVERFLOW } else { 0 })
}

fn cmd_sweep(g: &Global, path: &Path, out: &Path, points: Option<PathBuf>) -> Outcome {
    let mut spec = SweepSpec::load(path).with_context(|| format!("in {}", path.display()))?;
    if let Some(h) = g.horizon {
        spec.horizon = h;
    }
    if let Some(seed) = g.seed {
        spec.base = spec.base.with_seed(seed);
    }
    let opts = options(g, DEFAULT_STRIDE);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.workers.unwrap_or(0))
        .build()
        .map_err(anyhow::Error::from)?;
    let (rows, agg) = pool.install(|| run_sweep(&spec, opts));
    let policy = spec.base.policy.name.to_string();

    let points = points.unwrap_or_else(|| {
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
        out.with_file_name(format!("{stem}.points.csv"))
    });
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(schema::SWEEP_ROW_COLUMNS).map_err(anyhow::Error::from)?;
    for r in &rows {
        w.write_record([
            r.lambda.to_string(),
            r.seed.to_string(),
            policy.clone(),
            r.mean_backlog.to_string(),
            r.delivered_rate.to_string(),
            r.slope.to_string(),
            r.stable.to_string(),
            r.halted.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;

    let mut w = csv::Writer::from_path(&points).with_context(|| format!("creating {}", points.display()))?;
    w.write_record(schema::SWEEP_POINT_COLUMNS).map_err(anyhow::Error::from)?;
    for p in &agg {
        w.write_record([
            p.lambda.to_string(),
            policy.clone(),
            p.runs.to_string(),
            p.failed.to_string(),
            p.mean_backlog.to_string(),
            p.delivered_rate.to_string(),
            p.slope.to_string(),
            p.stable_fraction.to_string(),
        ])
        .map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;

    for p in &agg {
        println!(
            "lambda {:>8.4}  mean_backlog {:>14.3}  delivered {:>8.4}  stable {}/{}",
            p.lambda,
            p.mean_backlog,
            p.delivered_rate,
            (p.stable_fraction * (p.runs - p.failed) as f64).round(),
            p.runs - p.failed,
        );
    }
    let failed: u32 = agg.iter().map(|p| p.failed).sum();
    if failed > 0 {
        eprintln!("{failed} run(s) failed; see the error column of {}", out.display());
    }
    Ok(0)
}

fn parse_mode(mode: &str) -> anyhow::Result<BoundMode> {
    match mode {
        "multi" => Ok(BoundMode::Multi),
        other => {
            let node = other
                .strip_prefix("single:")
                .ok_or_else(|| anyhow!("mode must be `multi` or `single:<node>`, got `{other}`"))?;
            Ok(BoundMode::Single(node.parse().context("node id in single:<node>")?))
        }
    }
}

fn cmd_bound(path: &Path, mode: &str, directed: bool, certificate: bool) -> Outcome {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ScenarioFile = parse_json(&text).with_context(|| format!("in {}", path.display()))?;
    let topology = netcomp::scenario::topology_from_file(&file).with_context(|| format!("in {}", path.display()))?;
    let problem = CapacityProblem {
        topology,
        mode: parse_mode(mode)?,
        links: if directed { LinkModel::Directed } else { LinkModel::Shared },
    };
    let bound = solve_lambda_star(&problem, certificate).map_err(|e| match e {
        LpError::Degenerate { .. } => Failure::new(exit::DEGENERATE, e),
        other => Failure::new(exit::PARSE, other),
    })?;
    println!("{:.6}", bound.lambda_star);
    if certificate {
        println!("{}", serde_json::to_string_pretty(&bound).map_err(anyhow::Error::from)?);
    }
    Ok(0)
}

fn cmd_couple(g: &Global, a: &Path, b: &Path, shared: &str, seeds: u64, distributional: bool) -> Outcome {
    let sa = load_scenario(a, g)?;
    let sb = load_scenario(b, g)?;
    let shared = SharedStreams::parse(shared).map_err(|e| anyhow!(e))?;
    let opts = options(g, 1).with_stride(g.stride.unwrap_or(sa.horizon.max(1)));
    let mut total = 0u64;
    for k in 0..seeds.max(1) {
        let seed = sa.seed.wrapping_add(k);
        let (ra, rb, rep) =
            run_coupled(&sa.with_seed(seed), &sb.with_seed(seed), shared, opts).map_err(sim_failure)?;
        if distributional {
            let ordered = rep.mean_x[0] <= rep.mean_x[1];
            println!(
                "seed {seed}: mean X {} = {:.4}, {} = {:.4}, ordered {}",
                ra.summary.policy, rep.mean_x[0], rb.summary.policy, rep.mean_x[1], ordered
            );
        } else {
            total += rep.violations;
            let first = rep.first_violation.map_or("none".to_string(), |s| s.to_string());
            println!(
                "seed {seed}: slots {} violations {} first_violation {} digests {} {}",
                rep.slots, rep.violations, first, rep.digests[0], rep.digests[1]
            );
        }
    }
    Ok(if total == 0 { 0 } else { exit::NOT_DOMINATED })
}

fn cmd_validate(path: &Path) -> Outcome {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let s = parse_scenario(&text).with_context(|| format!("in {}", path.display()))?;
    println!(
        "ok: {} nodes, {} edges, {} computation node(s), policy {}, rate {}, horizon {}",
        s.topology.num_nodes(),
        s.topology.edges().len(),
        s.topology.num_sites(),
        s.policy.name,
        s.arrival.rate(),
        s.horizon
    );
    Ok(0)
}
