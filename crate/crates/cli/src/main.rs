use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcswitch_cli::artifacts::{ensure_dir, read_json, write_csv};
use lcswitch_cli::config::RunConfig;
use lcswitch_cli::error::{CliError, CliResult};
use lcswitch_cli::manifest::RunManifest;
use lcswitch_cli::pipeline::{self, Stage};
use lcswitch_cli::{report, scan, stages};
use lcswitch_core::meanfield::{initial_grid, ClassifyControls};
use lcswitch_core::model::{Scheme, SystemParams};
use lcswitch_core::stats::Direction;

/// Environment variable capping the number of worker threads.
const WORKERS_ENV: &str = "LCSWITCH_WORKERS";

#[derive(Parser)]
#[command(name = "lcswitch", version, about = "Quantum switching between coexisting optomechanical limit cycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    A,
    B,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output root; overrides `output_root`.
    #[arg(short, long, visible_alias = "out")]
    output: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `alephs`; may be repeated.
    #[arg(long = "aleph")]
    alephs: Vec<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Overrides `ensemble.n_traj`.
    #[arg(long)]
    n_traj: Option<usize>,
    /// Permit alephs in the melted regime.
    #[arg(long)]
    allow_melted: bool,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let path = self.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
        let mut c = RunConfig::load(path)?;
        if let Some(o) = &self.output {
            c.output_root = o.clone();
        }
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if !self.alephs.is_empty() {
            if c.cutoffs.len() != 1 && c.cutoffs.len() != self.alephs.len() {
                return Err(CliError::Config("per-aleph cutoffs do not match the --aleph list".into()));
            }
            c.alephs = self.alephs.clone();
        }
        if let Some(s) = self.scheme {
            c.scheme = match s {
                SchemeArg::A => Scheme::TheoryA,
                SchemeArg::B => Scheme::AdjointB,
            };
        }
        if let Some(n) = self.n_traj {
            c.ensemble.n_traj = n;
        }
        c.allow_melted |= self.allow_melted;
        if c.output_root.as_os_str().is_empty() {
            return Err(CliError::Config("no output root (set output_root or pass --output)".into()));
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    #[value(name = "12")]
    D12,
    #[value(name = "21")]
    D21,
}

#[derive(Args)]
struct EscapeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Restrict to one direction.
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    /// Minimum pre-switch dwell in units of `1/κa`.
    #[arg(long)]
    pre_min: Option<f64>,
    /// Minimum post-switch dwell for phase histograms in units of `1/κa`.
    #[arg(long)]
    post_min: Option<f64>,
    /// Comma-separated snapshot lags in units of `1/κa`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    tau_snapshots: Option<Vec<f64>>,
    #[arg(long)]
    phase_bins: Option<usize>,
}

impl EscapeArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = self.run.resolve()?;
        let o = &mut c.analysis;
        if let Some(d) = self.direction {
            o.directions = vec![match d {
                DirectionArg::D12 => Direction::D12,
                DirectionArg::D21 => Direction::D21,
            }];
        }
        if let Some(x) = self.pre_min {
            o.pre_min = x;
        }
        if let Some(x) = self.post_min {
            o.post_min = x;
        }
        if let Some(t) = &self.tau_snapshots {
            o.tau_snapshots = t.clone();
        }
        if let Some(n) = self.phase_bins {
            o.phase_bins = n;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct FitRatesArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Fit scaling laws to a CSV table with columns
    /// `aleph,k12,sigma12,k21,sigma21` instead of running the pipeline.
    #[arg(long, conflicts_with = "config")]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Optional run configuration supplying the base parameters.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long, visible_alias = "out")]
    output: PathBuf,
    /// Cells per axis.
    #[arg(long, default_value_t = 5)]
    grid_resolution: usize,
    /// Cell spacing in `delta_a` when no range is given.
    #[arg(long, default_value_t = 0.05)]
    d_delta: f64,
    /// Cell spacing in `F` when no range is given.
    #[arg(long, default_value_t = 0.02)]
    d_force: f64,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
    delta_a_range: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    f_range: Option<Vec<f64>>,
    /// Initial conditions per cell, covering `|alpha| <= 5`.
    #[arg(long, default_value_t = 157)]
    n_init: usize,
    /// Integration time per start in units of `1/κa`.
    #[arg(long)]
    t_final: Option<f64>,
    /// Also tabulate the limit cycles at the base point.
    #[arg(long)]
    cycles: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the quantum-jump ensembles.
    Simulate(RunArgs),
    /// Classify mean-field attractors on a `(delta_a, F)` grid.
    MeanfieldScan(ScanArgs),
    /// Segment trajectories into LC1/LC2 (runs upstream stages as needed).
    Segment(RunArgs),
    /// Extract dwells and survival curves.
    Survival(RunArgs),
    /// Fit the switching rates.
    FitRates(FitRatesArgs),
    /// Event-aligned phase histograms, hazards and densities.
    EscapeGeometry(EscapeArgs),
    /// All stages followed by the report.
    Pipeline(RunArgs),
    /// Summarize an output root.
    Report {
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn print_manifest(m: &RunManifest) {
    for s in &m.stages {
        println!("{:<28} {:?} ({} files)", s.name, s.status, s.outputs.len());
    }
    println!("manifest {}", m.manifest_hash);
}

fn run_stage(config: CliResult<RunConfig>, stage: Stage) -> CliResult<()> {
    let config = config?;
    let m = pipeline::run_until(&config, stage)?;
    print_manifest(&m);
    Ok(())
}

fn meanfield_scan(args: &ScanArgs) -> CliResult<()> {
    let base = match &args.config {
        Some(p) => RunConfig::load(p)?.base,
        None => SystemParams::WORKING_POINT,
    };
    let mut grid = scan::ScanGrid::centered(&base, args.grid_resolution, args.d_delta, args.d_force);
    if let Some(r) = &args.delta_a_range {
        grid.delta_a = (r[0], r[1]);
    }
    if let Some(r) = &args.f_range {
        grid.force = (r[0], r[1]);
    }
    if args.n_init == 0 {
        return Err(CliError::Config("--n-init must be positive".into()));
    }
    let starts = initial_grid(args.n_init, 5.0);
    let mut controls = ClassifyControls::default();
    if let Some(t) = args.t_final {
        controls.t_final_kappa = t;
    }
    controls.validate().map_err(|e| CliError::Config(e.to_string()))?;
    ensure_dir(&args.output)?;
    let cells = scan::scan(&base, &grid, &starts, &controls)?;
    scan::write_scan(&args.output, &grid, &cells)?;
    for c in &cells {
        println!("delta_a = {:>8} F = {:>8} {}", c.delta_a, c.f_tilde, c.label.as_str());
    }
    if args.cycles {
        let orbits = scan::limit_cycles(&base, &controls)?;
        scan::write_limit_cycles(&args.output, &orbits)?;
        for (i, o) in orbits.iter().enumerate() {
            println!("LC{}: period {:.4}, mean n_a {:.4}", i + 1, o.period, o.mean_na());
        }
    }
    Ok(())
}

fn fit_table(table: &Path, out: Option<&PathBuf>) -> CliResult<()> {
    let out = out.ok_or_else(|| CliError::Config("--table needs --out".into()))?;
    let points = stages::read_rate_table(table)?;
    ensure_dir(out)?;
    stages::scaling_from_points(out, points)?;
    let entries: Vec<stages::ScalingEntry> = read_json(&out.join(stages::SCALING_FILE))?;
    write_csv(&out.join("effective_action.csv"), &stages::SCALING_CURVE_HEADER, stages::scaling_curve_rows(&entries, 101))?;
    for e in &entries {
        match (&e.fit, &e.skipped) {
            (Some(f), _) => println!("{} {:?}: {:?}", e.direction.as_str(), e.form, f.params),
            (None, Some(why)) => println!("{} {:?}: skipped ({why})", e.direction.as_str(), e.form),
            _ => {}
        }
    }
    Ok(())
}

fn report_cmd(root: &Path) -> CliResult<()> {
    let manifest = RunManifest::load(root)?.ok_or_else(|| CliError::Integrity {
        path: root.join(lcswitch_cli::manifest::MANIFEST_FILE),
        detail: "no manifest".into(),
    })?;
    for f in manifest.verify(root)? {
        log::warn!("{} is missing", f.path.display());
    }
    let summary = report::report(root, &manifest)?;
    for g in &summary.gaps {
        println!("gap: {g}");
    }
    println!("report written to {}", root.join(report::SUMMARY_FILE).display());
    Ok(())
}

fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => run_stage(a.resolve(), Stage::Simulate),
        Command::Segment(a) => run_stage(a.resolve(), Stage::Segment),
        Command::Survival(a) => run_stage(a.resolve(), Stage::Survival),
        Command::FitRates(a) => match &a.table {
            Some(t) => fit_table(t, a.run.output.as_ref()),
            None => run_stage(a.run.resolve(), Stage::FitRates),
        },
        Command::EscapeGeometry(a) => run_stage(a.resolve(), Stage::EscapeGeometry),
        Command::MeanfieldScan(a) => meanfield_scan(a),
        Command::Pipeline(a) => {
            let config = a.resolve()?;
            let m = pipeline::run_pipeline(&config)?;
            print_manifest(&m);
            report::report(&config.output_root, &m)?;
            Ok(())
        }
        Command::Report { output } => report_cmd(output),
    }
}

fn configure_workers() -> CliResult<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v.parse().map_err(|_| CliError::Config(format!("{WORKERS_ENV} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("{WORKERS_ENV}: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match configure_workers().and_then(|_| execute(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
