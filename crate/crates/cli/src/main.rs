use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use angio_core::engine::Simulation;
use angio_core::oracles::{
    bump_normalizer_closed_form, bump_normalizer_refinement_change, normalize_check, ode_trapezoid_oracle,
    spatial_convergence, temporal_convergence, ConvergenceReport, NORMALIZE_LADDER,
};
use angio_core::sources::bump_normalizer;
use angio_core::{load_config, ReactionMode, SimConfig};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

/// Stochastic angiogenesis simulator.
#[derive(Debug, Parser)]
#[command(name = "angiosim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation and write snapshots.
    Run(Overrides),
    /// Run a short simulation and report every invariant check.
    Validate {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the diffusion and trapezoid convergence studies.
    Convergence {
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the grid integral of the source kernel under refinement.
    NormalizeCheck {
        /// Kernel radius in µm.
        #[arg(long, default_value_t = 12.5)]
        radius: f64,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// explicit | implicit-sinks
    #[arg(long)]
    reaction_mode: Option<ReactionMode>,
    #[arg(long)]
    drift_cutoff: Option<bool>,
}

/// Steps used by `validate` unless `--steps` is given.
const VALIDATE_STEPS: u64 = 100;

impl Overrides {
    fn resolve(&self) -> Result<SimConfig, UsageError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                load_config(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
            }
            None => SimConfig::default(),
        };
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.steps {
            config.n_steps = v;
        }
        if let Some(v) = &self.output_dir {
            config.output_dir = v.clone();
        }
        if let Some(v) = self.snapshot_every {
            config.snapshot_every = v;
        }
        if let Some(v) = self.reaction_mode {
            config.reaction_mode = v;
        }
        if let Some(v) = self.drift_cutoff {
            config.drift_cutoff = v;
        }
        config.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug)]
struct UsageError(String);

fn run(overrides: &Overrides) -> anyhow::Result<bool> {
    let config = overrides.resolve()?;
    let out = config.output_dir.clone();
    let mut sim = Simulation::<f64>::new(config)?;
    let summary = sim.run_to_end(true)?;
    println!("output_dir={}", out.display());
    println!("steps={}", summary.n_steps);
    println!("snapshots={}", summary.snapshots.len());
    let ok = summary.invariants.iter().all(|s| s.passed);
    println!("invariants={}", if ok { "pass" } else { "fail" });
    for s in summary.invariants.iter().filter(|s| !s.passed) {
        if let Some((step, detail)) = &s.first {
            log::warn!("invariant {} first violated at step {step}: {detail}", s.name);
        }
    }
    Ok(true)
}

fn validate(overrides: &Overrides) -> anyhow::Result<bool> {
    let mut config = overrides.resolve()?;
    if overrides.steps.is_none() {
        config.n_steps = VALIDATE_STEPS;
    }
    let mut sim = Simulation::<f64>::new(config)?;
    let summary = sim.run_to_end(false)?;
    println!("steps={}", summary.n_steps);
    println!("reaction_mode={}", sim.config().reaction_mode);
    for s in &summary.invariants {
        println!("invariant.{}={}", s.name, if s.passed { "pass" } else { "fail" });
        if let Some((step, detail)) = &s.first {
            eprintln!("{}: first violation at step {step}: {detail}", s.name);
        }
    }
    let ok = summary.invariants.iter().all(|s| s.passed);
    println!("result={}", if ok { "pass" } else { "fail" });
    Ok(ok)
}

fn print_report(key: &str, report: &ConvergenceReport) {
    for (r, e) in report.resolutions.iter().zip(&report.errors) {
        println!("{key}.error[{r}]={e:e}");
    }
    match report.order {
        Some(p) => println!("{key}.order={p:.4}"),
        None => println!("{key}.order=nan"),
    }
    eprint!("{}", report.table());
}

fn convergence(json: Option<&Path>) -> anyhow::Result<bool> {
    let space = spatial_convergence()?;
    let time = temporal_convergence()?;
    let taus = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let trapezoid = ode_trapezoid_oracle(|t| t * t, |t| t * t * t / 3.0, 1.0, 1.0, &taus);
    print_report("space", &space);
    print_report("time", &time);
    print_report("trapezoid", &trapezoid);
    let ok = space.order.is_some_and(|p| p >= 1.9)
        && time.order.is_some_and(|p| p >= 0.9)
        && trapezoid.order.is_some_and(|p| p >= 1.9);
    println!("result={}", if ok { "pass" } else { "fail" });
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&[&space, &time, &trapezoid])?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ok)
}

fn normalize(radius: f64) -> anyhow::Result<bool> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(UsageError(format!("--radius must be positive, got {radius}")).into());
    }
    let quad = bump_normalizer();
    let change = bump_normalizer_refinement_change();
    println!("normalizer={quad:.15}");
    println!("normalizer_closed_form={:.15}", bump_normalizer_closed_form());
    println!("normalizer_refinement_change={change:e}");
    let rows = normalize_check(radius, &NORMALIZE_LADDER);
    for row in &rows {
        println!(
            "h={} integral_node={:.12} error_node={:e} integral_centre={:.12} error_centre={:e}",
            row.h,
            row.integral_node,
            row.error_node(),
            row.integral_centre,
            row.error_centre()
        );
    }
    let monotone = rows.windows(2).all(|w| w[1].error_node() < w[0].error_node());
    let at_one = rows.iter().find(|r| r.h == 1.0).map(|r| r.error_node().max(r.error_centre()));
    let ok = monotone && at_one.is_some_and(|e| e < 0.01) && change < 1e-10;
    println!("monotone={monotone}");
    println!("result={}", if ok { "pass" } else { "fail" });
    Ok(ok)
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(o) => run(o),
        Command::Validate { overrides } => validate(overrides),
        Command::Convergence { json } => convergence(json.as_deref()),
        Command::NormalizeCheck { radius } => normalize(*radius),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
