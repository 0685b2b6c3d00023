use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seaspring_cli::commands::{self, default_output_dir, Outcome};
use seaspring_cli::config::RunConfig;
use seaspring_cli::CliError;

/// Nonlinear series-elastic spring design from periodic load trajectories.
#[derive(Parser)]
#[command(name = "seaspring", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one period of the free cubic-spring oscillation.
    GenerateCubic(Common),
    /// Solve one design at a fixed trade-off weight.
    Design(Common),
    /// Sweep the trade-off weight and write the curve.
    Sweep(Common),
    /// Rigid and best-linear-spring baselines.
    Baseline(Common),
    /// Run the oracle suite.
    Validate(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set design.theta=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// cubic, walking, running or file.
    #[arg(long)]
    task: Option<String>,
    /// Grid size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// total, joule-only or viscous-only.
    #[arg(long)]
    cost: Option<String>,
    /// Torque limit: true, false or a value in N·m.
    #[arg(long)]
    tau_max: Option<String>,
    /// Speed limit: true, false or a value in rad/s.
    #[arg(long)]
    dq_max: Option<String>,
    /// Elongation limit: false or a value in rad.
    #[arg(long)]
    delta_max: Option<String>,
    /// Cubic system release angle (rad).
    #[arg(long)]
    q0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Sweep points.
    #[arg(long)]
    points: Option<usize>,
    /// Planted instances for `validate`.
    #[arg(long)]
    planted: Option<usize>,
    /// Relative objective-gap tolerance for planted instances.
    #[arg(long)]
    planted_tol: Option<f64>,
}

impl Common {
    fn overrides(&self, command: &str) -> Vec<String> {
        let mut o = self.set.clone();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{k}={v}"));
            }
        };
        push("task.name", self.task.as_ref().map(|s| format!("{s:?}")));
        push("n", self.n.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("design.theta", self.theta.map(float));
        push("design.gamma1", self.gamma1.map(float));
        push("design.gamma2", self.gamma2.map(float));
        push("design.cost", self.cost.as_ref().map(|s| format!("{s:?}")));
        push("limits.tau_max", self.tau_max.clone());
        push("limits.dq_max", self.dq_max.clone());
        push("limits.delta_max", self.delta_max.clone());
        push("cubic.q0", self.q0.map(float));
        push("cubic.alpha", self.alpha.map(float));
        push("validate.planted", self.planted.map(|v| v.to_string()));
        push("validate.planted_tol", self.planted_tol.map(float));
        if command == "sweep" {
            push("sweep.points", self.points.map(|v| v.to_string()));
        } else if command == "baseline" {
            push("baseline.points", self.points.map(|v| v.to_string()));
        }
        o
    }

    fn resolve(&self, command: &str) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.overrides(command))?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = Some(dir.clone());
        } else if cfg.output_dir.is_none() {
            cfg.output_dir = Some(default_output_dir(command, &cfg));
        }
        Ok(cfg)
    }
}

// TOML float literal; integers like `1` would otherwise parse as integers
fn float(v: f64) -> String {
    format!("{v:?}")
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::GenerateCubic(c) => commands::generate_cubic(&c.resolve("generate-cubic")?),
        Command::Design(c) => commands::design(&c.resolve("design")?),
        Command::Sweep(c) => commands::sweep(&c.resolve("sweep")?),
        Command::Baseline(c) => commands::baseline(&c.resolve("baseline")?),
        Command::Validate(c) => commands::validate(&c.resolve("validate")?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", outcome.summary);
            for f in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
