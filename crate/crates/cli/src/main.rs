use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pdflow::harness::config::{default_out_dir, ExperimentConfig};
use pdflow::harness::figures::{self, Recipe};
use pdflow::harness::run::run;
use pdflow::harness::verify::{verify, Suite, VerifyOptions};
use pdflow::saddle::{describe_builtin, BUILTIN_PROBLEMS};
use pdflow::Error;

#[derive(Parser)]
#[command(name = "pd-flow", version, about = "Primal-dual flows: runs, figure data and verification suites")]
struct Cli {
    /// Output directory (default: $PD_FLOW_OUT, else ./pd-flow-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method or ODE model and write its trajectory CSV.
    Run(RunArgs),
    /// Write the CSV bundle of a figure recipe (fig1, fig2, fig3).
    Figure { recipe: String },
    /// Run a verification suite (lemmas, certificate, lyapunov, rescaling, errors, all).
    Verify {
        suite: String,
        /// Corrupt one iterate of each certificate run; the suite must fail.
        #[arg(long)]
        inject_fault: bool,
        /// Also write Lyapunov report CSVs here.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// List the built-in problems.
    ListProblems,
}

#[derive(Args)]
struct RunArgs {
    /// key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// icpdps or nag.
    #[arg(long)]
    algo: Option<String>,
    /// nag-intrinsic, nag-rescaled, icpdps-intrinsic or icpdps-rescaled.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
    /// Iterations (discrete methods).
    #[arg(short = 'N')]
    iterations: Option<String>,
    /// Time horizon (ODE models).
    #[arg(long = "T")]
    time: Option<String>,
    /// ODE step.
    #[arg(long = "h")]
    step: Option<String>,
    /// Comma-separated initial primal point.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<String>,
    #[arg(long)]
    phi0: Option<String>,
    #[arg(long)]
    psi0: Option<String>,
    #[arg(long)]
    theta0: Option<String>,
    #[arg(long)]
    relax_phi: Option<String>,
    #[arg(long)]
    relax_psi: Option<String>,
    #[arg(long)]
    relax_theta: Option<String>,
    /// Output CSV path (default: <out>/<problem>_<method>.csv).
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl RunArgs {
    fn build_config(&self) -> pdflow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("problem", &self.problem),
            ("algo", &self.algo),
            ("model", &self.model),
            ("alpha", &self.alpha),
            ("tau", &self.tau),
            ("gamma", &self.gamma),
            ("rho", &self.rho),
            ("N", &self.iterations),
            ("T", &self.time),
            ("h", &self.step),
            ("x0", &self.x0),
            ("y0", &self.y0),
            ("phi0", &self.phi0),
            ("psi0", &self.psi0),
            ("theta0", &self.theta0),
            ("relax_phi", &self.relax_phi),
            ("relax_psi", &self.relax_psi),
            ("relax_theta", &self.relax_theta),
            ("output", &self.output),
            ("seed", &self.seed),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone().unwrap_or_else(default_out_dir);
    match cli.command {
        Command::Run(args) => {
            let result = args.build_config().and_then(|cfg| run(&cfg, &out));
            match result {
                Ok(summary) => {
                    println!("{}", summary.line());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Figure { recipe } => {
            let result = recipe.parse::<Recipe>().and_then(|r| figures::figure(r, &out));
            match result {
                Ok((bundle, files)) => {
                    for f in &files {
                        println!("wrote {}", f.display());
                    }
                    for (k, v) in &bundle.metrics {
                        println!("{} {k} = {v:.6e}", bundle.recipe);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify {
            suite,
            inject_fault,
            report_dir,
        } => {
            let options = VerifyOptions {
                inject_fault,
                report_dir,
            };
            match suite.parse::<Suite>().and_then(|s| verify(s, &options)) {
                Ok(report) => {
                    for c in &report.checks {
                        println!("{}", c.line());
                    }
                    let failed = report.hard_failures().count();
                    let warned = report.warnings().count();
                    println!(
                        "{} checks: {} passed, {warned} warnings, {failed} failed",
                        report.checks.len(),
                        report.checks.len() - failed - warned
                    );
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::ListProblems => {
            for name in BUILTIN_PROBLEMS {
                println!("{name}\t{}", describe_builtin(name).unwrap_or(""));
            }
            ExitCode::SUCCESS
        }
    }
}
