use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctl_core::bounds::{self, Delta1Choice};
use ctl_core::learnpipe::{self, CeOptions, Radii};
use ctl_core::sysmodel::{substream_seed, CostSpec, LinearSystem, Policy};
use ctl_core::{ctrbl, instances, riccati};
use serde::Serialize;

use ctl_lab::config::{parse_config, ExperimentConfig, ExperimentKind, Grid, DEFAULT_TRIALS};
use ctl_lab::result::{write_csv, write_csv_to, ExperimentResult};
use ctl_lab::{run_experiment, suite, LabError};

const EXIT_USAGE: u8 = 1;
const EXIT_LEMMA_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "ctl-lab", version, about = "Experiments on the sample and regret complexity of learning LQR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Input file: a system JSON for single-system commands, an experiment
    /// config for `sweep` and `verify-lemmas`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    StabPair,
    Integrator,
    StableChain,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    /// Sample-size floor for stabilization.
    Stab,
    /// Regret floor on the integrator composite.
    Regret,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegretPolicy {
    /// Certainty-equivalence online LQR started from the optimal gain.
    Ce,
    /// The optimal gain itself.
    Oracle,
}

#[derive(Subcommand)]
enum Command {
    /// Controllability index, Gramian, coupling coefficient and staircase form.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Emit a hard instance as system JSON.
    MakeInstance {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: InstanceKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Member of the stabilization pair: 1 or 2.
        #[arg(long, default_value_t = 1)]
        member: usize,
    },
    /// Solve the discrete algebraic Riccati equation.
    Riccati {
        #[command(flatten)]
        common: Common,
        /// Cost JSON `{q, r, q_terminal}`; identity weights when absent.
        #[arg(long)]
        cost: Option<PathBuf>,
    },
    /// Evaluate a lower bound.
    LowerBound {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: BoundKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_u2: f64,
    },
    /// One identify-then-stabilize run on a system.
    Stabilize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma_u2: f64,
        /// Rollouts used to calibrate the error radii.
        #[arg(long, default_value_t = DEFAULT_TRIALS as usize)]
        calibration: usize,
    },
    /// Regret of one rollout on a system.
    Regret {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = RegretPolicy::Ce)]
        policy: RegretPolicy,
    },
    /// Run the bound verification suite; exits 2 if any row fails.
    VerifyLemmas {
        #[command(flatten)]
        common: Common,
        /// Report the coupling coefficient scaled by this factor (falsification check).
        #[arg(long, default_value_t = 1.0)]
        mu_scale: f64,
    },
    /// Run the experiment named in a config and write its CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lab(LabError),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Lab(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lab(e.into())
    }
}

fn core<E: ToString>(e: E) -> CliError {
    CliError::Lab(LabError::Core(e.to_string()))
}

fn required<'a, T>(value: &'a Option<T>, flag: &str, cmd: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| CliError::Usage(format!("`{cmd}` needs --{flag}")))
}

fn read_system(common: &Common, cmd: &str) -> Result<LinearSystem, CliError> {
    let path = required(&common.config, "config", cmd)?;
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Lab(LabError::Parse(format!("{}: {e}", path.display()))))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(LabError::from)?;
    match out {
        Some(p) => fs::write(p, text + "\n")?,
        None => quiet_pipe(writeln!(std::io::stdout().lock(), "{text}"))?,
    }
    Ok(())
}

/// A closed downstream pipe (`| head`) is not an error.
fn quiet_pipe(res: std::io::Result<()>) -> std::io::Result<()> {
    match res {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn emit_csv(result: &ExperimentResult, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => write_csv(result, p)?,
        None => {
            let mut buf = Vec::new();
            write_csv_to(result, &mut buf)?;
            quiet_pipe(std::io::stdout().lock().write_all(&buf))?;
        }
    }
    Ok(())
}

fn load_experiment(common: &Common, fallback: Option<ExperimentKind>) -> Result<ExperimentConfig, CliError> {
    let cfg = match (&common.config, fallback) {
        (Some(path), _) => parse_config(&fs::read_to_string(path)?)?,
        (None, Some(kind)) => ExperimentConfig {
            kind,
            grid: Grid::default_for(kind),
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            out_path: None,
        },
        (None, None) => return Err(CliError::Usage("`sweep` needs --config".into())),
    };
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn out_path(common: &Common, cfg: &ExperimentConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| cfg.out_path.as_ref().map(PathBuf::from))
}

fn run(cmd: Command) -> Result<ExitCode, CliError> {
    match cmd {
        Command::Analyze { common } => {
            let sys = read_system(&common, "analyze")?;
            let report = ctrbl::analyze(&sys).map_err(core)?;
            emit_json(&report, common.out.as_deref())?;
        }
        Command::MakeInstance {
            common,
            kind,
            n,
            mu,
            alpha,
            rho,
            member,
        } => {
            let sys = match kind {
                InstanceKind::StabPair => {
                    if !(1..=2).contains(&member) {
                        return Err(CliError::Usage(format!("--member must be 1 or 2, got {member}")));
                    }
                    instances::make_stab_pair(n, mu, alpha).map_err(core)?.member(member - 1).clone()
                }
                InstanceKind::Integrator => instances::make_integrator_composite(n).map_err(core)?.sys,
                InstanceKind::StableChain => instances::make_stable_chain(n, rho).map_err(core)?.sys,
            };
            emit_json(&sys, common.out.as_deref())?;
        }
        Command::Riccati { common, cost } => {
            let sys = read_system(&common, "riccati")?;
            let cost = match cost {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?).map_err(LabError::from)?,
                None => CostSpec::identity(sys.n(), sys.p()),
            };
            let sol = riccati::solve_dare(&sys, &cost).map_err(core)?;
            #[derive(Serialize)]
            struct Out<'a> {
                #[serde(flatten)]
                solution: &'a riccati::RiccatiSolution,
                average_cost: f64,
            }
            let average_cost = riccati::average_cost_from(&sol, &sys);
            emit_json(&Out { solution: &sol, average_cost }, common.out.as_deref())?;
        }
        Command::LowerBound {
            common,
            kind,
            n,
            mu,
            delta,
            sigma_u2,
        } => {
            let report = match kind {
                BoundKind::Stab => bounds::stab_sample_report(mu, n, delta, sigma_u2),
                BoundKind::Regret => bounds::two_subsystem_report(n, &Delta1Choice::TopEigenvector),
            }
            .map_err(core)?;
            emit_json(&report, common.out.as_deref())?;
        }
        Command::Stabilize {
            common,
            samples,
            sigma_u2,
            calibration,
        } => {
            let seed = *required(&common.seed, "seed", "stabilize")?;
            let sys = read_system(&common, "stabilize")?;
            let (eps_a, eps_b) = learnpipe::calibrate_radii(&sys, sigma_u2, samples, calibration, 0.99, substream_seed(seed, u64::MAX))
                .map(|r| (r.eps_a, r.eps_b))
                .map_err(core)?;
            let outcome = learnpipe::run_stab_pipeline(&sys, sigma_u2, samples, seed, Radii { eps_a, eps_b });
            emit_json(&outcome, common.out.as_deref())?;
        }
        Command::Regret { common, horizon, policy } => {
            let seed = *required(&common.seed, "seed", "regret")?;
            let sys = read_system(&common, "regret")?;
            let cost = CostSpec::identity(sys.n(), sys.p());
            let k_star = riccati::solve_dare(&sys, &cost).map_err(core)?.k_star;
            let record = match policy {
                RegretPolicy::Ce => learnpipe::ce_online_lqr(&sys, &cost, horizon, &k_star, seed, CeOptions::default()),
                RegretPolicy::Oracle => learnpipe::policy_regret(&sys, &cost, &Policy::feedback(k_star), horizon, seed),
            }
            .map_err(core)?;
            emit_json(&record, common.out.as_deref())?;
        }
        Command::VerifyLemmas { common, mu_scale } => {
            if !(mu_scale > 0.0 && mu_scale.is_finite()) {
                return Err(CliError::Usage(format!("--mu-scale must be positive, got {mu_scale}")));
            }
            let cfg = load_experiment(&common, Some(ExperimentKind::LemmaSuite))?;
            if cfg.kind != ExperimentKind::LemmaSuite {
                return Err(CliError::Usage(format!("`verify-lemmas` needs a LemmaSuite config, got {:?}", cfg.kind)));
            }
            let result = suite::run_lemma_suite_with(&cfg, &suite::SuiteOptions { mu_scale })?;
            emit_csv(&result, out_path(&common, &cfg).as_deref())?;
            let failed: Vec<_> = suite::failures(&result).collect();
            eprintln!("{} checks, {} failed", result.rows.len(), failed.len());
            for r in &failed {
                eprintln!("  FAIL {} {:?}", r.label, r.params);
            }
            if !failed.is_empty() {
                return Ok(ExitCode::from(EXIT_LEMMA_FAILURE));
            }
        }
        Command::Sweep { common } => {
            let cfg = load_experiment(&common, None)?;
            let result = run_experiment(&cfg)?;
            emit_csv(&result, out_path(&common, &cfg).as_deref())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Lab(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
