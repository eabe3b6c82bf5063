//! Command-line front end: `.crn` input, JSON reports, CSV trajectories.

pub mod crn;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::completion::{
    complete_admissible, complete_closed, AdmissibleOutcome, CompletionError, ConstraintSet,
};
use crate::dynamics::{
    energy_decomposition, integrate, integrate_with_fluxes, DynamicsError, SimulationConfig,
    Trajectory,
};
use crate::kinetics::{
    detailed_balance, energy_vector, KineticSystem, KineticsError, DEFAULT_DB_TOL,
};
use crate::network::structure;
use crate::reduction::{
    db_stability_report, perturbation_witness, reduce_network, reduced_circuit_check,
    reduced_rates, DbStability, FrozenConcentrations, ReductionError,
};

use crn::{
    parse_network, parse_reaction_ref, parse_species_values, reaction_label, NetworkFile,
    ParseError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "crnbalance",
    version,
    about = "Detailed balance, reductions and closed completions of mass-action reaction networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Tolerance on log-scale circuit sums.
    #[arg(long, global = true, env = "CRNBALANCE_DB_TOL", value_name = "TOL")]
    pub db_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cycles, conservation laws, sources and sinks.
    Analyze { file: PathBuf },
    /// Circuit condition and energy vector.
    CheckDb { file: PathBuf },
    /// Freeze species and classify the reduced system.
    Reduce {
        file: PathBuf,
        /// Frozen concentrations, e.g. `A=1.0,B=2`. Defaults to the file's `frozen:` line.
        #[arg(long, value_name = "SPEC")]
        freeze: Option<String>,
        /// Also search for a rate perturbation of at most this size.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Embed the network into a closed system.
    Complete {
        file: PathBuf,
        /// Reaction to keep free of added species, e.g. `"B <-> C"`. Repeatable.
        #[arg(long, value_name = "REACTION")]
        constrain: Vec<String>,
        /// Only break cycles that violate the circuit condition.
        #[arg(long)]
        minimal: bool,
        /// Also write the completed network as a `.crn` file.
        #[arg(long, value_name = "PATH")]
        emit: Option<PathBuf>,
    },
    /// Integrate the closed mass-action system.
    Simulate {
        file: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Integrate with frozen species held by external fluxes.
    SimulateFlux {
        file: PathBuf,
        /// Frozen concentrations, e.g. `A=1.0`. Defaults to the file's `frozen:` line.
        #[arg(long, value_name = "SPEC")]
        freeze: Option<String>,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    /// Initial concentrations, e.g. `A=1,B=0.5`; unlisted species start at 0.
    #[arg(long, value_name = "SPEC")]
    pub init: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub abs_tol: f64,
    #[arg(long)]
    pub max_step: Option<f64>,
    /// Sample spacing; defaults to t_end/100.
    #[arg(long)]
    pub record_every: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub steady_tol: f64,
    /// Write the trajectory as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

impl SimArgs {
    fn config(&self) -> SimulationConfig {
        SimulationConfig {
            t_end: self.t_end,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            steady_tol: self.steady_tol,
            record_every: self.record_every.unwrap_or(self.t_end / 100.0),
            ..SimulationConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{}:{}: {}", .source.line, .source.column, .source.message)]
    Parse { path: String, source: ParseError },
    #[error("{flag}: {message}")]
    Flag { flag: &'static str, message: String },
    #[error("{command}: {message}")]
    Domain {
        command: &'static str,
        message: String,
    },
}

fn domain(command: &'static str) -> impl Fn(&dyn std::fmt::Display) -> CliError {
    move |e| CliError::Domain {
        command,
        message: e.to_string(),
    }
}

struct Outcome {
    report: Value,
    exit: i32,
}

fn read_file(path: &Path) -> Result<NetworkFile, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_network(&text).map_err(|source| CliError::Parse {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn require_bidirectional(
    file: &NetworkFile,
    command: &'static str,
) -> Result<KineticSystem, CliError> {
    let net = &file.network;
    if let Some(k) = (0..net.num_reactions()).find(|&k| net.reverse_of(k).is_none()) {
        return Err(CliError::Domain {
            command,
            message: format!(
                "requires a bidirectional network; reaction {} ({}) has no reverse",
                k + 1,
                reaction_label(net.species(), net.reactions()[k].coeffs())
            ),
        });
    }
    KineticSystem::new(net.clone(), file.rates.clone()).map_err(|e| domain(command)(&e))
}

fn flag_values(
    file: &NetworkFile,
    flag: &'static str,
    text: Option<&str>,
) -> Result<Option<Vec<(usize, f64)>>, CliError> {
    text.map(|t| {
        parse_species_values(&file.network, t).map_err(|e| CliError::Flag {
            flag,
            message: format!("column {}: {}", e.column, e.message),
        })
    })
    .transpose()
}

fn frozen_set(
    file: &NetworkFile,
    spec: Option<&str>,
    command: &'static str,
) -> Result<Vec<(usize, f64)>, CliError> {
    let frozen = flag_values(file, "--freeze", spec)?.unwrap_or_else(|| file.frozen.clone());
    if frozen.is_empty() {
        return Err(CliError::Domain {
            command,
            message: "no frozen species; pass --freeze or add a `frozen:` line".into(),
        });
    }
    Ok(frozen)
}

fn db_tolerance(cli: &Cli) -> Result<f64, CliError> {
    let tol = cli.db_tol.unwrap_or(DEFAULT_DB_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Flag {
            flag: "--db-tol",
            message: format!("must be positive, got {tol}"),
        });
    }
    Ok(tol)
}

fn analyze(file: &NetworkFile) -> Outcome {
    let s = structure(&file.network);
    Outcome {
        report: report::structure(&file.network, &file.rates, &s),
        exit: EXIT_OK,
    }
}

fn check_db(file: &NetworkFile, db_tol: f64) -> Result<Outcome, CliError> {
    let sys = require_bidirectional(file, "check-db")?;
    let err = domain("check-db");
    let verdict = detailed_balance(&sys, db_tol).map_err(|e| err(&e))?;
    let energy = energy_vector(&sys).map_err(|e| err(&e))?;
    Ok(Outcome {
        report: report::check_db(&sys, &verdict, &energy),
        exit: if verdict.balanced {
            EXIT_OK
        } else {
            EXIT_VERDICT
        },
    })
}

fn reduce(
    file: &NetworkFile,
    freeze: Option<&str>,
    delta: Option<f64>,
    db_tol: f64,
) -> Result<Outcome, CliError> {
    let sys = require_bidirectional(file, "reduce")?;
    let frozen = frozen_set(file, freeze, "reduce")?;
    let err = domain("reduce");
    let n_u = FrozenConcentrations::from_pairs(&frozen).map_err(|e| err(&e))?;
    let u: Vec<usize> = n_u.species();
    let rmap = reduce_network(sys.network(), &u).map_err(|e| err(&e))?;
    let rates = reduced_rates(&sys, &rmap, &n_u).map_err(|e| err(&e))?;
    let reduced_verdict = reduced_circuit_check(&rmap, &rates, db_tol).map_err(|e| err(&e))?;
    let stability = match db_stability_report(&sys, &rmap, &n_u, db_tol) {
        Ok(r) => Some(r),
        Err(
            ReductionError::NotDetailedBalanced
            | ReductionError::Kinetics(KineticsError::NotDetailedBalanced),
        ) => None,
        Err(e) => return Err(err(&e)),
    };
    let witness = match delta {
        Some(d) if stability.is_some() => {
            Some(perturbation_witness(&sys, &rmap, &n_u, d, db_tol).map_err(|e| err(&e))?)
        }
        Some(d) if !(d > 0.0 && d.is_finite()) => {
            return Err(CliError::Flag {
                flag: "--delta",
                message: format!("must be positive, got {d}"),
            })
        }
        Some(_) => Some(None),
        None => None,
    };
    let exit = match stability.as_ref().map(|s| s.verdict) {
        Some(DbStability::NotDb) => EXIT_VERDICT,
        None if !reduced_verdict.balanced => EXIT_VERDICT,
        _ => EXIT_OK,
    };
    Ok(Outcome {
        report: report::reduction(
            &sys,
            &rmap,
            &frozen,
            &rates,
            &reduced_verdict,
            stability.as_ref(),
            witness.as_ref().map(Option::as_ref),
        ),
        exit,
    })
}

fn complete(
    file: &NetworkFile,
    constrain: &[String],
    minimal: bool,
    emit: Option<&Path>,
    db_tol: f64,
) -> Result<Outcome, CliError> {
    let sys = require_bidirectional(file, "complete")?;
    let err = domain("complete");
    let mut constrained = file.constrained.clone();
    for c in constrain {
        let k = parse_reaction_ref(&file.network, c).map_err(|e| CliError::Flag {
            flag: "--constrain",
            message: format!("'{c}': {}", e.message),
        })?;
        constrained.push(k);
    }
    let outcome = if constrained.is_empty() {
        match complete_closed(&sys, minimal, db_tol) {
            Ok(r) => AdmissibleOutcome::Completed(r),
            Err(e @ CompletionError::Falsified(_)) => AdmissibleOutcome::NotDecided {
                attempt: None,
                reason: e.to_string(),
            },
            Err(e) => return Err(err(&e)),
        }
    } else {
        let cs = ConstraintSet::new(&file.network, &constrained).map_err(|e| err(&e))?;
        complete_admissible(&sys, &cs, db_tol).map_err(|e| err(&e))?
    };
    if let (Some(path), AdmissibleOutcome::Completed(r)) = (emit, &outcome) {
        let out = NetworkFile {
            network: r.completed.network().clone(),
            rates: r.completed.rates().clone(),
            frozen: r.frozen_defaults.clone(),
            constrained: Vec::new(),
        };
        write_file(path, crn::Canonical(&out).to_string().as_bytes())?;
    }
    let exit = match &outcome {
        AdmissibleOutcome::Completed(_) => EXIT_OK,
        _ => EXIT_VERDICT,
    };
    let mut report = report::completion(&outcome, &file.network);
    report["minimal"] = json!(minimal);
    Ok(Outcome { report, exit })
}

fn finish_run(
    result: Result<Trajectory, DynamicsError>,
    csv: Option<&Path>,
    command: &'static str,
) -> Result<(Trajectory, i32), CliError> {
    let (traj, exit, failure) = match result {
        Ok(t) => (t, EXIT_OK, None),
        Err(DynamicsError::StiffFailure { t, partial }) => (
            *partial,
            EXIT_ERROR,
            Some(format!("step size underflow at t = {t}")),
        ),
        Err(DynamicsError::TooManySteps { t, partial }) => (
            *partial,
            EXIT_ERROR,
            Some(format!("step limit reached at t = {t}")),
        ),
        Err(e) => return Err(domain(command)(&e)),
    };
    if let Some(path) = csv {
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).map_err(|e| domain(command)(&e))?;
        write_file(path, &buf)?;
    }
    if let Some(message) = failure {
        eprintln!("{command}: {message}; partial trajectory kept");
    }
    Ok((traj, exit))
}

fn simulate(file: &NetworkFile, sim: &SimArgs) -> Result<Outcome, CliError> {
    let sys = require_bidirectional(file, "simulate")?;
    let mut n0 = vec![0.0; sys.num_species()];
    for (i, v) in flag_values(file, "--init", sim.init.as_deref())?.unwrap_or_default() {
        n0[i] = v;
    }
    let (traj, exit) = finish_run(
        integrate(&sys, &n0, &sim.config()),
        sim.csv.as_deref(),
        "simulate",
    )?;
    let mut report = report::trajectory(&traj);
    report["initial_state"] = report::nums(&n0);
    Ok(Outcome { report, exit })
}

fn simulate_flux(
    file: &NetworkFile,
    freeze: Option<&str>,
    sim: &SimArgs,
    db_tol: f64,
) -> Result<Outcome, CliError> {
    let sys = require_bidirectional(file, "simulate-flux")?;
    let frozen = frozen_set(file, freeze, "simulate-flux")?;
    let err = domain("simulate-flux");
    let n_u = FrozenConcentrations::from_pairs(&frozen).map_err(|e| err(&e))?;
    let init = flag_values(file, "--init", sim.init.as_deref())?.unwrap_or_default();
    if let Some(&(i, _)) = init.iter().find(|(i, _)| n_u.get(*i).is_some()) {
        return Err(CliError::Flag {
            flag: "--init",
            message: format!("species {} is frozen", file.network.species()[i]),
        });
    }
    let kept: Vec<usize> = (0..sys.num_species())
        .filter(|&s| n_u.get(s).is_none())
        .collect();
    let n0_v: Vec<f64> = kept
        .iter()
        .map(|s| init.iter().find(|(i, _)| i == s).map_or(0.0, |&(_, v)| v))
        .collect();
    let (traj, exit) = finish_run(
        integrate_with_fluxes(&sys, &n_u, &n0_v, &sim.config()),
        sim.csv.as_deref(),
        "simulate-flux",
    )?;
    let mut report = report::trajectory(&traj);
    report["decomposition"] = match energy_decomposition(&sys, &n_u, &traj, db_tol) {
        Ok(samples) => report::decomposition(&samples),
        Err(DynamicsError::Hypothesis(reason)) => json!({"skipped": reason}),
        Err(e) => return Err(err(&e)),
    };
    Ok(Outcome { report, exit })
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let db_tol = db_tolerance(cli)?;
    let (name, outcome) = match &cli.command {
        Command::Analyze { file } => ("analyze", analyze(&read_file(file)?)),
        Command::CheckDb { file } => ("check-db", check_db(&read_file(file)?, db_tol)?),
        Command::Reduce {
            file,
            freeze,
            delta,
        } => (
            "reduce",
            reduce(&read_file(file)?, freeze.as_deref(), *delta, db_tol)?,
        ),
        Command::Complete {
            file,
            constrain,
            minimal,
            emit,
        } => (
            "complete",
            complete(
                &read_file(file)?,
                constrain,
                *minimal,
                emit.as_deref(),
                db_tol,
            )?,
        ),
        Command::Simulate { file, sim } => ("simulate", simulate(&read_file(file)?, sim)?),
        Command::SimulateFlux { file, freeze, sim } => (
            "simulate-flux",
            simulate_flux(&read_file(file)?, freeze.as_deref(), sim, db_tol)?,
        ),
    };
    Ok(Outcome {
        report: report::envelope(name, outcome.report),
        exit: outcome.exit,
    })
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(outcome) => {
            let mut text =
                serde_json::to_string_pretty(&outcome.report).expect("reports are valid JSON");
            text.push('\n');
            let written = match &cli.out {
                Some(path) => write_file(path, text.as_bytes()),
                None => stdout
                    .write_all(text.as_bytes())
                    .map_err(|source| CliError::Io {
                        path: "<stdout>".into(),
                        source,
                    }),
            };
            match written {
                Ok(()) => outcome.exit,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    EXIT_ERROR
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}
