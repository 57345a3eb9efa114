//! `ugfbn` command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ugfbn::mc::simulate;
use ugfbn::model::{parse_document, validate_model, HierarchicalSystem, ModelDocument};
use ugfbn::pipeline::{
    benchmark_scaling, system_reliability_purebn, system_reliability_ugfbn, write_csv, Analysis,
    PipelineConfig,
};
use ugfbn::rbdo::{
    compare_schemes, optimize, render_report, Optimum, RbdoError, SolverConfig, SolverMethod,
};
use ugfbn::{Acceptance, ModelError, PipelineError};

/// Largest difference `compare` tolerates between the two methods.
const AGREEMENT: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "ugfbn",
    version,
    about = "Multi-state system reliability with UGF and Bayesian networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Accept {
    /// Top-node demand: states with performance >= D count as working.
    #[arg(long, conflicts_with = "accept")]
    demand: Option<f64>,
    /// Comma-separated top-node states that count as working.
    #[arg(long, value_delimiter = ',')]
    accept: Option<Vec<f64>>,
}

impl Accept {
    fn acceptance(&self) -> Acceptance {
        match (&self.demand, &self.accept) {
            (Some(d), _) => Acceptance::Demand(*d),
            (None, Some(s)) => Acceptance::States(s.clone()),
            (None, None) => Acceptance::HighestState,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Method {
    Ugfbn,
    Purebn,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model and list its violations.
    Validate { model: PathBuf },
    /// Top-node distribution and system reliability at time T (hours).
    Analyze {
        model: PathBuf,
        #[arg(long)]
        time: f64,
        #[command(flatten)]
        accept: Accept,
        #[arg(long, value_enum, default_value = "ugfbn")]
        method: Method,
    },
    /// Run both methods and compare results and wall-clock time.
    Compare {
        model: PathBuf,
        #[arg(long)]
        time: f64,
        #[command(flatten)]
        accept: Accept,
    },
    /// Timing of both methods as components are added.
    Bench {
        model: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        step: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        accept: Accept,
    },
    /// Monte Carlo estimate of the top-node distribution.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        accept: Accept,
    },
    /// Redundancy optimization of a design document.
    Optimize {
        spec: PathBuf,
        /// Mission time in hours; defaults to the document's.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long, conflicts_with = "relaxed")]
        exhaustive: bool,
        #[arg(long)]
        relaxed: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Validation(String, Vec<String>),
    Usage(String),
    Engine(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(..) => 1,
            Failure::Usage(_) => 2,
            Failure::Engine(_) => 3,
        }
    }

    fn report(&self) {
        let line = match self {
            Failure::Validation(message, violations) => json!({
                "error": "validation",
                "message": message,
                "violations": violations,
            }),
            Failure::Usage(message) => json!({ "error": "usage", "message": message }),
            Failure::Engine(message) => json!({ "error": "engine", "message": message }),
        };
        eprintln!("{line}");
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Validation(e.to_string(), Vec::new())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Invalid(v) => Failure::Validation(
                "model is invalid".into(),
                v.iter().map(|x| x.message.clone()).collect(),
            ),
            PipelineError::Model(m) => m.into(),
            PipelineError::UnknownState(_) => Failure::Usage(e.to_string()),
            other => Failure::Engine(other.to_string()),
        }
    }
}

impl From<RbdoError> for Failure {
    fn from(e: RbdoError) -> Self {
        match e {
            RbdoError::Model(m) => m.into(),
            RbdoError::Pipeline(p) => p.into(),
            other => Failure::Engine(other.to_string()),
        }
    }
}

fn read_document(path: &Path) -> Result<ModelDocument, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_document(&text)?)
}

fn load(path: &Path) -> Result<HierarchicalSystem, Failure> {
    let system = read_document(path)?.system;
    let report = validate_model(&system);
    if report.is_empty() {
        Ok(system)
    } else {
        Err(PipelineError::Invalid(report).into())
    }
}

fn distribution(out: &mut String, a: &Analysis) {
    let _ = writeln!(out, "state,probability");
    for (s, p) in a.states.iter().zip(&a.probabilities) {
        let _ = writeln!(out, "{s:.8},{p:.8}");
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn run(command: Command) -> Result<String, Failure> {
    let mut out = String::new();
    match command {
        Command::Validate { model } => {
            let system = read_document(&model)?.system;
            let report = validate_model(&system);
            if !report.is_empty() {
                for v in &report {
                    println!("{v}");
                }
                return Err(PipelineError::Invalid(report).into());
            }
            out.push_str("valid\n");
        }
        Command::Analyze {
            model,
            time,
            accept,
            method,
        } => {
            let system = load(&model)?;
            let acceptance = accept.acceptance();
            let a = match method {
                Method::Ugfbn => system_reliability_ugfbn(&system, time, &acceptance)?,
                Method::Purebn => system_reliability_purebn(&system, time, &acceptance)?,
            };
            distribution(&mut out, &a);
            let _ = writeln!(out, "R_system={:.8}", a.r_system);
        }
        Command::Compare {
            model,
            time,
            accept,
        } => {
            let system = load(&model)?;
            let acceptance = accept.acceptance();
            let start = Instant::now();
            let hybrid = system_reliability_ugfbn(&system, time, &acceptance)?;
            let hybrid_ms = start.elapsed().as_secs_f64() * 1e3;
            let start = Instant::now();
            let pure = system_reliability_purebn(&system, time, &acceptance)?;
            let pure_ms = start.elapsed().as_secs_f64() * 1e3;
            let diff = hybrid.max_abs_diff(&pure);
            if diff > AGREEMENT {
                return Err(Failure::Engine(format!("methods disagree by {diff:e}")));
            }
            let _ = writeln!(out, "[ugfbn]");
            distribution(&mut out, &hybrid);
            let _ = writeln!(out, "R_system={:.8}", hybrid.r_system);
            let _ = writeln!(out, "\n[purebn]");
            distribution(&mut out, &pure);
            let _ = writeln!(out, "R_system={:.8}", pure.r_system);
            let _ = writeln!(out, "\nmax_abs_diff={diff:.8}");
            let _ = writeln!(out, "ugfbn_ms={hybrid_ms:.8}");
            let _ = writeln!(out, "purebn_ms={pure_ms:.8}");
        }
        Command::Bench {
            model,
            time,
            step,
            steps,
            reps,
            out: path,
            accept,
        } => {
            let system = load(&model)?;
            let rows = benchmark_scaling(
                &system,
                step,
                steps,
                time,
                &accept.acceptance(),
                reps,
                &PipelineConfig::default(),
            )?;
            let mut csv = Vec::new();
            write_csv(&rows, &mut csv).expect("writing to memory");
            write_file(&path, &csv)?;
            out.push_str(&String::from_utf8(csv).expect("CSV is UTF-8"));
        }
        Command::Simulate {
            model,
            time,
            trials,
            seed,
            accept,
        } => {
            let system = load(&model)?;
            let e = simulate(&system, time, trials, seed, &accept.acceptance())?;
            let _ = writeln!(out, "state,count,frequency");
            for ((s, c), f) in e.states.iter().zip(&e.counts).zip(&e.frequencies) {
                let _ = writeln!(out, "{s:.8},{c},{f:.8}");
            }
            let _ = writeln!(out, "trials={}", e.trials);
            let _ = writeln!(out, "seed={seed}");
            let _ = writeln!(out, "R_estimate={:.8}", e.r_estimate);
            let _ = writeln!(out, "standard_error={:.8}", e.standard_error);
        }
        Command::Optimize {
            spec,
            time,
            exhaustive,
            relaxed,
            out: path,
        } => {
            let doc = read_document(&spec)?;
            let Some(design) = doc.design else {
                return Err(Failure::Validation(
                    format!("{} has no [design] section", spec.display()),
                    Vec::new(),
                ));
            };
            let t = time.unwrap_or(design.mission_time_h);
            let method = if exhaustive {
                SolverMethod::Exhaustive
            } else if relaxed {
                SolverMethod::Relaxed
            } else {
                SolverMethod::Auto
            };
            let config = SolverConfig {
                method,
                ..SolverConfig::default()
            };
            let (optimum, infeasible): (Optimum, bool) = match optimize(&design, t, &config) {
                Ok(o) => (o, false),
                Err(RbdoError::Infeasible(o)) => (*o, true),
                Err(e) => return Err(e.into()),
            };
            let comparison = match &design.baseline {
                Some(b) => Some(compare_schemes(&design, b, &optimum.best.counts, t)?),
                None => None,
            };
            let report = render_report(&design, &optimum, comparison.as_ref());
            write_file(&path, report.as_bytes())?;
            let best = &optimum.best;
            let _ = writeln!(out, "design={}", best.counts);
            let _ = writeln!(out, "mass_kg={:.8}", best.mass_kg);
            let _ = writeln!(out, "power_w={:.8}", best.power_w);
            let _ = writeln!(out, "cost_m={:.8}", best.cost_m);
            let _ = writeln!(out, "R_system={:.8}", best.r_system);
            let _ = writeln!(out, "feasible={}", best.feasible.all());
            let _ = writeln!(out, "heuristic={}", optimum.trace.heuristic);
            if infeasible {
                print!("{out}");
                return Err(Failure::Engine(format!(
                    "no feasible design found; least-violating design {}",
                    best.counts
                )));
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let failure = Failure::Usage(e.kind().to_string());
            failure.report();
            eprint!("{}", e.render());
            return ExitCode::from(failure.code());
        }
    };
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            failure.report();
            ExitCode::from(failure.code())
        }
    }
}
