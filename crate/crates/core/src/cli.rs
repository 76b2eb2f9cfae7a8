//! Command-line driver for the data → training → verification pipeline.
//!
//! Verification commands exit with 0 (verified), 1 (refuted) or 2
//! (unknown). Failures exit with 64 or above: 64 usage, 65 bad input data,
//! 66 missing input file, 70 solver failure, 73 unwritable output, 74 other I/O.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dualopt::{ascend, root_lp_value, AscentConfig, DualState};
use crate::error::{Error, Result};
use crate::gridopf::{self, builtin_case_4bus, Dataset, GridNetwork, LoadBox};
use crate::minenc::{append_min_encoding, ViolationSpec};
use crate::netmodel::DenseNN;
use crate::textfmt;
use crate::trainer::{self, TrainConfig};
use crate::verifier::{self, Mode, OracleConfig, Status, Verdict, VerificationProblem, VerifyConfig, Witness};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Relative `--report` paths are resolved against this directory if set.
pub const REPORT_DIR_ENV: &str = "GRIDVERIFY_REPORT_DIR";

#[derive(Debug, Parser)]
#[command(name = "gridverify", version, about = "Verify neural dispatch surrogates against grid limits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample loads and keep N-1 secure dispatches.
    GenData {
        /// Case file, or `builtin` for the 4-bus ring.
        #[arg(long)]
        case: String,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        low: f64,
        #[arg(long)]
        high: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a ReLU network to a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Hidden widths, comma separated.
        #[arg(long, value_delimiter = ',')]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5000)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append the worst-violation encoding to a model.
    EncodeMin {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',')]
        upper: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lower: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Branch-and-bound verification.
    Verify(VerifyArgs),
    /// Exact optimum by enumeration (small instances only).
    Oracle(ProblemArgs),
    /// Verify at several limit scales.
    Sweep {
        #[command(flatten)]
        verify: VerifyArgs,
        #[arg(long, value_delimiter = ',')]
        scales: Vec<f64>,
        /// Also compute the exact optimum at every scale.
        #[arg(long)]
        oracle: bool,
    },
    /// Dual ascent trace, root LP value and exact optimum per margin.
    Trace {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_delimiter = ',')]
        scales: Vec<f64>,
        /// Bound the root node only (no branching).
        #[arg(long)]
        root_only: bool,
        #[arg(long, default_value_t = 5000)]
        iters: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    GenLimits,
    N1Flows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Form {
    /// Worst violation appended to the network.
    Encoded,
    /// Explicit worst-case binaries.
    Milp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Decide,
    Optimize,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    #[arg(long)]
    pub case: String,
    #[arg(long)]
    pub model: PathBuf,
    /// Limit scale (generator limits or line flow margin).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// `pmNN` or `abs:LOW:HIGH`.
    #[arg(long = "box", default_value = "pm25")]
    pub load_box: String,
    #[arg(long, value_enum, default_value = "encoded")]
    pub form: Form,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Seconds.
    #[arg(long, default_value_t = 300.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 200_000)]
    pub node_budget: usize,
    #[arg(long, value_enum, default_value = "decide")]
    pub mode: ModeArg,
}

fn load_case(spec: &str) -> Result<GridNetwork> {
    if spec == "builtin" {
        Ok(builtin_case_4bus())
    } else {
        GridNetwork::load(spec)
    }
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(textfmt::sha256_hex(&bytes))
}

struct Loaded {
    net: GridNetwork,
    nn: DenseNN,
    case_sha256: String,
    model_sha256: String,
    load_box: LoadBox,
}

fn load_inputs(args: &ProblemArgs) -> Result<Loaded> {
    let net = load_case(&args.case)?;
    Ok(Loaded {
        case_sha256: net.hash()?,
        model_sha256: file_hash(&args.model)?,
        nn: DenseNN::load(&args.model)?,
        load_box: args.load_box.parse()?,
        net,
    })
}

fn build(args: &ProblemArgs, l: &Loaded, scale: f64) -> Result<VerificationProblem> {
    let b = l.load_box.to_box(&l.net)?;
    match (args.problem, args.form) {
        (ProblemKind::GenLimits, Form::Encoded) => gridopf::build_problem1(&l.nn, &l.net, &b, scale),
        (ProblemKind::GenLimits, Form::Milp) => gridopf::build_problem1_milp(&l.nn, &l.net, &b, scale),
        (ProblemKind::N1Flows, Form::Encoded) => gridopf::build_problem2(&l.nn, &l.net, &b, scale),
        (ProblemKind::N1Flows, Form::Milp) => gridopf::build_problem2_milp(&l.nn, &l.net, &b, scale),
    }
}

fn verify_config(args: &VerifyArgs) -> Result<VerifyConfig> {
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(Error::InvalidArgument(format!("timeout {}", args.timeout)));
    }
    Ok(VerifyConfig {
        mode: match args.mode {
            ModeArg::Decide => Mode::Decide,
            ModeArg::Optimize => Mode::Optimize,
        },
        timeout: Duration::from_secs_f64(args.timeout),
        node_budget: args.node_budget,
        workers: args.workers.max(1),
        ..VerifyConfig::default()
    })
}

#[derive(Debug, Serialize)]
struct Inputs<'a> {
    problem: ProblemKind,
    form: Form,
    case_sha256: &'a str,
    model_sha256: &'a str,
    load_box: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<ModeArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timeout_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    node_budget: Option<usize>,
}

impl<'a> Inputs<'a> {
    fn new(args: &'a ProblemArgs, l: &'a Loaded) -> Self {
        Self {
            problem: args.problem,
            form: args.form,
            case_sha256: &l.case_sha256,
            model_sha256: &l.model_sha256,
            load_box: &args.load_box,
            scale: Some(args.scale),
            mode: None,
            timeout_s: None,
            workers: None,
            node_budget: None,
        }
    }

    fn with_verify(mut self, v: &VerifyArgs) -> Self {
        self.mode = Some(v.mode);
        self.timeout_s = Some(v.timeout);
        self.workers = Some(v.workers);
        self.node_budget = Some(v.node_budget);
        self
    }
}

#[derive(Debug, Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    command: &'a [String],
    inputs: Inputs<'a>,
    result: T,
}

#[derive(Debug, Serialize)]
struct OracleReport {
    status: Status,
    gamma: f64,
    witness: Option<Witness>,
    patterns: usize,
    lps: usize,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    scale: f64,
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_gamma: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    scale: f64,
    dual_values: Vec<f64>,
    dual_best: f64,
    crossed_at: Option<usize>,
    root_lp: f64,
    oracle_gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<Verdict>,
}

fn report_path(path: &Path) -> PathBuf {
    match std::env::var_os(REPORT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_report<T: Serialize>(path: Option<&PathBuf>, report: &Report<'_, T>) -> Result<()> {
    let text = textfmt::to_text(report);
    match path {
        Some(p) => {
            let p = report_path(p);
            std::fs::write(&p, text).map_err(|e| Error::write(&p, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Verified => 0,
        Status::Refuted => 1,
        Status::Unknown => 2,
    }
}

/// Exit code for a failure.
pub fn error_code(e: &Error) -> u8 {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 66,
        Error::Io { .. } => 74,
        Error::Write { .. } => 73,
        Error::Shape(_)
        | Error::InvalidNetwork(_)
        | Error::Parse { .. }
        | Error::Version { .. }
        | Error::InvalidArgument(_)
        | Error::UnsupportedNorm(_)
        | Error::InconsistentBounds(_)
        | Error::UnboundedAuxiliary { .. }
        | Error::EnumerationCap { .. } => 65,
        Error::Infeasible(_)
        | Error::NonFinite { .. }
        | Error::IterationLimit(_)
        | Error::Certificate(_)
        | Error::Diverged { .. } => 70,
    }
}

/// Runs a parsed command and returns its exit code.
pub fn execute(cli: &Cli, argv: &[String]) -> Result<u8> {
    match &cli.command {
        Command::GenData {
            case,
            samples,
            low,
            high,
            seed,
            out,
        } => {
            let net = load_case(case)?;
            let d = gridopf::generate_dataset(&net, *samples, *low, *high, *seed)?;
            d.save(out)?;
            eprintln!(
                "{} of {} samples accepted after {} attempts",
                d.samples.len(),
                samples,
                d.header.attempts
            );
            Ok(0)
        }
        Command::Train {
            data,
            widths,
            seed,
            epochs,
            lr,
            batch,
            out,
        } => {
            let d = Dataset::load(data)?;
            let (xs, ys) = d.pairs();
            let first = d.samples.first().ok_or_else(|| Error::InvalidArgument("empty dataset".into()))?;
            let mut all = vec![first.p_d.len()];
            all.extend(widths);
            all.push(first.p_g.len());
            let cfg = TrainConfig {
                widths: all,
                epochs: *epochs,
                batch_size: *batch,
                lr: *lr,
                seed: *seed,
                target_mse: 0.0,
            };
            let r = trainer::train(&xs, &ys, &cfg)?;
            r.nn.save(out)?;
            eprintln!("final training MSE {:.6e}", r.final_mse);
            Ok(0)
        }
        Command::EncodeMin {
            model,
            upper,
            lower,
            out,
        } => {
            let nn = DenseNN::load(model)?;
            let spec = match lower {
                Some(l) => ViolationSpec::two_sided(l.clone(), upper.clone()),
                None => ViolationSpec::upper(upper.clone()),
            };
            append_min_encoding(&nn, &spec)?.save(out)?;
            Ok(0)
        }
        Command::Verify(args) => {
            let l = load_inputs(&args.problem)?;
            let p = build(&args.problem, &l, args.problem.scale)?;
            let v = verifier::verify(&p, &verify_config(args)?)?;
            let code = status_code(v.status);
            write_report(
                args.problem.report.as_ref(),
                &Report {
                    schema_version: REPORT_SCHEMA_VERSION,
                    command: argv,
                    inputs: Inputs::new(&args.problem, &l).with_verify(args),
                    result: v,
                },
            )?;
            Ok(code)
        }
        Command::Oracle(args) => {
            let l = load_inputs(args)?;
            let p = build(args, &l, args.scale)?;
            let o = verifier::oracle_exact(&p, &OracleConfig::default())?;
            let status = if o.gamma >= -verifier::VERIFY_TOL {
                Status::Verified
            } else {
                Status::Refuted
            };
            write_report(
                args.report.as_ref(),
                &Report {
                    schema_version: REPORT_SCHEMA_VERSION,
                    command: argv,
                    inputs: Inputs::new(args, &l),
                    result: OracleReport {
                        status,
                        gamma: o.gamma,
                        witness: o.witness,
                        patterns: o.patterns,
                        lps: o.lps,
                    },
                },
            )?;
            Ok(status_code(status))
        }
        Command::Sweep { verify, scales, oracle } => {
            let l = load_inputs(&verify.problem)?;
            let cfg = verify_config(verify)?;
            let mut rows = Vec::with_capacity(scales.len());
            for &s in scales {
                let p = build(&verify.problem, &l, s)?;
                let v = verifier::verify(&p, &cfg)?;
                let oracle_gamma = if *oracle {
                    Some(verifier::oracle_exact(&p, &OracleConfig::default())?.gamma)
                } else {
                    None
                };
                eprintln!("scale {s}: {:?}", v.status);
                rows.push(SweepRow {
                    scale: s,
                    verdict: v,
                    oracle_gamma,
                });
            }
            let code = if rows.iter().any(|r| r.verdict.status == Status::Unknown) {
                2
            } else {
                0
            };
            let mut inputs = Inputs::new(&verify.problem, &l).with_verify(verify);
            inputs.scale = None;
            write_report(
                verify.problem.report.as_ref(),
                &Report {
                    schema_version: REPORT_SCHEMA_VERSION,
                    command: argv,
                    inputs,
                    result: rows,
                },
            )?;
            Ok(code)
        }
        Command::Trace {
            problem,
            scales,
            root_only,
            iters,
        } => {
            let l = load_inputs(problem)?;
            let mut rows = Vec::with_capacity(scales.len());
            for &s in scales {
                let p = build(problem, &l, s)?;
                let c = &p.constrained;
                let root = c.root()?;
                let cfg = AscentConfig {
                    iters: *iters,
                    early_stop: f64::INFINITY,
                    ..AscentConfig::default()
                };
                let out = ascend(c, &DualState::initial(c, &root), &cfg)?;
                let verdict = if *root_only {
                    None
                } else {
                    Some(verifier::verify(&p, &VerifyConfig::default())?)
                };
                rows.push(TraceRow {
                    scale: s,
                    crossed_at: out.trace.crossed_at,
                    dual_values: out.trace.values,
                    dual_best: out.best,
                    root_lp: root_lp_value(c)?,
                    oracle_gamma: verifier::oracle_exact(&p, &OracleConfig::default())?.gamma,
                    verdict,
                });
            }
            let mut inputs = Inputs::new(problem, &l);
            inputs.scale = None;
            write_report(
                problem.report.as_ref(),
                &Report {
                    schema_version: REPORT_SCHEMA_VERSION,
                    command: argv,
                    inputs,
                    result: rows,
                },
            )?;
            Ok(0)
        }
    }
}

/// Parses `argv` (including the program name), runs it and returns the
/// exit code. Diagnostics go to stderr.
pub fn run(argv: Vec<String>) -> u8 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, &argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}
