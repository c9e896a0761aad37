//! The `truncdp` command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 mechanism failure, 4 validation
//! failure.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;

use crate::accountant::{
    account, alpha_grid, best_epsilon, default_alpha_grid, mechanism_curve_directed, rdp_to_dp, untruncated_curve,
    AccountantReport, CaseTag, Direction, DpGuarantee, RdpCurve, RenyiOrder,
};
use crate::calibrate::{calibrate_on_grid, Calibration, CalibrationTarget};
use crate::dist::Interval;
use crate::error::{Error, Result};
use crate::ledger::record_releases;
use crate::mechanism::{
    release, seeded_rng, GaussianParams, LaplaceParams, MechanismKind, MechanismParams, Sampler, DEFAULT_MAX_ATTEMPTS,
};
use crate::oracle::properties::ClosedForms;
use crate::oracle::suites::{run_suite, Suite, SuiteReport, DEFAULT_GRID_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_MECHANISM: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

pub const LEDGER_ENV: &str = "TRUNCDP_LEDGER";

#[derive(Parser, Debug)]
#[command(name = "truncdp", version, about = "Rényi-DP accounting for truncated Gaussian and Laplace mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// RDP curve of one mechanism with per-order case tags and the untruncated bound.
    Rdp(RdpArgs),
    /// Convert an RDP curve to an (ε, δ) guarantee.
    Convert(ConvertArgs),
    /// Smallest σ or λ meeting an (ε, δ) target.
    Calibrate(CalibrateArgs),
    /// Release noisy values with selective release.
    Sample(SampleArgs),
    /// Run the property suites.
    Validate(ValidateArgs),
    /// Export RDP curves over a parameter sweep as CSV or JSON.
    Curve(CurveArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum KindArg {
    Gaussian,
    Laplace,
}

impl From<KindArg> for MechanismKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Gaussian => MechanismKind::Gaussian,
            KindArg::Laplace => MechanismKind::Laplace,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum DirectionArg {
    Forward,
    Reverse,
    #[default]
    SymmetricMax,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Reverse => Direction::Reverse,
            DirectionArg::SymmetricMax => Direction::SymmetricMax,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum SamplerArg {
    RejectionLoop,
    #[default]
    InverseCdf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum FaultArg {
    #[default]
    None,
    CorruptedClosedForm,
}

#[derive(Args, Debug, Clone)]
struct MechanismArgs {
    #[arg(long, value_enum)]
    mechanism: Option<KindArg>,
    /// Sensitivity μ (clipping ceiling).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    sensitivity: f64,
    /// Gaussian noise multiplier σ.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Laplace scale λ.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Lower truncation bound.
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Upper truncation bound.
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
}

impl MechanismArgs {
    fn given(&self) -> bool {
        self.mechanism.is_some()
    }

    fn kind(&self) -> Result<MechanismKind> {
        self.mechanism.map(Into::into).ok_or_else(|| Error::params("--mechanism is required"))
    }

    fn interval(&self) -> Result<Interval> {
        match (self.a, self.b) {
            (Some(a), Some(b)) => Interval::new(a, b),
            _ => Err(Error::params("--a and --b are required")),
        }
    }

    fn noise(&self, kind: MechanismKind) -> Result<f64> {
        match kind {
            MechanismKind::Gaussian => self.sigma.ok_or_else(|| Error::params("gaussian mechanism needs --sigma")),
            MechanismKind::Laplace => self.lambda.ok_or_else(|| Error::params("laplace mechanism needs --lambda")),
        }
    }

    fn build(&self, kind: MechanismKind, noise: f64, interval: Interval) -> Result<MechanismParams> {
        Ok(match kind {
            MechanismKind::Gaussian => MechanismParams::Gaussian(GaussianParams::new(self.sensitivity, noise, interval)?),
            MechanismKind::Laplace => MechanismParams::Laplace(LaplaceParams::new(self.sensitivity, noise, interval)?),
        })
    }

    fn params(&self) -> Result<MechanismParams> {
        let kind = self.kind()?;
        self.build(kind, self.noise(kind)?, self.interval()?)
    }
}

fn parse_grid(spec: &Option<String>) -> Result<Vec<RenyiOrder>> {
    match spec {
        None => Ok(default_alpha_grid()),
        Some(s) => {
            let values = s
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::params(format!("bad alpha {t:?} in --alpha-grid"))))
                .collect::<Result<Vec<_>>>()?;
            alpha_grid(&values)
        }
    }
}

#[derive(Args, Debug)]
struct RdpArgs {
    #[command(flatten)]
    mech: MechanismArgs,
    /// Comma-separated orders; defaults to the built-in grid.
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long, value_enum, default_value_t)]
    direction: DirectionArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long)]
    delta: f64,
    /// Single RDP value; use with --alpha.
    #[arg(long)]
    rdp: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    mech: MechanismArgs,
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    mech: MechanismArgs,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Number of composed releases.
    #[arg(long, default_value_t = 1)]
    steps: u64,
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    mech: MechanismArgs,
    /// Query output before clipping.
    #[arg(long, allow_negative_numbers = true)]
    value: f64,
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Seed for all randomness; a fresh one is generated and reported if absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Ledger file to append one entry per released value.
    #[arg(long, env = LEDGER_ENV)]
    ledger: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    sampler: SamplerArg,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = DEFAULT_GRID_SEED)]
    grid_seed: u64,
    #[arg(long)]
    json: bool,
    /// Swap in a deliberately wrong closed form to exercise the detectors.
    #[arg(long, value_enum, default_value_t, hide = true)]
    fault: FaultArg,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    mech: MechanismArgs,
    /// `sigma=start:stop:step`, `lambda=start:stop:step` or `interval=a:b,a:b,...`.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Option<String>,
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long)]
    json: bool,
}

/// Failure of a command, carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_INVALID, message: e.to_string() }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::AttemptsExceeded { .. } | Error::DegenerateMass(_) | Error::NoConvergence { .. } => EXIT_MECHANISM,
        _ => EXIT_INVALID,
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Runs the command line with explicit streams; returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Rdp(a) => cmd_rdp(a, stdout),
        Command::Convert(a) => cmd_convert(a, stdin, stdout),
        Command::Calibrate(a) => cmd_calibrate(a, stdout),
        Command::Sample(a) => cmd_sample(a, stdout, stderr),
        Command::Validate(a) => cmd_validate(a, stdout),
        Command::Curve(a) => cmd_curve(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn cmd_rdp(args: RdpArgs, out: &mut dyn Write) -> CmdResult {
    let params = args.mech.params()?;
    let grid = parse_grid(&args.alpha_grid)?;
    let report = account(&params, &grid, args.delta, args.direction.into())?;
    if args.json {
        write_json(out, &report)?;
    } else {
        render_report(&report, out)?;
    }
    Ok(EXIT_OK)
}

fn describe(params: &MechanismParams) -> String {
    let iv = params.interval();
    let noise = match params {
        MechanismParams::Gaussian(p) => format!("sigma={}", p.noise_multiplier),
        MechanismParams::Laplace(p) => format!("lambda={}", p.scale),
    };
    format!("{} sensitivity={} {noise} interval=[{}, {}]", params.kind(), params.sensitivity(), iv.lower(), iv.upper())
}

fn render_report(r: &AccountantReport, out: &mut dyn Write) -> std::io::Result<()> {
    let direction = match r.direction {
        Direction::Forward => "forward",
        Direction::Reverse => "reverse",
        Direction::SymmetricMax => "symmetric-max",
    };
    writeln!(out, "# {} direction={direction}", describe(&r.params))?;
    writeln!(out, "{:>8}  {:>24}  {:>24}  case", "alpha", "rdp", "bound")?;
    for i in 0..r.alpha_grid.len() {
        writeln!(
            out,
            "{:>8}  {:>24.16e}  {:>24.16e}  {}",
            r.alpha_grid[i], r.rdp[i], r.rdp_untruncated[i], r.case_tags[i]
        )?;
    }
    writeln!(out, "epsilon={:.16e} delta={:e} realized_alpha={}", r.epsilon, r.delta, r.realized_alpha)
}

#[derive(Serialize)]
struct ConvertOutput {
    #[serde(flatten)]
    guarantee: DpGuarantee,
    source: &'static str,
}

fn curve_from_stdin(stdin: &mut dyn Read) -> Result<RdpCurve> {
    let mut text = String::new();
    stdin.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Err(Error::params("no curve on standard input; pass --rdp/--alpha, mechanism flags, or a curve JSON"));
    }
    if let Ok(c) = serde_json::from_str::<RdpCurve>(&text) {
        return Ok(c);
    }
    let report: AccountantReport = serde_json::from_str(&text)
        .map_err(|e| Error::params(format!("standard input is neither an RDP curve nor an rdp report: {e}")))?;
    RdpCurve::from_points(report.alpha_grid.into_iter().zip(report.rdp))
}

fn cmd_convert(args: ConvertArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> CmdResult {
    crate::accountant::check_delta(args.delta)?;
    let (curve, source) = match (args.rdp, args.alpha) {
        (Some(r), Some(a)) => (RdpCurve::from_points([(a, r)])?, "point"),
        (Some(_), None) | (None, Some(_)) => return Err(Error::params("--rdp and --alpha go together").into()),
        (None, None) if args.mech.given() => {
            let grid = parse_grid(&args.alpha_grid)?;
            (mechanism_curve_directed(&args.mech.params()?, &grid, Direction::SymmetricMax)?.0, "mechanism")
        }
        (None, None) => (curve_from_stdin(stdin)?, "stdin"),
    };
    let g = best_epsilon(&curve, args.delta)?;
    if args.json {
        write_json(out, &ConvertOutput { guarantee: g, source })?;
    } else {
        writeln!(out, "epsilon={:.16e} delta={:e} realized_alpha={}", g.epsilon, g.delta, g.realized_alpha.value())?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CalibrateOutput {
    target: CalibrationTarget,
    #[serde(flatten)]
    result: Calibration,
}

fn cmd_calibrate(args: CalibrateArgs, out: &mut dyn Write) -> CmdResult {
    let target = CalibrationTarget {
        epsilon: args.epsilon,
        delta: args.delta,
        steps: args.steps,
        mechanism: args.mech.kind()?,
        sensitivity: args.mech.sensitivity,
        interval: args.mech.interval()?,
    };
    let grid = parse_grid(&args.alpha_grid)?;
    let result = calibrate_on_grid(&target, &grid)?;
    if args.json {
        write_json(out, &CalibrateOutput { target, result })?;
    } else {
        let name = match target.mechanism {
            MechanismKind::Gaussian => "sigma",
            MechanismKind::Laplace => "lambda",
        };
        writeln!(
            out,
            "{name}={:.16e} epsilon={:.16e} realized_alpha={} free={}",
            result.parameter, result.epsilon, result.realized_alpha, result.free
        )?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SampleOutput {
    mechanism: MechanismKind,
    seed: u64,
    values: Vec<f64>,
    attempts: Vec<u64>,
}

fn cmd_sample(args: SampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let params = args.mech.params()?;
    let seed = match args.seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::rng().random();
            writeln!(err, "seed={s}")?;
            s
        }
    };
    let sampler = match args.sampler {
        SamplerArg::RejectionLoop => Sampler::RejectionLoop,
        SamplerArg::InverseCdf => Sampler::InverseCdf,
    };
    let mut rng = seeded_rng(seed);
    let mut values = Vec::with_capacity(args.n);
    let mut attempts = Vec::with_capacity(args.n);
    for _ in 0..args.n {
        let r = release(args.value, &params, &mut rng, args.max_attempts, sampler)?;
        values.push(r.released_value);
        attempts.push(r.attempts);
    }
    if let Some(path) = &args.ledger {
        record_releases(path, &params, args.n, &default_alpha_grid())?;
    }
    if args.json {
        write_json(out, &SampleOutput { mechanism: params.kind(), seed, values, attempts })?;
    } else {
        for v in values {
            writeln!(out, "{v}")?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_validate(args: ValidateArgs, out: &mut dyn Write) -> CmdResult {
    let suite: Suite = args.suite.parse()?;
    let forms = match args.fault {
        FaultArg::None => ClosedForms::SHIPPED,
        FaultArg::CorruptedClosedForm => ClosedForms::CORRUPTED,
    };
    let report = run_suite(suite, args.grid_seed, &forms)?;
    if args.json {
        write_json(out, &report)?;
    } else {
        render_suite(&report, out)?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
}

fn render_suite(r: &SuiteReport, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "# suite={} grid_seed={}", r.suite.name(), r.grid_seed)?;
    for p in &r.reports {
        let status = match (p.holds(), p.asserted) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "recorded",
        };
        writeln!(
            out,
            "{status:<8} {:<40} grid={:<6} violations={:<5} failures={:<4} max_slack={:+.6e}",
            p.theorem,
            p.grid_size,
            p.violations.len(),
            p.failures.len(),
            p.max_slack
        )?;
        for v in p.worst(5) {
            let params: Vec<String> = v.params.iter().map(|(k, x)| format!("{k}={x}")).collect();
            writeln!(out, "    lhs={:.12e} rhs={:.12e} {}", v.lhs, v.rhs, params.join(" "))?;
        }
        for f in p.failures.iter().take(5) {
            let params: Vec<String> = f.params.iter().map(|(k, x)| format!("{k}={x}")).collect();
            writeln!(out, "    error: {} {}", f.message, params.join(" "))?;
        }
    }
    writeln!(out, "{}", if r.passed { "PASSED" } else { "FAILED" })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub alpha: f64,
    pub parameter: f64,
    pub rdp_truncated: f64,
    pub rdp_untruncated: f64,
    pub epsilon_at_delta: f64,
    pub a: f64,
    pub b: f64,
    pub case: CaseTag,
}

pub const CURVE_HEADER: &str = "alpha,parameter,rdp_truncated,rdp_untruncated,epsilon_at_delta,a,b,case";

#[derive(Debug, Clone, PartialEq)]
enum Sweep {
    Noise(Vec<f64>),
    Intervals(Vec<Interval>),
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::params(format!("malformed sweep range {spec:?}; expected start:stop:step or a single value"));
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                return Err(Error::params("sweep has more than 100000 points"));
            }
            Ok((0..count).map(|i| start + step * i as f64).collect())
        }
        _ => Err(bad()),
    }
}

fn parse_sweep(spec: &str, kind: MechanismKind) -> Result<Sweep> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::params(format!("malformed sweep {spec:?}; expected key=spec")))?;
    match (key.trim(), kind) {
        ("sigma", MechanismKind::Gaussian) | ("lambda", MechanismKind::Laplace) => Ok(Sweep::Noise(parse_range(value)?)),
        ("sigma", _) | ("lambda", _) => Err(Error::params(format!("sweep key {key:?} does not match mechanism {kind}"))),
        ("interval", _) => {
            let intervals = value
                .split(',')
                .map(|pair| {
                    let (a, b) = pair
                        .split_once(':')
                        .ok_or_else(|| Error::params(format!("malformed interval {pair:?}; expected a:b")))?;
                    let a = a.trim().parse::<f64>().map_err(|_| Error::params(format!("bad bound {a:?}")))?;
                    let b = b.trim().parse::<f64>().map_err(|_| Error::params(format!("bad bound {b:?}")))?;
                    Interval::new(a, b)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Sweep::Intervals(intervals))
        }
        (other, _) => Err(Error::params(format!("unknown sweep key {other:?}; expected sigma, lambda or interval"))),
    }
}

/// Rows for every (parameter setting, α) pair of a sweep.
fn curve_rows(mech: &MechanismArgs, sweep: Option<&str>, grid: &[RenyiOrder], delta: f64) -> Result<Vec<CurveRow>> {
    let kind = mech.kind()?;
    let settings: Vec<(f64, Interval)> = match sweep.map(|s| parse_sweep(s, kind)).transpose()? {
        None => vec![(mech.noise(kind)?, mech.interval()?)],
        Some(Sweep::Noise(values)) => {
            let iv = mech.interval()?;
            values.into_iter().map(|v| (v, iv)).collect()
        }
        Some(Sweep::Intervals(ivs)) => {
            let noise = mech.noise(kind)?;
            ivs.into_iter().map(|iv| (noise, iv)).collect()
        }
    };
    let mut rows = Vec::new();
    for (noise, iv) in settings {
        let params = mech.build(kind, noise, iv)?;
        let (curve, tags) = mechanism_curve_directed(&params, grid, Direction::SymmetricMax)?;
        let bound = untruncated_curve(&params, grid)?;
        for ((pt, b), case) in curve.points().iter().zip(bound.rdp_values()).zip(tags) {
            rows.push(CurveRow {
                alpha: pt.alpha.value(),
                parameter: noise,
                rdp_truncated: pt.rdp,
                rdp_untruncated: b,
                epsilon_at_delta: rdp_to_dp(pt.rdp, pt.alpha, delta)?,
                a: iv.lower(),
                b: iv.upper(),
                case,
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct CurveOutput {
    mechanism: MechanismKind,
    sensitivity: f64,
    delta: f64,
    rows: Vec<CurveRow>,
}

fn cmd_curve(args: CurveArgs, out: &mut dyn Write) -> CmdResult {
    crate::accountant::check_delta(args.delta)?;
    let grid = parse_grid(&args.alpha_grid)?;
    let rows = curve_rows(&args.mech, args.sweep.as_deref(), &grid, args.delta)?;
    if args.json {
        write_json(out, &CurveOutput { mechanism: args.mech.kind()?, sensitivity: args.mech.sensitivity, delta: args.delta, rows })?;
    } else {
        writeln!(out, "{CURVE_HEADER}")?;
        for r in rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.alpha, r.parameter, r.rdp_truncated, r.rdp_untruncated, r.epsilon_at_delta, r.a, r.b, r.case
            )?;
        }
    }
    Ok(EXIT_OK)
}
