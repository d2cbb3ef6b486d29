//! Command-line driver: configuration, dispatch and report formatting.
//!
//! [`run_cli`] is the whole program minus process plumbing, so tests can
//! compare outputs byte for byte.

pub mod config;
mod commands;
mod output;
mod suite;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cycdyn::orbits::{CandidateBox, OrbitCaps};
use cycdyn::Error;
use serde::Serialize;

pub use config::SystemConfig;
pub use output::Report;

#[derive(Parser, Debug)]
#[command(name = "cycdyn", version, about = "Semigroup dynamics over cyclotomic fields")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// JSON system configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cyclotomic order for points when no configuration is given.
    #[arg(long, global = true)]
    pub order: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (output does not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Working precision in bits.
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Orbit depth, or n_max for searches.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub box_num: Option<u64>,
    #[arg(long, global = true)]
    pub box_den: Option<u64>,
    /// Search cyclotomic integers with coefficients in [-b, b] instead of rationals.
    #[arg(long, global = true)]
    pub coeff_bound: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum number of points or words held at once.
    #[arg(long, global = true)]
    pub cap_words: Option<usize>,
    /// Add the wall time to the report.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PointArgs {
    /// Comma-separated coordinates, e.g. "3/2, 1 + z4".
    #[arg(long)]
    pub point: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CanhArgs {
    #[arg(long)]
    pub point: String,
    /// Generator name (default: the only generator).
    #[arg(long)]
    pub map: Option<String>,
    /// Periodic sequence of generators, one-based, e.g. "1,2".
    #[arg(long)]
    pub word: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SemigroupArgs {
    #[arg(long)]
    pub point: String,
    #[arg(long)]
    pub monte_carlo: bool,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MapArgs {
    #[arg(long)]
    pub map: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GrowthArgs {
    #[arg(long)]
    pub point: String,
    /// "inf" or a prime.
    #[arg(long, default_value = "inf")]
    pub place: String,
    /// One-based word, e.g. "1,1,2".
    #[arg(long)]
    pub word: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BoundsArgs {
    #[arg(long, default_value = "1")]
    pub a: String,
    /// Also test the two-sided size inequality at this point.
    #[arg(long)]
    pub point: Option<String>,
    /// Primes for the size inequality (rational systems).
    #[arg(long, default_value = "2,3,5,7,11,13,17,19,23,29")]
    pub primes: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SigmaArgs {
    #[arg(long, default_value = "1")]
    pub a: String,
    /// Candidate coefficient points separated by ';'.
    #[arg(long)]
    pub gammas: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PiArgs {
    /// Single point; the whole box when absent.
    #[arg(long)]
    pub point: Option<String>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub l_max: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitModeArg {
    Single,
    Multi,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SplitArgs {
    /// E.g. "T1*T2 - 2*T3" or "[1, z4]*T1 + T2".
    #[arg(long)]
    pub form: String,
    #[arg(long, value_enum, default_value_t = SplitModeArg::Single)]
    pub mode: SplitModeArg,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Orbit levels and collisions of a point.
    Orbit(PointArgs),
    /// Weil height of a point.
    Height(PointArgs),
    /// House of a point.
    House(PointArgs),
    /// Canonical height for one map or one periodic sequence of maps.
    Canh(CanhArgs),
    /// Canonical height for the whole semigroup.
    CanhSemigroup(SemigroupArgs),
    /// Nullstellensatz certificates and size constants.
    Certify(MapArgs),
    /// Size growth along a word at a place of Q.
    Growth(GrowthArgs),
    /// The constants c-hat, L and M.
    Bounds(BoundsArgs),
    /// Orbit collisions over the box, with height bounds.
    SearchCollisions,
    /// Points of the box in Sigma_A.
    SearchSigma(SigmaArgs),
    /// Preperiodicity of a point or of every box point.
    SearchPi(PiArgs),
    /// Zeros of a split multilinear form along orbits.
    SearchSplitform(SplitArgs),
    /// Unitary monomial shape of each generator.
    DetectMonomialForm(MapArgs),
    /// Property checks on fixtures or on the configured system.
    VerifySuite,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Orbit(_) => "orbit",
            Command::Height(_) => "height",
            Command::House(_) => "house",
            Command::Canh(_) => "canh",
            Command::CanhSemigroup(_) => "canh-semigroup",
            Command::Certify(_) => "certify",
            Command::Growth(_) => "growth",
            Command::Bounds(_) => "bounds",
            Command::SearchCollisions => "search-collisions",
            Command::SearchSigma(_) => "search-sigma",
            Command::SearchPi(_) => "search-pi",
            Command::SearchSplitform(_) => "search-splitform",
            Command::DetectMonomialForm(_) => "detect-monomial-form",
            Command::VerifySuite => "verify-suite",
        }
    }

    fn args_json(&self) -> serde_json::Value {
        let v = match self {
            Command::Orbit(a) | Command::Height(a) | Command::House(a) => serde_json::to_value(a),
            Command::Canh(a) => serde_json::to_value(a),
            Command::CanhSemigroup(a) => serde_json::to_value(a),
            Command::Certify(a) | Command::DetectMonomialForm(a) => serde_json::to_value(a),
            Command::Growth(a) => serde_json::to_value(a),
            Command::Bounds(a) => serde_json::to_value(a),
            Command::SearchSigma(a) => serde_json::to_value(a),
            Command::SearchPi(a) => serde_json::to_value(a),
            Command::SearchSplitform(a) => serde_json::to_value(a),
            Command::SearchCollisions | Command::VerifySuite => Ok(serde_json::json!({})),
        };
        v.expect("arguments serialize")
    }
}

/// Effective settings after merging defaults, configuration and flags.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub order: u64,
    pub precision: u32,
    pub tolerance: f64,
    pub depth: usize,
    #[serde(rename = "box")]
    pub candidates: CandidateBox,
    pub max_words: usize,
    pub max_bits: u64,
    pub max_nodes: u64,
    pub seed: u64,
    pub k_max: usize,
    pub l_max: usize,
    pub samples: usize,
}

impl Settings {
    fn resolve(g: &GlobalArgs, cfg: Option<&SystemConfig>) -> cycdyn::Result<Settings> {
        let caps = cfg.map(|c| c.caps.clone()).unwrap_or_default();
        let order = match (cfg, g.order) {
            (Some(c), Some(o)) if o != c.order => {
                return Err(Error::InvalidInput(format!(
                    "--order {o} conflicts with n = {} in the configuration",
                    c.order
                )))
            }
            (Some(c), _) => c.order,
            (None, o) => o.unwrap_or(1),
        };
        if order == 0 {
            return Err(Error::InvalidInput("--order must be positive".into()));
        }
        let precision = g.precision.or(cfg.map(|c| c.precision)).unwrap_or(cycdyn::DEFAULT_PRECISION);
        if precision < 32 {
            return Err(Error::InvalidInput("--precision must be at least 32".into()));
        }
        let tolerance = g.tol.or(cfg.map(|c| c.tolerance)).unwrap_or(1e-8);
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidInput("--tol must be a positive number".into()));
        }
        let candidates = match g.coeff_bound.or(caps.coeff_bound) {
            Some(b) => CandidateBox::CyclotomicInteger { order, coeff_bound: b },
            None => CandidateBox::Rational {
                num: g.box_num.unwrap_or(caps.box_num),
                den: g.box_den.unwrap_or(caps.box_den),
            },
        };
        Ok(Settings {
            order,
            precision,
            tolerance,
            depth: g.depth.unwrap_or(caps.depth),
            candidates,
            max_words: g.cap_words.unwrap_or(caps.words),
            max_bits: caps.bits,
            max_nodes: caps.nodes,
            seed: g.seed.or(cfg.map(|c| c.seed)).unwrap_or(0),
            k_max: caps.k_max,
            l_max: caps.l_max,
            samples: caps.samples,
        })
    }

    pub fn orbit_caps(&self) -> OrbitCaps {
        OrbitCaps {
            max_points: self.max_words,
            max_bits: self.max_bits,
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CAPS: i32 = 2;
    pub const HYPOTHESIS: i32 = 3;
    pub const PARSE: i32 = 4;
}

pub(crate) fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Overflow { .. } => exit::CAPS,
        Error::Hypothesis(_) => exit::HYPOTHESIS,
        Error::Parse { .. } | Error::InvalidInput(_) | Error::DimensionMismatch { .. } => exit::PARSE,
        _ => exit::FAILURE,
    }
}

/// Captured result of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> Outcome {
    Outcome {
        stdout: String::new(),
        stderr: format!("error: {msg}\n"),
        code,
    }
}

/// Run the program on `args` (including the program name).
pub fn run_cli<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::PARSE } else { exit::OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    stdout: String::new(),
                    stderr: text,
                    code,
                }
            } else {
                Outcome {
                    stdout: text,
                    stderr: String::new(),
                    code,
                }
            };
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> Outcome {
    let start = Instant::now();
    let cfg = match &cli.global.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(exit::PARSE, format!("cannot read {}: {e}", path.display())),
            };
            match SystemConfig::parse(&text) {
                Ok(c) => Some(c),
                Err(e) => return fail(exit::PARSE, format!("{}: {e}", path.display())),
            }
        }
        None => None,
    };
    let settings = match Settings::resolve(&cli.global, cfg.as_ref()) {
        Ok(s) => s,
        Err(e) => return fail(exit_code(&e), e),
    };
    let body = || commands::dispatch(&cli.command, cfg.as_ref(), &settings);
    let result = match cli.global.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(body),
            Err(e) => return fail(exit::FAILURE, e),
        },
        None => body(),
    };
    let inputs = serde_json::json!({
        "config": cfg.as_ref().map(|c| serde_json::to_value(c).expect("config serializes")),
        "settings": settings,
        "args": cli.command.args_json(),
    });
    let mut report = Report::new(cli.command.name(), inputs);
    let mut stderr = String::new();
    let code = match result {
        Ok(out) => {
            let code = out.code;
            report.fill(out);
            code
        }
        Err(e) => {
            let code = exit_code(&e);
            stderr = format!("error: {e}\n");
            if code == exit::PARSE {
                return Outcome {
                    stdout: String::new(),
                    stderr,
                    code,
                };
            }
            if let Error::Overflow { .. } = e {
                report.caps_hit.push(e.to_string());
            }
            report.error = Some(e.to_string());
            code
        }
    };
    if cli.global.timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    let stdout = match cli.global.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    Outcome { stdout, stderr, code }
}
