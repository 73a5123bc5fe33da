//! Command-line front end.
//!
//! Every setting has one entry in [`SETTINGS`] and is resolved with the
//! precedence command line > config file > environment (threads only) >
//! default. Config files hold `key = value` lines; `#` starts a comment.
//!
//! | key | default | range |
//! |---|---|---|
//! | `ell` | `2` | integer ≥ 2 |
//! | `c` | `2+0i` | `a+bi`, `\|c − ℓ\| < 1` |
//! | `t` | `1.5` | `t > 1` |
//! | `K` | `50` | integer ≥ 1 |
//! | `n` | `4` | integer ≥ 1 |
//! | `prune` | `1e-14` | ≥ 0, relative to the level total |
//! | `tol` | `1e-11` | > 0 |
//! | `accuracy` | `5e-3` | > 0 |
//! | `budget` | `5000000` | integer ≥ 1 |
//! | `threads` | `0` | integer, 0 = machine parallelism |
//! | `seed-spacing` | `0.1` | > 0 |
//! | `out` | `-` | path, `-` = stdout |
//! | `format` | `auto` | `auto`, `csv`, `json` |
//! | `c-geo` | `2` | > 0 |
//! | `nodes` | `8` | integer ≥ 1 |
//! | `method` | `ladder` | `ladder`, `ratio`, `bound`, `zeta` |
//! | `base` | `auto` | `auto` or `a+bi` |
//! | `w` | `0.6931471805599453+0i` | `a+bi` |
//! | `verify` | `false` | `true`, `false` |
//! | `window` | `-6:6` | `a:b` with `a < b` |
//! | `res` | `600x600` | `NxM` |
//! | `max-iter` | `200` | integer ≥ 1 |
//! | `radius-eps` | `auto` | `auto` or > 0 |
//! | `c-end` | `2+0.3i` | `a+bi` |
//! | `steps` | `20` | integer ≥ 1 |
//! | `lift` | `1` | integer |
//! | `convention` | `exact` | `exact`, `unit` |
//! | `c-radius` | `0.1` | in `(0, 1)` |
//! | `samples` | `50` | integer ≥ 1 |
//! | `n-max` | `10` | integer ≥ 2 |
//! | `grid` | `5x5` | `NxM` |
//! | `half-width` | `0.1:0.1` | `a:b`, both ≥ 0 |

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, Command};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::analysis::{self, GridSpec, ParamDerivative};
use crate::classify;
use crate::dimension::{self, PressureEstimate, PressureLadder};
use crate::dynamics::{default_basin_radius, format_complex, parse_complex, repelling_fixed_point, CylinderPoint, MapParams};
use crate::error::Error;
use crate::preimage;
use crate::transfer::{self, TailModel, TreeConfig};

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "BOWEN_DIM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A configurable key, its default and the accepted values.
#[derive(Clone, Copy, Debug)]
pub struct Setting {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn s(key: &'static str, default: &'static str, help: &'static str) -> Setting {
    Setting { key, default, help }
}

/// The defaults table; see the module docs.
pub const SETTINGS: &[Setting] = &[
    s("ell", "2", "integer >= 2"),
    s("c", "2+0i", "parameter a+bi with |c - ell| < 1"),
    s("t", "1.5", "exponent, t > 1"),
    s("K", "50", "lift-index cutoff, >= 1"),
    s("n", "4", "tree depth or period, >= 1"),
    s("prune", "1e-14", "relative pruning threshold, >= 0"),
    s("tol", "1e-11", "residual tolerance, > 0"),
    s("accuracy", "5e-3", "target accuracy, > 0"),
    s("budget", "5000000", "node budget, >= 1"),
    s("threads", "0", "worker threads, 0 = machine parallelism"),
    s("seed-spacing", "0.1", "seed-grid spacing of the preimage check, > 0"),
    s("out", "-", "output path, - = stdout"),
    s("format", "auto", "auto, csv or json"),
    s("c-geo", "2", "tail-bound constant, > 0"),
    s("nodes", "8", "quadrature nodes per side, >= 1"),
    s("method", "ladder", "pressure method: ladder, ratio, bound or zeta"),
    s("base", "auto", "base point a+bi or auto"),
    s("w", "0.6931471805599453+0i", "target point a+bi"),
    s("verify", "false", "cross-check preimages against a seed grid (flag)"),
    s("window", "-6:6", "real window a:b"),
    s("res", "600x600", "resolution NxM"),
    s("max-iter", "200", "orbit iterations, >= 1"),
    s("radius-eps", "auto", "basin radius or auto"),
    s("c-end", "2+0.3i", "end of the continuation path"),
    s("steps", "20", "continuation steps, >= 1"),
    s("lift", "1", "lift index of the continued fixed point"),
    s("convention", "exact", "parameter derivative: exact or unit"),
    s("c-radius", "0.1", "parameter window radius, in (0, 1)"),
    s("samples", "50", "random words per depth, >= 1"),
    s("n-max", "10", "largest word length, >= 2"),
    s("grid", "5x5", "sweep grid NxM"),
    s("half-width", "0.1:0.1", "sweep half extents re:im"),
];

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("preimages", "preimages of w as CSV"),
    ("pressure", "P(t) as JSON"),
    ("dim", "zero of the pressure as JSON"),
    ("sweep", "dimension over a parameter grid as CSV"),
    ("classify", "orbit classification grid as PGM"),
    ("continue-orbit", "track a repelling fixed point as CSV"),
    ("expansion", "expansion constants over a parameter window as JSON"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Auto,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ladder,
    Ratio,
    Bound,
    Zeta,
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub ell: u32,
    pub c: Complex64,
    pub t: f64,
    pub k: i64,
    pub n: usize,
    pub prune: f64,
    pub tol: f64,
    pub accuracy: f64,
    pub budget: usize,
    pub threads: usize,
    pub seed_spacing: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub c_geo: f64,
    pub nodes: usize,
    pub method: Method,
    pub base: Option<Complex64>,
    pub w: Complex64,
    pub verify: bool,
    pub window: (f64, f64),
    pub res: (usize, usize),
    pub max_iter: usize,
    pub radius_eps: Option<f64>,
    pub c_end: Complex64,
    pub steps: usize,
    pub lift: i64,
    pub convention: ParamDerivative,
    pub c_radius: f64,
    pub samples: usize,
    pub n_max: usize,
    pub grid: (usize, usize),
    pub half_width: (f64, f64),
}

/// A bad flag, config line or value.
#[derive(Clone, Debug, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn setting(key: &str) -> Option<&'static Setting> {
    SETTINGS.iter().find(|s| s.key == key)
}

/// Parses a config file into `(key, value)` pairs.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(UsageError(format!("config line {}: expected key = value, got '{raw}'", i + 1)));
        };
        let key = k.trim().replace('_', "-");
        if setting(&key).is_none() {
            return Err(UsageError(format!("config line {}: unknown key '{}'", i + 1, k.trim())));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, UsageError> {
    v.parse().map_err(|_| invalid(key, v))
}

fn invalid(key: &str, v: &str) -> UsageError {
    let help = setting(key).map_or("", |s| s.help);
    UsageError(format!("invalid value '{v}' for --{key}: expected {help}"))
}

fn check<T>(key: &str, v: &str, value: T, ok: bool) -> Result<T, UsageError> {
    if ok {
        Ok(value)
    } else {
        Err(invalid(key, v))
    }
}

fn parse_pair<T: std::str::FromStr>(key: &str, v: &str, sep: char) -> Result<(T, T), UsageError> {
    let (a, b) = v.split_once(sep).ok_or_else(|| invalid(key, v))?;
    Ok((parse_num(key, a)?, parse_num(key, b)?))
}

fn parse_c(key: &str, v: &str) -> Result<Complex64, UsageError> {
    parse_complex(v).ok_or_else(|| invalid(key, v))
}

impl RunConfig {
    /// Merges defaults, config pairs, the thread environment variable and
    /// command-line pairs, later sources winning.
    pub fn resolve(cli: &[(String, String)], config: &[(String, String)], env_threads: Option<&str>) -> Result<Self, UsageError> {
        let mut map: BTreeMap<&str, String> = SETTINGS.iter().map(|s| (s.key, s.default.to_string())).collect();
        if let Some(v) = env_threads {
            map.insert("threads", v.to_string());
        }
        for (k, v) in config.iter().chain(cli) {
            let s = setting(k).ok_or_else(|| UsageError(format!("unknown setting '{k}'")))?;
            map.insert(s.key, v.clone());
        }
        Self::from_map(&map)
    }

    fn from_map(m: &BTreeMap<&str, String>) -> Result<Self, UsageError> {
        let g = |k: &str| m[k].as_str();
        let pos = |k: &str| -> Result<f64, UsageError> {
            let x: f64 = parse_num(k, g(k))?;
            check(k, g(k), x, x > 0.0 && x.is_finite())
        };
        let count = |k: &str, min: usize| -> Result<usize, UsageError> {
            let x: usize = parse_num(k, g(k))?;
            check(k, g(k), x, x >= min)
        };
        let ell: u32 = parse_num("ell", g("ell"))?;
        let ell = check("ell", g("ell"), ell, ell >= 2)?;
        let t: f64 = parse_num("t", g("t"))?;
        let prune: f64 = parse_num("prune", g("prune"))?;
        let k: i64 = parse_num("K", g("K"))?;
        let format = match g("format") {
            "auto" => Format::Auto,
            "csv" => Format::Csv,
            "json" => Format::Json,
            v => return Err(invalid("format", v)),
        };
        let method = match g("method") {
            "ladder" => Method::Ladder,
            "ratio" => Method::Ratio,
            "bound" => Method::Bound,
            "zeta" => Method::Zeta,
            v => return Err(invalid("method", v)),
        };
        let convention = match g("convention") {
            "exact" => ParamDerivative::Exact,
            "unit" => ParamDerivative::Unit,
            v => return Err(invalid("convention", v)),
        };
        let window: (f64, f64) = parse_pair("window", g("window"), ':')?;
        let res: (usize, usize) = parse_pair("res", g("res"), 'x')?;
        let grid: (usize, usize) = parse_pair("grid", g("grid"), 'x')?;
        let half_width: (f64, f64) = parse_pair("half-width", g("half-width"), ':')?;
        let c_radius = pos("c-radius")?;
        Ok(Self {
            ell,
            c: parse_c("c", g("c"))?,
            t: check("t", g("t"), t, t > 1.0 && t.is_finite())?,
            k: check("K", g("K"), k, k >= 1)?,
            n: count("n", 1)?,
            prune: check("prune", g("prune"), prune, prune >= 0.0 && prune.is_finite())?,
            tol: pos("tol")?,
            accuracy: pos("accuracy")?,
            budget: count("budget", 1)?,
            threads: count("threads", 0)?,
            seed_spacing: pos("seed-spacing")?,
            out: (g("out") != "-").then(|| PathBuf::from(g("out"))),
            format,
            c_geo: pos("c-geo")?,
            nodes: count("nodes", 1)?,
            method,
            base: match g("base") {
                "auto" => None,
                v => Some(parse_c("base", v)?),
            },
            w: parse_c("w", g("w"))?,
            verify: parse_num("verify", g("verify"))?,
            window: check("window", g("window"), window, window.0 < window.1 && window.0.is_finite() && window.1.is_finite())?,
            res: check("res", g("res"), res, res.0 >= 1 && res.1 >= 1)?,
            max_iter: count("max-iter", 1)?,
            radius_eps: match g("radius-eps") {
                "auto" => None,
                _ => Some(pos("radius-eps")?),
            },
            c_end: parse_c("c-end", g("c-end"))?,
            steps: count("steps", 1)?,
            lift: parse_num("lift", g("lift"))?,
            convention,
            c_radius: check("c-radius", g("c-radius"), c_radius, c_radius < 1.0)?,
            samples: count("samples", 1)?,
            n_max: count("n-max", 2)?,
            grid: check("grid", g("grid"), grid, grid.0 >= 1 && grid.1 >= 1)?,
            half_width: check("half-width", g("half-width"), half_width, half_width.0 >= 0.0 && half_width.1 >= 0.0)?,
        })
    }

    pub fn params(&self) -> crate::Result<MapParams> {
        MapParams::new(self.ell, self.c)
    }

    /// Tree settings shared by the ratio estimators.
    pub fn tree(&self, tail: TailModel) -> TreeConfig {
        TreeConfig { k: self.k, prune: self.prune, budget: self.budget, tail, c_geo: self.c_geo, tol: self.tol }
    }
}

fn command() -> Command {
    let mut cmd = Command::new("bowen-dim")
        .about("Pressure and Bowen dimension for f(z) = lz + c - (l-1) log c - e^z on the cylinder")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("PATH").help("key = value settings file"));
    for st in SETTINGS {
        let mut arg = Arg::new(st.key).long(st.key).global(true).help(format!("{} [default: {}]", st.help, st.default));
        arg = if st.key == "verify" { arg.action(ArgAction::SetTrue) } else { arg.action(ArgAction::Set).allow_hyphen_values(true) };
        cmd = cmd.arg(arg);
    }
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

/// Runs the program on `argv` (including the program name) and returns
/// the exit code. Artifacts go to `--out` or `stdout`; the summary line
/// goes to `stdout` when the artifact is a file and to `stderr` otherwise.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stdout, "{}", e.render());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_USAGE
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
            return code;
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        let _ = writeln!(stderr, "error: missing subcommand");
        return EXIT_USAGE;
    };
    let cli: Vec<(String, String)> = SETTINGS
        .iter()
        .filter_map(|s| {
            if s.key == "verify" {
                sub.get_flag(s.key).then(|| (s.key.to_string(), "true".to_string()))
            } else {
                sub.get_one::<String>(s.key).map(|v| (s.key.to_string(), v.clone()))
            }
        })
        .collect();
    let config = match sub.get_one::<String>("config") {
        None => Vec::new(),
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {path}: {e}");
                    return EXIT_USAGE;
                }
            },
            Err(e) => {
                let _ = writeln!(stderr, "error: --config {path}: {e}");
                return EXIT_USAGE;
            }
        },
    };
    let env_threads = std::env::var(THREADS_ENV).ok();
    let cfg = match RunConfig::resolve(&cli, &config, env_threads.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: --threads {}: {e}", cfg.threads);
            return EXIT_USAGE;
        }
    };
    let outcome = pool.install(|| dispatch(name, &cfg));
    match outcome {
        Ok(out) => match emit(&cfg, &out, stdout, stderr) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_IO
            }
        },
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Numerical(e)) => {
            let _ = writeln!(stderr, "{}", failure_json(&e));
            EXIT_NUMERICAL
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_IO
        }
    }
}

/// Machine-readable description of a numerical failure, with the partial
/// trace when there is one.
pub fn failure_json(e: &Error) -> Value {
    let (kind, detail) = match e {
        Error::NoBracket { trace } => ("NoBracket", json!({ "trace": serde_json::from_str::<Value>(trace).unwrap_or(Value::Null) })),
        Error::BudgetExceeded { budget, partial } => ("BudgetExceeded", json!({ "budget": budget, "partial": partial })),
        Error::AccuracyNotReached { requested, reached, value } => {
            ("AccuracyNotReached", json!({ "requested": requested, "reached": reached, "value": value }))
        }
        Error::StepRejected { c } => ("StepRejected", json!({ "c": c })),
        Error::DenominatorNearOne(d) => ("DenominatorNearOne", json!({ "denominator": d })),
        Error::NoExpansion { n, modulus } => ("NoExpansion", json!({ "n": n, "modulus": modulus })),
        Error::BranchMiss { k, depth } => ("BranchMiss", json!({ "k": k, "depth": depth })),
        _ => ("Error", Value::Null),
    };
    json!({ "error": kind, "message": e.to_string(), "detail": detail })
}

enum Failure {
    Usage(String),
    Numerical(Error),
    Io(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_) | Error::InvalidTol(_) | Error::InvalidArgument(_) | Error::TNotSummable(_) | Error::InsufficientGrid { .. } => {
                Failure::Usage(e.to_string())
            }
            Error::Io { .. } => Failure::Io(e),
            _ => Failure::Numerical(e),
        }
    }
}

/// A numeric table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
}

/// What a subcommand produced.
enum Output {
    Table { columns: Vec<&'static str>, rows: Vec<Vec<Cell>>, summary: String },
    Object { value: Value, summary: String },
    Binary { bytes: Vec<u8>, summary: String },
}

/// 17 significant digits, which round-trip every `f64`.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn csv_bytes(columns: &[&str], rows: &[Vec<Cell>]) -> std::result::Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row.iter().map(|c| match c {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => format_real(*x),
        }))?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn json_rows(columns: &[&str], rows: &[Vec<Cell>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|row| {
                let obj = columns.iter().zip(row).map(|(k, c)| {
                    let v = match c {
                        Cell::Int(i) => json!(i),
                        Cell::Real(x) => json!(x),
                    };
                    (k.to_string(), v)
                });
                Value::Object(obj.collect())
            })
            .collect(),
    )
}

fn emit(cfg: &RunConfig, out: &Output, stdout: &mut dyn Write, stderr: &mut dyn Write) -> crate::Result<()> {
    let (bytes, summary) = match out {
        Output::Table { columns, rows, summary } => {
            let bytes = match cfg.format {
                Format::Json => {
                    let mut b = serde_json::to_vec_pretty(&json_rows(columns, rows)).map_err(|e| Error::io("json", e))?;
                    b.push(b'\n');
                    b
                }
                _ => csv_bytes(columns, rows).map_err(|e| Error::io("csv", e))?,
            };
            (bytes, summary)
        }
        Output::Object { value, summary } => {
            let mut b = serde_json::to_vec_pretty(value).map_err(|e| Error::io("json", e))?;
            b.push(b'\n');
            (b, summary)
        }
        Output::Binary { bytes, summary } => (bytes.clone(), summary),
    };
    match &cfg.out {
        Some(path) => {
            write_file(path, &bytes)?;
            writeln!(stdout, "{summary}").map_err(|e| Error::io("stdout", e))?;
        }
        None => {
            stdout.write_all(&bytes).map_err(|e| Error::io("stdout", e))?;
            writeln!(stderr, "{summary}").map_err(|e| Error::io("stderr", e))?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn dispatch(name: &str, cfg: &RunConfig) -> Result<Output, Failure> {
    let object_only = matches!(name, "pressure" | "dim" | "expansion");
    if object_only && cfg.format == Format::Csv {
        return Err(Failure::Usage(format!("invalid value 'csv' for --format: {name} writes json")));
    }
    if name == "classify" && cfg.format != Format::Auto {
        return Err(Failure::Usage("invalid --format for classify: it writes pgm".into()));
    }
    let params = cfg.params()?;
    match name {
        "preimages" => run_preimages(cfg, &params),
        "pressure" => run_pressure(cfg, &params),
        "dim" => run_dim(cfg, &params),
        "sweep" => run_sweep(cfg),
        "classify" => run_classify(cfg, &params),
        "continue-orbit" => run_continue(cfg, &params),
        "expansion" => run_expansion(cfg, &params),
        other => Err(Failure::Usage(format!("unknown subcommand '{other}'"))),
    }
}

fn run_preimages(cfg: &RunConfig, params: &MapParams) -> Result<Output, Failure> {
    let w = CylinderPoint::from_complex(cfg.w);
    let set = preimage::preimages(params, w, cfg.k, cfg.tol)?;
    let columns = vec!["k", "sheet", "re", "im", "deriv_re", "deriv_im", "residual"];
    let rows = set
        .branches
        .iter()
        .map(|e| {
            vec![
                Cell::Int(e.branch.k),
                Cell::Int(i64::from(e.branch.sheet)),
                Cell::Real(e.x.re()),
                Cell::Real(e.x.im()),
                Cell::Real(e.deriv.re),
                Cell::Real(e.deriv.im),
                Cell::Real(e.residual),
            ]
        })
        .collect();
    let mut summary = format!(
        "preimages: {} validated over |k| <= {}, {} missed indices, max residual {:.3e}",
        set.len(),
        cfg.k,
        set.misses.len(),
        set.branches.iter().map(|e| e.residual).fold(0.0, f64::max)
    );
    if cfg.verify {
        let right = (std::f64::consts::TAU * cfg.k as f64).ln() + 1.0;
        let lo = -2.0 * params.ell_f64();
        let oracle = preimage::seed_grid_preimages(params, w, (lo, right), cfg.k, cfg.seed_spacing, cfg.tol)?;
        let in_box: Vec<_> = set.branches.iter().filter(|e| e.x.re() >= lo && e.x.re() <= right).collect();
        let matched = oracle.iter().filter(|p| in_box.iter().any(|e| e.x.distance(p) < 1e-9)).count();
        summary.push_str(&format!(
            "; seed grid on Re in [{lo}, {right:.4}]: {} found, {} in the set, {matched} matched",
            oracle.len(),
            in_box.len()
        ));
    }
    Ok(Output::Table { columns, rows, summary })
}

fn estimate_json(e: &PressureEstimate, base: CylinderPoint) -> Value {
    json!({
        "t": e.t,
        "value": e.value,
        "error": e.uncertainty,
        "n": e.n,
        "K": e.k,
        "prune": e.prune,
        "base": { "re": base.re(), "im": base.im() },
        "method": format!("{:?}", e.method).to_lowercase(),
        "drift": e.drift,
    })
}

fn base_point(cfg: &RunConfig, params: &MapParams) -> Result<CylinderPoint, Failure> {
    Ok(match cfg.base {
        Some(b) => CylinderPoint::from_complex(b),
        None => transfer::default_base_point(params)?,
    })
}

fn ladder(cfg: &RunConfig, params: &MapParams) -> PressureLadder {
    let mut ladder = PressureLadder::for_params(params);
    for r in &mut ladder.rungs {
        r.tree.budget = cfg.budget;
        r.tree.c_geo = cfg.c_geo;
        r.tree.tol = cfg.tol;
    }
    ladder
}

fn run_pressure(cfg: &RunConfig, params: &MapParams) -> Result<Output, Failure> {
    let base = base_point(cfg, params)?;
    let est = match cfg.method {
        Method::Ladder => dimension::pressure_at(params, cfg.t, base, cfg.accuracy, &ladder(cfg, params))?,
        Method::Ratio => transfer::pressure_ratio_with(params, cfg.t, base, cfg.n, &cfg.tree(TailModel::Quadrature { nodes: cfg.nodes }))?,
        Method::Bound => transfer::pressure_ratio_with(params, cfg.t, base, cfg.n, &cfg.tree(TailModel::Bound))?,
        Method::Zeta => transfer::zeta_pressure(params, cfg.t, cfg.n, cfg.k)?.estimate,
    };
    let summary = format!("P({}) = {} ± {:.3e} (n = {}, K = {})", cfg.t, est.value, est.uncertainty, est.n, est.k);
    Ok(Output::Object { value: estimate_json(&est, base), summary })
}

fn ladder_json(ladder: &PressureLadder) -> Value {
    Value::Array(
        ladder
            .rungs
            .iter()
            .map(|r| {
                let nodes = match r.tree.tail {
                    TailModel::Quadrature { nodes } => json!(nodes),
                    TailModel::Bound => Value::Null,
                };
                json!({ "n": r.n, "K": r.tree.k, "prune": r.tree.prune, "nodes": nodes, "budget": r.tree.budget })
            })
            .collect(),
    )
}

fn run_dim(cfg: &RunConfig, params: &MapParams) -> Result<Output, Failure> {
    let ladder = ladder(cfg, params);
    let rec = dimension::bowen_dimension_with(params, cfg.accuracy, &ladder)?;
    let value = json!({
        "ell": rec.ell,
        "c_re": rec.c.re,
        "c_im": rec.c.im,
        "t_star": rec.t_star,
        "uncertainty": rec.uncertainty,
        "t_lo": rec.bracket.0,
        "t_hi": rec.bracket.1,
        "evaluations": rec.evaluations,
        "method_params": { "accuracy": cfg.accuracy, "ladder": ladder_json(&ladder) },
        "diagnostics": rec.diagnostics,
    });
    let summary = format!(
        "t* = {} ± {:.3e} at c = {}, bracket [{}, {}], {} evaluations",
        rec.t_star,
        rec.uncertainty,
        format_complex(rec.c),
        rec.bracket.0,
        rec.bracket.1,
        rec.evaluations
    );
    Ok(Output::Object { value, summary })
}

fn run_sweep(cfg: &RunConfig) -> Result<Output, Failure> {
    let spec = GridSpec { center: cfg.c, half_width: cfg.half_width, nx: cfg.grid.0, ny: cfg.grid.1 };
    let grid = analysis::sweep_dimension(cfg.ell, &spec, cfg.accuracy)?;
    let columns = vec!["c_re", "c_im", "t_star", "uncertainty", "t_lo", "t_hi", "grad_re", "grad_im", "fit_residual", "sym_defect"];
    let rows = grid
        .records
        .iter()
        .zip(&grid.cells)
        .map(|(r, d)| {
            [r.c.re, r.c.im, r.t_star, r.uncertainty, r.bracket.0, r.bracket.1, d.grad.0, d.grad.1, d.fit_residual, d.sym_defect]
                .into_iter()
                .map(Cell::Real)
                .collect()
        })
        .collect();
    let failed = grid.records.iter().filter(|r| r.t_star.is_nan()).count();
    let (max_jump, median_jump) = analysis::jump_summary(&grid);
    let summary = format!(
        "sweep: {} cells, {failed} failed, adjacent jump max {max_jump:.3e} median {median_jump:.3e}",
        grid.records.len()
    );
    Ok(Output::Table { columns, rows, summary })
}

fn run_classify(cfg: &RunConfig, params: &MapParams) -> Result<Output, Failure> {
    if cfg.out.is_none() {
        return Err(Failure::Usage("classify writes binary PGM: --out PATH is required".into()));
    }
    let eps = cfg.radius_eps.unwrap_or_else(|| default_basin_radius(params));
    let grid = classify::classify_grid(params, cfg.window, cfg.res.0, cfg.res.1, cfg.max_iter, eps)?;
    let bytes = classify::pgm_bytes(&grid)?;
    use crate::dynamics::OrbitTag::*;
    let summary = format!(
        "classify {}x{}: attracted {:.4}, baker {:.4}, escape {:.4}, unresolved {:.4}",
        grid.nx,
        grid.ny,
        grid.fraction(AttractedToLogC),
        grid.fraction(BakerEscape),
        grid.fraction(EscapePlusInfinity),
        grid.fraction(Unresolved)
    );
    Ok(Output::Binary { bytes, summary })
}

fn run_continue(cfg: &RunConfig, params: &MapParams) -> Result<Output, Failure> {
    let p = repelling_fixed_point(params, cfg.lift)
        .ok_or_else(|| Failure::Numerical(Error::InvalidArgument(format!("no repelling fixed point with lift index {}", cfg.lift))))?;
    let path: Vec<Complex64> = (1..=cfg.steps).map(|j| cfg.c + (cfg.c_end - cfg.c) * (j as f64 / cfg.steps as f64)).collect();
    let track = analysis::continue_periodic(params, &p, &path, cfg.tol, cfg.convention)?;
    let columns = vec!["c_re", "c_im", "z_re", "z_im", "mult_abs", "residual", "h_prime_re", "h_prime_im"];
    let mut rows = Vec::with_capacity(track.path.len());
    for q in &track.path {
        rows.push(
            [q.c.re, q.c.im, q.z.re(), q.z.im(), q.multiplier.norm(), q.residual, q.h_prime.re, q.h_prime.im]
                .into_iter()
                .map(Cell::Real)
                .collect(),
        );
    }
    let max_res = track.path.iter().map(|q| q.residual).fold(0.0, f64::max);
    let min_mult = track.path.iter().map(|q| q.multiplier.norm()).fold(f64::INFINITY, f64::min);
    let end = track.path.last().map_or(p.point, |q| q.z);
    let summary = format!(
        "continued to c = {}: z = {}, max residual {max_res:.3e}, min |multiplier| {min_mult:.4}",
        format_complex(cfg.c_end),
        format_complex(end.lift())
    );
    Ok(Output::Table { columns, rows, summary })
}

fn run_expansion(cfg: &RunConfig, params: &MapParams) -> Result<Output, Failure> {
    let est = analysis::expansion_constants(params, cfg.c_radius, cfg.samples, cfg.n_max)?;
    let window = analysis::window_parameters(params, cfg.c_radius, 5)?;
    let value = json!({
        "L": est.l,
        "kappa": est.kappa,
        "L_inv": est.l_inv,
        "beta": est.beta,
        "samples": est.samples,
        "n_max": est.n_max,
        "c_re": params.c().re,
        "c_im": params.c().im,
        "c_radius": cfg.c_radius,
        "window": window.iter().map(|p| json!({ "c_re": p.c().re, "c_im": p.c().im })).collect::<Vec<_>>(),
        "residuals": est.residuals,
        "certified": est.certifies_expansion() && est.certifies(&est.observations),
    });
    let summary = format!("expansion: L = {:.6}, kappa = {:.6}, beta*kappa = {:.4}", est.l, est.kappa, est.beta * est.kappa);
    Ok(Output::Object { value, summary })
}
