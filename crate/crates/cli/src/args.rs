//! Flags, the `key = value` config file, and their merge.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use covlab_core::{ComplexPoint, EnsembleConfig, EntryDistribution, TestFunction};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    Density,
    Transform,
    Expansion,
    Clt,
    VarianceQuad,
    Scaling,
    Verify,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Density => "density",
            Verb::Transform => "transform",
            Verb::Expansion => "expansion",
            Verb::Clt => "clt",
            Verb::VarianceQuad => "variance-quad",
            Verb::Scaling => "scaling",
            Verb::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Spectral points are written `re,im`.
pub fn parse_point(s: &str) -> Result<ComplexPoint, String> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| format!("expected re,im but got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("malformed number {v:?} in {s:?}"))
    };
    let z = ComplexPoint::new(parse(re)?, parse(im)?);
    z.upper()
        .map_err(|_| format!("z = {s} must have a positive imaginary part"))
}

fn parse_phi(name: &str) -> Result<TestFunction, CliError> {
    TestFunction::builtin(name.trim()).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown test function {name:?} (known: {})",
            TestFunction::builtin_names().join(", ")
        ))
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "covlab",
    version,
    about = "Sample covariance spectral laboratory"
)]
struct Flags {
    /// What to compute.
    #[arg(value_enum)]
    verb: Verb,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// gaussian, rademacher, uniform or two_point:p
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Spectral point `re,im`; repeatable.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    z: Vec<ComplexPoint>,
    /// Test function name; repeatable.
    #[arg(long)]
    phi: Vec<String>,
    /// Truncation exponent in (0, 1/4).
    #[arg(long)]
    t: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record wall-clock time in the report (breaks byte-identical output).
    #[arg(long)]
    timing: bool,
}

/// Keys accepted in a config file.
#[derive(Debug, Default)]
struct FileSettings {
    n: Option<usize>,
    m: Option<usize>,
    dist: Option<String>,
    replicas: Option<usize>,
    seed: Option<u64>,
    z: Vec<ComplexPoint>,
    phi: Vec<String>,
    t: Option<f64>,
    threads: Option<usize>,
    format: Option<Format>,
}

fn parse_file(path: &Path) -> Result<FileSettings, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut s = FileSettings::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad =
            |msg: String| CliError::Usage(format!("{}:{}: {msg}", path.display(), lineno + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("malformed number {v:?}"))
        }
        match key {
            "n" => s.n = Some(num(value).map_err(bad)?),
            "m" => s.m = Some(num(value).map_err(bad)?),
            "dist" => s.dist = Some(value.to_string()),
            "replicas" => s.replicas = Some(num(value).map_err(bad)?),
            "seed" => s.seed = Some(num(value).map_err(bad)?),
            "z" => s.z.push(parse_point(value).map_err(bad)?),
            "phi" => s.phi.extend(
                value
                    .split(',')
                    .map(|p| p.trim().to_string())
                    .filter(|p| !p.is_empty()),
            ),
            "t" => s.t = Some(num(value).map_err(bad)?),
            "threads" => s.threads = Some(num(value).map_err(bad)?),
            "format" => {
                s.format = Some(
                    Format::from_str(value, true)
                        .map_err(|_| bad(format!("unknown format {value:?}")))?,
                )
            }
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    Ok(s)
}

/// A fully resolved command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub verb: Verb,
    pub config: EnsembleConfig,
    /// Truncation exponent, kept alongside the derived threshold.
    pub t: Option<f64>,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub timing: bool,
}

pub const DEFAULT_N: usize = 64;
pub const DEFAULT_M: usize = 4096;
pub const DEFAULT_REPLICAS: usize = 2000;
pub const DEFAULT_SEED: u64 = 42;

/// Parses `argv` (program name first). Config keys are read from
/// `config_file`, or from `--config` when that is absent; flags override
/// them, and a `--z`/`--phi` flag replaces the whole list from the file.
pub fn parse_invocation(
    argv: &[String],
    config_file: Option<&Path>,
) -> Result<Invocation, CliError> {
    let flags = Flags::try_parse_from(argv).map_err(CliError::Clap)?;
    let file = match config_file.or(flags.config.as_deref()) {
        Some(path) => parse_file(path)?,
        None => FileSettings::default(),
    };

    let n = flags.n.or(file.n).unwrap_or(DEFAULT_N);
    let m = flags.m.or(file.m).unwrap_or(DEFAULT_M);
    let dist: EntryDistribution = flags
        .dist
        .or(file.dist)
        .as_deref()
        .unwrap_or("gaussian")
        .parse()
        .map_err(|e: covlab_core::Error| CliError::Usage(e.to_string()))?;
    let z_list = match (flags.z.is_empty(), file.z.is_empty()) {
        (false, _) => flags.z,
        (true, false) => file.z,
        (true, true) => vec![ComplexPoint::imaginary(2.0)],
    };
    let phi_names = match (flags.phi.is_empty(), file.phi.is_empty()) {
        (false, _) => flags.phi,
        (true, false) => file.phi,
        (true, true) => vec!["x2".to_string()],
    };
    let phi_list = phi_names
        .iter()
        .map(|p| parse_phi(p))
        .collect::<Result<Vec<_>, _>>()?;

    let mut config = EnsembleConfig::new(n, m, dist)
        .with_replicas(flags.replicas.or(file.replicas).unwrap_or(DEFAULT_REPLICAS))
        .with_seed(flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED))
        .with_z(z_list)
        .with_phi(phi_list);
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let t = flags.t.or(file.t);
    if let Some(t) = t {
        config = config
            .with_truncation(t)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }

    Ok(Invocation {
        verb: flags.verb,
        config,
        t,
        threads: flags.threads.or(file.threads).unwrap_or(0),
        out: flags.out,
        format: flags.format.or(file.format).unwrap_or_default(),
        timing: flags.timing,
    })
}

/// A config file that parses back to `inv`'s experiment settings.
pub fn config_file_text(inv: &Invocation) -> String {
    let c = &inv.config;
    let mut s = String::new();
    let _ = writeln!(s, "# {} settings", inv.verb.as_str());
    let _ = writeln!(s, "n = {}", c.n);
    let _ = writeln!(s, "m = {}", c.m);
    let _ = writeln!(s, "dist = {}", c.dist);
    let _ = writeln!(s, "replicas = {}", c.replicas);
    let _ = writeln!(s, "seed = {}", c.seed);
    for z in &c.z_list {
        let _ = writeln!(s, "z = {},{}", z.re, z.im);
    }
    for phi in &c.phi_list {
        let _ = writeln!(s, "phi = {}", phi.name());
    }
    if let Some(t) = inv.t {
        let _ = writeln!(s, "t = {t}");
    }
    let _ = writeln!(s, "threads = {}", inv.threads);
    let _ = writeln!(s, "format = {}", inv.format.as_str());
    s
}
