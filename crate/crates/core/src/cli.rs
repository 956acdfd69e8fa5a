//! Command-line parsing, run configuration and table output.
//!
//! ```text
//! monofem study --model fhn --mode homogeneous --levels 1/8,1/16,1/32 --t-final 0.25 --dt h2
//! monofem study --model ap --param mu2=0.3 --format md --out table.md
//! monofem study --config run.conf
//! monofem mesh --h 1/8 --out mesh.txt
//! ```
//!
//! A config file holds one `key = value` pair per line, where keys are the
//! long flag names of `study` (`#` starts a comment). Flags given on the
//! command line override the file.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::fem::DiffusionTensor;
use crate::ionic::{IonicModel, ModelKind};
use crate::mesh::Bounds;
use crate::sparse::CgOptions;
use crate::verification::{ConvergenceRecord, Level, Reference, StudyConfig, StudyMode};

/// Environment variable overriding the CG relative tolerance.
pub const CG_TOL_ENV: &str = "MONOFEM_CG_TOL";

#[derive(Debug, Parser)]
#[command(name = "monofem", version, about = "Monodomain P1 finite-element solver and convergence study")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a refinement study and print the convergence table.
    Study(StudyArgs),
    /// Write the uniform mesh of the default square as text.
    Mesh(MeshArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Homogeneous,
    Manufactured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceKind {
    /// ODE oracle or manufactured exact solution.
    Exact,
    /// Run one level finer and compare at shared nodes.
    FineGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    HSquared,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Scalar(f64),
    Diagonal(f64, f64),
}

impl Diffusion {
    pub fn tensor(&self) -> DiffusionTensor {
        match *self {
            Diffusion::Scalar(s) => DiffusionTensor::Scalar(s),
            Diffusion::Diagonal(a, b) => DiffusionTensor::Diagonal(a, b),
        }
    }
}

/// Parses `0.125`, `1/8` or `2.5/20`.
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("invalid number '{s}'"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("invalid number '{s}'"))?;
            num / den
        }
        None => s.parse().map_err(|_| format!("invalid number '{s}'"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{s}' is not a finite number"))
    }
}

/// Formats `x` as `1/n` when that is exact, otherwise as the shortest
/// round-tripping decimal.
pub fn format_number(x: f64) -> String {
    if x > 0.0 && x < 1.0 {
        let n = (1.0 / x).round();
        if n.is_finite() && n < 1e15 && 1.0 / n == x {
            return format!("1/{n}");
        }
    }
    format!("{x}")
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}

fn parse_dt(s: &str) -> std::result::Result<DtRule, String> {
    if s == "h2" {
        return Ok(DtRule::HSquared);
    }
    let v = parse_number(s)?;
    if v > 0.0 {
        Ok(DtRule::Fixed(v))
    } else {
        Err(format!("time step must be positive, got '{s}'"))
    }
}

fn parse_diffusion(s: &str) -> std::result::Result<Diffusion, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [sigma] => Ok(Diffusion::Scalar(parse_number(sigma)?)),
        [a, b] => Ok(Diffusion::Diagonal(parse_number(a)?, parse_number(b)?)),
        _ => Err(format!("diffusion must be 'sigma' or 'a,b', got '{s}'")),
    }
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("parameter override must look like name=value, got '{s}'"))?;
    Ok((key.trim().to_string(), parse_number(value)?))
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// Ionic model.
    #[arg(long, value_parser = parse_model, default_value = "fhn")]
    pub model: ModelKind,
    #[arg(long, value_enum, default_value = "homogeneous")]
    pub mode: Mode,
    /// Mesh spacings, e.g. 1/8,1/16,1/32.
    #[arg(long, value_delimiter = ',', value_parser = parse_number, default_value = "1/8,1/16,1/32,1/64")]
    pub levels: Vec<f64>,
    #[arg(long = "t-final", value_parser = parse_number, default_value = "0.25")]
    pub t_final: f64,
    /// `h2` for dt = h², or a fixed value.
    #[arg(long, value_parser = parse_dt, default_value = "h2")]
    pub dt: DtRule,
    /// `sigma` for σ·I or `a,b` for diag(a, b).
    #[arg(long, value_parser = parse_diffusion, default_value = "1")]
    pub diffusion: Diffusion,
    /// Ionic parameter override `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[arg(long = "cg-tol", value_parser = parse_number, default_value = "1e-10")]
    pub cg_tol: f64,
    /// Temporal sweep: keep h fixed and use --dt-levels.
    #[arg(long = "fixed-h", value_parser = parse_number, requires = "dt_levels")]
    pub fixed_h: Option<f64>,
    /// Time steps of a fixed-h sweep.
    #[arg(long = "dt-levels", value_delimiter = ',', value_parser = parse_number, requires = "fixed_h")]
    pub dt_levels: Vec<f64>,
    /// Manufactured solution wavenumber index m (ω = mπ/2.5).
    #[arg(long = "wave-mode", default_value_t = 1)]
    pub wave_mode: u32,
    #[arg(long, value_enum, default_value = "exact")]
    pub reference: ReferenceKind,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every solver step of every level as CSV into this directory.
    #[arg(long = "dump-dir")]
    pub dump_dir: Option<PathBuf>,
    /// Run levels one after another instead of in parallel.
    #[arg(long)]
    pub serial: bool,
    /// Read `key = value` defaults from a file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MeshArgs {
    #[arg(long, value_parser = parse_number, default_value = "1/8")]
    pub h: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved study configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: IonicModel,
    pub mode: Mode,
    pub levels: Vec<f64>,
    pub t_final: f64,
    pub dt: DtRule,
    pub diffusion: Diffusion,
    pub cg_tol: f64,
    pub fixed_h: Option<f64>,
    pub dt_levels: Vec<f64>,
    pub wave_mode: u32,
    pub reference: ReferenceKind,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
    pub serial: bool,
}

fn usage(e: clap::Error) -> Error {
    Error::Usage(e.to_string().trim_end().to_string())
}

/// Turns `key = value` lines into `--key value` arguments.
pub fn config_text_to_args(text: &str) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected 'key = value'", lineno + 1)))?;
        let key = key.trim();
        if key == "config" {
            return Err(Error::Usage(format!("config line {}: nested config files are not supported", lineno + 1)));
        }
        let value = value.trim();
        if matches!(key, "serial") {
            if value == "true" {
                args.push(format!("--{key}"));
            }
            continue;
        }
        args.push(format!("--{key}"));
        args.push(value.to_string());
    }
    Ok(args)
}

impl RunConfig {
    fn from_args(args: StudyArgs) -> Result<Self> {
        let mut model = IonicModel::new(args.model);
        for (name, value) in &args.params {
            model.set_param(name, *value)?;
        }
        let cfg = RunConfig {
            model,
            mode: args.mode,
            levels: args.levels,
            t_final: args.t_final,
            dt: args.dt,
            diffusion: args.diffusion,
            cg_tol: args.cg_tol,
            fixed_h: args.fixed_h,
            dt_levels: args.dt_levels,
            wave_mode: args.wave_mode,
            reference: args.reference,
            format: args.format,
            out: args.out,
            dump_dir: args.dump_dir,
            serial: args.serial,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let strictly_decreasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] < w[0]);
        if self.levels.is_empty() || self.levels.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Usage("--levels needs at least one positive spacing".into()));
        }
        if !strictly_decreasing(&self.levels) {
            return Err(Error::Usage("--levels must be strictly decreasing".into()));
        }
        if self.fixed_h.is_some()
            && (self.dt_levels.iter().any(|&k| !(k > 0.0)) || !strictly_decreasing(&self.dt_levels))
        {
            return Err(Error::Usage("--dt-levels must be positive and strictly decreasing".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::Usage("--t-final must be positive".into()));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::Usage("--cg-tol must lie in (0, 1)".into()));
        }
        let (a, b) = match self.diffusion {
            Diffusion::Scalar(s) => (s, s),
            Diffusion::Diagonal(a, b) => (a, b),
        };
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Usage("--diffusion must be positive definite".into()));
        }
        Ok(())
    }

    /// Applies the CG tolerance from `MONOFEM_CG_TOL`, if given.
    pub fn apply_env_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            let tol = parse_number(v).map_err(|e| Error::Usage(format!("{CG_TOL_ENV}: {e}")))?;
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::Usage(format!("{CG_TOL_ENV} must lie in (0, 1), got {v}")));
            }
            self.cg_tol = tol;
        }
        Ok(())
    }

    /// Refinement levels with their time steps.
    pub fn study_levels(&self) -> Vec<Level> {
        match self.fixed_h {
            Some(h) => self.dt_levels.iter().map(|&dt| Level { h, dt }).collect(),
            None => self
                .levels
                .iter()
                .map(|&h| Level {
                    h,
                    dt: match self.dt {
                        DtRule::HSquared => h * h,
                        DtRule::Fixed(k) => k,
                    },
                })
                .collect(),
        }
    }

    fn reference_level(&self, levels: &[Level]) -> Level {
        let finest = *levels.last().expect("validated non-empty");
        match (self.fixed_h, self.dt) {
            (Some(h), _) => Level { h, dt: finest.dt / 4.0 },
            (None, DtRule::HSquared) => {
                let h = finest.h / 2.0;
                Level { h, dt: h * h }
            }
            (None, DtRule::Fixed(k)) => Level { h: finest.h / 2.0, dt: k },
        }
    }

    pub fn study_config(&self) -> StudyConfig {
        let levels = self.study_levels();
        StudyConfig {
            model: self.model,
            mode: match self.mode {
                Mode::Homogeneous => StudyMode::Homogeneous { v0: 0.2, w0: 0.1 },
                Mode::Manufactured => StudyMode::Manufactured { mode: self.wave_mode },
            },
            reference: match self.reference {
                ReferenceKind::Exact => Reference::Exact,
                ReferenceKind::FineGrid => Reference::FineGrid(self.reference_level(&levels)),
            },
            levels,
            t_final: self.t_final,
            diffusion: self.diffusion.tensor(),
            bounds: Bounds::cardiac_square(),
            cg: CgOptions {
                rel_tol: self.cg_tol,
                max_iter: None,
            },
            parallel: !self.serial,
            dump_dir: self.dump_dir.clone(),
        }
    }

    /// Command-line arguments (after `study`) that reproduce this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let list = |xs: &[f64]| xs.iter().map(|&x| format_number(x)).collect::<Vec<_>>().join(",");
        let mut args = vec![
            "--model".to_string(),
            self.model.kind().name().to_string(),
            "--mode".into(),
            enum_name(self.mode),
            "--levels".into(),
            list(&self.levels),
            "--t-final".into(),
            format_number(self.t_final),
            "--dt".into(),
            match self.dt {
                DtRule::HSquared => "h2".into(),
                DtRule::Fixed(k) => format_number(k),
            },
            "--diffusion".into(),
            match self.diffusion {
                Diffusion::Scalar(s) => format_number(s),
                Diffusion::Diagonal(a, b) => format!("{},{}", format_number(a), format_number(b)),
            },
        ];
        for (name, value) in self.model.params() {
            args.push("--param".into());
            args.push(format!("{name}={value}"));
        }
        args.extend(["--cg-tol".into(), format!("{}", self.cg_tol)]);
        if let Some(h) = self.fixed_h {
            args.extend(["--fixed-h".into(), format_number(h), "--dt-levels".into(), list(&self.dt_levels)]);
        }
        args.extend([
            "--wave-mode".into(),
            self.wave_mode.to_string(),
            "--reference".into(),
            enum_name(self.reference),
            "--format".into(),
            enum_name(self.format),
        ]);
        if let Some(out) = &self.out {
            args.extend(["--out".into(), out.display().to_string()]);
        }
        if let Some(dir) = &self.dump_dir {
            args.extend(["--dump-dir".into(), dir.display().to_string()]);
        }
        if self.serial {
            args.push("--serial".into());
        }
        args
    }
}

fn enum_name<E: ValueEnum>(e: E) -> String {
    e.to_possible_value().expect("no skipped variants").get_name().to_string()
}

/// Parsed command.
#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Study(RunConfig),
    Mesh { h: f64, out: Option<PathBuf> },
    /// Help or version text to print.
    Info(String),
}

/// Parses a full argument vector (including the program name). A `--config`
/// file is read and its entries placed before the command-line flags.
pub fn parse_invocation<I, S>(argv: I) -> Result<Invocation>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            return Ok(Invocation::Info(e.to_string()));
        }
        Err(e) => return Err(usage(e)),
    };
    match cli.command {
        Command::Mesh(m) => Ok(Invocation::Mesh { h: m.h, out: m.out }),
        Command::Study(args) => {
            let args = match &args.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
                    let study_pos = argv.iter().position(|a| a == "study").expect("study subcommand parsed");
                    let mut merged = argv[..=study_pos].to_vec();
                    merged.extend(config_text_to_args(&text)?);
                    merged.extend(argv[study_pos + 1..].iter().cloned());
                    match Cli::try_parse_from(&merged).map_err(usage)?.command {
                        Command::Study(a) => a,
                        Command::Mesh(_) => unreachable!("subcommand fixed above"),
                    }
                }
                None => args,
            };
            Ok(Invocation::Study(RunConfig::from_args(args)?))
        }
    }
}

/// Parses `study` flags (without program or subcommand name).
pub fn parse_config<I, S>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv = ["monofem".to_string(), "study".to_string()]
        .into_iter()
        .chain(args.into_iter().map(Into::into));
    match parse_invocation(argv)? {
        Invocation::Study(cfg) => Ok(cfg),
        Invocation::Mesh { .. } | Invocation::Info(_) => Err(Error::Usage("expected study flags".into())),
    }
}

/// Parses a `key = value` config file body.
pub fn parse_config_text(text: &str) -> Result<RunConfig> {
    parse_config(config_text_to_args(text)?)
}

fn rate_cell(rate: Option<f64>) -> String {
    rate.map(|r| format!("{r:.6}")).unwrap_or_default()
}

/// Renders records as CSV (`level,h,dt,steps,l2_error,sroc,troc`) or as a
/// markdown table with one column per level.
pub fn emit_table(records: &[ConvergenceRecord], format: Format) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no convergence records to emit".into()));
    }
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("level,h,dt,steps,l2_error,sroc,troc\n");
            for r in records {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6e},{},{}",
                    r.level,
                    r.h,
                    r.dt,
                    r.steps,
                    r.l2_error,
                    rate_cell(r.sroc),
                    rate_cell(r.troc)
                );
            }
        }
        Format::Md => {
            let row = |label: &str, cells: Vec<String>| format!("| {label} | {} |\n", cells.join(" | "));
            let dash = |r: Option<f64>| r.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
            out.push_str(&row("h", records.iter().map(|r| format_number(r.h)).collect()));
            out.push_str(&row("---", records.iter().map(|_| "---".to_string()).collect()));
            out.push_str(&row("dt", records.iter().map(|r| format!("{:.6e}", r.dt)).collect()));
            out.push_str(&row("L2 error", records.iter().map(|r| format!("{:.6e}", r.l2_error)).collect()));
            out.push_str(&row("sroc", records.iter().map(|r| dash(r.sroc)).collect()));
            out.push_str(&row("troc", records.iter().map(|r| dash(r.troc)).collect()));
        }
    }
    Ok(out)
}
