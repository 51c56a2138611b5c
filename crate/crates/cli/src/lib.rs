//! Argument parsing and dispatch for the `spaghetto` binary.

use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use spaghetto_core::eigen::SolverConfig;
use spaghetto_core::{Caps, Colors, Deformation, Error, ErrorCategory, NumericMode};

mod commands;
pub mod reference;

/// Environment variable naming the root of every output path.
pub const OUT_ENV: &str = "SPAGHETTO_OUT";

/// Settings shared by all subcommands. Loaded from `--config`, then
/// overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub numeric_mode: NumericMode,
    pub caps: Caps,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `error`, `warn`, `info`, `debug` or `trace`.
    pub log_level: String,
    pub solver: SolverConfig,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            numeric_mode: NumericMode::LogDomain,
            caps: Caps::default(),
            seed: 1,
            out_dir: PathBuf::from("spaghetto-out"),
            log_level: "warn".into(),
            solver: SolverConfig::default(),
        }
    }
}

impl GlobalConfig {
    /// Resolve `path` under the output directory. Absolute paths and `..`
    /// are rejected so nothing is written outside it.
    pub fn output_path(&self, path: &Path) -> Result<PathBuf, Error> {
        let escapes = path
            .components()
            .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir));
        if escapes {
            return Err(Error::invalid(format!(
                "output path {} must be relative to the output directory",
                path.display()
            )));
        }
        Ok(self.out_dir.join(path))
    }
}

#[derive(Debug, Parser)]
#[command(name = "spaghetto", version, about = "Exact and sampled properties of q-deformed colored Motzkin chains and their 2D spiral embedding")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with global settings.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root directory for every artifact.
    #[arg(long, global = true, env = OUT_ENV, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Default seed for sampling commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Weight-table arithmetic: `log_domain` or `exact_rational`.
    #[arg(long, global = true, value_name = "MODE")]
    pub numeric_mode: Option<NumericMode>,
    /// Largest Hilbert-space dimension for exact diagonalization.
    #[arg(long, global = true, value_name = "DIM")]
    pub max_ed_dimension: Option<u64>,
    /// Longest chain that may be enumerated path by path.
    #[arg(long, global = true, value_name = "N")]
    pub max_enumerate: Option<usize>,
    /// Log filter, e.g. `info` or `spaghetto_core=debug`.
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log_level: Option<String>,
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<GlobalConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?
            }
            None => GlobalConfig::default(),
        };
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.numeric_mode {
            cfg.numeric_mode = m;
        }
        if let Some(d) = self.max_ed_dimension {
            cfg.caps.ed_dimension = d;
        }
        if let Some(n) = self.max_enumerate {
            cfg.caps.enumerate_colorless = n;
            cfg.caps.enumerate_colored = n;
        }
        if let Some(l) = &self.log_level {
            cfg.log_level = l.clone();
        }
        cfg.caps.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Number of (colored) Motzkin paths, exact.
    Count(CountArgs),
    /// List every path of a short chain.
    Enumerate(EnumerateArgs),
    /// Exact ground-state measure: partition function, height marginals,
    /// path probabilities.
    Groundstate(GroundstateArgs),
    /// Exact diagonalization: lowest eigenvalues, gap and ground-state overlap.
    Ed(EdArgs),
    /// Schmidt spectrum and entanglement entropies of the exact ground state.
    Ee(EeArgs),
    /// Exact ground-state path samples and crossing-arc statistics.
    Sample(SampleArgs),
    /// Run an experiment described by a TOML file.
    Scaling(ScalingArgs),
    /// Spiral embedding of the chain, as SVG or CSV.
    Geometry(GeometryArgs),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

/// Number of colors per arc: 1 (colorless) or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(into = "Colors")]
pub enum ColorsArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

impl From<ColorsArg> for Colors {
    fn from(c: ColorsArg) -> Self {
        match c {
            ColorsArg::One => Colors::One,
            ColorsArg::Two => Colors::Two,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CountArgs {
    /// Chain length.
    #[arg(long)]
    pub n: usize,
    /// Colors per arc.
    #[arg(long, default_value = "1")]
    pub colors: ColorsArg,
    /// Count walks from this height instead of full paths.
    #[arg(long, requires = "to_height")]
    pub from_height: Option<usize>,
    /// End height for `--from-height`.
    #[arg(long, requires = "from_height")]
    pub to_height: Option<usize>,
    /// Also write a JSON artifact here, relative to the output directory.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EnumerateArgs {
    /// Chain length.
    #[arg(long)]
    pub n: usize,
    /// Colors per arc.
    #[arg(long, default_value = "1")]
    pub colors: ColorsArg,
    /// Attach ground-state probabilities at this deformation.
    #[arg(long)]
    pub q: Option<Deformation>,
    /// Print at most this many paths.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Write all paths as CSV here, relative to the output directory.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GroundstateArgs {
    /// Chain length.
    #[arg(long)]
    pub n: usize,
    /// Deformation, as a ratio (`3/2`), decimal or float.
    #[arg(long)]
    pub q: Deformation,
    /// Colors per arc.
    #[arg(long, default_value = "1")]
    pub colors: ColorsArg,
    /// Probability of this path, e.g. `UrFDr` or `UFD`.
    #[arg(long)]
    pub path: Option<String>,
    /// Artifact name stem under the output directory.
    #[arg(long, default_value = "groundstate")]
    pub name: String,
}

#[derive(Debug, Args, Serialize)]
pub struct EdArgs {
    /// Chain length.
    #[arg(long)]
    pub n: usize,
    /// Deformation, as a ratio (`3/2`), decimal or float.
    #[arg(long)]
    pub q: Deformation,
    /// Colors per arc.
    #[arg(long, default_value = "1")]
    pub colors: ColorsArg,
    /// Number of eigenpairs (at least 2).
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Residual tolerance of the eigensolver.
    #[arg(long)]
    pub tol: Option<f64>,
    /// JSON report, relative to the output directory.
    #[arg(long, default_value = "ed.json", value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EeArgs {
    /// Chain length for a 1D cut.
    #[arg(long, conflicts_with = "l", required_unless_present = "l")]
    pub n: Option<usize>,
    /// Lattice size: chain length L(L+2) with the diagonal cut.
    #[arg(long = "L", id = "l")]
    pub l: Option<usize>,
    /// Diagonal cut offset, with `--L`.
    #[arg(long, default_value_t = 0, requires = "l")]
    pub a: usize,
    /// Single cut after this many sites, with `--n` (default: the middle).
    #[arg(long, conflicts_with = "l")]
    pub cut: Option<usize>,
    /// Deformation, as a ratio (`3/2`), decimal or float.
    #[arg(long)]
    pub q: Deformation,
    /// Colors per arc.
    #[arg(long, default_value = "1")]
    pub colors: ColorsArg,
    /// Rényi indices; `inf` is allowed.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 2.0])]
    pub alpha: Vec<f64>,
    /// Explicit A/B string overriding the cut.
    #[arg(long)]
    pub mask: Option<String>,
    /// Writes `<STEM>.json` and `<STEM>_spectrum.csv`.
    #[arg(long, default_value = "ee", value_name = "STEM")]
    pub name: String,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Chain length; crossings on the center cut.
    #[arg(long, conflicts_with = "l", required_unless_present = "l")]
    pub n: Option<usize>,
    /// Lattice size: chain length L(L+2), crossings on the diagonal cut.
    #[arg(long = "L", id = "l")]
    pub l: Option<usize>,
    /// Deformation, as a ratio (`3/2`), decimal or float.
    #[arg(long)]
    pub q: Deformation,
    /// Colors per arc.
    #[arg(long, default_value = "1")]
    pub colors: ColorsArg,
    /// Number of exact samples.
    #[arg(long, default_value_t = 10)]
    pub samples: u64,
    /// A/B string for crossing statistics.
    #[arg(long)]
    pub mask: Option<String>,
    /// Sample crossing counts only, without writing paths.
    #[arg(long)]
    pub crossings_only: bool,
    /// Writes `<STEM>.json` and, unless `--crossings-only`, `<STEM>.csv`.
    #[arg(long, default_value = "sample", value_name = "STEM")]
    pub name: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ScalingArgs {
    /// Experiment file (TOML).
    #[arg(long, value_name = "FILE")]
    pub experiment: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryFormat {
    Svg,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct GeometryArgs {
    /// Even lattice size.
    #[arg(long = "L", id = "l")]
    pub l: usize,
    /// Diagonal cut offset; omit for an uncolored figure.
    #[arg(long)]
    pub a: Option<usize>,
    /// Output format.
    #[arg(long, default_value = "svg")]
    pub format: GeometryFormat,
    /// Defaults to `geometry_L<L>.<format>`.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelftestArgs {
    /// Run every criterion, including the slow ones.
    #[arg(long, conflicts_with = "criteria")]
    pub full: bool,
    /// Comma-separated criterion numbers.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u8>,
}

/// Exit code for a failed run: usage 2, caps 3, numerics 4, I/O 1.
pub fn exit_code(err: &Error) -> u8 {
    match err.category() {
        ErrorCategory::Usage => 2,
        ErrorCategory::Cap => 3,
        ErrorCategory::Numeric => 4,
        ErrorCategory::Io => 1,
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let cfg = match cli.global.resolve() {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    env_logger::Builder::new().parse_filters(&cfg.log_level).format_timestamp(None).try_init().ok();
    match commands::dispatch(&cli.command, &cfg) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if let Error::NotConverged { residual, .. } = e {
        eprintln!("residual report: worst residual {residual:.3e}");
    }
    ExitCode::from(exit_code(e))
}
