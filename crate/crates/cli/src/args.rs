use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cvbell::bell::AngleMode;
use cvbell::homodyne::BlockSolver;
use cvbell::quadrature::GridSpec;
use cvbell::BellAngles;

#[derive(Debug, Parser)]
#[command(name = "cvbell", version, about = "Continuous-variable Bell tests with circle states")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Output file, `-` for stdout. Defaults to `$CVBELL_OUT_DIR/<command>.<ext>`
    /// when that variable is set, stdout otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Leave the timestamp out of the provenance header.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Bound on the discarded number-basis weight of the state.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tail_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// S as a function of r0, with the detected violation window.
    Sweep {
        /// Range `min:max:step`.
        #[arg(long, value_parser = parse_range)]
        r0: R0Range,
        /// `paper` or `optimized`.
        #[arg(long, value_enum, default_value_t = SweepAngles::Paper)]
        angles: SweepAngles,
    },
    /// Maximise S over all measurement angles.
    Optimize {
        /// A value or a range `min:max:step`.
        #[arg(long, value_parser = parse_r0_list)]
        r0: R0List,
        /// Coarse-grid points per angle axis.
        #[arg(long, default_value_t = 32)]
        grid_points: usize,
    },
    /// Joint quadrature density on a grid.
    Dist {
        #[arg(long)]
        r0: f64,
        /// Angle sum θ + φ.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        chi: f64,
        /// Grid per axis, `min:max:points`.
        #[arg(long, value_parser = parse_grid, default_value = "-12:12:241", allow_hyphen_values = true)]
        grid: GridSpec,
        /// Add unit-variance Gaussian noise to each result.
        #[arg(long)]
        noisy: bool,
    },
    /// Local hidden variable model: Monte-Carlo and exact S.
    Lhv {
        #[arg(long, value_parser = parse_r0_list)]
        r0: R0List,
        /// `paper` or `θ,φ,θ',φ'` in radians.
        #[arg(long, value_parser = parse_angles, default_value = "paper", allow_hyphen_values = true)]
        angles: AngleArg,
        /// Monte-Carlo samples; scientific notation accepted.
        #[arg(long, value_parser = parse_count, default_value = "1e6")]
        samples: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also report the largest exact S over this many random angle quadruples.
        #[arg(long, default_value_t = 0)]
        random_angles: usize,
    },
    /// Finite local-oscillator homodyne detection.
    Homodyne {
        #[arg(long)]
        r0: f64,
        /// Oscillator amplitudes, comma separated.
        #[arg(long = "E", value_parser = parse_amplitudes, default_value = "2,5,10,20")]
        amplitudes: Amplitudes,
        #[arg(long, value_parser = parse_angles, default_value = "paper", allow_hyphen_values = true)]
        angles: AngleArg,
        #[arg(long, value_enum, default_value_t = Report::Convergence)]
        report: Report,
        /// Bin widths for `--report coarse`, comma separated.
        #[arg(long, value_parser = parse_amplitudes, default_value = "0,1,2,4,8")]
        widths: Amplitudes,
        /// Omit table entries below this probability (`--report table`).
        #[arg(long, default_value_t = 1e-15)]
        min_prob: f64,
        #[arg(long, value_enum, default_value_t = Solver::Analytic)]
        solver: Solver,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAngles {
    Paper,
    Optimized,
}

impl From<SweepAngles> for AngleMode {
    fn from(a: SweepAngles) -> Self {
        match a {
            SweepAngles::Paper => AngleMode::Paper,
            SweepAngles::Optimized => AngleMode::Optimized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Report {
    /// S_E against the ideal S for each amplitude.
    Convergence,
    /// Joint outcome table at the first amplitude and angles (θ, φ).
    Table,
    /// Single-site outcome distribution and KS distances per amplitude.
    Distribution,
    /// S after binning outcomes, at the first amplitude.
    Coarse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Analytic,
    Dense,
}

impl From<Solver> for BlockSolver {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Analytic => BlockSolver::Analytic,
            Solver::Dense => BlockSolver::Dense,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R0Range {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl R0Range {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum R0List {
    Value(f64),
    Range(R0Range),
}

impl R0List {
    pub fn values(&self) -> Vec<f64> {
        match self {
            R0List::Value(v) => vec![*v],
            R0List::Range(r) => r.values(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum AngleArg {
    #[serde(serialize_with = "paper_token")]
    Paper,
    Explicit(BellAngles),
}

fn paper_token<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str("paper")
}

impl AngleArg {
    pub fn angles(&self) -> BellAngles {
        match self {
            AngleArg::Paper => BellAngles::PAPER,
            AngleArg::Explicit(a) => *a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Amplitudes(pub Vec<f64>);

fn parse_finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: `{s}`"))
    }
}

pub fn parse_range(s: &str) -> Result<R0Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        return Err(format!("expected min:max:step, got `{s}`"));
    };
    let (min, max, step) = (parse_finite(a)?, parse_finite(b)?, parse_finite(c)?);
    if min < 0.0 {
        return Err("r0 must be >= 0".into());
    }
    if !(step > 0.0) || max < min {
        return Err(format!("empty range `{s}`: need max >= min and step > 0"));
    }
    Ok(R0Range { min, max, step })
}

pub fn parse_r0_list(s: &str) -> Result<R0List, String> {
    if s.contains(':') {
        return parse_range(s).map(R0List::Range);
    }
    let v = parse_finite(s)?;
    if v < 0.0 {
        return Err("r0 must be >= 0".into());
    }
    Ok(R0List::Value(v))
}

pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        return Err(format!("expected min:max:points, got `{s}`"));
    };
    let points: usize = c.trim().parse().map_err(|_| format!("bad point count `{c}`"))?;
    GridSpec::new(parse_finite(a)?, parse_finite(b)?, points).map_err(|e| e.to_string())
}

pub fn parse_angles(s: &str) -> Result<AngleArg, String> {
    if s.trim().eq_ignore_ascii_case("paper") {
        return Ok(AngleArg::Paper);
    }
    let v: Vec<f64> = s.split(',').map(parse_finite).collect::<Result<_, _>>()?;
    let [theta, phi, theta_p, phi_p] = v[..] else {
        return Err(format!("expected `paper` or θ,φ,θ',φ', got `{s}`"));
    };
    Ok(AngleArg::Explicit(BellAngles::new(theta, phi, theta_p, phi_p)))
}

pub fn parse_count(s: &str) -> Result<u64, String> {
    let v = parse_finite(s)?;
    if v < 1.0 || v.fract() != 0.0 || v > 9.007e15 {
        return Err(format!("expected a positive whole number, got `{s}`"));
    }
    Ok(v as u64)
}

pub fn parse_amplitudes(s: &str) -> Result<Amplitudes, String> {
    let v: Vec<f64> = s.split(',').map(parse_finite).collect::<Result<_, _>>()?;
    if v.iter().any(|x| *x < 0.0) {
        return Err("values must be >= 0".into());
    }
    Ok(Amplitudes(v))
}
