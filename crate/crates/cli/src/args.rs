use std::path::PathBuf;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use conecover::branching::DEFAULT_CAP;
use conecover::generating::FixedPointMethod;
use conecover::graph::{ParamValue, GENERATOR_NAMES};

#[derive(Parser, Debug)]
#[command(
    name = "conecover",
    version,
    about = "Random walks on directed covers: recurrence, speed, entropy and growth",
    after_help = "Set CONECOVER_THREADS to cap the number of worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate a spec or generator.
    Validate(ValidateArgs),
    /// Recurrence/transience verdict from spectral, analytic and Monte Carlo evidence.
    Classify(ClassifyArgs),
    /// Level sizes of the cover and their n-th roots.
    Growth(GrowthArgs),
    /// Simulate walks on the cover.
    Simulate(SimulateArgs),
    /// Compare branching-process extinction with loop visits of the walk.
    Couple(CoupleArgs),
    /// Generating-function analysis: speed, entropy and dimension bounds.
    Analyze(AnalyzeArgs),
    /// Lyapunov classification of a walk in a random environment on the integers.
    Rwdcre(RwdcreArgs),
    /// Classify and analyze over a grid of generator parameters.
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Classify(_) => "classify",
            Command::Growth(_) => "growth",
            Command::Simulate(_) => "simulate",
            Command::Couple(_) => "couple",
            Command::Analyze(_) => "analyze",
            Command::Rwdcre(_) => "rwdcre",
            Command::Sweep(_) => "sweep",
        }
    }

    pub fn format(&self) -> Format {
        let default = match self {
            Command::Growth(_) | Command::Sweep(_) => Format::Tsv,
            _ => Format::Json,
        };
        self.common().format.unwrap_or(default)
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Validate(a) => &a.common,
            Command::Classify(a) => &a.common,
            Command::Growth(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Couple(a) => &a.common,
            Command::Analyze(a) => &a.common,
            Command::Rwdcre(a) => &a.common,
            Command::Sweep(a) => &a.common,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Tsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Auto,
    Newton,
    Kleene,
}

impl From<Method> for FixedPointMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => FixedPointMethod::Auto,
            Method::Newton => FixedPointMethod::Newton,
            Method::Kleene => FixedPointMethod::Kleene,
        }
    }
}

#[derive(Args, Debug)]
pub struct Common {
    /// JSON spec: a finite graph or a generator document.
    #[arg(long, value_name = "PATH", required_unless_present = "generator", conflicts_with = "generator")]
    pub spec: Option<PathBuf>,
    /// Built-in generator.
    #[arg(long, value_name = "NAME", value_parser = PossibleValuesParser::new(GENERATOR_NAMES))]
    pub generator: Option<String>,
    /// Generator parameters; lists are comma-separated (omega=0.3,0.7).
    #[arg(long, value_name = "K=V", num_args = 1.., value_parser = parse_param, requires = "generator")]
    pub params: Vec<(String, ParamValue)>,
    /// Treat unreachable vertices as errors.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output format; `growth` and `sweep` default to tsv, the rest to json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Power-iteration and fixed-point tolerance.
    #[arg(long, default_value_t = 1e-12, value_parser = tolerance)]
    pub tol: f64,
    /// Truncation radius for infinite graphs.
    #[arg(long, default_value_t = 200, value_parser = positive_count)]
    pub radius: usize,
    /// Monte Carlo runs; 0 skips the empirical evidence.
    #[arg(long, default_value_t = 200, value_parser = count)]
    pub runs: usize,
    #[arg(long, default_value_t = 10_000, value_parser = positive_count)]
    pub horizon: usize,
}

#[derive(Args, Debug)]
pub struct GrowthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 32, value_parser = levels)]
    pub levels: usize,
    /// Largest number of distinct labels tracked on one level.
    #[arg(long, default_value_t = 1_000_000, value_parser = positive_count)]
    pub budget: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of runs; at least 2.
    #[arg(long, default_value_t = 100, value_parser = simulation_runs)]
    pub runs: usize,
    #[arg(long, default_value_t = 10_000, value_parser = positive_count)]
    pub horizon: usize,
    /// Write the full trajectory of run 0 as TSV.
    #[arg(long, value_name = "PATH")]
    pub trajectory: Option<PathBuf>,
    /// Also estimate speed and entropy.
    #[arg(long)]
    pub entropy: bool,
}

#[derive(Args, Debug)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 10_000, value_parser = coupling_trials)]
    pub runs: usize,
    #[arg(long, default_value_t = 10_000, value_parser = positive_count)]
    pub horizon: usize,
    /// Population size at which the branching process counts as surviving.
    #[arg(long, default_value_t = DEFAULT_CAP, value_parser = positive_count)]
    pub cap: usize,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1e-13, value_parser = tolerance)]
    pub tol: f64,
    /// Truncation radius; required for infinite graphs.
    #[arg(long, value_parser = positive_count)]
    pub radius: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
}

#[derive(Args, Debug)]
pub struct RwdcreArgs {
    #[command(flatten)]
    pub common: Common,
    /// Lyapunov trials.
    #[arg(long, default_value_t = 200, value_parser = positive_count)]
    pub runs: usize,
    /// Length of each matrix product.
    #[arg(long, default_value_t = 10_000, value_parser = positive_count)]
    pub horizon: usize,
    /// Decision band in standard errors.
    #[arg(long, default_value_t = 3.0, value_parser = band)]
    pub band: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid axis KEY=START:STOP:STEP; at most two.
    #[arg(long, value_name = "KEY=START:STOP:STEP", value_parser = parse_axis)]
    pub grid: Vec<GridAxis>,
    #[arg(long, default_value_t = 1e-13, value_parser = tolerance)]
    pub tol: f64,
    /// Truncation radius for infinite graphs.
    #[arg(long, default_value_t = 200, value_parser = positive_count)]
    pub radius: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<f64>,
}

fn parse_param(s: &str) -> Result<(String, ParamValue), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected K=V, got '{s}'"))?;
    if k.is_empty() {
        return Err(format!("empty key in '{s}'"));
    }
    let nums = v
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("'{x}' is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    let value = if nums.len() == 1 && !v.contains(',') {
        ParamValue::Number(nums[0])
    } else {
        ParamValue::List(nums)
    };
    Ok((k.to_string(), value))
}

/// Grid values `start + k step` up to `stop`; empty when `start > stop`.
fn parse_axis(s: &str) -> Result<GridAxis, String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=START:STOP:STEP, got '{s}'"))?;
    if k.is_empty() {
        return Err(format!("empty key in '{s}'"));
    }
    let parts: Vec<f64> = v
        .split(':')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("'{x}' is not a number")))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected START:STOP:STEP, got '{v}'"));
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0) {
        return Err("bounds must be finite and the step positive".into());
    }
    let mut values = Vec::new();
    let mut n = 0u32;
    loop {
        let x = start + f64::from(n) * step;
        if x > stop + 1e-9 * step {
            break;
        }
        // strip accumulated binary noise so 0.1 + 2*0.1 prints as 0.3
        values.push((x * 1e12).round() / 1e12);
        n += 1;
        if n > 100_000 {
            return Err("grid has more than 100000 points".into());
        }
    }
    Ok(GridAxis {
        key: k.to_string(),
        values,
    })
}

/// Non-negative integer; accepts exponent notation such as `1e6`.
fn count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(x >= 0.0 && x.fract() == 0.0 && x <= 9_007_199_254_740_992.0) {
        return Err(format!("'{s}' is not a non-negative integer"));
    }
    Ok(x as usize)
}

fn positive_count(s: &str) -> Result<usize, String> {
    match count(s)? {
        0 => Err("must be at least 1".into()),
        n => Ok(n),
    }
}

fn coupling_trials(s: &str) -> Result<usize, String> {
    match count(s)? {
        n if n < 100 => Err("needs at least 100 trials".into()),
        n => Ok(n),
    }
}

fn simulation_runs(s: &str) -> Result<usize, String> {
    match count(s)? {
        n if n < 2 => Err("needs at least 2 runs".into()),
        n => Ok(n),
    }
}

fn levels(s: &str) -> Result<usize, String> {
    match count(s)? {
        n if n > 100_000 => Err("at most 100000 levels".into()),
        n => Ok(n),
    }
}

fn tolerance(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x > 0.0 && x <= 1e-2 {
        Ok(x)
    } else {
        Err("must lie in (0, 0.01]".into())
    }
}

fn band(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_exponent_notation() {
        assert_eq!(count("1e6"), Ok(1_000_000));
        assert_eq!(count("250"), Ok(250));
        assert!(count("1.5").is_err());
        assert!(count("-3").is_err());
        assert!(positive_count("0").is_err());
    }

    #[test]
    fn params_split_lists() {
        assert_eq!(parse_param("lambda=2.5").unwrap(), ("lambda".into(), ParamValue::Number(2.5)));
        assert_eq!(
            parse_param("omega=0.3,0.7").unwrap(),
            ("omega".into(), ParamValue::List(vec![0.3, 0.7]))
        );
        assert!(parse_param("lambda").is_err());
        assert!(parse_param("lambda=x").is_err());
    }

    #[test]
    fn grid_axes() {
        let a = parse_axis("lambda=1:3:0.25").unwrap();
        assert_eq!(a.key, "lambda");
        assert_eq!(a.values.len(), 9);
        assert_eq!(a.values[8], 3.0);
        let b = parse_axis("beta=0.1:0.6:0.1").unwrap();
        assert_eq!(b.values, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert!(parse_axis("beta=1:0:0.1").unwrap().values.is_empty());
        assert!(parse_axis("beta=0:1:0").is_err());
        assert!(parse_axis("beta=0:1").is_err());
    }
}
