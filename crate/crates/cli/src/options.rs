//! Scenario options: command-line flags merged over a `key = value` file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    Full,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Plain,
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoupleMode {
    /// Coalescence times from the worst start pair.
    Time,
    /// Decay of the unmatched mass along the `D = 0` path.
    Zdecay,
}

/// Every setting a scenario can carry. Unset values fall back to the config
/// file, then to per-subcommand defaults; the resolved set is echoed into
/// `summary.json`.
#[derive(Args, Debug, Clone, Default, Serialize)]
pub struct Options {
    /// Scenario file of `key = value` lines (`#` starts a comment). Flags win.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Master seed; falls back to the RCMF_SEED environment variable.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for replica parallelism (default: cores, capped by replicas).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Edge probability; alternative to `--lambda` (`lambda = p n`).
    #[arg(long)]
    pub p: Option<f64>,
    /// Run the chain at q = 1 (independent re-percolation).
    #[arg(long)]
    pub unit_q: bool,

    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, value_enum)]
    pub start: Option<Start>,
    /// Comma-separated subset of stats, sq_tracker, drift_residual, step_trace.
    #[arg(long, value_delimiter = ',')]
    pub observers: Option<Vec<String>>,
    /// Glauber: record every this many updates.
    #[arg(long)]
    pub sample_every: Option<usize>,

    /// Replaces the default `omega(n)` in the small-component threshold.
    #[arg(long)]
    pub omega_override: Option<f64>,
    #[arg(long)]
    pub vartheta: Option<f64>,
    #[arg(long)]
    pub g_value: Option<f64>,

    /// Drift: theta grid step.
    #[arg(long)]
    pub grid: Option<f64>,

    #[arg(long, value_enum)]
    pub strategy: Option<Strategy>,
    #[arg(long, value_enum)]
    pub mode: Option<CoupleMode>,
    /// Z decay: vertices outside the shared body of the start pair.
    #[arg(long)]
    pub unmatched: Option<usize>,

    /// Random walks: step scale A.
    #[arg(long)]
    pub scale: Option<u64>,
    /// Number of walk steps, or of unit sizes for the binomial LLT case.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub d: Option<u64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<i64>,
    #[arg(long)]
    pub trials: Option<u64>,

    /// Stats: tree sizes k to report.
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<usize>>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("config key {key}: cannot parse {value:?}: {e}")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, true).map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn fill<T>(slot: &mut Option<T>, value: Result<T, CliError>) -> Result<(), CliError> {
    let value = value?;
    if slot.is_none() {
        *slot = Some(value);
    }
    Ok(())
}

/// `key = value` pairs of a scenario file, in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key = value, got {raw:?}", i + 1)));
        };
        pairs.push((key.trim().replace('-', "_"), value.trim().to_string()));
    }
    Ok(pairs)
}

impl Options {
    /// Fills every unset option from the config file, if one was given.
    pub fn merge_config_file(&mut self) -> Result<(), CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        for (key, value) in parse_config(&text)? {
            self.apply(&key, &value)?;
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value;
        match key {
            "seed" => fill(&mut self.seed, parse(key, v)),
            "threads" => fill(&mut self.threads, parse(key, v)),
            "out" => fill(&mut self.out, Ok(PathBuf::from(v))),
            "format" => fill(&mut self.format, parse_enum(key, v)),
            "n" => fill(&mut self.n, parse(key, v)),
            "q" => fill(&mut self.q, parse(key, v)),
            "lambda" => fill(&mut self.lambda, parse(key, v)),
            "p" => fill(&mut self.p, parse(key, v)),
            "unit_q" => {
                self.unit_q |= parse::<bool>(key, v)?;
                Ok(())
            }
            "steps" => fill(&mut self.steps, parse(key, v)),
            "replicas" => fill(&mut self.replicas, parse(key, v)),
            "max_steps" => fill(&mut self.max_steps, parse(key, v)),
            "start" => fill(&mut self.start, parse_enum(key, v)),
            "observers" => fill(&mut self.observers, parse_list(key, v)),
            "sample_every" => fill(&mut self.sample_every, parse(key, v)),
            "omega_override" => fill(&mut self.omega_override, parse(key, v)),
            "vartheta" => fill(&mut self.vartheta, parse(key, v)),
            "g_value" => fill(&mut self.g_value, parse(key, v)),
            "grid" => fill(&mut self.grid, parse(key, v)),
            "strategy" => fill(&mut self.strategy, parse_enum(key, v)),
            "mode" => fill(&mut self.mode, parse_enum(key, v)),
            "unmatched" => fill(&mut self.unmatched, parse(key, v)),
            "scale" => fill(&mut self.scale, parse(key, v)),
            "m" => fill(&mut self.m, parse(key, v)),
            "d" => fill(&mut self.d, parse(key, v)),
            "r" => fill(&mut self.r, parse(key, v)),
            "y" => fill(&mut self.y, parse(key, v)),
            "trials" => fill(&mut self.trials, parse(key, v)),
            "k_list" => fill(&mut self.k_list, parse_list(key, v)),
            other => Err(CliError::Usage(format!("unknown config key {other:?}"))),
        }
    }

    /// The seed from the flag or config, else from `RCMF_SEED`.
    pub fn resolve_seed(&mut self) -> Result<u64, CliError> {
        if let Some(seed) = self.seed {
            return Ok(seed);
        }
        let seed = match std::env::var("RCMF_SEED") {
            Ok(text) => parse("RCMF_SEED", text.trim())?,
            Err(_) => {
                return Err(CliError::Usage(
                    "this subcommand is stochastic: pass --seed, set seed in the config, or set RCMF_SEED".into(),
                ))
            }
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    pub fn out_dir(&mut self) -> &Path {
        self.out.get_or_insert_with(|| PathBuf::from("."))
    }
}

/// Returns the option's value, recording the default when it was unset.
pub fn or_default<T: Clone>(slot: &mut Option<T>, default: T) -> T {
    slot.get_or_insert(default).clone()
}

/// Returns the option's value or a usage error naming the flag.
pub fn required<T: Clone>(slot: &Option<T>, flag: &str) -> Result<T, CliError> {
    slot.clone()
        .ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let pairs = parse_config("# scenario\nn = 100\n\nmax-steps=5  # trailing\n").unwrap();
        assert_eq!(pairs, vec![("n".into(), "100".into()), ("max_steps".into(), "5".into())]);
        assert!(parse_config("just words").is_err());
    }

    #[test]
    fn flags_win_over_config() {
        let mut opts = Options {
            n: Some(10),
            ..Options::default()
        };
        opts.apply("n", "20").unwrap();
        opts.apply("q", "1.5").unwrap();
        opts.apply("observers", "stats, sq_tracker").unwrap();
        opts.apply("format", "json").unwrap();
        assert_eq!(opts.n, Some(10));
        assert_eq!(opts.q, Some(1.5));
        assert_eq!(opts.observers.as_deref(), Some(&["stats".to_string(), "sq_tracker".to_string()][..]));
        assert_eq!(opts.format, Some(Format::Json));
        assert!(matches!(opts.apply("bogus", "1"), Err(CliError::Usage(_))));
        assert!(matches!(opts.apply("steps", "many"), Err(CliError::Usage(_))));
    }
}
