//! Flat `key = value` run configuration.
//!
//! ```text
//! # three-solutions preset
//! p = 5
//! q = 2
//! weight = perturbed
//! plus_width = 0.35
//! a_minus = 0.5
//! mu = 0.05
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFamily {
    TwoBump,
    OrthogonalTwoBump,
    Perturbed,
    File,
}

impl FromStr for WeightFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "two-bump" => Ok(WeightFamily::TwoBump),
            "orthogonal-two-bump" => Ok(WeightFamily::OrthogonalTwoBump),
            "perturbed" => Ok(WeightFamily::Perturbed),
            "file" => Ok(WeightFamily::File),
            _ => Err(format!(
                "unknown weight family {s:?} (two-bump, orthogonal-two-bump, perturbed, file)"
            )),
        }
    }
}

/// Whether λ values in the config are absolute or multiples of `λ₁(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaUnit {
    Absolute,
    Lambda1,
}

impl FromStr for LambdaUnit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "absolute" => Ok(LambdaUnit::Absolute),
            "lambda1" => Ok(LambdaUnit::Lambda1),
            _ => Err(format!("unknown lambda unit {s:?} (absolute, lambda1)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?} (csv, json)")),
        }
    }
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Linspace {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_cells: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub p: f64,
    pub q: f64,
    pub weight: WeightFamily,
    /// Fraction of the interval occupied by the positive bump.
    pub plus_width: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub weight_file: Option<PathBuf>,
    /// Perturbation size in units of `‖a‖∞`.
    pub mu: f64,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Linspace>,
    pub lambda_unit: LambdaUnit,
    pub tol: f64,
    pub seed: u64,
    pub starts: usize,
    pub beads: usize,
    pub p_grid: Option<Linspace>,
    pub q_grid: Option<Linspace>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_cells: 256,
            x_lo: 0.0,
            x_hi: 1.0,
            p: 2.0,
            q: 1.5,
            weight: WeightFamily::TwoBump,
            plus_width: 0.5,
            a_plus: 1.0,
            a_minus: 1.0,
            weight_file: None,
            mu: 0.0,
            lambda: None,
            lambda_grid: None,
            lambda_unit: LambdaUnit::Absolute,
            tol: 1e-8,
            seed: 0x5eed,
            starts: 8,
            beads: 17,
            p_grid: None,
            q_grid: None,
            out: None,
            format: Format::Csv,
        }
    }
}

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| LabError::ConfigLine {
        line,
        msg: format!("{key}: {e}"),
    })
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        // relative weight files are resolved against the config's directory
        if let (Some(f), Some(dir)) = (&cfg.weight_file, path.parent()) {
            if f.is_relative() {
                cfg.weight_file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        let (mut ls, mut le, mut lc) = (None, None, None);
        let (mut ps, mut pe, mut pc) = (None, None, None);
        let (mut qs, mut qe, mut qc) = (None, None, None);
        let (mut has_p, mut has_q) = (false, false);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(LabError::ConfigLine {
                line,
                msg: format!("expected key = value, got {body:?}"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(LabError::ConfigLine {
                    line,
                    msg: format!("duplicate key {key}"),
                });
            }
            seen.push(key.to_string());
            match key {
                "n_cells" => cfg.n_cells = parse(line, key, v)?,
                "x_lo" => cfg.x_lo = parse(line, key, v)?,
                "x_hi" => cfg.x_hi = parse(line, key, v)?,
                "p" => {
                    cfg.p = parse(line, key, v)?;
                    has_p = true;
                }
                "q" => {
                    cfg.q = parse(line, key, v)?;
                    has_q = true;
                }
                "weight" => cfg.weight = parse(line, key, v)?,
                "plus_width" => cfg.plus_width = parse(line, key, v)?,
                "a_plus" => cfg.a_plus = parse(line, key, v)?,
                "a_minus" => cfg.a_minus = parse(line, key, v)?,
                "weight_file" => cfg.weight_file = Some(PathBuf::from(v)),
                "mu" => cfg.mu = parse(line, key, v)?,
                "lambda" => cfg.lambda = Some(parse(line, key, v)?),
                "lambda_start" => ls = Some(parse(line, key, v)?),
                "lambda_stop" => le = Some(parse(line, key, v)?),
                "lambda_count" => lc = Some(parse(line, key, v)?),
                "lambda_unit" => cfg.lambda_unit = parse(line, key, v)?,
                "tol" => cfg.tol = parse(line, key, v)?,
                "seed" => cfg.seed = parse(line, key, v)?,
                "starts" => cfg.starts = parse(line, key, v)?,
                "beads" => cfg.beads = parse(line, key, v)?,
                "p_min" => ps = Some(parse(line, key, v)?),
                "p_max" => pe = Some(parse(line, key, v)?),
                "p_count" => pc = Some(parse(line, key, v)?),
                "q_min" => qs = Some(parse(line, key, v)?),
                "q_max" => qe = Some(parse(line, key, v)?),
                "q_count" => qc = Some(parse(line, key, v)?),
                "out" => cfg.out = Some(PathBuf::from(v)),
                "format" => cfg.format = parse(line, key, v)?,
                _ => {
                    return Err(LabError::ConfigLine {
                        line,
                        msg: format!("unknown key {key}"),
                    })
                }
            }
        }
        cfg.lambda_grid = linspace("lambda", ls, le, lc)?;
        cfg.p_grid = linspace("p", ps, pe, pc)?;
        cfg.q_grid = linspace("q", qs, qe, qc)?;
        // region maps need only the grids
        if !(has_p && has_q) && cfg.p_grid.is_none() {
            return Err(LabError::Config("p and q are required".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.n_cells < 2 {
            return bad(format!("n_cells = {} (need at least 2)", self.n_cells));
        }
        if !(self.x_lo < self.x_hi) {
            return bad(format!("x_lo = {} must be below x_hi = {}", self.x_lo, self.x_hi));
        }
        if !(self.q > 1.0 && self.q < self.p) {
            return bad(format!("need 1 < q < p, got p = {}, q = {}", self.p, self.q));
        }
        if !(self.plus_width > 0.0 && self.plus_width < 1.0) {
            return bad(format!("plus_width = {} must lie in (0, 1)", self.plus_width));
        }
        if !(self.a_plus > 0.0 && self.a_minus > 0.0) {
            return bad("bump amplitudes must be positive".into());
        }
        if self.weight == WeightFamily::File && self.weight_file.is_none() {
            return bad("weight = file needs weight_file".into());
        }
        if !(self.mu >= 0.0) {
            return bad(format!("mu = {} must be nonnegative", self.mu));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if self.starts == 0 {
            return bad("starts must be positive".into());
        }
        if self.beads < 9 {
            return bad(format!("beads = {} (need at least 9)", self.beads));
        }
        for (name, g) in [("p", &self.p_grid), ("q", &self.q_grid)] {
            if let Some(g) = g {
                if !(g.start > 1.0 && g.stop > 1.0) {
                    return bad(format!("{name} grid must lie in (1, inf)"));
                }
            }
        }
        Ok(())
    }

    /// The λ grid in absolute units; an error when the config has none.
    pub fn lambdas(&self, lambda1: f64) -> Result<Vec<f64>> {
        let g = self.lambda_grid.ok_or(LabError::Config(
            "lambda grid missing (lambda_start, lambda_stop, lambda_count)".into(),
        ))?;
        Ok(g.values().into_iter().map(|l| self.absolute(l, lambda1)).collect())
    }

    /// The single `lambda` in absolute units.
    pub fn single_lambda(&self, lambda1: f64) -> Result<f64> {
        let l = self.lambda.ok_or(LabError::Config("lambda missing".into()))?;
        Ok(self.absolute(l, lambda1))
    }

    fn absolute(&self, l: f64, lambda1: f64) -> f64 {
        match self.lambda_unit {
            LambdaUnit::Absolute => l,
            LambdaUnit::Lambda1 => l * lambda1,
        }
    }
}

fn linspace(name: &str, start: Option<f64>, stop: Option<f64>, count: Option<usize>) -> Result<Option<Linspace>> {
    match (start, stop, count) {
        (None, None, None) => Ok(None),
        (Some(start), Some(stop), Some(count)) => {
            if count == 0 {
                return Err(LabError::Config(format!("{name} grid is empty")));
            }
            if !(start.is_finite() && stop.is_finite()) {
                return Err(LabError::Config(format!("{name} grid bounds must be finite")));
            }
            Ok(Some(Linspace { start, stop, count }))
        }
        _ => Err(LabError::Config(format!("{name} grid needs start, stop and count"))),
    }
}
