//! Branch tables: one row per (λ, branch) solve, written as CSV or JSON.

use std::io::{Read, Write};
use std::str::FromStr;

use nehari_core::solvers::{SolutionKind, SolveReport};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::config::Format;
use crate::error::{LabError, Result};

pub const COLUMNS: [&str; 9] = [
    "lambda",
    "branch",
    "energy",
    "linf_norm",
    "residual",
    "positive_on_plus",
    "dead_cores",
    "iterations",
    "status",
];

pub const OK: &str = "ok";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Ground,
    LocalMin,
    MountainPass,
    MMinus,
    OrderInterval,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Ground => "ground",
            Branch::LocalMin => "local_min",
            Branch::MountainPass => "mountain_pass",
            Branch::MMinus => "m_minus",
            Branch::OrderInterval => "order_interval",
        }
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ground" => Ok(Branch::Ground),
            "local_min" => Ok(Branch::LocalMin),
            "mountain_pass" => Ok(Branch::MountainPass),
            "m_minus" => Ok(Branch::MMinus),
            "order_interval" => Ok(Branch::OrderInterval),
            _ => Err(format!("unknown branch {s:?}")),
        }
    }
}

impl From<SolutionKind> for Branch {
    fn from(k: SolutionKind) -> Self {
        match k {
            SolutionKind::Ground => Branch::Ground,
            SolutionKind::LocalMin => Branch::LocalMin,
            SolutionKind::MountainPass => Branch::MountainPass,
            SolutionKind::MMinus => Branch::MMinus,
            SolutionKind::OrderIntervalMin => Branch::OrderInterval,
        }
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    raw_number(*x).serialize(s)
}

fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    x.map(raw_number).serialize(s)
}

fn raw_number(x: f64) -> Box<RawValue> {
    if x.is_finite() {
        RawValue::from_string(fmt_f64(x)).expect("formatted float is valid JSON")
    } else {
        RawValue::from_string(format!("\"{x}\"")).expect("quoted string is valid JSON")
    }
}

/// Numbers, or the strings `"inf"`, `"-inf"`, `"NaN"` for non-finite values.
#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrStr {
    Num(f64),
    Str(String),
}

fn de_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    match NumOrStr::deserialize(d)? {
        NumOrStr::Num(x) => Ok(x),
        NumOrStr::Str(s) => s.parse().map_err(D::Error::custom),
    }
}

fn de_opt_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    match Option::<NumOrStr>::deserialize(d)? {
        None => Ok(None),
        Some(NumOrStr::Num(x)) => Ok(Some(x)),
        Some(NumOrStr::Str(s)) => s.parse().map(Some).map_err(D::Error::custom),
    }
}

/// A solved branch point, or a failure marker with the values left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    #[serde(serialize_with = "ser_f64", deserialize_with = "de_f64")]
    pub lambda: f64,
    pub branch: Branch,
    #[serde(serialize_with = "ser_opt_f64", deserialize_with = "de_opt_f64")]
    pub energy: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64", deserialize_with = "de_opt_f64")]
    pub linf_norm: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64", deserialize_with = "de_opt_f64")]
    pub residual: Option<f64>,
    pub positive_on_plus: Option<bool>,
    pub dead_cores: Option<usize>,
    pub iterations: Option<usize>,
    pub status: String,
}

impl BranchRow {
    /// A row from a report; a residual at or above `tol` turns it into a
    /// failure row.
    pub fn from_report(r: &SolveReport, tol: f64) -> Self {
        if !(r.residual_sup < tol) {
            return Self::failure(
                r.lambda,
                r.kind.into(),
                format!("failed: residual {:e} above tolerance", r.residual_sup),
            );
        }
        BranchRow {
            lambda: r.lambda,
            branch: r.kind.into(),
            energy: Some(r.level()),
            linf_norm: Some(r.linf_norm()),
            residual: Some(r.residual_sup),
            positive_on_plus: Some(r.positive_on_all_plus()),
            dead_cores: Some(r.dead_core_components.len()),
            iterations: Some(r.iterations),
            status: OK.into(),
        }
    }

    pub fn failure(lambda: f64, branch: Branch, status: impl Into<String>) -> Self {
        let status = status.into();
        assert_ne!(status, OK, "failure rows need a marker");
        BranchRow {
            lambda,
            branch,
            energy: None,
            linf_norm: None,
            residual: None,
            positive_on_plus: None,
            dead_cores: None,
            iterations: None,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == OK
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BranchTable {
    rows: Vec<BranchRow>,
}

impl BranchTable {
    /// Rows sorted by branch, then λ; ties keep their input order.
    pub fn new(mut rows: Vec<BranchRow>) -> Self {
        rows.sort_by(|a, b| a.branch.cmp(&b.branch).then(a.lambda.total_cmp(&b.lambda)));
        BranchTable { rows }
    }

    pub fn rows(&self) -> &[BranchRow] {
        &self.rows
    }

    pub fn branch(&self, b: Branch) -> impl Iterator<Item = &BranchRow> {
        self.rows.iter().filter(move |r| r.branch == b)
    }

    /// Successful rows of one branch.
    pub fn ok_rows(&self, b: Branch) -> impl Iterator<Item = &BranchRow> {
        self.branch(b).filter(|r| r.is_ok())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS).expect("writing to memory");
        let opt_f = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        let opt = |x: Option<String>| x.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                fmt_f64(r.lambda),
                r.branch.as_str().to_string(),
                opt_f(r.energy),
                opt_f(r.linf_norm),
                opt_f(r.residual),
                opt(r.positive_on_plus.map(|b| b.to_string())),
                opt(r.dead_cores.map(|b| b.to_string())),
                opt(r.iterations.map(|b| b.to_string())),
                r.status.clone(),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("CSV of UTF-8 fields")
    }

    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != COLUMNS {
            return Err(LabError::Table(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |i: usize, e: String| LabError::Table(format!("{} = {:?}: {e}", COLUMNS[i], field(i)));
            let opt_f = |i: usize| -> Result<Option<f64>> {
                match field(i) {
                    "" => Ok(None),
                    v => v.parse().map(Some).map_err(|e: std::num::ParseFloatError| bad(i, e.to_string())),
                }
            };
            let opt_u = |i: usize| -> Result<Option<usize>> {
                match field(i) {
                    "" => Ok(None),
                    v => v.parse().map(Some).map_err(|e: std::num::ParseIntError| bad(i, e.to_string())),
                }
            };
            rows.push(BranchRow {
                lambda: field(0).parse().map_err(|e: std::num::ParseFloatError| bad(0, e.to_string()))?,
                branch: field(1).parse().map_err(|e| bad(1, e))?,
                energy: opt_f(2)?,
                linf_norm: opt_f(3)?,
                residual: opt_f(4)?,
                positive_on_plus: match field(5) {
                    "" => None,
                    v => Some(v.parse().map_err(|e: std::str::ParseBoolError| bad(5, e.to_string()))?),
                },
                dead_cores: opt_u(6)?,
                iterations: opt_u(7)?,
                status: field(8).to_string(),
            });
        }
        Ok(BranchTable { rows })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.rows)?)
    }

    pub fn from_json(reader: impl Read) -> Result<Self> {
        Ok(BranchTable {
            rows: serde_json::from_reader(reader)?,
        })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => Ok(self.to_csv()),
            Format::Json => self.to_json().map(|mut s| {
                s.push('\n');
                s
            }),
        }
    }

    pub fn emit(&self, out: &mut impl Write, format: Format) -> Result<()> {
        out.write_all(self.render(format)?.as_bytes())
            .map_err(|source| LabError::Io {
                path: "<output>".into(),
                source,
            })
    }
}
