//! Report serialization. Every float is written with 17 significant digits.

use std::collections::BTreeMap;

use pconvex::{ConditionReport, Grid2, LowerBoundRow, ModulusRow};
use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// `x` as d.dddddddddddddddde±n.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A float that serializes as a 17-digit JSON number, or null when not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt17(self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn sig(v: &[f64]) -> Vec<Sig17> {
    v.iter().copied().map(Sig17).collect()
}

#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub tool_version: &'static str,
    pub config_echo: BTreeMap<&'static str, String>,
    pub results: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<BTreeMap<&'static str, serde_json::Value>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct WitnessOut {
    pub point: Vec<Sig17>,
    pub lhs: Sig17,
    pub rhs: Sig17,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct CrossCheckOut {
    pub name: String,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ConditionOut {
    pub name: String,
    pub verdict: &'static str,
    pub margin: Sig17,
    pub rel_margin: Sig17,
    pub witness: Option<WitnessOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    pub evaluated: usize,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cross_checks: Vec<CrossCheckOut>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl From<&ConditionReport> for ConditionOut {
    fn from(r: &ConditionReport) -> Self {
        ConditionOut {
            name: r.name.clone(),
            verdict: r.verdict.as_str(),
            margin: Sig17(r.margin),
            rel_margin: Sig17(r.rel_margin),
            witness: r.witness.as_ref().map(|w| WitnessOut {
                point: sig(&w.point),
                lhs: Sig17(w.lhs),
                rhs: Sig17(w.rhs),
                detail: w.detail.clone(),
            }),
            grid: r.grid.map(|g: Grid2| g.to_string()),
            evaluated: r.evaluated,
            skipped: r.skipped,
            cross_checks: r
                .cross_checks
                .iter()
                .map(|c| CrossCheckOut {
                    name: c.name.clone(),
                    holds: c.holds,
                    detail: c.detail.clone(),
                })
                .collect(),
            notes: r.notes.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CaseOut {
    pub label: &'static str,
    pub sub_probability: bool,
    pub counting_like: bool,
    pub integer_weights: bool,
    pub total_mass: Sig17,
}

#[derive(Debug, Serialize)]
pub struct CertificateOut {
    pub generator: String,
    pub weights: Vec<Sig17>,
    pub case: CaseOut,
    pub paranorm_routes: Vec<&'static str>,
    pub uc_routes: Vec<&'static str>,
    pub grid: String,
    pub grid_audited: bool,
    pub notes: Vec<String>,
    pub evidence: Vec<ConditionOut>,
}

#[derive(Debug, Serialize)]
pub struct ModulusOut {
    pub r: Sig17,
    pub eps: Sig17,
    pub method: &'static str,
    pub delta: Sig17,
    pub residual: Option<Sig17>,
}

impl From<&ModulusRow> for ModulusOut {
    fn from(row: &ModulusRow) -> Self {
        ModulusOut {
            r: Sig17(row.r),
            eps: Sig17(row.eps),
            method: row.method.as_str(),
            delta: Sig17(row.delta),
            residual: row.residual.map(Sig17),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyOut {
    pub r: Sig17,
    pub eps: Sig17,
    pub delta_theory: Sig17,
    pub delta_empirical: Sig17,
    pub violation: bool,
    pub feasible: usize,
    pub low_coverage: bool,
    pub x: Vec<Sig17>,
    pub y: Vec<Sig17>,
}

impl From<&LowerBoundRow> for VerifyOut {
    fn from(row: &LowerBoundRow) -> Self {
        VerifyOut {
            r: Sig17(row.r),
            eps: Sig17(row.eps),
            delta_theory: Sig17(row.delta_theory),
            delta_empirical: Sig17(row.delta_empirical),
            violation: row.violation,
            feasible: row.feasible,
            low_coverage: row.low_coverage,
            x: sig(&row.x),
            y: sig(&row.y),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BallOut {
    pub theta: Sig17,
    pub x: [Sig17; 2],
}

pub fn to_json<T: Serialize>(report: &Report<T>) -> Result<Vec<u8>, serde_json::Error> {
    let mut out = serde_json::to_vec_pretty(report)?;
    out.push(b'\n');
    Ok(out)
}

pub fn to_csv(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn coords(v: &[f64]) -> String {
    v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(" ")
}
