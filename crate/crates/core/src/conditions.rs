//! Grid audits of the hypotheses placed on a generator φ, and route
//! certification for the paranorm and uniform-convexity theorems.
//!
//! Every check is a finite midpoint or pointwise test. A check reports the
//! worst point it saw, normalised by the size of the two sides:
//!
//! ```text
//! rel_margin = slack / max(|lhs|, |rhs|)
//! ```
//!
//! where `slack` is positive when the inequality holds. A check holds when
//! `rel_margin >= -HOLDS_SLACK`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::generator::Generator;
use crate::measure::{CaseClass, MeasureSpace};

/// Relative slack absorbed by every "holds" verdict.
pub const HOLDS_SLACK: f64 = 1e-9;
/// Minimum relative gap for strict convexity at r ≠ s.
pub const STRICT_FLOOR: f64 = 1e-12;
/// Tolerance of the sign identity, relative to max(1, |side|).
pub const IDENTITY_TOL: f64 = 1e-12;
/// Points per axis for the two-variable transforms F, G and H.
pub const PAIR_SUBGRID: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs 0 < lo < hi, got lo = {lo}, hi = {hi}")]
    BadBounds { lo: f64, hi: f64 },
    #[error("grid needs n >= 2, got {n}")]
    TooFewPoints { n: usize },
    #[error("cannot parse grid `{text}`: expected lo:hi:n:log|lin")]
    Parse { text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// Sample points `lo = g_0 < … < g_{n-1} = hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid2 {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub spacing: Spacing,
}

impl Default for Grid2 {
    fn default() -> Self {
        Grid2 {
            lo: 1e-4,
            hi: 30.0,
            n: 120,
            spacing: Spacing::Log,
        }
    }
}

impl Grid2 {
    pub fn new(lo: f64, hi: f64, n: usize, spacing: Spacing) -> Result<Self, GridError> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(GridError::BadBounds { lo, hi });
        }
        if n < 2 {
            return Err(GridError::TooFewPoints { n });
        }
        Ok(Grid2 { lo, hi, n, spacing })
    }

    /// Default grid, with `hi` capped so that r + s stays below T_max.
    pub fn default_for(g: &Generator) -> Self {
        Grid2::default().capped_for(g)
    }

    pub fn capped_for(mut self, g: &Generator) -> Self {
        self.hi = self.hi.min(0.5 * g.t_max());
        self
    }

    pub fn points(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.lo;
                }
                if i + 1 == n {
                    return self.hi;
                }
                let f = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.lo + (self.hi - self.lo) * f,
                    Spacing::Log => (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * f).exp(),
                }
            })
            .collect()
    }

    /// At most `m` grid points, evenly subsampled and always keeping both ends.
    pub fn subsample(&self, m: usize) -> Vec<f64> {
        let pts = self.points();
        if pts.len() <= m || m < 2 {
            return pts;
        }
        (0..m)
            .map(|i| pts[(i * (pts.len() - 1) + (m - 1) / 2) / (m - 1)])
            .collect()
    }
}

impl fmt::Display for Grid2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.spacing {
            Spacing::Linear => "lin",
            Spacing::Log => "log",
        };
        write!(f, "{}:{}:{}:{}", self.lo, self.hi, self.n, s)
    }
}

impl FromStr for Grid2 {
    type Err = GridError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || GridError::Parse { text: text.to_string() };
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let lo = parts[0].parse().map_err(|_| bad())?;
        let hi = parts[1].parse().map_err(|_| bad())?;
        let n = parts[2].parse().map_err(|_| bad())?;
        let spacing = match parts[3] {
            "log" => Spacing::Log,
            "lin" | "linear" => Spacing::Linear,
            _ => return Err(bad()),
        };
        Grid2::new(lo, hi, n, spacing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "holds-on-grid")]
    Holds,
    #[serde(rename = "fails")]
    Fails,
    /// No point of the grid could be evaluated.
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds-on-grid",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The point where a check was tightest, with both sides of the inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Witness {
    pub fn new(point: Vec<f64>, lhs: f64, rhs: f64) -> Self {
        Witness {
            point,
            lhs,
            rhs,
            detail: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub name: String,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CrossCheck {
    pub fn new(name: &str, holds: bool, detail: Option<String>) -> Self {
        CrossCheck {
            name: name.to_string(),
            holds,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub verdict: Verdict,
    /// Signed slack at the witness; negative means violated.
    pub margin: f64,
    /// `margin` divided by max(|lhs|, |rhs|) at the witness.
    pub rel_margin: f64,
    pub witness: Option<Witness>,
    pub grid: Option<Grid2>,
    pub evaluated: usize,
    /// Points excluded because a side was undefined, not finite, or degenerate.
    pub skipped: usize,
    pub cross_checks: Vec<CrossCheck>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    /// lhs ≥ rhs
    Ge,
    /// lhs ≤ rhs
    Le,
}

#[derive(Debug, Clone)]
struct Worst {
    rel: f64,
    slack: f64,
    witness: Witness,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    worst: Option<Worst>,
    evaluated: usize,
    skipped: usize,
}

impl Tally {
    fn push(&mut self, point: impl FnOnce() -> Vec<f64>, lhs: f64, rhs: f64, sense: Sense, detail: Option<&str>) {
        if !(lhs.is_finite() && rhs.is_finite()) {
            self.skipped += 1;
            return;
        }
        self.evaluated += 1;
        let slack = match sense {
            Sense::Ge => lhs - rhs,
            Sense::Le => rhs - lhs,
        };
        let scale = lhs.abs().max(rhs.abs());
        let rel = if scale == 0.0 { 0.0 } else { slack / scale };
        if self.worst.as_ref().is_none_or(|w| rel < w.rel) {
            let mut witness = Witness::new(point(), lhs, rhs);
            witness.detail = detail.map(str::to_string);
            self.worst = Some(Worst { rel, slack, witness });
        }
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn merge(mut self, other: Tally) -> Tally {
        if let Some(w) = other.worst {
            if self.worst.as_ref().is_none_or(|s| w.rel < s.rel) {
                self.worst = Some(w);
            }
        }
        self.evaluated += other.evaluated;
        self.skipped += other.skipped;
        self
    }

    fn report(self, name: &str, threshold: f64, grid: Option<Grid2>) -> ConditionReport {
        let (verdict, margin, rel_margin, witness) = match self.worst {
            Some(w) if self.evaluated > 0 => {
                let v = if w.rel >= threshold {
                    Verdict::Holds
                } else {
                    Verdict::Fails
                };
                (v, w.slack, w.rel, Some(w.witness))
            }
            _ => (Verdict::Inconclusive, f64::NAN, f64::NAN, None),
        };
        ConditionReport {
            name: name.to_string(),
            verdict,
            margin,
            rel_margin,
            witness,
            grid,
            evaluated: self.evaluated,
            skipped: self.skipped,
            cross_checks: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Runs `f(i, j)` over index pairs `i <= j` (or `i < j`), in parallel over `i`,
/// and merges the tallies in index order so the result does not depend on
/// scheduling.
fn scan_pairs<F>(n: usize, include_diagonal: bool, f: F) -> Tally
where
    F: Fn(usize, usize, &mut Tally) + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut t = Tally::default();
            let start = if include_diagonal { i } else { i + 1 };
            for j in start..n {
                f(i, j, &mut t);
            }
            t
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge)
}

/// φ(r+s) + φ(|r−s|) and 2φ(r) + 2φ(s).
pub fn quadratic_sides(g: &Generator, r: f64, s: f64) -> (f64, f64) {
    (g.phi(r + s) + g.phi((r - s).abs()), 2.0 * g.phi(r) + 2.0 * g.phi(s))
}

fn quadratic_check(
    g: &Generator,
    pairs: &[(f64, f64)],
    name: &str,
    sense: Sense,
    grid: Option<Grid2>,
) -> ConditionReport {
    let mut t = Tally::default();
    for &(r, s) in pairs {
        let (lhs, rhs) = quadratic_sides(g, r, s);
        t.push(|| vec![r, s], lhs, rhs, sense, None);
    }
    t.report(name, -HOLDS_SLACK, grid)
}

fn grid_quadratic(g: &Generator, grid: &Grid2, name: &str, sense: Sense) -> ConditionReport {
    let pts = grid.points();
    let t = scan_pairs(pts.len(), true, |i, j, t| {
        let (r, s) = (pts[i], pts[j]);
        let (lhs, rhs) = quadratic_sides(g, r, s);
        t.push(|| vec![r, s], lhs, rhs, sense, None);
    });
    t.report(name, -HOLDS_SLACK, Some(*grid))
}

/// φ(r+s) + φ(|r−s|) ≥ 2φ(r) + 2φ(s) on grid × grid.
pub fn check_superquadratic(g: &Generator, grid: &Grid2) -> ConditionReport {
    grid_quadratic(g, grid, "superquadratic", Sense::Ge)
}

/// The superquadratic inequality at explicit points (r, s).
pub fn check_superquadratic_at(g: &Generator, pairs: &[(f64, f64)]) -> ConditionReport {
    quadratic_check(g, pairs, "superquadratic", Sense::Ge, None)
}

/// φ(r+s) + φ(|r−s|) ≤ 2φ(r) + 2φ(s) on grid × grid.
pub fn check_subquadratic(g: &Generator, grid: &Grid2) -> ConditionReport {
    grid_quadratic(g, grid, "subquadratic", Sense::Le)
}

pub fn check_subquadratic_at(g: &Generator, pairs: &[(f64, f64)]) -> ConditionReport {
    quadratic_check(g, pairs, "subquadratic", Sense::Le, None)
}

/// ψ(r + s) ≤ ψ(r) + ψ(s) on grid × grid, for a transform ψ.
pub fn check_subadditive(g: &Generator, grid: &Grid2) -> ConditionReport {
    let pts = grid.points();
    let vals: Vec<f64> = pts.iter().map(|&t| g.phi(t)).collect();
    let t = scan_pairs(pts.len(), true, |i, j, t| {
        let (r, s) = (pts[i], pts[j]);
        t.push(|| vec![r, s], g.phi(r + s), vals[i] + vals[j], Sense::Le, None);
    });
    t.report("subadditive", -HOLDS_SLACK, Some(*grid))
}

fn midpoint_tally(g: &Generator, grid: &Grid2) -> Tally {
    let pts = grid.points();
    let vals: Vec<f64> = pts.iter().map(|&t| g.phi(t)).collect();
    scan_pairs(pts.len(), false, |i, j, t| {
        let (r, s) = (pts[i], pts[j]);
        t.push(
            || vec![r, s],
            g.phi(0.5 * (r + s)),
            0.5 * (vals[i] + vals[j]),
            Sense::Le,
            None,
        );
    })
}

/// Midpoint convexity φ((r+s)/2) ≤ (φ(r)+φ(s))/2 on grid pairs.
pub fn check_convex(g: &Generator, grid: &Grid2) -> ConditionReport {
    midpoint_tally(g, grid).report("convex", -HOLDS_SLACK, Some(*grid))
}

/// Midpoint convexity with a relative gap of at least [`STRICT_FLOOR`] at every r ≠ s.
pub fn check_strictly_convex(g: &Generator, grid: &Grid2) -> ConditionReport {
    let mut rep = midpoint_tally(g, grid).report("strictly_convex", STRICT_FLOOR, Some(*grid));
    rep.notes.push(format!("relative strictness floor {STRICT_FLOOR:e}"));
    rep
}

/// φ(√(st)) ≤ √(φ(s)φ(t)) on grid pairs, cross-checked against monotonicity of t·φ′(t)/φ(t).
pub fn check_geometric_convex(g: &Generator, grid: &Grid2) -> ConditionReport {
    let pts = grid.points();
    let vals: Vec<f64> = pts.iter().map(|&t| g.phi(t)).collect();
    let tally = scan_pairs(pts.len(), false, |i, j, t| {
        let (r, s) = (pts[i], pts[j]);
        t.push(
            || vec![r, s],
            g.phi((r * s).sqrt()),
            (vals[i] * vals[j]).sqrt(),
            Sense::Le,
            None,
        );
    });
    let mut rep = tally.report("geometrically_convex", -HOLDS_SLACK, Some(*grid));

    let q: Vec<f64> = pts.iter().zip(&vals).map(|(&t, &v)| t * g.d1(t) / v).collect();
    let mut deriv = Tally::default();
    for i in 1..q.len() {
        deriv.push(|| vec![pts[i - 1], pts[i]], q[i], q[i - 1], Sense::Ge, None);
    }
    let deriv = deriv.report("t*phi'/phi nondecreasing", -HOLDS_SLACK, Some(*grid));
    let detail = deriv.witness.as_ref().map(|w| {
        format!(
            "worst step between t = {} and t = {}: {} -> {}",
            w.point[0], w.point[1], w.rhs, w.lhs
        )
    });
    rep.cross_checks
        .push(CrossCheck::new("t*phi'/phi nondecreasing", deriv.holds(), detail));
    if deriv.verdict != rep.verdict {
        rep.notes.push(format!(
            "discrepancy: inequality test {} but derivative-ratio test {}",
            rep.verdict, deriv.verdict
        ));
    }
    rep
}

fn ratio_check(g: &Generator, grid: &Grid2, name: &str, sense: Sense) -> ConditionReport {
    let pts = grid.points();
    let ratio = |t: f64| {
        let d2 = g.d2(t);
        if d2 == 0.0 || !d2.is_finite() {
            f64::NAN
        } else {
            g.d1(t) / d2
        }
    };
    let q: Vec<f64> = pts.iter().map(|&t| ratio(t)).collect();
    let degenerate = q.iter().filter(|v| !v.is_finite()).count();
    let tally = scan_pairs(pts.len(), true, |i, j, t| {
        let (r, s) = (pts[i], pts[j]);
        if !(q[i].is_finite() && q[j].is_finite()) {
            t.skip();
            return;
        }
        t.push(|| vec![r, s], ratio(r + s), q[i] + q[j], sense, None);
    });
    let mut rep = tally.report(name, -HOLDS_SLACK, Some(*grid));
    if degenerate > 0 {
        rep.notes.push(format!(
            "{degenerate} grid points excluded: phi'' vanishes or is undefined"
        ));
    }
    rep
}

/// φ′/φ″ superadditive: R(r+s) ≥ R(r) + R(s) with R = φ′/φ″.
pub fn check_ratio_superadditive(g: &Generator, grid: &Grid2) -> ConditionReport {
    ratio_check(g, grid, "ratio_superadditive", Sense::Ge)
}

/// φ′/φ″ subadditive: R(r+s) ≤ R(r) + R(s).
pub fn check_ratio_subadditive(g: &Generator, grid: &Grid2) -> ConditionReport {
    ratio_check(g, grid, "ratio_subadditive", Sense::Le)
}

/// F(r,s) = φ(φ⁻¹(r) + φ⁻¹(s)).
pub fn f_transform(g: &Generator, r: f64, s: f64) -> f64 {
    g.phi(g.inv(r) + g.inv(s))
}

/// G(r,s) = φ(|φ⁻¹(r) − φ⁻¹(s)|).
pub fn g_transform(g: &Generator, r: f64, s: f64) -> f64 {
    g.phi((g.inv(r) - g.inv(s)).abs())
}

/// H = F + G.
pub fn h_transform(g: &Generator, r: f64, s: f64) -> f64 {
    f_transform(g, r, s) + g_transform(g, r, s)
}

/// φ⁻¹ on a subgrid, its pairwise midpoints and its pairwise sums. These are
/// the only arguments the two-variable midpoint and subadditivity tests need.
struct InverseTable {
    values: Vec<f64>,
    inv: Vec<f64>,
    mid: Vec<f64>,
    mid_inv: Vec<f64>,
    sum: Vec<f64>,
    sum_inv: Vec<f64>,
}

impl InverseTable {
    fn new(g: &Generator, values: Vec<f64>) -> Self {
        let m = values.len();
        let inv = values.iter().map(|&v| g.inv(v)).collect();
        let mut mid = vec![0.0; m * m];
        let mut sum = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                mid[i * m + j] = 0.5 * (values[i] + values[j]);
                sum[i * m + j] = values[i] + values[j];
            }
        }
        let mid_inv = mid.par_iter().map(|&v| g.inv(v)).collect();
        let sum_inv = sum.par_iter().map(|&v| g.inv(v)).collect();
        InverseTable {
            values,
            inv,
            mid,
            mid_inv,
            sum,
            sum_inv,
        }
    }

    fn m(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Copy)]
enum Transform {
    F,
    G,
    H,
}

impl Transform {
    fn of(self, g: &Generator, a: f64, b: f64) -> f64 {
        let f = || g.phi(a + b);
        let d = || g.phi((a - b).abs());
        match self {
            Transform::F => f(),
            Transform::G => d(),
            Transform::H => f() + d(),
        }
    }
}

/// Midpoint test of a transform over all pairs of subgrid points
/// P = (v_a, v_c), Q = (v_b, v_d).
fn transform_midpoint(g: &Generator, table: &InverseTable, tr: Transform, sense: Sense) -> Tally {
    let m = table.m();
    let n = m * m;
    scan_pairs(n, false, |p, q, t| {
        let (a, c) = (p / m, p % m);
        let (b, d) = (q / m, q % m);
        let at_p = tr.of(g, table.inv[a], table.inv[c]);
        let at_q = tr.of(g, table.inv[b], table.inv[d]);
        let at_mid = tr.of(g, table.mid_inv[a * m + b], table.mid_inv[c * m + d]);
        let point = || {
            vec![
                table.values[a],
                table.values[c],
                table.values[b],
                table.values[d],
                table.mid[a * m + b],
                table.mid[c * m + d],
            ]
        };
        t.push(point, at_mid, 0.5 * (at_p + at_q), sense, None);
    })
}

fn pair_grid_note(grid: &Grid2, m: usize) -> String {
    format!("value grid subsampled to {m} points per axis from {grid}")
}

fn transform_report(g: &Generator, grid: &Grid2, tr: Transform, sense: Sense, name: &str) -> ConditionReport {
    let table = InverseTable::new(g, grid.subsample(PAIR_SUBGRID));
    let mut rep = transform_midpoint(g, &table, tr, sense).report(name, -HOLDS_SLACK, Some(*grid));
    rep.notes.push(pair_grid_note(grid, table.m()));
    rep.notes.push("witness point: P, Q, midpoint".into());
    rep
}

fn implication(premise: &ConditionReport, conclusion: &ConditionReport) -> CrossCheck {
    let holds = !(premise.holds() && conclusion.verdict == Verdict::Fails);
    CrossCheck::new(
        &format!("{} implies {}", premise.name, conclusion.name),
        holds,
        Some(format!(
            "{}: {}, {}: {}",
            premise.name, premise.verdict, conclusion.name, conclusion.verdict
        )),
    )
}

/// Midpoint concavity of F on pairs of value-grid points, cross-checked
/// against superadditivity of φ′/φ″ on the same grid.
pub fn check_f_concave(g: &Generator, grid: &Grid2) -> ConditionReport {
    let mut rep = transform_report(g, grid, Transform::F, Sense::Ge, "F_concave");
    let ratio = check_ratio_superadditive(g, grid);
    rep.cross_checks.push(implication(&ratio, &rep));
    rep
}

/// Midpoint convexity of G, cross-checked against superadditivity of φ′/φ″.
pub fn check_g_convex(g: &Generator, grid: &Grid2) -> ConditionReport {
    let mut rep = transform_report(g, grid, Transform::G, Sense::Le, "G_convex");
    let ratio = check_ratio_superadditive(g, grid);
    rep.cross_checks.push(implication(&ratio, &rep));
    rep
}

/// Midpoint convexity of H = F + G.
pub fn check_h_convex(g: &Generator, grid: &Grid2) -> ConditionReport {
    transform_report(g, grid, Transform::H, Sense::Le, "H_convex")
}

/// H(r₁+r₂, s₁+s₂) ≤ H(r₁,s₁) + H(r₂,s₂) over pairs of value-grid points,
/// including each point paired with itself.
pub fn check_h_subadditive(g: &Generator, grid: &Grid2) -> ConditionReport {
    let table = InverseTable::new(g, grid.subsample(PAIR_SUBGRID));
    let m = table.m();
    let tr = Transform::H;
    let tally = scan_pairs(m * m, true, |p, q, t| {
        let (a, c) = (p / m, p % m);
        let (b, d) = (q / m, q % m);
        let lhs = tr.of(g, table.sum_inv[a * m + b], table.sum_inv[c * m + d]);
        let rhs = tr.of(g, table.inv[a], table.inv[c]) + tr.of(g, table.inv[b], table.inv[d]);
        let point = || {
            vec![
                table.values[a],
                table.values[c],
                table.values[b],
                table.values[d],
                table.sum[a * m + b],
                table.sum[c * m + d],
            ]
        };
        t.push(point, lhs, rhs, Sense::Le, None);
    });
    let mut rep = tally.report("H_subadditive", -HOLDS_SLACK, Some(*grid));
    rep.notes.push(pair_grid_note(grid, m));
    rep.notes.push("witness point: P, Q, P + Q".into());
    rep
}

/// H subadditivity at explicit points `[r1, s1, r2, s2]`.
pub fn check_h_subadditive_at(g: &Generator, quads: &[[f64; 4]]) -> ConditionReport {
    let mut t = Tally::default();
    for &[r1, s1, r2, s2] in quads {
        let lhs = h_transform(g, r1 + r2, s1 + s2);
        let rhs = h_transform(g, r1, s1) + h_transform(g, r2, s2);
        t.push(|| vec![r1, s1, r2, s2], lhs, rhs, Sense::Le, None);
    }
    t.report("H_subadditive", -HOLDS_SLACK, None)
}

/// The three derivative inequalities in φ′, φ″ at (r+s, r−s, r, s) that
/// together imply convexity of H. Checked on pairs with r > s + lo.
pub fn check_derivative_inequalities(g: &Generator, grid: &Grid2) -> ConditionReport {
    let pts = grid.points();
    let band = grid.lo;
    let tally = scan_pairs(pts.len(), false, |i, j, t| {
        let (s, r) = (pts[i], pts[j]);
        if r <= s + band {
            return;
        }
        let (p, m) = (r + s, r - s);
        let d1 = [g.d1(p), g.d1(m), g.d1(r), g.d1(s)];
        let d2 = [g.d2(p), g.d2(m), g.d2(r), g.d2(s)];
        if d1.iter().chain(&d2).any(|v| !(v.is_finite() && *v > 0.0)) {
            t.skip();
            return;
        }
        let [dp, dm, dr, ds] = d1;
        let [ep, em, er, es] = d2;
        let kr = er / dr;
        let ks = es / ds;
        let plus = (ep + em) / (dp + dm);
        let minus = (ep + em) / (dp - dm);
        let point = || vec![r, s];
        let i1_lhs = 4.0 * ep * em / ((dp - dm) * (dp + dm)) + kr * ks;
        let i1_rhs = kr * minus + ks * plus;
        t.push(point, i1_lhs, i1_rhs, Sense::Ge, Some("first (mixed) inequality"));
        t.push(point, plus, kr, Sense::Ge, Some("second inequality"));
        t.push(point, minus, ks, Sense::Ge, Some("third inequality"));
    });
    let mut rep = tally.report("H_convex_derivative_inequalities", -HOLDS_SLACK, Some(*grid));
    rep.notes.push(format!("pairs restricted to r > s + {band}"));
    if rep.verdict == Verdict::Inconclusive {
        rep.notes.push("phi' or phi'' not positive on the grid".into());
    }
    rep
}

/// Both sides of φ(|s|+|t|) + φ(||s|−|t||) = φ(|s+t|) + φ(|s−t|).
pub fn sign_identity_sides(g: &Generator, s: f64, t: f64) -> (f64, f64) {
    let (a, b) = (s.abs(), t.abs());
    (
        g.phi(a + b) + g.phi((a - b).abs()),
        g.phi((s + t).abs()) + g.phi((s - t).abs()),
    )
}

/// The sign identity at explicit signed pairs. `margin` is the largest
/// absolute difference between the sides.
pub fn check_sign_identity(g: &Generator, pairs: &[(f64, f64)]) -> ConditionReport {
    let mut worst: Option<(f64, Witness)> = None;
    let mut rel_worst = 0.0_f64;
    let mut evaluated = 0;
    let mut skipped = 0;
    for &(s, t) in pairs {
        let (lhs, rhs) = sign_identity_sides(g, s, t);
        if !(lhs.is_finite() && rhs.is_finite()) {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        let diff = (lhs - rhs).abs();
        rel_worst = rel_worst.max(diff / lhs.abs().max(1.0));
        if worst.as_ref().is_none_or(|(d, _)| diff > *d) {
            worst = Some((diff, Witness::new(vec![s, t], lhs, rhs)));
        }
    }
    let verdict = match evaluated {
        0 => Verdict::Inconclusive,
        _ if rel_worst <= IDENTITY_TOL => Verdict::Holds,
        _ => Verdict::Fails,
    };
    let (margin, witness) = match worst {
        Some((d, w)) => (d, Some(w)),
        None => (f64::NAN, None),
    };
    ConditionReport {
        name: "sign_identity".into(),
        verdict,
        margin,
        rel_margin: rel_worst,
        witness,
        grid: None,
        evaluated,
        skipped,
        cross_checks: Vec::new(),
        notes: vec!["margin is the largest absolute difference between the two sides".into()],
    }
}

/// The sign identity on all signed pairs (±g_i, ±g_j) of a subsampled grid.
pub fn check_sign_identity_grid(g: &Generator, grid: &Grid2) -> ConditionReport {
    let pts = grid.subsample(PAIR_SUBGRID * 2);
    let signed: Vec<f64> = pts.iter().flat_map(|&v| [v, -v]).collect();
    let pairs: Vec<(f64, f64)> = signed
        .iter()
        .flat_map(|&s| signed.iter().map(move |&t| (s, t)))
        .collect();
    let mut rep = check_sign_identity(g, &pairs);
    rep.grid = Some(*grid);
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParanormRoute {
    #[serde(rename = "Lemma1-F-concave")]
    FConcave,
    #[serde(rename = "Lemma3-Mulholland")]
    Mulholland,
}

impl ParanormRoute {
    pub fn as_str(self) -> &'static str {
        match self {
            ParanormRoute::FConcave => "Lemma1-F-concave",
            ParanormRoute::Mulholland => "Lemma3-Mulholland",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UcRoute {
    #[serde(rename = "Thm1-superquadratic")]
    Superquadratic,
    #[serde(rename = "Thm4-eC")]
    ImplicitModulus,
    #[serde(rename = "Thm11-strict-convexity")]
    StrictConvexity,
    #[serde(rename = "Thm5-exact")]
    ExactExp,
}

impl UcRoute {
    pub fn as_str(self) -> &'static str {
        match self {
            UcRoute::Superquadratic => "Thm1-superquadratic",
            UcRoute::ImplicitModulus => "Thm4-eC",
            UcRoute::StrictConvexity => "Thm11-strict-convexity",
            UcRoute::ExactExp => "Thm5-exact",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub generator: String,
    pub weights: Vec<f64>,
    pub case: CaseClass,
    pub paranorm_routes: Vec<ParanormRoute>,
    pub uc_routes: Vec<UcRoute>,
    pub grid: Grid2,
    /// Bijectivity and every condition were verified on finite grids only.
    pub grid_audited: bool,
    pub reports: Vec<ConditionReport>,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn has_paranorm_route(&self) -> bool {
        !self.paranorm_routes.is_empty()
    }

    pub fn has_uc_route(&self, route: UcRoute) -> bool {
        self.uc_routes.contains(&route)
    }

    pub fn report(&self, name: &str) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

fn is_unit_pair(m: &MeasureSpace) -> bool {
    m.weights() == [1.0, 1.0]
}

/// Audits every condition needed by the route table and lists each route
/// whose constituent reports all hold.
pub fn certify(g: &Generator, m: &MeasureSpace, grid: &Grid2) -> Certificate {
    let grid = grid.capped_for(g);
    let case = m.classify();
    let convex = check_convex(g, &grid);
    let strict = check_strictly_convex(g, &grid);
    let geometric = check_geometric_convex(g, &grid);
    let superquadratic = check_superquadratic(g, &grid);
    let f_concave = check_f_concave(g, &grid);
    let h_convex = check_h_convex(g, &grid);
    let h_subadditive = check_h_subadditive(g, &grid);

    let mut notes = vec![format!(
        "grid-audited: bijectivity on {} log-spaced points up to T_max = {}; conditions on {}",
        crate::generator::AUDIT_POINTS,
        g.t_max(),
        grid
    )];

    let mut paranorm_routes = Vec::new();
    if case.sub_probability && f_concave.holds() {
        paranorm_routes.push(ParanormRoute::FConcave);
        if case.total_mass < 1.0 {
            notes.push(format!(
                "total mass {} < 1: F concavity is sufficient for a paranorm here, not necessary",
                case.total_mass
            ));
        }
    }
    if case.counting_like && convex.holds() && geometric.holds() {
        paranorm_routes.push(ParanormRoute::Mulholland);
    }
    let paranorm = !paranorm_routes.is_empty();

    let mut uc_routes = Vec::new();
    if paranorm && superquadratic.holds() {
        uc_routes.push(UcRoute::Superquadratic);
    }
    let ec_sub_probability = case.sub_probability && h_convex.holds();
    let ec_counting = case.counting_like && case.integer_weights && h_subadditive.holds();
    if paranorm && strict.holds() && (ec_sub_probability || ec_counting) {
        uc_routes.push(UcRoute::ImplicitModulus);
    }
    if case.counting_like && !case.integer_weights && h_subadditive.holds() {
        notes.push("H subadditive but weights are not integers: counting-measure route not applied".into());
    }
    if paranorm && strict.holds() {
        uc_routes.push(UcRoute::StrictConvexity);
    }
    if g.is_exp_minus_one() && is_unit_pair(m) {
        uc_routes.push(UcRoute::ExactExp);
    }
    if case.is_general() {
        notes.push("general measure space: the weighted Jensen condition on H is not checked".into());
    }

    Certificate {
        generator: g.name(),
        weights: m.weights().to_vec(),
        case,
        paranorm_routes,
        uc_routes,
        grid,
        grid_audited: true,
        reports: vec![
            convex,
            strict,
            geometric,
            superquadratic,
            f_concave,
            h_convex,
            h_subadditive,
        ],
        notes,
    }
}

/// All generator conditions on one grid, in a fixed order.
pub fn audit_all(g: &Generator, grid: &Grid2) -> Vec<ConditionReport> {
    let grid = grid.capped_for(g);
    let sign_grid = Grid2 { n: 20, ..grid };
    vec![
        check_superquadratic(g, &grid),
        check_subquadratic(g, &grid),
        check_convex(g, &grid),
        check_strictly_convex(g, &grid),
        check_geometric_convex(g, &grid),
        check_ratio_superadditive(g, &grid),
        check_ratio_subadditive(g, &grid),
        check_f_concave(g, &grid),
        check_g_convex(g, &grid),
        check_h_convex(g, &grid),
        check_h_subadditive(g, &grid),
        check_derivative_inequalities(g, &grid),
        check_sign_identity_grid(g, &sign_grid),
    ]
}
