//! Brute-force checks of moduli of convexity.
//!
//! [`arc_max_exp`] maximises the midpoint paranorm over the exact extremal
//! family for φ(t) = eᵗ − 1 on ℝ² with unit weights. [`empirical_modulus`]
//! searches the definition directly: among x, y with p(x) ≤ r, p(y) ≤ r and
//! p(x − y) ≥ ε it looks for the largest p((x + y)/2).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::modulus::{delta0, exp_eps_max, in_delta, in_delta_phi_exp, Modulus, ModulusError};
use crate::paranorm::ParanormContext;
use crate::solve::bisect_increasing;

pub const ARC_POINTS: usize = 4000;
pub const LOW_COVERAGE: usize = 100;
/// δ̂ below δ_theory by more than this is a violation.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Slack allowed when re-validating a returned pair.
pub const REVALIDATION_TOL: f64 = 1e-12;
const SEARCH_BATCH: usize = 1024;
const RADII: [f64; 3] = [1.0, 0.9, 0.5];
const CLIMB_HALVINGS: usize = 20;
const CLIMB_PASSES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("(r, eps) = ({r}, {eps}) is outside {domain}")]
    OutOfDomain { r: f64, eps: f64, domain: &'static str },
    #[error("empty arc: alpha = {alpha} not in (2, 2(rho - 1)) with rho = {rho}")]
    EmptyArc { rho: f64, alpha: f64 },
    #[error("returned pair fails re-validation: {detail}")]
    Revalidation { detail: String },
    #[error(transparent)]
    Modulus(#[from] ModulusError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub r: f64,
    pub eps: f64,
    /// Largest midpoint paranorm found.
    pub worst: f64,
    /// r − worst
    pub delta_hat: f64,
    /// Largest midpoint paranorm among the raw samples, before the hill climb.
    pub sampled_worst: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Pairs that met the constraints (before refinement).
    pub feasible: usize,
    pub low_coverage: bool,
}

/// Arc-sweep outcome for φ(t) = eᵗ − 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcResult {
    pub oracle: OracleResult,
    pub rho: f64,
    pub alpha: f64,
    /// Parameter where t(s) = ρ − 1.
    pub s_end: f64,
    pub argmax_s: f64,
    /// log(f − 1) at s = 1 and at s = s_end.
    pub endpoint_values: [f64; 2],
    pub argmax_at_endpoint: bool,
    pub critical: (f64, f64),
    pub f_critical: f64,
    pub f_endpoint: f64,
    /// f at the critical point lies below both endpoints and below its sweep neighbours.
    pub critical_is_strict_min: bool,
}

/// Second arc coordinate: the smaller root of t² − (ρ + αs)t + s(αρ − ρ + s) = 0.
pub fn arc_t(rho: f64, alpha: f64, s: f64) -> f64 {
    let b = rho + alpha * s;
    let c = s * (alpha * rho - rho + s);
    let disc = (b * b - 4.0 * c).max(0.0);
    2.0 * c / (b + disc.sqrt())
}

/// f(s, t) = √(st) + √((ρ − s)(ρ − t)).
pub fn arc_f(rho: f64, s: f64, t: f64) -> f64 {
    (s * t).sqrt() + ((rho - s) * (rho - t)).sqrt()
}

fn midpoint_norm(rho: f64, alpha: f64, s: f64) -> f64 {
    (arc_f(rho, s, arc_t(rho, alpha, s)) - 1.0).ln()
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Sweeps the arc Γ_α of pairs on the sphere p = r separated by exactly ε and
/// returns the largest midpoint paranorm, without assuming where it sits.
pub fn arc_max_exp(r: f64, eps: f64) -> Result<ArcResult, OracleError> {
    if !in_delta_phi_exp(r, eps) {
        return Err(OracleError::OutOfDomain {
            r,
            eps,
            domain: "Delta_phi",
        });
    }
    let rho = r.exp() + 1.0;
    let alpha = eps.exp() + 1.0;
    if !(alpha > 2.0 && alpha <= 2.0 * (rho - 1.0)) || arc_t(rho, alpha, 1.0) > rho - 1.0 {
        return Err(OracleError::EmptyArc { rho, alpha });
    }
    let (lo, hi) = bisect_increasing(|s| arc_t(rho, alpha, s) - (rho - 1.0), 1.0, rho - 1.0, 300);
    let s_end = if (arc_t(rho, alpha, hi) - (rho - 1.0)).abs() < (arc_t(rho, alpha, lo) - (rho - 1.0)).abs() {
        hi
    } else {
        lo
    };
    let m = |s: f64| midpoint_norm(rho, alpha, s);

    let grid: Vec<f64> = (0..ARC_POINTS)
        .map(|i| {
            if i + 1 == ARC_POINTS {
                s_end
            } else {
                1.0 + (s_end - 1.0) * i as f64 / (ARC_POINTS - 1) as f64
            }
        })
        .collect();
    let values: Vec<f64> = grid.iter().map(|&s| m(s)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let (mut argmax_s, mut worst) = (grid[best], values[best]);
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(ARC_POINTS - 1)];
    let (gs, gv) = golden_max(m, a, b);
    if gv > worst {
        argmax_s = gs;
        worst = gv;
    }

    let endpoint_values = [values[0], values[ARC_POINTS - 1]];
    let step = (s_end - 1.0) / (ARC_POINTS - 1) as f64;
    let near_end = (argmax_s - 1.0).abs() <= step || (argmax_s - s_end).abs() <= step;
    let endpoint_best = endpoint_values[0].max(endpoint_values[1]);
    let argmax_at_endpoint = near_end && worst - endpoint_best <= 1e-12 * worst.abs().max(1.0);

    let sc = 2.0 * rho / (alpha + 2.0);
    let tc = alpha * rho / (alpha + 2.0);
    let f_critical = arc_f(rho, sc, tc);
    let f_endpoint = arc_f(rho, 1.0, arc_t(rho, alpha, 1.0));
    let h = 1e-3 * (s_end - 1.0);
    let f_near = |s: f64| arc_f(rho, s, arc_t(rho, alpha, s));
    let critical_is_strict_min = f_critical < f_endpoint && f_critical < f_near(sc - h) && f_critical < f_near(sc + h);

    let t_star = arc_t(rho, alpha, argmax_s);
    let oracle = OracleResult {
        r,
        eps,
        worst,
        delta_hat: r - worst,
        sampled_worst: values[best],
        x: vec![argmax_s.ln(), (rho - argmax_s).ln()],
        y: vec![t_star.ln(), (rho - t_star).ln()],
        samples: ARC_POINTS,
        seed: 0,
        feasible: ARC_POINTS,
        low_coverage: false,
    };
    Ok(ArcResult {
        oracle,
        rho,
        alpha,
        s_end,
        argmax_s,
        endpoint_values,
        argmax_at_endpoint,
        critical: (sc, tc),
        f_critical,
        f_endpoint,
        critical_is_strict_min,
    })
}

/// r − δ₀(r, ε) for comparison with [`arc_max_exp`].
pub fn arc_prediction(r: f64, eps: f64) -> Result<f64, OracleError> {
    Ok(r - delta0(r, eps)?)
}

/// Largest ε for which [`arc_max_exp`] is defined.
pub fn arc_eps_max(r: f64) -> f64 {
    exp_eps_max(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Points drawn at radii r, 0.9r and 0.5r.
    Ball,
    /// Points drawn on the sphere p = r only.
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub samples: usize,
    pub seed: u64,
    pub mode: SearchMode,
}

impl SearchConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        SearchConfig {
            samples,
            seed,
            mode: SearchMode::Ball,
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    value: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct SearchBatch {
    best: Option<Candidate>,
    feasible: usize,
}

impl SearchBatch {
    fn merge(mut self, other: SearchBatch) -> SearchBatch {
        if let Some(c) = other.best {
            if self.best.as_ref().is_none_or(|b| c.value > b.value) {
                self.best = Some(c);
            }
        }
        self.feasible += other.feasible;
        self
    }
}

fn gaussian(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample(StandardNormal)).collect()
}

fn midpoint(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect()
}

fn difference(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

struct Search<'a> {
    ctx: &'a ParanormContext,
    r: f64,
    eps: f64,
}

impl Search<'_> {
    /// Midpoint paranorm if (x, y) is feasible.
    fn score(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        if self.ctx.p(&difference(x, y)) < self.eps {
            return None;
        }
        let m = self.ctx.p(&midpoint(x, y));
        m.is_finite().then_some(m)
    }

    /// Pulls a point back onto the ball along its ray if it left it.
    fn project(&self, x: Vec<f64>) -> Option<Vec<f64>> {
        let p = self.ctx.p(&x);
        if p <= self.r {
            Some(x)
        } else {
            self.ctx.radial_scale(&x, self.r).ok()
        }
    }

    fn batch(&self, cfg: &SearchConfig, b: usize, stream_base: u64) -> SearchBatch {
        let k = self.ctx.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream_base + b as u64);
        let count = (cfg.samples - b * SEARCH_BATCH).min(SEARCH_BATCH);
        let mut out = SearchBatch::default();
        for i in 0..count {
            let idx = b * SEARCH_BATCH + i;
            let dx = gaussian(&mut rng, k);
            let noise = gaussian(&mut rng, k);
            // alternate independent directions with near-antipodal ones so that
            // separations close to 2r are reachable
            let dy: Vec<f64> = if idx.is_multiple_of(2) {
                noise
            } else {
                let spread = 0.05 + 0.5 * rng.random::<f64>();
                dx.iter().zip(&noise).map(|(a, n)| -a + spread * n).collect()
            };
            let (fx, fy) = match cfg.mode {
                SearchMode::Ball => (RADII[idx % 3], RADII[(idx / 3) % 3]),
                SearchMode::Sphere => (1.0, 1.0),
            };
            let (Ok(x), Ok(y)) = (
                self.ctx.radial_scale(&dx, fx * self.r),
                self.ctx.radial_scale(&dy, fy * self.r),
            ) else {
                continue;
            };
            if let Some(v) = self.score(&x, &y) {
                out.feasible += 1;
                if out.best.as_ref().is_none_or(|c| v > c.value) {
                    out.best = Some(Candidate { value: v, x, y });
                }
            }
        }
        out
    }

    /// Coordinatewise hill climb from the batch winner.
    fn climb(&self, mut best: Candidate) -> Candidate {
        let k = self.ctx.dim();
        let mut h = 0.1 * self.r;
        for _ in 0..=CLIMB_HALVINGS {
            for _ in 0..CLIMB_PASSES {
                let mut improved = false;
                for coord in 0..2 * k {
                    for sign in [1.0, -1.0] {
                        let (mut x, mut y) = (best.x.clone(), best.y.clone());
                        if coord < k {
                            x[coord] += sign * h;
                        } else {
                            y[coord - k] += sign * h;
                        }
                        let (Some(x), Some(y)) = (self.project(x), self.project(y)) else {
                            continue;
                        };
                        if let Some(v) = self.score(&x, &y) {
                            if v > best.value {
                                best = Candidate { value: v, x, y };
                                improved = true;
                            }
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            h *= 0.5;
        }
        best
    }
}

/// Seeded search for the worst midpoint over the closed r-ball.
pub fn empirical_modulus(
    ctx: &ParanormContext,
    r: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<OracleResult, OracleError> {
    empirical_modulus_with(ctx, r, eps, &SearchConfig::new(samples, seed))
}

pub fn empirical_modulus_with(
    ctx: &ParanormContext,
    r: f64,
    eps: f64,
    cfg: &SearchConfig,
) -> Result<OracleResult, OracleError> {
    search(ctx, r, eps, cfg, 0)
}

fn search(
    ctx: &ParanormContext,
    r: f64,
    eps: f64,
    cfg: &SearchConfig,
    stream_base: u64,
) -> Result<OracleResult, OracleError> {
    if !in_delta(r, eps) {
        return Err(OracleError::OutOfDomain {
            r,
            eps,
            domain: "Delta",
        });
    }
    let s = Search { ctx, r, eps };
    let batches = cfg.samples.div_ceil(SEARCH_BATCH);
    let merged = (0..batches)
        .into_par_iter()
        .map(|b| s.batch(cfg, b, stream_base))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(SearchBatch::default(), SearchBatch::merge);

    let low_coverage = merged.feasible < LOW_COVERAGE;
    let Some(start) = merged.best else {
        return Ok(OracleResult {
            r,
            eps,
            worst: f64::NAN,
            delta_hat: f64::NAN,
            sampled_worst: f64::NAN,
            x: Vec::new(),
            y: Vec::new(),
            samples: cfg.samples,
            seed: cfg.seed,
            feasible: 0,
            low_coverage: true,
        });
    };
    let sampled_worst = start.value;
    let best = s.climb(start);
    revalidate(ctx, r, eps, &best.x, &best.y)?;
    Ok(OracleResult {
        r,
        eps,
        worst: best.value,
        delta_hat: r - best.value,
        sampled_worst,
        x: best.x,
        y: best.y,
        samples: cfg.samples,
        seed: cfg.seed,
        feasible: merged.feasible,
        low_coverage,
    })
}

fn revalidate(ctx: &ParanormContext, r: f64, eps: f64, x: &[f64], y: &[f64]) -> Result<(), OracleError> {
    let (px, py, pd) = (ctx.p(x), ctx.p(y), ctx.p(&difference(x, y)));
    if px <= r + REVALIDATION_TOL && py <= r + REVALIDATION_TOL && pd >= eps - REVALIDATION_TOL {
        Ok(())
    } else {
        Err(OracleError::Revalidation {
            detail: format!("p(x) = {px}, p(y) = {py}, p(x-y) = {pd}, r = {r}, eps = {eps}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub r: f64,
    pub eps: f64,
    pub delta_theory: f64,
    pub delta_empirical: f64,
    pub violation: bool,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub feasible: usize,
    pub low_coverage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub method: String,
    pub samples: usize,
    pub seed: u64,
    /// Factor applied to the theoretical modulus (1 except in mutation tests).
    pub delta_scale: f64,
    pub rows: Vec<LowerBoundRow>,
    pub violations: usize,
    pub low_coverage_points: usize,
}

/// Checks δ̂(r, ε) ≥ scale·δ(r, ε) − 1e−9 at every grid point. Each point gets
/// its own block of random streams, so rows are independent of grid order.
pub fn check_lower_bound(
    ctx: &ParanormContext,
    modulus: &Modulus,
    points: &[(f64, f64)],
    samples: usize,
    seed: u64,
    delta_scale: f64,
) -> Result<LowerBoundReport, OracleError> {
    lower_bound_rows(ctx, Some(modulus), points, samples, seed, delta_scale)
}

/// Empirical δ̂ only, for spaces with no modulus formula. `delta_theory` is NaN
/// and no row is a violation.
pub fn survey(
    ctx: &ParanormContext,
    points: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<LowerBoundReport, OracleError> {
    lower_bound_rows(ctx, None, points, samples, seed, 1.0)
}

fn lower_bound_rows(
    ctx: &ParanormContext,
    modulus: Option<&Modulus>,
    points: &[(f64, f64)],
    samples: usize,
    seed: u64,
    delta_scale: f64,
) -> Result<LowerBoundReport, OracleError> {
    let cfg = SearchConfig::new(samples, seed);
    let stride = (samples.div_ceil(SEARCH_BATCH) as u64).max(1);
    let mut rows = Vec::with_capacity(points.len());
    for (i, &(r, eps)) in points.iter().enumerate() {
        let theory = match modulus {
            Some(m) => delta_scale * m.delta(r, eps)?,
            None => f64::NAN,
        };
        let found = search(ctx, r, eps, &cfg, i as u64 * stride)?;
        let violation = found.delta_hat.is_finite() && found.delta_hat < theory - VIOLATION_TOL;
        rows.push(LowerBoundRow {
            r,
            eps,
            delta_theory: theory,
            delta_empirical: found.delta_hat,
            violation,
            x: found.x,
            y: found.y,
            feasible: found.feasible,
            low_coverage: found.low_coverage,
        });
    }
    let violations = rows.iter().filter(|r| r.violation).count();
    let low_coverage_points = rows.iter().filter(|r| r.low_coverage).count();
    Ok(LowerBoundReport {
        method: modulus.map_or_else(|| "empirical".to_string(), |m| m.method().to_string()),
        samples,
        seed,
        delta_scale,
        rows,
        violations,
        low_coverage_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Generator;
    use crate::measure::MeasureSpace;
    use crate::modulus::{delta_ea, delta_thm5};
    use std::f64::consts::E;

    fn ctx(g: Generator, w: &[f64]) -> ParanormContext {
        ParanormContext::new(g, MeasureSpace::new(w.to_vec()).unwrap())
    }

    #[test]
    fn arc_at_one_half() {
        let res = arc_max_exp(1.0, 0.5).unwrap();
        let predicted = arc_prediction(1.0, 0.5).unwrap();
        assert!((res.oracle.worst - predicted).abs() < 1e-8);
        assert!((res.oracle.worst - 0.988_514_435_145_166_5).abs() < 1e-8);
        assert!(res.argmax_at_endpoint);
        assert!((res.endpoint_values[0] - res.endpoint_values[1]).abs() < 1e-10);
        assert!(res.critical_is_strict_min);
        assert!((arc_t(res.rho, res.alpha, res.s_end) - (res.rho - 1.0)).abs() < 1e-10);
        assert!(arc_max_exp(1.0, 3.0).is_err());
    }

    #[test]
    fn euclidean_search_is_near_tight() {
        let c = ctx(Generator::power(2.0).unwrap(), &[1.0, 1.0]);
        let res = empirical_modulus(&c, 1.0, 1.0, 4000, 3).unwrap();
        let exact = 1.0 - 3f64.sqrt() / 2.0;
        assert!(res.delta_hat >= exact - 1e-6);
        assert!(res.delta_hat <= exact + 1e-3);
        assert!(!res.low_coverage);
        assert!(empirical_modulus(&c, 1.0, 2.0, 10, 0).is_err());
    }

    #[test]
    fn exp_search_respects_the_modulus() {
        let c = ctx(Generator::exp_minus_one(E).unwrap(), &[1.0, 1.0]);
        let res = empirical_modulus(&c, 1.0, 1.0, 4000, 11).unwrap();
        assert!(res.delta_hat >= delta_thm5(1.0, 1.0).unwrap() - 1e-9);
    }

    #[test]
    fn search_is_deterministic() {
        let c = ctx(Generator::power(3.0).unwrap(), &[1.0, 0.5, 2.0]);
        let a = empirical_modulus(&c, 1.5, 1.0, 3000, 5).unwrap();
        let b = empirical_modulus(&c, 1.5, 1.0, 3000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_control_finds_violations() {
        let g = Generator::power(2.0).unwrap();
        let c = ctx(g.clone(), &[1.0, 1.0]);
        let m = Modulus::EA(g.clone());
        let pts = [(1.0, 1.0), (2.0, 3.0)];
        let honest = check_lower_bound(&c, &m, &pts, 2000, 1, 1.0).unwrap();
        assert_eq!(honest.violations, 0);
        let inflated = check_lower_bound(&c, &m, &pts, 2000, 1, 1.5).unwrap();
        assert!(inflated.violations > 0);
        assert!((inflated.rows[0].delta_theory - 1.5 * delta_ea(&g, 1.0, 1.0).unwrap()).abs() < 1e-15);
    }
}
