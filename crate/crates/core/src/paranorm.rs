//! Evaluation of p_φ(x) = φ⁻¹(Σ a_i φ(|x_i|)) and numerical audits of the
//! paranorm axioms.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::conditions::{ConditionReport, CrossCheck, Verdict, Witness};
use crate::generator::{Generator, GeneratorError};
use crate::measure::{MeasureError, MeasureSpace, SimpleFunction};
use crate::solve::bisect_increasing;

/// Slack allowed in p(x+y) ≤ p(x) + p(y).
pub const SUBADDITIVITY_SLACK: f64 = 1e-9;
const AUDIT_BATCH: usize = 1024;
const SAMPLE_SCALES: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParanormError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("Σ a_i φ(|x_i|) = {sum} exceeds φ(T_max) = {cap}")]
    Overflow { sum: f64, cap: f64 },
    #[error("φ(|x_{index}|) is not finite")]
    NonFinite { index: usize },
    #[error("direction vector is zero")]
    ZeroDirection,
    #[error("radius must be positive and finite, got {r}")]
    BadRadius { r: f64 },
    #[error("operation needs a two-dimensional space, got dimension {dim}")]
    NotPlanar { dim: usize },
    #[error("need at least {min} boundary points, got {n}")]
    TooFewPoints { min: usize, n: usize },
}

/// A generator paired with a measure space.
#[derive(Debug, Clone)]
pub struct ParanormContext {
    generator: Generator,
    space: MeasureSpace,
}

impl ParanormContext {
    pub fn new(generator: Generator, space: MeasureSpace) -> Self {
        ParanormContext { generator, space }
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Σ a_i φ(|x_i|), summed in ascending order so that permuting
    /// coordinates together with weights leaves the result bit-identical.
    pub fn modular(&self, x: &[f64]) -> Result<f64, ParanormError> {
        self.space.check_dim(x)?;
        let mut terms = [0.0; 8];
        let mut heap;
        let terms: &mut [f64] = if x.len() <= terms.len() {
            &mut terms[..x.len()]
        } else {
            heap = vec![0.0; x.len()];
            &mut heap
        };
        for (i, (&xi, &a)) in x.iter().zip(self.space.weights()).enumerate() {
            let v = if a == 0.0 {
                0.0
            } else {
                a * self.generator.phi(xi.abs())
            };
            if !v.is_finite() {
                return Err(ParanormError::NonFinite { index: i });
            }
            terms[i] = v;
        }
        terms.sort_unstable_by(f64::total_cmp);
        Ok(terms.iter().sum())
    }

    pub fn pnorm(&self, x: &[f64]) -> Result<f64, ParanormError> {
        let sum = self.modular(x)?;
        let cap = self.generator.value_cap();
        if sum > cap {
            return Err(ParanormError::Overflow { sum, cap });
        }
        Ok(self.generator.inverse(sum)?)
    }

    pub fn pnorm_of(&self, x: &SimpleFunction) -> Result<f64, ParanormError> {
        self.pnorm(x.coords())
    }

    /// p as a plain function, with overflow mapped to +∞.
    pub fn p(&self, x: &[f64]) -> f64 {
        match self.pnorm(x) {
            Ok(v) => v,
            Err(ParanormError::Overflow { .. }) | Err(ParanormError::NonFinite { .. }) => f64::INFINITY,
            Err(_) => f64::NAN,
        }
    }

    /// Scale factor t ≥ 0 with p(t·d) = r. The returned t never overshoots:
    /// p(t·d) ≤ r, and the next float above t gives p > r.
    pub fn radial_factor(&self, direction: &[f64], r: f64) -> Result<f64, ParanormError> {
        self.space.check_dim(direction)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(ParanormError::BadRadius { r });
        }
        if r > self.generator.t_max() {
            return Err(ParanormError::Overflow {
                sum: self.generator.phi(r),
                cap: self.generator.value_cap(),
            });
        }
        let peak = self
            .space
            .weights()
            .iter()
            .zip(direction)
            .filter(|(&a, _)| a > 0.0)
            .map(|(_, d)| d.abs())
            .fold(0.0, f64::max);
        if peak == 0.0 || !peak.is_finite() {
            return Err(ParanormError::ZeroDirection);
        }
        let scaled = |t: f64| -> Vec<f64> { direction.iter().map(|d| t * d).collect() };
        let excess = |t: f64| self.p(&scaled(t)) - r;
        let mut lo = 0.0;
        let mut hi = r / peak;
        loop {
            let g = excess(hi);
            if g == 0.0 {
                return Ok(hi);
            }
            if g > 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(ParanormError::ZeroDirection);
            }
        }
        let (lo, _) = bisect_increasing(excess, lo, hi, 2100);
        Ok(lo)
    }

    /// t·direction with p = r (up to the last bit, from below).
    pub fn radial_scale(&self, direction: &[f64], r: f64) -> Result<Vec<f64>, ParanormError> {
        let t = self.radial_factor(direction, r)?;
        Ok(direction.iter().map(|d| t * d).collect())
    }

    /// n points on {p = r} in angle-uniform directions, starting on the positive x-axis.
    pub fn ball_boundary(&self, r: f64, n: usize) -> Result<Vec<BoundaryPoint>, ParanormError> {
        if self.dim() != 2 {
            return Err(ParanormError::NotPlanar { dim: self.dim() });
        }
        if n < 4 {
            return Err(ParanormError::TooFewPoints { min: 4, n });
        }
        (0..n)
            .map(|j| {
                let theta = TAU * j as f64 / n as f64;
                let d = [snap(theta.cos()), snap(theta.sin())];
                let x = self.radial_scale(&d, r)?;
                Ok(BoundaryPoint { theta, x: [x[0], x[1]] })
            })
            .collect()
    }

    /// Seeded audit of subadditivity, symmetry and scalar continuity.
    pub fn audit_axioms(&self, samples: usize, seed: u64) -> ConditionReport {
        let k = self.dim();
        let batches = samples.div_ceil(AUDIT_BATCH).max(1);
        let results: Vec<AxiomBatch> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                let count = (samples - b * AUDIT_BATCH).min(AUDIT_BATCH);
                let mut out = AxiomBatch::default();
                for i in 0..count {
                    let scale = SAMPLE_SCALES[(b * AUDIT_BATCH + i) % SAMPLE_SCALES.len()];
                    let x = draw(&mut rng, k, scale);
                    let y = draw(&mut rng, k, scale);
                    out.record(self, x, y);
                }
                out
            })
            .collect();
        let merged = results.into_iter().fold(AxiomBatch::default(), AxiomBatch::merge);

        let verdict = if merged.evaluated == 0 {
            Verdict::Inconclusive
        } else if merged.worst.as_ref().is_some_and(|w| w.slack < -SUBADDITIVITY_SLACK)
            || merged.symmetry_failures > 0
            || merged.continuity_failures > 0
        {
            Verdict::Fails
        } else {
            Verdict::Holds
        };
        let (margin, rel_margin, witness) = match merged.worst {
            Some(w) => (
                w.slack,
                w.slack / w.rhs.abs().max(w.lhs.abs()).max(f64::MIN_POSITIVE),
                Some(w),
            ),
            None => (f64::NAN, f64::NAN, None),
        };
        ConditionReport {
            name: "paranorm_axioms".into(),
            verdict,
            margin,
            rel_margin,
            witness: witness.map(|w| w.witness),
            grid: None,
            evaluated: merged.evaluated,
            skipped: merged.skipped,
            cross_checks: vec![
                CrossCheck::new("symmetry p(-x) = p(x)", merged.symmetry_failures == 0, None),
                CrossCheck::new(
                    "continuity p(t x) -> 0 as t -> 0",
                    merged.continuity_failures == 0,
                    None,
                ),
            ],
            notes: vec![format!("{samples} seeded pairs, seed {seed}")],
        }
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else {
        v
    }
}

fn draw(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * z.abs() * scale
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub theta: f64,
    pub x: [f64; 2],
}

#[derive(Debug, Clone)]
struct Worst {
    slack: f64,
    lhs: f64,
    rhs: f64,
    witness: Witness,
}

#[derive(Debug, Default)]
struct AxiomBatch {
    worst: Option<Worst>,
    evaluated: usize,
    skipped: usize,
    symmetry_failures: usize,
    continuity_failures: usize,
}

impl AxiomBatch {
    fn record(&mut self, ctx: &ParanormContext, x: Vec<f64>, y: Vec<f64>) {
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let (px, py, ps) = match (ctx.pnorm(&x), ctx.pnorm(&y), ctx.pnorm(&sum)) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => {
                self.skipped += 1;
                return;
            }
        };
        self.evaluated += 1;
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        if ctx.p(&neg) != px {
            self.symmetry_failures += 1;
        }
        let mut last = px;
        let mut t = 1.0;
        for _ in 0..12 {
            t *= 0.1;
            let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
            let v = ctx.p(&tx);
            if v.is_nan() || v > last {
                self.continuity_failures += 1;
                break;
            }
            last = v;
        }
        if last > 1e-6 * px.max(1.0) {
            self.continuity_failures += 1;
        }
        let slack = px + py - ps;
        if self.worst.as_ref().is_none_or(|w| slack < w.slack) {
            let mut point = x;
            point.extend_from_slice(&y);
            self.worst = Some(Worst {
                slack,
                lhs: ps,
                rhs: px + py,
                witness: Witness::new(point, ps, px + py),
            });
        }
    }

    fn merge(mut self, other: AxiomBatch) -> AxiomBatch {
        if let Some(w) = other.worst {
            if self.worst.as_ref().is_none_or(|s| w.slack < s.slack) {
                self.worst = Some(w);
            }
        }
        self.evaluated += other.evaluated;
        self.skipped += other.skipped;
        self.symmetry_failures += other.symmetry_failures;
        self.continuity_failures += other.continuity_failures;
        self
    }
}
