//! Moduli of convexity δ(r, ε).
//!
//! * `eA`: closed form r − φ⁻¹(φ(r) − φ(ε/2)) for superquadratic φ.
//! * `eF`: the root u = r − δ of φ(u + ε/2) + φ(|u − ε/2|) = 2φ(r) for strictly convex φ.
//! * `thm5`: δ₀(r, ε/4) for φ(t) = eᵗ − 1 on ℝ² with unit weights.
//! * `psi`: transport of a base modulus through an increasing subadditive ψ.
//! * `clarkson`: r − (rᵖ − (ε/2)ᵖ)^{1/p} for φ(t) = tᵖ.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::conditions::{check_strictly_convex, Grid2, Spacing};
use crate::generator::{BuiltinFamily, Generator, GeneratorError};
use crate::solve::{bisect_increasing, newton_bisect};

/// Residual bound for the implicit modulus, relative to φ(r).
pub const EF_RESIDUAL_TOL: f64 = 1e-10;
const EF_BISECT_ITER: usize = 200;
/// Newton polishing is skipped this close to the kink u = ε/2.
const EF_KINK_BAND: f64 = 1e-8;
const EF_PROBE_POINTS: usize = 33;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModulusError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("(r, eps) = ({r}, {eps}) is outside {domain}")]
    OutOfDomain { r: f64, eps: f64, domain: DomainKind },
    #[error("method {method} needs a strictly convex generator; {detail}")]
    NotStrictlyConvex { method: Method, detail: String },
    #[error("method {method} needs {needed}, got {got}")]
    WrongGenerator {
        method: Method,
        needed: &'static str,
        got: String,
    },
    #[error("transformed point (r, eps) = ({r}, {eps}) is outside the base domain")]
    TransformedOutOfDomain { r: f64, eps: f64 },
    #[error("modulus evaluated to {delta}, outside (0, {r})")]
    OutOfRange { r: f64, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DomainKind {
    /// 0 < ε < 2r
    Delta,
    /// 0 < ε and φ(ε) ≤ 2φ(r)
    DeltaPhi,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::Delta => f.write_str("Delta = {0 < eps < 2r}"),
            DomainKind::DeltaPhi => f.write_str("Delta_phi = {phi(eps) <= 2 phi(r)}"),
        }
    }
}

/// A validated (r, ε) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaQuery {
    pub r: f64,
    pub eps: f64,
    pub domain: DomainKind,
}

impl DeltaQuery {
    pub fn delta(r: f64, eps: f64) -> Result<Self, ModulusError> {
        if in_delta(r, eps) {
            Ok(DeltaQuery {
                r,
                eps,
                domain: DomainKind::Delta,
            })
        } else {
            Err(ModulusError::OutOfDomain {
                r,
                eps,
                domain: DomainKind::Delta,
            })
        }
    }

    pub fn delta_phi(g: &Generator, r: f64, eps: f64) -> Result<Self, ModulusError> {
        let ok = r > 0.0 && r.is_finite() && eps > 0.0 && g.phi(eps) <= 2.0 * g.phi(r);
        if ok {
            Ok(DeltaQuery {
                r,
                eps,
                domain: DomainKind::DeltaPhi,
            })
        } else {
            Err(ModulusError::OutOfDomain {
                r,
                eps,
                domain: DomainKind::DeltaPhi,
            })
        }
    }
}

pub fn in_delta(r: f64, eps: f64) -> bool {
    r > 0.0 && r.is_finite() && eps > 0.0 && eps < 2.0 * r
}

/// Largest ε with eᵉ − 1 ≤ 2(eʳ − 1).
pub fn exp_eps_max(r: f64) -> f64 {
    (2.0 * r.exp_m1()).ln_1p()
}

pub fn in_delta_phi_exp(r: f64, eps: f64) -> bool {
    r > 0.0 && r <= crate::generator::EXP_T_MAX && eps > 0.0 && eps <= exp_eps_max(r)
}

fn check_delta(r: f64, eps: f64) -> Result<(), ModulusError> {
    DeltaQuery::delta(r, eps).map(|_| ())
}

fn check_delta_phi_exp(r: f64, eps: f64) -> Result<(), ModulusError> {
    if in_delta_phi_exp(r, eps) {
        Ok(())
    } else {
        Err(ModulusError::OutOfDomain {
            r,
            eps,
            domain: DomainKind::DeltaPhi,
        })
    }
}

/// r − φ⁻¹(φ(r) − φ(ε/2)).
pub fn delta_ea(g: &Generator, r: f64, eps: f64) -> Result<f64, ModulusError> {
    check_delta(r, eps)?;
    match g.family() {
        Some(BuiltinFamily::Power { p }) => return delta_clarkson(*p, r, eps),
        Some(BuiltinFamily::ExpMinusOne { a }) => {
            g.value(r)?;
            // r − log_a(1 + aʳ − a^{ε/2}) = −log_a(1 − a^{−r}(a^{ε/2} − 1))
            let ln_a = a.ln();
            let shrink = (-r * ln_a).exp() * (0.5 * eps * ln_a).exp_m1();
            return Ok(-(-shrink).ln_1p() / ln_a);
        }
        _ => {}
    }
    let y = g.value(r)? - g.value(0.5 * eps)?;
    Ok(r - g.inverse(y.max(0.0))?)
}

/// r − (rᵖ − (ε/2)ᵖ)^{1/p}, evaluated as −r·expm1(log1p(−q)/p) with q = (ε/2r)ᵖ.
pub fn delta_clarkson(p: f64, r: f64, eps: f64) -> Result<f64, ModulusError> {
    check_delta(r, eps)?;
    let q = (0.5 * eps / r).powf(p);
    Ok(-r * ((-q).ln_1p() / p).exp_m1())
}

/// λ(u, v) = φ(u + v) + φ(|u − v|).
pub fn lambda(g: &Generator, u: f64, v: f64) -> f64 {
    g.phi(u + v) + g.phi((u - v).abs())
}

/// Value and residual |λ(r − δ, ε/2) − 2φ(r)| of the implicit modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImplicitDelta {
    pub delta: f64,
    pub residual: f64,
}

/// Midpoint strict-convexity probe on [0, hi], enough to guarantee that
/// λ(·, ε/2) is increasing where the solver looks.
fn probe_strict_convexity(g: &Generator, hi: f64) -> Result<(), ModulusError> {
    let lo = hi / (EF_PROBE_POINTS as f64 * 8.0);
    let grid = Grid2::new(lo, hi, EF_PROBE_POINTS, Spacing::Linear).map_err(|e| ModulusError::NotStrictlyConvex {
        method: Method::EF,
        detail: e.to_string(),
    })?;
    let rep = check_strictly_convex(g, &grid);
    if rep.holds() {
        Ok(())
    } else {
        let detail = match &rep.witness {
            Some(w) => format!("midpoint gap {:e} at {:?}", rep.rel_margin, w.point),
            None => "no evaluable points".to_string(),
        };
        Err(ModulusError::NotStrictlyConvex {
            method: Method::EF,
            detail,
        })
    }
}

/// Solves λ(u, ε/2) = 2φ(r) for u ∈ [0, r] and returns δ = r − u.
pub fn delta_ef(g: &Generator, r: f64, eps: f64) -> Result<ImplicitDelta, ModulusError> {
    check_delta(r, eps)?;
    let v = 0.5 * eps;
    probe_strict_convexity(g, r + v)?;
    let target = 2.0 * g.value(r)?;
    g.value(r + v)?;
    let excess = |u: f64| lambda(g, u, v) - target;

    let (mut lo, mut hi) = bisect_increasing(excess, 0.0, r, EF_BISECT_ITER);
    let away_from_kink = (lo - v).abs() > EF_KINK_BAND && (hi - v).abs() > EF_KINK_BAND;
    if away_from_kink && hi > lo {
        let slope = |u: f64| g.d1(u + v) + (u - v).signum() * g.d1((u - v).abs());
        let root = newton_bisect(excess, slope, lo, hi, 8);
        if root.residual.abs() < excess(lo).abs().min(excess(hi).abs()) {
            lo = root.x;
            hi = root.x;
        }
    }
    let u = if excess(lo).abs() <= excess(hi).abs() { lo } else { hi };
    let residual = excess(u).abs();
    Ok(ImplicitDelta { delta: r - u, residual })
}

/// Root x of φ(t) − φ(r − t) = φ(r) − φ(ε) for φ(t) = eᵗ − 1, computed in
/// closed form and by bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpRoot {
    pub x: f64,
    pub x_bisect: f64,
    /// |φ(x) − φ(r − x) − φ(r) + φ(ε)|
    pub residual: f64,
}

fn exp_root_equation(r: f64, eps: f64, t: f64) -> f64 {
    // eᵗ − e^{r−t} − (eʳ − eᵉ), with the two differences formed via expm1
    let left = (r - t).exp() * (2.0 * t - r).exp_m1();
    let right = eps.exp() * (r - eps).exp_m1();
    left - right
}

pub fn x_r_eps_checked(r: f64, eps: f64) -> Result<ExpRoot, ModulusError> {
    check_delta_phi_exp(r, eps)?;
    // with u = eˣ the equation is u² − (eʳ − eᵉ)u − eʳ = 0; dividing by e^{r/2}
    // gives x = r/2 + asinh(c/2), c = e^{r/2} − e^{ε − r/2}
    let half_c = -0.5 * (0.5 * r).exp() * (eps - r).exp_m1();
    let x = (0.5 * r + half_c.asinh()).clamp(0.0, r);
    let (lo, hi) = bisect_increasing(|t| exp_root_equation(r, eps, t), 0.0, r, 200);
    let x_bisect = 0.5 * (lo + hi);
    Ok(ExpRoot {
        x,
        x_bisect,
        residual: exp_root_equation(r, eps, x).abs(),
    })
}

pub fn x_r_eps(r: f64, eps: f64) -> Result<f64, ModulusError> {
    x_r_eps_checked(r, eps).map(|s| s.x)
}

/// δ₀(r, ε) = r − φ⁻¹(φ((x+r)/2) + φ(φ⁻¹(φ(r) − φ(x))/2)) with φ(t) = eᵗ − 1.
pub fn delta0(r: f64, eps: f64) -> Result<f64, ModulusError> {
    let x = x_r_eps(r, eps)?;
    // φ(r) − φ(x) = eˣ(e^{r−x} − 1)
    let gap = x.exp() * (r - x).exp_m1();
    let inner = (0.5 * (x + r)).exp_m1() + (0.5 * gap.ln_1p()).exp_m1();
    Ok(r - inner.ln_1p())
}

/// δ₀(r, ε/4), a modulus on all of Δ for eᵗ − 1 on ℝ² with unit weights.
pub fn delta_thm5(r: f64, eps: f64) -> Result<f64, ModulusError> {
    check_delta(r, eps)?;
    delta0(r, 0.25 * eps)
}

/// δ_ψ(r, ε) = r − ψ(ψ⁻¹(r) − δ(ψ⁻¹(r), ψ⁻¹(ε))).
pub fn delta_psi<F>(base: F, psi: &Generator, r: f64, eps: f64) -> Result<f64, ModulusError>
where
    F: Fn(f64, f64) -> Result<f64, ModulusError>,
{
    if !(r > 0.0 && eps > 0.0) {
        return Err(ModulusError::OutOfDomain {
            r,
            eps,
            domain: DomainKind::Delta,
        });
    }
    if matches!(psi.family(), Some(BuiltinFamily::Power { p }) if *p == 1.0) {
        return base(r, eps);
    }
    let rb = psi.inverse(r)?;
    let eb = psi.inverse(eps)?;
    if !in_delta(rb, eb) {
        return Err(ModulusError::TransformedOutOfDomain { r: rb, eps: eb });
    }
    let db = base(rb, eb)?;
    Ok(r - psi.value(rb - db)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "eA")]
    EA,
    #[serde(rename = "eF")]
    EF,
    #[serde(rename = "thm5")]
    Thm5,
    #[serde(rename = "psi-transform")]
    Psi,
    #[serde(rename = "clarkson")]
    Clarkson,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::EA => "eA",
            Method::EF => "eF",
            Method::Thm5 => "thm5",
            Method::Psi => "psi-transform",
            Method::Clarkson => "clarkson",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eA" | "ea" => Ok(Method::EA),
            "eF" | "ef" => Ok(Method::EF),
            "thm5" => Ok(Method::Thm5),
            "psi" | "psi-transform" => Ok(Method::Psi),
            "clarkson" => Ok(Method::Clarkson),
            other => Err(format!(
                "unknown method `{other}` (expected eA, eF, thm5, psi or clarkson)"
            )),
        }
    }
}

/// A modulus of convexity bound to its generator(s).
#[derive(Debug, Clone)]
pub enum Modulus {
    EA(Generator),
    EF(Generator),
    Thm5,
    Clarkson { p: f64 },
    Psi { base: Box<Modulus>, psi: Generator },
}

impl Modulus {
    pub fn method(&self) -> Method {
        match self {
            Modulus::EA(_) => Method::EA,
            Modulus::EF(_) => Method::EF,
            Modulus::Thm5 => Method::Thm5,
            Modulus::Clarkson { .. } => Method::Clarkson,
            Modulus::Psi { .. } => Method::Psi,
        }
    }

    /// The implicit modulus, refused unless φ passes the strict convexity audit on `grid`.
    pub fn implicit(g: Generator, grid: &Grid2) -> Result<Self, ModulusError> {
        let rep = check_strictly_convex(&g, &grid.capped_for(&g));
        if !rep.holds() {
            return Err(ModulusError::NotStrictlyConvex {
                method: Method::EF,
                detail: format!("strictly_convex {} on {}", rep.verdict, grid),
            });
        }
        Ok(Modulus::EF(g))
    }

    pub fn clarkson_for(g: &Generator) -> Result<Self, ModulusError> {
        match g.family() {
            Some(BuiltinFamily::Power { p }) => Ok(Modulus::Clarkson { p: *p }),
            _ => Err(ModulusError::WrongGenerator {
                method: Method::Clarkson,
                needed: "a power generator",
                got: g.name(),
            }),
        }
    }

    pub fn thm5_for(g: &Generator, weights: &[f64]) -> Result<Self, ModulusError> {
        if g.is_exp_minus_one() && weights == [1.0, 1.0] {
            Ok(Modulus::Thm5)
        } else {
            Err(ModulusError::WrongGenerator {
                method: Method::Thm5,
                needed: "exp(t)-1 on weights 1,1",
                got: format!("{} on weights {:?}", g.name(), weights),
            })
        }
    }

    /// δ(r, ε) and, for root-solved methods, the solver residual.
    pub fn eval(&self, r: f64, eps: f64) -> Result<(f64, Option<f64>), ModulusError> {
        match self {
            Modulus::EA(g) => delta_ea(g, r, eps).map(|d| (d, None)),
            Modulus::EF(g) => delta_ef(g, r, eps).map(|s| (s.delta, Some(s.residual))),
            Modulus::Thm5 => {
                check_delta(r, eps)?;
                let root = x_r_eps_checked(r, 0.25 * eps)?;
                Ok((delta0(r, 0.25 * eps)?, Some(root.residual)))
            }
            Modulus::Clarkson { p } => delta_clarkson(*p, r, eps).map(|d| (d, None)),
            Modulus::Psi { base, psi } => delta_psi(|a, b| base.delta(a, b), psi, r, eps).map(|d| (d, None)),
        }
    }

    pub fn delta(&self, r: f64, eps: f64) -> Result<f64, ModulusError> {
        self.eval(r, eps).map(|(d, _)| d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusRow {
    pub r: f64,
    pub eps: f64,
    pub method: Method,
    pub delta: f64,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusTable {
    pub rows: Vec<ModulusRow>,
}

impl ModulusTable {
    /// One row per (r, ε) in input order. Every δ must lie in (0, r).
    pub fn build(modulus: &Modulus, points: &[(f64, f64)]) -> Result<Self, ModulusError> {
        let rows = points
            .par_iter()
            .map(|&(r, eps)| {
                let (delta, residual) = modulus.eval(r, eps)?;
                if !(delta > 0.0 && delta < r) {
                    return Err(ModulusError::OutOfRange { r, delta });
                }
                Ok(ModulusRow {
                    r,
                    eps,
                    method: modulus.method(),
                    delta,
                    residual,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ModulusTable { rows })
    }
}
