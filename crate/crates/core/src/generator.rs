//! Generator bijections φ: [0,∞) → [0,∞) with φ(0) = 0.
//!
//! A [`Generator`] carries φ together with its symbolic first and second
//! derivatives and a robust inverse. Built-in families evaluate φ and φ⁻¹ in
//! closed form (with `expm1`/`log1p` for the exponential ones); generators
//! entered as expressions are inverted by a bracketed Newton iteration.
//!
//! Bijectivity can only be audited on a bounded grid, so every generator is
//! "grid-audited": φ(0) = 0 and strict monotonicity are checked on
//! [`AUDIT_POINTS`] log-spaced points of (0, T_max], nothing more.

use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{differentiate, parse, simplify, Expr, ExprError};
use crate::solve::newton_bisect;

/// Overflow guard for generators containing an exponential (eᵗ overflows near 709).
pub const EXP_T_MAX: f64 = 700.0;
/// Overflow guard for everything else.
pub const DEFAULT_T_MAX: f64 = 1e8;
/// Number of log-spaced points in the monotonicity audit.
pub const AUDIT_POINTS: usize = 400;
const INVERSE_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid generator spec `{spec}`: {message}")]
    BadSpec { spec: String, message: String },
    #[error("invalid parameter for {family}: {message}")]
    InvalidParameter { family: &'static str, message: String },
    #[error("φ(0) = {value}, expected 0")]
    NotZeroAtOrigin { value: f64 },
    #[error("φ is not strictly increasing: φ({t1}) = {v1} >= φ({t2}) = {v2}")]
    NotMonotone { t1: f64, t2: f64, v1: f64, v2: f64 },
    #[error("φ({t}) is not a finite real")]
    NonFinite { t: f64 },
    #[error("inverse requested for negative value {y}")]
    NegativeArgument { y: f64 },
    #[error("φ⁻¹({y}) lies beyond T_max = {t_max}: bracket grew to [{lo}, {hi}]")]
    Overflow { y: f64, t_max: f64, lo: f64, hi: f64 },
}

/// Closed-form generator families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BuiltinFamily {
    /// tᵖ, p ≥ 1.
    Power { p: f64 },
    /// aᵗ − 1, a > 1.
    ExpMinusOne { a: f64 },
    /// tᵖ·aᵗ, p ≥ 1, a > 1.
    PowerTimesExp { p: f64, a: f64 },
    /// tᵖ/(t+1), p > 1.
    CubicRational { p: f64 },
}

/// `ln a`, snapped to exactly 1 for a = e so that `exp:a=e` evaluates as eᵗ − 1.
fn log_base(a: f64) -> f64 {
    if (a - E).abs() <= 4.0 * f64::EPSILON * E {
        1.0
    } else {
        a.ln()
    }
}

impl BuiltinFamily {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |family, message: String| Err(GeneratorError::InvalidParameter { family, message });
        match *self {
            BuiltinFamily::Power { p } if !(p.is_finite() && p >= 1.0) => bad("power", format!("p = {p}, need p >= 1")),
            BuiltinFamily::ExpMinusOne { a } if !(a.is_finite() && a > 1.0) => {
                bad("exp", format!("a = {a}, need a > 1"))
            }
            BuiltinFamily::PowerTimesExp { p, a } if !(p.is_finite() && p >= 1.0 && a.is_finite() && a > 1.0) => {
                bad("powexp", format!("p = {p}, a = {a}, need p >= 1 and a > 1"))
            }
            // t/(t+1) is bounded, so p = 1 is not a bijection of [0,∞)
            BuiltinFamily::CubicRational { p } if !(p.is_finite() && p > 1.0) => {
                bad("cubicrational", format!("p = {p}, need p > 1"))
            }
            _ => Ok(()),
        }
    }

    /// φ as an expression tree.
    pub fn expr(&self) -> Expr {
        let t = Expr::var;
        let e = match *self {
            BuiltinFamily::Power { p } => t().powf(p),
            BuiltinFamily::ExpMinusOne { a } => (Expr::num(log_base(a)) * t()).exp() - Expr::num(1.0),
            BuiltinFamily::PowerTimesExp { p, a } => t().powf(p) * (Expr::num(log_base(a)) * t()).exp(),
            BuiltinFamily::CubicRational { p } => t().powf(p) / (t() + Expr::num(1.0)),
        };
        simplify(&e)
    }
}

impl fmt::Display for BuiltinFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinFamily::Power { p } => write!(f, "power:p={p}"),
            BuiltinFamily::ExpMinusOne { a } => write!(f, "exp:a={a}"),
            BuiltinFamily::PowerTimesExp { p, a } => write!(f, "powexp:p={p},a={a}"),
            BuiltinFamily::CubicRational { p } => write!(f, "cubicrational:p={p}"),
        }
    }
}

/// How a generator was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Builtin(BuiltinFamily),
    Expr(Expr),
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Builtin(b) => b.fmt(f),
            GeneratorSpec::Expr(e) => write!(f, "expr:{e}"),
        }
    }
}

fn parse_param(spec: &str, value: &str) -> Result<f64, GeneratorError> {
    let v = value.trim();
    if v == "e" {
        return Ok(E);
    }
    v.parse::<f64>().map_err(|_| GeneratorError::BadSpec {
        spec: spec.to_string(),
        message: format!("`{v}` is not a number"),
    })
}

/// Parses `power:p=<v>`, `exp:a=<v>`, `powexp:p=<v>,a=<v>`,
/// `cubicrational:p=<v>` and `expr:<text>`.
impl FromStr for GeneratorSpec {
    type Err = GeneratorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |message: &str| GeneratorError::BadSpec {
            spec: s.to_string(),
            message: message.to_string(),
        };
        let (kind, rest) = s.split_once(':').ok_or_else(|| bad("missing `:`"))?;
        if kind == "expr" {
            return Ok(GeneratorSpec::Expr(parse(rest)?));
        }
        let mut p = None;
        let mut a = None;
        for part in rest.split(',').filter(|x| !x.trim().is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let v = parse_param(s, value)?;
            match key.trim() {
                "p" => p = Some(v),
                "a" => a = Some(v),
                other => return Err(bad(&format!("unknown parameter `{other}`"))),
            }
        }
        let need = |x: Option<f64>, name: &str| x.ok_or_else(|| bad(&format!("missing parameter `{name}`")));
        let family = match kind {
            "power" => BuiltinFamily::Power { p: need(p, "p")? },
            "exp" => BuiltinFamily::ExpMinusOne { a: need(a, "a")? },
            "powexp" => BuiltinFamily::PowerTimesExp {
                p: need(p, "p")?,
                a: need(a, "a")?,
            },
            "cubicrational" => BuiltinFamily::CubicRational { p: need(p, "p")? },
            other => return Err(bad(&format!("unknown family `{other}`"))),
        };
        Ok(GeneratorSpec::Builtin(family))
    }
}

#[derive(Debug, Clone, Copy)]
enum Kernel {
    Power(f64),
    ExpMinusOne { ln_a: f64 },
    PowerTimesExp { p: f64, ln_a: f64 },
    Symbolic,
}

/// An audited generator bijection.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    phi: Expr,
    d1: Expr,
    d2: Expr,
    t_max: f64,
    kernel: Kernel,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            (a + (b - a) * i as f64 / (n - 1) as f64).exp()
        }
    })
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Self, GeneratorError> {
        let (phi, kernel) = match &spec {
            GeneratorSpec::Builtin(family) => {
                family.validate()?;
                let kernel = match *family {
                    BuiltinFamily::Power { p } => Kernel::Power(p),
                    BuiltinFamily::ExpMinusOne { a } => Kernel::ExpMinusOne { ln_a: log_base(a) },
                    BuiltinFamily::PowerTimesExp { p, a } => Kernel::PowerTimesExp { p, ln_a: log_base(a) },
                    BuiltinFamily::CubicRational { .. } => Kernel::Symbolic,
                };
                (family.expr(), kernel)
            }
            GeneratorSpec::Expr(e) => (e.clone(), Kernel::Symbolic),
        };
        let d1 = differentiate(&phi);
        let d2 = differentiate(&d1);
        let mut t_max = match kernel {
            Kernel::ExpMinusOne { ln_a } | Kernel::PowerTimesExp { ln_a, .. } => EXP_T_MAX / ln_a.max(1.0),
            Kernel::Symbolic if phi.contains_exp() => EXP_T_MAX,
            _ => DEFAULT_T_MAX,
        };
        let mut g = Generator {
            spec,
            phi,
            d1,
            d2,
            t_max,
            kernel,
        };
        while !g.phi(t_max).is_finite() && t_max > 1.0 {
            t_max *= 0.5;
        }
        g.t_max = t_max;
        g.audit()?;
        Ok(g)
    }

    pub fn from_spec_str(s: &str) -> Result<Self, GeneratorError> {
        Generator::new(s.parse()?)
    }

    pub fn builtin(family: BuiltinFamily) -> Result<Self, GeneratorError> {
        Generator::new(GeneratorSpec::Builtin(family))
    }

    pub fn power(p: f64) -> Result<Self, GeneratorError> {
        Generator::builtin(BuiltinFamily::Power { p })
    }

    pub fn exp_minus_one(a: f64) -> Result<Self, GeneratorError> {
        Generator::builtin(BuiltinFamily::ExpMinusOne { a })
    }

    pub fn power_times_exp(p: f64, a: f64) -> Result<Self, GeneratorError> {
        Generator::builtin(BuiltinFamily::PowerTimesExp { p, a })
    }

    pub fn cubic_rational(p: f64) -> Result<Self, GeneratorError> {
        Generator::builtin(BuiltinFamily::CubicRational { p })
    }

    fn audit(&self) -> Result<(), GeneratorError> {
        let at_zero = self.value(0.0)?;
        if at_zero.abs() > 1e-12 {
            return Err(GeneratorError::NotZeroAtOrigin { value: at_zero });
        }
        let mut prev = (0.0, at_zero);
        for t in self.audit_grid() {
            let v = self.value(t).map_err(|_| GeneratorError::NonFinite { t })?;
            if v <= prev.1 {
                return Err(GeneratorError::NotMonotone {
                    t1: prev.0,
                    t2: t,
                    v1: prev.1,
                    v2: v,
                });
            }
            prev = (t, v);
        }
        Ok(())
    }

    /// The log-spaced grid on which bijectivity was audited.
    pub fn audit_grid(&self) -> Vec<f64> {
        log_grid(1e-6, self.t_max, AUDIT_POINTS).collect()
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.to_string()
    }

    pub fn family(&self) -> Option<&BuiltinFamily> {
        match &self.spec {
            GeneratorSpec::Builtin(b) => Some(b),
            GeneratorSpec::Expr(_) => None,
        }
    }

    pub fn phi_expr(&self) -> &Expr {
        &self.phi
    }

    pub fn d1_expr(&self) -> &Expr {
        &self.d1
    }

    pub fn d2_expr(&self) -> &Expr {
        &self.d2
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Largest value φ takes on the audited domain.
    pub fn value_cap(&self) -> f64 {
        self.phi(self.t_max)
    }

    pub fn has_closed_form_inverse(&self) -> bool {
        matches!(self.kernel, Kernel::Power(_) | Kernel::ExpMinusOne { .. })
    }

    /// True for φ(t) = eᵗ − 1, whether built in or entered as an expression.
    pub fn is_exp_minus_one(&self) -> bool {
        match self.kernel {
            Kernel::ExpMinusOne { ln_a } => ln_a == 1.0,
            _ => self.phi == Expr::var().exp() - Expr::num(1.0),
        }
    }

    /// φ(t), or NaN where the defining expression is undefined.
    pub fn phi(&self, t: f64) -> f64 {
        match self.kernel {
            Kernel::Power(p) => {
                if p == 1.0 {
                    t
                } else if p == 2.0 {
                    t * t
                } else {
                    t.powf(p)
                }
            }
            Kernel::ExpMinusOne { ln_a } => (ln_a * t).exp_m1(),
            Kernel::PowerTimesExp { p, ln_a } => t.powf(p) * (ln_a * t).exp(),
            Kernel::Symbolic => self.phi.eval(t).unwrap_or(f64::NAN),
        }
    }

    pub fn value(&self, t: f64) -> Result<f64, GeneratorError> {
        match self.kernel {
            Kernel::Symbolic => Ok(self.phi.eval(t)?),
            _ => {
                let v = self.phi(t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(GeneratorError::NonFinite { t })
                }
            }
        }
    }

    /// φ′(t), NaN outside the domain.
    pub fn d1(&self, t: f64) -> f64 {
        self.d1.eval(t).unwrap_or(f64::NAN)
    }

    /// φ″(t), NaN outside the domain.
    pub fn d2(&self, t: f64) -> f64 {
        self.d2.eval(t).unwrap_or(f64::NAN)
    }

    pub fn deriv1(&self, t: f64) -> Result<f64, GeneratorError> {
        Ok(self.d1.eval(t)?)
    }

    pub fn deriv2(&self, t: f64) -> Result<f64, GeneratorError> {
        Ok(self.d2.eval(t)?)
    }

    /// φ⁻¹(y), NaN if it cannot be computed.
    pub fn inv(&self, y: f64) -> f64 {
        self.inverse(y).unwrap_or(f64::NAN)
    }

    pub fn inverse(&self, y: f64) -> Result<f64, GeneratorError> {
        if y.is_nan() || y < 0.0 {
            return Err(GeneratorError::NegativeArgument { y });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        match self.kernel {
            Kernel::Power(p) => Ok(if p == 1.0 {
                y
            } else if p == 2.0 {
                y.sqrt()
            } else if p == 3.0 {
                y.cbrt()
            } else {
                y.powf(p.recip())
            }),
            Kernel::ExpMinusOne { ln_a } => Ok(y.ln_1p() / ln_a),
            _ => self.inverse_numeric(y),
        }
    }

    /// Bracketing Newton inverse; the bracket is grown geometrically from [0, 1].
    pub fn inverse_numeric(&self, y: f64) -> Result<f64, GeneratorError> {
        if y.is_nan() || y < 0.0 {
            return Err(GeneratorError::NegativeArgument { y });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0_f64.min(self.t_max));
        while self.phi(hi) < y {
            if hi >= self.t_max {
                return Err(GeneratorError::Overflow {
                    y,
                    t_max: self.t_max,
                    lo,
                    hi,
                });
            }
            lo = hi;
            hi = (2.0 * hi).min(self.t_max);
        }
        let root = newton_bisect(|t| self.phi(t) - y, |t| self.d1(t), lo, hi, INVERSE_MAX_ITER);
        Ok(root.x)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.spec.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn power_two() {
        let g = Generator::power(2.0).unwrap();
        assert_eq!(g.phi(3.0), 9.0);
        assert_eq!(g.inverse(9.0).unwrap(), 3.0);
        assert_eq!(g.deriv1(3.0).unwrap(), 6.0);
        assert_eq!(g.deriv2(3.0).unwrap(), 2.0);
        assert!(g.has_closed_form_inverse());
        assert_eq!(g.t_max(), DEFAULT_T_MAX);
    }

    #[test]
    fn exp_minus_one_base_e() {
        let g = Generator::exp_minus_one(E).unwrap();
        assert!(g.is_exp_minus_one());
        assert_eq!(g.phi_expr(), &(Expr::var().exp() - Expr::num(1.0)));
        assert!((g.inverse(2.0).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!(rel(g.deriv2(0.5).unwrap(), 0.5f64.exp()) < 1e-15);
        assert_eq!(g.t_max(), EXP_T_MAX);
    }

    #[test]
    fn exp_base_two_and_powexp() {
        let g = Generator::exp_minus_one(2.0).unwrap();
        assert!(!g.is_exp_minus_one());
        assert!((g.phi(3.0) - 7.0).abs() < 1e-12);
        assert!((g.inverse(7.0).unwrap() - 3.0).abs() < 1e-12);
        let h = Generator::power_times_exp(2.0, E).unwrap();
        assert!(rel(h.phi(1.0), E) < 1e-15);
        assert!(rel(h.inverse(E).unwrap(), 1.0) < 1e-14);
        assert!(h.phi(h.t_max()).is_finite());
    }

    #[test]
    fn cubic_rational_from_text() {
        let g = Generator::from_spec_str("expr:t^3/(t+1)").unwrap();
        assert!(!g.has_closed_form_inverse());
        assert!(rel(g.inverse(8.0 / 3.0).unwrap(), 2.0) < 1e-14);
        let t: f64 = 2.0;
        let h = f64::EPSILON.cbrt() * t.abs().max(1.0);
        let fd = (g.phi(t + h) - g.phi(t - h)) / (2.0 * h);
        assert!((g.deriv1(t).unwrap() - fd).abs() <= 1e-8 * fd.abs());
        let builtin = Generator::cubic_rational(3.0).unwrap();
        assert_eq!(builtin.phi_expr(), g.phi_expr());
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(matches!(
            Generator::from_spec_str("expr:t+1"),
            Err(GeneratorError::NotZeroAtOrigin { .. })
        ));
        assert!(matches!(
            Generator::from_spec_str("expr:t*(t-1)"),
            Err(GeneratorError::NotMonotone { .. })
        ));
        assert!(matches!(
            Generator::from_spec_str("expr:t^-1"),
            Err(GeneratorError::Expr(_))
        ));
        assert!(matches!(
            Generator::power(0.5),
            Err(GeneratorError::InvalidParameter { .. })
        ));
        assert!(matches!(
            Generator::exp_minus_one(1.0),
            Err(GeneratorError::InvalidParameter { .. })
        ));
        assert!(matches!(
            Generator::cubic_rational(1.0),
            Err(GeneratorError::InvalidParameter { .. })
        ));
        assert!(matches!(
            Generator::from_spec_str("power:q=2"),
            Err(GeneratorError::BadSpec { .. })
        ));
        assert!(matches!(
            Generator::from_spec_str("power"),
            Err(GeneratorError::BadSpec { .. })
        ));
    }

    #[test]
    fn spec_strings() {
        let spec: GeneratorSpec = "powexp:p=2,a=e".parse().unwrap();
        assert_eq!(
            spec,
            GeneratorSpec::Builtin(BuiltinFamily::PowerTimesExp { p: 2.0, a: E })
        );
        let spec: GeneratorSpec = "exp:a=2.71828182845904523536".parse().unwrap();
        assert!(Generator::new(spec).unwrap().is_exp_minus_one());
        assert_eq!("power:p=2".parse::<GeneratorSpec>().unwrap().to_string(), "power:p=2");
        assert!(Generator::from_spec_str("expr:exp(t)-1").unwrap().is_exp_minus_one());
    }

    #[test]
    fn inverse_errors() {
        let g = Generator::cubic_rational(3.0).unwrap();
        assert!(matches!(g.inverse(-1.0), Err(GeneratorError::NegativeArgument { .. })));
        let too_big = g.value_cap() * 4.0;
        assert!(matches!(g.inverse(too_big), Err(GeneratorError::Overflow { .. })));
        assert!(g.inv(f64::NAN).is_nan());
    }

    #[test]
    fn exp_inverse_agrees_with_numeric_route() {
        let g = Generator::exp_minus_one(E).unwrap();
        for i in 0..200 {
            let y = 1e-8 * 1.2f64.powi(i);
            let closed = g.inverse(y).unwrap();
            let numeric = g.inverse_numeric(y).unwrap();
            assert!((closed - numeric).abs() <= 1e-12 * closed.max(1e-300), "y = {y}");
        }
    }

    #[test]
    fn round_trip_on_log_grid() {
        let gens = [
            Generator::power(2.0).unwrap(),
            Generator::power(1.5).unwrap(),
            Generator::power(3.0).unwrap(),
            Generator::exp_minus_one(E).unwrap(),
            Generator::exp_minus_one(2.0).unwrap(),
            Generator::power_times_exp(1.0, E).unwrap(),
            Generator::cubic_rational(3.0).unwrap(),
        ];
        for g in &gens {
            for t in log_grid(1e-6, g.t_max(), 200) {
                let y = g.phi(t);
                let back = g.inverse(y).unwrap();
                assert!((back - t).abs() <= 1e-10 * t.max(1.0), "{g}: t = {t}, back = {back}");
                assert!((g.phi(back) - y).abs() <= 1e-12 * y.max(1.0) || (back - t).abs() <= 4.0 * f64::EPSILON * t);
            }
        }
    }
}
