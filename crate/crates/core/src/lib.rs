//! Paranormed spaces p_φ(x) = φ⁻¹(Σ a_i φ(|x_i|)) over finite discrete
//! measure spaces: generator audits, route certification, moduli of
//! convexity and brute-force oracles that check them.
//!
//! ```
//! use pconvex::{delta_ea, Generator, MeasureSpace, ParanormContext};
//!
//! let phi = Generator::power(2.0).unwrap();
//! let ctx = ParanormContext::new(phi.clone(), MeasureSpace::counting(2).unwrap());
//! assert_eq!(ctx.pnorm(&[3.0, 4.0]).unwrap(), 5.0);
//!
//! let d = delta_ea(&phi, 1.0, 1.0).unwrap();
//! assert!((d - (1.0 - 3f64.sqrt() / 2.0)).abs() < 1e-15);
//! ```

pub mod conditions;
pub mod expr;
pub mod generator;
pub mod measure;
pub mod modulus;
pub mod oracle;
pub mod paranorm;
pub mod solve;

pub use conditions::{
    audit_all, certify, Certificate, ConditionReport, CrossCheck, Grid2, GridError, ParanormRoute, Spacing, UcRoute,
    Verdict, Witness,
};
pub use expr::{differentiate, parse, simplify, Expr, ExprError};
pub use generator::{BuiltinFamily, Generator, GeneratorError, GeneratorSpec};
pub use measure::{CaseClass, MeasureError, MeasureSpace, SimpleFunction};
pub use modulus::{
    delta0, delta_clarkson, delta_ea, delta_ef, delta_psi, delta_thm5, x_r_eps, DeltaQuery, DomainKind, Method,
    Modulus, ModulusError, ModulusRow, ModulusTable,
};
pub use oracle::{
    arc_max_exp, check_lower_bound, empirical_modulus, empirical_modulus_with, survey, ArcResult, LowerBoundReport,
    LowerBoundRow, OracleError, OracleResult, SearchConfig, SearchMode,
};
pub use paranorm::{BoundaryPoint, ParanormContext, ParanormError};
