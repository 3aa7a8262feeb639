//! Finite discrete measure spaces Ω = {1..k} with point masses a_i = μ({i}).

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("a measure space needs at least one weight")]
    Empty,
    #[error("weight {index} is {value}; weights must be finite and nonnegative")]
    BadWeight { index: usize, value: f64 },
    #[error("all weights are zero")]
    AllZero,
    #[error("cannot parse weight `{token}`")]
    Parse { token: String },
    #[error("vector has {got} coordinates, the space has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Weight vector with every a_i ≥ 0 and at least one a_i > 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSpace {
    weights: Vec<f64>,
}

/// Which of the two measure-space hypotheses hold. Both may hold at once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseClass {
    /// Σ a_i ≤ 1.
    pub sub_probability: bool,
    /// Every a_i ∈ {0} ∪ [1, ∞).
    pub counting_like: bool,
    /// Every a_i is a nonnegative integer, i.e. μ is a counting measure on a multiset.
    pub integer_weights: bool,
    pub total_mass: f64,
    /// Index of a weight in (0, 1) when `counting_like` fails.
    pub counting_witness: Option<usize>,
}

impl CaseClass {
    pub fn is_general(&self) -> bool {
        !self.sub_probability && !self.counting_like
    }

    pub fn label(&self) -> &'static str {
        match (self.sub_probability, self.counting_like) {
            (true, true) => "sub-probability+counting-like",
            (true, false) => "sub-probability",
            (false, true) => "counting-like",
            (false, false) => "general",
        }
    }
}

impl MeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self, MeasureError> {
        if weights.is_empty() {
            return Err(MeasureError::Empty);
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(MeasureError::BadWeight { index, value });
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(MeasureError::AllZero);
        }
        Ok(MeasureSpace { weights })
    }

    /// k copies of weight 1.
    pub fn counting(k: usize) -> Result<Self, MeasureError> {
        MeasureSpace::new(vec![1.0; k])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn classify(&self) -> CaseClass {
        // sort before summing so the total does not depend on the order of weights
        let mut sorted = self.weights.clone();
        sorted.sort_by(f64::total_cmp);
        let total_mass: f64 = sorted.iter().sum();
        let counting_witness = self.weights.iter().position(|&w| w > 0.0 && w < 1.0);
        CaseClass {
            sub_probability: total_mass <= 1.0,
            counting_like: counting_witness.is_none(),
            integer_weights: self.weights.iter().all(|&w| w.fract() == 0.0),
            total_mass,
            counting_witness,
        }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<(), MeasureError> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(MeasureError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            })
        }
    }
}

/// Accepts `1,1` or `weights=1,1`.
impl FromStr for MeasureSpace {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim();
        let body = body.strip_prefix("weights=").unwrap_or(body);
        let weights = body
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| MeasureError::Parse {
                    token: tok.trim().to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        MeasureSpace::new(weights)
    }
}

impl fmt::Display for MeasureSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// A simple function on the space: one real per atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleFunction {
    coords: Vec<f64>,
}

impl SimpleFunction {
    pub fn new(space: &MeasureSpace, coords: Vec<f64>) -> Result<Self, MeasureError> {
        space.check_dim(&coords)?;
        Ok(SimpleFunction { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

impl AsRef<[f64]> for SimpleFunction {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(w: &[f64]) -> CaseClass {
        MeasureSpace::new(w.to_vec()).unwrap().classify()
    }

    #[test]
    fn classification_examples() {
        let c = classify(&[0.3, 0.4]);
        assert!(c.sub_probability && !c.counting_like);
        assert_eq!(c.counting_witness, Some(0));

        let c = classify(&[1.0, 1.0]);
        assert!(!c.sub_probability && c.counting_like && c.integer_weights);

        let c = classify(&[0.5, 2.0]);
        assert!(c.is_general());
        assert_eq!(c.label(), "general");

        let c = classify(&[1.0, 0.0]);
        assert!(c.sub_probability && c.counting_like);

        let c = classify(&[1.5, 2.0]);
        assert!(c.counting_like && !c.integer_weights);
    }

    #[test]
    fn rejects_invalid_weights() {
        assert_eq!(MeasureSpace::new(vec![]), Err(MeasureError::Empty));
        assert_eq!(MeasureSpace::new(vec![0.0, 0.0]), Err(MeasureError::AllZero));
        assert!(matches!(
            MeasureSpace::new(vec![1.0, -0.1]),
            Err(MeasureError::BadWeight { index: 1, .. })
        ));
        assert!(MeasureSpace::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn parses_weight_lists() {
        let m: MeasureSpace = "weights=1,1".parse().unwrap();
        assert_eq!(m.weights(), &[1.0, 1.0]);
        let m: MeasureSpace = " 0.5, 0.25 ".parse().unwrap();
        assert_eq!(m.weights(), &[0.5, 0.25]);
        assert!(matches!("1,x".parse::<MeasureSpace>(), Err(MeasureError::Parse { .. })));
        assert_eq!(m.to_string(), "0.5,0.25");
    }

    #[test]
    fn simple_function_dimension() {
        let m = MeasureSpace::counting(2).unwrap();
        assert!(SimpleFunction::new(&m, vec![1.0, 2.0]).is_ok());
        assert_eq!(
            SimpleFunction::new(&m, vec![1.0]),
            Err(MeasureError::DimensionMismatch { expected: 2, got: 1 })
        );
    }
}
