//! Fixtures shared by the benchmarks.

use pconvex::{Generator, MeasureSpace, ParanormContext};

pub fn generators() -> Vec<(&'static str, Generator)> {
    [
        "power:p=2",
        "power:p=3.5",
        "exp:a=e",
        "powexp:p=2,a=e",
        "cubicrational:p=3",
        "expr:t^3/(t+1)",
    ]
    .into_iter()
    .map(|s| (s, Generator::from_spec_str(s).expect("builtin spec")))
    .collect()
}

pub fn context(spec: &str, weights: &[f64]) -> ParanormContext {
    ParanormContext::new(
        Generator::from_spec_str(spec).expect("builtin spec"),
        MeasureSpace::new(weights.to_vec()).expect("valid weights"),
    )
}

/// r-major grid with eps at fixed fractions of 2r.
pub fn delta_points(n: usize) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        let r = 0.5 + 2.0 * i as f64 / n.max(2) as f64;
        for j in 0..n {
            pts.push((r, 2.0 * r * (j as f64 + 0.5) / n as f64));
        }
    }
    pts
}
