//! Scalar root finding for increasing functions.

/// Outcome of a one-dimensional solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// Value of the target function at `x`.
    pub residual: f64,
    pub iterations: usize,
}

fn ulps_apart(a: f64, b: f64, n: f64) -> bool {
    (a - b).abs() <= n * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Shrinks `[lo, hi]` around the sign change of an increasing `g`, keeping
/// `g(lo) <= 0 < g(hi)`. Stops when the bracket collapses to adjacent floats
/// or after `max_iter` halvings. Returns the final bracket.
pub fn bisect_increasing<G>(mut g: G, mut lo: f64, mut hi: f64, max_iter: usize) -> (f64, f64)
where
    G: FnMut(f64) -> f64,
{
    for _ in 0..max_iter {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Safeguarded Newton iteration for an increasing `g` bracketed by
/// `g(lo) <= 0 <= g(hi)`. Newton steps that leave the current bracket, meet
/// a non-positive slope, or shrink the step by less than half fall back to
/// bisection.
pub fn newton_bisect<G, D>(mut g: G, mut dg: D, mut lo: f64, mut hi: f64, max_iter: usize) -> Root
where
    G: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let mut x = lo + 0.5 * (hi - lo);
    let mut step_old = hi - lo;
    let mut best = Root {
        x,
        residual: f64::INFINITY,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let gx = g(x);
        if gx.abs() < best.residual.abs() || !best.residual.is_finite() {
            best = Root {
                x,
                residual: gx,
                iterations: it,
            };
        }
        if gx == 0.0 {
            break;
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = dg(x);
        let newton = x - gx / slope;
        let slow = (2.0 * gx).abs() > (step_old * slope).abs();
        let next = if slope.is_finite() && slope > 0.0 && newton > lo && newton < hi && !slow {
            newton
        } else {
            lo + 0.5 * (hi - lo)
        };
        step_old = (next - x).abs();
        if ulps_apart(next, x, 2.0) || ulps_apart(lo, hi, 2.0) {
            let gn = g(next);
            if gn.abs() < best.residual.abs() {
                best = Root {
                    x: next,
                    residual: gn,
                    iterations: it,
                };
            }
            break;
        }
        x = next;
    }
    best
}
