//! One-dimensional maximization of unimodal objectives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Interior points evaluated before the golden-section refinement.
pub const SCAN_POINTS: usize = 1000;
const MAX_GOLDEN_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maximum<T> {
    pub argmax: T,
    pub value: T,
    /// False when the scan saw a rise after a fall, beyond rounding noise.
    pub unimodal: bool,
}

/// Maximizes `f` over the open interval `(lo, hi)`.
///
/// `f` is first evaluated on [`SCAN_POINTS`] equally spaced interior
/// points; the bracket around the best of them is then shrunk by golden
/// section until narrower than `tol`. Non-finite values count as `-inf`.
pub fn maximize<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, tol: T) -> Result<Maximum<T>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("empty search interval ({lo}, {hi})")));
    }
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let eval = |x: T| {
        let v = f(x);
        if v.is_nan() {
            T::neg_infinity()
        } else {
            v
        }
    };
    let n = SCAN_POINTS;
    let width = hi - lo;
    let grid: Vec<T> = (0..n)
        .map(|i| lo + width * T::lit((i as f64 + 0.5) / n as f64))
        .collect();
    let values: Vec<T> = grid.iter().map(|&x| eval(x)).collect();
    let unimodal = is_unimodal(&values);
    let best = (0..n).fold(0, |b, i| if values[i] > values[b] { i } else { b });

    let mut a = if best == 0 { lo } else { grid[best - 1] };
    let mut b = if best + 1 == n { hi } else { grid[best + 1] };
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    let mut steps = 0;
    while b - a > tol && steps < MAX_GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
        steps += 1;
    }
    let mid = (a + b) / T::lit(2.0);
    let candidates = [(mid, eval(mid)), (c, fc), (d, fd), (grid[best], values[best])];
    let (argmax, value) = candidates
        .into_iter()
        .fold(candidates[0], |acc, cand| if cand.1 > acc.1 { cand } else { acc });
    Ok(Maximum { argmax, value, unimodal })
}

/// No strict rise after a strict fall, allowing relative noise of `1e-12`
/// (`1e-5` in single precision).
pub fn is_unimodal<T: Real>(values: &[T]) -> bool {
    let rel = if T::epsilon() > T::lit(1e-10) { T::lit(1e-5) } else { T::lit(1e-12) };
    let mut falling = false;
    for w in values.windows(2) {
        let (u, v) = (w[0], w[1]);
        if !u.is_finite() || !v.is_finite() {
            // an infinite wall can only bound the interval from outside
            if falling && v > u {
                return false;
            }
            continue;
        }
        let noise = rel * (u.abs() + v.abs()).max(T::one());
        if v < u - noise {
            falling = true;
        } else if falling && v > u + noise {
            return false;
        }
    }
    true
}
