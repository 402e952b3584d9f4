//! Time constants of directed first-passage percolation.
//!
//! For Ber(q)Geom(beta) weights the time constant is the Legendre
//! transform `f(x) = sup_{0 < lambda < mu} { lambda x - h(lambda) }`, where
//! `h` is the stationary mean queue length of the reversible queue with
//! arrival intensity `lambda` and `mu = q / beta`. The other lattice and
//! continuous models follow as limits. Every supremum is clamped at zero,
//! which produces the flat region uniformly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::format_float;
use crate::optimize::maximize;
use crate::scalar::Real;

/// Bracket width at which the golden-section search stops.
pub const SEARCH_TOL: f64 = 1e-12;

/// Value of a variational formula with the point where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variational<T> {
    pub value: T,
    /// In the variable of the formula; the boundary value when clamped.
    pub maximizer: T,
    pub unimodal: bool,
}

fn check_prob<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn check_positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

fn sup<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, flat_at: T) -> Result<Variational<T>> {
    let m = maximize(f, lo, hi, T::lit(SEARCH_TOL))?;
    Ok(if m.value > T::zero() {
        Variational {
            value: m.value,
            maximizer: m.argmax,
            unimodal: m.unimodal,
        }
    } else {
        Variational {
            value: T::zero(),
            maximizer: flat_at,
            unimodal: m.unimodal,
        }
    })
}

fn square_pos<T: Real>(v: T) -> T {
    let v = v.max(T::zero());
    v * v
}

/// Arrival parameter `alpha` in `(beta, 1)` with intensity `lambda` on the
/// reversible curve of the service `(q, beta)`.
pub fn alpha_of_lambda<T: Real>(q: T, beta: T, lambda: T) -> Result<T> {
    check_prob("q", q)?;
    check_prob("beta", beta)?;
    let mu = q / beta;
    if !(lambda > T::zero() && lambda < mu) {
        return Err(Error::Domain(format!("lambda = {lambda} outside (0, {mu})")));
    }
    let a2 = lambda * (T::one() - beta - q);
    let a1 = beta * q * (T::one() + lambda);
    let a0 = -beta * q;
    let disc = a1 * a1 - T::lit(4.0) * a2 * a0;
    Ok(-T::lit(2.0) * a0 / (a1 + disc.sqrt()))
}

/// `h(lambda)` from the `alpha` form `beta (1-alpha) / (alpha (alpha-beta))`
/// and from the `p` form `p/(1-p) (1-q)/q [p(1-q) / (beta(q-p)) + 1]`.
pub fn h_of_lambda_forms<T: Real>(q: T, beta: T, lambda: T) -> Result<(T, T)> {
    let alpha = alpha_of_lambda(q, beta, lambda)?;
    let one = T::one();
    let by_alpha = beta * (one - alpha) / (alpha * (alpha - beta));
    let p = lambda * alpha;
    let by_p = p / (one - p) * (one - q) / q * (p * (one - q) / (beta * (q - p)) + one);
    Ok((by_alpha, by_p))
}

/// Stationary mean queue length at arrival intensity `lambda`.
pub fn h_of_lambda<T: Real>(q: T, beta: T, lambda: T) -> Result<T> {
    h_of_lambda_forms(q, beta, lambda).map(|(h, _)| h)
}

/// Ber(q)Geom(beta) weights, supremum over the arrival Bernoulli
/// parameter `p` in `(0, q)`.
pub fn f_bergeom<T: Real>(q: T, beta: T, x: T) -> Result<Variational<T>> {
    check_prob("q", q)?;
    check_prob("beta", beta)?;
    check_positive("x", x)?;
    let one = T::one();
    let g = |p: T| {
        p * (p * (one - q) + (q - p) * beta) / (one - p) * (x - (one - q) / (q - p)) / (beta * q)
    };
    sup(g, T::zero(), q, T::zero())
}

/// Ber(q)Geom(beta) weights, supremum over `alpha` in `(beta, 1)`.
pub fn f_bergeom_alpha<T: Real>(q: T, beta: T, x: T) -> Result<Variational<T>> {
    check_prob("q", q)?;
    check_prob("beta", beta)?;
    check_positive("x", x)?;
    let one = T::one();
    let g = |a: T| beta * (one - a) / a * (q * x / (a * (one - beta - q) + beta * q) - one / (a - beta));
    sup(g, beta, one, one)
}

/// Legendre transform of `h`, supremum over `lambda` in `(0, q/beta)`.
pub fn f_legendre<T: Real>(q: T, beta: T, x: T) -> Result<Variational<T>> {
    check_prob("q", q)?;
    check_prob("beta", beta)?;
    check_positive("x", x)?;
    let g = |l: T| match h_of_lambda(q, beta, l) {
        Ok(h) => l * x - h,
        Err(_) => T::neg_infinity(),
    };
    sup(g, T::zero(), q / beta, T::zero())
}

/// Bernoulli(q) weights: `(sqrt(qx) - sqrt(1-q))^2` above `x = (1-q)/q`.
pub fn f_bernoulli<T: Real>(q: T, x: T) -> Result<T> {
    check_prob("q", q)?;
    check_positive("x", x)?;
    Ok(square_pos((q * x).sqrt() - (T::one() - q).sqrt()))
}

/// Geom0(beta) weights: `(sqrt((1-beta)(1+x)) - 1)^2 / beta` above
/// `x = beta/(1-beta)`.
pub fn f_geometric<T: Real>(beta: T, x: T) -> Result<T> {
    check_prob("beta", beta)?;
    check_positive("x", x)?;
    let one = T::one();
    Ok(square_pos(((one - beta) * (one + x)).sqrt() - one) / beta)
}

/// Exp(1) weights: `(sqrt(1+x) - 1)^2`.
pub fn f_exponential<T: Real>(x: T) -> Result<T> {
    check_positive("x", x)?;
    Ok(square_pos((T::one() + x).sqrt() - T::one()))
}

/// Ber(q)Exp(1) weights: `sup_r r^2 [qx/(1-q+rq) - 1/(1-r)]`.
pub fn f_berexp<T: Real>(q: T, x: T) -> Result<Variational<T>> {
    check_prob("q", q)?;
    check_positive("x", x)?;
    let one = T::one();
    let g = |r: T| r * r * (q * x / (one - q + r * q) - one / (one - r));
    sup(g, T::zero(), one, T::zero())
}

/// Continuous model, Geom+(beta) jumps at rate-one Poisson times:
/// `beta sup_alpha (1-alpha)/alpha [y/(alpha(1-beta)) - 1/(alpha-beta)]`.
///
/// Searched in `t = (alpha - beta)/(1 - beta)` so the bracket keeps unit
/// width as `beta -> 1`; the maximizer is reported as `alpha`.
pub fn ftilde_geom<T: Real>(beta: T, y: T) -> Result<Variational<T>> {
    check_prob("beta", beta)?;
    check_positive("y", y)?;
    let one = T::one();
    let span = one - beta;
    let g = |t: T| {
        let a = beta + span * t;
        let gap = span * t;
        beta * (span * (one - t)) / a * (y / (a * span) - one / gap)
    };
    let v = sup(g, T::zero(), one, one)?;
    Ok(Variational {
        maximizer: beta + span * v.maximizer,
        ..v
    })
}

/// Continuous model with Exp(1) jumps: `sup_r r^2 [y - 1/(1-r)]`.
pub fn ftilde_exp<T: Real>(y: T) -> Result<Variational<T>> {
    check_positive("y", y)?;
    let one = T::one();
    sup(|r: T| r * r * (y - one / (one - r)), T::zero(), one, T::zero())
}

/// Closed form of [`ftilde_exp`]: the stationary point solves
/// `2 y s^2 - s - 1 = 0` with `s = 1 - r`, which gives
/// `(8y^3 + 20y^2 - y - sqrt(8y+1)(8y^2 + y)) / (8y^2)` for `y > 1`.
pub fn ftilde_exp_closed<T: Real>(y: T) -> Result<T> {
    check_positive("y", y)?;
    if y <= T::one() {
        return Ok(T::zero());
    }
    let c = |v: f64| T::lit(v);
    let root = (c(8.0) * y + T::one()).sqrt();
    let s = (T::one() + root) / (c(4.0) * y);
    Ok(((T::one() - s) * (T::one() - s) * (y - T::one() / s)).max(T::zero()))
}

/// The same closed form written as a polynomial in `y`.
pub fn ftilde_exp_polynomial<T: Real>(y: T) -> Result<T> {
    check_positive("y", y)?;
    if y <= T::one() {
        return Ok(T::zero());
    }
    let c = |v: f64| T::lit(v);
    let y2 = y * y;
    let root = (c(8.0) * y + T::one()).sqrt();
    Ok(((c(8.0) * y2 * y + c(20.0) * y2 - y - root * (c(8.0) * y2 + y)) / (c(8.0) * y2)).max(T::zero()))
}

/// Continuous model with unit jumps: `([sqrt(y) - 1]_+)^2`.
pub fn ftilde_poisson<T: Real>(y: T) -> Result<T> {
    check_positive("y", y)?;
    Ok(square_pos(y.sqrt() - T::one()))
}

/// A time-constant formula with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeConstantQuery {
    Ber { q: f64 },
    Geom { beta: f64 },
    Exp,
    BerGeom { q: f64, beta: f64 },
    /// The Ber-Geom constant through the Legendre transform of `h`.
    Legendre { q: f64, beta: f64 },
    BerExp { q: f64 },
    ContGeom { beta: f64 },
    ContExp,
    ContPoisson,
}

/// One evaluated abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub x: T,
    pub f: T,
    /// `None` for closed forms.
    pub maximizer: Option<T>,
}

impl TimeConstantQuery {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ber { .. } => "ber",
            Self::Geom { .. } => "geom",
            Self::Exp => "exp",
            Self::BerGeom { .. } => "ber_geom",
            Self::Legendre { .. } => "legendre",
            Self::BerExp { .. } => "ber_exp",
            Self::ContGeom { .. } => "cont_geom",
            Self::ContExp => "cont_exp",
            Self::ContPoisson => "cont_poisson",
        }
    }

    /// Parameters as `key=value` pairs joined by `;`.
    pub fn params(&self) -> String {
        match *self {
            Self::Ber { q } | Self::BerExp { q } => format!("q={q}"),
            Self::Geom { beta } | Self::ContGeom { beta } => format!("beta={beta}"),
            Self::BerGeom { q, beta } | Self::Legendre { q, beta } => format!("q={q};beta={beta}"),
            Self::Exp | Self::ContExp | Self::ContPoisson => String::new(),
        }
    }

    pub fn evaluate<T: Real>(&self, x: T) -> Result<CurvePoint<T>> {
        let closed = |f: T| CurvePoint { x, f, maximizer: None };
        let var = |v: Variational<T>| CurvePoint {
            x,
            f: v.value,
            maximizer: Some(v.maximizer),
        };
        let l = T::lit;
        Ok(match *self {
            Self::Ber { q } => closed(f_bernoulli(l(q), x)?),
            Self::Geom { beta } => closed(f_geometric(l(beta), x)?),
            Self::Exp => closed(f_exponential(x)?),
            Self::BerGeom { q, beta } => var(f_bergeom(l(q), l(beta), x)?),
            Self::Legendre { q, beta } => var(f_legendre(l(q), l(beta), x)?),
            Self::BerExp { q } => var(f_berexp(l(q), x)?),
            Self::ContGeom { beta } => var(ftilde_geom(l(beta), x)?),
            Self::ContExp => var(ftilde_exp(x)?),
            Self::ContPoisson => closed(ftilde_poisson(x)?),
        })
    }

    pub fn curve<T: Real>(&self, grid: &[T]) -> Result<CurveResult<T>> {
        if grid.is_empty() {
            return Err(Error::InvalidParameter("empty abscissa grid".into()));
        }
        let points = grid.iter().map(|&x| self.evaluate(x)).collect::<Result<_>>()?;
        Ok(CurveResult { query: *self, points })
    }
}

/// A tabulated curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult<T> {
    pub query: TimeConstantQuery,
    pub points: Vec<CurvePoint<T>>,
}

impl<T: Real> CurveResult<T> {
    /// CSV with header `variant,params,x,f,maximizer`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variant", "params", "x", "f", "maximizer"])?;
        let fmt = |v: T| format_float(v.to_f64().unwrap_or(f64::NAN));
        for p in &self.points {
            w.write_record([
                self.query.name().to_string(),
                self.query.params(),
                fmt(p.x),
                fmt(p.f),
                p.maximizer.map(fmt).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Nonnegative, nondecreasing and with second differences above
    /// `-tol` on the grid as given (assumed sorted and equally spaced).
    pub fn is_convex_nondecreasing(&self, tol: T) -> bool {
        let f: Vec<T> = self.points.iter().map(|p| p.f).collect();
        f.iter().all(|&v| v >= T::zero())
            && f.windows(2).all(|w| w[1] >= w[0] - tol)
            && f.windows(3).all(|w| w[2] - w[1] - (w[1] - w[0]) >= -tol)
    }
}

/// `count` equally spaced points from `lo` to `hi` inclusive.
pub fn linear_grid<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * T::lit(i as f64 / (count - 1) as f64))
            .collect(),
    }
}
