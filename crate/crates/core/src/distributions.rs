//! Batch-size laws: Bernoulli, the two geometric conventions, the
//! Bernoulli-geometric product law and their continuous counterparts.
//!
//! Conventions used throughout the crate:
//!
//! ```text
//! Geom+(a):      P(k) = a (1-a)^(k-1),            k >= 1
//! Geom0(a):      law of Geom+(a) - 1,             k >= 0
//! BerGeom(p, a): P(0) = 1 - p,  P(k) = p a (1-a)^(k-1),  k >= 1
//! BerExp(p, a):  P(X >= x) = p e^(-a x),          x > 0
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Amount;

/// Tagged description of a batch distribution.
///
/// JSON form: `{"kind": "ber_geom", "p": 0.25, "alpha": 0.5}`. Field names
/// per kind: `bernoulli {p}`, `geom_plus {alpha}`, `geom_zero {alpha}`,
/// `ber_geom {p, alpha}`, `exp {rate}`, `ber_exp {p, rate}`,
/// `deterministic {value}`, `uniform_int {lo, hi}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Bernoulli { p: f64 },
    GeomPlus { alpha: f64 },
    GeomZero { alpha: f64 },
    BerGeom { p: f64, alpha: f64 },
    Exp { rate: f64 },
    BerExp { p: f64, rate: f64 },
    Deterministic { value: f64 },
    /// Uniform on the integers `lo..=hi`.
    UniformInt { lo: u64, hi: u64 },
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

/// `(1 - a)^n` for integer `n`.
#[inline]
fn comp_pow(a: f64, n: u64) -> f64 {
    let base = 1.0 - a;
    match i32::try_from(n) {
        Ok(n) => base.powi(n),
        Err(_) => base.powf(n as f64),
    }
}

/// Geom+(a) draw by inversion: `ceil(ln U / ln(1 - a))`, at least 1.
#[inline]
fn draw_geom_plus(alpha: f64, rng: &mut RandomStream) -> u64 {
    if alpha >= 1.0 {
        return 1;
    }
    let k = (rng.uniform_pos().ln() / (-alpha).ln_1p()).ceil();
    if k < 1.0 {
        1
    } else if k >= u64::MAX as f64 {
        u64::MAX
    } else {
        k as u64
    }
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DistSpec::Bernoulli { p } => check_prob("p", p),
            DistSpec::GeomPlus { alpha } | DistSpec::GeomZero { alpha } => check_prob("alpha", alpha),
            DistSpec::BerGeom { p, alpha } => {
                check_prob("p", p)?;
                check_prob("alpha", alpha)
            }
            DistSpec::Exp { rate } => check_rate("rate", rate),
            DistSpec::BerExp { p, rate } => {
                check_prob("p", p)?;
                check_rate("rate", rate)
            }
            DistSpec::Deterministic { value } => {
                if value >= 0.0 && value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("value = {value} must be >= 0")))
                }
            }
            DistSpec::UniformInt { lo, hi } => {
                if lo <= hi {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("uniform range {lo}..={hi} is empty")))
                }
            }
        }
    }

    /// Integer-valued laws. `Deterministic` counts when its value is integral.
    pub fn is_discrete(&self) -> bool {
        match *self {
            DistSpec::Exp { .. } | DistSpec::BerExp { .. } => false,
            DistSpec::Deterministic { value } => value.fract() == 0.0,
            _ => true,
        }
    }

    fn require_discrete(&self) -> Result<()> {
        if self.is_discrete() {
            Ok(())
        } else {
            Err(Error::DiscreteOnly(self.to_string()))
        }
    }

    /// `P(X = k)`.
    pub fn pmf(&self, k: u64) -> Result<f64> {
        self.require_discrete()?;
        Ok(match *self {
            DistSpec::Bernoulli { p } => match k {
                0 => 1.0 - p,
                1 => p,
                _ => 0.0,
            },
            DistSpec::GeomPlus { alpha } => {
                if k == 0 {
                    0.0
                } else {
                    alpha * comp_pow(alpha, k - 1)
                }
            }
            DistSpec::GeomZero { alpha } => alpha * comp_pow(alpha, k),
            DistSpec::BerGeom { p, alpha } => {
                if k == 0 {
                    1.0 - p
                } else {
                    p * alpha * comp_pow(alpha, k - 1)
                }
            }
            DistSpec::Deterministic { value } => {
                if k as f64 == value {
                    1.0
                } else {
                    0.0
                }
            }
            DistSpec::UniformInt { lo, hi } => {
                if (lo..=hi).contains(&k) {
                    1.0 / (hi - lo + 1) as f64
                } else {
                    0.0
                }
            }
            DistSpec::Exp { .. } | DistSpec::BerExp { .. } => unreachable!(),
        })
    }

    /// `P(X >= k)` for discrete laws.
    pub fn tail_ge(&self, k: u64) -> Result<f64> {
        self.require_discrete()?;
        if k == 0 {
            return Ok(1.0);
        }
        Ok(match *self {
            DistSpec::Bernoulli { p } => {
                if k == 1 {
                    p
                } else {
                    0.0
                }
            }
            DistSpec::GeomPlus { alpha } => comp_pow(alpha, k - 1),
            DistSpec::GeomZero { alpha } => comp_pow(alpha, k),
            DistSpec::BerGeom { p, alpha } => p * comp_pow(alpha, k - 1),
            DistSpec::Deterministic { value } => {
                if value >= k as f64 {
                    1.0
                } else {
                    0.0
                }
            }
            DistSpec::UniformInt { lo, hi } => {
                if k <= lo {
                    1.0
                } else if k > hi {
                    0.0
                } else {
                    (hi - k + 1) as f64 / (hi - lo + 1) as f64
                }
            }
            DistSpec::Exp { .. } | DistSpec::BerExp { .. } => unreachable!(),
        })
    }

    /// `P(X >= x)` for any law and real `x >= 0`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match *self {
            DistSpec::Exp { rate } => (-rate * x).exp(),
            DistSpec::BerExp { p, rate } => p * (-rate * x).exp(),
            DistSpec::Deterministic { value } => {
                if value >= x {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.tail_ge(x.ceil() as u64).expect("discrete law"),
        }
    }

    /// Smallest `k` with `P(X >= k) < eps`, i.e. a truncation point for
    /// discrete laws. `None` for continuous ones.
    pub fn truncation_point(&self, eps: f64) -> Option<u64> {
        if !self.is_discrete() {
            return None;
        }
        let geometric = |scale: f64, alpha: f64, shift: u64| -> u64 {
            // scale (1 - alpha)^(k - shift) < eps
            if scale < eps {
                return shift;
            }
            let n = ((eps / scale).ln() / (-alpha).ln_1p()).floor() as u64 + 1;
            n + shift
        };
        Some(match *self {
            DistSpec::Bernoulli { .. } => 2,
            DistSpec::GeomPlus { alpha } => geometric(1.0, alpha, 1),
            DistSpec::GeomZero { alpha } => geometric(1.0, alpha, 0),
            DistSpec::BerGeom { p, alpha } => geometric(p, alpha, 1).max(1),
            DistSpec::Deterministic { value } => value as u64 + 1,
            DistSpec::UniformInt { hi, .. } => hi + 1,
            DistSpec::Exp { .. } | DistSpec::BerExp { .. } => unreachable!(),
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistSpec::Bernoulli { p } => p,
            DistSpec::GeomPlus { alpha } => 1.0 / alpha,
            DistSpec::GeomZero { alpha } => (1.0 - alpha) / alpha,
            DistSpec::BerGeom { p, alpha } => p / alpha,
            DistSpec::Exp { rate } => 1.0 / rate,
            DistSpec::BerExp { p, rate } => p / rate,
            DistSpec::Deterministic { value } => value,
            DistSpec::UniformInt { lo, hi } => (lo + hi) as f64 / 2.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistSpec::Bernoulli { p } => p * (1.0 - p),
            DistSpec::GeomPlus { alpha } | DistSpec::GeomZero { alpha } => (1.0 - alpha) / (alpha * alpha),
            DistSpec::BerGeom { p, alpha } => p * (2.0 - alpha) / (alpha * alpha) - (p / alpha).powi(2),
            DistSpec::Exp { rate } => 1.0 / (rate * rate),
            DistSpec::BerExp { p, rate } => (2.0 * p - p * p) / (rate * rate),
            DistSpec::Deterministic { .. } => 0.0,
            DistSpec::UniformInt { lo, hi } => {
                let n = (hi - lo + 1) as f64;
                (n * n - 1.0) / 12.0
            }
        }
    }

    /// Probability generating function `E[z^X]`.
    ///
    /// Accepts any `z >= 0` inside the radius of convergence (beyond 1 only
    /// for the geometric families, up to `1 / (1 - alpha)`).
    pub fn pgf(&self, z: f64) -> Result<f64> {
        self.require_discrete()?;
        if !(z >= 0.0) {
            return Err(Error::Domain(format!("pgf argument z = {z} must be >= 0")));
        }
        let check_radius = |alpha: f64| {
            if z * (1.0 - alpha) >= 1.0 {
                Err(Error::Domain(format!("pgf diverges at z = {z}")))
            } else {
                Ok(())
            }
        };
        Ok(match *self {
            DistSpec::Bernoulli { p } => 1.0 - p + p * z,
            DistSpec::GeomPlus { alpha } => {
                check_radius(alpha)?;
                alpha * z / (1.0 - (1.0 - alpha) * z)
            }
            DistSpec::GeomZero { alpha } => {
                check_radius(alpha)?;
                alpha / (1.0 - (1.0 - alpha) * z)
            }
            DistSpec::BerGeom { p, alpha } => {
                check_radius(alpha)?;
                ((1.0 - p) - (1.0 - p - alpha) * z) / (1.0 - (1.0 - alpha) * z)
            }
            DistSpec::Deterministic { value } => z.powf(value),
            DistSpec::UniformInt { lo, hi } => {
                let n = (hi - lo + 1) as f64;
                (lo..=hi).map(|k| z.powf(k as f64)).sum::<f64>() / n
            }
            DistSpec::Exp { .. } | DistSpec::BerExp { .. } => unreachable!(),
        })
    }

    /// One draw as a real number. Geometric parts use inversion, so the
    /// cost of a draw does not depend on its value.
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        match *self {
            DistSpec::Exp { rate } => -rng.uniform_pos().ln() / rate,
            DistSpec::BerExp { p, rate } => {
                if rng.bernoulli(p) {
                    -rng.uniform_pos().ln() / rate
                } else {
                    0.0
                }
            }
            DistSpec::Deterministic { value } => value,
            _ => self.draw_count(rng) as f64,
        }
    }

    /// One draw of a discrete law.
    pub fn sample_discrete(&self, rng: &mut RandomStream) -> Result<u64> {
        self.require_discrete()?;
        Ok(self.draw_count(rng))
    }

    #[inline]
    fn draw_count(&self, rng: &mut RandomStream) -> u64 {
        match *self {
            DistSpec::Bernoulli { p } => u64::from(rng.bernoulli(p)),
            DistSpec::GeomPlus { alpha } => draw_geom_plus(alpha, rng),
            DistSpec::GeomZero { alpha } => draw_geom_plus(alpha, rng) - 1,
            DistSpec::BerGeom { p, alpha } => {
                if rng.bernoulli(p) {
                    draw_geom_plus(alpha, rng)
                } else {
                    0
                }
            }
            DistSpec::Deterministic { value } => value as u64,
            DistSpec::UniformInt { lo, hi } => lo + (rng.uniform() * (hi - lo + 1) as f64) as u64,
            DistSpec::Exp { .. } | DistSpec::BerExp { .. } => unreachable!("checked by caller"),
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistSpec::Bernoulli { p } => write!(f, "Ber({p})"),
            DistSpec::GeomPlus { alpha } => write!(f, "Geom+({alpha})"),
            DistSpec::GeomZero { alpha } => write!(f, "Geom0({alpha})"),
            DistSpec::BerGeom { p, alpha } => write!(f, "Ber({p})Geom({alpha})"),
            DistSpec::Exp { rate } => write!(f, "Exp({rate})"),
            DistSpec::BerExp { p, rate } => write!(f, "Ber({p})Exp({rate})"),
            DistSpec::Deterministic { value } => write!(f, "Det({value})"),
            DistSpec::UniformInt { lo, hi } => write!(f, "Unif{{{lo}..{hi}}}"),
        }
    }
}

/// Draws a Ber(p)Geom(alpha) variable as a geometric number of geometrics:
/// `V` with `P(V = k) = (1 - p) p^k` and `V` i.i.d. Geom+(alpha / (1 - p))
/// summands. Needs `alpha <= 1 - p` so the summand parameter is a probability.
pub fn sample_compound(p: f64, alpha: f64, rng: &mut RandomStream) -> Result<u64> {
    check_prob("p", p)?;
    check_prob("alpha", alpha)?;
    let limit = 1.0 - p;
    if alpha > limit {
        return Err(Error::CompoundUnavailable { alpha, limit });
    }
    let summand = (alpha / limit).min(1.0);
    // V ~ Geom0(1 - p) by inversion
    let v = (rng.uniform_pos().ln() / p.ln()).floor() as u64;
    let mut total = 0u64;
    for _ in 0..v {
        total += draw_geom_plus(summand, rng);
    }
    Ok(total)
}

/// Amounts that can be drawn from a [`DistSpec`].
pub trait Draw: Amount {
    fn draw(spec: &DistSpec, rng: &mut RandomStream) -> Result<Self>;
}

impl Draw for u64 {
    #[inline]
    fn draw(spec: &DistSpec, rng: &mut RandomStream) -> Result<Self> {
        spec.sample_discrete(rng)
    }
}

impl Draw for i64 {
    #[inline]
    fn draw(spec: &DistSpec, rng: &mut RandomStream) -> Result<Self> {
        spec.sample_discrete(rng).map(|v| v as i64)
    }
}

impl Draw for f64 {
    #[inline]
    fn draw(spec: &DistSpec, rng: &mut RandomStream) -> Result<Self> {
        Ok(spec.sample(rng))
    }
}
