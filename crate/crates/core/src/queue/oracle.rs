use serde::{Deserialize, Serialize};

use crate::distributions::DistSpec;
use crate::error::{Error, Result};

/// Arrival batches are truncated once their tail mass drops below this.
/// Dropped upward jumps perturb the far tail in absolute terms, so the
/// cut has to sit well below the smallest probabilities of interest.
const ARRIVAL_TAIL_EPS: f64 = 1e-30;
/// Largest probability mass the truncated chain may lose.
const MAX_RESIDUAL_MASS: f64 = 1e-12;
const REL_TOL: f64 = 1e-13;
const MAX_ITERATIONS: usize = 2_000_000;

/// Stationary law of the queue-length chain restricted to `{0..K}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub pmf: Vec<f64>,
    /// Stationary mass that the truncated kernel sends above `K` per step.
    pub residual_mass: f64,
    pub iterations: usize,
}

impl OracleResult {
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Stationary pmf of `X` by power iteration on the exact one-slot kernel.
///
/// The kernel lives on `{0..K}`; transitions above `K` are dropped rather
/// than reflected, and the lost mass is reported. Errors when that mass
/// exceeds `1e-12`.
pub fn markov_oracle(arrival: &DistSpec, service: &DistSpec, k_max: usize) -> Result<OracleResult> {
    arrival.validate()?;
    service.validate()?;
    if !arrival.is_discrete() {
        return Err(Error::DiscreteOnly(arrival.to_string()));
    }
    if !service.is_discrete() {
        return Err(Error::DiscreteOnly(service.to_string()));
    }
    if arrival.mean() >= service.mean() {
        return Err(Error::Unstable {
            arrival: arrival.mean(),
            service: service.mean(),
        });
    }
    let a_max = arrival.truncation_point(ARRIVAL_TAIL_EPS).expect("discrete") as usize;
    let y_max = k_max + a_max;
    let pa: Vec<f64> = (0..a_max).map(|a| arrival.pmf(a as u64)).collect::<Result<_>>()?;
    let ps: Vec<f64> = (0..=y_max).map(|s| service.pmf(s as u64)).collect::<Result<_>>()?;
    let ps_ge: Vec<f64> = (0..=y_max).map(|s| service.tail_ge(s as u64)).collect::<Result<_>>()?;

    let n = k_max + 1;
    let mut kernel = vec![0.0f64; n * n];
    for x in 0..n {
        let row = &mut kernel[x * n..(x + 1) * n];
        for (a, &w) in pa.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let y = x + a;
            row[0] += w * ps_ge[y];
            for (xn, cell) in row.iter_mut().enumerate().take(y.min(k_max) + 1).skip(1) {
                *cell += w * ps[y - xn];
            }
        }
    }
    let deficit: Vec<f64> = (0..n)
        .map(|x| (1.0 - kernel[x * n..(x + 1) * n].iter().sum::<f64>()).max(0.0))
        .collect();

    let mut pi = vec![0.0f64; n];
    pi[0] = 1.0;
    let mut next = vec![0.0f64; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        next.iter_mut().for_each(|v| *v = 0.0);
        for (x, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (v, &k) in next.iter_mut().zip(&kernel[x * n..(x + 1) * n]) {
                *v += w * k;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let converged = pi
            .iter()
            .zip(&next)
            .all(|(&old, &new)| new < 1e-250 || (new - old).abs() <= REL_TOL * new);
        std::mem::swap(&mut pi, &mut next);
        if converged || iterations >= MAX_ITERATIONS {
            break;
        }
    }
    let residual_mass: f64 = pi.iter().zip(&deficit).map(|(p, d)| p * d).sum();
    if residual_mass > MAX_RESIDUAL_MASS {
        return Err(Error::IncreaseK {
            k: k_max,
            mass: residual_mass,
        });
    }
    Ok(OracleResult {
        pmf: pi,
        residual_mass,
        iterations,
    })
}
