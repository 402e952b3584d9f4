//! Closed-form results for the queue with Ber(p)Geom(alpha) arrivals and
//! Ber(q)Geom(beta) services.
//!
//! The queue is reversible exactly when
//!
//! ```text
//! alpha/(1-alpha) * p/(1-p) = beta/(1-beta) * q/(1-q)
//! ```
//!
//! and then `X ~ Ber(c)Geom(gamma)` with `c = beta/(1-beta) * (1-alpha)/alpha`
//! and `gamma = (alpha-beta)/(1-beta)`, while `Y ~ Ber(p+c-pc)Geom(gamma)`.

use serde::{Deserialize, Serialize};

use crate::distributions::DistSpec;
use crate::error::{Error, Result};

/// Relative tolerance for deciding that the reversibility condition holds.
pub const CONDITION_TOL: f64 = 1e-12;

/// Arrival `(p, alpha)` and service `(q, beta)` parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    pub p: f64,
    pub alpha: f64,
    pub q: f64,
    pub beta: f64,
}

impl QueueParams {
    pub fn new(p: f64, alpha: f64, q: f64, beta: f64) -> Result<Self> {
        let params = Self { p, alpha, q, beta };
        params.validate()?;
        Ok(params)
    }

    /// Arrival parameters on the reversible curve for the given service and
    /// arrival intensity.
    pub fn from_intensity(q: f64, beta: f64, lambda: f64) -> Result<Self> {
        let (p, alpha) = solve_arrival(q, beta, lambda)?;
        Ok(Self { p, alpha, q, beta })
    }

    pub fn validate(&self) -> Result<()> {
        self.arrival().validate()?;
        self.service().validate()
    }

    pub fn arrival(&self) -> DistSpec {
        DistSpec::BerGeom {
            p: self.p,
            alpha: self.alpha,
        }
    }

    pub fn service(&self) -> DistSpec {
        DistSpec::BerGeom {
            p: self.q,
            alpha: self.beta,
        }
    }

    /// `lambda = p / alpha`.
    pub fn arrival_intensity(&self) -> f64 {
        self.p / self.alpha
    }

    /// `mu = q / beta`.
    pub fn service_intensity(&self) -> f64 {
        self.q / self.beta
    }

    pub fn is_stable(&self) -> bool {
        self.p * self.beta < self.q * self.alpha
    }
}

fn odds(x: f64) -> f64 {
    x / (1.0 - x)
}

/// Residual `[alpha/(1-alpha)][p/(1-p)] - [beta/(1-beta)][q/(1-q)]`.
pub fn check_condition(params: &QueueParams) -> f64 {
    odds(params.alpha) * odds(params.p) - odds(params.beta) * odds(params.q)
}

/// Whether the reversibility condition holds up to [`CONDITION_TOL`],
/// relative to the size of the two sides and scaled by the sensitivity
/// `1/(1-x)` of the odds near 1.
pub fn condition_holds(params: &QueueParams) -> bool {
    let lhs = odds(params.alpha) * odds(params.p);
    let QueueParams { p, alpha, q, beta } = *params;
    let sensitivity = [p, alpha, q, beta].iter().map(|x| 1.0 / (1.0 - x)).fold(1.0, f64::max);
    check_condition(params).abs() <= CONDITION_TOL * lhs.max(1.0) * sensitivity
}

/// Residual of the continuous-workload condition for Ber(p)Exp(a) arrivals
/// and Ber(q)Exp(b) services: `a p/(1-p) - b q/(1-q)`.
pub fn check_continuous_condition(p: f64, a_rate: f64, q: f64, b_rate: f64) -> f64 {
    a_rate * odds(p) - b_rate * odds(q)
}

/// The unique `(p, alpha)` with `p / alpha = lambda` on the reversible curve
/// of the service `(q, beta)`.
///
/// Solves `lambda (1-beta-q) alpha^2 + beta q (1+lambda) alpha - beta q = 0`
/// for the root in `(beta, 1)`.
pub fn solve_arrival(q: f64, beta: f64, lambda: f64) -> Result<(f64, f64)> {
    DistSpec::BerGeom { p: q, alpha: beta }.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("arrival intensity lambda = {lambda} must be positive")));
    }
    let mu = q / beta;
    if lambda >= mu {
        return Err(Error::UnstableIntensity { lambda, mu });
    }
    let a2 = lambda * (1.0 - beta - q);
    let a1 = beta * q * (1.0 + lambda);
    let a0 = -beta * q;
    let disc = a1 * a1 - 4.0 * a2 * a0;
    // a1 > 0, so this form avoids cancellation and covers a2 = 0
    let root_small = -2.0 * a0 / (a1 + disc.sqrt());
    let mut candidates = vec![root_small];
    if a2 != 0.0 {
        candidates.push(-(a1 + disc.sqrt()) / (2.0 * a2));
    }
    let alpha = candidates
        .into_iter()
        .find(|&a| a > beta && a < 1.0)
        .ok_or_else(|| Error::Domain(format!("no arrival parameter in (beta, 1) for lambda = {lambda}")))?;
    Ok((lambda * alpha, alpha))
}

/// Stationary queue-length law `Ber(c)Geom(gamma)` and the Bernoulli
/// parameter of the after-arrival law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryLaw {
    pub c: f64,
    pub gamma: f64,
    pub y_bernoulli: f64,
}

impl StationaryLaw {
    /// Evaluates the formulas without checking the reversibility condition.
    pub fn from_formula(params: &QueueParams) -> Self {
        let QueueParams { p, alpha, beta, .. } = *params;
        let c = odds(beta) * (1.0 - alpha) / alpha;
        let gamma = (alpha - beta) / (1.0 - beta);
        Self {
            c,
            gamma,
            y_bernoulli: p + c - p * c,
        }
    }

    /// `E X = c / gamma = beta(1-alpha) / (alpha(alpha-beta))`.
    pub fn mean_x(&self) -> f64 {
        self.c / self.gamma
    }

    pub fn x_law(&self) -> DistSpec {
        DistSpec::BerGeom {
            p: self.c,
            alpha: self.gamma,
        }
    }

    pub fn y_law(&self) -> DistSpec {
        DistSpec::BerGeom {
            p: self.y_bernoulli,
            alpha: self.gamma,
        }
    }

    /// Stationary probability of `X = k`.
    pub fn pmf_x(&self, k: u64) -> f64 {
        if k == 0 {
            1.0 - self.c
        } else {
            self.c * self.gamma * (1.0 - self.gamma).powi((k - 1) as i32)
        }
    }
}

/// Stationary law; requires stability and the reversibility condition.
pub fn stationary_law(params: &QueueParams) -> Result<StationaryLaw> {
    params.validate()?;
    if !params.is_stable() {
        return Err(Error::Unstable {
            arrival: params.arrival_intensity(),
            service: params.service_intensity(),
        });
    }
    if !condition_holds(params) {
        return Err(Error::ConditionViolated {
            residual: check_condition(params),
        });
    }
    Ok(StationaryLaw::from_formula(params))
}

/// Largest absolute violation of the detailed-balance identity
///
/// ```text
/// pi(k) P(Y=m | X=k) P(X'=r | Y=m) = pi(r) P(Y=m | X=r) P(X'=k | Y=m)
/// ```
///
/// over `0 <= k, r <= m <= k_max`, with `pi` the Ber(c)Geom(gamma) law from
/// the formulas (evaluated even when the condition fails).
pub fn verify_detailed_balance(params: &QueueParams, k_max: u64) -> f64 {
    let law = StationaryLaw::from_formula(params);
    let arrival = params.arrival();
    let service = params.service();
    let pa = |j: u64| arrival.pmf(j).expect("discrete");
    let pi: Vec<f64> = (0..=k_max).map(|k| law.pmf_x(k)).collect();
    let leave = |m: u64, r: u64| {
        if r == 0 {
            service.tail_ge(m).expect("discrete")
        } else {
            service.pmf(m - r).expect("discrete")
        }
    };
    let mut worst: f64 = 0.0;
    for m in 0..=k_max {
        for k in 0..=m {
            for r in 0..=m {
                let lhs = pi[k as usize] * pa(m - k) * leave(m, r);
                let rhs = pi[r as usize] * pa(m - r) * leave(m, k);
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst
}

fn validate_excursion(a: &[u64], d: &[u64]) -> Result<()> {
    if a.is_empty() || a.len() != d.len() {
        return Err(Error::InvalidExcursion(format!(
            "need two nonempty sequences of equal length, got {} and {}",
            a.len(),
            d.len()
        )));
    }
    let n = a.len();
    let (mut sa, mut sd) = (0u64, 0u64);
    for m in 0..n {
        sa += a[m];
        sd += d[m];
        if m + 1 < n && sa <= sd {
            return Err(Error::InvalidExcursion(format!("queue empties before the end (slot {})", m + 1)));
        }
    }
    if sa != sd {
        return Err(Error::InvalidExcursion(format!("arrivals {sa} and departures {sd} differ")));
    }
    if a[0] == 0 || d[n - 1] == 0 {
        return Err(Error::InvalidExcursion("excursion must start with an arrival and end with a departure".into()));
    }
    Ok(())
}

/// Log-likelihood of a busy period with arrivals `a_1..a_n` and departures
/// `d_1..d_n`, started from an empty queue:
///
/// ```text
/// log P(A = a, S_1..S_{n-1} = d_1..d_{n-1}, S_n >= d_n | X_0 = 0)
/// ```
///
/// computed as the exact product of pmf and tail terms.
pub fn excursion_loglik(params: &QueueParams, a: &[u64], d: &[u64]) -> Result<f64> {
    params.validate()?;
    validate_excursion(a, d)?;
    let arrival = params.arrival();
    let service = params.service();
    let n = a.len();
    let mut ll = 0.0;
    for &ai in a {
        ll += arrival.pmf(ai)?.ln();
    }
    for &di in &d[..n - 1] {
        ll += service.pmf(di)?.ln();
    }
    ll += service.tail_ge(d[n - 1])?.ln();
    Ok(ll)
}

/// The product form with zero-count correction factors,
///
/// ```text
/// p^n a^n (1-a)^{sum a} ((1-p)/p (1-a)/a)^{#a_i=0}
///   q^n b^{n-1} (1-b)^{sum d} ((1-q)/q (1-b)/b)^{#d_i=0}
/// ```
///
/// This equals the exact likelihood times `(1-alpha)^n (1-beta)^n`, a
/// factor that depends on `n` only and so cancels under reversal.
pub fn excursion_loglik_closed_form(params: &QueueParams, a: &[u64], d: &[u64]) -> Result<f64> {
    params.validate()?;
    validate_excursion(a, d)?;
    let QueueParams { p, alpha, q, beta } = *params;
    let n = a.len() as f64;
    let sum_a: u64 = a.iter().sum();
    let sum_d: u64 = d.iter().sum();
    let za = a.iter().filter(|&&v| v == 0).count() as f64;
    let zd = d.iter().filter(|&&v| v == 0).count() as f64;
    Ok(n * (p * alpha).ln()
        + sum_a as f64 * (1.0 - alpha).ln()
        + za * (odds(p).recip() * odds(alpha).recip()).ln()
        + n * q.ln()
        + (n - 1.0) * beta.ln()
        + sum_d as f64 * (1.0 - beta).ln()
        + zd * (odds(q).recip() * odds(beta).recip()).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    const THIRD: f64 = 1.0 / 3.0;

    fn base() -> QueueParams {
        QueueParams::new(THIRD, 2.0 * THIRD, 0.5, 0.5).unwrap()
    }

    #[test]
    fn condition_examples() {
        assert!(check_condition(&base()).abs() < 1e-12);
        for (a, b) in [(0.3, 0.1), (0.7, 0.4), (0.55, 0.5)] {
            let geom0 = QueueParams::new(1.0 - a, a, 1.0 - b, b).unwrap();
            assert!(check_condition(&geom0).abs() < 1e-12);
        }
        let bad = QueueParams::new(0.2, 0.9, 0.5, 0.5).unwrap();
        assert!(check_condition(&bad).abs() > 0.1);
        assert!(!condition_holds(&bad));
    }

    #[test]
    fn continuous_condition_examples() {
        assert!(check_continuous_condition(THIRD, 1.0, 0.5, 0.5).abs() < 1e-15);
        assert_eq!(check_continuous_condition(0.3, 2.0, 0.3, 2.0), 0.0);
        assert!(check_continuous_condition(0.2, 1.0, 0.5, 1.0).abs() > 0.5);
    }

    #[test]
    fn solve_arrival_examples() {
        let (p, a) = solve_arrival(0.5, 0.5, 0.5).unwrap();
        assert!((p - THIRD).abs() < 1e-12 && (a - 2.0 * THIRD).abs() < 1e-12);
        let (p, a) = solve_arrival(0.6, 0.3, 1.0).unwrap();
        let expect = 3.0 / (3.0 + 14f64.sqrt());
        assert!((p - expect).abs() < 1e-12 && (a - expect).abs() < 1e-12);
        assert!(matches!(solve_arrival(0.5, 0.5, 1.0), Err(Error::UnstableIntensity { .. })));
        assert!(matches!(solve_arrival(0.5, 0.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(solve_arrival(0.5, 0.5, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn solve_arrival_satisfies_both_intensity_forms() {
        for &(q, beta) in &[(0.5, 0.5), (0.3, 0.2), (0.8, 0.6), (0.9, 0.05), (0.1, 0.7)] {
            let mu: f64 = q / beta;
            for i in 1..40 {
                let lambda = mu * i as f64 / 40.0;
                let (p, alpha) = solve_arrival(q, beta, lambda).unwrap();
                let params = QueueParams { p, alpha, q, beta };
                assert!(condition_holds(&params), "q={q} b={beta} l={lambda}");
                assert!(alpha > beta && alpha < 1.0 && p < q);
                assert!((p / alpha - lambda).abs() <= 1e-10 * lambda.max(1.0));
                let form1 = p * (odds(p) * (1.0 - q) / q * (1.0 - beta) / beta + 1.0);
                let form2 = (1.0 - alpha) * beta * q / (alpha * alpha * (1.0 - beta - q) + alpha * beta * q);
                assert!((form1 - lambda).abs() <= 1e-10 * lambda.max(1.0));
                assert!((form2 - lambda).abs() <= 1e-10 * lambda.max(1.0));
            }
        }
    }

    #[test]
    fn stationary_law_example() {
        let law = stationary_law(&base()).unwrap();
        assert!((law.c - 0.5).abs() < 1e-12);
        assert!((law.gamma - THIRD).abs() < 1e-12);
        assert!((law.y_bernoulli - 2.0 * THIRD).abs() < 1e-12);
        assert!((law.mean_x() - 1.5).abs() < 1e-12);
        let params = base();
        let closed = params.beta * (1.0 - params.alpha) / (params.alpha * (params.alpha - params.beta));
        assert!((law.mean_x() - closed).abs() < 1e-12);
    }

    #[test]
    fn stationary_law_errors() {
        let bad = QueueParams::new(0.2, 0.9, 0.5, 0.5).unwrap();
        assert!(matches!(stationary_law(&bad), Err(Error::ConditionViolated { .. })));
        let unstable = QueueParams::new(0.6, 0.4, 0.4, 0.6).unwrap();
        assert!(matches!(stationary_law(&unstable), Err(Error::Unstable { .. })));
    }

    #[test]
    fn bernoulli_limit_of_c() {
        let (p, q) = (0.3, 0.6);
        let eps = 1e-9;
        let (pp, alpha) = solve_arrival(q, 1.0 - eps, p).unwrap();
        let law = stationary_law(&QueueParams::new(pp, alpha, q, 1.0 - eps).unwrap()).unwrap();
        let limit = p * (1.0 - q) / (q * (1.0 - p));
        assert!((law.c - limit).abs() < 1e-6, "{} vs {limit}", law.c);
        let oracle = crate::queue::markov_oracle(&DistSpec::Bernoulli { p }, &DistSpec::Bernoulli { p: q }, 200).unwrap();
        assert!((1.0 - oracle.pmf[0] - limit).abs() < 1e-10);
    }

    #[test]
    fn detailed_balance_holds_on_the_curve() {
        assert!(verify_detailed_balance(&base(), 30) <= 1e-12);
        for &(q, beta, lambda) in &[(0.6, 0.3, 1.0), (0.3, 0.2, 0.9), (0.9, 0.5, 1.2)] {
            let params = QueueParams::from_intensity(q, beta, lambda).unwrap();
            assert!(verify_detailed_balance(&params, 30) <= 1e-12);
        }
    }

    #[test]
    fn detailed_balance_fails_off_the_curve() {
        let bad = QueueParams::new(0.2, 0.9, 0.5, 0.5).unwrap();
        assert!(verify_detailed_balance(&bad, 30) > 1e-6);
    }

    #[test]
    fn detailed_balance_diagonal_terms_vanish() {
        // k = r contributes an exact zero, so a zero-size box has zero residual
        let bad = QueueParams::new(0.2, 0.9, 0.5, 0.5).unwrap();
        assert_eq!(verify_detailed_balance(&bad, 0), 0.0);
    }

    #[test]
    fn excursion_single_slot_is_symmetric() {
        let ll = excursion_loglik(&base(), &[2], &[2]).unwrap();
        assert!(ll.is_finite());
    }

    #[test]
    fn excursion_reversal_tracks_condition() {
        let fwd = (vec![2u64, 0], vec![1u64, 1]);
        let rev = (vec![1u64, 1], vec![0u64, 2]);
        let good = base();
        let a = excursion_loglik(&good, &fwd.0, &fwd.1).unwrap();
        let b = excursion_loglik(&good, &rev.0, &rev.1).unwrap();
        assert!((a - b).abs() < 1e-12);
        let bad = QueueParams::new(0.2, 0.9, 0.5, 0.5).unwrap();
        let a = excursion_loglik(&bad, &fwd.0, &fwd.1).unwrap();
        let b = excursion_loglik(&bad, &rev.0, &rev.1).unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn geometric_case_matches_closed_likelihood() {
        // Geom0 pair: p = 1 - alpha, q = 1 - beta, and any (alpha, beta)
        let (alpha, beta) = (0.4, 0.7);
        let params = QueueParams::new(1.0 - alpha, alpha, 1.0 - beta, beta).unwrap();
        let a = [3u64, 0, 2, 1];
        let d = [1u64, 1, 0, 4];
        let n = a.len() as f64;
        let expected = n * alpha.ln()
            + a.iter().sum::<u64>() as f64 * (1.0 - alpha).ln()
            + (n - 1.0) * beta.ln()
            + d.iter().sum::<u64>() as f64 * (1.0 - beta).ln();
        let ll = excursion_loglik(&params, &a, &d).unwrap();
        assert!((ll - expected).abs() < 1e-12);
        let ra: Vec<u64> = d.iter().rev().copied().collect();
        let rd: Vec<u64> = a.iter().rev().copied().collect();
        assert!((excursion_loglik(&params, &ra, &rd).unwrap() - ll).abs() < 1e-12);
    }

    #[test]
    fn closed_form_differs_by_a_length_factor() {
        let params = QueueParams::new(0.2, 0.9, 0.5, 0.5).unwrap();
        let a = [3u64, 0, 2, 1];
        let d = [1u64, 1, 0, 4];
        let exact = excursion_loglik(&params, &a, &d).unwrap();
        let closed = excursion_loglik_closed_form(&params, &a, &d).unwrap();
        let n = a.len() as f64;
        let shift = n * (1.0 - params.alpha).ln() + n * (1.0 - params.beta).ln();
        assert!((closed - exact - shift).abs() < 1e-12);
    }

    #[test]
    fn invalid_excursions_rejected() {
        let p = base();
        assert!(matches!(excursion_loglik(&p, &[0, 2], &[1, 1]), Err(Error::InvalidExcursion(_))));
        assert!(excursion_loglik(&p, &[2, 0], &[1, 0]).is_err());
        assert!(excursion_loglik(&p, &[1, 1], &[1, 1]).is_err());
        assert!(excursion_loglik(&p, &[2], &[2, 0]).is_err());
        assert!(excursion_loglik(&p, &[], &[]).is_err());
    }
}
