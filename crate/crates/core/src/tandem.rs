//! Queues in series.
//!
//! Stage `r` receives the departures of stage `r - 1` in the same slot:
//! `A^(r)_n = D^(r-1)_n`. Randomness is drawn slot by slot in the order
//! `A, S^(1), ..., S^(R)`, so a one-stage tandem reproduces
//! [`queue::simulate`](crate::queue::simulate) draw for draw.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistSpec, Draw};
use crate::error::{Error, Result};
use crate::format::CsvField;
use crate::queue::{burn_in, condition_holds, stationary_law, QueueParams, Trace};
use crate::rng::RandomStream;
use crate::scalar::Amount;
use crate::stats::{chi_square_gof, decorrelation_lag, independence_chi2, EmpiricalPmf, TestResult};

/// Minimum number of post-burn-in slots accepted by [`verify_product_form`].
pub const MIN_STATIONARY_SLOTS: usize = 100_000;
/// Queue-length cells at or above this value are pooled in independence tests.
pub const INDEPENDENCE_CUTOFF: u64 = 8;
const GOF_CUTOFF: u64 = 64;
const THIN_THRESHOLD: f64 = 0.01;
const MAX_THIN: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemConfig {
    pub arrival: DistSpec,
    pub services: Vec<DistSpec>,
}

impl TandemConfig {
    /// Checks every distribution and stability at every stage. Equal means
    /// are accepted only when both sides are deterministic.
    pub fn new(arrival: DistSpec, services: Vec<DistSpec>) -> Result<Self> {
        if services.is_empty() {
            return Err(Error::InvalidParameter("a tandem needs at least one stage".into()));
        }
        arrival.validate()?;
        for s in &services {
            s.validate()?;
            let (ma, ms) = (arrival.mean(), s.mean());
            let degenerate = arrival.variance() == 0.0 && s.variance() == 0.0;
            if ma > ms || (ma == ms && !degenerate) {
                return Err(Error::Unstable { arrival: ma, service: ms });
            }
        }
        Ok(Self { arrival, services })
    }

    pub fn stages(&self) -> usize {
        self.services.len()
    }

    /// Per-stage parameters when every law is Ber-Geom and each service
    /// lies on the reversible curve of the arrival law.
    pub fn reversible_params(&self) -> Result<Vec<QueueParams>> {
        let DistSpec::BerGeom { p, alpha } = self.arrival else {
            return Err(Error::InvalidParameter(format!("arrival law {} is not Ber-Geom", self.arrival)));
        };
        self.services
            .iter()
            .map(|s| match *s {
                DistSpec::BerGeom { p: q, alpha: beta } => {
                    let params = QueueParams::new(p, alpha, q, beta)?;
                    if condition_holds(&params) {
                        Ok(params)
                    } else {
                        Err(Error::ConditionViolated {
                            residual: crate::queue::check_condition(&params),
                        })
                    }
                }
                other => Err(Error::InvalidParameter(format!("service law {other} is not Ber-Geom"))),
            })
            .collect()
    }
}

/// Aligned traces of all stages, each started empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TandemTrace<T> {
    pub stages: Vec<Trace<T>>,
    pub config: Option<TandemConfig>,
}

impl<T: Amount> TandemTrace<T> {
    /// Runs the tandem from empty queues on explicit sequences.
    pub fn from_sequences(arrivals: Vec<T>, services: Vec<Vec<T>>) -> Result<Self> {
        if services.is_empty() {
            return Err(Error::InvalidParameter("a tandem needs at least one stage".into()));
        }
        let mut stages: Vec<Trace<T>> = Vec::with_capacity(services.len());
        let mut input = arrivals;
        for s in services {
            let trace = Trace::from_sequences(input, s, T::zero())?;
            input = trace.departure_seq();
            stages.push(trace);
        }
        Ok(Self { stages, config: None })
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn len(&self) -> usize {
        self.stages[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages[0].is_empty()
    }

    /// `X^(r)_n` with stages numbered from zero.
    #[inline]
    pub fn x(&self, r: usize, n: usize) -> T {
        self.stages[r].x(n)
    }

    #[inline]
    pub fn y(&self, r: usize, n: usize) -> T {
        self.stages[r].y(n)
    }

    #[inline]
    pub fn departures(&self, r: usize, n: usize) -> T {
        self.stages[r].departures(n)
    }

    /// `sum_r X^(r)_n`.
    pub fn total_x(&self, n: usize) -> T {
        self.stages.iter().fold(T::zero(), |acc, s| acc + s.x(n))
    }

    /// Checks `A^(r+1)_n = D^(r)_n` at every slot.
    pub fn check_feed_forward(&self) -> Result<()> {
        for r in 1..self.n_stages() {
            for n in 0..self.len() {
                let d = self.departures(r - 1, n);
                let a = self.stages[r].arrivals[n];
                if d != a {
                    return Err(Error::Domain(format!("feed-forward broken at stage {r}, slot {n}: {d} vs {a}")));
                }
            }
        }
        Ok(())
    }

    /// CSV with header `n,X1..XR,D1..DR`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()>
    where
        T: CsvField,
    {
        let r = self.n_stages();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string()];
        header.extend((1..=r).map(|i| format!("X{i}")));
        header.extend((1..=r).map(|i| format!("D{i}")));
        w.write_record(&header)?;
        for n in 0..self.len() {
            let mut row = vec![n.to_string()];
            row.extend((0..r).map(|i| self.x(i, n).csv_field()));
            row.extend((0..r).map(|i| self.departures(i, n).csv_field()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn simulate_tandem<T: Draw>(config: &TandemConfig, n_slots: usize, rng: &mut RandomStream) -> Result<TandemTrace<T>> {
    if n_slots == 0 {
        return Err(Error::InvalidParameter("n_slots must be at least 1".into()));
    }
    let r = config.stages();
    let mut arrivals = Vec::with_capacity(n_slots);
    let mut services: Vec<Vec<T>> = (0..r).map(|_| Vec::with_capacity(n_slots)).collect();
    for _ in 0..n_slots {
        arrivals.push(T::draw(&config.arrival, rng)?);
        for (seq, spec) in services.iter_mut().zip(&config.services) {
            seq.push(T::draw(spec, rng)?);
        }
    }
    let mut trace = TandemTrace::from_sequences(arrivals, services)?;
    for (stage, spec) in trace.stages.iter_mut().zip(&config.services) {
        stage.seed = Some(rng.seed());
        stage.service = Some(*spec);
    }
    trace.stages[0].arrival = Some(config.arrival);
    trace.config = Some(config.clone());
    Ok(trace)
}

/// Product-form checks on the stationary part of a Ber-Geom tandem.
///
/// Returns, in order: the departure marginal of every stage against the
/// arrival law; the `X^(r)_n` marginal of every stage; pairwise
/// independence of `X^(r)_n, X^(s)_n`; the `Y^(r)_{n-r}` marginals and
/// their pairwise independence (stages counted from zero). Queue-length
/// samples are thinned to the first lag whose autocorrelation is below
/// `0.01`. Each result is judged at `level`.
pub fn verify_product_form(trace: &TandemTrace<u64>, level: f64) -> Result<Vec<TestResult>> {
    let config = trace
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("trace carries no tandem configuration".into()))?;
    let params = config.reversible_params()?;
    let min_service = config.services.iter().map(DistSpec::mean).fold(f64::INFINITY, f64::min);
    let burn = burn_in(config.arrival.mean(), min_service);
    let r = trace.n_stages();
    let start = burn + r;
    if trace.len() < start + MIN_STATIONARY_SLOTS {
        return Err(Error::InsufficientData(format!(
            "{} slots leave fewer than {MIN_STATIONARY_SLOTS} after a burn-in of {burn}",
            trace.len()
        )));
    }
    let n_end = trace.len();
    let laws: Vec<_> = params.iter().map(stationary_law).collect::<Result<_>>()?;
    let mut out = Vec::new();

    for s in 0..r {
        let d: Vec<u64> = (start..n_end).map(|n| trace.departures(s, n)).collect();
        let emp = EmpiricalPmf::from_values(&d, GOF_CUTOFF);
        let res = chi_square_gof(&emp, |k| config.arrival.pmf(k).unwrap_or(0.0), level)?;
        out.push(res.with_name(format!("departures_{}_marginal", s + 1)));
    }

    let x0: Vec<f64> = (start..n_end).map(|n| trace.x(0, n) as f64).collect();
    let stride = decorrelation_lag(&x0, THIN_THRESHOLD, MAX_THIN)?;
    let times: Vec<usize> = (start..n_end).step_by(stride).collect();

    for (s, law) in laws.iter().enumerate() {
        let xs: Vec<u64> = times.iter().map(|&n| trace.x(s, n)).collect();
        let emp = EmpiricalPmf::from_values(&xs, GOF_CUTOFF);
        let res = chi_square_gof(&emp, |k| law.pmf_x(k), level)?;
        out.push(res.with_name(format!("x_{}_marginal", s + 1)));
    }
    for a in 0..r {
        for b in a + 1..r {
            let pairs: Vec<(u64, u64)> = times.iter().map(|&n| (trace.x(a, n), trace.x(b, n))).collect();
            let res = independence_chi2(&pairs, (INDEPENDENCE_CUTOFF, INDEPENDENCE_CUTOFF), level)?;
            out.push(res.with_name(format!("x_{}_x_{}_independence", a + 1, b + 1)));
        }
    }

    let staggered = |s: usize, n: usize| trace.y(s, n - s);
    for (s, law) in laws.iter().enumerate() {
        let ys: Vec<u64> = times.iter().map(|&n| staggered(s, n)).collect();
        let emp = EmpiricalPmf::from_values(&ys, GOF_CUTOFF);
        let y_law = law.y_law();
        let res = chi_square_gof(&emp, |k| y_law.pmf(k).unwrap_or(0.0), level)?;
        out.push(res.with_name(format!("y_{}_staggered_marginal", s + 1)));
    }
    for a in 0..r {
        for b in a + 1..r {
            let pairs: Vec<(u64, u64)> = times.iter().map(|&n| (staggered(a, n), staggered(b, n))).collect();
            let res = independence_chi2(&pairs, (INDEPENDENCE_CUTOFF, INDEPENDENCE_CUTOFF), level)?;
            out.push(res.with_name(format!("y_{}_y_{}_staggered_independence", a + 1, b + 1)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::simulate;
    use crate::stats::bonferroni;
    use proptest::prelude::*;

    fn reversible(r: usize) -> TandemConfig {
        TandemConfig::new(
            DistSpec::BerGeom { p: 1.0 / 3.0, alpha: 2.0 / 3.0 },
            vec![DistSpec::BerGeom { p: 0.5, alpha: 0.5 }; r],
        )
        .unwrap()
    }

    #[test]
    fn one_stage_equals_single_queue() {
        let cfg = reversible(1);
        let t: TandemTrace<u64> = simulate_tandem(&cfg, 5000, &mut RandomStream::new(3)).unwrap();
        let q: Trace<u64> = simulate(&cfg.arrival, &cfg.services[0], 5000, 0, &mut RandomStream::new(3)).unwrap();
        assert_eq!(t.stages[0].queue, q.queue);
        assert_eq!(t.stages[0].services, q.services);
    }

    #[test]
    fn deterministic_tandem_stays_empty() {
        let det = DistSpec::Deterministic { value: 1.0 };
        let cfg = TandemConfig::new(det, vec![det; 3]).unwrap();
        let t: TandemTrace<u64> = simulate_tandem(&cfg, 100, &mut RandomStream::new(0)).unwrap();
        assert!((0..=100).all(|n| (0..3).all(|r| t.stages[r].queue[n] == 0)));
    }

    #[test]
    fn unstable_stage_rejected() {
        let r = TandemConfig::new(
            DistSpec::BerGeom { p: 0.5, alpha: 0.5 },
            vec![DistSpec::BerGeom { p: 0.5, alpha: 0.5 }],
        );
        assert!(matches!(r, Err(Error::Unstable { .. })));
        assert!(TandemConfig::new(DistSpec::Bernoulli { p: 0.5 }, vec![]).is_err());
    }

    #[test]
    fn reversible_family_detected() {
        assert_eq!(reversible(3).reversible_params().unwrap().len(), 3);
        let off = TandemConfig::new(
            DistSpec::BerGeom { p: 0.2, alpha: 0.9 },
            vec![DistSpec::BerGeom { p: 0.5, alpha: 0.5 }],
        )
        .unwrap();
        assert!(matches!(off.reversible_params(), Err(Error::ConditionViolated { .. })));
    }

    #[test]
    fn csv_layout() {
        let t = TandemTrace::from_sequences(vec![2u64, 0], vec![vec![1, 1], vec![0, 2]]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,X1,X2,D1,D2\n0,0,0,1,0\n1,1,1,1,2\n");
    }

    #[test]
    fn short_trace_rejected() {
        let cfg = reversible(2);
        let t: TandemTrace<u64> = simulate_tandem(&cfg, 20_000, &mut RandomStream::new(1)).unwrap();
        assert!(matches!(verify_product_form(&t, 0.01), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn product_form_two_stages() {
        let cfg = reversible(2);
        let t: TandemTrace<u64> = simulate_tandem(&cfg, 400_000, &mut RandomStream::new(11)).unwrap();
        let results = verify_product_form(&t, 0.01).unwrap();
        assert_eq!(results.len(), 2 + 2 + 1 + 2 + 1);
        let level = bonferroni(0.01, results.len());
        for r in &results {
            assert!(r.p_value >= level, "{r:?}");
        }
    }

    #[test]
    fn heterogeneous_services_on_the_curve() {
        let (q2, beta2) = (0.6, 0.3);
        let (p, alpha) = crate::queue::solve_arrival(q2, beta2, 0.5).unwrap();
        // a second service on the same curve
        let lhs = alpha / (1.0 - alpha) * p / (1.0 - p);
        let q1 = 0.8;
        let o = lhs / (q1 / (1.0 - q1));
        let beta1 = o / (1.0 + o);
        let cfg = TandemConfig::new(
            DistSpec::BerGeom { p, alpha },
            vec![DistSpec::BerGeom { p: q1, alpha: beta1 }, DistSpec::BerGeom { p: q2, alpha: beta2 }],
        )
        .unwrap();
        assert_eq!(cfg.reversible_params().unwrap().len(), 2);
        let t: TandemTrace<u64> = simulate_tandem(&cfg, 400_000, &mut RandomStream::new(5)).unwrap();
        let results = verify_product_form(&t, 0.01).unwrap();
        let level = bonferroni(0.01, results.len());
        for r in results.iter().filter(|r| r.name.contains("marginal")) {
            assert!(r.p_value >= level, "{r:?}");
        }
    }

    proptest! {
        #[test]
        fn feed_forward_conserves(
            seq in prop::collection::vec((0u64..5, 0u64..4, 0u64..4, 0u64..4), 1..80),
            lo in 0usize..40,
            len in 0usize..40,
        ) {
            let arrivals: Vec<u64> = seq.iter().map(|t| t.0).collect();
            let services = vec![
                seq.iter().map(|t| t.1).collect(),
                seq.iter().map(|t| t.2).collect(),
                seq.iter().map(|t| t.3).collect::<Vec<u64>>(),
            ];
            let t = TandemTrace::from_sequences(arrivals, services).unwrap();
            t.check_feed_forward().unwrap();
            let n = t.len();
            let (lo, hi) = (lo.min(n), (lo + len).min(n));
            for r in 0..2 {
                let out: u64 = (lo..hi).map(|k| t.departures(r, k)).sum();
                let inn: u64 = t.stages[r + 1].arrivals[lo..hi].iter().sum();
                prop_assert_eq!(out, inn);
            }
        }
    }
}
