//! Single batch queue in discrete time.
//!
//! Slot `n` starts with `X_n` customers; a batch `A_n` arrives, giving
//! `Y_n = X_n + A_n`; then `S_n` units of service are offered and
//! `D_n = min(Y_n, S_n)` depart, leaving `X_{n+1} = [X_n + A_n - S_n]_+`.
//! `U_n = S_n - D_n` is the unused service, `T_n = U_n + A_n` and
//! `I_n = U_n + A_{n+1}`.

mod oracle;
mod theory;

pub use oracle::{markov_oracle, OracleResult};
pub use theory::{
    check_condition, check_continuous_condition, condition_holds, excursion_loglik, excursion_loglik_closed_form,
    solve_arrival, stationary_law, verify_detailed_balance, QueueParams, StationaryLaw, CONDITION_TOL,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistSpec, Draw};
use crate::error::{Error, Result};
use crate::format::CsvField;
use crate::rng::RandomStream;
use crate::scalar::{max_of, min_of, Amount};

/// Result of one slot of the recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome<T> {
    pub x_next: T,
    pub departures: T,
    pub unused: T,
}

/// One slot: `(x, a, s) -> (max(x + a - s, 0), min(x + a, s), s - d)`.
pub fn step<T: Amount>(x: T, a: T, s: T) -> Result<StepOutcome<T>> {
    if x.is_negative() || a.is_negative() || s.is_negative() {
        return Err(Error::Domain(format!("step inputs must be nonnegative, got ({x}, {a}, {s})")));
    }
    let y = x + a;
    let d = min_of(y, s);
    Ok(StepOutcome {
        x_next: y - d,
        departures: d,
        unused: s - d,
    })
}

/// Per-slot tuple `(A, S, X, Y, D, U, I, T)`; `I` is absent in the last
/// slot of a finite trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord<T> {
    pub a: T,
    pub s: T,
    pub x: T,
    pub y: T,
    pub d: T,
    pub u: T,
    pub i: Option<T>,
    pub t: T,
}

/// Sample path of one queue.
///
/// Stored as arrivals, services and the queue lengths `X_0..=X_n`; every
/// other quantity is derived on access.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub arrivals: Vec<T>,
    pub services: Vec<T>,
    /// `n_slots + 1` entries; the last one is the length after the final slot.
    pub queue: Vec<T>,
    pub seed: Option<u64>,
    pub arrival: Option<DistSpec>,
    pub service: Option<DistSpec>,
}

impl<T: Amount> Trace<T> {
    /// Runs the recurrence on given arrival and service sequences.
    pub fn from_sequences(arrivals: Vec<T>, services: Vec<T>, init_x: T) -> Result<Self> {
        if arrivals.len() != services.len() {
            return Err(Error::LengthMismatch(arrivals.len(), services.len()));
        }
        let mut queue = Vec::with_capacity(arrivals.len() + 1);
        let mut x = init_x;
        if x.is_negative() {
            return Err(Error::Domain(format!("initial queue length {x} is negative")));
        }
        queue.push(x);
        for (&a, &s) in arrivals.iter().zip(&services) {
            x = step(x, a, s)?.x_next;
            queue.push(x);
        }
        Ok(Self {
            arrivals,
            services,
            queue,
            seed: None,
            arrival: None,
            service: None,
        })
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    #[inline]
    pub fn x(&self, n: usize) -> T {
        self.queue[n]
    }

    #[inline]
    pub fn y(&self, n: usize) -> T {
        self.queue[n] + self.arrivals[n]
    }

    #[inline]
    pub fn departures(&self, n: usize) -> T {
        min_of(self.y(n), self.services[n])
    }

    #[inline]
    pub fn unused(&self, n: usize) -> T {
        self.services[n] - self.departures(n)
    }

    pub fn record(&self, n: usize) -> SlotRecord<T> {
        let y = self.y(n);
        let d = min_of(y, self.services[n]);
        let u = self.services[n] - d;
        SlotRecord {
            a: self.arrivals[n],
            s: self.services[n],
            x: self.queue[n],
            y,
            d,
            u,
            i: self.arrivals.get(n + 1).map(|&a| u + a),
            t: u + self.arrivals[n],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = SlotRecord<T>> + '_ {
        (0..self.len()).map(|n| self.record(n))
    }

    /// Departure sequence `D_0..D_{n-1}`.
    pub fn departure_seq(&self) -> Vec<T> {
        (0..self.len()).map(|n| self.departures(n)).collect()
    }

    /// Final queue length, after the last slot.
    pub fn final_x(&self) -> T {
        *self.queue.last().expect("queue vector is never empty")
    }

    /// Checks the slot identities on every record; `tol` is the allowed
    /// absolute slack (use zero for integer traces).
    pub fn check_identities(&self, tol: f64) -> Result<()> {
        let close = |a: T, b: T| (a.to_f64() - b.to_f64()).abs() <= tol;
        for n in 0..self.len() {
            let r = self.record(n);
            let next = self.queue[n + 1];
            let ok = close(r.y, r.x + r.a)
                && close(r.d, min_of(r.y, r.s))
                && close(r.d + r.u, r.s)
                && close(next, r.y - r.d)
                && close(next + r.d, r.x + r.a)
                && close(r.t, r.u + r.a)
                && close(next, max_of(r.x + r.a, r.s) - r.s)
                && r.i.map_or(true, |i| close(i, r.u + self.arrivals[n + 1]));
            if !ok {
                return Err(Error::Domain(format!("slot identities fail at n = {n}: {r:?}")));
            }
        }
        Ok(())
    }

    /// CSV with header `n,A,S,X,Y,D,U,I,T`; the missing final `I` is empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()>
    where
        T: CsvField,
    {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "A", "S", "X", "Y", "D", "U", "I", "T"])?;
        for (n, r) in self.records().enumerate() {
            w.write_record([
                n.to_string(),
                r.a.csv_field(),
                r.s.csv_field(),
                r.x.csv_field(),
                r.y.csv_field(),
                r.d.csv_field(),
                r.u.csv_field(),
                r.i.map(CsvField::csv_field).unwrap_or_default(),
                r.t.csv_field(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws arrivals and services slot by slot (arrival first, then service)
/// and runs the queue from `init_x`.
pub fn simulate<T: Draw>(
    arrival: &DistSpec,
    service: &DistSpec,
    n_slots: usize,
    init_x: T,
    rng: &mut RandomStream,
) -> Result<Trace<T>> {
    if n_slots == 0 {
        return Err(Error::InvalidParameter("n_slots must be at least 1".into()));
    }
    arrival.validate()?;
    service.validate()?;
    let mut arrivals = Vec::with_capacity(n_slots);
    let mut services = Vec::with_capacity(n_slots);
    for _ in 0..n_slots {
        arrivals.push(T::draw(arrival, rng)?);
        services.push(T::draw(service, rng)?);
    }
    let mut trace = Trace::from_sequences(arrivals, services, init_x)?;
    trace.seed = Some(rng.seed());
    trace.arrival = Some(*arrival);
    trace.service = Some(*service);
    Ok(trace)
}

/// `max_{m <= k <= n} sum_{r=k}^{n-1} (A_r - S_r)` over the given window,
/// the empty sum counting as zero. Equals the queue length after the
/// window when the queue starts empty.
pub fn path_max_x<T: Amount>(arrivals: &[T], services: &[T]) -> Result<T> {
    if arrivals.len() != services.len() {
        return Err(Error::LengthMismatch(arrivals.len(), services.len()));
    }
    let zero = T::zero();
    let (mut sum_a, mut sum_s) = (zero, zero);
    let mut best = zero;
    for (&a, &s) in arrivals.iter().zip(services).rev() {
        sum_a = sum_a + a;
        sum_s = sum_s + s;
        if sum_a > sum_s {
            best = max_of(best, sum_a - sum_s);
        }
    }
    Ok(best)
}

/// Slots discarded before collecting stationary statistics:
/// `max(10^4, 100 / (mu - lambda))`.
pub fn burn_in(arrival_mean: f64, service_mean: f64) -> usize {
    let gap = service_mean - arrival_mean;
    if gap <= 0.0 {
        return usize::MAX;
    }
    (100.0 / gap).ceil().max(10_000.0) as usize
}
