//! Directed first-passage percolation.
//!
//! A path from `(i, j)` to `(k, l)` visits one site in each column
//! `i..=k` with weakly increasing rows; its weight is the sum of the
//! site weights. With pinned endpoints the first site is `(i, j)` and the
//! last is `(k, l)`; with free endpoints the rows only have to stay in
//! `j..=l`.
//!
//! The continuous variant replaces columns by time: each row carries a
//! pure-jump process and a path switches rows at increasing times.

use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistSpec, Draw};
use crate::error::{Error, Result};
use crate::format::CsvField;
use crate::rng::RandomStream;
use crate::scalar::{min_of, Amount};
use crate::stats::{mean_ci, MeanCi};
use crate::tandem::{TandemConfig, TandemTrace};

/// Largest path count [`enumerate_first_passage`] accepts.
pub const MAX_ENUMERATED_PATHS: f64 = 1e6;

/// Site weights `S^r_n`, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField<T> {
    columns: usize,
    rows: usize,
    weights: Vec<T>,
}

impl<T: Amount> WeightField<T> {
    /// `weights` is column-major: `weights[col * rows + row]`.
    pub fn new(columns: usize, rows: usize, weights: Vec<T>) -> Result<Self> {
        if columns == 0 || rows == 0 {
            return Err(Error::InvalidParameter(format!("field dimensions {columns}x{rows} must be positive")));
        }
        if weights.len() != columns * rows {
            return Err(Error::LengthMismatch(weights.len(), columns * rows));
        }
        if let Some(w) = weights.iter().find(|w| w.is_negative()) {
            return Err(Error::InvalidParameter(format!("negative weight {w}")));
        }
        Ok(Self { columns, rows, weights })
    }

    pub fn from_fn(columns: usize, rows: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut weights = Vec::with_capacity(columns * rows);
        for c in 0..columns {
            for r in 0..rows {
                weights.push(f(c, r));
            }
        }
        Self::new(columns, rows, weights)
    }

    /// Builds a field from `W[col][row]`.
    pub fn from_columns(cols: &[Vec<T>]) -> Result<Self> {
        let rows = cols.first().map_or(0, Vec::len);
        if let Some(bad) = cols.iter().find(|c| c.len() != rows) {
            return Err(Error::LengthMismatch(bad.len(), rows));
        }
        Self::new(cols.len(), rows, cols.concat())
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> T {
        self.weights[col * self.rows + row]
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[T] {
        &self.weights[col * self.rows..(col + 1) * self.rows]
    }

    pub fn set(&mut self, col: usize, row: usize, w: T) -> Result<()> {
        if w.is_negative() {
            return Err(Error::InvalidParameter(format!("negative weight {w}")));
        }
        self.weights[col * self.rows + row] = w;
        Ok(())
    }

    /// CSV matrix with one line per row and one field per column, no header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()>
    where
        T: CsvField,
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for r in 0..self.rows {
            w.write_record((0..self.columns).map(|c| self.get(c, r).csv_field()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(input: R) -> Result<Self>
    where
        T: FromStr,
    {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
        let mut lines: Vec<Vec<T>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.parse::<T>().map_err(|_| Error::InvalidParameter(format!("bad weight {f:?}"))))
                .collect::<Result<Vec<T>>>()?;
            lines.push(row);
        }
        let rows = lines.len();
        let columns = lines.first().map_or(0, Vec::len);
        if let Some(bad) = lines.iter().find(|l| l.len() != columns) {
            return Err(Error::LengthMismatch(bad.len(), columns));
        }
        Self::from_fn(columns, rows, |c, r| lines[r][c])
    }
}

impl<T: Draw> WeightField<T> {
    /// I.i.d. weights drawn column by column, rows in order.
    pub fn sample(spec: &DistSpec, columns: usize, rows: usize, rng: &mut RandomStream) -> Result<Self> {
        spec.validate()?;
        let mut weights = Vec::with_capacity(columns * rows);
        for _ in 0..columns * rows {
            weights.push(T::draw(spec, rng)?);
        }
        Self::new(columns, rows, weights)
    }
}

/// Endpoints `(column, row)` of a first-passage query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathQuery {
    pub start: (usize, usize),
    pub end: (usize, usize),
    pub pinned: bool,
}

impl PathQuery {
    pub fn pinned(start: (usize, usize), end: (usize, usize)) -> Self {
        Self { start, end, pinned: true }
    }

    pub fn free(start: (usize, usize), end: (usize, usize)) -> Self {
        Self { start, end, pinned: false }
    }

    /// The whole field, corner to corner.
    pub fn corners<T>(field: &WeightField<T>, pinned: bool) -> Self {
        Self {
            start: (0, 0),
            end: (field.columns - 1, field.rows - 1),
            pinned,
        }
    }

    pub fn validate<T>(&self, field: &WeightField<T>) -> Result<()> {
        let ((i, j), (k, l)) = (self.start, self.end);
        if i > k || j > l {
            return Err(Error::InvalidParameter(format!("query {:?} -> {:?} is not directed", self.start, self.end)));
        }
        if k >= field.columns || l >= field.rows {
            return Err(Error::InvalidParameter(format!(
                "query end {:?} outside a {}x{} field",
                self.end, field.columns, field.rows
            )));
        }
        Ok(())
    }

    /// Number of admissible paths.
    pub fn path_count(&self) -> f64 {
        let cols = (self.end.0 - self.start.0 + 1) as u64;
        let span = (self.end.1 - self.start.1) as u64;
        if self.pinned {
            // interior rows r_2..r_{c-1} chosen freely in j..=l
            if cols == 1 {
                return if span == 0 { 1.0 } else { 0.0 };
            }
            binomial(span + cols - 2, cols - 2)
        } else {
            binomial(span + cols, cols)
        }
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Brute-force minimum over every admissible path.
pub fn enumerate_first_passage<T: Amount>(field: &WeightField<T>, query: &PathQuery) -> Result<T> {
    query.validate(field)?;
    let count = query.path_count();
    if count > MAX_ENUMERATED_PATHS {
        return Err(Error::TooManyPaths(count));
    }
    let ((i, j), (k, l)) = (query.start, query.end);
    if query.pinned && i == k && j != l {
        return Err(Error::InvalidParameter("a single-column path cannot change row".into()));
    }
    let mut best: Option<T> = None;
    let mut rows = Vec::with_capacity(k - i + 1);
    let first_rows = if query.pinned { j..=j } else { j..=l };
    for r in first_rows {
        rows.push(r);
        walk(field, query, i, &mut rows, field.get(i, r), &mut best);
        rows.pop();
    }
    Ok(best.expect("at least one path"))
}

fn walk<T: Amount>(
    field: &WeightField<T>,
    query: &PathQuery,
    col: usize,
    rows: &mut Vec<usize>,
    acc: T,
    best: &mut Option<T>,
) {
    let (k, l) = query.end;
    let cur = *rows.last().unwrap();
    if col == k {
        if !query.pinned || cur == l {
            *best = Some(best.map_or(acc, |b| min_of(b, acc)));
        }
        return;
    }
    for r in cur..=l {
        rows.push(r);
        walk(field, query, col + 1, rows, acc + field.get(col + 1, r), best);
        rows.pop();
    }
}

/// Column sweep: `cost` holds the best weight of a path ending in each
/// row of the current column; `None` means unreachable.
struct Sweep<T> {
    cost: Vec<Option<T>>,
}

impl<T: Amount> Sweep<T> {
    fn start(first: &[T], pinned: bool) -> Self {
        let cost = first
            .iter()
            .enumerate()
            .map(|(r, &w)| (!pinned || r == 0).then_some(w))
            .collect();
        Self { cost }
    }

    fn advance(&mut self, column: &[T]) {
        let mut best: Option<T> = None;
        for (c, &w) in self.cost.iter_mut().zip(column) {
            best = match (best, *c) {
                (Some(b), Some(v)) => Some(min_of(b, v)),
                (b, v) => b.or(v),
            };
            *c = best.map(|b| b + w);
        }
    }

    fn finish(&self, pinned: bool) -> Option<T> {
        if pinned {
            *self.cost.last().unwrap()
        } else {
            self.cost.iter().flatten().copied().reduce(min_of)
        }
    }
}

/// Minimum path weight by dynamic programming, `O(columns * rows)`.
pub fn first_passage<T: Amount>(field: &WeightField<T>, query: &PathQuery) -> Result<T> {
    query.validate(field)?;
    let ((i, j), (k, l)) = (query.start, query.end);
    let mut sweep = Sweep::start(&field.column(i)[j..=l], query.pinned);
    for c in i + 1..=k {
        sweep.advance(&field.column(c)[j..=l]);
    }
    sweep
        .finish(query.pinned)
        .ok_or_else(|| Error::InvalidParameter("a single-column path cannot change row".into()))
}

/// Corner-to-corner first passage over columns produced on demand, so
/// only one column is held in memory.
pub fn first_passage_streamed<T: Amount>(
    columns: usize,
    rows: usize,
    pinned: bool,
    mut next_column: impl FnMut(&mut [T]) -> Result<()>,
) -> Result<T> {
    if columns == 0 || rows == 0 {
        return Err(Error::InvalidParameter("field dimensions must be positive".into()));
    }
    let mut buf = vec![T::zero(); rows];
    next_column(&mut buf)?;
    let mut sweep = Sweep::start(&buf, pinned);
    for _ in 1..columns {
        next_column(&mut buf)?;
        sweep.advance(&buf);
    }
    sweep
        .finish(pinned)
        .ok_or_else(|| Error::InvalidParameter("a single-column path cannot change row".into()))
}

/// Replica summary of `F((0,0),(floor(xN), N)) / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConstantEstimate {
    pub x: f64,
    pub n: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub replicas: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

impl TimeConstantEstimate {
    pub const CSV_HEADER: [&'static str; 7] = ["x", "N", "mean", "ci_lo", "ci_hi", "replicas", "seed"];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.x.csv_field(),
            self.n.to_string(),
            self.mean.csv_field(),
            self.ci_lo.csv_field(),
            self.ci_hi.csv_field(),
            self.replicas.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Monte Carlo estimate of the time constant at aspect ratio `x`.
///
/// Replica `i` draws its field from `stream.derive(i)`, column by column,
/// and runs the pinned sweep with one column in memory. Replicas run in
/// parallel; results are ordered by replica index.
pub fn estimate_time_constant(
    weight_spec: &DistSpec,
    x: f64,
    n: usize,
    replicas: usize,
    stream: &RandomStream,
) -> Result<TimeConstantEstimate> {
    weight_spec.validate()?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("aspect ratio x = {x} must be positive")));
    }
    if n < 10 {
        return Err(Error::InvalidParameter(format!("N = {n} must be at least 10")));
    }
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be at least 1".into()));
    }
    let columns = (x * n as f64).floor() as usize + 1;
    let rows = n + 1;
    let values = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.derive(i as u64);
            let f = first_passage_streamed::<f64>(columns, rows, true, |col| {
                for w in col.iter_mut() {
                    *w = weight_spec.sample(&mut rng);
                }
                Ok(())
            })?;
            Ok(f / n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let MeanCi { mean, ci_lo, ci_hi, .. } = mean_ci(&values);
    Ok(TimeConstantEstimate {
        x,
        n,
        mean,
        ci_lo,
        ci_hi,
        replicas,
        seed: stream.seed(),
        values,
    })
}

/// One event of a row process: time and positive jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub weight: f64,
}

/// Per-row pure-jump processes on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpField {
    pub horizon: f64,
    rows: Vec<Vec<JumpEvent>>,
}

impl JumpField {
    pub fn new(horizon: f64, rows: Vec<Vec<JumpEvent>>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
        }
        for (r, events) in rows.iter().enumerate() {
            let mut prev = f64::NEG_INFINITY;
            for e in events {
                if !(e.time > prev) || e.time < 0.0 || e.time > horizon {
                    return Err(Error::InvalidParameter(format!(
                        "row {r}: event times must increase within [0, {horizon}]"
                    )));
                }
                if !(e.weight > 0.0) || !e.weight.is_finite() {
                    return Err(Error::InvalidParameter(format!("row {r}: event weight {} must be positive", e.weight)));
                }
                prev = e.time;
            }
        }
        Ok(Self { horizon, rows })
    }

    /// Rate-one Poisson event times with i.i.d. weights; zero-weight
    /// events are left out.
    pub fn sample(weight: &DistSpec, rows: usize, horizon: f64, rng: &mut RandomStream) -> Result<Self> {
        weight.validate()?;
        let mut out = Vec::with_capacity(rows);
        for _ in 0..rows {
            let mut events = Vec::new();
            let mut t = -rng.uniform_pos().ln();
            while t <= horizon {
                let w = weight.sample(rng);
                if w > 0.0 {
                    events.push(JumpEvent { time: t, weight: w });
                }
                t -= rng.uniform_pos().ln();
            }
            out.push(events);
        }
        Self::new(horizon, out)
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn events(&self, row: usize) -> &[JumpEvent] {
        &self.rows[row]
    }

    /// `S^r(t) - S^r(s)`: total weight of row events in `(s, t]`.
    pub fn increment(&self, row: usize, s: f64, t: f64) -> f64 {
        self.rows[row].iter().filter(|e| e.time > s && e.time <= t).map(|e| e.weight).sum()
    }
}

/// Infimum over switching times `s = u_j < ... < u_{l+1} = t` of
/// `sum_r [S^r(u_{r+1}) - S^r(u_r)]`.
///
/// Events are merged in time order. Between events the path may move up
/// freely (a prefix minimum over rows); an event at `tau` is charged to
/// the row occupied at `tau`. Row `l` always holds `t`, so no move is
/// allowed after events at `t` itself.
pub fn continuous_first_passage(field: &JumpField, s: f64, t: f64, j: usize, l: usize) -> Result<f64> {
    if !(0.0 <= s && s < t && t <= field.horizon) {
        return Err(Error::InvalidParameter(format!("need 0 <= s < t <= {}, got s = {s}, t = {t}", field.horizon)));
    }
    if j > l || l >= field.rows() {
        return Err(Error::InvalidParameter(format!("rows {j}..={l} outside 0..{}", field.rows())));
    }
    let mut events: Vec<(f64, usize, f64)> = (j..=l)
        .flat_map(|r| {
            field.rows[r]
                .iter()
                .filter(|e| e.time > s && e.time <= t)
                .map(move |e| (e.time, r - j, e.weight))
        })
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let width = l - j + 1;
    let mut cost = vec![f64::INFINITY; width];
    cost[0] = 0.0;
    prefix_min(&mut cost);
    let mut idx = 0;
    while idx < events.len() {
        let tau = events[idx].0;
        while idx < events.len() && events[idx].0 == tau {
            let (_, r, w) = events[idx];
            cost[r] += w;
            idx += 1;
        }
        if tau < t {
            prefix_min(&mut cost);
        }
    }
    Ok(cost[width - 1])
}

fn prefix_min(cost: &mut [f64]) {
    for r in 1..cost.len() {
        cost[r] = cost[r].min(cost[r - 1]);
    }
}

/// Both sides of the tandem sum identity on one finite window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport<T> {
    /// `sum_r X^(r)_0` from the tandem run.
    pub lhs: T,
    /// `max_k { A(k..-1) - F(k..-1) }`.
    pub rhs: T,
    /// Latest window offset `k` attaining the maximum; the window length
    /// stands for the empty range.
    pub argmax: usize,
    pub equal: bool,
}

/// Evaluates `max over k of { sum_{n=k}^{L-1} A_n - F_k }`, where `F_k` is
/// the free-endpoint first passage over columns `k..L` with the stage
/// services as row weights and `F_L = 0`.
pub fn identity_rhs<T: Amount>(arrivals: &[T], services: &[Vec<T>]) -> Result<(T, usize)> {
    let len = arrivals.len();
    let stages = services.len();
    if stages == 0 {
        return Err(Error::InvalidParameter("need at least one row of services".into()));
    }
    if let Some(s) = services.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch(s.len(), len));
    }
    // h[r]: best weight of a path over columns k..L whose first row is r;
    // rows never decrease, so extend leftward with a suffix minimum.
    let mut h: Vec<T> = vec![T::zero(); stages];
    let mut suffix = vec![T::zero(); stages];
    let (mut best, mut argmax) = (T::zero(), len);
    let mut sum_a = T::zero();
    for k in (0..len).rev() {
        let mut m: Option<T> = None;
        for r in (0..stages).rev() {
            m = Some(m.map_or(h[r], |v| min_of(v, h[r])));
            suffix[r] = m.unwrap();
        }
        for r in 0..stages {
            h[r] = services[r][k] + suffix[r];
        }
        let f = h.iter().copied().reduce(min_of).unwrap();
        sum_a = sum_a + arrivals[k];
        if sum_a > f && sum_a - f > best {
            best = sum_a - f;
            argmax = k;
        }
    }
    Ok((best, argmax))
}

/// Runs a tandem from empty over the given window and compares
/// `sum_r X^(r)` after the last slot with [`identity_rhs`].
pub fn tandem_identity<T: Amount>(arrivals: &[T], services: &[Vec<T>]) -> Result<IdentityReport<T>> {
    let (rhs, argmax) = identity_rhs(arrivals, services)?;
    let trace = TandemTrace::from_sequences(arrivals.to_vec(), services.to_vec())?;
    let lhs = trace.stages.iter().fold(T::zero(), |acc, s| acc + s.final_x());
    let equal = if T::EXACT {
        lhs == rhs
    } else {
        (lhs.to_f64() - rhs.to_f64()).abs() <= 1e-9 * lhs.to_f64().abs().max(1.0)
    };
    Ok(IdentityReport { lhs, rhs, argmax, equal })
}

/// Draws one window of `window` slots (arrival, then each service, per
/// slot) and checks the identity on it.
pub fn tandem_identity_check<T: Draw>(
    config: &TandemConfig,
    window: usize,
    rng: &mut RandomStream,
) -> Result<IdentityReport<T>> {
    let mut arrivals = Vec::with_capacity(window);
    let mut services: Vec<Vec<T>> = vec![Vec::with_capacity(window); config.stages()];
    for _ in 0..window {
        arrivals.push(T::draw(&config.arrival, rng)?);
        for (seq, spec) in services.iter_mut().zip(&config.services) {
            seq.push(T::draw(spec, rng)?);
        }
    }
    tandem_identity(&arrivals, &services)
}
