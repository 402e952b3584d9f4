//! Goodness-of-fit, independence and correlation tests used by the
//! verification suites.
//!
//! Pearson statistics are referred to the chi-square distribution through
//! the regularized upper incomplete gamma function. Cells are pooled until
//! every expected count reaches [`MIN_EXPECTED`]; for ordered cells the
//! pooling runs from the tail downward.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Minimum expected count per cell after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    pub level: f64,
    pub passed: bool,
}

impl TestResult {
    pub fn new(name: impl Into<String>, statistic: f64, dof: f64, p_value: f64, level: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            name: name.into(),
            statistic,
            dof,
            p_value,
            level,
            passed: p_value >= level,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Counts per value with everything at or above `cutoff` pooled into the
/// last cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPmf {
    pub counts: Vec<u64>,
    pub cutoff: u64,
    pub n: u64,
}

impl EmpiricalPmf {
    pub fn from_values(values: &[u64], cutoff: u64) -> Self {
        let mut counts = vec![0u64; cutoff as usize + 1];
        for &v in values {
            counts[v.min(cutoff) as usize] += 1;
        }
        Self {
            counts,
            cutoff,
            n: values.len() as u64,
        }
    }

    pub fn frequency(&self, k: u64) -> f64 {
        self.counts.get(k as usize).map_or(0.0, |&c| c as f64 / self.n as f64)
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(statistic: f64, dof: f64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    if !statistic.is_finite() {
        return 0.0;
    }
    gamma_ur(dof / 2.0, statistic / 2.0)
}

/// Asymptotic Kolmogorov survival function `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Per-test level after Bonferroni correction over `m` tests.
pub fn bonferroni(level: f64, m: usize) -> f64 {
    level / m.max(1) as f64
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    observed: f64,
    expected: f64,
}

fn pearson(cells: &[Cell]) -> f64 {
    cells
        .iter()
        .map(|c| {
            let d = c.observed - c.expected;
            if c.expected > 0.0 {
                d * d / c.expected
            } else if c.observed > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum()
}

fn pool_tail_downward(cells: &[Cell]) -> Vec<Cell> {
    let mut out: Vec<Cell> = Vec::new();
    let mut acc = Cell { observed: 0.0, expected: 0.0 };
    for c in cells.iter().rev() {
        acc.observed += c.observed;
        acc.expected += c.expected;
        if acc.expected >= MIN_EXPECTED {
            out.push(acc);
            acc = Cell { observed: 0.0, expected: 0.0 };
        }
    }
    if acc.observed > 0.0 || acc.expected > 0.0 {
        match out.last_mut() {
            Some(last) => {
                last.observed += acc.observed;
                last.expected += acc.expected;
            }
            None => out.push(acc),
        }
    }
    out.reverse();
    out
}

fn pool_lumped(cells: &[Cell]) -> Vec<Cell> {
    let mut out = Vec::new();
    let mut rest = Cell { observed: 0.0, expected: 0.0 };
    for c in cells {
        if c.expected >= MIN_EXPECTED {
            out.push(*c);
        } else {
            rest.observed += c.observed;
            rest.expected += c.expected;
        }
    }
    if rest.expected >= MIN_EXPECTED || out.is_empty() {
        out.push(rest);
    } else if rest.observed > 0.0 || rest.expected > 0.0 {
        // fold an undersized remainder into the smallest retained cell
        let i = out
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.expected.total_cmp(&b.1.expected))
            .map(|(i, _)| i)
            .unwrap();
        out[i].observed += rest.observed;
        out[i].expected += rest.expected;
    }
    out
}

/// How undersized cells are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Ordered cells: merge from the last cell downward.
    TailDownward,
    /// Unordered cells: lump all undersized cells together.
    Lumped,
}

/// Pearson goodness-of-fit for `observed` counts against cell
/// probabilities `probs` (which should sum to one).
pub fn chi_square_cells(observed: &[u64], probs: &[f64], pooling: Pooling, level: f64) -> Result<TestResult> {
    if observed.len() != probs.len() {
        return Err(Error::LengthMismatch(observed.len(), probs.len()));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let cells: Vec<Cell> = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| Cell {
            observed: o as f64,
            expected: p.max(0.0) * n as f64,
        })
        .collect();
    let pooled = match pooling {
        Pooling::TailDownward => pool_tail_downward(&cells),
        Pooling::Lumped => pool_lumped(&cells),
    };
    if pooled.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} cell(s) reach an expected count of {MIN_EXPECTED}",
            pooled.len()
        )));
    }
    let stat = pearson(&pooled);
    let dof = (pooled.len() - 1) as f64;
    Ok(TestResult::new("chi_square_gof", stat, dof, chi2_sf(stat, dof), level))
}

/// Pearson goodness-of-fit of an empirical pmf against `expected(k)`.
pub fn chi_square_gof(emp: &EmpiricalPmf, expected: impl Fn(u64) -> f64, level: f64) -> Result<TestResult> {
    let mut probs: Vec<f64> = (0..emp.cutoff).map(&expected).collect();
    let head: f64 = probs.iter().sum();
    probs.push((1.0 - head).max(0.0));
    chi_square_cells(&emp.counts, &probs, Pooling::TailDownward, level)
}

/// Two-sample chi-square homogeneity test on aligned cell counts.
pub fn homogeneity_chi2(a: &[u64], b: &[u64], level: f64) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let n = (na + nb) as f64;
    let (fa, fb) = (na as f64 / n, nb as f64 / n);
    // pool on the smaller of the two expected counts
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot * fa.min(fb) >= MIN_EXPECTED {
            kept.push((x as f64, y as f64));
        } else {
            rest.0 += x as f64;
            rest.1 += y as f64;
        }
    }
    if rest.0 + rest.1 > 0.0 {
        kept.push(rest);
    }
    if kept.len() < 2 {
        return Err(Error::InsufficientData("fewer than two usable cells".into()));
    }
    let mut stat = 0.0;
    for &(x, y) in &kept {
        let tot = x + y;
        let (ea, eb) = (tot * fa, tot * fb);
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = (kept.len() - 1) as f64;
    Ok(TestResult::new("homogeneity_chi2", stat, dof, chi2_sf(stat, dof), level))
}

/// Contingency-table chi-square test of independence. Values at or above
/// the cutoffs are pooled; sparse trailing rows and columns are merged.
pub fn independence_chi2(pairs: &[(u64, u64)], cutoffs: (u64, u64), level: f64) -> Result<TestResult> {
    let (cx, cy) = cutoffs;
    let (nr, nc) = (cx as usize + 1, cy as usize + 1);
    let mut table = vec![vec![0.0f64; nc]; nr];
    for &(x, y) in pairs {
        table[x.min(cx) as usize][y.min(cy) as usize] += 1.0;
    }
    // drop empty rows and columns
    table.retain(|row| row.iter().sum::<f64>() > 0.0);
    let col_sums: Vec<f64> = (0..nc).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let keep: Vec<usize> = (0..nc).filter(|&j| col_sums[j] > 0.0).collect();
    let mut table: Vec<Vec<f64>> = table.into_iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
    if table.len() < 2 || table.first().map_or(0, |r| r.len()) < 2 {
        return Err(Error::Degenerate("a marginal takes a single value".into()));
    }
    let n = pairs.len() as f64;
    let row_sums = |t: &Vec<Vec<f64>>| t.iter().map(|r| r.iter().sum::<f64>()).collect::<Vec<f64>>();
    let col_sums = |t: &Vec<Vec<f64>>| (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).sum::<f64>()).collect::<Vec<f64>>();
    loop {
        let rs = row_sums(&table);
        let cs = col_sums(&table);
        let min_col = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_row = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        let last_row_min = rs[rs.len() - 1] * min_col / n;
        let last_col_min = cs[cs.len() - 1] * min_row / n;
        if table.len() > 2 && last_row_min < MIN_EXPECTED {
            let last = table.pop().unwrap();
            for (a, b) in table.last_mut().unwrap().iter_mut().zip(last) {
                *a += b;
            }
        } else if table[0].len() > 2 && last_col_min < MIN_EXPECTED {
            for row in table.iter_mut() {
                let v = row.pop().unwrap();
                *row.last_mut().unwrap() += v;
            }
        } else {
            break;
        }
    }
    let rs = row_sums(&table);
    let cs = col_sums(&table);
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rs[i] * cs[j] / n;
            stat += (o - e).powi(2) / e;
        }
    }
    let dof = ((rs.len() - 1) * (cs.len() - 1)) as f64;
    Ok(TestResult::new("independence_chi2", stat, dof, chi2_sf(stat, dof), level))
}

/// Sample autocorrelation with its `1/sqrt(n)` standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Autocorr {
    pub lag: usize,
    pub rho: f64,
    pub stderr: f64,
}

impl Autocorr {
    /// True when `|rho| < k * stderr`.
    pub fn within(&self, k: f64) -> bool {
        self.rho.abs() < k * self.stderr
    }
}

pub fn lag_autocorr(seq: &[f64], lag: usize) -> Result<Autocorr> {
    let n = seq.len();
    if lag == 0 || n <= lag + 1 {
        return Err(Error::InsufficientData(format!("sequence of length {n} too short for lag {lag}")));
    }
    let mean = seq.iter().sum::<f64>() / n as f64;
    let denom: f64 = seq.iter().map(|x| (x - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::Degenerate("constant sequence has no autocorrelation".into()));
    }
    let num: f64 = seq.windows(lag + 1).map(|w| (w[0] - mean) * (w[lag] - mean)).sum();
    Ok(Autocorr {
        lag,
        rho: num / denom,
        stderr: 1.0 / (n as f64).sqrt(),
    })
}

/// Smallest lag in `1..=max_lag` whose sample autocorrelation is below
/// `threshold` in absolute value; `max_lag` if none is.
///
/// Used to thin correlated samples before a chi-square test.
pub fn decorrelation_lag(seq: &[f64], threshold: f64, max_lag: usize) -> Result<usize> {
    for lag in 1..=max_lag {
        if lag_autocorr(seq, lag)?.rho.abs() < threshold {
            return Ok(lag);
        }
    }
    Ok(max_lag)
}

/// One-sample Kolmogorov-Smirnov test of real draws against a survival
/// function `sf(x) = P(X >= x)`, evaluated on `x > 0`.
pub fn ks_survival_test(samples: &[f64], sf: impl Fn(f64) -> f64, level: f64) -> TestResult {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        if x > 0.0 {
            // empirical P(X >= x) just at and just above x
            let at = (xs.len() - i) as f64 / n;
            let above = (xs.len() - j) as f64 / n;
            let s = sf(x);
            d = d.max((at - s).abs()).max((above - s).abs());
        }
        i = j;
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    TestResult::new("ks_survival", d, f64::NAN, kolmogorov_sf(lambda), level)
}

/// Sample mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub std_dev: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

pub fn mean_ci(values: &[f64]) -> MeanCi {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let sd = var.sqrt();
    let half = 1.959_963_984_540_054 * sd / (n as f64).sqrt();
    MeanCi {
        mean,
        std_dev: sd,
        ci_lo: mean - half,
        ci_hi: mean + half,
        n,
    }
}
