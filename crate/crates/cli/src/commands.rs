use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use batchq::percolation::{estimate_time_constant, tandem_identity_check, IdentityReport};
use batchq::queue::{burn_in, check_condition, markov_oracle};
use batchq::stats::bonferroni;
use batchq::tandem::verify_product_form;
use batchq::verify::{self, Suite};
use batchq::{
    first_passage, simulate, simulate_tandem, stationary_law, Amount, DistSpec, Draw, PathQuery, QueueParams,
    RandomStream, TandemConfig, TimeConstantQuery, WeightField,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::config::RunConfig;

pub const DEFAULT_SEED: u64 = 1;

/// Whether a check-style command found what it was asked to confirm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Failed,
}

pub struct RunContext {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunContext {
    pub fn new(global: &Global, cfg: RunConfig) -> Self {
        Self {
            seed: global.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
            out: global.out.clone().or_else(|| cfg.out.clone()),
            format: global.format.or(cfg.format).unwrap_or(Format::Csv),
            cfg,
        }
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn write_json(&self, value: &impl Serialize) -> Result<()> {
        let mut w = self.sink()?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn write_rows(&self, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = self.sink()?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn print_summary(value: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn ber_geom(p: Option<f64>, alpha: Option<f64>, what: &str) -> Result<Option<DistSpec>> {
    match (p, alpha) {
        (Some(p), Some(alpha)) => {
            let spec = DistSpec::BerGeom { p, alpha };
            spec.validate()?;
            Ok(Some(spec))
        }
        (None, None) => Ok(None),
        _ => bail!("{what} needs both Ber-Geom parameters"),
    }
}

fn f(v: f64) -> String {
    batchq::format::format_float(v)
}

pub fn dist(ctx: &RunContext, action: &DistAction) -> Result<Status> {
    let (args, sample) = match action {
        DistAction::Sample(a) => (a, true),
        DistAction::Pmf(a) => (a, false),
    };
    let spec = args.dist.or(ctx.cfg.dist).context("--dist is required")?;
    spec.validate()?;
    if sample {
        let count = args.count.or(ctx.cfg.count).unwrap_or(10);
        let mut rng = RandomStream::new(ctx.seed);
        let values: Vec<Value> = if spec.is_discrete() {
            (0..count)
                .map(|_| spec.sample_discrete(&mut rng).map(Value::from))
                .collect::<batchq::Result<_>>()?
        } else {
            (0..count).map(|_| Value::from(spec.sample(&mut rng))).collect()
        };
        return match ctx.format {
            Format::Json => ctx.write_json(&values).map(|_| Status::Success),
            Format::Csv => ctx
                .write_rows(
                    &["value"],
                    values.iter().map(|v| vec![v.as_u64().map_or_else(|| f(v.as_f64().unwrap()), |k| k.to_string())]),
                )
                .map(|_| Status::Success),
        };
    }
    if !spec.is_discrete() {
        bail!("{spec} has no probability mass function");
    }
    let max = match args.max.or(ctx.cfg.max) {
        Some(m) => m,
        None => spec.truncation_point(1e-12).expect("discrete"),
    };
    let pmf: Vec<(u64, f64)> = (0..=max).map(|k| Ok((k, spec.pmf(k)?))).collect::<batchq::Result<_>>()?;
    match ctx.format {
        Format::Json => ctx.write_json(&pmf.iter().map(|&(k, p)| json!({"k": k, "pmf": p})).collect::<Vec<_>>())?,
        Format::Csv => ctx.write_rows(&["k", "pmf"], pmf.iter().map(|&(k, p)| vec![k.to_string(), f(p)]))?,
    }
    Ok(Status::Success)
}

fn both_discrete(specs: &[DistSpec]) -> bool {
    specs.iter().all(DistSpec::is_discrete)
}

pub fn queue(ctx: &RunContext, args: &QueueArgs) -> Result<Status> {
    let cfg = &ctx.cfg;
    let a = &args.params;
    let arrival = match args.arrival.or(cfg.arrival) {
        Some(s) => s,
        None => ber_geom(a.p.or(cfg.p), a.alpha.or(cfg.alpha), "the arrival law")?
            .context("give --arrival or --p and --alpha")?,
    };
    let service = match args.service.or(cfg.service) {
        Some(s) => s,
        None => ber_geom(a.q.or(cfg.q), a.beta.or(cfg.beta), "the service law")?
            .context("give --service or --q and --beta")?,
    };
    let slots = args.slots.or(cfg.slots).unwrap_or(100_000);
    let summary = if both_discrete(&[arrival, service]) {
        run_queue::<u64>(ctx, arrival, service, slots)?
    } else {
        run_queue::<f64>(ctx, arrival, service, slots)?
    };
    print_summary(&summary)?;
    Ok(Status::Success)
}

fn run_queue<T: Draw + batchq::format::CsvField>(
    ctx: &RunContext,
    arrival: DistSpec,
    service: DistSpec,
    slots: usize,
) -> Result<Value> {
    let mut rng = RandomStream::new(ctx.seed);
    let trace = simulate::<T>(&arrival, &service, slots, T::zero(), &mut rng)?;
    if ctx.out.is_some() {
        let mut w = ctx.sink()?;
        trace.write_csv(&mut w)?;
        w.flush()?;
    }
    let burn = burn_in(arrival.mean(), service.mean());
    let start = if burn < slots / 2 { burn } else { 0 };
    let n = (slots - start) as f64;
    let mean_x = (start..slots).map(|k| trace.x(k).to_f64()).sum::<f64>() / n;
    let mean_d = (start..slots).map(|k| trace.departures(k).to_f64()).sum::<f64>() / n;
    let mut summary = json!({
        "seed": ctx.seed,
        "slots": slots,
        "arrival": arrival,
        "service": service,
        "burn_in": start,
        "mean_x": mean_x,
        "mean_departures": mean_d,
    });
    if let (DistSpec::BerGeom { p, alpha }, DistSpec::BerGeom { p: q, alpha: beta }) = (arrival, service) {
        let params = QueueParams::new(p, alpha, q, beta)?;
        summary["condition_residual"] = json!(check_condition(&params));
        if let Ok(law) = stationary_law(&params) {
            summary["stationary_mean_x"] = json!(law.mean_x());
        }
    }
    if both_discrete(&[arrival, service]) && arrival.mean() < service.mean() {
        if let Ok(res) = markov_oracle(&arrival, &service, 400) {
            summary["oracle_mean_x"] = json!(res.mean());
        }
    }
    Ok(summary)
}

pub fn tandem(ctx: &RunContext, args: &TandemArgs) -> Result<Status> {
    let cfg = &ctx.cfg;
    let a = &args.params;
    let arrival = match args.arrival.or(cfg.arrival) {
        Some(s) => s,
        None => ber_geom(a.p.or(cfg.p), a.alpha.or(cfg.alpha), "the arrival law")?
            .context("give --arrival or --p and --alpha")?,
    };
    let services = match args.services.clone().or_else(|| cfg.services.clone()) {
        Some(s) => s,
        None => {
            let spec = ber_geom(a.q.or(cfg.q), a.beta.or(cfg.beta), "the service law")?
                .context("give --services or --q and --beta")?;
            vec![spec; args.stages.or(cfg.stages).unwrap_or(1)]
        }
    };
    let config = TandemConfig::new(arrival, services)?;
    let slots = args.slots.or(cfg.slots).unwrap_or(100_000);
    let check = args.check || cfg.check.unwrap_or(false);
    let mut rng = RandomStream::new(ctx.seed);
    let discrete = both_discrete(&[config.arrival]) && both_discrete(&config.services);
    let (mut summary, status) = if discrete {
        let trace = simulate_tandem::<u64>(&config, slots, &mut rng)?;
        let mut summary = tandem_summary(ctx, &trace, slots)?;
        let mut status = Status::Success;
        if check {
            let raw = verify_product_form(&trace, 1.0)?;
            let level = bonferroni(verify::SUITE_LEVEL, raw.len());
            let tests: Vec<Value> = raw
                .into_iter()
                .map(|r| {
                    let passed = r.p_value >= level;
                    if !passed {
                        status = Status::Failed;
                    }
                    json!({"name": r.name, "statistic": r.statistic, "dof": r.dof, "p_value": r.p_value, "level": level, "passed": passed})
                })
                .collect();
            summary["product_form"] = Value::from(tests);
        }
        (summary, status)
    } else {
        if check {
            bail!("--check needs integer-valued laws");
        }
        let trace = simulate_tandem::<f64>(&config, slots, &mut rng)?;
        (tandem_summary(ctx, &trace, slots)?, Status::Success)
    };
    summary["arrival"] = json!(config.arrival);
    summary["services"] = json!(config.services);
    print_summary(&summary)?;
    Ok(status)
}

fn tandem_summary<T: Amount + batchq::format::CsvField>(
    ctx: &RunContext,
    trace: &batchq::TandemTrace<T>,
    slots: usize,
) -> Result<Value> {
    if ctx.out.is_some() {
        let mut w = ctx.sink()?;
        trace.write_csv(&mut w)?;
        w.flush()?;
    }
    let stages: Vec<Value> = (0..trace.n_stages())
        .map(|r| {
            let n = slots as f64;
            let mean_x = (0..slots).map(|k| trace.x(r, k).to_f64()).sum::<f64>() / n;
            let mean_d = (0..slots).map(|k| trace.departures(r, k).to_f64()).sum::<f64>() / n;
            json!({"stage": r + 1, "mean_x": mean_x, "mean_departures": mean_d})
        })
        .collect();
    Ok(json!({"seed": ctx.seed, "slots": slots, "stages": stages}))
}

pub fn perc(ctx: &RunContext, action: &PercAction) -> Result<Status> {
    match action {
        PercAction::Simulate(a) => perc_simulate(ctx, a),
        PercAction::Identity(a) => perc_identity(ctx, a),
        PercAction::Estimate(a) => perc_estimate(ctx, a),
    }
}

const EXP1: DistSpec = DistSpec::Exp { rate: 1.0 };

fn perc_simulate(ctx: &RunContext, args: &PercSimulateArgs) -> Result<Status> {
    let cfg = &ctx.cfg;
    let weights = args.weights.or(cfg.weights).unwrap_or(EXP1);
    let columns = args.columns.or(cfg.columns).unwrap_or(10);
    let rows = args.rows.or(cfg.rows).unwrap_or(10);
    let pinned = !(args.free || cfg.free.unwrap_or(false));
    let mut rng = RandomStream::new(ctx.seed);
    let value: f64 = if weights.is_discrete() {
        let field = WeightField::<u64>::sample(&weights, columns, rows, &mut rng)?;
        first_passage(&field, &PathQuery::corners(&field, pinned))? as f64
    } else {
        let field = WeightField::<f64>::sample(&weights, columns, rows, &mut rng)?;
        first_passage(&field, &PathQuery::corners(&field, pinned))?
    };
    match ctx.format {
        Format::Json => ctx.write_json(&json!({
            "weights": weights, "columns": columns, "rows": rows, "pinned": pinned,
            "seed": ctx.seed, "first_passage": value,
        }))?,
        Format::Csv => ctx.write_rows(
            &["columns", "rows", "pinned", "seed", "first_passage"],
            [vec![columns.to_string(), rows.to_string(), pinned.to_string(), ctx.seed.to_string(), f(value)]],
        )?,
    }
    Ok(Status::Success)
}

fn identity_reports<T: Draw>(
    config: &TandemConfig,
    window: usize,
    instances: usize,
    root: &RandomStream,
) -> Result<Vec<IdentityReport<f64>>> {
    let reports = (0..instances)
        .into_par_iter()
        .map(|i| {
            let r = tandem_identity_check::<T>(config, window, &mut root.derive(i as u64))?;
            Ok(IdentityReport {
                lhs: r.lhs.to_f64(),
                rhs: r.rhs.to_f64(),
                argmax: r.argmax,
                equal: r.equal,
            })
        })
        .collect::<batchq::Result<Vec<_>>>()?;
    Ok(reports)
}

fn perc_identity(ctx: &RunContext, args: &PercIdentityArgs) -> Result<Status> {
    let cfg = &ctx.cfg;
    let arrival = args
        .arrival
        .or(cfg.arrival)
        .unwrap_or(DistSpec::BerGeom { p: 1.0 / 3.0, alpha: 2.0 / 3.0 });
    let service = args.service.or(cfg.service).unwrap_or(DistSpec::BerGeom { p: 0.5, alpha: 0.5 });
    let stages = args.stages.or(cfg.stages).unwrap_or(2);
    let window = args.window.or(cfg.window).unwrap_or(50);
    let instances = args.instances.or(cfg.instances).unwrap_or(1000);
    let config = TandemConfig::new(arrival, vec![service; stages])?;
    let root = RandomStream::new(ctx.seed);
    let reports = if both_discrete(&[arrival, service]) {
        identity_reports::<u64>(&config, window, instances, &root)?
    } else {
        identity_reports::<f64>(&config, window, instances, &root)?
    };
    let failures = reports.iter().filter(|r| !r.equal).count();
    match ctx.format {
        Format::Json => ctx.write_json(&json!({
            "seed": ctx.seed, "stages": stages, "window": window,
            "instances": instances, "failures": failures,
        }))?,
        Format::Csv => ctx.write_rows(
            &["instance", "lhs", "rhs", "argmax", "equal"],
            reports.iter().enumerate().map(|(i, r)| {
                vec![i.to_string(), f(r.lhs), f(r.rhs), r.argmax.to_string(), r.equal.to_string()]
            }),
        )?,
    }
    Ok(if failures == 0 { Status::Success } else { Status::Failed })
}

fn perc_estimate(ctx: &RunContext, args: &PercEstimateArgs) -> Result<Status> {
    let cfg = &ctx.cfg;
    let weights = args.weights.or(cfg.weights).unwrap_or(EXP1);
    let x = args.x.or(cfg.x).unwrap_or(3.0);
    let n = args.n.or(cfg.n).unwrap_or(100);
    let replicas = args.replicas.or(cfg.replicas).unwrap_or(10);
    let est = estimate_time_constant(&weights, x, n, replicas, &RandomStream::new(ctx.seed))?;
    match ctx.format {
        Format::Json => ctx.write_json(&est)?,
        Format::Csv => ctx.write_rows(&batchq::percolation::TimeConstantEstimate::CSV_HEADER, [est.csv_record()])?,
    }
    Ok(Status::Success)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        bail!("grid `{s}` is not of the form lo:hi:count");
    };
    let lo: f64 = lo.trim().parse().with_context(|| format!("grid start `{lo}`"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("grid end `{hi}`"))?;
    let count: usize = count.trim().parse().with_context(|| format!("grid count `{count}`"))?;
    if count == 0 {
        bail!("empty grid");
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok(batchq::timeconstants::linear_grid(lo, hi, count))
}

pub fn tc(ctx: &RunContext, args: &TcArgs) -> Result<Status> {
    let cfg = &ctx.cfg;
    let variant = args.variant.clone().or_else(|| cfg.variant.clone()).context("--variant is required")?;
    let mut obj = json!({ "variant": variant });
    if let Some(q) = args.q.or(cfg.q) {
        obj["q"] = json!(q);
    }
    if let Some(beta) = args.beta.or(cfg.beta) {
        obj["beta"] = json!(beta);
    }
    let query: TimeConstantQuery =
        serde_json::from_value(obj).map_err(|e| anyhow!("invalid time-constant query: {e}"))?;
    let grid = args.grid.clone().or_else(|| cfg.grid.clone());
    match (args.x.or(cfg.x), grid) {
        (Some(x), None) => {
            let point = query.evaluate(x)?;
            match ctx.format {
                Format::Json => ctx.write_json(&point)?,
                Format::Csv => {
                    let mut w = ctx.sink()?;
                    writeln!(w, "{:?}", point.f)?;
                    w.flush()?;
                }
            }
        }
        (None, Some(g)) => {
            let curve = query.curve(&parse_grid(&g)?)?;
            match ctx.format {
                Format::Json => ctx.write_json(&curve)?,
                Format::Csv => {
                    let mut w = ctx.sink()?;
                    curve.write_csv(&mut w)?;
                    w.flush()?;
                }
            }
        }
        (Some(_), Some(_)) => bail!("give either --x or --grid, not both"),
        (None, None) => bail!("give --x or --grid"),
    }
    Ok(Status::Success)
}

pub fn verify(ctx: &RunContext, args: &VerifyArgs) -> Result<Status> {
    let suite = args.suite.or(ctx.cfg.suite).unwrap_or(Suite::All);
    let report = verify::run(suite, ctx.seed);
    ctx.write_json(&report)?;
    let failed: Vec<_> = report.failures().map(|c| format!("{}/{}", c.suite, c.name)).collect();
    eprintln!(
        "{} of {} checks passed{}",
        report.checks.len() - failed.len(),
        report.checks.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    Ok(if report.passed { Status::Success } else { Status::Failed })
}
