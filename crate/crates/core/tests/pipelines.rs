use batchq::queue::{check_condition, markov_oracle, solve_arrival, stationary_law, verify_detailed_balance};
use batchq::stats::{bonferroni, chi_square_gof, EmpiricalPmf};
use batchq::timeconstants::{h_of_lambda, linear_grid, TimeConstantQuery};
use batchq::verify::{self, Suite};
use batchq::{simulate, DistSpec, IntTrace, QueueParams, RandomStream, WeightField};

#[test]
fn intensity_to_law_to_oracle() {
    for (q, beta, lambda) in [(0.5, 0.5, 0.5), (0.4, 0.3, 0.6), (0.6, 0.7, 0.5)] {
        let (p, alpha) = solve_arrival(q, beta, lambda).unwrap();
        let params = QueueParams::new(p, alpha, q, beta).unwrap();
        assert!(check_condition(&params).abs() < 1e-12);
        assert!(verify_detailed_balance(&params, 30) < 1e-12);
        let law = stationary_law(&params).unwrap();
        let oracle = markov_oracle(&params.arrival(), &params.service(), 300).unwrap();
        assert!((oracle.mean() - law.mean_x()).abs() < 1e-9);
        // the mean queue length is h(lambda)
        assert!((law.mean_x() - h_of_lambda(q, beta, lambda).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn trace_csv_round_trip() {
    let p = QueueParams::new(1.0 / 3.0, 2.0 / 3.0, 0.5, 0.5).unwrap();
    let t: IntTrace = simulate(&p.arrival(), &p.service(), 500, 0, &mut RandomStream::new(4)).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["n", "A", "S", "X", "Y", "D", "U", "I", "T"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 500);
    for (n, row) in rows.iter().enumerate() {
        let field = |i: usize| row[i].parse::<u64>().unwrap();
        assert_eq!(field(0) as usize, n);
        assert_eq!(field(3), t.x(n));
        assert_eq!(field(5), t.departures(n));
    }
    assert_eq!(&rows[499][7], "");
}

#[test]
fn field_csv_round_trip() {
    let mut rng = RandomStream::new(2);
    let f: WeightField<f64> = WeightField::sample(&DistSpec::Exp { rate: 2.0 }, 7, 4, &mut rng).unwrap();
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let g = WeightField::<f64>::read_csv(buf.as_slice()).unwrap();
    assert_eq!(f, g);
}

#[test]
fn long_run_queue_law_matches_formula() {
    let p = QueueParams::new(0.25, 0.5, 0.5, 0.25).unwrap();
    let law = stationary_law(&p).unwrap();
    let t: IntTrace = simulate(&p.arrival(), &p.service(), 400_000, 0, &mut RandomStream::new(12)).unwrap();
    let xs: Vec<u64> = (20_000..t.len()).step_by(40).map(|n| t.x(n)).collect();
    let res = chi_square_gof(&EmpiricalPmf::from_values(&xs, 64), |k| law.pmf_x(k), bonferroni(0.01, 1)).unwrap();
    assert!(res.passed, "{res:?}");
}

#[test]
fn curves_from_queries() {
    let q: TimeConstantQuery = serde_json::from_str(r#"{"variant":"ber_geom","q":0.5,"beta":0.5}"#).unwrap();
    let grid: Vec<f64> = (2..=24).map(|i| i as f64 * 0.25).collect();
    let curve = q.curve(&grid).unwrap();
    assert!(curve.is_convex_nondecreasing(1e-9));
    for p in &curve.points {
        if p.x <= 1.0 {
            assert_eq!(p.f, 0.0);
        } else {
            assert!(p.f > 0.0);
        }
    }
    let cont = TimeConstantQuery::ContExp.curve(&linear_grid(0.5, 4.0, 15)).unwrap();
    for p in &cont.points {
        assert_eq!(p.f == 0.0, p.x <= 1.0, "y = {}", p.x);
    }
    assert!(TimeConstantQuery::Exp.curve::<f64>(&[]).is_err());
}

#[test]
fn verify_reports_are_reproducible() {
    let a = verify::run(Suite::Percolation, 9).to_json().unwrap();
    let b = verify::run(Suite::Percolation, 9).to_json().unwrap();
    assert_eq!(a, b);
    let report: verify::Report = serde_json::from_str(&a).unwrap();
    assert!(report.passed);
    assert!(report.checks.iter().all(|c| c.suite == Suite::Percolation));
}
