use batchq::optimize::maximize;
use batchq::percolation::{enumerate_first_passage, first_passage, tandem_identity};
use batchq::queue::path_max_x;
use batchq::timeconstants::{f_bergeom, f_exponential, ftilde_exp, ftilde_exp_closed};
use batchq::{simulate, DistSpec, IntField, IntTrace, PathQuery, RandomStream, RealField, Trace, WeightField};

#[test]
fn signed_and_unsigned_traces_agree() {
    let a = DistSpec::BerGeom { p: 0.4, alpha: 0.5 };
    let s = DistSpec::GeomZero { alpha: 0.4 };
    let u: IntTrace = simulate(&a, &s, 2000, 0, &mut RandomStream::new(5)).unwrap();
    let i: Trace<i64> = simulate(&a, &s, 2000, 0, &mut RandomStream::new(5)).unwrap();
    assert!(u.queue.iter().zip(&i.queue).all(|(&x, &y)| x as i64 == y));
    let r: Trace<f64> = simulate(&a, &s, 2000, 0.0, &mut RandomStream::new(5)).unwrap();
    assert!(u.queue.iter().zip(&r.queue).all(|(&x, &y)| x as f64 == y));
}

#[test]
fn small_integer_amounts() {
    let a: Vec<u32> = vec![3, 0, 2, 5, 0, 1];
    let s: Vec<u32> = vec![1, 2, 0, 1, 4, 4];
    let t = Trace::from_sequences(a.clone(), s.clone(), 0u32).unwrap();
    assert_eq!(t.final_x(), path_max_x(&a, &s).unwrap());
    t.check_identities(0.0).unwrap();
}

#[test]
fn percolation_over_several_scalars() {
    let cols = [vec![3u64, 1, 4], vec![1, 5, 9], vec![2, 6, 5], vec![3, 5, 8]];
    let int: IntField = WeightField::from_columns(&cols).unwrap();
    let real: RealField =
        WeightField::from_columns(&cols.iter().map(|c| c.iter().map(|&w| w as f64).collect()).collect::<Vec<_>>())
            .unwrap();
    let single: WeightField<f32> =
        WeightField::from_columns(&cols.iter().map(|c| c.iter().map(|&w| w as f32).collect()).collect::<Vec<_>>())
            .unwrap();
    for pinned in [true, false] {
        let q = PathQuery::corners(&int, pinned);
        let f = first_passage(&int, &q).unwrap();
        assert_eq!(f, enumerate_first_passage(&int, &q).unwrap());
        assert_eq!(f as f64, first_passage(&real, &q).unwrap());
        assert_eq!(f as f32, first_passage(&single, &q).unwrap());
    }
}

#[test]
fn identity_with_real_weights() {
    let mut rng = RandomStream::new(8);
    let exp = DistSpec::Exp { rate: 1.0 };
    for _ in 0..100 {
        let arrivals: Vec<f64> = (0..40).map(|_| 0.6 * exp.sample(&mut rng)).collect();
        let services: Vec<Vec<f64>> = (0..3).map(|_| (0..40).map(|_| exp.sample(&mut rng)).collect()).collect();
        assert!(tandem_identity(&arrivals, &services).unwrap().equal);
    }
}

#[test]
fn time_constants_in_single_precision() {
    let d = f_bergeom(0.5f32, 0.5, 3.0).unwrap().value - (6.0 - 4.0 * 2f32.sqrt());
    assert!(d.abs() < 1e-4);
    assert_eq!(f_exponential(3.0f32).unwrap(), 1.0);
    let e = ftilde_exp(2.0f32).unwrap().value - ftilde_exp_closed(2.0f32).unwrap();
    assert!(e.abs() < 1e-5);
}

#[test]
fn optimizer_is_generic() {
    let m64 = maximize(|x: f64| x * (1.0 - x), 0.0, 1.0, 1e-12).unwrap();
    let m32 = maximize(|x: f32| x * (1.0 - x), 0.0, 1.0, 1e-6).unwrap();
    assert!((m64.argmax - 0.5).abs() < 1e-7);
    assert!((m32.argmax - 0.5).abs() < 1e-3);
}
