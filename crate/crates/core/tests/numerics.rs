use rallycast::numerics::{check, Array, NumericsError, Tape};
use rallycast::rng::SeedStream;

#[test]
fn every_primitive_matches_finite_differences() {
    let report = check::check_primitives(20, 11).unwrap();
    assert_eq!(report.len(), 24);
    for (name, err) in &report {
        eprintln!("{name}: {err:e}");
    }
    for (name, err) in report {
        assert!(err < 1e-6, "{name}: relative error {err:e}");
    }
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut t = Tape::new();
    let x = t.leaf(Array::new(&[3], vec![0.0; 3]).unwrap()).unwrap();
    let y = t.softmax(x, 0).unwrap();
    for v in t.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = SeedStream::new(3).rng();
    use rand::Rng;
    let data: Vec<f64> = (0..60).map(|_| rng.random::<f64>() * 40.0 - 20.0).collect();
    let mut t = Tape::new();
    let x = t.leaf(Array::new(&[3, 4, 5], data).unwrap()).unwrap();
    for axis in 0..3 {
        let y = t.softmax(x, axis).unwrap();
        let v = t.value(y);
        let (outer, size, inner) = match axis {
            0 => (1, 3, 20),
            1 => (3, 4, 5),
            _ => (12, 5, 1),
        };
        for o in 0..outer {
            for i in 0..inner {
                let s: f64 = (0..size)
                    .map(|k| v.data()[o * size * inner + k * inner + i])
                    .sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn relu_clamps_negatives() {
    let mut t = Tape::new();
    let x = t.leaf(Array::new(&[2], vec![-1.0, 2.0]).unwrap()).unwrap();
    let y = t.relu(x).unwrap();
    assert_eq!(t.value(y).data(), &[0.0, 2.0]);
}

#[test]
fn sum_gradient_is_all_ones() {
    let mut t = Tape::new();
    let x = t
        .leaf(Array::new(&[2, 3], vec![0.3, -1.0, 2.0, 5.0, 0.0, 1.0]).unwrap())
        .unwrap();
    let l = t.sum(x).unwrap();
    let g = t.backward(l).unwrap();
    assert_eq!(g.wrt(x).data(), &[1.0; 6]);
}

#[test]
fn square_sum_gradient() {
    let mut t = Tape::new();
    let x = t.leaf(Array::new(&[2], vec![1.0, 2.0]).unwrap()).unwrap();
    let sq = t.mul(x, x).unwrap();
    let l = t.sum(sq).unwrap();
    let g = t.backward(l).unwrap();
    assert_eq!(g.wrt(x).data(), &[2.0, 4.0]);
}

#[test]
fn unused_leaf_gets_zero_gradient() {
    let mut t = Tape::new();
    let x = t.leaf(Array::new(&[2], vec![1.0, 2.0]).unwrap()).unwrap();
    let unused = t
        .leaf(Array::new(&[3], vec![1.0, 2.0, 3.0]).unwrap())
        .unwrap();
    let l = t.sum(x).unwrap();
    let g = t.backward(l).unwrap();
    assert!(g.get(unused).is_none());
    assert_eq!(g.wrt(unused).data(), &[0.0; 3]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut t = Tape::new();
    let x = t.leaf(Array::new(&[2], vec![1.0, 2.0]).unwrap()).unwrap();
    assert!(matches!(
        t.backward(x),
        Err(NumericsError::NonScalarLoss(_))
    ));
}

#[test]
fn shape_mismatch_is_an_error() {
    let mut t = Tape::new();
    let a = t.leaf(Array::zeros(&[2, 3])).unwrap();
    let b = t.leaf(Array::zeros(&[2, 2])).unwrap();
    assert!(matches!(t.matmul(a, b), Err(NumericsError::Shape(_))));
    assert!(matches!(t.add(a, b), Err(NumericsError::Shape(_))));
}

#[test]
fn non_finite_results_trip_health_check() {
    let mut t = Tape::new();
    let x = t.leaf(Array::new(&[2], vec![0.0, 1.0]).unwrap()).unwrap();
    assert_eq!(t.log(x), Err(NumericsError::NonFinite { op: "log" }));
    let big = t.leaf(Array::scalar(1000.0)).unwrap();
    assert!(t.exp(big).is_err());
}

#[test]
fn dropout_is_seeded_and_identity_in_eval() {
    let x = Array::new(&[4, 8], (0..32).map(|i| i as f64 + 1.0).collect()).unwrap();
    let run = |training: bool| {
        let mut t = Tape::new();
        let v = t.leaf(x.clone()).unwrap();
        let y = t
            .dropout(v, 0.25, training, &mut SeedStream::new(4).rng())
            .unwrap();
        t.value(y).clone()
    };
    assert_eq!(run(true), run(true));
    assert_ne!(run(true), x);
    assert_eq!(run(false), x);
    // inverted scaling: kept entries are multiplied by 1 / (1 - rate)
    for (a, b) in run(true).data().iter().zip(x.data()) {
        assert!(*a == 0.0 || (a / b - 1.0 / 0.75).abs() < 1e-12);
    }
    let mut t = Tape::new();
    let v = t.leaf(x.clone()).unwrap();
    assert!(t
        .dropout(v, 1.0, true, &mut SeedStream::new(4).rng())
        .is_err());
}

#[test]
fn matmul_with_identity() {
    let a = Array::new(&[3, 3], vec![1., -2., 3., 0.5, 0., 7., -1., 2., 9.]).unwrap();
    let mut t = Tape::new();
    let i = t.leaf(Array::identity(3)).unwrap();
    let av = t.leaf(a.clone()).unwrap();
    let y = t.matmul(i, av).unwrap();
    assert_eq!(t.value(y), &a);
}
