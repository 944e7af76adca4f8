//! Loading, standardization, splitting and synthetic generation.

mod common;

use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uncertal::data::{
    make_synthetic, parse, split_and_seed, standardize, DataError, Dataset, Format, Rng,
    SyntheticSpec,
};
use uncertal::model::Label;

#[test]
fn two_line_libsvm_file() {
    let ds = parse("+1 1:1.0\n-1 1:-1.0\n", Format::Libsvm, "tiny").unwrap();
    assert_eq!((ds.len(), ds.dim()), (2, 1));
    assert_eq!(ds.labels(), &[Label::Pos, Label::Neg]);
    assert_eq!(ds.features(), &[1.0, -1.0]);
}

#[test]
fn csv_with_header_and_trailing_label() {
    let text = "a,b,c,label\n1,2,3,1\n4,5,6,-1\n7,8,9,1\n0.5,0.25,0,-1\n";
    let ds = parse(text, Format::Csv, "t").unwrap();
    assert_eq!((ds.len(), ds.dim()), (4, 3));
    assert_eq!(ds.row(3), &[0.5, 0.25, 0.0]);
    assert_eq!(ds.label(2), Label::Pos);
}

#[test]
fn label_sets_are_remapped() {
    let zero_one = parse("0 1:1\n1 1:2\n", Format::Libsvm, "a").unwrap();
    assert_eq!(zero_one.labels(), &[Label::Neg, Label::Pos]);
    let one_two = parse("1 1:1\n2 1:2\n", Format::Libsvm, "b").unwrap();
    assert_eq!(one_two.labels(), &[Label::Pos, Label::Neg]);
    assert!(matches!(
        parse("1 1:1\n3 1:2\n", Format::Libsvm, "c"),
        Err(DataError::LabelSet(_))
    ));
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(
        parse("+1 1:1\n+1 1:2\n", Format::Libsvm, "s"),
        Err(DataError::SingleClass(_))
    ));
    match parse("+1 1:1\n-1 1:x\n", Format::Libsvm, "p") {
        Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(parse("+1 1:NaN\n-1 1:1\n", Format::Libsvm, "n").is_err());
    assert!(parse("1,nan,1\n2,3,-1\n", Format::Csv, "n").is_err());
}

#[test]
fn loading_preserves_row_order() {
    let text: String = (0..50)
        .map(|i| format!("{} 1:{i} 2:{}\n", if i % 3 == 0 { "+1" } else { "-1" }, -i))
        .collect();
    let ds = parse(&text, Format::Libsvm, "o").unwrap();
    for i in 0..50 {
        assert_eq!(ds.row(i), &[i as f64, -(i as f64)]);
    }
}

#[test]
fn standardization_examples() {
    let ds = Dataset::new(
        "s",
        vec![1.0, 5.0, 3.0, 5.0, 9.0, 5.0],
        2,
        vec![Label::Pos, Label::Neg, Label::Pos],
    )
    .unwrap();
    let (_, z) = standardize(&ds, &[0, 1]);
    assert_eq!(z.row(0), &[-1.0, 0.0]);
    assert_eq!(z.row(1), &[1.0, 0.0]);
    // the held-out row uses the training statistics: (9 - 2) / 1
    assert_eq!(z.row(2), &[7.0, 0.0]);
}

#[test]
fn standardized_moments_and_idempotence() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let n = rng.random_range(5..80);
        let dim = rng.random_range(1..6);
        let ds = common::random_dataset(&mut rng, "m", n, dim);
        let rows: Vec<usize> = (0..n)
            .filter(|_| rng.random_bool(0.6))
            .chain([0, 1])
            .collect();
        let mut rows = rows;
        rows.sort_unstable();
        rows.dedup();
        let (_, z) = standardize(&ds, &rows);
        for j in 0..dim {
            let col: Vec<f64> = rows.iter().map(|&i| z.row(i)[j]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let std =
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            assert!(mean.abs() < 1e-12, "mean {mean}");
            assert!((std - 1.0).abs() < 1e-12, "std {std}");
        }
        let (_, again) = standardize(&z, &rows);
        for (a, b) in z.features().iter().zip(again.features()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn seed_selection_is_uniform_within_three_sigma() {
    let per_class = 10;
    let labels: Vec<Label> = (0..2 * per_class)
        .map(|i| {
            if i < per_class {
                Label::Pos
            } else {
                Label::Neg
            }
        })
        .collect();
    let features: Vec<f64> = (0..2 * per_class).map(|i| i as f64).collect();
    let ds = Dataset::new("u", features, 1, labels).unwrap();
    let draws = 10_000;
    let mut counts = vec![0usize; ds.len()];
    let mut rng = Rng::new(2024);
    for _ in 0..draws {
        let pool = split_and_seed(&ds, &mut rng).unwrap();
        let l = pool.labeled();
        assert_eq!(l.len(), 2);
        assert_ne!(ds.label(l[0]), ds.label(l[1]));
        for &i in l {
            counts[i] += 1;
        }
    }
    // Each instance is its class's seed with probability 1 / per_class.
    let p = 1.0 / per_class as f64;
    let mean = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for (i, &c) in counts.iter().enumerate() {
        assert!(
            (c as f64 - mean).abs() <= 3.0 * sigma,
            "instance {i}: {c} vs {mean} +- {}",
            3.0 * sigma
        );
    }
}

#[test]
fn minimal_split_and_determinism() {
    let ds = Dataset::new(
        "four",
        vec![0.0, 1.0, 2.0, 3.0],
        1,
        vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg],
    )
    .unwrap();
    let a = split_and_seed(&ds, &mut Rng::new(3)).unwrap();
    assert_eq!(
        (a.train().len(), a.test().len(), a.labeled().len()),
        (2, 2, 2)
    );
    assert!(a.unlabeled().is_empty());
    assert_eq!(a, split_and_seed(&ds, &mut Rng::new(3)).unwrap());
}

#[test]
fn synthetic_sample_means_match_the_requested_means() {
    let spec = SyntheticSpec {
        per_class: 100,
        mean_pos: [2.0, 0.0],
        mean_neg: [-2.0, 0.0],
        covariance: [1.0, 0.0, 0.0, 1.0],
        seed: 9,
    };
    let ds = make_synthetic(&spec).unwrap();
    assert_eq!(ds.len(), 200);
    for (label, mean) in [(Label::Pos, spec.mean_pos), (Label::Neg, spec.mean_neg)] {
        let rows: Vec<&[f64]> = (0..ds.len())
            .filter(|&i| ds.label(i) == label)
            .map(|i| ds.row(i))
            .collect();
        for j in 0..2 {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
            assert!((m - mean[j]).abs() < 0.5, "{label:?} coordinate {j}: {m}");
        }
    }
    assert_eq!(ds, make_synthetic(&spec).unwrap());
    let one = make_synthetic(&SyntheticSpec {
        per_class: 1,
        ..spec
    })
    .unwrap();
    assert_eq!(one.class_counts(), (1, 1));
    let bad = SyntheticSpec {
        covariance: [1.0, 2.0, 2.0, 1.0],
        ..spec
    };
    assert!(matches!(
        make_synthetic(&bad),
        Err(DataError::NotPositiveDefinite)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn libsvm_round_trip(seed in any::<u64>(), n in 2usize..40, dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = common::random_dataset(&mut rng, "r", n.max(4), dim);
        // exercise magnitudes well beyond the generator's range
        let scaled: Vec<f64> = ds.features().iter().map(|v| v * 10f64.powi(rng.random_range(-8..8))).collect();
        ds = Dataset::new("r", scaled, dim, ds.labels().to_vec()).unwrap();
        let mut buf = Vec::new();
        ds.write_libsvm(&mut buf).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap(), Format::Libsvm, "r").unwrap();
        prop_assert_eq!(back.labels(), ds.labels());
        for (a, b) in back.features().iter().zip(ds.features()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn pool_invariants_hold_along_any_query_sequence(seed in any::<u64>(), n in 4usize..40, picks in proptest::collection::vec(any::<usize>(), 0..40)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = common::random_dataset(&mut rng, "p", n, 2);
        let mut pool = split_and_seed(&ds, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(pool.train().len(), n.div_ceil(2));
        prop_assert_eq!(pool.test().len(), n / 2);
        pool.check_invariants(n).unwrap();
        for k in picks {
            if pool.unlabeled().is_empty() {
                break;
            }
            let i = pool.unlabeled()[k % pool.unlabeled().len()];
            pool.query(i).unwrap();
            pool.check_invariants(n).unwrap();
            prop_assert!(pool.query(i).is_err());
        }
        let (mut pos, mut neg) = (false, false);
        for &i in pool.labeled() {
            pos |= ds.label(i) == Label::Pos;
            neg |= ds.label(i) == Label::Neg;
        }
        prop_assert!(pos && neg);
        prop_assert!(pool.train().iter().all(|i| !pool.test().contains(i)));
    }
}
