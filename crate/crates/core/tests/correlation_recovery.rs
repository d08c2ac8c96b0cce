use artrec_core::correlation::{
    correlate_all, pearson, read_sorted_curve, spearman, write_correlation_report, CorrelationMethod,
};
use artrec_core::evf::{EvfScalars, LbpHistogram, ScalarFeature};
use artrec_core::store::{assemble_condition, EvfTable, FeatureKind, FeatureStore, ItemFeatures};
use artrec_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_scalars(n: usize, rng: &mut ChaCha8Rng) -> Vec<EvfScalars> {
    (0..n)
        .map(|_| EvfScalars {
            brightness: rng.random_range(0.0..255.0),
            saturation: rng.random_range(0.0..1.0),
            sharpness: rng.random_range(0.0..5.0),
            colorfulness: rng.random_range(0.0..150.0),
            naturalness: rng.random_range(0.0..1.0),
            rgb_contrast: rng.random_range(0.0..16000.0),
            entropy: rng.random_range(0.0..8.0),
        })
        .collect()
}

fn scalar_store(scalars: &[EvfScalars]) -> FeatureStore {
    let table = EvfTable {
        items: scalars
            .iter()
            .enumerate()
            .map(|(i, s)| ItemFeatures {
                item_id: format!("item{i}"),
                scalars: *s,
                lbp: LbpHistogram::from_counts(&[1; 256]),
            })
            .collect(),
        max_side: None,
    };
    assemble_condition(&table, FeatureKind::EvfNoLbp).unwrap().store
}

fn embedding_store(columns: &[Vec<f64>]) -> FeatureStore {
    let n = columns[0].len();
    let data = (0..n).flat_map(|i| columns.iter().map(move |c| c[i])).collect();
    FeatureStore::new(
        FeatureKind::Embedding,
        columns.len(),
        (0..n).map(|i| format!("item{i}")).collect(),
        data,
        vec![],
        None,
    )
    .unwrap()
}

#[test]
fn planted_dimension_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 200;
    let scalars = random_scalars(n, &mut rng);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut columns: Vec<Vec<f64>> = (0..20).map(|_| (0..n).map(|_| rng.random_range(0.0..50.0)).collect()).collect();
    columns[5] = scalars.iter().map(|s| 2.0 * s.brightness + noise.sample(&mut rng)).collect();
    // A dead unit must not win anything.
    columns[9] = vec![0.0; n];

    for method in [CorrelationMethod::Pearson, CorrelationMethod::Spearman] {
        let table = correlate_all(&embedding_store(&columns), &scalar_store(&scalars), method).unwrap();
        assert_eq!(table.method, method);
        assert_eq!(table.skipped_dimensions, vec![9]);
        let b = table.feature(ScalarFeature::Brightness).unwrap();
        assert_eq!(b.index_of_max, 5);
        assert!(b.max_corr >= 0.95);
        for fc in &table.features {
            assert!(fc.per_dimension[9].is_none());
            assert!(fc.index_of_max != 9 && fc.index_of_min != 9);
            assert!(-1.0 <= fc.min_corr && fc.min_corr <= fc.max_corr && fc.max_corr <= 1.0);
        }
    }
}

#[test]
fn embedded_scalar_column_reaches_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 60;
    let scalars = random_scalars(n, &mut rng);
    let mut columns: Vec<Vec<f64>> = (0..8).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    columns[3] = scalars.iter().map(|s| s.entropy).collect();
    let table = correlate_all(&embedding_store(&columns), &scalar_store(&scalars), CorrelationMethod::Pearson).unwrap();
    let e = table.feature(ScalarFeature::Entropy).unwrap();
    assert_eq!(e.index_of_max, 3);
    assert!((e.max_corr - 1.0).abs() <= 1e-12);
}

#[test]
fn item_order_does_not_matter_but_item_sets_do() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 30;
    let scalars = random_scalars(n, &mut rng);
    let columns: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    let emb = embedding_store(&columns);
    let reversed = FeatureStore::new(
        FeatureKind::Embedding,
        4,
        emb.ids().iter().rev().cloned().collect(),
        (0..n).rev().flat_map(|i| emb.row(i).to_vec()).collect(),
        vec![],
        None,
    )
    .unwrap();
    let s = scalar_store(&scalars);
    let a = correlate_all(&emb, &s, CorrelationMethod::Pearson).unwrap();
    let b = correlate_all(&reversed, &s, CorrelationMethod::Pearson).unwrap();
    for (x, y) in a.features.iter().zip(&b.features) {
        assert_eq!(x.index_of_max, y.index_of_max);
        assert!((x.max_corr - y.max_corr).abs() <= 1e-12);
    }

    let fewer = scalar_store(&scalars[..n - 1]);
    match correlate_all(&emb, &fewer, CorrelationMethod::Pearson) {
        Err(Error::ItemMismatch { only_left, only_right }) => {
            assert_eq!(only_left, vec![format!("item{}", n - 1)]);
            assert!(only_right.is_empty());
        }
        other => panic!("expected an item mismatch, got {other:?}"),
    }
}

#[test]
fn sorted_curve_endpoints_are_the_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = 50;
    let scalars = random_scalars(n, &mut rng);
    let mut columns: Vec<Vec<f64>> = (0..30).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    columns[2] = vec![1.5; n];
    let table = correlate_all(&embedding_store(&columns), &scalar_store(&scalars), CorrelationMethod::Pearson).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_correlation_report(&table, dir.path()).unwrap();
    for fc in &table.features {
        let curve = fc.sorted_curve();
        assert_eq!(curve.len(), 29);
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(*curve.first().unwrap(), (fc.index_of_min, fc.min_corr));
        assert_eq!(*curve.last().unwrap(), (fc.index_of_max, fc.max_corr));
        let on_disk = read_sorted_curve(dir.path().join(format!("{}_sorted.csv", fc.feature))).unwrap();
        assert_eq!(on_disk, curve);
    }
}

proptest! {
    #[test]
    fn pearson_is_affine_invariant_and_symmetric(
        xs in prop::collection::vec(-100.0f64..100.0, 3..40),
        seed in any::<u64>(),
        a in 0.01f64..100.0,
        b in -1000.0f64..1000.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assume!(pearson(&xs, &ys).is_ok());
        let r = pearson(&xs, &ys).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        prop_assert!((pearson(&moved, &ys).unwrap() - r).abs() <= 1e-12);
        prop_assert!((pearson(&ys, &moved).unwrap() - r).abs() <= 1e-12);
        prop_assert!((pearson(&ys, &xs).unwrap() - r).abs() <= 1e-15);
    }

    #[test]
    fn spearman_ignores_increasing_transforms(xs in prop::collection::vec(-5.0f64..5.0, 3..40), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assume!(spearman(&xs, &ys).is_ok());
        let cubed: Vec<f64> = xs.iter().map(|x| x.powi(3) + x.exp()).collect();
        prop_assert!((spearman(&cubed, &ys).unwrap() - spearman(&xs, &ys).unwrap()).abs() <= 1e-12);
    }
}
