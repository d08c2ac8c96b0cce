//! End-to-end runs on generated galleries: embeddings aligned with the
//! purchase clusters beat random ranking, noise textures do not.

use artrec_core::eval::{build_eval_cases, run_evaluation, TransactionLog};
use artrec_core::recsys::Aggregation;
use artrec_core::store::{build_evf_store, ingest_embeddings, Catalog, ExtractOptions, FeatureKind};
use artrec_core::synth::{write_dataset, SynthConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mean recall@k of uniformly random rankings, estimated by shuffling the
/// candidates of every case `rounds` times.
fn simulated_random_recall(log: &TransactionLog, items: &[String], k: usize, rounds: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = build_eval_cases(log);
    let mut total = 0.0;
    for case in &cases {
        let mut candidates: Vec<&String> = items.iter().filter(|i| !case.train_items.contains(*i)).collect();
        for _ in 0..rounds {
            candidates.shuffle(&mut rng);
            let hits = candidates[..k.min(candidates.len())].iter().filter(|c| case.target_items.contains(**c)).count();
            total += hits as f64 / case.target_items.len() as f64;
        }
    }
    total / (cases.len() * rounds) as f64
}

#[test]
fn embeddings_beat_random_and_noise_features() {
    let dir = tempfile::tempdir().unwrap();
    let files = write_dataset(&SynthConfig { seed: 17, ..SynthConfig::default() }, dir.path()).unwrap();
    let embeddings = ingest_embeddings(&files.embeddings).unwrap();
    let log = TransactionLog::load(&files.transactions).unwrap();
    let dnn = run_evaluation(&embeddings, &log, Aggregation::Sum, &[5, 10]).unwrap();

    let analytic: f64 =
        dnn.cases.iter().map(|c| (10.0 / c.candidates as f64).min(1.0)).sum::<f64>() / dnn.case_count as f64;
    let simulated = simulated_random_recall(&log, embeddings.ids(), 10, 200);
    assert!((simulated - analytic).abs() < 0.01, "simulated {simulated} analytic {analytic}");
    assert!(dnn.mean[&10].recall >= 5.0 * analytic, "{} vs {analytic}", dnn.mean[&10].recall);

    let catalog = Catalog::load(&files.catalog).unwrap();
    let evf = build_evf_store(&catalog, FeatureKind::EvfAll, ExtractOptions::default()).unwrap();
    let evf_report = run_evaluation(&evf.store, &log, Aggregation::Sum, &[5, 10]).unwrap();
    assert!(dnn.mean[&10].recall >= evf_report.mean[&10].recall);
    assert!(dnn.mean[&5].ndcg >= evf_report.mean[&5].ndcg);
}

#[test]
fn generated_files_are_byte_identical_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = SynthConfig { seed: 3, items: 20, users: 10, ..SynthConfig::default() };
    let fa = write_dataset(&config, a.path()).unwrap();
    let fb = write_dataset(&config, b.path()).unwrap();
    for (x, y) in [(fa.catalog, fb.catalog), (fa.transactions, fb.transactions), (fa.embeddings, fb.embeddings)] {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    for i in 0..20 {
        let name = format!("images/item_{i:04}.png");
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn one_cluster_dataset_ingests() {
    let dir = tempfile::tempdir().unwrap();
    let config = SynthConfig { clusters: 1, items: 12, users: 6, ..SynthConfig::default() };
    let files = write_dataset(&config, dir.path()).unwrap();
    let catalog = Catalog::load(&files.catalog).unwrap();
    assert_eq!(catalog.len(), 12);
    let embeddings = ingest_embeddings(&files.embeddings).unwrap();
    let log = TransactionLog::load(&files.transactions).unwrap();
    assert!(log.item_ids().iter().all(|id| embeddings.position(id).is_some()));
    run_evaluation(&embeddings, &log, Aggregation::Max, &[5]).unwrap();
}
