//! Time-forward replay of purchase histories and top-k ranking metrics.
//!
//! Every purchase session after a user's first becomes one test: the model
//! sees everything the user bought before that session and must rank the
//! session's items. Users who bought exactly one artwork are cold-start users
//! and are dropped.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::hash::Hash;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::recsys::{Aggregation, Recommender, UserProfile};
use crate::store::FeatureStore;
use crate::{Error, Result};

pub const DEFAULT_K_VALUES: [usize; 2] = [5, 10];

/// One purchase session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub user_id: String,
    pub txn_index: u64,
    pub items: BTreeSet<String>,
}

/// Purchase sessions sorted by user, then session index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransactionLog {
    transactions: Vec<Transaction>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransactionRecord {
    user_id: String,
    txn_index: u64,
    item_id: String,
}

impl TransactionLog {
    /// Groups `(user, session index, item)` rows into sessions.
    pub fn from_records<U, I>(records: impl IntoIterator<Item = (U, u64, I)>) -> Result<Self>
    where
        U: Into<String>,
        I: Into<String>,
    {
        let mut grouped: BTreeMap<(String, u64), BTreeSet<String>> = BTreeMap::new();
        for (user, idx, item) in records {
            let (user, item) = (user.into(), item.into());
            if user.is_empty() || item.is_empty() {
                return Err(Error::Format("transaction row with an empty user or item id".into()));
            }
            grouped.entry((user, idx)).or_default().insert(item);
        }
        let transactions = grouped
            .into_iter()
            .map(|((user_id, txn_index), items)| Transaction { user_id, txn_index, items })
            .collect();
        Ok(Self { transactions })
    }

    /// Reads `user_id,txn_index,item_id`, one row per purchased item.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let rows = reader
            .deserialize::<TransactionRecord>()
            .map(|r| {
                r.map(|r| (r.user_id, r.txn_index, r.item_id))
                    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_records(rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        for t in &self.transactions {
            for item in &t.items {
                writer
                    .serialize(TransactionRecord {
                        user_id: t.user_id.clone(),
                        txn_index: t.txn_index,
                        item_id: item.clone(),
                    })
                    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            }
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn user_count(&self) -> usize {
        self.transactions.iter().map(|t| t.user_id.as_str()).collect::<BTreeSet<_>>().len()
    }

    pub fn item_ids(&self) -> BTreeSet<&str> {
        self.transactions.iter().flat_map(|t| t.items.iter().map(String::as_str)).collect()
    }
}

/// One prediction test: rank `target_items` given `train_items`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub user_id: String,
    pub txn_index: u64,
    pub train_items: BTreeSet<String>,
    pub target_items: BTreeSet<String>,
}

/// Builds one case per session that has prior purchase history.
///
/// Items re-bought in a later session are already in the training set and
/// are removed from that session's target; a session left with no new item
/// yields no case.
pub fn build_eval_cases(log: &TransactionLog) -> Vec<EvalCase> {
    let mut cases = Vec::new();
    let txns = log.transactions();
    let mut start = 0;
    while start < txns.len() {
        let user = &txns[start].user_id;
        let end = start + txns[start..].iter().take_while(|t| &t.user_id == user).count();
        let history = &txns[start..end];
        start = end;

        let purchased: usize = history.iter().map(|t| t.items.len()).sum();
        if purchased <= 1 {
            continue;
        }
        let mut seen = BTreeSet::new();
        for t in history {
            if !seen.is_empty() {
                let target: BTreeSet<String> = t.items.difference(&seen).cloned().collect();
                if !target.is_empty() {
                    cases.push(EvalCase {
                        user_id: user.clone(),
                        txn_index: t.txn_index,
                        train_items: seen.clone(),
                        target_items: target,
                    });
                }
            }
            seen.extend(t.items.iter().cloned());
        }
    }
    cases
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Contract("k must be at least 1".into()));
    }
    Ok(())
}

fn hits<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> usize {
    ranked.iter().take(k).filter(|r| relevant.contains(*r)).count()
}

/// `|top-k ∩ relevant| / k`.
pub fn precision_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(hits(ranked, relevant, k) as f64 / k as f64)
}

/// `|top-k ∩ relevant| / |relevant|`.
pub fn recall_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Err(Error::Contract("recall needs a non-empty relevant set".into()));
    }
    Ok(hits(ranked, relevant, k) as f64 / relevant.len() as f64)
}

/// Binary-relevance nDCG with `1 / log2(position + 1)` discounts.
pub fn ndcg_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Err(Error::Contract("nDCG needs a non-empty relevant set".into()));
    }
    let discount = |pos: usize| 1.0 / ((pos + 1) as f64).log2();
    let dcg: f64 =
        ranked.iter().take(k).enumerate().filter(|(_, r)| relevant.contains(*r)).map(|(p, _)| discount(p + 1)).sum();
    let idcg: f64 = (1..=relevant.len().min(k)).map(discount).sum();
    Ok(dcg / idcg)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
}

impl RankMetrics {
    pub fn compute<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<Self> {
        Ok(Self {
            precision: precision_at_k(ranked, relevant, k)?,
            recall: recall_at_k(ranked, relevant, k)?,
            ndcg: ndcg_at_k(ranked, relevant, k)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub user_id: String,
    pub txn_index: u64,
    pub candidates: usize,
    pub targets: usize,
    pub metrics: BTreeMap<usize, RankMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub condition: String,
    pub feature_kind: String,
    pub aggregation: Aggregation,
    pub k_values: Vec<usize>,
    pub user_count: usize,
    pub case_count: usize,
    /// How sessions without prior history are treated.
    pub case_policy: String,
    /// Macro average over cases; zeros when there are no cases.
    pub mean: BTreeMap<usize, RankMetrics>,
    pub cases: Vec<CaseResult>,
}

pub const CASE_POLICY: &str = "cold-start users (exactly one purchased item) removed; \
    a user's first session generates no case; re-bought items are dropped from targets";

/// Replays every case against `store`, ranking the full store minus the
/// user's training items.
pub fn run_evaluation(
    store: &FeatureStore,
    log: &TransactionLog,
    agg: Aggregation,
    k_values: &[usize],
) -> Result<MetricsReport> {
    if k_values.is_empty() {
        return Err(Error::Contract("at least one k is required".into()));
    }
    for &k in k_values {
        check_k(k)?;
    }
    if let Some(missing) = log.item_ids().into_iter().find(|id| store.position(id).is_none()) {
        return Err(Error::MissingItem(missing.to_string()));
    }

    let cases = build_eval_cases(log);
    let max_k = *k_values.iter().max().unwrap();
    let recommender = Recommender::new(store, agg);
    let results = cases
        .par_iter()
        .map(|case| {
            let profile = UserProfile { user_id: case.user_id.clone(), items: case.train_items.clone() };
            let ranked = recommender.recommend(&profile, max_k)?;
            let ids = ranked.ids();
            let relevant: HashSet<&str> = case.target_items.iter().map(String::as_str).collect();
            let metrics = k_values
                .iter()
                .map(|&k| Ok((k, RankMetrics::compute(&ids, &relevant, k)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(CaseResult {
                user_id: case.user_id.clone(),
                txn_index: case.txn_index,
                candidates: store.len() - case.train_items.len(),
                targets: case.target_items.len(),
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean = BTreeMap::new();
    for &k in k_values {
        let mut m = RankMetrics::default();
        if !results.is_empty() {
            let n = results.len() as f64;
            for r in &results {
                m.precision += r.metrics[&k].precision;
                m.recall += r.metrics[&k].recall;
                m.ndcg += r.metrics[&k].ndcg;
            }
            m.precision /= n;
            m.recall /= n;
            m.ndcg /= n;
        }
        mean.insert(k, m);
    }

    let user_count = results.iter().map(|r| r.user_id.as_str()).collect::<BTreeSet<_>>().len();
    Ok(MetricsReport {
        condition: store.kind().table_label(),
        feature_kind: store.kind().to_string(),
        aggregation: agg,
        k_values: k_values.to_vec(),
        user_count,
        case_count: results.len(),
        case_policy: CASE_POLICY.to_string(),
        mean,
        cases: results,
    })
}

/// Column headers of the results table for the given cut-offs.
pub fn table_columns(k_values: &[usize]) -> Vec<String> {
    let mut cols = vec!["name".to_string()];
    for prefix in ["ndcg", "rec", "prec"] {
        cols.extend(k_values.iter().map(|k| format!("{prefix}@{k}")));
    }
    cols
}

/// Writes one row per report: `name,ndcg@k..,rec@k..,prec@k..`.
pub fn write_table_csv(reports: &[MetricsReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let k_values = reports.first().map(|r| r.k_values.clone()).unwrap_or_else(|| DEFAULT_K_VALUES.to_vec());
    if let Some(r) = reports.iter().find(|r| r.k_values != k_values) {
        return Err(Error::Contract(format!(
            "report `{}` uses k={:?}, table uses k={k_values:?}",
            r.condition, r.k_values
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    writer.write_record(table_columns(&k_values)).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![r.condition.clone()];
        row.extend(k_values.iter().map(|k| format!("{:.6}", r.mean[k].ndcg)));
        row.extend(k_values.iter().map(|k| format!("{:.6}", r.mean[k].recall)));
        row.extend(k_values.iter().map(|k| format!("{:.6}", r.mean[k].precision)));
        writer.write_record(row).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| Error::Format(e.to_string()))?.flush().map_err(|e| Error::io(path, e))
}

/// A parsed results table: header plus `(name, values)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

pub fn read_table_csv(path: impl AsRef<Path>) -> Result<ResultsTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let fmt_err = |msg: String| Error::Format(format!("{}: {msg}", path.display()));
    let columns: Vec<String> =
        reader.headers().map_err(|e| fmt_err(e.to_string()))?.iter().map(str::to_string).collect();
    if columns.first().map(String::as_str) != Some("name") {
        return Err(fmt_err("first column must be `name`".into()));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| fmt_err(format!("`{v}` is not a number")))?;
                if (0.0..=1.0).contains(&x) {
                    Ok(x)
                } else {
                    Err(fmt_err(format!("metric {x} outside [0, 1]")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((rec[0].to_string(), values));
    }
    Ok(ResultsTable { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::FeatureKind;
    use proptest::prelude::*;

    fn set(items: &[&'static str]) -> HashSet<&'static str> {
        items.iter().copied().collect()
    }

    fn btree(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    const RANKED: [&str; 5] = ["a", "b", "c", "d", "e"];

    #[test]
    fn precision_examples() {
        assert_eq!(precision_at_k(&RANKED, &set(&["a", "c"]), 5).unwrap(), 0.4);
        assert_eq!(precision_at_k(&RANKED, &set(&["x"]), 5).unwrap(), 0.0);
        assert_eq!(precision_at_k(&RANKED, &set(&["a", "b", "c", "d", "e", "f"]), 5).unwrap(), 1.0);
        assert!(precision_at_k(&RANKED, &set(&["a"]), 0).is_err());
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall_at_k(&RANKED, &set(&["a", "c"]), 5).unwrap(), 1.0);
        assert_eq!(recall_at_k(&RANKED, &set(&["a", "z"]), 5).unwrap(), 0.5);
        assert_eq!(recall_at_k(&RANKED, &set(&["y", "z"]), 5).unwrap(), 0.0);
        assert!(recall_at_k(&RANKED, &set(&[]), 5).is_err());
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&RANKED, &set(&["a", "b"]), 5).unwrap(), 1.0);
        let v = ndcg_at_k(&RANKED, &set(&["a", "c"]), 5).unwrap();
        assert!((v - 0.9197207891481876).abs() < 1e-12);
        assert_eq!(ndcg_at_k(&RANKED, &set(&["z"]), 5).unwrap(), 0.0);
        assert!(ndcg_at_k(&RANKED, &set(&[]), 5).is_err());
        // Ideal gain is capped at k relevant items.
        assert_eq!(ndcg_at_k(&RANKED, &set(&["a", "b", "q", "r"]), 2).unwrap(), 1.0);
    }

    fn log(rows: &[(&str, u64, &str)]) -> TransactionLog {
        TransactionLog::from_records(rows.iter().map(|&(u, t, i)| (u, t, i))).unwrap()
    }

    #[test]
    fn three_sessions_give_two_cases() {
        let cases = build_eval_cases(&log(&[("u", 1, "p1"), ("u", 2, "p2"), ("u", 3, "p3a"), ("u", 3, "p3b")]));
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].train_items, btree(&["p1"]));
        assert_eq!(cases[0].target_items, btree(&["p2"]));
        assert_eq!(cases[1].train_items, btree(&["p1", "p2"]));
        assert_eq!(cases[1].target_items, btree(&["p3a", "p3b"]));
    }

    #[test]
    fn cold_start_and_single_session_users() {
        assert!(build_eval_cases(&log(&[("solo", 1, "x")])).is_empty());
        assert!(build_eval_cases(&log(&[("bulk", 1, "x"), ("bulk", 1, "y"), ("bulk", 1, "z")])).is_empty());
    }

    #[test]
    fn rebought_items_leave_targets() {
        let cases = build_eval_cases(&log(&[("u", 1, "a"), ("u", 2, "a"), ("u", 3, "a"), ("u", 3, "b")]));
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].target_items, btree(&["b"]));
    }

    fn toy_store() -> FeatureStore {
        FeatureStore::new(
            FeatureKind::Embedding,
            2,
            ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect(),
            vec![1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.1, 0.9],
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_case_mean_equals_case() {
        let store = toy_store();
        let report = run_evaluation(&store, &log(&[("u", 1, "a"), ("u", 2, "b")]), Aggregation::Sum, &[1, 2]).unwrap();
        assert_eq!(report.case_count, 1);
        assert_eq!(report.user_count, 1);
        assert_eq!(report.mean[&1], report.cases[0].metrics[&1]);
        assert_eq!(report.mean[&1].precision, 1.0);
        assert_eq!(report.cases[0].candidates, 3);
        assert_eq!(report.condition, "DNN");
    }

    #[test]
    fn empty_case_list_reports_zero() {
        let report = run_evaluation(&toy_store(), &log(&[("u", 1, "a")]), Aggregation::Sum, &[5]).unwrap();
        assert_eq!(report.case_count, 0);
        assert_eq!(report.mean[&5], RankMetrics::default());
    }

    #[test]
    fn missing_item_is_named() {
        let err =
            run_evaluation(&toy_store(), &log(&[("u", 1, "a"), ("u", 2, "zz")]), Aggregation::Sum, &[5]).unwrap_err();
        assert!(matches!(err, Error::MissingItem(id) if id == "zz"));
    }

    #[test]
    fn log_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "user_id,txn_index,item_id\nu2,5,b\nu1,1,a\nu1,1,c\nu2,3,a\n").unwrap();
        let l = TransactionLog::load(&p).unwrap();
        assert_eq!(l.transactions().len(), 3);
        assert_eq!(l.transactions()[0].items, btree(&["a", "c"]));
        assert_eq!(l.user_count(), 2);
        let out = dir.path().join("copy.csv");
        l.save(&out).unwrap();
        assert_eq!(TransactionLog::load(&out).unwrap(), l);
    }

    #[test]
    fn table_csv_round_trip() {
        let report =
            run_evaluation(&toy_store(), &log(&[("u", 1, "a"), ("u", 2, "b")]), Aggregation::Sum, &[5, 10]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("table.csv");
        write_table_csv(std::slice::from_ref(&report), &p).unwrap();
        let t = read_table_csv(&p).unwrap();
        assert_eq!(t.columns, ["name", "ndcg@5", "ndcg@10", "rec@5", "rec@10", "prec@5", "prec@10"]);
        assert_eq!(t.rows[0].0, "DNN");
        assert!((t.rows[0].1[4] - report.mean[&5].precision).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn case_building_ignores_record_order(
            rows in proptest::collection::vec((0u8..6, 0u64..5, 0u8..20), 0..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let rows: Vec<(String, u64, String)> =
                rows.into_iter().map(|(u, t, i)| (format!("u{u}"), t, format!("i{i}"))).collect();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = build_eval_cases(&TransactionLog::from_records(rows).unwrap());
            let b = build_eval_cases(&TransactionLog::from_records(shuffled).unwrap());
            prop_assert_eq!(&a, &b);
            for c in &a {
                prop_assert!(!c.train_items.is_empty());
                prop_assert!(!c.target_items.is_empty());
                prop_assert!(c.train_items.is_disjoint(&c.target_items));
            }
        }
    }
}
