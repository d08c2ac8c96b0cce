//! Correlation between embedding dimensions and explicit visual features.
//!
//! For each scalar feature the analysis correlates the feature against every
//! embedding dimension across the shared items, then reports the strongest
//! positive and negative dimensions together with the full per-dimension
//! curve.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evf::ScalarFeature;
use crate::store::{FeatureKind, FeatureStore};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
        })
    }
}

impl FromStr for CorrelationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(CorrelationMethod::Pearson),
            "spearman" => Ok(CorrelationMethod::Spearman),
            _ => Err(Error::Format(format!("unknown correlation method `{s}`"))),
        }
    }
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!("sequences have different lengths ({} and {})", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations".into()));
    }
    if is_constant(x) || is_constant(y) {
        return Err(Error::UndefinedCorrelation("constant sequence".into()));
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(pearson_unchecked(x, y))
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean of (i+1)..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = rank;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(pearson_unchecked(&average_ranks(x), &average_ranks(y)))
}

/// Strongest correlations of one scalar feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: ScalarFeature,
    pub max_corr: f64,
    pub index_of_max: usize,
    pub min_corr: f64,
    pub index_of_min: usize,
    /// Correlation per embedding dimension; `None` for skipped dimensions.
    #[serde(skip)]
    pub per_dimension: Vec<Option<f64>>,
}

impl FeatureCorrelation {
    /// `(dimension, correlation)` pairs sorted ascending by correlation,
    /// skipped dimensions omitted. Ties keep dimension order.
    pub fn sorted_curve(&self) -> Vec<(usize, f64)> {
        let mut curve: Vec<(usize, f64)> =
            self.per_dimension.iter().enumerate().filter_map(|(d, c)| c.map(|c| (d, c))).collect();
        curve.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        curve
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub method: CorrelationMethod,
    pub items: usize,
    pub dimensions: usize,
    /// Constant embedding dimensions, excluded from every feature.
    pub skipped_dimensions: Vec<usize>,
    /// Features constant across items, for which no correlation exists.
    pub skipped_features: Vec<ScalarFeature>,
    pub features: Vec<FeatureCorrelation>,
}

impl CorrelationTable {
    pub fn feature(&self, f: ScalarFeature) -> Option<&FeatureCorrelation> {
        self.features.iter().find(|c| c.feature == f)
    }
}

/// Correlates every scalar column of `scalars` (extracted values, not the
/// normalized ones) with every dimension of `embeddings`, aligning items by id.
pub fn correlate_all(
    embeddings: &FeatureStore,
    scalars: &FeatureStore,
    method: CorrelationMethod,
) -> Result<CorrelationTable> {
    let left: BTreeSet<&str> = embeddings.ids().iter().map(String::as_str).collect();
    let right: BTreeSet<&str> = scalars.ids().iter().map(String::as_str).collect();
    if left != right {
        return Err(Error::ItemMismatch {
            only_left: left.difference(&right).map(|s| s.to_string()).collect(),
            only_right: right.difference(&left).map(|s| s.to_string()).collect(),
        });
    }
    let columns = scalars.raw_scalar_columns();
    if columns.is_empty() {
        return Err(Error::Contract(format!("store of kind {} has no scalar feature columns", scalars.kind())));
    }
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two items".into()));
    }

    // Scalars reordered to the embedding store's row order.
    let order: Vec<usize> = embeddings.ids().iter().map(|id| scalars.position(id).unwrap()).collect();

    let transform = |v: Vec<f64>| match method {
        CorrelationMethod::Pearson => v,
        CorrelationMethod::Spearman => average_ranks(&v),
    };

    let dims: Vec<Option<Vec<f64>>> = (0..embeddings.dim())
        .into_par_iter()
        .map(|d| {
            let col = embeddings.column(d);
            (!is_constant(&col)).then(|| transform(col))
        })
        .collect();
    let skipped_dimensions = dims.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(d, _)| d).collect();

    let mut features = Vec::new();
    let mut skipped_features = Vec::new();
    for (feature, raw) in columns {
        let aligned: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
        if is_constant(&aligned) {
            skipped_features.push(feature);
            continue;
        }
        let x = transform(aligned);
        let per_dimension: Vec<Option<f64>> =
            dims.par_iter().map(|col| col.as_ref().map(|c| pearson_unchecked(&x, c))).collect();

        let mut best: Option<(usize, f64, usize, f64)> = None;
        for (d, c) in per_dimension.iter().enumerate() {
            let Some(c) = *c else { continue };
            best = Some(match best {
                None => (d, c, d, c),
                Some((imax, max, imin, min)) => {
                    let (imax, max) = if c > max { (d, c) } else { (imax, max) };
                    let (imin, min) = if c < min { (d, c) } else { (imin, min) };
                    (imax, max, imin, min)
                }
            });
        }
        let Some((index_of_max, max_corr, index_of_min, min_corr)) = best else {
            return Err(Error::UndefinedCorrelation("every embedding dimension is constant".into()));
        };
        features.push(FeatureCorrelation { feature, max_corr, index_of_max, min_corr, index_of_min, per_dimension });
    }

    Ok(CorrelationTable {
        method,
        items: n,
        dimensions: embeddings.dim(),
        skipped_dimensions,
        skipped_features,
        features,
    })
}

/// Checks that `store` holds embeddings; a convenience for callers taking
/// stores from files.
pub fn require_embedding(store: &FeatureStore) -> Result<()> {
    if store.kind() != FeatureKind::Embedding {
        return Err(Error::Contract(format!("expected an embedding store, got kind {}", store.kind())));
    }
    Ok(())
}

/// Writes `correlations.json` plus, per feature, `<feature>_curve.csv`
/// (`dimension,correlation` in dimension order, blank when skipped) and
/// `<feature>_sorted.csv` (`rank,dimension,correlation` ascending).
/// Returns the paths written.
pub fn write_correlation_report(table: &CorrelationTable, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let json_path = dir.join("correlations.json");
    let json = serde_json::to_string_pretty(table)
        .map_err(|e| Error::Format(format!("cannot serialize correlation table: {e}")))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    written.push(json_path);

    for fc in &table.features {
        let curve_path = dir.join(format!("{}_curve.csv", fc.feature));
        write_lines(
            &curve_path,
            "dimension,correlation",
            fc.per_dimension.iter().enumerate().map(|(d, c)| match c {
                Some(c) => format!("{d},{c}"),
                None => format!("{d},"),
            }),
        )?;
        written.push(curve_path);

        let sorted_path = dir.join(format!("{}_sorted.csv", fc.feature));
        write_lines(
            &sorted_path,
            "rank,dimension,correlation",
            fc.sorted_curve().into_iter().enumerate().map(|(r, (d, c))| format!("{r},{d},{c}")),
        )?;
        written.push(sorted_path);
    }
    Ok(written)
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for line in lines {
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a `<feature>_sorted.csv` curve back as `(dimension, correlation)`.
pub fn read_sorted_curve(path: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    reader
        .deserialize::<(usize, usize, f64)>()
        .map(|r| r.map(|(_, d, c)| (d, c)).map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}
