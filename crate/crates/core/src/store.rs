//! Per-item feature matrices and the files they come from.
//!
//! A [`FeatureStore`] holds one dense row per catalog item for a single
//! [`FeatureKind`]. Stores are built either by extracting explicit visual
//! features from a [`Catalog`] of images or by ingesting an embedding CSV
//! produced elsewhere, and persist to a versioned binary container that
//! round-trips bit-exactly.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evf::{extract_all, EvfScalars, LbpHistogram, ScalarFeature, LBP_BINS};
use crate::imaging::decode_image;
use crate::{Error, Result};

/// Which descriptor a store's rows hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Externally computed deep embedding of arbitrary width.
    Embedding,
    /// Seven normalized scalars followed by the 256 LBP bins.
    EvfAll,
    /// Seven normalized scalars.
    EvfNoLbp,
    Lbp,
    /// One normalized scalar.
    Single(ScalarFeature),
}

impl FeatureKind {
    /// The experimental conditions in the order of the results table.
    pub const TABLE_ROWS: [FeatureKind; 11] = [
        FeatureKind::Embedding,
        FeatureKind::EvfAll,
        FeatureKind::EvfNoLbp,
        FeatureKind::Lbp,
        FeatureKind::Single(ScalarFeature::Brightness),
        FeatureKind::Single(ScalarFeature::Colorfulness),
        FeatureKind::Single(ScalarFeature::Contrast),
        FeatureKind::Single(ScalarFeature::Entropy),
        FeatureKind::Single(ScalarFeature::Naturalness),
        FeatureKind::Single(ScalarFeature::Saturation),
        FeatureKind::Single(ScalarFeature::Sharpness),
    ];

    /// Row label used in the results table.
    pub fn table_label(self) -> String {
        match self {
            FeatureKind::Embedding => "DNN".to_string(),
            FeatureKind::EvfAll => "EVF (all features)".to_string(),
            FeatureKind::EvfNoLbp => "EVF (all, except LBP)".to_string(),
            FeatureKind::Lbp => "EVF (LBP)".to_string(),
            FeatureKind::Single(f) => format!("EVF ({f})"),
        }
    }

    /// Row width the kind requires, `None` for embeddings.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            FeatureKind::Embedding => None,
            FeatureKind::EvfAll => Some(ScalarFeature::ALL.len() + LBP_BINS),
            FeatureKind::EvfNoLbp => Some(ScalarFeature::ALL.len()),
            FeatureKind::Lbp => Some(LBP_BINS),
            FeatureKind::Single(_) => Some(1),
        }
    }

    /// Scalar features occupying the leading columns, in column order.
    pub fn scalar_columns(self) -> Vec<ScalarFeature> {
        match self {
            FeatureKind::EvfAll | FeatureKind::EvfNoLbp => ScalarFeature::ALL.to_vec(),
            FeatureKind::Single(f) => vec![f],
            FeatureKind::Embedding | FeatureKind::Lbp => Vec::new(),
        }
    }

    fn includes_lbp(self) -> bool {
        matches!(self, FeatureKind::EvfAll | FeatureKind::Lbp)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Embedding => f.write_str("embedding"),
            FeatureKind::EvfAll => f.write_str("evf_all"),
            FeatureKind::EvfNoLbp => f.write_str("evf_no_lbp"),
            FeatureKind::Lbp => f.write_str("lbp"),
            FeatureKind::Single(s) => write!(f, "single:{s}"),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" | "dnn" => Ok(FeatureKind::Embedding),
            "evf_all" => Ok(FeatureKind::EvfAll),
            "evf_no_lbp" => Ok(FeatureKind::EvfNoLbp),
            "lbp" => Ok(FeatureKind::Lbp),
            _ => match s.strip_prefix("single:") {
                Some(name) => Ok(FeatureKind::Single(name.parse()?)),
                None => Err(Error::Format(format!("unknown feature kind `{s}`"))),
            },
        }
    }
}

impl Serialize for FeatureKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Catalog-wide range used to min-max normalize one scalar column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarRange {
    pub feature: ScalarFeature,
    pub min: f64,
    pub max: f64,
}

impl ScalarRange {
    pub fn is_constant(&self) -> bool {
        self.min == self.max
    }

    pub fn normalize(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + v * (self.max - self.min)
        }
    }
}

/// Dense `N x D` matrix of item descriptors.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    kind: FeatureKind,
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    ranges: Vec<ScalarRange>,
    max_side: Option<u32>,
}

impl FeatureStore {
    pub fn new(
        kind: FeatureKind,
        dim: usize,
        ids: Vec<String>,
        data: Vec<f64>,
        ranges: Vec<ScalarRange>,
        max_side: Option<u32>,
    ) -> Result<Self> {
        if let Some(expected) = kind.fixed_dim() {
            if dim != expected {
                return Err(Error::Format(format!("kind {kind} needs {expected} columns, got {dim}")));
            }
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Format(format!(
                "{} items x {dim} columns needs {} values, got {}",
                ids.len(),
                ids.len() * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value for item `{}`", ids[pos / dim])));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if id.is_empty() {
                return Err(Error::Format(format!("empty item id in row {i}")));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate item id `{id}`")));
            }
        }
        Ok(Self { kind, dim, ids, index, data, ranges, max_side })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row-major values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = (&str, &[f64])> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), self.row(i)))
    }

    /// Normalization ranges of the scalar columns.
    pub fn ranges(&self) -> &[ScalarRange] {
        &self.ranges
    }

    /// Long-side cap applied to images before extraction, if any.
    pub fn max_side(&self) -> Option<u32> {
        self.max_side
    }

    /// Values of column `j` in row order.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.data[i * self.dim + j]).collect()
    }

    /// Scalar columns mapped back to their extracted (pre-normalization) values.
    pub fn raw_scalar_columns(&self) -> Vec<(ScalarFeature, Vec<f64>)> {
        self.kind
            .scalar_columns()
            .into_iter()
            .enumerate()
            .map(|(j, feature)| {
                let range = self.ranges.iter().find(|r| r.feature == feature);
                let values = self.column(j).into_iter().map(|v| range.map_or(v, |r| r.denormalize(v))).collect();
                (feature, values)
            })
            .collect()
    }

    /// Bitwise equality of every field, including float payloads.
    pub fn bit_eq(&self, other: &FeatureStore) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let range_bits =
            |r: &[ScalarRange]| r.iter().map(|r| (r.feature, r.min.to_bits(), r.max.to_bits())).collect::<Vec<_>>();
        self.kind == other.kind
            && self.dim == other.dim
            && self.ids == other.ids
            && self.max_side == other.max_side
            && bits(&self.data) == bits(&other.data)
            && range_bits(&self.ranges) == range_bits(&other.ranges)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub item_id: String,
    pub path: PathBuf,
    pub title: Option<String>,
}

/// Item id to image file mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogRecord {
    item_id: String,
    image_path: String,
    #[serde(default)]
    title: Option<String>,
}

impl Catalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.item_id.is_empty() {
                return Err(Error::Format("catalog entry with empty item id".into()));
            }
            if e.path.as_os_str().is_empty() {
                return Err(Error::Format(format!("item `{}` has an empty image path", e.item_id)));
            }
            if !seen.insert(e.item_id.as_str()) {
                return Err(Error::Format(format!("duplicate catalog item `{}`", e.item_id)));
            }
        }
        Ok(Self { entries })
    }

    /// Reads `item_id,image_path[,title]`. Relative image paths are resolved
    /// against the catalog file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
        let mut entries = Vec::new();
        for rec in reader.deserialize::<CatalogRecord>() {
            let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            let image = PathBuf::from(&rec.image_path);
            let resolved = if image.is_absolute() || rec.image_path.is_empty() { image } else { base.join(image) };
            entries.push(CatalogEntry {
                item_id: rec.item_id,
                path: resolved,
                title: rec.title.filter(|t| !t.is_empty()),
            });
        }
        Self::new(entries)
    }

    /// Writes the catalog with image paths relative to `path`'s directory
    /// where possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
        for e in &self.entries {
            let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
            writer
                .serialize(CatalogRecord {
                    item_id: e.item_id.clone(),
                    image_path: rel.to_string_lossy().into_owned(),
                    title: e.title.clone(),
                })
                .map_err(csv_err)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.item_id == item_id)
    }
}

/// Reads an embedding CSV: header `item_id,dim_0,...,dim_{D-1}`, one row per item.
pub fn ingest_embeddings(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(BufReader::new(file));
    let fmt_err = |msg: String| Error::Format(format!("{}: {msg}", path.display()));

    let header = reader.headers().map_err(|e| fmt_err(e.to_string()))?.clone();
    if header.get(0) != Some("item_id") {
        return Err(fmt_err("header must start with `item_id`".into()));
    }
    let dim = header.len() - 1;
    for (k, name) in header.iter().skip(1).enumerate() {
        if name != format!("dim_{k}") {
            return Err(fmt_err(format!("header column {} is `{name}`, expected `dim_{k}`", k + 1)));
        }
    }

    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        let line = row + 2;
        if rec.len() != dim + 1 {
            return Err(fmt_err(format!(
                "line {line}: {} values under a {dim}-dimensional header",
                rec.len().saturating_sub(1)
            )));
        }
        ids.push(rec[0].to_string());
        for field in rec.iter().skip(1) {
            let v: f64 =
                field.trim().parse().map_err(|_| fmt_err(format!("line {line}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(fmt_err(format!("line {line}: non-finite value `{field}`")));
            }
            data.push(v);
        }
    }
    FeatureStore::new(FeatureKind::Embedding, dim, ids, data, Vec::new(), None).map_err(|e| fmt_err(e.to_string()))
}

/// Writes a store as an embedding CSV readable by [`ingest_embeddings`].
/// Values use the shortest representation that parses back to the same bits.
pub fn write_embeddings_csv(store: &FeatureStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = String::from("item_id");
    for k in 0..store.dim() {
        header.push_str(&format!(",dim_{k}"));
    }
    writeln!(out, "{header}").map_err(io)?;
    for (id, row) in store.rows() {
        let mut line = csv_field(id);
        for v in row {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Downscale images whose long side exceeds this many pixels.
    pub max_side: Option<u32>,
}

impl ExtractOptions {
    pub const DEFAULT_MAX_SIDE: u32 = 512;
}

/// Raw features of one catalog item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFeatures {
    pub item_id: String,
    pub scalars: EvfScalars,
    pub lbp: LbpHistogram,
}

/// Raw features of a whole catalog, in catalog order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvfTable {
    pub items: Vec<ItemFeatures>,
    pub max_side: Option<u32>,
}

/// Decodes and extracts every catalog image, one image per worker task.
/// The first failing item in catalog order is reported.
pub fn extract_catalog(catalog: &Catalog, opts: ExtractOptions) -> Result<EvfTable> {
    let items = catalog
        .entries()
        .par_iter()
        .map(|entry| {
            let extract = || -> Result<ItemFeatures> {
                let mut img = decode_image(&entry.path)?;
                if let Some(cap) = opts.max_side {
                    img = img.downscaled(cap);
                }
                let (scalars, lbp) = extract_all(&img)?;
                Ok(ItemFeatures { item_id: entry.item_id.clone(), scalars, lbp })
            };
            extract().map_err(|e| Error::for_item(&entry.item_id, e))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(EvfTable { items, max_side: opts.max_side })
}

/// A store plus the non-fatal issues found while building it.
#[derive(Debug, Clone)]
pub struct BuiltStore {
    pub store: FeatureStore,
    pub warnings: Vec<String>,
}

/// Assembles the vectors of one condition from extracted features. Scalars
/// are min-max normalized over the table; a constant scalar becomes 0.5
/// everywhere and produces a warning.
pub fn assemble_condition(table: &EvfTable, kind: FeatureKind) -> Result<BuiltStore> {
    let dim = kind.fixed_dim().ok_or_else(|| Error::Contract("embedding stores are ingested, not extracted".into()))?;
    let columns = kind.scalar_columns();
    let mut warnings = Vec::new();
    let ranges: Vec<ScalarRange> = columns
        .iter()
        .map(|&feature| {
            let (min, max) = table
                .items
                .iter()
                .map(|it| it.scalars.get(feature))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let range = if table.items.is_empty() {
                ScalarRange { feature, min: 0.0, max: 0.0 }
            } else {
                ScalarRange { feature, min, max }
            };
            if range.is_constant() && !table.items.is_empty() {
                warnings.push(format!("{feature} is constant ({min}) across the catalog; column set to 0.5"));
            }
            range
        })
        .collect();

    let mut data = Vec::with_capacity(table.items.len() * dim);
    for item in &table.items {
        for range in &ranges {
            data.push(range.normalize(item.scalars.get(range.feature)));
        }
        if kind.includes_lbp() {
            data.extend_from_slice(item.lbp.bins());
        }
    }
    let ids = table.items.iter().map(|it| it.item_id.clone()).collect();
    let store = FeatureStore::new(kind, dim, ids, data, ranges, table.max_side)?;
    Ok(BuiltStore { store, warnings })
}

pub fn build_evf_store(catalog: &Catalog, kind: FeatureKind, opts: ExtractOptions) -> Result<BuiltStore> {
    if kind == FeatureKind::Embedding {
        return Err(Error::Contract("embedding stores are ingested, not extracted".into()));
    }
    assemble_condition(&extract_catalog(catalog, opts)?, kind)
}

const MAGIC: &[u8; 8] = b"ARTRECFS";
pub const STORE_FORMAT_VERSION: u32 = 1;

/// Writes the binary container: magic, version, kind, `D`, `N`, image scale
/// cap, normalization table, item ids, then row-major little-endian `f64`s.
pub fn save_store(store: &FeatureStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_store(store, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_store(store: &FeatureStore, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&STORE_FORMAT_VERSION.to_le_bytes())?;
    write_str(w, &store.kind.to_string())?;
    w.write_all(&(store.dim as u64).to_le_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    w.write_all(&store.max_side.unwrap_or(0).to_le_bytes())?;
    w.write_all(&(store.ranges.len() as u32).to_le_bytes())?;
    for r in &store.ranges {
        w.write_all(&[r.feature.index() as u8])?;
        w.write_all(&r.min.to_le_bytes())?;
        w.write_all(&r.max.to_le_bytes())?;
    }
    for id in &store.ids {
        write_str(w, id)?;
    }
    for v in &store.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

pub fn load_store(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_store(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn decode_store(bytes: &[u8]) -> Result<FeatureStore> {
    let mut r = ByteReader { bytes };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("not a feature store (bad magic bytes)".into()));
    }
    let version = r.u32()?;
    if version != STORE_FORMAT_VERSION {
        return Err(Error::Format(format!("store format version {version}, expected {STORE_FORMAT_VERSION}")));
    }
    let kind: FeatureKind = r.string()?.parse()?;
    let dim = usize::try_from(r.u64()?).map_err(|_| Error::Format("dimension overflow".into()))?;
    let n = usize::try_from(r.u64()?).map_err(|_| Error::Format("row count overflow".into()))?;
    let max_side = match r.u32()? {
        0 => None,
        cap => Some(cap),
    };
    let n_ranges = r.u32()? as usize;
    let mut ranges = Vec::with_capacity(n_ranges.min(64));
    for _ in 0..n_ranges {
        let code = r.take(1)?[0] as usize;
        let feature = ScalarFeature::from_index(code)
            .ok_or_else(|| Error::Format(format!("unknown scalar feature code {code}")))?;
        ranges.push(ScalarRange { feature, min: r.f64()?, max: r.f64()? });
    }
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        ids.push(r.string()?);
    }
    let count = n.checked_mul(dim).ok_or_else(|| Error::Format("matrix size overflow".into()))?;
    if r.bytes.len() != count * 8 {
        return Err(Error::Format(format!("expected {} bytes of matrix data, found {}", count * 8, r.bytes.len())));
    }
    let data = r.bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    FeatureStore::new(kind, dim, ids, data, ranges, max_side)
}

struct ByteReader<'a> {
    bytes: &'a [u8],
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("truncated store file".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Format("item id is not UTF-8".into()))
    }
}
