//! `artrec`: extract features, evaluate recommenders, correlate embeddings
//! with visual features and draw catalog maps.

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use artrec_core::correlation::{correlate_all, require_embedding, write_correlation_report, CorrelationMethod};
use artrec_core::eval::{run_evaluation, write_table_csv, MetricsReport, TransactionLog, DEFAULT_K_VALUES};
use artrec_core::evf::ScalarFeature;
use artrec_core::layout::{default_grid_size, emit_map, snap_to_grid, tsne, TsneConfig};
use artrec_core::recsys::Aggregation;
use artrec_core::store::{
    assemble_condition, extract_catalog, ingest_embeddings, load_store, save_store, Catalog, EvfTable, ExtractOptions,
    FeatureKind, FeatureStore,
};
use artrec_core::synth::{write_dataset, SynthConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "artrec", version, about = "Content-based artwork recommendation toolkit")]
struct Cli {
    /// Key-value file of default flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract visual features from a catalog into a feature store.
    Extract(ExtractArgs),
    /// Validate an embedding CSV and convert it to a feature store.
    IngestEmbeddings(IngestArgs),
    /// Replay purchase histories and report ranking metrics.
    Evaluate(EvaluateArgs),
    /// Correlate embedding dimensions with scalar visual features.
    Correlate(CorrelateArgs),
    /// Project items with t-SNE and snap them onto an image grid.
    Layout(LayoutArgs),
    /// Generate a synthetic gallery.
    Synth(SynthArgs),
}

const SUBCOMMANDS: [&str; 6] = ["extract", "ingest-embeddings", "evaluate", "correlate", "layout", "synth"];

#[derive(Debug, Args)]
struct ImageArgs {
    /// Downscale images whose long side exceeds this; 0 disables resizing.
    #[arg(long, default_value_t = ExtractOptions::DEFAULT_MAX_SIDE)]
    max_side: u32,
}

impl ImageArgs {
    fn options(&self) -> ExtractOptions {
        ExtractOptions { max_side: (self.max_side > 0).then_some(self.max_side) }
    }
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Catalog CSV (`item_id,image_path[,title]`).
    #[arg(long)]
    catalog: PathBuf,
    /// Feature condition: evf_all, evf_no_lbp, lbp or single:<feature>.
    #[arg(long, default_value = "evf_all")]
    condition: FeatureKind,
    /// Output store file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    image: ImageArgs,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Embedding CSV (`item_id,dim_0,...`).
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Feature store to evaluate; repeat for several conditions.
    #[arg(long = "store")]
    stores: Vec<PathBuf>,
    /// Catalog to extract visual features from (with --all-conditions).
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Embedding CSV or store used for the DNN condition.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Evaluate the DNN condition and all ten visual-feature conditions.
    #[arg(long, requires_all = ["catalog", "embeddings"])]
    all_conditions: bool,
    /// Transaction log CSV (`user_id,txn_index,item_id`).
    #[arg(long)]
    transactions: PathBuf,
    #[arg(long, default_value = "sum")]
    aggregation: Aggregation,
    /// Cut-offs; repeat or separate with commas.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_VALUES)]
    k: Vec<usize>,
    /// Output directory for `report.json` and `table.csv`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    image: ImageArgs,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// Embedding CSV or store.
    #[arg(long)]
    embeddings: PathBuf,
    /// Store holding the scalar features (evf_no_lbp or evf_all).
    #[arg(long, conflicts_with = "catalog", required_unless_present = "catalog")]
    scalars: Option<PathBuf>,
    /// Catalog to extract the scalar features from instead.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, default_value = "pearson")]
    method: CorrelationMethod,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    image: ImageArgs,
}

#[derive(Debug, Args)]
struct LayoutArgs {
    /// Feature store or embedding CSV to project.
    #[arg(long)]
    store: PathBuf,
    /// Catalog providing the image paths.
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to 30, lowered to fit small catalogs.
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long, default_value_t = TsneConfig::default().iterations)]
    iterations: usize,
    #[arg(long, default_value_t = TsneConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid columns; defaults to ceil(sqrt(N)).
    #[arg(long)]
    width: Option<usize>,
    /// Grid rows; defaults to ceil(sqrt(N)).
    #[arg(long)]
    height: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().clusters)]
    clusters: usize,
    #[arg(long, default_value_t = SynthConfig::default().items)]
    items: usize,
    #[arg(long, default_value_t = SynthConfig::default().users)]
    users: usize,
    #[arg(long, default_value_t = SynthConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SynthConfig::default().image_size)]
    image_size: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let argv = match config::merge_config_file(std::env::args_os().collect(), &SUBCOMMANDS) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Extract(a) => cmd_extract(a),
        Command::IngestEmbeddings(a) => cmd_ingest(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Layout(a) => cmd_layout(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

/// Loads a binary store, or ingests the file as an embedding CSV.
fn load_any_store(path: &Path) -> Result<FeatureStore> {
    let mut magic = [0u8; 8];
    let is_store = fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut magic))
        .map(|()| &magic == b"ARTRECFS")
        .unwrap_or(false);
    let store = if is_store { load_store(path)? } else { ingest_embeddings(path)? };
    Ok(store)
}

fn extract_table(catalog_path: &Path, image: &ImageArgs) -> Result<EvfTable> {
    let catalog = Catalog::load(catalog_path)?;
    if catalog.is_empty() {
        warn(format!("catalog {} is empty", catalog_path.display()));
    }
    Ok(extract_catalog(&catalog, image.options())?)
}

fn build_condition(table: &EvfTable, kind: FeatureKind) -> Result<FeatureStore> {
    let built = assemble_condition(table, kind)?;
    for w in &built.warnings {
        warn(w);
    }
    Ok(built.store)
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    if a.condition == FeatureKind::Embedding {
        bail!("embeddings are not extracted from images; use ingest-embeddings");
    }
    let table = extract_table(&a.catalog, &a.image)?;
    let store = build_condition(&table, a.condition)?;
    ensure_parent(&a.out)?;
    save_store(&store, &a.out)?;

    println!("{} items, condition {}, {} columns -> {}", store.len(), store.kind(), store.dim(), a.out.display());
    println!("{:<14} {:>14} {:>14} {:>14}", "feature", "min", "mean", "max");
    for feature in ScalarFeature::ALL {
        let values: Vec<f64> = table.items.iter().map(|it| it.scalars.get(feature)).collect();
        if values.is_empty() {
            continue;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        println!("{:<14} {min:>14.6} {mean:>14.6} {max:>14.6}", feature.name());
    }
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let store = ingest_embeddings(&a.embeddings)?;
    let dead = (0..store.dim())
        .filter(|&d| {
            let col = store.column(d);
            col.iter().all(|v| *v == col[0])
        })
        .count();
    if dead > 0 {
        warn(format!("{dead} of {} dimensions are constant", store.dim()));
    }
    ensure_parent(&a.out)?;
    save_store(&store, &a.out)?;
    println!("{} items x {} dimensions -> {}", store.len(), store.dim(), a.out.display());
    Ok(())
}

/// Fails listing every log item the store lacks.
fn check_coverage(store: &FeatureStore, log: &TransactionLog, label: &str) -> Result<()> {
    let missing: BTreeSet<&str> = log.item_ids().into_iter().filter(|id| store.position(id).is_none()).collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(20).copied().collect();
        let more = missing.len().saturating_sub(shown.len());
        bail!(
            "store for {label} lacks {} item(s) of the transaction log: {}{}",
            missing.len(),
            shown.join(", "),
            if more > 0 { format!(" (and {more} more)") } else { String::new() }
        );
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    if a.k.contains(&0) {
        bail!("k values must be positive");
    }
    let log = TransactionLog::load(&a.transactions)?;
    let mut stores: Vec<(String, FeatureStore)> = Vec::new();
    if a.all_conditions {
        let (catalog, embeddings) = (a.catalog.as_ref().unwrap(), a.embeddings.as_ref().unwrap());
        let table = extract_table(catalog, &a.image)?;
        for kind in FeatureKind::TABLE_ROWS {
            let store = if kind == FeatureKind::Embedding {
                let store = load_any_store(embeddings)?;
                require_embedding(&store)?;
                store
            } else {
                build_condition(&table, kind)?
            };
            stores.push((kind.table_label(), store));
        }
    } else if let Some(embeddings) = &a.embeddings {
        stores.push(("DNN".into(), load_any_store(embeddings)?));
    }
    for path in &a.stores {
        stores.push((path.display().to_string(), load_store(path)?));
    }
    if stores.is_empty() {
        bail!("nothing to evaluate: pass --store, --embeddings or --all-conditions");
    }

    let mut reports: Vec<MetricsReport> = Vec::new();
    for (label, store) in &stores {
        check_coverage(store, &log, label)?;
        let report = run_evaluation(store, &log, a.aggregation, &a.k)?;
        if report.case_count == 0 {
            warn(format!("{}: the transaction log yields no evaluation cases", report.condition));
        }
        reports.push(report);
    }

    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let json_path = a.out.join("report.json");
    fs::write(&json_path, serde_json::to_string_pretty(&reports)? + "\n")
        .with_context(|| format!("cannot write {}", json_path.display()))?;
    let table_path = a.out.join("table.csv");
    write_table_csv(&reports, &table_path)?;

    let first = &reports[0];
    println!("{} users, {} cases ({})", first.user_count, first.case_count, first.case_policy);
    let k_max = *a.k.iter().max().unwrap();
    for r in &reports {
        let m = &r.mean[&k_max];
        println!(
            "{:<24} ndcg@{k_max} {:.4}  rec@{k_max} {:.4}  prec@{k_max} {:.4}",
            r.condition, m.ndcg, m.recall, m.precision
        );
    }
    println!("wrote {} and {}", json_path.display(), table_path.display());
    Ok(())
}

fn cmd_correlate(a: CorrelateArgs) -> Result<()> {
    let embeddings = load_any_store(&a.embeddings)?;
    require_embedding(&embeddings)?;
    let scalars = match (&a.scalars, &a.catalog) {
        (Some(path), _) => load_store(path)?,
        (None, Some(catalog)) => build_condition(&extract_table(catalog, &a.image)?, FeatureKind::EvfNoLbp)?,
        (None, None) => unreachable!("clap requires --scalars or --catalog"),
    };
    let table = correlate_all(&embeddings, &scalars, a.method)?;
    if !table.skipped_dimensions.is_empty() {
        warn(format!("{} constant embedding dimension(s) skipped", table.skipped_dimensions.len()));
    }
    for f in &table.skipped_features {
        warn(format!("{f} is constant across items; not correlated"));
    }
    let written = write_correlation_report(&table, &a.out)?;

    println!("{} correlation over {} items x {} dimensions", table.method, table.items, table.dimensions);
    println!("{:<14} {:>9} {:>7} {:>9} {:>7}", "feature", "max", "at", "min", "at");
    for fc in &table.features {
        println!(
            "{:<14} {:>9.4} {:>7} {:>9.4} {:>7}",
            fc.feature.name(),
            fc.max_corr,
            fc.index_of_max,
            fc.min_corr,
            fc.index_of_min
        );
    }
    println!("wrote {} files to {}", written.len(), a.out.display());
    Ok(())
}

fn cmd_layout(a: LayoutArgs) -> Result<()> {
    let store = load_any_store(&a.store)?;
    let catalog = Catalog::load(&a.catalog)?;
    if let Some(id) = store.ids().iter().find(|id| catalog.get(id).is_none()) {
        bail!("item `{id}` has no catalog entry");
    }
    let n = store.len();
    let (dw, dh) = default_grid_size(n);
    let (width, height) = (a.width.unwrap_or(dw), a.height.unwrap_or(dh));
    if width * height < n {
        bail!("a {width}x{height} grid cannot hold {n} items");
    }
    let perplexity = match a.perplexity {
        Some(p) => p,
        None => {
            let fitted = TsneConfig::default().perplexity.min((n as f64 - 1.0) / 3.0);
            if fitted < TsneConfig::default().perplexity {
                warn(format!("perplexity lowered to {fitted:.3} for {n} items"));
            }
            fitted
        }
    };
    let config = TsneConfig {
        perplexity,
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        seed: a.seed,
        ..TsneConfig::default()
    };
    let layout = tsne(&store, &config)?;
    let grid = snap_to_grid(&layout, width, height)?;
    let files = emit_map(&grid, &catalog, &a.out)?;

    let coords_path = a.out.join("tsne.csv");
    let mut coords = String::from("item_id,x,y\n");
    for (id, [x, y]) in layout.ids.iter().zip(&layout.coords) {
        coords.push_str(&format!("{id},{x},{y}\n"));
    }
    fs::write(&coords_path, coords).with_context(|| format!("cannot write {}", coords_path.display()))?;

    println!(
        "{n} items on a {width}x{height} grid, assignment cost {:.6}; wrote {}, {} and {}",
        grid.cost,
        files.svg.display(),
        files.csv.display(),
        coords_path.display()
    );
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        clusters: a.clusters,
        items: a.items,
        users: a.users,
        dim: a.dim,
        image_size: a.image_size,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let files = write_dataset(&config, &a.out)?;
    println!(
        "{} items in {} cluster(s), {} users -> {}, {}, {}",
        config.items,
        config.clusters,
        config.users,
        files.catalog.display(),
        files.transactions.display(),
        files.embeddings.display()
    );
    Ok(())
}
