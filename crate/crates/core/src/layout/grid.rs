use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::lap::solve_lap;
use super::Layout2D;
use crate::store::Catalog;
use crate::{Error, Result};

/// Items placed on a `width x height` grid, at most one item per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    pub ids: Vec<String>,
    /// Row-major cell index of each item.
    pub cells: Vec<usize>,
    /// Sum of squared distances from items to their cells.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub item_id: String,
    pub row: usize,
    pub col: usize,
}

impl GridLayout {
    pub fn placements(&self) -> Vec<GridCell> {
        self.ids
            .iter()
            .zip(&self.cells)
            .map(|(id, &c)| GridCell { item_id: id.clone(), row: c / self.width, col: c % self.width })
            .collect()
    }
}

/// Smallest square grid holding `n` items.
pub fn default_grid_size(n: usize) -> (usize, usize) {
    let side = (n as f64).sqrt().ceil() as usize;
    (side, side)
}

/// Center of `cell` in the unit square.
pub(crate) fn cell_center(cell: usize, width: usize, height: usize) -> [f64; 2] {
    [((cell % width) as f64 + 0.5) / width as f64, ((cell / width) as f64 + 0.5) / height as f64]
}

/// Rescales each axis so the extreme points land on the outermost cell
/// centers; a flat axis maps to the middle.
pub(crate) fn normalize_to_grid(coords: &[[f64; 2]], width: usize, height: usize) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; coords.len()];
    for (axis, cells) in [width, height].into_iter().enumerate() {
        let lo = coords.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = coords.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let first = 0.5 / cells as f64;
        let span = 1.0 - 1.0 / cells as f64;
        for (o, p) in out.iter_mut().zip(coords) {
            o[axis] = if hi > lo { first + (p[axis] - lo) / (hi - lo) * span } else { 0.5 };
        }
    }
    out
}

/// Assigns each point to a distinct grid cell minimizing the total squared
/// distance between normalized points and cell centers. Empty cells are
/// handled by padding with zero-cost virtual items.
pub fn snap_to_grid(layout: &Layout2D, width: usize, height: usize) -> Result<GridLayout> {
    let n = layout.coords.len();
    if layout.ids.len() != n {
        return Err(Error::Contract("layout ids and coordinates differ in length".into()));
    }
    let cells = width * height;
    if width == 0 || height == 0 || cells < n {
        return Err(Error::Contract(format!("a {width}x{height} grid cannot hold {n} items")));
    }
    if layout.coords.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Contract("layout has non-finite coordinates".into()));
    }
    let points = normalize_to_grid(&layout.coords, width, height);
    let centers: Vec<[f64; 2]> = (0..cells).map(|c| cell_center(c, width, height)).collect();
    let mut cost: Vec<Vec<f64>> = points
        .iter()
        .map(|p| centers.iter().map(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).collect())
        .collect();
    cost.resize(cells, vec![0.0; cells]);
    let assignment = solve_lap(&cost)?;
    let item_cells: Vec<usize> = assignment.row_to_col[..n].to_vec();
    let total = item_cells.iter().enumerate().map(|(i, &c)| cost[i][c]).sum();
    Ok(GridLayout { width, height, ids: layout.ids.clone(), cells: item_cells, cost: total })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapFiles {
    pub svg: PathBuf,
    pub csv: PathBuf,
}

pub const CELL_PIXELS: usize = 96;

/// Writes `map.svg` (one `<image>` per placed item, linked by path relative
/// to the SVG) and `grid.csv` (`item_id,row,col`) into `dir`.
pub fn emit_map(grid: &GridLayout, catalog: &Catalog, dir: impl AsRef<Path>) -> Result<MapFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = MapFiles { svg: dir.join("map.svg"), csv: dir.join("grid.csv") };

    let placements = grid.placements();
    let (w, h) = (grid.width * CELL_PIXELS, grid.height * CELL_PIXELS);
    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(svg, r##"  <rect width="{w}" height="{h}" fill="#ffffff"/>"##).unwrap();
    for cell in &placements {
        let entry = catalog.get(&cell.item_id).ok_or_else(|| Error::MissingItem(cell.item_id.clone()))?;
        let href = relative_path(&entry.path, dir);
        writeln!(
            svg,
            r#"  <image x="{}" y="{}" width="{CELL_PIXELS}" height="{CELL_PIXELS}" preserveAspectRatio="xMidYMid meet" href="{}"><title>{}</title></image>"#,
            cell.col * CELL_PIXELS,
            cell.row * CELL_PIXELS,
            xml_escape(&href.to_string_lossy().replace('\\', "/")),
            xml_escape(entry.title.as_deref().unwrap_or(&cell.item_id)),
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    std::fs::write(&files.svg, svg).map_err(|e| Error::io(&files.svg, e))?;

    let file = File::create(&files.csv).map_err(|e| Error::io(&files.csv, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", files.csv.display()));
    // Header is written explicitly so an empty grid still has one.
    writer.write_record(["item_id", "row", "col"]).map_err(csv_err)?;
    for cell in &placements {
        writer.write_record([cell.item_id.clone(), cell.row.to_string(), cell.col.to_string()]).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| Error::Format(e.to_string()))?.flush().map_err(|e| Error::io(&files.csv, e))?;
    Ok(files)
}

pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<Vec<GridCell>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize::<GridCell>()
        .map(|r| r.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// `target` expressed relative to directory `base`, falling back to the
/// absolute path when the two share no root.
fn relative_path(target: &Path, base: &Path) -> PathBuf {
    let (Ok(target), Ok(base)) = (std::path::absolute(target), std::path::absolute(base)) else {
        return target.to_path_buf();
    };
    let t: Vec<Component> = target.components().collect();
    let b: Vec<Component> = base.components().collect();
    if t.first() != b.first() {
        return target;
    }
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c);
    }
    rel
}
