//! Catalog maps: a 2-D t-SNE projection snapped onto a regular grid.

mod grid;
pub mod lap;
pub mod tsne;

pub use grid::{default_grid_size, emit_map, read_grid_csv, snap_to_grid, GridCell, GridLayout, MapFiles};
pub use lap::{solve_lap, Assignment};
pub use tsne::{tsne, TsneConfig};

/// One 2-D point per item.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout2D {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
}
