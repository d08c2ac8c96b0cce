//! Jonker-Volgenant solver for the dense linear assignment problem.
//!
//! Column reduction and reduction transfer build an initial partial
//! assignment with feasible column prices, augmenting row reduction extends
//! it cheaply, and the remaining free rows are assigned along shortest
//! augmenting paths (Dijkstra over reduced costs).

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub row_to_col: Vec<usize>,
    pub total_cost: f64,
}

/// Minimum-cost perfect matching of a square cost matrix.
pub fn solve_lap(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    if let Some((i, row)) = cost.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Contract(format!(
            "cost matrix must be square: row {i} has {} entries, expected {n}",
            row.len()
        )));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Contract("cost matrix has non-finite entries".into()));
    }
    let row_to_col = match n {
        0 => Vec::new(),
        1 => vec![0],
        _ => Solver::new(cost).run(),
    };
    let total_cost = row_to_col.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(Assignment { row_to_col, total_cost })
}

const NONE: usize = usize::MAX;

struct Solver<'a> {
    cost: &'a [Vec<f64>],
    n: usize,
    /// Column of each row, or NONE.
    x: Vec<usize>,
    /// Row of each column, or NONE.
    y: Vec<usize>,
    /// Column prices.
    v: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(cost: &'a [Vec<f64>]) -> Self {
        let n = cost.len();
        Self { cost, n, x: vec![NONE; n], y: vec![NONE; n], v: vec![0.0; n] }
    }

    fn run(mut self) -> Vec<usize> {
        let mut free = self.column_reduction();
        for _ in 0..2 {
            if free.is_empty() {
                break;
            }
            free = self.augmenting_row_reduction(free);
        }
        for f in free {
            self.augment(f);
        }
        self.x
    }

    /// Column reduction and reduction transfer; returns unassigned rows.
    fn column_reduction(&mut self) -> Vec<usize> {
        let n = self.n;
        for j in 0..n {
            let mut min = self.cost[0][j];
            let mut argmin = 0;
            for i in 1..n {
                if self.cost[i][j] < min {
                    min = self.cost[i][j];
                    argmin = i;
                }
            }
            self.v[j] = min;
            self.y[j] = argmin;
        }
        let mut unique = vec![true; n];
        for j in (0..n).rev() {
            let i = self.y[j];
            if self.x[i] == NONE {
                self.x[i] = j;
            } else {
                unique[i] = false;
                self.y[j] = NONE;
            }
        }
        let mut free = Vec::new();
        for (i, &single) in unique.iter().enumerate() {
            if self.x[i] == NONE {
                free.push(i);
            } else if single {
                let j = self.x[i];
                let min = (0..n).filter(|&k| k != j).map(|k| self.cost[i][k] - self.v[k]).fold(f64::INFINITY, f64::min);
                self.v[j] -= min;
            }
        }
        free
    }

    /// One pass of augmenting row reduction; returns rows still free.
    fn augmenting_row_reduction(&mut self, mut free: Vec<usize>) -> Vec<usize> {
        let n = self.n;
        let n_free = free.len();
        let mut current = 0;
        let mut new_free = 0;
        let mut steps = 0usize;
        while current < n_free {
            steps += 1;
            let i = free[current];
            current += 1;

            // Smallest and second smallest reduced cost in row i.
            let mut j1 = 0;
            let mut u1 = self.cost[i][0] - self.v[0];
            let mut j2 = NONE;
            let mut u2 = f64::INFINITY;
            for j in 1..n {
                let h = self.cost[i][j] - self.v[j];
                if h < u2 {
                    if h >= u1 {
                        u2 = h;
                        j2 = j;
                    } else {
                        u2 = u1;
                        u1 = h;
                        j2 = j1;
                        j1 = j;
                    }
                }
            }

            let mut i0 = self.y[j1];
            let lowered = self.v[j1] - (u2 - u1);
            let lowers = lowered < self.v[j1];
            if steps < current * n {
                if lowers {
                    self.v[j1] = lowered;
                } else if i0 != NONE && j2 != NONE {
                    j1 = j2;
                    i0 = self.y[j2];
                }
                if i0 != NONE {
                    if lowers {
                        current -= 1;
                        free[current] = i0;
                    } else {
                        free[new_free] = i0;
                        new_free += 1;
                    }
                }
            } else if i0 != NONE {
                free[new_free] = i0;
                new_free += 1;
            }
            self.x[i] = j1;
            self.y[j1] = i;
            if i0 != NONE && self.x[i0] == j1 {
                self.x[i0] = NONE;
            }
        }
        free.truncate(new_free);
        free
    }

    /// Assigns free row `f` along a shortest augmenting path.
    fn augment(&mut self, f: usize) {
        let n = self.n;
        let cost = self.cost;
        let mut d: Vec<f64> = (0..n).map(|j| cost[f][j] - self.v[j]).collect();
        let mut pred = vec![f; n];
        // cols[..lo] are settled, cols[lo..hi] sit at the current minimum
        // distance, cols[hi..] are unexplored.
        let mut cols: Vec<usize> = (0..n).collect();
        let (mut lo, mut hi) = (0usize, 0usize);
        let mut n_ready = 0;
        let mut final_j = NONE;

        while final_j == NONE {
            if lo == hi {
                n_ready = lo;
                hi = lo + 1;
                let mut mind = d[cols[lo]];
                // The range is fixed on entry; `hi` moves independently.
                #[allow(clippy::mut_range_bound)]
                for k in hi..n {
                    let j = cols[k];
                    let h = d[j];
                    if h <= mind {
                        if h < mind {
                            hi = lo;
                            mind = h;
                        }
                        cols[k] = cols[hi];
                        cols[hi] = j;
                        hi += 1;
                    }
                }
                for &j in &cols[lo..hi] {
                    if self.y[j] == NONE {
                        final_j = j;
                    }
                }
            }
            if final_j == NONE {
                // Scan one column at the minimum distance.
                let j = cols[lo];
                lo += 1;
                let i = self.y[j];
                let mind = d[j];
                let h = cost[i][j] - self.v[j] - mind;
                let mut k = hi;
                while k < n {
                    let jj = cols[k];
                    let reduced = cost[i][jj] - self.v[jj] - h;
                    if reduced < d[jj] {
                        d[jj] = reduced;
                        pred[jj] = i;
                        if reduced == mind {
                            if self.y[jj] == NONE {
                                final_j = jj;
                                break;
                            }
                            cols[k] = cols[hi];
                            cols[hi] = jj;
                            hi += 1;
                        }
                    }
                    k += 1;
                }
                if final_j == NONE && lo == hi && hi == n {
                    // Every column settled without reaching a free one; cannot
                    // happen for a square problem with a free row.
                    unreachable!("augmenting path search exhausted all columns");
                }
            }
        }

        let mind = d[cols[lo.min(n - 1)]];
        for &j in &cols[..n_ready] {
            self.v[j] += d[j] - mind;
        }

        let mut j = final_j;
        loop {
            let i = pred[j];
            self.y[j] = i;
            let prev = self.x[i];
            self.x[i] = j;
            if i == f {
                break;
            }
            j = prev;
        }
    }
}
