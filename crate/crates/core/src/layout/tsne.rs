//! Exact O(N²) t-SNE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::Layout2D;
use crate::store::FeatureStore;
use crate::{Error, Result};

/// Tolerance on each conditional distribution's entropy, in bits.
pub const ENTROPY_TOLERANCE: f64 = 1e-5;
pub const MAX_BANDWIDTH_STEPS: usize = 50;
/// Rate halvings tried after a rejected step.
const MAX_BACKTRACK_STEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub exaggeration: f64,
    /// Iterations run with exaggerated affinities and initial momentum.
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
        }
    }
}

/// Symmetric joint affinities `p_ij`, row-major `n x n`, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinities {
    pub n: usize,
    pub p: Vec<f64>,
    /// Achieved entropy (bits) of each point's conditional distribution.
    pub entropies: Vec<f64>,
}

impl Affinities {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }
}

pub fn squared_distances(rows: &[&[f64]]) -> Vec<f64> {
    let n = rows.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional distribution of row `i` at precision `beta`, and its entropy in bits.
fn conditional_row(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let n = out.len();
    let min = (0..n).filter(|&j| j != i).map(|j| dist[j]).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for j in 0..n {
        out[j] = if j == i { 0.0 } else { (-beta * (dist[j] - min)).exp() };
        sum += out[j];
    }
    let mut weighted = 0.0;
    for j in 0..n {
        out[j] /= sum;
        weighted += out[j] * (dist[j] - min);
    }
    (sum.ln() + beta * weighted) / std::f64::consts::LN_2
}

/// Joint affinities from squared distances, calibrating each point's
/// Gaussian bandwidth by bisection so its conditional entropy matches
/// `log2(perplexity)`.
pub fn joint_affinities(dist: &[f64], n: usize, perplexity: f64) -> Affinities {
    let target = perplexity.log2();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &dist[i * n..(i + 1) * n];
            let mut p = vec![0.0; n];
            if n < 2 {
                return (p, 0.0);
            }
            // Start from the inverse mean spread so few doubling steps are needed.
            let min = (0..n).filter(|&j| j != i).map(|j| row[j]).fold(f64::INFINITY, f64::min);
            let spread = (0..n).filter(|&j| j != i).map(|j| row[j] - min).sum::<f64>() / (n - 1) as f64;
            let mut beta = if spread > 0.0 { 1.0 / spread } else { 1.0 };
            let (mut lo, mut hi) = (0.0, f64::INFINITY);
            let mut h = conditional_row(row, i, beta, &mut p);
            for _ in 0..MAX_BANDWIDTH_STEPS {
                let diff = h - target;
                if diff.abs() < ENTROPY_TOLERANCE {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
                h = conditional_row(row, i, beta, &mut p);
            }
            (p, h)
        })
        .collect();

    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            joint[i * n + j] = (rows[i].0[j] + rows[j].0[i]) / (2.0 * n as f64);
        }
    }
    Affinities { n, p: joint, entropies: rows.into_iter().map(|(_, h)| h).collect() }
}

/// Student-t kernel `1 / (1 + |y_i - y_j|²)`, row-major, zero diagonal.
fn kernel(y: &[[f64; 2]]) -> Vec<f64> {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    num.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            if i != j {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                row[j] = 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
    });
    num
}

/// `KL(P || Q)` of the layout `y`.
pub fn kl_divergence(p: &Affinities, y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let num = kernel(y);
    let z: f64 = num.iter().sum();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p.get(i, j);
            if i != j && pij > 0.0 {
                kl += pij * (pij / (num[i * n + j] / z)).ln();
            }
        }
    }
    kl
}

/// Gradient of KL divergence with affinities scaled by `exaggeration`.
fn gradient_scaled(p: &Affinities, y: &[[f64; 2]], exaggeration: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    let num = kernel(y);
    let z: f64 = num.iter().sum();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let m = 4.0 * (exaggeration * p.get(i, j) - w / z) * w;
                g[0] += m * (y[i][0] - y[j][0]);
                g[1] += m * (y[i][1] - y[j][1]);
            }
            g
        })
        .collect()
}

/// Analytic gradient of `KL(P || Q)` with respect to each layout point.
pub fn kl_gradient(p: &Affinities, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    gradient_scaled(p, y, 1.0)
}

#[derive(Debug, Clone)]
pub struct TsneRun {
    pub coords: Vec<[f64; 2]>,
    /// KL divergence (unexaggerated) after every iteration.
    pub kl_history: Vec<f64>,
}

/// Runs t-SNE on raw row vectors.
pub fn tsne_rows(rows: &[&[f64]], config: &TsneConfig) -> Result<TsneRun> {
    let n = rows.len();
    if n < 4 {
        return Err(Error::Contract(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if !(config.perplexity >= 3.0 && config.perplexity < n as f64 / 3.0) {
        return Err(Error::Contract(format!(
            "perplexity {} is infeasible for {n} points (need 3 <= perplexity < {:.3})",
            config.perplexity,
            n as f64 / 3.0
        )));
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Contract("t-SNE rows have different dimensions".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut data: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    jitter_duplicates(&mut data, &mut rng);
    let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
    let p = joint_affinities(&squared_distances(&refs), n, config.perplexity);

    let init = Normal::new(0.0, 1e-4).unwrap();
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_history = Vec::with_capacity(config.iterations);

    let mut kl = kl_divergence(&p, &y);
    for iter in 0..config.iterations {
        let early = iter < config.exaggeration_iterations;
        let exaggeration = if early { config.exaggeration } else { 1.0 };
        let momentum = if early { config.initial_momentum } else { config.final_momentum };
        let grad = gradient_scaled(&p, &y, exaggeration);
        let mut next_update = update.clone();
        let mut next_gains = gains.clone();
        for i in 0..n {
            for c in 0..2 {
                // Grow the gain while the gradient keeps pointing against the
                // previous step, shrink it when the direction flips.
                next_gains[i][c] = if (grad[i][c] > 0.0) != (update[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    (gains[i][c] * 0.8).max(0.01)
                };
                next_update[i][c] = momentum * update[i][c] - config.learning_rate * next_gains[i][c] * grad[i][c];
            }
        }
        let mut candidate = shifted(&y, &next_update);
        let mut candidate_kl = kl_divergence(&p, &candidate);
        if !early && (candidate_kl.is_nan() || candidate_kl > kl) {
            // Reject the step, drop momentum and gains, and fall back to plain
            // gradient steps with a halving rate until KL does not rise.
            next_gains = vec![[1.0; 2]; n];
            next_update = vec![[0.0; 2]; n];
            candidate = y.clone();
            candidate_kl = kl;
            let mut rate = config.learning_rate;
            for _ in 0..MAX_BACKTRACK_STEPS {
                rate *= 0.5;
                let step: Vec<[f64; 2]> = grad.iter().map(|g| [-rate * g[0], -rate * g[1]]).collect();
                let trial = shifted(&y, &step);
                let trial_kl = kl_divergence(&p, &trial);
                if trial_kl <= kl {
                    next_update = step;
                    candidate = trial;
                    candidate_kl = trial_kl;
                    break;
                }
            }
        }
        update = next_update;
        gains = next_gains;
        y = candidate;
        kl = candidate_kl;
        kl_history.push(kl);
    }
    Ok(TsneRun { coords: y, kl_history })
}

/// `y + step`, recentered on the origin.
fn shifted(y: &[[f64; 2]], step: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = y.len() as f64;
    let mut out: Vec<[f64; 2]> = y.iter().zip(step).map(|(p, s)| [p[0] + s[0], p[1] + s[1]]).collect();
    let mean = out.iter().fold([0.0; 2], |m, p| [m[0] + p[0] / n, m[1] + p[1] / n]);
    for pt in &mut out {
        pt[0] -= mean[0];
        pt[1] -= mean[1];
    }
    out
}

/// Projects every row of `store` to 2-D.
pub fn tsne(store: &FeatureStore, config: &TsneConfig) -> Result<Layout2D> {
    let rows: Vec<&[f64]> = (0..store.len()).map(|i| store.row(i)).collect();
    let run = tsne_rows(&rows, config)?;
    Ok(Layout2D { ids: store.ids().to_vec(), coords: run.coords })
}

/// Perturbs exact duplicates by a tiny symmetric seeded offset so no two
/// points sit at distance zero.
fn jitter_duplicates(data: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    let scale = data.iter().flat_map(|r| r.iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let amplitude = scale * 1e-9;
    for i in 1..data.len() {
        while data[..i].iter().any(|prev| *prev == data[i]) {
            for v in data[i].iter_mut() {
                *v += amplitude * rng.random_range(-1.0..1.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn two_points_have_zero_kl() {
        let p = Affinities { n: 2, p: vec![0.0, 0.5, 0.5, 0.0], entropies: vec![0.0; 2] };
        for y in [[[0.0, 0.0], [1.0, 2.0]], [[5.0, -1.0], [5.1, -1.0]]] {
            assert!(kl_divergence(&p, &y).abs() < 1e-15);
        }
    }

    #[test]
    fn equidistant_points_have_equal_affinities() {
        let s3 = 3f64.sqrt() / 2.0;
        let pts = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, s3]];
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let a = joint_affinities(&squared_distances(&refs), 3, 5.0);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 1.0 / 6.0 };
                assert!((a.get(i, j) - expected).abs() < 1e-9, "p[{i}][{j}] = {}", a.get(i, j));
            }
        }
    }

    #[test]
    fn bandwidth_search_hits_target_entropy() {
        let rows = random_rows(60, 8, 3);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        for perplexity in [5.0, 12.0, 19.0] {
            let a = joint_affinities(&squared_distances(&refs), rows.len(), perplexity);
            for h in &a.entropies {
                assert!((h - perplexity.log2()).abs() < ENTROPY_TOLERANCE, "{h}");
            }
            assert!((a.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // Large-magnitude inputs need many doubling steps from a naive start.
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * 300.0).collect()).collect();
        let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
        let a = joint_affinities(&squared_distances(&refs), rows.len(), 10.0);
        assert!(a.entropies.iter().all(|h| (h - 10f64.log2()).abs() < ENTROPY_TOLERANCE));
    }

    #[test]
    fn rejects_infeasible_perplexity() {
        let rows = random_rows(9, 3, 0);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let config = TsneConfig { perplexity: 3.0, ..TsneConfig::default() };
        assert!(tsne_rows(&refs, &config).is_err());
        assert!(tsne_rows(&refs[..3], &config).is_err());
    }

    #[test]
    fn duplicates_do_not_break_the_run() {
        let mut rows = random_rows(12, 4, 1);
        rows[5] = rows[2].clone();
        rows[7] = rows[2].clone();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let config = TsneConfig { perplexity: 3.0, iterations: 300, ..TsneConfig::default() };
        let run = tsne_rows(&refs, &config).unwrap();
        assert!(run.coords.iter().all(|p| p[0].is_finite() && p[1].is_finite()));
        assert!(run.kl_history.iter().all(|k| k.is_finite()));
    }
}
