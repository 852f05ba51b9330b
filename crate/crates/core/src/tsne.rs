//! Exact t-SNE for small data sets.
//!
//! Gaussian input affinities are calibrated per point to a target
//! perplexity (entropy in bits), symmetrized into a joint distribution P,
//! and matched by Student-t affinities Q in two dimensions by gradient
//! descent on KL(P || Q) (natural log). All pairs are computed exactly,
//! which is fine for a few hundred points.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::features::{csv_field, format_real, FeatureMatrix};

/// Floor applied to P and Q entries so logarithms stay finite.
pub const PROB_FLOOR: f64 = 1e-12;
const MAX_CALIBRATION_STEPS: usize = 64;
const GAIN_STEP: f64 = 0.2;
const GAIN_DECAY: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum TsneError {
    #[error("t-SNE needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} must be at least 1 and below the number of points ({n})")]
    Perplexity { perplexity: f64, n: usize },
    #[error("invalid t-SNE configuration: {0}")]
    Config(String),
    #[error("sigma calibration failed for row {row}: reached perplexity {achieved}, wanted {target}")]
    Calibration { row: usize, achieved: f64, target: f64 },
    #[error("embedding diverged at iteration {0}")]
    NonFinite(usize),
    #[error("embedding csv line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub learning_rate: f64,
    pub n_iters: usize,
    pub exaggeration_factor: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
    pub sigma_tolerance: f64,
    /// Per-coordinate step multipliers that grow while the gradient keeps
    /// its sign and shrink when it flips.
    pub adaptive_gains: bool,
    /// Turns off momentum, early exaggeration and adaptive gains.
    pub plain_descent: bool,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 4.0,
            learning_rate: 100.0,
            n_iters: 1000,
            exaggeration_factor: 4.0,
            exaggeration_iters: 100,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
            sigma_tolerance: 1e-5,
            adaptive_gains: true,
            plain_descent: false,
        }
    }
}

impl TsneConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
    pub fn validate(&self, n: usize) -> Result<(), TsneError> {
        if n < 3 {
            return Err(TsneError::TooFewPoints(n));
        }
        if !(self.perplexity >= 1.0 && self.perplexity < n as f64) {
            return Err(TsneError::Perplexity {
                perplexity: self.perplexity,
                n,
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TsneError::Config("learning_rate must be positive".into()));
        }
        for m in [self.initial_momentum, self.final_momentum] {
            if !(0.0..1.0).contains(&m) {
                return Err(TsneError::Config(format!("momentum {m} outside [0, 1)")));
            }
        }
        if !(self.exaggeration_factor > 0.0) {
            return Err(TsneError::Config("exaggeration_factor must be positive".into()));
        }
        if !(self.sigma_tolerance > 0.0) {
            return Err(TsneError::Config("sigma_tolerance must be positive".into()));
        }
        Ok(())
    }

    fn momentum(&self, iter: usize) -> f64 {
        if self.plain_descent {
            0.0
        } else if iter < self.momentum_switch_iter {
            self.initial_momentum
        } else {
            self.final_momentum
        }
    }

    fn exaggeration(&self, iter: usize) -> f64 {
        if self.plain_descent || iter >= self.exaggeration_iters {
            1.0
        } else {
            self.exaggeration_factor
        }
    }
}

/// Symmetric joint input affinities with zero diagonal summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub p: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub doc_ids: Vec<String>,
    pub y: Array2<f64>,
    pub final_kl: f64,
    /// KL(P || Q) against the un-exaggerated P, one entry per iteration,
    /// evaluated before that iteration's update.
    pub kl_trace: Vec<f64>,
}

pub fn pairwise_sq_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Calibration of a single row that missed its perplexity target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationFailure {
    pub achieved: f64,
}

fn row_conditionals(shifted: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let w: Vec<f64> = shifted.iter().map(|d| (-d * beta).exp()).collect();
    let sum: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|v| v / sum).collect();
    let h_nats: f64 = -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
    (p, (h_nats / std::f64::consts::LN_2).exp2())
}

/// Finds the Gaussian bandwidth for one point given its squared distances
/// to every other point, so that the conditional neighbor distribution
/// has the requested perplexity (2^H, H in bits).
///
/// Returns sigma and the conditionals, which sum to one. Sigma is infinite
/// when every distance is equal, since any bandwidth then gives the same
/// uniform distribution.
pub fn calibrate_sigma(
    dist_row: &[f64],
    perplexity: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>), CalibrationFailure> {
    let lo_target = perplexity * (1.0 - tol);
    let hi_target = perplexity * (1.0 + tol);
    let min = dist_row.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = dist_row.iter().map(|d| d - min).collect();
    let scale = shifted.iter().copied().fold(0.0, f64::max);

    if scale == 0.0 {
        let (p, perp) = row_conditionals(&shifted, 0.0);
        return if (lo_target..=hi_target).contains(&perp) {
            Ok((f64::INFINITY, p))
        } else {
            Err(CalibrationFailure { achieved: perp })
        };
    }

    // bisection on ln(beta * scale); perplexity falls as beta grows
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    let mut achieved = f64::NAN;
    for _ in 0..MAX_CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        let beta = mid.exp() / scale;
        let (p, perp) = row_conditionals(&shifted, beta);
        achieved = perp;
        if (lo_target..=hi_target).contains(&perp) {
            return Ok(((0.5 / beta).sqrt(), p));
        }
        if perp > perplexity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(CalibrationFailure { achieved })
}

pub fn joint_probabilities(
    x: ArrayView2<'_, f64>,
    perplexity: f64,
    tol: f64,
) -> Result<AffinityMatrix, TsneError> {
    let n = x.nrows();
    if n < 3 {
        return Err(TsneError::TooFewPoints(n));
    }
    if !(perplexity >= 1.0 && perplexity < n as f64) {
        return Err(TsneError::Perplexity { perplexity, n });
    }
    let d = pairwise_sq_distances(x);
    let mut cond = Array2::zeros((n, n));
    for i in 0..n {
        let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[[i, j]]).collect();
        let (_, p) = calibrate_sigma(&row, perplexity, tol).map_err(|f| TsneError::Calibration {
            row: i,
            achieved: f.achieved,
            target: perplexity,
        })?;
        let others = (0..n).filter(|&j| j != i);
        for (j, v) in others.zip(p) {
            cond[[i, j]] = v;
        }
    }
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[[i, j]] = ((cond[[i, j]] + cond[[j, i]]) / (2.0 * n as f64)).max(PROB_FLOOR);
            }
        }
    }
    let total = p.sum();
    p /= total;
    Ok(AffinityMatrix { p })
}

/// Student-t affinities: `(q, unnorm)` with `unnorm_ij = 1 / (1 + |y_i - y_j|^2)`.
pub fn low_dim_affinities(y: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
    let mut unnorm = pairwise_sq_distances(y).mapv(|d| 1.0 / (1.0 + d));
    unnorm.diag_mut().fill(0.0);
    let total = unnorm.sum();
    let q = &unnorm / total;
    (q, unnorm)
}

/// KL(P || Q) in nats over off-diagonal entries, both floored at 1e-12.
pub fn kl_divergence(p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    assert_eq!(p.dim(), q.dim());
    let mut kl = 0.0;
    for ((i, j), &pij) in p.indexed_iter() {
        if i == j {
            continue;
        }
        let pij = pij.max(PROB_FLOOR);
        kl += pij * (pij / q[[i, j]].max(PROB_FLOOR)).ln();
    }
    kl
}

/// Gradient of KL(P || Q) with respect to every embedding coordinate.
pub fn gradient(
    p: &Array2<f64>,
    q: &Array2<f64>,
    unnorm: &Array2<f64>,
    y: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let n = y.nrows();
    let mut grad = Array2::zeros(y.raw_dim());
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = 4.0 * (p[[i, j]] - q[[i, j]]) * unnorm[[i, j]];
            for k in 0..y.ncols() {
                grad[[i, k]] += w * (y[[i, k]] - y[[j, k]]);
            }
        }
    }
    grad
}

fn fnv1a(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Starting coordinates drawn from N(0, 0.01^2), one generator per doc_id,
/// so reordering rows reorders the starting points with them.
pub fn initial_embedding(doc_ids: &[String], seed: u64) -> Array2<f64> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut y = Array2::zeros((doc_ids.len(), 2));
    for (mut row, id) in y.rows_mut().into_iter().zip(doc_ids) {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(seed, id));
        row[0] = normal.sample(&mut rng);
        row[1] = normal.sample(&mut rng);
    }
    y
}

fn center(y: &mut Array2<f64>) {
    let mean = y.mean_axis(Axis(0)).expect("non-empty");
    *y -= &mean;
}

/// Embeds the rows of `m` in two dimensions.
pub fn run(m: &FeatureMatrix, config: &TsneConfig) -> Result<Embedding, TsneError> {
    run_array(&m.doc_ids, m.values.view(), config)
}

pub fn run_array(
    doc_ids: &[String],
    x: ArrayView2<'_, f64>,
    config: &TsneConfig,
) -> Result<Embedding, TsneError> {
    assert_eq!(doc_ids.len(), x.nrows(), "one doc_id per row");
    config.validate(x.nrows())?;

    // optimize in doc_id order so row order cannot change the arithmetic
    let mut order: Vec<usize> = (0..doc_ids.len()).collect();
    order.sort_by(|&a, &b| doc_ids[a].cmp(&doc_ids[b]));
    let sorted_ids: Vec<String> = order.iter().map(|&i| doc_ids[i].clone()).collect();
    let (y_sorted, final_kl, kl_trace) = optimize(&sorted_ids, x.select(Axis(0), &order).view(), config)?;

    let mut y = Array2::zeros(y_sorted.raw_dim());
    for (k, &i) in order.iter().enumerate() {
        y.row_mut(i).assign(&y_sorted.row(k));
    }
    Ok(Embedding {
        doc_ids: doc_ids.to_vec(),
        y,
        final_kl,
        kl_trace,
    })
}

fn optimize(
    doc_ids: &[String],
    x: ArrayView2<'_, f64>,
    config: &TsneConfig,
) -> Result<(Array2<f64>, f64, Vec<f64>), TsneError> {
    let p = joint_probabilities(x, config.perplexity, config.sigma_tolerance)?.p;

    let mut y = initial_embedding(doc_ids, config.seed);
    center(&mut y);
    let mut y_prev = y.clone();
    let mut kl_trace = Vec::with_capacity(config.n_iters);
    let use_gains = config.adaptive_gains && !config.plain_descent;
    let mut gains = Array2::<f64>::ones(y.raw_dim());

    for iter in 0..config.n_iters {
        let (q, unnorm) = low_dim_affinities(y.view());
        kl_trace.push(kl_divergence(&p, &q));
        let exaggeration = config.exaggeration(iter);
        let grad = if exaggeration == 1.0 {
            gradient(&p, &q, &unnorm, y.view())
        } else {
            gradient(&(&p * exaggeration), &q, &unnorm, y.view())
        };
        let momentum = config.momentum(iter);
        let velocity = &y - &y_prev;
        if use_gains {
            Zip::from(&mut gains).and(&grad).and(&velocity).for_each(|g, &d, &v| {
                *g = if (d > 0.0) != (v > 0.0) { *g + GAIN_STEP } else { (*g * GAIN_DECAY).max(MIN_GAIN) };
            });
        }
        let next = &y - &(grad * &gains * config.learning_rate) + &(velocity * momentum);
        y_prev = y;
        y = next;
        center(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TsneError::NonFinite(iter));
        }
    }

    let (q, _) = low_dim_affinities(y.view());
    Ok((y, kl_divergence(&p, &q), kl_trace))
}

/// Mean silhouette coefficient of `labels` in the coordinates `y`.
///
/// Points in singleton clusters count as 0. Returns 0 when there are
/// fewer than two clusters.
pub fn silhouette(y: ArrayView2<'_, f64>, labels: &[usize]) -> f64 {
    let n = y.nrows();
    assert_eq!(n, labels.len());
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let sizes: Vec<usize> = (0..k).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return 0.0;
    }
    let d = pairwise_sq_distances(y).mapv(f64::sqrt);
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += d[[i, j]];
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

impl Embedding {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("doc_id,x,y\n");
        for (id, row) in self.doc_ids.iter().zip(self.y.rows()) {
            out.push_str(&format!("{},{},{}\n", csv_field(id), format_real(row[0]), format_real(row[1])));
        }
        out
    }

    pub fn kl_trace_csv(&self) -> String {
        let mut out = String::from("iter,kl\n");
        for (i, kl) in self.kl_trace.iter().enumerate() {
            out.push_str(&format!("{i},{}\n", format_real(*kl)));
        }
        out
    }

    /// Reads coordinates back; the KL fields are left empty.
    pub fn from_csv_str(text: &str) -> Result<Embedding, TsneError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["doc_id", "x", "y"] {
            return Err(TsneError::Parse {
                line: 1,
                message: "expected header `doc_id,x,y`".into(),
            });
        }
        let mut doc_ids = Vec::new();
        let mut flat = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            doc_ids.push(record[0].to_string());
            for field in [&record[1], &record[2]] {
                flat.push(field.trim().parse::<f64>().map_err(|_| TsneError::Parse {
                    line,
                    message: format!("not a number: `{field}`"),
                })?);
            }
        }
        let y = Array2::from_shape_vec((doc_ids.len(), 2), flat).expect("two columns per row");
        Ok(Embedding {
            doc_ids,
            y,
            final_kl: f64::NAN,
            kl_trace: Vec::new(),
        })
    }

    pub fn read_csv(path: &Path) -> Result<Embedding, TsneError> {
        Self::from_csv_str(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-3.0..3.0))
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("d{i:03}")).collect()
    }

    #[test]
    fn distances() {
        let d = pairwise_sq_distances(array![[0.0, 0.0], [3.0, 4.0]].view());
        assert_eq!(d, array![[0.0, 25.0], [25.0, 0.0]]);
        let same = pairwise_sq_distances(array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]].view());
        assert!(same.iter().all(|&v| v == 0.0));

        let x = random_matrix(4, 3, 1);
        let d = pairwise_sq_distances(x.view());
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += (x[[i, k]] - x[[j, k]]).powi(2);
                }
                assert_abs_diff_eq!(d[[i, j]], s, epsilon = 1e-12);
            }
        }
    }

    fn perplexity_of(p: &[f64]) -> f64 {
        let h: f64 = -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.log2()).sum::<f64>();
        h.exp2()
    }

    #[test]
    fn calibration_examples() {
        let (_, p) = calibrate_sigma(&[2.0; 4], 4.0, 1e-5).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let (_, p) = calibrate_sigma(&[7.0; 9], 9.0, 1e-5).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
        assert!(calibrate_sigma(&[7.0; 9], 4.0, 1e-5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let row: Vec<f64> = (0..9).map(|_| rng.random_range(0.1..20.0)).collect();
        let (sigma, p) = calibrate_sigma(&row, 4.0, 1e-5).unwrap();
        assert!(sigma.is_finite() && sigma > 0.0);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!((perplexity_of(&p) - 4.0).abs() < 1e-4);
    }

    #[test]
    fn joint_distribution_properties() {
        let p = joint_probabilities(random_matrix(15, 4, 9).view(), 4.0, 1e-5).unwrap().p;
        assert_abs_diff_eq!(p.sum(), 1.0, epsilon = 1e-9);
        for i in 0..15 {
            assert_eq!(p[[i, i]], 0.0);
            for j in 0..15 {
                assert_abs_diff_eq!(p[[i, j]], p[[j, i]], epsilon = 1e-18);
                assert!(p[[i, j]] >= 0.0);
            }
        }

        // equilateral triangle, perplexity 2: every conditional is 1/2
        let h = 3f64.sqrt() / 2.0;
        let tri = array![[0.0, 0.0], [1.0, 0.0], [0.5, h]];
        let p = joint_probabilities(tri.view(), 2.0, 1e-5).unwrap().p;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_abs_diff_eq!(p[[i, j]], 1.0 / 6.0, epsilon = 1e-9);
                }
            }
        }

        let mut far = random_matrix(8, 3, 4);
        far.row_mut(7).fill(1e4);
        let p = joint_probabilities(far.view(), 3.0, 1e-5).unwrap().p;
        assert!(p.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(p.sum(), 1.0, epsilon = 1e-9);
        assert!(p.row(7).iter().enumerate().all(|(j, &v)| j == 7 || v > 0.0));

        assert!(matches!(
            joint_probabilities(tri.view(), 3.0, 1e-5),
            Err(TsneError::Perplexity { .. })
        ));
    }

    #[test]
    fn low_dim_examples() {
        let (q, unnorm) = low_dim_affinities(array![[0.0, 0.0], [1.0, 0.0]].view());
        assert_eq!(unnorm[[0, 1]], 0.5);
        assert_eq!(unnorm[[1, 0]], 0.5);
        assert_eq!(q[[0, 1]], 0.5);
        let (q, _) = low_dim_affinities(array![[2.0, 2.0], [2.0, 2.0]].view());
        assert_eq!(q[[1, 0]], 0.5);
        let (q, _) = low_dim_affinities(random_matrix(6, 2, 5).view());
        assert_abs_diff_eq!(q.sum(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn kl_examples() {
        let p = array![[0.0, 0.6], [0.4, 0.0]];
        let q = array![[0.0, 0.5], [0.5, 0.0]];
        let oracle = 0.6 * (0.6f64 / 0.5).ln() + 0.4 * (0.4f64 / 0.5).ln();
        assert_abs_diff_eq!(kl_divergence(&p, &q), oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(kl_divergence(&p, &q), 0.020136, epsilon = 1e-6);
        assert_eq!(kl_divergence(&p, &p), 0.0);
    }

    #[test]
    fn gradient_zero_at_match_and_sums_to_zero() {
        let y = random_matrix(7, 2, 11);
        let (q, unnorm) = low_dim_affinities(y.view());
        let g = gradient(&q, &q, &unnorm, y.view());
        assert!(g.iter().all(|v| v.abs() < 1e-15));

        let p = joint_probabilities(random_matrix(7, 5, 12).view(), 3.0, 1e-5).unwrap().p;
        let g = gradient(&p, &q, &unnorm, y.view());
        let s = g.sum_axis(Axis(0));
        assert!(s[0].abs() < 1e-9 && s[1].abs() < 1e-9);
    }

    pub(crate) fn finite_difference_error(n: usize, seed: u64) -> f64 {
        let p = joint_probabilities(random_matrix(n, 4, seed).view(), 2.0, 1e-5).unwrap().p;
        let y = random_matrix(n, 2, seed + 1000);
        let (q, unnorm) = low_dim_affinities(y.view());
        let g = gradient(&p, &q, &unnorm, y.view());
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in 0..2 {
                let mut plus = y.clone();
                plus[[i, k]] += h;
                let mut minus = y.clone();
                minus[[i, k]] -= h;
                let fd = (kl_divergence(&p, &low_dim_affinities(plus.view()).0)
                    - kl_divergence(&p, &low_dim_affinities(minus.view()).0))
                    / (2.0 * h);
                let rel = (fd - g[[i, k]]).abs() / fd.abs().max(g[[i, k]].abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let err = finite_difference_error(5, seed);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn plain_descent_is_monotone() {
        let x = random_matrix(12, 9, 21);
        let cfg = TsneConfig {
            learning_rate: 1.0,
            n_iters: 200,
            plain_descent: true,
            ..TsneConfig::default()
        };
        let e = run_array(&ids(12), x.view(), &cfg).unwrap();
        assert_eq!(e.kl_trace.len(), 200);
        for w in e.kl_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{} -> {}", w[0], w[1]);
        }
        assert!(e.final_kl <= e.kl_trace[199] + 1e-8);
    }

    #[test]
    fn deterministic_and_validated() {
        let x = random_matrix(10, 3, 2);
        let cfg = TsneConfig {
            n_iters: 150,
            seed: 7,
            ..TsneConfig::default()
        };
        let a = run_array(&ids(10), x.view(), &cfg).unwrap();
        let b = run_array(&ids(10), x.view(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.y.iter().all(|v| v.is_finite()));
        let mean = a.y.mean_axis(Axis(0)).unwrap();
        assert!(mean.iter().all(|v| v.abs() < 1e-9));

        let bad = TsneConfig {
            perplexity: 10.0,
            ..cfg.clone()
        };
        assert!(matches!(run_array(&ids(10), x.view(), &bad), Err(TsneError::Perplexity { .. })));
        assert!(matches!(
            run_array(&ids(2), x.slice(ndarray::s![..2, ..]), &cfg),
            Err(TsneError::TooFewPoints(2))
        ));
        let neg = TsneConfig {
            learning_rate: -1.0,
            ..cfg
        };
        assert!(matches!(run_array(&ids(10), x.view(), &neg), Err(TsneError::Config(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let x = random_matrix(6, 3, 8);
        let cfg = TsneConfig {
            perplexity: 2.0,
            learning_rate: 1e300,
            n_iters: 50,
            ..TsneConfig::default()
        };
        assert!(matches!(run_array(&ids(6), x.view(), &cfg), Err(TsneError::NonFinite(_))));
    }

    #[test]
    fn row_permutation_permutes_embedding() {
        let x = random_matrix(9, 4, 30);
        let names = ids(9);
        let cfg = TsneConfig {
            perplexity: 3.0,
            n_iters: 300,
            ..TsneConfig::default()
        };
        let a = run_array(&names, x.view(), &cfg).unwrap();
        let perm = [4, 0, 8, 2, 6, 1, 3, 7, 5];
        let xp = x.select(Axis(0), &perm);
        let np: Vec<String> = perm.iter().map(|&i| names[i].clone()).collect();
        let b = run_array(&np, xp.view(), &cfg).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(b.y.row(k), a.y.row(i));
        }
    }

    #[test]
    fn separated_blobs() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut x = Array2::zeros((20, 9));
        for i in 0..20 {
            for k in 0..9 {
                let center = if i >= 10 && k == 0 { 20.0 } else { 0.0 };
                x[[i, k]] = center + normal.sample(&mut rng);
            }
        }
        let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
        // long run: a blob split early on needs time to merge back
        let cfg = TsneConfig { n_iters: 3000, ..TsneConfig::default() };
        let e = run_array(&ids(20), x.view(), &cfg).unwrap();
        let s = silhouette(e.y.view(), &labels);
        assert!(s > 0.8, "silhouette {s}");
    }

    #[test]
    fn silhouette_known_values() {
        let y = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        // a = 1, b = mean(10, sqrt(101))
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(silhouette(y.view(), &[0, 0, 1, 1]), (b - 1.0) / b, epsilon = 1e-12);
        assert_eq!(silhouette(y.view(), &[0, 0, 0, 0]), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let e = Embedding {
            doc_ids: vec!["a".into(), "b".into()],
            y: array![[0.1, -2.5], [1e-9, 3.0]],
            final_kl: 0.3,
            kl_trace: vec![0.5, 0.3],
        };
        let back = Embedding::from_csv_str(&e.to_csv_string()).unwrap();
        assert_eq!(back.y, e.y);
        assert_eq!(back.doc_ids, e.doc_ids);
        assert!(e.kl_trace_csv().starts_with("iter,kl\n0,5.0000000000000000e-1\n"));
        assert!(Embedding::from_csv_str("id,x,y\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn calibration_hits_target(row in prop::collection::vec(0.01f64..50.0, 9..30), target in 2.0f64..8.0) {
            let (_, p) = calibrate_sigma(&row, target, 1e-5).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((perplexity_of(&p) - target).abs() < 1e-4);
        }

        #[test]
        fn kl_nonnegative(seed in 0u64..1000) {
            let p = joint_probabilities(random_matrix(6, 3, seed).view(), 2.0, 1e-5).unwrap().p;
            let (q, _) = low_dim_affinities(random_matrix(6, 2, seed + 1).view());
            prop_assert!(kl_divergence(&p, &q) >= -1e-12);
        }
    }
}
