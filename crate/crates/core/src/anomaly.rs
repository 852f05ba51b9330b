//! Unsupervised outlier detection over the standardized feature matrix:
//! a ν one-class SVM with an RBF kernel and an isolation forest.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{csv_field, format_real, FeatureMatrix};

/// Euler-Mascheroni constant as used in the average path length.
const EULER_GAMMA: f64 = 0.5772156649;

pub const OCSVM_TOLERANCE: f64 = 1e-6;
pub const OCSVM_MAX_UPDATES: usize = 100_000;
const FREE_SV_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error("need at least 2 documents, got {0}")]
    TooFewRows(usize),
    #[error("nu must lie in (0, 1], got {0}")]
    InvalidNu(f64),
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("feature matrix is constant, so the default gamma is undefined")]
    ConstantMatrix,
    #[error("one-class SVM did not converge after {updates} updates (max KKT violation {violation:e})")]
    NotConverged { updates: usize, violation: f64 },
    #[error("subsample size {psi} must lie in [2, {n}]")]
    InvalidPsi { psi: usize, n: usize },
    #[error("isolation forest needs at least one tree")]
    NoTrees,
    #[error("contamination must lie in (0, 1], got {0}")]
    InvalidContamination(f64),
    #[error("scores must be finite (document `{0}`)")]
    NonFiniteScore(String),
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("no date for document `{0}`")]
    MissingDate(String),
    #[error("report csv line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn rbf_kernel(x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>, gamma: f64) -> f64 {
    assert_eq!(x.len(), z.len(), "kernel arguments must have equal length");
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// `1 / (d * var)` with `var` the population variance of every entry.
pub fn default_gamma(m: ArrayView2<'_, f64>) -> Result<f64, AnomalyError> {
    let n = m.len() as f64;
    if n == 0.0 {
        return Err(AnomalyError::TooFewRows(0));
    }
    let mean = m.sum() / n;
    let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(AnomalyError::ConstantMatrix);
    }
    Ok(1.0 / (m.ncols() as f64 * var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel {
    /// One weight per training row.
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Rows with a positive weight, and those weights.
    pub support_rows: Array2<f64>,
    pub support_alphas: Vec<f64>,
    pub updates: usize,
}

impl OcsvmModel {
    /// Upper bound on each weight, `1 / (nu N)`.
    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.alphas.len() as f64)
    }

    pub fn n_support(&self) -> usize {
        self.alphas.iter().filter(|&&a| a > FREE_SV_TOLERANCE).count()
    }
}

fn kernel_matrix(x: ArrayView2<'_, f64>, gamma: f64) -> Array2<f64> {
    let n = x.nrows();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let v = rbf_kernel(x.row(i), x.row(j), gamma);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Value of the dual objective `0.5 a' K a` for the given data.
pub fn ocsvm_objective(x: ArrayView2<'_, f64>, alphas: &[f64], gamma: f64) -> f64 {
    let a = ArrayView1::from(alphas);
    0.5 * a.dot(&kernel_matrix(x, gamma).dot(&a))
}

/// Solves the one-class dual with pairwise (SMO) updates on the maximally
/// violating pair, which keeps the weights summing to one throughout.
pub fn fit_ocsvm(x: ArrayView2<'_, f64>, nu: f64, gamma: f64) -> Result<OcsvmModel, AnomalyError> {
    let n = x.nrows();
    if n < 2 {
        return Err(AnomalyError::TooFewRows(n));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(AnomalyError::InvalidNu(nu));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(AnomalyError::InvalidGamma(gamma));
    }
    let c = 1.0 / (nu * n as f64);
    let k = kernel_matrix(x, gamma);

    let mut alpha = Array1::<f64>::zeros(n);
    let full = ((nu * n as f64).floor() as usize).min(n);
    alpha.slice_mut(ndarray::s![..full]).fill(c);
    if full < n {
        alpha[full] = (1.0 - full as f64 * c).max(0.0);
    }
    let mut grad = k.dot(&alpha);

    let mut updates = 0;
    loop {
        // i can grow (alpha < C), j can shrink (alpha > 0)
        let mut i_best = None;
        let mut j_best = None;
        for t in 0..n {
            if alpha[t] < c && i_best.is_none_or(|i: usize| grad[t] < grad[i]) {
                i_best = Some(t);
            }
            if alpha[t] > 0.0 && j_best.is_none_or(|j: usize| grad[t] > grad[j]) {
                j_best = Some(t);
            }
        }
        let (Some(i), Some(j)) = (i_best, j_best) else { break };
        let violation = grad[j] - grad[i];
        if violation <= OCSVM_TOLERANCE {
            break;
        }
        if updates >= OCSVM_MAX_UPDATES {
            return Err(AnomalyError::NotConverged { updates, violation });
        }
        let eta = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(1e-12);
        let step = (violation / eta).min(c - alpha[i]).min(alpha[j]);
        alpha[i] += step;
        alpha[j] -= step;
        if c - alpha[i] < 1e-15 {
            alpha[i] = c;
        }
        if alpha[j] < 1e-15 {
            alpha[j] = 0.0;
        }
        grad.scaled_add(step, &k.column(i));
        grad.scaled_add(-step, &k.column(j));
        updates += 1;
    }

    let free: Vec<f64> = (0..n)
        .filter(|&t| alpha[t] > FREE_SV_TOLERANCE && alpha[t] < c - FREE_SV_TOLERANCE)
        .map(|t| grad[t])
        .collect();
    let rho = if free.is_empty() {
        // no margin vectors: midpoint of the interval allowed by the KKT conditions
        let lower = (0..n).filter(|&t| alpha[t] > FREE_SV_TOLERANCE).map(|t| grad[t]).fold(f64::NEG_INFINITY, f64::max);
        let upper = (0..n).filter(|&t| alpha[t] <= FREE_SV_TOLERANCE).map(|t| grad[t]).fold(f64::INFINITY, f64::min);
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            _ => upper,
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };

    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(OcsvmModel {
        support_rows: x.select(Axis(0), &support),
        support_alphas: support.iter().map(|&t| alpha[t]).collect(),
        alphas: alpha.to_vec(),
        rho,
        gamma,
        nu,
        updates,
    })
}

/// `sum_i alpha_i K(x_i, x) - rho`; negative means outlier.
pub fn ocsvm_decision(model: &OcsvmModel, x: ArrayView1<'_, f64>) -> f64 {
    let s: f64 = model
        .support_rows
        .rows()
        .into_iter()
        .zip(&model.support_alphas)
        .map(|(row, a)| a * rbf_kernel(row, x, model.gamma))
        .sum();
    s - model.rho
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// keys: `2 (ln(n - 1) + 0.5772156649) - 2 (n - 1) / n`.
pub fn average_path_length(n: usize) -> f64 {
    assert!(n >= 2, "average path length needs n >= 2");
    let m = (n - 1) as f64;
    2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
}

/// Path-length credit for an unsplit leaf holding `size` points.
pub fn leaf_adjustment(size: usize) -> f64 {
    match size {
        0 | 1 => 0.0,
        2 => 1.0,
        n => average_path_length(n),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IsoNode {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// Nodes stored in a flat arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoTree {
    pub nodes: Vec<IsoNode>,
}

impl IsoTree {
    fn build(x: ArrayView2<'_, f64>, rows: Vec<usize>, limit: usize, rng: &mut ChaCha8Rng) -> IsoTree {
        let mut tree = IsoTree { nodes: Vec::new() };
        tree.grow(x, rows, 0, limit, rng);
        tree
    }

    fn grow(&mut self, x: ArrayView2<'_, f64>, rows: Vec<usize>, depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(IsoNode::Leaf { size: rows.len() });
        if depth >= limit || rows.len() <= 1 {
            return id;
        }
        let ranges: Vec<(usize, f64, f64)> = (0..x.ncols())
            .filter_map(|f| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    (lo.min(x[[r, f]]), hi.max(x[[r, f]]))
                });
                (lo < hi).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let value = rng.random_range(lo..hi);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| x[[r, feature]] < value);
        let left = self.grow(x, left_rows, depth + 1, limit, rng);
        let right = self.grow(x, right_rows, depth + 1, limit, rng);
        self.nodes[id] = IsoNode::Split {
            feature,
            value,
            left,
            right,
        };
        id
    }

    /// Edges from the root to the leaf reached by `x`, plus the leaf credit.
    pub fn path_length(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut node = 0;
        let mut edges = 0.0;
        loop {
            match self.nodes[node] {
                IsoNode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if x[feature] < value { left } else { right };
                    edges += 1.0;
                }
                IsoNode::Leaf { size } => return edges + leaf_adjustment(size),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(tree: &IsoTree, node: usize) -> usize {
            match tree.nodes[node] {
                IsoNode::Split { left, right, .. } => 1 + walk(tree, left).max(walk(tree, right)),
                IsoNode::Leaf { .. } => 0,
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsoForestModel {
    pub trees: Vec<IsoTree>,
    pub psi: usize,
    pub n_trees: usize,
    pub c_psi: f64,
    pub seed: u64,
}

/// Builds `n_trees` isolation trees, each on a subsample of `psi` rows
/// drawn without replacement. `psi` defaults to `min(256, N)`.
pub fn fit_iforest(
    x: ArrayView2<'_, f64>,
    n_trees: usize,
    psi: Option<usize>,
    seed: u64,
) -> Result<IsoForestModel, AnomalyError> {
    let n = x.nrows();
    if n < 2 {
        return Err(AnomalyError::TooFewRows(n));
    }
    if n_trees == 0 {
        return Err(AnomalyError::NoTrees);
    }
    let psi = psi.unwrap_or(n.min(256));
    if psi < 2 || psi > n {
        return Err(AnomalyError::InvalidPsi { psi, n });
    }
    let limit = (psi as f64).log2().ceil() as usize;
    let trees = (0..n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let rows = index::sample(&mut rng, n, psi).into_vec();
            IsoTree::build(x, rows, limit, &mut rng)
        })
        .collect();
    Ok(IsoForestModel {
        trees,
        psi,
        n_trees,
        c_psi: average_path_length(psi),
        seed,
    })
}

pub fn mean_path_length(model: &IsoForestModel, x: ArrayView1<'_, f64>) -> f64 {
    model.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / model.trees.len() as f64
}

/// `2^(-E[h] / c_psi)`; near 1 is anomalous, 0.5 or below is ordinary.
pub fn score_from_path_length(mean_path: f64, c_psi: f64) -> f64 {
    (-mean_path / c_psi).exp2()
}

pub fn iforest_score(model: &IsoForestModel, x: ArrayView1<'_, f64>) -> f64 {
    score_from_path_length(mean_path_length(model, x), model.c_psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    OneClassSvm,
    IsolationForest,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::OneClassSvm => "ocsvm",
            Method::IsolationForest => "iforest",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ocsvm" => Ok(Method::OneClassSvm),
            "iforest" => Ok(Method::IsolationForest),
            other => Err(format!("unknown detection method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub doc_ids: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
    pub method: Method,
    /// Configuration echo, `(key, value)`.
    pub params: Vec<(String, String)>,
}

/// Number of documents the isolation forest flags at a contamination
/// level: `ceil(c N)`, guarded against products like `0.1 * 30` landing
/// just above an integer.
pub fn contamination_count(contamination: f64, n: usize) -> usize {
    ((contamination * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Turns per-document scores into flags.
///
/// One-class SVM scores are decision values and a document is flagged
/// when its value is negative. Isolation-forest scores flag the top
/// `ceil(contamination N)` documents, earlier dates first among ties.
pub fn flag_anomalies(
    doc_ids: &[String],
    dates: &[NaiveDate],
    scores: &[f64],
    method: Method,
    contamination: f64,
) -> Result<AnomalyReport, AnomalyError> {
    let n = doc_ids.len();
    for (what, got) in [("dates", dates.len()), ("scores", scores.len())] {
        if got != n {
            return Err(AnomalyError::LengthMismatch { what, expected: n, got });
        }
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(AnomalyError::NonFiniteScore(doc_ids[i].clone()));
    }
    let flags = match method {
        Method::OneClassSvm => scores.iter().map(|&s| s < 0.0).collect(),
        Method::IsolationForest => {
            if !(contamination > 0.0 && contamination <= 1.0) {
                return Err(AnomalyError::InvalidContamination(contamination));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .total_cmp(&scores[a])
                    .then(dates[a].cmp(&dates[b]))
                    .then(a.cmp(&b))
            });
            let mut flags = vec![false; n];
            for &i in order.iter().take(contamination_count(contamination, n)) {
                flags[i] = true;
            }
            flags
        }
    };
    Ok(AnomalyReport {
        doc_ids: doc_ids.to_vec(),
        dates: dates.to_vec(),
        scores: scores.to_vec(),
        flags,
        method,
        params: Vec::new(),
    })
}

/// Dates recovered from `<YYYY-MM-DD>_...` document ids.
pub fn dates_from_ids(doc_ids: &[String]) -> Result<Vec<NaiveDate>, AnomalyError> {
    doc_ids
        .iter()
        .map(|id| crate::corpus::date_from_id(id).ok_or_else(|| AnomalyError::MissingDate(id.clone())))
        .collect()
}

/// Fits a one-class SVM on the matrix and reports every training row.
/// A `gamma` of `None` uses [`default_gamma`].
pub fn detect_ocsvm(m: &FeatureMatrix, nu: f64, gamma: Option<f64>) -> Result<AnomalyReport, AnomalyError> {
    let x = m.values.view();
    let gamma = match gamma {
        Some(g) => g,
        None => default_gamma(x)?,
    };
    let model = fit_ocsvm(x, nu, gamma)?;
    let scores: Vec<f64> = x.rows().into_iter().map(|r| ocsvm_decision(&model, r)).collect();
    let mut report = flag_anomalies(&m.doc_ids, &dates_from_ids(&m.doc_ids)?, &scores, Method::OneClassSvm, nu)?;
    report.params = vec![
        ("nu".into(), nu.to_string()),
        ("gamma".into(), gamma.to_string()),
        ("rho".into(), model.rho.to_string()),
        ("support_vectors".into(), model.n_support().to_string()),
    ];
    Ok(report)
}

/// Fits an isolation forest on the matrix and reports every training row.
pub fn detect_iforest(
    m: &FeatureMatrix,
    n_trees: usize,
    psi: Option<usize>,
    contamination: f64,
    seed: u64,
) -> Result<AnomalyReport, AnomalyError> {
    let x = m.values.view();
    let model = fit_iforest(x, n_trees, psi, seed)?;
    let scores: Vec<f64> = x.rows().into_iter().map(|r| iforest_score(&model, r)).collect();
    let mut report = flag_anomalies(
        &m.doc_ids,
        &dates_from_ids(&m.doc_ids)?,
        &scores,
        Method::IsolationForest,
        contamination,
    )?;
    report.params = vec![
        ("n_trees".into(), n_trees.to_string()),
        ("psi".into(), model.psi.to_string()),
        ("contamination".into(), contamination.to_string()),
        ("seed".into(), seed.to_string()),
    ];
    Ok(report)
}

impl AnomalyReport {
    pub fn n_flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("doc_id,date,score,flagged,method\n");
        for i in 0..self.doc_ids.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(&self.doc_ids[i]),
                self.dates[i].format("%Y-%m-%d"),
                format_real(self.scores[i]),
                self.flags[i],
                self.method
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), AnomalyError> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<AnomalyReport, AnomalyError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["doc_id", "date", "score", "flagged", "method"] {
            return Err(AnomalyError::Parse {
                line: 1,
                message: "expected header `doc_id,date,score,flagged,method`".into(),
            });
        }
        let mut report = AnomalyReport {
            doc_ids: Vec::new(),
            dates: Vec::new(),
            scores: Vec::new(),
            flags: Vec::new(),
            method: Method::IsolationForest,
            params: Vec::new(),
        };
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| AnomalyError::Parse { line, message };
            report.doc_ids.push(record[0].to_string());
            report.dates.push(
                crate::corpus::parse_date(&record[1]).ok_or_else(|| bad(format!("bad date `{}`", &record[1])))?,
            );
            report
                .scores
                .push(record[2].parse().map_err(|_| bad(format!("bad score `{}`", &record[2])))?);
            report
                .flags
                .push(record[3].parse().map_err(|_| bad(format!("bad flag `{}`", &record[3])))?);
            report.method = record[4].parse().map_err(bad)?;
        }
        Ok(report)
    }

    pub fn read_csv(path: &Path) -> Result<AnomalyReport, AnomalyError> {
        Self::from_csv_str(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, s};
    use rand_distr::{Distribution, Normal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| normal.sample(&mut rng))
    }

    /// Projects onto {0 <= a <= c, sum a = 1} by bisection on the shift.
    fn project_capped_simplex(v: &Array1<f64>, c: f64) -> Array1<f64> {
        let (mut lo, mut hi) = (v.iter().cloned().fold(f64::INFINITY, f64::min) - c, v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let total: f64 = v.iter().map(|x| (x - mid).clamp(0.0, c)).sum();
            if total > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        v.mapv(|x| (x - tau).clamp(0.0, c))
    }

    /// Accelerated projected gradient on the same dual, as a reference.
    fn reference_objective(x: ArrayView2<'_, f64>, nu: f64, gamma: f64) -> f64 {
        let n = x.nrows();
        let c = 1.0 / (nu * n as f64);
        let k = kernel_matrix(x, gamma);
        let step = 1.0 / n as f64; // K is PSD with entries <= 1, so its norm <= n
        let mut a = Array1::from_elem(n, 1.0 / n as f64);
        let mut z = a.clone();
        let mut t: f64 = 1.0;
        for _ in 0..20_000 {
            let next = project_capped_simplex(&(&z - &(k.dot(&z) * step)), c);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &next + &((&next - &a) * ((t - 1.0) / t_next));
            a = next;
            t = t_next;
        }
        0.5 * a.dot(&k.dot(&a))
    }

    #[test]
    fn kernel_values() {
        let x = array![1.0, 2.0];
        assert_eq!(rbf_kernel(x.view(), x.view(), 0.7), 1.0);
        assert_abs_diff_eq!(rbf_kernel(array![0.0].view(), array![1.0].view(), 1.0), 0.36788, epsilon = 1e-5);
        assert!(rbf_kernel(array![0.0].view(), array![1.0].view(), 1e4) < 1e-300);
    }

    #[test]
    fn gamma_rule() {
        // entries {0, 1} equally often: variance 0.25, d = 2
        let m = array![[0.0, 1.0], [1.0, 0.0]];
        assert_abs_diff_eq!(default_gamma(m.view()).unwrap(), 2.0, epsilon = 1e-12);
        let z = crate::features::standardize(&FeatureMatrix::new(
            (0..30).map(|i| i.to_string()).collect(),
            (0..9).map(|i| i.to_string()).collect(),
            gaussian(30, 9, 2),
        ));
        assert_abs_diff_eq!(default_gamma(z.values.view()).unwrap(), 1.0 / 9.0, epsilon = 1e-12);
        assert!(matches!(default_gamma(Array2::from_elem((3, 2), 4.0).view()), Err(AnomalyError::ConstantMatrix)));
    }

    #[test]
    fn ocsvm_feasible_and_matches_reference() {
        for seed in 0..4 {
            let x = gaussian(15, 3, seed);
            let model = fit_ocsvm(x.view(), 0.5, 1.0 / 3.0).unwrap();
            let c = model.upper_bound();
            assert_abs_diff_eq!(model.alphas.iter().sum::<f64>(), 1.0, epsilon = 1e-6);
            assert!(model.alphas.iter().all(|&a| (0.0..=c + 1e-12).contains(&a)));
            let ours = ocsvm_objective(x.view(), &model.alphas, model.gamma);
            let reference = reference_objective(x.view(), 0.5, 1.0 / 3.0);
            assert!((ours - reference).abs() < 1e-5, "seed {seed}: {ours} vs {reference}");
        }
    }

    #[test]
    fn ocsvm_nu_property_and_margin() {
        let n = 60;
        let x = gaussian(n, 4, 5);
        let model = fit_ocsvm(x.view(), 0.5, 0.25).unwrap();
        let outliers = x.rows().into_iter().filter(|r| ocsvm_decision(&model, *r) < 0.0).count();
        assert!(outliers as f64 / n as f64 <= 0.5 + 2.0 / n as f64);
        assert!(model.n_support() + 1 >= (0.5 * n as f64).ceil() as usize);
        let c = model.upper_bound();
        for (row, &a) in x.rows().into_iter().zip(&model.alphas) {
            if a > 1e-8 && a < c - 1e-8 {
                assert!(ocsvm_decision(&model, row).abs() < 1e-4);
            }
        }
        let far = Array1::from_elem(4, 1e3);
        assert_abs_diff_eq!(ocsvm_decision(&model, far.view()), -model.rho, epsilon = 1e-12);
        assert!(model.rho > 0.0);
    }

    #[test]
    fn ocsvm_planted_far_points() {
        let mut x = gaussian(42, 2, 8);
        x.row_mut(40).assign(&array![15.0, 0.0]);
        x.row_mut(41).assign(&array![0.0, -15.0]);
        let gamma = default_gamma(x.view()).unwrap();
        let model = fit_ocsvm(x.view(), 0.5, gamma).unwrap();
        assert!(ocsvm_decision(&model, x.row(40)) < 0.0);
        assert!(ocsvm_decision(&model, x.row(41)) < 0.0);
    }

    #[test]
    fn ocsvm_rejects_bad_parameters() {
        let x = gaussian(5, 2, 1);
        assert!(matches!(fit_ocsvm(x.view(), 0.0, 1.0), Err(AnomalyError::InvalidNu(_))));
        assert!(matches!(fit_ocsvm(x.view(), 1.5, 1.0), Err(AnomalyError::InvalidNu(_))));
        assert!(matches!(fit_ocsvm(x.view(), 0.5, 0.0), Err(AnomalyError::InvalidGamma(_))));
        assert!(matches!(fit_ocsvm(x.slice(s![..1, ..]), 0.5, 1.0), Err(AnomalyError::TooFewRows(1))));
        // nu = 1 pins every weight at 1/N
        let m = fit_ocsvm(x.view(), 1.0, 1.0).unwrap();
        assert!(m.alphas.iter().all(|&a| (a - 0.2).abs() < 1e-12));
    }

    #[test]
    fn path_length_constants() {
        assert_abs_diff_eq!(average_path_length(256), 10.2448, epsilon = 1e-3);
        assert_abs_diff_eq!(average_path_length(2), 2.0 * EULER_GAMMA - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(average_path_length(2), 0.15443, epsilon = 1e-5);
        assert_eq!(leaf_adjustment(1), 0.0);
        assert_eq!(leaf_adjustment(2), 1.0);
        assert_eq!(score_from_path_length(3.7, 3.7), 0.5);
        assert_eq!(score_from_path_length(0.0, 3.7), 1.0);
    }

    #[test]
    fn forest_is_deterministic_and_bounded() {
        let x = gaussian(80, 3, 4);
        let a = fit_iforest(x.view(), 50, Some(32), 11).unwrap();
        let b = fit_iforest(x.view(), 50, Some(32), 11).unwrap();
        assert_eq!(a, b);
        assert!(a.trees.iter().all(|t| t.depth() <= 5));
        let c = fit_iforest(x.view(), 50, Some(32), 12).unwrap();
        assert_ne!(a, c);
        for row in x.rows() {
            let s = iforest_score(&a, row);
            assert!(s > 0.0 && s <= 1.0);
        }
        assert!(matches!(fit_iforest(x.view(), 10, Some(1), 0), Err(AnomalyError::InvalidPsi { .. })));
        assert!(matches!(fit_iforest(x.view(), 0, None, 0), Err(AnomalyError::NoTrees)));
        // identical points never split
        let same = Array2::from_elem((6, 2), 1.0);
        let f = fit_iforest(same.view(), 3, None, 0).unwrap();
        assert!(f.trees.iter().all(|t| t.nodes == vec![IsoNode::Leaf { size: 6 }]));
    }

    #[test]
    fn forest_ranks_planted_outliers() {
        for seed in 0..10 {
            let mut x = gaussian(105, 2, 100 + seed);
            for k in 0..5 {
                let angle = k as f64 * std::f64::consts::TAU / 5.0;
                x.row_mut(100 + k).assign(&array![10.0 * angle.cos(), 10.0 * angle.sin()]);
            }
            let model = fit_iforest(x.view(), 100, None, seed).unwrap();
            let scores: Vec<f64> = x.rows().into_iter().map(|r| iforest_score(&model, r)).collect();
            let mut order: Vec<usize> = (0..105).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            for k in 100..105 {
                assert!(order[..7].contains(&k), "seed {seed}: planted {k} not in top 7");
            }
        }
    }

    fn day(i: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(1981, 1, 1).unwrap() + chrono::Days::new(i as u64 * 30)
    }

    #[test]
    fn flagging_rules() {
        let n = 98;
        let ids: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        let dates: Vec<NaiveDate> = (0..n).map(day).collect();
        let scores: Vec<f64> = (0..n).map(|i| (i * 37 % 98) as f64).collect();
        let r = flag_anomalies(&ids, &dates, &scores, Method::IsolationForest, 0.1).unwrap();
        assert_eq!(r.n_flagged(), 10);

        let equal = vec![0.4; n];
        let mut shuffled_dates = dates.clone();
        shuffled_dates.reverse();
        let r = flag_anomalies(&ids, &shuffled_dates, &equal, Method::IsolationForest, 0.1).unwrap();
        let flagged: Vec<usize> = (0..n).filter(|&i| r.flags[i]).collect();
        assert_eq!(flagged, (88..98).collect::<Vec<_>>());

        let r = flag_anomalies(&ids, &dates, &vec![0.3; n], Method::OneClassSvm, 0.5).unwrap();
        assert_eq!(r.n_flagged(), 0);
        assert_eq!(contamination_count(0.1, 30), 3);
        assert_eq!(contamination_count(0.25, 60), 15);
        assert!(flag_anomalies(&ids, &dates[..3], &scores, Method::OneClassSvm, 0.5).is_err());
        assert!(flag_anomalies(&ids, &dates, &scores, Method::IsolationForest, 0.0).is_err());
    }

    #[test]
    fn report_csv_round_trip() {
        let ids = vec!["1984-02-01_a".to_string(), "1985-03-04_b".to_string()];
        let dates = dates_from_ids(&ids).unwrap();
        let r = flag_anomalies(&ids, &dates, &[0.25, -0.5], Method::OneClassSvm, 0.5).unwrap();
        let text = r.to_csv_string();
        assert!(text.starts_with("doc_id,date,score,flagged,method\n1984-02-01_a,1984-02-01,"));
        let back = AnomalyReport::from_csv_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(matches!(dates_from_ids(&["nodate".to_string()]), Err(AnomalyError::MissingDate(_))));
    }
}
