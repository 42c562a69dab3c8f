//! Windowing, standardization and feature reduction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_WINDOW: usize = 60;
pub const TREE_MAX_DEPTH: usize = 8;
pub const TREE_MIN_LEAF: usize = 5;
pub const DEFAULT_NMF_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub matrix: Matrix,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(matrix: Matrix, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.rows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                actual: labels.len(),
            });
        }
        if feature_names.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                actual: feature_names.len(),
            });
        }
        if !matrix.all_finite() {
            return Err(Error::InvalidParameter("dataset contains NaN or Inf".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::SchemaMismatch(format!("duplicate feature name {name:?}")));
            }
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        Ok(Dataset {
            matrix,
            labels,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            matrix: self.matrix.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Windowed copy: features through [`moving_average`], labels through
    /// [`window_labels`].
    pub fn windowed(&self, w: usize, rule: LabelRule) -> Result<Dataset> {
        Ok(Dataset {
            matrix: moving_average(&self.matrix, w)?,
            labels: window_labels(&self.labels, w, rule)?,
            feature_names: self.feature_names.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Anomalous if any raw sample in the window is anomalous.
    #[default]
    AnyAnomaly,
    /// Anomalous if more than half the samples are.
    Majority,
}

fn check_window(m: usize, w: usize) -> Result<()> {
    if w == 0 {
        return Err(Error::InvalidParameter("window length must be >= 1".into()));
    }
    if m < w {
        return Err(Error::InsufficientRows(format!(
            "{m} rows for a window of {w}"
        )));
    }
    Ok(())
}

/// Trailing mean over `w` rows; output row `t` covers input rows `t..t+w`.
pub fn moving_average(x: &Matrix, w: usize) -> Result<Matrix> {
    check_window(x.rows(), w)?;
    let out_rows = x.rows() - w + 1;
    let mut out = Matrix::zeros(out_rows, x.cols());
    for t in 0..out_rows {
        let row = out.row_mut(t);
        for s in t..t + w {
            for (acc, v) in row.iter_mut().zip(x.row(s)) {
                *acc += v;
            }
        }
        for acc in row.iter_mut() {
            *acc /= w as f64;
        }
    }
    Ok(out)
}

pub fn window_labels(labels: &[u8], w: usize, rule: LabelRule) -> Result<Vec<u8>> {
    check_window(labels.len(), w)?;
    Ok(labels
        .windows(w)
        .map(|win| {
            let hits = win.iter().filter(|&&l| l != 0).count();
            let anomalous = match rule {
                LabelRule::AnyAnomaly => hits > 0,
                LabelRule::Majority => 2 * hits > w,
            };
            u8::from(anomalous)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

pub fn zscore_fit(x: &Matrix) -> Result<ZScore> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::EmptyInput("z-score fit".into()));
    }
    if x.rows() < 2 {
        return Err(Error::InsufficientRows("z-score fit needs at least 2 rows".into()));
    }
    let m = x.rows() as f64;
    let mut mean = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - mu).powi(2);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / m).sqrt()).collect();
    let constant = std
        .iter()
        .zip(&mean)
        .map(|(s, mu)| *s <= 1e-12 * mu.abs().max(1.0))
        .collect();
    Ok(ZScore {
        mean,
        std,
        constant,
    })
}

impl ZScore {
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::SchemaMismatch(format!(
                "z-score fitted on {} features, got {}",
                self.mean.len(),
                x.cols()
            )));
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |r, c| {
            if self.constant[c] {
                0.0
            } else {
                (x.get(r, c) - self.mean[c]) / self.std[c]
            }
        }))
    }
}

pub fn zscore_apply(x: &Matrix, z: &ZScore) -> Result<Matrix> {
    z.apply(x)
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    total: f64,
    importance: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i] != 0).count();
        if depth >= TREE_MAX_DEPTH || n < 2 * TREE_MIN_LEAF || pos == 0 || pos == n {
            return;
        }
        let parent = gini(pos as f64, n as f64);
        // (decrease, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.cols() {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let mut left_pos = 0usize;
            for k in 0..n - 1 {
                left_pos += usize::from(self.y[order[k]] != 0);
                let nl = k + 1;
                let nr = n - nl;
                if nl < TREE_MIN_LEAF || nr < TREE_MIN_LEAF {
                    continue;
                }
                let lo = self.x.get(order[k], f);
                let hi = self.x.get(order[k + 1], f);
                if lo == hi {
                    continue;
                }
                let child = (nl as f64 * gini(left_pos as f64, nl as f64)
                    + nr as f64 * gini((pos - left_pos) as f64, nr as f64))
                    / n as f64;
                let decrease = parent - child;
                if best.is_none_or(|(d, _, _)| decrease > d) {
                    best = Some((decrease, f, 0.5 * (lo + hi)));
                }
            }
        }
        let Some((decrease, f, threshold)) = best else {
            return;
        };
        if decrease <= 0.0 {
            return;
        }
        self.importance[f] += n as f64 / self.total * decrease;
        let split = partition(idx, |i| self.x.get(i, f) <= threshold);
        let (left, right) = idx.split_at_mut(split);
        self.grow(left, depth + 1);
        self.grow(right, depth + 1);
    }
}

fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut left: Vec<usize> = idx.iter().copied().filter(|&i| pred(i)).collect();
    let split = left.len();
    left.extend(idx.iter().copied().filter(|&i| !pred(i)));
    idx.copy_from_slice(&left);
    split
}

/// Gini importances of a CART tree with depth ≤ 8 and leaves of ≥ 5 rows,
/// normalized to sum to 1. A tree that never splits gives uniform importance.
pub fn tree_importance(x: &Matrix, labels: &[u8]) -> Result<Vec<f64>> {
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: labels.len(),
        });
    }
    if x.cols() == 0 {
        return Err(Error::EmptyInput("tree features".into()));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    let mut builder = TreeBuilder {
        x,
        y: labels,
        total: x.rows() as f64,
        importance: vec![0.0; x.cols()],
    };
    let mut idx: Vec<usize> = (0..x.rows()).collect();
    builder.grow(&mut idx, 0);
    let sum: f64 = builder.importance.iter().sum();
    if sum <= 0.0 {
        return Ok(vec![1.0 / x.cols() as f64; x.cols()]);
    }
    Ok(builder.importance.iter().map(|v| v / sum).collect())
}

/// Indices of the `n` largest importances, highest first; ties keep column order.
pub fn top_features(importance: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `N × features`, one unit-norm component per row.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

pub fn pca_fit(x: &Matrix, n: usize) -> Result<Pca> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::EmptyInput("PCA fit".into()));
    }
    if n == 0 || n > x.rows().min(x.cols()) {
        return Err(Error::InvalidParameter(format!(
            "PCA with {n} components on a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    let m = x.rows() as f64;
    let mean: Vec<f64> = (0..x.cols()).map(|c| x.column(c).iter().sum::<f64>() / m).collect();
    let centered = DMatrix::from_fn(x.rows(), x.cols(), |r, c| x.get(r, c) - mean[c]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut components = Matrix::zeros(n, x.cols());
    let mut explained_variance = Vec::with_capacity(n);
    let mut explained_variance_ratio = Vec::with_capacity(n);
    for (k, &src) in order.iter().take(n).enumerate() {
        let row: Vec<f64> = v_t.row(src).iter().copied().collect();
        // largest-magnitude loading made positive
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (dst, v) in components.row_mut(k).iter_mut().zip(&row) {
            *dst = sign * v;
        }
        let s2 = svd.singular_values[src].powi(2);
        explained_variance.push(s2 / m);
        explained_variance_ratio.push(if total > 0.0 { s2 / total } else { 0.0 });
    }
    Ok(Pca {
        mean,
        components,
        explained_variance,
        explained_variance_ratio,
    })
}

impl Pca {
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::SchemaMismatch(format!(
                "PCA fitted on {} features, got {}",
                self.mean.len(),
                x.cols()
            )));
        }
        let n = self.components.rows();
        Ok(Matrix::from_fn(x.rows(), n, |r, k| {
            x.row(r)
                .iter()
                .zip(&self.mean)
                .zip(self.components.row(k))
                .map(|((v, mu), w)| (v - mu) * w)
                .sum()
        }))
    }

    /// Maps projected rows back to centered feature space.
    pub fn reconstruct_centered(&self, z: &Matrix) -> Result<Matrix> {
        z.matmul(&self.components)
    }
}

pub fn pca_apply(x: &Matrix, pca: &Pca) -> Result<Matrix> {
    pca.apply(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nmf {
    /// Per-feature training minimum subtracted before factorization.
    pub shift: Vec<f64>,
    /// `N × features` basis.
    pub h: Matrix,
    pub iters: usize,
    pub seed: u64,
    /// Training-set `W`, the reduced features.
    pub w: Matrix,
    /// `‖X − WH‖²_F` before the first update and after each one.
    pub objective: Vec<f64>,
}

fn random_factor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.random::<f64>())
}

fn frob2(x: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    (x - w * h).norm_squared()
}

fn update(target: &mut DMatrix<f64>, num: &DMatrix<f64>, den: &DMatrix<f64>) {
    for ((t, n), d) in target.iter_mut().zip(num.iter()).zip(den.iter()) {
        if *d > 0.0 {
            *t *= n / d;
        }
    }
}

fn shift_rows(x: &Matrix, shift: &[f64], clamp: bool) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let v = x.get(r, c) - shift[c];
            if v < 0.0 && !clamp {
                return Err(Error::NegativeInput(v));
            }
            out[(r, c)] = v.max(0.0);
        }
    }
    Ok(out)
}

/// Lee–Seung multiplicative updates on the min-shifted training matrix.
pub fn nmf_fit(x: &Matrix, n: usize, iters: usize, seed: u64) -> Result<Nmf> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::EmptyInput("NMF fit".into()));
    }
    if n == 0 || n > x.cols() {
        return Err(Error::InvalidParameter(format!(
            "NMF with {n} components on {} features",
            x.cols()
        )));
    }
    let shift: Vec<f64> = (0..x.cols())
        .map(|c| x.column(c).into_iter().fold(f64::INFINITY, f64::min))
        .collect();
    let data = shift_rows(x, &shift, false)?;
    let scale = (data.mean() / n as f64).sqrt().max(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = random_factor(&mut rng, x.rows(), n, scale);
    let mut h = random_factor(&mut rng, n, x.cols(), scale);
    let mut objective = Vec::with_capacity(iters + 1);
    objective.push(frob2(&data, &w, &h));
    for _ in 0..iters {
        let wt = w.transpose();
        let (num, den) = (&wt * &data, &wt * &w * &h);
        update(&mut h, &num, &den);
        let ht = h.transpose();
        let (num, den) = (&data * &ht, &w * (&h * &ht));
        update(&mut w, &num, &den);
        objective.push(frob2(&data, &w, &h));
    }
    Ok(Nmf {
        shift,
        h: Matrix::from_nalgebra(&h),
        iters,
        seed,
        w: Matrix::from_nalgebra(&w),
        objective,
    })
}

impl Nmf {
    /// Solves for `W` with the fitted basis held fixed. Values below the
    /// training minimum are clamped to it.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.shift.len() {
            return Err(Error::SchemaMismatch(format!(
                "NMF fitted on {} features, got {}",
                self.shift.len(),
                x.cols()
            )));
        }
        let data = shift_rows(x, &self.shift, true)?;
        let h = self.h.to_nalgebra();
        let n = h.nrows();
        let scale = (data.mean() / n as f64).sqrt().max(1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut w = random_factor(&mut rng, x.rows(), n, scale);
        let ht = h.transpose();
        let hht = &h * &ht;
        let num = &data * &ht;
        for _ in 0..self.iters {
            let den = &w * &hht;
            update(&mut w, &num, &den);
        }
        Ok(Matrix::from_nalgebra(&w))
    }
}

pub fn nmf_apply(x: &Matrix, nmf: &Nmf) -> Result<Matrix> {
    nmf.apply(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducerKind {
    Tree,
    Pca,
    Nmf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Reducer {
    Tree {
        importance: Vec<f64>,
        selected: Vec<usize>,
    },
    Pca(Pca),
    Nmf(Nmf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPreprocessor {
    pub window: usize,
    pub label_rule: LabelRule,
    pub zscore: ZScore,
    pub reducer: Reducer,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub window: usize,
    #[serde(default)]
    pub label_rule: LabelRule,
    pub reducer: ReducerKind,
    pub n: usize,
    #[serde(default = "default_nmf_iters")]
    pub nmf_iters: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_nmf_iters() -> usize {
    DEFAULT_NMF_ITERS
}

impl PreprocessConfig {
    pub fn new(reducer: ReducerKind, n: usize) -> Self {
        PreprocessConfig {
            window: DEFAULT_WINDOW,
            label_rule: LabelRule::AnyAnomaly,
            reducer,
            n,
            nmf_iters: DEFAULT_NMF_ITERS,
            seed: 0,
        }
    }
}

/// Fits z-score and reducer on already-windowed training rows. The tree
/// reducer ranks features on the labeled `calib` rows, standardized with
/// training statistics.
pub fn fit_preprocessor(
    train: &Matrix,
    calib: Option<(&Matrix, &[u8])>,
    cfg: &PreprocessConfig,
) -> Result<FittedPreprocessor> {
    if cfg.n == 0 {
        return Err(Error::InvalidParameter("target feature count must be >= 1".into()));
    }
    let zscore = zscore_fit(train)?;
    let z_train = zscore.apply(train)?;
    let reducer = match cfg.reducer {
        ReducerKind::Tree => {
            if cfg.n > train.cols() {
                return Err(Error::InvalidParameter(format!(
                    "cannot select {} of {} features",
                    cfg.n,
                    train.cols()
                )));
            }
            let (cx, cy) = calib.ok_or_else(|| {
                Error::InvalidParameter("tree reducer needs a labeled calibration split".into())
            })?;
            let importance = tree_importance(&zscore.apply(cx)?, cy)?;
            let selected = top_features(&importance, cfg.n);
            Reducer::Tree {
                importance,
                selected,
            }
        }
        ReducerKind::Pca => Reducer::Pca(pca_fit(&z_train, cfg.n)?),
        ReducerKind::Nmf => Reducer::Nmf(nmf_fit(&z_train, cfg.n, cfg.nmf_iters, cfg.seed)?),
    };
    Ok(FittedPreprocessor {
        window: cfg.window,
        label_rule: cfg.label_rule,
        zscore,
        reducer,
        n: cfg.n,
    })
}

/// Standardizes and reduces windowed rows to `N` columns.
pub fn reduce(x: &Matrix, fitted: &FittedPreprocessor) -> Result<Matrix> {
    let z = fitted.zscore.apply(x)?;
    match &fitted.reducer {
        Reducer::Tree { selected, .. } => Ok(z.select_cols(selected)),
        Reducer::Pca(p) => p.apply(&z),
        Reducer::Nmf(n) => n.apply(&z),
    }
}
