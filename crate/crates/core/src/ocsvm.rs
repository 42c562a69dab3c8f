//! ν-one-class SVM over precomputed kernels.
//!
//! The dual `min ½ αᵀKα` subject to `Σα = 1`, `0 ≤ α ≤ 1/(νm)` is solved by
//! two-variable working-set steps on the maximally KKT-violating pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, Stage};

pub const DEFAULT_NU_GRID: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5];
pub const DEFAULT_TOL_GRID: [f64; 3] = [1e-3, 1e-4, 1e-5];
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Symmetry tolerance for training kernels.
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub nu: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl FitParams {
    pub fn new(nu: f64, tol: f64) -> Self {
        FitParams {
            nu,
            tol,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Trained detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcsvmModel {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub nu: f64,
    pub tol: f64,
    pub support: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest KKT violation `max G_down − min G_up` at exit.
    pub kkt_gap: f64,
    pub stage: Stage,
    pub provenance_hash: String,
}

impl OcsvmModel {
    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.alpha.len() as f64)
    }

    /// `½ αᵀKα` for the given training kernel.
    pub fn dual_objective(&self, k: &KernelMatrix) -> f64 {
        dual_objective(&self.alpha, k)
    }
}

pub fn dual_objective(alpha: &[f64], k: &KernelMatrix) -> f64 {
    let mut acc = 0.0;
    for (i, ai) in alpha.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        let row = k.matrix.row(i);
        acc += ai * row.iter().zip(alpha).map(|(kij, aj)| kij * aj).sum::<f64>();
    }
    0.5 * acc
}

pub fn fit(k: &KernelMatrix, params: &FitParams) -> Result<OcsvmModel> {
    let m = k.rows();
    if !k.matrix.is_square() {
        return Err(Error::NotSquare {
            rows: k.rows(),
            cols: k.cols(),
        });
    }
    if m == 0 {
        return Err(Error::EmptyInput("training kernel".into()));
    }
    let nu = params.nu;
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParameter(format!("nu = {nu} not in (0, 1]")));
    }
    let nu_m = nu * m as f64;
    if nu_m < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "nu * m = {nu_m} < 1; increase nu or the training size"
        )));
    }
    if !(params.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let asym = k.matrix.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }

    let cap = 1.0 / nu_m;
    let full = (nu_m.floor() as usize).min(m);
    let mut alpha = vec![0.0; m];
    for a in alpha.iter_mut().take(full) {
        *a = cap;
    }
    if full < m {
        alpha[full] = (1.0 - full as f64 * cap).max(0.0);
    }

    // gradient of ½αᵀKα is Kα
    let mut grad = vec![0.0; m];
    for (j, &aj) in alpha.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        for (g, kij) in grad.iter_mut().zip(k.matrix.row(j)) {
            *g += aj * kij;
        }
    }

    let mut iterations = 0;
    let mut gap;
    loop {
        // up: may increase (α < cap); down: may decrease (α > 0)
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for t in 0..m {
            if alpha[t] < cap && up.is_none_or(|u| grad[t] < grad[u]) {
                up = Some(t);
            }
            if alpha[t] > 0.0 && down.is_none_or(|d| grad[t] > grad[d]) {
                down = Some(t);
            }
        }
        let (Some(i), Some(j)) = (up, down) else {
            gap = 0.0;
            break;
        };
        gap = grad[j] - grad[i];
        if gap < params.tol || iterations >= params.max_iter {
            break;
        }
        iterations += 1;

        let quad = (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j)).max(1e-12);
        let room_i = cap - alpha[i];
        let room_j = alpha[j];
        let mut delta = gap / quad;
        if delta >= room_i.min(room_j) {
            delta = room_i.min(room_j);
            if room_i <= room_j {
                alpha[i] = cap;
                alpha[j] -= delta;
                if room_i == room_j {
                    alpha[j] = 0.0;
                }
            } else {
                alpha[i] += delta;
                alpha[j] = 0.0;
            }
        } else {
            alpha[i] += delta;
            alpha[j] -= delta;
        }
        let ki = k.matrix.row(i);
        let kj = k.matrix.row(j);
        for t in 0..m {
            grad[t] += delta * (ki[t] - kj[t]);
        }
    }

    let theta_low = 1e-8 / m as f64;
    let support: Vec<usize> = (0..m).filter(|&t| alpha[t] > theta_low).collect();
    let margin: Vec<usize> = support
        .iter()
        .copied()
        .filter(|&t| alpha[t] < cap - theta_low)
        .collect();
    let pool = if margin.is_empty() { &support } else { &margin };
    let rho = pool.iter().map(|&t| grad[t]).sum::<f64>() / pool.len() as f64;

    Ok(OcsvmModel {
        alpha,
        rho,
        nu,
        tol: params.tol,
        support,
        iterations,
        converged: gap < params.tol,
        kkt_gap: gap,
        stage: k.stage,
        provenance_hash: k.provenance.hash(),
    })
}

/// `f(x) = Σ_j α_j K(x, x_j) − ρ` for each evaluation row of `k_cross`.
pub fn decision_scores(model: &OcsvmModel, k_cross: &KernelMatrix) -> Result<Vec<f64>> {
    if k_cross.cols() != model.alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: model.alpha.len(),
            actual: k_cross.cols(),
        });
    }
    if k_cross.stage != model.stage {
        return Err(Error::ProvenanceMismatch(format!(
            "model trained on {:?} kernel, scored against {:?}",
            model.stage, k_cross.stage
        )));
    }
    let hash = k_cross.provenance.hash();
    if hash != model.provenance_hash {
        return Err(Error::ProvenanceMismatch(format!(
            "kernel function {hash} differs from training kernel {}",
            model.provenance_hash
        )));
    }
    Ok(k_cross
        .matrix
        .iter_rows()
        .map(|row| {
            model
                .support
                .iter()
                .map(|&j| model.alpha[j] * row[j])
                .sum::<f64>()
                - model.rho
        })
        .collect())
}

/// Normal (0) on or inside the boundary, anomaly (1) outside.
pub fn predict(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&f| u8::from(f < 0.0)).collect()
}

/// Confusion counts and derived scores with anomaly as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

pub fn evaluate(pred: &[u8], truth: &[u8]) -> Result<EvalMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(EvalMetrics {
        tp,
        fp,
        tn,
        fn_,
        precision,
        recall,
        f1,
        accuracy: ratio(tp + tn, pred.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub nu: f64,
    pub tol: f64,
    pub metrics: Option<EvalMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: SweepCell,
    pub best_model: OcsvmModel,
    pub cells: Vec<SweepCell>,
}

/// Fits every (ν, tol) grid point and keeps the best test F1; ties go to the
/// smaller ν, then the smaller tolerance. Failed cells are recorded and skipped.
pub fn sweep(
    k_train: &KernelMatrix,
    k_test: &KernelMatrix,
    truth: &[u8],
    nu_grid: &[f64],
    tol_grid: &[f64],
    max_iter: usize,
) -> Result<SweepResult> {
    if nu_grid.is_empty() || tol_grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be non-empty".into()));
    }
    let grid: Vec<(f64, f64)> = nu_grid
        .iter()
        .flat_map(|&nu| tol_grid.iter().map(move |&tol| (nu, tol)))
        .collect();
    let outcomes: Vec<Result<(OcsvmModel, EvalMetrics)>> = grid
        .par_iter()
        .map(|&(nu, tol)| {
            let model = fit(k_train, &FitParams { nu, tol, max_iter })?;
            let scores = decision_scores(&model, k_test)?;
            let metrics = evaluate(&predict(&scores), truth)?;
            Ok((model, metrics))
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, OcsvmModel, EvalMetrics)> = None;
    let mut first_error = None;
    for (idx, (&(nu, tol), outcome)) in grid.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok((model, metrics)) => {
                cells.push(SweepCell {
                    nu,
                    tol,
                    metrics: Some(metrics),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((bi, _, bm)) => {
                        let (bnu, btol) = grid[*bi];
                        metrics.f1 > bm.f1
                            || (metrics.f1 == bm.f1 && (nu < bnu || (nu == bnu && tol < btol)))
                    }
                };
                if better {
                    best = Some((idx, model, metrics));
                }
            }
            Err(e) => {
                cells.push(SweepCell {
                    nu,
                    tol,
                    metrics: None,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some((idx, best_model, _)) => Ok(SweepResult {
            best: cells[idx].clone(),
            best_model,
            cells,
        }),
        None => Err(first_error.expect("non-empty grid")),
    }
}
