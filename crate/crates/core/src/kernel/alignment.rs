use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Alignment diagnostics for one kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// Alignment against a reference kernel, when one is given.
    pub ka: Option<f64>,
    pub kta: Option<f64>,
    /// `1 − KA(ideal, noisy)` for noisy kernels.
    pub d_error: Option<f64>,
    pub operands: Vec<String>,
}

fn check_same_square(a: &Matrix, b: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: b.rows(),
        });
    }
    Ok(())
}

fn frobenius_inner(a: &Matrix, b: &Matrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Normalized Frobenius inner product `<K1,K2>_F / (‖K1‖_F ‖K2‖_F)`, which is
/// `Tr(K1 K2)/√(Tr(K1²) Tr(K2²))` for symmetric operands.
pub fn kernel_alignment(k1: &Matrix, k2: &Matrix) -> Result<f64> {
    check_same_square(k1, k2)?;
    let n1 = frobenius_inner(k1, k1);
    let n2 = frobenius_inner(k2, k2);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(frobenius_inner(k1, k2) / (n1 * n2).sqrt())
}

/// Normal (0) maps to +1 and anomaly (1) to −1.
pub fn labels_to_targets(labels: &[u8]) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// `yᵀKy / (√Tr(K²) · m)` for targets `y ∈ {−1, +1}^m`.
pub fn kernel_target_alignment(k: &Matrix, y: &[f64]) -> Result<f64> {
    if !k.is_square() {
        return Err(Error::NotSquare {
            rows: k.rows(),
            cols: k.cols(),
        });
    }
    if y.len() != k.rows() {
        return Err(Error::DimensionMismatch {
            expected: k.rows(),
            actual: y.len(),
        });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter("targets must be +1 or -1".into()));
    }
    let norm = frobenius_inner(k, k).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let quad: f64 = k
        .iter_rows()
        .zip(y)
        .map(|(row, yi)| yi * row.iter().zip(y).map(|(kij, yj)| kij * yj).sum::<f64>())
        .sum();
    Ok(quad / (norm * y.len() as f64))
}

/// `1 − KA(K_ideal, K_noisy)`; zero for identical kernels.
pub fn dissimilarity_error(ideal: &Matrix, noisy: &Matrix) -> Result<f64> {
    Ok(1.0 - kernel_alignment(ideal, noisy)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdFloor {
    pub min_eigenvalue: f64,
    /// The input with negative eigenvalues set to zero when clipping was
    /// requested, otherwise the input unchanged.
    pub matrix: Matrix,
}

pub fn psd_floor(k: &Matrix, clip: bool) -> Result<PsdFloor> {
    if !k.is_square() {
        return Err(Error::NotSquare {
            rows: k.rows(),
            cols: k.cols(),
        });
    }
    // symmetrize before decomposing; callers pass symmetric kernels
    let a = k.to_nalgebra();
    let sym = (&a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !clip || min_eigenvalue >= 0.0 {
        return Ok(PsdFloor {
            min_eigenvalue,
            matrix: k.clone(),
        });
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let rebuilt = v * nalgebra::DMatrix::from_diagonal(&clipped) * v.transpose();
    let mut out = Matrix::from_nalgebra(&rebuilt);
    // restore exact symmetry lost to rounding
    for r in 0..out.rows() {
        for c in r + 1..out.cols() {
            let m = 0.5 * (out.get(r, c) + out.get(c, r));
            out.set(r, c, m);
            out.set(c, r, m);
        }
    }
    Ok(PsdFloor {
        min_eigenvalue,
        matrix: out,
    })
}
