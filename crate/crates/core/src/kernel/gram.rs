use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::{Backend, ClassicalKernel, KernelMatrix, Provenance, QuantumKernel};
use crate::error::{Error, Result};
use crate::featuremap::{build, FeatureMapSpec};
use crate::matrix::Matrix;
use crate::noise::readout_confusion;
use crate::sim::{
    overlap_probability, run_density, run_pure, zero_outcome_probability, Circuit, DENSITY_CAP,
    PURE_CAP,
};

/// Fills a Gram matrix from a pairwise entry function. With `cols = None` the
/// matrix is square over `rows`: the upper triangle is computed once and
/// mirrored, and the diagonal is always evaluated.
fn fill<F>(n_rows: usize, n_cols: Option<usize>, entry: F) -> Result<Matrix>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    match n_cols {
        None => {
            let upper: Vec<Vec<f64>> = (0..n_rows)
                .into_par_iter()
                .map(|i| (i..n_rows).map(|j| entry(i, j)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            let mut m = Matrix::zeros(n_rows, n_rows);
            for (i, row) in upper.iter().enumerate() {
                for (off, &v) in row.iter().enumerate() {
                    m.set(i, i + off, v);
                    m.set(i + off, i, v);
                }
            }
            Ok(m)
        }
        Some(n_cols) => {
            let rows: Vec<Vec<f64>> = (0..n_rows)
                .into_par_iter()
                .map(|i| (0..n_cols).map(|j| entry(i, j)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            Matrix::from_vec(n_rows, n_cols, rows.into_iter().flatten().collect())
        }
    }
}

fn check_features(spec: &FeatureMapSpec, m: &Matrix) -> Result<()> {
    if m.cols() != spec.features {
        return Err(Error::DimensionMismatch {
            expected: spec.features,
            actual: m.cols(),
        });
    }
    Ok(())
}

fn circuits(spec: &FeatureMapSpec, m: &Matrix) -> Result<Vec<Circuit>> {
    m.iter_rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| build(spec, row))
        .collect()
}

/// Fidelity Gram matrix between scaled feature rows.
///
/// Pure backend: `|<φ(x_i)|φ(x_j)>|²` from simulated states. Density backend:
/// zero-outcome probability of `U(x_i)` followed by `U†(x_j)` under the noise
/// model, readout confusion included.
pub fn quantum_gram(rows: &Matrix, cols: Option<&Matrix>, kernel: &QuantumKernel) -> Result<KernelMatrix> {
    let spec = &kernel.feature_map;
    spec.validate()?;
    check_features(spec, rows)?;
    if let Some(c) = cols {
        check_features(spec, c)?;
    }
    let width = spec.qubits();
    let model = kernel.noise.model();
    let cap = match kernel.backend {
        Backend::Pure => PURE_CAP,
        Backend::Density => DENSITY_CAP,
    };
    if width > cap {
        return Err(Error::CapExceeded {
            backend: match kernel.backend {
                Backend::Pure => "pure-state",
                Backend::Density => "density-matrix",
            },
            width,
            cap,
        });
    }
    model.validate()?;

    let row_circuits = circuits(spec, rows)?;
    let col_circuits = match cols {
        Some(c) => Some(circuits(spec, c)?),
        None => None,
    };
    let n_cols = cols.map(Matrix::rows);
    let stride = n_cols.unwrap_or(rows.rows()) as u64;

    let sample = |p: f64, i: usize, j: usize| -> Result<f64> {
        match kernel.shots {
            None => Ok(p),
            Some(0) => Err(Error::InvalidParameter("shot count must be positive".into())),
            Some(shots) => {
                let mut rng = ChaCha8Rng::seed_from_u64(kernel.shot_seed);
                rng.set_stream(i as u64 * stride + j as u64);
                let draw = Binomial::new(shots, p.clamp(0.0, 1.0))
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                Ok(draw.sample(&mut rng) as f64 / shots as f64)
            }
        }
    };

    let matrix = match kernel.backend {
        Backend::Pure => {
            let states = |cs: &[Circuit]| cs.par_iter().map(run_pure).collect::<Result<Vec<_>>>();
            let row_states = states(&row_circuits)?;
            let col_states = match &col_circuits {
                Some(cs) => Some(states(cs)?),
                None => None,
            };
            let other = col_states.as_ref().unwrap_or(&row_states);
            fill(rows.rows(), n_cols, |i, j| {
                let p = overlap_probability(&row_states[i], &other[j])?;
                sample(p, i, j)
            })?
        }
        Backend::Density => {
            let readout = readout_confusion(&model, width);
            let other = col_circuits.as_ref().unwrap_or(&row_circuits);
            fill(rows.rows(), n_cols, |i, j| {
                let circ = row_circuits[i].compute_uncompute(&other[j])?;
                let rho = run_density(&circ, &model)?;
                let p = zero_outcome_probability(&rho, &readout)?;
                sample(p, i, j)
            })?
        }
    };

    Ok(KernelMatrix::raw(
        matrix,
        Provenance::Quantum {
            feature_map: *spec,
            backend: kernel.backend,
            noise: match kernel.backend {
                Backend::Pure => "none".to_string(),
                Backend::Density => kernel.noise.id(),
            },
        },
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ClassicalKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassicalKernel::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(
                Error::InvalidParameter(format!("RBF gamma must be positive, got {gamma}")),
            ),
            ClassicalKernel::Poly { degree, scale, coef0 } => {
                if degree == 0 {
                    Err(Error::InvalidParameter("polynomial degree must be >= 1".into()))
                } else if !(scale > 0.0 && scale.is_finite() && coef0.is_finite()) {
                    Err(Error::InvalidParameter(
                        "polynomial scale must be positive and coef0 finite".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            ClassicalKernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            ClassicalKernel::Poly {
                degree,
                coef0,
                scale,
            } => (scale * dot(a, b) + coef0).powi(degree as i32),
            ClassicalKernel::Linear => dot(a, b),
        }
    }
}

/// Classical Gram matrix; square over `rows` when `cols` is `None`.
pub fn classical_gram(
    rows: &Matrix,
    cols: Option<&Matrix>,
    kernel: &ClassicalKernel,
) -> Result<KernelMatrix> {
    kernel.validate()?;
    if !rows.all_finite() || !cols.is_none_or(Matrix::all_finite) {
        return Err(Error::InvalidParameter("non-finite kernel input".into()));
    }
    if let Some(c) = cols {
        if c.cols() != rows.cols() {
            return Err(Error::DimensionMismatch {
                expected: rows.cols(),
                actual: c.cols(),
            });
        }
    }
    let other = cols.unwrap_or(rows);
    let matrix = fill(rows.rows(), cols.map(Matrix::rows), |i, j| {
        Ok(kernel.evaluate(rows.row(i), other.row(j)))
    })?;
    Ok(KernelMatrix::raw(matrix, Provenance::Classical { kernel: *kernel }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featuremap::Family;
    use crate::noise::{NoiseSpec, PresetName};

    fn pts() -> Matrix {
        Matrix::from_rows(&[
            vec![0.3, -1.2, 2.0, 0.5],
            vec![-0.7, 0.1, 1.1, -2.9],
            vec![2.5, 2.2, -0.4, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn self_fidelity_is_one() {
        for family in [Family::Belis, Family::Simple2DoF, Family::Sakhnenko10, Family::ZZ] {
            let q = QuantumKernel::pure(FeatureMapSpec::new(family, 4).with_repetitions(1));
            let k = quantum_gram(&pts(), None, &q).unwrap();
            for i in 0..3 {
                assert!((k.get(i, i) - 1.0).abs() < 1e-10, "{family}");
            }
            assert!(k.matrix.max_asymmetry() == 0.0);
        }
    }

    #[test]
    fn simple_map_closed_form() {
        let q = QuantumKernel::pure(FeatureMapSpec::new(Family::Simple2DoF, 4));
        let x = pts();
        let k = quantum_gram(&x, None, &q).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let a = x.row(i);
                let b = x.row(j);
                let expect = ((a[0] - b[0]) / 2.0).cos().powi(2) * ((a[2] - b[2]) / 2.0).cos().powi(2);
                assert!((k.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ideal_density_matches_pure() {
        let spec = FeatureMapSpec::new(Family::Belis, 4).with_repetitions(2);
        let pure = quantum_gram(&pts(), None, &QuantumKernel::pure(spec)).unwrap();
        let dens = quantum_gram(
            &pts(),
            None,
            &QuantumKernel::density(spec, NoiseSpec::Preset(PresetName::Ideal)),
        )
        .unwrap();
        for (a, b) in pure.matrix.data().iter().zip(dens.matrix.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_gram_shape() {
        let q = QuantumKernel::pure(FeatureMapSpec::new(Family::ZZ, 4));
        let x = pts();
        let y = x.select_rows(&[0, 2]);
        let k = quantum_gram(&x, Some(&y), &q).unwrap();
        assert_eq!((k.rows(), k.cols()), (3, 2));
        assert!((k.get(0, 0) - 1.0).abs() < 1e-10);
        assert!((k.get(2, 1) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn feature_mismatch_rejected() {
        let q = QuantumKernel::pure(FeatureMapSpec::new(Family::Belis, 6));
        assert!(matches!(
            quantum_gram(&pts(), None, &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn density_cap_rejected() {
        let q = QuantumKernel::density(
            FeatureMapSpec::new(Family::ZZ, 12),
            NoiseSpec::Preset(PresetName::Ideal),
        );
        let x = Matrix::zeros(2, 12);
        assert!(matches!(quantum_gram(&x, None, &q), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn shot_sampling_is_seeded() {
        let mut q = QuantumKernel::pure(FeatureMapSpec::new(Family::Simple2DoF, 4));
        q.shots = Some(2000);
        q.shot_seed = 9;
        let a = quantum_gram(&pts(), None, &q).unwrap();
        let b = quantum_gram(&pts(), None, &q).unwrap();
        assert_eq!(a, b);
        let exact = quantum_gram(&pts(), None, &QuantumKernel::pure(q.feature_map)).unwrap();
        for (s, e) in a.matrix.data().iter().zip(exact.matrix.data()) {
            assert!((s - e).abs() < 0.06);
        }
    }

    #[test]
    fn classical_values() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let lin = classical_gram(&a, Some(&b), &ClassicalKernel::Linear).unwrap();
        assert_eq!(lin.get(0, 0), 11.0);
        let ones = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let poly = ClassicalKernel::Poly {
            degree: 2,
            coef0: 0.0,
            scale: 1.0,
        };
        assert_eq!(classical_gram(&ones, None, &poly).unwrap().get(0, 0), 4.0);
        let rbf = classical_gram(&a, None, &ClassicalKernel::Rbf { gamma: 0.3 }).unwrap();
        assert_eq!(rbf.get(0, 0), 1.0);
        assert!(classical_gram(&a, None, &ClassicalKernel::Rbf { gamma: 0.0 }).is_err());
        let bad = Matrix::from_rows(&[vec![f64::NAN, 1.0]]).unwrap();
        assert!(classical_gram(&bad, None, &ClassicalKernel::Linear).is_err());
    }
}
