//! Encoding circuits `U(x)` for the four feature-map families and the
//! min–max scaler that maps features onto rotation angles.
//!
//! Dense-angle (2-DoF) families put two features on each qubit, so `N`
//! features need `N/2` qubits. The ZZ map puts one feature per qubit.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sim::{Circuit, Gate};

/// Largest feature count accepted by the ZZ map (one qubit per feature).
pub const ZZ_MAX_FEATURES: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// `U3(π/2, ·, ·)` layer, CNOT chain, then `RZ`/`RX` layer.
    Belis,
    /// A single `U3(π/2, ·, ·)` layer; no entanglement.
    Simple2DoF,
    /// `RY`/`RX` layers, CNOT ring, closing `RY(π/2)` layer. Never repeated.
    Sakhnenko10,
    /// Second-order Pauli-Z evolution with linear entanglement.
    ZZ,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Belis,
        Family::Simple2DoF,
        Family::Sakhnenko10,
        Family::ZZ,
    ];

    pub fn is_dense_angle(self) -> bool {
        !matches!(self, Family::ZZ)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Fully determines the encoding unitary for a given input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub family: Family,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "unit")]
    pub bandwidth: f64,
    pub features: usize,
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}

impl FeatureMapSpec {
    pub fn new(family: Family, features: usize) -> Self {
        FeatureMapSpec {
            family,
            repetitions: 1,
            bandwidth: 1.0,
            features,
        }
    }

    pub fn with_repetitions(mut self, r: usize) -> Self {
        self.repetitions = r;
        self
    }

    pub fn with_bandwidth(mut self, c: f64) -> Self {
        self.bandwidth = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.repetitions) {
            return Err(Error::InvalidParameter(format!(
                "repetitions must be 1..=3, got {}",
                self.repetitions
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must lie in (0, 1], got {}",
                self.bandwidth
            )));
        }
        if self.features == 0 {
            return Err(Error::InvalidParameter("feature count must be positive".into()));
        }
        match self.family {
            Family::ZZ if self.features > ZZ_MAX_FEATURES => Err(Error::InvalidParameter(
                format!("ZZ map supports at most {ZZ_MAX_FEATURES} features"),
            )),
            Family::ZZ => Ok(()),
            _ if !self.features.is_multiple_of(2) => Err(Error::InvalidParameter(format!(
                "{} needs an even feature count, got {}",
                self.family, self.features
            ))),
            Family::Sakhnenko10 if self.repetitions != 1 => Err(Error::InvalidParameter(
                "Sakhnenko10 map is never repeated".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn qubits(&self) -> usize {
        if self.family.is_dense_angle() {
            self.features / 2
        } else {
            self.features
        }
    }
}

/// `(π − a)(π − b)`.
pub fn phi_pair(a: f64, b: f64) -> f64 {
    (PI - a) * (PI - b)
}

/// Builds `U(x)` for scaled features `x`.
pub fn build(spec: &FeatureMapSpec, x: &[f64]) -> Result<Circuit> {
    spec.validate()?;
    if x.len() != spec.features {
        return Err(Error::DimensionMismatch {
            expected: spec.features,
            actual: x.len(),
        });
    }
    let n = spec.qubits();
    let mut circ = Circuit::new(n)?;
    for _ in 0..spec.repetitions {
        match spec.family {
            Family::Simple2DoF => {
                for k in 0..n {
                    circ.push(Gate::u3(k, FRAC_PI_2, x[2 * k], x[2 * k + 1]))?;
                }
            }
            Family::Belis => {
                for k in 0..n {
                    circ.push(Gate::u3(k, FRAC_PI_2, x[2 * k], x[2 * k + 1]))?;
                }
                for k in 0..n.saturating_sub(1) {
                    circ.push(Gate::cnot(k, k + 1))?;
                }
                for k in 0..n {
                    circ.push(Gate::rz(k, x[2 * k]))?;
                    circ.push(Gate::rx(k, x[2 * k + 1]))?;
                }
            }
            Family::Sakhnenko10 => {
                for k in 0..n {
                    circ.push(Gate::ry(k, x[2 * k]))?;
                }
                for k in 0..n {
                    circ.push(Gate::rx(k, x[2 * k + 1]))?;
                }
                match n {
                    1 => {}
                    2 => circ.push(Gate::cnot(0, 1))?,
                    _ => {
                        for k in 0..n {
                            circ.push(Gate::cnot(k, (k + 1) % n))?;
                        }
                    }
                }
                for k in 0..n {
                    circ.push(Gate::ry(k, FRAC_PI_2))?;
                }
            }
            Family::ZZ => {
                for k in 0..n {
                    circ.push(Gate::h(k))?;
                }
                for k in 0..n {
                    circ.push(Gate::p(k, 2.0 * x[k]))?;
                }
                for k in 0..n.saturating_sub(1) {
                    circ.push(Gate::cnot(k, k + 1))?;
                    circ.push(Gate::p(k + 1, 2.0 * phi_pair(x[k], x[k + 1])))?;
                    circ.push(Gate::cnot(k, k + 1))?;
                }
            }
        }
    }
    Ok(circ)
}

/// Per-feature min–max map onto `[−πc, πc]`, fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// Features whose training range is empty; they encode to 0.
    pub degenerate: Vec<bool>,
    pub bandwidth: f64,
}

/// Scaled angles, each within `[−πc, πc]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFeatures(pub Vec<f64>);

impl ScaledFeatures {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

pub fn fit_scaler(train: &Matrix, bandwidth: f64) -> Result<AngleScaler> {
    if train.rows() < 2 || train.cols() == 0 {
        return Err(Error::EmptyInput(
            "angle scaler needs at least two training rows".into(),
        ));
    }
    if !(bandwidth > 0.0 && bandwidth <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must lie in (0, 1], got {bandwidth}"
        )));
    }
    let mut mins = vec![f64::INFINITY; train.cols()];
    let mut maxs = vec![f64::NEG_INFINITY; train.cols()];
    for row in train.iter_rows() {
        for (k, &v) in row.iter().enumerate() {
            mins[k] = mins[k].min(v);
            maxs[k] = maxs[k].max(v);
        }
    }
    let degenerate = mins.iter().zip(&maxs).map(|(lo, hi)| !(hi > lo)).collect();
    Ok(AngleScaler {
        mins,
        maxs,
        degenerate,
        bandwidth,
    })
}

impl AngleScaler {
    pub fn features(&self) -> usize {
        self.mins.len()
    }

    pub fn scale(&self, x: &[f64]) -> Result<ScaledFeatures> {
        if x.len() != self.features() {
            return Err(Error::DimensionMismatch {
                expected: self.features(),
                actual: x.len(),
            });
        }
        let bound = PI * self.bandwidth;
        let values = x
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if self.degenerate[k] {
                    return 0.0;
                }
                let unit = 2.0 * (v - self.mins[k]) / (self.maxs[k] - self.mins[k]) - 1.0;
                (self.bandwidth * unit * PI).clamp(-bound, bound)
            })
            .collect();
        Ok(ScaledFeatures(values))
    }

    pub fn scale_matrix(&self, m: &Matrix) -> Result<Matrix> {
        let mut out = Vec::with_capacity(m.rows() * m.cols());
        for row in m.iter_rows() {
            out.extend(self.scale(row)?.0);
        }
        Matrix::from_vec(m.rows(), m.cols(), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{overlap_probability, run_pure};

    fn column(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn scaler_extrema() {
        let s = fit_scaler(&column(&[0.0, 2.0, 4.0]), 1.0).unwrap();
        assert_eq!((s.mins[0], s.maxs[0]), (0.0, 4.0));
        assert!(!s.degenerate[0]);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let s = fit_scaler(&column(&[5.0, 5.0, 5.0]), 1.0).unwrap();
        assert!(s.degenerate[0]);
        assert_eq!(s.scale(&[5.0]).unwrap().0, vec![0.0]);
        assert_eq!(s.scale(&[17.0]).unwrap().0, vec![0.0]);
    }

    #[test]
    fn bandwidth_shrinks_endpoints() {
        let s = fit_scaler(&column(&[0.0, 4.0]), 0.5).unwrap();
        assert!((s.scale(&[0.0]).unwrap().0[0] + FRAC_PI_2).abs() < 1e-15);
        assert!((s.scale(&[4.0]).unwrap().0[0] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn scale_endpoints_midpoint_and_clamp() {
        let s = fit_scaler(&column(&[-1.0, 3.0]), 1.0).unwrap();
        assert!((s.scale(&[-1.0]).unwrap().0[0] + PI).abs() < 1e-15);
        assert!(s.scale(&[1.0]).unwrap().0[0].abs() < 1e-15);
        assert_eq!(s.scale(&[11.0]).unwrap().0[0], PI);
        assert_eq!(s.scale(&[-9.0]).unwrap().0[0], -PI);
        assert!(s.scale(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn scaler_needs_rows() {
        assert!(fit_scaler(&column(&[1.0]), 1.0).is_err());
        assert!(fit_scaler(&column(&[1.0, 2.0]), 0.0).is_err());
    }

    #[test]
    fn phi_pair_values() {
        assert_eq!(phi_pair(PI, PI), 0.0);
        assert_eq!(phi_pair(PI, 0.0), 0.0);
        assert!((phi_pair(0.0, 0.0) - 9.8696).abs() < 1e-4);
    }

    #[test]
    fn gate_counts() {
        let x8 = vec![0.1; 8];
        let simple = build(&FeatureMapSpec::new(Family::Simple2DoF, 8), &x8).unwrap();
        assert_eq!((simple.width(), simple.len()), (4, 4));
        let belis = build(&FeatureMapSpec::new(Family::Belis, 8), &x8).unwrap();
        assert_eq!((belis.width(), belis.len()), (4, 15));
        let zz = build(
            &FeatureMapSpec::new(Family::ZZ, 4).with_repetitions(2),
            &[0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        assert_eq!((zz.width(), zz.len()), (4, 34));
        // 4 RY + 4 RX + 4-CNOT ring + 4 RY
        let sak = build(&FeatureMapSpec::new(Family::Sakhnenko10, 8), &x8).unwrap();
        assert_eq!((sak.width(), sak.len()), (4, 16));
        let sak2 = build(&FeatureMapSpec::new(Family::Sakhnenko10, 4), &[0.1; 4]).unwrap();
        assert_eq!(sak2.len(), 2 + 2 + 1 + 2);
    }

    #[test]
    fn spec_validation() {
        assert!(FeatureMapSpec::new(Family::Belis, 7).validate().is_err());
        assert!(FeatureMapSpec::new(Family::ZZ, 7).validate().is_ok());
        assert!(FeatureMapSpec::new(Family::ZZ, 16).validate().is_err());
        assert!(FeatureMapSpec::new(Family::Sakhnenko10, 8)
            .with_repetitions(2)
            .validate()
            .is_err());
        assert!(FeatureMapSpec::new(Family::Belis, 8)
            .with_repetitions(4)
            .validate()
            .is_err());
        assert!(FeatureMapSpec::new(Family::Belis, 8)
            .with_bandwidth(1.5)
            .validate()
            .is_err());
        let err = build(&FeatureMapSpec::new(Family::Belis, 8), &[0.0; 6]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn build_is_deterministic() {
        let spec = FeatureMapSpec::new(Family::ZZ, 6).with_repetitions(3);
        let x = [0.3, -1.0, 2.2, 0.0, -3.0, 1.7];
        assert_eq!(build(&spec, &x).unwrap(), build(&spec, &x).unwrap());
    }

    fn fidelity(spec: &FeatureMapSpec, a: &[f64], b: &[f64]) -> f64 {
        let sa = run_pure(&build(spec, a).unwrap()).unwrap();
        let sb = run_pure(&build(spec, b).unwrap()).unwrap();
        overlap_probability(&sa, &sb).unwrap()
    }

    #[test]
    fn lambda_slots_inert_for_single_layer_only() {
        let a = [0.4, -1.1, 2.0, 0.3];
        let mut b = a;
        b[1] += 0.9;
        b[3] -= 1.4;
        let r1 = FeatureMapSpec::new(Family::Simple2DoF, 4);
        assert!((fidelity(&r1, &a, &b) - 1.0).abs() < 1e-12);
        let r2 = r1.with_repetitions(2);
        assert!((fidelity(&r2, &a, &b) - 1.0).abs() > 1e-3);
    }

    #[test]
    fn scaling_is_affine_and_monotone() {
        let s = fit_scaler(&column(&[-2.0, 6.0]), 0.8).unwrap();
        let pts: Vec<f64> = (0..9).map(|i| -2.0 + i as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|&p| s.scale(&[p]).unwrap().0[0]).collect();
        let step = ys[1] - ys[0];
        for w in ys.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - step).abs() < 1e-12);
        }
    }
}
