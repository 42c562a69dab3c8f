//! Parametric NISQ noise: depolarizing gate errors, thermal relaxation during
//! gates and symmetric readout confusion, with median-calibration presets for
//! three IBM machines.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Confusion, DensityMatrix, Gate};

/// Uniform per-qubit noise parameters. Times: `T1`/`T2` in µs, durations in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p1q: f64,
    pub p2q: f64,
    /// Relaxation time in µs; `None` disables amplitude damping and dephasing.
    #[serde(rename = "T1", default)]
    pub t1: Option<f64>,
    #[serde(rename = "T2", default)]
    pub t2: Option<f64>,
    #[serde(default = "default_d1q")]
    pub d1q: f64,
    #[serde(default = "default_d2q")]
    pub d2q: f64,
    #[serde(default = "default_dmeas")]
    pub d_meas: f64,
    pub readout_flip: f64,
}

fn default_d1q() -> f64 {
    50.0
}
fn default_d2q() -> f64 {
    300.0
}
fn default_dmeas() -> f64 {
    1000.0
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel {
            p1q: 0.0,
            p2q: 0.0,
            t1: None,
            t2: None,
            d1q: default_d1q(),
            d2q: default_d2q(),
            d_meas: default_dmeas(),
            readout_flip: 0.0,
        }
    }

    fn calibrated(p1q: f64, p2q: f64, readout_flip: f64, t1: f64, t2: f64) -> Self {
        NoiseModel {
            p1q,
            p2q,
            t1: Some(t1),
            t2: Some(t2),
            readout_flip,
            ..Self::ideal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p1q", self.p1q),
            ("p2q", self.p2q),
            ("readout_flip", self.readout_flip),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} not in [0, 1]")));
            }
        }
        for (name, d) in [("d1q", self.d1q), ("d2q", self.d2q), ("d_meas", self.d_meas)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        match (self.t1, self.t2) {
            (None, None) => {}
            (Some(t1), Some(t2)) => {
                if !(t1 > 0.0 && t2 > 0.0) {
                    return Err(Error::InvalidParameter("T1 and T2 must be positive".into()));
                }
                if t2 > 2.0 * t1 {
                    return Err(Error::InvalidParameter(format!(
                        "T2 = {t2} exceeds 2*T1 = {}",
                        2.0 * t1
                    )));
                }
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "T1 and T2 must be given together".into(),
                ))
            }
        }
        Ok(())
    }

    /// Amplitude-damping strength for a gate lasting `duration_ns`.
    pub fn damping_gamma(&self, duration_ns: f64) -> f64 {
        match self.t1 {
            Some(t1) => 1.0 - (-duration_ns / (t1 * 1e3)).exp(),
            None => 0.0,
        }
    }

    /// Pure-dephasing probability for a gate lasting `duration_ns`, with
    /// `1/Tφ = 1/T2 − 1/(2·T1)` clamped at zero.
    pub fn dephasing_lambda(&self, duration_ns: f64) -> f64 {
        match (self.t1, self.t2) {
            (Some(t1), Some(t2)) => {
                let rate_per_us = (1.0 / t2 - 1.0 / (2.0 * t1)).max(0.0);
                1.0 - (-duration_ns * 1e-3 * rate_per_us).exp()
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    Torino,
    Sherbrooke,
    Kyiv,
    Ideal,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Torino,
        PresetName::Sherbrooke,
        PresetName::Kyiv,
        PresetName::Ideal,
    ];

    pub fn preset(self) -> NoisePreset {
        NoisePreset::get(self)
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "torino" => Ok(PresetName::Torino),
            "sherbrooke" => Ok(PresetName::Sherbrooke),
            "kyiv" => Ok(PresetName::Kyiv),
            "ideal" => Ok(PresetName::Ideal),
            other => Err(Error::Config(format!("unknown noise preset `{other}`"))),
        }
    }
}

/// Median calibration snapshot of a device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisePreset {
    pub name: PresetName,
    pub qubits: u32,
    /// Layered-gate benchmark, recorded for reference only.
    pub best_2q_eplg: f64,
    pub model: NoiseModel,
}

impl NoisePreset {
    pub fn get(name: PresetName) -> Self {
        match name {
            PresetName::Torino => NoisePreset {
                name,
                qubits: 133,
                best_2q_eplg: 1.08e-3,
                model: NoiseModel::calibrated(3.149e-4, 2.936e-3, 2.6e-2, 177.93, 137.79),
            },
            PresetName::Sherbrooke => NoisePreset {
                name,
                qubits: 127,
                best_2q_eplg: 2.39e-3,
                model: NoiseModel::calibrated(2.582e-4, 7.726e-3, 1.39e-2, 262.43, 164.33),
            },
            PresetName::Kyiv => NoisePreset {
                name,
                qubits: 127,
                best_2q_eplg: 4.33e-3,
                model: NoiseModel::calibrated(2.779e-4, 1.208e-2, 8.2e-3, 265.84, 101.59),
            },
            PresetName::Ideal => NoisePreset {
                name,
                qubits: 0,
                best_2q_eplg: 0.0,
                model: NoiseModel::ideal(),
            },
        }
    }

    pub fn all() -> Vec<NoisePreset> {
        PresetName::ALL.iter().map(|&n| Self::get(n)).collect()
    }
}

/// Noise selection in configuration files: a preset name or a custom model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Preset(PresetName),
    Custom(NoiseModel),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Preset(PresetName::Ideal)
    }
}

impl NoiseSpec {
    pub fn model(&self) -> NoiseModel {
        match self {
            NoiseSpec::Preset(name) => name.preset().model,
            NoiseSpec::Custom(model) => *model,
        }
    }

    /// Short identifier recorded in kernel provenance.
    pub fn id(&self) -> String {
        match self {
            NoiseSpec::Preset(name) => name.to_string().to_ascii_lowercase(),
            NoiseSpec::Custom(_) => "custom".to_string(),
        }
    }
}

/// A noise channel bound to specific qubits.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Depolarizing { p: f64, qubits: Vec<usize> },
    AmplitudeDamping { gamma: f64, qubit: usize },
    Dephasing { lambda: f64, qubit: usize },
}

impl Channel {
    /// Kraus operators of the single-qubit channels. Depolarizing channels are
    /// applied in closed form and return `None`.
    pub fn kraus(&self) -> Option<Vec<[[Complex64; 2]; 2]>> {
        let c = |v: f64| Complex64::new(v, 0.0);
        let z = c(0.0);
        match *self {
            Channel::Depolarizing { .. } => None,
            Channel::AmplitudeDamping { gamma, .. } => Some(vec![
                [[c(1.0), z], [z, c((1.0 - gamma).sqrt())]],
                [[z, c(gamma.sqrt())], [z, z]],
            ]),
            Channel::Dephasing { lambda, .. } => {
                let a = (1.0 - lambda).sqrt();
                let b = lambda.sqrt();
                Some(vec![[[c(a), z], [z, c(a)]], [[c(b), z], [z, c(-b)]]])
            }
        }
    }
}

/// Max-entry deviation of `Σ K†K` from the identity.
pub fn kraus_completeness_error(ops: &[[[Complex64; 2]; 2]]) -> f64 {
    let mut sum = [[Complex64::new(0.0, 0.0); 2]; 2];
    for k in ops {
        for (r, row) in sum.iter_mut().enumerate() {
            for (col, s) in row.iter_mut().enumerate() {
                *s += k[0][r].conj() * k[0][col] + k[1][r].conj() * k[1][col];
            }
        }
    }
    let mut worst = 0.0f64;
    for (r, row) in sum.iter().enumerate() {
        for (col, s) in row.iter().enumerate() {
            let expect = if r == col { 1.0 } else { 0.0 };
            worst = worst.max((s - Complex64::new(expect, 0.0)).norm());
        }
    }
    worst
}

/// Channels following `gate`: one depolarizing channel over the touched
/// qubits, then amplitude damping and dephasing on each touched qubit for the
/// gate's duration. Zero-strength channels are omitted.
pub fn channels_for(gate: &Gate, model: &NoiseModel) -> Result<Vec<Channel>> {
    model.validate()?;
    let qubits = gate.qubits();
    let (p, duration) = if gate.kind.is_two_qubit() {
        (model.p2q, model.d2q)
    } else {
        (model.p1q, model.d1q)
    };
    let mut out = Vec::new();
    if p > 0.0 {
        out.push(Channel::Depolarizing {
            p,
            qubits: qubits.clone(),
        });
    }
    let gamma = model.damping_gamma(duration);
    let lambda = model.dephasing_lambda(duration);
    for &q in &qubits {
        if gamma > 0.0 {
            out.push(Channel::AmplitudeDamping { gamma, qubit: q });
        }
        if lambda > 0.0 {
            out.push(Channel::Dephasing { lambda, qubit: q });
        }
    }
    Ok(out)
}

pub fn apply_channel(rho: &mut DensityMatrix, channel: &Channel) -> Result<()> {
    match channel {
        Channel::Depolarizing { p, qubits } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidParameter(format!("depolarizing p = {p}")));
            }
            rho.depolarize(*p, qubits)
        }
        Channel::AmplitudeDamping { qubit, .. } | Channel::Dephasing { qubit, .. } => {
            let ops = channel.kraus().expect("single-qubit channel");
            let err = kraus_completeness_error(&ops);
            if !(err < 1e-10) {
                return Err(Error::KrausIncomplete(err));
            }
            rho.apply_kraus_1q(&ops, *qubit)
        }
    }
}

/// Per-qubit symmetric readout confusion matrices.
pub fn readout_confusion(model: &NoiseModel, width: usize) -> Vec<Confusion> {
    vec![Confusion::symmetric(model.readout_flip); width]
}
