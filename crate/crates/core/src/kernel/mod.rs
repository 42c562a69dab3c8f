//! Gram matrices from quantum fidelities or classical kernel functions,
//! exponentiation post-processing, alignment metrics and persistence.

mod alignment;
mod gram;
mod io;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featuremap::FeatureMapSpec;
use crate::matrix::Matrix;
use crate::noise::NoiseSpec;

pub use alignment::{
    dissimilarity_error, kernel_alignment, kernel_target_alignment, labels_to_targets, psd_floor,
    AlignmentReport, PsdFloor,
};
pub use gram::{classical_gram, quantum_gram};
pub use io::{decode_qkad, encode_qkad, read_qkad, write_csv, write_qkad, QKAD_MAGIC, QKAD_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    Exponentiated,
}

impl Stage {
    pub fn code(self) -> u8 {
        match self {
            Stage::Raw => 0,
            Stage::Exponentiated => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Stage> {
        match code {
            0 => Ok(Stage::Raw),
            1 => Ok(Stage::Exponentiated),
            other => Err(Error::InvalidKernelFile(format!("unknown stage byte {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Pure,
    Density,
}

/// Quantum kernel settings: feature map, simulator and optional shot sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumKernel {
    pub feature_map: FeatureMapSpec,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Replace exact probabilities with binomial estimates over this many shots.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub shot_seed: u64,
}

fn default_backend() -> Backend {
    Backend::Pure
}

impl QuantumKernel {
    pub fn pure(feature_map: FeatureMapSpec) -> Self {
        QuantumKernel {
            feature_map,
            backend: Backend::Pure,
            noise: NoiseSpec::default(),
            shots: None,
            shot_seed: 0,
        }
    }

    pub fn density(feature_map: FeatureMapSpec, noise: NoiseSpec) -> Self {
        QuantumKernel {
            backend: Backend::Density,
            noise,
            ..Self::pure(feature_map)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassicalKernel {
    Rbf {
        gamma: f64,
    },
    Poly {
        degree: u32,
        #[serde(default)]
        coef0: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    Linear,
}

fn unit_scale() -> f64 {
    1.0
}

/// Where a kernel matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    Quantum {
        feature_map: FeatureMapSpec,
        backend: Backend,
        noise: String,
    },
    Classical {
        kernel: ClassicalKernel,
    },
    /// Loaded from a kernel file without sidecar metadata.
    Unknown,
}

impl Provenance {
    /// Hex digest identifying the kernel function (not the data).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("provenance serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn is_fidelity(&self) -> bool {
        matches!(self, Provenance::Quantum { .. })
    }
}

/// Gram matrix with its post-processing stage and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub matrix: Matrix,
    pub stage: Stage,
    pub provenance: Provenance,
}

impl KernelMatrix {
    pub fn raw(matrix: Matrix, provenance: Provenance) -> Self {
        KernelMatrix {
            matrix,
            stage: Stage::Raw,
            provenance,
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.matrix.get(r, c)
    }
}

/// Entrywise `e^k`. Raw fidelities in `[0, 1]` land in `[1, e]`.
pub fn exponentiate(k: &KernelMatrix) -> Result<KernelMatrix> {
    if k.stage == Stage::Exponentiated {
        return Err(Error::AlreadyExponentiated);
    }
    Ok(KernelMatrix {
        matrix: k.matrix.map(f64::exp),
        stage: Stage::Exponentiated,
        provenance: k.provenance.clone(),
    })
}
