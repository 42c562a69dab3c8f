use std::fmt;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("qubit index {index} out of range for width {width}")]
    QubitOutOfRange { index: usize, width: usize },

    #[error("control and target coincide on qubit {0}")]
    ControlEqualsTarget(usize),

    #[error("width {width} exceeds the {backend} simulation cap of {cap} qubits")]
    CapExceeded {
        backend: &'static str,
        width: usize,
        cap: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("single-class labels; both normal and anomaly rows are required")]
    SingleClass,

    #[error("kernel matrix was already exponentiated")]
    AlreadyExponentiated,

    #[error("zero Frobenius norm in alignment operand")]
    ZeroNorm,

    #[error("kernel provenance mismatch: {0}")]
    ProvenanceMismatch(String),

    #[error("Kraus operators are incomplete (deviation {0:.3e})")]
    KrausIncomplete(f64),

    #[error("confusion matrix for qubit {0} is not row-stochastic")]
    NotStochastic(usize),

    #[error("insufficient rows: {0}")]
    InsufficientRows(String),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("column `{column}` is non-numeric (value `{value}` on line {line})")]
    NonNumericColumn {
        column: String,
        value: String,
        line: usize,
    },

    #[error("unmapped label value `{0}`")]
    UnmappedLabel(String),

    #[error("negative entry {0:.3e} in non-negative factorization input")]
    NegativeInput(f64),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid kernel file: {0}")]
    InvalidKernelFile(String),

    #[error("dataset hashes differ: {0} vs {1}")]
    DatasetHashMismatch(String, String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage used to tag propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Split,
    Preprocess,
    Scale,
    Kernel,
    Fit,
    Score,
    Align,
    Persist,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Preprocess => "preprocess",
            Stage::Scale => "scale",
            Stage::Kernel => "kernel",
            Stage::Fit => "fit",
            Stage::Score => "score",
            Stage::Align => "align",
            Stage::Persist => "persist",
        };
        f.write_str(name)
    }
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by the caller's configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
