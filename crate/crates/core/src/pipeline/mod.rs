//! Experiment configuration, orchestration and persistence.
//!
//! A run windows the raw series, samples splits, fits the preprocessor on
//! training rows, builds train and test kernels, sweeps the one-class SVM and
//! writes every artifact needed to recompute the reported metrics.

mod data;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Stage as Step, StageExt};
use crate::featuremap::{fit_scaler, AngleScaler, Family, FeatureMapSpec};
use crate::kernel::{
    classical_gram, dissimilarity_error, exponentiate, kernel_alignment, kernel_target_alignment,
    labels_to_targets, quantum_gram, read_qkad, write_qkad, AlignmentReport, Backend,
    ClassicalKernel, KernelMatrix, Provenance, QuantumKernel,
};
use crate::matrix::Matrix;
use crate::noise::NoiseSpec;
use crate::ocsvm::{
    self, sweep, EvalMetrics, SweepCell, SweepResult, DEFAULT_MAX_ITER, DEFAULT_NU_GRID,
    DEFAULT_TOL_GRID,
};
use crate::preprocess::{
    fit_preprocessor, reduce, FittedPreprocessor, LabelRule, PreprocessConfig, ReducerKind,
    DEFAULT_NMF_ITERS, DEFAULT_WINDOW,
};

pub use data::{
    dataset_hash, load_csv, sample_splits, synth_generate, write_dataset_csv, CsvSource, Loaded,
    Sampler, Splits, SynthSpec,
};
pub use report::{compare, Comparison, ComparisonRow, PairwiseChange, RunReport, Timing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Csv(CsvSource),
    Synth(SynthSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumKernelConfig {
    pub family: Family,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "unit")]
    pub bandwidth: f64,
    #[serde(default = "pure_backend")]
    pub backend: Backend,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub shots: Option<u64>,
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn pure_backend() -> Backend {
    Backend::Pure
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelConfig {
    Quantum(QuantumKernelConfig),
    Classical(ClassicalKernel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    /// KTA of the test-by-test kernel against test labels.
    #[serde(default = "yes")]
    pub kta: bool,
    /// Density backend only: D_Error of the noisy training kernel.
    #[serde(default = "yes")]
    pub d_error: bool,
    /// Optional classical kernel for a KA comparison on the test points.
    #[serde(default)]
    pub reference: Option<ClassicalKernel>,
    /// Measure KA and KTA on exponentiated kernels instead of raw ones.
    #[serde(default)]
    pub exponentiated: bool,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            kta: true,
            d_error: true,
            reference: None,
            exponentiated: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub label_rule: LabelRule,
    #[serde(default)]
    pub sampler: Sampler,
    pub reducer: ReducerKind,
    /// Target feature count `N`.
    pub features: usize,
    #[serde(default = "default_nmf_iters")]
    pub nmf_iters: usize,
    pub kernel: KernelConfig,
    #[serde(default = "yes")]
    pub exponentiate: bool,
    #[serde(default = "default_nu_grid")]
    pub nu_grid: Vec<f64>,
    #[serde(default = "default_tol_grid")]
    pub tol_grid: Vec<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub alignment: AlignmentConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_nmf_iters() -> usize {
    DEFAULT_NMF_ITERS
}
fn default_nu_grid() -> Vec<f64> {
    DEFAULT_NU_GRID.to_vec()
}
fn default_tol_grid() -> Vec<f64> {
    DEFAULT_TOL_GRID.to_vec()
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn feature_map(&self) -> Option<FeatureMapSpec> {
        match self.kernel {
            KernelConfig::Quantum(q) => Some(
                FeatureMapSpec::new(q.family, self.features)
                    .with_repetitions(q.repetitions)
                    .with_bandwidth(q.bandwidth),
            ),
            KernelConfig::Classical(_) => None,
        }
    }

    pub fn quantum_kernel(&self) -> Option<QuantumKernel> {
        let KernelConfig::Quantum(q) = self.kernel else {
            return None;
        };
        let mut k = match q.backend {
            Backend::Pure => QuantumKernel::pure(self.feature_map()?),
            Backend::Density => QuantumKernel::density(self.feature_map()?, q.noise),
        };
        k.shots = q.shots;
        k.shot_seed = self.seed;
        Some(k)
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            window: self.window,
            label_rule: self.label_rule,
            reducer: self.reducer,
            n: self.features,
            nmf_iters: self.nmf_iters,
            seed: self.seed,
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.window == 0 {
            return cfg("window must be >= 1".into());
        }
        if self.features == 0 {
            return cfg("feature count must be >= 1".into());
        }
        if self.nu_grid.is_empty() || self.tol_grid.is_empty() {
            return cfg("nu and tol grids must be non-empty".into());
        }
        if self.nu_grid.iter().any(|&nu| !(nu > 0.0 && nu <= 1.0)) {
            return cfg("every nu must lie in (0, 1]".into());
        }
        if self.tol_grid.iter().any(|&t| !(t > 0.0)) {
            return cfg("every tolerance must be positive".into());
        }
        if let DatasetSource::Synth(s) = &self.dataset {
            s.validate()?;
        }
        match self.kernel {
            KernelConfig::Quantum(q) => {
                let spec = self.feature_map().expect("quantum kernel");
                spec.validate().map_err(|e| Error::Config(e.to_string()))?;
                let cap = match q.backend {
                    Backend::Pure => crate::sim::PURE_CAP,
                    Backend::Density => crate::sim::DENSITY_CAP,
                };
                if spec.qubits() > cap {
                    return cfg(format!(
                        "{} qubits exceed the {:?} backend limit of {cap}",
                        spec.qubits(),
                        q.backend
                    ));
                }
                q.noise
                    .model()
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            KernelConfig::Classical(c) => c.validate().map_err(|e| Error::Config(e.to_string()))?,
        }
        if let Some(r) = self.alignment.reference {
            r.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn kernel_label(&self) -> String {
        match self.kernel {
            KernelConfig::Quantum(q) => {
                let backend = match q.backend {
                    Backend::Pure => "pure".to_string(),
                    Backend::Density => format!("density/{}", q.noise.id()),
                };
                format!(
                    "{} r={} c={} {backend}",
                    q.family, q.repetitions, q.bandwidth
                )
            }
            KernelConfig::Classical(c) => match c {
                ClassicalKernel::Linear => "linear".into(),
                ClassicalKernel::Rbf { gamma } => format!("rbf gamma={gamma}"),
                ClassicalKernel::Poly { degree, coef0, scale } => {
                    format!("poly d={degree} c0={coef0} s={scale}")
                }
            },
        }
    }
}

/// Output of the preprocessing stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub splits: Splits,
    pub preprocessor: FittedPreprocessor,
    /// Reduced training rows (`N` columns).
    pub train: Matrix,
    pub test: Matrix,
    pub test_labels: Vec<u8>,
    pub dataset_hash: String,
    pub raw_rows: usize,
    pub windowed_rows: usize,
    pub warnings: Vec<String>,
}

pub fn load_dataset(source: &DatasetSource) -> Result<Loaded> {
    match source {
        DatasetSource::Csv(src) => load_csv(src),
        DatasetSource::Synth(spec) => Ok(Loaded {
            dataset: synth_generate(spec)?,
            dropped_rows: 0,
            warnings: vec![],
        }),
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let loaded = load_dataset(&cfg.dataset).stage(Step::Load)?;
    let hash = dataset_hash(&loaded.dataset, cfg.sampler.seed);
    let windowed = loaded
        .dataset
        .windowed(cfg.window, cfg.label_rule)
        .stage(Step::Preprocess)?;
    let splits = sample_splits(&windowed.labels, &cfg.sampler).stage(Step::Split)?;
    let train_raw = windowed.matrix.select_rows(&splits.train);
    let calib = windowed.select(&splits.calib);
    let test = windowed.select(&splits.test);
    let preprocessor = fit_preprocessor(
        &train_raw,
        Some((&calib.matrix, &calib.labels)),
        &cfg.preprocess(),
    )
    .stage(Step::Preprocess)?;
    let train = reduce(&train_raw, &preprocessor).stage(Step::Preprocess)?;
    let test_reduced = reduce(&test.matrix, &preprocessor).stage(Step::Preprocess)?;
    Ok(Prepared {
        splits,
        preprocessor,
        train,
        test: test_reduced,
        test_labels: test.labels,
        dataset_hash: hash,
        raw_rows: loaded.dataset.len() + loaded.dropped_rows,
        windowed_rows: windowed.len(),
        warnings: loaded.warnings,
    })
}

/// Raw kernels of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernels {
    pub train: KernelMatrix,
    /// Rows are test points, columns training points.
    pub test: KernelMatrix,
    pub test_test: Option<KernelMatrix>,
    pub scaler: Option<AngleScaler>,
    /// Pure-backend training kernel, kept for D_Error of noisy kernels.
    pub ideal_train: Option<KernelMatrix>,
}

pub fn compute_kernels(cfg: &ExperimentConfig, train: &Matrix, test: &Matrix) -> Result<Kernels> {
    match cfg.kernel {
        KernelConfig::Quantum(q) => {
            let kernel = cfg.quantum_kernel().expect("quantum config");
            let scaler = fit_scaler(train, q.bandwidth).stage(Step::Scale)?;
            let a_train = scaler.scale_matrix(train).stage(Step::Scale)?;
            let a_test = scaler.scale_matrix(test).stage(Step::Scale)?;
            let k_train = quantum_gram(&a_train, None, &kernel).stage(Step::Kernel)?;
            let k_test = quantum_gram(&a_test, Some(&a_train), &kernel).stage(Step::Kernel)?;
            let test_test = if cfg.alignment.kta {
                Some(quantum_gram(&a_test, None, &kernel).stage(Step::Kernel)?)
            } else {
                None
            };
            let ideal_train = if q.backend == Backend::Density && cfg.alignment.d_error {
                let pure = QuantumKernel::pure(kernel.feature_map);
                Some(quantum_gram(&a_train, None, &pure).stage(Step::Kernel)?)
            } else {
                None
            };
            Ok(Kernels {
                train: k_train,
                test: k_test,
                test_test,
                scaler: Some(scaler),
                ideal_train,
            })
        }
        KernelConfig::Classical(c) => {
            let k_train = classical_gram(train, None, &c).stage(Step::Kernel)?;
            let k_test = classical_gram(test, Some(train), &c).stage(Step::Kernel)?;
            let test_test = if cfg.alignment.kta {
                Some(classical_gram(test, None, &c).stage(Step::Kernel)?)
            } else {
                None
            };
            Ok(Kernels {
                train: k_train,
                test: k_test,
                test_test,
                scaler: None,
                ideal_train: None,
            })
        }
    }
}

fn post(cfg: &ExperimentConfig, k: &KernelMatrix) -> Result<KernelMatrix> {
    if cfg.exponentiate {
        exponentiate(k)
    } else {
        Ok(k.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub sweep: SweepResult,
    pub scores: Vec<f64>,
    pub metrics: EvalMetrics,
}

/// Post-processes raw kernels, sweeps ν and tol, and scores the test rows
/// with the best model.
pub fn train_and_evaluate(
    cfg: &ExperimentConfig,
    k_train: &KernelMatrix,
    k_test: &KernelMatrix,
    test_labels: &[u8],
) -> Result<Trained> {
    let kt = post(cfg, k_train).stage(Step::Fit)?;
    let ke = post(cfg, k_test).stage(Step::Score)?;
    let result = sweep(&kt, &ke, test_labels, &cfg.nu_grid, &cfg.tol_grid, cfg.max_iter)
        .stage(Step::Fit)?;
    let scores = ocsvm::decision_scores(&result.best_model, &ke).stage(Step::Score)?;
    let metrics = ocsvm::evaluate(&ocsvm::predict(&scores), test_labels).stage(Step::Score)?;
    Ok(Trained {
        sweep: result,
        scores,
        metrics,
    })
}

pub fn alignment(
    cfg: &ExperimentConfig,
    kernels: &Kernels,
    test: &Matrix,
    test_labels: &[u8],
) -> Result<AlignmentReport> {
    let mut report = AlignmentReport {
        ka: None,
        kta: None,
        d_error: None,
        operands: vec![],
    };
    if let Some(tt) = &kernels.test_test {
        let stage = |k: &KernelMatrix| {
            if cfg.alignment.exponentiated {
                post(cfg, k)
            } else {
                Ok(k.clone())
            }
        };
        let label = if cfg.alignment.exponentiated { "exponentiated" } else { "raw" };
        let k = stage(tt)?;
        report.kta = Some(kernel_target_alignment(&k.matrix, &labels_to_targets(test_labels))?);
        report
            .operands
            .push(format!("kta: {label} test x test kernel vs test labels"));
        if let Some(reference) = cfg.alignment.reference {
            let other = stage(&classical_gram(test, None, &reference)?)?;
            report.ka = Some(kernel_alignment(&k.matrix, &other.matrix)?);
            report
                .operands
                .push(format!("ka: {label} test x test kernel vs classical {reference:?}"));
        }
    }
    if let Some(ideal) = &kernels.ideal_train {
        report.d_error = Some(dissimilarity_error(&ideal.matrix, &kernels.train.matrix)?);
        report
            .operands
            .push("d_error: raw pure vs raw noisy training kernel".into());
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub provenance: Provenance,
    pub rows: usize,
    pub cols: usize,
}

/// File names inside an output directory.
pub mod artifacts {
    pub const CONFIG: &str = "config.json";
    pub const SPLITS: &str = "splits.json";
    pub const PREPROCESSOR: &str = "preprocessor.json";
    pub const SCALER: &str = "scaler.json";
    pub const TRAIN_FEATURES: &str = "train_features.csv";
    pub const TEST_FEATURES: &str = "test_features.csv";
    pub const K_TRAIN: &str = "k_train.qkad";
    pub const K_TEST: &str = "k_test.qkad";
    pub const K_TEST_TEST: &str = "k_test_test.qkad";
    pub const K_IDEAL_TRAIN: &str = "k_ideal_train.qkad";
    pub const MODEL: &str = "model.json";
    pub const SWEEP: &str = "sweep.json";
    pub const REPORT: &str = "report.json";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub dataset_hash: String,
    pub splits: Splits,
    pub test_labels: Vec<u8>,
    pub raw_rows: usize,
    pub windowed_rows: usize,
    pub warnings: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes a kernel file and its provenance sidecar.
pub fn save_kernel(path: &Path, k: &KernelMatrix) -> Result<()> {
    write_qkad(path, k)?;
    write_json(
        &meta_path(path),
        &KernelMeta {
            provenance: k.provenance.clone(),
            rows: k.rows(),
            cols: k.cols(),
        },
    )
}

/// Reads a kernel file; provenance comes from the sidecar when present.
pub fn load_kernel(path: &Path) -> Result<KernelMatrix> {
    let (matrix, stage) = read_qkad(path)?;
    let meta = meta_path(path);
    let provenance = if meta.exists() {
        let m: KernelMeta = read_json(&meta)?;
        if (m.rows, m.cols) != (matrix.rows(), matrix.cols()) {
            return Err(Error::InvalidKernelFile(format!(
                "{} does not match its metadata shape",
                path.display()
            )));
        }
        m.provenance
    } else {
        Provenance::Unknown
    };
    Ok(KernelMatrix {
        matrix,
        stage,
        provenance,
    })
}

fn write_matrix_csv(path: &Path, m: &Matrix, labels: Option<&[u8]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..m.cols()).map(|k| format!("z{k}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (r, row) in m.iter_rows().enumerate() {
        let mut fields: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some(l) = labels {
            fields.push(l[r].to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix_csv(path: &Path) -> Result<(Matrix, Option<Vec<u8>>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let has_label = reader.headers()?.iter().any(|h| h == "label");
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (i, field) in record.iter().enumerate() {
            if has_label && i + 1 == record.len() {
                labels.push(field.parse::<u8>().map_err(|_| Error::UnmappedLabel(field.into()))?);
            } else {
                row.push(field.parse::<f64>().map_err(|_| Error::NonNumericColumn {
                    column: format!("z{i}"),
                    value: field.into(),
                    line: rows.len() + 2,
                })?);
            }
        }
        rows.push(row);
    }
    Ok((Matrix::from_rows(&rows)?, has_label.then_some(labels)))
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    cfg.out_dir
        .as_deref()
        .ok_or_else(|| Error::Config("no output directory configured".into()))
}

pub fn persist_prepared(dir: &Path, cfg: &ExperimentConfig, p: &Prepared) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join(artifacts::CONFIG), cfg)?;
    write_json(
        &dir.join(artifacts::SPLITS),
        &SplitRecord {
            dataset_hash: p.dataset_hash.clone(),
            splits: p.splits.clone(),
            test_labels: p.test_labels.clone(),
            raw_rows: p.raw_rows,
            windowed_rows: p.windowed_rows,
            warnings: p.warnings.clone(),
        },
    )?;
    write_json(&dir.join(artifacts::PREPROCESSOR), &p.preprocessor)?;
    write_matrix_csv(&dir.join(artifacts::TRAIN_FEATURES), &p.train, None)?;
    write_matrix_csv(&dir.join(artifacts::TEST_FEATURES), &p.test, Some(&p.test_labels))?;
    Ok(())
}

/// Reduced features and test labels written by [`persist_prepared`].
pub fn load_prepared_features(dir: &Path) -> Result<(Matrix, Matrix, Vec<u8>)> {
    let (train, _) = read_matrix_csv(&dir.join(artifacts::TRAIN_FEATURES))?;
    let (test, labels) = read_matrix_csv(&dir.join(artifacts::TEST_FEATURES))?;
    let labels = labels.ok_or_else(|| Error::MissingColumn("label".into()))?;
    Ok((train, test, labels))
}

pub fn persist_kernels(dir: &Path, k: &Kernels) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_kernel(&dir.join(artifacts::K_TRAIN), &k.train)?;
    save_kernel(&dir.join(artifacts::K_TEST), &k.test)?;
    if let Some(tt) = &k.test_test {
        save_kernel(&dir.join(artifacts::K_TEST_TEST), tt)?;
    }
    if let Some(ideal) = &k.ideal_train {
        save_kernel(&dir.join(artifacts::K_IDEAL_TRAIN), ideal)?;
    }
    if let Some(s) = &k.scaler {
        write_json(&dir.join(artifacts::SCALER), s)?;
    }
    Ok(())
}

pub fn load_kernels(dir: &Path) -> Result<Kernels> {
    let optional = |name: &str| -> Result<Option<KernelMatrix>> {
        let p = dir.join(name);
        if p.exists() {
            load_kernel(&p).map(Some)
        } else {
            Ok(None)
        }
    };
    let scaler_path = dir.join(artifacts::SCALER);
    Ok(Kernels {
        train: load_kernel(&dir.join(artifacts::K_TRAIN))?,
        test: load_kernel(&dir.join(artifacts::K_TEST))?,
        test_test: optional(artifacts::K_TEST_TEST)?,
        scaler: if scaler_path.exists() {
            Some(read_json(&scaler_path)?)
        } else {
            None
        },
        ideal_train: optional(artifacts::K_IDEAL_TRAIN)?,
    })
}

/// Full experiment. Artifacts go to `out_dir` when one is configured.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    let prepared = prepare(cfg)?;
    let t_prep = started.elapsed();
    let kernels = compute_kernels(cfg, &prepared.train, &prepared.test)?;
    let t_kernel = started.elapsed();
    let trained = train_and_evaluate(cfg, &kernels.train, &kernels.test, &prepared.test_labels)?;
    let t_fit = started.elapsed();
    let align = alignment(cfg, &kernels, &prepared.test, &prepared.test_labels).stage(Step::Align)?;

    let mut report = RunReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        dataset_hash: prepared.dataset_hash.clone(),
        kernel_label: cfg.kernel_label(),
        train_rows: prepared.train.rows(),
        test_rows: prepared.test.rows(),
        test_anomalies: prepared.test_labels.iter().filter(|&&l| l != 0).count(),
        best: trained.sweep.best.clone(),
        metrics: trained.metrics,
        sweep: trained.sweep.cells.clone(),
        alignment: align,
        timing: Timing {
            preprocess_ms: t_prep.as_secs_f64() * 1e3,
            kernel_ms: (t_kernel - t_prep).as_secs_f64() * 1e3,
            fit_ms: (t_fit - t_kernel).as_secs_f64() * 1e3,
            total_ms: 0.0,
        },
        artifacts: vec![],
        warnings: prepared.warnings.clone(),
    };
    if let Some(dir) = cfg.out_dir.as_deref() {
        (|| -> Result<()> {
            persist_prepared(dir, cfg, &prepared)?;
            persist_kernels(dir, &kernels)?;
            write_json(&dir.join(artifacts::MODEL), &trained.sweep.best_model)?;
            write_json(&dir.join(artifacts::SWEEP), &trained.sweep.cells)?;
            Ok(())
        })()
        .stage(Step::Persist)?;
        let mut names: Vec<String> = fs::read_dir(dir)
            .map_err(Error::from)
            .stage(Step::Persist)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.push(artifacts::REPORT.into());
        names.sort();
        names.dedup();
        report.artifacts = names;
    }
    report.timing.total_ms = started.elapsed().as_secs_f64() * 1e3;
    if let Some(dir) = cfg.out_dir.as_deref() {
        write_json(&dir.join(artifacts::REPORT), &report).stage(Step::Persist)?;
    }
    Ok(report)
}

/// Re-runs the sweep from persisted kernels, skipping simulation.
pub fn rerun_from_kernels(dir: &Path) -> Result<(SweepCell, EvalMetrics)> {
    let cfg: ExperimentConfig = read_json(&dir.join(artifacts::CONFIG)).stage(Step::Load)?;
    let record: SplitRecord = read_json(&dir.join(artifacts::SPLITS)).stage(Step::Load)?;
    let kernels = load_kernels(dir).stage(Step::Load)?;
    let trained = train_and_evaluate(&cfg, &kernels.train, &kernels.test, &record.test_labels)?;
    Ok((trained.sweep.best, trained.metrics))
}

/// Resolved output directory of a config.
pub fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    out_dir(cfg).map(Path::to_path_buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) fn small_config(kernel: KernelConfig) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Synth(SynthSpec {
                samples: 3000,
                segment_len: 150,
                ..SynthSpec::default()
            }),
            window: 10,
            label_rule: LabelRule::AnyAnomaly,
            sampler: Sampler {
                train: 60,
                calib: Some(30),
                test: 60,
                seed: 1,
                anomaly_ratio: Some(0.2),
            },
            reducer: ReducerKind::Tree,
            features: 4,
            nmf_iters: 100,
            kernel,
            exponentiate: true,
            nu_grid: vec![0.05, 0.1],
            tol_grid: vec![1e-4],
            max_iter: DEFAULT_MAX_ITER,
            alignment: AlignmentConfig::default(),
            out_dir: None,
            seed: 0,
        }
    }

    fn quantum(backend: Backend, noise: NoiseSpec) -> KernelConfig {
        KernelConfig::Quantum(QuantumKernelConfig {
            family: Family::Simple2DoF,
            repetitions: 1,
            bandwidth: 0.5,
            backend,
            noise,
            shots: None,
        })
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "dataset": {"synth": {"samples": 2000}},
                "reducer": "pca",
                "features": 4,
                "kernel": {"quantum": {"family": "Belis"}}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.window, 60);
        assert_eq!(cfg.sampler.train, 1000);
        assert_eq!(cfg.nu_grid, DEFAULT_NU_GRID.to_vec());
        assert!(cfg.exponentiate);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn config_errors_are_config_errors() {
        let mut cfg = small_config(quantum(Backend::Density, NoiseSpec::default()));
        cfg.features = 24;
        let err = cfg.validate().unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(ExperimentConfig::from_json("{").unwrap_err().is_config());
        let mut cfg = small_config(KernelConfig::Classical(ClassicalKernel::Linear));
        cfg.nu_grid = vec![];
        assert!(cfg.validate().unwrap_err().is_config());
    }

    #[test]
    fn ideal_density_matches_pure() {
        let pure = run(&small_config(quantum(Backend::Pure, NoiseSpec::default()))).unwrap();
        let dens = run(&small_config(quantum(Backend::Density, NoiseSpec::default()))).unwrap();
        assert!((pure.metrics.f1 - dens.metrics.f1).abs() < 1e-6);
        assert!((pure.metrics.precision - dens.metrics.precision).abs() < 1e-6);
        assert!(dens.alignment.d_error.unwrap().abs() < 1e-9);
        assert!(pure.alignment.d_error.is_none());
    }

    #[test]
    fn errors_carry_stage() {
        let mut cfg = small_config(KernelConfig::Classical(ClassicalKernel::Linear));
        cfg.sampler.train = 100_000;
        match run(&cfg).unwrap_err() {
            Error::Stage { stage, .. } => assert_eq!(stage, Step::Split),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn persisted_run_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(quantum(Backend::Pure, NoiseSpec::default()));
        cfg.out_dir = Some(dir.path().to_path_buf());
        let report = run(&cfg).unwrap();
        let (best, metrics) = rerun_from_kernels(dir.path()).unwrap();
        assert_eq!(metrics, report.metrics);
        assert_eq!(best, report.best);
        let echoed: ExperimentConfig = read_json(&dir.path().join(artifacts::CONFIG)).unwrap();
        assert_eq!(echoed.hash(), report.config_hash);
        let stored: RunReport = read_json(&dir.path().join(artifacts::REPORT)).unwrap();
        assert_eq!(stored.metrics, report.metrics);
        assert!(report.artifacts.contains(&artifacts::K_TRAIN.to_string()));
    }

    #[test]
    fn prepared_features_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(KernelConfig::Classical(ClassicalKernel::Linear));
        let p = prepare(&cfg).unwrap();
        persist_prepared(dir.path(), &cfg, &p).unwrap();
        let (train, test, labels) = load_prepared_features(dir.path()).unwrap();
        assert_eq!(train, p.train);
        assert_eq!(test, p.test);
        assert_eq!(labels, p.test_labels);
    }
}
