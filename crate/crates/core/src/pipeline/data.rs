//! Dataset ingestion, synthetic generation and split sampling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    pub label_column: String,
    /// Label strings to classes; numeric `0`/`1` labels need no map.
    #[serde(default)]
    pub label_map: Option<BTreeMap<String, u8>>,
    /// Non-feature columns such as timestamps.
    #[serde(default)]
    pub ignore_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub dataset: Dataset,
    pub dropped_rows: usize,
    pub warnings: Vec<String>,
}

fn parse_label(raw: &str, map: Option<&BTreeMap<String, u8>>) -> Result<u8> {
    if let Some(map) = map {
        if let Some(&v) = map.get(raw) {
            if v > 1 {
                return Err(Error::Config(format!("label map sends {raw:?} to {v}")));
            }
            return Ok(v);
        }
    }
    match raw.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::UnmappedLabel(raw.to_string())),
    }
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("nan") || field.eq_ignore_ascii_case("na")
}

/// Reads a headered CSV. Rows with missing or non-finite feature values are
/// dropped and counted; other non-numeric feature values are errors.
pub fn load_csv(src: &CsvSource) -> Result<Loaded> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&src.path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == src.label_column)
        .ok_or_else(|| Error::MissingColumn(src.label_column.clone()))?;
    for ignored in &src.ignore_columns {
        if !headers.iter().any(|h| h == ignored) {
            return Err(Error::MissingColumn(ignored.clone()));
        }
    }
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && !src.ignore_columns.iter().any(|c| c == &headers[i]))
        .collect();
    if feature_idx.is_empty() {
        return Err(Error::EmptyInput("no feature columns".into()));
    }
    let feature_names: Vec<String> = feature_idx.iter().map(|&i| headers[i].to_string()).collect();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(feature_idx.len());
        let mut missing = false;
        for &i in &feature_idx {
            let field = record.get(i).unwrap_or("");
            if is_missing(field) {
                missing = true;
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(_) => missing = true,
                Err(_) => {
                    return Err(Error::NonNumericColumn {
                        column: headers[i].to_string(),
                        value: field.to_string(),
                        line: line + 2,
                    })
                }
            }
        }
        let label_field = record.get(label_idx).unwrap_or("");
        if missing || is_missing(label_field) {
            dropped += 1;
            continue;
        }
        labels.push(parse_label(label_field, src.label_map.as_ref())?);
        data.extend(row);
    }
    if labels.is_empty() {
        return Err(Error::InsufficientRows(format!(
            "{} has no usable rows",
            src.path.display()
        )));
    }
    let matrix = Matrix::from_vec(labels.len(), feature_idx.len(), data)?;
    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(format!("dropped {dropped} rows with missing values"));
    }
    Ok(Loaded {
        dataset: Dataset::new(matrix, labels, feature_names)?,
        dropped_rows: dropped,
        warnings,
    })
}

/// Writes features plus a trailing `label` column.
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = ds.feature_names.clone();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in ds.matrix.iter_rows().zip(&ds.labels) {
        let mut fields: Vec<String> = row.iter().map(f64::to_string).collect();
        fields.push(label.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Synthetic plant signal with injected anomaly segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub samples: usize,
    pub features: usize,
    /// Contiguous operating regimes with distinct mean levels.
    pub regimes: usize,
    pub anomaly_fraction: f64,
    /// Anomaly offset in units of each feature's stationary standard deviation.
    pub shift: f64,
    pub affected_features: usize,
    /// Draw the affected features once for all segments instead of per segment.
    pub shared_subset: bool,
    pub segment_len: usize,
    /// Probability that a segment freezes its features instead of shifting them.
    pub stuck_probability: f64,
    pub noise_sigma: f64,
    /// AR(1) coefficient of the normal signal.
    pub ar: f64,
    /// Off-diagonal scale of the innovation mixing matrix.
    pub coupling: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            samples: 20_000,
            features: 8,
            regimes: 2,
            anomaly_fraction: 0.1,
            shift: 4.0,
            affected_features: 3,
            shared_subset: false,
            segment_len: 500,
            stuck_probability: 0.25,
            noise_sigma: 1.0,
            ar: 0.7,
            coupling: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 1.0) {
            return bad(format!(
                "anomaly fraction {} not in (0, 1)",
                self.anomaly_fraction
            ));
        }
        if self.features == 0 || self.samples == 0 || self.segment_len == 0 || self.regimes == 0 {
            return bad("samples, features, regimes and segment length must be >= 1".into());
        }
        if self.affected_features == 0 || self.affected_features > self.features {
            return bad(format!(
                "affected features {} not in 1..={}",
                self.affected_features, self.features
            ));
        }
        if !(0.0..=1.0).contains(&self.stuck_probability) {
            return bad("stuck probability must lie in [0, 1]".into());
        }
        if !(self.ar.abs() < 1.0) {
            return bad("AR coefficient must satisfy |ar| < 1".into());
        }
        if !(self.noise_sigma > 0.0) || !self.shift.is_finite() || self.shift < 0.0 {
            return bad("noise sigma must be positive and shift non-negative".into());
        }
        let segments = self.segments();
        if segments * self.segment_len >= self.samples {
            return bad("anomaly segments do not fit in the series".into());
        }
        Ok(())
    }

    fn segments(&self) -> usize {
        ((self.anomaly_fraction * self.samples as f64 / self.segment_len as f64).round() as usize)
            .max(1)
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.features;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let mixing = Matrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { spec.coupling * normal() });
    let stationary_sd: Vec<f64> = (0..d)
        .map(|k| {
            let row_sq: f64 = mixing.row(k).iter().map(|v| v * v).sum();
            spec.noise_sigma * (row_sq / (1.0 - spec.ar * spec.ar)).sqrt()
        })
        .collect();
    let regime_means: Vec<Vec<f64>> = (0..spec.regimes)
        .map(|_| (0..d).map(|k| 0.5 * stationary_sd[k] * normal()).collect())
        .collect();

    let mut x = Matrix::zeros(spec.samples, d);
    let mut state: Vec<f64> = (0..d).map(|k| stationary_sd[k] * normal()).collect();
    let regime_len = spec.samples.div_ceil(spec.regimes);
    let mut eps = vec![0.0; d];
    for t in 0..spec.samples {
        for e in eps.iter_mut() {
            *e = spec.noise_sigma * normal();
        }
        let mean = &regime_means[t / regime_len];
        let row = x.row_mut(t);
        for k in 0..d {
            let innovation: f64 = mixing.row(k).iter().zip(&eps).map(|(a, e)| a * e).sum();
            state[k] = spec.ar * state[k] + innovation;
            row[k] = mean[k] + state[k];
        }
    }

    let mut labels = vec![0u8; spec.samples];
    let segments = spec.segments();
    let slot = spec.samples / segments;
    let shared = spec
        .shared_subset
        .then(|| index::sample(&mut rng, d, spec.affected_features).into_vec());
    for s in 0..segments {
        let slack = slot.saturating_sub(spec.segment_len);
        let start = s * slot + if slack > 0 { rng.random_range(0..=slack) } else { 0 };
        let end = (start + spec.segment_len).min(spec.samples);
        let affected = match &shared {
            Some(a) => a.clone(),
            None => index::sample(&mut rng, d, spec.affected_features).into_vec(),
        };
        let stuck = rng.random::<f64>() < spec.stuck_probability;
        let signs: Vec<f64> = affected
            .iter()
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        for (&k, sign) in affected.iter().zip(&signs) {
            let offset = sign * spec.shift * stationary_sd[k];
            let level = regime_means[start / regime_len][k] + offset;
            for t in start..end {
                let v = if stuck { level } else { x.get(t, k) + offset };
                x.set(t, k, v);
            }
        }
        labels[start..end].iter_mut().for_each(|l| *l = 1);
    }
    let names = (0..d).map(|k| format!("f{k}")).collect();
    Dataset::new(x, labels, names)
}

/// Split sizes; the calibration split defaults to a fifth of calibration plus test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    #[serde(default = "default_size")]
    pub train: usize,
    #[serde(default)]
    pub calib: Option<usize>,
    #[serde(default = "default_size")]
    pub test: usize,
    #[serde(default)]
    pub seed: u64,
    /// Anomaly share of calibration and test; defaults to the share among
    /// rows left after drawing the training set.
    #[serde(default)]
    pub anomaly_ratio: Option<f64>,
}

fn default_size() -> usize {
    1000
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            train: default_size(),
            calib: None,
            test: default_size(),
            seed: 0,
            anomaly_ratio: None,
        }
    }
}

impl Sampler {
    pub fn calib_size(&self) -> usize {
        self.calib.unwrap_or(self.test / 4)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub calib: Vec<usize>,
    pub test: Vec<usize>,
}

fn draw(rng: &mut ChaCha8Rng, pool: &[usize], n: usize, what: &str) -> Result<Vec<usize>> {
    if n > pool.len() {
        return Err(Error::InsufficientRows(format!(
            "need {n} {what} rows, {} available",
            pool.len()
        )));
    }
    Ok(index::sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

/// Normal-only training rows, then stratified calibration and test rows from
/// the remainder. Index lists are sorted and pairwise disjoint.
pub fn sample_splits(labels: &[u8], sampler: &Sampler) -> Result<Splits> {
    if sampler.train < 2 || sampler.test == 0 {
        return Err(Error::Config("train size must be >= 2 and test size >= 1".into()));
    }
    if let Some(r) = sampler.anomaly_ratio {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Config(format!("anomaly ratio {r} not in (0, 1)")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let normals: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let mut train = draw(&mut rng, &normals, sampler.train, "normal training")?;
    train.sort_unstable();

    let mut in_train = vec![false; labels.len()];
    train.iter().for_each(|&i| in_train[i] = true);
    let rest_normal: Vec<usize> = normals.iter().copied().filter(|&i| !in_train[i]).collect();
    let rest_anomaly: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 0).collect();
    if rest_anomaly.is_empty() {
        return Err(Error::SingleClass);
    }
    let ratio = sampler.anomaly_ratio.unwrap_or(
        rest_anomaly.len() as f64 / (rest_anomaly.len() + rest_normal.len()) as f64,
    );
    let calib_n = sampler.calib_size();
    let anomalies_for = |n: usize| ((ratio * n as f64).round() as usize).clamp(usize::from(n > 0), n);
    let (calib_a, test_a) = (anomalies_for(calib_n), anomalies_for(sampler.test));

    let mut anomaly_pool = draw(&mut rng, &rest_anomaly, calib_a + test_a, "anomalous")?;
    let mut normal_pool = draw(
        &mut rng,
        &rest_normal,
        calib_n - calib_a + sampler.test - test_a,
        "normal evaluation",
    )?;
    anomaly_pool.shuffle(&mut rng);
    normal_pool.shuffle(&mut rng);
    let mut calib: Vec<usize> = anomaly_pool[..calib_a]
        .iter()
        .chain(&normal_pool[..calib_n - calib_a])
        .copied()
        .collect();
    let mut test: Vec<usize> = anomaly_pool[calib_a..]
        .iter()
        .chain(&normal_pool[calib_n - calib_a..])
        .copied()
        .collect();
    calib.sort_unstable();
    test.sort_unstable();
    Ok(Splits { train, calib, test })
}

/// Digest of dataset contents and the sampler seed.
pub fn dataset_hash(ds: &Dataset, sampler_seed: u64) -> String {
    let mut h = Sha256::new();
    h.update((ds.matrix.rows() as u64).to_le_bytes());
    h.update((ds.matrix.cols() as u64).to_le_bytes());
    for v in ds.matrix.data() {
        h.update(v.to_le_bytes());
    }
    h.update(&ds.labels);
    for name in &ds.feature_names {
        h.update(name.as_bytes());
        h.update([0]);
    }
    h.update(sampler_seed.to_le_bytes());
    hex::encode(h.finalize())
}
