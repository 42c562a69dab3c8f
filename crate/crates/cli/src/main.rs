//! `qkad` batch command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qkad::kernel::{exponentiate, Stage};
use qkad::noise::NoisePreset;
use qkad::ocsvm::{self, OcsvmModel};
use qkad::pipeline::{
    self, artifacts, read_json, write_json, ExperimentConfig, RunReport, SplitRecord, SynthSpec,
};
use qkad::{Error, Result};

#[derive(Parser)]
#[command(name = "qkad", version, about = "Quantum-kernel one-class SVM anomaly detection")]
struct Cli {
    /// Overrides the experiment and sampler seeds (the generator seed for `synth`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for kernel and sweep computation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (JSON); defaults to `config.json` in the output directory.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled time series as CSV.
    Synth {
        /// Generator settings (JSON); omitted fields take defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Window, split, standardize and reduce; writes features and splits.
    Prep(ConfigArg),
    /// Compute kernels from prepared features.
    Kernel(ConfigArg),
    /// Sweep the one-class SVM over persisted kernels and save the best model.
    Train(ConfigArg),
    /// Score the test kernel with the saved model.
    Eval(ConfigArg),
    /// Alignment diagnostics from persisted kernels.
    Align(ConfigArg),
    /// Full experiment.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Compare reports that share a dataset.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Also write the pairwise table as CSV.
        #[arg(long)]
        emit_csv: Option<PathBuf>,
    },
    /// List the built-in noise presets.
    NoisePresets {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { spec, out } => synth(cli, spec.as_deref(), out),
        Command::Prep(c) => {
            let (cfg, _) = experiment(cli, c, true)?;
            let dir = pipeline::output_dir(&cfg)?;
            let prepared = pipeline::prepare(&cfg)?;
            pipeline::persist_prepared(&dir, &cfg, &prepared)?;
            println!(
                "prepared {} train and {} test rows ({} anomalous) in {}",
                prepared.train.rows(),
                prepared.test.rows(),
                prepared.test_labels.iter().filter(|&&l| l != 0).count(),
                dir.display()
            );
            for w in &prepared.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Kernel(c) => {
            let (cfg, dir) = experiment(cli, c, false)?;
            let (train, test, _) = pipeline::load_prepared_features(&dir)?;
            let kernels = pipeline::compute_kernels(&cfg, &train, &test)?;
            pipeline::persist_kernels(&dir, &kernels)?;
            println!(
                "{}: train {}x{}, test {}x{}",
                cfg.kernel_label(),
                kernels.train.rows(),
                kernels.train.cols(),
                kernels.test.rows(),
                kernels.test.cols()
            );
            Ok(())
        }
        Command::Train(c) => {
            let (cfg, dir) = experiment(cli, c, false)?;
            let record: SplitRecord = read_json(&dir.join(artifacts::SPLITS))?;
            let kernels = pipeline::load_kernels(&dir)?;
            let trained =
                pipeline::train_and_evaluate(&cfg, &kernels.train, &kernels.test, &record.test_labels)?;
            write_json(&dir.join(artifacts::MODEL), &trained.sweep.best_model)?;
            write_json(&dir.join(artifacts::SWEEP), &trained.sweep.cells)?;
            let failed = trained.sweep.cells.iter().filter(|c| c.error.is_some()).count();
            println!(
                "best nu={} tol={} over {} cells ({failed} failed)",
                trained.sweep.best.nu,
                trained.sweep.best.tol,
                trained.sweep.cells.len()
            );
            Ok(())
        }
        Command::Eval(c) => {
            let (_, dir) = experiment(cli, c, false)?;
            let model: OcsvmModel = read_json(&dir.join(artifacts::MODEL))?;
            let record: SplitRecord = read_json(&dir.join(artifacts::SPLITS))?;
            let mut k_test = pipeline::load_kernel(&dir.join(artifacts::K_TEST))?;
            if model.stage == Stage::Exponentiated {
                k_test = exponentiate(&k_test)?;
            }
            let scores = ocsvm::decision_scores(&model, &k_test)?;
            let metrics = ocsvm::evaluate(&ocsvm::predict(&scores), &record.test_labels)?;
            println!("{}", to_json(&metrics));
            Ok(())
        }
        Command::Align(c) => {
            let (cfg, dir) = experiment(cli, c, false)?;
            let (_, test, labels) = pipeline::load_prepared_features(&dir)?;
            let kernels = pipeline::load_kernels(&dir)?;
            let report = pipeline::alignment(&cfg, &kernels, &test, &labels)?;
            println!("{}", to_json(&report));
            Ok(())
        }
        Command::Run { config, json } => {
            let (cfg, _) = experiment(cli, config, true)?;
            let report = pipeline::run(&cfg)?;
            if *json {
                println!("{}", to_json(&report));
            } else {
                print_summary(&report);
            }
            Ok(())
        }
        Command::Compare { reports, emit_csv } => {
            let loaded = reports
                .iter()
                .map(|p| read_json::<RunReport>(p).map_err(|e| Error::Config(format!("{}: {e}", p.display()))))
                .collect::<Result<Vec<_>>>()?;
            let cmp = pipeline::compare(&loaded)?;
            print!("{}", cmp.to_text());
            if let Some(path) = emit_csv {
                cmp.write_csv(path)?;
            }
            Ok(())
        }
        Command::NoisePresets { json } => {
            let presets = NoisePreset::all();
            if *json {
                println!("{}", to_json(&presets));
            } else {
                println!(
                    "{:<11} {:>6} {:>10} {:>10} {:>8} {:>8} {:>8} {:>10}",
                    "preset", "qubits", "p1q", "p2q", "readout", "T1 us", "T2 us", "2Q EPLG"
                );
                let opt = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.2}"));
                for p in presets {
                    let m = p.model;
                    println!(
                        "{:<11} {:>6} {:>10.3e} {:>10.3e} {:>8.4} {:>8} {:>8} {:>10.3e}",
                        p.name.to_string(),
                        p.qubits,
                        m.p1q,
                        m.p2q,
                        m.readout_flip,
                        opt(m.t1),
                        opt(m.t2),
                        p.best_2q_eplg
                    );
                }
            }
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable output")
}

fn synth(cli: &Cli, spec: Option<&Path>, out: &Path) -> Result<()> {
    let mut s: SynthSpec = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    let ds = pipeline::synth_generate(&s)?;
    pipeline::write_dataset_csv(out, &ds)?;
    let anomalies = ds.labels.iter().filter(|&&l| l != 0).count();
    println!("wrote {} rows ({anomalies} anomalous) to {}", ds.len(), out.display());
    Ok(())
}

/// Resolves the config and output directory. Stages after `prep` read the
/// config saved in the output directory unless one is given.
fn experiment(cli: &Cli, arg: &ConfigArg, fresh: bool) -> Result<(ExperimentConfig, PathBuf)> {
    let path = match (&arg.config, &cli.out_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) if !fresh => dir.join(artifacts::CONFIG),
        _ => return Err(Error::Config("--config is required".into())),
    };
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.sampler.seed = seed;
    }
    let dir = match (&cfg.out_dir, fresh) {
        (Some(d), _) => d.clone(),
        (None, true) => PathBuf::new(),
        (None, false) => return Err(Error::Config("an output directory is required".into())),
    };
    Ok((cfg, dir))
}

fn print_summary(r: &RunReport) {
    let m = &r.metrics;
    println!("kernel      {}", r.kernel_label);
    println!("dataset     {}", r.dataset_hash);
    println!(
        "rows        train {} / test {} ({} anomalous)",
        r.train_rows, r.test_rows, r.test_anomalies
    );
    println!("best        nu={} tol={}", r.best.nu, r.best.tol);
    println!(
        "metrics     precision {:.4} recall {:.4} f1 {:.4} accuracy {:.4}",
        m.precision, m.recall, m.f1, m.accuracy
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.6}"));
    println!(
        "alignment   kta {} ka {} d_error {}",
        opt(r.alignment.kta),
        opt(r.alignment.ka),
        opt(r.alignment.d_error)
    );
    println!("time        {:.1} ms", r.timing.total_ms);
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}
