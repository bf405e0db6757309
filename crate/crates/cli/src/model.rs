//! Commands that train or evaluate a configured system.

use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;
use sfdma_core::analysis::{
    cross_decode, orthogonality_report, pca_project, snr_sweep, EvalData, EvalSettings, System, Task,
};
use sfdma_core::channel::PowerAllocation;
use sfdma_core::io::{load_checkpoint, save_checkpoint, write_csv, Checkpoint, Payload};
use sfdma_core::link::Transceiver;
use sfdma_core::nncore::{SeededRng, Tensor};
use sfdma_core::par::Exec;
use sfdma_core::recon::{evaluate_recon, train_recon, ReconConfig, ReconPair};
use sfdma_core::rib::{evaluate_accuracy, train_distributed, RibConfig, TransceiverPair};

use crate::config::{ExperimentConfig, TaskKind};
use crate::data::{self, Split};
use crate::manifest::Manifest;
use crate::CliError;

/// A loaded config plus command-line overrides.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub config_bytes: Vec<u8>,
    pub out: PathBuf,
}

impl Run {
    pub fn load(
        config: &Path,
        out: Option<PathBuf>,
        seed: Option<u64>,
        trials: Option<usize>,
    ) -> Result<Self, CliError> {
        let (mut cfg, config_bytes) = ExperimentConfig::load(config)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(t) = trials {
            if t == 0 {
                return Err(CliError::Config("--trials: must be ≥ 1".into()));
            }
            cfg.eval.trials = t;
        }
        let out = out.unwrap_or_else(|| cfg.output_dir.clone());
        std::fs::create_dir_all(&out)?;
        Ok(Run { cfg, config_bytes, out })
    }

    fn manifest(&self, command: &'static str) -> Manifest {
        let mut m = Manifest::new(command);
        m.input("config", &self.config_bytes);
        m.seed = Some(self.cfg.seed);
        m
    }

    fn settings(&self, snr_db: f64) -> Result<EvalSettings, CliError> {
        Ok(EvalSettings {
            snr_db,
            powers: PowerAllocation::new(self.cfg.powers.clone())?,
            trials: self.cfg.eval.trials,
            rng: SeededRng::new(self.cfg.eval.seed),
            exec: Exec::default(),
        })
    }

    fn checkpoint_path(&self, given: Option<&Path>) -> PathBuf {
        given.map_or_else(|| self.out.join("checkpoint.json"), Path::to_path_buf)
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

pub fn train(run: &Run) -> Result<(), CliError> {
    let cfg = &run.cfg;
    let mut rng = SeededRng::new(cfg.seed);
    let payload = match data::load(cfg)? {
        Split::Labeled { train, .. } => {
            let bits = cfg.bits.expect("validated");
            let arch = cfg.architecture.clone().unwrap_or_default();
            let mut pairs = (0..cfg.users)
                .map(|i| TransceiverPair::new(i, train.dim(), train.classes, bits, cfg.lambda, &arch, &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            let rc = RibConfig {
                users: cfg.users,
                batch_size: cfg.batch_size,
                noise_samples: cfg.noise_samples,
                epochs: cfg.epochs,
                train_snr_db: cfg.train_snr_db,
                powers: cfg.powers.clone(),
                seed: cfg.seed,
                learning_rate: cfg.learning_rate,
                train_with_interference: cfg.train_with_interference,
            };
            info!("training {} users on {} samples, d = {bits}", cfg.users, train.len());
            let metrics = train_distributed(&mut pairs, &vec![&train; cfg.users], &rc)?;
            let rows = metrics.iter().map(|m| {
                vec![m.epoch.to_string(), m.user.to_string(), f(m.ce), f(m.hyx), f(m.hxs), f(m.total), f(m.accuracy)]
            });
            write_csv(&run.out.join("metrics.csv"), &["epoch", "user", "ce", "hyx", "hxs", "total", "accuracy"], rows)?;
            Payload::Classification { config: rc, pairs, metrics }
        }
        Split::Images { train, .. } => {
            let spec = cfg.autoencoder_spec();
            let mut pairs =
                (0..cfg.users).map(|i| ReconPair::new(i, &spec, &mut rng)).collect::<Result<Vec<_>, _>>()?;
            let rc = ReconConfig {
                users: cfg.users,
                batch_size: cfg.batch_size,
                epochs: cfg.epochs,
                train_snr_db: cfg.train_snr_db,
                powers: cfg.powers.clone(),
                seed: cfg.seed,
                learning_rate: cfg.learning_rate,
                train_with_interference: cfg.train_with_interference,
            };
            info!("training {} users on {} images, d = {}", cfg.users, train.len(), spec.bits());
            let metrics = train_recon(&mut pairs, &vec![&train; cfg.users], &rc)?;
            let rows = metrics.iter().map(|m| {
                let ssim = m.ms_ssim.map(f).unwrap_or_default();
                vec![m.epoch.to_string(), m.user.to_string(), f(m.mse), f(m.psnr), ssim]
            });
            write_csv(&run.out.join("metrics.csv"), &["epoch", "user", "mse", "psnr_db", "ms_ssim"], rows)?;
            Payload::Reconstruction { config: rc, pairs, metrics }
        }
    };
    save_checkpoint(&run.out.join("checkpoint.json"), &Checkpoint::new(payload))?;
    let mut m = run.manifest("train");
    m.outputs = vec!["checkpoint.json".into(), "metrics.csv".into()];
    m.write(&run.out)
}

/// Trained pairs of either track.
enum Trained {
    Classification(Vec<TransceiverPair>),
    Reconstruction(Vec<ReconPair>),
}

impl Trained {
    fn system(&self) -> System<'_> {
        match self {
            Trained::Classification(p) => System::Classification(p),
            Trained::Reconstruction(p) => System::Reconstruction(p),
        }
    }

    fn task(&self) -> Task {
        match self {
            Trained::Classification(_) => Task::Classify,
            Trained::Reconstruction(_) => Task::Reconstruct,
        }
    }

    /// Eval-mode symbols of every user for `inputs`.
    fn symbols(&self, inputs: &Tensor) -> Result<Vec<Tensor>, CliError> {
        let out: Result<Vec<_>, _> = match self {
            Trained::Classification(p) => p.iter().map(|q| q.transmit(inputs)).collect(),
            Trained::Reconstruction(p) => p.iter().map(|q| q.transmit(inputs)).collect(),
        };
        Ok(out?)
    }
}

/// Checkpoint, test split and manifest shared by the evaluation commands.
struct Loaded {
    trained: Trained,
    test: Split,
    manifest: Manifest,
}

fn load_trained(run: &Run, command: &'static str, checkpoint: Option<&Path>) -> Result<Loaded, CliError> {
    let path = run.checkpoint_path(checkpoint);
    if !path.is_file() {
        return Err(CliError::Config(format!("checkpoint {} not found; run `sfdma train` first", path.display())));
    }
    let ckpt = load_checkpoint(&path)?;
    let trained = match (ckpt.payload, run.cfg.task) {
        (Payload::Classification { pairs, .. }, TaskKind::Inference) => Trained::Classification(pairs),
        (Payload::Reconstruction { pairs, .. }, TaskKind::Reconstruction) => Trained::Reconstruction(pairs),
        (p, t) => {
            return Err(CliError::Config(format!(
                "checkpoint holds a {} system but the config task is {t:?}",
                p.task_name()
            )))
        }
    };
    let n = match &trained {
        Trained::Classification(p) => p.len(),
        Trained::Reconstruction(p) => p.len(),
    };
    if n != run.cfg.users {
        return Err(CliError::Config(format!("users: config has {}, checkpoint has {n}", run.cfg.users)));
    }
    let mut manifest = run.manifest(command);
    manifest.input_file("checkpoint", &path)?;
    Ok(Loaded { trained, test: data::load(&run.cfg)?, manifest })
}

fn eval_data(split: &Split) -> EvalData<'_> {
    match split {
        Split::Labeled { test, .. } => EvalData::Labeled(test),
        Split::Images { test, .. } => EvalData::Images(test),
    }
}

fn test_inputs(split: &Split) -> Tensor {
    match split {
        Split::Labeled { test, .. } => test.samples.clone(),
        Split::Images { test, .. } => test.to_tensor(),
    }
}

/// Accuracies are reported in percent.
fn metric_value(task: Task, v: f64) -> f64 {
    match task {
        Task::Classify => 100.0 * v,
        Task::Reconstruct => v,
    }
}

fn metric_header(task: Task) -> &'static str {
    match task {
        Task::Classify => "accuracy_pct",
        Task::Reconstruct => "psnr_db",
    }
}

pub fn eval(run: &Run, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let mut l = load_trained(run, "eval", checkpoint)?;
    let snr = run.cfg.eval_snr_db();
    let s = run.settings(snr)?;
    match (&l.trained, &l.test) {
        (Trained::Classification(pairs), Split::Labeled { test, .. }) => {
            let acc = evaluate_accuracy(pairs, test, snr, &s.powers, s.trials, &s.rng, s.exec)?;
            let rows = acc.iter().enumerate().map(|(u, a)| vec![u.to_string(), f(snr), f(100.0 * a)]);
            write_csv(&run.out.join("eval.csv"), &["user", "snr_db", "accuracy_pct"], rows)?;
        }
        (Trained::Reconstruction(pairs), Split::Images { test, .. }) => {
            let m = evaluate_recon(pairs, test, snr, &s.powers, s.trials, &s.rng, s.exec)?;
            let rows = m
                .iter()
                .enumerate()
                .map(|(u, r)| vec![u.to_string(), f(snr), f(r.mse), f(r.psnr), r.ms_ssim.map(f).unwrap_or_default()]);
            write_csv(&run.out.join("eval.csv"), &["user", "snr_db", "mse", "psnr_db", "ms_ssim"], rows)?;
        }
        _ => unreachable!("dataset kind is validated against the task"),
    }
    l.manifest.options = json!({ "snr_db": snr, "trials": s.trials, "eval_seed": run.cfg.eval.seed });
    l.manifest.outputs = vec!["eval.csv".into()];
    l.manifest.write(&run.out)
}

/// `min, min + step, …` up to `max` (inclusive within rounding).
pub fn snr_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || !min.is_finite() || !max.is_finite() || max < min {
        return Err(CliError::Config(format!(
            "--snr-min/--snr-max/--step: need min ≤ max and step > 0, got {min}, {max}, {step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| min + k as f64 * step).collect())
}

pub fn sweep(run: &Run, checkpoint: Option<&Path>, snr: &[f64]) -> Result<(), CliError> {
    let mut l = load_trained(run, "sweep", checkpoint)?;
    let task = l.trained.task();
    let rows = snr_sweep(l.trained.system(), eval_data(&l.test), snr, &run.settings(snr[0])?)?;
    let rows = rows.iter().map(|r| vec![f(r.snr_db), r.user.to_string(), f(metric_value(task, r.metric))]);
    write_csv(&run.out.join("sweep.csv"), &["snr_db", "user", metric_header(task)], rows)?;
    l.manifest.options = json!({ "snr_db": snr, "trials": run.cfg.eval.trials, "eval_seed": run.cfg.eval.seed });
    l.manifest.outputs = vec!["sweep.csv".into()];
    l.manifest.write(&run.out)
}

pub fn xdecode(run: &Run, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let mut l = load_trained(run, "xdecode", checkpoint)?;
    let task = l.trained.task();
    let snr = run.cfg.eval_snr_db();
    let m = cross_decode(l.trained.system(), eval_data(&l.test), task, &run.settings(snr)?)?;
    let n = m.values.len();
    let rows = (0..n).flat_map(|i| {
        let row = &m.values[i];
        (0..n).map(move |j| vec![i.to_string(), j.to_string(), f(metric_value(task, row[j]))])
    });
    write_csv(&run.out.join("crossdecode.csv"), &["rx", "tx", metric_header(task)], rows)?;
    l.manifest.options = json!({ "snr_db": snr, "trials": run.cfg.eval.trials, "eval_seed": run.cfg.eval.seed });
    l.manifest.outputs = vec!["crossdecode.csv".into()];
    l.manifest.write(&run.out)
}

pub fn ortho(run: &Run, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let mut l = load_trained(run, "ortho", checkpoint)?;
    let inputs = test_inputs(&l.test);
    let rng = SeededRng::new(run.cfg.eval.seed);
    let samples = run.cfg.eval.ortho_samples;
    let r = match &l.trained {
        Trained::Classification(p) => orthogonality_report(p, &inputs, &rng, samples)?,
        Trained::Reconstruction(p) => orthogonality_report(p, &inputs, &rng, samples)?,
    };
    let n = r.users();
    let rows = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| vec![i.to_string(), j.to_string(), f(r.inner[i][j]), f(r.angle_deg[i][j])]);
    write_csv(&run.out.join("orthogonality.csv"), &["i", "j", "inner", "angle_deg"], rows)?;
    l.manifest.options = json!({ "samples": r.samples, "eval_seed": run.cfg.eval.seed });
    l.manifest.outputs = vec!["orthogonality.csv".into()];
    l.manifest.write(&run.out)
}

/// Joint 2-D PCA of every user's transmitted blocks for the first
/// `ortho_samples` test inputs.
pub fn project(run: &Run, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let mut l = load_trained(run, "project", checkpoint)?;
    let inputs = test_inputs(&l.test);
    let rows = inputs.rows().min(run.cfg.eval.ortho_samples);
    let idx: Vec<usize> = (0..rows).collect();
    let symbols = l.trained.symbols(&inputs.select_rows(&idx))?;
    let features: Vec<Vec<f64>> = symbols.iter().flat_map(|s| (0..rows).map(|q| s.row(q).to_vec())).collect();
    let p = pca_project(&features, 2)?;
    let labels: Vec<String> = match &l.test {
        Split::Labeled { test, .. } => test.labels[..rows].iter().map(usize::to_string).collect(),
        Split::Images { .. } => vec![String::new(); rows],
    };
    let out = p.coords.iter().enumerate().map(|(k, c)| {
        let (user, sample) = (k / rows, k % rows);
        vec![sample.to_string(), labels[sample].clone(), user.to_string(), f(c[0]), f(c[1])]
    });
    write_csv(&run.out.join("projection.csv"), &["sample", "label", "user", "c1", "c2"], out)?;
    l.manifest.options = json!({ "samples": rows, "explained": p.explained });
    l.manifest.outputs = vec!["projection.csv".into()];
    l.manifest.write(&run.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        assert_eq!(snr_grid(-5.0, 25.0, 1.0).unwrap().len(), 31);
        assert_eq!(snr_grid(0.0, 1.0, 0.1).unwrap().len(), 11);
        assert_eq!(snr_grid(3.0, 3.0, 1.0).unwrap(), vec![3.0]);
        assert!(snr_grid(1.0, 0.0, 1.0).is_err());
        assert!(snr_grid(0.0, 1.0, 0.0).is_err());
    }
}
