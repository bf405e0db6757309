//! Measurements of the multiple-access claims: orthogonality of the learned
//! feature blocks, cross-decoding leakage, SNR sweeps and PCA projections.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::channel::PowerAllocation;
use crate::error::{Error, Result};
use crate::link::{transmit_all, Transceiver};
use crate::nncore::{SeededRng, Tensor};
use crate::par::Exec;
use crate::recon::{ImageSet, ReconPair};
use crate::rib::{LabeledDataset, TransceiverPair};

/// Mean normalized inner products and the angles derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub samples: usize,
    /// `inner[i][j]` = mean of `⟨x_i, x_j⟩ / (‖x_i‖‖x_j‖)`.
    pub inner: Vec<Vec<f64>>,
    /// `arccos` of the clamped stored mean, in degrees.
    pub angle_deg: Vec<Vec<f64>>,
}

impl OrthogonalityReport {
    pub fn users(&self) -> usize {
        self.inner.len()
    }
}

/// Report over per-user symbol batches that share their row order.
pub fn orthogonality_from_symbols(symbols: &[Tensor]) -> Result<OrthogonalityReport> {
    let n = symbols.len();
    let first = symbols.first().ok_or_else(|| Error::InsufficientData("no users".into()))?;
    let rows = first.rows();
    if rows == 0 || symbols.iter().any(|s| s.shape() != first.shape()) {
        return Err(Error::InvalidParams("symbol batches must be non-empty and share a shape".into()));
    }
    let norms: Vec<Vec<f64>> = symbols
        .iter()
        .map(|s| (0..rows).map(|q| s.row(q).iter().map(|v| v * v).sum::<f64>().sqrt()).collect())
        .collect();
    let mut inner = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for q in 0..rows {
                let dot: f64 = symbols[i].row(q).iter().zip(symbols[j].row(q)).map(|(a, b)| a * b).sum();
                let den = norms[i][q] * norms[j][q];
                if den == 0.0 {
                    return Err(Error::ZeroDenominator("normalized inner product"));
                }
                acc += dot / den;
            }
            let mean = if i == j { 1.0 } else { acc / rows as f64 };
            inner[i][j] = mean;
            inner[j][i] = mean;
        }
    }
    let angle_deg =
        inner.iter().map(|row| row.iter().map(|v| v.clamp(-1.0, 1.0).acos().to_degrees()).collect()).collect();
    Ok(OrthogonalityReport { samples: rows, inner, angle_deg })
}

/// Feeds the same `samples` inputs (drawn without replacement by `rng`) to
/// every encoder and compares the eval-mode blocks.
pub fn orthogonality_report<P: Transceiver>(
    pairs: &[P],
    inputs: &Tensor,
    rng: &SeededRng,
    samples: usize,
) -> Result<OrthogonalityReport> {
    if samples == 0 || inputs.rows() == 0 {
        return Err(Error::InsufficientData("orthogonality needs at least one sample".into()));
    }
    let mut idx: Vec<usize> = (0..inputs.rows()).collect();
    if samples < idx.len() {
        rng.clone().shuffle(&mut idx);
        idx.truncate(samples);
        idx.sort_unstable();
    }
    orthogonality_from_symbols(&transmit_all(pairs, &inputs.select_rows(&idx))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Reconstruct,
}

impl Task {
    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Classify => "accuracy",
            Task::Reconstruct => "psnr_db",
        }
    }
}

/// A trained system of either track.
#[derive(Debug, Clone, Copy)]
pub enum System<'a> {
    Classification(&'a [TransceiverPair]),
    Reconstruction(&'a [ReconPair]),
}

/// Evaluation data matching a [`System`].
#[derive(Debug, Clone, Copy)]
pub enum EvalData<'a> {
    Labeled(&'a LabeledDataset),
    Images(&'a ImageSet),
}

/// Link conditions shared by every evaluation.
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub snr_db: f64,
    pub powers: PowerAllocation,
    pub trials: usize,
    pub rng: SeededRng,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDecodeMatrix {
    pub task: Task,
    /// `values[i][j]`: RX `i`'s metric when fed TX `j`'s signal (`i = j`:
    /// full received signal).
    pub values: Vec<Vec<f64>>,
}

impl System<'_> {
    pub fn users(&self) -> usize {
        match self {
            System::Classification(p) => p.len(),
            System::Reconstruction(p) => p.len(),
        }
    }

    fn task(&self) -> Task {
        match self {
            System::Classification(_) => Task::Classify,
            System::Reconstruction(_) => Task::Reconstruct,
        }
    }

    /// Per-receiver task metric. `interferer` routes only that TX's
    /// noise-free signal to each receiver.
    fn metric_row(
        &self,
        data: EvalData<'_>,
        snr_db: f64,
        s: &EvalSettings,
        interferer: Option<&dyn Fn(usize) -> usize>,
    ) -> Result<Vec<f64>> {
        match (self, data) {
            (System::Classification(pairs), EvalData::Labeled(ds)) => {
                let symbols = transmit_all(pairs, &ds.samples)?;
                crate::rib::accuracy_row(pairs, &symbols, ds, snr_db, &s.powers, s.trials, &s.rng, s.exec, interferer)
            }
            (System::Reconstruction(pairs), EvalData::Images(images)) => {
                let symbols = transmit_all(pairs, &images.to_tensor())?;
                crate::recon::psnr_row(pairs, &symbols, images, snr_db, &s.powers, s.trials, &s.rng, s.exec, interferer)
            }
            _ => Err(Error::TaskMismatch("system and evaluation data belong to different tasks".into())),
        }
    }
}

/// Cross-decoding matrix for `task`; errors if the system or data belong
/// to the other task.
pub fn cross_decode(system: System<'_>, data: EvalData<'_>, task: Task, s: &EvalSettings) -> Result<CrossDecodeMatrix> {
    if system.task() != task {
        return Err(Error::TaskMismatch(format!("requested {task:?} on a {:?} system", system.task())));
    }
    let n = system.users();
    let diag = system.metric_row(data, s.snr_db, s, None)?;
    let mut values = vec![vec![0.0; n]; n];
    for (i, v) in diag.iter().enumerate() {
        values[i][i] = *v;
    }
    for shift in 1..n {
        let pick = move |rx: usize| (rx + shift) % n;
        let row = system.metric_row(data, s.snr_db, s, Some(&pick))?;
        for (rx, v) in row.into_iter().enumerate() {
            values[rx][pick(rx)] = v;
        }
    }
    Ok(CrossDecodeMatrix { task, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub user: usize,
    pub metric: f64,
}

/// One row per `(snr, user)`. Every SNR point reuses the same generator, so
/// a single-point sweep equals a plain evaluation at that SNR.
pub fn snr_sweep(system: System<'_>, data: EvalData<'_>, snr_list: &[f64], s: &EvalSettings) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(snr_list.len() * system.users());
    for &snr_db in snr_list {
        for (user, metric) in system.metric_row(data, snr_db, s, None)?.into_iter().enumerate() {
            rows.push(SweepRow { snr_db, user, metric });
        }
    }
    Ok(rows)
}

/// Principal-component projection of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// `k` unit directions, decreasing variance; zero rows pad a rank
    /// deficit.
    pub components: Vec<Vec<f64>>,
    /// Fraction of total variance per component.
    pub explained: Vec<f64>,
    /// `[n × k]` coordinates.
    pub coords: Vec<Vec<f64>>,
}

impl Projection {
    /// `mean + Σ_c coords_c · component_c`.
    pub fn back_project(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, comp) in coords.iter().zip(&self.components) {
            for (o, v) in out.iter_mut().zip(comp) {
                *o += c * v;
            }
        }
        out
    }
}

pub fn pca_project(features: &[Vec<f64>], k: usize) -> Result<Projection> {
    let n = features.len();
    if k == 0 || n < k + 1 {
        return Err(Error::InsufficientData(format!("{n} vectors for {k} components")));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d || f.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidParams("feature vectors must be finite and share a length".into()));
    }
    let mut mean = vec![0.0; d];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, d, |r, c| features[r][c] - mean[c]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut components = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for c in 0..k {
        match order.get(c) {
            Some(&idx) if eig.eigenvalues[idx] > 0.0 && total > 0.0 => {
                let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
                // Sign convention: largest-magnitude entry positive.
                let lead = v.iter().cloned().fold(0.0, |acc: f64, x| if x.abs() > acc.abs() { x } else { acc });
                if lead < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                components.push(v);
                explained.push(eig.eigenvalues[idx] / total);
            }
            _ => {
                components.push(vec![0.0; d]);
                explained.push(0.0);
            }
        }
    }
    let coords = (0..n)
        .map(|r| components.iter().map(|comp| (0..d).map(|c| centered[(r, c)] * comp[c]).sum()).collect())
        .collect();
    Ok(Projection { mean, components, explained, coords })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_comparison_is_parallel() {
        let mut rng = SeededRng::new(1);
        let s =
            Tensor::new(vec![5, 8], (0..40).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect()).unwrap();
        let rep = orthogonality_from_symbols(&[s.clone(), s]).unwrap();
        assert_eq!(rep.inner[0][0], 1.0);
        assert_eq!(rep.angle_deg[1][1], 0.0);
        assert!((rep.inner[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_blocks_are_nearly_orthogonal() {
        let (d, samples) = (64, 2000);
        let mut rng = SeededRng::new(2);
        let mut draw = || {
            Tensor::new(
                vec![samples, d],
                (0..samples * d).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect(),
            )
            .unwrap()
        };
        let rep = orthogonality_from_symbols(&[draw(), draw()]).unwrap();
        let bound = 3.0 / ((d * samples) as f64).sqrt();
        assert!(rep.inner[0][1].abs() <= bound, "{}", rep.inner[0][1]);
        assert_eq!(rep.inner[0][1], rep.inner[1][0]);
        assert_eq!(rep.angle_deg[0][1], rep.inner[0][1].acos().to_degrees());
    }

    #[test]
    fn planar_cloud_is_fully_explained() {
        let mut rng = SeededRng::new(3);
        let (u, v) = ([1.0, 2.0, 0.0, -1.0, 0.5], [0.0, 1.0, 1.0, 1.0, -2.0]);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let (a, b) = (rng.normal(), 3.0 * rng.normal());
                (0..5).map(|c| 1.0 + a * u[c] + b * v[c]).collect()
            })
            .collect();
        let p = pca_project(&pts, 2).unwrap();
        assert!((p.explained.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.explained[0] >= p.explained[1]);
        let mean_coords =
            pca_project(&pts, 2).unwrap().coords.iter().fold([0.0, 0.0], |acc, c| [acc[0] + c[0], acc[1] + c[1]]);
        assert!(mean_coords.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn full_rank_back_projection_reproduces_inputs() {
        let mut rng = SeededRng::new(4);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.normal()).collect()).collect();
        let p = pca_project(&pts, 4).unwrap();
        for (x, c) in pts.iter().zip(&p.coords) {
            for (a, b) in x.iter().zip(p.back_project(c)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficit_pads_with_zero_components() {
        let pts: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64, 0.0, 0.0]).collect();
        let p = pca_project(&pts, 3).unwrap();
        assert_eq!(p.explained[1], 0.0);
        assert_eq!(p.components[2], vec![0.0; 3]);
        assert!(pca_project(&pts[..2], 2).is_err());
    }

    #[test]
    fn isotropic_cloud_spreads_variance() {
        let d = 10;
        let mut rng = SeededRng::new(5);
        let pts: Vec<Vec<f64>> = (0..20_000).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let p = pca_project(&pts, 2).unwrap();
        for e in &p.explained {
            assert!((e - 1.0 / d as f64).abs() < 0.02, "{e}");
        }
    }
}
