//! Desk-scale reproductions of the figure and table experiments.
//!
//! Every command reads an [`ExperimentConfig`], writes its CSV tables,
//! images and checkpoints into an output directory together with a
//! `manifest.toml` recording the resolved configuration and seed, and returns
//! a report with the numbers it wrote.

mod config;
mod depth;
mod derivative;
mod images;
mod toy;
mod wave;

pub use config::{
    Arch, ArchSettings, Archs, DepthSettings, DerivativeSettings, ExperimentConfig, ExperimentId,
    ImageSettings, OptimizerKind, Overrides, Setting, ToySettings, TrainSettings, WaveSettings,
};
pub use depth::{cmd_spectrum_depth, inversions, DepthReport, DepthRun, Sweep};
pub use derivative::{cmd_derivative_maps, gradient_magnitude, DerivativeReport, DerivativeRun};
pub use images::{cmd_image_sparse, cmd_image_uneven, SparseReport, SparseSummary, UnevenReport};
pub use toy::{cmd_toy_fig2, toy_network, ToyPanel, ToyReport};
pub use wave::{cmd_wave, WaveReport};

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::Table;
use crate::models::{save_network, Network};
use crate::training::{train, Metrics, Region, SignalDataset, TrainConfig};

/// Result of any command.
#[derive(Clone, Debug)]
pub enum Report {
    Toy(ToyReport),
    Wave(WaveReport),
    Uneven(UnevenReport),
    Sparse(SparseReport),
    Depth(DepthReport),
    Derivative(DerivativeReport),
}

/// Runs the experiment named in `cfg`, writing into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Report> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        ExperimentId::ToyFig2 => Report::Toy(cmd_toy_fig2(cfg, out)?),
        ExperimentId::WaveFig4 => Report::Wave(cmd_wave(cfg, out)?),
        ExperimentId::ImageUneven => Report::Uneven(cmd_image_uneven(cfg, out)?),
        ExperimentId::ImageSparse => Report::Sparse(cmd_image_sparse(cfg, out)?),
        ExperimentId::SpectrumDepth => Report::Depth(cmd_spectrum_depth(cfg, out)?),
        ExperimentId::DerivativeMaps => Report::Derivative(cmd_derivative_maps(cfg, out)?),
    })
}

/// Output directory that remembers what was written into it.
pub(crate) struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub(crate) fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub(crate) fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    pub(crate) fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let p = self.path(name);
        table.write(p)
    }

    pub(crate) fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(p, text)?;
        Ok(())
    }

    pub(crate) fn checkpoint(&mut self, name: &str, net: &Network) -> Result<()> {
        let p = self.path(name);
        save_network(net, p)
    }

    /// Writes `manifest.toml`; call last.
    pub(crate) fn finish(mut self, cfg: &ExperimentConfig) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            experiment: String,
            seed: u64,
            version: &'static str,
            outputs: Vec<String>,
            config: &'a ExperimentConfig,
        }
        self.written.sort();
        let manifest = Manifest {
            experiment: cfg.experiment.to_string(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs: std::mem::take(&mut self.written),
            config: cfg,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(self.dir.join("manifest.toml"), text)?;
        Ok(())
    }
}

/// Outcome of one training run in a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    /// Input the run was trained on (image stem or signal name).
    pub input: String,
    pub arch: Arch,
    pub setting: Setting,
    pub k: f64,
    pub epsilon: f64,
    pub t_psnr: f64,
    pub l_psnr: Option<f64>,
    pub r_psnr: Option<f64>,
    pub l_mse: Option<f64>,
    pub r_mse: Option<f64>,
    pub mse: f64,
    /// Training failure, if any; metric fields are NaN then.
    pub error: Option<String>,
}

impl RunSummary {
    pub(crate) const HEADER: [&'static str; 12] = [
        "input", "arch", "setting", "k", "epsilon", "l_psnr", "r_psnr", "t_psnr", "l_mse", "r_mse",
        "mse", "status",
    ];

    pub(crate) fn row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        vec![
            self.input.clone(),
            self.arch.to_string(),
            self.setting.to_string(),
            self.k.to_string(),
            self.epsilon.to_string(),
            opt(self.l_psnr),
            opt(self.r_psnr),
            self.t_psnr.to_string(),
            opt(self.l_mse),
            opt(self.r_mse),
            self.mse.to_string(),
            self.error.clone().unwrap_or_else(|| "ok".into()),
        ]
    }
}

pub(crate) fn summary_table(runs: &[RunSummary]) -> Result<Table> {
    let mut t = Table::new(&RunSummary::HEADER);
    for r in runs {
        t.push(r.row())?;
    }
    Ok(t)
}

pub(crate) fn region_mse(ds: &SignalDataset, pred: &[f64], region: Region) -> Option<f64> {
    let idx = ds.region_indices(region);
    if idx.is_empty() {
        return None;
    }
    Some(idx.iter().map(|&i| (pred[i] - ds.targets[i]).powi(2)).sum::<f64>() / idx.len() as f64)
}

/// Trains one cell, turning a training failure into a recorded row.
pub(crate) fn train_cell(
    input: &str,
    arch: Arch,
    setting: Setting,
    ds: &SignalDataset,
    cfg: &TrainConfig,
) -> Result<(RunSummary, Option<(Network, Metrics)>)> {
    let mut summary = RunSummary {
        input: input.to_string(),
        arch,
        setting,
        k: cfg.arch.family.hyperparameter(),
        epsilon: cfg.reg.epsilon,
        t_psnr: f64::NAN,
        l_psnr: None,
        r_psnr: None,
        l_mse: None,
        r_mse: None,
        mse: f64::NAN,
        error: None,
    };
    match train(ds, cfg) {
        Ok((net, m)) => {
            summary.t_psnr = m.t_psnr;
            summary.l_psnr = m.l_psnr;
            summary.r_psnr = m.r_psnr;
            summary.l_mse = region_mse(ds, &m.predictions, Region::Left);
            summary.r_mse = region_mse(ds, &m.predictions, Region::Right);
            summary.mse = m.mse;
            Ok((summary, Some((net, m))))
        }
        Err(e @ (Error::Diverged { .. } | Error::NonFinite { .. })) => {
            summary.error = Some(format!("{}: {e}", e.kind()));
            Ok((summary, None))
        }
        Err(e) => Err(e),
    }
}

/// File stem used to label an input path.
pub(crate) fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}
