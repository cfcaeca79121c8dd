use std::path::Path;

use super::{stem, summary_table, train_cell, Arch, ExperimentConfig, Outputs, RunSummary, Setting};
use crate::error::Result;
use crate::io::{read_image, write_png, Table};
use crate::numeric::{mix_seed, RandomSource};
use crate::spectrum::empirical::Samples;
use crate::training::{make_sparse_dataset, make_uneven_image_dataset, SignalDataset};

#[derive(Clone, Debug)]
pub struct UnevenReport {
    pub runs: Vec<RunSummary>,
}

impl UnevenReport {
    pub fn run(&self, input: &str, arch: Arch, setting: Setting) -> Option<&RunSummary> {
        self.runs
            .iter()
            .find(|r| r.input == input && r.arch == arch && r.setting == setting)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSummary {
    pub arch: Arch,
    pub images: usize,
    pub unregularized: f64,
    pub regularized: f64,
}

#[derive(Clone, Debug)]
pub struct SparseReport {
    pub runs: Vec<RunSummary>,
    pub summary: Vec<SparseSummary>,
}

fn save_reconstruction(
    outputs: &mut Outputs,
    name: &str,
    ds: &SignalDataset,
    predictions: &[f64],
) -> Result<()> {
    let img = Samples::new(ds.shape.clone(), predictions.to_vec())?;
    write_png(&img, outputs.path(name))
}

/// Per image, architecture and setting: left half dense, right half sparse.
pub fn cmd_image_uneven(cfg: &ExperimentConfig, out: &Path) -> Result<UnevenReport> {
    let train = cfg.train()?;
    let images = cfg.images()?;
    let mut outputs = Outputs::create(out)?;
    let mut runs = Vec::new();
    for (i, path) in images.paths.iter().enumerate() {
        let name = stem(path);
        let img = read_image(path)?;
        let mask_seed = mix_seed(cfg.seed, i as u64);
        let ds = make_uneven_image_dataset(&img, images.rate, &mut RandomSource::new(mask_seed))?;
        for (a, (arch, settings)) in cfg.archs.active().into_iter().enumerate() {
            let cell = mix_seed(cfg.seed, 1000 + (i * Arch::ALL.len() + a) as u64);
            for setting in Setting::ALL {
                let tc = train.config(arch, settings, setting, 2, cell);
                let (summary, fitted) = train_cell(&name, arch, setting, &ds, &tc)?;
                if let Some((net, m)) = fitted {
                    let tag = format!("uneven_{name}_{arch}_{setting}");
                    outputs.checkpoint(&format!("{tag}.ckpt"), &net)?;
                    save_reconstruction(&mut outputs, &format!("{tag}.png"), &ds, &m.predictions)?;
                }
                runs.push(summary);
            }
        }
    }
    outputs.table("table1.csv", &summary_table(&runs)?)?;
    outputs.finish(cfg)?;
    Ok(UnevenReport { runs })
}

/// Per image and architecture: the high-bandwidth setting with and without
/// the penalty, on a uniform sparse sample. Both share initialization and
/// batch seeds, so `ε = 0` reproduces the unregularized run exactly.
pub fn cmd_image_sparse(cfg: &ExperimentConfig, out: &Path) -> Result<SparseReport> {
    let train = cfg.train()?;
    let images = cfg.images()?;
    let mut outputs = Outputs::create(out)?;
    let mut runs = Vec::new();
    for (i, path) in images.paths.iter().enumerate() {
        let name = stem(path);
        let img = read_image(path)?;
        let mask_seed = mix_seed(cfg.seed, i as u64);
        let ds = make_sparse_dataset(&img, images.rate, &mut RandomSource::new(mask_seed))?;
        for (a, (arch, settings)) in cfg.archs.active().into_iter().enumerate() {
            let cell = mix_seed(cfg.seed, 1000 + (i * Arch::ALL.len() + a) as u64);
            for setting in [Setting::High, Setting::Regularized] {
                let tc = train.config(arch, settings, setting, 2, cell);
                let (summary, fitted) = train_cell(&name, arch, setting, &ds, &tc)?;
                if let Some((net, m)) = fitted {
                    let tag = format!("sparse_{name}_{arch}_{setting}");
                    outputs.checkpoint(&format!("{tag}.ckpt"), &net)?;
                    save_reconstruction(&mut outputs, &format!("{tag}.png"), &ds, &m.predictions)?;
                }
                runs.push(summary);
            }
        }
    }

    let mut summary = Vec::new();
    let mut table = Table::new(&["arch", "images", "psnr_unregularized", "psnr_regularized", "gain"]);
    for (arch, _) in cfg.archs.active() {
        let mean = |setting| {
            let v: Vec<f64> = runs
                .iter()
                .filter(|r| r.arch == arch && r.setting == setting)
                .map(|r| r.t_psnr)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let s = SparseSummary {
            arch,
            images: images.paths.len(),
            unregularized: mean(Setting::High),
            regularized: mean(Setting::Regularized),
        };
        table.push(vec![
            arch.to_string(),
            s.images.to_string(),
            s.unregularized.to_string(),
            s.regularized.to_string(),
            (s.regularized - s.unregularized).to_string(),
        ])?;
        summary.push(s);
    }
    outputs.table("table2_runs.csv", &summary_table(&runs)?)?;
    outputs.table("table2.csv", &table)?;
    outputs.finish(cfg)?;
    Ok(SparseReport { runs, summary })
}
