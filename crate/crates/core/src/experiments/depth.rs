use std::path::Path;

use super::wave::wave_signal;
use super::{ExperimentConfig, Outputs};
use crate::error::Result;
use crate::io::{write_heatmap_png, Table};
use crate::models::{Network, Tap};
use crate::numeric::{mix_seed, RandomSource};
use crate::regularization::feature_jacobian;
use crate::spectrum::empirical::{dft, energy_summary, sample_grid, Samples};
use crate::training::{make_sparse_dataset, train};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    Depth,
    Hyperparameter,
}

impl Sweep {
    fn name(self) -> &'static str {
        match self {
            Sweep::Depth => "depth",
            Sweep::Hyperparameter => "hyperparameter",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthRun {
    pub sweep: Sweep,
    pub depth: usize,
    pub k: f64,
    /// Non-DC spectral energy below the cutoff, as a fraction.
    pub low_fraction: f64,
    /// Smallest penultimate-feature Jacobian norm over the grid.
    pub min_kappa: f64,
    pub t_psnr: f64,
    /// `(frequency, magnitude)` for non-negative frequencies.
    pub spectrum: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct DepthReport {
    pub runs: Vec<DepthRun>,
}

impl DepthReport {
    pub fn series(&self, sweep: Sweep) -> Vec<&DepthRun> {
        self.runs.iter().filter(|r| r.sweep == sweep).collect()
    }

    pub fn low_fractions(&self, sweep: Sweep) -> Vec<f64> {
        self.series(sweep).iter().map(|r| r.low_fraction).collect()
    }
}

/// Number of adjacent pairs where a sequence expected to decrease does not.
pub fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] >= w[0]).count()
}

fn min_kappa(net: &Network, n: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for i in 0..n {
        let x = crate::spectrum::empirical::grid_coord(i, n);
        let j = feature_jacobian(net, &[x], 1e-4, Tap::Penultimate)?;
        best = best.min(j.frobenius_sq().sqrt());
    }
    Ok(best)
}

/// Trains the depth sweep at a fixed hyperparameter and the hyperparameter
/// sweep at a fixed depth on a sparsely sampled wave, and records the output
/// spectrum of every run.
pub fn cmd_spectrum_depth(cfg: &ExperimentConfig, out: &Path) -> Result<DepthReport> {
    let base = cfg.train()?;
    let d = cfg.depth()?;
    let w = cfg.wave()?;
    let lr = cfg.archs.get(d.arch).and_then(|s| s.lr);
    let mut outputs = Outputs::create(out)?;

    let (_, signal) = wave_signal(cfg)?;
    let n = signal.values.len();
    let ds = make_sparse_dataset(&signal, w.rate, &mut RandomSource::new(mix_seed(cfg.seed, 0)))?;

    let mut cells: Vec<(Sweep, usize, f64)> =
        d.depths.iter().map(|&depth| (Sweep::Depth, depth, d.depth_k)).collect();
    cells.extend(d.ks.iter().map(|&k| (Sweep::Hyperparameter, d.k_depth, k)));

    let mut runs = Vec::new();
    let mut spectra = Table::new(&["sweep", "depth", "k", "frequency", "magnitude"]);
    let mut summary = Table::new(&["sweep", "depth", "k", "low_fraction", "min_kappa", "t_psnr"]);
    for (idx, (sweep, depth, k)) in cells.into_iter().enumerate() {
        let mut settings = base.clone();
        settings.depth = depth;
        let tc = settings.config_with(d.arch, k, 0.0, lr, 1, mix_seed(cfg.seed, 100 + idx as u64));
        let (net, m) = train(&ds, &tc)?;
        let spec = dft(&sample_grid(&net, &[n])?)?;
        let low_fraction = energy_summary(&spec, d.cutoff_fraction * spec.nyquist())?.low_fraction;
        let half = spec.half_spectrum()?;
        let run = DepthRun {
            sweep,
            depth,
            k,
            low_fraction,
            min_kappa: min_kappa(&net, n)?,
            t_psnr: m.t_psnr,
            spectrum: half,
        };
        for (f, mag) in &run.spectrum {
            spectra.push(vec![
                sweep.name().into(),
                depth.to_string(),
                k.to_string(),
                f.to_string(),
                mag.to_string(),
            ])?;
        }
        summary.push(vec![
            sweep.name().into(),
            depth.to_string(),
            k.to_string(),
            run.low_fraction.to_string(),
            run.min_kappa.to_string(),
            run.t_psnr.to_string(),
        ])?;
        outputs.checkpoint(&format!("depth_{}_{idx}.ckpt", sweep.name()), &net)?;
        runs.push(run);
    }
    outputs.table("depth_spectra.csv", &spectra)?;
    outputs.table("depth_low_fraction.csv", &summary)?;

    // one heatmap row per run, log magnitude over non-negative frequencies
    let width = runs[0].spectrum.len();
    let values: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.spectrum.iter().map(|(_, m)| (m + 1e-12).log10()))
        .collect();
    write_heatmap_png(
        &Samples::new(vec![runs.len(), width], values)?,
        outputs.path("depth_heatmap.png"),
    )?;
    outputs.finish(cfg)?;
    Ok(DepthReport { runs })
}
