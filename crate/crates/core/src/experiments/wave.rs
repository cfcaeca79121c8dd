use std::path::Path;

use super::{summary_table, train_cell, Arch, ExperimentConfig, Outputs, RunSummary, Setting};
use crate::error::{Error, Result};
use crate::io::{read_wav, write_wav, Table};
use crate::numeric::{mix_seed, RandomSource};
use crate::spectrum::empirical::Samples;
use crate::training::{make_sparse_dataset, synth_multiband_wave, SignalDataset};

#[derive(Clone, Debug)]
pub struct WaveReport {
    pub dataset: SignalDataset,
    /// One row per setting, in `Setting::ALL` order.
    pub runs: Vec<RunSummary>,
}

impl WaveReport {
    pub fn run(&self, setting: Setting) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.setting == setting)
    }
}

/// Loads the configured WAV file or synthesizes the two-band wave.
pub(crate) fn wave_signal(cfg: &ExperimentConfig) -> Result<(String, Samples)> {
    let w = cfg.wave()?;
    match &w.input {
        Some(path) => Ok((super::stem(path), read_wav(path)?)),
        None => Ok((
            "synthetic".into(),
            synth_multiband_wave(w.n_samples, &w.low_freqs, &w.high_freqs, w.split)?,
        )),
    }
}

/// Trains the k↓, k↑ and regularized sine networks on a sparsely sampled
/// wave with a low-frequency left region and a high-frequency right region.
pub fn cmd_wave(cfg: &ExperimentConfig, out: &Path) -> Result<WaveReport> {
    let train = cfg.train()?;
    let w = cfg.wave()?;
    let sine = cfg
        .archs
        .sine
        .as_ref()
        .ok_or_else(|| Error::Config("wave-fig4 needs [archs.sine]".into()))?;
    let mut outputs = Outputs::create(out)?;

    let (name, signal) = wave_signal(cfg)?;
    let mut ds = make_sparse_dataset(&signal, w.rate, &mut RandomSource::new(mix_seed(cfg.seed, 0)))?;
    ds.label_regions(w.split)?;
    outputs.text("wave_dataset.csv", &ds.to_csv())?;

    let run_seed = mix_seed(cfg.seed, 1);
    let mut runs = Vec::new();
    let mut recon = Table::new(&["x", "target", "train", "region", "k_low", "k_high", "regularized"]);
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for setting in Setting::ALL {
        let tc = train.config(Arch::Sine, sine, setting, 1, run_seed);
        let (summary, fitted) = train_cell(&name, Arch::Sine, setting, &ds, &tc)?;
        match fitted {
            Some((net, m)) => {
                outputs.checkpoint(&format!("wave_{setting}.ckpt"), &net)?;
                write_wav(
                    &Samples::new(vec![m.predictions.len()], m.predictions.clone())?,
                    8000,
                    outputs.path(&format!("wave_{setting}.wav")),
                )?;
                columns.push(m.predictions);
            }
            None => columns.push(vec![f64::NAN; ds.len()]),
        }
        runs.push(summary);
    }
    let regions = ds.regions.clone().unwrap_or_default();
    for i in 0..ds.len() {
        recon.push(vec![
            ds.coords.get(i, 0).to_string(),
            ds.targets[i].to_string(),
            u8::from(ds.train_mask[i]).to_string(),
            regions.get(i).map_or(String::new(), |r| r.to_string()),
            columns[0][i].to_string(),
            columns[1][i].to_string(),
            columns[2][i].to_string(),
        ])?;
    }
    outputs.table("wave_reconstruction.csv", &recon)?;
    outputs.table("wave_metrics.csv", &summary_table(&runs)?)?;
    outputs.finish(cfg)?;
    Ok(WaveReport { dataset: ds, runs })
}
