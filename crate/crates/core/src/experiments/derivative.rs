use std::path::Path;

use super::{stem, train_cell, ExperimentConfig, Outputs, RunSummary, Setting};
use crate::error::{Error, Result};
use crate::io::{read_image, write_heatmap_png, Table};
use crate::numeric::{mix_seed, RandomSource};
use crate::spectrum::empirical::{sample_grid, Samples, DOMAIN_EXTENT};
use crate::training::make_sparse_dataset;

/// `|∇f|` of a 2D grid signal over `[-1, 1)²` by finite differences:
/// central in the interior, one-sided on the border.
pub fn gradient_magnitude(s: &Samples) -> Result<Samples> {
    let [rows, cols] = s.shape[..] else {
        return Err(Error::Shape(format!("gradient map needs a 2D grid, got {:?}", s.shape)));
    };
    if rows < 2 || cols < 2 {
        return Err(Error::Resolution("gradient map needs at least 2×2 samples".into()));
    }
    let (hx, hy) = (DOMAIN_EXTENT / cols as f64, DOMAIN_EXTENT / rows as f64);
    let at = |r: usize, c: usize| s.values[r * cols + c];
    let diff = |lo: f64, hi: f64, steps: usize, h: f64| (hi - lo) / (steps as f64 * h);
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (c0, c1) = (c.saturating_sub(1), (c + 1).min(cols - 1));
            let (r0, r1) = (r.saturating_sub(1), (r + 1).min(rows - 1));
            let gx = diff(at(r, c0), at(r, c1), c1 - c0, hx);
            let gy = diff(at(r0, c), at(r1, c), r1 - r0, hy);
            out.push(gx.hypot(gy));
        }
    }
    Samples::new(vec![rows, cols], out)
}

#[derive(Clone, Debug)]
pub struct DerivativeRun {
    pub summary: RunSummary,
    /// Mean `|∇f|` over the oversampled grid.
    pub mean_gradient: f64,
}

#[derive(Clone, Debug)]
pub struct DerivativeReport {
    pub runs: Vec<DerivativeRun>,
}

impl DerivativeReport {
    pub fn mean_gradient(&self, setting: Setting) -> Option<f64> {
        self.runs
            .iter()
            .find(|r| r.summary.setting == setting)
            .map(|r| r.mean_gradient)
    }
}

/// Trains the three settings on a sparsely sampled image and maps `|∇f|` of
/// each fit on a finer grid.
pub fn cmd_derivative_maps(cfg: &ExperimentConfig, out: &Path) -> Result<DerivativeReport> {
    let train = cfg.train()?;
    let d = cfg.derivative()?;
    let settings = cfg
        .archs
        .get(d.arch)
        .ok_or_else(|| Error::Config(format!("no [archs.{}] section", d.arch)))?;
    let mut outputs = Outputs::create(out)?;

    let name = stem(&d.image);
    let img = read_image(&d.image)?;
    let ds = make_sparse_dataset(&img, d.rate, &mut RandomSource::new(mix_seed(cfg.seed, 0)))?;
    let fine = [img.shape[0] * d.oversample, img.shape[1] * d.oversample];
    let cell = mix_seed(cfg.seed, 1);

    let mut runs = Vec::new();
    let mut table = Table::new(&["setting", "k", "epsilon", "depth", "mean_gradient", "t_psnr"]);
    for setting in Setting::ALL {
        let tc = train.config(d.arch, settings, setting, 2, cell);
        let (summary, fitted) = train_cell(&name, d.arch, setting, &ds, &tc)?;
        let mean_gradient = match fitted {
            Some((net, _)) => {
                let map = gradient_magnitude(&sample_grid(&net, &fine)?)?;
                write_heatmap_png(&map, outputs.path(&format!("gradient_{setting}.png")))?;
                outputs.checkpoint(&format!("derivative_{setting}.ckpt"), &net)?;
                map.values.iter().sum::<f64>() / map.values.len() as f64
            }
            None => f64::NAN,
        };
        table.push(vec![
            setting.to_string(),
            summary.k.to_string(),
            summary.epsilon.to_string(),
            train.depth.to_string(),
            mean_gradient.to_string(),
            summary.t_psnr.to_string(),
        ])?;
        runs.push(DerivativeRun {
            summary,
            mean_gradient,
        });
    }
    outputs.table("derivative_complexity.csv", &table)?;
    outputs.finish(cfg)?;
    Ok(DerivativeReport { runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_a_plane() {
        let s = Samples::from_fn(&[16, 20], |x| 3.0 * x[0] - 4.0 * x[1]).unwrap();
        let g = gradient_magnitude(&s).unwrap();
        assert!(g.values.iter().all(|v| (v - 5.0).abs() < 1e-9));
    }
}
