//! Grid signals, sampling protocols and dataset snapshots.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{Matrix, RandomSource};
use crate::spectrum::empirical::{grid_coord, grid_coords, Samples};

/// Fewest training points a sparse protocol may produce.
pub const MIN_TRAIN_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Left,
    Right,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Left => "left",
            Region::Right => "right",
        })
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Region::Left),
            "right" => Ok(Region::Right),
            _ => Err(Error::Format(format!("unknown region {s:?}"))),
        }
    }
}

/// A signal on the full grid plus the subset used for training. The test set
/// is always the whole grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalDataset {
    /// Grid shape, `[n]` or `[rows, cols]`.
    pub shape: Vec<usize>,
    /// One row per grid point, in sample order.
    pub coords: Matrix,
    pub targets: Vec<f64>,
    pub train_mask: Vec<bool>,
    pub regions: Option<Vec<Region>>,
}

impl SignalDataset {
    /// Whole-grid dataset with every point in the training set.
    pub fn full(signal: &Samples) -> Result<Self> {
        if let Some(v) = signal.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite target {v}")));
        }
        Ok(SignalDataset {
            shape: signal.shape.clone(),
            coords: grid_coords(&signal.shape)?,
            targets: signal.values.clone(),
            train_mask: vec![true; signal.values.len()],
            regions: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.coords.cols()
    }

    /// Extent of the grid along coordinate component 0 (columns in 2D).
    fn axis0_len(&self) -> usize {
        *self.shape.last().expect("non-empty shape")
    }

    fn axis0_index(&self, i: usize) -> usize {
        i % self.axis0_len()
    }

    /// Labels points whose component-0 index is below `round(split · len)`
    /// as left, the rest as right.
    pub fn label_regions(&mut self, split: f64) -> Result<()> {
        if !(split > 0.0 && split < 1.0) {
            return Err(Error::Domain(format!("region split {split} outside (0, 1)")));
        }
        let cut = (split * self.axis0_len() as f64).round() as usize;
        self.regions = Some(
            (0..self.len())
                .map(|i| if self.axis0_index(i) < cut { Region::Left } else { Region::Right })
                .collect(),
        );
        Ok(())
    }

    pub fn train_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.train_mask[i]).collect()
    }

    pub fn region_indices(&self, region: Region) -> Vec<usize> {
        match &self.regions {
            Some(r) => (0..self.len()).filter(|&i| r[i] == region).collect(),
            None => Vec::new(),
        }
    }

    pub fn rows(&self, indices: &[usize]) -> (Matrix, Matrix) {
        let n = self.input_dim();
        let mut x = Matrix::zeros(indices.len(), n);
        let mut y = Matrix::zeros(indices.len(), 1);
        for (r, &i) in indices.iter().enumerate() {
            x.row_mut(r).copy_from_slice(self.coords.row(i));
            y.set(r, 0, self.targets[i]);
        }
        (x, y)
    }

    /// Snapshot rows `x0[,x1],target,mask,region`.
    pub fn to_csv(&self) -> String {
        let n = self.input_dim();
        let mut out = String::new();
        for c in 0..n {
            out.push_str(&format!("x{c},"));
        }
        out.push_str("target,mask,region\n");
        for i in 0..self.len() {
            for c in 0..n {
                out.push_str(&format!("{},", self.coords.get(i, c)));
            }
            let region = self.regions.as_ref().map_or(String::new(), |r| r[i].to_string());
            out.push_str(&format!(
                "{},{},{}\n",
                self.targets[i],
                u8::from(self.train_mask[i]),
                region
            ));
        }
        out
    }

    /// Parses a snapshot written by [`SignalDataset::to_csv`] for a grid of
    /// the given shape.
    pub fn from_csv(text: &str, shape: &[usize]) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty snapshot".into()))?;
        let n = header.split(',').count().checked_sub(3).filter(|n| *n >= 1).ok_or_else(|| {
            Error::Format(format!("bad snapshot header {header:?}"))
        })?;
        let mut coords = Vec::new();
        let mut targets = Vec::new();
        let mut mask = Vec::new();
        let mut regions = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 3 {
                return Err(Error::Format(format!("line {}: {} fields", lineno + 2, fields.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))
            };
            for f in &fields[..n] {
                coords.push(num(f)?);
            }
            targets.push(num(fields[n])?);
            mask.push(match fields[n + 1] {
                "1" => true,
                "0" => false,
                m => return Err(Error::Format(format!("bad mask {m:?}"))),
            });
            regions.push(match fields[n + 2] {
                "" => None,
                r => Some(r.parse::<Region>()?),
            });
        }
        let rows = targets.len();
        if shape.iter().product::<usize>() != rows {
            return Err(Error::Shape(format!("{rows} rows for grid {shape:?}")));
        }
        let regions = if regions.iter().all(Option::is_some) && rows > 0 {
            Some(regions.into_iter().map(Option::unwrap).collect())
        } else {
            None
        };
        Ok(SignalDataset {
            shape: shape.to_vec(),
            coords: Matrix::from_vec(rows, n, coords)?,
            targets,
            train_mask: mask,
            regions,
        })
    }
}

fn pick_without_replacement(pool: &[usize], count: usize, rng: &mut RandomSource) -> Vec<usize> {
    let mut pool = pool.to_vec();
    rng.shuffle(&mut pool);
    pool.truncate(count);
    pool
}

/// Left half fully sampled, right half sampled at `sparse_rate`.
pub fn make_uneven_image_dataset(
    image: &Samples,
    sparse_rate: f64,
    rng: &mut RandomSource,
) -> Result<SignalDataset> {
    if image.dims() != 2 {
        return Err(Error::Domain("uneven sampling needs a 2D image".into()));
    }
    if image.shape[1] < 2 {
        return Err(Error::Domain("image must be at least 2 columns wide".into()));
    }
    if !(sparse_rate > 0.0 && sparse_rate <= 1.0) {
        return Err(Error::Domain(format!("sampling rate {sparse_rate} outside (0, 1]")));
    }
    let mut ds = SignalDataset::full(image)?;
    ds.label_regions(0.5)?;
    let right = ds.region_indices(Region::Right);
    let keep = (sparse_rate * right.len() as f64).round() as usize;
    for &i in &right {
        ds.train_mask[i] = false;
    }
    for i in pick_without_replacement(&right, keep, rng) {
        ds.train_mask[i] = true;
    }
    Ok(ds)
}

/// Uniform subsample of `round(rate · N)` grid points for training.
pub fn make_sparse_dataset(signal: &Samples, rate: f64, rng: &mut RandomSource) -> Result<SignalDataset> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Domain(format!("sampling rate {rate} outside (0, 1)")));
    }
    let mut ds = SignalDataset::full(signal)?;
    let keep = (rate * ds.len() as f64).round() as usize;
    if keep < MIN_TRAIN_POINTS {
        return Err(Error::Domain(format!(
            "rate {rate} leaves {keep} training points; at least {MIN_TRAIN_POINTS} are needed"
        )));
    }
    let all: Vec<usize> = (0..ds.len()).collect();
    ds.train_mask = vec![false; ds.len()];
    for i in pick_without_replacement(&all, keep, rng) {
        ds.train_mask[i] = true;
    }
    Ok(ds)
}

/// 1D wave: sum of `low_freqs` sinusoids left of `region_split`, `high_freqs`
/// to the right, scaled so the peak magnitude is 1. Frequencies are in cycles
/// per unit coordinate.
pub fn synth_multiband_wave(
    n_samples: usize,
    low_freqs: &[f64],
    high_freqs: &[f64],
    region_split: f64,
) -> Result<Samples> {
    if low_freqs.is_empty() || high_freqs.is_empty() {
        return Err(Error::Domain("frequency lists must be nonempty".into()));
    }
    if !(region_split > 0.0 && region_split < 1.0) {
        return Err(Error::Domain(format!("region split {region_split} outside (0, 1)")));
    }
    // bin k sits at k/2 cycles per unit, so Nyquist is n/4
    let nyquist = n_samples as f64 / 4.0;
    if let Some(f) = low_freqs.iter().chain(high_freqs).find(|f| !(f.abs() < nyquist)) {
        return Err(Error::Domain(format!("frequency {f} at or above Nyquist {nyquist}")));
    }
    let cut = (region_split * n_samples as f64).round() as usize;
    let mut values: Vec<f64> = (0..n_samples)
        .map(|i| {
            let x = grid_coord(i, n_samples);
            let freqs = if i < cut { low_freqs } else { high_freqs };
            freqs.iter().map(|f| (2.0 * PI * f * x).sin()).sum()
        })
        .collect();
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut values {
            *v /= peak;
        }
    }
    Samples::new(vec![n_samples], values)
}
