//! Discrete spectra of networks sampled on a regular grid.
//!
//! Conventions shared by the whole crate:
//! * the domain is `[-1, 1)ⁿ` sampled at `x_i = -1 + 2i/N` (periodic grid);
//! * in 2D, coordinate component 0 runs along columns and component 1 along
//!   rows, samples are stored row-major;
//! * the transform is `X_k = N^{-1/2} Σ x_j e^{-2πi jk/N}` per axis (unitary),
//!   and bin `k` maps to `k / 2` cycles per unit coordinate.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::models::Network;
use crate::numeric::Matrix;

/// Length of the sampled domain along each axis.
pub const DOMAIN_EXTENT: f64 = 2.0;

const MIN_RESOLUTION: usize = 16;

/// Function values on the regular grid over `[-1, 1)ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    /// `[n]` in 1D, `[rows, cols]` in 2D.
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Samples {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::Unsupported(format!("{}-D grids", shape.len())));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::Shape(format!(
                "{} values for grid {:?}",
                values.len(),
                shape
            )));
        }
        Ok(Samples { shape, values })
    }

    /// Samples `f` on the grid. `f` receives `[x]` or `[x, y]`.
    pub fn from_fn(shape: &[usize], f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let coords = grid_coords(shape)?;
        let values = (0..coords.rows()).map(|r| f(coords.row(r))).collect();
        Samples::new(shape.to_vec(), values)
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }
}

/// Grid coordinate `-1 + 2i/N`.
#[inline]
pub fn grid_coord(i: usize, n: usize) -> f64 {
    -1.0 + DOMAIN_EXTENT * i as f64 / n as f64
}

/// All grid coordinates as rows, in sample order.
pub fn grid_coords(shape: &[usize]) -> Result<Matrix> {
    match *shape {
        [n] => Matrix::from_vec(n, 1, (0..n).map(|i| grid_coord(i, n)).collect()),
        [rows, cols] => {
            let mut data = Vec::with_capacity(rows * cols * 2);
            for r in 0..rows {
                for c in 0..cols {
                    data.push(grid_coord(c, cols));
                    data.push(grid_coord(r, rows));
                }
            }
            Matrix::from_vec(rows * cols, 2, data)
        }
        _ => Err(Error::Unsupported(format!("{}-D grids", shape.len()))),
    }
}

/// Evaluates output channel 0 of `net` on the grid.
pub fn sample_grid(net: &Network, resolution: &[usize]) -> Result<Samples> {
    if resolution.len() > 2 || resolution.is_empty() {
        return Err(Error::Unsupported(format!("{}-D grids", resolution.len())));
    }
    if resolution.len() != net.input_dim() {
        return Err(Error::Shape(format!(
            "{}-D grid for a network with {} inputs",
            resolution.len(),
            net.input_dim()
        )));
    }
    if let Some(&n) = resolution.iter().find(|&&n| n < MIN_RESOLUTION) {
        return Err(Error::Resolution(format!(
            "grid resolution {n} is below {MIN_RESOLUTION}"
        )));
    }
    let coords = grid_coords(resolution)?;
    let mut values = Vec::with_capacity(coords.rows());
    const CHUNK: usize = 4096;
    let dim = coords.cols();
    for start in (0..coords.rows()).step_by(CHUNK) {
        let end = (start + CHUNK).min(coords.rows());
        let block = Matrix::from_vec(
            end - start,
            dim,
            coords.as_slice()[start * dim..end * dim].to_vec(),
        )?;
        let out = net.predict(&block)?;
        values.extend((0..out.rows()).map(|r| out.get(r, 0)));
    }
    Samples::new(resolution.to_vec(), values)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// Magnitude spectrum on the DFT bin lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumGrid {
    pub shape: Vec<usize>,
    /// `|X_k|` in natural (unshifted) DFT order, row-major, DC included.
    pub magnitudes: Vec<f64>,
    /// `|X_0|`, also present at index 0 of `magnitudes`.
    pub dc: f64,
}

/// Signed bin index of position `k` on an axis of length `n`.
#[inline]
pub fn signed_bin(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Frequency in cycles per unit coordinate of position `k` on an axis of length `n`.
#[inline]
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    signed_bin(k, n) as f64 / DOMAIN_EXTENT
}

impl SpectrumGrid {
    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    /// Highest representable frequency along the coarsest axis.
    pub fn nyquist(&self) -> f64 {
        let n = *self.shape.iter().min().expect("non-empty shape");
        n as f64 / (2.0 * DOMAIN_EXTENT)
    }

    /// Spacing between adjacent bins in cycles per unit.
    pub fn bin_spacing(&self) -> f64 {
        1.0 / DOMAIN_EXTENT
    }

    /// Frequency vector `[fx, fy]` of flat index `idx` (`fy = 0` in 1D).
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        match *self.shape.as_slice() {
            [n] => [bin_frequency(idx, n), 0.0],
            [rows, cols] => [bin_frequency(idx % cols, cols), bin_frequency(idx / cols, rows)],
            _ => unreachable!("validated at construction"),
        }
    }

    /// Iterates `(frequency vector, magnitude)` over every bin.
    pub fn bins(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.magnitudes
            .iter()
            .enumerate()
            .map(move |(i, &m)| (self.frequency(i), m))
    }

    pub fn total_energy(&self) -> f64 {
        self.magnitudes.iter().map(|m| m * m).sum()
    }

    pub fn non_dc_energy(&self) -> f64 {
        self.total_energy() - self.dc * self.dc
    }

    /// Non-negative half of a 1D spectrum as `(frequency, magnitude)`.
    pub fn half_spectrum(&self) -> Result<Vec<(f64, f64)>> {
        let [n] = *self.shape.as_slice() else {
            return Err(Error::Unsupported("half spectrum of a 2-D grid".into()));
        };
        Ok((0..=n / 2)
            .map(|k| (k as f64 / DOMAIN_EXTENT, self.magnitudes[k]))
            .collect())
    }

    /// Flat index of the largest non-DC magnitude.
    pub fn peak_bin(&self) -> usize {
        self.magnitudes
            .iter()
            .enumerate()
            .skip(1)
            .fold((0, f64::NEG_INFINITY), |best, (i, &m)| {
                if m > best.1 {
                    (i, m)
                } else {
                    best
                }
            })
            .0
    }

    /// CSV with columns `fx,magnitude` (1D) or `fx,fy,magnitude` (2D).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.dims() == 1 {
            out.push_str("fx,magnitude\n");
            for (f, m) in self.bins() {
                out.push_str(&format!("{},{}\n", f[0], m));
            }
        } else {
            out.push_str("fx,fy,magnitude\n");
            for (f, m) in self.bins() {
                out.push_str(&format!("{},{},{}\n", f[0], f[1], m));
            }
        }
        out
    }

    /// 2D magnitudes with DC moved to the centre, rows top to bottom.
    pub fn shifted(&self) -> Matrix {
        match *self.shape.as_slice() {
            [n] => Matrix::from_fn(1, n, |_, c| self.magnitudes[(c + n.div_ceil(2)) % n]),
            [rows, cols] => Matrix::from_fn(rows, cols, |r, c| {
                let sr = (r + rows.div_ceil(2)) % rows;
                let sc = (c + cols.div_ceil(2)) % cols;
                self.magnitudes[sr * cols + sc]
            }),
            _ => unreachable!(),
        }
    }
}

pub fn dft(samples: &Samples) -> Result<SpectrumGrid> {
    dft_windowed(samples, Window::None)
}

/// Unitary DFT magnitudes with an optional separable window.
pub fn dft_windowed(samples: &Samples, window: Window) -> Result<SpectrumGrid> {
    let shape = samples.shape.clone();
    let mut data: Vec<Complex<f64>> = samples.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    match *shape.as_slice() {
        [n] => {
            apply_window(&mut data, 1, n, window);
            planner.plan_fft_forward(n).process(&mut data);
        }
        [rows, cols] => {
            if window == Window::Hann {
                let wr = hann(rows);
                let wc = hann(cols);
                for r in 0..rows {
                    for c in 0..cols {
                        data[r * cols + c] *= wr[r] * wc[c];
                    }
                }
            }
            let row_fft = planner.plan_fft_forward(cols);
            for row in data.chunks_mut(cols) {
                row_fft.process(row);
            }
            let col_fft = planner.plan_fft_forward(rows);
            let mut column = vec![Complex::new(0.0, 0.0); rows];
            for c in 0..cols {
                for r in 0..rows {
                    column[r] = data[r * cols + c];
                }
                col_fft.process(&mut column);
                for r in 0..rows {
                    data[r * cols + c] = column[r];
                }
            }
        }
        _ => return Err(Error::Unsupported(format!("{}-D grids", shape.len()))),
    }
    let scale = 1.0 / (samples.values.len() as f64).sqrt();
    let magnitudes: Vec<f64> = data.iter().map(|z| z.norm() * scale).collect();
    let dc = magnitudes[0];
    Ok(SpectrumGrid {
        shape,
        magnitudes,
        dc,
    })
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn apply_window(data: &mut [Complex<f64>], rows: usize, cols: usize, window: Window) {
    if window == Window::Hann {
        let w = hann(cols);
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] *= w[c];
            }
        }
    }
}

/// Low/high split of the non-DC spectral energy at a radial cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySummary {
    pub low_fraction: f64,
    pub high_fraction: f64,
    pub total_energy: f64,
    pub cutoff: f64,
}

/// Bins with radial frequency strictly below `cutoff` count as low.
pub fn energy_summary(spec: &SpectrumGrid, cutoff: f64) -> Result<EnergySummary> {
    if !(cutoff > 0.0 && cutoff < spec.nyquist()) {
        return Err(Error::Domain(format!(
            "cutoff {cutoff} outside (0, {})",
            spec.nyquist()
        )));
    }
    let (mut low, mut high) = (0.0, 0.0);
    for (i, (f, m)) in spec.bins().enumerate() {
        if i == 0 {
            continue;
        }
        let e = m * m;
        if f[0].hypot(f[1]) < cutoff {
            low += e;
        } else {
            high += e;
        }
    }
    let total = low + high;
    let low_fraction = if total > 0.0 { low / total } else { 0.0 };
    Ok(EnergySummary {
        low_fraction,
        high_fraction: if total > 0.0 { 1.0 - low_fraction } else { 0.0 },
        total_energy: total,
        cutoff,
    })
}

/// Envelope of a 2D spectrum along a line through the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct LineProjection {
    pub direction: [f64; 2],
    /// Radial bin centres (cycles per unit), width 1.
    pub radii: Vec<f64>,
    /// Max magnitude inside the cone per radial bin; `None` if no bin fell
    /// inside the cone at that radius.
    pub values: Vec<Option<f64>>,
    /// Exact radius of the bin that supplied each value.
    pub peak_radius: Vec<Option<f64>>,
}

impl LineProjection {
    /// `(radius, value)` pairs for bins that are present, skipping the DC bin.
    pub fn present(&self) -> Vec<(f64, f64)> {
        self.peak_radius
            .iter()
            .zip(&self.values)
            .skip(1)
            .filter_map(|(r, v)| Some(((*r)?, (*v)?)))
            .collect()
    }
}

/// Max-magnitude envelope along `±direction` within a cone of the given
/// half-angle, one value per unit-width radial bin.
pub fn project_onto_line(
    spec: &SpectrumGrid,
    direction: [f64; 2],
    cone_half_angle_deg: f64,
) -> Result<LineProjection> {
    if spec.dims() != 2 {
        return Err(Error::Unsupported("line projection needs a 2-D spectrum".into()));
    }
    let len = direction[0].hypot(direction[1]);
    if (len - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("direction must be a unit vector, |u| = {len}")));
    }
    let cos_limit = (cone_half_angle_deg.to_radians()).cos();
    let max_radius = spec
        .bins()
        .map(|(f, _)| f[0].hypot(f[1]))
        .fold(0.0, f64::max);
    let nbins = max_radius.round() as usize + 1;
    let mut values: Vec<Option<f64>> = vec![None; nbins];
    let mut peak_radius: Vec<Option<f64>> = vec![None; nbins];
    for (f, m) in spec.bins() {
        let r = f[0].hypot(f[1]);
        let inside = if r == 0.0 {
            true
        } else {
            let c = (f[0] * direction[0] + f[1] * direction[1]).abs() / r;
            c >= cos_limit - 1e-12
        };
        if !inside {
            continue;
        }
        let b = r.round() as usize;
        if values[b].map_or(true, |v| m > v) {
            values[b] = Some(m);
            peak_radius[b] = Some(r);
        }
    }
    Ok(LineProjection {
        direction,
        radii: (0..nbins).map(|b| b as f64).collect(),
        values,
        peak_radius,
    })
}
