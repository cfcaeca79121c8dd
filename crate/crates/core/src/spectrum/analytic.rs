//! Closed-form spectra of single-hidden-layer coordinate-MLPs.
//!
//! The Fourier transform of `x ↦ α(w·x)` is supported on the line spanned by
//! `w` and equals `(2π)^{n/2} / |w| · α̂((w/|w|²)·k)` along it. A line
//! spectrum is therefore kept as a unit direction plus a 1D envelope of the
//! signed radial frequency `k_r` (cycles per unit), never as a raster.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::models::{ActivationKind, RffEmbedding, ShallowView};
use crate::numeric::matrix::norm;

/// Envelope of a line spectrum along its direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Envelope {
    /// `amplitude · exp(-(k_r / width)²)`
    Gaussian { amplitude: f64, width: f64 },
    /// Point masses at `k_r = ±location`.
    DeltaPair { location: f64, mass: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineSpectrum {
    /// Unit vector along `w1`.
    pub direction: Vec<f64>,
    pub envelope: Envelope,
}

impl LineSpectrum {
    /// Envelope value at radial frequency `k_r`. Delta pairs evaluate to 0
    /// everywhere; use [`LineSpectrum::sample`] or [`LineSpectrum::frequency_vectors`].
    pub fn value(&self, k_r: f64) -> f64 {
        match self.envelope {
            Envelope::Gaussian { amplitude, width } => amplitude * (-(k_r / width).powi(2)).exp(),
            Envelope::DeltaPair { .. } => 0.0,
        }
    }

    /// Samples the envelope on a uniform 1D grid. A delta pair deposits
    /// `mass / spacing` in the grid cell nearest each of its locations.
    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        match self.envelope {
            Envelope::Gaussian { .. } => grid.iter().map(|&k| self.value(k)).collect(),
            Envelope::DeltaPair { location, mass } => {
                let mut out = vec![0.0; grid.len()];
                if grid.len() < 2 {
                    return out;
                }
                let spacing = (grid[1] - grid[0]).abs();
                for target in [location, -location] {
                    let (idx, dist) = grid
                        .iter()
                        .enumerate()
                        .map(|(i, &k)| (i, (k - target).abs()))
                        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
                    if dist <= spacing / 2.0 + 1e-12 {
                        out[idx] += mass / spacing;
                    }
                }
                out
            }
        }
    }

    /// Locations of a delta pair as frequency vectors `±location · direction`.
    pub fn frequency_vectors(&self) -> Option<[Vec<f64>; 2]> {
        match self.envelope {
            Envelope::DeltaPair { location, .. } => {
                let plus: Vec<f64> = self.direction.iter().map(|d| d * location).collect();
                let minus = plus.iter().map(|v| -v).collect();
                Some([plus, minus])
            }
            Envelope::Gaussian { .. } => None,
        }
    }

    /// `∫ envelope(k_r)² dk_r` over `lo ≤ |k_r| < hi` (both signs). A delta
    /// pair contributes `mass²` per enclosed location.
    pub fn band_energy(&self, lo: f64, hi: f64) -> f64 {
        match self.envelope {
            Envelope::Gaussian { amplitude, width } => {
                // amplitude² ∫ exp(-2k²/width²) = amplitude² · width·√(π/2)/2 · [erf]
                let c = amplitude * amplitude * width * (PI / 2.0).sqrt() / 2.0;
                let s = 2f64.sqrt() / width;
                let hi_term = if hi.is_finite() { erf(s * hi) } else { 1.0 };
                2.0 * c * (hi_term - erf(s * lo))
            }
            Envelope::DeltaPair { location, mass } => {
                if location.abs() >= lo && location.abs() < hi {
                    2.0 * mass * mass
                } else {
                    0.0
                }
            }
        }
    }

    pub fn total_energy(&self) -> f64 {
        self.band_energy(0.0, f64::INFINITY)
    }

    /// CSV rows `u_0,…,u_{n-1},k_r,envelope` over the given radial grid.
    pub fn to_csv(&self, grid: &[f64]) -> String {
        let mut out = String::new();
        for i in 0..self.direction.len() {
            out.push_str(&format!("u{i},"));
        }
        out.push_str("k_r,envelope\n");
        let dir: Vec<String> = self.direction.iter().map(|d| d.to_string()).collect();
        let dir = dir.join(",");
        for (k, v) in grid.iter().zip(self.sample(grid)) {
            out.push_str(&format!("{dir},{k},{v}\n"));
        }
        out
    }
}

fn unit_direction(w1: &[f64], index: usize) -> Result<(Vec<f64>, f64)> {
    let len = norm(w1);
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::DegenerateNeuron { index });
    }
    Ok((w1.iter().map(|v| v / len).collect(), len))
}

/// Spectrum of `w2 · exp(-(w1·x)² / 2σ²)`.
pub fn gaussian_line_spectrum(w1: &[f64], w2: f64, sigma: f64) -> Result<LineSpectrum> {
    neuron_gaussian(w1, w2, sigma, 0)
}

fn neuron_gaussian(w1: &[f64], w2: f64, sigma: f64, index: usize) -> Result<LineSpectrum> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let (direction, len) = unit_direction(w1, index)?;
    let n = w1.len() as f64;
    let amplitude = w2 * (2.0 * PI).powf((n + 1.0) / 2.0) * sigma / len;
    let width = len / (2f64.sqrt() * PI * sigma);
    Ok(LineSpectrum {
        direction,
        envelope: Envelope::Gaussian { amplitude, width },
    })
}

/// Spectrum of `w2 · sin(2πa (w1·x))`: a delta pair at `±a·w1`.
pub fn sine_line_spectrum(w1: &[f64], w2: f64, a: f64) -> Result<LineSpectrum> {
    neuron_sine(w1, w2, a, 0)
}

fn neuron_sine(w1: &[f64], w2: f64, a: f64, index: usize) -> Result<LineSpectrum> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    let (direction, len) = unit_direction(w1, index)?;
    let n = w1.len() as f64;
    Ok(LineSpectrum {
        direction,
        envelope: Envelope::DeltaPair {
            location: a * len,
            mass: w2 * (2.0 * PI).powf(n / 2.0) / (2.0 * len),
        },
    })
}

/// One line spectrum per hidden neuron, in neuron order. Biases only shift
/// phase and DC and are ignored.
pub fn shallow_spectrum(view: &ShallowView) -> Result<Vec<LineSpectrum>> {
    if view.embedding.is_some() {
        return Err(Error::Unsupported(
            "embedded networks have lattice spectra; use rff_lattice".into(),
        ));
    }
    (0..view.neurons())
        .map(|i| {
            let w1 = view.first.row(i);
            let w2 = view.second[i];
            match view.activation {
                ActivationKind::Gaussian { sigma } => neuron_gaussian(w1, w2, sigma, i),
                ActivationKind::Sine { a } => neuron_sine(w1, w2, a, i),
                ActivationKind::Relu => Err(Error::Unsupported(
                    "ReLU without embedding has no line spectrum; use rff_lattice for RFF networks"
                        .into(),
                )),
            }
        })
        .collect()
}

/// Energy split of a set of line spectra at radial cutoff `k_c`.
pub fn lines_low_fraction(lines: &[LineSpectrum], k_c: f64) -> f64 {
    let low: f64 = lines.iter().map(|l| l.band_energy(0.0, k_c)).sum();
    let total: f64 = lines.iter().map(LineSpectrum::total_energy).sum();
    if total > 0.0 {
        low / total
    } else {
        0.0
    }
}

/// Frequencies reachable by a polynomially approximated shallow RFF network.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyLattice {
    /// Integer coefficient vectors `c`, one per point.
    pub coefficients: Vec<Vec<i64>>,
    /// `Σ_j c_j l_j / 2π`, in cycles per unit coordinate.
    pub points: Vec<Vec<f64>>,
    /// The `l_j` (angular frequency, radians per unit).
    pub generators: Vec<Vec<f64>>,
    pub max_degree: usize,
}

impl FrequencyLattice {
    pub fn contains_coefficients(&self, c: &[i64]) -> bool {
        self.coefficients.iter().any(|v| v == c)
    }

    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, Vec::len);
        let mut out = String::new();
        for j in 0..self.generators.len() {
            out.push_str(&format!("c{j},"));
        }
        let cols: Vec<String> = (0..n).map(|i| format!("k{i}")).collect();
        out.push_str(&cols.join(","));
        out.push('\n');
        for (c, p) in self.coefficients.iter().zip(&self.points) {
            let cs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            let ps: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{}\n", cs.join(","), ps.join(",")));
        }
        out
    }
}

pub const LATTICE_MAX_FEATURES: usize = 4;
pub const LATTICE_MAX_DEGREE: usize = 8;

/// Enumerates the RFF frequency lattice for polynomial degree bound `m`.
///
/// A coefficient `c_j = (2a_{2j-1} - k_{2j-1}) + (2a_{2j} - k_{2j})` with
/// `0 ≤ a_t ≤ k_t` is reachable at cost `k_{2j-1} + k_{2j}` exactly when
/// `|c_j| ≤ cost` and `c_j ≡ cost (mod 2)`, so under a total budget
/// `Σ k_t ≤ m - 2` the reachable set is `{c : Σ|c_j| ≤ m - 2}`.
pub fn rff_lattice(emb: &RffEmbedding, m: usize) -> Result<FrequencyLattice> {
    if m < 5 {
        return Err(Error::Domain(format!("degree bound m = {m} must be at least 5")));
    }
    if m > LATTICE_MAX_DEGREE || emb.features() > LATTICE_MAX_FEATURES {
        return Err(Error::Domain(format!(
            "lattice enumeration is capped at D ≤ {LATTICE_MAX_FEATURES}, m ≤ {LATTICE_MAX_DEGREE}"
        )));
    }
    let d = emb.features();
    let budget = (m - 2) as i64;
    let generators: Vec<Vec<f64>> = (0..d).map(|j| emb.column(j)).collect();

    let mut coefficient_sets = vec![Vec::<i64>::new()];
    for _ in 0..d {
        let mut next = Vec::new();
        for prefix in &coefficient_sets {
            let used: i64 = prefix.iter().map(|c| c.abs()).sum();
            let left = budget - used;
            for c in -left..=left {
                let mut v = prefix.clone();
                v.push(c);
                next.push(v);
            }
        }
        coefficient_sets = next;
    }

    let n = emb.input_dim();
    let mut seen = BTreeSet::new();
    let mut coefficients = Vec::new();
    let mut points = Vec::new();
    for c in coefficient_sets {
        let point: Vec<f64> = (0..n)
            .map(|i| {
                c.iter()
                    .zip(&generators)
                    .map(|(&cj, l)| cj as f64 * l[i])
                    .sum::<f64>()
                    / (2.0 * PI)
            })
            .collect();
        let key: Vec<i64> = point.iter().map(|v| (v * 1e9).round() as i64).collect();
        if seen.insert(key) {
            coefficients.push(c);
            points.push(point);
        }
    }
    Ok(FrequencyLattice {
        coefficients,
        points,
        generators,
        max_degree: m - 2,
    })
}

/// Both sides of `max|f′| ≤ 2π Σ_k |k f̂(k)|` for a signal sampled on the
/// periodic grid over `[-1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeBound {
    /// Max over grid points of the trigonometric interpolant's `|f′|`.
    pub lhs: f64,
    /// `2π Σ |k| |c_k|` with `c_k` the Fourier-series coefficients.
    pub rhs: f64,
}

pub fn derivative_spectrum_bound(samples: &[f64]) -> Result<DerivativeBound> {
    let n = samples.len();
    if n < 16 {
        return Err(Error::Resolution(format!(
            "{n} samples; at least 16 are needed"
        )));
    }
    let mut coeffs: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut coeffs);
    for c in &mut coeffs {
        *c /= n as f64;
    }

    let extent = super::empirical::DOMAIN_EXTENT;
    let mut rhs = 0.0;
    let mut deriv: Vec<Complex<f64>> = Vec::with_capacity(n);
    for (k, c) in coeffs.iter().enumerate() {
        let freq = super::empirical::signed_bin(k, n) as f64 / extent;
        rhs += 2.0 * PI * freq.abs() * c.norm();
        // the Nyquist bin of an even grid has no well-defined derivative
        let nyquist = n % 2 == 0 && k == n / 2;
        deriv.push(if nyquist {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(0.0, 2.0 * PI * freq) * c
        });
    }
    planner.plan_fft_inverse(n).process(&mut deriv);
    let lhs = deriv.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(DerivativeBound { lhs, rhs })
}
