use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ArchSpec, Family, Tap};
use crate::regularization::{AnchorSampling, RegConfig};
use crate::training::{Optimizer, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    ToyFig2,
    WaveFig4,
    ImageUneven,
    ImageSparse,
    SpectrumDepth,
    DerivativeMaps,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::ToyFig2,
        ExperimentId::WaveFig4,
        ExperimentId::ImageUneven,
        ExperimentId::ImageSparse,
        ExperimentId::SpectrumDepth,
        ExperimentId::DerivativeMaps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::ToyFig2 => "toy-fig2",
            ExperimentId::WaveFig4 => "wave-fig4",
            ExperimentId::ImageUneven => "image-uneven",
            ExperimentId::ImageSparse => "image-sparse",
            ExperimentId::SpectrumDepth => "spectrum-depth",
            ExperimentId::DerivativeMaps => "derivative-maps",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            ExperimentId::ToyFig2 => include_str!("../../configs/toy-fig2.toml"),
            ExperimentId::WaveFig4 => include_str!("../../configs/wave-fig4.toml"),
            ExperimentId::ImageUneven => include_str!("../../configs/image-uneven.toml"),
            ExperimentId::ImageSparse => include_str!("../../configs/image-sparse.toml"),
            ExperimentId::SpectrumDepth => include_str!("../../configs/spectrum-depth.toml"),
            ExperimentId::DerivativeMaps => include_str!("../../configs/derivative-maps.toml"),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gaussian,
    Sine,
    Rff,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::Gaussian, Arch::Sine, Arch::Rff];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Gaussian => "gaussian",
            Arch::Sine => "sine",
            Arch::Rff => "rff",
        }
    }

    /// Family with hyperparameter `k` (σ, a, or embedding σ).
    pub fn family(self, k: f64, rff_features: usize) -> Family {
        match self {
            Arch::Gaussian => Family::Gaussian { sigma: k },
            Arch::Sine => Family::Sine { a: k },
            Arch::Rff => Family::Rff {
                sigma: k,
                features: rff_features,
            },
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }
}

/// The three training settings compared per architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    /// Low-bandwidth hyperparameter, no penalty.
    Low,
    /// High-bandwidth hyperparameter, no penalty.
    High,
    /// High-bandwidth hyperparameter with the smoothness penalty.
    Regularized,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Low, Setting::High, Setting::Regularized];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Low => "k_low",
            Setting::High => "k_high",
            Setting::Regularized => "regularized",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSettings {
    pub k_low: f64,
    pub k_high: f64,
    pub epsilon: f64,
    /// Overrides the shared learning rate for this architecture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<ArchSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sine: Option<ArchSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rff: Option<ArchSettings>,
}

impl Archs {
    pub fn get(&self, arch: Arch) -> Option<&ArchSettings> {
        match arch {
            Arch::Gaussian => self.gaussian.as_ref(),
            Arch::Sine => self.sine.as_ref(),
            Arch::Rff => self.rff.as_ref(),
        }
    }

    fn get_mut(&mut self, arch: Arch) -> &mut Option<ArchSettings> {
        match arch {
            Arch::Gaussian => &mut self.gaussian,
            Arch::Sine => &mut self.sine,
            Arch::Rff => &mut self.rff,
        }
    }

    /// Configured architectures in canonical order.
    pub fn active(&self) -> Vec<(Arch, &ArchSettings)> {
        Arch::ALL
            .into_iter()
            .filter_map(|a| self.get(a).map(|s| (a, s)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub width: usize,
    pub depth: usize,
    pub steps: usize,
    pub lr: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    pub xi_stddev: f64,
    pub n_pairs: usize,
    #[serde(default)]
    pub tap: Tap,
    #[serde(default)]
    pub anchors: AnchorSampling,
    #[serde(default = "default_rff_features")]
    pub rff_features: usize,
}

fn default_rff_features() -> usize {
    64
}

impl TrainSettings {
    /// Training configuration for one run.
    pub fn config(
        &self,
        arch: Arch,
        settings: &ArchSettings,
        setting: Setting,
        input_dim: usize,
        seed: u64,
    ) -> TrainConfig {
        let k = match setting {
            Setting::Low => settings.k_low,
            Setting::High | Setting::Regularized => settings.k_high,
        };
        let epsilon = if setting == Setting::Regularized {
            settings.epsilon
        } else {
            0.0
        };
        self.config_with(arch, k, epsilon, settings.lr, input_dim, seed)
    }

    pub fn config_with(
        &self,
        arch: Arch,
        k: f64,
        epsilon: f64,
        lr: Option<f64>,
        input_dim: usize,
        seed: u64,
    ) -> TrainConfig {
        let lr = lr.unwrap_or(self.lr);
        TrainConfig {
            arch: ArchSpec {
                family: arch.family(k, self.rff_features),
                input_dim,
                width: self.width,
                depth: self.depth,
                output_dim: 1,
            },
            optimizer: match self.optimizer {
                OptimizerKind::Adam => Optimizer::adam(lr),
                OptimizerKind::Sgd => Optimizer::Sgd { lr },
            },
            steps: self.steps,
            batch_size: self.batch_size,
            seed,
            reg: RegConfig {
                epsilon,
                xi_stddevs: vec![self.xi_stddev; input_dim],
                n_pairs: self.n_pairs,
                tap: self.tap,
                anchors: self.anchors,
            },
        }
    }
}

/// Analytic Gaussian toy network with two neurons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySettings {
    /// DFT grid resolution per axis.
    pub grid: usize,
    /// Radial cutoff `k_c` in cycles per unit separating low from high.
    pub cutoff: f64,
    /// `|w|` of both neurons in the σ sweep.
    pub w_norm: f64,
    /// σ sweep, strictly decreasing. The last entry is the small σ reused by
    /// the other two panels.
    pub sigmas: Vec<f64>,
    /// `|w|` of both neurons in the shrunken-weight panel.
    pub small_w_norm: f64,
    /// `|w0|, |w1|` of the tuned panel.
    pub tuned_w_norms: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSettings {
    /// Mono WAV to fit instead of the synthetic wave.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub n_samples: usize,
    pub low_freqs: Vec<f64>,
    pub high_freqs: Vec<f64>,
    pub split: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSettings {
    pub paths: Vec<PathBuf>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSettings {
    pub arch: Arch,
    pub depths: Vec<usize>,
    /// Hyperparameter used throughout the depth sweep.
    pub depth_k: f64,
    /// Hyperparameter sweep, ordered from low to high bandwidth.
    pub ks: Vec<f64>,
    /// Depth used throughout the hyperparameter sweep.
    pub k_depth: usize,
    /// Low/high split as a fraction of Nyquist.
    pub cutoff_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeSettings {
    pub image: PathBuf,
    pub rate: f64,
    pub arch: Arch,
    /// Evaluation grid is this many times finer than the image.
    pub oversample: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSettings>,
    #[serde(default)]
    pub archs: Archs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToySettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<WaveSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<ImageSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<DerivativeSettings>,
}

/// Command-line overrides, applied on top of a config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub arch: Option<Arch>,
    pub depth: Option<usize>,
    pub sigma: Option<f64>,
    pub a: Option<f64>,
    pub eps: Option<f64>,
    pub rate: Option<f64>,
    pub steps: Option<usize>,
}

fn missing(section: &str, id: ExperimentId) -> Error {
    Error::Config(format!("experiment {id} needs a [{section}] section"))
}

impl ExperimentConfig {
    /// Shipped default configuration of an experiment.
    pub fn builtin(id: ExperimentId) -> Result<Self> {
        Self::parse(id.builtin())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn train(&self) -> Result<&TrainSettings> {
        self.train.as_ref().ok_or_else(|| missing("train", self.experiment))
    }

    pub fn toy(&self) -> Result<&ToySettings> {
        self.toy.as_ref().ok_or_else(|| missing("toy", self.experiment))
    }

    pub fn wave(&self) -> Result<&WaveSettings> {
        self.wave.as_ref().ok_or_else(|| missing("wave", self.experiment))
    }

    pub fn images(&self) -> Result<&ImageSettings> {
        self.images.as_ref().ok_or_else(|| missing("images", self.experiment))
    }

    pub fn depth(&self) -> Result<&DepthSettings> {
        self.depth.as_ref().ok_or_else(|| missing("depth", self.experiment))
    }

    pub fn derivative(&self) -> Result<&DerivativeSettings> {
        self.derivative
            .as_ref()
            .ok_or_else(|| missing("derivative", self.experiment))
    }

    /// Applies CLI overrides.
    ///
    /// `sigma` replaces the high-bandwidth hyperparameter of the Gaussian and
    /// RFF settings and `a` that of the sine settings; in the depth sweep they
    /// replace the hyperparameter sweep by a single value. `depth` likewise
    /// collapses the depth sweep. `rate` sets whichever sampling rate the
    /// experiment uses.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(arch) = o.arch {
            for other in Arch::ALL.into_iter().filter(|&a| a != arch) {
                *self.archs.get_mut(other) = None;
            }
            if self.archs.get(arch).is_none() && self.depth.is_none() && self.derivative.is_none() {
                return Err(Error::Config(format!("{arch} is not configured for {}", self.experiment)));
            }
            if let Some(d) = &mut self.depth {
                d.arch = arch;
            }
            if let Some(d) = &mut self.derivative {
                d.arch = arch;
            }
        }
        if let Some(t) = &mut self.train {
            if let Some(depth) = o.depth {
                t.depth = depth;
            }
            if let Some(steps) = o.steps {
                t.steps = steps;
            }
        }
        for (arch, k) in [(Arch::Gaussian, o.sigma), (Arch::Rff, o.sigma), (Arch::Sine, o.a)] {
            if let (Some(k), Some(s)) = (k, self.archs.get_mut(arch).as_mut()) {
                s.k_high = k;
            }
        }
        if let Some(eps) = o.eps {
            for arch in Arch::ALL {
                if let Some(s) = self.archs.get_mut(arch).as_mut() {
                    s.epsilon = eps;
                }
            }
        }
        if let Some(d) = &mut self.depth {
            if let Some(depth) = o.depth {
                d.depths = vec![depth];
                d.k_depth = depth;
            }
            let k = match d.arch {
                Arch::Sine => o.a,
                Arch::Gaussian | Arch::Rff => o.sigma,
            };
            if let Some(k) = k {
                d.ks = vec![k];
                d.depth_k = k;
            }
        }
        if let Some(rate) = o.rate {
            if let Some(w) = &mut self.wave {
                w.rate = rate;
            }
            if let Some(i) = &mut self.images {
                i.rate = rate;
            }
            if let Some(d) = &mut self.derivative {
                d.rate = rate;
            }
        }
        self.validate()
    }

    /// Makes relative input paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(w) = &mut self.wave {
            if let Some(p) = &mut w.input {
                fix(p);
            }
        }
        if let Some(i) = &mut self.images {
            i.paths.iter_mut().for_each(fix);
        }
        if let Some(d) = &mut self.derivative {
            fix(&mut d.image);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.experiment;
        let needs_train = id != ExperimentId::ToyFig2;
        if needs_train {
            let t = self.train()?;
            if t.steps == 0 || t.width == 0 || t.depth < 2 {
                return Err(Error::Config("train needs steps ≥ 1, width ≥ 1, depth ≥ 2".into()));
            }
        }
        let needs_archs = matches!(
            id,
            ExperimentId::WaveFig4 | ExperimentId::ImageUneven | ExperimentId::ImageSparse | ExperimentId::DerivativeMaps
        );
        if needs_archs && self.archs.active().is_empty() {
            return Err(Error::Config(format!("experiment {id} needs at least one [archs.*] section")));
        }
        let rate_ok = |name: &str, r: f64| {
            if r > 0.0 && r <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {r} must lie in (0, 1]")))
            }
        };
        if let Some(w) = &self.wave {
            rate_ok("wave.rate", w.rate)?;
        }
        if let Some(i) = &self.images {
            rate_ok("images.rate", i.rate)?;
        }
        if let Some(d) = &self.derivative {
            rate_ok("derivative.rate", d.rate)?;
        }
        match id {
            ExperimentId::ToyFig2 => {
                let t = self.toy()?;
                if t.sigmas.len() < 2 || t.sigmas.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::Config("toy.sigmas must hold ≥ 2 strictly decreasing values".into()));
                }
            }
            ExperimentId::WaveFig4 => {
                self.wave()?;
                if self.archs.sine.is_none() {
                    return Err(Error::Config("wave-fig4 uses the sine architecture".into()));
                }
            }
            ExperimentId::ImageUneven | ExperimentId::ImageSparse => {
                if self.images()?.paths.is_empty() {
                    return Err(Error::Config("images.paths is empty".into()));
                }
            }
            ExperimentId::SpectrumDepth => {
                self.wave()?;
                let d = self.depth()?;
                if d.depths.is_empty() || d.ks.is_empty() {
                    return Err(Error::Config("depth sweeps must be nonempty".into()));
                }
            }
            ExperimentId::DerivativeMaps => {
                let d = self.derivative()?;
                if self.archs.get(d.arch).is_none() {
                    return Err(Error::Config(format!("no [archs.{}] section", d.arch)));
                }
                if d.oversample == 0 {
                    return Err(Error::Config("oversample must be ≥ 1".into()));
                }
            }
        }
        Ok(())
    }
}
