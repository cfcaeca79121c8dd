//! Datasets, the optimizer loop and reconstruction metrics.

mod dataset;

pub use dataset::{
    make_sparse_dataset, make_uneven_image_dataset, synth_multiband_wave, Region, SignalDataset,
    MIN_TRAIN_POINTS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{init_network, ArchSpec, Network};
use crate::numeric::{Matrix, RandomSource};
use crate::regularization::{total_loss_grad, RegConfig};

/// Training sets up to this size are used whole every step.
pub const FULL_BATCH_LIMIT: usize = 4096;
pub const MINIBATCH: usize = 1024;
/// Reported PSNR for a perfect reconstruction.
pub const PSNR_CAP: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(1e-4)
    }
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => lr,
        }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        match self {
            Optimizer::Sgd { .. } => Optimizer::Sgd { lr },
            Optimizer::Adam { beta1, beta2, .. } => Optimizer::Adam { lr, beta1, beta2 },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lr() > 0.0 && self.lr().is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr())));
        }
        if let Optimizer::Adam { beta1, beta2, .. } = *self {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: ArchSpec,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub steps: usize,
    /// `None` picks the full training set up to [`FULL_BATCH_LIMIT`] points
    /// and [`MINIBATCH`]-sized shuffled batches above it.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub reg: RegConfig,
}

impl TrainConfig {
    pub fn validate(&self, dataset: &SignalDataset) -> Result<()> {
        self.arch.validate()?;
        self.optimizer.validate()?;
        self.reg.validate(self.arch.input_dim)?;
        if self.arch.input_dim != dataset.input_dim() || self.arch.output_dim != 1 {
            return Err(Error::Config(format!(
                "architecture maps {} → {} but the dataset is {} → 1",
                self.arch.input_dim,
                self.arch.output_dim,
                dataset.input_dim()
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    /// PSNR over the whole grid.
    pub t_psnr: f64,
    pub l_psnr: Option<f64>,
    pub r_psnr: Option<f64>,
    /// MSE over the whole grid.
    pub mse: f64,
    pub train_mse: f64,
    /// Total loss at every step, before the update.
    pub loss_history: Vec<f64>,
    /// Network output at every grid point.
    pub predictions: Vec<f64>,
}

/// `10·log10(1/MSE)` over `subset`, capped at [`PSNR_CAP`].
pub fn psnr(pred: &[f64], target: &[f64], subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Domain("PSNR over an empty subset".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    let mse = subset.iter().map(|&i| (pred[i] - target[i]).powi(2)).sum::<f64>() / subset.len() as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (-10.0 * mse.log10()).min(PSNR_CAP)
    }
}

/// Evaluates `net` on the whole grid of `dataset`.
pub fn evaluate(net: &Network, dataset: &SignalDataset, loss_history: Vec<f64>) -> Result<Metrics> {
    let pred = net.predict(&dataset.coords)?;
    let predictions: Vec<f64> = (0..pred.rows()).map(|r| pred.get(r, 0)).collect();
    let all: Vec<usize> = (0..dataset.len()).collect();
    let region = |r| -> Result<Option<f64>> {
        if dataset.regions.is_none() {
            return Ok(None);
        }
        let idx = dataset.region_indices(r);
        if idx.is_empty() {
            return Ok(None);
        }
        psnr(&predictions, &dataset.targets, &idx).map(Some)
    };
    let mse_over = |idx: &[usize]| {
        idx.iter()
            .map(|&i| (predictions[i] - dataset.targets[i]).powi(2))
            .sum::<f64>()
            / idx.len().max(1) as f64
    };
    Ok(Metrics {
        t_psnr: psnr(&predictions, &dataset.targets, &all)?,
        l_psnr: region(Region::Left)?,
        r_psnr: region(Region::Right)?,
        mse: mse_over(&all),
        train_mse: mse_over(&dataset.train_indices()),
        loss_history,
        predictions,
    })
}

struct OptimizerState {
    kind: Optimizer,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, net: &Network) -> Self {
        let zeros = || net.params().iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        OptimizerState {
            kind,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &[Matrix]) {
        self.t += 1;
        match self.kind {
            Optimizer::Sgd { lr } => {
                for (p, g) in net.params_mut().into_iter().zip(grads) {
                    for (w, d) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *w -= lr * d;
                    }
                }
            }
            Optimizer::Adam { lr, beta1, beta2 } => {
                const EPS: f64 = 1e-8;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((p, g), m), v) in net
                    .params_mut()
                    .into_iter()
                    .zip(grads)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    let it = p
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(m.as_mut_slice())
                        .zip(v.as_mut_slice());
                    for (((w, &d), m), v) in it {
                        *m = beta1 * *m + (1.0 - beta1) * d;
                        *v = beta2 * *v + (1.0 - beta2) * d * d;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                    }
                }
            }
        }
    }
}

/// Trains a freshly initialized network and reports metrics on the full grid.
///
/// The seed feeds three derived streams: initialization, batch order and
/// regularizer pairs. With `ε = 0` the pair stream is never read, so an
/// unregularized run does not depend on the regularizer settings.
pub fn train(dataset: &SignalDataset, cfg: &TrainConfig) -> Result<(Network, Metrics)> {
    cfg.validate(dataset)?;
    let root = RandomSource::new(cfg.seed);
    let net = init_network(&cfg.arch, &mut root.derive(0))?;
    train_from(net, dataset, cfg)
}

/// Continues training `net` under `cfg`.
pub fn train_from(mut net: Network, dataset: &SignalDataset, cfg: &TrainConfig) -> Result<(Network, Metrics)> {
    cfg.validate(dataset)?;
    let root = RandomSource::new(cfg.seed);
    let mut batch_rng = root.derive(1);
    let mut pair_rng = root.derive(2);

    let mut train_idx = dataset.train_indices();
    if train_idx.is_empty() {
        return Err(Error::Domain("empty training set".into()));
    }
    let batch = cfg.batch_size.unwrap_or(if train_idx.len() <= FULL_BATCH_LIMIT {
        train_idx.len()
    } else {
        MINIBATCH
    });
    let full_batch = batch >= train_idx.len();
    let (pool, _) = dataset.rows(&train_idx);
    let whole = full_batch.then(|| dataset.rows(&train_idx));

    let mut opt = OptimizerState::new(cfg.optimizer, &net);
    let mut history = Vec::with_capacity(cfg.steps);
    let mut cursor = train_idx.len();
    for step in 0..cfg.steps {
        let owned;
        let (x, y) = match &whole {
            Some((x, y)) => (x, y),
            None => {
                if cursor + batch > train_idx.len() {
                    batch_rng.shuffle(&mut train_idx);
                    cursor = 0;
                }
                owned = dataset.rows(&train_idx[cursor..cursor + batch]);
                cursor += batch;
                (&owned.0, &owned.1)
            }
        };
        let (loss, grads) = match total_loss_grad(&net, x, y, &cfg.reg, &mut pair_rng, Some(&pool)) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => return Err(Error::Diverged { step, loss: f64::NAN }),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || grads.params.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, loss });
        }
        history.push(loss);
        opt.step(&mut net, &grads.params);
    }
    let metrics = evaluate(&net, dataset, history)?;
    Ok((net, metrics))
}
