//! Stochastic smoothness penalty on tapped features and the Jacobian analysis
//! behind it.
//!
//! The penalty is `L_r = mean_p ‖g(x̄_p) − g(x̄_p + ξ_p)‖ / ‖ξ_p‖` with `x̄`
//! drawn over the domain and `ξ ~ N(0, diag(s²))`. For small `ξ` each quotient
//! approaches `‖J ξ̂‖`, so the penalty acts on the spread of `JᵀJ` without
//! forming it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Network, Tap};
use crate::numeric::matrix::norm;
use crate::numeric::{Gradients, Matrix, RandomSource, Tape};

/// Perturbations shorter than this are redrawn.
const MIN_XI: f64 = 1e-12;

/// Where the pair anchors `x̄` come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorSampling {
    /// Uniform over `[-1, 1]ⁿ`.
    #[default]
    Uniform,
    /// Uniform over the training coordinates.
    Training,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegConfig {
    pub epsilon: f64,
    /// Per-axis standard deviations of `ξ`.
    pub xi_stddevs: Vec<f64>,
    pub n_pairs: usize,
    #[serde(default)]
    pub tap: Tap,
    #[serde(default)]
    pub anchors: AnchorSampling,
}

pub const DEFAULT_XI_STDDEV: f64 = 0.01;
pub const DEFAULT_PAIRS: usize = 256;

impl RegConfig {
    /// Defaults for an `input_dim`-dimensional domain.
    pub fn new(epsilon: f64, input_dim: usize) -> Self {
        RegConfig {
            epsilon,
            xi_stddevs: vec![DEFAULT_XI_STDDEV; input_dim],
            n_pairs: DEFAULT_PAIRS,
            tap: Tap::Penultimate,
            anchors: AnchorSampling::Uniform,
        }
    }

    /// Unregularized configuration.
    pub fn off(input_dim: usize) -> Self {
        Self::new(0.0, input_dim)
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be finite and ≥ 0, got {}", self.epsilon)));
        }
        if self.xi_stddevs.len() != input_dim {
            return Err(Error::Config(format!(
                "{} xi standard deviations for a {input_dim}-dimensional domain",
                self.xi_stddevs.len()
            )));
        }
        if let Some(s) = self.xi_stddevs.iter().find(|s| !(**s > 0.0 && **s <= 0.1)) {
            return Err(Error::Config(format!("xi standard deviation {s} outside (0, 0.1]")));
        }
        if self.n_pairs == 0 {
            return Err(Error::Config("n_pairs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One batch of sampled pairs.
#[derive(Clone, Debug)]
pub struct PairSample {
    pub anchors: Matrix,
    pub shifted: Matrix,
    /// `1 / ‖ξ_p‖`
    pub weights: Vec<f64>,
}

/// Draws `cfg.n_pairs` pairs. `pool` supplies anchors under
/// [`AnchorSampling::Training`].
pub fn sample_pairs(
    cfg: &RegConfig,
    input_dim: usize,
    rng: &mut RandomSource,
    pool: Option<&Matrix>,
) -> Result<PairSample> {
    cfg.validate(input_dim)?;
    let p = cfg.n_pairs;
    let mut anchors = Matrix::zeros(p, input_dim);
    let mut shifted = Matrix::zeros(p, input_dim);
    let mut weights = Vec::with_capacity(p);
    for r in 0..p {
        match (cfg.anchors, pool) {
            (AnchorSampling::Training, Some(pool)) if pool.rows() > 0 => {
                if pool.cols() != input_dim {
                    return Err(Error::Shape("anchor pool has the wrong dimension".into()));
                }
                let i = rng.below(pool.rows());
                anchors.row_mut(r).copy_from_slice(pool.row(i));
            }
            (AnchorSampling::Training, _) => {
                return Err(Error::Config("training anchors need a coordinate pool".into()))
            }
            (AnchorSampling::Uniform, _) => {
                for v in anchors.row_mut(r) {
                    *v = rng.uniform(-1.0, 1.0);
                }
            }
        }
        let xi = loop {
            let xi: Vec<f64> = cfg.xi_stddevs.iter().map(|s| s * rng.standard_normal()).collect();
            if norm(&xi) >= MIN_XI {
                break xi;
            }
        };
        weights.push(1.0 / norm(&xi));
        for (c, d) in xi.iter().enumerate() {
            shifted.set(r, c, anchors.get(r, c) + d);
        }
    }
    Ok(PairSample {
        anchors,
        shifted,
        weights,
    })
}

/// Penalty value on an already sampled set of pairs.
pub fn reg_loss_on(net: &Network, tap: Tap, pairs: &PairSample) -> Result<f64> {
    let a = net.forward_batch(&pairs.anchors)?;
    let b = net.forward_batch(&pairs.shifted)?;
    let (ga, gb) = (a.tap(tap)?, b.tap(tap)?);
    let total: f64 = pairs
        .weights
        .iter()
        .enumerate()
        .map(|(r, w)| {
            let d: Vec<f64> = ga.row(r).iter().zip(gb.row(r)).map(|(x, y)| x - y).collect();
            w * norm(&d)
        })
        .sum();
    Ok(total / pairs.weights.len() as f64)
}

/// Draws fresh pairs from `rng` and evaluates the penalty.
pub fn reg_loss(net: &Network, cfg: &RegConfig, rng: &mut RandomSource) -> Result<f64> {
    let pairs = sample_pairs(cfg, net.input_dim(), rng, None)?;
    reg_loss_on(net, cfg.tap, &pairs)
}

/// `MSE(batch) + ε·L_r`. Pairs are only drawn when `ε > 0`, so an
/// unregularized configuration leaves `rng` untouched.
pub fn total_loss(
    net: &Network,
    x: &Matrix,
    y: &Matrix,
    cfg: &RegConfig,
    rng: &mut RandomSource,
) -> Result<f64> {
    let mse = batch_mse(net, x, y)?;
    if cfg.epsilon == 0.0 {
        return Ok(mse);
    }
    let pairs = sample_pairs(cfg, net.input_dim(), rng, Some(x))?;
    Ok(mse + cfg.epsilon * reg_loss_on(net, cfg.tap, &pairs)?)
}

fn batch_mse(net: &Network, x: &Matrix, y: &Matrix) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::Domain("empty batch".into()));
    }
    let pred = net.predict(x)?;
    if pred.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "targets {:?} for predictions {:?}",
            y.shape(),
            pred.shape()
        )));
    }
    Ok(pred.sub(y)?.frobenius_sq() / pred.len() as f64)
}

/// Loss and parameter gradients of [`total_loss`], consuming `rng` the same
/// way. `pool` is the anchor pool for [`AnchorSampling::Training`]; it
/// defaults to `x`.
pub fn total_loss_grad(
    net: &Network,
    x: &Matrix,
    y: &Matrix,
    cfg: &RegConfig,
    rng: &mut RandomSource,
    pool: Option<&Matrix>,
) -> Result<(f64, Gradients)> {
    if x.rows() == 0 {
        return Err(Error::Domain("empty batch".into()));
    }
    let mut tape = Tape::new();
    let vars = net.register(&mut tape);
    let fwd = net.forward_tape(&mut tape, &vars, x)?;
    let target = tape.constant(y.clone());
    let mut loss = tape.mse(fwd.output, target)?;
    if cfg.epsilon > 0.0 {
        let pairs = sample_pairs(cfg, net.input_dim(), rng, Some(pool.unwrap_or(x)))?;
        let fa = net.forward_tape(&mut tape, &vars, &pairs.anchors)?;
        let fb = net.forward_tape(&mut tape, &vars, &pairs.shifted)?;
        let reg = tape.pair_norm_mean(fa.tap(cfg.tap)?, fb.tap(cfg.tap)?, pairs.weights)?;
        let reg = tape.scale(reg, cfg.epsilon);
        loss = tape.add(loss, reg)?;
    }
    let value = tape.scalar(loss)?;
    Ok((value, tape.backward(loss)?))
}

/// Central-difference Jacobian of the tapped features at `x`, `d × n`.
pub fn feature_jacobian(net: &Network, x: &[f64], step: f64, tap: Tap) -> Result<Matrix> {
    check_step(step)?;
    let n = x.len();
    if n != net.input_dim() {
        return Err(Error::Shape(format!("{n}-dimensional point for a {}-dimensional network", net.input_dim())));
    }
    let probes = Matrix::from_fn(2 * n, n, |r, c| {
        let axis = r / 2;
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        x[c] + if c == axis { sign * step } else { 0.0 }
    });
    let acts = net.forward_batch(&probes)?;
    let g = acts.tap(tap)?;
    let d = g.cols();
    Ok(Matrix::from_fn(d, n, |i, j| {
        (g.get(2 * j, i) - g.get(2 * j + 1, i)) / (2.0 * step)
    }))
}

fn check_step(step: f64) -> Result<()> {
    if !(1e-6..=1e-3).contains(&step) {
        return Err(Error::Domain(format!("finite-difference step {step} outside [1e-6, 1e-3]")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct JacobianAnalysis {
    /// Feature Jacobian, `d × n`.
    pub j: Matrix,
    /// `J Jᵀ`, `d × d`.
    pub a: Matrix,
    /// Nonzero spectrum of `A`, taken from the `n × n` Gram matrix `JᵀJ`,
    /// descending.
    pub eigenvalues: Vec<f64>,
    /// Input-space directions `u_k` (unit, orthogonal), paired with
    /// `eigenvalues`. Moving along `u_k` changes the features at rate `√λ_k`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub trace: f64,
}

pub fn jacobian_analysis(net: &Network, x: &[f64], step: f64, tap: Tap) -> Result<JacobianAnalysis> {
    let j = feature_jacobian(net, x, step, tap)?;
    let a = j.matmul_t(&j)?;
    let gram = j.t_matmul(&j)?;
    let n = gram.rows();
    let eig = DMatrix::from_row_slice(n, n, gram.as_slice())
        .try_symmetric_eigen(1e-14, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Ok(JacobianAnalysis {
        trace: a.trace(),
        j,
        a,
        eigenvalues,
        eigenvectors,
    })
}

/// `‖g(x + h·u) − g(x)‖ / h` for a unit direction `u`.
pub fn directional_quotient(net: &Network, x: &[f64], u: &[f64], probe: f64, tap: Tap) -> Result<f64> {
    let shifted: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + probe * b).collect();
    let pts = Matrix::from_rows(&[x.to_vec(), shifted])?;
    let acts = net.forward_batch(&pts)?;
    let g = acts.tap(tap)?;
    let d: Vec<f64> = g.row(0).iter().zip(g.row(1)).map(|(a, b)| a - b).collect();
    Ok(norm(&d) / (probe * norm(u)))
}

/// Mean of `trace(JJᵀ)` over the rows of `points`.
pub fn trace_penalty(net: &Network, points: &Matrix, step: f64, tap: Tap) -> Result<f64> {
    if points.rows() == 0 {
        return Err(Error::Domain("no points".into()));
    }
    let mut total = 0.0;
    for r in 0..points.rows() {
        total += feature_jacobian(net, points.row(r), step, tap)?.frobenius_sq();
    }
    Ok(total / points.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_network, ActivationKind, ArchSpec, Family, Layer, Linear};

    fn gaussian_net(n: usize, width: usize, depth: usize, sigma: f64, seed: u64) -> Network {
        init_network(
            &ArchSpec {
                family: Family::Gaussian { sigma },
                input_dim: n,
                width,
                depth,
                output_dim: 1,
            },
            &mut RandomSource::new(seed),
        )
        .unwrap()
    }

    /// One ReLU layer `relu(Mx + 5)`, linear on the domain.
    fn linear_features(m: Matrix) -> Network {
        let d = m.rows();
        Network::new(
            None,
            vec![Layer {
                bias: Matrix::filled(1, d, 5.0),
                weight: m,
                activation: ActivationKind::Relu,
            }],
            Linear {
                weight: Matrix::filled(1, d, 1.0),
                bias: Matrix::zeros(1, 1),
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_features_give_zero() {
        let mut net = gaussian_net(2, 8, 2, 0.5, 1);
        net.hidden[0].weight = Matrix::zeros(8, 2);
        let cfg = RegConfig::new(1.0, 2);
        assert_eq!(reg_loss(&net, &cfg, &mut RandomSource::new(3)).unwrap(), 0.0);
        let pts = Matrix::from_rows(&[vec![0.1, 0.2], vec![-0.5, 0.9]]).unwrap();
        assert_eq!(trace_penalty(&net, &pts, 1e-4, Tap::Penultimate).unwrap(), 0.0);
    }

    #[test]
    fn linear_features_give_slope() {
        for c in [-3.0, 0.5, 2.0] {
            let net = linear_features(Matrix::from_vec(1, 1, vec![c]).unwrap());
            let cfg = RegConfig::new(1.0, 1);
            let v = reg_loss(&net, &cfg, &mut RandomSource::new(9)).unwrap();
            assert!((v - c.abs()).abs() < 1e-9, "{v} vs {c}");
            let pts = Matrix::from_rows(&[vec![0.3], vec![-0.7]]).unwrap();
            let t = trace_penalty(&net, &pts, 1e-4, Tap::Penultimate).unwrap();
            assert!((t - c * c).abs() < 1e-8);
        }
    }

    #[test]
    fn matches_dense_quadrature() {
        let net = gaussian_net(1, 16, 3, 0.3, 4);
        let cfg = RegConfig {
            n_pairs: 1024,
            ..RegConfig::new(1.0, 1)
        };
        let mc = reg_loss(&net, &cfg, &mut RandomSource::new(21)).unwrap();

        // midpoint rule over x̄ ∈ [-1, 1] and ξ ∈ [-6s, 6s]; the even ξ grid skips 0
        let s = DEFAULT_XI_STDDEV;
        let (nx, nxi) = (2000, 40);
        let hx = 2.0 / nx as f64;
        let hxi = 12.0 * s / nxi as f64;
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for i in 0..nx {
            let x = -1.0 + (i as f64 + 0.5) * hx;
            for k in 0..nxi {
                let xi = -6.0 * s + (k as f64 + 0.5) * hxi;
                let density = (-(xi / s).powi(2) / 2.0).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
                pts.push((x, xi));
                w.push(density * hxi * hx / 2.0);
            }
        }
        let a = Matrix::from_vec(pts.len(), 1, pts.iter().map(|p| p.0).collect()).unwrap();
        let b = Matrix::from_vec(pts.len(), 1, pts.iter().map(|p| p.0 + p.1).collect()).unwrap();
        let ga = net.forward_batch(&a).unwrap().penultimate().clone();
        let gb = net.forward_batch(&b).unwrap().penultimate().clone();
        let mut dense = 0.0;
        let mut mass = 0.0;
        for (r, (p, wt)) in pts.iter().zip(&w).enumerate() {
            let d: Vec<f64> = ga.row(r).iter().zip(gb.row(r)).map(|(x, y)| x - y).collect();
            dense += wt * norm(&d) / p.1.abs();
            mass += wt;
        }
        dense /= mass;
        assert!((mc - dense).abs() < 0.05 * dense, "mc {mc} dense {dense}");
    }

    #[test]
    fn invariant_under_orthogonal_feature_maps() {
        let net = gaussian_net(2, 6, 2, 0.4, 5);
        let q = DMatrix::<f64>::from_fn(6, 6, |i, j| ((i * 7 + j * 3) as f64).sin()).qr().q();
        // the output tap of `rotated` is Q·g, that of `ident` is g itself
        let mut rotated = net.clone();
        let mut out_w = Matrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                out_w.set(i, j, q[(i, j)]);
            }
        }
        rotated.output = Linear {
            weight: out_w,
            bias: Matrix::zeros(1, 6),
        };
        let mut ident = net.clone();
        ident.output = Linear {
            weight: Matrix::identity(6),
            bias: Matrix::zeros(1, 6),
        };
        let cfg = RegConfig {
            tap: Tap::Output,
            ..RegConfig::new(1.0, 2)
        };
        let base = reg_loss(&ident, &cfg, &mut RandomSource::new(8)).unwrap();
        let rot = reg_loss(&rotated, &cfg, &mut RandomSource::new(8)).unwrap();
        assert!((base - rot).abs() < 1e-12 * base.max(1.0));
        let pen = reg_loss(&net, &RegConfig::new(1.0, 2), &mut RandomSource::new(8)).unwrap();
        assert!((base - pen).abs() < 1e-12 * base.max(1.0));
    }

    #[test]
    fn total_loss_recomputes() {
        let net = gaussian_net(2, 8, 3, 0.5, 6);
        let x = Matrix::from_fn(10, 2, |r, c| ((r * 2 + c) as f64 * 0.37).sin());
        let y = Matrix::from_fn(10, 1, |r, _| (r as f64 * 0.2).cos());
        let cfg = RegConfig::new(0.05, 2);
        let total = total_loss(&net, &x, &y, &cfg, &mut RandomSource::new(2)).unwrap();
        let mse = batch_mse(&net, &x, &y).unwrap();
        let mut rng = RandomSource::new(2);
        let pairs = sample_pairs(&cfg, 2, &mut rng, Some(&x)).unwrap();
        let reg = reg_loss_on(&net, Tap::Penultimate, &pairs).unwrap();
        assert!((total - (mse + 0.05 * reg)).abs() < 1e-12);

        let plain = total_loss(&net, &x, &y, &RegConfig::off(2), &mut RandomSource::new(2)).unwrap();
        assert_eq!(plain, mse);
        let (tape_value, _) =
            total_loss_grad(&net, &x, &y, &cfg, &mut RandomSource::new(2), None).unwrap();
        assert!((tape_value - total).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = gaussian_net(2, 5, 3, 0.6, 11);
        let x = Matrix::from_fn(7, 2, |r, c| ((r * 3 + c) as f64 * 0.41).cos());
        let y = Matrix::from_fn(7, 1, |r, _| (r as f64 * 0.3).sin());
        let cfg = RegConfig {
            n_pairs: 16,
            xi_stddevs: vec![0.05, 0.05],
            ..RegConfig::new(0.3, 2)
        };
        let (_, grads) = total_loss_grad(&net, &x, &y, &cfg, &mut RandomSource::new(4), None).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for p in 0..net.params().len() {
            for k in 0..net.params()[p].len() {
                let eval = |delta: f64| {
                    let mut m = net.clone();
                    m.params_mut()[p].as_mut_slice()[k] += delta;
                    total_loss(&m, &x, &y, &cfg, &mut RandomSource::new(4)).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grads.params[p].as_slice()[k];
                worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-3));
            }
        }
        assert!(worst < 1e-4, "relative error {worst}");
    }

    #[test]
    fn jacobian_of_linear_features() {
        let m = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![-1.5, 0.25]]).unwrap();
        let net = linear_features(m.clone());
        let an = jacobian_analysis(&net, &[0.2, -0.4], 1e-4, Tap::Penultimate).unwrap();
        assert!(an.j.max_abs_diff(&m) < 1e-8);
        assert!((an.trace - an.j.frobenius_sq()).abs() < 1e-10);
        let sum: f64 = an.eigenvalues.iter().sum();
        assert!((sum - an.trace).abs() < 1e-8 * an.trace);
        assert!(an.eigenvalues[0] >= an.eigenvalues[1]);
        let dot: f64 = an.eigenvectors[0].iter().zip(&an.eigenvectors[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-10);
    }

    #[test]
    fn eigen_limit() {
        let net = gaussian_net(2, 12, 3, 0.5, 13);
        let x = [0.3, -0.2];
        let an = jacobian_analysis(&net, &x, 1e-5, Tap::Penultimate).unwrap();
        assert!((an.trace - an.j.frobenius_sq()).abs() < 1e-10 * an.trace.max(1.0));
        for (lam, u) in an.eigenvalues.iter().zip(&an.eigenvectors) {
            let fine = directional_quotient(&net, &x, u, 1e-4, Tap::Penultimate).unwrap();
            let coarse = directional_quotient(&net, &x, u, 1e-3, Tap::Penultimate).unwrap();
            assert!((fine / lam.sqrt() - 1.0).abs() < 0.02, "{fine} vs {}", lam.sqrt());
            assert!((fine / coarse - 1.0).abs() < 0.05);
        }
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }

    #[test]
    fn trace_penalty_tracks_reg_loss() {
        let mut rng = RandomSource::new(30);
        let pts = Matrix::from_fn(64, 2, |_, _| rng.uniform(-1.0, 1.0));
        let (mut tr, mut rl) = (Vec::new(), Vec::new());
        for i in 0..20 {
            let sigma = 0.05 * 1.17f64.powi(i);
            let net = gaussian_net(2, 16, 2, sigma, 100 + i as u64);
            tr.push(trace_penalty(&net, &pts, 1e-4, Tap::Penultimate).unwrap());
            rl.push(reg_loss(&net, &RegConfig::new(1.0, 2), &mut RandomSource::new(1)).unwrap());
        }
        let (a, b) = (ranks(&tr), ranks(&rl));
        let n = a.len() as f64;
        let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let rho = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        assert!(rho > 0.9, "rank correlation {rho}");
    }

    #[test]
    fn config_validation() {
        assert!(RegConfig::new(0.1, 2).validate(2).is_ok());
        assert!(RegConfig::new(-1.0, 2).validate(2).is_err());
        assert!(RegConfig::new(0.1, 1).validate(2).is_err());
        let wide = RegConfig {
            xi_stddevs: vec![0.5],
            ..RegConfig::new(0.1, 1)
        };
        assert!(wide.validate(1).is_err());
        let none = RegConfig {
            n_pairs: 0,
            ..RegConfig::new(0.1, 1)
        };
        assert!(none.validate(1).is_err());
        let steep = gaussian_net(1, 4, 2, 0.5, 0);
        assert!(matches!(
            jacobian_analysis(&steep, &[0.0], 0.1, Tap::Penultimate),
            Err(Error::Domain(_))
        ));
    }
}
