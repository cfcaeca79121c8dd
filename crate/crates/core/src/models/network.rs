use serde::{Deserialize, Serialize};

use super::ActivationKind;
use crate::error::{Error, Result};
use crate::numeric::{Matrix, RandomSource, Tape, Var};

/// Random Fourier feature embedding `x ↦ [sin(l₁·x), cos(l₁·x), …]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RffEmbedding {
    /// n×D, one column per frequency vector `l_j`.
    pub l: Matrix,
    /// Standard deviation parameter that generated `l` (entries have std 2πσ).
    pub sigma: f64,
}

impl RffEmbedding {
    pub fn new(l: Matrix, sigma: f64) -> Result<Self> {
        if l.cols() == 0 || l.rows() == 0 {
            return Err(Error::Config("embedding needs at least one frequency".into()));
        }
        Ok(RffEmbedding { l, sigma })
    }

    pub fn input_dim(&self) -> usize {
        self.l.rows()
    }

    pub fn features(&self) -> usize {
        self.l.cols()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.l.cols()
    }

    /// Frequency vector `l_j` (angular, radians per unit).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.l.rows()).map(|r| self.l.get(r, j)).collect()
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.embed_batch(&Matrix::row_vector(x))?;
        Ok(out.into_vec())
    }

    pub fn embed_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "embedding expects {} coordinates, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let phase = x.matmul(&self.l)?;
        let d = self.features();
        let mut out = Matrix::zeros(x.rows(), 2 * d);
        for r in 0..x.rows() {
            let src = phase.row(r);
            let dst = out.row_mut(r);
            for j in 0..d {
                let (s, c) = src[j].sin_cos();
                dst[2 * j] = s;
                dst[2 * j + 1] = c;
            }
        }
        Ok(out)
    }
}

/// Hidden layer: `act(x·Wᵀ + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// out×in
    pub weight: Matrix,
    /// 1×out
    pub bias: Matrix,
    pub activation: ActivationKind,
}

/// Final linear layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

/// Which hidden representation a feature tap reads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tap {
    /// Last hidden layer.
    #[default]
    Penultimate,
    /// Network output.
    Output,
    /// Hidden layer by zero-based index.
    Hidden(usize),
}

/// Coordinate-MLP family and its bandwidth hyperparameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Family {
    Gaussian { sigma: f64 },
    Sine { a: f64 },
    /// RFF embedding with `features` frequencies followed by ReLU layers.
    Rff { sigma: f64, features: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Sine { .. } => "sine",
            Family::Rff { .. } => "rff",
        }
    }

    /// The bandwidth hyperparameter (σ, a, or embedding σ).
    pub fn hyperparameter(&self) -> f64 {
        match *self {
            Family::Gaussian { sigma } => sigma,
            Family::Sine { a } => a,
            Family::Rff { sigma, .. } => sigma,
        }
    }

    pub fn with_hyperparameter(&self, value: f64) -> Family {
        match *self {
            Family::Gaussian { .. } => Family::Gaussian { sigma: value },
            Family::Sine { .. } => Family::Sine { a: value },
            Family::Rff { features, .. } => Family::Rff {
                sigma: value,
                features,
            },
        }
    }
}

/// Architecture description consumed by [`init_network`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub family: Family,
    pub input_dim: usize,
    pub width: usize,
    /// Number of affine layers including the linear output; a shallow
    /// network has depth 2.
    pub depth: usize,
    pub output_dim: usize,
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.output_dim == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.depth < 2 {
            return Err(Error::Config(format!(
                "depth {} leaves no hidden layer",
                self.depth
            )));
        }
        match self.family {
            Family::Gaussian { sigma } => ActivationKind::Gaussian { sigma }.validate(),
            Family::Sine { a } => ActivationKind::Sine { a }.validate(),
            Family::Rff { sigma, features } => {
                if !(sigma > 0.0 && sigma.is_finite()) || features == 0 {
                    Err(Error::Config(format!(
                        "rff needs sigma > 0 and features ≥ 1, got {sigma}, {features}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn activation(&self) -> ActivationKind {
        match self.family {
            Family::Gaussian { sigma } => ActivationKind::Gaussian { sigma },
            Family::Sine { a } => ActivationKind::Sine { a },
            Family::Rff { .. } => ActivationKind::Relu,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub embedding: Option<RffEmbedding>,
    pub hidden: Vec<Layer>,
    pub output: Linear,
}

/// Every hidden activation plus the output of one batched evaluation.
#[derive(Clone, Debug)]
pub struct Activations {
    pub hidden: Vec<Matrix>,
    pub output: Matrix,
}

impl Activations {
    pub fn penultimate(&self) -> &Matrix {
        self.hidden.last().expect("networks have at least one hidden layer")
    }

    pub fn tap(&self, tap: Tap) -> Result<&Matrix> {
        match tap {
            Tap::Penultimate => Ok(self.penultimate()),
            Tap::Output => Ok(&self.output),
            Tap::Hidden(i) => self
                .hidden
                .get(i)
                .ok_or_else(|| Error::Config(format!("no hidden layer {i}"))),
        }
    }
}

/// Tape handles for every parameter of a network, in [`Network::params`] order.
#[derive(Clone, Debug)]
pub struct NetVars {
    layers: Vec<(Var, Var)>,
    output: (Var, Var),
}

/// Tape nodes for one batched forward pass.
#[derive(Clone, Debug)]
pub struct TapeForward {
    pub hidden: Vec<Var>,
    pub output: Var,
}

impl TapeForward {
    pub fn tap(&self, tap: Tap) -> Result<Var> {
        match tap {
            Tap::Penultimate => Ok(*self.hidden.last().expect("non-empty")),
            Tap::Output => Ok(self.output),
            Tap::Hidden(i) => self
                .hidden
                .get(i)
                .copied()
                .ok_or_else(|| Error::Config(format!("no hidden layer {i}"))),
        }
    }
}

impl Network {
    /// Assembles and checks a network from explicit parts.
    pub fn new(embedding: Option<RffEmbedding>, hidden: Vec<Layer>, output: Linear) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        let mut fan_in = match &embedding {
            Some(e) => e.output_dim(),
            None => hidden[0].weight.cols(),
        };
        for (i, layer) in hidden.iter().enumerate() {
            layer.activation.validate()?;
            if layer.weight.cols() != fan_in || layer.bias.shape() != (1, layer.weight.rows()) {
                return Err(Error::Shape(format!("layer {i} does not chain")));
            }
            fan_in = layer.weight.rows();
        }
        if output.weight.cols() != fan_in || output.bias.shape() != (1, output.weight.rows()) {
            return Err(Error::Shape("output layer does not chain".into()));
        }
        Ok(Network {
            embedding,
            hidden,
            output,
        })
    }

    pub fn input_dim(&self) -> usize {
        match &self.embedding {
            Some(e) => e.input_dim(),
            None => self.hidden[0].weight.cols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.output.weight.rows()
    }

    /// Number of affine layers including the output.
    pub fn depth(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn params(&self) -> Vec<&Matrix> {
        let mut out = Vec::with_capacity(2 * self.depth());
        for l in &self.hidden {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.output.weight);
        out.push(&self.output.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::with_capacity(2 * self.depth());
        for l in &mut self.hidden {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|m| m.len()).sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} coordinates, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// Batched evaluation; rows of `x` are coordinates.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Activations> {
        self.check_input(x)?;
        let mut h = match &self.embedding {
            Some(e) => e.embed_batch(x)?,
            None => x.clone(),
        };
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (i, layer) in self.hidden.iter().enumerate() {
            let mut z = h.matmul_t(&layer.weight)?;
            z.add_row_broadcast(layer.bias.as_slice())?;
            let act = layer.activation;
            let out = z.map(|v| act.apply(v));
            if !out.is_finite() {
                return Err(Error::NonFinite { layer: i });
            }
            hidden.push(out);
            h = hidden.last().unwrap().clone();
        }
        let mut output = h.matmul_t(&self.output.weight)?;
        output.add_row_broadcast(self.output.bias.as_slice())?;
        if !output.is_finite() {
            return Err(Error::NonFinite {
                layer: self.hidden.len(),
            });
        }
        Ok(Activations { hidden, output })
    }

    /// Output only, one row per coordinate.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_batch(x)?.output)
    }

    /// Single-coordinate evaluation returning `(f(x), g(x))` where `g` is the
    /// penultimate feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let acts = self.forward_batch(&Matrix::row_vector(x))?;
        Ok((acts.output.row(0).to_vec(), acts.penultimate().row(0).to_vec()))
    }

    pub fn register(&self, tape: &mut Tape) -> NetVars {
        let layers = self
            .hidden
            .iter()
            .map(|l| (tape.param(l.weight.clone()), tape.param(l.bias.clone())))
            .collect();
        let output = (
            tape.param(self.output.weight.clone()),
            tape.param(self.output.bias.clone()),
        );
        NetVars { layers, output }
    }

    /// Records a batched forward pass on `tape` using previously registered
    /// parameters. `x` is treated as a constant.
    pub fn forward_tape(&self, tape: &mut Tape, vars: &NetVars, x: &Matrix) -> Result<TapeForward> {
        self.check_input(x)?;
        let input = match &self.embedding {
            Some(e) => e.embed_batch(x)?,
            None => x.clone(),
        };
        let mut h = tape.constant(input);
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (layer, &(w, b)) in self.hidden.iter().zip(&vars.layers) {
            let z = tape.affine(h, w, b)?;
            h = tape.activate(z, layer.activation);
            hidden.push(h);
        }
        let output = tape.affine(h, vars.output.0, vars.output.1)?;
        Ok(TapeForward { hidden, output })
    }
}

/// Builds a randomly initialized network.
///
/// Sine layers follow the SIREN scheme written for `sin(2πa·z)`: hidden
/// layers draw `W ~ U(±√(6/fan_in)) / 2πa` so the effective weights `2πa·W`
/// stay in `U(±√(6/fan_in))`, while the first layer draws `U(±1/fan_in)` and
/// is therefore widened by `2πa`. Gaussian layers draw weights and biases from
/// `U(±√(1/fan_in))`, ReLU layers use `N(0, 2/fan_in)` with zero bias, and the
/// RFF matrix has i.i.d. `N(0, (2πσ)²)` entries.
pub fn init_network(spec: &ArchSpec, rng: &mut RandomSource) -> Result<Network> {
    use std::f64::consts::PI;
    spec.validate()?;
    let act = spec.activation();

    let embedding = match spec.family {
        Family::Rff { sigma, features } => {
            let std = 2.0 * PI * sigma;
            let data = (0..spec.input_dim * features)
                .map(|_| std * rng.standard_normal())
                .collect();
            Some(RffEmbedding::new(
                Matrix::from_vec(spec.input_dim, features, data)?,
                sigma,
            )?)
        }
        _ => None,
    };

    let mut fan_in = embedding.as_ref().map_or(spec.input_dim, |e| e.output_dim());
    let mut hidden = Vec::with_capacity(spec.depth - 1);
    for i in 0..spec.depth - 1 {
        let fi = fan_in as f64;
        let (w_bound, b_bound) = match act {
            ActivationKind::Sine { a } if i == 0 => (1.0 / fi, 1.0 / (2.0 * a)),
            ActivationKind::Sine { a } => ((6.0 / fi).sqrt() / (2.0 * PI * a), 1.0 / (2.0 * PI * a * fi.sqrt())),
            ActivationKind::Gaussian { .. } => ((1.0 / fi).sqrt(), (1.0 / fi).sqrt()),
            ActivationKind::Relu => (0.0, 0.0),
        };
        let weight = if act == ActivationKind::Relu {
            let std = (2.0 / fi).sqrt();
            Matrix::from_fn(spec.width, fan_in, |_, _| std * rng.standard_normal())
        } else {
            Matrix::from_fn(spec.width, fan_in, |_, _| rng.uniform(-w_bound, w_bound))
        };
        let bias = if b_bound > 0.0 {
            Matrix::from_fn(1, spec.width, |_, _| rng.uniform(-b_bound, b_bound))
        } else {
            Matrix::zeros(1, spec.width)
        };
        hidden.push(Layer {
            weight,
            bias,
            activation: act,
        });
        fan_in = spec.width;
    }

    let bound = (1.0 / fan_in as f64).sqrt();
    let output = Linear {
        weight: Matrix::from_fn(spec.output_dim, fan_in, |_, _| rng.uniform(-bound, bound)),
        bias: Matrix::zeros(1, spec.output_dim),
    };
    Network::new(embedding, hidden, output)
}

/// Parameters of a single-hidden-layer, scalar-output network,
/// `G(x) = Σ_i w2_i α(w1_i·x + b_i) + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShallowView {
    pub embedding: Option<RffEmbedding>,
    /// m×n; row `i` is `w1_i`.
    pub first: Matrix,
    pub biases: Vec<f64>,
    pub second: Vec<f64>,
    pub output_bias: f64,
    pub activation: ActivationKind,
}

impl ShallowView {
    pub fn neurons(&self) -> usize {
        self.second.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let input = match &self.embedding {
            Some(e) => e.embed(x)?,
            None => x.to_vec(),
        };
        if input.len() != self.first.cols() {
            return Err(Error::Shape("coordinate dimension mismatch".into()));
        }
        let mut out = self.output_bias;
        for i in 0..self.neurons() {
            let z: f64 = self
                .first
                .row(i)
                .iter()
                .zip(&input)
                .map(|(w, v)| w * v)
                .sum::<f64>()
                + self.biases[i];
            out += self.second[i] * self.activation.apply(z);
        }
        Ok(out)
    }
}

pub fn shallow_of(net: &Network) -> Result<ShallowView> {
    if net.hidden.len() != 1 {
        return Err(Error::Contract(format!(
            "shallow view needs exactly one hidden layer, network has {}",
            net.hidden.len()
        )));
    }
    if net.output_dim() != 1 {
        return Err(Error::Contract("shallow view needs a scalar output".into()));
    }
    let layer = &net.hidden[0];
    Ok(ShallowView {
        embedding: net.embedding.clone(),
        first: layer.weight.clone(),
        biases: layer.bias.as_slice().to_vec(),
        second: net.output.weight.as_slice().to_vec(),
        output_bias: net.output.bias.get(0, 0),
        activation: layer.activation,
    })
}
