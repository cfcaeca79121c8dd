//! Reverse-mode gradients over batched matrix operations.
//!
//! A [`Tape`] is built fresh for every forward pass. Every node holds its
//! forward value; [`Tape::backward`] walks the nodes in reverse and
//! accumulates gradients for the registered parameters. The op set is what
//! the coordinate-MLP graphs and their losses need, nothing more.

use crate::error::{Error, Result};
use crate::models::ActivationKind;
use crate::numeric::matrix::{axpy, norm, Matrix};

/// Handle to a node on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param,
    /// `x · wᵀ + b`, with `w` of shape out×in and `b` of shape 1×out.
    Affine { x: Var, w: Var, b: Var },
    Activate { z: Var, act: ActivationKind },
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Sum(Var),
    Mean(Var),
    /// `Σ_p weights[p] · ‖a_p − b_p‖ / P` over rows `p`.
    PairNormMean { a: Var, b: Var, weights: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Var>,
}

/// Gradients for every parameter, in registration order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<Matrix>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Result<f64> {
        let m = self.value(v);
        if m.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "expected a scalar node, found {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(m.get(0, 0))
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Registers a trainable parameter. Its gradient appears at the
    /// corresponding position of [`Gradients::params`].
    pub fn param(&mut self, value: Matrix) -> Var {
        let v = self.push(value, Op::Param, true);
        self.params.push(v);
        v
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if bv.rows() != 1 || bv.cols() != wv.rows() {
            return Err(Error::Shape(format!(
                "bias {}x{} for weight {}x{}",
                bv.rows(),
                bv.cols(),
                wv.rows(),
                wv.cols()
            )));
        }
        let mut out = xv.matmul_t(wv)?;
        out.add_row_broadcast(bv.as_slice())?;
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(out, Op::Affine { x, w, b }, needs))
    }

    pub fn activate(&mut self, z: Var, act: ActivationKind) -> Var {
        let out = self.value(z).map(|v| act.apply(v));
        let needs = self.needs(z);
        self.push(out, Op::Activate { z, act }, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Sub(a, b), needs))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        let needs = self.needs(a);
        self.push(out, Op::Scale(a, s), needs)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v * v);
        let needs = self.needs(a);
        self.push(out, Op::Square(a), needs)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).sum());
        let needs = self.needs(a);
        self.push(out, Op::Sum(a), needs)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let m = self.value(a);
        if m.is_empty() {
            return Err(Error::Shape("mean of an empty matrix".into()));
        }
        let out = Matrix::scalar(m.sum() / m.len() as f64);
        let needs = self.needs(a);
        Ok(self.push(out, Op::Mean(a), needs))
    }

    /// Mean squared difference over all entries.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let d = self.sub(pred, target)?;
        let sq = self.square(d);
        self.mean(sq)
    }

    /// Weighted mean of row-wise Euclidean distances between `a` and `b`.
    pub fn pair_norm_mean(&mut self, a: Var, b: Var, weights: Vec<f64>) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() || weights.len() != av.rows() || av.rows() == 0 {
            return Err(Error::Shape(format!(
                "pair_norm_mean over {}x{} and {}x{} with {} weights",
                av.rows(),
                av.cols(),
                bv.rows(),
                bv.cols(),
                weights.len()
            )));
        }
        let p = av.rows() as f64;
        let mut total = 0.0;
        for (r, w) in weights.iter().enumerate() {
            let d: Vec<f64> = av.row(r).iter().zip(bv.row(r)).map(|(x, y)| x - y).collect();
            total += w * norm(&d);
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            Matrix::scalar(total / p),
            Op::PairNormMean { a, b, weights },
            needs,
        ))
    }

    /// Gradient of the scalar node `output` with respect to every parameter.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, found {}x{}",
                out.rows(),
                out.cols()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Constant => {}
                Op::Param => {
                    grads[idx] = Some(g);
                }
                Op::Affine { x, w, b } => {
                    if self.needs(*x) {
                        let gx = g.matmul(self.value(*w))?;
                        accumulate(&mut grads, *x, gx)?;
                    }
                    if self.needs(*w) {
                        let gw = g.t_matmul(self.value(*x))?;
                        accumulate(&mut grads, *w, gw)?;
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, g.col_sums())?;
                    }
                }
                Op::Activate { z, act } => {
                    if self.needs(*z) {
                        let zv = self.value(*z);
                        let mut gz = g;
                        for ((gi, &zi), &yi) in gz
                            .as_mut_slice()
                            .iter_mut()
                            .zip(zv.as_slice())
                            .zip(node.value.as_slice())
                        {
                            *gi *= act.derivative(zi, yi);
                        }
                        accumulate(&mut grads, *z, gz)?;
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, g.clone())?;
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, g)?;
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, g.scale(-1.0))?;
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, g)?;
                    }
                }
                Op::Scale(a, s) => {
                    accumulate(&mut grads, *a, g.scale(*s))?;
                }
                Op::Square(a) => {
                    let ga = g.zip_map(self.value(*a), |gi, ai| 2.0 * ai * gi)?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g.get(0, 0)))?;
                }
                Op::Mean(a) => {
                    let (r, c) = self.value(*a).shape();
                    let s = g.get(0, 0) / (r * c) as f64;
                    accumulate(&mut grads, *a, Matrix::filled(r, c, s))?;
                }
                Op::PairNormMean { a, b, weights } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (rows, cols) = av.shape();
                    let scale = g.get(0, 0) / rows as f64;
                    let mut ga = Matrix::zeros(rows, cols);
                    for (r, w) in weights.iter().enumerate() {
                        let d: Vec<f64> =
                            av.row(r).iter().zip(bv.row(r)).map(|(x, y)| x - y).collect();
                        let n = norm(&d);
                        // ‖·‖ is not differentiable at 0; use the zero subgradient.
                        if n > 0.0 {
                            axpy(ga.row_mut(r), scale * w / n, &d);
                        }
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, ga.scale(-1.0))?;
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, ga)?;
                    }
                }
            }
        }

        let params = self
            .params
            .iter()
            .map(|p| {
                grads[p.0].take().unwrap_or_else(|| {
                    let (r, c) = self.value(*p).shape();
                    Matrix::zeros(r, c)
                })
            })
            .collect();
        Ok(Gradients { params })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::RandomSource;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let p = t.param(Matrix::scalar(3.0));
        let sq = t.square(p);
        let loss = t.sum(sq);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.params[0].get(0, 0), 6.0);
    }

    #[test]
    fn constants_give_zero_gradient() {
        let mut t = Tape::new();
        let p = t.param(Matrix::row_vector(&[1.0, -2.0]));
        let c1 = t.constant(Matrix::scalar(4.0));
        let c2 = t.constant(Matrix::scalar(5.0));
        let s = t.add(c1, c2).unwrap();
        let loss = t.sum(s);
        assert_eq!(t.scalar(loss).unwrap(), 9.0);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.params[0].as_slice(), &[0.0, 0.0]);
        let _ = p;
    }

    #[test]
    fn non_scalar_output_rejected() {
        let mut t = Tape::new();
        let p = t.param(Matrix::row_vector(&[1.0, 2.0]));
        assert!(matches!(t.backward(p), Err(Error::Contract(_))));
    }

    /// Two-layer Gaussian MLP on 5 inputs, checked against central
    /// differences of an independent scalar re-evaluation.
    #[test]
    fn two_layer_gaussian_matches_finite_differences() {
        let mut rng = RandomSource::new(42);
        let act = ActivationKind::Gaussian { sigma: 0.7 };
        let x = Matrix::from_vec(5, 2, rng.uniform_vec(-1.0, 1.0, 10)).unwrap();
        let y = Matrix::from_vec(5, 1, rng.uniform_vec(0.0, 1.0, 5)).unwrap();
        let params = vec![
            Matrix::from_vec(4, 2, rng.uniform_vec(-1.0, 1.0, 8)).unwrap(),
            Matrix::from_vec(1, 4, rng.uniform_vec(-0.5, 0.5, 4)).unwrap(),
            Matrix::from_vec(1, 4, rng.uniform_vec(-1.0, 1.0, 4)).unwrap(),
            Matrix::from_vec(1, 1, rng.uniform_vec(-0.5, 0.5, 1)).unwrap(),
        ];

        let build = |ps: &[Matrix]| -> (Tape, Var) {
            let mut t = Tape::new();
            let vs: Vec<Var> = ps.iter().map(|p| t.param(p.clone())).collect();
            let xv = t.constant(x.clone());
            let yv = t.constant(y.clone());
            let z = t.affine(xv, vs[0], vs[1]).unwrap();
            let h = t.activate(z, act);
            let o = t.affine(h, vs[2], vs[3]).unwrap();
            let l = t.mse(o, yv).unwrap();
            (t, l)
        };

        // independent loss: plain loops, no tape
        let loss_of = |ps: &[Matrix]| -> f64 {
            let mut total = 0.0;
            for i in 0..5 {
                let mut out = ps[3].get(0, 0);
                for j in 0..4 {
                    let z = ps[0].get(j, 0) * x.get(i, 0) + ps[0].get(j, 1) * x.get(i, 1)
                        + ps[1].get(0, j);
                    out += ps[2].get(0, j) * (-z * z / (2.0 * 0.49)).exp();
                }
                total += (out - y.get(i, 0)).powi(2);
            }
            total / 5.0
        };

        let (t, l) = build(&params);
        assert!((t.scalar(l).unwrap() - loss_of(&params)).abs() < 1e-14);
        let g = t.backward(l).unwrap();
        let h = 1e-5;
        for (pi, p) in params.iter().enumerate() {
            for k in 0..p.len() {
                let mut plus = params.clone();
                plus[pi].as_mut_slice()[k] += h;
                let mut minus = params.clone();
                minus[pi].as_mut_slice()[k] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let an = g.params[pi].as_slice()[k];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-5, "param {pi}[{k}]: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn pair_norm_mean_gradient() {
        let mut rng = RandomSource::new(9);
        let a0 = Matrix::from_vec(3, 4, rng.uniform_vec(-1.0, 1.0, 12)).unwrap();
        let b0 = Matrix::from_vec(3, 4, rng.uniform_vec(-1.0, 1.0, 12)).unwrap();
        let w = vec![0.5, 2.0, 1.0];
        let eval = |a: &Matrix, b: &Matrix| {
            let mut t = Tape::new();
            let av = t.param(a.clone());
            let bv = t.param(b.clone());
            let l = t.pair_norm_mean(av, bv, w.clone()).unwrap();
            (t.scalar(l).unwrap(), t.backward(l).unwrap())
        };
        let (_, g) = eval(&a0, &b0);
        let h = 1e-6;
        for k in 0..12 {
            let mut ap = a0.clone();
            ap.as_mut_slice()[k] += h;
            let mut am = a0.clone();
            am.as_mut_slice()[k] -= h;
            let fd = (eval(&ap, &b0).0 - eval(&am, &b0).0) / (2.0 * h);
            assert!((fd - g.params[0].as_slice()[k]).abs() < 1e-8);
            assert!((fd + g.params[1].as_slice()[k]).abs() < 1e-8);
        }
    }
}
