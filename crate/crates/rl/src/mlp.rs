//! Fully connected networks with hand-written backprop.
//!
//! Batches are row-major: one sample per row. Layer `l` computes
//! `z = x·W + b` with `W` of shape `in × out`. A critic feeds the action
//! into the input of layer 1 by concatenating it after the first hidden
//! activation.

use std::fmt::Debug;

use ndarray::{concatenate, s, Array1, Array2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RlError};

pub trait Real: Float + FromPrimitive + LinalgScalar + ScalarOperand + Debug + Send + Sync + 'static {}

impl<T> Real for T where T: Float + FromPrimitive + LinalgScalar + ScalarOperand + Debug + Send + Sync + 'static {}

fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("representable constant")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Unit-α exponential linear unit.
    Elu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Elu => {
                if z > T::zero() {
                    z
                } else {
                    z.exp() - T::one()
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    fn derivative<T: Real>(self, z: T) -> T {
        match self {
            Activation::Elu => {
                if z > T::zero() {
                    T::one()
                } else {
                    z.exp()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
            Activation::Linear => T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
    pub hidden: Activation,
    pub output: Activation,
    /// Multiplies the output activation; the actor's action bound.
    pub output_scale: T,
    /// Width of the side input joined at layer 1 (0 for none).
    pub concat_width: usize,
}

pub struct Cache<T> {
    inputs: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
    pub output: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .fold(T::zero(), |a, v| a.max(v.abs()))
    }
}

impl<T: Real> Mlp<T> {
    /// `sizes` lists every layer width from input to output. Hidden layers
    /// get fan-in uniform initialization, the output layer `±3e-3`.
    pub fn new<R: Rng>(
        sizes: &[usize],
        output: Activation,
        output_scale: f64,
        concat_width: usize,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "a network needs an input and an output width");
        let last = sizes.len() - 2;
        let layers = (0..=last)
            .map(|l| {
                let fan_in = sizes[l] + if l == 1 { concat_width } else { 0 };
                let bound = if l == last { 3e-3 } else { 1.0 / (fan_in as f64).sqrt() };
                let mut draw = || real::<T>(rng.random_range(-bound..bound));
                Dense {
                    w: Array2::from_shape_simple_fn((fan_in, sizes[l + 1]), &mut draw),
                    b: Array1::from_shape_simple_fn(sizes[l + 1], &mut draw),
                }
            })
            .collect();
        Self {
            layers,
            hidden: Activation::Elu,
            output,
            output_scale: real(output_scale),
            concat_width,
        }
    }

    /// Policy network: observation to `tanh`-bounded action.
    pub fn actor<R: Rng>(obs: usize, hidden: (usize, usize), actions: usize, u_max: f64, rng: &mut R) -> Self {
        Self::new(&[obs, hidden.0, hidden.1, actions], Activation::Tanh, u_max, 0, rng)
    }

    /// Value network. The second hidden layer has `hidden.1 + actions`
    /// units and reads the first hidden layer joined with the action.
    pub fn critic<R: Rng>(obs: usize, hidden: (usize, usize), actions: usize, rng: &mut R) -> Self {
        Self::new(&[obs, hidden.0, hidden.1 + actions, 1], Activation::Linear, 1.0, actions, rng)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.ncols())
    }

    /// Widths from input to output.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_width()];
        sizes.extend(self.layers.iter().map(|l| l.w.ncols()));
        sizes
    }

    pub fn activations(&self) -> Vec<Activation> {
        let n = self.layers.len();
        (0..n).map(|l| if l + 1 == n { self.output } else { self.hidden }).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.concat_width == other.concat_width
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.w.dim() == b.w.dim() && a.b.dim() == b.b.dim())
    }

    pub fn forward(&self, x: &Array2<T>, side: Option<&Array2<T>>) -> Result<Array2<T>> {
        Ok(self.forward_cached(x, side)?.output)
    }

    pub fn forward_cached(&self, x: &Array2<T>, side: Option<&Array2<T>>) -> Result<Cache<T>> {
        if x.ncols() != self.input_width() {
            return Err(RlError::Width {
                expected: self.input_width(),
                got: x.ncols(),
            });
        }
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            if l == 1 && self.concat_width > 0 {
                let side = side.ok_or(RlError::Width {
                    expected: self.concat_width,
                    got: 0,
                })?;
                if side.ncols() != self.concat_width || side.nrows() != a.nrows() {
                    return Err(RlError::Width {
                        expected: self.concat_width,
                        got: side.ncols(),
                    });
                }
                a = concatenate(Axis(1), &[a.view(), side.view()]).expect("row counts checked");
            }
            let z = a.dot(&layer.w) + &layer.b;
            let act = if l + 1 == n { self.output } else { self.hidden };
            let mut next = z.mapv(|v| act.apply(v));
            if l + 1 == n {
                next.mapv_inplace(|v| v * self.output_scale);
            }
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(Cache { inputs, pre, output: a })
    }

    /// Backpropagates `∂loss/∂output`; returns parameter gradients and the
    /// gradients with respect to the input and the side input.
    pub fn backward(&self, cache: &Cache<T>, d_out: &Array2<T>) -> (Gradients<T>, Array2<T>, Option<Array2<T>>) {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut delta = d_out.clone();
        let mut d_side = None;
        for l in (0..n).rev() {
            let (act, scale) = if l + 1 == n {
                (self.output, self.output_scale)
            } else {
                (self.hidden, T::one())
            };
            let dz = &delta * &cache.pre[l].mapv(|z| act.derivative(z) * scale);
            let dw = cache.inputs[l].t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            let mut d_in = dz.dot(&self.layers[l].w.t());
            if l == 1 && self.concat_width > 0 {
                let width = d_in.ncols() - self.concat_width;
                d_side = Some(d_in.slice(s![.., width..]).to_owned());
                d_in = d_in.slice(s![.., ..width]).to_owned();
            }
            grads.push((dw, db));
            delta = d_in;
        }
        grads.reverse();
        (Gradients { layers: grads }, delta, d_side)
    }

    /// `target ← τ·online + (1 − τ)·target`.
    pub fn soft_update(&mut self, online: &Self, tau: f64) -> Result<()> {
        if !self.same_shape(online) {
            return Err(RlError::Architecture);
        }
        let tau: T = real(tau);
        let keep = T::one() - tau;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.w.zip_mut_with(&o.w, |a, &b| *a = tau * b + keep * *a);
            t.b.zip_mut_with(&o.b, |a, &b| *a = tau * b + keep * *a);
        }
        Ok(())
    }
}

/// Adam state for one network; `step` moves against the gradient.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    m: Gradients<T>,
    v: Gradients<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(net: &Mlp<T>, lr: f64) -> Self {
        Self {
            lr,
            betas: (0.9, 0.999),
            eps: 1e-8,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>) {
        self.t += 1;
        let (b1, b2) = self.betas;
        let c1: T = real(1.0 - b1.powi(self.t));
        let c2: T = real(1.0 - b2.powi(self.t));
        let (b1, b2): (T, T) = (real(b1), real(b2));
        let (one, lr, eps): (T, T, T) = (T::one(), real(self.lr), real(self.eps));
        let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[l];
            let (mw, mb) = &mut self.m.layers[l];
            let (vw, vb) = &mut self.v.layers[l];
            ndarray::Zip::from(&mut layer.w)
                .and(mw)
                .and(vw)
                .and(gw)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.b)
                .and(mb)
                .and(vb)
                .and(gb)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_actor_outputs_zero() {
        let mut net = Mlp::<f64>::actor(32, (8, 6), 6, 3.0, &mut ChaCha8Rng::seed_from_u64(0));
        for l in &mut net.layers {
            l.w.fill(0.0);
            l.b.fill(0.0);
        }
        let out = net.forward(&Array2::from_elem((2, 32), 0.7), None).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn elu_at_minus_one() {
        let v: f64 = Activation::Elu.apply(-1.0);
        assert!((v - ((-1.0f64).exp() - 1.0)).abs() < 1e-16);
        assert!((v + 0.63212).abs() < 1e-5);
    }

    #[test]
    fn actor_respects_bound_and_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::<f32>::actor(32, (16, 12), 4, 5.0, &mut rng);
        for l in &mut net.layers {
            l.w.mapv_inplace(|v| v * 400.0);
        }
        let x = Array2::from_shape_fn((5, 32), |(i, j)| (i * 7 + j) as f32 / 10.0 - 2.0);
        let out = net.forward(&x, None).unwrap();
        assert!(out.iter().all(|v| v.is_finite() && v.abs() <= 5.0));
        assert!(net.forward(&Array2::zeros((1, 31)), None).is_err());
    }

    #[test]
    fn soft_update_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let online = Mlp::<f64>::new(&[3, 4, 2], Activation::Linear, 1.0, 0, &mut rng);
        let start = Mlp::<f64>::new(&[3, 4, 2], Activation::Linear, 1.0, 0, &mut rng);
        let mut t = start.clone();
        t.soft_update(&online, 0.0).unwrap();
        assert_eq!(t, start);
        t.soft_update(&online, 1.0).unwrap();
        assert_eq!(t, online);
        let mut a = start.clone();
        let mut b = start.clone();
        a.layers[0].w[[0, 0]] = 0.0;
        b.layers[0].w[[0, 0]] = 2.0;
        a.soft_update(&b, 0.5).unwrap();
        assert_eq!(a.layers[0].w[[0, 0]], 1.0);
        let other = Mlp::<f64>::new(&[3, 5, 2], Activation::Linear, 1.0, 0, &mut rng);
        assert!(a.soft_update(&other, 0.5).is_err());
    }
}
