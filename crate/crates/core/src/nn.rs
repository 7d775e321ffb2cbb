//! Dense feed-forward network with hand-written backpropagation and Adam.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{seeded_rng, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Identity => z,
        }
    }

    fn derivative<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu if z > T::zero() => T::one(),
            Activation::Relu => T::zero(),
            Activation::Identity => T::one(),
        }
    }
}

/// `out = act(W x + b)` with `W` shaped `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Array2<T>,
    pub biases: Array1<T>,
    pub activation: Activation,
}

impl<T: Real> DenseLayer<T> {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct DenseNet<T> {
    layers: Vec<DenseLayer<T>>,
    generation: u64,
}

impl<T: PartialEq> PartialEq for DenseNet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations retained by [`DenseNet::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    inputs: Vec<Array2<T>>,
    pre_activations: Vec<Array2<T>>,
    generation: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<T> {
    pub weights: Array2<T>,
    pub biases: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGradient<T>>,
    pub input: Array2<T>,
}

impl<T: Real> Gradients<T> {
    /// Parameter gradients in the order of [`DenseNet::params`].
    pub fn flatten(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }
}

impl<T: Real> DenseNet<T> {
    /// Glorot-uniform initialised network; `dims = [in, hidden.., out]`.
    /// Hidden layers use `hidden`, the last layer `output`.
    pub fn new(dims: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config("nn.dims", "need at least two non-zero layer widths"));
        }
        let mut rng = seeded_rng(seed, &[0xde05e]);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_fn((fan_out, fan_in), |_| {
                    T::of(rng.random_range(-limit..=limit))
                });
                DenseLayer {
                    weights,
                    biases: Array1::zeros(fan_out),
                    activation: if i + 2 == dims.len() { output } else { hidden },
                }
            })
            .collect();
        Ok(Self {
            layers,
            generation: 0,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("nn.layers", "need at least one layer"));
        }
        for l in &layers {
            if l.biases.len() != l.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: l.outputs(),
                    got: l.biases.len(),
                });
            }
            if l.weights.iter().chain(l.biases.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::DimensionMismatch {
                    expected: w[0].outputs(),
                    got: w[1].inputs(),
                });
            }
        }
        Ok(Self {
            layers,
            generation: 0,
        })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Zeroes the last layer so the untrained network predicts zeros.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weights.fill(T::zero());
        last.biases.fill(T::zero());
        self.generation += 1;
    }

    /// Forward pass over a batch (`batch x input_dim`).
    pub fn forward(&self, input: ArrayView2<'_, T>) -> Result<(Array2<T>, ForwardCache<T>)> {
        self.check_input(input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = input.to_owned();
        for l in &self.layers {
            let z = a.dot(&l.weights.t()) + &l.biases;
            let next = z.mapv(|v| l.activation.apply(v));
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok((
            a,
            ForwardCache {
                inputs,
                pre_activations: pre,
                generation: self.generation,
            },
        ))
    }

    /// Inference without retaining a cache.
    pub fn predict(&self, input: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(input.ncols())?;
        let mut a = input.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights.t()) + &l.biases;
            z.mapv_inplace(|v| l.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    pub fn forward_one(&self, input: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let (out, cache) = self.forward(view)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got,
            });
        }
        Ok(())
    }

    /// Reverse-mode gradients of `sum(output_grad * output)` with respect to
    /// every parameter (summed over the batch) and the input.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        output_grad: ArrayView2<'_, T>,
    ) -> Result<Gradients<T>> {
        self.backward_inner(cache, output_grad, true)
    }

    /// As [`DenseNet::backward`] but leaves `input` empty.
    pub fn param_gradients(
        &self,
        cache: &ForwardCache<T>,
        output_grad: ArrayView2<'_, T>,
    ) -> Result<Gradients<T>> {
        self.backward_inner(cache, output_grad, false)
    }

    fn backward_inner(
        &self,
        cache: &ForwardCache<T>,
        output_grad: ArrayView2<'_, T>,
        want_input: bool,
    ) -> Result<Gradients<T>> {
        if cache.generation != self.generation || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        let batch = cache.inputs[0].nrows();
        if output_grad.dim() != (batch, self.output_dim()) {
            return Err(Error::DimensionMismatch {
                expected: batch * self.output_dim(),
                got: output_grad.len(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = output_grad.to_owned();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[i];
            ndarray::Zip::from(&mut delta)
                .and(z)
                .for_each(|d, &zv| *d *= l.activation.derivative(zv));
            let dw = delta.t().dot(&cache.inputs[i]);
            let db = delta.sum_axis(Axis(0));
            let next = if i > 0 || want_input {
                delta.dot(&l.weights)
            } else {
                Array2::zeros((batch, 0))
            };
            grads.push(LayerGradient {
                weights: dw,
                biases: db,
            });
            delta = next;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: delta,
        })
    }

    /// All parameters, layer by layer, weights (row-major) then biases.
    pub fn params(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
        self.generation += 1;
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            layers: self
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    weights: l.weights.iter().map(|v| v.as_f64()).collect(),
                    biases: l.biases.iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let layers = ck
            .layers
            .iter()
            .map(|l| {
                let weights = Array2::from_shape_vec(
                    (l.outputs, l.inputs),
                    l.weights.iter().map(|&v| T::of(v)).collect(),
                )
                .map_err(|e| Error::Parse(e.to_string()))?;
                Ok(DenseLayer {
                    weights,
                    biases: l.biases.iter().map(|&v| T::of(v)).collect(),
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &self.to_checkpoint())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let ck: Checkpoint = serde_json::from_reader(file)?;
        Self::from_checkpoint(&ck)
    }
}

const CHECKPOINT_FORMAT: &str = "diffmon-dense";
const CHECKPOINT_VERSION: u32 = 1;

/// Serialised network: layer shapes plus row-major parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layers: Vec<CheckpointLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Adam moments and hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    first: Vec<(Array2<T>, Array1<T>)>,
    second: Vec<(Array2<T>, Array1<T>)>,
    pub step: u64,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> OptimizerState<T> {
    pub fn adam(net: &DenseNet<T>, learning_rate: T) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.dim()), Array1::zeros(l.biases.len())))
                .collect::<Vec<_>>()
        };
        Self {
            first: zeros(),
            second: zeros(),
            step: 0,
            learning_rate,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
        }
    }

    /// One bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut DenseNet<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.layers.len() != net.layers.len() || self.first.len() != net.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: net.layers.len(),
                got: grads.layers.len(),
            });
        }
        for (g, l) in grads.layers.iter().zip(&net.layers) {
            if g.weights.dim() != l.weights.dim() || g.biases.len() != l.biases.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.weights.len() + l.biases.len(),
                    got: g.weights.len() + g.biases.len(),
                });
            }
            if g.weights.iter().chain(g.biases.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Diverged("gradient"));
            }
        }
        self.step += 1;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let t = self.step as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        // lr * (m / c1) / (sqrt(v / c2) + eps), rearranged to one division
        let step_size = lr * c2.sqrt() / c1;
        let eps_hat = eps * c2.sqrt();
        let (g1, g2) = (T::one() - b1, T::one() - b2);
        let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + g1 * g;
            *v = b2 * *v + g2 * g * g;
            *p -= step_size * *m / (v.sqrt() + eps_hat);
        };
        for (i, l) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[i];
            let (m_w, m_b) = &mut self.first[i];
            let (v_w, v_b) = &mut self.second[i];
            ndarray::Zip::from(&mut l.weights)
                .and(&g.weights)
                .and(m_w)
                .and(v_w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut l.biases)
                .and(&g.biases)
                .and(m_b)
                .and(v_b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        net.generation += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn half_sq_loss(net: &DenseNet<f64>, x: &Array2<f64>) -> f64 {
        0.5 * net.predict(x.view()).unwrap().iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn identity_layer_passes_input() {
        let net = DenseNet::from_layers(vec![DenseLayer {
            weights: Array2::<f64>::eye(3),
            biases: Array1::zeros(3),
            activation: Activation::Identity,
        }])
        .unwrap();
        let (out, _) = net.forward_one(&[1.0, -2.0, 3.5]).unwrap();
        assert_eq!(out, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn relu_clamps_negative_preactivations() {
        let net = DenseNet::from_layers(vec![DenseLayer {
            weights: array![[1.0, 1.0], [2.0, 0.5]],
            biases: array![-10.0, -10.0],
            activation: Activation::Relu,
        }])
        .unwrap();
        let (out, _) = net.forward_one(&[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn two_layer_forward_matches_hand_arithmetic() {
        let net = DenseNet::<f64>::new(&[3, 4, 2], Activation::Relu, Activation::Identity, 5).unwrap();
        let x = [0.3, -1.2, 0.8];
        let (out, _) = net.forward_one(&x).unwrap();
        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let mut h = [0.0; 4];
        for (i, hi) in h.iter_mut().enumerate() {
            let mut z = l0.biases[i];
            for j in 0..3 {
                z += l0.weights[[i, j]] * x[j];
            }
            *hi = if z > 0.0 { z } else { 0.0 };
        }
        for (k, o) in out.iter().enumerate() {
            let mut z = l1.biases[k];
            for i in 0..4 {
                z += l1.weights[[k, i]] * h[i];
            }
            assert!((o - z).abs() < 1e-14);
        }
        assert!(net.forward_one(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn identity_net_input_gradient_equals_input() {
        let net = DenseNet::from_layers(vec![DenseLayer {
            weights: Array2::<f64>::eye(4),
            biases: Array1::zeros(4),
            activation: Activation::Identity,
        }])
        .unwrap();
        let x = array![[0.5, -1.0, 2.0, 0.25]];
        let (out, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, out.view()).unwrap();
        assert_eq!(g.input, x);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let net = DenseNet::<f64>::new(&[3, 5, 2], Activation::Relu, Activation::Identity, 1).unwrap();
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]];
        let (_, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, Array2::zeros((2, 2)).view()).unwrap();
        assert!(g.flatten().iter().all(|v| *v == 0.0));
        assert!(g.input.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = seeded_rng(17, &[]);
        for trial in 0..20u64 {
            let depth = rng.random_range(1..=3);
            let mut dims = vec![rng.random_range(1..=8)];
            for _ in 0..depth {
                dims.push(rng.random_range(1..=16));
            }
            let mut net = DenseNet::<f64>::new(&dims, Activation::Relu, Activation::Identity, trial).unwrap();
            let mut p = net.params();
            for v in p.iter_mut() {
                *v += rng.random_range(-0.1..0.1);
            }
            net.set_params(&p).unwrap();
            let x = Array2::from_shape_fn((3, dims[0]), |_| rng.random_range(-1.0..1.0));
            let (out, cache) = net.forward(x.view()).unwrap();
            let analytic = net.backward(&cache, out.view()).unwrap().flatten();
            let h = 1e-5;
            for (i, a) in analytic.iter().enumerate() {
                let mut plus = net.clone();
                let mut q = p.clone();
                q[i] += h;
                plus.set_params(&q).unwrap();
                q[i] -= 2.0 * h;
                let mut minus = net.clone();
                minus.set_params(&q).unwrap();
                let numeric = (half_sq_loss(&plus, &x) - half_sq_loss(&minus, &x)) / (2.0 * h);
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
                assert!(rel < 1e-4, "trial {trial} param {i}: {a} vs {numeric}");
            }
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = DenseNet::<f64>::new(&[2, 2], Activation::Identity, Activation::Identity, 3).unwrap();
        let x = array![[1.0, 2.0]];
        let (out, cache) = net.forward(x.view()).unwrap();
        let mut opt = OptimizerState::adam(&net, 0.1);
        let g = net.backward(&cache, out.view()).unwrap();
        opt.step(&mut net, &g).unwrap();
        assert!(matches!(net.backward(&cache, out.view()), Err(Error::StaleCache)));
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut net = DenseNet::<f64>::new(&[3, 4, 2], Activation::Relu, Activation::Identity, 2).unwrap();
        let before = net.params();
        let x = array![[1.0, 2.0, 3.0]];
        let (_, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, Array2::zeros((1, 2)).view()).unwrap();
        OptimizerState::adam(&net, 0.01).step(&mut net, &g).unwrap();
        assert_eq!(net.params(), before);
    }

    #[test]
    fn adam_moves_against_constant_gradient() {
        let mut net = DenseNet::<f64>::new(&[1, 1], Activation::Identity, Activation::Identity, 2).unwrap();
        let before = net.params();
        let mut opt = OptimizerState::adam(&net, 0.01);
        let grads = Gradients {
            layers: vec![LayerGradient {
                weights: array![[2.5]],
                biases: array![-0.7],
            }],
            input: Array2::zeros((1, 1)),
        };
        for _ in 0..50 {
            opt.step(&mut net, &grads).unwrap();
        }
        let after = net.params();
        assert!(after[0] < before[0]);
        assert!(after[1] > before[1]);
    }

    #[test]
    fn adam_nan_gradient_diverges() {
        let mut net = DenseNet::<f64>::new(&[1, 1], Activation::Identity, Activation::Identity, 2).unwrap();
        let mut opt = OptimizerState::adam(&net, 0.01);
        let grads = Gradients {
            layers: vec![LayerGradient {
                weights: array![[f64::NAN]],
                biases: array![0.0],
            }],
            input: Array2::zeros((1, 1)),
        };
        assert!(matches!(opt.step(&mut net, &grads), Err(Error::Diverged(_))));
    }

    #[test]
    fn quadratic_bowl_loss_decreases() {
        // minimise 0.5 |W x - y|^2 for a fixed (x, y)
        let mut net = DenseNet::<f64>::new(&[4, 3], Activation::Identity, Activation::Identity, 9).unwrap();
        let x = array![[0.5, -1.0, 2.0, 0.1]];
        let y = array![[1.0, -2.0, 0.5]];
        let mut opt = OptimizerState::adam(&net, 1e-2);
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let (out, cache) = net.forward(x.view()).unwrap();
            let diff = &out - &y;
            let loss = 0.5 * diff.iter().map(|v| v * v).sum::<f64>();
            assert!(loss < last);
            last = loss;
            let g = net.backward(&cache, diff.view()).unwrap();
            opt.step(&mut net, &g).unwrap();
        }
    }

    #[test]
    fn learns_xor() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = array![[0.0], [1.0], [1.0], [0.0]];
        let mut net = DenseNet::<f64>::new(&[2, 16, 1], Activation::Relu, Activation::Identity, 4).unwrap();
        let mut opt = OptimizerState::adam(&net, 1e-2);
        let mut mse = f64::INFINITY;
        for _ in 0..2000 {
            let (out, cache) = net.forward(x.view()).unwrap();
            let diff = &out - &y;
            mse = diff.iter().map(|v| v * v).sum::<f64>() / 4.0;
            let g = net.backward(&cache, (diff * 0.5).view()).unwrap();
            opt.step(&mut net, &g).unwrap();
        }
        assert!(mse < 0.05, "{mse}");
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let net = DenseNet::<f64>::new(&[5, 7, 3], Activation::Relu, Activation::Identity, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        net.save_json(&path).unwrap();
        let back = DenseNet::<f64>::load_json(&path).unwrap();
        assert_eq!(back.params(), net.params());
        assert_eq!(back.layers(), net.layers());

        let net32 = DenseNet::<f32>::new(&[3, 2], Activation::Relu, Activation::Identity, 1).unwrap();
        let back32 = DenseNet::<f32>::from_checkpoint(&net32.to_checkpoint()).unwrap();
        assert_eq!(back32.params(), net32.params());
    }

    #[test]
    fn forward_is_deterministic() {
        let net = DenseNet::<f64>::new(&[4, 8, 2], Activation::Relu, Activation::Identity, 3).unwrap();
        let x = array![[0.1, 0.2, -0.3, 0.4]];
        assert_eq!(net.predict(x.view()).unwrap(), net.predict(x.view()).unwrap());
    }
}
