//! Minimal dense feedforward networks without bias terms.
//!
//! Arrays are laid out `(samples, features)`: a batch is one row per sample,
//! and a layer computes `activation(x · W)` with `W` of shape
//! `(in_dim, out_dim)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;

use crate::error::{dims, Error, Result};
use crate::gf2::BitMatrix;

const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Linear,
    Sigmoid,
    Tanh,
    /// Slope 0.01 below zero.
    LeakyRelu,
}

impl Activation {
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Sigmoid => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
        }
    }

    /// Derivative wrt the pre-activation `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Sigmoid => {
                let s = self.value(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::LeakyRelu => "leaky_relu",
        }
    }

    pub const ALL: [Activation; 4] = [
        Activation::Linear,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::LeakyRelu,
    ];
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown activation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, activation: Activation) -> Self {
        Self { weights, activation }
    }

    /// Glorot-uniform initialization: `U(−√(6/(in+out)), √(6/(in+out)))`.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((in_dim, out_dim), || rng.gen_range(-limit..limit));
        Self { weights, activation }
    }

    /// A linear layer whose weights are the 0/1 entries of `m`.
    pub fn from_bits(m: &BitMatrix) -> Self {
        let weights = Array2::from_shape_fn((m.rows(), m.cols()), |(i, j)| f64::from(m.get(i, j)));
        Self {
            weights,
            activation: Activation::Linear,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

/// Values retained by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

/// Output of [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    /// One gradient per layer, shaped like that layer's weights.
    pub weights: Vec<Array2<f64>>,
    /// Gradient wrt the network input, for chaining networks.
    pub input: Array2<f64>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    expected: format!("layer {} input of {}", i + 1, pair[0].out_dim()),
                    actual: format!("{}", pair[1].in_dim()),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.weights.dim()).collect()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} input features", self.in_dim()),
                actual: dims(x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        for layer in &self.layers {
            let z = current.dot(&layer.weights);
            let act = layer.activation;
            let a = z.mapv(|v| act.value(v));
            inputs.push(current);
            pre_activations.push(z);
            current = a;
        }
        Ok((
            current,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without a cache.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut current = x.to_owned();
        for layer in &self.layers {
            let act = layer.activation;
            current = current.dot(&layer.weights).mapv_into(|v| act.value(v));
        }
        Ok(current)
    }

    /// Evaluates a linear network with 0/1 weights in GF(2) arithmetic,
    /// reducing every layer output mod 2.
    pub fn forward_gf2(&self, x: &[u8]) -> Result<Vec<u8>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} input bits", self.in_dim()),
                actual: format!("{}", x.len()),
            });
        }
        let mut current = BitMatrix::row_vector(x)?;
        for layer in &self.layers {
            if layer.activation != Activation::Linear {
                return Err(Error::InvalidArgument(
                    "GF(2) evaluation requires linear activations".into(),
                ));
            }
            let mut bits = Vec::with_capacity(layer.weights.len());
            for &w in layer.weights.iter() {
                match w {
                    w if w == 0.0 => bits.push(0),
                    w if w == 1.0 => bits.push(1),
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "GF(2) evaluation requires 0/1 weights, found {other}"
                        )))
                    }
                }
            }
            let w = BitMatrix::from_bits(layer.in_dim(), layer.out_dim(), bits)?;
            current = current.mul(&w)?;
        }
        Ok(current.into_bits())
    }

    /// Reverse-mode gradients given `∂loss/∂output` for each sample.
    pub fn backward(&self, cache: &ForwardCache, grad_output: ArrayView2<f64>) -> Result<Gradients> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("cache for {} layers", self.layers.len()),
                actual: format!("{}", cache.inputs.len()),
            });
        }
        let expected = cache.pre_activations[self.layers.len() - 1].dim();
        if grad_output.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected: dims(expected.0, expected.1),
                actual: dims(grad_output.nrows(), grad_output.ncols()),
            });
        }
        let mut weight_grads = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut grad = grad_output.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            Zip::from(&mut grad)
                .and(&cache.pre_activations[i])
                .for_each(|g, &z| *g *= act.derivative(z));
            weight_grads[i] = cache.inputs[i].t().dot(&grad);
            grad = grad.dot(&layer.weights.t());
        }
        Ok(Gradients {
            weights: weight_grads,
            input: grad,
        })
    }
}

/// `y' = y + α·r` with `r` uniform on `[0, 1)`, drawn row by row.
///
/// Returns `(y', r)`.
pub fn noise_inject<R: Rng + ?Sized>(
    y: ArrayView2<f64>,
    alpha: f64,
    rng: &mut R,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    let r = Array2::from_shape_simple_fn(y.dim(), || rng.gen::<f64>());
    let y_prime = &y + &(&r * alpha);
    Ok((y_prime, r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    GradientDescent,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: step count and, for Adam, first and second moments.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    steps: u64,
    first_moment: Vec<Array2<f64>>,
    second_moment: Vec<Array2<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            steps: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every layer of `net`.
    pub fn step(&mut self, net: &mut Network, grads: &[Array2<f64>]) -> Result<()> {
        let mut params: Vec<&mut Array2<f64>> = net.layers.iter_mut().map(|l| &mut l.weights).collect();
        self.step_params(&mut params, grads)
    }

    /// Applies one update to an explicit list of weight matrices.
    pub fn step_params(&mut self, params: &mut [&mut Array2<f64>], grads: &[Array2<f64>]) -> Result<()> {
        if grads.len() != params.len() || grads.iter().zip(params.iter()).any(|(g, p)| g.dim() != p.dim()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", params.iter().map(|p| p.dim()).collect::<Vec<_>>()),
                actual: format!("{:?}", grads.iter().map(|g| g.dim()).collect::<Vec<_>>()),
            });
        }
        self.steps += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::GradientDescent => {
                for (w, g) in params.iter_mut().zip(grads) {
                    w.scaled_add(-lr, g);
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                if self.first_moment.is_empty() {
                    self.first_moment = grads.iter().map(|g| Array2::zeros(g.dim())).collect();
                    self.second_moment = grads.iter().map(|g| Array2::zeros(g.dim())).collect();
                }
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((w, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                {
                    Zip::from(&mut **w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    });
                }
            }
        }
        Ok(())
    }
}

/// Denominator floor for [`relative_error`]; gradients smaller than this are
/// compared in absolute terms.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares analytic weight gradients against central finite differences
/// over every weight of `net` and returns the largest relative error.
///
/// `loss_and_grad` must return the scalar loss and its analytic gradient
/// for the network it is given.
pub fn gradient_check<F>(net: &Network, step: f64, loss_and_grad: F) -> Result<f64>
where
    F: Fn(&Network) -> Result<(f64, Vec<Array2<f64>>)>,
{
    let (_, analytic) = loss_and_grad(net)?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (li, grad) in analytic.iter().enumerate() {
        for ((i, j), &a) in grad.indexed_iter() {
            let original = probe.layers[li].weights[[i, j]];
            probe.layers[li].weights[[i, j]] = original + step;
            let (up, _) = loss_and_grad(&probe)?;
            probe.layers[li].weights[[i, j]] = original - step;
            let (down, _) = loss_and_grad(&probe)?;
            probe.layers[li].weights[[i, j]] = original;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use ndarray::{array, Axis};

    fn random_net(dims_chain: &[usize], acts: &[Activation], seed: u64) -> Network {
        let mut rng = rng_from_seed(seed);
        let layers = dims_chain
            .windows(2)
            .zip(acts)
            .map(|(d, &a)| DenseLayer::glorot(d[0], d[1], a, &mut rng))
            .collect();
        Network::new(layers).unwrap()
    }

    fn squared_loss(net: &Network, x: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Vec<Array2<f64>>)> {
        let (out, cache) = net.forward(x.view())?;
        let diff = &out - target;
        let count = diff.len() as f64;
        let loss = diff.mapv(|d| d * d).sum() / count;
        let grad = diff * (2.0 / count);
        Ok((loss, net.backward(&cache, grad.view())?.weights))
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        for act in Activation::ALL {
            for z in [-2.3, -0.4, 0.7, 1.9] {
                let h = 1e-6;
                let fd = (act.value(z + h) - act.value(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-8, "{act} at {z}");
            }
            assert_eq!(act.name().parse::<Activation>().unwrap(), act);
        }
        assert!("relu6".parse::<Activation>().is_err());
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = Network::new(vec![DenseLayer::new(Array2::eye(3), Activation::Linear)]).unwrap();
        let x = array![[0.2, -1.0, 3.5]];
        assert_eq!(net.predict(x.view()).unwrap(), x);
    }

    #[test]
    fn forward_is_pure() {
        let net = random_net(&[4, 5, 3], &[Activation::Tanh, Activation::Sigmoid], 1);
        let x = array![[0.1, 0.2, 0.3, 0.4], [1.0, 0.0, -1.0, 0.5]];
        let (a, _) = net.forward(x.view()).unwrap();
        let (b, _) = net.forward(x.view()).unwrap();
        assert_eq!(a, b);
        assert_eq!(net.predict(x.view()).unwrap(), a);
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut rng = rng_from_seed(0);
        let bad = vec![
            DenseLayer::glorot(3, 4, Activation::Tanh, &mut rng),
            DenseLayer::glorot(5, 2, Activation::Tanh, &mut rng),
        ];
        assert!(Network::new(bad).is_err());
        assert!(Network::new(vec![]).is_err());
        let net = random_net(&[3, 2], &[Activation::Linear], 0);
        assert!(net.forward(array![[1.0, 2.0]].view()).is_err());
        let (_, cache) = net.forward(array![[1.0, 2.0, 3.0]].view()).unwrap();
        assert!(net.backward(&cache, array![[1.0, 2.0, 3.0]].view()).is_err());
    }

    #[test]
    fn single_linear_layer_closed_form_gradient() {
        let net = random_net(&[3, 4], &[Activation::Linear], 5);
        let x = array![[0.5, -0.2, 0.9]];
        let target = array![[0.1, 0.2, 0.3, 0.4]];
        let (out, cache) = net.forward(x.view()).unwrap();
        let c = 4.0;
        let grad_out = (&out - &target) * (2.0 / c);
        let grads = net.backward(&cache, grad_out.view()).unwrap();
        let expected = x.t().dot(&(&out - &target)) * (2.0 / c);
        for (a, b) in grads.weights[0].iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_weight_gradients() {
        let net = random_net(&[3, 4, 2], &[Activation::Tanh, Activation::Sigmoid], 2);
        let x = array![[0.5, -0.2, 0.9]];
        let (_, cache) = net.forward(x.view()).unwrap();
        let grads = net.backward(&cache, Array2::zeros((1, 2)).view()).unwrap();
        assert!(grads.weights.iter().all(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn gradient_check_each_activation() {
        let mut rng = rng_from_seed(77);
        let x = Array2::from_shape_simple_fn((4, 5), || rng.gen_range(-1.0..1.0));
        let target = Array2::from_shape_simple_fn((4, 3), || rng.gen_range(0.0..1.0));
        for (seed, act) in Activation::ALL.into_iter().enumerate() {
            let net = random_net(&[5, 6, 4, 3], &[act, act, act], seed as u64 + 10);
            let err = gradient_check(&net, 1e-5, |n| squared_loss(n, &x, &target)).unwrap();
            assert!(err < 1e-4, "{act}: {err}");
        }
    }

    #[test]
    fn gradient_descent_step_on_quadratic() {
        // loss = w², gradient 2w
        let mut net = Network::new(vec![DenseLayer::new(array![[1.0]], Activation::Linear)]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::GradientDescent, 0.1);
        let g = net.layers()[0].weights.mapv(|w| 2.0 * w);
        opt.step(&mut net, &[g]).unwrap();
        assert!((net.layers()[0].weights[[0, 0]] - 0.8).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let mut net = random_net(&[3, 3], &[Activation::Tanh], 4);
        let before = net.clone();
        let grads = vec![Array2::from_elem((3, 3), 0.7)];
        for kind in [OptimizerKind::GradientDescent, OptimizerKind::adam()] {
            let mut opt = Optimizer::new(kind, 0.0);
            opt.step(&mut net, &grads).unwrap();
            assert_eq!(net, before);
        }
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.1);
        assert!(opt.step(&mut net, &[Array2::zeros((2, 2))]).is_err());
    }

    #[test]
    fn gradient_descent_decreases_least_squares_loss() {
        let mut rng = rng_from_seed(31);
        let x = Array2::from_shape_simple_fn((20, 2), || rng.gen_range(-1.0..1.0));
        let true_w = array![[1.5], [-0.7]];
        let target = x.dot(&true_w);
        let mut net = Network::new(vec![DenseLayer::new(Array2::zeros((2, 1)), Activation::Linear)]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::GradientDescent, 0.05);
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let (loss, grads) = squared_loss(&net, &x, &target).unwrap();
            assert!(loss <= prev);
            prev = loss;
            opt.step(&mut net, &grads).unwrap();
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn adam_fits_small_regression() {
        let mut rng = rng_from_seed(32);
        let x = Array2::from_shape_simple_fn((32, 3), || rng.gen_range(-1.0..1.0));
        let target = x.mapv(|v: f64| v.sin()).sum_axis(Axis(1)).insert_axis(Axis(1)) * 0.3;
        let mut net = random_net(&[3, 8, 1], &[Activation::Tanh, Activation::Linear], 3);
        let mut opt = Optimizer::new(OptimizerKind::adam(), 1e-2);
        let (initial, _) = squared_loss(&net, &x, &target).unwrap();
        for _ in 0..300 {
            let (_, grads) = squared_loss(&net, &x, &target).unwrap();
            opt.step(&mut net, &grads).unwrap();
        }
        let (last, _) = squared_loss(&net, &x, &target).unwrap();
        assert!(last < initial * 0.1, "{initial} -> {last}");
    }

    #[test]
    fn noise_injection() {
        let y = array![[0.3, 0.6, 0.9]];
        let (same, _) = noise_inject(y.view(), 0.0, &mut rng_from_seed(1)).unwrap();
        assert_eq!(same, y);

        let zeros = Array2::zeros((2, 5));
        let (y_prime, r) = noise_inject(zeros.view(), 1.0, &mut rng_from_seed(1)).unwrap();
        assert_eq!(y_prime, r);
        assert!(r.iter().all(|&v| (0.0..1.0).contains(&v)));

        let (a, _) = noise_inject(y.view(), 0.5, &mut rng_from_seed(9)).unwrap();
        let (b, _) = noise_inject(y.view(), 0.5, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        assert!(noise_inject(y.view(), -0.1, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn noise_mean_is_half_alpha() {
        let zeros = Array2::zeros((1000, 100));
        let (y_prime, _) = noise_inject(zeros.view(), 0.4, &mut rng_from_seed(123)).unwrap();
        let mean = y_prime.mean().unwrap();
        assert!((mean - 0.2).abs() < 0.01, "{mean}");
    }

    #[test]
    fn gf2_mode_requires_linear_binary_weights() {
        let net = random_net(&[2, 2], &[Activation::Tanh], 0);
        assert!(net.forward_gf2(&[1, 0]).is_err());
        let net = Network::new(vec![DenseLayer::new(array![[0.5, 1.0], [1.0, 0.0]], Activation::Linear)]).unwrap();
        assert!(net.forward_gf2(&[1, 0]).is_err());
        let id = BitMatrix::identity(3);
        let net = Network::new(vec![DenseLayer::from_bits(&id), DenseLayer::from_bits(&id)]).unwrap();
        assert_eq!(net.forward_gf2(&[1, 0, 1]).unwrap(), vec![1, 0, 1]);
    }
}
