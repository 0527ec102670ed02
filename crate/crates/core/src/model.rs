//! The neural cipher: a six-layer no-bias autoencoder shaped like the
//! McEliece factor chain.
//!
//! ```text
//!   x (c) ─S→ c ─G→ n ─P→ y (n)     encrypt stack (public)
//!   y' = y + α·r,  r ~ U[0,1)ⁿ      ciphertext
//!   y' (n) ─L→ n ─M→ c ─N→ o (c)    decrypt stack (private)
//! ```
//!
//! Training minimizes, per sample, `θ(y') + (1/c)·Σ (o_i − x_i)²`, where
//! `θ` is the chi-squared CDF of the ciphertext histogram (see
//! [`crate::unistat`]). The histogram is smoothed during training so `θ`
//! has a gradient; evaluation uses hard bins.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::hamming::HammingCode;
use crate::mceliece::PrivateKey;
use crate::nn::{noise_inject, Activation, DenseLayer, Network, Optimizer, OptimizerKind};
use crate::unistat;
use crate::rng_from_seed;

/// Layers per stack.
const STACK_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PqcnnConfig {
    /// Plaintext dimension.
    pub c: usize,
    /// Ciphertext dimension.
    pub n: usize,
    /// Histogram bin count; must be below `n`.
    pub m: usize,
    pub alpha: f64,
    /// Activations for S, G, P, L, M, N in that order.
    pub activations: [Activation; 6],
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Soft-histogram bandwidth used while training.
    pub bandwidth: f64,
    /// Weight on the θ term; 0 gives a plain noisy autoencoder.
    pub theta_weight: f64,
    /// Share of the training rows held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for PqcnnConfig {
    fn default() -> Self {
        Self {
            c: 361,
            n: 64,
            m: 16,
            alpha: 0.4,
            activations: [
                Activation::Tanh,
                Activation::Tanh,
                Activation::Sigmoid,
                Activation::Tanh,
                Activation::Tanh,
                Activation::Linear,
            ],
            epochs: 500,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::adam(),
            bandwidth: 0.02,
            theta_weight: 1.0,
            validation_fraction: 0.1,
            seed: 42,
        }
    }
}

impl PqcnnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.c < 2 || self.n < 2 {
            return fail(format!("c and n must be at least 2 (c={}, n={})", self.c, self.n));
        }
        if self.m < 2 || self.m >= self.n {
            return fail(format!("bin count m={} must satisfy 2 <= m < n={}", self.m, self.n));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if !(self.bandwidth > 0.0) {
            return fail(format!("bandwidth must be positive, got {}", self.bandwidth));
        }
        if !(self.learning_rate >= 0.0) || !(self.theta_weight >= 0.0) {
            return fail("learning rate and theta weight must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return fail(format!(
                "validation fraction must be in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        Ok(())
    }

    pub fn encrypt_activations(&self) -> [Activation; 3] {
        [self.activations[0], self.activations[1], self.activations[2]]
    }

    pub fn decrypt_activations(&self) -> [Activation; 3] {
        [self.activations[3], self.activations[4], self.activations[5]]
    }
}

/// How θ is computed from a ciphertext.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMode {
    /// Smoothed bins with the given bandwidth (training).
    Soft(f64),
    /// Hard bins (evaluation).
    Hard,
}

/// θ of one ciphertext vector.
pub fn theta(y_prime: &[f64], m: usize, mode: ThetaMode) -> Result<f64> {
    match mode {
        ThetaMode::Hard => Ok(unistat::uniformity_report(y_prime, m)?.theta),
        ThetaMode::Soft(bw) => Ok(unistat::soft_theta(y_prime, m, bw)?.theta),
    }
}

/// `θ(y') + (1/c)·Σ (o_i − x_i)²` for one sample.
pub fn loss(output: &[f64], input: &[f64], y_prime: &[f64], m: usize, mode: ThetaMode) -> Result<f64> {
    if output.len() != input.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} outputs", input.len()),
            actual: format!("{}", output.len()),
        });
    }
    Ok(theta(y_prime, m, mode)? + mse(output, input))
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Public half: the encrypt stack and the noise weight.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptKey {
    pub network: Network,
    pub alpha: f64,
    pub m: usize,
}

/// Private half: the decrypt stack.
#[derive(Debug, Clone, PartialEq)]
pub struct DecryptKey {
    pub network: Network,
    pub alpha: f64,
    pub m: usize,
}

fn check_stack(network: &Network, from: usize, to: usize) -> Result<()> {
    if network.layers().len() != STACK_DEPTH {
        return Err(Error::InvalidArgument(format!(
            "a key stack has {STACK_DEPTH} layers, got {}",
            network.layers().len()
        )));
    }
    if network.in_dim() != from || network.out_dim() != to {
        return Err(Error::DimensionMismatch {
            expected: format!("{from}->{to}"),
            actual: format!("{}->{}", network.in_dim(), network.out_dim()),
        });
    }
    Ok(())
}

fn single_row(v: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((1, v.len()), v).expect("one row")
}

impl EncryptKey {
    pub fn new(network: Network, alpha: f64, m: usize) -> Result<Self> {
        let c = network.in_dim();
        check_stack(&network, c, network.out_dim())?;
        Ok(Self { network, alpha, m })
    }

    pub fn c(&self) -> usize {
        self.network.in_dim()
    }

    pub fn n(&self) -> usize {
        self.network.out_dim()
    }

    /// Forward through the stack, then add `α·r`. Returns `(y', r)`.
    pub fn encrypt<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        let (y, r) = self.encrypt_batch(single_row(x), rng)?;
        Ok((y.into_raw_vec_and_offset().0, r.into_raw_vec_and_offset().0))
    }

    /// Row-wise [`EncryptKey::encrypt`]; noise is drawn row by row.
    pub fn encrypt_batch<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let y = self.network.predict(x)?;
        noise_inject(y.view(), self.alpha, rng)
    }
}

impl DecryptKey {
    pub fn new(network: Network, alpha: f64, m: usize) -> Result<Self> {
        check_stack(&network, network.in_dim(), network.out_dim())?;
        Ok(Self { network, alpha, m })
    }

    pub fn c(&self) -> usize {
        self.network.out_dim()
    }

    pub fn n(&self) -> usize {
        self.network.in_dim()
    }

    pub fn decrypt(&self, y_prime: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decrypt_batch(single_row(y_prime))?.into_raw_vec_and_offset().0)
    }

    pub fn decrypt_batch(&self, y_prime: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.network.predict(y_prime)
    }
}

/// Encrypt and decrypt stacks trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct PqcnnModel {
    encrypt: Network,
    decrypt: Network,
    alpha: f64,
    m: usize,
}

/// Per-batch loss terms and the gradient for all six layers.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub loss: f64,
    pub mse: f64,
    pub theta: f64,
    pub grads: Vec<Array2<f64>>,
}

impl PqcnnModel {
    /// Glorot-initialized model with the c→c→n→n→n→c→c shape chain.
    pub fn build<R: Rng + ?Sized>(config: &PqcnnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (c, n) = (config.c, config.n);
        let shapes = [(c, c), (c, n), (n, n), (n, n), (n, c), (c, c)];
        let mut layers: Vec<DenseLayer> = shapes
            .iter()
            .zip(config.activations)
            .map(|(&(i, o), act)| DenseLayer::glorot(i, o, act, rng))
            .collect();
        let decrypt = Network::new(layers.split_off(STACK_DEPTH))?;
        let encrypt = Network::new(layers)?;
        Ok(Self {
            encrypt,
            decrypt,
            alpha: config.alpha,
            m: config.m,
        })
    }

    pub fn from_stacks(encrypt: Network, decrypt: Network, alpha: f64, m: usize) -> Result<Self> {
        let (c, n) = (encrypt.in_dim(), encrypt.out_dim());
        check_stack(&encrypt, c, n)?;
        check_stack(&decrypt, n, c)?;
        Ok(Self {
            encrypt,
            decrypt,
            alpha,
            m,
        })
    }

    pub fn from_keys(ek: EncryptKey, dk: DecryptKey) -> Result<Self> {
        Self::from_stacks(ek.network, dk.network, ek.alpha, ek.m)
    }

    /// All six layers as one network (noise is not part of it).
    pub fn to_network(&self) -> Network {
        let layers = self
            .encrypt
            .layers()
            .iter()
            .chain(self.decrypt.layers())
            .cloned()
            .collect();
        Network::new(layers).expect("stacks chain")
    }

    /// Inverse of [`PqcnnModel::to_network`].
    pub fn from_network(network: &Network, alpha: f64, m: usize) -> Result<Self> {
        if network.layers().len() != 2 * STACK_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "expected {} layers, got {}",
                2 * STACK_DEPTH,
                network.layers().len()
            )));
        }
        let (enc, dec) = network.layers().split_at(STACK_DEPTH);
        Self::from_stacks(Network::new(enc.to_vec())?, Network::new(dec.to_vec())?, alpha, m)
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut s = self.encrypt.shapes();
        s.extend(self.decrypt.shapes());
        s
    }

    pub fn c(&self) -> usize {
        self.encrypt.in_dim()
    }

    pub fn n(&self) -> usize {
        self.encrypt.out_dim()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn encrypt_network(&self) -> &Network {
        &self.encrypt
    }

    pub fn decrypt_network(&self) -> &Network {
        &self.decrypt
    }

    pub fn encrypt_key(&self) -> EncryptKey {
        EncryptKey {
            network: self.encrypt.clone(),
            alpha: self.alpha,
            m: self.m,
        }
    }

    pub fn decrypt_key(&self) -> DecryptKey {
        DecryptKey {
            network: self.decrypt.clone(),
            alpha: self.alpha,
            m: self.m,
        }
    }

    /// Batch-mean composite loss with a fixed noise draw `r`, and its exact
    /// gradient wrt all six weight matrices.
    pub fn batch_loss(
        &self,
        x: ArrayView2<f64>,
        r: ArrayView2<f64>,
        theta_weight: f64,
        bandwidth: f64,
    ) -> Result<BatchLoss> {
        let batch = x.nrows();
        if r.dim() != (batch, self.n()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{batch}x{}", self.n()),
                actual: format!("{}x{}", r.nrows(), r.ncols()),
            });
        }
        let (y, enc_cache) = self.encrypt.forward(x)?;
        let y_prime = &y + &(&r * self.alpha);
        let (out, dec_cache) = self.decrypt.forward(y_prime.view())?;

        let c = self.c() as f64;
        let scale = 1.0 / batch as f64;
        let diff = &out - &x;
        let mse = diff.mapv(|d| d * d).sum() / c * scale;
        let grad_out = diff * (2.0 / c * scale);
        let dec_grads = self.decrypt.backward(&dec_cache, grad_out.view())?;

        let mut grad_y = dec_grads.input;
        let mut theta_sum = 0.0;
        for (i, row) in y_prime.axis_iter(Axis(0)).enumerate() {
            let values = row.to_vec();
            let st = unistat::soft_theta(&values, self.m, bandwidth)?;
            theta_sum += st.theta;
            if theta_weight != 0.0 {
                for (g, sg) in grad_y.row_mut(i).iter_mut().zip(&st.grad) {
                    *g += theta_weight * scale * sg;
                }
            }
        }
        let theta = theta_sum * scale;
        let enc_grads = self.encrypt.backward(&enc_cache, grad_y.view())?;

        let mut grads = enc_grads.weights;
        grads.extend(dec_grads.weights);
        Ok(BatchLoss {
            loss: theta_weight * theta + mse,
            mse,
            theta,
            grads,
        })
    }

    fn apply_step(&mut self, optimizer: &mut Optimizer, grads: Vec<Array2<f64>>) -> Result<()> {
        let mut params: Vec<&mut Array2<f64>> = self
            .encrypt
            .layers_mut()
            .iter_mut()
            .chain(self.decrypt.layers_mut().iter_mut())
            .map(|l| &mut l.weights)
            .collect();
        optimizer.step_params(&mut params, &grads)
    }
}

/// One epoch of training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_mse: f64,
    pub train_theta: f64,
    pub val_loss: f64,
    pub val_mse: f64,
    /// Hard-histogram θ of the validation ciphertexts.
    pub val_theta: f64,
    /// Lowest validation loss seen so far.
    pub best_val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub model: PqcnnModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Validation reconstruction MSE of the returned model.
    pub validation_mse: f64,
}

/// Trains a freshly built model on `dataset`.
///
/// All randomness (initialization, split, shuffling, noise) comes from one
/// generator seeded with `config.seed`. Validation noise is drawn once and
/// reused every epoch so validation losses are comparable.
pub fn train(config: &PqcnnConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dataset.c() != config.c {
        return Err(Error::DimensionMismatch {
            expected: format!("dataset with c={} features", config.c),
            actual: format!("c={}", dataset.c()),
        });
    }
    let mut rng = rng_from_seed(config.seed);
    let mut model = PqcnnModel::build(config, &mut rng)?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let val_count = ((dataset.len() as f64) * config.validation_fraction).round() as usize;
    let val_count = val_count.min(dataset.len() - 1);
    let (val_idx, train_idx) = order.split_at(val_count);
    let train_rows = dataset.rows().select(Axis(0), train_idx);
    // With no validation share, the training rows double as validation rows.
    let val_rows = if val_count == 0 {
        train_rows.clone()
    } else {
        dataset.rows().select(Axis(0), val_idx)
    };
    let val_noise = Array2::from_shape_simple_fn((val_rows.nrows(), config.n), || rng.gen::<f64>());

    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    let (mut best_loss, mut best_mse) =
        validation_metrics(&model, &val_rows, &val_noise, config)?.map_loss_mse();
    let mut best_model = model.clone();
    let mut best_epoch = 0;

    let mut indices: Vec<usize> = (0..train_rows.nrows()).collect();
    for epoch in 1..=config.epochs {
        indices.shuffle(&mut rng);
        let (mut loss_sum, mut mse_sum, mut theta_sum) = (0.0, 0.0, 0.0);
        for chunk in indices.chunks(config.batch_size) {
            let x = train_rows.select(Axis(0), chunk);
            let r = Array2::from_shape_simple_fn((chunk.len(), config.n), || rng.gen::<f64>());
            let b = model.batch_loss(x.view(), r.view(), config.theta_weight, config.bandwidth)?;
            let w = chunk.len() as f64;
            loss_sum += b.loss * w;
            mse_sum += b.mse * w;
            theta_sum += b.theta * w;
            model.apply_step(&mut optimizer, b.grads)?;
        }
        let count = indices.len() as f64;
        let val = validation_metrics(&model, &val_rows, &val_noise, config)?;
        if val.loss < best_loss {
            best_loss = val.loss;
            best_mse = val.mse;
            best_model = model.clone();
            best_epoch = epoch;
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / count,
            train_mse: mse_sum / count,
            train_theta: theta_sum / count,
            val_loss: val.loss,
            val_mse: val.mse,
            val_theta: val.hard_theta,
            best_val_loss: best_loss,
        });
    }

    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
        validation_mse: best_mse,
    })
}

struct ValidationMetrics {
    loss: f64,
    mse: f64,
    hard_theta: f64,
}

impl ValidationMetrics {
    fn map_loss_mse(&self) -> (f64, f64) {
        (self.loss, self.mse)
    }
}

fn validation_metrics(
    model: &PqcnnModel,
    rows: &Array2<f64>,
    noise: &Array2<f64>,
    config: &PqcnnConfig,
) -> Result<ValidationMetrics> {
    let y = model.encrypt.predict(rows.view())?;
    let y_prime = &y + &(noise * model.alpha);
    let out = model.decrypt.predict(y_prime.view())?;
    let count = rows.nrows() as f64;
    let mse = (&out - rows).mapv(|d| d * d).sum() / config.c as f64 / count;
    let (mut soft, mut hard) = (0.0, 0.0);
    for row in y_prime.axis_iter(Axis(0)) {
        let v = row.to_vec();
        soft += theta(&v, config.m, ThetaMode::Soft(config.bandwidth))?;
        hard += theta(&v, config.m, ThetaMode::Hard)?;
    }
    Ok(ValidationMetrics {
        loss: config.theta_weight * soft / count + mse,
        mse,
        hard_theta: hard / count,
    })
}

/// One line of an α sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    /// Mean reconstruction MSE.
    pub mse: f64,
    /// Mean hard θ of the injected perturbations `α·r`.
    pub theta_noise: f64,
    /// Mean hard θ of the ciphertexts `y'`.
    pub theta_ciphertext: f64,
}

/// Encrypts and decrypts every row with noise from `seed`, averaging the
/// reconstruction error and both θ values over rows.
///
/// With `α = 0` the perturbation is the zero vector, whose degenerate
/// normalization lands in a single bin and reads as non-uniform.
pub fn evaluate(model: &PqcnnModel, dataset: &Dataset, seed: u64) -> Result<SweepRow> {
    if dataset.c() != model.c() {
        return Err(Error::DimensionMismatch {
            expected: format!("dataset with c={} features", model.c()),
            actual: format!("c={}", dataset.c()),
        });
    }
    let mut rng = rng_from_seed(seed);
    let rows = dataset.rows();
    let (y_prime, r) = model.encrypt_key().encrypt_batch(rows.view(), &mut rng)?;
    let out = model.decrypt.predict(y_prime.view())?;
    let count = rows.nrows() as f64;
    let mse = (&out - rows).mapv(|d| d * d).sum() / model.c() as f64 / count;
    let (mut theta_noise, mut theta_ct) = (0.0, 0.0);
    for (yp, rr) in y_prime.axis_iter(Axis(0)).zip(r.axis_iter(Axis(0))) {
        let perturbation: Vec<f64> = rr.iter().map(|v| v * model.alpha).collect();
        theta_noise += theta(&perturbation, model.m, ThetaMode::Hard)?;
        theta_ct += theta(&yp.to_vec(), model.m, ThetaMode::Hard)?;
    }
    Ok(SweepRow {
        alpha: model.alpha,
        mse,
        theta_noise: theta_noise / count,
        theta_ciphertext: theta_ct / count,
    })
}

/// Held-out share of the data used by [`alpha_sweep`] for evaluation.
pub const SWEEP_HOLDOUT_FRACTION: f64 = 0.1;

/// Trains one model per α and evaluates each on the same held-out rows
/// with the same noise seed. Row `i` trains with seed `config.seed + i`.
pub fn alpha_sweep(config: &PqcnnConfig, dataset: &Dataset, alphas: &[f64]) -> Result<Vec<SweepRow>> {
    alpha_sweep_with(config, dataset, alphas, |_, _| {})
}

/// [`alpha_sweep`] with a callback invoked after each row completes.
pub fn alpha_sweep_with<F>(
    config: &PqcnnConfig,
    dataset: &Dataset,
    alphas: &[f64],
    mut on_row: F,
) -> Result<Vec<SweepRow>>
where
    F: FnMut(usize, &SweepRow),
{
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha list is empty".into()));
    }
    let holdout = ((dataset.len() as f64) * SWEEP_HOLDOUT_FRACTION).round().max(1.0) as usize;
    let (train_set, test_set) = dataset.split_tail(holdout)?;
    let mut rows = Vec::with_capacity(alphas.len());
    for (i, &alpha) in alphas.iter().enumerate() {
        let cfg = PqcnnConfig {
            alpha,
            seed: config.seed.wrapping_add(i as u64),
            ..config.clone()
        };
        let outcome = train(&cfg, &train_set)?;
        let row = evaluate(&outcome.model, &test_set, config.seed)?;
        on_row(i, &row);
        rows.push(row);
    }
    Ok(rows)
}

/// The linear 0/1 network of a Hamming code: `G` then `R`.
pub fn hamming_network(code: &HammingCode) -> Network {
    Network::new(vec![
        DenseLayer::from_bits(code.generator()),
        DenseLayer::from_bits(code.decoder()),
    ])
    .expect("G and R chain")
}

/// The linear 0/1 stacks of a McEliece key: `S, G, P` and `P⁻¹, R, S⁻¹`.
///
/// Evaluated with [`Network::forward_gf2`] these reproduce error-free
/// encryption and decryption exactly.
pub fn mceliece_network(sk: &PrivateKey) -> PqcnnModel {
    let bits = |m: &BitMatrix| DenseLayer::from_bits(m);
    let encrypt = Network::new(vec![bits(sk.s()), bits(sk.code().generator()), bits(sk.p())])
        .expect("S, G, P chain");
    let decrypt = Network::new(vec![bits(sk.p_inv()), bits(sk.code().decoder()), bits(sk.s_inv())])
        .expect("P^-1, R, S^-1 chain");
    PqcnnModel::from_stacks(encrypt, decrypt, 0.0, 2).expect("McEliece stacks chain")
}

/// Reconstruction MSE of each row of `out` against the matching row of `x`.
pub fn row_mse(out: &Array2<f64>, x: &Array2<f64>) -> Vec<f64> {
    out.axis_iter(Axis(0))
        .zip(x.axis_iter(Axis(0)))
        .map(|(o, t)| o.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / o.len() as f64)
        .collect()
}
