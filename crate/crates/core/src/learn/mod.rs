//! A small trainable image-to-image regressor: a same-resolution stack of
//! 3x3 convolutions with ReLU activations, an identity output layer, and an
//! optional residual connection from input channel 0.
//!
//! Training is ADAM on full-image MSE with one image per step, dihedral
//! augmentation, a validation split, and early stopping on validation loss.
//! Everything is deterministic under the config seed. The final layer is
//! zero-initialized, so a freshly built residual model is the exact
//! identity on channel 0.

pub mod conv;

use std::path::Path;
use std::time::Instant;

use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use conv::{conv2d_backward, conv2d_forward, relu_backward, relu_forward, KERNEL};

const MODEL_MAGIC: &[u8; 8] = b"TOMOCLN1";
const MODEL_VERSION: u32 = 1;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Architecture of one regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub in_channels: usize,
    /// Number of ReLU convolution layers before the output layer.
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Add input channel 0 to the output.
    pub residual: bool,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        RegressorSpec {
            in_channels: 1,
            hidden_layers: 4,
            hidden_width: 16,
            residual: true,
        }
    }
}

impl RegressorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.in_channels > 3 {
            return Err(Error::validation(format!(
                "regressor: in_channels {} outside 1..=3",
                self.in_channels
            )));
        }
        if self.hidden_layers == 0 {
            return Err(Error::validation(
                "regressor: need at least one hidden layer".to_string(),
            ));
        }
        if self.hidden_width == 0 {
            return Err(Error::validation("regressor: hidden_width is 0".to_string()));
        }
        Ok(())
    }

    /// Channel counts of every convolution layer, input to output.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let w = self.hidden_width;
        let mut dims = vec![(self.in_channels, w)];
        for _ in 1..self.hidden_layers {
            dims.push((w, w));
        }
        dims.push((w, 1));
        dims
    }

    /// Closed-form trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(ci, co)| (KERNEL * KERNEL * ci + 1) * co)
            .sum()
    }
}

#[derive(Debug, Clone)]
struct Layer {
    weights: Array4<f64>,
    biases: Vec<f64>,
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Weights, architecture, and normalization statistics of one regressor.
#[derive(Debug, Clone)]
pub struct RegressorModel {
    spec: RegressorSpec,
    layers: Vec<Layer>,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    history: Vec<EpochStats>,
}

impl RegressorModel {
    /// Kaiming-style scaled-normal init for hidden layers, zeros for the
    /// output layer.
    pub fn init(spec: RegressorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = Rng::new(seed);
        let dims = spec.layer_dims();
        let last = dims.len() - 1;
        let mut layers = Vec::with_capacity(dims.len());
        for (i, &(ci, co)) in dims.iter().enumerate() {
            let mut weights = Array4::zeros((co, ci, KERNEL, KERNEL));
            if i != last {
                let std = (2.0 / (KERNEL * KERNEL * ci) as f64).sqrt();
                for w in weights.iter_mut() {
                    *w = rng.normal(0.0, std)?;
                }
            }
            layers.push(Layer {
                weights,
                biases: vec![0.0; co],
            });
        }
        Ok(RegressorModel {
            spec,
            layers,
            input_mean: vec![0.0; spec.in_channels],
            input_std: vec![1.0; spec.in_channels],
            history: Vec::new(),
        })
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    pub fn input_stats(&self) -> (&[f64], &[f64]) {
        (&self.input_mean, &self.input_std)
    }

    pub fn parameter_count(&self) -> usize {
        self.spec.parameter_count()
    }

    fn normalize(&self, input: &Array3<f64>) -> Array3<f64> {
        let mut out = input.clone();
        for (c, mut chan) in out.outer_iter_mut().enumerate() {
            let (m, s) = (self.input_mean[c], self.input_std[c]);
            chan.mapv_inplace(|v| (v - m) / s);
        }
        out
    }

    /// Forward pass in normalized space.
    fn forward_normalized(&self, xn: &Array3<f64>) -> Result<Array3<f64>> {
        let mut h = xn.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = conv2d_forward(&h, &layer.weights, &layer.biases)?;
            if i != last {
                relu_forward(&mut h);
            }
        }
        if self.spec.residual {
            let (_, hh, ww) = xn.dim();
            for y in 0..hh {
                for x in 0..ww {
                    h[[0, y, x]] += xn[[0, y, x]];
                }
            }
        }
        Ok(h)
    }
}

/// Runs the regressor on one image stack: normalize, forward, denormalize
/// with channel-0 statistics.
pub fn predict(model: &RegressorModel, input: &Array3<f64>) -> Result<Array3<f64>> {
    let (c, h, w) = input.dim();
    if c != model.spec.in_channels {
        return Err(Error::validation(format!(
            "predict: {c} channels, model expects {}",
            model.spec.in_channels
        )));
    }
    if h < 2 || w < 2 {
        return Err(Error::validation(format!("predict: image {h}x{w} too small")));
    }
    let xn = model.normalize(input);
    let yn = model.forward_normalized(&xn)?;
    let (m0, s0) = (model.input_mean[0], model.input_std[0]);
    Ok(yn.mapv(|v| m0 + s0 * v))
}

/// Dihedral operation: optional horizontal flip followed by `rot90`
/// quarter-turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DihedralOp {
    pub rot90: u8,
    pub hflip: bool,
}

pub const IDENTITY_OP: DihedralOp = DihedralOp {
    rot90: 0,
    hflip: false,
};

impl DihedralOp {
    /// Group composition: `self` after `other`.
    fn compose(self, other: DihedralOp) -> DihedralOp {
        let k2 = if self.hflip {
            (4 - other.rot90) % 4
        } else {
            other.rot90
        };
        DihedralOp {
            rot90: (self.rot90 + k2) % 4,
            hflip: self.hflip ^ other.hflip,
        }
    }
}

/// Augmentation toggles per the training protocol: flips everywhere,
/// quarter-turn rotations only for square stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentToggles {
    pub hflip: bool,
    pub vflip: bool,
    pub rot90: bool,
}

impl AugmentToggles {
    pub fn none() -> Self {
        AugmentToggles {
            hflip: false,
            vflip: false,
            rot90: false,
        }
    }

    pub fn flips_only() -> Self {
        AugmentToggles {
            hflip: true,
            vflip: true,
            rot90: false,
        }
    }

    pub fn all() -> Self {
        AugmentToggles {
            hflip: true,
            vflip: true,
            rot90: true,
        }
    }

    /// The subgroup of the 8 dihedral ops generated by the enabled toggles.
    pub fn allowed_ops(&self) -> Vec<DihedralOp> {
        let mut generators = vec![IDENTITY_OP];
        if self.hflip {
            generators.push(DihedralOp {
                rot90: 0,
                hflip: true,
            });
        }
        if self.vflip {
            // Vertical flip = rot180 after horizontal flip.
            generators.push(DihedralOp {
                rot90: 2,
                hflip: true,
            });
        }
        if self.rot90 {
            generators.push(DihedralOp {
                rot90: 1,
                hflip: false,
            });
        }
        let mut ops = generators.clone();
        loop {
            let mut added = false;
            let snapshot = ops.clone();
            for &a in &snapshot {
                for &b in &snapshot {
                    let c = a.compose(b);
                    if !ops.contains(&c) {
                        ops.push(c);
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
        ops
    }
}

fn rot90_once(img: &Array3<f64>) -> Array3<f64> {
    let (c, h, w) = img.dim();
    let mut out = Array3::zeros((c, w, h));
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[[ci, x, h - 1 - y]] = img[[ci, y, x]];
            }
        }
    }
    out
}

fn hflip(img: &Array3<f64>) -> Array3<f64> {
    let (c, h, w) = img.dim();
    let mut out = Array3::zeros((c, h, w));
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[[ci, y, w - 1 - x]] = img[[ci, y, x]];
            }
        }
    }
    out
}

fn apply_op(img: &Array3<f64>, op: DihedralOp) -> Result<Array3<f64>> {
    let (_, h, w) = img.dim();
    if op.rot90 % 2 == 1 && h != w {
        return Err(Error::validation(format!(
            "augment: rotation requested on non-square image {h}x{w}"
        )));
    }
    let mut out = if op.hflip { hflip(img) } else { img.clone() };
    for _ in 0..op.rot90 {
        out = rot90_once(&out);
    }
    Ok(out)
}

/// Applies the same dihedral transform to every input channel and the
/// target.
pub fn augment(
    input: &Array3<f64>,
    target: &Array3<f64>,
    op: DihedralOp,
) -> Result<(Array3<f64>, Array3<f64>)> {
    Ok((apply_op(input, op)?, apply_op(target, op)?))
}

/// Training protocol: ADAM on MSE, full-image batches of one, dihedral
/// augmentation, early stopping on validation loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Wall-clock training budget in seconds.
    pub wall_clock_budget_secs: f64,
    pub augment: AugmentToggles,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 1e-3,
            patience: 10,
            wall_clock_budget_secs: 600.0,
            augment: AugmentToggles::all(),
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("train: epochs must be >= 1".to_string()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::validation(format!(
                "train: learning_rate {} must be >= 0",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(Error::validation("train: patience must be >= 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::validation(format!(
                "train: validation_fraction {} outside [0, 1)",
                self.validation_fraction
            )));
        }
        if !(self.wall_clock_budget_secs > 0.0) {
            return Err(Error::validation(
                "train: wall_clock_budget_secs must be > 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// Why training ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    EpochBudget,
    Patience,
    WallClock,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped: StopReason,
}

struct AdamState {
    m_w: Vec<Array4<f64>>,
    v_w: Vec<Array4<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    fn new(layers: &[Layer]) -> Self {
        AdamState {
            m_w: layers.iter().map(|l| Array4::zeros(l.weights.dim())).collect(),
            v_w: layers.iter().map(|l| Array4::zeros(l.weights.dim())).collect(),
            m_b: layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_b: layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, layers: &mut [Layer], grads: &[(Array4<f64>, Vec<f64>)], lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for (i, layer) in layers.iter_mut().enumerate() {
            let (gw, gb) = &grads[i];
            for (((w, g), m), v) in layer
                .weights
                .iter_mut()
                .zip(gw.iter())
                .zip(self.m_w[i].iter_mut())
                .zip(self.v_w[i].iter_mut())
            {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
            }
            for (((b, g), m), v) in layer
                .biases
                .iter_mut()
                .zip(gb.iter())
                .zip(self.m_b[i].iter_mut())
                .zip(self.v_b[i].iter_mut())
            {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *b -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
            }
        }
    }
}

fn mse_of(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        sum += (x - y).powi(2);
    }
    sum / a.len() as f64
}

/// One forward/backward pass in normalized space; returns the loss and the
/// parameter gradients per layer.
fn train_step(
    model: &RegressorModel,
    xn: &Array3<f64>,
    tn: &Array3<f64>,
) -> Result<(f64, Vec<(Array4<f64>, Vec<f64>)>)> {
    let last = model.layers.len() - 1;
    // Forward with cached activations (inputs to each layer).
    let mut activations: Vec<Array3<f64>> = Vec::with_capacity(model.layers.len() + 1);
    activations.push(xn.clone());
    for (i, layer) in model.layers.iter().enumerate() {
        let mut h = conv2d_forward(activations.last().unwrap(), &layer.weights, &layer.biases)?;
        if i != last {
            relu_forward(&mut h);
        }
        activations.push(h);
    }
    let mut output = activations.last().unwrap().clone();
    if model.spec.residual {
        let (_, hh, ww) = xn.dim();
        for y in 0..hh {
            for x in 0..ww {
                output[[0, y, x]] += xn[[0, y, x]];
            }
        }
    }
    let loss = mse_of(&output, tn);

    // Backward.
    let numel = output.len() as f64;
    let mut grad = Array3::zeros(output.dim());
    for ((g, o), t) in grad.iter_mut().zip(output.iter()).zip(tn.iter()) {
        *g = 2.0 * (o - t) / numel;
    }
    let mut grads: Vec<(Array4<f64>, Vec<f64>)> = vec![Default::default(); model.layers.len()];
    for i in (0..model.layers.len()).rev() {
        let (gw, gb, gin) = conv2d_backward(&grad, &activations[i], &model.layers[i].weights)?;
        grads[i] = (gw, gb);
        if i > 0 {
            grad = gin;
            relu_backward(&mut grad, &activations[i]);
        }
    }
    Ok((loss, grads))
}

/// Trains in place: fits normalization statistics on the training split,
/// runs ADAM with augmentation, tracks the best-validation weights, and
/// restores them before returning. Deterministic under `config.seed`.
pub fn train(
    model: &mut RegressorModel,
    pairs: &[(Array3<f64>, Array3<f64>)],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if pairs.len() < 2 {
        return Err(Error::validation(format!(
            "train: need at least 2 pairs (1 train + 1 validation), got {}",
            pairs.len()
        )));
    }
    let c_in = model.spec.in_channels;
    for (i, (input, target)) in pairs.iter().enumerate() {
        let (ci, h, w) = input.dim();
        if ci != c_in {
            return Err(Error::validation(format!(
                "train: pair {i} has {ci} channels, model expects {c_in}"
            )));
        }
        if target.dim() != (1, h, w) {
            return Err(Error::validation(format!(
                "train: pair {i} target shape {:?} != (1, {h}, {w})",
                target.dim()
            )));
        }
    }
    let ops = config.augment.allowed_ops();
    if ops.iter().any(|op| op.rot90 % 2 == 1) {
        for (input, _) in pairs {
            let (_, h, w) = input.dim();
            if h != w {
                return Err(Error::validation(format!(
                    "train: rotation augmentation requires square images, got {h}x{w}"
                )));
            }
        }
    }

    let start = Instant::now();
    let mut rng = Rng::new(config.seed);

    // Deterministic validation split: shuffle, take the tail.
    let mut indices: Vec<usize> = (0..pairs.len()).collect();
    for i in (1..indices.len()).rev() {
        let j = rng.below((i + 1) as u64) as usize;
        indices.swap(i, j);
    }
    let n_val = ((pairs.len() as f64 * config.validation_fraction).round() as usize)
        .clamp(1, pairs.len() - 1);
    let (train_idx, val_idx) = indices.split_at(pairs.len() - n_val);
    let train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    // Normalization statistics from the training-split inputs.
    let mut mean = vec![0.0; c_in];
    let mut sq = vec![0.0; c_in];
    let mut count = 0usize;
    for &i in &train_idx {
        let input = &pairs[i].0;
        let (_, h, w) = input.dim();
        count += h * w;
        for c in 0..c_in {
            for v in input.index_axis(ndarray::Axis(0), c).iter() {
                mean[c] += v;
                sq[c] += v * v;
            }
        }
    }
    for c in 0..c_in {
        mean[c] /= count as f64;
        let var = (sq[c] / count as f64 - mean[c] * mean[c]).max(0.0);
        let std = var.sqrt();
        model.input_std[c] = if std > 0.0 { std } else { 1.0 };
        model.input_mean[c] = mean[c];
    }

    let normalize_target = |t: &Array3<f64>, m: &RegressorModel| -> Array3<f64> {
        let (m0, s0) = (m.input_mean[0], m.input_std[0]);
        t.mapv(|v| (v - m0) / s0)
    };

    let mut adam = AdamState::new(&model.layers);
    model.history.clear();

    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_layers = model.layers.clone();
    let mut order = train_idx.clone();
    let mut stopped = StopReason::EpochBudget;
    let mut epochs_run = 0usize;

    for epoch in 1..=config.epochs {
        // Shuffle training order.
        for i in (1..order.len()).rev() {
            let j = rng.below((i + 1) as u64) as usize;
            order.swap(i, j);
        }
        let mut train_loss = 0.0;
        for &idx in &order {
            let op = ops[rng.below(ops.len() as u64) as usize];
            let (input, target) = augment(&pairs[idx].0, &pairs[idx].1, op)?;
            let xn = model.normalize(&input);
            let tn = normalize_target(&target, model);
            let (loss, grads) = train_step(model, &xn, &tn)?;
            train_loss += loss;
            adam.update(&mut model.layers, &grads, config.learning_rate);
        }
        train_loss /= order.len() as f64;

        let mut val_loss = 0.0;
        for &idx in &val_idx {
            let xn = model.normalize(&pairs[idx].0);
            let tn = normalize_target(&pairs[idx].1, model);
            let yn = model.forward_normalized(&xn)?;
            val_loss += mse_of(&yn, &tn);
        }
        val_loss /= val_idx.len() as f64;

        model.history.push(EpochStats {
            train_loss,
            val_loss,
        });
        epochs_run = epoch;

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_layers = model.layers.clone();
        } else if epoch - best_epoch >= config.patience {
            stopped = StopReason::Patience;
            break;
        }
        if start.elapsed().as_secs_f64() >= config.wall_clock_budget_secs {
            stopped = StopReason::WallClock;
            break;
        }
    }

    model.layers = best_layers;
    Ok(TrainReport {
        epochs_run,
        best_epoch,
        best_val_loss: best_val,
        stopped,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    spec: RegressorSpec,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    history: Vec<(f64, f64)>,
}

/// Versioned binary checkpoint: magic, version, JSON header, then all
/// weights and biases as little-endian f64. Round-trips bit-exactly.
pub fn save_model(model: &RegressorModel, path: &Path) -> Result<()> {
    let header = ModelHeader {
        spec: model.spec,
        input_mean: model.input_mean.clone(),
        input_std: model.input_std.clone(),
        history: model
            .history
            .iter()
            .map(|e| (e.train_loss, e.val_loss))
            .collect(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for layer in &model.layers {
        for &w in layer.weights.iter() {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        for &b in &layer.biases {
            bytes.extend_from_slice(&b.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<RegressorModel> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::corrupt(format!("{}: {e}", path.display())))?;
    if bytes.len() < 20 || &bytes[0..8] != MODEL_MAGIC {
        return Err(Error::corrupt(format!("{}: bad magic", path.display())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::corrupt(format!(
            "{}: model version {version} unsupported",
            path.display()
        )));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() < 20 + header_len {
        return Err(Error::corrupt(format!("{}: truncated header", path.display())));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[20..20 + header_len])
        .map_err(|e| Error::corrupt(format!("{}: header: {e}", path.display())))?;
    header.spec.validate().map_err(|e| Error::corrupt(e.to_string()))?;

    let dims = header.spec.layer_dims();
    let expected: usize = dims
        .iter()
        .map(|&(ci, co)| (KERNEL * KERNEL * ci + 1) * co * 8)
        .sum();
    let blob = &bytes[20 + header_len..];
    if blob.len() != expected {
        return Err(Error::corrupt(format!(
            "{}: weight blob {} bytes, expected {expected}",
            path.display(),
            blob.len()
        )));
    }
    let mut offset = 0usize;
    let mut read_f64 = |blob: &[f64]| -> Vec<f64> {
        let _ = blob;
        Vec::new()
    };
    let _ = &mut read_f64;
    let mut layers = Vec::with_capacity(dims.len());
    for &(ci, co) in &dims {
        let n_w = co * ci * KERNEL * KERNEL;
        let mut weights = Vec::with_capacity(n_w);
        for _ in 0..n_w {
            weights.push(f64::from_le_bytes(
                blob[offset..offset + 8].try_into().unwrap(),
            ));
            offset += 8;
        }
        let mut biases = Vec::with_capacity(co);
        for _ in 0..co {
            biases.push(f64::from_le_bytes(
                blob[offset..offset + 8].try_into().unwrap(),
            ));
            offset += 8;
        }
        layers.push(Layer {
            weights: Array4::from_shape_vec((co, ci, KERNEL, KERNEL), weights).expect("shape"),
            biases,
        });
    }
    Ok(RegressorModel {
        spec: header.spec,
        layers,
        input_mean: header.input_mean,
        input_std: header.input_std,
        history: header
            .history
            .into_iter()
            .map(|(train_loss, val_loss)| EpochStats {
                train_loss,
                val_loss,
            })
            .collect(),
    })
}
