//! Fully connected softmax classifier trained with Adam on categorical
//! cross-entropy. Architecture: input -> 64 -> 32 -> k, ReLU hidden
//! layers. Training is deterministic given a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::Standardizer;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Hidden layer widths of the default architecture.
pub const HIDDEN_DIMS: [usize; 2] = [64, 32];

const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy)]
pub struct FcnTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FcnTrainConfig {
    fn default() -> Self {
        FcnTrainConfig {
            epochs: 100,
            batch: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Raw network parameters: weights are row-major `[out][in]` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnNet {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Gradients with the same shapes as [`FcnNet`] weights and biases.
#[derive(Debug, Clone)]
pub struct FcnGradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl FcnNet {
    /// Uniform fan-in-scaled init: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
    /// biases zero. Sampling order is fixed (layer by layer, row-major).
    pub fn init(layer_dims: Vec<usize>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_dims.len() - 1 {
            let fan_in = layer_dims[l];
            let fan_out = layer_dims[l + 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        FcnNet {
            layer_dims,
            weights,
            biases,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    fn zeros_like(&self) -> FcnGradients {
        FcnGradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Forward pass for one row; returns per-layer activations
    /// (activations[0] is the input, the last entry is softmax output).
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut activations = Vec::with_capacity(self.n_layers() + 1);
        activations.push(x.to_vec());
        for l in 0..self.n_layers() {
            let fan_in = self.layer_dims[l];
            let fan_out = self.layer_dims[l + 1];
            let input = activations.last().unwrap().clone();
            let mut z = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                let mut acc = self.biases[l][o];
                for (w, v) in row.iter().zip(&input) {
                    acc += w * v;
                }
                z[o] = acc;
            }
            if l + 1 < self.n_layers() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            } else {
                softmax_in_place(&mut z);
            }
            activations.push(z);
        }
        activations
    }

    /// Softmax class probabilities for one input row.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).pop().unwrap()
    }

    /// Mean cross-entropy over a batch.
    pub fn loss(&self, x: &Matrix, y: &[usize]) -> f64 {
        let mut total = 0.0;
        for (row, &label) in x.iter_rows().zip(y) {
            let p = self.forward(row);
            total -= p[label].max(PROB_FLOOR).ln();
        }
        total / y.len() as f64
    }

    /// Mean cross-entropy and its gradients over a batch.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[usize]) -> (f64, FcnGradients) {
        let mut grads = self.zeros_like();
        let mut total = 0.0;
        let n = y.len() as f64;
        for (row, &label) in x.iter_rows().zip(y) {
            let activations = self.forward_trace(row);
            let probs = activations.last().unwrap();
            total -= probs[label].max(PROB_FLOOR).ln();

            // Output delta: softmax + cross-entropy.
            let mut delta: Vec<f64> = probs.clone();
            delta[label] -= 1.0;

            for l in (0..self.n_layers()).rev() {
                let fan_in = self.layer_dims[l];
                let input = &activations[l];
                for (o, &d) in delta.iter().enumerate() {
                    grads.biases[l][o] += d / n;
                    let wrow = &mut grads.weights[l][o * fan_in..(o + 1) * fan_in];
                    for (slot, v) in wrow.iter_mut().zip(input) {
                        *slot += d * v / n;
                    }
                }
                if l > 0 {
                    let mut next = vec![0.0; fan_in];
                    for (o, &d) in delta.iter().enumerate() {
                        let wrow = &self.weights[l][o * fan_in..(o + 1) * fan_in];
                        for (i, w) in wrow.iter().enumerate() {
                            next[i] += d * w;
                        }
                    }
                    // ReLU derivative on the layer input activation.
                    for (v, a) in next.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *v = 0.0;
                        }
                    }
                    delta = next;
                }
            }
        }
        (total / n, grads)
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Adam optimizer state, one slot per parameter.
struct Adam {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &FcnNet, lr: f64) -> Self {
        Adam {
            m_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, net: &mut FcnNet, grads: &FcnGradients) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64, lr: f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= lr * mhat / (vhat.sqrt() + Self::EPS);
        };
        for l in 0..net.weights.len() {
            for i in 0..net.weights[l].len() {
                update(
                    &mut net.weights[l][i],
                    grads.weights[l][i],
                    &mut self.m_w[l][i],
                    &mut self.v_w[l][i],
                    self.lr,
                );
            }
            for i in 0..net.biases[l].len() {
                update(
                    &mut net.biases[l][i],
                    grads.biases[l][i],
                    &mut self.m_b[l][i],
                    &mut self.v_b[l][i],
                    self.lr,
                );
            }
        }
    }
}

/// Trained FCN with its input standardization and class vocabulary.
#[derive(Debug, Clone)]
pub struct FcnModel {
    pub net: FcnNet,
    pub standardizer: Standardizer,
    pub class_names: Vec<String>,
}

impl FcnModel {
    pub fn input_dim(&self) -> usize {
        self.net.layer_dims[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.net.layer_dims.last().unwrap()
    }

    fn check_dim(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "model expects {} features, input has {}",
                self.input_dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// Class probabilities per row; each row sums to 1 within 1e-6.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        Ok(x.iter_rows()
            .map(|row| self.net.forward(&self.standardizer.transform_row(row)))
            .collect())
    }

    /// Argmax class per row; ties take the lowest class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(x)?
            .iter()
            .map(|p| argmax(p))
            .collect())
    }

    /// Mean categorical cross-entropy on labeled data.
    pub fn mean_cross_entropy(&self, x: &Matrix, y: &[usize]) -> Result<f64> {
        self.check_dim(x)?;
        let z = self.standardizer.transform(x)?;
        Ok(self.net.loss(&z, y))
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Train the FCN on raw features; standardization is fitted on `x` and
/// stored in the model. Deterministic given `cfg.seed`.
pub fn train_fcn(
    x: &Matrix,
    y: &[usize],
    class_names: &[String],
    cfg: &FcnTrainConfig,
) -> Result<FcnModel> {
    if x.rows() != y.len() {
        return Err(Error::shape(format!(
            "feature matrix has {} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::parameter("training set is empty"));
    }
    let k = class_names.len();
    let distinct = {
        let mut seen = vec![false; k];
        for &label in y {
            if label >= k {
                return Err(Error::parameter(format!(
                    "label {label} out of range for {k} classes"
                )));
            }
            seen[label] = true;
        }
        seen.iter().filter(|s| **s).count()
    };
    if distinct < 2 {
        return Err(Error::parameter(
            "training needs at least two distinct classes",
        ));
    }

    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform(x)?;

    let mut dims = vec![x.cols()];
    dims.extend_from_slice(&HIDDEN_DIMS);
    dims.push(k);
    let mut net = FcnNet::init(dims, cfg.seed);
    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive_seed(cfg.seed, "fcn-shuffle"));

    let n = z.rows();
    let batch = cfg.batch.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the epoch RNG stream.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch) {
            let rows: Vec<Vec<f64>> = chunk.iter().map(|&i| z.row(i).to_vec()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let bx = Matrix::from_rows(&rows)?;
            let (loss, grads) = net.loss_and_grad(&bx, &labels);
            if !loss.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            adam.step(&mut net, &grads);
        }
    }

    Ok(FcnModel {
        net,
        standardizer,
        class_names: class_names.to_vec(),
    })
}
