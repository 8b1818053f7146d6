//! One-vs-one SVM with a degree-3 polynomial kernel, trained by
//! sequential minimal optimization. Prediction is a majority vote over
//! the pairwise machines; ties resolve to the lowest class index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::Standardizer;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::fold_seed;

#[derive(Debug, Clone, Copy)]
pub struct SvmTrainConfig {
    pub c: f64,
    pub degree: u32,
    /// Kernel scale; 0 means 1/dim, fixed at fit time.
    pub gamma: f64,
    pub coef0: f64,
    /// KKT violation tolerance for the SMO solver.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            c: 1.0,
            degree: 3,
            gamma: 0.0,
            coef0: 1.0,
            tolerance: 1e-3,
            seed: 0,
        }
    }
}

/// One trained binary machine for a class pair (a < b); the decision
/// value is positive for class `a`.
#[derive(Debug, Clone)]
pub struct PairMachine {
    pub class_a: usize,
    pub class_b: usize,
    /// Support vectors, row-major `n_sv x dim`.
    pub support_vectors: Vec<f64>,
    /// alpha_i * y_i per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    pub gamma: f64,
    pub coef0: f64,
    pub degree: u32,
    pub c: f64,
    pub dim: usize,
    pub machines: Vec<PairMachine>,
    pub standardizer: Standardizer,
    pub class_names: Vec<String>,
}

fn poly_kernel(a: &[f64], b: &[f64], gamma: f64, coef0: f64, degree: u32) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (gamma * dot + coef0).powi(degree as i32)
}

/// Simplified SMO on a precomputed kernel matrix. `labels` are +/-1.
/// Returns (alphas, bias).
///
/// Errors f(x_t) - y_t are maintained incrementally: every accepted
/// alpha step costs O(n) instead of recomputing decisions per lookup.
fn smo(
    kernel: &[f64],
    labels: &[f64],
    c: f64,
    tol: f64,
    seed: u64,
) -> (Vec<f64>, f64) {
    let n = labels.len();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0f64; n];
    let mut b = 0.0f64;
    // With all alphas zero, f(x) = 0 and the error is -y.
    let mut errors: Vec<f64> = labels.iter().map(|y| -y).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let max_passes = 5;
    let hard_cap = 150;
    let mut passes = 0;
    let mut sweeps = 0;
    while passes < max_passes && sweeps < hard_cap {
        sweeps += 1;
        let mut changed = 0;
        for i in 0..n {
            let e_i = errors[i];
            let r = e_i * labels[i];
            if (r < -tol && alpha[i] < c) || (r > tol && alpha[i] > 0.0) {
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let e_j = errors[j];
                let (ai_old, aj_old) = (alpha[i], alpha[j]);
                let (lo, hi) = if labels[i] != labels[j] {
                    ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
                } else {
                    ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
                };
                if lo >= hi {
                    continue;
                }
                let eta = 2.0 * k(i, j) - k(i, i) - k(j, j);
                if eta >= 0.0 {
                    continue;
                }
                let mut aj = aj_old - labels[j] * (e_i - e_j) / eta;
                aj = aj.clamp(lo, hi);
                if (aj - aj_old).abs() < 1e-7 {
                    continue;
                }
                let ai = ai_old + labels[i] * labels[j] * (aj_old - aj);
                alpha[i] = ai;
                alpha[j] = aj;
                let b1 = b - e_i
                    - labels[i] * (ai - ai_old) * k(i, i)
                    - labels[j] * (aj - aj_old) * k(i, j);
                let b2 = b - e_j
                    - labels[i] * (ai - ai_old) * k(i, j)
                    - labels[j] * (aj - aj_old) * k(j, j);
                let new_b = if ai > 0.0 && ai < c {
                    b1
                } else if aj > 0.0 && aj < c {
                    b2
                } else {
                    0.5 * (b1 + b2)
                };
                let d_i = labels[i] * (ai - ai_old);
                let d_j = labels[j] * (aj - aj_old);
                let d_b = new_b - b;
                for (t, e) in errors.iter_mut().enumerate() {
                    *e += d_i * k(i, t) + d_j * k(j, t) + d_b;
                }
                b = new_b;
                changed += 1;
            }
        }
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }
    (alpha, b)
}

/// Train a one-vs-one polynomial-kernel SVM on raw features.
/// Standardization is fitted on `x` and stored in the model.
pub fn train_svm(
    x: &Matrix,
    y: &[usize],
    class_names: &[String],
    cfg: &SvmTrainConfig,
) -> Result<SvmModel> {
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
    let k_classes = class_names.len();
    let mut present = vec![false; k_classes];
    for &label in y {
        if label >= k_classes {
            return Err(Error::parameter(format!(
                "label {label} out of range for {k_classes} classes"
            )));
        }
        present[label] = true;
    }
    let classes: Vec<usize> = (0..k_classes).filter(|&c| present[c]).collect();
    if classes.len() < 2 {
        return Err(Error::parameter(
            "training needs at least two distinct classes",
        ));
    }

    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform(x)?;
    let dim = z.cols();
    let gamma = if cfg.gamma > 0.0 {
        cfg.gamma
    } else {
        1.0 / dim as f64
    };

    let mut machines = Vec::new();
    for (ci, &a) in classes.iter().enumerate() {
        for &b in &classes[ci + 1..] {
            let idx: Vec<usize> = (0..z.rows()).filter(|&r| y[r] == a || y[r] == b).collect();
            let n = idx.len();
            let labels: Vec<f64> = idx
                .iter()
                .map(|&r| if y[r] == a { 1.0 } else { -1.0 })
                .collect();
            let mut kernel = vec![0.0; n * n];
            for p in 0..n {
                for q in p..n {
                    let v = poly_kernel(z.row(idx[p]), z.row(idx[q]), gamma, cfg.coef0, cfg.degree);
                    kernel[p * n + q] = v;
                    kernel[q * n + p] = v;
                }
            }
            let pair_seed = fold_seed(cfg.seed, (a as u64) << 32 | b as u64);
            let (alpha, bias) = smo(&kernel, &labels, cfg.c, cfg.tolerance, pair_seed);

            let mut support_vectors = Vec::new();
            let mut dual_coefs = Vec::new();
            for (slot, &r) in idx.iter().enumerate() {
                if alpha[slot] > 1e-10 {
                    support_vectors.extend_from_slice(z.row(r));
                    dual_coefs.push(alpha[slot] * labels[slot]);
                }
            }
            machines.push(PairMachine {
                class_a: a,
                class_b: b,
                support_vectors,
                dual_coefs,
                bias,
            });
        }
    }

    Ok(SvmModel {
        gamma,
        coef0: cfg.coef0,
        degree: cfg.degree,
        c: cfg.c,
        dim,
        machines,
        standardizer,
        class_names: class_names.to_vec(),
    })
}

impl SvmModel {
    pub fn input_dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Decision value of one pair machine for a standardized row.
    fn decision(&self, m: &PairMachine, z: &[f64]) -> f64 {
        let mut acc = m.bias;
        for (sv, coef) in m.support_vectors.chunks_exact(self.dim).zip(&m.dual_coefs) {
            acc += coef * poly_kernel(sv, z, self.gamma, self.coef0, self.degree);
        }
        acc
    }

    fn predict_row_standardized(&self, z: &[f64], votes: &mut [usize]) -> usize {
        votes.iter_mut().for_each(|v| *v = 0);
        for m in &self.machines {
            let winner = if self.decision(m, z) >= 0.0 {
                m.class_a
            } else {
                m.class_b
            };
            votes[winner] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.dim {
            return Err(Error::shape(format!(
                "model expects {} features, input has {}",
                self.dim,
                x.cols()
            )));
        }
        let mut votes = vec![0usize; self.n_classes()];
        Ok(x.iter_rows()
            .map(|row| {
                let z = self.standardizer.transform_row(row);
                self.predict_row_standardized(&z, &mut votes)
            })
            .collect())
    }
}
