//! Classifiers and evaluation: a small fully connected network, a
//! one-vs-one polynomial-kernel SVM, agreement metrics, pixel-wise class
//! maps and prediction throughput benchmarks.

pub mod bench;
pub mod fcn;
pub mod metrics;
pub mod model_file;
pub mod pixelmap;
pub mod svm;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use bench::{bench_predict, BenchResult, PredictPipeline};
pub use fcn::{train_fcn, FcnModel, FcnNet, FcnTrainConfig};
pub use metrics::{evaluate, EvalReport};
pub use pixelmap::{classify_pixels, write_class_map_pgm, write_class_map_png, ClassMap, PALETTE};
pub use svm::{train_svm, SvmModel, SvmTrainConfig};

/// Fruit vocabularies used by the public datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fruit {
    Strawberry,
    Tomato,
}

impl Fruit {
    /// Maturity class names, index order equals label order.
    pub fn class_names(&self) -> &'static [&'static str] {
        match self {
            // Seven stages from unripe to overripe.
            Fruit::Strawberry => &[
                "Green",
                "White",
                "Pink",
                "Late-Pink",
                "Red",
                "Late-Red",
                "Overripe",
            ],
            // Six USDA stages.
            Fruit::Tomato => &["Green", "Breaker", "Turning", "Pink", "Light-Red", "Red"],
        }
    }
}

/// Per-feature z-score standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Columns with vanishing spread standardize to zero.
    const MIN_STD: f64 = 1e-12;

    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let cols = x.cols();
        let mut mean = vec![0.0; cols];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for row in x.iter_rows() {
            for (c, v) in row.iter().enumerate() {
                let d = v - mean[c];
                var[c] += d * d;
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s < Self::MIN_STD {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::shape(format!(
                "standardizer fitted on {} features, input has {}",
                self.dim(),
                x.cols()
            )));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        Ok(out)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| (v - self.mean[c]) / self.std[c])
            .collect()
    }
}

/// A trained classifier of either kind, used wherever the two are
/// interchangeable (search, CLI, benchmarks).
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Fcn(FcnModel),
    Svm(SvmModel),
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        match self {
            TrainedModel::Fcn(m) => m.input_dim(),
            TrainedModel::Svm(m) => m.input_dim(),
        }
    }

    pub fn class_names(&self) -> &[String] {
        match self {
            TrainedModel::Fcn(m) => &m.class_names,
            TrainedModel::Svm(m) => &m.class_names,
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            TrainedModel::Fcn(_) => "fcn",
            TrainedModel::Svm(_) => "svm",
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Fcn(m) => m.predict(x),
            TrainedModel::Svm(m) => m.predict(x),
        }
    }

    /// Mean test loss used in search records: cross-entropy for the FCN,
    /// error rate for the SVM (which has no probabilistic output).
    pub fn mean_test_loss(&self, x: &Matrix, y: &[usize]) -> Result<f64> {
        match self {
            TrainedModel::Fcn(m) => m.mean_cross_entropy(x, y),
            TrainedModel::Svm(m) => {
                let pred = m.predict(x)?;
                let wrong = pred.iter().zip(y).filter(|(p, t)| p != t).count();
                Ok(wrong as f64 / y.len().max(1) as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_centers_and_scales() {
        let x = Matrix::from_rows(&[vec![1.0, 10.0], vec![3.0, 30.0]]).unwrap();
        let s = Standardizer::fit(&x);
        let z = s.transform(&x).unwrap();
        assert!((z.get(0, 0) + 1.0).abs() < 1e-12);
        assert!((z.get(1, 0) - 1.0).abs() < 1e-12);
        assert!((z.get(0, 1) + 1.0).abs() < 1e-12);
        // Constant columns map to zero rather than dividing by zero.
        let c = Matrix::from_rows(&[vec![5.0], vec![5.0]]).unwrap();
        let s = Standardizer::fit(&c);
        let z = s.transform(&c).unwrap();
        assert_eq!(z.get(0, 0), 0.0);
    }

    #[test]
    fn standardization_is_bit_identical_under_exact_affine_rescale() {
        // Power-of-two scaling and an exactly representable shift keep
        // every intermediate rounding identical, so the z-scored matrices
        // must match bit for bit.
        let rows = 64;
        let base: Vec<Vec<f64>> = (0..rows)
            .map(|r| vec![(r % 17) as f64 / 64.0, (r % 5) as f64 / 64.0 + 1.0])
            .collect();
        let x = Matrix::from_rows(&base).unwrap();
        let rescaled: Vec<Vec<f64>> = base
            .iter()
            .map(|row| row.iter().map(|v| 4.0 * v + 3.0).collect())
            .collect();
        let x2 = Matrix::from_rows(&rescaled).unwrap();
        let z1 = Standardizer::fit(&x).transform(&x).unwrap();
        let z2 = Standardizer::fit(&x2).transform(&x2).unwrap();
        assert_eq!(z1.data(), z2.data());
    }

    #[test]
    fn fruit_vocabularies() {
        assert_eq!(Fruit::Strawberry.class_names().len(), 7);
        assert_eq!(Fruit::Tomato.class_names().len(), 6);
    }
}
