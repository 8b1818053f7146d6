//! Agreement metrics: confusion matrix, aggregate accuracy and Cohen's
//! kappa.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Evaluation summary. Confusion rows are truth, columns predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub kappa: f64,
}

/// Compare predictions against ground truth over `k` classes.
///
/// kappa = 1 - (1 - p_o) / (1 - p_e) with p_o the observed agreement and
/// p_e the chance agreement from the marginals. The degenerate case
/// p_e = 1 is defined as kappa = 1 when agreement is perfect, else 0.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<EvalReport> {
    if y_true.is_empty() {
        return Err(Error::parameter("evaluate needs at least one sample"));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!(
            "evaluate got {} truths but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if k == 0 {
        return Err(Error::parameter("evaluate needs k >= 1 classes"));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::parameter(format!(
                "label out of range: truth {t}, prediction {p}, k = {k}"
            )));
        }
        confusion[t][p] += 1;
    }
    let n = y_true.len() as f64;
    let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
    let p_o = trace as f64 / n;
    let mut p_e = 0.0;
    for c in 0..k {
        let row: usize = confusion[c].iter().sum();
        let col: usize = (0..k).map(|r| confusion[r][c]).sum();
        p_e += row as f64 * col as f64;
    }
    p_e /= n * n;
    let kappa = if (1.0 - p_e).abs() < 1e-15 {
        if (1.0 - p_o).abs() < 1e-15 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - (1.0 - p_o) / (1.0 - p_e)
    };
    Ok(EvalReport {
        confusion,
        accuracy: p_o,
        kappa,
    })
}

impl EvalReport {
    pub fn n_classes(&self) -> usize {
        self.confusion.len()
    }

    /// Write the confusion matrix plus summary rows as CSV.
    pub fn write_csv(&self, path: &Path, class_names: &[String]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header: Vec<String> = std::iter::once("truth\\pred".to_string())
            .chain(class_names.iter().cloned())
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = std::iter::once(class_names[i].clone())
                .chain(row.iter().map(|c| c.to_string()))
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        writeln!(w, "accuracy,{}", self.accuracy)?;
        writeln!(w, "kappa,{}", self.kappa)?;
        Ok(())
    }
}
