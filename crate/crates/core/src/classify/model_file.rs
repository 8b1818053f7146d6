//! Model container: a `MODEL1 <kind>` header line, one line of JSON
//! metadata, then a little-endian f64 blob holding the parameters.
//!
//! FCN blob layout: per layer, weights row-major then biases.
//! SVM blob layout: per pair machine, support vectors row-major then
//! dual coefficients.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::fcn::{FcnModel, FcnNet};
use crate::classify::svm::{PairMachine, SvmModel};
use crate::classify::{Standardizer, TrainedModel};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct FcnMeta {
    version: u32,
    kind: String,
    class_names: Vec<String>,
    layer_dims: Vec<usize>,
    standardization: Standardizer,
    blob_len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairMeta {
    class_a: usize,
    class_b: usize,
    n_sv: usize,
    bias: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SvmMeta {
    version: u32,
    kind: String,
    class_names: Vec<String>,
    dim: usize,
    gamma: f64,
    coef0: f64,
    degree: u32,
    c: f64,
    standardization: Standardizer,
    pairs: Vec<PairMeta>,
    blob_len: usize,
}

fn write_blob(w: &mut impl Write, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_blob(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::data(format!("truncated model blob ({e})")))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match model {
        TrainedModel::Fcn(m) => {
            let blob_len: usize = m
                .net
                .weights
                .iter()
                .map(Vec::len)
                .chain(m.net.biases.iter().map(Vec::len))
                .sum();
            let meta = FcnMeta {
                version: 1,
                kind: "fcn".to_string(),
                class_names: m.class_names.clone(),
                layer_dims: m.net.layer_dims.clone(),
                standardization: m.standardizer.clone(),
                blob_len,
            };
            writeln!(w, "MODEL1 fcn")?;
            writeln!(w, "{}", serde_json::to_string(&meta).map_err(json_err)?)?;
            for l in 0..m.net.weights.len() {
                write_blob(&mut w, m.net.weights[l].iter().copied())?;
                write_blob(&mut w, m.net.biases[l].iter().copied())?;
            }
        }
        TrainedModel::Svm(m) => {
            let blob_len: usize = m
                .machines
                .iter()
                .map(|p| p.support_vectors.len() + p.dual_coefs.len())
                .sum();
            let meta = SvmMeta {
                version: 1,
                kind: "svm".to_string(),
                class_names: m.class_names.clone(),
                dim: m.dim,
                gamma: m.gamma,
                coef0: m.coef0,
                degree: m.degree,
                c: m.c,
                standardization: m.standardizer.clone(),
                pairs: m
                    .machines
                    .iter()
                    .map(|p| PairMeta {
                        class_a: p.class_a,
                        class_b: p.class_b,
                        n_sv: p.dual_coefs.len(),
                        bias: p.bias,
                    })
                    .collect(),
                blob_len,
            };
            writeln!(w, "MODEL1 svm")?;
            writeln!(w, "{}", serde_json::to_string(&meta).map_err(json_err)?)?;
            for p in &m.machines {
                write_blob(&mut w, p.support_vectors.iter().copied())?;
                write_blob(&mut w, p.dual_coefs.iter().copied())?;
            }
        }
    }
    Ok(())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::data(format!("model metadata: {e}"))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let kind = match header.trim_end() {
        "MODEL1 fcn" => "fcn",
        "MODEL1 svm" => "svm",
        other => {
            return Err(Error::data(format!(
                "{}: not a MODEL1 file (header '{other}')",
                path.display()
            )))
        }
    };
    let mut meta_line = String::new();
    r.read_line(&mut meta_line)?;

    if kind == "fcn" {
        let meta: FcnMeta = serde_json::from_str(&meta_line).map_err(json_err)?;
        if meta.version != 1 {
            return Err(Error::data(format!(
                "unsupported model version {}",
                meta.version
            )));
        }
        let blob = read_blob(&mut r, meta.blob_len)?;
        let mut offset = 0;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..meta.layer_dims.len() - 1 {
            let w_len = meta.layer_dims[l] * meta.layer_dims[l + 1];
            weights.push(blob[offset..offset + w_len].to_vec());
            offset += w_len;
            let b_len = meta.layer_dims[l + 1];
            biases.push(blob[offset..offset + b_len].to_vec());
            offset += b_len;
        }
        if offset != blob.len() {
            return Err(Error::data("model blob length mismatch".to_string()));
        }
        Ok(TrainedModel::Fcn(FcnModel {
            net: FcnNet {
                layer_dims: meta.layer_dims,
                weights,
                biases,
            },
            standardizer: meta.standardization,
            class_names: meta.class_names,
        }))
    } else {
        let meta: SvmMeta = serde_json::from_str(&meta_line).map_err(json_err)?;
        if meta.version != 1 {
            return Err(Error::data(format!(
                "unsupported model version {}",
                meta.version
            )));
        }
        let blob = read_blob(&mut r, meta.blob_len)?;
        let mut offset = 0;
        let mut machines = Vec::new();
        for p in &meta.pairs {
            let sv_len = p.n_sv * meta.dim;
            let support_vectors = blob[offset..offset + sv_len].to_vec();
            offset += sv_len;
            let dual_coefs = blob[offset..offset + p.n_sv].to_vec();
            offset += p.n_sv;
            machines.push(PairMachine {
                class_a: p.class_a,
                class_b: p.class_b,
                support_vectors,
                dual_coefs,
                bias: p.bias,
            });
        }
        if offset != blob.len() {
            return Err(Error::data("model blob length mismatch".to_string()));
        }
        Ok(TrainedModel::Svm(SvmModel {
            gamma: meta.gamma,
            coef0: meta.coef0,
            degree: meta.degree,
            c: meta.c,
            dim: meta.dim,
            machines,
            standardizer: meta.standardization,
            class_names: meta.class_names,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::fcn::{train_fcn, FcnTrainConfig};
    use crate::classify::svm::{train_svm, SvmTrainConfig};
    use crate::matrix::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data() -> (Matrix, Vec<usize>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, c) in [-1.5, 1.5].iter().enumerate() {
            for _ in 0..20 {
                rows.push(vec![
                    c + rng.gen_range(-0.4..0.4),
                    c + rng.gen_range(-0.4..0.4),
                    rng.gen_range(-1.0..1.0),
                ]);
                labels.push(label);
            }
        }
        (
            Matrix::from_rows(&rows).unwrap(),
            labels,
            vec!["A".to_string(), "B".to_string()],
        )
    }

    #[test]
    fn fcn_round_trip_preserves_predictions_bitwise() {
        let (x, y, names) = data();
        let model = train_fcn(&x, &y, &names, &FcnTrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.hsm");
        save_model(&path, &TrainedModel::Fcn(model.clone())).unwrap();
        let loaded = load_model(&path).unwrap();
        match &loaded {
            TrainedModel::Fcn(m) => {
                assert_eq!(m.net, model.net);
                assert_eq!(m.standardizer, model.standardizer);
                assert_eq!(m.class_names, model.class_names);
                let a = model.predict_proba(&x).unwrap();
                let b = m.predict_proba(&x).unwrap();
                assert_eq!(a, b);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn svm_round_trip_preserves_predictions() {
        let (x, y, names) = data();
        let model = train_svm(&x, &y, &names, &SvmTrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.hsm");
        save_model(&path, &TrainedModel::Svm(model.clone())).unwrap();
        let loaded = load_model(&path).unwrap();
        match &loaded {
            TrainedModel::Svm(m) => {
                assert_eq!(m.machines.len(), model.machines.len());
                assert_eq!(m.machines[0].dual_coefs, model.machines[0].dual_coefs);
                assert_eq!(m.machines[0].bias, model.machines[0].bias);
                assert_eq!(m.predict(&x).unwrap(), model.predict(&x).unwrap());
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.hsm");
        std::fs::write(&path, "MODELX nonsense\n{}\n").unwrap();
        assert!(load_model(&path).is_err());
    }
}
