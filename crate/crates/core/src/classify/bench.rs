//! Prediction throughput benchmark: end-to-end per-image pixel
//! classification, selected-feature pipeline vs full-spectrum baseline.

use std::time::Instant;

use crate::classify::pixelmap::pixel_feature_matrix;
use crate::classify::TrainedModel;
use crate::error::{Error, Result};
use crate::features::DualBandFeatureSet;
use crate::matrix::Matrix;
use crate::spectral::Hypercube;

/// How pixel vectors are produced for the model.
#[derive(Debug, Clone)]
pub enum PredictPipeline {
    /// Slice the selected windows and compute the masked statistics.
    SelectedFeatures(DualBandFeatureSet),
    /// Feed the full spectrum of every pixel.
    FullSpectrum,
}

impl PredictPipeline {
    pub fn name(&self) -> &'static str {
        match self {
            PredictPipeline::SelectedFeatures(_) => "selected-features",
            PredictPipeline::FullSpectrum => "full-spectrum",
        }
    }
}

/// Median end-to-end prediction throughput over repeated runs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchResult {
    pub pipeline: String,
    pub model_kind: String,
    pub fps: f64,
    pub per_image_ms: f64,
    pub stage_feature_ms: f64,
    pub stage_inference_ms: f64,
    pub repetitions: usize,
    pub images: usize,
}

fn full_spectrum_matrix(cube: &Hypercube) -> Matrix {
    let hw = cube.pixels();
    let bands = cube.bands();
    let data = cube.data();
    let mut out = Matrix::zeros(hw, bands);
    for p in 0..hw {
        let row = out.row_mut(p);
        for (b, slot) in row.iter_mut().enumerate() {
            *slot = f64::from(data[b * hw + p]);
        }
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Time end-to-end per-image prediction (feature assembly + inference over
/// every pixel) and report frames per second with a stage breakdown.
pub fn bench_predict(
    model: &TrainedModel,
    pipeline: &PredictPipeline,
    cubes: &[Hypercube],
    repetitions: usize,
) -> Result<BenchResult> {
    if cubes.is_empty() {
        return Err(Error::parameter("bench needs at least one cube"));
    }
    if repetitions < 3 {
        return Err(Error::parameter(format!(
            "bench needs >= 3 repetitions, got {repetitions}"
        )));
    }
    let expected_dim = match pipeline {
        PredictPipeline::SelectedFeatures(set) => set.feature_dim(),
        PredictPipeline::FullSpectrum => cubes[0].bands(),
    };
    if model.input_dim() != expected_dim {
        return Err(Error::shape(format!(
            "model expects {} features but pipeline yields {expected_dim}",
            model.input_dim()
        )));
    }

    let mut totals_ms = Vec::with_capacity(repetitions);
    let mut feature_ms = Vec::with_capacity(repetitions);
    let mut inference_ms = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let mut feat = 0.0;
        let mut infer = 0.0;
        for cube in cubes {
            let all_pixels: Vec<usize> = (0..cube.pixels()).collect();
            let t0 = Instant::now();
            let x = match pipeline {
                PredictPipeline::SelectedFeatures(set) => {
                    pixel_feature_matrix(cube, &all_pixels, set)?
                }
                PredictPipeline::FullSpectrum => full_spectrum_matrix(cube),
            };
            let t1 = Instant::now();
            let _pred = model.predict(&x)?;
            let t2 = Instant::now();
            feat += t1.duration_since(t0).as_secs_f64() * 1000.0;
            infer += t2.duration_since(t1).as_secs_f64() * 1000.0;
        }
        let n = cubes.len() as f64;
        feature_ms.push(feat / n);
        inference_ms.push(infer / n);
        totals_ms.push((feat + infer) / n);
    }

    let per_image_ms = median(&mut totals_ms);
    Ok(BenchResult {
        pipeline: pipeline.name().to_string(),
        model_kind: model.kind_str().to_string(),
        fps: 1000.0 / per_image_ms,
        per_image_ms,
        stage_feature_ms: median(&mut feature_ms),
        stage_inference_ms: median(&mut inference_ms),
        repetitions,
        images: cubes.len(),
    })
}
