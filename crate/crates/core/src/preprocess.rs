//! Radiometric and chemometric preprocessing: reflectance calibration,
//! multiplicative scatter correction, Savitzky-Golay smoothing, NDVI
//! background segmentation and foreground mean spectra.

use crate::error::{Error, Result};
use crate::matrix::solve_linear;
use crate::spectral::{CubeKind, Hypercube, PixelMask, Spectrum};

/// Denominator guard for all ratio computations.
pub const RATIO_EPSILON: f64 = 1e-6;

/// Reflectance clamp bounds; keeps saturated/dead pixels finite.
pub const REFLECTANCE_CLAMP: (f64, f64) = (-0.1, 2.0);

/// Convert raw intensities to reflectance with white and dark references.
///
/// R = (I_raw - I_dark) / (I_white - I_dark) per voxel. Voxels whose
/// denominator is below [`RATIO_EPSILON`] map to 0; everything is clamped
/// to [`REFLECTANCE_CLAMP`].
pub fn calibrate(raw: &Hypercube, white: &Hypercube, dark: &Hypercube) -> Result<Hypercube> {
    if raw.kind() != CubeKind::RawIntensity {
        return Err(Error::domain(
            "calibrate expects a raw-intensity cube",
        ));
    }
    if !raw.same_geometry(white) || !raw.same_geometry(dark) {
        return Err(Error::shape(
            "raw, white and dark cubes must share geometry and axis",
        ));
    }
    let (lo, hi) = REFLECTANCE_CLAMP;
    let data = raw
        .data()
        .iter()
        .zip(white.data())
        .zip(dark.data())
        .map(|((&r, &w), &d)| {
            let den = f64::from(w) - f64::from(d);
            let val = if den.abs() < RATIO_EPSILON {
                0.0
            } else {
                (f64::from(r) - f64::from(d)) / den
            };
            val.clamp(lo, hi) as f32
        })
        .collect();
    Hypercube::new(
        raw.height(),
        raw.width(),
        CubeKind::Reflectance,
        raw.axis().clone(),
        data,
    )
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Least-squares slope/intercept of `x` regressed on `reference`.
fn regress(x: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
    let rx = mean(reference);
    let xx = mean(x);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&r, &v) in reference.iter().zip(x) {
        sxy += (r - rx) * (v - xx);
        sxx += (r - rx) * (r - rx);
    }
    if sxx < 1e-12 {
        return Err(Error::numeric(
            "MSC reference is constant; regression is degenerate",
        ));
    }
    let a = sxy / sxx;
    if a.abs() < 1e-12 {
        return Err(Error::numeric(
            "MSC slope vanished; spectrum is uncorrelated with the reference",
        ));
    }
    Ok((a, xx - a * rx))
}

/// Multiplicative scatter correction.
///
/// Each spectrum x is replaced by (x - b)/a where (a, b) are the
/// least-squares slope and intercept of x regressed on the reference.
/// Without an explicit reference the mean spectrum of the batch is used.
pub fn msc_correct(spectra: &[Spectrum], reference: Option<&Spectrum>) -> Result<Vec<Spectrum>> {
    if spectra.is_empty() {
        return Err(Error::parameter("msc_correct needs at least one spectrum"));
    }
    let axis = spectra[0].axis().clone();
    for s in spectra {
        if s.axis() != &axis {
            return Err(Error::shape("all spectra must share one axis"));
        }
    }
    let reference_values: Vec<f64> = match reference {
        Some(r) => {
            if r.axis() != &axis {
                return Err(Error::shape("reference axis differs from batch axis"));
            }
            r.values().to_vec()
        }
        None => {
            let n = spectra.len() as f64;
            let mut acc = vec![0.0; axis.len()];
            for s in spectra {
                for (slot, v) in acc.iter_mut().zip(s.values()) {
                    *slot += v;
                }
            }
            acc.iter_mut().for_each(|v| *v /= n);
            acc
        }
    };
    spectra
        .iter()
        .map(|s| {
            let (a, b) = regress(s.values(), &reference_values)?;
            let corrected = s.values().iter().map(|v| (v - b) / a).collect();
            Spectrum::new(corrected, axis.clone())
        })
        .collect()
}

/// Savitzky-Golay convolution weights for the window center.
fn savgol_weights(window: usize, order: usize) -> Result<Vec<f64>> {
    let half = (window / 2) as i64;
    let m = order + 1;
    // Normal equations of the local polynomial fit; the smoothed center
    // value is the fitted constant term.
    let mut ata = vec![0.0; m * m];
    for i in -half..=half {
        let t = i as f64;
        let mut powers = vec![1.0; m];
        for p in 1..m {
            powers[p] = powers[p - 1] * t;
        }
        for r in 0..m {
            for c in 0..m {
                ata[r * m + c] += powers[r] * powers[c];
            }
        }
    }
    let mut e0 = vec![0.0; m];
    e0[0] = 1.0;
    let z = solve_linear(ata, e0)?;
    let weights = (-half..=half)
        .map(|i| {
            let t = i as f64;
            let mut acc = 0.0;
            let mut tp = 1.0;
            for coef in &z {
                acc += coef * tp;
                tp *= t;
            }
            acc
        })
        .collect();
    Ok(weights)
}

/// Smooth a spectrum with a Savitzky-Golay filter.
///
/// Edges are mirror-padded (reflection about the edge sample, which itself
/// is not repeated), so the output length equals the input length.
pub fn savgol_smooth(s: &Spectrum, window: usize, order: usize) -> Result<Spectrum> {
    if window % 2 == 0 || window < 3 {
        return Err(Error::parameter(format!(
            "savgol window must be odd and >= 3, got {window}"
        )));
    }
    if order >= window {
        return Err(Error::parameter(format!(
            "savgol order {order} must be smaller than window {window}"
        )));
    }
    if window > s.len() {
        return Err(Error::parameter(format!(
            "savgol window {window} exceeds spectrum length {}",
            s.len()
        )));
    }
    let weights = savgol_weights(window, order)?;
    let half = (window / 2) as i64;
    let n = s.len() as i64;
    let values = s.values();
    let mirrored = |idx: i64| -> f64 {
        let j = if idx < 0 {
            -idx
        } else if idx >= n {
            2 * (n - 1) - idx
        } else {
            idx
        };
        values[j as usize]
    };
    let smoothed = (0..n)
        .map(|center| {
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * mirrored(center + k as i64 - half))
                .sum()
        })
        .collect();
    Spectrum::new(smoothed, s.axis().clone())
}

/// Which side of the NDVI threshold is fruit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NdviPolarity {
    /// Fruit pixels score lower NDVI than vegetation/background.
    FruitLower,
    /// Fruit pixels score higher NDVI (e.g. synthetic flat backgrounds).
    FruitHigher,
}

/// NDVI segmentation parameters.
#[derive(Debug, Clone, Copy)]
pub struct NdviParams {
    pub red_nm: f64,
    pub nir_nm: f64,
    pub polarity: NdviPolarity,
}

impl Default for NdviParams {
    fn default() -> Self {
        NdviParams {
            red_nm: 670.0,
            nir_nm: 800.0,
            polarity: NdviPolarity::FruitLower,
        }
    }
}

const OTSU_BINS: usize = 64;

/// Otsu threshold over a 64-bin histogram; returns a value in NDVI units.
/// The scan is ascending and keeps the first variance maximum.
fn otsu_threshold(values: &[f64]) -> f64 {
    let mn = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mx = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(mx > mn) {
        return mn;
    }
    let scale = OTSU_BINS as f64 / (mx - mn);
    let mut hist = [0usize; OTSU_BINS];
    for &v in values {
        let bin = (((v - mn) * scale) as usize).min(OTSU_BINS - 1);
        hist[bin] += 1;
    }
    let total = values.len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    let mut best_var = -1.0;
    let mut best_bin = OTSU_BINS - 1;
    for (i, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        if w0 == 0.0 {
            continue;
        }
        let w1 = total - w0;
        if w1 == 0.0 {
            break;
        }
        sum0 += i as f64 * c as f64;
        let m0 = sum0 / w0;
        let m1 = (total_sum - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_bin = i;
        }
    }
    // Threshold sits at the upper edge of the winning bin.
    mn + (best_bin as f64 + 1.0) / scale
}

/// Map of per-pixel NDVI values for the requested band pair.
pub fn ndvi_map(cube: &Hypercube, red_nm: f64, nir_nm: f64) -> Result<Vec<f64>> {
    let red_band = cube.axis().nearest_band(red_nm)?;
    let nir_band = cube.axis().nearest_band(nir_nm)?;
    let red = cube.band(red_band);
    let nir = cube.band(nir_band);
    Ok(red
        .iter()
        .zip(nir)
        .map(|(&r, &n)| {
            let r = f64::from(r);
            let n = f64::from(n);
            (n - r) / (n + r + RATIO_EPSILON)
        })
        .collect())
}

/// Segment fruit pixels by Otsu-thresholded NDVI.
pub fn ndvi_segment(cube: &Hypercube, params: &NdviParams) -> Result<PixelMask> {
    let ndvi = ndvi_map(cube, params.red_nm, params.nir_nm)?;
    let threshold = otsu_threshold(&ndvi);
    let bits = ndvi
        .iter()
        .map(|&v| match params.polarity {
            NdviPolarity::FruitLower => v <= threshold,
            NdviPolarity::FruitHigher => v > threshold,
        })
        .collect();
    PixelMask::new(cube.height(), cube.width(), bits)
}

/// Arithmetic mean spectrum over the mask's foreground pixels.
pub fn instance_mean_spectrum(cube: &Hypercube, mask: &PixelMask) -> Result<Spectrum> {
    if !mask.matches_cube(cube) {
        return Err(Error::shape("mask dimensions do not match cube"));
    }
    let count = mask.foreground_count();
    if count == 0 {
        return Err(Error::domain("mask selects no foreground pixels"));
    }
    let indices: Vec<usize> = mask.foreground_indices().collect();
    let mut means = Vec::with_capacity(cube.bands());
    for b in 0..cube.bands() {
        let band = cube.band(b);
        let sum: f64 = indices.iter().map(|&p| f64::from(band[p])).sum();
        means.push(sum / count as f64);
    }
    Spectrum::new(means, cube.axis().clone())
}
