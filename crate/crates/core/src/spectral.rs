//! Core spectral data types: wavelength axes, hypercubes, spectra and
//! pixel masks.
//!
//! Hypercube voxels are stored band-sequential (all of band 0, then band 1,
//! ...), matching the HSC v1 container so that file round-trips are
//! bit-exact.

use crate::error::{Error, Result};

/// Ordered wavelength axis in nanometers.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthAxis {
    wavelengths_nm: Vec<f64>,
}

impl WavelengthAxis {
    /// Build an axis from strictly increasing wavelengths in [100, 3000] nm.
    pub fn new(wavelengths_nm: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.is_empty() {
            return Err(Error::parameter("wavelength axis must be non-empty"));
        }
        for w in &wavelengths_nm {
            if !w.is_finite() || *w < 100.0 || *w > 3000.0 {
                return Err(Error::parameter(format!(
                    "wavelength {w} nm outside sanity range [100, 3000]"
                )));
            }
        }
        for pair in wavelengths_nm.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::parameter(format!(
                    "wavelengths must be strictly increasing, got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(WavelengthAxis { wavelengths_nm })
    }

    /// Evenly spaced axis with `n` samples covering [lo_nm, hi_nm] inclusive.
    pub fn linspace(lo_nm: f64, hi_nm: f64, n: usize) -> Result<Self> {
        if n < 2 || hi_nm <= lo_nm {
            return Err(Error::parameter("linspace needs n >= 2 and hi > lo"));
        }
        let values = (0..n)
            .map(|i| lo_nm + (hi_nm - lo_nm) * i as f64 / (n - 1) as f64)
            .collect();
        WavelengthAxis::new(values)
    }

    pub fn len(&self) -> usize {
        self.wavelengths_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths_nm.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn min_nm(&self) -> f64 {
        self.wavelengths_nm[0]
    }

    pub fn max_nm(&self) -> f64 {
        *self.wavelengths_nm.last().unwrap()
    }

    pub fn contains(&self, nm: f64) -> bool {
        nm >= self.min_nm() && nm <= self.max_nm()
    }

    /// Index of the band closest to `nm`. The axis is sorted so a binary
    /// search plus a neighbor comparison suffices; ties take the lower band.
    pub fn nearest_band(&self, nm: f64) -> Result<usize> {
        if !self.contains(nm) {
            return Err(Error::parameter(format!(
                "wavelength {nm} nm outside axis range [{}, {}]",
                self.min_nm(),
                self.max_nm()
            )));
        }
        let idx = self
            .wavelengths_nm
            .partition_point(|&w| w < nm)
            .min(self.len() - 1);
        if idx == 0 {
            return Ok(0);
        }
        let below = idx - 1;
        if (nm - self.wavelengths_nm[below]).abs() <= (self.wavelengths_nm[idx] - nm).abs() {
            Ok(below)
        } else {
            Ok(idx)
        }
    }

    /// Inclusive index range of bands whose wavelength lies in [lo, hi].
    pub fn band_range(&self, lo_nm: f64, hi_nm: f64) -> Result<std::ops::Range<usize>> {
        if lo_nm >= hi_nm {
            return Err(Error::parameter(format!(
                "window bounds must satisfy lo < hi, got [{lo_nm}, {hi_nm}]"
            )));
        }
        if lo_nm < self.min_nm() || hi_nm > self.max_nm() {
            return Err(Error::parameter(format!(
                "window [{lo_nm}, {hi_nm}] nm outside axis range [{}, {}]",
                self.min_nm(),
                self.max_nm()
            )));
        }
        let start = self.wavelengths_nm.partition_point(|&w| w < lo_nm);
        let end = self.wavelengths_nm.partition_point(|&w| w <= hi_nm);
        if start >= end {
            return Err(Error::parameter(format!(
                "window [{lo_nm}, {hi_nm}] nm selects no bands"
            )));
        }
        Ok(start..end)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> WavelengthAxis {
        WavelengthAxis {
            wavelengths_nm: self.wavelengths_nm[range].to_vec(),
        }
    }
}

/// Whether cube voxels are raw sensor counts or calibrated reflectance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeKind {
    RawIntensity,
    Reflectance,
}

impl CubeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CubeKind::RawIntensity => "raw",
            CubeKind::Reflectance => "reflectance",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(CubeKind::RawIntensity),
            "reflectance" => Ok(CubeKind::Reflectance),
            other => Err(Error::data(format!("unknown cube kind '{other}'"))),
        }
    }
}

/// H x W x B voxel volume with its wavelength axis.
///
/// Layout is band-sequential: `data[b * H * W + y * W + x]`.
#[derive(Debug, Clone)]
pub struct Hypercube {
    height: usize,
    width: usize,
    kind: CubeKind,
    axis: WavelengthAxis,
    data: Vec<f32>,
}

impl Hypercube {
    pub fn new(
        height: usize,
        width: usize,
        kind: CubeKind,
        axis: WavelengthAxis,
        data: Vec<f32>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("cube must have nonzero spatial size"));
        }
        if data.len() != height * width * axis.len() {
            return Err(Error::shape(format!(
                "cube data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                axis.len()
            )));
        }
        if kind == CubeKind::Reflectance && data.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(
                "reflectance cube contains non-finite values",
            ));
        }
        Ok(Hypercube {
            height,
            width,
            kind,
            axis,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.axis.len()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn kind(&self) -> CubeKind {
        self.kind
    }

    pub fn axis(&self) -> &WavelengthAxis {
        &self.axis
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// All voxel values of one band, row-major over pixels.
    pub fn band(&self, b: usize) -> &[f32] {
        let hw = self.pixels();
        &self.data[b * hw..(b + 1) * hw]
    }

    pub fn value(&self, y: usize, x: usize, b: usize) -> f32 {
        self.data[b * self.pixels() + y * self.width + x]
    }

    /// Copy the spectrum of one pixel (by flat pixel index) into `out`.
    pub fn pixel_spectrum_into(&self, pixel: usize, out: &mut [f64]) {
        let hw = self.pixels();
        for (b, slot) in out.iter_mut().enumerate() {
            *slot = f64::from(self.data[b * hw + pixel]);
        }
    }

    pub fn same_geometry(&self, other: &Hypercube) -> bool {
        self.height == other.height && self.width == other.width && self.axis == other.axis
    }
}

/// A single spectrum with its wavelength axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    axis: WavelengthAxis,
}

impl Spectrum {
    pub fn new(values: Vec<f64>, axis: WavelengthAxis) -> Result<Self> {
        if values.len() != axis.len() {
            return Err(Error::shape(format!(
                "spectrum has {} values but axis has {} bands",
                values.len(),
                axis.len()
            )));
        }
        Ok(Spectrum { values, axis })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn axis(&self) -> &WavelengthAxis {
        &self.axis
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Boolean foreground mask aligned with a cube's spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::shape(format!(
                "mask has {} bits for a {}x{} grid",
                bits.len(),
                height,
                width
            )));
        }
        Ok(PixelMask {
            height,
            width,
            bits,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        PixelMask {
            height,
            width,
            bits: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Flat pixel indices of foreground pixels, in row-major order.
    pub fn foreground_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
    }

    pub fn matches_cube(&self, cube: &Hypercube) -> bool {
        self.height == cube.height() && self.width == cube.width()
    }
}
