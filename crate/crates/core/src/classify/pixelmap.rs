//! Pixel-wise classification maps: per-pixel features through a trained
//! model, with 0 reserved for background.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::classify::TrainedModel;
use crate::error::{Error, Result};
use crate::features::{apply_mask, features_from_samples, DualBandFeatureSet};
use crate::matrix::Matrix;
use crate::spectral::{Hypercube, PixelMask, Spectrum};

/// Fixed 8-color palette for rendered maps; index 0 is the black
/// background, 1..=7 run green to brown with ripeness.
pub const PALETTE: [[u8; 3]; 8] = [
    [0, 0, 0],
    [46, 139, 87],
    [240, 234, 214],
    [255, 182, 193],
    [250, 128, 114],
    [220, 20, 60],
    [139, 0, 0],
    [92, 44, 31],
];

/// H x W class-index image; 0 = background, 1..=k = class index + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    height: usize,
    width: usize,
    classes: Vec<u8>,
}

impl ClassMap {
    pub fn new(height: usize, width: usize, classes: Vec<u8>) -> Result<Self> {
        if classes.len() != height * width {
            return Err(Error::shape(format!(
                "class map has {} entries for a {}x{} grid",
                classes.len(),
                height,
                width
            )));
        }
        Ok(ClassMap {
            height,
            width,
            classes,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.classes[y * self.width + x]
    }
}

/// Assemble per-pixel features for every foreground pixel.
///
/// Shares its arithmetic with [`assemble_dual`]: each pixel spectrum is
/// sliced per window and reduced to the masked statistics.
pub(crate) fn pixel_feature_matrix(
    cube: &Hypercube,
    pixels: &[usize],
    set: &DualBandFeatureSet,
) -> Result<Matrix> {
    // Resolve windows to band ranges once per cube.
    let mut ranges = Vec::with_capacity(set.windows.len());
    for w in &set.windows {
        let range = cube.axis().band_range(w.lo_nm, w.hi_nm)?;
        if range.len() < 3 {
            return Err(Error::domain(format!(
                "window {} selects {} bands; need >= 3",
                w.label(),
                range.len()
            )));
        }
        ranges.push(range);
    }
    let hw = cube.pixels();
    let data = cube.data();
    let dim = set.feature_dim();
    let mut out = Matrix::zeros(pixels.len(), dim);
    let mut window_values: Vec<Vec<f64>> = ranges.iter().map(|r| vec![0.0; r.len()]).collect();
    for (row, &p) in pixels.iter().enumerate() {
        let mut col = 0;
        for ((range, mask), values) in ranges
            .iter()
            .zip(&set.masks)
            .zip(window_values.iter_mut())
        {
            for (slot, b) in values.iter_mut().zip(range.clone()) {
                *slot = f64::from(data[b * hw + p]);
            }
            let wl = &cube.axis().values()[range.clone()];
            let fv = features_from_samples(values, wl)?;
            for v in apply_mask(&fv, mask) {
                out.set(row, col, v);
                col += 1;
            }
        }
    }
    Ok(out)
}

/// Classify every foreground pixel of a cube; background stays 0.
pub fn classify_pixels(
    cube: &Hypercube,
    mask: &PixelMask,
    set: &DualBandFeatureSet,
    model: &TrainedModel,
) -> Result<ClassMap> {
    if !mask.matches_cube(cube) {
        return Err(Error::shape("mask dimensions do not match cube"));
    }
    if model.input_dim() != set.feature_dim() {
        return Err(Error::shape(format!(
            "model expects {} features but feature set yields {}",
            model.input_dim(),
            set.feature_dim()
        )));
    }
    let mut classes = vec![0u8; cube.pixels()];
    let pixels: Vec<usize> = mask.foreground_indices().collect();
    if pixels.is_empty() {
        return ClassMap::new(cube.height(), cube.width(), classes);
    }
    let x = pixel_feature_matrix(cube, &pixels, set)?;
    let pred = model.predict(&x)?;
    for (&p, label) in pixels.iter().zip(pred) {
        classes[p] = (label + 1) as u8;
    }
    ClassMap::new(cube.height(), cube.width(), classes)
}

/// Mean spectrum helper used by tests: a cube pixel as a `Spectrum`.
pub fn pixel_spectrum(cube: &Hypercube, y: usize, x: usize) -> Result<Spectrum> {
    let mut values = vec![0.0; cube.bands()];
    cube.pixel_spectrum_into(y * cube.width() + x, &mut values);
    Spectrum::new(values, cube.axis().clone())
}

/// Write a class map as binary 8-bit PGM (P5); values are class indices.
pub fn write_class_map_pgm(path: &Path, map: &ClassMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", map.width(), map.height())?;
    w.write_all(map.classes())?;
    Ok(())
}

/// Read back a P5 PGM written by [`write_class_map_pgm`].
pub fn read_class_map_pgm(path: &Path) -> Result<ClassMap> {
    let bytes = std::fs::read(path)?;
    let header_end = bytes
        .windows(1)
        .enumerate()
        .filter(|(_, w)| w[0] == b'\n')
        .map(|(i, _)| i)
        .nth(2)
        .ok_or_else(|| Error::data(format!("{}: truncated PGM header", path.display())))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::data(format!("{}: bad PGM header", path.display())))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("P5") {
        return Err(Error::data(format!("{}: not a P5 PGM", path.display())));
    }
    let width: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::data("bad PGM width".to_string()))?;
    let height: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::data("bad PGM height".to_string()))?;
    let payload = &bytes[header_end + 1..];
    if payload.len() != width * height {
        return Err(Error::data(format!(
            "{}: PGM payload is {} bytes, expected {}",
            path.display(),
            payload.len(),
            width * height
        )));
    }
    ClassMap::new(height, width, payload.to_vec())
}

/// Render the class map as an RGB PNG with the fixed palette.
pub fn write_class_map_png(path: &Path, map: &ClassMap) -> Result<()> {
    let mut img = image::RgbImage::new(map.width() as u32, map.height() as u32);
    for y in 0..map.height() {
        for x in 0..map.width() {
            let idx = map.get(y, x) as usize;
            let color = PALETTE[idx.min(PALETTE.len() - 1)];
            img.put_pixel(x as u32, y as u32, image::Rgb(color));
        }
    }
    img.save(path)
        .map_err(|e| Error::data(format!("failed to write PNG {}: {e}", path.display())))
}

/// Write the palette as CSV (`index,r,g,b`); stable across runs.
pub fn write_palette_csv(path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,r,g,b")?;
    for (i, c) in PALETTE.iter().enumerate() {
        writeln!(w, "{},{},{},{}", i, c[0], c[1], c[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::svm::{train_svm, SvmTrainConfig};
    use crate::features::{assemble_dual, FeatureMask, SubbandWindow};
    use crate::spectral::{CubeKind, WavelengthAxis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn axis() -> WavelengthAxis {
        WavelengthAxis::linspace(450.0, 850.0, 101).unwrap()
    }

    fn class_spectrum(axis: &WavelengthAxis, center_nm: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        axis.values()
            .iter()
            .map(|w| {
                0.2 + 0.5 * (-((w - center_nm) * (w - center_nm)) / (2.0 * 225.0)).exp()
                    + rng.gen_range(-0.01..0.01)
            })
            .collect()
    }

    fn feature_set() -> DualBandFeatureSet {
        DualBandFeatureSet::new(
            vec![SubbandWindow::new(510.0, 670.0).unwrap()],
            vec![FeatureMask::parse_label("max+argmax").unwrap()],
        )
        .unwrap()
    }

    fn train_two_class_model(set: &DualBandFeatureSet) -> TrainedModel {
        let ax = axis();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, center) in [540.0, 620.0].iter().enumerate() {
            for _ in 0..30 {
                let values = class_spectrum(&ax, *center, &mut rng);
                let s = Spectrum::new(values, ax.clone()).unwrap();
                rows.push(assemble_dual(&s, set).unwrap());
                labels.push(label);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let names = vec!["A".to_string(), "B".to_string()];
        TrainedModel::Svm(train_svm(&x, &labels, &names, &SvmTrainConfig::default()).unwrap())
    }

    fn halves_cube(h: usize, w: usize) -> (Hypercube, PixelMask) {
        let ax = axis();
        let b = ax.len();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut data = vec![0.0f32; h * w * b];
        for y in 0..h {
            for x in 0..w {
                let center = if x < w / 2 { 540.0 } else { 620.0 };
                let spec = class_spectrum(&ax, center, &mut rng);
                for (band, v) in spec.iter().enumerate() {
                    data[band * h * w + y * w + x] = *v as f32;
                }
            }
        }
        let cube = Hypercube::new(h, w, CubeKind::Reflectance, ax, data).unwrap();
        let mask = PixelMask::filled(h, w, true);
        (cube, mask)
    }

    #[test]
    fn two_spatial_halves_match_their_classes() {
        let set = feature_set();
        let model = train_two_class_model(&set);
        let (cube, mask) = halves_cube(8, 10);
        let map = classify_pixels(&cube, &mask, &set, &model).unwrap();
        let mut correct = 0;
        for y in 0..8 {
            for x in 0..10 {
                let want = if x < 5 { 1 } else { 2 };
                if map.get(y, x) == want {
                    correct += 1;
                }
            }
        }
        assert!(correct as f64 / 80.0 >= 0.95, "only {correct}/80 correct");
    }

    #[test]
    fn uniform_cube_predicts_one_class() {
        let set = feature_set();
        let model = train_two_class_model(&set);
        let ax = axis();
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let spec = class_spectrum(&ax, 540.0, &mut rng);
        let b = ax.len();
        let mut data = vec![0.0f32; 4 * 5 * b];
        for band in 0..b {
            for p in 0..20 {
                data[band * 20 + p] = spec[band] as f32;
            }
        }
        let cube = Hypercube::new(4, 5, CubeKind::Reflectance, ax, data).unwrap();
        let mask = PixelMask::filled(4, 5, true);
        let map = classify_pixels(&cube, &mask, &set, &model).unwrap();
        let first = map.classes()[0];
        assert!(first != 0);
        assert!(map.classes().iter().all(|&c| c == first));
    }

    #[test]
    fn background_only_mask_yields_zero_map() {
        let set = feature_set();
        let model = train_two_class_model(&set);
        let (cube, _) = halves_cube(3, 4);
        let empty = PixelMask::filled(3, 4, false);
        let map = classify_pixels(&cube, &empty, &set, &model).unwrap();
        assert!(map.classes().iter().all(|&c| c == 0));
    }

    #[test]
    fn foreground_exactly_nonzero() {
        let set = feature_set();
        let model = train_two_class_model(&set);
        let (cube, _) = halves_cube(4, 6);
        let mut mask = PixelMask::filled(4, 6, false);
        mask.set(1, 1, true);
        mask.set(2, 4, true);
        let map = classify_pixels(&cube, &mask, &set, &model).unwrap();
        for y in 0..4 {
            for x in 0..6 {
                let fg = mask.get(y, x);
                assert_eq!(map.get(y, x) != 0, fg);
            }
        }
    }

    #[test]
    fn wrong_feature_dim_is_shape_error() {
        let set = feature_set();
        let model = train_two_class_model(&set);
        let wide = DualBandFeatureSet::new(
            vec![
                SubbandWindow::new(510.0, 670.0).unwrap(),
                SubbandWindow::new(670.0, 790.0).unwrap(),
            ],
            vec![
                FeatureMask::parse_label("max+argmax").unwrap(),
                FeatureMask::parse_label("min").unwrap(),
            ],
        )
        .unwrap();
        let (cube, mask) = halves_cube(2, 2);
        assert!(matches!(
            classify_pixels(&cube, &mask, &wide, &model),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn pixel_features_agree_with_assemble_dual() {
        let set = feature_set();
        let (cube, _) = halves_cube(3, 3);
        let pixels: Vec<usize> = (0..9).collect();
        let direct = pixel_feature_matrix(&cube, &pixels, &set).unwrap();
        for (p, want_row) in pixels.iter().zip(direct.iter_rows()) {
            let s = pixel_spectrum(&cube, p / 3, p % 3).unwrap();
            let via_spectrum = assemble_dual(&s, &set).unwrap();
            assert_eq!(want_row, via_spectrum.as_slice());
        }
    }

    #[test]
    fn pgm_round_trip_and_png() {
        let dir = tempfile::tempdir().unwrap();
        let map = ClassMap::new(2, 3, vec![0, 1, 2, 3, 0, 7]).unwrap();
        let pgm = dir.path().join("map.pgm");
        write_class_map_pgm(&pgm, &map).unwrap();
        assert_eq!(read_class_map_pgm(&pgm).unwrap(), map);
        let png = dir.path().join("map.png");
        write_class_map_png(&png, &map).unwrap();
        let img = image::open(&png).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(0, 0).0, PALETTE[0]);
        assert_eq!(img.get_pixel(1, 0).0, PALETTE[1]);
        assert_eq!(img.get_pixel(2, 1).0, PALETTE[7]);
    }
}
