//! Statistical features over subband windows, binary feature masks and
//! dual-band feature assembly.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

/// Number of statistical features per window.
pub const FEATURE_COUNT: usize = 9;

/// The nine features in canonical order. Positional features (argmax,
/// argmin) are wavelengths in micrometers so their values stay in [0, 1]
/// over the VNIR range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Max,
    Min,
    Argmax,
    Argmin,
    Mean,
    Median,
    Area,
    Skewness,
    Kurtosis,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; FEATURE_COUNT] = [
        FeatureKind::Max,
        FeatureKind::Min,
        FeatureKind::Argmax,
        FeatureKind::Argmin,
        FeatureKind::Mean,
        FeatureKind::Median,
        FeatureKind::Area,
        FeatureKind::Skewness,
        FeatureKind::Kurtosis,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Max => "max",
            FeatureKind::Min => "min",
            FeatureKind::Argmax => "argmax",
            FeatureKind::Argmin => "argmin",
            FeatureKind::Mean => "mean",
            FeatureKind::Median => "median",
            FeatureKind::Area => "area",
            FeatureKind::Skewness => "skewness",
            FeatureKind::Kurtosis => "kurtosis",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| Error::parameter(format!("unknown feature name '{s}'")))
    }

    pub fn bit(&self) -> u16 {
        1 << FeatureKind::ALL.iter().position(|k| k == self).unwrap()
    }
}

/// Contiguous wavelength window in nanometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubbandWindow {
    pub lo_nm: f64,
    pub hi_nm: f64,
}

impl SubbandWindow {
    pub fn new(lo_nm: f64, hi_nm: f64) -> Result<Self> {
        if !(lo_nm < hi_nm) {
            return Err(Error::parameter(format!(
                "window needs lo < hi, got [{lo_nm}, {hi_nm}]"
            )));
        }
        Ok(SubbandWindow { lo_nm, hi_nm })
    }

    pub fn width_nm(&self) -> f64 {
        self.hi_nm - self.lo_nm
    }

    /// Length of the overlap with another window, in nm (0 when disjoint).
    pub fn overlap_nm(&self, other: &SubbandWindow) -> f64 {
        (self.hi_nm.min(other.hi_nm) - self.lo_nm.max(other.lo_nm)).max(0.0)
    }

    /// Total order by (lo, hi); used for canonical ledger sorting.
    pub fn cmp_key(&self, other: &SubbandWindow) -> std::cmp::Ordering {
        self.lo_nm
            .total_cmp(&other.lo_nm)
            .then(self.hi_nm.total_cmp(&other.hi_nm))
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.lo_nm, self.hi_nm)
    }

    pub fn parse_label(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once('-')
            .ok_or_else(|| Error::parameter(format!("bad window label '{s}'")))?;
        let lo: f64 = lo
            .parse()
            .map_err(|_| Error::parameter(format!("bad window bound '{lo}'")))?;
        let hi: f64 = hi
            .parse()
            .map_err(|_| Error::parameter(format!("bad window bound '{hi}'")))?;
        SubbandWindow::new(lo, hi)
    }
}

/// 9-bit selector over the canonical feature order; the zero mask is
/// never valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureMask(u16);

impl FeatureMask {
    pub const FULL: FeatureMask = FeatureMask(0x1ff);

    pub fn new(bits: u16) -> Result<Self> {
        if bits == 0 {
            return Err(Error::parameter("the zero feature mask is excluded"));
        }
        if bits > 0x1ff {
            return Err(Error::parameter(format!(
                "feature mask {bits:#x} uses more than 9 bits"
            )));
        }
        Ok(FeatureMask(bits))
    }

    pub fn from_kinds(kinds: &[FeatureKind]) -> Result<Self> {
        let mut bits = 0;
        for k in kinds {
            bits |= k.bit();
        }
        FeatureMask::new(bits)
    }

    pub fn bits(&self) -> u16 {
        self.0
    }

    pub fn contains(&self, kind: FeatureKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn popcount(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn kinds(&self) -> impl Iterator<Item = FeatureKind> + '_ {
        FeatureKind::ALL.iter().copied().filter(|k| self.contains(*k))
    }

    /// Complement within the 9 feature bits; None when self is full.
    pub fn complement(&self) -> Option<FeatureMask> {
        let bits = !self.0 & 0x1ff;
        (bits != 0).then_some(FeatureMask(bits))
    }

    /// `max+argmax` style label.
    pub fn label(&self) -> String {
        self.kinds()
            .map(|k| k.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Parse `max+argmax` (also accepts commas as separators).
    pub fn parse_label(s: &str) -> Result<Self> {
        let kinds: Vec<FeatureKind> = s
            .split(['+', ','])
            .map(|p| FeatureKind::parse(p.trim()))
            .collect::<Result<_>>()?;
        FeatureMask::from_kinds(&kinds)
    }
}

impl std::fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for FeatureMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for FeatureMask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        FeatureMask::parse_label(&s).map_err(D::Error::custom)
    }
}

/// The nine statistical measures of one subband slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub max: f64,
    pub min: f64,
    pub argmax_um: f64,
    pub argmin_um: f64,
    pub mean: f64,
    pub median: f64,
    pub area: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.max,
            self.min,
            self.argmax_um,
            self.argmin_um,
            self.mean,
            self.median,
            self.area,
            self.skewness,
            self.kurtosis,
        ]
    }
}

/// Windows plus matching masks selected by the search; the trained
/// classifiers consume the concatenated masked features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBandFeatureSet {
    pub windows: Vec<SubbandWindow>,
    pub masks: Vec<FeatureMask>,
}

impl DualBandFeatureSet {
    pub fn new(windows: Vec<SubbandWindow>, masks: Vec<FeatureMask>) -> Result<Self> {
        if windows.is_empty() || windows.len() != masks.len() {
            return Err(Error::parameter(
                "feature set needs equally many windows and masks (>= 1)",
            ));
        }
        Ok(DualBandFeatureSet { windows, masks })
    }

    pub fn feature_dim(&self) -> usize {
        self.masks.iter().map(|m| m.popcount()).sum()
    }

    /// Largest pairwise window overlap in nm.
    pub fn max_window_overlap_nm(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.windows.len() {
            for j in i + 1..self.windows.len() {
                worst = worst.max(self.windows[i].overlap_nm(&self.windows[j]));
            }
        }
        worst
    }

    /// Column names for exported feature tables, e.g. `argmax@510-670`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_dim());
        for (w, m) in self.windows.iter().zip(&self.masks) {
            for kind in m.kinds() {
                names.push(format!("{}@{}", kind.as_str(), w.label()));
            }
        }
        names
    }
}

/// Contiguous sub-spectrum whose wavelengths lie in [lo, hi] inclusive.
pub fn slice_window(s: &Spectrum, w: &SubbandWindow) -> Result<Spectrum> {
    let range = s.axis().band_range(w.lo_nm, w.hi_nm)?;
    let values = s.values()[range.clone()].to_vec();
    Spectrum::new(values, s.axis().slice(range))
}

/// Compute all nine features from raw samples and their wavelengths (nm).
///
/// Extremum ties take the first occurrence scanning from the low-wavelength
/// end. A constant segment gets skewness 0 and kurtosis 3 by convention.
pub fn features_from_samples(values: &[f64], wavelengths_nm: &[f64]) -> Result<FeatureVector> {
    let n = values.len();
    if n < 3 {
        return Err(Error::domain(format!(
            "feature extraction needs >= 3 samples, got {n}"
        )));
    }
    debug_assert_eq!(n, wavelengths_nm.len());

    let mut max = values[0];
    let mut min = values[0];
    let mut imax = 0;
    let mut imin = 0;
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if v > max {
            max = v;
            imax = i;
        }
        if v < min {
            min = v;
            imin = i;
        }
        sum += v;
    }
    let mean = sum / n as f64;

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    // Trapezoidal integral over the micrometer axis.
    let mut area = 0.0;
    for i in 0..n - 1 {
        let dw_um = (wavelengths_nm[i + 1] - wavelengths_nm[i]) / 1000.0;
        area += 0.5 * (values[i] + values[i + 1]) * dw_um;
    }

    let (skewness, kurtosis) = if max == min {
        (0.0, 3.0)
    } else {
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for &v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n as f64;
        m3 /= n as f64;
        m4 /= n as f64;
        if m2 <= 0.0 {
            (0.0, 3.0)
        } else {
            (m3 / m2.powf(1.5), m4 / (m2 * m2))
        }
    };

    Ok(FeatureVector {
        max,
        min,
        argmax_um: wavelengths_nm[imax] / 1000.0,
        argmin_um: wavelengths_nm[imin] / 1000.0,
        mean,
        median,
        area,
        skewness,
        kurtosis,
    })
}

/// Feature vector of a whole spectrum (usually a window slice).
pub fn compute_features(s: &Spectrum) -> Result<FeatureVector> {
    features_from_samples(s.values(), s.axis().values())
}

/// Select the masked components in canonical order.
pub fn apply_mask(fv: &FeatureVector, mask: &FeatureMask) -> Vec<f64> {
    let all = fv.as_array();
    FeatureKind::ALL
        .iter()
        .enumerate()
        .filter(|(_, k)| mask.contains(**k))
        .map(|(i, _)| all[i])
        .collect()
}

/// Concatenated masked features over every window of the set, in window
/// order; the result has `set.feature_dim()` entries.
pub fn assemble_dual(s: &Spectrum, set: &DualBandFeatureSet) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(set.feature_dim());
    for (w, m) in set.windows.iter().zip(&set.masks) {
        let sliced = slice_window(s, w)?;
        let fv = compute_features(&sliced)?;
        out.extend(apply_mask(&fv, m));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::WavelengthAxis;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vnir_axis() -> WavelengthAxis {
        WavelengthAxis::linspace(450.0, 850.0, 401).unwrap()
    }

    #[test]
    fn slice_full_axis_is_identity() {
        let axis = vnir_axis();
        let values: Vec<f64> = (0..axis.len()).map(|i| i as f64 * 0.001).collect();
        let s = Spectrum::new(values, axis).unwrap();
        let w = SubbandWindow::new(450.0, 850.0).unwrap();
        assert_eq!(slice_window(&s, &w).unwrap(), s);
    }

    #[test]
    fn slice_is_inclusive_and_validates() {
        let axis = vnir_axis();
        let s = Spectrum::new(vec![0.5; axis.len()], axis).unwrap();
        let w = SubbandWindow::new(510.0, 670.0).unwrap();
        assert_eq!(slice_window(&s, &w).unwrap().len(), 161);
        let out = SubbandWindow::new(900.0, 950.0).unwrap();
        assert!(matches!(
            slice_window(&s, &out),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn ramp_features_are_exact() {
        let axis = WavelengthAxis::linspace(500.0, 600.0, 101).unwrap();
        let values: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let s = Spectrum::new(values, axis).unwrap();
        let fv = compute_features(&s).unwrap();
        assert_eq!(fv.max, 1.0);
        assert_eq!(fv.min, 0.0);
        assert!((fv.argmax_um - 0.600).abs() < 1e-12);
        assert!((fv.argmin_um - 0.500).abs() < 1e-12);
        assert!((fv.mean - 0.5).abs() < 1e-12);
        assert!((fv.median - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_segment_conventions() {
        let axis = WavelengthAxis::linspace(500.0, 600.0, 11).unwrap();
        let s = Spectrum::new(vec![0.4; 11], axis).unwrap();
        let fv = compute_features(&s).unwrap();
        assert_eq!(fv.max, 0.4);
        assert_eq!(fv.min, 0.4);
        assert_eq!(fv.skewness, 0.0);
        assert_eq!(fv.kurtosis, 3.0);
        assert!((fv.area - 0.4 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_is_domain_error() {
        let axis = WavelengthAxis::new(vec![500.0, 501.0]).unwrap();
        let s = Spectrum::new(vec![0.1, 0.2], axis).unwrap();
        assert!(matches!(compute_features(&s), Err(Error::Domain(_))));
    }

    /// Direct-summation oracle, written independently of the implementation.
    fn oracle(values: &[f64], wl_nm: &[f64]) -> [f64; 9] {
        let n = values.len();
        let mut max_v = f64::NEG_INFINITY;
        let mut min_v = f64::INFINITY;
        let mut arg_max = 0.0;
        let mut arg_min = 0.0;
        for i in 0..n {
            if values[i] > max_v {
                max_v = values[i];
                arg_max = wl_nm[i] / 1000.0;
            }
            if values[i] < min_v {
                min_v = values[i];
                arg_min = wl_nm[i] / 1000.0;
            }
        }
        let mean: f64 = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let mut area = 0.0;
        for i in 1..n {
            area += (values[i] + values[i - 1]) / 2.0 * (wl_nm[i] - wl_nm[i - 1]) / 1000.0;
        }
        let m = |p: i32| values.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n as f64;
        let (skew, kurt) = if max_v == min_v {
            (0.0, 3.0)
        } else {
            (m(3) / m(2).powf(1.5), m(4) / (m(2) * m(2)))
        };
        [max_v, min_v, arg_max, arg_min, mean, median, area, skew, kurt]
    }

    #[test]
    fn gaussian_bump_matches_oracle() {
        let axis = WavelengthAxis::linspace(510.0, 670.0, 161).unwrap();
        let values: Vec<f64> = axis
            .values()
            .iter()
            .map(|w| 0.2 + 0.5 * (-((w - 550.0) * (w - 550.0)) / (2.0 * 20.0 * 20.0)).exp())
            .collect();
        let s = Spectrum::new(values.clone(), axis.clone()).unwrap();
        let fv = compute_features(&s).unwrap();
        assert!((fv.argmax_um - 0.550).abs() < 1e-12);
        let want = oracle(&values, axis.values());
        for (got, want) in fv.as_array().iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn thousand_random_spectra_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let n = rng.gen_range(3..80);
            let lo = rng.gen_range(450.0..700.0);
            let hi = lo + rng.gen_range(5.0..150.0);
            let axis = WavelengthAxis::linspace(lo, hi, n).unwrap();
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..2.0)).collect();
            let got = features_from_samples(&values, axis.values()).unwrap();
            let want = oracle(&values, axis.values());
            for (g, w) in got.as_array().iter().zip(want.iter()) {
                assert!((g - w).abs() < 1e-9, "feature deviates: {g} vs {w}");
            }
        }
    }

    #[test]
    fn extremum_ties_take_first_occurrence() {
        let axis = WavelengthAxis::new(vec![500.0, 510.0, 520.0, 530.0]).unwrap();
        let s = Spectrum::new(vec![0.9, 0.1, 0.9, 0.1], axis).unwrap();
        let fv = compute_features(&s).unwrap();
        assert!((fv.argmax_um - 0.500).abs() < 1e-12);
        assert!((fv.argmin_um - 0.510).abs() < 1e-12);
    }

    #[test]
    fn mask_selects_canonical_order() {
        let fv = FeatureVector {
            max: 1.0,
            min: 2.0,
            argmax_um: 3.0,
            argmin_um: 4.0,
            mean: 5.0,
            median: 6.0,
            area: 7.0,
            skewness: 8.0,
            kurtosis: 9.0,
        };
        let full = apply_mask(&fv, &FeatureMask::FULL);
        assert_eq!(full, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let m = FeatureMask::from_kinds(&[FeatureKind::Max, FeatureKind::Argmax]).unwrap();
        assert_eq!(apply_mask(&fv, &m), vec![1.0, 3.0]);
        assert!(FeatureMask::new(0).is_err());
    }

    #[test]
    fn mask_labels_round_trip() {
        for bits in 1u16..=0x1ff {
            let m = FeatureMask::new(bits).unwrap();
            assert_eq!(FeatureMask::parse_label(&m.label()).unwrap(), m);
        }
        assert_eq!(
            FeatureMask::parse_label("max,argmax").unwrap(),
            FeatureMask::from_kinds(&[FeatureKind::Max, FeatureKind::Argmax]).unwrap()
        );
    }

    fn bumpy_spectrum() -> Spectrum {
        let axis = vnir_axis();
        let values: Vec<f64> = axis
            .values()
            .iter()
            .map(|w| {
                0.2 + 0.5 * (-((w - 560.0) * (w - 560.0)) / (2.0 * 400.0)).exp()
                    - 0.1 * (-((w - 730.0) * (w - 730.0)) / (2.0 * 900.0)).exp()
            })
            .collect();
        Spectrum::new(values, axis).unwrap()
    }

    #[test]
    fn assemble_dual_concatenates_in_window_order() {
        let s = bumpy_spectrum();
        // Two-band selection with 2 + 2 features.
        let set = DualBandFeatureSet::new(
            vec![
                SubbandWindow::new(510.0, 670.0).unwrap(),
                SubbandWindow::new(670.0, 790.0).unwrap(),
            ],
            vec![
                FeatureMask::parse_label("max+argmax").unwrap(),
                FeatureMask::parse_label("min+argmin").unwrap(),
            ],
        )
        .unwrap();
        let v = assemble_dual(&s, &set).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(set.feature_dim(), 4);

        // A 2 + 4 selection yields six features.
        let set6 = DualBandFeatureSet::new(
            vec![
                SubbandWindow::new(510.0, 650.0).unwrap(),
                SubbandWindow::new(650.0, 770.0).unwrap(),
            ],
            vec![
                FeatureMask::parse_label("argmax+argmin").unwrap(),
                FeatureMask::parse_label("max+min+argmax+argmin").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(assemble_dual(&s, &set6).unwrap().len(), 6);

        // Single window + full mask equals the direct composition.
        let w = SubbandWindow::new(510.0, 670.0).unwrap();
        let single =
            DualBandFeatureSet::new(vec![w], vec![FeatureMask::FULL]).unwrap();
        let direct = apply_mask(
            &compute_features(&slice_window(&s, &w).unwrap()).unwrap(),
            &FeatureMask::FULL,
        );
        assert_eq!(assemble_dual(&s, &single).unwrap(), direct);
    }

    #[test]
    fn feature_names_carry_window_suffix() {
        let set = DualBandFeatureSet::new(
            vec![
                SubbandWindow::new(510.0, 670.0).unwrap(),
                SubbandWindow::new(670.0, 790.0).unwrap(),
            ],
            vec![
                FeatureMask::parse_label("max+argmax").unwrap(),
                FeatureMask::parse_label("min+argmin").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(
            set.feature_names(),
            vec![
                "max@510-670",
                "argmax@510-670",
                "min@670-790",
                "argmin@670-790"
            ]
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scaling_and_shift_behave(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(5..60);
            let axis = WavelengthAxis::linspace(500.0, 700.0, n).unwrap();
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.5)).collect();
            let base = features_from_samples(&values, axis.values()).unwrap();

            // Positional features sit on grid wavelengths.
            prop_assert!(axis.values().iter().any(|w| w / 1000.0 == base.argmax_um));
            prop_assert!(axis.values().iter().any(|w| w / 1000.0 == base.argmin_um));

            let c = rng.gen_range(0.1..5.0);
            let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
            let fs = features_from_samples(&scaled, axis.values()).unwrap();
            prop_assert!((fs.max - c * base.max).abs() < 1e-9);
            prop_assert!((fs.min - c * base.min).abs() < 1e-9);
            prop_assert!((fs.mean - c * base.mean).abs() < 1e-9);
            prop_assert!((fs.median - c * base.median).abs() < 1e-9);
            prop_assert!((fs.area - c * base.area).abs() < 1e-9);
            prop_assert_eq!(fs.argmax_um, base.argmax_um);
            prop_assert_eq!(fs.argmin_um, base.argmin_um);
            prop_assert!((fs.skewness - base.skewness).abs() < 1e-7);
            prop_assert!((fs.kurtosis - base.kurtosis).abs() < 1e-7);

            let d = rng.gen_range(-0.5..0.5);
            let shifted: Vec<f64> = values.iter().map(|v| v + d).collect();
            let fd = features_from_samples(&shifted, axis.values()).unwrap();
            prop_assert_eq!(fd.argmax_um, base.argmax_um);
            prop_assert_eq!(fd.argmin_um, base.argmin_um);
            prop_assert!((fd.skewness - base.skewness).abs() < 1e-7);
            prop_assert!((fd.kurtosis - base.kurtosis).abs() < 1e-7);
        }

        #[test]
        fn complementary_masks_partition_features(bits in 1u16..0x1ff) {
            let m = FeatureMask::new(bits).unwrap();
            let c = m.complement().unwrap();
            prop_assert_eq!(m.popcount() + c.popcount(), FEATURE_COUNT);
            let fv = FeatureVector {
                max: 1.0, min: 2.0, argmax_um: 3.0, argmin_um: 4.0, mean: 5.0,
                median: 6.0, area: 7.0, skewness: 8.0, kurtosis: 9.0,
            };
            let mut union: Vec<f64> = apply_mask(&fv, &m);
            union.extend(apply_mask(&fv, &c));
            union.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert_eq!(union, apply_mask(&fv, &FeatureMask::FULL));
        }
    }
}
