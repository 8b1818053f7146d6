//! Dataset manifests, train/test splits, spectra ingestion and a
//! synthetic generator with planted dual-band class structure.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classify::Fruit;
use crate::error::{Error, Result};
use crate::features::SubbandWindow;
use crate::hsc;
use crate::preprocess::{instance_mean_spectrum, ndvi_segment, NdviParams};
use crate::seed::fold_seed;
use crate::spectral::{CubeKind, Hypercube, PixelMask, Spectrum, WavelengthAxis};

/// Class name vocabulary: a known fruit or an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassVocabulary {
    Fruit(Fruit),
    Custom(Vec<String>),
}

impl ClassVocabulary {
    pub fn names(&self) -> Vec<String> {
        match self {
            ClassVocabulary::Fruit(f) => f.class_names().iter().map(|s| s.to_string()).collect(),
            ClassVocabulary::Custom(names) => names.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ClassVocabulary::Fruit(f) => f.class_names().len(),
            ClassVocabulary::Custom(names) => names.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        match self {
            ClassVocabulary::Fruit(f) => f.class_names().iter().position(|n| *n == name),
            ClassVocabulary::Custom(names) => names.iter().position(|n| n == name),
        }
    }

    /// Header token: `strawberry`, `tomato` or `classes:a|b|c`.
    pub fn token(&self) -> String {
        match self {
            ClassVocabulary::Fruit(Fruit::Strawberry) => "strawberry".to_string(),
            ClassVocabulary::Fruit(Fruit::Tomato) => "tomato".to_string(),
            ClassVocabulary::Custom(names) => format!("classes:{}", names.join("|")),
        }
    }

    pub fn parse_token(s: &str) -> Result<Self> {
        match s {
            "strawberry" => Ok(ClassVocabulary::Fruit(Fruit::Strawberry)),
            "tomato" => Ok(ClassVocabulary::Fruit(Fruit::Tomato)),
            other => {
                if let Some(list) = other.strip_prefix("classes:") {
                    let names: Vec<String> =
                        list.split('|').map(|n| n.trim().to_string()).collect();
                    if names.is_empty() || names.iter().any(String::is_empty) {
                        return Err(Error::data(format!("bad class list '{list}'")));
                    }
                    Ok(ClassVocabulary::Custom(names))
                } else {
                    Err(Error::data(format!("unknown fruit vocabulary '{other}'")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::data(format!("unknown split '{other}'"))),
        }
    }
}

/// One dataset instance: where its spectrum comes from and its label.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub instance_id: String,
    /// `file.hsc` for cubes or `file.csv:<row>` for spectra rows.
    pub path: String,
    pub class_index: usize,
    pub split: Split,
}

/// Parsed and validated dataset manifest.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub vocab: ClassVocabulary,
    pub axis: WavelengthAxis,
    pub entries: Vec<ManifestEntry>,
    /// Directory every relative path resolves against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.vocab.len()];
        for e in &self.entries {
            counts[e.class_index] += 1;
        }
        counts
    }

    pub fn split_counts(&self) -> (usize, usize) {
        let train = self.entries.iter().filter(|e| e.split == Split::Train).count();
        (train, self.entries.len() - train)
    }
}

/// Manifest format (line oriented text):
///   line 1: `HSMANIFEST1 fruit=<vocab> axis=<file>`
///   line 2: `instance_id,path,class,split` (fixed column header)
///   then:   one entry per line
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = File::open(path).map_err(|e| {
        Error::data(format!("cannot open manifest {}: {e}", path.display()))
    })?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::data(format!("{}: empty manifest", path.display())))??;
    let mut vocab = None;
    let mut axis_file = None;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("HSMANIFEST1") {
        return Err(Error::data(format!(
            "{}: not an HSMANIFEST1 file",
            path.display()
        )));
    }
    for field in fields {
        if let Some(v) = field.strip_prefix("fruit=") {
            vocab = Some(ClassVocabulary::parse_token(v)?);
        } else if let Some(v) = field.strip_prefix("axis=") {
            axis_file = Some(v.to_string());
        } else {
            return Err(Error::data(format!(
                "{}: unknown manifest header field '{field}'",
                path.display()
            )));
        }
    }
    let vocab = vocab
        .ok_or_else(|| Error::data(format!("{}: header names no fruit", path.display())))?;
    let axis_file = axis_file
        .ok_or_else(|| Error::data(format!("{}: header names no axis file", path.display())))?;
    let axis = hsc::read_axis(&base_dir.join(&axis_file))?;

    let columns = lines
        .next()
        .ok_or_else(|| Error::data(format!("{}: missing column header", path.display())))??;
    if columns.trim() != "instance_id,path,class,split" {
        return Err(Error::data(format!(
            "{}: column header must be 'instance_id,path,class,split'",
            path.display()
        )));
    }

    let mut entries = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut seen_paths = HashSet::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 4 {
            return Err(Error::data(format!(
                "{}: entry line {} needs 4 fields",
                path.display(),
                i + 3
            )));
        }
        let instance_id = cells[0].to_string();
        if !seen_ids.insert(instance_id.clone()) {
            return Err(Error::data(format!(
                "{}: duplicate instance id '{instance_id}'",
                path.display()
            )));
        }
        let entry_path = cells[1].to_string();
        if !seen_paths.insert(entry_path.clone()) {
            return Err(Error::data(format!(
                "{}: duplicate path '{entry_path}'",
                path.display()
            )));
        }
        let class_index = vocab.index_of(cells[2]).ok_or_else(|| {
            Error::data(format!(
                "{}: unknown class name '{}' for {}",
                path.display(),
                cells[2],
                vocab.token()
            ))
        })?;
        let split = Split::parse(cells[3])?;
        let data_file = base_dir.join(entry_path.split(':').next().unwrap());
        if !data_file.exists() {
            return Err(Error::data(format!(
                "{}: data file {} does not exist",
                path.display(),
                data_file.display()
            )));
        }
        entries.push(ManifestEntry {
            instance_id,
            path: entry_path,
            class_index,
            split,
        });
    }
    if entries.is_empty() {
        return Err(Error::data(format!(
            "{}: manifest lists no instances",
            path.display()
        )));
    }
    Ok(DatasetManifest {
        vocab,
        axis,
        entries,
        base_dir,
    })
}

pub fn write_manifest(
    path: &Path,
    vocab: &ClassVocabulary,
    axis_file: &str,
    entries: &[ManifestEntry],
) -> Result<()> {
    let names = vocab.names();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "HSMANIFEST1 fruit={} axis={}", vocab.token(), axis_file)?;
    writeln!(w, "instance_id,path,class,split")?;
    for e in entries {
        writeln!(
            w,
            "{},{},{},{}",
            e.instance_id,
            e.path,
            names[e.class_index],
            e.split.as_str()
        )?;
    }
    Ok(())
}

/// One training instance: a mean reflectance vector plus its class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpectrum {
    pub values: Vec<f64>,
    pub label: usize,
}

/// Instances sharing one wavelength axis and one class vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraDataset {
    pub axis: WavelengthAxis,
    pub instances: Vec<LabeledSpectrum>,
    pub class_names: Vec<String>,
}

impl SpectraDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> SpectraDataset {
        SpectraDataset {
            axis: self.axis.clone(),
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn spectrum(&self, i: usize) -> Result<Spectrum> {
        Spectrum::new(self.instances[i].values.clone(), self.axis.clone())
    }
}

/// Dataset loaded from a manifest, keeping the manifest's split column.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub data: SpectraDataset,
    pub splits: Vec<Split>,
}

impl LoadedDataset {
    /// Partition into (train, test) according to the manifest splits.
    pub fn partition(&self) -> (SpectraDataset, SpectraDataset) {
        let train: Vec<usize> = (0..self.data.len())
            .filter(|&i| self.splits[i] == Split::Train)
            .collect();
        let test: Vec<usize> = (0..self.data.len())
            .filter(|&i| self.splits[i] == Split::Test)
            .collect();
        (self.data.subset(&train), self.data.subset(&test))
    }
}

/// Load every instance spectrum referenced by the manifest.
///
/// Cube entries (`.hsc`) are segmented with the given NDVI parameters and
/// reduced to their foreground mean spectrum; CSV rows are used directly.
pub fn load_dataset(manifest: &DatasetManifest, ndvi: &NdviParams) -> Result<LoadedDataset> {
    let mut instances = Vec::with_capacity(manifest.entries.len());
    let mut splits = Vec::with_capacity(manifest.entries.len());
    // CSV files are parsed once and cached.
    let mut csv_cache: Vec<(String, Vec<(String, Vec<f64>)>)> = Vec::new();
    for entry in &manifest.entries {
        let values = if entry.path.ends_with(".hsc") {
            let cube = hsc::read_cube(&manifest.base_dir.join(&entry.path))?;
            if cube.kind() != CubeKind::Reflectance {
                return Err(Error::data(format!(
                    "{}: cube must be reflectance-calibrated",
                    entry.path
                )));
            }
            if cube.axis() != &manifest.axis {
                return Err(Error::data(format!(
                    "{}: cube axis differs from manifest axis",
                    entry.path
                )));
            }
            let mask = ndvi_segment(&cube, ndvi)?;
            instance_mean_spectrum(&cube, &mask)?.into_values()
        } else {
            let (file, row) = entry.path.rsplit_once(':').ok_or_else(|| {
                Error::data(format!(
                    "{}: spectra entries need a 'file.csv:<row>' path",
                    entry.path
                ))
            })?;
            let row: usize = row.parse().map_err(|_| {
                Error::data(format!("{}: bad row index '{row}'", entry.path))
            })?;
            let cached = csv_cache.iter().position(|(name, _)| name == file);
            let idx = match cached {
                Some(i) => i,
                None => {
                    let (axis, rows) = hsc::read_spectra_csv(&manifest.base_dir.join(file))?;
                    if axis != manifest.axis {
                        return Err(Error::data(format!(
                            "{file}: spectra axis differs from manifest axis"
                        )));
                    }
                    csv_cache.push((file.to_string(), rows));
                    csv_cache.len() - 1
                }
            };
            let rows = &csv_cache[idx].1;
            let (label, values) = rows.get(row).ok_or_else(|| {
                Error::data(format!("{file}: row {row} out of range ({})", rows.len()))
            })?;
            if manifest.vocab.index_of(label) != Some(entry.class_index) {
                return Err(Error::data(format!(
                    "{file}:{row}: row label '{label}' disagrees with manifest entry {}",
                    entry.instance_id
                )));
            }
            values.clone()
        };
        instances.push(LabeledSpectrum {
            values,
            label: entry.class_index,
        });
        splits.push(entry.split);
    }
    Ok(LoadedDataset {
        data: SpectraDataset {
            axis: manifest.axis.clone(),
            instances,
            class_names: manifest.vocab.names(),
        },
        splits,
    })
}

/// Outcome of a stratified split; indices partition `0..n`.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Per-class proportional split, deterministic in `seed`. Classes with a
/// single instance go wholly to train with a warning.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::parameter(format!(
            "test fraction must be in [0, 1], got {test_fraction}"
        )));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &label) in labels.iter().enumerate() {
        by_class[label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            warnings.push(format!(
                "class {class} has a single instance; placed wholly in train"
            ));
            train.extend(members);
            continue;
        }
        // Fisher-Yates, then the tail becomes the test slice.
        for i in (1..members.len()).rev() {
            let j = rng.gen_range(0..=i);
            members.swap(i, j);
        }
        let mut n_test = (members.len() as f64 * test_fraction).round() as usize;
        if test_fraction > 0.0 && test_fraction < 1.0 {
            n_test = n_test.min(members.len() - 1).max(usize::from(n_test > 0));
        }
        let cut = members.len() - n_test;
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitResult {
        train,
        test,
        warnings,
    })
}

/// Synthetic dataset configuration with planted dual-band structure:
/// a pigment peak whose center shifts per class and a chlorophyll trough
/// whose depth shrinks per class.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub classes: usize,
    pub axis: WavelengthAxis,
    pub pigment_band: SubbandWindow,
    pub chlorophyll_band: SubbandWindow,
    pub peak_shift_per_class_nm: f64,
    pub trough_lift_per_class: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_per_class: 60,
            classes: 7,
            axis: WavelengthAxis::linspace(450.0, 850.0, 401).unwrap(),
            pigment_band: SubbandWindow::new(510.0, 670.0).unwrap(),
            chlorophyll_band: SubbandWindow::new(670.0, 790.0).unwrap(),
            peak_shift_per_class_nm: 20.0,
            trough_lift_per_class: 0.12,
            noise_sigma: 0.02,
            seed: 42,
        }
    }
}

/// Exact planted parameters, kept as ground truth for oracle tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub pigment_band: SubbandWindow,
    pub chlorophyll_band: SubbandWindow,
    pub peak_centers_nm: Vec<f64>,
    pub trough_center_nm: f64,
    pub trough_depths: Vec<f64>,
    pub peak_sigma_nm: f64,
    pub peak_amplitude: f64,
    pub trough_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

pub struct SyntheticDataset {
    pub data: SpectraDataset,
    pub truth: PlantedTruth,
}

const PEAK_SIGMA_NM: f64 = 15.0;
const PEAK_AMPLITUDE: f64 = 0.45;
const TROUGH_AMPLITUDE: f64 = 0.12;

/// Smooth low-order polynomial baseline around 0.2 reflectance.
fn baseline(w: f64, lo: f64, hi: f64) -> f64 {
    let t = (w - lo) / (hi - lo);
    0.18 + 0.08 * t + 0.04 * t * (1.0 - t)
}

fn class_spectrum(
    cfg: &SynthConfig,
    truth: &PlantedTruth,
    class: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let lo = cfg.axis.min_nm();
    let hi = cfg.axis.max_nm();
    let center = truth.peak_centers_nm[class];
    let depth = truth.trough_depths[class];
    let sigma_t = cfg.chlorophyll_band.width_nm() / 4.0;
    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).expect("validated sigma"))
    } else {
        None
    };
    cfg.axis
        .values()
        .iter()
        .map(|&w| {
            let mut v = baseline(w, lo, hi);
            let dp = w - center;
            v += truth.peak_amplitude * (-dp * dp / (2.0 * truth.peak_sigma_nm.powi(2))).exp();
            let dt = w - truth.trough_center_nm;
            v -= truth.trough_amplitude * depth * (-dt * dt / (2.0 * sigma_t * sigma_t)).exp();
            if let Some(n) = &noise {
                v += n.sample(rng);
            }
            v
        })
        .collect()
}

/// Generate labeled spectra with planted per-class structure.
///
/// Class c peaks at `pigment_band.lo + c * peak_shift` and its trough
/// depth is `1 - c * trough_lift` (floored at 0). Per-instance seeds are
/// derived from the config seed and the instance index.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticDataset> {
    if cfg.classes < 2 || cfg.n_per_class == 0 {
        return Err(Error::parameter(
            "synthetic config needs >= 2 classes and >= 1 instance per class",
        ));
    }
    if cfg.noise_sigma < 0.0 {
        return Err(Error::parameter("noise sigma must be >= 0"));
    }
    if cfg.pigment_band.overlap_nm(&cfg.chlorophyll_band) > 0.0 {
        return Err(Error::parameter(
            "pigment and chlorophyll bands must be disjoint",
        ));
    }
    for w in [&cfg.pigment_band, &cfg.chlorophyll_band] {
        if w.lo_nm < cfg.axis.min_nm() || w.hi_nm > cfg.axis.max_nm() {
            return Err(Error::parameter(format!(
                "band {} outside the axis range",
                w.label()
            )));
        }
    }
    let peak_centers_nm: Vec<f64> = (0..cfg.classes)
        .map(|c| cfg.pigment_band.lo_nm + c as f64 * cfg.peak_shift_per_class_nm)
        .collect();
    if peak_centers_nm
        .iter()
        .any(|&c| c < cfg.pigment_band.lo_nm || c > cfg.pigment_band.hi_nm)
    {
        return Err(Error::parameter(
            "peak shift pushes a class center outside the pigment band",
        ));
    }
    let truth = PlantedTruth {
        pigment_band: cfg.pigment_band,
        chlorophyll_band: cfg.chlorophyll_band,
        peak_centers_nm,
        trough_center_nm: 0.5 * (cfg.chlorophyll_band.lo_nm + cfg.chlorophyll_band.hi_nm),
        trough_depths: (0..cfg.classes)
            .map(|c| (1.0 - c as f64 * cfg.trough_lift_per_class).max(0.0))
            .collect(),
        peak_sigma_nm: PEAK_SIGMA_NM,
        peak_amplitude: PEAK_AMPLITUDE,
        trough_amplitude: TROUGH_AMPLITUDE,
        noise_sigma: cfg.noise_sigma,
        seed: cfg.seed,
    };

    let mut instances = Vec::with_capacity(cfg.classes * cfg.n_per_class);
    for class in 0..cfg.classes {
        for rep in 0..cfg.n_per_class {
            let index = (class * cfg.n_per_class + rep) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(fold_seed(cfg.seed, index));
            instances.push(LabeledSpectrum {
                values: class_spectrum(cfg, &truth, class, &mut rng),
                label: class,
            });
        }
    }
    Ok(SyntheticDataset {
        data: SpectraDataset {
            axis: cfg.axis.clone(),
            instances,
            class_names: (0..cfg.classes).map(|c| format!("C{c}")).collect(),
        },
        truth,
    })
}

/// Synthetic cube: two spatial halves drawn from two classes over a flat
/// background frame whose NDVI sits at zero.
pub struct SyntheticCube {
    pub cube: Hypercube,
    pub fruit_mask: PixelMask,
    /// 0 background, otherwise class index + 1.
    pub truth_map: Vec<u8>,
}

/// `border` columns/rows on every side are flat background; the interior
/// is split into a left half of `class_a` and a right half of `class_b`.
pub fn generate_synthetic_cube(
    cfg: &SynthConfig,
    height: usize,
    width: usize,
    border: usize,
    class_a: usize,
    class_b: usize,
) -> Result<SyntheticCube> {
    if class_a >= cfg.classes || class_b >= cfg.classes {
        return Err(Error::parameter("cube classes out of range"));
    }
    if height <= 2 * border || width <= 2 * border {
        return Err(Error::parameter("cube too small for the border"));
    }
    let dataset = generate_synthetic(&SynthConfig {
        n_per_class: 1,
        ..cfg.clone()
    })?;
    let truth = dataset.truth;
    let b = cfg.axis.len();
    let hw = height * width;
    let mut data = vec![0.25f32; hw * b];
    let mut bits = vec![false; hw];
    let mut truth_map = vec![0u8; hw];
    let mid = width / 2;
    for y in border..height - border {
        for x in border..width - border {
            let class = if x < mid { class_a } else { class_b };
            let p = y * width + x;
            let mut rng = ChaCha8Rng::seed_from_u64(fold_seed(cfg.seed, 0x0cbe + p as u64));
            let spec = class_spectrum(cfg, &truth, class, &mut rng);
            for (band, v) in spec.iter().enumerate() {
                data[band * hw + p] = *v as f32;
            }
            bits[p] = true;
            truth_map[p] = (class + 1) as u8;
        }
    }
    Ok(SyntheticCube {
        cube: Hypercube::new(height, width, CubeKind::Reflectance, cfg.axis.clone(), data)?,
        fruit_mask: PixelMask::new(height, width, bits)?,
        truth_map,
    })
}
