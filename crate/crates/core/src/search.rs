//! Two-stage exhaustive search over subband windows and feature masks.
//!
//! Fine stage: every contiguous window of the grid crossed with all 511
//! nonzero feature masks, each candidate scored by a freshly trained
//! classifier. Coarse stage: pairwise concatenation of the masked
//! features of the surviving windows (bands are never merged), stopping
//! once the accuracy target is reached.
//!
//! The whole search is a pure function of (data, grid, config, seed):
//! candidate seeds derive from the candidate itself, so thread count and
//! evaluation order cannot change any record.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::fcn::{train_fcn, FcnTrainConfig};
use crate::classify::svm::{train_svm, SvmTrainConfig};
use crate::classify::TrainedModel;
use crate::dataset::SpectraDataset;
use crate::error::{Error, Result};
use crate::features::{features_from_samples, DualBandFeatureSet, FeatureMask, SubbandWindow, FEATURE_COUNT};
use crate::matrix::Matrix;
use crate::seed::{derive_seed, fold_seed};

/// Uniform subband grid covering the search span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub span_lo_nm: f64,
    pub span_hi_nm: f64,
    pub bandwidth_nm: f64,
    pub n_subbands: usize,
}

impl SearchGrid {
    pub fn new(span_lo_nm: f64, span_hi_nm: f64, bandwidth_nm: f64, n_subbands: usize) -> Result<Self> {
        if n_subbands == 0 || bandwidth_nm <= 0.0 || span_hi_nm <= span_lo_nm {
            return Err(Error::parameter("grid needs n >= 1, bw > 0, hi > lo"));
        }
        let covered = n_subbands as f64 * bandwidth_nm;
        if (covered - (span_hi_nm - span_lo_nm)).abs() > 1e-9 {
            return Err(Error::parameter(format!(
                "{n_subbands} subbands of {bandwidth_nm} nm cover {covered} nm, span is {} nm",
                span_hi_nm - span_lo_nm
            )));
        }
        Ok(SearchGrid {
            span_lo_nm,
            span_hi_nm,
            bandwidth_nm,
            n_subbands,
        })
    }
}

impl Default for SearchGrid {
    /// Twenty 20 nm subbands over the 450-850 nm VNIR span.
    fn default() -> Self {
        SearchGrid {
            span_lo_nm: 450.0,
            span_hi_nm: 850.0,
            bandwidth_nm: 20.0,
            n_subbands: 20,
        }
    }
}

/// Which classifier scores candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Fcn,
    Svm,
}

impl ClassifierKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::Fcn => "fcn",
            ClassifierKind::Svm => "svm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fcn" => Ok(ClassifierKind::Fcn),
            "svm" => Ok(ClassifierKind::Svm),
            other => Err(Error::parameter(format!("unknown classifier '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Survivors kept after the fine stage.
    pub q: usize,
    /// Coarse stage stops early at this test accuracy.
    pub accuracy_target: f64,
    /// Retained windows may overlap at most this much.
    pub overlap_tolerance_nm: f64,
    pub classifier: ClassifierKind,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            q: 10,
            accuracy_target: 0.95,
            overlap_tolerance_nm: 20.0,
            classifier: ClassifierKind::Fcn,
            epochs: 100,
            batch: 32,
            seed: 42,
            jobs: 1,
        }
    }
}

/// Coarse stage bounds: mask pairs beyond this total feature count are
/// skipped, and each window contributes its best fine-stage masks only.
const COARSE_DIM_BUDGET: usize = 12;
const COARSE_MASKS_PER_WINDOW: usize = 50;

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub windows: Vec<SubbandWindow>,
    pub masks: Vec<FeatureMask>,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub feature_dim: usize,
    pub seed: u64,
    /// True when the classifier diverged; such records carry accuracy 0
    /// and infinite loss.
    pub failed: bool,
}

impl SearchRecord {
    /// Canonical order: accuracy desc, feature count asc, loss asc, then
    /// lexicographic windows and masks for full determinism.
    pub fn canonical_cmp(&self, other: &SearchRecord) -> std::cmp::Ordering {
        other
            .test_accuracy
            .total_cmp(&self.test_accuracy)
            .then(self.feature_dim.cmp(&other.feature_dim))
            .then(self.test_loss.total_cmp(&other.test_loss))
            .then_with(|| {
                for (a, b) in self.windows.iter().zip(&other.windows) {
                    let c = a.cmp_key(b);
                    if c != std::cmp::Ordering::Equal {
                        return c;
                    }
                }
                self.windows.len().cmp(&other.windows.len())
            })
            .then_with(|| self.masks.cmp(&other.masks))
    }

    /// Largest pairwise window overlap between two records, in nm.
    pub fn window_overlap_nm(&self, other: &SearchRecord) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.windows {
            for b in &other.windows {
                worst = worst.max(a.overlap_nm(b));
            }
        }
        worst
    }

    fn windows_label(&self) -> String {
        self.windows
            .iter()
            .map(SubbandWindow::label)
            .collect::<Vec<_>>()
            .join("|")
    }

    fn masks_label(&self) -> String {
        self.masks
            .iter()
            .map(FeatureMask::label)
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStage {
    Fine,
    Coarse,
}

/// All records of one search stage.
#[derive(Debug, Clone)]
pub struct SearchLedger {
    pub stage: SearchStage,
    pub records: Vec<SearchRecord>,
}

impl SearchLedger {
    pub fn sort_canonical(&mut self) {
        self.records.sort_by(SearchRecord::canonical_cmp);
    }

    pub fn best(&self) -> Option<&SearchRecord> {
        self.records.iter().min_by(|a, b| a.canonical_cmp(b))
    }

    /// Semicolon CSV: `windows;masks;accuracy;loss;dim;seed`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "windows;masks;accuracy;loss;dim;seed")?;
        for r in &self.records {
            writeln!(
                w,
                "{};{};{};{};{};{}",
                r.windows_label(),
                r.masks_label(),
                r.test_accuracy,
                r.test_loss,
                r.feature_dim,
                r.seed
            )?;
        }
        Ok(())
    }

    /// One JSON record per line. Infinite losses of failed records are
    /// serialized as null; the `failed` flag carries the information.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.records {
            let line = serde_json::to_string(r)
                .map_err(|e| Error::data(format!("ledger record: {e}")))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// All contiguous runs of grid subbands: n(n+1)/2 windows, start-major.
pub fn enumerate_windows(grid: &SearchGrid) -> Vec<SubbandWindow> {
    let n = grid.n_subbands;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for start in 0..n {
        for end in start..n {
            out.push(SubbandWindow {
                lo_nm: grid.span_lo_nm + start as f64 * grid.bandwidth_nm,
                hi_nm: grid.span_lo_nm + (end + 1) as f64 * grid.bandwidth_nm,
            });
        }
    }
    out
}

/// The 511 nonzero feature masks, ascending by bit pattern.
pub fn enumerate_masks() -> Vec<FeatureMask> {
    (1u16..(1 << FEATURE_COUNT))
        .map(|bits| FeatureMask::new(bits).expect("nonzero"))
        .collect()
}

/// Per-window feature tables for the train and test splits.
struct FeatureCache {
    windows: Vec<SubbandWindow>,
    /// One `n_instances x 9` table per window and split.
    train: Vec<Matrix>,
    test: Vec<Matrix>,
}

impl FeatureCache {
    fn build(
        train: &SpectraDataset,
        test: &SpectraDataset,
        windows: &[SubbandWindow],
    ) -> Result<FeatureCache> {
        let table = |data: &SpectraDataset, w: &SubbandWindow| -> Result<Matrix> {
            let range = data.axis.band_range(w.lo_nm, w.hi_nm)?;
            let wl = &data.axis.values()[range.clone()];
            let mut m = Matrix::zeros(data.len(), FEATURE_COUNT);
            for (i, inst) in data.instances.iter().enumerate() {
                let fv = features_from_samples(&inst.values[range.clone()], wl)?;
                m.row_mut(i).copy_from_slice(&fv.as_array());
            }
            Ok(m)
        };
        let tables: Vec<(Matrix, Matrix)> = windows
            .par_iter()
            .map(|w| Ok((table(train, w)?, table(test, w)?)))
            .collect::<Result<_>>()?;
        let (train, test) = tables.into_iter().unzip();
        Ok(FeatureCache {
            windows: windows.to_vec(),
            train,
            test,
        })
    }

    /// Masked feature matrix across the given (window index, mask) pairs.
    fn assemble(&self, split_train: bool, parts: &[(usize, FeatureMask)]) -> Matrix {
        let tables = if split_train { &self.train } else { &self.test };
        let rows = tables[0].rows();
        let dim: usize = parts.iter().map(|(_, m)| m.popcount()).sum();
        let mut out = Matrix::zeros(rows, dim);
        for r in 0..rows {
            let mut col = 0;
            for &(widx, mask) in parts {
                let full = tables[widx].row(r);
                for bit in 0..FEATURE_COUNT {
                    if mask.bits() & (1 << bit) != 0 {
                        out.set(r, col, full[bit]);
                        col += 1;
                    }
                }
            }
        }
        out
    }
}

fn candidate_seed(cfg: &SearchConfig, windows: &[SubbandWindow], masks: &[FeatureMask]) -> u64 {
    let mut s = derive_seed(cfg.seed, "candidate");
    for w in windows {
        s = fold_seed(s, w.lo_nm.to_bits());
        s = fold_seed(s, w.hi_nm.to_bits());
    }
    for m in masks {
        s = fold_seed(s, u64::from(m.bits()));
    }
    s
}

fn train_candidate_model(
    x: &Matrix,
    y: &[usize],
    class_names: &[String],
    cfg: &SearchConfig,
    seed: u64,
) -> Result<TrainedModel> {
    match cfg.classifier {
        ClassifierKind::Fcn => {
            let tc = FcnTrainConfig {
                epochs: cfg.epochs,
                batch: cfg.batch,
                seed,
                ..FcnTrainConfig::default()
            };
            Ok(TrainedModel::Fcn(train_fcn(x, y, class_names, &tc)?))
        }
        ClassifierKind::Svm => {
            let tc = SvmTrainConfig {
                seed,
                ..SvmTrainConfig::default()
            };
            Ok(TrainedModel::Svm(train_svm(x, y, class_names, &tc)?))
        }
    }
}

fn evaluate_cached(
    cache: &FeatureCache,
    parts: &[(usize, FeatureMask)],
    train_labels: &[usize],
    test_labels: &[usize],
    class_names: &[String],
    cfg: &SearchConfig,
) -> SearchRecord {
    let windows: Vec<SubbandWindow> = parts.iter().map(|&(i, _)| cache.windows[i]).collect();
    let masks: Vec<FeatureMask> = parts.iter().map(|&(_, m)| m).collect();
    let feature_dim: usize = masks.iter().map(FeatureMask::popcount).sum();
    let seed = candidate_seed(cfg, &windows, &masks);
    let x_train = cache.assemble(true, parts);
    let x_test = cache.assemble(false, parts);

    let outcome = train_candidate_model(&x_train, train_labels, class_names, cfg, seed)
        .and_then(|model| {
            let pred = model.predict(&x_test)?;
            let correct = pred.iter().zip(test_labels).filter(|(a, b)| a == b).count();
            let accuracy = correct as f64 / test_labels.len() as f64;
            let loss = model.mean_test_loss(&x_test, test_labels)?;
            Ok((accuracy, loss))
        });
    match outcome {
        Ok((test_accuracy, test_loss)) => SearchRecord {
            windows,
            masks,
            test_accuracy,
            test_loss,
            feature_dim,
            seed,
            failed: false,
        },
        // Divergence (or any training failure) is recorded, never thrown:
        // a single bad candidate must not poison a 100k-candidate sweep.
        Err(_) => SearchRecord {
            windows,
            masks,
            test_accuracy: 0.0,
            test_loss: f64::INFINITY,
            feature_dim,
            seed,
            failed: true,
        },
    }
}

fn check_datasets(train: &SpectraDataset, test: &SpectraDataset) -> Result<()> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::parameter("search needs nonempty train and test sets"));
    }
    if train.axis != test.axis {
        return Err(Error::shape("train and test axes differ"));
    }
    if train.class_names != test.class_names {
        return Err(Error::parameter("train and test class vocabularies differ"));
    }
    Ok(())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if jobs > 0 {
        builder = builder.num_threads(jobs);
    }
    builder
        .build()
        .map_err(|e| Error::parameter(format!("cannot build thread pool: {e}")))
}

/// Evaluate a single (windows, masks) candidate; exposed for spot checks
/// and single-candidate reproduction. Identical inputs and seed yield an
/// identical record.
pub fn evaluate_candidate(
    train: &SpectraDataset,
    test: &SpectraDataset,
    windows: &[SubbandWindow],
    masks: &[FeatureMask],
    cfg: &SearchConfig,
) -> Result<SearchRecord> {
    check_datasets(train, test)?;
    if windows.is_empty() || windows.len() != masks.len() {
        return Err(Error::parameter(
            "candidate needs equally many windows and masks (>= 1)",
        ));
    }
    let cache = FeatureCache::build(train, test, windows)?;
    let parts: Vec<(usize, FeatureMask)> = masks.iter().copied().enumerate().collect();
    Ok(evaluate_cached(
        &cache,
        &parts,
        &train.labels(),
        &test.labels(),
        &train.class_names,
        cfg,
    ))
}

/// Fine stage: every valid grid window crossed with all 511 masks.
/// Windows outside the axis or too narrow for the statistics are
/// excluded at enumeration and never evaluated.
pub fn run_fine_stage(
    train: &SpectraDataset,
    test: &SpectraDataset,
    grid: &SearchGrid,
    cfg: &SearchConfig,
) -> Result<SearchLedger> {
    check_datasets(train, test)?;
    let windows: Vec<SubbandWindow> = enumerate_windows(grid)
        .into_iter()
        .filter(|w| {
            train
                .axis
                .band_range(w.lo_nm, w.hi_nm)
                .map(|r| r.len() >= 3)
                .unwrap_or(false)
        })
        .collect();
    if windows.is_empty() {
        return Err(Error::parameter(
            "no grid window selects enough bands on this axis",
        ));
    }
    let masks = enumerate_masks();
    let train_labels = train.labels();
    let test_labels = test.labels();

    let pool = thread_pool(cfg.jobs)?;
    let ledger = pool.install(|| -> Result<SearchLedger> {
        let cache = FeatureCache::build(train, test, &windows)?;
        let candidates: Vec<(usize, FeatureMask)> = (0..windows.len())
            .flat_map(|w| masks.iter().map(move |&m| (w, m)))
            .collect();
        let records: Vec<SearchRecord> = candidates
            .par_iter()
            .map(|&(widx, mask)| {
                evaluate_cached(
                    &cache,
                    &[(widx, mask)],
                    &train_labels,
                    &test_labels,
                    &train.class_names,
                    cfg,
                )
            })
            .collect();
        Ok(SearchLedger {
            stage: SearchStage::Fine,
            records,
        })
    })?;
    let mut ledger = ledger;
    ledger.sort_canonical();
    Ok(ledger)
}

/// Walk the canonically sorted ledger and keep records whose windows are
/// mutually exclusive or nominally overlapping (overlap <= tolerance)
/// with everything already kept, until q records are retained. Records
/// sharing a window keep only the best one, and each spectral region
/// contributes its best window. May return fewer than q records.
pub fn select_top_q(ledger: &SearchLedger, cfg: &SearchConfig) -> Vec<SearchRecord> {
    let mut sorted = ledger.records.clone();
    sorted.sort_by(SearchRecord::canonical_cmp);
    let mut kept: Vec<SearchRecord> = Vec::new();
    for record in sorted {
        if kept.len() >= cfg.q {
            break;
        }
        if record.failed {
            continue;
        }
        let compatible = kept
            .iter()
            .all(|k| record.window_overlap_nm(k) <= cfg.overlap_tolerance_nm);
        if compatible {
            kept.push(record);
        }
    }
    kept
}

/// Result of the coarse stage.
#[derive(Debug, Clone)]
pub struct CoarseOutcome {
    pub ledger: SearchLedger,
    pub best: SearchRecord,
    pub selection: DualBandFeatureSet,
    /// False when no evaluated combination reached the accuracy target.
    pub met_target: bool,
}

/// The best fine-stage masks of one window, canonical order.
fn top_masks_for_window(
    fine: &SearchLedger,
    window: &SubbandWindow,
    limit: usize,
) -> Vec<FeatureMask> {
    let mut records: Vec<&SearchRecord> = fine
        .records
        .iter()
        .filter(|r| !r.failed && r.windows.len() == 1 && r.windows[0] == *window)
        .collect();
    records.sort_by(|a, b| a.canonical_cmp(b));
    records.iter().take(limit).map(|r| r.masks[0]).collect()
}

/// Coarse stage: for every unordered pair of surviving windows, re-sweep
/// mask combinations (each window keeps its own mask; features are
/// computed separately and concatenated). Pairs are evaluated batch by
/// batch and the sweep stops once the accuracy target is reached.
pub fn run_coarse_stage(
    train: &SpectraDataset,
    test: &SpectraDataset,
    candidates: &[SearchRecord],
    fine: &SearchLedger,
    cfg: &SearchConfig,
) -> Result<CoarseOutcome> {
    check_datasets(train, test)?;
    if candidates.is_empty() {
        return Err(Error::parameter("coarse stage needs at least one candidate"));
    }
    let finish = |mut ledger: SearchLedger| -> Result<CoarseOutcome> {
        ledger.sort_canonical();
        let best = ledger.records[0].clone();
        let selection = DualBandFeatureSet::new(best.windows.clone(), best.masks.clone())?;
        let met_target = !best.failed && best.test_accuracy >= cfg.accuracy_target;
        Ok(CoarseOutcome {
            best: best.clone(),
            selection,
            met_target,
            ledger,
        })
    };

    if candidates.len() == 1 {
        // Nothing to pair; the single survivor is the selection.
        return finish(SearchLedger {
            stage: SearchStage::Coarse,
            records: vec![candidates[0].clone()],
        });
    }

    let windows: Vec<SubbandWindow> = candidates.iter().map(|c| c.windows[0]).collect();
    let mask_pool: Vec<Vec<FeatureMask>> = windows
        .iter()
        .map(|w| {
            let mut masks = top_masks_for_window(fine, w, COARSE_MASKS_PER_WINDOW);
            if masks.is_empty() {
                masks.push(FeatureMask::FULL);
            }
            masks
        })
        .collect();

    let train_labels = train.labels();
    let test_labels = test.labels();
    let pool = thread_pool(cfg.jobs)?;
    let records = pool.install(|| -> Result<Vec<SearchRecord>> {
        let cache = FeatureCache::build(train, test, &windows)?;
        let mut records: Vec<SearchRecord> = Vec::new();
        'pairs: for i in 0..windows.len() {
            for j in i + 1..windows.len() {
                // Window order inside a record follows wavelength.
                let (a, b) = if windows[i].cmp_key(&windows[j]) == std::cmp::Ordering::Greater {
                    (j, i)
                } else {
                    (i, j)
                };
                let batch: Vec<[(usize, FeatureMask); 2]> = mask_pool[a]
                    .iter()
                    .flat_map(|&ma| {
                        mask_pool[b].iter().filter_map(move |&mb| {
                            (ma.popcount() + mb.popcount() <= COARSE_DIM_BUDGET)
                                .then_some([(a, ma), (b, mb)])
                        })
                    })
                    .collect();
                let evaluated: Vec<SearchRecord> = batch
                    .par_iter()
                    .map(|parts| {
                        evaluate_cached(
                            &cache,
                            parts,
                            &train_labels,
                            &test_labels,
                            &train.class_names,
                            cfg,
                        )
                    })
                    .collect();
                records.extend(evaluated);
                // Early stop between batches keeps the ledger independent
                // of thread count.
                let best = records
                    .iter()
                    .filter(|r| !r.failed)
                    .map(|r| r.test_accuracy)
                    .fold(f64::NEG_INFINITY, f64::max);
                if best >= cfg.accuracy_target {
                    break 'pairs;
                }
            }
        }
        Ok(records)
    })?;
    if records.is_empty() {
        return Err(Error::parameter(
            "coarse stage evaluated no pairs (mask budget too tight?)",
        ));
    }
    finish(SearchLedger {
        stage: SearchStage::Coarse,
        records,
    })
}

/// Document describing a selected feature set, persisted as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSetDoc {
    pub version: u32,
    pub windows: Vec<SubbandWindow>,
    pub masks: Vec<FeatureMask>,
    pub feature_dim: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub classifier: ClassifierKind,
    pub met_target: bool,
    pub seed: u64,
}

impl FeatureSetDoc {
    pub fn from_outcome(outcome: &CoarseOutcome, cfg: &SearchConfig) -> Self {
        FeatureSetDoc {
            version: 1,
            windows: outcome.selection.windows.clone(),
            masks: outcome.selection.masks.clone(),
            feature_dim: outcome.selection.feature_dim(),
            test_accuracy: outcome.best.test_accuracy,
            test_loss: outcome.best.test_loss,
            classifier: cfg.classifier,
            met_target: outcome.met_target,
            seed: cfg.seed,
        }
    }

    pub fn feature_set(&self) -> Result<DualBandFeatureSet> {
        DualBandFeatureSet::new(self.windows.clone(), self.masks.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::data(format!("feature set doc: {e}")))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }
}
