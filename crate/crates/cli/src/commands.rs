//! Command implementations. Each returns the JSON summary printed under
//! --json-summary and writes an echo of its effective parameters.

use std::path::{Path, PathBuf};

use serde_json::json;

use dualband::classify::model_file::{load_model, save_model};
use dualband::classify::pixelmap::write_palette_csv;
use dualband::classify::{
    bench_predict, classify_pixels, evaluate as evaluate_labels, train_fcn, train_svm,
    write_class_map_pgm, write_class_map_png, FcnTrainConfig, PredictPipeline, SvmTrainConfig,
    TrainedModel,
};
use dualband::dataset::{
    generate_synthetic, generate_synthetic_cube, load_dataset, load_manifest, stratified_split,
    write_manifest, ClassVocabulary, LoadedDataset, ManifestEntry, SpectraDataset, Split,
    SynthConfig,
};
use dualband::error::{Error, Result};
use dualband::features::{DualBandFeatureSet, SubbandWindow};
use dualband::hsc;
use dualband::matrix::Matrix;
use dualband::preprocess::{
    calibrate as calibrate_cube, instance_mean_spectrum, msc_correct, ndvi_segment, savgol_smooth,
    NdviParams, NdviPolarity,
};
use dualband::search::{
    run_coarse_stage, run_fine_stage, select_top_q, ClassifierKind, FeatureSetDoc, SearchConfig,
    SearchGrid,
};
use dualband::spectral::{CubeKind, Hypercube, Spectrum, WavelengthAxis};

use crate::{
    BenchArgs, CalibrateArgs, Cli, EvaluateArgs, PredictMapArgs, SearchArgs, SegmentArgs,
    SynthArgs, TrainArgs,
};

/// Write the effective parameters of this run next to its outputs.
fn write_echo(path: &Path, cli: &Cli, command: &str, args: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let echo = json!({
        "command": command,
        "seed": cli.seed,
        "args": serde_json::to_value(args).map_err(|e| Error::data(e.to_string()))?,
    });
    std::fs::write(path, serde_json::to_string_pretty(&echo).unwrap() + "\n")?;
    Ok(())
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::parameter(format!("{what} must be lo:hi, got '{s}'")))?;
    let lo: f64 = a
        .parse()
        .map_err(|_| Error::parameter(format!("bad {what} bound '{a}'")))?;
    let hi: f64 = b
        .parse()
        .map_err(|_| Error::parameter(format!("bad {what} bound '{b}'")))?;
    Ok((lo, hi))
}

fn parse_polarity(s: &str) -> Result<NdviPolarity> {
    match s {
        "low" => Ok(NdviPolarity::FruitLower),
        "high" => Ok(NdviPolarity::FruitHigher),
        other => Err(Error::parameter(format!(
            "polarity must be 'low' or 'high', got '{other}'"
        ))),
    }
}

pub fn calibrate(cli: &Cli, args: &CalibrateArgs) -> Result<serde_json::Value> {
    let raw = hsc::read_cube(Path::new(&args.raw))?;
    let white = hsc::read_cube(Path::new(&args.white))?;
    let dark = hsc::read_cube(Path::new(&args.dark))?;
    let reflectance = calibrate_cube(&raw, &white, &dark)?;
    let out = Path::new(&args.out);
    hsc::write_cube(out, &reflectance)?;
    write_echo(&out.with_extension("hsc.echo.json"), cli, "calibrate", args)?;
    Ok(json!({
        "command": "calibrate",
        "out": args.out,
        "height": reflectance.height(),
        "width": reflectance.width(),
        "bands": reflectance.bands(),
    }))
}

pub fn segment(cli: &Cli, args: &SegmentArgs) -> Result<serde_json::Value> {
    let cube = hsc::read_cube(Path::new(&args.cube))?;
    let params = NdviParams {
        red_nm: args.red_nm,
        nir_nm: args.nir_nm,
        polarity: parse_polarity(&args.polarity)?,
    };
    let mask = ndvi_segment(&cube, &params)?;
    let spectrum = instance_mean_spectrum(&cube, &mask)?;
    let mask_path = Path::new(&args.out_mask);
    let map = dualband::classify::ClassMap::new(
        cube.height(),
        cube.width(),
        mask.bits().iter().map(|&b| u8::from(b)).collect(),
    )?;
    write_class_map_pgm(mask_path, &map)?;
    let stem = Path::new(&args.cube)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".to_string());
    hsc::write_spectrum_csv(Path::new(&args.out_spectrum), &stem, &spectrum)?;
    write_echo(
        &mask_path.with_extension("pgm.echo.json"),
        cli,
        "segment",
        args,
    )?;
    Ok(json!({
        "command": "segment",
        "foreground_pixels": mask.foreground_count(),
        "total_pixels": mask.bits().len(),
        "out_mask": args.out_mask,
        "out_spectrum": args.out_spectrum,
    }))
}

fn parse_axis(s: &str) -> Result<WavelengthAxis> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::parameter(format!(
            "axis must be lo:hi:samples, got '{s}'"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::parameter(format!("bad axis bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::parameter(format!("bad axis bound '{}'", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Error::parameter(format!("bad axis sample count '{}'", parts[2])))?;
    WavelengthAxis::linspace(lo, hi, n)
}

pub fn synth(cli: &Cli, args: &SynthArgs) -> Result<serde_json::Value> {
    let out_dir = PathBuf::from(&args.out);
    std::fs::create_dir_all(&out_dir)?;
    let (pig_lo, pig_hi) = parse_pair(&args.pigment, "pigment band")?;
    let (chl_lo, chl_hi) = parse_pair(&args.chlorophyll, "chlorophyll band")?;
    let cfg = SynthConfig {
        n_per_class: args.n_per_class,
        classes: args.classes,
        axis: parse_axis(&args.axis)?,
        pigment_band: SubbandWindow::new(pig_lo, pig_hi)?,
        chlorophyll_band: SubbandWindow::new(chl_lo, chl_hi)?,
        peak_shift_per_class_nm: args.peak_shift,
        trough_lift_per_class: args.trough_lift,
        noise_sigma: args.noise_sigma,
        seed: dualband::seed::derive_seed(cli.seed, "synth"),
    };
    let synth = generate_synthetic(&cfg)?;

    // Spectra CSV, one row per instance.
    let rows: Vec<(String, Vec<f64>)> = synth
        .data
        .instances
        .iter()
        .map(|inst| {
            (
                synth.data.class_names[inst.label].clone(),
                inst.values.clone(),
            )
        })
        .collect();
    hsc::write_spectra_csv(&out_dir.join("spectra.csv"), &cfg.axis, &rows)?;

    // Manifest with a stratified split.
    let split = stratified_split(
        &synth.data.labels(),
        args.test_fraction,
        dualband::seed::derive_seed(cli.seed, "split"),
    )?;
    for w in &split.warnings {
        eprintln!("warning: {w}");
    }
    let test_set: std::collections::HashSet<usize> = split.test.iter().copied().collect();
    let entries: Vec<ManifestEntry> = synth
        .data
        .instances
        .iter()
        .enumerate()
        .map(|(i, inst)| ManifestEntry {
            instance_id: format!("s{i:04}"),
            path: format!("spectra.csv:{i}"),
            class_index: inst.label,
            split: if test_set.contains(&i) {
                Split::Test
            } else {
                Split::Train
            },
        })
        .collect();
    let vocab = ClassVocabulary::Custom(synth.data.class_names.clone());
    write_manifest(&out_dir.join("synth.manifest"), &vocab, "spectra.csv", &entries)?;

    // Planted ground-truth sidecar.
    std::fs::write(
        out_dir.join("truth.json"),
        serde_json::to_string_pretty(&synth.truth).unwrap() + "\n",
    )?;

    // Optional cubes for predict-map and bench workflows.
    let mut cube_files = Vec::new();
    if args.emit_cubes > 0 {
        let (h, w) = args
            .cube_size
            .split_once('x')
            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
            .ok_or_else(|| {
                Error::parameter(format!("cube size must be HxW, got '{}'", args.cube_size))
            })?;
        for i in 0..args.emit_cubes {
            let class_a = i % args.classes;
            let class_b = (i + args.classes / 2) % args.classes;
            let cube_cfg = SynthConfig {
                seed: dualband::seed::fold_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            let sc = generate_synthetic_cube(&cube_cfg, h, w, args.cube_border, class_a, class_b)?;
            let name = format!("cube_{i:03}.hsc");
            hsc::write_cube(&out_dir.join(&name), &sc.cube)?;
            cube_files.push(name);
        }
    }

    write_echo(&out_dir.join("echo.json"), cli, "synth", args)?;
    Ok(json!({
        "command": "synth",
        "out": args.out,
        "instances": synth.data.len(),
        "classes": args.classes,
        "train": split.train.len(),
        "test": split.test.len(),
        "manifest": out_dir.join("synth.manifest"),
        "cubes": cube_files,
    }))
}

/// Shared ingestion: manifest -> spectra -> optional MSC/Savitzky-Golay.
fn load_preprocessed(
    manifest_path: &str,
    msc: bool,
    savgol: bool,
    savgol_window: usize,
    savgol_order: usize,
) -> Result<LoadedDataset> {
    let manifest = load_manifest(Path::new(manifest_path))?;
    let mut loaded = load_dataset(&manifest, &NdviParams::default())?;
    if msc {
        let spectra: Vec<Spectrum> = loaded
            .data
            .instances
            .iter()
            .map(|inst| Spectrum::new(inst.values.clone(), loaded.data.axis.clone()))
            .collect::<Result<_>>()?;
        // Batch MSC over the whole dataset, reference = batch mean.
        let corrected = msc_correct(&spectra, None)?;
        for (inst, s) in loaded.data.instances.iter_mut().zip(corrected) {
            inst.values = s.into_values();
        }
    }
    if savgol {
        for inst in &mut loaded.data.instances {
            let s = Spectrum::new(inst.values.clone(), loaded.data.axis.clone())?;
            inst.values = savgol_smooth(&s, savgol_window, savgol_order)?.into_values();
        }
    }
    Ok(loaded)
}

pub fn search(cli: &Cli, args: &SearchArgs) -> Result<serde_json::Value> {
    let out_dir = PathBuf::from(&args.out);
    std::fs::create_dir_all(&out_dir)?;
    let loaded = load_preprocessed(
        &args.manifest,
        args.msc,
        args.savgol,
        args.savgol_window,
        args.savgol_order,
    )?;
    let (train, test) = loaded.partition();
    let (span_lo, span_hi) = parse_pair(&args.span, "span")?;
    let grid = SearchGrid::new(span_lo, span_hi, args.bandwidth, args.subbands)?;
    let cfg = SearchConfig {
        q: args.q,
        accuracy_target: args.target,
        overlap_tolerance_nm: args.overlap_tol,
        classifier: ClassifierKind::parse(&args.classifier)?,
        epochs: args.epochs,
        batch: args.batch,
        seed: cli.seed,
        jobs: args.jobs,
    };

    let fine = run_fine_stage(&train, &test, &grid, &cfg)?;
    fine.write_csv(&out_dir.join("fine_ledger.csv"))?;
    fine.write_jsonl(&out_dir.join("fine_ledger.jsonl"))?;

    let survivors = select_top_q(&fine, &cfg);
    if survivors.is_empty() {
        return Err(Error::data(
            "fine stage produced no usable candidates".to_string(),
        ));
    }
    let outcome = run_coarse_stage(&train, &test, &survivors, &fine, &cfg)?;
    outcome.ledger.write_csv(&out_dir.join("coarse_ledger.csv"))?;
    outcome.ledger.write_jsonl(&out_dir.join("coarse_ledger.jsonl"))?;
    let doc = FeatureSetDoc::from_outcome(&outcome, &cfg);
    doc.save(&out_dir.join("featureset.json"))?;
    write_echo(&out_dir.join("echo.json"), cli, "search", args)?;

    if !outcome.met_target {
        eprintln!(
            "note: best combination reached accuracy {:.4}, below target {}",
            outcome.best.test_accuracy, args.target
        );
    }
    Ok(json!({
        "command": "search",
        "out": args.out,
        "fine_records": fine.records.len(),
        "coarse_records": outcome.ledger.records.len(),
        "survivors": survivors.len(),
        "best_windows": outcome.best.windows.iter().map(|w| w.label()).collect::<Vec<_>>(),
        "best_masks": outcome.best.masks.iter().map(|m| m.label()).collect::<Vec<_>>(),
        "best_accuracy": outcome.best.test_accuracy,
        "best_loss": outcome.best.test_loss,
        "feature_dim": outcome.best.feature_dim,
        "met_target": outcome.met_target,
    }))
}

/// Feature matrix of a dataset under the given pipeline.
fn feature_matrix(data: &SpectraDataset, set: Option<&DualBandFeatureSet>) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = match set {
        Some(set) => data
            .instances
            .iter()
            .map(|inst| {
                let s = Spectrum::new(inst.values.clone(), data.axis.clone())?;
                dualband::features::assemble_dual(&s, set)
            })
            .collect::<Result<_>>()?,
        None => data.instances.iter().map(|i| i.values.clone()).collect(),
    };
    Matrix::from_rows(&rows)
}

fn load_featureset_arg(
    featureset: &Option<String>,
    full_spectrum: bool,
) -> Result<Option<DualBandFeatureSet>> {
    match (featureset, full_spectrum) {
        (Some(_), true) => Err(Error::parameter(
            "--featureset and --full-spectrum are mutually exclusive",
        )),
        (None, true) => Ok(None),
        (Some(path), false) => Ok(Some(FeatureSetDoc::load(Path::new(path))?.feature_set()?)),
        (None, false) => Err(Error::parameter(
            "either --featureset or --full-spectrum is required",
        )),
    }
}

pub fn train(cli: &Cli, args: &TrainArgs) -> Result<serde_json::Value> {
    let set = load_featureset_arg(&args.featureset, args.full_spectrum)?;
    let loaded = load_preprocessed(
        &args.manifest,
        args.msc,
        args.savgol,
        args.savgol_window,
        args.savgol_order,
    )?;
    let (train_set, _) = loaded.partition();
    if train_set.is_empty() {
        return Err(Error::data("manifest has no train instances".to_string()));
    }
    let x = feature_matrix(&train_set, set.as_ref())?;
    let y = train_set.labels();
    let seed = dualband::seed::derive_seed(cli.seed, "train");
    let model = match args.model_kind.as_str() {
        "fcn" => TrainedModel::Fcn(train_fcn(
            &x,
            &y,
            &train_set.class_names,
            &FcnTrainConfig {
                epochs: args.epochs,
                batch: args.batch,
                seed,
                ..FcnTrainConfig::default()
            },
        )?),
        "svm" => TrainedModel::Svm(train_svm(
            &x,
            &y,
            &train_set.class_names,
            &SvmTrainConfig {
                seed,
                ..SvmTrainConfig::default()
            },
        )?),
        other => {
            return Err(Error::parameter(format!(
                "model kind must be fcn or svm, got '{other}'"
            )))
        }
    };
    let out = Path::new(&args.out);
    save_model(out, &model)?;

    if let Some(dump) = &args.dump_features {
        let names = match &set {
            Some(set) => set.feature_names(),
            None => train_set
                .axis
                .values()
                .iter()
                .map(|w| format!("r@{w}"))
                .collect(),
        };
        write_feature_csv(Path::new(dump), &names, &train_set, &x)?;
    }

    let pred = model.predict(&x)?;
    let train_acc =
        pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
    write_echo(&out.with_extension("hsm.echo.json"), cli, "train", args)?;
    Ok(json!({
        "command": "train",
        "out": args.out,
        "model_kind": model.kind_str(),
        "input_dim": model.input_dim(),
        "train_instances": y.len(),
        "train_accuracy": train_acc,
    }))
}

fn write_feature_csv(
    path: &Path,
    names: &[String],
    data: &SpectraDataset,
    x: &Matrix,
) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "label,{}", names.join(","))?;
    for (inst, row) in data.instances.iter().zip(x.iter_rows()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{}", data.class_names[inst.label], cells.join(","))?;
    }
    Ok(())
}

pub fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<serde_json::Value> {
    let out_dir = PathBuf::from(&args.out);
    std::fs::create_dir_all(&out_dir)?;
    let model = load_model(Path::new(&args.model))?;
    let set = match &args.featureset {
        Some(path) => Some(FeatureSetDoc::load(Path::new(path))?.feature_set()?),
        None => None,
    };
    let loaded = load_preprocessed(
        &args.manifest,
        args.msc,
        args.savgol,
        args.savgol_window,
        args.savgol_order,
    )?;
    let (_, test_set) = loaded.partition();
    if test_set.is_empty() {
        return Err(Error::data("manifest has no test instances".to_string()));
    }
    let x = feature_matrix(&test_set, set.as_ref())?;
    if x.cols() != model.input_dim() {
        return Err(Error::shape(format!(
            "model expects {} features but the pipeline yields {}",
            model.input_dim(),
            x.cols()
        )));
    }
    let y = test_set.labels();
    let pred = model.predict(&x)?;
    let report = evaluate_labels(&y, &pred, test_set.n_classes())?;
    report.write_csv(&out_dir.join("confusion.csv"), &test_set.class_names)?;
    write_echo(&out_dir.join("echo.json"), cli, "evaluate", args)?;
    Ok(json!({
        "command": "evaluate",
        "out": args.out,
        "test_instances": y.len(),
        "accuracy": report.accuracy,
        "kappa": report.kappa,
        "confusion_csv": out_dir.join("confusion.csv"),
    }))
}

pub fn predict_map(cli: &Cli, args: &PredictMapArgs) -> Result<serde_json::Value> {
    let cube = hsc::read_cube(Path::new(&args.cube))?;
    if cube.kind() != CubeKind::Reflectance {
        return Err(Error::data(
            "predict-map needs a reflectance cube; run calibrate first".to_string(),
        ));
    }
    let set = FeatureSetDoc::load(Path::new(&args.featureset))?.feature_set()?;
    let model = load_model(Path::new(&args.model))?;
    let params = NdviParams {
        red_nm: args.red_nm,
        nir_nm: args.nir_nm,
        polarity: parse_polarity(&args.polarity)?,
    };
    let mask = ndvi_segment(&cube, &params)?;
    let map = classify_pixels(&cube, &mask, &set, &model)?;
    let pgm = PathBuf::from(format!("{}.pgm", args.out));
    let png = PathBuf::from(format!("{}.png", args.out));
    let palette = PathBuf::from(format!("{}.palette.csv", args.out));
    write_class_map_pgm(&pgm, &map)?;
    write_class_map_png(&png, &map)?;
    write_palette_csv(&palette)?;
    write_echo(
        &PathBuf::from(format!("{}.echo.json", args.out)),
        cli,
        "predict-map",
        args,
    )?;
    let foreground = map.classes().iter().filter(|&&c| c != 0).count();
    Ok(json!({
        "command": "predict-map",
        "out_pgm": pgm,
        "out_png": png,
        "palette": palette,
        "foreground_pixels": foreground,
        "background_pixels": map.classes().len() - foreground,
    }))
}

pub fn bench(cli: &Cli, args: &BenchArgs) -> Result<serde_json::Value> {
    if args.reps < 3 {
        return Err(Error::parameter(format!(
            "bench needs >= 3 repetitions, got {}",
            args.reps
        )));
    }
    let selected_model = load_model(Path::new(&args.selected_model))?;
    let full_model = load_model(Path::new(&args.full_model))?;
    let set = FeatureSetDoc::load(Path::new(&args.featureset))?.feature_set()?;
    let cubes: Vec<Hypercube> = args
        .cube
        .iter()
        .map(|p| hsc::read_cube(Path::new(p)))
        .collect::<Result<_>>()?;

    let selected = bench_predict(
        &selected_model,
        &PredictPipeline::SelectedFeatures(set),
        &cubes,
        args.reps,
    )?;
    let full = bench_predict(&full_model, &PredictPipeline::FullSpectrum, &cubes, args.reps)?;
    let speedup = selected.fps / full.fps;

    let out = Path::new(&args.out);
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(out)?);
        writeln!(
            w,
            "method,model,fps,per_image_ms,feature_ms,inference_ms,reps,images"
        )?;
        for r in [&selected, &full] {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.pipeline,
                r.model_kind,
                r.fps,
                r.per_image_ms,
                r.stage_feature_ms,
                r.stage_inference_ms,
                r.repetitions,
                r.images
            )?;
        }
        writeln!(w, "speedup,,{speedup},,,,,")?;
    }
    write_echo(&out.with_extension("csv.echo.json"), cli, "bench", args)?;
    Ok(json!({
        "command": "bench",
        "out": args.out,
        "selected_fps": selected.fps,
        "full_fps": full.fps,
        "speedup": speedup,
    }))
}
