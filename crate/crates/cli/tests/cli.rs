//! End-to-end tests driving the `dualband` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dualband::hsc;
use dualband::preprocess::calibrate;
use dualband::spectral::{CubeKind, Hypercube, WavelengthAxis};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualband"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn flat_cube(h: usize, w: usize, b: usize, kind: CubeKind, value: f32) -> Hypercube {
    let axis = WavelengthAxis::linspace(450.0, 850.0, b).unwrap();
    Hypercube::new(h, w, kind, axis, vec![value; h * w * b]).unwrap()
}

#[test]
fn calibrate_white_as_raw_yields_ones_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let white = flat_cube(3, 4, 6, CubeKind::RawIntensity, 0.9);
    let dark = flat_cube(3, 4, 6, CubeKind::RawIntensity, 0.1);
    hsc::write_cube(Path::new(&p("white.hsc")), &white).unwrap();
    hsc::write_cube(Path::new(&p("dark.hsc")), &dark).unwrap();

    let out = run(&[
        "calibrate",
        "--raw",
        &p("white.hsc"),
        "--white",
        &p("white.hsc"),
        "--dark",
        &p("dark.hsc"),
        "--out",
        &p("refl.hsc"),
    ]);
    assert_ok(&out);
    let cube = hsc::read_cube(Path::new(&p("refl.hsc"))).unwrap();
    assert!(cube.data().iter().all(|&v| v == 1.0));
    assert_eq!(cube.kind(), CubeKind::Reflectance);

    // File round-trip equals the in-memory result bitwise.
    let expected = calibrate(&white, &white, &dark).unwrap();
    assert_eq!(cube.data(), expected.data());
    assert!(dir.path().join("refl.hsc.echo.json").exists());
}

#[test]
fn calibrate_missing_file_exits_2() {
    let out = run(&[
        "calibrate",
        "--raw",
        "/nonexistent/raw.hsc",
        "--white",
        "/nonexistent/w.hsc",
        "--dark",
        "/nonexistent/d.hsc",
        "--out",
        "/tmp/never.hsc",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

/// Synthetic scene: flat background frame plus fruit interior.
fn fruit_scene(dir: &Path) -> PathBuf {
    let synth = dualband::dataset::generate_synthetic_cube(
        &dualband::dataset::SynthConfig {
            axis: WavelengthAxis::linspace(450.0, 850.0, 81).unwrap(),
            n_per_class: 1,
            ..dualband::dataset::SynthConfig::default()
        },
        16,
        20,
        3,
        1,
        5,
    )
    .unwrap();
    let path = dir.join("scene.hsc");
    hsc::write_cube(&path, &synth.cube).unwrap();
    path
}

#[test]
fn segment_separates_fruit_from_flat_background() {
    let dir = tempfile::tempdir().unwrap();
    let cube_path = fruit_scene(dir.path());
    let mask_path = dir.path().join("mask.pgm");
    let spec_path = dir.path().join("mean.csv");
    // Flat background has NDVI 0; fruit baseline rises with wavelength,
    // so fruit scores higher NDVI between the band extremes.
    let out = run(&[
        "segment",
        "--cube",
        cube_path.to_str().unwrap(),
        "--red-nm",
        "460",
        "--nir-nm",
        "840",
        "--polarity",
        "high",
        "--out-mask",
        mask_path.to_str().unwrap(),
        "--out-spectrum",
        spec_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let map = dualband::classify::pixelmap::read_class_map_pgm(&mask_path).unwrap();
    // Interior (border 3) is fruit, frame is background.
    assert_eq!(map.get(0, 0), 0);
    assert_eq!(map.get(8, 10), 1);
    let (_, rows) = hsc::read_spectra_csv(&spec_path).unwrap();
    assert_eq!(rows.len(), 1);

    // All-background scene: nothing on the high-NDVI side.
    let flat = flat_cube(4, 5, 6, CubeKind::Reflectance, 0.3);
    let flat_path = dir.path().join("flat.hsc");
    hsc::write_cube(&flat_path, &flat).unwrap();
    let out = run(&[
        "segment",
        "--cube",
        flat_path.to_str().unwrap(),
        "--polarity",
        "high",
        "--out-mask",
        dir.path().join("m2.pgm").to_str().unwrap(),
        "--out-spectrum",
        dir.path().join("s2.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "all-background must fail");
    assert!(String::from_utf8_lossy(&out.stderr).contains("foreground"));

    // Band override outside the axis is a parameter error.
    let out = run(&[
        "segment",
        "--cube",
        cube_path.to_str().unwrap(),
        "--red-nm",
        "2000",
        "--out-mask",
        dir.path().join("m3.pgm").to_str().unwrap(),
        "--out-spectrum",
        dir.path().join("s3.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn synth_small(dir: &Path, seed: &str) -> PathBuf {
    let out_dir = dir.join(format!("data{seed}"));
    let out = run(&[
        "--seed",
        seed,
        "synth",
        "--n-per-class",
        "14",
        "--classes",
        "4",
        "--axis",
        "450:690:121",
        "--pigment",
        "510:570",
        "--chlorophyll",
        "610:670",
        "--peak-shift",
        "20",
        "--trough-lift",
        "0.3",
        "--noise-sigma",
        "0.03",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    out_dir
}

#[test]
fn synth_outputs_are_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_small(dir.path(), "9");
    assert!(a.join("synth.manifest").exists());
    assert!(a.join("truth.json").exists());
    assert!(a.join("echo.json").exists());
    let manifest = dualband::dataset::load_manifest(&a.join("synth.manifest")).unwrap();
    assert_eq!(manifest.entries.len(), 56);

    // Same seed elsewhere: identical spectra bytes.
    let dir2 = tempfile::tempdir().unwrap();
    let b = synth_small(dir2.path(), "9");
    assert_eq!(
        std::fs::read(a.join("spectra.csv")).unwrap(),
        std::fs::read(b.join("spectra.csv")).unwrap()
    );

    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("truth.json")).unwrap()).unwrap();
    assert!(truth["peak_centers_nm"].is_array());
}

fn run_search(manifest: &Path, out_dir: &Path, seed: &str, jobs: &str) -> Output {
    run(&[
        "--seed",
        seed,
        "search",
        "--manifest",
        manifest.to_str().unwrap(),
        "--span",
        "450:690",
        "--bandwidth",
        "40",
        "--subbands",
        "6",
        "--classifier",
        "svm",
        "--target",
        "0.9",
        "--jobs",
        jobs,
        "--out",
        out_dir.to_str().unwrap(),
    ])
}

#[test]
fn search_recovers_planted_bands_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path(), "11");
    let manifest = data.join("synth.manifest");

    let out_a = dir.path().join("search_a");
    let res = run_search(&manifest, &out_a, "11", "2");
    assert_ok(&res);
    for f in [
        "fine_ledger.csv",
        "fine_ledger.jsonl",
        "coarse_ledger.csv",
        "coarse_ledger.jsonl",
        "featureset.json",
        "echo.json",
    ] {
        assert!(out_a.join(f).exists(), "{f} missing");
    }

    // Selected windows overlap the planted bands by at least half.
    let doc =
        dualband::search::FeatureSetDoc::load(&out_a.join("featureset.json")).unwrap();
    let pigment = dualband::features::SubbandWindow::new(510.0, 570.0).unwrap();
    let chloro = dualband::features::SubbandWindow::new(610.0, 670.0).unwrap();
    let best = |band: &dualband::features::SubbandWindow| {
        doc.windows
            .iter()
            .map(|w| w.overlap_nm(band))
            .fold(0.0f64, f64::max)
    };
    assert!(best(&pigment) >= 30.0, "pigment overlap {}", best(&pigment));
    assert!(best(&chloro) >= 30.0, "chlorophyll overlap {}", best(&chloro));

    // Same seed, different jobs: byte-identical ledgers.
    let out_b = dir.path().join("search_b");
    assert_ok(&run_search(&manifest, &out_b, "11", "1"));
    for f in ["fine_ledger.csv", "coarse_ledger.csv", "featureset.json"] {
        assert_eq!(
            std::fs::read(out_a.join(f)).unwrap(),
            std::fs::read(out_b.join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
}

#[test]
fn train_evaluate_and_shape_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path(), "13");
    let manifest = data.join("synth.manifest");

    // Hand-written feature set (peak position + trough depth).
    let featureset = dir.path().join("set.json");
    std::fs::write(
        &featureset,
        serde_json::json!({
            "version": 1,
            "windows": [
                {"lo_nm": 510.0, "hi_nm": 570.0},
                {"lo_nm": 610.0, "hi_nm": 670.0}
            ],
            "masks": ["max+argmax", "min+argmin"],
            "feature_dim": 4,
            "test_accuracy": 0.0,
            "test_loss": 0.0,
            "classifier": "svm",
            "met_target": false,
            "seed": 13
        })
        .to_string(),
    )
    .unwrap();

    let model = dir.path().join("model.hsm");
    let features_csv = dir.path().join("features.csv");
    let out = run(&[
        "--seed",
        "13",
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--featureset",
        featureset.to_str().unwrap(),
        "--model-kind",
        "svm",
        "--dump-features",
        features_csv.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let header = std::fs::read_to_string(&features_csv).unwrap();
    assert!(header.starts_with("label,max@510-570,argmax@510-570,min@610-670,argmin@610-670"));

    let eval_dir = dir.path().join("eval");
    let out = run(&[
        "--json-summary",
        "evaluate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--featureset",
        featureset.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let summary: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("json summary on stdout");
    assert!(summary["accuracy"].as_f64().unwrap() > 0.8);
    assert!(summary["kappa"].as_f64().unwrap() > 0.7);
    let confusion = std::fs::read_to_string(eval_dir.join("confusion.csv")).unwrap();
    assert!(confusion.contains("kappa,"));

    // Feature set with the wrong dimensionality: shape error, exit 3.
    let narrow = dir.path().join("narrow.json");
    std::fs::write(
        &narrow,
        std::fs::read_to_string(&featureset)
            .unwrap()
            .replace("max+argmax", "max"),
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--featureset",
        narrow.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.path().join("eval2").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn predict_map_writes_stable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let out = run(&[
        "--seed",
        "17",
        "synth",
        "--n-per-class",
        "10",
        "--classes",
        "4",
        "--axis",
        "450:690:121",
        "--pigment",
        "510:570",
        "--chlorophyll",
        "610:670",
        "--peak-shift",
        "20",
        "--trough-lift",
        "0.3",
        "--noise-sigma",
        "0.02",
        "--emit-cubes",
        "1",
        "--cube-size",
        "14x18",
        "--cube-border",
        "3",
        "--out",
        data_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let featureset = dir.path().join("set.json");
    std::fs::write(
        &featureset,
        serde_json::json!({
            "version": 1,
            "windows": [{"lo_nm": 510.0, "hi_nm": 570.0}, {"lo_nm": 610.0, "hi_nm": 670.0}],
            "masks": ["max+argmax", "min+argmin"],
            "feature_dim": 4,
            "test_accuracy": 0.0, "test_loss": 0.0,
            "classifier": "svm", "met_target": false, "seed": 17
        })
        .to_string(),
    )
    .unwrap();
    let model = dir.path().join("model.hsm");
    assert_ok(&run(&[
        "--seed",
        "17",
        "train",
        "--manifest",
        data_dir.join("synth.manifest").to_str().unwrap(),
        "--featureset",
        featureset.to_str().unwrap(),
        "--model-kind",
        "svm",
        "--out",
        model.to_str().unwrap(),
    ]));

    let prefix = dir.path().join("map");
    let cube_path = data_dir.join("cube_000.hsc");
    let args = [
        "predict-map",
        "--cube",
        cube_path.to_str().unwrap(),
        "--featureset",
        featureset.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--red-nm",
        "460",
        "--nir-nm",
        "680",
        "--polarity",
        "high",
        "--out",
        prefix.to_str().unwrap(),
    ];
    assert_ok(&run(&args));
    let map =
        dualband::classify::pixelmap::read_class_map_pgm(&prefix.with_extension("pgm")).unwrap();
    // Background frame stays class 0.
    assert_eq!(map.get(0, 0), 0);
    assert_eq!(map.get(13, 17), 0);
    assert!(map.classes().iter().any(|&c| c != 0));
    assert!(prefix.with_extension("png").exists());

    let palette_a = std::fs::read(prefix.with_extension("palette.csv")).unwrap();
    assert_ok(&run(&args));
    let palette_b = std::fs::read(prefix.with_extension("palette.csv")).unwrap();
    assert_eq!(palette_a, palette_b, "palette must be stable across runs");
}

#[test]
fn bench_validates_reps_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    assert_ok(&run(&[
        "--seed",
        "19",
        "synth",
        "--n-per-class",
        "8",
        "--classes",
        "3",
        "--axis",
        "450:690:121",
        "--pigment",
        "510:570",
        "--chlorophyll",
        "610:670",
        "--peak-shift",
        "30",
        "--trough-lift",
        "0.4",
        "--noise-sigma",
        "0.02",
        "--emit-cubes",
        "1",
        "--cube-size",
        "10x12",
        "--cube-border",
        "2",
        "--out",
        data_dir.to_str().unwrap(),
    ]));
    let featureset = dir.path().join("set.json");
    std::fs::write(
        &featureset,
        serde_json::json!({
            "version": 1,
            "windows": [{"lo_nm": 510.0, "hi_nm": 570.0}],
            "masks": ["max+argmax"],
            "feature_dim": 2,
            "test_accuracy": 0.0, "test_loss": 0.0,
            "classifier": "svm", "met_target": false, "seed": 19
        })
        .to_string(),
    )
    .unwrap();
    let manifest = data_dir.join("synth.manifest");
    let selected = dir.path().join("sel.hsm");
    let full = dir.path().join("full.hsm");
    assert_ok(&run(&[
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--featureset",
        featureset.to_str().unwrap(),
        "--out",
        selected.to_str().unwrap(),
    ]));
    assert_ok(&run(&[
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--full-spectrum",
        "--out",
        full.to_str().unwrap(),
    ]));

    let csv = dir.path().join("bench.csv");
    let mut args = vec![
        "bench".to_string(),
        "--selected-model".into(),
        selected.to_string_lossy().into_owned(),
        "--featureset".into(),
        featureset.to_string_lossy().into_owned(),
        "--full-model".into(),
        full.to_string_lossy().into_owned(),
        "--cube".into(),
        data_dir.join("cube_000.hsc").to_string_lossy().into_owned(),
        "--out".into(),
        csv.to_string_lossy().into_owned(),
    ];
    // Too few repetitions: parameter error.
    let mut bad = args.clone();
    bad.extend(["--reps".into(), "2".into()]);
    let out = bin().args(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    args.extend(["--reps".into(), "3".into()]);
    let out = bin().args(&args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("method,model,fps"));
    assert!(text.contains("selected-features"));
    assert!(text.contains("full-spectrum"));
    assert!(text.contains("speedup"));
}
