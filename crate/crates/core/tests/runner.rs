use std::fs;
use std::path::Path;

use dnsnmf::runner::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use dnsnmf::runner::dataset::{
    generate_synthetic, load_dataset, read_csv_matrix, read_labels, read_pgm, write_csv_matrix,
    write_labels, write_pgm, DatasetSource, GrayImage, SyntheticSpec,
};
use dnsnmf::runner::features::export_feature_grid;
use dnsnmf::runner::report::{export_report, read_report, ExperimentReport, SparsenessSection, TraceSection};
use dnsnmf::runner::{depth_study, dims_for_depth, run_factorization, ThetaSpec};
use dnsnmf::{
    run_experiment, ClusteringReport, DenseMatrix, Error, ExperimentConfig, LabelVector, LayerStack,
    Method, SmoothingSpec,
};

fn synthetic(p: usize, n: usize, dims: Vec<usize>, theta: f64, seed: u64) -> DatasetSource {
    let mut s = SyntheticSpec::new(p, n, dims, theta, seed);
    s.noise = 0.05;
    s.background = 0.1;
    DatasetSource::Synthetic(s)
}

fn config(method: Method, dims: Vec<usize>, source: DatasetSource, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(method, dims, 0.3, source);
    cfg.outputs.dir = dir.to_path_buf();
    cfg.kmeans.restarts = 5;
    cfg
}

#[test]
fn csv_parse_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.csv");
    fs::write(&path, "1,2\n3,4\n").unwrap();
    assert_eq!(read_csv_matrix(&path).unwrap(), DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());

    let (bundle, _) = generate_synthetic(&SyntheticSpec::new(20, 60, vec![8, 4], 0.3, 7)).unwrap();
    write_csv_matrix(&path, &bundle.x).unwrap();
    let back = read_csv_matrix(&path).unwrap();
    assert!(back.frobenius_distance(&bundle.x).unwrap() <= 1e-12);

    let lpath = tmp.path().join("l.txt");
    let labels = bundle.labels.unwrap();
    write_labels(&lpath, &labels).unwrap();
    assert_eq!(read_labels(&lpath).unwrap(), labels);
}

#[test]
fn csv_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.csv");
    fs::write(&path, "1,-2\n3,4\n").unwrap();
    let source = DatasetSource::Csv {
        matrix: path.clone(),
        labels: None,
    };
    assert!(matches!(load_dataset(&source), Err(Error::Domain(_))));
    fs::write(&path, "1,2\n3\n").unwrap();
    assert_eq!(read_csv_matrix(&path).unwrap_err().exit_code(), 2);
    fs::write(&path, "1,x\n").unwrap();
    assert_eq!(read_csv_matrix(&path).unwrap_err().exit_code(), 2);
}

#[test]
fn pgm_directory_scaling_and_order() {
    let tmp = tempfile::tempdir().unwrap();
    for i in 0..3 {
        let mut img = GrayImage::new(4, 4);
        img.pixels.iter_mut().for_each(|p| *p = 255);
        write_pgm(&tmp.path().join(format!("img{i}.pgm")), &img).unwrap();
    }
    let source = DatasetSource::Pgm {
        dir: tmp.path().to_path_buf(),
        labels: None,
    };
    let bundle = load_dataset(&source).unwrap();
    assert_eq!(bundle.x.shape(), (16, 3));
    assert!(bundle.x.as_slice().iter().all(|&v| v == 1.0));
    assert_eq!(bundle.image_shape, Some((4, 4)));

    // commented header, column-major flattening
    let odd = tmp.path().join("odd");
    fs::create_dir(&odd).unwrap();
    fs::write(odd.join("a.pgm"), b"P5\n# note\n2 3\n255\n\x00\x33\x66\x99\xcc\xff").unwrap();
    let img = read_pgm(&odd.join("a.pgm")).unwrap();
    assert_eq!((img.width, img.height), (2, 3));
    let (x, shape) = dnsnmf::runner::dataset::read_pgm_dir(&odd).unwrap();
    assert_eq!(shape, (3, 2));
    let col: Vec<u8> = x.column(0).iter().map(|v| (v * 255.0).round() as u8).collect();
    assert_eq!(col, vec![0x00, 0x66, 0xcc, 0x33, 0x99, 0xff]);

    let mut big = GrayImage::new(2, 2);
    big.pixels = vec![1, 2, 3, 4];
    write_pgm(&odd.join("b.pgm"), &big).unwrap();
    assert!(matches!(
        dnsnmf::runner::dataset::read_pgm_dir(&odd),
        Err(Error::Format { .. })
    ));
}

#[test]
fn synthetic_is_exact_and_reproducible() {
    let spec = SyntheticSpec::new(20, 60, vec![8, 4], 0.3, 7);
    let (bundle, stack) = generate_synthetic(&spec).unwrap();
    assert!(stack.reconstruct().unwrap().frobenius_distance(&bundle.x).unwrap() <= 1e-12);
    let again = load_dataset(&DatasetSource::Synthetic(spec)).unwrap();
    assert_eq!(again.x.as_slice(), bundle.x.as_slice());
    assert_eq!(again.labels, bundle.labels);
    assert_eq!(bundle.labels.unwrap().as_slice()[5], 1);
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, stack) = generate_synthetic(&SyntheticSpec::new(12, 10, vec![5, 3], 0.25, 1)).unwrap();
    let path = tmp.path().join("m.ckpt");
    save_checkpoint(&path, &Checkpoint::new(stack.clone(), vec![], 1)).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.stack, stack);
    assert_eq!(loaded.manifest.dims, vec![5, 3]);
    let d = loaded.stack.reconstruct().unwrap().frobenius_distance(&stack.reconstruct().unwrap()).unwrap();
    assert!(d <= 1e-12);

    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    fs::write(&path, b"NOTACKPT").unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
}

#[test]
fn nmf_separates_two_planted_clusters() {
    let tmp = tempfile::tempdir().unwrap();
    let source = DatasetSource::Synthetic(SyntheticSpec::new(10, 30, vec![2], 0.0, 4));
    let cfg = config(Method::Nmf, vec![2], source, tmp.path());
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.report.metrics.unwrap().accuracy, Some(1.0));
}

#[test]
fn dnsnmf_smoke_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(Method::Dnsnmf, vec![8, 4], synthetic(20, 60, vec![8, 4], 0.3, 7), tmp.path());
    cfg.finetune.max_sweeps = 30;
    let out = run_experiment(&cfg).unwrap();
    let report = read_report(&out.report_path).unwrap();
    assert_eq!(report, out.report);
    let trace = &report.trace.objective;
    assert!(trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    assert_eq!(report.trace.inner_iterations.len(), trace.len() - 1);
    let m = report.metrics.unwrap();
    for v in [m.accuracy.unwrap(), m.nmi.unwrap()] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert_eq!(report.sparseness.z.len(), 2);
    assert_eq!(report.seeds.global, 0);
    assert!(out.checkpoint_path.exists());
}

#[test]
fn factorization_only_has_no_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(Method::Nsnmf, vec![3], synthetic(15, 20, vec![3], 0.3, 2), tmp.path());
    let out = run_factorization(&cfg).unwrap();
    assert!(out.report.metrics.is_none());
    assert!(out.report.seeds.kmeans.is_none());
    assert!(!fs::read_to_string(&out.report_path).unwrap().contains("[metrics]"));
}

fn sample_report(trace_len: usize) -> ExperimentReport {
    let cfg = ExperimentConfig::new(Method::Dnsnmf, vec![4, 2], 0.5, synthetic(8, 6, vec![4, 2], 0.5, 0));
    let clustering = ClusteringReport {
        accuracy: Some(1.0),
        nmi: Some(1.0),
        kmeans_objective: 0.25,
        restarts_used: 20,
        sparseness_z: vec![0.1, 0.2],
        sparseness_h: 0.3,
    };
    ExperimentReport::new(
        &cfg,
        Some(&clustering),
        SparsenessSection { z: vec![0.1, 0.2], h: 0.3 },
        TraceSection {
            objective: (0..trace_len).map(|i| 10.0 - i as f64 * 0.125).collect(),
            inner_iterations: vec![],
        },
        Some(0),
    )
}

#[test]
fn report_schema_and_stable_export() {
    let tmp = tempfile::tempdir().unwrap();
    let report = sample_report(30);
    let a = tmp.path().join("a.toml");
    let b = tmp.path().join("b.toml");
    export_report(&report, &a).unwrap();
    export_report(&read_report(&a).unwrap(), &b).unwrap();
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.contains("accuracy = 1.0\n"));
    assert!(text.contains("nmi = 1.0\n"));

    let parsed: toml::Table = text.parse().unwrap();
    let series = parsed["trace"]["objective"].as_array().unwrap();
    assert_eq!(series.len(), 30);
    assert_eq!(series[29].as_float(), Some(10.0 - 29.0 * 0.125));
    let order: Vec<&str> = ["schema", "method", "[metrics]", "[sparseness]", "[trace]", "[seeds]", "[config]"]
        .into_iter()
        .collect();
    let positions: Vec<usize> = order.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");
}

#[test]
fn one_hot_features_render_single_white_pixels() {
    let tmp = tempfile::tempdir().unwrap();
    let z = DenseMatrix::identity(4);
    let stack = LayerStack::new(vec![z], vec![SmoothingSpec::new(0.0, 4).unwrap()], DenseMatrix::filled(4, 3, 1.0)).unwrap();
    let path = tmp.path().join("f.pgm");
    let img = export_feature_grid(&stack, 1, (2, 2), &path).unwrap();
    assert_eq!((img.width, img.height), (5, 5));
    for t in 0..4 {
        let (top, left) = ((t / 2) * 3, (t % 2) * 3);
        let tile: Vec<u8> = (0..2).flat_map(|r| (0..2).map(move |c| (r, c))).map(|(r, c)| img.get(top + r, left + c)).collect();
        assert_eq!(tile.iter().filter(|&&p| p == 255).count(), 1);
        assert_eq!(tile.iter().filter(|&&p| p == 0).count(), 3);
    }
    let reread = read_pgm(&path).unwrap();
    assert_eq!((reread.width, reread.height), (5, 5));
    assert!(export_feature_grid(&stack, 1, (3, 2), &path).is_err());
    assert!(export_feature_grid(&stack, 2, (2, 2), &path).is_err());
}

#[test]
fn missing_labels_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("x.csv");
    write_csv_matrix(&path, &DenseMatrix::filled(4, 5, 1.0)).unwrap();
    let source = DatasetSource::Csv { matrix: path, labels: None };
    let mut cfg = config(Method::Nmf, vec![2], source, &tmp.path().join("out"));
    cfg.require_labels = true;
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err.root(), Error::Config(_)));
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("load"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn label_count_mismatch_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let x = tmp.path().join("x.csv");
    let l = tmp.path().join("l.txt");
    write_csv_matrix(&x, &DenseMatrix::filled(4, 5, 1.0)).unwrap();
    write_labels(&l, &LabelVector::new(vec![0, 1, 0])).unwrap();
    let cfg = config(Method::Nmf, vec![2], DatasetSource::Csv { matrix: x, labels: Some(l) }, tmp.path());
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn failed_write_leaves_no_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    fs::create_dir(&out_dir).unwrap();
    // a directory where the report file should go makes the report write fail
    fs::create_dir(out_dir.join("report.toml")).unwrap();
    let cfg = config(Method::Nsnmf, vec![3], synthetic(10, 12, vec![3], 0.3, 1), &out_dir);
    let err = run_factorization(&cfg).unwrap_err();
    assert!(err.to_string().contains("write"));
    assert!(!out_dir.join("model.ckpt").exists());
}

#[test]
fn config_validation() {
    let src = synthetic(10, 12, vec![3], 0.3, 1);
    let mut cfg = ExperimentConfig::new(Method::Nmf, vec![4, 2], 0.0, src.clone());
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    cfg.method = Method::Dnsnmf;
    cfg.validate().unwrap();
    cfg.theta = ThetaSpec::PerLayer(vec![0.1, 0.2, 0.3]);
    assert!(cfg.validate().is_err());
    cfg.theta = ThetaSpec::Shared(1.5);
    assert!(cfg.validate().is_err());

    let text = "method = \"dnsnmf\"\ndims = [6, 3]\ntheta = [0.1, 0.4]\n\n[dataset]\nkind = \"csv\"\nmatrix = \"x.csv\"\n";
    let parsed = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(parsed.thetas().unwrap(), vec![0.1, 0.4]);
    assert_eq!(ExperimentConfig::from_toml(&parsed.to_toml().unwrap()).unwrap(), parsed);
    assert!(ExperimentConfig::from_toml("dims = [3]\nbogus = 1\n").is_err());
}

#[test]
fn depth_study_layout() {
    assert_eq!(dims_for_depth(&[40, 20, 10], 1).unwrap(), vec![10]);
    assert_eq!(dims_for_depth(&[40, 20, 10], 2).unwrap(), vec![40, 10]);
    assert!(dims_for_depth(&[40, 20, 10], 4).is_err());

    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(Method::Dnsnmf, vec![8, 4], synthetic(20, 40, vec![8, 4], 0.3, 3), tmp.path());
    cfg.finetune.max_sweeps = 5;
    let study = depth_study(&cfg, &[1, 2], &[0.2, 0.5]).unwrap();
    assert_eq!(study.arms.len(), 4);
    for arm in &study.arms {
        assert_eq!(arm.dims.len(), arm.depth);
        assert!(arm.dir.join("report.toml").exists());
        assert!(arm.accuracy.is_some());
    }
    assert!(tmp.path().join("depth_study.toml").exists());
}
