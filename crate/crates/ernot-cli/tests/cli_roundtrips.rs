//! File-format round trips: checkpoints, CSV tables, plan JSON, and the
//! key=value config layer.

use std::path::PathBuf;

use ernot::geometry::ManifoldKind;
use ernot::mlp::Mlp;
use ernot::sampling::{sample_wrapped_normal_with, WrappedNormalSpec};
use ernot::semidual::build_gibbs_plan;
use ernot::{measure::DiscreteMeasure, rng};
use ernot_cli::checkpoint::{load_checkpoint, save_checkpoint};
use ernot_cli::config::{ExtractorOpt, Method, RunOptions};
use ernot_cli::report::{
    read_csv, read_matrix_csv, write_csv, write_matrix_csv, BenchCsvRow, PlanFile, ScalingCsvRow,
};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ernot-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn sphere_measure(n: usize, seed: u64) -> DiscreteMeasure {
    let spec = WrappedNormalSpec::Isotropic {
        center: ManifoldKind::Sphere2.origin(),
        sigma: 0.6,
    };
    let mut r = rng::seeded(seed, 7);
    DiscreteMeasure::uniform(sample_wrapped_normal_with(&spec, n, &mut r).unwrap()).unwrap()
}

#[test]
fn checkpoint_restores_the_exact_network() {
    let net = Mlp::init(5, 16, 3, 99).unwrap();
    let path = scratch("net.ckpt");
    save_checkpoint(&path, &net, 4242).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.seed, 4242);
    assert_eq!(loaded.net.input_dim(), 5);
    assert_eq!(loaded.net.width(), 16);
    assert_eq!(loaded.net.depth(), 3);
    assert_eq!(loaded.net.params(), net.params());
}

#[test]
fn checkpoint_rejects_truncated_and_padded_files() {
    let net = Mlp::init(3, 8, 2, 1).unwrap();
    let path = scratch("mangled.ckpt");
    save_checkpoint(&path, &net, 0).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let short = scratch("short.ckpt");
    std::fs::write(&short, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_checkpoint(&short).is_err());

    let long = scratch("long.ckpt");
    let mut padded = bytes.clone();
    padded.extend_from_slice(&[0u8; 8]);
    std::fs::write(&long, &padded).unwrap();
    assert!(load_checkpoint(&long).is_err());

    let header_only = scratch("header.ckpt");
    std::fs::write(&header_only, &bytes[..16]).unwrap();
    assert!(load_checkpoint(&header_only).is_err());
}

#[test]
fn checkpoint_rejects_non_finite_parameters() {
    let net = Mlp::init(3, 8, 2, 1).unwrap();
    let path = scratch("nan.ckpt");
    save_checkpoint(&path, &net, 0).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    let nan = f64::NAN.to_le_bytes();
    bytes[32..40].copy_from_slice(&nan);
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn bench_rows_round_trip_through_disk() {
    let rows = vec![
        BenchCsvRow {
            benchmark: "s2".into(),
            seed: 3,
            method: "ernot".into(),
            manifold: "s2".into(),
            n: 200,
            m: 200,
            epsilon: 0.1 + 0.2,
            plan_kl: 4.9e-324,
            conditional_w1: 1e308,
            map_l2: f64::MIN_POSITIVE,
            endpoint_error: 0.4835,
        },
        BenchCsvRow {
            benchmark: "h2".into(),
            seed: 0,
            method: "tangent_space".into(),
            manifold: "h2".into(),
            n: 16,
            m: 14,
            epsilon: 1.0,
            plan_kl: 0.0,
            conditional_w1: 0.0,
            map_l2: 0.0,
            endpoint_error: 0.0,
        },
    ];
    let path = scratch("bench.csv");
    write_csv(&path, &rows).unwrap();
    let back: Vec<BenchCsvRow> = read_csv(&path).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn scaling_rows_round_trip_through_disk() {
    let rows = vec![
        ScalingCsvRow {
            manifold: "se3".into(),
            n: 4096,
            method: "neural".into(),
            seconds: 12.625,
            bytes: u64::MAX,
            feasible: true,
        },
        ScalingCsvRow {
            manifold: "se3".into(),
            n: 1 << 20,
            method: "sinkhorn".into(),
            seconds: 0.0,
            bytes: 8 * (1u64 << 40),
            feasible: false,
        },
    ];
    let path = scratch("scaling.csv");
    write_csv(&path, &rows).unwrap();
    let back: Vec<ScalingCsvRow> = read_csv(&path).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn matrix_csv_round_trips_awkward_floats() {
    let path = scratch("mat.csv");
    let m = ernot::mat::Mat::from_vec(
        2,
        3,
        vec![0.1 + 0.2, 4.9e-324, 1e308, -0.0, 1.0 / 3.0, 2.5e-101],
    );
    write_matrix_csv(&path, &m).unwrap();
    let back = read_matrix_csv(&path).unwrap();
    assert_eq!(back.rows(), 2);
    assert_eq!(back.cols(), 3);
    assert_eq!(back.data(), m.data());
}

#[test]
fn plan_file_round_trips_and_revalidates() {
    let source = sphere_measure(6, 1);
    let target = sphere_measure(5, 2);
    let g = vec![0.05, -0.02, 0.0, 0.01, -0.04];
    let plan = build_gibbs_plan(&source, &target, &g, 0.3).unwrap();

    let path = scratch("plan.json");
    PlanFile::from_plan(&plan).write(&path).unwrap();
    let back = PlanFile::read(&path).unwrap().into_plan().unwrap();

    assert_eq!(back.rows(), 6);
    assert_eq!(back.cols(), 5);
    assert_eq!(back.epsilon(), 0.3);
    assert_eq!(back.matrix().data(), plan.matrix().data());
    assert_eq!(back.col_support().weights(), target.weights());
    for (a, b) in back.col_support().atoms().iter().zip(target.atoms()) {
        assert_eq!(a.coords(), b.coords());
    }
}

#[test]
fn config_overrides_apply_in_order_and_reject_unknowns() {
    let mut options = RunOptions::default();
    options
        .apply_overrides(
            "# comment\n\
             support_n = 32\n\
             epsilon_scale = 0.1\n\
             methods = ernot,reference\n\
             extractor = bary\n\
             support_n = 48\n",
        )
        .unwrap();
    assert_eq!(options.support_n, 48);
    assert_eq!(options.epsilon_scale, 0.1);
    assert_eq!(
        options.methods,
        vec![Method::ErNot, Method::SinkhornReference]
    );
    assert_eq!(options.extractor, ExtractorOpt::Barycenter);

    let err = format!("{:#}", options.apply_overrides("no_such_key = 1").unwrap_err());
    assert!(err.contains("no_such_key"), "{err}");
    assert!(err.contains("valid keys"), "{err}");
}

#[test]
fn config_validation_rejects_degenerate_values() {
    for bad in [
        "support_n = 1",
        "epsilon_scale = 0",
        "batch_size = 1",
        "learning_rate = -0.5",
        "landmark_pool = 8\nlandmark_count = 9",
        "sinkhorn_tol = 0",
        "methods = ",
    ] {
        let mut options = RunOptions::default();
        let outcome = options
            .apply_overrides(bad)
            .and_then(|()| options.validate());
        assert!(outcome.is_err(), "expected {bad:?} to be rejected");
    }
}

#[test]
fn method_and_extractor_labels_round_trip() {
    for method in Method::ALL {
        assert_eq!(Method::from_label(method.label()).unwrap(), method);
    }
    for opt in [ExtractorOpt::Heat, ExtractorOpt::Barycenter] {
        assert_eq!(ExtractorOpt::from_label(opt.label()).unwrap(), opt);
    }
    assert!(Method::from_label("quantum").is_none());
    assert!(ExtractorOpt::from_label("modal").is_none());
}
