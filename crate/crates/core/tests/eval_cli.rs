use std::path::{Path, PathBuf};
use std::process::Command;

use mfpinn::csvio::Table;
use mfpinn::eval::{self, relative_l2, Experiment, ExperimentConfig, Variant};
use mfpinn::heat::{self, SolverSettings, ThermalSetup};
use proptest::prelude::*;

#[test]
fn relative_l2_examples() {
    let y = [1.0, -2.0, 3.5];
    assert_eq!(relative_l2(&y, &y).unwrap(), 0.0);
    let doubled: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
    assert!((relative_l2(&doubled, &y).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(relative_l2(&[1.0], &[0.0]), Err(mfpinn::Error::Metric(_))));
    assert!(relative_l2(&[1.0, 2.0], &[1.0]).is_err());
}

proptest! {
    #[test]
    fn relative_l2_sanity(
        pairs in prop::collection::vec((-100.0f64..100.0, 0.5f64..100.0), 1..40),
        seed in any::<u64>(),
    ) {
        let (pred, truth): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let e = relative_l2(&pred, &truth).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e == 0.0, pred == truth);
        let mut idx: Vec<usize> = (0..pred.len()).collect();
        let mut s = seed;
        for i in (1..idx.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        let p2: Vec<f64> = idx.iter().map(|&i| pred[i]).collect();
        let t2: Vec<f64> = idx.iter().map(|&i| truth[i]).collect();
        let e2 = relative_l2(&p2, &t2).unwrap();
        prop_assert!((e - e2).abs() <= 1e-12 * e.max(1.0));
    }
}

#[test]
fn exact_prediction_has_zero_error_field() {
    let field = heat::solve(
        &ThermalSetup::composite_2(),
        &SolverSettings {
            dt: 1.0,
            ..Default::default()
        },
    )
    .unwrap();
    let grid = heat::test_grid(&field).unwrap();
    let errors = eval::error_field(|_| Ok(grid.points.iter().map(|p| p.temperature).collect()), &field).unwrap();
    assert_eq!(errors.points.len(), 5658);
    assert!(errors.points.iter().all(|p| p.2 == 0.0));
    assert!(eval::error_field(|_| Ok(vec![0.0; 10]), &field).is_err());
}

#[test]
fn config_defaults_and_round_trip() {
    let d = ExperimentConfig::default();
    assert_eq!(d.seeds, vec![0, 1, 2]);
    assert_eq!(d.labels.sweep, vec![10, 50, 100, 200, 400]);
    assert_eq!((d.labels.pinn_data, d.labels.cooldown_cloud, d.labels.low_fidelity), (50, 30, 200));
    assert_eq!(d.high_fidelity.conductivity, 0.702);
    assert_eq!(d.train.batch_size, 64);
    let back = ExperimentConfig::from_toml_str(&d.to_toml()).unwrap();
    assert_eq!(back, d);
    assert_eq!(back.hash(), d.hash());

    let partial = ExperimentConfig::from_toml_str("seeds = [4]\n[train]\nepochs = 3\n").unwrap();
    assert_eq!(partial.seeds, vec![4]);
    assert_eq!(partial.train.epochs, 3);
    assert_eq!(partial.train.learning_rate, 1e-3);
    assert_ne!(partial.hash(), d.hash());
    let moved = ExperimentConfig {
        output_dir: "elsewhere".into(),
        workers: 3,
        ..d.clone()
    };
    assert_eq!(moved.hash(), d.hash());

    for bad in ["seeds = []", "[labels]\nsweep = [50, 10]", "[train]\nema_alpha = 0.0", "bogus = 1", "[train]\nepochs = -1"] {
        assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(mfpinn::Error::Config(_))), "{bad}");
    }
}

/// One-epoch config with a coarse oracle, for end-to-end plumbing checks.
fn smoke_config(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.seeds = vec![0, 1];
    c.output_dir = out.to_path_buf();
    c.train.epochs = 1;
    c.solver.dt = 0.5;
    c.hidden_layers = vec![8, 8];
    c.points.collocation = 128;
    c
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mfpinn")).args(args).output().unwrap()
}

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn every_variant_runs_end_to_end_and_bundles_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = Experiment::new(smoke_config(tmp.path())).unwrap();
    for v in Variant::ALL {
        let dir = tmp.path().join(v.name());
        let run = exp.run_to_dir(v, 0, None, &dir).unwrap();
        for f in ["history.csv", "labeled.csv", "error_field.csv", "bundle/manifest.toml"] {
            assert!(dir.join(f).exists(), "{v}: {f}");
        }
        assert_eq!(dir.join("low_history.csv").exists(), v.is_multi_fidelity());
        assert_eq!(run.labeled.len(), v.default_labels(exp.config()));
        let (model, manifest) = eval::load_bundle(dir.join("bundle")).unwrap();
        assert_eq!(model, run.model);
        assert_eq!(manifest.rel_l2.to_bits(), run.rel_l2.to_bits());
        let field = heat::solve(model.setup(), &manifest.solver).unwrap();
        let again = eval::evaluate(|xt| model.predict_many(xt), &field).unwrap();
        assert!((again.rel_l2 - run.rel_l2).abs() <= 1e-12);

        for csv in ["history.csv", "labeled.csv", "error_field.csv"] {
            let text = std::fs::read_to_string(dir.join(csv)).unwrap();
            assert!(text.starts_with(&format!("# config_hash={} seed=0\n", exp.config().hash())));
            assert_eq!(Table::parse(&text).unwrap().render(), text);
        }
    }
}

#[test]
fn cli_generate_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &smoke_config(tmp.path()));
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = cli(&["generate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(out);
    }
    for f in ["field_high.csv", "field_low.csv", "seed1/labeled_low.csv", "seed1/labeled_high.csv", "seed0/cooldown_cloud.csv"] {
        let text = std::fs::read_to_string(outputs[0].join(f)).unwrap();
        assert!(text == std::fs::read_to_string(outputs[1].join(f)).unwrap(), "{f} differs");
        assert!(text.lines().nth(1) == Some("x_m,t_s,temp_C"), "{f}");
    }
}

#[test]
fn cli_train_evaluate_midpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &smoke_config(tmp.path()));
    let cfg = config.to_str().unwrap();
    let out = tmp.path().join("train");
    let o = cli(&["train", "mfpinn", "--config", cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    assert!(line.starts_with("variant=mfpinn labeled_n=0 seed=3 rel_l2="), "{line}");
    let trained: f64 = line.split_whitespace().find_map(|kv| kv.strip_prefix("rel_l2=")).unwrap().parse().unwrap();

    let bundle = eval::run_dir(&out, Variant::MfPinn, 0, 3).join("bundle");
    let ev = tmp.path().join("eval");
    let o = cli(&["evaluate", bundle.to_str().unwrap(), "--out", ev.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let evaluated: f64 = stdout(&o).split_whitespace().find_map(|kv| kv.strip_prefix("rel_l2=")).unwrap().parse().unwrap();
    assert!((evaluated - trained).abs() <= 1e-12);
    assert!(ev.join("error_field.csv").exists());

    let o = cli(&["midpoint", bundle.to_str().unwrap(), "--out", ev.to_str().unwrap()]);
    assert!(o.status.success());
    let table = Table::read(ev.join("midpoint.csv")).unwrap();
    assert_eq!(table.header, ["t_s", "predicted_C", "oracle_C"]);
    assert_eq!(table.rows.len(), 138);
}

#[test]
fn cli_errors_are_machine_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let cases: [(&[&str], &str); 3] = [
        (&["train", "nope"], "error kind=config "),
        (&["evaluate", missing.to_str().unwrap()], "error kind=io "),
        (&["frobnicate"], "error kind=usage "),
    ];
    for (args, prefix) in cases {
        let o = cli(args);
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.starts_with(prefix), "{args:?}: {err}");
        assert_eq!(err.lines().count(), 1);
    }
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "seeds = \"zero\"").unwrap();
    let o = cli(&["generate", "--config", bad.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error kind=config "));
}

#[test]
fn table_runs_write_sweep_and_summary_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = smoke_config(tmp.path());
    config.labels.sweep = vec![5, 20];
    config.seeds = vec![0];
    let exp = Experiment::new(config).unwrap();
    let runs = exp.reproduce_table2(Some(tmp.path())).unwrap();
    assert_eq!(runs.len(), 2);
    let t = Table::read(tmp.path().join("table2_runs.csv")).unwrap();
    assert_eq!(t.header, ["variant", "labeled_n", "seed", "rel_l2"]);
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[1][..3], ["pinn+data", "20", "0"]);
    let s = Table::read(tmp.path().join("table2.csv")).unwrap();
    assert_eq!(s.rows.len(), 2);
}
