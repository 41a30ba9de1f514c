use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sparse_ilc::config::ExperimentConfig;
use sparse_ilc::experiment::{
    ERRORS_HEADER, PREDICTION_HEADER, SIGNALS_HEADER, SPECTRA_HEADER, SUMMARY_HEADER, SWEEP_HEADER, TRIALS_HEADER,
    TRIAL_VARYING_HEADER,
};

fn sparse_ilc(args: &[&str], config: &Path, extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sparse-ilc"));
    cmd.arg(args[0]).arg(config);
    for p in extra {
        cmd.arg(p);
    }
    cmd.args(&args[1..]);
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_owned).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let k = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|row| row.unwrap()[k].to_owned()).collect()
}

fn summary(path: &Path, metric: &str) -> String {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|row| row.unwrap())
        .find(|row| &row[0] == metric)
        .map(|row| row[1].to_owned())
        .unwrap_or_else(|| panic!("no {metric} in {}", path.display()))
}

const INVERSE: &str = "[task]\nn = 300\n[algorithm]\nvariant = \"inverse_model\"\n\
                       [run]\nn_trials = 12\nn_conv = 2\nn_iter = 10\n";

#[test]
fn run_writes_fixed_schemas_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", INVERSE);
    let out = dir.path().join("out");
    let res = sparse_ilc(&["run", "--out", out.to_str().unwrap()], &cfg, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let expect: [(&str, &[&str]); 7] = [
        ("trials.csv", &TRIALS_HEADER),
        ("errors.csv", &ERRORS_HEADER),
        ("signals_trial_0.csv", &SIGNALS_HEADER),
        ("signals_trial_11.csv", &SIGNALS_HEADER),
        ("spectra.csv", &SPECTRA_HEADER),
        ("trial_varying.csv", &TRIAL_VARYING_HEADER),
        ("summary.csv", &SUMMARY_HEADER),
    ];
    for (name, h) in expect {
        assert_eq!(header(&out.join(name)), h, "{name}");
    }
    assert_eq!(
        header(&out.join("trials.csv")).join(","),
        "trial,e_norm2,f_card,df_card,objective,converged,wall_ms"
    );
    assert_eq!(header(&out.join("spectra.csv")).join(","), "freq_hz,phi_measured,phi_v_theory,phi_e_inf_theory");
    assert_eq!(column(&out.join("trials.csv"), "trial").len(), 12);
    assert_eq!(column(&out.join("signals_trial_0.csv"), "t_index").len(), 300);
    for svg in ["error_norm.svg", "cardinality.svg", "spectra.svg", "trial_varying.svg"] {
        let text = std::fs::read_to_string(out.join(svg)).unwrap();
        assert!(text.starts_with("<svg"), "{svg}");
    }
    assert_eq!(summary(&out.join("summary.csv"), "verdict"), "converges");
}

#[test]
fn no_plots_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", INVERSE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        let res = sparse_ilc(&["run", "--no-plots", "--seed", seed, "--out", out.to_str().unwrap()], &cfg, &[]);
        assert_eq!(res.status.code(), Some(0));
    }
    assert!(!a.join("error_norm.svg").exists());
    let ea = std::fs::read(a.join("errors.csv")).unwrap();
    let eb = std::fs::read(b.join("errors.csv")).unwrap();
    assert_ne!(ea, eb, "different seeds must give different noise");
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", INVERSE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let res = sparse_ilc(&["run", "--no-plots", "--threads", threads, "--out", out.to_str().unwrap()], &cfg, &[]);
        assert_eq!(res.status.code(), Some(0));
    }
    for f in ["errors.csv", "spectra.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", "[task]\nn = 300\nbogus = 1\n[algorithm]\nvariant = \"inverse_model\"\n");
    let res = sparse_ilc(&["run"], &unknown, &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bogus"));

    let bad_value = write(dir.path(), "b.toml", "[task]\nn = 300\n[algorithm]\nvariant = \"inverse_model\"\nalpha = 1.5\n");
    let res = sparse_ilc(&["run"], &bad_value, &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("algorithm.alpha"));

    let res = sparse_ilc(&["run"], &dir.path().join("missing.toml"), &[]);
    assert_eq!(res.status.code(), Some(1));

    // no frequency-domain form for an l1 update
    let l1 = write(dir.path(), "l1.toml", "[task]\nn = 300\n[algorithm]\nvariant = \"optimization\"\nlambda = 1e-10\n");
    let res = sparse_ilc(&["predict", "--out", dir.path().join("p").to_str().unwrap()], &l1, &[]);
    assert_eq!(res.status.code(), Some(1));

    // sweep needs the optimization variant
    let cfg = write(dir.path(), "s.toml", &format!("{INVERSE}[sweep]\nlambdas = [0.1]\n"));
    let res = sparse_ilc(&["sweep", "--out", dir.path().join("s").to_str().unwrap()], &cfg, &[]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn runtime_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", INVERSE);
    let missing = dir.path().join("nothing_here");
    let res = sparse_ilc(&["analyze", "--out", dir.path().join("o").to_str().unwrap()], &cfg, &[&missing]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn unconverged_solves_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[task]\nn = 300\n[algorithm]\nvariant = \"optimization\"\npenalty = \"fused\"\nlambda = 1e-11\n\
         [algorithm.solver]\nmax_iterations = 2\n[run]\nn_trials = 3\n",
    );
    let out = dir.path().join("o");
    let res = sparse_ilc(&["run", "--no-plots", "--out", out.to_str().unwrap()], &cfg, &[]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(column(&out.join("trials.csv"), "converged").iter().any(|c| c == "false"));
}

#[test]
fn analyze_noise_free_run_has_no_trial_varying_part() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &INVERSE.replace("[run]\n", "[run]\nnoise = false\n"));
    let run_dir = dir.path().join("run");
    let res = sparse_ilc(&["run", "--no-plots", "--out", run_dir.to_str().unwrap()], &cfg, &[]);
    assert_eq!(res.status.code(), Some(0));
    let out = dir.path().join("analysis");
    let res = sparse_ilc(&["analyze", "--no-plots", "--out", out.to_str().unwrap()], &cfg, &[&run_dir]);
    assert!(res.status.code() == Some(0) || res.status.code() == Some(2));
    let e0: f64 = column(&run_dir.join("trials.csv"), "e_norm2")[0].parse().unwrap();
    let tv = column(&out.join("trial_varying.csv"), "trial_varying_norm");
    assert_eq!(tv.len(), 12);
    for v in &tv[2..] {
        let v: f64 = v.parse().unwrap();
        assert!(v <= 1e-12 * e0, "{v}");
    }
    // the errors file alone works as well
    let res = sparse_ilc(
        &["analyze", "--no-plots", "--out", dir.path().join("a2").to_str().unwrap()],
        &cfg,
        &[&run_dir.join("errors.csv")],
    );
    assert!(res.status.code() == Some(0) || res.status.code() == Some(2));
}

#[test]
fn analyze_reproduces_run_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", INVERSE);
    let run_dir = dir.path().join("run");
    assert_eq!(sparse_ilc(&["run", "--no-plots", "--out", run_dir.to_str().unwrap()], &cfg, &[]).status.code(), Some(0));
    let out = dir.path().join("analysis");
    let res = sparse_ilc(&["analyze", "--no-plots", "--out", out.to_str().unwrap()], &cfg, &[&run_dir]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(
        std::fs::read(run_dir.join("spectra.csv")).unwrap(),
        std::fs::read(out.join("spectra.csv")).unwrap()
    );
}

#[test]
fn predict_reports_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[task]\nn = 512\n[plant]\nmodel_gain = 1.4285714285714286\n[algorithm]\nvariant = \"inverse_model\"\n",
    );
    let out = dir.path().join("p");
    let res = sparse_ilc(&["predict", "--out", out.to_str().unwrap()], &cfg, &[]);
    assert_eq!(res.status.code(), Some(0));
    let rho: f64 = summary(&out.join("convergence.csv"), "rho_hat").parse().unwrap();
    assert!((rho - 0.3).abs() < 1e-6, "{rho}");
    assert_eq!(header(&out.join("prediction.csv")), PREDICTION_HEADER);
    assert!(out.join("prediction.svg").exists());

    let diverging = write(
        dir.path(),
        "d.toml",
        "[task]\nn = 512\n[plant]\nmodel_gain = 0.4\n[algorithm]\nvariant = \"inverse_model\"\n",
    );
    let out = dir.path().join("d");
    let res = sparse_ilc(&["predict", "--no-plots", "--out", out.to_str().unwrap()], &diverging, &[]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(summary(&out.join("convergence.csv"), "verdict"), "diverges");
}

#[test]
fn sweep_entries_and_zero_solution_above_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[task]\nn = 300\n[algorithm]\nvariant = \"optimization\"\n[run]\nn_trials = 5\nnoise = false\n\
         [sweep]\nlambdas = [0.01, 1.01]\nrelative = true\n",
    );
    let out = dir.path().join("s");
    let res = sparse_ilc(&["sweep", "--no-plots", "--out", out.to_str().unwrap()], &cfg, &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let table = out.join("sweep_summary.csv");
    assert_eq!(header(&table), SWEEP_HEADER);
    let cards = column(&table, "final_f_card");
    assert_eq!(cards.len(), 2);
    assert_ne!(cards[0], "0");
    // above the zero-solution threshold the command never leaves zero
    assert_eq!(cards[1], "0");
    assert!(out.join("sweep_000").join("trials.csv").exists());
    assert!(out.join("sweep_001").join("trials.csv").exists());
}

#[test]
fn config_round_trip_through_toml() {
    let text = "[task]\nn = 300\n[algorithm]\nvariant = \"optimization\"\nlambda = 2e-10\npenalty = \"sparse_fused\"\n\
                fusion_weight = 3.0\n[run]\nn_trials = 7\nseed = 9\n[sweep]\nlambdas = [0.1, 0.2]\n";
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, again);
}
