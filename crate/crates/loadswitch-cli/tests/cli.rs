//! End-to-end runs of the `loadswitch` binary: exit codes, file outputs, and
//! determinism across reruns, seeds, and thread counts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;

use loadswitch::model::{simulate_packet, zadoff_chu, ReceiverScenario};
use loadswitch::montecarlo::RECORDS_HEADER;
use loadswitch::rng::trial_rng;
use loadswitch::stats::{reduce_all, write_stats_csv, SufficientStats};
use loadswitch_cli::config::TrainingFile;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loadswitch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SWEEP_CONFIG: &str = r#"
mode = "sweep"
trials = 80
l = 4
seed = 9
snr_db = [0.0, 10.0]
estimators = ["iid_quadratic", "consistent"]
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWEEP_CONFIG);
    let csv = dir.path().join("out.csv");
    let manifest = dir.path().join("run.json");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let body = fs::read_to_string(&csv).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some(RECORDS_HEADER));
    // 2 SNR points x 2 estimators
    assert_eq!(lines.count(), 4);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(doc["seed"], 9);
    assert_eq!(doc["records"], 4);
    assert_eq!(doc["config"]["mode"], "sweep");
    assert_eq!(doc["outputs"][0], csv.to_str().unwrap());
}

#[test]
fn sweep_output_is_reproducible_across_runs_threads_and_changed_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWEEP_CONFIG);
    let mut bytes = Vec::new();
    for (name, extra) in [
        ("a.csv", vec![]),
        ("b.csv", vec![]),
        ("c.csv", vec!["--threads", "1"]),
        ("d.csv", vec!["--threads", "4"]),
    ] {
        let csv = dir.path().join(name);
        let mut args = vec![
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
        ];
        args.extend(extra);
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
        bytes.push(fs::read(&csv).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
    assert_eq!(bytes[0], bytes[3]);

    let csv = dir.path().join("seeded.csv");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--seed",
        "123",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(bytes[0], fs::read(&csv).unwrap());
}

#[test]
fn config_errors_name_the_offending_key_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("out.csv");

    let missing = write_config(dir.path(), "mode = \"sweep\"\nl = 4\nsnr_db = [0.0]\n");
    let out = run(&[
        "sweep",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("trials"), "{}", stderr_of(&out));

    let unknown = write_config(
        dir.path(),
        "mode = \"sweep\"\ntrials = 5\nl = 4\nsnr_db = [0.0]\ntrails = 6\n",
    );
    let out = run(&[
        "sweep",
        "--config",
        unknown.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("trails"), "{}", stderr_of(&out));

    let gone = dir.path().join("absent.toml");
    let out = run(&[
        "sweep",
        "--config",
        gone.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

fn write_stats_file(path: &Path, stats: &SufficientStats) {
    let mut buf = Vec::new();
    write_stats_csv(stats, &mut buf).unwrap();
    fs::write(path, buf).unwrap();
}

#[test]
fn estimate_recovers_the_noiseless_reference_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = ReceiverScenario::reference(0.0).unwrap();
    let f = scenario.f();
    let h = [
        Complex64::new(0.8, -0.3),
        Complex64::new(1.2, 0.1),
        Complex64::new(-0.5, 0.9),
    ];
    let mut rng = trial_rng(7, 0, 0);
    let packets: Vec<_> = h
        .iter()
        .map(|&hi| simulate_packet(hi, f, &scenario, &mut rng))
        .collect();
    let stats = reduce_all(&packets, &scenario).unwrap();
    let path = dir.path().join("stats.csv");
    write_stats_file(&path, &stats);

    let out = run(&["estimate", "--stats", path.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
    let f_hat = Complex64::new(
        doc["f_hat"][0].as_f64().unwrap(),
        doc["f_hat"][1].as_f64().unwrap(),
    );
    assert!((f_hat - f).norm() < 1e-9 * f.norm(), "f_hat={f_hat}");
    let za = Complex64::new(
        doc["z_a_hat"][0].as_f64().unwrap(),
        doc["z_a_hat"][1].as_f64().unwrap(),
    );
    let want = Complex64::new(73.0, 42.5);
    assert!((za - want).norm() < 1e-6 * want.norm(), "z_a_hat={za}");
    // exact fit reports no finite objective value
    assert!(doc["loglik"].is_null());

    let text = run(&["estimate", "--stats", path.to_str().unwrap()]);
    assert_eq!(text.status.code(), Some(0));
    let text = stdout_of(&text);
    assert!(text.contains("Z_A_hat"), "{text}");
    assert!(text.contains("exact fit"), "{text}");
}

#[test]
fn general_method_matches_single_packet_on_one_packet() {
    let dir = tempfile::tempdir().unwrap();
    let stats = SufficientStats::new(
        vec![Complex64::new(1.0, 0.0)],
        vec![Complex64::new(0.0, 1.0)],
        32.0,
        32.0,
        1.0,
    )
    .unwrap();
    let path = dir.path().join("one.csv");
    write_stats_file(&path, &stats);

    let mut results = Vec::new();
    for method in ["general", "single_packet"] {
        let out = run(&[
            "estimate",
            "--stats",
            path.to_str().unwrap(),
            "--method",
            method,
            "--json",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
        let doc: serde_json::Value = serde_json::from_str(stdout_of(&out).trim()).unwrap();
        results.push(Complex64::new(
            doc["f_hat"][0].as_f64().unwrap(),
            doc["f_hat"][1].as_f64().unwrap(),
        ));
    }
    assert!((results[0] - results[1]).norm() < 1e-9, "{results:?}");
    // shrinkage 32/33 against a unit first statistic
    assert!((results[1] - Complex64::new(0.0, 1.03125)).norm() < 1e-12);
}

#[test]
fn estimate_routes_block_constant_priors_to_the_pooled_method() {
    let dir = tempfile::tempdir().unwrap();
    let stats = SufficientStats::new(
        vec![Complex64::new(1.0, 0.1); 3],
        vec![Complex64::new(0.9, 0.4); 3],
        32.0,
        32.0,
        0.5,
    )
    .unwrap();
    let path = dir.path().join("block.csv");
    write_stats_file(&path, &stats);
    let out = run(&[
        "estimate",
        "--stats",
        path.to_str().unwrap(),
        "--method",
        "general",
        "--prior",
        "slow_fading",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("slow_fading"),
        "{}",
        stderr_of(&out)
    );
}

#[test]
fn estimate_reports_unidentifiable_data_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let stats = SufficientStats::new(
        vec![Complex64::new(0.0, 0.0)],
        vec![Complex64::new(1.0, 0.0)],
        32.0,
        32.0,
        1.0,
    )
    .unwrap();
    let path = dir.path().join("zero.csv");
    write_stats_file(&path, &stats);
    let out = run(&["estimate", "--stats", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("unidentifiable"),
        "{}",
        stderr_of(&out)
    );
}

#[test]
fn bound_prints_the_reference_floor_and_iid_diagonal_is_size_free() {
    let out = run(&["bound"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("f_bound"), "{text}");
    assert!(text.contains("0.003125"), "{text}");

    let diag_of = |l: &str| -> String {
        let out = run(&["bound", "--l", l]);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout_of(&out);
        let line = text
            .lines()
            .find(|ln| ln.starts_with("h_diag_rel"))
            .unwrap()
            .to_string();
        line.split_whitespace().nth(1).unwrap().to_string()
    };
    assert_eq!(diag_of("1"), diag_of("10"));
}

#[test]
fn bound_rejects_a_zero_power_prior() {
    let out = run(&["bound", "--sigma-h2", "0"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn gen_round_trips_and_rejects_odd_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("training.toml");
    let out = run(&["gen", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let body = fs::read_to_string(&path).unwrap();
    let doc: TrainingFile = toml::from_str(&body).unwrap();
    assert_eq!(doc.t, 64);
    assert_eq!(doc.k, 32);
    assert_eq!(doc.symbols.len(), 64);
    let want = zadoff_chu(doc.t, doc.k, doc.root).unwrap();
    for (got, want) in doc.symbols.iter().zip(want.symbols()) {
        assert_eq!(got[0].to_bits(), want.re.to_bits());
        assert_eq!(got[1].to_bits(), want.im.to_bits());
    }

    let again = dir.path().join("training2.toml");
    let out = run(&["gen", "--out", again.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());

    let odd = dir.path().join("odd.toml");
    let out = run(&["gen", "--t", "63", "--out", odd.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
}

#[test]
fn bias_and_correlation_modes_emit_their_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let bias = write_config(
        dir.path(),
        r#"
mode = "bias"
trials = 48
l = 4
seed = 3
snr_db = [10.0]
[bias]
f_values = [[0.986, 0.2445], "1.0644+0.5451j"]
"#,
    );
    let csv = dir.path().join("bias.csv");
    let out = run(&[
        "sweep",
        "--config",
        bias.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let body = fs::read_to_string(&csv).unwrap();
    // 2 ratio values x 2 default estimators (quadratic and consistent)
    assert_eq!(body.lines().count(), 5);
    assert!(body.contains("consistent"));

    let corr = dir.path().join("corr.toml");
    fs::write(
        &corr,
        r#"
mode = "correlation"
trials = 32
seed = 4
snr_db = [10.0]
[correlation]
l_values = [1, 2]
"#,
    )
    .unwrap();
    let csv = dir.path().join("corr.csv");
    let out = run(&[
        "sweep",
        "--config",
        corr.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let body = fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().count(), 5);
    assert!(body.contains("slow_fading"));
    assert!(body.contains("iid"));
}
