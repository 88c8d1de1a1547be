use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use covcal::io::{read_bank_csv, KeyValues};
use covcal::models::{exact_coverage, TemperedNormal};
use covcal::regression::fit;
use covcal::{run_regression_bank, Algorithm, CalibrationConfig};
use tempfile::TempDir;

fn covcal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covcal"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn covcal")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn summary(dir: &Path) -> KeyValues {
    KeyValues::parse(&fs::read_to_string(dir.join("summary.txt")).unwrap()).unwrap()
}

fn num(kv: &KeyValues, key: &str) -> f64 {
    kv.get(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

fn lattice(dir: &Path) -> PathBuf {
    let p = dir.join("lattice.txt");
    fs::write(&p, "0110\n0111\n0011\n1001\n").unwrap();
    p
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn regression_at_exact_approximation_recovers_level() {
    let tmp = TempDir::new().unwrap();
    let o = covcal(
        tmp.path(),
        &[
            "calibrate",
            "--model",
            "tempered-normal",
            "--v",
            "1",
            "--algorithm",
            "regress",
            "--alpha",
            "0.9",
            "--m",
            "10000",
            "--y",
            "0",
            "--seed",
            "1",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    let kv = summary(&run);
    assert!((num(&kv, "c_hat") - 0.9).abs() <= 0.02);
    for key in ["sigma_hat", "ess", "m_used", "seed", "algorithm"] {
        assert!(kv.get(key).is_some(), "{key}");
    }
    assert_eq!(kv.get("algorithm"), Some("regress"));
    let bank = read_bank_csv(
        fs::File::open(run.join("bank.csv"))
            .map(std::io::BufReader::new)
            .unwrap(),
        Algorithm::Regression,
    )
    .unwrap();
    assert_eq!(bank.len(), 10_000);
    assert!(run.join("fit.txt").exists());
}

#[test]
fn zero_replicates_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = covcal(tmp.path(), &["calibrate", "--m", "0", "--y", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_flag_is_rejected() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&covcal(tmp.path(), &["calibrate", "--bogus", "1"])), 2);
    assert_eq!(code(&covcal(tmp.path(), &["figure", "fig9"])), 2);
}

#[test]
fn importance_and_curve_need_observed_data() {
    let tmp = TempDir::new().unwrap();
    for alg in ["is", "curve"] {
        assert_eq!(
            code(&covcal(tmp.path(), &["calibrate", "--algorithm", alg, "--m", "10"])),
            2
        );
        let o = covcal(
            tmp.path(),
            &["calibrate", "--model", "ising", "--algorithm", alg, "--m", "10"],
        );
        assert_eq!(code(&o), 2);
    }
}

#[test]
fn window_timeout_is_an_estimator_error_with_partial_bank() {
    let tmp = TempDir::new().unwrap();
    let o = covcal(
        tmp.path(),
        &[
            "calibrate",
            "--algorithm",
            "is",
            "--y",
            "3",
            "--rho",
            "0.001",
            "--m",
            "50",
            "--proposal-cap",
            "20",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&o), 3);
    let run = tmp.path().join("run");
    let text = fs::read_to_string(run.join("bank.csv")).unwrap();
    assert!(text.lines().count() - 1 < 50);
    let manifest = KeyValues::parse(&fs::read_to_string(run.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest.get("exit_code"), Some("3"));
}

#[test]
fn ising_importance_run_writes_files_and_agrees_with_oracle() {
    let tmp = TempDir::new().unwrap();
    let data = lattice(tmp.path());
    let data = data.to_str().unwrap();
    let common = [
        "--model",
        "ising",
        "--ising-n",
        "4",
        "--ising-data",
        data,
        "--alpha",
        "0.95",
        "--m",
        "1000",
        "--sweeps",
        "500",
    ];
    let o = covcal(
        tmp.path(),
        &[
            &[
                "calibrate",
                "--algorithm",
                "is",
                "--rho",
                "0.5",
                "--distance",
                "ks",
                "--out",
                "is",
            ][..],
            &common,
        ]
        .concat(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let is = summary(&tmp.path().join("is"));
    assert!(num(&is, "ess") > 0.0);
    for f in ["bank.csv", "summary.txt", "manifest.txt"] {
        assert!(tmp.path().join("is").join(f).exists(), "{f}");
    }

    let o = covcal(
        tmp.path(),
        &[&["calibrate", "--algorithm", "oracle", "--out", "oracle"][..], &common].concat(),
    );
    assert_eq!(code(&o), 0);
    let oracle = summary(&tmp.path().join("oracle"));
    let z = (num(&is, "c_hat") - num(&oracle, "c_hat")).abs() / num(&is, "sigma_hat").hypot(num(&oracle, "sigma_hat"));
    assert!(z <= 3.0, "z = {z}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("run.cfg"),
        "# test\nalpha = 0.5\nm = 40\ny = 0.3\nseed = 9\nout = from-config\n",
    )
    .unwrap();
    let o = covcal(
        tmp.path(),
        &["calibrate", "--config", "run.cfg", "--algorithm", "oracle", "--m", "25"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("from-config");
    let kv = summary(&run);
    assert_eq!(kv.get("m_used"), Some("25"));
    assert_eq!(kv.get("seed"), Some("9"));
    let manifest = KeyValues::parse(&fs::read_to_string(run.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest.get("alpha").unwrap().parse::<f64>().unwrap(), 0.5);
    assert_eq!(manifest.get("config"), Some("run.cfg"));

    fs::write(tmp.path().join("bad.cfg"), "not a pair\n").unwrap();
    assert_eq!(code(&covcal(tmp.path(), &["calibrate", "--config", "bad.cfg"])), 2);
    assert_eq!(code(&covcal(tmp.path(), &["calibrate", "--config", "missing.cfg"])), 2);
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "calibrate",
        "--algorithm",
        "is",
        "--v",
        "0.5",
        "--y",
        "-1",
        "--rho",
        "0.5",
        "--m",
        "300",
        "--seed",
        "4",
        "--out",
        "a",
    ];
    assert_eq!(code(&covcal(tmp.path(), &args)), 0);
    let manifest = KeyValues::parse(&fs::read_to_string(tmp.path().join("a/manifest.txt")).unwrap()).unwrap();
    for key in [
        "version",
        "argv",
        "command",
        "algorithm",
        "model",
        "seed",
        "alpha",
        "m",
        "rho",
        "files",
        "exit_code",
    ] {
        assert!(manifest.get(key).is_some(), "{key}");
    }
    assert_eq!(manifest.get("exit_code"), Some("0"));

    // Re-run from the recorded argv into another directory.
    let argv: Vec<String> = manifest
        .get("argv")
        .unwrap()
        .split(' ')
        .skip(1)
        .map(String::from)
        .collect();
    let mut again: Vec<&str> = argv.iter().map(String::as_str).collect();
    *again.last_mut().unwrap() = "b";
    assert_eq!(code(&covcal(tmp.path(), &again)), 0);
    for f in ["bank.csv", "summary.txt"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let tmp = TempDir::new().unwrap();
    let data = lattice(tmp.path());
    let mut banks = Vec::new();
    for w in ["1", "3", "8"] {
        let out = format!("w{w}");
        let o = covcal(
            tmp.path(),
            &[
                "calibrate",
                "--algorithm",
                "curve",
                "--model",
                "ising",
                "--ising-data",
                data.to_str().unwrap(),
                "--sweeps",
                "100",
                "--m",
                "200",
                "--distance",
                "ks",
                "--rho",
                "0.1",
                "--set-source",
                "samples",
                "--workers",
                w,
                "--out",
                &out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let dir = tmp.path().join(&out);
        banks.push((
            fs::read(dir.join("bank.csv")).unwrap(),
            fs::read(dir.join("curve.csv")).unwrap(),
        ));
    }
    assert!(banks.windows(2).all(|p| p[0] == p[1]));
}

#[test]
fn sweep_window_sizes_shrink_with_radius() {
    let tmp = TempDir::new().unwrap();
    let o = covcal(
        tmp.path(),
        &[
            "sweep",
            "--v",
            "0.5",
            "--y",
            "1",
            "--m",
            "500",
            "--rho-grid",
            "inf,1,0.5,0.2",
            "--out",
            "s",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let used = csv_column(&tmp.path().join("s/sweep.csv"), "m_used");
    assert_eq!(used.len(), 4);
    assert_eq!(used[0], 500.0);
    assert!(used.windows(2).all(|w| w[0] >= w[1]));
    let o = covcal(tmp.path(), &["sweep", "--y", "1", "--rho-grid", "0.2,1", "--out", "t"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fig1_top_left_matches_library_and_closed_form() {
    let tmp = TempDir::new().unwrap();
    let o = covcal(tmp.path(), &["figure", "fig1-topleft", "--m", "2000", "--out", "f"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let path = tmp.path().join("f/fig1-topleft.csv");
    let (v, y, b, c) = (
        csv_column(&path, "v"),
        csv_column(&path, "y"),
        csv_column(&path, "b_true"),
        csv_column(&path, "c_hat"),
    );
    assert_eq!(v.len(), 75);
    let cfg = CalibrationConfig {
        replicates: 2000,
        ..CalibrationConfig::default()
    };
    for (k, vv) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let bank = run_regression_bank(&TemperedNormal::new(vv).unwrap(), &cfg).unwrap();
        let f = fit(&bank.covered(), &bank.summaries(), 10).unwrap();
        for i in 25 * k..25 * (k + 1) {
            assert_eq!(v[i], vv);
            assert_eq!(b[i], exact_coverage(y[i], 0.9, vv));
            assert_eq!(c[i], f.predict(&[y[i]]).probability);
        }
    }
}

#[test]
fn fig1_bottom_reports_windows() {
    let tmp = TempDir::new().unwrap();
    let o = covcal(
        tmp.path(),
        &[
            "figure",
            "fig1-bottom",
            "--vs",
            "0",
            "--rhos",
            "1,0.3",
            "--points",
            "5",
            "--m",
            "300",
            "--out",
            "f",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let used = csv_column(&tmp.path().join("f/fig1-bottom.csv"), "m_used");
    assert_eq!(used, vec![300.0; 10]);
}

#[test]
fn fig3_right_curve_is_nondecreasing() {
    let tmp = TempDir::new().unwrap();
    let o = covcal(
        tmp.path(),
        &[
            "figure",
            "fig3-right",
            "--model",
            "ising",
            "--ising-n",
            "4",
            "--m",
            "500",
            "--sweeps",
            "300",
            "--rho",
            "0.1",
            "--distance",
            "ks",
            "--out",
            "f",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = csv_column(&tmp.path().join("f/fig3-right.csv"), "c_hat");
    assert_eq!(c.len(), 512);
    assert!(c.windows(2).all(|w| w[0] <= w[1]));
    assert!(tmp.path().join("f/observed.txt").exists());
    assert!(summary(&tmp.path().join("f")).get("alpha_adjusted").is_some());
}

#[test]
fn fig3_left_binned_coverage_tracks_fit() {
    // 500-replicate bins: with 50 the per-bin binomial s.e. alone is 0.03-0.07.
    let tmp = TempDir::new().unwrap();
    let o = covcal(
        tmp.path(),
        &[
            "figure",
            "fig3-left",
            "--model",
            "ising",
            "--ising-n",
            "4",
            "--alpha",
            "0.95",
            "--m",
            "5000",
            "--bin",
            "500",
            "--out",
            "f",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let kv = summary(&tmp.path().join("f"));
    assert!(num(&kv, "max_gap") <= 0.05, "max gap {}", num(&kv, "max_gap"));
    let counts = csv_column(&tmp.path().join("f/fig3-left-bins.csv"), "count");
    assert_eq!(counts.iter().sum::<f64>(), 5000.0);
}
