use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const QUICK: &str = r#"
seed = 3
gp_window_s = 600
calibration_s = 600
horizon_s = 60

[calibration]
restarts = 2
max_evals = 4000
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pvdisagg"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--out-dir").arg(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = run(dir, args);
    assert_eq!(
        code(&o),
        0,
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn quick_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("quick.txt");
    fs::write(&p, format!("{QUICK}{extra}")).unwrap();
    p
}

fn simulated(dir: &Path) -> String {
    let cfg = quick_config(dir, "");
    ok(dir, &["--config", cfg.to_str().unwrap(), "simulate"]);
    cfg.to_str().unwrap().to_string()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    simulated(a.path());
    simulated(b.path());
    for f in ["sites.csv", "plant.txt", "irradiance.csv", "pv_true.csv", "masked_true.csv", "net.csv", "jumps.csv", "truth.txt"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    // rerunning into the same directory overwrites identically
    let before = fs::read(a.path().join("net.csv")).unwrap();
    simulated(a.path());
    assert_eq!(before, fs::read(a.path().join("net.csv")).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let a = TempDir::new().unwrap();
    let cfg = simulated(a.path());
    let net = fs::read(a.path().join("net.csv")).unwrap();
    ok(a.path(), &["--config", &cfg, "--seed", "4", "simulate"]);
    assert_ne!(net, fs::read(a.path().join("net.csv")).unwrap());
}

#[test]
fn csv_round_trip_is_byte_identical() {
    let d = TempDir::new().unwrap();
    simulated(d.path());
    for f in ["net.csv", "pv_true.csv"] {
        ok(d.path(), &["downsample", "--input", &p(d.path(), f), "--factor", "1"]);
        let stem = f.trim_end_matches(".csv");
        assert_eq!(
            fs::read(d.path().join(f)).unwrap(),
            fs::read(d.path().join(format!("{stem}_x1.csv"))).unwrap()
        );
    }
}

#[test]
fn downsample_averages_blocks() {
    let d = TempDir::new().unwrap();
    let f = d.path().join("s.csv");
    fs::write(
        &f,
        "timestamp,power_w\n2020-01-01T00:00:00Z,1\n2020-01-01T00:00:01Z,3\n2020-01-01T00:00:02Z,5\n2020-01-01T00:00:03Z,7\n",
    )
    .unwrap();
    ok(d.path(), &["downsample", "--input", f.to_str().unwrap(), "--factor", "2"]);
    assert_eq!(
        fs::read_to_string(d.path().join("s_x2.csv")).unwrap(),
        "timestamp,power_w\n2020-01-01T00:00:00Z,2\n2020-01-01T00:00:02Z,6\n"
    );
}

#[test]
fn fit_predict_evaluate_chain() {
    let d = TempDir::new().unwrap();
    let cfg = simulated(d.path());
    let out = ok(
        d.path(),
        &["--config", &cfg, "fit-gp", "--irradiance", &p(d.path(), "irradiance.csv"), "--sites", &p(d.path(), "sites.csv")],
    );
    assert!(out.contains("residual"));
    let kernel = fs::read_to_string(d.path().join("kernel.txt")).unwrap();
    assert!(kernel.contains("residual = "));

    ok(
        d.path(),
        &[
            "--config", &cfg, "predict-pv",
            "--kernel", &p(d.path(), "kernel.txt"),
            "--irradiance", &p(d.path(), "irradiance.csv"),
            "--sites", &p(d.path(), "sites.csv"),
            "--plant", &p(d.path(), "plant.txt"),
        ],
    );
    let out = ok(d.path(), &["evaluate", "--pred", &p(d.path(), "pv_pred.csv"), "--truth", &p(d.path(), "pv_true.csv")]);
    assert!(out.starts_with("rmse "), "{out}");

    // every site observed: prediction is the direct computation
    let all: Vec<String> = fs::read_to_string(d.path().join("sites.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    ok(
        d.path(),
        &[
            "--config", &cfg, "predict-pv",
            "--kernel", &p(d.path(), "kernel.txt"),
            "--irradiance", &p(d.path(), "irradiance.csv"),
            "--observed", &all.join(","),
        ],
    );
    assert_eq!(
        fs::read(d.path().join("pv_pred.csv")).unwrap(),
        fs::read(d.path().join("pv_true.csv")).unwrap()
    );
}

#[test]
fn evaluate_examples() {
    let d = TempDir::new().unwrap();
    let t = d.path().join("t.csv");
    let q = d.path().join("q.csv");
    fs::write(&t, "timestamp,power_w\n2020-01-01T00:00:00Z,1\n2020-01-01T00:00:01Z,2\n").unwrap();
    fs::write(&q, "timestamp,power_w\n2020-01-01T00:00:00Z,11\n2020-01-01T00:00:01Z,12\n").unwrap();
    let (ts, qs) = (t.to_str().unwrap(), q.to_str().unwrap());
    let out = ok(d.path(), &["evaluate", "--pred", ts, "--truth", ts]);
    assert!(out.starts_with("rmse 0.0000 mae 0.0000"), "{out}");
    let out = ok(d.path(), &["evaluate", "--pred", qs, "--truth", ts]);
    assert!(out.contains("mae 10.0000"), "{out}");

    fs::write(&q, "timestamp,power_w\n2020-01-01T00:00:00.5Z,11\n2020-01-01T00:00:01.5Z,12\n").unwrap();
    assert_eq!(code(&run(d.path(), &["evaluate", "--pred", qs, "--truth", ts])), 2);
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let missing = p(d.path(), "nope.csv");
    assert_eq!(code(&run(d.path(), &["estimate-ou", "--load", &missing])), 2);
    assert_eq!(code(&run(d.path(), &["no-such-command"])), 2);

    let bad = d.path().join("bad.txt");
    fs::write(&bad, "seed = 1\nbogus = 2\n").unwrap();
    assert_eq!(code(&run(d.path(), &["--config", bad.to_str().unwrap(), "simulate"])), 2);

    let bad_csv = d.path().join("bad.csv");
    fs::write(&bad_csv, "timestamp,power_w\n2020-01-01T00:00:00Z,abc\n").unwrap();
    let o = run(d.path(), &["estimate-ou", "--load", bad_csv.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv:2:"));

    // a constant series has no residual spread to estimate from
    let flat = d.path().join("flat.csv");
    let mut text = String::from("timestamp,power_w\n");
    for i in 0..100 {
        text.push_str(&format!("2020-01-01T00:{:02}:{:02}Z,5\n", i / 60, i % 60));
    }
    fs::write(&flat, text).unwrap();
    assert_eq!(code(&run(d.path(), &["estimate-ou", "--load", flat.to_str().unwrap()])), 3);
}

#[test]
fn night_window_is_invalid_input() {
    let d = TempDir::new().unwrap();
    let ir = d.path().join("ir.csv");
    let mut text = String::from("timestamp,site_id,ghi_wm2,ghi_clear_wm2\n");
    for t in 0..5 {
        for s in ["DH1", "DH2", "DH3"] {
            text.push_str(&format!("2020-01-01T00:00:0{t}Z,{s},0,5\n"));
        }
    }
    fs::write(&ir, text).unwrap();
    let o = run(d.path(), &["fit-gp", "--irradiance", ir.to_str().unwrap(), "--window-s", "5"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn disaggregate_writes_report_and_envelope() {
    let d = TempDir::new().unwrap();
    let cfg = simulated(d.path());
    let out = ok(
        d.path(),
        &[
            "--config", &cfg, "disaggregate",
            "--net", &p(d.path(), "net.csv"),
            "--pv", &p(d.path(), "pv_true.csv"),
            "--truth", &p(d.path(), "masked_true.csv"),
        ],
    );
    let c: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("coverage "))
        .expect("coverage line")
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&c));
    let env = fs::read_to_string(d.path().join("envelope.csv")).unwrap();
    assert_eq!(env.lines().count(), 61);

    let out = ok(
        d.path(),
        &[
            "evaluate",
            "--envelope", &p(d.path(), "envelope.csv"),
            "--truth", &p(d.path(), "masked_true.csv"),
            "--reference", &p(d.path(), "truth.txt"),
            "--report", &p(d.path(), "report.txt"),
        ],
    );
    let header = out.lines().find(|l| l.contains("gamma")).unwrap();
    let cols: Vec<&str> = header.split_whitespace().collect();
    assert_eq!(cols, ["mu", "gamma", "mu1", "sigma1", "k", "theta", "lambda"]);
    assert!(out.contains("|ref-rough|") && out.contains("|ref-opt|"));
}

#[test]
fn zero_pv_reduces_to_estimation() {
    let d = TempDir::new().unwrap();
    let cfg = simulated(d.path());
    let masked = fs::read_to_string(d.path().join("masked_true.csv")).unwrap();
    let zeros: String = masked
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                "timestamp,p_pv_w\n".to_string()
            } else {
                format!("{},0\n", l.split(',').next().unwrap())
            }
        })
        .collect();
    fs::write(d.path().join("zero_pv.csv"), zeros).unwrap();
    let window: String = masked.lines().take(601).map(|l| format!("{l}\n")).collect();
    fs::write(d.path().join("window.csv"), window).unwrap();

    ok(d.path(), &["estimate-ou", "--load", &p(d.path(), "window.csv")]);
    ok(
        d.path(),
        &[
            "--config", &cfg, "disaggregate",
            "--net", &p(d.path(), "masked_true.csv"),
            "--pv", &p(d.path(), "zero_pv.csv"),
        ],
    );
    let report = fs::read_to_string(d.path().join("report.txt")).unwrap();
    let rough = fs::read_to_string(d.path().join("theta_rough.txt")).unwrap();
    let section: String = report
        .split("[rough]\n")
        .nth(1)
        .unwrap()
        .split("\n[")
        .next()
        .unwrap()
        .trim()
        .to_string();
    assert_eq!(section, rough.trim());
}

#[test]
fn exhausted_budget_exits_four() {
    let d = TempDir::new().unwrap();
    let cfg = quick_config(d.path(), "");
    ok(d.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    let tight = d.path().join("tight.txt");
    fs::write(&tight, QUICK.replace("max_evals = 4000", "max_evals = 5")).unwrap();
    let o = run(
        d.path(),
        &[
            "--config", tight.to_str().unwrap(), "disaggregate",
            "--net", &p(d.path(), "net.csv"),
            "--pv", &p(d.path(), "pv_true.csv"),
        ],
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    // outputs are still written
    assert!(d.path().join("report.txt").exists());
}

#[test]
fn disaggregate_identical_across_thread_counts() {
    let d = TempDir::new().unwrap();
    let cfg = simulated(d.path());
    fs::write(
        d.path().join("k.txt"),
        "alpha = 0.0108\nbeta = 0.0001\ntheta_x = 61.6522\ntheta_y = 74.081\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let o = d.path().join(format!("t{threads}-{}", outputs.len()));
        let r = bin()
            .env("RAYON_NUM_THREADS", threads)
            .arg("--out-dir")
            .arg(&o)
            .args([
                "--config", &cfg, "disaggregate",
                "--net", &p(d.path(), "net.csv"),
                "--irradiance", &p(d.path(), "irradiance.csv"),
                "--kernel", &p(d.path(), "k.txt"),
            ])
            .output()
            .unwrap();
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        outputs.push((
            fs::read(o.join("report.txt")).unwrap(),
            fs::read(o.join("envelope.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn simulate_then_disaggregate_meets_bands() {
    let d = TempDir::new().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/synthetic.txt");
    ok(d.path(), &["--config", cfg, "simulate"]);
    ok(d.path(), &["--config", cfg, "fit-gp", "--irradiance", &p(d.path(), "irradiance.csv")]);
    let out = ok(
        d.path(),
        &[
            "--config", cfg, "disaggregate",
            "--net", &p(d.path(), "net.csv"),
            "--irradiance", &p(d.path(), "irradiance.csv"),
            "--kernel", &p(d.path(), "kernel.txt"),
            "--truth", &p(d.path(), "masked_true.csv"),
        ],
    );
    let report = fs::read_to_string(d.path().join("report.txt")).unwrap();
    let table: toml::Table = report.parse().unwrap();
    let cal = table["calibrated"].as_table().unwrap();
    let get = |k: &str| cal[k].as_float().unwrap();
    assert!((get("mu") - 4e5).abs() / 4e5 < 0.002, "{out}");
    assert!((get("sigma1") - 200.0).abs() / 200.0 < 0.25, "{out}");
    assert!((0.005..=0.02).contains(&get("gamma")), "{out}");
    let c = table["coverage"].as_float().unwrap();
    assert!((0.0..=1.0).contains(&c));
}
