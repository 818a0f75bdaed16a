use std::path::Path;
use std::process::{Command, Output};

use amp_core::rng::{Purpose, UniformStream};
use amp_core::trace_io::write_binned;
use amp_core::BinnedTrace;
use serde_json::Value;

const SOURCE: &str = r#"{
    "on_law": {"shape": 1.5, "scale": 1.0},
    "off_law": {"shape": 1.5, "scale": 1.0},
    "rate_mode": {"kind": "bounded_pareto", "law": {"shape": 1.2, "scale": 1.0, "cutoff": 10.0}},
    "start": "stationary"
}"#;

fn amptrace(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amptrace"))
        .args(args)
        .current_dir(dir)
        .env_remove("AMPTRACE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_is_reproducible_and_tracks_expected_load() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"source": {SOURCE}, "horizon": 1000000, "bin_width": 2.0, "seed": 5}}"#);
    write(dir.path(), "run.json", &cfg);
    for out in ["a", "b"] {
        let o = amptrace(&["generate", "--config", "run.json", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["events.csv", "trace.csv", "summary.json"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let trace = std::fs::read_to_string(dir.path().join("a/trace.csv")).unwrap();
    assert!(trace.starts_with("# delta=2 origin=0 n=500000 seed=5\nbin_index,value\n"));
    let events = std::fs::read_to_string(dir.path().join("a/events.csv")).unwrap();
    assert!(events.starts_with("t_start,duration,rate\n"));
    // horizon ≥ 10^5 mean cycles
    let s = json(&dir.path().join("a/summary.json"));
    assert!(s["load_relative_error"].as_f64().unwrap().abs() < 0.02, "{s}");

    let o = amptrace(&["generate", "--config", "run.json", "--out", "c", "--seed", "6"], dir.path());
    assert!(o.status.success());
    assert_ne!(std::fs::read(dir.path().join("a/trace.csv")).unwrap(), std::fs::read(dir.path().join("c/trace.csv")).unwrap());
}

#[test]
fn generate_then_analyze_recovers_the_model_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"source": {SOURCE}, "horizon": 1048576, "bin_width": 1.0, "seed": 7}}"#);
    write(dir.path(), "run.json", &cfg);
    assert!(amptrace(&["generate", "--config", "run.json", "--out", "g"], dir.path()).status.success());
    let o = amptrace(&["analyze", "g/events.csv", "--out", "a"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&dir.path().join("a/analysis.json"));
    let tails = &a["tail_indices"];
    assert!((tails["on_durations"].as_f64().unwrap() - 1.5).abs() < 0.1, "{tails}");
    assert!((tails["off_durations"].as_f64().unwrap() - 1.5).abs() < 0.1, "{tails}");
    let h = |m: &str| a["hurst"].as_array().unwrap().iter().find(|e| e["method"] == m).unwrap()["value"].as_f64().unwrap();
    let pooled = 0.5 * (h("rescaled-range") + h("aggregated-variance-corrected"));
    assert!((pooled - 0.75).abs() < 0.05, "H {pooled}");
    for (f, header) in [("periodogram.csv", "omega,power"), ("variance_time.csv", "ln_m,ln_variance"), ("rs.csv", "ln_n,ln_rs"), ("acf.csv", "lag,acf")] {
        let text = std::fs::read_to_string(dir.path().join("a").join(f)).unwrap();
        assert!(text.starts_with(header) && text.lines().count() > 5, "{f}");
    }

    // the binned file carries the same process
    let o = amptrace(&["analyze", "g/trace.csv", "--out", "b"], dir.path());
    assert!(o.status.success());
    let b = json(&dir.path().join("b/analysis.json"));
    assert!(b.get("tail_indices").is_none());
    let hb = |m: &str| b["hurst"].as_array().unwrap().iter().find(|e| e["method"] == m).unwrap()["value"].as_f64().unwrap();
    assert!((0.5 * (hb("rescaled-range") + hb("aggregated-variance-corrected")) - pooled).abs() < 0.01);
}

#[test]
fn white_noise_reads_as_short_memory() {
    let dir = tempfile::tempdir().unwrap();
    let mut u = UniformStream::new(3, 0, Purpose::Noise);
    let trace = BinnedTrace::new(1.0, 0.0, (0..1 << 18).map(|_| u.next_gaussian()).collect()).unwrap();
    write_binned(&trace, std::fs::File::create(dir.path().join("w.csv")).unwrap()).unwrap();
    let o = amptrace(&["analyze", "w.csv", "--out", "a"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&dir.path().join("a/analysis.json"));
    for e in a["hurst"].as_array().unwrap() {
        assert!((e["value"].as_f64().unwrap() - 0.5).abs() < 0.05, "{e}");
    }
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "unknown.json", r#"{"sourc": {}}"#);
    let o = amptrace(&["generate", "--config", "unknown.json"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));

    write(d, "wide.json", &format!(r#"{{"source": {SOURCE}, "horizon": 10, "bin_width": 20}}"#));
    assert_eq!(amptrace(&["generate", "--config", "wide.json"], d).status.code(), Some(1));

    write(d, "mode.json", &format!(r#"{{"mode": "report", "source": {SOURCE}, "horizon": 10, "bin_width": 1}}"#));
    assert_eq!(amptrace(&["generate", "--config", "mode.json"], d).status.code(), Some(1));

    let mut flat = String::from("# delta=1 origin=0 n=5000 seed=none\nbin_index,value\n");
    for i in 0..5000 {
        flat.push_str(&format!("{i},2\n"));
    }
    write(d, "flat.csv", &flat);
    let o = amptrace(&["analyze", "flat.csv", "--out", "x"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));

    write(d, "bad.csv", "bin_index,value\n0,1\n1,1\n2,zz\n");
    let o = amptrace(&["analyze", "bad.csv", "--out", "x"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    assert_eq!(amptrace(&["analyze", "missing.csv", "--out", "x"], d).status.code(), Some(2));
    assert_eq!(amptrace(&["no-such-command"], d).status.code(), Some(1));
    assert_eq!(amptrace(&["validate", "--tolerance-scale", "-1"], d).status.code(), Some(1));
}

const SMALL_VALIDATION: &str = r#"{"validation": {
    "time_domain": {"seeds": 1, "log2_bins": 14, "cases": [{"alpha_off": 1.5, "alpha_on": 1.5, "k_off": 1.0, "k_on": 1.0, "bin_width": 4.0, "n_sources": 16, "tolerance": 0.05}]},
    "snapshot": {"samples": 20000},
    "marginal": {"n_sources": [1, 2], "samples": 100000},
    "gaussianization": {"n_sources": [2, 32], "seeds": 2, "samples": 10000},
    "distributions": {"samples": 20000}
}}"#;

#[test]
fn zero_tolerance_fails_every_toleranced_check() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "v.json", SMALL_VALIDATION);
    let o = amptrace(&["validate", "--config", "v.json", "--out", "v", "--tolerance-scale", "0"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let r = json(&dir.path().join("v/validation.json"));
    assert_eq!(r["pass"], false);
    assert_eq!(r["tolerance_scale"], 0.0);
    let checks = r["checks"].as_array().unwrap();
    let mut seen: Vec<u64> = checks.iter().map(|c| c["criterion"].as_u64().unwrap()).collect();
    seen.dedup();
    assert_eq!(seen, (1..=8).collect::<Vec<_>>());
    for c in checks {
        assert!(!c["anchor"].as_str().unwrap().is_empty());
        if c["comparison"] == "within" {
            assert_eq!(c["pass"], false, "{c}");
        }
    }
}

#[test]
fn output_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"source": {SOURCE}}}"#);
    write(dir.path(), "r.json", &cfg);
    let o = Command::new(env!("CARGO_BIN_EXE_amptrace"))
        .args(["report", "--config", "r.json"])
        .current_dir(dir.path())
        .env("AMPTRACE_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("from_env/report.json"));
    assert_eq!(r["hurst"], 0.75);
    assert_eq!(r["atom_at_zero"], 0.5);
    assert!((r["asymptote"]["slope"].as_f64().unwrap() + 0.5).abs() < 0.05);
}
