use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sgphase(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgphase"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("SGPHASE_CACHE_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn coarse_writes_csv_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgphase(dir.path(), &["coarse", "--state", "coherent", "--alpha", "1", "--mode", "cosine", "--epsilon", "0.4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("coarse_cosine.csv")).unwrap();
    let mut lines = csv.lines();
    let config = lines.next().unwrap();
    assert!(config.starts_with("# config: {"));
    assert!(config.contains("\"epsilon\":0.4") && config.contains("\"kind\":\"coherent\""));
    assert_eq!(lines.next(), Some("phase,p,std_error"));
    let values: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 101);
    let integral: f64 = values.iter().sum::<f64>() - 0.5 * (values[0] + values[100]);
    assert!((integral * std::f64::consts::PI / 100.0 - 1.0).abs() < 1e-12);
    assert!(dir.path().join("exact_cosine.csv").exists());
}

#[test]
fn simulate_then_sample_is_worker_independent() {
    let run = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        let common = ["--workers", workers, "--no-cache"];
        let sim = ["simulate", "--state", "coherent", "--alpha", "0.8", "--phases", "6", "--events", "500", "--seed", "3"];
        assert!(sgphase(p, &[&sim[..], &common[..]].concat()).status.success());
        let o = sgphase(p, &[&["sample", "--epsilon", "0.8", "--points", "41"][..], &common[..]].concat());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(p)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&f).unwrap()))
            .collect();
        files.sort();
        files
    };
    let a = run("1");
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "comparison_cosine.csv",
            "comparison_sine.csv",
            "dataset.jsonl",
            "sample_cosine.csv",
            "sample_cosine.json",
            "sample_sine.csv",
            "sample_sine.json"
        ]
    );
    assert_eq!(a, run("2"));
    let cmp = String::from_utf8(a[0].1.clone()).unwrap();
    assert!(cmp.contains("phase,sampled,std_error,coarse,exact"));
}

#[test]
fn kernel_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let args = ["kernel", "--phi-cap", "0.3927", "1.0", "--epsilon", "0.4", "--x-points", "21", "--phi-points", "5"];
    let run = |extra: &[&str], env: bool| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sgphase"));
        c.args(args).args(extra).arg("--out-dir").arg(dir.path());
        if env {
            c.env("SGPHASE_CACHE_DIR", &cache);
        } else {
            c.env_remove("SGPHASE_CACHE_DIR");
        }
        c.output().unwrap()
    };
    assert!(stdout(&run(&[], true)).contains("built"));
    let first = fs::read(dir.path().join("kernel_1.csv")).unwrap();
    assert!(stdout(&run(&[], true)).contains("from cache"));
    assert!(stdout(&run(&["--no-cache"], true)).contains("built"));
    assert!(stdout(&run(&["--cache-dir", cache.to_str().unwrap()], false)).contains("from cache"));
    assert_eq!(fs::read(dir.path().join("kernel_1.csv")).unwrap(), first);
    let csv = String::from_utf8(first).unwrap();
    assert!(csv.lines().any(|l| l == "x,phi,K"));
    assert!(csv.contains("# phi_cap: 1"));
}

#[test]
fn plot_script_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sgphase(dir.path(), &["exact", "--mode", "sine"]).status.success());
    assert!(!dir.path().join("plot.py").exists());
    assert!(sgphase(dir.path(), &["exact", "--mode", "sine", "--plot-script"]).status.success());
    assert!(fs::read_to_string(dir.path().join("plot.py")).unwrap().contains("matplotlib"));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let code = |o: Output| o.status.code().unwrap();
    assert_eq!(code(sgphase(p, &["coarse", "--epsilon", "-1"])), 2);
    assert_eq!(code(sgphase(p, &["exact", "--state", "coherent", "--alpha", "1", "--truncation", "3"])), 2);
    assert_eq!(code(sgphase(p, &["sample", "--epsilon", "0.4"])), 2);
    assert_eq!(code(sgphase(p, &["frobnicate"])), 2);

    let file = p.join("not-a-dir");
    fs::write(&file, "").unwrap();
    assert_eq!(code(sgphase(&file, &["exact"])), 3);

    let bad = p.join("bad.jsonl");
    fs::write(&bad, "not json\n").unwrap();
    let o = sgphase(p, &["sample", "--epsilon", "0.4", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(o), 5);
}
