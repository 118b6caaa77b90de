use std::fs;
use std::path::Path;
use std::process::Command;

fn goldfish(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_goldfish")).args(args).env("GOLDFISH_THREADS", "2").output().expect("binary runs");
    assert!(out.status.success(), "goldfish {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn optimal_writes_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = goldfish(&["optimal", "--graphs", "2", "--nodes", "30", "--epochs", "8", "--rounds", "10", "--out", out]);
    assert!(stdout.contains("2 graphs"));
    for f in ["summary.json", "histogram.csv", "histogram_far.csv", "graphs.csv", "lambda.csv", "decisions.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    assert_eq!(header(&dir.path().join("histogram.csv")), "bucket,count");
    assert_eq!(header(&dir.path().join("decisions.csv")), "seed,epoch,node,exploit1,exploit2,exploit3,explore");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_graphs"], 2);
    let total: u64 = fs::read_to_string(dir.path().join("histogram.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 2);
}

#[test]
fn compare_writes_per_strategy_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    goldfish(&[
        "compare", "--nodes", "30", "--publishers", "10", "--adapters", "4", "--epochs", "6", "--rounds", "10", "--seeds", "1,2",
        "--dump-completions", "--out", out,
    ]);
    for s in ["goldfish", "perigee"] {
        let wasted = dir.path().join(s).join("wasted.csv");
        assert_eq!(header(&wasted), "seed,epoch,node,wasted_ms");
        assert_eq!(fs::read_to_string(&wasted).unwrap().lines().count(), 1 + 2 * 6 * 4);
        assert!(dir.path().join(s).join("decisions.csv").exists());
    }
    assert!(!fs::read_to_string(dir.path().join("goldfish").join("completions.jsonl")).unwrap().is_empty());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["paired"], true);
    assert_eq!(summary["per_epoch"].as_array().unwrap().len(), 6);
}

#[test]
fn compare_on_measured_latencies() {
    let dir = tempfile::tempdir().unwrap();
    let cities = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/cities150.csv");
    goldfish(&[
        "compare", "--topology", "measured", "--latency-file", cities, "--nodes", "40", "--publishers", "10", "--adapters", "4",
        "--epochs", "4", "--rounds", "10", "--seeds", "3", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn measured_topology_requires_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_goldfish"))
        .args(["compare", "--topology", "measured", "--epochs", "2", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn identical_runs_write_identical_summaries() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        goldfish(&["compare", "--nodes", "30", "--publishers", "10", "--adapters", "4", "--epochs", "6", "--rounds", "10", "--seeds", "4", "--out", dir.path().to_str().unwrap()]);
        fs::read(dir.path().join("summary.json")).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn complete_prints_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.txt");
    fs::write(&file, "# peers=1,2,3\nt=0 t=5 t=9\nt=2 t=7 *\nt=1 t=6 t=10\n").unwrap();
    let stdout = goldfish(&["complete", "--matrix-file", file.to_str().unwrap(), "--reg-weight", "1e-6"]);
    let dump: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let estimate = dump["estimates"][0].as_f64().unwrap() - dump["offsets"][1].as_f64().unwrap();
    assert!((estimate - 11.0).abs() < 1e-2, "raw estimate {estimate}");
}
