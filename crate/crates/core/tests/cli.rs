use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tilekmc");

const SMALL: &str = r#"
schema = "tilekmc-config/1"

[simulation]
lattice_side = 24
seed = 3

[sweep]
id = "tiny"
substrate_energy = [0.5, 1.0]
e11 = 0.5
e22 = 0.5
e12 = [0.1, 0.5, 1.0]
"#;

fn tilekmc(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("TILEKMC_OUT")
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("small.toml"), SMALL).unwrap();
    tmp
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tilekmc(&["--help"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["simulate", "sweep", "analyze", "cluster", "report"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert_eq!(tilekmc(&["--version"], tmp.path()).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = setup();
    let d = tmp.path();
    assert_eq!(tilekmc(&["simulate", "--config", "missing.toml"], d).status.code(), Some(1));
    assert_eq!(tilekmc(&["frobnicate"], d).status.code(), Some(1));
    assert_eq!(tilekmc(&["analyze", "--manifest", "nope.jsonl", "--mode", "ratio"], d).status.code(), Some(1));
    fs::write(d.join("bad.toml"), "schema = \"tilekmc-config/9\"\n").unwrap();
    assert_eq!(tilekmc(&["simulate", "--config", "bad.toml"], d).status.code(), Some(1));
    assert_eq!(tilekmc(&["sweep", "--config", "small.toml", "--jobs", "0"], d).status.code(), Some(1));
}

#[test]
fn simulate_is_reproducible_and_honours_out_env() {
    let tmp = setup();
    let d = tmp.path();
    let a = tilekmc(&["simulate", "--config", "small.toml", "--out", "a", "--event-log", "events.csv"], d);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let stdout = String::from_utf8_lossy(&a.stdout);
    assert!(stdout.contains("seed = 3"));
    assert!(stdout.contains("lattice_side = 24"));
    let b = Command::new(BIN)
        .args(["simulate", "--config", "small.toml"])
        .current_dir(d)
        .env("TILEKMC_OUT", d.join("b"))
        .output()
        .unwrap();
    assert_eq!(b.status.code(), Some(0));
    for f in ["run_seed3.png", "run_seed3.raw", "run_seed3.json"] {
        assert!(d.join("a").join(f).is_file(), "{f}");
    }
    assert_eq!(
        fs::read(d.join("a/run_seed3.png")).unwrap(),
        fs::read(d.join("b/run_seed3.png")).unwrap()
    );
    let log = fs::read_to_string(d.join("events.csv")).unwrap();
    assert!(log.lines().count() > 1);

    let c = tilekmc(&["simulate", "--config", "small.toml", "--seed", "4", "--out", "c"], d);
    assert_eq!(c.status.code(), Some(0));
    assert_ne!(
        fs::read(d.join("a/run_seed3.png")).unwrap(),
        fs::read(d.join("c/run_seed4.png")).unwrap()
    );
}

#[test]
fn sweep_analyze_cluster_report() {
    let tmp = setup();
    let d = tmp.path();
    let s = tilekmc(&["sweep", "--config", "small.toml", "--out", "runs", "--jobs", "2"], d);
    assert_eq!(s.status.code(), Some(0), "{}", String::from_utf8_lossy(&s.stderr));
    let manifest = "runs/tiny/manifest.jsonl";
    assert_eq!(fs::read_to_string(d.join(manifest)).unwrap().lines().count(), 6);

    let again = tilekmc(&["sweep", "--config", "small.toml", "--out", "runs"], d);
    assert_ne!(again.status.code(), Some(0));
    let resumed = tilekmc(&["sweep", "--config", "small.toml", "--out", "runs", "--resume"], d);
    assert_eq!(resumed.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&resumed.stdout).contains("0 ran, 6 skipped"));

    let modes: [(&str, &[&str]); 5] = [
        ("ratio", &["sorted_by_ratio.csv", "sorted_by_ratio.png"]),
        ("ncd", &["ncd_matrix.csv", "ncd_consecutive.csv"]),
        ("correlation", &["dist_vs_c.csv", "correlation.txt"]),
        ("transition", &["transition.txt"]),
        ("ortho", &["ortho_E_12.csv"]),
    ];
    for (mode, files) in modes {
        let out = tilekmc(&["analyze", "--manifest", manifest, "--mode", mode], d);
        assert_eq!(out.status.code(), Some(0), "{mode}: {}", String::from_utf8_lossy(&out.stderr));
        for f in files {
            assert!(d.join("runs/tiny/analysis").join(f).is_file(), "{f}");
        }
    }
    let png_ncd = tilekmc(
        &["analyze", "--manifest", manifest, "--mode", "ncd", "--ncd-input", "png", "--out", "png_ncd"],
        d,
    );
    assert_eq!(png_ncd.status.code(), Some(0));

    let bad_k = tilekmc(&["cluster", "--manifest", manifest, "--metric", "ratio", "--k", "7"], d);
    assert_eq!(bad_k.status.code(), Some(1));
    let cl = tilekmc(&["cluster", "--manifest", manifest, "--metric", "ratio", "--k", "3", "--out", "c3"], d);
    assert_eq!(cl.status.code(), Some(0), "{}", String::from_utf8_lossy(&cl.stderr));
    for f in ["dendrogram.nwk", "assignments.csv", "clusters.csv", "representatives.jsonl", "representatives.png"] {
        assert!(d.join("c3").join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_to_string(d.join("c3/representatives.jsonl")).unwrap().lines().count(), 3);

    // the representatives file is itself a manifest
    let nested = tilekmc(
        &["cluster", "--manifest", "c3/representatives.jsonl", "--metric", "ncd", "--k", "2", "--out", "c2"],
        d,
    );
    assert_eq!(nested.status.code(), Some(0), "{}", String::from_utf8_lossy(&nested.stderr));
    assert_eq!(fs::read_to_string(d.join("c2/assignments.csv")).unwrap().lines().count(), 4);

    let rep = tilekmc(&["report", "--manifest", manifest], d);
    assert_eq!(rep.status.code(), Some(0));
    for f in ["sorted_by_ratio.png", "correlation.txt", "transition.txt", "ortho_E_s.csv", "ortho_E_11.csv"] {
        assert!(d.join("runs/tiny/report").join(f).is_file(), "{f}");
    }
}
