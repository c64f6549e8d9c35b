//! Two-stage grouping of a sweep: coarse clusters by compression ratio, one
//! representative from each, then an NCD split of the representatives.
//!
//! ```text
//! cargo run --release --example clustering_pipeline -- [manifest.jsonl]
//! ```
//! Without an argument a 6000-point grid is too slow, so a 64x64 grid of
//! 150 points is run into a temporary directory first.

use std::path::PathBuf;

use tilekmc::clustering::{groups, hcluster, ncd_group, pick_representatives, DistanceMatrix, Linkage};
use tilekmc::complexity::ncd_matrix;
use tilekmc::config::ConfigFile;
use tilekmc::sweep::{execute, load_rasters, read_manifest, ExecuteOptions, RunRecord, MANIFEST};

const GRID: &str = r#"
schema = "tilekmc-config/1"
[simulation]
lattice_side = 64
[sweep]
id = "clustering"
substrate_energy = [0.5, 1.0]
e11 = [0.1, 0.4, 0.7, 1.0]
e22 = [0.1, 1.0]
e12 = { start = 0.1, stop = 1.0, step = 0.1 }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let (dir, records): (PathBuf, Vec<RunRecord>) = match std::env::args().nth(1) {
        Some(path) => {
            let path = PathBuf::from(path);
            let dir = path.parent().map(PathBuf::from).unwrap_or_default();
            (dir, read_manifest(&path, false)?)
        }
        None => {
            let out = execute(&ConfigFile::from_toml(GRID)?, tmp.path(), &ExecuteOptions::default(), |_| {})?;
            let recs = read_manifest(&out.dir.join(MANIFEST), false)?;
            (out.dir, recs)
        }
    };
    let k1 = 21.min(records.len());
    println!("{} runs, {k1} ratio clusters", records.len());

    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    let coarse = hcluster(&DistanceMatrix::euclidean_1d(&ratios), Linkage::Average)?.cut(k1)?;
    for (c, members) in groups(&coarse).iter().enumerate().take(5) {
        let mean = members.iter().map(|&i| ratios[i]).sum::<f64>() / members.len() as f64;
        println!("  cluster {c:>2}: {:>3} runs, mean ratio {mean:.4}", members.len());
    }

    let reps: Vec<RunRecord> = pick_representatives(&coarse, 0).into_iter().map(|i| records[i].clone()).collect();
    let matrix = ncd_matrix(&load_rasters(&dir, &reps)?)?;
    let rep_ratios: Vec<f64> = reps.iter().map(|r| r.ratio).collect();
    let split = ncd_group(&matrix, &rep_ratios, 2, Linkage::Average)?;
    for (name, g) in ["lower", "higher"].iter().zip(&split) {
        let ids: Vec<&str> = g.iter().map(|&i| reps[i].run_id.as_str()).collect();
        println!("{name} complexity group ({}): {}", g.len(), ids.join(" "));
    }
    Ok(())
}

