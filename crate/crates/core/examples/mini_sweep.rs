//! Runs the bundled 54-point grid and prints the ratio ranking, the
//! distance-to-complexity correlation and the detected transition.
//!
//! ```text
//! cargo run --release --example mini_sweep -- [out_dir]
//! ```

use std::path::PathBuf;

use tilekmc::complexity::{detect_transition, param_output_correlation, sort_by_ratio, TransitionReport};
use tilekmc::config::ConfigFile;
use tilekmc::sweep::{execute, ExecuteOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out".into());
    let cfg = ConfigFile::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/mini_sweep.toml"))?;
    let opts = ExecuteOptions {
        resume: true,
        ..Default::default()
    };
    let outcome = execute(&cfg, &out, &opts, |p| eprint!("\r{}/{}", p.done, p.total))?;
    eprintln!();
    println!("{} runs in {}", outcome.records.len(), outcome.dir.display());

    let sorted = sort_by_ratio(&outcome.records);
    for r in sorted.iter().take(3).chain(sorted.iter().rev().take(3)) {
        println!("  {:<40} ratio {:.4}", r.run_id, r.ratio);
    }
    let pairs: Vec<_> = outcome.records.iter().map(|r| (r.params, r.c_bits)).collect();
    println!("Spearman rho(distance from origin, C) = {:.3}", param_output_correlation(&pairs)?);

    let ratios: Vec<f64> = sorted.iter().map(|r| r.ratio).collect();
    match detect_transition(&ratios)? {
        TransitionReport::NoTransition => println!("no transition in the ratio ranking"),
        TransitionReport::Boundary { index, score, .. } => println!(
            "largest jump before rank {index} ({} -> {}), score {score:.4}",
            sorted[index - 1].run_id,
            sorted[index].run_id
        ),
    }
    Ok(())
}
