//! Does raising one bond energy always increase complexity? Groups runs
//! that differ only in the chosen parameter and classifies each trend.
//!
//! ```text
//! cargo run --release --example orthogonality -- [E_s|E_11|E_22|E_12]
//! ```

use tilekmc::complexity::Param;
use tilekmc::config::ConfigFile;
use tilekmc::sweep::{execute, orthogonality_report, ExecuteOptions, Trend, DEFAULT_TAU};

const GRID: &str = r#"
schema = "tilekmc-config/1"
[simulation]
lattice_side = 48
[sweep]
id = "ortho"
substrate_energy = [0.5, 1.0]
e11 = [0.1, 0.5, 1.0]
e22 = [0.1, 0.5, 1.0]
e12 = [0.1, 0.5, 1.0]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let varied = match std::env::args().nth(1) {
        Some(s) => Param::parse(&s).ok_or(format!("unknown parameter {s}"))?,
        None => Param::E12,
    };
    let tmp = tempfile::tempdir()?;
    let outcome = execute(&ConfigFile::from_toml(GRID)?, tmp.path(), &ExecuteOptions::default(), |_| {})?;
    let report = orthogonality_report(&outcome.records, varied, DEFAULT_TAU);

    for g in &report.groups {
        let fixed: Vec<String> = g.fixed.iter().map(|(p, v)| format!("{}={v}", p.name())).collect();
        let c: Vec<String> = g.mean_c.iter().map(|c| format!("{c:.0}")).collect();
        println!("{:<30} C = [{}]  {}", fixed.join(" "), c.join(", "), g.trend.name());
    }
    println!(
        "\n{}: {} increasing, {} reversed, {} flat",
        varied.name(),
        report.count(Trend::Increasing),
        report.count(Trend::Reversed),
        report.count(Trend::Flat)
    );
    Ok(())
}
