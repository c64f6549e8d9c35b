//! Timing of a full-size run: 256x256 sites, 25% coverage, two million events.

use std::time::Instant;

use tilekmc::config::SimulationSection;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2_000_000u64);
    let section = SimulationSection {
        steps: Some(steps),
        ..Default::default()
    };
    let config = section.resolve(None, 1)?;
    let start = Instant::now();
    let result = tilekmc::run(config)?;
    let secs = start.elapsed().as_secs_f64();
    println!(
        "{steps} events in {secs:.2} s ({:.2} M events/s), {} tiles, {} aggregates",
        steps as f64 / secs / 1e6,
        result.lattice.len(),
        result.lattice.aggregates().count()
    );
    Ok(())
}
