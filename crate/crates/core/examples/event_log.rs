//! Streams every event of a short run to CSV and tallies them by kind.

use std::collections::BTreeMap;

use tilekmc::config::SimulationSection;
use tilekmc::kmc::{Event, EventLog, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let section = SimulationSection {
        lattice_side: 32,
        steps: Some(20_000),
        ..Default::default()
    };
    let mut sim = Simulation::new(section.resolve(None, 5)?)?;
    let mut log = EventLog::new(Vec::new())?;
    let mut tally: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut coverage = Vec::new();
    sim.run_with(|step, event, lat| {
        log.record(step, event).expect("writing to memory");
        let kind = match event {
            Event::Diffused(t) => t.kind.name(),
            Event::Deposited { .. } => "deposit",
            Event::Stalled => "stall",
        };
        *tally.entry(kind).or_default() += 1;
        if step % 4000 == 0 {
            coverage.push((step, lat.coverage()));
        }
    })?;

    let csv = String::from_utf8(log.into_inner())?;
    for line in csv.lines().take(6) {
        println!("{line}");
    }
    println!("... {} lines\n", csv.lines().count());
    for (kind, n) in &tally {
        println!("{kind:<8} {n}");
    }
    for (step, c) in coverage {
        println!("coverage after {step:>6} steps: {c:.3}");
    }
    Ok(())
}
