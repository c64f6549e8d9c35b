//! One run of the two-species system on a 64x64 lattice.
//!
//! ```text
//! cargo run --release --example simulate_two_species -- [seed] [out.png]
//! ```

use tilekmc::complexity::ParamPoint;
use tilekmc::config::SimulationSection;
use tilekmc::render::{encode_png, rasterize, Palette};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let out = args.next().unwrap_or_else(|| "two_species.png".into());

    let section = SimulationSection {
        lattice_side: 64,
        ..Default::default()
    };
    let point = ParamPoint::new(0.7, 0.4, 0.4, 0.9);
    let config = section.resolve(Some(point), seed)?;
    println!("{} steps, at most {} tiles", config.steps, config.max_tiles());

    let result = tilekmc::run(config)?;
    let lat = &result.lattice;
    let aggregates = lat.aggregates();
    let bonds = lat.hetero_bond_fraction();
    println!("tiles        {}", lat.len());
    println!("aggregates   {} (largest {})", aggregates.count(), aggregates.largest());
    println!("A-B contacts {:.3} of {} touching pairs", bonds.fraction, bonds.pairs);
    println!("events       {:?}", result.counts);

    let png = encode_png(&rasterize(lat, 4), &Palette::for_species(2))?;
    std::fs::write(&out, png)?;
    println!("wrote {out}");
    Ok(())
}
