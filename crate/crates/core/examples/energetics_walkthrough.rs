//! Activation energies and rates for a small hand-built configuration.

use tilekmc::energetics::{BondTable, EnergyModel};
use tilekmc::kmc::enumerate_transitions;
use tilekmc::lattice::{Direction, Lattice, Orientation, Pos, Rotation, SpeciesDescriptor, SpeciesSet, TileInstance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // label 0 on the north side only, label 1 elsewhere
    let species = SpeciesSet::new(vec![SpeciesDescriptor::new(1, "T", [0, 1, 1, 1], 1.0)], 2)?;
    let model = EnergyModel::new(BondTable::two_label(0.6, 0.2, 0.4), 0.5, 1.3, 0.028, 5e-5)?;

    let mut lat = Lattice::new(8, species)?;
    let centre = Pos::new(3, 3);
    lat.place(TileInstance::new(1, Orientation::new(0), centre))?;
    lat.place(TileInstance::new(1, Orientation::new(2), Pos::new(2, 3)))?;
    lat.place(TileInstance::new(1, Orientation::new(1), Pos::new(3, 4)))?;

    println!("tile at {centre:?}, neighbours north and east");
    for dir in Direction::ALL {
        match model.activation_motion(&lat, centre, dir) {
            Ok(e) => println!("  hop {}  E = {e:.3} eV  rate = {:.3e}", dir.letter(), model.rate(e)?),
            Err(_) => println!("  hop {}  blocked", dir.letter()),
        }
    }
    for rot in [Rotation::Clockwise, Rotation::CounterClockwise] {
        let e = model.activation_rotation(&lat, centre, rot)?;
        println!("  turn {rot:?}  E = {e:.3} eV  rate = {:.3e}", model.rate(e)?);
    }

    let all = enumerate_transitions(&lat, &model);
    let total: f64 = all.iter().map(|t| t.rate).sum();
    println!("\n{} transitions on the lattice, total rate {total:.3e}", all.len());
    let fastest = all.iter().max_by(|a, b| a.rate.total_cmp(&b.rate)).unwrap();
    println!(
        "fastest: {} at {:?}, chosen with probability {:.2e}",
        fastest.kind.name(),
        fastest.tile_pos,
        fastest.rate / (total + model.deposition_rate)
    );
    Ok(())
}
