//! Tiles decorated with real functional groups, configured from TOML.
//!
//! Carboxylic acids pair with pyridines more strongly than with each other,
//! so mixing an acid-edged tile with a pyridine-edged one favours
//! alternating A-B contacts.

use tilekmc::config::ConfigFile;
use tilekmc::energetics::BondTable;

const CONFIG: &str = r#"
schema = "tilekmc-config/1"

[simulation]
lattice_side = 64
substrate_energy = 0.6
seed = 3

[simulation.bonds]
preset = "functional-groups"

[[simulation.species]]
name = "acid"
edges = ["carboxylic_acid", "carboxylic_acid", "carboxylic_acid", "carboxylic_acid"]
concentration = 0.5

[[simulation.species]]
name = "pyridine"
edges = ["pyridine", "pyridine", "pyridine", "pyridine"]
concentration = 0.5
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = BondTable::functional_groups();
    println!("pair energies (eV):");
    for (a, la) in table.labels().iter().enumerate() {
        for (b, lb) in table.labels().iter().enumerate().skip(a) {
            let e = table.get(a as u16, b as u16)?;
            if e > 0.0 {
                println!("  {la:>15} - {lb:<15} {e:.3}");
            }
        }
    }

    let file = ConfigFile::from_toml(CONFIG)?;
    let result = tilekmc::run(file.simulation.resolve(None, file.simulation.seed)?)?;
    let mixed = result.lattice.hetero_bond_fraction();
    println!(
        "\n{} tiles, {} aggregates, {:.0}% of contacts are acid-pyridine",
        result.lattice.len(),
        result.lattice.aggregates().count(),
        100.0 * mixed.fraction
    );
    Ok(())
}
