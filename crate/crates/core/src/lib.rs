//! Kinetic Monte Carlo for programmable square-tile self-assembly, with
//! compression-based analysis of the resulting patterns.
//!
//! A run places tiles on a periodic square lattice, lets them hop and turn
//! with Arrhenius rates set by edge-to-edge bond energies, and stops after a
//! fixed number of events. Final states are rasterised and compared through
//! their DEFLATE-compressed sizes.
//!
//! ```no_run
//! use tilekmc::config::SimulationSection;
//! use tilekmc::kmc;
//!
//! let sim = SimulationSection { lattice_side: 64, ..Default::default() };
//! let result = kmc::run(sim.resolve(None, 7).unwrap()).unwrap();
//! println!("{} aggregates", result.lattice.aggregates().count());
//! ```

pub mod cli;
pub mod clustering;
pub mod complexity;
pub mod config;
pub mod energetics;
pub mod kmc;
pub mod lattice;
pub mod render;
pub mod rng;
pub mod sweep;

pub use config::ConfigFile;
pub use energetics::{BondTable, EnergyModel};
pub use kmc::{run, RunResult, SimConfig, Simulation};
pub use lattice::{Lattice, SpeciesDescriptor, SpeciesSet};
