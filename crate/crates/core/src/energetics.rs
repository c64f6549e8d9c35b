//! Bond energies, activation energies for hops and quarter-turns, and the
//! Arrhenius-style rate law.
//!
//! All energies are in eV. Label pairs without a configured value bond with
//! zero energy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Direction, LabelId, Lattice, Pos, Rotation, TileId, TileInstance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("unknown edge label {0}")]
    UnknownLabel(LabelId),
    #[error("unknown edge label name {0:?}")]
    UnknownLabelName(String),
    #[error("no tile at {0}")]
    SiteEmpty(Pos),
    #[error("hop target {0} is occupied")]
    TargetOccupied(Pos),
    #[error("TT0 must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("invalid energy model: {0}")]
    Invalid(String),
}

/// Functional groups with measured pair energies.
pub const NITRO: LabelId = 0;
pub const CARBOXYLIC_ACID: LabelId = 1;
pub const BROMINE: LabelId = 2;
pub const IODINE: LabelId = 3;
pub const PYRIDINE: LabelId = 4;

/// Symmetric label x label energy table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondTable {
    labels: Vec<String>,
    energies: Vec<f64>,
}

impl BondTable {
    /// Table with the given label names and every pair at 0 eV.
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let n = labels.len();
        BondTable {
            labels,
            energies: vec![0.0; n * n],
        }
    }

    /// Estimated pair energies between nitro, carboxylic acid, bromine,
    /// iodine and pyridine groups. Unmeasured pairs stay at 0 eV.
    pub fn functional_groups() -> Self {
        let mut t = BondTable::new(["nitro", "carboxylic_acid", "bromine", "iodine", "pyridine"]);
        t.set(NITRO, IODINE, 0.13);
        t.set(CARBOXYLIC_ACID, CARBOXYLIC_ACID, 0.30);
        t.set(CARBOXYLIC_ACID, PYRIDINE, 0.39);
        t.set(BROMINE, BROMINE, 1.00);
        t.set(IODINE, IODINE, 0.087);
        t.set(IODINE, PYRIDINE, 0.17);
        t.set(PYRIDINE, PYRIDINE, 0.10);
        t
    }

    /// Two abstract labels `1` and `2` with like-like energies `e11`, `e22`
    /// and cross energy `e12`; the setup of the parameter sweeps.
    pub fn two_label(e11: f64, e22: f64, e12: f64) -> Self {
        let mut t = BondTable::new(["1", "2"]);
        t.set(0, 0, e11);
        t.set(1, 1, e22);
        t.set(0, 1, e12);
        t
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_id(&self, name: &str) -> Result<LabelId, EnergyError> {
        self.labels
            .iter()
            .position(|l| l == name)
            .map(|i| i as LabelId)
            .ok_or_else(|| EnergyError::UnknownLabelName(name.to_string()))
    }

    /// Sets both `(a, b)` and `(b, a)`.
    ///
    /// Panics if either label is out of range.
    pub fn set(&mut self, a: LabelId, b: LabelId, energy: f64) {
        let n = self.labels.len();
        let (a, b) = (a as usize, b as usize);
        assert!(a < n && b < n, "label out of range");
        self.energies[a * n + b] = energy;
        self.energies[b * n + a] = energy;
    }

    pub fn get(&self, a: LabelId, b: LabelId) -> Result<f64, EnergyError> {
        let n = self.labels.len();
        for l in [a, b] {
            if l as usize >= n {
                return Err(EnergyError::UnknownLabel(l));
            }
        }
        Ok(self.energies[a as usize * n + b as usize])
    }

    #[inline]
    fn get_unchecked(&self, a: LabelId, b: LabelId) -> f64 {
        self.energies[a as usize * self.labels.len() + b as usize]
    }
}

/// Every energetic parameter of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub bonds: BondTable,
    /// Tile-substrate binding, `E_s`.
    pub substrate: f64,
    /// Rotation binding, `E_r`.
    pub rotation: f64,
    /// Scaled temperature times Boltzmann constant, `TT0`.
    pub tt0: f64,
    /// Constant deposition rate, `R_Dep`.
    pub deposition_rate: f64,
}

impl EnergyModel {
    pub fn new(bonds: BondTable, substrate: f64, rotation: f64, tt0: f64, deposition_rate: f64) -> Result<Self, EnergyError> {
        let m = EnergyModel {
            bonds,
            substrate,
            rotation,
            tt0,
            deposition_rate,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if !(self.tt0 > 0.0) || !self.tt0.is_finite() {
            return Err(EnergyError::NonPositiveTemperature(self.tt0));
        }
        let named = [
            ("substrate energy", self.substrate),
            ("rotation energy", self.rotation),
            ("deposition rate", self.deposition_rate),
        ];
        for (what, v) in named {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EnergyError::Invalid(format!("{what} must be finite and >= 0, got {v}")));
            }
        }
        if let Some(e) = self.bonds.energies.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(EnergyError::Invalid(format!("bond energies must be finite and >= 0, got {e}")));
        }
        Ok(())
    }

    pub fn bond_energy(&self, a: LabelId, b: LabelId) -> Result<f64, EnergyError> {
        self.bonds.get(a, b)
    }

    /// `exp(-activation / TT0)`.
    pub fn rate(&self, activation: f64) -> Result<f64, EnergyError> {
        rate(activation, self.tt0)
    }

    /// Energy of the bond between `tile`'s `side` and whatever sits across it.
    /// Zero when the neighbouring site is empty.
    #[inline]
    fn bond_across(&self, lat: &Lattice, tile: &TileInstance, side: Direction) -> f64 {
        match lat.tile_at(lat.neighbor(tile.pos, side)) {
            Some(other) => self.facing_bond(lat, tile, side, other),
            None => 0.0,
        }
    }

    #[inline]
    fn facing_bond(&self, lat: &Lattice, tile: &TileInstance, side: Direction, other: &TileInstance) -> f64 {
        self.bonds
            .get_unchecked(lat.edge_label(tile, side), lat.edge_label(other, side.opposite()))
    }

    /// Activation energy to hop the tile at `pos` one site in `dir`:
    /// `E_s` plus the bonds to the three neighbours that are left behind.
    pub fn activation_motion(&self, lat: &Lattice, pos: Pos, dir: Direction) -> Result<f64, EnergyError> {
        let tile = lat.tile_at(pos).ok_or(EnergyError::SiteEmpty(pos))?;
        let target = lat.neighbor(pos, dir);
        if lat.is_occupied(target) {
            return Err(EnergyError::TargetOccupied(target));
        }
        let mut e = self.substrate;
        for side in Direction::ALL {
            if side != dir {
                e += self.bond_across(lat, tile, side);
            }
        }
        Ok(e)
    }

    /// Activation energy for a quarter-turn of the tile at `pos`.
    ///
    /// Neighbours are visited in the sense of the turn, starting north, so
    /// that the edge facing neighbour `k` sweeps towards neighbour `k+1`.
    /// With `c_k` the occupancy, `old_k` the current bond and `new_k` the
    /// bond the same neighbour would have after the turn:
    ///
    /// `E_r + sum_k old_k c_k (1 - c_{k+1}) + sum_k |old_k - new_k| c_k`
    pub fn activation_rotation(&self, lat: &Lattice, pos: Pos, rotation: Rotation) -> Result<f64, EnergyError> {
        let tile = lat.tile_at(pos).ok_or(EnergyError::SiteEmpty(pos))?;
        Ok(self.rotation_energy(lat, tile, rotation))
    }

    fn rotation_energy(&self, lat: &Lattice, tile: &TileInstance, rotation: Rotation) -> f64 {
        let order = match rotation {
            Rotation::Clockwise => [Direction::North, Direction::East, Direction::South, Direction::West],
            Rotation::CounterClockwise => [Direction::North, Direction::West, Direction::South, Direction::East],
        };
        let turned = TileInstance {
            orientation: tile.orientation.rotated(rotation),
            ..*tile
        };
        let mut occupied = [false; 4];
        let mut old = [0.0; 4];
        let mut new = [0.0; 4];
        for (k, &side) in order.iter().enumerate() {
            if let Some(other) = lat.tile_at(lat.neighbor(tile.pos, side)) {
                occupied[k] = true;
                old[k] = self.facing_bond(lat, tile, side, other);
                new[k] = self.facing_bond(lat, &turned, side, other);
            }
        }
        let mut e = self.rotation;
        for k in 0..4 {
            if occupied[k] {
                if !occupied[(k + 1) % 4] {
                    e += old[k];
                }
                e += (old[k] - new[k]).abs();
            }
        }
        e
    }

    /// All six activation energies of one tile, blocked hops as `None`.
    pub fn tile_activations(&self, lat: &Lattice, id: TileId) -> TileActivations {
        let tile = lat.tile(id);
        let mut bonds = [0.0; 4];
        let mut free = [false; 4];
        for side in Direction::ALL {
            match lat.tile_at(lat.neighbor(tile.pos, side)) {
                Some(other) => bonds[side.index()] = self.facing_bond(lat, tile, side, other),
                None => free[side.index()] = true,
            }
        }
        let mut moves = [None; 4];
        for dir in Direction::ALL {
            if free[dir.index()] {
                let mut e = self.substrate;
                for side in Direction::ALL {
                    if side != dir {
                        e += bonds[side.index()];
                    }
                }
                moves[dir.index()] = Some(e);
            }
        }
        TileActivations {
            moves,
            rotate_cw: self.rotation_energy(lat, tile, Rotation::Clockwise),
            rotate_ccw: self.rotation_energy(lat, tile, Rotation::CounterClockwise),
        }
    }
}

/// Activation energies of the transitions available to a single tile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TileActivations {
    /// Indexed by [`Direction::index`]; `None` where the target is occupied.
    pub moves: [Option<f64>; 4],
    pub rotate_cw: f64,
    pub rotate_ccw: f64,
}

/// `exp(-activation / tt0)`.
pub fn rate(activation: f64, tt0: f64) -> Result<f64, EnergyError> {
    if !(tt0 > 0.0) {
        return Err(EnergyError::NonPositiveTemperature(tt0));
    }
    Ok((-activation / tt0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::test_support::{lattice, put};
    use crate::lattice::{Orientation, SpeciesDescriptor, SpeciesSet};
    use proptest::prelude::*;

    fn model(bonds: BondTable, es: f64, er: f64) -> EnergyModel {
        EnergyModel::new(bonds, es, er, 0.028, 5e-5).unwrap()
    }

    #[test]
    fn functional_group_energies() {
        let t = BondTable::functional_groups();
        assert_eq!(t.get(BROMINE, BROMINE).unwrap(), 1.00);
        assert_eq!(t.get(IODINE, IODINE).unwrap(), 0.087);
        assert_eq!(t.get(NITRO, IODINE).unwrap(), 0.13);
        assert_eq!(t.get(IODINE, NITRO).unwrap(), 0.13);
        assert_eq!(t.get(CARBOXYLIC_ACID, PYRIDINE).unwrap(), 0.39);
        assert_eq!(t.get(NITRO, NITRO).unwrap(), 0.0);
        assert_eq!(t.get(BROMINE, PYRIDINE).unwrap(), 0.0);
        assert_eq!(t.get(5, 0), Err(EnergyError::UnknownLabel(5)));
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(t.get(a, b), t.get(b, a));
            }
        }
        assert_eq!(t.label_id("iodine").unwrap(), IODINE);
    }

    #[test]
    fn model_validation() {
        let b = BondTable::two_label(0.1, 0.1, 0.1);
        assert_eq!(
            EnergyModel::new(b.clone(), 0.5, 1.3, 0.0, 5e-5),
            Err(EnergyError::NonPositiveTemperature(0.0))
        );
        assert!(EnergyModel::new(b.clone(), -0.1, 1.3, 0.028, 5e-5).is_err());
        assert!(EnergyModel::new(b, 0.5, 1.3, 0.028, -1.0).is_err());
        assert!(EnergyModel::new(BondTable::two_label(-0.2, 0.1, 0.1), 0.5, 1.3, 0.028, 5e-5).is_err());
    }

    #[test]
    fn rate_law_values() {
        assert_eq!(rate(0.0, 0.028).unwrap(), 1.0);
        assert!((rate(0.028, 0.028).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let r = rate(0.5, 0.028).unwrap();
        assert!((r - 1.756877150646201e-8).abs() < 1e-20, "{r}");
        assert_eq!(rate(1.0, 0.0), Err(EnergyError::NonPositiveTemperature(0.0)));
        assert_eq!(rate(1.0, -1.0), Err(EnergyError::NonPositiveTemperature(-1.0)));
    }

    #[test]
    fn isolated_tile_motion_is_substrate_energy() {
        let m = model(BondTable::two_label(0.3, 0.3, 0.3), 0.5, 1.3);
        let mut lat = lattice(5);
        put(&mut lat, 1, 2, 2);
        for d in Direction::ALL {
            assert_eq!(m.activation_motion(&lat, Pos::new(2, 2), d).unwrap(), 0.5);
        }
        assert_eq!(m.activation_rotation(&lat, Pos::new(2, 2), Rotation::Clockwise).unwrap(), 1.3);
    }

    #[test]
    fn motion_with_three_bonded_neighbours() {
        let m = model(BondTable::two_label(0.3, 0.3, 0.3), 0.5, 1.3);
        let mut lat = lattice(5);
        put(&mut lat, 1, 2, 2);
        put(&mut lat, 1, 1, 2);
        put(&mut lat, 2, 3, 2);
        put(&mut lat, 1, 2, 1);
        let e = m.activation_motion(&lat, Pos::new(2, 2), Direction::East).unwrap();
        assert!((e - 1.4).abs() < 1e-12);
        assert_eq!(
            m.activation_motion(&lat, Pos::new(2, 2), Direction::West),
            Err(EnergyError::TargetOccupied(Pos::new(2, 1)))
        );
        assert_eq!(
            m.activation_motion(&lat, Pos::new(0, 0), Direction::West),
            Err(EnergyError::SiteEmpty(Pos::new(0, 0)))
        );
    }

    #[test]
    fn motion_with_carboxylic_and_pyridine_bonds() {
        // carboxylic acid faces a pyridine to the north (0.39) and pyridine
        // faces pyridine to the west (0.10)
        let species = SpeciesSet::new(
            vec![
                SpeciesDescriptor::new(1, "mover", [CARBOXYLIC_ACID, NITRO, NITRO, PYRIDINE], 0.5),
                SpeciesDescriptor::new(2, "pyr", [PYRIDINE; 4], 0.5),
            ],
            5,
        )
        .unwrap();
        let m = model(BondTable::functional_groups(), 0.5, 1.3);
        let mut lat = Lattice::new(5, species).unwrap();
        let o = Orientation::default();
        lat.place(TileInstance::new(1, o, Pos::new(2, 2))).unwrap();
        lat.place(TileInstance::new(2, o, Pos::new(1, 2))).unwrap();
        lat.place(TileInstance::new(2, o, Pos::new(2, 1))).unwrap();
        let e = m.activation_motion(&lat, Pos::new(2, 2), Direction::East).unwrap();
        assert!((e - 0.99).abs() < 1e-12, "{e}");
    }

    #[test]
    fn rotation_reductions() {
        let m = model(BondTable::two_label(0.4, 0.4, 0.4), 0.5, 1.3);
        let mut lat = lattice(5);
        put(&mut lat, 1, 2, 2);
        put(&mut lat, 1, 1, 2);
        for rot in [Rotation::Clockwise, Rotation::CounterClockwise] {
            let e = m.activation_rotation(&lat, Pos::new(2, 2), rot).unwrap();
            assert!((e - 1.7).abs() < 1e-12);
        }
        put(&mut lat, 1, 2, 3);
        put(&mut lat, 1, 3, 2);
        put(&mut lat, 1, 2, 1);
        let e = m.activation_rotation(&lat, Pos::new(2, 2), Rotation::Clockwise).unwrap();
        assert!((e - 1.3).abs() < 1e-12);
        assert_eq!(
            m.activation_rotation(&lat, Pos::new(0, 0), Rotation::Clockwise),
            Err(EnergyError::SiteEmpty(Pos::new(0, 0)))
        );
    }

    #[test]
    fn rotation_saddle_term_for_hetero_tile() {
        // mover carries bromine on north only; a bromine neighbour to the north
        // loses its 1.0 eV bond on a clockwise turn and the east side is empty:
        // E_r + old_N + |old_N - new_N| = 1.3 + 1.0 + 1.0
        let species = SpeciesSet::new(
            vec![
                SpeciesDescriptor::new(1, "mover", [BROMINE, NITRO, NITRO, NITRO], 0.5),
                SpeciesDescriptor::new(2, "br", [BROMINE; 4], 0.5),
            ],
            5,
        )
        .unwrap();
        let m = model(BondTable::functional_groups(), 0.5, 1.3);
        let mut lat = Lattice::new(5, species).unwrap();
        let o = Orientation::default();
        lat.place(TileInstance::new(1, o, Pos::new(2, 2))).unwrap();
        lat.place(TileInstance::new(2, o, Pos::new(1, 2))).unwrap();
        let cw = m.activation_rotation(&lat, Pos::new(2, 2), Rotation::Clockwise).unwrap();
        assert!((cw - 3.3).abs() < 1e-12, "{cw}");
        // counter-clockwise visits N, W, S, E: west is empty too, same value
        let ccw = m.activation_rotation(&lat, Pos::new(2, 2), Rotation::CounterClockwise).unwrap();
        assert!((ccw - 3.3).abs() < 1e-12, "{ccw}");
    }

    #[test]
    fn tile_activations_agree_with_single_queries() {
        let m = model(BondTable::two_label(0.2, 0.7, 0.45), 0.6, 1.3);
        let mut lat = lattice(4);
        put(&mut lat, 1, 1, 1);
        put(&mut lat, 2, 1, 2);
        put(&mut lat, 2, 0, 1);
        let acts = m.tile_activations(&lat, 0);
        for d in Direction::ALL {
            assert_eq!(acts.moves[d.index()], m.activation_motion(&lat, Pos::new(1, 1), d).ok());
        }
        assert_eq!(acts.rotate_cw, m.activation_rotation(&lat, Pos::new(1, 1), Rotation::Clockwise).unwrap());
    }

    proptest! {
        #[test]
        fn rate_is_monotone(a in 0.0f64..5.0, b in 0.0f64..5.0, tt0 in 0.005f64..1.0) {
            let (ra, rb) = (rate(a, tt0).unwrap(), rate(b, tt0).unwrap());
            prop_assert!(ra > 0.0 && ra <= 1.0);
            if a < b { prop_assert!(ra >= rb); }
            if a < b && (b - a) / tt0 > 1e-12 { prop_assert!(ra > rb); }
        }

        #[test]
        fn iso_single_species_rotation_is_sense_symmetric(mask in 0u8..16, e in 0.0f64..1.5) {
            let m = model(BondTable::two_label(e, 0.0, 0.0), 0.5, 1.3);
            let mut lat = lattice(5);
            put(&mut lat, 1, 2, 2);
            for d in Direction::ALL {
                if mask & (1 << d.index()) != 0 {
                    let p = lat.neighbor(Pos::new(2, 2), d);
                    put(&mut lat, 1, p.row, p.col);
                }
            }
            let cw = m.activation_rotation(&lat, Pos::new(2, 2), Rotation::Clockwise).unwrap();
            let ccw = m.activation_rotation(&lat, Pos::new(2, 2), Rotation::CounterClockwise).unwrap();
            prop_assert!((cw - ccw).abs() < 1e-12);
        }

        #[test]
        fn motion_independent_of_free_target(mask in 0u8..15, e11 in 0.0f64..1.0, e12 in 0.0f64..1.0, species_mask in 0u8..16) {
            let m = model(BondTable::two_label(e11, 0.3, e12), 0.5, 1.3);
            let mut lat = lattice(5);
            put(&mut lat, 1, 2, 2);
            for d in Direction::ALL {
                if mask & (1 << d.index()) != 0 {
                    let p = lat.neighbor(Pos::new(2, 2), d);
                    put(&mut lat, 1 + ((species_mask >> d.index()) & 1), p.row, p.col);
                }
            }
            let values: Vec<f64> = Direction::ALL
                .iter()
                .filter_map(|&d| m.activation_motion(&lat, Pos::new(2, 2), d).ok())
                .collect();
            prop_assert!(!values.is_empty());
            for v in &values {
                prop_assert!((v - values[0]).abs() < 1e-12);
            }
        }
    }
}
