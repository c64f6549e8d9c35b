//! Periodic square site lattice holding at most one tile per site.
//!
//! Sides are indexed in the canonical order north, east, south, west and a
//! tile's orientation counts clockwise quarter-turns. Rows grow southwards
//! and columns grow eastwards; every coordinate wraps modulo the side length.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a functional-group edge label.
pub type LabelId = u16;

/// Species identifiers are 1-based so that 0 can mean "no tile" in rasters.
pub type SpeciesId = u8;

/// Index of a tile in placement order.
pub type TileId = usize;

const EMPTY: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("site {0} is already occupied")]
    SiteOccupied(Pos),
    #[error("site {0} is empty")]
    SiteEmpty(Pos),
    #[error("sites {from} and {to} are not von Neumann neighbours")]
    NotAdjacent { from: Pos, to: Pos },
    #[error("position {pos} is outside a lattice of side {side}")]
    OutOfBounds { pos: Pos, side: usize },
    #[error("unknown species {0}")]
    UnknownSpecies(SpeciesId),
    #[error("lattice side must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("invalid species set: {0}")]
    InvalidSpecies(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: u32,
    pub col: u32,
}

impl Pos {
    pub const fn new(row: u32, col: u32) -> Self {
        Pos { row, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Direction {
        Direction::ALL[i % 4]
    }

    pub fn opposite(self) -> Direction {
        Direction::from_index(self.index() + 2)
    }

    pub fn letter(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::East => 'E',
            Direction::South => 'S',
            Direction::West => 'W',
        }
    }
}

/// Quarter-turn sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rotation {
    Clockwise,
    CounterClockwise,
}

impl Rotation {
    fn delta(self) -> u8 {
        match self {
            Rotation::Clockwise => 1,
            Rotation::CounterClockwise => 3,
        }
    }
}

/// Number of clockwise quarter-turns applied to a tile, always in `0..4`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Orientation(u8);

impl Orientation {
    pub fn new(quarter_turns: u8) -> Self {
        Orientation(quarter_turns % 4)
    }

    pub fn quarter_turns(self) -> u8 {
        self.0
    }

    pub fn rotated(self, rotation: Rotation) -> Self {
        Orientation((self.0 + rotation.delta()) % 4)
    }
}

/// A tile family: four edge labels at orientation 0 and a deposition weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesDescriptor {
    pub id: SpeciesId,
    pub name: String,
    /// Labels on the north, east, south and west sides at orientation 0.
    pub edge_labels: [LabelId; 4],
    pub concentration: f64,
}

impl SpeciesDescriptor {
    pub fn new(id: SpeciesId, name: impl Into<String>, edge_labels: [LabelId; 4], concentration: f64) -> Self {
        SpeciesDescriptor {
            id,
            name: name.into(),
            edge_labels,
            concentration,
        }
    }

    /// All four sides carry the same functional group.
    pub fn is_iso_functionalised(&self) -> bool {
        self.edge_labels.iter().all(|&l| l == self.edge_labels[0])
    }

    /// Label exposed on `side` when the tile sits at `orientation`.
    pub fn edge_label(&self, side: Direction, orientation: Orientation) -> LabelId {
        let k = side.index() + 4 - orientation.quarter_turns() as usize;
        self.edge_labels[k % 4]
    }
}

/// Validated list of species; ids run `1..=len` in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSet {
    species: Vec<SpeciesDescriptor>,
}

impl SpeciesSet {
    pub fn new(species: Vec<SpeciesDescriptor>, label_count: usize) -> Result<Self, LatticeError> {
        if species.is_empty() {
            return Err(LatticeError::InvalidSpecies("no species configured".into()));
        }
        if species.len() > 254 {
            return Err(LatticeError::InvalidSpecies("at most 254 species are supported".into()));
        }
        for (i, s) in species.iter().enumerate() {
            if s.id as usize != i + 1 {
                return Err(LatticeError::InvalidSpecies(format!(
                    "species ids must be 1..={} in order, found {} at position {}",
                    species.len(),
                    s.id,
                    i
                )));
            }
            if let Some(&l) = s.edge_labels.iter().find(|&&l| l as usize >= label_count) {
                return Err(LatticeError::InvalidSpecies(format!(
                    "species {} uses label {} but only {} labels are configured",
                    s.id, l, label_count
                )));
            }
            if !(s.concentration.is_finite() && (0.0..=1.0).contains(&s.concentration)) {
                return Err(LatticeError::InvalidSpecies(format!(
                    "species {} has concentration {} outside [0,1]",
                    s.id, s.concentration
                )));
            }
        }
        let total: f64 = species.iter().map(|s| s.concentration).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(LatticeError::InvalidSpecies(format!(
                "concentrations sum to {total}, expected 1"
            )));
        }
        Ok(SpeciesSet { species })
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn get(&self, id: SpeciesId) -> Option<&SpeciesDescriptor> {
        (id as usize).checked_sub(1).and_then(|i| self.species.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &SpeciesDescriptor> {
        self.species.iter()
    }

    pub fn as_slice(&self) -> &[SpeciesDescriptor] {
        &self.species
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileInstance {
    pub species: SpeciesId,
    pub orientation: Orientation,
    pub pos: Pos,
}

impl TileInstance {
    pub fn new(species: SpeciesId, orientation: Orientation, pos: Pos) -> Self {
        TileInstance {
            species,
            orientation,
            pos,
        }
    }
}

/// One entry of a von Neumann neighbourhood.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub pos: Pos,
    pub occupied: bool,
}

impl Neighbor {
    /// Occupancy bit `c_i` as used by the activation energies.
    pub fn c(&self) -> u8 {
        self.occupied as u8
    }
}

/// A 4-connected cluster of tiles (periodic wrap included).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub members: Vec<Pos>,
    /// Indexed by `species id - 1`.
    pub species_counts: Vec<usize>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Connected components split into aggregates (size >= 2) and lone tiles.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregates {
    pub aggregates: Vec<Component>,
    pub singletons: Vec<Pos>,
}

impl Aggregates {
    pub fn count(&self) -> usize {
        self.aggregates.len()
    }

    pub fn largest(&self) -> usize {
        self.aggregates.iter().map(Component::size).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondFraction {
    pub fraction: f64,
    pub pairs: usize,
    pub hetero_pairs: usize,
}

impl BondFraction {
    /// False when the lattice had no adjacent occupied pair; `fraction` is 0 then.
    pub fn has_pairs(&self) -> bool {
        self.pairs > 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    side: usize,
    species: SpeciesSet,
    sites: Vec<u32>,
    tiles: Vec<TileInstance>,
}

impl Lattice {
    pub fn new(side: usize, species: SpeciesSet) -> Result<Self, LatticeError> {
        if side < 2 {
            return Err(LatticeError::TooSmall(side));
        }
        if side > u16::MAX as usize {
            return Err(LatticeError::InvalidSpecies(format!("lattice side {side} is too large")));
        }
        Ok(Lattice {
            side,
            species,
            sites: vec![EMPTY; side * side],
            tiles: Vec::new(),
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn species(&self) -> &SpeciesSet {
        &self.species
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Tiles in placement order; a tile's index is its [`TileId`].
    pub fn tiles(&self) -> &[TileInstance] {
        &self.tiles
    }

    pub fn tile(&self, id: TileId) -> &TileInstance {
        &self.tiles[id]
    }

    pub fn contains(&self, pos: Pos) -> bool {
        (pos.row as usize) < self.side && (pos.col as usize) < self.side
    }

    pub fn index_of(&self, pos: Pos) -> usize {
        pos.row as usize * self.side + pos.col as usize
    }

    pub fn pos_of(&self, index: usize) -> Pos {
        Pos::new((index / self.side) as u32, (index % self.side) as u32)
    }

    fn check_bounds(&self, pos: Pos) -> Result<(), LatticeError> {
        if self.contains(pos) {
            Ok(())
        } else {
            Err(LatticeError::OutOfBounds { pos, side: self.side })
        }
    }

    pub fn tile_id_at(&self, pos: Pos) -> Option<TileId> {
        if !self.contains(pos) {
            return None;
        }
        match self.sites[self.index_of(pos)] {
            EMPTY => None,
            id => Some(id as TileId),
        }
    }

    pub fn tile_at(&self, pos: Pos) -> Option<&TileInstance> {
        self.tile_id_at(pos).map(|id| &self.tiles[id])
    }

    pub fn is_occupied(&self, pos: Pos) -> bool {
        self.tile_id_at(pos).is_some()
    }

    /// Wrapped neighbour of `pos` in direction `dir`.
    pub fn neighbor(&self, pos: Pos, dir: Direction) -> Pos {
        let n = self.side as u32;
        let Pos { row, col } = pos;
        match dir {
            Direction::North => Pos::new((row + n - 1) % n, col),
            Direction::East => Pos::new(row, (col + 1) % n),
            Direction::South => Pos::new((row + 1) % n, col),
            Direction::West => Pos::new(row, (col + n - 1) % n),
        }
    }

    /// Von Neumann neighbourhood in north, east, south, west order.
    pub fn neighbors(&self, pos: Pos) -> [Neighbor; 4] {
        Direction::ALL.map(|d| {
            let p = self.neighbor(pos, d);
            Neighbor {
                pos: p,
                occupied: self.is_occupied(p),
            }
        })
    }

    /// Label that `tile` exposes on `side`.
    pub fn edge_label(&self, tile: &TileInstance, side: Direction) -> LabelId {
        self.species
            .get(tile.species)
            .expect("placed tiles always have a known species")
            .edge_label(side, tile.orientation)
    }

    pub fn place(&mut self, tile: TileInstance) -> Result<TileId, LatticeError> {
        self.check_bounds(tile.pos)?;
        if self.species.get(tile.species).is_none() {
            return Err(LatticeError::UnknownSpecies(tile.species));
        }
        let idx = self.index_of(tile.pos);
        if self.sites[idx] != EMPTY {
            return Err(LatticeError::SiteOccupied(tile.pos));
        }
        let id = self.tiles.len();
        self.sites[idx] = id as u32;
        self.tiles.push(tile);
        Ok(id)
    }

    /// Hop the tile at `from` to the adjacent empty site `to`.
    pub fn move_tile(&mut self, from: Pos, to: Pos) -> Result<TileId, LatticeError> {
        self.check_bounds(from)?;
        self.check_bounds(to)?;
        let id = self.tile_id_at(from).ok_or(LatticeError::SiteEmpty(from))?;
        if !Direction::ALL.iter().any(|&d| self.neighbor(from, d) == to) || from == to {
            return Err(LatticeError::NotAdjacent { from, to });
        }
        if self.is_occupied(to) {
            return Err(LatticeError::SiteOccupied(to));
        }
        let (fi, ti) = (self.index_of(from), self.index_of(to));
        self.sites[fi] = EMPTY;
        self.sites[ti] = id as u32;
        self.tiles[id].pos = to;
        Ok(id)
    }

    pub fn rotate(&mut self, pos: Pos, rotation: Rotation) -> Result<TileId, LatticeError> {
        self.check_bounds(pos)?;
        let id = self.tile_id_at(pos).ok_or(LatticeError::SiteEmpty(pos))?;
        let t = &mut self.tiles[id];
        t.orientation = t.orientation.rotated(rotation);
        Ok(id)
    }

    /// Remove the tile at `pos`. The last-placed tile takes over the freed id.
    pub fn remove(&mut self, pos: Pos) -> Result<TileInstance, LatticeError> {
        self.check_bounds(pos)?;
        let id = self.tile_id_at(pos).ok_or(LatticeError::SiteEmpty(pos))?;
        let idx = self.index_of(pos);
        self.sites[idx] = EMPTY;
        let removed = self.tiles.swap_remove(id);
        if id < self.tiles.len() {
            let moved = self.index_of(self.tiles[id].pos);
            self.sites[moved] = id as u32;
        }
        Ok(removed)
    }

    pub fn coverage(&self) -> f64 {
        self.tiles.len() as f64 / self.sites.len() as f64
    }

    /// Indexed by `species id - 1`.
    pub fn species_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.species.len()];
        for t in &self.tiles {
            counts[t.species as usize - 1] += 1;
        }
        counts
    }

    /// Iterator over flat indices of empty sites, in row-major order.
    pub fn empty_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == EMPTY)
            .map(|(i, _)| i)
    }

    /// Connected components under periodic 4-connectivity.
    ///
    /// Components are reported in order of their first site in row-major
    /// order and member lists are sorted.
    pub fn aggregates(&self) -> Aggregates {
        let mut seen = vec![false; self.sites.len()];
        let mut out = Aggregates::default();
        let mut queue = VecDeque::new();
        for start in 0..self.sites.len() {
            if seen[start] || self.sites[start] == EMPTY {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut members = Vec::new();
            let mut counts = vec![0; self.species.len()];
            while let Some(i) = queue.pop_front() {
                let pos = self.pos_of(i);
                members.push(pos);
                counts[self.tiles[self.sites[i] as usize].species as usize - 1] += 1;
                for d in Direction::ALL {
                    let j = self.index_of(self.neighbor(pos, d));
                    if !seen[j] && self.sites[j] != EMPTY {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            if members.len() == 1 {
                out.singletons.push(members[0]);
            } else {
                members.sort_unstable();
                out.aggregates.push(Component {
                    members,
                    species_counts: counts,
                });
            }
        }
        out
    }

    /// Share of adjacent occupied pairs whose species differ. Each lattice
    /// edge is visited once via its east and south endpoints.
    pub fn hetero_bond_fraction(&self) -> BondFraction {
        let mut pairs = 0usize;
        let mut hetero = 0usize;
        for t in &self.tiles {
            for d in [Direction::East, Direction::South] {
                if let Some(other) = self.tile_at(self.neighbor(t.pos, d)) {
                    pairs += 1;
                    hetero += (other.species != t.species) as usize;
                }
            }
        }
        BondFraction {
            fraction: if pairs == 0 { 0.0 } else { hetero as f64 / pairs as f64 },
            pairs,
            hetero_pairs: hetero,
        }
    }

    /// Full consistency scan of the placement index.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = 0usize;
        for (i, &s) in self.sites.iter().enumerate() {
            if s == EMPTY {
                continue;
            }
            seen += 1;
            let t = self
                .tiles
                .get(s as usize)
                .ok_or_else(|| format!("site {i} points at missing tile {s}"))?;
            if self.index_of(t.pos) != i {
                return Err(format!("tile {s} records {} but sits at {}", t.pos, self.pos_of(i)));
            }
        }
        if seen != self.tiles.len() {
            return Err(format!("{} tiles but {} occupied sites", self.tiles.len(), seen));
        }
        for (id, t) in self.tiles.iter().enumerate() {
            if !self.contains(t.pos) {
                return Err(format!("tile {id} out of bounds at {}", t.pos));
            }
            if self.sites[self.index_of(t.pos)] != id as u32 {
                return Err(format!("tile {id} at {} is not indexed by its site", t.pos));
            }
            if t.orientation.quarter_turns() > 3 {
                return Err(format!("tile {id} has orientation {:?}", t.orientation));
            }
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neighbors_wrap_on_corner() {
        let lat = lattice(4);
        let ps: Vec<Pos> = lat.neighbors(Pos::new(0, 0)).iter().map(|n| n.pos).collect();
        assert_eq!(
            ps,
            vec![Pos::new(3, 0), Pos::new(0, 1), Pos::new(1, 0), Pos::new(0, 3)]
        );
    }

    #[test]
    fn neighbors_of_empty_lattice_are_unoccupied() {
        let lat = lattice(5);
        for i in 0..25 {
            assert!(lat.neighbors(lat.pos_of(i)).iter().all(|n| n.c() == 0));
        }
    }

    #[test]
    fn neighbors_occupancy_bits_3x3() {
        let mut lat = lattice(3);
        put(&mut lat, 1, 0, 1);
        put(&mut lat, 1, 1, 0);
        let c: Vec<u8> = lat.neighbors(Pos::new(0, 0)).iter().map(Neighbor::c).collect();
        assert_eq!(c, vec![0, 1, 1, 0]);
    }

    #[test]
    fn place_remove_round_trip() {
        let mut lat = lattice(4);
        let before = lat.clone();
        put(&mut lat, 2, 1, 1);
        assert!(lat.is_occupied(Pos::new(1, 1)));
        assert_eq!(
            lat.place(TileInstance::new(1, Orientation::default(), Pos::new(1, 1))),
            Err(LatticeError::SiteOccupied(Pos::new(1, 1)))
        );
        lat.remove(Pos::new(1, 1)).unwrap();
        assert_eq!(lat, before);
    }

    #[test]
    fn place_rejects_out_of_bounds_and_unknown_species() {
        let mut lat = lattice(4);
        assert!(matches!(
            lat.place(TileInstance::new(1, Orientation::default(), Pos::new(4, 0))),
            Err(LatticeError::OutOfBounds { .. })
        ));
        assert_eq!(
            lat.place(TileInstance::new(9, Orientation::default(), Pos::new(0, 0))),
            Err(LatticeError::UnknownSpecies(9))
        );
    }

    #[test]
    fn move_rules() {
        let mut lat = lattice(5);
        put(&mut lat, 1, 2, 2);
        put(&mut lat, 2, 2, 4);
        lat.move_tile(Pos::new(2, 2), Pos::new(2, 3)).unwrap();
        assert_eq!(lat.tile_at(Pos::new(2, 3)).unwrap().species, 1);
        assert_eq!(
            lat.move_tile(Pos::new(2, 3), Pos::new(2, 4)),
            Err(LatticeError::SiteOccupied(Pos::new(2, 4)))
        );
        assert_eq!(
            lat.move_tile(Pos::new(0, 0), Pos::new(0, 1)),
            Err(LatticeError::SiteEmpty(Pos::new(0, 0)))
        );
        assert!(matches!(
            lat.move_tile(Pos::new(2, 3), Pos::new(0, 0)),
            Err(LatticeError::NotAdjacent { .. })
        ));
        // wrap-around hop
        lat.move_tile(Pos::new(2, 4), Pos::new(2, 0)).unwrap();
        lat.check_invariants().unwrap();
    }

    #[test]
    fn four_rotations_are_identity() {
        let mut lat = lattice(3);
        put(&mut lat, 1, 1, 1);
        for _ in 0..4 {
            lat.rotate(Pos::new(1, 1), Rotation::Clockwise).unwrap();
        }
        assert_eq!(lat.tile_at(Pos::new(1, 1)).unwrap().orientation, Orientation::new(0));
        lat.rotate(Pos::new(1, 1), Rotation::CounterClockwise).unwrap();
        assert_eq!(lat.tile_at(Pos::new(1, 1)).unwrap().orientation, Orientation::new(3));
        assert_eq!(
            lat.rotate(Pos::new(0, 0), Rotation::Clockwise),
            Err(LatticeError::SiteEmpty(Pos::new(0, 0)))
        );
    }

    #[test]
    fn edge_label_follows_orientation() {
        let s = SpeciesDescriptor::new(1, "h", [0, 1, 2, 3], 1.0);
        assert!(!s.is_iso_functionalised());
        // one clockwise turn moves the north label to the east side
        assert_eq!(s.edge_label(Direction::East, Orientation::new(1)), 0);
        assert_eq!(s.edge_label(Direction::North, Orientation::new(1)), 3);
        assert_eq!(s.edge_label(Direction::West, Orientation::new(2)), 1);
    }

    #[test]
    fn species_set_validation() {
        assert!(SpeciesSet::new(vec![], 1).is_err());
        assert!(SpeciesSet::new(vec![SpeciesDescriptor::new(1, "a", [0, 0, 0, 5], 1.0)], 2).is_err());
        assert!(SpeciesSet::new(vec![SpeciesDescriptor::new(1, "a", [0; 4], 0.9)], 1).is_err());
        assert!(SpeciesSet::new(vec![SpeciesDescriptor::new(2, "a", [0; 4], 1.0)], 1).is_err());
        let ok = SpeciesSet::new(
            vec![
                SpeciesDescriptor::new(1, "a", [0; 4], 0.3),
                SpeciesDescriptor::new(2, "b", [0; 4], 0.7),
            ],
            1,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn coverage_values() {
        let mut lat = lattice(8);
        assert_eq!(lat.coverage(), 0.0);
        for i in 0..16u32 {
            put(&mut lat, 1, i / 8 * 2, i % 8);
        }
        assert_eq!(lat.coverage(), 0.25);
        let mut full = lattice(3);
        for i in 0..9u32 {
            put(&mut full, 1, i / 3, i % 3);
        }
        assert_eq!(full.coverage(), 1.0);
    }

    #[test]
    fn aggregates_cases() {
        let lat = lattice(6);
        assert_eq!(lat.aggregates().count(), 0);

        let mut block = lattice(6);
        for (r, c) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            put(&mut block, 1, r, c);
        }
        put(&mut block, 2, 0, 5);
        let a = block.aggregates();
        assert_eq!(a.count(), 1);
        assert_eq!(a.aggregates[0].size(), 4);
        assert_eq!(a.aggregates[0].species_counts, vec![4, 0]);
        assert_eq!(a.singletons, vec![Pos::new(0, 5)]);

        let mut wrap = lattice(6);
        put(&mut wrap, 1, 0, 0);
        put(&mut wrap, 2, 5, 0);
        let a = wrap.aggregates();
        assert_eq!(a.count(), 1);
        assert_eq!(a.aggregates[0].species_counts, vec![1, 1]);
        assert!(a.singletons.is_empty());
    }

    #[test]
    fn hetero_fraction_cases() {
        let mut single = lattice(4);
        put(&mut single, 1, 0, 0);
        assert!(!single.hetero_bond_fraction().has_pairs());
        put(&mut single, 1, 0, 1);
        assert_eq!(single.hetero_bond_fraction().fraction, 0.0);

        let mut domino = lattice(4);
        put(&mut domino, 1, 1, 1);
        put(&mut domino, 2, 1, 2);
        let f = domino.hetero_bond_fraction();
        assert_eq!((f.pairs, f.fraction), (1, 1.0));

        let mut checker = lattice(4);
        for r in 0..4u32 {
            for c in 0..4u32 {
                put(&mut checker, 1 + ((r + c) % 2) as u8, r, c);
            }
        }
        let f = checker.hetero_bond_fraction();
        assert_eq!((f.pairs, f.fraction), (32, 1.0));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Place(u32, u32, u8, u8),
        Move(u32, u32, usize),
        Rotate(u32, u32, bool),
        Remove(u32, u32),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0..5u32, 0..5u32, 1..3u8, 0..4u8).prop_map(|(r, c, s, o)| Op::Place(r, c, s, o)),
            (0..5u32, 0..5u32, 0..4usize).prop_map(|(r, c, d)| Op::Move(r, c, d)),
            (0..5u32, 0..5u32, any::<bool>()).prop_map(|(r, c, cw)| Op::Rotate(r, c, cw)),
            (0..5u32, 0..5u32).prop_map(|(r, c)| Op::Remove(r, c)),
        ]
    }

    proptest! {
        #[test]
        fn mutations_preserve_invariants(ops in proptest::collection::vec(op(), 1..200)) {
            let mut lat = lattice(5);
            for o in ops {
                let before_counts = lat.species_counts();
                match o {
                    Op::Place(r, c, s, or) => {
                        let _ = lat.place(TileInstance::new(s, Orientation::new(or), Pos::new(r, c)));
                    }
                    Op::Move(r, c, d) => {
                        let from = Pos::new(r, c);
                        let to = lat.neighbor(from, Direction::from_index(d));
                        if lat.move_tile(from, to).is_ok() {
                            prop_assert_eq!(lat.species_counts(), before_counts);
                        }
                    }
                    Op::Rotate(r, c, cw) => {
                        let rot = if cw { Rotation::Clockwise } else { Rotation::CounterClockwise };
                        let _ = lat.rotate(Pos::new(r, c), rot);
                        prop_assert_eq!(lat.species_counts(), before_counts);
                    }
                    Op::Remove(r, c) => {
                        let _ = lat.remove(Pos::new(r, c));
                    }
                }
                prop_assert!(lat.check_invariants().is_ok());
                let a = lat.aggregates();
                let total: usize = a.aggregates.iter().map(Component::size).sum::<usize>() + a.singletons.len();
                prop_assert_eq!(total, lat.len());
                let f = lat.hetero_bond_fraction().fraction;
                prop_assert!((0.0..=1.0).contains(&f));
            }
        }

        #[test]
        fn neighbor_relation_is_symmetric(side in 2usize..9, r in 0u32..9, c in 0u32..9) {
            let lat = lattice(side);
            let p = Pos::new(r % side as u32, c % side as u32);
            for d in Direction::ALL {
                let q = lat.neighbor(p, d);
                prop_assert_eq!(lat.neighbor(q, d.opposite()), p);
                prop_assert!(lat.neighbors(q).iter().any(|n| n.pos == p));
            }
        }
    }
}
