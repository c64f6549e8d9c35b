//! The kinetic Monte Carlo loop.
//!
//! Every step rebuilds the list of hop and quarter-turn transitions with
//! their rates, draws `u` in `[0,1)`, sets `shoot = u * (total + R_Dep)` and
//! applies the first transition whose cumulative rate exceeds `shoot`. If no
//! transition is reached a new tile is deposited instead. `R_Dep` drops out of
//! the roulette once the coverage cap is reached.
//!
//! Transitions are ordered by tile placement order, then by
//! [`TransitionKind`] order. Random draws per step, in order:
//! 1. the roulette uniform;
//! 2. on deposition, the index of the empty site in row-major order;
//! 3. the species, weighted by concentration;
//! 4. the orientation, uniform over four quarter-turns.
//!
//! [`Simulation`] keeps per-tile rates in a sum tree and refreshes only the
//! tiles whose neighbourhood changed; [`enumerate_transitions`] and
//! [`select_and_apply`] are the from-scratch reference it is tested against.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energetics::{EnergyError, EnergyModel, TileActivations};
use crate::lattice::{Direction, Lattice, LatticeError, Orientation, Pos, Rotation, SpeciesId, SpeciesSet, TileId, TileInstance};
use crate::rng::RngStream;

#[derive(Debug, Error)]
pub enum KmcError {
    #[error("deposition selected but the lattice has no empty site")]
    NoEmptySite,
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("non-finite rate {rate} for {kind:?} at {pos}")]
    NonFiniteRate { kind: TransitionKind, pos: Pos, rate: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    MoveN,
    MoveE,
    MoveS,
    MoveW,
    RotCW,
    RotCCW,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 6] = [
        TransitionKind::MoveN,
        TransitionKind::MoveE,
        TransitionKind::MoveS,
        TransitionKind::MoveW,
        TransitionKind::RotCW,
        TransitionKind::RotCCW,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            TransitionKind::MoveN => Some(Direction::North),
            TransitionKind::MoveE => Some(Direction::East),
            TransitionKind::MoveS => Some(Direction::South),
            TransitionKind::MoveW => Some(Direction::West),
            _ => None,
        }
    }

    pub fn rotation(self) -> Option<Rotation> {
        match self {
            TransitionKind::RotCW => Some(Rotation::Clockwise),
            TransitionKind::RotCCW => Some(Rotation::CounterClockwise),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransitionKind::MoveN => "move_n",
            TransitionKind::MoveE => "move_e",
            TransitionKind::MoveS => "move_s",
            TransitionKind::MoveW => "move_w",
            TransitionKind::RotCW => "rot_cw",
            TransitionKind::RotCCW => "rot_ccw",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub kind: TransitionKind,
    pub tile_pos: Pos,
    pub activation: f64,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Event {
    Diffused(Transition),
    Deposited {
        pos: Pos,
        species: SpeciesId,
        orientation: Orientation,
    },
    /// Nothing can move and deposition is switched off.
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub lattice_side: usize,
    pub species: SpeciesSet,
    pub energy: EnergyModel,
    pub max_coverage: f64,
    pub steps: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), KmcError> {
        if self.lattice_side < 2 {
            return Err(KmcError::Config(format!("lattice side must be >= 2, got {}", self.lattice_side)));
        }
        if !(self.max_coverage > 0.0 && self.max_coverage <= 1.0) {
            return Err(KmcError::Config(format!(
                "max coverage must lie in (0, 1], got {}",
                self.max_coverage
            )));
        }
        self.energy.validate()?;
        if self.energy.bonds.label_count() == 0 {
            return Err(KmcError::Config("no edge labels configured".into()));
        }
        // re-validate species against this run's label set
        SpeciesSet::new(self.species.as_slice().to_vec(), self.energy.bonds.label_count())?;
        Ok(())
    }

    /// Largest tile count the coverage cap can produce.
    pub fn max_tiles(&self) -> usize {
        let sites = self.lattice_side * self.lattice_side;
        ((self.max_coverage * sites as f64).ceil() as usize).min(sites)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub depositions: u64,
    pub moves: u64,
    pub rotations: u64,
    pub stalls: u64,
}

impl EventCounts {
    fn record(&mut self, event: &Event) {
        match event {
            Event::Diffused(t) if t.kind.direction().is_some() => self.moves += 1,
            Event::Diffused(_) => self.rotations += 1,
            Event::Deposited { .. } => self.depositions += 1,
            Event::Stalled => self.stalls += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.depositions + self.moves + self.rotations + self.stalls
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub lattice: Lattice,
    pub counts: EventCounts,
    pub seed: u64,
}

fn transitions_of(tile: &TileInstance, acts: &TileActivations, tt0: f64, out: &mut Vec<Transition>) {
    for kind in TransitionKind::ALL {
        let activation = match kind.direction() {
            Some(d) => match acts.moves[d.index()] {
                Some(e) => e,
                None => continue,
            },
            None if kind == TransitionKind::RotCW => acts.rotate_cw,
            None => acts.rotate_ccw,
        };
        out.push(Transition {
            kind,
            tile_pos: tile.pos,
            activation,
            rate: (-activation / tt0).exp(),
        });
    }
}

/// Every feasible transition of the current state, recomputed from scratch.
pub fn enumerate_transitions(lat: &Lattice, model: &EnergyModel) -> Vec<Transition> {
    let mut out = Vec::with_capacity(lat.len() * 6);
    for (id, tile) in lat.tiles().iter().enumerate() {
        transitions_of(tile, &model.tile_activations(lat, id), model.tt0, &mut out);
    }
    out
}

fn effective_deposition(lat: &Lattice, model: &EnergyModel, max_coverage: f64) -> f64 {
    if lat.coverage() < max_coverage {
        model.deposition_rate
    } else {
        0.0
    }
}

fn apply_transition(lat: &mut Lattice, t: &Transition) -> Result<TileId, LatticeError> {
    match (t.kind.direction(), t.kind.rotation()) {
        (Some(d), _) => {
            let to = lat.neighbor(t.tile_pos, d);
            lat.move_tile(t.tile_pos, to)
        }
        (None, Some(r)) => lat.rotate(t.tile_pos, r),
        (None, None) => unreachable!("every kind is a hop or a turn"),
    }
}

/// Fenwick tree over site emptiness, for the k-th empty site in row-major order.
#[derive(Clone, Debug)]
struct EmptySites {
    tree: Vec<u32>,
    count: usize,
}

impl EmptySites {
    fn new(lat: &Lattice) -> Self {
        let n = lat.site_count();
        let mut tree = vec![0u32; n + 1];
        for i in lat.empty_sites() {
            tree[i + 1] += 1;
        }
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        EmptySites {
            tree,
            count: lat.empty_sites().count(),
        }
    }

    fn add(&mut self, site: usize, delta: i32) {
        let mut i = site + 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i64 + delta as i64) as u32;
            i += i & i.wrapping_neg();
        }
        self.count = (self.count as i64 + delta as i64) as usize;
    }

    /// Flat index of the `k`-th (0-based) empty site.
    fn kth(&self, mut k: u32) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0usize;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

fn kth_empty_scan(lat: &Lattice, k: usize) -> Option<usize> {
    lat.empty_sites().nth(k)
}

fn deposit(lat: &mut Lattice, rng: &mut RngStream, pick_site: impl FnOnce(&Lattice, usize) -> usize) -> Result<Event, KmcError> {
    let empty = lat.site_count() - lat.len();
    if empty == 0 {
        return Err(KmcError::NoEmptySite);
    }
    let k = rng.below(empty as u64) as usize;
    let site = pick_site(lat, k);
    let weights: Vec<f64> = lat.species().iter().map(|s| s.concentration).collect();
    let species = lat.species().as_slice()[rng.weighted(&weights)].id;
    let orientation = Orientation::new(rng.below(4) as u8);
    let pos = lat.pos_of(site);
    lat.place(TileInstance::new(species, orientation, pos))?;
    Ok(Event::Deposited {
        pos,
        species,
        orientation,
    })
}

/// One roulette step over an explicit transition list (reference path).
pub fn select_and_apply(
    lat: &mut Lattice,
    model: &EnergyModel,
    transitions: &[Transition],
    max_coverage: f64,
    rng: &mut RngStream,
) -> Result<Event, KmcError> {
    let total: f64 = transitions.iter().map(|t| t.rate).sum();
    if let Some(t) = transitions.iter().find(|t| !t.rate.is_finite()) {
        return Err(KmcError::NonFiniteRate {
            kind: t.kind,
            pos: t.tile_pos,
            rate: t.rate,
        });
    }
    let dep = effective_deposition(lat, model, max_coverage);
    let u = rng.uniform();
    if total == 0.0 && dep == 0.0 {
        return Ok(Event::Stalled);
    }
    let shoot = u * (total + dep);
    let mut counter = 0.0;
    for t in transitions {
        counter += t.rate;
        if counter > shoot {
            apply_transition(lat, t)?;
            return Ok(Event::Diffused(*t));
        }
    }
    if dep == 0.0 {
        // rounding pushed shoot past the last partial sum
        if let Some(t) = transitions.iter().rev().find(|t| t.rate > 0.0) {
            apply_transition(lat, t)?;
            return Ok(Event::Diffused(*t));
        }
    }
    deposit(lat, rng, |l, k| kth_empty_scan(l, k).expect("k < empty count"))
}

/// Binary sum tree over per-tile total rates. Internal nodes are always
/// recomputed as `left + right`, so totals never drift.
#[derive(Clone, Debug)]
struct RateTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl RateTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        RateTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn set(&mut self, leaf: usize, value: f64) {
        let mut i = leaf + self.leaves;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval contains `shoot`, plus the residual.
    fn find(&self, mut shoot: f64) -> (usize, f64) {
        let mut i = 1;
        while i < self.leaves {
            let left = self.nodes[2 * i];
            if shoot < left {
                i = 2 * i;
            } else {
                shoot -= left;
                i = 2 * i + 1;
            }
        }
        (i - self.leaves, shoot)
    }
}

/// Incremental simulation state for one run.
pub struct Simulation {
    config: SimConfig,
    lattice: Lattice,
    rng: RngStream,
    activations: Vec<[f64; 6]>,
    rates: Vec<[f64; 6]>,
    tree: RateTree,
    empty: EmptySites,
    weights: Vec<f64>,
    step: u64,
    counts: EventCounts,
    dirty: Vec<TileId>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, KmcError> {
        config.validate()?;
        let lattice = Lattice::new(config.lattice_side, config.species.clone())?;
        let sites = lattice.site_count();
        let empty = EmptySites::new(&lattice);
        let weights = config.species.iter().map(|s| s.concentration).collect();
        Ok(Simulation {
            rng: RngStream::new(config.seed),
            tree: RateTree::new(sites),
            lattice,
            activations: Vec::new(),
            rates: Vec::new(),
            empty,
            weights,
            step: 0,
            counts: EventCounts::default(),
            dirty: Vec::with_capacity(16),
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn counts(&self) -> EventCounts {
        self.counts
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    /// Sum of all transition rates held in the tree.
    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    /// Transition list as cached by the incremental bookkeeping.
    pub fn cached_transitions(&self) -> Vec<Transition> {
        let mut out = Vec::with_capacity(self.lattice.len() * 6);
        for (id, tile) in self.lattice.tiles().iter().enumerate() {
            for kind in TransitionKind::ALL {
                let k = kind.index();
                if self.activations[id][k].is_finite() {
                    out.push(Transition {
                        kind,
                        tile_pos: tile.pos,
                        activation: self.activations[id][k],
                        rate: self.rates[id][k],
                    });
                }
            }
        }
        out
    }

    /// Sum tree total rebuilt from the cached per-tile rates.
    pub fn rebuilt_total(&self) -> f64 {
        let mut t = RateTree::new(self.lattice.site_count());
        for (id, r) in self.rates.iter().enumerate() {
            t.set(id, r.iter().sum());
        }
        t.total()
    }

    fn refresh(&mut self, id: TileId) {
        let acts = self.config.energy.tile_activations(&self.lattice, id);
        let tt0 = self.config.energy.tt0;
        let mut a = [f64::INFINITY; 6];
        let mut r = [0.0; 6];
        for d in Direction::ALL {
            if let Some(e) = acts.moves[d.index()] {
                a[d.index()] = e;
                r[d.index()] = (-e / tt0).exp();
            }
        }
        a[4] = acts.rotate_cw;
        a[5] = acts.rotate_ccw;
        r[4] = (-a[4] / tt0).exp();
        r[5] = (-a[5] / tt0).exp();
        if id == self.rates.len() {
            self.activations.push(a);
            self.rates.push(r);
        } else {
            self.activations[id] = a;
            self.rates[id] = r;
        }
        self.tree.set(id, r.iter().sum());
    }

    fn mark_around(&mut self, pos: Pos) {
        for d in Direction::ALL {
            if let Some(id) = self.lattice.tile_id_at(self.lattice.neighbor(pos, d)) {
                self.dirty.push(id);
            }
        }
    }

    fn flush_dirty(&mut self) {
        self.dirty.sort_unstable();
        self.dirty.dedup();
        let dirty = std::mem::take(&mut self.dirty);
        for &id in &dirty {
            self.refresh(id);
        }
        self.dirty = dirty;
        self.dirty.clear();
    }

    /// Advance one kMC step.
    pub fn step(&mut self) -> Result<Event, KmcError> {
        let total = self.tree.total();
        if !total.is_finite() {
            return Err(KmcError::Config(format!("total rate became {total}")));
        }
        let dep = effective_deposition(&self.lattice, &self.config.energy, self.config.max_coverage);
        let u = self.rng.uniform();
        self.step += 1;
        let event = if total == 0.0 && dep == 0.0 {
            Event::Stalled
        } else {
            let shoot = u * (total + dep);
            if shoot < total || dep == 0.0 {
                self.diffuse(shoot)?
            } else {
                self.deposit()?
            }
        };
        self.counts.record(&event);
        Ok(event)
    }

    fn diffuse(&mut self, shoot: f64) -> Result<Event, KmcError> {
        let (mut id, mut residual) = self.tree.find(shoot);
        if id >= self.lattice.len() || self.rates[id].iter().all(|&r| r == 0.0) {
            // shoot landed on the upper edge through rounding: last live tile
            id = (0..self.lattice.len())
                .rev()
                .find(|&i| self.rates[i].iter().any(|&r| r > 0.0))
                .expect("positive total implies a live tile");
            residual = f64::INFINITY;
        }
        let rates = self.rates[id];
        let mut acc = 0.0;
        let mut chosen = None;
        for kind in TransitionKind::ALL {
            let r = rates[kind.index()];
            acc += r;
            if r > 0.0 {
                chosen = Some(kind);
                if acc > residual {
                    break;
                }
            }
        }
        let kind = chosen.expect("live tile has a positive rate");
        let pos = self.lattice.tile(id).pos;
        let t = Transition {
            kind,
            tile_pos: pos,
            activation: self.activations[id][kind.index()],
            rate: rates[kind.index()],
        };
        match (kind.direction(), kind.rotation()) {
            (Some(d), _) => {
                let to = self.lattice.neighbor(pos, d);
                self.lattice.move_tile(pos, to)?;
                let (fi, ti) = (self.lattice.index_of(pos), self.lattice.index_of(to));
                self.empty.add(fi, 1);
                self.empty.add(ti, -1);
                self.dirty.push(id);
                self.mark_around(pos);
                self.mark_around(to);
            }
            (None, Some(r)) => {
                self.lattice.rotate(pos, r)?;
                self.dirty.push(id);
                self.mark_around(pos);
            }
            (None, None) => unreachable!(),
        }
        self.flush_dirty();
        Ok(Event::Diffused(t))
    }

    fn deposit(&mut self) -> Result<Event, KmcError> {
        if self.empty.count == 0 {
            return Err(KmcError::NoEmptySite);
        }
        let k = self.rng.below(self.empty.count as u64) as u32;
        let site = self.empty.kth(k);
        let species = self.lattice.species().as_slice()[self.rng.weighted(&self.weights)].id;
        let orientation = Orientation::new(self.rng.below(4) as u8);
        let pos = self.lattice.pos_of(site);
        let id = self.lattice.place(TileInstance::new(species, orientation, pos))?;
        self.empty.add(site, -1);
        self.dirty.push(id);
        self.mark_around(pos);
        self.flush_dirty();
        Ok(Event::Deposited {
            pos,
            species,
            orientation,
        })
    }

    /// Run the remaining configured steps, calling `observer` after each one.
    pub fn run_with(&mut self, mut observer: impl FnMut(u64, &Event, &Lattice)) -> Result<(), KmcError> {
        while self.step < self.config.steps {
            let event = self.step()?;
            observer(self.step, &event, &self.lattice);
        }
        Ok(())
    }

    pub fn into_result(self) -> RunResult {
        RunResult {
            lattice: self.lattice,
            counts: self.counts,
            seed: self.config.seed,
        }
    }
}

/// Execute `config.steps` steps from an empty lattice.
pub fn run(config: SimConfig) -> Result<RunResult, KmcError> {
    let mut sim = Simulation::new(config)?;
    sim.run_with(|_, _, _| {})?;
    Ok(sim.into_result())
}

/// Delimited event log: `step,kind,row,col,activation`.
pub struct EventLog<W: Write> {
    out: W,
}

impl<W: Write> EventLog<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "step,kind,row,col,activation")?;
        Ok(EventLog { out })
    }

    pub fn record(&mut self, step: u64, event: &Event) -> io::Result<()> {
        match event {
            Event::Diffused(t) => writeln!(
                self.out,
                "{step},{},{},{},{}",
                t.kind.name(),
                t.tile_pos.row,
                t.tile_pos.col,
                t.activation
            ),
            Event::Deposited { pos, .. } => writeln!(self.out, "{step},deposit,{},{},", pos.row, pos.col),
            Event::Stalled => writeln!(self.out, "{step},stall,,,"),
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
