//! Round-based execution of the traffic-control protocol.
//!
//! The system advances in synchronous rounds. Every round, each live cell
//! runs the same five phases against the values its neighbors published in
//! the previous round:
//!
//! 1. **route** — recompute hop distances and next-hop pointers toward each
//!    color's target (distance-vector style, saturating at infinity);
//! 2. **lock** — gossip per-color route coverage, derive which cells are
//!    shared between colors, and rotate the intersection locks;
//! 3. **signal** — pick at most one waiting neighbor and grant it permission
//!    to send its entities across, if the landing strip is clear;
//! 4. **move** — translate entity discs toward their next hop where a signal
//!    was granted, crossing or consuming those that reach the boundary;
//! 5. **spawn** — sources inject new entities at free lattice sites.
//!
//! Cells fail and recover only between rounds ([`SystemState::fail`],
//! [`SystemState::recover`]). A failed cell freezes: it publishes infinite
//! distances, never signals, and its entities stay put until recovery.

mod lock;
mod movement;
mod route;
mod signal;
mod spawn;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbitration::ArbitrationState;
use crate::geometry::{
    validate_partition, CellId, GeometryError, Partition, Point2, RegionParams, Vec2, GEOM_EPS,
};

/// Sentinel age meaning "no entry" in a gossiped coverage table.
pub const AGE_NONE: u16 = u16::MAX;

// ---------------------------------------------------------------------------
// Identifiers and small value types
// ---------------------------------------------------------------------------

/// Index of a color in the scenario's color list.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Color(pub u16);

impl Color {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "color#{}", self.0)
    }
}

/// Unique identifier of an entity, assigned at spawn time and never reused.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entity#{}", self.0)
    }
}

/// A hop count that saturates at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hops(pub u32);

impl Hops {
    pub const INF: Hops = Hops(u32::MAX);

    #[inline]
    pub fn is_finite(self) -> bool {
        self != Hops::INF
    }

    /// `self + 1`, staying at infinity once there.
    #[inline]
    pub fn bump(self) -> Hops {
        if self.is_finite() {
            Hops(self.0.saturating_add(1).min(u32::MAX - 1))
        } else {
            Hops::INF
        }
    }
}

impl fmt::Display for Hops {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_finite() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "inf")
        }
    }
}

/// A moving disc of radius `l` identified by `id`, shown as its center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub color: Color,
    pub center: Point2,
}

/// One color's endpoints: entities of this color appear at `source` and are
/// consumed at `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorSpec {
    pub name: String,
    pub source: CellId,
    pub target: CellId,
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

/// Fully resolved parameters of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Disc radius `l` and minimum spacing `rs`.
    pub params: RegionParams,
    /// Per-round translation distance `v`; must satisfy `0 < v <= l` so a
    /// disc cannot step across the crossing band without being seen in it.
    pub speed: f64,
    /// Number of rounds a full run simulates.
    pub horizon: u64,
    /// Per-round failure probability of each live, unprotected cell.
    pub p_fail: f64,
    /// Per-round recovery probability of each failed cell.
    pub p_recover: f64,
    pub colors: Vec<ColorSpec>,
    /// Maximum number of entities a source adds per round.
    pub spawn_per_round: u32,
    /// Consecutive rounds of waiting cross-traffic after which a source
    /// skips spawning in favor of letting that traffic through.
    pub spawn_backoff: u32,
    /// Idle-release timeout and admission window of the intersection locks.
    pub lock_timeout: u32,
    /// Whether target cells are exempt from failures.
    pub protect_targets: bool,
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// Per-cell protocol state
// ---------------------------------------------------------------------------

/// The shared and private variables of one cell. Vectors indexed by color
/// run over the scenario's color list; vectors of ages run over cell
/// indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub failed: bool,
    /// Entities currently on this cell; all share one color.
    pub entities: Vec<Entity>,
    /// Color of the entities on this cell, `None` when empty.
    pub etype: Option<Color>,
    /// Neighbors with entities waiting to cross into this cell, for the
    /// color served this round. Ascending by id.
    pub neprev: Vec<CellId>,
    /// The waiting neighbor currently first in line.
    pub token: Option<CellId>,
    /// Neighbor granted permission to cross this round, if any.
    pub signal: Option<CellId>,
    /// Most recently served color, driving the round-robin color choice of
    /// an empty cell.
    pub last_color: Option<Color>,
    /// Consecutive rounds with at least one waiting neighbor.
    pub neprev_streak: u32,
    /// Hop distance to each color's target.
    pub dist: Vec<Hops>,
    /// Neighbor one hop closer to each color's target.
    pub next: Vec<Option<CellId>>,
    /// Whether this cell holds the intersection lock for each color.
    pub lock: Vec<bool>,
    /// Gossiped route coverage: for each color, the age of this cell's
    /// knowledge that a given cell lies on that color's traffic routes
    /// (`AGE_NONE` = not known). Entries older than the graph diameter are
    /// treated as expired.
    pub path: Vec<Vec<u16>>,
    /// Cells this cell believes are shared between the given color and some
    /// other color (the intersection, from this cell's viewpoint).
    pub pint: Vec<BTreeSet<CellId>>,
    /// Colors whose routes are entangled with the given color's (connected
    /// component of the overlap relation, minus the color itself).
    pub lockcolors: Vec<BTreeSet<Color>>,
}

impl CellState {
    fn fresh(n_cells: usize, n_colors: usize) -> Self {
        CellState {
            failed: false,
            entities: Vec::new(),
            etype: None,
            neprev: Vec::new(),
            token: None,
            signal: None,
            last_color: None,
            neprev_streak: 0,
            dist: vec![Hops::INF; n_colors],
            next: vec![None; n_colors],
            lock: vec![false; n_colors],
            path: vec![vec![AGE_NONE; n_cells]; n_colors],
            pint: vec![BTreeSet::new(); n_colors],
            lockcolors: vec![BTreeSet::new(); n_colors],
        }
    }
}

// ---------------------------------------------------------------------------
// System state
// ---------------------------------------------------------------------------

/// Phase boundaries inside one round, in execution order. Observers hooked
/// into [`SystemState::update_with`] are called after each phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePhase {
    Route,
    Lock,
    Signal,
    Move,
    Spawn,
}

/// The complete simulation state after some number of rounds.
#[derive(Debug, Clone)]
pub struct SystemState {
    /// Rounds completed so far.
    pub round: u64,
    /// Per-cell protocol state, indexed by cell index (id minus one).
    pub cells: Vec<CellState>,
    /// Intersection-lock rotation state.
    pub arb: ArbitrationState,
    /// Entities delivered to their target so far, per color.
    pub consumed: Vec<u64>,
    /// Entities injected so far, per color.
    pub spawned: Vec<u64>,
    /// Failure events applied so far.
    pub n_failures: u64,
    /// Recovery events applied so far.
    pub n_recoveries: u64,
    partition: Arc<Partition>,
    config: Arc<ScenarioConfig>,
    rng: ChaCha8Rng,
    next_entity_id: u64,
    /// Diameter of the live communication graph as of the last update (or
    /// the last explicit refresh); bounds the age at which gossiped coverage
    /// entries expire.
    diameter: u32,
    /// Set by fail/recover; the diameter is recomputed at the start of the
    /// next update so bursts of topology changes cost one recomputation.
    diameter_stale: bool,
    /// First round in which sources may spawn, leaving the routing and
    /// gossip layers time to converge from the initial state.
    warmup: u64,
    /// Candidate spawn positions per color, nearest the source centroid
    /// first.
    spawn_sites: Vec<Vec<Point2>>,
}

impl PartialEq for SystemState {
    fn eq(&self, other: &Self) -> bool {
        self.round == other.round
            && self.cells == other.cells
            && self.arb == other.arb
            && self.consumed == other.consumed
            && self.spawned == other.spawned
            && self.n_failures == other.n_failures
            && self.n_recoveries == other.n_recoveries
            && self.rng == other.rng
            && self.next_entity_id == other.next_entity_id
            && self.diameter == other.diameter
            && self.diameter_stale == other.diameter_stale
            && self.warmup == other.warmup
            && *self.partition == *other.partition
            && *self.config == *other.config
    }
}

/// Build the round-zero state for a validated partition and configuration.
///
/// All distances start at infinity except each target's distance to itself;
/// every other variable starts empty. Rejects configurations whose geometry
/// fails validation or whose parameters are inconsistent, listing every
/// violation found.
pub fn initial_state(
    partition: Partition,
    config: ScenarioConfig,
) -> Result<SystemState, ProtocolError> {
    let mut problems: Vec<String> = Vec::new();

    let report = validate_partition(&partition, &config.params);
    if !report.all_passed() {
        for (name, outcome) in report.checks() {
            for failure in &outcome.failures {
                problems.push(format!("partition {name}: {failure}"));
            }
        }
    }

    if !(config.speed > 0.0) {
        problems.push(format!("v must be positive (got {})", config.speed));
    } else if config.speed > config.params.l {
        problems.push(format!(
            "v must be < l (got v = {}, l = {})",
            config.speed, config.params.l
        ));
    }
    for (label, p) in [("p_f", config.p_fail), ("p_r", config.p_recover)] {
        if !(0.0..=1.0).contains(&p) {
            problems.push(format!("{label} must lie in [0, 1] (got {p})"));
        }
    }
    if config.colors.is_empty() {
        problems.push("at least one color is required".to_string());
    }
    let mut seen_names = BTreeSet::new();
    for spec in &config.colors {
        if spec.name.is_empty() {
            problems.push("color names must be nonempty".to_string());
        }
        if !seen_names.insert(spec.name.clone()) {
            problems.push(format!("duplicate color name {:?}", spec.name));
        }
        for (role, id) in [("source", spec.source), ("target", spec.target)] {
            if !partition.contains_id(id) {
                problems.push(format!(
                    "color {:?}: {} cell {} does not exist",
                    spec.name, role, id
                ));
            }
        }
        if spec.source == spec.target {
            problems.push(format!(
                "color {:?}: source and target must be distinct cells",
                spec.name
            ));
        }
    }
    if config.lock_timeout == 0 {
        problems.push("lock_timeout must be at least 1".to_string());
    }

    let mut spawn_sites = Vec::with_capacity(config.colors.len());
    for spec in &config.colors {
        if partition.contains_id(spec.source) {
            let sites = lattice_sites(&partition, spec.source, &config.params);
            if sites.is_empty() {
                problems.push(format!(
                    "color {:?}: source cell {} cannot hold a disc of radius {}",
                    spec.name, spec.source, config.params.l
                ));
            }
            spawn_sites.push(sites);
        } else {
            spawn_sites.push(Vec::new());
        }
    }

    if !problems.is_empty() {
        return Err(ProtocolError::InvalidConfig(problems));
    }

    let n = partition.n_cells();
    let ncol = config.colors.len();
    let mut cells = vec![CellState::fresh(n, ncol); n];
    for (c, spec) in config.colors.iter().enumerate() {
        cells[spec.target.idx()].dist[c] = Hops(0);
    }
    let diameter = partition.graph_diameter(&[]).max(1);
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(SystemState {
        round: 0,
        cells,
        arb: ArbitrationState::new(config.lock_timeout),
        consumed: vec![0; ncol],
        spawned: vec![0; ncol],
        n_failures: 0,
        n_recoveries: 0,
        partition: Arc::new(partition),
        config: Arc::new(config),
        rng,
        next_entity_id: 0,
        diameter,
        diameter_stale: false,
        warmup: 2 * diameter as u64 + 2,
        spawn_sites,
    })
}

/// Candidate spawn positions in a cell: the points of a square lattice of
/// pitch `2l + rs` anchored at the centroid whose discs fit inside the
/// cell, ordered nearest the centroid first.
fn lattice_sites(partition: &Partition, id: CellId, params: &RegionParams) -> Vec<Point2> {
    let cell = partition.cell(id);
    let anchor = cell.centroid();
    let step = params.min_separation();
    let reach = cell
        .vertices
        .iter()
        .map(|&v| (v - anchor).norm())
        .fold(0.0_f64, f64::max);
    let radius = (reach / step).ceil() as i32;
    let mut ranked: Vec<(i32, i32, i32)> = Vec::new();
    for k in -radius..=radius {
        for m in -radius..=radius {
            ranked.push((k.abs() + m.abs(), k, m));
        }
    }
    ranked.sort();
    let mut sites = Vec::new();
    for (_, k, m) in ranked {
        let p = anchor + Vec2::new(k as f64 * step, m as f64 * step);
        if cell.inner_depth(p) >= params.l - GEOM_EPS {
            sites.push(p);
        }
    }
    sites
}

impl SystemState {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub(crate) fn partition_arc(&self) -> Arc<Partition> {
        Arc::clone(&self.partition)
    }

    pub(crate) fn config_arc(&self) -> Arc<ScenarioConfig> {
        Arc::clone(&self.config)
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_colors(&self) -> usize {
        self.config.colors.len()
    }

    /// Age beyond which gossiped coverage entries are considered expired:
    /// the diameter of the current live graph.
    pub fn coverage_ttl(&self) -> u32 {
        self.diameter
    }

    /// First round in which sources spawn.
    pub fn warmup_rounds(&self) -> u64 {
        self.warmup
    }

    pub fn is_target(&self, id: CellId) -> bool {
        self.config.colors.iter().any(|s| s.target == id)
    }

    pub fn failed_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.failed).collect()
    }

    /// All live entities with the cell they sit on.
    pub fn entities(&self) -> impl Iterator<Item = (CellId, &Entity)> + '_ {
        self.cells.iter().enumerate().flat_map(|(idx, cs)| {
            cs.entities
                .iter()
                .map(move |e| (CellId::from_idx(idx), e))
        })
    }

    /// Number of entities currently on cells.
    pub fn entity_count(&self) -> usize {
        self.cells.iter().map(|c| c.entities.len()).sum()
    }

    /// The cells of `c`'s traffic routes as seen by cell `i` (live entries
    /// of its gossiped coverage table).
    pub fn coverage_view(&self, i: CellId, c: Color) -> BTreeSet<CellId> {
        let ttl = self.diameter as u16;
        let ages = &self.cells[i.idx()].path[c.idx()];
        ages.iter()
            .enumerate()
            .filter(|&(k, &a)| a <= ttl && !self.cells[k].failed)
            .map(|(k, _)| CellId::from_idx(k))
            .collect()
    }

    pub(crate) fn alloc_entity_id(&mut self) -> EntityId {
        let id = EntityId(self.next_entity_id);
        self.next_entity_id += 1;
        id
    }

    /// Advance one full round.
    pub fn update(&mut self) -> Result<(), ProtocolError> {
        self.update_with(|_, _| {})
    }

    /// Advance one full round, calling `observe` after each phase so
    /// callers can check phase-specific conditions (for example that every
    /// granted signal had a clear landing strip at the moment of granting).
    pub fn update_with<F>(&mut self, mut observe: F) -> Result<(), ProtocolError>
    where
        F: FnMut(&SystemState, UpdatePhase),
    {
        if self.diameter_stale {
            self.refresh_diameter();
        }
        route::route_step(self);
        observe(self, UpdatePhase::Route);
        lock::lock_step(self);
        observe(self, UpdatePhase::Lock);
        signal::signal_step(self);
        observe(self, UpdatePhase::Signal);
        movement::move_step(self)?;
        observe(self, UpdatePhase::Move);
        spawn::spawn_step(self);
        observe(self, UpdatePhase::Spawn);
        Ok(())
    }

    /// Crash a cell between rounds. Its distances become infinite, its
    /// next-hop pointers disappear, and its entities stay in place until
    /// recovery. Target cells are refused while `protect_targets` is set.
    pub fn fail(&mut self, id: CellId) -> Result<(), ProtocolError> {
        if !self.partition.contains_id(id) {
            return Err(ProtocolError::UnknownCell(id));
        }
        if self.cells[id.idx()].failed {
            return Err(ProtocolError::AlreadyFailed(id));
        }
        if self.config.protect_targets && self.is_target(id) {
            return Err(ProtocolError::ProtectedTarget(id));
        }
        let cell = &mut self.cells[id.idx()];
        cell.failed = true;
        for d in &mut cell.dist {
            *d = Hops::INF;
        }
        for nx in &mut cell.next {
            *nx = None;
        }
        self.n_failures += 1;
        self.diameter_stale = true;
        Ok(())
    }

    /// Bring a failed cell back. A recovered target immediately publishes
    /// distance zero for its own color again.
    pub fn recover(&mut self, id: CellId) -> Result<(), ProtocolError> {
        if !self.partition.contains_id(id) {
            return Err(ProtocolError::UnknownCell(id));
        }
        if !self.cells[id.idx()].failed {
            return Err(ProtocolError::NotFailed(id));
        }
        self.cells[id.idx()].failed = false;
        for (c, spec) in self.config.colors.iter().enumerate() {
            if spec.target == id {
                self.cells[id.idx()].dist[c] = Hops(0);
            }
        }
        self.n_recoveries += 1;
        self.diameter_stale = true;
        Ok(())
    }

    /// Recompute the live-graph diameter immediately instead of waiting for
    /// the next update (useful before reading [`coverage_ttl`] after manual
    /// fail/recover calls).
    ///
    /// [`coverage_ttl`]: SystemState::coverage_ttl
    pub fn refresh_diameter(&mut self) {
        let mask = self.failed_mask();
        self.diameter = self.partition.graph_diameter(&mask).max(1);
        self.diameter_stale = false;
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid scenario configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),
    #[error("unknown cell {0}")]
    UnknownCell(CellId),
    #[error("cell {0} is already failed")]
    AlreadyFailed(CellId),
    #[error("cell {0} is not failed")]
    NotFailed(CellId),
    #[error("cell {0} is a protected target and cannot fail")]
    ProtectedTarget(CellId),
    #[error("entities of different colors would mix on cell {cell}")]
    ColorMixTransfer { cell: CellId },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
