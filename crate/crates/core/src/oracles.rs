//! Independent checkers for simulation states.
//!
//! Everything here recomputes its answer from first principles — breadth-
//! first search over the live cell graph, raw entity positions, the color
//! endpoints — without reading the protocol's own routing, coverage, or
//! lock variables (except where the point is to compare those variables
//! against the recomputed truth). Tests freeze expectations against these
//! functions; the runtime harness can evaluate them every round.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::geometry::{distance_to_segment, CellId, Partition};
use crate::protocol::{Color, EntityId, Hops, SystemState};

/// Tolerance for distance comparisons in runtime checks: violations must
/// exceed the geometric epsilon by a clear margin before they count.
pub const CHECK_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Routing ground truth
// ---------------------------------------------------------------------------

/// True hop distance of every cell to color `c`'s target over live cells,
/// by breadth-first search; infinite for failed or disconnected cells.
pub fn target_distance(s: &SystemState, c: Color) -> Vec<Hops> {
    let target = s.config().colors[c.idx()].target;
    let mask = s.failed_mask();
    s.partition()
        .bfs_hops(target, &mask)
        .into_iter()
        .map(|d| if d == u32::MAX { Hops::INF } else { Hops(d) })
        .collect()
}

/// Which cells currently have a live route to color `c`'s target.
pub fn target_connected(s: &SystemState, c: Color) -> Vec<bool> {
    target_distance(s, c)
        .into_iter()
        .map(Hops::is_finite)
        .collect()
}

/// All descent edges toward color `c`'s target: ordered pairs `(i, j)` of
/// live neighboring cells whose true distances satisfy
/// `rho(j) = rho(i) - 1`.
pub fn routing_graph(s: &SystemState, c: Color) -> Vec<(CellId, CellId)> {
    let rho = target_distance(s, c);
    let mut edges = Vec::new();
    for i in s.partition().ids() {
        if s.cells[i.idx()].failed || !rho[i.idx()].is_finite() {
            continue;
        }
        for &j in s.partition().neighbors(i) {
            if s.cells[j.idx()].failed {
                continue;
            }
            if rho[j.idx()].is_finite() && rho[j.idx()].0 + 1 == rho[i.idx()].0 {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// The descent neighbor a stabilized router would pick from `i` toward
/// `c`'s target: the smallest-id neighbor one hop closer. `None` at the
/// target itself and wherever no route exists.
pub fn route_successor(s: &SystemState, c: Color, i: CellId) -> Option<CellId> {
    let rho = target_distance(s, c);
    route_successor_with(s, &rho, i)
}

fn route_successor_with(s: &SystemState, rho: &[Hops], i: CellId) -> Option<CellId> {
    if s.cells[i.idx()].failed {
        return None;
    }
    let h = rho[i.idx()];
    if !h.is_finite() || h.0 == 0 {
        return None;
    }
    s.partition()
        .neighbors(i)
        .iter()
        .copied()
        .find(|&j| !s.cells[j.idx()].failed && rho[j.idx()] == Hops(h.0 - 1))
}

/// The cells color `c`'s traffic can reach or stand on, with the descent
/// edge leaving each of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityGraph {
    pub vertices: BTreeSet<CellId>,
    /// `(member, successor)` pairs for every member that has a successor.
    pub edges: BTreeSet<(CellId, CellId)>,
}

/// Least set containing color `c`'s live source, every live cell occupied
/// by `c` entities, and the successor chain of every member toward the
/// target.
pub fn entity_graph(s: &SystemState, c: Color) -> EntityGraph {
    let rho = target_distance(s, c);
    let spec = &s.config().colors[c.idx()];
    let mut frontier: Vec<CellId> = Vec::new();
    let mut vertices = BTreeSet::new();
    let push = |id: CellId, vertices: &mut BTreeSet<CellId>, frontier: &mut Vec<CellId>| {
        if !s.cells[id.idx()].failed && vertices.insert(id) {
            frontier.push(id);
        }
    };
    push(spec.source, &mut vertices, &mut frontier);
    for i in s.partition().ids() {
        let cs = &s.cells[i.idx()];
        if !cs.entities.is_empty() && cs.etype == Some(c) {
            push(i, &mut vertices, &mut frontier);
        }
    }
    let mut edges = BTreeSet::new();
    while let Some(i) = frontier.pop() {
        if let Some(j) = route_successor_with(s, &rho, i) {
            edges.insert((i, j));
            push(j, &mut vertices, &mut frontier);
        }
    }
    EntityGraph { vertices, edges }
}

/// Cells lying on both color `c`'s traffic graph and at least one other
/// color's: the intersection that needs locking for `c`.
pub fn color_shared_cells(s: &SystemState, c: Color) -> BTreeSet<CellId> {
    let mine = entity_graph(s, c).vertices;
    let mut shared = BTreeSet::new();
    for d in 0..s.n_colors() {
        if d == c.idx() {
            continue;
        }
        let theirs = entity_graph(s, Color(d as u16)).vertices;
        shared.extend(mine.intersection(&theirs).copied());
    }
    shared
}

/// Colors entangled with `c`: the connected component of the "traffic
/// graphs intersect" relation containing `c`, minus `c` itself.
pub fn shared_colors(s: &SystemState, c: Color) -> BTreeSet<Color> {
    let ncol = s.n_colors();
    let graphs: Vec<BTreeSet<CellId>> = (0..ncol)
        .map(|d| entity_graph(s, Color(d as u16)).vertices)
        .collect();
    let mut member = vec![false; ncol];
    member[c.idx()] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for a in 0..ncol {
            if member[a] {
                continue;
            }
            let touches = (0..ncol).any(|b| {
                member[b] && !graphs[a].is_disjoint(&graphs[b])
            });
            if touches {
                member[a] = true;
                changed = true;
            }
        }
    }
    (0..ncol)
        .filter(|&d| member[d] && d != c.idx())
        .map(|d| Color(d as u16))
        .collect()
}

// ---------------------------------------------------------------------------
// Runtime invariants
// ---------------------------------------------------------------------------

/// One broken invariant, with enough context to reproduce it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error(
        "cell {cell}: entities {a} and {b} are {distance:.6} apart, below the safe {required:.6}"
    )]
    Separation {
        cell: CellId,
        a: EntityId,
        b: EntityId,
        distance: f64,
        required: f64,
    },
    #[error("cell {cell}: holds entities of more than one color")]
    MixedColors { cell: CellId },
    #[error("cell {cell}: occupancy marker disagrees with the entities present")]
    OccupancyMarker { cell: CellId },
    #[error("entity {entity} appears on both cell {first} and cell {second}")]
    DuplicateEntity {
        entity: EntityId,
        first: CellId,
        second: CellId,
    },
    #[error(
        "cell {cell}: entity {entity} sits {depth:.6} from the boundary, disc of radius {radius:.6} pokes out"
    )]
    Containment {
        cell: CellId,
        entity: EntityId,
        depth: f64,
        radius: f64,
    },
    #[error(
        "color {color}: {spawned} spawned but {consumed} consumed + {alive} alive"
    )]
    Conservation {
        color: Color,
        spawned: u64,
        consumed: u64,
        alive: u64,
    },
    #[error(
        "cell {cell} signals {to} while its entity {entity} stands {distance:.6} from the crossing side (clearance {required:.6})"
    )]
    SignalGate {
        cell: CellId,
        to: CellId,
        entity: EntityId,
        distance: f64,
        required: f64,
    },
    #[error("cell {cell} signals {to}, which is not a neighbor")]
    SignalTarget { cell: CellId, to: CellId },
    #[error(
        "round {round}: cell {cell} color {color} distance reads {have} but the graph says {want}"
    )]
    DistanceNotConverged {
        round: u64,
        cell: CellId,
        color: Color,
        have: Hops,
        want: Hops,
    },
    #[error(
        "round {round}: cell {cell} color {color} next-hop reads {have:?} but the graph says {want:?}"
    )]
    NextHopNotConverged {
        round: u64,
        cell: CellId,
        color: Color,
        have: Option<CellId>,
        want: Option<CellId>,
    },
    #[error(
        "round {round}: cell {cell} color {color} coverage view disagrees with the traffic graph ({missing} missing, {extra} extra)"
    )]
    CoverageNotConverged {
        round: u64,
        cell: CellId,
        color: Color,
        missing: usize,
        extra: usize,
    },
    #[error(
        "round {round}: cell {cell} color {color} shared-cell view disagrees with the true intersection ({missing} missing, {extra} extra)"
    )]
    SharedCellsNotConverged {
        round: u64,
        cell: CellId,
        color: Color,
        missing: usize,
        extra: usize,
    },
    #[error("stabilization check needs the trace to reach round {needed}, got {got}")]
    TraceTooShort { needed: u64, got: u64 },
}

/// Outcome of evaluating the safety invariants on one state.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub round: u64,
    pub violations: Vec<Violation>,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluate the standing safety invariants on a state: pairwise disc
/// separation per cell, single color per cell, global uniqueness of
/// entities, disc containment, and entity conservation per color.
pub fn check_invariants(s: &SystemState) -> InvariantReport {
    let mut violations = Vec::new();
    let params = &s.config().params;
    let min_sep = params.min_separation();
    let mut seen: BTreeMap<EntityId, CellId> = BTreeMap::new();
    let mut alive = vec![0u64; s.n_colors()];

    for i in s.partition().ids() {
        let cs = &s.cells[i.idx()];
        let colors: BTreeSet<Color> = cs.entities.iter().map(|e| e.color).collect();
        if colors.len() > 1 {
            violations.push(Violation::MixedColors { cell: i });
        }
        let expected = cs.entities.first().map(|e| e.color);
        if cs.etype != expected {
            violations.push(Violation::OccupancyMarker { cell: i });
        }
        for e in &cs.entities {
            alive[e.color.idx()] += 1;
            if let Some(&first) = seen.get(&e.id) {
                violations.push(Violation::DuplicateEntity {
                    entity: e.id,
                    first,
                    second: i,
                });
            } else {
                seen.insert(e.id, i);
            }
            let depth = s.partition().cell(i).inner_depth(e.center);
            if depth < params.l - CHECK_SLACK {
                violations.push(Violation::Containment {
                    cell: i,
                    entity: e.id,
                    depth,
                    radius: params.l,
                });
            }
        }
        for (ai, a) in cs.entities.iter().enumerate() {
            for b in &cs.entities[ai + 1..] {
                let dist = (a.center - b.center).norm();
                if dist < min_sep - CHECK_SLACK {
                    violations.push(Violation::Separation {
                        cell: i,
                        a: a.id,
                        b: b.id,
                        distance: dist,
                        required: min_sep,
                    });
                }
            }
        }
    }

    for c in 0..s.n_colors() {
        if s.spawned[c] != s.consumed[c] + alive[c] {
            violations.push(Violation::Conservation {
                color: Color(c as u16),
                spawned: s.spawned[c],
                consumed: s.consumed[c],
                alive: alive[c],
            });
        }
    }

    InvariantReport {
        round: s.round,
        violations,
    }
}

/// Check that every granted signal had a clear landing strip: no entity of
/// the granting cell within `3d` of the side being crossed. Meaningful on
/// a state observed right after the signal phase, before entities move.
pub fn check_signal_gate(s: &SystemState) -> Vec<Violation> {
    let mut violations = Vec::new();
    let clearance = 3.0 * s.config().params.d();
    for i in s.partition().ids() {
        let cs = &s.cells[i.idx()];
        if cs.failed {
            continue;
        }
        let Some(to) = cs.signal else {
            continue;
        };
        let Ok(side) = s.partition().shared_side(i, to) else {
            violations.push(Violation::SignalTarget { cell: i, to });
            continue;
        };
        for e in &cs.entities {
            let dist = distance_to_segment(e.center, side.segment.0, side.segment.1);
            if dist < clearance - CHECK_SLACK {
                violations.push(Violation::SignalGate {
                    cell: i,
                    to,
                    entity: e.id,
                    distance: dist,
                    required: clearance,
                });
            }
        }
    }
    violations
}

// ---------------------------------------------------------------------------
// Progress measure
// ---------------------------------------------------------------------------

/// The two-part progress measure of a live entity: hops to its target and
/// remaining travel to the point where its movement ray meets the line of
/// the side it will cross next. Lexicographically smaller is closer to
/// delivery; any granted movement strictly decreases it. `None` when the
/// entity does not exist or has no live route.
pub fn ranking(s: &SystemState, entity: EntityId) -> Option<(Hops, f64)> {
    let (cell, e) = s.entities().find(|(_, e)| e.id == entity)?;
    let rho = target_distance(s, e.color);
    let h = rho[cell.idx()];
    if !h.is_finite() {
        return None;
    }
    let succ = route_successor_with(s, &rho, cell)?;
    let side = s.partition().shared_side(cell, succ).ok()?;
    let u = s.partition().move_vector(cell, succ).ok()?;
    let dir = side.direction();
    let denom = u.cross(dir);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (side.segment.0 - e.center).cross(dir) / denom;
    Some((h, t.abs()))
}

// ---------------------------------------------------------------------------
// Convergence after failures
// ---------------------------------------------------------------------------

/// Verify self-stabilization over a recorded trace of consecutive states
/// (`trace[k]` after `k` completed rounds), given the round after which no
/// further failures or recoveries occurred.
///
/// Writing `rho` for the true hop distances of the settled graph and `D`
/// for its diameter, the checks are, for every color and live cell:
///
/// - distances match `rho` from round `last_fail_round + rho(i)` on
///   (route-connected cells) and stay matched;
/// - next-hops match the smallest-id descent neighbor from round
///   `last_fail_round + 2D` on;
/// - gossiped coverage views equal that round's true traffic graph from
///   round `last_fail_round + 2D` on;
/// - shared-cell views equal that round's true intersection from round
///   `last_fail_round + 2D` on.
pub fn check_stabilization(trace: &[SystemState], last_fail_round: u64) -> Vec<Violation> {
    let mut violations = Vec::new();
    let Some(settled) = trace.last() else {
        violations.push(Violation::TraceTooShort { needed: 1, got: 0 });
        return violations;
    };
    let diameter = settled.coverage_ttl() as u64;
    let window = last_fail_round + 2 * diameter;
    if settled.round < window {
        violations.push(Violation::TraceTooShort {
            needed: window,
            got: settled.round,
        });
        return violations;
    }
    let ncol = settled.n_colors();
    let rho: Vec<Vec<Hops>> = (0..ncol)
        .map(|c| target_distance(settled, Color(c as u16)))
        .collect();

    for state in trace {
        if state.round < last_fail_round {
            continue;
        }
        for c in 0..ncol {
            let color = Color(c as u16);
            for i in state.partition().ids() {
                if state.cells[i.idx()].failed {
                    continue;
                }
                let want = rho[c][i.idx()];
                if want.is_finite() && state.round >= last_fail_round + want.0 as u64 {
                    let have = state.cells[i.idx()].dist[c];
                    if have != want {
                        violations.push(Violation::DistanceNotConverged {
                            round: state.round,
                            cell: i,
                            color,
                            have,
                            want,
                        });
                    }
                }
                if state.round >= window {
                    let want_next = route_successor_with(state, &rho[c], i);
                    let have_next = state.cells[i.idx()].next[c];
                    if have_next != want_next {
                        violations.push(Violation::NextHopNotConverged {
                            round: state.round,
                            cell: i,
                            color,
                            have: have_next,
                            want: want_next,
                        });
                    }
                }
            }
            if state.round >= window {
                let truth = entity_graph(state, color).vertices;
                let true_shared = color_shared_cells(state, color);
                for i in state.partition().ids() {
                    if state.cells[i.idx()].failed {
                        continue;
                    }
                    let view = state.coverage_view(i, color);
                    if view != truth {
                        violations.push(Violation::CoverageNotConverged {
                            round: state.round,
                            cell: i,
                            color,
                            missing: truth.difference(&view).count(),
                            extra: view.difference(&truth).count(),
                        });
                    }
                    let shared_view = &state.cells[i.idx()].pint[c];
                    if *shared_view != true_shared {
                        violations.push(Violation::SharedCellsNotConverged {
                            round: state.round,
                            cell: i,
                            color,
                            missing: true_shared.difference(shared_view).count(),
                            extra: shared_view.difference(&true_shared).count(),
                        });
                    }
                }
            }
        }
    }
    violations
}

/// Convenience wrapper exposing the partition used by a state (handy for
/// callers holding only oracle results).
pub fn partition_of(s: &SystemState) -> &Partition {
    s.partition()
}
