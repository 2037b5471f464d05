//! Color-lock arbitration for traffic intersections.
//!
//! When the routes of several colors run through common cells, those cells
//! form an intersection that only one color may occupy at a time. This
//! module tracks the *overlap groups* — connected components of the "shares
//! a cell" relation between colors — and rotates an exclusive lock through
//! each group's colors.
//!
//! The rotation is a deterministic, globally evaluated emulation of a
//! distributed mutual-exclusion round: because the simulation advances all
//! cells in lockstep, the outcome of a real token-circulation protocol can
//! be computed directly. The emulation preserves the properties the rest of
//! the system depends on: at most one holder per group, every waiting color
//! is eventually served, and each cycle serves every color exactly once
//! before any repeat.
//!
//! Two timing details model the cost of switching a real intersection:
//!
//! - a holder keeps the lock until its traffic has crossed and the shared
//!   cells are empty again (or until `lock_timeout` idle rounds prove it has
//!   no traffic), and only admits *new* entities into the intersection while
//!   its tenure is below `lock_timeout` — otherwise a steady stream would
//!   keep the intersection occupied forever and starve the other colors;
//! - after a release, the lock stays unassigned for a short handover
//!   cooldown, standing in for the re-initiation latency of the distributed
//!   mutual-exclusion rounds the emulation replaces.

use crate::protocol::Color;
use std::collections::BTreeSet;

use crate::geometry::CellId;

/// Rounds the lock stays unassigned between a release and the next grant.
pub const HANDOVER_COOLDOWN: u32 = 4;

/// One connected component of colors whose routes overlap, together with
/// the rotation state of its lock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapGroup {
    /// Colors in the component, ascending.
    pub colors: BTreeSet<Color>,
    /// Union of the pairwise route intersections within the component.
    pub shared_cells: BTreeSet<CellId>,
    /// Color currently holding the lock, if any.
    pub holder: Option<Color>,
    /// Colors already served in the current rotation cycle.
    pub exclusion: BTreeSet<Color>,
    /// Whether the holder's entities have reached the shared cells since
    /// the grant.
    pub occupied_since_grant: bool,
    /// Consecutive rounds the shared cells have been empty since the grant.
    pub empty_streak: u32,
    /// Rounds since the current holder was granted the lock.
    pub tenure: u32,
    /// Remaining handover rounds before the next grant may happen.
    pub cooldown: u32,
}

/// All overlap groups of the current round plus the rotation parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArbitrationState {
    pub groups: Vec<OverlapGroup>,
    /// Idle-release timeout and admission window, in rounds.
    pub lock_timeout: u32,
}

impl ArbitrationState {
    pub fn new(lock_timeout: u32) -> Self {
        ArbitrationState {
            groups: Vec::new(),
            lock_timeout,
        }
    }

    /// The group containing `c`, if any.
    pub fn group_of(&self, c: Color) -> Option<&OverlapGroup> {
        self.groups.iter().find(|g| g.colors.contains(&c))
    }

    /// Whether color `c` currently holds its group's lock.
    pub fn holds_lock(&self, c: Color) -> bool {
        self.group_of(c).map_or(false, |g| g.holder == Some(c))
    }

    /// Whether color `c` may admit *new* entities into the shared cells:
    /// it holds the lock and its tenure is still inside the admission
    /// window. Entities already inside may keep moving under the lock
    /// alone, so the intersection can drain.
    pub fn admits(&self, c: Color) -> bool {
        self.group_of(c).map_or(true, |g| {
            g.holder == Some(c) && g.tenure < self.lock_timeout
        })
    }

    /// Recompute the groups from per-color route vertex sets, carrying
    /// rotation state over from the previous round, then run the
    /// release/grant step against the current occupancy.
    ///
    /// `occupied` reports, for a set of cells, which colors currently have
    /// entities on any of them.
    pub fn step<F>(&mut self, vertex_sets: &[BTreeSet<CellId>], occupied: F)
    where
        F: Fn(&BTreeSet<CellId>) -> BTreeSet<Color>,
    {
        let fresh = overlap_groups(vertex_sets);
        self.groups = carry_over(std::mem::take(&mut self.groups), fresh);
        let timeout = self.lock_timeout;
        for g in &mut self.groups {
            let present = occupied(&g.shared_cells);
            release_check(g, &present, timeout);
            arbitrate(g);
            if g.holder.is_some() {
                g.tenure = g.tenure.saturating_add(1);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Group computation
// ---------------------------------------------------------------------------

/// Build overlap groups from per-color vertex sets (index = color).
///
/// Colors are nodes of a graph with an edge wherever two vertex sets
/// intersect; each connected component with at least two colors becomes a
/// group whose shared cells are the union of the pairwise intersections
/// within the component. Rotation state starts empty.
pub fn overlap_groups(vertex_sets: &[BTreeSet<CellId>]) -> Vec<OverlapGroup> {
    let n = vertex_sets.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(comp: &mut Vec<usize>, a: usize) -> usize {
        let mut r = a;
        while comp[r] != r {
            r = comp[r];
        }
        let mut cur = a;
        while comp[cur] != r {
            let next = comp[cur];
            comp[cur] = r;
            cur = next;
        }
        r
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if !vertex_sets[a].is_disjoint(&vertex_sets[b]) {
                let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
                if ra != rb {
                    comp[ra] = rb;
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|a| find(&mut comp, a)).collect();
    let mut groups = Vec::new();
    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&a| roots[a] == root).collect();
        if members.len() < 2 {
            continue;
        }
        let mut shared = BTreeSet::new();
        for (pos, &a) in members.iter().enumerate() {
            for &b in &members[pos + 1..] {
                shared.extend(vertex_sets[a].intersection(&vertex_sets[b]).copied());
            }
        }
        groups.push(OverlapGroup {
            colors: members.iter().map(|&a| Color(a as u16)).collect(),
            shared_cells: shared,
            holder: None,
            exclusion: BTreeSet::new(),
            occupied_since_grant: false,
            empty_streak: 0,
            tenure: 0,
            cooldown: 0,
        });
    }
    groups
}

/// Transplant rotation state from last round's groups into this round's.
///
/// A new group inherits from every old group it shares a color with. The
/// holder survives if its color is still present; when several old holders
/// merge into one group, the least color wins and the others are dropped
/// (their colors go into the exclusion set so they are not served twice).
/// The exclusion set is the union of the old ones restricted to the new
/// membership, and the cooldown is the maximum of the old ones.
fn carry_over(old: Vec<OverlapGroup>, mut fresh: Vec<OverlapGroup>) -> Vec<OverlapGroup> {
    for g in &mut fresh {
        let related: Vec<&OverlapGroup> = old
            .iter()
            .filter(|o| o.colors.intersection(&g.colors).next().is_some())
            .collect();
        if related.is_empty() {
            continue;
        }
        let surviving_holder = related
            .iter()
            .filter_map(|o| o.holder.filter(|h| g.colors.contains(h)))
            .min();
        for o in &related {
            g.exclusion
                .extend(o.exclusion.intersection(&g.colors).copied());
            g.cooldown = g.cooldown.max(o.cooldown);
        }
        if let Some(h) = surviving_holder {
            let source = related
                .iter()
                .find(|o| o.holder == Some(h))
                .expect("holder originates from a related group");
            g.holder = Some(h);
            g.occupied_since_grant = source.occupied_since_grant;
            g.empty_streak = source.empty_streak;
            g.tenure = source.tenure;
            // A dropped co-holder counts as served so rotation stays fair.
            for o in &related {
                if let Some(other) = o.holder {
                    if other != h && g.colors.contains(&other) {
                        g.exclusion.insert(other);
                    }
                }
            }
        }
    }
    fresh
}

// ---------------------------------------------------------------------------
// Release and grant
// ---------------------------------------------------------------------------

/// Update the holder's occupancy latches and release the lock when its
/// traffic has crossed (shared cells occupied at some point, empty now) or
/// when it never showed up within `timeout` idle rounds.
fn release_check(g: &mut OverlapGroup, present: &BTreeSet<Color>, timeout: u32) {
    let Some(holder) = g.holder else {
        return;
    };
    if present.contains(&holder) {
        g.occupied_since_grant = true;
        g.empty_streak = 0;
        return;
    }
    if present.is_empty() {
        g.empty_streak = g.empty_streak.saturating_add(1);
    } else {
        // Another color's stragglers are still draining; neither occupancy
        // nor idleness can be charged to the holder this round.
        g.empty_streak = 0;
        return;
    }
    let crossed = g.occupied_since_grant;
    let timed_out = !g.occupied_since_grant && g.empty_streak >= timeout;
    if crossed || timed_out {
        g.exclusion.insert(holder);
        g.holder = None;
        g.occupied_since_grant = false;
        g.empty_streak = 0;
        g.tenure = 0;
        g.cooldown = HANDOVER_COOLDOWN;
    }
}

/// Grant the lock to the least not-yet-served color if the group is
/// leaderless and the handover cooldown has elapsed. When every color has
/// been served, the cycle restarts.
fn arbitrate(g: &mut OverlapGroup) {
    if g.holder.is_some() {
        return;
    }
    if g.cooldown > 0 {
        g.cooldown -= 1;
        return;
    }
    if g.exclusion.is_superset(&g.colors) {
        g.exclusion.clear();
    }
    let next = g.colors.iter().find(|c| !g.exclusion.contains(c)).copied();
    if let Some(c) = next {
        g.holder = Some(c);
        g.occupied_since_grant = false;
        g.empty_streak = 0;
        g.tenure = 0;
    }
}
