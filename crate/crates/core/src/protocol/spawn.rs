//! Spawn phase: sources inject new entities at free lattice sites.
//!
//! Spawning starts only after a warm-up of twice the graph diameter plus
//! two rounds, by which time routing and coverage gossip have converged
//! from the cold start — injecting earlier could strand opposing colors
//! inside a not-yet-recognized intersection with no lock to untangle them.
//!
//! Each round a live source adds up to `spawn_per_round` entities of its
//! color, subject to:
//!
//! - **single color** — the source holds no other color's entities;
//! - **fairness** — if cross-traffic has been waiting to pass through the
//!   source for `spawn_backoff` consecutive rounds, spawning yields;
//! - **intersection** — a source lying inside a shared region spawns only
//!   while its color holds the lock and the admission window is open;
//! - **spacing** — a site is used only if it keeps at least `2l + rs`
//!   between all disc centers on the cell.

use super::{Color, Entity, SystemState};

pub(crate) fn spawn_step(state: &mut SystemState) {
    let config = state.config_arc();
    if state.round < state.warmup_rounds() {
        return;
    }
    let min_sep = config.params.min_separation() - 1e-9;
    for c in 0..config.colors.len() {
        let color = Color(c as u16);
        let source = config.colors[c].source;
        let sidx = source.idx();
        if state.cells[sidx].failed {
            continue;
        }
        if state.cells[sidx]
            .etype
            .is_some_and(|col| col != color)
        {
            continue;
        }
        if state.cells[sidx].token.is_some()
            && state.cells[sidx].neprev_streak >= config.spawn_backoff
        {
            continue;
        }
        if state.cells[sidx].pint[c].contains(&source)
            && !(state.cells[sidx].lock[c] && state.arb.admits(color))
        {
            continue;
        }
        let mut added = 0;
        for s in 0..state.spawn_sites[c].len() {
            if added == config.spawn_per_round {
                break;
            }
            let site = state.spawn_sites[c][s];
            let fits = state.cells[sidx]
                .entities
                .iter()
                .all(|e| (e.center - site).norm() >= min_sep);
            if fits {
                let id = state.alloc_entity_id();
                state.cells[sidx].entities.push(Entity {
                    id,
                    color,
                    center: site,
                });
                state.cells[sidx].etype = Some(color);
                state.spawned[c] += 1;
                added += 1;
            }
        }
    }
}
