//! Signal phase: each cell picks at most one waiting neighbor and grants it
//! permission to send entities across this round.
//!
//! A cell first settles which color to serve: its own entities' color if it
//! is occupied, otherwise a round-robin choice among the colors of
//! neighbors that want in. Among the waiting neighbors of that color it
//! keeps a token marking whose turn it is; the token holder receives the
//! signal if three gates all open:
//!
//! - **clearance** — none of the cell's own entities stands within `3d` of
//!   the side the traffic would cross, so the landing strip plus braking
//!   distance is free;
//! - **color** — the cell is empty or already holds that color;
//! - **intersection** — if the cell is shared between colors, the mover's
//!   color must hold the lock, and traffic entering the shared region from
//!   outside must also fall inside the admission window.
//!
//! On a grant the token advances to the next waiting neighbor (if any), so
//! service rotates; on a refusal it stays, so a blocked neighbor keeps its
//! turn rather than losing it.

use std::collections::BTreeSet;

use crate::geometry::CellId;

use super::{Color, SystemState};

struct Decision {
    idx: usize,
    neprev: Vec<CellId>,
    token: Option<CellId>,
    signal: Option<CellId>,
    last_color: Option<Color>,
    streak: u32,
}

pub(crate) fn signal_step(state: &mut SystemState) {
    let partition = state.partition_arc();
    let config = state.config_arc();
    let n = partition.n_cells();
    let mut decisions: Vec<Decision> = Vec::with_capacity(n);

    for idx in 0..n {
        if state.cells[idx].failed {
            continue;
        }
        let id = CellId::from_idx(idx);
        let me = &state.cells[idx];

        // Colors requesting entry: a neighbor requests when it is occupied
        // and routes its own color through this cell.
        let mut requesting: BTreeSet<Color> = BTreeSet::new();
        for &j in partition.neighbors(id) {
            let nb = &state.cells[j.idx()];
            if nb.failed || nb.entities.is_empty() {
                continue;
            }
            let col = nb.etype.expect("occupied cell has a color");
            if nb.next[col.idx()] == Some(id) {
                requesting.insert(col);
            }
        }

        let chosen = if !me.entities.is_empty() {
            me.etype
        } else {
            rotate_pick(&requesting, me.last_color)
        };

        let neprev: Vec<CellId> = match chosen {
            Some(c) => partition
                .neighbors(id)
                .iter()
                .copied()
                .filter(|&j| {
                    let nb = &state.cells[j.idx()];
                    !nb.failed && nb.etype == Some(c) && nb.next[c.idx()] == Some(id)
                })
                .collect(),
            None => Vec::new(),
        };

        // The token stays with its holder while that neighbor still waits;
        // otherwise it re-seats at the smallest waiting id.
        let mut token = me.token.filter(|t| neprev.contains(t));
        if token.is_none() {
            token = neprev.first().copied();
        }

        let mut signal = None;
        if let Some(t) = token {
            let mover_color = state.cells[t.idx()]
                .etype
                .expect("waiting neighbor is occupied");
            let clear = me.entities.iter().all(|e| {
                !partition
                    .in_safety_region(id, t, e.center, &config.params)
                    .unwrap_or(true)
            });
            let color_ok = me.etype.is_none() || me.etype == Some(mover_color);
            let shared_here = me.pint[mover_color.idx()].contains(&id);
            let lock_ok = if shared_here {
                let entering_from_outside = !me.pint[mover_color.idx()].contains(&t);
                me.lock[mover_color.idx()]
                    && (!entering_from_outside || state.arb.admits(mover_color))
            } else {
                true
            };
            if clear && color_ok && lock_ok {
                signal = Some(t);
                if neprev.len() > 1 {
                    let pos = neprev
                        .iter()
                        .position(|&x| x == t)
                        .expect("token holder is waiting");
                    token = Some(neprev[(pos + 1) % neprev.len()]);
                }
            }
        }

        decisions.push(Decision {
            idx,
            streak: if neprev.is_empty() {
                0
            } else {
                me.neprev_streak.saturating_add(1)
            },
            last_color: chosen.or(me.last_color),
            neprev,
            token,
            signal,
        });
    }

    for d in decisions {
        let cell = &mut state.cells[d.idx];
        cell.neprev = d.neprev;
        cell.token = d.token;
        cell.signal = d.signal;
        cell.last_color = d.last_color;
        cell.neprev_streak = d.streak;
    }
}

/// Round-robin color choice: the smallest requesting color strictly after
/// the last one served, wrapping around.
fn rotate_pick(requesting: &BTreeSet<Color>, last: Option<Color>) -> Option<Color> {
    if requesting.is_empty() {
        return None;
    }
    match last {
        None => requesting.iter().next().copied(),
        Some(prev) => requesting
            .iter()
            .find(|&&c| c > prev)
            .or_else(|| requesting.iter().next())
            .copied(),
    }
}
