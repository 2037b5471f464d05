//! Route phase: distance-vector maintenance of per-color hop distances.
//!
//! Every live cell simultaneously replaces its distance to each color's
//! target by one plus the smallest distance any neighbor published last
//! round, and points its next-hop at that neighbor (smallest id on ties).
//! Targets hold distance zero for their own color. Failed cells publish
//! infinity and are skipped; a value of infinity never produces a next-hop.
//!
//! Any computed distance of `n_cells` or more is clamped to infinity: no
//! real route can be that long, and the clamp breaks count-to-infinity when
//! a region loses its target, so routing converges from every starting
//! state (cells that still reach the target settle within their true
//! distance, disconnected ones within `n_cells` rounds).

use crate::geometry::CellId;

use super::{Hops, SystemState};

pub(crate) fn route_step(state: &mut SystemState) {
    let partition = state.partition_arc();
    let config = state.config_arc();
    let n = partition.n_cells();
    let ncol = config.colors.len();
    let previous: Vec<Vec<Hops>> = state.cells.iter().map(|c| c.dist.clone()).collect();
    for idx in 0..n {
        if state.cells[idx].failed {
            continue;
        }
        let id = CellId::from_idx(idx);
        for c in 0..ncol {
            if config.colors[c].target == id {
                state.cells[idx].dist[c] = Hops(0);
                state.cells[idx].next[c] = None;
                continue;
            }
            let mut best = Hops::INF;
            let mut via = None;
            // Neighbor sets iterate in ascending id order, so keeping the
            // first strict minimum realizes the smallest-id tie-break.
            for &j in partition.neighbors(id) {
                let dj = previous[j.idx()][c];
                if dj < best {
                    best = dj;
                    via = Some(j);
                }
            }
            if best.is_finite() && best.bump() < Hops(n as u32) {
                state.cells[idx].dist[c] = best.bump();
                state.cells[idx].next[c] = via;
            } else {
                state.cells[idx].dist[c] = Hops::INF;
                state.cells[idx].next[c] = None;
            }
        }
    }
}
