//! Lock phase: gossip of route coverage and intersection-lock rotation.
//!
//! Each color's *coverage* is the set of cells its traffic can stand on or
//! route through: the color's source, every cell currently holding its
//! entities, and the chain of next-hops from any of those toward the
//! target. Cells learn the coverage by gossip: every round a cell merges
//! its neighbors' tables, aging every entry by one hop, and cells that
//! belong to the coverage re-assert themselves and their next-hop at age
//! zero. Entries older than the graph diameter expire, so coverage that is
//! no longer asserted anywhere fades within a diameter's worth of rounds —
//! a plain union could grow but never shrink after reroutes or failures.
//!
//! From its table a cell derives which of the cells it knows are shared
//! between two colors' coverage (`pint`) and which colors are entangled
//! with a given color (`lockcolors`). The arbitration layer then rotates
//! one lock per entangled component; a cell holds the lock for a color when
//! it believes itself shared and that color is the component's holder.

use std::collections::BTreeSet;

use crate::geometry::CellId;

use super::{Color, SystemState, AGE_NONE};

pub(crate) fn lock_step(state: &mut SystemState) {
    let partition = state.partition_arc();
    let config = state.config_arc();
    let n = partition.n_cells();
    let ncol = config.colors.len();

    // --- gossip pass -------------------------------------------------------
    let previous: Vec<Vec<Vec<u16>>> = state.cells.iter().map(|c| c.path.clone()).collect();
    for idx in 0..n {
        if state.cells[idx].failed {
            continue;
        }
        let id = CellId::from_idx(idx);
        for c in 0..ncol {
            let mut merged = vec![AGE_NONE; n];
            let mut named_by_neighbor = false;
            for &j in partition.neighbors(id) {
                if state.cells[j.idx()].failed {
                    continue;
                }
                let theirs = &previous[j.idx()][c];
                for k in 0..n {
                    let age = theirs[k];
                    if age != AGE_NONE {
                        // Aging an entry off the end of the range is how
                        // stale knowledge dies.
                        let aged = age.saturating_add(1);
                        if aged < merged[k] {
                            merged[k] = aged;
                        }
                    }
                }
                // A neighbor asserting this cell at age zero named it as
                // its own next-hop: this cell carries that color's traffic.
                if theirs[idx] == 0 {
                    named_by_neighbor = true;
                }
            }
            let member = config.colors[c].source == id
                || state.cells[idx].etype == Some(Color(c as u16))
                || named_by_neighbor;
            if member {
                merged[idx] = 0;
                if let Some(nx) = state.cells[idx].next[c] {
                    merged[nx.idx()] = 0;
                }
            }
            state.cells[idx].path[c] = merged;
        }
    }

    // --- derived shared-cell knowledge ------------------------------------
    let ttl = state.coverage_ttl().min(u16::MAX as u32 - 1) as u16;
    let failed = state.failed_mask();
    if ncol >= 2 {
        for idx in 0..n {
            if state.cells[idx].failed {
                continue;
            }
            let views: Vec<Vec<bool>> = (0..ncol)
                .map(|c| {
                    let ages = &state.cells[idx].path[c];
                    (0..n).map(|k| ages[k] <= ttl && !failed[k]).collect()
                })
                .collect();
            for c in 0..ncol {
                let shared: BTreeSet<CellId> = (0..n)
                    .filter(|&k| {
                        views[c][k] && (0..ncol).any(|d| d != c && views[d][k])
                    })
                    .map(CellId::from_idx)
                    .collect();
                state.cells[idx].pint[c] = shared;
            }
            let entangled = color_components(&views);
            for c in 0..ncol {
                state.cells[idx].lockcolors[c] = entangled[c].clone();
            }
        }
    }

    // --- lock rotation -----------------------------------------------------
    if ncol >= 2 {
        let mut coverage: Vec<BTreeSet<CellId>> = vec![BTreeSet::new(); ncol];
        for idx in 0..n {
            if state.cells[idx].failed {
                continue;
            }
            for c in 0..ncol {
                let ages = &state.cells[idx].path[c];
                for k in 0..n {
                    if ages[k] <= ttl && !failed[k] {
                        coverage[c].insert(CellId::from_idx(k));
                    }
                }
            }
        }
        let cells_ref = &state.cells;
        let arb = &mut state.arb;
        arb.step(&coverage, |shared| {
            let mut present = BTreeSet::new();
            for &cid in shared {
                let cs = &cells_ref[cid.idx()];
                if !cs.entities.is_empty() {
                    if let Some(col) = cs.etype {
                        present.insert(col);
                    }
                }
            }
            present
        });
        for idx in 0..n {
            if state.cells[idx].failed {
                continue;
            }
            let id = CellId::from_idx(idx);
            for c in 0..ncol {
                let color = Color(c as u16);
                state.cells[idx].lock[c] =
                    state.cells[idx].pint[c].contains(&id) && state.arb.holds_lock(color);
            }
        }
    }
}

/// Connected components of the "coverages intersect" relation between
/// colors, returned per color as the component minus the color itself
/// (empty when the color overlaps nobody).
fn color_components(views: &[Vec<bool>]) -> Vec<BTreeSet<Color>> {
    let ncol = views.len();
    let mut comp: Vec<usize> = (0..ncol).collect();
    fn find(comp: &mut [usize], a: usize) -> usize {
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
    for a in 0..ncol {
        for b in (a + 1)..ncol {
            let touch = views[a]
                .iter()
                .zip(&views[b])
                .any(|(&x, &y)| x && y);
            if touch {
                let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
                if ra != rb {
                    comp[ra] = rb;
                }
            }
        }
    }
    let roots: Vec<usize> = (0..ncol).map(|a| find(&mut comp, a)).collect();
    (0..ncol)
        .map(|c| {
            let mine: BTreeSet<Color> = (0..ncol)
                .filter(|&d| d != c && roots[d] == roots[c])
                .map(|d| Color(d as u16))
                .collect();
            mine
        })
        .collect()
}
