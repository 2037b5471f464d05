//! Move phase: granted cells translate their entities one step toward the
//! next hop; discs that reach the boundary cross or are consumed.
//!
//! A cell moves exactly when the neighbor its occupants route toward has
//! signaled it this round. All its entities translate together by `v`
//! along the crossing direction for that side. Entities whose disc then
//! touches the shared side (center within `l` of it) leave the cell: if the
//! neighbor is their color's target they are consumed, otherwise they land
//! inside the neighbor on the line at depth `l`, tangent to the side they
//! crossed, at the point their movement ray meets it.
//!
//! All movements and crossings of a round are resolved against the same
//! snapshot: departures are decided before any arrival is integrated, so
//! simultaneous exchanges between cells behave as if they happened at once.
//! The round counter increments at the end of this phase.

use crate::geometry::CellId;

use super::{Color, Entity, ProtocolError, SystemState};

pub(crate) fn move_step(state: &mut SystemState) -> Result<(), ProtocolError> {
    let partition = state.partition_arc();
    let config = state.config_arc();
    let n = partition.n_cells();

    // Cells whose movement was granted: (cell index, destination, color).
    let granted: Vec<(usize, CellId, Color)> = (0..n)
        .filter_map(|idx| {
            let cs = &state.cells[idx];
            if cs.failed || cs.entities.is_empty() {
                return None;
            }
            let col = cs.etype?;
            let dest = cs.next[col.idx()]?;
            let dn = &state.cells[dest.idx()];
            if dn.failed || dn.signal != Some(CellId::from_idx(idx)) {
                return None;
            }
            Some((idx, dest, col))
        })
        .collect();

    let mut arrivals: Vec<Vec<Entity>> = vec![Vec::new(); n];
    for (idx, dest, col) in granted {
        let id = CellId::from_idx(idx);
        let step = partition.move_vector(id, dest)? * config.speed;
        let mut kept = Vec::new();
        for mut e in std::mem::take(&mut state.cells[idx].entities) {
            e.center = e.center + step;
            if partition.in_transfer_region(id, dest, e.center, &config.params)? {
                if config.colors[col.idx()].target == dest {
                    state.consumed[col.idx()] += 1;
                } else {
                    e.center = partition.reset_entity_position(e.center, id, dest, &config.params)?;
                    arrivals[dest.idx()].push(e);
                }
            } else {
                kept.push(e);
            }
        }
        state.cells[idx].entities = kept;
    }

    for idx in 0..n {
        if !arrivals[idx].is_empty() {
            let incoming = arrivals[idx][0].color;
            let resident = state.cells[idx]
                .etype
                .filter(|_| !state.cells[idx].entities.is_empty());
            // The color gate makes a mixed cell impossible; reaching this
            // error means the protocol logic itself is broken.
            if resident.is_some_and(|rc| rc != incoming) {
                return Err(ProtocolError::ColorMixTransfer {
                    cell: CellId::from_idx(idx),
                });
            }
            let incoming_entities = std::mem::take(&mut arrivals[idx]);
            state.cells[idx].entities.extend(incoming_entities);
        }
        let cs = &mut state.cells[idx];
        cs.etype = cs.entities.first().map(|e| e.color);
    }

    state.round += 1;
    Ok(())
}
