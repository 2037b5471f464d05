//! Round-by-round trace output, one JSON object per line.
//!
//! Each record captures the observable state after a completed round:
//! cumulative per-color consumption, every live entity with its position,
//! the failed cells, which neighbor each cell signaled (null for none),
//! and the cells currently locked per holding color. When runtime checks
//! are on, a final record may carry the violations that stopped the run.

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;

use crate::oracles::Violation;
use crate::protocol::SystemState;

#[derive(Serialize)]
struct EntityRecord {
    id: u64,
    color: String,
    cell: u32,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct Record {
    round: u64,
    consumed: BTreeMap<String, u64>,
    entities: Vec<EntityRecord>,
    failed: Vec<u32>,
    signals: BTreeMap<String, Option<u32>>,
    locks: BTreeMap<String, Vec<u32>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<String>,
}

/// Serialize one trace record for the given state and append it as a line.
pub fn write_record<W: io::Write + ?Sized>(
    w: &mut W,
    s: &SystemState,
    violations: &[Violation],
) -> io::Result<()> {
    let colors = &s.config().colors;
    let consumed = colors
        .iter()
        .zip(&s.consumed)
        .map(|(spec, &n)| (spec.name.clone(), n))
        .collect();
    let mut entities: Vec<EntityRecord> = s
        .entities()
        .map(|(cell, e)| EntityRecord {
            id: e.id.0,
            color: colors[e.color.idx()].name.clone(),
            cell: cell.0,
            x: e.center.x,
            y: e.center.y,
        })
        .collect();
    entities.sort_by_key(|e| e.id);
    let failed: Vec<u32> = s
        .partition()
        .ids()
        .filter(|id| s.cells[id.idx()].failed)
        .map(|id| id.0)
        .collect();
    let signals = s
        .partition()
        .ids()
        .map(|id| {
            let cs = &s.cells[id.idx()];
            let granted = if cs.failed { None } else { cs.signal.map(|j| j.0) };
            (id.0.to_string(), granted)
        })
        .collect();
    let mut locks = BTreeMap::new();
    for g in &s.arb.groups {
        if let Some(holder) = g.holder {
            locks.insert(
                colors[holder.idx()].name.clone(),
                g.shared_cells.iter().map(|c| c.0).collect(),
            );
        }
    }
    let record = Record {
        round: s.round,
        consumed,
        entities,
        failed,
        signals,
        locks,
        violations: violations.iter().map(|v| v.to_string()).collect(),
    };
    serde_json::to_writer(&mut *w, &record)?;
    w.write_all(b"\n")
}
