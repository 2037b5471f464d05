//! Versioned JSON import/export for partitions.
//!
//! The document records the cell polygons, the adjacency, and the movement
//! vector of every ordered neighbor pair:
//!
//! ```json
//! {
//!   "version": 1,
//!   "cells": [{"id": 1, "vertices": [[0.0, 0.0], [1.0, 0.0], ...]}],
//!   "neighbors": {"1": [2, 9], "2": [1, 3, 10]},
//!   "move_vectors": {"1->2": [1.0, 0.0], "2->1": [-1.0, 0.0]}
//! }
//! ```
//!
//! Import rebuilds the partition from the polygons alone, then cross-checks
//! the declared adjacency against the reconstructed one so a hand-edited
//! document cannot silently disagree with its own geometry.

use super::{from_cells, CellId, GeometryError, Partition, Point2, PolyCell, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionDoc {
    version: u32,
    cells: Vec<CellDoc>,
    neighbors: BTreeMap<String, Vec<u32>>,
    move_vectors: BTreeMap<String, [f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDoc {
    id: u32,
    vertices: Vec<[f64; 2]>,
}

/// Serialize a partition to its JSON document.
pub fn partition_to_json(partition: &Partition) -> serde_json::Value {
    let cells = partition
        .cells()
        .iter()
        .map(|c| CellDoc {
            id: c.id.0,
            vertices: c.vertices.iter().map(|p| [p.x, p.y]).collect(),
        })
        .collect();
    let neighbors = partition
        .ids()
        .map(|i| {
            (
                i.0.to_string(),
                partition.neighbors(i).iter().map(|j| j.0).collect(),
            )
        })
        .collect();
    let mut move_vectors = BTreeMap::new();
    for (i, j) in partition.shared_side_keys() {
        for (s, d) in [(i, j), (j, i)] {
            let u = partition.move_vector(s, d).expect("recorded pair");
            move_vectors.insert(format!("{}->{}", s.0, d.0), [u.x, u.y]);
        }
    }
    serde_json::to_value(PartitionDoc {
        version: FORMAT_VERSION,
        cells,
        neighbors,
        move_vectors,
    })
    .expect("partition document serializes")
}

/// Parse a partition from the JSON document produced by
/// [`partition_to_json`].
pub fn partition_from_json(doc: &serde_json::Value) -> Result<Partition, GeometryError> {
    let doc: PartitionDoc = serde_json::from_value(doc.clone())
        .map_err(|e| GeometryError::MalformedDocument(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(GeometryError::MalformedDocument(format!(
            "unsupported document version {} (expected {FORMAT_VERSION})",
            doc.version
        )));
    }
    let cells: Vec<PolyCell> = doc
        .cells
        .iter()
        .map(|c| PolyCell {
            id: CellId(c.id),
            vertices: c.vertices.iter().map(|[x, y]| Point2::new(*x, *y)).collect(),
        })
        .collect();
    let mut partition = from_cells(cells)?;

    // The declared adjacency must agree with the reconstructed geometry.
    for i in partition.ids() {
        let declared: Vec<u32> = doc
            .neighbors
            .get(&i.0.to_string())
            .cloned()
            .map(|mut v| {
                v.sort_unstable();
                v
            })
            .unwrap_or_default();
        let computed: Vec<u32> = partition.neighbors(i).iter().map(|j| j.0).collect();
        if declared != computed {
            return Err(GeometryError::MalformedDocument(format!(
                "declared neighbors of cell {i} are {declared:?} but the cell \
                 polygons give {computed:?}"
            )));
        }
    }

    // Movement vectors: every ordered neighbor pair must be covered.
    let mut expected: BTreeMap<String, (CellId, CellId)> = BTreeMap::new();
    for (i, j) in partition.shared_side_keys().collect::<Vec<_>>() {
        expected.insert(format!("{}->{}", i.0, j.0), (i, j));
        expected.insert(format!("{}->{}", j.0, i.0), (j, i));
    }
    for (key, [ux, uy]) in &doc.move_vectors {
        match expected.remove(key) {
            Some((s, d)) => partition.set_move_vector(s, d, Vec2::new(*ux, *uy)),
            None => {
                return Err(GeometryError::MalformedDocument(format!(
                    "move_vectors entry '{key}' does not name an ordered neighbor pair"
                )))
            }
        }
    }
    if let Some(missing) = expected.keys().next() {
        return Err(GeometryError::MalformedDocument(format!(
            "move_vectors is missing an entry for '{missing}'"
        )));
    }
    Ok(partition)
}
