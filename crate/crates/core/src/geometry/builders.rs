//! Construction of partitions: regular grid builders and the general
//! stitcher that turns a bag of convex cells into a [`Partition`] by
//! matching coincident edges.
//!
//! Builders compute shared vertices from identical integer expressions, so
//! adjacent cells coincide bit-exactly and edge matching is immune to
//! rounding. Hand-made cells are welded with the [`GEOM_EPS`] tolerance.

use super::{CellId, GeometryError, Partition, Point2, PolyCell, Vec2, GEOM_EPS};
use std::collections::{BTreeMap, BTreeSet};

fn close(a: Point2, b: Point2) -> bool {
    (a.x - b.x).abs() <= GEOM_EPS && (a.y - b.y).abs() <= GEOM_EPS
}

/// Stitch convex cells into a partition.
///
/// Cells must carry contiguous ids `1..=n`. Edges of distinct cells that
/// coincide endpoint-for-endpoint (in opposite orientation) become shared
/// sides; every shared side gets a default movement vector equal to its
/// outward normal, which grid-specific builders may override. Unmatched
/// edges are chained into the environment outline.
pub fn from_cells(mut cells: Vec<PolyCell>) -> Result<Partition, GeometryError> {
    if cells.is_empty() {
        return Err(GeometryError::InvalidPartition("no cells".into()));
    }
    cells.sort_by_key(|c| c.id);
    for (k, cell) in cells.iter().enumerate() {
        if cell.id.0 as usize != k + 1 {
            return Err(GeometryError::InvalidPartition(format!(
                "cell ids must be contiguous from 1; found {} at position {}",
                cell.id,
                k + 1
            )));
        }
        if cell.vertices.len() < 3 {
            return Err(GeometryError::InvalidPartition(format!(
                "cell {} has fewer than 3 vertices",
                cell.id
            )));
        }
    }
    // Normalize orientation to counterclockwise.
    for cell in &mut cells {
        let a = cell.signed_area();
        if a.abs() < GEOM_EPS * GEOM_EPS {
            return Err(GeometryError::InvalidPartition(format!(
                "cell {} is degenerate (area {a:e})",
                cell.id
            )));
        }
        if a < 0.0 {
            cell.vertices.reverse();
        }
    }

    let n = cells.len();
    let mut neighbors: Vec<BTreeSet<CellId>> = vec![BTreeSet::new(); n];
    let mut shared_sides: BTreeMap<(CellId, CellId), (Point2, Point2)> = BTreeMap::new();

    // All directed edges: (owner, start, end).
    let mut edges: Vec<(CellId, Point2, Point2)> = Vec::new();
    for cell in &cells {
        for (a, b) in cell.edges() {
            edges.push((cell.id, a, b));
        }
    }
    let mut matched = vec![false; edges.len()];
    for p in 0..edges.len() {
        for q in (p + 1)..edges.len() {
            let (ci, ai, bi) = edges[p];
            let (cj, aj, bj) = edges[q];
            if ci == cj {
                continue;
            }
            if close(ai, bj) && close(bi, aj) {
                if matched[p] || matched[q] {
                    return Err(GeometryError::InvalidPartition(format!(
                        "a side of cell {ci} or {cj} coincides with more than one other side"
                    )));
                }
                matched[p] = true;
                matched[q] = true;
                neighbors[ci.idx()].insert(cj);
                neighbors[cj.idx()].insert(ci);
                let key = (ci.min(cj), ci.max(cj));
                // Canonical orientation: as traversed by the lower-id cell.
                let seg = if key.0 == ci { (ai, bi) } else { (aj, bj) };
                shared_sides.insert(key, seg);
            }
        }
    }

    let outline = trace_outline(
        edges
            .iter()
            .zip(&matched)
            .filter(|(_, m)| !**m)
            .map(|((_, a, b), _)| (*a, *b))
            .collect(),
    )?;

    let mut partition = Partition::new(cells, outline, neighbors, shared_sides, BTreeMap::new());

    // Default movement policy: cross each shared side along its normal.
    let pairs: Vec<(CellId, CellId)> = partition.shared_side_keys().collect();
    for (i, j) in pairs {
        let n_ij = partition.side_normal(i, j).expect("side exists");
        partition.set_move_vector(i, j, n_ij);
        partition.set_move_vector(j, i, -n_ij);
    }
    Ok(partition)
}

/// Chain boundary edges into closed loops and return the largest-area loop
/// as the environment outline.
fn trace_outline(mut boundary: Vec<(Point2, Point2)>) -> Result<Vec<Point2>, GeometryError> {
    if boundary.is_empty() {
        return Err(GeometryError::InvalidPartition(
            "partition has no boundary edges".into(),
        ));
    }
    let mut loops: Vec<Vec<Point2>> = Vec::new();
    while let Some((start, mut cursor)) = boundary.pop().map(|(a, b)| (a, b)) {
        let mut polyline = vec![start];
        while !close(cursor, start) {
            polyline.push(cursor);
            let next = boundary.iter().position(|(a, _)| close(*a, cursor));
            match next {
                Some(k) => cursor = boundary.swap_remove(k).1,
                None => {
                    return Err(GeometryError::InvalidPartition(
                        "environment boundary does not close into a loop".into(),
                    ))
                }
            }
        }
        loops.push(polyline);
    }
    let area = |pts: &[Point2]| -> f64 {
        let n = pts.len();
        let mut a = 0.0;
        for k in 0..n {
            let p = pts[k];
            let q = pts[(k + 1) % n];
            a += p.x * q.y - q.x * p.y;
        }
        (0.5 * a).abs()
    };
    loops
        .into_iter()
        .max_by(|a, b| area(a).total_cmp(&area(b)))
        .ok_or_else(|| GeometryError::InvalidPartition("no boundary loop".into()))
}

/// Square grid of `rows x cols` cells with side length `side_len`, ids
/// row-major from 1 starting at the bottom-left cell. Entities cross sides
/// along their normals.
pub fn build_square_grid(
    rows: usize,
    cols: usize,
    side_len: f64,
) -> Result<Partition, GeometryError> {
    check_dims(rows, cols, side_len)?;
    let s = side_len;
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let id = CellId((r * cols + c + 1) as u32);
            let (x0, x1) = (c as f64 * s, (c + 1) as f64 * s);
            let (y0, y1) = (r as f64 * s, (r + 1) as f64 * s);
            cells.push(PolyCell {
                id,
                vertices: vec![
                    Point2::new(x0, y0),
                    Point2::new(x1, y0),
                    Point2::new(x1, y1),
                    Point2::new(x0, y1),
                ],
            });
        }
    }
    from_cells(cells)
}

/// Strip tessellation of equilateral triangles: each of the `rows` strips
/// holds `cols` triangles alternating upward and downward, ids row-major
/// from 1. Triangle `k` of strip `r` points up when `r + k` is even, so
/// vertically adjacent strips share their horizontal bases. Entities cross
/// sides along their normals (equilateral cells are non-obtuse, so normal
/// movement satisfies the projection requirement).
pub fn build_triangular_grid(
    rows: usize,
    cols: usize,
    side_len: f64,
) -> Result<Partition, GeometryError> {
    check_dims(rows, cols, side_len)?;
    let s = side_len;
    let b = 0.5 * s;
    let h = s * 3f64.sqrt() / 2.0;
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y0 = r as f64 * h;
        let y1 = (r + 1) as f64 * h;
        for k in 0..cols {
            let id = CellId((r * cols + k + 1) as u32);
            let xl = k as f64 * b;
            let xm = (k + 1) as f64 * b;
            let xr = (k + 2) as f64 * b;
            let vertices = if (r + k) % 2 == 0 {
                vec![
                    Point2::new(xl, y0),
                    Point2::new(xr, y0),
                    Point2::new(xm, y1),
                ]
            } else {
                vec![
                    Point2::new(xm, y0),
                    Point2::new(xr, y1),
                    Point2::new(xl, y1),
                ]
            };
            cells.push(PolyCell { id, vertices });
        }
    }
    from_cells(cells)
}

/// Grid of `rows x cols` congruent parallelograms with a horizontal base of
/// length `base` and lateral side `slant`, ids row-major from 1. Entities
/// cross vertical (slanted) sides along the x axis and horizontal sides
/// along the slant direction, so movement stays parallel to the cell sides
/// and lateral clearance is preserved exactly.
pub fn build_parallelogram_grid(
    rows: usize,
    cols: usize,
    base: f64,
    slant: Vec2,
) -> Result<Partition, GeometryError> {
    check_dims(rows, cols, base)?;
    if !slant.x.is_finite() || !slant.y.is_finite() || slant.y.abs() <= GEOM_EPS {
        return Err(GeometryError::InvalidParams(format!(
            "slant must have a nonzero vertical component, got ({}, {})",
            slant.x, slant.y
        )));
    }
    let bx = Vec2::new(base, 0.0);
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let id = CellId((r * cols + c + 1) as u32);
            let o = Point2::new(
                c as f64 * base + r as f64 * slant.x,
                r as f64 * slant.y,
            );
            cells.push(PolyCell {
                id,
                vertices: vec![o, o + bx, o + bx + slant, o + slant],
            });
        }
    }
    let mut partition = from_cells(cells)?;
    let x_hat = Vec2::new(1.0, 0.0);
    let s_hat = slant.normalized();
    for r in 0..rows {
        for c in 0..cols {
            let id = CellId((r * cols + c + 1) as u32);
            if c + 1 < cols {
                let right = CellId((r * cols + c + 2) as u32);
                partition.set_move_vector(id, right, x_hat);
                partition.set_move_vector(right, id, -x_hat);
            }
            if r + 1 < rows {
                let up = CellId(((r + 1) * cols + c + 1) as u32);
                partition.set_move_vector(id, up, s_hat);
                partition.set_move_vector(up, id, -s_hat);
            }
        }
    }
    Ok(partition)
}

fn check_dims(rows: usize, cols: usize, side_len: f64) -> Result<(), GeometryError> {
    if rows == 0 || cols == 0 {
        return Err(GeometryError::InvalidParams(
            "grid dimensions must be at least 1x1".into(),
        ));
    }
    if !(side_len > 0.0) || !side_len.is_finite() {
        return Err(GeometryError::InvalidParams(format!(
            "side length must be positive and finite, got {side_len}"
        )));
    }
    Ok(())
}
