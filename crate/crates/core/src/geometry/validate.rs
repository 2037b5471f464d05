//! Structural validation of a partition against the movement parameters.
//!
//! A partition is usable for the protocol only if five conditions hold:
//!
//! 1. **partition axioms** — cells are convex, interiors are disjoint, any
//!    two touching cells share either exactly one full side or a single
//!    point, and the cells exactly tile the outline.
//! 2. **transfer bands** — for every cell and every one of its sides, the
//!    band of points within depth `l` of that side has positive width, so
//!    an entity can stand in front of the side before crossing it.
//! 3. **projection** — each movement vector points out of the source cell,
//!    and every vertex of the source, translated far enough along the
//!    vector, crosses the supporting line of the shared side *within* the
//!    side. This guarantees a straight-line crossing never clips a third
//!    cell.
//! 4. **transfer feasibility** — the entry band in the source cell must fit
//!    inside the landing band of the destination when slid across the side,
//!    i.e. its chord along the side must not be longer than the
//!    destination's chord. Checked per direction: a side can be crossable
//!    one way and not the other.
//! 5. **cell capacity** — every cell's inradius is at least the disc radius
//!    `l`, so a disc can be fully contained in any single cell.

use super::{CellId, Partition, Point2, PolyCell, RegionParams, GEOM_EPS};
use std::fmt;

/// Result of one validation check: a verdict plus human-readable failure
/// descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub passed: bool,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    fn from_failures(failures: Vec<String>) -> Self {
        CheckOutcome {
            passed: failures.is_empty(),
            failures,
        }
    }
}

/// Outcome of all five structural checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub partition_axioms: CheckOutcome,
    pub transfer_bands: CheckOutcome,
    pub projection: CheckOutcome,
    pub transfer_feasibility: CheckOutcome,
    pub cell_capacity: CheckOutcome,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed)
    }

    pub fn checks(&self) -> Vec<(&'static str, &CheckOutcome)> {
        vec![
            ("partition-axioms", &self.partition_axioms),
            ("transfer-bands", &self.transfer_bands),
            ("projection", &self.projection),
            ("transfer-feasibility", &self.transfer_feasibility),
            ("cell-capacity", &self.cell_capacity),
        ]
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, check) in self.checks() {
            let verdict = if check.passed { "ok" } else { "FAIL" };
            writeln!(f, "{name}: {verdict}")?;
            for failure in &check.failures {
                writeln!(f, "  - {failure}")?;
            }
        }
        Ok(())
    }
}

/// Run all structural checks on `partition` for entity radius `params.l`.
pub fn validate_partition(partition: &Partition, params: &RegionParams) -> ValidationReport {
    ValidationReport {
        partition_axioms: check_axioms(partition),
        transfer_bands: check_transfer_bands(partition, params),
        projection: check_projection(partition),
        transfer_feasibility: check_feasibility(partition, params),
        cell_capacity: check_capacity(partition, params),
    }
}

// ---------------------------------------------------------------------------
// 1. Partition axioms
// ---------------------------------------------------------------------------

fn check_axioms(partition: &Partition) -> CheckOutcome {
    let mut failures = Vec::new();
    let scale = partition.outline_area().sqrt().max(1.0);

    for cell in partition.cells().iter() {
        if !is_convex_ccw(cell) {
            failures.push(format!("cell {} is not convex", cell.id));
        }
    }

    let ids: Vec<CellId> = partition.ids().collect();
    for (a_pos, &i) in ids.iter().enumerate() {
        for &j in &ids[a_pos + 1..] {
            let ci = partition.cell(i);
            let cj = partition.cell(j);
            let clip = convex_clip(&ci.vertices, &cj.vertices);
            let area = polygon_area(&clip);
            if area > 1e-9 * scale * scale {
                failures.push(format!(
                    "interiors of cells {i} and {j} overlap (area {area:.3e})"
                ));
                continue;
            }
            let diam = polygon_diameter(&clip);
            if diam > GEOM_EPS * 10.0 {
                // Boundary contact along a segment: must be a full side of both.
                let (p, q) = farthest_pair(&clip);
                let full_i = has_edge(ci, p, q);
                let full_j = has_edge(cj, p, q);
                if !(full_i && full_j) {
                    failures.push(format!(
                        "cells {i} and {j} touch along a partial side (length {diam:.6})"
                    ));
                } else if !partition.are_neighbors(i, j) {
                    failures.push(format!(
                        "cells {i} and {j} share a side but are not recorded as neighbors"
                    ));
                }
            } else if partition.are_neighbors(i, j) {
                failures.push(format!(
                    "cells {i} and {j} are recorded as neighbors but share no side"
                ));
            }
        }
    }

    let cell_area: f64 = partition.cells().iter().map(|c| c.area()).sum();
    let outline_area = partition.outline_area();
    if (cell_area - outline_area).abs() > super::AREA_RTOL * outline_area {
        failures.push(format!(
            "cells cover area {cell_area:.9} but the outline encloses {outline_area:.9} \
             (gaps or spill-over)"
        ));
    }

    CheckOutcome::from_failures(failures)
}

fn is_convex_ccw(cell: &PolyCell) -> bool {
    let v = &cell.vertices;
    let n = v.len();
    if n < 3 {
        return false;
    }
    for k in 0..n {
        let a = v[k];
        let b = v[(k + 1) % n];
        let c = v[(k + 2) % n];
        if (b - a).cross(c - b) < -GEOM_EPS {
            return false;
        }
    }
    true
}

fn has_edge(cell: &PolyCell, p: Point2, q: Point2) -> bool {
    cell.edges().any(|(a, b)| {
        ((a - p).norm() <= 10.0 * GEOM_EPS && (b - q).norm() <= 10.0 * GEOM_EPS)
            || ((a - q).norm() <= 10.0 * GEOM_EPS && (b - p).norm() <= 10.0 * GEOM_EPS)
    })
}

fn polygon_area(pts: &[Point2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for k in 0..pts.len() {
        let p = pts[k];
        let q = pts[(k + 1) % pts.len()];
        a += p.x * q.y - q.x * p.y;
    }
    (0.5 * a).abs()
}

fn polygon_diameter(pts: &[Point2]) -> f64 {
    let mut d = 0.0f64;
    for (k, p) in pts.iter().enumerate() {
        for q in &pts[k + 1..] {
            d = d.max((*p - *q).norm());
        }
    }
    d
}

fn farthest_pair(pts: &[Point2]) -> (Point2, Point2) {
    let mut best = (pts[0], pts[0], 0.0f64);
    for (k, p) in pts.iter().enumerate() {
        for q in &pts[k + 1..] {
            let d = (*p - *q).norm();
            if d > best.2 {
                best = (*p, *q, d);
            }
        }
    }
    (best.0, best.1)
}

/// Sutherland–Hodgman clipping of `subject` against the convex,
/// counterclockwise polygon `clip`.
fn convex_clip(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    let n = clip.len();
    for k in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[k];
        let b = clip[(k + 1) % n];
        let dir = b - a;
        let inside = |p: Point2| dir.cross(p - a) >= -GEOM_EPS;
        let input = std::mem::take(&mut output);
        let m = input.len();
        for idx in 0..m {
            let cur = input[idx];
            let next = input[(idx + 1) % m];
            let cur_in = inside(cur);
            let next_in = inside(next);
            if cur_in {
                output.push(cur);
            }
            if cur_in != next_in {
                // Edge crosses the clip line: add the intersection point.
                let denom = dir.cross(next - cur);
                if denom.abs() > f64::EPSILON {
                    let t = (dir.cross(a - cur) / denom).clamp(0.0, 1.0);
                    output.push(cur + (next - cur) * t);
                }
            }
        }
    }
    output
}

// ---------------------------------------------------------------------------
// 2. Transfer bands
// ---------------------------------------------------------------------------

fn check_transfer_bands(partition: &Partition, params: &RegionParams) -> CheckOutcome {
    let mut failures = Vec::new();
    for cell in partition.cells().iter() {
        for (edge_idx, (a, b)) in cell.edges().enumerate() {
            if chord_at_depth(cell, a, b, params.l, params.l).is_none() {
                failures.push(format!(
                    "cell {} has an empty transfer band on side {} \
                     (({:.4},{:.4})-({:.4},{:.4})) at depth {}",
                    cell.id, edge_idx, a.x, a.y, b.x, b.y, params.l
                ));
            }
        }
    }
    CheckOutcome::from_failures(failures)
}

/// Positions available to a disc center standing at inward depth `depth`
/// from side `(a, b)` while keeping `clearance` from every other edge.
///
/// Returns the endpoints of that segment, or `None` if the cell is too
/// shallow or too narrow behind the side. With `clearance = l` this is the
/// set of tangent positions a disc of radius `l` can occupy in front of the
/// side, which is what transfers and spawns need.
pub(crate) fn chord_at_depth(
    cell: &PolyCell,
    a: Point2,
    b: Point2,
    depth: f64,
    clearance: f64,
) -> Option<(Point2, Point2)> {
    let dir = b - a;
    let len = dir.norm();
    if len <= GEOM_EPS {
        return None;
    }
    let n_in = dir.perp() * (1.0 / len); // CCW polygon: left of the edge is inside.
    let q0 = a + n_in * depth;
    // Clip the parameterized line q0 + t * dir against every edge half-plane,
    // each shifted inward by the clearance. The reference side itself sits at
    // signed distance `depth`, so it only constrains t when depth < clearance.
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for (ea, eb) in cell.edges() {
        let edir = eb - ea;
        let enorm = edir.norm();
        let reference = (ea - a).norm() <= GEOM_EPS && (eb - b).norm() <= GEOM_EPS;
        let shift = if reference { 0.0 } else { clearance };
        // inside: edir x (p - ea) >= shift * |edir|, p = q0 + t*dir
        let c0 = edir.cross(q0 - ea) - shift * enorm;
        let c1 = edir.cross(dir);
        if c1.abs() <= f64::EPSILON * enorm * len {
            if c0 < -GEOM_EPS * enorm {
                return None; // Parallel and strictly outside.
            }
        } else if c1 > 0.0 {
            t_lo = t_lo.max(-c0 / c1);
        } else {
            t_hi = t_hi.min(-c0 / c1);
        }
    }
    if t_hi - t_lo > GEOM_EPS {
        Some((q0 + dir * t_lo, q0 + dir * t_hi))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// 3. Projection of movement vectors onto shared sides
// ---------------------------------------------------------------------------

fn check_projection(partition: &Partition) -> CheckOutcome {
    let mut failures = Vec::new();
    for (i, j) in partition.shared_side_keys().collect::<Vec<_>>() {
        for (src, dst) in [(i, j), (j, i)] {
            let u = partition.move_vector(src, dst).unwrap();
            if (u.norm() - 1.0).abs() > 1e-6 {
                failures.push(format!(
                    "movement vector {src}->{dst} is not unit length ({:.6})",
                    u.norm()
                ));
                continue;
            }
            let n_out = partition.side_normal(src, dst).unwrap();
            if u.dot(n_out) <= GEOM_EPS {
                failures.push(format!(
                    "movement vector {src}->{dst} does not point toward cell {dst}"
                ));
                continue;
            }
            let side = partition.shared_side(src, dst).unwrap();
            let (a, b) = side.segment;
            let dir = b - a;
            let len = dir.norm();
            let cell = partition.cell(src);
            for w in &cell.vertices {
                // Ray w + t*u against the supporting line a + s*dir.
                let denom = u.cross(dir);
                if denom.abs() <= f64::EPSILON {
                    failures.push(format!(
                        "movement vector {src}->{dst} is parallel to the shared side"
                    ));
                    break;
                }
                let s = u.cross(*w - a) / denom;
                if !(-GEOM_EPS / len..=1.0 + GEOM_EPS / len).contains(&s) {
                    failures.push(format!(
                        "vertex ({:.4},{:.4}) of cell {src} leaves the shared side \
                         when pushed toward {dst} (hits at parameter {s:.4})",
                        w.x, w.y
                    ));
                    break;
                }
            }
        }
    }
    CheckOutcome::from_failures(failures)
}

// ---------------------------------------------------------------------------
// 4. Directed transfer feasibility
// ---------------------------------------------------------------------------

fn check_feasibility(partition: &Partition, params: &RegionParams) -> CheckOutcome {
    let mut failures = Vec::new();
    for (i, j) in partition.shared_side_keys().collect::<Vec<_>>() {
        let side = partition.shared_side(i, j).unwrap();
        let (a, b) = side.segment;
        let ci = partition.cell(i);
        let cj = partition.cell(j);
        // Chord of each cell's transfer band along this side. For cell j the
        // side runs in the opposite orientation.
        let chord_i = chord_at_depth(ci, a, b, params.l, params.l).map(|(p, q)| (p - q).norm());
        let chord_j = chord_at_depth(cj, b, a, params.l, params.l).map(|(p, q)| (p - q).norm());
        for ((src, dst), (c_src, c_dst)) in
            [((i, j), (chord_i, chord_j)), ((j, i), (chord_j, chord_i))]
        {
            match (c_src, c_dst) {
                (Some(ls), Some(ld)) => {
                    if ls > ld + 1e-9 {
                        failures.push(format!(
                            "transfer {src}->{dst} infeasible: the entry band spans \
                             {ls:.6} of the shared side but the landing band only {ld:.6}"
                        ));
                    }
                }
                (None, _) | (_, None) => {
                    // Reported by the transfer-band check; nothing to compare.
                }
            }
        }
    }
    CheckOutcome::from_failures(failures)
}

// ---------------------------------------------------------------------------
// 5. Cell capacity
// ---------------------------------------------------------------------------

fn check_capacity(partition: &Partition, params: &RegionParams) -> CheckOutcome {
    let mut failures = Vec::new();
    for cell in partition.cells().iter() {
        let r = cell.inradius();
        if r + 1e-12 < params.l {
            failures.push(format!(
                "cell {} has inradius {r:.6} < disc radius {}; a disc cannot fit inside",
                cell.id, params.l
            ));
        }
    }
    CheckOutcome::from_failures(failures)
}

#[cfg(test)]
mod tests {
    use super::super::builders::{
        build_parallelogram_grid, build_square_grid, build_triangular_grid, from_cells,
    };
    use super::super::Vec2;
    use super::*;

    fn params(l: f64, rs: f64) -> RegionParams {
        RegionParams::new(l, rs).unwrap()
    }

    #[test]
    fn regular_grids_pass_all_checks() {
        let p = params(0.2, 0.05);
        for partition in [
            build_square_grid(3, 3, 1.0).unwrap(),
            build_triangular_grid(2, 4, 1.0).unwrap(),
            build_parallelogram_grid(2, 3, 1.0, Vec2::new(0.3, 1.0)).unwrap(),
        ] {
            let report = validate_partition(&partition, &p);
            assert!(report.all_passed(), "unexpected failures: {report}");
        }
    }

    #[test]
    fn oversized_disc_fails_capacity_and_bands() {
        let partition = build_square_grid(2, 2, 1.0).unwrap();
        let report = validate_partition(&partition, &params(0.6, 0.05));
        assert!(!report.cell_capacity.passed);
        assert!(!report.transfer_bands.passed);
    }

    /// Square flanked by two 45-degree right triangles, as found in a
    /// snub-square-like layout. The triangles' bands along the shared side
    /// are shorter than the square's, so square->triangle transfers must be
    /// rejected while triangle->square transfers are fine.
    #[test]
    fn snub_square_contact_fails_only_into_the_triangle() {
        let cells = vec![
            PolyCell {
                id: CellId(1),
                vertices: vec![
                    Point2::new(0.0, 0.0),
                    Point2::new(1.0, 0.0),
                    Point2::new(1.0, 1.0),
                    Point2::new(0.0, 1.0),
                ],
            },
            PolyCell {
                id: CellId(2),
                vertices: vec![
                    Point2::new(1.0, 0.0),
                    Point2::new(2.0, 0.0),
                    Point2::new(1.0, 1.0),
                ],
            },
        ];
        let partition = from_cells(cells).unwrap();
        let report = validate_partition(&partition, &params(0.2, 0.05));
        assert!(!report.transfer_feasibility.passed);
        let msgs = report.transfer_feasibility.failures.join("\n");
        assert!(msgs.contains("1->2"), "got: {msgs}");
        assert!(!msgs.contains("2->1"), "got: {msgs}");
    }

    #[test]
    fn skewed_move_vector_fails_projection() {
        let mut partition = build_square_grid(1, 2, 1.0).unwrap();
        let diag = Vec2::new(1.0, 1.0).normalized();
        partition.set_move_vector(CellId(1), CellId(2), diag);
        let report = validate_partition(&partition, &params(0.2, 0.05));
        assert!(!report.projection.passed);
        assert!(report.projection.failures[0].contains("1"));
    }

    #[test]
    fn partial_side_contact_is_reported() {
        // Two unit squares offset vertically by one half: they touch along
        // half a side, which breaks the side-to-side axiom.
        let cells = vec![
            PolyCell {
                id: CellId(1),
                vertices: vec![
                    Point2::new(0.0, 0.0),
                    Point2::new(1.0, 0.0),
                    Point2::new(1.0, 1.0),
                    Point2::new(0.0, 1.0),
                ],
            },
            PolyCell {
                id: CellId(2),
                vertices: vec![
                    Point2::new(1.0, 0.5),
                    Point2::new(2.0, 0.5),
                    Point2::new(2.0, 1.5),
                    Point2::new(1.0, 1.5),
                ],
            },
        ];
        // Stitching finds no full shared side, so the outline will not close.
        match from_cells(cells) {
            Err(_) => {}
            Ok(partition) => {
                let report = validate_partition(&partition, &params(0.2, 0.05));
                assert!(!report.partition_axioms.passed);
            }
        }
    }

    #[test]
    fn chord_lengths_match_hand_computation() {
        let square = PolyCell {
            id: CellId(1),
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
        };
        let (p, q) =
            chord_at_depth(&square, Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), 0.25, 0.0)
                .unwrap();
        assert!((p.y - 0.25).abs() < 1e-12 && (q.y - 0.25).abs() < 1e-12);
        assert!(((p - q).norm() - 1.0).abs() < 1e-12);
        // With lateral clearance equal to the depth, the side walls cut the
        // chord down symmetrically.
        let (p, q) =
            chord_at_depth(&square, Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), 0.25, 0.25)
                .unwrap();
        assert!(((p - q).norm() - 0.5).abs() < 1e-12);

        let tri = PolyCell {
            id: CellId(2),
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.5, 3f64.sqrt() / 2.0),
            ],
        };
        // Equilateral side 1: chord at depth t has length 1 - 2*t/tan(60) = 1 - 2t/sqrt(3).
        let (p, q) =
            chord_at_depth(&tri, Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), 0.2, 0.0).unwrap();
        let expect = 1.0 - 2.0 * 0.2 / 3f64.sqrt();
        assert!(((p - q).norm() - expect).abs() < 1e-12);
    }
}
