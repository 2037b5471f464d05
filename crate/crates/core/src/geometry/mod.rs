//! Planar partitions of convex polygonal cells and the region math the
//! protocol steps rely on: shared sides, normals, movement vectors, transfer
//! and safety bands, and the tangent placement of an entity after it crosses
//! into a neighboring cell.
//!
//! Coordinates are `f64` throughout. Geometric predicates use the absolute
//! tolerance [`GEOM_EPS`]; partitions produced by the builders in
//! [`builders`] have exactly coincident shared vertices, so the tolerance
//! only matters for hand-made partitions and accumulated motion.

mod builders;
mod serial;
mod validate;

pub use builders::{
    build_parallelogram_grid, build_square_grid, build_triangular_grid, from_cells,
};
pub use serial::{partition_from_json, partition_to_json};
pub use validate::{validate_partition, CheckOutcome, ValidationReport};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

/// Absolute tolerance for geometric predicates: point containment, tangency
/// of an entity disc against a cell side, and vertex welding when stitching
/// hand-made cells into a partition.
pub const GEOM_EPS: f64 = 1e-9;

/// Relative tolerance when comparing the summed cell area against the area
/// of the environment outline.
pub const AREA_RTOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Scalars and small linear algebra
// ---------------------------------------------------------------------------

/// Identifier of a cell. Ids are 1-based and contiguous within a partition;
/// builders assign them row-major starting at 1.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct CellId(pub u32);

impl CellId {
    /// Zero-based index into per-cell arrays.
    pub fn idx(self) -> usize {
        (self.0 - 1) as usize
    }

    /// Inverse of [`CellId::idx`].
    pub fn from_idx(idx: usize) -> Self {
        CellId(idx as u32 + 1)
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// A displacement or direction in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Z-component of the cross product; positive when `o` lies
    /// counterclockwise of `self`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counterclockwise rotation by 90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Vec2;
    fn sub(self, o: Point2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Add<Vec2> for Point2 {
    type Output = Point2;
    fn add(self, v: Vec2) -> Point2 {
        Point2::new(self.x + v.x, self.y + v.y)
    }
}

impl std::ops::Sub<Vec2> for Point2 {
    type Output = Point2;
    fn sub(self, v: Vec2) -> Point2 {
        Point2::new(self.x - v.x, self.y - v.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Euclidean distance from a point to the closed segment `[a, b]`.
pub fn distance_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

// ---------------------------------------------------------------------------
// Entity radii and derived region depths
// ---------------------------------------------------------------------------

/// Disc radius `l` and minimum surface-to-surface separation `rs`.
///
/// Two entity centers must stay at least `2l + rs` apart; the derived depth
/// `d = rs + l` sizes the safety band (`3d`) a cell keeps clear before
/// inviting traffic across a side, and `l` sizes the transfer band in which
/// an entity's disc touches the side and crossing is triggered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    /// Entity disc radius.
    pub l: f64,
    /// Required gap between disc surfaces.
    pub rs: f64,
}

impl RegionParams {
    pub fn new(l: f64, rs: f64) -> Result<Self, GeometryError> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(GeometryError::InvalidParams(format!(
                "l must be positive and finite, got {l}"
            )));
        }
        if !(rs >= 0.0) || !rs.is_finite() {
            return Err(GeometryError::InvalidParams(format!(
                "rs must be non-negative and finite, got {rs}"
            )));
        }
        Ok(RegionParams { l, rs })
    }

    /// Depth unit `d = rs + l` (exact; never stored separately).
    pub fn d(&self) -> f64 {
        self.rs + self.l
    }

    /// Minimum center-to-center separation between two entities.
    pub fn min_separation(&self) -> f64 {
        2.0 * self.l + self.rs
    }
}

// ---------------------------------------------------------------------------
// Cells, sides, partitions
// ---------------------------------------------------------------------------

/// The full side shared by two adjacent cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideRef {
    /// Cell on whose behalf the side is being referenced.
    pub cell_a: CellId,
    /// Neighbor across the side.
    pub cell_b: CellId,
    /// Endpoints in the partition's canonical order for this side.
    pub segment: (Point2, Point2),
}

impl SideRef {
    pub fn midpoint(&self) -> Point2 {
        Point2::new(
            0.5 * (self.segment.0.x + self.segment.1.x),
            0.5 * (self.segment.0.y + self.segment.1.y),
        )
    }

    pub fn direction(&self) -> Vec2 {
        self.segment.1 - self.segment.0
    }

    pub fn length(&self) -> f64 {
        self.direction().norm()
    }
}

/// A convex polygonal cell. Vertices are stored counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCell {
    pub id: CellId,
    pub vertices: Vec<Point2>,
}

impl PolyCell {
    pub fn n_sides(&self) -> usize {
        self.vertices.len()
    }

    /// Edges as ordered vertex pairs, counterclockwise.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        let mut a = 0.0;
        for (p, q) in self.edges() {
            a += p.x * q.y - q.x * p.y;
        }
        0.5 * a
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point2 {
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        for (p, q) in self.edges() {
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
            a += w;
        }
        let a = 0.5 * a;
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Whether the point lies in the closed cell, within `eps` of the
    /// boundary. Assumes counterclockwise convex vertices.
    pub fn contains(&self, p: Point2, eps: f64) -> bool {
        self.edges().all(|(a, b)| {
            let edge = b - a;
            let n = edge.norm();
            // Signed distance of p left of edge ab, scaled to units of length.
            edge.cross(p - a) / n >= -eps
        })
    }

    /// Signed distance from `p` to the supporting line of each edge, positive
    /// inside. The minimum over edges is the depth of `p` inside the cell.
    pub fn inner_depth(&self, p: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let edge = b - a;
                edge.cross(p - a) / edge.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Radius of the largest inscribed disc.
    ///
    /// The optimum of "maximize min signed edge distance" over a convex
    /// polygon is attained with three active edges (or two parallel ones,
    /// which a triple still witnesses), so enumerating edge triples is exact.
    pub fn inradius(&self) -> f64 {
        let edges: Vec<(Point2, Vec2)> = self
            .edges()
            .map(|(a, b)| (a, (b - a).normalized()))
            .collect();
        let m = edges.len();
        let depth = |p: Point2| -> f64 {
            edges
                .iter()
                .map(|(a, dir)| dir.cross(p - *a))
                .fold(f64::INFINITY, f64::min)
        };
        let mut best = depth(self.centroid()).max(0.0);
        for i in 0..m {
            for j in (i + 1)..m {
                for k in (j + 1)..m {
                    if let Some(p) = equidistant_point(edges[i], edges[j], edges[k]) {
                        let r = depth(p);
                        if r > best {
                            best = r;
                        }
                    }
                }
            }
        }
        best
    }
}

/// Center of a disc tangent to three inward half-planes, if the 3x3 system
/// is non-degenerate: solves `cross(dir_e, p - a_e) = r` for all three.
fn equidistant_point(
    e1: (Point2, Vec2),
    e2: (Point2, Vec2),
    e3: (Point2, Vec2),
) -> Option<Point2> {
    // cross(dir, p - a) = -dir.y * (px - ax) + dir.x * (py - ay) = r
    // Unknowns (px, py, r); each edge gives one linear equation.
    let row = |(a, d): (Point2, Vec2)| (-d.y, d.x, -1.0, d.y * a.x - d.x * a.y);
    let (a1, b1, c1, d1) = row(e1);
    let (a2, b2, c2, d2) = row(e2);
    let (a3, b3, c3, d3) = row(e3);
    let det = a1 * (b2 * c3 - b3 * c2) - b1 * (a2 * c3 - a3 * c2)
        + c1 * (a2 * b3 - a3 * b2);
    if det.abs() < 1e-12 {
        return None;
    }
    let dx = d1 * (b2 * c3 - b3 * c2) - b1 * (d2 * c3 - d3 * c2)
        + c1 * (d2 * b3 - d3 * b2);
    let dy = a1 * (d2 * c3 - d3 * c2) - d1 * (a2 * c3 - a3 * c2)
        + c1 * (a2 * d3 - a3 * d2);
    Some(Point2::new(dx / det, dy / det))
}

/// A partition of a simply connected planar environment into convex cells,
/// together with the adjacency structure and the per-side movement vectors
/// entities follow when crossing between cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    cells: Vec<PolyCell>,
    /// Outline of the environment (union of the cells), counterclockwise.
    outline: Vec<Point2>,
    neighbors: Vec<BTreeSet<CellId>>,
    /// Canonical shared segment per unordered neighbor pair (keyed min, max).
    shared_sides: BTreeMap<(CellId, CellId), (Point2, Point2)>,
    /// Unit movement vector per ordered neighbor pair.
    move_vectors: BTreeMap<(CellId, CellId), Vec2>,
}

impl Partition {
    pub(crate) fn new(
        cells: Vec<PolyCell>,
        outline: Vec<Point2>,
        neighbors: Vec<BTreeSet<CellId>>,
        shared_sides: BTreeMap<(CellId, CellId), (Point2, Point2)>,
        move_vectors: BTreeMap<(CellId, CellId), Vec2>,
    ) -> Self {
        Partition {
            cells,
            outline,
            neighbors,
            shared_sides,
            move_vectors,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[PolyCell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> &PolyCell {
        &self.cells[id.idx()]
    }

    pub fn contains_id(&self, id: CellId) -> bool {
        id.0 >= 1 && (id.0 as usize) <= self.cells.len()
    }

    pub fn outline(&self) -> &[Point2] {
        &self.outline
    }

    pub fn outline_area(&self) -> f64 {
        let n = self.outline.len();
        let mut a = 0.0;
        for k in 0..n {
            let p = self.outline[k];
            let q = self.outline[(k + 1) % n];
            a += p.x * q.y - q.x * p.y;
        }
        (0.5 * a).abs()
    }

    pub fn ids(&self) -> impl Iterator<Item = CellId> + '_ {
        (1..=self.cells.len() as u32).map(CellId)
    }

    pub fn neighbors(&self, id: CellId) -> &BTreeSet<CellId> {
        &self.neighbors[id.idx()]
    }

    pub fn are_neighbors(&self, a: CellId, b: CellId) -> bool {
        self.neighbors[a.idx()].contains(&b)
    }

    pub fn n_shared_sides(&self) -> usize {
        self.shared_sides.len()
    }

    pub fn shared_side_keys(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.shared_sides.keys().copied()
    }

    /// The side shared by `i` and `j`, referenced from `i`'s perspective.
    pub fn shared_side(&self, i: CellId, j: CellId) -> Result<SideRef, GeometryError> {
        let key = (i.min(j), i.max(j));
        let segment = self
            .shared_sides
            .get(&key)
            .copied()
            .ok_or(GeometryError::NotNeighbors { a: i, b: j })?;
        Ok(SideRef {
            cell_a: i,
            cell_b: j,
            segment,
        })
    }

    /// Unit normal of the shared side, pointing out of `i` into `j`.
    /// Antisymmetric: `side_normal(j, i) == -side_normal(i, j)`.
    pub fn side_normal(&self, i: CellId, j: CellId) -> Result<Vec2, GeometryError> {
        let side = self.shared_side(i, j)?;
        let n = side.direction().perp().normalized();
        // Orient toward j's centroid; convex cells keep the centroid strictly
        // off the supporting line of any of their sides.
        let toward_j = self.cell(j).centroid() - side.midpoint();
        Ok(if n.dot(toward_j) >= 0.0 { n } else { -n })
    }

    /// Unit vector entities on `i` follow while routed toward neighbor `j`.
    pub fn move_vector(&self, i: CellId, j: CellId) -> Result<Vec2, GeometryError> {
        self.move_vectors
            .get(&(i, j))
            .copied()
            .ok_or(GeometryError::NotNeighbors { a: i, b: j })
    }

    pub(crate) fn set_move_vector(&mut self, i: CellId, j: CellId, u: Vec2) {
        self.move_vectors.insert((i, j), u);
    }

    /// Euclidean distance from a point to the side shared by `i` and `j`.
    pub fn distance_to_side(
        &self,
        pt: Point2,
        i: CellId,
        j: CellId,
    ) -> Result<f64, GeometryError> {
        let side = self.shared_side(i, j)?;
        Ok(distance_to_segment(pt, side.segment.0, side.segment.1))
    }

    /// Whether a point of cell `i` lies within crossing range (distance at
    /// most `l`) of the side toward `j`.
    pub fn in_transfer_region(
        &self,
        i: CellId,
        j: CellId,
        pt: Point2,
        params: &RegionParams,
    ) -> Result<bool, GeometryError> {
        Ok(self.distance_to_side(pt, i, j)? <= params.l)
    }

    /// Whether a point of cell `i` lies within the clearance band (distance
    /// at most `3d`) of the side toward `j`. A cell only signals a neighbor
    /// across a side whose band holds none of its own entities.
    pub fn in_safety_region(
        &self,
        i: CellId,
        j: CellId,
        pt: Point2,
        params: &RegionParams,
    ) -> Result<bool, GeometryError> {
        Ok(self.distance_to_side(pt, i, j)? <= 3.0 * params.d())
    }

    /// Landing position for an entity that crossed from `i` into `j`: the
    /// point where the entity's movement ray meets the line parallel to the
    /// shared side at depth `l` inside `j`, so the disc enters tangent to
    /// the side it crossed. Errors if the landing point falls outside `j`.
    pub fn reset_entity_position(
        &self,
        pt: Point2,
        i: CellId,
        j: CellId,
        params: &RegionParams,
    ) -> Result<Point2, GeometryError> {
        let side = self.shared_side(i, j)?;
        let n = self.side_normal(i, j)?;
        let u = self.move_vector(i, j)?;
        let q0 = side.segment.0 + n * params.l;
        let dir = side.direction();
        // Solve pt + t*u = q0 + s*dir for t.
        let denom = u.cross(dir);
        if denom.abs() < 1e-12 {
            return Err(GeometryError::RayParallelToSide { a: i, b: j });
        }
        let t = (q0 - pt).cross(dir) / denom;
        let landed = pt + u * t;
        if !self.cell(j).contains(landed, GEOM_EPS) {
            return Err(GeometryError::ResetOutsideCell {
                cell: j,
                x: landed.x,
                y: landed.y,
            });
        }
        Ok(landed)
    }

    /// Hop distances from `from` over non-failed cells; `u32::MAX` marks
    /// unreachable. `failed` is indexed by cell index and may be empty.
    pub fn bfs_hops(&self, from: CellId, failed: &[bool]) -> Vec<u32> {
        let n = self.cells.len();
        let is_failed = |id: CellId| failed.get(id.idx()).copied().unwrap_or(false);
        let mut dist = vec![u32::MAX; n];
        if is_failed(from) {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[from.idx()] = 0;
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            let d = dist[c.idx()];
            for &nb in &self.neighbors[c.idx()] {
                if !is_failed(nb) && dist[nb.idx()] == u32::MAX {
                    dist[nb.idx()] = d + 1;
                    queue.push_back(nb);
                }
            }
        }
        dist
    }

    /// Largest finite hop distance between two non-failed cells (the
    /// diameter of the communication graph, taken per connected component).
    pub fn graph_diameter(&self, failed: &[bool]) -> u32 {
        let mut best = 0;
        for id in self.ids() {
            if failed.get(id.idx()).copied().unwrap_or(false) {
                continue;
            }
            for d in self.bfs_hops(id, failed) {
                if d != u32::MAX && d > best {
                    best = d;
                }
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cells {a} and {b} are not neighbors")]
    NotNeighbors { a: CellId, b: CellId },
    #[error("unknown cell id {0}")]
    UnknownCell(CellId),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid region parameters: {0}")]
    InvalidParams(String),
    #[error("movement vector between {a} and {b} is parallel to their shared side")]
    RayParallelToSide { a: CellId, b: CellId },
    #[error("landing point ({x}, {y}) falls outside destination cell {cell}")]
    ResetOutsideCell { cell: CellId, x: f64, y: f64 },
    #[error("malformed partition document: {0}")]
    MalformedDocument(String),
}
