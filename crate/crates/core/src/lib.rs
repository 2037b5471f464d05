//! Simulation and analysis library for decentralized traffic control of
//! colored disc entities on a partitioned planar environment.
//!
//! The plane is carved into convex polygonal cells. Each cell runs the same
//! synchronous, self-stabilizing local program: it maintains distance-vector
//! routes toward per-color target cells, grants movement signals to one
//! neighbor at a time under a separation gate, and participates in a locking
//! scheme that serializes colors through cells where several colors' routes
//! overlap. Entities are open discs spawned at per-color source cells and
//! absorbed at matching targets; cells may crash and recover between rounds.
//!
//! Module map:
//! - [`geometry`]: partitions, builders, region math, feasibility validation
//! - [`protocol`]: per-cell state and the round pipeline (route, lock,
//!   signal, move, spawn) plus crash/recovery transitions
//! - [`arbitration`]: overlap groups and the color-lock rotation
//! - [`oracles`]: independent reference computations (BFS distances, entity
//!   graphs, shared-cell sets) and runtime invariant checkers
//! - [`harness`]: config parsing, seeded runs, failure injection, parameter
//!   sweeps, CSV and trace emission

pub mod arbitration;
pub mod geometry;
pub mod harness;
pub mod oracles;
pub mod protocol;
pub mod trace;

pub use geometry::{
    CellId, Partition, Point2, RegionParams, SideRef, ValidationReport, Vec2,
};
pub use harness::{
    parse_config, RunOptions, RunResult, Scenario, SweepParam, SweepRow, SweepSpec,
};
pub use oracles::{InvariantReport, Violation};
pub use protocol::{
    CellState, Color, ColorSpec, Entity, EntityId, ScenarioConfig, SystemState,
};
