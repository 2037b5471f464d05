//! Shared scenario builders for the benchmark suite.

use cellflow_core::geometry::{build_square_grid, CellId, RegionParams};
use cellflow_core::protocol::{initial_state, ColorSpec, ScenarioConfig, SystemState};

/// A straight single-color corridor on an 8x8 grid, the workhorse layout
/// of the throughput experiments.
pub fn straight_path_state() -> SystemState {
    let partition = build_square_grid(8, 8, 1.0).unwrap();
    let config = ScenarioConfig {
        params: RegionParams::new(0.25, 0.05).unwrap(),
        speed: 0.2,
        horizon: 2500,
        p_fail: 0.0,
        p_recover: 0.0,
        colors: vec![ColorSpec {
            name: "c0".into(),
            source: CellId(1),
            target: CellId(57),
        }],
        spawn_per_round: 1,
        spawn_backoff: 1,
        lock_timeout: 8,
        protect_targets: true,
        seed: 0,
    };
    initial_state(partition, config).unwrap()
}

/// Four colors whose routes all cross the center of an 8x8 grid, which
/// keeps the gossip, overlap, and arbitration machinery busy every round.
pub fn crossing_colors_state() -> SystemState {
    let partition = build_square_grid(8, 8, 1.0).unwrap();
    let colors = vec![
        ColorSpec { name: "c0".into(), source: CellId(1), target: CellId(64) },
        ColorSpec { name: "c1".into(), source: CellId(8), target: CellId(57) },
        ColorSpec { name: "c2".into(), source: CellId(57), target: CellId(8) },
        ColorSpec { name: "c3".into(), source: CellId(64), target: CellId(1) },
    ];
    let config = ScenarioConfig {
        params: RegionParams::new(0.25, 0.05).unwrap(),
        speed: 0.2,
        horizon: 2500,
        p_fail: 0.0,
        p_recover: 0.0,
        colors,
        spawn_per_round: 1,
        spawn_backoff: 1,
        lock_timeout: 8,
        protect_targets: true,
        seed: 0,
    };
    initial_state(partition, config).unwrap()
}
