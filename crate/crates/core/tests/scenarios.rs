//! Worked scenarios with hand-derived expectations: every assertion below
//! was computed by hand from the round pipeline (route, lock, signal,
//! move, spawn) and the region arithmetic, then frozen. They pin down the
//! exact timing of spawns, grants, crossings, and deliveries; the fairness
//! rotation; the clearance band; spawn backoff; intersection bookkeeping
//! across many colors; and crash/recovery behavior on and off the route.

use std::collections::BTreeSet;

use cellflow_core::geometry::{build_square_grid, CellId, Point2, RegionParams};
use cellflow_core::harness::{run, RunOptions, Scenario};
use cellflow_core::oracles::{check_invariants, color_shared_cells, shared_colors};
use cellflow_core::protocol::{
    initial_state, Color, ColorSpec, Entity, EntityId, Hops, ScenarioConfig, SystemState,
    UpdatePhase,
};

const POS_EPS: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

fn colors(specs: &[(&str, u32, u32)]) -> Vec<ColorSpec> {
    specs
        .iter()
        .map(|&(name, source, target)| ColorSpec {
            name: name.into(),
            source: CellId(source),
            target: CellId(target),
        })
        .collect()
}

fn config(l: f64, rs: f64, v: f64, specs: &[(&str, u32, u32)]) -> ScenarioConfig {
    ScenarioConfig {
        params: RegionParams::new(l, rs).expect("valid disc parameters"),
        speed: v,
        horizon: 0,
        p_fail: 0.0,
        p_recover: 0.0,
        colors: colors(specs),
        spawn_per_round: 0,
        spawn_backoff: 1,
        lock_timeout: 8,
        protect_targets: true,
        seed: 0,
    }
}

fn grid_state(rows: usize, cols: usize, cfg: ScenarioConfig) -> SystemState {
    let partition = build_square_grid(rows, cols, 1.0).expect("valid grid");
    initial_state(partition, cfg).expect("valid scenario")
}

/// Drop an entity onto a cell by hand and keep the spawn ledger balanced.
fn place(state: &mut SystemState, cell: u32, id: u64, color: Color, x: f64, y: f64) {
    let idx = CellId(cell).idx();
    state.cells[idx].entities.push(Entity {
        id: EntityId(id),
        color,
        center: Point2::new(x, y),
    });
    state.cells[idx].etype = Some(color);
    state.spawned[color.idx()] += 1;
}

/// Cell and center of the entity with this id, if it is still alive.
fn locate(state: &SystemState, id: u64) -> Option<(CellId, Point2)> {
    state
        .entities()
        .find(|(_, e)| e.id == EntityId(id))
        .map(|(c, e)| (c, e.center))
}

fn assert_at(state: &SystemState, id: u64, cell: u32, x: f64, y: f64, what: &str) {
    let (at, center) = locate(state, id).unwrap_or_else(|| panic!("{what}: entity {id} is gone"));
    assert_eq!(at, CellId(cell), "{what}: entity {id} on the wrong cell");
    assert!(
        (center.x - x).abs() < POS_EPS && (center.y - y).abs() < POS_EPS,
        "{what}: entity {id} at ({}, {}), expected ({x}, {y})",
        center.x,
        center.y
    );
}

fn assert_clean(state: &SystemState, what: &str) {
    let report = check_invariants(state);
    assert!(
        report.is_clean(),
        "{what}: invariant violations: {:?}",
        report.violations
    );
}

// ---------------------------------------------------------------------------
// Intersection bookkeeping across six colors
// ---------------------------------------------------------------------------

/// Six colors on a 2x7 grid whose routes form three separate conflict
/// structures: a chain a-b-c overlapping pairwise at single cells (so a
/// and c are entangled only transitively), an isolated pair d-e, and a
/// loner f. After convergence every live cell must report the same
/// hand-computed intersections and entanglements, the arbitration layer
/// must form exactly two groups, and the reference computations must
/// agree.
#[test]
fn route_overlap_components_match_the_hand_model() {
    // Row-major ids: bottom row 1..=7, top row 8..=14. Routes run along
    // the rows: a 1->3, b 3->5, c 5->7 (chained through cells 3 and 5);
    // d 8->10, e 10->12 (meeting at 10); f 13->14 alone.
    let cfg = config(
        0.2,
        0.05,
        0.1,
        &[
            ("a", 1, 3),
            ("b", 3, 5),
            ("c", 5, 7),
            ("d", 8, 10),
            ("e", 10, 12),
            ("f", 13, 14),
        ],
    );
    let mut state = grid_state(2, 7, cfg);
    for _ in 0..20 {
        state.update().expect("update");
    }

    let set = |ids: &[u32]| -> BTreeSet<CellId> { ids.iter().map(|&i| CellId(i)).collect() };
    let cset = |cs: &[u16]| -> BTreeSet<Color> { cs.iter().map(|&c| Color(c)).collect() };
    let want_pint: Vec<BTreeSet<CellId>> = vec![
        set(&[3]),
        set(&[3, 5]),
        set(&[5]),
        set(&[10]),
        set(&[10]),
        set(&[]),
    ];
    let want_entangled: Vec<BTreeSet<Color>> = vec![
        cset(&[1, 2]),
        cset(&[0, 2]),
        cset(&[0, 1]),
        cset(&[4]),
        cset(&[3]),
        cset(&[]),
    ];

    for (idx, cs) in state.cells.iter().enumerate() {
        for c in 0..6 {
            assert_eq!(
                cs.pint[c], want_pint[c],
                "cell {}: intersection view for color {c}",
                idx + 1
            );
            assert_eq!(
                cs.lockcolors[c], want_entangled[c],
                "cell {}: entanglement view for color {c}",
                idx + 1
            );
        }
    }

    for c in 0..6u16 {
        assert_eq!(
            shared_colors(&state, Color(c)),
            want_entangled[c as usize],
            "reference entanglement for color {c}"
        );
        assert_eq!(
            color_shared_cells(&state, Color(c)),
            want_pint[c as usize],
            "reference intersection for color {c}"
        );
    }

    let chain = state.arb.group_of(Color(0)).expect("chain group");
    assert_eq!(chain.colors, cset(&[0, 1, 2]));
    assert_eq!(chain.shared_cells, set(&[3, 5]));
    for c in 1..3u16 {
        assert_eq!(
            state.arb.group_of(Color(c)).expect("chain group").colors,
            chain.colors
        );
    }
    let pair = state.arb.group_of(Color(3)).expect("pair group");
    assert_eq!(pair.colors, cset(&[3, 4]));
    assert_eq!(pair.shared_cells, set(&[10]));
    assert!(
        state.arb.group_of(Color(5)).is_none(),
        "a color with no overlaps must not join any lock group"
    );
}

// ---------------------------------------------------------------------------
// Facing entities on a transient routing cycle
// ---------------------------------------------------------------------------

/// When the target crashes, the distance snapshot briefly makes the two
/// middle cells of a corridor route through each other. Entities parked
/// face to face across their shared side are each inside the other's
/// clearance band, so neither cell may signal and nothing moves — the
/// cycle dissolves into infinite distances without any crossing.
#[test]
fn facing_entities_on_a_route_cycle_get_no_signals_and_stay_put() {
    let mut cfg = config(0.2, 0.05, 0.05, &[("amber", 1, 4)]);
    cfg.protect_targets = false;
    let mut state = grid_state(1, 4, cfg);
    for _ in 0..4 {
        state.update().expect("update");
    }
    assert_eq!(state.cells[1].dist[0], Hops(2));
    assert_eq!(state.cells[2].dist[0], Hops(1));

    // Depth l on either side of the shared side at x = 2.
    place(&mut state, 2, 9001, Color(0), 1.8, 0.5);
    place(&mut state, 3, 9002, Color(0), 2.2, 0.5);
    state.fail(CellId(4)).expect("crash the target");

    let mut nexts = (None, None);
    let mut signals = (None, None);
    state
        .update_with(|s, phase| match phase {
            UpdatePhase::Route => nexts = (s.cells[1].next[0], s.cells[2].next[0]),
            UpdatePhase::Signal => signals = (s.cells[1].signal, s.cells[2].signal),
            _ => {}
        })
        .expect("update");

    // The stale snapshot routes 2 -> 3 (distance 1 last round) and
    // 3 -> 2 (its only live neighbor): a genuine two-cycle.
    assert_eq!(nexts, (Some(CellId(3)), Some(CellId(2))), "route cycle did not form");
    assert_eq!(signals, (None, None), "clearance must veto both grants");
    assert_at(&state, 9001, 2, 1.8, 0.5, "after the cycle round");
    assert_at(&state, 9002, 3, 2.2, 0.5, "after the cycle round");

    // A few rounds later every distance has counted up past the cell
    // count and collapsed to infinity; the entities still have not moved.
    for _ in 0..4 {
        state.update().expect("update");
    }
    for idx in 0..3 {
        assert_eq!(
            state.cells[idx].dist[0],
            Hops::INF,
            "cell {} should have no route left",
            idx + 1
        );
    }
    assert_at(&state, 9001, 2, 1.8, 0.5, "after route collapse");
    assert_at(&state, 9002, 3, 2.2, 0.5, "after route collapse");
    assert_clean(&state, "route-cycle scenario");
}

// ---------------------------------------------------------------------------
// The clearance band around a crossing side
// ---------------------------------------------------------------------------

/// A cell grants a waiting neighbor only while its own entities are all
/// more than three crossing depths (3d = 3(l + rs)) from the side being
/// crossed. An occupant two depths away vetoes the grant; one beyond
/// three depths does not. The vetoed neighbor is still recorded as
/// waiting.
#[test]
fn an_occupant_inside_the_clearance_band_vetoes_the_grant() {
    // l = 0.1, rs = 0.05: d = 0.15, band = 0.45 from the side at x = 1.
    for (blocker_x, expect_grant) in [(1.3, false), (1.5, true)] {
        let cfg = config(0.1, 0.05, 0.1, &[("amber", 1, 3)]);
        let mut state = grid_state(1, 3, cfg);
        for _ in 0..4 {
            state.update().expect("update");
        }
        place(&mut state, 1, 9001, Color(0), 0.5, 0.5);
        place(&mut state, 2, 9002, Color(0), blocker_x, 0.5);

        let mut signal_mid = None;
        state
            .update_with(|s, phase| {
                if phase == UpdatePhase::Signal {
                    signal_mid = s.cells[1].signal;
                }
            })
            .expect("update");

        if expect_grant {
            assert_eq!(signal_mid, Some(CellId(1)), "distant occupant must not veto");
            assert_at(&state, 9001, 1, 0.6, 0.5, "granted round");
        } else {
            assert_eq!(signal_mid, None, "occupant at 2d inside the band must veto");
            assert_at(&state, 9001, 1, 0.5, 0.5, "vetoed round");
            assert_eq!(
                state.cells[1].token,
                Some(CellId(1)),
                "the vetoed neighbor still holds the turn"
            );
            assert!(state.cells[1].neprev_streak >= 1, "waiting must be recorded");
        }
        // The blocker itself was granted by the empty target either way.
        assert_at(&state, 9002, 2, blocker_x + 0.1, 0.5, "blocker progress");
        assert_clean(&state, "clearance scenario");
    }
}

// ---------------------------------------------------------------------------
// Fair rotation among waiting neighbors
// ---------------------------------------------------------------------------

/// Two occupied cells wait to enter the same empty cell. The turn token
/// alternates between them every round — it advances as soon as a grant
/// is issued, not when the crossing completes — so the observed grant
/// sequence is 2, 3, 2, 3, and both entities are delivered back to back.
#[test]
fn a_cell_grants_waiting_neighbors_in_strict_rotation() {
    let cfg = config(0.25, 0.05, 0.2, &[("amber", 1, 4)]);
    let mut state = grid_state(2, 2, cfg);
    for _ in 0..2 {
        state.update().expect("update");
    }
    // Cells 2 and 3 both neighbor the target 4 and route straight into it.
    assert_eq!(state.cells[1].next[0], Some(CellId(4)));
    assert_eq!(state.cells[2].next[0], Some(CellId(4)));
    place(&mut state, 2, 9001, Color(0), 1.5, 0.5);
    place(&mut state, 3, 9002, Color(0), 0.5, 1.5);

    let mut grants: Vec<Option<CellId>> = Vec::new();
    let mut consumed_after: Vec<u64> = Vec::new();
    for _ in 0..6 {
        let mut grant = None;
        state
            .update_with(|s, phase| {
                if phase == UpdatePhase::Signal {
                    grant = s.cells[3].signal;
                }
            })
            .expect("update");
        grants.push(grant);
        consumed_after.push(state.consumed[0]);
    }

    let want: Vec<Option<CellId>> = vec![
        Some(CellId(2)),
        Some(CellId(3)),
        Some(CellId(2)),
        Some(CellId(3)),
        None,
        None,
    ];
    assert_eq!(grants, want, "grant rotation at the shared destination");
    assert_eq!(consumed_after, vec![0, 0, 1, 2, 2, 2], "delivery timing");
    assert_clean(&state, "rotation scenario");
}

// ---------------------------------------------------------------------------
// Spawn-to-delivery schedule on a corridor
// ---------------------------------------------------------------------------

/// Full functional trace of a three-cell corridor: the first spawn waits
/// out the warm-up (two diameters plus two rounds), each granted round
/// translates the disc by exactly v, the crossing resets it to depth l
/// inside the next cell, the follower is vetoed while the leader sits in
/// the clearance band, and delivery lands exactly five rounds after the
/// piped entity leaves the source.
#[test]
fn corridor_deliveries_follow_the_hand_computed_schedule() {
    let mut cfg = config(0.25, 0.05, 0.2, &[("amber", 1, 3)]);
    cfg.spawn_per_round = 1;
    let mut state = grid_state(1, 3, cfg);
    assert_eq!(state.warmup_rounds(), 6, "diameter 2 grid warms up in 2*2+2");

    let mut tick = |state: &mut SystemState| {
        state.update().expect("update");
        state.round
    };

    for _ in 0..5 {
        tick(&mut state);
        assert_eq!(state.spawned[0], 0, "no spawns during warm-up");
    }
    tick(&mut state); // round 6
    assert_eq!(state.spawned[0], 1, "first spawn right at the warm-up boundary");
    let e1 = state.cells[0].entities[0].id.0;
    assert_at(&state, e1, 1, 0.5, 0.5, "spawn site is the source centroid");

    tick(&mut state); // round 7: granted, one step of v
    assert_at(&state, e1, 1, 0.7, 0.5, "round 7");
    assert_eq!(state.spawned[0], 1, "site still too close to the first disc");

    tick(&mut state); // round 8: steps to 0.9, crosses, lands at depth l
    assert_at(&state, e1, 2, 1.25, 0.5, "round 8 crossing");
    assert_eq!(state.spawned[0], 2, "source free again, second spawn");
    let e2 = state.cells[0].entities[0].id.0;
    assert_at(&state, e2, 1, 0.5, 0.5, "second spawn parked at the centroid");

    for (round, x) in [(9, 1.45), (10, 1.65)] {
        tick(&mut state);
        assert_at(&state, e1, 2, x, 0.5, "leader marching");
        assert_at(&state, e2, 1, 0.5, 0.5, "follower vetoed by the clearance band");
        assert_eq!(state.round, round);
    }

    tick(&mut state); // round 11: leader steps to 1.85, is absorbed
    assert_eq!(state.consumed[0], 1, "delivery five rounds after leaving the source");
    assert!(locate(&state, e1).is_none(), "delivered entity is gone");
    assert_at(&state, e2, 1, 0.5, 0.5, "follower still waiting");

    tick(&mut state); // round 12: band is clear, follower moves
    assert_at(&state, e2, 1, 0.7, 0.5, "follower released");
    tick(&mut state); // round 13: follower crosses, third spawn appears
    assert_at(&state, e2, 2, 1.25, 0.5, "follower crossing");
    assert_eq!(state.spawned[0], 3, "pipeline period settles at five rounds");
    assert_clean(&state, "corridor schedule");
}

// ---------------------------------------------------------------------------
// Spawn backoff yields to waiting cross-traffic
// ---------------------------------------------------------------------------

/// A stray entity must pass through another color's source cell. With
/// backoff 1 the source yields: it spawns nothing while the stray is
/// waiting, the stray cuts through, and spawning resumes afterwards.
/// With a huge backoff the source keeps spawning, its occupants hold the
/// clearance band shut forever, and the stray starves in place.
#[test]
fn sources_back_off_for_waiting_cross_traffic_or_starve_it() {
    let build = |backoff: u32| -> SystemState {
        // l = 0.2, rs = 0.1: the band is 0.9, so an occupant anywhere on
        // the source cell vetoes the stray's entry (no knife edges).
        let mut cfg = config(0.2, 0.1, 0.07, &[("amber", 2, 3)]);
        cfg.spawn_per_round = 1;
        cfg.spawn_backoff = backoff;
        let mut state = grid_state(1, 3, cfg);
        for _ in 0..2 {
            state.update().expect("update");
        }
        place(&mut state, 1, 9001, Color(0), 0.23, 0.5);
        state
    };

    let mut yielding = build(1);
    let mut hogging = build(100);

    // Probe at round 8 while the stray is still on cell 1. The placed
    // stray itself counts as one spawn in the ledger, so a source that
    // injected nothing reads 1.
    for _ in 0..6 {
        yielding.update().expect("update");
        hogging.update().expect("update");
    }
    assert_eq!(yielding.round, 8);
    assert_eq!(yielding.spawned[0], 1, "backoff 1: waiting stray suppresses spawning");
    assert_eq!(yielding.cells[1].token, Some(CellId(1)), "stray holds the turn");
    assert_eq!(yielding.cells[1].neprev_streak, 6, "six straight waiting rounds");
    assert_at(&yielding, 9001, 1, 0.65, 0.5, "stray granted every round");

    assert_eq!(hogging.spawned[0], 2, "backoff 100: source spawned at warm-up");
    assert_at(&hogging, 9001, 1, 0.51, 0.5, "stray frozen once the source filled");

    for _ in 0..32 {
        yielding.update().expect("update");
        hogging.update().expect("update");
    }
    assert_eq!(yielding.round, 40);

    // Yielding source: the stray crossed at round 11, was delivered at
    // round 20, and only then did the five-round spawn pipeline start
    // (spawns at 20, 25, 30, 35, 40; deliveries at 25, 30, 35, 40).
    assert!(locate(&yielding, 9001).is_none(), "backoff 1: stray delivered");
    assert_eq!(yielding.spawned[0], 6, "spawns resumed after the stray passed");
    assert_eq!(yielding.consumed[0], 5, "stray plus four local deliveries");

    // Hogging source: entities spawned at rounds 6, 11, 16, ... kept the
    // band shut; the stray never moved again after round 6.
    assert_eq!(hogging.spawned[0], 8);
    assert_eq!(hogging.consumed[0], 6);
    assert_at(&hogging, 9001, 1, 0.51, 0.5, "backoff 100: stray starved in place");
    assert_clean(&yielding, "yielding source");
    assert_clean(&hogging, "hogging source");
}

// ---------------------------------------------------------------------------
// Crashes off the route are invisible
// ---------------------------------------------------------------------------

/// Crashing (and optionally recovering) a cell that lies on no route
/// leaves the delivery timeline untouched round for round, and after
/// recovery the whole per-cell state converges back to the control run's.
#[test]
fn off_route_crashes_never_perturb_deliveries() {
    let build = || {
        let mut cfg = config(0.25, 0.05, 0.2, &[("amber", 1, 7)]);
        cfg.spawn_per_round = 1;
        grid_state(3, 3, cfg)
    };
    let rounds = 40u64;

    let mut control = build();
    let mut transient = build();
    let mut permanent = build();
    let mut timelines: Vec<Vec<u64>> = vec![Vec::new(), Vec::new(), Vec::new()];

    for r in 1..=rounds {
        control.update().expect("update");
        timelines[0].push(control.consumed[0]);

        if r == 10 {
            // Cell 3 is the far corner; the only route runs 1 -> 4 -> 7.
            transient.fail(CellId(3)).expect("fail off-route cell");
            permanent.fail(CellId(3)).expect("fail off-route cell");
        }
        if r == 12 {
            transient.recover(CellId(3)).expect("recover off-route cell");
            assert_eq!(
                transient.cells[2].dist[0],
                Hops::INF,
                "a recovered ordinary cell knows nothing until the next round"
            );
        }
        transient.update().expect("update");
        timelines[1].push(transient.consumed[0]);
        if r == 12 {
            assert_eq!(
                transient.cells[2].dist[0],
                Hops(4),
                "one round of routing restores the recovered cell's distance"
            );
        }
        permanent.update().expect("update");
        timelines[2].push(permanent.consumed[0]);
    }

    assert!(
        *timelines[0].last().unwrap() > 0,
        "the control run must actually deliver"
    );
    assert_eq!(timelines[0], timelines[1], "transient off-route crash changed deliveries");
    assert_eq!(timelines[0], timelines[2], "permanent off-route crash changed deliveries");

    // The recovered run converges back to the control state, cell by cell.
    assert_eq!(control.cells, transient.cells, "post-recovery state drifted");
    assert_eq!((transient.n_failures, transient.n_recoveries), (1, 1));

    // With the corner permanently dark, every live cell still agrees with
    // the control on its routing table.
    for idx in 0..9 {
        if permanent.cells[idx].failed {
            continue;
        }
        assert_eq!(permanent.cells[idx].dist, control.cells[idx].dist, "cell {}", idx + 1);
        assert_eq!(permanent.cells[idx].next, control.cells[idx].next, "cell {}", idx + 1);
    }
    assert_clean(&control, "control");
    assert_clean(&transient, "transient crash");
    assert_clean(&permanent, "permanent crash");
}

// ---------------------------------------------------------------------------
// Crashes on the route freeze the system until recovery
// ---------------------------------------------------------------------------

/// Crashing the middle of a single corridor freezes everything: the
/// resident entity stops mid-cell, upstream entities keep their places,
/// spawning chokes on the blocked site, and not one delivery happens for
/// thirty rounds. Recovery thaws the same entity and the pipeline
/// resumes.
#[test]
fn an_on_route_crash_freezes_deliveries_until_recovery() {
    let mut cfg = config(0.25, 0.05, 0.2, &[("amber", 1, 3)]);
    cfg.spawn_per_round = 1;
    let mut state = grid_state(1, 3, cfg);

    for _ in 0..30 {
        state.update().expect("update");
    }
    // Five-round pipeline: deliveries at rounds 11, 16, 21, 26.
    assert_eq!(state.consumed[0], 4);
    assert_eq!(state.spawned[0], 6);
    let frozen = state.cells[1].entities.clone();
    assert_eq!(frozen.len(), 1, "one entity mid-corridor at round 30");

    state.fail(CellId(2)).expect("crash the corridor");
    for _ in 0..30 {
        state.update().expect("update");
    }
    assert_eq!(state.consumed[0], 4, "no deliveries through a dead corridor");
    assert_eq!(state.spawned[0], 6, "blocked source site chokes spawning");
    assert_eq!(
        state.cells[1].entities, frozen,
        "the resident entity is frozen exactly where the crash caught it"
    );
    assert_clean(&state, "frozen corridor");

    state.recover(CellId(2)).expect("recover the corridor");
    assert_eq!(state.cells[1].dist[0], Hops::INF, "recovered cell starts blank");
    for _ in 0..30 {
        state.update().expect("update");
    }
    assert!(
        state.consumed[0] >= 7,
        "the pipeline must thaw and deliver again (got {})",
        state.consumed[0]
    );
    assert!(
        state.cells[1].entities != frozen || state.cells[1].entities.is_empty(),
        "the frozen entity must have moved on after recovery"
    );
    assert_clean(&state, "thawed corridor");
}

// ---------------------------------------------------------------------------
// Horizon scaling
// ---------------------------------------------------------------------------

/// Longer horizons deliver strictly more on a free-flowing corridor, and
/// a zero-round horizon delivers (and spawns) nothing at all.
#[test]
fn longer_horizons_deliver_more_and_a_zero_horizon_does_nothing() {
    let scenario = |horizon: u64| -> Scenario {
        let mut cfg = config(0.25, 0.05, 0.2, &[("amber", 1, 3)]);
        cfg.spawn_per_round = 1;
        cfg.horizon = horizon;
        Scenario {
            partition: build_square_grid(1, 3, 1.0).expect("valid grid"),
            config: cfg,
        }
    };

    let empty = run(&scenario(0), RunOptions::default()).expect("zero-horizon run");
    assert_eq!(empty.rounds, 0);
    assert_eq!(empty.spawned, vec![0]);
    assert_eq!(empty.consumed, vec![0]);
    assert_eq!(empty.summed_throughput, 0.0);

    let short = run(&scenario(30), RunOptions::default()).expect("short run");
    let long = run(&scenario(60), RunOptions::default()).expect("long run");
    assert!(short.consumed[0] > 0, "short horizon must already deliver");
    assert!(
        long.consumed[0] > short.consumed[0],
        "doubling the horizon must add deliveries ({} vs {})",
        long.consumed[0],
        short.consumed[0]
    );
}
