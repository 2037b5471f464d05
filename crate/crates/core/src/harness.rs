//! Experiment harness: configuration parsing, the run loop, random
//! failure injection, parameter sweeps, and CSV emission.

use std::collections::BTreeSet;
use std::io;

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::geometry::{
    build_parallelogram_grid, build_square_grid, build_triangular_grid, CellId, GeometryError,
    Partition, RegionParams, Vec2,
};
use crate::oracles::{check_invariants, check_signal_gate, Violation};
use crate::protocol::{
    initial_state, ColorSpec, ProtocolError, ScenarioConfig, SystemState, UpdatePhase,
};
use crate::trace;

// ---------------------------------------------------------------------------
// Configuration document
// ---------------------------------------------------------------------------

/// JSON configuration as written by users. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    grid: GridDoc,
    l: f64,
    rs: f64,
    v: f64,
    #[serde(rename = "K")]
    horizon: u64,
    p_f: f64,
    p_r: f64,
    colors: Vec<ColorDoc>,
    #[serde(default)]
    spawn: SpawnDoc,
    #[serde(default = "default_lock_timeout")]
    lock_timeout: u32,
    #[serde(default = "default_protect_targets")]
    protect_targets: bool,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    kind: String,
    rows: u32,
    cols: u32,
    side_len: f64,
    /// Lateral offset of the top edge relative to the bottom one; only
    /// meaningful for (and required by) parallelogram grids.
    #[serde(default)]
    slant: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColorDoc {
    name: String,
    source: u32,
    target: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpawnDoc {
    #[serde(default = "default_per_round")]
    per_round: u32,
    #[serde(default = "default_backoff")]
    backoff: u32,
}

impl Default for SpawnDoc {
    fn default() -> Self {
        SpawnDoc {
            per_round: default_per_round(),
            backoff: default_backoff(),
        }
    }
}

fn default_lock_timeout() -> u32 {
    8
}
fn default_protect_targets() -> bool {
    true
}
fn default_per_round() -> u32 {
    1
}
fn default_backoff() -> u32 {
    1
}

/// A runnable scenario: the tessellation plus the resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub partition: Partition,
    pub config: ScenarioConfig,
}

/// Parse a JSON configuration into a runnable scenario.
///
/// Structural problems (missing or unknown fields, wrong types) surface
/// with the offending key; semantic problems (parameter ranges, unknown
/// cells, geometry violations) surface through the initial-state
/// validation with one line per violation.
pub fn parse_config(text: &str) -> Result<Scenario, HarnessError> {
    let doc: ConfigDoc =
        serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    scenario_from_doc(&doc)
}

fn scenario_from_doc(doc: &ConfigDoc) -> Result<Scenario, HarnessError> {
    if doc.grid.rows == 0 || doc.grid.cols == 0 {
        return Err(HarnessError::Parse(
            "grid.rows and grid.cols must be positive".into(),
        ));
    }
    let partition = match doc.grid.kind.as_str() {
        "square" => {
            if doc.grid.slant.is_some() {
                return Err(HarnessError::Parse(
                    "grid.slant only applies to kind \"parallelogram\"".into(),
                ));
            }
            build_square_grid(doc.grid.rows as usize, doc.grid.cols as usize, doc.grid.side_len)?
        }
        "triangular" => {
            if doc.grid.slant.is_some() {
                return Err(HarnessError::Parse(
                    "grid.slant only applies to kind \"parallelogram\"".into(),
                ));
            }
            build_triangular_grid(
                doc.grid.rows as usize,
                doc.grid.cols as usize,
                doc.grid.side_len,
            )?
        }
        "parallelogram" => {
            let [sx, sy] = doc.grid.slant.ok_or_else(|| {
                HarnessError::Parse("grid.slant is required for kind \"parallelogram\"".into())
            })?;
            build_parallelogram_grid(
                doc.grid.rows as usize,
                doc.grid.cols as usize,
                doc.grid.side_len,
                Vec2::new(sx, sy),
            )?
        }
        other => {
            return Err(HarnessError::Parse(format!(
                "grid.kind must be \"square\", \"triangular\", or \"parallelogram\" (got {other:?})"
            )))
        }
    };
    let params = RegionParams::new(doc.l, doc.rs)?;
    let config = ScenarioConfig {
        params,
        speed: doc.v,
        horizon: doc.horizon,
        p_fail: doc.p_f,
        p_recover: doc.p_r,
        colors: doc
            .colors
            .iter()
            .map(|c| ColorSpec {
                name: c.name.clone(),
                source: CellId(c.source),
                target: CellId(c.target),
            })
            .collect(),
        spawn_per_round: doc.spawn.per_round,
        spawn_backoff: doc.spawn.backoff,
        lock_timeout: doc.lock_timeout,
        protect_targets: doc.protect_targets,
        seed: doc.seed,
    };
    Ok(Scenario { partition, config })
}

// ---------------------------------------------------------------------------
// Single run
// ---------------------------------------------------------------------------

/// Knobs of a single run beyond the scenario itself.
#[derive(Default)]
pub struct RunOptions<'w> {
    /// Evaluate the safety invariants and the signal-clearance condition
    /// every round, stopping with an error on the first violation.
    pub check: bool,
    /// Cells failed before the first round (scenario setup, not counted in
    /// the failure statistics).
    pub prefail: Vec<CellId>,
    /// Sink for the per-round trace records.
    pub trace: Option<&'w mut dyn io::Write>,
}

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub rounds: u64,
    /// Entities delivered per color.
    pub consumed: Vec<u64>,
    /// Entities injected per color.
    pub spawned: Vec<u64>,
    /// Deliveries per round, per color.
    pub throughput: Vec<f64>,
    pub summed_throughput: f64,
    /// Random failure and recovery events (setup pre-failures excluded).
    pub failures: u64,
    pub recoveries: u64,
    pub final_state: SystemState,
}

/// Simulate a scenario for its full horizon.
pub fn run(scenario: &Scenario, mut opts: RunOptions<'_>) -> Result<RunResult, HarnessError> {
    let mut state = initial_state(scenario.partition.clone(), scenario.config.clone())?;
    for &c in &opts.prefail {
        state.fail(c)?;
    }
    let setup_failures = state.n_failures;
    if let Some(w) = opts.trace.as_deref_mut() {
        trace::write_record(w, &state, &[])?;
    }
    for _ in 0..scenario.config.horizon {
        inject_failures(&mut state)?;
        let mut violations: Vec<Violation> = Vec::new();
        if opts.check {
            state.update_with(|s, phase| {
                if phase == UpdatePhase::Signal {
                    violations.extend(check_signal_gate(s));
                }
            })?;
            violations.extend(check_invariants(&state).violations);
        } else {
            state.update()?;
        }
        if let Some(w) = opts.trace.as_deref_mut() {
            trace::write_record(w, &state, &violations)?;
        }
        if !violations.is_empty() {
            return Err(HarnessError::InvariantViolation {
                round: state.round,
                violations,
            });
        }
    }
    let horizon = scenario.config.horizon.max(1) as f64;
    let throughput: Vec<f64> = state.consumed.iter().map(|&c| c as f64 / horizon).collect();
    Ok(RunResult {
        seed: scenario.config.seed,
        rounds: state.round,
        summed_throughput: throughput.iter().sum(),
        throughput,
        consumed: state.consumed.clone(),
        spawned: state.spawned.clone(),
        failures: state.n_failures - setup_failures,
        recoveries: state.n_recoveries,
        final_state: state,
    })
}

/// Apply this round's random failures and recoveries.
///
/// Cells are visited in ascending id order, one uniform draw each: a live
/// cell fails with probability `p_f` (targets are skipped while protected),
/// a failed cell recovers with probability `p_r`. With both probabilities
/// zero the generator is left untouched, so such runs are bit-identical
/// with and without injection.
pub fn inject_failures(state: &mut SystemState) -> Result<(), ProtocolError> {
    let p_fail = state.config().p_fail;
    let p_recover = state.config().p_recover;
    let protect = state.config().protect_targets;
    if p_fail == 0.0 && p_recover == 0.0 {
        return Ok(());
    }
    for idx in 0..state.n_cells() {
        let id = CellId::from_idx(idx);
        if !state.cells[idx].failed {
            if protect && state.is_target(id) {
                continue;
            }
            if state.rng_mut().gen::<f64>() < p_fail {
                state.fail(id)?;
            }
        } else if state.rng_mut().gen::<f64>() < p_recover {
            state.recover(id)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

/// Which quantity a sweep varies. The first six reinterpret one field of
/// the base scenario; the last three synthesize a family of scenarios on a
/// fixed grid (an 8x8 corridor for `Turns`, a 1x16 strip for
/// `OverlapFraction`, a 1x3 strip for `NColors`), inheriting the base
/// scenario's disc, speed, spawn, and lock parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Rs,
    V,
    L,
    K,
    PFail,
    PRecover,
    Turns,
    OverlapFraction,
    NColors,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Rs => "rs",
            SweepParam::V => "v",
            SweepParam::L => "l",
            SweepParam::K => "K",
            SweepParam::PFail => "p_f",
            SweepParam::PRecover => "p_r",
            SweepParam::Turns => "turns",
            SweepParam::OverlapFraction => "overlap_fraction",
            SweepParam::NColors => "n_colors",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rs" => Ok(SweepParam::Rs),
            "v" => Ok(SweepParam::V),
            "l" => Ok(SweepParam::L),
            "K" | "k" => Ok(SweepParam::K),
            "p_f" => Ok(SweepParam::PFail),
            "p_r" => Ok(SweepParam::PRecover),
            "turns" => Ok(SweepParam::Turns),
            "overlap_fraction" => Ok(SweepParam::OverlapFraction),
            "n_colors" => Ok(SweepParam::NColors),
            other => Err(format!(
                "unknown sweep parameter {other:?}; expected one of \
                 rs, v, l, K, p_f, p_r, turns, overlap_fraction, n_colors"
            )),
        }
    }
}

/// A sweep: run `reps` seeds of the base scenario at each parameter value.
/// Repetition `r` runs with seed `base seed + r`.
pub struct SweepSpec {
    pub base: Scenario,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub reps: u32,
}

/// One run's worth of sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub seed: u64,
    /// Per-color delivery rates, in color order.
    pub per_color: Vec<(String, f64)>,
    pub summed: f64,
    pub failures: u64,
    pub recoveries: u64,
}

/// Run a full sweep. Rows come back ordered by (value, repetition);
/// repetitions run in parallel.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, HarnessError> {
    let mut jobs: Vec<(usize, u32)> = Vec::new();
    for vi in 0..spec.values.len() {
        for rep in 0..spec.reps.max(1) {
            jobs.push((vi, rep));
        }
    }
    jobs.par_iter()
        .map(|&(vi, rep)| {
            let value = spec.values[vi];
            let (mut scenario, prefail) = scenario_variant(&spec.base, spec.param, value)?;
            scenario.config.seed = spec.base.config.seed + rep as u64;
            let result = run(
                &scenario,
                RunOptions {
                    check: false,
                    prefail,
                    trace: None,
                },
            )?;
            Ok(SweepRow {
                param: spec.param.name().to_string(),
                value,
                seed: result.seed,
                per_color: scenario
                    .config
                    .colors
                    .iter()
                    .zip(&result.throughput)
                    .map(|(c, &t)| (c.name.clone(), t))
                    .collect(),
                summed: result.summed_throughput,
                failures: result.failures,
                recoveries: result.recoveries,
            })
        })
        .collect()
}

/// Corridor shapes for the `Turns` sweep: eight-cell routes on the 8x8
/// grid with 0 through 6 direction changes. Every route is an induced path
/// (no two non-consecutive cells are adjacent), so with the rest of the
/// grid failed the route itself is the only way forward.
const TURN_ROUTES: [[u32; 8]; 7] = [
    [1, 9, 17, 25, 33, 41, 49, 57],
    [1, 9, 17, 25, 26, 27, 28, 29],
    [1, 9, 17, 18, 19, 27, 35, 43],
    [1, 9, 10, 11, 19, 27, 28, 29],
    [1, 9, 10, 18, 19, 27, 35, 43],
    [1, 9, 17, 18, 26, 27, 35, 36],
    [1, 9, 10, 18, 19, 27, 28, 36],
];

/// Build the scenario for one sweep point. Returns the scenario plus any
/// cells to fail before round zero.
fn scenario_variant(
    base: &Scenario,
    param: SweepParam,
    value: f64,
) -> Result<(Scenario, Vec<CellId>), HarnessError> {
    let mut scenario = base.clone();
    match param {
        SweepParam::Rs => {
            scenario.config.params = RegionParams::new(base.config.params.l, value)?;
        }
        SweepParam::L => {
            scenario.config.params = RegionParams::new(value, base.config.params.rs)?;
        }
        SweepParam::V => {
            scenario.config.speed = value;
        }
        SweepParam::K => {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(HarnessError::Parse(format!(
                    "K sweep values must be nonnegative integers (got {value})"
                )));
            }
            scenario.config.horizon = value as u64;
        }
        SweepParam::PFail => {
            scenario.config.p_fail = value;
        }
        SweepParam::PRecover => {
            scenario.config.p_recover = value;
        }
        SweepParam::Turns => {
            let turns = value as usize;
            if value.fract() != 0.0 || turns >= TURN_ROUTES.len() {
                return Err(HarnessError::Parse(format!(
                    "turns sweep values must be integers in 0..={} (got {value})",
                    TURN_ROUTES.len() - 1
                )));
            }
            let route = &TURN_ROUTES[turns];
            scenario.partition = build_square_grid(8, 8, 1.0)?;
            scenario.config.colors = vec![ColorSpec {
                name: "c0".into(),
                source: CellId(route[0]),
                target: CellId(route[7]),
            }];
            let on_route: BTreeSet<u32> = route.iter().copied().collect();
            let prefail: Vec<CellId> = (1..=64)
                .filter(|id| !on_route.contains(id))
                .map(CellId)
                .collect();
            return Ok((scenario, prefail));
        }
        SweepParam::OverlapFraction => {
            if !(0.0..=1.0).contains(&value) {
                return Err(HarnessError::Parse(format!(
                    "overlap_fraction sweep values must lie in [0, 1] (got {value})"
                )));
            }
            let n = (value * 8.0).round() as u32;
            scenario.partition = build_square_grid(1, 16, 1.0)?;
            scenario.config.colors = vec![
                ColorSpec {
                    name: "c0".into(),
                    source: CellId(1),
                    target: CellId(8),
                },
                ColorSpec {
                    name: "c1".into(),
                    source: CellId(16 - n),
                    target: CellId(9 - n),
                },
            ];
        }
        SweepParam::NColors => {
            let k = value as usize;
            if value.fract() != 0.0 || k == 0 {
                return Err(HarnessError::Parse(format!(
                    "n_colors sweep values must be positive integers (got {value})"
                )));
            }
            scenario.partition = build_square_grid(1, 3, 1.0)?;
            scenario.config.colors = (0..k)
                .map(|i| {
                    let (source, target) = if i % 2 == 0 { (1, 3) } else { (3, 1) };
                    ColorSpec {
                        name: format!("c{i}"),
                        source: CellId(source),
                        target: CellId(target),
                    }
                })
                .collect();
        }
    }
    Ok((scenario, Vec::new()))
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Write sweep rows as CSV: one line per color per run plus a `__sum__`
/// line carrying the summed rate. Rates and values use six significant
/// digits.
pub fn emit_csv<W: io::Write>(rows: &[SweepRow], w: &mut W) -> io::Result<()> {
    writeln!(
        w,
        "param,value,seed,color,throughput,summed_throughput,failures,recoveries"
    )?;
    for row in rows {
        let value = format_sig(row.value);
        let summed = format_sig(row.summed);
        for (name, rate) in &row.per_color {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                row.param,
                value,
                row.seed,
                name,
                format_sig(*rate),
                summed,
                row.failures,
                row.recoveries
            )?;
        }
        writeln!(
            w,
            "{},{},{},__sum__,{},{},{},{}",
            row.param, value, row.seed, summed, summed, row.failures, row.recoveries
        )?;
    }
    Ok(())
}

/// Plain decimal with six significant digits (no exponent notation).
fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Parse(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invariant violations at round {round}:\n  {}", format_violations(.violations))]
    InvariantViolation {
        round: u64,
        violations: Vec<Violation>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("\n  ")
}
