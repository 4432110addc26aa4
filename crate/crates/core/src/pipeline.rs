//! End-to-end round-trip solves: deployment, horizon estimation, initial
//! trajectory, optimization of the outbound half and mirror extension.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::info;

use crate::deployment::{estimate_m, solve_deployment, DeploymentSolution};
use crate::error::{Result, TpcError};
use crate::init::{nudge_amplitudes, plan_paths, wmmse_amplitudes};
use crate::normalized::{Geometry, PathState};
use crate::orthogonal::{run_orthogonal_round_trip, OrthogonalAllocation, OrthogonalScheme};
use crate::parallel::{parallel_path, ParallelConfig};
use crate::sca::{sca_path, Boundary, ScaConfig, ScaTrace};
use crate::scenario::{mirror_extend, Scenario, TrajectorySolution};
use crate::segment::{run_segmented_round_trip, SegmentConfig};

/// Default slack added to the straight-flight horizon estimate.
pub const DEFAULT_SLACK: usize = 2;

/// Solver settings shared by the end-to-end schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub sca: ScaConfig,
    /// Slots added to the straight-flight estimate of M.
    pub slack: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sca: ScaConfig::default(),
            slack: DEFAULT_SLACK,
        }
    }
}

/// Result of one end-to-end solve.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub deployment: DeploymentSolution,
    /// Optimized outbound half over slots `1..=M`.
    pub reduced: TrajectorySolution,
    /// Full round trip over all `N` slots.
    pub full: TrajectorySolution,
    /// Horizon of the initial trajectory.
    pub planned_slots: usize,
    pub trace: ScaTrace,
    /// Wall time of the trajectory optimization alone (s).
    pub solve_seconds: f64,
}

impl RunOutcome {
    /// Hover slot of the returned half.
    pub fn hover_slot(&self) -> usize {
        self.reduced.num_slots()
    }
}

/// Initial anchored state: planned positions, WMMSE amplitudes on the free
/// slots and the deployment anchor in the last slot.
pub(crate) fn initial_state(
    geo: &Geometry,
    scen: &Scenario,
    dep: &DeploymentSolution,
    slack: usize,
) -> Result<PathState> {
    let m_lo = estimate_m(dep, scen, slack)?;
    let hover: Vec<_> = dep.hover_positions.iter().map(|q| geo.from_si(q)).collect();
    let (pos, _) = plan_paths(geo, &geo.starts, &hover, m_lo, geo.half())?;
    let m = pos.len();
    let mut res = Vec::with_capacity(m);
    for q in &pos[..m - 1] {
        let (mut a, _) = wmmse_amplitudes(geo, q);
        nudge_amplitudes(&mut a);
        res.push(a);
    }
    res.push(
        dep.hover_powers
            .iter()
            .map(|p| (p / geo.power_unit).max(0.0).sqrt())
            .collect(),
    );
    let mut st = PathState { res, pos };
    st.pos[m - 1] = hover;
    Ok(st)
}

/// Number of leading slots to keep so that the last kept slot has the
/// largest rate; later slots win ties.
pub(crate) fn best_prefix(rates: &[f64]) -> usize {
    let m = rates.len();
    (0..m).fold(m - 1, |b, n| if rates[n] > rates[b] { n } else { b }) + 1
}

/// Re-anchors at the best slot when an earlier slot beats the hover slot.
/// Truncation never lowers the round-trip aggregate because every dropped
/// slot and every hold slot is replaced by the best slot rate.
pub(crate) fn truncate_at_best_slot(geo: &Geometry, st: PathState) -> PathState {
    let rates: Vec<f64> = st.res.iter().zip(&st.pos).map(|(a, q)| geo.sum_rate(a, q)).collect();
    let m = rates.len();
    let keep = best_prefix(&rates);
    if keep < m {
        info!("slot {keep} outperforms the hover slot {m}; re-anchoring");
        st.truncated(keep)
    } else {
        st
    }
}

/// Centralized SCA round trip.
pub fn run_sca_round_trip(scen: &Scenario, cfg: &PipelineConfig) -> Result<RunOutcome> {
    let dep = solve_deployment(scen, &cfg.sca)?;
    let geo = Geometry::new(scen);
    let init = initial_state(&geo, scen, &dep, cfg.slack)?;
    let planned = init.slots();
    let clock = Instant::now();
    let (st, trace) = sca_path(&geo, Boundary::new(&geo, &geo.starts, true), init, &cfg.sca)?;
    let solve_seconds = clock.elapsed().as_secs_f64();
    finish(&geo, scen, dep, st, planned, trace, solve_seconds)
}

/// Parallel round trip; deployment and initialization match the centralized
/// scheme so the two differ only in the trajectory optimizer.
pub fn run_parallel_round_trip(scen: &Scenario, cfg: &PipelineConfig, par: &ParallelConfig) -> Result<RunOutcome> {
    let dep = solve_deployment(scen, &cfg.sca)?;
    let geo = Geometry::new(scen);
    let init = initial_state(&geo, scen, &dep, cfg.slack)?;
    let planned = init.slots();
    let clock = Instant::now();
    let (st, trace) = parallel_path(&geo, Boundary::new(&geo, &geo.starts, true), init, par)?;
    let solve_seconds = clock.elapsed().as_secs_f64();
    finish(&geo, scen, dep, st, planned, trace.trace, solve_seconds)
}

/// The end-to-end schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Sca,
    Parallel,
    Segment,
    Slot,
    Fdma,
    Tdma,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Sca,
        Scheme::Parallel,
        Scheme::Segment,
        Scheme::Slot,
        Scheme::Fdma,
        Scheme::Tdma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Sca => "sca",
            Scheme::Parallel => "parallel",
            Scheme::Segment => "segment",
            Scheme::Slot => "slot",
            Scheme::Fdma => "fdma",
            Scheme::Tdma => "tdma",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = TpcError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| TpcError::Usage(format!("unknown scheme '{s}'")))
    }
}

/// Settings of every scheme.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SchemeConfig {
    pub pipeline: PipelineConfig,
    pub parallel: ParallelConfig,
    /// Segment settings; the slot scheme overrides the segment length with 1.
    pub segment: SegmentConfig,
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub run: RunOutcome,
    /// Resource fractions of the orthogonal schemes.
    pub allocation: Option<OrthogonalAllocation>,
}

/// Runs one scheme end to end.
pub fn run_scheme(scen: &Scenario, scheme: Scheme, cfg: &SchemeConfig) -> Result<SchemeOutcome> {
    let plain = |run| SchemeOutcome {
        scheme,
        run,
        allocation: None,
    };
    let orthogonal = |kind| -> Result<SchemeOutcome> {
        let out = run_orthogonal_round_trip(scen, kind, &cfg.pipeline)?;
        Ok(SchemeOutcome {
            scheme,
            run: out.run,
            allocation: Some(out.allocation),
        })
    };
    match scheme {
        Scheme::Sca => run_sca_round_trip(scen, &cfg.pipeline).map(plain),
        Scheme::Parallel => run_parallel_round_trip(scen, &cfg.pipeline, &cfg.parallel).map(plain),
        Scheme::Segment => run_segmented_round_trip(scen, &cfg.pipeline, &cfg.segment).map(|o| plain(o.run)),
        Scheme::Slot => {
            let seg = SegmentConfig {
                slots_per_segment: 1,
                ..cfg.segment
            };
            run_segmented_round_trip(scen, &cfg.pipeline, &seg).map(|o| plain(o.run))
        }
        Scheme::Fdma => orthogonal(OrthogonalScheme::Fdma),
        Scheme::Tdma => orthogonal(OrthogonalScheme::Tdma),
    }
}

pub(crate) fn finish(
    geo: &Geometry,
    scen: &Scenario,
    deployment: DeploymentSolution,
    st: PathState,
    planned_slots: usize,
    trace: ScaTrace,
    solve_seconds: f64,
) -> Result<RunOutcome> {
    let st = truncate_at_best_slot(geo, st);
    let reduced = st.to_solution(geo, scen)?;
    if reduced.num_slots() == 0 {
        return Err(TpcError::Internal("empty outbound trajectory".into()));
    }
    let full = mirror_extend(&reduced, scen)?;
    Ok(RunOutcome {
        deployment,
        reduced,
        full,
        planned_slots,
        trace,
        solve_seconds,
    })
}
