//! Segment-by-segment trajectory control.
//!
//! The outbound half is built from consecutive fixed-length segments. Each
//! segment starts from the previous segment's last positions, has no hover
//! anchor and maximizes the plain sum of its slot rates. Segments are seeded
//! with a planned path toward the hover points, and each segment must end
//! within a ball around every hover point whose radius is the planned end
//! distance plus half a level step, so the chain keeps closing in. The chain
//! stops once a segment ends at (nearly) the hover
//! sum rate; the round trip then holds that state and mirrors.

use std::time::Instant;

use log::{debug, warn};

use crate::deployment::{solve_deployment, DeploymentSolution};
use crate::error::{Result, TpcError};
use crate::init::{nudge_amplitudes, plan_paths, wmmse_amplitudes};
use crate::normalized::{Geometry, PathState};
use crate::parallel::{parallel_path, ParallelConfig};
use crate::pipeline::{PipelineConfig, RunOutcome};
use crate::sca::{sca_path, Boundary, ScaConfig, ScaTrace};
use crate::scenario::{mirror_extend, Point, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    Centralized,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConfig {
    /// Slots per segment; `1` gives the slot-by-slot scheme.
    pub slots_per_segment: usize,
    pub inner: InnerSolver,
    pub sca: ScaConfig,
    pub parallel: ParallelConfig,
    /// A segment end counts as the hover rate when within this fraction.
    pub reach_tol: f64,
    /// Consecutive segments that neither raise the end rate nor shorten the
    /// distance to the hover points before giving up.
    pub stall_limit: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            slots_per_segment: 40,
            inner: InnerSolver::Centralized,
            sca: ScaConfig::default(),
            parallel: ParallelConfig::default(),
            reach_tol: 1e-3,
            stall_limit: 3,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slots_per_segment == 0 || self.stall_limit == 0 || !(0.0..1.0).contains(&self.reach_tol) {
            return Err(TpcError::Usage(format!("invalid segment configuration {self:?}")));
        }
        self.sca.validate()?;
        self.parallel.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SegmentOutcome {
    pub run: RunOutcome,
    /// Sum rate (bit/s) at the last slot of every segment.
    pub segment_end_rates: Vec<f64>,
}

impl SegmentOutcome {
    pub fn segments(&self) -> usize {
        self.segment_end_rates.len()
    }
}

/// Hover points lifted strictly inside the altitude band.
fn planning_targets(geo: &Geometry, dep: &DeploymentSolution) -> Vec<Point> {
    dep.hover_positions
        .iter()
        .map(|h| {
            let mut q = geo.from_si(h);
            if !geo.fixed_altitude {
                q[2] = q[2].max(geo.h_min + geo.eps_h);
            }
            q
        })
        .collect()
}

/// Fraction of a level step by which a segment end may trail its planned
/// distance to the hover point.
const PROGRESS_SLACK: f64 = 0.5;

/// Slots of straight level flight from `lead` to `targets`, at least one.
fn straight_slots(geo: &Geometry, lead: &[Point], targets: &[Point]) -> usize {
    lead.iter()
        .zip(targets)
        .map(|(l, t)| (((t[0] - l[0]).powi(2) + (t[1] - l[1]).powi(2)).sqrt() / geo.dl - 1e-9).ceil() as usize)
        .max()
        .unwrap_or(0)
        .max(1)
}

/// Positions of a segment of `len` slots: the first slots of a planned path
/// toward `targets`, padded with its end, or the lead held in place when no
/// plan exists.
fn segment_positions(geo: &Geometry, lead: &[Point], targets: &[Point], len: usize) -> Vec<Vec<Point>> {
    let m_lo = straight_slots(geo, lead, targets).min(geo.half());
    match plan_paths(geo, lead, targets, m_lo, geo.half()) {
        Ok((mut pos, _)) => {
            let last = pos.last().cloned().unwrap_or_else(|| lead.to_vec());
            pos.resize(len.max(pos.len()), last);
            pos.truncate(len);
            pos
        }
        Err(e) => {
            debug!("segment planner failed ({e}); holding the lead positions");
            vec![lead.to_vec(); len]
        }
    }
}

/// Balls around the hover points that the segment end must reach: the
/// planned end distance plus a fraction of a level step.
fn progress_balls(geo: &Geometry, planned_end: &[Point], targets: &[Point]) -> Vec<(Point, f64)> {
    planned_end
        .iter()
        .zip(targets)
        .map(|(p, t)| (*t, (p - t).norm() + PROGRESS_SLACK * geo.dl))
        .collect()
}

fn with_amplitudes(geo: &Geometry, pos: Vec<Vec<Point>>) -> PathState {
    let res = pos
        .iter()
        .map(|q| {
            let (mut a, _) = wmmse_amplitudes(geo, q);
            nudge_amplitudes(&mut a);
            a
        })
        .collect();
    PathState { res, pos }
}

/// Chains segment solves from the start points until a segment ends at the
/// hover sum rate of `hover`.
pub fn run_segmented(scen: &Scenario, hover: &DeploymentSolution, cfg: &SegmentConfig) -> Result<SegmentOutcome> {
    cfg.validate()?;
    scen.validate()?;
    let geo = Geometry::new(scen);
    let half = geo.half();
    let target = hover.hover_sum_rate * (1.0 - cfg.reach_tol);
    let targets = planning_targets(&geo, hover);
    let clock = Instant::now();

    let mut done = PathState {
        res: Vec::new(),
        pos: Vec::new(),
    };
    let mut trace = ScaTrace::default();
    let mut end_rates = Vec::new();
    let mut best_end = f64::NEG_INFINITY;
    let mut best_gap = f64::INFINITY;
    let mut stalled = 0;
    loop {
        let len = cfg.slots_per_segment.min(half - done.slots());
        let lead = done.pos.last().cloned().unwrap_or_else(|| geo.starts.clone());
        let init = with_amplitudes(&geo, segment_positions(&geo, &lead, &targets, len));
        let balls = progress_balls(&geo, &init.pos[len - 1], &targets);
        let bnd = Boundary {
            end_balls: Some(&balls),
            ..Boundary::new(&geo, &lead, false)
        };
        let (seg, seg_trace) = match cfg.inner {
            InnerSolver::Centralized => sca_path(&geo, bnd, init, &cfg.sca)?,
            InnerSolver::Parallel => {
                let (s, t) = parallel_path(&geo, bnd, init, &cfg.parallel)?;
                (s, t.trace)
            }
        };
        trace.iterations += seg_trace.iterations;
        trace.newton_steps += seg_trace.newton_steps;
        done.res.extend(seg.res);
        done.pos.extend(seg.pos);
        trace.objectives.push(done.sum_rate(&geo));

        let m = done.slots();
        let end = geo.sum_rate(&done.res[m - 1], &done.pos[m - 1]) * geo.rate_unit;
        end_rates.push(end);
        debug!(
            "segment {} ends at slot {m} with {end:e} bit/s (target {target:e})",
            end_rates.len()
        );
        if end >= target {
            trace.converged = true;
            break;
        }
        // Progress means a better end rate or a shorter remaining distance.
        let gap: f64 = done.pos[m - 1].iter().zip(&targets).map(|(q, t)| (q - t).norm()).sum();
        let closer = gap < best_gap - 1e-6 * geo.dl;
        let better = end > best_end * (1.0 + 1e-9);
        best_gap = best_gap.min(gap);
        best_end = best_end.max(end);
        stalled = if closer || better { 0 } else { stalled + 1 };
        if stalled >= cfg.stall_limit || m >= half {
            warn!(
                "segment chain stopped after {} segments below the hover rate",
                end_rates.len()
            );
            return Err(TpcError::Stall {
                best_rate: best_end,
                target,
            });
        }
    }
    let solve_seconds = clock.elapsed().as_secs_f64();
    let reduced = done.to_solution(&geo, scen)?;
    let full = mirror_extend(&reduced, scen)?;
    Ok(SegmentOutcome {
        run: RunOutcome {
            deployment: hover.clone(),
            planned_slots: reduced.num_slots(),
            reduced,
            full,
            trace,
            solve_seconds,
        },
        segment_end_rates: end_rates,
    })
}

/// Deployment followed by [`run_segmented`].
pub fn run_segmented_round_trip(scen: &Scenario, pipe: &PipelineConfig, cfg: &SegmentConfig) -> Result<SegmentOutcome> {
    let dep = solve_deployment(scen, &pipe.sca)?;
    run_segmented(scen, &dep, cfg)
}
