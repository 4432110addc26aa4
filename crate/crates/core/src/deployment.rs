//! Hover-point deployment and reduced-horizon estimation.
//!
//! The round-trip deployment is the single-slot instance of the reduced
//! problem, where the lead step may cover half the horizon. The one-way
//! variant adds a reach fraction `tau` shared by all UAVs: hover points must
//! be reachable from the start within `tau * T` and must reach the final
//! point within `(1 - tau) * T`.

use log::debug;

use crate::error::{Result, TpcError};
use crate::init::{nudge_amplitudes, wmmse_amplitudes};
use crate::kernel::{maximize, BlockTridiagonal, Constraint, ConvexProgram};
use crate::normalized::{Geometry, PathState};
use crate::program::{PathProgram, PathSpec};
use crate::sca::{
    run_sca, sca_path, subproblem_error, Boundary, JointRateModel, ScaConfig, ScaTrace, SurrogateExpansion,
};
use crate::scenario::{Point, Scenario};

/// Hover separation is enforced at this multiple of `d_min`, so planned
/// paths can approach their hover points with a strict margin.
const SEPARATION_INFLATION: f64 = 1.0 + 1e-3;
/// UAVs whose optimized power falls below this fraction of `p_max` are
/// switched off and parked above their own terminal.
const RESET_POWER: f64 = 1e-3;
const REACH_MARGIN: f64 = 0.999;
const SPACING: f64 = 1.01;

#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentSolution {
    /// Hover points (m).
    pub hover_positions: Vec<Point>,
    /// Hover powers (W).
    pub hover_powers: Vec<f64>,
    /// Sum rate while hovering (bit/s).
    pub hover_sum_rate: f64,
    /// Arrival time at the hover points (s), one-way missions only.
    pub reach_time: Option<f64>,
    pub trace: ScaTrace,
}

/// Reach limits over a given number of slots.
#[derive(Debug, Clone, Copy)]
struct Reach {
    level: f64,
    up: f64,
    down: f64,
}

impl Reach {
    fn slots(geo: &Geometry, n: f64) -> Self {
        Self {
            level: n * geo.dl,
            up: n * geo.da,
            down: n * geo.dd,
        }
    }

    /// Whether `to` is reachable from `from`, shrunk by `margin`.
    fn contains(&self, from: &Point, to: &Point, margin: f64) -> bool {
        let h = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)).sqrt();
        let dz = to[2] - from[2];
        h <= margin * self.level && dz <= margin * self.up && -dz <= margin * self.down
    }

    /// Altitude window reachable from `from`.
    fn z_window(&self, from: &Point, margin: f64) -> (f64, f64) {
        (from[2] - margin * self.down, from[2] + margin * self.up)
    }
}

fn altitude_band(geo: &Geometry) -> (f64, f64) {
    if geo.fixed_altitude {
        (geo.h_min, geo.h_min)
    } else {
        (geo.h_min + geo.eps_h, geo.h_max - geo.eps_h)
    }
}

/// Horizontal projection of `p` onto the disc of radius `r` around `c`.
fn clamp_to_disc(p: &Point, c: &Point, r: f64) -> Point {
    let d = Point::new(p[0] - c[0], p[1] - c[1], 0.0);
    let n = d.norm();
    if n <= r {
        *p
    } else {
        let h = c + d * (r / n);
        Point::new(h[0], h[1], p[2])
    }
}

/// Greedy conflict-free placement: each UAV takes the first admissible
/// candidate around its preferred point, raising layers and then spreading
/// on horizontal rings.
fn place_hovers<F>(geo: &Geometry, preferred: &[Point], admissible: F) -> Result<Vec<Point>>
where
    F: Fn(usize, &Point) -> bool,
{
    let spacing = SPACING * geo.d_min;
    let clearance = geo.d_min * (1.0 + 2.0 * (SEPARATION_INFLATION - 1.0));
    let (_, z_hi) = altitude_band(geo);
    let layers = if geo.fixed_altitude {
        1
    } else {
        ((z_hi - preferred.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min)) / spacing).floor() as usize + 1
    };
    let mut placed: Vec<Point> = Vec::with_capacity(preferred.len());
    for (u, base) in preferred.iter().enumerate() {
        let mut found = None;
        'search: for ring in 0..=40usize {
            let dirs = if ring == 0 { 1 } else { 8 * ring };
            for layer in 0..layers.min(preferred.len() + 1) {
                for a in 0..dirs {
                    let ang = std::f64::consts::TAU * a as f64 / dirs as f64;
                    let r = ring as f64 * spacing;
                    let q = Point::new(
                        base[0] + r * ang.cos(),
                        base[1] + r * ang.sin(),
                        base[2] + layer as f64 * spacing,
                    );
                    if q[2] > z_hi || !admissible(u, &q) {
                        continue;
                    }
                    if placed.iter().all(|p| (p - q).norm() > clearance) {
                        found = Some(q);
                        break 'search;
                    }
                }
            }
        }
        placed.push(
            found.ok_or_else(|| TpcError::InitFailure(format!("no conflict-free initial hover point for UAV {u}")))?,
        );
    }
    Ok(placed)
}

/// Moves switched-off UAVs above their own terminal at minimum altitude when
/// that spot is admissible and keeps the separation margin.
fn reset_silent<F>(geo: &Geometry, amps: &mut [f64], pos: &mut [Point], admissible: F)
where
    F: Fn(usize, &Point) -> bool,
{
    let sep = geo.d_min * SEPARATION_INFLATION;
    for u in 0..pos.len() {
        if amps[u] * amps[u] >= RESET_POWER {
            continue;
        }
        let target = Point::new(geo.gts[u][0], geo.gts[u][1], geo.h_min);
        let clear = (0..pos.len())
            .filter(|&v| v != u)
            .all(|v| (pos[v] - target).norm() >= sep);
        if clear && admissible(u, &target) {
            debug!("UAV {u} switched off; parking above its terminal");
            pos[u] = target;
        }
        amps[u] = 0.0;
    }
}

fn finish(
    geo: &Geometry,
    amps: Vec<f64>,
    pos: Vec<Point>,
    reach_time: Option<f64>,
    trace: ScaTrace,
) -> DeploymentSolution {
    DeploymentSolution {
        hover_sum_rate: geo.sum_rate(&amps, &pos) * geo.rate_unit,
        hover_positions: pos.iter().map(|q| geo.to_si(q)).collect(),
        hover_powers: amps.iter().map(|a| (a * a).min(1.0) * geo.power_unit).collect(),
        reach_time,
        trace,
    }
}

fn initial_amplitudes(geo: &Geometry, pos: &[Point]) -> Vec<f64> {
    let (mut a, _) = wmmse_amplitudes(geo, pos);
    nudge_amplitudes(&mut a);
    a
}

/// Strictly feasible single-slot start of the round-trip deployment and the
/// boundary of its solve.
pub(crate) fn round_trip_start<'a>(geo: &'a Geometry) -> Result<(Vec<Point>, Boundary<'a>)> {
    let reach = Reach::slots(geo, geo.half() as f64);
    let (z_lo, z_hi) = altitude_band(geo);
    let preferred: Vec<Point> = (0..geo.num_links())
        .map(|u| {
            let s = geo.starts[u];
            let (lo, hi) = reach.z_window(&s, REACH_MARGIN);
            let z = if geo.fixed_altitude {
                geo.h_min
            } else {
                z_lo.max(lo).min(hi.min(z_hi))
            };
            clamp_to_disc(
                &Point::new(geo.gts[u][0], geo.gts[u][1], z),
                &s,
                REACH_MARGIN * reach.level,
            )
        })
        .collect();
    let strict = |u: usize, q: &Point| reach.contains(&geo.starts[u], q, REACH_MARGIN);
    let pos0 = place_hovers(geo, &preferred, strict)?;
    let bnd = Boundary {
        lead: &geo.starts,
        lead_steps: (reach.level, reach.up, reach.down),
        anchored: false,
        sep_distance: geo.d_min * SEPARATION_INFLATION,
        end_balls: None,
    };
    Ok((pos0, bnd))
}

/// Round-trip deployment: maximizes the hover sum rate over points reachable
/// within half the horizon.
pub fn solve_deployment(scen: &Scenario, cfg: &ScaConfig) -> Result<DeploymentSolution> {
    scen.validate()?;
    let geo = Geometry::new(scen);
    let (pos0, bnd) = round_trip_start(&geo)?;
    let init = PathState {
        res: vec![initial_amplitudes(&geo, &pos0)],
        pos: vec![pos0],
    };
    let (st, trace) = sca_path(&geo, bnd, init, cfg)?;
    let (mut amps, mut pos) = (st.res[0].clone(), st.pos[0].clone());
    let reach = Reach::slots(&geo, geo.half() as f64);
    reset_silent(&geo, &mut amps, &mut pos, |u, q| reach.contains(&geo.starts[u], q, 1.0));
    Ok(finish(&geo, amps, pos, None, trace))
}

/// Interval of arrival times `tau` (s) for which `hover` is reachable from
/// `start` within `tau` and `finish` is reachable from `hover` within
/// `total_time - tau`. `None` when the interval is empty.
pub fn reach_time_window(
    start: &Point,
    finish: &Point,
    hover: &Point,
    limits: &crate::scenario::KinematicLimits,
    total_time: f64,
) -> Option<(f64, f64)> {
    let level = |a: &Point, b: &Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / limits.v_level;
    let vertical = |from: f64, to: f64| {
        if to >= from {
            (to - from) / limits.v_ascend
        } else {
            (from - to) / limits.v_descend
        }
    };
    let out = level(start, hover).max(vertical(start[2], hover[2]));
    let back = level(hover, finish).max(vertical(hover[2], finish[2]));
    let lo = out;
    let hi = total_time - back;
    (lo <= hi + 1e-9 * total_time.max(1.0)).then_some((lo, hi.max(lo)))
}

/// Single-slot program over `(a, q, tau)` with `tau` the reach fraction.
struct OneWayProgram<'a> {
    inner: PathProgram<'a, JointRateModel<'a>>,
    inner_dim: usize,
    constraints: Vec<Constraint>,
}

impl<'a> OneWayProgram<'a> {
    fn new(geo: &Geometry, model: &'a JointRateModel<'a>, expansion: &[Vec<Point>]) -> Self {
        let full = Reach::slots(geo, geo.slots as f64);
        let spec = PathSpec {
            lead: &geo.starts,
            lead_steps: (full.level, full.up, full.down),
            tail: None,
            separation: Some(expansion),
            sep_distance: geo.d_min * SEPARATION_INFLATION,
            free_slots: 1,
            end_balls: None,
        };
        let inner = PathProgram::new(geo, model, &spec);
        let inner_dim = inner.dim();
        let tau = inner_dim;
        let mut constraints = inner.constraints().to_vec();
        for u in 0..geo.num_links() {
            let var = |d| inner.position_var(0, u, d);
            let (x, y) = (var(0).unwrap(), var(1).unwrap());
            let (s, f) = (geo.starts[u], geo.finals[u]);
            constraints.push(Constraint::Cone {
                vars: vec![x, y, tau],
                rows: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
                offset: vec![-s[0], -s[1]],
                scale: vec![0.0, 0.0, full.level],
                scale_offset: 0.0,
            });
            constraints.push(Constraint::Cone {
                vars: vec![x, y, tau],
                rows: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
                offset: vec![-f[0], -f[1]],
                scale: vec![0.0, 0.0, -full.level],
                scale_offset: full.level,
            });
            if let Some(z) = var(2) {
                // Out leg: z - s_z <= tau up, s_z - z <= tau down.
                constraints.push(Constraint::linear(vec![z, tau], vec![1.0, -full.up], s[2]));
                constraints.push(Constraint::linear(vec![z, tau], vec![-1.0, -full.down], -s[2]));
                // Return leg: f_z - z <= (1 - tau) up, z - f_z <= (1 - tau) down.
                constraints.push(Constraint::linear(vec![z, tau], vec![-1.0, full.up], full.up - f[2]));
                constraints.push(Constraint::linear(vec![z, tau], vec![1.0, full.down], full.down + f[2]));
            }
        }
        constraints.push(Constraint::lower(tau, 0.0));
        constraints.push(Constraint::upper(tau, 1.0));
        Self {
            inner,
            inner_dim,
            constraints,
        }
    }
}

impl ConvexProgram for OneWayProgram<'_> {
    fn block_sizes(&self) -> Vec<usize> {
        vec![self.inner_dim + 1]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.inner.objective(&x[..self.inner_dim])
    }

    fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut BlockTridiagonal) {
        // A single block: indices of the inner program carry over unchanged.
        let mut inner_hess = BlockTridiagonal::new(&[self.inner_dim]);
        self.inner
            .objective_derivatives(&x[..self.inner_dim], &mut grad[..self.inner_dim], &mut inner_hess);
        for r in 0..self.inner_dim {
            for c in 0..self.inner_dim {
                let v = inner_hess.get(r, c);
                if v != 0.0 {
                    hess.add(r, c, v);
                }
            }
        }
    }

    fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }
}

/// Lens admissibility for UAV `u` at reach fraction `tau`.
fn in_lens(geo: &Geometry, u: usize, q: &Point, tau: f64, margin: f64) -> bool {
    let (lo, hi) = (
        geo.fixed_altitude || q[2] > geo.h_min,
        geo.fixed_altitude || q[2] < geo.h_max,
    );
    let out = Reach::slots(geo, tau * geo.slots as f64);
    let back = Reach::slots(geo, (1.0 - tau) * geo.slots as f64);
    lo && hi && out.contains(&geo.starts[u], q, margin) && back.contains(q, &geo.finals[u], margin)
}

/// Strictly admissible point of the lens closest to the terminal along the
/// segment from the terminal's projection to the straight-line position.
fn lens_point(geo: &Geometry, u: usize, tau: f64) -> Option<Point> {
    let (s, f) = (geo.starts[u], geo.finals[u]);
    let line = s + (f - s) * tau;
    let out = Reach::slots(geo, tau * geo.slots as f64);
    let back = Reach::slots(geo, (1.0 - tau) * geo.slots as f64);
    let (band_lo, band_hi) = altitude_band(geo);
    let (o_lo, o_hi) = out.z_window(&s, REACH_MARGIN);
    // Return leg: f_z - z <= up, z - f_z <= down.
    let (b_lo, b_hi) = (f[2] - REACH_MARGIN * back.up, f[2] + REACH_MARGIN * back.down);
    let (z_lo, z_hi) = (band_lo.max(o_lo).max(b_lo), band_hi.min(o_hi).min(b_hi));
    if z_lo > z_hi {
        return None;
    }
    let z = if geo.fixed_altitude {
        geo.h_min
    } else {
        band_lo.clamp(z_lo, z_hi)
    };
    let anchor = Point::new(line[0], line[1], z);
    if !in_lens(geo, u, &anchor, tau, REACH_MARGIN) {
        return None;
    }
    let target = Point::new(geo.gts[u][0], geo.gts[u][1], z);
    if in_lens(geo, u, &target, tau, REACH_MARGIN) {
        return Some(target);
    }
    let (mut inside, mut outside) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (inside + outside);
        if in_lens(geo, u, &(anchor + (target - anchor) * mid), tau, REACH_MARGIN) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Some(anchor + (target - anchor) * inside)
}

/// Candidate reach fractions in bisection order: 1/2, 1/4, 3/4, 1/8, ...
fn fraction_candidates() -> impl Iterator<Item = f64> {
    (1..=7u32).flat_map(|level| {
        let den = (1u32 << level) as f64;
        (1..(1u32 << level)).step_by(2).map(move |num| num as f64 / den)
    })
}

/// One-way deployment with a free common arrival fraction.
pub fn solve_oneway_deployment(scen: &Scenario, cfg: &ScaConfig) -> Result<DeploymentSolution> {
    scen.validate()?;
    if scen.uav_final.is_none() {
        return Err(TpcError::Usage("one-way deployment needs final positions".into()));
    }
    let geo = Geometry::new(scen);
    let k = geo.num_links();
    let (tau0, preferred) = fraction_candidates()
        .find_map(|tau| {
            let pts: Option<Vec<Point>> = (0..k).map(|u| lens_point(&geo, u, tau)).collect();
            pts.map(|p| (tau, p))
        })
        .ok_or_else(|| {
            TpcError::Infeasible("no arrival time lets every UAV reach a hover point and its destination".into())
        })?;
    let pos0 = place_hovers(&geo, &preferred, |u, q| in_lens(&geo, u, q, tau0, REACH_MARGIN))?;
    let init = PathState {
        res: vec![initial_amplitudes(&geo, &pos0)],
        pos: vec![pos0],
    };
    let mut tau = tau0;
    let step = |cur: &PathState| -> Result<(PathState, usize)> {
        let exp = SurrogateExpansion::from_state(&geo, cur);
        let model = JointRateModel { exp: &exp };
        let prog = OneWayProgram::new(&geo, &model, &cur.pos);
        let mut x0 = prog.inner.encode(&cur.res, &cur.pos);
        x0.push(tau);
        let sol = maximize(&prog, &x0, &cfg.ipm).map_err(subproblem_error)?;
        tau = sol.x[prog.inner_dim];
        Ok((
            prog.inner.decode(&sol.x[..prog.inner_dim]),
            sol.diagnostics.newton_iterations,
        ))
    };
    let (st, trace) = run_sca(init, cfg, step, |s| s.sum_rate(&geo))?;
    // `tau` belongs to the last accepted subproblem only when that iterate
    // was kept; re-derive it from the returned hover points for safety.
    let hover = &st.pos[0];
    let window = (0..k).try_fold((0.0f64, 1.0f64), |(lo, hi), u| {
        let w = reach_time_window(
            &geo.to_si(&geo.starts[u]),
            &geo.to_si(&geo.finals[u]),
            &geo.to_si(&hover[u]),
            &scen.limits,
            scen.horizon.total_time,
        )?;
        Some((
            lo.max(w.0 / scen.horizon.total_time),
            hi.min(w.1 / scen.horizon.total_time),
        ))
    });
    let tau = match window {
        Some((lo, hi)) if lo <= hi => tau.clamp(lo, hi),
        _ => tau,
    };
    let (mut amps, mut pos) = (st.res[0].clone(), st.pos[0].clone());
    reset_silent(&geo, &mut amps, &mut pos, |u, q| in_lens(&geo, u, q, tau, 1.0));
    Ok(finish(&geo, amps, pos, Some(tau * scen.horizon.total_time), trace))
}

/// Slots needed to fly straight to the hover points plus `slack`, at least
/// one.
pub fn estimate_m(hover: &DeploymentSolution, scen: &Scenario, slack: usize) -> Result<usize> {
    let step = scen.limits.v_level * scen.horizon.slot_len;
    let straight = hover
        .hover_positions
        .iter()
        .zip(&scen.uav_initial)
        .map(|(h, s)| {
            let d = ((h[0] - s[0]).powi(2) + (h[1] - s[1]).powi(2)).sqrt();
            (d / step - 1e-9).ceil().max(0.0) as usize
        })
        .max()
        .unwrap_or(0);
    let m = (straight + slack).max(1);
    let available = scen.horizon.half();
    if m > available {
        return Err(TpcError::HorizonTooShort { required: m, available });
    }
    Ok(m)
}
