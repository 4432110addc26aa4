//! Centralized successive convex approximation of the reduced trajectory and
//! power control problem.
//!
//! Each iteration replaces the sum rate by a concave minorant that is tight
//! at the current iterate and maximizes it with the barrier kernel under the
//! speed, altitude, power and linearized separation constraints, with the
//! last slot pinned to the hover anchor.

use log::{debug, warn};
use nalgebra::DMatrix;

use crate::error::{Result, TpcError};
use crate::kernel::{maximize, IpmConfig};
use crate::normalized::{Geometry, PathState};
use crate::program::{PathProgram, PathSpec, SlotConstraints, SlotModel};
use crate::scenario::{Point, Scenario, TrajectorySolution};

/// Fraction of the expansion distance below which the linearized
/// interference distance may not drop.
pub const TRUST_FRACTION: f64 = 0.01;

/// Cached quantities at the expansion point of one SCA iteration, in scaled
/// units.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateExpansion {
    /// Amplitudes `a^r[n][j]`.
    pub amps: Vec<Vec<f64>>,
    /// Positions `q^r[n][j]`.
    pub pos: Vec<Vec<Point>>,
    /// `dist2[n][j][k] = |q^r_j - s_k|^2`.
    pub dist2: Vec<Vec<Vec<f64>>>,
    /// `interference[n][k] = sum_{j != k} gamma (a^r_j)^2 / dist2[n][j][k]`.
    pub interference: Vec<Vec<f64>>,
    pub gamma: f64,
    pub gts: Vec<Point>,
}

impl SurrogateExpansion {
    pub fn new(geo: &Geometry, amps: &[Vec<f64>], pos: &[Vec<Point>]) -> Self {
        let k = geo.num_links();
        let dist2: Vec<Vec<Vec<f64>>> = pos
            .iter()
            .map(|q| {
                (0..k)
                    .map(|j| (0..k).map(|i| geo.dist2(&q[j], &geo.gts[i])).collect())
                    .collect()
            })
            .collect();
        let interference = amps
            .iter()
            .zip(&dist2)
            .map(|(a, d)| {
                (0..k)
                    .map(|i| {
                        (0..k)
                            .filter(|&j| j != i)
                            .map(|j| geo.gamma * a[j] * a[j] / d[j][i])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Self {
            amps: amps.to_vec(),
            pos: pos.to_vec(),
            dist2,
            interference,
            gamma: geo.gamma,
            gts: geo.gts.clone(),
        }
    }

    pub fn from_state(geo: &Geometry, st: &PathState) -> Self {
        Self::new(geo, &st.res, &st.pos)
    }

    pub fn num_links(&self) -> usize {
        self.gts.len()
    }

    /// Linearized squared distance `d^r + 2 (q^r_j - s_k) . (q - q^r_j)`.
    pub fn linearized_dist2(&self, n: usize, j: usize, k: usize, q: &Point) -> f64 {
        let w = self.pos[n][j] - self.gts[k];
        self.dist2[n][j][k] + 2.0 * w.dot(&(q - self.pos[n][j]))
    }
}

/// Concave minorant of the rate of link `k` at slot `n` (nats).
///
/// Fails with [`TpcError::TrustRegion`] when a linearized interference
/// distance is not positive.
pub fn surrogate_rate(exp: &SurrogateExpansion, n: usize, k: usize, a: &[f64], q: &[Point]) -> Result<f64> {
    let kk = exp.num_links();
    for j in (0..kk).filter(|&j| j != k) {
        let d = exp.linearized_dist2(n, j, k, &q[j]);
        if d <= 0.0 {
            return Err(TpcError::TrustRegion { value: d });
        }
    }
    Ok(link_surrogate(exp, n, k, a, q))
}

/// `-inf` outside the domain instead of an error.
fn link_surrogate(exp: &SurrogateExpansion, n: usize, k: usize, a: &[f64], q: &[Point]) -> f64 {
    let g = exp.gamma;
    let ar = &exp.amps[n];
    let dr = &exp.dist2[n];
    let ir = exp.interference[n][k];
    let mut u = 1.0;
    for j in 0..exp.num_links() {
        let d = dr[j][k];
        u += g * (2.0 * ar[j] * a[j] / d - ar[j] * ar[j] * (q[j] - exp.gts[k]).norm_squared() / (d * d));
    }
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let c = g / (1.0 + ir);
    let mut penalty = 0.0;
    for j in (0..exp.num_links()).filter(|&j| j != k) {
        let d = exp.linearized_dist2(n, j, k, &q[j]);
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        penalty += a[j] * a[j] / d;
    }
    u.ln() - ir.ln_1p() + ir / (1.0 + ir) - c * penalty
}

/// Adds gradient and Hessian of [`link_surrogate`] in local coordinates
/// `[a_0..a_{K-1}, q_0 (3), ..., q_{K-1} (3)]`.
fn link_surrogate_derivatives(
    exp: &SurrogateExpansion,
    n: usize,
    k: usize,
    a: &[f64],
    q: &[Point],
    grad: &mut [f64],
    hess: &mut DMatrix<f64>,
) {
    let kk = exp.num_links();
    let g = exp.gamma;
    let ar = &exp.amps[n];
    let dr = &exp.dist2[n];
    let ir = exp.interference[n][k];
    let pos = |j: usize| kk + 3 * j;
    // First term: log(u) with u affine in a and concave quadratic in q.
    let mut u = 1.0;
    let mut du = vec![0.0; kk + 3 * kk];
    for j in 0..kk {
        let d = dr[j][k];
        let diff = q[j] - exp.gts[k];
        let curv = g * ar[j] * ar[j] / (d * d);
        u += g * 2.0 * ar[j] * a[j] / d - curv * diff.norm_squared();
        du[j] = 2.0 * g * ar[j] / d;
        for c in 0..3 {
            du[pos(j) + c] = -2.0 * curv * diff[c];
        }
    }
    for (i, dv) in du.iter().enumerate() {
        if *dv == 0.0 {
            continue;
        }
        grad[i] += dv / u;
        for (l, dw) in du.iter().enumerate() {
            hess[(i, l)] -= dv * dw / (u * u);
        }
    }
    for j in 0..kk {
        let curv = g * ar[j] * ar[j] / (dr[j][k] * dr[j][k]);
        for c in 0..3 {
            hess[(pos(j) + c, pos(j) + c)] -= 2.0 * curv / u;
        }
    }
    // Second term: -c sum a_j^2 / D_j with D_j affine in q_j.
    let cst = g / (1.0 + ir);
    for j in (0..kk).filter(|&j| j != k) {
        let d = exp.linearized_dist2(n, j, k, &q[j]);
        let w2 = (exp.pos[n][j] - exp.gts[k]) * 2.0;
        let aj = a[j];
        grad[j] -= cst * 2.0 * aj / d;
        hess[(j, j)] -= cst * 2.0 / d;
        for c in 0..3 {
            grad[pos(j) + c] += cst * aj * aj / (d * d) * w2[c];
            let cross = cst * 2.0 * aj / (d * d) * w2[c];
            hess[(j, pos(j) + c)] += cross;
            hess[(pos(j) + c, j)] += cross;
            for e in 0..3 {
                hess[(pos(j) + c, pos(j) + e)] -= cst * 2.0 * aj * aj / (d * d * d) * w2[c] * w2[e];
            }
        }
    }
}

/// Linearized separation residual `2 D^r . (q_k - q_j) - |D^r|^2 - d^2` with
/// `D^r = q^r_k - q^r_j`; non-negative values certify `|q_k - q_j| >= d`.
pub fn linearized_separation(q_k: &Point, q_j: &Point, qr_k: &Point, qr_j: &Point, d_min: f64) -> f64 {
    let delta = qr_k - qr_j;
    2.0 * delta.dot(&(q_k - q_j)) - delta.norm_squared() - d_min * d_min
}

/// Sum of link minorants for every free slot, with amplitude boxes and trust
/// regions on the linearized interference distances.
pub struct JointRateModel<'a> {
    pub exp: &'a SurrogateExpansion,
}

impl SlotModel for JointRateModel<'_> {
    fn resource_dim(&self) -> usize {
        self.exp.num_links()
    }

    fn value(&self, slot: usize, res: &[f64], pos: &[Point]) -> f64 {
        (0..self.exp.num_links())
            .map(|k| link_surrogate(self.exp, slot, k, res, pos))
            .sum()
    }

    fn derivatives(&self, slot: usize, res: &[f64], pos: &[Point], grad: &mut [f64], hess: &mut DMatrix<f64>) {
        for k in 0..self.exp.num_links() {
            link_surrogate_derivatives(self.exp, slot, k, res, pos, grad, hess);
        }
    }

    fn slot_constraints(&self, slot: usize, b: &mut SlotConstraints<'_>) {
        let kk = self.exp.num_links();
        for j in 0..kk {
            b.affine(&[(j, -1.0)], &[], 0.0);
            b.affine(&[(j, 1.0)], &[], -1.0);
        }
        for k in 0..kk {
            for j in (0..kk).filter(|&j| j != k) {
                push_trust_region(self.exp, slot, j, k, j, b);
            }
        }
    }
}

/// `D_jk(q) >= TRUST_FRACTION * d^r_jk` written for program UAV `local`.
pub(crate) fn push_trust_region(
    exp: &SurrogateExpansion,
    n: usize,
    j: usize,
    k: usize,
    local: usize,
    b: &mut SlotConstraints<'_>,
) {
    let w2 = (exp.pos[n][j] - exp.gts[k]) * 2.0;
    let constant = w2.dot(&exp.pos[n][j]) - (1.0 - TRUST_FRACTION) * exp.dist2[n][j][k];
    b.affine(&[], &[(local, -w2)], constant);
}

/// Stopping rule and subproblem solver settings of the SCA loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaConfig {
    /// Stop when the relative gain of the true objective is at most this.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub ipm: IpmConfig,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            max_iter: 100,
            ipm: IpmConfig::default(),
        }
    }
}

impl ScaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(TpcError::Usage(format!("invalid SCA configuration {self:?}")));
        }
        self.ipm.validate()
    }
}

/// Objective history of an iterative solver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScaTrace {
    /// True objective (nats) of the initial point and of every iterate.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Total Newton steps spent in the barrier solver.
    pub newton_steps: usize,
}

impl ScaTrace {
    /// Relative change between consecutive objectives.
    pub fn precision(&self) -> Vec<f64> {
        self.objectives
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / w[0].abs().max(f64::MIN_POSITIVE))
            .collect()
    }
}

/// Relative drop of the true objective beyond which an iterate is rejected.
const MONOTONE_SLACK: f64 = 1e-8;

/// Runs the generic SCA loop: `step` maps an iterate to the maximizer of the
/// minorant built at it, `objective` evaluates the true objective.
pub(crate) fn run_sca<F, O>(
    init: PathState,
    cfg: &ScaConfig,
    mut step: F,
    objective: O,
) -> Result<(PathState, ScaTrace)>
where
    F: FnMut(&PathState) -> Result<(PathState, usize)>,
    O: Fn(&PathState) -> f64,
{
    cfg.validate()?;
    let mut cur = init;
    let mut obj = objective(&cur);
    let mut trace = ScaTrace {
        objectives: vec![obj],
        ..ScaTrace::default()
    };
    for _ in 0..cfg.max_iter {
        let (next, newton) = step(&cur)?;
        trace.newton_steps += newton;
        trace.iterations += 1;
        let next_obj = objective(&next);
        trace.objectives.push(next_obj);
        if !next_obj.is_finite() || next_obj < obj - MONOTONE_SLACK * obj.abs() {
            warn!("SCA objective dropped from {obj} to {next_obj}; keeping the previous iterate");
            trace.converged = true;
            return Ok((cur, trace));
        }
        let gain = (next_obj - obj) / obj.abs().max(f64::MIN_POSITIVE);
        cur = next;
        obj = next_obj;
        debug!("SCA iteration {}: objective {obj}, gain {gain:e}", trace.iterations);
        if gain <= cfg.rel_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((cur, trace))
}

pub(crate) fn subproblem_error(e: TpcError) -> TpcError {
    match e {
        TpcError::InfeasibleStart { index, value } => TpcError::Internal(format!(
            "previous iterate is not strictly feasible for its own subproblem (constraint {index}, g = {value:e})"
        )),
        other => other,
    }
}

/// Free-slot boundary of a path solve.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Boundary<'a> {
    pub lead: &'a [Point],
    /// Step limits of the transition from `lead` to the first free slot.
    pub lead_steps: (f64, f64, f64),
    /// When set, the last slot of every iterate is a fixed anchor.
    pub anchored: bool,
    pub sep_distance: f64,
    /// Per-UAV balls that must contain the last free slot.
    pub end_balls: Option<&'a [(Point, f64)]>,
}

impl<'a> Boundary<'a> {
    /// Regular slot-to-slot limits and the true separation distance.
    pub fn new(geo: &Geometry, lead: &'a [Point], anchored: bool) -> Self {
        Self {
            lead,
            lead_steps: (geo.dl, geo.da, geo.dd),
            anchored,
            sep_distance: geo.d_min,
            end_balls: None,
        }
    }

    pub fn free_slots(&self, slots: usize) -> usize {
        if self.anchored {
            slots.saturating_sub(1)
        } else {
            slots
        }
    }
}

/// One SCA step of the joint model on `cur`.
pub(crate) fn joint_step(
    geo: &Geometry,
    bnd: Boundary<'_>,
    cur: &PathState,
    ipm: &IpmConfig,
) -> Result<(PathState, usize)> {
    let m = cur.slots();
    let free = bnd.free_slots(m);
    let free_state = cur.truncated(free);
    let exp = SurrogateExpansion::from_state(geo, &free_state);
    let model = JointRateModel { exp: &exp };
    let tail = bnd.anchored.then(|| cur.pos[m - 1].as_slice());
    let spec = PathSpec {
        lead: bnd.lead,
        lead_steps: bnd.lead_steps,
        tail,
        separation: Some(&free_state.pos),
        sep_distance: bnd.sep_distance,
        free_slots: free,
        end_balls: bnd.end_balls,
    };
    let prog = PathProgram::new(geo, &model, &spec);
    let x0 = prog.encode(&free_state.res, &free_state.pos);
    let sol = maximize(&prog, &x0, ipm).map_err(subproblem_error)?;
    let mut next = prog.decode(&sol.x);
    if bnd.anchored {
        next.res.push(cur.res[m - 1].clone());
        next.pos.push(cur.pos[m - 1].clone());
    }
    Ok((next, sol.diagnostics.newton_iterations))
}

/// Centralized SCA on scaled data. `init` holds every slot up to and
/// including the anchor when the boundary is anchored.
pub(crate) fn sca_path(
    geo: &Geometry,
    bnd: Boundary<'_>,
    init: PathState,
    cfg: &ScaConfig,
) -> Result<(PathState, ScaTrace)> {
    if bnd.free_slots(init.slots()) == 0 {
        let obj = init.sum_rate(geo);
        return Ok((
            init,
            ScaTrace {
                objectives: vec![obj],
                converged: true,
                ..ScaTrace::default()
            },
        ));
    }
    run_sca(
        init,
        cfg,
        |cur| joint_step(geo, bnd, cur, &cfg.ipm),
        |st| st.sum_rate(geo),
    )
}

/// Solves the reduced problem over the `M` slots of `init` with the hover
/// anchor `(hover_positions, hover_powers)` fixed at slot `M`.
pub fn solve_sca_tpc(
    scen: &Scenario,
    hover_positions: &[Point],
    hover_powers: &[f64],
    init: &TrajectorySolution,
    cfg: &ScaConfig,
) -> Result<(TrajectorySolution, ScaTrace)> {
    let geo = Geometry::new(scen);
    let st = anchored_init(&geo, scen, hover_positions, hover_powers, init)?;
    let (out, trace) = sca_path(&geo, Boundary::new(&geo, &geo.starts, true), st, cfg)?;
    Ok((out.to_solution(&geo, scen)?, trace))
}

/// Validates that the last slot of `init` equals the anchor and converts it.
pub(crate) fn anchored_init(
    geo: &Geometry,
    scen: &Scenario,
    hover_positions: &[Point],
    hover_powers: &[f64],
    init: &TrajectorySolution,
) -> Result<PathState> {
    let k = scen.num_links();
    let m = init.num_slots();
    if hover_positions.len() != k || hover_powers.len() != k || init.num_uavs() != k {
        return Err(TpcError::Usage("anchor or initial trajectory does not match K".into()));
    }
    if m == 0 || m > scen.horizon.half() {
        return Err(TpcError::Usage(format!(
            "reduced horizon {m} outside 1..={}",
            scen.horizon.half()
        )));
    }
    for u in 0..k {
        if init.positions[u][m - 1] != hover_positions[u] || init.powers[u][m - 1] != hover_powers[u] {
            return Err(TpcError::Usage(format!(
                "slot M of UAV {u} does not match the hover anchor"
            )));
        }
    }
    let mut st = PathState::from_solution(init, geo);
    // Keep the anchor bit-exact in scaled units.
    st.pos[m - 1] = hover_positions.iter().map(|q| geo.from_si(q)).collect();
    st.res[m - 1] = hover_powers
        .iter()
        .map(|p| (p / geo.power_unit).max(0.0).sqrt())
        .collect();
    Ok(st)
}
