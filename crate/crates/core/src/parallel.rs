//! Parallel trajectory and power control by consensus splitting.
//!
//! Pairwise position differences are split off as consensus variables `z`,
//! so each UAV solves its own proximal subproblem built from a separable
//! minorant of the sum rate. Subproblems of one iteration read only the
//! iteration-start snapshot and run concurrently on a rayon pool.
//!
//! Each per-UAV subproblem also carries half of every linearized separation
//! constraint (`Δᵀ(q_k - qʳ_k) >= (d² - |Δ|²)/4` with `Δ = qʳ_k - qʳ_j`).
//! The two halves of a pair add up to the joint linearization, so every
//! iterate keeps the true separation even before the consensus variables
//! agree.

use log::{debug, warn};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Result, TpcError};
use crate::kernel::{maximize, IpmConfig};
use crate::normalized::{Geometry, PathState};
use crate::program::{PathProgram, PathSpec, SlotConstraints, SlotModel};
use crate::sca::{anchored_init, push_trust_region, subproblem_error, Boundary, ScaTrace, SurrogateExpansion};
use crate::scenario::{Point, Scenario, TrajectorySolution};

/// Pair list and difference operator of the consensus splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceStructure {
    pub num_uavs: usize,
    /// Unordered pairs `(k, j)` with `k < j`, in row order.
    pub pairs: Vec<(usize, usize)>,
    /// `pairs.len() x K` matrix with `+1` at `k` and `-1` at `j` per row.
    pub abar: DMatrix<f64>,
    /// Largest eigenvalue of `abarᵀ abar`.
    pub lambda_max: f64,
}

/// Builds the difference operator for `k` UAVs.
pub fn build_incidence(k: usize) -> IncidenceStructure {
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let mut abar = DMatrix::zeros(pairs.len(), k);
    for (r, &(a, b)) in pairs.iter().enumerate() {
        abar[(r, a)] = 1.0;
        abar[(r, b)] = -1.0;
    }
    let lambda_max = if pairs.is_empty() {
        0.0
    } else {
        SymmetricEigen::new(abar.transpose() * &abar).eigenvalues.max()
    };
    IncidenceStructure {
        num_uavs: k,
        pairs,
        abar,
        lambda_max,
    }
}

impl IncidenceStructure {
    /// Stacked differences `q_k - q_j`, one per pair.
    pub fn apply(&self, q: &[Point]) -> Vec<Point> {
        self.pairs.iter().map(|&(a, b)| q[a] - q[b]).collect()
    }

    /// Smallest eigenvalue of `C - AᵀBA` for uniform weights `b` and `c`.
    pub fn proximal_margin(&self, b: f64, c: f64) -> f64 {
        let k = self.num_uavs;
        let m = DMatrix::identity(k, k) * c - self.abar.transpose() * &self.abar * b;
        SymmetricEigen::new(m).eigenvalues.min()
    }
}

/// Convex-combination weights of the separable bound: `mu[n][k][j]` is the
/// share of UAV `k` in the linearized power received at terminal `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCoefficients {
    pub mu: Vec<Vec<Vec<f64>>>,
    pub eps: f64,
}

/// Default floor of the weights.
pub const DEFAULT_MU_FLOOR: f64 = 1e-12;

impl SurrogateCoefficients {
    pub fn new(exp: &SurrogateExpansion, eps: f64) -> Self {
        let k = exp.num_links();
        let mu = (0..exp.amps.len())
            .map(|n| {
                let rx = |i: usize, j: usize| exp.amps[n][i] * exp.amps[n][i] / exp.dist2[n][i][j] + eps;
                let mut w = vec![vec![0.0; k]; k];
                for j in 0..k {
                    let total: f64 = (0..k).map(|i| rx(i, j)).sum();
                    for i in 0..k {
                        w[i][j] = rx(i, j) / total;
                    }
                }
                w
            })
            .collect();
        Self { mu, eps }
    }
}

/// Separable per-UAV minorant of the sum rate (nats). Fails with
/// [`TpcError::TrustRegion`] when a linearized distance is not positive.
pub fn decomposable_surrogate(
    exp: &SurrogateExpansion,
    coeffs: &SurrogateCoefficients,
    k: usize,
    n: usize,
    a: f64,
    q: &Point,
) -> Result<f64> {
    for j in (0..exp.num_links()).filter(|&j| j != k) {
        let d = exp.linearized_dist2(n, k, j, q);
        if d <= 0.0 {
            return Err(TpcError::TrustRegion { value: d });
        }
    }
    Ok(UavTerms::new(exp, coeffs, k, n).value(a, q))
}

/// Slot data of the separable bound for one UAV.
struct UavTerms<'a> {
    exp: &'a SurrogateExpansion,
    k: usize,
    n: usize,
    mu: &'a [f64],
    /// `gamma / (1 + I^r_j)` per terminal.
    penalty: Vec<f64>,
    constant: f64,
}

impl<'a> UavTerms<'a> {
    fn new(exp: &'a SurrogateExpansion, coeffs: &'a SurrogateCoefficients, k: usize, n: usize) -> Self {
        let ir = &exp.interference[n];
        Self {
            exp,
            k,
            n,
            mu: &coeffs.mu[n][k],
            penalty: ir.iter().map(|i| exp.gamma / (1.0 + i)).collect(),
            constant: -ir[k].ln_1p() + ir[k] / (1.0 + ir[k]),
        }
    }

    /// Linearized received power at terminal `j` with its gradient data.
    fn linear(&self, j: usize, a: f64, q: &Point) -> (f64, f64, Point, f64) {
        let (n, k) = (self.n, self.k);
        let ar = self.exp.amps[n][k];
        let d = self.exp.dist2[n][k][j];
        let diff = q - self.exp.gts[j];
        let curv = ar * ar / (d * d);
        let l = 2.0 * ar * a / d - curv * diff.norm_squared();
        (l, 2.0 * ar / d, diff * (-2.0 * curv), -2.0 * curv)
    }

    fn value(&self, a: f64, q: &Point) -> f64 {
        let g = self.exp.gamma;
        let mut total = self.constant;
        for j in 0..self.exp.num_links() {
            let (l, ..) = self.linear(j, a, q);
            let u = 1.0 + g / self.mu[j] * l;
            if u <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += self.mu[j] * u.ln();
            if j != self.k {
                let d = self.exp.linearized_dist2(self.n, self.k, j, q);
                if d <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total -= self.penalty[j] * a * a / d;
            }
        }
        total
    }

    /// Gradient and Hessian in local coordinates `[a, x, y, z]`.
    fn derivatives(&self, a: f64, q: &Point, grad: &mut [f64], hess: &mut DMatrix<f64>) {
        let g = self.exp.gamma;
        for j in 0..self.exp.num_links() {
            let (l, la, lq, lqq) = self.linear(j, a, q);
            let scale = g / self.mu[j];
            let u = 1.0 + scale * l;
            let du = [scale * la, scale * lq[0], scale * lq[1], scale * lq[2]];
            for r in 0..4 {
                grad[r] += self.mu[j] * du[r] / u;
                for c in 0..4 {
                    hess[(r, c)] -= self.mu[j] * du[r] * du[c] / (u * u);
                }
            }
            for r in 1..4 {
                hess[(r, r)] += self.mu[j] * scale * lqq / u;
            }
            if j == self.k {
                continue;
            }
            let d = self.exp.linearized_dist2(self.n, self.k, j, q);
            let w2 = (self.exp.pos[self.n][self.k] - self.exp.gts[j]) * 2.0;
            let p = self.penalty[j];
            grad[0] -= p * 2.0 * a / d;
            hess[(0, 0)] -= p * 2.0 / d;
            for r in 0..3 {
                grad[1 + r] += p * a * a / (d * d) * w2[r];
                let cross = p * 2.0 * a / (d * d) * w2[r];
                hess[(0, 1 + r)] += cross;
                hess[(1 + r, 0)] += cross;
                for c in 0..3 {
                    hess[(1 + r, 1 + c)] -= p * 2.0 * a * a / (d * d * d) * w2[r] * w2[c];
                }
            }
        }
    }
}

/// Proximal per-UAV objective `R̂_k - (c/2)|q - q̂|²` over the free slots.
struct UavRateModel<'a> {
    exp: &'a SurrogateExpansion,
    coeffs: &'a SurrogateCoefficients,
    k: usize,
    prox_weight: f64,
    prox_center: Vec<Point>,
    d_min: f64,
}

impl SlotModel for UavRateModel<'_> {
    fn resource_dim(&self) -> usize {
        1
    }

    fn value(&self, slot: usize, res: &[f64], pos: &[Point]) -> f64 {
        let terms = UavTerms::new(self.exp, self.coeffs, self.k, slot);
        terms.value(res[0], &pos[0]) - 0.5 * self.prox_weight * (pos[0] - self.prox_center[slot]).norm_squared()
    }

    fn derivatives(&self, slot: usize, res: &[f64], pos: &[Point], grad: &mut [f64], hess: &mut DMatrix<f64>) {
        UavTerms::new(self.exp, self.coeffs, self.k, slot).derivatives(res[0], &pos[0], grad, hess);
        for r in 0..3 {
            grad[1 + r] -= self.prox_weight * (pos[0][r] - self.prox_center[slot][r]);
            hess[(1 + r, 1 + r)] -= self.prox_weight;
        }
    }

    fn slot_constraints(&self, slot: usize, b: &mut SlotConstraints<'_>) {
        b.affine(&[(0, -1.0)], &[], 0.0);
        b.affine(&[(0, 1.0)], &[], -1.0);
        let k = self.k;
        let own = self.exp.pos[slot][k];
        for j in (0..self.exp.num_links()).filter(|&j| j != k) {
            push_trust_region(self.exp, slot, k, j, 0, b);
            // -Δᵀq + Δᵀqʳ + (d² - |Δ|²)/4 <= 0
            let delta = own - self.exp.pos[slot][j];
            let constant = delta.dot(&own) + 0.25 * (self.d_min * self.d_min - delta.norm_squared());
            b.affine(&[], &[(0, -delta)], constant);
        }
    }
}

/// Splitting state: consensus variables and duals per slot and pair, with
/// their penalty weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub z: Vec<Vec<Point>>,
    pub lambda: Vec<Vec<Point>>,
    /// Penalty per pair.
    pub b: Vec<f64>,
    /// Proximal weight per UAV.
    pub c: Vec<f64>,
}

impl ConsensusState {
    /// `z = proj(A q)`, `lambda = 0`.
    pub fn new(inc: &IncidenceStructure, pos: &[Vec<Point>], b: f64, c: f64, d_min: f64) -> Self {
        let z = pos
            .iter()
            .map(|q| inc.apply(q).iter().map(|v| project_z(v, d_min, None)).collect())
            .collect();
        let lambda = vec![vec![Point::zeros(); inc.pairs.len()]; pos.len()];
        Self {
            z,
            lambda,
            b: vec![b; inc.pairs.len()],
            c: vec![c; inc.num_uavs],
        }
    }

    /// Proximal centers `q̂_k = qʳ_k - A_kᵀ B (A qʳ - z + B⁻¹λ) / c_k`.
    pub fn prox_centers(&self, inc: &IncidenceStructure, pos: &[Vec<Point>], k: usize) -> Vec<Point> {
        pos.iter()
            .enumerate()
            .map(|(n, q)| {
                if self.c[k] == 0.0 {
                    return q[k];
                }
                let mut shift = Point::zeros();
                for (p, &(a, b)) in inc.pairs.iter().enumerate() {
                    let sign = if a == k {
                        1.0
                    } else if b == k {
                        -1.0
                    } else {
                        continue;
                    };
                    let r = q[a] - q[b] - self.z[n][p] + self.lambda[n][p] / self.b[p];
                    shift += r * (sign * self.b[p]);
                }
                q[k] - shift / self.c[k]
            })
            .collect()
    }

    /// Largest absolute entry of `A q - z`.
    pub fn residual(&self, inc: &IncidenceStructure, pos: &[Vec<Point>]) -> f64 {
        pos.iter()
            .zip(&self.z)
            .flat_map(|(q, z)| {
                inc.apply(q)
                    .into_iter()
                    .zip(z)
                    .map(|(d, z)| (d - z).amax())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }
}

/// Projection onto `{|z| >= d_min}`. A zero input maps to `prev` rescaled
/// to length `d_min`, or to `d_min` along the x axis without history.
pub fn project_z(v: &Point, d_min: f64, prev: Option<&Point>) -> Point {
    let n = v.norm();
    if n >= d_min {
        *v
    } else if n > 0.0 {
        v * (d_min / n)
    } else {
        match prev {
            Some(p) if p.norm() > 0.0 => p * (d_min / p.norm()),
            _ => Point::new(d_min, 0.0, 0.0),
        }
    }
}

/// `λ + b (q_k - q_j - z)`.
pub fn dual_update(lambda: &Point, b: f64, q_k: &Point, q_j: &Point, z: &Point) -> Point {
    lambda + (q_k - q_j - z) * b
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelConfig {
    /// Pair penalty `b`.
    pub penalty: f64,
    /// `c = proximal_factor * b * lambda_max(AᵀA)`.
    pub proximal_factor: f64,
    /// Stop when the relative change of the true objective is at most this.
    pub rel_tol: f64,
    /// ...and the consensus residual is at most this many `d_min`.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Worker threads; `None` uses one per UAV.
    pub threads: Option<usize>,
    pub mu_floor: f64,
    pub ipm: IpmConfig,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        Self {
            penalty: 0.001,
            proximal_factor: 1.1,
            rel_tol: 1e-3,
            residual_tol: 1e-3,
            max_iter: 100,
            threads: None,
            mu_floor: DEFAULT_MU_FLOOR,
            ipm: IpmConfig::default(),
        }
    }
}

impl ParallelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty > 0.0) || !(self.proximal_factor >= 1.0) || !(self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(TpcError::Usage(format!("invalid parallel configuration {self:?}")));
        }
        if self.threads == Some(0) || !(self.mu_floor > 0.0) {
            return Err(TpcError::Usage("thread count and weight floor must be positive".into()));
        }
        self.ipm.validate()
    }
}

/// Iteration history of the parallel solver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParallelTrace {
    pub trace: ScaTrace,
    /// Consensus residual (scaled units) after each iteration.
    pub residuals: Vec<f64>,
}

/// Amplitudes and positions of one UAV over the free slots, plus the
/// Newton steps spent.
type UavUpdate = (Vec<f64>, Vec<Point>, usize);

/// One UAV's proximal update over the free slots of `cur`; returns its
/// amplitudes and positions per free slot and the Newton step count.
#[allow(clippy::too_many_arguments)]
fn per_uav_update(
    geo: &Geometry,
    bnd: Boundary<'_>,
    exp: &SurrogateExpansion,
    coeffs: &SurrogateCoefficients,
    state: &ConsensusState,
    inc: &IncidenceStructure,
    cur: &PathState,
    k: usize,
    ipm: &IpmConfig,
) -> Result<UavUpdate> {
    let m = cur.slots();
    let free = bnd.free_slots(m);
    let free_pos = &cur.pos[..free];
    let model = UavRateModel {
        exp,
        coeffs,
        k,
        prox_weight: state.c[k],
        prox_center: state.prox_centers(inc, free_pos, k),
        d_min: bnd.sep_distance,
    };
    let lead = [bnd.lead[k]];
    let tail = [cur.pos[m - 1][k]];
    let spec = PathSpec {
        lead: &lead,
        lead_steps: bnd.lead_steps,
        tail: bnd.anchored.then_some(&tail[..]),
        separation: None,
        sep_distance: bnd.sep_distance,
        free_slots: free,
        end_balls: bnd.end_balls.map(|b| &b[k..k + 1]),
    };
    let prog = PathProgram::new(geo, &model, &spec);
    let res: Vec<Vec<f64>> = cur.res[..free].iter().map(|a| vec![a[k]]).collect();
    let pos: Vec<Vec<Point>> = free_pos.iter().map(|q| vec![q[k]]).collect();
    let sol = maximize(&prog, &prog.encode(&res, &pos), ipm).map_err(subproblem_error)?;
    let out = prog.decode(&sol.x);
    Ok((
        out.res.iter().map(|a| a[0]).collect(),
        out.pos.iter().map(|q| q[0]).collect(),
        sol.diagnostics.newton_iterations,
    ))
}

fn min_separation(pos: &[Vec<Point>]) -> f64 {
    let mut best = f64::INFINITY;
    for q in pos {
        for i in 0..q.len() {
            for j in i + 1..q.len() {
                best = best.min((q[i] - q[j]).norm());
            }
        }
    }
    best
}

/// Parallel solve on scaled data over the free slots of `bnd`.
pub(crate) fn parallel_path(
    geo: &Geometry,
    bnd: Boundary<'_>,
    init: PathState,
    cfg: &ParallelConfig,
) -> Result<(PathState, ParallelTrace)> {
    cfg.validate()?;
    let k = geo.num_links();
    let m = init.slots();
    let obj0 = init.sum_rate(geo);
    let mut out = ParallelTrace {
        trace: ScaTrace {
            objectives: vec![obj0],
            ..ScaTrace::default()
        },
        residuals: Vec::new(),
    };
    let free = bnd.free_slots(m);
    if free == 0 {
        out.trace.converged = true;
        return Ok((init, out));
    }
    let inc = build_incidence(k);
    let c = cfg.proximal_factor * cfg.penalty * inc.lambda_max;
    if inc.proximal_margin(cfg.penalty, c) < -1e-10 {
        return Err(TpcError::Usage("proximal weights violate C - AᵀBA >= 0".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(k))
        .build()
        .map_err(|e| TpcError::Internal(format!("thread pool: {e}")))?;
    let mut cur = init;
    let mut state = ConsensusState::new(&inc, &cur.pos[..free], cfg.penalty, c, geo.d_min);
    let (mut best, mut best_obj) = (cur.clone(), obj0);
    let mut obj = obj0;
    for iter in 1..=cfg.max_iter {
        let exp = SurrogateExpansion::from_state(geo, &cur.truncated(free));
        let coeffs = SurrogateCoefficients::new(&exp, cfg.mu_floor);
        let updates: Vec<Result<UavUpdate>> = pool.install(|| {
            (0..k)
                .into_par_iter()
                .map(|u| per_uav_update(geo, bnd, &exp, &coeffs, &state, &inc, &cur, u, &cfg.ipm))
                .collect()
        });
        let mut next = cur.clone();
        for (u, upd) in updates.into_iter().enumerate() {
            let (a, q, newton) = upd?;
            out.trace.newton_steps += newton;
            for n in 0..free {
                next.res[n][u] = a[n];
                next.pos[n][u] = q[n];
            }
        }
        for n in 0..free {
            let diffs = inc.apply(&next.pos[n]);
            for (p, &(a, b)) in inc.pairs.iter().enumerate() {
                let v = diffs[p] + state.lambda[n][p] / state.b[p];
                state.z[n][p] = project_z(&v, geo.d_min, Some(&state.z[n][p]));
                state.lambda[n][p] = dual_update(
                    &state.lambda[n][p],
                    state.b[p],
                    &next.pos[n][a],
                    &next.pos[n][b],
                    &state.z[n][p],
                );
            }
        }
        let next_obj = next.sum_rate(geo);
        let residual = state.residual(&inc, &next.pos[..free]);
        let precision = (next_obj - obj).abs() / obj.abs().max(f64::MIN_POSITIVE);
        out.trace.objectives.push(next_obj);
        out.trace.iterations = iter;
        out.residuals.push(residual);
        debug!("parallel iteration {iter}: objective {next_obj}, precision {precision:e}, residual {residual:e}");
        cur = next;
        obj = next_obj;
        if min_separation(&cur.pos[..free]) >= bnd.sep_distance && obj > best_obj {
            best = cur.clone();
            best_obj = obj;
        }
        if precision <= cfg.rel_tol && residual <= cfg.residual_tol * geo.d_min {
            out.trace.converged = true;
            break;
        }
    }
    if !out.trace.converged {
        warn!(
            "parallel solver hit {} iterations without meeting its stopping rule",
            cfg.max_iter
        );
    }
    if min_separation(&cur.pos[..free]) < bnd.sep_distance || obj < best_obj {
        debug!("returning the best separated iterate");
        cur = best;
    }
    Ok((cur, out))
}

/// Parallel solve of the reduced problem with the anchor fixed at slot `M`.
pub fn run_parallel_tpc(
    scen: &Scenario,
    hover_positions: &[Point],
    hover_powers: &[f64],
    init: &TrajectorySolution,
    cfg: &ParallelConfig,
) -> Result<(TrajectorySolution, ParallelTrace)> {
    let geo = Geometry::new(scen);
    let st = anchored_init(&geo, scen, hover_positions, hover_powers, init)?;
    let (out, trace) = parallel_path(&geo, Boundary::new(&geo, &geo.starts, true), st, cfg)?;
    Ok((out.to_solution(&geo, scen)?, trace))
}
