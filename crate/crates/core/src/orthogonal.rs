//! FDMA and TDMA baselines: every UAV transmits at full power on its own
//! share of the band (FDMA) or of the slot (TDMA), so links never interfere
//! and only the positions and the shares are optimized.
//!
//! FDMA keeps `K - 1` free fractions per slot and sets the last one to
//! `1 - sum`. TDMA optimizes the aggregated slot rate in `beta = sqrt(alpha)`
//! over the relaxation `sum beta^2 <= 1`, then rounds every slot to the
//! one-hot allocation of the UAV closest to its own terminal.

use std::time::Instant;

use log::info;
use nalgebra::DMatrix;

use crate::deployment::{estimate_m, round_trip_start, DeploymentSolution};
use crate::error::{Result, TpcError};
use crate::init::plan_paths;
use crate::kernel::{maximize, Constraint, IpmConfig};
use crate::normalized::{Geometry, PathState};
use crate::pipeline::{best_prefix, PipelineConfig, RunOutcome};
use crate::program::{PathProgram, PathSpec, SlotConstraints, SlotModel};
use crate::sca::{run_sca, subproblem_error, Boundary, ScaConfig, ScaTrace};
use crate::scenario::{mirror_extend, Point, Scenario, TrajectorySolution};

/// Smallest FDMA fraction inside the barrier solver.
pub const ALPHA_FLOOR: f64 = 1e-6;
/// Interior start of the TDMA relaxation: `sum beta^2` of the initial point.
const TDMA_START_MASS: f64 = 0.999;
/// Weight of the uniform split mixed into FDMA starting fractions.
const FDMA_START_MIX: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrthogonalScheme {
    Fdma,
    Tdma,
}

impl OrthogonalScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fdma => "fdma",
            Self::Tdma => "tdma",
        }
    }
}

/// Resource fractions `alpha[k][n]` with `beta = sqrt(alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalAllocation {
    pub scheme: OrthogonalScheme,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl OrthogonalAllocation {
    pub fn new(scheme: OrthogonalScheme, alpha: Vec<Vec<f64>>) -> Self {
        let beta = alpha
            .iter()
            .map(|r| r.iter().map(|a| a.max(0.0).sqrt()).collect())
            .collect();
        Self { scheme, alpha, beta }
    }

    /// Equal shares over `slots` slots.
    pub fn uniform(scheme: OrthogonalScheme, k: usize, slots: usize) -> Self {
        Self::new(scheme, vec![vec![1.0 / k as f64; slots]; k])
    }

    pub fn num_slots(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    /// Largest `|sum_k alpha_k[n] - 1|` over the slots.
    pub fn simplex_error(&self) -> f64 {
        (0..self.num_slots())
            .map(|n| (self.alpha.iter().map(|r| r[n]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn slot(&self, n: usize) -> Vec<f64> {
        self.alpha.iter().map(|r| r[n]).collect()
    }
}

fn snr(scen: &Scenario, q: &Point, k: usize) -> Result<f64> {
    let d2 = (q - scen.gt_positions[k]).norm_squared();
    if d2 == 0.0 {
        return Err(TpcError::Domain(format!("UAV {k} coincides with its ground terminal")));
    }
    Ok(scen.channel.gamma() * scen.p_max / d2)
}

fn check_fraction(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TpcError::Usage(format!("resource fraction {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// FDMA rate (bit/s) of link `k` on a fraction `alpha` of the band; zero at
/// `alpha = 0`.
pub fn fdma_rate(alpha: f64, q: &Point, k: usize, scen: &Scenario) -> Result<f64> {
    check_fraction(alpha)?;
    let g = snr(scen, q, k)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    Ok(scen.channel.bandwidth * alpha * (1.0 + g / alpha).log2())
}

/// Concave minorant (bit/s) of [`fdma_rate`] expanded at `q_r`, built from
/// the tangent of `1/u^2` in the distance `u`. Fails with a domain error
/// where the bound has no finite value.
pub fn fdma_surrogate(alpha: f64, q: &Point, q_r: &Point, k: usize, scen: &Scenario) -> Result<f64> {
    check_fraction(alpha)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let s = scen.gt_positions[k];
    let (u, ur) = ((q - s).norm(), (q_r - s).norm());
    if ur == 0.0 {
        return Err(TpcError::Domain("expansion point on the ground terminal".into()));
    }
    let l = 3.0 / (ur * ur) - 2.0 * u / (ur * ur * ur);
    let w = 1.0 + scen.channel.gamma() * scen.p_max * l / alpha;
    if w <= 0.0 {
        return Err(TpcError::Domain(format!("FDMA bound undefined at distance {u} m")));
    }
    Ok(scen.channel.bandwidth * alpha * w.log2())
}

/// TDMA rate (bit/s) of link `k` transmitting during a fraction `alpha` of
/// the slot.
pub fn tdma_rate(alpha: f64, q: &Point, k: usize, scen: &Scenario) -> Result<f64> {
    check_fraction(alpha)?;
    Ok(scen.channel.bandwidth * alpha * (1.0 + snr(scen, q, k)?).log2())
}

/// Aggregated TDMA slot rate `B log2(1 + sum beta_k^2 snr_k)` (bit/s).
pub fn tdma_aggregate(beta: &[f64], q: &[Point], scen: &Scenario) -> Result<f64> {
    let mut total = 0.0;
    for (k, (b, p)) in beta.iter().zip(q).enumerate() {
        total += b * b * snr(scen, p, k)?;
    }
    Ok(scen.channel.bandwidth * total.ln_1p() / std::f64::consts::LN_2)
}

/// Concave minorant (bit/s) of [`tdma_aggregate`] expanded at
/// `(beta_r, q_r)`.
pub fn tdma_surrogate(beta: &[f64], q: &[Point], beta_r: &[f64], q_r: &[Point], scen: &Scenario) -> Result<f64> {
    let c = scen.channel.gamma() * scen.p_max;
    let mut total = 0.0;
    for k in 0..beta.len() {
        let s = scen.gt_positions[k];
        let dr = (q_r[k] - s).norm_squared();
        if dr == 0.0 {
            return Err(TpcError::Domain("expansion point on the ground terminal".into()));
        }
        total += c * (2.0 * beta_r[k] * beta[k] / dr - beta_r[k] * beta_r[k] * (q[k] - s).norm_squared() / (dr * dr));
    }
    if total <= -1.0 {
        return Err(TpcError::Domain("TDMA bound undefined".into()));
    }
    Ok(scen.channel.bandwidth * total.ln_1p() / std::f64::consts::LN_2)
}

/// One-hot slot allocation to the UAV closest to its own terminal; ties go
/// to the lowest index.
pub fn tdma_allocate(positions: &[Point], gts: &[Point]) -> Vec<f64> {
    let mut best = 0;
    for k in 1..positions.len() {
        if (positions[k] - gts[k]).norm_squared() < (positions[best] - gts[best]).norm_squared() {
            best = k;
        }
    }
    let mut alpha = vec![0.0; positions.len()];
    if !alpha.is_empty() {
        alpha[best] = 1.0;
    }
    alpha
}

/// Distance minorant `L = 3/u_r^2 - 2u/u_r^3` with gradient and Hessian in `q`.
fn inverse_square_tangent(q: &Point, qr: &Point, s: &Point) -> (f64, Point, DMatrix<f64>) {
    let d = q - s;
    let u = d.norm();
    let ur = (qr - s).norm();
    let k = 2.0 / (ur * ur * ur);
    let grad = d * (-k / u);
    let mut hess = DMatrix::zeros(3, 3);
    for r in 0..3 {
        for c in 0..3 {
            let eye = if r == c { 1.0 } else { 0.0 };
            hess[(r, c)] = -k * (eye / u - d[r] * d[c] / (u * u * u));
        }
    }
    (3.0 / (ur * ur) - k * u, grad, hess)
}

/// Expansion data shared by both orthogonal slot models.
struct Expansion<'a> {
    geo: &'a Geometry,
    pos: &'a [Vec<Point>],
}

/// Sum of FDMA minorants; local resources are the first `K - 1` fractions.
struct FdmaModel<'a>(Expansion<'a>);

impl FdmaModel<'_> {
    fn fractions(res: &[f64]) -> Vec<f64> {
        let mut a = res.to_vec();
        a.push(1.0 - res.iter().sum::<f64>());
        a
    }
}

impl SlotModel for FdmaModel<'_> {
    fn resource_dim(&self) -> usize {
        self.0.geo.num_links() - 1
    }

    fn value(&self, slot: usize, res: &[f64], pos: &[Point]) -> f64 {
        let geo = self.0.geo;
        let mut total = 0.0;
        for (k, a) in Self::fractions(res).into_iter().enumerate() {
            let (l, ..) = inverse_square_tangent(&pos[k], &self.0.pos[slot][k], &geo.gts[k]);
            let w = 1.0 + geo.gamma * l / a;
            if a <= 0.0 || w <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += a * w.ln();
        }
        total
    }

    fn derivatives(&self, slot: usize, res: &[f64], pos: &[Point], grad: &mut [f64], hess: &mut DMatrix<f64>) {
        let geo = self.0.geo;
        let kk = geo.num_links();
        let r = kk - 1;
        let c = geo.gamma;
        for (k, a) in Self::fractions(res).into_iter().enumerate() {
            let (l, lq, lqq) = inverse_square_tangent(&pos[k], &self.0.pos[slot][k], &geo.gts[k]);
            let w = 1.0 + c * l / a;
            let g_a = w.ln() - c * l / (a * w);
            let g_l = c / w;
            let g_ll = -c * c / (a * w * w);
            let g_al = c * c * l / (a * a * w * w);
            let g_aa = -c * c * l * l / (a * a * a * w * w);
            // d alpha_k / d res_i: unit for k < K-1, all -1 for the last link.
            let da: Vec<(usize, f64)> = if k < r {
                vec![(k, 1.0)]
            } else {
                (0..r).map(|i| (i, -1.0)).collect()
            };
            let qo = r + 3 * k;
            for &(i, si) in &da {
                grad[i] += si * g_a;
                for &(j, sj) in &da {
                    hess[(i, j)] += si * sj * g_aa;
                }
                for d in 0..3 {
                    hess[(i, qo + d)] += si * g_al * lq[d];
                    hess[(qo + d, i)] += si * g_al * lq[d];
                }
            }
            for d in 0..3 {
                grad[qo + d] += g_l * lq[d];
                for e in 0..3 {
                    hess[(qo + d, qo + e)] += g_l * lqq[(d, e)] + g_ll * lq[d] * lq[e];
                }
            }
        }
    }

    fn slot_constraints(&self, _slot: usize, b: &mut SlotConstraints<'_>) {
        let r = self.resource_dim();
        for i in 0..r {
            b.affine(&[(i, -1.0)], &[], ALPHA_FLOOR);
        }
        if r > 0 {
            let all: Vec<(usize, f64)> = (0..r).map(|i| (i, 1.0)).collect();
            b.affine(&all, &[], ALPHA_FLOOR - 1.0);
        }
    }
}

/// Minorant of the aggregated TDMA slot rate in `(beta, q)`.
struct TdmaModel<'a> {
    exp: Expansion<'a>,
    beta: &'a [Vec<f64>],
}

impl TdmaModel<'_> {
    /// Per-link coefficients `(2 c br / dr, c br^2 / dr^2)`.
    fn coefficients(&self, slot: usize, k: usize) -> (f64, f64) {
        let geo = self.exp.geo;
        let dr = (self.exp.pos[slot][k] - geo.gts[k]).norm_squared();
        let br = self.beta[slot][k];
        (2.0 * geo.gamma * br / dr, geo.gamma * br * br / (dr * dr))
    }

    fn inner(&self, slot: usize, res: &[f64], pos: &[Point]) -> f64 {
        (0..res.len())
            .map(|k| {
                let (lin, curv) = self.coefficients(slot, k);
                lin * res[k] - curv * (pos[k] - self.exp.geo.gts[k]).norm_squared()
            })
            .sum()
    }
}

impl SlotModel for TdmaModel<'_> {
    fn resource_dim(&self) -> usize {
        self.exp.geo.num_links()
    }

    fn value(&self, slot: usize, res: &[f64], pos: &[Point]) -> f64 {
        let s = self.inner(slot, res, pos);
        if s <= -1.0 {
            f64::NEG_INFINITY
        } else {
            s.ln_1p()
        }
    }

    fn derivatives(&self, slot: usize, res: &[f64], pos: &[Point], grad: &mut [f64], hess: &mut DMatrix<f64>) {
        let kk = res.len();
        let w = 1.0 + self.inner(slot, res, pos);
        let mut ds = vec![0.0; 4 * kk];
        for k in 0..kk {
            let (lin, curv) = self.coefficients(slot, k);
            ds[k] = lin;
            let d = pos[k] - self.exp.geo.gts[k];
            for e in 0..3 {
                ds[kk + 3 * k + e] = -2.0 * curv * d[e];
                hess[(kk + 3 * k + e, kk + 3 * k + e)] -= 2.0 * curv / w;
            }
        }
        for i in 0..4 * kk {
            grad[i] += ds[i] / w;
            for j in 0..4 * kk {
                hess[(i, j)] -= ds[i] * ds[j] / (w * w);
            }
        }
    }

    fn slot_constraints(&self, _slot: usize, b: &mut SlotConstraints<'_>) {
        let kk = self.resource_dim();
        for k in 0..kk {
            b.affine(&[(k, -1.0)], &[], 0.0);
        }
        let vars: Vec<usize> = (0..kk).map(|k| b.res_var(k)).collect();
        let mut rows = vec![0.0; kk * kk];
        for k in 0..kk {
            rows[k * kk + k] = 1.0;
        }
        b.push(Constraint::Ball {
            vars,
            rows,
            offset: vec![0.0; kk],
            radius: 1.0,
        });
    }
}

/// True slot objective in nats: FDMA rate sum, or the aggregated TDMA rate
/// when `res` holds `beta`.
fn slot_objective(geo: &Geometry, scheme: OrthogonalScheme, res: &[f64], pos: &[Point]) -> f64 {
    match scheme {
        OrthogonalScheme::Fdma => res
            .iter()
            .zip(pos)
            .enumerate()
            .map(|(k, (&a, q))| {
                if a <= 0.0 {
                    0.0
                } else {
                    a * (geo.gamma / (a * geo.dist2(q, &geo.gts[k]))).ln_1p()
                }
            })
            .sum(),
        OrthogonalScheme::Tdma => res
            .iter()
            .zip(pos)
            .enumerate()
            .map(|(k, (b, q))| b * b * geo.gamma / geo.dist2(q, &geo.gts[k]))
            .sum::<f64>()
            .ln_1p(),
    }
}

fn objective(geo: &Geometry, scheme: OrthogonalScheme, st: &PathState) -> f64 {
    st.res
        .iter()
        .zip(&st.pos)
        .map(|(r, q)| slot_objective(geo, scheme, r, q))
        .sum()
}

/// One SCA step. `cur.res` holds full fraction vectors (FDMA) or `beta`
/// (TDMA).
fn ortho_step(
    geo: &Geometry,
    scheme: OrthogonalScheme,
    bnd: Boundary<'_>,
    cur: &PathState,
    ipm: &IpmConfig,
) -> Result<(PathState, usize)> {
    let m = cur.slots();
    let free = bnd.free_slots(m);
    let fs = cur.truncated(free);
    let exp = Expansion { geo, pos: &fs.pos };
    let spec = PathSpec {
        lead: bnd.lead,
        lead_steps: bnd.lead_steps,
        tail: bnd.anchored.then(|| cur.pos[m - 1].as_slice()),
        separation: Some(&fs.pos),
        sep_distance: bnd.sep_distance,
        free_slots: free,
        end_balls: bnd.end_balls,
    };
    let (mut next, newton) = match scheme {
        OrthogonalScheme::Fdma => {
            let model = FdmaModel(exp);
            let prog = PathProgram::new(geo, &model, &spec);
            let res: Vec<Vec<f64>> = fs.res.iter().map(|a| a[..a.len() - 1].to_vec()).collect();
            let sol = maximize(&prog, &prog.encode(&res, &fs.pos), ipm).map_err(subproblem_error)?;
            let mut out = prog.decode(&sol.x);
            out.res = out.res.iter().map(|r| FdmaModel::fractions(r)).collect();
            (out, sol.diagnostics.newton_iterations)
        }
        OrthogonalScheme::Tdma => {
            let model = TdmaModel { exp, beta: &fs.res };
            let prog = PathProgram::new(geo, &model, &spec);
            let sol = maximize(&prog, &prog.encode(&fs.res, &fs.pos), ipm).map_err(subproblem_error)?;
            (prog.decode(&sol.x), sol.diagnostics.newton_iterations)
        }
    };
    if bnd.anchored {
        next.res.push(cur.res[m - 1].clone());
        next.pos.push(cur.pos[m - 1].clone());
    }
    Ok((next, newton))
}

/// Strictly interior resource start for a free slot.
fn interior_resources(scheme: OrthogonalScheme, alpha: &[f64]) -> Vec<f64> {
    let k = alpha.len() as f64;
    match scheme {
        OrthogonalScheme::Fdma => alpha
            .iter()
            .map(|a| (1.0 - FDMA_START_MIX) * a + FDMA_START_MIX / k)
            .collect(),
        OrthogonalScheme::Tdma => vec![(TDMA_START_MASS / k).sqrt(); alpha.len()],
    }
}

fn to_resources(scheme: OrthogonalScheme, alpha: &[f64]) -> Vec<f64> {
    match scheme {
        OrthogonalScheme::Fdma => alpha.to_vec(),
        OrthogonalScheme::Tdma => alpha.iter().map(|a| a.max(0.0).sqrt()).collect(),
    }
}

/// Final fractions of one slot; TDMA rounds to the one-hot rule.
fn final_fractions(geo: &Geometry, scheme: OrthogonalScheme, res: &[f64], pos: &[Point]) -> Vec<f64> {
    match scheme {
        OrthogonalScheme::Fdma => res.to_vec(),
        OrthogonalScheme::Tdma => tdma_allocate(pos, &geo.gts),
    }
}

/// Orthogonal-rate solution in SI units over the slots of `st`.
fn to_solution(
    geo: &Geometry,
    scen: &Scenario,
    scheme: OrthogonalScheme,
    st: &PathState,
) -> Result<(TrajectorySolution, OrthogonalAllocation)> {
    let k = geo.num_links();
    let m = st.slots();
    let mut positions = vec![Vec::with_capacity(m); k];
    let mut alpha = vec![Vec::with_capacity(m); k];
    let mut rates = vec![Vec::with_capacity(m); k];
    for (res, pos) in st.res.iter().zip(&st.pos) {
        let a = final_fractions(geo, scheme, res, pos);
        for u in 0..k {
            let q = geo.to_si(&pos[u]);
            let r = match scheme {
                OrthogonalScheme::Fdma => fdma_rate(a[u].clamp(0.0, 1.0), &q, u, scen)?,
                OrthogonalScheme::Tdma => tdma_rate(a[u], &q, u, scen)?,
            };
            positions[u].push(q);
            alpha[u].push(a[u]);
            rates[u].push(r);
        }
    }
    let sol = TrajectorySolution {
        positions,
        powers: vec![vec![scen.p_max; m]; k],
        per_slot_rates: rates,
        slot_len: scen.horizon.slot_len,
    };
    Ok((sol, OrthogonalAllocation::new(scheme, alpha)))
}

/// Orthogonal SCA over the slots of `init`; the last slot of `init` and its
/// fractions in `init_alloc` form the fixed hover anchor.
pub fn solve_orthogonal(
    scen: &Scenario,
    scheme: OrthogonalScheme,
    init: &TrajectorySolution,
    init_alloc: &OrthogonalAllocation,
    cfg: &ScaConfig,
) -> Result<(TrajectorySolution, OrthogonalAllocation, ScaTrace)> {
    let geo = Geometry::new(scen);
    let m = init.num_slots();
    if m == 0 || m > geo.half() || init_alloc.num_slots() != m || init.num_uavs() != geo.num_links() {
        return Err(TpcError::Usage(
            "orthogonal initialization does not match the horizon".into(),
        ));
    }
    let mut st = PathState::from_solution(init, &geo);
    for n in 0..m {
        let a = init_alloc.slot(n);
        st.res[n] = if n + 1 < m {
            interior_resources(scheme, &a)
        } else {
            to_resources(scheme, &a)
        };
    }
    let (st, trace) = orthogonal_path(&geo, scheme, st, cfg)?;
    let (sol, alloc) = to_solution(&geo, scen, scheme, &st)?;
    Ok((sol, alloc, trace))
}

fn orthogonal_path(
    geo: &Geometry,
    scheme: OrthogonalScheme,
    init: PathState,
    cfg: &ScaConfig,
) -> Result<(PathState, ScaTrace)> {
    let bnd = Boundary::new(geo, &geo.starts, true);
    if init.slots() <= 1 {
        let obj = objective(geo, scheme, &init);
        let trace = ScaTrace {
            objectives: vec![obj],
            converged: true,
            ..ScaTrace::default()
        };
        return Ok((init, trace));
    }
    run_sca(
        init,
        cfg,
        |cur| ortho_step(geo, scheme, bnd, cur, &cfg.ipm),
        |st| objective(geo, scheme, st),
    )
}

/// Single-slot orthogonal deployment; returns the hover state (scaled, with
/// final fractions) and the deployment record.
fn orthogonal_deployment(
    geo: &Geometry,
    scen: &Scenario,
    scheme: OrthogonalScheme,
    cfg: &ScaConfig,
) -> Result<(PathState, DeploymentSolution)> {
    let (pos0, bnd) = round_trip_start(geo)?;
    let k = geo.num_links();
    let init = PathState {
        res: vec![interior_resources(scheme, &vec![1.0 / k as f64; k])],
        pos: vec![pos0],
    };
    let (mut st, trace) = run_sca(
        init,
        cfg,
        |cur| ortho_step(geo, scheme, bnd, cur, &cfg.ipm),
        |st| objective(geo, scheme, st),
    )?;
    st.res[0] = final_fractions(geo, scheme, &st.res[0], &st.pos[0]);
    let (sol, _) = to_solution(geo, scen, scheme, &st)?;
    let dep = DeploymentSolution {
        hover_positions: sol.positions.iter().map(|r| r[0]).collect(),
        hover_powers: vec![scen.p_max; k],
        hover_sum_rate: sol.slot_sum_rate(0),
        reach_time: None,
        trace,
    };
    Ok((st, dep))
}

/// Round-trip outcome of an orthogonal scheme.
#[derive(Debug, Clone)]
pub struct OrthogonalOutcome {
    pub run: RunOutcome,
    /// Fractions over the full horizon.
    pub allocation: OrthogonalAllocation,
}

/// Deployment, initialization, orthogonal SCA, truncation at the best slot
/// and mirror extension.
pub fn run_orthogonal_round_trip(
    scen: &Scenario,
    scheme: OrthogonalScheme,
    cfg: &PipelineConfig,
) -> Result<OrthogonalOutcome> {
    scen.validate()?;
    let geo = Geometry::new(scen);
    let (hover, dep) = orthogonal_deployment(&geo, scen, scheme, &cfg.sca)?;
    let m_lo = estimate_m(&dep, scen, cfg.slack)?;
    let (mut pos, _) = plan_paths(&geo, &geo.starts, &hover.pos[0], m_lo, geo.half())?;
    let m = pos.len();
    pos[m - 1] = hover.pos[0].clone();
    let k = geo.num_links();
    let mut res = vec![interior_resources(scheme, &vec![1.0 / k as f64; k]); m - 1];
    res.push(to_resources(scheme, &hover.res[0]));
    let clock = Instant::now();
    let (st, trace) = orthogonal_path(&geo, scheme, PathState { res, pos }, &cfg.sca)?;
    let solve_seconds = clock.elapsed().as_secs_f64();

    let (reduced, alloc) = to_solution(&geo, scen, scheme, &st)?;
    let rates: Vec<f64> = (0..m).map(|n| reduced.slot_sum_rate(n)).collect();
    let keep = best_prefix(&rates);
    if keep < m {
        info!("slot {keep} outperforms the hover slot {m}; re-anchoring");
    }
    let reduced = reduced.truncated(keep);
    let alloc = OrthogonalAllocation::new(scheme, alloc.alpha.iter().map(|r| r[..keep].to_vec()).collect());
    let full = mirror_extend(&reduced, scen)?;
    let allocation = mirror_allocation(&alloc, geo.slots);
    Ok(OrthogonalOutcome {
        run: RunOutcome {
            deployment: dep,
            reduced,
            full,
            planned_slots: m,
            trace,
            solve_seconds,
        },
        allocation,
    })
}

fn mirror_allocation(half: &OrthogonalAllocation, total: usize) -> OrthogonalAllocation {
    let m = half.num_slots();
    let index = |n: usize| {
        if n < m {
            n
        } else if n < total - m {
            m - 1
        } else {
            total - 1 - n
        }
    };
    let alpha = half
        .alpha
        .iter()
        .map(|r| (0..total).map(|n| r[index(n)]).collect())
        .collect();
    OrthogonalAllocation::new(half.scheme, alpha)
}
