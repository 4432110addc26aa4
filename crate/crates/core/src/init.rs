//! Strictly feasible starting points: a layered straight-line planner for
//! positions and a weighted MMSE iteration for powers.

use log::debug;

use crate::error::{Result, TpcError};
use crate::normalized::Geometry;
use crate::scenario::{Point, Scenario};

/// Fraction of the speed limits used by planned paths.
const SPEED_MARGIN: f64 = 0.999;
/// Layer spacing in units of `d_min`.
const LAYER_SPACING: f64 = 1.01;
/// Lateral detour offsets are multiples of this many `d_min`.
const DETOUR_STEP: f64 = 1.5;
const DETOUR_FRACTIONS: [f64; 3] = [0.5, 0.25, 0.75];
const DETOUR_MULTIPLES: [f64; 8] = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
/// Relative power floor applied before handing powers to the barrier solver.
pub const POWER_NUDGE: f64 = 1e-6;

/// How each UAV reaches its hover point.
#[derive(Debug, Clone, PartialEq)]
pub struct InitPlan {
    /// Cruise altitude per UAV (m).
    pub cruise_altitudes: Vec<f64>,
    /// Slots each UAV waits before moving horizontally.
    pub departure_delays: Vec<usize>,
    /// Optional horizontal detour waypoint per UAV (m).
    pub waypoints: Vec<Option<Point>>,
    /// Slot of horizontal arrival per UAV.
    pub arrivals: Vec<usize>,
    /// Planned horizon M.
    pub slots: usize,
}

#[derive(Debug, Clone)]
struct Leg {
    start: Point,
    waypoint: Option<Point>,
    hover: Point,
    layer: f64,
    delay: usize,
}

fn horizontal(p: &Point) -> Point {
    Point::new(p[0], p[1], 0.0)
}

impl Leg {
    fn length(&self) -> f64 {
        let (s, h) = (horizontal(&self.start), horizontal(&self.hover));
        match self.waypoint {
            Some(w) => (horizontal(&w) - s).norm() + (h - horizontal(&w)).norm(),
            None => (h - s).norm(),
        }
    }

    fn arrival(&self, speed: f64) -> usize {
        let len = self.length();
        if len == 0.0 {
            self.delay
        } else {
            self.delay + (len / speed - 1e-12).ceil().max(1.0) as usize
        }
    }

    /// Horizontal point after travelling `s` along the polyline.
    fn along(&self, s: f64) -> Point {
        let a = horizontal(&self.start);
        let b = horizontal(&self.hover);
        let (mid, first) = match self.waypoint {
            Some(w) => (horizontal(&w), (horizontal(&w) - a).norm()),
            None => (b, (b - a).norm()),
        };
        if s <= first {
            if first == 0.0 {
                return mid;
            }
            return a + (mid - a) * (s / first);
        }
        let second = (b - mid).norm();
        let r = s - first;
        if r >= second || second == 0.0 {
            b
        } else {
            mid + (b - mid) * (r / second)
        }
    }
}

struct Planner<'a> {
    geo: &'a Geometry,
    speed: f64,
    ra: f64,
    rd: f64,
}

impl<'a> Planner<'a> {
    fn new(geo: &'a Geometry) -> Self {
        Self {
            geo,
            speed: SPEED_MARGIN * geo.dl,
            ra: SPEED_MARGIN * geo.da - 2.0 * geo.eps_h,
            rd: SPEED_MARGIN * geo.dd - 2.0 * geo.eps_h,
        }
    }

    /// Positions at slots `1..=m`; slot `m` is the hover point itself.
    /// `None` when the leg does not fit into `m` slots.
    fn path(&self, leg: &Leg, m: usize) -> Option<Vec<Point>> {
        let geo = self.geo;
        if leg.arrival(self.speed) > m {
            return None;
        }
        let mut out = Vec::with_capacity(m);
        let (zs, zh) = (leg.start[2], leg.hover[2]);
        let (floor, ceil) = (geo.h_min + geo.eps_h, geo.h_max - geo.eps_h);
        for i in 1..m {
            let travelled = (i.saturating_sub(leg.delay)) as f64 * self.speed;
            let h = leg.along(travelled);
            let z = if geo.fixed_altitude {
                geo.h_min
            } else {
                let (fi, rest) = (i as f64, (m - i) as f64);
                let lo = (zs - fi * self.rd).max(zh - rest * self.ra).max(floor);
                let hi = (zs + fi * self.ra).min(zh + rest * self.rd).min(ceil);
                if lo > hi {
                    return None;
                }
                leg.layer.clamp(lo, hi)
            };
            out.push(Point::new(h[0], h[1], z));
        }
        out.push(leg.hover);
        self.strictly_feasible(&leg.start, &out).then_some(out)
    }

    fn strictly_feasible(&self, start: &Point, path: &[Point]) -> bool {
        let geo = self.geo;
        let m = path.len();
        let mut prev = start;
        for (i, q) in path.iter().enumerate() {
            if i + 1 < m && !geo.fixed_altitude && (q[2] <= geo.h_min || q[2] >= geo.h_max) {
                return false;
            }
            if !geo.step_ok(prev, q, 1.0 - 1e-9) {
                return false;
            }
            prev = q;
        }
        true
    }
}

/// Builds collision-free paths from `lead` to `hover` (scaled units), trying
/// horizons `m_lo..=m_hi`. Returns slot-major positions over slots `1..=M`.
pub(crate) fn plan_paths(
    geo: &Geometry,
    lead: &[Point],
    hover: &[Point],
    m_lo: usize,
    m_hi: usize,
) -> Result<(Vec<Vec<Point>>, InitPlan)> {
    let k = lead.len();
    let planner = Planner::new(geo);
    let layers = cruise_layers(geo, hover)?;
    let m_lo = m_lo.max(1);
    for m in m_lo..=m_hi {
        if let Some((paths, plan)) = plan_with_horizon(&planner, lead, hover, &layers, m) {
            debug!("initial trajectory planned with M = {m}");
            let slot_major = (0..m).map(|n| (0..k).map(|u| paths[u][n]).collect()).collect();
            return Ok((slot_major, plan));
        }
    }
    Err(TpcError::InitFailure(format!(
        "no collision-free initial trajectory fits within {m_hi} slots"
    )))
}

/// Cruise layer per UAV, ordered by hover altitude with ties broken by index.
fn cruise_layers(geo: &Geometry, hover: &[Point]) -> Result<Vec<f64>> {
    let k = hover.len();
    if geo.fixed_altitude {
        return Ok(vec![geo.h_min; k]);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| hover[a][2].total_cmp(&hover[b][2]).then(a.cmp(&b)));
    let mut layers = vec![0.0; k];
    for (rank, &u) in order.iter().enumerate() {
        layers[u] = geo.h_min + geo.eps_h + rank as f64 * LAYER_SPACING * geo.d_min;
    }
    let top = geo.h_min + geo.eps_h + (k - 1) as f64 * LAYER_SPACING * geo.d_min;
    if top > geo.h_max - geo.eps_h {
        return Err(TpcError::InitFailure(format!(
            "{k} cruise layers need {:.3} m of altitude band but only {:.3} m is available; raise the maximum altitude",
            (top - geo.h_min) * geo.length_unit,
            (geo.h_max - geo.h_min) * geo.length_unit
        )));
    }
    Ok(layers)
}

fn pair_threshold(geo: &Geometry, start_dist: f64, end_dist: f64) -> f64 {
    let d = geo.d_min;
    d + 0.5 * (0.01 * d).min(start_dist - d).min(end_dist - d).max(0.0)
}

fn candidate_legs(geo: &Geometry, start: Point, hover: Point, layer: f64) -> Vec<Leg> {
    let dir = horizontal(&hover) - horizontal(&start);
    let perp = if dir.norm() > 0.0 {
        Point::new(-dir[1], dir[0], 0.0) / dir.norm()
    } else {
        Point::new(0.0, 1.0, 0.0)
    };
    let mut waypoints = vec![None];
    for f in DETOUR_FRACTIONS {
        for mult in DETOUR_MULTIPLES {
            waypoints.push(Some(start + dir * f + perp * (mult * DETOUR_STEP * geo.d_min)));
        }
    }
    waypoints
        .into_iter()
        .map(|waypoint| Leg {
            start,
            waypoint,
            hover,
            layer,
            delay: 0,
        })
        .collect()
}

fn plan_with_horizon(
    planner: &Planner<'_>,
    lead: &[Point],
    hover: &[Point],
    layers: &[f64],
    m: usize,
) -> Option<(Vec<Vec<Point>>, InitPlan)> {
    let geo = planner.geo;
    let k = lead.len();
    if m == 1 {
        let ok = (0..k).all(|u| geo.step_ok(&lead[u], &hover[u], 1.0));
        return ok.then(|| {
            let plan = InitPlan {
                cruise_altitudes: hover.iter().map(|h| h[2] * geo.length_unit).collect(),
                departure_delays: vec![0; k],
                waypoints: vec![None; k],
                arrivals: vec![1; k],
                slots: 1,
            };
            (hover.iter().map(|h| vec![*h]).collect(), plan)
        });
    }
    // Greedy placement first lets every UAV leave at once. When that fails,
    // retry with everyone holding position until all have reached their
    // cruise layers, so crossing paths are already vertically separated.
    let hold = (0..k)
        .map(|u| {
            let dz = layers[u] - lead[u][2];
            let rate = if dz >= 0.0 { planner.ra } else { planner.rd };
            (dz.abs() / rate).ceil() as usize
        })
        .max()
        .unwrap_or(0);
    let holds = if hold > 0 { vec![0, hold] } else { vec![0] };
    holds.into_iter().find_map(|min_delay| {
        placement_orders(k).find_map(|order| place_in_order(planner, lead, hover, layers, m, min_delay, &order))
    })
}

/// Greedy placement orders: by index, reversed, then the other rotations.
fn placement_orders(k: usize) -> impl Iterator<Item = Vec<usize>> {
    let forward = (0..k).collect::<Vec<_>>();
    let reversed = (0..k).rev().collect::<Vec<_>>();
    let rotations = (1..k.saturating_sub(1)).map(move |r| (0..k).map(|i| (i + r) % k).collect());
    std::iter::once(forward)
        .chain((k > 1).then_some(reversed))
        .chain(rotations)
}

/// Places UAVs one at a time in `order`; each takes the earliest-arriving
/// candidate leg, departing no earlier than `min_delay`, that keeps clear
/// of the UAVs already placed.
fn place_in_order(
    planner: &Planner<'_>,
    lead: &[Point],
    hover: &[Point],
    layers: &[f64],
    m: usize,
    min_delay: usize,
    order: &[usize],
) -> Option<(Vec<Vec<Point>>, InitPlan)> {
    let geo = planner.geo;
    let k = lead.len();
    let mut placed: Vec<Option<(Leg, Vec<Point>)>> = vec![None; k];
    for &u in order {
        let mut cands: Vec<Leg> = Vec::new();
        for leg in candidate_legs(geo, lead[u], hover[u], layers[u]) {
            let base = leg.arrival(planner.speed);
            for delay in min_delay..=m.saturating_sub(base) {
                cands.push(Leg { delay, ..leg.clone() });
            }
        }
        cands.sort_by_key(|l| l.arrival(planner.speed));
        let chosen = cands.into_iter().find_map(|leg| {
            let path = planner.path(&leg, m)?;
            let clear = placed.iter().enumerate().all(|(v, other)| {
                let Some((_, other)) = other else { return true };
                let thr = pair_threshold(geo, (lead[u] - lead[v]).norm(), (hover[u] - hover[v]).norm());
                (0..m - 1).all(|n| (path[n] - other[n]).norm() > thr)
            });
            clear.then_some((leg, path))
        });
        placed[u] = Some(chosen?);
    }
    let placed: Vec<(Leg, Vec<Point>)> = placed.into_iter().map(Option::unwrap).collect();
    let plan = InitPlan {
        cruise_altitudes: layers.iter().map(|z| z * geo.length_unit).collect(),
        departure_delays: placed.iter().map(|(l, _)| l.delay).collect(),
        waypoints: placed.iter().map(|(l, _)| l.waypoint.map(|w| geo.to_si(&w))).collect(),
        arrivals: placed.iter().map(|(l, _)| l.arrival(planner.speed)).collect(),
        slots: m,
    };
    Some((placed.into_iter().map(|(_, p)| p).collect(), plan))
}

/// Collision-free initial positions (m) from the scenario's start points to
/// `hover` (m), over the smallest horizon in `m_lo..=N/2` that admits one.
/// Returns per-UAV position sequences over slots `1..=M`; slot `M` equals
/// the hover point exactly.
pub fn build_initial_trajectory(scen: &Scenario, hover: &[Point], m_lo: usize) -> Result<(Vec<Vec<Point>>, InitPlan)> {
    let geo = Geometry::new(scen);
    if hover.len() != scen.num_links() {
        return Err(TpcError::Usage("one hover point per UAV is required".into()));
    }
    let hv: Vec<Point> = hover.iter().map(|h| geo.from_si(h)).collect();
    let (slots, plan) = plan_paths(&geo, &geo.starts, &hv, m_lo, geo.half())?;
    let k = scen.num_links();
    let mut per_uav = vec![Vec::with_capacity(slots.len()); k];
    for (n, row) in slots.iter().enumerate() {
        for u in 0..k {
            // Keep the anchor bit-exact.
            let q = if n + 1 == slots.len() {
                hover[u]
            } else {
                geo.to_si(&row[u])
            };
            per_uav[u].push(q);
        }
    }
    Ok((per_uav, plan))
}

/// WMMSE amplitudes for one slot in scaled units, with the sum rate after
/// every iteration.
pub(crate) fn wmmse_amplitudes(geo: &Geometry, pos: &[Point]) -> (Vec<f64>, Vec<f64>) {
    let k = pos.len();
    // gain[j][i]: amplitude gain from UAV j to GT i.
    let gain: Vec<Vec<f64>> = (0..k).map(|j| (0..k).map(|i| geo.gain(&pos[j], i)).collect()).collect();
    let mut v = vec![1.0; k];
    let mut history = vec![geo.sum_rate(&v, pos)];
    for _ in 0..200 {
        let u: Vec<f64> = (0..k)
            .map(|i| {
                let rx: f64 = (0..k).map(|j| (gain[j][i] * v[j]).powi(2)).sum();
                gain[i][i] * v[i] / (1.0 + rx)
            })
            .collect();
        let w: Vec<f64> = (0..k).map(|i| 1.0 / (1.0 - u[i] * gain[i][i] * v[i])).collect();
        for j in 0..k {
            let den: f64 = (0..k).map(|i| w[i] * (u[i] * gain[j][i]).powi(2)).sum();
            v[j] = (w[j] * u[j] * gain[j][j] / den).clamp(0.0, 1.0);
        }
        let obj = geo.sum_rate(&v, pos);
        let prev = *history.last().unwrap();
        history.push(obj);
        if (obj - prev).abs() < 1e-6 * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (v, history)
}

/// Pulls amplitudes into the strict interior of the power box.
pub(crate) fn nudge_amplitudes(a: &mut [f64]) {
    let (lo, hi) = (POWER_NUDGE.sqrt(), (1.0 - POWER_NUDGE).sqrt());
    a.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
}

/// Weighted MMSE power control at fixed positions `positions[k][n]` (m).
/// Returns powers `[k][n]` in W.
pub fn wmmse_power_control(positions: &[Vec<Point>], scen: &Scenario) -> Result<Vec<Vec<f64>>> {
    let geo = Geometry::new(scen);
    let k = scen.num_links();
    if positions.len() != k {
        return Err(TpcError::Usage("one position sequence per UAV is required".into()));
    }
    let slots = positions[0].len();
    if positions.iter().any(|p| p.len() != slots) {
        return Err(TpcError::Usage("position sequences differ in length".into()));
    }
    let mut powers = vec![vec![0.0; slots]; k];
    for n in 0..slots {
        let pos: Vec<Point> = (0..k).map(|u| geo.from_si(&positions[u][n])).collect();
        let (a, _) = wmmse_amplitudes(&geo, &pos);
        for u in 0..k {
            powers[u][n] = (a[u] * a[u]).min(1.0) * geo.power_unit;
        }
    }
    Ok(powers)
}
