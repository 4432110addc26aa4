//! Scaled problem data used by every solver.
//!
//! Lengths are divided by `h_min` and powers by `p_max`, so the power
//! variable of every UAV is an amplitude in `[0, 1]` and the reference SNR
//! becomes `gamma * p_max / h_min^2`. Rates are natural-log, unit-bandwidth
//! values ("nats"); multiply by [`Geometry::rate_unit`] for bit/s.

use crate::error::{Result, TpcError};
use crate::scenario::{Point, Scenario, TrajectorySolution};

/// Smallest squared distance (in meters squared) used inside evaluators.
const MIN_DIST2_SI: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub gts: Vec<Point>,
    pub starts: Vec<Point>,
    pub finals: Vec<Point>,
    /// Reference SNR at unit (scaled) distance and full power.
    pub gamma: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub d_min: f64,
    /// Per-slot level, ascending and descending step limits. Round trips
    /// use the smaller vertical limit in both directions so that the
    /// mirrored return leg stays feasible.
    pub dl: f64,
    pub da: f64,
    pub dd: f64,
    pub fixed_altitude: bool,
    /// Meters per scaled length unit.
    pub length_unit: f64,
    /// Watts per scaled power unit.
    pub power_unit: f64,
    /// bit/s per nat.
    pub rate_unit: f64,
    /// Total slot count N.
    pub slots: usize,
    pub slot_len: f64,
    /// Interior margin kept from the altitude bounds by initial points.
    pub eps_h: f64,
    pub(crate) min_dist2: f64,
}

impl Geometry {
    pub fn new(scen: &Scenario) -> Self {
        let lim = &scen.limits;
        let u = lim.h_min;
        let ts = scen.horizon.slot_len;
        let scale = |q: &Point| q / u;
        let (dl, mut da, mut dd) = (lim.v_level * ts / u, lim.v_ascend * ts / u, lim.v_descend * ts / u);
        if scen.uav_final.is_none() {
            // The return leg retraces the outbound path, turning every climb
            // into a descent and vice versa.
            da = da.min(dd);
            dd = da;
        }
        let h_max = lim.h_max / u;
        let band = h_max - 1.0;
        let fixed_altitude = lim.fixed_altitude();
        let mut eps_h = (1e-4f64).min(1e-3 * da.min(dd));
        if !fixed_altitude {
            eps_h = eps_h.min(band / 4.0);
        }
        Self {
            gts: scen.gt_positions.iter().map(scale).collect(),
            starts: scen.uav_initial.iter().map(scale).collect(),
            finals: scen.final_positions().iter().map(scale).collect(),
            gamma: scen.channel.gamma() * scen.p_max / (u * u),
            h_min: 1.0,
            h_max,
            d_min: lim.d_min / u,
            dl,
            da,
            dd,
            fixed_altitude,
            length_unit: u,
            power_unit: scen.p_max,
            rate_unit: scen.channel.bandwidth / std::f64::consts::LN_2,
            slots: scen.horizon.slots,
            slot_len: ts,
            eps_h,
            min_dist2: MIN_DIST2_SI / (u * u),
        }
    }

    pub fn num_links(&self) -> usize {
        self.gts.len()
    }

    pub fn half(&self) -> usize {
        self.slots / 2
    }

    pub fn to_si(&self, q: &Point) -> Point {
        q * self.length_unit
    }

    pub fn from_si(&self, q: &Point) -> Point {
        q / self.length_unit
    }

    /// Squared distance, clamped away from zero.
    pub fn dist2(&self, q: &Point, s: &Point) -> f64 {
        (q - s).norm_squared().max(self.min_dist2)
    }

    /// Per-link rates (nats) of one slot with amplitudes `amps`.
    pub fn link_rates(&self, amps: &[f64], pos: &[Point]) -> Vec<f64> {
        let k = self.num_links();
        (0..k)
            .map(|i| {
                let mut interference = 0.0;
                let mut signal = 0.0;
                for j in 0..k {
                    let rx = self.gamma * amps[j] * amps[j] / self.dist2(&pos[j], &self.gts[i]);
                    if j == i {
                        signal = rx;
                    } else {
                        interference += rx;
                    }
                }
                (signal / (1.0 + interference)).ln_1p()
            })
            .collect()
    }

    pub fn sum_rate(&self, amps: &[f64], pos: &[Point]) -> f64 {
        self.link_rates(amps, pos).iter().sum()
    }

    /// Channel amplitude from UAV `j` at `q` to ground terminal `k`.
    pub fn gain(&self, q: &Point, k: usize) -> f64 {
        (self.gamma / self.dist2(q, &self.gts[k])).sqrt()
    }

    /// Whether `q` respects the altitude bounds with margin `margin`.
    pub fn altitude_ok(&self, q: &Point, margin: f64) -> bool {
        if self.fixed_altitude {
            (q[2] - self.h_min).abs() <= 1e-12
        } else {
            q[2] >= self.h_min + margin && q[2] <= self.h_max - margin
        }
    }

    /// Whether the step `from -> to` fits within `scale` times the speed limits.
    pub fn step_ok(&self, from: &Point, to: &Point, scale: f64) -> bool {
        let horiz = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)).sqrt();
        let dz = to[2] - from[2];
        horiz <= scale * self.dl && dz <= scale * self.da && -dz <= scale * self.dd
    }
}

/// Scaled trajectory over consecutive slots, slot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    /// Resource variables per slot (amplitudes, fractions, ...).
    pub res: Vec<Vec<f64>>,
    /// UAV positions per slot.
    pub pos: Vec<Vec<Point>>,
}

impl PathState {
    pub fn slots(&self) -> usize {
        self.pos.len()
    }

    pub fn truncated(&self, m: usize) -> Self {
        Self {
            res: self.res[..m].to_vec(),
            pos: self.pos[..m].to_vec(),
        }
    }

    /// Sum over slots of the interference-channel sum rate, treating `res` as
    /// amplitudes.
    pub fn sum_rate(&self, geo: &Geometry) -> f64 {
        self.res.iter().zip(&self.pos).map(|(a, q)| geo.sum_rate(a, q)).sum()
    }

    /// Converts amplitudes and positions back to SI and evaluates exact rates.
    pub fn to_solution(&self, geo: &Geometry, scen: &Scenario) -> Result<TrajectorySolution> {
        let k = geo.num_links();
        let mut positions = vec![Vec::with_capacity(self.slots()); k];
        let mut powers = vec![Vec::with_capacity(self.slots()); k];
        for (a, q) in self.res.iter().zip(&self.pos) {
            if a.len() != k || q.len() != k {
                return Err(TpcError::Internal("path state does not hold one entry per UAV".into()));
            }
            for u in 0..k {
                positions[u].push(geo.to_si(&q[u]));
                powers[u].push((a[u] * a[u]).min(1.0) * geo.power_unit);
            }
        }
        TrajectorySolution::evaluate(positions, powers, scen)
    }

    /// Inverse of [`PathState::to_solution`].
    pub fn from_solution(sol: &TrajectorySolution, geo: &Geometry) -> Self {
        let slots = sol.num_slots();
        let k = sol.num_uavs();
        let mut res = vec![vec![0.0; k]; slots];
        let mut pos = vec![vec![Point::zeros(); k]; slots];
        for u in 0..k {
            for n in 0..slots {
                res[n][u] = (sol.powers[u][n] / geo.power_unit).max(0.0).sqrt();
                pos[n][u] = geo.from_si(&sol.positions[u][n]);
            }
        }
        Self { res, pos }
    }
}
