//! Problem data and exact (non-surrogate) evaluation of rates and constraints.
//!
//! Everything in this module works in SI units: meters, seconds, watts and
//! bit/s. The solvers convert to a normalized frame internally (see
//! [`crate::normalized`]).

use nalgebra::Vector3;

use crate::error::{Result, TpcError};

/// A position in 3D space (meters).
pub type Point = Vector3<f64>;

/// Converts a dB value to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a dBm value to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Free-space line-of-sight channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Power gain at the 1 m reference distance (linear).
    pub beta0: f64,
    /// Bandwidth in Hz.
    pub bandwidth: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    gamma: f64,
}

impl ChannelParams {
    pub fn new(beta0: f64, bandwidth: f64, noise_psd: f64) -> Result<Self> {
        if !(beta0 > 0.0 && bandwidth > 0.0 && noise_psd > 0.0) {
            return Err(TpcError::Usage(format!(
                "channel parameters must be positive (beta0={beta0}, B={bandwidth}, N0={noise_psd})"
            )));
        }
        Ok(Self {
            beta0,
            bandwidth,
            noise_psd,
            gamma: beta0 / (bandwidth * noise_psd),
        })
    }

    /// Builds the parameters from logarithmic units: beta0 in dB, bandwidth in
    /// Hz and noise PSD in dBm/Hz.
    pub fn from_db(beta0_db: f64, bandwidth: f64, noise_dbm_per_hz: f64) -> Result<Self> {
        Self::new(db_to_linear(beta0_db), bandwidth, dbm_to_watts(noise_dbm_per_hz))
    }

    /// Reference SNR per watt at 1 m, `beta0 / (B N0)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Default for ChannelParams {
    /// beta0 = -50 dB, B = 10 MHz, N0 = -160 dBm/Hz.
    fn default() -> Self {
        Self::from_db(-50.0, 10e6, -160.0).expect("default channel is valid")
    }
}

/// Speed, altitude and separation limits shared by every UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicLimits {
    /// Maximum level-flight speed (m/s).
    pub v_level: f64,
    /// Maximum ascending speed (m/s).
    pub v_ascend: f64,
    /// Maximum descending speed (m/s).
    pub v_descend: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Minimum pairwise separation (m).
    pub d_min: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_level: 20.0,
            v_ascend: 5.0,
            v_descend: 3.0,
            h_min: 100.0,
            h_max: 500.0,
            d_min: 20.0,
        }
    }
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.v_level,
            self.v_ascend,
            self.v_descend,
            self.h_min,
            self.h_max,
            self.d_min,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(TpcError::Usage(format!(
                "kinematic limits must be finite and positive: {self:?}"
            )));
        }
        if self.h_max < self.h_min {
            return Err(TpcError::Usage(format!(
                "h_max ({}) below h_min ({})",
                self.h_max, self.h_min
            )));
        }
        Ok(())
    }

    /// True when the altitude band collapses to a single level.
    pub fn fixed_altitude(&self) -> bool {
        self.h_max - self.h_min <= 1e-9 * self.h_min
    }
}

/// Largest slot length that keeps two UAVs flying head-on at full speed from
/// crossing the separation distance between consecutive slots.
pub fn max_sampling_interval(limits: &KinematicLimits) -> Result<f64> {
    if !(limits.d_min > 0.0 && limits.v_level >= 0.0 && limits.v_ascend >= 0.0 && limits.v_descend >= 0.0) {
        return Err(TpcError::Usage(format!("invalid limits {limits:?}")));
    }
    let closing = (4.0 * limits.v_level.powi(2) + (limits.v_descend + limits.v_ascend).powi(2)).sqrt();
    if closing <= 0.0 {
        return Err(TpcError::Usage("all speed limits are zero".into()));
    }
    Ok(limits.d_min / closing)
}

/// Time discretization of the flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    /// Total flight time T (s).
    pub total_time: f64,
    /// Slot length Ts (s).
    pub slot_len: f64,
    /// Number of slots N (even).
    pub slots: usize,
    /// Reduced horizon M once it has been determined.
    pub reduced: Option<usize>,
}

impl Horizon {
    /// Builds a horizon from an explicit slot length. `total_time / slot_len`
    /// must be an even integer.
    pub fn new(total_time: f64, slot_len: f64) -> Result<Self> {
        if !(total_time > 0.0 && slot_len > 0.0) {
            return Err(TpcError::Usage("horizon times must be positive".into()));
        }
        let ratio = total_time / slot_len;
        let slots = ratio.round();
        if (slots - ratio).abs() > 1e-9 * ratio.max(1.0) || slots < 2.0 {
            return Err(TpcError::Usage(format!("T/Ts = {ratio} is not an integer slot count")));
        }
        let slots = slots as usize;
        if !slots.is_multiple_of(2) {
            return Err(TpcError::Usage(format!("slot count {slots} must be even")));
        }
        Ok(Self {
            total_time,
            slot_len,
            slots,
            reduced: None,
        })
    }

    /// Chooses the smallest even slot count whose slot length respects the
    /// sampling bound of `limits`.
    pub fn fit(total_time: f64, limits: &KinematicLimits) -> Result<Self> {
        let ts_max = max_sampling_interval(limits)?;
        let mut slots = (total_time / ts_max).ceil() as usize;
        slots = slots.max(2);
        if !slots.is_multiple_of(2) {
            slots += 1;
        }
        Ok(Self {
            total_time,
            slot_len: total_time / slots as f64,
            slots,
            reduced: None,
        })
    }

    pub fn half(&self) -> usize {
        self.slots / 2
    }

    fn validate(&self, limits: &KinematicLimits) -> Result<()> {
        if (self.slots as f64 * self.slot_len - self.total_time).abs() > 1e-9 * self.total_time {
            return Err(TpcError::Usage("N * Ts does not match T".into()));
        }
        if !self.slots.is_multiple_of(2) || self.slots == 0 {
            return Err(TpcError::Usage(format!("slot count {} must be even", self.slots)));
        }
        let ts_max = max_sampling_interval(limits)?;
        if self.slot_len > ts_max * (1.0 + 1e-12) {
            return Err(TpcError::Usage(format!(
                "slot length {} s exceeds the sampling bound {} s",
                self.slot_len, ts_max
            )));
        }
        if let Some(m) = self.reduced {
            if m == 0 || m > self.half() {
                return Err(TpcError::Usage(format!(
                    "reduced horizon {m} outside 1..={}",
                    self.half()
                )));
            }
        }
        Ok(())
    }
}

/// An immutable problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub gt_positions: Vec<Point>,
    pub uav_initial: Vec<Point>,
    /// Final positions for one-way missions; `None` means a round trip.
    pub uav_final: Option<Vec<Point>>,
    /// Peak transmit power (W).
    pub p_max: f64,
    pub channel: ChannelParams,
    pub limits: KinematicLimits,
    pub horizon: Horizon,
}

impl Scenario {
    pub fn new(
        gt_positions: Vec<Point>,
        uav_initial: Vec<Point>,
        p_max: f64,
        channel: ChannelParams,
        limits: KinematicLimits,
        horizon: Horizon,
    ) -> Result<Self> {
        let scen = Self {
            gt_positions,
            uav_initial,
            uav_final: None,
            p_max,
            channel,
            limits,
            horizon,
        };
        scen.validate()?;
        Ok(scen)
    }

    /// Returns a copy with distinct final positions (one-way mission).
    pub fn with_final_positions(mut self, finals: Vec<Point>) -> Result<Self> {
        self.uav_final = Some(finals);
        self.validate()?;
        Ok(self)
    }

    pub fn with_reduced_horizon(mut self, m: usize) -> Result<Self> {
        self.horizon.reduced = Some(m);
        self.horizon.validate(&self.limits)?;
        Ok(self)
    }

    pub fn num_links(&self) -> usize {
        self.gt_positions.len()
    }

    /// Final positions: the explicit one-way destinations or the start points.
    pub fn final_positions(&self) -> &[Point] {
        self.uav_final.as_deref().unwrap_or(&self.uav_initial)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.gt_positions.len();
        if k == 0 {
            return Err(TpcError::Usage("scenario needs at least one link".into()));
        }
        if self.uav_initial.len() != k {
            return Err(TpcError::Usage(format!(
                "{} ground terminals but {} UAVs",
                k,
                self.uav_initial.len()
            )));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(TpcError::Usage(format!("p_max must be positive, got {}", self.p_max)));
        }
        self.limits.validate()?;
        self.horizon.validate(&self.limits)?;
        let lim = &self.limits;
        let check_points = |pts: &[Point], what: &str| -> Result<()> {
            for (i, q) in pts.iter().enumerate() {
                if q[2] < lim.h_min * (1.0 - 1e-12) || q[2] > lim.h_max * (1.0 + 1e-12) {
                    return Err(TpcError::Infeasible(format!(
                        "{what} position {i} altitude {} outside [{}, {}]",
                        q[2], lim.h_min, lim.h_max
                    )));
                }
            }
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let d = (pts[i] - pts[j]).norm();
                    if d < lim.d_min * (1.0 - 1e-9) {
                        return Err(TpcError::Infeasible(format!(
                            "{what} positions {i} and {j} are {d} m apart (d_min = {})",
                            lim.d_min
                        )));
                    }
                }
            }
            Ok(())
        };
        check_points(&self.uav_initial, "initial")?;
        if let Some(finals) = &self.uav_final {
            if finals.len() != k {
                return Err(TpcError::Usage("final position count does not match K".into()));
            }
            check_points(finals, "final")?;
        }
        for (i, s) in self.gt_positions.iter().enumerate() {
            if s[2] >= lim.h_min {
                return Err(TpcError::Usage(format!(
                    "ground terminal {i} altitude {} must lie below h_min",
                    s[2]
                )));
            }
        }
        Ok(())
    }
}

/// Achievable rate (bit/s) of link `k` given every UAV's power and position in
/// one slot.
pub fn compute_rate(
    powers: &[f64],
    positions: &[Point],
    gts: &[Point],
    k: usize,
    channel: &ChannelParams,
) -> Result<f64> {
    if powers.len() != positions.len() || k >= gts.len() || k >= powers.len() {
        return Err(TpcError::Usage("rate evaluation dimension mismatch".into()));
    }
    let gamma = channel.gamma();
    let mut interference = 0.0;
    let mut signal = 0.0;
    for (j, (p, q)) in powers.iter().zip(positions).enumerate() {
        let d2 = (q - gts[k]).norm_squared();
        if d2 == 0.0 {
            return Err(TpcError::Domain(format!("UAV {j} coincides with ground terminal {k}")));
        }
        let rx = gamma * p / d2;
        if j == k {
            signal = rx;
        } else {
            interference += rx;
        }
    }
    Ok(channel.bandwidth * (1.0 + signal / (1.0 + interference)).log2())
}

/// Per-UAV positions and powers over consecutive slots, with the rates they
/// achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySolution {
    /// `positions[k][n]` in meters.
    pub positions: Vec<Vec<Point>>,
    /// `powers[k][n]` in watts.
    pub powers: Vec<Vec<f64>>,
    /// `per_slot_rates[k][n]` in bit/s.
    pub per_slot_rates: Vec<Vec<f64>>,
    /// Slot length used to convert summed rates into bits.
    pub slot_len: f64,
}

impl TrajectorySolution {
    /// Evaluates the exact rates of the given trajectory and power schedule.
    pub fn evaluate(positions: Vec<Vec<Point>>, powers: Vec<Vec<f64>>, scen: &Scenario) -> Result<Self> {
        let k = scen.num_links();
        if positions.len() != k || powers.len() != k {
            return Err(TpcError::Usage("solution does not have one row per UAV".into()));
        }
        let slots = positions[0].len();
        if positions.iter().any(|r| r.len() != slots) || powers.iter().any(|r| r.len() != slots) {
            return Err(TpcError::Usage("ragged solution arrays".into()));
        }
        let mut rates = vec![vec![0.0; slots]; k];
        let mut p_slot = vec![0.0; k];
        let mut q_slot = vec![Point::zeros(); k];
        for n in 0..slots {
            for j in 0..k {
                p_slot[j] = powers[j][n];
                q_slot[j] = positions[j][n];
            }
            for (i, row) in rates.iter_mut().enumerate() {
                row[n] = compute_rate(&p_slot, &q_slot, &scen.gt_positions, i, &scen.channel)?;
            }
        }
        Ok(Self {
            positions,
            powers,
            per_slot_rates: rates,
            slot_len: scen.horizon.slot_len,
        })
    }

    pub fn num_uavs(&self) -> usize {
        self.positions.len()
    }

    pub fn num_slots(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Sum rate over all links at slot `n` (0-based), bit/s.
    pub fn slot_sum_rate(&self, n: usize) -> f64 {
        self.per_slot_rates.iter().map(|r| r[n]).sum()
    }

    /// Plain sum of per-slot sum rates (bit/s summed over slots).
    pub fn sum_rate(&self) -> f64 {
        self.per_slot_rates.iter().flatten().sum()
    }

    /// Total delivered bits, i.e. the summed rates weighted by the slot length.
    pub fn total_bits(&self) -> f64 {
        self.sum_rate() * self.slot_len
    }

    /// Square-root powers `a_k[n] = sqrt(p_k[n])`.
    pub fn sqrt_powers(&self) -> Vec<Vec<f64>> {
        self.powers
            .iter()
            .map(|r| r.iter().map(|p| p.max(0.0).sqrt()).collect())
            .collect()
    }

    /// Keeps the first `m` slots.
    pub fn truncated(&self, m: usize) -> Self {
        let cut = |rows: &Vec<Vec<f64>>| rows.iter().map(|r| r[..m].to_vec()).collect();
        Self {
            positions: self.positions.iter().map(|r| r[..m].to_vec()).collect(),
            powers: cut(&self.powers),
            per_slot_rates: cut(&self.per_slot_rates),
            slot_len: self.slot_len,
        }
    }
}

/// Worst violation of each constraint family found by [`check_feasibility`].
///
/// Length violations are in meters and power violations in watts. The
/// tolerance is expressed in normalized units: lengths relative to `h_min`,
/// powers relative to `p_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub altitude: f64,
    pub level_speed: f64,
    pub vertical_speed: f64,
    pub separation: f64,
    pub power: f64,
    pub tolerance: f64,
    length_unit: f64,
    power_unit: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        let lt = self.tolerance * self.length_unit;
        self.altitude <= lt
            && self.level_speed <= lt
            && self.vertical_speed <= lt
            && self.separation <= lt
            && self.power <= self.tolerance * self.power_unit
    }

    /// Largest violation in normalized units.
    pub fn worst_normalized(&self) -> f64 {
        [self.altitude, self.level_speed, self.vertical_speed, self.separation]
            .iter()
            .map(|v| v / self.length_unit)
            .fold(self.power / self.power_unit, f64::max)
    }
}

/// Reports the worst violation of the altitude, speed, separation and power
/// constraints. Transitions from the initial positions into slot 1 are
/// always checked; when the solution spans the full horizon the final
/// transition back to the end positions is checked too.
pub fn check_feasibility(sol: &TrajectorySolution, scen: &Scenario, tol: f64) -> Result<FeasibilityReport> {
    let k = scen.num_links();
    if sol.num_uavs() != k || sol.powers.len() != k {
        return Err(TpcError::Usage(format!(
            "solution has {} UAVs, scenario has {k}",
            sol.num_uavs()
        )));
    }
    let slots = sol.num_slots();
    if sol.positions.iter().any(|r| r.len() != slots) || sol.powers.iter().any(|r| r.len() != slots) {
        return Err(TpcError::Usage("ragged solution arrays".into()));
    }
    let lim = &scen.limits;
    let ts = scen.horizon.slot_len;
    let (dl, da, dd) = (lim.v_level * ts, lim.v_ascend * ts, lim.v_descend * ts);
    let mut rep = FeasibilityReport {
        altitude: 0.0,
        level_speed: 0.0,
        vertical_speed: 0.0,
        separation: 0.0,
        power: 0.0,
        tolerance: tol,
        length_unit: lim.h_min,
        power_unit: scen.p_max,
    };
    let step = |from: &Point, to: &Point, rep: &mut FeasibilityReport| {
        let horiz = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)).sqrt();
        rep.level_speed = rep.level_speed.max(horiz - dl);
        let dz = to[2] - from[2];
        rep.vertical_speed = rep.vertical_speed.max(dz - da).max(-dz - dd);
    };
    for u in 0..k {
        let path = &sol.positions[u];
        for (n, q) in path.iter().enumerate() {
            rep.altitude = rep.altitude.max(lim.h_min - q[2]).max(q[2] - lim.h_max);
            let prev = if n == 0 { &scen.uav_initial[u] } else { &path[n - 1] };
            step(prev, q, &mut rep);
            let p = sol.powers[u][n];
            rep.power = rep.power.max(-p).max(p - scen.p_max);
        }
        if slots == scen.horizon.slots && slots > 0 {
            step(&path[slots - 1], &scen.final_positions()[u], &mut rep);
        }
    }
    for n in 0..slots {
        for i in 0..k {
            for j in i + 1..k {
                let d = (sol.positions[i][n] - sol.positions[j][n]).norm();
                rep.separation = rep.separation.max(lim.d_min - d);
            }
        }
    }
    Ok(rep)
}

/// Builds the full round-trip solution from the first `M` slots: fly out,
/// hover at the slot-`M` state, then retrace the outbound path in reverse.
pub fn mirror_extend(half: &TrajectorySolution, scen: &Scenario) -> Result<TrajectorySolution> {
    let total = scen.horizon.slots;
    let m = half.num_slots();
    if m == 0 {
        return Err(TpcError::Usage("cannot mirror an empty trajectory".into()));
    }
    if 2 * m > total {
        return Err(TpcError::Usage(format!("M = {m} exceeds N/2 = {}", total / 2)));
    }
    let index = |n: usize| -> usize {
        if n < m {
            n
        } else if n < total - m {
            m - 1
        } else {
            total - 1 - n
        }
    };
    fn spread<T: Copy>(rows: &[Vec<T>], total: usize, index: &dyn Fn(usize) -> usize) -> Vec<Vec<T>> {
        rows.iter().map(|r| (0..total).map(|n| r[index(n)]).collect()).collect()
    }
    Ok(TrajectorySolution {
        positions: spread(&half.positions, total, &index),
        powers: spread(&half.powers, total, &index),
        per_slot_rates: spread(&half.per_slot_rates, total, &index),
        slot_len: half.slot_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_scenario(slots: usize) -> Scenario {
        let limits = KinematicLimits::default();
        let ts = max_sampling_interval(&limits).unwrap();
        let horizon = Horizon::new(ts * slots as f64, ts).unwrap();
        Scenario::new(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(300.0, 0.0, 0.0)],
            vec![Point::new(0.0, 0.0, 100.0), Point::new(30.0, 0.0, 100.0)],
            1.0,
            ChannelParams::default(),
            limits,
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn gamma_from_default_constants() {
        let ch = ChannelParams::default();
        assert!((ch.gamma() / 1e7 - 1.0).abs() < 1e-12);
        assert!((ch.beta0 - 1e-5).abs() < 1e-20);
        assert!((ch.noise_psd - 1e-19).abs() < 1e-32);
    }

    #[test]
    fn zero_own_power_gives_zero_rate() {
        let ch = ChannelParams::default();
        let gts = [Point::new(0.0, 0.0, 0.0), Point::new(50.0, 0.0, 0.0)];
        let q = [Point::new(3.0, 4.0, 100.0), Point::new(10.0, 0.0, 120.0)];
        let r = compute_rate(&[0.0, 1.0], &q, &gts, 0, &ch).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn unit_snr_gives_bandwidth_rate() {
        let ch = ChannelParams::new(1e-5, 1e7, 1e-19).unwrap();
        // gamma = 1e7, so p = d^2 / 1e7 gives SNR 1.
        let q = [Point::new(0.0, 0.0, 100.0)];
        let gts = [Point::zeros()];
        let r = compute_rate(&[1e4 / 1e7], &q, &gts, 0, &ch).unwrap();
        assert!((r - 1e7).abs() < 1e-3);
    }

    #[test]
    fn zero_distance_is_a_domain_error() {
        let ch = ChannelParams::default();
        let q = [Point::zeros()];
        let err = compute_rate(&[1.0], &q, &[Point::zeros()], 0, &ch).unwrap_err();
        assert!(matches!(err, TpcError::Domain(_)));
    }

    #[test]
    fn sampling_interval_default_value() {
        let ts = max_sampling_interval(&KinematicLimits::default()).unwrap();
        assert!((ts - 0.4903).abs() < 5e-5, "{ts}");
    }

    #[test]
    fn sampling_interval_edge_cases() {
        let mut lim = KinematicLimits::default();
        lim.v_ascend = 0.0;
        lim.v_descend = 0.0;
        lim.v_level = lim.d_min / 2.0;
        assert!((max_sampling_interval(&lim).unwrap() - 1.0).abs() < 1e-15);
        let base = max_sampling_interval(&KinematicLimits::default()).unwrap();
        let mut doubled = KinematicLimits::default();
        doubled.d_min *= 2.0;
        assert!((max_sampling_interval(&doubled).unwrap() - 2.0 * base).abs() < 1e-15);
    }

    #[test]
    fn horizon_fit_is_even_and_within_bound() {
        let lim = KinematicLimits::default();
        let h = Horizon::fit(600.0, &lim).unwrap();
        assert_eq!(h.slots % 2, 0);
        assert!(h.slot_len <= max_sampling_interval(&lim).unwrap());
        assert!((h.slots as f64 * h.slot_len - 600.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_fleet_is_feasible() {
        let scen = small_scenario(4);
        let positions = scen.uav_initial.iter().map(|q| vec![*q; 2]).collect();
        let sol = TrajectorySolution::evaluate(positions, vec![vec![0.0; 2]; 2], &scen).unwrap();
        let rep = check_feasibility(&sol, &scen, 0.0).unwrap();
        assert!(rep.is_feasible());
        assert_eq!(rep.worst_normalized(), 0.0);
    }

    #[test]
    fn separation_violation_is_reported_in_meters() {
        let scen = small_scenario(4);
        // Slot 2 brings the UAVs to d_min - 1 apart; step lengths stay legal.
        let a = Point::new(0.0, 0.0, 100.0);
        let b = Point::new(19.0, 0.0, 100.0);
        let positions = vec![vec![a, a], vec![Point::new(25.0, 0.0, 100.0), b]];
        let sol = TrajectorySolution::evaluate(positions, vec![vec![0.0; 2]; 2], &scen).unwrap();
        let rep = check_feasibility(&sol, &scen, 0.0).unwrap();
        assert!((rep.separation - 1.0).abs() < 1e-12);
        assert_eq!(rep.level_speed, 0.0);
        assert!(!rep.is_feasible());
    }

    #[test]
    fn level_speed_violation() {
        let scen = small_scenario(4);
        let dl = scen.limits.v_level * scen.horizon.slot_len;
        let a = scen.uav_initial[0];
        let moved = a + Point::new(-(dl + 0.5), 0.0, 0.0);
        let positions = vec![vec![moved], vec![scen.uav_initial[1]]];
        let sol = TrajectorySolution::evaluate(positions, vec![vec![0.0]; 2], &scen).unwrap();
        let rep = check_feasibility(&sol, &scen, 0.0).unwrap();
        assert!((rep.level_speed - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let scen = small_scenario(4);
        let sol = TrajectorySolution {
            positions: vec![vec![Point::zeros()]],
            powers: vec![vec![0.0]],
            per_slot_rates: vec![vec![0.0]],
            slot_len: 1.0,
        };
        assert!(matches!(check_feasibility(&sol, &scen, 0.0), Err(TpcError::Usage(_))));
    }

    fn labelled(slots: &[f64]) -> TrajectorySolution {
        TrajectorySolution {
            positions: vec![slots.iter().map(|x| Point::new(*x, 0.0, 100.0)).collect()],
            powers: vec![slots.to_vec()],
            per_slot_rates: vec![slots.to_vec()],
            slot_len: 1.0,
        }
    }

    fn one_uav(slots: usize) -> Scenario {
        let limits = KinematicLimits::default();
        let ts = max_sampling_interval(&limits).unwrap();
        Scenario::new(
            vec![Point::zeros()],
            vec![Point::new(0.0, 0.0, 100.0)],
            1.0,
            ChannelParams::default(),
            limits,
            Horizon::new(ts * slots as f64, ts).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn mirror_four_slots() {
        let full = mirror_extend(&labelled(&[1.0, 2.0]), &one_uav(4)).unwrap();
        let xs: Vec<f64> = full.positions[0].iter().map(|q| q[0]).collect();
        assert_eq!(xs, vec![1.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn mirror_without_hold() {
        let full = mirror_extend(&labelled(&[1.0, 2.0, 3.0]), &one_uav(6)).unwrap();
        assert_eq!(full.powers[0], vec![1.0, 2.0, 3.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn mirror_aggregate_formula() {
        let (r1, r2) = (3.0, 5.0);
        let full = mirror_extend(&labelled(&[r1, r2]), &one_uav(6)).unwrap();
        assert_eq!(full.sum_rate(), 2.0 * (r1 + r2) + 2.0 * r2);
    }

    #[test]
    fn mirror_rejects_long_half() {
        let err = mirror_extend(&labelled(&[1.0, 2.0, 3.0]), &one_uav(4)).unwrap_err();
        assert!(matches!(err, TpcError::Usage(_)));
    }
}
