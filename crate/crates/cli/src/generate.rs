//! Seeded random scenarios: terminals uniform in a square area, UAVs parked
//! on a small grid around the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uav_tpc::{KinematicLimits, Scenario};

use crate::error::{CliError, CliResult};
use crate::scenario_file::{
    ChannelSection, HorizonSection, Level, PositionsSection, PowerSection, ScenarioFile, Unit, FORMAT_VERSION,
};

/// Start-grid spacing relative to `d_min`, so that rounding never puts two
/// UAVs exactly at the separation limit.
pub const GRID_SPACING: f64 = 1.01;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub num_links: usize,
    /// Side of the square area (km), centered at the origin.
    pub area_km: f64,
    pub total_time: f64,
    pub p_max_dbm: f64,
    pub bandwidth: f64,
    pub beta0_db: f64,
    pub noise_dbm_per_hz: f64,
    pub limits: KinematicLimits,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            num_links: 4,
            area_km: 1.0,
            total_time: 600.0,
            p_max_dbm: 30.0,
            bandwidth: 10e6,
            beta0_db: -50.0,
            noise_dbm_per_hz: -160.0,
            limits: KinematicLimits::default(),
        }
    }
}

/// Start positions on a square grid of pitch `GRID_SPACING * d_min`
/// centered at the origin, at altitude `h_min`.
pub fn start_grid(k: usize, limits: &KinematicLimits) -> Vec<[f64; 3]> {
    let cols = (k as f64).sqrt().ceil() as usize;
    let rows = k.div_ceil(cols.max(1));
    let pitch = GRID_SPACING * limits.d_min;
    let x0 = -0.5 * pitch * (cols - 1) as f64;
    let y0 = -0.5 * pitch * (rows - 1) as f64;
    (0..k)
        .map(|i| {
            [
                x0 + pitch * (i % cols) as f64,
                y0 + pitch * (i / cols) as f64,
                limits.h_min,
            ]
        })
        .collect()
}

pub fn generate_scenario_file(seed: u64, cfg: &GenerateConfig) -> CliResult<ScenarioFile> {
    let k = cfg.num_links;
    if k == 0 {
        return Err(CliError::Invalid("at least one link is required".into()));
    }
    if !(cfg.area_km > 0.0) {
        return Err(CliError::Invalid(format!(
            "area side must be positive, got {}",
            cfg.area_km
        )));
    }
    let half = 500.0 * cfg.area_km;
    let starts = start_grid(k, &cfg.limits);
    let extent = starts.iter().flat_map(|p| [p[0].abs(), p[1].abs()]).fold(0.0, f64::max);
    if extent > half {
        return Err(CliError::Invalid(format!(
            "start grid of {k} UAVs spans {:.1} m, beyond the {:.1} m area",
            2.0 * extent,
            2.0 * half
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gts = (0..k)
        .map(|_| [rng.gen_range(-half..=half), rng.gen_range(-half..=half), 0.0])
        .collect();
    Ok(ScenarioFile {
        version: FORMAT_VERSION,
        seed,
        horizon: HorizonSection {
            total_time: cfg.total_time,
            slots: None,
            reduced: None,
        },
        power: PowerSection {
            p_max: Level::new(cfg.p_max_dbm, Unit::Dbm),
        },
        channel: ChannelSection {
            bandwidth: cfg.bandwidth,
            beta0: Level::new(cfg.beta0_db, Unit::Db),
            noise_psd: Level::new(cfg.noise_dbm_per_hz, Unit::DbmPerHz),
        },
        limits: cfg.limits.into(),
        positions: PositionsSection {
            ground_terminals: gts,
            uav_initial: starts,
            uav_final: None,
        },
    })
}

pub fn generate_scenario(seed: u64, cfg: &GenerateConfig) -> CliResult<Scenario> {
    generate_scenario_file(seed, cfg)?.to_scenario()
}
