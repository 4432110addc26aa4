//! Human-editable scenario documents.
//!
//! A scenario file is TOML: plain `key = value` lines grouped in a few
//! tables, positions as bracketed lists of `[x, y, z]` triples in meters.
//! Logarithmic quantities carry their unit inside a string, for example
//! `p_max = "30 dBm"` or `beta0 = "-50 dB"`. Values keep the unit they were
//! written with, so parsing and re-serializing a file never changes a number.
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [horizon]
//! total_time = 600.0
//!
//! [power]
//! p_max = "30 dBm"
//!
//! [channel]
//! bandwidth = 10000000.0
//! beta0 = "-50 dB"
//! noise_psd = "-160 dBm/Hz"
//!
//! [limits]
//! v_level = 20.0
//! v_ascend = 5.0
//! v_descend = 3.0
//! h_min = 100.0
//! h_max = 500.0
//! d_min = 20.0
//!
//! [positions]
//! ground_terminals = [[300.0, 0.0, 0.0], [-200.0, 100.0, 0.0]]
//! uav_initial = [[0.0, 0.0, 100.0], [20.2, 0.0, 100.0]]
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use uav_tpc::scenario::{db_to_linear, dbm_to_watts};
use uav_tpc::{ChannelParams, Horizon, KinematicLimits, Point, Scenario};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// Unit attached to a [`Level`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Dimensionless linear ratio (no suffix).
    Linear,
    Db,
    Dbm,
    Watt,
    DbmPerHz,
    WattPerHz,
}

impl Unit {
    fn suffix(self) -> &'static str {
        match self {
            Unit::Linear => "",
            Unit::Db => "dB",
            Unit::Dbm => "dBm",
            Unit::Watt => "W",
            Unit::DbmPerHz => "dBm/Hz",
            Unit::WattPerHz => "W/Hz",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Unit::Linear,
            Unit::Db,
            Unit::Dbm,
            Unit::Watt,
            Unit::DbmPerHz,
            Unit::WattPerHz,
        ]
        .into_iter()
        .find(|u| u.suffix() == s)
    }
}

/// A number with an optional unit suffix, kept exactly as written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevelRepr", into = "LevelRepr")]
pub struct Level {
    pub value: f64,
    pub unit: Unit,
}

impl Level {
    pub fn new(value: f64, unit: Unit) -> Self {
        Self { value, unit }
    }

    /// Power in watts; accepts `dBm` and `W`.
    pub fn watts(&self) -> CliResult<f64> {
        match self.unit {
            Unit::Dbm => Ok(dbm_to_watts(self.value)),
            Unit::Watt => Ok(self.value),
            _ => Err(self.wrong_unit("a power (dBm or W)")),
        }
    }

    /// Linear ratio; accepts `dB` and bare numbers.
    pub fn ratio(&self) -> CliResult<f64> {
        match self.unit {
            Unit::Db => Ok(db_to_linear(self.value)),
            Unit::Linear => Ok(self.value),
            _ => Err(self.wrong_unit("a ratio (dB or plain number)")),
        }
    }

    /// Spectral density in W/Hz; accepts `dBm/Hz` and `W/Hz`.
    pub fn watts_per_hz(&self) -> CliResult<f64> {
        match self.unit {
            Unit::DbmPerHz => Ok(dbm_to_watts(self.value)),
            Unit::WattPerHz => Ok(self.value),
            _ => Err(self.wrong_unit("a density (dBm/Hz or W/Hz)")),
        }
    }

    fn wrong_unit(&self, expected: &str) -> CliError {
        CliError::Parse(format!("'{self}' is not {expected}"))
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.unit {
            Unit::Linear => write!(f, "{}", self.value),
            u => write!(f, "{} {}", self.value, u.suffix()),
        }
    }
}

impl FromStr for Level {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let s = s.trim();
        let (num, unit) = match s.find(|c: char| c.is_whitespace()) {
            Some(i) => (&s[..i], s[i..].trim()),
            None => (s, ""),
        };
        let unit = Unit::parse(unit).ok_or_else(|| CliError::Parse(format!("unknown unit '{unit}' in '{s}'")))?;
        let value: f64 = num
            .parse()
            .map_err(|_| CliError::Parse(format!("'{num}' is not a number")))?;
        if !value.is_finite() {
            return Err(CliError::Parse(format!("'{s}' is not finite")));
        }
        Ok(Level { value, unit })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LevelRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<LevelRepr> for Level {
    type Error = CliError;

    fn try_from(r: LevelRepr) -> CliResult<Self> {
        match r {
            LevelRepr::Number(v) => Ok(Level::new(v, Unit::Linear)),
            LevelRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Level> for LevelRepr {
    fn from(l: Level) -> Self {
        match l.unit {
            Unit::Linear => LevelRepr::Number(l.value),
            _ => LevelRepr::Text(l.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    /// Total flight time T (s).
    pub total_time: f64,
    /// Slot count N; when absent the smallest admissible count is chosen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub p_max: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// Hz.
    pub bandwidth: f64,
    pub beta0: Level,
    pub noise_psd: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub v_level: f64,
    pub v_ascend: f64,
    pub v_descend: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub d_min: f64,
}

impl From<KinematicLimits> for LimitsSection {
    fn from(l: KinematicLimits) -> Self {
        Self {
            v_level: l.v_level,
            v_ascend: l.v_ascend,
            v_descend: l.v_descend,
            h_min: l.h_min,
            h_max: l.h_max,
            d_min: l.d_min,
        }
    }
}

impl From<&LimitsSection> for KinematicLimits {
    fn from(l: &LimitsSection) -> Self {
        Self {
            v_level: l.v_level,
            v_ascend: l.v_ascend,
            v_descend: l.v_descend,
            h_min: l.h_min,
            h_max: l.h_max,
            d_min: l.d_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionsSection {
    pub ground_terminals: Vec<[f64; 3]>,
    pub uav_initial: Vec<[f64; 3]>,
    /// Distinct destinations for one-way missions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav_final: Option<Vec<[f64; 3]>>,
}

/// The on-disk form of a [`Scenario`] plus the seed that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub horizon: HorizonSection,
    pub power: PowerSection,
    pub channel: ChannelSection,
    pub limits: LimitsSection,
    pub positions: PositionsSection,
}

pub(crate) fn to_points(v: &[[f64; 3]]) -> Vec<Point> {
    v.iter().map(|p| Point::new(p[0], p[1], p[2])).collect()
}

pub(crate) fn to_triples(v: &[Point]) -> Vec<[f64; 3]> {
    v.iter().map(|p| [p[0], p[1], p[2]]).collect()
}

impl ScenarioFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(CliError::Parse(format!(
                "unsupported scenario version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn to_text(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| CliError::io(path, e))
    }

    /// Describes `scen` in SI units (watts, linear gain, W/Hz).
    pub fn from_scenario(scen: &Scenario, seed: u64) -> Self {
        Self {
            version: FORMAT_VERSION,
            seed,
            horizon: HorizonSection {
                total_time: scen.horizon.total_time,
                slots: Some(scen.horizon.slots),
                reduced: scen.horizon.reduced,
            },
            power: PowerSection {
                p_max: Level::new(scen.p_max, Unit::Watt),
            },
            channel: ChannelSection {
                bandwidth: scen.channel.bandwidth,
                beta0: Level::new(scen.channel.beta0, Unit::Linear),
                noise_psd: Level::new(scen.channel.noise_psd, Unit::WattPerHz),
            },
            limits: scen.limits.into(),
            positions: PositionsSection {
                ground_terminals: to_triples(&scen.gt_positions),
                uav_initial: to_triples(&scen.uav_initial),
                uav_final: scen.uav_final.as_deref().map(to_triples),
            },
        }
    }

    /// Builds and validates the scenario.
    pub fn to_scenario(&self) -> CliResult<Scenario> {
        let limits = KinematicLimits::from(&self.limits);
        let h = &self.horizon;
        let horizon = match h.slots {
            Some(0) => return Err(CliError::Invalid("slot count must be positive".into())),
            Some(n) => Horizon::new(h.total_time, h.total_time / n as f64)?,
            None => Horizon::fit(h.total_time, &limits)?,
        };
        let channel = ChannelParams::new(
            self.channel.beta0.ratio()?,
            self.channel.bandwidth,
            self.channel.noise_psd.watts_per_hz()?,
        )?;
        let mut scen = Scenario::new(
            to_points(&self.positions.ground_terminals),
            to_points(&self.positions.uav_initial),
            self.power.p_max.watts()?,
            channel,
            limits,
            horizon,
        )?;
        if let Some(f) = &self.positions.uav_final {
            scen = scen.with_final_positions(to_points(f))?;
        }
        if let Some(m) = h.reduced {
            scen = scen.with_reduced_horizon(m)?;
        }
        Ok(scen)
    }
}

/// TOML integers are signed, so seeds past `i64::MAX` are stored as strings.
mod seed_repr {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(|_| D::Error::custom(format!("seed {v} is negative"))),
            Repr::Text(t) => t
                .parse()
                .map_err(|_| D::Error::custom(format!("seed '{t}' is not an unsigned integer"))),
        }
    }
}
