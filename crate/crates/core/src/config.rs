//! Scenario configuration.
//!
//! Every field has a default, so an empty TOML document is a valid
//! configuration. Unknown keys are rejected to catch typos in sweep scripts.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which scheme assigns requests to cloudlets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Clustering, proactive caching and reliability-constrained matching.
    Proposed,
    /// Reliability-constrained matching with caching disabled.
    Baseline1,
    /// Link-quality matching with no delay constraint and no caching.
    Baseline2,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Baseline1, Scheme::Baseline2];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline1 => "baseline1",
            Scheme::Baseline2 => "baseline2",
        }
    }

    /// Whether cloudlet caches are active under this scheme.
    pub fn caches(self) -> bool {
        matches!(self, Scheme::Proposed)
    }

    /// Whether the training phase runs before the online phase.
    pub fn trains(self) -> bool {
        !matches!(self, Scheme::Baseline2)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "baseline1" => Ok(Scheme::Baseline1),
            "baseline2" => Ok(Scheme::Baseline2),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

/// How `traffic_intensity_mbps` is split over user nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficScope {
    /// Each UN offers the full traffic intensity.
    PerUn,
    /// The traffic intensity is the network total, split evenly over UNs.
    Aggregate,
}

/// Small-scale fading model applied to every link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// Unit-mean exponential power gain, redrawn per slot per link.
    Rayleigh,
    /// Unit gain on every link.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_cloudlets: usize,
    pub n_uns: usize,
    pub n_tasks: usize,
    pub cacheable_fraction: f64,
    pub zipf_z: f64,
    pub n_profiles: usize,
    pub delay_threshold_s: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub sigma_d_sq: f64,
    /// CPU cycles needed per bit of task data.
    pub cycles_per_bit: f64,
    pub kappa_over_clocal_s_per_bit: f64,
    pub kappa_over_ce_s_per_bit: f64,
    pub storage_slots: usize,
    pub tau_lp_range_ms: [f64; 2],
    pub tau_ep_range_ms: [f64; 2],
    pub traffic_intensity_mbps: f64,
    pub traffic_scope: TrafficScope,
    pub mean_task_size_bits: f64,
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub coverage_pathloss_db: f64,
    pub fading: FadingModel,
    pub area_side_m: f64,
    pub slot_duration_s: f64,
    pub n_training_slots: u64,
    pub n_slots: u64,
    pub warmup_slots: u64,
    pub scheme: Scheme,
    pub k_min: usize,
    /// Upper bound on the cluster count; `U/2` when absent.
    pub k_max: Option<usize>,
    pub estimator_exponent: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_cloudlets: 30,
            n_uns: 90,
            n_tasks: 90,
            cacheable_fraction: 1.0 / 3.0,
            zipf_z: 0.6,
            n_profiles: 3,
            delay_threshold_s: 1.0,
            epsilon: 0.01,
            theta: 0.5,
            sigma_d_sq: 500.0,
            cycles_per_bit: 100.0,
            kappa_over_clocal_s_per_bit: 1e-7,
            kappa_over_ce_s_per_bit: 1e-8,
            storage_slots: 10,
            tau_lp_range_ms: [0.0, 0.125],
            tau_ep_range_ms: [0.125, 0.25],
            traffic_intensity_mbps: 9.0,
            traffic_scope: TrafficScope::PerUn,
            mean_task_size_bits: 1e5,
            tx_power_dbm: 20.0,
            bandwidth_hz: 10e6,
            noise_dbm: -104.0,
            pathloss_ref_db: 38.5,
            pathloss_exponent: 3.5,
            coverage_pathloss_db: 110.0,
            fading: FadingModel::Rayleigh,
            area_side_m: 500.0,
            slot_duration_s: 1e-3,
            n_training_slots: 5_000,
            n_slots: 15_000,
            warmup_slots: 2_000,
            scheme: Scheme::Proposed,
            k_min: 2,
            k_max: None,
            estimator_exponent: 0.55,
            seed: 1,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Applies `key=value` overrides. Values are parsed as TOML, falling back
    /// to a bare string so `scheme=baseline2` works without quotes.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| invalid(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| invalid(format!("override `{item}` is not KEY=VALUE")))?;
            let key = key.trim();
            let raw = raw.trim();
            let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
                Ok(mut t) => t.remove("v").expect("parsed key"),
                Err(_) => toml::Value::String(raw.to_string()),
            };
            if !table.contains_key(key) && !Self::is_optional_key(key) {
                return Err(invalid(format!("unknown configuration key `{key}`")));
            }
            table.insert(key.to_string(), value);
        }
        let cfg: ScenarioConfig = table.try_into().map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn is_optional_key(key: &str) -> bool {
        key == "k_max"
    }

    pub fn k_max_effective(&self) -> usize {
        self.k_max.unwrap_or(self.n_uns / 2)
    }

    /// Number of cacheable tasks implied by `cacheable_fraction`.
    pub fn n_cacheable(&self) -> usize {
        (self.cacheable_fraction * self.n_tasks as f64).round() as usize
    }

    /// Per-UN Poisson arrival rate in requests per second.
    pub fn arrival_rate_per_un(&self) -> f64 {
        let bps = self.traffic_intensity_mbps * 1e6;
        match self.traffic_scope {
            TrafficScope::PerUn => bps / self.mean_task_size_bits,
            TrafficScope::Aggregate => bps / (self.n_uns as f64 * self.mean_task_size_bits),
        }
    }

    pub fn tau_ep_mean_s(&self) -> f64 {
        0.5 * (self.tau_ep_range_ms[0] + self.tau_ep_range_ms[1]) * 1e-3
    }

    pub fn tau_lp_mean_s(&self) -> f64 {
        0.5 * (self.tau_lp_range_ms[0] + self.tau_lp_range_ms[1]) * 1e-3
    }

    /// Reliability budget of the Markov-relaxed delay constraint, in seconds.
    pub fn delay_budget_s(&self) -> f64 {
        self.delay_threshold_s * self.epsilon
    }

    pub fn local_rate_cycles_per_s(&self) -> f64 {
        self.cycles_per_bit / self.kappa_over_clocal_s_per_bit
    }

    pub fn cloudlet_rate_cycles_per_s(&self) -> f64 {
        self.cycles_per_bit / self.kappa_over_ce_s_per_bit
    }

    /// Sets `storage_slots` from a proactiveness level (fraction of the
    /// cacheable task set that fits in one cloudlet cache).
    pub fn set_proactiveness(&mut self, level: f64) {
        self.storage_slots = (level * self.n_cacheable() as f64).round() as usize;
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if self.n_tasks == 0 {
            return Err(invalid("n_tasks must be at least 1"));
        }
        if self.n_uns < self.k_min {
            return Err(invalid(format!(
                "n_uns ({}) must be at least k_min ({})",
                self.n_uns, self.k_min
            )));
        }
        if self.n_cloudlets == 0 {
            return Err(invalid("n_cloudlets must be at least 1"));
        }
        if self.n_profiles == 0 {
            return Err(invalid("n_profiles must be at least 1"));
        }
        if self.k_min == 0 {
            return Err(invalid("k_min must be at least 1"));
        }
        positive("area_side_m", self.area_side_m)?;
        positive("delay_threshold_s", self.delay_threshold_s)?;
        positive("sigma_d_sq", self.sigma_d_sq)?;
        positive("cycles_per_bit", self.cycles_per_bit)?;
        positive("kappa_over_clocal_s_per_bit", self.kappa_over_clocal_s_per_bit)?;
        positive("kappa_over_ce_s_per_bit", self.kappa_over_ce_s_per_bit)?;
        positive("mean_task_size_bits", self.mean_task_size_bits)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("slot_duration_s", self.slot_duration_s)?;
        positive("pathloss_exponent", self.pathloss_exponent)?;
        if !(0.0..=1.0).contains(&self.cacheable_fraction) {
            return Err(invalid("cacheable_fraction must lie in [0, 1]"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(invalid("theta must lie in [0, 1]"));
        }
        if !(self.zipf_z >= 0.0 && self.zipf_z.is_finite()) {
            return Err(invalid("zipf_z must be non-negative"));
        }
        if !(self.traffic_intensity_mbps >= 0.0 && self.traffic_intensity_mbps.is_finite()) {
            return Err(invalid("traffic_intensity_mbps must be non-negative"));
        }
        if !(self.estimator_exponent > 0.0 && self.estimator_exponent <= 1.0) {
            return Err(invalid("estimator_exponent must lie in (0, 1]"));
        }
        for (name, [lo, hi]) in [("tau_lp_range_ms", self.tau_lp_range_ms), ("tau_ep_range_ms", self.tau_ep_range_ms)] {
            if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return Err(invalid(format!("{name} must satisfy 0 <= lo <= hi")));
            }
        }
        if let Some(k_max) = self.k_max {
            if k_max == 0 {
                return Err(invalid("k_max must be at least 1"));
            }
        }
        if self.warmup_slots > self.n_slots {
            return Err(invalid("warmup_slots must not exceed n_slots"));
        }
        Ok(())
    }
}
