//! Uplink radio model: log-distance path loss, SINR-based Shannon rate,
//! co-channel interference and the time-averaged rate estimator.

use crate::model::{Cloudlet, Point};

/// Log-distance path loss `PL(d) = PL0 + 10 n log10(d / d0)` with `d0 = 1 m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub ref_db: f64,
    pub exponent: f64,
}

impl PathLossModel {
    pub fn new(ref_db: f64, exponent: f64) -> Self {
        Self { ref_db, exponent }
    }

    /// Distances below the 1 m reference are clamped to it.
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        self.ref_db + 10.0 * self.exponent * distance_m.max(1.0).log10()
    }

    /// Largest distance whose path loss stays within `threshold_db`.
    pub fn coverage_radius_m(&self, threshold_db: f64) -> f64 {
        10f64.powf((threshold_db - self.ref_db) / (10.0 * self.exponent))
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Received power in mW for a transmitter at `p_tx_dbm` over a link with the
/// given path loss and small-scale power gain.
pub fn received_mw(p_tx_dbm: f64, pathloss_db: f64, fading: f64) -> f64 {
    dbm_to_mw(p_tx_dbm - pathloss_db) * fading
}

/// `BW log2(1 + S / (N + I))` in bits/s.
pub fn uplink_rate(p_tx_dbm: f64, pathloss_db: f64, fading: f64, interference_mw: f64, noise_mw: f64, bw_hz: f64) -> f64 {
    let signal = received_mw(p_tx_dbm, pathloss_db, fading);
    bw_hz * (signal / (noise_mw + interference_mw)).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub pathloss_db: f64,
    /// Current small-scale power gain.
    pub fading_gain: f64,
    pub in_coverage: bool,
}

impl LinkState {
    pub fn new(pathloss_db: f64, coverage_threshold_db: f64) -> Self {
        Self {
            pathloss_db,
            fading_gain: 1.0,
            in_coverage: pathloss_db <= coverage_threshold_db,
        }
    }
}

/// A UN transmitting towards `target` during the current slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitter {
    pub un: usize,
    pub target: usize,
}

/// Co-channel interference at `cloudlet`: received power from every UN that
/// is transmitting to some other cloudlet. `received` maps a UN id to its
/// received power (mW) at this cloudlet.
pub fn interference_at(cloudlet: usize, transmitters: &[Transmitter], mut received: impl FnMut(usize) -> f64) -> f64 {
    transmitters
        .iter()
        .filter(|t| t.target != cloudlet)
        .map(|t| received(t.un))
        .sum()
}

/// Time-averaged rate `r̄(t) = ν(t) r + (1 - ν(t)) r̄(t-1)` with `ν(t) = t^-a`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateEstimate {
    pub value_bps: f64,
    pub update_count: u64,
}

impl RateEstimate {
    pub fn update(self, observed_bps: f64, exponent: f64) -> RateEstimate {
        let t = self.update_count + 1;
        let nu = (t as f64).powf(-exponent);
        RateEstimate {
            value_bps: nu * observed_bps + (1.0 - nu) * self.value_bps,
            update_count: t,
        }
    }
}

/// Ids of the cloudlets whose path loss to `position` is within the
/// threshold, ascending.
pub fn coverage_set(position: &Point, cloudlets: &[Cloudlet], model: &PathLossModel, threshold_db: f64) -> Vec<usize> {
    cloudlets
        .iter()
        .filter(|c| model.loss_db(position.dist(&c.position)) <= threshold_db)
        .map(|c| c.id)
        .collect()
}
