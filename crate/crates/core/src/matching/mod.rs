//! Per-slot UN-to-cloudlet matching.
//!
//! UNs rank the cloudlets in their coverage by estimated service delay and
//! drop any cloudlet that looks slower than computing locally. Cloudlets rank
//! proposers by a score; for the delay-aware schemes the score is the slack
//! `Φ` left in the reliability budget, and a negative slack makes the
//! proposer unacceptable. UN-proposing deferred acceptance then yields a
//! stable one-to-one matching; UNs left unmatched compute locally.

pub mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::radio::RateEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Cloudlet(usize),
    Local,
}

/// A UN's ranked options for its head request. `ranked` always ends with
/// `Choice::Local`; cloudlets come first, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct UnPreference {
    pub un: usize,
    pub ranked: Vec<Choice>,
}

impl UnPreference {
    pub fn local_only(un: usize) -> Self {
        Self {
            un,
            ranked: vec![Choice::Local],
        }
    }

    /// Position of `choice` in the ranking; `None` if it is not listed.
    pub fn position(&self, choice: Choice) -> Option<usize> {
        self.ranked.iter().position(|&c| c == choice)
    }

    pub fn cloudlets(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranked.iter().filter_map(|c| match c {
            Choice::Cloudlet(e) => Some(*e),
            Choice::Local => None,
        })
    }
}

/// Delay constants shared by UN estimates and cloudlet utilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayParams {
    pub kappa_over_ce_s_per_bit: f64,
    pub kappa_over_clocal_s_per_bit: f64,
    pub tau_ep_mean_s: f64,
    pub tau_lp_mean_s: f64,
    /// `D_th · ε`.
    pub budget_s: f64,
}

impl DelayParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            kappa_over_ce_s_per_bit: cfg.kappa_over_ce_s_per_bit,
            kappa_over_clocal_s_per_bit: cfg.kappa_over_clocal_s_per_bit,
            tau_ep_mean_s: cfg.tau_ep_mean_s(),
            tau_lp_mean_s: cfg.tau_lp_mean_s(),
            budget_s: cfg.delay_budget_s(),
        }
    }

    pub fn local_estimate_s(&self, size_bits: f64, local_backlog_s: f64) -> f64 {
        self.kappa_over_clocal_s_per_bit * size_bits + local_backlog_s + self.tau_lp_mean_s
    }

    /// UN-side offload estimate: transmit, compute and processing, no queue.
    pub fn offload_estimate_s(&self, size_bits: f64, rate_bps: f64) -> f64 {
        self.kappa_over_ce_s_per_bit * size_bits + size_bits / rate_bps + self.tau_ep_mean_s
    }
}

/// What a UN knows about one cloudlet in its coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudletView {
    pub cloudlet: usize,
    pub rate_estimate_bps: f64,
    pub cached: bool,
}

/// Ranks cloudlets by ascending delay estimate (lower id on ties) and prunes
/// those whose estimate is not below the local estimate.
pub fn build_un_preferences(un: usize, size_bits: f64, options: &[CloudletView], local_backlog_s: f64, params: &DelayParams) -> UnPreference {
    let local = params.local_estimate_s(size_bits, local_backlog_s);
    let mut scored: Vec<(f64, usize)> = options
        .iter()
        .map(|o| {
            let est = if o.cached {
                params.tau_ep_mean_s
            } else {
                params.offload_estimate_s(size_bits, o.rate_estimate_bps)
            };
            (est, o.cloudlet)
        })
        .filter(|&(est, _)| est < local)
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ranked: Vec<Choice> = scored.into_iter().map(|(_, e)| Choice::Cloudlet(e)).collect();
    ranked.push(Choice::Local);
    UnPreference { un, ranked }
}

/// Ranks cloudlets by ascending path loss (lower id on ties) with no pruning.
pub fn build_link_quality_preferences(un: usize, pathloss_db: &[(usize, f64)]) -> UnPreference {
    let mut v = pathloss_db.to_vec();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut ranked: Vec<Choice> = v.into_iter().map(|(e, _)| Choice::Cloudlet(e)).collect();
    ranked.push(Choice::Local);
    UnPreference { un, ranked }
}

/// `Σ L' / r̄` over the queued requests, each at its owner's rate estimate.
pub fn queue_backlog_s(cloudlet: usize, queue: impl IntoIterator<Item = (usize, f64)>, estimates: &BTreeMap<usize, RateEstimate>) -> Result<f64> {
    let mut total = 0.0;
    for (un, remaining_bits) in queue {
        let est = estimates.get(&un).ok_or(Error::MissingRateEstimate { cloudlet, un })?;
        total += remaining_bits / est.value_bps;
    }
    Ok(total)
}

/// Reliability slack `Φ` in seconds for admitting a request of `size_bits`
/// from a UN with rate estimate `rate_bps` behind `backlog_s` of queued
/// transmission.
pub fn cloudlet_utility(params: &DelayParams, size_bits: f64, rate_bps: f64, backlog_s: f64) -> f64 {
    params.budget_s - params.kappa_over_ce_s_per_bit * size_bits - backlog_s - params.tau_ep_mean_s - size_bits / rate_bps
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pub pairs: BTreeMap<usize, Choice>,
    pub reverse: BTreeMap<usize, usize>,
}

impl Matching {
    pub fn assignment(&self, un: usize) -> Option<Choice> {
        self.pairs.get(&un).copied()
    }

    pub fn partner(&self, cloudlet: usize) -> Option<usize> {
        self.reverse.get(&cloudlet).copied()
    }

    /// Builds a matching from explicit assignments; errors if a cloudlet is
    /// used twice.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Choice)>) -> Result<Self> {
        let mut m = Matching::default();
        for (u, c) in pairs {
            if let Choice::Cloudlet(e) = c {
                if let Some(prev) = m.reverse.insert(e, u) {
                    return Err(Error::Malformed(format!("cloudlet {e} matched to both UN {prev} and UN {u}")));
                }
            }
            m.pairs.insert(u, c);
        }
        Ok(m)
    }
}

/// Proposal and rejection counts from one DA run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DaTrace {
    pub proposals: usize,
    /// `(un, cloudlet)` in rejection order, including displacements.
    pub rejections: Vec<(usize, usize)>,
}

/// True when `a` (score, un) is preferred to `b` by the cloudlet.
fn prefers(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// UN-proposing deferred acceptance. `score(un, cloudlet)` is the cloudlet's
/// valuation of that UN; `None` means unacceptable.
pub fn deferred_acceptance<F>(prefs: &[UnPreference], score: F) -> Matching
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    deferred_acceptance_traced(prefs, score).0
}

pub fn deferred_acceptance_traced<F>(prefs: &[UnPreference], mut score: F) -> (Matching, DaTrace)
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    let mut trace = DaTrace::default();
    let mut next = vec![0usize; prefs.len()];
    // cloudlet -> (score, index into prefs)
    let mut held: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut free: Vec<usize> = (0..prefs.len()).rev().collect();
    let mut result: Vec<Choice> = vec![Choice::Local; prefs.len()];

    while let Some(i) = free.pop() {
        let p = &prefs[i];
        let Some(&choice) = p.ranked.get(next[i]) else {
            result[i] = Choice::Local;
            continue;
        };
        next[i] += 1;
        let e = match choice {
            Choice::Local => {
                result[i] = Choice::Local;
                continue;
            }
            Choice::Cloudlet(e) => e,
        };
        trace.proposals += 1;
        let Some(s) = score(p.un, e) else {
            trace.rejections.push((p.un, e));
            free.push(i);
            continue;
        };
        match held.get(&e).copied() {
            None => {
                held.insert(e, (s, i));
            }
            Some((hs, hi)) => {
                if prefers((s, p.un), (hs, prefs[hi].un)) {
                    held.insert(e, (s, i));
                    trace.rejections.push((prefs[hi].un, e));
                    free.push(hi);
                } else {
                    trace.rejections.push((p.un, e));
                    free.push(i);
                }
            }
        }
    }
    for (&e, &(_, i)) in &held {
        result[i] = Choice::Cloudlet(e);
    }
    let matching = Matching::from_pairs(prefs.iter().zip(result).map(|(p, c)| (p.un, c))).expect("DA holds one proposer per cloudlet");
    (matching, trace)
}

/// Pairs `(un, cloudlet)` that block `matching`: the UN ranks the cloudlet
/// strictly above its assignment, and the cloudlet finds the UN acceptable
/// and is either free or prefers the UN to its partner.
pub fn find_blocking_pairs<F>(matching: &Matching, prefs: &[UnPreference], mut score: F) -> Vec<(usize, usize)>
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    let mut out = Vec::new();
    for p in prefs {
        let current = matching.assignment(p.un).unwrap_or(Choice::Local);
        let cut = p.position(current).unwrap_or(p.ranked.len());
        for &c in &p.ranked[..cut] {
            let Choice::Cloudlet(e) = c else { continue };
            let Some(s) = score(p.un, e) else { continue };
            let blocks = match matching.partner(e) {
                None => true,
                Some(v) => match score(v, e) {
                    None => true,
                    Some(vs) => prefers((s, p.un), (vs, v)),
                },
            };
            if blocks {
                out.push((p.un, e));
            }
        }
    }
    out
}
