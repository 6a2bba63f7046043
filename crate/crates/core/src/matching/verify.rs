//! Brute-force checks for small matching instances.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{deferred_acceptance, find_blocking_pairs, Choice, Matching, UnPreference};
use crate::error::{Error, Result};

/// A self-contained matching instance. UN `u` ranks `preferences[u]` (best
/// first, local implied last); `scores[e][u]` is cloudlet `e`'s valuation of
/// UN `u`, `None` when unacceptable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n_cloudlets: usize,
    pub preferences: Vec<Vec<usize>>,
    pub scores: Vec<Vec<Option<f64>>>,
}

impl Instance {
    pub fn n_uns(&self) -> usize {
        self.preferences.len()
    }

    pub fn un_preferences(&self) -> Vec<UnPreference> {
        self.preferences
            .iter()
            .enumerate()
            .map(|(u, list)| {
                let mut ranked: Vec<Choice> = list.iter().map(|&e| Choice::Cloudlet(e)).collect();
                ranked.push(Choice::Local);
                UnPreference { un: u, ranked }
            })
            .collect()
    }

    pub fn score(&self, un: usize, cloudlet: usize) -> Option<f64> {
        self.scores[cloudlet][un]
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.len() != self.n_cloudlets {
            return Err(Error::Malformed(format!(
                "{} score rows for {} cloudlets",
                self.scores.len(),
                self.n_cloudlets
            )));
        }
        for row in &self.scores {
            if row.len() != self.n_uns() {
                return Err(Error::Malformed(format!("score row has {} entries for {} UNs", row.len(), self.n_uns())));
            }
        }
        for (u, list) in self.preferences.iter().enumerate() {
            let mut seen = vec![false; self.n_cloudlets];
            for &e in list {
                if e >= self.n_cloudlets || std::mem::replace(&mut seen[e], true) {
                    return Err(Error::Malformed(format!("UN {u} preference list is invalid")));
                }
            }
        }
        Ok(())
    }

    /// Random instance with up to `max_uns` UNs and `max_cloudlets`
    /// cloudlets. Roughly a third of the scores are unacceptable.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_uns: usize, max_cloudlets: usize) -> Self {
        let n_uns = rng.random_range(1..=max_uns.max(1));
        let n_cloudlets = rng.random_range(1..=max_cloudlets.max(1));
        let preferences = (0..n_uns)
            .map(|_| {
                let mut ids: Vec<usize> = (0..n_cloudlets).collect();
                ids.shuffle(rng);
                let keep = rng.random_range(0..=n_cloudlets);
                ids.truncate(keep);
                ids
            })
            .collect();
        let scores = (0..n_cloudlets)
            .map(|_| {
                (0..n_uns)
                    .map(|_| {
                        let phi: f64 = rng.random_range(-0.5..1.0);
                        // Coarse grid so score ties occur.
                        let phi = (phi * 8.0).round() / 8.0;
                        (phi >= 0.0).then_some(phi)
                    })
                    .collect()
            })
            .collect();
        Self {
            n_cloudlets,
            preferences,
            scores,
        }
    }
}

/// Every matching in which each UN is local or holds a cloudlet from its
/// list that also finds it acceptable, with no cloudlet used twice.
pub fn enumerate_matchings(inst: &Instance) -> Vec<Matching> {
    fn go(inst: &Instance, u: usize, used: &mut Vec<bool>, cur: &mut Vec<Choice>, out: &mut Vec<Matching>) {
        if u == inst.n_uns() {
            let m = Matching::from_pairs(cur.iter().copied().enumerate()).expect("distinct cloudlets");
            out.push(m);
            return;
        }
        cur.push(Choice::Local);
        go(inst, u + 1, used, cur, out);
        cur.pop();
        for &e in &inst.preferences[u] {
            if used[e] || inst.score(u, e).is_none() {
                continue;
            }
            used[e] = true;
            cur.push(Choice::Cloudlet(e));
            go(inst, u + 1, used, cur, out);
            cur.pop();
            used[e] = false;
        }
    }
    let mut out = Vec::new();
    go(inst, 0, &mut vec![false; inst.n_cloudlets], &mut Vec::new(), &mut out);
    out
}

pub fn stable_matchings(inst: &Instance) -> Vec<Matching> {
    let prefs = inst.un_preferences();
    enumerate_matchings(inst)
        .into_iter()
        .filter(|m| find_blocking_pairs(m, &prefs, |u, e| inst.score(u, e)).is_empty())
        .collect()
}

/// Outcome of checking DA on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCheck {
    pub blocking_pairs: Vec<(usize, usize)>,
    pub in_stable_set: bool,
    pub proposer_optimal: bool,
}

impl InstanceCheck {
    pub fn ok(&self) -> bool {
        self.blocking_pairs.is_empty() && self.in_stable_set && self.proposer_optimal
    }
}

pub fn check_da(inst: &Instance) -> InstanceCheck {
    let prefs = inst.un_preferences();
    let score = |u: usize, e: usize| inst.score(u, e);
    let da = deferred_acceptance(&prefs, score);
    let blocking_pairs = find_blocking_pairs(&da, &prefs, score);
    let stable = stable_matchings(inst);
    let in_stable_set = stable.contains(&da);
    let rank = |p: &UnPreference, m: &Matching| p.position(m.assignment(p.un).unwrap_or(Choice::Local)).expect("assignment is ranked");
    let proposer_optimal = stable.iter().all(|m| prefs.iter().all(|p| rank(p, &da) <= rank(p, m)));
    InstanceCheck {
        blocking_pairs,
        in_stable_set,
        proposer_optimal,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FuzzReport {
    pub instances: usize,
    /// `(instance index, description)` of each failure.
    pub failures: Vec<(usize, String)>,
}

pub fn fuzz_stability(n_instances: usize, max_uns: usize, max_cloudlets: usize, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport {
        instances: n_instances,
        failures: Vec::new(),
    };
    for i in 0..n_instances {
        let inst = Instance::random(&mut rng, max_uns, max_cloudlets);
        let c = check_da(&inst);
        if !c.ok() {
            report.failures.push((i, format!("{c:?} on {}", serde_json::to_string(&inst).unwrap_or_default())));
        }
    }
    report
}

/// An instance plus a claimed matching, as read by the checker mode.
/// `matching[u]` is the cloudlet assigned to UN `u`, or `None` for local.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFile {
    #[serde(flatten)]
    pub instance: Instance,
    pub matching: Vec<Option<usize>>,
}

impl CheckFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: CheckFile = serde_json::from_str(&text)?;
        f.instance.validate()?;
        if f.matching.len() != f.instance.n_uns() {
            return Err(Error::Malformed(format!(
                "matching has {} entries for {} UNs",
                f.matching.len(),
                f.instance.n_uns()
            )));
        }
        Ok(f)
    }

    /// Blocking pairs of the claimed matching.
    pub fn blocking_pairs(&self) -> Result<Vec<(usize, usize)>> {
        let m = Matching::from_pairs(
            self.matching
                .iter()
                .enumerate()
                .map(|(u, e)| (u, e.map_or(Choice::Local, Choice::Cloudlet))),
        )?;
        let prefs = self.instance.un_preferences();
        Ok(find_blocking_pairs(&m, &prefs, |u, e| self.instance.score(u, e)))
    }
}
