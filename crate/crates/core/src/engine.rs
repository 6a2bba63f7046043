//! Slotted simulation of one scenario under one scheme.
//!
//! Decisions happen at slot boundaries; queue drain and delays are tracked in
//! continuous time. Each slot runs, in order: fading draw, arrivals, cache-hit
//! service, matching of each UN's head request, cloudlet queue service, local
//! queue service, and rate-estimate updates.

use std::collections::VecDeque;
use std::io::Write;

use log::{debug, info};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::caching::AdmitOutcome;
use crate::clustering::{
    assign_preferred_clusters, blend_similarity, build_popularity_matrix, distance_matrix, popularity_matrix, spectral_cluster,
    ClusterAssignment, PopularityMatrix, RequestHistogram, SimilarityMatrix, SpectralOutcome,
};
use crate::config::{FadingModel, Scheme, ScenarioConfig};
use crate::error::{Error, Result};
use crate::matching::{
    build_link_quality_preferences, build_un_preferences, cloudlet_utility, deferred_acceptance_traced, queue_backlog_s, Choice,
    CloudletView, DelayParams, UnPreference,
};
use crate::model::{generate_scenario, ArrivalSampler, Request, RequestState, Scenario, ServedBy};
use crate::radio::{dbm_to_mw, uplink_rate, PathLossModel, RateEstimate};
use crate::rng::{RandomSource, Stream};

/// One completed request with its delay breakdown. Field order is the
/// request-log CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub slot: u64,
    pub un: usize,
    pub task: usize,
    pub scheme: Scheme,
    pub served_by: ServedBy,
    pub cacheable: bool,
    pub hit: bool,
    pub transmit_s: f64,
    pub compute_s: f64,
    pub queue_wait_s: f64,
    pub processing_s: f64,
    pub total_s: f64,
}

impl RequestRecord {
    pub fn is_offloaded(&self) -> bool {
        matches!(self.served_by, ServedBy::Cloudlet(_))
    }
}

/// Counters covering every request, measured or not.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub generated: u64,
    pub completed: u64,
    pub cache_served: u64,
    pub local: u64,
    pub offloaded: u64,
    /// Admissions made with negative reliability slack (delay-aware schemes).
    pub admission_violations: u64,
    pub proposals: u64,
    pub drain_slots: u64,
}

/// What the training phase learned.
#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub histograms: Vec<RequestHistogram>,
    /// Cloudlet × UN counts of training requests served.
    pub service_counts: Vec<Vec<u64>>,
    pub similarity: SimilarityMatrix,
    pub spectral: SpectralOutcome,
    pub popularity: PopularityMatrix,
    pub preferred_clusters: Vec<usize>,
}

impl TrainingReport {
    pub fn assignment(&self) -> &ClusterAssignment {
        &self.spectral.assignment
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ScenarioConfig,
    /// Requests that arrived in the measured window, in completion order.
    pub records: Vec<RequestRecord>,
    pub stats: RunStats,
    pub training: Option<TrainingReport>,
}

#[derive(Debug, Clone, Serialize)]
struct SlotTrace<'a> {
    slot: u64,
    proposals: usize,
    rejections: &'a [(usize, usize)],
    pairs: Vec<(usize, usize)>,
}

pub struct Engine {
    cfg: ScenarioConfig,
    scenario: Scenario,
    params: DelayParams,
    /// U × E path loss in dB.
    pathloss: Vec<Vec<f64>>,
    /// U × E received power in mW before fading.
    rx_mw: Vec<Vec<f64>>,
    /// Covering cloudlets per UN, ascending id.
    coverage: Vec<Vec<usize>>,
    /// Covered UNs per cloudlet, ascending id.
    covered: Vec<Vec<usize>>,
    noise_mw: f64,
    sampler: ArrivalSampler,
    arrivals_rng: ChaCha8Rng,
    sizes_rng: ChaCha8Rng,
    fading_rng: ChaCha8Rng,
    processing_rng: ChaCha8Rng,
    /// U × E small-scale gains for the current slot, row-major.
    fading: Vec<f64>,
    slot: u64,
    next_id: u64,
    arrivals_on: bool,
    records: Vec<RequestRecord>,
    stats: RunStats,
    training: Option<TrainingReport>,
    trace: Option<Box<dyn Write + Send>>,
}

impl Engine {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let scenario = generate_scenario(cfg)?;
        Self::from_scenario(cfg, scenario)
    }

    /// Builds an engine over an explicit scenario. Rate estimates for every
    /// covered link start from one noise-limited, unit-gain observation.
    pub fn from_scenario(cfg: &ScenarioConfig, mut scenario: Scenario) -> Result<Self> {
        cfg.validate()?;
        let model = PathLossModel::new(cfg.pathloss_ref_db, cfg.pathloss_exponent);
        let n_e = scenario.cloudlets.len();
        let pathloss: Vec<Vec<f64>> = scenario
            .uns
            .iter()
            .map(|u| {
                scenario
                    .cloudlets
                    .iter()
                    .map(|c| model.loss_db(u.position.dist(&c.position)))
                    .collect()
            })
            .collect();
        let rx_mw: Vec<Vec<f64>> = scenario
            .uns
            .iter()
            .zip(&pathloss)
            .map(|(u, row)| row.iter().map(|pl| dbm_to_mw(u.tx_power_dbm - pl)).collect())
            .collect();
        let coverage: Vec<Vec<usize>> = pathloss
            .iter()
            .map(|row| (0..n_e).filter(|&e| row[e] <= cfg.coverage_pathloss_db).collect())
            .collect();
        let mut covered = vec![Vec::new(); n_e];
        for (u, cov) in coverage.iter().enumerate() {
            for &e in cov {
                covered[e].push(u);
            }
        }
        let noise_mw = dbm_to_mw(cfg.noise_dbm);
        for (e, c) in scenario.cloudlets.iter_mut().enumerate() {
            c.rate_estimates.clear();
            for &u in &covered[e] {
                let r = uplink_rate(scenario.uns[u].tx_power_dbm, pathloss[u][e], 1.0, 0.0, noise_mw, cfg.bandwidth_hz);
                c.rate_estimates
                    .insert(u, RateEstimate::default().update(r, cfg.estimator_exponent));
            }
        }
        let src = RandomSource::new(cfg.seed);
        let sampler = ArrivalSampler::new(&scenario, cfg.slot_duration_s);
        let n_u = scenario.uns.len();
        Ok(Self {
            params: DelayParams::from_config(cfg),
            cfg: cfg.clone(),
            scenario,
            pathloss,
            rx_mw,
            coverage,
            covered,
            noise_mw,
            sampler,
            arrivals_rng: src.stream(Stream::Arrivals),
            sizes_rng: src.stream(Stream::Sizes),
            fading_rng: src.stream(Stream::Fading),
            processing_rng: src.stream(Stream::Processing),
            fading: vec![1.0; n_u * n_e],
            slot: 0,
            next_id: 0,
            arrivals_on: true,
            records: Vec::new(),
            stats: RunStats::default(),
            training: None,
            trace: None,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn coverage(&self, un: usize) -> &[usize] {
        &self.coverage[un]
    }

    pub fn pathloss_db(&self, un: usize, cloudlet: usize) -> f64 {
        self.pathloss[un][cloudlet]
    }

    pub fn records(&self) -> &[RequestRecord] {
        &self.records
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn training(&self) -> Option<&TrainingReport> {
        self.training.as_ref()
    }

    /// Turns random arrivals on or off; injected requests are unaffected.
    pub fn set_arrivals(&mut self, on: bool) {
        self.arrivals_on = on;
    }

    /// Writes one JSON line per slot with the matching's proposals,
    /// rejections and pairs.
    pub fn set_trace(&mut self, sink: Box<dyn Write + Send>) {
        self.trace = Some(sink);
    }

    /// Adds a request arriving at the start of the current slot.
    pub fn inject(&mut self, un: usize, task: usize, size_bits: f64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let req = Request::new(id, task, un, size_bits, self.slot, self.cfg.slot_duration_s);
        self.scenario.uns[un].pending.push_back(req);
        self.stats.generated += 1;
        id
    }

    /// True when no request is pending or queued anywhere.
    pub fn is_idle(&self) -> bool {
        self.scenario
            .uns
            .iter()
            .all(|u| u.pending.is_empty() && u.local_queue.is_empty())
            && self.scenario.cloudlets.iter().all(|c| c.offload_queue.is_empty())
    }

    fn in_window(&self, slot: u64) -> bool {
        slot >= self.cfg.warmup_slots && slot < self.cfg.n_slots
    }

    fn draw_tau(rng: &mut ChaCha8Rng, range_ms: [f64; 2]) -> f64 {
        (range_ms[0] + (range_ms[1] - range_ms[0]) * rng.random::<f64>()) * 1e-3
    }

    fn draw_fading(&mut self) {
        if self.cfg.fading == FadingModel::None {
            return;
        }
        for g in &mut self.fading {
            *g = self.fading_rng.sample(Exp1);
        }
    }

    fn gain(&self, un: usize, cloudlet: usize) -> f64 {
        self.rx_mw[un][cloudlet] * self.fading[un * self.scenario.cloudlets.len() + cloudlet]
    }

    fn record(&mut self, req: &Request, served_by: ServedBy, transmit: f64, compute: f64, wait: f64, processing: f64) {
        self.stats.completed += 1;
        match served_by {
            ServedBy::Local => self.stats.local += 1,
            ServedBy::Cloudlet(_) => self.stats.offloaded += 1,
            ServedBy::Cache(_) => self.stats.cache_served += 1,
        }
        if !self.in_window(req.arrival_slot) {
            return;
        }
        self.records.push(RequestRecord {
            slot: req.arrival_slot,
            un: req.un_id,
            task: req.task_id,
            scheme: self.cfg.scheme,
            served_by,
            cacheable: self.scenario.tasks[req.task_id].cacheable,
            hit: matches!(served_by, ServedBy::Cache(_)),
            transmit_s: transmit,
            compute_s: compute,
            queue_wait_s: wait,
            processing_s: processing,
            total_s: transmit + compute + wait + processing,
        });
    }

    /// Collects request histograms, service counts and rate observations over
    /// the training window, then clusters UNs and distributes popularity
    /// vectors to cloudlet caches. Training requests are counted, not queued:
    /// each is credited to its minimum-path-loss covering cloudlet, and rate
    /// observations see fading but no interference.
    pub fn run_training(&mut self) -> Result<Option<&TrainingReport>> {
        if !self.cfg.scheme.trains() {
            return Ok(None);
        }
        let src = RandomSource::new(self.cfg.seed);
        let mut arrivals = src.stream(Stream::TrainingArrivals);
        let mut sizes = src.stream(Stream::TrainingSizes);
        let mut fading = src.stream(Stream::TrainingFading);
        let cacheable = self.scenario.cacheable_ids();
        let mut col = vec![usize::MAX; self.scenario.tasks.len()];
        for (i, &t) in cacheable.iter().enumerate() {
            col[t] = i;
        }
        let n_u = self.scenario.uns.len();
        let n_e = self.scenario.cloudlets.len();
        let mut histograms = vec![RequestHistogram::zeros(cacheable.len()); n_u];
        let mut service = vec![vec![0u64; n_u]; n_e];
        let best: Vec<Option<usize>> = (0..n_u)
            .map(|u| {
                self.coverage[u]
                    .iter()
                    .copied()
                    .min_by(|&a, &b| self.pathloss[u][a].total_cmp(&self.pathloss[u][b]))
            })
            .collect();
        let mut scratch = 0u64;
        for slot in 0..self.cfg.n_training_slots {
            for u in 0..n_u {
                let un = &self.scenario.uns[u];
                let profile = &self.scenario.profiles[un.popularity_profile_id];
                for req in self.sampler.sample_arrivals(un, profile, slot, &mut arrivals, &mut sizes, &mut scratch) {
                    if col[req.task_id] != usize::MAX {
                        histograms[u].0[col[req.task_id]] += 1;
                    }
                    if let Some(e) = best[u] {
                        service[e][u] += 1;
                    }
                }
            }
            for e in 0..n_e {
                for &u in &self.covered[e] {
                    let g = match self.cfg.fading {
                        FadingModel::Rayleigh => fading.sample(Exp1),
                        FadingModel::None => 1.0,
                    };
                    let r = uplink_rate(
                        self.scenario.uns[u].tx_power_dbm,
                        self.pathloss[u][e],
                        g,
                        0.0,
                        self.noise_mw,
                        self.cfg.bandwidth_hz,
                    );
                    let est = self.scenario.cloudlets[e].rate_estimates.entry(u).or_default();
                    *est = est.update(r, self.cfg.estimator_exponent);
                }
            }
        }

        let positions: Vec<_> = self.scenario.uns.iter().map(|u| u.position).collect();
        let s_d = distance_matrix(&positions, self.cfg.sigma_d_sq);
        let s_p = popularity_matrix(&histograms);
        let similarity = blend_similarity(&s_d, &s_p, self.cfg.theta)?;
        let spectral = if n_u < 2 {
            SpectralOutcome {
                assignment: ClusterAssignment {
                    k: 1,
                    labels: vec![0; n_u],
                },
                eigenvalues: vec![0.0; n_u],
                fallback: false,
            }
        } else {
            if !cacheable.is_empty() && histograms.iter().all(RequestHistogram::is_zero) {
                return Err(Error::NoCacheableRequests);
            }
            let k_min = self.cfg.k_min.min(n_u);
            let k_max = self.cfg.k_max_effective().max(k_min);
            let mut rng = src.stream(Stream::KMeans);
            spectral_cluster(&similarity, k_min, k_max, &mut rng)?
        };
        let popularity = build_popularity_matrix(&spectral.assignment, &histograms, &cacheable);
        let nearest_un: Vec<usize> = self
            .scenario
            .cloudlets
            .iter()
            .map(|c| {
                (0..n_u)
                    .min_by(|&a, &b| {
                        positions[a]
                            .dist_sq(&c.position)
                            .total_cmp(&positions[b].dist_sq(&c.position))
                    })
                    .unwrap_or(0)
            })
            .collect();
        let preferred_clusters = if n_u == 0 {
            vec![0; n_e]
        } else {
            assign_preferred_clusters(&service, &spectral.assignment, &nearest_un)
        };
        for (c, &k) in self.scenario.cloudlets.iter_mut().zip(&preferred_clusters) {
            let xi = popularity.vector(k).to_vec();
            c.cache.rebind_popularity(&xi)?;
            c.preferred_cluster = Some(k);
            c.popularity_vector = Some(xi);
        }
        info!(
            "training: {} slots, k = {}{}",
            self.cfg.n_training_slots,
            spectral.assignment.k,
            if spectral.fallback { " (fallback)" } else { "" }
        );
        self.training = Some(TrainingReport {
            histograms,
            service_counts: service,
            similarity,
            spectral,
            popularity,
            preferred_clusters,
        });
        Ok(self.training.as_ref())
    }

    /// Advances one slot.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.cfg.slot_duration_s;
        let t0 = self.slot as f64 * dt;
        let t1 = t0 + dt;

        self.draw_fading();
        if self.arrivals_on && self.slot < self.cfg.n_slots {
            self.sample_arrivals();
        }
        self.serve_cache_hits(t0);
        self.match_heads(t0)?;
        let heads = self.serve_cloudlets(t0, t1)?;
        self.serve_local(t1);
        self.update_estimates(&heads);
        self.slot += 1;
        Ok(())
    }

    fn sample_arrivals(&mut self) {
        for u in 0..self.scenario.uns.len() {
            let un = &self.scenario.uns[u];
            let profile = &self.scenario.profiles[un.popularity_profile_id];
            let new = self.sampler.sample_arrivals(
                un,
                profile,
                self.slot,
                &mut self.arrivals_rng,
                &mut self.sizes_rng,
                &mut self.next_id,
            );
            self.stats.generated += new.len() as u64;
            self.scenario.uns[u].pending.extend(new);
        }
    }

    fn serve_cache_hits(&mut self, t0: f64) {
        if !self.cfg.scheme.caches() {
            return;
        }
        for u in 0..self.scenario.uns.len() {
            if self.scenario.uns[u].pending.is_empty() || self.coverage[u].is_empty() {
                continue;
            }
            let pending = std::mem::take(&mut self.scenario.uns[u].pending);
            let mut keep = VecDeque::with_capacity(pending.len());
            for mut req in pending {
                let hit = self.coverage[u]
                    .iter()
                    .copied()
                    .find(|&e| self.scenario.cloudlets[e].cache.lookup(req.task_id));
                match hit {
                    Some(e) => {
                        let tau = Self::draw_tau(&mut self.processing_rng, self.cfg.tau_ep_range_ms);
                        req.state = RequestState::CacheServed;
                        req.served_by = Some(ServedBy::Cache(e));
                        req.completion_slot = Some(self.slot);
                        let wait = t0 - req.arrival_time_s;
                        self.record(&req, ServedBy::Cache(e), 0.0, 0.0, wait, tau);
                    }
                    None => keep.push_back(req),
                }
            }
            self.scenario.uns[u].pending = keep;
        }
    }

    fn match_heads(&mut self, t0: f64) -> Result<()> {
        let scheme = self.cfg.scheme;
        let mut prefs: Vec<UnPreference> = Vec::new();
        for (u, un) in self.scenario.uns.iter().enumerate() {
            let Some(head) = un.pending.front() else { continue };
            let p = match scheme {
                Scheme::Proposed | Scheme::Baseline1 => {
                    let views: Vec<CloudletView> = self.coverage[u]
                        .iter()
                        .map(|&e| {
                            let c = &self.scenario.cloudlets[e];
                            CloudletView {
                                cloudlet: e,
                                rate_estimate_bps: c.rate_estimates[&u].value_bps,
                                cached: scheme.caches() && c.cache.lookup(head.task_id),
                            }
                        })
                        .collect();
                    build_un_preferences(u, head.size_bits, &views, un.local_backlog_s(t0), &self.params)
                }
                Scheme::Baseline2 => {
                    let pl: Vec<(usize, f64)> = self.coverage[u].iter().map(|&e| (e, self.pathloss[u][e])).collect();
                    build_link_quality_preferences(u, &pl)
                }
            };
            prefs.push(p);
        }
        if prefs.is_empty() {
            return Ok(());
        }

        let mut backlog = vec![0.0; self.scenario.cloudlets.len()];
        if scheme != Scheme::Baseline2 {
            for (e, c) in self.scenario.cloudlets.iter().enumerate() {
                backlog[e] = queue_backlog_s(e, c.offload_queue.iter().map(|r| (r.un_id, r.remaining_bits)), &c.rate_estimates)?;
            }
        }
        let size_of: Vec<f64> = self
            .scenario
            .uns
            .iter()
            .map(|un| un.pending.front().map_or(0.0, |r| r.size_bits))
            .collect();
        let phi = |u: usize, e: usize| -> f64 {
            let rate = self.scenario.cloudlets[e].rate_estimates[&u].value_bps;
            cloudlet_utility(&self.params, size_of[u], rate, backlog[e])
        };
        let (matching, trace) = match scheme {
            Scheme::Proposed | Scheme::Baseline1 => deferred_acceptance_traced(&prefs, |u, e| {
                let v = phi(u, e);
                (v >= 0.0).then_some(v)
            }),
            Scheme::Baseline2 => deferred_acceptance_traced(&prefs, |u, e| Some(-self.pathloss[u][e])),
        };
        self.stats.proposals += trace.proposals as u64;
        if scheme != Scheme::Baseline2 {
            self.stats.admission_violations += matching.reverse.iter().filter(|(&e, &u)| phi(u, e) < 0.0).count() as u64;
        }
        if let Some(sink) = self.trace.as_mut() {
            let line = SlotTrace {
                slot: self.slot,
                proposals: trace.proposals,
                rejections: &trace.rejections,
                pairs: matching.reverse.iter().map(|(&e, &u)| (u, e)).collect(),
            };
            serde_json::to_writer(&mut *sink, &line)?;
            writeln!(sink)?;
        }

        for p in &prefs {
            let u = p.un;
            let mut req = self.scenario.uns[u].pending.pop_front().expect("head exists");
            match matching.assignment(u).unwrap_or(Choice::Local) {
                Choice::Cloudlet(e) => {
                    req.state = RequestState::OffloadQueued;
                    self.scenario.cloudlets[e].offload_queue.push_back(req);
                }
                Choice::Local => {
                    let un = &mut self.scenario.uns[u];
                    let start = un.local_busy_until_s.max(t0);
                    let finish = start + self.params.kappa_over_clocal_s_per_bit * req.size_bits;
                    un.local_busy_until_s = finish;
                    req.state = RequestState::LocalQueued;
                    req.service_start_s = Some(start);
                    req.compute_done_s = Some(finish);
                    un.local_queue.push_back(req);
                }
            }
        }
        Ok(())
    }

    /// Instantaneous rate of `un` towards `cloudlet`, with interference from
    /// the other cloudlets' queue heads (excluding `un` itself).
    fn instantaneous_rate(&self, un: usize, cloudlet: usize, heads: &[(usize, usize)]) -> f64 {
        let interference: f64 = heads
            .iter()
            .filter(|&&(e, h)| e != cloudlet && h != un)
            .map(|&(_, h)| self.gain(h, cloudlet))
            .sum();
        uplink_rate(
            self.scenario.uns[un].tx_power_dbm,
            self.pathloss[un][cloudlet],
            self.fading[un * self.scenario.cloudlets.len() + cloudlet],
            interference,
            self.noise_mw,
            self.cfg.bandwidth_hz,
        )
    }

    /// Drains every cloudlet queue over `[t0, t1)`. The interferer set is the
    /// queue heads at the start of the slot. Returns that set as
    /// `(cloudlet, un)` pairs.
    fn serve_cloudlets(&mut self, t0: f64, t1: f64) -> Result<Vec<(usize, usize)>> {
        let heads: Vec<(usize, usize)> = self
            .scenario
            .cloudlets
            .iter()
            .enumerate()
            .filter_map(|(e, c)| c.offload_queue.front().map(|r| (e, r.un_id)))
            .collect();
        for e in 0..self.scenario.cloudlets.len() {
            let mut t = t0;
            while t < t1 {
                let Some(head) = self.scenario.cloudlets[e].offload_queue.front() else { break };
                let u = head.un_id;
                let rate = self.instantaneous_rate(u, e, &heads);
                let head = self.scenario.cloudlets[e].offload_queue.front_mut().expect("checked");
                if head.service_start_s.is_none() {
                    head.service_start_s = Some(t);
                }
                if rate <= 0.0 {
                    break;
                }
                let needed = head.remaining_bits / rate;
                if t + needed > t1 {
                    head.remaining_bits = (head.remaining_bits - rate * (t1 - t)).max(0.0);
                    break;
                }
                t += needed;
                let mut req = self.scenario.cloudlets[e].offload_queue.pop_front().expect("checked");
                req.remaining_bits = 0.0;
                req.state = RequestState::Done;
                req.completion_slot = Some(self.slot);
                req.served_by = Some(ServedBy::Cloudlet(e));
                let start = req.service_start_s.expect("set above");
                let compute = self.params.kappa_over_ce_s_per_bit * req.size_bits;
                let tau = Self::draw_tau(&mut self.processing_rng, self.cfg.tau_ep_range_ms);
                self.record(&req, ServedBy::Cloudlet(e), t - start, compute, start - req.arrival_time_s, tau);
                if self.cfg.scheme.caches() {
                    let outcome = self.scenario.cloudlets[e].cache.admit(req.task_id)?;
                    if let AdmitOutcome::Replaced { victim } = outcome {
                        debug!("cloudlet {e}: task {} replaced {victim}", req.task_id);
                    }
                }
            }
        }
        Ok(heads)
    }

    fn serve_local(&mut self, t1: f64) {
        for u in 0..self.scenario.uns.len() {
            while let Some(front) = self.scenario.uns[u].local_queue.front() {
                let finish = front.compute_done_s.expect("set at assignment");
                if finish > t1 {
                    break;
                }
                let mut req = self.scenario.uns[u].local_queue.pop_front().expect("checked");
                req.state = RequestState::Done;
                req.completion_slot = Some(self.slot);
                req.served_by = Some(ServedBy::Local);
                let start = req.service_start_s.expect("set at assignment");
                let tau = Self::draw_tau(&mut self.processing_rng, self.cfg.tau_lp_range_ms);
                self.record(&req, ServedBy::Local, 0.0, finish - start, start - req.arrival_time_s, tau);
            }
        }
    }

    fn update_estimates(&mut self, heads: &[(usize, usize)]) {
        let exponent = self.cfg.estimator_exponent;
        for e in 0..self.scenario.cloudlets.len() {
            for i in 0..self.covered[e].len() {
                let u = self.covered[e][i];
                let r = self.instantaneous_rate(u, e, heads);
                let est = self.scenario.cloudlets[e].rate_estimates.entry(u).or_default();
                *est = est.update(r, exponent);
            }
        }
    }

    /// Steps until no request remains anywhere.
    pub fn drain(&mut self) -> Result<()> {
        self.arrivals_on = false;
        while !self.is_idle() {
            self.step()?;
            self.stats.drain_slots += 1;
        }
        Ok(())
    }

    /// Trains (if the scheme does), runs `n_slots` online slots, then drains.
    pub fn run(mut self) -> Result<RunResult> {
        self.run_training()?;
        while self.slot < self.cfg.n_slots {
            self.step()?;
        }
        self.drain()?;
        Ok(RunResult {
            config: self.cfg,
            records: self.records,
            stats: self.stats,
            training: self.training,
        })
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunResult> {
    Engine::new(cfg)?.run()
}
