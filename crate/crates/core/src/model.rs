//! Domain entities and scenario generation.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::caching::CacheStore;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::radio::RateEstimate;
use crate::rng::{RandomSource, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: usize,
    pub cacheable: bool,
    pub mean_size_bits: f64,
    pub cycles_per_bit: f64,
}

/// Per-UN task popularity: rank `i` (0-based) maps to task `order[i]`, and is
/// requested with weight `1 / (i + 1)^z`.
#[derive(Debug, Clone)]
pub struct ZipfProfile {
    order: Vec<usize>,
    sampler: WeightedIndex<f64>,
}

impl ZipfProfile {
    pub fn new(order: Vec<usize>, z: f64) -> Self {
        let weights: Vec<f64> = (1..=order.len()).map(|i| (i as f64).powf(-z)).collect();
        let sampler = WeightedIndex::new(weights).expect("non-empty positive weights");
        Self { order, sampler }
    }

    /// Task ids, most popular first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn sample_rank<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    pub fn sample_task<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.order[self.sample_rank(rng)]
    }
}

#[derive(Debug, Clone)]
pub struct UserNode {
    pub id: usize,
    pub position: Point,
    pub tx_power_dbm: f64,
    pub local_rate_cycles_per_s: f64,
    pub arrival_rate_per_s: f64,
    pub popularity_profile_id: usize,
    /// Requests waiting to be assigned, oldest first.
    pub pending: VecDeque<Request>,
    /// Requests assigned to local compute, in FIFO order.
    pub local_queue: VecDeque<Request>,
    /// Time at which the local processor finishes its last queued job.
    pub local_busy_until_s: f64,
}

impl UserNode {
    pub fn new(id: usize, position: Point, cfg: &ScenarioConfig, profile: usize) -> Self {
        Self {
            id,
            position,
            tx_power_dbm: cfg.tx_power_dbm,
            local_rate_cycles_per_s: cfg.local_rate_cycles_per_s(),
            arrival_rate_per_s: cfg.arrival_rate_per_un(),
            popularity_profile_id: profile,
            pending: VecDeque::new(),
            local_queue: VecDeque::new(),
            local_busy_until_s: 0.0,
        }
    }

    /// Local queueing delay seen by a job joining the local queue at `now`.
    pub fn local_backlog_s(&self, now: f64) -> f64 {
        (self.local_busy_until_s - now).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Cloudlet {
    pub id: usize,
    pub position: Point,
    pub compute_rate_cycles_per_s: f64,
    pub storage_slots: usize,
    pub offload_queue: VecDeque<Request>,
    pub cache: CacheStore,
    /// Time-averaged uplink rate per covered UN.
    pub rate_estimates: BTreeMap<usize, RateEstimate>,
    pub preferred_cluster: Option<usize>,
    pub popularity_vector: Option<Vec<usize>>,
}

impl Cloudlet {
    pub fn new(id: usize, position: Point, cfg: &ScenarioConfig, cacheable: &[usize]) -> Self {
        Self {
            id,
            position,
            compute_rate_cycles_per_s: cfg.cloudlet_rate_cycles_per_s(),
            storage_slots: cfg.storage_slots,
            offload_queue: VecDeque::new(),
            cache: CacheStore::new(cfg.storage_slots, cacheable.iter().copied()),
            rate_estimates: BTreeMap::new(),
            preferred_cluster: None,
            popularity_vector: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestState {
    Pending,
    LocalQueued,
    OffloadQueued,
    CacheServed,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ServedBy {
    Local,
    Cloudlet(usize),
    Cache(usize),
}

impl fmt::Display for ServedBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServedBy::Local => f.write_str("local"),
            ServedBy::Cloudlet(e) => write!(f, "cloudlet:{e}"),
            ServedBy::Cache(e) => write!(f, "cache:{e}"),
        }
    }
}

impl std::str::FromStr for ServedBy {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || crate::error::Error::Malformed(format!("served_by `{s}`"));
        if s == "local" {
            return Ok(ServedBy::Local);
        }
        let (kind, id) = s.split_once(':').ok_or_else(bad)?;
        let id: usize = id.parse().map_err(|_| bad())?;
        match kind {
            "cloudlet" => Ok(ServedBy::Cloudlet(id)),
            "cache" => Ok(ServedBy::Cache(id)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ServedBy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ServedBy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: u64,
    pub task_id: usize,
    pub un_id: usize,
    pub size_bits: f64,
    pub arrival_slot: u64,
    pub arrival_time_s: f64,
    /// Bits still to be uplinked while offload-queued.
    pub remaining_bits: f64,
    pub state: RequestState,
    pub completion_slot: Option<u64>,
    pub served_by: Option<ServedBy>,
    /// Start of uplink transmission or of local computation.
    pub service_start_s: Option<f64>,
    /// Local jobs: time the processor finishes this job.
    pub compute_done_s: Option<f64>,
}

impl Request {
    pub fn new(id: u64, task_id: usize, un_id: usize, size_bits: f64, arrival_slot: u64, slot_duration_s: f64) -> Self {
        Self {
            id,
            task_id,
            un_id,
            size_bits,
            arrival_slot,
            arrival_time_s: arrival_slot as f64 * slot_duration_s,
            remaining_bits: size_bits,
            state: RequestState::Pending,
            completion_slot: None,
            served_by: None,
            service_start_s: None,
            compute_done_s: None,
        }
    }
}

/// Everything `generate_scenario` produces.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub uns: Vec<UserNode>,
    pub cloudlets: Vec<Cloudlet>,
    pub tasks: Vec<Task>,
    pub profiles: Vec<ZipfProfile>,
}

impl Scenario {
    pub fn cacheable_ids(&self) -> Vec<usize> {
        self.tasks.iter().filter(|t| t.cacheable).map(|t| t.id).collect()
    }
}

/// Cloudlet sites on a near-square grid filled row-major, each jittered by up
/// to 10% of the cell size.
pub fn cloudlet_grid<R: Rng + ?Sized>(n: usize, side: f64, rng: &mut R) -> Vec<Point> {
    let rows = ((n as f64).sqrt().floor() as usize).max(1);
    let cols = n.div_ceil(rows);
    let (cw, ch) = (side / cols as f64, side / rows as f64);
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let jx = rng.random_range(-0.1..=0.1) * cw;
            let jy = rng.random_range(-0.1..=0.1) * ch;
            let x = ((c as f64 + 0.5) * cw + jx).clamp(0.0, side);
            let y = ((r as f64 + 0.5) * ch + jy).clamp(0.0, side);
            Point::new(x, y)
        })
        .collect()
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = RandomSource::new(cfg.seed).stream(Stream::Placement);
    let side = cfg.area_side_m;

    let mut ids: Vec<usize> = (0..cfg.n_tasks).collect();
    ids.shuffle(&mut rng);
    let mut cacheable = vec![false; cfg.n_tasks];
    for &id in &ids[..cfg.n_cacheable()] {
        cacheable[id] = true;
    }
    let tasks: Vec<Task> = (0..cfg.n_tasks)
        .map(|id| Task {
            id,
            cacheable: cacheable[id],
            mean_size_bits: cfg.mean_task_size_bits,
            cycles_per_bit: cfg.cycles_per_bit,
        })
        .collect();

    let profiles: Vec<ZipfProfile> = (0..cfg.n_profiles)
        .map(|_| {
            let mut order: Vec<usize> = (0..cfg.n_tasks).collect();
            order.shuffle(&mut rng);
            ZipfProfile::new(order, cfg.zipf_z)
        })
        .collect();

    let uns: Vec<UserNode> = (0..cfg.n_uns)
        .map(|id| {
            let p = Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
            let profile = rng.random_range(0..cfg.n_profiles);
            UserNode::new(id, p, cfg, profile)
        })
        .collect();

    let cacheable_ids: Vec<usize> = tasks.iter().filter(|t| t.cacheable).map(|t| t.id).collect();
    let cloudlets = cloudlet_grid(cfg.n_cloudlets, side, &mut rng)
        .into_iter()
        .enumerate()
        .map(|(id, p)| Cloudlet::new(id, p, cfg, &cacheable_ids))
        .collect();

    Ok(Scenario {
        uns,
        cloudlets,
        tasks,
        profiles,
    })
}

/// Samplers shared by every UN's arrival process.
#[derive(Debug, Clone)]
pub struct ArrivalSampler {
    per_un: Vec<Option<Poisson<f64>>>,
    sizes: Vec<Exp<f64>>,
    slot_duration_s: f64,
}

impl ArrivalSampler {
    pub fn new(scenario: &Scenario, slot_duration_s: f64) -> Self {
        let per_un = scenario
            .uns
            .iter()
            .map(|u| {
                let mean = u.arrival_rate_per_s * slot_duration_s;
                (mean > 0.0).then(|| Poisson::new(mean).expect("positive Poisson mean"))
            })
            .collect();
        let sizes = scenario
            .tasks
            .iter()
            .map(|t| Exp::new(1.0 / t.mean_size_bits).expect("positive mean size"))
            .collect();
        Self {
            per_un,
            sizes,
            slot_duration_s,
        }
    }

    /// Draws this slot's arrivals at `un`. The count and task choice come from
    /// `arrivals`; sizes come from `sizes`.
    pub fn sample_arrivals<A: Rng + ?Sized, S: Rng + ?Sized>(
        &self,
        un: &UserNode,
        profile: &ZipfProfile,
        slot: u64,
        arrivals: &mut A,
        sizes: &mut S,
        next_id: &mut u64,
    ) -> Vec<Request> {
        let Some(poisson) = &self.per_un[un.id] else {
            return Vec::new();
        };
        let count = poisson.sample(arrivals) as usize;
        (0..count)
            .map(|_| {
                let task = profile.sample_task(arrivals);
                let size = self.sizes[task].sample(sizes);
                let id = *next_id;
                *next_id += 1;
                Request::new(id, task, un.id, size, slot, self.slot_duration_s)
            })
            .collect()
    }
}
