//! Multi-run experiments: labelled configurations × seeds, run in parallel,
//! and the four figure sweeps built on them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{Scheme, ScenarioConfig};
use crate::engine::{run, RunResult};
use crate::error::{Error, Result};
use crate::metrics::{ccdf_rows, default_ccdf_grid, summarize, sweep, CcdfRow, RunSummary, SweepPoint, SweepRow};

/// One labelled configuration at one sweep-axis value.
#[derive(Debug, Clone)]
pub struct Job {
    pub series: String,
    pub value: f64,
    pub config: ScenarioConfig,
}

/// Runs every job under every seed and maps each result with `f` on the
/// worker. Output is ordered by job, then seed.
pub fn run_jobs<T, F>(jobs: &[Job], seeds: &[u64], threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Job, u64, RunResult) -> Result<T> + Sync,
{
    let tasks: Vec<(usize, u64)> = (0..jobs.len()).flat_map(|j| seeds.iter().map(move |&s| (j, s))).collect();
    let work = || {
        tasks
            .par_iter()
            .map(|&(j, seed)| {
                let job = &jobs[j];
                let cfg = ScenarioConfig {
                    seed,
                    ..job.config.clone()
                };
                let result = run(&cfg)?;
                f(job, seed, result)
            })
            .collect::<Result<Vec<T>>>()
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Runs jobs and summarizes each run.
pub fn summarize_jobs(jobs: &[Job], seeds: &[u64], threads: Option<usize>) -> Result<Vec<RunSummary>> {
    run_jobs(jobs, seeds, threads, |job, seed, r| {
        Ok(summarize(&r.records, &job.series, r.config.scheme, seed, r.config.delay_threshold_s))
    })
}

/// Groups per-run summaries (ordered by job, then seed) into sweep points.
pub fn group_points(jobs: &[Job], seeds: &[u64], summaries: Vec<RunSummary>) -> Vec<SweepPoint> {
    let mut it = summaries.into_iter();
    jobs.iter()
        .map(|j| SweepPoint {
            value: j.value,
            series: j.series.clone(),
            runs: it.by_ref().take(seeds.len()).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown figure `{s}`")))
    }
}

/// Proactiveness levels on the fig3/fig4 axis, with display labels.
pub const PROACTIVENESS: [(f64, &str); 5] = [(0.0, "0"), (1.0 / 12.0, "1/12"), (1.0 / 6.0, "1/6"), (0.25, "1/4"), (1.0 / 3.0, "1/3")];
pub const ZIPF_LEVELS: [f64; 4] = [0.3, 0.6, 0.9, 1.2];
pub const TRAFFIC_MBPS: [f64; 6] = [3.0, 6.0, 9.0, 12.0, 15.0, 18.0];

pub fn with_scheme(base: &ScenarioConfig, scheme: Scheme) -> ScenarioConfig {
    ScenarioConfig {
        scheme,
        ..base.clone()
    }
}

pub fn proposed_at(base: &ScenarioConfig, level: f64) -> ScenarioConfig {
    let mut c = with_scheme(base, Scheme::Proposed);
    c.set_proactiveness(level);
    c
}

/// The four fig2 series at the base configuration.
pub fn scheme_series(base: &ScenarioConfig) -> Vec<(String, ScenarioConfig)> {
    vec![
        ("proposed(1/3)".into(), proposed_at(base, 1.0 / 3.0)),
        ("proposed(1/6)".into(), proposed_at(base, 1.0 / 6.0)),
        ("baseline1".into(), with_scheme(base, Scheme::Baseline1)),
        ("baseline2".into(), with_scheme(base, Scheme::Baseline2)),
    ]
}

#[derive(Debug, Clone, Default)]
pub struct FigureOutput {
    pub summaries: Vec<RunSummary>,
    pub ccdf: Vec<CcdfRow>,
    /// Axis name and rows, for sweep figures.
    pub sweep: Option<(String, Vec<SweepRow>)>,
}

pub fn fig2(base: &ScenarioConfig, seeds: &[u64], threads: Option<usize>) -> Result<FigureOutput> {
    let jobs: Vec<Job> = scheme_series(base)
        .into_iter()
        .map(|(series, config)| Job {
            series,
            value: 0.0,
            config,
        })
        .collect();
    let grid = default_ccdf_grid();
    let out = run_jobs(&jobs, seeds, threads, |job, seed, r| {
        let s = summarize(&r.records, &job.series, r.config.scheme, seed, r.config.delay_threshold_s);
        let c = if r.records.is_empty() {
            Vec::new()
        } else {
            ccdf_rows(&r.records, &grid, &job.series, seed)?
        };
        Ok((s, c))
    })?;
    let (summaries, ccdf): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok(FigureOutput {
        summaries,
        ccdf: ccdf.into_iter().flatten().collect(),
        sweep: None,
    })
}

fn sweep_figure(axis: &str, jobs: Vec<Job>, seeds: &[u64], threads: Option<usize>) -> Result<FigureOutput> {
    let summaries = summarize_jobs(&jobs, seeds, threads)?;
    let points = group_points(&jobs, seeds, summaries.clone());
    Ok(FigureOutput {
        summaries,
        ccdf: Vec::new(),
        sweep: Some((axis.to_string(), sweep(axis, &points)?)),
    })
}

/// Average delay against proactiveness; baselines ride along as flat
/// references and are run once.
pub fn fig3(base: &ScenarioConfig, seeds: &[u64], threads: Option<usize>) -> Result<FigureOutput> {
    let mut jobs: Vec<Job> = PROACTIVENESS
        .iter()
        .map(|&(level, _)| Job {
            series: "proposed".into(),
            value: level,
            config: proposed_at(base, level),
        })
        .collect();
    for scheme in [Scheme::Baseline1, Scheme::Baseline2] {
        jobs.push(Job {
            series: scheme.as_str().into(),
            value: 0.0,
            config: with_scheme(base, scheme),
        });
    }
    let mut out = sweep_figure("proactiveness", jobs, seeds, threads)?;
    if let Some((_, rows)) = out.sweep.as_mut() {
        let refs: Vec<SweepRow> = rows.iter().filter(|r| r.series != "proposed").cloned().collect();
        rows.retain(|r| r.series == "proposed");
        for r in refs {
            for &(level, _) in &PROACTIVENESS {
                rows.push(SweepRow { value: level, ..r.clone() });
            }
        }
    }
    Ok(out)
}

/// Delay and hit rate against proactiveness, one series per Zipf exponent.
pub fn fig4(base: &ScenarioConfig, seeds: &[u64], threads: Option<usize>) -> Result<FigureOutput> {
    let jobs: Vec<Job> = ZIPF_LEVELS
        .iter()
        .flat_map(|&z| {
            PROACTIVENESS.iter().map(move |&(level, _)| {
                let mut config = proposed_at(base, level);
                config.zipf_z = z;
                Job {
                    series: format!("z={z}"),
                    value: level,
                    config,
                }
            })
        })
        .collect();
    sweep_figure("proactiveness", jobs, seeds, threads)
}

/// Average delay against traffic intensity.
pub fn fig5(base: &ScenarioConfig, seeds: &[u64], threads: Option<usize>) -> Result<FigureOutput> {
    let series: Vec<(String, ScenarioConfig)> = vec![
        ("proposed(1/3)".into(), proposed_at(base, 1.0 / 3.0)),
        ("baseline1".into(), with_scheme(base, Scheme::Baseline1)),
        ("baseline2".into(), with_scheme(base, Scheme::Baseline2)),
    ];
    let jobs: Vec<Job> = series
        .iter()
        .flat_map(|(name, cfg)| {
            TRAFFIC_MBPS.iter().map(move |&t| Job {
                series: name.clone(),
                value: t,
                config: ScenarioConfig {
                    traffic_intensity_mbps: t,
                    ..cfg.clone()
                },
            })
        })
        .collect();
    sweep_figure("traffic_mbps", jobs, seeds, threads)
}

pub fn reproduce(figure: Figure, base: &ScenarioConfig, seeds: &[u64], threads: Option<usize>) -> Result<FigureOutput> {
    match figure {
        Figure::Fig2 => fig2(base, seeds, threads),
        Figure::Fig3 => fig3(base, seeds, threads),
        Figure::Fig4 => fig4(base, seeds, threads),
        Figure::Fig5 => fig5(base, seeds, threads),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_names_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.as_str().parse::<Figure>().unwrap(), f);
        }
        assert!("fig9".parse::<Figure>().is_err());
    }

    #[test]
    fn proactiveness_slots() {
        let base = ScenarioConfig::default();
        let slots: Vec<usize> = PROACTIVENESS.iter().map(|&(l, _)| proposed_at(&base, l).storage_slots).collect();
        assert_eq!(slots, vec![0, 3, 5, 8, 10]);
    }
}
