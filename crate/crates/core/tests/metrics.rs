use fogsim::metrics::{
    ccdf, ccdf_rows, default_ccdf_grid, hit_rate, read_csv, read_request_log, summarize, sweep, write_ccdf, write_request_log, write_summaries,
    write_sweep, RunSummary, SweepPoint, SweepRow, CCDF_HEADER, REQUEST_LOG_HEADER, SUMMARY_HEADER, SWEEP_HEADER,
};
use fogsim::model::ServedBy;
use fogsim::{RequestRecord, Scheme};
use proptest::prelude::*;

fn arb_record() -> impl Strategy<Value = RequestRecord> {
    (0u64..1000, 0usize..50, 0usize..90, 0u8..3, 0usize..30, any::<bool>(), 0.0..2.0f64, 0.0..0.01f64, 0.0..0.1f64, 0.0..1e-3f64).prop_map(
        |(slot, un, task, kind, e, cacheable, tx, comp, wait, proc_)| {
            let served_by = match kind {
                0 => ServedBy::Local,
                1 => ServedBy::Cloudlet(e),
                _ => ServedBy::Cache(e),
            };
            let hit = cacheable && matches!(served_by, ServedBy::Cache(_));
            RequestRecord {
                slot,
                un,
                task,
                scheme: Scheme::Proposed,
                served_by,
                cacheable: cacheable || hit,
                hit,
                transmit_s: tx,
                compute_s: comp,
                queue_wait_s: wait,
                processing_s: proc_,
                total_s: tx + comp + wait + proc_,
            }
        },
    )
}

fn records() -> impl Strategy<Value = Vec<RequestRecord>> {
    prop::collection::vec(arb_record(), 1..200)
}

proptest! {
    #[test]
    fn ccdf_monotone_and_bounded(samples in prop::collection::vec(0.0..20.0f64, 1..300)) {
        let c = ccdf(&samples, &default_ccdf_grid()).unwrap();
        prop_assert!(c.iter().all(|&(_, p)| (0.0..=1.0).contains(&p)));
        prop_assert!(c.windows(2).all(|w| w[1].1 <= w[0].1));
        for &(d, p) in &c {
            let direct = samples.iter().filter(|&&x| x > d).count() as f64 / samples.len() as f64;
            prop_assert_eq!(p, direct);
        }
    }

    #[test]
    fn summary_ignores_record_order(mut recs in records(), rot in 0usize..200) {
        let a = summarize(&recs, "x", Scheme::Proposed, 1, 1.0);
        let k = rot % recs.len();
        recs.rotate_left(k);
        recs.reverse();
        prop_assert_eq!(a, summarize(&recs, "x", Scheme::Proposed, 1, 1.0));
    }

    #[test]
    fn summary_counts_and_rates(recs in records(), d_th in 0.01..2.0f64) {
        let s = summarize(&recs, "x", Scheme::Proposed, 1, d_th);
        prop_assert_eq!(s.measured, recs.len() as u64);
        prop_assert_eq!(s.local + s.offloaded + s.cache_served, s.measured);
        if let Some(h) = hit_rate(&recs) {
            prop_assert!((0.0..=1.0).contains(&h));
        }
        // Second, independent pass over the offloaded subset.
        let mut off = 0usize;
        let mut bad = 0usize;
        for r in &recs {
            if let ServedBy::Cloudlet(_) = r.served_by {
                off += 1;
                if r.total_s >= d_th {
                    bad += 1;
                }
            }
        }
        let expect = (off > 0).then(|| bad as f64 / off as f64);
        prop_assert_eq!(s.violation_rate, expect);
    }

    #[test]
    fn request_log_round_trips(recs in records()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        write_request_log(&p, &recs).unwrap();
        prop_assert_eq!(read_request_log(&p).unwrap(), recs);
    }
}

#[test]
fn summary_csv_round_trips_with_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("summary.csv");
    let local_only = RequestRecord {
        slot: 1,
        un: 0,
        task: 0,
        scheme: Scheme::Baseline2,
        served_by: ServedBy::Local,
        cacheable: false,
        hit: false,
        transmit_s: 0.0,
        compute_s: 0.01,
        queue_wait_s: 0.0,
        processing_s: 0.0,
        total_s: 0.01,
    };
    let s = summarize(&[local_only], "b2", Scheme::Baseline2, 3, 1.0);
    assert_eq!(s.violation_rate, None);
    assert_eq!(s.cache_hit_rate, None);
    write_summaries(&p, &[s.clone()]).unwrap();
    let back: Vec<RunSummary> = read_csv(&p, &SUMMARY_HEADER).unwrap();
    assert_eq!(back, vec![s]);
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next().unwrap(), SUMMARY_HEADER.join(","));
    assert!(text.contains(",baseline2,"));
}

#[test]
fn permuted_header_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("log.csv");
    let mut header = REQUEST_LOG_HEADER;
    header.swap(0, 1);
    std::fs::write(&p, format!("{}\n", header.join(","))).unwrap();
    assert!(read_request_log(&p).is_err());
}

#[test]
fn headers_written_for_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("ccdf.csv");
    let s = dir.path().join("sweep.csv");
    write_ccdf(&c, &[]).unwrap();
    write_sweep(&s, &[]).unwrap();
    assert_eq!(std::fs::read_to_string(&c).unwrap().trim(), CCDF_HEADER.join(","));
    assert_eq!(std::fs::read_to_string(&s).unwrap().trim(), SWEEP_HEADER.join(","));
}

#[test]
fn ccdf_rows_tag_series_and_seed() {
    let recs: Vec<RequestRecord> = (0..4)
        .map(|i| RequestRecord {
            slot: i,
            un: 0,
            task: 0,
            scheme: Scheme::Proposed,
            served_by: ServedBy::Local,
            cacheable: false,
            hit: false,
            transmit_s: 0.0,
            compute_s: 0.0,
            queue_wait_s: 0.0,
            processing_s: 0.0,
            total_s: 0.1 * (i + 1) as f64,
        })
        .collect();
    let rows = ccdf_rows(&recs, &[0.05, 0.25, 1.0], "proposed(1/3)", 2).unwrap();
    let probs: Vec<f64> = rows.iter().map(|r| r.probability).collect();
    assert_eq!(probs, vec![1.0, 0.5, 0.0]);
    assert!(rows.iter().all(|r| r.scheme == "proposed(1/3)" && r.seed == 2));
}

#[test]
fn sweep_aggregates_and_rejects_ragged_points() {
    let mk = |seed: u64, d: f64| {
        let r = RequestRecord {
            slot: 0,
            un: 0,
            task: 0,
            scheme: Scheme::Baseline1,
            served_by: ServedBy::Cloudlet(0),
            cacheable: false,
            hit: false,
            transmit_s: d,
            compute_s: 0.0,
            queue_wait_s: 0.0,
            processing_s: 0.0,
            total_s: d,
        };
        summarize(&[r], "b1", Scheme::Baseline1, seed, 1.0)
    };
    let points = vec![SweepPoint {
        value: 3.0,
        series: "baseline1".into(),
        runs: vec![mk(1, 0.5), mk(2, 1.5)],
    }];
    let rows: Vec<SweepRow> = sweep("traffic_mbps", &points).unwrap();
    assert_eq!(rows[0].avg_total_delay_s_mean, Some(1.0));
    assert!((rows[0].avg_total_delay_s_std.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(rows[0].violation_rate_mean, Some(0.5));
    assert_eq!(rows[0].cache_hit_rate_mean, None);
    let ragged = vec![
        points[0].clone(),
        SweepPoint {
            value: 6.0,
            series: "baseline1".into(),
            runs: vec![mk(1, 1.0)],
        },
    ];
    assert!(sweep("traffic_mbps", &ragged).is_err());
    assert!(ccdf(&[], &[1.0]).is_err());
}
