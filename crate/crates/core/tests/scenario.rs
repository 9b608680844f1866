use wimax_qoe::config::{parse_config, Scheduler};
use wimax_qoe::mac::UNLIMITED_CAPACITY;
use wimax_qoe::scenario::{rates_csv, run_scenario, run_sweep, series_csv, summary_csv};
use wimax_qoe::{ScenarioConfig, SimTime};

fn short(seconds: u64, scheduler: Scheduler) -> ScenarioConfig {
    ScenarioConfig {
        sim_time: SimTime::from_secs(seconds),
        scheduler,
        ..ScenarioConfig::default()
    }
}

#[test]
fn three_user_config_runs_three_flows() {
    let cfg = parse_config(
        r#"
sim_time = 5
scheduler = "qoe"
threshold = 0.2

[[user]]
id = 7
initial_rate = 100000
min_rate = 80000

[[user]]
id = 8
packet_size = 400
initial_rate = 100000
min_rate = 80000

[[user]]
id = 9
initial_rate = 50000
min_rate = 50000
loss_threshold = 0.05
"#,
    )
    .unwrap();
    let run = run_scenario(&cfg).unwrap();
    assert_eq!(run.flow_ids, [7, 8, 9]);
    assert_eq!(run.thresholds, [0.2, 0.2, 0.05]);
    assert_eq!(run.summary.len(), 3);
    assert_eq!(run.series.len(), 3 * 5);
    // 250 kB/s offered against 720 kB/s: nothing lost, nothing changed
    assert_eq!(run.totals().2, 0);
    assert_eq!(run.final_rates, run.initial_rates);
    assert_eq!(run.summary[0].generated, 2500);
    assert_eq!(run.summary[1].generated, 1250);
}

#[test]
fn unlimited_capacity_loses_nothing() {
    for scheduler in [Scheduler::Baseline, Scheduler::Qoe] {
        let mut cfg = short(10, scheduler);
        cfg.frame.uplink_capacity = UNLIMITED_CAPACITY;
        let run = run_scenario(&cfg).unwrap();
        for (m, q) in run.summary.iter().zip(&run.in_queue) {
            assert_eq!(m.dropped, 0, "flow {}", m.flow_id);
            assert_eq!(m.generated, m.delivered + q);
            assert!(*q <= 4, "flow {} left {q} queued", m.flow_id);
        }
        assert_eq!(run.final_rates, run.initial_rates);
    }
}

#[test]
fn zero_capacity_fills_queues_then_drops() {
    let mut cfg = short(4, Scheduler::Baseline);
    cfg.frame.uplink_capacity = 0;
    let run = run_scenario(&cfg).unwrap();
    for (m, q) in run.summary.iter().zip(&run.in_queue) {
        assert_eq!(m.delivered, 0);
        assert_eq!(*q, 50);
        assert_eq!(m.dropped, m.generated - 50);
    }
}

#[test]
fn zero_capacity_drives_qoe_to_minimums() {
    let mut cfg = short(20, Scheduler::Qoe);
    cfg.frame.uplink_capacity = 0;
    let run = run_scenario(&cfg).unwrap();
    assert_eq!(run.final_rates, run.min_rates);
}

#[test]
fn baseline_is_independent_of_thresholds() {
    let mut a = short(6, Scheduler::Baseline);
    let mut b = a.clone();
    a.thresholds = vec![0.1];
    b.thresholds = vec![0.25, 0.5, 0.75];
    b.set_threshold(0.9);
    let ra = run_scenario(&a).unwrap();
    let rb = run_scenario(&b).unwrap();
    assert_eq!(
        summary_csv(std::slice::from_ref(&ra)),
        summary_csv(std::slice::from_ref(&rb))
    );
    assert_eq!(series_csv(&[ra]), series_csv(&[rb]));

    let sa = run_sweep(&a).unwrap();
    let sb = run_sweep(&b).unwrap();
    assert_eq!(summary_csv(&sa[..1]), summary_csv(&sb[..1]));
}

#[test]
fn summary_matches_combined_series() {
    let run = run_scenario(&short(8, Scheduler::Qoe)).unwrap();
    let n = run.flow_ids.len();
    for (i, total) in run.summary.iter().enumerate() {
        let epochs: Vec<_> = run.series.iter().skip(i).step_by(n).collect();
        assert_eq!(epochs.len(), 8);
        assert!(epochs.iter().all(|m| m.flow_id == total.flow_id));
        let sum = |f: fn(&wimax_qoe::metrics::FlowMetrics) -> u64| {
            epochs.iter().map(|m| f(m)).sum::<u64>()
        };
        assert_eq!(sum(|m| m.generated), total.generated);
        assert_eq!(sum(|m| m.delivered), total.delivered);
        assert_eq!(sum(|m| m.dropped), total.dropped);
        assert_eq!(sum(|m| m.bytes_delivered), total.bytes_delivered);

        let weighted_delay: f64 = epochs
            .iter()
            .map(|m| m.mean_delay * m.delivered as f64)
            .sum();
        let delay = weighted_delay / total.delivered as f64;
        assert!(
            (delay - total.mean_delay).abs() < 1e-9,
            "{delay} vs {}",
            total.mean_delay
        );
        let samples = sum(|m| m.jitter_samples);
        assert_eq!(samples, total.jitter_samples);
        let weighted_jitter: f64 = epochs
            .iter()
            .map(|m| m.mean_jitter * m.jitter_samples as f64)
            .sum();
        assert!((weighted_jitter / samples as f64 - total.mean_jitter).abs() < 1e-9);
    }
}

#[test]
fn throughput_never_exceeds_offered_load() {
    for scheduler in [Scheduler::Baseline, Scheduler::Qoe] {
        let mut cfg = short(10, scheduler);
        cfg.frame.uplink_capacity = UNLIMITED_CAPACITY;
        let run = run_scenario(&cfg).unwrap();
        for m in &run.series {
            let i = run.flow_ids.iter().position(|&f| f == m.flow_id).unwrap();
            let window = (m.window_end - m.window_start).as_secs_f64();
            // deliveries trail generation by at most one frame
            let per_frame = (run.initial_rates[i] * 0.005 / 200.0).ceil() + 1.0;
            let bound = run.initial_rates[i] + per_frame * 200.0 / window;
            assert!(
                m.throughput <= bound,
                "flow {} epoch {:?}: {}",
                m.flow_id,
                m.epoch,
                m.throughput
            );
        }
    }
}

#[test]
fn aggregate_delivery_respects_capacity() {
    let run = run_scenario(&short(10, Scheduler::Baseline)).unwrap();
    let bytes: u64 = run.summary.iter().map(|m| m.bytes_delivered).sum();
    assert!(bytes as f64 <= 720_000.0 * 10.0);
}

#[test]
fn rates_csv_lists_each_decision() {
    let run = run_scenario(&short(5, Scheduler::Qoe)).unwrap();
    assert_eq!(run.rate_history.len(), 5);
    let text = String::from_utf8(rates_csv(&[run])).unwrap();
    assert_eq!(text.lines().count(), 1 + 5 * 5);
    assert!(text.lines().nth(1).unwrap().starts_with("qoe,10.0,1,0,"));

    let base = run_scenario(&short(5, Scheduler::Baseline)).unwrap();
    assert_eq!(
        String::from_utf8(rates_csv(&[base]))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn events_are_accounted() {
    let run = run_scenario(&short(2, Scheduler::Baseline)).unwrap();
    // 2 s: 1334 + 2000 * 3 + 1334 arrivals, 400 frames, one end marker
    assert_eq!(run.packet_arrivals, 8668);
    assert_eq!(run.frames, 400);
    assert_eq!(run.events_processed, 8668 + 400 + 1);
}
