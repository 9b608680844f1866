//! Scenario assembly and execution: one cell run per scheduler variant, and
//! the baseline-versus-QoE threshold sweep.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::thread;

use crate::config::{ScenarioConfig, Scheduler};
use crate::controller::{EpochCounters, QoeController};
use crate::error::{Error, Result};
use crate::kernel::{Event, EventKind, Kernel, SimTime};
use crate::mac::{allocate_grants, frame_demand, serve_frame, ConnectionQueue, EnqueueOutcome};
use crate::metrics::{write_row, FlowMetrics, MetricsCollector, SERIES_HEADER, SUMMARY_HEADER};
use crate::traffic::{CbrSource, Packet};

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scheduler: Scheduler,
    pub flow_ids: Vec<u32>,
    /// Per-flow loss thresholds the controller used.
    pub thresholds: Vec<f64>,
    pub min_rates: Vec<f64>,
    pub initial_rates: Vec<f64>,
    pub summary: Vec<FlowMetrics>,
    pub series: Vec<FlowMetrics>,
    /// Packets still queued when the run ended.
    pub in_queue: Vec<u64>,
    /// Rates installed when the run ended.
    pub final_rates: Vec<f64>,
    /// Rates installed at each controller epoch, one row per epoch.
    pub rate_history: Vec<Vec<f64>>,
    pub events_processed: u64,
    pub packet_arrivals: u64,
    pub frames: u64,
}

impl RunOutput {
    /// Threshold column for flow `i`: baseline rows have none.
    pub fn threshold_label(&self, i: usize) -> Option<f64> {
        match self.scheduler {
            Scheduler::Baseline => None,
            Scheduler::Qoe => Some(self.thresholds[i]),
        }
    }

    /// Aggregate over all flows: (generated, delivered, dropped).
    pub fn totals(&self) -> (u64, u64, u64) {
        self.summary.iter().fold((0, 0, 0), |(g, d, x), m| {
            (g + m.generated, d + m.delivered, x + m.dropped)
        })
    }

    pub fn aggregate_loss_rate(&self) -> f64 {
        let (g, _, x) = self.totals();
        if g == 0 {
            0.0
        } else {
            x as f64 / g as f64
        }
    }

    /// Delivery-weighted mean delay over all flows, seconds.
    pub fn aggregate_mean_delay(&self) -> f64 {
        let (_, d, _) = self.totals();
        if d == 0 {
            return 0.0;
        }
        self.summary
            .iter()
            .map(|m| m.mean_delay * m.delivered as f64)
            .sum::<f64>()
            / d as f64
    }

    /// Sample-weighted mean jitter over all flows, seconds.
    pub fn aggregate_mean_jitter(&self) -> f64 {
        let n: u64 = self.summary.iter().map(|m| m.jitter_samples).sum();
        if n == 0 {
            return 0.0;
        }
        self.summary
            .iter()
            .map(|m| m.mean_jitter * m.jitter_samples as f64)
            .sum::<f64>()
            / n as f64
    }
}

struct Cell<'a> {
    config: &'a ScenarioConfig,
    flow_ids: Vec<u32>,
    sources: Vec<CbrSource>,
    queues: Vec<ConnectionQueue>,
    controller: Option<QoeController>,
    metrics: MetricsCollector,
    epoch_marks: Vec<(u64, u64)>,
    rate_history: Vec<Vec<f64>>,
    next_packet_id: u64,
    arrivals: u64,
    frames: u64,
}

impl Cell<'_> {
    fn handle(&mut self, kernel: &mut Kernel, event: Event) {
        let now = kernel.now();
        match event.kind {
            EventKind::PacketArrival(i) => self.on_arrival(kernel, i, now),
            EventKind::FrameBoundary => self.on_frame(kernel, now),
            EventKind::ControllerEpoch => self.on_epoch(kernel, now),
            EventKind::SimulationEnd => {}
        }
    }

    fn on_arrival(&mut self, kernel: &mut Kernel, i: usize, now: SimTime) {
        let flow_id = self.flow_ids[i];
        let packet = Packet::new(
            self.next_packet_id,
            flow_id,
            self.sources[i].packet_size(),
            now,
        );
        self.next_packet_id += 1;
        self.arrivals += 1;
        self.metrics.record_generation(flow_id, &packet);
        if let EnqueueOutcome::DroppedTail(dropped) = self.queues[i].enqueue(packet) {
            self.metrics.record_drop(flow_id, &dropped);
        }
        if let Some(next) = self.sources[i].next_emission(now) {
            kernel.schedule(next, EventKind::PacketArrival(i));
        }
    }

    fn on_frame(&mut self, kernel: &mut Kernel, now: SimTime) {
        let frame = &self.config.frame;
        let demands: Vec<(u32, u64)> = self
            .flow_ids
            .iter()
            .zip(&self.sources)
            .map(|(&f, s)| (f, frame_demand(s.rate(), frame.frame_duration)))
            .collect();
        let grants = allocate_grants(&demands, frame.uplink_capacity);
        for (queue, grant) in self.queues.iter_mut().zip(grants) {
            for packet in serve_frame(queue, grant, now) {
                self.metrics.record_delivery(grant.flow_id, &packet);
            }
        }
        self.frames += 1;
        let next = now + frame.frame_duration;
        if next <= self.config.sim_time {
            kernel.schedule(next, EventKind::FrameBoundary);
        }
    }

    fn on_epoch(&mut self, kernel: &mut Kernel, now: SimTime) {
        let Some(controller) = self.controller.as_mut() else {
            return;
        };
        let counters: Vec<EpochCounters> = self
            .queues
            .iter()
            .zip(self.epoch_marks.iter_mut())
            .map(|(q, mark)| {
                let c = EpochCounters {
                    sent: q.enqueued_count() - mark.0,
                    lost: q.dropped_count() - mark.1,
                };
                *mark = (q.enqueued_count(), q.dropped_count());
                c
            })
            .collect();
        let rates = controller.on_epoch(now, &counters);
        for (source, &rate) in self.sources.iter_mut().zip(&rates) {
            source
                .set_rate(rate)
                .expect("controller rates stay positive");
        }
        self.rate_history.push(rates);
        let next = now + self.config.epoch;
        if next <= self.config.sim_time {
            kernel.schedule(next, EventKind::ControllerEpoch);
        }
    }
}

/// Runs `config` with `config.scheduler`, each user keeping its own loss
/// threshold.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    config.validate()?;
    let end = config.sim_time;
    let flow_ids: Vec<u32> = config.users.iter().map(|u| u.user_id).collect();
    let sources = config
        .users
        .iter()
        .map(|u| CbrSource::new(u, end))
        .collect::<Result<Vec<_>>>()?;
    let queues = flow_ids
        .iter()
        .map(|&f| ConnectionQueue::new(f, config.frame.per_flow_queue_limit))
        .collect();
    let controller = match config.scheduler {
        Scheduler::Baseline => None,
        Scheduler::Qoe => Some(QoeController::new(
            &config.users,
            config.decrease_factor,
            config.increase_step,
        )),
    };
    let mut cell = Cell {
        config,
        metrics: MetricsCollector::new(&flow_ids, config.epoch, end, config.jitter),
        epoch_marks: vec![(0, 0); flow_ids.len()],
        flow_ids,
        sources,
        queues,
        controller,
        rate_history: Vec::new(),
        next_packet_id: 0,
        arrivals: 0,
        frames: 0,
    };

    let mut kernel = Kernel::new();
    for (i, source) in cell.sources.iter().enumerate() {
        if let Some(t) = source.first_emission() {
            kernel.schedule(t, EventKind::PacketArrival(i));
        }
    }
    if config.frame.frame_duration <= end {
        kernel.schedule(config.frame.frame_duration, EventKind::FrameBoundary);
    }
    if cell.controller.is_some() && config.epoch <= end {
        kernel.schedule(config.epoch, EventKind::ControllerEpoch);
    }
    kernel.schedule(end, EventKind::SimulationEnd);

    let events_processed = kernel.run_until(end, |k, e| cell.handle(k, e));

    Ok(RunOutput {
        scheduler: config.scheduler,
        thresholds: config.users.iter().map(|u| u.loss_threshold).collect(),
        min_rates: config.users.iter().map(|u| u.min_subjective_rate).collect(),
        initial_rates: config.users.iter().map(|u| u.initial_rate).collect(),
        summary: cell.metrics.summary(),
        series: cell.metrics.series(),
        in_queue: cell.queues.iter().map(|q| q.len() as u64).collect(),
        final_rates: cell.sources.iter().map(|s| s.rate()).collect(),
        rate_history: cell.rate_history,
        events_processed,
        packet_arrivals: cell.arrivals,
        frames: cell.frames,
        flow_ids: cell.flow_ids,
    })
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub scheduler: Scheduler,
    pub threshold: Option<f64>,
}

impl Variant {
    pub fn label(&self) -> String {
        match self.threshold {
            Some(t) => format!("{}@{:.0}%", self.scheduler, t * 100.0),
            None => self.scheduler.to_string(),
        }
    }
}

/// Baseline first, then QoE at each configured threshold.
pub fn sweep_variants(config: &ScenarioConfig) -> Vec<Variant> {
    std::iter::once(Variant {
        scheduler: Scheduler::Baseline,
        threshold: None,
    })
    .chain(config.thresholds.iter().map(|&t| Variant {
        scheduler: Scheduler::Qoe,
        threshold: Some(t),
    }))
    .collect()
}

pub fn variant_config(config: &ScenarioConfig, variant: Variant) -> ScenarioConfig {
    let mut cfg = config.clone();
    cfg.scheduler = variant.scheduler;
    if let Some(t) = variant.threshold {
        cfg.set_threshold(t);
    }
    cfg
}

/// Runs every sweep variant on its own thread; results come back in
/// variant order.
pub fn run_sweep(config: &ScenarioConfig) -> Result<Vec<RunOutput>> {
    config.validate()?;
    let configs: Vec<ScenarioConfig> = sweep_variants(config)
        .into_iter()
        .map(|v| variant_config(config, v))
        .collect();
    thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| scope.spawn(move || run_scenario(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

pub fn summary_csv(runs: &[RunOutput]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{SUMMARY_HEADER}").expect("write to Vec");
    for run in runs {
        for (i, m) in run.summary.iter().enumerate() {
            write_row(&mut out, run.scheduler.as_str(), run.threshold_label(i), m)
                .expect("write to Vec");
        }
    }
    out
}

pub fn series_csv(runs: &[RunOutput]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{SERIES_HEADER}").expect("write to Vec");
    let n = runs.first().map_or(0, |r| r.flow_ids.len());
    for run in runs {
        for (k, m) in run.series.iter().enumerate() {
            write_row(
                &mut out,
                run.scheduler.as_str(),
                run.threshold_label(k % n.max(1)),
                m,
            )
            .expect("write to Vec");
        }
    }
    out
}

pub const RATES_HEADER: &str = "scheduler,threshold_pct,flow_id,epoch,rate_bps";

/// Installed rate after every controller decision. Baseline runs make no
/// decisions and contribute no rows.
pub fn rates_csv(runs: &[RunOutput]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{RATES_HEADER}").expect("write to Vec");
    for run in runs {
        for (epoch, rates) in run.rate_history.iter().enumerate() {
            for (i, rate) in rates.iter().enumerate() {
                let t = run
                    .threshold_label(i)
                    .map(|t| format!("{:.1}", t * 100.0))
                    .unwrap_or_default();
                writeln!(
                    out,
                    "{},{t},{},{epoch},{rate:.3}",
                    run.scheduler, run.flow_ids[i]
                )
                .expect("write to Vec");
            }
        }
    }
    out
}

/// Writes `summary.csv`, `series.csv` and `rates.csv` into `dir`.
pub fn write_outputs(dir: &Path, runs: &[RunOutput]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in [
        ("summary.csv", summary_csv(runs)),
        ("series.csv", series_csv(runs)),
        ("rates.csv", rates_csv(runs)),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
