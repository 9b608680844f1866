//! Per-flow QoS statistics: throughput, loss rate, mean delay and mean
//! jitter, both per controller epoch and over the whole run.
//!
//! Delay is generation to delivery. Jitter defaults to the mean absolute
//! difference between the delays of consecutively delivered packets of a
//! flow; the RFC 3550 interarrival estimator is available for comparison.
//! A delivery pair belongs to the window of its later packet.

use std::io::{self, Write};

use crate::kernel::SimTime;
use crate::traffic::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JitterMode {
    #[default]
    MeanAbsolute,
    Rfc3550,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowMetrics {
    pub flow_id: u32,
    /// `None` for whole-run rows.
    pub epoch: Option<u32>,
    pub window_start: SimTime,
    pub window_end: SimTime,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub bytes_delivered: u64,
    /// Bytes per second.
    pub throughput: f64,
    pub loss_rate: f64,
    /// Seconds.
    pub mean_delay: f64,
    /// Seconds.
    pub mean_jitter: f64,
    /// Number of delay differences behind `mean_jitter`.
    pub jitter_samples: u64,
}

/// Mean absolute difference of consecutive delays; 0 with fewer than two.
pub fn mean_jitter(delays: &[f64]) -> f64 {
    if delays.len() < 2 {
        return 0.0;
    }
    let sum: f64 = delays.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    sum / (delays.len() - 1) as f64
}

#[derive(Debug, Clone, Default)]
struct Accum {
    generated: u64,
    delivered: u64,
    dropped: u64,
    bytes: u64,
    delay_sum_us: f64,
    jitter_sum_us: f64,
    jitter_samples: u64,
}

#[derive(Debug, Clone, Default)]
struct FlowTrack {
    last_delay_us: Option<f64>,
    rfc_jitter_us: f64,
    total: Accum,
    epochs: Vec<Accum>,
}

const GENERATED: u8 = 1;
const DELIVERED: u8 = 2;
const DROPPED: u8 = 4;

#[derive(Debug, Clone)]
pub struct MetricsCollector {
    flow_ids: Vec<u32>,
    flows: Vec<FlowTrack>,
    epoch_len: SimTime,
    end: SimTime,
    jitter_mode: JitterMode,
    seen: Vec<u8>,
}

impl MetricsCollector {
    pub fn new(
        flow_ids: &[u32],
        epoch_len: SimTime,
        end: SimTime,
        jitter_mode: JitterMode,
    ) -> Self {
        assert!(epoch_len > SimTime::ZERO, "epoch length must be positive");
        let epochs = end.as_micros().div_ceil(epoch_len.as_micros()).max(1) as usize;
        Self {
            flow_ids: flow_ids.to_vec(),
            flows: vec![
                FlowTrack {
                    epochs: vec![Accum::default(); epochs],
                    ..Default::default()
                };
                flow_ids.len()
            ],
            epoch_len,
            end,
            jitter_mode,
            seen: Vec::new(),
        }
    }

    pub fn epoch_count(&self) -> usize {
        self.flows.first().map_or(0, |f| f.epochs.len())
    }

    fn epoch_of(&self, t: SimTime) -> usize {
        let e = (t.as_micros() / self.epoch_len.as_micros()) as usize;
        e.min(self.epoch_count() - 1)
    }

    fn flow_index(&self, flow_id: u32) -> usize {
        self.flow_ids
            .iter()
            .position(|&f| f == flow_id)
            .unwrap_or_else(|| panic!("unknown flow {flow_id}"))
    }

    fn mark(&mut self, packet: &Packet, flag: u8, what: &str) {
        let idx = packet.packet_id as usize;
        if idx >= self.seen.len() {
            self.seen.resize((idx + 1).next_power_of_two(), 0);
        }
        assert!(
            self.seen[idx] & flag == 0,
            "packet {} recorded twice as {what}",
            packet.packet_id
        );
        self.seen[idx] |= flag;
    }

    fn slot(&mut self, flow_id: u32, packet: &Packet, at: SimTime) -> (usize, usize) {
        assert_eq!(
            packet.flow_id, flow_id,
            "packet {} is not from flow {flow_id}",
            packet.packet_id
        );
        (self.flow_index(flow_id), self.epoch_of(at))
    }

    pub fn record_generation(&mut self, flow_id: u32, packet: &Packet) {
        self.mark(packet, GENERATED, "generated");
        let (f, e) = self.slot(flow_id, packet, packet.gen_time);
        let track = &mut self.flows[f];
        track.total.generated += 1;
        track.epochs[e].generated += 1;
    }

    /// Drops are attributed to the generation time, which is when drop-tail
    /// discards them.
    pub fn record_drop(&mut self, flow_id: u32, packet: &Packet) {
        self.mark(packet, DROPPED, "dropped");
        let (f, e) = self.slot(flow_id, packet, packet.gen_time);
        let track = &mut self.flows[f];
        track.total.dropped += 1;
        track.epochs[e].dropped += 1;
    }

    pub fn record_delivery(&mut self, flow_id: u32, packet: &Packet) {
        let at = packet
            .deliver_time
            .unwrap_or_else(|| panic!("packet {} has no delivery time", packet.packet_id));
        self.mark(packet, DELIVERED, "delivered");
        let (f, e) = self.slot(flow_id, packet, at);
        let mode = self.jitter_mode;
        let track = &mut self.flows[f];
        let delay = (at - packet.gen_time).as_micros() as f64;

        let jitter = track.last_delay_us.map(|prev| {
            let diff = (delay - prev).abs();
            match mode {
                JitterMode::MeanAbsolute => diff,
                JitterMode::Rfc3550 => {
                    track.rfc_jitter_us += (diff - track.rfc_jitter_us) / 16.0;
                    track.rfc_jitter_us
                }
            }
        });
        track.last_delay_us = Some(delay);

        for acc in [&mut track.total, &mut track.epochs[e]] {
            acc.delivered += 1;
            acc.bytes += packet.size as u64;
            acc.delay_sum_us += delay;
            if let Some(j) = jitter {
                acc.jitter_sum_us += j;
                acc.jitter_samples += 1;
            }
        }
    }

    fn build(
        &self,
        f: usize,
        epoch: Option<u32>,
        acc: &Accum,
        start: SimTime,
        end: SimTime,
    ) -> FlowMetrics {
        let secs = (end - start).as_secs_f64();
        FlowMetrics {
            flow_id: self.flow_ids[f],
            epoch,
            window_start: start,
            window_end: end,
            generated: acc.generated,
            delivered: acc.delivered,
            dropped: acc.dropped,
            bytes_delivered: acc.bytes,
            throughput: if secs > 0.0 {
                acc.bytes as f64 / secs
            } else {
                0.0
            },
            loss_rate: if acc.generated > 0 {
                acc.dropped as f64 / acc.generated as f64
            } else {
                0.0
            },
            mean_delay: if acc.delivered > 0 {
                acc.delay_sum_us / acc.delivered as f64 / 1e6
            } else {
                0.0
            },
            mean_jitter: if acc.jitter_samples > 0 {
                acc.jitter_sum_us / acc.jitter_samples as f64 / 1e6
            } else {
                0.0
            },
            jitter_samples: acc.jitter_samples,
        }
    }

    /// Whole-run rows (one per flow) over `[0, end]`.
    pub fn summary(&self) -> Vec<FlowMetrics> {
        (0..self.flows.len())
            .map(|f| self.build(f, None, &self.flows[f].total, SimTime::ZERO, self.end))
            .collect()
    }

    /// Per-epoch rows, epoch-major then flow order.
    pub fn series(&self) -> Vec<FlowMetrics> {
        let mut rows = Vec::with_capacity(self.epoch_count() * self.flows.len());
        for e in 0..self.epoch_count() {
            let start = SimTime(e as u64 * self.epoch_len.as_micros());
            let end =
                SimTime(((e as u64 + 1) * self.epoch_len.as_micros()).min(self.end.as_micros()));
            for f in 0..self.flows.len() {
                rows.push(self.build(f, Some(e as u32), &self.flows[f].epochs[e], start, end));
            }
        }
        rows
    }
}

pub const SERIES_HEADER: &str = "scheduler,threshold_pct,flow_id,epoch,generated,delivered,dropped,bytes_delivered,throughput_bps,loss_rate,mean_delay_s,mean_jitter_s";
pub const SUMMARY_HEADER: &str = "scheduler,threshold_pct,flow_id,generated,delivered,dropped,bytes_delivered,throughput_bps,loss_rate,mean_delay_s,mean_jitter_s";

/// One CSV row body. `threshold` is a fraction; baseline rows leave the
/// column empty.
pub fn write_row<W: Write>(
    w: &mut W,
    scheduler: &str,
    threshold: Option<f64>,
    m: &FlowMetrics,
) -> io::Result<()> {
    write!(w, "{scheduler},")?;
    if let Some(t) = threshold {
        write!(w, "{:.1}", t * 100.0)?;
    }
    write!(w, ",{}", m.flow_id)?;
    if let Some(e) = m.epoch {
        write!(w, ",{e}")?;
    }
    writeln!(
        w,
        ",{},{},{},{},{:.3},{:.6},{:.9},{:.9}",
        m.generated,
        m.delivered,
        m.dropped,
        m.bytes_delivered,
        m.throughput,
        m.loss_rate,
        m.mean_delay,
        m.mean_jitter
    )
}
