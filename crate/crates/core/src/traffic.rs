//! Constant-bit-rate packet sources.
//!
//! Rates are bytes per second throughout. A source emits its first packet at
//! t = 0 and re-reads its rate after every emission, so a rate change takes
//! effect from the next gap onward.

use crate::error::{Error, Result};
use crate::kernel::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u32,
    pub packet_size: u32,
    /// Bytes per second.
    pub initial_rate: f64,
    /// Bytes per second.
    pub min_subjective_rate: f64,
    pub loss_threshold: f64,
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        if self.packet_size == 0 {
            return Err(Error::InvalidPacketSize(self.packet_size));
        }
        for rate in [self.initial_rate, self.min_subjective_rate] {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::InvalidRate(rate));
            }
        }
        if !(0.0..=1.0).contains(&self.loss_threshold) {
            return Err(Error::config(
                None,
                format!(
                    "user {}: threshold out of range: {}",
                    self.user_id, self.loss_threshold
                ),
            ));
        }
        Ok(())
    }

    pub fn initial_interval(&self) -> Result<SimTime> {
        emission_interval(self.initial_rate, self.packet_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    InQueue,
    Delivered,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub packet_id: u64,
    pub flow_id: u32,
    pub size: u32,
    pub gen_time: SimTime,
    pub deliver_time: Option<SimTime>,
    pub fate: Fate,
}

impl Packet {
    pub fn new(packet_id: u64, flow_id: u32, size: u32, gen_time: SimTime) -> Self {
        Self {
            packet_id,
            flow_id,
            size,
            gen_time,
            deliver_time: None,
            fate: Fate::InQueue,
        }
    }

    pub fn mark_delivered(&mut self, at: SimTime) {
        assert!(at >= self.gen_time, "delivery before generation");
        self.deliver_time = Some(at);
        self.fate = Fate::Delivered;
    }

    pub fn mark_dropped(&mut self) {
        self.deliver_time = None;
        self.fate = Fate::Dropped;
    }

    /// Generation-to-delivery delay, if delivered.
    pub fn delay(&self) -> Option<SimTime> {
        self.deliver_time.map(|d| d - self.gen_time)
    }
}

/// Gap between packets of `packet_size` bytes sent at `rate` B/s, rounded to
/// the nearest microsecond and never below 1 µs.
pub fn emission_interval(rate: f64, packet_size: u32) -> Result<SimTime> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidRate(rate));
    }
    if packet_size == 0 {
        return Err(Error::InvalidPacketSize(packet_size));
    }
    let us = (packet_size as f64 * 1e6 / rate).round();
    Ok(SimTime(if us < 1.0 { 1 } else { us as u64 }))
}

/// Emission state of one CBR flow inside a running simulation.
#[derive(Debug, Clone)]
pub struct CbrSource {
    packet_size: u32,
    rate: f64,
    interval: SimTime,
    horizon: SimTime,
}

impl CbrSource {
    pub fn new(profile: &UserProfile, horizon: SimTime) -> Result<Self> {
        Ok(Self {
            packet_size: profile.packet_size,
            rate: profile.initial_rate,
            interval: profile.initial_interval()?,
            horizon,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn interval(&self) -> SimTime {
        self.interval
    }

    pub fn packet_size(&self) -> u32 {
        self.packet_size
    }

    pub fn set_rate(&mut self, rate: f64) -> Result<()> {
        self.interval = emission_interval(rate, self.packet_size)?;
        self.rate = rate;
        Ok(())
    }

    /// Time of the first emission, if it falls inside the horizon.
    pub fn first_emission(&self) -> Option<SimTime> {
        (SimTime::ZERO < self.horizon).then_some(SimTime::ZERO)
    }

    /// Time of the emission following one at `now`, using the rate in force
    /// right now.
    pub fn next_emission(&self, now: SimTime) -> Option<SimTime> {
        let next = now + self.interval;
        (next < self.horizon).then_some(next)
    }
}

/// Standalone packet stream of one profile up to `horizon`.
///
/// `rate_at` is consulted after every emission with the emission time and
/// returns the rate in force for the following gap.
pub fn generate<F>(profile: &UserProfile, mut rate_at: F, horizon: SimTime) -> Result<Generate<F>>
where
    F: FnMut(SimTime) -> f64,
{
    profile.validate()?;
    let first_rate = rate_at(SimTime::ZERO);
    emission_interval(first_rate, profile.packet_size)?;
    Ok(Generate {
        flow_id: profile.user_id,
        packet_size: profile.packet_size,
        next: (SimTime::ZERO < horizon).then_some(SimTime::ZERO),
        horizon,
        next_id: 0,
        rate_at,
        first_rate: Some(first_rate),
    })
}

pub struct Generate<F> {
    flow_id: u32,
    packet_size: u32,
    next: Option<SimTime>,
    horizon: SimTime,
    next_id: u64,
    rate_at: F,
    first_rate: Option<f64>,
}

impl<F: FnMut(SimTime) -> f64> Iterator for Generate<F> {
    type Item = Packet;

    fn next(&mut self) -> Option<Packet> {
        let now = self.next?;
        let packet = Packet::new(self.next_id, self.flow_id, self.packet_size, now);
        self.next_id += 1;
        let rate = match self.first_rate.take() {
            Some(r) => r,
            None => (self.rate_at)(now),
        };
        let gap = emission_interval(rate, self.packet_size)
            .expect("rate schedule returned an invalid rate");
        let next = now + gap;
        self.next = (next < self.horizon).then_some(next);
        Some(packet)
    }
}
