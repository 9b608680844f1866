//! Deterministic discrete-event kernel.
//!
//! Events are ordered by `(fire_time, sequence)`, where `sequence` is the
//! insertion counter, so simultaneous events fire in the order they were
//! scheduled. The kernel owns the virtual clock; handlers observe it through
//! [`Kernel::now`] and schedule follow-up events through [`Kernel::schedule`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

/// Simulation timestamp in whole microseconds since the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond. Negative or non-finite input is a
    /// caller bug.
    pub fn from_secs_f64(s: f64) -> Self {
        assert!(s.is_finite() && s >= 0.0, "invalid time {s} s");
        SimTime((s * 1e6).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_add(rhs.0).expect("SimTime overflow"))
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("SimTime underflow"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}s", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// Event payloads used by the cell simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Index of the flow whose source emits a packet.
    PacketArrival(usize),
    FrameBoundary,
    ControllerEpoch,
    SimulationEnd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event<P = EventKind> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub kind: P,
}

// Min-heap adapter over BinaryHeap.
struct Entry<P>(Event<P>);

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_time, other.0.sequence).cmp(&(self.0.fire_time, self.0.sequence))
    }
}

pub struct Kernel<P = EventKind> {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Entry<P>>,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Queues `kind` to fire at `at`.
    ///
    /// Panics if `at` lies before the current clock.
    pub fn schedule(&mut self, at: SimTime, kind: P) {
        assert!(
            at >= self.now,
            "event scheduled in the past: fire_time {at} < clock {}",
            self.now
        );
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Entry(Event {
            fire_time: at,
            sequence,
            kind,
        }));
    }

    /// Processes every queued event with `fire_time <= end` in order, then
    /// sets the clock to `end`. Returns the number of events processed.
    pub fn run_until<H>(&mut self, end: SimTime, mut handler: H) -> u64
    where
        H: FnMut(&mut Kernel<P>, Event<P>),
    {
        let mut processed = 0;
        while self.queue.peek().is_some_and(|e| e.0.fire_time <= end) {
            let Entry(event) = self.queue.pop().expect("peeked");
            debug_assert!(event.fire_time >= self.now);
            self.now = event.fire_time;
            handler(self, event);
            processed += 1;
        }
        self.now = self.now.max(end);
        processed
    }
}
