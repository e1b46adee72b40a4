//! Deterministic discrete-event engine.
//!
//! The clock is an integer count of nanoseconds. Events are dispatched in
//! `(fire_at, seq)` order where `seq` is a per-scheduler insertion counter,
//! so two events due at the same instant always fire in the order they were
//! scheduled.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Simulation time in nanoseconds since the start of the run.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    /// Rounds to the nearest nanosecond. Negative or NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            SimTime(0)
        } else {
            SimTime((s * 1e9).round() as u64)
        }
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, other: SimTime) -> Duration {
        self.0.saturating_sub(other.0)
    }
}

/// Durations are plain nanosecond counts.
pub type Duration = u64;

impl Add<Duration> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: Duration) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = Duration;
    fn sub(self, rhs: SimTime) -> Duration {
        debug_assert!(self.0 >= rhs.0, "negative duration {} - {}", self.0, rhs.0);
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}us", self.as_micros_f64())
    }
}

/// Handle returned by [`Scheduler::schedule`]; used to cancel a pending event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(self) -> u64 {
        self.0
    }
}

struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Ordered event queue plus the simulation clock.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    pending: HashSet<u64>,
    scheduled: u64,
    cancelled: u64,
    dispatched: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
            scheduled: 0,
            cancelled: 0,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Queues `payload` for dispatch at `fire_at`.
    ///
    /// Scheduling into the past is a bug in the caller and panics.
    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> EventHandle {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: fire_at={} now={}",
            fire_at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            fire_at,
            seq,
            payload,
        });
        self.pending.insert(seq);
        self.scheduled += 1;
        EventHandle(seq)
    }

    pub fn schedule_in(&mut self, delay: Duration, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload)
    }

    /// Returns true iff the event was still pending. Idempotent.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        let removed = self.pending.remove(&handle.0);
        if removed {
            self.cancelled += 1;
        }
        removed
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains(&handle.0)
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn scheduled_count(&self) -> u64 {
        self.scheduled
    }

    pub fn cancelled_count(&self) -> u64 {
        self.cancelled
    }

    pub fn dispatched_count(&self) -> u64 {
        self.dispatched
    }

    /// Pops the next live event due at or before `limit`, advancing the clock.
    fn pop_due(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        while let Some(top) = self.heap.peek() {
            if top.fire_at > limit {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if !self.pending.remove(&entry.seq) {
                // cancelled
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            self.dispatched += 1;
            return Some((entry.fire_at, entry.payload));
        }
        None
    }

    /// Dispatches every event with `fire_at <= t_end`, including events
    /// scheduled by handlers during the run, then sets the clock to `t_end`.
    /// Returns the number of events dispatched.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Scheduler<E>, E),
    {
        assert!(
            t_end >= self.now,
            "run_until into the past: t_end={} now={}",
            t_end,
            self.now
        );
        let mut processed = 0;
        while let Some((_, payload)) = self.pop_due(t_end) {
            handler(self, payload);
            processed += 1;
        }
        self.now = t_end;
        processed
    }
}

/// Identifies one independent random stream within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId(pub u64);

impl StreamId {
    /// Stream of the traffic source of `bss`.
    pub fn traffic(bss: usize) -> Self {
        StreamId((bss as u64) << 8)
    }

    /// Stream of the DCF entity of `link` on `bss`.
    pub fn dcf(bss: usize, link: usize) -> Self {
        StreamId(((bss as u64) << 8) | (1 + link as u64))
    }
}

/// A seeded, platform-independent random stream.
///
/// The same `(seed, stream)` pair produces the same draws everywhere.
pub type RngStream = ChaCha8Rng;

pub fn rng_stream(seed: u64, stream: StreamId) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.0);
    rng
}
