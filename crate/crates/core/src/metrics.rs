//! Delay, aggregation, occupancy and starvation statistics.
//!
//! Everything accumulated during a run is kept in raw, mergeable form
//! ([`BssStats`]): sorted delay samples, an aggregation histogram and
//! time integrals. Summaries are computed on demand, so pooling seed
//! replicates is exact: samples are merged before percentiles are taken.

use serde::{Deserialize, Serialize};

use crate::kernel::SimTime;
use crate::mld::MldMode;

/// Share of post-warmup arrivals lost to buffer overflow above which a BSS
/// is flagged saturated.
pub const SATURATION_DROP_RATIO: f64 = 1e-3;

/// Nearest-rank percentile of an ascending slice: the `ceil(p/100 * N)`-th
/// order statistic. `None` for an empty slice.
pub fn percentile<T: Copy>(sorted: &[T], p: f64) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, n) - 1])
}

/// Nearest-rank percentile over a histogram whose bucket `i` counts value `i`.
pub fn histogram_percentile(counts: &[u64], p: f64) -> Option<usize> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let rank = (((p / 100.0) * total as f64).ceil() as u64).clamp(1, total);
    let mut seen = 0;
    for (value, &c) in counts.iter().enumerate() {
        seen += c;
        if seen >= rank {
            return Some(value);
        }
    }
    unreachable!("rank within total")
}

/// Time-weighted tracker of one BSS's activity, concurrent links in TX and
/// starvation. Intervals before the warmup cutoff are ignored.
#[derive(Debug, Clone)]
pub struct OccupancySampler {
    warmup_end: SimTime,
    last: SimTime,
    active: bool,
    links_tx: usize,
    starved: bool,
    queue_len: usize,
    by_links: Vec<u64>,
    active_ns: u64,
    starved_ns: u64,
    queue_area: u64,
}

impl OccupancySampler {
    pub fn new(max_links: usize, warmup_end: SimTime) -> Self {
        OccupancySampler {
            warmup_end,
            last: SimTime::ZERO,
            active: false,
            links_tx: 0,
            starved: false,
            queue_len: 0,
            by_links: vec![0; max_links + 1],
            active_ns: 0,
            starved_ns: 0,
            queue_area: 0,
        }
    }

    /// Credits the time since the last call to the current state.
    pub fn advance(&mut self, now: SimTime) {
        let from = self.last.max(self.warmup_end);
        if now > from {
            let dt = now - from;
            if self.active {
                self.by_links[self.links_tx] += dt;
                self.active_ns += dt;
                if self.starved {
                    self.starved_ns += dt;
                }
            }
            self.queue_area += dt * self.queue_len as u64;
        }
        if now > self.last {
            self.last = now;
        }
    }

    pub fn set(&mut self, active: bool, links_tx: usize, starved: bool, queue_len: usize) {
        debug_assert!(links_tx < self.by_links.len());
        debug_assert!(!(links_tx > 0 && !active), "transmitting while inactive");
        self.active = active;
        self.links_tx = links_tx;
        self.starved = starved;
        self.queue_len = queue_len;
    }

    pub fn by_links(&self) -> &[u64] {
        &self.by_links
    }

    pub fn active_ns(&self) -> u64 {
        self.active_ns
    }

    pub fn starved_ns(&self) -> u64 {
        self.starved_ns
    }

    pub fn queue_area(&self) -> u64 {
        self.queue_area
    }
}

/// Whole-run packet bookkeeping, warmup included.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub arrivals: u64,
    pub delivered: u64,
    pub buffer_drops: u64,
    pub retry_drops: u64,
    pub queued: u64,
    pub in_flight: u64,
}

impl Conservation {
    pub fn balanced(&self) -> bool {
        self.arrivals
            == self.delivered + self.queued + self.in_flight + self.buffer_drops + self.retry_drops
    }
}

/// Raw, mergeable statistics for one BSS (or a pool of BSSs) over the
/// measurement window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssStats {
    pub label: String,
    pub mode: MldMode,
    pub links: usize,
    pub load_bps: f64,
    /// Length of the measurement window, summed over pooled members.
    pub measured_ns: u64,
    pub arrivals: u64,
    pub accepted: u64,
    pub buffer_drops: u64,
    /// Packets lost after exhausting retries.
    pub retry_drops: u64,
    pub delivered: u64,
    pub delivered_bits: u64,
    pub transmissions: u64,
    pub collisions: u64,
    /// Ascending delay samples, ns. Omitted from serialized reports.
    #[serde(skip)]
    pub delays_ns: Vec<u64>,
    /// `agg_hist[n]` = successful transmissions carrying `n` MPDUs.
    pub agg_hist: Vec<u64>,
    /// Active time by number of links in TX.
    pub occupancy_ns: Vec<u64>,
    pub active_ns: u64,
    pub starved_ns: u64,
    pub queue_area: u64,
    pub queue_wait_ns: u64,
    pub dequeued: u64,
    pub conservation: Conservation,
}

impl BssStats {
    pub fn new(label: impl Into<String>, mode: MldMode, links: usize, load_bps: f64) -> Self {
        BssStats {
            label: label.into(),
            mode,
            links,
            load_bps,
            measured_ns: 0,
            arrivals: 0,
            accepted: 0,
            buffer_drops: 0,
            retry_drops: 0,
            delivered: 0,
            delivered_bits: 0,
            transmissions: 0,
            collisions: 0,
            delays_ns: Vec::new(),
            agg_hist: Vec::new(),
            occupancy_ns: vec![0; links + 1],
            active_ns: 0,
            starved_ns: 0,
            queue_area: 0,
            queue_wait_ns: 0,
            dequeued: 0,
            conservation: Conservation::default(),
        }
    }

    /// Adds a delay sample, ignoring completions before `warmup_end`.
    pub fn record_delivery(&mut self, arrival: SimTime, completion: SimTime, warmup_end: SimTime) {
        assert!(
            completion >= arrival,
            "negative delay: arrival {arrival} completion {completion}"
        );
        if completion >= warmup_end {
            self.delays_ns.push(completion - arrival);
        }
    }

    pub fn record_aggregate(&mut self, n_mpdus: usize) {
        if self.agg_hist.len() <= n_mpdus {
            self.agg_hist.resize(n_mpdus + 1, 0);
        }
        self.agg_hist[n_mpdus] += 1;
    }

    /// Merges `other` into `self`; label and mode of `self` are kept.
    pub fn merge(&mut self, other: &BssStats) {
        self.links = self.links.max(other.links);
        self.load_bps += other.load_bps;
        self.measured_ns += other.measured_ns;
        self.arrivals += other.arrivals;
        self.accepted += other.accepted;
        self.buffer_drops += other.buffer_drops;
        self.retry_drops += other.retry_drops;
        self.delivered += other.delivered;
        self.delivered_bits += other.delivered_bits;
        self.transmissions += other.transmissions;
        self.collisions += other.collisions;
        let mut merged = Vec::with_capacity(self.delays_ns.len() + other.delays_ns.len());
        merged.extend_from_slice(&self.delays_ns);
        merged.extend_from_slice(&other.delays_ns);
        merged.sort_unstable();
        self.delays_ns = merged;
        add_into(&mut self.agg_hist, &other.agg_hist);
        add_into(&mut self.occupancy_ns, &other.occupancy_ns);
        self.active_ns += other.active_ns;
        self.starved_ns += other.starved_ns;
        self.queue_area += other.queue_area;
        self.queue_wait_ns += other.queue_wait_ns;
        self.dequeued += other.dequeued;
        let c = &mut self.conservation;
        let o = &other.conservation;
        c.arrivals += o.arrivals;
        c.delivered += o.delivered;
        c.buffer_drops += o.buffer_drops;
        c.retry_drops += o.retry_drops;
        c.queued += o.queued;
        c.in_flight += o.in_flight;
    }

    /// Pools several members; `None` if `members` is empty.
    pub fn pooled<'a>(
        label: impl Into<String>,
        members: impl IntoIterator<Item = &'a BssStats>,
    ) -> Option<BssStats> {
        let mut it = members.into_iter();
        let first = it.next()?;
        let mut acc = first.clone();
        acc.label = label.into();
        for m in it {
            acc.merge(m);
        }
        Some(acc)
    }

    /// Delay percentile in microseconds; `None` without samples.
    pub fn delay_percentile_us(&self, p: f64) -> Option<f64> {
        percentile(&self.delays_ns, p).map(|ns| ns as f64 / 1e3)
    }

    pub fn delay_mean_us(&self) -> Option<f64> {
        if self.delays_ns.is_empty() {
            return None;
        }
        let sum: u128 = self.delays_ns.iter().map(|&d| d as u128).sum();
        Some(sum as f64 / self.delays_ns.len() as f64 / 1e3)
    }

    pub fn aggregation_percentile(&self, p: f64) -> Option<usize> {
        histogram_percentile(&self.agg_hist, p)
    }

    pub fn successful_transmissions(&self) -> u64 {
        self.agg_hist.iter().sum()
    }

    /// Delivered bits per second over the measurement window.
    pub fn throughput_bps(&self) -> f64 {
        if self.measured_ns == 0 {
            return 0.0;
        }
        self.delivered_bits as f64 / (self.measured_ns as f64 * 1e-9)
    }

    /// P(n links in TX | active) for n = 0..=links; `None` if never active.
    pub fn occupancy(&self) -> Option<Vec<f64>> {
        if self.active_ns == 0 {
            return None;
        }
        Some(
            self.occupancy_ns
                .iter()
                .map(|&t| t as f64 / self.active_ns as f64)
                .collect(),
        )
    }

    /// P(at least `n` links in TX | active).
    pub fn occupancy_at_least(&self, n: usize) -> Option<f64> {
        self.occupancy().map(|d| d.iter().skip(n).sum())
    }

    /// Share of active time with every allocated channel held by a foreign
    /// transmission. Zero for a BSS that was never active.
    pub fn starvation_fraction(&self) -> f64 {
        if self.active_ns == 0 {
            0.0
        } else {
            self.starved_ns as f64 / self.active_ns as f64
        }
    }

    pub fn active_fraction(&self) -> f64 {
        if self.measured_ns == 0 {
            0.0
        } else {
            self.active_ns as f64 / self.measured_ns as f64
        }
    }

    pub fn drops(&self) -> u64 {
        self.buffer_drops + self.retry_drops
    }

    pub fn saturated(&self) -> bool {
        self.arrivals > 0 && self.buffer_drops as f64 / self.arrivals as f64 > SATURATION_DROP_RATIO
    }

    pub fn mean_queue_len(&self) -> f64 {
        if self.measured_ns == 0 {
            0.0
        } else {
            self.queue_area as f64 / self.measured_ns as f64
        }
    }

    /// Mean time from arrival to batch formation, seconds.
    pub fn mean_queue_wait_s(&self) -> Option<f64> {
        if self.dequeued == 0 {
            None
        } else {
            Some(self.queue_wait_ns as f64 / self.dequeued as f64 * 1e-9)
        }
    }

    /// Accepted packets per second over the measurement window.
    pub fn accepted_rate(&self) -> f64 {
        if self.measured_ns == 0 {
            0.0
        } else {
            self.accepted as f64 / (self.measured_ns as f64 * 1e-9)
        }
    }

    /// Relative gap between the mean queue length and arrival rate times
    /// mean queueing delay.
    pub fn littles_law_error(&self) -> Option<f64> {
        let w = self.mean_queue_wait_s()?;
        let lw = self.accepted_rate() * w;
        let l = self.mean_queue_len();
        if l == 0.0 && lw == 0.0 {
            return Some(0.0);
        }
        Some((l - lw).abs() / l.max(lw))
    }
}

fn add_into(acc: &mut Vec<u64>, other: &[u64]) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0);
    }
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<u32> = (1..=100).collect();
        assert_eq!(percentile(&v, 99.0), Some(99));
        assert_eq!(percentile(&v, 100.0), Some(100));
        assert_eq!(percentile(&[5], 50.0), Some(5));
        assert_eq!(percentile(&[5], 1.0), Some(5));
        assert_eq!(percentile(&[1, 2, 3, 4], 50.0), Some(2));
        assert_eq!(percentile(&[1, 2, 3, 4], 0.0), Some(1));
        assert_eq!(percentile::<u32>(&[], 50.0), None);
    }

    #[test]
    fn histogram_rank_matches_sorted() {
        let counts = vec![0, 3, 0, 2, 5];
        let mut expanded = Vec::new();
        for (v, &c) in counts.iter().enumerate() {
            expanded.extend(std::iter::repeat_n(v, c as usize));
        }
        for p in [1.0, 20.0, 30.0, 50.0, 51.0, 99.0, 100.0] {
            assert_eq!(
                histogram_percentile(&counts, p),
                percentile(&expanded, p),
                "p={p}"
            );
        }
        assert_eq!(histogram_percentile(&[0, 0], 50.0), None);
    }

    #[test]
    fn delivery_sample() {
        let mut s = BssStats::new("A", MldMode::Sl, 1, 0.0);
        s.record_delivery(
            SimTime::from_micros(1_000),
            SimTime::from_micros(1_200),
            SimTime(0),
        );
        assert_eq!(s.delays_ns, vec![200_000]);
        s.record_delivery(SimTime(0), SimTime(10), SimTime(100));
        assert_eq!(s.delays_ns.len(), 1);
    }

    #[test]
    #[should_panic(expected = "negative delay")]
    fn negative_delay_is_a_bug() {
        let mut s = BssStats::new("A", MldMode::Sl, 1, 0.0);
        s.record_delivery(SimTime(10), SimTime(5), SimTime(0));
    }

    #[test]
    fn sampler_time_weighting() {
        let mut o = OccupancySampler::new(2, SimTime(100));
        o.set(true, 1, false, 3);
        o.advance(SimTime(150)); // only 50 ns after warmup
        o.set(true, 2, true, 0);
        o.advance(SimTime(250));
        o.set(false, 0, false, 0);
        o.advance(SimTime(400));
        assert_eq!(o.by_links(), &[0, 50, 100]);
        assert_eq!(o.active_ns(), 150);
        assert_eq!(o.starved_ns(), 100);
        assert_eq!(o.queue_area(), 150);
    }

    #[test]
    fn occupancy_sums_to_one() {
        let mut s = BssStats::new("A", MldMode::StrEmlmr(2), 2, 0.0);
        s.occupancy_ns = vec![30, 50, 20];
        s.active_ns = 100;
        let d = s.occupancy().unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s.occupancy_at_least(2).unwrap() - 0.2).abs() < 1e-12);
        let never = BssStats::new("B", MldMode::Sl, 1, 0.0);
        assert_eq!(never.occupancy(), None);
        assert_eq!(never.starvation_fraction(), 0.0);
    }

    #[test]
    fn pooling_merges_samples_before_percentiles() {
        let mut a = BssStats::new("A", MldMode::Sl, 1, 1.0);
        a.delays_ns = vec![1, 2, 3];
        let mut b = BssStats::new("B", MldMode::Sl, 1, 1.0);
        b.delays_ns = vec![4, 5, 6, 7];
        let pooled = BssStats::pooled("all", [&a, &b]).unwrap();
        assert_eq!(pooled.delays_ns, vec![1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(percentile(&pooled.delays_ns, 50.0), Some(4));
        assert_eq!(pooled.load_bps, 2.0);
        assert!(BssStats::pooled("none", []).is_none());
    }

    #[test]
    fn conservation_check() {
        let c = Conservation {
            arrivals: 10,
            delivered: 4,
            buffer_drops: 1,
            retry_drops: 2,
            queued: 2,
            in_flight: 1,
        };
        assert!(c.balanced());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn percentiles_monotone_in_p(mut v in proptest::collection::vec(0u64..10_000, 1..200), p in 0.0f64..100.0, q in 0.0f64..100.0) {
                v.sort_unstable();
                let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
                prop_assert!(percentile(&v, lo).unwrap() <= percentile(&v, hi).unwrap());
            }
        }
    }
}
