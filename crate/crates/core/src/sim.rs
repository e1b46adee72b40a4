//! One simulation run: wires traffic sources, MLDs, DCF links and the medium
//! to the event kernel and collects a [`RunReport`].

use serde::{Deserialize, Serialize};

use crate::dcf::{AfterTx, Timer};
use crate::error::ConfigError;
use crate::kernel::{rng_stream, EventHandle, Scheduler, SimTime, StreamId};
use crate::medium::{ChannelId, DeviceId, Medium, Transition, TxOutcome};
use crate::metrics::{BssStats, OccupancySampler};
use crate::mld::{Enqueue, Grant, Mld, MldMode, Packet};
use crate::scenario::Scenario;
use crate::traffic::PoissonSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Arrival { bss: usize },
    BackoffExpiry { bss: usize, link: usize },
    TxEnd { bss: usize, link: usize },
    EmlsrUnlock { bss: usize },
}

struct LinkTimer<'a> {
    sched: &'a mut Scheduler<Event>,
    bss: usize,
    link: usize,
}

impl Timer for LinkTimer<'_> {
    fn set(&mut self, at: SimTime) -> EventHandle {
        self.sched.schedule(
            at,
            Event::BackoffExpiry {
                bss: self.bss,
                link: self.link,
            },
        )
    }

    fn cancel(&mut self, handle: EventHandle) -> bool {
        self.sched.cancel(handle)
    }
}

/// One finished transmission, kept when tracing is enabled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub channel: ChannelId,
    pub device: DeviceId,
    pub start: SimTime,
    pub end: SimTime,
    pub n_mpdus: u32,
    pub outcome: TxOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelUsage {
    pub channel: ChannelId,
    pub busy_fraction: f64,
}

/// Everything a run produced, plus the exact configuration and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub events: u64,
    pub channels: Vec<ChannelUsage>,
    pub bss: Vec<BssStats>,
}

impl RunReport {
    /// All BSSs pooled into one set of statistics.
    pub fn pooled(&self) -> BssStats {
        BssStats::pooled(self.scenario.name.clone(), &self.bss).expect("at least one BSS")
    }
}

struct Collector {
    stats: BssStats,
    sampler: OccupancySampler,
}

struct World {
    scenario: Scenario,
    medium: Medium<DeviceId>,
    mlds: Vec<Mld>,
    sources: Vec<PoissonSource>,
    collectors: Vec<Collector>,
    warmup_end: SimTime,
    next_packet_id: u64,
    trace: Option<Vec<TxRecord>>,
    audit: bool,
}

/// Builder for a single run.
pub struct Simulation {
    scenario: Scenario,
    seed: u64,
    trace: bool,
    audit: bool,
}

/// Result of [`Simulation::run_traced`].
pub struct SimOutput {
    pub report: RunReport,
    pub trace: Vec<TxRecord>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self, ConfigError> {
        scenario.validate()?;
        Ok(Simulation {
            scenario: scenario.clone(),
            seed,
            trace: false,
            audit: false,
        })
    }

    /// Records every transmission.
    pub fn trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    /// Checks structural invariants after every event; panics on violation.
    pub fn audit(mut self, on: bool) -> Self {
        self.audit = on;
        self
    }

    pub fn run(self) -> RunReport {
        self.run_traced().report
    }

    pub fn run_traced(self) -> SimOutput {
        let Simulation {
            scenario,
            seed,
            trace,
            audit,
        } = self;
        let duration = SimTime::from_secs_f64(scenario.duration_s);
        let warmup_end = SimTime::from_secs_f64(scenario.duration_s * scenario.warmup_fraction);
        let loads = scenario.loads();
        let agg_cap = scenario.phy.max_mpdus(scenario.packet_size, u32::MAX >> 8);

        let mut medium = Medium::new(&scenario.channels, scenario.collisions);
        let mut mlds = Vec::with_capacity(scenario.bss.len());
        let mut sources = Vec::with_capacity(scenario.bss.len());
        let mut collectors = Vec::with_capacity(scenario.bss.len());
        for (i, b) in scenario.bss.iter().enumerate() {
            let mld = Mld::new(
                i,
                b.mld_config(),
                scenario.dcf,
                scenario.queue_capacity,
                agg_cap,
                |l| rng_stream(seed, StreamId::dcf(i, l)),
            );
            for (l, &ch) in b.channels.iter().enumerate() {
                medium.subscribe(ch, DeviceId { bss: i, link: l });
            }
            mlds.push(mld);
            sources.push(PoissonSource::new(
                loads[i],
                scenario.packet_size,
                rng_stream(seed, StreamId::traffic(i)),
            ));
            collectors.push(Collector {
                stats: BssStats::new(b.name.clone(), b.mode, b.channels.len(), loads[i]),
                sampler: OccupancySampler::new(b.channels.len(), warmup_end),
            });
        }

        let mut world = World {
            scenario,
            medium,
            mlds,
            sources,
            collectors,
            warmup_end,
            next_packet_id: 0,
            trace: trace.then(Vec::new),
            audit,
        };

        let mut sched = Scheduler::new();
        for (i, src) in world.sources.iter_mut().enumerate() {
            if let Some(gap) = src.next_gap() {
                sched.schedule(SimTime(gap), Event::Arrival { bss: i });
            }
        }
        let events = sched.run_until(duration, |s, ev| world.dispatch(s, ev));
        let report = world.finish(duration, seed, events);
        SimOutput {
            report,
            trace: world.trace.take().unwrap_or_default(),
        }
    }
}

pub fn run(scenario: &Scenario, seed: u64) -> Result<RunReport, ConfigError> {
    Ok(Simulation::new(scenario, seed)?.run())
}

impl World {
    fn dispatch(&mut self, sched: &mut Scheduler<Event>, ev: Event) {
        let now = sched.now();
        for c in &mut self.collectors {
            c.sampler.advance(now);
        }
        match ev {
            Event::Arrival { bss } => self.on_arrival(sched, bss),
            Event::BackoffExpiry { bss, link } => self.on_backoff_expiry(sched, bss, link),
            Event::TxEnd { bss, link } => self.on_tx_end(sched, bss, link),
            Event::EmlsrUnlock { bss } => self.on_emlsr_unlock(sched, bss),
        }
        self.refresh_samplers();
        if self.audit {
            self.check_invariants(now);
        }
    }

    fn measuring(&self, now: SimTime) -> bool {
        now >= self.warmup_end
    }

    fn on_arrival(&mut self, sched: &mut Scheduler<Event>, bss: usize) {
        let now = sched.now();
        let measuring = self.measuring(now);
        let packet = Packet {
            id: self.next_packet_id,
            bss,
            arrival: now,
            size: self.scenario.packet_size,
        };
        self.next_packet_id += 1;
        let stats = &mut self.collectors[bss].stats;
        stats.conservation.arrivals += 1;
        if measuring {
            stats.arrivals += 1;
        }
        match self.mlds[bss].queue.push(packet) {
            Enqueue::Accepted => {
                if measuring {
                    stats.accepted += 1;
                }
            }
            Enqueue::Dropped => {
                stats.conservation.buffer_drops += 1;
                if measuring {
                    stats.buffer_drops += 1;
                }
            }
        }
        if let Some(gap) = self.sources[bss].next_gap() {
            sched.schedule_in(gap, Event::Arrival { bss });
        }
        self.arm_idle_links(sched, bss);
    }

    fn arm_idle_links(&mut self, sched: &mut Scheduler<Event>, bss: usize) {
        let now = sched.now();
        for link in self.mlds[bss].links_to_arm() {
            let l = &mut self.mlds[bss].links[link];
            let mut timer = LinkTimer { sched, bss, link };
            l.dcf.arm(now, &mut timer, &mut l.rng);
        }
    }

    fn notify(&mut self, sched: &mut Scheduler<Event>, ch: ChannelId, edge: Transition) {
        let now = sched.now();
        let listeners = self.medium.listeners(ch).to_vec();
        for DeviceId { bss, link } in listeners {
            let mut timer = LinkTimer { sched, bss, link };
            let dcf = &mut self.mlds[bss].links[link].dcf;
            match edge {
                Transition::Busy => dcf.on_busy(now, &mut timer),
                Transition::Idle => dcf.on_idle(now, &mut timer),
            }
        }
    }

    fn on_backoff_expiry(&mut self, sched: &mut Scheduler<Event>, bss: usize, link: usize) {
        let now = sched.now();
        self.mlds[bss].links[link].dcf.on_expiry(now);
        let grant = self.mlds[bss].on_grant(link, now);
        let n_mpdus = match grant {
            Grant::Decline => {
                self.mlds[bss].links[link].dcf.decline();
                return;
            }
            Grant::Transmit { n_mpdus, fresh } => {
                if fresh && self.measuring(now) {
                    let batch = self.mlds[bss].links[link].batch.as_ref().expect("batch");
                    let stats = &mut self.collectors[bss].stats;
                    stats.dequeued += batch.len() as u64;
                    stats.queue_wait_ns +=
                        batch.packets.iter().map(|p| now - p.arrival).sum::<u64>();
                }
                n_mpdus
            }
        };

        let duration = self
            .scenario
            .phy
            .exchange_airtime(&self.scenario.ack, n_mpdus, self.scenario.packet_size)
            .expect("non-empty batch");
        let mld = &mut self.mlds[bss];
        let ch = mld.links[link].channel;
        mld.links[link].dcf.begin_tx();
        let (tx, edge) = self
            .medium
            .begin_tx(ch, DeviceId { bss, link }, now, duration);
        mld.links[link].tx = Some(tx);
        sched.schedule(now + duration, Event::TxEnd { bss, link });

        for sibling in mld.lock_targets(link) {
            let mut timer = LinkTimer {
                sched,
                bss,
                link: sibling,
            };
            mld.links[sibling].dcf.lock(now, &mut timer);
        }
        if let Some(edge) = edge {
            self.notify(sched, ch, edge);
        }
    }

    fn on_tx_end(&mut self, sched: &mut Scheduler<Event>, bss: usize, link: usize) {
        let now = sched.now();
        let measuring = self.measuring(now);
        let tx = self.mlds[bss].links[link].tx.take().expect("link in TX");
        let (handle, outcome, edge) = self.medium.end_tx(tx, now);
        if let Some(edge) = edge {
            self.notify(sched, handle.channel, edge);
        }

        let warmup_end = self.warmup_end;
        let mld = &mut self.mlds[bss];
        let l = &mut mld.links[link];
        let n_mpdus = l.batch.as_ref().map_or(0, |b| b.len());
        let after = {
            let mut timer = LinkTimer { sched, bss, link };
            l.dcf.on_outcome(outcome, now, &mut timer, &mut l.rng)
        };
        if let Some(trace) = &mut self.trace {
            trace.push(TxRecord {
                channel: handle.channel,
                device: handle.device,
                start: handle.start,
                end: now,
                n_mpdus: n_mpdus as u32,
                outcome,
            });
        }
        let stats = &mut self.collectors[bss].stats;
        if measuring {
            stats.transmissions += 1;
            if outcome == TxOutcome::Collision {
                stats.collisions += 1;
            }
        }
        match after {
            AfterTx::Delivered => {
                let batch = l.batch.take().expect("delivered batch");
                stats.conservation.delivered += batch.len() as u64;
                for p in &batch.packets {
                    stats.record_delivery(p.arrival, now, warmup_end);
                }
                if measuring {
                    stats.delivered += batch.len() as u64;
                    stats.delivered_bits +=
                        batch.packets.iter().map(|p| p.size as u64 * 8).sum::<u64>();
                    stats.record_aggregate(batch.len());
                }
            }
            AfterTx::Retry => {}
            AfterTx::Dropped => {
                let batch = l.batch.take().expect("dropped batch");
                stats.conservation.retry_drops += batch.len() as u64;
                if measuring {
                    stats.retry_drops += batch.len() as u64;
                }
            }
        }

        if let MldMode::Emlsr(_) = mld.mode() {
            let delay = mld.config.emlsr_switch_delay;
            if delay == 0 {
                self.unlock_siblings(sched, bss);
            } else {
                sched.schedule_in(delay, Event::EmlsrUnlock { bss });
            }
        }
        self.arm_idle_links(sched, bss);
    }

    fn on_emlsr_unlock(&mut self, sched: &mut Scheduler<Event>, bss: usize) {
        // a newer transmission keeps the radio; its own end unlocks
        if self.mlds[bss].links_in_tx() == 0 {
            self.unlock_siblings(sched, bss);
        }
    }

    fn unlock_siblings(&mut self, sched: &mut Scheduler<Event>, bss: usize) {
        let now = sched.now();
        let mld = &mut self.mlds[bss];
        for (link, l) in mld.links.iter_mut().enumerate() {
            if l.dcf.is_locked() {
                let mut timer = LinkTimer { sched, bss, link };
                l.dcf.unlock(now, &mut timer);
            }
        }
    }

    fn refresh_samplers(&mut self) {
        for (bss, c) in self.collectors.iter_mut().enumerate() {
            let mld = &self.mlds[bss];
            let starved = mld
                .links
                .iter()
                .all(|l| self.medium.has_foreign(l.channel, bss));
            c.sampler
                .set(mld.is_active(), mld.links_in_tx(), starved, mld.queue.len());
        }
    }

    fn check_invariants(&self, now: SimTime) {
        for (bss, mld) in self.mlds.iter().enumerate() {
            let c = &self.collectors[bss].stats.conservation;
            let held = mld.queue.len() as u64 + mld.in_flight() as u64;
            assert_eq!(
                c.arrivals,
                c.delivered + held + c.buffer_drops + c.retry_drops,
                "packet conservation violated for BSS {bss} at {now}"
            );
            match mld.mode() {
                MldMode::Sl | MldMode::Emlsr(_) => assert!(
                    mld.links_in_tx() <= 1,
                    "single-radio MLD {bss} transmits on several links at {now}"
                ),
                MldMode::Hybrid => {
                    let reserved = mld.links[0].channel;
                    assert!(
                        !self.medium.has_foreign(reserved, bss),
                        "foreign transmission on reserved channel {reserved} at {now}"
                    );
                }
                MldMode::StrEmlmr(_) => {}
            }
            for l in &mld.links {
                assert_eq!(l.tx.is_some(), l.dcf.is_tx(), "TX state mismatch at {now}");
                if l.dcf.is_tx() {
                    assert!(l.batch.is_some(), "transmitting without a batch at {now}");
                }
                // Freezing must neither lose nor invent backoff slots.
                let (drawn, counted) = l.dcf.slot_ledger();
                assert_eq!(
                    drawn,
                    counted + l.dcf.backoff_remaining() as u64,
                    "backoff slots lost across a freeze at {now}"
                );
            }
        }
    }

    fn finish(&mut self, end: SimTime, seed: u64, events: u64) -> RunReport {
        let measured = end.saturating_sub(self.warmup_end);
        let mut bss = Vec::with_capacity(self.collectors.len());
        for (i, c) in self.collectors.iter_mut().enumerate() {
            c.sampler.advance(end);
            let mld = &self.mlds[i];
            let mut stats = c.stats.clone();
            stats.measured_ns = measured;
            stats.occupancy_ns = c.sampler.by_links().to_vec();
            stats.active_ns = c.sampler.active_ns();
            stats.starved_ns = c.sampler.starved_ns();
            stats.queue_area = c.sampler.queue_area();
            stats.conservation.queued = mld.queue.len() as u64;
            stats.conservation.in_flight = mld.in_flight() as u64;
            stats.delays_ns.sort_unstable();
            bss.push(stats);
        }
        let channels = self
            .medium
            .channel_ids()
            .collect::<Vec<_>>()
            .into_iter()
            .map(|ch| ChannelUsage {
                channel: ch,
                busy_fraction: if end.as_nanos() == 0 {
                    0.0
                } else {
                    self.medium.busy_time(ch, end) as f64 / end.as_nanos() as f64
                },
            })
            .collect();
        RunReport {
            scenario: self.scenario.clone(),
            seed,
            duration_s: end.as_secs_f64(),
            warmup_s: self.warmup_end.as_secs_f64(),
            events,
            channels,
            bss,
        }
    }
}
