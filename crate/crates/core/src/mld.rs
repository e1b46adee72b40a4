//! Multi-link device: one shared FIFO feeding every link, aggregation at
//! transmission start, and the per-mode rules on concurrent use of links.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dcf::{DcfLink, DcfParams};
use crate::error::ConfigError;
use crate::kernel::{Duration, RngStream, SimTime};
use crate::medium::{ChannelId, TxId};

pub const DEFAULT_QUEUE_CAPACITY: usize = 4096;
pub const DEFAULT_MAX_AGGREGATION: u32 = 1024;
pub const DEFAULT_PACKET_SIZE: u32 = 12_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub bss: usize,
    pub arrival: SimTime,
    pub size: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enqueue {
    Accepted,
    Dropped,
}

/// Bounded FIFO. Arrivals beyond capacity are dropped and counted.
#[derive(Debug, Clone)]
pub struct TxQueue {
    packets: VecDeque<Packet>,
    capacity: usize,
    drops: u64,
}

impl TxQueue {
    pub fn new(capacity: usize) -> Self {
        TxQueue {
            packets: VecDeque::with_capacity(capacity.min(8192)),
            capacity,
            drops: 0,
        }
    }

    pub fn push(&mut self, p: Packet) -> Enqueue {
        if self.packets.len() >= self.capacity {
            self.drops += 1;
            Enqueue::Dropped
        } else {
            self.packets.push_back(p);
            Enqueue::Accepted
        }
    }

    /// Removes up to `max` packets from the head.
    pub fn take(&mut self, max: usize) -> Vec<Packet> {
        let n = max.min(self.packets.len());
        self.packets.drain(..n).collect()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn drops(&self) -> u64 {
        self.drops
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }
}

/// How an MLD may use its links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MldMode {
    /// Legacy single link.
    Sl,
    /// Listens on `k` links, transmits on one at a time.
    Emlsr(usize),
    /// Fully concurrent operation on `k` links.
    StrEmlmr(usize),
    /// STR on two links: one reserved channel plus one shared channel.
    Hybrid,
}

impl MldMode {
    pub fn link_count(self) -> usize {
        match self {
            MldMode::Sl => 1,
            MldMode::Emlsr(k) | MldMode::StrEmlmr(k) => k,
            MldMode::Hybrid => 2,
        }
    }

    pub fn single_radio(self) -> bool {
        matches!(self, MldMode::Sl | MldMode::Emlsr(_))
    }
}

impl fmt::Display for MldMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MldMode::Sl => write!(f, "SL"),
            MldMode::Emlsr(k) => write!(f, "EMLSR:{k}"),
            MldMode::StrEmlmr(k) => write!(f, "STR-EMLMR:{k}"),
            MldMode::Hybrid => write!(f, "HYBRID-1+1"),
        }
    }
}

impl FromStr for MldMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace(['_', ' '], "-");
        let unknown = || ConfigError::UnknownMode(s.to_string());
        if norm == "SL" {
            return Ok(MldMode::Sl);
        }
        if matches!(
            norm.as_str(),
            "HYBRID" | "HYBRID-1+1" | "STR-EMLMR:1+1" | "EMLMR:1+1"
        ) {
            return Ok(MldMode::Hybrid);
        }
        let (kind, k) = norm.split_once(':').ok_or_else(unknown)?;
        let k: usize = k.parse().map_err(|_| unknown())?;
        if k == 0 {
            return Err(unknown());
        }
        match kind {
            "EMLSR" => Ok(MldMode::Emlsr(k)),
            "STR-EMLMR" | "EMLMR" | "STR" => Ok(MldMode::StrEmlmr(k)),
            _ => Err(unknown()),
        }
    }
}

impl TryFrom<String> for MldMode {
    type Error = ConfigError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MldMode> for String {
    fn from(m: MldMode) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MldConfig {
    pub mode: MldMode,
    /// Channel of each radio, in radio-index order. For `HYBRID-1+1` the
    /// first channel is the reserved one.
    pub channels: Vec<ChannelId>,
    #[serde(default = "default_max_aggregation")]
    pub max_aggregation: u32,
    #[serde(default)]
    pub emlsr_switch_delay: Duration,
}

fn default_max_aggregation() -> u32 {
    DEFAULT_MAX_AGGREGATION
}

impl MldConfig {
    pub fn new(mode: MldMode, channels: Vec<ChannelId>) -> Self {
        MldConfig {
            mode,
            channels,
            max_aggregation: DEFAULT_MAX_AGGREGATION,
            emlsr_switch_delay: 0,
        }
    }

    /// Structural checks; `path` prefixes the reported field paths.
    pub fn issues(&self, path: &str) -> Vec<crate::error::Issue> {
        let mut out = Vec::new();
        let mut push = |field: &str, msg: String| {
            out.push(crate::error::Issue {
                path: format!("{path}.{field}"),
                message: msg,
            })
        };
        let want = self.mode.link_count();
        if self.channels.len() != want {
            push(
                "channels",
                format!(
                    "mode {} needs exactly {want} link(s), got {}",
                    self.mode,
                    self.channels.len()
                ),
            );
        }
        let mut seen = self.channels.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.channels.len() {
            push("channels", "links must use distinct channels".into());
        }
        if self.max_aggregation == 0 {
            push("max_aggregation", "must be at least 1".into());
        }
        out
    }
}

/// Packets sent together in one PPDU. Composition is fixed when formed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub packets: Vec<Packet>,
    pub link: usize,
    pub formed_at: SimTime,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

pub struct MldLink {
    pub channel: ChannelId,
    pub dcf: DcfLink,
    pub rng: RngStream,
    /// In flight, or held for retransmission after a collision.
    pub batch: Option<Batch>,
    pub tx: Option<TxId>,
}

/// Decision taken when a link's backoff expires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grant {
    /// Send the batch now held by the link (fresh or retried).
    Transmit {
        n_mpdus: u32,
        fresh: bool,
    },
    Decline,
}

pub struct Mld {
    pub bss: usize,
    pub config: MldConfig,
    pub queue: TxQueue,
    pub links: Vec<MldLink>,
    /// Upper bound on aggregate size from the PHY duration cap.
    pub agg_limit: u32,
}

impl Mld {
    pub fn new(
        bss: usize,
        config: MldConfig,
        dcf: DcfParams,
        queue_capacity: usize,
        agg_limit: u32,
        mut rng_for_link: impl FnMut(usize) -> RngStream,
    ) -> Self {
        let links = config
            .channels
            .iter()
            .enumerate()
            .map(|(i, &channel)| MldLink {
                channel,
                dcf: DcfLink::new(dcf),
                rng: rng_for_link(i),
                batch: None,
                tx: None,
            })
            .collect();
        Mld {
            bss,
            agg_limit: agg_limit.min(config.max_aggregation).max(1),
            config,
            queue: TxQueue::new(queue_capacity),
            links,
        }
    }

    pub fn mode(&self) -> MldMode {
        self.config.mode
    }

    pub fn links_in_tx(&self) -> usize {
        self.links.iter().filter(|l| l.tx.is_some()).count()
    }

    /// Packets held by links (in flight or awaiting retry).
    pub fn in_flight(&self) -> usize {
        self.links
            .iter()
            .filter_map(|l| l.batch.as_ref())
            .map(Batch::len)
            .sum()
    }

    /// Has packets to transmit.
    pub fn is_active(&self) -> bool {
        !self.queue.is_empty() || self.links.iter().any(|l| l.batch.is_some())
    }

    /// Links that should start contending because traffic is waiting.
    pub fn links_to_arm(&self) -> Vec<usize> {
        if self.queue.is_empty() {
            return Vec::new();
        }
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.dcf.is_idle() && l.batch.is_none())
            .map(|(i, _)| i)
            .collect()
    }

    /// Decides what link `link` sends now that its backoff expired. A fresh
    /// batch takes up to the aggregation limit from the head of the queue.
    pub fn on_grant(&mut self, link: usize, now: SimTime) -> Grant {
        if let MldMode::Emlsr(_) = self.config.mode {
            assert!(
                self.links
                    .iter()
                    .enumerate()
                    .all(|(i, l)| i == link || l.tx.is_none()),
                "EMLSR grant while a sibling link transmits"
            );
        }
        if let Some(batch) = &self.links[link].batch {
            return Grant::Transmit {
                n_mpdus: batch.len() as u32,
                fresh: false,
            };
        }
        if self.queue.is_empty() {
            return Grant::Decline;
        }
        let packets = self.queue.take(self.agg_limit as usize);
        let n = packets.len() as u32;
        self.links[link].batch = Some(Batch {
            packets,
            link,
            formed_at: now,
        });
        Grant::Transmit {
            n_mpdus: n,
            fresh: true,
        }
    }

    /// Sibling links that must yield the radio while `link` transmits.
    pub fn lock_targets(&self, link: usize) -> Vec<usize> {
        match self.config.mode {
            MldMode::Emlsr(_) => (0..self.links.len()).filter(|&i| i != link).collect(),
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{rng_stream, StreamId};

    fn pkt(id: u64) -> Packet {
        Packet {
            id,
            bss: 0,
            arrival: SimTime(id),
            size: DEFAULT_PACKET_SIZE,
        }
    }

    fn mld(mode: MldMode, channels: Vec<ChannelId>) -> Mld {
        Mld::new(
            0,
            MldConfig::new(mode, channels),
            DcfParams::default(),
            DEFAULT_QUEUE_CAPACITY,
            DEFAULT_MAX_AGGREGATION,
            |i| rng_stream(1, StreamId::dcf(0, i)),
        )
    }

    #[test]
    fn queue_boundary() {
        let mut q = TxQueue::new(4096);
        for i in 0..4095 {
            assert_eq!(q.push(pkt(i)), Enqueue::Accepted);
        }
        assert_eq!(q.push(pkt(4095)), Enqueue::Accepted);
        assert_eq!(q.len(), 4096);
        assert_eq!(q.push(pkt(4096)), Enqueue::Dropped);
        assert_eq!(q.drops(), 1);
        assert_eq!(q.len(), 4096);
    }

    #[test]
    fn queue_is_fifo() {
        let mut q = TxQueue::new(10);
        for i in 0..5 {
            q.push(pkt(i));
        }
        let ids: Vec<u64> = q.take(3).iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(q.iter().next().unwrap().id, 3);
    }

    #[test]
    fn mode_strings_round_trip() {
        for m in [
            MldMode::Sl,
            MldMode::Emlsr(2),
            MldMode::StrEmlmr(4),
            MldMode::Hybrid,
        ] {
            assert_eq!(m.to_string().parse::<MldMode>().unwrap(), m);
        }
        assert_eq!("emlmr:5".parse::<MldMode>().unwrap(), MldMode::StrEmlmr(5));
        assert_eq!("STR EMLMR:1+1".parse::<MldMode>().unwrap(), MldMode::Hybrid);
        assert!("MLSR:2".parse::<MldMode>().is_err());
        assert!("EMLSR:0".parse::<MldMode>().is_err());
    }

    #[test]
    fn config_link_counts() {
        assert!(MldConfig::new(MldMode::Sl, vec![1]).issues("b").is_empty());
        assert!(!MldConfig::new(MldMode::Sl, vec![1, 2])
            .issues("b")
            .is_empty());
        assert!(!MldConfig::new(MldMode::StrEmlmr(2), vec![1, 1])
            .issues("b")
            .is_empty());
        assert!(!MldConfig::new(MldMode::Hybrid, vec![1])
            .issues("b")
            .is_empty());
        let issues = MldConfig::new(MldMode::Emlsr(3), vec![1, 2]).issues("bss[4]");
        assert_eq!(issues[0].path, "bss[4].channels");
    }

    #[test]
    fn grants_split_queue_across_links() {
        let mut m = mld(MldMode::StrEmlmr(2), vec![1, 2]);
        for i in 0..2000 {
            m.queue.push(pkt(i));
        }
        assert_eq!(
            m.on_grant(0, SimTime(0)),
            Grant::Transmit {
                n_mpdus: 1024,
                fresh: true
            }
        );
        assert_eq!(
            m.on_grant(1, SimTime(30_000)),
            Grant::Transmit {
                n_mpdus: 976,
                fresh: true
            }
        );
        assert!(m.queue.is_empty());
        let first = &m.links[0].batch.as_ref().unwrap().packets;
        let second = &m.links[1].batch.as_ref().unwrap().packets;
        assert_eq!(first.last().unwrap().id + 1, second[0].id);
    }

    #[test]
    fn empty_queue_declines() {
        let mut m = mld(MldMode::Sl, vec![1]);
        assert_eq!(m.on_grant(0, SimTime(0)), Grant::Decline);
    }

    #[test]
    fn retry_reuses_held_batch() {
        let mut m = mld(MldMode::Sl, vec![1]);
        for i in 0..3 {
            m.queue.push(pkt(i));
        }
        m.on_grant(0, SimTime(0));
        m.queue.push(pkt(9));
        assert_eq!(
            m.on_grant(0, SimTime(500)),
            Grant::Transmit {
                n_mpdus: 3,
                fresh: false
            }
        );
        assert_eq!(m.queue.len(), 1);
    }

    #[test]
    fn emlsr_locks_siblings_only() {
        let m = mld(MldMode::Emlsr(3), vec![1, 2, 3]);
        assert_eq!(m.lock_targets(1), vec![0, 2]);
        let s = mld(MldMode::StrEmlmr(3), vec![1, 2, 3]);
        assert!(s.lock_targets(1).is_empty());
    }

    #[test]
    fn arming_targets_idle_links_with_traffic() {
        let mut m = mld(MldMode::StrEmlmr(2), vec![1, 2]);
        assert!(m.links_to_arm().is_empty());
        m.queue.push(pkt(0));
        assert_eq!(m.links_to_arm(), vec![0, 1]);
    }
}
