//! Orthogonal broadcast channels with perfect carrier sense.
//!
//! Every device on a channel hears every transmission on it instantly, so two
//! transmissions overlap only if they start at the same instant. Overlapping
//! transmissions are all marked collided; there is no capture.

use serde::{Deserialize, Serialize};

use crate::kernel::{Duration, SimTime};

pub type ChannelId = u32;

/// Transmitting entity: one link of one BSS's AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeviceId {
    pub bss: usize,
    pub link: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TxId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxOutcome {
    Success,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxHandle {
    pub id: TxId,
    pub channel: ChannelId,
    pub device: DeviceId,
    pub start: SimTime,
    pub duration: Duration,
    pub collided: bool,
}

impl TxHandle {
    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }
}

/// Busy/idle edge reported to a channel's listeners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Busy,
    Idle,
}

struct Channel<L> {
    id: ChannelId,
    active: Vec<TxId>,
    listeners: Vec<L>,
    busy_since: SimTime,
    busy_time: Duration,
    last_edge: Option<Transition>,
}

pub struct Medium<L> {
    channels: Vec<Channel<L>>,
    txs: Vec<Option<TxHandle>>,
    free: Vec<usize>,
    collisions: bool,
}

impl<L: Copy> Medium<L> {
    /// Channels are addressed by their ids; lookups are linear, which is fine
    /// for the handful of channels a scenario uses.
    pub fn new(channel_ids: &[ChannelId], collisions: bool) -> Self {
        Medium {
            channels: channel_ids
                .iter()
                .map(|&id| Channel {
                    id,
                    active: Vec::new(),
                    listeners: Vec::new(),
                    busy_since: SimTime::ZERO,
                    busy_time: 0,
                    last_edge: None,
                })
                .collect(),
            txs: Vec::new(),
            free: Vec::new(),
            collisions,
        }
    }

    fn index(&self, ch: ChannelId) -> usize {
        self.channels
            .iter()
            .position(|c| c.id == ch)
            .unwrap_or_else(|| panic!("unknown channel {ch}"))
    }

    pub fn channel_ids(&self) -> impl Iterator<Item = ChannelId> + '_ {
        self.channels.iter().map(|c| c.id)
    }

    pub fn subscribe(&mut self, ch: ChannelId, listener: L) {
        let i = self.index(ch);
        self.channels[i].listeners.push(listener);
    }

    pub fn listeners(&self, ch: ChannelId) -> &[L] {
        &self.channels[self.index(ch)].listeners
    }

    pub fn is_busy(&self, ch: ChannelId) -> bool {
        !self.channels[self.index(ch)].active.is_empty()
    }

    /// True iff an active transmission covers instant `t`.
    pub fn is_busy_at(&self, ch: ChannelId, t: SimTime) -> bool {
        let c = &self.channels[self.index(ch)];
        c.active.iter().any(|id| {
            let h = self.txs[id.0].as_ref().expect("active tx");
            h.start <= t && t < h.end()
        })
    }

    /// True iff `ch` carries an active transmission from a BSS other than `bss`.
    pub fn has_foreign(&self, ch: ChannelId, bss: usize) -> bool {
        let c = &self.channels[self.index(ch)];
        c.active
            .iter()
            .any(|id| self.txs[id.0].as_ref().expect("active tx").device.bss != bss)
    }

    pub fn active_count(&self, ch: ChannelId) -> usize {
        self.channels[self.index(ch)].active.len()
    }

    pub fn tx(&self, id: TxId) -> &TxHandle {
        self.txs[id.0].as_ref().expect("live tx")
    }

    /// Total busy time of `ch` up to `now` (union of transmission intervals).
    pub fn busy_time(&self, ch: ChannelId, now: SimTime) -> Duration {
        let c = &self.channels[self.index(ch)];
        let open = if c.active.is_empty() {
            0
        } else {
            now - c.busy_since
        };
        c.busy_time + open
    }

    /// Occupies `ch` for `[now, now + duration)`. Returns the new transmission
    /// and `Some(Transition::Busy)` if the channel was idle before.
    pub fn begin_tx(
        &mut self,
        ch: ChannelId,
        device: DeviceId,
        now: SimTime,
        duration: Duration,
    ) -> (TxId, Option<Transition>) {
        let ci = self.index(ch);
        let overlap = !self.channels[ci].active.is_empty();
        let handle = TxHandle {
            id: TxId(0),
            channel: ch,
            device,
            start: now,
            duration,
            collided: overlap && self.collisions,
        };
        let id = match self.free.pop() {
            Some(slot) => {
                self.txs[slot] = Some(handle);
                TxId(slot)
            }
            None => {
                self.txs.push(Some(handle));
                TxId(self.txs.len() - 1)
            }
        };
        self.txs[id.0].as_mut().unwrap().id = id;
        if overlap && self.collisions {
            for other in &self.channels[ci].active {
                self.txs[other.0].as_mut().unwrap().collided = true;
            }
        }
        let chan = &mut self.channels[ci];
        chan.active.push(id);
        let edge = if overlap {
            None
        } else {
            chan.busy_since = now;
            debug_assert_ne!(chan.last_edge, Some(Transition::Busy));
            chan.last_edge = Some(Transition::Busy);
            Some(Transition::Busy)
        };
        (id, edge)
    }

    /// Releases a transmission at its end time. Returns the finished handle,
    /// its outcome, and `Some(Transition::Idle)` if the channel is now clear.
    pub fn end_tx(&mut self, id: TxId, now: SimTime) -> (TxHandle, TxOutcome, Option<Transition>) {
        let handle = self.txs[id.0].take().expect("ending a live tx");
        self.free.push(id.0);
        assert_eq!(now, handle.end(), "end_tx called off schedule");
        let ci = self.index(handle.channel);
        let chan = &mut self.channels[ci];
        let pos = chan
            .active
            .iter()
            .position(|&a| a == id)
            .expect("tx active");
        chan.active.swap_remove(pos);
        let edge = if chan.active.is_empty() {
            chan.busy_time += now - chan.busy_since;
            debug_assert_eq!(chan.last_edge, Some(Transition::Busy));
            chan.last_edge = Some(Transition::Idle);
            Some(Transition::Idle)
        } else {
            None
        };
        let outcome = if handle.collided {
            TxOutcome::Collision
        } else {
            TxOutcome::Success
        };
        (handle, outcome, edge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: DeviceId = DeviceId { bss: 0, link: 0 };
    const B: DeviceId = DeviceId { bss: 1, link: 0 };

    fn medium() -> Medium<u8> {
        Medium::new(&[1, 2], true)
    }

    #[test]
    fn sole_transmitter_succeeds() {
        let mut m = medium();
        let (id, edge) = m.begin_tx(1, A, SimTime(0), 162_400);
        assert_eq!(edge, Some(Transition::Busy));
        assert!(m.is_busy(1));
        assert!(m.is_busy_at(1, SimTime(100_000)));
        let (h, outcome, edge) = m.end_tx(id, SimTime(162_400));
        assert!(!h.collided);
        assert_eq!(outcome, TxOutcome::Success);
        assert_eq!(edge, Some(Transition::Idle));
        assert!(!m.is_busy(1));
        assert!(!m.is_busy_at(1, SimTime(162_401)));
    }

    #[test]
    fn idle_at_start() {
        let m = medium();
        assert!(!m.is_busy(1));
        assert!(!m.is_busy_at(2, SimTime::ZERO));
    }

    #[test]
    fn simultaneous_starts_collide() {
        let mut m = medium();
        let (a, e1) = m.begin_tx(1, A, SimTime(10), 100);
        let (b, e2) = m.begin_tx(1, B, SimTime(10), 100);
        assert_eq!(e1, Some(Transition::Busy));
        assert_eq!(e2, None);
        let (_, oa, ea) = m.end_tx(a, SimTime(110));
        assert_eq!(ea, None);
        let (_, ob, eb) = m.end_tx(b, SimTime(110));
        assert_eq!((oa, ob), (TxOutcome::Collision, TxOutcome::Collision));
        assert_eq!(eb, Some(Transition::Idle));
        assert_eq!(m.busy_time(1, SimTime(200)), 100);
    }

    #[test]
    fn collisions_switch_off() {
        let mut m: Medium<u8> = Medium::new(&[1], false);
        let (a, _) = m.begin_tx(1, A, SimTime(0), 50);
        let (b, _) = m.begin_tx(1, B, SimTime(0), 50);
        assert_eq!(m.end_tx(a, SimTime(50)).1, TxOutcome::Success);
        assert_eq!(m.end_tx(b, SimTime(50)).1, TxOutcome::Success);
    }

    #[test]
    fn channels_are_orthogonal() {
        let mut m = medium();
        let (a, _) = m.begin_tx(1, A, SimTime(0), 100);
        let (b, e) = m.begin_tx(2, B, SimTime(0), 100);
        assert_eq!(e, Some(Transition::Busy));
        assert_eq!(m.end_tx(a, SimTime(100)).1, TxOutcome::Success);
        assert_eq!(m.end_tx(b, SimTime(100)).1, TxOutcome::Success);
    }

    #[test]
    fn back_to_back_both_succeed() {
        let mut m = medium();
        let (a, _) = m.begin_tx(1, A, SimTime(0), 100);
        assert_eq!(m.end_tx(a, SimTime(100)).1, TxOutcome::Success);
        let (b, e) = m.begin_tx(1, B, SimTime(100), 100);
        assert_eq!(e, Some(Transition::Busy));
        assert_eq!(m.end_tx(b, SimTime(200)).1, TxOutcome::Success);
        assert_eq!(m.busy_time(1, SimTime(200)), 200);
    }

    #[test]
    fn foreign_occupancy() {
        let mut m = medium();
        m.begin_tx(1, A, SimTime(0), 100);
        assert!(!m.has_foreign(1, 0));
        assert!(m.has_foreign(1, 1));
        assert!(!m.has_foreign(2, 1));
    }

    #[test]
    fn listeners_per_channel() {
        let mut m = medium();
        m.subscribe(1, 7);
        m.subscribe(1, 9);
        m.subscribe(2, 3);
        assert_eq!(m.listeners(1), &[7, 9]);
        assert_eq!(m.listeners(2), &[3]);
    }

    #[test]
    #[should_panic(expected = "off schedule")]
    fn end_tx_off_schedule_panics() {
        let mut m = medium();
        let (a, _) = m.begin_tx(1, A, SimTime(0), 100);
        m.end_tx(a, SimTime(99));
    }
}
