//! Per-link DCF contention: DIFS sensing, slotted backoff that freezes while
//! the channel is busy, binary exponential backoff and a retry limit.
//!
//! Slot counting is not simulated slot by slot. When the channel is idle the
//! link schedules one expiry at `idle + DIFS + remaining * slot`; a busy edge
//! cancels it and charges only the slots that completed while idle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::kernel::{Duration, EventHandle, SimTime};
use crate::medium::TxOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcfParams {
    pub slot: Duration,
    pub sifs: Duration,
    pub difs: Duration,
    /// Slots; backoff draws are uniform in `[0, cw - 1]`.
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
}

impl Default for DcfParams {
    fn default() -> Self {
        DcfParams {
            slot: 9_000,
            sifs: 16_000,
            difs: 34_000,
            cw_min: 16,
            cw_max: 1024,
            retry_limit: 7,
        }
    }
}

impl DcfParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.slot == 0 {
            return Err(ConfigError::field("dcf.slot", "must be positive"));
        }
        if self.difs < self.sifs {
            return Err(ConfigError::field("dcf.difs", "must be at least sifs"));
        }
        if self.cw_min == 0 || !self.cw_min.is_power_of_two() {
            return Err(ConfigError::field("dcf.cw_min", "must be a power of two"));
        }
        if !self.cw_max.is_power_of_two() {
            return Err(ConfigError::field("dcf.cw_max", "must be a power of two"));
        }
        if self.cw_min > self.cw_max {
            return Err(ConfigError::field("dcf.cw_min", "exceeds cw_max"));
        }
        Ok(())
    }

    /// Contention window at `stage` retries: doubles per stage, capped.
    pub fn cw(&self, stage: u32) -> u32 {
        let doubled = (self.cw_min as u64) << stage.min(32);
        doubled.min(self.cw_max as u64) as u32
    }

    /// Mean of a fresh stage-0 draw, in slots.
    pub fn mean_initial_backoff(&self) -> f64 {
        (self.cw_min as f64 - 1.0) / 2.0
    }
}

/// Kernel access needed by a link to arm and disarm its expiry timer.
pub trait Timer {
    fn set(&mut self, at: SimTime) -> EventHandle;
    fn cancel(&mut self, handle: EventHandle) -> bool;
}

/// Observable contention state of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkState {
    Idle,
    DifsWait,
    Backoff,
    Frozen,
    Tx,
    EmlsrLocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    /// Contending but not counting: channel busy or link locked.
    Deferring,
    Counting {
        resume_at: SimTime,
        expiry: SimTime,
        timer: EventHandle,
    },
    /// Backoff reached zero; the owner is deciding what to send.
    Granted,
    Tx,
}

/// What happens to the in-flight batch after a transmission ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfterTx {
    Delivered,
    /// Collision; the same batch goes out again after a new backoff.
    Retry,
    /// Retry limit exceeded.
    Dropped,
}

#[derive(Debug, Clone)]
pub struct DcfLink {
    params: DcfParams,
    phase: Phase,
    remaining: u32,
    stage: u32,
    channel_busy: bool,
    locked: bool,
    drawn: u64,
    counted: u64,
}

impl DcfLink {
    pub fn new(params: DcfParams) -> Self {
        DcfLink {
            params,
            phase: Phase::Idle,
            remaining: 0,
            stage: 0,
            channel_busy: false,
            locked: false,
            drawn: 0,
            counted: 0,
        }
    }

    pub fn params(&self) -> &DcfParams {
        &self.params
    }

    pub fn state(&self, now: SimTime) -> LinkState {
        match self.phase {
            Phase::Idle if self.locked => LinkState::EmlsrLocked,
            Phase::Idle => LinkState::Idle,
            Phase::Deferring if self.locked => LinkState::EmlsrLocked,
            Phase::Deferring => LinkState::Frozen,
            Phase::Counting { resume_at, .. } if now < resume_at => LinkState::DifsWait,
            Phase::Counting { .. } | Phase::Granted => LinkState::Backoff,
            Phase::Tx => LinkState::Tx,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.phase == Phase::Idle
    }

    pub fn is_tx(&self) -> bool {
        self.phase == Phase::Tx
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    /// Slots left on the current backoff, as of the last freeze or draw.
    pub fn backoff_remaining(&self) -> u32 {
        self.remaining
    }

    /// Slots left as of `now`, counting slots elapsed in an ongoing countdown.
    pub fn backoff_remaining_at(&self, now: SimTime) -> u32 {
        match self.phase {
            Phase::Counting { resume_at, .. } if now > resume_at => {
                let done = (now - resume_at) / self.params.slot;
                self.remaining.saturating_sub(done as u32)
            }
            _ => self.remaining,
        }
    }

    pub fn retry_stage(&self) -> u32 {
        self.stage
    }

    pub fn cw(&self) -> u32 {
        self.params.cw(self.stage)
    }

    pub fn expiry(&self) -> Option<SimTime> {
        match self.phase {
            Phase::Counting { expiry, .. } => Some(expiry),
            _ => None,
        }
    }

    /// Total slots drawn and total slots counted down over the link's life.
    pub fn slot_ledger(&self) -> (u64, u64) {
        (self.drawn, self.counted)
    }

    fn draw<R: Rng>(&mut self, rng: &mut R) {
        let cw = self.params.cw(self.stage);
        self.remaining = rng.gen_range(0..cw);
        self.drawn += self.remaining as u64;
    }

    fn try_resume<T: Timer>(&mut self, now: SimTime, timer: &mut T) {
        if self.phase != Phase::Deferring || self.channel_busy || self.locked {
            return;
        }
        let resume_at = now + self.params.difs;
        let expiry = resume_at + self.remaining as u64 * self.params.slot;
        let handle = timer.set(expiry);
        self.phase = Phase::Counting {
            resume_at,
            expiry,
            timer: handle,
        };
    }

    /// Stops an ongoing countdown, keeping the slots not yet counted. A
    /// countdown that expires at this very instant is left alone unless
    /// `force` is set: the link already decided to transmit.
    fn freeze<T: Timer>(&mut self, now: SimTime, timer: &mut T, force: bool) {
        if let Phase::Counting {
            resume_at,
            expiry,
            timer: handle,
        } = self.phase
        {
            if expiry == now && !force {
                return;
            }
            timer.cancel(handle);
            if now > resume_at {
                let done = ((now - resume_at) / self.params.slot) as u32;
                debug_assert!(done <= self.remaining);
                self.remaining -= done;
                self.counted += done as u64;
            }
            self.phase = Phase::Deferring;
        }
    }

    /// Starts contending. Ignored unless the link is idle.
    pub fn arm<T: Timer, R: Rng>(&mut self, now: SimTime, timer: &mut T, rng: &mut R) -> bool {
        if self.phase != Phase::Idle {
            return false;
        }
        self.draw(rng);
        self.phase = Phase::Deferring;
        self.try_resume(now, timer);
        true
    }

    pub fn on_busy<T: Timer>(&mut self, now: SimTime, timer: &mut T) {
        self.channel_busy = true;
        self.freeze(now, timer, false);
    }

    pub fn on_idle<T: Timer>(&mut self, now: SimTime, timer: &mut T) {
        self.channel_busy = false;
        self.try_resume(now, timer);
    }

    /// EMLSR: a sibling link took the radio.
    pub fn lock<T: Timer>(&mut self, now: SimTime, timer: &mut T) {
        debug_assert!(!self.is_tx(), "locking a transmitting link");
        self.locked = true;
        self.freeze(now, timer, true);
    }

    pub fn unlock<T: Timer>(&mut self, now: SimTime, timer: &mut T) {
        self.locked = false;
        self.try_resume(now, timer);
    }

    /// The expiry timer fired.
    pub fn on_expiry(&mut self, now: SimTime) {
        match self.phase {
            Phase::Counting { expiry, .. } => {
                assert_eq!(expiry, now, "stale backoff expiry");
                self.counted += self.remaining as u64;
                self.remaining = 0;
                self.phase = Phase::Granted;
            }
            other => panic!("backoff expiry in phase {other:?}"),
        }
    }

    pub fn begin_tx(&mut self) {
        assert_eq!(self.phase, Phase::Granted, "transmitting without a grant");
        self.phase = Phase::Tx;
    }

    /// Nothing to send: back to idle.
    pub fn decline(&mut self) {
        assert_eq!(self.phase, Phase::Granted);
        self.phase = Phase::Idle;
    }

    pub fn on_outcome<T: Timer, R: Rng>(
        &mut self,
        outcome: TxOutcome,
        now: SimTime,
        timer: &mut T,
        rng: &mut R,
    ) -> AfterTx {
        assert_eq!(self.phase, Phase::Tx, "outcome without a transmission");
        match outcome {
            TxOutcome::Success => {
                self.stage = 0;
                self.phase = Phase::Idle;
                AfterTx::Delivered
            }
            TxOutcome::Collision => {
                self.stage += 1;
                if self.stage > self.params.retry_limit {
                    self.stage = 0;
                    self.phase = Phase::Idle;
                    AfterTx::Dropped
                } else {
                    self.draw(rng);
                    self.phase = Phase::Deferring;
                    self.try_resume(now, timer);
                    AfterTx::Retry
                }
            }
        }
    }
}
