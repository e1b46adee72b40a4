//! Downlink Poisson packet sources.

use rand::Rng;

use crate::kernel::{Duration, RngStream};

pub struct PoissonSource {
    load_bps: f64,
    packet_size: u32,
    rng: RngStream,
}

impl PoissonSource {
    pub fn new(load_bps: f64, packet_size: u32, rng: RngStream) -> Self {
        assert!(load_bps >= 0.0 && load_bps.is_finite(), "load must be >= 0");
        assert!(packet_size > 0);
        PoissonSource {
            load_bps,
            packet_size,
            rng,
        }
    }

    pub fn load_bps(&self) -> f64 {
        self.load_bps
    }

    pub fn packet_size(&self) -> u32 {
        self.packet_size
    }

    /// Packets per second.
    pub fn rate(&self) -> f64 {
        self.load_bps / (self.packet_size as f64 * 8.0)
    }

    /// Exponential inter-arrival gap in ns via inverse transform, or `None`
    /// if the source is silent.
    pub fn next_gap(&mut self) -> Option<Duration> {
        let rate = self.rate();
        if rate <= 0.0 {
            return None;
        }
        // 1 - u lies in (0, 1], so the log is finite
        let u: f64 = self.rng.gen();
        let secs = -(1.0 - u).ln() / rate;
        Some((secs * 1e9).round() as Duration)
    }
}

/// Even split of a total load among `n_bss` sources.
pub fn split_evenly(total_load_bps: f64, n_bss: usize) -> Vec<f64> {
    assert!(n_bss >= 1, "need at least one BSS");
    vec![total_load_bps / n_bss as f64; n_bss]
}
