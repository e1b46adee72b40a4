//! PHY rate and airtime arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::kernel::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    /// MHz. Informational; the rate follows from `data_subcarriers`.
    pub channel_width: u32,
    pub spatial_streams: u32,
    /// Coded bits per subcarrier per symbol after the coding rate is applied
    /// (256-QAM rate 3/4 carries 6).
    pub bits_per_subcarrier_per_symbol: u32,
    pub data_subcarriers: u32,
    /// OFDM symbol including guard interval, ns.
    pub symbol_duration: Duration,
    pub preamble_duration: Duration,
    /// MAC header / delimiter bytes added to every MPDU.
    pub per_mpdu_overhead: u32,
    /// Optional cap on PPDU duration, ns. `None` means unlimited.
    pub max_ppdu_duration: Option<Duration>,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig {
            channel_width: 80,
            spatial_streams: 2,
            bits_per_subcarrier_per_symbol: 6,
            data_subcarriers: 980,
            symbol_duration: 13_600,
            preamble_duration: 40_000,
            per_mpdu_overhead: 0,
            max_ppdu_duration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AckParams {
    pub sifs: Duration,
    pub block_ack_duration: Duration,
}

impl Default for AckParams {
    fn default() -> Self {
        AckParams {
            sifs: 16_000,
            block_ack_duration: 28_000,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("channel_width", self.channel_width as u64),
            ("spatial_streams", self.spatial_streams as u64),
            (
                "bits_per_subcarrier_per_symbol",
                self.bits_per_subcarrier_per_symbol as u64,
            ),
            ("data_subcarriers", self.data_subcarriers as u64),
            ("symbol_duration", self.symbol_duration),
            ("preamble_duration", self.preamble_duration),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(ConfigError::field(
                    format!("phy.{field}"),
                    "must be positive",
                ));
            }
        }
        if let Some(cap) = self.max_ppdu_duration {
            if cap < self.preamble_duration + self.symbol_duration {
                return Err(ConfigError::field(
                    "phy.max_ppdu_duration",
                    "shorter than preamble plus one symbol",
                ));
            }
        }
        Ok(())
    }

    /// Data bits carried by one OFDM symbol across all streams.
    pub fn bits_per_symbol(&self) -> u64 {
        self.data_subcarriers as u64
            * self.bits_per_subcarrier_per_symbol as u64
            * self.spatial_streams as u64
    }

    /// PHY data rate in bits per second.
    pub fn data_rate(&self) -> f64 {
        self.bits_per_symbol() as f64 / (self.symbol_duration as f64 * 1e-9)
    }

    /// On-air duration of a PPDU aggregating `n_mpdus` MPDUs, ns.
    pub fn ppdu_airtime(&self, n_mpdus: u32, mpdu_payload: u32) -> Result<Duration, ConfigError> {
        if n_mpdus == 0 {
            return Err(ConfigError::EmptyPpdu);
        }
        if mpdu_payload == 0 {
            return Err(ConfigError::field("mpdu_payload", "must be positive"));
        }
        let bits = n_mpdus as u64 * (mpdu_payload as u64 + self.per_mpdu_overhead as u64) * 8;
        let symbols = bits.div_ceil(self.bits_per_symbol());
        Ok(self.preamble_duration + symbols * self.symbol_duration)
    }

    /// Largest aggregate (≤ `limit`) whose PPDU respects `max_ppdu_duration`.
    pub fn max_mpdus(&self, mpdu_payload: u32, limit: u32) -> u32 {
        let Some(cap) = self.max_ppdu_duration else {
            return limit;
        };
        let fits = |n: u32| self.ppdu_airtime(n, mpdu_payload).is_ok_and(|t| t <= cap);
        if fits(limit) {
            return limit;
        }
        // airtime is monotone in n
        let (mut lo, mut hi) = (1u32, limit);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Total channel-holding time: PPDU, SIFS and the BlockAck.
    pub fn exchange_airtime(
        &self,
        ack: &AckParams,
        n_mpdus: u32,
        mpdu_payload: u32,
    ) -> Result<Duration, ConfigError> {
        Ok(self.ppdu_airtime(n_mpdus, mpdu_payload)? + ack.sifs + ack.block_ack_duration)
    }
}
