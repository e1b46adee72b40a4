//! Discrete-event simulator of Wi-Fi multi-link operation (MLO) channel
//! access.
//!
//! APs of one or more BSSs deliver Poisson downlink traffic over orthogonal
//! channels under plain DCF. Each AP is a multi-link device running one of
//! the modes in [`mld::MldMode`]: legacy single link, EMLSR (listen on many
//! links, transmit on one), STR EMLMR (transmit on all links concurrently)
//! or the hybrid reserved-plus-shared arrangement. A run reports per-BSS
//! packet delay percentiles, aggregation sizes, how many links an active BSS
//! holds at once and how often it finds all of its channels taken.
//!
//! ```no_run
//! use mlo_sim::scenario::Preset;
//!
//! let schemes = Preset::Fig4.scenarios(2.5e9);
//! let report = mlo_sim::run(&schemes[2], 1).unwrap();
//! let all = report.pooled();
//! println!("p99 delay {:?} us", all.delay_percentile_us(99.0));
//! ```

pub mod dcf;
pub mod error;
pub mod export;
pub mod kernel;
pub mod medium;
pub mod metrics;
pub mod mld;
pub mod phy;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod traffic;

pub use error::{ConfigError, ExportError, Issue};
pub use kernel::SimTime;
pub use metrics::BssStats;
pub use scenario::{Preset, Scenario, SweepSpec};
pub use sim::{run, RunReport, Simulation};
pub use sweep::{sweep, Execution, SweepTable};
