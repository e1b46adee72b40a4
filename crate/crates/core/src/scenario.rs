//! Scenario files, validation, the built-in presets and sweep specifications.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! name = "STR-EMLMR:2"
//! channels = [1, 2, 3, 4]
//! duration_s = 30.0
//! total_load_bps = 2.5e9      # split evenly; or give `load_bps` per BSS
//!
//! [dcf]
//! cw_min = 16
//!
//! [[bss]]
//! name = "A"
//! mode = "STR-EMLMR:2"
//! channels = [1, 2]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dcf::DcfParams;
use crate::error::{ConfigError, Issue};
use crate::medium::ChannelId;
use crate::mld::{
    MldConfig, MldMode, DEFAULT_MAX_AGGREGATION, DEFAULT_PACKET_SIZE, DEFAULT_QUEUE_CAPACITY,
};
use crate::phy::{AckParams, PhyConfig};
use crate::traffic::split_evenly;

pub const DEFAULT_DURATION_S: f64 = 30.0;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
/// Total offered load grid, bits/s.
pub const DEFAULT_LOAD_GRID: [f64; 8] = [0.1e9, 0.25e9, 0.5e9, 0.75e9, 1.0e9, 1.5e9, 2.0e9, 2.5e9];

fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}
fn default_warmup() -> f64 {
    DEFAULT_WARMUP_FRACTION
}
fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}
fn default_true() -> bool {
    true
}
fn default_packet_size() -> u32 {
    DEFAULT_PACKET_SIZE
}
fn default_queue_capacity() -> usize {
    DEFAULT_QUEUE_CAPACITY
}
fn default_max_aggregation() -> u32 {
    DEFAULT_MAX_AGGREGATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BssConfig {
    pub name: String,
    pub mode: MldMode,
    /// One channel per radio; for `HYBRID-1+1` the first is the reserved one.
    pub channels: Vec<ChannelId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_bps: Option<f64>,
    #[serde(default = "default_max_aggregation")]
    pub max_aggregation: u32,
    #[serde(default)]
    pub emlsr_switch_delay_ns: u64,
}

impl BssConfig {
    pub fn new(name: impl Into<String>, mode: MldMode, channels: Vec<ChannelId>) -> Self {
        BssConfig {
            name: name.into(),
            mode,
            channels,
            load_bps: None,
            max_aggregation: DEFAULT_MAX_AGGREGATION,
            emlsr_switch_delay_ns: 0,
        }
    }

    pub fn mld_config(&self) -> MldConfig {
        MldConfig {
            mode: self.mode,
            channels: self.channels.clone(),
            max_aggregation: self.max_aggregation,
            emlsr_switch_delay: self.emlsr_switch_delay_ns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub channels: Vec<ChannelId>,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Split evenly among all BSSs. Mutually exclusive with per-BSS loads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_load_bps: Option<f64>,
    #[serde(default = "default_true")]
    pub collisions: bool,
    #[serde(default = "default_packet_size")]
    pub packet_size: u32,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    #[serde(default)]
    pub phy: PhyConfig,
    #[serde(default)]
    pub ack: AckParams,
    #[serde(default)]
    pub dcf: DcfParams,
    pub bss: Vec<BssConfig>,
}

impl Scenario {
    /// A scenario with default PHY/MAC parameters and run settings.
    pub fn new(name: impl Into<String>, channels: Vec<ChannelId>, bss: Vec<BssConfig>) -> Self {
        Scenario {
            name: name.into(),
            channels,
            duration_s: DEFAULT_DURATION_S,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            seeds: default_seeds(),
            total_load_bps: None,
            collisions: true,
            packet_size: DEFAULT_PACKET_SIZE,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            phy: PhyConfig::default(),
            ack: AckParams::default(),
            dcf: DcfParams::default(),
            bss,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::field(path.display().to_string(), format!("cannot read: {e}"))
        })?;
        Self::from_toml(&text)
    }

    /// Replaces any load setting with an evenly split total.
    pub fn with_total_load(mut self, total_bps: f64) -> Self {
        self.total_load_bps = Some(total_bps);
        for b in &mut self.bss {
            b.load_bps = None;
        }
        self
    }

    /// Per-BSS offered load, bits/s. Assumes a validated scenario.
    pub fn loads(&self) -> Vec<f64> {
        match self.total_load_bps {
            Some(total) => split_evenly(total, self.bss.len().max(1)),
            None => self.bss.iter().map(|b| b.load_bps.unwrap_or(0.0)).collect(),
        }
    }

    pub fn total_load(&self) -> f64 {
        self.loads().iter().sum()
    }

    pub fn max_links(&self) -> usize {
        self.bss.iter().map(|b| b.channels.len()).max().unwrap_or(0)
    }

    /// Checks every constraint, returning all problems at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut issue = |path: String, message: String| issues.push(Issue { path, message });

        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            issue("duration_s".into(), "must be positive".into());
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            issue("warmup_fraction".into(), "must lie in [0, 1)".into());
        }
        if self.seeds.is_empty() {
            issue("seeds".into(), "at least one seed required".into());
        }
        if self.packet_size == 0 {
            issue("packet_size".into(), "must be positive".into());
        }
        if self.queue_capacity == 0 {
            issue("queue_capacity".into(), "must be positive".into());
        }
        for err in [self.phy.validate(), self.dcf.validate()]
            .into_iter()
            .filter_map(Result::err)
        {
            for i in err.issues() {
                issue(i.path, i.message);
            }
        }
        if self.ack.sifs == 0 && self.ack.block_ack_duration > 0 {
            issue("ack.sifs".into(), "must be positive with a BlockAck".into());
        }

        let declared: BTreeSet<ChannelId> = self.channels.iter().copied().collect();
        if self.channels.is_empty() {
            issue("channels".into(), "no channels declared".into());
        }
        if declared.len() != self.channels.len() {
            issue("channels".into(), "duplicate channel id".into());
        }
        if self.bss.is_empty() {
            issue("bss".into(), "no BSS declared".into());
        }

        match self.total_load_bps {
            Some(t) if !(t >= 0.0 && t.is_finite()) => issue(
                "total_load_bps".into(),
                "must be a non-negative number".into(),
            ),
            _ => {}
        }

        let mut users: BTreeMap<ChannelId, Vec<usize>> = BTreeMap::new();
        for (i, b) in self.bss.iter().enumerate() {
            let at = format!("bss[{i}] ({})", b.name);
            for is in b.mld_config().issues(&at) {
                issue(is.path, is.message);
            }
            for (j, ch) in b.channels.iter().enumerate() {
                if !declared.contains(ch) {
                    issue(
                        format!("{at}.channels[{j}]"),
                        format!("channel {ch} is not declared"),
                    );
                }
                users.entry(*ch).or_default().push(i);
            }
            match (self.total_load_bps, b.load_bps) {
                (Some(_), Some(_)) => issue(
                    format!("{at}.load_bps"),
                    "conflicts with total_load_bps".into(),
                ),
                (None, None) => issue(
                    format!("{at}.load_bps"),
                    "missing (or set total_load_bps)".into(),
                ),
                (_, Some(l)) if !(l >= 0.0 && l.is_finite()) => issue(
                    format!("{at}.load_bps"),
                    "must be a non-negative number".into(),
                ),
                _ => {}
            }
        }
        for (i, b) in self.bss.iter().enumerate() {
            if b.mode == MldMode::Hybrid {
                if let Some(reserved) = b.channels.first() {
                    let shared = users.get(reserved).map_or(0, |u| u.len());
                    if shared > 1 {
                        issue(
                            format!("bss[{i}] ({}).channels[0]", b.name),
                            format!("reserved channel {reserved} is used by another BSS"),
                        );
                    }
                }
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }
}

/// The built-in presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// One isolated BSS: SL, STR-EMLMR:2, STR-EMLMR:4.
    Fig2,
    /// Four BSSs on four channels: SL, STR-EMLMR:2, STR-EMLMR:4.
    Fig4,
    /// Four BSSs: SL, STR-EMLMR:2, EMLSR:2, STR-EMLMR:1+1, STR-EMLMR:5.
    Fig5,
}

impl std::str::FromStr for Preset {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fig2" => Ok(Preset::Fig2),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            _ => Err(ConfigError::UnknownPreset(s.to_string())),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Preset::Fig2 => "fig2",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        };
        f.write_str(s)
    }
}

const BSS_NAMES: [&str; 4] = ["A", "B", "C", "D"];

fn crowded(
    name: &str,
    channels: Vec<ChannelId>,
    alloc: impl Fn(usize) -> (MldMode, Vec<ChannelId>),
) -> Scenario {
    let bss = BSS_NAMES
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let (mode, ch) = alloc(i);
            BssConfig::new(*n, mode, ch)
        })
        .collect();
    Scenario::new(name, channels, bss)
}

/// Pairs {A,B} share channels {1,2}; {C,D} share {3,4}.
fn paired(i: usize) -> Vec<ChannelId> {
    if i < 2 {
        vec![1, 2]
    } else {
        vec![3, 4]
    }
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig2, Preset::Fig4, Preset::Fig5];

    /// Scheme scenarios at `total_load_bps`, split evenly among BSSs.
    pub fn scenarios(self, total_load_bps: f64) -> Vec<Scenario> {
        let set = match self {
            Preset::Fig2 => vec![
                Scenario::new(
                    "SL",
                    vec![1],
                    vec![BssConfig::new("A", MldMode::Sl, vec![1])],
                ),
                Scenario::new(
                    "STR-EMLMR:2",
                    vec![1, 2],
                    vec![BssConfig::new("A", MldMode::StrEmlmr(2), vec![1, 2])],
                ),
                Scenario::new(
                    "STR-EMLMR:4",
                    vec![1, 2, 3, 4],
                    vec![BssConfig::new("A", MldMode::StrEmlmr(4), vec![1, 2, 3, 4])],
                ),
            ],
            Preset::Fig4 => vec![fig4_sl(), fig4_emlmr2(), fig4_emlmr4()],
            Preset::Fig5 => vec![
                fig4_sl(),
                fig4_emlmr2(),
                crowded("EMLSR:2", vec![1, 2, 3, 4], |i| {
                    (MldMode::Emlsr(2), paired(i))
                }),
                crowded("STR-EMLMR:1+1", vec![1, 2, 3, 4, 5], |i| {
                    (MldMode::Hybrid, vec![i as ChannelId + 1, 5])
                }),
                crowded("STR-EMLMR:5", vec![1, 2, 3, 4, 5], |_| {
                    (MldMode::StrEmlmr(5), vec![1, 2, 3, 4, 5])
                }),
            ],
        };
        set.into_iter()
            .map(|s| s.with_total_load(total_load_bps))
            .collect()
    }
}

fn fig4_sl() -> Scenario {
    crowded("SL", vec![1, 2, 3, 4], |i| {
        (MldMode::Sl, vec![i as ChannelId + 1])
    })
}

fn fig4_emlmr2() -> Scenario {
    crowded("STR-EMLMR:2", vec![1, 2, 3, 4], |i| {
        (MldMode::StrEmlmr(2), paired(i))
    })
}

fn fig4_emlmr4() -> Scenario {
    crowded("STR-EMLMR:4", vec![1, 2, 3, 4], |_| {
        (MldMode::StrEmlmr(4), vec![1, 2, 3, 4])
    })
}

/// Looks a preset up by name.
pub fn preset(name: &str, total_load_bps: f64) -> Result<Vec<Scenario>, ConfigError> {
    Ok(name.parse::<Preset>()?.scenarios(total_load_bps))
}

/// Cross product of schemes, total loads and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Expands to the preset's schemes, ahead of any listed in `schemes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub loads_bps: Vec<f64>,
    /// Overrides each scheme's own seeds when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_fraction: Option<f64>,
    #[serde(default)]
    pub schemes: Vec<Scenario>,
}

/// One independent run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scenario: Scenario,
    pub total_load_bps: f64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn for_preset(preset: Preset) -> Self {
        SweepSpec {
            preset: Some(preset),
            loads_bps: DEFAULT_LOAD_GRID.to_vec(),
            seeds: None,
            duration_s: None,
            warmup_fraction: None,
            schemes: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::field(path.display().to_string(), format!("cannot read: {e}"))
        })?;
        Self::from_toml(&text)
    }

    /// Expands into cells ordered by (scheme, load, seed).
    pub fn cells(&self) -> Result<Vec<Cell>, ConfigError> {
        let mut schemes = self.preset.map(|p| p.scenarios(0.0)).unwrap_or_default();
        schemes.extend(self.schemes.iter().cloned());
        if schemes.is_empty() {
            return Err(ConfigError::field("schemes", "sweep has no schemes"));
        }
        if self.loads_bps.is_empty() {
            return Err(ConfigError::field("loads_bps", "sweep has no loads"));
        }
        let mut cells = Vec::new();
        for base in schemes {
            let mut s = base;
            if let Some(d) = self.duration_s {
                s.duration_s = d;
            }
            if let Some(w) = self.warmup_fraction {
                s.warmup_fraction = w;
            }
            if let Some(seeds) = &self.seeds {
                s.seeds = seeds.clone();
            }
            for &load in &self.loads_bps {
                let sc = s.clone().with_total_load(load);
                sc.validate()?;
                for &seed in &sc.seeds {
                    cells.push(Cell {
                        scenario: sc.clone(),
                        total_load_bps: load,
                        seed,
                    });
                }
            }
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig4_sl_is_orthogonal() {
        let set = Preset::Fig4.scenarios(2.5e9);
        let sl = &set[0];
        assert_eq!(sl.name, "SL");
        assert_eq!(sl.bss.len(), 4);
        let mut used: Vec<ChannelId> = sl.bss.iter().flat_map(|b| b.channels.clone()).collect();
        assert!(sl.bss.iter().all(|b| b.channels.len() == 1));
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 4);
        assert_eq!(sl.loads(), vec![0.625e9; 4]);
    }

    #[test]
    fn fig4_emlmr2_pairs() {
        let s = &Preset::Fig4.scenarios(1e9)[1];
        assert_eq!(s.bss[0].channels, vec![1, 2]);
        assert_eq!(s.bss[1].channels, vec![1, 2]);
        assert_eq!(s.bss[2].channels, vec![3, 4]);
        assert_eq!(s.bss[3].channels, vec![3, 4]);
    }

    #[test]
    fn fig5_hybrid_uses_five_channels() {
        let set = Preset::Fig5.scenarios(1e9);
        assert_eq!(set.len(), 5);
        let hybrid = set.iter().find(|s| s.name == "STR-EMLMR:1+1").unwrap();
        assert_eq!(hybrid.channels.len(), 5);
        let all: BTreeSet<ChannelId> = hybrid.bss.iter().flat_map(|b| b.channels.clone()).collect();
        assert_eq!(all.len(), 5);
        assert!(hybrid.validate().is_ok());
        let str5 = set.iter().find(|s| s.name == "STR-EMLMR:5").unwrap();
        assert_eq!(str5.channels.len(), 5);
    }

    #[test]
    fn fig2_is_single_bss() {
        for s in Preset::Fig2.scenarios(0.5e9) {
            assert_eq!(s.bss.len(), 1);
            assert_eq!(s.loads(), vec![0.5e9]);
        }
    }

    #[test]
    fn every_preset_validates() {
        for p in Preset::ALL {
            for s in p.scenarios(1e9) {
                s.validate()
                    .unwrap_or_else(|e| panic!("{p} {}: {e}", s.name));
            }
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(
            preset("fig9", 1.0),
            Err(ConfigError::UnknownPreset(_))
        ));
    }

    #[test]
    fn invalid_channel_names_the_bss() {
        let mut s = Preset::Fig4.scenarios(1e9).remove(1);
        s.bss[2].channels = vec![3, 7];
        let err = s.validate().unwrap_err();
        let issues = err.issues();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].path, "bss[2] (C).channels[1]");
        assert!(err.to_string().contains("channel 7"));
    }

    #[test]
    fn hybrid_reserved_channel_must_be_exclusive() {
        let mut s = Preset::Fig5.scenarios(1e9).remove(3);
        s.bss[1].channels = vec![1, 5];
        let issues = s.validate().unwrap_err().issues();
        assert!(issues
            .iter()
            .any(|i| i.message.contains("reserved channel 1")));
    }

    #[test]
    fn load_specification_rules() {
        let mut s = Preset::Fig2.scenarios(1e9).remove(0);
        s.bss[0].load_bps = Some(1.0);
        assert!(s.validate().is_err());
        s.total_load_bps = None;
        assert!(s.validate().is_ok());
        s.bss[0].load_bps = None;
        assert!(s.validate().is_err());
    }

    #[test]
    fn collects_all_issues() {
        let mut s = Preset::Fig4.scenarios(1e9).remove(0);
        s.duration_s = 0.0;
        s.warmup_fraction = 1.5;
        s.dcf.cw_min = 3;
        assert_eq!(s.validate().unwrap_err().issues().len(), 3);
    }

    #[test]
    fn toml_round_trip() {
        for p in Preset::ALL {
            for s in p.scenarios(0.75e9) {
                let text = s.to_toml().unwrap();
                let back = Scenario::from_toml(&text).unwrap();
                assert_eq!(back, s);
                assert_eq!(back.to_toml().unwrap(), text);
            }
        }
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let s = Scenario::from_toml(
            r#"
            name = "one"
            channels = [1]
            [[bss]]
            name = "A"
            mode = "SL"
            channels = [1]
            load_bps = 1e8
            "#,
        )
        .unwrap();
        assert!(s.validate().is_ok());
        assert_eq!(s.phy, PhyConfig::default());
        assert_eq!(s.seeds, vec![1, 2, 3]);
        assert_eq!(s.duration_s, 30.0);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = Scenario::from_toml("name='x'\nchannels=[1]\nbogus=1\nbss=[]").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn sweep_cross_product() {
        let spec = SweepSpec {
            preset: Some(Preset::Fig4),
            loads_bps: vec![0.1e9, 0.5e9, 1.0e9, 2.5e9],
            seeds: Some(vec![1, 2, 3]),
            duration_s: Some(1.0),
            warmup_fraction: None,
            schemes: Vec::new(),
        };
        let cells = spec.cells().unwrap();
        assert_eq!(cells.len(), 36);
        assert!(cells.iter().all(|c| c.scenario.duration_s == 1.0));
        assert_eq!(cells[5].scenario.total_load_bps, Some(0.5e9));
    }

    #[test]
    fn sweep_spec_round_trip() {
        let mut spec = SweepSpec::for_preset(Preset::Fig2);
        spec.schemes.push(Preset::Fig4.scenarios(0.0).remove(2));
        let text = spec.to_toml().unwrap();
        assert_eq!(SweepSpec::from_toml(&text).unwrap(), spec);
    }
}
