//! Scenario configuration: a TOML document describing one experiment.
//!
//! Unknown keys are rejected. Values whose default depends on the topology
//! (broadcast period, timestamp window) stay optional in the document and
//! are resolved through accessor methods, so a parse → serialize → parse
//! cycle reproduces the same value.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crypto::{HashAlg, SUPPORTED_KEY_BITS};
use crate::error::{Error, Result};
use crate::metrics::EnergyConstants;
use crate::netsim::{Arena, RadioModel};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Simulated time after the last attestation instant, in seconds.
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    /// Stop a run once every coverage target has been met.
    #[serde(default = "yes")]
    pub stop_at_target: bool,
    #[serde(default)]
    pub compromised_fraction: f64,
    #[serde(default = "default_targets")]
    pub targets: Vec<CoverageTarget>,
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub arena: ArenaConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub delays: DelayConfig,
    #[serde(default)]
    pub crypto: CryptoConfig,
    #[serde(default)]
    pub energy: EnergyConstants,
    #[serde(default)]
    pub verifier: VerifierConfig,
    #[serde(default, rename = "adversary", skip_serializing_if = "Vec::is_empty")]
    pub adversaries: Vec<AdversaryPlan>,
    #[serde(default)]
    pub baseline: BaselineSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Coverage level `C_X = Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageTarget {
    pub x: f64,
    pub y: f64,
}

impl CoverageTarget {
    pub fn label(&self) -> String {
        format!("C{}={}", pct(self.x), pct(self.y))
    }
}

fn pct(v: f64) -> String {
    let p = v * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    RandomMobility {
        #[serde(default = "default_speed_min")]
        speed_min_mps: f64,
        #[serde(default = "default_speed_max")]
        speed_max_mps: f64,
        #[serde(default = "default_tick_ms")]
        tick_ms: f64,
    },
    StaticTree {
        branching: usize,
    },
    StaticGraph {
        edges: Vec<(usize, usize)>,
    },
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec::RandomMobility {
            speed_min_mps: default_speed_min(),
            speed_max_mps: default_speed_max(),
            tick_ms: default_tick_ms(),
        }
    }
}

impl TopologySpec {
    pub fn is_mobile(&self) -> bool {
        matches!(self, TopologySpec::RandomMobility { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArenaConfig {
    #[serde(default = "default_base_side")]
    pub base_side_m: f64,
    #[serde(default = "default_base_nodes")]
    pub base_nodes: usize,
    /// Fixed dimensions; both or neither.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            base_side_m: default_base_side(),
            base_nodes: default_base_nodes(),
            width_m: None,
            height_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    #[serde(default = "default_range")]
    pub range_m: f64,
    #[serde(default = "default_rate")]
    pub data_rate_bps: u64,
    #[serde(default = "default_frame_size")]
    pub frame_size: u32,
    #[serde(default = "default_frame_payload")]
    pub frame_payload: u32,
    #[serde(default)]
    pub loss_prob: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            range_m: default_range(),
            data_rate_bps: default_rate(),
            frame_size: default_frame_size(),
            frame_payload: default_frame_payload(),
            loss_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    /// Independent per-node offsets in `[0, period)`.
    #[default]
    Random,
    /// Every node broadcasts at the same instants: synchronous rounds.
    Aligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Defaults to 500 ms for mobile and 100 ms for static topologies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub broadcast_period_ms: Option<f64>,
    /// Maximum gap between attestation instants, whole seconds.
    #[serde(default = "default_delta_t_max")]
    pub delta_t_max_s: u32,
    /// Timestamp tolerance before `T_att`; defaults to two periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_window_ms: Option<f64>,
    #[serde(default = "one")]
    pub epochs: usize,
    #[serde(default)]
    pub phase: PhaseMode,
    /// Pending verifications a node buffers; newer messages from the same
    /// sender replace queued older ones.
    #[serde(default = "default_queue")]
    pub queue_capacity: usize,
    /// Number of known-good configurations `|H|`.
    #[serde(default = "one")]
    pub good_configs: usize,
    #[serde(default = "default_region")]
    pub region_bytes: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            broadcast_period_ms: None,
            delta_t_max_s: default_delta_t_max(),
            validity_window_ms: None,
            epochs: 1,
            phase: PhaseMode::Random,
            queue_capacity: default_queue(),
            good_configs: 1,
            region_bytes: default_region(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    #[serde(default = "default_crypto_ms")]
    pub hash_ms: f64,
    #[serde(default = "default_crypto_ms")]
    pub hmac_ms: f64,
    #[serde(default = "default_attest_ms")]
    pub attest_ms: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            hash_ms: default_crypto_ms(),
            hmac_ms: default_crypto_ms(),
            attest_ms: default_attest_ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoConfig {
    #[serde(default = "default_key_bits")]
    pub key_bits: u32,
    #[serde(default)]
    pub hash: HashAlg,
}

impl Default for CryptoConfig {
    fn default() -> Self {
        CryptoConfig {
            key_bits: default_key_bits(),
            hash: HashAlg::Sha1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierConfig {
    /// Query instants relative to each epoch's attestation time.
    #[serde(default)]
    pub queries_ms: Vec<f64>,
    /// Report Unknown provers as suspected compromised.
    #[serde(default)]
    pub conservative: bool,
    /// Upper end of the accepted timestamp range, relative to `T_att`;
    /// defaults to the run horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max_s: Option<f64>,
    /// Verifier position in mobile scenarios; defaults to the arena centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<(f64, f64)>,
}

/// Injected attacker behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversaryPlan {
    /// Channel adversary.
    Com {
        #[serde(default)]
        drop_rate: f64,
        #[serde(default)]
        replay: bool,
        #[serde(default)]
        forge: bool,
        /// Probability of altering an in-flight message (tag left as is).
        #[serde(default)]
        tamper_rate: f64,
        /// Interval between injected forged/replayed messages.
        #[serde(default = "default_inject_ms")]
        inject_period_ms: f64,
        /// Injected messages per injection instant.
        #[serde(default = "one")]
        inject_burst: usize,
        /// Corrupt the tag of messages fetched by the verifier.
        #[serde(default)]
        corrupt_queries: bool,
        /// Demonstrates the shared-key weakness: forgeries carry valid tags.
        #[serde(default)]
        key_compromise: bool,
    },
    /// Software adversary overwriting victims' attested memory.
    Soft { victims: Vec<usize>, tamper_s: f64 },
    /// Victims steer away from honest provers.
    Mob {
        victims: Vec<usize>,
        /// Evasion speed; defaults to the topology's maximum speed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        speed_mps: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineSpec {
    #[default]
    None,
    NaiveTreeAggregation,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_horizon() -> f64 {
    300.0
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_targets() -> Vec<CoverageTarget> {
    vec![CoverageTarget { x: 0.95, y: 0.95 }]
}
fn default_speed_min() -> f64 {
    10.0
}
fn default_speed_max() -> f64 {
    30.0
}
fn default_tick_ms() -> f64 {
    100.0
}
fn default_base_side() -> f64 {
    1000.0
}
fn default_base_nodes() -> usize {
    128
}
fn default_range() -> f64 {
    75.0
}
fn default_rate() -> u64 {
    250_000
}
fn default_frame_size() -> u32 {
    127
}
fn default_frame_payload() -> u32 {
    102
}
fn default_delta_t_max() -> u32 {
    10
}
fn default_queue() -> usize {
    16
}
fn default_region() -> usize {
    256
}
fn default_crypto_ms() -> f64 {
    48.0
}
fn default_attest_ms() -> f64 {
    187.0
}
fn default_key_bits() -> u32 {
    160
}
fn default_inject_ms() -> f64 {
    100.0
}

pub(crate) fn ms(v: f64) -> SimTime {
    SimTime((v * 1000.0).round() as u64)
}

pub(crate) fn secs(v: f64) -> SimTime {
    SimTime((v * 1e6).round() as u64)
}

impl ScenarioConfig {
    /// A config with every default filled in.
    pub fn with_n(n: usize) -> Self {
        let mut cfg: ScenarioConfig =
            toml::from_str(&format!("n = {n}")).expect("minimal config parses");
        cfg.name = format!("n{n}");
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("<document>", e.to_string()))?;
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path.is_empty() {
                    "<root>".into()
                } else {
                    path
                },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validated()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn broadcast_period(&self) -> SimTime {
        let default = if self.topology.is_mobile() {
            500.0
        } else {
            100.0
        };
        ms(self.protocol.broadcast_period_ms.unwrap_or(default))
    }

    pub fn validity_window(&self) -> SimTime {
        match self.protocol.validity_window_ms {
            Some(v) => ms(v),
            None => self.broadcast_period().times(2),
        }
    }

    pub fn horizon(&self) -> SimTime {
        secs(self.horizon_s)
    }

    pub fn hmac_delay(&self) -> SimTime {
        ms(self.delays.hmac_ms)
    }

    pub fn attest_delay(&self) -> SimTime {
        ms(self.delays.attest_ms)
    }

    pub fn radio_model(&self) -> RadioModel {
        RadioModel {
            range_m: self.radio.range_m,
            data_rate_bps: self.radio.data_rate_bps,
            frame_size: self.radio.frame_size,
            frame_payload: self.radio.frame_payload,
            loss_prob: self.radio.loss_prob,
        }
    }

    pub fn arena(&self) -> Arena<f64> {
        match (self.arena.width_m, self.arena.height_m) {
            (Some(w), Some(h)) => Arena::new(w, h),
            _ => Arena::scaled(self.n, self.arena.base_side_m, self.arena.base_nodes),
        }
    }

    /// Seeds with duplicates removed, first occurrence kept.
    pub fn unique_seeds(&self) -> Vec<u64> {
        let mut seen = BTreeSet::new();
        self.seeds
            .iter()
            .copied()
            .filter(|s| seen.insert(*s))
            .collect()
    }

    pub fn validated(mut self) -> Result<Self> {
        fn e(path: impl Into<String>, message: impl Into<String>) -> Error {
            Error::config(path, message)
        }
        if self.n == 0 {
            return Err(e("n", "network size must be at least 1"));
        }
        if self.n > u32::MAX as usize / 2 {
            return Err(e("n", "network size too large"));
        }
        if self.seeds.is_empty() {
            return Err(e("seeds", "at least one seed is required"));
        }
        let unique = self.unique_seeds();
        if unique.len() != self.seeds.len() {
            log::warn!(
                "scenario `{}`: {} duplicate seed(s) removed",
                self.name,
                self.seeds.len() - unique.len()
            );
            self.seeds = unique;
        }
        positive("horizon_s", self.horizon_s)?;
        if !(0.0..=1.0).contains(&self.compromised_fraction) {
            return Err(e("compromised_fraction", "must lie in [0, 1]"));
        }
        if self.targets.is_empty() {
            return Err(e("targets", "at least one coverage target is required"));
        }
        for (k, t) in self.targets.iter().enumerate() {
            if !(t.x > 0.0 && t.x <= 1.0) {
                return Err(e(format!("targets[{k}].x"), "must lie in (0, 1]"));
            }
            if !(t.y > 0.0 && t.y <= 1.0) {
                return Err(e(format!("targets[{k}].y"), "must lie in (0, 1]"));
            }
        }
        match &self.topology {
            TopologySpec::RandomMobility {
                speed_min_mps,
                speed_max_mps,
                tick_ms,
            } => {
                positive("topology.speed_min_mps", *speed_min_mps)?;
                positive("topology.tick_ms", *tick_ms)?;
                if speed_max_mps < speed_min_mps {
                    return Err(e("topology.speed_max_mps", "must be >= speed_min_mps"));
                }
            }
            TopologySpec::StaticTree { branching } => {
                if *branching == 0 {
                    return Err(e("topology.branching", "must be at least 1"));
                }
            }
            TopologySpec::StaticGraph { edges } => {
                crate::netsim::Adjacency::from_edges(self.n, edges)?;
            }
        }
        positive("arena.base_side_m", self.arena.base_side_m)?;
        if self.arena.base_nodes == 0 {
            return Err(e("arena.base_nodes", "must be at least 1"));
        }
        match (self.arena.width_m, self.arena.height_m) {
            (Some(w), Some(h)) => {
                positive("arena.width_m", w)?;
                positive("arena.height_m", h)?;
            }
            (None, None) => {}
            _ => return Err(e("arena", "width_m and height_m must be given together")),
        }
        positive("radio.range_m", self.radio.range_m)?;
        if self.radio.data_rate_bps == 0 {
            return Err(e("radio.data_rate_bps", "must be positive"));
        }
        if self.radio.frame_payload == 0 || self.radio.frame_payload >= self.radio.frame_size {
            return Err(e(
                "radio.frame_payload",
                "must be positive and smaller than frame_size",
            ));
        }
        if !(0.0..=1.0).contains(&self.radio.loss_prob) {
            return Err(e("radio.loss_prob", "must lie in [0, 1]"));
        }
        if let Some(p) = self.protocol.broadcast_period_ms {
            positive("protocol.broadcast_period_ms", p)?;
        }
        if let Some(w) = self.protocol.validity_window_ms {
            positive("protocol.validity_window_ms", w)?;
        }
        if self.protocol.delta_t_max_s == 0 {
            return Err(e("protocol.delta_t_max_s", "must be positive"));
        }
        if self.protocol.epochs == 0 {
            return Err(e("protocol.epochs", "must be at least 1"));
        }
        if self.protocol.queue_capacity == 0 {
            return Err(e("protocol.queue_capacity", "must be at least 1"));
        }
        if self.protocol.good_configs == 0 {
            return Err(e("protocol.good_configs", "must be at least 1"));
        }
        if self.protocol.region_bytes == 0 {
            return Err(e(
                "protocol.region_bytes",
                "attested region must be non-empty",
            ));
        }
        positive("delays.hash_ms", self.delays.hash_ms)?;
        positive("delays.hmac_ms", self.delays.hmac_ms)?;
        positive("delays.attest_ms", self.delays.attest_ms)?;
        if !SUPPORTED_KEY_BITS.contains(&self.crypto.key_bits) {
            return Err(e(
                "crypto.key_bits",
                format!("expected one of {SUPPORTED_KEY_BITS:?}"),
            ));
        }
        self.energy.validate()?;
        for (k, q) in self.verifier.queries_ms.iter().enumerate() {
            if !(q.is_finite() && *q >= 0.0) {
                return Err(e(format!("verifier.queries_ms[{k}]"), "must be >= 0"));
            }
        }
        if let Some(t) = self.verifier.t_max_s {
            positive("verifier.t_max_s", t)?;
        }
        for (k, plan) in self.adversaries.iter().enumerate() {
            let at = |f: &str| format!("adversary[{k}].{f}");
            match plan {
                AdversaryPlan::Com {
                    drop_rate,
                    tamper_rate,
                    inject_period_ms,
                    ..
                } => {
                    if !(0.0..=1.0).contains(drop_rate) {
                        return Err(e(at("drop_rate"), "must lie in [0, 1]"));
                    }
                    if !(0.0..=1.0).contains(tamper_rate) {
                        return Err(e(at("tamper_rate"), "must lie in [0, 1]"));
                    }
                    positive(&at("inject_period_ms"), *inject_period_ms)?;
                }
                AdversaryPlan::Soft { victims, tamper_s } => {
                    self.check_victims(victims, &at("victims"))?;
                    if !(tamper_s.is_finite() && *tamper_s >= 0.0) {
                        return Err(e(at("tamper_s"), "must be >= 0"));
                    }
                }
                AdversaryPlan::Mob { victims, speed_mps } => {
                    self.check_victims(victims, &at("victims"))?;
                    if let Some(v) = speed_mps {
                        positive(&at("speed_mps"), *v)?;
                    }
                    if !self.topology.is_mobile() {
                        return Err(e(
                            at("kind"),
                            "mobile adversary requires random-mobility topology",
                        ));
                    }
                }
            }
        }
        if self.baseline == BaselineSpec::NaiveTreeAggregation
            && !matches!(self.topology, TopologySpec::StaticTree { .. })
        {
            return Err(e(
                "baseline",
                "naive tree aggregation requires a static-tree topology",
            ));
        }
        Ok(self)
    }

    fn check_victims(&self, victims: &[usize], path: &str) -> Result<()> {
        if let Some(v) = victims.iter().find(|&&v| v >= self.n) {
            return Err(Error::config(
                path,
                format!("victim {v} outside 0..{}", self.n),
            ));
        }
        Ok(())
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

/// Reads and validates a scenario file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&text)
}
