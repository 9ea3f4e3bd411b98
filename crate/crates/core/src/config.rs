//! Generation settings shared by the simulator, goal generator and CLI.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {expected}, got {got}")]
    OutOfRange { field: &'static str, expected: &'static str, got: String },
}

/// Sampling parameters sent with every completion request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub max_tokens: u32,
}

impl DecodeParams {
    /// Temperature sampling preset (default).
    pub fn sampling() -> Self {
        Self { temperature: 0.7, top_p: 1.0, frequency_penalty: 1.0, max_tokens: 256 }
    }

    /// Nucleus sampling preset with p = 0.7.
    pub fn nucleus() -> Self {
        Self { top_p: 0.7, ..Self::sampling() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "sampling" => Some(Self::sampling()),
            "nucleus" => Some(Self::nucleus()),
            _ => None,
        }
    }
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self::sampling()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Number of in-context example dialogues.
    pub n_shots: usize,
    /// Softmax temperature for example selection.
    pub select_temperature: f64,
    pub max_turns: usize,
    pub max_domains: usize,
    pub max_slots_per_domain: usize,
    pub decode: DecodeParams,
    /// Extra attempts after a failed completion parse or filter rejection.
    pub retries: u32,
    pub rng_seed: Option<u64>,
    /// Model context window in estimated tokens; prompt plus `max_tokens` must fit.
    pub context_tokens: usize,
    /// Number of single-turn demonstrations in DST augmentation prompts.
    pub dst_shots: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_shots: 2,
            select_temperature: 0.2,
            max_turns: 12,
            max_domains: 4,
            max_slots_per_domain: 6,
            decode: DecodeParams::default(),
            retries: 2,
            rng_seed: None,
            context_tokens: 4097,
            dst_shots: 2,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, expected, got: String| Err(ConfigError::OutOfRange { field, expected, got });
        if !(self.select_temperature > 0.0 && self.select_temperature.is_finite()) {
            return bad("select_temperature", "> 0", self.select_temperature.to_string());
        }
        if self.n_shots < 1 {
            return bad("n_shots", ">= 1", self.n_shots.to_string());
        }
        if self.max_turns < 1 {
            return bad("max_turns", ">= 1", self.max_turns.to_string());
        }
        if self.max_domains < 1 {
            return bad("max_domains", ">= 1", self.max_domains.to_string());
        }
        if self.max_slots_per_domain < 1 {
            return bad("max_slots_per_domain", ">= 1", self.max_slots_per_domain.to_string());
        }
        if self.dst_shots < 1 {
            return bad("dst_shots", ">= 1", self.dst_shots.to_string());
        }
        let d = &self.decode;
        if !(0.0..=2.0).contains(&d.temperature) {
            return bad("decode.temperature", "in [0, 2]", d.temperature.to_string());
        }
        if !(0.0..=2.0).contains(&d.top_p) {
            return bad("decode.top_p", "in [0, 2]", d.top_p.to_string());
        }
        if d.max_tokens == 0 {
            return bad("decode.max_tokens", ">= 1", "0".into());
        }
        Ok(())
    }
}
