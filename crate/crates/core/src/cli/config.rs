//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! mode = "conditional"          # or "rate-realistic"
//! shots_per_basis = 72
//! heralds_per_state = 1000
//! input_states = "mub"          # or a list: ["+x", { alpha = [0.6, 0.0], beta = [0.0, 0.8] }]
//!
//! [noise]
//! preset = "paper"              # or "none"; the remaining keys override single fields
//! hom_visibility = 0.9
//!
//! [rate]
//! preset = "paper"              # "paper", "paper-fit" or "unit"
//! solid_angle_fraction = 0.02
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseBudget;
use crate::protocol::{InputQubit, MubState, TeleportMode, TeleportSettings, DEFAULT_ATTEMPT_CAP};
use crate::ratebudget::{gate_probability, RateParams};
use crate::tomography::DEFAULT_SHOTS_PER_BASIS;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_HERALDS_PER_STATE: u64 = 1000;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;
pub const DEFAULT_MLE_STARTS: usize = 8;
/// Rate-realistic runs below this gate probability need `allow_unscaled_rate`.
pub const UNSCALED_RATE_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum InputEntry {
    Named(MubState),
    Amplitudes(InputQubit),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum InputStates {
    Preset(String),
    List(Vec<InputEntry>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    noise: Option<toml::Table>,
    rate: Option<toml::Table>,
    shots_per_basis: Option<u64>,
    heralds_per_state: Option<u64>,
    seed: Option<u64>,
    mode: Option<TeleportMode>,
    input_states: Option<InputStates>,
    allow_unscaled_rate: Option<bool>,
    attempt_cap: Option<u64>,
    bootstrap_resamples: Option<usize>,
    mle_starts: Option<usize>,
}

/// One input of a run. `mub` is set for the six tomography inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub label: String,
    pub qubit: InputQubit,
    pub mub: Option<MubState>,
}

impl InputSpec {
    pub fn mub(m: MubState) -> Self {
        Self { label: m.to_string(), qubit: m.into(), mub: Some(m) }
    }

    pub fn mub_set() -> Vec<Self> {
        MubState::ALL.iter().map(|&m| Self::mub(m)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub noise: NoiseBudget,
    pub rate: RateParams,
    pub shots_per_basis: u64,
    pub heralds_per_state: u64,
    pub seed: u64,
    pub mode: TeleportMode,
    pub input_states: Vec<InputSpec>,
    pub allow_unscaled_rate: bool,
    pub attempt_cap: u64,
    pub bootstrap_resamples: usize,
    pub mle_starts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            noise: NoiseBudget::paper(),
            rate: RateParams::paper(),
            shots_per_basis: DEFAULT_SHOTS_PER_BASIS,
            heralds_per_state: DEFAULT_HERALDS_PER_STATE,
            seed: DEFAULT_SEED,
            mode: TeleportMode::Conditional,
            input_states: InputSpec::mub_set(),
            allow_unscaled_rate: false,
            attempt_cap: DEFAULT_ATTEMPT_CAP,
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            mle_starts: DEFAULT_MLE_STARTS,
        }
    }
}

fn merge<T>(section: &str, base: T, overrides: Option<toml::Table>, preset: impl Fn(&str) -> Option<T>) -> Result<T>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let Some(mut overrides) = overrides else {
        return Ok(base);
    };
    let base = match overrides.remove("preset") {
        None => base,
        Some(toml::Value::String(name)) => {
            preset(&name).ok_or_else(|| Error::Config(format!("[{section}] unknown preset {name:?}")))?
        }
        Some(other) => return Err(Error::Config(format!("[{section}] preset must be a string, got {other}"))),
    };
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    table.extend(overrides);
    table.try_into().map_err(|e: toml::de::Error| Error::Config(format!("[{section}] {}", e.message())))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = Self::default();
        let noise = merge("noise", d.noise, raw.noise, |name| match name {
            "paper" => Some(NoiseBudget::paper()),
            "none" => Some(NoiseBudget::NOISELESS),
            _ => None,
        })?;
        let rate = merge("rate", d.rate, raw.rate, |name| match name {
            "paper" => Some(RateParams::paper()),
            "paper-fit" => Some(RateParams::paper_fit()),
            "unit" => Some(RateParams::unit_efficiency(1.0)),
            _ => None,
        })?;
        let input_states = match raw.input_states {
            None => d.input_states,
            Some(InputStates::Preset(name)) if name == "mub" => InputSpec::mub_set(),
            Some(InputStates::Preset(name)) => {
                return Err(Error::Config(format!("unknown input_states preset {name:?}")))
            }
            Some(InputStates::List(list)) => list
                .into_iter()
                .enumerate()
                .map(|(i, entry)| match entry {
                    InputEntry::Named(m) => InputSpec::mub(m),
                    InputEntry::Amplitudes(qubit) => InputSpec { label: format!("input{i}"), qubit, mub: None },
                })
                .collect(),
        };
        let config = Self {
            noise,
            rate,
            shots_per_basis: raw.shots_per_basis.unwrap_or(d.shots_per_basis),
            heralds_per_state: raw.heralds_per_state.unwrap_or(d.heralds_per_state),
            seed: raw.seed.unwrap_or(d.seed),
            mode: raw.mode.unwrap_or(d.mode),
            input_states,
            allow_unscaled_rate: raw.allow_unscaled_rate.unwrap_or(d.allow_unscaled_rate),
            attempt_cap: raw.attempt_cap.unwrap_or(d.attempt_cap),
            bootstrap_resamples: raw.bootstrap_resamples.unwrap_or(d.bootstrap_resamples),
            mle_starts: raw.mle_starts.unwrap_or(d.mle_starts),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.rate.validate()?;
        if self.shots_per_basis == 0 {
            return Err(Error::NoShots);
        }
        if self.heralds_per_state == 0 {
            return Err(Error::Config("heralds_per_state must be positive".into()));
        }
        if self.mle_starts == 0 {
            return Err(Error::Config("mle_starts must be positive".into()));
        }
        if self.input_states.is_empty() {
            return Err(Error::Config("input_states is empty".into()));
        }
        if self.mode == TeleportMode::RateRealistic {
            let p = gate_probability(&self.rate);
            if p <= 0.0 {
                return Err(Error::ZeroGateProbability);
            }
            if p < UNSCALED_RATE_THRESHOLD && !self.allow_unscaled_rate {
                return Err(Error::Config(format!(
                    "rate-realistic mode at gate probability {p:.3e} needs about {:.1e} attempts per herald; \
                     rescale [rate] or set allow_unscaled_rate = true",
                    1.0 / p
                )));
            }
        }
        Ok(())
    }

    pub fn teleport_settings(&self) -> TeleportSettings {
        let base = match self.mode {
            TeleportMode::Conditional => TeleportSettings::conditional(),
            TeleportMode::RateRealistic => TeleportSettings::rate_realistic(&self.rate),
        };
        TeleportSettings { attempt_cap: self.attempt_cap, ..base }
    }

    /// The six tomography inputs, in [`MubState::ALL`] order.
    pub fn mub_inputs(&self) -> Result<Vec<MubState>> {
        let found: Vec<MubState> = self.input_states.iter().filter_map(|s| s.mub).collect();
        for m in MubState::ALL {
            if !found.contains(&m) {
                return Err(Error::MissingInput(m.to_string()));
            }
        }
        Ok(MubState::ALL.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.shots_per_basis, 72);
        assert_eq!(c.input_states.len(), 6);
    }

    #[test]
    fn presets_and_overrides() {
        let c = RunConfig::from_toml_str(
            r#"
            seed = 9
            [noise]
            preset = "none"
            hom_visibility = 0
            [rate]
            preset = "paper-fit"
            attempt_rate = 40000
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.noise, NoiseBudget { hom_visibility: 0.0, ..NoiseBudget::NOISELESS });
        assert_eq!(c.rate, RateParams { attempt_rate: 40e3, ..RateParams::paper_fit() });
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["sed = 1", "[noise]\nvisibility = 0.9", "[rate]\npreset = \"fast\"", "input_states = \"all\""] {
            assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))), "{text}");
        }
        let err = RunConfig::from_toml_str("[noise]\nvisibility = 0.9").unwrap_err();
        assert!(err.to_string().contains("visibility"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml_str("shots_per_basis = 0").is_err());
        assert!(RunConfig::from_toml_str("[noise]\ndetection_error = 1.5").is_err());
        assert!(RunConfig::from_toml_str("input_states = [{ alpha = [1.0, 0.0], beta = [1.0, 0.0] }]").is_err());
    }

    #[test]
    fn custom_inputs() {
        let c = RunConfig::from_toml_str(r#"input_states = ["+x", { alpha = [0.6, 0.0], beta = [0.0, 0.8] }]"#).unwrap();
        assert_eq!(c.input_states[0], InputSpec::mub(MubState::PlusX));
        assert_eq!(c.input_states[1].label, "input1");
        assert!(matches!(c.mub_inputs(), Err(Error::MissingInput(_))));
    }

    #[test]
    fn unscaled_rate_is_gated() {
        assert!(RunConfig::from_toml_str("mode = \"rate-realistic\"").is_err());
        let ok = RunConfig::from_toml_str("mode = \"rate-realistic\"\nallow_unscaled_rate = true").unwrap();
        assert_eq!(ok.teleport_settings().mode, TeleportMode::RateRealistic);
        let scaled = RunConfig::from_toml_str("mode = \"rate-realistic\"\n[rate]\npreset = \"unit\"\nsolid_angle_fraction = 0.02").unwrap();
        assert!((gate_probability(&scaled.rate) - 1e-4).abs() < 1e-15);
    }
}
