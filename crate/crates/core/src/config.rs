//! Run configuration. Every field has a default, so a config file only needs
//! the keys it wants to change.

use std::collections::BTreeMap;

use ampforge_lang::MethodDef;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ASSERTION_FORMS: &[&str] = &[
    "assert:",
    "deny:",
    "assert:equals:",
    "deny:equals:",
    "assert:description:",
    "deny:description:",
    "should:raise:",
    "shouldnt:raise:",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplifierSettings {
    pub enabled: bool,
    pub weight: f64,
}

impl Default for AmplifierSettings {
    fn default() -> Self {
        AmplifierSettings { enabled: true, weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplificationConfig {
    /// Rounds of input amplification per test; 0 runs assertion amplification only.
    pub n_iteration: usize,
    /// Upper bound on test inputs kept per round.
    pub n_max_inputs: usize,
    /// Depth bound for object serialization.
    pub n_serialization: usize,
    /// Executions compared when looking for non-deterministic values.
    pub n_flakiness: usize,
    pub seed: u64,
    /// Wall-clock budget for one class, checked between phases.
    pub time_budget_s: Option<f64>,
    /// Wall-clock limit for a single test execution.
    pub exec_timeout_s: f64,
    /// Smallest send budget a mutant run gets, however short the original test.
    pub min_send_budget: u64,
    /// Mutant runs may use this many times the sends of the unmutated run.
    pub send_budget_factor: u64,
    pub amplifiers: BTreeMap<String, AmplifierSettings>,
    pub assertion_forms: Vec<String>,
    /// Pragmas marking a method as private; selectors starting with `_` are always private.
    pub private_markers: Vec<String>,
}

impl Default for AmplificationConfig {
    fn default() -> Self {
        AmplificationConfig {
            n_iteration: 3,
            n_max_inputs: 10,
            n_serialization: 3,
            n_flakiness: 10,
            seed: 0,
            time_budget_s: None,
            exec_timeout_s: 10.0,
            min_send_budget: 100_000,
            send_budget_factor: 5,
            amplifiers: BTreeMap::new(),
            assertion_forms: DEFAULT_ASSERTION_FORMS.iter().map(|s| s.to_string()).collect(),
            private_markers: vec!["private".into(), "deprecated".into()],
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

impl AmplificationConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        let cfg: AmplificationConfig = toml::from_str(src)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.exec_timeout_s.is_finite() && self.exec_timeout_s > 0.0) {
            return Err(ConfigError::Invalid("exec_timeout_s must be a positive number".into()));
        }
        if let Some(b) = self.time_budget_s {
            if !(b.is_finite() && b >= 0.0) {
                return Err(ConfigError::Invalid("time_budget_s must be a non-negative number".into()));
            }
        }
        if self.send_budget_factor == 0 {
            return Err(ConfigError::Invalid("send_budget_factor must be at least 1".into()));
        }
        for (name, a) in &self.amplifiers {
            if !crate::input_amp::AMPLIFIER_NAMES.contains(&name.as_str()) {
                return Err(ConfigError::Invalid(format!("unknown amplifier `{name}`")));
            }
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(ConfigError::Invalid(format!("amplifier `{name}` needs a positive weight")));
            }
        }
        Ok(())
    }

    pub fn is_private(&self, method: &MethodDef) -> bool {
        method.selector.starts_with('_') || self.private_markers.iter().any(|m| method.has_pragma(m))
    }

    pub fn amplifier(&self, name: &str) -> AmplifierSettings {
        self.amplifiers.get(name).cloned().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_keep_defaults() {
        let cfg = AmplificationConfig::from_toml_str(
            "n_iteration = 1\n[amplifiers.literals]\nweight = 2.5\n[amplifiers.call_add]\nenabled = false\n",
        )
        .unwrap();
        assert_eq!(cfg.n_iteration, 1);
        assert_eq!(cfg.n_max_inputs, 10);
        assert_eq!(cfg.amplifier("literals"), AmplifierSettings { enabled: true, weight: 2.5 });
        assert!(!cfg.amplifier("call_add").enabled);
        assert_eq!(cfg.amplifier("call_remove"), AmplifierSettings::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(AmplificationConfig::from_toml_str("n_iterations = 1").is_err());
        assert!(AmplificationConfig::from_toml_str("exec_timeout_s = 0.0").is_err());
        assert!(AmplificationConfig::from_toml_str("[amplifiers.literals]\nweight = 0.0").is_err());
        assert!(AmplificationConfig::from_toml_str("[amplifiers.fuzz]\nweight = 1.0").is_err());
    }
}
