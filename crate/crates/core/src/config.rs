//! Run configuration.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Duration;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::gateway::BackendSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid configuration: {}", fields.join(", "))]
    Invalid { fields: Vec<String> },
    #[error("unknown configuration field `{0}`")]
    UnknownField(String),
    #[error("bad value for `{field}`: {message}")]
    BadValue { field: String, message: String },
}

/// An exact rational number in `[0, 1]`, written in config files as a decimal
/// (`0.25`) or a fraction string (`"1/4"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Proportion(Ratio<i64>);

impl Proportion {
    pub fn new(numer: i64, denom: i64) -> Self {
        Self(Ratio::new(numer, denom))
    }

    pub fn ratio(self) -> Ratio<i64> {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// Parses a decimal or `a/b` literal exactly.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            return (d != 0).then(|| Self::new(n, d));
        }
        if text.contains(['e', 'E']) {
            return Self::from_f64(text.parse().ok()?);
        }
        let (negative, digits) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part
            .chars()
            .chain(frac_part.chars())
            .all(|c| c.is_ascii_digit())
        {
            return None;
        }
        if frac_part.len() > 12 {
            return None;
        }
        let denom = 10i64.checked_pow(frac_part.len() as u32)?;
        let int: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().ok()?
        };
        let frac: i64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().ok()?
        };
        let numer = int.checked_mul(denom)?.checked_add(frac)?;
        Some(Self::new(if negative { -numer } else { numer }, denom))
    }

    /// Converts through the shortest decimal rendering of the float, so
    /// `0.1` becomes exactly 1/10.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        let text = format!("{value}");
        if text.contains(['e', 'E']) {
            return None;
        }
        Self::parse(&text)
    }
}

impl fmt::Display for Proportion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Serialize for Proportion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Proportion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(v) => Proportion::from_f64(v),
            Raw::Text(t) => Proportion::parse(&t),
        };
        parsed.ok_or_else(|| serde::de::Error::custom("not an exact decimal or fraction"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Task and buggy program only.
    Base,
    /// Adds the first failing test case.
    Io,
    /// Adds the failing test case and a model-generated fix.
    Iofix,
    /// Iofix prompting followed by simulated-student validation.
    Full,
}

impl Mode {
    pub fn uses_failing_case(self) -> bool {
        !matches!(self, Mode::Base)
    }

    pub fn uses_fix(self) -> bool {
        matches!(self, Mode::Iofix | Mode::Full)
    }

    pub fn validates(self) -> bool {
        matches!(self, Mode::Full)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Io => "io",
            Mode::Iofix => "iofix",
            Mode::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationPayload {
    Explanation,
    Hint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleVariant {
    /// `n2 >= n1` and (`n2/n >= alpha` or `n2/n >= n1/n + beta`).
    Full,
    /// `n2/n >= alpha`.
    AbsoluteOnly,
    /// `n2 >= n1` and `n2/n >= alpha`.
    NoBeta,
    /// `n2 >= n1`.
    RelativeOnly,
}

impl RuleVariant {
    pub const ALL: [RuleVariant; 4] = [
        RuleVariant::Full,
        RuleVariant::AbsoluteOnly,
        RuleVariant::NoBeta,
        RuleVariant::RelativeOnly,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecLimits {
    /// Seconds allowed per test case.
    pub wall_time_per_test: f64,
    /// Address-space cap in bytes for the child process; 0 disables it.
    pub memory_cap: u64,
    pub network_allowed: bool,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            wall_time_per_test: 5.0,
            memory_cap: 512 * 1024 * 1024,
            network_allowed: false,
        }
    }
}

impl ExecLimits {
    pub fn wall_time(&self) -> Duration {
        Duration::from_secs_f64(self.wall_time_per_test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub n_samples: u32,
    pub max_trials_k: u32,
    pub alpha: Proportion,
    pub beta: Proportion,
    pub gen_temperature: f64,
    pub sample_temperature: f64,
    pub mode: Mode,
    pub validation_payload: ValidationPayload,
    pub rule_variant: RuleVariant,
    pub tutor_backend: BackendSpec,
    pub student_backend: BackendSpec,
    pub seed: u64,
    pub limits: ExecLimits,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_samples: 10,
            max_trials_k: 3,
            alpha: Proportion::new(1, 2),
            beta: Proportion::new(1, 4),
            gen_temperature: 0.0,
            sample_temperature: 0.5,
            mode: Mode::Full,
            validation_payload: ValidationPayload::Explanation,
            rule_variant: RuleVariant::Full,
            tutor_backend: BackendSpec::replay("gpt-4-0613", "replay-cache"),
            student_backend: BackendSpec::replay("gpt-3.5-turbo-0613", "replay-cache"),
            seed: 0,
            limits: ExecLimits::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut bad = Vec::new();
        if self.n_samples < 1 {
            bad.push("n_samples");
        }
        if self.max_trials_k < 1 {
            bad.push("max_trials_k");
        }
        let unit = Proportion::new(0, 1)..=Proportion::new(1, 1);
        if !unit.contains(&self.alpha) {
            bad.push("alpha");
        }
        if !unit.contains(&self.beta) {
            bad.push("beta");
        }
        if !(0.0..=2.0).contains(&self.gen_temperature) {
            bad.push("gen_temperature");
        }
        if !(0.0..=2.0).contains(&self.sample_temperature) {
            bad.push("sample_temperature");
        }
        if !(self.limits.wall_time_per_test > 0.0 && self.limits.wall_time_per_test.is_finite()) {
            bad.push("limits.wall_time_per_test");
        }
        if self.limits.network_allowed {
            bad.push("limits.network_allowed");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid {
                fields: bad.into_iter().map(str::to_string).collect(),
            })
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let config: PipelineConfig = if text.trim().is_empty() {
            PipelineConfig::default()
        } else {
            serde_json::from_str(text).map_err(|e| ConfigError::Read {
                path: "<config>".into(),
                message: e.to_string(),
            })?
        };
        config.validate()?;
        Ok(config)
    }

    /// Names of every leaf field, dotted for nested structs.
    pub fn field_names() -> Vec<String> {
        fn walk(prefix: &str, value: &serde_json::Value, out: &mut Vec<String>) {
            match value {
                serde_json::Value::Object(map) if prefix.is_empty() || prefix == "limits" => {
                    for (k, v) in map {
                        let name = if prefix.is_empty() {
                            k.clone()
                        } else {
                            format!("{prefix}.{k}")
                        };
                        walk(&name, v, out);
                    }
                }
                _ => out.push(prefix.to_string()),
            }
        }
        let value = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
        let mut out = Vec::new();
        walk("", &value, &mut out);
        out
    }

    /// Sets one field from its textual value. `key` is a field name as listed
    /// by [`PipelineConfig::field_names`]. The result is re-validated.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut tree;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| ConfigError::UnknownField(key.to_string()))?;
        }
        *slot = match (key, serde_json::from_str::<serde_json::Value>(value)) {
            ("tutor_backend" | "student_backend", _) => {
                let spec =
                    BackendSpec::parse_cli(value).map_err(|message| ConfigError::BadValue {
                        field: key.to_string(),
                        message,
                    })?;
                serde_json::to_value(spec).expect("backend serializes")
            }
            (_, Ok(v)) if !v.is_string() || slot.is_string() => v,
            _ => serde_json::Value::String(value.to_string()),
        };
        let updated: PipelineConfig =
            serde_json::from_value(tree).map_err(|e| ConfigError::BadValue {
                field: key.to_string(),
                message: e.to_string(),
            })?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

/// Reads a JSON config file. Missing fields take their defaults; an empty
/// file yields the default configuration.
pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    PipelineConfig::from_json_str(&text).map_err(|e| match e {
        ConfigError::Read { message, .. } => ConfigError::Read {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, "").unwrap();
        let config = load_config(&path).unwrap();
        assert_eq!(config.n_samples, 10);
        assert_eq!(config.max_trials_k, 3);
        assert_eq!(config.alpha, Proportion::new(1, 2));
        assert_eq!(config.beta, Proportion::new(1, 4));
        assert_eq!(config.gen_temperature, 0.0);
        assert_eq!(config.sample_temperature, 0.5);
        assert_eq!(PipelineConfig::from_json_str("{}").unwrap(), config);
    }

    #[test]
    fn single_trial_config() {
        let config = PipelineConfig::from_json_str(r#"{"max_trials_k": 1}"#).unwrap();
        assert_eq!(config.max_trials_k, 1);
        assert_eq!(config.n_samples, 10);
    }

    #[test]
    fn out_of_range_alpha_is_reported_by_name() {
        let err = PipelineConfig::from_json_str(r#"{"alpha": 1.5, "n_samples": 0}"#).unwrap_err();
        match err {
            ConfigError::Invalid { fields } => {
                assert!(fields.contains(&"alpha".to_string()));
                assert!(fields.contains(&"n_samples".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(PipelineConfig::from_json_str(r#"{"alhpa": 0.5}"#).is_err());
    }

    #[test]
    fn proportions_parse_exactly() {
        assert_eq!(Proportion::parse("0.50"), Some(Proportion::new(1, 2)));
        assert_eq!(Proportion::parse("1/4"), Some(Proportion::new(1, 4)));
        assert_eq!(Proportion::parse(".1"), Some(Proportion::new(1, 10)));
        assert_eq!(Proportion::from_f64(0.3), Some(Proportion::new(3, 10)));
        assert_eq!(Proportion::parse("abc"), None);
        let config: PipelineConfig = serde_json::from_str(r#"{"beta": "1/3"}"#).unwrap();
        assert_eq!(config.beta, Proportion::new(1, 3));
    }

    #[test]
    fn overrides_map_to_fields() {
        let mut config = PipelineConfig::default();
        config.apply_override("max_trials_k", "1").unwrap();
        config
            .apply_override("rule_variant", "relative_only")
            .unwrap();
        config.apply_override("alpha", "0.6").unwrap();
        config
            .apply_override("limits.wall_time_per_test", "2")
            .unwrap();
        config
            .apply_override("student_backend", "replay:gpt-4-0613@cache")
            .unwrap();
        assert_eq!(config.max_trials_k, 1);
        assert_eq!(config.rule_variant, RuleVariant::RelativeOnly);
        assert_eq!(config.alpha, Proportion::new(3, 5));
        assert_eq!(config.limits.wall_time_per_test, 2.0);
        assert_eq!(config.student_backend.model_name, "gpt-4-0613");
        assert!(matches!(
            config.apply_override("nope", "1"),
            Err(ConfigError::UnknownField(_))
        ));
        assert!(config.apply_override("alpha", "2").is_err());
        assert_eq!(config.alpha, Proportion::new(3, 5));
    }

    #[test]
    fn field_names_cover_nested_limits() {
        let names = PipelineConfig::field_names();
        assert!(names.contains(&"limits.wall_time_per_test".to_string()));
        assert!(names.contains(&"tutor_backend".to_string()));
        assert!(!names.contains(&"limits".to_string()));
    }
}
