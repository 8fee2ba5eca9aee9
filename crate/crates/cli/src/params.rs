//! Flat key/value run configuration.
//!
//! Parameters resolve in layers: command defaults, then a named preset, then
//! a config file, then explicit flags. The resolved map is embedded in every
//! output so a run can be repeated with `--config <output.json>`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sweep,
    Trace,
    Keygen,
    Eve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Trace => "trace",
            Command::Keygen => "keygen",
            Command::Eve => "eve",
        }
    }

    fn defaults(self) -> Params {
        let mut p = Params::default();
        p.set("seed", json!(1));
        match self {
            Command::Sweep => {
                p.set("resolution", json!(101));
            }
            Command::Trace => {
                p.set("sample_rate", json!(100.0));
                p.set("duration", json!(20.0));
                p.set("bob_detune", json!(0.0));
                p.set("alice_detune", json!(0.0));
                p.set("bob_offset", json!(0.0));
                p.set("alice_offset", json!(0.0));
                p.set("toggle_time", Value::Null);
                p.set("toggle_bob_detune", Value::Null);
                p.set("toggle_alice_detune", Value::Null);
                p.set("ramp_start", Value::Null);
                p.set("ramp_duration", Value::Null);
                p.set("ramp_phase", json!(TAU));
                p.set("ramp_exponent", json!(2.0));
                p.set("leakage", json!(0.0));
                p.set("noise", json!("none"));
                p.set("sigma", json!(0.0));
                p.set("noise_target", Value::Null);
            }
            Command::Keygen => {
                p.set("rounds", json!(1000));
                p.set("noise", json!("none"));
                p.set("sigma", json!(0.0));
                p.set("threshold", json!(0.5));
                p.set("erasure_band", json!(0.1));
                p.set("tap_ratio", json!(0.0));
                p.set("placement", json!("both"));
                p.set("strategy", json!("intensity"));
            }
            Command::Eve => {
                p.set("tap_ratio", json!(0.1));
                p.set("placement", json!("outbound"));
                p.set("strategy", json!("intensity"));
                p.set("mode", json!("exact"));
                p.set("n", json!(100_000));
            }
        }
        p
    }
}

/// Named parameter sets for the standard experiments.
pub fn preset(command: Command, name: &str) -> Result<Params, CliError> {
    let mut p = Params::default();
    match (command, name) {
        (Command::Sweep, "fig2") => {
            p.set("resolution", json!(101));
        }
        (Command::Trace, "fig3a" | "bare-lab") => {
            p.set("duration", json!(20.0));
            p.set("bob_offset", json!(FRAC_PI_2));
            p.set("noise", json!("random-walk"));
            p.set("noise_target", json!(0.2));
        }
        (Command::Trace, "fig3b" | "cbw-toggle") => {
            p.set("duration", json!(20.0));
            p.set("bob_detune", json!(1.0));
            p.set("alice_detune", json!(-1.0));
            p.set("toggle_time", json!(10.0));
            p.set("toggle_bob_detune", json!(1.0));
            p.set("toggle_alice_detune", json!(1.0));
        }
        (Command::Trace, "fig4c" | "glass-ramp") => {
            p.set("duration", json!(12.0));
            p.set("ramp_start", json!(2.0));
            p.set("ramp_duration", json!(8.0));
        }
        _ => {
            return Err(CliError::Usage(format!(
                "unknown preset `{name}` for `{}` (known: {})",
                command.name(),
                preset_names(command).join(", ")
            )))
        }
    }
    Ok(p)
}

pub fn preset_names(command: Command) -> &'static [&'static str] {
    match command {
        Command::Sweep => &["fig2"],
        Command::Trace => &[
            "fig3a",
            "bare-lab",
            "fig3b",
            "cbw-toggle",
            "fig4c",
            "glass-ramp",
        ],
        Command::Keygen | Command::Eve => &[],
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, Value>,
}

impl Params {
    pub fn set(&mut self, key: &str, value: Value) {
        self.values.insert(key.to_string(), value);
    }

    pub fn set_opt<T: Into<Value>>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v.into());
        }
    }

    /// Overlays `other`, rejecting keys the base map does not know.
    fn overlay(&mut self, other: &Params, source: &str) -> Result<(), CliError> {
        for (k, v) in &other.values {
            if !self.values.contains_key(k) {
                return Err(CliError::Usage(format!("unknown key `{k}` in {source}")));
            }
            self.values.insert(k.clone(), v.clone());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.values.clone().into_iter().collect())
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.values.get(key).filter(|v| !v.is_null())
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.opt_f64(key)?
            .ok_or_else(|| CliError::Usage(format!("missing value for `{key}`")))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| {
                    CliError::Usage(format!("`{key}` must be a finite number, got {v}"))
                }),
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        let v = self
            .raw(key)
            .ok_or_else(|| CliError::Usage(format!("missing value for `{key}`")))?;
        v.as_u64().ok_or_else(|| {
            CliError::Usage(format!("`{key}` must be a non-negative integer, got {v}"))
        })
    }

    pub fn str(&self, key: &str) -> Result<&str, CliError> {
        let v = self
            .raw(key)
            .ok_or_else(|| CliError::Usage(format!("missing value for `{key}`")))?;
        v.as_str()
            .ok_or_else(|| CliError::Usage(format!("`{key}` must be a string, got {v}")))
    }
}

/// Reads a flat TOML table, or a JSON output document carrying `config`.
pub fn load_config_file(path: &Path) -> Result<Params, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut params = Params::default();
    if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let table = doc
            .get("config")
            .unwrap_or(&doc)
            .as_object()
            .ok_or_else(|| {
                CliError::Usage(format!("{}: config must be an object", path.display()))
            })?;
        for (k, v) in table {
            if v.is_object() || v.is_array() {
                return Err(CliError::Usage(format!(
                    "{}: `{k}` must be a scalar",
                    path.display()
                )));
            }
            params.set(k, v.clone());
        }
    } else {
        let table: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for (k, v) in table {
            let value = match v {
                toml::Value::Integer(i) => json!(i),
                toml::Value::Float(f) => json!(f),
                toml::Value::String(s) => json!(s),
                toml::Value::Boolean(b) => json!(b),
                _ => {
                    return Err(CliError::Usage(format!(
                        "{}: `{k}` must be a number, string or boolean",
                        path.display()
                    )))
                }
            };
            params.set(&k, value);
        }
    }
    Ok(params)
}

/// Applies defaults, preset, config file and flags, in that order.
pub fn resolve(
    command: Command,
    preset_name: Option<&str>,
    config: Option<&Path>,
    flags: &Params,
) -> Result<Params, CliError> {
    let mut params = command.defaults();
    if let Some(name) = preset_name {
        params.overlay(&preset(command, name)?, &format!("preset `{name}`"))?;
    }
    if let Some(path) = config {
        let file = load_config_file(path)?;
        params.overlay(&file, &path.display().to_string())?;
    }
    params.overlay(flags, "command-line flags")?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn layers_apply_in_order() {
        let mut flags = Params::default();
        flags.set("duration", json!(3.0));
        let p = resolve(Command::Trace, Some("fig3b"), None, &flags).unwrap();
        assert_eq!(p.f64("duration").unwrap(), 3.0);
        assert_eq!(p.f64("alice_detune").unwrap(), -1.0);
        assert_eq!(p.f64("sample_rate").unwrap(), 100.0);
        assert_eq!(p.opt_f64("ramp_start").unwrap(), None);
    }

    #[test]
    fn unknown_keys_and_presets_are_usage_errors() {
        let mut flags = Params::default();
        flags.set("bogus", json!(1));
        assert!(matches!(
            resolve(Command::Sweep, None, None, &flags),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            resolve(Command::Sweep, Some("fig3b"), None, &Params::default()),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn toml_and_json_configs() {
        let mut toml_file = tempfile::NamedTempFile::new().unwrap();
        writeln!(toml_file, "# comment\nresolution = 11\nseed = 4").unwrap();
        let p = resolve(
            Command::Sweep,
            None,
            Some(toml_file.path()),
            &Params::default(),
        )
        .unwrap();
        assert_eq!(p.u64("resolution").unwrap(), 11);
        assert_eq!(p.u64("seed").unwrap(), 4);

        let mut json_file = tempfile::NamedTempFile::new().unwrap();
        write!(
            json_file,
            r#"{{"config": {{"resolution": 7, "seed": 2}}, "other": 1}}"#
        )
        .unwrap();
        let p = resolve(
            Command::Sweep,
            None,
            Some(json_file.path()),
            &Params::default(),
        )
        .unwrap();
        assert_eq!(p.u64("resolution").unwrap(), 7);
    }

    #[test]
    fn type_errors_are_reported() {
        let mut flags = Params::default();
        flags.set("duration", json!("long"));
        let p = resolve(Command::Trace, None, None, &flags).unwrap();
        assert!(p.f64("duration").is_err());
    }
}
