//! Layered run configuration: built-in defaults, then a config file, then
//! `--set key=value` overrides, then dedicated flags.
//!
//! A config file is either flat text
//!
//! ```text
//! # comment
//! output_dir = runs/a
//! [solve]
//! omega = 0.1
//! scan.points = 30
//! ```
//!
//! or the equivalent JSON object `{"output_dir": "runs/a", "solve": {"omega": 0.1}, "scan": {"points": 30}}`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const SECTIONS: &[&str] = &["solve", "scan", "invert", "minimize", "simulate", "verify"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub output_dir: Option<String>,
    pub sections: Map<String, Value>,
}

/// Scalar from the right-hand side of `key = value`: JSON if it parses,
/// otherwise a bare string.
pub fn parse_scalar(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Parses a `key=value` pair as given to `--set`.
pub fn parse_assignment(text: &str) -> Result<(String, Value), String> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{text}`"))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(format!("empty key in `{text}`"));
    }
    Ok((key.to_string(), parse_scalar(v)))
}

pub fn parse_config(text: &str) -> Result<ConfigFile, String> {
    let root = if text.trim_start().starts_with('{') {
        serde_json::from_str::<Value>(text).map_err(|e| format!("config JSON: {e}"))?
    } else {
        flat_to_json(text)?
    };
    let Value::Object(map) = root else {
        return Err("config must be an object".into());
    };
    let mut out = ConfigFile::default();
    for (key, value) in map {
        if key == "output_dir" {
            match value {
                Value::String(s) => out.output_dir = Some(s),
                other => return Err(format!("output_dir must be a string, got {other}")),
            }
        } else if SECTIONS.contains(&key.as_str()) {
            if !value.is_object() {
                return Err(format!("section `{key}` must be an object"));
            }
            out.sections.insert(key, value);
        } else {
            return Err(format!("unknown config key `{key}`"));
        }
    }
    Ok(out)
}

fn flat_to_json(text: &str) -> Result<Value, String> {
    let mut root = Map::new();
    let mut section: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let (key, value) =
            parse_assignment(line).map_err(|e| format!("line {}: {e}", lineno + 1))?;
        let (sec, key) = match key.split_once('.') {
            Some((s, k)) => (Some(s.to_string()), k.to_string()),
            None => (section.clone(), key),
        };
        match sec {
            None => {
                root.insert(key, value);
            }
            Some(s) => {
                let entry = root
                    .entry(s.clone())
                    .or_insert_with(|| Value::Object(Map::new()));
                let Value::Object(m) = entry else {
                    return Err(format!(
                        "line {}: `{s}` is both a key and a section",
                        lineno + 1
                    ));
                };
                m.insert(key, value);
            }
        }
    }
    Ok(Value::Object(root))
}

/// Applies `overrides` to the serialized defaults of `T`, rejecting keys
/// the defaults do not have, and deserializes the result.
pub fn resolve<T>(section: &str, layers: &[&Map<String, Value>]) -> Result<T, String>
where
    T: Default + Serialize + DeserializeOwned,
{
    let Value::Object(mut merged) =
        serde_json::to_value(T::default()).map_err(|e| e.to_string())?
    else {
        unreachable!("parameter sets serialize to objects");
    };
    for layer in layers {
        for (k, v) in layer.iter() {
            if !merged.contains_key(k) {
                let known: Vec<&str> = merged.keys().map(String::as_str).collect();
                return Err(format!(
                    "unknown key `{section}.{k}`; expected one of: {}",
                    known.join(", ")
                ));
            }
            merged.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| format!("section `{section}`: {e}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub omega: f64,
    pub one_d: bool,
    /// Truncation radius; `null` picks it from ω.
    pub r_max: Option<f64>,
    pub spacing: f64,
    pub ode_tolerance: f64,
    pub bisection_tolerance: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            omega: 0.1,
            one_d: false,
            r_max: None,
            spacing: 0.02,
            ode_tolerance: 1e-12,
            bisection_tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanParams {
    pub points: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    /// `log`, `uniform` or `arcsine`.
    pub spacing: String,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            points: 30,
            omega_min: 0.005,
            omega_max: 0.18,
            spacing: "log".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertParams {
    pub mass: f64,
    /// Points of the bracketing branch table.
    pub points: usize,
    pub mass_tolerance: f64,
}

impl Default for InvertParams {
    fn default() -> Self {
        Self {
            mass: 23.4,
            points: 30,
            mass_tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeParams {
    /// Absolute mass; `null` uses `mass_factor` times the Townes mass.
    pub mass: Option<f64>,
    pub mass_factor: f64,
    pub seed_width: f64,
    pub r_max: f64,
    pub nodes: usize,
    pub time_step: f64,
    pub max_steps: usize,
    pub stationarity_tolerance: f64,
    /// Compare against the shooting branch.
    pub compare: bool,
}

impl Default for MinimizeParams {
    fn default() -> Self {
        Self {
            mass: None,
            mass_factor: 2.0,
            seed_width: 3.0,
            r_max: 150.0,
            nodes: 15001,
            time_step: 1.0,
            max_steps: 20000,
            stationarity_tolerance: 1e-10,
            compare: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    /// `stability`, `boost`, `scattering` or `fidelity`.
    pub experiment: String,
    pub omega: f64,
    pub delta: f64,
    /// `null` selects the experiment's default for this and the next four
    /// keys.
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub n: Option<usize>,
    pub box_length: Option<f64>,
    pub sample_interval: Option<f64>,
    pub velocity: [f64; 2],
    pub center: [f64; 2],
    pub mass_fraction: f64,
    pub width: f64,
    pub seed: u64,
    pub snapshot: bool,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            experiment: "stability".into(),
            omega: 0.15,
            delta: 1e-2,
            t_final: None,
            dt: None,
            n: None,
            box_length: None,
            sample_interval: None,
            velocity: [0.5, 0.0],
            center: [0.0, 0.0],
            mass_fraction: 0.5,
            width: 2.0,
            seed: 7,
            snapshot: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    pub quick: bool,
    pub seed: u64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            quick: false,
            seed: 2024,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_json_forms_agree() {
        let flat = "# runs\noutput_dir = \"out/a\"\n[solve]\nomega = 0.12\none_d = true\nscan.points = 12\n";
        let json = r#"{"output_dir": "out/a", "solve": {"omega": 0.12, "one_d": true}, "scan": {"points": 12}}"#;
        assert_eq!(parse_config(flat).unwrap(), parse_config(json).unwrap());
    }

    #[test]
    fn bare_strings_are_accepted() {
        let c = parse_config("output_dir = out/b\nscan.spacing = arcsine\n").unwrap();
        assert_eq!(c.output_dir.as_deref(), Some("out/b"));
        assert_eq!(
            c.sections["scan"]["spacing"],
            Value::String("arcsine".into())
        );
    }

    #[test]
    fn unknown_sections_and_keys_are_rejected() {
        assert!(parse_config("bogus = 1").unwrap_err().contains("bogus"));
        assert!(parse_config("[plot]\nx = 1").is_err());
        let c = parse_config("[solve]\nomegaa = 0.1").unwrap();
        let Value::Object(m) = &c.sections["solve"] else {
            panic!()
        };
        let err = resolve::<SolveParams>("solve", &[m]).unwrap_err();
        assert!(err.contains("solve.omegaa"));
    }

    #[test]
    fn later_layers_win() {
        let a: Map<String, Value> = [("omega".to_string(), Value::from(0.05))]
            .into_iter()
            .collect();
        let b: Map<String, Value> = [("omega".to_string(), Value::from(0.07))]
            .into_iter()
            .collect();
        let p: SolveParams = resolve("solve", &[&a, &b]).unwrap();
        assert_eq!(p.omega, 0.07);
        assert!(!p.one_d);
    }

    #[test]
    fn type_errors_are_reported() {
        let a: Map<String, Value> = [("points".to_string(), Value::from("many"))]
            .into_iter()
            .collect();
        assert!(resolve::<ScanParams>("scan", &[&a]).is_err());
    }

    #[test]
    fn assignment_parsing() {
        assert_eq!(
            parse_assignment("a=1").unwrap(),
            ("a".into(), Value::from(1))
        );
        assert_eq!(
            parse_assignment("v=[0.5, 0]").unwrap().1,
            serde_json::json!([0.5, 0])
        );
        assert!(parse_assignment("novalue").is_err());
        assert!(parse_assignment("=3").is_err());
    }
}
