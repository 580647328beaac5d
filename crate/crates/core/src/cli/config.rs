use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homogeneity::{DEFAULT_CONSTANCY_TOLERANCE, DEFAULT_RANK_TOLERANCE, KILLING_TOLERANCE};
use crate::tensor::DEFAULT_PD_FLOOR;

/// A config value that failed validation, named by its `section.key` path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError { field: field.into(), reason: reason.into() }
    }
}

pub const DEFAULT_DENSITY: usize = 40;
pub const MIN_DENSITY: usize = 4;

/// A scenario file. See the README for the grammar; every section except
/// `[geometry]` may be omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// drives the sampled checks: level-set seeds and Killing sample points
    #[serde(default)]
    pub seed: u64,
    pub geometry: GeometryConfig,
    /// catalog parameters, e.g. `profile = "2+sin(3*t)"`
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub invariants: InvariantConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

/// Either `catalog` or the inline fields `coords`, `metric`, `domain`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub catalog: Option<String>,
    /// index into the catalog entry's charts
    #[serde(default)]
    pub chart: usize,
    pub label: Option<String>,
    pub coords: Option<Vec<String>>,
    /// packed upper triangle, row by row
    pub metric: Option<Vec<String>>,
    pub domain: Option<Vec<[f64; 2]>>,
    /// per-axis period, 0 for a non-periodic axis
    pub periods: Option<Vec<f64>>,
    pub margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub density: usize,
    /// per-axis densities, overriding `density`
    pub densities: Option<Vec<usize>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { density: DEFAULT_DENSITY, densities: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub constancy: f64,
    pub rank: f64,
    pub killing: f64,
    pub pd_floor: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            constancy: DEFAULT_CONSTANCY_TOLERANCE,
            rank: DEFAULT_RANK_TOLERANCE,
            killing: KILLING_TOLERANCE,
            pd_floor: DEFAULT_PD_FLOOR,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantConfig {
    pub max_order: Option<usize>,
    pub max_factors: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub report: bool,
    pub invariant_field: bool,
    pub level_sets: bool,
    pub stratification: bool,
    /// how many level sets to trace
    pub level_set_count: usize,
    /// run the catalog Killing fields through the tangency check
    pub killing: bool,
    /// sample points per axis for the Killing tangency check
    pub killing_samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            report: true,
            invariant_field: true,
            level_sets: true,
            stratification: true,
            level_set_count: 4,
            killing: true,
            killing_samples: 4,
        }
    }
}

impl OutputConfig {
    /// Whether the pipeline needs the rank of `dW` at every grid point.
    pub fn needs_ranks(&self) -> bool {
        self.invariant_field || self.stratification || self.level_sets
    }
}

impl ScenarioConfig {
    /// A catalog scenario with default settings.
    pub fn catalog(name: &str) -> Self {
        ScenarioConfig {
            seed: 0,
            geometry: GeometryConfig { catalog: Some(name.to_string()), ..Default::default() },
            params: BTreeMap::new(),
            grid: GridConfig::default(),
            tolerances: ToleranceConfig::default(),
            invariants: InvariantConfig::default(),
            outputs: OutputConfig::default(),
        }
    }

    /// Parses and validates scenario text, applying `section.key=value`
    /// overrides first.
    pub fn from_toml_str<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("<file>", e.message()))?;
        for o in overrides {
            apply_override(&mut table, o.as_ref())?;
        }
        let config: ScenarioConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            ConfigError::new("<file>", e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        let inline = [g.coords.is_some(), g.metric.is_some(), g.domain.is_some()];
        match (&g.catalog, inline.iter().any(|x| *x)) {
            (Some(_), true) => {
                return Err(ConfigError::new("geometry", "give either `catalog` or inline coords/metric/domain, not both"))
            }
            (None, false) => return Err(ConfigError::new("geometry", "missing `catalog` or inline metric")),
            (None, true) => {
                let Some(coords) = &g.coords else { return Err(ConfigError::new("geometry.coords", "missing")) };
                let n = coords.len();
                if n == 0 {
                    return Err(ConfigError::new("geometry.coords", "no coordinates"));
                }
                match &g.metric {
                    Some(m) if m.len() == n * (n + 1) / 2 => {}
                    Some(m) => {
                        return Err(ConfigError::new(
                            "geometry.metric",
                            format!("need {} upper-triangle entries, got {}", n * (n + 1) / 2, m.len()),
                        ))
                    }
                    None => return Err(ConfigError::new("geometry.metric", "missing")),
                }
                match &g.domain {
                    Some(d) if d.len() == n => {
                        if let Some(iv) = d.iter().find(|iv| !(iv[0].is_finite() && iv[1].is_finite() && iv[0] < iv[1])) {
                            return Err(ConfigError::new("geometry.domain", format!("bad interval {iv:?}")));
                        }
                    }
                    Some(d) => return Err(ConfigError::new("geometry.domain", format!("need {n} intervals, got {}", d.len()))),
                    None => return Err(ConfigError::new("geometry.domain", "missing")),
                }
                if let Some(p) = &g.periods {
                    if p.len() != n {
                        return Err(ConfigError::new("geometry.periods", format!("need {n} entries, got {}", p.len())));
                    }
                    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        return Err(ConfigError::new("geometry.periods", "periods must be finite and non-negative"));
                    }
                }
                if !self.params.is_empty() {
                    return Err(ConfigError::new("params", "parameters only apply to catalog geometries"));
                }
            }
            (Some(_), false) => {
                if g.periods.is_some() || g.margin.is_some() {
                    return Err(ConfigError::new("geometry", "`periods` and `margin` only apply to inline metrics"));
                }
            }
        }
        if let Some(m) = g.margin {
            if !(0.0..0.5).contains(&m) {
                return Err(ConfigError::new("geometry.margin", "must lie in [0, 0.5)"));
            }
        }
        match &self.grid.densities {
            Some(ds) => {
                if let Some(d) = ds.iter().find(|d| **d < MIN_DENSITY) {
                    return Err(ConfigError::new("grid.densities", format!("{d} is below the minimum of {MIN_DENSITY}")));
                }
            }
            None if self.grid.density < MIN_DENSITY => {
                return Err(ConfigError::new(
                    "grid.density",
                    format!("{} is below the minimum of {MIN_DENSITY}", self.grid.density),
                ))
            }
            None => {}
        }
        let t = &self.tolerances;
        for (name, v) in [("constancy", t.constancy), ("rank", t.rank), ("killing", t.killing), ("pd_floor", t.pd_floor)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(format!("tolerances.{name}"), "must be a positive number"));
            }
        }
        if self.outputs.killing && self.outputs.killing_samples < 2 {
            return Err(ConfigError::new("outputs.killing_samples", "need at least 2 samples per axis"));
        }
        Ok(())
    }
}

/// `section.key=value` or `key=value` for top-level keys. The value is read
/// as a TOML value, falling back to a bare string.
fn apply_override(table: &mut toml::Table, text: &str) -> Result<(), ConfigError> {
    let (path, raw) = text.split_once('=').ok_or_else(|| ConfigError::new(text, "override must look like key=value"))?;
    let path = path.trim();
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) || parts.len() > 2 {
        return Err(ConfigError::new(path, "override key must be `key` or `section.key`"));
    }
    match parts[..] {
        [key] => {
            table.insert(key.to_string(), value);
        }
        [section, key] => {
            let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sub) = entry else {
                return Err(ConfigError::new(path, format!("`{section}` is not a section")));
            };
            sub.insert(key.to_string(), value);
        }
        _ => unreachable!(),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_catalog_config() {
        let c = ScenarioConfig::from_toml_str::<&str>("[geometry]\ncatalog = \"sphere2\"\n", &[]).unwrap();
        assert_eq!(c.grid.density, DEFAULT_DENSITY);
        assert_eq!(c.geometry.catalog.as_deref(), Some("sphere2"));
    }

    #[test]
    fn density_below_minimum() {
        let e = ScenarioConfig::from_toml_str("[geometry]\ncatalog = \"sphere2\"\n", &["grid.density=2"]).unwrap_err();
        assert_eq!(e.field, "grid.density");
    }

    #[test]
    fn overrides_and_params() {
        let text = "seed = 3\n[geometry]\ncatalog = \"revolution\"\n[params]\nprofile = \"2+sin(3*t)\"\nt_min = -1\n";
        let c = ScenarioConfig::from_toml_str(text, &["params.profile=2+t^2", "tolerances.rank=1e-5", "seed=9"]).unwrap();
        assert_eq!(c.params["profile"], ParamValue::Text("2+t^2".into()));
        assert_eq!(c.params["t_min"], ParamValue::Number(-1.0));
        assert_eq!(c.tolerances.rank, 1e-5);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn inline_metric() {
        let text = r#"
[geometry]
coords = ["x", "y"]
metric = ["1", "0", "exp(2*x)"]
domain = [[-1, 1], [0, 2]]
periods = [0, 2]
"#;
        let c = ScenarioConfig::from_toml_str::<&str>(text, &[]).unwrap();
        assert_eq!(c.geometry.domain.unwrap()[1], [0.0, 2.0]);
        let bad = ScenarioConfig::from_toml_str(text, &["geometry.metric=[\"1\"]"]).unwrap_err();
        assert_eq!(bad.field, "geometry.metric");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_tolerances() {
        assert!(ScenarioConfig::from_toml_str("[geometry]\ncatalog = \"sphere2\"\nfoo = 1\n", &[""; 0]).is_err());
        let e = ScenarioConfig::from_toml_str("[geometry]\ncatalog = \"sphere2\"\n", &["tolerances.constancy=0"]).unwrap_err();
        assert_eq!(e.field, "tolerances.constancy");
        let e = ScenarioConfig::from_toml_str("[geometry]\ncatalog = \"sphere2\"\n", &["invariants.max_order=-1"]).unwrap_err();
        assert_eq!(e.field, "<file>");
    }
}
