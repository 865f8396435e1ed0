//! Gateway and simulation configuration, read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use grs_core::firmware::FirmwareConfig;
use grs_core::framing::LinkConfig;
use grs_core::plant::PlantParams;
use grs_core::station::StationConfig;
use grs_core::time::Span;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{path}: {field}: {msg}")]
    Field { path: PathBuf, field: String, msg: String },
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Credential file; relative paths resolve against the config file.
    pub credentials: Option<PathBuf>,
    pub log_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gateway: GatewaySettings,
    #[serde(rename = "panel", default)]
    pub panels: Vec<PanelConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySettings {
    pub lockout_threshold: u32,
    pub lockout_seconds: u64,
    pub session_seconds: u64,
    pub audit_rotate_bytes: u64,
    pub audit_keep: usize,
    /// Hysteresis width used by the auto loop.
    pub auto_hysteresis: f64,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            lockout_threshold: 5,
            lockout_seconds: 300,
            session_seconds: 3600,
            audit_rotate_bytes: 1 << 20,
            audit_keep: 5,
            auto_hysteresis: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirmwareSettings {
    pub pulse_ms: u64,
    pub debounce_ms: u64,
    pub cycle_ms: u64,
    pub max_rx_per_cycle: usize,
}

impl Default for FirmwareSettings {
    fn default() -> Self {
        FirmwareSettings { pulse_ms: 200, debounce_ms: 50, cycle_ms: 10, max_rx_per_cycle: 32 }
    }
}

fn default_baud() -> u32 {
    9600
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelConfig {
    pub id: String,
    pub name: String,
    /// Signal map file; the built-in map when absent.
    pub map: Option<PathBuf>,
    #[serde(default = "default_baud")]
    pub baud: u32,
    #[serde(default)]
    pub propagation_us: u64,
    #[serde(default)]
    pub params: PlantParams,
    #[serde(default)]
    pub firmware: FirmwareSettings,
}

impl PanelConfig {
    pub fn new(id: &str, name: &str) -> PanelConfig {
        PanelConfig {
            id: id.into(),
            name: name.into(),
            map: None,
            baud: default_baud(),
            propagation_us: 0,
            params: PlantParams::default(),
            firmware: FirmwareSettings::default(),
        }
    }

    pub fn station_config(&self) -> Result<StationConfig, String> {
        let link = LinkConfig::new(self.baud)
            .map_err(|e| e.to_string())?
            .with_propagation(Span::from_micros(self.propagation_us));
        self.params.validate().map_err(|e| e.to_string())?;
        let fw = &self.firmware;
        if fw.cycle_ms == 0 {
            return Err("firmware.cycle_ms must be positive".into());
        }
        Ok(StationConfig {
            params: self.params.clone(),
            firmware: FirmwareConfig {
                pulse: Span::from_millis(fw.pulse_ms),
                debounce: Span::from_millis(fw.debounce_ms),
                cycle: Span::from_millis(fw.cycle_ms),
                max_rx_per_cycle: fw.max_rx_per_cycle,
            },
            down: link.clone(),
            up: link,
        })
    }
}

impl Config {
    pub fn single_panel() -> Config {
        Config {
            listen: default_listen(),
            credentials: None,
            log_dir: None,
            seed: 0,
            gateway: GatewaySettings::default(),
            panels: vec![PanelConfig::new("panel-1", "GRS panel 1")],
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Config, ConfigError> {
        let mut cfg: Config = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), msg: e.to_string().trim_end().to_string() })?;
        let field = |field: String, msg: String| ConfigError::Field { path: path.to_path_buf(), field, msg };

        if cfg.panels.is_empty() {
            return Err(field("panel".into(), "at least one [[panel]] is required".into()));
        }
        let mut ids = BTreeSet::new();
        for (i, p) in cfg.panels.iter().enumerate() {
            if !ids.insert(p.id.clone()) {
                return Err(field(format!("panel[{i}].id"), format!("duplicate id `{}`", p.id)));
            }
            p.station_config().map_err(|m| field(format!("panel[{i}]"), m))?;
        }
        if cfg.gateway.lockout_threshold == 0 {
            return Err(field("gateway.lockout_threshold".into(), "must be at least 1".into()));
        }

        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(c) = cfg.credentials.as_mut() {
            resolve(c);
        }
        if let Some(d) = cfg.log_dir.as_mut() {
            resolve(d);
        }
        for p in &mut cfg.panels {
            if let Some(m) = p.map.as_mut() {
                resolve(m);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Config::parse(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"
listen = "0.0.0.0:9000"
credentials = "creds.txt"

[[panel]]
id = "panel-1"
name = "Boiler house A"

[[panel]]
id = "panel-2"
name = "Boiler house B"
baud = 19200
params = { k_heat = 0.8, t_highhigh = 120.0 }
"#;

    #[test]
    fn two_panels() {
        let cfg = Config::parse(TWO, Path::new("/etc/grs/grs.toml")).unwrap();
        assert_eq!(cfg.panels.len(), 2);
        assert_eq!(cfg.credentials.as_deref(), Some(Path::new("/etc/grs/creds.txt")));
        assert_eq!(cfg.panels[1].params.k_heat, 0.8);
        assert_eq!(cfg.panels[1].params.k_cool, 0.1);
        assert_eq!(cfg.gateway.lockout_threshold, 5);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = Config::parse("[[panel]]\nid = \"a\"\nname = \"b\"\nbogus = 1\n", Path::new("x.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "[[panel]]\nid = \"a\"\nname = \"b\"\n[[panel]]\nid = \"a\"\nname = \"c\"\n";
        let err = Config::parse(text, Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("panel[1].id"), "{err}");
    }

    #[test]
    fn bad_baud_and_params_rejected() {
        let text = "[[panel]]\nid = \"a\"\nname = \"b\"\nbaud = 9601\n";
        assert!(Config::parse(text, Path::new("x.toml")).is_err());
        let text = "[[panel]]\nid = \"a\"\nname = \"b\"\nparams = { k_heat = -1.0 }\n";
        assert!(Config::parse(text, Path::new("x.toml")).is_err());
    }

    #[test]
    fn missing_file() {
        assert!(matches!(Config::load(Path::new("/nonexistent/grs.toml")), Err(ConfigError::Io { .. })));
    }
}
