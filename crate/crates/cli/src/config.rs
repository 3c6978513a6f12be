//! TOML run configuration and `--set` overrides.
use afrelay::channels::{AlphaMuParams, EnergyConfig, NakagamiParams, Scheme};
use afrelay::endtoend::{db_to_linear, SystemConfig};
use afrelay::mcsim::SimMode;
use afrelay::metrics::ModulationParams;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NakSection {
    pub m1: f64,
    pub omega1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmSection {
    pub alpha2: f64,
    pub mu2: f64,
    pub omega2: f64,
}

/// Noise powers are given either linearly (`n1`, `n2`) or as `ps_n1_db`,
/// `ps_n2_db` = P_S/N_i in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub scheme: Scheme,
    pub kappa: f64,
    pub theta_eff: f64,
    pub t0: f64,
    pub t1: f64,
    pub battery: f64,
    pub source_power: f64,
    pub d1: f64,
    pub d2: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ps_n1_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ps_n2_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationSection {
    /// Preset name (BPSK, BFSK, QPSK); ignored when `rho` and `tau` are set.
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    /// γ₀ of truncated channel inversion; the OPRA cutoff when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcifr_cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub mode: SimMode,
    pub draws: u64,
    pub seed: u64,
    pub streams: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Fixed relay gain constant C.
    pub c: f64,
    pub nak: NakSection,
    pub am: AmSection,
    pub energy: EnergySection,
    pub modulation: ModulationSection,
    pub policy: PolicySection,
    pub simulation: SimulationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sys = SystemConfig::default();
        let e = sys.energy;
        RunConfig {
            c: sys.c,
            nak: NakSection { m1: sys.nak.m1, omega1: sys.nak.omega1 },
            am: AmSection { alpha2: sys.am.alpha2, mu2: sys.am.mu2, omega2: sys.am.omega2 },
            energy: EnergySection {
                scheme: e.scheme,
                kappa: e.kappa,
                theta_eff: e.theta_eff,
                t0: e.t0,
                t1: e.t1,
                battery: e.battery,
                source_power: e.source_power,
                d1: e.d1,
                d2: e.d2,
                delta: e.delta,
                n1: None,
                n2: None,
                ps_n1_db: Some(40.0),
                ps_n2_db: Some(100.0),
            },
            modulation: ModulationSection::default(),
            policy: PolicySection::default(),
            simulation: SimulationSection::default(),
        }
    }
}

impl Default for NakSection {
    fn default() -> Self {
        RunConfig::default().nak
    }
}

impl Default for AmSection {
    fn default() -> Self {
        RunConfig::default().am
    }
}

impl Default for EnergySection {
    fn default() -> Self {
        let mut e = RunConfig::default().energy;
        e.ps_n1_db = None;
        e.ps_n2_db = None;
        e
    }
}

impl Default for ModulationSection {
    fn default() -> Self {
        ModulationSection { name: "BPSK".into(), rho: None, tau: None }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { mode: SimMode::IndependentApproximation, draws: 1_000_000, seed: 1, streams: 64 }
    }
}

fn noise(linear: Option<f64>, db: Option<f64>, source_power: f64, name: &str) -> Result<f64, CliError> {
    match (linear, db) {
        (Some(_), Some(_)) => Err(CliError::Config(format!("energy.{name} and energy.ps_{name}_db are both set"))),
        (Some(v), None) => Ok(v),
        (None, Some(db)) => Ok(source_power / db_to_linear(db)),
        (None, None) => Err(CliError::Config(format!("energy.{name} or energy.ps_{name}_db is required"))),
    }
}

impl RunConfig {
    pub fn system(&self) -> Result<SystemConfig, CliError> {
        let e = &self.energy;
        let sys = SystemConfig {
            nak: NakagamiParams { m1: self.nak.m1, omega1: self.nak.omega1 },
            am: AlphaMuParams { alpha2: self.am.alpha2, mu2: self.am.mu2, omega2: self.am.omega2 },
            energy: EnergyConfig {
                scheme: e.scheme,
                kappa: e.kappa,
                theta_eff: e.theta_eff,
                t0: e.t0,
                t1: e.t1,
                battery: e.battery,
                source_power: e.source_power,
                d1: e.d1,
                d2: e.d2,
                delta: e.delta,
                n1: noise(e.n1, e.ps_n1_db, e.source_power, "n1")?,
                n2: noise(e.n2, e.ps_n2_db, e.source_power, "n2")?,
            },
            c: self.c,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn modulation(&self) -> Result<ModulationParams, CliError> {
        let m = &self.modulation;
        let params = match (m.rho, m.tau) {
            (Some(rho), Some(tau)) => ModulationParams { rho, tau },
            (None, None) => ModulationParams::preset(&m.name)
                .ok_or_else(|| CliError::Config(format!("unknown modulation preset '{}'", m.name)))?,
            _ => return Err(CliError::Config("modulation.rho and modulation.tau must be set together".into())),
        };
        params.validate()?;
        Ok(params)
    }

    /// Canonical TOML text; parses back to an identical configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Parses configuration text, applies `path=value` overrides in order and
/// checks the result.
pub fn load(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    for item in overrides {
        let (path, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{item}' is not of the form path=value")))?;
        set_path(&mut table, path.trim(), parse_value(value.trim()))?;
    }
    from_table(table)
}

pub fn from_table(table: Table) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    let e = &mut cfg.energy;
    if e.n1.is_none() && e.ps_n1_db.is_none() {
        e.ps_n1_db = Some(40.0);
    }
    if e.n2.is_none() && e.ps_n2_db.is_none() {
        e.ps_n2_db = Some(100.0);
    }
    cfg.system()?;
    Ok(cfg)
}

/// Reads a TOML scalar, falling back to a bare string.
pub fn parse_value(text: &str) -> Value {
    let probe = format!("v = {text}");
    match probe.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

const KNOWN_PATHS: &[&str] = &[
    "c",
    "nak.m1",
    "nak.omega1",
    "am.alpha2",
    "am.mu2",
    "am.omega2",
    "energy.scheme",
    "energy.kappa",
    "energy.theta_eff",
    "energy.t0",
    "energy.t1",
    "energy.battery",
    "energy.source_power",
    "energy.d1",
    "energy.d2",
    "energy.delta",
    "energy.n1",
    "energy.n2",
    "energy.ps_n1_db",
    "energy.ps_n2_db",
    "modulation.name",
    "modulation.rho",
    "modulation.tau",
    "policy.tcifr_cutoff",
    "simulation.mode",
    "simulation.draws",
    "simulation.seed",
    "simulation.streams",
];

pub fn is_known_path(path: &str) -> bool {
    KNOWN_PATHS.contains(&path)
}

/// Sets `path` in `table`. Setting one form of a noise power removes the other.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<(), CliError> {
    if !is_known_path(path) {
        return Err(CliError::Config(format!("unknown configuration path '{path}'")));
    }
    let mut parts: Vec<&str> = path.split('.').collect();
    let key = parts.pop().expect("nonempty path");
    let mut node = table;
    for section in parts {
        let entry = node.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("'{section}' is not a section")))?;
    }
    let twin = match key {
        "n1" => Some("ps_n1_db"),
        "ps_n1_db" => Some("n1"),
        "n2" => Some("ps_n2_db"),
        "ps_n2_db" => Some("n2"),
        _ => None,
    };
    if let Some(t) = twin {
        node.remove(t);
    }
    node.insert(key.to_string(), value);
    Ok(())
}
