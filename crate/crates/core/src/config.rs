//! Scenario files. Times are given in minutes and converted to hours; rates
//! are per hour; power is MW except per-device ratings (kW).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{BusSpec, Network, NetworkSpec};
use crate::multistate::{ConventionalReserve, UnitModel};
use crate::population::PopulationSpec;
use crate::reliability::{
    ClusterPolicy, Generator, McSettings, ReserveUnit, Scenario, SolverSettings,
};
use crate::stochastic::UncertaintySpec;

/// Example files shipped with the library, addressable by file name.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "table1_fleet.json",
        include_str!("../data/table1_fleet.json"),
    ),
    ("rts24_like.json", include_str!("../data/rts24_like.json")),
    (
        "rts24_network.json",
        include_str!("../data/rts24_network.json"),
    ),
    ("desk6bus.json", include_str!("../data/desk6bus.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    Inline(NetworkSpec),
    /// Path relative to the scenario file, or the name of a bundled network.
    File(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default)]
    pub name: String,
    /// Bus id.
    pub bus: usize,
    /// Identical independent copies.
    #[serde(default = "one")]
    pub count: usize,
    pub model: UnitModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReserveConfig {
    #[serde(default)]
    pub name: String,
    pub bus: usize,
    #[serde(default = "one")]
    pub count: usize,
    pub capacity_mw: f64,
    pub lambda: f64,
    pub mu: f64,
    pub commit_min: f64,
    #[serde(default)]
    pub lead_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TclBus {
    pub bus: usize,
    pub share: f64,
}

fn one() -> usize {
    1
}

fn default_clusters() -> ClusterPolicy {
    ClusterPolicy::Auto { q_max: 10 }
}

fn default_ambient() -> f64 {
    32.0
}

fn default_deploy() -> f64 {
    60.0
}

fn default_beta() -> f64 {
    1.0
}

fn default_horizon() -> f64 {
    240.0
}

fn default_dt() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub population: PopulationSpec,
    #[serde(default = "default_clusters")]
    pub clusters: ClusterPolicy,
    #[serde(default)]
    pub cluster_seed: u64,
    /// Forecast ambient temperature (°C).
    #[serde(default = "default_ambient")]
    pub ambient_c: f64,
    #[serde(default = "default_deploy")]
    pub deployment_min: f64,
    /// Setpoint shift at deployment (°C).
    #[serde(default = "default_beta")]
    pub beta_c: f64,
    #[serde(default)]
    pub uncertainty: UncertaintySpec,
    #[serde(default)]
    pub standby_failure: f64,
    /// Where the TCLs sit; defaults to proportional to the initial bus loads.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tcl_buses: Vec<TclBus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSource>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reserves: Vec<ReserveConfig>,
    /// Multiplies every bus load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_scale: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon_min: f64,
    #[serde(default = "default_dt")]
    pub dt_min: f64,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots_min: Vec<f64>,
}

/// A parsed scenario file plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub base_dir: Option<PathBuf>,
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        Error::Config(format!(
            "{origin}: line {}, column {}, field `{}`: {inner}",
            inner.line(),
            inner.column(),
            e.path()
        ))
    })
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig> {
    parse(text, origin)
}

/// Load a scenario from disk, falling back to the bundled files by name.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(LoadedConfig {
            config: parse_scenario(&text, &path.display().to_string())?,
            base_dir: path.parent().map(Path::to_path_buf),
        }),
        Err(err) => {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            match bundled(name) {
                Some(text) if path.components().count() == 1 => Ok(LoadedConfig {
                    config: parse_scenario(text, name)?,
                    base_dir: None,
                }),
                _ => Err(Error::Config(format!(
                    "cannot read {}: {err}",
                    path.display()
                ))),
            }
        }
    }
}

impl LoadedConfig {
    pub fn bundled(name: &str) -> Result<Self> {
        let text =
            bundled(name).ok_or_else(|| Error::Config(format!("no bundled file named {name}")))?;
        Ok(Self {
            config: parse_scenario(text, name)?,
            base_dir: None,
        })
    }

    fn network_spec(&self) -> Result<Option<NetworkSpec>> {
        let Some(src) = &self.config.network else {
            return Ok(None);
        };
        let spec = match src {
            NetworkSource::Inline(spec) => spec.clone(),
            NetworkSource::File(name) => {
                let on_disk = self
                    .base_dir
                    .as_ref()
                    .map(|d| d.join(name))
                    .filter(|p| p.exists());
                match on_disk {
                    Some(p) => {
                        let text = std::fs::read_to_string(&p)?;
                        parse(&text, &p.display().to_string())?
                    }
                    None => parse(
                        bundled(name).ok_or_else(|| {
                            Error::Config(format!("network file {name} not found"))
                        })?,
                        name,
                    )?,
                }
            }
        };
        Ok(Some(spec))
    }

    /// Config with the network inlined, the form that is hashed and archived.
    pub fn resolved(&self) -> Result<ScenarioConfig> {
        let mut c = self.config.clone();
        c.network = self.network_spec()?.map(NetworkSource::Inline);
        Ok(c)
    }

    /// SHA-256 of the resolved config's canonical JSON.
    pub fn hash(&self) -> Result<String> {
        let text =
            serde_json::to_string(&self.resolved()?).map_err(|e| Error::Config(e.to_string()))?;
        Ok(hex(&Sha256::digest(text.as_bytes())))
    }

    /// Scenario in internal units. Without a network a single unloaded bus is
    /// used, which is enough for the fleet-only subcommands.
    pub fn scenario(&self) -> Result<Scenario> {
        let c = &self.config;
        let mut spec = self.network_spec()?.unwrap_or_else(|| NetworkSpec {
            buses: vec![BusSpec {
                id: 1,
                load_mw: 0.0,
                load_trace: None,
            }],
            lines: vec![],
            reference_bus: 1,
            network_states: vec![],
        });
        if let Some(scale) = c.load_scale {
            if !(scale >= 0.0) {
                return Err(Error::Config(format!(
                    "load_scale must be nonnegative, got {scale}"
                )));
            }
            for b in &mut spec.buses {
                b.load_mw *= scale;
                if let Some(tr) = &mut b.load_trace {
                    tr.iter_mut().for_each(|p| p.1 *= scale);
                }
            }
        }
        let network = Network::new(spec)?;
        let bus = |id: usize, what: &str| {
            network
                .bus_index(id)
                .ok_or_else(|| Error::Config(format!("{what} refers to unknown bus {id}")))
        };
        let n = network.bus_count();
        let tcl_shares = if c.tcl_buses.is_empty() {
            let loads = network.loads_at(0.0);
            let total: f64 = loads.iter().sum();
            if total > 0.0 {
                loads.iter().map(|l| l / total).collect()
            } else {
                let mut v = vec![0.0; n];
                v[network.reference] = 1.0;
                v
            }
        } else {
            let mut v = vec![0.0; n];
            for t in &c.tcl_buses {
                v[bus(t.bus, "tcl_buses")?] += t.share;
            }
            v
        };
        let mut generators = Vec::new();
        for g in &c.generators {
            let b = bus(g.bus, "generator")?;
            for i in 0..g.count {
                generators.push(Generator {
                    name: if g.count > 1 {
                        format!("{}#{}", g.name, i + 1)
                    } else {
                        g.name.clone()
                    },
                    bus: b,
                    model: g.model.clone(),
                });
            }
        }
        let mut reserves = Vec::new();
        for r in &c.reserves {
            let b = bus(r.bus, "reserve")?;
            for i in 0..r.count {
                reserves.push(ReserveUnit {
                    name: if r.count > 1 {
                        format!("{}#{}", r.name, i + 1)
                    } else {
                        r.name.clone()
                    },
                    bus: b,
                    unit: ConventionalReserve {
                        capacity_mw: r.capacity_mw,
                        lambda: r.lambda,
                        mu: r.mu,
                        commit_h: r.commit_min / 60.0,
                        lead_h: r.lead_min / 60.0,
                    },
                });
            }
        }
        let scenario = Scenario {
            name: c.name.clone(),
            population: c.population.clone(),
            clusters: c.clusters,
            cluster_seed: c.cluster_seed,
            ambient: c.ambient_c,
            t_s: c.deployment_min / 60.0,
            beta: c.beta_c,
            uncertainty: c.uncertainty.clone(),
            standby_failure: c.standby_failure,
            tcl_shares,
            generators,
            reserves,
            network,
            horizon_h: c.horizon_min / 60.0,
            dt_h: c.dt_min / 60.0,
            solver: c.solver,
            mc: c.mc,
            snapshots_h: c.snapshots_min.iter().map(|m| m / 60.0).collect(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
