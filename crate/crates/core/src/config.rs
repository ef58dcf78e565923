//! Experiment configuration: a single JSON document.
//!
//! Units: weights and frequencies in rad/s, times in s, phases in rad.
//! Node indices are 0-based.

use serde::{Deserialize, Serialize};

use crate::averaging::{DEFAULT_QUADRATURE, DEFAULT_S0};
use crate::certify::{CertifyOptions, EpsSearch, GammaMethod, DEFAULT_GAMMA_SAMPLES};
use crate::error::{Error, Result};
use crate::network::{ClusterPartition, OscillatorNetwork};
use crate::simulate::TOL_SYNC;
use crate::vibration::VibrationSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: usize,
    /// Undirected edges `[i, j, a_ij]`.
    pub edges: Vec<(usize, usize, f64)>,
    pub frequencies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Random cluster phases plus a uniform intra perturbation.
    Perturbed { magnitude: f64 },
    Explicit { theta: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub initial: InitialCondition,
    pub tol_sync: f64,
    /// Spacing of recorded states (s).
    pub sample_interval: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            horizon: 300.0,
            dt: 1e-3,
            seed: 0,
            initial: InitialCondition::Perturbed { magnitude: 0.1 },
            tol_sync: TOL_SYNC,
            sample_interval: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    pub s0: f64,
    pub quadrature_points: usize,
    pub gamma_method: GammaMethod,
    pub gamma_samples: usize,
    /// Clusters targeted by `design`; empty means every cluster with three
    /// or more nodes.
    pub targets: Vec<usize>,
    pub u_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// Run the simulation-based `eps*` search during `certify`.
    pub estimate_eps_star: bool,
    pub sweep_eps0: f64,
    pub sweep_halvings: usize,
    pub sweep_horizon: f64,
}

pub fn default_u_grid() -> Vec<f64> {
    (0..=60).map(|i| i as f64 / 20.0).collect()
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            s0: DEFAULT_S0,
            quadrature_points: DEFAULT_QUADRATURE,
            gamma_method: GammaMethod::Analytic,
            gamma_samples: DEFAULT_GAMMA_SAMPLES,
            targets: Vec::new(),
            u_grid: default_u_grid(),
            eps_grid: vec![0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32],
            estimate_eps_star: false,
            sweep_eps0: 0.04,
            sweep_halvings: 2,
            sweep_horizon: 5.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Used when `--out` is not given.
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub network: NetworkSpec,
    pub partition: Vec<Vec<usize>>,
    #[serde(default)]
    pub schedule: Option<VibrationSchedule>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Validated model objects built from a config.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub network: OscillatorNetwork,
    pub partition: ClusterPartition,
    pub schedule: VibrationSchedule,
}

fn finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parses JSON; errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the compact serialization.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let compact = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&compact)[..8])
    }

    pub fn build(&self) -> Result<Experiment> {
        let n = self.network.nodes;
        if self.network.frequencies.len() != n {
            return Err(Error::Config(format!(
                "frequencies has {} entries for {n} nodes",
                self.network.frequencies.len()
            )));
        }
        for (i, &w) in self.network.frequencies.iter().enumerate() {
            finite(&format!("frequency {i}"), w)?;
        }
        for &(i, j, w) in &self.network.edges {
            if i >= n || j >= n {
                return Err(Error::Config(format!("edge ({i},{j}) references a missing node")));
            }
            finite(&format!("weight ({i},{j})"), w)?;
        }
        let sim = &self.simulation;
        for (what, v) in [("horizon", sim.horizon), ("dt", sim.dt), ("tol_sync", sim.tol_sync), ("sample_interval", sim.sample_interval)] {
            finite(what, v)?;
            if v <= 0.0 && what != "horizon" {
                return Err(Error::Config(format!("{what} must be positive")));
            }
        }
        finite("s0", self.analysis.s0)?;
        if let InitialCondition::Explicit { theta } = &sim.initial {
            if theta.len() != n {
                return Err(Error::Config(format!("initial theta has {} entries for {n} nodes", theta.len())));
            }
        }
        let network = OscillatorNetwork::from_edges(n, &self.network.edges, &self.network.frequencies)?;
        let partition = ClusterPartition::new(self.partition.clone(), n)?;
        let schedule = match &self.schedule {
            Some(s) => s.clone(),
            None => VibrationSchedule::new(0.02)?,
        };
        schedule.validate(&network, &partition)?;
        Ok(Experiment {
            network,
            partition,
            schedule,
        })
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            s0: self.analysis.s0,
            quadrature_points: self.analysis.quadrature_points,
            gamma_method: self.analysis.gamma_method,
            gamma_samples: self.analysis.gamma_samples,
            seed: self.simulation.seed,
            ..CertifyOptions::default()
        }
    }

    pub fn eps_search(&self) -> EpsSearch {
        let sim = &self.simulation;
        let magnitude = match sim.initial {
            InitialCondition::Perturbed { magnitude } => magnitude,
            InitialCondition::Explicit { .. } => 0.1,
        };
        EpsSearch {
            horizon: sim.horizon,
            dt: sim.dt,
            seed: sim.seed,
            perturbation: magnitude,
            tol_sync: sim.tol_sync,
            record_every: ((sim.sample_interval / sim.dt).round() as usize).max(1),
        }
    }
}
