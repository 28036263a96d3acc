//! End-to-end scenario runs over communication rounds.
//!
//! Three kinds are supported: direct-only federated learning (`Cvfl`), where
//! only devices within the base-station delay cutoff contribute, and the
//! clustered variants with a shared feature space (`DbflHomogeneous`) or with
//! per-device feature subsets unified by autoencoders (`DbflHeterogeneous`).

mod run;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use run::{prepare_dataset, run_energy_only, run_scenario, run_scenario_on, LinkDelay, RoundTrace, ScenarioRun};
pub use sweep::{delay_sweep, SweepRow};

use crate::aggregation::AggregationMethod;
use crate::clustering::ClusterPolicy;
use crate::data::{DatasetSchema, SyntheticParams};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::head_selection::HeadPolicy;
use crate::topology::{LinkModel, MobilityModel, Position};
use crate::DeviceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Cvfl,
    DbflHomogeneous,
    DbflHeterogeneous,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Cvfl,
        ScenarioKind::DbflHomogeneous,
        ScenarioKind::DbflHeterogeneous,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Cvfl => "cvfl",
            ScenarioKind::DbflHomogeneous => "dbfl_homogeneous",
            ScenarioKind::DbflHeterogeneous => "dbfl_heterogeneous",
        }
    }

    pub fn is_clustered(self) -> bool {
        self != ScenarioKind::Cvfl
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cvfl" => Ok(ScenarioKind::Cvfl),
            "dbfl_homogeneous" | "homogeneous" | "hom" => Ok(ScenarioKind::DbflHomogeneous),
            "dbfl_heterogeneous" | "heterogeneous" | "het" => Ok(ScenarioKind::DbflHeterogeneous),
            other => Err(Error::InvalidConfig(format!("unknown scenario {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: DeviceId,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub mobile: bool,
    /// Fixed base-station latency; derived from distance when absent.
    #[serde(default)]
    pub bs_latency_s: Option<f64>,
    /// Starting energy; drawn from the energy model's range when absent.
    #[serde(default)]
    pub battery: Option<f64>,
}

impl DeviceSpec {
    pub fn pos(&self) -> Position {
        Position::new(self.x, self.y)
    }
}

/// One aerial base station at the origin and five devices: three within
/// the 100 m range implied by the default link, two beyond it. Devices 0 and
/// 4 are mobile.
pub fn default_devices() -> Vec<DeviceSpec> {
    let spec = |id, x, y, mobile| DeviceSpec {
        id,
        x,
        y,
        mobile,
        bs_latency_s: None,
        battery: None,
    };
    vec![
        spec(0, 50.0, 0.0, true),
        spec(1, 0.0, 80.0, false),
        spec(2, -30.0, 84.852_813_742_385_7, false),
        spec(3, 110.0, 50.0, false),
        spec(4, 0.0, 150.0, true),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPlan {
    pub schema: DatasetSchema,
    pub synthetic: SyntheticParams,
    /// Load this CSV instead of generating the synthetic surrogate.
    pub csv: Option<PathBuf>,
    pub samples_per_device: usize,
    /// Share of each device's rows held out as its probe set.
    pub probe_fraction: f64,
    /// Rows held out for global evaluation before partitioning.
    pub test_samples: usize,
}

impl Default for DataPlan {
    fn default() -> Self {
        Self {
            schema: DatasetSchema::default(),
            synthetic: SyntheticParams::default(),
            csv: None,
            samples_per_device: 3500,
            probe_fraction: 0.1,
            test_samples: 2000,
        }
    }
}

impl DataPlan {
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        self.synthetic.validate()?;
        if self.samples_per_device < 2 {
            return Err(Error::InvalidConfig("samples_per_device must be >= 2".into()));
        }
        if !(self.probe_fraction > 0.0 && self.probe_fraction < 1.0) {
            return Err(Error::InvalidConfig("probe_fraction must lie in (0, 1)".into()));
        }
        if self.test_samples == 0 {
            return Err(Error::InvalidConfig("test_samples must be positive".into()));
        }
        Ok(())
    }

    /// Rows of a device partition that go to its probe set.
    pub fn probe_rows(&self) -> usize {
        ((self.probe_fraction * self.samples_per_device as f64).ceil() as usize).clamp(1, self.samples_per_device - 1)
    }

    pub fn train_rows(&self) -> usize {
        self.samples_per_device - self.probe_rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPlan {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    /// Features per device in the heterogeneous scenario.
    pub subset_size: usize,
    pub latent_dim: usize,
    pub autoencoder_epochs: usize,
    pub autoencoder_learning_rate: f64,
    pub meta_hidden_units: usize,
    pub meta_epochs: usize,
    pub meta_learning_rate: f64,
}

impl Default for ModelPlan {
    fn default() -> Self {
        Self {
            hidden_units: 80,
            learning_rate: 0.01,
            batch_size: 32,
            local_epochs: 1,
            subset_size: 50,
            latent_dim: 25,
            autoencoder_epochs: 20,
            autoencoder_learning_rate: 0.1,
            meta_hidden_units: 0,
            meta_epochs: 20,
            meta_learning_rate: 0.1,
        }
    }
}

impl ModelPlan {
    pub fn validate(&self, num_features: usize) -> Result<()> {
        if self.hidden_units == 0 || self.batch_size == 0 || self.local_epochs == 0 {
            return Err(Error::InvalidConfig(
                "hidden_units, batch_size and local_epochs must be positive".into(),
            ));
        }
        if self.subset_size == 0 || self.subset_size > num_features {
            return Err(Error::InvalidConfig(format!(
                "subset_size must lie in [1, {num_features}]"
            )));
        }
        if self.latent_dim == 0 || self.latent_dim > self.subset_size {
            return Err(Error::InvalidConfig("latent_dim must lie in [1, subset_size]".into()));
        }
        for lr in [
            self.learning_rate,
            self.autoencoder_learning_rate,
            self.meta_learning_rate,
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidConfig("learning rates must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub rounds: u32,
    pub seed: u64,
    pub devices: Vec<DeviceSpec>,
    pub link: LinkModel,
    pub mobility: MobilityModel,
    pub cluster_policy: ClusterPolicy,
    pub head_policy: HeadPolicy,
    pub aggregation: AggregationMethod,
    pub energy: EnergyModel,
    pub data: DataPlan,
    pub model: ModelPlan,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::DbflHomogeneous,
            rounds: 100,
            seed: 0,
            devices: default_devices(),
            link: LinkModel::default(),
            mobility: MobilityModel::default(),
            cluster_policy: ClusterPolicy::default(),
            head_policy: HeadPolicy::default(),
            aggregation: AggregationMethod::WeightedAveraging,
            energy: EnergyModel::default(),
            data: DataPlan::default(),
            model: ModelPlan::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::InvalidConfig("at least one device is required".into()));
        }
        let mut ids: Vec<DeviceId> = self.devices.iter().map(|d| d.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateDevice(w[0]));
        }
        for d in &self.devices {
            if !d.pos().is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "device {} has a non-finite position",
                    d.id
                )));
            }
            if let Some(l) = d.bs_latency_s {
                if !(l.is_finite() && l >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "device {} latency must be finite and >= 0",
                        d.id
                    )));
                }
            }
            if let Some(b) = d.battery {
                if !(0.0..=100.0).contains(&b) {
                    return Err(Error::InvalidConfig(format!(
                        "device {} battery outside [0, 100]",
                        d.id
                    )));
                }
            }
        }
        if !(self.mobility.max_step_m >= 0.0 && self.mobility.roam_radius_m >= 0.0) {
            return Err(Error::InvalidConfig("mobility distances must be >= 0".into()));
        }
        self.link.validate()?;
        self.cluster_policy.validate()?;
        self.head_policy.validate()?;
        self.energy.validate()?;
        self.data.validate()?;
        self.model.validate(self.data.schema.num_features)
    }

    pub fn with_kind(&self, kind: ScenarioKind) -> Self {
        Self { kind, ..self.clone() }
    }
}
