//! Per-node energy accounting.
//!
//! A node's cost for one activity is
//! `cycle * (payload_scale * distance^attenuation * payload + compute_coeff * samples * epochs)`,
//! a transmission power law plus a compute term, both scaled by the node's
//! consumption cycle.
//!
//! Remaining energy is kept in integer nano-units so that the per-round ledger
//! sums to the consumed energy exactly.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::DeviceId;

pub const MIN_CYCLE: f64 = 0.2;
pub const MAX_CYCLE: f64 = 0.35;

/// Coefficients for one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub attenuation: f64,
    pub cycle: f64,
    pub compute_coeff: f64,
    pub payload_scale: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            attenuation: 2.0,
            cycle: MIN_CYCLE,
            compute_coeff: 1e-4,
            payload_scale: 1e-4,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation > 0.0 && self.attenuation.is_finite()) {
            return Err(Error::InvalidConfig("attenuation must be positive".into()));
        }
        if !(MIN_CYCLE..=MAX_CYCLE).contains(&self.cycle) {
            return Err(Error::InvalidConfig(format!(
                "consumption cycle {} outside [{MIN_CYCLE}, {MAX_CYCLE}]",
                self.cycle
            )));
        }
        if !(self.compute_coeff >= 0.0 && self.payload_scale >= 0.0) {
            return Err(Error::InvalidConfig("energy coefficients must be >= 0".into()));
        }
        Ok(())
    }

    pub fn transmission_energy(&self, distance_m: f64, payload: f64) -> f64 {
        self.cycle * self.payload_scale * distance_power(distance_m, self.attenuation) * payload
    }

    pub fn compute_energy(&self, samples: f64, epochs: f64) -> f64 {
        self.cycle * self.compute_coeff * samples * epochs
    }
}

fn distance_power(d: f64, attenuation: f64) -> f64 {
    // Exact squaring keeps the doubling-quadruples relation bit-exact.
    if attenuation == 2.0 {
        d * d
    } else {
        d.powf(attenuation)
    }
}

/// Energy spent by one node for transmitting `payload` over `distance_m` and
/// computing `samples * epochs` sample-epochs.
pub fn round_energy(params: &EnergyParams, distance_m: f64, payload: f64, samples: f64, epochs: f64) -> f64 {
    params.transmission_energy(distance_m, payload) + params.compute_energy(samples, epochs)
}

/// Model size relative to a reference model: the reference has payload 1.
pub fn normalized_payload(param_count: usize, reference_param_count: usize) -> f64 {
    param_count as f64 / reference_param_count.max(1) as f64
}

/// Shared energy knobs of a scenario; per-node cycles are drawn from
/// `[cycle_min, cycle_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub attenuation: f64,
    pub cycle_min: f64,
    pub cycle_max: f64,
    pub compute_coeff: f64,
    pub payload_scale: f64,
    /// Aggregation work at a head, as a fraction of one local epoch.
    pub aggregation_epoch_fraction: f64,
    pub initial_min: f64,
    pub initial_max: f64,
    pub head_initial: f64,
    /// Transmission distances are taken as link delay divided by this
    /// per-meter delay, so slower links cost more energy.
    pub reference_delay_per_meter_s: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        let p = EnergyParams::default();
        Self {
            attenuation: p.attenuation,
            cycle_min: MIN_CYCLE,
            cycle_max: MAX_CYCLE,
            compute_coeff: p.compute_coeff,
            payload_scale: p.payload_scale,
            aggregation_epoch_fraction: 0.1,
            initial_min: 80.0,
            initial_max: 100.0,
            head_initial: 100.0,
            reference_delay_per_meter_s: 1e-3,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_CYCLE <= self.cycle_min && self.cycle_min <= self.cycle_max && self.cycle_max <= MAX_CYCLE) {
            return Err(Error::InvalidConfig(format!(
                "cycle range must lie within [{MIN_CYCLE}, {MAX_CYCLE}]"
            )));
        }
        if !(0.0 <= self.initial_min && self.initial_min <= self.initial_max && self.initial_max <= 100.0)
            || !(0.0..=100.0).contains(&self.head_initial)
        {
            return Err(Error::InvalidConfig("initial energies must lie within [0, 100]".into()));
        }
        if !(self.reference_delay_per_meter_s > 0.0 && self.reference_delay_per_meter_s.is_finite()) {
            return Err(Error::InvalidConfig(
                "reference delay per meter must be positive".into(),
            ));
        }
        if !(self.aggregation_epoch_fraction >= 0.0) {
            return Err(Error::InvalidConfig("aggregation work must be >= 0".into()));
        }
        self.params_for(self.cycle_min).validate()
    }

    pub fn params_for(&self, cycle: f64) -> EnergyParams {
        EnergyParams {
            attenuation: self.attenuation,
            cycle,
            compute_coeff: self.compute_coeff,
            payload_scale: self.payload_scale,
        }
    }

    /// Delay-equivalent distance of a link with delay `delay_s`.
    pub fn effective_distance(&self, delay_s: f64) -> f64 {
        delay_s / self.reference_delay_per_meter_s
    }

    pub fn draw_cycle<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.cycle_max > self.cycle_min {
            rng.random_range(self.cycle_min..=self.cycle_max)
        } else {
            self.cycle_min
        }
    }

    pub fn draw_initial<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.initial_max > self.initial_min {
            rng.random_range(self.initial_min..=self.initial_max)
        } else {
            self.initial_min
        }
    }
}

const NANO: f64 = 1e9;

/// Energy in integer nano-units, the resolution at which charges are kept.
pub fn to_nano(units: f64) -> u64 {
    (units * NANO).round() as u64
}

pub fn from_nano(n: u64) -> f64 {
    n as f64 / NANO
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    initial: BTreeMap<DeviceId, u64>,
    remaining: BTreeMap<DeviceId, u64>,
}

impl EnergyState {
    pub fn new(initial: impl IntoIterator<Item = (DeviceId, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (id, e) in initial {
            if !(0.0..=100.0).contains(&e) {
                return Err(Error::InvalidConfig(format!(
                    "initial energy {e} of device {id} outside [0, 100]"
                )));
            }
            if map.insert(id, to_nano(e)).is_some() {
                return Err(Error::DuplicateDevice(id));
            }
        }
        Ok(Self {
            remaining: map.clone(),
            initial: map,
        })
    }

    /// Overrides a node's starting energy before any round has been applied.
    pub fn reset_initial(&mut self, id: DeviceId, energy: f64) {
        let n = to_nano(energy.clamp(0.0, 100.0));
        self.initial.insert(id, n);
        self.remaining.insert(id, n);
    }

    pub fn remaining(&self, id: DeviceId) -> f64 {
        self.remaining.get(&id).copied().map_or(0.0, from_nano)
    }

    pub fn initial(&self, id: DeviceId) -> f64 {
        self.initial.get(&id).copied().map_or(0.0, from_nano)
    }

    pub fn consumed(&self, id: DeviceId) -> f64 {
        match (self.initial.get(&id), self.remaining.get(&id)) {
            (Some(i), Some(r)) => from_nano(i - r),
            _ => 0.0,
        }
    }

    pub fn is_dead(&self, id: DeviceId) -> bool {
        self.remaining.get(&id).is_none_or(|&r| r == 0)
    }

    pub fn ids(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.remaining.keys().copied()
    }

    /// Charges per-node costs, clamping at zero. Returns the amount actually
    /// charged to each node; dead nodes are charged nothing.
    pub fn apply_round(&mut self, costs: &BTreeMap<DeviceId, f64>) -> BTreeMap<DeviceId, f64> {
        let mut charged = BTreeMap::new();
        for (&id, &cost) in costs {
            let Some(rem) = self.remaining.get_mut(&id) else {
                continue;
            };
            let want = to_nano(cost.max(0.0));
            let take = want.min(*rem);
            *rem -= take;
            charged.insert(id, from_nano(take));
        }
        charged
    }
}

/// Accumulates per-round charged amounts in nano-units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    totals: BTreeMap<DeviceId, u64>,
}

impl EnergyLedger {
    pub fn record(&mut self, charged: &BTreeMap<DeviceId, f64>) {
        for (&id, &e) in charged {
            *self.totals.entry(id).or_default() += to_nano(e);
        }
    }

    pub fn total(&self, id: DeviceId) -> f64 {
        self.totals.get(&id).copied().map_or(0.0, from_nano)
    }

    pub fn grand_total(&self) -> f64 {
        from_nano(self.totals.values().sum())
    }
}
