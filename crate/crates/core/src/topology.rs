//! Device placement, mobility and delay-gated connectivity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::DeviceId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn scaled(&self, c: f64) -> Position {
        Position::new(self.x * c, self.y * c)
    }
}

/// A simulated edge, IoT or vehicular device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceNode {
    pub id: DeviceId,
    pub pos: Position,
    pub mobile: bool,
    /// Remaining energy units in `[0, 100]`.
    pub battery: f64,
    /// Manually assigned latency to the base station. When absent the
    /// latency is derived from the distance to the base station.
    pub bs_latency_s: Option<f64>,
    pub partition_id: usize,
    pub feature_dim: usize,
}

impl DeviceNode {
    pub fn validate(&self) -> Result<()> {
        if !self.pos.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "device {} has a non-finite position",
                self.id
            )));
        }
        if !(0.0..=100.0).contains(&self.battery) {
            return Err(Error::InvalidConfig(format!(
                "device {} battery {} outside [0, 100]",
                self.id, self.battery
            )));
        }
        if let Some(l) = self.bs_latency_s {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "device {} latency {} must be finite and >= 0",
                    self.id, l
                )));
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig(format!("device {} has zero features", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    pub max_transmission_time_s: f64,
    pub delay_per_meter_s: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            max_transmission_time_s: 0.1,
            delay_per_meter_s: 1e-3,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.max_transmission_time_s) && ok(self.delay_per_meter_s) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "link cutoff and delay-per-meter must be positive".into(),
            ))
        }
    }

    /// Largest distance whose derived delay still connects.
    pub fn range_m(&self) -> f64 {
        self.max_transmission_time_s / self.delay_per_meter_s
    }
}

/// Delay of a transmission from `from` to `to_pos`: the override when given,
/// otherwise distance times the per-meter delay.
pub fn transmission_delay(
    link: &LinkModel,
    from: &DeviceNode,
    to_pos: &Position,
    override_latency_s: Option<f64>,
) -> f64 {
    match override_latency_s {
        Some(l) => l,
        None => from.pos.distance(to_pos) * link.delay_per_meter_s,
    }
}

/// Boundary inclusive: a delay equal to the cutoff still connects.
pub fn can_connect(link: &LinkModel, delay_s: f64) -> bool {
    delay_s <= link.max_transmission_time_s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityModel {
    /// Longest distance a mobile node covers in one round.
    pub max_step_m: f64,
    /// Waypoints are drawn uniformly from the disc of this radius around the
    /// node's home position.
    pub roam_radius_m: f64,
}

impl Default for MobilityModel {
    fn default() -> Self {
        Self {
            max_step_m: 5.0,
            roam_radius_m: 10.0,
        }
    }
}

/// Random-waypoint state of one mobile node.
#[derive(Debug, Clone, PartialEq)]
pub struct Roamer {
    pub home: Position,
    pub waypoint: Position,
}

impl Roamer {
    pub fn new(home: Position) -> Self {
        Self { home, waypoint: home }
    }

    /// Moves `pos` one step towards the current waypoint, drawing a fresh
    /// waypoint once it has been reached.
    pub fn step<R: Rng>(&mut self, model: &MobilityModel, pos: &mut Position, rng: &mut R) {
        if pos.distance(&self.waypoint) < 1e-9 {
            let r = model.roam_radius_m * rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            self.waypoint = Position::new(self.home.x + r * theta.cos(), self.home.y + r * theta.sin());
        }
        let d = pos.distance(&self.waypoint);
        if d <= model.max_step_m {
            *pos = self.waypoint;
        } else {
            let f = model.max_step_m / d;
            pos.x += (self.waypoint.x - pos.x) * f;
            pos.y += (self.waypoint.y - pos.y) * f;
        }
    }
}
