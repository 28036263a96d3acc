//! Device-head election by ordered rules.
//!
//! Candidates must reach the base station. Among those, the head is the one
//! with the smallest aggregated distance to the other cluster members, then
//! the most remaining battery, then stationary over mobile, then the lowest
//! base-station latency, and finally the lowest device id.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::clustering::Cluster;
use crate::error::{Error, Result};
use crate::topology::DeviceNode;
use crate::DeviceId;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadCandidateView {
    pub device_id: DeviceId,
    pub bs_connectable: bool,
    pub aggregated_distance_m: f64,
    pub battery: f64,
    pub mobile: bool,
    pub bs_latency_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadPolicy {
    pub reselect_interval_rounds: u32,
}

impl Default for HeadPolicy {
    fn default() -> Self {
        Self {
            reselect_interval_rounds: 5,
        }
    }
}

impl HeadPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.reselect_interval_rounds == 0 {
            return Err(Error::InvalidConfig("reselect_interval_rounds must be >= 1".into()));
        }
        Ok(())
    }

    pub fn is_reselection_round(&self, round: u32) -> bool {
        round.is_multiple_of(self.reselect_interval_rounds)
    }
}

/// Rule order over two eligible candidates; `Less` means `a` wins.
fn rank(a: &HeadCandidateView, b: &HeadCandidateView) -> Ordering {
    a.aggregated_distance_m
        .total_cmp(&b.aggregated_distance_m)
        .then_with(|| b.battery.total_cmp(&a.battery))
        .then_with(|| a.mobile.cmp(&b.mobile))
        .then_with(|| a.bs_latency_s.total_cmp(&b.bs_latency_s))
        .then_with(|| a.device_id.cmp(&b.device_id))
}

pub fn select_head(candidates: &[HeadCandidateView]) -> Result<DeviceId> {
    candidates
        .iter()
        .filter(|c| c.bs_connectable)
        .min_by(|a, b| rank(a, b))
        .map(|c| c.device_id)
        .ok_or(Error::NoEligibleHead)
}

/// Builds the candidate views for the members of `cluster`. `lookup` maps a
/// member id to its device, connectivity and current base-station latency.
pub fn candidate_views<'a, F>(cluster: &Cluster, lookup: F) -> Vec<HeadCandidateView>
where
    F: Fn(DeviceId) -> (&'a DeviceNode, bool, f64),
{
    let members: Vec<(&DeviceNode, bool, f64)> = cluster.members.iter().map(|&id| lookup(id)).collect();
    members
        .iter()
        .map(|&(node, connectable, latency)| {
            let aggregated = members
                .iter()
                .filter(|(other, _, _)| other.id != node.id)
                .map(|(other, _, _)| node.pos.distance(&other.pos))
                .sum();
            HeadCandidateView {
                device_id: node.id,
                bs_connectable: connectable,
                aggregated_distance_m: aggregated,
                battery: node.battery,
                mobile: node.mobile,
                bs_latency_s: latency,
            }
        })
        .collect()
}
