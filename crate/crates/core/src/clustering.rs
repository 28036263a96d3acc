//! Device-to-device cluster formation.
//!
//! Every cluster is anchored on a *seed*: a device allowed to reach the base
//! station directly. Other devices join a seed when their data signatures are
//! homogeneous and the member-to-seed delay is within the link cutoff.
//!
//! The chosen partition is the lexicographic optimum of
//!
//! 1. fewest isolated devices (devices that cannot join any cluster),
//! 2. fewest clusters,
//! 3. smallest total member-to-seed distance,
//! 4. smallest assignment vector, where each device (in id order) maps to the
//!    id of its seed, and seeds and isolated devices map to themselves.
//!
//! For a fixed seed set the member placement is a min-cost assignment problem,
//! solved exactly with the Hungarian method. Seed sets are enumerated by
//! increasing size, so the cost grows with the number of seed-eligible devices;
//! the simulator targets tens of devices, not thousands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{can_connect, DeviceNode, LinkModel};
use crate::DeviceId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterPolicy {
    pub max_size: usize,
    pub require_bs_member: bool,
}

impl Default for ClusterPolicy {
    fn default() -> Self {
        Self {
            max_size: 3,
            require_bs_member: true,
        }
    }
}

impl ClusterPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_size == 0 {
            return Err(Error::InvalidConfig("cluster max_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Feature dimensionality plus the set of class labels a device trains on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataSignature {
    pub feature_dim: usize,
    label_set: Vec<u32>,
}

impl DataSignature {
    pub fn new(feature_dim: usize, labels: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut label_set: Vec<u32> = labels.into_iter().collect();
        let n = label_set.len();
        label_set.sort_unstable();
        label_set.dedup();
        if label_set.is_empty() || label_set.len() != n {
            return Err(Error::InvalidConfig(
                "label set must be non-empty without duplicates".into(),
            ));
        }
        if feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be positive".into()));
        }
        Ok(Self { feature_dim, label_set })
    }

    /// Signature with labels `0..num_classes`.
    pub fn dense(feature_dim: usize, num_classes: u32) -> Result<Self> {
        Self::new(feature_dim, 0..num_classes)
    }

    pub fn label_set(&self) -> &[u32] {
        &self.label_set
    }

    pub fn num_classes(&self) -> usize {
        self.label_set.len()
    }
}

pub fn check_homogeneity(a: &DataSignature, b: &DataSignature) -> bool {
    a.feature_dim == b.feature_dim && a.label_set == b.label_set
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub seed: DeviceId,
    /// Sorted member ids, seed included.
    pub members: Vec<DeviceId>,
    /// False for isolated devices that could not join any cluster.
    pub participating: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub clusters: Vec<Cluster>,
}

impl ClusterAssignment {
    pub fn cluster_of(&self, id: DeviceId) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.members.contains(&id))
    }

    pub fn participating(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(|c| c.participating)
    }

    pub fn isolated(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.clusters
            .iter()
            .filter(|c| !c.participating)
            .flat_map(|c| c.members.iter().copied())
    }

    /// Checks the partition, size and base-station-member invariants against
    /// the inputs the assignment was formed from.
    pub fn check_invariants(
        &self,
        devices: &[DeviceNode],
        connectable: &[bool],
        policy: &ClusterPolicy,
    ) -> std::result::Result<(), String> {
        let mut seen: Vec<DeviceId> = self.clusters.iter().flat_map(|c| c.members.iter().copied()).collect();
        seen.sort_unstable();
        let mut ids: Vec<DeviceId> = devices.iter().map(|d| d.id).collect();
        ids.sort_unstable();
        if seen != ids {
            return Err(format!("not a partition: {seen:?} vs {ids:?}"));
        }
        let is_conn = |id: DeviceId| {
            devices
                .iter()
                .position(|d| d.id == id)
                .map(|i| connectable[i])
                .unwrap_or(false)
        };
        for c in &self.clusters {
            if c.members.is_empty() || c.members.len() > policy.max_size {
                return Err(format!("cluster {} has size {}", c.id, c.members.len()));
            }
            if !c.members.contains(&c.seed) {
                return Err(format!("cluster {} does not contain its seed", c.id));
            }
            if c.participating && policy.require_bs_member && !c.members.iter().any(|&m| is_conn(m)) {
                return Err(format!("cluster {} has no connectable member", c.id));
            }
            if !c.participating && c.members.len() != 1 {
                return Err(format!("isolated cluster {} is not a singleton", c.id));
            }
        }
        Ok(())
    }
}

/// Relative tolerance used when comparing total distances.
pub(crate) fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Forms clusters over `devices`. `connectable[i]` and `signatures[i]`
/// describe `devices[i]`; the link cutoff bounds the member-to-seed delay.
pub fn form_clusters(
    devices: &[DeviceNode],
    connectable: &[bool],
    signatures: &[DataSignature],
    policy: &ClusterPolicy,
    link: &LinkModel,
) -> Result<ClusterAssignment> {
    policy.validate()?;
    if connectable.len() != devices.len() {
        return Err(Error::DimensionMismatch {
            expected: devices.len(),
            actual: connectable.len(),
            context: "connectable flags",
        });
    }
    if signatures.len() != devices.len() {
        return Err(Error::DimensionMismatch {
            expected: devices.len(),
            actual: signatures.len(),
            context: "signatures",
        });
    }
    let mut order: Vec<usize> = (0..devices.len()).collect();
    order.sort_by_key(|&i| devices[i].id);
    for w in order.windows(2) {
        if devices[w[0]].id == devices[w[1]].id {
            return Err(Error::DuplicateDevice(devices[w[0]].id));
        }
    }
    if !connectable.iter().any(|&c| c) {
        return Err(Error::NoConnectableDevice);
    }

    let problem = Problem::new(devices, connectable, signatures, policy, link, &order);
    let best = problem.solve();
    Ok(problem.into_assignment(best))
}

/// Internal view of the inputs with devices re-indexed in id order.
struct Problem {
    ids: Vec<DeviceId>,
    eligible: Vec<bool>,
    /// `feasible[i][j]`: device i may join a cluster seeded by device j.
    feasible: Vec<Vec<bool>>,
    dist: Vec<Vec<f64>>,
    max_size: usize,
}

#[derive(Debug, Clone)]
struct Candidate {
    isolated: usize,
    clusters: usize,
    total: f64,
    /// Per device (id order): index of its seed, or itself.
    target: Vec<usize>,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        if self.isolated != other.isolated {
            return self.isolated < other.isolated;
        }
        if self.clusters != other.clusters {
            return self.clusters < other.clusters;
        }
        if !nearly_equal(self.total, other.total) {
            return self.total < other.total;
        }
        self.target < other.target
    }
}

impl Problem {
    fn new(
        devices: &[DeviceNode],
        connectable: &[bool],
        signatures: &[DataSignature],
        policy: &ClusterPolicy,
        link: &LinkModel,
        order: &[usize],
    ) -> Self {
        let n = order.len();
        let ids = order.iter().map(|&i| devices[i].id).collect();
        let eligible = order
            .iter()
            .map(|&i| connectable[i] || !policy.require_bs_member)
            .collect();
        let mut feasible = vec![vec![false; n]; n];
        let mut dist = vec![vec![0.0; n]; n];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                let d = devices[i].pos.distance(&devices[j].pos);
                dist[a][b] = d;
                feasible[a][b] = a != b
                    && check_homogeneity(&signatures[i], &signatures[j])
                    && can_connect(link, d * link.delay_per_meter_s);
            }
        }
        Self {
            ids,
            eligible,
            feasible,
            dist,
            max_size: policy.max_size,
        }
    }

    fn solve(&self) -> Candidate {
        let seeds_all: Vec<usize> = (0..self.ids.len()).filter(|&i| self.eligible[i]).collect();
        let min_isolated = self
            .best_for_seeds(&seeds_all)
            .map(|c| c.isolated)
            .expect("all eligible devices seeding is always feasible");
        let non_eligible = self.ids.len() - seeds_all.len();
        let placed = seeds_all.len() + non_eligible - min_isolated;

        for k in 1..=seeds_all.len() {
            if k * self.max_size < placed {
                continue;
            }
            let mut best: Option<Candidate> = None;
            for subset in Combinations::new(seeds_all.len(), k) {
                let seeds: Vec<usize> = subset.iter().map(|&s| seeds_all[s]).collect();
                if let Some(c) = self.best_for_seeds(&seeds) {
                    if c.isolated == min_isolated && best.as_ref().is_none_or(|b| c.better_than(b)) {
                        best = Some(c);
                    }
                }
            }
            if let Some(b) = best {
                return b;
            }
        }
        unreachable!("the full seed set attains the minimum isolation")
    }

    /// Optimal placement of all non-seed devices for a fixed seed set, with the
    /// lexicographically smallest assignment among optimal placements.
    fn best_for_seeds(&self, seeds: &[usize]) -> Option<Candidate> {
        let n = self.ids.len();
        let rows: Vec<usize> = (0..n).filter(|i| !seeds.contains(i)).collect();
        let slots = self.max_size - 1;
        let eligible_rows = rows.iter().filter(|&&r| self.eligible[r]).count();
        if eligible_rows > seeds.len() * slots {
            return None;
        }

        let mut options: Vec<Vec<Option<usize>>> = rows
            .iter()
            .map(|&r| {
                let mut opts: Vec<Option<usize>> = seeds
                    .iter()
                    .copied()
                    .filter(|&s| self.feasible[r][s])
                    .map(Some)
                    .collect();
                if !self.eligible[r] {
                    opts.push(None);
                }
                opts
            })
            .collect();

        let optimum = self.assign(seeds, &rows, &options)?;

        // Fix rows one at a time to their smallest target that keeps the optimum.
        for ri in 0..rows.len() {
            let mut choices = options[ri].clone();
            choices.sort_by_key(|o| o.unwrap_or(rows[ri]));
            for choice in choices {
                let saved = std::mem::replace(&mut options[ri], vec![choice]);
                match self.assign(seeds, &rows, &options) {
                    Some((iso, total)) if iso == optimum.0 && nearly_equal(total, optimum.1) => {
                        break;
                    }
                    _ => options[ri] = saved,
                }
            }
            debug_assert_eq!(options[ri].len(), 1);
        }

        let mut target: Vec<usize> = (0..n).collect();
        let mut isolated = 0;
        let mut total = 0.0;
        for (ri, &r) in rows.iter().enumerate() {
            match options[ri][0] {
                Some(s) => {
                    target[r] = s;
                    total += self.dist[r][s];
                }
                None => isolated += 1,
            }
        }
        Some(Candidate {
            isolated,
            clusters: seeds.len(),
            total,
            target,
        })
    }

    /// Min-cost placement restricted to `options`; returns (isolated, total distance).
    fn assign(&self, seeds: &[usize], rows: &[usize], options: &[Vec<Option<usize>>]) -> Option<(usize, f64)> {
        if rows.is_empty() {
            return Some((0, 0.0));
        }
        let slots = self.max_size - 1;
        let slot_cols = seeds.len() * slots;
        let cols = slot_cols + rows.len();
        let max_d = self.dist.iter().flatten().fold(0.0f64, |m, &d| m.max(d));
        let penalty = 1.0 + max_d * rows.len() as f64;
        let inf = (penalty + max_d + 1.0) * (rows.len() as f64 + 1.0) * 4.0;

        let mut cost = vec![vec![inf; cols]; rows.len()];
        for (ri, &r) in rows.iter().enumerate() {
            for opt in &options[ri] {
                match *opt {
                    Some(s) => {
                        let si = seeds.iter().position(|&x| x == s).expect("seed in set");
                        for k in 0..slots {
                            cost[ri][si * slots + k] = self.dist[r][s];
                        }
                    }
                    None => cost[ri][slot_cols + ri] = penalty,
                }
            }
        }
        let assignment = hungarian(&cost);
        let mut isolated = 0;
        let mut total = 0.0;
        for (ri, &c) in assignment.iter().enumerate() {
            if cost[ri][c] >= inf {
                return None;
            }
            if c >= slot_cols {
                isolated += 1;
            } else {
                total += self.dist[rows[ri]][seeds[c / slots]];
            }
        }
        Some((isolated, total))
    }

    fn into_assignment(self, best: Candidate) -> ClusterAssignment {
        let n = self.ids.len();
        let mut clusters = Vec::new();
        for s in (0..n).filter(|&i| best.target[i] == i) {
            let members: Vec<usize> = (0..n).filter(|&i| best.target[i] == s).collect();
            if self.eligible[s] {
                clusters.push(Cluster {
                    id: 0,
                    seed: self.ids[s],
                    members: members.iter().map(|&i| self.ids[i]).collect(),
                    participating: true,
                });
            }
        }
        for s in (0..n).filter(|&i| best.target[i] == i && !self.eligible[i]) {
            clusters.push(Cluster {
                id: 0,
                seed: self.ids[s],
                members: vec![self.ids[s]],
                participating: false,
            });
        }
        for (i, c) in clusters.iter_mut().enumerate() {
            c.id = i;
        }
        ClusterAssignment { clusters }
    }
}

/// k-subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Rectangular Hungarian method (rows <= cols). Returns the column assigned to
/// each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    debug_assert!(n <= m);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Position;
    use proptest::prelude::*;

    fn dev(id: DeviceId, x: f64, y: f64) -> DeviceNode {
        DeviceNode {
            id,
            pos: Position::new(x, y),
            mobile: false,
            battery: 90.0,
            bs_latency_s: None,
            partition_id: id as usize,
            feature_dim: 274,
        }
    }

    fn sigs(n: usize) -> Vec<DataSignature> {
        vec![DataSignature::dense(274, 9).unwrap(); n]
    }

    #[test]
    fn homogeneity_examples() {
        let a = DataSignature::dense(274, 9).unwrap();
        let b = DataSignature::dense(274, 9).unwrap();
        let c = DataSignature::dense(274, 8).unwrap();
        assert!(check_homogeneity(&a, &b));
        assert!(check_homogeneity(&a, &a));
        assert!(!check_homogeneity(&a, &c));
        assert!(!check_homogeneity(&a, &DataSignature::dense(50, 9).unwrap()));
    }

    #[test]
    fn signature_rejects_duplicates_and_empty() {
        assert!(DataSignature::new(3, [1, 1]).is_err());
        assert!(DataSignature::new(3, []).is_err());
        assert!(DataSignature::new(0, [1]).is_err());
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn combinations_enumerate() {
        let all: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn five_devices_two_connectable_split_three_two() {
        let devices = vec![
            dev(0, 0.0, 0.0),
            dev(1, 200.0, 0.0),
            dev(2, 20.0, 10.0),
            dev(3, 30.0, -10.0),
            dev(4, 220.0, 15.0),
        ];
        let conn = vec![true, true, false, false, false];
        let a = form_clusters(
            &devices,
            &conn,
            &sigs(5),
            &ClusterPolicy::default(),
            &LinkModel::default(),
        )
        .unwrap();
        assert_eq!(a.clusters.len(), 2);
        let mut sizes: Vec<usize> = a.clusters.iter().map(|c| c.members.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3]);
        assert_eq!(a.clusters[0].members, vec![0, 2, 3]);
        assert_eq!(a.clusters[1].members, vec![1, 4]);
        a.check_invariants(&devices, &conn, &ClusterPolicy::default()).unwrap();
    }

    #[test]
    fn three_connectable_five_devices_use_two_clusters() {
        let devices = vec![
            dev(0, 0.0, 0.0),
            dev(1, 10.0, 0.0),
            dev(2, 0.0, 10.0),
            dev(3, 50.0, 50.0),
            dev(4, 60.0, 40.0),
        ];
        let conn = vec![true, true, true, false, false];
        let a = form_clusters(
            &devices,
            &conn,
            &sigs(5),
            &ClusterPolicy::default(),
            &LinkModel::default(),
        )
        .unwrap();
        assert_eq!(a.participating().count(), 2);
        a.check_invariants(&devices, &conn, &ClusterPolicy::default()).unwrap();
    }

    #[test]
    fn single_connectable_alone() {
        let devices = vec![dev(5, 1.0, 1.0)];
        let a = form_clusters(
            &devices,
            &[true],
            &sigs(1),
            &ClusterPolicy::default(),
            &LinkModel::default(),
        )
        .unwrap();
        assert_eq!(a.clusters.len(), 1);
        assert_eq!(a.clusters[0].members, vec![5]);
        assert!(a.clusters[0].participating);
    }

    #[test]
    fn no_connectable_is_an_error() {
        let devices = vec![dev(0, 0.0, 0.0), dev(1, 1.0, 0.0)];
        let r = form_clusters(
            &devices,
            &[false, false],
            &sigs(2),
            &ClusterPolicy::default(),
            &LinkModel::default(),
        );
        assert!(matches!(r, Err(Error::NoConnectableDevice)));
    }

    #[test]
    fn incompatible_or_out_of_range_devices_are_isolated() {
        let devices = vec![dev(0, 0.0, 0.0), dev(1, 5.0, 0.0), dev(2, 500.0, 0.0)];
        let mut s = sigs(3);
        s[1] = DataSignature::dense(274, 8).unwrap();
        let conn = vec![true, false, false];
        let a = form_clusters(&devices, &conn, &s, &ClusterPolicy::default(), &LinkModel::default()).unwrap();
        let isolated: Vec<DeviceId> = a.isolated().collect();
        assert_eq!(isolated, vec![1, 2]);
        a.check_invariants(&devices, &conn, &ClusterPolicy::default()).unwrap();
    }

    #[test]
    fn capacity_overflow_isolates_farthest() {
        // One seed, three candidates, room for two.
        let devices = vec![
            dev(0, 0.0, 0.0),
            dev(1, 10.0, 0.0),
            dev(2, 20.0, 0.0),
            dev(3, 30.0, 0.0),
        ];
        let conn = vec![true, false, false, false];
        let a = form_clusters(
            &devices,
            &conn,
            &sigs(4),
            &ClusterPolicy::default(),
            &LinkModel::default(),
        )
        .unwrap();
        assert_eq!(a.clusters[0].members, vec![0, 1, 2]);
        assert_eq!(a.isolated().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn ties_go_to_lower_seed_id() {
        let devices = vec![dev(0, -10.0, 0.0), dev(1, 10.0, 0.0), dev(2, 0.0, 0.0)];
        let conn = vec![true, true, false];
        let a = form_clusters(
            &devices,
            &conn,
            &sigs(3),
            &ClusterPolicy {
                max_size: 2,
                require_bs_member: true,
            },
            &LinkModel::default(),
        )
        .unwrap();
        assert_eq!(a.cluster_of(2).unwrap().seed, 0);
    }

    fn topology() -> impl Strategy<Value = (Vec<DeviceNode>, Vec<bool>)> {
        (2usize..=7).prop_flat_map(|n| {
            (
                prop::collection::vec((0.0..150.0f64, 0.0..150.0f64), n),
                prop::collection::vec(any::<bool>(), n),
            )
                .prop_map(|(pts, mut conn)| {
                    conn[0] = true;
                    let devices = pts
                        .iter()
                        .enumerate()
                        .map(|(i, &(x, y))| dev(i as DeviceId, x, y))
                        .collect();
                    (devices, conn)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn output_satisfies_invariants((devices, conn) in topology()) {
            let policy = ClusterPolicy::default();
            let a = form_clusters(&devices, &conn, &sigs(devices.len()), &policy, &LinkModel::default()).unwrap();
            prop_assert!(a.check_invariants(&devices, &conn, &policy).is_ok());
            let again = form_clusters(&devices, &conn, &sigs(devices.len()), &policy, &LinkModel::default()).unwrap();
            prop_assert_eq!(a, again);
        }

        #[test]
        fn scale_invariant((devices, conn) in topology(), c in 0.1..10.0f64) {
            let policy = ClusterPolicy::default();
            let link = LinkModel::default();
            let a = form_clusters(&devices, &conn, &sigs(devices.len()), &policy, &link).unwrap();
            let scaled: Vec<DeviceNode> = devices.iter().map(|d| DeviceNode { pos: d.pos.scaled(c), ..d.clone() }).collect();
            let link_scaled = LinkModel { delay_per_meter_s: link.delay_per_meter_s / c, ..link };
            let b = form_clusters(&scaled, &conn, &sigs(devices.len()), &policy, &link_scaled).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn homogeneity_is_equivalence(
            fa in 1usize..3, fb in 1usize..3, fc in 1usize..3,
            la in 1u32..3, lb in 1u32..3, lc in 1u32..3,
        ) {
            let a = DataSignature::dense(fa, la).unwrap();
            let b = DataSignature::dense(fb, lb).unwrap();
            let c = DataSignature::dense(fc, lc).unwrap();
            prop_assert!(check_homogeneity(&a, &a));
            prop_assert_eq!(check_homogeneity(&a, &b), check_homogeneity(&b, &a));
            if check_homogeneity(&a, &b) && check_homogeneity(&b, &c) {
                prop_assert!(check_homogeneity(&a, &c));
            }
        }
    }
}
