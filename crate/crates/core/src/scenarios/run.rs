use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::{ScenarioConfig, ScenarioKind};
use crate::aggregation::{
    aggregate_adaptive, aggregate_weighted, optimize_adaptive_weights, retrain_pooled_from, train_meta,
    uniform_weights, AggregationMethod, InputPipeline, ModelArtifact, ProbeSet,
};
use crate::clustering::{form_clusters, DataSignature};
use crate::data::{self, partition, Dataset, FeatureSubsetPlan, PartitionPlan, PartitionStrategy};
use crate::energy::{from_nano, to_nano, EnergyLedger, EnergyParams, EnergyState};
use crate::error::{Error, Result};
use crate::head_selection::{candidate_views, select_head};
use crate::ml::{self, AutoencoderConfig, ClassifierConfig, Matrix, Standardizer};
use crate::rng::{self, derive_seed, tag, SimRng};
use crate::topology::{can_connect, transmission_delay, DeviceNode, Position, Roamer};
use crate::DeviceId;

/// Source id carried by artifacts built at the base station.
pub const BASE_STATION_ID: DeviceId = DeviceId::MAX;

/// Hidden width of the classifier whose size defines payload 1.
const REFERENCE_HIDDEN: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkDelay {
    pub from: DeviceId,
    /// `None` for the base station.
    pub to: Option<DeviceId>,
    pub delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    pub round: u32,
    pub kind: ScenarioKind,
    /// Devices whose models reached the base station this round.
    pub participants: Vec<DeviceId>,
    /// Members of each participating cluster; empty for direct-only runs.
    pub clusters: Vec<Vec<DeviceId>>,
    pub heads: Vec<DeviceId>,
    /// Global test accuracy; `None` when models are not trained.
    pub accuracy: Option<f64>,
    /// Energy charged to each live node this round.
    pub energy: BTreeMap<DeviceId, f64>,
    pub delays: Vec<LinkDelay>,
}

impl RoundTrace {
    pub fn total_energy(&self) -> f64 {
        from_nano(self.energy.values().map(|&e| to_nano(e)).sum())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub kind: ScenarioKind,
    pub traces: Vec<RoundTrace>,
    pub energy: EnergyState,
    pub ledger: EnergyLedger,
}

impl ScenarioRun {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.traces.last().and_then(|t| t.accuracy)
    }

    pub fn total_energy(&self) -> f64 {
        self.ledger.grand_total()
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    run_scenario_on(config, None)
}

/// Runs with a preloaded dataset (shared between scenarios of one comparison).
pub fn run_scenario_on(config: &ScenarioConfig, dataset: Option<&Dataset>) -> Result<ScenarioRun> {
    config.validate()?;
    let owned;
    let dataset = match dataset {
        Some(d) => d,
        None => {
            owned = prepare_dataset(config)?;
            &owned
        }
    };
    Sim::new(config, Some(dataset))?.run()
}

/// Replays the round structure and energy accounting without training any
/// model. Energy never depends on model parameters, so the energy ledger
/// equals that of a full run; accuracies are `None`.
pub fn run_energy_only(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    Sim::new(config, None)?.run()
}

/// The dataset a run draws from: the configured CSV, or the synthetic
/// surrogate sized for the device partitions plus the test split.
pub fn prepare_dataset(config: &ScenarioConfig) -> Result<Dataset> {
    let plan = &config.data;
    match &plan.csv {
        Some(path) => Ok(data::load_csv(path, &plan.schema)?.dataset),
        None => {
            let n = config.devices.len() * plan.samples_per_device + plan.test_samples;
            data::gen_synthetic_with(&plan.schema, &plan.synthetic, n, derive_seed(config.seed, &[tag::DATA]))
        }
    }
}

fn classifier_params(input: usize, hidden: usize, classes: usize) -> usize {
    if hidden == 0 {
        input * classes + classes
    } else {
        input * hidden + hidden + hidden * classes + classes
    }
}

struct Learner {
    train: Dataset,
    /// `train.features` through the device pipeline, cached.
    train_x: Matrix,
    probe: Dataset,
    local: ModelArtifact,
}

struct Device {
    node: DeviceNode,
    roamer: Option<Roamer>,
    mobility_rng: SimRng,
    params: EnergyParams,
    learner: Option<Learner>,
}

#[derive(Debug, Clone)]
struct Group {
    head: usize,
    /// Device indices, head included, in id order.
    members: Vec<usize>,
}

struct Structure {
    groups: Vec<Group>,
    alive_at_formation: Vec<bool>,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    devices: Vec<Device>,
    test: Option<Dataset>,
    energy: EnergyState,
    ledger: EnergyLedger,
    structure: Option<Structure>,
    global: Option<ModelArtifact>,
    last_accuracy: Option<f64>,
    classes: usize,
    model_input: usize,
    device_params: usize,
    reference_params: usize,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, dataset: Option<&Dataset>) -> Result<Self> {
        let het = cfg.kind == ScenarioKind::DbflHeterogeneous;
        let m = &cfg.model;
        let schema = &cfg.data.schema;
        let classes = schema.num_classes;
        let feature_dim = if het { m.subset_size } else { schema.num_features };
        let model_input = if het { m.latent_dim } else { schema.num_features };
        let encoder_params = if het {
            m.subset_size * m.latent_dim + m.latent_dim
        } else {
            0
        };

        let mut specs: Vec<_> = cfg.devices.iter().collect();
        specs.sort_by_key(|s| s.id);

        let mut energy_rng = rng::stream(cfg.seed, &[tag::ENERGY]);
        let mut initial = Vec::new();
        let mut devices = Vec::new();
        for (i, s) in specs.iter().enumerate() {
            let cycle = cfg.energy.draw_cycle(&mut energy_rng);
            let drawn = cfg.energy.draw_initial(&mut energy_rng);
            let battery = s.battery.unwrap_or(drawn);
            initial.push((s.id, battery));
            let node = DeviceNode {
                id: s.id,
                pos: s.pos(),
                mobile: s.mobile,
                battery,
                bs_latency_s: s.bs_latency_s,
                partition_id: i,
                feature_dim,
            };
            node.validate()?;
            devices.push(Device {
                roamer: s.mobile.then(|| Roamer::new(s.pos())),
                mobility_rng: rng::stream(cfg.seed, &[tag::MOBILITY, u64::from(s.id)]),
                params: cfg.energy.params_for(cycle),
                node,
                learner: None,
            });
        }

        let mut sim = Sim {
            cfg,
            devices,
            test: None,
            energy: EnergyState::new(initial)?,
            ledger: EnergyLedger::default(),
            structure: None,
            global: None,
            last_accuracy: None,
            classes,
            model_input,
            device_params: classifier_params(model_input, m.hidden_units, classes) + encoder_params,
            reference_params: classifier_params(model_input, REFERENCE_HIDDEN, classes),
        };
        if let Some(d) = dataset {
            sim.prepare_learners(d)?;
        }
        Ok(sim)
    }

    fn signature(&self) -> Result<DataSignature> {
        DataSignature::dense(self.devices[0].node.feature_dim, self.classes as u32)
    }

    fn classifier_config(&self, seed: u64) -> ClassifierConfig {
        let m = &self.cfg.model;
        ClassifierConfig {
            input_dim: self.model_input,
            hidden_units: m.hidden_units,
            num_classes: self.classes,
            learning_rate: m.learning_rate,
            epochs: m.local_epochs,
            batch_size: m.batch_size,
            seed,
            shuffle: true,
        }
    }

    fn prepare_learners(&mut self, dataset: &Dataset) -> Result<()> {
        let cfg = self.cfg;
        let schema = &cfg.data.schema;
        if dataset.num_features() != schema.num_features || dataset.num_classes != schema.num_classes {
            return Err(Error::SchemaMismatch(format!(
                "dataset has {} features / {} classes, schema expects {} / {}",
                dataset.num_features(),
                dataset.num_classes,
                schema.num_features,
                schema.num_classes
            )));
        }
        let n = self.devices.len();
        let test_rows = cfg.data.test_samples.min(dataset.len() / 2).max(1);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, &[tag::TEST_SPLIT]));
        let test = dataset.subset(&order[..test_rows]);
        let rest = dataset.subset(&order[test_rows..]);
        let parts = partition(
            &rest,
            &PartitionPlan {
                devices: n,
                samples_per_device: cfg.data.samples_per_device,
                strategy: PartitionStrategy::Iid,
                seed: derive_seed(cfg.seed, &[tag::PARTITION]),
            },
        )?;

        let het = cfg.kind == ScenarioKind::DbflHeterogeneous;
        let features = if het {
            Some(FeatureSubsetPlan::random(
                schema.num_features,
                n,
                cfg.model.subset_size,
                derive_seed(cfg.seed, &[tag::FEATURES]),
            )?)
        } else {
            None
        };
        let signature = self.signature()?;
        let shared_init = ml::init_classifier(&self.classifier_config(derive_seed(cfg.seed, &[tag::INIT])))?;

        for (i, part) in parts.parts.into_iter().enumerate() {
            let id = self.devices[i].node.id;
            let mut idx: Vec<usize> = (0..part.len()).collect();
            idx.shuffle(&mut rng::stream(cfg.seed, &[tag::PROBE, u64::from(id)]));
            let k = cfg.data.probe_rows();
            let probe = part.subset(&idx[..k]);
            let train = part.subset(&idx[k..]);

            let (pipeline, network) = match &features {
                None => {
                    let pipeline = InputPipeline {
                        columns: None,
                        standardizer: Some(Standardizer::fit(&train.features)?),
                        ..InputPipeline::default()
                    };
                    (pipeline, shared_init.clone())
                }
                Some(plan) => {
                    let cols = plan.subsets[i].clone();
                    let selected = train.features.select_cols(&cols)?;
                    let standardizer = Standardizer::fit(&selected)?;
                    let ae_cfg = AutoencoderConfig {
                        input_dim: cols.len(),
                        latent_dim: cfg.model.latent_dim,
                        learning_rate: cfg.model.autoencoder_learning_rate,
                        epochs: cfg.model.autoencoder_epochs,
                        batch_size: cfg.model.batch_size,
                        seed: derive_seed(cfg.seed, &[tag::AUTOENCODER, u64::from(id)]),
                        ..AutoencoderConfig::default()
                    };
                    let z = standardizer.transform(&selected)?;
                    let (encoder, _) = ml::train_autoencoder(&ae_cfg, &z)?;
                    let codes = ml::encode(&encoder, &z)?;
                    let pipeline = InputPipeline {
                        columns: Some(cols),
                        standardizer: Some(standardizer),
                        latent_standardizer: Some(Standardizer::fit(&codes)?),
                        encoder: Some(encoder),
                    };
                    let init = ml::init_classifier(
                        &self.classifier_config(derive_seed(cfg.seed, &[tag::INIT, u64::from(id)])),
                    )?;
                    (pipeline, init)
                }
            };
            let train_x = pipeline.apply(&train.features)?;
            let local = ModelArtifact::new(network, pipeline, id, 0, signature.clone())?;
            debug_assert_eq!(local.param_count(), self.device_params);
            self.devices[i].learner = Some(Learner {
                train,
                train_x,
                probe,
                local,
            });
        }
        self.test = Some(test);
        Ok(())
    }

    fn run(mut self) -> Result<ScenarioRun> {
        let mut traces = Vec::with_capacity(self.cfg.rounds as usize);
        for r in 0..self.cfg.rounds {
            traces.push(self.round(r)?);
        }
        Ok(ScenarioRun {
            kind: self.cfg.kind,
            traces,
            energy: self.energy,
            ledger: self.ledger,
        })
    }

    fn bs_delay(&self, i: usize) -> f64 {
        let node = &self.devices[i].node;
        transmission_delay(&self.cfg.link, node, &Position::ORIGIN, node.bs_latency_s)
    }

    fn pair_delay(&self, i: usize, j: usize) -> f64 {
        transmission_delay(&self.cfg.link, &self.devices[i].node, &self.devices[j].node.pos, None)
    }

    fn round(&mut self, r: u32) -> Result<RoundTrace> {
        let n = self.devices.len();
        if r > 0 {
            for d in &mut self.devices {
                if let Some(roamer) = &mut d.roamer {
                    if !self.energy.is_dead(d.node.id) {
                        roamer.step(&self.cfg.mobility, &mut d.node.pos, &mut d.mobility_rng);
                    }
                }
            }
        }
        for d in &mut self.devices {
            d.node.battery = self.energy.remaining(d.node.id);
        }
        let alive: Vec<bool> = self.devices.iter().map(|d| !self.energy.is_dead(d.node.id)).collect();
        let bs_delay: Vec<f64> = (0..n).map(|i| self.bs_delay(i)).collect();
        let connectable: Vec<bool> = (0..n)
            .map(|i| alive[i] && can_connect(&self.cfg.link, bs_delay[i]))
            .collect();
        if r == 0 && !connectable.iter().any(|&c| c) {
            return Err(Error::NoConnectableDevice);
        }

        let groups: Vec<Group> = if self.cfg.kind.is_clustered() {
            self.refresh_structure(r, &alive, &connectable)?;
            self.structure.as_ref().map(|s| s.groups.clone()).unwrap_or_default()
        } else {
            Vec::new()
        };
        let contributors: Vec<usize> = if self.cfg.kind.is_clustered() {
            let mut c: Vec<usize> = groups.iter().flat_map(|g| g.members.iter().copied()).collect();
            c.sort_unstable();
            c
        } else {
            (0..n).filter(|&i| connectable[i]).collect()
        };

        let head_params = self.train_and_aggregate(r, &alive, &contributors, &groups)?;

        let (costs, delays) = self.round_costs(r, &alive, &bs_delay, &groups, &head_params);
        let charged = self.energy.apply_round(&costs);
        self.ledger.record(&charged);

        let id = |i: usize| self.devices[i].node.id;
        Ok(RoundTrace {
            round: r,
            kind: self.cfg.kind,
            participants: contributors.iter().map(|&i| id(i)).collect(),
            clusters: groups
                .iter()
                .map(|g| g.members.iter().map(|&i| id(i)).collect())
                .collect(),
            heads: groups.iter().map(|g| id(g.head)).collect(),
            accuracy: self.last_accuracy,
            energy: charged,
            delays,
        })
    }

    fn structure_valid(&self, s: &Structure, alive: &[bool], connectable: &[bool]) -> bool {
        let link = &self.cfg.link;
        s.alive_at_formation == alive
            && s.groups.iter().all(|g| {
                connectable[g.head]
                    && g.members
                        .iter()
                        .all(|&m| m == g.head || can_connect(link, self.pair_delay(m, g.head)))
            })
    }

    fn refresh_structure(&mut self, r: u32, alive: &[bool], connectable: &[bool]) -> Result<()> {
        let due = match &self.structure {
            None => true,
            Some(s) => self.cfg.head_policy.is_reselection_round(r) || !self.structure_valid(s, alive, connectable),
        };
        if !due {
            return Ok(());
        }
        let live: Vec<usize> = (0..self.devices.len()).filter(|&i| alive[i]).collect();
        let mut groups = Vec::new();
        if live.iter().any(|&i| connectable[i]) {
            let nodes: Vec<DeviceNode> = live.iter().map(|&i| self.devices[i].node.clone()).collect();
            let conn: Vec<bool> = live.iter().map(|&i| connectable[i]).collect();
            let sig = self.signature()?;
            let sigs = vec![sig; live.len()];
            let assignment = form_clusters(&nodes, &conn, &sigs, &self.cfg.cluster_policy, &self.cfg.link)?;
            let index_of = |id: DeviceId| self.devices.iter().position(|d| d.node.id == id).expect("known id");
            for cluster in assignment.participating() {
                let views = candidate_views(cluster, |id| {
                    let i = index_of(id);
                    (&self.devices[i].node, connectable[i], self.bs_delay(i))
                });
                match select_head(&views) {
                    Ok(head) => groups.push(Group {
                        head: index_of(head),
                        members: cluster.members.iter().map(|&m| index_of(m)).collect(),
                    }),
                    // Only reachable without the base-station-member rule: such
                    // a cluster cannot relay, so its members act alone.
                    Err(Error::NoEligibleHead) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        if r == 0 {
            for g in &groups {
                let d = &mut self.devices[g.head];
                self.energy.reset_initial(d.node.id, self.cfg.energy.head_initial);
                d.node.battery = self.cfg.energy.head_initial;
            }
        }
        self.structure = Some(Structure {
            groups,
            alive_at_formation: alive.to_vec(),
        });
        Ok(())
    }

    /// Local training, cluster and base-station aggregation, evaluation.
    /// Returns the parameter count of each group's aggregated artifact.
    fn train_and_aggregate(
        &mut self,
        r: u32,
        alive: &[bool],
        contributors: &[usize],
        groups: &[Group],
    ) -> Result<Vec<usize>> {
        let member_counts = |k: usize| vec![self.device_params; k];
        let head_params: Vec<usize> = groups
            .iter()
            .map(|g| self.aggregated_params(&member_counts(g.members.len())))
            .collect();
        if self.test.is_none() {
            return Ok(head_params);
        }

        for i in 0..self.devices.len() {
            if alive[i] {
                self.local_update(i, r)?;
            }
        }
        if contributors.is_empty() {
            return Ok(head_params);
        }

        let global = if self.cfg.kind.is_clustered() {
            let mut heads = Vec::with_capacity(groups.len());
            for (g, &expect) in groups.iter().zip(&head_params) {
                let art = self.aggregate_level(&g.members, self.devices[g.head].node.id, r, 1)?;
                debug_assert_eq!(art.param_count(), expect);
                heads.push(art);
            }
            let probe = self.probe_of(contributors)?;
            let pooled: Vec<&Dataset> = contributors.iter().map(|&i| &self.learner(i).train).collect();
            self.combine(&heads, &probe, &pooled, BASE_STATION_ID, r, 0)?
        } else {
            self.aggregate_level(contributors, BASE_STATION_ID, r, 0)?
        };
        let test = self.test.as_ref().expect("full run");
        let acc = global.predict_proba(&test.features)?.accuracy(&test.labels);
        self.last_accuracy = Some(acc);
        self.global = Some(global);
        Ok(head_params)
    }

    fn learner(&self, i: usize) -> &Learner {
        self.devices[i].learner.as_ref().expect("full run")
    }

    fn probe_of(&self, members: &[usize]) -> Result<ProbeSet> {
        let parts: Vec<&Dataset> = members.iter().map(|&i| &self.learner(i).probe).collect();
        ProbeSet::from_dataset(&Dataset::concat(&parts)?)
    }

    fn local_update(&mut self, i: usize, r: u32) -> Result<()> {
        let id = self.devices[i].node.id;
        let cfg = self.classifier_config(derive_seed(self.cfg.seed, &[tag::TRAIN, u64::from(id), u64::from(r)]));
        let warm = match (&self.global, self.cfg.kind) {
            (Some(g), ScenarioKind::Cvfl | ScenarioKind::DbflHomogeneous)
                if !g.is_meta() && g.network.input_dim() == self.model_input =>
            {
                Some(g.network.clone())
            }
            _ => None,
        };
        let learner = self.devices[i].learner.as_mut().expect("full run");
        let mut net = warm.unwrap_or_else(|| learner.local.network.clone());
        ml::continue_classifier(&mut net, &cfg, &learner.train_x, &learner.train.labels)?;
        learner.local.network = net;
        learner.local.round = r;
        Ok(())
    }

    fn aggregate_level(&self, members: &[usize], source: DeviceId, r: u32, level: u64) -> Result<ModelArtifact> {
        let arts: Vec<ModelArtifact> = members.iter().map(|&i| self.learner(i).local.clone()).collect();
        let probe = self.probe_of(members)?;
        let pooled: Vec<&Dataset> = members.iter().map(|&i| &self.learner(i).train).collect();
        self.combine(&arts, &probe, &pooled, source, r, level)
    }

    fn combine(
        &self,
        members: &[ModelArtifact],
        probe: &ProbeSet,
        pooled: &[&Dataset],
        source: DeviceId,
        r: u32,
        level: u64,
    ) -> Result<ModelArtifact> {
        match self.cfg.aggregation {
            AggregationMethod::WeightedAveraging => {
                Ok(aggregate_weighted(members, probe, &uniform_weights(members.len()))?.0)
            }
            AggregationMethod::AdaptiveWeightedAveraging => {
                let w = optimize_adaptive_weights(members, probe)?;
                Ok(aggregate_adaptive(members, probe, &w)?.0)
            }
            AggregationMethod::MetaLearning => {
                let m = &self.cfg.model;
                let cfg = ClassifierConfig {
                    hidden_units: m.meta_hidden_units,
                    learning_rate: m.meta_learning_rate,
                    epochs: m.meta_epochs,
                    seed: derive_seed(self.cfg.seed, &[tag::META, level, u64::from(source), u64::from(r)]),
                    ..self.classifier_config(0)
                };
                train_meta(members, probe, &cfg, source, r)
            }
            AggregationMethod::Retraining => {
                let cfg = self.classifier_config(derive_seed(
                    self.cfg.seed,
                    &[tag::TRAIN, level, u64::from(source), u64::from(r)],
                ));
                let base = members.iter().find(|m| !m.is_meta()).ok_or(Error::EmptyMemberList)?;
                retrain_pooled_from(pooled, &cfg, base, source, r)
            }
        }
    }

    fn aggregated_params(&self, member_params: &[usize]) -> usize {
        match self.cfg.aggregation {
            AggregationMethod::MetaLearning => {
                member_params.iter().sum::<usize>()
                    + classifier_params(
                        member_params.len() * self.classes,
                        self.cfg.model.meta_hidden_units,
                        self.classes,
                    )
            }
            _ => member_params.first().copied().unwrap_or(0),
        }
    }

    fn payload(&self, params: usize) -> f64 {
        crate::energy::normalized_payload(params, self.reference_params)
    }

    fn round_costs(
        &self,
        r: u32,
        alive: &[bool],
        bs_delay: &[f64],
        groups: &[Group],
        head_params: &[usize],
    ) -> (BTreeMap<DeviceId, f64>, Vec<LinkDelay>) {
        let cfg = self.cfg;
        let m = &cfg.model;
        let train_rows = cfg.data.train_rows() as f64;
        let probe_rows = cfg.data.probe_rows() as f64;
        let device_payload = self.payload(self.device_params);
        let eff = |delay: f64| cfg.energy.effective_distance(delay);

        let mut role: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (gi, g) in groups.iter().enumerate() {
            for &i in &g.members {
                role.insert(i, (gi, g.head));
            }
        }
        let mut costs = BTreeMap::new();
        let mut delays = Vec::new();
        let bs_link = |i: usize, delays: &mut Vec<LinkDelay>| {
            delays.push(LinkDelay {
                from: self.devices[i].node.id,
                to: None,
                delay_s: bs_delay[i],
            });
            eff(bs_delay[i])
        };
        for (i, d) in self.devices.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let mut epochs = m.local_epochs as f64;
            if r == 0 && cfg.kind == ScenarioKind::DbflHeterogeneous {
                epochs += m.autoencoder_epochs as f64;
            }
            let mut cost = d.params.compute_energy(train_rows, epochs);
            match role.get(&i) {
                Some(&(gi, head)) if head == i => {
                    let g = &groups[gi];
                    let mut work = cfg.energy.aggregation_epoch_fraction * train_rows;
                    match cfg.aggregation {
                        AggregationMethod::MetaLearning => {
                            work += m.meta_epochs as f64 * probe_rows * g.members.len() as f64
                        }
                        AggregationMethod::Retraining => {
                            work += m.local_epochs as f64 * train_rows * g.members.len() as f64
                        }
                        _ => {}
                    }
                    cost += d.params.compute_energy(work, 1.0);
                    let dist = bs_link(i, &mut delays);
                    cost += d.params.transmission_energy(dist, self.payload(head_params[gi]));
                }
                Some(&(_, head)) => {
                    let delay = self.pair_delay(i, head);
                    delays.push(LinkDelay {
                        from: d.node.id,
                        to: Some(self.devices[head].node.id),
                        delay_s: delay,
                    });
                    cost += d.params.transmission_energy(eff(delay), device_payload);
                }
                // Direct upload, attempted even when the link is too slow for
                // the base station to accept it.
                None => {
                    let dist = bs_link(i, &mut delays);
                    cost += d.params.transmission_energy(dist, device_payload);
                }
            }
            costs.insert(d.node.id, cost);
        }
        (costs, delays)
    }
}
