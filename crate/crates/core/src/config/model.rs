//! Index-resolved view of a [`Scenario`]. Building it is the validation pass:
//! every name is looked up once here and the engine works on indices.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::spec::*;
use super::{ConfigError, HistogramKey, Scenario};
use super::{CLIENT_FILE, GRAPH_FILE, MACHINES_FILE, PATH_FILE, SERVICE_FILE};
use crate::service::Distribution;

const PATH_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct StageModel {
    pub name: String,
    pub stage_id: u32,
    pub queue_type: QueueType,
    pub batch_bound: Option<u32>,
    pub per_event_us: f64,
    pub per_byte_us: f64,
}

#[derive(Debug, Clone)]
pub struct ExecPathModel {
    pub path_id: u32,
    /// Index into [`Model::exec_path_names`].
    pub name_id: usize,
    /// Stage indices (into `ServiceModel::stages`) in execution order.
    pub stages: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ProcEntry {
    pub stage: usize,
    pub path: Option<usize>,
    pub freq_ghz: Option<f64>,
    pub dist: Distribution,
}

#[derive(Debug, Clone)]
pub struct ServiceModel {
    pub name: String,
    pub stages: Vec<StageModel>,
    pub exec_paths: Vec<ExecPathModel>,
    /// Per exec-path selection weights; `None` when the service declares none.
    pub path_weights: Option<Vec<f64>>,
    pub processing: Vec<ProcEntry>,
}

impl ServiceModel {
    pub fn exec_path_index(&self, path_id: u32) -> Option<usize> {
        self.exec_paths.iter().position(|p| p.path_id == path_id)
    }
}

#[derive(Debug, Clone)]
pub struct MachineModel {
    pub name: String,
    pub cores: u32,
    pub network_cores: u32,
    pub dvfs_levels: Vec<f64>,
    pub rx_mean_us: f64,
    pub rx_per_byte_us: f64,
}

#[derive(Debug, Clone)]
pub struct InstanceModel {
    pub name: String,
    pub service: usize,
    pub machine: usize,
    pub threads: u32,
    pub exec_model: ExecModel,
    /// (peer instance, pool size)
    pub pools: Vec<(usize, u32)>,
    pub context_switch_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeTarget {
    Client,
    /// Candidate instances; more than one means per-request round-robin.
    Instances(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct NodeModel {
    pub node_id: u32,
    pub target: NodeTarget,
    /// Service index shared by all candidate instances.
    pub service: Option<usize>,
    /// Fixed execution path index, or `None` to draw per visit.
    pub exec_path: Option<usize>,
    pub start_stage: Option<u32>,
    pub end_stage: Option<u32>,
    pub children: Vec<usize>,
    pub parent_count: u32,
    pub enter_ops: Vec<PathOp>,
    pub leave_ops: Vec<PathOp>,
    pub causal: Option<usize>,
}

impl NodeModel {
    pub fn is_client(&self) -> bool {
        self.target == NodeTarget::Client
    }

    /// First and last positions within `path` covered by this node.
    pub fn stage_range(&self, service: &ServiceModel, path: &ExecPathModel) -> Option<(usize, usize)> {
        let pos = |id: u32| path.stages.iter().position(|&s| service.stages[s].stage_id == id);
        let start = match self.start_stage {
            Some(id) => pos(id)?,
            None => 0,
        };
        let end = match self.end_stage {
            Some(id) => pos(id)?,
            None => path.stages.len() - 1,
        };
        (start <= end).then_some((start, end))
    }
}

#[derive(Debug, Clone)]
pub struct PathModel {
    pub path_id: u32,
    pub probability: f64,
    pub entry: usize,
    pub nodes: Vec<NodeModel>,
    pub client_node: usize,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub services: Vec<ServiceModel>,
    pub machines: Vec<MachineModel>,
    pub instances: Vec<InstanceModel>,
    pub paths: Vec<PathModel>,
    pub exec_path_names: Vec<String>,
}

fn unique_index<'a, I: Iterator<Item = &'a str>>(
    names: I,
    file: &str,
    what: &str,
) -> Result<HashMap<String, usize>, ConfigError> {
    let mut map = HashMap::new();
    for (i, name) in names.enumerate() {
        if map.insert(name.to_string(), i).is_some() {
            return Err(ConfigError::schema(file, format!("duplicate {what} `{name}`")));
        }
    }
    Ok(map)
}

fn check_positive(file: &str, what: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::schema(file, format!("{what} must be positive, got {v}")))
    }
}

impl Model {
    pub fn resolve(s: &Scenario) -> Result<Model, ConfigError> {
        let mut exec_path_names: Vec<String> = Vec::new();
        let mut name_ids: HashMap<String, usize> = HashMap::new();

        let service_idx = unique_index(
            s.services.iter().map(|x| x.service_name.as_str()),
            SERVICE_FILE,
            "service",
        )?;
        if service_idx.contains_key(CLIENT_SERVICE) {
            return Err(ConfigError::schema(SERVICE_FILE, "`client` is a reserved service name"));
        }
        let mut services = Vec::with_capacity(s.services.len());
        for svc in &s.services {
            services.push(resolve_service(s, svc, &mut exec_path_names, &mut name_ids)?);
        }

        let machine_idx = unique_index(
            s.machines.iter().map(|m| m.machine_id.as_str()),
            MACHINES_FILE,
            "machine",
        )?;
        let machines = s
            .machines
            .iter()
            .map(|m| {
                if m.cores == 0 {
                    return Err(ConfigError::schema(
                        MACHINES_FILE,
                        format!("machine `{}` has no cores", m.machine_id),
                    ));
                }
                for w in m.dvfs_levels.windows(2) {
                    if w[1] <= w[0] {
                        return Err(ConfigError::schema(
                            MACHINES_FILE,
                            format!("machine `{}`: dvfs_levels must be strictly increasing", m.machine_id),
                        ));
                    }
                }
                for &f in &m.dvfs_levels {
                    check_positive(MACHINES_FILE, "dvfs level", f)?;
                }
                if !(m.net_rx_mean_us >= 0.0) || !(m.net_per_byte_us >= 0.0) {
                    return Err(ConfigError::schema(MACHINES_FILE, "network costs must be non-negative"));
                }
                Ok(MachineModel {
                    name: m.machine_id.clone(),
                    cores: m.cores,
                    network_cores: m.network_cores,
                    dvfs_levels: m.dvfs_levels.clone(),
                    rx_mean_us: m.net_rx_mean_us,
                    rx_per_byte_us: m.net_per_byte_us,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let instance_idx = unique_index(
            s.instances.iter().map(|i| i.instance_name.as_str()),
            GRAPH_FILE,
            "instance",
        )?;
        if instance_idx.contains_key(CLIENT_SERVICE) {
            return Err(ConfigError::schema(GRAPH_FILE, "`client` is a reserved instance name"));
        }
        let mut instances = Vec::with_capacity(s.instances.len());
        for inst in &s.instances {
            let service = *service_idx.get(&inst.service_name).ok_or_else(|| {
                ConfigError::dangling(
                    &inst.service_name,
                    format!("service of instance `{}`", inst.instance_name),
                )
            })?;
            let machine = *machine_idx.get(&inst.machine_id).ok_or_else(|| {
                ConfigError::dangling(
                    &inst.machine_id,
                    format!("machine of instance `{}`", inst.instance_name),
                )
            })?;
            if inst.threads == 0 {
                return Err(ConfigError::schema(
                    GRAPH_FILE,
                    format!("instance `{}` needs at least one thread", inst.instance_name),
                ));
            }
            if !(inst.context_switch_us >= 0.0) {
                return Err(ConfigError::schema(
                    GRAPH_FILE,
                    "context_switch_us must be non-negative",
                ));
            }
            let mut pools = Vec::new();
            for (peer, &size) in &inst.connections {
                let p = *instance_idx.get(peer).ok_or_else(|| {
                    ConfigError::dangling(peer, format!("connection pool of `{}`", inst.instance_name))
                })?;
                if size == 0 {
                    return Err(ConfigError::schema(
                        GRAPH_FILE,
                        format!(
                            "instance `{}`: connection pool to `{peer}` has capacity 0",
                            inst.instance_name
                        ),
                    ));
                }
                pools.push((p, size));
            }
            instances.push(InstanceModel {
                name: inst.instance_name.clone(),
                service,
                machine,
                threads: inst.threads,
                exec_model: inst.exec_model,
                pools,
                context_switch_us: inst.context_switch_us,
            });
        }

        let mut paths = Vec::with_capacity(s.paths.len());
        let mut seen_paths = HashSet::new();
        for p in &s.paths {
            if !seen_paths.insert(p.path_id) {
                return Err(ConfigError::schema(
                    PATH_FILE,
                    format!("duplicate path_id {}", p.path_id),
                ));
            }
            paths.push(resolve_path(p, &services, &instances, &service_idx, &instance_idx)?);
        }
        if !paths.is_empty() {
            let mass: f64 = paths.iter().map(|p| p.probability).sum();
            if (mass - 1.0).abs() > PATH_MASS_TOLERANCE {
                return Err(ConfigError::Probability(format!("path probabilities sum to {mass}")));
            }
        }

        validate_client(s)?;

        Ok(Model {
            services,
            machines,
            instances,
            paths,
            exec_path_names,
        })
    }

    pub fn instance_index(&self, name: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.name == name)
    }

    pub fn exec_path_name_id(&self, name: &str) -> Option<usize> {
        self.exec_path_names.iter().position(|n| n == name)
    }
}

fn resolve_service(
    s: &Scenario,
    svc: &ServiceSpec,
    exec_path_names: &mut Vec<String>,
    name_ids: &mut HashMap<String, usize>,
) -> Result<ServiceModel, ConfigError> {
    let ctx = |m: String| ConfigError::schema(SERVICE_FILE, format!("service `{}`: {m}", svc.service_name));
    if svc.stages.is_empty() {
        return Err(ctx("no stages".into()));
    }
    if svc.paths.is_empty() {
        return Err(ctx("at least one execution path is required".into()));
    }
    let mut stage_pos = HashMap::new();
    let mut stages = Vec::with_capacity(svc.stages.len());
    for (i, st) in svc.stages.iter().enumerate() {
        if stage_pos.insert(st.stage_id, i).is_some() {
            return Err(ctx(format!("duplicate stage_id {}", st.stage_id)));
        }
        if matches!(st.queue_type, QueueType::Epoll | QueueType::Socket) && !st.batching {
            return Err(ctx(format!(
                "stage `{}`: {:?} queues require batching",
                st.stage_name, st.queue_type
            )));
        }
        if st.batching != st.queue_parameter.is_some() {
            return Err(ctx(format!(
                "stage `{}`: queue_parameter must be present iff batching",
                st.stage_name
            )));
        }
        let bound = st.batch_bound();
        if st.batching && !matches!(bound, Some(n) if n > 0) {
            return Err(ctx(format!(
                "stage `{}`: batching needs a positive bound N",
                st.stage_name
            )));
        }
        if !(st.per_event_us >= 0.0) || !(st.per_byte_us >= 0.0) {
            return Err(ctx(format!("stage `{}`: slopes must be non-negative", st.stage_name)));
        }
        stages.push(StageModel {
            name: st.stage_name.clone(),
            stage_id: st.stage_id,
            queue_type: st.queue_type,
            batch_bound: if st.batching { bound } else { None },
            per_event_us: st.per_event_us,
            per_byte_us: st.per_byte_us,
        });
    }

    let mut exec_paths = Vec::with_capacity(svc.paths.len());
    let mut path_ids = HashSet::new();
    for p in &svc.paths {
        if !path_ids.insert(p.path_id) {
            return Err(ctx(format!("duplicate path_id {}", p.path_id)));
        }
        if p.stages.is_empty() {
            return Err(ctx(format!("path `{}` has no stages", p.path_name)));
        }
        let stage_list = p
            .stages
            .iter()
            .map(|id| {
                stage_pos.get(id).copied().ok_or_else(|| {
                    ConfigError::dangling(
                        id.to_string(),
                        format!("stage of path `{}` in `{}`", p.path_name, svc.service_name),
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let name_id = *name_ids.entry(p.path_name.clone()).or_insert_with(|| {
            exec_path_names.push(p.path_name.clone());
            exec_path_names.len() - 1
        });
        exec_paths.push(ExecPathModel {
            path_id: p.path_id,
            name_id,
            stages: stage_list,
        });
    }

    let path_weights = match svc.path_probabilities() {
        None => None,
        Some(probs) => {
            if svc.paths.iter().any(|p| p.probability.is_none()) {
                return Err(ctx("either every execution path has a probability or none does".into()));
            }
            for (&id, &p) in &probs {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ConfigError::Probability(format!(
                        "service `{}` path {id}: {p} outside [0,1]",
                        svc.service_name
                    )));
                }
            }
            let mass: f64 = probs.values().sum();
            if (mass - 1.0).abs() > PATH_MASS_TOLERANCE {
                return Err(ConfigError::Probability(format!(
                    "service `{}` execution path probabilities sum to {mass}",
                    svc.service_name
                )));
            }
            Some(svc.paths.iter().map(|p| p.probability.unwrap_or(0.0)).collect())
        }
    };

    let mut processing = Vec::with_capacity(svc.processing.len());
    let mut seen = HashSet::new();
    for ps in &svc.processing {
        let stage = *stage_pos.get(&ps.stage_id).ok_or_else(|| {
            ConfigError::dangling(
                ps.stage_id.to_string(),
                format!("processing stage in `{}`", svc.service_name),
            )
        })?;
        let path = match ps.path_id {
            Some(id) => Some(exec_paths.iter().position(|p| p.path_id == id).ok_or_else(|| {
                ConfigError::dangling(id.to_string(), format!("processing path in `{}`", svc.service_name))
            })?),
            None => None,
        };
        if let Some(f) = ps.freq_ghz {
            check_positive(SERVICE_FILE, "freq_ghz", f)?;
        }
        let key = HistogramKey::new(&svc.service_name, ps.stage_id, ps.path_id, ps.freq_ghz);
        if !seen.insert(key.clone()) {
            return Err(ctx(format!("duplicate processing entry for {key}")));
        }
        let dist = match &ps.dist {
            DistSpec::Exponential { mean_us } => {
                check_positive(SERVICE_FILE, "mean_us", *mean_us)?;
                Distribution::Exponential { mean_us: *mean_us }
            }
            DistSpec::Deterministic { value_us } => {
                check_positive(SERVICE_FILE, "value_us", *value_us)?;
                Distribution::Deterministic { value_us: *value_us }
            }
            DistSpec::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !(*sigma >= 0.0) {
                    return Err(ctx("lognormal needs finite mu and sigma >= 0".into()));
                }
                Distribution::Lognormal { mu: *mu, sigma: *sigma }
            }
            DistSpec::Histogram { .. } => {
                let pdf = s
                    .histograms
                    .get(&key)
                    .ok_or_else(|| ConfigError::dangling(key.to_string(), "histogram table"))?;
                pdf.validate().map_err(|e| match e {
                    ConfigError::Schema { message, .. } => {
                        ConfigError::schema("histogram", format!("{key}: {message}"))
                    }
                    ConfigError::Probability(m) => ConfigError::Probability(format!("{key}: {m}")),
                    other => other,
                })?;
                Distribution::Empirical(pdf.clone())
            }
        };
        processing.push(ProcEntry {
            stage,
            path,
            freq_ghz: ps.freq_ghz,
            dist,
        });
    }

    // No silent defaults: every (path, stage) pair needs a source.
    for (pi, p) in exec_paths.iter().enumerate() {
        for &st in &p.stages {
            let covered = processing
                .iter()
                .any(|e| e.stage == st && (e.path.is_none() || e.path == Some(pi)));
            if !covered {
                return Err(ConfigError::dangling(
                    format!("{}/stage {}", svc.service_name, stages[st].stage_id),
                    format!("no processing-time source for path {}", p.path_id),
                ));
            }
        }
    }

    Ok(ServiceModel {
        name: svc.service_name.clone(),
        stages,
        exec_paths,
        path_weights,
        processing,
    })
}

fn resolve_path(
    p: &InterPathSpec,
    services: &[ServiceModel],
    instances: &[InstanceModel],
    service_idx: &HashMap<String, usize>,
    instance_idx: &HashMap<String, usize>,
) -> Result<PathModel, ConfigError> {
    let ctx = |m: String| ConfigError::schema(PATH_FILE, format!("path {}: {m}", p.path_id));
    if !(0.0..=1.0).contains(&p.probability) {
        return Err(ConfigError::Probability(format!(
            "path {} probability {} outside [0,1]",
            p.path_id, p.probability
        )));
    }
    let mut node_pos: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, n) in p.nodes.iter().enumerate() {
        if node_pos.insert(n.node_id, i).is_some() {
            return Err(ctx(format!("duplicate node_id {}", n.node_id)));
        }
    }
    let lookup = |id: u32, what: &str| {
        node_pos
            .get(&id)
            .copied()
            .ok_or_else(|| ConfigError::dangling(id.to_string(), format!("{what} in path {}", p.path_id)))
    };
    let entry = lookup(p.entry, "entry node")?;

    let mut nodes = Vec::with_capacity(p.nodes.len());
    for n in &p.nodes {
        let (target, service) = if n.service == CLIENT_SERVICE {
            (NodeTarget::Client, None)
        } else if let Some(&i) = instance_idx.get(&n.service) {
            (NodeTarget::Instances(vec![i]), Some(instances[i].service))
        } else if let Some(&svc) = service_idx.get(&n.service) {
            let cands: Vec<usize> = instances
                .iter()
                .enumerate()
                .filter(|(_, inst)| inst.service == svc)
                .map(|(i, _)| i)
                .collect();
            if cands.is_empty() {
                return Err(ConfigError::dangling(
                    &n.service,
                    format!("no deployed instance for node {}", n.node_id),
                ));
            }
            (NodeTarget::Instances(cands), Some(svc))
        } else {
            return Err(ConfigError::dangling(
                &n.service,
                format!("service of node {}", n.node_id),
            ));
        };
        let children = n
            .childs
            .iter()
            .map(|&c| lookup(c, "child"))
            .collect::<Result<Vec<_>, _>>()?;
        let mut uniq = HashSet::new();
        if !children.iter().all(|c| uniq.insert(*c)) {
            return Err(ctx(format!("node {} lists a child twice", n.node_id)));
        }
        let causal = n.causal_node_id.map(|c| lookup(c, "causal_node_id")).transpose()?;
        let enter_ops = n.enter_op.clone().unwrap_or_default();
        let leave_ops = n.leave_op.clone().unwrap_or_default();
        if enter_ops.iter().chain(&leave_ops).any(|op| op.is_unblock()) && causal.is_none() {
            return Err(ctx(format!(
                "node {} has an unblock op but no causal_node_id",
                n.node_id
            )));
        }

        let exec_path = match (service, n.execution_path) {
            (None, _) => None,
            (Some(svc), Some(id)) => Some(services[svc].exec_path_index(id).ok_or_else(|| {
                ConfigError::dangling(id.to_string(), format!("execution_path of node {}", n.node_id))
            })?),
            (Some(svc), None) => {
                let model = &services[svc];
                if model.exec_paths.len() > 1 && model.path_weights.is_none() {
                    return Err(ctx(format!(
                        "node {} leaves execution_path null but service `{}` has several paths and no probabilities",
                        n.node_id, model.name
                    )));
                }
                None
            }
        };

        let node = NodeModel {
            node_id: n.node_id,
            target,
            service,
            exec_path,
            start_stage: n.start_stage,
            end_stage: n.end_stage,
            children,
            parent_count: 0,
            enter_ops,
            leave_ops,
            causal,
        };
        if let Some(svc) = service {
            let model = &services[svc];
            let candidates: Vec<usize> = match exec_path {
                Some(i) => vec![i],
                None => (0..model.exec_paths.len())
                    .filter(|&i| model.path_weights.as_ref().is_none_or(|w| w[i] > 0.0))
                    .collect(),
            };
            for i in candidates {
                if node.stage_range(model, &model.exec_paths[i]).is_none() {
                    return Err(ctx(format!(
                        "node {}: start/end stage not an ordered range of execution path {}",
                        n.node_id, model.exec_paths[i].path_id
                    )));
                }
            }
        }
        nodes.push(node);
    }

    let client_nodes: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.is_client())
        .map(|(i, _)| i)
        .collect();
    if client_nodes.len() != 1 {
        return Err(ctx(format!(
            "expected exactly one `client` node, found {}",
            client_nodes.len()
        )));
    }
    let client_node = client_nodes[0];
    if !nodes[client_node].children.is_empty() {
        return Err(ctx("the client node must be terminal".into()));
    }
    if entry == client_node {
        return Err(ctx("the entry node cannot be the client".into()));
    }
    for (i, n) in nodes.iter().enumerate() {
        if n.children.is_empty() && i != client_node {
            return Err(ctx(format!(
                "node {} is a leaf that never reaches the client",
                n.node_id
            )));
        }
    }

    let edges: Vec<(usize, usize)> = nodes
        .iter()
        .enumerate()
        .flat_map(|(i, n)| n.children.iter().map(move |&c| (i, c)))
        .collect();
    for &(_, c) in &edges {
        nodes[c].parent_count += 1;
    }
    if nodes[entry].parent_count != 0 {
        return Err(ctx(
            "the entry node cannot have parents (true loops are unsupported)".into()
        ));
    }

    // Kahn's algorithm: acyclicity plus reachability from the entry.
    let mut indegree: Vec<u32> = nodes.iter().map(|n| n.parent_count).collect();
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![entry];
    while let Some(v) = stack.pop() {
        order.push(v);
        for &c in &nodes[v].children {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                stack.push(c);
            }
        }
    }
    if order.len() != nodes.len() {
        return Err(ctx("node graph has a cycle or nodes unreachable from the entry".into()));
    }

    // Ancestor sets in topological order.
    let mut ancestors: Vec<HashSet<usize>> = vec![HashSet::new(); nodes.len()];
    for &v in &order {
        let mine = ancestors[v].clone();
        for &c in &nodes[v].children {
            ancestors[c].insert(v);
            ancestors[c].extend(mine.iter().copied());
        }
    }
    for (i, n) in nodes.iter().enumerate() {
        if let Some(c) = n.causal {
            if !ancestors[i].contains(&c) {
                return Err(ctx(format!(
                    "node {}: causal_node_id {} is not an ancestor",
                    n.node_id, nodes[c].node_id
                )));
            }
        }
    }

    Ok(PathModel {
        path_id: p.path_id,
        probability: p.probability,
        entry,
        nodes,
        client_node,
    })
}

fn validate_client(s: &Scenario) -> Result<(), ConfigError> {
    let c = &s.client;
    let bad = |m: String| Err(ConfigError::schema(CLIENT_FILE, m));
    check_positive(CLIENT_FILE, "duration_s", c.duration_s)?;
    let warmup = c.warmup();
    if !(warmup >= 0.0 && warmup < c.duration_s) {
        return bad(format!("warmup_s {warmup} must lie in [0, duration_s)"));
    }
    if c.request_size_bytes == 0 {
        return bad("request_size_bytes must be positive".into());
    }
    if c.connections == 0 {
        return bad("connections must be positive".into());
    }
    match &c.load_pattern {
        LoadPatternSpec::Constant { qps } => check_positive(CLIENT_FILE, "qps", *qps)?,
        LoadPatternSpec::Trace { points } => crate::workload::LoadPattern::trace(points.clone())
            .map(|_| ())
            .map_err(|e| ConfigError::schema(CLIENT_FILE, e.to_string()))?,
        LoadPatternSpec::TraceFile { file } => {
            let points = s
                .traces
                .get(file)
                .ok_or_else(|| ConfigError::dangling(file, "trace file contents"))?;
            crate::workload::LoadPattern::trace(points.clone())
                .map_err(|e| ConfigError::schema(file, e.to_string()))?;
        }
    }
    if let Some(pm) = &c.power {
        check_positive(CLIENT_FILE, "qos_target_ms", pm.qos_target_ms)?;
        check_positive(CLIENT_FILE, "decision_interval_s", pm.decision_interval_s)?;
        if pm.bucket_count == 0 || pm.recheck_cycles == 0 {
            return bad("bucket_count and K must be positive".into());
        }
        if !(pm.pref_min > 0.0 && pm.pref_min <= 1.0 && pm.pref_max >= 1.0) {
            return bad("preference bounds must satisfy 0 < pref_min <= 1 <= pref_max".into());
        }
        if !(pm.pref_increase >= 1.0 && pm.pref_decrease > 0.0 && pm.pref_decrease <= 1.0) {
            return bad("pref_increase must be >= 1 and pref_decrease in (0, 1]".into());
        }
    }
    Ok(())
}
