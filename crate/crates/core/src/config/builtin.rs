//! Built-in topologies: tiered web stacks, load balancing, fanout, RPC echo,
//! a social-network graph, the tail-at-scale cluster, queueing reference
//! models and the diurnal power-management fixture.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::*;
use super::{ConfigError, HistogramTable, Scenario};

/// 1.2 to 2.6 GHz in 0.2 GHz steps.
pub const DVFS_LEVELS: [f64; 8] = [1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6];
const PAGE_BYTES: u64 = 612;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlowMode {
    /// `round(frac * n)` servers are slow for the whole run.
    FixedServers,
    /// Every leaf visit is independently slow with probability `frac`.
    PerRequest,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinKind {
    /// One exponential single-stage server on one core (mean 1 ms).
    Mm1,
    /// One exponential stage served by `k` threads on `k` cores.
    Mmk(u32),
    /// Batching event loop: epoll stage plus handler on one core.
    EpollServer,
    TwoTier,
    ThreeTier,
    LoadBalance(u32),
    Fanout(u32),
    RpcEcho,
    SocialNetwork,
    TailAtScale {
        n: u32,
        slow_frac: f64,
        slow_factor: f64,
        mode: SlowMode,
    },
    /// Two DVFS tiers under a diurnal trace with the power manager enabled.
    PowerTwoTier,
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinKind::Mm1 => write!(f, "mm1"),
            BuiltinKind::Mmk(k) => write!(f, "mmk:{k}"),
            BuiltinKind::EpollServer => write!(f, "epoll_server"),
            BuiltinKind::TwoTier => write!(f, "two_tier"),
            BuiltinKind::ThreeTier => write!(f, "three_tier"),
            BuiltinKind::LoadBalance(k) => write!(f, "load_balance:{k}"),
            BuiltinKind::Fanout(k) => write!(f, "fanout:{k}"),
            BuiltinKind::RpcEcho => write!(f, "rpc_echo"),
            BuiltinKind::SocialNetwork => write!(f, "social_network"),
            BuiltinKind::TailAtScale { n, .. } => write!(f, "tail_at_scale:{n}"),
            BuiltinKind::PowerTwoTier => write!(f, "power_two_tier"),
        }
    }
}

impl FromStr for BuiltinKind {
    type Err = ConfigError;

    /// `name` or `name:N`, e.g. `fanout:16`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |default: u32| -> Result<u32, ConfigError> {
            match arg {
                None => Ok(default),
                Some(a) => a.parse::<u32>().ok().filter(|&v| v > 0).ok_or_else(|| {
                    ConfigError::InvalidParameter(format!("`{s}`: expected a positive integer after `:`"))
                }),
            }
        };
        Ok(match name {
            "mm1" => BuiltinKind::Mm1,
            "mmk" => BuiltinKind::Mmk(num(2)?),
            "epoll_server" => BuiltinKind::EpollServer,
            "two_tier" => BuiltinKind::TwoTier,
            "three_tier" => BuiltinKind::ThreeTier,
            "load_balance" => BuiltinKind::LoadBalance(num(4)?),
            "fanout" => BuiltinKind::Fanout(num(4)?),
            "rpc_echo" => BuiltinKind::RpcEcho,
            "social_network" => BuiltinKind::SocialNetwork,
            "tail_at_scale" => BuiltinKind::TailAtScale {
                n: num(100)?,
                slow_frac: 0.01,
                slow_factor: 10.0,
                mode: SlowMode::PerRequest,
            },
            "power_two_tier" => BuiltinKind::PowerTwoTier,
            _ => {
                return Err(ConfigError::InvalidParameter(format!(
                    "unknown builtin scenario `{name}`"
                )))
            }
        })
    }
}

pub fn generate_builtin_scenario(kind: &BuiltinKind, seed: u64) -> Result<Scenario, ConfigError> {
    match kind {
        BuiltinKind::Mm1 => mmk(1, ExecModel::Simple, 500.0, seed),
        BuiltinKind::Mmk(k) => mmk(*k, ExecModel::MultiThreaded, 500.0 * *k as f64, seed),
        BuiltinKind::EpollServer => epoll_server(seed),
        BuiltinKind::TwoTier => two_tier(seed),
        BuiltinKind::ThreeTier => three_tier(seed),
        BuiltinKind::LoadBalance(k) => load_balance(*k, seed),
        BuiltinKind::Fanout(k) => tail_at_scale(*k, 0.0, 1.0, SlowMode::PerRequest, seed),
        BuiltinKind::RpcEcho => rpc_echo(seed),
        BuiltinKind::SocialNetwork => social_network(seed),
        BuiltinKind::TailAtScale {
            n,
            slow_frac,
            slow_factor,
            mode,
        } => tail_at_scale(*n, *slow_frac, *slow_factor, *mode, seed),
        BuiltinKind::PowerTwoTier => power_two_tier(5.0, 0.1, seed),
    }
}

fn exp(mean_us: f64) -> DistSpec {
    DistSpec::Exponential { mean_us }
}

fn det(value_us: f64) -> DistSpec {
    DistSpec::Deterministic { value_us }
}

fn stage(name: &str, id: u32, queue_type: QueueType, bound: Option<u32>) -> StageSpec {
    let queue_parameter = bound.map(|n| match queue_type {
        QueueType::Epoll => vec![None, Some(n)],
        _ => vec![Some(n)],
    });
    StageSpec {
        stage_name: name.into(),
        stage_id: id,
        queue_type,
        batching: bound.is_some(),
        queue_parameter,
        per_event_us: 0.0,
        per_byte_us: 0.0,
    }
}

fn xpath(id: u32, name: &str, stages: &[u32]) -> ExecPathSpec {
    ExecPathSpec {
        path_id: id,
        path_name: name.into(),
        stages: stages.to_vec(),
        probability: None,
    }
}

fn proc(stage_id: u32, path_id: Option<u32>, dist: DistSpec) -> ProcessingSpec {
    ProcessingSpec {
        stage_id,
        path_id,
        freq_ghz: None,
        dist,
    }
}

/// Single-queue, single-stage service.
pub fn single_stage_service(name: &str, dist: DistSpec) -> ServiceSpec {
    ServiceSpec {
        service_name: name.into(),
        stages: vec![stage("process", 0, QueueType::Single, None)],
        paths: vec![xpath(0, &format!("{name}_process"), &[0])],
        processing: vec![proc(0, None, dist)],
    }
}

/// Event-driven front end: epoll, socket read, request handling and
/// response send. Path 0 handles an incoming request, path 1 relays the
/// downstream response.
fn nginx_service(name: &str) -> ServiceSpec {
    let mut epoll = stage("epoll", 0, QueueType::Epoll, Some(8));
    epoll.per_event_us = 0.5;
    let mut read = stage("socket_read", 1, QueueType::Socket, Some(8));
    read.per_byte_us = 0.005;
    ServiceSpec {
        service_name: name.into(),
        stages: vec![
            epoll,
            read,
            stage("http_processing", 2, QueueType::Single, None),
            stage("socket_send", 3, QueueType::Single, None),
        ],
        paths: vec![
            xpath(0, &format!("{name}_request"), &[0, 1, 2]),
            xpath(1, &format!("{name}_response"), &[0, 1, 3]),
        ],
        processing: vec![
            proc(0, None, det(2.0)),
            proc(1, None, det(3.0)),
            proc(2, None, exp(20.0)),
            proc(3, None, det(5.0)),
        ],
    }
}

/// Key-value cache with read and write paths over the same stages.
fn memcached_service(name: &str) -> ServiceSpec {
    let mut epoll = stage("epoll", 0, QueueType::Epoll, Some(8));
    epoll.per_event_us = 0.5;
    let mut read = stage("socket_read", 1, QueueType::Socket, Some(8));
    read.per_byte_us = 0.005;
    let mut read_path = xpath(0, "memcached_read", &[0, 1, 2, 3]);
    read_path.probability = Some(0.9);
    let mut write_path = xpath(1, "memcached_write", &[0, 1, 2, 3]);
    write_path.probability = Some(0.1);
    ServiceSpec {
        service_name: name.into(),
        stages: vec![
            epoll,
            read,
            stage("memcached_processing", 2, QueueType::Single, None),
            stage("socket_send", 3, QueueType::Single, None),
        ],
        paths: vec![read_path, write_path],
        processing: vec![
            proc(0, None, det(2.0)),
            proc(1, None, det(3.0)),
            proc(2, Some(0), exp(10.0)),
            proc(2, Some(1), exp(25.0)),
            proc(3, None, det(4.0)),
        ],
    }
}

fn machine(id: &str, cores: u32, network_cores: u32, dvfs: bool) -> MachineSpec {
    MachineSpec {
        machine_id: id.into(),
        cores,
        network_cores,
        dvfs_levels: if dvfs { DVFS_LEVELS.to_vec() } else { Vec::new() },
        net_rx_mean_us: 10.0,
        net_per_byte_us: 0.0,
    }
}

fn instance(name: &str, service: &str, machine: &str, threads: u32, exec_model: ExecModel) -> InstanceSpec {
    InstanceSpec {
        instance_name: name.into(),
        service_name: service.into(),
        machine_id: machine.into(),
        threads,
        exec_model,
        connections: BTreeMap::new(),
        context_switch_us: 5.0,
    }
}

fn node(id: u32, service: &str, exec_path: Option<u32>, childs: &[u32]) -> PathNodeSpec {
    PathNodeSpec {
        node_id: id,
        service: service.into(),
        execution_path: exec_path,
        start_stage: None,
        end_stage: None,
        childs: childs.to_vec(),
        enter_op: None,
        leave_op: None,
        causal_node_id: None,
    }
}

fn client_node(id: u32) -> PathNodeSpec {
    node(id, CLIENT_SERVICE, None, &[])
}

fn client(qps: f64, duration_s: f64, seed: u64) -> ClientSpec {
    ClientSpec {
        load_pattern: LoadPatternSpec::Constant { qps },
        interarrival: Interarrival::Exponential,
        request_size_bytes: PAGE_BYTES,
        duration_s,
        warmup_s: None,
        rng_seed: seed,
        connections: 320,
        power: None,
    }
}

fn mmk(k: u32, exec_model: ExecModel, qps: f64, seed: u64) -> Result<Scenario, ConfigError> {
    Scenario::new(
        vec![single_stage_service("server", exp(1000.0))],
        vec![machine("m0", k, 0, false)],
        vec![instance("server_0", "server", "m0", k, exec_model)],
        vec![InterPathSpec {
            path_id: 0,
            probability: 1.0,
            entry: 0,
            nodes: vec![node(0, "server_0", Some(0), &[1]), client_node(1)],
        }],
        client(qps, 100.0, seed),
    )
}

/// Epoll stage (40 us per invocation plus 2 us per ready event) feeding a
/// 50 us handler, all on one core.
fn epoll_server(seed: u64) -> Result<Scenario, ConfigError> {
    let mut epoll = stage("epoll", 0, QueueType::Epoll, Some(64));
    epoll.per_event_us = 2.0;
    let svc = ServiceSpec {
        service_name: "server".into(),
        stages: vec![epoll, stage("handler", 1, QueueType::Single, None)],
        paths: vec![xpath(0, "serve", &[0, 1])],
        processing: vec![proc(0, None, det(40.0)), proc(1, None, det(50.0))],
    };
    Scenario::new(
        vec![svc],
        vec![machine("m0", 1, 0, false)],
        vec![instance("server_0", "server", "m0", 1, ExecModel::Simple)],
        vec![InterPathSpec {
            path_id: 0,
            probability: 1.0,
            entry: 0,
            nodes: vec![node(0, "server_0", Some(0), &[1]), client_node(1)],
        }],
        client(5000.0, 20.0, seed),
    )
}

/// Per-job charging ablation: every stage becomes an unbatched single
/// queue, so each job pays the full per-invocation cost on its own.
pub fn unbatched(scenario: &Scenario) -> Result<Scenario, ConfigError> {
    let mut s = scenario.clone();
    for svc in &mut s.services {
        for st in &mut svc.stages {
            st.queue_type = QueueType::Single;
            st.batching = false;
            st.queue_parameter = None;
        }
    }
    s.validate()?;
    Ok(s)
}

/// Front end and cache with HTTP/1.1 semantics: the client connection stays
/// receive-blocked until the response leaves the front end.
fn two_tier(seed: u64) -> Result<Scenario, ConfigError> {
    let mut entry = node(0, "nginx_0", Some(0), &[1]);
    entry.enter_op = Some(vec![PathOp::BlockRecvConnection]);
    let mut reply = node(2, "nginx_0", Some(1), &[3]);
    reply.leave_op = Some(vec![PathOp::UnblockConnection]);
    reply.causal_node_id = Some(0);
    Scenario::new(
        vec![nginx_service("nginx"), memcached_service("memcached")],
        vec![machine("m0", 8, 2, true), machine("m1", 8, 2, true)],
        vec![
            instance("nginx_0", "nginx", "m0", 8, ExecModel::Simple),
            instance("memcached_0", "memcached", "m1", 4, ExecModel::MultiThreaded),
        ],
        vec![InterPathSpec {
            path_id: 0,
            probability: 1.0,
            entry: 0,
            nodes: vec![entry, node(1, "memcached_0", None, &[2]), reply, client_node(3)],
        }],
        client(20_000.0, 10.0, seed),
    )
}

/// Two-tier HTTP/1.1 stack with a single client connection.
pub fn two_tier_single_connection(seed: u64) -> Result<Scenario, ConfigError> {
    let mut s = two_tier(seed)?;
    s.client.connections = 1;
    s.client.load_pattern = LoadPatternSpec::Constant { qps: 5000.0 };
    s.validate()?;
    Ok(s)
}

/// Front end, cache and database; 10% of requests miss the cache.
fn three_tier(seed: u64) -> Result<Scenario, ConfigError> {
    let mongodb = ServiceSpec {
        service_name: "mongodb".into(),
        stages: vec![
            stage("recv", 0, QueueType::Single, None),
            stage("query", 1, QueueType::Single, None),
        ],
        paths: vec![xpath(0, "mongodb_query", &[0, 1])],
        processing: vec![
            proc(0, None, det(5.0)),
            proc(1, None, DistSpec::Lognormal { mu: 6.0, sigma: 0.5 }),
        ],
    };
    let hit = InterPathSpec {
        path_id: 0,
        probability: 0.9,
        entry: 0,
        nodes: vec![
            node(0, "nginx_0", Some(0), &[1]),
            node(1, "memcached_0", Some(0), &[2]),
            node(2, "nginx_0", Some(1), &[3]),
            client_node(3),
        ],
    };
    let miss = InterPathSpec {
        path_id: 1,
        probability: 0.1,
        entry: 0,
        nodes: vec![
            node(0, "nginx_0", Some(0), &[1]),
            node(1, "memcached_0", Some(0), &[2]),
            node(2, "mongodb_0", Some(0), &[3]),
            node(3, "memcached_0", Some(1), &[4]),
            node(4, "nginx_0", Some(1), &[5]),
            client_node(5),
        ],
    };
    Scenario::new(
        vec![nginx_service("nginx"), memcached_service("memcached"), mongodb],
        vec![
            machine("m0", 8, 2, true),
            machine("m1", 8, 2, true),
            machine("m2", 8, 2, true),
        ],
        vec![
            instance("nginx_0", "nginx", "m0", 8, ExecModel::Simple),
            instance("memcached_0", "memcached", "m1", 4, ExecModel::MultiThreaded),
            instance("mongodb_0", "mongodb", "m2", 16, ExecModel::MultiThreaded),
        ],
        vec![hit, miss],
        client(10_000.0, 10.0, seed),
    )
}

/// Proxy spreading requests round-robin over `k` backends.
fn load_balance(k: u32, seed: u64) -> Result<Scenario, ConfigError> {
    let k = k.max(1);
    let mut machines = vec![machine("proxy_m", 8, 4, true)];
    let mut instances = vec![instance("nginx_0", "nginx", "proxy_m", 8, ExecModel::Simple)];
    for i in 0..k {
        let m = format!("backend_m{i}");
        machines.push(machine(&m, 2, 1, true));
        instances.push(instance(
            &format!("backend_{i}"),
            "backend",
            &m,
            2,
            ExecModel::MultiThreaded,
        ));
    }
    Scenario::new(
        vec![nginx_service("nginx"), single_stage_service("backend", exp(200.0))],
        machines,
        instances,
        vec![InterPathSpec {
            path_id: 0,
            probability: 1.0,
            entry: 0,
            nodes: vec![
                node(0, "nginx_0", Some(0), &[1]),
                node(1, "backend", Some(0), &[2]),
                node(2, "nginx_0", Some(1), &[3]),
                client_node(3),
            ],
        }],
        client(5000.0 * k as f64, 10.0, seed),
    )
}

fn rpc_echo(seed: u64) -> Result<Scenario, ConfigError> {
    let mut epoll = stage("epoll", 0, QueueType::Epoll, Some(8));
    epoll.per_event_us = 0.5;
    let svc = ServiceSpec {
        service_name: "echo".into(),
        stages: vec![
            epoll,
            stage("socket_read", 1, QueueType::Socket, Some(8)),
            stage("echo", 2, QueueType::Single, None),
            stage("socket_send", 3, QueueType::Single, None),
        ],
        paths: vec![xpath(0, "echo", &[0, 1, 2, 3])],
        processing: vec![
            proc(0, None, det(2.0)),
            proc(1, None, det(3.0)),
            proc(2, None, exp(8.0)),
            proc(3, None, det(4.0)),
        ],
    };
    Scenario::new(
        vec![svc],
        vec![machine("m0", 4, 1, true)],
        vec![instance("echo_0", "echo", "m0", 4, ExecModel::MultiThreaded)],
        vec![InterPathSpec {
            path_id: 0,
            probability: 1.0,
            entry: 0,
            nodes: vec![node(0, "echo_0", Some(0), &[1]), client_node(1)],
        }],
        client(20_000.0, 10.0, seed),
    )
}

/// Post composition fans out to four helpers and joins before storage;
/// timeline reads go through the timeline service to storage.
fn social_network(seed: u64) -> Result<Scenario, ConfigError> {
    let helpers = ["text", "media", "user", "unique_id"];
    let mut services = vec![
        nginx_service("nginx"),
        single_stage_service("compose_post", exp(30.0)),
        single_stage_service("home_timeline", exp(40.0)),
        single_stage_service("post_storage", exp(60.0)),
    ];
    services.extend(helpers.iter().map(|h| single_stage_service(h, exp(20.0))));
    let mut machines = vec![machine("front_m", 8, 2, true)];
    let mut instances = vec![instance("nginx_0", "nginx", "front_m", 8, ExecModel::Simple)];
    for (i, svc) in ["compose_post", "home_timeline", "post_storage"]
        .iter()
        .chain(helpers.iter())
        .enumerate()
    {
        let m = format!("logic_m{i}");
        machines.push(machine(&m, 4, 1, true));
        instances.push(instance(&format!("{svc}_0"), svc, &m, 4, ExecModel::MultiThreaded));
    }
    let compose = InterPathSpec {
        path_id: 0,
        probability: 0.4,
        entry: 0,
        nodes: vec![
            node(0, "nginx_0", Some(0), &[1]),
            node(1, "compose_post_0", Some(0), &[2, 3, 4, 5]),
            node(2, "text_0", Some(0), &[6]),
            node(3, "media_0", Some(0), &[6]),
            node(4, "user_0", Some(0), &[6]),
            node(5, "unique_id_0", Some(0), &[6]),
            node(6, "compose_post_0", Some(0), &[7]),
            node(7, "post_storage_0", Some(0), &[8]),
            node(8, "nginx_0", Some(1), &[9]),
            client_node(9),
        ],
    };
    let read = InterPathSpec {
        path_id: 1,
        probability: 0.6,
        entry: 0,
        nodes: vec![
            node(0, "nginx_0", Some(0), &[1]),
            node(1, "home_timeline_0", Some(0), &[2]),
            node(2, "post_storage_0", Some(0), &[3]),
            node(3, "home_timeline_0", Some(0), &[4]),
            node(4, "nginx_0", Some(1), &[5]),
            client_node(5),
        ],
    };
    Scenario::new(
        services,
        machines,
        instances,
        vec![compose, read],
        client(5000.0, 10.0, seed),
    )
}

/// A proxy fanning each request out to `n` single-core leaves (exponential,
/// mean 1 ms) and joining the replies. Networking is free so the end-to-end
/// latency is the proxy cost plus the slowest leaf.
fn tail_at_scale(n: u32, slow_frac: f64, slow_factor: f64, mode: SlowMode, seed: u64) -> Result<Scenario, ConfigError> {
    if n == 0 {
        return Err(ConfigError::InvalidParameter("fanout needs at least one leaf".into()));
    }
    if !(0.0..=1.0).contains(&slow_frac) {
        return Err(ConfigError::InvalidParameter(format!(
            "slow fraction {slow_frac} outside [0,1]"
        )));
    }
    if !(slow_factor >= 1.0 && slow_factor.is_finite()) {
        return Err(ConfigError::InvalidParameter(format!(
            "slow factor {slow_factor} must be >= 1"
        )));
    }
    const LEAF_MEAN_US: f64 = 1000.0;
    let mut services = vec![single_stage_service("proxy", det(1.0))];
    let mut slow_servers = vec![false; n as usize];
    match mode {
        SlowMode::PerRequest => {
            let mut leaf = single_stage_service("leaf", exp(LEAF_MEAN_US));
            if slow_frac > 0.0 {
                let mut normal = xpath(0, "normal", &[0]);
                normal.probability = Some(1.0 - slow_frac);
                let mut slow = xpath(1, "slow", &[0]);
                slow.probability = Some(slow_frac);
                leaf.paths = vec![normal, slow];
                leaf.processing = vec![
                    proc(0, Some(0), exp(LEAF_MEAN_US)),
                    proc(0, Some(1), exp(LEAF_MEAN_US * slow_factor)),
                ];
            }
            services.push(leaf);
        }
        SlowMode::FixedServers => {
            let k = (slow_frac * n as f64).round() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in sample(&mut rng, n as usize, k) {
                slow_servers[i] = true;
            }
            let mut leaf = single_stage_service("leaf", exp(LEAF_MEAN_US));
            leaf.paths[0].path_name = "normal".into();
            services.push(leaf);
            let mut slow = single_stage_service("leaf_slow", exp(LEAF_MEAN_US * slow_factor));
            slow.paths[0].path_name = "slow".into();
            services.push(slow);
        }
    }
    let mut machines = vec![machine("proxy_m", 4, 0, false)];
    let mut instances = vec![instance("proxy_0", "proxy", "proxy_m", 4, ExecModel::Simple)];
    let join = n + 1;
    let mut nodes = vec![node(0, "proxy_0", Some(0), &(1..=n).collect::<Vec<_>>())];
    for i in 0..n {
        let m = format!("leaf_m{i}");
        let name = format!("leaf_{i}");
        let svc = if slow_servers[i as usize] { "leaf_slow" } else { "leaf" };
        machines.push(machine(&m, 1, 0, false));
        instances.push(instance(&name, svc, &m, 1, ExecModel::Simple));
        nodes.push(node(i + 1, &name, None, &[join]));
    }
    nodes.push(node(join, "proxy_0", Some(0), &[join + 1]));
    nodes.push(client_node(join + 1));
    // One request per second keeps leaf utilization at 0.1%, so queueing
    // barely perturbs the max-of-exponentials law.
    let mut c = client(1.0, 10_000.0, seed);
    c.connections = 1000;
    Scenario::new(
        services,
        machines,
        instances,
        vec![InterPathSpec {
            path_id: 0,
            probability: 1.0,
            entry: 0,
            nodes,
        }],
        c,
    )
}

/// Two DVFS-capable tiers (front end visited on the way in and out, back
/// end once; both 8-core multi-threaded) driven by three periods of a
/// diurnal trace between 20% and 90% of the bottleneck's capacity at the
/// top frequency.
pub fn power_two_tier(qos_ms: f64, interval_s: f64, seed: u64) -> Result<Scenario, ConfigError> {
    const FRONT_MEAN_US: f64 = 100.0;
    const BACK_MEAN_US: f64 = 250.0;
    const CORES: u32 = 8;
    const PERIOD_S: f64 = 60.0;
    const DURATION_S: f64 = 180.0;
    let saturation_qps = (CORES as f64 / BACK_MEAN_US).min(CORES as f64 / (2.0 * FRONT_MEAN_US)) * 1e6;
    let trace = crate::workload::diurnal_trace(saturation_qps, PERIOD_S, DURATION_S, 1.0);
    let mut traces = BTreeMap::new();
    traces.insert("diurnal.csv".to_string(), trace);
    let mut c = client(0.0, DURATION_S, seed);
    c.load_pattern = LoadPatternSpec::TraceFile {
        file: "diurnal.csv".into(),
    };
    c.warmup_s = Some(1.0);
    c.power = Some(PowerSpec::new(qos_ms, interval_s));
    Scenario::with_data(
        vec![
            single_stage_service("frontend", exp(FRONT_MEAN_US)),
            single_stage_service("backend", exp(BACK_MEAN_US)),
        ],
        vec![machine("front_m", CORES, 0, true), machine("back_m", CORES, 0, true)],
        vec![
            instance("frontend_0", "frontend", "front_m", CORES, ExecModel::MultiThreaded),
            instance("backend_0", "backend", "back_m", CORES, ExecModel::MultiThreaded),
        ],
        vec![InterPathSpec {
            path_id: 0,
            probability: 1.0,
            entry: 0,
            nodes: vec![
                node(0, "frontend_0", Some(0), &[1]),
                node(1, "backend_0", Some(0), &[2]),
                node(2, "frontend_0", Some(0), &[3]),
                client_node(3),
            ],
        }],
        c,
        HistogramTable::new(),
        traces,
    )
}
