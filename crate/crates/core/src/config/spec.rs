//! Serde mirrors of the five declarative scenario files.
//!
//! Field names follow the JSON template used for service descriptions
//! (`stage_name`, `queue_type`, `childs`, `enter_op`, ...). Every struct
//! rejects unknown fields so a misspelled op or key fails loudly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueType {
    Single,
    Epoll,
    Socket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub stage_name: String,
    pub stage_id: u32,
    pub queue_type: QueueType,
    pub batching: bool,
    /// `[null, N]` for epoll, `[N]` for socket. Only the last slot (the
    /// per-connection bound N) is enforced.
    #[serde(default)]
    pub queue_parameter: Option<Vec<Option<u32>>>,
    /// Extra cost per job in the invocation's batch (epoll active events).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub per_event_us: f64,
    /// Extra cost per request byte read (socket_read).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub per_byte_us: f64,
}

impl StageSpec {
    pub fn batch_bound(&self) -> Option<u32> {
        self.queue_parameter
            .as_ref()
            .and_then(|p| p.iter().rev().find_map(|slot| *slot))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecPathSpec {
    pub path_id: u32,
    pub path_name: String,
    pub stages: Vec<u32>,
    /// Selection probability when a path node leaves `execution_path` null.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Exponential {
        mean_us: f64,
    },
    Deterministic {
        value_us: f64,
    },
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    /// CSV `upper_bound_us,probability`, relative to the scenario directory.
    Histogram {
        file: String,
    },
}

/// Processing-time source for one stage. `path_id` narrows it to one
/// execution path; `freq_ghz` binds it to one DVFS level (otherwise it
/// describes the machine's top frequency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingSpec {
    pub stage_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_ghz: Option<f64>,
    pub dist: DistSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub service_name: String,
    pub stages: Vec<StageSpec>,
    pub paths: Vec<ExecPathSpec>,
    #[serde(default)]
    pub processing: Vec<ProcessingSpec>,
}

impl ServiceSpec {
    /// Path id → probability, if the service declares one.
    pub fn path_probabilities(&self) -> Option<BTreeMap<u32, f64>> {
        if self.paths.iter().all(|p| p.probability.is_none()) {
            return None;
        }
        Some(
            self.paths
                .iter()
                .map(|p| (p.path_id, p.probability.unwrap_or(0.0)))
                .collect(),
        )
    }
}

fn default_rx_mean_us() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub machine_id: String,
    pub cores: u32,
    /// Dedicated interrupt cores; 0 disables network processing on this machine.
    pub network_cores: u32,
    #[serde(default)]
    pub dvfs_levels: Vec<f64>,
    #[serde(default = "default_rx_mean_us")]
    pub net_rx_mean_us: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub net_per_byte_us: f64,
}

impl MachineSpec {
    pub fn max_freq(&self) -> Option<f64> {
        self.dvfs_levels.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecModel {
    Simple,
    MultiThreaded,
}

fn default_context_switch_us() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub instance_name: String,
    pub service_name: String,
    pub machine_id: String,
    pub threads: u32,
    pub exec_model: ExecModel,
    /// Peer instance name → connection pool size.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub connections: BTreeMap<String, u32>,
    #[serde(default = "default_context_switch_us")]
    pub context_switch_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathOp {
    BlockRecvConnection,
    UnblockConnection,
    BlockThread,
    UnblockThread,
}

impl PathOp {
    pub fn is_unblock(self) -> bool {
        matches!(self, PathOp::UnblockConnection | PathOp::UnblockThread)
    }
}

/// Reserved service name of the terminal path node.
pub const CLIENT_SERVICE: &str = "client";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathNodeSpec {
    pub node_id: u32,
    /// Instance name, service name (round-robin over its instances) or `client`.
    pub service: String,
    #[serde(default)]
    pub execution_path: Option<u32>,
    #[serde(default)]
    pub start_stage: Option<u32>,
    #[serde(default)]
    pub end_stage: Option<u32>,
    #[serde(default)]
    pub childs: Vec<u32>,
    #[serde(default)]
    pub enter_op: Option<Vec<PathOp>>,
    #[serde(default)]
    pub leave_op: Option<Vec<PathOp>>,
    #[serde(default)]
    pub causal_node_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterPathSpec {
    pub path_id: u32,
    pub probability: f64,
    pub entry: u32,
    pub nodes: Vec<PathNodeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadPatternSpec {
    Constant {
        qps: f64,
    },
    Trace {
        points: Vec<(f64, f64)>,
    },
    /// CSV `time_s,qps`, relative to the scenario directory.
    TraceFile {
        file: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interarrival {
    Exponential,
    Deterministic,
}

fn default_client_connections() -> u32 {
    320
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    pub qos_target_ms: f64,
    pub decision_interval_s: f64,
    #[serde(default = "PowerSpec::default_bucket_count")]
    pub bucket_count: usize,
    /// Successful intervals between target re-selection.
    #[serde(default = "PowerSpec::default_recheck_cycles", rename = "K")]
    pub recheck_cycles: u32,
    #[serde(default = "PowerSpec::default_pref_increase")]
    pub pref_increase: f64,
    #[serde(default = "PowerSpec::default_pref_decrease")]
    pub pref_decrease: f64,
    #[serde(default = "PowerSpec::default_pref_min")]
    pub pref_min: f64,
    #[serde(default = "PowerSpec::default_pref_max")]
    pub pref_max: f64,
    #[serde(default = "PowerSpec::default_enabled")]
    pub enabled: bool,
}

impl PowerSpec {
    fn default_bucket_count() -> usize {
        10
    }
    fn default_recheck_cycles() -> u32 {
        10
    }
    fn default_pref_increase() -> f64 {
        1.1
    }
    fn default_pref_decrease() -> f64 {
        0.5
    }
    fn default_pref_min() -> f64 {
        0.01
    }
    fn default_pref_max() -> f64 {
        100.0
    }
    fn default_enabled() -> bool {
        true
    }

    pub fn new(qos_target_ms: f64, decision_interval_s: f64) -> Self {
        PowerSpec {
            qos_target_ms,
            decision_interval_s,
            bucket_count: Self::default_bucket_count(),
            recheck_cycles: Self::default_recheck_cycles(),
            pref_increase: Self::default_pref_increase(),
            pref_decrease: Self::default_pref_decrease(),
            pref_min: Self::default_pref_min(),
            pref_max: Self::default_pref_max(),
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientSpec {
    pub load_pattern: LoadPatternSpec,
    pub interarrival: Interarrival,
    pub request_size_bytes: u64,
    pub duration_s: f64,
    /// Defaults to the first 10% of `duration_s`.
    #[serde(default)]
    pub warmup_s: Option<f64>,
    pub rng_seed: u64,
    #[serde(default = "default_client_connections")]
    pub connections: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerSpec>,
}

impl ClientSpec {
    pub fn warmup(&self) -> f64 {
        self.warmup_s.unwrap_or(0.1 * self.duration_s)
    }
}
