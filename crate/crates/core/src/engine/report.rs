use crate::power::PowerReport;
use crate::stats::LatencyRecorder;

/// Whole-run bookkeeping used by the conservation and structure checks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub requests_injected: u64,
    pub requests_completed: u64,
    pub requests_in_flight: u64,
    /// Most requests simultaneously between entry admission and completion.
    pub max_outstanding: u64,
    /// Job copies sent along path edges (one per edge traversed).
    pub copies_created: u64,
    /// Copies absorbed at a fan-in node whose counter had not yet reached zero.
    pub copies_merged: u64,
    /// Copies that continued: admitted to a node or terminated at the client.
    pub copies_forwarded: u64,
    pub node_executions: u64,
    /// Node executions that started before all parents completed.
    pub fanin_violations: u64,
    /// Node executions beyond the first for one (request, node) pair.
    pub duplicate_executions: u64,
    /// Jobs parked behind a receive-blocked connection.
    pub jobs_parked: u64,
    /// Instants at which a machine ran more invocations than it has cores.
    pub core_violations: u64,
    pub net_delivered: u64,
    pub net_completed: u64,
    pub dvfs_changes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceReport {
    pub name: String,
    pub machine: String,
    /// Core time spent in stage invocations.
    pub busy_us: f64,
    pub invocations: u64,
    /// Post-warmup jobs that reached a stage queue.
    pub measured_jobs: u64,
    /// Of those, jobs that could not start at their enqueue instant.
    pub waited_jobs: u64,
    pub max_running: u32,
    pub final_freq_ghz: Option<f64>,
}

impl InstanceReport {
    pub fn wait_fraction(&self) -> Option<f64> {
        (self.measured_jobs > 0).then(|| self.waited_jobs as f64 / self.measured_jobs as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkReport {
    pub machine: String,
    pub cores: u32,
    pub busy_us: f64,
    pub rx_jobs: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub events: u64,
    /// FNV-1a over every processed `(timestamp, sequence, kind)`.
    pub digest: u64,
    /// Full event trace, when requested in the run options.
    pub trace: Vec<(f64, u64, &'static str)>,
    pub end_time_us: f64,
    pub warmup_s: f64,
    pub duration_s: f64,
    /// Mean configured rate over the measurement window.
    pub offered_qps: f64,
    /// Completions inside the measurement window per second.
    pub achieved_qps: f64,
    pub latencies: LatencyRecorder,
    pub instances: Vec<InstanceReport>,
    pub network: Vec<NetworkReport>,
    pub counters: Counters,
    pub exec_path_names: Vec<String>,
    /// Post-warmup completed requests that visited each execution-path name.
    pub exec_path_touches: Vec<u64>,
    pub power: Option<PowerReport>,
}

impl RunReport {
    pub fn instance(&self, name: &str) -> Option<&InstanceReport> {
        self.instances.iter().find(|i| i.name == name)
    }

    pub fn instance_index(&self, name: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.name == name)
    }

    /// Share of measured requests that executed the named execution path
    /// at least once.
    pub fn touch_fraction(&self, exec_path_name: &str) -> Option<f64> {
        let i = self.exec_path_names.iter().position(|n| n == exec_path_name)?;
        let n = self.latencies.len();
        (n > 0).then(|| self.exec_path_touches[i] as f64 / n as f64)
    }

    /// Measured window length in seconds.
    pub fn window_s(&self) -> f64 {
        self.duration_s - self.warmup_s
    }

    pub fn utilization(&self, instance: usize, cores: u32) -> f64 {
        self.instances[instance].busy_us / (self.end_time_us * cores as f64)
    }
}
