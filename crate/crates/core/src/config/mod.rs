//! Scenario loading, validation and the built-in topologies.
//!
//! A scenario directory holds `service.json`, `graph.json`, `path.json`,
//! `machines.json` and `client.json`, plus any histogram or trace CSVs they
//! reference by relative path.

mod builtin;
mod histogram;
mod model;
mod spec;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{
    generate_builtin_scenario, power_two_tier, single_stage_service, two_tier_single_connection, unbatched,
    BuiltinKind, SlowMode, DVFS_LEVELS,
};
pub use histogram::{ghz_to_mhz, validate_histograms, HistogramKey, HistogramTable, Pdf};
pub use model::{
    ExecPathModel, InstanceModel, MachineModel, Model, NodeModel, NodeTarget, PathModel, ProcEntry, ServiceModel,
    StageModel,
};
pub use spec::*;

pub const SERVICE_FILE: &str = "service.json";
pub const GRAPH_FILE: &str = "graph.json";
pub const PATH_FILE: &str = "path.json";
pub const MACHINES_FILE: &str = "machines.json";
pub const CLIENT_FILE: &str = "client.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("schema error in {file}: {message}")]
    Schema { file: String, message: String },
    #[error("unresolved reference `{id}` ({context})")]
    DanglingReference { id: String, context: String },
    #[error("probability error: {0}")]
    Probability(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub(crate) fn schema(file: &str, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            file: file.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn dangling(id: impl Into<String>, context: impl Into<String>) -> Self {
        ConfigError::DanglingReference {
            id: id.into(),
            context: context.into(),
        }
    }
}

/// A complete, validated scenario. Construct it through [`Scenario::new`],
/// [`load_scenario`] or [`generate_builtin_scenario`]; all three run the
/// same cross-reference checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub services: Vec<ServiceSpec>,
    pub machines: Vec<MachineSpec>,
    pub instances: Vec<InstanceSpec>,
    pub paths: Vec<InterPathSpec>,
    pub client: ClientSpec,
    pub histograms: HistogramTable,
    /// Trace contents for `trace_file` load patterns, keyed by file name.
    pub traces: BTreeMap<String, Vec<(f64, f64)>>,
}

impl Scenario {
    pub fn new(
        services: Vec<ServiceSpec>,
        machines: Vec<MachineSpec>,
        instances: Vec<InstanceSpec>,
        paths: Vec<InterPathSpec>,
        client: ClientSpec,
    ) -> Result<Self, ConfigError> {
        Self::with_data(
            services,
            machines,
            instances,
            paths,
            client,
            HistogramTable::new(),
            BTreeMap::new(),
        )
    }

    pub fn with_data(
        services: Vec<ServiceSpec>,
        machines: Vec<MachineSpec>,
        instances: Vec<InstanceSpec>,
        paths: Vec<InterPathSpec>,
        client: ClientSpec,
        histograms: HistogramTable,
        traces: BTreeMap<String, Vec<(f64, f64)>>,
    ) -> Result<Self, ConfigError> {
        let scenario = Scenario {
            services,
            machines,
            instances,
            paths,
            client,
            histograms,
            traces,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Re-runs every invariant check. Useful after mutating a scenario in place.
    pub fn validate(&self) -> Result<(), ConfigError> {
        Model::resolve(self).map(|_| ())
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        Model::resolve(self)
    }

    pub fn service(&self, name: &str) -> Option<&ServiceSpec> {
        self.services.iter().find(|s| s.service_name == name)
    }

    pub fn instance(&self, name: &str) -> Option<&InstanceSpec> {
        self.instances.iter().find(|i| i.instance_name == name)
    }

    /// Piecewise-constant `(time_s, qps)` plateaus of the client load.
    pub fn load_points(&self) -> Vec<(f64, f64)> {
        match &self.client.load_pattern {
            LoadPatternSpec::Constant { qps } => vec![(0.0, *qps)],
            LoadPatternSpec::Trace { points } => points.clone(),
            LoadPatternSpec::TraceFile { file } => self.traces.get(file).cloned().unwrap_or_default(),
        }
    }

    /// Replaces the load pattern with a constant rate.
    pub fn set_constant_rate(&mut self, qps: f64) {
        self.client.load_pattern = LoadPatternSpec::Constant { qps };
    }
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, ConfigError> {
    let path = dir.join(name);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ConfigError::MissingFile(path)),
        Err(source) => return Err(ConfigError::Io { path, source }),
    };
    serde_json::from_str(&text).map_err(|e| ConfigError::schema(name, e.to_string()))
}

/// `service.json` may hold a single service object or an array of them.
fn read_services(dir: &Path) -> Result<Vec<ServiceSpec>, ConfigError> {
    let path = dir.join(SERVICE_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ConfigError::MissingFile(path)),
        Err(source) => return Err(ConfigError::Io { path, source }),
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ConfigError::schema(SERVICE_FILE, e.to_string()))?;
    // Decode through the concrete type so field-level messages survive.
    let services = if value.is_array() {
        serde_json::from_value::<Vec<ServiceSpec>>(value)
    } else {
        serde_json::from_value::<ServiceSpec>(value).map(|s| vec![s])
    };
    services.map_err(|e| ConfigError::schema(SERVICE_FILE, e.to_string()))
}

fn open_relative(dir: &Path, rel: &str) -> Result<fs::File, ConfigError> {
    let path = dir.join(rel);
    fs::File::open(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ConfigError::MissingFile(path)
        } else {
            ConfigError::Io { path, source: e }
        }
    })
}

/// Loads, cross-links and validates the scenario stored in `dir`.
pub fn load_scenario(dir: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    let dir = dir.as_ref();
    // Check presence of every input before parsing so the first missing
    // file is the one reported.
    for name in [SERVICE_FILE, GRAPH_FILE, PATH_FILE, MACHINES_FILE, CLIENT_FILE] {
        if !dir.join(name).is_file() {
            return Err(ConfigError::MissingFile(dir.join(name)));
        }
    }
    let services = read_services(dir)?;
    let instances: Vec<InstanceSpec> = read_json(dir, GRAPH_FILE)?;
    let paths: Vec<InterPathSpec> = read_json(dir, PATH_FILE)?;
    let machines: Vec<MachineSpec> = read_json(dir, MACHINES_FILE)?;
    let client: ClientSpec = read_json(dir, CLIENT_FILE)?;

    let mut histograms = HistogramTable::new();
    for svc in &services {
        for proc_spec in &svc.processing {
            if let DistSpec::Histogram { file } = &proc_spec.dist {
                let pdf = Pdf::read_csv(open_relative(dir, file)?, file)?;
                let key = HistogramKey::new(
                    &svc.service_name,
                    proc_spec.stage_id,
                    proc_spec.path_id,
                    proc_spec.freq_ghz,
                );
                histograms.insert(key, pdf);
            }
        }
    }

    let mut traces = BTreeMap::new();
    if let LoadPatternSpec::TraceFile { file } = &client.load_pattern {
        let pattern = crate::workload::load_trace(dir.join(file)).map_err(|e| match e {
            crate::workload::WorkloadError::Io(source) => ConfigError::Io {
                path: dir.join(file),
                source,
            },
            other => ConfigError::schema(file, other.to_string()),
        })?;
        traces.insert(file.clone(), pattern.points().to_vec());
    }

    Scenario::with_data(services, machines, instances, paths, client, histograms, traces)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), ConfigError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("scenario types serialize");
    fs::write(&path, text + "\n").map_err(|source| ConfigError::Io { path, source })
}

/// Writes the scenario as a directory that [`load_scenario`] reparses to an
/// equal value.
pub fn save_scenario(scenario: &Scenario, dir: impl AsRef<Path>) -> Result<(), ConfigError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ConfigError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_json(dir, SERVICE_FILE, &scenario.services)?;
    write_json(dir, GRAPH_FILE, &scenario.instances)?;
    write_json(dir, PATH_FILE, &scenario.paths)?;
    write_json(dir, MACHINES_FILE, &scenario.machines)?;
    write_json(dir, CLIENT_FILE, &scenario.client)?;

    for svc in &scenario.services {
        for proc_spec in &svc.processing {
            if let DistSpec::Histogram { file } = &proc_spec.dist {
                let key = HistogramKey::new(
                    &svc.service_name,
                    proc_spec.stage_id,
                    proc_spec.path_id,
                    proc_spec.freq_ghz,
                );
                let pdf = scenario
                    .histograms
                    .get(&key)
                    .ok_or_else(|| ConfigError::dangling(key.to_string(), "histogram table"))?;
                let path = dir.join(file);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(io(parent))?;
                }
                let f = fs::File::create(&path).map_err(io(&path))?;
                pdf.write_csv(f).map_err(io(&path))?;
            }
        }
    }
    for (file, points) in &scenario.traces {
        let path = dir.join(file);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io(parent))?;
        }
        let f = fs::File::create(&path).map_err(io(&path))?;
        crate::workload::write_trace(points, f).map_err(io(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MEMCACHED_JSON: &str = r#"{"service_name": "memcached",
      "stages": [{
          "stage_name":"epoll", "stage_id":0,
          "queue_type":"epoll", "batching":true,
          "queue_parameter":[null, 8]}, {
          "stage_name":"socket_read", "stage_id":1,
          "queue_type":"socket", "batching":true,
          "queue_parameter":[8] }, {
          "stage_name":"memcached_processing",
          "stage_id":2, "queue_type":"single",
          "batching":false, "queue_parameter":null}, {
          "stage_name":"socket_send", "stage_id":3,
          "queue_type":"single", "batching":false,
          "queue_parameter":null}],
      "paths": [{
          "path_id":0, "path_name":"memcached_read",
          "stages":[0, 1, 2, 3]}, {
          "path_id":1, "path_name":"memcached_write",
          "stages":[0, 1, 2, 3]}],
      "processing": [
          {"stage_id":0, "dist":{"type":"deterministic","value_us":2.0}},
          {"stage_id":1, "dist":{"type":"deterministic","value_us":3.0}},
          {"stage_id":2, "path_id":0, "dist":{"type":"exponential","mean_us":20.0}},
          {"stage_id":2, "path_id":1, "dist":{"type":"exponential","mean_us":40.0}},
          {"stage_id":3, "dist":{"type":"histogram","file":"hist/send.csv"}}]}"#;

    fn write_memcached_dir(dir: &Path) {
        fs::create_dir_all(dir.join("hist")).unwrap();
        fs::write(dir.join(SERVICE_FILE), MEMCACHED_JSON).unwrap();
        fs::write(dir.join("hist/send.csv"), "upper_bound_us,probability\n5,0.5\n10,0.5\n").unwrap();
        fs::write(
            dir.join(GRAPH_FILE),
            r#"[{"instance_name":"memcached_0","service_name":"memcached","machine_id":"m0","threads":2,"exec_model":"multi_threaded"}]"#,
        )
        .unwrap();
        fs::write(
            dir.join(MACHINES_FILE),
            r#"[{"machine_id":"m0","cores":4,"network_cores":1,"dvfs_levels":[1.2,2.6]}]"#,
        )
        .unwrap();
        fs::write(
            dir.join(PATH_FILE),
            r#"[{"path_id":0,"probability":1.0,"entry":0,"nodes":[
                {"node_id":0,"service":"memcached_0","execution_path":0,"childs":[1]},
                {"node_id":1,"service":"client","childs":[]}]}]"#,
        )
        .unwrap();
        fs::write(
            dir.join(CLIENT_FILE),
            r#"{"load_pattern":{"type":"constant","qps":1000},"interarrival":"exponential",
                "request_size_bytes":612,"duration_s":1.0,"rng_seed":1}"#,
        )
        .unwrap();
    }

    #[test]
    fn memcached_listing_loads() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        let s = load_scenario(tmp.path()).unwrap();
        let svc = s.service("memcached").unwrap();
        assert_eq!(svc.stages.len(), 4);
        assert_eq!(svc.paths.len(), 2);
        assert_eq!(svc.stages[0].batch_bound(), Some(8));
        assert_eq!(svc.stages[1].batch_bound(), Some(8));
        assert_eq!(svc.stages[2].batch_bound(), None);
        assert_eq!(s.histograms.len(), 1);
        assert_eq!(s.client.connections, 320);
        assert!((s.client.warmup() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn save_then_load_is_identity() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        let s = load_scenario(tmp.path()).unwrap();
        let out = tmp.path().join("copy");
        save_scenario(&s, &out).unwrap();
        assert_eq!(load_scenario(&out).unwrap(), s);
    }

    #[test]
    fn missing_graph_names_file() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        fs::remove_file(tmp.path().join(GRAPH_FILE)).unwrap();
        match load_scenario(tmp.path()) {
            Err(ConfigError::MissingFile(p)) => assert!(p.ends_with(GRAPH_FILE)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_histogram_file_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        fs::remove_file(tmp.path().join("hist/send.csv")).unwrap();
        assert!(matches!(load_scenario(tmp.path()), Err(ConfigError::MissingFile(_))));
    }

    #[test]
    fn zero_paths_is_schema_error() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        let text = fs::read_to_string(tmp.path().join(SERVICE_FILE)).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["paths"] = serde_json::json!([]);
        fs::write(tmp.path().join(SERVICE_FILE), v.to_string()).unwrap();
        assert!(matches!(load_scenario(tmp.path()), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn unknown_node_instance_is_dangling() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        fs::write(
            tmp.path().join(PATH_FILE),
            r#"[{"path_id":0,"probability":1.0,"entry":0,"nodes":[
                {"node_id":0,"service":"Nginx_9","execution_path":0,"childs":[1]},
                {"node_id":1,"service":"client","childs":[]}]}]"#,
        )
        .unwrap();
        match load_scenario(tmp.path()) {
            Err(ConfigError::DanglingReference { id, .. }) => assert_eq!(id, "Nginx_9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn misspelled_op_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        fs::write(
            tmp.path().join(PATH_FILE),
            r#"[{"path_id":0,"probability":1.0,"entry":0,"nodes":[
                {"node_id":0,"service":"memcached_0","execution_path":0,"childs":[1],"enter_op":["block_recv_conection"]},
                {"node_id":1,"service":"client","childs":[]}]}]"#,
        )
        .unwrap();
        assert!(matches!(load_scenario(tmp.path()), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn unknown_field_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        fs::write(
            tmp.path().join(MACHINES_FILE),
            r#"[{"machine_id":"m0","cores":4,"network_cores":1,"dvfs_level":[1.2]}]"#,
        )
        .unwrap();
        match load_scenario(tmp.path()) {
            Err(ConfigError::Schema { file, message }) => {
                assert_eq!(file, MACHINES_FILE);
                assert!(message.contains("dvfs_level"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_path_mass_is_probability_error() {
        let tmp = tempfile::tempdir().unwrap();
        write_memcached_dir(tmp.path());
        fs::write(
            tmp.path().join(PATH_FILE),
            r#"[{"path_id":0,"probability":0.6,"entry":0,"nodes":[
                {"node_id":0,"service":"memcached_0","execution_path":0,"childs":[1]},
                {"node_id":1,"service":"client","childs":[]}]}]"#,
        )
        .unwrap();
        assert!(matches!(load_scenario(tmp.path()), Err(ConfigError::Probability(_))));
    }
}
