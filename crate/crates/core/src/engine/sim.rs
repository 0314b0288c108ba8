//! State of one simulation run. Event handlers live next to the model they
//! drive (`service::runtime`, `network`, `path`, `power`); this file owns the
//! loop, the RNG streams and report assembly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slab::Slab;

use super::report::{Counters, InstanceReport, NetworkReport, RunReport};
use super::{EngineError, EventKind, EventQueue, RunOptions, StopCondition};
use crate::config::{Model, Scenario};
use crate::network::NetworkProcessor;
use crate::path::{Job, RequestState};
use crate::power::{DvfsState, PmRuntime};
use crate::service::runtime::{InstanceState, Invocation, MachineState};
use crate::service::ProcessingTimeModel;
use crate::stats::LatencyRecorder;
use crate::workload::{ArrivalProcess, LoadPattern, WorkloadError};

/// Stream roles; combined with an index so every (role, instance) pair
/// draws from its own substream.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Arrivals = 1,
    Routing = 2,
    ExecPath = 3,
    Service = 4,
    Network = 5,
    Power = 6,
}

pub(crate) fn rng_stream(seed: u64, role: Stream, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((role as u64) << 40) | index as u64);
    rng
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub(crate) struct Simulation {
    pub(crate) model: Model,
    pub(crate) opts: RunOptions,
    pub(crate) events: EventQueue,
    pub(crate) now: f64,
    pattern: LoadPattern,
    arrivals: ArrivalProcess,
    arrival_rng: ChaCha8Rng,
    pub(crate) route_rng: ChaCha8Rng,
    /// Cumulative inter-service path probabilities.
    pub(crate) path_cdf: Vec<f64>,
    /// Parents of every node, per path.
    pub(crate) parents: Vec<Vec<Vec<usize>>>,
    pub(crate) rr_cursor: Vec<Vec<usize>>,
    pub(crate) instances: Vec<InstanceState>,
    pub(crate) procs: Vec<ProcessingTimeModel>,
    pub(crate) machines: Vec<MachineState>,
    pub(crate) nets: Vec<NetworkProcessor>,
    pub(crate) dvfs: DvfsState,
    pub(crate) jobs: Slab<Job>,
    pub(crate) requests: Slab<RequestState>,
    pub(crate) invocations: Slab<Invocation>,
    pub(crate) next_request_id: u64,
    pub(crate) client_connections: u32,
    pub(crate) request_bytes: u64,
    pub(crate) warmup_us: f64,
    pub(crate) duration_us: f64,
    pub(crate) recorder: LatencyRecorder,
    pub(crate) counters: Counters,
    pub(crate) outstanding: u64,
    pub(crate) completed_in_window: u64,
    pub(crate) exec_path_touches: Vec<u64>,
    pub(crate) pm: Option<PmRuntime>,
    digest: u64,
    processed: u64,
    trace: Vec<(f64, u64, &'static str)>,
}

impl Simulation {
    pub(crate) fn new(scenario: &Scenario, opts: RunOptions) -> Result<Self, EngineError> {
        let model = scenario.model()?;
        let client = &scenario.client;
        let seed = client.rng_seed;
        let pattern = LoadPattern::trace(scenario.load_points())
            .map_err(|e| crate::config::ConfigError::schema(crate::config::CLIENT_FILE, e.to_string()))?;
        let arrivals = ArrivalProcess::new(pattern.clone(), client.interarrival, client.duration_s);

        let mut acc = 0.0;
        let path_cdf = model
            .paths
            .iter()
            .map(|p| {
                acc += p.probability;
                acc
            })
            .collect();
        let parents = model
            .paths
            .iter()
            .map(|p| {
                let mut par = vec![Vec::new(); p.nodes.len()];
                for (i, n) in p.nodes.iter().enumerate() {
                    for &c in &n.children {
                        par[c].push(i);
                    }
                }
                par
            })
            .collect();
        let rr_cursor = model.paths.iter().map(|p| vec![0; p.nodes.len()]).collect();

        let instances = model
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| InstanceState::new(&model.services[inst.service], inst, seed, i))
            .collect();
        let procs = model.services.iter().map(ProcessingTimeModel::new).collect();
        let machines = model.machines.iter().map(MachineState::new).collect();
        let nets = model
            .machines
            .iter()
            .enumerate()
            .map(|(i, m)| NetworkProcessor::new(m, rng_stream(seed, Stream::Network, i)))
            .collect();
        let dvfs = DvfsState::new(&model);
        let pm = match &client.power {
            Some(spec) => Some(PmRuntime::new(
                spec,
                &model,
                opts.power,
                rng_stream(seed, Stream::Power, 0),
            )?),
            None => None,
        };
        let recorder = LatencyRecorder::new(model.instances.len(), opts.record_tiers);
        let exec_path_touches = vec![0; model.exec_path_names.len()];

        let mut sim = Simulation {
            opts,
            events: EventQueue::new(),
            now: 0.0,
            pattern,
            arrivals,
            arrival_rng: rng_stream(seed, Stream::Arrivals, 0),
            route_rng: rng_stream(seed, Stream::Routing, 0),
            path_cdf,
            parents,
            rr_cursor,
            instances,
            procs,
            machines,
            nets,
            dvfs,
            jobs: Slab::new(),
            requests: Slab::new(),
            invocations: Slab::new(),
            next_request_id: 0,
            client_connections: client.connections,
            request_bytes: client.request_size_bytes,
            warmup_us: client.warmup() * 1e6,
            duration_us: client.duration_s * 1e6,
            recorder,
            counters: Counters::default(),
            outstanding: 0,
            completed_in_window: 0,
            exec_path_touches,
            pm,
            digest: FNV_OFFSET,
            processed: 0,
            trace: Vec::new(),
            model,
        };
        if !sim.model.paths.is_empty() {
            sim.schedule_next_arrival()?;
        }
        if let Some(pm) = &sim.pm {
            let first = pm.interval_us();
            if first <= sim.duration_us {
                sim.events.schedule(first, EventKind::PmDecisionTick)?;
            }
        }
        Ok(sim)
    }

    pub(crate) fn schedule(&mut self, at_us: f64, kind: EventKind) -> Result<(), EngineError> {
        self.events.schedule(at_us, kind).map(|_| ())
    }

    fn schedule_next_arrival(&mut self) -> Result<(), EngineError> {
        match self.arrivals.next_arrival(&mut self.arrival_rng) {
            Ok(t) => self.schedule(t, EventKind::ClientArrivalTick),
            Err(WorkloadError::EndOfTrace) => Ok(()),
            Err(e) => unreachable!("arrival generation cannot fail otherwise: {e}"),
        }
    }

    pub(crate) fn run(&mut self) -> Result<(), EngineError> {
        let horizon_us = match self.opts.stop {
            StopCondition::Drain => f64::INFINITY,
            StopCondition::Horizon(s) => s * 1e6,
        };
        while let Some(t) = self.events.peek_time() {
            if t > horizon_us {
                break;
            }
            let ev = self.events.pop().expect("peeked");
            self.processed += 1;
            if self.processed > self.opts.max_events {
                return Err(EngineError::Livelock(self.opts.max_events));
            }
            self.now = ev.timestamp_us;
            let mut h = fnv1a(self.digest, &ev.timestamp_us.to_bits().to_le_bytes());
            h = fnv1a(h, &ev.sequence.to_le_bytes());
            self.digest = fnv1a(h, &[ev.kind.code()]);
            if self.opts.record_trace {
                self.trace.push((ev.timestamp_us, ev.sequence, ev.kind.name()));
            }
            self.dispatch(ev.kind)?;
        }
        let in_flight = self.requests.len() as u64;
        let c = &mut self.counters;
        c.requests_in_flight = in_flight;
        if c.requests_injected != c.requests_completed + in_flight {
            return Err(EngineError::Conservation {
                injected: c.requests_injected,
                completed: c.requests_completed,
                in_flight,
            });
        }
        Ok(())
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<(), EngineError> {
        match kind {
            EventKind::ClientArrivalTick => {
                self.start_request()?;
                self.schedule_next_arrival()
            }
            EventKind::JobArrival { job } => self.on_job_arrival(job as usize),
            EventKind::NetworkRxComplete { machine, job } => self.on_rx_complete(machine as usize, job as usize),
            EventKind::StageBatchComplete { instance, invocation } => {
                self.complete_stage_batch(instance as usize, invocation as usize)
            }
            EventKind::ThreadWakeup { instance } => self.on_thread_wakeup(instance as usize),
            EventKind::DvfsChange { instance, level } => {
                self.on_dvfs_change(instance as usize, level as usize);
                Ok(())
            }
            EventKind::PmDecisionTick => self.on_pm_tick(),
        }
    }

    pub(crate) fn into_report(self) -> RunReport {
        let warmup_s = self.warmup_us / 1e6;
        let duration_s = self.duration_us / 1e6;
        let window = duration_s - warmup_s;
        let offered = (self.pattern.expected_arrivals(duration_s) - self.pattern.expected_arrivals(warmup_s)) / window;
        let instances = self
            .model
            .instances
            .iter()
            .zip(&self.instances)
            .enumerate()
            .map(|(i, (m, st))| InstanceReport {
                name: m.name.clone(),
                machine: self.model.machines[m.machine].name.clone(),
                busy_us: st.busy_us,
                invocations: st.invocations,
                measured_jobs: st.measured_jobs,
                waited_jobs: st.waited_jobs,
                max_running: st.max_running,
                final_freq_ghz: self.dvfs.freq(i),
            })
            .collect();
        let network = self
            .model
            .machines
            .iter()
            .zip(&self.nets)
            .map(|(m, n)| NetworkReport {
                machine: m.name.clone(),
                cores: m.network_cores,
                busy_us: n.busy_us,
                rx_jobs: n.rx_jobs,
            })
            .collect();
        let power = self.pm.map(|pm| pm.into_report(&self.model));
        RunReport {
            events: self.processed,
            digest: self.digest,
            trace: self.trace,
            end_time_us: self.now,
            warmup_s,
            duration_s,
            offered_qps: offered,
            achieved_qps: self.completed_in_window as f64 / window,
            latencies: self.recorder,
            instances,
            network,
            counters: self.counters,
            exec_path_names: self.model.exec_path_names.clone(),
            exec_path_touches: self.exec_path_touches,
            power,
        }
    }
}
