//! Per-machine receive processing on dedicated interrupt cores.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};

use crate::config::MachineModel;
use crate::engine::sim::Simulation;
use crate::engine::{EngineError, EventKind};
use crate::path::JobId;

/// Receive-side network stack of one machine: `cores` servers in front of a
/// FIFO. Each received message costs `Exp(rx_mean) + per_byte * bytes`.
pub(crate) struct NetworkProcessor {
    cores: u32,
    busy: u32,
    fifo: VecDeque<JobId>,
    rx_mean_us: f64,
    per_byte_us: f64,
    rng: ChaCha8Rng,
    pub busy_us: f64,
    pub rx_jobs: u64,
}

impl NetworkProcessor {
    pub fn new(m: &MachineModel, rng: ChaCha8Rng) -> Self {
        NetworkProcessor {
            cores: m.network_cores,
            busy: 0,
            fifo: VecDeque::new(),
            rx_mean_us: m.rx_mean_us,
            per_byte_us: m.rx_per_byte_us,
            rng,
            busy_us: 0.0,
            rx_jobs: 0,
        }
    }

    /// No interrupt cores, or zero receive cost, means hops are free.
    pub fn enabled(&self) -> bool {
        self.cores > 0 && (self.rx_mean_us > 0.0 || self.per_byte_us > 0.0)
    }

    fn sample<R: Rng + ?Sized>(rng: &mut R, mean: f64, per_byte: f64, bytes: u64) -> f64 {
        let e: f64 = Exp1.sample(rng);
        e * mean + per_byte * bytes as f64
    }
}

impl Simulation {
    /// Sends a job toward its instance. Same-machine hops (and machines with
    /// networking disabled) arrive at the current instant; the rest queue at
    /// the destination's network processor.
    pub(crate) fn deliver(&mut self, job: JobId) -> Result<(), EngineError> {
        let j = &self.jobs[job];
        let dst = self.model.instances[j.instance].machine;
        let src = j.sender.map(|s| self.model.instances[s].machine);
        if src == Some(dst) || !self.nets[dst].enabled() {
            return self.schedule(self.now, EventKind::JobArrival { job: job as u32 });
        }
        self.counters.net_delivered += 1;
        let net = &mut self.nets[dst];
        if net.busy < net.cores {
            self.start_rx(dst, job)
        } else {
            net.fifo.push_back(job);
            Ok(())
        }
    }

    fn start_rx(&mut self, machine: usize, job: JobId) -> Result<(), EngineError> {
        let bytes = self.request_bytes;
        let net = &mut self.nets[machine];
        net.busy += 1;
        let dur = NetworkProcessor::sample(&mut net.rng, net.rx_mean_us, net.per_byte_us, bytes);
        net.busy_us += dur;
        self.schedule(
            self.now + dur,
            EventKind::NetworkRxComplete {
                machine: machine as u32,
                job: job as u32,
            },
        )
    }

    pub(crate) fn on_rx_complete(&mut self, machine: usize, job: JobId) -> Result<(), EngineError> {
        let net = &mut self.nets[machine];
        net.busy -= 1;
        net.rx_jobs += 1;
        self.counters.net_completed += 1;
        if let Some(next) = net.fifo.pop_front() {
            self.start_rx(machine, next)?;
        }
        self.on_job_arrival(job)
    }
}
