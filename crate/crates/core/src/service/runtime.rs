//! Per-instance runtime state and the stage/thread/core handlers.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use super::{ConnectionPool, PathSelector};
use crate::config::{ExecModel, InstanceModel, MachineModel, PathOp, ServiceModel};
use crate::engine::sim::{rng_stream, Simulation, Stream};
use crate::engine::{EngineError, EventKind};
use crate::path::JobId;
use crate::queueing::{ConnectionGate, StageQueue};

pub(crate) struct InstanceState {
    pub queues: Vec<StageQueue<JobId>>,
    pub gate: ConnectionGate<JobId>,
    pub running: u32,
    pub blocked_threads: u32,
    pub waiting_for_core: bool,
    pub exec_rng: ChaCha8Rng,
    pub service_rng: ChaCha8Rng,
    pub selector: PathSelector,
    /// (peer instance, pool)
    pub pools: Vec<(usize, ConnectionPool<JobId>)>,
    pub busy_us: f64,
    pub invocations: u64,
    pub measured_jobs: u64,
    pub waited_jobs: u64,
    pub max_running: u32,
}

impl InstanceState {
    pub fn new(service: &ServiceModel, inst: &InstanceModel, seed: u64, index: usize) -> Self {
        InstanceState {
            queues: service
                .stages
                .iter()
                .map(|s| StageQueue::new(s.queue_type, s.batch_bound))
                .collect(),
            gate: ConnectionGate::default(),
            running: 0,
            blocked_threads: 0,
            waiting_for_core: false,
            exec_rng: rng_stream(seed, Stream::ExecPath, index),
            service_rng: rng_stream(seed, Stream::Service, index),
            selector: PathSelector::new(service),
            pools: inst
                .pools
                .iter()
                .map(|&(peer, n)| (peer, ConnectionPool::new(n)))
                .collect(),
            busy_us: 0.0,
            invocations: 0,
            measured_jobs: 0,
            waited_jobs: 0,
            max_running: 0,
        }
    }

    pub fn has_work(&self) -> bool {
        self.queues.iter().any(|q| !q.is_empty())
    }

    /// Concurrent invocations this instance may run, before core limits.
    pub fn thread_cap(&self, model: &InstanceModel) -> u32 {
        match model.exec_model {
            ExecModel::Simple => u32::MAX,
            ExecModel::MultiThreaded => model.threads.saturating_sub(self.blocked_threads),
        }
    }

    pub fn pool_index(&self, peer: usize) -> Option<usize> {
        self.pools.iter().position(|(p, _)| *p == peer)
    }
}

pub(crate) struct MachineState {
    pub cores: u32,
    pub running: u32,
    /// Instances with runnable work waiting for a core, in arrival order.
    pub waiters: VecDeque<usize>,
}

impl MachineState {
    pub fn new(m: &MachineModel) -> Self {
        MachineState {
            cores: m.cores,
            running: 0,
            waiters: VecDeque::new(),
        }
    }

    pub fn free_cores(&self) -> u32 {
        self.cores - self.running
    }
}

pub(crate) struct Invocation {
    pub instance: usize,
    pub jobs: Vec<JobId>,
}

impl Simulation {
    /// Applies the node's enter ops, picks the execution path and queues the
    /// job at its first stage. The job has already cleared fan-in and the
    /// connection gate.
    pub(crate) fn admit(&mut self, job: JobId) -> Result<(), EngineError> {
        let (req_idx, node, inst, conn) = {
            let j = &self.jobs[job];
            (j.request, j.node, j.instance, j.conn)
        };
        let path = self.requests[req_idx].path;
        let node_model = &self.model.paths[path].nodes[node];
        let enter_ops = node_model.enter_ops.clone();
        for op in enter_ops {
            match op {
                PathOp::BlockRecvConnection => {
                    let token = self.requests[req_idx].token(node);
                    self.instances[inst].gate.block(conn, token);
                    self.requests[req_idx].blocked_conns.push((node, inst, conn));
                }
                PathOp::BlockThread => {
                    self.instances[inst].blocked_threads += 1;
                    self.requests[req_idx].blocked_threads.push((node, inst));
                }
                PathOp::UnblockConnection | PathOp::UnblockThread => {
                    let work = self.collect_unblocks(req_idx, node, &[op])?;
                    self.apply_unblocks(work)?;
                }
            }
        }

        let path_model = &self.model.paths[path];
        if node == path_model.entry {
            self.requests[req_idx].outstanding = true;
            self.outstanding += 1;
            self.counters.max_outstanding = self.counters.max_outstanding.max(self.outstanding);
        }
        let node_model = &path_model.nodes[node];
        let svc = self.model.instances[inst].service;
        let service = &self.model.services[svc];
        let exec_path = match node_model.exec_path {
            Some(p) => p,
            None => {
                let st = &mut self.instances[inst];
                st.selector.select(&mut st.exec_rng)
            }
        };
        let ep = &service.exec_paths[exec_path];
        let (start, end) = node_model
            .stage_range(service, ep)
            .expect("stage ranges are checked at load time");
        let name_id = ep.name_id;

        // Fan-in check: every parent must have completed already.
        let early = self.parents[path][node]
            .iter()
            .any(|&p| !(self.requests[req_idx].node_done[p] <= self.now));
        let req = &mut self.requests[req_idx];
        if early {
            self.counters.fanin_violations += 1;
        }
        req.node_runs[node] += 1;
        if req.node_runs[node] > 1 {
            self.counters.duplicate_executions += 1;
        }
        if name_id < 64 {
            req.touched |= 1 << name_id;
        }
        self.counters.node_executions += 1;

        let j = &mut self.jobs[job];
        j.exec_path = exec_path;
        j.pos = start;
        j.end = end;
        self.enqueue_stage(job);
        self.try_dispatch(inst, false)
    }

    fn enqueue_stage(&mut self, job: JobId) {
        let now = self.now;
        let j = &mut self.jobs[job];
        j.enqueued_us = now;
        let inst = j.instance;
        let svc = self.model.instances[inst].service;
        let stage = self.model.services[svc].exec_paths[j.exec_path].stages[j.pos];
        let conn = j.conn;
        self.instances[inst].queues[stage]
            .enqueue(job, Some(conn))
            .expect("connection id always supplied");
    }

    /// Starts invocations while the instance has queued work, free thread
    /// capacity and free cores. If cores run out it joins the machine's
    /// waiter list.
    pub(crate) fn try_dispatch(&mut self, inst: usize, mut resumed: bool) -> Result<(), EngineError> {
        let machine = self.model.instances[inst].machine;
        loop {
            let st = &self.instances[inst];
            if !st.has_work() || st.running >= st.thread_cap(&self.model.instances[inst]) {
                return Ok(());
            }
            if self.machines[machine].free_cores() == 0 {
                if !st.waiting_for_core {
                    self.instances[inst].waiting_for_core = true;
                    self.machines[machine].waiters.push_back(inst);
                }
                return Ok(());
            }
            self.start_invocation(inst, resumed)?;
            resumed = false;
        }
    }

    fn start_invocation(&mut self, inst: usize, resumed: bool) -> Result<(), EngineError> {
        let model = &self.model.instances[inst];
        let machine = model.machine;
        let svc = model.service;
        // Run-to-completion: the deepest stage with work goes first.
        let st = &mut self.instances[inst];
        let stage = (0..st.queues.len())
            .rev()
            .find(|&s| !st.queues[s].is_empty())
            .expect("caller checked for work");
        let mut batch = Vec::new();
        st.queues[stage]
            .dequeue_batch_into(&mut batch)
            .expect("stage is non-empty");

        for &job in &batch {
            let enq = self.jobs[job].enqueued_us;
            if enq >= self.warmup_us {
                st.measured_jobs += 1;
                if self.now > enq {
                    st.waited_jobs += 1;
                }
            }
        }
        let exec_path = self.jobs[batch[0]].exec_path;
        let mut dur = self.procs[svc].sample(
            stage,
            exec_path,
            self.dvfs.freq(inst),
            self.dvfs.nominal(inst),
            batch.len(),
            self.request_bytes * batch.len() as u64,
            &mut st.service_rng,
        )?;
        if resumed && model.exec_model == ExecModel::MultiThreaded {
            dur += model.context_switch_us;
        }
        st.running += 1;
        st.max_running = st.max_running.max(st.running);
        st.busy_us += dur;
        st.invocations += 1;
        let m = &mut self.machines[machine];
        m.running += 1;
        if m.running > m.cores {
            self.counters.core_violations += 1;
        }
        let invocation = self.invocations.insert(Invocation {
            instance: inst,
            jobs: batch,
        });
        self.schedule(
            self.now + dur,
            EventKind::StageBatchComplete {
                instance: inst as u32,
                invocation: invocation as u32,
            },
        )
    }

    /// Advances every job of the finished invocation, frees its core and
    /// schedules a wakeup at the same instant for whoever can use it.
    pub(crate) fn complete_stage_batch(&mut self, inst: usize, invocation: usize) -> Result<(), EngineError> {
        let inv = self.invocations.remove(invocation);
        debug_assert_eq!(inv.instance, inst);
        let machine = self.model.instances[inst].machine;
        self.instances[inst].running -= 1;
        self.machines[machine].running -= 1;
        for job in inv.jobs {
            let j = &mut self.jobs[job];
            j.pos += 1;
            if j.pos > j.end {
                self.on_node_complete(job)?;
            } else {
                self.enqueue_stage(job);
            }
        }
        if self.instances[inst].has_work() || !self.machines[machine].waiters.is_empty() {
            self.schedule(self.now, EventKind::ThreadWakeup { instance: inst as u32 })?;
        }
        Ok(())
    }

    pub(crate) fn on_thread_wakeup(&mut self, inst: usize) -> Result<(), EngineError> {
        let machine = self.model.instances[inst].machine;
        while self.machines[machine].free_cores() > 0 {
            let Some(w) = self.machines[machine].waiters.pop_front() else {
                break;
            };
            self.instances[w].waiting_for_core = false;
            self.try_dispatch(w, true)?;
        }
        self.try_dispatch(inst, false)
    }
}
