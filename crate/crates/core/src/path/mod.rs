//! Inter-service request paths: per-child job copies, fan-in
//! synchronization, enter/leave blocking ops and causal unblocking.

use rand::Rng;
use thiserror::Error;

use crate::config::{NodeTarget, PathOp};
use crate::engine::sim::Simulation;
use crate::engine::{EngineError, EventKind};
use crate::queueing::ConnId;

pub type JobId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("node {node} unblocks via causal node {causal}, which blocked nothing for this request")]
    DanglingCausalRef { node: u32, causal: u32 },
    #[error("request has not reached the client node")]
    IncompleteJob,
}

/// Connection identity: sender instance (0 for the client) in the high
/// half, connection slot in the low half.
pub fn conn_id(sender: Option<usize>, slot: u32) -> ConnId {
    ((sender.map_or(0, |s| s as u64 + 1)) << 32) | slot as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Lease {
    pub owner: usize,
    pub pool: usize,
    pub slot: u32,
}

/// One copy of a request travelling to one path node.
#[derive(Debug, Clone)]
pub(crate) struct Job {
    pub request: usize,
    pub node: usize,
    pub instance: usize,
    pub sender: Option<usize>,
    pub conn: ConnId,
    pub lease: Option<Lease>,
    pub passed_fanin: bool,
    pub exec_path: usize,
    pub pos: usize,
    pub end: usize,
    pub enqueued_us: f64,
}

/// Per-request context shared by all of its copies.
#[derive(Debug, Clone)]
pub struct RequestState {
    pub id: u64,
    pub path: usize,
    pub arrival_us: f64,
    /// Remaining parent completions per node.
    pub fan_in: Vec<u32>,
    /// Instance bound to each service for this request (sticky round-robin).
    pub service_binding: Vec<(usize, usize)>,
    /// Time the surviving copy reached each node's instance.
    pub node_start: Vec<f64>,
    pub node_done: Vec<f64>,
    pub node_runs: Vec<u32>,
    /// (blocking node, instance, connection)
    pub blocked_conns: Vec<(usize, usize, ConnId)>,
    /// (blocking node, instance)
    pub blocked_threads: Vec<(usize, usize)>,
    /// Accumulated sojourn per instance.
    pub tier_us: Vec<(usize, f64)>,
    /// Bit per execution-path name visited.
    pub touched: u64,
    pub outstanding: bool,
    pub done_us: Option<f64>,
}

impl RequestState {
    fn new(id: u64, path: usize, arrival_us: f64, parent_counts: impl Iterator<Item = u32>) -> Self {
        let fan_in: Vec<u32> = parent_counts.collect();
        let n = fan_in.len();
        RequestState {
            id,
            path,
            arrival_us,
            fan_in,
            service_binding: Vec::new(),
            node_start: vec![f64::NAN; n],
            node_done: vec![f64::NAN; n],
            node_runs: vec![0; n],
            blocked_conns: Vec::new(),
            blocked_threads: Vec::new(),
            tier_us: Vec::new(),
            touched: 0,
            outstanding: false,
            done_us: None,
        }
    }

    /// Blocking reference for `node` of this request.
    pub fn token(&self, node: usize) -> u64 {
        debug_assert!(node < 1 << 20);
        (self.id << 20) | node as u64
    }

    /// Terminal time minus root arrival.
    pub fn end_to_end_latency(&self) -> Result<f64, PathError> {
        self.done_us
            .map(|t| t - self.arrival_us)
            .ok_or(PathError::IncompleteJob)
    }

    fn add_tier(&mut self, inst: usize, us: f64) {
        match self.tier_us.iter_mut().find(|(i, _)| *i == inst) {
            Some(e) => e.1 += us,
            None => self.tier_us.push((inst, us)),
        }
    }
}

pub(crate) enum Unblock {
    Conn { inst: usize, conn: ConnId, token: u64 },
    Thread { inst: usize },
}

impl Simulation {
    /// Draws an inter-service path and sends a job to its entry node.
    pub(crate) fn start_request(&mut self) -> Result<(), EngineError> {
        let path = if self.path_cdf.len() == 1 {
            0
        } else {
            let u = self.route_rng.random::<f64>() * self.path_cdf.last().copied().unwrap_or(1.0);
            self.path_cdf
                .iter()
                .position(|&c| u < c)
                .unwrap_or(self.path_cdf.len() - 1)
        };
        let id = self.next_request_id;
        self.next_request_id += 1;
        let p = &self.model.paths[path];
        let entry = p.entry;
        let req = RequestState::new(id, path, self.now, p.nodes.iter().map(|n| n.parent_count));
        let req_idx = self.requests.insert(req);
        self.counters.requests_injected += 1;

        let inst = self.resolve_instance(req_idx, entry);
        let conn = conn_id(None, (id % self.client_connections as u64) as u32);
        self.requests[req_idx].node_start[entry] = self.now;
        let job = self.jobs.insert(Job {
            request: req_idx,
            node: entry,
            instance: inst,
            sender: None,
            conn,
            lease: None,
            passed_fanin: true,
            exec_path: 0,
            pos: 0,
            end: 0,
            enqueued_us: self.now,
        });
        self.deliver(job)
    }

    fn resolve_instance(&mut self, req_idx: usize, node: usize) -> usize {
        let path = self.requests[req_idx].path;
        let n = &self.model.paths[path].nodes[node];
        let NodeTarget::Instances(cands) = &n.target else {
            unreachable!("client node has no instance")
        };
        if cands.len() == 1 {
            return cands[0];
        }
        let svc = n.service.expect("instance nodes have a service");
        let req = &mut self.requests[req_idx];
        if let Some(&(_, inst)) = req.service_binding.iter().find(|(s, _)| *s == svc) {
            if cands.contains(&inst) {
                return inst;
            }
        }
        let cursor = &mut self.rr_cursor[path][node];
        let inst = cands[*cursor % cands.len()];
        *cursor += 1;
        req.service_binding.push((svc, inst));
        inst
    }

    /// A copy reached its node's instance (after any network receive).
    pub(crate) fn on_job_arrival(&mut self, job: JobId) -> Result<(), EngineError> {
        let j = &mut self.jobs[job];
        let (req_idx, node, inst, conn) = (j.request, j.node, j.instance, j.conn);
        if !j.passed_fanin {
            let req = &mut self.requests[req_idx];
            req.fan_in[node] -= 1;
            if req.fan_in[node] > 0 {
                self.counters.copies_merged += 1;
                let j = self.jobs.remove(job);
                if let Some(lease) = j.lease {
                    self.release_lease(lease)?;
                }
                return Ok(());
            }
            self.jobs[job].passed_fanin = true;
            req.node_start[node] = self.now;
            self.counters.copies_forwarded += 1;
        }
        match self.instances[inst].gate.offer(conn, job) {
            Ok(job) => self.admit(job),
            Err(_) => {
                self.counters.jobs_parked += 1;
                Ok(())
            }
        }
    }

    /// The job finished its node's stage range: record it, forward copies to
    /// every child, then apply leave ops.
    pub(crate) fn on_node_complete(&mut self, job: JobId) -> Result<(), EngineError> {
        let j = self.jobs.remove(job);
        let (req_idx, node, inst) = (j.request, j.node, j.instance);
        let now = self.now;
        let req = &mut self.requests[req_idx];
        req.node_done[node] = now;
        let sojourn = now - req.node_start[node];
        req.add_tier(inst, sojourn);
        if let Some(lease) = j.lease {
            self.release_lease(lease)?;
        }

        let path = self.requests[req_idx].path;
        let leave_ops = self.model.paths[path].nodes[node].leave_ops.clone();
        // Look up unblock targets before the request can complete and vanish.
        let unblocks = self.collect_unblocks(req_idx, node, &leave_ops)?;

        let client_node = self.model.paths[path].client_node;
        let children = self.model.paths[path].nodes[node].children.clone();
        let mut finished = false;
        for c in children {
            self.counters.copies_created += 1;
            if c == client_node {
                let req = &mut self.requests[req_idx];
                req.fan_in[c] -= 1;
                if req.fan_in[c] == 0 {
                    self.counters.copies_forwarded += 1;
                    finished = true;
                } else {
                    self.counters.copies_merged += 1;
                }
            } else {
                self.spawn_copy(req_idx, inst, c)?;
            }
        }
        if finished {
            self.finish_request(req_idx);
        }
        self.apply_unblocks(unblocks)
    }

    fn spawn_copy(&mut self, req_idx: usize, sender: usize, child: usize) -> Result<(), EngineError> {
        let target = self.resolve_instance(req_idx, child);
        let job = self.jobs.insert(Job {
            request: req_idx,
            node: child,
            instance: target,
            sender: Some(sender),
            conn: conn_id(Some(sender), 0),
            lease: None,
            passed_fanin: false,
            exec_path: 0,
            pos: 0,
            end: 0,
            enqueued_us: self.now,
        });
        if let Some(pool) = self.instances[sender].pool_index(target) {
            match self.instances[sender].pools[pool].1.acquire(job) {
                Some(slot) => {
                    let j = &mut self.jobs[job];
                    j.lease = Some(Lease {
                        owner: sender,
                        pool,
                        slot,
                    });
                    j.conn = conn_id(Some(sender), slot);
                }
                // Waits for a connection; delivered on release.
                None => return Ok(()),
            }
        }
        self.deliver(job)
    }

    fn release_lease(&mut self, lease: Lease) -> Result<(), EngineError> {
        let granted = self.instances[lease.owner].pools[lease.pool].1.release(lease.slot);
        if let Some((waiter, slot)) = granted {
            let j = &mut self.jobs[waiter];
            j.lease = Some(Lease { slot, ..lease });
            j.conn = conn_id(Some(lease.owner), slot);
            self.deliver(waiter)?;
        }
        Ok(())
    }

    pub(crate) fn collect_unblocks(
        &mut self,
        req_idx: usize,
        node: usize,
        ops: &[PathOp],
    ) -> Result<Vec<Unblock>, EngineError> {
        let path = self.requests[req_idx].path;
        let n = &self.model.paths[path].nodes[node];
        let mut out = Vec::new();
        for &op in ops.iter().filter(|op| op.is_unblock()) {
            let causal = n.causal.expect("unblock ops require causal_node_id");
            let dangling = || PathError::DanglingCausalRef {
                node: n.node_id,
                causal: self.model.paths[path].nodes[causal].node_id,
            };
            let req = &mut self.requests[req_idx];
            match op {
                PathOp::UnblockConnection => {
                    let token = req.token(causal);
                    let before = out.len();
                    req.blocked_conns.retain(|&(bn, inst, conn)| {
                        if bn == causal {
                            out.push(Unblock::Conn { inst, conn, token });
                            false
                        } else {
                            true
                        }
                    });
                    if out.len() == before {
                        return Err(dangling().into());
                    }
                }
                PathOp::UnblockThread => {
                    let pos = req
                        .blocked_threads
                        .iter()
                        .position(|&(bn, _)| bn == causal)
                        .ok_or_else(dangling)?;
                    let (_, inst) = req.blocked_threads.remove(pos);
                    out.push(Unblock::Thread { inst });
                }
                _ => unreachable!(),
            }
        }
        Ok(out)
    }

    pub(crate) fn apply_unblocks(&mut self, work: Vec<Unblock>) -> Result<(), EngineError> {
        for u in work {
            match u {
                Unblock::Conn { inst, conn, token } => {
                    self.instances[inst]
                        .gate
                        .unblock(conn, token)
                        .expect("registry and gate agree on the blocking token");
                    while let Some(parked) = self.instances[inst].gate.pop_parked(conn) {
                        self.admit(parked)?;
                    }
                }
                Unblock::Thread { inst } => {
                    self.instances[inst].blocked_threads -= 1;
                    self.schedule(self.now, EventKind::ThreadWakeup { instance: inst as u32 })?;
                }
            }
        }
        Ok(())
    }

    fn finish_request(&mut self, req_idx: usize) {
        let mut req = self.requests.remove(req_idx);
        req.done_us = Some(self.now);
        let e2e = req.end_to_end_latency().expect("just completed");
        self.counters.requests_completed += 1;
        if req.outstanding {
            self.outstanding -= 1;
        }
        if self.now >= self.warmup_us && self.now <= self.duration_us {
            self.completed_in_window += 1;
        }
        if req.arrival_us >= self.warmup_us {
            self.recorder.record_e2e(e2e);
            for &(inst, us) in &req.tier_us {
                self.recorder.record_tier(inst, us);
            }
            for (i, t) in self.exec_path_touches.iter_mut().enumerate().take(64) {
                if req.touched & (1 << i) != 0 {
                    *t += 1;
                }
            }
        }
        if let Some(pm) = &mut self.pm {
            pm.record(e2e, &req.tier_us);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_request_has_no_latency() {
        let mut r = RequestState::new(3, 0, 100.0, [0u32, 1].into_iter());
        assert_eq!(r.end_to_end_latency(), Err(PathError::IncompleteJob));
        r.done_us = Some(350.0);
        assert_eq!(r.end_to_end_latency(), Ok(250.0));
    }

    #[test]
    fn conn_ids_separate_senders() {
        assert_ne!(conn_id(None, 0), conn_id(Some(0), 0));
        assert_ne!(conn_id(Some(0), 1), conn_id(Some(1), 0));
        assert_eq!(conn_id(Some(2), 5) & 0xffff_ffff, 5);
    }

    #[test]
    fn tokens_are_per_request_and_node() {
        let a = RequestState::new(1, 0, 0.0, [0u32].into_iter());
        let b = RequestState::new(2, 0, 0.0, [0u32].into_iter());
        assert_ne!(a.token(0), b.token(0));
        assert_ne!(a.token(0), a.token(1));
    }
}
