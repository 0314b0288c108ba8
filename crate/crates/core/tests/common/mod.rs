//! Shared strategies and invariant checks for the property and acceptance suites.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsim::config::*;
use qsim::engine::{run, RunOptions};
use qsim::power::{PowerManager, TierFreq};
use qsim::queueing::{ConnectionGate, QueueError, StageQueue};
use qsim::stats::percentile;

// ---------------------------------------------------------------- queues

#[derive(Debug, Clone)]
pub enum QueueOp {
    Enqueue(u64),
    EnqueueNoConn,
    Dequeue,
}

pub fn queue_type() -> impl Strategy<Value = QueueType> {
    prop_oneof![Just(QueueType::Single), Just(QueueType::Epoll), Just(QueueType::Socket)]
}

pub fn queue_ops() -> impl Strategy<Value = Vec<QueueOp>> {
    let op = prop_oneof![
        5 => (0u64..3).prop_map(QueueOp::Enqueue),
        1 => Just(QueueOp::EnqueueNoConn),
        4 => Just(QueueOp::Dequeue),
    ];
    prop::collection::vec(op, 0..80)
}

/// No loss or duplication, per-connection FIFO order, batch bounds and
/// round-robin service for socket queues.
pub fn check_queue(qt: QueueType, bound: Option<u32>, ops: &[QueueOp]) -> Result<(), TestCaseError> {
    let mut q: StageQueue<(u64, u64)> = StageQueue::new(qt, bound);
    let mut model: BTreeMap<u64, VecDeque<(u64, u64)>> = BTreeMap::new();
    let mut fifo: VecDeque<(u64, u64)> = VecDeque::new();
    // Dequeues each waiting socket connection has sat through unserved.
    let mut skipped: HashMap<u64, usize> = HashMap::new();
    let mut seq = 0u64;
    let mut enqueued = 0usize;
    let mut seen = HashSet::new();
    let limit = bound.unwrap_or(u32::MAX) as usize;

    let mut dequeue = |q: &mut StageQueue<(u64, u64)>,
                       model: &mut BTreeMap<u64, VecDeque<(u64, u64)>>,
                       fifo: &mut VecDeque<(u64, u64)>,
                       skipped: &mut HashMap<u64, usize>|
     -> Result<(), TestCaseError> {
        let before = q.len();
        let res = q.dequeue_batch();
        if before == 0 {
            prop_assert_eq!(res, Err(QueueError::EmptyQueue));
            return Ok(());
        }
        let batch = res.map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(!batch.is_empty());
        prop_assert_eq!(q.len(), before - batch.len());
        for job in &batch {
            prop_assert!(seen.insert(*job), "job {:?} dequeued twice", job);
        }
        match qt {
            QueueType::Single => {
                let n = bound.map_or(1, |b| b as usize).min(fifo.len());
                let expect: Vec<_> = fifo.drain(..n).collect();
                for job in &expect {
                    let front = model.get_mut(&job.0).and_then(|s| s.pop_front());
                    prop_assert_eq!(front, Some(*job));
                }
                prop_assert_eq!(batch, expect);
            }
            QueueType::Epoll => {
                // Every waiting connection contributes its first min(len, N) jobs.
                let mut expect = HashSet::new();
                for sub in model.values_mut() {
                    let n = sub.len().min(limit);
                    expect.extend(sub.drain(..n));
                }
                let got: HashSet<_> = batch.iter().copied().collect();
                prop_assert_eq!(got, expect);
                for conn in 0..3 {
                    let mine: Vec<u64> = batch.iter().filter(|j| j.0 == conn).map(|j| j.1).collect();
                    prop_assert!(mine.len() <= limit);
                    prop_assert!(mine.windows(2).all(|w| w[0] < w[1]), "per-connection order broken");
                }
            }
            QueueType::Socket => {
                let conn = batch[0].0;
                prop_assert!(batch.iter().all(|j| j.0 == conn), "socket batch spans connections");
                let sub = model.get_mut(&conn).expect("served connection is known");
                let n = sub.len().min(limit);
                let expect: Vec<_> = sub.drain(..n).collect();
                prop_assert_eq!(batch, expect);
                skipped.insert(conn, 0);
                // Round-robin: every other connection is served at most once first.
                let others = model.len() - 1;
                for (c, sub) in model.iter() {
                    if *c != conn && !sub.is_empty() {
                        let k = skipped.entry(*c).or_insert(0);
                        *k += 1;
                        prop_assert!(*k <= others, "connection {} starved for {} dequeues", c, k);
                    }
                }
            }
        }
        Ok(())
    };

    for op in ops {
        match op {
            QueueOp::Enqueue(conn) => {
                let job = (*conn, seq);
                seq += 1;
                let c = (qt != QueueType::Single).then_some(*conn);
                q.enqueue(job, c).map_err(|e| TestCaseError::fail(e.to_string()))?;
                enqueued += 1;
                if model.get(conn).is_none_or(|s| s.is_empty()) {
                    skipped.insert(*conn, 0);
                }
                model.entry(*conn).or_default().push_back(job);
                fifo.push_back(job);
            }
            QueueOp::EnqueueNoConn => {
                let before = q.len();
                let r = q.enqueue((99, seq), None);
                seq += 1;
                if qt == QueueType::Single {
                    prop_assert!(r.is_ok());
                    enqueued += 1;
                    fifo.push_back((99, seq - 1));
                    model.entry(99).or_default().push_back((99, seq - 1));
                } else {
                    prop_assert_eq!(r, Err(QueueError::MissingConnection(qt)));
                    prop_assert_eq!(q.len(), before);
                }
            }
            QueueOp::Dequeue => dequeue(&mut q, &mut model, &mut fifo, &mut skipped)?,
        }
        let waiting: usize = model.values().map(|s| s.len()).sum();
        prop_assert_eq!(q.len(), waiting);
    }
    while !q.is_empty() {
        dequeue(&mut q, &mut model, &mut fifo, &mut skipped)?;
    }
    prop_assert_eq!(seen.len(), enqueued, "jobs lost");
    prop_assert_eq!(q.dequeue_batch(), Err(QueueError::EmptyQueue));
    Ok(())
}

// ---------------------------------------------------------------- gate

#[derive(Debug, Clone)]
pub enum GateOp {
    Block(u64, u64),
    Unblock(u64, u64),
    Offer(u64),
    Pop(u64),
}

pub fn gate_ops() -> impl Strategy<Value = Vec<GateOp>> {
    let op = prop_oneof![
        1 => (0u64..3, 0u64..3).prop_map(|(c, t)| GateOp::Block(c, t)),
        1 => (0u64..3, 0u64..3).prop_map(|(c, t)| GateOp::Unblock(c, t)),
        3 => (0u64..3).prop_map(GateOp::Offer),
        2 => (0u64..3).prop_map(GateOp::Pop),
    ];
    prop::collection::vec(op, 0..60)
}

/// Parked jobs are released exactly once, in arrival order, only after the
/// blocking token itself unblocks.
pub fn check_gate(ops: &[GateOp]) -> Result<(), TestCaseError> {
    let mut g: ConnectionGate<u64> = ConnectionGate::default();
    let mut blocked: HashMap<u64, u64> = HashMap::new();
    let mut parked: HashMap<u64, VecDeque<u64>> = HashMap::new();
    let mut next = 0u64;
    for op in ops {
        match *op {
            GateOp::Block(c, t) => {
                g.block(c, t);
                blocked.insert(c, t);
            }
            GateOp::Unblock(c, t) => {
                let r = g.unblock(c, t);
                if blocked.get(&c) == Some(&t) {
                    prop_assert!(r.is_ok());
                    blocked.remove(&c);
                } else {
                    prop_assert_eq!(r, Err(QueueError::WrongUnblocker { conn: c, token: t }));
                }
            }
            GateOp::Offer(c) => {
                let job = next;
                next += 1;
                let r = g.offer(c, job);
                if blocked.contains_key(&c) {
                    prop_assert_eq!(r, Err(QueueError::BlockedConnection(c)));
                    parked.entry(c).or_default().push_back(job);
                } else {
                    prop_assert_eq!(r, Ok(job));
                }
            }
            GateOp::Pop(c) => {
                let got = g.pop_parked(c);
                let expect = if blocked.contains_key(&c) {
                    None
                } else {
                    parked.get_mut(&c).and_then(|p| p.pop_front())
                };
                prop_assert_eq!(got, expect);
            }
        }
        for c in 0..3 {
            prop_assert_eq!(g.is_blocked(c), blocked.contains_key(&c));
        }
        prop_assert_eq!(g.parked_len(), parked.values().map(|p| p.len()).sum::<usize>());
    }
    Ok(())
}

// ---------------------------------------------------------------- percentiles

pub fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1e6, 1..300)
}

pub fn check_percentiles(samples: &[f64], mut ps: Vec<f64>) -> Result<(), TestCaseError> {
    ps.sort_by(f64::total_cmp);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut prev = f64::NEG_INFINITY;
    for p in ps {
        let v = percentile(samples, p).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(v >= prev, "p{} = {} below a lower percentile {}", p, v, prev);
        prop_assert!(v >= lo && v <= hi);
        prop_assert!(samples.contains(&v), "percentile is not an observed sample");
        prev = v;
    }
    prop_assert_eq!(percentile(samples, 100.0).unwrap(), hi);
    prop_assert!(percentile(samples, 0.0).is_err());
    prop_assert!(percentile(samples, 100.5).is_err());
    Ok(())
}

// ---------------------------------------------------------------- power manager

#[derive(Debug, Clone)]
pub enum PmOp {
    Insert(usize, Vec<f64>),
    Fail(usize, Vec<f64>),
    Choose(u64),
    Step {
        e2e: f64,
        tiers: Vec<f64>,
        levels: Vec<usize>,
        seed: u64,
    },
}

const TIERS: usize = 2;

fn tuple() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((1u32..8).prop_map(|v| v as f64 * 0.5), TIERS)
}

pub fn pm_ops() -> impl Strategy<Value = Vec<PmOp>> {
    let op = prop_oneof![
        (0usize..10, tuple()).prop_map(|(b, t)| PmOp::Insert(b, t)),
        (0usize..10, tuple()).prop_map(|(b, t)| PmOp::Fail(b, t)),
        any::<u64>().prop_map(PmOp::Choose),
        (
            0.0f64..12.0,
            tuple(),
            prop::collection::vec(0usize..8, TIERS),
            any::<u64>()
        )
            .prop_map(|(e2e, tiers, levels, seed)| PmOp::Step {
                e2e,
                tiers,
                levels,
                seed
            }),
    ];
    prop::collection::vec(op, 0..60)
}

fn dominates(f: &[f64], t: &[f64]) -> bool {
    f.iter().zip(t).all(|(a, b)| a <= b)
}

fn tier_freq(level: usize) -> TierFreq {
    TierFreq {
        current_ghz: DVFS_LEVELS[level],
        lower_ghz: level.checked_sub(1).map(|l| DVFS_LEVELS[l]),
        at_max: level == DVFS_LEVELS.len() - 1,
    }
}

/// A tuple dominated by a recorded failure is never inserted nor selected,
/// and preferences stay inside their clamp.
pub fn check_power_manager(ops: &[PmOp]) -> Result<(), TestCaseError> {
    let spec = PowerSpec::new(5.0, 0.1);
    let mut pm = PowerManager::new(&spec, TIERS);
    for op in ops {
        match op {
            PmOp::Insert(b, t) => {
                let blocked = pm.buckets()[*b].failing.iter().any(|f| dominates(f, t));
                prop_assert_eq!(pm.insert_tuple(*b, t.clone()), !blocked);
            }
            PmOp::Fail(b, t) => pm.record_failure(*b, t.clone()),
            PmOp::Choose(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                if let Ok((b, t)) = pm.choose_bucket(&mut rng) {
                    let bucket = &pm.buckets()[b];
                    prop_assert!(bucket.tuples.contains(&t));
                    prop_assert!(
                        !bucket.failing.iter().any(|f| dominates(f, &t)),
                        "chose a failing tuple"
                    );
                } else {
                    let any_ok = pm
                        .buckets()
                        .iter()
                        .any(|b| b.tuples.iter().any(|t| !b.failing.iter().any(|f| dominates(f, t))));
                    prop_assert!(!any_ok, "admissible tuple exists but none chosen");
                }
            }
            PmOp::Step {
                e2e,
                tiers,
                levels,
                seed,
            } => {
                let prev = pm.target().map(|(b, t)| (b, t.to_vec()));
                let freqs: Vec<TierFreq> = levels.iter().map(|&l| tier_freq(l)).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                pm.pm_step(*e2e, tiers, &freqs, &mut rng);
                if *e2e > spec.qos_target_ms {
                    if let Some((b, t)) = prev {
                        prop_assert!(pm.buckets()[b].failing.contains(&t), "missed target not recorded");
                    }
                    if let Some((b, t)) = pm.target() {
                        prop_assert!(!pm.buckets()[b].failing.iter().any(|f| dominates(f, t)));
                    }
                }
            }
        }
        for b in pm.buckets() {
            prop_assert!(b.preference >= spec.pref_min && b.preference <= spec.pref_max);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- random scenarios

fn stage(id: u32, qt: QueueType, bound: Option<u32>) -> StageSpec {
    StageSpec {
        stage_name: format!("st{id}"),
        stage_id: id,
        queue_type: qt,
        batching: bound.is_some(),
        queue_parameter: bound.map(|n| match qt {
            QueueType::Epoll => vec![None, Some(n)],
            _ => vec![Some(n)],
        }),
        per_event_us: 0.0,
        per_byte_us: 0.0,
    }
}

fn random_service(rng: &mut ChaCha8Rng, i: usize) -> ServiceSpec {
    let n_stages = rng.random_range(1..=3u32);
    let stages = (0..n_stages)
        .map(|id| {
            let qt = [QueueType::Single, QueueType::Epoll, QueueType::Socket][rng.random_range(0..3)];
            let bound = match qt {
                QueueType::Single => rng.random_bool(0.3).then(|| rng.random_range(1..=4)),
                _ => Some(rng.random_range(1..=8)),
            };
            stage(id, qt, bound)
        })
        .collect();
    let n_paths = rng.random_range(1..=2u32);
    let p = rng.random_range(0.1..0.9);
    let paths = (0..n_paths)
        .map(|pid| {
            let mut ids: Vec<u32> = (0..n_stages).filter(|_| rng.random_bool(0.6)).collect();
            if ids.is_empty() {
                ids.push(rng.random_range(0..n_stages));
            }
            ExecPathSpec {
                path_id: pid,
                path_name: format!("s{i}_p{pid}"),
                stages: ids,
                probability: (n_paths == 2).then_some(if pid == 0 { p } else { 1.0 - p }),
            }
        })
        .collect();
    let processing = (0..n_stages)
        .map(|id| ProcessingSpec {
            stage_id: id,
            path_id: None,
            freq_ghz: None,
            dist: if rng.random_bool(0.5) {
                DistSpec::Exponential {
                    mean_us: rng.random_range(5.0..60.0),
                }
            } else {
                DistSpec::Deterministic {
                    value_us: rng.random_range(1.0..30.0),
                }
            },
        })
        .collect();
    ServiceSpec {
        service_name: format!("s{i}"),
        stages,
        paths,
        processing,
    }
}

/// A small random scenario: up to five services, up to three client
/// connections, a random DAG with fan-out and fan-in, optional connection
/// pools and optional receive-blocking of the client connection.
pub fn random_scenario(seed: u64) -> (Scenario, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_svc = rng.random_range(1..=5usize);
    let services: Vec<ServiceSpec> = (0..n_svc).map(|i| random_service(&mut rng, i)).collect();
    let n_mach = rng.random_range(1..=3usize);
    let machines: Vec<MachineSpec> = (0..n_mach)
        .map(|m| MachineSpec {
            machine_id: format!("m{m}"),
            cores: rng.random_range(1..=4),
            network_cores: rng.random_range(0..=1),
            dvfs_levels: Vec::new(),
            net_rx_mean_us: 10.0,
            net_per_byte_us: 0.0,
        })
        .collect();
    let mut instances = Vec::new();
    let mut per_service: Vec<Vec<String>> = Vec::new();
    for i in 0..n_svc {
        let k = rng.random_range(1..=2);
        let mut names = Vec::new();
        for j in 0..k {
            let name = format!("s{i}_{j}");
            instances.push(InstanceSpec {
                instance_name: name.clone(),
                service_name: format!("s{i}"),
                machine_id: format!("m{}", rng.random_range(0..n_mach)),
                threads: rng.random_range(1..=3),
                exec_model: if rng.random_bool(0.5) {
                    ExecModel::Simple
                } else {
                    ExecModel::MultiThreaded
                },
                connections: BTreeMap::new(),
                context_switch_us: 5.0,
            });
            names.push(name);
        }
        per_service.push(names);
    }

    // Node targets: a concrete instance, or a service name for round-robin.
    let m = rng.random_range(1..=5usize);
    let blocking = rng.random_bool(0.3);
    let mut targets: Vec<(usize, String)> = (0..m)
        .map(|_| {
            let s = rng.random_range(0..n_svc);
            let t = if per_service[s].len() > 1 && rng.random_bool(0.4) {
                format!("s{s}")
            } else {
                per_service[s][rng.random_range(0..per_service[s].len())].clone()
            };
            (s, t)
        })
        .collect();
    if blocking {
        // The reply node must run on the entry's instance.
        let s = targets[0].0;
        targets[0].1 = per_service[s][0].clone();
    }
    let mut childs: Vec<Vec<u32>> = vec![Vec::new(); m];
    for j in 1..m {
        let parent = rng.random_range(0..j);
        childs[parent].push(j as u32);
        for (p, c) in childs.iter_mut().enumerate().take(j) {
            if p != parent && rng.random_bool(0.3) {
                c.push(j as u32);
            }
        }
    }
    // Sinks feed the reply node when blocking, otherwise the client.
    let sink_target = m as u32;
    for c in childs.iter_mut() {
        if c.is_empty() {
            c.push(sink_target);
        }
        c.sort_unstable();
    }
    let mut nodes: Vec<PathNodeSpec> = (0..m)
        .map(|j| {
            let svc = &services[targets[j].0];
            PathNodeSpec {
                node_id: j as u32,
                service: targets[j].1.clone(),
                execution_path: rng
                    .random_bool(0.5)
                    .then(|| svc.paths[rng.random_range(0..svc.paths.len())].path_id),
                start_stage: None,
                end_stage: None,
                childs: childs[j].clone(),
                enter_op: None,
                leave_op: None,
                causal_node_id: None,
            }
        })
        .collect();
    let client_id = if blocking { m as u32 + 1 } else { m as u32 };
    if blocking {
        nodes[0].enter_op = Some(vec![PathOp::BlockRecvConnection]);
        nodes.push(PathNodeSpec {
            node_id: m as u32,
            service: targets[0].1.clone(),
            execution_path: None,
            start_stage: None,
            end_stage: None,
            childs: vec![client_id],
            enter_op: None,
            leave_op: Some(vec![PathOp::UnblockConnection]),
            causal_node_id: Some(0),
        });
    }
    nodes.push(PathNodeSpec {
        node_id: client_id,
        service: CLIENT_SERVICE.into(),
        execution_path: None,
        start_stage: None,
        end_stage: None,
        childs: Vec::new(),
        enter_op: None,
        leave_op: None,
        causal_node_id: None,
    });

    // Pools between concretely named parent and child instances.
    for node in &nodes {
        for &c in &node.childs {
            let child = &nodes[c as usize].service;
            let named = |s: &str| instances.iter().any(|i| i.instance_name == s);
            if named(&node.service) && named(child) && node.service != *child && rng.random_bool(0.5) {
                let size = rng.random_range(1..=3);
                let inst = instances
                    .iter_mut()
                    .find(|i| i.instance_name == node.service)
                    .expect("named");
                inst.connections.insert(child.clone(), size);
            }
        }
    }

    let executing_nodes = nodes.len() - 1;
    let client = ClientSpec {
        load_pattern: LoadPatternSpec::Constant {
            qps: rng.random_range(100.0..3000.0),
        },
        interarrival: if rng.random_bool(0.8) {
            Interarrival::Exponential
        } else {
            Interarrival::Deterministic
        },
        request_size_bytes: rng.random_range(1..2000),
        duration_s: rng.random_range(0.05..0.2),
        warmup_s: Some(0.0),
        rng_seed: seed,
        connections: rng.random_range(1..=3),
        power: None,
    };
    let scenario = Scenario {
        services,
        machines,
        instances,
        paths: vec![InterPathSpec {
            path_id: 0,
            probability: 1.0,
            entry: 0,
            nodes,
        }],
        client,
        histograms: Default::default(),
        traces: BTreeMap::new(),
    };
    (scenario, executing_nodes)
}

/// Runs a random scenario and checks fan-in, exactly-once execution and copy
/// conservation.
pub fn check_random_scenario(seed: u64) -> Result<(), TestCaseError> {
    let (s, executing) = random_scenario(seed);
    s.validate()
        .map_err(|e| TestCaseError::fail(format!("generated invalid scenario: {e}")))?;
    let r = run(&s, &RunOptions::default()).map_err(|e| TestCaseError::fail(format!("run failed: {e}")))?;
    let c = &r.counters;
    prop_assert!(c.requests_injected > 0);
    prop_assert_eq!(c.requests_completed, c.requests_injected, "requests lost");
    prop_assert_eq!(c.requests_in_flight, 0);
    prop_assert_eq!(c.fanin_violations, 0, "node ran before all parents finished");
    prop_assert_eq!(c.duplicate_executions, 0, "node ran twice for one request");
    prop_assert_eq!(c.node_executions, c.requests_completed * executing as u64);
    prop_assert_eq!(
        c.copies_created,
        c.copies_merged + c.copies_forwarded,
        "copies not conserved"
    );
    prop_assert_eq!(c.core_violations, 0);
    prop_assert_eq!(c.net_delivered, c.net_completed);
    prop_assert!(r.latencies.len() as u64 <= c.requests_completed);
    if s.paths[0].nodes[0].enter_op.is_none() {
        prop_assert_eq!(c.jobs_parked, 0);
    }
    Ok(())
}
