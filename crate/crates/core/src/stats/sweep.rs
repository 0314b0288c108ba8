use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::config::{Model, NodeTarget, Scenario};
use crate::engine::{self, EngineError, RunOptions, RunReport};
use crate::service::ProcessingTimeModel;

/// Achieved throughput below this share of offered marks saturation.
const SATURATION_THROUGHPUT: f64 = 0.95;
/// p99 above this multiple of the zero-load mean marks saturation.
const SATURATION_P99_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub offered_qps: f64,
    pub achieved_qps: f64,
    pub mean_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub p99_ms: Option<f64>,
    /// Per-instance p99 sojourn, keyed (and therefore ordered) by instance name.
    pub tier_p99_ms: BTreeMap<String, Option<f64>>,
    pub saturated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the `index`-th independent run under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

/// Analytic end-to-end latency with no queueing: the longest chain of mean
/// node costs (stage means plus cross-machine receive cost), averaged over
/// inter-service paths.
pub fn zero_load_mean_us(scenario: &Scenario) -> Result<f64, EngineError> {
    let model = scenario.model()?;
    let bytes = scenario.client.request_size_bytes;
    let procs: Vec<ProcessingTimeModel> = model.services.iter().map(ProcessingTimeModel::new).collect();
    let mut total = 0.0;
    for path in &model.paths {
        let cost: Vec<f64> = path
            .nodes
            .iter()
            .map(|n| node_mean_us(&model, &procs, n, bytes))
            .collect();
        // Longest path by relaxation in reverse topological order.
        let order = topo_order(path);
        let mut best = vec![f64::NEG_INFINITY; path.nodes.len()];
        best[path.entry] = cost[path.entry] + rx_mean_us(&model, None, &path.nodes[path.entry].target, bytes);
        for &v in &order {
            for &c in &path.nodes[v].children {
                let hop = rx_mean_us(
                    &model,
                    first_machine(&model, &path.nodes[v].target),
                    &path.nodes[c].target,
                    bytes,
                );
                let cand = best[v] + hop + cost[c];
                if cand > best[c] {
                    best[c] = cand;
                }
            }
        }
        total += path.probability * best[path.client_node];
    }
    Ok(total)
}

fn topo_order(path: &crate::config::PathModel) -> Vec<usize> {
    let mut indeg: Vec<u32> = path.nodes.iter().map(|n| n.parent_count).collect();
    let mut order = Vec::with_capacity(path.nodes.len());
    let mut stack = vec![path.entry];
    while let Some(v) = stack.pop() {
        order.push(v);
        for &c in &path.nodes[v].children {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                stack.push(c);
            }
        }
    }
    order
}

fn first_machine(model: &Model, target: &NodeTarget) -> Option<usize> {
    match target {
        NodeTarget::Client => None,
        NodeTarget::Instances(c) => Some(model.instances[c[0]].machine),
    }
}

fn rx_mean_us(model: &Model, from: Option<usize>, to: &NodeTarget, bytes: u64) -> f64 {
    let Some(dst) = first_machine(model, to) else {
        return 0.0;
    };
    if from == Some(dst) {
        return 0.0;
    }
    let m = &model.machines[dst];
    if m.network_cores == 0 {
        return 0.0;
    }
    m.rx_mean_us + m.rx_per_byte_us * bytes as f64
}

fn node_mean_us(model: &Model, procs: &[ProcessingTimeModel], node: &crate::config::NodeModel, bytes: u64) -> f64 {
    let (Some(svc), NodeTarget::Instances(cands)) = (node.service, &node.target) else {
        return 0.0;
    };
    let service = &model.services[svc];
    let weighted_paths: Vec<(usize, f64)> = match node.exec_path {
        Some(p) => vec![(p, 1.0)],
        None => match &service.path_weights {
            Some(w) => w.iter().copied().enumerate().filter(|(_, w)| *w > 0.0).collect(),
            None => vec![(0, 1.0)],
        },
    };
    let mut acc = 0.0;
    for &inst in cands {
        let freq = model.machines[model.instances[inst].machine]
            .dvfs_levels
            .last()
            .copied();
        for &(p, w) in &weighted_paths {
            let ep = &service.exec_paths[p];
            let Some((start, end)) = node.stage_range(service, ep) else {
                continue;
            };
            let mut sum = 0.0;
            for &st in &ep.stages[start..=end] {
                sum += procs[svc].mean(st, p, freq, freq, bytes).unwrap_or(0.0);
            }
            acc += w * sum;
        }
    }
    acc / cands.len() as f64
}

/// Reduces one run to a sweep row.
pub fn summarize(report: &RunReport, zero_load_mean_us: f64) -> SweepPoint {
    let lat = &report.latencies;
    let mean_ms = lat.mean_ms().ok();
    let p95_ms = lat.percentile_ms(95.0).ok();
    let p99_ms = lat.percentile_ms(99.0).ok();
    let mut tier_p99_ms = BTreeMap::new();
    if lat.records_tiers() {
        for (i, inst) in report.instances.iter().enumerate() {
            tier_p99_ms.insert(inst.name.clone(), lat.tier_percentile_ms(i, 99.0).ok());
        }
    }
    let throughput_short = report.achieved_qps < SATURATION_THROUGHPUT * report.offered_qps;
    let tail_blown = match p99_ms {
        Some(p) => p * 1e3 > SATURATION_P99_FACTOR * zero_load_mean_us,
        None => true,
    };
    SweepPoint {
        offered_qps: report.offered_qps,
        achieved_qps: report.achieved_qps,
        mean_ms,
        p95_ms,
        p99_ms,
        tier_p99_ms,
        saturated: throughput_short || tail_blown,
    }
}

/// One fresh run per rate, in parallel, each seeded from the scenario's
/// master seed and the rate's position.
pub fn sweep(
    scenario: &Scenario,
    rates: &[f64],
    per_rate_duration_s: Option<f64>,
    opts: &RunOptions,
) -> Result<SweepResult, EngineError> {
    if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) || rates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StatsError::Rates.into());
    }
    if rates.is_empty() {
        return Ok(SweepResult::default());
    }
    let zero_load = zero_load_mean_us(scenario)?;
    let points = rates
        .par_iter()
        .enumerate()
        .map(|(i, &qps)| {
            let mut s = scenario.clone();
            s.set_constant_rate(qps);
            if let Some(d) = per_rate_duration_s {
                let warm_share = s.client.warmup() / s.client.duration_s;
                s.client.duration_s = d;
                s.client.warmup_s = Some(warm_share * d);
            }
            s.client.rng_seed = derive_seed(scenario.client.rng_seed, i as u64);
            s.validate()?;
            let report = engine::run(&s, opts)?;
            Ok(summarize(&report, zero_load))
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    Ok(SweepResult { points })
}
