//! DVFS state and the bucket/preference power manager.
//!
//! The tail-latency space `[0, 2 x QoS)` is split into equal buckets. Each
//! bucket remembers per-tier p99 tuples observed when the end-to-end p99
//! landed in it, the tuples that were later targeted and failed, and a
//! preference weight. Every decision window the manager either slows one
//! tier (QoS met) or speeds up the tiers that overshot their target (QoS
//! missed).

mod controller;

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use controller::{Action, Bucket, PowerManager, TierFreq};

use crate::config::{Model, PowerSpec};
use crate::engine::sim::Simulation;
use crate::engine::{EngineError, EventKind};
use crate::stats::{WindowRecorder, WindowStats};

const LEVEL_TOLERANCE_GHZ: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PowerError {
    #[error("{freq_ghz} GHz is not a DVFS level of instance `{instance}`")]
    InvalidLevel { instance: String, freq_ghz: f64 },
    #[error("no bucket holds an admissible per-tier tuple")]
    NoAdmissibleTuple,
    #[error("power management needs at least one instance on a machine with two or more DVFS levels")]
    NoTiers,
}

/// Current frequency level per instance.
#[derive(Debug, Clone)]
pub struct DvfsState {
    names: Vec<String>,
    levels: Vec<Vec<f64>>,
    current: Vec<Option<usize>>,
}

impl DvfsState {
    /// Every instance starts at its machine's top level.
    pub fn new(model: &Model) -> Self {
        let levels: Vec<Vec<f64>> = model
            .instances
            .iter()
            .map(|i| model.machines[i.machine].dvfs_levels.clone())
            .collect();
        let current = levels.iter().map(|l| l.len().checked_sub(1)).collect();
        DvfsState {
            names: model.instances.iter().map(|i| i.name.clone()).collect(),
            levels,
            current,
        }
    }

    pub fn freq(&self, inst: usize) -> Option<f64> {
        self.current[inst].map(|l| self.levels[inst][l])
    }

    pub fn nominal(&self, inst: usize) -> Option<f64> {
        self.levels[inst].last().copied()
    }

    pub fn level(&self, inst: usize) -> Option<usize> {
        self.current[inst]
    }

    pub fn levels(&self, inst: usize) -> &[f64] {
        &self.levels[inst]
    }

    pub fn level_of(&self, inst: usize, freq_ghz: f64) -> Result<usize, PowerError> {
        self.levels[inst]
            .iter()
            .position(|&f| (f - freq_ghz).abs() <= LEVEL_TOLERANCE_GHZ)
            .ok_or_else(|| PowerError::InvalidLevel {
                instance: self.names[inst].clone(),
                freq_ghz,
            })
    }

    pub fn set_level(&mut self, inst: usize, level: usize) {
        assert!(level < self.levels[inst].len(), "level out of range");
        self.current[inst] = Some(level);
    }
}

/// One decision window in the power-manager trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PmWindow {
    pub window_end_s: f64,
    pub e2e_p99_ms: Option<f64>,
    pub tier_p99_ms: Vec<Option<f64>>,
    /// Frequencies in force during the window.
    pub freqs_ghz: Vec<f64>,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub qos_ms: f64,
    pub interval_s: f64,
    pub controller_enabled: bool,
    pub tier_names: Vec<String>,
    pub max_freqs_ghz: Vec<f64>,
    pub windows: Vec<PmWindow>,
}

impl PowerReport {
    /// Share of windows with completions whose p99 exceeded the target.
    pub fn violation_rate(&self) -> f64 {
        let measured: Vec<f64> = self.windows.iter().filter_map(|w| w.e2e_p99_ms).collect();
        if measured.is_empty() {
            return 0.0;
        }
        measured.iter().filter(|&&p| p > self.qos_ms).count() as f64 / measured.len() as f64
    }

    /// Sum over windows and tiers of f / f_max.
    pub fn energy_proxy(&self) -> f64 {
        self.windows
            .iter()
            .map(|w| {
                w.freqs_ghz
                    .iter()
                    .zip(&self.max_freqs_ghz)
                    .map(|(f, m)| f / m)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Columns: `window_end_s,e2e_p99_ms`, `<tier>_p99_ms` per tier,
    /// `<tier>_freq_ghz` per tier, `action`.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["window_end_s".to_string(), "e2e_p99_ms".to_string()];
        header.extend(self.tier_names.iter().map(|t| format!("{t}_p99_ms")));
        header.extend(self.tier_names.iter().map(|t| format!("{t}_freq_ghz")));
        header.push("action".into());
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for win in &self.windows {
            let mut row = vec![win.window_end_s.to_string(), opt(win.e2e_p99_ms)];
            row.extend(win.tier_p99_ms.iter().map(|v| opt(*v)));
            row.extend(win.freqs_ghz.iter().map(|f| f.to_string()));
            row.push(win.action.clone());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Power manager state inside a run: controller, windowed stats and trace.
pub(crate) struct PmRuntime {
    manager: PowerManager,
    controller_enabled: bool,
    /// Instance index per controlled tier.
    tiers: Vec<usize>,
    tier_of_instance: Vec<Option<usize>>,
    window: WindowRecorder,
    rng: ChaCha8Rng,
    interval_s: f64,
    windows: Vec<PmWindow>,
}

impl PmRuntime {
    pub fn new(spec: &PowerSpec, model: &Model, enabled: bool, rng: ChaCha8Rng) -> Result<Self, EngineError> {
        let tiers: Vec<usize> = model
            .instances
            .iter()
            .enumerate()
            .filter(|(_, i)| model.machines[i.machine].dvfs_levels.len() >= 2)
            .map(|(idx, _)| idx)
            .collect();
        if tiers.is_empty() {
            return Err(PowerError::NoTiers.into());
        }
        let mut tier_of_instance = vec![None; model.instances.len()];
        for (t, &i) in tiers.iter().enumerate() {
            tier_of_instance[i] = Some(t);
        }
        Ok(PmRuntime {
            manager: PowerManager::new(spec, tiers.len()),
            controller_enabled: enabled && spec.enabled,
            window: WindowRecorder::new(tiers.len()),
            tiers,
            tier_of_instance,
            rng,
            interval_s: spec.decision_interval_s,
            windows: Vec::new(),
        })
    }

    pub fn interval_us(&self) -> f64 {
        self.interval_s * 1e6
    }

    pub fn record(&mut self, e2e_us: f64, tier_us: &[(usize, f64)]) {
        self.window.record_e2e(e2e_us);
        for &(inst, us) in tier_us {
            if let Some(t) = self.tier_of_instance[inst] {
                self.window.record_tier(t, us);
            }
        }
    }

    pub fn into_report(self, model: &Model) -> PowerReport {
        PowerReport {
            qos_ms: self.manager.qos_ms(),
            interval_s: self.interval_s,
            controller_enabled: self.controller_enabled,
            tier_names: self.tiers.iter().map(|&i| model.instances[i].name.clone()).collect(),
            max_freqs_ghz: self
                .tiers
                .iter()
                .map(|&i| {
                    *model.machines[model.instances[i].machine]
                        .dvfs_levels
                        .last()
                        .expect("tier has levels")
                })
                .collect(),
            windows: self.windows,
        }
    }
}

fn describe(actions: &[Action], names: &[String]) -> String {
    if actions.is_empty() {
        return "hold".into();
    }
    actions
        .iter()
        .map(|a| match a {
            Action::SlowDown(t) => format!("down:{}", names[*t]),
            Action::SpeedUp(t) => format!("up:{}", names[*t]),
            Action::AllMax => "all_max".into(),
        })
        .collect::<Vec<_>>()
        .join(";")
}

impl Simulation {
    /// Requests a frequency change, effective at the current instant.
    pub(crate) fn apply_frequency(&mut self, inst: usize, freq_ghz: f64) -> Result<(), EngineError> {
        let level = self.dvfs.level_of(inst, freq_ghz)?;
        self.schedule(
            self.now,
            EventKind::DvfsChange {
                instance: inst as u32,
                level: level as u32,
            },
        )
    }

    pub(crate) fn on_dvfs_change(&mut self, inst: usize, level: usize) {
        if self.dvfs.level(inst) != Some(level) {
            self.dvfs.set_level(inst, level);
            self.counters.dvfs_changes += 1;
        }
    }

    pub(crate) fn on_pm_tick(&mut self) -> Result<(), EngineError> {
        let Some(pm) = self.pm.as_mut() else { return Ok(()) };
        let stats: WindowStats = pm.window.take();
        let tiers = pm.tiers.clone();
        let freqs: Vec<f64> = tiers
            .iter()
            .map(|&i| self.dvfs.freq(i).expect("tier has levels"))
            .collect();
        let mut requests = Vec::new();
        let action = match (pm.controller_enabled, stats.e2e_p99_ms) {
            (true, Some(e2e)) => {
                let views: Vec<TierFreq> = tiers
                    .iter()
                    .map(|&i| {
                        let lv = self.dvfs.level(i).expect("tier has levels");
                        let levels = self.dvfs.levels(i);
                        TierFreq {
                            current_ghz: levels[lv],
                            lower_ghz: lv.checked_sub(1).map(|l| levels[l]),
                            at_max: lv + 1 == levels.len(),
                        }
                    })
                    .collect();
                let tier_p99: Vec<f64> = stats.tier_p99_ms.iter().map(|v| v.unwrap_or(0.0)).collect();
                let actions = pm.manager.pm_step(e2e, &tier_p99, &views, &mut pm.rng);
                for a in &actions {
                    match *a {
                        Action::SlowDown(t) => {
                            let i = tiers[t];
                            let lv = self.dvfs.level(i).expect("tier has levels");
                            requests.push((i, self.dvfs.levels(i)[lv - 1]));
                        }
                        Action::SpeedUp(t) => {
                            let i = tiers[t];
                            let lv = self.dvfs.level(i).expect("tier has levels");
                            let levels = self.dvfs.levels(i);
                            requests.push((i, levels[(lv + 1).min(levels.len() - 1)]));
                        }
                        Action::AllMax => {
                            for &i in &tiers {
                                requests.push((i, *self.dvfs.levels(i).last().expect("tier has levels")));
                            }
                        }
                    }
                }
                let names: Vec<String> = tiers.iter().map(|&i| self.model.instances[i].name.clone()).collect();
                describe(&actions, &names)
            }
            (true, None) => "idle".into(),
            (false, _) => "disabled".into(),
        };
        pm.windows.push(PmWindow {
            window_end_s: self.now / 1e6,
            e2e_p99_ms: stats.e2e_p99_ms,
            tier_p99_ms: stats.tier_p99_ms,
            freqs_ghz: freqs,
            action,
        });
        let next = self.now + pm.interval_us();
        for (i, f) in requests {
            self.apply_frequency(i, f)?;
        }
        // Small slack so float accumulation does not drop the final window.
        if next <= self.duration_us * (1.0 + 1e-12) {
            self.schedule(next, EventKind::PmDecisionTick)?;
        }
        Ok(())
    }
}
