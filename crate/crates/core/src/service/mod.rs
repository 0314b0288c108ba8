//! Microservice instances: execution-path selection, processing-time
//! sampling, connection pools, and the stage/thread/core machinery that
//! turns queued jobs into stage invocations.

mod distribution;
pub(crate) mod runtime;

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

pub use distribution::Distribution;

use crate::config::{ProcEntry, ServiceModel, StageModel};

/// Floor applied to sampled durations so every invocation takes time.
pub const MIN_SERVICE_US: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ServiceError {
    #[error("no processing-time distribution for stage {stage} at {freq:?} GHz")]
    MissingDistribution { stage: u32, freq: Option<f64> },
}

/// Per-stage processing-time sources plus runtime cost slopes.
#[derive(Debug, Clone)]
pub struct ProcessingTimeModel {
    stages: Vec<StageModel>,
    entries: Vec<Vec<ProcEntry>>,
}

impl ProcessingTimeModel {
    pub fn new(service: &ServiceModel) -> Self {
        let mut entries = vec![Vec::new(); service.stages.len()];
        for e in &service.processing {
            entries[e.stage].push(e.clone());
        }
        ProcessingTimeModel {
            stages: service.stages.clone(),
            entries,
        }
    }

    /// Samples one invocation of `stage` for a batch of `batch_size` jobs
    /// that read `bytes` in total.
    ///
    /// `freq` is the instance's current frequency and `nominal` the
    /// frequency that frequency-less entries describe. A histogram bound to
    /// the exact frequency wins; otherwise the nearest source is scaled by
    /// `f_source / f`.
    #[allow(clippy::too_many_arguments)]
    pub fn sample<R: Rng + ?Sized>(
        &self,
        stage: usize,
        path: usize,
        freq: Option<f64>,
        nominal: Option<f64>,
        batch_size: usize,
        bytes: u64,
        rng: &mut R,
    ) -> Result<f64, ServiceError> {
        let (entry, scale) = self
            .select(stage, path, freq, nominal)
            .ok_or(ServiceError::MissingDistribution {
                stage: self.stages.get(stage).map_or(stage as u32, |s| s.stage_id),
                freq,
            })?;
        let st = &self.stages[stage];
        let base = entry.dist.sample(rng);
        let total = (base + st.per_event_us * batch_size as f64 + st.per_byte_us * bytes as f64) * scale;
        Ok(total.max(MIN_SERVICE_US))
    }

    /// Mean single-job cost at the given frequency, slopes included.
    pub fn mean(&self, stage: usize, path: usize, freq: Option<f64>, nominal: Option<f64>, bytes: u64) -> Option<f64> {
        let (entry, scale) = self.select(stage, path, freq, nominal)?;
        let st = &self.stages[stage];
        Some((entry.dist.mean() + st.per_event_us + st.per_byte_us * bytes as f64) * scale)
    }

    fn select(&self, stage: usize, path: usize, freq: Option<f64>, nominal: Option<f64>) -> Option<(&ProcEntry, f64)> {
        let all = self.entries.get(stage)?;
        let specific: Vec<&ProcEntry> = all.iter().filter(|e| e.path == Some(path)).collect();
        let pool: Vec<&ProcEntry> = if specific.is_empty() {
            all.iter().filter(|e| e.path.is_none()).collect()
        } else {
            specific
        };
        let Some(f) = freq else {
            let e = pool.iter().find(|e| e.freq_ghz.is_none()).or_else(|| pool.first())?;
            return Some((e, 1.0));
        };
        let source_freq = |e: &ProcEntry| e.freq_ghz.or(nominal).unwrap_or(f);
        let best = pool.iter().min_by(|a, b| {
            let da = (source_freq(a) - f).abs();
            let db = (source_freq(b) - f).abs();
            // Exact-frequency entries beat frequency-less ones at equal distance.
            da.total_cmp(&db).then(a.freq_ghz.is_none().cmp(&b.freq_ghz.is_none()))
        })?;
        Some((best, source_freq(best) / f))
    }
}

/// Chooses a service's execution path per request.
#[derive(Debug, Clone)]
pub struct PathSelector {
    cumulative: Vec<f64>,
}

impl PathSelector {
    pub fn new(service: &ServiceModel) -> Self {
        let weights = service.path_weights.clone().unwrap_or_else(|| {
            let mut w = vec![0.0; service.exec_paths.len()];
            w[0] = 1.0;
            w
        });
        Self::from_weights(&weights)
    }

    pub fn from_weights(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        PathSelector { cumulative }
    }

    /// Single-path services return immediately without touching `rng`.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.cumulative.len() == 1 {
            return 0;
        }
        let total = *self.cumulative.last().expect("at least one path");
        let u = rng.random::<f64>() * total;
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }
}

/// Fixed-size connection pool toward one peer. Callers that find every
/// connection in use wait in FIFO order.
#[derive(Debug, Clone)]
pub struct ConnectionPool<W> {
    in_use: Vec<bool>,
    waiters: VecDeque<W>,
}

impl<W> ConnectionPool<W> {
    pub fn new(capacity: u32) -> Self {
        ConnectionPool {
            in_use: vec![false; capacity as usize],
            waiters: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.in_use.len()
    }

    pub fn in_use(&self) -> usize {
        self.in_use.iter().filter(|&&b| b).count()
    }

    pub fn waiting(&self) -> usize {
        self.waiters.len()
    }

    /// Grants the lowest free slot, or queues `waiter` and returns `None`.
    pub fn acquire(&mut self, waiter: W) -> Option<u32> {
        match self.in_use.iter().position(|&b| !b) {
            Some(slot) => {
                self.in_use[slot] = true;
                Some(slot as u32)
            }
            None => {
                self.waiters.push_back(waiter);
                None
            }
        }
    }

    /// Frees `slot`; if someone is waiting, the slot passes straight to them.
    pub fn release(&mut self, slot: u32) -> Option<(W, u32)> {
        debug_assert!(self.in_use[slot as usize], "releasing a free slot");
        match self.waiters.pop_front() {
            Some(w) => Some((w, slot)),
            None => {
                self.in_use[slot as usize] = false;
                None
            }
        }
    }
}
