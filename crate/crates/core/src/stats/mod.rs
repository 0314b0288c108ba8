//! Latency recording, percentiles, sweeps, export and closed-form oracles.

mod export;
mod oracle;
mod sweep;

use thiserror::Error;

pub use export::{export, read_json, write_csv, write_json, OutputFormat};
pub use oracle::{
    oracle_erlang_c, oracle_fanout_max, oracle_mm1, oracle_mm1_quantile, oracle_mmk_mean_sojourn,
    oracle_mmk_sojourn_quantile,
};
pub use sweep::{derive_seed, summarize, sweep, zero_load_mean_us, SweepPoint, SweepResult};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no samples recorded")]
    NoSamples,
    #[error("percentile {0} outside (0, 100]")]
    InvalidPercentile(f64),
    #[error("unstable system: offered load {load} >= capacity {capacity}")]
    UnstableSystem { load: f64, capacity: f64 },
    #[error("invalid oracle parameter: {0}")]
    InvalidParameter(String),
    #[error("sweep rates must be positive and strictly increasing")]
    Rates,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Nearest-rank percentile over unsorted samples.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64, StatsError> {
    let idx = rank_index(samples.len(), p)?;
    let mut buf = samples.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*v)
}

/// Nearest-rank percentile over samples already sorted ascending.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Result<f64, StatsError> {
    Ok(sorted[rank_index(sorted.len(), p)?])
}

fn rank_index(n: usize, p: f64) -> Result<usize, StatsError> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(StatsError::InvalidPercentile(p));
    }
    if n == 0 {
        return Err(StatsError::NoSamples);
    }
    let rank = (p / 100.0 * n as f64).ceil() as usize;
    Ok(rank.clamp(1, n) - 1)
}

pub fn mean(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::NoSamples);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Post-warmup latency samples of one run, in microseconds.
#[derive(Debug, Clone, Default)]
pub struct LatencyRecorder {
    e2e_us: Vec<f64>,
    tiers_us: Vec<Vec<f64>>,
    record_tiers: bool,
}

impl LatencyRecorder {
    pub fn new(instances: usize, record_tiers: bool) -> Self {
        LatencyRecorder {
            e2e_us: Vec::new(),
            tiers_us: vec![Vec::new(); if record_tiers { instances } else { 0 }],
            record_tiers,
        }
    }

    pub fn record_e2e(&mut self, us: f64) {
        self.e2e_us.push(us);
    }

    pub fn record_tier(&mut self, instance: usize, us: f64) {
        if self.record_tiers {
            self.tiers_us[instance].push(us);
        }
    }

    pub fn records_tiers(&self) -> bool {
        self.record_tiers
    }

    pub fn len(&self) -> usize {
        self.e2e_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e2e_us.is_empty()
    }

    pub fn e2e_us(&self) -> &[f64] {
        &self.e2e_us
    }

    pub fn tier_us(&self, instance: usize) -> &[f64] {
        self.tiers_us.get(instance).map_or(&[], |v| v.as_slice())
    }

    pub fn mean_ms(&self) -> Result<f64, StatsError> {
        Ok(mean(&self.e2e_us)? / 1e3)
    }

    pub fn percentile_ms(&self, p: f64) -> Result<f64, StatsError> {
        Ok(percentile(&self.e2e_us, p)? / 1e3)
    }

    pub fn tier_percentile_ms(&self, instance: usize, p: f64) -> Result<f64, StatsError> {
        Ok(percentile(self.tier_us(instance), p)? / 1e3)
    }
}

/// Windowed p99 of one decision interval.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub e2e_p99_ms: Option<f64>,
    pub tier_p99_ms: Vec<Option<f64>>,
    pub samples: usize,
}

/// Collects samples for the current decision window; `take` closes it.
#[derive(Debug, Clone, Default)]
pub struct WindowRecorder {
    e2e_us: Vec<f64>,
    tiers_us: Vec<Vec<f64>>,
}

impl WindowRecorder {
    pub fn new(tiers: usize) -> Self {
        WindowRecorder {
            e2e_us: Vec::new(),
            tiers_us: vec![Vec::new(); tiers],
        }
    }

    pub fn record_e2e(&mut self, us: f64) {
        self.e2e_us.push(us);
    }

    pub fn record_tier(&mut self, tier: usize, us: f64) {
        self.tiers_us[tier].push(us);
    }

    pub fn take(&mut self) -> WindowStats {
        let p99 = |v: &[f64]| percentile(v, 99.0).ok().map(|x| x / 1e3);
        let stats = WindowStats {
            e2e_p99_ms: p99(&self.e2e_us),
            tier_p99_ms: self.tiers_us.iter().map(|t| p99(t)).collect(),
            samples: self.e2e_us.len(),
        };
        self.e2e_us.clear();
        self.tiers_us.iter_mut().for_each(Vec::clear);
        stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 99.0).unwrap(), 99.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 100.0);
        assert_eq!(percentile(&v, 0.5).unwrap(), 1.0);
        assert_eq!(percentile(&[7.0], 1.0).unwrap(), 7.0);
        assert_eq!(percentile(&[7.0], 99.9).unwrap(), 7.0);
        assert!(matches!(percentile(&[], 50.0), Err(StatsError::NoSamples)));
        assert!(matches!(percentile(&v, 0.0), Err(StatsError::InvalidPercentile(_))));
    }

    #[test]
    fn exponential_p99() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let exp = Exp::new(1.0).unwrap();
        let v: Vec<f64> = (0..1_000_000).map(|_| exp.sample(&mut rng)).collect();
        let p = percentile(&v, 99.0).unwrap();
        assert!((p / 4.605 - 1.0).abs() < 0.03, "{p}");
    }

    #[test]
    fn window_equals_whole_run() {
        let mut rec = LatencyRecorder::new(1, true);
        let mut win = WindowRecorder::new(1);
        for i in 0..1000 {
            let x = ((i * 7919) % 1000) as f64;
            rec.record_e2e(x);
            rec.record_tier(0, x / 2.0);
            win.record_e2e(x);
            win.record_tier(0, x / 2.0);
        }
        let w = win.take();
        assert_eq!(w.e2e_p99_ms, Some(rec.percentile_ms(99.0).unwrap()));
        assert_eq!(w.tier_p99_ms[0], Some(rec.tier_percentile_ms(0, 99.0).unwrap()));
        assert_eq!(win.take().samples, 0);
    }
}
