//! Open-loop request generation.
//!
//! Arrivals are drawn independently of completions: the generator never
//! looks at the system it feeds.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution as _, Exp1};
use thiserror::Error;

use crate::config::Interarrival;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("trace schema error: {0}")]
    Schema(String),
    #[error("end of trace")]
    EndOfTrace,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Piecewise-constant rate function `(start_s, qps)`; the last plateau
/// extends indefinitely.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadPattern {
    points: Vec<(f64, f64)>,
}

impl LoadPattern {
    pub fn constant(qps: f64) -> Result<Self, WorkloadError> {
        Self::trace(vec![(0.0, qps)])
    }

    pub fn trace(points: Vec<(f64, f64)>) -> Result<Self, WorkloadError> {
        if points.is_empty() {
            return Err(WorkloadError::Schema("trace has no rows".into()));
        }
        if points[0].0 != 0.0 {
            return Err(WorkloadError::Schema(format!(
                "trace must start at time 0, starts at {}",
                points[0].0
            )));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(WorkloadError::Schema("trace times must be strictly increasing".into()));
            }
        }
        if let Some(&(t, q)) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
            return Err(WorkloadError::Schema(format!(
                "qps must be positive (row at {t}s has {q})"
            )));
        }
        Ok(LoadPattern { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Rate in requests per second at `t_s`.
    pub fn rate_at(&self, t_s: f64) -> f64 {
        let i = self.points.partition_point(|p| p.0 <= t_s);
        self.points[i.saturating_sub(1)].1
    }

    /// Expected arrivals in `[0, horizon_s)`.
    pub fn expected_arrivals(&self, horizon_s: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(t, q)) in self.points.iter().enumerate() {
            if t >= horizon_s {
                break;
            }
            let end = self.points.get(i + 1).map_or(horizon_s, |p| p.0.min(horizon_s));
            total += q * (end - t);
        }
        total
    }
}

/// Reads a `time_s,qps` CSV into a load pattern.
pub fn load_trace(path: impl AsRef<Path>) -> Result<LoadPattern, WorkloadError> {
    read_trace(fs::File::open(path)?)
}

pub fn read_trace<R: Read>(reader: R) -> Result<LoadPattern, WorkloadError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| WorkloadError::Schema(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "qps"] {
        return Err(WorkloadError::Schema("expected header `time_s,qps`".into()));
    }
    let mut points = Vec::new();
    for (i, row) in rdr.deserialize::<(f64, f64)>().enumerate() {
        points.push(row.map_err(|e| WorkloadError::Schema(format!("row {i}: {e}")))?);
    }
    LoadPattern::trace(points)
}

pub fn write_trace<W: Write>(points: &[(f64, f64)], writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time_s", "qps"])?;
    for &(t, q) in points {
        w.write_record([t.to_string(), q.to_string()])?;
    }
    w.flush()
}

/// Sinusoidal day/night trace oscillating between 20% and 90% of
/// `saturation_qps`, starting at the trough, sampled every `step_s`.
pub fn diurnal_trace(saturation_qps: f64, period_s: f64, duration_s: f64, step_s: f64) -> Vec<(f64, f64)> {
    let lo = 0.2 * saturation_qps;
    let hi = 0.9 * saturation_qps;
    let steps = (duration_s / step_s).ceil() as usize;
    (0..steps)
        .map(|i| {
            let t = i as f64 * step_s;
            let phase = (1.0 - (2.0 * PI * t / period_s).cos()) / 2.0;
            // Round so the CSV form reparses to the same values.
            let qps = ((lo + (hi - lo) * phase) * 1000.0).round() / 1000.0;
            (t, qps)
        })
        .collect()
}

/// Arrival stream for one client. Times are in simulated microseconds.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    pattern: LoadPattern,
    kind: Interarrival,
    current_us: f64,
    horizon_us: f64,
}

impl ArrivalProcess {
    pub fn new(pattern: LoadPattern, kind: Interarrival, horizon_s: f64) -> Self {
        ArrivalProcess {
            pattern,
            kind,
            current_us: 0.0,
            horizon_us: horizon_s * 1e6,
        }
    }

    pub fn pattern(&self) -> &LoadPattern {
        &self.pattern
    }

    /// Draws the next arrival after the current one. The rate in force at
    /// the current arrival applies to the whole gap.
    pub fn next_arrival<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64, WorkloadError> {
        let rate_per_us = self.pattern.rate_at(self.current_us / 1e6) / 1e6;
        let gap = match self.kind {
            Interarrival::Exponential => {
                let e: f64 = Exp1.sample(rng);
                e / rate_per_us
            }
            Interarrival::Deterministic => 1.0 / rate_per_us,
        };
        let next = self.current_us + gap;
        if next >= self.horizon_us {
            return Err(WorkloadError::EndOfTrace);
        }
        self.current_us = next;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponential_gap_mean_matches_rate() {
        let mut p = ArrivalProcess::new(LoadPattern::constant(1000.0).unwrap(), Interarrival::Exponential, 1e9);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut prev = 0.0;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = p.next_arrival(&mut rng).unwrap();
            sum += t - prev;
            prev = t;
        }
        let mean = sum / n as f64;
        assert!((mean - 1000.0).abs() / 1000.0 < 0.005, "mean gap {mean}");
    }

    #[test]
    fn deterministic_gaps_are_exact() {
        let mut p = ArrivalProcess::new(LoadPattern::constant(100.0).unwrap(), Interarrival::Deterministic, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut prev = 0.0;
        for _ in 0..50 {
            let t = p.next_arrival(&mut rng).unwrap();
            assert!((t - prev - 10_000.0).abs() < 1e-6);
            prev = t;
        }
    }

    #[test]
    fn trace_plateaus_drive_rate() {
        let pattern = LoadPattern::trace(vec![(0.0, 100.0), (10.0, 200.0)]).unwrap();
        assert_eq!(pattern.rate_at(5.0), 100.0);
        assert_eq!(pattern.rate_at(10.0), 200.0);
        assert_eq!(pattern.rate_at(99.0), 200.0);
        let mut p = ArrivalProcess::new(pattern, Interarrival::Exponential, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut in_second = 0u32;
        loop {
            match p.next_arrival(&mut rng) {
                Ok(t) if t >= 10e6 => in_second += 1,
                Ok(_) => {}
                Err(WorkloadError::EndOfTrace) => break,
                Err(e) => panic!("{e}"),
            }
        }
        // Poisson(2000): 5% band is > 4 sigma.
        let rate = in_second as f64 / 10.0;
        assert!((rate - 200.0).abs() <= 10.0, "rate {rate}");
    }

    #[test]
    fn trace_csv_parsing() {
        let p = read_trace(&b"time_s,qps\n0,100\n10,200\n"[..]).unwrap();
        assert_eq!(p.points(), &[(0.0, 100.0), (10.0, 200.0)]);
        assert!(matches!(read_trace(&b""[..]), Err(WorkloadError::Schema(_))));
        assert!(matches!(
            read_trace(&b"time_s,qps\n"[..]),
            Err(WorkloadError::Schema(_))
        ));
        assert!(matches!(
            read_trace(&b"time_s,qps\n0,0\n"[..]),
            Err(WorkloadError::Schema(_))
        ));
    }

    #[test]
    fn diurnal_bounds() {
        let t = diurnal_trace(10_000.0, 60.0, 120.0, 1.0);
        assert_eq!(t.len(), 120);
        assert_eq!(t[0].1, 2000.0);
        assert!(t.iter().all(|p| (2000.0..=9000.0).contains(&p.1)));
        assert_eq!(t[30].1, 9000.0);
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        assert_eq!(read_trace(&buf[..]).unwrap().points(), &t[..]);
    }

    #[test]
    fn expected_arrivals_integrates_plateaus() {
        let p = LoadPattern::trace(vec![(0.0, 100.0), (10.0, 200.0)]).unwrap();
        assert_eq!(p.expected_arrivals(20.0), 3000.0);
        assert_eq!(p.expected_arrivals(5.0), 500.0);
    }
}
