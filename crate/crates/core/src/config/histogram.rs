//! Empirical processing-time PDFs.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ConfigError;

const PROBABILITY_TOLERANCE: f64 = 1e-6;

/// Discrete PDF over latency buckets `(lower, upper_bound_us]`, the first
/// bucket starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pdf {
    buckets: Vec<(f64, f64)>,
}

impl Pdf {
    /// Builds a PDF without checking it; call [`Pdf::validate`] before use.
    pub fn from_buckets(buckets: Vec<(f64, f64)>) -> Self {
        Pdf { buckets }
    }

    pub fn buckets(&self) -> &[(f64, f64)] {
        &self.buckets
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.buckets.is_empty() {
            return Err(ConfigError::schema("histogram", "no buckets"));
        }
        let mut prev = 0.0;
        for (i, &(ub, p)) in self.buckets.iter().enumerate() {
            if !(ub > 0.0) || !ub.is_finite() {
                return Err(ConfigError::schema(
                    "histogram",
                    format!("row {i}: upper_bound_us must be positive, got {ub}"),
                ));
            }
            if i > 0 && ub <= prev {
                return Err(ConfigError::schema(
                    "histogram",
                    format!("row {i}: upper bounds not strictly increasing ({prev} then {ub})"),
                ));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Probability(format!(
                    "histogram row {i}: probability {p} outside [0,1]"
                )));
            }
            prev = ub;
        }
        let total: f64 = self.buckets.iter().map(|b| b.1).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(ConfigError::Probability(format!(
                "histogram probabilities sum to {total}"
            )));
        }
        Ok(())
    }

    /// Inverse CDF with uniform interpolation inside the selected bucket.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut lower = 0.0;
        let mut cumulative = 0.0;
        for &(ub, p) in &self.buckets {
            if p > 0.0 && u <= cumulative + p {
                let frac = ((u - cumulative) / p).clamp(0.0, 1.0);
                return lower + frac * (ub - lower);
            }
            cumulative += p;
            lower = ub;
        }
        // Rounding left u above the accumulated mass.
        self.buckets.last().map_or(0.0, |b| b.0)
    }

    pub fn mean(&self) -> f64 {
        let mut lower = 0.0;
        let mut mean = 0.0;
        for &(ub, p) in &self.buckets {
            mean += p * 0.5 * (lower + ub);
            lower = ub;
        }
        mean
    }

    /// Discretizes an exponential distribution into `n` equal-width buckets
    /// spanning `[0, span_us]`; the residual tail mass goes to the last bucket.
    pub fn discretize_exponential(mean_us: f64, span_us: f64, n: usize) -> Pdf {
        let width = span_us / n as f64;
        let cdf = |x: f64| 1.0 - (-x / mean_us).exp();
        let mut buckets = Vec::with_capacity(n);
        let mut prev = 0.0;
        for i in 1..=n {
            let ub = width * i as f64;
            let mass = if i == n { 1.0 - prev } else { cdf(ub) - prev };
            prev += mass;
            buckets.push((ub, mass));
        }
        Pdf { buckets }
    }

    pub fn read_csv<R: Read>(reader: R, name: &str) -> Result<Pdf, ConfigError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| ConfigError::schema(name, e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["upper_bound_us", "probability"] {
            return Err(ConfigError::schema(
                name,
                format!(
                    "expected header `upper_bound_us,probability`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
        let mut buckets = Vec::new();
        for (i, row) in rdr.deserialize::<(f64, f64)>().enumerate() {
            let row = row.map_err(|e| ConfigError::schema(name, format!("row {i}: {e}")))?;
            buckets.push(row);
        }
        Ok(Pdf { buckets })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["upper_bound_us", "probability"])?;
        for &(ub, p) in &self.buckets {
            w.write_record([ub.to_string(), p.to_string()])?;
        }
        w.flush()
    }
}

/// Identifies one histogram: service, stage, optional execution path, and
/// optional frequency (in MHz so the key is totally ordered).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HistogramKey {
    pub service: String,
    pub stage_id: u32,
    pub path_id: Option<u32>,
    pub freq_mhz: Option<u32>,
}

impl HistogramKey {
    pub fn new(service: &str, stage_id: u32, path_id: Option<u32>, freq_ghz: Option<f64>) -> Self {
        HistogramKey {
            service: service.to_string(),
            stage_id,
            path_id,
            freq_mhz: freq_ghz.map(ghz_to_mhz),
        }
    }
}

impl std::fmt::Display for HistogramKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/stage {}", self.service, self.stage_id)?;
        if let Some(p) = self.path_id {
            write!(f, "/path {p}")?;
        }
        if let Some(mhz) = self.freq_mhz {
            write!(f, "@{mhz}MHz")?;
        }
        Ok(())
    }
}

pub fn ghz_to_mhz(ghz: f64) -> u32 {
    (ghz * 1000.0).round() as u32
}

pub type HistogramTable = BTreeMap<HistogramKey, Pdf>;

/// Checks every PDF in the table, collecting one error per offending key.
pub fn validate_histograms(table: &HistogramTable) -> Result<(), Vec<(HistogramKey, ConfigError)>> {
    let failures: Vec<_> = table
        .iter()
        .filter_map(|(k, pdf)| pdf.validate().err().map(|e| (k.clone(), e)))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures)
    }
}
