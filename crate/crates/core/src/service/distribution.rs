use rand::Rng;
use rand_distr::{Distribution as _, Exp, LogNormal};

use crate::config::Pdf;

/// A processing-time distribution in microseconds.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Exponential { mean_us: f64 },
    Deterministic { value_us: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Empirical(Pdf),
}

impl Distribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Exponential { mean_us } => {
                Exp::new(1.0 / mean_us).expect("validated positive mean").sample(rng)
            }
            Distribution::Deterministic { value_us } => *value_us,
            Distribution::Lognormal { mu, sigma } => LogNormal::new(*mu, *sigma).expect("validated sigma").sample(rng),
            Distribution::Empirical(pdf) => pdf.quantile(rng.random::<f64>()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Exponential { mean_us } => *mean_us,
            Distribution::Deterministic { value_us } => *value_us,
            Distribution::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Distribution::Empirical(pdf) => pdf.mean(),
        }
    }
}
