//! Closed forms for M/M/1, M/M/k and the max of N exponentials.
//!
//! Rates are in events per unit time; results come back in the same time
//! unit (`mu = 1.0` per ms gives ms).

use super::StatsError;

fn check_rates(lambda: f64, mu: f64) -> Result<(), StatsError> {
    if !(lambda >= 0.0 && lambda.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
        return Err(StatsError::InvalidParameter(format!("lambda={lambda}, mu={mu}")));
    }
    Ok(())
}

/// Mean and p99 sojourn of M/M/1.
pub fn oracle_mm1(lambda: f64, mu: f64) -> Result<(f64, f64), StatsError> {
    Ok((1.0 / stable_gap(lambda, mu, 1)?, oracle_mm1_quantile(lambda, mu, 0.99)?))
}

/// Sojourn quantile of M/M/1: exponential with rate `mu - lambda`.
pub fn oracle_mm1_quantile(lambda: f64, mu: f64, q: f64) -> Result<f64, StatsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(StatsError::InvalidParameter(format!("quantile {q}")));
    }
    Ok(-(1.0 - q).ln() / stable_gap(lambda, mu, 1)?)
}

fn stable_gap(lambda: f64, mu: f64, k: u32) -> Result<f64, StatsError> {
    check_rates(lambda, mu)?;
    let capacity = k as f64 * mu;
    if lambda >= capacity {
        return Err(StatsError::UnstableSystem { load: lambda, capacity });
    }
    Ok(capacity - lambda)
}

/// Probability an arrival waits in M/M/k (Erlang C).
pub fn oracle_erlang_c(lambda: f64, mu: f64, k: u32) -> Result<f64, StatsError> {
    if k == 0 {
        return Err(StatsError::InvalidParameter("k must be positive".into()));
    }
    stable_gap(lambda, mu, k)?;
    let a = lambda / mu;
    // Erlang B by recurrence, then convert.
    let mut b = 1.0;
    for i in 1..=k {
        b = a * b / (i as f64 + a * b);
    }
    let kf = k as f64;
    Ok(kf * b / (kf - a * (1.0 - b)))
}

pub fn oracle_mmk_mean_sojourn(lambda: f64, mu: f64, k: u32) -> Result<f64, StatsError> {
    let c = oracle_erlang_c(lambda, mu, k)?;
    Ok(c / stable_gap(lambda, mu, k)? + 1.0 / mu)
}

/// Sojourn quantile of M/M/k (FIFO): service plus an exponential wait
/// reached with probability C.
pub fn oracle_mmk_sojourn_quantile(lambda: f64, mu: f64, k: u32, q: f64) -> Result<f64, StatsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(StatsError::InvalidParameter(format!("quantile {q}")));
    }
    let c = oracle_erlang_c(lambda, mu, k)?;
    let a = stable_gap(lambda, mu, k)?;
    let tail = |t: f64| {
        let service = (-mu * t).exp();
        if (a - mu).abs() < 1e-12 * mu {
            (1.0 - c) * service + c * (1.0 + mu * t) * service
        } else {
            (1.0 - c) * service + c * (a * service - mu * (-a * t).exp()) / (a - mu)
        }
    };
    let target = 1.0 - q;
    let mut lo = 0.0;
    let mut hi = 1.0 / mu.min(a);
    while tail(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `t` solving `(1 - e^{-mu t})^n = p`: the p-quantile of the max of `n`
/// independent exponentials with rate `mu`.
pub fn oracle_fanout_max(mu: f64, n: u32, p: f64) -> Result<f64, StatsError> {
    if !(mu > 0.0) || n == 0 || !(p > 0.0 && p < 1.0) {
        return Err(StatsError::InvalidParameter(format!("mu={mu}, n={n}, p={p}")));
    }
    // 1 - p^{1/n} without cancellation.
    let one_minus = -((p.ln() / n as f64).exp_m1());
    Ok(-one_minus.ln() / mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mm1_values() {
        let (mean, p99) = oracle_mm1(0.5, 1.0).unwrap();
        assert!((mean - 2.0).abs() < 1e-12);
        assert!((p99 - 2.0 * 100f64.ln()).abs() < 1e-12);
        assert!(matches!(oracle_mm1(1.0, 1.0), Err(StatsError::UnstableSystem { .. })));
    }

    #[test]
    fn erlang_c_limits() {
        assert!(oracle_erlang_c(1e-9, 1.0, 4).unwrap() < 1e-9);
        // k = 1 reduces to rho.
        assert!((oracle_erlang_c(0.7, 1.0, 1).unwrap() - 0.7).abs() < 1e-12);
        // Textbook value: a = 2, k = 3 gives 4/9.
        assert!((oracle_erlang_c(2.0, 1.0, 3).unwrap() - 4.0 / 9.0).abs() < 1e-12);
        assert!(matches!(
            oracle_erlang_c(4.0, 1.0, 4),
            Err(StatsError::UnstableSystem { .. })
        ));
    }

    #[test]
    fn mmk_quantile_reduces_to_mm1() {
        let q = oracle_mmk_sojourn_quantile(0.5, 1.0, 1, 0.99).unwrap();
        assert!((q - oracle_mm1_quantile(0.5, 1.0, 0.99).unwrap()).abs() < 1e-9);
        let q = oracle_mmk_sojourn_quantile(1e-12, 1.0, 4, 0.99).unwrap();
        assert!((q - 100f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn fanout_root() {
        let t = oracle_fanout_max(1.0, 100, 0.99).unwrap();
        assert!((t - 9.21).abs() < 0.01, "{t}");
        assert!(((1.0 - (-t).exp()).powi(100) - 0.99).abs() < 1e-9);
        assert!((oracle_fanout_max(1.0, 1, 0.99).unwrap() - 100f64.ln()).abs() < 1e-9);
    }
}
