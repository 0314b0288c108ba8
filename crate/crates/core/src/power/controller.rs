use rand::Rng;

use super::PowerError;
use crate::config::PowerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Lower this tier by one DVFS level.
    SlowDown(usize),
    /// Raise this tier by one DVFS level.
    SpeedUp(usize),
    /// Fallback: every tier to its top level.
    AllMax,
}

/// What the controller needs to know about one tier's frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierFreq {
    pub current_ghz: f64,
    pub lower_ghz: Option<f64>,
    pub at_max: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub lo_ms: f64,
    pub hi_ms: f64,
    pub tuples: Vec<Vec<f64>>,
    pub failing: Vec<Vec<f64>>,
    pub preference: f64,
}

/// `f` dominates `t` when it is no larger in every tier: a target at least
/// as relaxed as a failed one.
fn dominated_by(t: &[f64], f: &[f64]) -> bool {
    f.iter().zip(t).all(|(fi, ti)| fi <= ti)
}

impl Bucket {
    pub fn admits(&self, tuple: &[f64]) -> bool {
        !self.failing.iter().any(|f| dominated_by(tuple, f))
    }

    /// Most recently inserted tuple that no failing tuple dominates.
    pub fn latest_admissible(&self) -> Option<&Vec<f64>> {
        self.tuples.iter().rev().find(|t| self.admits(t))
    }
}

#[derive(Debug, Clone)]
pub struct PowerManager {
    qos_ms: f64,
    recheck_cycles: u32,
    pref_increase: f64,
    pref_decrease: f64,
    pref_min: f64,
    pref_max: f64,
    buckets: Vec<Bucket>,
    target: Option<(usize, Vec<f64>)>,
    success_cycles: u32,
    tiers: usize,
}

impl PowerManager {
    pub fn new(spec: &PowerSpec, tiers: usize) -> Self {
        let n = spec.bucket_count.max(1);
        let width = 2.0 * spec.qos_target_ms / n as f64;
        let buckets = (0..n)
            .map(|i| Bucket {
                lo_ms: i as f64 * width,
                hi_ms: (i + 1) as f64 * width,
                tuples: Vec::new(),
                failing: Vec::new(),
                preference: 1.0,
            })
            .collect();
        PowerManager {
            qos_ms: spec.qos_target_ms,
            recheck_cycles: spec.recheck_cycles,
            pref_increase: spec.pref_increase,
            pref_decrease: spec.pref_decrease,
            pref_min: spec.pref_min,
            pref_max: spec.pref_max,
            buckets,
            target: None,
            success_cycles: 0,
            tiers,
        }
    }

    pub fn qos_ms(&self) -> f64 {
        self.qos_ms
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    pub fn target(&self) -> Option<(usize, &[f64])> {
        self.target.as_ref().map(|(b, t)| (*b, t.as_slice()))
    }

    pub fn set_target(&mut self, bucket: usize, tuple: Vec<f64>) {
        assert_eq!(tuple.len(), self.tiers);
        self.target = Some((bucket, tuple));
    }

    pub fn set_preference(&mut self, bucket: usize, w: f64) {
        self.buckets[bucket].preference = w.clamp(self.pref_min, self.pref_max);
    }

    /// Bucket holding an end-to-end p99; anything past the range goes to the top.
    pub fn bucket_index(&self, e2e_ms: f64) -> usize {
        let width = self.buckets[0].hi_ms;
        ((e2e_ms / width).floor().max(0.0) as usize).min(self.buckets.len() - 1)
    }

    /// Inserts `tuple` unless a failing tuple of the bucket dominates it.
    pub fn insert_tuple(&mut self, bucket: usize, tuple: Vec<f64>) -> bool {
        let b = &mut self.buckets[bucket];
        if b.admits(&tuple) {
            b.tuples.push(tuple);
            true
        } else {
            false
        }
    }

    pub fn record_failure(&mut self, bucket: usize, tuple: Vec<f64>) {
        self.buckets[bucket].failing.push(tuple);
    }

    fn scale_preference(&mut self, bucket: usize, factor: f64) {
        let b = &mut self.buckets[bucket];
        b.preference = (b.preference * factor).clamp(self.pref_min, self.pref_max);
    }

    /// Draws a bucket with probability proportional to its preference among
    /// buckets holding an admissible tuple, and returns that tuple.
    pub fn choose_bucket<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, Vec<f64>), PowerError> {
        let candidates: Vec<(usize, &Vec<f64>, f64)> = self
            .buckets
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.latest_admissible().map(|t| (i, t, b.preference)))
            .collect();
        if candidates.is_empty() {
            return Err(PowerError::NoAdmissibleTuple);
        }
        let total: f64 = candidates.iter().map(|c| c.2).sum();
        let mut u = rng.random::<f64>() * total;
        for &(i, t, w) in &candidates {
            if u < w {
                return Ok((i, t.clone()));
            }
            u -= w;
        }
        let &(i, t, _) = candidates.last().expect("non-empty");
        Ok((i, t.clone()))
    }

    /// One decision window. `tier_p99_ms` and `tiers` are indexed by tier.
    pub fn pm_step<R: Rng + ?Sized>(
        &mut self,
        e2e_p99_ms: f64,
        tier_p99_ms: &[f64],
        tiers: &[TierFreq],
        rng: &mut R,
    ) -> Vec<Action> {
        assert_eq!(tier_p99_ms.len(), self.tiers);
        assert_eq!(tiers.len(), self.tiers);
        if e2e_p99_ms <= self.qos_ms {
            let observed = self.bucket_index(e2e_p99_ms);
            self.insert_tuple(observed, tier_p99_ms.to_vec());
            if self.target.is_none() {
                self.target = Some((observed, tier_p99_ms.to_vec()));
            }
            let (tb, _) = self.target.as_ref().expect("set above");
            self.scale_preference(*tb, self.pref_increase);
            self.success_cycles += 1;
            if self.success_cycles >= self.recheck_cycles {
                self.success_cycles = 0;
                if let Ok(t) = self.choose_bucket(rng) {
                    self.target = Some(t);
                }
            }
            let (_, target) = self.target.as_ref().expect("set above");
            let mut best: Option<(usize, f64)> = None;
            for (i, tf) in tiers.iter().enumerate() {
                let Some(lower) = tf.lower_ghz else { continue };
                let slack = target[i] - tier_p99_ms[i];
                let step_cost = tier_p99_ms[i] * (tf.current_ghz / lower - 1.0);
                if slack > step_cost && slack > 0.0 && best.is_none_or(|(_, s)| slack > s) {
                    best = Some((i, slack));
                }
            }
            best.map(|(i, _)| vec![Action::SlowDown(i)]).unwrap_or_default()
        } else {
            self.success_cycles = 0;
            if let Some((b, t)) = self.target.take() {
                self.scale_preference(b, self.pref_decrease);
                self.record_failure(b, t);
            }
            match self.choose_bucket(rng) {
                Ok((b, t)) => {
                    let actions = (0..self.tiers)
                        .filter(|&i| tier_p99_ms[i] > t[i] && !tiers[i].at_max)
                        .map(Action::SpeedUp)
                        .collect();
                    self.target = Some((b, t));
                    actions
                }
                Err(_) => vec![Action::AllMax],
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pm(tiers: usize) -> PowerManager {
        PowerManager::new(&PowerSpec::new(5.0, 0.1), tiers)
    }

    fn freq(lv: usize) -> TierFreq {
        let levels = [1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6];
        TierFreq {
            current_ghz: levels[lv],
            lower_ghz: lv.checked_sub(1).map(|l| levels[l]),
            at_max: lv == levels.len() - 1,
        }
    }

    #[test]
    fn buckets_cover_twice_qos() {
        let p = pm(1);
        assert_eq!(p.buckets().len(), 10);
        assert_eq!(p.bucket_index(0.0), 0);
        assert_eq!(p.bucket_index(0.99), 0);
        assert_eq!(p.bucket_index(1.0), 1);
        assert_eq!(p.bucket_index(9.99), 9);
        assert_eq!(p.bucket_index(50.0), 9);
    }

    #[test]
    fn violation_fails_target_and_speeds_up_laggards() {
        let mut p = pm(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Two meeting windows: the second tuple becomes admissible history.
        p.pm_step(2.0, &[1.0, 1.0], &[freq(7), freq(7)], &mut rng);
        p.pm_step(2.5, &[0.8, 1.5], &[freq(7), freq(7)], &mut rng);
        let (tb, tt) = p.target().map(|(b, t)| (b, t.to_vec())).unwrap();
        let actions = p.pm_step(7.0, &[3.0, 3.0], &[freq(3), freq(3)], &mut rng);
        assert!(p.buckets()[tb].failing.contains(&tt));
        assert_eq!(actions, vec![Action::SpeedUp(0), Action::SpeedUp(1)]);
    }

    #[test]
    fn no_slack_no_slowdown() {
        let mut p = pm(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = p.pm_step(2.0, &[1.0, 1.0], &[freq(7), freq(7)], &mut rng);
        assert!(a.is_empty());
    }

    #[test]
    fn argmax_slack_slows_exactly_one_tier() {
        let mut p = pm(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        p.set_target(2, vec![2.5, 1.0]);
        let a = p.pm_step(2.0, &[0.5, 0.5], &[freq(7), freq(7)], &mut rng);
        assert_eq!(a, vec![Action::SlowDown(0)]);
    }

    #[test]
    fn fallback_when_nothing_admissible() {
        let mut p = pm(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(p.pm_step(9.0, &[9.0], &[freq(0)], &mut rng), vec![Action::AllMax]);
        assert!(matches!(p.choose_bucket(&mut rng), Err(PowerError::NoAdmissibleTuple)));
    }

    #[test]
    fn dominated_tuples_are_rejected() {
        let mut p = pm(2);
        p.record_failure(3, vec![1.0, 2.0]);
        assert!(!p.insert_tuple(3, vec![1.0, 2.0]));
        assert!(!p.insert_tuple(3, vec![1.5, 2.5]));
        assert!(p.insert_tuple(3, vec![0.5, 2.5]));
        assert!(p.insert_tuple(4, vec![1.5, 2.5]));
    }

    #[test]
    fn choose_bucket_follows_preferences() {
        let mut p = pm(1);
        p.insert_tuple(0, vec![0.1]);
        p.insert_tuple(1, vec![0.2]);
        p.set_preference(0, 2.0);
        p.set_preference(1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let zeros = (0..n).filter(|_| p.choose_bucket(&mut rng).unwrap().0 == 0).count();
        let ratio = zeros as f64 / (n - zeros) as f64;
        assert!((ratio / 2.0 - 1.0).abs() < 0.02, "{ratio}");
        let mut q = pm(1);
        q.insert_tuple(4, vec![0.3]);
        assert_eq!(q.choose_bucket(&mut rng).unwrap(), (4, vec![0.3]));
    }

    #[test]
    fn preferences_stay_clamped() {
        let mut p = pm(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            p.pm_step(1.0, &[0.5], &[freq(7)], &mut rng);
        }
        assert!(p.buckets().iter().all(|b| b.preference <= 100.0));
        for _ in 0..200 {
            p.pm_step(20.0, &[5.0], &[freq(7)], &mut rng);
        }
        assert!(p
            .buckets()
            .iter()
            .all(|b| b.preference >= 0.01 && b.preference <= 100.0));
    }
}
