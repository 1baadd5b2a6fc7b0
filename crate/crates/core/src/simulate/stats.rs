//! Replication averages and Student-t intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::engine::ReplicationStats;
use super::{ClassSummary, DistanceBinStat, SimulationResult, SimulationSpec};

/// Mean across replications with a 95% half-width when at least two are available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_half_width: Option<f64>,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ci_half_width = (n >= 2).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            student_t_975(n - 1) * (var / n as f64).sqrt()
        });
        Some(Self { mean, ci_half_width, samples: n })
    }

    pub fn lower(&self) -> Option<f64> {
        self.ci_half_width.map(|h| self.mean - h)
    }

    pub fn upper(&self) -> Option<f64> {
        self.ci_half_width.map(|h| self.mean + h)
    }

    /// Whether `x` lies in the closed interval; false without an interval.
    pub fn contains(&self, x: f64) -> bool {
        match self.ci_half_width {
            Some(h) => (x - self.mean).abs() <= h,
            None => false,
        }
    }
}

/// 0.975 quantile of Student's t with `df` degrees of freedom.
pub fn student_t_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Combines replications into the reported result.
pub fn estimate_confidence(spec: &SimulationSpec, reps: &[ReplicationStats]) -> SimulationResult {
    let n_classes = spec.config.num_classes();
    let classes = (0..n_classes)
        .map(|n| {
            let per: Vec<_> = reps.iter().map(|r| &r.classes[n]).collect();
            let collect = |f: &dyn Fn(&super::engine::ClassCounters) -> Option<f64>| -> Vec<f64> {
                per.iter().filter_map(|c| f(c)).collect()
            };
            let drift = collect(&|c| c.drift);
            let distance_sum: f64 = per.iter().map(|c| c.distance_sum).sum();
            let distance_count: u64 = per.iter().map(|c| c.distance_count).sum();
            ClassSummary {
                success_prob_hat: Estimate::from_samples(&collect(&|c| c.success_rate())),
                mean_delay_hat: Estimate::from_samples(&collect(&|c| c.mean_delay())),
                drift_estimate: Estimate::from_samples(&drift),
                drift_per_replication: drift,
                attempts: per.iter().map(|c| c.attempts).sum(),
                successes: per.iter().map(|c| c.successes).sum(),
                delivered: per.iter().map(|c| c.delivered).sum(),
                mean_link_distance: (distance_count > 0).then(|| distance_sum / distance_count as f64),
                resampled_links: per.iter().map(|c| c.resampled).sum(),
            }
        })
        .collect();

    let distance_bins = spec.distance_bins.as_ref().map(|b| {
        b.edges
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (attempts, successes) = reps
                    .iter()
                    .filter_map(|r| r.bins.as_ref().map(|v| v[k]))
                    .fold((0, 0), |acc, (a, s)| (acc.0 + a, acc.1 + s));
                DistanceBinStat { lower: w[0], upper: w[1], attempts, successes }
            })
            .collect()
    });

    SimulationResult {
        mode: spec.mode,
        replications: reps.len(),
        confidence_available: reps.len() >= 2,
        unvalidated_regime: spec.unvalidated_regime(),
        torus_side: spec.torus_side(),
        links_per_class: spec.links_per_class(),
        classes,
        queue_trajectory: reps.first().map(|r| r.trajectory.clone()).unwrap_or_default(),
        distance_bins,
    }
}
