//! Monte Carlo simulator of the slotted queueing network.
//!
//! Every slot, each backlogged source attempts with its access probability,
//! receivers decide success from the SIR of the current geometry, successful
//! packets leave, and Bernoulli arrivals join the queues. Two success models
//! are available: [`SimulationMode::Spatial`] draws positions on a torus every
//! slot, [`SimulationMode::MeanField`] uses the closed-form SIR law for the
//! current attempting densities.

mod engine;
mod spatial;
mod stats;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AnalysisMode, NetworkConfig};

pub use engine::{run_replication, ClassCounters, ReplicationStats};
pub use spatial::Torus;
pub use stats::{estimate_confidence, student_t_975, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMode {
    Spatial,
    MeanField,
}

/// How Rayleigh fading enters the spatial success decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingModel {
    /// Draw an `Exp(1)` gain for every transmitter–receiver pair.
    Sampled,
    /// Decide success with its exact probability given the geometry,
    /// `Π_j 1/(1 + θ (P_j/P_i)(r_i/d_ij)^α)`; same law, one uniform per link.
    Marginalized,
}

/// Distance binning of one class's attempts, for checking the conditional
/// success law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceBins {
    pub class: usize,
    /// Increasing bin edges; attempts outside `[first, last)` are not binned.
    pub edges: Vec<f64>,
}

impl DistanceBins {
    /// Bins equally spaced in probability covering the central `coverage`
    /// mass of the Rayleigh link-distance law with mean `mean_distance`.
    pub fn central_quantiles(class: usize, mean_distance: f64, coverage: f64, bins: usize) -> Self {
        let lo = (1.0 - coverage) / 2.0;
        let edges = (0..=bins)
            .map(|i| rayleigh_quantile(mean_distance, lo + coverage * i as f64 / bins as f64))
            .collect();
        Self { class, edges }
    }

    fn index(&self, r: f64) -> Option<usize> {
        let n = self.edges.len();
        if n < 2 || r < self.edges[0] || r >= self.edges[n - 1] {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= r) - 1)
    }
}

/// Quantile of the Rayleigh law with the given mean.
pub fn rayleigh_quantile(mean_distance: f64, q: f64) -> f64 {
    (-4.0 * mean_distance * mean_distance * (1.0 - q).ln() / std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSpec {
    pub config: NetworkConfig<f64>,
    /// Links of the densest class; other classes scale with their density.
    pub target_links_per_class: usize,
    pub slots: u64,
    pub warmup_fraction: f64,
    pub mode: SimulationMode,
    pub seed: u64,
    pub replications: usize,
    pub fading: FadingModel,
    /// Every source always has a packet (dummy packets); queues are not tracked.
    pub saturated: bool,
    /// Number of evenly spaced slots recorded in the queue trajectory.
    pub trajectory_points: usize,
    pub distance_bins: Option<DistanceBins>,
    /// Per-source queue length above which the run aborts.
    pub max_queue: usize,
}

impl SimulationSpec {
    pub fn new(config: NetworkConfig<f64>) -> Self {
        Self {
            config,
            target_links_per_class: 400,
            slots: 100_000,
            warmup_fraction: 0.2,
            mode: SimulationMode::Spatial,
            seed: 0,
            replications: 10,
            fading: FadingModel::Marginalized,
            saturated: false,
            trajectory_points: 200,
            distance_bins: None,
            max_queue: 1 << 22,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate(AnalysisMode::Simulation)?;
        let bad = |msg: String| Err(Error::InvalidSimulation(msg));
        if self.slots < 1000 {
            return bad(format!("slots must be at least 1000, got {}", self.slots));
        }
        if self.target_links_per_class < 50 {
            return bad(format!("target_links_per_class must be at least 50, got {}", self.target_links_per_class));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!("warmup_fraction must lie in [0, 1), got {}", self.warmup_fraction));
        }
        if self.replications == 0 {
            return bad("at least one replication is required".into());
        }
        if let Some(b) = &self.distance_bins {
            if b.class >= self.config.num_classes() {
                return bad(format!("distance bins refer to class {} which does not exist", b.class));
            }
            if b.edges.len() < 2 || b.edges.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("distance bin edges must be strictly increasing with at least two edges".into());
            }
        }
        if let Some((i, _)) = self.links_per_class().iter().enumerate().find(|(_, &m)| m == 0) {
            return bad(format!("class {i} gets no links at this density ratio; raise target_links_per_class"));
        }
        Ok(())
    }

    /// Side of the square torus: the densest class gets the target link count.
    pub fn torus_side(&self) -> f64 {
        let lambda_max = self.config.classes.iter().map(|c| c.lambda).fold(0.0, f64::max);
        (self.target_links_per_class as f64 / lambda_max).sqrt()
    }

    /// Fixed number of links per class, `round(λ_n L²)`.
    pub fn links_per_class(&self) -> Vec<usize> {
        let area = self.torus_side().powi(2);
        self.config.classes.iter().map(|c| (c.lambda * area).round() as usize).collect()
    }

    pub fn warmup_slots(&self) -> u64 {
        (self.slots as f64 * self.warmup_fraction).floor() as u64
    }

    /// Multi-class access probabilities below 1 have no closed form to check against.
    pub fn unvalidated_regime(&self) -> bool {
        self.config.num_classes() > 1 && self.config.classes.iter().any(|c| c.access_prob < 1.0)
    }
}

/// One row of the thinned queue trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub slot: u64,
    pub class: usize,
    pub mean_queue_len: f64,
    /// Attempts since the previous recorded slot.
    pub attempts: u64,
    /// Successes since the previous recorded slot.
    pub successes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceBinStat {
    pub lower: f64,
    pub upper: f64,
    pub attempts: u64,
    pub successes: u64,
}

impl DistanceBinStat {
    pub fn success_rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.successes as f64 / self.attempts as f64)
    }

    /// Normal-approximation 95% binomial interval `(lo, hi)`.
    pub fn wald_interval(&self) -> Option<(f64, f64)> {
        let p = self.success_rate()?;
        let half = 1.96 * (p * (1.0 - p) / self.attempts as f64).sqrt();
        Some((p - half, p + half))
    }

    /// Wilson 95% score interval, well behaved near 0 and 1.
    pub fn wilson_interval(&self) -> Option<(f64, f64)> {
        let p = self.success_rate()?;
        let n = self.attempts as f64;
        let z = 1.959_963_984_540_054_f64;
        let z2 = z * z;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
        Some((centre - half, centre + half))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    /// Empirical `P(SIR > θ | attempt)`; `None` when nothing was attempted.
    pub success_prob_hat: Option<Estimate>,
    /// Mean sojourn in slots of packets departing in the measurement window.
    pub mean_delay_hat: Option<Estimate>,
    /// Least-squares slope of the mean queue length over the last half of the run.
    pub drift_estimate: Option<Estimate>,
    pub drift_per_replication: Vec<f64>,
    pub attempts: u64,
    pub successes: u64,
    pub delivered: u64,
    /// Mean sampled link distance over all attempts.
    pub mean_link_distance: Option<f64>,
    /// Link distances redrawn because they exceeded a quarter of the torus side.
    pub resampled_links: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub mode: SimulationMode,
    pub replications: usize,
    /// False when fewer than two replications ran and intervals are omitted.
    pub confidence_available: bool,
    pub unvalidated_regime: bool,
    pub torus_side: f64,
    pub links_per_class: Vec<usize>,
    pub classes: Vec<ClassSummary>,
    /// Thinned trajectory of the first replication.
    pub queue_trajectory: Vec<TrajectoryPoint>,
    /// Pooled over replications.
    pub distance_bins: Option<Vec<DistanceBinStat>>,
}

/// Runs all replications in the spec's mode.
pub fn run(spec: &SimulationSpec) -> Result<SimulationResult> {
    spec.validate()?;
    let reps = run_replications(spec)?;
    Ok(estimate_confidence(spec, &reps))
}

/// Runs all replications with the mean-field success model.
pub fn run_mean_field(spec: &SimulationSpec) -> Result<SimulationResult> {
    let mut spec = spec.clone();
    spec.mode = SimulationMode::MeanField;
    run(&spec)
}

/// Replication `i` uses stream `i` of the spec's seed, so results do not
/// depend on how replications are scheduled.
pub fn run_replications(spec: &SimulationSpec) -> Result<Vec<ReplicationStats>> {
    use rayon::prelude::*;
    spec.validate()?;
    (0..spec.replications)
        .into_par_iter()
        .map(|i| run_replication(spec, i as u64))
        .collect()
}

/// Writes the trajectory as CSV with header `slot,class,mean_queue_len,attempts,successes`.
pub fn write_trajectory_csv<W: std::io::Write>(mut w: W, result: &SimulationResult) -> std::io::Result<()> {
    writeln!(w, "slot,class,mean_queue_len,attempts,successes")?;
    for p in &result.queue_trajectory {
        writeln!(w, "{},{},{},{},{}", p.slot, p.class, p.mean_queue_len, p.attempts, p.successes)?;
    }
    Ok(())
}

pub fn summary_json(result: &SimulationResult) -> String {
    serde_json::to_string_pretty(result).expect("result serializes")
}
