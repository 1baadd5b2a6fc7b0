//! One replication of the slotted queueing dynamics.
//!
//! Slot order: backlogged sources draw their attempts, receivers decide
//! success, successful head-of-line packets depart, then Bernoulli arrivals
//! join. A packet arriving in slot `t` is eligible from `t + 1`; its delay is
//! `departure − eligible + 1`, so a packet served at its first chance counts 1.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::spatial::{marginalized_success, sampled_success, ActiveLinks, PathLoss, Torus};
use super::{FadingModel, SimulationMode, SimulationSpec, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::special::reflection_product;

/// Raw per-class counters of one replication.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassCounters {
    /// Attempts and successes inside the measurement window.
    pub attempts: u64,
    pub successes: u64,
    /// Departures inside the measurement window and their summed delay.
    pub delivered: u64,
    pub delay_sum: u64,
    /// Least-squares slope of the per-source mean queue length, last half of the run.
    pub drift: Option<f64>,
    pub distance_sum: f64,
    pub distance_count: u64,
    pub resampled: u64,
}

impl ClassCounters {
    pub fn success_rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.successes as f64 / self.attempts as f64)
    }

    pub fn mean_delay(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.delay_sum as f64 / self.delivered as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStats {
    pub classes: Vec<ClassCounters>,
    pub trajectory: Vec<TrajectoryPoint>,
    /// `(attempts, successes)` per distance bin, measurement window only.
    pub bins: Option<Vec<(u64, u64)>>,
}

/// Online simple linear regression of `y` on `x`.
#[derive(Debug, Default, Clone, Copy)]
struct SlopeFit {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
}

impl SlopeFit {
    fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    fn slope(&self) -> Option<f64> {
        let den = self.n * self.sxx - self.sx * self.sx;
        (self.n >= 2.0 && den > 0.0).then(|| (self.n * self.sxy - self.sx * self.sy) / den)
    }
}

struct ClassState {
    links: usize,
    access: f64,
    arrival: f64,
    power: f64,
    theta: f64,
    mean_distance: f64,
    queues: Vec<VecDeque<u32>>,
    backlog: u64,
    fit: SlopeFit,
    window_attempts: u64,
    window_successes: u64,
    since_attempts: u64,
    since_successes: u64,
}

/// Receiver offset with a Rayleigh length of the given mean and a uniform
/// direction: two centred normals with `σ = R̄·sqrt(2/π)`. Redrawn when the
/// length exceeds `cap`.
fn link_offset<R: Rng>(rng: &mut R, mean: f64, cap: Option<f64>, resampled: &mut u64) -> (f64, f64) {
    let sigma = mean * std::f64::consts::FRAC_2_PI.sqrt();
    loop {
        let dx: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
        let dy: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
        match cap {
            Some(c) if dx * dx + dy * dy > c * c => *resampled += 1,
            _ => return (dx, dy),
        }
    }
}

/// Runs replication `rep` of `spec` on stream `rep` of the spec's seed.
pub fn run_replication(spec: &SimulationSpec, rep: u64) -> Result<ReplicationStats> {
    spec.validate()?;
    if spec.slots > u32::MAX as u64 {
        return Err(Error::InvalidSimulation(format!("slots must not exceed {}", u32::MAX)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(rep);

    let cfg = &spec.config;
    let n_classes = cfg.num_classes();
    let delta = 2.0 / cfg.alpha;
    let gamma_prod = reflection_product(delta);
    let torus = Torus::new(spec.torus_side());
    let loss = PathLoss::new(cfg.alpha);
    let cap = (spec.mode == SimulationMode::Spatial).then_some(torus.side / 4.0);
    let counts = spec.links_per_class();

    let mut states: Vec<ClassState> = cfg
        .classes
        .iter()
        .zip(&counts)
        .map(|(c, &m)| ClassState {
            links: m,
            access: c.access_prob,
            arrival: c.arrival_rate,
            power: c.power,
            theta: c.sir_threshold,
            mean_distance: c.mean_link_distance,
            queues: if spec.saturated { Vec::new() } else { vec![VecDeque::new(); m] },
            backlog: 0,
            fit: SlopeFit::default(),
            window_attempts: 0,
            window_successes: 0,
            since_attempts: 0,
            since_successes: 0,
        })
        .collect();
    let mut counters = vec![ClassCounters::default(); n_classes];

    let warmup = spec.warmup_slots();
    let drift_from = spec.slots / 2;
    let stride = (spec.slots / spec.trajectory_points.max(1) as u64).max(1);
    let mut trajectory = Vec::with_capacity(spec.trajectory_points * n_classes);
    let mut bins = spec.distance_bins.as_ref().map(|b| vec![(0u64, 0u64); b.edges.len() - 1]);

    let mut links = ActiveLinks::default();
    let mut success = Vec::new();
    let mut attempting = vec![0usize; n_classes];
    let mut field_rate = vec![0.0; n_classes];

    for t in 0..spec.slots {
        let in_window = t >= warmup;

        // attempts
        links.clear();
        attempting.iter_mut().for_each(|a| *a = 0);
        for (n, st) in states.iter().enumerate() {
            for s in 0..st.links {
                let backlogged = spec.saturated || !st.queues[s].is_empty();
                if !backlogged || (st.access < 1.0 && rng.random::<f64>() >= st.access) {
                    continue;
                }
                let (dx, dy) = link_offset(&mut rng, st.mean_distance, cap, &mut counters[n].resampled);
                match spec.mode {
                    SimulationMode::Spatial => links.push(&mut rng, &torus, n, s, st.power, dx, dy),
                    SimulationMode::MeanField => links.push_distance(n, s, st.power, (dx * dx + dy * dy).sqrt()),
                }
                attempting[n] += 1;
            }
        }

        // success decisions
        success.clear();
        match spec.mode {
            SimulationMode::Spatial => {
                for i in 0..links.len() {
                    let theta = states[links.class[i]].theta;
                    let ok = match spec.fading {
                        FadingModel::Marginalized => {
                            let u = 1.0 - rng.random::<f64>();
                            marginalized_success(&links, i, &torus, loss, theta, u)
                        }
                        FadingModel::Sampled => sampled_success(&links, i, &torus, loss, theta, &mut rng),
                    };
                    success.push(ok);
                }
            }
            SimulationMode::MeanField => {
                // E[exp(−c r²)] over the Rayleigh law equals the closed-form
                // success probability for the current attempting densities.
                let load: f64 = states
                    .iter()
                    .zip(&cfg.classes)
                    .zip(&attempting)
                    .map(|((st, c), &k)| st.power.powf(delta) * c.lambda * k as f64 / st.links as f64)
                    .sum();
                for (st, rate) in states.iter().zip(field_rate.iter_mut()) {
                    *rate = std::f64::consts::PI * gamma_prod * st.theta.powf(delta) * load / st.power.powf(delta);
                }
                for i in 0..links.len() {
                    let r = links.distance[i];
                    let u = rng.random::<f64>();
                    success.push(u < (-field_rate[links.class[i]] * r * r).exp());
                }
            }
        }

        // departures and counters
        for i in 0..links.len() {
            let n = links.class[i];
            let r = links.distance[i];
            let ok = success[i];
            let st = &mut states[n];
            let ct = &mut counters[n];
            ct.distance_sum += r;
            ct.distance_count += 1;
            st.since_attempts += 1;
            st.since_successes += ok as u64;
            if in_window {
                st.window_attempts += 1;
                st.window_successes += ok as u64;
                if let (Some(b), Some(spec_bins)) = (bins.as_mut(), spec.distance_bins.as_ref()) {
                    if spec_bins.class == n {
                        if let Some(k) = spec_bins.index(r) {
                            b[k].0 += 1;
                            b[k].1 += ok as u64;
                        }
                    }
                }
            }
            if ok && !spec.saturated {
                let eligible = st.queues[links.source[i]].pop_front().expect("attempting source is backlogged");
                st.backlog -= 1;
                if in_window {
                    ct.delivered += 1;
                    ct.delay_sum += t - eligible as u64 + 1;
                }
            }
        }

        // arrivals
        if !spec.saturated {
            for (n, st) in states.iter_mut().enumerate() {
                if st.arrival <= 0.0 {
                    continue;
                }
                for s in 0..st.links {
                    if rng.random::<f64>() < st.arrival {
                        let q = &mut st.queues[s];
                        if q.len() >= spec.max_queue {
                            return Err(Error::QueueOverflow { class: n, slot: t, limit: spec.max_queue });
                        }
                        q.push_back((t + 1) as u32);
                        st.backlog += 1;
                    }
                }
            }
        }

        if t >= drift_from && !spec.saturated {
            let x = (t - drift_from) as f64;
            for st in states.iter_mut() {
                st.fit.push(x, st.backlog as f64 / st.links as f64);
            }
        }

        if (t + 1) % stride == 0 && trajectory.len() < spec.trajectory_points * n_classes {
            for (n, st) in states.iter_mut().enumerate() {
                trajectory.push(TrajectoryPoint {
                    slot: t,
                    class: n,
                    mean_queue_len: st.backlog as f64 / st.links as f64,
                    attempts: st.since_attempts,
                    successes: st.since_successes,
                });
                st.since_attempts = 0;
                st.since_successes = 0;
            }
        }
    }

    for (st, ct) in states.iter().zip(counters.iter_mut()) {
        ct.attempts = st.window_attempts;
        ct.successes = st.window_successes;
        ct.drift = if spec.saturated { None } else { st.fit.slope() };
    }
    Ok(ReplicationStats { classes: counters, trajectory, bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NetworkConfig, TrafficClass};

    fn single(phi_lambda: f64, a: f64, p: f64) -> NetworkConfig<f64> {
        let mut c = TrafficClass::with_contention(4.0, phi_lambda, 1.0, 1.0, a);
        c.access_prob = p;
        NetworkConfig::new(4.0, vec![c]).unwrap()
    }

    fn spec(cfg: NetworkConfig<f64>, mode: SimulationMode, slots: u64) -> SimulationSpec {
        let mut s = SimulationSpec::new(cfg);
        s.mode = mode;
        s.slots = slots;
        s.replications = 1;
        s
    }

    #[test]
    fn slope_fit_recovers_line() {
        let mut f = SlopeFit::default();
        for i in 0..10 {
            f.push(i as f64, 3.0 + 0.5 * i as f64);
        }
        assert!((f.slope().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(SlopeFit::default().slope(), None);
    }

    #[test]
    fn zero_arrivals_never_transmit() {
        let s = spec(single(1.0, 0.0, 1.0), SimulationMode::Spatial, 2000);
        let rep = run_replication(&s, 0).unwrap();
        assert_eq!(rep.classes[0].attempts, 0);
        assert_eq!(rep.classes[0].success_rate(), None);
        assert!(rep.trajectory.iter().all(|p| p.mean_queue_len == 0.0));
    }

    #[test]
    fn deterministic_per_stream() {
        let s = spec(single(1.0, 0.2, 1.0), SimulationMode::Spatial, 2000);
        let a = run_replication(&s, 3).unwrap();
        let b = run_replication(&s, 3).unwrap();
        let c = run_replication(&s, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn isolated_geo_queue_delay() {
        // vanishing contention: success ≈ 1 so the mean delay is ≈ (1−a)/(p−a)
        let (a, p) = (0.3, 0.6);
        let mut s = spec(single(1e-9, a, p), SimulationMode::MeanField, 200_000);
        s.target_links_per_class = 50;
        let rep = run_replication(&s, 0).unwrap();
        let d = rep.classes[0].mean_delay().unwrap();
        let expect = (1.0 - a) / (p - a);
        assert!((d - expect).abs() / expect < 0.02, "{d} vs {expect}");
    }

    #[test]
    fn overflow_is_reported() {
        let mut s = spec(single(1.0, 0.9, 1.0), SimulationMode::MeanField, 5000);
        s.max_queue = 10;
        assert!(matches!(run_replication(&s, 0), Err(Error::QueueOverflow { class: 0, .. })));
    }
}
