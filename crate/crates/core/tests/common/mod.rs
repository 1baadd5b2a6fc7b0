//! Reference formulas written independently of the library, used as test oracles.
#![allow(dead_code)]

use aloha_core::{NetworkConfig, TrafficClass};
use rand::Rng;
use statrs::function::gamma::gamma;

pub fn phi(alpha: f64, r: f64, theta: f64) -> f64 {
    let d = 2.0 / alpha;
    4.0 * gamma(1.0 + d) * gamma(1.0 - d) * r * r * theta.powf(d)
}

pub fn phis(cfg: &NetworkConfig) -> Vec<f64> {
    cfg.classes.iter().map(|c| phi(cfg.alpha, c.mean_link_distance, c.sir_threshold)).collect()
}

/// Single class with saturated interferers of aggregate weight `zeta`.
pub fn single_bound(phi_lambda: f64, phi: f64, zeta: f64, p: f64) -> f64 {
    p / (1.0 + phi_lambda * p + phi * zeta)
}

pub fn single_delay(phi_lambda: f64, phi: f64, zeta: f64, p: f64, a: f64) -> f64 {
    (1.0 - a) * (1.0 + phi * zeta) / (p - (1.0 + phi_lambda * p + phi * zeta) * a)
}

pub fn single_success(phi_lambda: f64, phi: f64, zeta: f64, a: f64) -> f64 {
    (1.0 - phi_lambda * a) / (1.0 + phi * zeta)
}

/// Stationary success probabilities and delays of an all-queued network with
/// unit access probabilities, from the fixed point of the coupled success
/// equations solved by direct iteration. `None` if the iteration does not
/// settle on a stable point.
pub fn multi_class_fixed_point(cfg: &NetworkConfig) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = 2.0 / cfg.alpha;
    let ph = phis(cfg);
    let n = cfg.classes.len();
    let pd: Vec<f64> = cfg.classes.iter().map(|c| c.power.powf(d)).collect();
    // p_s,n = 1 / (1 + (φ_n/P_n^δ) Σ_k P_k^δ λ_k ρ_k),  ρ_k = min(1, a_k / p_s,k)
    let mut ps = vec![1.0; n];
    for _ in 0..200_000 {
        let load: f64 = (0..n)
            .map(|k| pd[k] * cfg.classes[k].lambda * (cfg.classes[k].arrival_rate / ps[k]).min(1.0))
            .sum();
        let next: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + ph[i] / pd[i] * load)).collect();
        let gap = next.iter().zip(&ps).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ps = next;
        if gap < 1e-15 {
            break;
        }
    }
    if (0..n).any(|k| cfg.classes[k].arrival_rate >= ps[k]) {
        return None;
    }
    let delay = (0..n)
        .map(|k| {
            let a = cfg.classes[k].arrival_rate;
            (1.0 - a) / (ps[k] - a)
        })
        .collect();
    Some((ps, delay))
}

/// Closed-form success probabilities of the all-queued network.
pub fn multi_class_closed(cfg: &NetworkConfig) -> (Vec<f64>, Vec<f64>) {
    let d = 2.0 / cfg.alpha;
    let ph = phis(cfg);
    let n = cfg.classes.len();
    let pd: Vec<f64> = cfg.classes.iter().map(|c| c.power.powf(d)).collect();
    let s: f64 = (0..n).map(|k| pd[k] * cfg.classes[k].lambda * cfg.classes[k].arrival_rate).sum();
    let t: f64 = (0..n).map(|k| ph[k] * cfg.classes[k].lambda * cfg.classes[k].arrival_rate).sum();
    let ps: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + ph[i] / pd[i] * s / (1.0 - t))).collect();
    let delay = (0..n)
        .map(|k| {
            let a = cfg.classes[k].arrival_rate;
            (1.0 - a) / (ps[k] - a)
        })
        .collect();
    (ps, delay)
}

/// `D_n − 1 = x/(1+x) / (p_s − a)`, with `x` the interference odds of class n.
pub fn multi_class_excess_delay(cfg: &NetworkConfig) -> Vec<f64> {
    let d = 2.0 / cfg.alpha;
    let ph = phis(cfg);
    let n = cfg.classes.len();
    let pd: Vec<f64> = cfg.classes.iter().map(|c| c.power.powf(d)).collect();
    let s: f64 = (0..n).map(|k| pd[k] * cfg.classes[k].lambda * cfg.classes[k].arrival_rate).sum();
    let t: f64 = (0..n).map(|k| ph[k] * cfg.classes[k].lambda * cfg.classes[k].arrival_rate).sum();
    (0..n)
        .map(|i| {
            let x = ph[i] / pd[i] * s / (1.0 - t);
            x / (1.0 + x) / (1.0 / (1.0 + x) - cfg.classes[i].arrival_rate)
        })
        .collect()
}

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Random all-queued config with parameters log-uniform over three decades.
pub fn random_config<R: Rng>(rng: &mut R, n: usize) -> NetworkConfig {
    let alpha = 2.5 + rng.random::<f64>() * 3.5;
    let classes = (0..n)
        .map(|_| {
            TrafficClass::new(
                log_uniform(rng, 0.01, 10.0),
                log_uniform(rng, 0.1, 100.0),
                log_uniform(rng, 0.03, 30.0).sqrt() * 0.1,
                log_uniform(rng, 0.1, 100.0),
                log_uniform(rng, 1e-3, 1.0).min(0.999),
                1.0,
            )
        })
        .collect();
    NetworkConfig::new(alpha, classes).unwrap()
}

/// `E[exp(−c X) | x1 ≤ X < x2]` for `X ~ Exp(rate)`.
pub fn truncated_exp_laplace(rate: f64, c: f64, x1: f64, x2: f64) -> f64 {
    let b = rate + c;
    let num = (-b * x1).exp() - (-b * x2).exp();
    let den = (-rate * x1).exp() - (-rate * x2).exp();
    rate / b * num / den
}
