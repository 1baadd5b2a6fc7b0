//! Closed-form stationary results: the single-class bound, success probability
//! and delay against saturated interferers, and the N-class stationary metrics
//! with their channel-share identities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{derive_constants, AnalysisMode, NetworkConfig};
use crate::scalar::{sum, Scalar};
use crate::special;
use crate::stability;

/// Stability bound for one queued class with every other class saturated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleClassBound<T> {
    /// Strict upper bound `p / (1 + φ(λp + ζ))` on the arrival rate.
    pub bound: T,
    /// Closure of the region over access probabilities, `1 / (1 + φ(λ + ζ))`.
    pub closure: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleClassResult<T> {
    pub stability_bound: T,
    pub success_prob: T,
    pub mean_delay: T,
}

struct SingleClassTerms<T> {
    phi: T,
    lambda: T,
    zeta: T,
    arrival: T,
    access: T,
}

fn single_terms<T: Scalar>(config: &NetworkConfig<T>, analyzed: usize) -> Result<SingleClassTerms<T>> {
    config.validate(AnalysisMode::SingleClass)?;
    let d = derive_constants(config, analyzed)?;
    let c = &config.classes[analyzed];
    Ok(SingleClassTerms {
        phi: d.phi[analyzed],
        lambda: c.lambda,
        zeta: d.zeta,
        arrival: c.arrival_rate,
        access: c.access_prob,
    })
}

pub fn single_class_bound<T: Scalar>(config: &NetworkConfig<T>, analyzed: usize) -> Result<SingleClassBound<T>> {
    let t = single_terms(config, analyzed)?;
    let one = T::one();
    Ok(SingleClassBound {
        bound: t.access / (one + t.phi * (t.lambda * t.access + t.zeta)),
        closure: one / (one + t.phi * (t.lambda + t.zeta)),
    })
}

fn ensure_single_stable<T: Scalar>(config: &NetworkConfig<T>, analyzed: usize) -> Result<SingleClassTerms<T>> {
    let bound = single_class_bound(config, analyzed)?.bound;
    let t = single_terms(config, analyzed)?;
    if t.arrival < bound {
        Ok(t)
    } else {
        Err(Error::SingleClassUnstable {
            analyzed,
            arrival: t.arrival.to_f64().unwrap_or(f64::NAN),
            bound: bound.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Stationary success probability `(1 − φλa)/(1 + φζ)` of the analyzed class.
pub fn single_class_success<T: Scalar>(config: &NetworkConfig<T>, analyzed: usize) -> Result<T> {
    let t = ensure_single_stable(config, analyzed)?;
    Ok((T::one() - t.phi * t.lambda * t.arrival) / (T::one() + t.phi * t.zeta))
}

/// Stationary mean delay in slots, `(1−a)(1+φζ) / (p − (1+φ(λp+ζ))a)`.
pub fn single_class_delay<T: Scalar>(config: &NetworkConfig<T>, analyzed: usize) -> Result<T> {
    let t = ensure_single_stable(config, analyzed)?;
    let one = T::one();
    let num = (one - t.arrival) * (one + t.phi * t.zeta);
    let den = t.access - (one + t.phi * (t.lambda * t.access + t.zeta)) * t.arrival;
    Ok(num / den)
}

pub fn single_class<T: Scalar>(config: &NetworkConfig<T>, analyzed: usize) -> Result<SingleClassResult<T>> {
    Ok(SingleClassResult {
        stability_bound: single_class_bound(config, analyzed)?.bound,
        success_prob: single_class_success(config, analyzed)?,
        mean_delay: single_class_delay(config, analyzed)?,
    })
}

/// Per-class stationary quantities of a stable N-class network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryMetrics<T> {
    pub success_prob: Vec<T>,
    pub mean_delay: Vec<T>,
    /// `D_n − 1` evaluated without cancellation; the identities below divide by it.
    pub excess_delay: Vec<T>,
    /// `ρ_n = a_n / (p_n·p_{s,n})`.
    pub load: Vec<T>,
    /// `Ψ_n = φ_n λ_n (D_n/(D_n−1)) (a_n/(1−a_n))`; all zero when no class has traffic.
    pub channel_share: Vec<T>,
}

impl<T: Scalar> StationaryMetrics<T> {
    pub fn num_classes(&self) -> usize {
        self.success_prob.len()
    }
}

/// Stationary success probability and delay of every class.
///
/// The region check runs first: outside the stability region the formulas
/// still evaluate but describe no stationary regime.
pub fn multi_class_metrics<T: Scalar>(config: &NetworkConfig<T>) -> Result<StationaryMetrics<T>> {
    let verdict = stability::check_region(config)?;
    if !verdict.stable {
        return Err(Error::Unstable {
            violated_class: verdict.violated_class.unwrap_or(0),
        });
    }
    Ok(stationary_metrics_unchecked(config))
}

/// Evaluates the stationary formulas without a stability check. Callers must
/// have established stability.
pub(crate) fn stationary_metrics_unchecked<T: Scalar>(config: &NetworkConfig<T>) -> StationaryMetrics<T> {
    let n = config.num_classes();
    let one = T::one();
    let phi = config.contention();
    let pd = config.power_delta();
    let a = config.arrivals();
    let lam: Vec<T> = config.classes.iter().map(|c| c.lambda).collect();

    if a.iter().all(|&x| x == T::zero()) {
        return StationaryMetrics {
            success_prob: vec![one; n],
            mean_delay: vec![one; n],
            excess_delay: vec![T::zero(); n],
            load: vec![T::zero(); n],
            channel_share: vec![T::zero(); n],
        };
    }

    let weighted_traffic = sum((0..n).map(|j| pd[j] * lam[j] * a[j]));
    let slack = one - sum((0..n).map(|j| phi[j] * lam[j] * a[j]));
    let common = weighted_traffic / slack;

    let mut out = StationaryMetrics {
        success_prob: Vec::with_capacity(n),
        mean_delay: Vec::with_capacity(n),
        excess_delay: Vec::with_capacity(n),
        load: Vec::with_capacity(n),
        channel_share: Vec::with_capacity(n),
    };
    for i in 0..n {
        // x = (φ_i / P_i^δ) · common, p_s = 1/(1+x)
        let x = phi[i] / pd[i] * common;
        let ps = one / (one + x);
        out.success_prob.push(ps);
        out.mean_delay.push((one - a[i]) / (ps - a[i]));
        // D − 1 = (1 − p_s)/(p_s − a), with 1 − p_s = x/(1+x)
        out.excess_delay.push(x / (one + x) / (ps - a[i]));
        out.load.push(a[i] / (config.classes[i].access_prob * ps));
        // D/(D-1) · a/(1-a) = a/(1-p_s) = a(1+x)/x
        out.channel_share.push(phi[i] * lam[i] * a[i] * (one + x) / x);
    }
    out
}

/// Residuals of the two channel-share identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals<T> {
    /// `|Σ_n φ_n λ_n (D_n/(D_n−1)) (a_n/(1−a_n)) − 1|`, recomputed from the delays.
    pub sum: T,
    /// Largest pairwise spread of `(φ_n/P_n^δ)(D_n/(D_n−1)/(1−a_n) − 1)`,
    /// relative to `max(1, max_n |·|)`.
    pub pairwise: T,
}

/// Checks the channel-share identities against the reported delays.
///
/// With every arrival rate zero the identities are vacuous (no class uses the
/// channel) and both residuals are reported as zero.
pub fn share_identity_residuals<T: Scalar>(metrics: &StationaryMetrics<T>, config: &NetworkConfig<T>) -> IdentityResiduals<T> {
    let n = config.num_classes();
    let a = config.arrivals();
    if a.iter().all(|&x| x == T::zero()) {
        return IdentityResiduals {
            sum: T::zero(),
            pairwise: T::zero(),
        };
    }
    let one = T::one();
    let phi = config.contention();
    let pd = config.power_delta();
    let ratio = |i: usize| metrics.mean_delay[i] / metrics.excess_delay[i];

    let total = sum((0..n).map(|i| {
        let lam = config.classes[i].lambda;
        phi[i] * lam * ratio(i) * a[i] / (one - a[i])
    }));

    let values: Vec<T> = (0..n)
        .map(|i| phi[i] / pd[i] * (ratio(i) / (one - a[i]) - one))
        .collect();
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let scale = values.iter().fold(one, |m, v| m.max(v.abs()));

    IdentityResiduals {
        sum: (total - one).abs(),
        pairwise: (hi - lo) / scale,
    }
}

/// Left side of the channel-share identity in physical parameters:
/// `Σ_n 4 λ_n R̄_n² θ_n^δ (D_n/(D_n−1)) (a_n/(1−a_n))`.
pub fn physical_identity_lhs<T: Scalar>(config: &NetworkConfig<T>, metrics: &StationaryMetrics<T>) -> T {
    let one = T::one();
    let delta = config.delta();
    sum(config.classes.iter().zip(metrics.mean_delay.iter().zip(&metrics.excess_delay)).map(|(c, (&d, &e))| {
        if c.arrival_rate == T::zero() {
            return T::zero();
        }
        let r2 = c.mean_link_distance * c.mean_link_distance;
        T::lit(4.0) * c.lambda * r2 * c.sir_threshold.powf(delta) * d / e * c.arrival_rate
            / (one - c.arrival_rate)
    }))
}

/// Right side of the physical identity, `sin(2π/α)/(2π/α)`.
pub fn channel_budget<T: Scalar>(alpha: T) -> T {
    T::one() / special::reflection_product(T::lit(2.0) / alpha)
}
