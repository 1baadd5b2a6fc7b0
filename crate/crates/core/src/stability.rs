//! Membership tests for the stability region of the N-class network.
//!
//! Three routes are provided: the direct region inequalities, the union of
//! permutation regions built from sequentially saturated dominant networks,
//! and a power-free feasibility test. Boundary points are unstable.

use serde::Serialize;

use crate::analytic;
use crate::error::{Error, Result};
use crate::model::{AnalysisMode, NetworkConfig};
use crate::scalar::{sum, Scalar};

/// Default cap on the number of classes for the factorial permutation search.
pub const DEFAULT_PERMUTATION_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMethod {
    Region,
    Permutation,
    PowerFeasibility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub method: StabilityMethod,
    /// First class whose region inequality fails.
    pub violated_class: Option<usize>,
    /// Order of saturated-class removal certifying stability.
    pub witness_permutation: Option<Vec<usize>>,
    /// Whether the two algebraic forms of the region inequality agreed. They
    /// can only split at a floating-point boundary point.
    pub forms_agree: bool,
}

struct RegionTerms<T> {
    phi: Vec<T>,
    pd: Vec<T>,
    lam: Vec<T>,
    a: Vec<T>,
}

impl<T: Scalar> RegionTerms<T> {
    fn new(config: &NetworkConfig<T>) -> Self {
        Self {
            phi: config.contention(),
            pd: config.power_delta(),
            lam: config.classes.iter().map(|c| c.lambda).collect(),
            a: config.arrivals(),
        }
    }

    fn len(&self) -> usize {
        self.a.len()
    }

    /// `(φ_n / P_n^δ) · a_n/(1−a_n)`
    fn lhs(&self, n: usize) -> T {
        self.phi[n] / self.pd[n] * self.a[n] / (T::one() - self.a[n])
    }

    fn all_idle(&self) -> bool {
        self.a.iter().all(|&x| x == T::zero())
    }
}

/// Index of the first class violating the region inequality with sums over
/// every class, or `None` when all hold.
fn first_violation_inclusive<T: Scalar>(t: &RegionTerms<T>) -> Option<usize> {
    let n = t.len();
    let slack = T::one() - sum((0..n).map(|k| t.phi[k] * t.lam[k] * t.a[k]));
    let traffic = sum((0..n).map(|k| t.pd[k] * t.lam[k] * t.a[k]));
    // lhs < slack / traffic, with traffic > 0 whenever some a_n > 0
    (0..n).find(|&i| !(t.lhs(i) * traffic < slack))
}

/// Same inequality with the sums taken over `k ≠ n` and class `n` saturated.
fn first_violation_exclusive<T: Scalar>(t: &RegionTerms<T>) -> Option<usize> {
    let n = t.len();
    (0..n).find(|&i| {
        let slack = T::one() - sum((0..n).filter(|&k| k != i).map(|k| t.phi[k] * t.lam[k] * t.a[k]));
        let traffic = t.pd[i] * t.lam[i] + sum((0..n).filter(|&k| k != i).map(|k| t.pd[k] * t.lam[k] * t.a[k]));
        !(t.lhs(i) < slack / traffic)
    })
}

/// Direct region test.
pub fn check_region<T: Scalar>(config: &NetworkConfig<T>) -> Result<StabilityVerdict> {
    config.validate(AnalysisMode::MultiClass)?;
    let t = RegionTerms::new(config);
    if t.all_idle() {
        return Ok(StabilityVerdict {
            stable: true,
            method: StabilityMethod::Region,
            violated_class: None,
            witness_permutation: None,
            forms_agree: true,
        });
    }
    let inclusive = first_violation_inclusive(&t);
    let exclusive = first_violation_exclusive(&t);
    Ok(StabilityVerdict {
        stable: inclusive.is_none(),
        method: StabilityMethod::Region,
        violated_class: inclusive,
        witness_permutation: None,
        forms_agree: inclusive.is_none() == exclusive.is_none(),
    })
}

/// Verdict of the region test using only the form with sums over `k ≠ n`.
pub fn region_exclusive_form_stable<T: Scalar>(config: &NetworkConfig<T>) -> Result<bool> {
    config.validate(AnalysisMode::MultiClass)?;
    let t = RegionTerms::new(config);
    Ok(t.all_idle() || first_violation_exclusive(&t).is_none())
}

/// Whether the arrival vector lies in the permutation region of `order`,
/// i.e. every class passes its check when classes are released from
/// saturation in that order.
pub fn in_permutation_region<T: Scalar>(config: &NetworkConfig<T>, order: &[usize]) -> bool {
    let t = RegionTerms::new(config);
    let saturated_rest: Vec<T> = {
        // suffix sums of P^δ λ over the order
        let mut acc = vec![T::zero(); order.len() + 1];
        for j in (0..order.len()).rev() {
            let k = order[j];
            acc[j] = acc[j + 1] + t.pd[k] * t.lam[k];
        }
        acc
    };
    let mut released_contention = T::zero();
    let mut released_traffic = T::zero();
    for (j, &k) in order.iter().enumerate() {
        let slack = T::one() - released_contention;
        let denom = released_traffic + saturated_rest[j];
        if !(t.lhs(k) * denom < slack) {
            return false;
        }
        released_contention = released_contention + t.phi[k] * t.lam[k] * t.a[k];
        released_traffic = released_traffic + t.pd[k] * t.lam[k] * t.a[k];
    }
    true
}

pub fn check_permutation_region<T: Scalar>(config: &NetworkConfig<T>) -> Result<StabilityVerdict> {
    check_permutation_region_with_cap(config, DEFAULT_PERMUTATION_CAP)
}

/// Searches orders lexicographically and stops at the first witness.
pub fn check_permutation_region_with_cap<T: Scalar>(config: &NetworkConfig<T>, cap: usize) -> Result<StabilityVerdict> {
    config.validate(AnalysisMode::MultiClass)?;
    let n = config.num_classes();
    if n > cap {
        return Err(Error::TooManyClasses { classes: n, cap });
    }
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        if in_permutation_region(config, &order) {
            return Ok(StabilityVerdict {
                stable: true,
                method: StabilityMethod::Permutation,
                violated_class: None,
                witness_permutation: Some(order),
                forms_agree: true,
            });
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(StabilityVerdict {
        stable: false,
        method: StabilityMethod::Permutation,
        violated_class: None,
        witness_permutation: None,
        forms_agree: true,
    })
}

/// Advances to the next lexicographic permutation; false after the last one.
pub fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// One release step of the dominant-network construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominantStep<T> {
    /// Class released from saturation at this step.
    pub class: usize,
    /// Success probability of that class while it and all later classes are
    /// saturated and earlier classes are at steady state.
    pub threshold: T,
    /// `(class, p̃)` for the classes released at earlier steps.
    pub released_success: Vec<(usize, T)>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominantSequenceReport<T> {
    pub order: Vec<usize>,
    pub steps: Vec<DominantStep<T>>,
    /// Steady-state success of every class (original index) once all classes
    /// are released; present only when every step holds.
    pub final_success: Option<Vec<T>>,
}

impl<T> DominantSequenceReport<T> {
    pub fn all_hold(&self) -> bool {
        self.steps.iter().all(|s| s.holds)
    }
}

/// Walks the sequential dominant-network argument in the given order,
/// reporting the intermediate success probabilities at each step.
pub fn dominant_sequence_check<T: Scalar>(config: &NetworkConfig<T>, order: &[usize]) -> Result<DominantSequenceReport<T>> {
    config.validate(AnalysisMode::MultiClass)?;
    let n = config.num_classes();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&k| k >= n || std::mem::replace(&mut seen[k], true)) {
        return Err(Error::invalid(None, "order", format!("{order:?} is not a permutation of 0..{n}")));
    }
    let t = RegionTerms::new(config);
    let one = T::one();

    // success of class k given released prefix order[..j]
    let success_at = |j: usize, k: usize| -> Option<T> {
        let prefix = &order[..j];
        let slack = one - sum(prefix.iter().map(|&l| t.phi[l] * t.lam[l] * t.a[l]));
        if !(slack > T::zero()) {
            return None;
        }
        let load = sum(prefix.iter().map(|&l| t.pd[l] * t.lam[l] * t.a[l]))
            + sum(order[j..].iter().map(|&l| t.pd[l] * t.lam[l]));
        Some(one / (one + t.phi[k] / t.pd[k] * load / slack))
    };

    let mut steps = Vec::with_capacity(n);
    for (j, &k) in order.iter().enumerate() {
        let threshold = success_at(j, k);
        let released_success = order[..j]
            .iter()
            .map(|&l| (l, success_at(j, l).unwrap_or(T::nan())))
            .collect();
        let holds = matches!(threshold, Some(th) if t.a[k] < th);
        steps.push(DominantStep {
            class: k,
            threshold: threshold.unwrap_or(T::nan()),
            released_success,
            holds,
        });
        if !holds {
            break;
        }
    }
    let final_success = if steps.len() == n && steps.iter().all(|s| s.holds) {
        let mut ps = vec![T::zero(); n];
        for (k, p) in ps.iter_mut().enumerate() {
            *p = success_at(n, k).unwrap_or(T::nan());
        }
        Some(ps)
    } else {
        None
    };
    Ok(DominantSequenceReport {
        order: order.to_vec(),
        steps,
        final_success,
    })
}

/// `Σ_n φ_n λ_n a_n/(1−a_n)`, independent of the powers.
pub fn power_free_load<T: Scalar>(config: &NetworkConfig<T>) -> T {
    let phi = config.contention();
    sum(config
        .classes
        .iter()
        .zip(phi)
        .map(|(c, f)| f * c.lambda * c.arrival_rate / (T::one() - c.arrival_rate)))
}

/// Whether some power vector makes the network stable.
pub fn feasibility_over_powers<T: Scalar>(config: &NetworkConfig<T>) -> bool {
    power_free_load(config) < T::one()
}

pub fn feasibility_verdict<T: Scalar>(config: &NetworkConfig<T>) -> Result<StabilityVerdict> {
    config.validate(AnalysisMode::MultiClass)?;
    Ok(StabilityVerdict {
        stable: feasibility_over_powers(config),
        method: StabilityMethod::PowerFeasibility,
        violated_class: None,
        witness_permutation: None,
        forms_agree: true,
    })
}

/// Prefer the region test; used by callers that only need a yes/no answer.
pub fn is_stable<T: Scalar>(config: &NetworkConfig<T>) -> Result<bool> {
    Ok(check_region(config)?.stable)
}

/// Stationary success probabilities from the final dominant step, for
/// cross-checking against the direct formula.
pub fn final_step_matches_metrics<T: Scalar>(config: &NetworkConfig<T>, order: &[usize]) -> Result<Option<T>> {
    let report = dominant_sequence_check(config, order)?;
    let Some(fin) = report.final_success else {
        return Ok(None);
    };
    let m = analytic::multi_class_metrics(config)?;
    Ok(Some(
        fin.iter()
            .zip(&m.success_prob)
            .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs())),
    ))
}
