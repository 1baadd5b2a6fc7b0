//! Transmit-power allocation: the closed-form weighted-delay optimum, a
//! derivative-free numeric optimizer used to cross-check it, and the maximum
//! D2D arrival rate under delay caps with a cellular class.

use serde::Serialize;

use crate::analytic::{self, StationaryMetrics};
use crate::error::{Error, Result};
use crate::model::{AnalysisMode, NetworkConfig};
use crate::scalar::{sum, Scalar};
use crate::stability;

/// Positive per-class weights of the delay objective `Σ c_n D_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayWeights<T>(Vec<T>);

impl<T: Scalar> DelayWeights<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid(None, "weights", "at least one weight is required"));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > T::zero()) {
                return Err(Error::invalid(Some(i), "weights", format!("must be finite and > 0, got {w}")));
            }
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![T::one(); n])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerGauge {
    /// Powers scaled so the last class transmits at 1.
    LastClassUnit,
}

/// A power vector, meaningful only up to a common positive factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation<T> {
    pub powers: Vec<T>,
    pub normalization: PowerGauge,
}

impl<T: Scalar> PowerAllocation<T> {
    fn from_power_delta(pd: &[T], delta: T) -> Self {
        let last = *pd.last().expect("non-empty");
        let powers = pd.iter().map(|&x| (x / last).powf(T::one() / delta)).collect();
        Self {
            powers,
            normalization: PowerGauge::LastClassUnit,
        }
    }

    pub fn apply(&self, config: &NetworkConfig<T>) -> NetworkConfig<T> {
        config.with_powers(&self.powers)
    }
}

fn check_inputs<T: Scalar>(config: &NetworkConfig<T>, weights: &DelayWeights<T>) -> Result<()> {
    config.validate(AnalysisMode::MultiClass)?;
    if weights.0.len() != config.num_classes() {
        return Err(Error::invalid(
            None,
            "weights",
            format!("expected {} weights, got {}", config.num_classes(), weights.0.len()),
        ));
    }
    if let Some(i) = config.classes.iter().position(|c| c.arrival_rate == T::zero()) {
        return Err(Error::ZeroArrival { class: i });
    }
    let load = stability::power_free_load(config);
    if !(load < T::one()) {
        return Err(Error::Infeasible {
            load: load.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// `Σ_n c_n D_n` at the config's powers; fails if the config is unstable.
pub fn weighted_delay<T: Scalar>(config: &NetworkConfig<T>, weights: &DelayWeights<T>) -> Result<T> {
    let m = analytic::multi_class_metrics(config)?;
    Ok(objective(&m, weights))
}

fn objective<T: Scalar>(m: &StationaryMetrics<T>, weights: &DelayWeights<T>) -> T {
    sum(m.mean_delay.iter().zip(&weights.0).map(|(&d, &c)| c * d))
}

/// Closed-form minimizer of the weighted delay over transmit powers.
pub fn optimal_powers<T: Scalar>(config: &NetworkConfig<T>, weights: &DelayWeights<T>) -> Result<PowerAllocation<T>> {
    check_inputs(config, weights)?;
    let one = T::one();
    let phi = config.contention();
    let c = &weights.0;
    let n = config.num_classes();
    let cls = &config.classes;
    let odds = |i: usize| cls[i].arrival_rate / (one - cls[i].arrival_rate);

    let load = sum((0..n).map(|k| phi[k] * cls[k].lambda * odds(k)));
    let spread = sum((0..n).map(|k| (c[k] * phi[k] * cls[k].lambda * odds(k)).sqrt()));
    let pd: Vec<T> = (0..n)
        .map(|i| {
            let a = cls[i].arrival_rate;
            phi[i] * odds(i) / (one - load) + (c[i] * phi[i] / (cls[i].lambda * a * (one - a))).sqrt() / spread
        })
        .collect();
    Ok(PowerAllocation::from_power_delta(&pd, config.delta()))
}

/// Budget and restart settings for [`numeric_power_oracle_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub starts: usize,
    pub max_evals_per_start: usize,
    /// Simplex diameter, in log-power-to-the-δ coordinates, at which a run stops.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_evals_per_start: 20_000,
            x_tol: 1e-11,
            initial_step: 0.5,
        }
    }
}

pub fn numeric_power_oracle<T: Scalar>(config: &NetworkConfig<T>, weights: &DelayWeights<T>) -> Result<PowerAllocation<T>> {
    numeric_power_oracle_with(config, weights, OracleOptions::default())
}

/// Minimizes `Σ c_n D_n` numerically with multi-start Nelder–Mead over
/// `z_n = ln P_n^δ` for all but the last class (whose power is fixed to 1).
///
/// Starts are independent; the best objective wins, ties go to the lowest
/// start index.
pub fn numeric_power_oracle_with<T: Scalar>(
    config: &NetworkConfig<T>,
    weights: &DelayWeights<T>,
    opts: OracleOptions,
) -> Result<PowerAllocation<T>> {
    check_inputs(config, weights)?;
    let n = config.num_classes();
    let delta = config.delta();
    if n == 1 {
        return Ok(PowerAllocation {
            powers: vec![T::one()],
            normalization: PowerGauge::LastClassUnit,
        });
    }
    let dim = n - 1;
    let eval = |z: &[T]| -> T {
        let mut powers: Vec<T> = z.iter().map(|&zi| (zi / delta).exp()).collect();
        powers.push(T::one());
        let cfg = config.with_powers(&powers);
        match stability::is_stable(&cfg) {
            Ok(true) => objective(&analytic::stationary_metrics_unchecked(&cfg), weights),
            _ => T::infinity(),
        }
    };

    let mut best: Option<(T, Vec<T>)> = None;
    let mut any_converged = false;
    for s in 0..opts.starts.max(1) {
        let start: Vec<T> = (0..dim).map(|i| T::lit(start_offset(s, i))).collect();
        let mut outcome = nelder_mead(&eval, &start, T::lit(opts.initial_step), T::lit(opts.x_tol), opts.max_evals_per_start);
        if outcome.value().is_finite() {
            // restart from the end point with a small fresh simplex
            outcome = nelder_mead(
                &eval,
                outcome.point(),
                T::lit(opts.initial_step * 0.01),
                T::lit(opts.x_tol),
                opts.max_evals_per_start,
            );
        }
        let converged = matches!(outcome, NmOutcome::Converged(..));
        let (x, f) = outcome.into_parts();
        if !f.is_finite() {
            continue;
        }
        any_converged |= converged;
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, x));
        }
    }
    match best {
        Some((_, z)) if any_converged => {
            let mut pd: Vec<T> = z.iter().map(|&zi| zi.exp()).collect();
            pd.push(T::one());
            Ok(PowerAllocation::from_power_delta(&pd, delta))
        }
        other => {
            let (f, z) = other.unwrap_or((T::infinity(), vec![T::zero(); dim]));
            let mut best_powers: Vec<f64> = z.iter().map(|&zi| (zi / delta).exp().to_f64().unwrap_or(f64::NAN)).collect();
            best_powers.push(1.0);
            Err(Error::NonConvergence {
                best_objective: f.to_f64().unwrap_or(f64::INFINITY),
                best_powers,
            })
        }
    }
}

/// Deterministic start offsets in `[-3, 3]`; start 0 is equal powers.
fn start_offset(start: usize, coord: usize) -> f64 {
    if start == 0 {
        return 0.0;
    }
    // golden-ratio sequence, decorrelated across coordinates
    let g = 0.618_033_988_749_894_9_f64;
    let u = ((start as f64) * g + (coord as f64) * 0.414_213_562_373_095_1).fract();
    6.0 * u - 3.0
}

enum NmOutcome<T> {
    Converged(Vec<T>, T),
    Exhausted(Vec<T>, T),
}

impl<T: Copy> NmOutcome<T> {
    fn value(&self) -> T {
        match self {
            NmOutcome::Converged(_, f) | NmOutcome::Exhausted(_, f) => *f,
        }
    }

    fn point(&self) -> &[T] {
        match self {
            NmOutcome::Converged(x, _) | NmOutcome::Exhausted(x, _) => x,
        }
    }

    fn into_parts(self) -> (Vec<T>, T) {
        match self {
            NmOutcome::Converged(x, f) | NmOutcome::Exhausted(x, f) => (x, f),
        }
    }
}

fn nelder_mead<T: Scalar>(f: &impl Fn(&[T]) -> T, x0: &[T], step: T, x_tol: T, max_evals: usize) -> NmOutcome<T> {
    let dim = x0.len();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut pts: Vec<Vec<T>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] = p[i] + step;
        pts.push(p);
    }
    let mut vals: Vec<T> = pts.iter().map(|p| f(p)).collect();
    let mut evals = dim + 1;

    loop {
        // sort ascending by value
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();

        let diameter = pts[1..].iter().fold(T::zero(), |m, p| {
            p.iter().zip(&pts[0]).fold(m, |m, (a, b)| m.max((*a - *b).abs()))
        });
        if vals[0].is_finite() && diameter < x_tol {
            return NmOutcome::Converged(pts[0].clone(), vals[0]);
        }
        if evals >= max_evals {
            return NmOutcome::Exhausted(pts[0].clone(), vals[0]);
        }

        let centroid: Vec<T> = (0..dim)
            .map(|k| sum(pts[..dim].iter().map(|p| p[k])) / T::from_usize_lossy(dim))
            .collect();
        let along = |t: T| -> Vec<T> { (0..dim).map(|k| centroid[k] + t * (pts[dim][k] - centroid[k])).collect() };

        let xr = along(-T::one());
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-two);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[dim] = xe;
                vals[dim] = fe;
            } else {
                pts[dim] = xr;
                vals[dim] = fr;
            }
            continue;
        }
        if fr < vals[dim - 1] {
            pts[dim] = xr;
            vals[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[dim] {
            let x = along(-half);
            let v = f(&x);
            (x, v)
        } else {
            let x = along(half);
            let v = f(&x);
            (x, v)
        };
        evals += 1;
        if fc < vals[dim].min(fr) {
            pts[dim] = xc;
            vals[dim] = fc;
            continue;
        }
        // shrink toward the best point
        for i in 1..=dim {
            let p: Vec<T> = (0..dim).map(|k| pts[0][k] + half * (pts[i][k] - pts[0][k])).collect();
            vals[i] = f(&p);
            pts[i] = p;
        }
        evals += dim;
    }
}

/// Maximum D2D arrival rate under delay caps, with the power ratio achieving it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEnvelope<T> {
    /// Supremum of admissible D2D arrival rates (approached from below).
    pub max_a1: T,
    /// `(φ_d2d/φ_cell)·(P_cell^δ/P_d2d^δ)` at the optimum.
    pub power_ratio: T,
    /// Channel share of the cellular class at its delay cap.
    pub psi2_star: T,
}

/// Largest D2D arrival rate keeping `D_d2d ≤ d1_max` and `D_cell ≤ d2_max`
/// over all power pairs, given the cellular arrival rate in `config`.
pub fn max_d2d_rate<T: Scalar>(config: &NetworkConfig<T>, d2d: usize, cell: usize, d1_max: T, d2_max: T) -> Result<RateEnvelope<T>> {
    config.validate(AnalysisMode::MultiClass)?;
    let n = config.num_classes();
    if n != 2 || d2d >= n || cell >= n || d2d == cell {
        return Err(Error::invalid(
            None,
            "classes",
            format!("expected two distinct class indices in a 2-class config, got d2d={d2d}, cell={cell}, N={n}"),
        ));
    }
    for (v, field) in [(d1_max, "d1_max"), (d2_max, "d2_max")] {
        if !(v > T::one()) {
            return Err(Error::invalid(None, field, format!("delay cap must exceed 1 slot, got {v}")));
        }
    }
    let one = T::one();
    let phi = config.contention();
    let pl_d = phi[d2d] * config.classes[d2d].lambda;
    let pl_c = phi[cell] * config.classes[cell].lambda;
    let a2 = config.classes[cell].arrival_rate;
    let psi2 = pl_c * d2_max / (d2_max - one) * a2 / (one - a2);
    if !(psi2 < one) {
        return Err(Error::ChannelSaturated {
            psi: psi2.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(envelope_from_share(pl_d, pl_c, psi2, d1_max, d2_max))
}

/// The envelope written directly in terms of `φλ` products and the cellular
/// channel share.
pub fn envelope_from_share<T: Scalar>(pl_d2d: T, pl_cell: T, psi2: T, d1_max: T, d2_max: T) -> RateEnvelope<T> {
    let one = T::one();
    let max_a1 = one / (one + pl_d2d * d1_max / (d1_max - one) / (one - psi2));
    let power_ratio = (psi2 / pl_cell + one / (d2_max - one)) / ((one - psi2) / pl_d2d + one / (d1_max - one));
    RateEnvelope {
        max_a1,
        power_ratio,
        psi2_star: psi2,
    }
}

/// Config operating on the envelope: D2D arrival `fraction·max_a1`, cellular
/// power 1, D2D power from the envelope ratio.
pub fn envelope_config<T: Scalar>(config: &NetworkConfig<T>, d2d: usize, cell: usize, env: &RateEnvelope<T>, fraction: T) -> NetworkConfig<T> {
    let phi = config.contention();
    let delta = config.delta();
    let mut out = config.clone();
    out.classes[d2d].arrival_rate = env.max_a1 * fraction;
    out.classes[cell].power = T::one();
    out.classes[d2d].power = (phi[d2d] / phi[cell] / env.power_ratio).powf(T::one() / delta);
    out
}

/// Cellular arrival rate that yields channel share `psi2` at delay cap `d2_max`.
pub fn cell_arrival_for_share<T: Scalar>(pl_cell: T, psi2: T, d2_max: T) -> T {
    let one = T::one();
    let odds = psi2 * (d2_max - one) / (d2_max * pl_cell);
    odds / (one + odds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrafficClass;

    fn two(pl1: f64, pl2: f64, a1: f64, a2: f64) -> NetworkConfig<f64> {
        NetworkConfig::new(
            4.0,
            vec![
                TrafficClass::with_contention(4.0, pl1, 1.0, 1.0, a1),
                TrafficClass::with_contention(4.0, pl2, 1.0, 1.0, a2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn symmetric_allocation_is_equal_power() {
        let cfg = two(0.15, 0.15, 0.7, 0.7);
        let w = DelayWeights::uniform(2);
        let p = optimal_powers(&cfg, &w).unwrap();
        assert!((p.powers[0] - 1.0).abs() < 1e-12);
        assert_eq!(p.powers[1], 1.0);
        let m = analytic::multi_class_metrics(&p.apply(&cfg)).unwrap();
        for d in m.mean_delay {
            assert!((d - 10.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn proportional_weights_equalize_delays() {
        let mut cfg = two(0.2, 0.05, 0.5, 0.8);
        cfg.classes[0].lambda = 3.0;
        let phi = cfg.contention();
        let weights: Vec<f64> = cfg
            .classes
            .iter()
            .zip(&phi)
            .map(|(c, f)| f * c.lambda * c.arrival_rate / (1.0 - c.arrival_rate))
            .collect();
        let w = DelayWeights::new(weights).unwrap();
        let p = optimal_powers(&cfg, &w).unwrap();
        let m = analytic::multi_class_metrics(&p.apply(&cfg)).unwrap();
        let want = 1.0 / (1.0 - stability::power_free_load(&cfg));
        for d in m.mean_delay {
            assert!((d - want).abs() < 1e-10 * want, "{d} vs {want}");
        }
    }

    #[test]
    fn lighter_second_weight_favors_first_class() {
        let cfg = two(0.15, 0.15, 0.7, 0.7);
        let w = DelayWeights::new(vec![1.0, 0.1]).unwrap();
        let p = optimal_powers(&cfg, &w).unwrap();
        assert!(p.powers[0] > 1.0);
        let m = analytic::multi_class_metrics(&p.apply(&cfg)).unwrap();
        assert!(m.mean_delay[0] < 10.0 / 3.0 && m.mean_delay[1] > 10.0 / 3.0);
    }

    #[test]
    fn rejects_zero_arrival_and_infeasible() {
        let w = DelayWeights::uniform(2);
        assert!(matches!(optimal_powers(&two(0.15, 0.15, 0.0, 0.7), &w), Err(Error::ZeroArrival { class: 0 })));
        assert!(matches!(optimal_powers(&two(1.0, 1.0, 0.4, 0.4), &w), Err(Error::Infeasible { .. })));
        assert!(matches!(numeric_power_oracle(&two(1.0, 1.0, 0.4, 0.4), &w), Err(Error::Infeasible { .. })));
        assert!(DelayWeights::new(vec![1.0, 0.0]).is_err());
        assert!(optimal_powers(&two(0.15, 0.15, 0.7, 0.7), &DelayWeights::uniform(3)).is_err());
    }

    #[test]
    fn oracle_agrees_on_symmetric_case() {
        let cfg = two(0.15, 0.15, 0.7, 0.7);
        let p = numeric_power_oracle(&cfg, &DelayWeights::uniform(2)).unwrap();
        assert!((p.powers[0] - 1.0).abs() < 1e-4, "{:?}", p.powers);
    }

    #[test]
    fn oracle_single_class_is_unit() {
        let cfg = NetworkConfig::new(4.0, vec![TrafficClass::with_contention(4.0, 0.3, 1.0, 5.0, 0.3)]).unwrap();
        let p = numeric_power_oracle(&cfg, &DelayWeights::uniform(1)).unwrap();
        assert_eq!(p.powers, vec![1.0]);
    }

    #[test]
    fn envelope_examples() {
        // D1* -> infinity
        let e = envelope_from_share(1.0_f64, 1.0, 0.5, 1e12, 3.0);
        assert!((e.max_a1 - 1.0 / 3.0).abs() < 1e-9);
        let e = envelope_from_share(1.0_f64, 1.0, 0.5, 3.0, 3.0);
        assert!((e.power_ratio - 1.0).abs() < 1e-14);
        let e = envelope_from_share(1.0_f64, 1.0, 1.0 - 1e-12, 3.0, 3.0);
        assert!(e.max_a1 < 1e-11);
    }

    #[test]
    fn envelope_rejects_saturated_cell() {
        let a2 = cell_arrival_for_share(1.0, 1.0, 3.0);
        let cfg = two(1.0, 1.0, 0.1, a2 + 1e-6);
        assert!(matches!(max_d2d_rate(&cfg, 0, 1, 3.0, 3.0), Err(Error::ChannelSaturated { .. })));
        assert!(max_d2d_rate(&cfg, 0, 0, 3.0, 3.0).is_err());
        assert!(max_d2d_rate(&two(1.0, 1.0, 0.1, 0.1), 0, 1, 1.0, 3.0).is_err());
    }

    #[test]
    fn envelope_operating_point_meets_caps() {
        let a2 = cell_arrival_for_share(1.0, 0.5, 3.0);
        let cfg = two(1.0, 1.0, 0.1, a2);
        let env = max_d2d_rate(&cfg, 0, 1, 4.0, 3.0).unwrap();
        assert!((env.psi2_star - 0.5).abs() < 1e-12);
        let op = envelope_config(&cfg, 0, 1, &env, 1.0 - 1e-9);
        let m = analytic::multi_class_metrics(&op).unwrap();
        assert!(m.mean_delay[0] <= 4.0 * (1.0 + 1e-6), "{:?}", m.mean_delay);
        assert!(m.mean_delay[1] <= 3.0 * (1.0 + 1e-6), "{:?}", m.mean_delay);
        assert!((m.channel_share[0] + 0.5 - 1.0).abs() < 1e-6);
    }
}
