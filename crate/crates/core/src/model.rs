//! Network and traffic-class parameters, validation, and the derived constants
//! shared by the analytic, stability and optimization routines.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sum, Scalar};
use crate::special;

/// Physical and traffic parameters of one class of links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficClass<T> {
    /// Source density (sources per unit area).
    pub lambda: T,
    /// Transmit power. Only ratios between classes matter.
    pub power: T,
    /// Mean of the Rayleigh-distributed link distance.
    pub mean_link_distance: T,
    /// SIR threshold for a successful reception.
    pub sir_threshold: T,
    /// Bernoulli arrival probability per slot, in `[0, 1)`.
    pub arrival_rate: T,
    /// Medium access probability per slot, in `(0, 1]`.
    pub access_prob: T,
}

impl<T: Scalar> TrafficClass<T> {
    pub fn new(lambda: T, power: T, mean_link_distance: T, sir_threshold: T, arrival_rate: T, access_prob: T) -> Self {
        Self {
            lambda,
            power,
            mean_link_distance,
            sir_threshold,
            arrival_rate,
            access_prob,
        }
    }

    /// Builds a class whose contention constant `φ` equals `phi`, using an SIR
    /// threshold of 1 and solving for the mean link distance.
    pub fn with_contention(alpha: T, phi: T, lambda: T, power: T, arrival_rate: T) -> Self {
        let r = mean_distance_for_contention(alpha, phi, T::one());
        Self::new(lambda, power, r, T::one(), arrival_rate, T::one())
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let positive = |v: T, field: &'static str| {
            if v.is_finite() && v > T::zero() {
                Ok(())
            } else {
                Err(Error::invalid(Some(index), field, format!("must be finite and > 0, got {v}")))
            }
        };
        positive(self.lambda, "lambda")?;
        positive(self.power, "power")?;
        positive(self.mean_link_distance, "mean_link_distance")?;
        positive(self.sir_threshold, "sir_threshold")?;
        if !(self.arrival_rate >= T::zero() && self.arrival_rate < T::one()) {
            return Err(Error::invalid(
                Some(index),
                "arrival_rate",
                format!("must lie in [0, 1), got {}", self.arrival_rate),
            ));
        }
        if !(self.access_prob > T::zero() && self.access_prob <= T::one()) {
            return Err(Error::invalid(
                Some(index),
                "access_prob",
                format!("must lie in (0, 1], got {}", self.access_prob),
            ));
        }
        Ok(())
    }
}

/// Which family of results a configuration is about to be fed into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisMode {
    /// One queued class against saturated interferers; any access probability.
    SingleClass,
    /// All classes queued; the closed forms require every access probability to be 1.
    MultiClass,
    /// Monte Carlo; any access probability.
    Simulation,
}

/// Path-loss exponent plus the ordered list of traffic classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig<T> {
    pub alpha: T,
    pub classes: Vec<TrafficClass<T>>,
}

impl<T: Scalar> NetworkConfig<T> {
    /// Builds and validates a configuration (mode-independent checks only).
    pub fn new(alpha: T, classes: Vec<TrafficClass<T>>) -> Result<Self> {
        let config = Self { alpha, classes };
        config.validate_common()?;
        Ok(config)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// `δ = 2/α`.
    pub fn delta(&self) -> T {
        T::lit(2.0) / self.alpha
    }

    pub fn arrivals(&self) -> Vec<T> {
        self.classes.iter().map(|c| c.arrival_rate).collect()
    }

    /// Copy of the config with the arrival vector replaced.
    pub fn with_arrivals(&self, arrivals: &[T]) -> Self {
        assert_eq!(arrivals.len(), self.classes.len(), "arrival vector length");
        let mut out = self.clone();
        for (c, &a) in out.classes.iter_mut().zip(arrivals) {
            c.arrival_rate = a;
        }
        out
    }

    /// Copy of the config with the power vector replaced.
    pub fn with_powers(&self, powers: &[T]) -> Self {
        assert_eq!(powers.len(), self.classes.len(), "power vector length");
        let mut out = self.clone();
        for (c, &p) in out.classes.iter_mut().zip(powers) {
            c.power = p;
        }
        out
    }

    /// `φ_n = 4·Γ(1+δ)·Γ(1−δ)·R̄_n²·θ_n^δ` for every class.
    pub fn contention(&self) -> Vec<T> {
        let delta = self.delta();
        let g = special::gamma_product(delta);
        self.classes
            .iter()
            .map(|c| contention_from_parts(g, delta, c.mean_link_distance, c.sir_threshold))
            .collect()
    }

    /// `P_n^δ` for every class.
    pub fn power_delta(&self) -> Vec<T> {
        let delta = self.delta();
        self.classes.iter().map(|c| c.power.powf(delta)).collect()
    }

    pub fn validate(&self, mode: AnalysisMode) -> Result<()> {
        self.validate_common()?;
        if mode == AnalysisMode::MultiClass {
            for (i, c) in self.classes.iter().enumerate() {
                if c.access_prob != T::one() {
                    return Err(Error::invalid(
                        Some(i),
                        "access_prob",
                        format!("access_prob must be 1 for multi-class analysis, got {}", c.access_prob),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > T::lit(2.0)) {
            return Err(Error::invalid(
                None,
                "alpha",
                format!("path-loss exponent must be finite and > 2, got {}", self.alpha),
            ));
        }
        if self.classes.is_empty() {
            return Err(Error::invalid(None, "classes", "at least one traffic class is required"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            c.validate(i)?;
        }
        Ok(())
    }
}

impl<T> NetworkConfig<T>
where
    T: Scalar + Serialize + for<'de> Deserialize<'de>,
{
    /// Parses and validates a JSON config. Unknown fields are rejected.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(s)?;
        config.validate_common()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Constants derived from a configuration, relative to one analyzed class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedConstants<T> {
    pub delta: T,
    pub phi: Vec<T>,
    /// Index of the class treated as queued in the single-class analysis.
    pub analyzed: usize,
    /// `ζ = Σ_{n≠analyzed} (P_n/P_analyzed)^δ·λ_n·p_n`.
    pub zeta: T,
    /// Channel shares; only filled once stationary metrics exist.
    pub channel_share: Option<Vec<T>>,
}

pub fn derive_constants<T: Scalar>(config: &NetworkConfig<T>, analyzed: usize) -> Result<DerivedConstants<T>> {
    config.validate_common()?;
    if analyzed >= config.num_classes() {
        return Err(Error::invalid(
            None,
            "analyzed",
            format!("class index {analyzed} out of range for {} classes", config.num_classes()),
        ));
    }
    let delta = config.delta();
    let p_ref = config.classes[analyzed].power;
    let zeta = sum(config
        .classes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != analyzed)
        .map(|(_, c)| (c.power / p_ref).powf(delta) * c.lambda * c.access_prob));
    Ok(DerivedConstants {
        delta,
        phi: config.contention(),
        analyzed,
        zeta,
        channel_share: None,
    })
}

fn contention_from_parts<T: Scalar>(gamma_product: T, delta: T, mean_link_distance: T, sir_threshold: T) -> T {
    T::lit(4.0) * gamma_product * mean_link_distance * mean_link_distance * sir_threshold.powf(delta)
}

/// `φ` for a single class through the gamma product.
pub fn contention_gamma<T: Scalar>(alpha: T, mean_link_distance: T, sir_threshold: T) -> T {
    let delta = T::lit(2.0) / alpha;
    contention_from_parts(special::gamma_product(delta), delta, mean_link_distance, sir_threshold)
}

/// `φ` for a single class through `(2π/α)/sin(2π/α)`.
pub fn contention_reflection<T: Scalar>(alpha: T, mean_link_distance: T, sir_threshold: T) -> T {
    let delta = T::lit(2.0) / alpha;
    contention_from_parts(special::reflection_product(delta), delta, mean_link_distance, sir_threshold)
}

/// Mean link distance that yields contention constant `phi` at the given threshold.
pub fn mean_distance_for_contention<T: Scalar>(alpha: T, phi: T, sir_threshold: T) -> T {
    let unit = contention_gamma(alpha, T::one(), sir_threshold);
    (phi / unit).sqrt()
}
