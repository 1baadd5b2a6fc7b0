use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`{}: {reason}", class_suffix(.class))]
    InvalidParameter {
        class: Option<usize>,
        field: &'static str,
        reason: String,
    },

    #[error("class {analyzed} is unstable: arrival rate {arrival} is not below the bound {bound}")]
    SingleClassUnstable {
        analyzed: usize,
        arrival: f64,
        bound: f64,
    },

    #[error("network is unstable: stability inequality fails for class {violated_class}")]
    Unstable { violated_class: usize },

    #[error("saturated contention: 1 - sum(phi*lambda*a) = {slack} is not positive")]
    ContentionSaturated { slack: f64 },

    #[error("no power vector stabilizes the network: sum phi*lambda*a/(1-a) = {load} is not below 1")]
    Infeasible { load: f64 },

    #[error("class {class} has zero arrival rate; the weighted-delay allocation needs a > 0")]
    ZeroArrival { class: usize },

    #[error("permutation search over {classes} classes exceeds the cap of {cap}; use the region check instead")]
    TooManyClasses { classes: usize, cap: usize },

    #[error("cellular class saturates channel: channel share {psi} is not below 1")]
    ChannelSaturated { psi: f64 },

    #[error("numeric optimizer did not converge; best objective so far {best_objective}")]
    NonConvergence { best_objective: f64, best_powers: Vec<f64> },

    #[error("queue of class {class} exceeded {limit} packets at slot {slot}; the network is grossly unstable")]
    QueueOverflow { class: usize, slot: u64, limit: usize },

    #[error("invalid simulation spec: {0}")]
    InvalidSimulation(String),

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn class_suffix(class: &Option<usize>) -> String {
    match class {
        Some(i) => format!(" of class {i}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(class: Option<usize>, field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            class,
            field,
            reason: reason.into(),
        }
    }
}
