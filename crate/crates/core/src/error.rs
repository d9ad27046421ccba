use thiserror::Error;

/// Hard-constraint breaches and numerical failures raised while evaluating
/// the controller or advancing the simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("boresight entered forbidden zone {zone}: cos-angle {gamma} >= boundary {boundary}")]
    OutsideDomain {
        zone: usize,
        gamma: f64,
        boundary: f64,
    },
    #[error("angular rate limit violated on axis {axis}: |{rate}| >= {limit} rad/s")]
    RateLimitViolated { axis: usize, rate: f64, limit: f64 },
    #[error("performance envelope violated: eps_q = {eps}")]
    EnvelopeViolated { eps: f64 },
    #[error("non-finite state component: {what}")]
    NonFiniteState { what: String },
}

/// Configuration and I/O failures in the scenario layer.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown preset {0:?} (expected two-cone, three-cone or monte-carlo)")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("failed to parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize configuration: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
