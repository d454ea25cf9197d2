use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("ellipticity failure: min of the second z1-derivative of the density is {margin} <= 0 (a uniform positive lower bound is required)")]
    Ellipticity { margin: f64 },

    #[error("unsupported seminorm order {0} (implemented up to 4)")]
    UnsupportedOrder(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step {h} violates the explicit stability cap; largest admissible step is {suggested}")]
    Stability { h: f64, suggested: f64 },

    #[error("CFL violation: step {h} exceeds admissible {suggested}")]
    Cfl { h: f64, suggested: f64 },

    #[error("iteration did not converge: {0}")]
    Nonconvergence(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<V> = std::result::Result<V, Error>;
