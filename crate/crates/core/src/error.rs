use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// The generator kernel is not one-dimensional; the stationary state
    /// depends on the initial condition.
    #[error(
        "degenerate kernel of dimension {dim}: the stationary state is not unique, \
         use `asymptotic_state` with an initial population"
    )]
    DegenerateKernel { dim: usize },

    #[error("invalid generator: eigenvalue {re:+.3e}{im:+.3e}i has positive real part")]
    InvalidGenerator { re: f64, im: f64 },

    #[error(
        "step size underflow at t = {t:.6e} us (h = {h:.3e} us): the full master equation \
         is too stiff here, use the population (rate-matrix) path"
    )]
    Stiffness { t: f64, h: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error{}: {msg}", fmt_location(.key, .line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_location(key: &Option<String>, line: &Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" at `{k}` (line {l})"),
        (Some(k), None) => format!(" at `{k}`"),
        (None, Some(l)) => format!(" (line {l})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
