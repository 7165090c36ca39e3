use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("quadrature did not converge (last estimate {estimate:e}): {msg}")]
    Unreliable { estimate: f64, msg: String },
    #[error("series converges too slowly: N exceeded {cap} with fitted C_d = {c_d:.4}")]
    ConvergenceTooSlow { cap: usize, c_d: f64 },
    #[error("lambda too small: lambda = {lambda}, |u| = {u_sup:.4e}, |grad u| = {grad_sup:.4e}")]
    LambdaTooSmall { lambda: f64, u_sup: f64, grad_sup: f64 },
    #[error("inconsistent map: {0}")]
    InconsistentMap(String),
    #[error("too few paths: got {got}, need at least {need}")]
    TooFewPaths { got: usize, need: usize },
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("missing dependency from module {module}: {what}")]
    Dependency { module: &'static str, what: String },
    #[error("config error in field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
