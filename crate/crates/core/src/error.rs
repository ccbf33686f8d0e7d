use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("deformation parameter q must be nonzero (energies diverge as q -> 0)")]
    ZeroDeformation,

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("potential pole at x = {x}: |1 - q k(x)| = {distance:e}")]
    Pole { x: f64, distance: f64 },

    #[error("superpotential root nu_1 is zero")]
    DegenerateRoot,

    #[error("nu_1 is complex on the Hermitian branch: Gamma_1 = {gamma1} < -(q lambda)^2/4")]
    ComplexNu { gamma1: f64 },

    #[error("level {n}: rho_n = nu_1 + n q lambda vanishes")]
    ZeroNu { n: usize },

    #[error("grid has {len} points, at least {min} are required")]
    GridTooCoarse { len: usize, min: usize },

    #[error("ground state does not decay: Re(mu) = {re_mu}")]
    NonNormalizable { re_mu: f64 },

    #[error("level {n} has no bound-state root")]
    NoRoot { n: usize },

    #[error("root finder did not converge after {iterations} iterations (|f| = {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("outer self-consistency iteration diverged for eigenvalue index {k}")]
    OuterDivergence { k: usize },

    #[error("no bound state with eigenvalue index {k} in (-m, m)")]
    NoBoundState { k: usize },

    #[error("operation requires the {required} branch")]
    WrongBranch { required: &'static str },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
