use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid stencil: {0}")]
    InvalidSpec(String),

    #[error("invalid weight function: {0}")]
    InvalidWeight(String),

    #[error("invalid Butcher tableau: {0}")]
    InvalidTableau(String),

    #[error("quadrature did not converge (last two estimates {last:e} and {previous:e})")]
    NonConvergence { last: f64, previous: f64 },

    #[error(
        "KKT system is rank deficient for M\u{302} = {m_hat} with weight support [{lo}, {hi}] \
         (scaled condition number {condition:.3e})"
    )]
    RankDeficient {
        m_hat: usize,
        lo: f64,
        hi: f64,
        condition: f64,
    },

    #[error("order constraints are inconsistent{}", suggest(*max_order))]
    Inconsistent { max_order: Option<usize> },

    #[error("order constraints do not determine the scheme uniquely{}", suggest(*max_order))]
    Underdetermined { max_order: Option<usize> },

    #[error("spectral denominator vanishes at eta = {eta}")]
    VanishingDenominator { eta: f64 },

    #[error("operator B is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularOperator { condition: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("run aborted at step {step}: solution blew up (max |f| = {max_abs:e})")]
    RunAborted { step: usize, max_abs: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn suggest(order: Option<usize>) -> String {
    match order {
        Some(o) => alloc::format!("; largest achievable order is {o}"),
        None => String::new(),
    }
}

pub type Result<T> = core::result::Result<T, Error>;
