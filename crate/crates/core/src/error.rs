use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point is not on the switching manifold (|f| = {0:e})")]
    NotOnSigma(f64),
    #[error("point is not in a sliding or escaping region")]
    NotSlidingRegion,
    #[error("sliding denominator vanishes")]
    DenominatorVanishes,
    #[error("degenerate tangency: all contact derivatives up to order 3 vanish")]
    Degenerate,
    #[error("Lie derivative of order {0} is not supported for non-polynomial fields")]
    OrderUnsupported(u32),
    #[error("normal-form data required for degree-2 classification")]
    RequiresNormalForm,
    #[error("orbit does not return to the switching manifold within the time limit")]
    NoReturn,
    #[error("grazing contact could not be resolved")]
    GrazingUnresolved,
    #[error("step size underflow at t = {0}")]
    StepSizeUnderflow(f64),
    #[error("trajectory left the domain bound at t = {0}")]
    BlowUp(f64),
    #[error("no real return: discriminant {0:e} is negative")]
    NoRealReturn(f64),
    #[error("return exists only in backward time")]
    BackwardOnly,
    #[error("fold is not invisible (invisibility coefficient {0:e})")]
    NonInvisibleFold(f64),
    #[error("cusp-fold index vanishes")]
    IndexZero,
    #[error("Newton iteration failed to converge: {0}")]
    NoConvergence(String),
    #[error("continuation stalled after the last good point k = {k}, a = {a}")]
    ContinuationStalled { k: f64, a: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
