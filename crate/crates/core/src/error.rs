use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite potential evaluation at x = {x:?}")]
    Evaluation { x: Vec<f64> },

    #[error("point x = {x:?} lies on the crossing set (|w| = {gap:e})")]
    CrossingPoint { x: Vec<f64>, gap: f64 },

    #[error("invalid step size {0}")]
    Step(f64),

    #[error("gap collapsed to {gap:e} at t = {t} during flow integration")]
    GapCollapse { t: f64, gap: f64 },

    #[error("gap function has no interior minimum on the trajectory")]
    NoMinimum,

    #[error("degenerate crossing: |dw(q) p| = {0:e}")]
    Degenerate(f64),

    #[error("second near-crossing at t = {0} inside the transition window")]
    SecondCrossing(f64),

    #[error("singular evaluation at the crossing time with zero gap")]
    Singular,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Gamma function pole at {0}")]
    Pole(f64),

    #[error("ODE integration failed to meet tolerance at s = {0}")]
    Tolerance(f64),

    #[error("profile left its box: boundary mass fraction {0:e}")]
    GridOverflow(f64),

    #[error("packet escaped the reference box: boundary mass fraction {0:e}")]
    BoxEscape(f64),

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("parameter regime violated: {name} = {value:.4} (limit {limit})")]
    Regime {
        name: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("packet not covered by the sampling grid: {0}")]
    Interpolation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("unknown potential id `{0}`")]
    UnknownPotential(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
