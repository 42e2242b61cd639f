use nalgebra::DVector;

/// Errors reported by construction, simulation, distance and certificate routines.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    InvalidDimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid system data: {0}")]
    InvalidSystem(String),

    #[error("state is not in the jump set (|g| = {g:.3e}, h = {h:.3e})")]
    NotInJumpSet { g: f64, h: f64 },

    #[error("state norm {norm:.3e} exceeded the escape bound {bound:.3e} at t = {t}")]
    EscapeDetected { t: f64, norm: f64, bound: f64 },

    #[error("integrator step size underflow at t = {t} (h = {h:.3e})")]
    IntegratorStall { t: f64, h: f64 },

    #[error("jump limit hit: {jumps} jumps (window {window:.3e} s) at t = {t}")]
    ZenoLimit { t: f64, jumps: usize, window: f64 },

    #[error("empty hybrid time domain")]
    EmptyDomain,

    #[error("point lies outside C \u{222a} D (violation {violation:.3e})")]
    OutsideStateSpace { violation: f64 },

    #[error("oracle grid too coarse for requested accuracy (need {needed:.3e}, got {got:.3e})")]
    OracleAccuracy { needed: f64, got: f64 },

    #[error("L + M J is singular and cannot be inverted")]
    SingularDesign,

    #[error("guard geometry infeasible: {0}")]
    InvalidGeometry(String),

    #[error("assumption violated ({bullet}): margin {margin:.3e} at witness {witness:?}")]
    AssumptionViolated {
        bullet: &'static str,
        margin: f64,
        witness: DVector<f64>,
    },

    #[error("time {t} lies outside the reference horizon [{t0}, {t1}]")]
    OutOfHorizon { t: f64, t0: f64, t1: f64 },

    #[error("both components entered the jump set within tolerance at t = {t}")]
    AttributionAmbiguous { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
