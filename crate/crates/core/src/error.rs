use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("evaluation outside smooth domain")]
    OutsideSmoothDomain,
    #[error("step size unresolvable (error estimate {estimate:e})")]
    StepUnresolvable { estimate: f64 },
    #[error("non-coercive or ill-conditioned Hamiltonian (residual {residual:e})")]
    LegendreFailed { residual: f64 },
    #[error("deformation violates convexity preconditions: {0}")]
    InvalidDeformation(String),
    #[error("invalid Hamiltonian parameters: {0}")]
    InvalidParameters(String),
    #[error("flow left chart domain at t={time}")]
    LeftChart { time: f64 },
    #[error("energy drift {drift:e} above tolerance after step refinement")]
    EnergyDrift { drift: f64 },
    #[error("linearization inconsistent with flow (symplectic defect {defect:e})")]
    SymplecticDefect { defect: f64 },
    #[error("scale outside reachable energies")]
    ScaleUnreachable,
    #[error("strong convexity violated along trajectory at t={time}")]
    ConvexityViolated { time: f64 },
    #[error("canonical frame construction failed (defect {defect:e} at t={time})")]
    FrameFailed { defect: f64, time: f64 },
    #[error("curvature extraction ill-conditioned (residual {residual:e})")]
    CurvatureIllConditioned { residual: f64 },
    #[error("coordinate formula inapplicable (|H_aa - I| = {defect:e})")]
    CoordinateFormulaInapplicable { defect: f64 },
    #[error("covector on the zero section where the Hamiltonian is not smooth")]
    ZeroSection,
    #[error("Laplacian undefined at critical point")]
    CriticalPoint,
    #[error("Hessian requires noncritical point")]
    HessianCritical,
    #[error("Riccati blow-up at t={time}")]
    RiccatiBlowUp { time: f64 },
    #[error("past model focal time")]
    PastFocalTime,
    #[error("time step too large (stability bound {bound:e})")]
    TimeStepTooLarge { bound: f64 },
    #[error("inner solve failed (residual {residual:e})")]
    InnerSolveFailed { residual: f64 },
    #[error("positivity lost; refine or shorten horizon (min density {min:e} at t={time})")]
    PositivityLost { min: f64, time: f64 },
    #[error("1D closed form requires translation invariance")]
    NotTranslationInvariant,
    #[error("CDF inversion ill-posed at resolution")]
    CdfIllPosed,
    #[error("interpolation loses injectivity")]
    InjectivityLost,
    #[error("grid shape mismatch")]
    ShapeMismatch,
    #[error("singular matrix")]
    Singular,
}

pub type Result<T> = core::result::Result<T, Error>;
