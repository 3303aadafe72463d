use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("evaluation at s = {s} hits a pole (|den(s)| = {magnitude:e})")]
    PoleEvaluation { s: Complex64, magnitude: f64 },
    #[error("denominator polynomial is identically zero")]
    ZeroDenominator,
    #[error("1 + L(s) vanishes identically")]
    DegenerateLoop,
    #[error("loop magnitude never crosses unity on [{lo:e}, {hi:e}] rad/s")]
    NoCrossover { lo: f64, hi: f64 },
    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    ImproperTf { num: usize, den: usize },
    #[error("state became non-finite")]
    NonFinite,
    #[error("matrix is singular")]
    Singular,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("closed-loop matrix inverse does not exist as a rational object")]
    SingularAtDc,
    #[error("I + G*Lambda*K is not invertible")]
    SingularLoop,
    #[error("voltage-loop assumption violated: |T - 1| = {deviation:.4} at {frequency:.3} rad/s exceeds {limit}")]
    AssumptionViolated {
        frequency: f64,
        deviation: f64,
        limit: f64,
    },
    #[error("droop matrix is neither diagonal nor anti-diagonal")]
    CoupledDroop,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type NumericsResult<T> = Result<T, NumericsError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

impl ScenarioError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
