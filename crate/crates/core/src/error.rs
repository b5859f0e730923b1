use thiserror::Error;

/// Errors raised by the solver, the policy inversion and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("RangeError: {field} = {value} violates {rule}")]
    Range {
        field: &'static str,
        value: f64,
        rule: &'static str,
    },
    #[error("AssumptionA1Violated: beta{index} = {beta} is not below -r2/r1 = {bound}")]
    AssumptionA1Violated { index: u8, beta: f64, bound: f64 },
    #[error("ScopeError: rho = {rho} must equal r = {r}")]
    Scope { rho: f64, r: f64 },
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("ConvergenceError: {0}")]
    Convergence(String),
    #[error("QuadratureError: {0}")]
    Quadrature(String),
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("CIConflict: {0}")]
    CiConflict(String),
    #[error("NormalizationUnresolved: {0}")]
    NormalizationUnresolved(String),
}

pub type Result<T> = std::result::Result<T, Error>;
