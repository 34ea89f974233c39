//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Fault {
    /// Input outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Iterative method failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The requested reconfiguration cannot be met as posed.
    #[error("infeasible: {reason}")]
    Infeasible { reason: String, hint: Option<String> },

    /// No optimal epoch falls inside the reconfiguration window.
    #[error("no feasible epoch before t_f; earliest feasible duration is {earliest_s:.3} s")]
    NoFeasibleEpoch { earliest_s: f64 },

    /// A target lies outside the nested reachable set at the minimum cost.
    #[error("target not reachable at dv_min: {0}")]
    NotReachableAtDvMin(String),

    /// Scenario or model configuration rejected; `path` names the offending field.
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },

    /// Broken internal guarantee; indicates a bug upstream.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Fault>;

impl Fault {
    pub fn domain(msg: impl Into<String>) -> Self {
        Fault::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Fault::Numerical(msg.into())
    }

    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Fault::Config { path: path.into(), msg: msg.into() }
    }

    pub fn infeasible(reason: impl Into<String>, hint: Option<String>) -> Self {
        Fault::Infeasible { reason: reason.into(), hint }
    }
}
