use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violated its documented constraint. `constraint` is the
    /// human-readable rule, e.g. `"beta > 0"`.
    #[error("invalid {field}: {value} violates `{constraint}`")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("trial with seed {seed:#018x} produced a non-finite state at tau = {tau} (phi = {phi}, phi_dot = {phi_dot}); the step size is too large")]
    NonFinite {
        seed: u64,
        tau: f64,
        phi: f64,
        phi_dot: f64,
    },

    #[error("sample is empty")]
    EmptySample,

    #[error("amplitude bracket [{lo}, {hi}] does not straddle r_auc = {target}: endpoints measured {auc_lo} and {auc_hi}")]
    BracketFailure {
        lo: f64,
        hi: f64,
        target: f64,
        auc_lo: f64,
        auc_hi: f64,
    },

    #[error("campaign point {axis} = {value} failed: {source}")]
    CampaignPoint {
        axis: &'static str,
        value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("worker pool: {0}")]
    WorkerPool(String),
}

pub(crate) fn ensure(ok: bool, field: &'static str, value: f64, constraint: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            value,
            constraint,
        })
    }
}
