//! The simulate/estimate contract every model family implements.

use crate::param::ParamVector;
use crate::stream::RandomStream;
use thiserror::Error;

/// A parametric model that can simulate data at a parameter value and
/// estimate the parameter back from a dataset.
///
/// Implementations must keep `simulate` deterministic given the stream key
/// (the parameter must not influence which draws are consumed) and
/// `estimate` a pure function of the dataset, so the replica average over
/// fixed streams is a deterministic function of the parameter.
pub trait SimulableModel: Sync {
    type Data;

    /// Parameter dimension p.
    fn dimension(&self) -> usize;

    /// Total number of scalar responses in one simulated dataset.
    fn sample_size(&self) -> usize;

    fn simulate(&self, theta: &ParamVector, stream: &mut RandomStream) -> Self::Data;

    fn estimate(&self, data: &Self::Data) -> Result<ParamVector, EstimateError>;

    /// Closed-form expectation of the estimator under the model, where one
    /// exists (toy models). `None` means only the simulated surrogate is
    /// available.
    fn exact_pi(&self, _theta: &ParamVector) -> Option<ParamVector> {
        None
    }
}

/// Why an estimate could not be produced from a dataset.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    /// The estimating problem is unbounded (e.g. separation in a logistic
    /// fit); iterates diverged past the configured bound.
    #[error("estimator diverged (separation suspected)")]
    Diverged,
    /// The iteration cap was reached without meeting the tolerance.
    #[error("estimator failed to converge")]
    NotConverged,
    /// The dataset admits no estimate (degenerate sample, singular design).
    #[error("degenerate estimation problem: {0}")]
    Degenerate(String),
}
