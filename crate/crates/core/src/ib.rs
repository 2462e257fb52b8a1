//! Iterative-bootstrap bias reduction: the simulated surrogate mean, the
//! bias-correction map, and its fixed point.
//!
//! Given an initial estimate `theta_tilde`, the solver iterates
//!
//! ```text
//! theta_{k+1} = theta_tilde - { pi*(theta_k, n) - theta_k }
//! ```
//!
//! where `pi*(theta, n)` is the average of the estimator over `H` datasets
//! simulated at `theta` with fixed stream keys. Because the streams are
//! fixed, `pi*` is a deterministic function of `theta` and the recursion is
//! a deterministic fixed-point iteration; the limit is the bias-reduced
//! estimate. Iterates are clamped into the configured parameter box after
//! every step.

use crate::model::{EstimateError, SimulableModel};
use crate::param::{project_to_domain, DomainBounds, ParamVector};
use crate::stream::{derive_stream, tag, TagLabel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset added to the `sim` index per retry attempt, keeping retry streams
/// disjoint from all first-attempt replica streams.
const RETRY_STRIDE: u64 = 1 << 32;
/// First attempt plus two retries under [`FailurePolicy::RetryNextSubstream`].
const MAX_ATTEMPTS: u64 = 3;

/// What to do when a replica estimate fails inside a surrogate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Drop failed replicas and average the survivors (failure count kept).
    DropAndRenormalize,
    /// Re-simulate the failed replica from a fresh substream, up to two
    /// retries, then drop it.
    RetryNextSubstream,
    /// Any replica failure aborts the surrogate evaluation.
    Abort,
}

impl Default for FailurePolicy {
    fn default() -> Self {
        FailurePolicy::DropAndRenormalize
    }
}

/// Simulation and stopping parameters for one fixed-point solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationBudget {
    /// Number of simulated replicas H per surrogate evaluation.
    pub replicas: usize,
    pub base_seed: u64,
    /// Relative displacement tolerance: stop when
    /// `|theta_{k+1} - theta_k|_inf <= tol * (1 + |theta_{k+1}|_inf)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Use the model's closed-form `exact_pi` instead of simulation.
    pub use_exact_pi: bool,
    pub failure_policy: FailurePolicy,
}

impl SimulationBudget {
    pub fn new(replicas: usize, base_seed: u64) -> Result<Self, BudgetError> {
        let budget = SimulationBudget {
            replicas,
            base_seed,
            tol: 1e-8,
            max_iter: 50,
            use_exact_pi: false,
            failure_policy: FailurePolicy::default(),
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn exact_pi(mut self, on: bool) -> Self {
        self.use_exact_pi = on;
        self
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        if self.replicas == 0 {
            return Err(BudgetError::ZeroReplicas);
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(BudgetError::BadTolerance(self.tol));
        }
        if self.max_iter == 0 {
            return Err(BudgetError::ZeroIterations);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("replica count H must be at least 1")]
    ZeroReplicas,
    #[error("tolerance must be a positive finite number, got {0}")]
    BadTolerance(f64),
    #[error("max_iter must be at least 1")]
    ZeroIterations,
}

/// Result of one surrogate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePi {
    pub value: ParamVector,
    /// Replicas whose estimate failed and were dropped (after retries).
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurrogateError {
    #[error("all {replicas} replicas failed to produce an estimate; last error: {last}")]
    AllReplicasFailed {
        replicas: usize,
        last: EstimateError,
    },
    #[error("replica {replica} failed under the abort policy: {source}")]
    ReplicaFailed {
        replica: usize,
        source: EstimateError,
    },
    #[error("budget requests exact_pi but the model does not provide one")]
    ExactPiUnavailable,
}

/// Evaluate `pi*(theta, n)`: the fixed-stream replica average of the
/// estimator at `theta`, or the model's closed form when the budget says so.
/// Replica streams are keyed `(rep = rep_tag, sim = h)`, so repeated calls
/// at equal `theta` return identical output, and distinct replications use
/// disjoint randomness.
pub fn surrogate_pi<M: SimulableModel>(
    model: &M,
    theta: &ParamVector,
    budget: &SimulationBudget,
    rep_tag: u64,
) -> Result<SurrogatePi, SurrogateError> {
    if budget.use_exact_pi {
        let value = model
            .exact_pi(theta)
            .ok_or(SurrogateError::ExactPiUnavailable)?;
        return Ok(SurrogatePi { value, failures: 0 });
    }

    let estimates: Vec<Result<ParamVector, EstimateError>> = (0..budget.replicas)
        .into_par_iter()
        .map(|h| run_replica(model, theta, budget, rep_tag, h as u64))
        .collect();

    // Fixed-order reduction over h, so the mean is scheduling independent.
    let p = model.dimension();
    let mut sum = vec![0.0; p];
    let mut ok = 0usize;
    let mut last_err = None;
    for (h, res) in estimates.iter().enumerate() {
        match res {
            Ok(est) => {
                for (acc, v) in sum.iter_mut().zip(est.values()) {
                    *acc += v;
                }
                ok += 1;
            }
            Err(e) => {
                if budget.failure_policy == FailurePolicy::Abort {
                    return Err(SurrogateError::ReplicaFailed {
                        replica: h,
                        source: e.clone(),
                    });
                }
                last_err = Some(e.clone());
            }
        }
    }
    if ok == 0 {
        return Err(SurrogateError::AllReplicasFailed {
            replicas: budget.replicas,
            last: last_err.expect("at least one failure when none succeeded"),
        });
    }
    for acc in sum.iter_mut() {
        *acc /= ok as f64;
    }
    Ok(SurrogatePi {
        value: ParamVector::new(sum).expect("mean of finite estimates is finite"),
        failures: budget.replicas - ok,
    })
}

fn run_replica<M: SimulableModel>(
    model: &M,
    theta: &ParamVector,
    budget: &SimulationBudget,
    rep_tag: u64,
    h: u64,
) -> Result<ParamVector, EstimateError> {
    let attempts = match budget.failure_policy {
        FailurePolicy::RetryNextSubstream => MAX_ATTEMPTS,
        _ => 1,
    };
    let mut last = EstimateError::NotConverged;
    for attempt in 0..attempts {
        let sim_index = h + attempt * RETRY_STRIDE;
        let mut stream = derive_stream(
            budget.base_seed,
            &[tag(TagLabel::Rep, rep_tag), tag(TagLabel::Sim, sim_index)],
        )
        .expect("tag path is non-empty");
        let data = model.simulate(theta, &mut stream);
        match model.estimate(&data) {
            Ok(est) => return Ok(est),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// One step of the bias-correction map:
/// `T = theta_tilde - (pi_star_at_k - theta_k)`.
pub fn ib_step(
    theta_k: &ParamVector,
    theta_tilde: &ParamVector,
    pi_star_at_k: &ParamVector,
) -> ParamVector {
    assert_eq!(theta_k.len(), theta_tilde.len(), "dimension mismatch");
    assert_eq!(theta_k.len(), pi_star_at_k.len(), "dimension mismatch");
    let values = theta_tilde
        .values()
        .iter()
        .zip(theta_k.values().iter().zip(pi_star_at_k.values()))
        .map(|(tilde, (k, pi))| tilde - (pi - k))
        .collect();
    ParamVector::new(values).expect("finite inputs give finite step")
}

/// Trace and status of one fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct IbResult {
    pub theta_hat: ParamVector,
    /// `theta^(0) .. theta^(k)`, post projection.
    pub iterates: Vec<ParamVector>,
    /// `|theta^(k+1) - theta^(k)|_inf` per step; length equals `iterations`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Total replica estimation failures across all surrogate evaluations.
    pub replica_failures: usize,
}

impl IbResult {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("surrogate evaluation failed at iteration {iteration}: {source}")]
    Surrogate {
        iteration: usize,
        /// Iterates accumulated before the failure.
        trace: Vec<ParamVector>,
        source: SurrogateError,
    },
    #[error("initial estimate has dimension {got}, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("bounds have dimension {got}, model expects {expected}")]
    BoundsMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Budget(#[from] BudgetError),
}

/// Iterate the bias-correction map from `theta_tilde` to its fixed point.
///
/// Stops when the iterate displacement satisfies the relative tolerance or
/// the iteration cap is hit; non-convergence is reported in the result, not
/// as an error. Surrogate failure is an error carrying the partial trace.
pub fn solve_fixed_point<M: SimulableModel>(
    model: &M,
    theta_tilde: &ParamVector,
    budget: &SimulationBudget,
    bounds: &DomainBounds,
    rep_tag: u64,
) -> Result<IbResult, SolveError> {
    budget.validate()?;
    if theta_tilde.len() != model.dimension() {
        return Err(SolveError::DimensionMismatch {
            got: theta_tilde.len(),
            expected: model.dimension(),
        });
    }
    if bounds.dimension() != model.dimension() {
        return Err(SolveError::BoundsMismatch {
            got: bounds.dimension(),
            expected: model.dimension(),
        });
    }

    let (theta0, _) = project_to_domain(theta_tilde, bounds);
    let mut iterates = vec![theta0];
    let mut residuals = Vec::new();
    let mut replica_failures = 0usize;
    let mut converged = false;

    for k in 0..budget.max_iter {
        let current = iterates.last().expect("at least the starting point");
        let pi = match surrogate_pi(model, current, budget, rep_tag) {
            Ok(pi) => pi,
            Err(source) => {
                return Err(SolveError::Surrogate {
                    iteration: k,
                    trace: iterates,
                    source,
                })
            }
        };
        replica_failures += pi.failures;
        let stepped = ib_step(current, theta_tilde, &pi.value);
        let (next, _) = project_to_domain(&stepped, bounds);
        let residual = next.inf_distance(current);
        residuals.push(residual);
        let done = residual <= budget.tol * (1.0 + next.inf_norm());
        iterates.push(next);
        if done {
            converged = true;
            break;
        }
    }

    let theta_hat = iterates.last().expect("non-empty trace").clone();
    let iterations = residuals.len();
    Ok(IbResult {
        theta_hat,
        iterates,
        residuals,
        converged,
        iterations,
        replica_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar model with estimator average `pi(theta) = a * theta + b` in
    /// exact mode; simulation adds stream noise around that line.
    struct AffineModel {
        a: f64,
        b: f64,
        n: usize,
    }

    impl SimulableModel for AffineModel {
        type Data = f64;

        fn dimension(&self) -> usize {
            1
        }

        fn sample_size(&self) -> usize {
            self.n
        }

        fn simulate(&self, theta: &ParamVector, stream: &mut RandomStream) -> f64 {
            let mut noise = 0.0;
            for _ in 0..self.n {
                noise += stream.standard_normal();
            }
            self.a * theta[0] + self.b + noise / self.n as f64
        }

        fn estimate(&self, data: &f64) -> Result<ParamVector, EstimateError> {
            ParamVector::scalar(*data).map_err(|_| EstimateError::Degenerate("nan".into()))
        }

        fn exact_pi(&self, theta: &ParamVector) -> Option<ParamVector> {
            Some(ParamVector::scalar(self.a * theta[0] + self.b).unwrap())
        }
    }

    use crate::stream::RandomStream;

    fn wide_bounds() -> DomainBounds {
        DomainBounds::symmetric(1, 1e6)
    }

    #[test]
    fn ib_step_identity_when_unbiased() {
        let theta = ParamVector::scalar(0.4).unwrap();
        let tilde = ParamVector::scalar(1.3).unwrap();
        // pi* equals theta_k: zero estimated bias, step returns theta_tilde.
        let out = ib_step(&theta, &tilde, &theta);
        assert_eq!(out.values(), tilde.values());
    }

    #[test]
    fn ib_step_algebraic_identity() {
        let theta = ParamVector::new(vec![0.1, -2.0]).unwrap();
        let tilde = ParamVector::new(vec![0.7, 0.3]).unwrap();
        let pi = ParamVector::new(vec![0.25, -1.4]).unwrap();
        let out = ib_step(&theta, &tilde, &pi);
        for i in 0..2 {
            let lhs = out[i] + pi[i] - theta[i];
            assert!((lhs - tilde[i]).abs() <= 4.0 * f64::EPSILON * (1.0 + tilde[i].abs()));
        }
    }

    #[test]
    fn exact_affine_fixed_point() {
        // pi(theta) = a theta + b has fixed point of T at
        // (tilde - b) / a  when a != 0 (solves tilde = pi(theta)).
        let model = AffineModel {
            a: 10.0 / 9.0,
            b: 0.0,
            n: 10,
        };
        let budget = SimulationBudget::new(1, 0).unwrap().exact_pi(true);
        let tilde = ParamVector::scalar(1.0).unwrap();
        let res = solve_fixed_point(&model, &tilde, &budget, &wide_bounds(), 0).unwrap();
        assert!(res.converged);
        assert!((res.theta_hat[0] - 0.9).abs() < 1e-8);
        assert_eq!(res.residuals.len(), res.iterations);
        assert!(res.final_residual() <= budget.tol * (1.0 + res.theta_hat.inf_norm()));
    }

    #[test]
    fn solver_is_deterministic() {
        let model = AffineModel {
            a: 1.05,
            b: 0.2,
            n: 7,
        };
        let budget = SimulationBudget::new(20, 99).unwrap();
        let tilde = ParamVector::scalar(0.8).unwrap();
        let a = solve_fixed_point(&model, &tilde, &budget, &wide_bounds(), 3).unwrap();
        let b = solve_fixed_point(&model, &tilde, &budget, &wide_bounds(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn surrogate_is_deterministic_in_theta() {
        let model = AffineModel {
            a: 1.0,
            b: 0.05,
            n: 5,
        };
        let budget = SimulationBudget::new(16, 7).unwrap();
        let theta = ParamVector::scalar(1.23).unwrap();
        let a = surrogate_pi(&model, &theta, &budget, 2).unwrap();
        let b = surrogate_pi(&model, &theta, &budget, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_convergence_is_data_not_error() {
        // An expanding map never meets the tolerance.
        let model = AffineModel {
            a: -1.0,
            b: 0.0,
            n: 3,
        };
        let budget = SimulationBudget::new(1, 0)
            .unwrap()
            .exact_pi(true)
            .with_max_iter(5);
        let tilde = ParamVector::scalar(1.0).unwrap();
        let res = solve_fixed_point(&model, &tilde, &budget, &wide_bounds(), 0).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 5);
    }

    #[test]
    fn exact_pi_unavailable_is_an_error() {
        struct NoExact;
        impl SimulableModel for NoExact {
            type Data = ();
            fn dimension(&self) -> usize {
                1
            }
            fn sample_size(&self) -> usize {
                1
            }
            fn simulate(&self, _: &ParamVector, _: &mut RandomStream) {}
            fn estimate(&self, _: &()) -> Result<ParamVector, EstimateError> {
                ParamVector::scalar(0.0).map_err(|_| EstimateError::NotConverged)
            }
        }
        let budget = SimulationBudget::new(1, 0).unwrap().exact_pi(true);
        let err = surrogate_pi(&NoExact, &ParamVector::scalar(0.0).unwrap(), &budget, 0)
            .unwrap_err();
        assert_eq!(err, SurrogateError::ExactPiUnavailable);
    }

    #[test]
    fn budget_validation() {
        assert!(SimulationBudget::new(0, 1).is_err());
        let bad_tol = SimulationBudget::new(1, 1).unwrap().with_tol(0.0);
        assert!(bad_tol.validate().is_err());
        let bad_iter = SimulationBudget::new(1, 1).unwrap().with_max_iter(0);
        assert!(bad_iter.validate().is_err());
    }
}
