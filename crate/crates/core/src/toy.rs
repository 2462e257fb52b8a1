//! Scalar toy models whose estimator expectations are known in closed form.
//!
//! These serve as analytic oracles for the fixed-point solver: the exact
//! bias maps are
//!
//! * `normal_mean`: sample mean of N(theta, 1), `pi(theta, n) = theta`;
//! * `exp_rate`: `n / sum(X)` for Exp(rate theta), `pi = theta * n/(n-1)`;
//! * `unif_max`: `max(X)` for U(0, theta), `pi = theta * n/(n+1)`.
//!
//! `unif_max` is deliberately non-smooth in the data while its expectation
//! stays smooth in theta, stressing the solver the way discontinuous
//! estimators do.

use crate::model::{EstimateError, SimulableModel};
use crate::param::{DomainBounds, ParamVector};
use crate::stream::RandomStream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyModelId {
    NormalMean,
    ExpRate,
    UnifMax,
}

impl ToyModelId {
    pub fn parse(s: &str) -> Result<Self, ToyError> {
        match s {
            "normal_mean" => Ok(ToyModelId::NormalMean),
            "exp_rate" => Ok(ToyModelId::ExpRate),
            "unif_max" => Ok(ToyModelId::UnifMax),
            other => Err(ToyError::UnknownModel(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ToyModelId::NormalMean => "normal_mean",
            ToyModelId::ExpRate => "exp_rate",
            ToyModelId::UnifMax => "unif_max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToyError {
    #[error("unknown toy model `{0}` (expected normal_mean, exp_rate or unif_max)")]
    UnknownModel(String),
    #[error("exp_rate requires a sample size of at least 2, got {0}")]
    SampleTooSmall(usize),
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("theta0 = {0} is outside the model's domain")]
    BadTheta(f64),
}

/// Simulate a sample of size `n`. Each observation is a smooth transform of
/// one fixed stream draw, so theta enters only through the transform:
/// `-ln(u)/theta` (exp_rate), `theta * u` (unif_max), `theta + z`
/// (normal_mean).
pub fn toy_simulate(id: ToyModelId, theta: f64, n: usize, stream: &mut RandomStream) -> Vec<f64> {
    let mut sample = Vec::with_capacity(n);
    match id {
        ToyModelId::NormalMean => {
            for _ in 0..n {
                sample.push(theta + stream.standard_normal());
            }
        }
        ToyModelId::ExpRate => {
            debug_assert!(theta > 0.0);
            for _ in 0..n {
                sample.push(-stream.uniform().ln() / theta);
            }
        }
        ToyModelId::UnifMax => {
            debug_assert!(theta > 0.0);
            for _ in 0..n {
                sample.push(theta * stream.uniform());
            }
        }
    }
    sample
}

/// Closed-form estimator for each model: mean, `n / sum`, max.
pub fn toy_estimate(id: ToyModelId, sample: &[f64]) -> Result<f64, EstimateError> {
    if sample.is_empty() {
        return Err(EstimateError::Degenerate("empty sample".into()));
    }
    let n = sample.len() as f64;
    match id {
        ToyModelId::NormalMean => Ok(sample.iter().sum::<f64>() / n),
        ToyModelId::ExpRate => {
            let total: f64 = sample.iter().sum();
            if total <= 0.0 {
                return Err(EstimateError::Degenerate(
                    "exp_rate needs a positive sample sum".into(),
                ));
            }
            Ok(n / total)
        }
        ToyModelId::UnifMax => Ok(sample.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))),
    }
}

/// Exact `E[estimator]` under the model at `theta` with sample size `n`.
pub fn toy_exact_pi(id: ToyModelId, theta: f64, n: usize) -> Result<f64, ToyError> {
    if n == 0 {
        return Err(ToyError::EmptySample);
    }
    match id {
        ToyModelId::NormalMean => Ok(theta),
        ToyModelId::ExpRate => {
            // sum(X) ~ Gamma(n, theta); E[n / sum] = theta * n / (n - 1).
            if n < 2 {
                return Err(ToyError::SampleTooSmall(n));
            }
            Ok(theta * n as f64 / (n as f64 - 1.0))
        }
        // E[max] from the order-statistic density n x^{n-1} / theta^n.
        ToyModelId::UnifMax => Ok(theta * n as f64 / (n as f64 + 1.0)),
    }
}

/// A toy model bound to a sample size, implementing the simulate/estimate
/// contract with its closed-form `pi` attached.
#[derive(Debug, Clone)]
pub struct ToyModel {
    id: ToyModelId,
    n: usize,
}

impl ToyModel {
    pub fn new(id: ToyModelId, n: usize) -> Result<Self, ToyError> {
        if n == 0 {
            return Err(ToyError::EmptySample);
        }
        if id == ToyModelId::ExpRate && n < 2 {
            return Err(ToyError::SampleTooSmall(n));
        }
        Ok(ToyModel { id, n })
    }

    pub fn id(&self) -> ToyModelId {
        self.id
    }

    pub fn default_bounds(&self) -> DomainBounds {
        match self.id {
            ToyModelId::NormalMean => DomainBounds::symmetric(1, 1e6),
            // Positive-theta families.
            ToyModelId::ExpRate | ToyModelId::UnifMax => {
                DomainBounds::new(vec![1e-9], vec![1e6]).expect("valid interval")
            }
        }
    }
}

impl SimulableModel for ToyModel {
    type Data = Vec<f64>;

    fn dimension(&self) -> usize {
        1
    }

    fn sample_size(&self) -> usize {
        self.n
    }

    fn simulate(&self, theta: &ParamVector, stream: &mut RandomStream) -> Vec<f64> {
        toy_simulate(self.id, theta[0], self.n, stream)
    }

    fn estimate(&self, data: &Vec<f64>) -> Result<ParamVector, EstimateError> {
        let est = toy_estimate(self.id, data)?;
        ParamVector::scalar(est).map_err(|_| EstimateError::Degenerate("non-finite".into()))
    }

    fn exact_pi(&self, theta: &ParamVector) -> Option<ParamVector> {
        let pi = toy_exact_pi(self.id, theta[0], self.n).ok()?;
        ParamVector::scalar(pi).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ib::{ib_step, solve_fixed_point, SimulationBudget};
    use crate::stream::{derive_stream, tag, TagLabel};

    #[test]
    fn simulate_transforms_fixed_draws() {
        // unif_max: theta scales the uniforms.
        let mut s = derive_stream(1, &[tag(TagLabel::Sim, 0)]).unwrap();
        let us: Vec<f64> = (0..3).map(|_| s.uniform()).collect();
        let mut s2 = derive_stream(1, &[tag(TagLabel::Sim, 0)]).unwrap();
        let sample = toy_simulate(ToyModelId::UnifMax, 2.0, 3, &mut s2);
        for (x, u) in sample.iter().zip(&us) {
            assert_eq!(*x, 2.0 * u);
        }
        // exp_rate: x_i = -ln(u_i)/theta against regenerated uniforms.
        let mut s5 = derive_stream(3, &[tag(TagLabel::Sim, 2)]).unwrap();
        let us5: Vec<f64> = (0..4).map(|_| s5.uniform()).collect();
        let mut s6 = derive_stream(3, &[tag(TagLabel::Sim, 2)]).unwrap();
        let sample_exp = toy_simulate(ToyModelId::ExpRate, 2.5, 4, &mut s6);
        for (x, u) in sample_exp.iter().zip(&us5) {
            assert_eq!(*x, -u.ln() / 2.5);
        }
        // normal_mean at theta = 0 is the raw normals.
        let mut s3 = derive_stream(2, &[tag(TagLabel::Sim, 1)]).unwrap();
        let zs: Vec<f64> = (0..2).map(|_| s3.standard_normal()).collect();
        let mut s4 = derive_stream(2, &[tag(TagLabel::Sim, 1)]).unwrap();
        let sample2 = toy_simulate(ToyModelId::NormalMean, 0.0, 2, &mut s4);
        assert_eq!(sample2, zs);
    }

    #[test]
    fn estimators_closed_forms() {
        assert_eq!(
            toy_estimate(ToyModelId::NormalMean, &[1.0, 2.0, 3.0]).unwrap(),
            2.0
        );
        assert_eq!(toy_estimate(ToyModelId::ExpRate, &[0.5, 1.5]).unwrap(), 1.0);
        assert_eq!(
            toy_estimate(ToyModelId::UnifMax, &[0.2, 1.0, 1.8]).unwrap(),
            1.8
        );
        assert!(toy_estimate(ToyModelId::NormalMean, &[]).is_err());
    }

    #[test]
    fn exact_pi_values() {
        assert_eq!(toy_exact_pi(ToyModelId::NormalMean, 0.7, 13).unwrap(), 0.7);
        let pi = toy_exact_pi(ToyModelId::ExpRate, 1.0, 10).unwrap();
        assert!((pi - 10.0 / 9.0).abs() < 1e-15);
        assert!((toy_exact_pi(ToyModelId::UnifMax, 2.0, 4).unwrap() - 1.6).abs() < 1e-15);
        assert!(toy_exact_pi(ToyModelId::ExpRate, 1.0, 1).is_err());
    }

    #[test]
    fn ib_step_closed_forms() {
        // exp_rate: T = 1.0 - (10/9 - 1) = 8/9.
        let t = ib_step(
            &ParamVector::scalar(1.0).unwrap(),
            &ParamVector::scalar(1.0).unwrap(),
            &ParamVector::scalar(toy_exact_pi(ToyModelId::ExpRate, 1.0, 10).unwrap()).unwrap(),
        );
        assert!((t[0] - 8.0 / 9.0).abs() < 1e-15);
        // unif_max: pi(1.0, 9) = 0.9; T = 0.9 - (0.9 - 1.0) = 1.0.
        let t2 = ib_step(
            &ParamVector::scalar(1.0).unwrap(),
            &ParamVector::scalar(0.9).unwrap(),
            &ParamVector::scalar(toy_exact_pi(ToyModelId::UnifMax, 1.0, 9).unwrap()).unwrap(),
        );
        assert!((t2[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_fixed_points_match_closed_forms() {
        // exp_rate: theta_hat = theta_tilde * (n-1)/n.
        let model = ToyModel::new(ToyModelId::ExpRate, 12).unwrap();
        let budget = SimulationBudget::new(1, 0).unwrap().exact_pi(true).with_tol(1e-10);
        let res = solve_fixed_point(
            &model,
            &ParamVector::scalar(1.2).unwrap(),
            &budget,
            &model.default_bounds(),
            0,
        )
        .unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 15);
        assert!((res.theta_hat[0] - 1.1).abs() < 1e-9);

        // unif_max: theta_hat = theta_tilde * (n+1)/n.
        let model = ToyModel::new(ToyModelId::UnifMax, 8).unwrap();
        let res = solve_fixed_point(
            &model,
            &ParamVector::scalar(0.88).unwrap(),
            &budget,
            &model.default_bounds(),
            0,
        )
        .unwrap();
        assert!(res.converged);
        assert!((res.theta_hat[0] - 0.99).abs() < 1e-9);

        // normal_mean: identity bias map, one iteration, zero residual.
        let model = ToyModel::new(ToyModelId::NormalMean, 5).unwrap();
        let res = solve_fixed_point(
            &model,
            &ParamVector::scalar(0.3).unwrap(),
            &budget,
            &model.default_bounds(),
            0,
        )
        .unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.residuals, vec![0.0]);
        assert_eq!(res.theta_hat[0], 0.3);
    }

    #[test]
    fn surrogate_matches_gamma_inverse_moment() {
        // Simulated pi* at theta = 1, n = 10 vs the Gamma oracle 10/9,
        // within 4 Monte Carlo standard errors.
        let model = ToyModel::new(ToyModelId::ExpRate, 10).unwrap();
        let h = 10_000usize;
        let budget = SimulationBudget::new(h, 42).unwrap();
        let theta = ParamVector::scalar(1.0).unwrap();
        let pi = crate::ib::surrogate_pi(&model, &theta, &budget, 0).unwrap();
        // var(n/G) for G ~ Gamma(10,1): n^2/((n-1)(n-2)) - (n/(n-1))^2.
        let n = 10.0f64;
        let var = n * n / ((n - 1.0) * (n - 2.0)) - (n / (n - 1.0)).powi(2);
        let se = (var / h as f64).sqrt();
        assert!(
            (pi.value[0] - 10.0 / 9.0).abs() <= 4.0 * se,
            "pi* = {}, oracle = {}, 4se = {}",
            pi.value[0],
            10.0 / 9.0,
            4.0 * se
        );
        assert_eq!(pi.failures, 0);
    }

    #[test]
    fn exact_mode_uses_closed_form() {
        let model = ToyModel::new(ToyModelId::NormalMean, 20).unwrap();
        let budget = SimulationBudget::new(1, 0).unwrap().exact_pi(true);
        let pi =
            crate::ib::surrogate_pi(&model, &ParamVector::scalar(0.7).unwrap(), &budget, 0)
                .unwrap();
        assert_eq!(pi.value[0], 0.7);
    }

    #[test]
    fn replica_map_is_deterministic_in_theta() {
        // For fixed h, theta -> estimate(simulate(theta)) is a function.
        let model = ToyModel::new(ToyModelId::ExpRate, 25).unwrap();
        for &theta in &[0.3, 1.0, 4.5] {
            let tv = ParamVector::scalar(theta).unwrap();
            let mut s1 = derive_stream(9, &[tag(TagLabel::Rep, 1), tag(TagLabel::Sim, 4)]).unwrap();
            let mut s2 = derive_stream(9, &[tag(TagLabel::Rep, 1), tag(TagLabel::Sim, 4)]).unwrap();
            let a = model.estimate(&model.simulate(&tv, &mut s1)).unwrap();
            let b = model.estimate(&model.simulate(&tv, &mut s2)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn monte_carlo_consistency_grid() {
        // Mean of the estimator over many samples matches exact pi within
        // 4 standard errors, per model over a grid of (theta, n).
        let grid: &[(ToyModelId, f64, usize)] = &[
            (ToyModelId::NormalMean, 0.7, 10),
            (ToyModelId::NormalMean, -2.0, 40),
            (ToyModelId::ExpRate, 1.0, 5),
            (ToyModelId::ExpRate, 3.0, 10),
            (ToyModelId::ExpRate, 0.5, 50),
            (ToyModelId::UnifMax, 2.0, 4),
            (ToyModelId::UnifMax, 1.0, 9),
            (ToyModelId::UnifMax, 5.0, 100),
        ];
        let reps = 100_000usize;
        for &(id, theta, n) in grid {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for r in 0..reps {
                let mut s =
                    derive_stream(7, &[tag(TagLabel::Sim, r as u64)]).unwrap();
                let est = toy_estimate(id, &toy_simulate(id, theta, n, &mut s)).unwrap();
                sum += est;
                sumsq += est * est;
            }
            let mean = sum / reps as f64;
            let var = (sumsq - sum * sum / reps as f64) / (reps as f64 - 1.0);
            let se = (var / reps as f64).sqrt();
            let exact = toy_exact_pi(id, theta, n).unwrap();
            assert!(
                (mean - exact).abs() <= 4.0 * se,
                "{:?} theta={theta} n={n}: mean {mean} vs exact {exact} (4se {})",
                id,
                4.0 * se
            );
        }
    }
}
