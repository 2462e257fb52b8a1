//! Logistic regression: design generation, response simulation through
//! fixed uniforms, maximum likelihood by damped IRLS, and the
//! misclassification contamination scheme.
//!
//! The solver accepts fractional responses in `[0, 1]`, so the same code
//! fits binary data and pseudo-values. Response simulation thresholds a
//! fixed stream uniform at the success probability, which keeps the
//! simulated data a deterministic function of the parameter for a given
//! stream key (common random numbers).

use crate::linalg::{cholesky_solve, LinalgError};
use crate::model::{EstimateError, SimulableModel};
use crate::param::{DomainBounds, ParamVector};
use crate::stream::RandomStream;
use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

/// Numerically stable logistic function.
pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
pub fn log1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Bernoulli variance function `V(mu) = mu (1 - mu)`.
pub fn variance_fn(mu: f64) -> f64 {
    mu * (1.0 - mu)
}

/// Fixed covariate matrix with rows as observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: Array2<f64>,
}

impl DesignMatrix {
    pub fn new(x: Array2<f64>) -> Result<Self, FitError> {
        let (n, p) = x.dim();
        if p == 0 || n < p {
            return Err(FitError::BadShape { n, p });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFiniteDesign);
        }
        Ok(DesignMatrix { x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Array1<f64> {
        assert_eq!(beta.len(), self.p(), "dimension mismatch");
        let b = ArrayView1::from(beta);
        self.x.dot(&b)
    }

    /// Success probabilities `expit(x_i beta)` per observation.
    pub fn means(&self, beta: &[f64]) -> Vec<f64> {
        self.linear_predictor(beta).iter().map(|&e| expit(e)).collect()
    }
}

/// Binary responses stored as bytes; fractional views are materialized on
/// demand.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryResponses {
    y: Vec<u8>,
}

impl BinaryResponses {
    pub fn from_bits(y: Vec<u8>) -> Result<Self, FitError> {
        if y.iter().any(|&b| b > 1) {
            return Err(FitError::NonBinaryResponse);
        }
        Ok(BinaryResponses { y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.y
    }

    pub fn count_ones(&self) -> usize {
        self.y.iter().map(|&b| b as usize).sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.y.iter().map(|&b| b as f64).collect()
    }
}

/// Covariates drawn i.i.d. N(mean, 4/sqrt(n)); the shrinking variance keeps
/// the size of the log-odds stable as n grows.
pub fn generate_design(
    n: usize,
    p: usize,
    mean: f64,
    stream: &mut RandomStream,
) -> Result<DesignMatrix, FitError> {
    if p == 0 || n < p {
        return Err(FitError::BadShape { n, p });
    }
    let sd = (4.0 / (n as f64).sqrt()).sqrt();
    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = mean + sd * stream.standard_normal();
        }
    }
    DesignMatrix::new(x)
}

/// `y_i = 1{ u_i <= expit(x_i beta) }` with one stream uniform per
/// observation.
pub fn simulate_responses(
    x: &DesignMatrix,
    beta: &[f64],
    stream: &mut RandomStream,
) -> BinaryResponses {
    let mu = x.means(beta);
    let y = mu
        .iter()
        .map(|&m| if stream.uniform() <= m { 1u8 } else { 0u8 })
        .collect();
    BinaryResponses { y }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Convergence: infinity norm of the mean score.
    pub score_tol: f64,
    pub max_iter: usize,
    /// `|beta|_inf` beyond which the fit is declared separated.
    pub divergence_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            score_tol: 1e-9,
            max_iter: 100,
            divergence_bound: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: ParamVector,
    pub converged: bool,
    pub iterations: usize,
    /// `|(1/n) sum x_i (y_i - mu_i)|_inf` at the returned beta.
    pub score_norm: f64,
    /// Separation indicator: iterates crossed the divergence bound.
    pub diverging: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("design must satisfy n >= p >= 1, got n = {n}, p = {p}")]
    BadShape { n: usize, p: usize },
    #[error("design matrix contains non-finite entries")]
    NonFiniteDesign,
    #[error("responses must be 0/1 bytes")]
    NonBinaryResponse,
    #[error("responses must lie in [0, 1], found {0}")]
    ResponseOutOfRange(f64),
    #[error("response length {got} does not match design rows {expected}")]
    ResponseLength { got: usize, expected: usize },
    #[error("weighted design is rank deficient")]
    RankDeficient(#[from] LinalgError),
    #[error("contamination rate {rate} invalid for n = {n} (need rate*n >= 2 or rate = 0)")]
    BadContaminationRate { rate: f64, n: usize },
    #[error("mean vector length {got} does not match responses {expected}")]
    MeanLength { got: usize, expected: usize },
}

/// Mean log-likelihood for fractional responses.
fn mean_loglik(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> f64 {
    let eta = x.linear_predictor(beta);
    let mut ll = 0.0;
    for (yi, e) in y.iter().zip(eta.iter()) {
        ll += yi * e - log1p_exp(*e);
    }
    ll / y.len() as f64
}

/// Mean score `(1/n) sum x_i (y_i - mu_i)`.
pub fn mean_score(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Array1<f64> {
    let eta = x.linear_predictor(beta);
    let n = x.n();
    let mut s = Array1::<f64>::zeros(x.p());
    for i in 0..n {
        let resid = y[i] - expit(eta[i]);
        s.scaled_add(resid, &x.row(i));
    }
    s / n as f64
}

fn check_responses(x: &DesignMatrix, y: &[f64]) -> Result<(), FitError> {
    if y.len() != x.n() {
        return Err(FitError::ResponseLength {
            got: y.len(),
            expected: x.n(),
        });
    }
    if let Some(&bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(FitError::ResponseOutOfRange(bad));
    }
    Ok(())
}

/// Maximum likelihood by iteratively reweighted least squares with
/// step-halving. Accepts fractional responses so pseudo-values fit through
/// the same path. Separation is reported through `diverging`, not as an
/// error; a rank-deficient weighted design is an error.
pub fn fit_mle(x: &DesignMatrix, y: &[f64], opts: &FitOptions) -> Result<FitResult, FitError> {
    check_responses(x, y)?;
    let n = x.n();
    let p = x.p();
    let mut beta = vec![0.0; p];
    let mut ll = mean_loglik(x, y, &beta);
    let mut iterations = 0;
    let mut converged = false;
    let mut diverging = false;
    let mut score_norm = f64::INFINITY;

    for it in 0..opts.max_iter {
        iterations = it;
        let eta = x.linear_predictor(&beta);
        let mu: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let mut score = Array1::<f64>::zeros(p);
        for i in 0..n {
            score.scaled_add(y[i] - mu[i], &x.row(i));
        }
        score /= n as f64;
        score_norm = score.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if score_norm <= opts.score_tol {
            converged = true;
            break;
        }

        // Expected information (1/n) X^T W X with floored weights.
        let mut info = Array2::<f64>::zeros((p, p));
        for i in 0..n {
            let w = variance_fn(mu[i]).max(1e-10);
            let row = x.row(i);
            for a in 0..p {
                let wa = w * row[a];
                for b in a..p {
                    info[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        info /= n as f64;
        let delta = cholesky_solve(&info, &score)?;

        // Step-halving until the likelihood stops getting worse.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta
                .iter()
                .zip(delta.iter())
                .map(|(b, d)| b + lambda * d)
                .collect();
            let cand_ll = mean_loglik(x, y, &cand);
            if cand_ll > ll - 1e-14 * (1.0 + ll.abs()) {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        if beta.iter().any(|b| b.abs() > opts.divergence_bound) {
            diverging = true;
            break;
        }
    }

    if !converged && !diverging {
        // Recompute the score norm at the final beta.
        let s = mean_score(x, y, &beta);
        score_norm = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        converged = score_norm <= opts.score_tol;
    }

    Ok(FitResult {
        beta_hat: ParamVector::new(beta).expect("finite iterates"),
        converged: converged && !diverging,
        iterations: iterations + 1,
        score_norm,
        diverging,
    })
}

/// Misclassification contamination: pair the k-th largest-mean observation
/// with the k-th smallest and swap their responses, for
/// `m = round(rate * n / 2)` pairs. The response total is preserved and at
/// most `2m` entries change.
pub fn contaminate(
    y: &BinaryResponses,
    mu: &[f64],
    rate: f64,
) -> Result<BinaryResponses, FitError> {
    let n = y.len();
    if mu.len() != n {
        return Err(FitError::MeanLength {
            got: mu.len(),
            expected: n,
        });
    }
    if rate == 0.0 {
        return Ok(y.clone());
    }
    if !(0.0..1.0).contains(&rate) || rate * (n as f64) < 2.0 {
        return Err(FitError::BadContaminationRate { rate, n });
    }
    let pairs = (rate * n as f64 / 2.0).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    // Descending by mean; ties broken by index for determinism.
    order.sort_by(|&a, &b| {
        mu[b].partial_cmp(&mu[a])
            .expect("finite means")
            .then(a.cmp(&b))
    });
    let mut out = y.y.clone();
    for k in 0..pairs {
        let hi = order[k];
        let lo = order[n - 1 - k];
        if hi != lo {
            out.swap(hi, lo);
        }
    }
    Ok(BinaryResponses { y: out })
}

/// Logistic regression bound to a fixed design, exposing the
/// simulate/estimate contract for the fixed-point solver.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    design: DesignMatrix,
    opts: FitOptions,
}

impl LogisticModel {
    pub fn new(design: DesignMatrix, opts: FitOptions) -> Self {
        LogisticModel { design, opts }
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn fit(&self, y: &BinaryResponses) -> Result<FitResult, FitError> {
        fit_mle(&self.design, &y.to_f64(), &self.opts)
    }

    pub fn default_bounds(&self) -> DomainBounds {
        DomainBounds::symmetric(self.design.p(), 30.0)
    }
}

impl SimulableModel for LogisticModel {
    type Data = BinaryResponses;

    fn dimension(&self) -> usize {
        self.design.p()
    }

    fn sample_size(&self) -> usize {
        self.design.n()
    }

    fn simulate(&self, theta: &ParamVector, stream: &mut RandomStream) -> BinaryResponses {
        simulate_responses(&self.design, theta.values(), stream)
    }

    fn estimate(&self, data: &BinaryResponses) -> Result<ParamVector, EstimateError> {
        fit_to_estimate(self.fit(data))
    }
}

/// Shared mapping from a fit outcome to the estimate contract.
pub(crate) fn fit_to_estimate(
    fit: Result<FitResult, FitError>,
) -> Result<ParamVector, EstimateError> {
    match fit {
        Ok(res) if res.converged => Ok(res.beta_hat),
        Ok(res) if res.diverging => Err(EstimateError::Diverged),
        Ok(_) => Err(EstimateError::NotConverged),
        Err(e) => Err(EstimateError::Degenerate(e.to_string())),
    }
}
