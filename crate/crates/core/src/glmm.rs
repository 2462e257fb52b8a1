//! Random-intercept logistic regression: simulation, the adaptive
//! Gauss-Hermite marginal likelihood and its maximizer, and a fast
//! joint-mode estimator used as a cheap, mildly biased starting point for
//! the bias-correction solver.
//!
//! The model: responses `y_ij` in cluster `i` have
//! `P(y_ij = 1 | U_i) = expit(x_ij' beta + U_i)` with `U_i ~ N(0, sigma2)`.
//! The marginal likelihood integrates each cluster's random intercept out;
//! the integrals are one-dimensional, so mode-centered, curvature-scaled
//! Gauss-Hermite quadrature converges very fast in the node count.
//!
//! `fit_joint_mode` mirrors a penalized-IRLS scheme: it alternates a Newton
//! maximization of the joint penalized log-likelihood in `(beta, u)` with
//! the variance update `sigma2 = mean(u_i^2 + v_i)`, `v_i` the Laplace
//! posterior variance of `u_i`. It is allowed to be asymptotically biased;
//! that is the regime the fixed-point correction is designed for.

use crate::ghq::GaussHermite;
use crate::linalg::{cholesky_solve, LinalgError};
use crate::logistic::{expit, fit_mle, log1p_exp, variance_fn, DesignMatrix, FitError,
    FitOptions};
use crate::model::{EstimateError, SimulableModel};
use crate::param::{DomainBounds, ParamVector};
use crate::optim::{minimize, BfgsOptions};
use crate::stream::RandomStream;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One cluster: fixed design rows and binary responses.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmmCluster {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl GlmmCluster {
    pub fn size(&self) -> usize {
        self.x.nrows()
    }
}

/// Clustered dataset; all clusters share the covariate dimension q.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredData {
    clusters: Vec<GlmmCluster>,
}

impl ClusteredData {
    pub fn new(clusters: Vec<GlmmCluster>) -> Result<Self, GlmmError> {
        if clusters.is_empty() {
            return Err(GlmmError::Data("no clusters".into()));
        }
        let q = clusters[0].x.ncols();
        if q == 0 {
            return Err(GlmmError::Data("zero covariate dimension".into()));
        }
        for (i, c) in clusters.iter().enumerate() {
            if c.x.ncols() != q {
                return Err(GlmmError::Data(format!(
                    "cluster {i} has q = {}, expected {q}",
                    c.x.ncols()
                )));
            }
            if c.x.nrows() == 0 || c.x.nrows() != c.y.len() {
                return Err(GlmmError::Data(format!(
                    "cluster {i} has {} design rows and {} responses",
                    c.x.nrows(),
                    c.y.len()
                )));
            }
            if c.x.iter().any(|v| !v.is_finite()) {
                return Err(GlmmError::Data(format!("cluster {i} has non-finite covariates")));
            }
            if c.y.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(GlmmError::Data(format!("cluster {i} has non-binary responses")));
            }
        }
        Ok(ClusteredData { clusters })
    }

    pub fn clusters(&self) -> &[GlmmCluster] {
        &self.clusters
    }

    pub fn m(&self) -> usize {
        self.clusters.len()
    }

    pub fn q(&self) -> usize {
        self.clusters[0].x.ncols()
    }

    pub fn n_total(&self) -> usize {
        self.clusters.iter().map(|c| c.size()).sum()
    }

    /// Stacked design and responses, losing the grouping.
    pub fn pooled(&self) -> Result<(DesignMatrix, Vec<f64>), FitError> {
        let n = self.n_total();
        let q = self.q();
        let mut x = Array2::<f64>::zeros((n, q));
        let mut y = Vec::with_capacity(n);
        let mut row = 0;
        for c in &self.clusters {
            for j in 0..c.size() {
                x.row_mut(row).assign(&c.x.row(j));
                y.push(c.y[j]);
                row += 1;
            }
        }
        Ok((DesignMatrix::new(x)?, y))
    }
}

/// Fixed effects plus the random-intercept variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmmParams {
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

impl GlmmParams {
    pub fn new(beta: Vec<f64>, sigma2: f64) -> Result<Self, GlmmError> {
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(GlmmError::BadSigma(sigma2));
        }
        Ok(GlmmParams { beta, sigma2 })
    }

    /// Flatten to `(beta..., sigma2)`.
    pub fn to_vector(&self) -> ParamVector {
        let mut v = self.beta.clone();
        v.push(self.sigma2);
        ParamVector::new(v).expect("finite parameters")
    }

    pub fn from_vector(theta: &ParamVector) -> Self {
        let vals = theta.values();
        let (beta, last) = vals.split_at(vals.len() - 1);
        GlmmParams {
            beta: beta.to_vec(),
            // The solver clamps into the domain box; guard the exact edge.
            sigma2: last[0].max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlmmError {
    #[error("quadrature node count must be odd, got {0}")]
    EvenNodes(usize),
    #[error(transparent)]
    Ghq(#[from] crate::ghq::GhqError),
    #[error("sigma2 must be nonnegative and finite, got {0}")]
    BadSigma(f64),
    #[error("clustered data invalid: {0}")]
    Data(String),
    #[error("at least 2 clusters required, got {0}")]
    TooFewClusters(usize),
    #[error("beta length {got} does not match design q = {expected}")]
    BetaLength { got: usize, expected: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Simulate responses on a fixed clustered design. The stream first yields
/// one standard normal per cluster (the scaled random intercepts), then one
/// uniform per observation in cluster order, so the draw layout does not
/// depend on the parameter.
pub fn simulate_glmm(
    design: &ClusteredData,
    params: &GlmmParams,
    stream: &mut RandomStream,
) -> ClusteredData {
    let sigma = params.sigma2.max(0.0).sqrt();
    let z: Vec<f64> = (0..design.m()).map(|_| stream.standard_normal()).collect();
    let clusters = design
        .clusters
        .iter()
        .zip(&z)
        .map(|(c, zi)| {
            let beta = ndarray::ArrayView1::from(&params.beta[..]);
            let eta = c.x.dot(&beta) + sigma * *zi;
            let y = eta.mapv(|e| if stream.uniform() <= expit(e) { 1.0 } else { 0.0 });
            GlmmCluster { x: c.x.clone(), y }
        })
        .collect();
    ClusteredData { clusters }
}

/// Joint log-density of one cluster's responses at random intercept `u`,
/// without the Gaussian prior term.
fn cluster_loglik(cluster: &GlmmCluster, beta: &[f64], u: f64) -> f64 {
    let b = ndarray::ArrayView1::from(beta);
    let eta = cluster.x.dot(&b);
    let mut ll = 0.0;
    for (yj, e) in cluster.y.iter().zip(eta.iter()) {
        let h = e + u;
        ll += yj * h - log1p_exp(h);
    }
    ll
}

/// First and second derivative in `u` of the penalized cluster objective
/// `cluster_loglik - u^2 / (2 sigma2)`.
fn cluster_penalized_derivs(cluster: &GlmmCluster, beta: &[f64], u: f64, sigma2: f64) -> (f64, f64) {
    let b = ndarray::ArrayView1::from(beta);
    let eta = cluster.x.dot(&b);
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (yj, e) in cluster.y.iter().zip(eta.iter()) {
        let mu = expit(e + u);
        d1 += yj - mu;
        d2 -= variance_fn(mu);
    }
    (d1 - u / sigma2, d2 - 1.0 / sigma2)
}

/// Posterior mode of one cluster's random intercept by Newton with a
/// bisection safeguard; the objective is strictly concave so the root of
/// the derivative is unique.
fn cluster_mode(cluster: &GlmmCluster, beta: &[f64], sigma2: f64) -> f64 {
    let deriv = |u: f64| cluster_penalized_derivs(cluster, beta, u, sigma2).0;
    let d0 = deriv(0.0);
    if d0 == 0.0 {
        return 0.0;
    }
    // Bracket the root; |u*| <= sigma2 * |sum residuals| keeps this finite.
    let (mut lo, mut hi);
    if d0 > 0.0 {
        lo = 0.0;
        hi = 1.0;
        while deriv(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
    } else {
        hi = 0.0;
        lo = -1.0;
        while deriv(lo) < 0.0 {
            lo *= 2.0;
            if lo < -1e12 {
                break;
            }
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (d1, d2) = cluster_penalized_derivs(cluster, beta, u, sigma2);
        if d1 > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let newton = u - d1 / d2;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - u).abs();
        u = next;
        if step <= 1e-13 * (1.0 + u.abs()) {
            break;
        }
    }
    u
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn marginal_loglik_inner(
    data: &ClusteredData,
    params: &GlmmParams,
    ghq: &GaussHermite,
) -> Result<f64, GlmmError> {
    if params.beta.len() != data.q() {
        return Err(GlmmError::BetaLength {
            got: params.beta.len(),
            expected: data.q(),
        });
    }
    if !params.sigma2.is_finite() || params.sigma2 < 0.0 {
        return Err(GlmmError::BadSigma(params.sigma2));
    }
    // Exact degenerate limit: a point mass at u = 0.
    if params.sigma2 == 0.0 {
        return Ok(data
            .clusters
            .iter()
            .map(|c| cluster_loglik(c, &params.beta, 0.0))
            .sum());
    }

    let sigma2 = params.sigma2;
    let norm_const = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
    let mut total = 0.0;
    let mut terms = Vec::with_capacity(ghq.len());
    for cluster in &data.clusters {
        let mode = cluster_mode(cluster, &params.beta, sigma2);
        let (_, d2) = cluster_penalized_derivs(cluster, &params.beta, mode, sigma2);
        let tau = (-1.0 / d2).sqrt();
        let scale = std::f64::consts::SQRT_2 * tau;
        terms.clear();
        for (node, weight) in ghq.iter() {
            let u = mode + scale * node;
            let q_u = cluster_loglik(cluster, &params.beta, u) - u * u / (2.0 * sigma2);
            terms.push(weight.ln() + node * node + q_u);
        }
        total += norm_const + scale.ln() + log_sum_exp(&terms);
    }
    Ok(total)
}

/// Marginal log-likelihood with the random intercepts integrated out by
/// mode-centered, curvature-scaled Gauss-Hermite quadrature on `nodes`
/// points. `nodes` must be odd so one node sits at the cluster mode;
/// `sigma2 = 0` is evaluated as the exact degenerate limit.
pub fn marginal_loglik_ghq(
    data: &ClusteredData,
    params: &GlmmParams,
    nodes: usize,
) -> Result<f64, GlmmError> {
    if nodes % 2 == 0 {
        return Err(GlmmError::EvenNodes(nodes));
    }
    let ghq = GaussHermite::new(nodes)?;
    marginal_loglik_inner(data, params, &ghq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmmFitOptions {
    pub nodes: usize,
    /// Gradient tolerance for the quadrature MLE (in the optimizer scale).
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Fix the variance at this value instead of updating it (joint mode).
    pub fix_sigma2: Option<f64>,
    /// `|beta|_inf` beyond which a fit is declared separated.
    pub divergence_bound: f64,
}

impl Default for GlmmFitOptions {
    fn default() -> Self {
        GlmmFitOptions {
            nodes: 31,
            grad_tol: 1e-6,
            max_iter: 300,
            fix_sigma2: None,
            divergence_bound: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmmFit {
    pub params: GlmmParams,
    pub converged: bool,
    /// The variance ran into the sigma2 = 0 boundary.
    pub boundary: bool,
    pub diverging: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Log-sigma below which the variance is reported as a boundary solution.
const LOG_SIGMA_FLOOR: f64 = -15.0;

fn pooled_start(data: &ClusteredData) -> Result<Vec<f64>, GlmmError> {
    let (x, y) = data.pooled()?;
    let fit = fit_mle(&x, &y, &FitOptions::default())?;
    if fit.converged {
        Ok(fit.beta_hat.into_values())
    } else {
        Ok(vec![0.0; data.q()])
    }
}

/// Maximize the quadrature marginal likelihood over `(beta, log sigma)` by
/// BFGS with central-difference gradients. A variance collapse is reported
/// as a boundary solution, not an error.
pub fn fit_mle_ghq(data: &ClusteredData, opts: &GlmmFitOptions) -> Result<GlmmFit, GlmmError> {
    if data.m() < 2 {
        return Err(GlmmError::TooFewClusters(data.m()));
    }
    if opts.nodes % 2 == 0 {
        return Err(GlmmError::EvenNodes(opts.nodes));
    }
    let ghq = GaussHermite::new(opts.nodes)?;
    let q = data.q();
    let mut start = pooled_start(data)?;
    start.push(0.0); // log sigma = 0

    let objective = |phi: &[f64]| {
        let beta = phi[..q].to_vec();
        let sigma = phi[q].exp();
        let params = GlmmParams {
            beta,
            sigma2: sigma * sigma,
        };
        match marginal_loglik_inner(data, &params, &ghq) {
            Ok(ll) => -ll,
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = minimize(
        objective,
        &start,
        &BfgsOptions {
            grad_tol: opts.grad_tol,
            max_iter: opts.max_iter,
            ..BfgsOptions::default()
        },
    );

    let beta = outcome.x[..q].to_vec();
    let log_sigma = outcome.x[q];
    let sigma = log_sigma.exp();
    let boundary = log_sigma < LOG_SIGMA_FLOOR;
    let diverging = beta.iter().any(|b| b.abs() > opts.divergence_bound);
    Ok(GlmmFit {
        params: GlmmParams {
            beta,
            sigma2: sigma * sigma,
        },
        converged: outcome.converged && !boundary && !diverging,
        boundary,
        diverging,
        iterations: outcome.iterations,
        grad_norm: outcome.grad_norm,
    })
}

/// Newton maximization of the joint penalized log-likelihood in
/// `(beta, u)` at fixed `sigma2 > 0`. Returns the modes and the converged
/// flag; the negative Hessian is positive definite for full-rank pooled
/// designs, so Cholesky solves apply.
fn joint_newton(
    data: &ClusteredData,
    beta: &mut Vec<f64>,
    u: &mut Vec<f64>,
    sigma2: f64,
    bound: f64,
) -> Result<(bool, bool), GlmmError> {
    let q = data.q();
    let m = data.m();
    let dim = q + m;
    let n = data.n_total() as f64;
    let grad_tol = 1e-10 * n.max(1.0);

    let penalized = |beta: &[f64], u: &[f64]| {
        let mut obj = 0.0;
        for (i, c) in data.clusters.iter().enumerate() {
            obj += cluster_loglik(c, beta, u[i]) - u[i] * u[i] / (2.0 * sigma2);
        }
        obj
    };

    let mut obj = penalized(beta, u);
    for _ in 0..100 {
        let mut grad = Array1::<f64>::zeros(dim);
        let mut neg_hess = Array2::<f64>::zeros((dim, dim));
        for (i, c) in data.clusters.iter().enumerate() {
            let b = ndarray::ArrayView1::from(&beta[..]);
            let eta = c.x.dot(&b);
            for j in 0..c.size() {
                let mu = expit(eta[j] + u[i]);
                let resid = c.y[j] - mu;
                let w = variance_fn(mu);
                let row = c.x.row(j);
                for a in 0..q {
                    grad[a] += resid * row[a];
                    for b2 in a..q {
                        neg_hess[(a, b2)] += w * row[a] * row[b2];
                    }
                    neg_hess[(a, q + i)] += w * row[a];
                }
                grad[q + i] += resid;
                neg_hess[(q + i, q + i)] += w;
            }
            grad[q + i] -= u[i] / sigma2;
            neg_hess[(q + i, q + i)] += 1.0 / sigma2;
        }
        for a in 0..dim {
            for b2 in 0..a {
                neg_hess[(a, b2)] = neg_hess[(b2, a)];
            }
        }

        let grad_norm = grad.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if grad_norm <= grad_tol {
            return Ok((true, false));
        }
        // Small ridge keeps the beta block solvable when most means saturate.
        for a in 0..dim {
            neg_hess[(a, a)] += 1e-10;
        }
        let step = cholesky_solve(&neg_hess, &grad)?;

        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand_beta: Vec<f64> = beta
                .iter()
                .zip(step.iter().take(q))
                .map(|(b, s)| b + lambda * s)
                .collect();
            let cand_u: Vec<f64> = u
                .iter()
                .zip(step.iter().skip(q))
                .map(|(ui, s)| ui + lambda * s)
                .collect();
            let cand_obj = penalized(&cand_beta, &cand_u);
            if cand_obj > obj - 1e-14 * (1.0 + obj.abs()) {
                *beta = cand_beta;
                *u = cand_u;
                obj = cand_obj;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
        if beta.iter().any(|b| b.abs() > bound) {
            return Ok((false, true));
        }
    }
    let (final_grad, _) = {
        let mut g_inf = 0.0f64;
        for (i, c) in data.clusters.iter().enumerate() {
            let (d1, _) = cluster_penalized_derivs(c, beta, u[i], sigma2);
            g_inf = g_inf.max(d1.abs());
        }
        (g_inf, ())
    };
    Ok((final_grad <= grad_tol, false))
}

/// Fast joint-mode estimator: alternate (a) Newton on the joint penalized
/// log-likelihood in `(beta, u)` with (b) the variance update
/// `sigma2 = (1/m) sum(u_i^2 + v_i)`, `v_i` the Laplace posterior variance,
/// to a fixed point. With `fix_sigma2 = Some(0.0)` the random effects are
/// pinned at zero and beta reduces to the pooled logistic fit.
pub fn fit_joint_mode(data: &ClusteredData, opts: &GlmmFitOptions) -> Result<GlmmFit, GlmmError> {
    if data.m() < 2 {
        return Err(GlmmError::TooFewClusters(data.m()));
    }
    let q = data.q();
    let m = data.m();
    let mut beta = pooled_start(data)?;
    let mut u = vec![0.0; m];
    let mut sigma2 = opts.fix_sigma2.unwrap_or(1.0);
    let mut boundary = false;
    let mut converged = false;
    let mut iterations = 0;

    if sigma2 == 0.0 {
        // Degenerate case: u = 0 and beta is the pooled MLE.
        let (x, y) = data.pooled()?;
        let fit = fit_mle(&x, &y, &FitOptions::default())?;
        return Ok(GlmmFit {
            converged: fit.converged,
            boundary: true,
            diverging: fit.diverging,
            iterations: fit.iterations,
            grad_norm: fit.score_norm,
            params: GlmmParams {
                beta: fit.beta_hat.into_values(),
                sigma2: 0.0,
            },
        });
    }

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let beta_prev = beta.clone();
        let sigma2_prev = sigma2;

        let (_, diverged) = joint_newton(data, &mut beta, &mut u, sigma2, opts.divergence_bound)?;
        if diverged {
            return Ok(GlmmFit {
                params: GlmmParams { beta, sigma2 },
                converged: false,
                boundary: false,
                diverging: true,
                iterations,
                grad_norm: f64::INFINITY,
            });
        }

        if opts.fix_sigma2.is_none() {
            let mut acc = 0.0;
            for (i, c) in data.clusters.iter().enumerate() {
                let (_, d2) = cluster_penalized_derivs(c, &beta, u[i], sigma2);
                let v = -1.0 / d2;
                acc += u[i] * u[i] + v;
            }
            sigma2 = acc / m as f64;
            if sigma2 < 1e-10 {
                // Collapse to the boundary: finish with the degenerate fit.
                let (x, y) = data.pooled()?;
                let fit = fit_mle(&x, &y, &FitOptions::default())?;
                return Ok(GlmmFit {
                    converged: fit.converged,
                    boundary: true,
                    diverging: fit.diverging,
                    iterations,
                    grad_norm: fit.score_norm,
                    params: GlmmParams {
                        beta: fit.beta_hat.into_values(),
                        sigma2: 0.0,
                    },
                });
            }
        }

        let beta_change = beta
            .iter()
            .zip(&beta_prev)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let beta_scale = beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let sigma_change = (sigma2 - sigma2_prev).abs();
        if beta_change <= 1e-9 * (1.0 + beta_scale) && sigma_change <= 1e-9 * (1.0 + sigma2) {
            converged = true;
            break;
        }
    }

    if sigma2 < 1e-8 {
        boundary = true;
    }
    Ok(GlmmFit {
        params: GlmmParams { beta, sigma2 },
        converged,
        boundary,
        diverging: false,
        iterations,
        grad_norm: 0.0,
    })
}

/// Which estimator plays the initial/replica role for this model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmmEstimatorKind {
    JointMode,
    Ghq,
}

/// Random-intercept model bound to a fixed clustered design.
#[derive(Debug, Clone)]
pub struct GlmmModel {
    design: ClusteredData,
    estimator: GlmmEstimatorKind,
    opts: GlmmFitOptions,
}

impl GlmmModel {
    pub fn new(
        design: ClusteredData,
        estimator: GlmmEstimatorKind,
        opts: GlmmFitOptions,
    ) -> Result<Self, GlmmError> {
        if design.m() < 2 {
            return Err(GlmmError::TooFewClusters(design.m()));
        }
        if opts.nodes % 2 == 0 {
            return Err(GlmmError::EvenNodes(opts.nodes));
        }
        Ok(GlmmModel {
            design,
            estimator,
            opts,
        })
    }

    pub fn design(&self) -> &ClusteredData {
        &self.design
    }

    pub fn fit(&self, data: &ClusteredData) -> Result<GlmmFit, GlmmError> {
        match self.estimator {
            GlmmEstimatorKind::JointMode => fit_joint_mode(data, &self.opts),
            GlmmEstimatorKind::Ghq => fit_mle_ghq(data, &self.opts),
        }
    }

    /// Box for `(beta, sigma2)`: generous slab for the coefficients, a
    /// nonnegative interval for the variance.
    pub fn default_bounds(&self) -> DomainBounds {
        let q = self.design.q();
        let mut lower = vec![-30.0; q];
        let mut upper = vec![30.0; q];
        lower.push(0.0);
        upper.push(50.0);
        DomainBounds::new(lower, upper).expect("valid box")
    }
}

impl SimulableModel for GlmmModel {
    type Data = ClusteredData;

    fn dimension(&self) -> usize {
        self.design.q() + 1
    }

    fn sample_size(&self) -> usize {
        self.design.n_total()
    }

    fn simulate(&self, theta: &ParamVector, stream: &mut RandomStream) -> ClusteredData {
        simulate_glmm(&self.design, &GlmmParams::from_vector(theta), stream)
    }

    fn estimate(&self, data: &ClusteredData) -> Result<ParamVector, EstimateError> {
        match self.fit(data) {
            Ok(fit) if fit.diverging => Err(EstimateError::Diverged),
            Ok(fit) if fit.converged || fit.boundary => Ok(fit.params.to_vector()),
            Ok(_) => Err(EstimateError::NotConverged),
            Err(e) => Err(EstimateError::Degenerate(e.to_string())),
        }
    }
}
