//! Quasi-Newton minimization with finite-difference gradients.
//!
//! A plain BFGS with Armijo backtracking, sized for the handful of
//! parameters the mixed-model fits optimize over. Gradients are central
//! differences with per-component steps, so callers only supply the
//! objective.

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOptions {
    /// Convergence: infinity norm of the (finite-difference) gradient.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            grad_tol: 1e-6,
            max_iter: 300,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient with steps `step * (1 + |x_j|)`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = step * (1.0 + x[j].abs());
        probe[j] = x[j] + h;
        let up = f(&probe);
        probe[j] = x[j] - h;
        let dn = f(&probe);
        probe[j] = x[j];
        g[j] = (up - dn) / (2.0 * h);
    }
    g
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` from `x0` by BFGS on the inverse Hessian approximation.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsOutcome {
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = central_gradient(&f, &x, opts.fd_step);
    // Inverse Hessian approximation, started at the identity.
    let mut h_inv = vec![vec![0.0; p]; p];
    for (j, row) in h_inv.iter_mut().enumerate() {
        row[j] = 1.0;
    }
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut dir = vec![0.0; p];
        for i in 0..p {
            dir[i] = -dot(&h_inv[i], &g);
        }
        if dot(&dir, &g) >= 0.0 {
            // Not a descent direction; reset the curvature model.
            for (i, row) in h_inv.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
            for i in 0..p {
                dir[i] = -g[i];
            }
        }

        let slope = dot(&dir, &g);
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..p {
                x_new[i] = x[i] + alpha * dir[i];
            }
            f_new = f(&x_new);
            if f_new <= fx + 1e-4 * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }

        let g_new = central_gradient(&f, &x_new, opts.fd_step);
        let s: Vec<f64> = (0..p).map(|i| x_new[i] - x[i]).collect();
        let yv: Vec<f64> = (0..p).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &yv);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&yv, &yv).sqrt();
        if sy > 1e-12 * s_norm * y_norm {
            // BFGS update of the inverse Hessian.
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..p).map(|i| dot(&h_inv[i], &yv)).collect();
            let yhy = dot(&yv, &hy);
            for i in 0..p {
                for j in 0..p {
                    h_inv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }

        let stalled = inf_norm(&s) <= 1e-14 * (1.0 + inf_norm(&x));
        x = x_new.clone();
        fx = f_new;
        g = g_new;
        converged = inf_norm(&g) <= opts.grad_tol;
        if stalled {
            break;
        }
    }

    BfgsOutcome {
        grad_norm: inf_norm(&g),
        x,
        value: fx,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2);
        let out = minimize(f, &[0.0, 0.0], &BfgsOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 3.0).abs() < 1e-5);
        assert!((out.x[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(f, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(out.converged, "grad norm {}", out.grad_norm);
        assert!((out.x[0] - 1.0).abs() < 1e-4);
        assert!((out.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn gradient_check() {
        let f = |x: &[f64]| x[0].sin() * x[1].exp();
        let g = central_gradient(&f, &[0.7, -0.3], 1e-6);
        let truth = [0.7f64.cos() * (-0.3f64).exp(), 0.7f64.sin() * (-0.3f64).exp()];
        assert!((g[0] - truth[0]).abs() < 1e-8);
        assert!((g[1] - truth[1]).abs() < 1e-8);
    }
}
