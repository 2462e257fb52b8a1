//! Gauss-Hermite quadrature nodes and weights for the weight `exp(-x^2)`.
//!
//! Nodes are the roots of the K-th Hermite polynomial, located by Newton
//! iteration on the orthonormal three-term recurrence with the classic
//! asymptotic initial guesses; weights come from the derivative at each
//! root. Exact for polynomials up to degree `2K - 1`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GhqError {
    #[error("node count must be at least 1")]
    ZeroNodes,
    #[error("Newton iteration for node {0} failed to converge")]
    NoConvergence(usize),
}

/// Orthonormal Hermite value and scaled derivative at `x` for degree `k`.
/// Returns `(h_k(x), h_{k-1}(x))`; the derivative is `sqrt(2k) h_{k-1}`.
fn hermite_pair(k: usize, x: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=k {
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
    }
    (p1, p2)
}

impl GaussHermite {
    pub fn new(k: usize) -> Result<Self, GhqError> {
        if k == 0 {
            return Err(GhqError::ZeroNodes);
        }
        let mut nodes = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let half = k.div_ceil(2);
        let mut z = 0.0f64;
        let mut z_prev = [0.0f64; 2];
        for i in 0..half {
            // Asymptotic initial guesses, largest root first; z_prev[0]
            // holds the root two positions back.
            z = match i {
                0 => {
                    let t = (2 * k + 1) as f64;
                    t.sqrt() - 1.85575 * t.powf(-1.0 / 6.0)
                }
                1 => z - 1.14 * (k as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * z_prev[0],
                3 => 1.91 * z - 0.91 * z_prev[0],
                _ => 2.0 * z - z_prev[0],
            };
            if k % 2 == 1 && i == half - 1 {
                // The middle root of an odd-degree polynomial is exactly 0.
                z = 0.0;
            }
            let mut converged = false;
            for _ in 0..100 {
                let (p1, p2) = hermite_pair(k, z);
                let pp = (2.0 * k as f64).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * (1.0 + z.abs()) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(GhqError::NoConvergence(i));
            }
            z_prev = [z_prev[1], z];
            // Weight from the derivative at the converged root.
            let (_, p2) = hermite_pair(k, z);
            let pp = (2.0 * k as f64).sqrt() * p2;
            let w = 2.0 / (pp * pp);
            nodes[k - 1 - i] = z;
            nodes[i] = -z;
            weights[k - 1 - i] = w;
            weights[i] = w;
        }
        Ok(GaussHermite { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn small_rules_match_closed_forms() {
        let g1 = GaussHermite::new(1).unwrap();
        assert!(g1.nodes()[0].abs() < 1e-15);
        assert!((g1.weights()[0] - PI.sqrt()).abs() < 1e-14);

        let g2 = GaussHermite::new(2).unwrap();
        assert!((g2.nodes()[1] - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((g2.weights()[0] - PI.sqrt() / 2.0).abs() < 1e-14);

        let g3 = GaussHermite::new(3).unwrap();
        assert_eq!(g3.nodes()[1], 0.0);
        assert!((g3.nodes()[2] - 1.5f64.sqrt()).abs() < 1e-13);
        assert!((g3.weights()[1] - 2.0 * PI.sqrt() / 3.0).abs() < 1e-13);
        assert!((g3.weights()[0] - PI.sqrt() / 6.0).abs() < 1e-13);
    }

    #[test]
    fn moments_integrate_exactly() {
        for k in [5, 16, 31, 51] {
            let g = GaussHermite::new(k).unwrap();
            let m0: f64 = g.weights().iter().sum();
            let m2: f64 = g.iter().map(|(x, w)| w * x * x).sum();
            let m4: f64 = g.iter().map(|(x, w)| w * x.powi(4)).sum();
            assert!((m0 - PI.sqrt()).abs() < 1e-12 * PI.sqrt(), "k = {k}");
            assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12, "k = {k}");
            assert!((m4 - 0.75 * PI.sqrt()).abs() < 1e-11, "k = {k}");
        }
    }

    #[test]
    fn oscillatory_integral() {
        // integral exp(-x^2) cos(x) dx = sqrt(pi) exp(-1/4).
        let g = GaussHermite::new(31).unwrap();
        let val: f64 = g.iter().map(|(x, w)| w * x.cos()).sum();
        let truth = PI.sqrt() * (-0.25f64).exp();
        assert!((val - truth).abs() < 1e-13);
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(GaussHermite::new(0).is_err());
    }
}
