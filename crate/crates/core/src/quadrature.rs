//! Gauss–Jacobi quadrature for the weight `(1 - x)^a (1 + x)^b` on `[-1, 1]`.
//!
//! Nodes start from the eigenvalues of the symmetric Jacobi matrix
//! (Golub–Welsch) and are polished by Newton's method on the three-term
//! recurrence. Weights come from the derivative of the Jacobi polynomial at
//! each node:
//!
//! `w_i = 2^(a+b+1) G(n+a+1) G(n+b+1) / (G(n+a+b+1) n!) / ((1 - x_i^2) P_n'(x_i)^2)`.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const NEWTON_MAX_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    /// Ascending, strictly inside `(-1, 1)`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobi {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition(
                "quadrature needs at least one node".into(),
            ));
        }
        if !(a > -1.0 && b > -1.0) {
            return Err(Error::Quadrature(format!(
                "weight exponents must exceed -1, got a = {a}, b = {b}"
            )));
        }
        let guesses = golub_welsch(n, a, b)?.0;
        let log_scale = (a + b + 1.0) * std::f64::consts::LN_2
            + ln_gamma(n as f64 + a + 1.0)
            + ln_gamma(n as f64 + b + 1.0)
            - ln_gamma(n as f64 + a + b + 1.0)
            - ln_gamma(n as f64 + 1.0);
        let scale = log_scale.exp();

        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (i, &guess) in guesses.iter().enumerate() {
            let x = newton_polish(n, a, b, guess).ok_or_else(|| {
                Error::Quadrature(format!("Newton iteration for node {i} did not settle"))
            })?;
            if !(x > -1.0 && x < 1.0) {
                return Err(Error::Quadrature(format!("node {i} = {x} left (-1, 1)")));
            }
            let (_, dp) = jacobi_with_derivative(n, a, b, x);
            let w = scale / ((1.0 - x * x) * dp * dp);
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Quadrature(format!(
                    "weight {i} = {w} is not positive"
                )));
            }
            nodes.push(x);
            weights.push(w);
        }
        for pair in nodes.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Quadrature(
                    "nodes collapsed during Newton polishing".into(),
                ));
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Total mass `int_{-1}^{1} (1-x)^a (1+x)^b dx`.
pub fn jacobi_weight_mass(a: f64, b: f64) -> f64 {
    ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0))
    .exp()
}

/// Eigenvalues of the Jacobi matrix (ascending) and the Golub–Welsch weights
/// `mass * v_0^2`.
pub fn golub_welsch(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        jm[(k, k)] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k >= 1 {
            // off-diagonal between rows k-1 and k
            let off = if k == 1 {
                // (1 + a + b) cancels; keeps a + b = -1 well defined
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
            } else {
                4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (s * s * (s + 1.0) * (s - 1.0))
            };
            let off = off.sqrt();
            jm[(k, k - 1)] = off;
            jm[(k - 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    if pairs.iter().any(|(x, _)| !x.is_finite()) {
        return Err(Error::Quadrature(
            "Jacobi matrix eigenvalues are not finite".into(),
        ));
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mass = jacobi_weight_mass(a, b);
    Ok(pairs.into_iter().map(|(x, v)| (x, mass * v)).unzip())
}

/// `(P_n(x), P_n'(x))` for the Jacobi polynomial `P_n^{(a,b)}` in the
/// standard normalisation `P_n(1) = binom(n + a, n)`.
pub fn jacobi_with_derivative(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let c1 = 2.0 * kf * (kf + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (kf + a - 1.0) * (kf + b - 1.0) * s;
        let next = (c2 * p - c3 * p_prev) / c1;
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    let s = 2.0 * nf + a + b;
    let dp = (nf * (a - b - s * x) * p + 2.0 * (nf + a) * (nf + b) * p_prev) / (s * (1.0 - x * x));
    (p, dp)
}

fn newton_polish(n: usize, a: f64, b: f64, mut x: f64) -> Option<f64> {
    for _ in 0..NEWTON_MAX_STEPS {
        let (p, dp) = jacobi_with_derivative(n, a, b, x);
        if dp == 0.0 || !dp.is_finite() {
            return None;
        }
        let dx = p / dp;
        x -= dx;
        if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-3) {
            return Some(x);
        }
    }
    None
}
