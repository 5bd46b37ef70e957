//! Exact reference solutions in the sine eigenbasis of the five-point
//! Laplacian.
//!
//! Mode `(k1, k2)` is the sampled field `sin(pi k1 x1) sin(pi k2 x2)` with
//! eigenvalue `lambda_k = sum_j (4/h_j^2) sin^2(pi k_j h_j / 2)`. Any function
//! of `A` becomes a multiplier on the mode coefficients. The 2-D transform is
//! a composition of one 1-D sine transform per axis, each applied as a dense
//! table product.

use crate::error::Result;
use crate::grid::{axis_eigenvalue, GridFunction, GridSpec};

#[derive(Debug, Clone)]
struct AxisTransform {
    /// Interior node count `m = n - 1`.
    m: usize,
    /// Row-major `sin(pi k j / n)`, `k, j = 1..=m`.
    table: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// `2 / n`, the inverse of the discrete orthogonality constant.
    norm: f64,
}

impl AxisTransform {
    fn new(n: usize) -> Self {
        let m = n - 1;
        let mut table = Vec::with_capacity(m * m);
        for k in 1..=m {
            for j in 1..=m {
                // reduce k*j mod 2n so the sine argument stays in [0, 2 pi)
                let phase = (k * j) % (2 * n);
                table.push((std::f64::consts::PI * phase as f64 / n as f64).sin());
            }
        }
        let eigenvalues = (1..=m).map(|k| axis_eigenvalue(n, k)).collect();
        Self {
            m,
            table,
            eigenvalues,
            norm: 2.0 / n as f64,
        }
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.table[k * self.m..(k + 1) * self.m]
    }
}

/// Sine eigenbasis of the Laplacian on one grid. Immutable once built.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    grid: GridSpec,
    axis1: AxisTransform,
    axis2: AxisTransform,
}

impl EigenBasis {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            axis1: AxisTransform::new(grid.n1()),
            axis2: AxisTransform::new(grid.n2()),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Eigenvalue of mode `(k1, k2)`, 1-based.
    pub fn eigenvalue(&self, k1: usize, k2: usize) -> f64 {
        self.axis1.eigenvalues[k1 - 1] + self.axis2.eigenvalues[k2 - 1]
    }

    /// All eigenvalues in coefficient storage order (k2 outer, k1 inner).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.interior_len());
        for l2 in &self.axis2.eigenvalues {
            for l1 in &self.axis1.eigenvalues {
                out.push(l1 + l2);
            }
        }
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.axis1.eigenvalues[0] + self.axis2.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.axis1.eigenvalues[self.axis1.m - 1] + self.axis2.eigenvalues[self.axis2.m - 1]
    }

    // Applies `table` along both axes; `scale` multiplies the result.
    fn transform(&self, input: &[f64], scale: f64) -> Vec<f64> {
        let (m1, m2) = (self.axis1.m, self.axis2.m);
        let mut stage = vec![0.0; m1 * m2];
        for j in 0..m2 {
            let src = &input[j * m1..(j + 1) * m1];
            let dst = &mut stage[j * m1..(j + 1) * m1];
            for (k, out) in dst.iter_mut().enumerate() {
                *out = self.axis1.row(k).iter().zip(src).map(|(s, x)| s * x).sum();
            }
        }
        let mut out = vec![0.0; m1 * m2];
        for k in 0..m2 {
            let weights = self.axis2.row(k);
            let dst = &mut out[k * m1..(k + 1) * m1];
            for (j, w) in weights.iter().enumerate() {
                let w = w * scale;
                let src = &stage[j * m1..(j + 1) * m1];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        out
    }

    /// Mode coefficients `c` with `u = sum_k c_k sin(pi k1 x1) sin(pi k2 x2)`.
    pub fn forward(&self, u: &GridFunction) -> Vec<f64> {
        debug_assert_eq!(u.grid(), &self.grid);
        self.transform(u.values(), self.axis1.norm * self.axis2.norm)
    }

    pub fn inverse(&self, coefficients: &[f64]) -> GridFunction {
        let values = self.transform(coefficients, 1.0);
        GridFunction::from_values(self.grid, values).expect("transform preserves length")
    }

    /// `f(A) u` for a scalar function `f` of the eigenvalue.
    pub fn apply_function<F>(&self, u: &GridFunction, f: F) -> GridFunction
    where
        F: Fn(f64) -> f64,
    {
        let mut coefficients = self.forward(u);
        let m1 = self.axis1.m;
        for (k2, l2) in self.axis2.eigenvalues.iter().enumerate() {
            let row = &mut coefficients[k2 * m1..(k2 + 1) * m1];
            for (c, l1) in row.iter_mut().zip(&self.axis1.eigenvalues) {
                *c *= f(l1 + l2);
            }
        }
        self.inverse(&coefficients)
    }

    /// `A^gamma u`, any real `gamma`.
    pub fn apply_power(&self, u: &GridFunction, gamma: f64) -> Result<GridFunction> {
        u.check_same_grid(&GridFunction::zeros(self.grid))?;
        Ok(self.apply_function(u, |lambda| lambda.powf(gamma)))
    }

    /// Exact solution `exp(-t A^alpha) u0` of `du/dt + A^alpha u = 0`.
    pub fn evolve_exact(&self, u0: &GridFunction, t: f64, alpha: f64) -> GridFunction {
        self.apply_function(u0, |lambda| (-t * lambda.powf(alpha)).exp())
    }

    /// `exp(-t g(A)) u0` for an arbitrary per-mode decay rate `g`.
    pub fn evolve_with_rate<G>(&self, u0: &GridFunction, t: f64, rate: G) -> GridFunction
    where
        G: Fn(f64) -> f64,
    {
        self.apply_function(u0, |lambda| (-t * rate(lambda)).exp())
    }

    /// One step of `(y' - y)/tau + A^alpha y = 0`.
    pub fn explicit_step(&self, y: &GridFunction, tau: f64, alpha: f64) -> GridFunction {
        self.apply_function(y, |lambda| 1.0 - tau * lambda.powf(alpha))
    }

    /// One step of the two-level scheme with weight `sigma`, solved exactly
    /// mode by mode.
    pub fn weighted_step(
        &self,
        y: &GridFunction,
        tau: f64,
        alpha: f64,
        sigma: f64,
    ) -> GridFunction {
        self.apply_function(y, |lambda| {
            let p = tau * lambda.powf(alpha);
            (1.0 - (1.0 - sigma) * p) / (1.0 + sigma * p)
        })
    }
}
