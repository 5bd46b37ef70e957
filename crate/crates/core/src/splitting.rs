//! Splitting schemes for `dv/dt + D v = 0` with `D = R_m(A; beta) A`,
//! `beta = 1 - alpha`.
//!
//! `D` splits into `D_i = a_i (b_i I + A)^{-1} A`. The terms are self-adjoint,
//! positive and pairwise commuting, so advancing through them one at a time is
//! exact for the continuous problem; each substep is a two-level weighted
//! scheme that needs one solve with `b I + c A`.
//!
//! With a mass operator `B` (diagonal here) the equation becomes
//! `B dv/dt + D v = 0`. Two schemes are provided for it: the direct analogue
//! of the componentwise scheme and the regularized explicit scheme with
//! `R_i = a_i (b_i I + (1 + sigma tau a_i) A)^{-1} A`.

use std::cell::RefCell;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::grid::GridSpec;
use crate::laplacian::{
    apply_a, apply_shifted_raw, conjugate_gradient, solve_shifted, solve_shifted_from,
    ShiftedSolveConfig, SpdOperator,
};
use crate::rational::{RationalCoefficients, Term};

/// Number of evenly spaced snapshot levels kept by [`evolve`].
pub const DEFAULT_SNAPSHOTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Componentwise,
    MassWeighted,
    Regularized,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Componentwise => "componentwise",
            SchemeKind::MassWeighted => "mass_weighted",
            SchemeKind::Regularized => "regularized",
        })
    }
}

/// Order in which the terms `D_i` are visited within one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TermOrdering {
    /// `D_1, ..., D_m`, each with the full step.
    #[default]
    Forward,
    /// `D_1, ..., D_m, D_m, ..., D_1`, each with half the step.
    Symmetrized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub sigma: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub ordering: TermOrdering,
}

impl SchemeConfig {
    pub fn new(
        kind: SchemeKind,
        sigma: f64,
        tau: f64,
        n_steps: usize,
        ordering: TermOrdering,
    ) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Domain {
                name: "sigma",
                value: sigma,
                range: "[0, inf)",
            });
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain {
                name: "tau",
                value: tau,
                range: "(0, inf)",
            });
        }
        Ok(Self {
            kind,
            sigma,
            tau,
            n_steps,
            ordering,
        })
    }

    pub fn componentwise(sigma: f64, tau: f64, n_steps: usize) -> Result<Self> {
        Self::new(
            SchemeKind::Componentwise,
            sigma,
            tau,
            n_steps,
            TermOrdering::Forward,
        )
    }

    /// Whether the norm bound holds for every step size: `sigma >= 1/2` for
    /// the componentwise and mass-weighted schemes, `2 gamma sigma >= 1` for
    /// the regularized one (`gamma = 1` when no mass operator is given).
    pub fn stability_guaranteed(&self, mass: Option<&MassOperator>) -> bool {
        match self.kind {
            SchemeKind::Componentwise | SchemeKind::MassWeighted => self.sigma >= 0.5,
            SchemeKind::Regularized => {
                let gamma = mass.map_or(1.0, MassOperator::gamma);
                2.0 * gamma * self.sigma >= 1.0
            }
        }
    }

    pub fn final_time(&self) -> f64 {
        self.tau * self.n_steps as f64
    }
}

/// Diagonal positive mass operator `B >= gamma I`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassOperator {
    grid: GridSpec,
    diagonal: Vec<f64>,
    gamma: f64,
}

impl MassOperator {
    /// `gamma` is taken as the smallest diagonal entry.
    pub fn new(grid: GridSpec, diagonal: Vec<f64>) -> Result<Self> {
        let gamma = diagonal.iter().cloned().fold(f64::INFINITY, f64::min);
        Self::with_bound(grid, diagonal, gamma)
    }

    /// Uses a caller-certified lower bound `0 < gamma <= min(diagonal)`.
    pub fn with_bound(grid: GridSpec, diagonal: Vec<f64>, gamma: f64) -> Result<Self> {
        if diagonal.len() != grid.interior_len() {
            return Err(Error::LengthMismatch {
                expected: grid.interior_len(),
                actual: diagonal.len(),
            });
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain {
                name: "gamma",
                value: gamma,
                range: "(0, inf)",
            });
        }
        if let Some(bad) = diagonal.iter().find(|d| !(**d >= gamma && d.is_finite())) {
            return Err(Error::Precondition(format!(
                "mass diagonal entry {bad} is below the bound gamma = {gamma}"
            )));
        }
        Ok(Self {
            grid,
            diagonal,
            gamma,
        })
    }

    pub fn identity(grid: GridSpec) -> Self {
        Self {
            grid,
            diagonal: vec![1.0; grid.interior_len()],
            gamma: 1.0,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch {
                left: self.grid,
                right: *u.grid(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let values = u
            .values()
            .iter()
            .zip(&self.diagonal)
            .map(|(v, d)| v * d)
            .collect();
        GridFunction::from_values(self.grid, values)
    }

    pub fn apply_inverse(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let values = u
            .values()
            .iter()
            .zip(&self.diagonal)
            .map(|(v, d)| v / d)
            .collect();
        GridFunction::from_values(self.grid, values)
    }

    /// `||u||_B = (B u, u)^{1/2}`.
    pub fn norm(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        let sum: f64 = u
            .values()
            .iter()
            .zip(&self.diagonal)
            .map(|(v, d)| d * v * v)
            .sum();
        Ok((sum * self.grid.cell_area()).sqrt())
    }
}

/// `(term index, substep time step)` pairs for one full time step.
fn substeps(m: usize, tau: f64, ordering: TermOrdering) -> Vec<(usize, f64)> {
    match ordering {
        TermOrdering::Forward => (0..m).map(|i| (i, tau)).collect(),
        TermOrdering::Symmetrized => (0..m).chain((0..m).rev()).map(|i| (i, 0.5 * tau)).collect(),
    }
}

/// One componentwise substep for term `(a, b)`:
/// `(b I + (1 + a sigma tau) A) w' = (b I + (1 - a (1 - sigma) tau) A) w`.
pub fn componentwise_substep(
    w: &GridFunction,
    term: Term,
    sigma: f64,
    tau: f64,
    cfg: &ShiftedSolveConfig,
) -> Result<GridFunction> {
    let mut chi = apply_a(w).scaled(1.0 - term.a * (1.0 - sigma) * tau);
    chi.axpy(term.b, w)?;
    let (next, _) = solve_shifted_from(term.b, 1.0 + term.a * sigma * tau, &chi, w.clone(), cfg)?;
    Ok(next)
}

/// One step of the componentwise splitting scheme.
pub fn split_step_componentwise(
    w: &GridFunction,
    coeffs: &RationalCoefficients,
    sigma: f64,
    tau: f64,
    cfg: &ShiftedSolveConfig,
    ordering: TermOrdering,
) -> Result<GridFunction> {
    let mut current = w.clone();
    for (k, (i, dt)) in substeps(coeffs.m(), tau, ordering).into_iter().enumerate() {
        current = componentwise_substep(&current, coeffs.terms()[i], sigma, dt, cfg)
            .map_err(|e| e.in_substep(k + 1))?;
    }
    Ok(current)
}

/// `y -> b B y + p * A (p * y)`, the symmetric form of the mass substep
/// operator `(b I + A) B + c A` under the diagonal similarity `P^{1/2}` with
/// `P = B + c I`. Expanding `p (b I + A) p - c b I` this way avoids the
/// cancellation between `b P` and `c b` when `c` dominates `B`.
struct MassSubstepOperator {
    grid: GridSpec,
    shift: f64,
    diagonal: Vec<f64>,
    sqrt_p: Vec<f64>,
    scratch: RefCell<(Vec<f64>, Vec<f64>)>,
}

impl SpdOperator for MassSubstepOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut scratch = self.scratch.borrow_mut();
        let (px, apx) = &mut *scratch;
        for ((t, xi), s) in px.iter_mut().zip(x).zip(&self.sqrt_p) {
            *t = s * xi;
        }
        apply_shifted_raw(&self.grid, 0.0, 1.0, px, apx);
        for ((((yi, k), s), xi), d) in y
            .iter_mut()
            .zip(apx.iter())
            .zip(&self.sqrt_p)
            .zip(x)
            .zip(&self.diagonal)
        {
            *yi = self.shift * d * xi + s * k;
        }
    }
}

/// One substep of the mass-weighted scheme:
/// `((b I + A) B + a sigma tau A) w' = ((b I + A) B - a (1 - sigma) tau A) w`.
///
/// With `P = B + a sigma tau I` the left operator equals `(b I + A) P - c b I`,
/// which is similar to the symmetric positive definite
/// `P^{1/2} (b I + A) P^{1/2} - c b I = b B + P^{1/2} A P^{1/2}`; that system
/// is solved by CG for `y = P^{1/2} w'`.
pub fn mass_substep(
    w: &GridFunction,
    term: Term,
    mass: &MassOperator,
    sigma: f64,
    tau: f64,
    cfg: &ShiftedSolveConfig,
) -> Result<GridFunction> {
    let grid = *w.grid();
    let bw = mass.apply(w)?;
    let mut rhs = apply_a(&bw);
    rhs.axpy(term.b, &bw)?;
    rhs.axpy(-term.a * (1.0 - sigma) * tau, &apply_a(w))?;

    let coupling = term.a * sigma * tau;
    let sqrt_p: Vec<f64> = mass
        .diagonal()
        .iter()
        .map(|d| (d + coupling).sqrt())
        .collect();
    let scaled_rhs: Vec<f64> = rhs
        .values()
        .iter()
        .zip(&sqrt_p)
        .map(|(r, s)| r * s)
        .collect();
    let mut y: Vec<f64> = w.values().iter().zip(&sqrt_p).map(|(v, s)| v * s).collect();
    let n = grid.interior_len();
    let op = MassSubstepOperator {
        grid,
        shift: term.b,
        diagonal: mass.diagonal().to_vec(),
        sqrt_p,
        scratch: RefCell::new((vec![0.0; n], vec![0.0; n])),
    };
    conjugate_gradient(&op, &scaled_rhs, &mut y, cfg)?;
    let values = y.iter().zip(&op.sqrt_p).map(|(v, s)| v / s).collect();
    GridFunction::from_values(grid, values)
}

/// One step of the mass-weighted splitting scheme.
pub fn split_step_mass(
    w: &GridFunction,
    coeffs: &RationalCoefficients,
    mass: &MassOperator,
    sigma: f64,
    tau: f64,
    cfg: &ShiftedSolveConfig,
    ordering: TermOrdering,
) -> Result<GridFunction> {
    let mut current = w.clone();
    for (k, (i, dt)) in substeps(coeffs.m(), tau, ordering).into_iter().enumerate() {
        current = mass_substep(&current, coeffs.terms()[i], mass, sigma, dt, cfg)
            .map_err(|e| e.in_substep(k + 1))?;
    }
    Ok(current)
}

/// `w' = w - tau B^{-1} R_i w` with `R_i w = a (b I + (1 + sigma tau a) A)^{-1} A w`.
pub fn regularized_substep(
    w: &GridFunction,
    term: Term,
    mass: &MassOperator,
    sigma: f64,
    tau: f64,
    cfg: &ShiftedSolveConfig,
) -> Result<GridFunction> {
    let z = solve_shifted(term.b, 1.0 + sigma * tau * term.a, &apply_a(w), cfg)?;
    let mut next = w.clone();
    next.axpy(-tau * term.a, &mass.apply_inverse(&z)?)?;
    Ok(next)
}

/// One step of the regularized splitting scheme.
pub fn regularized_step(
    w: &GridFunction,
    coeffs: &RationalCoefficients,
    mass: &MassOperator,
    sigma: f64,
    tau: f64,
    cfg: &ShiftedSolveConfig,
    ordering: TermOrdering,
) -> Result<GridFunction> {
    let mut current = w.clone();
    for (k, (i, dt)) in substeps(coeffs.m(), tau, ordering).into_iter().enumerate() {
        current = regularized_substep(&current, coeffs.terms()[i], mass, sigma, dt, cfg)
            .map_err(|e| e.in_substep(k + 1))?;
    }
    Ok(current)
}

/// Appliable handle for one additive term `D_i = a_i (b_i I + A)^{-1} A`.
#[derive(Debug, Clone, Copy)]
pub struct DTerm {
    pub term: Term,
    cfg: ShiftedSolveConfig,
}

impl DTerm {
    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        Ok(solve_shifted(self.term.b, 1.0, &apply_a(v), &self.cfg)?.scaled(self.term.a))
    }
}

pub fn build_d_terms(coeffs: &RationalCoefficients, cfg: &ShiftedSolveConfig) -> Vec<DTerm> {
    coeffs
        .terms()
        .iter()
        .map(|&term| DTerm { term, cfg: *cfg })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRecord {
    pub step: usize,
    pub t: f64,
    pub l2_norm: f64,
    /// `||w||_B`; equals `l2_norm` when no mass operator is involved.
    pub b_norm: f64,
    /// Absolute discrepancies against the oracle, when one was supplied.
    pub eps2: Option<f64>,
    pub epsinf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub levels: Vec<LevelRecord>,
    pub snapshots: Vec<(usize, GridFunction)>,
}

impl Trajectory {
    pub fn l2_norms(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.l2_norm).collect()
    }

    pub fn final_level(&self) -> &LevelRecord {
        self.levels
            .last()
            .expect("trajectory always holds the initial level")
    }

    pub fn final_snapshot(&self) -> &GridFunction {
        &self
            .snapshots
            .last()
            .expect("initial level is always a snapshot")
            .1
    }

    /// `B`-norms (plain norms without a mass operator) never increase.
    pub fn is_norm_nonincreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].b_norm <= w[0].b_norm)
    }

    /// Writes `step,t,l2_norm,eps2,epsinf`; discrepancy fields are empty when
    /// no oracle was used.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,t,l2_norm,eps2,epsinf")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
        for l in &self.levels {
            writeln!(
                out,
                "{},{:.9e},{:.9e},{},{}",
                l.step,
                l.t,
                l.l2_norm,
                opt(l.eps2),
                opt(l.epsinf)
            )?;
        }
        Ok(())
    }
}

/// `n_snapshots` levels spread evenly over `0..=n_steps`, always including
/// both ends.
pub fn snapshot_levels(n_steps: usize, n_snapshots: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = (0..=n_snapshots.max(1))
        .map(|k| (k * n_steps + n_snapshots.max(1) / 2) / n_snapshots.max(1))
        .collect();
    levels.dedup();
    levels
}

/// Runs `scheme.n_steps` steps from `u0`, keeping [`DEFAULT_SNAPSHOTS`]
/// snapshot levels. `oracle(t)` supplies the reference solution at time `t`.
pub fn evolve(
    scheme: &SchemeConfig,
    coeffs: &RationalCoefficients,
    u0: &GridFunction,
    mass: Option<&MassOperator>,
    oracle: Option<&dyn Fn(f64) -> GridFunction>,
    cfg: &ShiftedSolveConfig,
) -> Result<Trajectory> {
    let levels = snapshot_levels(scheme.n_steps, DEFAULT_SNAPSHOTS);
    evolve_with_snapshots(scheme, coeffs, u0, mass, oracle, cfg, &levels)
}

pub fn evolve_with_snapshots(
    scheme: &SchemeConfig,
    coeffs: &RationalCoefficients,
    u0: &GridFunction,
    mass: Option<&MassOperator>,
    oracle: Option<&dyn Fn(f64) -> GridFunction>,
    cfg: &ShiftedSolveConfig,
    snapshot_at: &[usize],
) -> Result<Trajectory> {
    let identity;
    let mass_op =
        match (scheme.kind, mass) {
            (SchemeKind::Componentwise, Some(_)) => return Err(Error::Precondition(
                "the componentwise scheme has no mass operator; use mass_weighted or regularized"
                    .into(),
            )),
            (_, Some(b)) => {
                if b.grid() != u0.grid() {
                    return Err(Error::GridMismatch {
                        left: *b.grid(),
                        right: *u0.grid(),
                    });
                }
                b
            }
            (_, None) => {
                identity = MassOperator::identity(*u0.grid());
                &identity
            }
        };

    let record = |step: usize, w: &GridFunction| -> Result<LevelRecord> {
        let t = step as f64 * scheme.tau;
        let (eps2, epsinf) = match oracle {
            Some(exact) => {
                let diff = exact(t).sub(w)?;
                (Some(diff.norm_l2()), Some(diff.norm_linf()))
            }
            None => (None, None),
        };
        Ok(LevelRecord {
            step,
            t,
            l2_norm: w.norm_l2(),
            b_norm: mass_op.norm(w)?,
            eps2,
            epsinf,
        })
    };

    let mut w = u0.clone();
    let mut levels = vec![record(0, &w)?];
    let mut snapshots = vec![(0, w.clone())];
    for step in 1..=scheme.n_steps {
        w = match scheme.kind {
            SchemeKind::Componentwise => {
                split_step_componentwise(&w, coeffs, scheme.sigma, scheme.tau, cfg, scheme.ordering)
            }
            SchemeKind::MassWeighted => split_step_mass(
                &w,
                coeffs,
                mass_op,
                scheme.sigma,
                scheme.tau,
                cfg,
                scheme.ordering,
            ),
            SchemeKind::Regularized => regularized_step(
                &w,
                coeffs,
                mass_op,
                scheme.sigma,
                scheme.tau,
                cfg,
                scheme.ordering,
            ),
        }
        .map_err(|e| e.at_level(step))?;
        levels.push(record(step, &w)?);
        if snapshot_at.contains(&step) {
            snapshots.push((step, w.clone()));
        }
    }
    if snapshots.last().map(|s| s.0) != Some(scheme.n_steps) {
        snapshots.push((scheme.n_steps, w));
    }
    Ok(Trajectory { levels, snapshots })
}
