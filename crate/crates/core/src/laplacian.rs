//! Matrix-free five-point Laplacian and conjugate-gradient solves of the
//! shifted systems `(b I + c A) x = r`.

use crate::error::{Error, Result};
use crate::grid::{axis_eigenvalue, GridFunction, GridSpec};

/// Iterations between recomputations of the true residual.
const TRUE_RESIDUAL_PERIOD: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedSolveConfig {
    rel_tolerance: f64,
    max_iterations: usize,
}

impl ShiftedSolveConfig {
    pub const DEFAULT_TOLERANCE: f64 = 1e-12;
    pub const DEFAULT_MAX_ITERATIONS: usize = 20_000;

    pub fn new(rel_tolerance: f64, max_iterations: usize) -> Result<Self> {
        if !(rel_tolerance > 0.0 && rel_tolerance < 1.0) {
            return Err(Error::Domain {
                name: "rel_tolerance",
                value: rel_tolerance,
                range: "(0, 1)",
            });
        }
        if max_iterations == 0 {
            return Err(Error::Precondition(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(Self {
            rel_tolerance,
            max_iterations,
        })
    }

    pub fn with_tolerance(rel_tolerance: f64) -> Result<Self> {
        Self::new(rel_tolerance, Self::DEFAULT_MAX_ITERATIONS)
    }

    pub fn rel_tolerance(&self) -> f64 {
        self.rel_tolerance
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }
}

impl Default for ShiftedSolveConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: Self::DEFAULT_TOLERANCE,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// `y = shift * x + scale * A x` on raw interior storage.
pub(crate) fn apply_shifted_raw(grid: &GridSpec, shift: f64, scale: f64, x: &[f64], y: &mut [f64]) {
    let m1 = grid.m1();
    let m2 = grid.m2();
    let c1 = scale / (grid.h1() * grid.h1());
    let c2 = scale / (grid.h2() * grid.h2());
    let center = shift + 2.0 * (c1 + c2);
    debug_assert_eq!(x.len(), m1 * m2);
    debug_assert_eq!(y.len(), m1 * m2);

    for (j, yr) in y.chunks_exact_mut(m1).enumerate() {
        let row = j * m1;
        let xr = &x[row..row + m1];
        for (yi, xi) in yr.iter_mut().zip(xr) {
            *yi = center * xi;
        }
        if m1 > 1 {
            // left and right neighbours
            for (yi, xl) in yr[1..].iter_mut().zip(&xr[..m1 - 1]) {
                *yi -= c1 * xl;
            }
            for (yi, xr) in yr[..m1 - 1].iter_mut().zip(&xr[1..]) {
                *yi -= c1 * xr;
            }
        }
        if j > 0 {
            for (yi, xi) in yr.iter_mut().zip(&x[row - m1..row]) {
                *yi -= c2 * xi;
            }
        }
        if j + 1 < m2 {
            for (yi, xi) in yr.iter_mut().zip(&x[row + m1..row + 2 * m1]) {
                *yi -= c2 * xi;
            }
        }
    }
}

/// Applies the five-point Laplacian with zero Dirichlet extension.
pub fn apply_a(u: &GridFunction) -> GridFunction {
    let mut out = GridFunction::zeros(*u.grid());
    apply_shifted_raw(u.grid(), 0.0, 1.0, u.values(), out.values_mut());
    out
}

/// Largest eigenvalue of the five-point Laplacian on `grid`.
pub fn lambda_max(grid: &GridSpec) -> f64 {
    axis_eigenvalue(grid.n1(), grid.m1()) + axis_eigenvalue(grid.n2(), grid.m2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
}

/// SPD operator seen by [`conjugate_gradient`].
pub(crate) trait SpdOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `r = rhs - M x`. Implementations may evaluate this more accurately
    /// than `apply` followed by a subtraction.
    fn residual(&self, x: &[f64], rhs: &[f64], r: &mut [f64]) {
        self.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
    }
}

impl<F: Fn(&[f64], &mut [f64])> SpdOperator for F {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self(x, y)
    }
}

/// `b I + c A` on one grid.
pub(crate) struct ShiftedLaplacian {
    pub grid: GridSpec,
    pub shift: f64,
    pub scale: f64,
}

// Error-free transformations: `a * b = p + e` and `a + b = s + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double accumulator.
#[derive(Clone, Copy)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    #[inline]
    fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    #[inline]
    fn add_product(&mut self, a: f64, b: f64) {
        let (p, pe) = two_prod(a, b);
        let (s, se) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += se + pe;
    }

    #[inline]
    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

impl SpdOperator for ShiftedLaplacian {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        apply_shifted_raw(&self.grid, self.shift, self.scale, x, y);
    }

    /// The stencil products and sums are accumulated without intermediate
    /// rounding, so the residual of a well-converged iterate is not swamped
    /// by the `eps * |M| * |x|` error of a plain evaluation.
    fn residual(&self, x: &[f64], rhs: &[f64], r: &mut [f64]) {
        let m1 = self.grid.m1();
        let m2 = self.grid.m2();
        let c1 = self.scale / (self.grid.h1() * self.grid.h1());
        let c2 = self.scale / (self.grid.h2() * self.grid.h2());
        for j in 0..m2 {
            for i in 0..m1 {
                let k = j * m1 + i;
                let xi = x[k];
                let mut acc = Compensated::new(rhs[k]);
                acc.add_product(-self.shift, xi);
                acc.add_product(-2.0 * c1, xi);
                acc.add_product(-2.0 * c2, xi);
                if i > 0 {
                    acc.add_product(c1, x[k - 1]);
                }
                if i + 1 < m1 {
                    acc.add_product(c1, x[k + 1]);
                }
                if j > 0 {
                    acc.add_product(c2, x[k - m1]);
                }
                if j + 1 < m2 {
                    acc.add_product(c2, x[k + m1]);
                }
                r[k] = acc.value();
            }
        }
    }
}

/// Dot product with eight interleaved partial sums; the summation order is
/// fixed, so results are reproducible.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for k in 0..LANES {
            acc[k] += xa[k] * xb[k];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    let pairs = [
        acc[0] + acc[4],
        acc[1] + acc[5],
        acc[2] + acc[6],
        acc[3] + acc[7],
    ];
    (pairs[0] + pairs[2]) + (pairs[1] + pairs[3]) + tail
}

/// Relative residual reduction asked of each inner CG pass.
const INNER_REDUCTION: f64 = 1e-7;

/// Conjugate gradient with iterative refinement for an SPD operator. `x`
/// holds the initial guess on entry.
///
/// The outer loop evaluates the true residual through
/// [`SpdOperator::residual`] and stops once it is below the requested
/// tolerance. Each outer pass runs plain CG on the correction equation
/// `M d = r`, so rounding in the update is relative to `d` rather than to `x`.
pub(crate) fn conjugate_gradient<M: SpdOperator + ?Sized>(
    op: &M,
    rhs: &[f64],
    x: &mut [f64],
    cfg: &ShiftedSolveConfig,
) -> Result<CgReport> {
    let n = rhs.len();
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        x.fill(0.0);
        return Ok(CgReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = cfg.rel_tolerance * rhs_norm;
    let mut work = CgWork::new(n);
    let mut r = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut used = 0;

    loop {
        op.residual(x, rhs, &mut r);
        let r_norm = dot(&r, &r).sqrt();
        if r_norm <= target {
            return Ok(CgReport {
                iterations: used,
                residual: r_norm / rhs_norm,
            });
        }
        if used >= cfg.max_iterations {
            return Err(Error::IterationLimit {
                iterations: used,
                residual: r_norm / rhs_norm,
            });
        }
        let inner_target = (INNER_REDUCTION * r_norm).max(0.5 * target);
        d.fill(0.0);
        used += work.run(op, &r, &mut d, inner_target, cfg.max_iterations - used)?;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
    }
}

struct CgWork {
    r: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl CgWork {
    fn new(n: usize) -> Self {
        Self {
            r: vec![0.0; n],
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    /// Plain CG on `M x = rhs` from `x = 0` until the residual is below
    /// `target` or `budget` iterations are spent. The recurrence residual is
    /// replaced by the recomputed one every [`TRUE_RESIDUAL_PERIOD`]
    /// iterations and before declaring convergence.
    fn run<M: SpdOperator + ?Sized>(
        &mut self,
        op: &M,
        rhs: &[f64],
        x: &mut [f64],
        target: f64,
        budget: usize,
    ) -> Result<usize> {
        let Self { r, p, q } = self;
        r.copy_from_slice(rhs);
        p.copy_from_slice(rhs);
        let mut rr = dot(r, r);
        for it in 1..=budget {
            op.apply(p, q);
            let pq = dot(p, q);
            if pq.is_nan() || pq <= 0.0 {
                return Err(Error::Precondition(format!(
                    "operator is not positive definite (p.Mp = {pq:e})"
                )));
            }
            let step = rr / pq;
            for ((xi, ri), (pi, qi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(q.iter())) {
                *xi += step * pi;
                *ri -= step * qi;
            }
            let mut rr_next = dot(r, r);
            if rr_next.sqrt() <= target || it % TRUE_RESIDUAL_PERIOD == 0 {
                op.apply(x, q);
                for ((ri, bi), qi) in r.iter_mut().zip(rhs).zip(q.iter()) {
                    *ri = bi - qi;
                }
                rr_next = dot(r, r);
                if rr_next.sqrt() <= target {
                    return Ok(it);
                }
            }
            let beta = rr_next / rr;
            for (pi, ri) in p.iter_mut().zip(r.iter()) {
                *pi = ri + beta * *pi;
            }
            rr = rr_next;
        }
        Ok(budget)
    }
}

fn check_shift(b: f64, c: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::Domain {
            name: "b",
            value: b,
            range: "[0, inf)",
        });
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain {
            name: "c",
            value: c,
            range: "(0, inf)",
        });
    }
    Ok(())
}

/// Solves `(b I + c A) x = r` by conjugate gradient starting from zero.
pub fn solve_shifted(
    b: f64,
    c: f64,
    r: &GridFunction,
    cfg: &ShiftedSolveConfig,
) -> Result<GridFunction> {
    let guess = GridFunction::zeros(*r.grid());
    solve_shifted_from(b, c, r, guess, cfg).map(|(x, _)| x)
}

/// Same as [`solve_shifted`] but starting from `guess`; also reports the
/// iteration count.
pub fn solve_shifted_from(
    b: f64,
    c: f64,
    r: &GridFunction,
    mut guess: GridFunction,
    cfg: &ShiftedSolveConfig,
) -> Result<(GridFunction, CgReport)> {
    check_shift(b, c)?;
    r.check_same_grid(&guess)?;
    let grid = *r.grid();
    let op = ShiftedLaplacian {
        grid,
        shift: b,
        scale: c,
    };
    let report = conjugate_gradient(&op, r.values(), guess.values_mut(), cfg)?;
    Ok((guess, report))
}
