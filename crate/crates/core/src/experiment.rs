//! Experiment drivers: stationary accuracy tables, evolution error curves,
//! scalar quadrature profiles and time-convergence orders.
//!
//! Every driver runs its cells in the order given, records per-cell failures and
//! keeps going. Rows carry plain numbers; [`Report::write_csv`] renders them
//! with nine digits after the point in scientific notation.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::laplacian::ShiftedSolveConfig;
use crate::rational::{
    apply_rm, gauss_jacobi_coeffs, scalar_error_profile, simpson_coeffs, Method,
    RationalCoefficients,
};
use crate::rational::{DEFAULT_KAPPA, DEFAULT_MU};
use crate::spectral::EigenBasis;
use crate::splitting::{
    evolve, snapshot_levels, SchemeConfig, SchemeKind, TermOrdering, DEFAULT_SNAPSHOTS,
};

pub const DEFAULT_GRID: usize = 256;
pub const DEFAULT_FINAL_TIME: f64 = 0.1;
/// Adjacent error ratios below this are treated as sitting on the floor.
pub const FLOOR_RATIO: f64 = 1.2;
/// Errors closer than this factor to the approximation floor are not used
/// for order estimates.
pub const FLOOR_MARGIN: f64 = 10.0;
pub const PROFILE_SAMPLES: usize = 400;

/// `u0 = 100 x1^2 (1 - x1) x2^2 (1 - x2)`.
pub fn initial_condition(grid: GridSpec) -> GridFunction {
    GridFunction::sample(grid, |x1, x2| {
        100.0 * x1 * x1 * (1.0 - x1) * x2 * x2 * (1.0 - x2)
    })
}

/// Right-hand side of the stationary test, `phi = x1 x2`.
pub fn stationary_rhs(grid: GridSpec) -> GridFunction {
    GridFunction::sample(grid, |x1, x2| x1 * x2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    StationaryTable,
    Evolution,
    ScalarProfile,
    ConvergenceOrder,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stationary_table" => Ok(Self::StationaryTable),
            "evolution" => Ok(Self::Evolution),
            "scalar_profile" => Ok(Self::ScalarProfile),
            "convergence_order" => Ok(Self::ConvergenceOrder),
            other => Err(Error::Precondition(format!(
                "unknown experiment '{other}' (stationary_table, evolution, scalar_profile, convergence_order)"
            ))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::StationaryTable => "stationary_table",
            Self::Evolution => "evolution",
            Self::ScalarProfile => "scalar_profile",
            Self::ConvergenceOrder => "convergence_order",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub grid: GridSpec,
    pub alphas: Vec<f64>,
    pub ms: Vec<usize>,
    /// `GaussJacobi` or `Simpson`; `Explicit` is rejected.
    pub method: Method,
    pub sigma: f64,
    pub taus: Vec<f64>,
    pub final_time: f64,
    pub tolerance: f64,
    pub ordering: TermOrdering,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::StationaryTable,
            grid: GridSpec::square(DEFAULT_GRID).expect("default grid is valid"),
            alphas: vec![0.25, 0.5, 0.75],
            ms: vec![50, 100, 200],
            method: Method::Simpson {
                kappa: DEFAULT_KAPPA,
            },
            sigma: 1.0,
            taus: vec![
                DEFAULT_FINAL_TIME / 10.0,
                DEFAULT_FINAL_TIME / 20.0,
                DEFAULT_FINAL_TIME / 40.0,
            ],
            final_time: DEFAULT_FINAL_TIME,
            tolerance: ShiftedSolveConfig::DEFAULT_TOLERANCE,
            ordering: TermOrdering::Forward,
        }
    }
}

impl ExperimentSpec {
    pub fn gauss_jacobi() -> Self {
        Self {
            method: Method::GaussJacobi { mu: DEFAULT_MU },
            ..Self::default()
        }
    }

    pub fn solver(&self) -> Result<ShiftedSolveConfig> {
        ShiftedSolveConfig::with_tolerance(self.tolerance)
    }

    /// Coefficients for exponent `beta` with `m` terms under this spec's method.
    pub fn coefficients(&self, beta: f64, m: usize) -> Result<RationalCoefficients> {
        build_coefficients(self.method, beta, m)
    }

    /// Number of steps that reach `final_time` with step `tau`.
    pub fn steps_for(&self, tau: f64) -> Result<usize> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain {
                name: "tau",
                value: tau,
                range: "(0, inf)",
            });
        }
        let n = (self.final_time / tau).round();
        if n < 1.0 || ((n * tau - self.final_time).abs() > 1e-9 * self.final_time) {
            return Err(Error::Precondition(format!(
                "tau = {tau} does not divide T = {} into whole steps",
                self.final_time
            )));
        }
        Ok(n as usize)
    }
}

pub fn build_coefficients(method: Method, beta: f64, m: usize) -> Result<RationalCoefficients> {
    match method {
        Method::GaussJacobi { mu } => gauss_jacobi_coeffs(beta, m, mu),
        Method::Simpson { kappa } => simpson_coeffs(beta, m, kappa),
        Method::Explicit => Err(Error::Precondition(
            "experiments need a constructive method (gauss_jacobi or simpson)".into(),
        )),
    }
}

/// One CSV row type per experiment.
pub trait CsvRow {
    const HEADER: &'static str;
    fn csv_fields(&self) -> String;
}

fn e9(x: f64) -> String {
    format!("{x:.9e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryRow {
    pub alpha: f64,
    pub m: usize,
    pub eps2: f64,
    pub epsinf: f64,
}

impl CsvRow for StationaryRow {
    const HEADER: &'static str = "alpha,m,eps2,epsinf";
    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{}",
            e9(self.alpha),
            self.m,
            e9(self.eps2),
            e9(self.epsinf)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionRow {
    pub alpha: f64,
    pub m: usize,
    pub sigma: f64,
    pub tau: f64,
    pub t: f64,
    pub eps2: f64,
    pub epsinf: f64,
}

impl CsvRow for EvolutionRow {
    const HEADER: &'static str = "alpha,m,sigma,tau,t,eps2,epsinf";
    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            e9(self.alpha),
            self.m,
            e9(self.sigma),
            e9(self.tau),
            e9(self.t),
            e9(self.eps2),
            e9(self.epsinf)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub beta: f64,
    pub m: usize,
    pub lambda: f64,
    pub approx: f64,
    pub exact: f64,
    pub rel_error: f64,
}

impl CsvRow for ProfileRow {
    const HEADER: &'static str = "beta,m,lambda,approx,exact,rel_error";
    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            e9(self.beta),
            self.m,
            e9(self.lambda),
            e9(self.approx),
            e9(self.exact),
            e9(self.rel_error)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub alpha: f64,
    pub m: usize,
    pub sigma: f64,
    pub tau: f64,
    /// Final-time absolute discrepancy against the exact solution.
    pub eps2: f64,
    /// Final-time gap between the rational-approximation flow and the exact one.
    pub floor: f64,
    /// `log2` of the ratio to the previous (coarser) step; absent on the first row.
    pub order: Option<f64>,
    pub floor_limited: bool,
}

impl CsvRow for OrderRow {
    const HEADER: &'static str = "alpha,m,sigma,tau,eps2,floor,order,floor_limited";
    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            e9(self.alpha),
            self.m,
            e9(self.sigma),
            e9(self.tau),
            e9(self.eps2),
            e9(self.floor),
            self.order.map(e9).unwrap_or_default(),
            u8::from(self.floor_limited)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub cell: String,
    pub error: Error,
}

impl fmt::Display for CellFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.cell, self.error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report<R> {
    pub rows: Vec<R>,
    pub failures: Vec<CellFailure>,
}

impl<R> Default for Report<R> {
    fn default() -> Self {
        Self {
            rows: Vec::new(),
            failures: Vec::new(),
        }
    }
}

impl<R: CsvRow> Report<R> {
    pub fn all_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", R::HEADER)?;
        for r in &self.rows {
            writeln!(out, "{}", r.csv_fields())?;
        }
        Ok(())
    }

    fn fail(&mut self, cell: String, error: Error) {
        self.failures.push(CellFailure { cell, error });
    }
}

fn relative_errors(approx: &GridFunction, exact: &GridFunction) -> Result<(f64, f64)> {
    let diff = approx.sub(exact)?;
    Ok((
        diff.norm_l2() / exact.norm_l2(),
        diff.norm_linf() / exact.norm_linf(),
    ))
}

/// Relative errors of `R_m(A; alpha) phi` against `A^{-alpha} phi`.
pub fn stationary_cell(
    basis: &EigenBasis,
    phi: &GridFunction,
    method: Method,
    alpha: f64,
    m: usize,
    cfg: &ShiftedSolveConfig,
) -> Result<StationaryRow> {
    let coeffs = build_coefficients(method, alpha, m)?;
    let exact = basis.apply_power(phi, -alpha)?;
    let approx = apply_rm(&coeffs, phi, cfg)?;
    let (eps2, epsinf) = relative_errors(&approx, &exact)?;
    Ok(StationaryRow {
        alpha,
        m,
        eps2,
        epsinf,
    })
}

pub fn run_stationary_table(spec: &ExperimentSpec) -> Report<StationaryRow> {
    let mut report = Report::default();
    let cfg = match spec.solver() {
        Ok(c) => c,
        Err(e) => {
            report.fail("solver".into(), e);
            return report;
        }
    };
    let basis = EigenBasis::new(spec.grid);
    let phi = stationary_rhs(spec.grid);
    for &alpha in &spec.alphas {
        for &m in &spec.ms {
            match stationary_cell(&basis, &phi, spec.method, alpha, m, &cfg) {
                Ok(row) => report.rows.push(row),
                Err(e) => report.fail(format!("alpha={alpha} m={m}"), e),
            }
        }
    }
    report
}

fn evolution_cell(
    spec: &ExperimentSpec,
    basis: &EigenBasis,
    u0: &GridFunction,
    alpha: f64,
    m: usize,
    tau: f64,
    cfg: &ShiftedSolveConfig,
) -> Result<Vec<EvolutionRow>> {
    let coeffs = spec.coefficients(1.0 - alpha, m)?;
    let n_steps = spec.steps_for(tau)?;
    let scheme = SchemeConfig::new(
        SchemeKind::Componentwise,
        spec.sigma,
        tau,
        n_steps,
        spec.ordering,
    )?;
    let oracle = |t: f64| basis.evolve_exact(u0, t, alpha);
    let traj = evolve(&scheme, &coeffs, u0, None, Some(&oracle), cfg)?;
    let keep = snapshot_levels(n_steps, DEFAULT_SNAPSHOTS);
    Ok(traj
        .levels
        .iter()
        .filter(|l| l.step > 0 && keep.contains(&l.step))
        .map(|l| EvolutionRow {
            alpha,
            m,
            sigma: spec.sigma,
            tau,
            t: l.t,
            eps2: l.eps2.unwrap_or(f64::NAN),
            epsinf: l.epsinf.unwrap_or(f64::NAN),
        })
        .collect())
}

/// Componentwise splitting from the model initial condition with discrepancies
/// against the exact fractional flow at ten evenly spaced levels.
pub fn run_evolution(spec: &ExperimentSpec) -> Report<EvolutionRow> {
    let mut report = Report::default();
    let cfg = match spec.solver() {
        Ok(c) => c,
        Err(e) => {
            report.fail("solver".into(), e);
            return report;
        }
    };
    let basis = EigenBasis::new(spec.grid);
    let u0 = initial_condition(spec.grid);
    for &alpha in &spec.alphas {
        for &m in &spec.ms {
            for &tau in &spec.taus {
                match evolution_cell(spec, &basis, &u0, alpha, m, tau, &cfg) {
                    Ok(rows) => report.rows.extend(rows),
                    Err(e) => report.fail(format!("alpha={alpha} m={m} tau={tau}"), e),
                }
            }
        }
    }
    report
}

/// Scalar error of `r_m(lambda)` against `lambda^{-beta}` over the grid's
/// spectral interval, with `beta = alpha` as in the stationary test.
pub fn run_scalar_profile(spec: &ExperimentSpec) -> Report<ProfileRow> {
    let mut report = Report::default();
    let lo = spec.grid.delta_lower_bound();
    let hi = crate::laplacian::lambda_max(&spec.grid);
    for &alpha in &spec.alphas {
        for &m in &spec.ms {
            let cell = spec
                .coefficients(alpha, m)
                .and_then(|c| scalar_error_profile(&c, lo, hi, PROFILE_SAMPLES));
            match cell {
                Ok(profile) => report
                    .rows
                    .extend(profile.samples.iter().map(|s| ProfileRow {
                        beta: alpha,
                        m,
                        lambda: s.lambda,
                        approx: s.approx,
                        exact: s.exact,
                        rel_error: s.rel_error,
                    })),
                Err(e) => report.fail(format!("alpha={alpha} m={m}"), e),
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    /// `log2(e_k / e_{k+1})` for each adjacent pair.
    pub pairwise: Vec<f64>,
    /// Mean of the pairwise orders; `None` when floor-limited.
    pub mean: Option<f64>,
    pub floor_limited: bool,
}

/// Observed order from errors at successively halved steps.
pub fn estimate_order(errors: &[f64]) -> Result<OrderEstimate> {
    if errors.len() < 2 {
        return Err(Error::Precondition(
            "order estimation needs at least two errors".into(),
        ));
    }
    if let Some(bad) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Domain {
            name: "error",
            value: *bad,
            range: "(0, inf)",
        });
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let pairwise: Vec<f64> = ratios.iter().map(|r| r.log2()).collect();
    let floor_limited = ratios.iter().any(|&r| r < FLOOR_RATIO);
    let mean = (!floor_limited).then(|| pairwise.iter().sum::<f64>() / pairwise.len() as f64);
    Ok(OrderEstimate {
        pairwise,
        mean,
        floor_limited,
    })
}

/// `||exp(-T r_m(A) A) u0 - exp(-T A^alpha) u0||`: the part of the final
/// error no time step can remove.
pub fn approximation_floor(
    basis: &EigenBasis,
    u0: &GridFunction,
    coeffs: &RationalCoefficients,
    alpha: f64,
    t: f64,
) -> Result<f64> {
    let rational = basis.evolve_with_rate(u0, t, |l| coeffs.evaluate(l) * l);
    Ok(rational.sub(&basis.evolve_exact(u0, t, alpha))?.norm_l2())
}

/// Final-time absolute `(eps2, epsinf)` of the componentwise scheme.
pub fn final_time_error(
    basis: &EigenBasis,
    u0: &GridFunction,
    coeffs: &RationalCoefficients,
    alpha: f64,
    scheme: &SchemeConfig,
    cfg: &ShiftedSolveConfig,
) -> Result<(f64, f64)> {
    let traj = evolve(scheme, coeffs, u0, None, None, cfg)?;
    let diff = traj
        .final_snapshot()
        .sub(&basis.evolve_exact(u0, scheme.final_time(), alpha))?;
    Ok((diff.norm_l2(), diff.norm_linf()))
}

fn order_cell(
    spec: &ExperimentSpec,
    basis: &EigenBasis,
    u0: &GridFunction,
    alpha: f64,
    m: usize,
    cfg: &ShiftedSolveConfig,
) -> Result<Vec<OrderRow>> {
    let coeffs = spec.coefficients(1.0 - alpha, m)?;
    let floor = approximation_floor(basis, u0, &coeffs, alpha, spec.final_time)?;
    let mut taus = spec.taus.clone();
    taus.sort_by(|a, b| b.total_cmp(a));
    let mut errors = Vec::with_capacity(taus.len());
    for &tau in &taus {
        let scheme = SchemeConfig::new(
            SchemeKind::Componentwise,
            spec.sigma,
            tau,
            spec.steps_for(tau)?,
            spec.ordering,
        )?;
        errors.push(final_time_error(basis, u0, &coeffs, alpha, &scheme, cfg)?.0);
    }
    let mut rows = Vec::with_capacity(taus.len());
    for (k, (&tau, &eps2)) in taus.iter().zip(&errors).enumerate() {
        let (order, limited) = if k == 0 {
            (None, eps2 < FLOOR_MARGIN * floor)
        } else {
            let est = estimate_order(&errors[k - 1..=k])?;
            let limited = est.floor_limited || eps2 < FLOOR_MARGIN * floor;
            (Some(est.pairwise[0]), limited)
        };
        rows.push(OrderRow {
            alpha,
            m,
            sigma: spec.sigma,
            tau,
            eps2,
            floor,
            order,
            floor_limited: limited,
        });
    }
    Ok(rows)
}

/// Final-time errors over the step list (coarse to fine) with pairwise
/// observed orders and floor flags.
pub fn run_convergence_order(spec: &ExperimentSpec) -> Report<OrderRow> {
    let mut report = Report::default();
    let cfg = match spec.solver() {
        Ok(c) => c,
        Err(e) => {
            report.fail("solver".into(), e);
            return report;
        }
    };
    let basis = EigenBasis::new(spec.grid);
    let u0 = initial_condition(spec.grid);
    for &alpha in &spec.alphas {
        for &m in &spec.ms {
            match order_cell(spec, &basis, &u0, alpha, m, &cfg) {
                Ok(rows) => report.rows.extend(rows),
                Err(e) => report.fail(format!("alpha={alpha} m={m}"), e),
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_exact_sequences() {
        let first = estimate_order(&[0.4, 0.2, 0.1]).unwrap();
        assert!(first.pairwise.iter().all(|p| (p - 1.0).abs() < 1e-15));
        assert_eq!(first.mean, Some(1.0));
        let second = estimate_order(&[0.4, 0.1, 0.025]).unwrap();
        assert!((second.mean.unwrap() - 2.0).abs() < 1e-15);
        assert!(!second.floor_limited);
    }

    #[test]
    fn floor_limited_sequences_claim_no_order() {
        let est = estimate_order(&[1e-9, 0.98e-9, 0.97e-9]).unwrap();
        assert!(est.floor_limited);
        assert_eq!(est.mean, None);
        assert!(estimate_order(&[1.0]).is_err());
        assert!(estimate_order(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn spec_defaults() {
        let s = ExperimentSpec::default();
        assert_eq!((s.grid.n1(), s.grid.n2()), (256, 256));
        assert_eq!(s.final_time, 0.1);
        assert_eq!(s.method, Method::Simpson { kappa: 5.0 });
        assert_eq!(
            ExperimentSpec::gauss_jacobi().method,
            Method::GaussJacobi { mu: 4.0 }
        );
        let g = GridSpec::square(4).unwrap();
        let u0 = initial_condition(g);
        let (x1, x2) = g.coords(2, 1);
        let expected = 100.0 * x1 * x1 * (1.0 - x1) * x2 * x2 * (1.0 - x2);
        assert_eq!(u0.values()[g.index(2, 1)], expected);
        assert_eq!(stationary_rhs(g).values()[g.index(3, 2)], 0.75 * 0.5);
    }

    #[test]
    fn steps_must_divide_final_time() {
        let s = ExperimentSpec::default();
        assert_eq!(s.steps_for(0.01).unwrap(), 10);
        assert_eq!(s.steps_for(0.1 / 40.0).unwrap(), 40);
        assert!(s.steps_for(0.03).is_err());
        assert!(s.steps_for(0.0).is_err());
    }

    #[test]
    fn kind_round_trip() {
        for k in [
            ExperimentKind::StationaryTable,
            ExperimentKind::Evolution,
            ExperimentKind::ScalarProfile,
            ExperimentKind::ConvergenceOrder,
        ] {
            assert_eq!(k.to_string().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("table".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn small_stationary_table_and_failures() {
        let spec = ExperimentSpec {
            grid: GridSpec::square(16).unwrap(),
            alphas: vec![0.5],
            ms: vec![40, 7],
            ..ExperimentSpec::default()
        };
        let report = run_stationary_table(&spec);
        // simpson needs an even term count
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.failures.len(), 1);
        assert!(report.failures[0].cell.contains("m=7"));
        assert!(
            report.rows[0].eps2 > 0.0 && report.rows[0].eps2 < 1e-2,
            "{:?}",
            report.rows[0]
        );
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("alpha,m,eps2,epsinf\n5.000000000e-1,40,"));
    }

    #[test]
    fn one_step_evolution_is_bounded() {
        let g = GridSpec::square(8).unwrap();
        let spec = ExperimentSpec {
            experiment: ExperimentKind::Evolution,
            grid: g,
            alphas: vec![0.5],
            ms: vec![20],
            taus: vec![0.1],
            ..ExperimentSpec::default()
        };
        let report = run_evolution(&spec);
        assert!(report.all_ok());
        assert_eq!(report.rows.len(), 1);
        let row = report.rows[0];
        assert!(row.eps2 > 0.0 && row.eps2 <= initial_condition(g).norm_l2());
        assert!((row.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn scalar_profile_rows() {
        let spec = ExperimentSpec {
            grid: GridSpec::square(8).unwrap(),
            alphas: vec![0.5],
            ms: vec![20],
            ..ExperimentSpec::default()
        };
        let report = run_scalar_profile(&spec);
        assert_eq!(report.rows.len(), PROFILE_SAMPLES);
        assert!((report.rows[0].lambda - spec.grid.delta_lower_bound()).abs() < 1e-12);
    }
}
