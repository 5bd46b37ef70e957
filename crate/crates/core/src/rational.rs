//! Resolvent-sum approximations `R_m(A; beta) = sum_i a_i (b_i I + A)^{-1}`
//! of `A^{-beta}`.
//!
//! Two constructions are provided, both from quadrature of an integral
//! representation of `A^{-beta}` over resolvents:
//!
//! * [`gauss_jacobi_coeffs`]: the Balakrishnan integral after the change of
//!   variables `theta = mu (1 - eta) / (1 + eta)`, integrated by Gauss–Jacobi
//!   quadrature with weight `(1 - eta)^(-beta) (1 + eta)^(beta - 1)`.
//! * [`simpson_coeffs`]: a finite-interval representation on `[0, 1]` with a
//!   smoothness parameter `kappa > 1`, integrated by composite Simpson.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::laplacian::{solve_shifted_from, ShiftedSolveConfig};
use crate::quadrature::GaussJacobi;

pub const DEFAULT_MU: f64 = 4.0;
pub const DEFAULT_KAPPA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    GaussJacobi {
        mu: f64,
    },
    Simpson {
        kappa: f64,
    },
    /// Terms supplied directly, e.g. read back from CSV.
    Explicit,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::GaussJacobi { mu } => write!(f, "gauss_jacobi(mu={mu})"),
            Method::Simpson { kappa } => write!(f, "simpson(kappa={kappa})"),
            Method::Explicit => write!(f, "explicit"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalCoefficients {
    beta: f64,
    terms: Vec<Term>,
    method: Method,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain {
            name: "beta",
            value: beta,
            range: "(0, 1)",
        });
    }
    Ok(())
}

impl RationalCoefficients {
    /// Validates positivity (`a_i > 0`, `b_i >= 0`) and sorts by ascending `b`.
    pub fn from_terms(beta: f64, mut terms: Vec<Term>, method: Method) -> Result<Self> {
        check_beta(beta)?;
        if terms.is_empty() {
            return Err(Error::Precondition(
                "a rational approximation needs at least one term".into(),
            ));
        }
        for (i, t) in terms.iter().enumerate() {
            if !(t.a > 0.0 && t.a.is_finite()) || !(t.b >= 0.0 && t.b.is_finite()) {
                return Err(Error::Precondition(format!(
                    "term {} has a = {}, b = {}; need a > 0 and b >= 0",
                    i + 1,
                    t.a,
                    t.b
                )));
            }
        }
        terms.sort_by(|x, y| x.b.total_cmp(&y.b));
        Ok(Self {
            beta,
            terms,
            method,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn m(&self) -> usize {
        self.terms.len()
    }

    /// `r_m(lambda) = sum_i a_i / (b_i + lambda)`.
    pub fn evaluate(&self, lambda: f64) -> f64 {
        self.terms.iter().map(|t| t.a / (t.b + lambda)).sum()
    }

    /// Same coefficients with every `a_i` multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                a: t.a * factor,
                b: t.b,
            })
            .collect();
        Self::from_terms(self.beta, terms, self.method)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,a,b")?;
        for (i, t) in self.terms.iter().enumerate() {
            writeln!(out, "{},{:e},{:e}", i + 1, t.a, t.b)?;
        }
        Ok(())
    }

    /// Reads `i,a,b` rows; the result is tagged [`Method::Explicit`].
    pub fn read_csv<R: BufRead>(beta: f64, input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Csv("empty input".into()))?
            .map_err(|e| Error::Csv(e.to_string()))?;
        if header.trim() != "i,a,b" {
            return Err(Error::Csv(format!("unexpected header {header:?}")));
        }
        let mut terms = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::Csv(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match fields.as_slice() {
                [_, a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
                _ => None,
            };
            let (a, b) = parsed.ok_or_else(|| Error::Csv(format!("malformed row {line:?}")))?;
            terms.push(Term { a, b });
        }
        Self::from_terms(beta, terms, Method::Explicit)
    }
}

/// Gauss–Jacobi construction with `m` nodes and transformation parameter `mu`.
pub fn gauss_jacobi_coeffs(beta: f64, m: usize, mu: f64) -> Result<RationalCoefficients> {
    check_beta(beta)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            range: "(0, inf)",
        });
    }
    let quad = GaussJacobi::new(m, -beta, beta - 1.0)?;
    let prefactor = 2.0 * mu.powf(1.0 - beta) * (PI * beta).sin() / PI;
    let terms = quad
        .nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&eta, &w)| Term {
            a: prefactor * w / (1.0 + eta),
            b: mu * (1.0 - eta) / (1.0 + eta),
        })
        .collect();
    RationalCoefficients::from_terms(beta, terms, Method::GaussJacobi { mu })
}

/// Composite Simpson construction on `m` (even) subintervals of `[0, 1]`.
///
/// The node `eta = 1` is dropped because the integrand vanishes there, so the
/// terms use `eta_i = (i - 1)/m`, `i = 1..=m`, with weights `1, 4, 2, ..., 2, 4`
/// over `3m`. The first term has `b_1 = 0`.
pub fn simpson_coeffs(beta: f64, m: usize, kappa: f64) -> Result<RationalCoefficients> {
    check_beta(beta)?;
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "Simpson rule needs a positive even number of subintervals, got {m}"
        )));
    }
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::Domain {
            name: "kappa",
            value: kappa,
            range: "(1, inf)",
        });
    }
    let prefactor = (PI * beta).sin() / ((1.0 - beta) * PI);
    let slope = kappa * (1.0 - beta) / beta - 1.0;
    let terms = (1..=m)
        .map(|i| {
            let eta = (i - 1) as f64 / m as f64;
            let d = prefactor * (1.0 - eta).powf(kappa - 1.0 - kappa / beta) * (1.0 + slope * eta);
            let b = eta.powf(1.0 / (1.0 - beta)) * (1.0 - eta).powf(-kappa / beta);
            let weight = match i {
                1 => 1.0,
                _ if i % 2 == 0 => 4.0,
                _ => 2.0,
            };
            Term {
                a: weight * d / (3.0 * m as f64),
                b,
            }
        })
        .collect();
    RationalCoefficients::from_terms(beta, terms, Method::Simpson { kappa })
}

/// `R_m(A; beta) phi`, one shifted CG solve per term, summed in ascending `b`.
///
/// Each solve starts from the previous term's solution, which is close
/// because consecutive shifts are close.
pub fn apply_rm(
    coeffs: &RationalCoefficients,
    phi: &GridFunction,
    cfg: &ShiftedSolveConfig,
) -> Result<GridFunction> {
    apply_rm_counted(coeffs, phi, cfg).map(|(out, _)| out)
}

/// [`apply_rm`] that also returns the total number of CG iterations.
pub fn apply_rm_counted(
    coeffs: &RationalCoefficients,
    phi: &GridFunction,
    cfg: &ShiftedSolveConfig,
) -> Result<(GridFunction, usize)> {
    let grid = *phi.grid();
    let mut out = GridFunction::zeros(grid);
    let mut guess = GridFunction::zeros(grid);
    let mut iterations = 0;
    for (i, term) in coeffs.terms().iter().enumerate() {
        let (x, report) =
            solve_shifted_from(term.b, 1.0, phi, guess, cfg).map_err(|e| e.in_term(i + 1))?;
        iterations += report.iterations;
        out.axpy(term.a, &x)?;
        guess = x;
    }
    Ok((out, iterations))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub lambda: f64,
    pub approx: f64,
    pub exact: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProfile {
    pub max_rel_error: f64,
    pub samples: Vec<ProfileSample>,
}

/// Compares `r_m(lambda)` with `lambda^{-beta}` on `samples` geometrically
/// spaced points of `[lambda_lo, lambda_hi]`.
pub fn scalar_error_profile(
    coeffs: &RationalCoefficients,
    lambda_lo: f64,
    lambda_hi: f64,
    samples: usize,
) -> Result<ScalarProfile> {
    if !(lambda_lo > 0.0 && lambda_lo <= lambda_hi && lambda_hi.is_finite()) {
        return Err(Error::Precondition(format!(
            "need 0 < lambda_lo <= lambda_hi, got [{lambda_lo}, {lambda_hi}]"
        )));
    }
    if samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    let ratio = lambda_hi / lambda_lo;
    let rows: Vec<ProfileSample> = (0..samples)
        .map(|j| {
            let lambda = if samples == 1 {
                lambda_lo
            } else if j + 1 == samples {
                lambda_hi
            } else {
                lambda_lo * ratio.powf(j as f64 / (samples - 1) as f64)
            };
            let approx = coeffs.evaluate(lambda);
            let exact = lambda.powf(-coeffs.beta());
            ProfileSample {
                lambda,
                approx,
                exact,
                rel_error: ((approx - exact) / exact).abs(),
            }
        })
        .collect();
    let max_rel_error = rows.iter().fold(0.0_f64, |m, r| m.max(r.rel_error));
    Ok(ScalarProfile {
        max_rel_error,
        samples: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn one_point_gauss_jacobi() {
        let c = gauss_jacobi_coeffs(0.5, 1, 4.0).unwrap();
        assert_eq!(c.m(), 1);
        let t = c.terms()[0];
        assert!((t.a - 4.0).abs() < 1e-13);
        assert!((t.b - 4.0).abs() < 1e-13);
        // exact at lambda = mu
        assert!((c.evaluate(4.0) - 0.5).abs() < 1e-14);
        let p = scalar_error_profile(&c, 4.0, 4.0, 1).unwrap();
        assert!(p.max_rel_error < 1e-13);
    }

    #[test]
    fn gauss_jacobi_positivity() {
        for k in 1..10 {
            let beta = k as f64 / 10.0;
            for m in [1, 2, 3, 7, 16, 33, 64] {
                let c = gauss_jacobi_coeffs(beta, m, DEFAULT_MU).unwrap();
                assert_eq!(c.m(), m);
                assert!(c.terms().iter().all(|t| t.a > 0.0 && t.b > 0.0));
                assert!(c.terms().windows(2).all(|w| w[0].b <= w[1].b));
            }
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn simpson_first_term() {
        for m in [2, 10, 50] {
            let c = simpson_coeffs(0.5, m, 5.0).unwrap();
            let d1 = 2.0 / PI;
            assert!((d1 - 0.636_619_8).abs() < 1e-7);
            let t = c.terms()[0];
            assert_eq!(t.b, 0.0);
            assert!((t.a - d1 / (3.0 * m as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn simpson_weight_pattern() {
        let (beta, m, kappa) = (0.4, 8, 3.0);
        let c = simpson_coeffs(beta, m, kappa).unwrap();
        let prefactor = (PI * beta).sin() / ((1.0 - beta) * PI);
        let expected = [1.0, 4.0, 2.0, 4.0, 2.0, 4.0, 2.0, 4.0];
        for (i, t) in c.terms().iter().enumerate() {
            let eta = i as f64 / m as f64;
            let d = prefactor
                * (1.0 - eta).powf(kappa - 1.0 - kappa / beta)
                * (1.0 + (kappa * (1.0 - beta) / beta - 1.0) * eta);
            assert!((t.a / d * 3.0 * m as f64 - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn simpson_rejects_bad_input() {
        assert!(matches!(
            simpson_coeffs(0.5, 7, 5.0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            simpson_coeffs(0.5, 0, 5.0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            simpson_coeffs(0.5, 8, 1.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            simpson_coeffs(1.0, 8, 5.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            gauss_jacobi_coeffs(0.0, 8, 4.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            gauss_jacobi_coeffs(0.5, 8, 0.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn single_term_on_single_node() {
        let g = GridSpec::square(2).unwrap();
        let c = gauss_jacobi_coeffs(0.5, 1, 4.0).unwrap();
        // A = 16 at the single node: R phi = 4 phi / (4 + 16)
        let phi = GridFunction::constant(g, 5.0);
        let out = apply_rm(&c, &phi, &ShiftedSolveConfig::default()).unwrap();
        assert!((out.values()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_in_the_weights() {
        let g = GridSpec::square(8).unwrap();
        let c = simpson_coeffs(0.3, 10, 5.0).unwrap();
        let phi = GridFunction::sample(g, |x1, x2| x1 * x2);
        let cfg = ShiftedSolveConfig::default();
        let once = apply_rm(&c, &phi, &cfg).unwrap();
        let twice = apply_rm(&c.scaled(2.0).unwrap(), &phi, &cfg).unwrap();
        assert_eq!(twice, once.scaled(2.0));
    }

    #[test]
    fn profile_positive_everywhere() {
        let c = simpson_coeffs(0.7, 20, 5.0).unwrap();
        let p = scalar_error_profile(&c, 1e-3, 1e8, 200).unwrap();
        assert!(p.samples.iter().all(|s| s.approx > 0.0));
        assert!(
            p.samples.first().unwrap().lambda == 1e-3 && p.samples.last().unwrap().lambda == 1e8
        );
        assert!(scalar_error_profile(&c, 0.0, 1.0, 10).is_err());
        assert!(scalar_error_profile(&c, 2.0, 1.0, 10).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = gauss_jacobi_coeffs(0.35, 12, 4.0).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("i,a,b\n1,"));
        let back = RationalCoefficients::read_csv(0.35, buf.as_slice()).unwrap();
        assert_eq!(back.terms(), c.terms());
        assert_eq!(back.method(), Method::Explicit);
        assert!(RationalCoefficients::read_csv(0.35, "i,a,b\n1,-1,2\n".as_bytes()).is_err());
    }
}
