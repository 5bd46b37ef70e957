//! Uniform grid on the unit square and scalar fields on its interior nodes.
//!
//! Only interior nodes are stored. Boundary values are identically zero and
//! are supplied implicitly wherever a stencil reaches past the interior.
//! Storage is lexicographic with `i2` as the outer index and `i1` inner.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    n1: usize,
    n2: usize,
}

impl GridSpec {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidGrid { n1, n2 });
        }
        Ok(Self { n1, n2 })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn h1(&self) -> f64 {
        1.0 / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        1.0 / self.n2 as f64
    }

    /// Interior nodes along the first axis.
    pub fn m1(&self) -> usize {
        self.n1 - 1
    }

    /// Interior nodes along the second axis.
    pub fn m2(&self) -> usize {
        self.n2 - 1
    }

    pub fn interior_len(&self) -> usize {
        self.m1() * self.m2()
    }

    /// Cell area `h1 * h2`, the weight of every node in the discrete inner product.
    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    /// Storage index of interior node `(i1, i2)`, both 1-based.
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        debug_assert!((1..self.n1).contains(&i1) && (1..self.n2).contains(&i2));
        (i2 - 1) * self.m1() + (i1 - 1)
    }

    /// Inverse of [`GridSpec::index`].
    pub fn node(&self, index: usize) -> (usize, usize) {
        (index % self.m1() + 1, index / self.m1() + 1)
    }

    pub fn coords(&self, i1: usize, i2: usize) -> (f64, f64) {
        (i1 as f64 * self.h1(), i2 as f64 * self.h2())
    }

    /// Smallest eigenvalue of the five-point Laplacian on this grid.
    pub fn delta_lower_bound(&self) -> f64 {
        axis_eigenvalue(self.n1, 1) + axis_eigenvalue(self.n2, 1)
    }
}

/// `(4 / h^2) sin^2(pi k h / 2)` with `h = 1/n`: eigenvalue `k` of the 1-D
/// second-difference operator with homogeneous Dirichlet ends.
pub(crate) fn axis_eigenvalue(n: usize, k: usize) -> f64 {
    let h = 1.0 / n as f64;
    let s = (PI * k as f64 * h / 2.0).sin();
    4.0 / (h * h) * s * s
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n1, self.n2)
    }
}

pub fn delta_lower_bound(grid: &GridSpec) -> f64 {
    grid.delta_lower_bound()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.interior_len()],
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.interior_len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_len() {
            return Err(Error::LengthMismatch {
                expected: grid.interior_len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f` at every interior node.
    pub fn sample<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut values = Vec::with_capacity(grid.interior_len());
        for i2 in 1..grid.n2() {
            for i1 in 1..grid.n1() {
                let (x1, x2) = grid.coords(i1, i2);
                values.push(f(x1, x2));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at node `(i1, i2)` with the zero extension: any index on or
    /// beyond the boundary reads as 0.
    pub fn at(&self, i1: isize, i2: isize) -> f64 {
        let g = &self.grid;
        if i1 <= 0 || i2 <= 0 || i1 >= g.n1() as isize || i2 >= g.n2() as isize {
            return 0.0;
        }
        self.values[g.index(i1 as usize, i2 as usize)]
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid,
                right: other.grid,
            });
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &GridFunction) -> Result<()> {
        self.check_same_grid(other)?;
        for (y, x) in self.values.iter_mut().zip(&other.values) {
            *y += factor * x;
        }
        Ok(())
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn inner_product(&self, other: &GridFunction) -> Result<f64> {
        inner_product(self, other)
    }

    pub fn norm_l2(&self) -> f64 {
        norm_l2(self)
    }

    pub fn norm_linf(&self) -> f64 {
        norm_linf(self)
    }

    /// Writes `i1,i2,value` rows, one per interior node, in storage order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i1,i2,value")?;
        for (idx, v) in self.values.iter().enumerate() {
            let (i1, i2) = self.grid.node(idx);
            writeln!(out, "{i1},{i2},{v:e}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`GridFunction::write_csv`]. Rows may come
    /// in any order but every interior node must appear exactly once.
    pub fn read_csv<R: BufRead>(grid: GridSpec, input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Csv("empty input".into()))?
            .map_err(|e| Error::Csv(e.to_string()))?;
        if header.trim() != "i1,i2,value" {
            return Err(Error::Csv(format!("unexpected header {header:?}")));
        }
        let mut values = vec![f64::NAN; grid.interior_len()];
        let mut seen = vec![false; grid.interior_len()];
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Csv(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Csv(format!("line {}: malformed row {line:?}", lineno + 2));
            let mut fields = line.split(',');
            let i1: usize = fields
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(bad)?;
            let i2: usize = fields
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(bad)?;
            let v: f64 = fields
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(bad)?;
            if fields.next().is_some()
                || !(1..grid.n1()).contains(&i1)
                || !(1..grid.n2()).contains(&i2)
            {
                return Err(bad());
            }
            let idx = grid.index(i1, i2);
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::Csv(format!("node ({i1},{i2}) listed twice")));
            }
            values[idx] = v;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            let (i1, i2) = grid.node(missing);
            return Err(Error::Csv(format!("node ({i1},{i2}) missing")));
        }
        Ok(Self { grid, values })
    }
}

/// Discrete `L2(omega)` inner product `sum u w h1 h2`.
pub fn inner_product(u: &GridFunction, w: &GridFunction) -> Result<f64> {
    u.check_same_grid(w)?;
    let sum: f64 = u.values.iter().zip(&w.values).map(|(a, b)| a * b).sum();
    Ok(sum * u.grid.cell_area())
}

pub fn norm_l2(u: &GridFunction) -> f64 {
    let sum: f64 = u.values.iter().map(|v| v * v).sum();
    (sum * u.grid.cell_area()).sqrt()
}

pub fn norm_linf(u: &GridFunction) -> f64 {
    u.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn initial_condition(x1: f64, x2: f64) -> f64 {
        100.0 * x1 * x1 * (1.0 - x1) * x2 * x2 * (1.0 - x2)
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(1, 4).is_err());
        assert!(GridSpec::new(4, 0).is_err());
        let g = GridSpec::new(2, 2).unwrap();
        assert_eq!(g.interior_len(), 1);
        assert_eq!(g.h1() * g.n1() as f64, 1.0);
    }

    #[test]
    fn index_round_trip() {
        let g = GridSpec::new(5, 7).unwrap();
        for idx in 0..g.interior_len() {
            let (i1, i2) = g.node(idx);
            assert_eq!(g.index(i1, i2), idx);
        }
        // i1 runs fastest
        assert_eq!(g.index(2, 1), 1);
        assert_eq!(g.index(1, 2), g.m1());
    }

    #[test]
    fn inner_product_examples() {
        let g2 = GridSpec::square(2).unwrap();
        let one = GridFunction::constant(g2, 1.0);
        assert_eq!(inner_product(&one, &one).unwrap(), 0.25);
        let two = GridFunction::constant(g2, 2.0);
        let three = GridFunction::constant(g2, 3.0);
        assert_eq!(inner_product(&two, &three).unwrap(), 1.5);

        let g4 = GridSpec::square(4).unwrap();
        let mut ind = GridFunction::zeros(g4);
        ind.values_mut()[g4.index(2, 3)] = 1.0;
        let ones = GridFunction::constant(g4, 1.0);
        assert_eq!(inner_product(&ind, &ones).unwrap(), 1.0 / 16.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = GridFunction::zeros(GridSpec::square(4).unwrap());
        let b = GridFunction::zeros(GridSpec::new(4, 5).unwrap());
        assert!(matches!(
            inner_product(&a, &b),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn norms() {
        let g2 = GridSpec::square(2).unwrap();
        let z = GridFunction::zeros(g2);
        assert_eq!(z.norm_l2(), 0.0);
        assert_eq!(z.norm_linf(), 0.0);
        let u = GridFunction::constant(g2, 3.0);
        assert_eq!(u.norm_l2(), 1.5);
        assert_eq!(u.norm_linf(), 3.0);
    }

    #[test]
    fn initial_condition_norms_on_256() {
        let g = GridSpec::square(256).unwrap();
        let u0 = GridFunction::sample(g, initial_condition);
        assert!((u0.norm_l2() - 0.95238095).abs() < 5e-9);
        assert!((u0.norm_linf() - 2.19473708).abs() < 5e-9);
    }

    #[test]
    fn sampling() {
        let g4 = GridSpec::square(4).unwrap();
        let u = GridFunction::sample(g4, |_, _| 1.0);
        assert_eq!(u.values(), &[1.0; 9]);
        let g2 = GridSpec::square(2).unwrap();
        assert_eq!(GridFunction::sample(g2, |x1, x2| x1 * x2).values(), &[0.25]);
        let g = GridSpec::new(3, 4).unwrap();
        let u = GridFunction::sample(g, |x1, x2| 10.0 * x1 + x2);
        assert!((u.at(2, 3) - (10.0 * 2.0 / 3.0 + 0.75)).abs() < 1e-14);
        assert_eq!(u.at(0, 1), 0.0);
        assert_eq!(u.at(3, 1), 0.0);
    }

    #[test]
    fn delta_examples() {
        let g = GridSpec::square(2).unwrap();
        assert!((g.delta_lower_bound() - 16.0).abs() < 1e-12);
        let g = GridSpec::new(4, 2).unwrap();
        let expected = 64.0 * (PI / 8.0).sin().powi(2) + 16.0 * (PI / 4.0).sin().powi(2);
        assert!((g.delta_lower_bound() - expected).abs() < 1e-12);
        assert!((g.delta_lower_bound() - 17.372583).abs() < 1e-6);
        let g = GridSpec::square(256).unwrap();
        let expected = 2.0 * 4.0 * 256.0 * 256.0 * (PI / 512.0).sin().powi(2);
        assert!((g.delta_lower_bound() - expected).abs() < 1e-12);
        assert!((g.delta_lower_bound() - 19.738961).abs() < 1e-6);
        assert!(g.delta_lower_bound() < 2.0 * PI * PI);
    }

    #[test]
    fn csv_round_trip() {
        let g = GridSpec::new(4, 3).unwrap();
        let u = GridFunction::sample(g, |x1, x2| (x1 + 0.1).ln() * x2.exp());
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i1,i2,value\n1,1,"));
        let back = GridFunction::read_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn csv_rejects_missing_nodes() {
        let g = GridSpec::square(3).unwrap();
        let text = "i1,i2,value\n1,1,0.5\n2,1,0.5\n1,2,0.5\n";
        assert!(GridFunction::read_csv(g, text.as_bytes()).is_err());
        let text = "i1,i2,value\n1,1,0.5\n1,1,0.5\n";
        assert!(GridFunction::read_csv(g, text.as_bytes()).is_err());
        let text = "i1,i2,value\n3,1,0.5\n";
        assert!(GridFunction::read_csv(g, text.as_bytes()).is_err());
    }
}
