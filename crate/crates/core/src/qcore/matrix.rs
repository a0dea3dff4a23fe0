use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Square dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a perfect square.
    pub fn from_vec(entries: Vec<C64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != entries.len() {
            return Err(Error::InvalidArgument(format!(
                "{} entries do not form a non-empty square matrix",
                entries.len()
            )));
        }
        Ok(Self { dim, data: entries })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("rows do not form a non-empty square matrix".into()));
        }
        Ok(Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, &d) in diag.iter().enumerate() {
            m[(k, k)] = C64::new(d, 0.0);
        }
        m
    }

    /// `|v><w|`.
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        assert_eq!(v.len(), w.len(), "outer product of vectors of unequal length");
        Self::from_fn(v.len(), |r, c| v[r] * w[c].conj())
    }

    pub fn sigma_x() -> Self {
        Self {
            dim: 2,
            data: vec![ZERO, ONE, ONE, ZERO],
        }
    }

    pub fn sigma_y() -> Self {
        Self {
            dim: 2,
            data: vec![ZERO, -I, I, ZERO],
        }
    }

    pub fn sigma_z() -> Self {
        Self {
            dim: 2,
            data: vec![ONE, ZERO, ZERO, -ONE],
        }
    }

    /// `x σx + y σy + z σz`.
    pub fn pauli_combination(x: f64, y: f64, z: f64) -> Self {
        Self {
            dim: 2,
            data: vec![C64::new(z, 0.0), C64::new(x, -y), C64::new(x, y), C64::new(-z, 0.0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.dim).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_c(C64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    /// `Tr[self · other]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in trace_product");
        let n = self.dim;
        let mut acc = ZERO;
        for r in 0..n {
            for k in 0..n {
                acc += self.data[r * n + k] * other.data[k * n + r];
            }
        }
        acc
    }

    /// `A · self · A†`.
    pub fn conjugate_by(&self, a: &Self) -> Self {
        &(a * self) * &a.adjoint()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |r, c| self[(r / m, c / m)] * other[(r % m, c % m)])
    }

    /// Real Bloch components `(Tr[Mσx], Tr[Mσy], Tr[Mσz]) / 2` of a 2×2 matrix.
    pub fn pauli_components(&self) -> [f64; 3] {
        assert_eq!(self.dim, 2, "Pauli components are defined for 2x2 matrices");
        let d = &self.data;
        [
            0.5 * (d[1] + d[2]).re,
            0.5 * (d[2] - d[1]).im,
            0.5 * (d[0] - d[3]).re,
        ]
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix product");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in out[r * n..(r + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        ComplexMatrix { dim: n, data: out }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix sum");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix difference");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for r in 0..self.dim {
            write!(f, "  ")?;
            for c in 0..self.dim {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Block-diagonal matrix with `blocks` along the diagonal, in list order.
pub fn direct_sum(blocks: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("direct sum of an empty block list".into()));
    }
    let total = blocks.iter().map(ComplexMatrix::dim).sum();
    let mut out = ComplexMatrix::zeros(total);
    let mut offset = 0;
    for b in blocks {
        for r in 0..b.dim() {
            for c in 0..b.dim() {
                out[(offset + r, offset + c)] = b[(r, c)];
            }
        }
        offset += b.dim();
    }
    Ok(out)
}
