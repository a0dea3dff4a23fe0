//! Hermitian eigendecomposition.
//!
//! 2×2 matrices use the Pauli decomposition `M = α𝕀 + β v̂·σ` in closed form;
//! larger matrices use cyclic complex Jacobi rotations.

use super::matrix::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop (relative to `max(1, ‖M‖_F)`).
pub const JACOBI_THRESHOLD: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order with eigenvectors as the matching columns of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, |r, c| {
            (0..n).map(|k| v[(r, k)] * v[(c, k)].conj() * fv[k]).sum()
        })
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is checked to be
/// Hermitian within `1e-10` (entrywise).
pub fn eigh(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let defect = m.hermiticity_defect();
    if defect > 1e-10 * m.max_abs().max(1.0) {
        return Err(Error::InvalidOperator(format!(
            "matrix is not Hermitian (max |M - M†| = {defect:e})"
        )));
    }
    Ok(match m.dim() {
        1 => HermitianEigen {
            values: vec![m[(0, 0)].re],
            vectors: ComplexMatrix::identity(1),
        },
        2 => eigh_2x2(m),
        _ => eigh_jacobi(m),
    })
}

/// Unit eigenvectors of `n̂·σ` for eigenvalues `+1` and `-1`.
pub(crate) fn bloch_eigenvectors(n: [f64; 3]) -> ([C64; 2], [C64; 2]) {
    let [x, y, z] = n;
    let plus = if z >= 0.0 {
        let norm = (2.0 * (1.0 + z)).sqrt();
        [C64::new((1.0 + z) / norm, 0.0), C64::new(x / norm, y / norm)]
    } else {
        let norm = (2.0 * (1.0 - z)).sqrt();
        [C64::new(x / norm, -y / norm), C64::new((1.0 - z) / norm, 0.0)]
    };
    let minus = [-plus[1].conj(), plus[0].conj()];
    (plus, minus)
}

fn eigh_2x2(m: &ComplexMatrix) -> HermitianEigen {
    let alpha = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let v = m.hermitian_part().pauli_components();
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if r <= f64::EPSILON * alpha.abs().max(1.0) {
        return HermitianEigen {
            values: vec![alpha, alpha],
            vectors: ComplexMatrix::identity(2),
        };
    }
    let (plus, minus) = bloch_eigenvectors([v[0] / r, v[1] / r, v[2] / r]);
    let vectors = ComplexMatrix::from_fn(2, |row, col| if col == 0 { minus[row] } else { plus[row] });
    HermitianEigen {
        values: vec![alpha - r, alpha + r],
        vectors,
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn eigh_jacobi(m: &ComplexMatrix) -> HermitianEigen {
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let threshold = JACOBI_THRESHOLD * m.frobenius_norm().max(1.0);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < threshold {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r < 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let (alpha, beta) = (a[(p, p)].re, a[(q, q)].re);
                let theta = 0.5 * (2.0 * r).atan2(beta - alpha);
                let (s, c) = theta.sin_cos();
                // J = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] on the (p, q) plane.
                let j = [
                    [C64::new(c, 0.0), C64::new(s, 0.0)],
                    [-phase.conj() * s, phase.conj() * c],
                ];
                // A <- A J (columns p, q)
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * j[0][0] + akq * j[1][0];
                    a[(k, q)] = akp * j[0][1] + akq * j[1][1];
                }
                // A <- J† A (rows p, q)
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = j[0][0].conj() * apk + j[1][0].conj() * aqk;
                    a[(q, k)] = j[0][1].conj() * apk + j[1][1].conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * j[0][0] + vkq * j[1][0];
                    v[(k, q)] = vkp * j[0][1] + vkq * j[1][1];
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their index order
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    HermitianEigen { values, vectors }
}
