//! Independent dense-matrix oracle built on nalgebra, sharing no code with the crate.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};

pub type M = DMatrix<Complex<f64>>;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

pub fn identity() -> M {
    M::identity(2, 2)
}

/// `n·σ` for a real 3-vector.
pub fn dot_sigma(n: [f64; 3]) -> M {
    M::from_row_slice(2, 2, &[c(n[2], 0.0), c(n[0], -n[1]), c(n[0], n[1]), c(-n[2], 0.0)])
}

pub fn state(n: [f64; 3]) -> M {
    (identity() + dot_sigma(n)) * c(0.5, 0.0)
}

/// Effects `(𝕀 ± λ n·σ)/2` (no bias).
pub fn effects(n: [f64; 3], lambda: f64) -> [M; 2] {
    let s = dot_sigma(n) * c(0.5 * lambda, 0.0);
    let half = identity() * c(0.5, 0.0);
    [&half + &s, &half - &s]
}

pub fn tr(m: &M) -> f64 {
    m.trace().re
}

pub fn sqrt_psd(m: &M) -> M {
    let e = m.clone().symmetric_eigen();
    let d = M::from_diagonal(&e.eigenvalues.map(|l| c(l.max(0.0).sqrt(), 0.0)));
    &e.eigenvectors * d * e.eigenvectors.adjoint()
}

/// `Tr[E_a ρ] · Tr[E_b K ρ K†] / Tr[E_a ρ]` with Kraus operator `K`.
pub fn joint(rho: &M, kraus: &M, ea: &M, eb: &M) -> f64 {
    let pa = tr(&(ea * rho));
    if pa <= 1e-300 {
        return 0.0;
    }
    let post = kraus * rho * kraus.adjoint() * c(1.0 / pa, 0.0);
    pa * tr(&(eb * post))
}

/// `K4 = C11 + C21 + C22 - C12` with Lüders (`√E`) updates.
pub fn k4(rho: &M, alice: &[[M; 2]; 2], bob: &[[M; 2]; 2]) -> f64 {
    let mut corr = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for a in 0..2 {
                let k = sqrt_psd(&alice[i][a]);
                for b in 0..2 {
                    let sign = if a == b { 1.0 } else { -1.0 };
                    corr[i][j] += sign * joint(rho, &k, &alice[i][a], &bob[j][b]);
                }
            }
        }
    }
    corr[0][0] + corr[1][0] + corr[1][1] - corr[0][1]
}

/// Uniform point on the unit sphere from two uniforms in `[0, 1)`.
pub fn sphere(u: f64, v: f64) -> [f64; 3] {
    let z = 2.0 * u - 1.0;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * std::f64::consts::PI * v;
    [r * phi.cos(), r * phi.sin(), z]
}
