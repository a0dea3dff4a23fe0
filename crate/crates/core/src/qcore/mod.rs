//! Quantum-state and measurement primitives at small dimension.
//!
//! Outcome labels are `0` and `1`, with outcome `0` attached to the `+1`
//! eigenvalue of an observable throughout the crate.

mod eigen;
mod matrix;

pub use eigen::{eigh, HermitianEigen, JACOBI_THRESHOLD};
pub use matrix::{direct_sum, ComplexMatrix, C64};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as zero before square roots.
pub const PSD_CLAMP: f64 = 1e-10;
/// Below this, an outcome branch has no post-measurement state.
pub const ZERO_PROBABILITY: f64 = 1e-14;

const STATE_TOL: f64 = 1e-12;

/// Real 3-vector parametrising a qubit state or a measurement direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0);
    pub const X: Self = Self::new(1.0, 0.0, 0.0);
    pub const Y: Self = Self::new(0.0, 1.0, 0.0);
    pub const Z: Self = Self::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Unit vector in the x–z plane at polar angle `angle` from `+z`.
    pub fn in_xz_plane(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(s, 0.0, c)
    }

    /// Unit vector from polar angle `polar` (from `+z`) and azimuth `azimuth` (from `+x`).
    pub fn from_angles(polar: f64, azimuth: f64) -> Self {
        let (sp, cp) = polar.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Self::new(sp * ca, sp * sa, cp)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn normalized(&self) -> Self {
        self.scale(1.0 / self.norm())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// `x σx + y σy + z σz`.
    pub fn dot_sigma(&self) -> ComplexMatrix {
        ComplexMatrix::pauli_combination(self.x, self.y, self.z)
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates trace `1 ± 1e-12`, hermiticity and eigenvalues `≥ -1e-12`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        if !m.is_hermitian(STATE_TOL) {
            return Err(Error::InvalidState("matrix is not Hermitian".into()));
        }
        let lmin = eigh(&m)?.min_value();
        if lmin < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {lmin:e}")));
        }
        Ok(Self(m))
    }

    /// Hermitises and renormalises a matrix that is a density matrix up to rounding.
    pub(crate) fn from_computed(m: ComplexMatrix) -> Self {
        let h = m.hermitian_part();
        let tr = h.trace().re;
        Self(h.scale(1.0 / tr))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    /// `|ψ><ψ|` for a vector that is normalised here.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self(ComplexMatrix::outer(&v, &v)))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Bloch vector of a qubit state.
    pub fn bloch(&self) -> BlochVector {
        let [x, y, z] = self.0.pauli_components();
        BlochVector::new(2.0 * x, 2.0 * y, 2.0 * z)
    }

    /// `Tr[E ρ]`.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        op.trace_product(&self.0).re
    }
}

/// `(𝕀 + n·σ)/2`.
pub fn bloch_to_density(n: BlochVector) -> Result<DensityMatrix> {
    let r = n.norm();
    if !(r <= 1.0 + STATE_TOL) {
        return Err(Error::InvalidState(format!("Bloch vector norm {r} exceeds 1")));
    }
    let m = &ComplexMatrix::identity(2) + &n.dot_sigma();
    Ok(DensityMatrix(m.scale(0.5)))
}

/// Two-outcome measurement `{E0, E1}` with `E0 + E1 = 𝕀`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMeasurement {
    effects: [ComplexMatrix; 2],
    sqrt_effects: [ComplexMatrix; 2],
    projective: bool,
}

impl BinaryMeasurement {
    /// Builds the measurement from its outcome-0 effect; the outcome-1 effect is `𝕀 - E0`.
    /// The projective flag is set when `E0² = E0` within `1e-10`.
    pub fn from_effect(effect0: ComplexMatrix) -> Result<Self> {
        let n = effect0.dim();
        let effect1 = &ComplexMatrix::identity(n) - &effect0;
        Self::from_effects(effect0, effect1)
    }

    /// Projective measurement of a `±1`-valued observable: `E_a = (𝕀 ± O)/2`.
    pub fn from_observable(observable: &ComplexMatrix) -> Result<Self> {
        let n = observable.dim();
        let sq = observable * observable;
        if sq.max_abs_diff(&ComplexMatrix::identity(n)) > 1e-10 {
            return Err(Error::InvalidOperator("observable does not square to identity".into()));
        }
        let e0 = (&ComplexMatrix::identity(n) + observable).scale(0.5);
        let m = Self::from_effect(e0)?;
        if !m.projective {
            return Err(Error::InvalidOperator("observable does not give projective effects".into()));
        }
        Ok(m)
    }

    fn from_effects(effect0: ComplexMatrix, effect1: ComplexMatrix) -> Result<Self> {
        let n = effect0.dim();
        let sum = &effect0 + &effect1;
        if sum.max_abs_diff(&ComplexMatrix::identity(n)) > STATE_TOL {
            return Err(Error::InvalidPovm("effects do not sum to identity".into()));
        }
        let mut sqrt_effects = Vec::with_capacity(2);
        let mut projective = true;
        for e in [&effect0, &effect1] {
            if !e.is_hermitian(STATE_TOL) {
                return Err(Error::InvalidPovm("effect is not Hermitian".into()));
            }
            let eig = eigh(e)?;
            if eig.min_value() < -STATE_TOL || eig.max_value() > 1.0 + STATE_TOL {
                return Err(Error::InvalidPovm(format!(
                    "effect eigenvalues [{:e}, {}] outside [0, 1]",
                    eig.min_value(),
                    eig.max_value()
                )));
            }
            projective &= (e * e).max_abs_diff(e) <= 1e-10;
            sqrt_effects.push(eig.map(|l| l.max(0.0).sqrt()));
        }
        if projective {
            // √P = P; the spectral route would turn O(1e-17) eigenvalue noise into O(1e-9)
            sqrt_effects = vec![effect0.clone(), effect1.clone()];
        }
        let sqrt1 = sqrt_effects.pop().expect("two effects");
        let sqrt0 = sqrt_effects.pop().expect("two effects");
        Ok(Self {
            effects: [effect0, effect1],
            sqrt_effects: [sqrt0, sqrt1],
            projective,
        })
    }

    pub fn effect(&self, outcome: usize) -> &ComplexMatrix {
        &self.effects[outcome]
    }

    pub fn effects(&self) -> &[ComplexMatrix; 2] {
        &self.effects
    }

    pub(crate) fn sqrt_effect(&self, outcome: usize) -> &ComplexMatrix {
        &self.sqrt_effects[outcome]
    }

    pub fn is_projective(&self) -> bool {
        self.projective
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    /// `E0 - E1`.
    pub fn observable(&self) -> ComplexMatrix {
        &self.effects[0] - &self.effects[1]
    }

    /// The same measurement with outcome labels exchanged.
    pub fn relabeled(&self) -> Self {
        Self {
            effects: [self.effects[1].clone(), self.effects[0].clone()],
            sqrt_effects: [self.sqrt_effects[1].clone(), self.sqrt_effects[0].clone()],
            projective: self.projective,
        }
    }

    /// `U† E U` for each effect.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<Self> {
        let ud = u.adjoint();
        let e0 = self.effects[0].conjugate_by(&ud).hermitian_part();
        let e1 = self.effects[1].conjugate_by(&ud).hermitian_part();
        let mut m = Self::from_effects(e0, e1)?;
        m.projective = self.projective;
        Ok(m)
    }
}

fn check_unit(direction: &BlochVector) -> Result<()> {
    let r = direction.norm();
    if (r - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDirection(format!("direction norm {r} is not 1")));
    }
    Ok(())
}

/// Projectors onto the `±1` eigenspaces of `â·σ`; outcome 0 is `(𝕀 + â·σ)/2`.
pub fn projective_measurement(direction: BlochVector) -> Result<BinaryMeasurement> {
    check_unit(&direction)?;
    let n = direction.normalized();
    let id = ComplexMatrix::identity(2);
    let a = n.dot_sigma();
    let e0 = (&id + &a).scale(0.5);
    let e1 = (&id - &a).scale(0.5);
    // √P = P for projectors
    Ok(BinaryMeasurement {
        sqrt_effects: [e0.clone(), e1.clone()],
        effects: [e0, e1],
        projective: true,
    })
}

/// `E_0 = λP_0 + (1 + γ - λ)𝕀/2`, `E_1 = λP_1 + (1 - γ - λ)𝕀/2` with `P_a` the
/// projectors of `â·σ`.
pub fn biased_effect_pair(direction: BlochVector, sharpness: f64, bias: f64) -> Result<BinaryMeasurement> {
    check_unit(&direction)?;
    if !(sharpness > 0.0 && sharpness <= 1.0 + STATE_TOL) {
        return Err(Error::InvalidPovm(format!("sharpness {sharpness} outside (0, 1]")));
    }
    if !(bias.abs() + sharpness <= 1.0 + STATE_TOL) {
        return Err(Error::InvalidPovm(format!(
            "|bias| + sharpness = {} exceeds 1",
            bias.abs() + sharpness
        )));
    }
    if sharpness == 1.0 && bias == 0.0 {
        return projective_measurement(direction);
    }
    // (𝕀 ± γ𝕀 ± λ â·σ)/2 in closed form; eigenvalues (1 ± γ ± λ)/2.
    let n = direction.normalized();
    let a = n.dot_sigma();
    let id = ComplexMatrix::identity(2);
    let e0 = (&id.scale(1.0 + bias) + &a.scale(sharpness)).scale(0.5);
    let e1 = (&id.scale(1.0 - bias) - &a.scale(sharpness)).scale(0.5);
    let root = |lo: f64, hi: f64| {
        // √(p𝕀 + q â·σ) with eigenvalues hi (along +â) and lo (along -â)
        let (rh, rl) = (hi.max(0.0).sqrt(), lo.max(0.0).sqrt());
        &id.scale(0.5 * (rh + rl)) + &a.scale(0.5 * (rh - rl))
    };
    let s0 = root(0.5 * (1.0 + bias - sharpness), 0.5 * (1.0 + bias + sharpness));
    let s1 = root(0.5 * (1.0 - bias + sharpness), 0.5 * (1.0 - bias - sharpness));
    Ok(BinaryMeasurement {
        effects: [e0, e1],
        sqrt_effects: [s0, s1],
        projective: false,
    })
}

/// Hermitian PSD square root; eigenvalues in `[-1e-10, 0)` are clamped to zero.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eigh(m)?;
    if eig.min_value() < -PSD_CLAMP {
        return Err(Error::InvalidOperator(format!(
            "matrix has negative eigenvalue {:e}",
            eig.min_value()
        )));
    }
    Ok(eig.map(|l| l.max(0.0).sqrt()))
}

/// Outcome probability `Tr[Eρ]` and post-measurement state `√E ρ √E / Tr[Eρ]`.
pub fn luders_update(state: &DensityMatrix, effect: &ComplexMatrix) -> Result<(f64, DensityMatrix)> {
    if effect.dim() != state.dim() {
        return Err(Error::Scenario(format!(
            "effect dimension {} does not match state dimension {}",
            effect.dim(),
            state.dim()
        )));
    }
    if (effect * effect).max_abs_diff(effect) <= 1e-14 && effect.is_hermitian(1e-14) {
        // projector: √P = P exactly
        return update_with_root(state, effect, effect);
    }
    let root = psd_sqrt(effect)?;
    update_with_root(state, effect, &root)
}

pub(crate) fn update_with_root(
    state: &DensityMatrix,
    effect: &ComplexMatrix,
    root: &ComplexMatrix,
) -> Result<(f64, DensityMatrix)> {
    let p = state.expectation(effect);
    if p < ZERO_PROBABILITY {
        return Err(Error::ZeroProbabilityBranch(p));
    }
    let post = &(root * state.matrix()) * root;
    Ok((p, DensityMatrix::from_computed(post.scale(1.0 / p))))
}

/// Two-outcome POVM family parameters for the four measurements of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PovmParams {
    /// `(λ1, λ2)` for Alice's two measurements.
    pub sharpness_alice: [f64; 2],
    /// `(μ1, μ2)` for Bob's two measurements.
    pub sharpness_bob: [f64; 2],
    pub bias_alice: f64,
    pub bias_bob: f64,
    /// `(â1, â2, b̂1, b̂2)`.
    pub directions: [BlochVector; 4],
    pub input_bloch: BlochVector,
}

impl PovmParams {
    /// Sharp, unbiased measurements along the given directions.
    pub fn projective(directions: [BlochVector; 4], input_bloch: BlochVector) -> Self {
        Self {
            sharpness_alice: [1.0; 2],
            sharpness_bob: [1.0; 2],
            bias_alice: 0.0,
            bias_bob: 0.0,
            directions,
            input_bloch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &l in &self.sharpness_alice {
            if self.bias_alice.abs() + l > 1.0 + STATE_TOL {
                return Err(Error::InvalidPovm(format!(
                    "|γ_a| + λ = {} exceeds 1",
                    self.bias_alice.abs() + l
                )));
            }
        }
        for &m in &self.sharpness_bob {
            if self.bias_bob.abs() + m > 1.0 + STATE_TOL {
                return Err(Error::InvalidPovm(format!(
                    "|γ_b| + μ = {} exceeds 1",
                    self.bias_bob.abs() + m
                )));
            }
        }
        Ok(())
    }

    pub fn alice(&self) -> Result<[BinaryMeasurement; 2]> {
        Ok([
            biased_effect_pair(self.directions[0], self.sharpness_alice[0], self.bias_alice)?,
            biased_effect_pair(self.directions[1], self.sharpness_alice[1], self.bias_alice)?,
        ])
    }

    pub fn bob(&self) -> Result<[BinaryMeasurement; 2]> {
        Ok([
            biased_effect_pair(self.directions[2], self.sharpness_bob[0], self.bias_bob)?,
            biased_effect_pair(self.directions[3], self.sharpness_bob[1], self.bias_bob)?,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn mat(rows: [[f64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![re(rows[0][0]), re(rows[0][1])], vec![re(rows[1][0]), re(rows[1][1])]])
            .unwrap()
    }

    #[test]
    fn bloch_to_density_examples() {
        let mixed = bloch_to_density(BlochVector::ZERO).unwrap();
        assert!(mixed.matrix().max_abs_diff(&ComplexMatrix::identity(2).scale(0.5)) < 1e-15);
        let up = bloch_to_density(BlochVector::Z).unwrap();
        assert!(up.matrix().max_abs_diff(&mat([[1.0, 0.0], [0.0, 0.0]])) < 1e-15);
        let plus = bloch_to_density(BlochVector::X).unwrap();
        assert!(plus.matrix().max_abs_diff(&mat([[0.5, 0.5], [0.5, 0.5]])) < 1e-15);
    }

    #[test]
    fn bloch_to_density_rejects_long_vectors() {
        let err = bloch_to_density(BlochVector::new(0.8, 0.0, 0.8)).unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)));
    }

    #[test]
    fn projective_measurement_examples() {
        let z = projective_measurement(BlochVector::Z).unwrap();
        assert!(z.is_projective());
        assert!(z.effect(0).max_abs_diff(&mat([[1.0, 0.0], [0.0, 0.0]])) < 1e-15);
        assert!(z.effect(1).max_abs_diff(&mat([[0.0, 0.0], [0.0, 1.0]])) < 1e-15);

        let x = projective_measurement(BlochVector::X).unwrap();
        let id = ComplexMatrix::identity(2);
        assert!(x.effect(0).max_abs_diff(&(&id + &ComplexMatrix::sigma_x()).scale(0.5)) < 1e-15);
        assert!(x.effect(1).max_abs_diff(&(&id - &ComplexMatrix::sigma_x()).scale(0.5)) < 1e-15);

        let d = projective_measurement(BlochVector::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2)).unwrap();
        let eig = eigh(d.effect(0)).unwrap();
        assert!(eig.values[0].abs() < 1e-15 && (eig.values[1] - 1.0).abs() < 1e-15);
        let b = DensityMatrix(d.effect(0).clone()).bloch();
        assert!((b.x - FRAC_1_SQRT_2).abs() < 1e-15 && b.y.abs() < 1e-15 && (b.z - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn projective_measurement_rejects_non_unit() {
        let err = projective_measurement(BlochVector::new(0.0, 0.0, 0.5)).unwrap_err();
        assert!(matches!(err, Error::InvalidDirection(_)));
    }

    #[test]
    fn biased_effect_pair_examples() {
        let sharp = biased_effect_pair(BlochVector::Z, 1.0, 0.0).unwrap();
        assert!(sharp.is_projective());
        assert!(sharp.effect(0).max_abs_diff(&mat([[1.0, 0.0], [0.0, 0.0]])) < 1e-15);

        let half = biased_effect_pair(BlochVector::Z, 0.5, 0.0).unwrap();
        assert!(!half.is_projective());
        assert!(half.effect(0).max_abs_diff(&mat([[0.75, 0.0], [0.0, 0.25]])) < 1e-15);
        assert!(half.effect(1).max_abs_diff(&mat([[0.25, 0.0], [0.0, 0.75]])) < 1e-15);

        let err = biased_effect_pair(BlochVector::Z, 0.5, 0.6).unwrap_err();
        assert!(matches!(err, Error::InvalidPovm(_)));
        assert!(biased_effect_pair(BlochVector::Z, 0.0, 0.0).is_err());
    }

    #[test]
    fn biased_pair_closed_form_roots_match_generic_sqrt() {
        for (l, g) in [(0.5, 0.0), (0.3, 0.7), (0.9, -0.1), (0.2, -0.8)] {
            let m = biased_effect_pair(BlochVector::new(0.6, -0.48, 0.64), l, g).unwrap();
            for a in 0..2 {
                let generic = psd_sqrt(m.effect(a)).unwrap();
                assert!(m.sqrt_effect(a).max_abs_diff(&generic) < 1e-14);
            }
        }
    }

    #[test]
    fn psd_sqrt_examples() {
        let half = ComplexMatrix::identity(2).scale(0.5);
        let r = psd_sqrt(&half).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::identity(2).scale(FRAC_1_SQRT_2)) < 1e-15);

        let p = projective_measurement(BlochVector::new(0.0, 0.6, 0.8)).unwrap().effect(0).clone();
        assert!(psd_sqrt(&p).unwrap().max_abs_diff(&p) < 1e-15);

        let d = ComplexMatrix::from_real_diagonal(&[0.64, 0.25]);
        let r = psd_sqrt(&d).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.8, 0.5])) < 1e-15);
    }

    #[test]
    fn psd_sqrt_clamps_tiny_negative_and_rejects_large_negative() {
        let tiny = ComplexMatrix::from_real_diagonal(&[-5e-11, 1.0, 0.25]);
        let r = psd_sqrt(&tiny).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.0, 1.0, 0.5])) < 1e-15);
        let bad = ComplexMatrix::from_real_diagonal(&[-1e-3, 1.0]);
        assert!(matches!(psd_sqrt(&bad), Err(Error::InvalidOperator(_))));
        assert!(psd_sqrt(&ComplexMatrix::sigma_y().scale_c(C64::new(0.0, 1.0))).is_err());
    }

    #[test]
    fn luders_update_examples() {
        let mixed = DensityMatrix::maximally_mixed(2);
        let p0 = mat([[1.0, 0.0], [0.0, 0.0]]);
        let (p, post) = luders_update(&mixed, &p0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(post.matrix().max_abs_diff(&p0) < 1e-15);

        let up = bloch_to_density(BlochVector::Z).unwrap();
        let plus = (&ComplexMatrix::identity(2) + &ComplexMatrix::sigma_x()).scale(0.5);
        let (p, post) = luders_update(&up, &plus).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(post.matrix().max_abs_diff(&plus) < 1e-15);

        // √E (𝕀/2) √E / (1/2) = E for E = diag(0.75, 0.25), whose Bloch vector is (0, 0, 0.5).
        let e = biased_effect_pair(BlochVector::Z, 0.5, 0.0).unwrap();
        let (p, post) = luders_update(&mixed, e.effect(0)).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let b = post.bloch();
        assert!(b.x.abs() < 1e-15 && b.y.abs() < 1e-15 && (b.z - 0.5).abs() < 1e-15);
    }

    #[test]
    fn luders_update_zero_branch_and_dimension_errors() {
        let up = bloch_to_density(BlochVector::Z).unwrap();
        let p1 = mat([[0.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(luders_update(&up, &p1), Err(Error::ZeroProbabilityBranch(_))));
        assert!(matches!(
            luders_update(&up, &ComplexMatrix::identity(3)),
            Err(Error::Scenario(_))
        ));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.5, 0.6])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[1.2, -0.2])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.3, 0.7])).is_ok());
    }

    #[test]
    fn from_observable_requires_involution() {
        assert!(BinaryMeasurement::from_observable(&ComplexMatrix::sigma_x()).is_ok());
        assert!(BinaryMeasurement::from_observable(&ComplexMatrix::sigma_x().scale(0.5)).is_err());
        // 𝕀 is a valid (trivial) ±1 observable
        let trivial = BinaryMeasurement::from_observable(&ComplexMatrix::identity(2)).unwrap();
        assert!(trivial.effect(1).max_abs() < 1e-15);
    }

    fn direction() -> impl Strategy<Value = BlochVector> {
        (0.0..std::f64::consts::PI, 0.0..(2.0 * std::f64::consts::PI))
            .prop_map(|(t, p)| BlochVector::from_angles(t, p))
    }

    fn bloch_ball() -> impl Strategy<Value = BlochVector> {
        (direction(), 0.0..=1.0f64).prop_map(|(d, r)| d.scale(r))
    }

    proptest! {
        #[test]
        fn effects_sum_to_identity(d in direction(), l in 0.01..=1.0f64, g in -1.0..=1.0f64) {
            let g = g * (1.0 - l);
            for m in [biased_effect_pair(d, l, g).unwrap(), projective_measurement(d).unwrap()] {
                let sum = m.effect(0) + m.effect(1);
                prop_assert!(sum.max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-12);
            }
        }

        #[test]
        fn sqrt_squares_back(seed in 0u64..1000, n in prop::sample::select(vec![2usize, 4])) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = ComplexMatrix::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let m = &g * &g.adjoint();
            let r = psd_sqrt(&m).unwrap();
            prop_assert!((&r * &r).max_abs_diff(&m) <= 1e-10);
        }

        #[test]
        fn luders_probabilities_sum_to_one(n in bloch_ball(), d in direction(), l in 0.01..=1.0f64, g in -1.0..=1.0f64) {
            let rho = bloch_to_density(n).unwrap();
            let m = biased_effect_pair(d, l, g * (1.0 - l)).unwrap();
            let mut total = 0.0;
            for a in 0..2 {
                match luders_update(&rho, m.effect(a)) {
                    Ok((p, post)) => {
                        total += p;
                        prop_assert!(DensityMatrix::new(post.into_matrix()).is_ok());
                    }
                    Err(Error::ZeroProbabilityBranch(p)) => total += p,
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                }
            }
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn projective_outcome_probability_and_post_state(n in bloch_ball(), d in direction()) {
            let rho = bloch_to_density(n).unwrap();
            let m = projective_measurement(d).unwrap();
            for a in 0..2usize {
                let sign = if a == 0 { 1.0 } else { -1.0 };
                let expected = 0.5 * (1.0 + sign * d.dot(&n));
                if expected < 1e-9 { continue; }
                let (p, post) = luders_update(&rho, m.effect(a)).unwrap();
                prop_assert!((p - expected).abs() <= 1e-12);
                let b = post.bloch();
                let target = d.scale(sign);
                prop_assert!((b.x - target.x).abs() <= 1e-12);
                prop_assert!((b.y - target.y).abs() <= 1e-12);
                prop_assert!((b.z - target.z).abs() <= 1e-12);
            }
        }
    }
}
