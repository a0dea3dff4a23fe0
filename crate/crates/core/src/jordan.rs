//! Block-diagonal (Jordan form) scenarios and the extraction isometry.
//!
//! In the canonical basis `A1 = diag(+1, -1, +1, -1, …)` and every observable is a
//! direct sum of 2×2 blocks on `span{|2m>, |2m+1>}`. The isometry
//! `Φ|2m> = |0>⊗|2m>`, `Φ|2m+1> = |1>⊗|2m>` moves the block-internal qubit onto a
//! separate register; output indices are `q·d + h` (qubit ⊗ `H_d`).

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qcore::{direct_sum, eigh, BinaryMeasurement, ComplexMatrix, DensityMatrix, C64};
use crate::seqstats::{self, k4_from_correlators, Scenario};
use crate::{Error, Result};

const OBSERVABLE_TOL: f64 = 1e-10;
const WEIGHT_TOL: f64 = 1e-12;
/// Singular values of the `A2` coupling below this mark an unpaired (1-dimensional) block.
const PAIRING_TOL: f64 = 1e-8;
/// Squared singular values closer than this are treated as degenerate.
const CLUSTER_TOL: f64 = 1e-6;

/// Ideal Alice observables `σz`, `σx`.
pub fn ideal_alice_block() -> [ComplexMatrix; 2] {
    [ComplexMatrix::sigma_z(), ComplexMatrix::sigma_x()]
}

/// Ideal Bob observables `(σx + σz)/√2`, `(σx - σz)/√2`.
pub fn ideal_bob_block() -> [ComplexMatrix; 2] {
    [
        ComplexMatrix::pauli_combination(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2),
        ComplexMatrix::pauli_combination(FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2),
    ]
}

/// Eigenstates of the ideal Alice observables: `|0>, |1>` for `A1`, `|±>` for `A2`.
pub fn ideal_alice_eigenstate(i: usize, a: usize) -> Result<[C64; 2]> {
    let (r, z) = (C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, 0.0));
    let one = C64::new(1.0, 0.0);
    match (i, a) {
        (1, 0) => Ok([one, z]),
        (1, 1) => Ok([z, one]),
        (2, 0) => Ok([r, r]),
        (2, 1) => Ok([r, -r]),
        _ => Err(Error::InvalidArgument(format!("no ideal eigenstate for (i, a) = ({i}, {a})"))),
    }
}

fn check_block_observable(o: &ComplexMatrix) -> Result<()> {
    if o.dim() != 2 {
        return Err(Error::Scenario(format!("block observable has dimension {}", o.dim())));
    }
    if !o.is_hermitian(OBSERVABLE_TOL)
        || (o * o).max_abs_diff(&ComplexMatrix::identity(2)) > OBSERVABLE_TOL
        || o.trace().norm() > OBSERVABLE_TOL
    {
        return Err(Error::Scenario(
            "block observable is not a traceless Hermitian involution (eigenvalues +1 and -1)".into(),
        ));
    }
    Ok(())
}

/// Probability vector check shared by block scenarios and the CLI.
pub fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("no block weights".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= -WEIGHT_TOL)) {
        return Err(Error::InvalidArgument(format!("negative block weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidArgument(format!("block weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Direct sum of qubit blocks with weights `p_m` and block states `ρ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScenario {
    weights: Vec<f64>,
    alice: Vec<[ComplexMatrix; 2]>,
    bob: Vec<[ComplexMatrix; 2]>,
    states: Vec<DensityMatrix>,
}

impl BlockScenario {
    pub fn new(
        weights: Vec<f64>,
        alice: Vec<[ComplexMatrix; 2]>,
        bob: Vec<[ComplexMatrix; 2]>,
        states: Vec<DensityMatrix>,
    ) -> Result<Self> {
        validate_weights(&weights)?;
        let n = weights.len();
        if alice.len() != n || bob.len() != n || states.len() != n {
            return Err(Error::Scenario(format!(
                "{n} weights but {} Alice, {} Bob and {} state blocks",
                alice.len(),
                bob.len(),
                states.len()
            )));
        }
        for o in alice.iter().chain(&bob).flatten() {
            check_block_observable(o)?;
        }
        if let Some(s) = states.iter().find(|s| s.dim() != 2) {
            return Err(Error::Scenario(format!("block state has dimension {}", s.dim())));
        }
        Ok(Self { weights, alice, bob, states })
    }

    pub fn num_blocks(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.num_blocks()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alice_blocks(&self) -> &[[ComplexMatrix; 2]] {
        &self.alice
    }

    pub fn bob_blocks(&self) -> &[[ComplexMatrix; 2]] {
        &self.bob
    }

    pub fn block_states(&self) -> &[DensityMatrix] {
        &self.states
    }

    /// Replaces Bob's two observables in block `m` by `R O R†`, `R` the rotation by
    /// `angle` about the y axis of the Bloch sphere.
    pub fn with_rotated_bob_block(&self, m: usize, angle: f64) -> Result<Self> {
        if m >= self.num_blocks() {
            return Err(Error::InvalidArgument(format!("block {m} out of range")));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        // exp(-i angle σy / 2) = cos 𝕀 - i sin σy
        let r = ComplexMatrix::from_real_diagonal(&[c, c]);
        let r = &r - &ComplexMatrix::sigma_y().scale_c(C64::new(0.0, s));
        let mut out = self.clone();
        for o in out.bob[m].iter_mut() {
            *o = o.conjugate_by(&r).hermitian_part();
        }
        Ok(out)
    }

    fn observable(&self, blocks: &[[ComplexMatrix; 2]], k: usize) -> Result<ComplexMatrix> {
        direct_sum(&blocks.iter().map(|b| b[k].clone()).collect::<Vec<_>>())
    }

    pub fn alice_observable(&self, i: usize) -> Result<ComplexMatrix> {
        self.observable(&self.alice, i)
    }

    pub fn bob_observable(&self, j: usize) -> Result<ComplexMatrix> {
        self.observable(&self.bob, j)
    }

    /// `⊕_m p_m ρ_m`.
    pub fn state(&self) -> Result<DensityMatrix> {
        let blocks: Vec<_> = self
            .states
            .iter()
            .zip(&self.weights)
            .map(|(s, &p)| s.matrix().scale(p))
            .collect();
        DensityMatrix::new(direct_sum(&blocks)?)
    }

    /// The full direct-sum scenario.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let m = |o: ComplexMatrix| BinaryMeasurement::from_observable(&o);
        Scenario::new(
            self.state()?,
            [m(self.alice_observable(0)?)?, m(self.alice_observable(1)?)?],
            [m(self.bob_observable(0)?)?, m(self.bob_observable(1)?)?],
        )
    }

    /// `C_ij = Σ_m p_m â^m_i·b̂^m_j`, with `â·b̂ = Tr[A B]/2` for each block.
    pub fn block_correlators(&self) -> [[f64; 2]; 2] {
        let mut c = [[0.0; 2]; 2];
        for ((a, b), &p) in self.alice.iter().zip(&self.bob).zip(&self.weights) {
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += p * 0.5 * a[i].trace_product(&b[j]).re;
                }
            }
        }
        c
    }
}

/// The canonical block scenario: ideal observables in every block, `ρ_m = 𝕀/2`.
pub fn ideal_block_scenario(num_blocks: usize, weights: &[f64]) -> Result<BlockScenario> {
    if weights.len() != num_blocks {
        return Err(Error::InvalidArgument(format!(
            "{num_blocks} blocks but {} weights",
            weights.len()
        )));
    }
    validate_weights(weights)?;
    BlockScenario::new(
        weights.to_vec(),
        vec![ideal_alice_block(); num_blocks],
        vec![ideal_bob_block(); num_blocks],
        vec![DensityMatrix::maximally_mixed(2); num_blocks],
    )
}

/// `K4` by both routes: the block-weighted correlator sum and the full direct-sum
/// pipeline. Disagreement beyond `1e-10` is reported as an error.
pub fn block_k4(bs: &BlockScenario) -> Result<f64> {
    let from_blocks = k4_from_correlators(&bs.block_correlators());
    let from_matrices = seqstats::k4(&bs.to_scenario()?)?;
    if (from_blocks - from_matrices).abs() > 1e-10 {
        return Err(Error::Inconsistent(format!(
            "block K4 {from_blocks} disagrees with direct-sum K4 {from_matrices}"
        )));
    }
    Ok(from_matrices)
}

/// `Φ: H_d → C² ⊗ H_d` as a `(2d)×d` 0/1 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryMap {
    input_dim: usize,
    /// `entries[r][c]`
    entries: Vec<Vec<f64>>,
}

impl IsometryMap {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dims(&self) -> (usize, usize) {
        (2, self.input_dim)
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Output row of input basis vector `k`.
    pub fn image_of(&self, k: usize) -> usize {
        (k % 2) * self.input_dim + 2 * (k / 2)
    }

    /// `Φ†Φ`, which is `𝕀_d` for an isometry.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let d = self.input_dim;
        (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| (0..2 * d).map(|r| self.entries[r][a] * self.entries[r][b]).sum())
                    .collect()
            })
            .collect()
    }

    /// `Φ M Φ†` for a `d×d` operator.
    pub fn apply(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.input_dim;
        if m.dim() != d {
            return Err(Error::Scenario(format!("operator of dimension {} on a {d}-dimensional input", m.dim())));
        }
        let mut out = ComplexMatrix::zeros(2 * d);
        for r in 0..d {
            for c in 0..d {
                out[(self.image_of(r), self.image_of(c))] = m[(r, c)];
            }
        }
        Ok(out)
    }
}

pub fn build_isometry(d: usize) -> Result<IsometryMap> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::UnsupportedDimension(format!(
            "extraction needs an even dimension ≥ 2, got {d}"
        )));
    }
    let mut map = IsometryMap {
        input_dim: d,
        entries: vec![vec![0.0; d]; 2 * d],
    };
    for k in 0..d {
        let r = map.image_of(k);
        map.entries[r][k] = 1.0;
    }
    Ok(map)
}

/// Result of comparing `Φ(B_j ρ_post)Φ†` with `B_j^ideal|ψ><ψ| ⊗ junk`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionVerdict {
    pub i: usize,
    pub a: usize,
    pub j: usize,
    pub residual_norm: f64,
    /// `Tr_qubit[Φ ρ_post Φ†]`, computed rather than assumed.
    pub junk_state: DensityMatrix,
    pub pass: bool,
}

fn check_canonical_a1(a1: &ComplexMatrix) -> Result<()> {
    let d = a1.dim();
    let pattern: Vec<f64> = (0..d).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let dev = a1.max_abs_diff(&ComplexMatrix::from_real_diagonal(&pattern));
    if dev > OBSERVABLE_TOL {
        return Err(Error::Basis(format!(
            "A1 is not diag(+1, -1, …) (max deviation {dev:e}); canonicalize the basis first"
        )));
    }
    Ok(())
}

/// Checks the extraction identity for Alice setting `i`, outcome `a` and Bob setting `j`.
pub fn verify_extraction(bs: &BlockScenario, i: usize, a: usize, j: usize, tolerance: f64) -> Result<ExtractionVerdict> {
    if !(1..=2).contains(&i) || !(1..=2).contains(&j) || a > 1 {
        return Err(Error::InvalidArgument(format!("(i, a, j) = ({i}, {a}, {j}) out of range")));
    }
    check_canonical_a1(&bs.alice_observable(0)?)?;
    let d = bs.dim();
    let phi = build_isometry(d)?;

    let scenario = bs.to_scenario()?;
    let (_, post) = crate::qcore::luders_update(scenario.state(), scenario.alice()[i - 1].effect(a))?;
    let product = &bs.bob_observable(j - 1)? * post.matrix();
    let lhs = phi.apply(&product)?;

    let psi = ideal_alice_eigenstate(i, a)?;
    let ideal = &ideal_bob_block()[j - 1] * &ComplexMatrix::outer(&psi, &psi);
    let junk_diag: Vec<f64> = (0..d).map(|k| if k % 2 == 0 { bs.weights[k / 2] } else { 0.0 }).collect();
    let rhs = ideal.kron(&ComplexMatrix::from_real_diagonal(&junk_diag));
    let residual_norm = (&lhs - &rhs).frobenius_norm();

    let lifted = phi.apply(post.matrix())?;
    let junk = ComplexMatrix::from_fn(d, |r, c| lifted[(r, c)] + lifted[(d + r, d + c)]);
    Ok(ExtractionVerdict {
        i,
        a,
        j,
        residual_norm,
        junk_state: DensityMatrix::from_computed(junk),
        pass: residual_norm <= tolerance,
    })
}

/// All eight `(i, a, j)` extraction checks, in lexicographic order.
pub fn verify_all_extractions(bs: &BlockScenario, tolerance: f64) -> Result<Vec<ExtractionVerdict>> {
    let mut out = Vec::with_capacity(8);
    for i in 1..=2 {
        for a in 0..2 {
            for j in 1..=2 {
                out.push(verify_extraction(bs, i, a, j, tolerance)?);
            }
        }
    }
    Ok(out)
}

fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(x, y)| x.conj() * y).sum()
}

fn mat_vec(m: &ComplexMatrix, v: &[C64]) -> Vec<C64> {
    (0..m.dim()).map(|r| (0..m.dim()).map(|c| m[(r, c)] * v[c]).sum()).collect()
}

/// `Σ_p coeffs[p] basis[p]`.
fn combine(basis: &[Vec<C64>], coeffs: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); basis[0].len()];
    for (b, &c) in basis.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(b) {
            *o += c * x;
        }
    }
    out
}

/// Conjugates the scenario into the basis where `A1 = diag(+1, -1, +1, -1, …)` and
/// `A2` pairs `|2m>` with `|2m+1>` through a real non-negative coupling.
///
/// Returns the conjugated scenario and the unitary `U` whose columns are the new
/// basis vectors (so every operator `O` becomes `U† O U`).
pub fn canonicalize_basis(scenario: &Scenario) -> Result<(Scenario, ComplexMatrix)> {
    let a1 = &scenario.alice()[0];
    if !a1.is_projective() {
        return Err(Error::Basis("A1 is not projective".into()));
    }
    let eig = eigh(&a1.observable())?;
    let d = scenario.dim();
    let minus: Vec<usize> = (0..d).filter(|&k| eig.values[k] < 0.0).collect();
    let plus: Vec<usize> = (0..d).filter(|&k| eig.values[k] >= 0.0).collect();
    if eig.values.iter().any(|l| (l.abs() - 1.0).abs() > 1e-8) {
        return Err(Error::Basis("A1 eigenvalues are not ±1".into()));
    }
    if minus.len() != plus.len() {
        return Err(Error::Basis(format!(
            "A1 has {} eigenvalues +1 and {} eigenvalues -1; blocks cannot all be paired",
            plus.len(),
            minus.len()
        )));
    }
    let n = plus.len();
    let vp: Vec<Vec<C64>> = plus.iter().map(|&k| eig.vectors.column(k)).collect();
    let vm: Vec<Vec<C64>> = minus.iter().map(|&k| eig.vectors.column(k)).collect();

    let a2 = scenario.alice()[1].observable();
    let a2_vm: Vec<Vec<C64>> = vm.iter().map(|v| mat_vec(&a2, v)).collect();
    let a2_vp: Vec<Vec<C64>> = vp.iter().map(|v| mat_vec(&a2, v)).collect();
    // X = V+† A2 V-, D = V+† A2 V+
    let x = ComplexMatrix::from_fn(n, |p, q| inner(&vp[p], &a2_vm[q]));
    let dd = ComplexMatrix::from_fn(n, |p, q| inner(&vp[p], &a2_vp[q]));
    let xxd = (&x * &x.adjoint()).hermitian_part();
    let sv = eigh(&xxd)?;

    // cluster degenerate singular values and diagonalise D inside each cluster
    let mut us: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut sigma2: Vec<f64> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && sv.values[end] - sv.values[end - 1] < CLUSTER_TOL {
            end += 1;
        }
        let cluster: Vec<Vec<C64>> = (start..end).map(|k| sv.vectors.column(k)).collect();
        let k = cluster.len();
        let d_cluster = ComplexMatrix::from_fn(k, |p, q| inner(&cluster[p], &mat_vec(&dd, &cluster[q])));
        let rot = eigh(&d_cluster.hermitian_part())?;
        for r in 0..k {
            us.push(combine(&cluster, &rot.vectors.column(r)));
            sigma2.push(inner(&us[us.len() - 1], &mat_vec(&xxd, &us[us.len() - 1])).re);
        }
        start = end;
    }

    let xd = x.adjoint();
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(d);
    for (u, s2) in us.iter().zip(&sigma2) {
        let sigma = s2.max(0.0).sqrt();
        if sigma < PAIRING_TOL {
            return Err(Error::Basis(
                "A2 leaves an A1 eigenvector uncoupled (one-dimensional Jordan block)".into(),
            ));
        }
        let w: Vec<C64> = mat_vec(&xd, u).into_iter().map(|z| z / sigma).collect();
        columns.push(combine(&vp, u));
        columns.push(combine(&vm, &w));
    }
    let unitary = ComplexMatrix::from_fn(d, |r, c| columns[c][r]);

    let conj = |m: &BinaryMeasurement| m.conjugated(&unitary);
    let state = DensityMatrix::from_computed(scenario.state().matrix().conjugate_by(&unitary.adjoint()));
    let out = Scenario::new(
        state,
        [conj(&scenario.alice()[0])?, conj(&scenario.alice()[1])?],
        [conj(&scenario.bob()[0])?, conj(&scenario.bob()[1])?],
    )?;
    Ok((out, unitary))
}

/// Largest entry of any of the four observables outside the 2×2 diagonal blocks.
pub fn block_structure_defect(scenario: &Scenario) -> f64 {
    let d = scenario.dim();
    let mut worst: f64 = 0.0;
    for m in scenario.alice().iter().chain(scenario.bob()) {
        let o = m.observable();
        for r in 0..d {
            for c in 0..d {
                if r / 2 != c / 2 {
                    worst = worst.max(o[(r, c)].norm());
                }
            }
        }
    }
    worst
}

/// Reads the block structure of a canonical scenario back into a [`BlockScenario`].
pub fn extract_blocks(scenario: &Scenario) -> Result<BlockScenario> {
    let d = scenario.dim();
    if d % 2 != 0 {
        return Err(Error::UnsupportedDimension(format!("odd dimension {d}")));
    }
    if block_structure_defect(scenario) > 1e-8 {
        return Err(Error::Basis("scenario is not block diagonal".into()));
    }
    let n = d / 2;
    let block = |o: &ComplexMatrix, m: usize| ComplexMatrix::from_fn(2, |r, c| o[(2 * m + r, 2 * m + c)]);
    let obs: Vec<ComplexMatrix> = scenario.alice().iter().chain(scenario.bob()).map(|m| m.observable()).collect();
    let rho = scenario.state().matrix();
    let mut weights = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for m in 0..n {
        let b = block(rho, m);
        let p = b.trace().re;
        weights.push(p);
        states.push(if p > 1e-14 {
            DensityMatrix::from_computed(b)
        } else {
            DensityMatrix::maximally_mixed(2)
        });
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    BlockScenario::new(
        weights,
        (0..n).map(|m| [block(&obs[0], m), block(&obs[1], m)]).collect(),
        (0..n).map(|m| [block(&obs[2], m), block(&obs[3], m)]).collect(),
        states,
    )
}

/// `sign(M)`: eigenvalues mapped to `±1` (zero to `+1`).
fn sign(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(eigh(&m.hermitian_part())?.map(|l| if l >= 0.0 { 1.0 } else { -1.0 }))
}

/// Best projective scenario found by the see-saw search.
#[derive(Debug, Clone)]
pub struct ProjectiveOptimum {
    pub k4: f64,
    pub scenario: Scenario,
    pub sweeps: usize,
}

/// Maximises `K4` over arbitrary `±1`-valued observables in dimension `d` with the
/// input `𝕀/d`, where `K4 = Tr[A1(B1 - B2) + A2(B1 + B2)]/d`. Each see-saw step is
/// the exact optimum of one side given the other:
/// `B1 = sign(A1 + A2)`, `B2 = sign(A2 - A1)`, `A1 = sign(B1 - B2)`, `A2 = sign(B1 + B2)`.
pub fn seesaw_maximize(d: usize, restarts: usize, seed: u64) -> Result<ProjectiveOptimum> {
    if d < 2 || restarts == 0 {
        return Err(Error::InvalidArgument("need d ≥ 2 and at least one restart".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective = |a: &[ComplexMatrix; 2], b: &[ComplexMatrix; 2]| {
        ((&a[0] * &(&b[0] - &b[1])).trace().re + (&a[1] * &(&b[0] + &b[1])).trace().re) / d as f64
    };
    let mut best: Option<(f64, [ComplexMatrix; 2], [ComplexMatrix; 2], usize)> = None;
    for _ in 0..restarts {
        let mut random_observable = || {
            let g = ComplexMatrix::from_fn(d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            sign(&g.hermitian_part())
        };
        let mut a = [random_observable()?, random_observable()?];
        let mut b = [ComplexMatrix::identity(d), ComplexMatrix::identity(d)];
        let mut value = f64::NEG_INFINITY;
        let mut sweeps = 0;
        for _ in 0..2000 {
            sweeps += 1;
            b = [sign(&(&a[0] + &a[1]))?, sign(&(&a[1] - &a[0]))?];
            a = [sign(&(&b[0] - &b[1]))?, sign(&(&b[0] + &b[1]))?];
            let next = objective(&a, &b);
            let done = next - value < 1e-15;
            value = next;
            if done {
                break;
            }
        }
        if best.as_ref().map_or(true, |bst| value > bst.0) {
            best = Some((value, a, b, sweeps));
        }
    }
    let (_, a, b, sweeps) = best.expect("at least one restart");
    let m = |o: &ComplexMatrix| BinaryMeasurement::from_observable(o);
    let scenario = Scenario::new(DensityMatrix::maximally_mixed(d), [m(&a[0])?, m(&a[1])?], [m(&b[0])?, m(&b[1])?])?;
    let k4 = seqstats::k4(&scenario)?;
    Ok(ProjectiveOptimum { k4, scenario, sweeps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::BlochVector;
    use rand::Rng;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|w| w / s).collect()
    }

    fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let e = eigh(&g.hermitian_part()).unwrap();
        // exp(iH) is unitary
        let v = &e.vectors;
        ComplexMatrix::from_fn(d, |r, c| {
            (0..d).map(|k| v[(r, k)] * v[(c, k)].conj() * C64::from_polar(1.0, e.values[k])).sum()
        })
    }

    #[test]
    fn block_k4_examples() {
        for w in [vec![1.0], vec![0.5, 0.3, 0.2], vec![0.1, 0.9]] {
            let bs = ideal_block_scenario(w.len(), &w).unwrap();
            assert!((block_k4(&bs).unwrap() - 2.0 * SQRT_2).abs() < 1e-12);
        }

        let p = 0.6;
        let mut alice = vec![ideal_alice_block(); 2];
        alice[1][0] = ComplexMatrix::sigma_x();
        let bs = BlockScenario::new(
            vec![p, 1.0 - p],
            alice,
            vec![ideal_bob_block(); 2],
            vec![DensityMatrix::maximally_mixed(2); 2],
        )
        .unwrap();
        // oracle: second block has â1 = â2 = x̂, so its K4 is 4 terms of ±1/√2 summing to √2
        let oracle = p * 2.0 * SQRT_2 + (1.0 - p) * SQRT_2;
        assert!((block_k4(&bs).unwrap() - oracle).abs() < 1e-12);

        let z = ComplexMatrix::sigma_z();
        let bs = BlockScenario::new(
            vec![1.0],
            vec![[z.clone(), z.clone()]],
            vec![[z.clone(), z]],
            vec![DensityMatrix::maximally_mixed(2)],
        )
        .unwrap();
        assert!((block_k4(&bs).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ideal_block_scenario_examples() {
        let bs = ideal_block_scenario(1, &[1.0]).unwrap();
        assert_eq!(bs.dim(), 2);
        assert_eq!(bs.alice_observable(0).unwrap(), ComplexMatrix::sigma_z());
        assert_eq!(bs.dim(), 2);
        assert_eq!(ideal_block_scenario(3, &[0.5, 0.3, 0.2]).unwrap().dim(), 6);
        assert!(matches!(ideal_block_scenario(2, &[0.7, 0.4]), Err(Error::InvalidArgument(_))));
        assert!(ideal_block_scenario(2, &[0.5]).is_err());
        assert!(ideal_block_scenario(2, &[1.5, -0.5]).is_err());
    }

    #[test]
    fn block_observables_must_be_dichotomic() {
        let r = BlockScenario::new(
            vec![1.0],
            vec![[ComplexMatrix::identity(2), ComplexMatrix::sigma_x()]],
            vec![ideal_bob_block()],
            vec![DensityMatrix::maximally_mixed(2)],
        );
        assert!(matches!(r, Err(Error::Scenario(_))));
    }

    #[test]
    fn isometry_examples() {
        let phi = build_isometry(2).unwrap();
        assert_eq!(phi.entries(), &[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        // |1,0> ↦ |0,1>: input 1 lands on qubit 1, junk index 0 → row 1·2 + 0
        assert_eq!(phi.image_of(1), 2);

        let phi = build_isometry(4).unwrap();
        assert_eq!(phi.entries().len(), 8);
        for c in 0..4 {
            let col: Vec<f64> = phi.entries().iter().map(|row| row[c]).collect();
            assert_eq!(col.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(col.iter().filter(|&&x| x == 0.0).count(), 7);
        }
        assert!(matches!(build_isometry(3), Err(Error::UnsupportedDimension(_))));
        assert!(build_isometry(0).is_err());

        for d in [2, 4, 6, 8, 16] {
            let g = build_isometry(d).unwrap().gram();
            for (r, row) in g.iter().enumerate() {
                for (c, &x) in row.iter().enumerate() {
                    assert_eq!(x, if r == c { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn extraction_on_ideal_scenarios() {
        let bs = ideal_block_scenario(1, &[1.0]).unwrap();
        let v = verify_extraction(&bs, 1, 0, 1, 1e-12).unwrap();
        assert!(v.pass);
        assert_eq!(v.residual_norm, 0.0);

        let w = [0.5, 0.3, 0.2];
        let bs = ideal_block_scenario(3, &w).unwrap();
        for v in verify_all_extractions(&bs, 1e-10).unwrap() {
            assert!(v.pass, "{v:?}");
            let j = v.junk_state.matrix();
            for k in 0..6 {
                let expect = if k % 2 == 0 { w[k / 2] } else { 0.0 };
                assert!((j[(k, k)].re - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extraction_matches_the_worked_a1_terms() {
        // a = 0: (|0>+|1>)/√2 <0| ⊗ Σ p_m |2m><2m|; a = 1: (|0>-|1>)/√2 <1| ⊗ junk
        let w = [0.25, 0.75];
        let bs = ideal_block_scenario(2, &w).unwrap();
        let phi = build_isometry(4).unwrap();
        let scenario = bs.to_scenario().unwrap();
        for a in 0..2 {
            let (_, post) = crate::qcore::luders_update(scenario.state(), scenario.alice()[0].effect(a)).unwrap();
            let l = phi.apply(&(&bs.bob_observable(0).unwrap() * post.matrix())).unwrap();
            let s = if a == 0 { 1.0 } else { -1.0 };
            for m in 0..2 {
                let h = 2 * m;
                assert!((l[(h, a * 4 + h)].re - w[m] * FRAC_1_SQRT_2).abs() < 1e-14);
                assert!((l[(4 + h, a * 4 + h)].re - s * w[m] * FRAC_1_SQRT_2).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn extraction_requires_canonical_basis() {
        let bs = BlockScenario::new(
            vec![1.0],
            vec![[ComplexMatrix::sigma_x(), ComplexMatrix::sigma_z()]],
            vec![ideal_bob_block()],
            vec![DensityMatrix::maximally_mixed(2)],
        )
        .unwrap();
        assert!(matches!(verify_extraction(&bs, 1, 0, 1, 1e-10), Err(Error::Basis(_))));
    }

    #[test]
    fn perturbed_bob_block_fails_extraction() {
        let w = [0.5, 0.3, 0.2];
        let bs = ideal_block_scenario(3, &w).unwrap().with_rotated_bob_block(0, 0.1).unwrap();
        let v = verify_extraction(&bs, 1, 0, 1, 1e-6).unwrap();
        // oracle: ‖(b̂' - b̂)·σ |0>‖ = |b̂' - b̂| = 2 sin(0.05), weighted by p_0
        let expected = w[0] * 2.0 * (0.05f64).sin();
        assert!((v.residual_norm - expected).abs() < 1e-12, "{}", v.residual_norm);
        assert!(!v.pass && v.residual_norm > 0.01);
    }

    #[test]
    fn canonicalize_identity_on_canonical_input() {
        let bs = ideal_block_scenario(3, &[0.5, 0.3, 0.2]).unwrap();
        let (out, u) = canonicalize_basis(&bs.to_scenario().unwrap()).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(6)) < 1e-14);
        assert!(out.alice()[1].observable().max_abs_diff(&bs.alice_observable(1).unwrap()) < 1e-14);
    }

    #[test]
    fn canonicalize_recovers_ideal_form_after_random_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            let w = random_weights(n, &mut rng);
            let bs = ideal_block_scenario(n, &w).unwrap();
            let s = bs.to_scenario().unwrap();
            let v = random_unitary(2 * n, &mut rng);
            let conj = |m: &BinaryMeasurement| m.conjugated(&v.adjoint()).unwrap();
            let hidden = Scenario::new(
                DensityMatrix::from_computed(s.state().matrix().conjugate_by(&v)),
                [conj(&s.alice()[0]), conj(&s.alice()[1])],
                [conj(&s.bob()[0]), conj(&s.bob()[1])],
            )
            .unwrap();
            let (out, u) = canonicalize_basis(&hidden).unwrap();
            assert!((&u.adjoint() * &u).max_abs_diff(&ComplexMatrix::identity(2 * n)) < 1e-10);
            for (got, want) in out.alice().iter().chain(out.bob()).zip(s.alice().iter().chain(s.bob())) {
                assert!(got.observable().max_abs_diff(&want.observable()) < 1e-10);
            }
            let blocks = extract_blocks(&out).unwrap();
            assert!(verify_all_extractions(&blocks, 1e-9).unwrap().iter().all(|v| v.pass));
        }
    }

    #[test]
    fn canonicalize_rejects_degenerate_a1() {
        let id = BinaryMeasurement::from_observable(&ComplexMatrix::identity(2)).unwrap();
        let x = BinaryMeasurement::from_observable(&ComplexMatrix::sigma_x()).unwrap();
        let s = Scenario::new(DensityMatrix::maximally_mixed(2), [id, x.clone()], [x.clone(), x]).unwrap();
        assert!(matches!(canonicalize_basis(&s), Err(Error::Basis(_))));
    }

    #[test]
    fn canonicalize_rejects_unpaired_blocks() {
        // A2 commutes with A1: every Jordan block is one-dimensional
        let z = BinaryMeasurement::from_observable(&ComplexMatrix::from_real_diagonal(&[1.0, -1.0, 1.0, -1.0])).unwrap();
        let s = Scenario::new(DensityMatrix::maximally_mixed(4), [z.clone(), z.clone()], [z.clone(), z]).unwrap();
        assert!(matches!(canonicalize_basis(&s), Err(Error::Basis(_))));
    }

    #[test]
    fn seesaw_in_dimension_four_finds_block_structure() {
        let opt = seesaw_maximize(4, 8, 3).unwrap();
        assert!((opt.k4 - 2.0 * SQRT_2).abs() < 1e-6, "{}", opt.k4);
        let (canon, _) = canonicalize_basis(&opt.scenario).unwrap();
        assert!(block_structure_defect(&canon) < 1e-6);
        assert!(block_structure_defect(&opt.scenario) >= 0.0);
    }

    fn block_direction() -> impl Strategy<Value = ComplexMatrix> {
        (0.0..std::f64::consts::PI, 0.0..(2.0 * std::f64::consts::PI))
            .prop_map(|(t, p)| BlochVector::from_angles(t, p).dot_sigma())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn both_k4_routes_agree(
            blocks in prop::collection::vec((prop::array::uniform4(block_direction()), 0.05..1.0f64, 0.0..=1.0f64), 1..=8)
        ) {
            let total: f64 = blocks.iter().map(|b| b.1).sum();
            let weights: Vec<f64> = blocks.iter().map(|b| b.1 / total).collect();
            let alice = blocks.iter().map(|b| [b.0[0].clone(), b.0[1].clone()]).collect();
            let bob = blocks.iter().map(|b| [b.0[2].clone(), b.0[3].clone()]).collect();
            let states = blocks.iter().map(|b| crate::qcore::bloch_to_density(BlochVector::new(0.0, 0.0, b.2)).unwrap()).collect();
            let bs = BlockScenario::new(weights, alice, bob, states).unwrap();
            let via_blocks = k4_from_correlators(&bs.block_correlators());
            let via_matrices = seqstats::k4(&bs.to_scenario().unwrap()).unwrap();
            prop_assert!((via_blocks - via_matrices).abs() <= 1e-10);
        }

        #[test]
        fn ideal_extractions_pass(n in 1usize..=4, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bs = ideal_block_scenario(n, &random_weights(n, &mut rng)).unwrap();
            for v in verify_all_extractions(&bs, 1e-12).unwrap() {
                prop_assert!(v.residual_norm < 1e-12);
            }
        }

        #[test]
        fn non_maximal_block_scenarios_fail_some_extraction(
            blocks in prop::collection::vec((prop::array::uniform3(block_direction()), 0.05..1.0f64), 1..=4)
        ) {
            let total: f64 = blocks.iter().map(|b| b.1).sum();
            let weights: Vec<f64> = blocks.iter().map(|b| b.1 / total).collect();
            let alice = blocks.iter().map(|b| [ComplexMatrix::sigma_z(), b.0[0].clone()]).collect();
            let bob = blocks.iter().map(|b| [b.0[1].clone(), b.0[2].clone()]).collect();
            let bs = BlockScenario::new(weights, alice, bob, vec![DensityMatrix::maximally_mixed(2); blocks.len()]).unwrap();
            prop_assume!(block_k4(&bs).unwrap() < 2.0 * SQRT_2 - 0.01);
            let verdicts = verify_all_extractions(&bs, 1e-6).unwrap();
            prop_assert!(verdicts.iter().any(|v| !v.pass));
        }
    }
}
