//! Robust self-testing: fidelity of the tested measurements with the ideal ones as a
//! function of the observed `K4`.
//!
//! The analysis rewrites the functional as `K4 = Σ_{i,a} Tr[W_ia P_{a|A_i}]` with
//! `W_ia = ½(-1)^a (B1 + (-1)^{i-1} B2)`, which is the standard functional once the
//! sign of `B2` is absorbed (the same holds for Bob's `Z_ib`). Accordingly the ideal
//! Bob observables here are `(σz + σx)/√2` and `(σz - σx)/√2`, and the x–z plane
//! parametrisation is `B1 = cosθ σz + sinθ σx`, `B2 = cosθ σz - sinθ σx`.
//!
//! Extraction channels are dephasing maps `ρ ↦ (1+ξ)/2 ρ + (1-ξ)/2 ΓρΓ`. They are
//! self-adjoint, so `Λ† = Λ`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qcore::{
    eigh, projective_measurement, psd_sqrt, BinaryMeasurement, BlochVector, ComplexMatrix, DensityMatrix,
};
use crate::seqstats::{self, Scenario};
use crate::{Error, Result, CLASSICAL_MAX_K4, QUANTUM_MAX_K4};

/// The slope used for the published bound, `(1 + √2)/2`.
pub const OPTIMAL_SLOPE: f64 = 0.5 * (1.0 + SQRT_2);
/// `min_θ (μe + μo)/2` at the optimal slope, `(2 - √2)/4`.
pub const OPTIMAL_MU: f64 = 0.25 * (2.0 - SQRT_2);

/// Which of the two θ intervals a definition comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Branch {
    /// `θ ∈ [0, π/4]`
    Lower,
    /// `θ ∈ (π/4, π/2]`
    Upper,
}

impl Branch {
    pub fn of(theta: f64) -> Self {
        if theta <= FRAC_PI_4 {
            Branch::Lower
        } else {
            Branch::Upper
        }
    }

    /// Branches whose closure contains θ; both at `π/4`.
    pub fn covering(theta: f64) -> Vec<Self> {
        if (theta - FRAC_PI_4).abs() <= 1e-15 {
            vec![Branch::Lower, Branch::Upper]
        } else {
            vec![Self::of(theta)]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Side {
    Alice,
    Bob,
}

fn check_theta(theta: f64) -> Result<()> {
    if !(-1e-12..=FRAC_PI_2 + 1e-12).contains(&theta) {
        return Err(Error::Domain(format!("θ = {theta} outside [0, π/2]")));
    }
    Ok(())
}

fn check_setting(i: usize, a: usize) -> Result<()> {
    if !(1..=2).contains(&i) || a > 1 {
        return Err(Error::InvalidArgument(format!("(i, outcome) = ({i}, {a}) out of range")));
    }
    Ok(())
}

fn sign(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `(𝕀 + (-1)^a O)/2`.
fn projector(o: &ComplexMatrix, a: usize) -> ComplexMatrix {
    (&ComplexMatrix::identity(2) + &o.scale(sign(a))).scale(0.5)
}

/// Ideal Alice observables `σz`, `σx`.
pub fn ideal_alice_observables() -> [ComplexMatrix; 2] {
    [ComplexMatrix::sigma_z(), ComplexMatrix::sigma_x()]
}

/// Ideal Bob observables in this module's sign convention.
pub fn ideal_bob_observables() -> [ComplexMatrix; 2] {
    [ideal_bob_direction(1).dot_sigma(), ideal_bob_direction(2).dot_sigma()]
}

fn ideal_bob_direction(j: usize) -> BlochVector {
    if j == 1 {
        BlochVector::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2)
    } else {
        BlochVector::new(-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2)
    }
}

/// `W_ia` for `B1 = cosθ σz + sinθ σx`, `B2 = cosθ σz - sinθ σx`.
pub fn w_operator(i: usize, a: usize, theta: f64) -> Result<ComplexMatrix> {
    check_setting(i, a)?;
    check_theta(theta)?;
    let (s, c) = theta.sin_cos();
    let b1 = ComplexMatrix::pauli_combination(s, 0.0, c);
    let b2 = ComplexMatrix::pauli_combination(-s, 0.0, c);
    Ok(w_from(i, a, &b1, &b2))
}

fn w_from(i: usize, a: usize, o1: &ComplexMatrix, o2: &ComplexMatrix) -> ComplexMatrix {
    let sum = if i == 1 { o1 + o2 } else { o1 - o2 };
    sum.scale(0.5 * sign(a))
}

/// `Z_ib = ½(-1)^b (A1 + (-1)^{i-1} A2)` with `A_i = P_{0|A_i} - P_{1|A_i}`.
pub fn z_operator(i: usize, b: usize, alice: &[BinaryMeasurement; 2]) -> Result<ComplexMatrix> {
    check_setting(i, b)?;
    if alice.iter().any(|m| !m.is_projective() || m.dim() != 2) {
        return Err(Error::InvalidArgument("Z operators need projective qubit Alice measurements".into()));
    }
    Ok(w_from(i, b, &alice[0].observable(), &alice[1].observable()))
}

/// `ρ ↦ (1+ξ)/2 ρ + (1-ξ)/2 ΓρΓ` with `Γ = γ̂·σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DephasingChannel {
    pub xi: f64,
    pub axis: BlochVector,
}

impl DephasingChannel {
    pub fn new(axis: BlochVector, xi: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&xi) {
            return Err(Error::Domain(format!("ξ = {xi} outside [-1, 1]")));
        }
        if (axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDirection(format!("dephasing axis norm {}", axis.norm())));
        }
        Ok(Self { xi, axis })
    }

    pub fn identity() -> Self {
        Self { xi: 1.0, axis: BlochVector::Z }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let g = self.axis.dot_sigma();
        let twirled = &(&g * rho) * &g;
        &rho.scale(0.5 * (1.0 + self.xi)) + &twirled.scale(0.5 * (1.0 - self.xi))
    }

    /// Heisenberg-picture map; equal to [`Self::apply`] for a dephasing channel.
    pub fn adjoint(&self, op: &ComplexMatrix) -> ComplexMatrix {
        self.apply(op)
    }
}

/// The θ-dependent dephasing channel used as extraction map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtractionChannel {
    pub theta: f64,
    pub s: f64,
    pub xi: f64,
    pub branch: Branch,
    pub side: Side,
    pub channel: DephasingChannel,
}

/// `ξ = min{1, 2s sinθ}` with `Γ = σz` on `[0, π/4]`; `ξ = min{1, 2s cosθ}` with
/// `Γ = σx` on `(π/4, π/2]`.
pub fn extraction_channel(theta: f64, s: f64) -> Result<ExtractionChannel> {
    extraction_channel_on(Side::Alice, theta, s, Branch::of(theta))
}

/// Bob's analogue: the same `ξ(θ)`, dephasing about Bob's ideal axes `B1`, `B2`.
pub fn bob_extraction_channel(theta: f64, s: f64) -> Result<ExtractionChannel> {
    extraction_channel_on(Side::Bob, theta, s, Branch::of(theta))
}

/// Extraction channel with an explicit branch (both are meaningful at `θ = π/4`).
pub fn extraction_channel_on(side: Side, theta: f64, s: f64, branch: Branch) -> Result<ExtractionChannel> {
    check_theta(theta)?;
    let (sin, cos) = theta.sin_cos();
    let (xi, axis) = match (branch, side) {
        (Branch::Lower, Side::Alice) => ((2.0 * s * sin).min(1.0), BlochVector::Z),
        (Branch::Upper, Side::Alice) => ((2.0 * s * cos).min(1.0), BlochVector::X),
        (Branch::Lower, Side::Bob) => ((2.0 * s * sin).min(1.0), ideal_bob_direction(1)),
        (Branch::Upper, Side::Bob) => ((2.0 * s * cos).min(1.0), ideal_bob_direction(2)),
    };
    let xi = xi.max(-1.0);
    Ok(ExtractionChannel {
        theta,
        s,
        xi,
        branch,
        side,
        channel: DephasingChannel::new(axis, xi)?,
    })
}

/// `K_ia = Λ†[P^ideal_{a|A_i}]` (or Bob's `K_ib` for a Bob-side channel).
pub fn k_operator(i: usize, a: usize, channel: &ExtractionChannel) -> Result<ComplexMatrix> {
    check_setting(i, a)?;
    let ideal = match channel.side {
        Side::Alice => ideal_alice_observables(),
        Side::Bob => ideal_bob_observables(),
    };
    Ok(channel.channel.adjoint(&projector(&ideal[i - 1], a)))
}

/// Largest `μ_e = μ_10 = μ_11` and `μ_o = μ_20 = μ_21` compatible with `K ⪰ sW + μ𝕀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MuCoefficients {
    pub mu_even: f64,
    pub mu_odd: f64,
    pub s: f64,
    pub theta: f64,
    pub xi: f64,
    pub branch: Branch,
}

impl MuCoefficients {
    pub fn average(&self) -> f64 {
        0.5 * (self.mu_even + self.mu_odd)
    }

    /// `μ_ia` for setting `i`.
    pub fn for_setting(&self, i: usize) -> f64 {
        if i == 1 {
            self.mu_even
        } else {
            self.mu_odd
        }
    }
}

pub fn mu_coefficients(theta: f64, s: f64) -> Result<MuCoefficients> {
    mu_coefficients_on(theta, s, Branch::of(theta))
}

pub fn mu_coefficients_on(theta: f64, s: f64, branch: Branch) -> Result<MuCoefficients> {
    let xi = extraction_channel_on(Side::Alice, theta, s, branch)?.xi;
    let (sin, cos) = theta.sin_cos();
    let sharp = |t: f64| (1.0 - s * t).min(s * t);
    let dephased = |t: f64| (0.5 + 0.5 * xi - s * t).min(0.5 - 0.5 * xi + s * t);
    let (mu_even, mu_odd) = match branch {
        Branch::Lower => (sharp(cos), dephased(sin)),
        Branch::Upper => (dephased(cos), sharp(sin)),
    };
    Ok(MuCoefficients {
        mu_even,
        mu_odd,
        s,
        theta,
        xi,
        branch,
    })
}

/// Outcome of the θ sweep of `K - sW - μ𝕀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InequalityReport {
    pub side: Side,
    pub s: f64,
    pub theta_grid: usize,
    /// Smallest eigenvalue of `K_ia - sW_ia - μ_ia𝕀` over θ, `(i, a)` and branches.
    pub min_eigenvalue: f64,
    pub argmin_theta: f64,
    /// `min_θ (μe + μo)/2`, the constant in the fidelity bound.
    pub min_average_mu: f64,
    pub argmin_average_mu_theta: f64,
}

impl InequalityReport {
    /// The operator inequality holds and the bound constant reaches `(2 - √2)/4`.
    pub fn certified(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol && self.min_average_mu >= OPTIMAL_MU - tol
    }

    pub fn inequality_holds(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol
    }

    /// `s/4 · K4 + min μ`.
    pub fn bound(&self, k4: f64) -> f64 {
        0.25 * self.s * k4 + self.min_average_mu
    }
}

/// Tested measurement pair at angle θ: Bob's `B1, B2` (Alice side) or Alice's
/// `A1 = cosθ B1* + sinθ B2*`, `A2 = cosθ B1* - sinθ B2*` (Bob side).
fn counterpart(side: Side, theta: f64) -> [ComplexMatrix; 2] {
    let (s, c) = theta.sin_cos();
    match side {
        Side::Alice => [
            ComplexMatrix::pauli_combination(s, 0.0, c),
            ComplexMatrix::pauli_combination(-s, 0.0, c),
        ],
        Side::Bob => {
            let (u, v) = (ideal_bob_direction(1), ideal_bob_direction(2));
            let d1 = BlochVector::new(c * u.x + s * v.x, 0.0, c * u.z + s * v.z);
            let d2 = BlochVector::new(c * u.x - s * v.x, 0.0, c * u.z - s * v.z);
            [d1.dot_sigma(), d2.dot_sigma()]
        }
    }
}

/// `(min eigenvalue, average μ)` at one θ and branch.
fn inequality_at(side: Side, s: f64, theta: f64, branch: Branch) -> Result<(f64, f64)> {
    let channel = extraction_channel_on(side, theta, s, branch)?;
    let mu = mu_coefficients_on(theta, s, branch)?;
    let [o1, o2] = counterpart(side, theta);
    let mut worst = f64::INFINITY;
    for i in 1..=2 {
        for a in 0..2 {
            let k = k_operator(i, a, &channel)?;
            let w = w_from(i, a, &o1, &o2);
            let m = &(&k - &w.scale(s)) - &ComplexMatrix::identity(2).scale(mu.for_setting(i));
            worst = worst.min(eigh(&m)?.min_value());
        }
    }
    Ok((worst, mu.average()))
}

/// Sweeps θ over `theta_grid` uniform points of `[0, π/2]` plus `π/4`, where both
/// branch definitions are evaluated.
pub fn check_operator_inequality(side: Side, s: f64, theta_grid: usize) -> Result<InequalityReport> {
    if theta_grid < 2 {
        return Err(Error::InvalidArgument(format!("θ grid of {theta_grid} points")));
    }
    let mut thetas: Vec<f64> = (0..theta_grid)
        .map(|k| FRAC_PI_2 * k as f64 / (theta_grid - 1) as f64)
        .collect();
    thetas.push(FRAC_PI_4);
    let points: Vec<(f64, Branch)> = thetas
        .iter()
        .flat_map(|&t| Branch::covering(t).into_iter().map(move |b| (t, b)))
        .collect();
    let evaluated: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|&(t, b)| inequality_at(side, s, t, b).map(|(e, m)| (t, e, m)))
        .collect::<Result<_>>()?;

    // first minimum in grid order wins ties
    let mut report = InequalityReport {
        side,
        s,
        theta_grid,
        min_eigenvalue: f64::INFINITY,
        argmin_theta: 0.0,
        min_average_mu: f64::INFINITY,
        argmin_average_mu_theta: 0.0,
    };
    for (t, e, m) in evaluated {
        if e < report.min_eigenvalue {
            report.min_eigenvalue = e;
            report.argmin_theta = t;
        }
        if m < report.min_average_mu {
            report.min_average_mu = m;
            report.argmin_average_mu_theta = t;
        }
    }
    Ok(report)
}

/// Largest slope `s ∈ [0, s_max]` for which the sweep certifies, found by bisection
/// (the certified set is an interval starting at 0).
pub fn largest_certified_slope(side: Side, theta_grid: usize, s_max: f64, tol: f64) -> Result<f64> {
    let ok = |s: f64| check_operator_inequality(side, s, theta_grid).map(|r| r.certified(tol));
    if !ok(0.0)? {
        return Err(Error::Domain("no slope certifies".into()));
    }
    if ok(s_max)? {
        return Ok(s_max);
    }
    let (mut lo, mut hi) = (0.0, s_max);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `F(K4) ≥ (1+√2)/8 · K4 + (2-√2)/4`, written as the line through `(2, 3/4)` and
/// `(2√2, 1)` so that both endpoints are exact in floating point.
pub fn fidelity_lower_bound(k4: f64) -> Result<f64> {
    if !(k4.abs() <= QUANTUM_MAX_K4 + 1e-12) {
        return Err(Error::Domain(format!("K4 = {k4} outside [-2√2, 2√2]")));
    }
    Ok(0.75 + 0.25 * (k4 - CLASSICAL_MAX_K4) / (QUANTUM_MAX_K4 - CLASSICAL_MAX_K4))
}

/// `¼ Σ_{i,a} Tr(Λ[P_{a|A_i}] P^ideal_{a|A_i})` against σz, σx.
pub fn measurement_fidelity(alice: &[BinaryMeasurement; 2], channel: &DephasingChannel) -> Result<f64> {
    fidelity_against(alice, &ideal_alice_observables(), channel)
}

/// Bob's counterpart, against this module's ideal Bob observables.
pub fn bob_measurement_fidelity(bob: &[BinaryMeasurement; 2], channel: &DephasingChannel) -> Result<f64> {
    fidelity_against(bob, &ideal_bob_observables(), channel)
}

fn fidelity_against(real: &[BinaryMeasurement; 2], ideal: &[ComplexMatrix; 2], channel: &DephasingChannel) -> Result<f64> {
    if real.iter().any(|m| m.dim() != 2) {
        return Err(Error::Scenario("fidelities are defined for qubit measurements".into()));
    }
    let mut total = 0.0;
    for (m, o) in real.iter().zip(ideal) {
        for a in 0..2 {
            total += channel.apply(m.effect(a)).trace_product(&projector(o, a)).re;
        }
    }
    Ok(0.25 * total)
}

/// `Tr √(√ρ σ √ρ)` (not squared).
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let r = psd_sqrt(rho.matrix())?;
    let inner = (&(&r * sigma.matrix()) * &r).hermitian_part();
    Ok(psd_sqrt(&inner)?.trace().re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvePoint {
    pub phi: f64,
    /// `2√(1 + tan²φ)`
    pub k4: f64,
    /// `(3 + tanφ)/4`
    pub fidelity: f64,
    /// `K4` from the sequential-measurement simulation.
    pub k4_simulated: f64,
    /// Average fidelity from applying the channel to `σz`, `σx`.
    pub fidelity_simulated: f64,
    pub bound: f64,
}

/// Alice `σz` and the `σz`-dephased `σx` (effects `(𝕀 ± ξσx)/2`), Bob at angle φ
/// (`B2` sign-flipped to the standard functional), maximally mixed input.
pub fn dephased_scenario(phi: f64, xi: f64) -> Result<Scenario> {
    let channel = DephasingChannel::new(BlochVector::Z, xi)?;
    let a1 = projective_measurement(BlochVector::Z)?;
    let sx = projective_measurement(BlochVector::X)?;
    let a2 = BinaryMeasurement::from_effect(channel.apply(sx.effect(0)))?;
    let (s, c) = phi.sin_cos();
    let b1 = projective_measurement(BlochVector::new(s, 0.0, c))?;
    let b2 = projective_measurement(BlochVector::new(s, 0.0, -c))?;
    Scenario::new(DensityMatrix::maximally_mixed(2), [a1, a2], [b1, b2])
}

/// Uniform φ grid on `[0, π/4]`; each point carries the closed forms and the
/// simulated pair, which must agree within `1e-9`.
pub fn dephasing_curve(num_points: usize) -> Result<Vec<CurvePoint>> {
    if num_points < 2 {
        return Err(Error::InvalidArgument(format!("{num_points} curve points")));
    }
    let ideal = [projective_measurement(BlochVector::Z)?, projective_measurement(BlochVector::X)?];
    (0..num_points)
        .map(|k| {
            let phi = if k + 1 == num_points {
                FRAC_PI_4
            } else {
                FRAC_PI_4 * k as f64 / (num_points - 1) as f64
            };
            // tan(π/4) rounds just above 1
            let xi = phi.tan().min(1.0);
            let k4 = 2.0 * (1.0 + xi * xi).sqrt();
            let fidelity = 0.25 * (3.0 + xi);
            let k4_simulated = seqstats::k4(&dephased_scenario(phi, xi)?)?;
            let fidelity_simulated = measurement_fidelity(&ideal, &DephasingChannel::new(BlochVector::Z, xi)?)?;
            if (k4 - k4_simulated).abs() > 1e-9 || (fidelity - fidelity_simulated).abs() > 1e-9 {
                return Err(Error::Inconsistent(format!(
                    "φ = {phi}: closed form ({k4}, {fidelity}) vs simulation ({k4_simulated}, {fidelity_simulated})"
                )));
            }
            Ok(CurvePoint {
                phi,
                k4,
                fidelity,
                k4_simulated,
                fidelity_simulated,
                bound: fidelity_lower_bound(k4.min(QUANTUM_MAX_K4))?,
            })
        })
        .collect()
}
