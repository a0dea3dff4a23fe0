//! Two-time sequential statistics.
//!
//! Alice measures `A_i` on the input state, Bob measures `B_j` on Alice's
//! post-measurement state. Settings are labelled `i, j ∈ {1, 2}` and outcomes
//! `a, b ∈ {0, 1}`, matching the usual notation.

use serde::{Deserialize, Serialize};

use crate::qcore::{update_with_root, BinaryMeasurement, DensityMatrix};
use crate::{Error, Result, QUANTUM_MAX_K4};

/// Default tolerance for the "NSIT satisfied" and "maximal violation" verdicts.
pub const DEFAULT_VERDICT_TOLERANCE: f64 = 1e-7;

/// Input state plus Alice's and Bob's two binary measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    state: DensityMatrix,
    alice: [BinaryMeasurement; 2],
    bob: [BinaryMeasurement; 2],
}

impl Scenario {
    pub fn new(state: DensityMatrix, alice: [BinaryMeasurement; 2], bob: [BinaryMeasurement; 2]) -> Result<Self> {
        let d = state.dim();
        if alice.iter().chain(&bob).any(|m| m.dim() != d) {
            return Err(Error::Scenario(format!(
                "measurement dimensions {:?} do not all match state dimension {d}",
                alice.iter().chain(&bob).map(BinaryMeasurement::dim).collect::<Vec<_>>()
            )));
        }
        Ok(Self { state, alice, bob })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn alice(&self) -> &[BinaryMeasurement; 2] {
        &self.alice
    }

    pub fn bob(&self) -> &[BinaryMeasurement; 2] {
        &self.bob
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    /// The scenario with a different input state.
    pub fn with_state(&self, state: DensityMatrix) -> Result<Self> {
        Self::new(state, self.alice.clone(), self.bob.clone())
    }
}

fn setting(i: usize) -> Result<usize> {
    match i {
        1 | 2 => Ok(i - 1),
        _ => Err(Error::InvalidArgument(format!("setting index {i} is not 1 or 2"))),
    }
}

fn outcome(a: usize) -> Result<usize> {
    match a {
        0 | 1 => Ok(a),
        _ => Err(Error::InvalidArgument(format!("outcome {a} is not 0 or 1"))),
    }
}

/// `P(a, b | A_i, B_j) = Tr[E_a ρ] · Tr[E_b ρ_post]`, where `ρ_post` is the Lüders
/// post-measurement state. Branches with `Tr[E_a ρ] < 1e-14` contribute 0.
pub fn joint_probability(scenario: &Scenario, i: usize, j: usize, a: usize, b: usize) -> Result<f64> {
    let (i, j, a, b) = (setting(i)?, setting(j)?, outcome(a)?, outcome(b)?);
    joint_raw(scenario, i, j, a, b)
}

fn joint_raw(scenario: &Scenario, i: usize, j: usize, a: usize, b: usize) -> Result<f64> {
    let alice = &scenario.alice[i];
    match update_with_root(&scenario.state, alice.effect(a), alice.sqrt_effect(a)) {
        Ok((p, post)) => Ok(p * post.expectation(scenario.bob[j].effect(b))),
        Err(Error::ZeroProbabilityBranch(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// `C_ij = Σ_{a,b} (-1)^{a⊕b} P(a, b | A_i, B_j)`.
pub fn correlator(scenario: &Scenario, i: usize, j: usize) -> Result<f64> {
    let (i, j) = (setting(i)?, setting(j)?);
    let mut c = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let sign = if a == b { 1.0 } else { -1.0 };
            c += sign * joint_raw(scenario, i, j, a, b)?;
        }
    }
    Ok(c)
}

/// `K4 = C11 + C21 + C22 - C12`.
pub fn k4(scenario: &Scenario) -> Result<f64> {
    Ok(k4_from_correlators(&[
        [correlator(scenario, 1, 1)?, correlator(scenario, 1, 2)?],
        [correlator(scenario, 2, 1)?, correlator(scenario, 2, 2)?],
    ]))
}

/// `K4` from correlators indexed `c[i-1][j-1]`.
pub fn k4_from_correlators(c: &[[f64; 2]; 2]) -> f64 {
    c[0][0] + c[1][0] + c[1][1] - c[0][1]
}

/// Bob's outcome distribution when Alice does not measure.
pub fn bob_marginals_without_alice(scenario: &Scenario) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    for (j, bob) in scenario.bob.iter().enumerate() {
        for (b, p) in m[j].iter_mut().enumerate() {
            *p = scenario.state.expectation(bob.effect(b));
        }
    }
    m
}

/// `max_{j,b,i} |P(b|B_j) - Σ_a P(a, b | A_i, B_j)|`.
pub fn nsit_deviation(scenario: &Scenario) -> Result<f64> {
    Ok(statistics(scenario)?.nsit_deviation())
}

/// `max_{i,j,a,b} min(P, 1 - P)`; zero iff every joint probability is 0 or 1.
pub fn predictability_deviation(scenario: &Scenario) -> Result<f64> {
    Ok(statistics(scenario)?.predictability_deviation())
}

/// The full table of joint probabilities and no-Alice marginals of a scenario.
pub fn statistics(scenario: &Scenario) -> Result<StatisticsTable> {
    let mut joint = [[[[0.0; 2]; 2]; 2]; 2];
    for (i, ji) in joint.iter_mut().enumerate() {
        for (j, jj) in ji.iter_mut().enumerate() {
            for (a, ja) in jj.iter_mut().enumerate() {
                for (b, p) in ja.iter_mut().enumerate() {
                    *p = joint_raw(scenario, i, j, a, b)?;
                }
            }
        }
    }
    Ok(StatisticsTable {
        joint,
        marginals_no_alice: Some(bob_marginals_without_alice(scenario)),
    })
}

/// Aggregates joint probabilities, correlators, `K4` and both diagnostics.
pub fn full_report(scenario: &Scenario) -> Result<CorrelationReport> {
    Ok(statistics(scenario)?.report())
}

/// Observed (or simulated) two-time statistics.
///
/// `joint[i][j][a][b]` holds `P(a, b | A_{i+1}, B_{j+1})`; `marginals_no_alice[j][b]`
/// holds `P(b | B_{j+1})` measured without a prior Alice measurement, when available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatisticsTable {
    pub joint: [[[[f64; 2]; 2]; 2]; 2],
    pub marginals_no_alice: Option<[[f64; 2]; 2]>,
}

impl StatisticsTable {
    /// Largest `|Σ_{a,b} P(a,b|A_i,B_j) - 1|` over the four setting pairs.
    pub fn normalization_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ji in &self.joint {
            for jj in ji {
                let s: f64 = jj.iter().flatten().sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        if let Some(m) = &self.marginals_no_alice {
            for row in m {
                worst = worst.max((row[0] + row[1] - 1.0).abs());
            }
        }
        worst
    }

    pub fn correlators(&self) -> [[f64; 2]; 2] {
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let p = &self.joint[i][j];
                c[i][j] = p[0][0] + p[1][1] - p[0][1] - p[1][0];
            }
        }
        c
    }

    pub fn k4(&self) -> f64 {
        k4_from_correlators(&self.correlators())
    }

    /// Bob's marginal `Σ_a P(a, b | A_i, B_j)` after Alice measured `A_{i+1}`.
    pub fn bob_marginal_after(&self, i: usize, j: usize, b: usize) -> f64 {
        self.joint[i][j][0][b] + self.joint[i][j][1][b]
    }

    /// NSIT deviation. With no-Alice marginals this is the max-norm distance of
    /// Bob's marginals to them. Without them, only consistency between the two
    /// Alice settings is observable and the largest spread
    /// `|Σ_a P(a,b|A_1,B_j) - Σ_a P(a,b|A_2,B_j)|` is reported.
    pub fn nsit_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..2 {
            for b in 0..2 {
                match &self.marginals_no_alice {
                    Some(m) => {
                        for i in 0..2 {
                            worst = worst.max((m[j][b] - self.bob_marginal_after(i, j, b)).abs());
                        }
                    }
                    None => {
                        let spread = self.bob_marginal_after(0, j, b) - self.bob_marginal_after(1, j, b);
                        worst = worst.max(spread.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn predictability_deviation(&self) -> f64 {
        self.joint
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .map(|&p| p.min(1.0 - p).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn report(&self) -> CorrelationReport {
        let correlators = self.correlators();
        CorrelationReport {
            joint_probabilities: self.joint,
            correlators,
            k4: k4_from_correlators(&correlators),
            nsit_deviation: self.nsit_deviation(),
            predictability_deviation: self.predictability_deviation(),
        }
    }
}

/// Everything the protocol observes about a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorrelationReport {
    /// `[i][j][a][b]`, settings zero-based.
    pub joint_probabilities: [[[[f64; 2]; 2]; 2]; 2],
    /// `[i][j]`, settings zero-based.
    pub correlators: [[f64; 2]; 2],
    pub k4: f64,
    pub nsit_deviation: f64,
    pub predictability_deviation: f64,
}

impl CorrelationReport {
    pub fn nsit_holds(&self, tol: f64) -> bool {
        self.nsit_deviation <= tol
    }

    pub fn is_maximal_violation(&self, tol: f64) -> bool {
        self.k4 >= QUANTUM_MAX_K4 - tol
    }

    pub fn is_predictable(&self, tol: f64) -> bool {
        self.predictability_deviation <= tol
    }
}
