//! Deterministic (predictable, factorised) strategies and the classical bound.
//!
//! A strategy fixes Alice's answer to each of her settings and Bob's answer to
//! each of his. Mixtures are convex combinations of these 16 vertices, so the
//! deterministic maximum is the classical maximum.

use crate::seqstats::{k4_from_correlators, StatisticsTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeterministicStrategy {
    /// Outcomes returned for `A1`, `A2`.
    pub alice_outputs: [u8; 2],
    /// Outcomes returned for `B1`, `B2`.
    pub bob_outputs: [u8; 2],
}

impl DeterministicStrategy {
    pub fn new(alice_outputs: [u8; 2], bob_outputs: [u8; 2]) -> Self {
        assert!(
            alice_outputs.iter().chain(&bob_outputs).all(|&o| o <= 1),
            "outputs must be bits"
        );
        Self { alice_outputs, bob_outputs }
    }

    /// All 16 strategies, in binary order of `(a1, a2, b1, b2)`.
    pub fn all() -> impl Iterator<Item = Self> {
        (0u8..16).map(|k| Self::new([(k >> 3) & 1, (k >> 2) & 1], [(k >> 1) & 1, k & 1]))
    }

    pub fn correlators(&self) -> [[f64; 2]; 2] {
        let mut c = [[0.0; 2]; 2];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, cij) in row.iter_mut().enumerate() {
                *cij = if self.alice_outputs[i] == self.bob_outputs[j] { 1.0 } else { -1.0 };
            }
        }
        c
    }

    /// The strategy's statistics, including Bob's (unchanged) marginals without Alice.
    pub fn statistics(&self) -> StatisticsTable {
        let mut joint = [[[[0.0; 2]; 2]; 2]; 2];
        let mut marginals = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                joint[i][j][self.alice_outputs[i] as usize][self.bob_outputs[j] as usize] = 1.0;
            }
        }
        for (j, m) in marginals.iter_mut().enumerate() {
            m[self.bob_outputs[j] as usize] = 1.0;
        }
        StatisticsTable {
            joint,
            marginals_no_alice: Some(marginals),
        }
    }
}

pub fn strategy_k4(s: &DeterministicStrategy) -> f64 {
    k4_from_correlators(&s.correlators())
}

/// Maximum of `K4` over all deterministic strategies.
pub fn classical_maximum() -> f64 {
    DeterministicStrategy::all().map(|s| strategy_k4(&s)).fold(f64::NEG_INFINITY, f64::max)
}

pub fn classical_minimum() -> f64 {
    DeterministicStrategy::all().map(|s| strategy_k4(&s)).fold(f64::INFINITY, f64::min)
}

/// `K4` of a convex mixture of strategies; weights need not be normalised.
pub fn mixture_k4(mixture: &[(f64, DeterministicStrategy)]) -> f64 {
    let total: f64 = mixture.iter().map(|(w, _)| w).sum();
    mixture.iter().map(|(w, s)| w * strategy_k4(s)).sum::<f64>() / total
}
