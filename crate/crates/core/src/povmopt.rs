//! Maximisation of `K4` over biased/unsharp two-outcome POVMs.
//!
//! The search space is the sharpnesses `(λ1, λ2, μ1, μ2)`, the biases `(γa, γb)`,
//! the four measurement directions and the input Bloch vector. A coarse grid over a
//! reduced parametrisation seeds Nelder–Mead runs over the full vector.
//!
//! Every search coordinate is unconstrained; constraints are built into the map
//! from coordinates to [`PovmParams`]:
//!
//! - sharpness `λ = lo + (hi - lo)(1 - cos u)/2`,
//! - bias magnitude bounded by `1 - max λ` so the effects stay positive,
//! - input Bloch vector projected onto the unit ball.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optim::NelderMead;
use crate::qcore::{bloch_to_density, BlochVector, DensityMatrix, PovmParams};
use crate::seqstats::{self, Scenario};
use crate::{Error, Result, QUANTUM_MAX_K4};

/// Smallest sharpness the search will produce (the family needs `λ > 0`).
const MIN_SHARPNESS: f64 = 1e-9;
/// Number of grid points that seed a simplex refinement.
const SEEDS_FROM_GRID: usize = 6;
/// Additional random starting points per run.
const RANDOM_STARTS: usize = 2;

/// `K4` of the scenario built from `params`, through the full `√E` Lüders pipeline.
pub fn k4_povm(params: &PovmParams) -> Result<f64> {
    k4_povm_with_state(params, &bloch_to_density(params.input_bloch)?)
}

fn k4_povm_with_state(params: &PovmParams, state: &DensityMatrix) -> Result<f64> {
    params.validate()?;
    let scenario = Scenario::new(state.clone(), params.alice()?, params.bob()?)?;
    seqstats::k4(&scenario)
}

/// How the input state enters the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InputMode {
    /// Bloch vector is a search variable.
    Free,
    /// Fixed to `𝕀/2`.
    MaximallyMixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizerConfig {
    /// Points per grid axis; at least 3.
    pub grid_resolution: usize,
    /// Iteration cap of each simplex refinement.
    pub refinement_iterations: usize,
    pub seed: u64,
    /// Fixes Alice's two sharpnesses to this value. The input is then fixed to
    /// `𝕀/2`: with a free input and a free bias, biased effects alone reach the
    /// classical value 2 for any sharpness, which says nothing about the cap.
    pub sharpness_cap: Option<f64>,
    /// Forces `|γa|, |γb| ≥ floor`.
    pub bias_floor: Option<f64>,
    /// Two angles per direction instead of the x–z plane.
    pub full_sphere: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 7,
            refinement_iterations: 20_000,
            seed: 0,
            sharpness_cap: None,
            bias_floor: None,
            full_sphere: false,
        }
    }
}

impl OptimizerConfig {
    pub fn input_mode(&self) -> InputMode {
        if self.sharpness_cap.is_some() {
            InputMode::MaximallyMixed
        } else {
            InputMode::Free
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_resolution < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {} is below 3",
                self.grid_resolution
            )));
        }
        if let Some(c) = self.sharpness_cap {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::InvalidArgument(format!("sharpness cap {c} outside (0, 1]")));
            }
        }
        if let Some(f) = self.bias_floor {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!("bias floor {f} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizationResult {
    #[serde(rename = "bestK4")]
    pub best_k4: f64,
    pub best_params: PovmParams,
    /// Simplex iterations summed over all refinements.
    pub iterations: usize,
    /// Whether the refinement that produced the optimum met the diameter tolerance.
    pub converged: bool,
    pub seed: u64,
}

/// Map from unconstrained search coordinates to POVM parameters.
#[derive(Debug, Clone, Copy)]
struct Layout {
    full_sphere: bool,
    input: InputMode,
    cap: Option<f64>,
    floor: f64,
}

impl Layout {
    fn from_config(config: &OptimizerConfig) -> Self {
        Self {
            full_sphere: config.full_sphere,
            input: config.input_mode(),
            cap: config.sharpness_cap,
            floor: config.bias_floor.unwrap_or(0.0),
        }
    }

    fn angles_per_direction(&self) -> usize {
        if self.full_sphere {
            2
        } else {
            1
        }
    }

    /// directions, 4 sharpness, 2 bias magnitudes, 2 bias signs (with a floor), input
    fn len(&self) -> usize {
        let signs = if self.floor > 0.0 { 2 } else { 0 };
        let input = if self.input == InputMode::Free { 3 } else { 0 };
        4 * self.angles_per_direction() + 4 + 2 + signs + input
    }

    fn direction(&self, x: &[f64], k: usize) -> BlochVector {
        if self.full_sphere {
            BlochVector::from_angles(x[2 * k], x[2 * k + 1])
        } else {
            BlochVector::in_xz_plane(x[k])
        }
    }

    fn sharpness(u: f64) -> f64 {
        MIN_SHARPNESS + (1.0 - MIN_SHARPNESS) * 0.5 * (1.0 - u.cos())
    }

    fn bias(&self, v: f64, sign: f64, max_sharpness: f64) -> Option<f64> {
        let room = 1.0 - max_sharpness;
        if self.floor > 0.0 {
            if room < self.floor {
                return None;
            }
            let mag = self.floor + (room - self.floor) * v.sin().powi(2);
            Some(if sign >= 0.0 { mag } else { -mag })
        } else {
            Some(room * v.sin())
        }
    }

    fn params(&self, x: &[f64]) -> Option<PovmParams> {
        let d = 4 * self.angles_per_direction();
        let directions = [0, 1, 2, 3].map(|k| self.direction(x, k));
        let mut lambda = [Self::sharpness(x[d]), Self::sharpness(x[d + 1])];
        if let Some(c) = self.cap {
            lambda = [c, c];
        }
        let mu = [Self::sharpness(x[d + 2]), Self::sharpness(x[d + 3])];
        let (sa, sb, rest) = if self.floor > 0.0 {
            (x[d + 6], x[d + 7], d + 8)
        } else {
            (1.0, 1.0, d + 6)
        };
        let bias_alice = self.bias(x[d + 4], sa, lambda[0].max(lambda[1]))?;
        let bias_bob = self.bias(x[d + 5], sb, mu[0].max(mu[1]))?;
        let input_bloch = match self.input {
            InputMode::Free => {
                let v = BlochVector::new(x[rest], x[rest + 1], x[rest + 2]);
                let r = v.norm();
                if r > 1.0 {
                    v.scale(1.0 / r)
                } else {
                    v
                }
            }
            InputMode::MaximallyMixed => BlochVector::ZERO,
        };
        Some(PovmParams {
            sharpness_alice: lambda,
            sharpness_bob: mu,
            bias_alice,
            bias_bob,
            directions,
            input_bloch,
        })
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.params(x)
            .and_then(|p| k4_povm(&p).ok())
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Search vector for a reduced grid point: `â1` at angle 0, three relative angles,
    /// one sharpness coordinate shared by all four measurements, one bias coordinate.
    fn grid_point(&self, angles: [f64; 3], u: f64, v: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        let d = 4 * self.angles_per_direction();
        for (k, &a) in [0.0, angles[0], angles[1], angles[2]].iter().enumerate() {
            if self.full_sphere {
                // x–z plane: polar angle a, azimuth 0
                x[2 * k] = a;
            } else {
                x[k] = a;
            }
        }
        x[d..d + 4].fill(u);
        x[d + 4] = v;
        x[d + 5] = v;
        if self.floor > 0.0 {
            x[d + 6] = 1.0;
            x[d + 7] = 1.0;
        }
        x
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Higher value first, ties to the lexicographically smaller vector.
fn rank(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| lexicographic(&a.1, &b.1))
}

/// Grid search followed by Nelder–Mead refinement. Deterministic for a given config.
pub fn maximize_k4(config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let layout = Layout::from_config(config);
    let n = config.grid_resolution;

    let angle = |k: usize| 2.0 * PI * k as f64 / n as f64;
    // sharpness coordinate from u = 0 (λ ≈ 0) to u = π (λ = 1)
    let level = |k: usize| PI * k as f64 / (n - 1) as f64;
    let bias = |k: usize| -0.5 * PI + PI * k as f64 / (n - 1) as f64;

    let mut grid: Vec<(f64, Vec<f64>)> = (0..n.pow(5))
        .into_par_iter()
        .map(|idx| {
            let digit = |p: u32| (idx / n.pow(p)) % n;
            let x = layout.grid_point([angle(digit(4)), angle(digit(3)), angle(digit(2))], level(digit(1)), bias(digit(0)));
            (layout.objective(&x), x)
        })
        .collect();
    grid.par_sort_by(rank);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts: Vec<Vec<f64>> = grid.iter().take(SEEDS_FROM_GRID).map(|(_, x)| x.clone()).collect();
    for _ in 0..RANDOM_STARTS {
        starts.push((0..layout.len()).map(|_| rng.gen_range(-PI..PI)).collect());
    }
    // small seeded jitter so that different seeds probe different simplices
    for s in starts.iter_mut() {
        for c in s.iter_mut() {
            *c += rng.gen_range(-1e-3..1e-3);
        }
    }

    let nm = NelderMead {
        max_iterations: config.refinement_iterations,
        ..NelderMead::default()
    };
    let runs: Vec<(f64, Vec<f64>, usize, bool)> = starts
        .par_iter()
        .map(|x0| {
            let f = |x: &[f64]| -layout.objective(x);
            let first = nm.minimize(f, x0, 0.3);
            // restart from the optimum to escape a collapsed simplex
            let second = nm.minimize(f, &first.x, 0.05);
            (-second.value, second.x, first.iterations + second.iterations, second.converged)
        })
        .collect();

    let iterations = runs.iter().map(|r| r.2).sum();
    let (best_k4, best_x, _, converged) = runs
        .into_iter()
        .min_by(|a, b| rank(&(a.0, a.1.clone()), &(b.0, b.1.clone())))
        .expect("at least one start");
    let best_params = layout
        .params(&best_x)
        .ok_or_else(|| Error::Inconsistent("optimum lies outside the feasible set".into()))?;
    Ok(OptimizationResult {
        best_k4,
        best_params,
        iterations,
        converged,
        seed: config.seed,
    })
}

/// True unless the result claims (near-)maximal violation with measurements that are
/// not within `√epsilon` of sharp and unbiased.
pub fn certify_projectivity(result: &OptimizationResult, epsilon: f64) -> bool {
    if result.best_k4 < QUANTUM_MAX_K4 - epsilon {
        return true;
    }
    let p = &result.best_params;
    let tol = epsilon.sqrt();
    p.sharpness_alice.iter().chain(&p.sharpness_bob).all(|&l| (1.0 - l).abs() <= tol)
        && p.bias_alice.abs() <= tol
        && p.bias_bob.abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn ideal() -> [BlochVector; 4] {
        [
            BlochVector::Z,
            BlochVector::X,
            BlochVector::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2),
            BlochVector::new(FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2),
        ]
    }

    #[test]
    fn k4_povm_examples() {
        let p = PovmParams::projective(ideal(), BlochVector::new(0.3, -0.1, 0.5));
        assert!((k4_povm(&p).unwrap() - 2.0 * SQRT_2).abs() < 1e-12);

        let mut p = PovmParams::projective(ideal(), BlochVector::ZERO);
        p.sharpness_alice = [0.5, 0.5];
        assert!((k4_povm(&p).unwrap() - SQRT_2).abs() < 1e-12);

        let p = PovmParams::projective([BlochVector::Z; 4], BlochVector::new(0.2, 0.2, 0.2));
        assert!((k4_povm(&p).unwrap() - 2.0).abs() < 1e-12);

        let mut p = PovmParams::projective(ideal(), BlochVector::ZERO);
        p.sharpness_alice = [0.5, 0.5];
        p.bias_alice = 0.6;
        assert!(matches!(k4_povm(&p), Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn monotone_in_sharpness_at_ideal_directions() {
        let grid: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
        for slot in 0..4 {
            let mut last = f64::NEG_INFINITY;
            for &l in &grid {
                let mut p = PovmParams::projective(ideal(), BlochVector::ZERO);
                match slot {
                    0 | 1 => p.sharpness_alice[slot] = l,
                    _ => p.sharpness_bob[slot - 2] = l,
                }
                let k = k4_povm(&p).unwrap();
                assert!(k >= last - 1e-12);
                last = k;
            }
        }
    }

    #[test]
    fn grid_resolution_below_three_is_rejected() {
        let c = OptimizerConfig {
            grid_resolution: 2,
            ..OptimizerConfig::default()
        };
        assert!(matches!(maximize_k4(&c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unconstrained_optimum_is_sharp_and_unbiased() {
        let r = maximize_k4(&OptimizerConfig::default()).unwrap();
        assert!((r.best_k4 - 2.0 * SQRT_2).abs() < 1e-6, "{}", r.best_k4);
        assert!(r.best_k4 <= 2.0 * SQRT_2 + 1e-7);
        assert!(certify_projectivity(&r, 1e-6));
        let p = &r.best_params;
        assert!(p.sharpness_alice.iter().chain(&p.sharpness_bob).all(|l| (1.0 - l).abs() < 1e-4));
        assert!(p.bias_alice.abs() < 1e-4 && p.bias_bob.abs() < 1e-4);
        // deterministic
        assert_eq!(r, maximize_k4(&OptimizerConfig::default()).unwrap());
    }

    #[test]
    fn capped_sharpness_optimum() {
        let c = OptimizerConfig {
            sharpness_cap: Some(0.5),
            ..OptimizerConfig::default()
        };
        let r = maximize_k4(&c).unwrap();
        assert!((r.best_k4 - SQRT_2).abs() < 1e-6, "{}", r.best_k4);
        assert!(certify_projectivity(&r, 1e-6));
    }

    #[test]
    fn free_input_and_bias_defeat_a_sharpness_cap() {
        // λ = 0.5, γa = 0.5, Bob σz-projective, input |0>: deterministic-looking statistics
        let p = PovmParams {
            sharpness_alice: [0.5, 0.5],
            sharpness_bob: [1.0, 1.0],
            bias_alice: 0.5,
            bias_bob: 0.0,
            directions: [BlochVector::Z; 4],
            input_bloch: BlochVector::Z,
        };
        assert!(k4_povm(&p).unwrap() > SQRT_2 + 0.5);
    }

    #[test]
    fn contradiction_detector() {
        let mut p = PovmParams::projective(ideal(), BlochVector::ZERO);
        p.sharpness_alice[0] = 0.9;
        let fake = OptimizationResult {
            best_k4: 2.0 * SQRT_2,
            best_params: p,
            iterations: 0,
            converged: true,
            seed: 0,
        };
        assert!(!certify_projectivity(&fake, 1e-6));
    }

    #[test]
    fn bias_floor_keeps_biases_away_from_zero() {
        let c = OptimizerConfig {
            bias_floor: Some(0.2),
            grid_resolution: 3,
            ..OptimizerConfig::default()
        };
        let r = maximize_k4(&c).unwrap();
        assert!(r.best_params.bias_alice.abs() >= 0.2 - 1e-12);
        assert!(r.best_params.bias_bob.abs() >= 0.2 - 1e-12);
        assert!(r.best_k4 < 2.0 * SQRT_2 - 1e-3);
        assert!(certify_projectivity(&r, 1e-6));
    }

    #[test]
    fn full_sphere_mode_reaches_the_same_optimum() {
        let c = OptimizerConfig {
            full_sphere: true,
            grid_resolution: 5,
            ..OptimizerConfig::default()
        };
        let r = maximize_k4(&c).unwrap();
        assert!((r.best_k4 - 2.0 * SQRT_2).abs() < 1e-6, "{}", r.best_k4);
    }
}
