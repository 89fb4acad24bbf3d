//! Random and hand-built problem instances for tests and benchmarks.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::infomat::{BuildOptions, ProblemInstance};
use crate::rng::SplitMix64;
use crate::scenario::{generate_scenario, ScenarioConfig};

#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub dim: usize,
    pub features: usize,
    /// Each increment has rank drawn uniformly from `1..=max_rank`.
    pub max_rank: usize,
}

fn gaussian(rng: &mut SplitMix64, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// Random PD matrix `M M^T / n + s I` with `s` drawn from `[0.05, 1]`.
pub fn random_pd(rng: &mut SplitMix64, n: usize) -> DMatrix<f64> {
    let m = gaussian(rng, n, n);
    let shift = rng.uniform(0.05, 1.0);
    let mut a = &m * m.transpose() / n as f64 + DMatrix::identity(n, n) * shift;
    crate::linalg::symmetrize(&mut a);
    a
}

/// Random factor `G` (rank x n) with a per-feature scale from `[0.2, 1.5]`.
pub fn random_factor(rng: &mut SplitMix64, n: usize, max_rank: usize) -> DMatrix<f64> {
    let rank = 1 + rng.below(max_rank.max(1) as u64) as usize;
    let scale = rng.uniform(0.2, 1.5) / (n as f64).sqrt();
    gaussian(rng, rank, n) * scale
}

/// Random PD base information and `features` random low-rank PSD increments.
pub fn random_instance(seed: u64, spec: RandomSpec) -> Result<ProblemInstance> {
    let mut rng = SplitMix64::new(seed);
    let omega0 = random_pd(&mut rng, spec.dim);
    let factors = (0..spec.features)
        .map(|_| random_factor(&mut rng, spec.dim, spec.max_rank))
        .collect();
    ProblemInstance::from_factors(omega0, factors)
}

/// `Omega_0 = I` with each increment on its own coordinate axis, weights
/// `1, 2, ...`. The objective is modular on this instance.
pub fn modular_instance(features: usize) -> Result<ProblemInstance> {
    let deltas = (0..features)
        .map(|i| {
            let mut d = DMatrix::zeros(features, features);
            d[(i, i)] = 1.0 + i as f64;
            d
        })
        .collect();
    ProblemInstance::from_dense(DMatrix::identity(features, features), deltas)
}

/// Forward-driving scenario with `landmarks` candidates over `horizon` frames.
pub fn vin_instance(seed: u64, landmarks: usize, horizon: usize) -> Result<ProblemInstance> {
    let cfg = ScenarioConfig { num_landmarks: landmarks, horizon, ..Default::default() };
    let scenario = generate_scenario(seed, &cfg)?;
    ProblemInstance::build(&scenario, &BuildOptions::default())
}
