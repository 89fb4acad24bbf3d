use std::time::Instant;

use super::{better, finish, Candidate, Method, SelectionResult};
use crate::error::{Error, Result};
use crate::infomat::ProblemInstance;
use crate::linalg;
use crate::rng::SplitMix64;

/// Accepts `epsilon` in `[e^{-kappa}, 1]`, allowing one part in 1e12 of
/// rounding at the lower end.
pub fn validate_epsilon(epsilon: f64, kappa: usize) -> Result<()> {
    let lower = (-(kappa as f64)).exp();
    if !(epsilon.is_finite() && epsilon <= 1.0 && epsilon >= lower * (1.0 - 1e-12)) {
        return Err(Error::EpsilonOutOfRange { epsilon, kappa });
    }
    Ok(())
}

/// `ceil((N / kappa) ln(1 / epsilon))` clamped to `[1, pool]`.
pub fn sample_size(n: usize, kappa: usize, epsilon: f64, pool: usize) -> usize {
    let raw = (n as f64 / kappa as f64) * (1.0 / epsilon).ln();
    let r = raw.ceil().max(1.0);
    let r = if r.is_finite() { r as usize } else { usize::MAX };
    r.min(pool).max(1)
}

/// Greedy over a uniformly sampled candidate subset at every step.
pub fn randomized_greedy(problem: &ProblemInstance, kappa: usize, epsilon: f64, seed: u64) -> Result<SelectionResult> {
    if kappa == 0 {
        return finish(problem, Method::Randomized, 0, Some(seed), Vec::new(), 0.0);
    }
    validate_epsilon(epsilon, kappa)?;
    let start = Instant::now();
    let n = problem.len();
    let k = kappa.min(n);
    let base = problem.base_trace_inverse();
    let mut rng = SplitMix64::new(seed);
    let mut omega = problem.omega0.matrix.clone();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut selected = Vec::with_capacity(k);
    let mut f_s = 0.0;
    for _ in 0..k {
        let r = sample_size(n, kappa, epsilon, remaining.len());
        let pool = rng.sample(&remaining, r);
        let mut best: Option<Candidate> = None;
        for l in pool {
            let trace = linalg::trace_inverse(&(&omega + &problem.increments[l].delta))?;
            let c = Candidate::new(l, base - trace - f_s);
            best = Some(best.map_or(c, |b| better(b, c)));
        }
        let best = best.expect("sample is nonempty");
        omega += &problem.increments[best.idx].delta;
        f_s += best.gain;
        selected.push(best.idx);
        remaining.retain(|&l| l != best.idx);
    }
    let elapsed = start.elapsed().as_secs_f64();
    finish(problem, Method::Randomized, kappa, Some(seed), selected, elapsed)
}
