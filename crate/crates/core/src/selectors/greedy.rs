use std::time::Instant;

use rayon::prelude::*;

use super::{better, finish, Candidate, Method, SelectionResult};
use crate::error::Result;
use crate::infomat::{apply_smw_update, marginal_gain_smw, ProblemInstance};
use crate::linalg;

/// Plain greedy: every step re-evaluates `f(S + l)` for each remaining
/// candidate with a fresh Cholesky factorization.
pub fn simple_greedy(problem: &ProblemInstance, kappa: usize) -> Result<SelectionResult> {
    let start = Instant::now();
    let k = kappa.min(problem.len());
    let base = problem.base_trace_inverse();
    let mut omega = problem.omega0.matrix.clone();
    let mut remaining: Vec<usize> = (0..problem.len()).collect();
    let mut selected = Vec::with_capacity(k);
    let mut f_s = 0.0;
    for _ in 0..k {
        let best = remaining
            .par_iter()
            .map(|&l| {
                let trace = linalg::trace_inverse(&(&omega + &problem.increments[l].delta))?;
                Ok::<_, crate::Error>(Candidate::new(l, base - trace - f_s))
            })
            .try_reduce_with(|a, b| Ok(better(a, b)))
            .expect("remaining candidates")?;
        omega += &problem.increments[best.idx].delta;
        f_s += best.gain;
        selected.push(best.idx);
        remaining.retain(|&l| l != best.idx);
    }
    let elapsed = start.elapsed().as_secs_f64();
    finish(problem, Method::Simple, kappa, None, selected, elapsed)
}

/// Greedy on the maintained inverse `Omega_S^{-1}` with low-rank gains and
/// Woodbury updates.
pub fn fast_lowrank_greedy(problem: &ProblemInstance, kappa: usize) -> Result<SelectionResult> {
    let start = Instant::now();
    let k = kappa.min(problem.len());
    let mut omega_inv = linalg::spd_inverse(&problem.omega0.matrix)?;
    let mut remaining: Vec<usize> = (0..problem.len()).collect();
    let mut selected = Vec::with_capacity(k);
    for _ in 0..k {
        let best = remaining
            .par_iter()
            .map(|&l| Candidate::new(l, marginal_gain_smw(&omega_inv, &problem.increments[l].g)))
            .reduce_with(better)
            .expect("remaining candidates");
        omega_inv = apply_smw_update(&omega_inv, &problem.increments[best.idx].g)?;
        selected.push(best.idx);
        remaining.retain(|&l| l != best.idx);
    }
    let elapsed = start.elapsed().as_secs_f64();
    finish(problem, Method::Lowrank, kappa, None, selected, elapsed)
}
