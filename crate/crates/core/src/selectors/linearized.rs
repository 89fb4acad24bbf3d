use std::time::Instant;

use super::{finish, Method, SelectionResult};
use crate::analysis::leverage_scores;
use crate::error::Result;
use crate::infomat::ProblemInstance;

/// Top-`kappa` features by leverage score `tr(Omega_0^{-2} Delta_l)`, the
/// exact maximizer of the first-order surrogate.
pub fn linearized_select(problem: &ProblemInstance, kappa: usize) -> Result<SelectionResult> {
    let start = Instant::now();
    let scores = leverage_scores(problem)?;
    let mut order: Vec<usize> = (0..problem.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(kappa.min(problem.len()));
    let elapsed = start.elapsed().as_secs_f64();
    finish(problem, Method::Linearized, kappa, None, order, elapsed)
}
