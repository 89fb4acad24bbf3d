use std::time::Instant;

use itertools::Itertools;

use super::{finish, Method, SelectionResult};
use crate::error::{Error, Result};
use crate::infomat::{objective_value, ProblemInstance};

pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 5_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Maximizer of `f` over all `kappa`-subsets; the lexicographically
/// smallest subset wins ties.
pub fn exhaustive_optimal(problem: &ProblemInstance, kappa: usize, cap: u128) -> Result<SelectionResult> {
    let k = kappa.min(problem.len());
    let needed = binomial(problem.len(), k);
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let start = Instant::now();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for combo in (0..problem.len()).combinations(k) {
        let f = objective_value(problem, &combo)?;
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, combo));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let selected = best.map(|(_, c)| c).unwrap_or_default();
    finish(problem, Method::Optimal, kappa, None, selected, elapsed)
}
