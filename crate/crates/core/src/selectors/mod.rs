//! Cardinality-constrained selectors over a [`ProblemInstance`].
//!
//! Every selector reports the true objective of its chosen set and the
//! per-step marginal gains in selection order, so results from different
//! methods are comparable in objective space. Ties between candidates are
//! always resolved towards the smallest ground-set index.

mod baseline;
mod exhaustive;
mod greedy;
mod linearized;
mod randomized;

pub use baseline::{baseline_select, BaselineKind};
pub use exhaustive::{binomial, exhaustive_optimal, DEFAULT_EXHAUSTIVE_CAP};
pub use greedy::{fast_lowrank_greedy, simple_greedy};
pub use linearized::linearized_select;
pub use randomized::{randomized_greedy, sample_size, validate_epsilon};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::infomat::ProblemInstance;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Simple,
    Lowrank,
    Randomized,
    Linearized,
    Random,
    Grid,
    Quality,
    Optimal,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Simple,
        Method::Lowrank,
        Method::Randomized,
        Method::Linearized,
        Method::Random,
        Method::Grid,
        Method::Quality,
        Method::Optimal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Simple => "simple",
            Method::Lowrank => "lowrank",
            Method::Randomized => "randomized",
            Method::Linearized => "linearized",
            Method::Random => "random",
            Method::Grid => "grid",
            Method::Quality => "quality",
            Method::Optimal => "optimal",
        }
    }

    /// Whether the output depends on the seed.
    pub fn is_seeded(self) -> bool {
        matches!(self, Method::Randomized | Method::Random)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown method '{s}'")))
    }
}

/// Selected ground-set indices in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSet(pub Vec<usize>);

impl FeatureSet {
    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub kappa: usize,
    pub seed: Option<u64>,
    pub selected: FeatureSet,
    pub gains: Vec<f64>,
    pub objective: f64,
    pub elapsed_s: f64,
}

impl SelectionResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Same result with the timing field zeroed, for determinism checks.
    pub fn without_timing(&self) -> Self {
        Self { elapsed_s: 0.0, ..self.clone() }
    }
}

/// Knobs for [`run_method`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub epsilon: f64,
    pub seed: u64,
    pub exhaustive_cap: u128,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { epsilon: 0.5, seed: 0, exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP }
    }
}

pub fn run_method(problem: &ProblemInstance, method: Method, kappa: usize, opts: &RunOptions) -> Result<SelectionResult> {
    match method {
        Method::Simple => simple_greedy(problem, kappa),
        Method::Lowrank => fast_lowrank_greedy(problem, kappa),
        Method::Randomized => randomized_greedy(problem, kappa, opts.epsilon, opts.seed),
        Method::Linearized => linearized_select(problem, kappa),
        Method::Random => baseline_select(problem, kappa, BaselineKind::Random, opts.seed),
        Method::Grid => baseline_select(problem, kappa, BaselineKind::Grid, opts.seed),
        Method::Quality => baseline_select(problem, kappa, BaselineKind::Quality, opts.seed),
        Method::Optimal => exhaustive_optimal(problem, kappa, opts.exhaustive_cap),
    }
}

/// Candidate during an argmax scan.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub idx: usize,
    pub gain: f64,
}

impl Candidate {
    pub fn new(idx: usize, gain: f64) -> Self {
        let gain = if gain.is_nan() { f64::NEG_INFINITY } else { gain };
        Self { idx, gain }
    }
}

/// Larger gain wins; equal gains go to the smaller index. Associative and
/// commutative, so parallel reductions agree with a sequential scan.
pub(crate) fn better(a: Candidate, b: Candidate) -> Candidate {
    if a.gain > b.gain || (a.gain == b.gain && a.idx < b.idx) {
        a
    } else {
        b
    }
}

/// Marginal gains of `ids` added one at a time, and the final objective.
pub(crate) fn gains_in_order(problem: &ProblemInstance, ids: &[usize]) -> Result<(Vec<f64>, f64)> {
    problem.check_ids(ids)?;
    let base = problem.base_trace_inverse();
    let mut m = problem.omega0.matrix.clone();
    let mut prev = 0.0;
    let mut gains = Vec::with_capacity(ids.len());
    for &i in ids {
        m += &problem.increments[i].delta;
        let f = base - linalg::trace_inverse(&m)?;
        gains.push(f - prev);
        prev = f;
    }
    Ok((gains, prev))
}

pub(crate) fn finish(
    problem: &ProblemInstance,
    method: Method,
    kappa: usize,
    seed: Option<u64>,
    selected: Vec<usize>,
    elapsed_s: f64,
) -> Result<SelectionResult> {
    let (gains, objective) = gains_in_order(problem, &selected)?;
    Ok(SelectionResult { method, kappa, seed, selected: FeatureSet(selected), gains, objective, elapsed_s })
}
