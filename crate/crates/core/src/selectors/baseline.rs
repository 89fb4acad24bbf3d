use std::collections::BTreeMap;
use std::time::Instant;

use super::{finish, Method, SelectionResult};
use crate::error::Result;
use crate::infomat::ProblemInstance;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Uniform seeded subset.
    Random,
    /// Round-robin over first-frame image cells.
    Grid,
    /// Highest quality score first.
    Quality,
}

fn by_quality(problem: &ProblemInstance, ids: &mut [usize]) {
    ids.sort_by(|&a, &b| {
        problem.meta[b]
            .quality
            .total_cmp(&problem.meta[a].quality)
            .then(a.cmp(&b))
    });
}

fn grid_pick(problem: &ProblemInstance, k: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut unplaced = Vec::new();
    for (i, m) in problem.meta.iter().enumerate() {
        match m.grid_cell {
            Some(c) => cells.entry(c).or_default().push(i),
            None => unplaced.push(i),
        }
    }
    for ids in cells.values_mut() {
        by_quality(problem, ids);
    }
    let mut picked = Vec::with_capacity(k);
    let mut depth = 0;
    while picked.len() < k {
        let mut any = false;
        for ids in cells.values() {
            if let Some(&i) = ids.get(depth) {
                any = true;
                if picked.len() < k {
                    picked.push(i);
                }
            }
        }
        if !any {
            break;
        }
        depth += 1;
    }
    if picked.len() < k {
        picked.extend(rng.sample(&unplaced, k - picked.len()));
    }
    picked
}

pub fn baseline_select(problem: &ProblemInstance, kappa: usize, kind: BaselineKind, seed: u64) -> Result<SelectionResult> {
    let start = Instant::now();
    let k = kappa.min(problem.len());
    let mut rng = SplitMix64::new(seed);
    let all: Vec<usize> = (0..problem.len()).collect();
    let (method, picked) = match kind {
        BaselineKind::Random => (Method::Random, rng.sample(&all, k)),
        BaselineKind::Quality => {
            let mut ids = all;
            by_quality(problem, &mut ids);
            ids.truncate(k);
            (Method::Quality, ids)
        }
        BaselineKind::Grid => (Method::Grid, grid_pick(problem, k, &mut rng)),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let seed = matches!(kind, BaselineKind::Random | BaselineKind::Grid).then_some(seed);
    finish(problem, method, kappa, seed, picked, elapsed)
}
