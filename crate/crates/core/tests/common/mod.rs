#![allow(dead_code)]

use infoselect::rng::SplitMix64;
use infoselect::synthetic::{random_instance, RandomSpec};
use infoselect::ProblemInstance;
use nalgebra::DMatrix;

/// `tr(M^{-1})` by LU inversion, independent of the Cholesky path.
pub fn trace_inv_lu(m: &DMatrix<f64>) -> f64 {
    m.clone().try_inverse().expect("invertible").trace()
}

/// `f(S)` from dense matrices only.
pub fn f_oracle(p: &ProblemInstance, ids: &[usize]) -> f64 {
    let mut m = p.omega0.matrix.clone();
    for &i in ids {
        m += &p.increments[i].delta;
    }
    trace_inv_lu(&p.omega0.matrix) - trace_inv_lu(&m)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Random instance whose size is drawn from the given ranges.
pub fn random_sized(seed: u64, dims: (usize, usize), features: (usize, usize), max_rank: usize) -> ProblemInstance {
    let mut rng = SplitMix64::derive(seed, &[0xD15C]);
    let dim = dims.0 + rng.below((dims.1 - dims.0 + 1) as u64) as usize;
    let n = features.0 + rng.below((features.1 - features.0 + 1) as u64) as usize;
    random_instance(seed, RandomSpec { dim, features: n, max_rank }).unwrap()
}

pub fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..1usize << n).map(move |m| (0..n).filter(|i| m >> i & 1 == 1).collect())
}

/// Best `f` over all `k`-subsets by plain recursion.
pub fn brute_force_best(p: &ProblemInstance, k: usize) -> f64 {
    fn rec(p: &ProblemInstance, start: usize, k: usize, cur: &mut Vec<usize>, best: &mut f64) {
        if cur.len() == k {
            *best = best.max(f_oracle(p, cur));
            return;
        }
        for i in start..p.len() {
            cur.push(i);
            rec(p, i + 1, k, cur, best);
            cur.pop();
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(p, 0, k.min(p.len()), &mut Vec::new(), &mut best);
    best
}

pub fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

/// The three-feature disjoint-diagonal instance with traces 1, 2, 3.
pub fn disjoint_diagonal() -> ProblemInstance {
    ProblemInstance::from_dense(
        DMatrix::identity(3, 3),
        vec![diag(&[1.0, 0.0, 0.0]), diag(&[0.0, 2.0, 0.0]), diag(&[0.0, 0.0, 3.0])],
    )
    .unwrap()
}
