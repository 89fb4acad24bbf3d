//! Curvature, submodularity ratio, spectral bounds and approximation
//! factors for the trace-inverse objective.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::infomat::ProblemInstance;
use crate::linalg;
use crate::selectors::sample_size;

/// Ground sets at or below this size are enumerated exhaustively by default.
pub const DEFAULT_EXHAUSTIVE_MAX: usize = 8;

/// Gains at or below this value are treated as zero denominators.
pub const ZERO_GAIN: f64 = 1e-12;

/// `f` tabulated over every subset of a small ground set, indexed by bitmask.
#[derive(Debug, Clone)]
pub struct ExhaustiveTable {
    n: usize,
    values: Vec<f64>,
}

impl ExhaustiveTable {
    pub fn new(problem: &ProblemInstance, cap: usize) -> Result<Self> {
        let n = problem.len();
        if n > cap {
            return Err(invalid(format!("exhaustive analysis refused: N = {n} exceeds cap {cap}")));
        }
        if n >= usize::BITS as usize - 1 {
            return Err(invalid("ground set too large to enumerate"));
        }
        let base = problem.base_trace_inverse();
        let values = (0..1usize << n)
            .into_par_iter()
            .map(|mask| {
                if mask == 0 {
                    return Ok(0.0);
                }
                let ids: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                Ok(base - linalg::trace_inverse(&problem.omega_of(&ids))?)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn f(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    /// `f_l(S) = f(S + l) - f(S)`.
    pub fn gain(&self, l: usize, mask: usize) -> f64 {
        self.values[mask | 1 << l] - self.values[mask]
    }

    fn full(&self) -> usize {
        (1usize << self.n) - 1
    }
}

/// Iterates all submasks of `m`, including `0` and `m` itself.
fn submasks(m: usize) -> impl Iterator<Item = usize> {
    let mut next = Some(m);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & m) };
        Some(cur)
    })
}

fn popcount(m: usize) -> usize {
    m.count_ones() as usize
}

/// Exhaustive curvature. With `kappa`, contexts are restricted to sets of
/// at most `kappa` features (`|S| <= kappa`, `|R \ S| <= kappa`).
pub fn curvature_table(table: &ExhaustiveTable, kappa: Option<usize>) -> f64 {
    let n = table.len();
    let k = kappa.unwrap_or(n);
    let full = table.full();
    let mut alpha: f64 = 0.0;
    for l in 0..n {
        let others = full & !(1 << l);
        for a in submasks(others) {
            if popcount(a) + 1 > k {
                continue;
            }
            let den = table.gain(l, a);
            if den <= ZERO_GAIN {
                continue;
            }
            for extra in submasks(others & !a) {
                if popcount(extra) > k {
                    continue;
                }
                let ratio = table.gain(l, a | extra) / den;
                alpha = alpha.max(1.0 - ratio);
            }
        }
    }
    alpha.max(0.0)
}

/// Exhaustive submodularity ratio, optionally restricted to
/// `|S|, |R \ S| <= kappa`. Returns 1 when no pair has a positive joint gain.
pub fn submodularity_ratio_table(table: &ExhaustiveTable, kappa: Option<usize>) -> f64 {
    let n = table.len();
    let k = kappa.unwrap_or(n);
    let full = table.full();
    let mut gamma = f64::INFINITY;
    for s in submasks(full) {
        if popcount(s) > k {
            continue;
        }
        for d in submasks(full & !s) {
            if d == 0 || popcount(d) > k {
                continue;
            }
            let joint = table.f(s | d) - table.f(s);
            if joint <= ZERO_GAIN {
                continue;
            }
            let singles: f64 = (0..n).filter(|l| d >> l & 1 == 1).map(|l| table.gain(l, s)).sum();
            gamma = gamma.min(singles / joint);
        }
    }
    if gamma.is_finite() {
        gamma.max(0.0)
    } else {
        1.0
    }
}

/// Largest ratio `f_l(R) / f_l(S)` over `S` strictly inside `R`, `l` outside
/// `R`. Returns 1 when there is no admissible triple.
pub fn elementwise_curvature_table(table: &ExhaustiveTable) -> f64 {
    let n = table.len();
    let full = table.full();
    let mut best = f64::NEG_INFINITY;
    for l in 0..n {
        let others = full & !(1 << l);
        for s in submasks(others) {
            let den = table.gain(l, s);
            if den <= ZERO_GAIN {
                continue;
            }
            for extra in submasks(others & !s) {
                if extra == 0 {
                    continue;
                }
                best = best.max(table.gain(l, s | extra) / den);
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        1.0
    }
}

pub fn curvature_exhaustive(problem: &ProblemInstance, cap: usize) -> Result<f64> {
    Ok(curvature_table(&ExhaustiveTable::new(problem, cap)?, None))
}

pub fn submodularity_ratio_exhaustive(problem: &ProblemInstance, cap: usize) -> Result<f64> {
    Ok(submodularity_ratio_table(&ExhaustiveTable::new(problem, cap)?, None))
}

pub fn elementwise_curvature_max(problem: &ProblemInstance, cap: usize) -> Result<f64> {
    Ok(elementwise_curvature_table(&ExhaustiveTable::new(problem, cap)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub alpha_bar: f64,
    pub gamma_lower: f64,
    pub delta_min: f64,
    pub lambda_min_base: f64,
    pub lambda_max_full: f64,
}

/// `gamma_lower = delta * lmin(Omega_0) / (lmax(Omega_U) (lmax(Omega_U) - lmin(Omega_0)))`
/// and `alpha_bar = 1 - gamma_lower`.
pub fn spectral_bounds(problem: &ProblemInstance) -> Result<SpectralBounds> {
    if problem.is_empty() {
        return Err(Error::BoundUndefined("empty ground set".into()));
    }
    let delta_min = problem.increments.iter().map(|inc| inc.trace).fold(f64::INFINITY, f64::min);
    if delta_min <= ZERO_GAIN {
        return Err(Error::BoundUndefined(format!(
            "min_l tr(Delta_l) = {delta_min:e} is not positive"
        )));
    }
    let (lambda_min_base, _) = linalg::eigen_extremes(&problem.omega0.matrix);
    let (_, lambda_max_full) = linalg::eigen_extremes(&problem.omega_all());
    let spread = lambda_max_full - lambda_min_base;
    if spread <= 0.0 {
        return Err(Error::BoundUndefined(format!(
            "lambda_max(Omega_U) = {lambda_max_full} does not exceed lambda_min(Omega_0) = {lambda_min_base}"
        )));
    }
    let gamma_lower = delta_min * lambda_min_base / (lambda_max_full * spread);
    Ok(SpectralBounds { alpha_bar: 1.0 - gamma_lower, gamma_lower, delta_min, lambda_min_base, lambda_max_full })
}

/// `(1/alpha)(1 - e^{-alpha gamma})`, with the limit `gamma` as `alpha -> 0`.
/// Both arguments are clamped to `[0, 1]` first.
pub fn greedy_factor(alpha: f64, gamma: f64) -> f64 {
    let a = alpha.clamp(0.0, 1.0);
    let g = gamma.clamp(0.0, 1.0);
    if a < 1e-12 {
        g
    } else {
        (1.0 - (-a * g).exp()) / a
    }
}

/// `1 - e^{-1/c} - epsilon^eta / c`, floored at zero.
pub fn randomized_factor_formula(c: f64, epsilon: f64, eta: f64) -> f64 {
    (1.0 - (-1.0 / c).exp() - epsilon.powf(eta) / c).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedFactor {
    pub factor: f64,
    pub c: f64,
    pub r: usize,
    pub eta: f64,
}

/// Guarantee of the randomized greedy at sample size
/// `r = ceil((N/kappa) ln(1/epsilon))` (first-iteration value, not clamped
/// to the shrinking pool).
pub fn randomized_factor(alpha_max: f64, epsilon: f64, kappa: usize, n: usize) -> Result<RandomizedFactor> {
    if kappa == 0 || n == 0 {
        return Err(invalid("randomized factor needs kappa >= 1 and N >= 1"));
    }
    crate::selectors::validate_epsilon(epsilon, kappa)?;
    let r = sample_size(n, kappa, epsilon, usize::MAX);
    if r >= n {
        return Err(Error::BoundUndefined(format!("sample size r = {r} is not below N = {n}")));
    }
    let (nf, rf) = (n as f64, r as f64);
    let eta = 1.0 + (rf / (2.0 * nf) - 1.0 / (2.0 * (nf - rf))).max(0.0);
    let c = alpha_max.max(1.0);
    Ok(RandomizedFactor { factor: randomized_factor_formula(c, epsilon, eta), c, r, eta })
}

/// `r_l = tr(Omega_0^{-2} Delta_l)` for every feature. Sequential: the
/// per-feature work is a single dot product, too small to amortize a thread
/// pool wake-up.
pub fn leverage_scores(problem: &ProblemInstance) -> Result<Vec<f64>> {
    let inv = linalg::spd_inverse(&problem.omega0.matrix)?;
    let inv2 = &inv * &inv;
    Ok(problem
        .increments
        .iter()
        .map(|inc| inv2.dot(&inc.delta).max(0.0))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorCheck {
    pub remainder: f64,
    pub quad_bound: f64,
    pub exact_quad: f64,
}

/// Second-order remainder of `rho(Omega) = tr(Omega^{-1})` along `Delta_S`.
///
/// The remainder is evaluated through its closed form
/// `eps^2 tr(A^{-1} B (A + eps B)^{-1} B A^{-1})`, which equals
/// `rho(A + eps B) - rho(A) + eps tr(A^{-2} B)` without the cancellation of
/// the direct difference.
pub fn taylor_remainder_check(omega0: &DMatrix<f64>, delta_s: &DMatrix<f64>, eps: f64) -> Result<TaylorCheck> {
    if !(eps >= 0.0) {
        return Err(invalid(format!("taylor scaling must be nonnegative, got {eps}")));
    }
    let inv = linalg::spd_inverse(omega0)?;
    let p = delta_s * &inv;
    let weighted = |m: &DMatrix<f64>| -> Result<f64> {
        let chol = linalg::cholesky(m, "taylor_remainder_check")?;
        let mut x = p.clone();
        chol.l_dirty().solve_lower_triangular_mut(&mut x);
        Ok(x.norm_squared())
    };
    let e2 = eps * eps;
    let exact_quad = e2 * weighted(omega0)?;
    let remainder = e2 * weighted(&(omega0 + delta_s * eps))?;
    let inv_norm = 1.0 / linalg::min_eigenvalue(omega0);
    let quad_bound = e2 * inv_norm.powi(3) * delta_s.norm_squared();
    Ok(TaylorCheck { remainder, quad_bound, exact_quad })
}

/// `rho(A + eps B) - rho(A) + eps tr(A^{-2} B)` evaluated literally.
pub fn taylor_remainder_direct(omega0: &DMatrix<f64>, delta_s: &DMatrix<f64>, eps: f64) -> Result<f64> {
    let inv = linalg::spd_inverse(omega0)?;
    let lin = (&inv * &inv).dot(delta_s);
    let shifted = linalg::trace_inverse(&(omega0 + delta_s * eps))?;
    Ok(shifted - inv.trace() + eps * lin)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaBounds {
    pub kappa: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub greedy_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub kappa: usize,
    pub exhaustive_max: usize,
    pub epsilon_sample: f64,
    /// Scaling for the Taylor check on `Delta_U`; skipped when absent.
    pub epsilon_taylor: Option<f64>,
    /// Used for the randomized factor when `N` exceeds the exhaustive cap.
    pub alpha_max_assumed: Option<f64>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            kappa: 1,
            exhaustive_max: DEFAULT_EXHAUSTIVE_MAX,
            epsilon_sample: 0.5,
            epsilon_taylor: None,
            alpha_max_assumed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub fingerprint: String,
    pub n: usize,
    pub kappa: usize,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha_max: Option<f64>,
    pub alpha_max_assumed: bool,
    pub alpha_bar: f64,
    pub gamma_lower: f64,
    pub delta_min: f64,
    pub greedy_factor: Option<f64>,
    pub greedy_factor_spectral: f64,
    pub epsilon_sample: f64,
    pub randomized_factor: Option<f64>,
    pub c: Option<f64>,
    pub r: Option<usize>,
    pub eta: Option<f64>,
    pub sandwich_holds: Option<bool>,
    pub per_kappa: Vec<KappaBounds>,
    pub epsilon_taylor: Option<f64>,
    pub taylor: Option<TaylorCheck>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn bound_report(problem: &ProblemInstance, opts: &BoundOptions) -> Result<BoundReport> {
    let spectral = spectral_bounds(problem)?;
    let n = problem.len();
    let mut notes = Vec::new();
    if spectral.gamma_lower > 1.0 {
        notes.push(format!(
            "gamma_lower = {} exceeds 1; factors use the clamped value",
            spectral.gamma_lower
        ));
    }
    let table = if n <= opts.exhaustive_max {
        Some(ExhaustiveTable::new(problem, opts.exhaustive_max)?)
    } else {
        notes.push(format!("N = {n} exceeds exhaustive cap {}; exhaustive values omitted", opts.exhaustive_max));
        None
    };
    let alpha = table.as_ref().map(|t| curvature_table(t, None));
    let gamma = table.as_ref().map(|t| submodularity_ratio_table(t, None));
    let exhaustive_alpha_max = table.as_ref().map(elementwise_curvature_table);
    let per_kappa = match &table {
        Some(t) => (1..=opts.kappa.min(n))
            .map(|k| {
                let a = curvature_table(t, Some(k));
                let g = submodularity_ratio_table(t, Some(k));
                KappaBounds { kappa: k, alpha: a, gamma: g, greedy_factor: greedy_factor(a, g) }
            })
            .collect(),
        None => Vec::new(),
    };
    let (alpha_max, alpha_max_assumed) = match (exhaustive_alpha_max, opts.alpha_max_assumed) {
        (Some(v), _) => (Some(v), false),
        (None, Some(v)) => (Some(v), true),
        (None, None) => (None, false),
    };
    let mut rand = None;
    if let Some(am) = alpha_max {
        match randomized_factor(am, opts.epsilon_sample, opts.kappa, n) {
            Ok(v) => rand = Some(v),
            Err(e @ Error::EpsilonOutOfRange { .. }) => return Err(e),
            Err(e) => notes.push(format!("randomized factor unavailable: {e}")),
        }
    } else {
        notes.push("randomized factor unavailable: no alpha_max computed or assumed".into());
    }
    if rand.is_some() {
        notes.push("eta uses the first-iteration sample size, before clamping to the remaining pool".into());
    }
    let sandwich_holds = match (alpha, gamma) {
        (Some(a), Some(g)) => Some(a <= spectral.alpha_bar + 1e-9 && g >= spectral.gamma_lower - 1e-9),
        _ => None,
    };
    let taylor = match opts.epsilon_taylor {
        Some(eps) => {
            let mut delta_u = problem.omega_all() - &problem.omega0.matrix;
            linalg::symmetrize(&mut delta_u);
            Some(taylor_remainder_check(&problem.omega0.matrix, &delta_u, eps)?)
        }
        None => None,
    };
    Ok(BoundReport {
        fingerprint: problem.fingerprint()?,
        n,
        kappa: opts.kappa,
        alpha,
        gamma,
        alpha_max,
        alpha_max_assumed,
        alpha_bar: spectral.alpha_bar,
        gamma_lower: spectral.gamma_lower,
        delta_min: spectral.delta_min,
        greedy_factor: alpha.zip(gamma).map(|(a, g)| greedy_factor(a, g)),
        greedy_factor_spectral: greedy_factor(spectral.alpha_bar, spectral.gamma_lower),
        epsilon_sample: opts.epsilon_sample,
        randomized_factor: rand.map(|v| v.factor),
        c: rand.map(|v| v.c),
        r: rand.map(|v| v.r),
        eta: rand.map(|v| v.eta),
        sandwich_holds,
        per_kappa,
        epsilon_taylor: opts.epsilon_taylor,
        taylor,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    fn modular() -> ProblemInstance {
        let deltas = (0..3)
            .map(|i| {
                let mut d = DMatrix::zeros(3, 3);
                d[(i, i)] = 1.0 + i as f64;
                d
            })
            .collect();
        ProblemInstance::from_dense(DMatrix::identity(3, 3), deltas).unwrap()
    }

    #[test]
    fn modular_instance_values() {
        let p = modular();
        let t = ExhaustiveTable::new(&p, 8).unwrap();
        assert!(curvature_table(&t, None).abs() < 1e-12);
        assert!((submodularity_ratio_table(&t, None) - 1.0).abs() < 1e-12);
        assert!((elementwise_curvature_table(&t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_feature_has_zero_curvature() {
        let p = ProblemInstance::from_dense(DMatrix::identity(2, 2), vec![diag(&[1.0, 0.0])]).unwrap();
        assert_eq!(curvature_exhaustive(&p, 8).unwrap(), 0.0);
        assert_eq!(elementwise_curvature_max(&p, 8).unwrap(), 1.0);
    }

    #[test]
    fn cap_is_enforced() {
        let p = modular();
        assert!(curvature_exhaustive(&p, 2).is_err());
    }

    #[test]
    fn spectral_identity_example() {
        let deltas = vec![diag(&[0.5, 0.5]), diag(&[0.5, 0.5])];
        let p = ProblemInstance::from_dense(DMatrix::identity(2, 2), deltas).unwrap();
        let b = spectral_bounds(&p).unwrap();
        assert!((b.gamma_lower - 0.5).abs() < 1e-12);
        assert!((b.alpha_bar - 0.5).abs() < 1e-12);
        assert_eq!(b.alpha_bar + b.gamma_lower, 1.0);
    }

    #[test]
    fn spectral_rejects_zero_increment() {
        let p = ProblemInstance::from_dense(DMatrix::identity(2, 2), vec![diag(&[1.0, 0.0]), DMatrix::zeros(2, 2)])
            .unwrap();
        assert!(matches!(spectral_bounds(&p), Err(Error::BoundUndefined(_))));
    }

    #[test]
    fn greedy_factor_examples() {
        assert!((greedy_factor(1.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(greedy_factor(0.0, 0.7), 0.7);
        assert!((greedy_factor(0.5, 0.5) - 0.442398).abs() < 1e-6);
    }

    #[test]
    fn randomized_factor_examples() {
        assert!((randomized_factor_formula(1.0, 0.5, 1.0) - 0.132121).abs() < 1e-6);
        let v = randomized_factor(1.0, 0.5, 10, 150).unwrap();
        assert_eq!(v.r, 11);
        assert!((v.eta - (1.0 + 11.0 / 300.0 - 1.0 / 278.0)).abs() < 1e-12);
        assert!(randomized_factor(1.0, (-5.0f64).exp(), 5, 150).is_err());
    }

    #[test]
    fn leverage_with_identity_base() {
        let p = ProblemInstance::from_dense(DMatrix::identity(2, 2), vec![diag(&[1.0, 2.0]), DMatrix::zeros(2, 2)])
            .unwrap();
        let r = leverage_scores(&p).unwrap();
        assert!((r[0] - 3.0).abs() < 1e-12);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn taylor_diagonal_example() {
        let c = taylor_remainder_check(&DMatrix::identity(2, 2), &diag(&[1.0, 0.0]), 0.1).unwrap();
        assert!((c.remainder - (1.0 / 1.1 + 1.0 - 2.0 + 0.1)).abs() < 1e-14);
        assert!((c.exact_quad - 0.01).abs() < 1e-15);
        assert!((c.quad_bound - 0.01).abs() < 1e-15);
        let z = taylor_remainder_check(&DMatrix::identity(2, 2), &DMatrix::zeros(2, 2), 0.3).unwrap();
        assert_eq!((z.remainder, z.exact_quad, z.quad_bound), (0.0, 0.0, 0.0));
    }

    #[test]
    fn submask_enumeration_is_complete() {
        let mut v: Vec<usize> = submasks(0b1011).collect();
        v.sort();
        assert_eq!(v, vec![0, 1, 2, 3, 8, 9, 10, 11]);
    }
}
