//! Acceptance suite. Each test prints one PASS/FAIL line to stderr (bypassing
//! output capture) and then asserts the same condition. Tests hold a shared
//! lock so the timing checks are not disturbed by concurrent work.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use common::*;
use infoselect::analysis::*;
use infoselect::infomat::{apply_smw_update, build_base_information, BuildOptions};
use infoselect::linalg;
use infoselect::rng::SplitMix64;
use infoselect::scenario::*;
use infoselect::selectors::*;
use infoselect::synthetic::{random_factor, random_instance, random_pd, vin_instance, RandomSpec};
use infoselect::{objective_value, ProblemInstance};
use itertools::Itertools;
use nalgebra::Vector3;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} {verdict}: {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn list(v: &[f64], digits: usize) -> String {
    v.iter().map(|x| format!("{x:.digits$e}")).join(", ")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn acceptance_01_normalization_and_monotonicity() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = SplitMix64::new(101);
    let (mut pairs, mut empty_ok, mut worst) = (0usize, true, f64::INFINITY);
    for seed in 0..100 {
        let p = random_sized(seed, (1, 36), (1, 12), 3);
        empty_ok &= objective_value(&p, &[]).unwrap() == 0.0;
        for _ in 0..10 {
            let l = rng.below(p.len() as u64) as usize;
            let others: Vec<usize> = (0..p.len()).filter(|&i| i != l).collect();
            let k = rng.below(others.len() as u64 + 1) as usize;
            let mut s = rng.sample(&others, k);
            let before = objective_value(&p, &s).unwrap();
            s.push(l);
            worst = worst.min(objective_value(&p, &s).unwrap() - before);
            pairs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "normalization and monotonicity",
        empty_ok && worst >= -1e-10 && pairs == 1000 && secs < 60.0,
        format!("f(empty)=0 on all: {empty_ok}; {pairs} pairs, min gain {worst:.3e} (>= -1e-10); {secs:.2}s (< 60s)"),
    );
}

#[test]
fn acceptance_02_smw_equivalence() {
    let _g = serial();
    let (mut worst, mut identical) = (0.0f64, 0usize);
    for seed in 0..50 {
        let p = random_sized(1000 + seed, (6, 36), (6, 12), 3);
        let ids: Vec<usize> = SplitMix64::new(seed).sample(&(0..p.len()).collect::<Vec<_>>(), 6);
        let mut inv = linalg::spd_inverse(&p.omega0.matrix).unwrap();
        for &i in &ids {
            inv = apply_smw_update(&inv, &p.increments[i].g).unwrap();
        }
        worst = worst.max(rel_err(inv.trace(), trace_inv_lu(&p.omega_of(&ids))));
        let a = simple_greedy(&p, 6).unwrap();
        let b = fast_lowrank_greedy(&p, 6).unwrap();
        identical += usize::from(a.selected == b.selected);
    }
    report(
        2,
        "low-rank update equivalence",
        worst <= 1e-8 && identical == 50,
        format!("max relative trace error {worst:.3e} (<= 1e-8); lowrank == simple on {identical}/50"),
    );
}

#[test]
fn acceptance_03_spectral_guarantee() {
    let _g = serial();
    let start = Instant::now();
    let (mut slack, mut sandwich, mut cases) = (f64::INFINITY, true, 0usize);
    for seed in 0..200 {
        let p = random_sized(2000 + seed, (2, 20), (2, 8), 3);
        let b = spectral_bounds(&p).unwrap();
        let factor = greedy_factor(b.alpha_bar, b.gamma_lower);
        let t = ExhaustiveTable::new(&p, 8).unwrap();
        let (a, g) = (curvature_table(&t, None), submodularity_ratio_table(&t, None));
        sandwich &= a <= b.alpha_bar + 1e-9 && g >= b.gamma_lower - 1e-9;
        for kappa in 1..=4.min(p.len()) {
            let opt = exhaustive_optimal(&p, kappa, DEFAULT_EXHAUSTIVE_CAP).unwrap();
            let greedy = simple_greedy(&p, kappa).unwrap();
            slack = slack.min(greedy.objective - factor * opt.objective);
            cases += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        "spectral greedy guarantee",
        slack >= -1e-9 && sandwich && secs < 300.0,
        format!("{cases} (instance, kappa) cases, min slack {slack:.3e} (>= -1e-9); sandwich on all: {sandwich}; {secs:.2}s (< 300s)"),
    );
}

/// Ten triangulable landmarks of a VIN scenario with horizon 5.
fn ten_candidate_vin() -> ProblemInstance {
    let p = vin_instance(1, 40, 5).unwrap();
    let ids: Vec<usize> = (0..p.len()).filter(|&i| p.increments[i].trace > 1e-12).take(10).collect();
    assert_eq!(ids.len(), 10);
    p.subset(&ids).unwrap()
}

#[test]
fn acceptance_04_greedy_versus_optimal() {
    let _g = serial();
    let p = ten_candidate_vin();
    let b = spectral_bounds(&p).unwrap();
    let factor = greedy_factor(b.alpha_bar, b.gamma_lower);
    let (mut equal, mut slack) = (Vec::new(), f64::INFINITY);
    for kappa in 1..=10 {
        let opt = exhaustive_optimal(&p, kappa, DEFAULT_EXHAUSTIVE_CAP).unwrap();
        let greedy = simple_greedy(&p, kappa).unwrap();
        if rel_err(greedy.objective, opt.objective) <= 1e-10 {
            equal.push(kappa);
        }
        slack = slack.min(greedy.objective - factor * opt.objective);
    }
    report(
        4,
        "greedy versus optimal on a 10-candidate VIN instance",
        slack >= -1e-9,
        format!("greedy equals optimum for kappa in {equal:?} ({}/10, reported); spectral factor {factor:.3e}, min slack {slack:.3e} (>= -1e-9)", equal.len()),
    );
}

#[test]
fn acceptance_05_randomized_guarantee() {
    let _g = serial();
    let (kappa, eps, trials) = (3, 0.5, 500u64);
    let p = random_instance(5, RandomSpec { dim: 12, features: 10, max_rank: 3 }).unwrap();
    let alpha_max = elementwise_curvature_max(&p, 10).unwrap();
    let rf = randomized_factor(alpha_max, eps, kappa, p.len()).unwrap();
    let opt = exhaustive_optimal(&p, kappa, DEFAULT_EXHAUSTIVE_CAP).unwrap().objective;
    let values: Vec<f64> = (0..trials).map(|s| randomized_greedy(&p, kappa, eps, s).unwrap().objective).collect();
    let mean = values.iter().sum::<f64>() / trials as f64;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0)).sqrt();
    let threshold = rf.factor * opt - 3.0 * std / (trials as f64).sqrt();

    let mut exact = true;
    for seed in 0..20 {
        let q = random_instance(50 + seed, RandomSpec { dim: 15, features: 10, max_rank: 3 }).unwrap();
        for k in 1..=5 {
            let r = randomized_greedy(&q, k, (-(k as f64)).exp(), seed).unwrap();
            let s = simple_greedy(&q, k).unwrap();
            exact &= r.selected == s.selected && r.objective == s.objective;
        }
    }
    report(
        5,
        "randomized greedy guarantee",
        mean >= threshold && exact,
        format!(
            "alpha_max {alpha_max:.4}, c {:.4}, r {}, eta {:.4}, factor {:.4}; mean f {mean:.4e} >= {threshold:.4e} (f_opt {opt:.4e}); smallest epsilon equals simple greedy: {exact}",
            rf.c, rf.r, rf.eta, rf.factor
        ),
    );
}

#[test]
fn acceptance_06_taylor_bound_and_leverage() {
    let _g = serial();
    let mut rng = SplitMix64::new(606);
    let epsilons = [1e-3, 1e-2, 1e-1, 1.0];
    let mut slack = f64::INFINITY;
    for i in 0..200 {
        let n = 2 + rng.below(11) as usize;
        let omega = random_pd(&mut rng, n);
        let g = random_factor(&mut rng, n, n);
        let delta = g.transpose() * g;
        let t = taylor_remainder_check(&omega, &delta, epsilons[i % 4]).unwrap();
        slack = slack.min(t.remainder).min(t.exact_quad - t.remainder).min(t.quad_bound - t.exact_quad);
    }

    let hs = [1e-3, 5e-4, 2.5e-4];
    let mut orders = Vec::new();
    for seed in 0..10 {
        let p = random_instance(600 + seed, RandomSpec { dim: 8, features: 4, max_rank: 3 }).unwrap();
        let scores = leverage_scores(&p).unwrap();
        let a = &p.omega0.matrix;
        for (l, inc) in p.increments.iter().enumerate() {
            let d = &inc.delta / inc.trace;
            let r = scores[l] / inc.trace;
            let err: Vec<f64> = hs
                .iter()
                .map(|&h| ((trace_inv_lu(&(a + &d * h)) - trace_inv_lu(&(a - &d * h))) / (2.0 * h) + r).abs())
                .collect();
            orders.extend(err.windows(2).map(|w| (w[0] / w[1]).log2()));
        }
    }
    let (lo, hi) = orders.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &o| (lo.min(o), hi.max(o)));
    report(
        6,
        "quadratic remainder bound and leverage scores",
        slack >= -1e-12 && lo >= 1.7 && hi <= 2.3,
        format!("200 triples, min slack in chain {slack:.3e} (>= -1e-12); central-difference orders in [{lo:.3}, {hi:.3}] (expected 2)"),
    );
}

#[test]
fn acceptance_07_linearized_exactness() {
    let _g = serial();
    let mut hits = 0;
    for seed in 0..100 {
        let p = random_sized(700 + seed, (3, 20), (8, 8), 3);
        let scores = leverage_scores(&p).unwrap();
        let best = (0..8).combinations(3).map(|c| c.iter().map(|&i| scores[i]).sum::<f64>()).fold(f64::MIN, f64::max);
        let r = linearized_select(&p, 3).unwrap();
        let got: f64 = r.selected.sorted().iter().map(|&i| scores[i]).sum();
        hits += usize::from(got == best);
    }
    report(7, "linearized selection maximizes the surrogate", hits == 100, format!("exact maximum on {hits}/100"));
}

/// Median-of-5 selector time for each `(method, kappa)` cell after one
/// discarded warm-up call per cell; rounds are interleaved across cells so
/// slow drift does not bias any single cell.
fn time_medians(p: &ProblemInstance, cells: &[(Method, usize)]) -> Vec<f64> {
    let opts = RunOptions { epsilon: 0.5, seed: 1, ..Default::default() };
    let time = |&(m, k): &(Method, usize)| run_method(p, m, k, &opts).unwrap().elapsed_s;
    cells.iter().for_each(|c| {
        time(c);
    });
    let mut samples = vec![Vec::new(); cells.len()];
    for _ in 0..5 {
        for (i, c) in cells.iter().enumerate() {
            samples[i].push(time(c));
        }
    }
    samples.into_iter().map(median).collect()
}

#[test]
fn acceptance_08_runtime_ordering() {
    let _g = serial();
    let mut ordered = true;
    let mut max_spread: f64 = 0.0;
    let mut details = Vec::new();
    for seed in [1, 2] {
        let p = vin_instance(seed, 150, 13).unwrap();
        let t = time_medians(&p, &[(Method::Linearized, 70), (Method::Randomized, 70), (Method::Lowrank, 70), (Method::Simple, 70)]);
        ordered &= t.windows(2).all(|w| w[0] < w[1]);
        let lin = time_medians(&p, &[(Method::Linearized, 10), (Method::Linearized, 70), (Method::Linearized, 140)]);
        let (lo, hi) = lin.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let spread = (hi - lo) / lo;
        max_spread = max_spread.max(spread);
        details.push(format!(
            "seed {seed}: linearized {:.4}s < randomized {:.4}s < lowrank {:.4}s < simple {:.4}s; linearized over kappa [{}] (spread {:.1}%)",
            t[0],
            t[1],
            t[2],
            t[3],
            list(&lin, 4),
            100.0 * spread
        ));
    }
    report(8, "runtime ordering", ordered && max_spread < 0.25, details.join("; "));
}

#[test]
fn acceptance_09_horizon_saturation() {
    let _g = serial();
    let cfg = ScenarioConfig {
        num_landmarks: 40,
        horizon: 15,
        controls: vec![ControlInput { u: 5.0, delta: 0.05 }],
        landmark_box: LandmarkBox { min: [1.0, -2.0, -0.5], max: [4.0, 2.0, 1.0] },
        ..Default::default()
    };
    let s = generate_scenario(3, &cfg).unwrap();
    let last_visible = s
        .landmarks
        .iter()
        .filter_map(|l| s.visibility(l).iter().rposition(|&v| v))
        .max()
        .unwrap();
    assert!(last_visible < 10, "precondition: every landmark leaves the view within 10 frames");
    let kappa = 10;
    let (mut mse, mut current) = (Vec::new(), Vec::new());
    for t in 1..=15 {
        let p = ProblemInstance::build(&s.window(0, t).unwrap(), &BuildOptions::default()).unwrap();
        let sel = fast_lowrank_greedy(&p, kappa).unwrap().selected;
        mse.push(p.scaled_mse(sel.ids()).unwrap());
        let cov = linalg::spd_inverse(&p.omega_of(sel.ids())).unwrap();
        current.push(cov.view((0, 0), (9, 9)).trace());
    }
    let non_increasing = mse[..10].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let tail = &mse[9..];
    let tail_spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let cur_spread = current[9..].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - current[9..].iter().cloned().fold(f64::INFINITY, f64::min);
    report(
        9,
        "horizon saturation",
        non_increasing && tail_spread <= 1e-9,
        format!(
            "last visible frame {last_visible}; scaled MSE for T=1..15 [{}]; non-increasing on 1..10: {non_increasing}; spread on 10..15 {tail_spread:.3e} (<= 1e-9); current-frame marginal trace [{}] (spread on 10..15 {cur_spread:.3e}, reported only)",
            list(&mse, 4),
            list(&current, 6)
        ),
    );
}

#[test]
fn acceptance_10_structure_and_determinism() {
    let _g = serial();
    let mut failures = Vec::new();

    for seed in [2, 7] {
        let p = vin_instance(seed, 150, 13).unwrap();
        for inc in &p.increments {
            let norm2 = linalg::sym_spectral_norm(&inc.delta);
            let psd = norm2 == 0.0 || linalg::min_eigenvalue(&inc.delta) >= -1e-8 * norm2;
            let cap = (3 * inc.n_obs).saturating_sub(3);
            if !psd || linalg::numerical_rank(&inc.delta, 1e-9, 0.0) > cap || inc.rank() > cap {
                failures.push(format!("seed {seed} landmark {}: psd {psd}, rank above 3 n_obs - 3", inc.id));
            }
        }
    }

    let s = generate_scenario(4, &ScenarioConfig::default()).unwrap();
    let m = build_base_information(&s).unwrap().matrix;
    let blocks = s.poses.len();
    let tridiagonal = (0..blocks)
        .cartesian_product(0..blocks)
        .filter(|(i, j)| i.abs_diff(*j) >= 2)
        .all(|(i, j)| m.view((9 * i, 9 * j), (9, 9)).iter().all(|&v| v == 0.0));
    if !tridiagonal || linalg::cholesky(&m, "base").is_err() {
        failures.push(format!("base information: block-tridiagonal {tridiagonal}, PD check failed or not"));
    }

    let (u, delta, dt, l) = (1.0, 0.2, 0.01, 0.26);
    let poses = simulate_bicycle_horizon(&Pose::identity(), &vec![ControlInput { u, delta }; 100], dt, l).unwrap();
    let radius = l / delta.tan();
    let omega = u / radius;
    let worst_arc = poses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let t = k as f64 * dt;
            (p.t - Vector3::new(radius * (omega * t).sin(), radius * (1.0 - (omega * t).cos()), 0.0)).norm() / radius
        })
        .fold(0.0, f64::max);
    if worst_arc > 0.02 {
        failures.push(format!("bicycle deviation {worst_arc:.3e} of the radius"));
    }

    let cfg = ScenarioConfig { num_landmarks: 60, horizon: 8, heading_noise: 0.01, ..Default::default() };
    let a = generate_scenario(11, &cfg).unwrap();
    let b = generate_scenario(11, &cfg).unwrap();
    if a.to_json().unwrap() != b.to_json().unwrap() {
        failures.push("scenario generation not byte-identical".into());
    }
    let pa = ProblemInstance::build(&a, &BuildOptions::default()).unwrap();
    let pb = ProblemInstance::build(&b, &BuildOptions::default()).unwrap();
    if pa.to_json(false).unwrap() != pb.to_json(false).unwrap() {
        failures.push("problem construction not byte-identical".into());
    }
    for method in Method::ALL.into_iter().filter(|m| *m != Method::Optimal) {
        let opts = RunOptions { seed: 21, ..Default::default() };
        let ra = run_method(&pa, method, 7, &opts).unwrap().without_timing().to_json().unwrap();
        let rb = run_method(&pb, method, 7, &opts).unwrap().without_timing().to_json().unwrap();
        if ra != rb {
            failures.push(format!("{method} not byte-identical"));
        }
    }
    let rand = random_instance(9, RandomSpec { dim: 10, features: 6, max_rank: 2 }).unwrap();
    if rand.to_json(true).unwrap() != random_instance(9, RandomSpec { dim: 10, features: 6, max_rank: 2 }).unwrap().to_json(true).unwrap() {
        failures.push("random instance generation not byte-identical".into());
    }

    report(
        10,
        "structural suite",
        failures.is_empty(),
        if failures.is_empty() {
            format!("increments PSD with bounded rank; base PD and block-tridiagonal; bicycle deviation {:.3}% of radius; seeded paths byte-identical", 100.0 * worst_arc)
        } else {
            failures.join("; ")
        },
    );
}
