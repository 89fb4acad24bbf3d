use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::infomat::{objective_value, BuildOptions, ProblemInstance};
use crate::scenario::{generate_scenario, Scenario, ScenarioConfig};
use crate::selectors::{run_method, Method, RunOptions, DEFAULT_EXHAUSTIVE_CAP};

pub const CSV_HEADER: &str = "instance,method,kappa,repeat,seed,objective,scaled_mse,elapsed_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TimeScope {
    /// Selector call only.
    #[default]
    Select,
    /// Problem construction plus selection.
    Total,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

fn default_cap() -> u64 {
    DEFAULT_EXHAUSTIVE_CAP as u64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario or problem-instance file, relative to the config file.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    /// Inline generation parameters, used when `scenario` is absent.
    #[serde(default)]
    pub generate: Option<ScenarioConfig>,
    #[serde(default)]
    pub seed: u64,
    pub methods: Vec<Method>,
    pub kappas: Vec<usize>,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default = "half")]
    pub epsilon_sample: f64,
    /// Horizon lengths; empty means the scenario's own horizon.
    #[serde(default)]
    pub horizons: Vec<usize>,
    /// Consecutive frames per horizon (sliding window).
    #[serde(default = "one")]
    pub frames: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub time_scope: TimeScope,
    #[serde(default)]
    pub build: BuildOptions,
    #[serde(default = "default_cap")]
    pub exhaustive_cap: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(invalid("methods must be nonempty"));
        }
        if self.kappas.is_empty() {
            return Err(invalid("kappas must be nonempty"));
        }
        if self.kappas.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("kappas must be sorted ascending"));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        if self.frames == 0 {
            return Err(invalid("frames must be at least 1"));
        }
        if self.horizons.contains(&0) {
            return Err(invalid("horizons must be positive"));
        }
        if self.scenario.is_some() == self.generate.is_some() {
            return Err(invalid("exactly one of scenario and generate must be given"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub carry_over: bool,
    /// Directory relative paths in the config are resolved against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub instance: String,
    pub method: Method,
    pub kappa: usize,
    /// Repeat index, or `mean` / `std` for aggregate rows.
    pub repeat: String,
    pub seed: Option<u64>,
    pub objective: f64,
    pub scaled_mse: f64,
    pub elapsed_s: f64,
}

/// Parses `1..5,8,10..12` (inclusive ranges) into a sorted, deduplicated list.
pub fn parse_frames_list(s: &str) -> Result<Vec<usize>> {
    let bad = || invalid(format!("bad frames list '{s}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() || out[0] == 0 {
        return Err(bad());
    }
    Ok(out)
}

enum Source {
    Scenario(Scenario),
    Problem(ProblemInstance),
}

fn load_source(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Source> {
    if let Some(path) = &cfg.scenario {
        let path = base_dir.join(path);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("omega0").is_some() {
            return Ok(Source::Problem(ProblemInstance::from_json(&text)?));
        }
        return Ok(Source::Scenario(Scenario::from_json(&text)?));
    }
    let mut gen = cfg.generate.clone().unwrap_or_default();
    if let Some(&max_t) = cfg.horizons.iter().max() {
        gen.horizon = max_t + cfg.frames - 1;
    }
    Ok(Source::Scenario(generate_scenario(cfg.seed, &gen)?))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

struct Cell<'a> {
    problem: &'a ProblemInstance,
    method: Method,
    kappa: usize,
    seed: u64,
    previous: Option<&'a [usize]>,
}

/// Runs one cell; returns the full selection (original indices) and the
/// selector's elapsed time.
fn run_cell(cell: &Cell<'_>, cfg: &ExperimentConfig, carry_over: bool) -> Result<(Vec<usize>, f64)> {
    let opts = RunOptions { epsilon: cfg.epsilon_sample, seed: cell.seed, exhaustive_cap: cfg.exhaustive_cap as u128 };
    if !carry_over {
        let r = run_method(cell.problem, cell.method, cell.kappa, &opts)?;
        return Ok((r.selected.0, r.elapsed_s));
    }
    carry_over_select(cell.problem, cell.method, cell.kappa, cell.previous.unwrap_or(&[]), &opts)
}

/// Keeps the features of `previous` visible in the current frame (at most
/// `kappa`) and fills the remaining budget from features observed at least
/// once in the window, conditioning on the retained ones. Returns the full
/// selection and the selector's elapsed time.
pub fn carry_over_select(
    problem: &ProblemInstance,
    method: Method,
    kappa: usize,
    previous: &[usize],
    opts: &RunOptions,
) -> Result<(Vec<usize>, f64)> {
    problem.check_ids(previous)?;
    let mut retained: Vec<usize> = previous.iter().copied().filter(|&i| problem.meta[i].first_visible).collect();
    retained.truncate(kappa);
    let budget = kappa - retained.len();
    let pool: Vec<usize> = (0..problem.len())
        .filter(|i| !retained.contains(i) && problem.meta[*i].n_obs >= 1)
        .collect();
    if budget == 0 || pool.is_empty() {
        return Ok((retained, 0.0));
    }
    let (reduced, rest) = problem.condition_on(&retained)?;
    let keep: Vec<usize> = (0..rest.len()).filter(|&j| pool.contains(&rest[j])).collect();
    let reduced = reduced.subset(&keep)?;
    let r = run_method(&reduced, method, budget, opts)?;
    let mut all = retained;
    all.extend(r.selected.0.iter().map(|&j| rest[keep[j]]));
    Ok((all, r.elapsed_s))
}

/// Runs every cell and writes CSV rows to `out`. Rows are written in
/// `(horizon, frame, method, kappa, repeat)` order; failed cells are
/// reported on stderr and the first error is returned after all other
/// cells have been written.
pub fn run_sweep<W: Write>(cfg: &ExperimentConfig, opts: &SweepOptions, out: W) -> Result<()> {
    cfg.validate()?;
    let source = load_source(cfg, &opts.base_dir)?;
    let horizons: Vec<usize> = match (&source, cfg.horizons.is_empty()) {
        (Source::Problem(p), _) => {
            if !cfg.horizons.is_empty() || cfg.frames != 1 {
                return Err(invalid("a problem-instance source supports neither horizons nor frames"));
            }
            vec![p.horizon]
        }
        (Source::Scenario(s), true) => {
            let t = s.horizon().checked_sub(cfg.frames - 1).filter(|&t| t > 0);
            vec![t.ok_or_else(|| invalid("scenario too short for the requested frames"))?]
        }
        (Source::Scenario(_), false) => cfg.horizons.clone(),
    };

    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    wtr.write_record(CSV_HEADER.split(','))?;
    wtr.flush()?;
    let mut first_err: Option<Error> = None;
    let fail = |e: Error, what: String, first_err: &mut Option<Error>| {
        eprintln!("cell {what} failed: {e}");
        if first_err.is_none() {
            *first_err = Some(e);
        }
    };

    for &t in &horizons {
        let mut memory: HashMap<(Method, usize, usize), Vec<usize>> = HashMap::new();
        for f in 0..cfg.frames {
            let instance = format!("T{t}_f{f}");
            let start = Instant::now();
            let built = match &source {
                Source::Problem(p) => Ok(p.clone()),
                Source::Scenario(s) => s.window(f, t).and_then(|w| ProblemInstance::build(&w, &cfg.build)),
            };
            let problem = match built {
                Ok(p) => p,
                Err(e) => {
                    fail(e, instance.clone(), &mut first_err);
                    continue;
                }
            };
            let build_s = start.elapsed().as_secs_f64();
            for &method in &cfg.methods {
                for &kappa in &cfg.kappas {
                    let repeats = if method.is_seeded() { cfg.repeats } else { 1 };
                    let mut rows = Vec::with_capacity(repeats);
                    for rep in 0..repeats {
                        let seed = cfg.seed.wrapping_add(rep as u64);
                        let key = (method, kappa, rep);
                        let cell = Cell { problem: &problem, method, kappa, seed, previous: memory.get(&key).map(Vec::as_slice) };
                        let what = format!("{instance}/{method}/k{kappa}/r{rep}");
                        let outcome = run_cell(&cell, cfg, opts.carry_over).and_then(|(sel, el)| {
                            let objective = objective_value(&problem, &sel)?;
                            let mse = problem.scaled_mse(&sel)?;
                            Ok((sel, objective, mse, el))
                        });
                        match outcome {
                            Ok((sel, objective, scaled_mse, el)) => {
                                let elapsed_s = match cfg.time_scope {
                                    TimeScope::Select => el,
                                    TimeScope::Total => el + build_s,
                                };
                                let seed = matches!(method, Method::Randomized | Method::Random | Method::Grid).then_some(seed);
                                let rec = SweepRecord {
                                    instance: instance.clone(),
                                    method,
                                    kappa,
                                    repeat: rep.to_string(),
                                    seed,
                                    objective,
                                    scaled_mse,
                                    elapsed_s,
                                };
                                wtr.serialize(&rec)?;
                                wtr.flush()?;
                                rows.push(rec);
                                memory.insert(key, sel);
                            }
                            Err(e) => fail(e, what, &mut first_err),
                        }
                    }
                    if method.is_seeded() && cfg.repeats > 1 && !rows.is_empty() {
                        let col = |g: fn(&SweepRecord) -> f64| rows.iter().map(g).collect::<Vec<_>>();
                        let (om, os) = mean_std(&col(|r| r.objective));
                        let (mm, ms) = mean_std(&col(|r| r.scaled_mse));
                        let (em, es) = mean_std(&col(|r| r.elapsed_s));
                        for (label, o, m, e) in [("mean", om, mm, em), ("std", os, ms, es)] {
                            wtr.serialize(SweepRecord {
                                instance: instance.clone(),
                                method,
                                kappa,
                                repeat: label.to_string(),
                                seed: None,
                                objective: o,
                                scaled_mse: m,
                                elapsed_s: e,
                            })?;
                        }
                        wtr.flush()?;
                    }
                }
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
