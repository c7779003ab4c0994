//! Combinatorial design optimization: leverage-score initialization, the
//! swapping greedy loop, and the baselines it is compared against.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::eig::EigEvaluator;
use crate::error::{Error, Result};
use crate::model::Design;

/// Counters and history of one optimizer run.
///
/// `eig_evaluations` counts the evaluations issued by the swap scans —
/// exactly `d − r` per swap step, the incumbent being served from the cached
/// current value — so a converged run satisfies
/// `eig_evaluations = loops · r · (d − r)`.
#[derive(Debug, Clone)]
pub struct OptimizerTrace {
    pub loops: usize,
    pub swaps: usize,
    pub eig_evaluations: usize,
    pub eig_history: Vec<f64>,
    pub final_design: Design,
    pub final_value: f64,
    /// False when the loop cap stopped a run that was still swapping.
    pub converged: bool,
}

/// Initial design: the `r` rows of the leverage basis with the largest
/// Euclidean row norms, ties broken toward the lower index.
pub fn leverage_init(basis: &DMatrix<f64>, r: usize) -> Result<Design> {
    let d = basis.nrows();
    if r > d {
        return Err(Error::InvalidDesign(format!(
            "cannot place {r} sensors among {d} candidates"
        )));
    }
    let mut scored: Vec<(usize, f64)> = (0..d)
        .map(|i| (i, basis.row(i).norm_squared()))
        .collect();
    // stable sort keeps the lower index first among exact ties
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite row norms"));
    let chosen: Vec<usize> = scored.iter().take(r).map(|&(i, _)| i).collect();
    Design::new(chosen, d)
}

/// Outcome of one swap step.
#[derive(Debug, Clone)]
pub struct SwapOutcome {
    pub design: Design,
    pub value: f64,
    /// Fresh evaluations issued by the scan, always `d − r`.
    pub evals_used: usize,
    pub swapped: bool,
}

/// Try to improve position `t` of the design by swapping it with any
/// candidate outside the design. The incumbent competes through
/// `current_value`; ties keep the incumbent, then prefer the lowest
/// candidate index (candidates are scanned in ascending order).
pub fn swap_step(
    design: &Design,
    t: usize,
    evaluator: &EigEvaluator,
    current_value: f64,
) -> Result<SwapOutcome> {
    let d = evaluator.candidate_count();
    let s_t = *design
        .indices()
        .get(t)
        .ok_or(Error::InvalidDesign(format!("position {t} out of range")))?;
    let mut best_value = current_value;
    let mut best_sensor = s_t;
    let mut evals_used = 0;
    for c in 0..d {
        if design.contains(c) {
            continue;
        }
        let candidate = design.swapped(s_t, c, d)?;
        let v = evaluator.evaluate(&candidate)?;
        evals_used += 1;
        if v > best_value {
            best_value = v;
            best_sensor = c;
        }
    }
    if best_sensor == s_t {
        Ok(SwapOutcome {
            design: design.clone(),
            value: current_value,
            evals_used,
            swapped: false,
        })
    } else {
        Ok(SwapOutcome {
            design: design.swapped(s_t, best_sensor, d)?,
            value: best_value,
            evals_used,
            swapped: true,
        })
    }
}

/// Options for the swapping greedy loop.
#[derive(Debug, Clone)]
pub struct SwappingConfig {
    pub max_loops: usize,
    /// Optional secondary stop: also halt when a full loop improves the EIG
    /// by no more than this. Off by default; "design unchanged over a loop"
    /// is the standard criterion.
    pub value_tolerance: Option<f64>,
}

impl Default for SwappingConfig {
    fn default() -> Self {
        SwappingConfig {
            max_loops: 20,
            value_tolerance: None,
        }
    }
}

/// Swapping greedy optimization of `r` sensors out of the evaluator's `d`
/// candidates. Starts from the leverage-score design (or `init` when given)
/// and sweeps positions `t = 1..r` of the current sorted design, swapping
/// each against all outside candidates, until a full loop makes no change.
pub fn swapping_greedy(
    evaluator: &EigEvaluator,
    r: usize,
    init: Option<Design>,
    cfg: &SwappingConfig,
) -> Result<OptimizerTrace> {
    let d = evaluator.candidate_count();
    if r == 0 || r > d {
        return Err(Error::InvalidDesign(format!(
            "sensor budget {r} out of range for {d} candidates"
        )));
    }
    if cfg.max_loops == 0 {
        return Err(Error::InvalidInput("max_loops must be at least 1".into()));
    }
    let mut design = match init {
        Some(given) => {
            if given.size() != r {
                return Err(Error::InvalidDesign(format!(
                    "initial design has {} sensors, expected {r}",
                    given.size()
                )));
            }
            given
        }
        None => leverage_init(&evaluator.leverage_basis()?, r)?,
    };
    // The initial incumbent value is computed once, outside the per-scan
    // accounting (the scans themselves issue exactly d − r evaluations each).
    let mut current = evaluator.evaluate(&design)?;
    let mut trace = OptimizerTrace {
        loops: 0,
        swaps: 0,
        eig_evaluations: 0,
        eig_history: vec![current],
        final_design: design.clone(),
        final_value: current,
        converged: false,
    };
    while trace.loops < cfg.max_loops {
        trace.loops += 1;
        let loop_start_value = current;
        let mut changed = false;
        for t in 0..r {
            let outcome = swap_step(&design, t, evaluator, current)?;
            trace.eig_evaluations += outcome.evals_used;
            if outcome.swapped {
                trace.swaps += 1;
                changed = true;
            }
            design = outcome.design;
            current = outcome.value;
            trace.eig_history.push(current);
        }
        if !changed {
            trace.converged = true;
            break;
        }
        if let Some(tol) = cfg.value_tolerance {
            if current - loop_start_value <= tol {
                trace.converged = true;
                break;
            }
        }
    }
    trace.final_design = design;
    trace.final_value = current;
    Ok(trace)
}

/// Classical greedy baseline: grow the design one sensor at a time, each
/// addition maximizing the EIG (lowest index on ties). Designs are nested
/// across budgets by construction.
pub fn standard_greedy(evaluator: &EigEvaluator, r: usize) -> Result<(Design, f64)> {
    let d = evaluator.candidate_count();
    if r == 0 || r > d {
        return Err(Error::InvalidDesign(format!(
            "sensor budget {r} out of range for {d} candidates"
        )));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(r);
    let mut value = 0.0;
    for _ in 0..r {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..d {
            if chosen.contains(&c) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(c);
            let v = evaluator.evaluate(&Design::new(trial, d)?)?;
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((c, v));
            }
        }
        let (c, v) = best.expect("at least one candidate remains");
        chosen.push(c);
        value = v;
    }
    Ok((Design::new(chosen, d)?, value))
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num * (n - i) as u128 / (i + 1) as u128;
        if num > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    num as u64
}

/// Exhaustive search over all `C(d, r)` designs (lexicographic order, first
/// maximum kept), gated by the subset-count cap.
pub fn exhaustive_search(
    evaluator: &EigEvaluator,
    r: usize,
    cap: u64,
) -> Result<(Design, f64, u64)> {
    let d = evaluator.candidate_count();
    if r == 0 || r > d {
        return Err(Error::InvalidDesign(format!(
            "sensor budget {r} out of range for {d} candidates"
        )));
    }
    let count = binomial(d, r);
    if count > cap {
        return Err(Error::SearchCapExceeded { d, r, cap });
    }
    let mut idx: Vec<usize> = (0..r).collect();
    let mut best_design: Option<Design> = None;
    let mut best_value = f64::NEG_INFINITY;
    let mut evaluated = 0u64;
    loop {
        let design = Design::new(idx.clone(), d)?;
        let v = evaluator.evaluate(&design)?;
        evaluated += 1;
        if v > best_value {
            best_value = v;
            best_design = Some(design);
        }
        // advance to the next lexicographic r-combination of 0..d
        let mut pos = r;
        while pos > 0 && idx[pos - 1] == d - r + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for q in pos..r {
            idx[q] = idx[q - 1] + 1;
        }
    }
    Ok((best_design.expect("at least one design"), best_value, evaluated))
}

/// `n` designs drawn uniformly over the r-subsets with a seeded generator,
/// each evaluated once.
pub fn random_design_sample(
    evaluator: &EigEvaluator,
    r: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<(Design, f64)>> {
    let d = evaluator.candidate_count();
    if r == 0 || r > d {
        return Err(Error::InvalidDesign(format!(
            "sensor budget {r} out of range for {d} candidates"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let pick = rand::seq::index::sample(&mut rng, d, r).into_vec();
        let design = Design::new(pick, d)?;
        let v = evaluator.evaluate(&design)?;
        out.push((design, v));
    }
    Ok(out)
}
