//! Greedy drivers: certified and scheduled runs, training schedules,
//! snapshot caches and run traces.

use crate::error::{Error, Result};
use crate::fem::{HiFiSystem, Snapshot};
use crate::greedy::residual::{ResidualEstimator, ResidualScratch};
use crate::greedy::ReducedBasis;
use crate::params::{ParameterVector, SamplingMeasure};
use crate::polytools::CertifiedBudget;
use crate::stream::{derive_rng, Role};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Which quantity the greedy maximization uses: the exact projection error
/// `e_n(y)` (one FEM solve per candidate) or the residual dual-norm surrogate
/// (no FEM-dimension work per candidate, frame constants uncertified).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Exact,
    Residual,
}

impl std::str::FromStr for Selector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Selector::Exact),
            "residual" => Ok(Selector::Residual),
            other => Err(Error::invalid(format!("unknown selector '{other}'"))),
        }
    }
}

/// How training sets evolve over the steps of a scheduled run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainingSchedule {
    /// Fresh independent draws of size `floor(n^beta)` at step `n`.
    FreshPerStep { beta: f64 },
    /// One growing pool, topped up to size `floor(n^beta)` at step `n`.
    CumulativePool { beta: f64 },
    /// One fixed pool drawn up front (the epsilon-net surrogate baseline).
    FixedPool { size: usize },
}

impl TrainingSchedule {
    pub fn beta(&self) -> Option<f64> {
        match self {
            TrainingSchedule::FreshPerStep { beta } | TrainingSchedule::CumulativePool { beta } => {
                Some(*beta)
            }
            TrainingSchedule::FixedPool { .. } => None,
        }
    }

    /// Training set size at 1-based step `n`.
    pub fn size_at(&self, n: usize) -> usize {
        match self {
            TrainingSchedule::FreshPerStep { beta } | TrainingSchedule::CumulativePool { beta } => {
                (n as f64).powf(*beta).floor() as usize
            }
            TrainingSchedule::FixedPool { size } => *size,
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            TrainingSchedule::FreshPerStep { .. } => "fresh",
            TrainingSchedule::CumulativePool { .. } => "cumulative",
            TrainingSchedule::FixedPool { .. } => "fixed",
        }
    }
}

/// Per-step record of a greedy run. `n` is the 1-based step index;
/// `sigma_hat` is the maximum over the step's training set of the selection
/// quantity evaluated with the basis of size `n - 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyStepRecord {
    pub n: usize,
    pub train_size: usize,
    pub chosen_y: Vec<f64>,
    pub sigma_hat: f64,
    pub sigma_val: Option<f64>,
    /// `sigma_hat / (validation max before extension)`: the observed weak
    /// greedy parameter against the validation proxy for `sigma_n`.
    pub gamma_observed: Option<f64>,
    pub extended: bool,
    pub retries: u32,
    pub wall_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    HitTolerance,
    HitStepCap,
    HitScheduleEnd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub mode: String,
    pub master_seed: u64,
    pub tags: Vec<u64>,
    pub measure: SamplingMeasure,
    pub selector: Selector,
    pub param_dim: usize,
    pub grid_n: usize,
    pub beta: Option<f64>,
    pub pool_mode: Option<String>,
    pub budget: Option<CertifiedBudget>,
    pub threshold: Option<f64>,
    pub step_cap: Option<u64>,
    pub steps: Vec<GreedyStepRecord>,
    pub termination: Termination,
    /// Total number of error (bound) evaluations, `sum_n N_n`.
    pub eval_count: u64,
    pub wall_us: u64,
}

impl GreedyTrace {
    /// Serialization with wall-clock fields zeroed; two runs with the same
    /// seed and config must agree byte-for-byte on this key.
    pub fn determinism_key(&self) -> String {
        let mut clone = self.clone();
        clone.wall_us = 0;
        for s in &mut clone.steps {
            s.wall_us = 0;
        }
        serde_json::to_string(&clone).expect("trace serializes")
    }
}

/// Solved snapshots for a fixed parameter set, with incrementally maintained
/// squared projection errors against a growing basis. Serves both validation
/// sets and training pools.
#[derive(Debug, Clone)]
pub struct SnapshotCache {
    params: Vec<ParameterVector>,
    snapshots: Vec<Snapshot>,
    err_sq: Vec<f64>,
    applied: usize,
}

impl SnapshotCache {
    pub fn new(params: Vec<ParameterVector>, sys: &HiFiSystem) -> Result<Self> {
        let snapshots = solve_many(sys, &params)?;
        let err_sq = snapshots.iter().map(|s| s.vnorm * s.vnorm).collect();
        Ok(SnapshotCache { params, snapshots, err_sq, applied: 0 })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[ParameterVector] {
        &self.params
    }

    pub fn snapshot(&self, i: usize) -> &Snapshot {
        &self.snapshots[i]
    }

    pub fn error(&self, i: usize) -> f64 {
        self.err_sq[i].sqrt()
    }

    /// Extends the cache with additional parameter points (cumulative pools).
    pub fn push_params(&mut self, params: Vec<ParameterVector>, sys: &HiFiSystem, rb: &ReducedBasis) -> Result<()> {
        // bring existing entries up to the current basis first, so that new
        // entries (projected in full below) agree with the applied counter
        self.sync(rb);
        let new_snaps = solve_many(sys, &params)?;
        for (y, s) in params.into_iter().zip(new_snaps) {
            let e2 = rb.project_error_sq(&s.coeffs, s.vnorm);
            self.params.push(y);
            self.snapshots.push(s);
            self.err_sq.push(e2);
        }
        Ok(())
    }

    /// Applies basis vectors added since the last sync.
    pub fn sync(&mut self, rb: &ReducedBasis) {
        let from = self.applied;
        let to = rb.len();
        if from == to {
            return;
        }
        let s_basis: Vec<&[f64]> = (from..to).map(|i| rb.s_basis_vector(i)).collect();
        self.err_sq
            .par_iter_mut()
            .zip(self.snapshots.par_iter())
            .for_each(|(e2, snap)| {
                let mut acc = *e2;
                for sb in &s_basis {
                    let c: f64 = snap.coeffs.iter().zip(*sb).map(|(a, b)| a * b).sum();
                    acc -= c * c;
                }
                *e2 = acc.max(0.0);
            });
        self.applied = to;
    }

    /// Maximum error and its index (ties to the smallest index).
    pub fn max_error(&self) -> (usize, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, e2) in self.err_sq.iter().enumerate() {
            if *e2 > best.1 {
                best = (i, *e2);
            }
        }
        (best.0, best.1.max(0.0).sqrt())
    }
}

/// Max of `e_n` over a cached validation set (snapshots solved once).
pub fn estimate_true_error(rb: &ReducedBasis, cache: &mut SnapshotCache) -> f64 {
    cache.sync(rb);
    cache.max_error().1
}

const SOLVE_CHUNK: usize = 32;

fn solve_many(sys: &HiFiSystem, params: &[ParameterVector]) -> Result<Vec<Snapshot>> {
    let chunks: Vec<&[ParameterVector]> = params.chunks(SOLVE_CHUNK).collect();
    let solved: Result<Vec<Vec<Snapshot>>> = chunks
        .into_par_iter()
        .map_init(
            || sys.workspace(),
            |ws, chunk| chunk.iter().map(|y| sys.solve(y, ws)).collect::<Result<Vec<_>>>(),
        )
        .collect();
    Ok(solved?.concat())
}

/// Evaluates `e_n` on each training point by solving and projecting; returns
/// the argmax (ties to the smallest index) and the max value. With an empty
/// basis this maximizes the snapshot norm itself.
pub fn greedy_step(
    rb: &ReducedBasis,
    training_set: &[ParameterVector],
    sys: &HiFiSystem,
) -> Result<(ParameterVector, f64)> {
    if training_set.is_empty() {
        return Err(Error::invalid("training set must be nonempty"));
    }
    let errs = eval_exact(sys, rb, training_set)?;
    let (idx, val) = argmax(&errs);
    Ok((training_set[idx].clone(), val))
}

fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, v) in values.iter().enumerate() {
        if *v > best.1 {
            best = (i, *v);
        }
    }
    best
}

fn eval_exact(sys: &HiFiSystem, rb: &ReducedBasis, set: &[ParameterVector]) -> Result<Vec<f64>> {
    let chunks: Vec<&[ParameterVector]> = set.chunks(SOLVE_CHUNK).collect();
    let evals: Result<Vec<Vec<f64>>> = chunks
        .into_par_iter()
        .map_init(
            || sys.workspace(),
            |ws, chunk| {
                chunk
                    .iter()
                    .map(|y| {
                        let snap = sys.solve(y, ws)?;
                        Ok(rb.project_error_sq(&snap.coeffs, snap.vnorm).sqrt())
                    })
                    .collect::<Result<Vec<_>>>()
            },
        )
        .collect();
    Ok(evals?.concat())
}

fn eval_residual(
    est: &ResidualEstimator,
    rb: &ReducedBasis,
    set: &[ParameterVector],
) -> Result<Vec<f64>> {
    let chunks: Vec<&[ParameterVector]> = set.chunks(1024).collect();
    let evals: Result<Vec<Vec<f64>>> = chunks
        .into_par_iter()
        .map_init(ResidualScratch::default, |scratch, chunk| {
            chunk.iter().map(|y| est.eval(rb, y.values(), scratch)).collect::<Result<Vec<_>>>()
        })
        .collect();
    Ok(evals?.concat())
}

/// Draws `n` points and returns them as parameter vectors.
fn draw_set(
    measure: SamplingMeasure,
    d: usize,
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<ParameterVector> {
    measure.sample_set(d, n, rng)
}

struct Engine<'a> {
    sys: &'a HiFiSystem,
    rb: ReducedBasis,
    estimator: Option<ResidualEstimator>,
    selector: Selector,
}

impl<'a> Engine<'a> {
    fn new(sys: &'a HiFiSystem, selector: Selector) -> Self {
        let estimator = match selector {
            Selector::Residual => Some(ResidualEstimator::new(sys)),
            Selector::Exact => None,
        };
        Engine { sys, rb: ReducedBasis::empty(sys.dim(), sys.n()), estimator, selector }
    }

    /// Argmax of the selection quantity over a fresh set.
    fn select(&self, set: &[ParameterVector]) -> Result<(usize, f64)> {
        let errs = match self.selector {
            Selector::Exact => eval_exact(self.sys, &self.rb, set)?,
            Selector::Residual => {
                eval_residual(self.estimator.as_ref().unwrap(), &self.rb, set)?
            }
        };
        Ok(argmax(&errs))
    }

    /// Argmax over a cached pool: exact errors come straight from the cache.
    fn select_pool(&self, pool: &mut SnapshotCache) -> Result<(usize, f64)> {
        match self.selector {
            Selector::Exact => {
                pool.sync(&self.rb);
                Ok(pool.max_error())
            }
            Selector::Residual => {
                let errs =
                    eval_residual(self.estimator.as_ref().unwrap(), &self.rb, pool.params())?;
                Ok(argmax(&errs))
            }
        }
    }

    fn extend(&mut self, snapshot: &Snapshot, y: ParameterVector) -> Result<()> {
        self.rb.extend(snapshot, y, self.sys)?;
        if let Some(est) = &mut self.estimator {
            est.extend(&self.rb, self.sys);
        }
        Ok(())
    }
}

/// The certified greedy run: at each step draws a fresh size-`N` training
/// set, stops as soon as `sigma_hat <= eps/(8 m^alpha)` or after
/// `floor(m^{2 alpha})` completed steps.
pub fn run_certified(
    sys: &HiFiSystem,
    budget: &CertifiedBudget,
    master_seed: u64,
    tags: &[u64],
    mut validation: Option<&mut SnapshotCache>,
    selector: Selector,
) -> Result<(ReducedBasis, GreedyTrace)> {
    let started = Instant::now();
    let threshold = budget.threshold();
    let step_cap = budget.step_cap();
    if budget.n_draws > 200_000_000 {
        return Err(Error::Resource(format!(
            "certified budget needs N = {} draws per step (m = {}); not affordable",
            budget.n_draws, budget.m
        )));
    }
    let d = sys.dim();
    let base = derive_rng(master_seed, Role::Training, tags);
    let mut engine = Engine::new(sys, selector);
    let mut steps = Vec::new();
    let mut eval_count = 0u64;
    let mut termination = Termination::HitStepCap;

    for step in 1..=step_cap.max(1) {
        let step_started = Instant::now();
        let mut rng = base.clone();
        rng.set_stream(2 * step);
        let set = draw_set(budget.measure, d, budget.n_draws as usize, &mut rng);
        let (idx, sigma_hat) = engine.select(&set)?;
        eval_count += set.len() as u64;
        let gamma_observed = validation
            .as_deref_mut()
            .map(|v| {
                v.sync(&engine.rb);
                let (_, vmax) = v.max_error();
                if vmax > 0.0 {
                    sigma_hat / vmax
                } else {
                    1.0
                }
            });

        if sigma_hat <= threshold {
            steps.push(GreedyStepRecord {
                n: step as usize,
                train_size: set.len(),
                chosen_y: set[idx].values().to_vec(),
                sigma_hat,
                sigma_val: validation.as_deref_mut().map(|v| {
                    v.sync(&engine.rb);
                    v.max_error().1
                }),
                gamma_observed,
                extended: false,
                retries: 0,
                wall_us: step_started.elapsed().as_micros() as u64,
            });
            termination = Termination::HitTolerance;
            break;
        }

        let y_star = set[idx].clone();
        let snapshot = sys.solve_alloc(&y_star)?;
        engine.extend(&snapshot, y_star.clone())?;
        let sigma_val = validation.as_deref_mut().map(|v| {
            v.sync(&engine.rb);
            v.max_error().1
        });
        steps.push(GreedyStepRecord {
            n: step as usize,
            train_size: set.len(),
            chosen_y: y_star.values().to_vec(),
            sigma_hat,
            sigma_val,
            gamma_observed,
            extended: true,
            retries: 0,
            wall_us: step_started.elapsed().as_micros() as u64,
        });
    }

    let trace = GreedyTrace {
        mode: "certified".into(),
        master_seed,
        tags: tags.to_vec(),
        measure: budget.measure,
        selector,
        param_dim: d,
        grid_n: sys.mesh.grid_n(),
        beta: None,
        pool_mode: None,
        budget: Some(budget.clone()),
        threshold: Some(threshold),
        step_cap: Some(step_cap),
        steps,
        termination,
        eval_count,
        wall_us: started.elapsed().as_micros() as u64,
    };
    Ok((engine.rb, trace))
}

/// The scheduled greedy run of the numerical study: at step `n` the training
/// set has `floor(n^beta)` points, every step extends the basis, and the
/// validation error is recorded after each extension.
pub fn run_scheduled(
    sys: &HiFiSystem,
    measure: SamplingMeasure,
    schedule: TrainingSchedule,
    n_max: usize,
    master_seed: u64,
    tags: &[u64],
    mut validation: Option<&mut SnapshotCache>,
    selector: Selector,
) -> Result<(ReducedBasis, GreedyTrace)> {
    if n_max < 1 {
        return Err(Error::invalid("n_max must be >= 1"));
    }
    if let Some(beta) = schedule.beta() {
        if beta < 1.0 {
            return Err(Error::invalid("beta must be >= 1"));
        }
    }
    let started = Instant::now();
    let d = sys.dim();
    let base = derive_rng(master_seed, Role::Training, tags);
    let mut engine = Engine::new(sys, selector);
    let mut pool: Option<SnapshotCache> = None;
    let mut steps = Vec::new();
    let mut eval_count = 0u64;

    for step in 1..=n_max {
        let step_started = Instant::now();
        let mut retries = 0u32;
        loop {
            let mut rng = base.clone();
            rng.set_stream(2 * step as u64 + retries as u64);
            let target = schedule.size_at(step);

            // assemble this step's training set
            let (sel_idx, sigma_hat, train_size, y_star, snapshot): (usize, f64, usize, ParameterVector, Snapshot) =
                match schedule {
                    TrainingSchedule::FreshPerStep { .. } => {
                        let set = draw_set(measure, d, target.max(1), &mut rng);
                        let (idx, val) = engine.select(&set)?;
                        let y = set[idx].clone();
                        let snap = sys.solve_alloc(&y)?;
                        (idx, val, set.len(), y, snap)
                    }
                    TrainingSchedule::CumulativePool { .. } | TrainingSchedule::FixedPool { .. } => {
                        let cache = match pool.as_mut() {
                            Some(c) => c,
                            None => {
                                let initial = match schedule {
                                    TrainingSchedule::FixedPool { size } => size,
                                    _ => target.max(1),
                                };
                                let set = draw_set(measure, d, initial, &mut rng);
                                pool = Some(SnapshotCache::new(set, sys)?);
                                pool.as_mut().unwrap()
                            }
                        };
                        if matches!(schedule, TrainingSchedule::CumulativePool { .. })
                            && cache.len() < target
                        {
                            let extra = draw_set(measure, d, target - cache.len(), &mut rng);
                            cache.push_params(extra, sys, &engine.rb)?;
                        }
                        let (idx, val) = engine.select_pool(cache)?;
                        let y = cache.params()[idx].clone();
                        let snap = cache.snapshot(idx).clone();
                        (idx, val, cache.len(), y, snap)
                    }
                };
            let _ = sel_idx;
            eval_count += train_size as u64;

            let gamma_observed = validation.as_deref_mut().map(|v| {
                v.sync(&engine.rb);
                let (_, vmax) = v.max_error();
                if vmax > 0.0 {
                    sigma_hat / vmax
                } else {
                    1.0
                }
            });

            match engine.extend(&snapshot, y_star.clone()) {
                Ok(()) => {
                    let sigma_val = validation.as_deref_mut().map(|v| {
                        v.sync(&engine.rb);
                        v.max_error().1
                    });
                    steps.push(GreedyStepRecord {
                        n: step,
                        train_size,
                        chosen_y: y_star.values().to_vec(),
                        sigma_hat,
                        sigma_val,
                        gamma_observed,
                        extended: true,
                        retries,
                        wall_us: step_started.elapsed().as_micros() as u64,
                    });
                    break;
                }
                Err(Error::Breakdown { residual, tolerance }) => {
                    let retryable = matches!(schedule, TrainingSchedule::FreshPerStep { .. });
                    if retryable && retries == 0 {
                        retries = 1;
                        continue;
                    }
                    return Err(Error::Breakdown { residual, tolerance });
                }
                Err(e) => return Err(e),
            }
        }
    }

    let trace = GreedyTrace {
        mode: "scheduled".into(),
        master_seed,
        tags: tags.to_vec(),
        measure,
        selector,
        param_dim: d,
        grid_n: sys.mesh.grid_n(),
        beta: schedule.beta(),
        pool_mode: Some(schedule.mode_name().to_string()),
        budget: None,
        threshold: None,
        step_cap: None,
        steps,
        termination: Termination::HitScheduleEnd,
        eval_count,
        wall_us: started.elapsed().as_micros() as u64,
    };
    Ok((engine.rb, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_mesh, LoadSpec, SolverKind};
    use crate::params::build_checkerboard_model;

    fn system(grid_n: usize, k: usize, delta: f64) -> HiFiSystem {
        let model = build_checkerboard_model(k, 2.0, delta).unwrap();
        let mesh = build_mesh(grid_n, k).unwrap();
        HiFiSystem::new(mesh, model, &LoadSpec::Constant(1.0), SolverKind::BandedCholesky).unwrap()
    }

    fn feasible_budget(epsilon: f64) -> CertifiedBudget {
        // r = 6, M0 = 0.1 keeps m at the condition-2 floor and N desk-scale.
        CertifiedBudget::new(epsilon, 0.1, 6.0, 0.1, SamplingMeasure::Uniform).unwrap()
    }

    #[test]
    fn schedule_sizes_match_the_power_law() {
        let s = TrainingSchedule::FreshPerStep { beta: 1.0 };
        assert_eq!(s.size_at(1), 1);
        assert_eq!(s.size_at(7), 7);
        let s = TrainingSchedule::FreshPerStep { beta: 1.5 };
        assert_eq!(s.size_at(4), 8);
        let s = TrainingSchedule::FreshPerStep { beta: 2.0 };
        assert_eq!(s.size_at(10), 100);
    }

    #[test]
    fn greedy_step_basics() {
        let sys = system(8, 2, 0.5);
        let rb = ReducedBasis::empty(4, sys.n());
        let mut rng = derive_rng(3, Role::Training, &[0]);
        let single = draw_set(SamplingMeasure::Uniform, 4, 1, &mut rng);
        let (y, sigma) = greedy_step(&rb, &single, &sys).unwrap();
        assert_eq!(y.values(), single[0].values());
        let u = sys.solve_alloc(&y).unwrap();
        assert!((sigma - u.vnorm).abs() < 1e-12);
        assert!(greedy_step(&rb, &[], &sys).is_err());
    }

    #[test]
    fn in_span_points_are_never_selected() {
        let sys = system(8, 2, 0.5);
        let mut rb = ReducedBasis::empty(4, sys.n());
        let mut rng = derive_rng(4, Role::Training, &[1]);
        let set = draw_set(SamplingMeasure::Uniform, 4, 5, &mut rng);
        let u0 = sys.solve_alloc(&set[2]).unwrap();
        rb.extend(&u0, set[2].clone(), &sys).unwrap();
        let (y, _) = greedy_step(&rb, &set, &sys).unwrap();
        assert_ne!(y.values(), set[2].values());
    }

    #[test]
    fn greedy_step_matches_exhaustive_recomputation() {
        let sys = system(8, 2, 0.5);
        let mut rb = ReducedBasis::empty(4, sys.n());
        let mut rng = derive_rng(5, Role::Training, &[2]);
        for _ in 0..2 {
            let y = SamplingMeasure::Uniform.sample(4, &mut rng);
            let u = sys.solve_alloc(&y).unwrap();
            rb.extend(&u, y, &sys).unwrap();
        }
        let set = draw_set(SamplingMeasure::Uniform, 4, 40, &mut rng);
        let (y_star, sigma) = greedy_step(&rb, &set, &sys).unwrap();
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, y) in set.iter().enumerate() {
            let u = sys.solve_alloc(y).unwrap();
            let e = rb.project_error(&u).unwrap();
            if e > best.1 {
                best = (i, e);
            }
        }
        assert_eq!(y_star.values(), set[best.0].values());
        assert_eq!(sigma, best.1);
    }

    #[test]
    fn certified_run_terminates_immediately_for_huge_epsilon() {
        let sys = system(8, 2, 0.5);
        let budget = feasible_budget(1e3);
        let (rb, trace) = run_certified(&sys, &budget, 7, &[], None, Selector::Exact).unwrap();
        assert_eq!(trace.termination, Termination::HitTolerance);
        assert_eq!(trace.steps.len(), 1);
        assert!(!trace.steps[0].extended);
        assert_eq!(rb.len(), 0);
        assert_eq!(trace.eval_count, budget.n_draws);
    }

    #[test]
    fn certified_run_is_deterministic() {
        let sys = system(8, 2, 0.5);
        let budget = feasible_budget(0.05);
        let (rb1, t1) = run_certified(&sys, &budget, 11, &[1], None, Selector::Exact).unwrap();
        let (rb2, t2) = run_certified(&sys, &budget, 11, &[1], None, Selector::Exact).unwrap();
        assert_eq!(t1.determinism_key(), t2.determinism_key());
        assert_eq!(rb1.len(), rb2.len());
        assert_eq!(t1.termination, Termination::HitTolerance);
        // accounting identity: eval_count = steps * N
        assert_eq!(t1.eval_count, t1.steps.len() as u64 * budget.n_draws);
        // sigma_hat at each step equals e_n at the chosen point (exact mode)
        for (i, s) in t1.steps.iter().enumerate() {
            if !s.extended {
                continue;
            }
            // rebuild the basis up to step i and re-evaluate
            let mut rb = ReducedBasis::empty(4, sys.n());
            for prev in &t1.steps[..i] {
                if prev.extended {
                    let y = ParameterVector::new(prev.chosen_y.clone()).unwrap();
                    let u = sys.solve_alloc(&y).unwrap();
                    rb.extend(&u, y, &sys).unwrap();
                }
            }
            let y = ParameterVector::new(s.chosen_y.clone()).unwrap();
            let u = sys.solve_alloc(&y).unwrap();
            let e = rb.project_error(&u).unwrap();
            assert!((e - s.sigma_hat).abs() <= 1e-12 * s.sigma_hat.max(1e-300));
        }
        let _ = rb1;
    }

    #[test]
    fn scheduled_run_records_monotone_validation_errors() {
        let sys = system(8, 2, 0.5);
        let mut rng = derive_rng(21, Role::Validation, &[]);
        let val_params = draw_set(SamplingMeasure::Uniform, 4, 100, &mut rng);
        let mut validation = SnapshotCache::new(val_params, &sys).unwrap();
        let (rb, trace) = run_scheduled(
            &sys,
            SamplingMeasure::Uniform,
            TrainingSchedule::FreshPerStep { beta: 2.0 },
            8,
            33,
            &[2],
            Some(&mut validation),
            Selector::Exact,
        )
        .unwrap();
        assert_eq!(rb.len(), 8);
        assert_eq!(trace.termination, Termination::HitScheduleEnd);
        let vals: Vec<f64> = trace.steps.iter().map(|s| s.sigma_val.unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "validation error increased: {w:?}");
        }
        // training sizes follow the schedule
        for (i, s) in trace.steps.iter().enumerate() {
            assert_eq!(s.train_size, (i + 1) * (i + 1));
        }
        assert!(rb.gram_defect(&sys.vmat) < 1e-10);
    }

    #[test]
    fn scheduled_runs_are_deterministic_across_selectors() {
        let sys = system(8, 2, 0.5);
        for selector in [Selector::Exact, Selector::Residual] {
            let run = |seed: u64| {
                run_scheduled(
                    &sys,
                    SamplingMeasure::Uniform,
                    TrainingSchedule::FreshPerStep { beta: 1.5 },
                    6,
                    seed,
                    &[9],
                    None,
                    selector,
                )
                .unwrap()
                .1
            };
            assert_eq!(run(5).determinism_key(), run(5).determinism_key());
            assert_ne!(run(5).determinism_key(), run(6).determinism_key());
        }
    }

    #[test]
    fn fixed_pool_runs_select_distinct_snapshots() {
        let sys = system(8, 2, 0.5);
        let (rb, trace) = run_scheduled(
            &sys,
            SamplingMeasure::Uniform,
            TrainingSchedule::FixedPool { size: 200 },
            6,
            17,
            &[3],
            None,
            Selector::Exact,
        )
        .unwrap();
        assert_eq!(rb.len(), 6);
        for s in &trace.steps {
            assert_eq!(s.train_size, 200);
        }
        // all chosen parameters distinct
        for i in 0..rb.provenance().len() {
            for j in i + 1..rb.provenance().len() {
                assert_ne!(rb.provenance()[i].values(), rb.provenance()[j].values());
            }
        }
    }

    #[test]
    fn cumulative_pool_tracks_the_schedule_size() {
        let sys = system(8, 2, 0.5);
        let (_, trace) = run_scheduled(
            &sys,
            SamplingMeasure::Uniform,
            TrainingSchedule::CumulativePool { beta: 1.5 },
            6,
            19,
            &[4],
            None,
            Selector::Exact,
        )
        .unwrap();
        for (i, s) in trace.steps.iter().enumerate() {
            let n = i + 1;
            assert_eq!(s.train_size, ((n as f64).powf(1.5).floor() as usize).max(1));
        }
    }

    #[test]
    fn estimate_true_error_shrinks_with_the_basis() {
        let sys = system(8, 2, 0.5);
        let mut rng = derive_rng(23, Role::Validation, &[1]);
        let params = draw_set(SamplingMeasure::Uniform, 4, 50, &mut rng);
        let mut cache = SnapshotCache::new(params, &sys).unwrap();
        let mut rb = ReducedBasis::empty(4, sys.n());
        let e0 = estimate_true_error(&rb, &mut cache);
        // empty basis: max of the snapshot norms
        let max_norm = (0..cache.len()).map(|i| cache.snapshot(i).vnorm).fold(0.0, f64::max);
        assert!((e0 - max_norm).abs() < 1e-12);
        let mut prev = e0;
        for _ in 0..5 {
            let y = SamplingMeasure::Uniform.sample(4, &mut rng);
            let u = sys.solve_alloc(&y).unwrap();
            if rb.project_error(&u).unwrap() > 1e-9 {
                rb.extend(&u, y, &sys).unwrap();
            }
            let e = estimate_true_error(&rb, &mut cache);
            assert!(e <= prev + 1e-10);
            prev = e;
        }
    }
}
