//! Randomized Frank-Wolfe for `min 1/2 ||X alpha - y||^2  s.t. ||alpha||_1 <= delta`.
//!
//! Each iteration evaluates gradient coordinates `-sigma_i + z_i^T (X alpha)`
//! only on a sampled candidate set, moves toward the best signed vertex
//! `delta_tilde * e_i` with an exact line search, and keeps `X alpha`,
//! `S = ||X alpha||^2` and `F = y^T X alpha` up to date so the objective is
//! available without touching the data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{validate_coef, LassoData, Solution, StopReason};
use crate::sampling::{draw_subset, SamplingPlan};
use crate::sparse::{col_axpy, col_dot_dense, full_gradient, OpCounter};

/// Coefficients with magnitude below this are dropped after each rescale.
pub const PRUNE_THRESHOLD: f64 = 1e-14;
/// Line-search denominators at or below this mean the direction is null.
pub const DENOMINATOR_FLOOR: f64 = 1e-30;
/// Relative tolerance of the periodic cache audits.
pub const AUDIT_TOLERANCE: f64 = 1e-8;

/// The constrained problem: shared data plus the l1 radius.
#[derive(Debug, Clone, Copy)]
pub struct FwProblem<'a> {
    pub data: &'a LassoData,
    pub delta: f64,
}

impl<'a> FwProblem<'a> {
    pub fn new(data: &'a LassoData, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Contract(format!("l1 radius must be > 0, got {delta}")));
        }
        Ok(FwProblem { data, delta })
    }

    fn stationary_threshold(&self) -> f64 {
        let sigma_inf = self
            .data
            .sigma()
            .iter()
            .fold(0.0f64, |acc, s| acc.max(s.abs()));
        1e-14 * (1.0 + sigma_inf)
    }
}

/// Sparse coefficient vector: dense values plus the list of nonzero slots.
#[derive(Debug, Clone)]
pub struct SparseCoef {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl SparseCoef {
    pub fn zeros(p: usize) -> Self {
        SparseCoef {
            values: vec![0.0; p],
            support: Vec::new(),
        }
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.support.iter().map(|&j| self.values[j].abs()).sum()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Nonzero `(index, value)` pairs sorted by index.
    pub fn to_pairs(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self.support.iter().map(|&j| (j, self.values[j])).collect();
        out.sort_by_key(|(j, _)| *j);
        out
    }

    pub fn to_dense(&self) -> Vec<f64> {
        self.values.clone()
    }
}

/// Iterate of the solver with its cached products.
#[derive(Debug, Clone)]
pub struct FwState {
    coef: SparseCoef,
    x_alpha: Vec<f64>,
    s: f64,
    f: f64,
    k: usize,
}

impl FwState {
    pub fn zero(problem: &FwProblem) -> Self {
        FwState {
            coef: SparseCoef::zeros(problem.data.n_features()),
            x_alpha: vec![0.0; problem.data.n_samples()],
            s: 0.0,
            f: 0.0,
            k: 0,
        }
    }

    /// Starts from `warm`, which must already lie in the ball. `X alpha`, `S`
    /// and `F` are rebuilt from scratch with one axpy per nonzero.
    pub fn warm(problem: &FwProblem, warm: &[(usize, f64)], ctr: &mut OpCounter) -> Result<Self> {
        let data = problem.data;
        let coef_pairs = validate_coef(warm, data.n_features())?;
        let l1: f64 = coef_pairs.iter().map(|(_, v)| v.abs()).sum();
        if l1 > problem.delta * (1.0 + 1e-9) {
            return Err(Error::Contract(format!(
                "warm start has l1 norm {l1} > delta {}",
                problem.delta
            )));
        }
        let mut state = Self::zero(problem);
        for &(j, v) in &coef_pairs {
            state.coef.values[j] = v;
            state.coef.support.push(j);
            col_axpy(data.x(), j, v, &mut state.x_alpha, ctr);
        }
        state.s = state.x_alpha.iter().map(|v| v * v).sum();
        state.f = coef_pairs.iter().map(|&(j, v)| v * data.sigma()[j]).sum();
        Ok(state)
    }

    pub fn coef(&self) -> &SparseCoef {
        &self.coef
    }

    pub fn x_alpha(&self) -> &[f64] {
        &self.x_alpha
    }

    /// Recursively tracked `||X alpha||^2`.
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Recursively tracked `y^T X alpha`.
    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    /// `1/2 y^T y + 1/2 S - F`.
    pub fn objective(&self, problem: &FwProblem) -> f64 {
        0.5 * problem.data.yty() + 0.5 * self.s - self.f
    }
}

/// The selected vertex `delta_tilde * e_index` and the gradient coordinate
/// that chose it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub index: usize,
    pub delta_tilde: f64,
    pub grad: f64,
}

/// Best vertex over `sample`: largest `|grad_i|`, lowest index on ties,
/// `sign(0) = +1`. Costs one dot product per sampled index.
pub fn select_vertex(
    state: &FwState,
    problem: &FwProblem,
    sample: &[usize],
    ctr: &mut OpCounter,
) -> Vertex {
    assert!(!sample.is_empty(), "candidate sample must be nonempty");
    let data = problem.data;
    let mut best: Option<(usize, f64)> = None;
    for &i in sample {
        let g = col_dot_dense(data.x(), i, &state.x_alpha, ctr) - data.sigma()[i];
        best = match best {
            None => Some((i, g)),
            Some((bi, bg)) => {
                if g.abs() > bg.abs() || (g.abs() == bg.abs() && i < bi) {
                    Some((i, g))
                } else {
                    Some((bi, bg))
                }
            }
        };
    }
    let (index, grad) = best.expect("sample is nonempty");
    let sign = if grad >= 0.0 { 1.0 } else { -1.0 };
    Vertex {
        index,
        delta_tilde: -problem.delta * sign,
        grad,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    /// Step in `[0, 1]`.
    pub step: f64,
    /// Unclamped minimizer (0 when the direction is null).
    pub unclamped: f64,
    /// The direction `delta_tilde z_i - X alpha` is numerically null.
    pub null_direction: bool,
}

/// Exact minimizer of the objective along the segment toward `vertex`,
/// clamped to `[0, 1]`. Uses only cached scalars.
pub fn line_search(state: &FwState, problem: &FwProblem, vertex: &Vertex) -> Result<LineSearch> {
    let data = problem.data;
    let i = vertex.index;
    let dt = vertex.delta_tilde;
    // G = z_i^T X alpha
    let g_big = vertex.grad + data.sigma()[i];
    let numerator = state.s - dt * vertex.grad - state.f;
    let denominator = state.s - 2.0 * dt * g_big + dt * dt * data.col_norms_sq()[i];
    if !numerator.is_finite() || !denominator.is_finite() {
        return Err(Error::Numeric {
            context: "line search",
            state: format!(
                "k={} i={i} delta_tilde={dt} grad={} S={} F={} num={numerator} den={denominator}",
                state.k, vertex.grad, state.s, state.f
            ),
        });
    }
    if denominator <= DENOMINATOR_FLOOR {
        return Ok(LineSearch {
            step: 0.0,
            unclamped: 0.0,
            null_direction: true,
        });
    }
    let unclamped = numerator / denominator;
    Ok(LineSearch {
        step: unclamped.clamp(0.0, 1.0),
        unclamped,
        null_direction: false,
    })
}

/// `alpha <- (1 - step) alpha + step * delta_tilde e_i`, with the cached
/// products updated to match. Returns `max_j |alpha_new_j - alpha_old_j|`.
pub fn apply_step(
    state: &mut FwState,
    problem: &FwProblem,
    vertex: &Vertex,
    step: f64,
    ctr: &mut OpCounter,
) -> f64 {
    debug_assert!((0.0..=1.0).contains(&step));
    state.k += 1;
    if step == 0.0 {
        return 0.0;
    }
    let data = problem.data;
    let i = vertex.index;
    let dt = vertex.delta_tilde;
    let keep = 1.0 - step;
    let added = dt * step;

    let mut max_change = 0.0f64;
    let coef = &mut state.coef;
    let mut seen_i = false;
    for &j in &coef.support {
        let old = coef.values[j];
        let mut new = old * keep;
        if j == i {
            new += added;
            seen_i = true;
        }
        max_change = max_change.max((new - old).abs());
        coef.values[j] = new;
    }
    if !seen_i {
        coef.values[i] = added;
        coef.support.push(i);
        max_change = max_change.max(added.abs());
    }
    let values = &mut coef.values;
    coef.support.retain(|&j| {
        if values[j].abs() < PRUNE_THRESHOLD {
            values[j] = 0.0;
            false
        } else {
            true
        }
    });

    let g_big = vertex.grad + data.sigma()[i];
    state.s = keep * keep * state.s
        + 2.0 * dt * step * keep * g_big
        + dt * dt * step * step * data.col_norms_sq()[i];
    state.f = keep * state.f + added * data.sigma()[i];

    for v in state.x_alpha.iter_mut() {
        *v *= keep;
    }
    col_axpy(data.x(), i, added, &mut state.x_alpha, ctr);
    max_change
}

/// Frank-Wolfe duality gap `alpha^T grad + delta ||grad||_inf`; costs `p`
/// dot products.
pub fn duality_gap(state: &FwState, problem: &FwProblem, ctr: &mut OpCounter) -> f64 {
    let grad = full_gradient(problem.data.x(), &state.x_alpha, problem.data.sigma(), ctr);
    let inner: f64 = state
        .coef
        .support
        .iter()
        .map(|&j| state.coef.values[j] * grad[j])
        .sum();
    let inf = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    inner + problem.delta * inf
}

/// Deviations of the cached quantities from direct recomputation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub iteration: usize,
    pub x_alpha_err: f64,
    pub s_err: f64,
    pub f_err: f64,
    pub objective_recursive: f64,
    pub objective_direct: f64,
}

impl AuditReport {
    pub fn check(&self, problem: &FwProblem) -> Result<()> {
        let y_inf = problem
            .data
            .y()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        let obj_tol = AUDIT_TOLERANCE * (1.0 + self.objective_direct.abs());
        let obj_err = (self.objective_recursive - self.objective_direct).abs();
        if self.x_alpha_err > AUDIT_TOLERANCE * (1.0 + y_inf) || obj_err > obj_tol {
            return Err(Error::AuditFailed {
                iteration: self.iteration,
                detail: format!("{self:?}"),
            });
        }
        Ok(())
    }
}

/// Recomputes `X alpha`, `S` and `F` directly and compares them with the
/// cached values. Uncounted.
pub fn audit_state(state: &FwState, problem: &FwProblem) -> AuditReport {
    let data = problem.data;
    let pairs = state.coef.to_pairs();
    let direct = data.x().mul_sparse(&pairs);
    let x_alpha_err = direct
        .iter()
        .zip(&state.x_alpha)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let s_direct: f64 = direct.iter().map(|v| v * v).sum();
    let f_direct: f64 = direct.iter().zip(data.y()).map(|(a, b)| a * b).sum();
    AuditReport {
        iteration: state.k,
        x_alpha_err,
        s_err: (state.s - s_direct).abs() / (1.0 + s_direct.abs()),
        f_err: (state.f - f_direct).abs() / (1.0 + f_direct.abs()),
        objective_recursive: state.objective(problem),
        objective_direct: data.loss(&pairs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop when `||alpha_{k+1} - alpha_k||_inf <= epsilon`.
    CoefficientChange,
    /// Stop when the duality gap (evaluated every iteration, `p` extra dot
    /// products each) is `<= epsilon`.
    DualityGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    Off,
    /// One row every `n` iterations (and at the last one).
    Every(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FwOptions {
    pub epsilon: f64,
    pub stop_rule: StopRule,
    pub max_iter: usize,
    pub sampling: SamplingPlan,
    /// Cache audits every this many iterations; 0 disables them.
    pub check_interval: usize,
    pub trace: TraceLevel,
    /// Attach the duality gap to trace rows every `n` iterations. The gap
    /// evaluations are not charged to the solve's counters.
    pub audit_gap: Option<usize>,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions {
            epsilon: 1e-3,
            stop_rule: StopRule::CoefficientChange,
            max_iter: 100_000,
            sampling: SamplingPlan::deterministic(),
            check_interval: 100,
            trace: TraceLevel::Off,
            audit_gap: None,
        }
    }
}

impl FwOptions {
    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Contract(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Contract("max_iter must be >= 1".into()));
        }
        if let TraceLevel::Every(0) = self.trace {
            return Err(Error::Contract("trace interval must be >= 1".into()));
        }
        if self.audit_gap == Some(0) {
            return Err(Error::Contract("gap audit interval must be >= 1".into()));
        }
        self.sampling.validate(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub objective: f64,
    pub nnz: usize,
    pub dot_products: u64,
    pub gap: Option<f64>,
}

pub type Trace = Vec<TraceRow>;

/// What one iteration did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub kappa: usize,
    pub vertex: Vertex,
    pub step: f64,
    pub max_change: f64,
    /// Best sampled gradient coordinate was numerically zero, or the
    /// direction was null; no move was made.
    pub skipped: bool,
}

/// A solve in progress. Owns its state, generator and counters; the problem
/// is borrowed immutably.
pub struct FwRun<'p, 'a> {
    problem: &'p FwProblem<'a>,
    plan: SamplingPlan,
    state: FwState,
    rng: ChaCha8Rng,
    ctr: OpCounter,
    stationary_threshold: f64,
}

impl<'p, 'a> FwRun<'p, 'a> {
    pub fn new(
        problem: &'p FwProblem<'a>,
        plan: SamplingPlan,
        warm_start: Option<&[(usize, f64)]>,
    ) -> Result<Self> {
        plan.validate(problem.data.n_features())?;
        let mut ctr = OpCounter::new();
        let state = match warm_start {
            Some(w) => FwState::warm(problem, w, &mut ctr)?,
            None => FwState::zero(problem),
        };
        Ok(FwRun {
            problem,
            plan,
            state,
            rng: ChaCha8Rng::seed_from_u64(plan.seed),
            ctr,
            stationary_threshold: problem.stationary_threshold(),
        })
    }

    pub fn state(&self) -> &FwState {
        &self.state
    }

    pub fn counters(&self) -> OpCounter {
        self.ctr
    }

    pub fn objective(&self) -> f64 {
        self.state.objective(self.problem)
    }

    /// Sample size the next iteration will use.
    pub fn next_kappa(&self) -> usize {
        self.plan
            .kappa(self.problem.data.n_features(), self.state.coef.nnz())
    }

    /// Duality gap of the current iterate, charged to `ctr`.
    pub fn duality_gap(&self, ctr: &mut OpCounter) -> f64 {
        duality_gap(&self.state, self.problem, ctr)
    }

    pub fn audit(&self) -> AuditReport {
        audit_state(&self.state, self.problem)
    }

    /// One randomized iteration.
    pub fn step(&mut self) -> Result<StepInfo> {
        let kappa = self.next_kappa();
        self.step_with(kappa)
    }

    /// One iteration over every coordinate, whatever the plan says.
    pub fn full_step(&mut self) -> Result<StepInfo> {
        self.step_with(self.problem.data.n_features())
    }

    fn step_with(&mut self, kappa: usize) -> Result<StepInfo> {
        let p = self.problem.data.n_features();
        let sample = draw_subset(p, kappa, &mut self.rng);
        let vertex = select_vertex(&self.state, self.problem, &sample, &mut self.ctr);
        let mut skipped = vertex.grad.abs() <= self.stationary_threshold;
        let step = if skipped {
            0.0
        } else {
            let ls = line_search(&self.state, self.problem, &vertex)?;
            skipped = ls.null_direction;
            ls.step
        };
        let max_change = apply_step(&mut self.state, self.problem, &vertex, step, &mut self.ctr);
        Ok(StepInfo {
            kappa,
            vertex,
            step,
            max_change,
            skipped,
        })
    }

    pub fn into_state(self) -> (FwState, OpCounter) {
        (self.state, self.ctr)
    }
}

/// Runs the solver to its stopping rule.
pub fn solve(
    problem: &FwProblem,
    options: &FwOptions,
    warm_start: Option<&[(usize, f64)]>,
) -> Result<(Solution, Trace)> {
    let p = problem.data.n_features();
    options.validate(p)?;
    let mut run = FwRun::new(problem, options.sampling, warm_start)?;
    let mut trace = Trace::new();
    let mut audit_ctr = OpCounter::new();
    let mut stop_reason = StopReason::MaxIter;

    let mut confirm = false;
    for _ in 0..options.max_iter {
        let info = if confirm { run.full_step()? } else { run.step()? };
        confirm = false;
        let k = run.state.k;

        if options.check_interval > 0 && k % options.check_interval == 0 {
            run.audit().check(problem)?;
        }

        let mut gap_now = None;
        let mut stop = None;
        match options.stop_rule {
            StopRule::CoefficientChange => {
                // A sample with no descent vertex leaves alpha unchanged, which
                // says nothing about the full problem; the next iteration then
                // looks at every coordinate.
                if info.step == 0.0 && info.kappa < p {
                    confirm = true;
                } else if info.max_change <= options.epsilon {
                    stop = Some(StopReason::Tolerance);
                }
            }
            StopRule::DualityGap => {
                let mut gap_ctr = OpCounter::new();
                let g = run.duality_gap(&mut gap_ctr);
                run.ctr += gap_ctr;
                gap_now = Some(g);
                if g <= options.epsilon {
                    stop = Some(StopReason::Tolerance);
                }
            }
        }
        if info.skipped && info.kappa == p {
            stop = Some(StopReason::Stationary);
        }

        let last = stop.is_some() || k == options.max_iter;
        if let TraceLevel::Every(n) = options.trace {
            if k % n == 0 || last {
                let gap = match options.audit_gap {
                    Some(every) if k % every == 0 || last => {
                        Some(gap_now.unwrap_or_else(|| run.duality_gap(&mut audit_ctr)))
                    }
                    _ => None,
                };
                trace.push(TraceRow {
                    k,
                    objective: run.objective(),
                    nnz: run.state.coef.nnz(),
                    dot_products: run.ctr.dot_products,
                    gap,
                });
            }
        }
        if let Some(reason) = stop {
            stop_reason = reason;
            break;
        }
    }

    let (state, counters) = run.into_state();
    let solution = Solution {
        coef: state.coef.to_pairs(),
        objective: state.objective(problem),
        iterations: state.k,
        stop_reason,
        counters,
    };
    Ok((solution, trace))
}
