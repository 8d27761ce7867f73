//! Cyclic and stochastic coordinate descent for the penalized Lasso
//! `1/2 ||X alpha - y||^2 + lambda ||alpha||_1`, residual-update form.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{validate_coef, LassoData, Solution, StopReason};
use crate::sparse::{col_axpy, col_dot_dense, OpCounter};

#[derive(Debug, Clone, Copy)]
pub struct CdProblem<'a> {
    pub data: &'a LassoData,
    pub lambda: f64,
}

impl<'a> CdProblem<'a> {
    pub fn new(data: &'a LassoData, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Contract(format!("penalty must be >= 0, got {lambda}")));
        }
        Ok(CdProblem { data, lambda })
    }

    /// `1/2 ||X alpha - y||^2 + lambda ||alpha||_1`.
    pub fn penalized_objective(&self, coef: &[(usize, f64)]) -> f64 {
        self.data.loss(coef) + self.lambda * coef.iter().map(|(_, v)| v.abs()).sum::<f64>()
    }
}

/// `sign(x) * max(|x| - t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdOrder {
    Cyclic,
    RandomPermutation,
    /// `p` coordinates drawn with replacement per epoch.
    IidUniform,
}

#[derive(Debug, Clone)]
pub struct CdState {
    coef: Vec<f64>,
    residual: Vec<f64>,
    epoch: usize,
}

impl CdState {
    pub fn zero(data: &LassoData) -> Self {
        CdState {
            coef: vec![0.0; data.n_features()],
            residual: data.y().to_vec(),
            epoch: 0,
        }
    }

    pub fn warm(data: &LassoData, warm: &[(usize, f64)], ctr: &mut OpCounter) -> Result<Self> {
        let pairs = validate_coef(warm, data.n_features())?;
        let mut state = Self::zero(data);
        for (j, v) in pairs {
            state.coef[j] = v;
            col_axpy(data.x(), j, -v, &mut state.residual, ctr);
        }
        Ok(state)
    }

    pub fn coef(&self) -> &[f64] {
        &self.coef
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn coef_pairs(&self) -> Vec<(usize, f64)> {
        self.coef
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect()
    }

    pub fn loss(&self) -> f64 {
        0.5 * self.residual.iter().map(|r| r * r).sum::<f64>()
    }

    /// `||R - (y - X alpha)||_inf`, by direct recomputation.
    pub fn residual_drift(&self, data: &LassoData) -> f64 {
        let xa = data.x().mul_dense(&self.coef);
        self.residual
            .iter()
            .zip(data.y().iter().zip(&xa))
            .fold(0.0f64, |acc, (r, (y, a))| acc.max((r - (y - a)).abs()))
    }
}

fn update_coordinate(
    state: &mut CdState,
    problem: &CdProblem,
    j: usize,
    ctr: &mut OpCounter,
) -> f64 {
    let data = problem.data;
    let norm_sq = data.col_norms_sq()[j];
    if norm_sq == 0.0 {
        return 0.0;
    }
    ctr.touch();
    let old = state.coef[j];
    let rho = col_dot_dense(data.x(), j, &state.residual, ctr) + old * norm_sq;
    let new = soft_threshold(rho, problem.lambda) / norm_sq;
    let delta = new - old;
    if delta != 0.0 {
        state.coef[j] = new;
        col_axpy(data.x(), j, -delta, &mut state.residual, ctr);
    }
    delta.abs()
}

/// One pass over the coordinates (or over `subset` when given). Returns the
/// largest coefficient change.
pub fn cd_epoch(
    state: &mut CdState,
    problem: &CdProblem,
    order: CdOrder,
    rng: &mut ChaCha8Rng,
    ctr: &mut OpCounter,
    subset: Option<&[usize]>,
) -> f64 {
    run_epoch(state, problem, order, rng, ctr, subset).0
}

/// Like `cd_epoch`, also reporting whether every coordinate of the pass was
/// visited (always true except for iid draws).
fn run_epoch(
    state: &mut CdState,
    problem: &CdProblem,
    order: CdOrder,
    rng: &mut ChaCha8Rng,
    ctr: &mut OpCounter,
    subset: Option<&[usize]>,
) -> (f64, bool) {
    let p = problem.data.n_features();
    let mut coords: Vec<usize> = match subset {
        Some(s) => s.to_vec(),
        None => (0..p).collect(),
    };
    let mut covered = true;
    match order {
        CdOrder::Cyclic => {}
        CdOrder::RandomPermutation => coords.shuffle(rng),
        CdOrder::IidUniform => {
            let n = coords.len();
            let mut seen = vec![false; n];
            coords = (0..n)
                .map(|_| {
                    let k = rng.random_range(0..n);
                    seen[k] = true;
                    coords[k]
                })
                .collect();
            covered = seen.iter().all(|&v| v);
        }
    }
    let mut max_delta = 0.0f64;
    for j in coords {
        max_delta = max_delta.max(update_coordinate(state, problem, j, ctr));
    }
    state.epoch += 1;
    (max_delta, covered)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdOptions {
    pub epsilon: f64,
    pub max_epochs: usize,
    pub order: CdOrder,
    pub seed: u64,
    /// Sweep only the current nonzeros between full passes.
    pub active_set: bool,
    /// Residual audits every this many epochs; 0 disables them.
    pub check_interval: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            epsilon: 1e-3,
            max_epochs: 100_000,
            order: CdOrder::Cyclic,
            seed: 0,
            active_set: false,
            check_interval: 100,
        }
    }
}

fn audit_residual(state: &CdState, data: &LassoData) -> Result<()> {
    let y_inf = data.y().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let drift = state.residual_drift(data);
    if drift > 1e-8 * (1.0 + y_inf) {
        return Err(Error::AuditFailed {
            iteration: state.epoch,
            detail: format!("residual drift {drift:e}"),
        });
    }
    Ok(())
}

/// Epochs until the largest coefficient change is `<= epsilon`. An iid epoch
/// only counts as converged if it visited every coordinate. With the
/// active-set option, converged sweeps over the support are confirmed by a
/// full pass; every epoch (full or active) counts as one iteration.
pub fn solve_penalized(
    problem: &CdProblem,
    options: &CdOptions,
    warm_start: Option<&[(usize, f64)]>,
) -> Result<Solution> {
    if !(options.epsilon > 0.0) || options.max_epochs == 0 {
        return Err(Error::Contract(
            "epsilon must be > 0 and max_epochs >= 1".into(),
        ));
    }
    let data = problem.data;
    let mut ctr = OpCounter::new();
    let mut state = match warm_start {
        Some(w) => CdState::warm(data, w, &mut ctr)?,
        None => CdState::zero(data),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut stop_reason = StopReason::MaxIter;
    let mut full_pass = true;

    while state.epoch < options.max_epochs {
        let active: Vec<usize>;
        let subset = if options.active_set && !full_pass {
            active = (0..data.n_features()).filter(|&j| state.coef[j] != 0.0).collect();
            Some(active.as_slice())
        } else {
            None
        };
        let (max_delta, covered) =
            run_epoch(&mut state, problem, options.order, &mut rng, &mut ctr, subset);
        if options.check_interval > 0 && state.epoch % options.check_interval == 0 {
            audit_residual(&state, data)?;
        }
        if max_delta <= options.epsilon {
            if subset.is_none() && covered {
                stop_reason = StopReason::Tolerance;
                break;
            }
            full_pass = true;
        } else if options.active_set {
            full_pass = false;
        }
    }

    let coef = state.coef_pairs();
    Ok(Solution {
        objective: state.loss(),
        coef,
        iterations: state.epoch,
        stop_reason,
        counters: ctr,
    })
}
