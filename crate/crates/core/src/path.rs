//! Regularization paths: log-spaced grids, warm-started sweeps and the
//! per-point metrics (sparsity, iterations, dot products, errors, time).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cd::{solve_penalized, CdOptions, CdOrder, CdProblem};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fw::{self, FwOptions, FwProblem};
use crate::problem::{LassoData, Solution, StopReason};
use crate::sampling::child_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    /// `max / min` of the grid.
    pub ratio: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 100,
            ratio: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Fw,
    Cd,
    Scd,
}

impl SolverKind {
    /// Constrained solvers sweep an ascending radius grid; penalized ones a
    /// descending penalty grid. Both start from the sparsest end.
    pub fn ascending_grid(self) -> bool {
        matches!(self, SolverKind::Fw)
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Fw => "fw",
            SolverKind::Cd => "cd",
            SolverKind::Scd => "scd",
        }
    }
}

/// Geometric grid from `max / ratio` to `max`, endpoints included.
pub fn build_grid(max: f64, spec: GridSpec, ascending: bool) -> Result<Vec<f64>> {
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Contract(format!("grid maximum must be > 0, got {max}")));
    }
    if spec.points < 2 || !(spec.ratio > 1.0) {
        return Err(Error::Contract(
            "grid needs at least 2 points and ratio > 1".into(),
        ));
    }
    let min = max / spec.ratio;
    let n = spec.points - 1;
    let log_min = min.ln();
    let log_step = spec.ratio.ln() / n as f64;
    let mut grid: Vec<f64> = (0..=n)
        .map(|i| match i {
            0 => min,
            i if i == n => max,
            i => (log_min + log_step * i as f64).exp(),
        })
        .collect();
    if !ascending {
        grid.reverse();
    }
    Ok(grid)
}

/// `||X^T y||_inf`.
pub fn lambda_max(data: &LassoData) -> Result<f64> {
    data.lambda_max()
}

/// l1 norm of a tight coordinate-descent solution at `lambda_max / ratio`;
/// the upper end of the radius grid.
pub fn bootstrap_delta_max(data: &LassoData, ratio: f64, eps_ref: f64) -> Result<f64> {
    let lambda_min = data.lambda_max()? / ratio;
    let problem = CdProblem::new(data, lambda_min)?;
    let opts = CdOptions {
        epsilon: eps_ref,
        ..CdOptions::default()
    };
    let sol = solve_penalized(&problem, &opts, None)?;
    if sol.stop_reason != StopReason::Tolerance {
        return Err(Error::Degenerate(format!(
            "coordinate descent did not reach {eps_ref:e} within {} epochs",
            sol.iterations
        )));
    }
    Ok(sol.l1_norm())
}

/// Scales a nonzero previous solution onto the sphere of radius `delta`.
/// A zero solution stays zero.
pub fn rescale_warm_start(prev: &[(usize, f64)], delta: f64) -> Vec<(usize, f64)> {
    let l1: f64 = prev.iter().map(|(_, v)| v.abs()).sum();
    if l1 == 0.0 {
        return Vec::new();
    }
    let factor = delta / l1;
    prev.iter().map(|&(j, v)| (j, v * factor)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathOptions {
    pub fw: FwOptions,
    pub cd: CdOptions,
    /// Master seed; point `i` uses `child_seed(seed, i)`.
    pub seed: u64,
    /// Solve every point from zero, independently and in parallel.
    pub parallel_cold: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            fw: FwOptions::default(),
            cd: CdOptions::default(),
            seed: crate::DEFAULT_SEED,
            parallel_cold: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    /// Radius for fw, penalty for cd/scd.
    pub param: f64,
    pub seed: u64,
    pub coef: Vec<(usize, f64)>,
    pub l1_norm: f64,
    pub nnz: usize,
    /// Objective per training sample, `||X alpha - y||^2 / (2 m)`.
    pub train_mse: f64,
    /// `||X_test alpha - y_test||^2 / m_test`.
    pub test_mse: Option<f64>,
    pub iterations: usize,
    pub dot_products: u64,
    pub wall_time_s: f64,
    pub stop_reason: Option<StopReason>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathAggregate {
    /// Mean number of active features over the points.
    pub mean_nnz: f64,
    pub total_time_s: f64,
    pub total_iterations: usize,
    pub total_dot_products: u64,
}

impl PathAggregate {
    pub fn fold(records: &[PointRecord]) -> Self {
        let n = records.len().max(1) as f64;
        let (nnz, time, iters, dots) = records.iter().fold((0usize, 0.0, 0usize, 0u64), |acc, r| {
            (
                acc.0 + r.nnz,
                acc.1 + r.wall_time_s,
                acc.2 + r.iterations,
                acc.3 + r.dot_products,
            )
        });
        PathAggregate {
            mean_nnz: nnz as f64 / n,
            total_time_s: time,
            total_iterations: iters,
            total_dot_products: dots,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathResult {
    pub solver: SolverKind,
    pub records: Vec<PointRecord>,
    pub aggregate: PathAggregate,
    /// At least one point failed.
    pub partial: bool,
    pub parallel_cold: bool,
}

impl PathResult {
    /// Index of the point with the smallest test error, if test data was given.
    pub fn best_test_point(&self) -> Option<&PointRecord> {
        self.records
            .iter()
            .filter(|r| r.test_mse.is_some())
            .min_by(|a, b| a.test_mse.unwrap().total_cmp(&b.test_mse.unwrap()))
    }
}

fn test_mse(test: &Dataset, coef: &[(usize, f64)]) -> f64 {
    let pred = test.x().mul_sparse(coef);
    let sse: f64 = pred
        .iter()
        .zip(test.y())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sse / test.n_samples() as f64
}

fn solve_point(
    data: &LassoData,
    solver: SolverKind,
    param: f64,
    seed: u64,
    options: &PathOptions,
    warm: Option<&[(usize, f64)]>,
) -> Result<Solution> {
    match solver {
        SolverKind::Fw => {
            let problem = FwProblem::new(data, param)?;
            let mut fw_opts = options.fw.clone();
            fw_opts.sampling.seed = seed;
            fw_opts.trace = fw::TraceLevel::Off;
            let start = warm.map(|w| rescale_warm_start(w, param));
            fw::solve(&problem, &fw_opts, start.as_deref()).map(|(s, _)| s)
        }
        SolverKind::Cd | SolverKind::Scd => {
            let problem = CdProblem::new(data, param)?;
            let mut cd_opts = options.cd.clone();
            cd_opts.seed = seed;
            if solver == SolverKind::Scd {
                cd_opts.order = CdOrder::IidUniform;
            }
            solve_penalized(&problem, &cd_opts, warm)
        }
    }
}

fn record(
    data: &LassoData,
    index: usize,
    param: f64,
    seed: u64,
    outcome: Result<Solution>,
    elapsed: f64,
    test: Option<&Dataset>,
) -> PointRecord {
    match outcome {
        Ok(sol) => PointRecord {
            index,
            param,
            seed,
            l1_norm: sol.l1_norm(),
            nnz: sol.nnz(),
            train_mse: sol.objective / data.n_samples() as f64,
            test_mse: test.map(|t| test_mse(t, &sol.coef)),
            iterations: sol.iterations,
            dot_products: sol.counters.dot_products,
            wall_time_s: elapsed,
            stop_reason: Some(sol.stop_reason),
            error: None,
            coef: sol.coef,
        },
        Err(e) => PointRecord {
            index,
            param,
            seed,
            coef: Vec::new(),
            l1_norm: 0.0,
            nnz: 0,
            train_mse: f64::NAN,
            test_mse: None,
            iterations: 0,
            dot_products: 0,
            wall_time_s: elapsed,
            stop_reason: None,
            error: Some(e.to_string()),
        },
    }
}

/// Solves every grid point. Warm-started runs go from the sparsest end and
/// reuse the previous solution (rescaled onto the new radius for fw);
/// failures are recorded and the sweep continues from the last good point.
pub fn run_path(
    data: &LassoData,
    solver: SolverKind,
    grid: &[f64],
    options: &PathOptions,
    test: Option<&Dataset>,
) -> Result<PathResult> {
    if grid.is_empty() {
        return Err(Error::Contract("empty parameter grid".into()));
    }
    let monotone = grid.windows(2).all(|w| {
        if solver.ascending_grid() {
            w[1] > w[0]
        } else {
            w[1] < w[0]
        }
    });
    if !monotone {
        return Err(Error::Contract(format!(
            "{} grid must be strictly {}",
            solver.name(),
            if solver.ascending_grid() { "increasing" } else { "decreasing" }
        )));
    }
    if let Some(t) = test {
        if t.n_features() != data.n_features() {
            return Err(Error::Dimension(format!(
                "test set has {} features, training set {}",
                t.n_features(),
                data.n_features()
            )));
        }
    }

    let records: Vec<PointRecord> = if options.parallel_cold {
        grid.par_iter()
            .enumerate()
            .map(|(i, &param)| {
                let seed = child_seed(options.seed, i as u64);
                let t0 = Instant::now();
                let out = solve_point(data, solver, param, seed, options, None);
                record(data, i, param, seed, out, t0.elapsed().as_secs_f64(), test)
            })
            .collect()
    } else {
        let mut records = Vec::with_capacity(grid.len());
        let mut prev: Option<Vec<(usize, f64)>> = None;
        for (i, &param) in grid.iter().enumerate() {
            let seed = child_seed(options.seed, i as u64);
            let t0 = Instant::now();
            let out = solve_point(data, solver, param, seed, options, prev.as_deref());
            if let Ok(sol) = &out {
                prev = Some(sol.coef.clone());
            }
            records.push(record(data, i, param, seed, out, t0.elapsed().as_secs_f64(), test));
        }
        records
    };

    let partial = records.iter().any(|r| r.error.is_some());
    Ok(PathResult {
        solver,
        aggregate: PathAggregate::fold(&records),
        records,
        partial,
        parallel_cold: options.parallel_cold,
    })
}
