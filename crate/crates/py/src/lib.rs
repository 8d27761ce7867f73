//! Python module `fwlasso_py`: load or build a problem, solve it with
//! Frank-Wolfe or coordinate descent, and sweep a regularization path.

use std::fs::File;
use std::io::BufReader;

use fwlasso::dataset::{parse_libsvm, standardize};
use fwlasso::path::{bootstrap_delta_max, build_grid};
use fwlasso::sampling::{size_for_active_hit, size_for_top_fraction};
use fwlasso::{
    fw, run_path, solve_penalized, CdOptions, CdOrder, CdProblem, Dataset, FwOptions, FwProblem, GridSpec,
    LassoData, PathOptions, SamplingMode, SamplingPlan, Solution, SolverKind, SparseColumnMatrix, StandardizeMode,
    StopRule, DEFAULT_SEED,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn standardize_mode(name: &str) -> PyResult<StandardizeMode> {
    match name {
        "unit" => Ok(StandardizeMode::UnitNormColumns),
        "center" => Ok(StandardizeMode::CenterAndUnitNorm),
        "none" => Ok(StandardizeMode::None),
        other => Err(value_err(format!("standardize must be unit, center or none, got '{other}'"))),
    }
}

/// Design matrix and response, standardized on construction.
#[pyclass(frozen, module = "fwlasso_py")]
pub struct Problem {
    data: LassoData,
}

#[pymethods]
impl Problem {
    /// Builds a problem from dense rows.
    #[staticmethod]
    #[pyo3(signature = (rows, y, standardize = "unit"))]
    fn from_dense(rows: Vec<Vec<f64>>, y: Vec<f64>, standardize: &str) -> PyResult<Self> {
        let ds = Dataset::new(SparseColumnMatrix::from_dense_rows(&rows), y).map_err(value_err)?;
        Self::build(&ds, standardize)
    }

    /// Reads a LIBSVM file.
    #[staticmethod]
    #[pyo3(signature = (path, num_features = None, standardize = "unit"))]
    fn from_libsvm(path: &str, num_features: Option<usize>, standardize: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let ds = parse_libsvm(BufReader::new(file), num_features).map_err(|e| value_err(format!("{path}: {e}")))?;
        Self::build(&ds, standardize)
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.data.n_samples()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.data.n_features()
    }

    /// Smallest penalty with the all-zero solution.
    fn lambda_max(&self) -> PyResult<f64> {
        self.data.lambda_max().map_err(value_err)
    }

    /// Half the squared residual norm at sparse `(index, value)` pairs.
    fn loss(&self, coef: Vec<(usize, f64)>) -> f64 {
        self.data.loss(&coef)
    }
}

impl Problem {
    fn build(ds: &Dataset, mode: &str) -> PyResult<Self> {
        let (ds, _) = standardize(ds, standardize_mode(mode)?);
        Ok(Problem { data: LassoData::from_dataset(&ds).map_err(value_err)? })
    }
}

/// Outcome of one solve.
#[pyclass(frozen, get_all, module = "fwlasso_py")]
pub struct FitResult {
    /// Nonzero `(index, value)` pairs in index order.
    coef: Vec<(usize, f64)>,
    objective: f64,
    iterations: usize,
    stop_reason: String,
    dot_products: u64,
}

#[pymethods]
impl FitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(objective={}, nnz={}, iterations={}, stop_reason='{}', dot_products={})",
            self.objective,
            self.coef.len(),
            self.iterations,
            self.stop_reason,
            self.dot_products
        )
    }
}

fn stop_name<T: std::fmt::Debug>(reason: T) -> String {
    format!("{reason:?}").to_lowercase()
}

impl From<Solution> for FitResult {
    fn from(s: Solution) -> Self {
        FitResult {
            objective: s.objective,
            iterations: s.iterations,
            stop_reason: stop_name(s.stop_reason),
            dot_products: s.counters.dot_products,
            coef: s.coef,
        }
    }
}

fn sampling_plan(
    sample_size: Option<usize>,
    sample_frac: Option<f64>,
    sample_confidence: Option<f64>,
    seed: u64,
) -> PyResult<SamplingPlan> {
    let mode = match (sample_size, sample_frac, sample_confidence) {
        (None, None, None) => return Ok(SamplingPlan::deterministic()),
        (Some(size), None, None) => SamplingMode::FixedSize { size },
        (None, Some(fraction), None) => SamplingMode::FractionOfP { fraction },
        (None, None, Some(confidence)) => SamplingMode::ConfidenceActiveSet { confidence, active: None },
        _ => return Err(value_err("give at most one of sample_size, sample_frac, sample_confidence")),
    };
    Ok(SamplingPlan::new(mode, seed))
}

fn cd_order(name: &str) -> PyResult<CdOrder> {
    match name {
        "cyclic" => Ok(CdOrder::Cyclic),
        "permutation" => Ok(CdOrder::RandomPermutation),
        "iid" => Ok(CdOrder::IidUniform),
        other => Err(value_err(format!("order must be cyclic, permutation or iid, got '{other}'"))),
    }
}

/// Frank-Wolfe on `||a||_1 <= delta`. Sampling is deterministic unless one
/// of the `sample_*` arguments is given.
#[pyfunction]
#[pyo3(signature = (problem, delta, epsilon = 1e-3, max_iter = 100_000, sample_size = None,
                    sample_frac = None, sample_confidence = None, gap_stop = false, seed = DEFAULT_SEED))]
#[allow(clippy::too_many_arguments)]
fn solve_fw(
    py: Python<'_>,
    problem: &Problem,
    delta: f64,
    epsilon: f64,
    max_iter: usize,
    sample_size: Option<usize>,
    sample_frac: Option<f64>,
    sample_confidence: Option<f64>,
    gap_stop: bool,
    seed: u64,
) -> PyResult<FitResult> {
    let options = FwOptions {
        epsilon,
        max_iter,
        stop_rule: if gap_stop { StopRule::DualityGap } else { StopRule::CoefficientChange },
        sampling: sampling_plan(sample_size, sample_frac, sample_confidence, seed)?,
        ..FwOptions::default()
    };
    let fw_problem = FwProblem::new(&problem.data, delta).map_err(value_err)?;
    let (sol, _) = py.detach(|| fw::solve(&fw_problem, &options, None)).map_err(value_err)?;
    Ok(sol.into())
}

/// Coordinate descent on `1/2 ||X a - y||^2 + lam ||a||_1`.
#[pyfunction]
#[pyo3(signature = (problem, lam, epsilon = 1e-3, max_iter = 100_000, order = "cyclic", seed = DEFAULT_SEED))]
fn solve_cd(
    py: Python<'_>,
    problem: &Problem,
    lam: f64,
    epsilon: f64,
    max_iter: usize,
    order: &str,
    seed: u64,
) -> PyResult<FitResult> {
    let options = CdOptions { epsilon, max_epochs: max_iter, order: cd_order(order)?, seed, ..CdOptions::default() };
    let cd_problem = CdProblem::new(&problem.data, lam).map_err(value_err)?;
    let sol = py.detach(|| solve_penalized(&cd_problem, &options, None)).map_err(value_err)?;
    Ok(sol.into())
}

/// One row per grid point: `(param, l1_norm, nnz, train_mse, iterations,
/// dot_products, stop_reason)`. Fails if any point failed.
#[pyfunction]
#[pyo3(signature = (problem, solver = "fw", grid_points = 100, grid_ratio = 100.0, epsilon = 1e-3,
                    max_iter = 100_000, sample_frac = None, sample_confidence = None, seed = DEFAULT_SEED))]
#[allow(clippy::too_many_arguments)]
#[allow(clippy::type_complexity)]
fn path(
    py: Python<'_>,
    problem: &Problem,
    solver: &str,
    grid_points: usize,
    grid_ratio: f64,
    epsilon: f64,
    max_iter: usize,
    sample_frac: Option<f64>,
    sample_confidence: Option<f64>,
    seed: u64,
) -> PyResult<Vec<(f64, f64, usize, f64, usize, u64, String)>> {
    let kind = match solver {
        "fw" => SolverKind::Fw,
        "cd" => SolverKind::Cd,
        "scd" => SolverKind::Scd,
        other => return Err(value_err(format!("solver must be fw, cd or scd, got '{other}'"))),
    };
    let options = PathOptions {
        fw: FwOptions {
            epsilon,
            max_iter,
            sampling: sampling_plan(None, sample_frac, sample_confidence, seed)?,
            ..FwOptions::default()
        },
        cd: CdOptions { epsilon, max_epochs: max_iter, seed, ..CdOptions::default() },
        seed,
        parallel_cold: false,
    };
    let data = &problem.data;
    let result = py
        .detach(|| {
            let top = if kind.ascending_grid() {
                bootstrap_delta_max(data, grid_ratio, 1e-8)?
            } else {
                data.lambda_max()?
            };
            let spec = GridSpec { points: grid_points, ratio: grid_ratio };
            let grid = build_grid(top, spec, kind.ascending_grid())?;
            run_path(data, kind, &grid, &options, None)
        })
        .map_err(value_err)?;
    if let Some(bad) = result.records.iter().find(|r| r.error.is_some()) {
        return Err(value_err(format!("grid point {} failed: {}", bad.index, bad.error.clone().unwrap_or_default())));
    }
    Ok(result
        .records
        .into_iter()
        .map(|r| {
            (r.param, r.l1_norm, r.nnz, r.train_mse, r.iterations, r.dot_products, r.stop_reason.map(stop_name).unwrap_or_default())
        })
        .collect())
}

/// Sample size whose best draw lies in the top `top` fraction with
/// probability `confidence`.
#[pyfunction]
fn sample_size_top_fraction(confidence: f64, top: f64) -> PyResult<usize> {
    if !(0.0 < confidence && confidence < 1.0 && 0.0 < top && top < 1.0) {
        return Err(value_err("confidence and top must lie in (0, 1)"));
    }
    Ok(size_for_top_fraction(confidence, top))
}

/// Sample size that hits an `s`-subset of `p` features with probability
/// `confidence`.
#[pyfunction]
fn sample_size_active_hit(confidence: f64, s: usize, p: usize) -> PyResult<usize> {
    if !(0.0 < confidence && confidence < 1.0) || s == 0 || s > p {
        return Err(value_err("need 0 < confidence < 1 and 1 <= s <= p"));
    }
    Ok(size_for_active_hit(confidence, s, p))
}

#[pymodule]
fn fwlasso_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(solve_fw, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cd, m)?)?;
    m.add_function(wrap_pyfunction!(path, m)?)?;
    m.add_function(wrap_pyfunction!(sample_size_top_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(sample_size_active_hit, m)?)?;
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_parsing() {
        assert_eq!(standardize_mode("center").unwrap(), StandardizeMode::CenterAndUnitNorm);
        assert!(standardize_mode("zscore").is_err());
        assert_eq!(cd_order("iid").unwrap(), CdOrder::IidUniform);
        assert_eq!(sampling_plan(None, None, None, 1).unwrap(), SamplingPlan::deterministic());
        assert_eq!(sampling_plan(Some(4), None, None, 1).unwrap(), SamplingPlan::fixed(4, 1));
        assert!(sampling_plan(Some(4), Some(0.1), None, 1).is_err());
    }

    #[test]
    fn solution_conversion_keeps_counters() {
        let data = LassoData::new(SparseColumnMatrix::from_dense_columns(2, &[vec![1.0, 0.0]]), vec![1.0, 0.0]).unwrap();
        let problem = FwProblem::new(&data, 0.5).unwrap();
        let (sol, _) = fw::solve(&problem, &FwOptions::default(), None).unwrap();
        let r = FitResult::from(sol.clone());
        assert_eq!(r.coef, sol.coef);
        assert_eq!(r.dot_products, sol.counters.dot_products);
        assert_eq!(r.stop_reason, stop_name(sol.stop_reason));
    }
}
