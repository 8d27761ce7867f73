use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::sparse::{col_dots, col_norms_sq, OpCounter, SparseColumnMatrix};

/// Least-squares data with the per-column quantities every solver needs:
/// `sigma_i = z_i^T y`, `||z_i||^2` and `y^T y`. Immutable and shareable
/// across concurrent solves.
#[derive(Debug, Clone)]
pub struct LassoData {
    x: SparseColumnMatrix,
    y: Vec<f64>,
    sigma: Vec<f64>,
    col_norms_sq: Vec<f64>,
    yty: f64,
    setup_ops: OpCounter,
}

impl LassoData {
    pub fn new(x: SparseColumnMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "response has {} entries but X has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        let mut setup_ops = OpCounter::new();
        let sigma = col_dots(&x, &y, &mut setup_ops);
        let col_norms_sq = col_norms_sq(&x, &mut setup_ops);
        let yty = y.iter().map(|v| v * v).sum();
        Ok(LassoData {
            x,
            y,
            sigma,
            col_norms_sq,
            yty,
            setup_ops,
        })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Self::new(ds.x().clone(), ds.y().to_vec())
    }

    pub fn x(&self) -> &SparseColumnMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn col_norms_sq(&self) -> &[f64] {
        &self.col_norms_sq
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Dot products spent precomputing `sigma` and the column norms.
    pub fn setup_ops(&self) -> OpCounter {
        self.setup_ops
    }

    /// `1/2 ||X alpha - y||^2` by direct evaluation.
    pub fn loss(&self, coef: &[(usize, f64)]) -> f64 {
        let xa = self.x.mul_sparse(coef);
        0.5 * xa
            .iter()
            .zip(&self.y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    /// Smallest penalty whose penalized solution is zero: `||X^T y||_inf`.
    pub fn lambda_max(&self) -> Result<f64> {
        let lmax = self.sigma.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
        if lmax == 0.0 {
            return Err(Error::Degenerate(
                "X^T y is identically zero; every penalty gives the zero solution".into(),
            ));
        }
        Ok(lmax)
    }
}

/// Why an iterative solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIter,
    Stationary,
}

/// Result of one solve, shared by every solver family.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Solution {
    /// Nonzero coefficients, sorted by index.
    pub coef: Vec<(usize, f64)>,
    /// `1/2 ||X alpha - y||^2`.
    pub objective: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub counters: OpCounter,
}

impl Solution {
    pub fn nnz(&self) -> usize {
        self.coef.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coef.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn dense_coef(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for &(j, v) in &self.coef {
            out[j] = v;
        }
        out
    }
}

/// Checks a warm start: indices in range and strictly increasing after
/// sorting, values finite.
pub(crate) fn validate_coef(coef: &[(usize, f64)], p: usize) -> Result<Vec<(usize, f64)>> {
    let mut sorted: Vec<(usize, f64)> = coef.iter().copied().filter(|(_, v)| *v != 0.0).collect();
    sorted.sort_by_key(|(j, _)| *j);
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Contract(format!(
                "duplicate coefficient index {}",
                w[0].0
            )));
        }
    }
    if let Some(&(j, _)) = sorted.iter().find(|(j, _)| *j >= p) {
        return Err(Error::Contract(format!(
            "coefficient index {j} out of range for {p} features"
        )));
    }
    if sorted.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::Contract("non-finite warm-start coefficient".into()));
    }
    Ok(sorted)
}
