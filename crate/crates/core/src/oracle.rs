//! Slow dense reference solvers used to certify optimal values in tests,
//! acceptance runs and `verify`. Not for production paths: every call
//! densifies `X`.
//!
//! Both solvers run accelerated projected/proximal gradient with adaptive
//! restart, and periodically try an exact solve of the KKT system on the
//! current support and signs. A candidate is only accepted through its
//! duality gap.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseColumnMatrix;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITER: usize = 2_000_000;
const POLISH_EVERY: usize = 200;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub coef: Vec<f64>,
    pub objective: f64,
    pub certified_gap: f64,
}

/// Euclidean projection onto `{ w : ||w||_1 <= radius }` (sort-based).
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius >= 0.0, "radius must be >= 0");
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; v.len()];
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

fn to_dense(x: &SparseColumnMatrix) -> DMatrix<f64> {
    let cols = x.to_dense_columns();
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| cols[c][r])
}

struct Dense {
    x: DMatrix<f64>,
    y: DVector<f64>,
    lipschitz: f64,
}

impl Dense {
    fn new(x: &SparseColumnMatrix, y: &[f64]) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Dimension("y length must equal rows of X".into()));
        }
        let x = to_dense(x);
        let gram = x.transpose() * &x;
        let lipschitz = gram
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
        Ok(Dense {
            x,
            y: DVector::from_column_slice(y),
            lipschitz,
        })
    }

    fn residual(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.x * a - &self.y
    }

    fn loss(&self, a: &DVector<f64>) -> f64 {
        0.5 * self.residual(a).norm_squared()
    }

    fn grad(&self, a: &DVector<f64>) -> DVector<f64> {
        self.x.transpose() * self.residual(a)
    }

    /// Minimizer of `1/2 ||X_S b - y||^2 + c^T b` subject to an optional
    /// linear equality `signs^T b = radius`, on support `support`.
    fn kkt_solve(
        &self,
        support: &[usize],
        linear: &DVector<f64>,
        equality: Option<(&DVector<f64>, f64)>,
    ) -> Option<DVector<f64>> {
        let k = support.len();
        let xs = DMatrix::from_fn(self.x.nrows(), k, |r, c| self.x[(r, support[c])]);
        let gram = xs.transpose() * &xs;
        let rhs = xs.transpose() * &self.y - linear;
        let n = k + usize::from(equality.is_some());
        let mut lhs = DMatrix::zeros(n, n);
        lhs.view_mut((0, 0), (k, k)).copy_from(&gram);
        let mut b = DVector::zeros(n);
        b.rows_mut(0, k).copy_from(&rhs);
        if let Some((signs, radius)) = equality {
            for i in 0..k {
                lhs[(i, k)] = signs[i];
                lhs[(k, i)] = signs[i];
            }
            b[k] = radius;
        }
        let sol = lhs.svd(true, true).solve(&b, 1e-13).ok()?;
        Some(sol.rows(0, k).into_owned())
    }
}

fn support_of(a: &DVector<f64>) -> Vec<usize> {
    let scale = a.amax().max(1e-300);
    (0..a.len()).filter(|&i| a[i].abs() > 1e-9 * scale).collect()
}

/// Duality gap of the constrained problem at a feasible point.
fn constrained_gap(d: &Dense, a: &DVector<f64>, radius: f64) -> f64 {
    let g = d.grad(a);
    a.dot(&g) + radius * g.amax()
}

/// Reference solution of `min 1/2 ||X a - y||^2 s.t. ||a||_1 <= radius`,
/// certified by the Frank-Wolfe duality gap.
pub fn solve_constrained_reference(
    x: &SparseColumnMatrix,
    y: &[f64],
    radius: f64,
    tol: f64,
) -> Result<OracleResult> {
    if !(radius >= 0.0) {
        return Err(Error::Contract("radius must be >= 0".into()));
    }
    let d = Dense::new(x, y)?;
    let p = x.ncols();
    let mut a = DVector::zeros(p);
    if radius == 0.0 || d.lipschitz == 0.0 {
        let gap = constrained_gap(&d, &a, radius);
        return Ok(OracleResult {
            coef: a.as_slice().to_vec(),
            objective: d.loss(&a),
            certified_gap: gap,
        });
    }
    let step = 1.0 / d.lipschitz;
    let project = |v: &DVector<f64>| DVector::from_vec(project_l1_ball(v.as_slice(), radius));

    let mut best = a.clone();
    let mut best_gap = constrained_gap(&d, &a, radius);
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut f_prev = d.loss(&a);
    for it in 1..=MAX_ITER {
        let next = project(&(&z - d.grad(&z) * step));
        let f_next = d.loss(&next);
        if f_next > f_prev {
            // adaptive restart
            t = 1.0;
            z = a.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &next + (&next - &a) * ((t - 1.0) / t_next);
            a = next;
            t = t_next;
            f_prev = f_next;
        }

        if it % POLISH_EVERY == 0 {
            let gap = constrained_gap(&d, &a, radius);
            if gap < best_gap {
                best_gap = gap;
                best = a.clone();
            }
            if let Some(cand) = interior_newton(&d, &a, radius) {
                let gap = constrained_gap(&d, &cand, radius);
                if gap < best_gap {
                    best_gap = gap;
                    best = cand;
                }
            }
            if let Some(cand) = polish_constrained(&d, &a, radius) {
                let gap = constrained_gap(&d, &cand, radius);
                if gap < best_gap {
                    best_gap = gap;
                    best = cand;
                }
            }
            if best_gap <= tol {
                return Ok(OracleResult {
                    objective: d.loss(&best),
                    coef: best.as_slice().to_vec(),
                    certified_gap: best_gap.max(0.0),
                });
            }
        }
    }
    Err(Error::OracleFailure(format!(
        "constrained reference stalled at gap {best_gap:e} (tol {tol:e})"
    )))
}

/// Full least-squares correction `a - X^+ r`, kept if it stays inside the
/// ball. Resolves interior optima, including interpolating ones when p > m.
fn interior_newton(d: &Dense, a: &DVector<f64>, radius: f64) -> Option<DVector<f64>> {
    if a.lp_norm(1) >= radius * (1.0 - 1e-9) {
        return None;
    }
    let r = d.residual(a);
    let step = d.x.clone().svd(true, true).solve(&r, 1e-13).ok()?;
    let cand = a - step;
    (cand.lp_norm(1) <= radius).then_some(cand)
}

fn polish_constrained(d: &Dense, a: &DVector<f64>, radius: f64) -> Option<DVector<f64>> {
    let support = support_of(a);
    if support.is_empty() {
        return None;
    }
    let signs: Vec<f64> = support.iter().map(|&i| a[i].signum()).collect();
    let on_boundary = a.lp_norm(1) >= radius * (1.0 - 1e-9);
    if let Some(c) = kkt_with_pruning(d, support.clone(), signs.clone(), on_boundary, radius) {
        return Some(c);
    }
    // Support guessed from the gradient: on the boundary the active
    // coordinates are exactly those attaining ||g||_inf.
    let g = d.grad(a);
    let gmax = g.amax();
    let (support, signs): (Vec<usize>, Vec<f64>) = (0..a.len())
        .filter(|&i| g[i].abs() >= gmax * (1.0 - 1e-6))
        .map(|i| (i, -g[i].signum()))
        .unzip();
    kkt_with_pruning(d, support, signs, true, radius)
}

/// Exact solve on a fixed support and sign pattern, dropping coordinates
/// whose sign flips until the pattern is consistent.
fn kkt_with_pruning(
    d: &Dense,
    mut support: Vec<usize>,
    mut signs: Vec<f64>,
    on_boundary: bool,
    radius: f64,
) -> Option<DVector<f64>> {
    let p = d.x.ncols();
    while !support.is_empty() {
        let s = DVector::from_column_slice(&signs);
        let zero = DVector::zeros(support.len());
        let b = if on_boundary {
            d.kkt_solve(&support, &zero, Some((&s, radius)))?
        } else {
            d.kkt_solve(&support, &zero, None)?
        };
        let flipped: Vec<usize> = (0..support.len()).filter(|&k| b[k] * signs[k] < 0.0).collect();
        if flipped.is_empty() {
            let mut full = DVector::zeros(p);
            for (k, &i) in support.iter().enumerate() {
                full[i] = b[k];
            }
            if full.lp_norm(1) > radius * (1.0 + 1e-12) {
                full = DVector::from_vec(project_l1_ball(full.as_slice(), radius));
            }
            return Some(full);
        }
        for &k in flipped.iter().rev() {
            support.remove(k);
            signs.remove(k);
        }
    }
    None
}

/// Duality gap of the penalized problem via the scaled-residual dual point.
fn penalized_gap(d: &Dense, a: &DVector<f64>, lambda: f64) -> f64 {
    let r = d.residual(a);
    let primal = 0.5 * r.norm_squared() + lambda * a.lp_norm(1);
    let corr = (d.x.transpose() * &r).amax();
    let theta = if corr > lambda && corr > 0.0 {
        -&r * (lambda / corr)
    } else {
        -r
    };
    let dual = 0.5 * d.y.norm_squared() - 0.5 * (&d.y - &theta).norm_squared();
    primal - dual
}

/// Reference solution of `min 1/2 ||X a - y||^2 + lambda ||a||_1`,
/// certified by the primal-dual gap.
pub fn solve_penalized_reference(
    x: &SparseColumnMatrix,
    y: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<OracleResult> {
    if !(lambda >= 0.0) {
        return Err(Error::Contract("penalty must be >= 0".into()));
    }
    let d = Dense::new(x, y)?;
    let p = x.ncols();
    let mut a = DVector::zeros(p);
    if d.lipschitz == 0.0 {
        return Ok(OracleResult {
            coef: a.as_slice().to_vec(),
            objective: d.loss(&a),
            certified_gap: 0.0,
        });
    }
    let step = 1.0 / d.lipschitz;
    let prox = |v: DVector<f64>| v.map(|x| crate::cd::soft_threshold(x, lambda * step));
    let obj = |v: &DVector<f64>| d.loss(v) + lambda * v.lp_norm(1);

    let mut best = a.clone();
    let mut best_gap = penalized_gap(&d, &a, lambda);
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut f_prev = obj(&a);
    for it in 1..=MAX_ITER {
        let next = prox(&z - d.grad(&z) * step);
        let f_next = obj(&next);
        if f_next > f_prev {
            t = 1.0;
            z = a.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &next + (&next - &a) * ((t - 1.0) / t_next);
            a = next;
            t = t_next;
            f_prev = f_next;
        }

        if it % POLISH_EVERY == 0 {
            let gap = penalized_gap(&d, &a, lambda);
            if gap < best_gap {
                best_gap = gap;
                best = a.clone();
            }
            let support = support_of(&a);
            if !support.is_empty() {
                let signs = DVector::from_iterator(
                    support.len(),
                    support.iter().map(|&i| a[i].signum() * lambda),
                );
                if let Some(b) = d.kkt_solve(&support, &signs, None) {
                    let mut cand = DVector::zeros(p);
                    let consistent = support.iter().enumerate().all(|(k, &i)| {
                        cand[i] = b[k];
                        b[k] * a[i] > 0.0
                    });
                    if consistent {
                        let gap = penalized_gap(&d, &cand, lambda);
                        if gap < best_gap {
                            best_gap = gap;
                            best = cand;
                        }
                    }
                }
            }
            if best_gap <= tol {
                return Ok(OracleResult {
                    objective: d.loss(&best),
                    coef: best.as_slice().to_vec(),
                    certified_gap: best_gap.max(0.0),
                });
            }
        }
    }
    Err(Error::OracleFailure(format!(
        "penalized reference stalled at gap {best_gap:e} (tol {tol:e})"
    )))
}

/// Minimum-norm least-squares coefficients (SVD pseudo-inverse).
pub fn least_squares(x: &SparseColumnMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let d = Dense::new(x, y)?;
    let sol = d
        .x
        .clone()
        .svd(true, true)
        .solve(&d.y, 1e-12)
        .map_err(|e| Error::OracleFailure(e.to_string()))?;
    Ok(sol.as_slice().to_vec())
}

/// `max_{i,j} |z_i^T z_j|`, the entrywise bound on the Gram matrix.
pub fn max_gram_entry(x: &SparseColumnMatrix) -> f64 {
    let dx = to_dense(x);
    (dx.transpose() * &dx).amax()
}
