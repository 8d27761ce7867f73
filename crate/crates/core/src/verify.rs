//! Self-check suites runnable from the command line: unbiasedness of the
//! subset mask, exact hit probabilities, the O(1/k) rate bound and gap
//! dominance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Result;
use crate::fw::{FwProblem, FwRun};
use crate::oracle::{least_squares, max_gram_entry, solve_constrained_reference, DEFAULT_TOL};
use crate::problem::LassoData;
use crate::sampling::{draw_subset, miss_probability, SamplingPlan};
use crate::sparse::SparseColumnMatrix;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Dense Gaussian design with a sparse planted signal plus noise.
pub fn gaussian_instance(m: usize, p: usize, seed: u64) -> Result<LassoData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let x = SparseColumnMatrix::from_dense_rows(&rows);
    let planted = p.min(5);
    let y: Vec<f64> = rows
        .iter()
        .map(|r| {
            let signal: f64 = r.iter().take(planted).sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            signal + 0.1 * noise
        })
        .collect();
    LassoData::new(x, y)
}

/// `0.7 ||alpha_LS||_1` for the instance.
pub fn inner_radius(data: &LassoData) -> Result<f64> {
    let ls = least_squares(data.x(), data.y())?;
    Ok(0.7 * ls.iter().map(|v| v.abs()).sum::<f64>())
}

/// Masked vector `v * 1[i in S]` averaged over `draws` subsets should be
/// `(kappa/p) v` to within 3 standard errors in every coordinate.
pub fn mask_unbiasedness_monte_carlo(p: usize, kappa: usize, draws: usize, seed: u64) -> SuiteResult {
    let v: Vec<f64> = (0..p).map(|i| 1.0 + i as f64).collect();
    let mut hits = vec![0usize; p];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        for i in draw_subset(p, kappa, &mut rng) {
            hits[i] += 1;
        }
    }
    let q = kappa as f64 / p as f64;
    let mut worst = 0.0f64;
    for i in 0..p {
        let mean = v[i] * hits[i] as f64 / draws as f64;
        let se = v[i] * (q * (1.0 - q) / draws as f64).sqrt();
        worst = worst.max((mean - q * v[i]).abs() / se);
    }
    SuiteResult {
        name: "subset-mask unbiasedness",
        passed: worst <= 3.0,
        detail: format!("p={p} kappa={kappa} draws={draws}: worst deviation {worst:.2} SE"),
    }
}

fn for_each_subset(p: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..=(p - (k - cur.len())) {
            cur.push(i);
            rec(i + 1, p, k, cur, f);
            cur.pop();
        }
    }
    rec(0, p, k, &mut Vec::with_capacity(k), f);
}

/// Counts subsets missing a fixed `s`-set by enumeration and compares
/// against the closed-form product, for all `s, kappa <= p <= max_p`.
pub fn hit_probability_enumeration(max_p: usize) -> SuiteResult {
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for p in 1..=max_p {
        for kappa in 1..=p {
            let (mut total, mut missing) = (vec![0u64; p + 1], vec![0u64; p + 1]);
            for_each_subset(p, kappa, &mut |sub| {
                // the s-set is {0..s}; the subset misses it iff its min >= s
                let min = sub[0];
                for s in 1..=p {
                    total[s] += 1;
                    if min >= s {
                        missing[s] += 1;
                    }
                }
            });
            for s in 1..=p {
                let empirical = missing[s] as f64 / total[s] as f64;
                worst = worst.max((empirical - miss_probability(p, s, kappa)).abs());
                cases += 1;
            }
        }
    }
    SuiteResult {
        name: "exact hit probability",
        passed: worst <= 1e-12,
        detail: format!("{cases} (p, s, kappa) cases up to p={max_p}: max error {worst:.2e}"),
    }
}

/// Primal gap of deterministic Frank-Wolfe against `4 C / (k + 2)`.
pub fn rate_bound(instances: usize, iterations: usize, seed: u64) -> Result<SuiteResult> {
    let mut worst_ratio = 0.0f64;
    for inst in 0..instances {
        let data = gaussian_instance(40, 50, seed.wrapping_add(inst as u64))?;
        let delta = inner_radius(&data)?;
        let fstar = solve_constrained_reference(data.x(), data.y(), delta, DEFAULT_TOL)?.objective;
        let curvature = 2.0 * delta * delta * max_gram_entry(data.x());
        let problem = FwProblem::new(&data, delta)?;
        let mut run = FwRun::new(&problem, SamplingPlan::deterministic(), None)?;
        for k in 1..=iterations {
            run.step()?;
            let h = run.objective() - fstar;
            worst_ratio = worst_ratio.max(h / (4.0 * curvature / (k as f64 + 2.0)));
        }
    }
    Ok(SuiteResult {
        name: "deterministic rate bound",
        passed: worst_ratio <= 1.0,
        detail: format!(
            "{instances} instances x {iterations} iterations: max h_k / bound = {worst_ratio:.3e}"
        ),
    })
}

/// Duality gap versus primal gap along randomized runs.
pub fn gap_inequality(instances: usize, iterations: usize, seed: u64) -> Result<SuiteResult> {
    let mut violations = 0usize;
    let mut checked = 0usize;
    for inst in 0..instances {
        let data = gaussian_instance(30, 40, seed.wrapping_add(1000 + inst as u64))?;
        let delta = inner_radius(&data)?;
        let fstar = solve_constrained_reference(data.x(), data.y(), delta, DEFAULT_TOL)?.objective;
        let problem = FwProblem::new(&data, delta)?;
        let mut run = FwRun::new(&problem, SamplingPlan::fixed(8, seed ^ inst as u64), None)?;
        for _ in 0..iterations {
            run.step()?;
            let mut scratch = Default::default();
            let gap = run.duality_gap(&mut scratch);
            let h = run.objective() - fstar;
            checked += 1;
            if gap < h - 1e-9 * (1.0 + fstar.abs()) {
                violations += 1;
            }
        }
    }
    Ok(SuiteResult {
        name: "gap dominance",
        passed: violations == 0,
        detail: format!("{checked} iterates, {violations} with gap < primal gap"),
    })
}

/// Every suite at its default size.
pub fn run_all_suites(seed: u64) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        mask_unbiasedness_monte_carlo(10, 3, 100_000, seed),
        hit_probability_enumeration(12),
        rate_bound(5, 500, seed)?,
        gap_inequality(5, 200, seed)?,
    ])
}
