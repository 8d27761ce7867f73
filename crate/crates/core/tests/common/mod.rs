#![allow(dead_code)]

use fwlasso::{LassoData, SparseColumnMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Dense Gaussian rows, planted 3-sparse signal, small noise.
pub fn instance(m: usize, p: usize, seed: u64) -> LassoData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| {
            let s: f64 = r.iter().take(3).enumerate().map(|(j, v)| v * (1.0 + j as f64)).sum();
            s + 0.3 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    LassoData::new(SparseColumnMatrix::from_dense_rows(&rows), y).unwrap()
}

/// Random sparse matrix with the given density, as dense columns.
pub fn random_dense(m: usize, p: usize, density: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..p)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if rng.random::<f64>() < density {
                        rng.sample::<f64, _>(StandardNormal)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn dense_loss(cols: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let mut r: Vec<f64> = y.iter().map(|v| -v).collect();
    for (c, a) in cols.iter().zip(alpha) {
        for (ri, ci) in r.iter_mut().zip(c) {
            *ri += a * ci;
        }
    }
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
