//! Candidate-set sampling for the randomized vertex search.
//!
//! Subsets are drawn uniformly without replacement. Sizes come from either a
//! fixed count, a fraction of `p`, or one of two confidence rules.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack applied before rounding up, so that sizes which are
/// mathematically integral do not round up on floating-point noise.
const CEIL_SLACK: f64 = 1e-12;

fn ceil_count(x: f64) -> usize {
    (x * (1.0 - CEIL_SLACK)).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SamplingMode {
    FixedSize { size: usize },
    FractionOfP { fraction: f64 },
    /// Sampled best lies in the top `top` fraction with probability `confidence`.
    ConfidenceTopFraction { confidence: f64, top: f64 },
    /// Sample hits the optimal support with probability `confidence`. With
    /// `active: None` the support size is re-estimated from the current
    /// nonzero count at every iteration.
    ConfidenceActiveSet {
        confidence: f64,
        active: Option<usize>,
    },
    FullDeterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub mode: SamplingMode,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(mode: SamplingMode, seed: u64) -> Self {
        SamplingPlan { mode, seed }
    }

    pub fn deterministic() -> Self {
        SamplingPlan {
            mode: SamplingMode::FullDeterministic,
            seed: 0,
        }
    }

    pub fn fixed(size: usize, seed: u64) -> Self {
        Self::new(SamplingMode::FixedSize { size }, seed)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        match self.mode {
            SamplingMode::FixedSize { size } if size == 0 || size > p => Err(Error::Contract(
                format!("sample size {size} must lie in [1, {p}]"),
            )),
            SamplingMode::FractionOfP { fraction } if !(fraction > 0.0 && fraction <= 1.0) => Err(
                Error::Contract(format!("sample fraction {fraction} must lie in (0, 1]")),
            ),
            SamplingMode::ConfidenceTopFraction { confidence, top }
                if !in_unit(confidence) || !in_unit(top) =>
            {
                Err(Error::Contract(
                    "confidence and top fraction must lie in (0, 1)".into(),
                ))
            }
            SamplingMode::ConfidenceActiveSet { confidence, active } => {
                if !in_unit(confidence) {
                    return Err(Error::Contract("confidence must lie in (0, 1)".into()));
                }
                if let Some(s) = active {
                    if s == 0 || s > p {
                        return Err(Error::Contract(format!(
                            "active-set estimate {s} must lie in [1, {p}]"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Sample size for a problem with `p` features whose current iterate has
    /// `nnz` nonzeros. Always in `[1, p]`.
    pub fn kappa(&self, p: usize, nnz: usize) -> usize {
        let k = match self.mode {
            SamplingMode::FixedSize { size } => size,
            SamplingMode::FractionOfP { fraction } => ceil_count(fraction * p as f64),
            SamplingMode::ConfidenceTopFraction { confidence, top } => {
                size_for_top_fraction(confidence, top)
            }
            SamplingMode::ConfidenceActiveSet { confidence, active } => {
                let s = active.unwrap_or(nnz).clamp(1, p);
                size_for_active_hit(confidence, s, p)
            }
            SamplingMode::FullDeterministic => p,
        };
        k.clamp(1, p)
    }

    /// Whether the sample size changes during a solve.
    pub fn is_adaptive(&self) -> bool {
        matches!(
            self.mode,
            SamplingMode::ConfidenceActiveSet { active: None, .. }
        )
    }
}

/// Uniform `kappa`-subset of `0..p`. Returns `0..p` in order when `kappa == p`.
pub fn draw_subset(p: usize, kappa: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert!(
        kappa >= 1 && kappa <= p,
        "subset size {kappa} must lie in [1, {p}]"
    );
    if kappa == p {
        return (0..p).collect();
    }
    sample(rng, p, kappa).into_vec()
}

/// Smallest `kappa` with `(1 - top)^kappa <= 1 - confidence`.
pub fn size_for_top_fraction(confidence: f64, top: f64) -> usize {
    ceil_count((-confidence).ln_1p() / (-top).ln_1p())
}

/// Smallest `kappa` with `(1 - s/p)^kappa <= 1 - confidence`, capped at `p`.
pub fn size_for_active_hit(confidence: f64, s: usize, p: usize) -> usize {
    assert!(s >= 1 && s <= p, "active count {s} must lie in [1, {p}]");
    if s == p {
        return 1;
    }
    let k = ceil_count((-confidence).ln_1p() / (-(s as f64) / p as f64).ln_1p());
    k.min(p)
}

/// Exact probability that a uniform `kappa`-subset misses a fixed set of `s`
/// indices: `prod_{j < kappa} (1 - s / (p - j))`.
pub fn miss_probability(p: usize, s: usize, kappa: usize) -> f64 {
    (0..kappa)
        .map(|j| {
            let remaining = (p - j) as f64;
            (1.0 - s as f64 / remaining).max(0.0)
        })
        .product()
}

/// Independent generator for grid point `index` of a run seeded with
/// `master`: same key, distinct ChaCha stream.
pub fn child_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Derived 64-bit seed recorded in run headers for point `index`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
