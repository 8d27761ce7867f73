use std::collections::HashMap;

use fwlasso::sampling::{draw_subset, miss_probability, size_for_active_hit, size_for_top_fraction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Upper 0.001 quantile of the chi-square distribution with 19 degrees of
/// freedom.
const CHI2_19_999: f64 = 43.820;

#[test]
fn subsets_of_six_choose_three_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 100_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..draws {
        let mut s = draw_subset(6, 3, &mut rng);
        s.sort_unstable();
        *counts.entry(s).or_default() += 1;
    }
    assert_eq!(counts.len(), 20);
    let expected = draws as f64 / 20.0;
    let chi2: f64 = counts
        .values()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    assert!(chi2 < CHI2_19_999, "chi2 = {chi2}");
}

proptest! {
    #[test]
    fn subsets_are_distinct_and_in_range(seed in any::<u64>(), p in 1usize..200, frac in 0.0f64..1.0) {
        let kappa = ((p as f64 * frac).ceil() as usize).clamp(1, p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = draw_subset(p, kappa, &mut rng);
        prop_assert_eq!(s.len(), kappa);
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), kappa);
        prop_assert!(s.iter().all(|&i| i < p));
    }

    #[test]
    fn top_fraction_size_is_minimal(rho in 0.5f64..0.9999, q in 0.001f64..0.5) {
        let k = size_for_top_fraction(rho, q);
        prop_assert!(1.0 - (1.0 - q).powi(k as i32) >= rho - 1e-12);
        if k > 1 {
            prop_assert!(1.0 - (1.0 - q).powi(k as i32 - 1) < rho + 1e-12);
        }
    }

    #[test]
    fn active_hit_size_reaches_confidence(rho in 0.5f64..0.999, p in 2usize..5000, s_frac in 0.0f64..1.0) {
        let s = ((p as f64 * s_frac) as usize).clamp(1, p);
        let k = size_for_active_hit(rho, s, p);
        prop_assert!(k >= 1 && k <= p);
        // the with-replacement bound is conservative for the exact miss probability
        prop_assert!(miss_probability(p, s, k) <= 1.0 - rho + 1e-12);
    }
}
