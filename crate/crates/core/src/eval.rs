//! Exhaustive-scan oracles and statistical measurements.

use rayon::prelude::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brute_force::distance_row;
use crate::dataset::DataMatrix;
use crate::error::{RbcError, Result};
use crate::metric::MetricSpec;
use crate::rbc::{sample_representatives, SamplingMode};

/// Balls with fewer points than this are too noisy to contribute a ratio.
pub const MIN_BALL: usize = 10;

/// `|{x ∈ X : ρ(center, x) <= radius}|` by exhaustive scan.
pub fn ball_count(x: &DataMatrix, center: &[f32], radius: f32, m: &MetricSpec) -> Result<usize> {
    if radius.is_nan() || radius < 0.0 {
        return Err(RbcError::invalid(format!("radius must be >= 0, got {radius}")));
    }
    if center.len() != m.dim || x.d() != m.dim {
        return Err(RbcError::invalid("dimension mismatch"));
    }
    Ok(x.rows().filter(|p| m.dist(center, p) <= radius).count())
}

/// Number of database points strictly closer to `q` than the returned
/// point. 0 means the answer was an exact nearest neighbor.
pub fn rank_error(x: &DataMatrix, q: &[f32], returned_id: u32, m: &MetricSpec) -> Result<usize> {
    if returned_id as usize >= x.n() {
        return Err(RbcError::invalid(format!("returned id {returned_id} out of range")));
    }
    if q.len() != m.dim || x.d() != m.dim {
        return Err(RbcError::invalid("dimension mismatch"));
    }
    let ret = m.dist(q, x.row(returned_id as usize));
    Ok(x.rows().filter(|p| m.dist(q, p) < ret).count())
}

/// Observed doubling ratios `|B(x,2r)| / |B(x,r)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionEstimate {
    pub c_max: f64,
    pub c_median: f64,
    pub samples: usize,
    pub radii_per_sample: usize,
    /// Number of (center, radius) pairs that passed the [`MIN_BALL`] guard.
    pub ratios_used: usize,
}

impl ExpansionEstimate {
    fn degenerate(samples: usize, radii_per_sample: usize) -> Self {
        Self {
            c_max: 1.0,
            c_median: 1.0,
            samples,
            radii_per_sample,
            ratios_used: 0,
        }
    }
}

fn sorted_row(q: &[f32], x: &DataMatrix, m: &MetricSpec) -> Vec<f32> {
    let mut row = distance_row(q, x, m);
    row.sort_unstable_by(f32::total_cmp);
    row
}

fn count_within(sorted: &[f32], r: f64) -> usize {
    sorted.partition_point(|&d| f64::from(d) <= r)
}

/// Estimates the expansion rate of `x`.
///
/// `n_samples` centers are drawn uniformly from `x`. For each, `n_radii`
/// radii are spaced geometrically from the center's nearest-neighbor
/// distance up to half the estimated diameter (the largest center-to-point
/// distance seen). The doubling ratio is recorded whenever the inner ball
/// holds at least [`MIN_BALL`] points.
pub fn estimate_expansion_rate(
    x: &DataMatrix,
    m: &MetricSpec,
    n_samples: usize,
    n_radii: usize,
    seed: u64,
) -> Result<ExpansionEstimate> {
    if n_samples == 0 || n_radii == 0 {
        return Err(RbcError::invalid("n_samples and n_radii must be at least 1"));
    }
    if x.d() != m.dim {
        return Err(RbcError::invalid("dimension mismatch"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<usize> = (0..n_samples).map(|_| rng.random_range(0..x.n())).collect();

    let diameter = centers
        .par_iter()
        .map(|&c| distance_row(x.row(c), x, m).into_iter().fold(0.0f32, f32::max))
        .reduce(|| 0.0, f32::max);
    let r_max = f64::from(diameter) / 2.0;

    let per_center: Vec<Vec<f64>> = centers
        .par_iter()
        .map(|&c| {
            let sorted = sorted_row(x.row(c), x, m);
            let Some(&nn) = sorted.iter().find(|&&d| d > 0.0) else {
                return Vec::new();
            };
            let r_min = f64::from(nn);
            let hi = r_max.max(r_min);
            (0..n_radii)
                .filter_map(|i| {
                    let t = if n_radii == 1 { 0.0 } else { i as f64 / (n_radii - 1) as f64 };
                    let r = r_min * (hi / r_min).powf(t);
                    let inner = count_within(&sorted, r);
                    (inner >= MIN_BALL).then(|| count_within(&sorted, 2.0 * r) as f64 / inner as f64)
                })
                .collect()
        })
        .collect();

    let mut ratios: Vec<f64> = per_center.into_iter().flatten().collect();
    if ratios.is_empty() {
        return Ok(ExpansionEstimate::degenerate(n_samples, n_radii));
    }
    ratios.sort_unstable_by(f64::total_cmp);
    let mid = ratios.len() / 2;
    let c_median = if ratios.len() % 2 == 1 {
        ratios[mid]
    } else {
        (ratios[mid - 1] + ratios[mid]) / 2.0
    };
    Ok(ExpansionEstimate {
        c_max: *ratios.last().unwrap(),
        c_median,
        samples: n_samples,
        radii_per_sample: n_radii,
        ratios_used: ratios.len(),
    })
}

/// For each query, draws a fresh Bernoulli representative set of expected
/// size `n_r`, takes `γ` = distance to the nearest representative and
/// counts the database points strictly closer than `γ`.
///
/// Under random sampling this count is Geometric(p = n_r/n) minus one, with
/// mean `n/n_r − 1`.
pub fn closer_than_rep_counts(
    x: &DataMatrix,
    queries: &DataMatrix,
    n_r: usize,
    m: &MetricSpec,
    seed: u64,
) -> Result<Vec<usize>> {
    if queries.d() != x.d() || x.d() != m.dim {
        return Err(RbcError::invalid("dimension mismatch"));
    }
    (0..queries.n())
        .into_par_iter()
        .map(|i| {
            let trial_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let reps = sample_representatives(x.n(), n_r, trial_seed, SamplingMode::Bernoulli)?;
            let row = distance_row(queries.row(i), x, m);
            let gamma = reps
                .ids
                .iter()
                .map(|&r| row[r as usize])
                .fold(f32::INFINITY, f32::min);
            Ok(row.iter().filter(|&&d| d < gamma).count())
        })
        .collect()
}

/// Mean of [`closer_than_rep_counts`].
pub fn closer_than_rep_mean(x: &DataMatrix, queries: &DataMatrix, n_r: usize, m: &MetricSpec, seed: u64) -> Result<f64> {
    let counts = closer_than_rep_counts(x, queries, n_r, m, seed)?;
    Ok(counts.iter().sum::<usize>() as f64 / counts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brute_force::bf_search;
    use crate::dataset::{gen_synthetic, SyntheticSpec};
    use crate::metric::MetricKind;
    use proptest::prelude::*;

    fn line() -> (DataMatrix, MetricSpec) {
        let x = DataMatrix::new(5, 1, vec![0.0, 2.0, 5.0, 6.0, 9.0]).unwrap();
        (x, MetricSpec::new(MetricKind::Euclidean, 1).unwrap())
    }

    #[test]
    fn ball_count_examples() {
        let (x, m) = line();
        assert_eq!(ball_count(&x, &[5.0], 0.0, &m).unwrap(), 1);
        assert_eq!(ball_count(&x, &[0.0], 9.0, &m).unwrap(), 5);
        assert_eq!(ball_count(&x, &[5.4], 1.0, &m).unwrap(), 2);
        assert!(ball_count(&x, &[5.4], -1.0, &m).is_err());
    }

    #[test]
    fn rank_error_examples() {
        let (x, m) = line();
        assert_eq!(rank_error(&x, &[5.4], 2, &m).unwrap(), 0);
        assert_eq!(rank_error(&x, &[5.4], 3, &m).unwrap(), 1);
        assert_eq!(rank_error(&x, &[5.4], 4, &m).unwrap(), 3);
        assert!(rank_error(&x, &[5.4], 5, &m).is_err());
    }

    #[test]
    fn rank_of_brute_force_answer_is_zero() {
        let x = gen_synthetic(SyntheticSpec::UniformCube, 400, 3, 2).unwrap();
        let q = gen_synthetic(SyntheticSpec::UniformCube, 50, 3, 3).unwrap();
        let m = MetricSpec::new(MetricKind::Euclidean, 3).unwrap();
        for nl in bf_search(&q, &x, &m, 1).unwrap().lists {
            assert_eq!(rank_error(&x, q.row(nl.query), nl.ids[0], &m).unwrap(), 0);
        }
    }

    #[test]
    fn grid_expansion_rates() {
        let m1 = MetricSpec::new(MetricKind::Manhattan, 1).unwrap();
        let g1 = gen_synthetic(SyntheticSpec::IntegerGrid, 2500, 1, 0).unwrap();
        let e1 = estimate_expansion_rate(&g1, &m1, 200, 16, 1).unwrap();
        assert!((1.8..=2.2).contains(&e1.c_max), "{e1:?}");

        let m2 = MetricSpec::new(MetricKind::Manhattan, 2).unwrap();
        let g2 = gen_synthetic(SyntheticSpec::IntegerGrid, 2500, 2, 0).unwrap();
        let e2 = estimate_expansion_rate(&g2, &m2, 200, 16, 1).unwrap();
        assert!((3.0..=5.0).contains(&e2.c_max), "{e2:?}");
        assert!(e2.c_max >= e2.c_median && e2.c_median >= 1.0);
    }

    #[test]
    fn degenerate_sets() {
        let m = MetricSpec::new(MetricKind::Euclidean, 2).unwrap();
        let one = DataMatrix::new(1, 2, vec![0.5, 0.5]).unwrap();
        let e = estimate_expansion_rate(&one, &m, 5, 4, 0).unwrap();
        assert_eq!((e.c_max, e.c_median), (1.0, 1.0));
        let same = DataMatrix::new(50, 2, vec![1.0; 100]).unwrap();
        let e = estimate_expansion_rate(&same, &m, 5, 4, 0).unwrap();
        assert_eq!((e.c_max, e.c_median), (1.0, 1.0));
        assert!(estimate_expansion_rate(&same, &m, 0, 4, 0).is_err());
    }

    #[test]
    fn estimator_is_seeded_and_scale_invariant() {
        let x = gen_synthetic(SyntheticSpec::UniformCube, 3000, 3, 4).unwrap();
        let m = MetricSpec::new(MetricKind::Euclidean, 3).unwrap();
        let a = estimate_expansion_rate(&x, &m, 40, 8, 9).unwrap();
        assert_eq!(a, estimate_expansion_rate(&x, &m, 40, 8, 9).unwrap());
        // power-of-two scaling is exact in floating point
        for alpha in [0.25f32, 8.0] {
            let b = estimate_expansion_rate(&x.scaled(alpha).unwrap(), &m, 40, 8, 9).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn closer_than_rep_degenerate_rates() {
        let x = gen_synthetic(SyntheticSpec::UniformCube, 1000, 4, 5).unwrap();
        let q = gen_synthetic(SyntheticSpec::UniformCube, 300, 4, 6).unwrap();
        let m = MetricSpec::new(MetricKind::Euclidean, 4).unwrap();
        assert_eq!(closer_than_rep_mean(&x, &q, 1000, &m, 1).unwrap(), 0.0);
        // Geometric(1/2) − 1 has mean 1 and variance 2; 300 trials give a
        // standard error of ≈0.08
        let half = closer_than_rep_mean(&x, &q, 500, &m, 1).unwrap();
        assert!((half - 1.0).abs() < 0.3, "{half}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ball_count_is_monotone(seed in any::<u64>(), r1 in 0.0f32..2.0, r2 in 0.0f32..2.0) {
            let x = gen_synthetic(SyntheticSpec::UniformCube, 200, 3, seed).unwrap();
            let m = MetricSpec::new(MetricKind::Euclidean, 3).unwrap();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let c = x.row(0);
            prop_assert!(ball_count(&x, c, lo, &m).unwrap() <= ball_count(&x, c, hi, &m).unwrap());
        }

        #[test]
        fn ball_counts_sandwich_rate(seed in any::<u64>(), r in 0usize..500) {
            // B(q,γ) ⊂ B(r,2γ) ⊂ B(q,4γ) whenever ρ(q,r) = γ
            let x = gen_synthetic(SyntheticSpec::UniformCube, 500, 4, seed).unwrap();
            let q = gen_synthetic(SyntheticSpec::UniformCube, 1, 4, !seed).unwrap();
            let m = MetricSpec::new(MetricKind::Euclidean, 4).unwrap();
            let gamma = m.dist(q.row(0), x.row(r));
            let inner = ball_count(&x, q.row(0), gamma, &m).unwrap();
            let mid = ball_count(&x, x.row(r), 2.0 * gamma, &m).unwrap();
            let outer = ball_count(&x, q.row(0), 4.0 * gamma, &m).unwrap();
            prop_assert!(inner <= mid && mid <= outer, "{} {} {}", inner, mid, outer);
        }
    }
}
