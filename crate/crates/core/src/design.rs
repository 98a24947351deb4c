//! Space-filling designs and seeded sampling helpers.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

/// Latin hypercube sample of `n` points in the given box, one point per
/// axis-aligned stratum in every dimension. Deterministic per seed.
pub fn lhs(n: usize, bounds: &[(f64, f64)], seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lhs_with_rng(n, bounds, &mut rng)
}

pub fn lhs_with_rng<R: Rng>(n: usize, bounds: &[(f64, f64)], rng: &mut R) -> Array2<f64> {
    let d = bounds.len();
    let mut out = Array2::zeros((n, d));
    let mut strata: Vec<usize> = (0..n).collect();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        strata.shuffle(rng);
        for i in 0..n {
            let u: f64 = rng.gen();
            out[[i, j]] = lo + (strata[i] as f64 + u) / n as f64 * (hi - lo);
        }
    }
    out
}

/// `n` i.i.d. uniform points in the box.
pub fn uniform_sample<R: Rng>(n: usize, bounds: &[(f64, f64)], rng: &mut R) -> Array2<f64> {
    let d = bounds.len();
    Array2::from_shape_fn((n, d), |(_, j)| {
        let (lo, hi) = bounds[j];
        rng.gen_range(lo..hi)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_lies_inside_box() {
        let pts = lhs(1, &[(2.0, 3.0), (-1.0, 0.0)], 0);
        assert!(pts[[0, 0]] >= 2.0 && pts[[0, 0]] < 3.0);
        assert!(pts[[0, 1]] >= -1.0 && pts[[0, 1]] < 0.0);
    }

    #[test]
    fn one_point_per_stratum_in_every_dimension() {
        let n = 37;
        let pts = lhs(n, &[(0.0, 1.0), (5.0, 9.0)], 42);
        for j in 0..2 {
            let (lo, hi) = [(0.0, 1.0), (5.0, 9.0)][j];
            let mut counts = vec![0usize; n];
            for i in 0..n {
                let idx = (((pts[[i, j]] - lo) / (hi - lo)) * n as f64).floor() as usize;
                counts[idx.min(n - 1)] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let a = lhs(25, &[(0.0, 1.0); 3], 7);
        let b = lhs(25, &[(0.0, 1.0); 3], 7);
        assert_eq!(a, b);
        let c = lhs(25, &[(0.0, 1.0); 3], 8);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_sample_stays_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = uniform_sample(200, &[(0.0, 1.0), (-2.0, -1.0)], &mut rng);
        for row in pts.rows() {
            assert!(row[0] >= 0.0 && row[0] < 1.0);
            assert!(row[1] >= -2.0 && row[1] < -1.0);
        }
    }
}
