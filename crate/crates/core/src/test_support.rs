//! Helpers shared across module tests: independent dense solvers used as
//! oracles, and random problem generators.

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

/// Independent dense solver: Gauss-Jordan with partial pivoting, returning
/// (K⁻¹·b, log|K|). Deliberately avoids the Cholesky machinery under test.
pub(crate) fn dense_solve_oracle(k: &Array2<f64>, b: &Array1<f64>) -> (Array1<f64>, f64) {
    let n = k.nrows();
    let mut aug = Array2::zeros((n, n + 1));
    aug.slice_mut(s![.., ..n]).assign(k);
    aug.slice_mut(s![.., n]).assign(b);
    let mut logdet = 0.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if aug[[r, col]].abs() > aug[[piv, col]].abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..=n {
                aug.swap([col, c], [piv, c]);
            }
        }
        let p = aug[[col, col]];
        logdet += p.abs().ln();
        for c in col..=n {
            aug[[col, c]] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[[r, col]];
                if f != 0.0 {
                    for c in col..=n {
                        aug[[r, c]] -= f * aug[[col, c]];
                    }
                }
            }
        }
    }
    (aug.column(n).to_owned(), logdet)
}

/// Dense inverse through repeated oracle solves on unit vectors.
pub(crate) fn dense_inverse_oracle(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows();
    let mut inv = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::zeros(n);
        e[j] = 1.0;
        let (col, _) = dense_solve_oracle(k, &e);
        inv.column_mut(j).assign(&col);
    }
    inv
}

pub(crate) fn random_points(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.gen_range(0.0..1.0))
}

pub(crate) fn random_response(n: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_fn(n, |_| rng.gen_range(-2.0..2.0))
}
