//! Dense symmetric-positive-definite linear algebra.
//!
//! Provides Cholesky factorization with an escalating jitter policy,
//! forward/backward triangular solves, explicit lower-triangular inversion,
//! and the O(n^2) incremental extensions of an existing factor (and of its
//! inverse) when the source matrix grows by one row and column.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

/// Relative symmetry tolerance accepted by [`SpdMatrix::new`].
const SYMMETRY_TOL: f64 = 1e-12;

/// Jitter escalation ladder, as fractions of the mean diagonal.
const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Block size for the blocked factorization and solves.
const BLOCK: usize = 96;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix of dimension {dimension} is not positive definite (pivot {pivot} failed, last jitter {jitter:.1e})")]
    NotPositiveDefinite {
        dimension: usize,
        pivot: usize,
        jitter: f64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric within relative tolerance 1e-12")]
    NotSymmetric,
    #[error("diagonal entries must be strictly positive")]
    NonPositiveDiagonal,
    #[error("extended factor diagonal underflowed; inverse extension is degenerate")]
    DegenerateDiagonal,
    #[error("factor does not carry an explicit inverse")]
    InverseNotAvailable,
}

/// A validated symmetric matrix with strictly positive diagonal.
///
/// Positive definiteness itself is not checked here; [`cholesky`] decides
/// that, applying jitter if needed.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    data: Array2<f64>,
}

impl SpdMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self, NumericsError> {
        let n = data.nrows();
        if data.ncols() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                found: data.ncols(),
            });
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            if !(data[[i, i]] > 0.0) {
                return Err(NumericsError::NonPositiveDiagonal);
            }
            for j in 0..i {
                if (data[[i, j]] - data[[j, i]]).abs() > SYMMETRY_TOL * scale {
                    return Err(NumericsError::NotSymmetric);
                }
            }
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// Lower-triangular Cholesky factor, optionally carrying its own inverse.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: Array2<f64>,
    inv: Option<Array2<f64>>,
    jitter: f64,
    clamped: bool,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// The lower-triangular factor L with L·Lᵀ equal to the source matrix
    /// (plus any jitter applied during factorization).
    pub fn l(&self) -> ArrayView2<'_, f64> {
        self.l.view()
    }

    /// Explicit L⁻¹, present only after [`CholeskyFactor::with_inverse`] or
    /// [`extend_inverse_cholesky`].
    pub fn inverse(&self) -> Option<ArrayView2<'_, f64>> {
        self.inv.as_ref().map(|m| m.view())
    }

    /// Diagonal shift that was added to make the factorization succeed;
    /// zero for cleanly positive-definite inputs.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// True when the last diagonal entry was clamped during an extension
    /// because the value under the root came out non-positive.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    /// log |K| = 2 Σ log L_ii.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Computes and caches the explicit triangular inverse L⁻¹.
    pub fn with_inverse(mut self) -> Self {
        if self.inv.is_none() {
            self.inv = Some(lower_triangular_inverse(self.l.view()));
        }
        self
    }

    /// Solves K x = b through the factor (forward then backward solve).
    pub fn solve_vec(&self, b: ArrayView1<'_, f64>) -> Result<Array1<f64>, NumericsError> {
        let mut x = solve_lower_vec(self.l.view(), b)?;
        back_substitute_vec(self.l.view(), x.view_mut());
        Ok(x)
    }

    /// Solves K X = B column-wise.
    pub fn solve_mat(&self, b: ArrayView2<'_, f64>) -> Result<Array2<f64>, NumericsError> {
        if b.nrows() != self.dim() {
            return Err(NumericsError::DimensionMismatch {
                expected: self.dim(),
                found: b.nrows(),
            });
        }
        let mut x = b.to_owned();
        forward_sub_multi(self.l.view(), &mut x);
        back_sub_multi(self.l.view(), &mut x);
        Ok(x)
    }
}

/// Factorizes a symmetric matrix as L·Lᵀ.
///
/// If the plain factorization hits a non-positive pivot, retries with
/// δ·mean(diag) added to the diagonal, δ escalating through
/// {1e-10, 1e-8, 1e-6}, and fails afterwards.
pub fn cholesky(m: &SpdMatrix) -> Result<CholeskyFactor, NumericsError> {
    cholesky_with_jitter(m.view())
}

pub(crate) fn cholesky_with_jitter(
    a: ArrayView2<'_, f64>,
) -> Result<CholeskyFactor, NumericsError> {
    let n = a.nrows();
    let mean_diag = a.diag().sum() / n.max(1) as f64;
    let mut last_pivot = 0;
    let mut last_jitter = 0.0;
    for &delta in std::iter::once(&0.0).chain(JITTER_LADDER.iter()) {
        let shift = delta * mean_diag;
        let mut work = a.to_owned();
        if shift != 0.0 {
            for i in 0..n {
                work[[i, i]] += shift;
            }
        }
        match cholesky_in_place(&mut work) {
            Ok(()) => {
                return Ok(CholeskyFactor {
                    l: work,
                    inv: None,
                    jitter: shift,
                    clamped: false,
                })
            }
            Err(pivot) => {
                last_pivot = pivot;
                last_jitter = shift;
            }
        }
    }
    Err(NumericsError::NotPositiveDefinite {
        dimension: n,
        pivot: last_pivot,
        jitter: last_jitter,
    })
}

/// Blocked right-looking in-place factorization. On success the lower
/// triangle holds L and the strict upper triangle is zeroed. On failure
/// returns the index of the offending pivot.
fn cholesky_in_place(a: &mut Array2<f64>) -> Result<(), usize> {
    let n = a.nrows();
    let mut k = 0;
    while k < n {
        let kb = BLOCK.min(n - k);
        // Unblocked factorization of the diagonal block.
        for i in k..k + kb {
            for j in k..=i {
                let mut acc = a[[i, j]];
                for m in k..j {
                    acc -= a[[i, m]] * a[[j, m]];
                }
                if i == j {
                    if !(acc > 0.0) || !acc.is_finite() {
                        return Err(i);
                    }
                    a[[i, i]] = acc.sqrt();
                } else {
                    a[[i, j]] = acc / a[[j, j]];
                }
            }
        }
        if k + kb < n {
            // Panel: L21 = A21 · L11⁻ᵀ by forward elimination per row.
            for r in k + kb..n {
                for j in k..k + kb {
                    let mut acc = a[[r, j]];
                    for m in k..j {
                        acc -= a[[r, m]] * a[[j, m]];
                    }
                    a[[r, j]] = acc / a[[j, j]];
                }
            }
            // Trailing update A22 -= L21·L21ᵀ, the O(n^3) bulk.
            let (l21, mut a22) =
                a.multi_slice_mut((s![k + kb..n, k..k + kb], s![k + kb..n, k + kb..n]));
            let l21 = l21.view();
            general_mat_mul(-1.0, &l21, &l21.t(), 1.0, &mut a22);
        }
        k += kb;
    }
    for i in 0..n {
        for j in i + 1..n {
            a[[i, j]] = 0.0;
        }
    }
    Ok(())
}

/// Extends a factor of K to a factor of the (n+1)-dimensional matrix
/// K' = [[K, c], [cᵀ, κ]] in O(n^2) operations.
///
/// The new last row v solves L·v = c; the corner is √(κ − vᵀv). A
/// non-positive value under the root is clamped to 1e-6·√κ and reported
/// through [`CholeskyFactor::was_clamped`]. The top-left n×n block of the
/// result is a bit-identical copy of the input factor.
pub fn extend_cholesky(
    f: &CholeskyFactor,
    new_column: ArrayView1<'_, f64>,
    new_diagonal: f64,
) -> Result<CholeskyFactor, NumericsError> {
    let n = f.dim();
    if new_column.len() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            found: new_column.len(),
        });
    }
    let v = solve_lower_vec(f.l.view(), new_column)?;
    let under_root = new_diagonal - v.dot(&v);
    let (corner, clamped) = if under_root > 0.0 {
        (under_root.sqrt(), false)
    } else {
        (1e-6 * new_diagonal.abs().sqrt(), true)
    };

    let mut l = Array2::zeros((n + 1, n + 1));
    l.slice_mut(s![..n, ..n]).assign(&f.l);
    l.slice_mut(s![n, ..n]).assign(&v);
    l[[n, n]] = corner;
    Ok(CholeskyFactor {
        l,
        inv: None,
        jitter: f.jitter,
        clamped,
    })
}

/// Given a factor carrying L⁻¹ and the output of [`extend_cholesky`] on it,
/// attaches the inverse of the extended factor in O(n^2) operations:
///
/// L'⁻¹ = [[L⁻¹, 0], [−vᵀL⁻¹/s, 1/s]]
///
/// with v the new row and s the new corner of L'.
pub fn extend_inverse_cholesky(
    f: &CholeskyFactor,
    extended: CholeskyFactor,
) -> Result<CholeskyFactor, NumericsError> {
    let n = f.dim();
    if extended.dim() != n + 1 {
        return Err(NumericsError::DimensionMismatch {
            expected: n + 1,
            found: extended.dim(),
        });
    }
    let base_inv = f.inv.as_ref().ok_or(NumericsError::InverseNotAvailable)?;
    let corner = extended.l[[n, n]];
    if !corner.is_finite() || corner.abs() < f64::MIN_POSITIVE {
        return Err(NumericsError::DegenerateDiagonal);
    }

    let mut inv = Array2::zeros((n + 1, n + 1));
    inv.slice_mut(s![..n, ..n]).assign(base_inv);
    {
        // last row: −vᵀ·L⁻¹ / s, accumulated row-wise over L⁻¹
        let v = extended.l.slice(s![n, ..n]);
        let mut row = inv.slice_mut(s![n, ..n]);
        for i in 0..n {
            let vi = v[i];
            if vi != 0.0 {
                row.scaled_add(-vi / corner, &base_inv.row(i));
            }
        }
    }
    inv[[n, n]] = 1.0 / corner;

    let mut out = extended;
    out.inv = Some(inv);
    Ok(out)
}

/// Forward substitution for L·x = b with a single right-hand side.
pub fn solve_lower_vec(
    l: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<Array1<f64>, NumericsError> {
    let n = l.nrows();
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut x = b.to_owned();
    for i in 0..n {
        let row = l.row(i);
        let mut acc = x[i];
        for m in 0..i {
            acc -= row[m] * x[m];
        }
        x[i] = acc / row[i];
    }
    Ok(x)
}

/// Forward substitution for L·X = B with column-wise right-hand sides.
pub fn solve_lower_mat(
    l: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> Result<Array2<f64>, NumericsError> {
    let n = l.nrows();
    if b.nrows() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            found: b.nrows(),
        });
    }
    let mut x = b.to_owned();
    forward_sub_multi(l, &mut x);
    Ok(x)
}

/// Backward substitution for Lᵀ·x = b.
pub fn solve_lower_transpose_vec(
    l: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<Array1<f64>, NumericsError> {
    let n = l.nrows();
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut x = b.to_owned();
    back_substitute_vec(l, x.view_mut());
    Ok(x)
}

fn back_substitute_vec(l: ArrayView2<'_, f64>, mut x: ndarray::ArrayViewMut1<'_, f64>) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for m in i + 1..n {
            acc -= l[[m, i]] * x[m];
        }
        x[i] = acc / l[[i, i]];
    }
}

/// Blocked forward substitution, in place over the right-hand sides.
fn forward_sub_multi(l: ArrayView2<'_, f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    let ncols = b.ncols();
    let mut row_buf = Array1::zeros(ncols);
    let mut k = 0;
    while k < n {
        let kb = BLOCK.min(n - k);
        for i in k..k + kb {
            row_buf.assign(&b.row(i));
            for m in k..i {
                let c = l[[i, m]];
                if c != 0.0 {
                    row_buf.scaled_add(-c, &b.row(m));
                }
            }
            let d = l[[i, i]];
            row_buf.mapv_inplace(|v| v / d);
            b.row_mut(i).assign(&row_buf);
        }
        if k + kb < n {
            let (top, mut bottom) = b.multi_slice_mut((s![k..k + kb, ..], s![k + kb..n, ..]));
            general_mat_mul(
                -1.0,
                &l.slice(s![k + kb..n, k..k + kb]),
                &top.view(),
                1.0,
                &mut bottom,
            );
        }
        k += kb;
    }
}

/// Blocked backward substitution for Lᵀ·X = B, in place.
fn back_sub_multi(l: ArrayView2<'_, f64>, b: &mut Array2<f64>) {
    let n = l.nrows();
    let ncols = b.ncols();
    let mut row_buf = Array1::zeros(ncols);
    let mut k = n;
    while k > 0 {
        let kb = BLOCK.min(k);
        let base = k - kb;
        for i in (base..k).rev() {
            row_buf.assign(&b.row(i));
            for m in i + 1..k {
                let c = l[[m, i]];
                if c != 0.0 {
                    row_buf.scaled_add(-c, &b.row(m));
                }
            }
            let d = l[[i, i]];
            row_buf.mapv_inplace(|v| v / d);
            b.row_mut(i).assign(&row_buf);
        }
        if base > 0 {
            let (mut top, bottom) = b.multi_slice_mut((s![..base, ..], s![base..k, ..]));
            general_mat_mul(
                -1.0,
                &l.slice(s![base..k, ..base]).t(),
                &bottom.view(),
                1.0,
                &mut top,
            );
        }
        k = base;
    }
}

/// Explicit inverse of a lower-triangular matrix, divide-and-conquer with
/// the off-diagonal block −L22⁻¹·L21·L11⁻¹ formed by matrix products.
pub(crate) fn lower_triangular_inverse(l: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = l.nrows();
    if n <= BLOCK {
        let mut w = Array2::zeros((n, n));
        for j in 0..n {
            w[[j, j]] = 1.0 / l[[j, j]];
            for i in j + 1..n {
                let mut acc = 0.0;
                for m in j..i {
                    acc += l[[i, m]] * w[[m, j]];
                }
                w[[i, j]] = -acc / l[[i, i]];
            }
        }
        return w;
    }
    let half = n / 2;
    let a = lower_triangular_inverse(l.slice(s![..half, ..half]));
    let d = lower_triangular_inverse(l.slice(s![half.., half..]));
    let mut out = Array2::zeros((n, n));
    out.slice_mut(s![..half, ..half]).assign(&a);
    out.slice_mut(s![half.., half..]).assign(&d);
    let mut tmp = Array2::zeros((n - half, half));
    general_mat_mul(1.0, &l.slice(s![half.., ..half]), &a.view(), 0.0, &mut tmp);
    {
        let mut c = out.slice_mut(s![half.., ..half]);
        general_mat_mul(-1.0, &d.view(), &tmp.view(), 0.0, &mut c);
    }
    out
}

/// Frobenius norm of the reconstruction error ‖L·Lᵀ − K‖_F / ‖K‖_F.
pub fn reconstruction_error(f: &CholeskyFactor, k: ArrayView2<'_, f64>) -> f64 {
    let rebuilt = f.l.dot(&f.l.t());
    let mut num = 0.0;
    let mut den = 0.0;
    for (r, k) in rebuilt.iter().zip(k.iter()) {
        num += (r - k) * (r - k);
        den += k * k;
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

pub(crate) fn max_abs(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Largest singular value by power iteration on AᵀA, deterministic start.
pub(crate) fn spectral_norm(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut sigma = 0.0;
    for _ in 0..100 {
        let av = a.dot(&v);
        let atav = a.t().dot(&av);
        let norm = atav.dot(&atav).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next_sigma = av.dot(&av).sqrt();
        v = atav / norm;
        if (next_sigma - sigma).abs() <= 1e-12 * next_sigma.max(1.0) {
            return next_sigma;
        }
        sigma = next_sigma;
    }
    sigma
}

#[cfg(test)]
pub(crate) fn random_spd(n: usize, seed: u64) -> Array2<f64> {
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
    let mut a = b.t().dot(&b);
    for i in 0..n {
        a[[i, i]] += 0.1 * n as f64;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2};
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn identity(n: usize) -> Array2<f64> {
        Array2::eye(n)
    }

    fn eig2x2_min(m: &Array2<f64>) -> f64 {
        // closed-form eigenvalues of a symmetric 2x2 matrix
        let (a, b, d) = (m[[0, 0]], m[[0, 1]], m[[1, 1]]);
        let mean = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        mean - disc
    }

    #[test]
    fn factors_hand_checked_2x2() {
        let m = SpdMatrix::new(arr2(&[[4.0, 2.0], [2.0, 5.0]])).unwrap();
        let f = cholesky(&m).unwrap();
        let expected = arr2(&[[2.0, 0.0], [1.0, 2.0]]);
        assert_abs_diff_eq!(f.l(), expected.view(), epsilon = 1e-14);
        assert_eq!(f.jitter(), 0.0);
    }

    #[test]
    fn identity_factors_to_identity() {
        let m = SpdMatrix::new(identity(3)).unwrap();
        let f = cholesky(&m).unwrap();
        assert_abs_diff_eq!(f.l(), identity(3).view(), epsilon = 0.0);
    }

    #[test]
    fn rank_deficient_succeeds_via_jitter() {
        let raw = arr2(&[[1.0, 1.0], [1.0, 1.0]]);
        // eigendecomposition oracle: the minimum eigenvalue is exactly 0,
        // so the plain factorization must fail and jitter must kick in
        assert!(eig2x2_min(&raw) <= 0.0);
        let m = SpdMatrix::new(raw.clone()).unwrap();
        let f = cholesky(&m).unwrap();
        assert!(f.jitter() > 0.0);
        let mut shifted = raw;
        for i in 0..2 {
            shifted[[i, i]] += f.jitter();
        }
        let rebuilt = f.l().to_owned().dot(&f.l().t());
        assert_abs_diff_eq!(rebuilt, shifted, epsilon = 1e-10);
    }

    #[test]
    fn indefinite_fails_after_ladder() {
        let raw = arr2(&[[1.0, 2.0], [2.0, 1.0]]);
        let m = SpdMatrix::new(raw).unwrap();
        match cholesky(&m) {
            Err(NumericsError::NotPositiveDefinite { dimension: 2, .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn spd_matrix_rejects_asymmetry_and_bad_diagonal() {
        assert!(matches!(
            SpdMatrix::new(arr2(&[[1.0, 0.5], [0.2, 1.0]])),
            Err(NumericsError::NotSymmetric)
        ));
        assert!(matches!(
            SpdMatrix::new(arr2(&[[0.0, 0.0], [0.0, 1.0]])),
            Err(NumericsError::NonPositiveDiagonal)
        ));
    }

    #[test]
    fn extend_matches_hand_computed_column() {
        let m = SpdMatrix::new(arr2(&[[4.0, 2.0], [2.0, 5.0]])).unwrap();
        let f = cholesky(&m).unwrap();
        let ext = extend_cholesky(&f, arr1(&[2.0, 3.0]).view(), 6.0).unwrap();
        assert!(!ext.was_clamped());
        // hand solve: v1 = 2/2 = 1, v2 = (3 - 1*1)/2 = 1, corner = sqrt(6-2) = 2
        assert_abs_diff_eq!(ext.l()[[2, 0]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ext.l()[[2, 1]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ext.l()[[2, 2]], 2.0, epsilon = 1e-15);

        // full re-factorization oracle on the assembled 3x3 matrix
        let full =
            SpdMatrix::new(arr2(&[[4.0, 2.0, 2.0], [2.0, 5.0, 3.0], [2.0, 3.0, 6.0]])).unwrap();
        let oracle = cholesky(&full).unwrap();
        assert_abs_diff_eq!(ext.l(), oracle.l(), epsilon = 1e-12);

        // the base block must be a bit-identical copy
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(ext.l()[[i, j]].to_bits(), f.l()[[i, j]].to_bits());
            }
        }
    }

    #[test]
    fn extend_identity_block_diagonal() {
        let f = cholesky(&SpdMatrix::new(identity(2)).unwrap()).unwrap();
        let ext = extend_cholesky(&f, arr1(&[0.0, 0.0]).view(), 1.0).unwrap();
        assert_abs_diff_eq!(ext.l(), identity(3).view(), epsilon = 0.0);
    }

    #[test]
    fn extend_clamps_negative_root() {
        let m = SpdMatrix::new(arr2(&[[4.0, 2.0], [2.0, 5.0]])).unwrap();
        let f = cholesky(&m).unwrap();
        // v = [1, 1], so choosing the diagonal as v·v − 1e-15 puts the value
        // under the root at −1e-15
        let diag = 2.0 - 1e-15;
        let ext = extend_cholesky(&f, arr1(&[2.0, 3.0]).view(), diag).unwrap();
        assert!(ext.was_clamped());
        assert_abs_diff_eq!(ext.l()[[2, 2]], 1e-6 * diag.sqrt(), epsilon = 1e-20);
    }

    #[test]
    fn extend_inverse_matches_direct_inversion_oracle() {
        let m = SpdMatrix::new(arr2(&[[4.0, 2.0], [2.0, 5.0]])).unwrap();
        let f = cholesky(&m).unwrap().with_inverse();
        let ext = extend_cholesky(&f, arr1(&[2.0, 3.0]).view(), 6.0).unwrap();
        let ext = extend_inverse_cholesky(&f, ext).unwrap();
        let inv = ext.inverse().unwrap();

        // direct inversion oracle: triangular inversion of the extended L
        let oracle = lower_triangular_inverse(ext.l());
        assert_abs_diff_eq!(inv, oracle.view(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            inv.row(2),
            arr1(&[-0.125, -0.25, 0.5]).view(),
            epsilon = 1e-14
        );

        let product = inv.dot(&ext.l());
        assert_abs_diff_eq!(product, identity(3), epsilon = 1e-10);
    }

    #[test]
    fn extend_inverse_identity() {
        let f = cholesky(&SpdMatrix::new(identity(2)).unwrap())
            .unwrap()
            .with_inverse();
        let ext = extend_cholesky(&f, arr1(&[0.0, 0.0]).view(), 1.0).unwrap();
        let ext = extend_inverse_cholesky(&f, ext).unwrap();
        assert_abs_diff_eq!(ext.inverse().unwrap(), identity(3).view(), epsilon = 0.0);
    }

    #[test]
    fn extend_inverse_random_5_to_6() {
        let base = random_spd(5, 7);
        let mut grown = Array2::zeros((6, 6));
        grown.slice_mut(s![..5, ..5]).assign(&base);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for i in 0..5 {
            grown[[i, 5]] = rng.gen_range(-0.5..0.5);
            grown[[5, i]] = grown[[i, 5]];
        }
        grown[[5, 5]] = base.diag().sum() / 5.0 + 1.0;

        let f = cholesky(&SpdMatrix::new(base).unwrap())
            .unwrap()
            .with_inverse();
        let col = grown.slice(s![..5, 5]).to_owned();
        let ext = extend_cholesky(&f, col.view(), grown[[5, 5]]).unwrap();
        let ext = extend_inverse_cholesky(&f, ext).unwrap();

        let oracle = cholesky(&SpdMatrix::new(grown).unwrap()).unwrap();
        let oracle_inv = lower_triangular_inverse(oracle.l());
        assert_abs_diff_eq!(ext.inverse().unwrap(), oracle_inv.view(), epsilon = 1e-10);
    }

    #[test]
    fn extend_inverse_requires_inverse_on_base() {
        let f = cholesky(&SpdMatrix::new(identity(2)).unwrap()).unwrap();
        let ext = extend_cholesky(&f, arr1(&[0.0, 0.0]).view(), 1.0).unwrap();
        assert!(matches!(
            extend_inverse_cholesky(&f, ext),
            Err(NumericsError::InverseNotAvailable)
        ));
    }

    #[test]
    fn solve_lower_cases() {
        let f = cholesky(&SpdMatrix::new(identity(3)).unwrap()).unwrap();
        let b = arr1(&[3.0, -1.0, 2.0]);
        let x = solve_lower_vec(f.l(), b.view()).unwrap();
        assert_abs_diff_eq!(x, b, epsilon = 0.0);

        let l = arr2(&[[2.0, 0.0], [1.0, 2.0]]);
        let x = solve_lower_vec(l.view(), arr1(&[2.0, 3.0]).view()).unwrap();
        assert_abs_diff_eq!(x, arr1(&[1.0, 1.0]), epsilon = 1e-15);

        // batch solve equals per-column solves
        let b = arr2(&[[2.0, 4.0], [3.0, 1.0]]);
        let xs = solve_lower_mat(l.view(), b.view()).unwrap();
        for c in 0..2 {
            let single = solve_lower_vec(l.view(), b.column(c)).unwrap();
            assert_abs_diff_eq!(xs.column(c), single.view(), epsilon = 1e-14);
        }

        assert!(matches!(
            solve_lower_vec(l.view(), arr1(&[1.0]).view()),
            Err(NumericsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn full_solve_roundtrip() {
        let a = random_spd(24, 3);
        let f = cholesky(&SpdMatrix::new(a.clone()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = Array1::from_shape_fn(24, |_| rng.gen_range(-2.0..2.0));
        let x = f.solve_vec(b.view()).unwrap();
        let back = a.dot(&x);
        assert_abs_diff_eq!(back, b, epsilon = 1e-9);
    }

    #[test]
    fn blocked_paths_match_reference_on_large_matrices() {
        // exercise the blocked factorization, solves, and inversion beyond
        // a single block
        let n = 3 * BLOCK + 17;
        let a = random_spd(n, 21);
        let f = cholesky(&SpdMatrix::new(a.clone()).unwrap()).unwrap();
        assert!(reconstruction_error(&f, a.view()) < 1e-12);

        let f = f.with_inverse();
        let inv = f.inverse().unwrap();
        let prod = inv.dot(&f.l());
        assert!(max_abs((&prod - &identity(n)).view()) < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
        let x = f.solve_mat(b.view()).unwrap();
        let back = a.dot(&x);
        assert_abs_diff_eq!(back, b, epsilon = 1e-8);
    }

    #[test]
    fn reconstruction_within_tolerance_without_jitter() {
        for (i, n) in [2usize, 7, 20, 50].into_iter().enumerate() {
            let a = random_spd(n, 40 + i as u64);
            let f = cholesky(&SpdMatrix::new(a.clone()).unwrap()).unwrap();
            assert_eq!(f.jitter(), 0.0);
            assert!(reconstruction_error(&f, a.view()) <= 1e-8);
        }
    }

    #[test]
    fn extend_equals_full_factorization_up_to_dim_50() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..20u64 {
            let n = rng.gen_range(2usize..50);
            let grown = random_spd(n + 1, 1000 + trial);
            let base = grown.slice(s![..n, ..n]).to_owned();
            let f = cholesky(&SpdMatrix::new(base).unwrap()).unwrap();
            let ext = extend_cholesky(&f, grown.slice(s![..n, n]), grown[[n, n]]).unwrap();
            assert!(!ext.was_clamped());
            let oracle = cholesky(&SpdMatrix::new(grown).unwrap()).unwrap();
            let diff = &ext.l().to_owned() - &oracle.l().to_owned();
            assert!(max_abs(diff.view()) < 1e-9);

            // discarding the last row/column returns the original factor exactly
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(ext.l()[[i, j]].to_bits(), f.l()[[i, j]].to_bits());
                }
            }
        }
    }

    #[test]
    fn spectral_norm_matches_known_values() {
        let a = arr2(&[[3.0, 0.0], [0.0, 1.0]]);
        assert_abs_diff_eq!(spectral_norm(a.view()), 3.0, epsilon = 1e-9);
        let b = arr2(&[[0.0, 2.0], [0.0, 0.0]]);
        assert_abs_diff_eq!(spectral_norm(b.view()), 2.0, epsilon = 1e-9);
    }
}
