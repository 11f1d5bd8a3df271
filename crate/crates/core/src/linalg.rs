//! Dense kernels shared by the orthonormalization and Gram-determinant code:
//! a blocked Householder QR, blocked triangular solves, and compensated sums.
//!
//! Everything here is real. Complex quantities only arise when basis
//! functions are evaluated at non-real targets, and since every triangular
//! factor is real those are handled by solving the real and imaginary parts
//! separately (see [`CMatrix`]).

use nalgebra::{Complex, DMatrix, Dyn, Matrix, Storage, StorageMut};

/// Column block width for the QR panels and triangular solves.
const BLOCK: usize = 48;

/// A complex matrix stored as separate real and imaginary parts.
///
/// `im == None` marks a matrix known to be real, which lets the real-grid
/// pipelines skip half of the work.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub re: DMatrix<f64>,
    pub im: Option<DMatrix<f64>>,
}

impl CMatrix {
    pub fn real(re: DMatrix<f64>) -> Self {
        CMatrix { re, im: None }
    }

    pub fn from_parts(re: DMatrix<f64>, im: DMatrix<f64>) -> Self {
        assert_eq!(re.shape(), im.shape());
        CMatrix { re, im: Some(im) }
    }

    pub fn from_complex(m: &DMatrix<Complex<f64>>) -> Self {
        let re = m.map(|z| z.re);
        if m.iter().all(|z| z.im == 0.0) {
            CMatrix::real(re)
        } else {
            CMatrix::from_parts(re, m.map(|z| z.im))
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex<f64>> {
        match &self.im {
            None => self.re.map(|x| Complex::new(x, 0.0)),
            Some(im) => DMatrix::from_fn(self.re.nrows(), self.re.ncols(), |i, j| {
                Complex::new(self.re[(i, j)], im[(i, j)])
            }),
        }
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<f64> {
        Complex::new(
            self.re[(i, j)],
            self.im.as_ref().map_or(0.0, |im| im[(i, j)]),
        )
    }

    /// Squared modulus of entry `(i, j)`.
    pub fn norm_sqr(&self, i: usize, j: usize) -> f64 {
        let re = self.re[(i, j)];
        let im = self.im.as_ref().map_or(0.0, |im| im[(i, j)]);
        re * re + im * im
    }

    /// `X ↦ X R⁻¹` for a real upper-triangular `R`, part by part.
    pub fn solve_right_upper(&mut self, r: &DMatrix<f64>) {
        solve_right_upper(&mut self.re, r);
        if let Some(im) = self.im.as_mut() {
            solve_right_upper(im, r);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.re *= s;
        if let Some(im) = self.im.as_mut() {
            *im *= s;
        }
    }
}

/// `C ← α·op(A)·op(B) + β·C` through `matrixmultiply`, with transposition
/// expressed by swapping strides.
pub(crate) fn gemm<SA, SB, SC>(
    c: &mut Matrix<f64, Dyn, Dyn, SC>,
    alpha: f64,
    a: &Matrix<f64, Dyn, Dyn, SA>,
    trans_a: bool,
    b: &Matrix<f64, Dyn, Dyn, SB>,
    trans_b: bool,
    beta: f64,
) where
    SA: Storage<f64, Dyn, Dyn>,
    SB: Storage<f64, Dyn, Dyn>,
    SC: StorageMut<f64, Dyn, Dyn>,
{
    let (m, k) = if trans_a {
        (a.ncols(), a.nrows())
    } else {
        a.shape()
    };
    let (kb, n) = if trans_b {
        (b.ncols(), b.nrows())
    } else {
        b.shape()
    };
    assert_eq!(k, kb, "gemm: inner dimensions differ");
    assert_eq!(c.shape(), (m, n), "gemm: output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c.fill(0.0);
        } else {
            *c *= beta;
        }
        return;
    }
    let (ars, acs) = a.strides();
    let (ars, acs) = if trans_a { (acs, ars) } else { (ars, acs) };
    let (brs, bcs) = b.strides();
    let (brs, bcs) = if trans_b { (bcs, brs) } else { (brs, bcs) };
    let (crs, ccs) = c.strides();
    // SAFETY: dimensions and strides come from live nalgebra storages and
    // were checked against each other above; `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            ars as isize,
            acs as isize,
            b.as_ptr(),
            brs as isize,
            bcs as isize,
            beta,
            c.as_mut_ptr(),
            crs as isize,
            ccs as isize,
        );
    }
}

/// Thin QR factors of a tall matrix.
#[derive(Clone, Debug)]
pub struct ThinQr {
    /// `m × n` with orthonormal columns (only when requested).
    pub q: Option<DMatrix<f64>>,
    /// `n × n` upper triangular with non-negative diagonal.
    pub r: DMatrix<f64>,
}

/// Generates the Householder reflector for column `j` below the diagonal
/// (LAPACK `dlarfg` convention). On return `a[j, j] = β`, the tail of the
/// column holds `v[1..]` (with implicit `v[0] = 1`), and `τ` is returned.
fn householder_column(data: &mut [f64], m: usize, j: usize) -> f64 {
    let col = &mut data[j * m + j..(j + 1) * m];
    let alpha = col[0];
    let tail_norm = col[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if tail_norm == 0.0 {
        return 0.0;
    }
    let beta = -alpha.signum() * alpha.hypot(tail_norm);
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for x in &mut col[1..] {
        *x *= scale;
    }
    col[0] = beta;
    tau
}

/// Blocked Householder QR (compact WY form). The diagonal of `R` is made
/// non-negative by flipping signs of matching rows of `R` and columns of `Q`.
pub fn thin_qr(mut a: DMatrix<f64>, want_q: bool) -> ThinQr {
    let (m, n) = a.shape();
    assert!(m >= n, "thin_qr needs at least as many rows as columns");
    let mut tau = vec![0.0; n];
    let mut reflectors: Vec<(usize, DMatrix<f64>, DMatrix<f64>)> = Vec::new();

    let mut j0 = 0;
    while j0 < n {
        let jb = BLOCK.min(n - j0);
        {
            let data = a.as_mut_slice();
            for j in j0..j0 + jb {
                let t = householder_column(data, m, j);
                tau[j] = t;
                if t == 0.0 {
                    continue;
                }
                let (left, right) = data.split_at_mut((j + 1) * m);
                let v = &left[j * m + j..(j + 1) * m];
                for c in 0..(j0 + jb - j - 1) {
                    let col = &mut right[c * m + j..(c + 1) * m];
                    let mut w = col[0];
                    for (x, vi) in col[1..].iter().zip(&v[1..]) {
                        w += vi * x;
                    }
                    w *= t;
                    col[0] -= w;
                    for (x, vi) in col[1..].iter_mut().zip(&v[1..]) {
                        *x -= w * vi;
                    }
                }
            }
        }

        let rows = m - j0;
        let mut v = DMatrix::<f64>::zeros(rows, jb);
        for c in 0..jb {
            let j = j0 + c;
            v[(c, c)] = 1.0;
            for i in j + 1..m {
                v[(i - j0, c)] = a[(i, j)];
            }
        }

        let mut t = DMatrix::<f64>::zeros(jb, jb);
        for c in 0..jb {
            let tc = tau[j0 + c];
            t[(c, c)] = tc;
            if c == 0 || tc == 0.0 {
                continue;
            }
            let vc = v.column(c);
            let z: Vec<f64> = (0..c)
                .map(|p| v.column(p).rows_range(c..rows).dot(&vc.rows_range(c..rows)))
                .collect();
            for p in 0..c {
                let s: f64 = (p..c).map(|q| t[(p, q)] * z[q]).sum();
                t[(p, c)] = -tc * s;
            }
        }

        let nc = n - j0 - jb;
        if nc > 0 {
            let mut trailing = a.view_mut((j0, j0 + jb), (rows, nc));
            let mut w = DMatrix::<f64>::zeros(jb, nc);
            gemm(&mut w, 1.0, &v, true, &trailing, false, 0.0);
            let mut w2 = DMatrix::<f64>::zeros(jb, nc);
            gemm(&mut w2, 1.0, &t, true, &w, false, 0.0);
            gemm(&mut trailing, -1.0, &v, false, &w2, false, 1.0);
        }
        if want_q {
            reflectors.push((j0, v, t));
        }
        j0 += jb;
    }

    let mut r = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            r[(i, j)] = a[(i, j)];
        }
    }
    drop(a);

    let mut q = if want_q {
        let mut q = DMatrix::<f64>::zeros(m, n);
        for i in 0..n {
            q[(i, i)] = 1.0;
        }
        for (j0, v, t) in reflectors.into_iter().rev() {
            let jb = t.nrows();
            let mut c = q.view_mut((j0, j0), (m - j0, n - j0));
            let mut w = DMatrix::<f64>::zeros(jb, n - j0);
            gemm(&mut w, 1.0, &v, true, &c, false, 0.0);
            let mut w2 = DMatrix::<f64>::zeros(jb, n - j0);
            gemm(&mut w2, 1.0, &t, false, &w, false, 0.0);
            gemm(&mut c, -1.0, &v, false, &w2, false, 1.0);
        }
        Some(q)
    } else {
        None
    };

    for i in 0..n {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            if let Some(q) = q.as_mut() {
                q.column_mut(i).neg_mut();
            }
        }
    }
    ThinQr { q, r }
}

/// Solves `X R = B` in place (`B ← B R⁻¹`) for upper-triangular `R` by
/// column-blocked substitution.
pub fn solve_right_upper(b: &mut DMatrix<f64>, r: &DMatrix<f64>) {
    let n = r.nrows();
    assert_eq!(r.ncols(), n);
    assert_eq!(b.ncols(), n, "right-hand side has wrong column count");
    let l = b.nrows();
    if l == 0 {
        return;
    }
    let mut j0 = 0;
    while j0 < n {
        let jb = BLOCK.min(n - j0);
        if j0 > 0 {
            let (left, mut right) = b.columns_range_pair_mut(0..j0, j0..j0 + jb);
            let rblock = r.view((0, j0), (j0, jb));
            gemm(&mut right, -1.0, &left, false, &rblock, false, 1.0);
        }
        let data = b.as_mut_slice();
        for j in j0..j0 + jb {
            let (left, right) = data.split_at_mut(j * l);
            let col_j = &mut right[..l];
            for i in j0..j {
                let rij = r[(i, j)];
                if rij != 0.0 {
                    let col_i = &left[i * l..(i + 1) * l];
                    for (x, y) in col_j.iter_mut().zip(col_i) {
                        *x -= rij * y;
                    }
                }
            }
            let d = r[(j, j)];
            for x in col_j.iter_mut() {
                *x /= d;
            }
        }
        j0 += jb;
    }
}

/// Cheap condition estimate of a triangular matrix: ratio of extreme
/// diagonal magnitudes (a lower bound on the 2-norm condition number).
pub fn triangular_condition_estimate(r: &DMatrix<f64>) -> f64 {
    let (lo, hi) = r
        .diagonal()
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| {
            (lo.min(d.abs()), hi.max(d.abs()))
        });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Neumaier-compensated sum; the result depends only on the order of the
/// inputs, never on how a caller partitions work.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Singular values of a square matrix, sorted in descending order.
pub fn singular_values_desc(a: DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        for &(m, n) in &[(7, 3), (120, 100), (300, 130), (5, 5), (97, 49)] {
            let a = random_matrix(m, n, (m * n) as u64);
            let ThinQr { q, r } = thin_qr(a.clone(), true);
            let q = q.unwrap();
            let qtq = q.transpose() * &q;
            let err = (qtq - DMatrix::<f64>::identity(n, n)).abs().max();
            assert!(err < 1e-13, "orthogonality {err}");
            let rec = (&q * &r - &a).abs().max();
            assert!(rec < 1e-12, "reconstruction {rec}");
            for i in 0..n {
                assert!(r[(i, i)] >= 0.0);
                for j in 0..i {
                    assert_eq!(r[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn qr_without_q_matches_r() {
        let a = random_matrix(150, 60, 3);
        let with = thin_qr(a.clone(), true).r;
        let without = thin_qr(a, false).r;
        assert_eq!(with, without);
    }

    #[test]
    fn right_solve_inverts_triangular_product() {
        let r = {
            let mut r = random_matrix(130, 130, 9);
            for i in 0..130 {
                for j in 0..i {
                    r[(i, j)] = 0.0;
                }
                r[(i, i)] = 2.0 + r[(i, i)].abs();
            }
            r
        };
        let x = random_matrix(40, 130, 10);
        let mut b = &x * &r;
        solve_right_upper(&mut b, &r);
        assert!((b - x).abs().max() < 1e-12);
    }

    #[test]
    fn gemm_with_transposes() {
        let a = random_matrix(9, 7, 1);
        let b = random_matrix(9, 8, 2);
        let mut c = DMatrix::zeros(7, 8);
        gemm(&mut c, 1.0, &a, true, &b, false, 0.0);
        assert!((c - a.transpose() * &b).abs().max() < 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
