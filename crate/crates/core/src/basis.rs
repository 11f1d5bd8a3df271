//! Multi-index ordering and the two polynomial bases (monomials and the
//! Chebyshev tensor-product basis adapted to a bounding box).

use std::ops::{Add, Mul, Sub};

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Exponent vector `α ∈ ℕⁿ`.
pub type MultiIndex = Vec<usize>;

/// `binomial(n + k, n)`, the dimension of polynomials of degree ≤ k in n variables.
pub fn dimension(n: usize, k: usize) -> Result<usize> {
    let mut acc: usize = 1;
    // C(n+k, i) built incrementally stays integral at every step.
    for i in 1..=n {
        acc = acc.checked_mul(k + i).ok_or(Error::Size { n, k })? / i;
    }
    Ok(acc)
}

fn compositions(n: usize, d: usize) -> usize {
    if n == 0 {
        return usize::from(d == 0);
    }
    dimension(n - 1, d).unwrap_or(usize::MAX)
}

/// The `i`-th multi-index (1-based) in graded lexicographic order: by total
/// degree first, then lexicographically within a degree block.
pub fn graded_lex_index(i: usize, n: usize) -> MultiIndex {
    assert!(i >= 1, "ranks are 1-based");
    assert!(n >= 1);
    let mut d = 0;
    let mut before = 0;
    loop {
        let block = compositions(n, d);
        if i <= before + block {
            break;
        }
        before += block;
        d += 1;
    }
    let mut rank = i - before - 1;
    let mut alpha = vec![0; n];
    let mut rest = d;
    for (pos, slot) in alpha.iter_mut().enumerate().take(n - 1) {
        let tail = n - pos - 1;
        for a in 0..=rest {
            let count = compositions(tail, rest - a);
            if rank < count {
                *slot = a;
                rest -= a;
                break;
            }
            rank -= count;
        }
    }
    alpha[n - 1] = rest;
    alpha
}

/// All multi-indices with `|α| ≤ k`, in graded lex order.
pub fn multi_indices(n: usize, k: usize) -> Vec<MultiIndex> {
    fn fill(prefix: &mut Vec<usize>, n: usize, rest: usize, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == n {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in 0..=rest {
            prefix.push(a);
            fill(prefix, n, rest - a, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=k {
        fill(&mut Vec::with_capacity(n), n, d, &mut out);
    }
    out
}

/// Per-coordinate affine map `P_i(z) = 2/(b_i − a_i)·(z_i − (a_i + b_i)/2)`
/// sending the box `∏[a_i, b_i]` onto `[−1, 1]ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AffineMap {
    pub fn identity(n: usize) -> Self {
        AffineMap {
            lo: vec![-1.0; n],
            hi: vec![1.0; n],
        }
    }

    pub fn from_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        assert_eq!(lo.len(), hi.len());
        for (axis, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(b > a) {
                return Err(Error::FlatMesh { axis, value: *a });
            }
        }
        Ok(AffineMap { lo, hi })
    }

    /// The map taking the coordinate-wise bounding box of `points` (M × n) to `[−1, 1]ⁿ`.
    pub fn bounding(points: &DMatrix<f64>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(Error::Invalid(
                "bounding map needs at least two points".into(),
            ));
        }
        let n = points.ncols();
        let lo = (0..n).map(|c| points.column(c).min()).collect();
        let hi = (0..n).map(|c| points.column(c).max()).collect();
        Self::from_box(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Derivative `2/(b_i − a_i)` of the i-th coordinate map.
    pub fn scale(&self, i: usize) -> f64 {
        2.0 / (self.hi[i] - self.lo[i])
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.lo[i] + self.hi[i])
    }

    pub fn apply(&self, i: usize, x: f64) -> f64 {
        self.scale(i) * (x - self.center(i))
    }

    pub fn invert(&self, i: usize, y: f64) -> f64 {
        y / self.scale(i) + self.center(i)
    }

    pub fn apply_complex(&self, i: usize, z: Complex<f64>) -> Complex<f64> {
        (z - self.center(i)) * self.scale(i)
    }
}

/// Which polynomial basis spans `℘ᵏ`.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisSpec {
    Monomial { n: usize },
    Chebyshev(AffineMap),
}

impl BasisSpec {
    pub fn dim(&self) -> usize {
        match self {
            BasisSpec::Monomial { n } => *n,
            BasisSpec::Chebyshev(map) => map.dim(),
        }
    }

    /// Chebyshev basis adapted to the bounding box of `points`.
    pub fn chebyshev_adapted(points: &DMatrix<f64>) -> Result<Self> {
        Ok(BasisSpec::Chebyshev(AffineMap::bounding(points)?))
    }

    pub fn chebyshev_identity(n: usize) -> Self {
        BasisSpec::Chebyshev(AffineMap::identity(n))
    }
}

/// Chebyshev evaluation path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[default]
    Recurrence,
    /// `T_h(x) = cos(h·arccos x)`; real points inside `[−1, 1]` only.
    ClosedForm,
}

trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex<f64> {
    fn from_f64(x: f64) -> Self {
        Complex::new(x, 0.0)
    }
}

/// One-variable tables `T_0(x)..T_k(x)` (or `x^0..x^k`) with derivatives.
fn univariate<T: Scalar>(chebyshev: bool, x: T, k: usize, out: &mut [T], dout: Option<&mut [T]>) {
    let one = T::from_f64(1.0);
    let zero = T::from_f64(0.0);
    let two = T::from_f64(2.0);
    out[0] = one;
    if k >= 1 {
        out[1] = x;
    }
    for h in 1..k {
        out[h + 1] = if chebyshev {
            two * x * out[h] - out[h - 1]
        } else {
            x * out[h]
        };
    }
    if let Some(d) = dout {
        d[0] = zero;
        if k >= 1 {
            d[1] = one;
        }
        for h in 1..k {
            d[h + 1] = if chebyshev {
                two * out[h] + two * x * d[h] - d[h - 1]
            } else {
                T::from_f64((h + 1) as f64) * out[h]
            };
        }
    }
}

fn check_closed_form(spec: &BasisSpec, points: &CMatrix) -> Result<()> {
    let map = match spec {
        BasisSpec::Chebyshev(map) => map,
        BasisSpec::Monomial { .. } => {
            return Err(Error::Invalid(
                "closed-form evaluation applies to the Chebyshev basis only".into(),
            ))
        }
    };
    for i in 0..points.nrows() {
        for c in 0..points.ncols() {
            let z = points.get(i, c);
            let x = map.apply(c, z.re);
            if z.im != 0.0 || !(x.abs() <= 1.0 + 1e-12) {
                return Err(Error::Domain {
                    index: i,
                    value: format!("{x}{:+}i", z.im * map.scale(c)),
                });
            }
        }
    }
    Ok(())
}

struct Layout {
    alphas: Vec<MultiIndex>,
    n: usize,
    k: usize,
}

impl Layout {
    fn new(spec: &BasisSpec, k: usize, points: &CMatrix) -> Result<Self> {
        let n = spec.dim();
        if points.ncols() != n {
            return Err(Error::Invalid(format!(
                "points have {} coordinates, basis expects {n}",
                points.ncols()
            )));
        }
        dimension(n, k)?;
        Ok(Layout {
            alphas: multi_indices(n, k),
            n,
            k,
        })
    }
}

fn mapped<T: Scalar>(
    spec: &BasisSpec,
    c: usize,
    z: T,
    apply: impl Fn(&AffineMap, usize, T) -> T,
) -> T {
    match spec {
        BasisSpec::Chebyshev(map) => apply(map, c, z),
        BasisSpec::Monomial { .. } => z,
    }
}

/// Evaluates values (and optionally all first partials) of the basis for one
/// point, writing row `i` of `vals` and of each `ders[m]`.
fn eval_point<T: Scalar>(
    spec: &BasisSpec,
    layout: &Layout,
    coords: &[T],
    scales: &[f64],
    tables: &mut [Vec<T>],
    dtables: &mut [Vec<T>],
    want_der: bool,
    mut put: impl FnMut(usize, Option<usize>, T),
) {
    let chebyshev = matches!(spec, BasisSpec::Chebyshev(_));
    for c in 0..layout.n {
        let d = if want_der {
            Some(&mut dtables[c][..])
        } else {
            None
        };
        univariate(chebyshev, coords[c], layout.k, &mut tables[c], d);
    }
    for (j, alpha) in layout.alphas.iter().enumerate() {
        let mut v = T::from_f64(1.0);
        for c in 0..layout.n {
            v = v * tables[c][alpha[c]];
        }
        put(j, None, v);
        if want_der {
            for m in 0..layout.n {
                let mut dv = T::from_f64(scales[m]) * dtables[m][alpha[m]];
                for c in 0..layout.n {
                    if c != m {
                        dv = dv * tables[c][alpha[c]];
                    }
                }
                put(j, Some(m), dv);
            }
        }
    }
}

fn eval_impl(
    spec: &BasisSpec,
    k: usize,
    points: &CMatrix,
    want_der: bool,
) -> Result<(CMatrix, Vec<CMatrix>)> {
    let layout = Layout::new(spec, k, points)?;
    let (l, n, nk) = (points.nrows(), layout.n, layout.alphas.len());
    let scales: Vec<f64> = (0..n)
        .map(|c| match spec {
            BasisSpec::Chebyshev(map) => map.scale(c),
            BasisSpec::Monomial { .. } => 1.0,
        })
        .collect();
    let nder = if want_der { n } else { 0 };
    if points.is_real() {
        let mut vals = DMatrix::<f64>::zeros(l, nk);
        let mut ders = vec![DMatrix::<f64>::zeros(l, nk); nder];
        let mut tables = vec![vec![0.0; k + 1]; n];
        let mut dtables = vec![vec![0.0; k + 1]; n];
        let mut coords = vec![0.0; n];
        for i in 0..l {
            for (c, x) in coords.iter_mut().enumerate() {
                *x = mapped(spec, c, points.re[(i, c)], |m, c, x| m.apply(c, x));
            }
            eval_point(
                spec,
                &layout,
                &coords,
                &scales,
                &mut tables,
                &mut dtables,
                want_der,
                |j, m, v| match m {
                    None => vals[(i, j)] = v,
                    Some(m) => ders[m][(i, j)] = v,
                },
            );
        }
        Ok((
            CMatrix::real(vals),
            ders.into_iter().map(CMatrix::real).collect(),
        ))
    } else {
        let zero = Complex::new(0.0, 0.0);
        let mut vals = DMatrix::from_element(l, nk, zero);
        let mut ders = vec![DMatrix::from_element(l, nk, zero); nder];
        let mut tables = vec![vec![zero; k + 1]; n];
        let mut dtables = vec![vec![zero; k + 1]; n];
        let mut coords = vec![zero; n];
        for i in 0..l {
            for (c, z) in coords.iter_mut().enumerate() {
                *z = mapped(spec, c, points.get(i, c), |m, c, z| m.apply_complex(c, z));
            }
            eval_point(
                spec,
                &layout,
                &coords,
                &scales,
                &mut tables,
                &mut dtables,
                want_der,
                |j, m, v| match m {
                    None => vals[(i, j)] = v,
                    Some(m) => ders[m][(i, j)] = v,
                },
            );
        }
        Ok((
            CMatrix::from_complex(&vals),
            ders.iter().map(CMatrix::from_complex).collect(),
        ))
    }
}

fn eval_closed_form(spec: &BasisSpec, k: usize, points: &CMatrix) -> Result<CMatrix> {
    check_closed_form(spec, points)?;
    let layout = Layout::new(spec, k, points)?;
    let BasisSpec::Chebyshev(map) = spec else {
        unreachable!("checked above")
    };
    let (l, n) = (points.nrows(), layout.n);
    let mut vals = DMatrix::<f64>::zeros(l, layout.alphas.len());
    let mut theta = vec![0.0; n];
    for i in 0..l {
        for (c, t) in theta.iter_mut().enumerate() {
            *t = map.apply(c, points.re[(i, c)]).clamp(-1.0, 1.0).acos();
        }
        for (j, alpha) in layout.alphas.iter().enumerate() {
            vals[(i, j)] = (0..n).map(|c| (alpha[c] as f64 * theta[c]).cos()).product();
        }
    }
    Ok(CMatrix::real(vals))
}

/// Basis matrix with entry `(i, j) = φ_j(point_i)`; columns in graded lex order.
pub fn eval_basis(spec: &BasisSpec, k: usize, points: &CMatrix, mode: EvalMode) -> Result<CMatrix> {
    match mode {
        EvalMode::Recurrence => Ok(eval_impl(spec, k, points, false)?.0),
        EvalMode::ClosedForm => eval_closed_form(spec, k, points),
    }
}

/// Real Vandermonde-type matrix for real points (recurrence path).
pub fn eval_basis_real(spec: &BasisSpec, k: usize, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = eval_impl(spec, k, &CMatrix::real(points.clone()), false)?.0;
    Ok(m.re)
}

/// Values and partial derivatives: `ders[m](i, j) = ∂φ_j/∂z_m (point_i)`.
pub fn eval_basis_with_derivatives(
    spec: &BasisSpec,
    k: usize,
    points: &CMatrix,
) -> Result<(CMatrix, Vec<CMatrix>)> {
    eval_impl(spec, k, points, true)
}

/// The derivative tensor alone, one `L × N_k` slice per coordinate.
pub fn eval_basis_derivatives(
    spec: &BasisSpec,
    k: usize,
    points: &CMatrix,
) -> Result<Vec<CMatrix>> {
    Ok(eval_impl(spec, k, points, true)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranks_follow_graded_lex() {
        assert_eq!(graded_lex_index(1, 2), vec![0, 0]);
        assert_eq!(graded_lex_index(2, 2), vec![0, 1]);
        assert_eq!(graded_lex_index(3, 2), vec![1, 0]);
        assert_eq!(graded_lex_index(4, 2), vec![0, 2]);
        assert_eq!(graded_lex_index(6, 2), vec![2, 0]);
    }

    #[test]
    fn dimensions() {
        assert_eq!(dimension(2, 0).unwrap(), 1);
        assert_eq!(dimension(2, 2).unwrap(), 6);
        assert_eq!(dimension(2, 28).unwrap(), 435);
        assert_eq!(dimension(3, 4).unwrap(), 35);
        assert!(matches!(
            dimension(4, usize::MAX / 2),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn bounding_map_of_rectangle() {
        let pts = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 2.0, 0.5, 1.0]);
        let map = AffineMap::bounding(&pts).unwrap();
        assert_eq!(map.apply(0, 0.3), 2.0 * 0.3 - 1.0);
        assert_eq!(map.apply(1, 0.3), 0.3 - 1.0);
        let flat = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            AffineMap::bounding(&flat),
            Err(Error::FlatMesh { axis: 1, .. })
        ));
    }

    #[test]
    fn monomial_row_order() {
        let pts = CMatrix::real(DMatrix::from_row_slice(1, 2, &[2.0, 3.0]));
        let v = eval_basis(&BasisSpec::Monomial { n: 2 }, 1, &pts, EvalMode::Recurrence).unwrap();
        assert_eq!(
            v.re.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 3.0, 2.0]
        );
    }

    #[test]
    fn chebyshev_degree_two_values() {
        let pts = CMatrix::real(DMatrix::from_row_slice(1, 2, &[0.5, 0.0]));
        let spec = BasisSpec::chebyshev_identity(2);
        let v = eval_basis(&spec, 2, &pts, EvalMode::Recurrence).unwrap();
        assert_eq!(v.re[(0, 3)], -1.0);
        assert_eq!(v.re[(0, 5)], -0.5);
    }

    #[test]
    fn closed_form_matches_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = DMatrix::from_fn(100, 2, |_, _| rng.random_range(-1.0..1.0));
        let pts = CMatrix::real(pts);
        let spec = BasisSpec::chebyshev_identity(2);
        let a = eval_basis(&spec, 10, &pts, EvalMode::Recurrence).unwrap();
        let b = eval_basis(&spec, 10, &pts, EvalMode::ClosedForm).unwrap();
        assert!((a.re - b.re).abs().max() < 1e-12);
    }

    #[test]
    fn closed_form_rejects_outside_points() {
        let spec = BasisSpec::chebyshev_identity(2);
        let pts = CMatrix::real(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.5, 0.0]));
        assert!(matches!(
            eval_basis(&spec, 3, &pts, EvalMode::ClosedForm),
            Err(Error::Domain { index: 1, .. })
        ));
        let z = CMatrix::from_parts(
            DMatrix::from_row_slice(1, 2, &[0.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.1, 0.0]),
        );
        assert!(eval_basis(&spec, 3, &z, EvalMode::ClosedForm).is_err());
    }

    #[test]
    fn derivative_of_t2() {
        let spec = BasisSpec::chebyshev_identity(2);
        let pts = CMatrix::real(DMatrix::from_row_slice(1, 2, &[0.25, 0.7]));
        let d = eval_basis_derivatives(&spec, 2, &pts).unwrap();
        assert_eq!(d[0].re[(0, 0)], 0.0);
        assert_eq!(d[1].re[(0, 0)], 0.0);
        // α = (2, 0) is column 6 (0-based 5); ∂/∂x T₂(x) = 4x.
        assert!((d[0].re[(0, 5)] - 1.0).abs() < 1e-15);
    }

    fn fd_check(spec: &BasisSpec, k: usize, pts: &CMatrix) {
        let h = 1e-6;
        let d = eval_basis_derivatives(spec, k, pts).unwrap();
        for m in 0..pts.ncols() {
            let mut plus = pts.clone();
            let mut minus = pts.clone();
            for i in 0..pts.nrows() {
                plus.re[(i, m)] += h;
                minus.re[(i, m)] -= h;
            }
            let vp = eval_basis(spec, k, &plus, EvalMode::Recurrence)
                .unwrap()
                .to_complex();
            let vm = eval_basis(spec, k, &minus, EvalMode::Recurrence)
                .unwrap()
                .to_complex();
            let dd = d[m].to_complex();
            for i in 0..pts.nrows() {
                for j in 0..vp.ncols() {
                    let fd = (vp[(i, j)] - vm[(i, j)]) / (2.0 * h);
                    let exact = dd[(i, j)];
                    let scale = exact.norm().max(1.0);
                    assert!(
                        (fd - exact).norm() / scale < 1e-7,
                        "m={m} i={i} j={j}: fd {fd} exact {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = DMatrix::from_fn(20, 2, |_, _| rng.random_range(-0.9..0.9));
        let map = AffineMap::from_box(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        fd_check(&BasisSpec::Chebyshev(map), 6, &CMatrix::real(pts.clone()));
        fd_check(
            &BasisSpec::Monomial { n: 2 },
            5,
            &CMatrix::real(pts.clone()),
        );
        let im = DMatrix::from_fn(20, 2, |_, _| rng.random_range(-0.3..0.3));
        fd_check(
            &BasisSpec::chebyshev_identity(2),
            6,
            &CMatrix::from_parts(pts, im),
        );
    }

    #[test]
    fn bases_share_column_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = DMatrix::from_fn(60, 2, |_, _| rng.random_range(-1.0..1.0));
        let k = 5;
        let a = eval_basis_real(&BasisSpec::Monomial { n: 2 }, k, &pts).unwrap();
        let b = eval_basis_real(&BasisSpec::chebyshev_adapted(&pts).unwrap(), k, &pts).unwrap();
        let rank = |m: &DMatrix<f64>| m.clone().svd(false, false).rank(1e-10 * m.norm());
        assert_eq!(rank(&a), rank(&b));
        for _ in 0..5 {
            let y = nalgebra::DVector::from_fn(60, |_, _| rng.random_range(-1.0..1.0));
            let res = |m: &DMatrix<f64>| {
                let x = m.clone().svd(true, true).solve(&y, 1e-14).unwrap();
                (m * x - &y).norm()
            };
            assert!((res(&a) - res(&b)).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn enumeration_is_exhaustive(n in 1usize..4, k in 0usize..7) {
            let all = multi_indices(n, k);
            prop_assert_eq!(all.len(), dimension(n, k).unwrap());
            for (i, a) in all.iter().enumerate() {
                prop_assert_eq!(&graded_lex_index(i + 1, n), a);
                prop_assert!(a.iter().sum::<usize>() <= k);
            }
            let mut sorted = all.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), all.len());
        }

        #[test]
        fn graded_order_is_strict(i in 1usize..200, j in 1usize..200) {
            prop_assume!(i < j);
            let a = graded_lex_index(i, 2);
            let b = graded_lex_index(j, 2);
            let (da, db) = (a[0] + a[1], b[0] + b[1]);
            prop_assert!(da < db || (da == db && a < b));
        }
    }
}
