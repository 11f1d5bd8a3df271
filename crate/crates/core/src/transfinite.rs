//! Transfinite diameter from Gram determinants of a fixed polynomial basis,
//! calibrated against the square `[−1, 1]²` whose diameter is exactly 1/2.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{dimension, eval_basis_real, multi_indices, AffineMap, BasisSpec};
use crate::error::{Error, Result};
use crate::geometry::CompactSet;
use crate::linalg::{compensated_sum, singular_values_desc, thin_qr};
use crate::mesh::{mesh_disk, mesh_polygon, mesh_simplex, mesh_square_cl, DiskVariant, Mesh};
use crate::rho::{rho_scalar, Selector};

/// Smallest singular value accepted before the spectrum is declared unusable.
pub const SIGMA_FLOOR: f64 = 1e-150;

/// Largest number of tuples the brute-force oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Singular values of `V/√M`, descending.
#[derive(Clone, Debug, PartialEq)]
pub struct GramSpectrum {
    pub k: usize,
    pub sigma: Vec<f64>,
    pub basis: BasisSpec,
}

impl GramSpectrum {
    pub fn sum_log_sigma(&self) -> f64 {
        compensated_sum(self.sigma.iter().map(|s| s.ln()))
    }

    /// `det G = ∏ σ_j²` (underflows for large k; use the log form there).
    pub fn det(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).product()
    }

    fn check(&self) -> Result<()> {
        let min = self.sigma.last().copied().unwrap_or(1.0);
        if !(min >= SIGMA_FLOOR) {
            return Err(Error::IllConditioned { sigma_min: min });
        }
        Ok(())
    }
}

/// Chebyshev polynomials of `[−1, 1]ⁿ` (no bounding-box map).
pub fn td_basis(n: usize) -> BasisSpec {
    BasisSpec::chebyshev_identity(n)
}

/// How `log det G_k` of the graded monomials is evaluated. Every path
/// computes the same quantity through an exactly known change of basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TdMethod {
    /// Chebyshev polynomials adapted to the bounding box of the mesh.
    #[default]
    Chebyshev,
    /// Plain monomials (low degree only).
    Monomial,
    /// Orthogonal polynomials of the unit triangle in collapsed coordinates;
    /// well conditioned on meshes of the simplex.
    Triangle,
}

impl TdMethod {
    pub fn for_set(set: &CompactSet) -> Self {
        match set {
            CompactSet::Simplex => TdMethod::Triangle,
            _ => TdMethod::Chebyshev,
        }
    }
}

/// `Σ_{|α| ≤ k} Σ_i α_i·log s_i`: the log-determinant of the (triangular in
/// graded order) change of basis from `φ_α(P z)` to `φ_α(z)` when `P` scales
/// coordinate `i` by `s_i`.
fn affine_log_det(map: &AffineMap, k: usize) -> f64 {
    let logs: Vec<f64> = (0..map.dim()).map(|i| map.scale(i).ln()).collect();
    compensated_sum(
        multi_indices(map.dim(), k)
            .iter()
            .map(|a| a.iter().zip(&logs).map(|(&e, l)| e as f64 * l).sum::<f64>()),
    )
}

/// Spectrum of the normalized Vandermonde matrix `V/√M` on `points`.
pub fn gram_spectrum(points: &DMatrix<f64>, k: usize, basis: &BasisSpec) -> Result<GramSpectrum> {
    let m = points.nrows();
    let mut v = eval_basis_real(basis, k, points)?;
    v /= (m as f64).sqrt();
    let n = v.ncols();
    let sigma = if m >= n {
        singular_values_desc(thin_qr(v, false).r)
    } else {
        let mut s = singular_values_desc(v);
        s.resize(n, 0.0);
        s
    };
    Ok(GramSpectrum {
        k,
        sigma,
        basis: basis.clone(),
    })
}

fn exponent(n: usize, k: usize, nk: usize) -> f64 {
    (n as f64 + 1.0) / (n as f64 * k as f64 * nk as f64)
}

/// `(det G_k)^{(n+1)/(2nkN_k)}`, computed as `exp[((n+1)/(nkN_k))·Σ log σ_j]`.
pub fn gram_det_exponent(points: &DMatrix<f64>, k: usize, basis: &BasisSpec) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    let spec = gram_spectrum(points, k, basis)?;
    spec.check()?;
    let n = points.ncols();
    Ok((exponent(n, k, spec.sigma.len()) * spec.sum_log_sigma()).exp())
}

/// Determinant by Gaussian elimination with partial pivoting (small matrices).
fn small_det(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x * n + c].abs().total_cmp(&a[y * n + c].abs()))
            .unwrap();
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..n {
                a.swap(p * n + j, c * n + j);
            }
            det = -det;
        }
        let piv = a[c * n + c];
        det *= piv;
        for r in c + 1..n {
            let f = a[r * n + c] / piv;
            if f != 0.0 {
                for j in c..n {
                    a[r * n + j] -= f * a[c * n + j];
                }
            }
        }
    }
    det
}

/// `(1/N_k!)·M^{−N_k}·Σ |det vdm(z_{i_1}, …, z_{i_N})|²` over every ordered
/// `N_k`-tuple of mesh points (repetitions included).
pub fn brute_force_gram_integral(
    points: &DMatrix<f64>,
    k: usize,
    basis: &BasisSpec,
) -> Result<f64> {
    let m = points.nrows();
    let n = dimension(points.ncols(), k)?;
    if (m as f64).powi(n as i32) > BRUTE_FORCE_LIMIT {
        return Err(Error::Infeasible { points: m, dim: n });
    }
    let v = eval_basis_real(basis, k, points)?;
    let total = m.pow(n as u32);
    let terms: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|mut t| {
            let mut a = vec![0.0; n * n];
            for r in 0..n {
                let row = t % m;
                t /= m;
                for c in 0..n {
                    a[r * n + c] = v[(row, c)];
                }
            }
            let d = small_det(&mut a, n);
            d * d
        })
        .collect();
    let factorial: f64 = (1..=n).map(|i| i as f64).product();
    Ok(compensated_sum(terms) / (factorial * total as f64))
}

fn calibration_cache() -> &'static Mutex<BTreeMap<usize, f64>> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(BTreeMap::new()))
}

/// `ln C(n, r)`.
fn ln_binomial(n: usize, r: usize) -> f64 {
    (1..=r).map(|i| ((n - r + i) as f64 / i as f64).ln()).sum()
}

/// Log-determinant of the change from graded monomials to `T_{α_1}·…·T_{α_n}`
/// (leading coefficient of `T_a` is `2^{a−1}`).
fn chebyshev_leading_log_det(n: usize, k: usize) -> f64 {
    let total: usize = multi_indices(n, k)
        .iter()
        .map(|a| a.iter().map(|&e| e.saturating_sub(1)).sum::<usize>())
        .sum();
    total as f64 * std::f64::consts::LN_2
}

/// Triangle basis `ψ_{ab} = (x+y)^a·P_a((y−x)/(x+y))·P_b^{(2a+1,0)}(1−2(x+y))`,
/// `a + b ≤ k`, ordered by total degree.
fn triangle_vandermonde(points: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let m = points.nrows();
    let nk = (k + 1) * (k + 2) / 2;
    let mut v = DMatrix::<f64>::zeros(m, nk);
    let mut col = vec![0usize; (k + 1) * (k + 1)];
    let mut c = 0;
    for d in 0..=k {
        for a in 0..=d {
            col[a * (k + 1) + (d - a)] = c;
            c += 1;
        }
    }
    for i in 0..m {
        let (x, y) = (points[(i, 0)], points[(i, 1)]);
        let s = x + y;
        let z = 1.0 - 2.0 * s;
        let (mut h_prev, mut h) = (0.0, 1.0);
        for a in 0..=k {
            if a > 0 {
                let next = if a == 1 {
                    y - x
                } else {
                    let n = (a - 1) as f64;
                    ((2.0 * n + 1.0) * (y - x) * h - n * s * s * h_prev) / (n + 1.0)
                };
                h_prev = h;
                h = next;
            }
            let alpha = (2 * a + 1) as f64;
            let (mut p_prev, mut p) = (0.0, 1.0);
            for b in 0..=k - a {
                if b > 0 {
                    let next = if b == 1 {
                        ((alpha + 2.0) * z + alpha) / 2.0
                    } else {
                        let n = (b - 1) as f64;
                        let t = 2.0 * n + alpha;
                        ((t + 1.0) * ((t + 2.0) * t * z + alpha * alpha) * p
                            - 2.0 * (n + alpha) * n * (t + 2.0) * p_prev)
                            / (2.0 * (n + 1.0) * (n + alpha + 1.0) * t)
                    };
                    p_prev = p;
                    p = next;
                }
                v[(i, col[a * (k + 1) + b])] = h * p;
            }
        }
    }
    v
}

/// Log-determinant of the change from graded monomials to the triangle basis:
/// in degree `d` the leading parts are `(x+y)^d·g(y/(x+y))`, which reduces the
/// block to univariate bases and gives `∏_a C(2a, a)·C(2d+1, d−a)`.
fn triangle_leading_log_det(k: usize) -> f64 {
    compensated_sum(
        (0..=k).flat_map(|d| {
            (0..=d).map(move |a| ln_binomial(2 * a, a) + ln_binomial(2 * d + 1, d - a))
        }),
    )
}

/// `log det G_k` from `V/√M` with unit-norm columns, plus the column scales
/// (requires at least as many rows as columns).
fn equilibrated_log_gram(mut v: DMatrix<f64>) -> Result<f64> {
    let m = v.nrows() as f64;
    let mut log_scale = Vec::with_capacity(v.ncols());
    for mut c in v.column_iter_mut() {
        let norm = c.norm() / m.sqrt();
        if !(norm > 0.0) {
            return Err(Error::IllConditioned { sigma_min: 0.0 });
        }
        c /= norm * m.sqrt();
        log_scale.push(norm.ln());
    }
    let sigma = singular_values_desc(thin_qr(v, false).r);
    let min = sigma.last().copied().unwrap_or(1.0);
    if !(min >= SIGMA_FLOOR) {
        return Err(Error::IllConditioned { sigma_min: min });
    }
    Ok(2.0 * (compensated_sum(sigma.iter().map(|s| s.ln())) + compensated_sum(log_scale)))
}

/// `log det G_k` of the graded monomials `z^α` for the uniform measure on
/// `points`.
pub fn log_gram(points: &DMatrix<f64>, k: usize, method: TdMethod) -> Result<f64> {
    let n = points.ncols();
    let nk = dimension(n, k)?;
    if points.nrows() < nk {
        return Err(Error::NotUnisolvent {
            k,
            rank: points.nrows(),
            dim: nk,
        });
    }
    match method {
        TdMethod::Monomial => {
            equilibrated_log_gram(eval_basis_real(&BasisSpec::Monomial { n }, k, points)?)
        }
        TdMethod::Chebyshev => {
            let map = AffineMap::bounding(points)?;
            let v = eval_basis_real(&BasisSpec::Chebyshev(map.clone()), k, points)?;
            Ok(equilibrated_log_gram(v)?
                - 2.0 * (chebyshev_leading_log_det(n, k) + affine_log_det(&map, k)))
        }
        TdMethod::Triangle => {
            if n != 2 {
                return Err(Error::Invalid("the triangle basis is planar".into()));
            }
            Ok(equilibrated_log_gram(triangle_vandermonde(points, k))?
                - 2.0 * triangle_leading_log_det(k))
        }
    }
}

/// `log det G_k` on the reference square mesh, cached per degree.
fn reference_log_gram(k: usize) -> Result<f64> {
    if let Some(v) = calibration_cache().lock().expect("cache poisoned").get(&k) {
        return Ok(*v);
    }
    let v = log_gram(&mesh_square_cl(k)?.points, k, TdMethod::Chebyshev)?;
    calibration_cache()
        .lock()
        .expect("cache poisoned")
        .insert(k, v);
    Ok(v)
}

/// `δ([−1, 1]²) / (det G_k on the reference mesh)^{(n+1)/(2nkN_k)}`.
pub fn calibration_factor(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Invalid("calibration needs k ≥ 1".into()));
    }
    let n = 2;
    let nk = dimension(n, k)?;
    Ok(0.5 * (-0.5 * exponent(n, k, nk) * reference_log_gram(k)?).exp())
}

/// Estimate `δ̂_k` from a degree-k mesh of the set, in log space so that the
/// reference mesh reproduces 1/2 exactly.
pub fn td_estimate_mesh(mesh: &Mesh, k: usize) -> Result<f64> {
    td_estimate_mesh_in(mesh, k, TdMethod::default())
}

pub fn td_estimate_mesh_in(mesh: &Mesh, k: usize, method: TdMethod) -> Result<f64> {
    if k == 0 {
        return Err(Error::Invalid("transfinite estimates need k ≥ 1".into()));
    }
    if mesh.dim() != 2 {
        return Err(Error::Invalid(
            "calibration is defined for planar sets".into(),
        ));
    }
    let nk = dimension(2, k)?;
    let log_ratio =
        0.5 * exponent(2, k, nk) * (log_gram(&mesh.points, k, method)? - reference_log_gram(k)?);
    Ok(0.5 * log_ratio.exp())
}

/// The degree-k mesh used for transfinite-diameter estimates of `set`.
pub fn td_mesh(set: &CompactSet, k: usize) -> Result<Mesh> {
    match set {
        CompactSet::Box { lo, hi } if lo == &[-1.0, -1.0] && hi == &[1.0, 1.0] => mesh_square_cl(k),
        CompactSet::Disk { center, radius } if *center == [0.0, 0.0] && *radius == 1.0 => {
            mesh_disk(k, DiskVariant::TdPolar)
        }
        CompactSet::Simplex => mesh_simplex(k),
        CompactSet::RegularPolygon { m, center, radius }
            if *center == [0.0, 0.0] && *radius == 1.0 =>
        {
            mesh_polygon(k, *m)
        }
        other => Err(Error::Invalid(format!(
            "no transfinite-diameter mesh for {}",
            other.label()
        ))),
    }
}

pub fn td_estimate(set: &CompactSet, k: usize) -> Result<f64> {
    td_estimate_mesh_in(&td_mesh(set, k)?, k, TdMethod::for_set(set))
}

/// Known transfinite diameters.
pub fn td_reference(set: &CompactSet) -> Option<f64> {
    match set {
        CompactSet::Box { lo, hi } if lo == &[-1.0, -1.0] && hi == &[1.0, 1.0] => Some(0.5),
        CompactSet::Disk { center, radius } if *center == [0.0, 0.0] => {
            Some(radius / (2.0 * std::f64::consts::E).sqrt())
        }
        CompactSet::Simplex => Some(1.0 / (2.0 * std::f64::consts::E)),
        _ => None,
    }
}

/// A run of estimates over a degree schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TdEstimate {
    pub set: String,
    pub degrees: Vec<usize>,
    pub raw: Vec<f64>,
    /// Degrees the accelerated values are aligned with.
    pub accelerated_degrees: Vec<usize>,
    pub accelerated: Vec<f64>,
    pub reference: Option<f64>,
    pub abs_err: Vec<f64>,
    pub rel_err: Vec<f64>,
    pub accelerated_abs_err: Vec<f64>,
    pub accelerated_rel_err: Vec<f64>,
    pub wall_time_s: Option<f64>,
}

/// Raw estimates for every degree (in parallel), optional rho acceleration
/// with the degrees as nodes, and errors against the known value.
pub fn td_sequence(
    set: &CompactSet,
    degrees: &[usize],
    accelerate: Option<Selector>,
) -> Result<TdEstimate> {
    let start = Instant::now();
    let raw: Vec<f64> = degrees
        .par_iter()
        .map(|&k| td_estimate(set, k))
        .collect::<Result<_>>()?;
    let (accelerated_degrees, accelerated) = match accelerate {
        Some(sel) => {
            let nodes: Vec<f64> = degrees.iter().map(|&k| k as f64).collect();
            let picked = rho_scalar(&raw, &nodes)?.select(sel)?;
            (
                picked.iter().map(|a| degrees[a.index]).collect(),
                picked.iter().map(|a| a.value).collect(),
            )
        }
        None => (Vec::new(), Vec::new()),
    };
    let reference = td_reference(set);
    let errs = |vals: &[f64]| -> (Vec<f64>, Vec<f64>) {
        match reference {
            Some(r) => (
                vals.iter().map(|v| (v - r).abs()).collect(),
                vals.iter().map(|v| (v - r).abs() / r).collect(),
            ),
            None => (Vec::new(), Vec::new()),
        }
    };
    let (abs_err, rel_err) = errs(&raw);
    let (accelerated_abs_err, accelerated_rel_err) = errs(&accelerated);
    Ok(TdEstimate {
        set: set.label(),
        degrees: degrees.to_vec(),
        raw,
        accelerated_degrees,
        accelerated,
        reference,
        abs_err,
        rel_err,
        accelerated_abs_err,
        accelerated_rel_err,
        wall_time_s: Some(start.elapsed().as_secs_f64()),
    })
}
