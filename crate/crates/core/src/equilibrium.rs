//! Equilibrium-measure densities `η_k = det(∂∂̄ (1/2k)·log B_k)`, a
//! finite-difference oracle, approximate Fekete extraction and moments of the
//! discrete measures converging to `μ_E`.

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{eval_basis_real, eval_basis_with_derivatives, BasisSpec};
use crate::error::{Error, Result};
use crate::extremal::EvalGrid;
use crate::linalg::{compensated_sum, CMatrix};
use crate::mesh::Mesh;
use crate::ortho::{map_blocks, OrthoState};

type C64 = Complex<f64>;

/// Relative threshold on `|r_ii|` below which `D` is treated as rank-deficient.
const RANK_TOL: f64 = 1e-12;

/// Relative disagreement between step `h` and `h/2` that triggers an oracle warning.
const FD_AGREEMENT: f64 = 1e-3;

/// Orthonormal values and first derivatives at one point.
#[derive(Clone, Debug)]
pub struct DerivativeBundle {
    /// `b_h = q_h(z)`.
    pub b: DVector<C64>,
    /// `D(h, i) = ∂_i q_h(z)`.
    pub d: DMatrix<C64>,
}

impl DerivativeBundle {
    pub fn dim(&self) -> usize {
        self.d.ncols()
    }

    /// `|b|² = B_k(z)`.
    pub fn bergman(&self) -> f64 {
        compensated_sum(self.b.iter().map(|x| x.norm_sqr()))
    }

    /// `(1/(2k|b|²))·(DᴴD − Dᴴb bᴴD/|b|²)`, the conjugate of `[∂_i∂̄_j v_k]`.
    pub fn hessian(&self, k: usize) -> DMatrix<C64> {
        let b2 = self.bergman();
        let a = self.d.adjoint() * &self.d;
        let c = self.d.adjoint() * &self.b;
        let h = a - (&c * c.adjoint()).unscale(b2);
        h.unscale(2.0 * k as f64 * b2)
    }
}

fn det_small(a: &DMatrix<C64>) -> C64 {
    match a.nrows() {
        0 => C64::new(1.0, 0.0),
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        3 => {
            a[(0, 0)] * (a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)])
                - a[(0, 1)] * (a[(1, 0)] * a[(2, 2)] - a[(1, 2)] * a[(2, 0)])
                + a[(0, 2)] * (a[(1, 0)] * a[(2, 1)] - a[(1, 1)] * a[(2, 0)])
        }
        _ => a.clone().determinant(),
    }
}

/// Adjugate by cofactors.
fn adjugate(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    }
    DMatrix::from_fn(n, n, |i, j| {
        let minor = a.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        det_small(&minor) * sign
    })
}

/// `η = [det(DᴴD) − bᴴD·adj(DᴴD)·Dᴴb/|b|²] / (2k|b|²)ⁿ`.
pub fn density_adjugate(bundle: &DerivativeBundle, k: usize) -> Result<f64> {
    let n = bundle.dim();
    if n == 0 || n > 3 {
        return Err(Error::Invalid(format!(
            "adjugate density needs 1 ≤ n ≤ 3, got {n}"
        )));
    }
    let b2 = bundle.bergman();
    let a = bundle.d.adjoint() * &bundle.d;
    let c = bundle.d.adjoint() * &bundle.b;
    let rank_one = (c.adjoint() * adjugate(&a) * &c)[(0, 0)];
    let num = det_small(&a).re - rank_one.re / b2;
    Ok(num / (2.0 * k as f64 * b2).powi(n as i32))
}

/// Density value with a flag set when the QR path fell back to the adjugate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityValue {
    pub value: f64,
    pub fallback: bool,
}

/// Thin Gram–Schmidt QR (twice) of a tall complex matrix; `None` if rank-deficient.
fn complex_thin_qr(d: &DMatrix<C64>) -> Option<(DMatrix<C64>, Vec<f64>)> {
    let (m, n) = d.shape();
    let scale = d.iter().fold(0.0_f64, |s, x| s.max(x.norm()));
    if scale == 0.0 {
        return None;
    }
    let mut q = DMatrix::<C64>::zeros(m, n);
    let mut diag = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = d.column(j).into_owned();
        for _ in 0..2 {
            for p in 0..j {
                let qp = q.column(p);
                let r = qp.dotc(&v);
                v -= qp * r;
            }
        }
        let norm = v.norm();
        if norm <= RANK_TOL * scale * (m.max(n) as f64).sqrt() {
            return None;
        }
        q.set_column(j, &v.unscale(norm));
        diag.push(norm);
    }
    Some((q, diag))
}

/// `η = det(S)/(2k|b|²)ⁿ · ‖(I − QQᴴ)b‖²/|b|²` with `D = QR`, `S = RᴴR`.
pub fn density_qr(bundle: &DerivativeBundle, k: usize) -> Result<DensityValue> {
    let n = bundle.dim();
    let Some((q, diag)) = complex_thin_qr(&bundle.d) else {
        return Ok(DensityValue {
            value: density_adjugate(bundle, k)?,
            fallback: true,
        });
    };
    let b2 = bundle.bergman();
    let mut p = bundle.b.clone();
    for _ in 0..2 {
        let c = q.adjoint() * &p;
        p -= &q * c;
    }
    let log_det_s: f64 = diag.iter().map(|r| 2.0 * r.ln()).sum();
    let proj = p.norm_squared() / b2;
    let value = (log_det_s - n as f64 * (2.0 * k as f64 * b2).ln()).exp() * proj;
    Ok(DensityValue {
        value,
        fallback: false,
    })
}

/// Derivative bundles at the rows of `points`, optionally for the weighted stage.
pub fn derivative_bundles(
    state: &OrthoState,
    points: &CMatrix,
    weighted: bool,
) -> Result<Vec<DerivativeBundle>> {
    let n = points.ncols();
    let sm = (state.mesh_size() as f64).sqrt();
    map_blocks(points, |block| {
        let (vals, ders) = eval_basis_with_derivatives(&state.basis, state.k, block)?;
        let push = |m: CMatrix| {
            if weighted {
                state.evaluate_weighted(m)
            } else {
                Ok(state.evaluate(m))
            }
        };
        let w = push(vals)?.to_complex();
        let dw: Vec<DMatrix<C64>> = ders
            .into_iter()
            .map(|m| push(m).map(|x| x.to_complex()))
            .collect::<Result<_>>()?;
        Ok((0..block.nrows())
            .map(|i| DerivativeBundle {
                b: w.row(i).transpose().scale(sm),
                d: DMatrix::from_fn(w.ncols(), n, |h, c| dw[c][(i, h)] * sm),
            })
            .collect())
    })
}

/// Density of the equilibrium-measure approximant on a real grid.
#[derive(Clone, Debug, Serialize)]
pub struct DensityField {
    pub k: usize,
    pub weighted: bool,
    /// Points where the QR path fell back to the adjugate formula.
    pub fallbacks: usize,
    #[serde(skip)]
    pub raw: Vec<f64>,
    #[serde(skip)]
    pub restricted: Vec<f64>,
    #[serde(skip)]
    pub normalized: Option<Vec<f64>>,
}

/// `η_k` at every grid point; the weighted stage is used when present.
pub fn equilibrium_density(
    state: &OrthoState,
    grid: &EvalGrid,
    normalize: bool,
) -> Result<DensityField> {
    if !grid.points.is_real() {
        return Err(Error::Grid(
            "densities are reported on real grids only".into(),
        ));
    }
    let weighted = state.weighted.is_some();
    let bundles = derivative_bundles(state, &grid.points, weighted)?;
    let values: Vec<DensityValue> = bundles
        .par_iter()
        .map(|b| density_qr(b, state.k))
        .collect::<Result<_>>()?;
    let fallbacks = values.iter().filter(|v| v.fallback).count();
    let raw: Vec<f64> = values.iter().map(|v| v.value).collect();
    let restricted: Vec<f64> = raw
        .iter()
        .zip(&grid.inside)
        .map(|(&v, &ins)| if ins { v } else { 0.0 })
        .collect();
    let normalized = if normalize {
        let cell: f64 = grid
            .axes
            .iter()
            .map(|a| (a.max - a.min) / (a.count - 1) as f64)
            .product();
        if grid.axes.is_empty() {
            return Err(Error::Grid("normalization needs a tensor grid".into()));
        }
        let mass = compensated_sum(restricted.iter().copied()) * cell;
        if !(mass > 0.0) {
            return Err(Error::Grid("no mass on the E-restricted grid".into()));
        }
        Some(restricted.iter().map(|v| v / mass).collect())
    } else {
        None
    };
    Ok(DensityField {
        k: state.k,
        weighted,
        fallbacks,
        raw,
        restricted,
        normalized,
    })
}

/// `x, y, inside, eta_raw, eta_restricted, eta_normalized` (real coordinates only).
pub fn write_density_csv<W: Write>(w: W, grid: &EvalGrid, field: &DensityField) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = grid.points.ncols();
    let names = ["x", "y", "z", "w"];
    let mut header: Vec<String> = (0..n)
        .map(|c| {
            names
                .get(c)
                .map_or(format!("x{}", c + 1), |s| s.to_string())
        })
        .collect();
    header.extend(["inside", "eta_raw", "eta_restricted", "eta_normalized"].map(String::from));
    out.write_record(&header)?;
    for i in 0..grid.len() {
        let mut rec: Vec<String> = (0..n)
            .map(|c| format!("{:.16e}", grid.points.re[(i, c)]))
            .collect();
        rec.push(u8::from(grid.inside[i]).to_string());
        rec.push(format!("{:.16e}", field.raw[i]));
        rec.push(format!("{:.16e}", field.restricted[i]));
        rec.push(
            field
                .normalized
                .as_ref()
                .map_or(String::new(), |v| format!("{:.16e}", v[i])),
        );
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Finite-difference Monge–Ampère value at step `h`, with the step-halving check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdDensity {
    pub value: f64,
    pub halved: f64,
    /// Step `h` and `h/2` disagree beyond the oracle tolerance.
    pub warning: bool,
}

fn fd_det_at(v: &dyn Fn(&CMatrix) -> Result<Vec<f64>>, z: &[C64], h: f64) -> Result<f64> {
    let n = z.len();
    let r = 2 * n;
    // real coordinate c < n is Re z_c, otherwise Im z_{c−n}
    let shift = |pt: &mut [C64], c: usize, t: f64| {
        if c < n {
            pt[c].re += t
        } else {
            pt[c - n].im += t
        }
    };
    let mut stencil: Vec<Vec<C64>> = vec![z.to_vec()];
    for a in 0..r {
        for s in [h, -h] {
            let mut p = z.to_vec();
            shift(&mut p, a, s);
            stencil.push(p);
        }
    }
    for a in 0..r {
        for b in a + 1..r {
            for (sa, sb) in [(h, h), (h, -h), (-h, h), (-h, -h)] {
                let mut p = z.to_vec();
                shift(&mut p, a, sa);
                shift(&mut p, b, sb);
                stencil.push(p);
            }
        }
    }
    let pts = CMatrix::from_complex(&DMatrix::from_fn(stencil.len(), n, |i, c| stencil[i][c]));
    let f = v(&pts)?;
    let mut g = DMatrix::<f64>::zeros(r, r);
    for a in 0..r {
        g[(a, a)] = (f[1 + 2 * a] - 2.0 * f[0] + f[2 + 2 * a]) / (h * h);
    }
    let mut idx = 1 + 2 * r;
    for a in 0..r {
        for b in a + 1..r {
            let val = (f[idx] - f[idx + 1] - f[idx + 2] + f[idx + 3]) / (4.0 * h * h);
            g[(a, b)] = val;
            g[(b, a)] = val;
            idx += 4;
        }
    }
    let hess = DMatrix::from_fn(n, n, |i, j| {
        C64::new(g[(i, j)] + g[(n + i, n + j)], g[(i, n + j)] - g[(n + i, j)]) * 0.25
    });
    Ok(det_small(&hess).re)
}

/// `det[∂²v/∂z_i∂z̄_j]` by central differences in the `2n` real coordinates.
/// `v` evaluates a batch of complex points (rows).
pub fn fd_hessian_density(
    v: &dyn Fn(&CMatrix) -> Result<Vec<f64>>,
    point: &[C64],
    step: f64,
) -> Result<FdDensity> {
    if !(step > 0.0) {
        return Err(Error::Invalid(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let value = fd_det_at(v, point, step)?;
    let halved = fd_det_at(v, point, step / 2.0)?;
    let warning = (value - halved).abs()
        > FD_AGREEMENT * value.abs().max(halved.abs()).max(f64::MIN_POSITIVE);
    if warning {
        log::warn!(
            "finite-difference density disagrees under step halving: {value:e} vs {halved:e}"
        );
    }
    Ok(FdDensity {
        value,
        halved,
        warning,
    })
}

/// Approximate Fekete points extracted from a mesh.
#[derive(Clone, Debug, Serialize)]
pub struct FeketeSelection {
    pub k: usize,
    /// Mesh row indices in selection order.
    pub indices: Vec<usize>,
    /// `log|det V|` of the selected rows in the adapted Chebyshev basis.
    pub log_abs_det: f64,
}

/// Greedy column-pivoted Gram–Schmidt on `Qᵀ`: repeatedly selects the mesh row
/// of largest residual norm (lowest index on ties).
pub fn afp_extract(mesh: &Mesh, k: usize) -> Result<FeketeSelection> {
    let state = OrthoState::from_mesh(mesh, k)?;
    afp_from_state(&state)
}

/// Greedy extraction from an existing orthonormalization state.
pub fn afp_from_state(state: &OrthoState) -> Result<FeketeSelection> {
    let q = &state.q;
    let (m, n) = q.shape();
    let mut residual: Vec<f64> = (0..m).map(|i| q.row(i).norm_squared()).collect();
    let mut taken = vec![false; m];
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut indices = Vec::with_capacity(n);
    let mut log_det = 0.0;
    for _ in 0..n {
        // downdated norms lose accuracy by cancellation; confirm the pivot exactly
        let (p, u, norm) = loop {
            let mut best: Option<usize> = None;
            for i in 0..m {
                if !taken[i] && best.is_none_or(|b| residual[i] > residual[b]) {
                    best = Some(i);
                }
            }
            let p = best.ok_or(Error::NotUnisolvent {
                k: state.k,
                rank: indices.len(),
                dim: n,
            })?;
            let mut u: DVector<f64> = q.row(p).transpose();
            for _ in 0..2 {
                for e in &basis {
                    let c = e.dot(&u);
                    u.axpy(-c, e, 1.0);
                }
            }
            let exact = u.norm_squared();
            let stale = residual[p];
            residual[p] = exact;
            if exact >= 0.5 * stale {
                break (p, u, exact.sqrt());
            }
        };
        if !(norm > 1e-13) {
            return Err(Error::NotUnisolvent {
                k: state.k,
                rank: indices.len(),
                dim: n,
            });
        }
        let u = u.unscale(norm);
        log_det += norm.ln();
        taken[p] = true;
        indices.push(p);
        let proj = q * &u;
        for (r, c) in residual.iter_mut().zip(proj.iter()) {
            *r = (*r - c * c).max(0.0);
        }
        basis.push(u);
    }
    for i in 0..n {
        log_det += state.r1[(i, i)].abs().ln() + state.r2[(i, i)].abs().ln();
    }
    Ok(FeketeSelection {
        k: state.k,
        indices,
        log_abs_det: log_det,
    })
}

/// `x, y` of the selected points, in selection order.
pub fn write_fekete_csv<W: Write>(w: W, mesh: &Mesh, sel: &FeketeSelection) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let names = ["x", "y", "z", "w"];
    let header: Vec<String> = (0..mesh.dim())
        .map(|c| {
            names
                .get(c)
                .map_or(format!("x{}", c + 1), |s| s.to_string())
        })
        .collect();
    out.write_record(&header)?;
    for &i in &sel.indices {
        out.write_record(mesh.point(i).iter().map(|x| format!("{x:.16e}")))?;
    }
    out.flush()?;
    Ok(())
}

/// `∫ φ_j dν` for `ν = Σ_i w_i δ_{x_i}` (uniform weights `1/L` when absent),
/// `φ_j` the degree-`k_mom` basis in graded lex order.
pub fn discrete_measure_moments(
    points: &DMatrix<f64>,
    weights: Option<&[f64]>,
    k_mom: usize,
    basis: &BasisSpec,
) -> Result<Vec<f64>> {
    let l = points.nrows();
    if let Some(w) = weights {
        if w.len() != l {
            return Err(Error::Invalid(format!(
                "{} weights for {l} points",
                w.len()
            )));
        }
    }
    let v = eval_basis_real(basis, k_mom, points)?;
    Ok((0..v.ncols())
        .map(|j| {
            compensated_sum((0..l).map(|i| {
                let w = weights.map_or(1.0 / l as f64, |w| w[i]);
                w * v[(i, j)]
            }))
        })
        .collect())
}

/// Weights `σ_i/M` of the Bergman-weighted measure `(B_k/N_k)·μ_k`.
pub fn weighted_measure(state: &OrthoState) -> Vec<f64> {
    let m = state.mesh_size() as f64;
    state.bergman_weights().iter().map(|s| s / m).collect()
}
