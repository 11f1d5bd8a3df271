//! Twice-QR orthonormalization over a discrete mesh measure, orthonormal
//! polynomial evaluation, Bergman functions and the Bergman-weighted stage.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{eval_basis, eval_basis_real, BasisSpec, EvalMode};
use crate::error::{Error, Result};
use crate::linalg::{
    compensated_sum, gemm, solve_right_upper, thin_qr, triangular_condition_estimate, CMatrix,
};
use crate::mesh::Mesh;

/// Condition estimates above this are logged.
const COND_WARN: f64 = 1e15;

/// Rows per block when streaming evaluations over large target sets.
pub const TARGET_BLOCK: usize = 256;

/// Second orthonormalization with respect to the Bergman-weighted measure
/// `μ̃ = (B_k/N_k) μ`.
#[derive(Clone, Debug)]
pub struct WeightedStage {
    /// `σ_i = B_k(z_i)/N_k`.
    pub sigma: DVector<f64>,
    pub rw: DMatrix<f64>,
    pub qw: DMatrix<f64>,
}

/// Orthonormalization state: `V = Q R₂ R₁` with `√M·Q(i, j) = q_j(z_i)`.
#[derive(Clone, Debug)]
pub struct OrthoState {
    pub basis: BasisSpec,
    pub k: usize,
    pub r1: DMatrix<f64>,
    pub r2: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub weighted: Option<WeightedStage>,
}

fn numerical_rank(r: &DMatrix<f64>, rows: usize) -> usize {
    let d = r.diagonal();
    let max = d.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let tol = max * rows.max(r.ncols()) as f64 * f64::EPSILON;
    d.iter().filter(|x| x.abs() > tol).count()
}

fn warn_conditioning(name: &str, r: &DMatrix<f64>) {
    let c = triangular_condition_estimate(r);
    if c > COND_WARN {
        log::warn!("{name} condition estimate {c:.3e} exceeds {COND_WARN:.0e}");
    }
}

impl OrthoState {
    /// Twice-QR of a real `M × N_k` matrix with `M ≥ N_k`.
    pub fn orthonormalize(v: DMatrix<f64>, basis: BasisSpec, k: usize) -> Result<Self> {
        let (m, n) = v.shape();
        if m < n {
            return Err(Error::NotUnisolvent { k, rank: m, dim: n });
        }
        let mut w = v;
        let r1 = thin_qr(w.clone(), false).r;
        let rank = numerical_rank(&r1, m);
        if rank < n {
            return Err(Error::NotUnisolvent { k, rank, dim: n });
        }
        solve_right_upper(&mut w, &r1);
        let second = thin_qr(w, true);
        let r2 = second.r;
        let rank2 = numerical_rank(&r2, m);
        if rank2 < n {
            return Err(Error::NotUnisolvent {
                k,
                rank: rank2,
                dim: n,
            });
        }
        warn_conditioning("R1", &r1);
        warn_conditioning("R2", &r2);
        Ok(OrthoState {
            basis,
            k,
            r1,
            r2,
            q: second.q.expect("Q requested"),
            weighted: None,
        })
    }

    /// Orthonormalizes the degree-`k` Chebyshev basis adapted to the mesh's bounding box.
    pub fn from_mesh(mesh: &Mesh, k: usize) -> Result<Self> {
        let basis = BasisSpec::chebyshev_adapted(&mesh.points)?;
        Self::from_mesh_with_basis(mesh, k, basis)
    }

    pub fn from_mesh_with_basis(mesh: &Mesh, k: usize, basis: BasisSpec) -> Result<Self> {
        let v = eval_basis_real(&basis, k, &mesh.points)?;
        Self::orthonormalize(v, basis, k)
    }

    /// Number of mesh points `M`.
    pub fn mesh_size(&self) -> usize {
        self.q.nrows()
    }

    /// `N_k`.
    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    /// Basis values at `points` (recurrence path).
    pub fn basis_at(&self, points: &CMatrix) -> Result<CMatrix> {
        eval_basis(&self.basis, self.k, points, EvalMode::Recurrence)
    }

    /// `W = WT R₁⁻¹ R₂⁻¹`; orthonormal values are `√M·W`.
    pub fn evaluate(&self, mut wt: CMatrix) -> CMatrix {
        wt.solve_right_upper(&self.r1);
        wt.solve_right_upper(&self.r2);
        wt
    }

    /// `W̃ = WT R₁⁻¹ R₂⁻¹ R_w⁻¹`; weighted orthonormal values are `√M·W̃`.
    pub fn evaluate_weighted(&self, wt: CMatrix) -> Result<CMatrix> {
        let stage = self.weighted_stage()?;
        let mut w = self.evaluate(wt);
        w.solve_right_upper(&stage.rw);
        Ok(w)
    }

    fn weighted_stage(&self) -> Result<&WeightedStage> {
        self.weighted
            .as_ref()
            .ok_or_else(|| Error::Invalid("weighted stage has not been computed".into()))
    }

    /// `B_k(ζ_i) = M·Σ_j |W(i, j)|²` for rows of an evaluation matrix.
    pub fn bergman(&self, w: &CMatrix) -> Vec<f64> {
        let m = self.mesh_size() as f64;
        (0..w.nrows())
            .map(|i| m * compensated_sum((0..w.ncols()).map(|j| w.norm_sqr(i, j))))
            .collect()
    }

    /// Bergman function at the mesh points, from `Q` directly.
    pub fn bergman_on_mesh(&self) -> Vec<f64> {
        self.bergman(&CMatrix::real(self.q.clone()))
    }

    /// `σ_i = (M/N_k)·Σ_j Q(i, j)²`.
    pub fn bergman_weights(&self) -> DVector<f64> {
        let scale = self.mesh_size() as f64 / self.dim() as f64;
        DVector::from_iterator(
            self.mesh_size(),
            (0..self.mesh_size())
                .map(|i| scale * compensated_sum(self.q.row(i).iter().map(|x| x * x))),
        )
    }

    /// Adds the weighted stage: QR of `diag(√σ)·Q`.
    pub fn with_weighted_stage(mut self) -> Result<Self> {
        let sigma = self.bergman_weights();
        if let Some((index, &value)) = sigma.iter().enumerate().find(|(_, s)| !(**s >= 1e-300)) {
            return Err(Error::DegenerateWeight { index, value });
        }
        let mut vw = self.q.clone();
        for (i, s) in sigma.iter().enumerate() {
            let r = s.sqrt();
            vw.row_mut(i).scale_mut(r);
        }
        let qr = thin_qr(vw, true);
        let rank = numerical_rank(&qr.r, self.mesh_size());
        if rank < self.dim() {
            return Err(Error::NotUnisolvent {
                k: self.k,
                rank,
                dim: self.dim(),
            });
        }
        warn_conditioning("Rw", &qr.r);
        self.weighted = Some(WeightedStage {
            sigma,
            rw: qr.r,
            qw: qr.q.expect("Q requested"),
        });
        Ok(self)
    }

    /// Weighted orthonormal values at the mesh: `q̃_j(z_i) = √M·σ_i^{−1/2}·Q_w(i, j)`.
    pub fn weighted_values_on_mesh(&self) -> Result<DMatrix<f64>> {
        let stage = self.weighted_stage()?;
        let sm = (self.mesh_size() as f64).sqrt();
        let mut out = stage.qw.clone();
        for (i, s) in stage.sigma.iter().enumerate() {
            out.row_mut(i).scale_mut(sm / s.sqrt());
        }
        Ok(out)
    }

    /// `∫|K_k(ζ_i, ζ)| dμ_k(ζ) = Σ_h |(W Qᵀ)(i, h)|`.
    pub fn kernel_l1(&self, w: &CMatrix) -> Vec<f64> {
        kernel_l1_impl(w, &self.q, None)
    }

    /// Weighted analogue `∫|K̃_k(ζ_i, ζ)| dμ̃_k(ζ) = Σ_h √σ_h |(W̃ Q_wᵀ)(i, h)|`.
    pub fn kernel_l1_weighted(&self, w_tilde: &CMatrix) -> Result<Vec<f64>> {
        let stage = self.weighted_stage()?;
        let root: Vec<f64> = stage.sigma.iter().map(|s| s.sqrt()).collect();
        Ok(kernel_l1_impl(w_tilde, &stage.qw, Some(&root)))
    }
}

fn kernel_l1_impl(w: &CMatrix, q: &DMatrix<f64>, weights: Option<&[f64]>) -> Vec<f64> {
    let l = w.nrows();
    let m = q.nrows();
    let mut out = vec![0.0; l];
    const ROWS: usize = 64;
    out.par_chunks_mut(ROWS).enumerate().for_each(|(b, chunk)| {
        let r0 = b * ROWS;
        let rows = chunk.len();
        let product = |part: &DMatrix<f64>| {
            let block = part.rows(r0, rows);
            let mut out = DMatrix::<f64>::zeros(rows, m);
            gemm(&mut out, 1.0, &block, false, q, true, 0.0);
            out
        };
        let re = product(&w.re);
        let im = w.im.as_ref().map(product);
        for (i, v) in chunk.iter_mut().enumerate() {
            *v = compensated_sum((0..m).map(|h| {
                let a = re[(i, h)];
                let modulus = match &im {
                    Some(im) => a.hypot(im[(i, h)]),
                    None => a.abs(),
                };
                weights.map_or(modulus, |wt| wt[h] * modulus)
            }));
        }
    });
    out
}

/// Applies `f` to consecutive row blocks of `points` in parallel and
/// concatenates the results in order.
pub fn map_blocks<T, F>(points: &CMatrix, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&CMatrix) -> Result<Vec<T>> + Sync,
{
    let l = points.nrows();
    let starts: Vec<usize> = (0..l).step_by(TARGET_BLOCK).collect();
    let parts: Vec<Result<Vec<T>>> = starts
        .par_iter()
        .map(|&s| {
            let rows = TARGET_BLOCK.min(l - s);
            let block = CMatrix {
                re: points.re.rows(s, rows).into_owned(),
                im: points.im.as_ref().map(|im| im.rows(s, rows).into_owned()),
            };
            f(&block)
        })
        .collect();
    let mut out = Vec::with_capacity(l);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
