//! Extremal-function approximants on evaluation grids, closed-form references
//! and error metrics.
//!
//! `v_k = (1/2k)·log B_k` and `u_k = (1/k)·log ∫|K_k(·, ζ)| dμ_k(ζ)` for the
//! uniform measure on a mesh (SZEF), or for the Bergman-weighted measure
//! `(B_k/N_k)·μ_k` (SZEF-BW).

use std::io::Write;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::CompactSet;
use crate::linalg::{compensated_sum, CMatrix};
use crate::mesh::{Mesh, MeshRecipe};
use crate::ortho::{map_blocks, OrthoState};
use crate::rho::{rho_scalar, rho_vector, Selector};

/// Membership slack used for grid masks.
pub const MASK_TOL: f64 = 1e-12;

/// `count` equispaced values on `[min, max]`, mirror-symmetric when `min = −max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Grid(format!(
                "axis needs at least 2 points, got {count}"
            )));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Grid(format!("bad axis range {min}:{max}")));
        }
        Ok(GridAxis { min, max, count })
    }

    pub fn values(&self) -> Vec<f64> {
        let d = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| (self.min * (d - i as f64) + self.max * i as f64) / d)
            .collect()
    }
}

impl FromStr for GridAxis {
    type Err = Error;

    /// `min:max:count`, optionally prefixed by an axis name (`x:-2:2:100`).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums = match parts.len() {
            3 => &parts[..],
            4 => &parts[1..],
            _ => {
                return Err(Error::Grid(format!(
                    "axis {s:?} is not [name:]min:max:count"
                )))
            }
        };
        let f = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::Grid(format!("bad number {t:?} in {s:?}")))
        };
        let count = nums[2]
            .parse::<usize>()
            .map_err(|_| Error::Grid(format!("bad count in {s:?}")))?;
        GridAxis::new(f(nums[0])?, f(nums[1])?, count)
    }
}

/// Evaluation points `Ω ⊂ ℂⁿ` with the mask of points in `E`.
#[derive(Clone, Debug)]
pub struct EvalGrid {
    /// `L × n` complex points.
    pub points: CMatrix,
    /// `inside[i]` iff point `i` belongs to `Ω_E`.
    pub inside: Vec<bool>,
    pub axes: Vec<GridAxis>,
    pub imag_shift: Vec<f64>,
}

impl EvalGrid {
    /// Tensor grid; the last axis varies fastest.
    pub fn tensor(
        axes: Vec<GridAxis>,
        imag_shift: Option<Vec<f64>>,
        set: &CompactSet,
    ) -> Result<Self> {
        let n = axes.len();
        if n != set.dim() {
            return Err(Error::Grid(format!(
                "{n} axes for a set of dimension {}",
                set.dim()
            )));
        }
        let shift = imag_shift.unwrap_or_else(|| vec![0.0; n]);
        if shift.len() != n {
            return Err(Error::Grid(format!(
                "{} imaginary shifts for {n} axes",
                shift.len()
            )));
        }
        let values: Vec<Vec<f64>> = axes.iter().map(GridAxis::values).collect();
        let l: usize = axes.iter().map(|a| a.count).product();
        let mut re = DMatrix::zeros(l, n);
        for i in 0..l {
            let mut rest = i;
            for c in (0..n).rev() {
                re[(i, c)] = values[c][rest % axes[c].count];
                rest /= axes[c].count;
            }
        }
        let points = if shift.iter().all(|&s| s == 0.0) {
            CMatrix::real(re)
        } else {
            let im = DMatrix::from_fn(l, n, |_, c| shift[c]);
            CMatrix::from_parts(re, im)
        };
        let mut grid = Self::from_points(points, set);
        grid.axes = axes;
        grid.imag_shift = shift;
        Ok(grid)
    }

    /// Arbitrary points; the mask follows membership in `set`.
    pub fn from_points(points: CMatrix, set: &CompactSet) -> Self {
        let inside = (0..points.nrows())
            .map(|i| {
                let z: Vec<Complex<f64>> = (0..points.ncols()).map(|c| points.get(i, c)).collect();
                set.contains(&z, MASK_TOL)
            })
            .collect();
        EvalGrid {
            points,
            inside,
            axes: Vec::new(),
            imag_shift: Vec::new(),
        }
    }

    /// Parses `x:-2:2:100,y:-2:2:100` plus an optional `a,b` imaginary shift.
    pub fn parse(axes: &str, imag_shift: Option<&str>, set: &CompactSet) -> Result<Self> {
        let axes = axes
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<GridAxis>>>()?;
        let shift = imag_shift
            .map(|s| {
                s.split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Grid(format!("bad shift {t:?}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .transpose()?;
        Self::tensor(axes, shift, set)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> Vec<Complex<f64>> {
        (0..self.points.ncols())
            .map(|c| self.points.get(i, c))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Szef,
    SzefBw,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "szef" => Ok(Method::Szef),
            "szef-bw" => Ok(Method::SzefBw),
            _ => Err(Error::Invalid(format!(
                "unknown method {s:?} (szef | szef-bw)"
            ))),
        }
    }
}

/// `v`: Bergman function; `u`: kernel integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    U,
    V,
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" => Ok(Quantity::U),
            "v" => Ok(Quantity::V),
            _ => Err(Error::Invalid(format!("unknown quantity {s:?} (u | v)"))),
        }
    }
}

/// `u` or `v` on `points` from an orthonormalization state (with the weighted
/// stage for SZEF-BW).
pub fn extremal_values(
    state: &OrthoState,
    points: &CMatrix,
    method: Method,
    quantity: Quantity,
) -> Result<Vec<f64>> {
    let k = state.k;
    if k == 0 {
        return Err(Error::Invalid("extremal approximants need k ≥ 1".into()));
    }
    if method == Method::SzefBw && state.weighted.is_none() {
        return Err(Error::Invalid("SZEF-BW needs the weighted stage".into()));
    }
    let kf = k as f64;
    map_blocks(points, |block| {
        let wt = state.basis_at(block)?;
        let w = match method {
            Method::Szef => state.evaluate(wt),
            Method::SzefBw => state.evaluate_weighted(wt)?,
        };
        Ok(match (method, quantity) {
            (_, Quantity::V) => state
                .bergman(&w)
                .into_iter()
                .map(|b| b.ln() / (2.0 * kf))
                .collect(),
            (Method::Szef, Quantity::U) => state
                .kernel_l1(&w)
                .into_iter()
                .map(|s| s.ln() / kf)
                .collect(),
            (Method::SzefBw, Quantity::U) => state
                .kernel_l1_weighted(&w)?
                .into_iter()
                .map(|s| s.ln() / kf)
                .collect(),
        })
    })
}

fn state_for(mesh: &Mesh, k: usize, method: Method) -> Result<OrthoState> {
    let state = OrthoState::from_mesh(mesh, k)?;
    match method {
        Method::Szef => Ok(state),
        Method::SzefBw => state.with_weighted_stage(),
    }
}

/// SZEF on a degree-`k` mesh.
pub fn szef(mesh: &Mesh, grid: &EvalGrid, k: usize, quantity: Quantity) -> Result<Vec<f64>> {
    extremal_values(
        &state_for(mesh, k, Method::Szef)?,
        &grid.points,
        Method::Szef,
        quantity,
    )
}

/// SZEF-BW on a degree-`k` mesh.
pub fn szef_bw(mesh: &Mesh, grid: &EvalGrid, k: usize, quantity: Quantity) -> Result<Vec<f64>> {
    extremal_values(
        &state_for(mesh, k, Method::SzefBw)?,
        &grid.points,
        Method::SzefBw,
        quantity,
    )
}

/// Values of one approximant for a schedule of degrees.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremalResult {
    pub method: Method,
    pub quantity: Quantity,
    pub degrees: Vec<usize>,
    /// `values[d][i]`: degree `degrees[d]` at grid point `i`.
    #[serde(skip)]
    pub values: Vec<Vec<f64>>,
}

/// Runs `method` for every degree, building each mesh from `recipe`.
pub fn extremal_sequence(
    recipe: &MeshRecipe,
    grid: &EvalGrid,
    degrees: &[usize],
    method: Method,
    quantity: Quantity,
) -> Result<ExtremalResult> {
    let values = degrees
        .par_iter()
        .map(|&k| {
            let mesh = recipe.build(k)?;
            extremal_values(
                &state_for(&mesh, k, method)?,
                &grid.points,
                method,
                quantity,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExtremalResult {
        method,
        quantity,
        degrees: degrees.to_vec(),
        values,
    })
}

/// Inverse Joukowski map: the root of `w + 1/w = 2ζ` with `|w| ≥ 1`.
pub fn inverse_joukowski(z: Complex<f64>) -> Complex<f64> {
    let s = (z * z - 1.0).sqrt();
    let (a, b) = (z + s, z - s);
    if a.norm_sqr() >= b.norm_sqr() {
        a
    } else {
        b
    }
}

/// `log|h(ζ)|`, exactly 0 on `[−1, 1]`.
pub fn log_abs_h(z: Complex<f64>) -> f64 {
    if z.im == 0.0 && z.re.abs() <= 1.0 {
        return 0.0;
    }
    inverse_joukowski(z).norm().ln().max(0.0)
}

/// Lundin formula for the real unit ball:
/// `½·log h(‖z‖² + |Σ z_j² − 1|)`.
pub fn lundin(z: &[Complex<f64>]) -> f64 {
    let norm2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    let bilinear: Complex<f64> = z.iter().map(|c| c * c).sum();
    let t = norm2 + (bilinear - 1.0).norm();
    if t <= 1.0 {
        0.0
    } else {
        0.5 * (t + (t * t - 1.0).sqrt()).ln()
    }
}

/// Baran formula `max_w log|h(⟨z, w⟩)|` over real dual extreme points `w`.
pub fn baran(z: &[Complex<f64>], duals: &[Vec<f64>]) -> f64 {
    duals
        .iter()
        .map(|w| log_abs_h(z.iter().zip(w).map(|(a, b)| a * b).sum()))
        .fold(0.0, f64::max)
}

/// Extreme points of the dual of the regular `m`-gon (`m` even) with unit
/// circumradius.
pub fn polygon_duals(m: usize) -> Vec<Vec<f64>> {
    let r = 1.0 / (std::f64::consts::PI / m as f64).cos();
    (0..m)
        .map(|j| {
            let t = (2 * j + 1) as f64 * std::f64::consts::PI / m as f64;
            vec![r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// Exact `V*_E` at one point, when a closed form is known.
pub fn reference_at(set: &CompactSet, z: &[Complex<f64>]) -> Result<f64> {
    match set {
        CompactSet::Box { lo, hi } => Ok(z
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(c, (a, b))| log_abs_h((c - (a + b) / 2.0) * (2.0 / (b - a))))
            .fold(0.0, f64::max)),
        CompactSet::Disk { center, radius } => {
            let w: Vec<Complex<f64>> = z
                .iter()
                .zip(center)
                .map(|(c, o)| (c - o) / *radius)
                .collect();
            Ok(lundin(&w))
        }
        CompactSet::RegularPolygon { m, center, radius } if m % 2 == 0 => {
            let w: Vec<Complex<f64>> = z
                .iter()
                .zip(center)
                .map(|(c, o)| (c - o) / *radius)
                .collect();
            Ok(baran(&w, &polygon_duals(*m)))
        }
        CompactSet::AffineImage { base, map } => {
            let w: Vec<Complex<f64>> = z
                .iter()
                .enumerate()
                .map(|(i, &c)| map.apply_complex(i, c))
                .collect();
            reference_at(base, &w)
        }
        CompactSet::Product(a, b) => {
            let da = a.dim();
            Ok(reference_at(a, &z[..da])?.max(reference_at(b, &z[da..])?))
        }
        other => Err(Error::NoReference(other.label())),
    }
}

/// Exact `V*_E` at every grid point.
pub fn reference_extremal(set: &CompactSet, points: &CMatrix) -> Result<Vec<f64>> {
    (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            let z: Vec<Complex<f64>> = (0..points.ncols()).map(|c| points.get(i, c)).collect();
            reference_at(set, &z)
        })
        .collect()
}

/// Errors over `Ω₀` (grid points outside `E`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorMetrics {
    pub e1: f64,
    /// `None` when the reference sums to zero.
    pub e1_rel: Option<f64>,
    pub e_inf: f64,
}

fn outside_indices(inside: &[bool]) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..inside.len()).filter(|&i| !inside[i]).collect();
    if idx.is_empty() {
        Err(Error::Grid(
            "every grid point lies in E, so Ω₀ is empty".into(),
        ))
    } else {
        Ok(idx)
    }
}

/// `e₁`, `e₁ʳᵉˡ` and `e_∞` of `approx` against `reference` over `Ω₀`.
pub fn error_metrics(approx: &[f64], reference: &[f64], inside: &[bool]) -> Result<ErrorMetrics> {
    if approx.len() != reference.len() || approx.len() != inside.len() {
        return Err(Error::Invalid(
            "approximation, reference and mask lengths differ".into(),
        ));
    }
    let idx = outside_indices(inside)?;
    let diff: Vec<f64> = idx
        .iter()
        .map(|&i| (approx[i] - reference[i]).abs())
        .collect();
    let total = compensated_sum(diff.iter().copied());
    let denom = compensated_sum(idx.iter().map(|&i| reference[i]));
    Ok(ErrorMetrics {
        e1: total / idx.len() as f64,
        e1_rel: (denom != 0.0).then(|| total / denom),
        e_inf: diff.iter().copied().fold(0.0, f64::max),
    })
}

/// `s_k = e₁(f_{k+2}, f_{k+1})/e₁(f_{k+1}, f_k)` over `Ω₀` for consecutive terms;
/// `None` for a zero denominator.
pub fn ratio_sequence(values: &[Vec<f64>], inside: &[bool]) -> Result<Vec<Option<f64>>> {
    let idx = outside_indices(inside)?;
    let step = |a: &[f64], b: &[f64]| {
        compensated_sum(idx.iter().map(|&i| (a[i] - b[i]).abs())) / idx.len() as f64
    };
    let steps: Vec<f64> = values.windows(2).map(|w| step(&w[1], &w[0])).collect();
    Ok(steps
        .windows(2)
        .map(|w| (w[0] != 0.0).then(|| w[1] / w[0]))
        .collect())
}

/// Per-degree errors and ratios for a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub degrees: Vec<usize>,
    pub metrics: Vec<ErrorMetrics>,
    /// `s[d]` pairs `degrees[d..d+3]`.
    pub s: Vec<Option<f64>>,
}

pub fn error_report(
    result: &ExtremalResult,
    reference: &[f64],
    inside: &[bool],
) -> Result<ErrorReport> {
    Ok(ErrorReport {
        degrees: result.degrees.clone(),
        metrics: result
            .values
            .iter()
            .map(|v| error_metrics(v, reference, inside))
            .collect::<Result<_>>()?,
        s: ratio_sequence(&result.values, inside)?,
    })
}

/// Vector-rho acceleration of the per-point value sequences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceleratedField {
    pub selector: String,
    /// Degree each accelerated field is aligned with.
    pub degrees: Vec<usize>,
    #[serde(skip)]
    pub values: Vec<Vec<f64>>,
}

pub fn accelerate_field(result: &ExtremalResult, sel: Selector) -> Result<AcceleratedField> {
    let nodes: Vec<f64> = result.degrees.iter().map(|&k| k as f64).collect();
    let picked = rho_vector(&result.values, &nodes)?.select(sel)?;
    Ok(AcceleratedField {
        selector: sel.to_string(),
        degrees: picked.iter().map(|a| result.degrees[a.index]).collect(),
        values: picked.into_iter().map(|a| a.value).collect(),
    })
}

/// Scalar-rho acceleration of an error sequence.
pub fn accelerate_scalar(
    errors: &[f64],
    degrees: &[usize],
    sel: Selector,
) -> Result<Vec<(usize, f64)>> {
    let nodes: Vec<f64> = degrees.iter().map(|&k| k as f64).collect();
    Ok(rho_scalar(errors, &nodes)?
        .select(sel)?
        .into_iter()
        .map(|a| (degrees[a.index], a.value))
        .collect())
}

/// Values CSV: `re_z1, im_z1, …, inside, value_k<k>…, reference`.
pub fn write_values_csv<W: Write>(
    w: W,
    grid: &EvalGrid,
    columns: &[(String, &[f64])],
    reference: Option<&[f64]>,
) -> Result<()> {
    let n = grid.points.ncols();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=n)
        .flat_map(|c| [format!("re_z{c}"), format!("im_z{c}")])
        .collect();
    header.push("inside".into());
    header.extend(columns.iter().map(|(name, _)| name.clone()));
    if reference.is_some() {
        header.push("reference".into());
    }
    out.write_record(&header)?;
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid
            .point(i)
            .iter()
            .flat_map(|z| [format!("{:.16e}", z.re), format!("{:.16e}", z.im)])
            .collect();
        row.push(u8::from(grid.inside[i]).to_string());
        row.extend(columns.iter().map(|(_, v)| format!("{:.16e}", v[i])));
        if let Some(r) = reference {
            row.push(format!("{:.16e}", r[i]));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
