//! Invariant suite: orthonormality, Parseval trace, Bergman lower bound,
//! `u ≤ v + log N/(2k)`, the weighted Bergman bound, the empirical sampling
//! inequality and the dual-path / finite-difference density oracles.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::eval_basis_real;
use crate::equilibrium::{density_adjugate, density_qr, derivative_bundles, fd_hessian_density};
use crate::error::Result;
use crate::extremal::{extremal_values, EvalGrid, GridAxis, Method, Quantity};
use crate::geometry::CompactSet;
use crate::linalg::{compensated_sum, gemm, CMatrix};
use crate::mesh::{Mesh, MeshRecipe};
use crate::ortho::OrthoState;
use crate::rho::{rho_scalar, rho_vector, Selector};

pub const ORTHO_TOL: f64 = 1e-10;
pub const PARSEVAL_TOL: f64 = 1e-10;
/// Rounding slack on `B_k ≥ 1`.
pub const BERGMAN_SLACK: f64 = 1e-10;
/// Rounding slack on `u_k − v_k − log N_k/(2k) ≤ 0`.
pub const UV_SLACK: f64 = 1e-12;
/// Rounding slack on `B̃_k/B_k ≤ N_k`, relative to `N_k`.
pub const WEIGHTED_SLACK: f64 = 1e-10;
pub const SAMPLING_MARGIN: f64 = 0.05;
pub const SAMPLING_POLYS: usize = 200;
/// Dense probe grid resolution per axis for the sampling inequality.
pub const SAMPLING_GRID: usize = 201;
pub const PROBE_DEGREES: [usize; 3] = [2, 5, 10];
pub const ORTHO_HIGH_DEGREE: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub subject: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, subject: String, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            subject,
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    fn at_least(name: &str, subject: String, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            subject,
            value,
            threshold,
            pass: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
}

impl ProbeReport {
    fn new(seed: u64, checks: Vec<Check>) -> Self {
        let failed = checks.iter().filter(|c| !c.pass).count();
        ProbeReport {
            seed,
            passed: checks.len() - failed,
            failed,
            pass: failed == 0,
            checks,
        }
    }
}

/// `‖QᵀQ − I‖_max`.
pub fn orthonormality_defect(state: &OrthoState) -> f64 {
    let n = state.dim();
    let mut g = DMatrix::<f64>::zeros(n, n);
    gemm(&mut g, 1.0, &state.q, true, &state.q, false, 0.0);
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// `|(1/M)·Σ B_k(z_i) − N_k| / N_k`.
pub fn parseval_defect(state: &OrthoState) -> f64 {
    let b = state.bergman_on_mesh();
    let mean = compensated_sum(b.iter().copied()) / b.len() as f64;
    (mean - state.dim() as f64).abs() / state.dim() as f64
}

/// Real and shifted-complex points around the set: the bounding box enlarged
/// by a quarter on each side, `count²` points, with imaginary shift `0` and `shift`.
pub fn probe_points(set: &CompactSet, count: usize, shift: f64) -> Result<CMatrix> {
    let (lo, hi) = set.bounding_box();
    let axes: Vec<GridAxis> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| {
            let pad = 0.25 * (b - a);
            GridAxis::new(a - pad, b + pad, count)
        })
        .collect::<Result<_>>()?;
    let real = EvalGrid::tensor(axes.clone(), None, set)?.points;
    let shifted = EvalGrid::tensor(axes, Some(vec![shift; lo.len()]), set)?.points;
    let l = real.nrows();
    let re = DMatrix::from_fn(2 * l, lo.len(), |i, c| {
        if i < l {
            real.re[(i, c)]
        } else {
            shifted.re[(i - l, c)]
        }
    });
    let sim = shifted.im.expect("shifted grid is complex");
    let im = DMatrix::from_fn(
        2 * l,
        lo.len(),
        |i, c| if i < l { 0.0 } else { sim[(i - l, c)] },
    );
    Ok(CMatrix::from_parts(re, im))
}

/// Dense real grid of the bounding box restricted to `E`.
pub fn dense_interior(set: &CompactSet, count: usize) -> Result<DMatrix<f64>> {
    let (lo, hi) = set.bounding_box();
    let axes: Vec<GridAxis> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| GridAxis::new(*a, *b, count))
        .collect::<Result<_>>()?;
    let grid = EvalGrid::tensor(axes, None, set)?;
    let rows: Vec<usize> = (0..grid.len()).filter(|&i| grid.inside[i]).collect();
    Ok(DMatrix::from_fn(rows.len(), lo.len(), |i, c| {
        grid.points.re[(rows[i], c)]
    }))
}

/// Largest `max_grid |p| / max_mesh |p|` over random polynomials with
/// coefficients uniform in `[−1, 1]` in the mesh-adapted Chebyshev basis.
pub fn sampling_ratio(
    mesh: &Mesh,
    dense: &DMatrix<f64>,
    k: usize,
    polys: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let state_basis = crate::basis::BasisSpec::chebyshev_adapted(&mesh.points)?;
    let vm = eval_basis_real(&state_basis, k, &mesh.points)?;
    let vg = eval_basis_real(&state_basis, k, dense)?;
    let n = vm.ncols();
    let coeffs = DMatrix::from_fn(n, polys, |_, _| rng.random_range(-1.0..1.0));
    let mut pm = DMatrix::zeros(vm.nrows(), polys);
    gemm(&mut pm, 1.0, &vm, false, &coeffs, false, 0.0);
    let mut pg = DMatrix::zeros(vg.nrows(), polys);
    gemm(&mut pg, 1.0, &vg, false, &coeffs, false, 0.0);
    let col_max =
        |m: &DMatrix<f64>, j: usize| m.column(j).iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    Ok((0..polys)
        .map(|j| col_max(&pg, j) / col_max(&pm, j))
        .fold(0.0, f64::max))
}

fn state_checks(
    recipe: &MeshRecipe,
    k: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Check>,
) -> Result<()> {
    let set = recipe.set();
    let subject = format!("{recipe} k={k}");
    let mesh = recipe.build(k)?;
    let state = OrthoState::from_mesh(&mesh, k)?;
    out.push(Check::at_most(
        "orthonormality",
        subject.clone(),
        orthonormality_defect(&state),
        ORTHO_TOL,
    ));
    out.push(Check::at_most(
        "parseval-trace",
        subject.clone(),
        parseval_defect(&state),
        PARSEVAL_TOL,
    ));

    let pts = probe_points(&set, 25, 0.25)?;
    let v = extremal_values(&state, &pts, Method::Szef, Quantity::V)?;
    let u = extremal_values(&state, &pts, Method::Szef, Quantity::U)?;
    let bmin = v
        .iter()
        .map(|x| (2.0 * k as f64 * x).exp())
        .chain(state.bergman_on_mesh())
        .fold(f64::INFINITY, f64::min);
    out.push(Check::at_least(
        "bergman-lower-bound",
        subject.clone(),
        bmin,
        1.0 - BERGMAN_SLACK,
    ));
    let gap = (state.dim() as f64).ln() / (2.0 * k as f64);
    let worst = u
        .iter()
        .zip(&v)
        .map(|(a, b)| a - b - gap)
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(Check::at_most(
        "u-le-v-plus-log-n",
        subject.clone(),
        worst,
        UV_SLACK,
    ));

    let weighted = state.with_weighted_stage()?;
    let wt = weighted.basis_at(&pts)?;
    let b = weighted.bergman(&weighted.evaluate(wt.clone()));
    let bw = weighted.bergman(&weighted.evaluate_weighted(wt)?);
    let ratio = bw.iter().zip(&b).map(|(x, y)| x / y).fold(0.0, f64::max);
    let nk = weighted.dim() as f64;
    out.push(Check::at_most(
        "weighted-bergman-bound",
        subject.clone(),
        ratio / nk,
        1.0 + WEIGHTED_SLACK,
    ));

    if let Some(c) = mesh.constant {
        let dense = dense_interior(&set, SAMPLING_GRID)?;
        let r = sampling_ratio(&mesh, &dense, k, SAMPLING_POLYS, rng)?;
        out.push(Check::at_most(
            "sampling-inequality",
            subject,
            r,
            c + SAMPLING_MARGIN,
        ));
    }
    Ok(())
}

fn oracle_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let k = 10;
    let recipe = MeshRecipe::DiskDefault;
    let state = OrthoState::from_mesh(&recipe.build(k)?, k)?;
    let mut pts = Vec::new();
    while pts.len() < 10 {
        let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if x.hypot(y) < 0.95 {
            pts.push([x, y]);
        }
    }
    let pm = CMatrix::real(DMatrix::from_fn(pts.len(), 2, |i, c| pts[i][c]));
    let bundles = derivative_bundles(&state, &pm, false)?;
    let v = |p: &CMatrix| extremal_values(&state, p, Method::Szef, Quantity::V);
    let (mut dual, mut fd_rel, mut min_eta) = (0.0_f64, 0.0_f64, f64::INFINITY);
    for (i, b) in bundles.iter().enumerate() {
        let qr = density_qr(b, k)?.value;
        let adj = density_adjugate(b, k)?;
        dual = dual.max((qr - adj).abs() / qr.abs().max(adj.abs()));
        min_eta = min_eta.min(qr);
        let z = [Complex::new(pts[i][0], 0.0), Complex::new(pts[i][1], 0.0)];
        let fd = fd_hessian_density(&v, &z, 1e-4)?;
        fd_rel = fd_rel.max((qr - fd.value).abs() / qr.abs());
    }
    let subject = format!("{recipe} k={k}");
    out.push(Check::at_most(
        "density-dual-path",
        subject.clone(),
        dual,
        1e-12,
    ));
    out.push(Check::at_least(
        "density-nonnegative",
        subject.clone(),
        min_eta,
        -1e-10,
    ));
    out.push(Check::at_most("density-fd-oracle", subject, fd_rel, 1e-4));

    let x: Vec<f64> = (1..=6).map(|i| i as f64).collect();
    let s: Vec<f64> = x.iter().map(|x| (x + 2.0) / (x + 1.0)).collect();
    let col = rho_scalar(&s, &x)?.select(Selector::Column(2))?;
    let exact = col
        .iter()
        .map(|a| (a.value - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(Check::at_most(
        "rho-rational-exactness",
        "(x+2)/(x+1)".into(),
        exact,
        1e-12,
    ));
    let scalar = rho_scalar(&s, &x)?;
    let vector = rho_vector(&s.iter().map(|v| vec![*v]).collect::<Vec<_>>(), &x)?;
    let same = scalar.columns.iter().zip(&vector.columns).all(|(a, b)| {
        a.len() == b.len()
            && a.iter().zip(b).all(|(p, q)| match (p, q) {
                (Some(p), Some(q)) => p.to_bits() == q[0].to_bits(),
                (None, None) => true,
                _ => false,
            })
    });
    out.push(Check::at_most(
        "rho-scalar-vector-bitwise",
        "(x+2)/(x+1)".into(),
        if same { 0.0 } else { 1.0 },
        0.0,
    ));
    Ok(())
}

/// Runs the full suite over every supplied generator.
pub fn run_probe(seed: u64) -> Result<ProbeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for recipe in MeshRecipe::all_defaults() {
        for k in PROBE_DEGREES {
            state_checks(&recipe, k, &mut rng, &mut checks)?;
        }
        let k = ORTHO_HIGH_DEGREE;
        let state = OrthoState::from_mesh(&recipe.build(k)?, k)?;
        checks.push(Check::at_most(
            "orthonormality",
            format!("{recipe} k={k}"),
            orthonormality_defect(&state),
            ORTHO_TOL,
        ));
    }
    oracle_checks(&mut rng, &mut checks)?;
    Ok(ProbeReport::new(seed, checks))
}
