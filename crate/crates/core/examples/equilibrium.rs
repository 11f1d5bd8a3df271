//! Equilibrium-measure density of the disk: `η_k = det ∂∂̄ (1/2k) log B_k`
//! on a real grid, checked against a finite-difference complex Hessian and
//! compared radially with the Monge–Ampère of the exact extremal function.
//!
//! `cargo run --release --example equilibrium -- [degree] [density.csv]`

use nalgebra::Complex;
use pluripot::equilibrium::{equilibrium_density, fd_hessian_density, write_density_csv};
use pluripot::extremal::{extremal_values, lundin, EvalGrid, Method, Quantity};
use pluripot::linalg::CMatrix;
use pluripot::mesh::MeshRecipe;
use pluripot::ortho::OrthoState;

fn main() -> pluripot::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map_or(20, |s| s.parse().expect("degree"));
    let out = args.next().unwrap_or_else(|| "density.csv".into());
    let recipe = MeshRecipe::DiskDefault;
    let state = OrthoState::from_mesh(&recipe.build(k)?, k)?;
    let grid = EvalGrid::parse("x:-1.2:1.2:121,y:-1.2:1.2:121", None, &recipe.set())?;
    let field = equilibrium_density(&state, &grid, true)?;
    write_density_csv(std::fs::File::create(&out)?, &grid, &field)?;
    println!(
        "wrote {out}; min η = {:.3e}",
        field.raw.iter().copied().fold(f64::INFINITY, f64::min)
    );

    let v = |p: &CMatrix| extremal_values(&state, p, Method::Szef, Quantity::V);
    let exact = |p: &CMatrix| {
        Ok((0..p.nrows())
            .map(|i| lundin(&[p.get(i, 0), p.get(i, 1)]))
            .collect())
    };
    println!(
        "{:>5} {:>12} {:>12} {:>14}",
        "r", "η_k", "FD of v_k", "FD of V (×h²)"
    );
    for r in [0.0, 0.1, 0.3, 0.5, 0.7, 0.8, 0.9] {
        let z = [Complex::new(r, 0.0), Complex::new(0.0, 0.0)];
        let row = grid_value(&grid, &field.raw, r);
        let fd = fd_hessian_density(&v, &z, 1e-4)?;
        let fe = fd_hessian_density(&exact, &z, 1e-4)?;
        println!(
            "{r:>5.2} {row:>12.5e} {:>12.5e} {:>14.5e}",
            fd.value,
            fe.value * 1e-8
        );
    }
    Ok(())
}

/// Field value at the grid point closest to `(r, 0)`.
fn grid_value(grid: &EvalGrid, values: &[f64], r: f64) -> f64 {
    let d = |i: usize| (grid.points.re[(i, 0)] - r).hypot(grid.points.re[(i, 1)]);
    let best = (0..grid.len())
        .min_by(|&a, &b| d(a).total_cmp(&d(b)))
        .expect("non-empty grid");
    values[best]
}
