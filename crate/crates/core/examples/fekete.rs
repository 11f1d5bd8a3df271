//! Approximate Fekete points of the regular hexagon extracted from its
//! admissible mesh by greedy pivoted orthogonalization, plus moments of the
//! discrete measures they induce.
//!
//! `cargo run --release --example fekete -- [degree] [fekete.csv]`
//! (degree 50 reproduces the classical picture; expect several minutes on one core)

use nalgebra::DMatrix;
use pluripot::basis::BasisSpec;
use pluripot::equilibrium::{
    afp_from_state, discrete_measure_moments, weighted_measure, write_fekete_csv,
};
use pluripot::mesh::MeshRecipe;
use pluripot::ortho::OrthoState;

fn main() -> pluripot::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map_or(20, |s| s.parse().expect("degree"));
    let out = args.next().unwrap_or_else(|| "fekete.csv".into());
    let mesh = MeshRecipe::Polygon { sides: 6 }.build(k)?;
    let state = OrthoState::from_mesh(&mesh, k)?;
    let sel = afp_from_state(&state)?;
    write_fekete_csv(std::fs::File::create(&out)?, &mesh, &sel)?;
    println!(
        "{} points from a {}-point mesh, log|det V| = {:.6}; wrote {out}",
        sel.indices.len(),
        mesh.len(),
        sel.log_abs_det
    );

    let on_boundary = sel
        .indices
        .iter()
        .filter(|&&i| {
            let p = mesh.point(i);
            (0..6).any(|j| {
                let t = (2 * j + 1) as f64 * std::f64::consts::PI / 6.0;
                (p[0] * t.cos() + p[1] * t.sin() - (std::f64::consts::PI / 6.0).cos()).abs() < 1e-12
            })
        })
        .count();
    println!("{on_boundary} of them lie on the boundary");

    let basis = BasisSpec::chebyshev_identity(2);
    let fek = DMatrix::from_fn(sel.indices.len(), 2, |i, c| {
        mesh.points[(sel.indices[i], c)]
    });
    let mf = discrete_measure_moments(&fek, None, 2, &basis)?;
    let mw = discrete_measure_moments(&mesh.points, Some(&weighted_measure(&state)), 2, &basis)?;
    println!("{:>4} {:>10} {:>10}", "j", "Fekete", "weighted");
    for (j, (a, b)) in mf.iter().zip(&mw).enumerate() {
        println!("{j:>4} {a:>10.5} {b:>10.5}");
    }
    Ok(())
}
