use pluripot::extremal::{
    error_report, extremal_sequence, extremal_values, reference_extremal, EvalGrid, Method,
    Quantity,
};
use pluripot::mesh::MeshRecipe;
use pluripot::ortho::OrthoState;

#[test]
fn disk_extremal_estimates_converge_outside() {
    let recipe = MeshRecipe::DiskDefault;
    let set = recipe.set();
    let grid = EvalGrid::parse("x:-2:2:21,y:-2:2:21", None, &set).unwrap();
    let reference = reference_extremal(&set, &grid.points).unwrap();
    let degrees = [8, 16, 32];
    let result = extremal_sequence(&recipe, &grid, &degrees, Method::SzefBw, Quantity::V).unwrap();
    let report = error_report(&result, &reference, &grid.inside).unwrap();
    let e1: Vec<f64> = report.metrics.iter().map(|m| m.e1).collect();
    assert!(e1.windows(2).all(|w| w[1] < w[0]), "{e1:?}");
    assert!(e1[2] < 0.025);
}

#[test]
fn upper_and_lower_estimates_bracket_consistently() {
    let k = 10;
    let mesh = MeshRecipe::Square { oversampling: 2.0 }.build(k).unwrap();
    let state = OrthoState::from_mesh(&mesh, k).unwrap();
    let set = MeshRecipe::Square { oversampling: 2.0 }.set();
    let grid = EvalGrid::parse("x:-3:3:15,y:-3:3:15", None, &set).unwrap();
    let u = extremal_values(&state, &grid.points, Method::Szef, Quantity::U).unwrap();
    let v = extremal_values(&state, &grid.points, Method::Szef, Quantity::V).unwrap();
    let n = state.dim() as f64;
    for (u, v) in u.iter().zip(&v) {
        assert!(u - v <= n.ln() / (2.0 * k as f64) + 1e-12);
    }
}
