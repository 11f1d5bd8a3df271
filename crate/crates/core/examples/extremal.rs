//! Siciak–Zaharjuta extremal function of the square from its Bergman function:
//! errors against the closed form, consecutive-difference ratios and vector-rho
//! acceleration.
//!
//! `cargo run --release --example extremal -- [start:step:end]`

use pluripot::cli::Schedule;
use pluripot::extremal::{
    accelerate_field, error_metrics, error_report, extremal_sequence, reference_extremal, EvalGrid,
    Method, Quantity,
};
use pluripot::mesh::MeshRecipe;
use pluripot::rho::Selector;

fn main() -> pluripot::Result<()> {
    let degrees: Schedule = std::env::args()
        .nth(1)
        .map_or(Ok(Schedule((4..=20).collect())), |s| s.parse())?;
    let recipe = MeshRecipe::Square { oversampling: 2.0 };
    let set = recipe.set();
    let grid = EvalGrid::parse("x:-2:2:100,y:-2:2:100", None, &set)?;
    let reference = reference_extremal(&set, &grid.points)?;

    let result = extremal_sequence(&recipe, &grid, &degrees.0, Method::Szef, Quantity::V)?;
    let report = error_report(&result, &reference, &grid.inside)?;
    println!("{:>4} {:>12} {:>12} {:>8}", "k", "e1", "e_inf", "s_k");
    for (d, m) in report.metrics.iter().enumerate() {
        let s = d.checked_sub(2).and_then(|i| report.s[i]);
        let s = s.map_or("-".into(), |s| format!("{s:.4}"));
        println!(
            "{:>4} {:>12.4e} {:>12.4e} {:>8}",
            report.degrees[d], m.e1, m.e_inf, s
        );
    }

    let acc = accelerate_field(&result, Selector::Diagonal)?;
    println!("\nvector-rho diagonal");
    for (k, v) in acc.degrees.iter().zip(&acc.values) {
        println!(
            "{:>4} {:>12.4e}",
            k,
            error_metrics(v, &reference, &grid.inside)?.e1
        );
    }
    Ok(())
}
