//! Rho-algorithm extrapolation at infinity on a synthetic sequence with a
//! known limit: every even column improves on the raw tail.
//!
//! `cargo run --release --example rho`

use pluripot::rho::{rho_scalar, Selector};

fn main() -> pluripot::Result<()> {
    // S(x) = 1 + log(x)/x² − 1/x: limit 1, sub-linear convergence
    let nodes: Vec<f64> = (2..=16).map(|k| 2.0 * k as f64).collect();
    let seq: Vec<f64> = nodes
        .iter()
        .map(|x| 1.0 + x.ln() / (x * x) - 1.0 / x)
        .collect();
    let table = rho_scalar(&seq, &nodes)?;
    println!("raw tail error   {:.3e}", (seq.last().unwrap() - 1.0).abs());
    for sel in [
        Selector::Column(2),
        Selector::Column(4),
        Selector::Column(6),
        Selector::Diagonal,
    ] {
        let picked = table.select(sel)?;
        let last = picked.last().expect("non-empty selection");
        println!(
            "{:<16} {:.3e} (node {})",
            sel.to_string(),
            (last.value - 1.0).abs(),
            last.node
        );
    }
    Ok(())
}
