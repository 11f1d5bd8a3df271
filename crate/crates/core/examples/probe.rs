//! Runs the invariant suite over every supplied mesh and prints failures.
//!
//! `cargo run --release --example probe -- [seed]`

fn main() -> pluripot::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map_or(0, |s| s.parse().expect("seed"));
    let report = pluripot::probe::run_probe(seed)?;
    for c in report.checks.iter().filter(|c| !c.pass) {
        println!(
            "FAIL {} [{}]: {:.3e} vs {:.3e}",
            c.name, c.subject, c.value, c.threshold
        );
    }
    println!("{} passed, {} failed", report.passed, report.failed);
    Ok(())
}
