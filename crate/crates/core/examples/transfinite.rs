//! Transfinite diameter of the disk and the simplex from Gram determinants on
//! admissible meshes, with scalar-rho extrapolation.
//!
//! `cargo run --release --example transfinite -- [start:step:end]`

use pluripot::cli::Schedule;
use pluripot::geometry::CompactSet;
use pluripot::rho::Selector;
use pluripot::transfinite::td_sequence;

fn main() -> pluripot::Result<()> {
    let degrees: Schedule = std::env::args()
        .nth(1)
        .map_or("4:2:28".parse(), |s| s.parse())?;
    for (set, sel) in [
        (CompactSet::unit_disk(), Selector::Diagonal),
        (CompactSet::Simplex, Selector::Column(4)),
    ] {
        let est = td_sequence(&set, &degrees.0, Some(sel))?;
        let r = est.reference.expect("known diameter");
        println!(
            "{} (exact {r:.10}), {:.2} s",
            est.set,
            est.wall_time_s.unwrap_or(0.0)
        );
        println!("{:>4} {:>14} {:>12}", "k", "raw", "abs err");
        for (d, k) in est.degrees.iter().enumerate() {
            println!("{:>4} {:>14.10} {:>12.3e}", k, est.raw[d], est.abs_err[d]);
        }
        println!("rho {sel}:");
        for (d, k) in est.accelerated_degrees.iter().enumerate() {
            println!(
                "{:>4} {:>14.10} {:>12.3e}",
                k, est.accelerated[d], est.accelerated_abs_err[d]
            );
        }
        println!();
    }
    Ok(())
}
