//! Builds every supplied admissible mesh at a given degree and writes one as CSV.
//!
//! `cargo run --release --example mesh -- [degree] [set] [out.csv]`

use pluripot::mesh::MeshRecipe;

fn main() -> pluripot::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map_or(10, |s| s.parse().expect("degree"));
    let chosen: MeshRecipe = args
        .next()
        .map_or(Ok(MeshRecipe::Polygon { sides: 6 }), |s| s.parse())?;
    let out = args.next().unwrap_or_else(|| "mesh.csv".into());

    println!("{:<16} {:>8} {:>10}", "set", "points", "constant");
    for recipe in MeshRecipe::all_defaults() {
        let mesh = recipe.build(k)?;
        let c = mesh.constant.map_or("-".into(), |c| format!("{c:.6}"));
        println!("{:<16} {:>8} {:>10}", recipe.to_string(), mesh.len(), c);
    }
    let mesh = chosen.build(k)?;
    mesh.write_csv(std::fs::File::create(&out)?)?;
    println!("wrote {} points of {chosen} to {out}", mesh.len());
    Ok(())
}
