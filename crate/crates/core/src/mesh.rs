//! Admissible polynomial meshes and their combinators.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::basis::AffineMap;
use crate::error::{Error, Result};
use crate::geometry::CompactSet;

/// Two points closer than this are the same mesh point.
pub const DEDUP_TOL: f64 = 1e-12;

/// A finite point set `A_k` with its norming constant `C` (`None` when only
/// known empirically).
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    /// `M × n`, one point per row.
    pub points: DMatrix<f64>,
    pub degree: usize,
    pub constant: Option<f64>,
    pub source: String,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    pub(crate) fn from_rows(
        rows: Vec<Vec<f64>>,
        n: usize,
        degree: usize,
        constant: Option<f64>,
        source: &str,
    ) -> Self {
        let rows = dedup(rows, DEDUP_TOL);
        let points = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Mesh {
            points,
            degree,
            constant,
            source: source.to_string(),
        }
    }

    /// Writes the `x,y` CSV with 17 significant digits per coordinate.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let header: Vec<String> = ["x", "y", "z"]
            .iter()
            .map(|s| s.to_string())
            .chain((3..self.dim()).map(|i| format!("x{i}")))
            .take(self.dim())
            .collect();
        wr.write_record(&header)?;
        for i in 0..self.len() {
            wr.write_record(self.points.row(i).iter().map(|v| format!("{v:.16e}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads points written by [`Mesh::write_csv`].
    pub fn read_csv<R: Read>(r: R, degree: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let n = rd.headers()?.len();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Io(format!("{s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let points = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Ok(Mesh {
            points,
            degree,
            constant: None,
            source: "csv".into(),
        })
    }
}

/// Removes near-duplicates (Euclidean distance < `tol`), keeping first occurrences.
pub fn dedup(rows: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return rows;
    }
    let n = rows[0].len();
    let cell = tol.max(1e-300) * 1e3;
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|x| (x / cell).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect()
        })
        .collect();
    for p in rows {
        let base = key(&p);
        let dup = offsets.iter().any(|off| {
            let k: Vec<i64> = base.iter().zip(off).map(|(a, b)| a + b).collect();
            buckets.get(&k).is_some_and(|ids| {
                ids.iter().any(|&i| {
                    kept[i]
                        .iter()
                        .zip(&p)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                        < tol
                })
            })
        });
        if !dup {
            buckets.entry(base).or_default().push(kept.len());
            kept.push(p);
        }
    }
    kept
}

/// Chebyshev–Lobatto nodes `cos(iπ/s)`, `i = 0..=s`.
fn lobatto(s: usize) -> Vec<f64> {
    (0..=s).map(|i| (i as f64 * PI / s as f64).cos()).collect()
}

fn require_degree(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::Invalid("mesh degree must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `X_k × X_k` with `X_k = {−cos(jπ/s)}`, `s = ⌈m_factor·k⌉`.
pub fn mesh_square(k: usize, m_factor: f64) -> Result<Mesh> {
    require_degree(k)?;
    if !(m_factor > 1.0) {
        return Err(Error::Invalid(format!(
            "oversampling factor must exceed 1, got {m_factor}"
        )));
    }
    let s = (m_factor * k as f64).ceil() as usize;
    let x: Vec<f64> = (0..=s).map(|j| -(j as f64 * PI / s as f64).cos()).collect();
    let c1 = 1.0 / (k as f64 * PI / (2.0 * s as f64)).cos();
    let rows = x
        .iter()
        .flat_map(|&a| x.iter().map(move |&b| vec![a, b]))
        .collect();
    Ok(Mesh::from_rows(rows, 2, k, Some(c1 * c1), "square"))
}

/// `(2k+1)²` Chebyshev–Lobatto grid on `[−1, 1]²`, constant 2.
pub fn mesh_square_cl(k: usize) -> Result<Mesh> {
    require_degree(k)?;
    let x = lobatto(2 * k);
    let rows = x
        .iter()
        .flat_map(|&a| x.iter().map(move |&b| vec![a, b]))
        .collect();
    Ok(Mesh::from_rows(rows, 2, k, Some(2.0), "square-cl"))
}

/// Polar-product disk meshes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiskVariant {
    /// Radii `cos(hπ/s)`, `h = 0..=s`, angles `πj/s`, `j = 0..s`; needs `s > k`.
    LobattoPolar { s: usize },
    /// Radii `cos(iπ/(2k))` and angles `jπ/(2k)`, `i, j = 0..=2k`.
    TdPolar,
}

/// Mesh of the closed unit disk; repeated points (the origin, the two ends
/// of each diameter) are removed.
pub fn mesh_disk(k: usize, variant: DiskVariant) -> Result<Mesh> {
    require_degree(k)?;
    let (radii, angles, s, tag) = match variant {
        DiskVariant::LobattoPolar { s } => {
            if s <= k {
                return Err(Error::Undersampled { s, k });
            }
            let angles = (0..s).map(|j| PI * j as f64 / s as f64).collect::<Vec<_>>();
            (lobatto(s), angles, s, "disk-lobatto-polar")
        }
        DiskVariant::TdPolar => {
            let s = 2 * k;
            let angles = (0..=s)
                .map(|j| PI * j as f64 / s as f64)
                .collect::<Vec<_>>();
            (lobatto(s), angles, s, "disk-td-polar")
        }
    };
    let c1 = 1.0 / (k as f64 * PI / (2.0 * s as f64)).cos();
    let rows = radii
        .iter()
        .flat_map(|&r| angles.iter().map(move |&t| vec![r * t.cos(), r * t.sin()]))
        .collect();
    Ok(Mesh::from_rows(rows, 2, k, Some(c1 * c1), tag))
}

/// Points of the `(4k+1)²` Chebyshev–Lobatto grid pushed onto the unit
/// simplex: affine to `[0, 1]²`, then `(u, v) ↦ (u(1 − v), uv)`.
fn duffy_rows(k: usize) -> Vec<[f64; 2]> {
    let x: Vec<f64> = lobatto(4 * k).iter().map(|c| 0.5 * (c + 1.0)).collect();
    x.iter()
        .flat_map(|&u| x.iter().map(move |&v| [u * (1.0 - v), u * v]))
        .collect()
}

/// Duffy image of a Chebyshev–Lobatto grid on the unit simplex, constant 2.
pub fn mesh_simplex(k: usize) -> Result<Mesh> {
    require_degree(k)?;
    let rows = duffy_rows(k).into_iter().map(|p| p.to_vec()).collect();
    Ok(Mesh::from_rows(rows, 2, k, Some(2.0), "simplex"))
}

/// Regular `m`-gon (unit circumradius, centred at 0): union of the simplex
/// meshes mapped onto the centroid-fan triangles.
pub fn mesh_polygon(k: usize, m: usize) -> Result<Mesh> {
    require_degree(k)?;
    if m < 3 {
        return Err(Error::Invalid(format!(
            "polygon needs at least 3 sides, got {m}"
        )));
    }
    let verts = CompactSet::polygon_vertices(m, [0.0, 0.0], 1.0);
    let base = duffy_rows(k);
    let mut rows = Vec::with_capacity(m * base.len());
    for j in 0..m {
        let a = verts[j];
        let b = verts[(j + 1) % m];
        for p in &base {
            rows.push(vec![p[0] * a[0] + p[1] * b[0], p[0] * a[1] + p[1] * b[1]]);
        }
    }
    Ok(Mesh::from_rows(
        rows,
        2,
        k,
        Some(2.0),
        &format!("polygon:{m}"),
    ))
}

/// Union of two meshes of the same degree; the constant is the larger of the two.
pub fn mesh_union(a: &Mesh, b: &Mesh) -> Result<Mesh> {
    if a.degree != b.degree {
        return Err(Error::Invalid(format!(
            "union of meshes of degrees {} and {}",
            a.degree, b.degree
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::Invalid(
            "union of meshes of different dimension".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = (0..a.len())
        .map(|i| a.point(i))
        .chain((0..b.len()).map(|i| b.point(i)))
        .collect();
    let constant = match (a.constant, b.constant) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    };
    Ok(Mesh::from_rows(
        rows,
        a.dim(),
        a.degree,
        constant,
        &format!("{}+{}", a.source, b.source),
    ))
}

/// Pushes each point through `map`; degree and constant are unchanged.
pub fn mesh_affine_image(a: &Mesh, map: &AffineMap) -> Mesh {
    let points = DMatrix::from_fn(a.len(), a.dim(), |i, j| map.apply(j, a.points[(i, j)]));
    Mesh {
        points,
        degree: a.degree,
        constant: a.constant,
        source: a.source.clone(),
    }
}

/// A named generator: the set it meshes plus how to build degree-k meshes.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshRecipe {
    Square {
        oversampling: f64,
    },
    SquareCl,
    Disk(DiskVariant),
    /// Lobatto-polar disk with the default `s = 2k`.
    DiskDefault,
    Simplex,
    Polygon {
        sides: usize,
    },
}

impl MeshRecipe {
    pub fn build(&self, k: usize) -> Result<Mesh> {
        match self {
            MeshRecipe::Square { oversampling } => mesh_square(k, *oversampling),
            MeshRecipe::SquareCl => mesh_square_cl(k),
            MeshRecipe::Disk(v) => mesh_disk(k, *v),
            MeshRecipe::DiskDefault => mesh_disk(k, DiskVariant::LobattoPolar { s: 2 * k }),
            MeshRecipe::Simplex => mesh_simplex(k),
            MeshRecipe::Polygon { sides } => mesh_polygon(k, *sides),
        }
    }

    pub fn set(&self) -> CompactSet {
        match self {
            MeshRecipe::Square { .. } | MeshRecipe::SquareCl => CompactSet::square(),
            MeshRecipe::Disk(_) | MeshRecipe::DiskDefault => CompactSet::unit_disk(),
            MeshRecipe::Simplex => CompactSet::Simplex,
            MeshRecipe::Polygon { sides } => CompactSet::RegularPolygon {
                m: *sides,
                center: [0.0, 0.0],
                radius: 1.0,
            },
        }
    }

    /// Every supplied generator with its default parameters.
    pub fn all_defaults() -> Vec<MeshRecipe> {
        vec![
            MeshRecipe::Square { oversampling: 2.0 },
            MeshRecipe::SquareCl,
            MeshRecipe::DiskDefault,
            MeshRecipe::Disk(DiskVariant::TdPolar),
            MeshRecipe::Simplex,
            MeshRecipe::Polygon { sides: 6 },
        ]
    }
}

impl std::str::FromStr for MeshRecipe {
    type Err = Error;

    /// `square`, `square-cl`, `disk`, `disk:td-polar`, `disk:lobatto:<s>`,
    /// `simplex` or `polygon:<m>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let int = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::Invalid(format!("bad integer {t:?} in set spec {s:?}")))
        };
        match parts.as_slice() {
            ["square"] => Ok(MeshRecipe::Square { oversampling: 2.0 }),
            ["square-cl"] => Ok(MeshRecipe::SquareCl),
            ["disk"] => Ok(MeshRecipe::DiskDefault),
            ["disk", "td-polar"] => Ok(MeshRecipe::Disk(DiskVariant::TdPolar)),
            ["disk", "lobatto", n] => Ok(MeshRecipe::Disk(DiskVariant::LobattoPolar { s: int(n)? })),
            ["simplex"] => Ok(MeshRecipe::Simplex),
            ["polygon", m] => {
                let sides = int(m)?;
                if sides < 3 {
                    return Err(Error::Invalid(format!("polygon needs at least 3 sides, got {sides}")));
                }
                Ok(MeshRecipe::Polygon { sides })
            }
            _ => Err(Error::Invalid(format!(
                "unknown set spec {s:?} (square | square-cl | disk[:td-polar | :lobatto:<s>] | simplex | polygon:<m>)"
            ))),
        }
    }
}

impl std::fmt::Display for MeshRecipe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshRecipe::Square { oversampling } => write!(f, "square(m={oversampling})"),
            MeshRecipe::SquareCl => write!(f, "square-cl"),
            MeshRecipe::DiskDefault => write!(f, "disk"),
            MeshRecipe::Disk(DiskVariant::TdPolar) => write!(f, "disk:td-polar"),
            MeshRecipe::Disk(DiskVariant::LobattoPolar { s }) => write!(f, "disk:lobatto:{s}"),
            MeshRecipe::Simplex => write!(f, "simplex"),
            MeshRecipe::Polygon { sides } => write!(f, "polygon:{sides}"),
        }
    }
}
