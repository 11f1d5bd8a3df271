//! Compact sets with exact membership predicates.

use std::f64::consts::PI;

use nalgebra::Complex;

use crate::basis::AffineMap;
use crate::error::{Error, Result};

/// The compact sets supported by the mesh generators and references.
#[derive(Clone, Debug, PartialEq)]
pub enum CompactSet {
    /// `∏ [lo_i, hi_i]`.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    /// Vertices `center + radius·(cos 2πj/m, sin 2πj/m)`.
    RegularPolygon {
        m: usize,
        center: [f64; 2],
        radius: f64,
    },
    /// `{x ≥ 0, x₁ + x₂ ≤ 1}`.
    Simplex,
    /// Image of `base` under the inverse of `map`, i.e. `{x : P(x) ∈ base}`.
    AffineImage {
        base: Box<CompactSet>,
        map: AffineMap,
    },
    /// Product of two one-dimensional sets.
    Product(Box<CompactSet>, Box<CompactSet>),
}

impl CompactSet {
    pub fn square() -> Self {
        CompactSet::Box {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
        }
    }

    pub fn unit_disk() -> Self {
        CompactSet::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn polygon(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::Invalid(format!(
                "polygon needs at least 3 sides, got {m}"
            )));
        }
        Ok(CompactSet::RegularPolygon {
            m,
            center: [0.0, 0.0],
            radius: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            CompactSet::Box { lo, .. } => lo.len(),
            CompactSet::Disk { .. } | CompactSet::RegularPolygon { .. } | CompactSet::Simplex => 2,
            CompactSet::AffineImage { base, .. } => base.dim(),
            CompactSet::Product(a, b) => a.dim() + b.dim(),
        }
    }

    /// Short identifier used in file names and reports.
    pub fn label(&self) -> String {
        match self {
            CompactSet::Box { lo, hi }
                if lo.iter().all(|&a| a == -1.0) && hi.iter().all(|&b| b == 1.0) =>
            {
                "square".into()
            }
            CompactSet::Box { .. } => "box".into(),
            CompactSet::Disk { .. } => "disk".into(),
            CompactSet::RegularPolygon { m, .. } => format!("polygon:{m}"),
            CompactSet::Simplex => "simplex".into(),
            CompactSet::AffineImage { base, .. } => format!("affine({})", base.label()),
            CompactSet::Product(a, b) => format!("{}x{}", a.label(), b.label()),
        }
    }

    /// Vertices of a regular polygon, counter-clockwise from angle 0.
    pub fn polygon_vertices(m: usize, center: [f64; 2], radius: f64) -> Vec<[f64; 2]> {
        (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            })
            .collect()
    }

    /// Real-point membership with slack `tol`.
    pub fn contains_real(&self, x: &[f64], tol: f64) -> bool {
        match self {
            CompactSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= a - tol && *v <= b + tol),
            CompactSet::Disk { center, radius } => {
                (x[0] - center[0]).hypot(x[1] - center[1]) <= radius + tol
            }
            CompactSet::RegularPolygon { m, center, radius } => {
                // Edge j joins vertices j and j+1; its outward normal sits at angle (2j+1)π/m.
                let apothem = radius * (PI / *m as f64).cos();
                (0..*m).all(|j| {
                    let t = (2 * j + 1) as f64 * PI / *m as f64;
                    (x[0] - center[0]) * t.cos() + (x[1] - center[1]) * t.sin() <= apothem + tol
                })
            }
            CompactSet::Simplex => {
                x.iter().all(|&v| v >= -tol) && x.iter().sum::<f64>() <= 1.0 + tol
            }
            CompactSet::AffineImage { base, map } => {
                let y: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| map.apply(i, v))
                    .collect();
                base.contains_real(&y, tol)
            }
            CompactSet::Product(a, b) => {
                let da = a.dim();
                a.contains_real(&x[..da], tol) && b.contains_real(&x[da..], tol)
            }
        }
    }

    /// A complex point is inside iff it is real (within `tol`) and its real
    /// part is inside.
    pub fn contains(&self, z: &[Complex<f64>], tol: f64) -> bool {
        if z.iter().any(|c| c.im.abs() > tol) {
            return false;
        }
        let x: Vec<f64> = z.iter().map(|c| c.re).collect();
        self.contains_real(&x, tol)
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            CompactSet::Box { lo, hi } => (lo.clone(), hi.clone()),
            CompactSet::Disk { center, radius } => (
                vec![center[0] - radius, center[1] - radius],
                vec![center[0] + radius, center[1] + radius],
            ),
            CompactSet::RegularPolygon { m, center, radius } => {
                let v = Self::polygon_vertices(*m, *center, *radius);
                let lo = (0..2)
                    .map(|c| v.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min))
                    .collect();
                let hi = (0..2)
                    .map(|c| v.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                (lo, hi)
            }
            CompactSet::Simplex => (vec![0.0, 0.0], vec![1.0, 1.0]),
            CompactSet::AffineImage { base, map } => {
                let (lo, hi) = base.bounding_box();
                let a: Vec<f64> = (0..lo.len()).map(|i| map.invert(i, lo[i])).collect();
                let b: Vec<f64> = (0..hi.len()).map(|i| map.invert(i, hi[i])).collect();
                (
                    a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect(),
                    a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
                )
            }
            CompactSet::Product(a, b) => {
                let (mut lo, mut hi) = a.bounding_box();
                let (lo2, hi2) = b.bounding_box();
                lo.extend(lo2);
                hi.extend(hi2);
                (lo, hi)
            }
        }
    }
}
