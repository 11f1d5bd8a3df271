//! Scalar and vector rho-algorithm tables for extrapolation at infinity.
//!
//! `ρ^{(i)}_{−1} = 0`, `ρ^{(i)}_0 = S_i` and
//! `ρ^{(i)}_{j+1} = ρ^{(i+1)}_{j−1} + (x_{i+j+1} − x_i)·(ρ^{(i+1)}_j − ρ^{(i)}_j)⁻¹`,
//! where the inverse of a vector `y` is the Samelson inverse `y/⟨y, y⟩`.
//! Even columns approximate the limit; odd columns are auxiliary.

use crate::error::{Error, Result};

/// Relative size below which a difference is treated as zero.
const DENOM_TOL: f64 = 1e-14;

/// Table entries by column: `columns[j][i] = ρ^{(i)}_j`, `None` when invalid.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoTable<T> {
    pub nodes: Vec<f64>,
    pub columns: Vec<Vec<Option<T>>>,
}

/// Which entries to read off a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selector {
    /// `ρ^{(0)}_{2m}`, `m = 0, 1, …`.
    Diagonal,
    /// `ρ^{(i)}_j` for every valid `i`.
    Column(usize),
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Selector::Diagonal => write!(f, "diagonal"),
            Selector::Column(j) => write!(f, "column:{j}"),
        }
    }
}

impl std::str::FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(Selector::Diagonal),
            _ => s
                .strip_prefix("column:")
                .and_then(|j| j.parse().ok())
                .map(Selector::Column)
                .ok_or_else(|| Error::Invalid(format!("unknown rho selector {s:?}"))),
        }
    }
}

/// One selected entry, aligned with the last node its window uses.
#[derive(Clone, Debug, PartialEq)]
pub struct Accelerated<T> {
    /// Index of the last input term used.
    pub index: usize,
    pub node: f64,
    pub value: T,
}

fn check_nodes(nodes: &[f64], len: usize) -> Result<()> {
    if len != nodes.len() {
        return Err(Error::Invalid(format!(
            "{len} terms but {} nodes",
            nodes.len()
        )));
    }
    if len == 0 {
        return Err(Error::Invalid("empty sequence".into()));
    }
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid(
            "rho nodes must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Vector rho table over equal-length vectors `seq[i]` at nodes `x_i`.
pub fn rho_vector(seq: &[Vec<f64>], nodes: &[f64]) -> Result<RhoTable<Vec<f64>>> {
    check_nodes(nodes, seq.len())?;
    let dim = seq[0].len();
    if seq.iter().any(|v| v.len() != dim) {
        return Err(Error::Invalid("rho vectors differ in length".into()));
    }
    let len = seq.len();
    let mut columns: Vec<Vec<Option<Vec<f64>>>> = vec![seq.iter().cloned().map(Some).collect()];
    let zero = vec![0.0; dim];
    for j in 0..len - 1 {
        let mut next = Vec::with_capacity(len - j - 1);
        for i in 0..len - j - 1 {
            let prev = if j == 0 {
                Some(&zero)
            } else {
                columns[j - 1][i + 1].as_ref()
            };
            let entry = match (prev, &columns[j][i + 1], &columns[j][i]) {
                (Some(prev), Some(hi), Some(lo)) => {
                    let d: Vec<f64> = hi.iter().zip(lo).map(|(a, b)| a - b).collect();
                    let dd: f64 = d.iter().map(|x| x * x).sum();
                    let scale = DENOM_TOL * max_norm(hi).max(max_norm(lo));
                    if dd == 0.0 || dd < scale * scale || !dd.is_finite() {
                        None
                    } else {
                        let step = nodes[i + j + 1] - nodes[i];
                        Some(
                            prev.iter()
                                .zip(&d)
                                .map(|(p, di)| p + step * (di / dd))
                                .collect(),
                        )
                    }
                }
                _ => None,
            };
            next.push(entry);
        }
        columns.push(next);
    }
    Ok(RhoTable {
        nodes: nodes.to_vec(),
        columns,
    })
}

/// Scalar rho table; the scalar case of [`rho_vector`].
pub fn rho_scalar(seq: &[f64], nodes: &[f64]) -> Result<RhoTable<f64>> {
    let vecs: Vec<Vec<f64>> = seq.iter().map(|&s| vec![s]).collect();
    let t = rho_vector(&vecs, nodes)?;
    Ok(RhoTable {
        nodes: t.nodes,
        columns: t
            .columns
            .into_iter()
            .map(|c| c.into_iter().map(|e| e.map(|v| v[0])).collect())
            .collect(),
    })
}

impl<T: Clone> RhoTable<T> {
    pub fn get(&self, i: usize, j: usize) -> Option<&T> {
        self.columns.get(j)?.get(i)?.as_ref()
    }

    /// Valid entries picked by `sel`; errors when none are valid.
    pub fn select(&self, sel: Selector) -> Result<Vec<Accelerated<T>>> {
        let out: Vec<Accelerated<T>> = match sel {
            Selector::Diagonal => (0..self.columns.len())
                .step_by(2)
                .filter_map(|j| {
                    self.get(0, j).map(|v| Accelerated {
                        index: j,
                        node: self.nodes[j],
                        value: v.clone(),
                    })
                })
                .collect(),
            Selector::Column(j) => self
                .columns
                .get(j)
                .map(|col| {
                    col.iter()
                        .enumerate()
                        .filter_map(|(i, e)| {
                            e.as_ref().map(|v| Accelerated {
                                index: i + j,
                                node: self.nodes[i + j],
                                value: v.clone(),
                            })
                        })
                        .collect()
                })
                .unwrap_or_default(),
        };
        if out.is_empty() {
            Err(Error::NoAccelerant)
        } else {
            Ok(out)
        }
    }
}
