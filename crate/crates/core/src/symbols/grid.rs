use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform tensor grid over `[q_min, q_max] × [p_min, p_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    q_min: f64,
    q_max: f64,
    n_q: usize,
    p_min: f64,
    p_max: f64,
    n_p: usize,
}

impl PhaseSpaceGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(q_min: f64, q_max: f64, n_q: usize, p_min: f64, p_max: f64, n_p: usize) -> Result<Self> {
        if n_q < Self::MIN_POINTS || n_p < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points per axis, got {n_q} x {n_p}",
                Self::MIN_POINTS
            )));
        }
        if !(q_min.is_finite() && q_max.is_finite() && p_min.is_finite() && p_max.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if q_max <= q_min || p_max <= p_min {
            return Err(Error::InvalidGrid(format!(
                "empty range q [{q_min}, {q_max}], p [{p_min}, {p_max}]"
            )));
        }
        Ok(Self { q_min, q_max, n_q, p_min, p_max, n_p })
    }

    /// Grid symmetric about the origin with half-widths `q_half`, `p_half`.
    pub fn symmetric(q_half: f64, n_q: usize, p_half: f64, n_p: usize) -> Result<Self> {
        Self::new(-q_half, q_half, n_q, -p_half, p_half, n_p)
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }
    pub fn q_max(&self) -> f64 {
        self.q_max
    }
    pub fn p_min(&self) -> f64 {
        self.p_min
    }
    pub fn p_max(&self) -> f64 {
        self.p_max
    }
    pub fn n_q(&self) -> usize {
        self.n_q
    }
    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / (self.n_q - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p - 1) as f64
    }

    pub fn q_nodes(&self) -> Vec<f64> {
        nodes(self.q_min, self.q_max, self.n_q)
    }

    pub fn p_nodes(&self) -> Vec<f64> {
        nodes(self.p_min, self.p_max, self.n_p)
    }

    /// Same bounds with `2(n - 1) + 1` points per axis, so every old node is kept.
    pub fn refined(&self) -> Self {
        Self {
            n_q: 2 * (self.n_q - 1) + 1,
            n_p: 2 * (self.n_p - 1) + 1,
            ..self.clone()
        }
    }

    /// Composite trapezoid rule over the grid.
    pub fn integrate(&self, values: &Array2<f64>) -> f64 {
        let wq = trapezoid_weights(self.n_q, self.dq());
        let wp = trapezoid_weights(self.n_p, self.dp());
        values
            .outer_iter()
            .zip(&wq)
            .map(|(row, w)| w * row.iter().zip(&wp).map(|(v, u)| v * u).sum::<f64>())
            .sum()
    }

    /// Index ranges covering the central `fraction` of each axis.
    pub fn interior(&self, fraction: f64) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        (
            central_range(self.q_min, self.q_max, &self.q_nodes(), fraction),
            central_range(self.p_min, self.p_max, &self.p_nodes(), fraction),
        )
    }
}

fn nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * step }).collect()
}

pub(crate) fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

fn central_range(lo: f64, hi: f64, nodes: &[f64], fraction: f64) -> std::ops::Range<usize> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * fraction * (hi - lo) * (1.0 + 1e-12);
    let start = nodes.iter().position(|&x| x >= mid - half).unwrap_or(0);
    let end = nodes.iter().rposition(|&x| x <= mid + half).map_or(nodes.len(), |i| i + 1);
    start..end
}

/// Real values sampled at the nodes of a [`PhaseSpaceGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridSymbol {
    grid: PhaseSpaceGrid,
    values: Array2<f64>,
}

impl GridSymbol {
    pub fn new(grid: PhaseSpaceGrid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n_q(), grid.n_p()) {
            return Err(Error::DimensionMismatch(format!(
                "values are {:?}, grid is {} x {}",
                values.dim(),
                grid.n_q(),
                grid.n_p()
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value {v} at node ({i}, {j})")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest magnitude on the outermost ring of nodes.
    pub fn boundary_max_abs(&self) -> f64 {
        boundary_max_abs(&self.values)
    }

    /// Sup-norm of the difference over the central `fraction` of the grid.
    pub fn sup_diff(&self, other: &GridSymbol, fraction: f64) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("grids differ".into()));
        }
        let (rq, rp) = self.grid.interior(fraction);
        let mut d: f64 = 0.0;
        for i in rq {
            for j in rp.clone() {
                d = d.max((self.values[[i, j]] - other.values[[i, j]]).abs());
            }
        }
        Ok(d)
    }

    pub fn add(&self, other: &GridSymbol) -> Result<GridSymbol> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("grids differ".into()));
        }
        GridSymbol::new(self.grid.clone(), &self.values + &other.values)
    }
}

pub(crate) fn boundary_max_abs(values: &Array2<f64>) -> f64 {
    let (nq, np) = values.dim();
    let mut m: f64 = 0.0;
    for i in 0..nq {
        m = m.max(values[[i, 0]].abs()).max(values[[i, np - 1]].abs());
    }
    for j in 0..np {
        m = m.max(values[[0, j]].abs()).max(values[[nq - 1, j]].abs());
    }
    m
}
