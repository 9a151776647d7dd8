//! One-dimensional nonuniform grids that can grow to the right.
//!
//! Node `k` of a grid sits at `law(k)`, where the law is affine for uniform
//! grids and `anchor + expm1(k dxi) / sigma` for log-stretched ones. Right
//! expansion keeps appending nodes from the same law, so the local spacing
//! ratio never exceeds `e^{dxi}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_INTERVALS: usize = 32;
pub const MAX_SPACING_RATIO: f64 = 1.05;
pub const DEFAULT_STRETCH: f64 = 0.02;
pub const DEFAULT_NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Uniform,
    LogStretched,
}

/// Grid parameters as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub x_left: f64,
    pub x_right: f64,
    /// Number of intervals; the grid has `n + 1` nodes.
    pub n: usize,
    #[serde(default = "default_stretch")]
    pub stretch: f64,
    #[serde(default = "default_budget")]
    pub node_budget: usize,
}

fn default_stretch() -> f64 {
    DEFAULT_STRETCH
}

fn default_budget() -> usize {
    DEFAULT_NODE_BUDGET
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::build(self.kind, self.x_left, self.x_right, self.n, self.stretch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    kind: GridKind,
    left_anchor: f64,
    sigma: f64,
    /// Law increment: spacing for uniform grids, step in `xi` otherwise.
    dxi: f64,
    /// Law index of the last node.
    last_index: usize,
}

impl Grid {
    /// Grid with exactly `n + 1` nodes and exact endpoints.
    pub fn build(
        kind: GridKind,
        x_left: f64,
        x_right: f64,
        n: usize,
        stretch: f64,
    ) -> Result<Self> {
        if !(x_left < x_right) || !x_left.is_finite() || !x_right.is_finite() {
            return Err(Error::Grid(format!(
                "degenerate interval [{x_left}, {x_right}]"
            )));
        }
        if n < MIN_INTERVALS {
            return Err(Error::Grid(format!(
                "need at least {MIN_INTERVALS} intervals, got {n}"
            )));
        }
        let (sigma, dxi) = match kind {
            GridKind::Uniform => (0.0, (x_right - x_left) / n as f64),
            GridKind::LogStretched => {
                if !(stretch > 0.0 && stretch.is_finite()) {
                    return Err(Error::Grid(format!(
                        "stretch must be positive, got {stretch}"
                    )));
                }
                let dxi = (stretch * (x_right - x_left)).ln_1p() / n as f64;
                if dxi.exp() > MAX_SPACING_RATIO {
                    return Err(Error::Grid(format!(
                        "spacing ratio {:.4} exceeds {MAX_SPACING_RATIO}; use more nodes or a smaller stretch",
                        dxi.exp()
                    )));
                }
                (stretch, dxi)
            }
        };
        let mut g = Grid {
            nodes: Vec::with_capacity(n + 1),
            kind,
            left_anchor: x_left,
            sigma,
            dxi,
            last_index: n,
        };
        let interior: Vec<f64> = (0..n).map(|k| g.law(k)).collect();
        g.nodes.extend(interior);
        g.nodes.push(x_right);
        if g.nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("nodes are not strictly increasing".into()));
        }
        Ok(g)
    }

    /// Grid on explicit nodes; expansion continues uniformly with the last spacing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid(
                "need at least 3 strictly increasing nodes".into(),
            ));
        }
        let n = nodes.len() - 1;
        let h = nodes[n] - nodes[n - 1];
        Ok(Grid {
            left_anchor: nodes[n] - n as f64 * h,
            kind: GridKind::Uniform,
            sigma: 0.0,
            dxi: h,
            last_index: n,
            nodes,
        })
    }

    fn law(&self, k: usize) -> f64 {
        match self.kind {
            GridKind::Uniform => self.left_anchor + k as f64 * self.dxi,
            GridKind::LogStretched => {
                self.left_anchor + (k as f64 * self.dxi).exp_m1() / self.sigma
            }
        }
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x_left(&self) -> f64 {
        self.nodes[0]
    }

    pub fn x_right(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn left_anchor(&self) -> f64 {
        self.left_anchor
    }

    pub fn stretch(&self) -> f64 {
        self.sigma
    }

    /// Largest ratio of consecutive spacings, in either direction.
    pub fn max_spacing_ratio(&self) -> f64 {
        self.nodes
            .windows(3)
            .map(|w| {
                let (a, b) = (w[1] - w[0], w[2] - w[1]);
                (b / a).max(a / b)
            })
            .fold(1.0, f64::max)
    }

    /// Three-point weights of `u_xx` at interior node `i`; exact on quadratics.
    pub fn laplacian_weights(&self, i: usize) -> (f64, f64, f64) {
        let hm = self.nodes[i] - self.nodes[i - 1];
        let hp = self.nodes[i + 1] - self.nodes[i];
        (
            2.0 / (hm * (hm + hp)),
            -2.0 / (hm * hp),
            2.0 / (hp * (hm + hp)),
        )
    }

    /// Nodal first derivative: centered three-point stencil inside, second
    /// order one-sided at the ends.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let x = &self.nodes;
        let n = x.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let hm = x[i] - x[i - 1];
            let hp = x[i + 1] - x[i];
            // weighted one-sided slopes; exact zero on constants
            out[i] = (hm * (u[i + 1] - u[i]) / hp + hp * (u[i] - u[i - 1]) / hm) / (hm + hp);
        }
        let one_sided = |a: usize, b: usize, c: usize| {
            // derivative at x[a] of the quadratic through a, b, c
            let (d1, d2) = (x[b] - x[a], x[c] - x[a]);
            let wb = d2 / (d1 * (d2 - d1));
            let wc = -d1 / (d2 * (d2 - d1));
            wb * (u[b] - u[a]) + wc * (u[c] - u[a])
        };
        out[0] = one_sided(0, 1, 2);
        out[n - 1] = one_sided(n - 1, n - 2, n - 3);
        out
    }

    /// Append nodes from the grid law until the last one reaches `new_right`.
    ///
    /// Old nodes and values are untouched; new values come from `seed(x)`.
    pub fn expand_right(
        &self,
        u: &[f64],
        new_right: f64,
        mut seed: impl FnMut(f64) -> f64,
    ) -> Result<(Grid, Vec<f64>)> {
        if !(new_right > self.x_right()) || !new_right.is_finite() {
            return Err(Error::Grid(format!(
                "new right end {new_right} does not extend {}",
                self.x_right()
            )));
        }
        let mut g = self.clone();
        let mut v = u.to_vec();
        let mut k = g.last_index;
        while g.x_right() < new_right {
            k += 1;
            let x = g.law(k);
            if !(x > g.x_right()) {
                return Err(Error::Grid(format!("grid law stalled at x = {x}")));
            }
            g.nodes.push(x);
            v.push(seed(x));
        }
        g.last_index = k;
        Ok((g, v))
    }

    /// Number of nodes `expand_right(.., new_right, ..)` would produce.
    pub fn nodes_after_expansion(&self, new_right: f64) -> usize {
        let target = match self.kind {
            GridKind::Uniform => ((new_right - self.left_anchor) / self.dxi).ceil(),
            GridKind::LogStretched => {
                ((self.sigma * (new_right - self.left_anchor)).ln_1p() / self.dxi).ceil()
            }
        };
        let extra = (target - self.last_index as f64).max(0.0);
        self.nodes.len() + extra as usize + 1
    }

    /// Drop every other node in the leftmost stretch where `u` stays within
    /// `flat_tol` of `u[0]`. Returns `None` when there is nothing to drop.
    pub fn coarsen_left(&self, u: &[f64], flat_tol: f64) -> Option<(Grid, Vec<f64>)> {
        let end = u
            .iter()
            .position(|&v| (v - u[0]).abs() > flat_tol)?
            .saturating_sub(1);
        // keep the last flat node so the transition into the front is unchanged
        if end < 4 {
            return None;
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut vals = Vec::with_capacity(u.len());
        for i in (0..end).step_by(2) {
            nodes.push(self.nodes[i]);
            vals.push(u[i]);
        }
        nodes.extend_from_slice(&self.nodes[end..]);
        vals.extend_from_slice(&u[end..]);
        let g = Grid {
            nodes,
            ..self.clone()
        };
        Some((g, vals))
    }

    /// Expand to `new_right`, coarsening the flat left part first whenever
    /// the result would exceed `budget` nodes. Returns the number of
    /// coarsening passes.
    pub fn expand_within_budget(
        &self,
        u: &[f64],
        new_right: f64,
        budget: usize,
        flat_tol: f64,
        seed: impl FnMut(f64) -> f64,
    ) -> Result<(Grid, Vec<f64>, usize)> {
        let mut g = self.clone();
        let mut v = u.to_vec();
        let mut passes = 0;
        while g.nodes_after_expansion(new_right) > budget {
            match g.coarsen_left(&v, flat_tol) {
                Some((cg, cv)) => {
                    g = cg;
                    v = cv;
                    passes += 1;
                }
                None => {
                    return Err(Error::Grid(format!(
                        "node budget {budget} exhausted expanding to {new_right}"
                    )))
                }
            }
        }
        let (g, v) = g.expand_right(&v, new_right, seed)?;
        Ok((g, v, passes))
    }
}

/// Linear interpolation of nodal values at `x` (clamped to the grid).
pub fn interpolate(nodes: &[f64], u: &[f64], x: f64) -> f64 {
    if x <= nodes[0] {
        return u[0];
    }
    let n = nodes.len();
    if x >= nodes[n - 1] {
        return u[n - 1];
    }
    let j = nodes.partition_point(|&v| v <= x);
    let (x0, x1) = (nodes[j - 1], nodes[j]);
    let w = (x - x0) / (x1 - x0);
    u[j - 1] * (1.0 - w) + u[j] * w
}
