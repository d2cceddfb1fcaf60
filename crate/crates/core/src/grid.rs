//! Radial discretizations and the densities that live on them.
//!
//! Two layouts are supported. A *node* grid samples point values at
//! `0 = r_0 < … < r_N = R_max` and integrates with a fourth-order Lagrange rule
//! applied interval by interval; stencils never straddle a declared break (a
//! node where the integrand may have a kink, such as a stellar surface). A
//! *cell* grid stores finite-volume averages on shells `[r_{i-1/2}, r_{i+1/2}]`;
//! densities are piecewise constant and shell integrals are exact.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Nodes,
    Cells,
}

#[derive(Debug, Clone)]
struct IntervalRule {
    nodes: Vec<usize>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    layout: Layout,
    /// Node positions, or cell centers for the cell layout.
    nodes: Vec<f64>,
    /// Cell edges (cell layout only).
    edges: Vec<f64>,
    /// Break indices including `0` and `N` (node layout only).
    breaks: Vec<usize>,
    rules: Vec<IntervalRule>,
}

impl RadialGrid {
    /// Node grid through `nodes`, with optional interior break indices.
    pub fn from_nodes(nodes: Vec<f64>, interior_breaks: &[usize]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Usage("a radial grid needs at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Usage(format!("first node must be r = 0, got {}", nodes[0])));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes.iter().all(|r| r.is_finite()) {
            return Err(Error::Usage("grid nodes must be finite and strictly increasing".into()));
        }
        let last = nodes.len() - 1;
        let mut breaks = vec![0];
        for &b in interior_breaks {
            if b == 0 || b >= last {
                return Err(Error::Usage(format!("break index {b} must be interior")));
            }
            breaks.push(b);
        }
        breaks.push(last);
        breaks.sort_unstable();
        breaks.dedup();
        let rules = build_rules(&nodes, &breaks);
        Ok(Self { layout: Layout::Nodes, nodes, edges: Vec::new(), breaks, rules })
    }

    /// Uniform node grid with `intervals` intervals on `[0, r_max]`.
    pub fn uniform(intervals: usize, r_max: f64) -> Result<Self> {
        if intervals < 1 || !(r_max > 0.0) {
            return Err(Error::Usage("uniform grid needs intervals >= 1 and r_max > 0".into()));
        }
        let h = r_max / intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
        nodes[intervals] = r_max;
        Self::from_nodes(nodes, &[])
    }

    /// Uniform spacing `support/inner` on `[0, support]`, a break at `support`,
    /// and an exterior zone of about the same spacing ending exactly at `r_max`.
    pub fn two_zone(support: f64, inner: usize, r_max: f64) -> Result<Self> {
        if inner < 1 || !(support > 0.0) || !(r_max > support) {
            return Err(Error::Usage(format!(
                "two-zone grid needs inner >= 1 and 0 < support ({support}) < r_max ({r_max})"
            )));
        }
        let h = support / inner as f64;
        let outer = ((r_max - support) / h).ceil().max(1.0) as usize;
        let ho = (r_max - support) / outer as f64;
        let mut nodes: Vec<f64> = (0..=inner).map(|i| i as f64 * h).collect();
        nodes[inner] = support;
        for j in 1..=outer {
            nodes.push(support + j as f64 * ho);
        }
        nodes[inner + outer] = r_max;
        Self::from_nodes(nodes, &[inner])
    }

    /// Finite-volume cells with the given edges (`edges[0]` may be nonzero for
    /// slab problems; spherical use requires `edges[0] = 0`).
    pub fn cells(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Usage("a cell grid needs at least one cell".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || !edges.iter().all(|r| r.is_finite()) {
            return Err(Error::Usage("cell edges must be finite and strictly increasing".into()));
        }
        let nodes = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self { layout: Layout::Cells, nodes, edges, breaks: Vec::new(), rules: Vec::new() })
    }

    pub fn uniform_cells(n: usize, r_max: f64) -> Result<Self> {
        if n < 1 || !(r_max > 0.0) {
            return Err(Error::Usage("uniform cells need n >= 1 and r_max > 0".into()));
        }
        let mut edges: Vec<f64> = (0..=n).map(|i| r_max * i as f64 / n as f64).collect();
        edges[n] = r_max;
        Self::cells(edges)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn breaks(&self) -> &[usize] {
        &self.breaks
    }

    /// Outer radius of the discretized domain.
    pub fn r_max(&self) -> f64 {
        match self.layout {
            Layout::Nodes => *self.nodes.last().unwrap(),
            Layout::Cells => *self.edges.last().unwrap(),
        }
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.layout == other.layout && self.nodes == other.nodes && self.breaks == other.breaks
    }

    /// Shell volumes `4π(r₊³ - r₋³)/3` (cell layout).
    pub fn cell_volumes(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| 4.0 * PI * (w[1].powi(3) - w[0].powi(3)) / 3.0)
            .collect()
    }

    /// `∫ f dr` over the grid (node layout) or the midpoint sum (cell layout).
    pub fn line_integral(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.len());
        match self.layout {
            Layout::Nodes => self
                .rules
                .iter()
                .map(|rule| rule.nodes.iter().zip(&rule.weights).map(|(&k, w)| w * f[k]).sum::<f64>())
                .sum(),
            Layout::Cells => self.edges.windows(2).zip(f).map(|(w, v)| (w[1] - w[0]) * v).sum(),
        }
    }

    /// Running integral `∫₀^{r_i} f dr` at every node (node layout).
    pub fn cumulative_line(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(self.layout, Layout::Nodes, "cumulative_line needs a node grid");
        assert_eq!(f.len(), self.len());
        let mut out = Vec::with_capacity(self.len());
        out.push(0.0);
        let mut acc = 0.0;
        for rule in &self.rules {
            acc += rule.nodes.iter().zip(&rule.weights).map(|(&k, w)| w * f[k]).sum::<f64>();
            out.push(acc);
        }
        out
    }

    /// `∫ f 4πr² dr`.
    pub fn volume_integral(&self, f: &[f64]) -> f64 {
        match self.layout {
            Layout::Nodes => {
                let g: Vec<f64> = self.nodes.iter().zip(f).map(|(r, v)| 4.0 * PI * r * r * v).collect();
                self.line_integral(&g)
            }
            Layout::Cells => self.cell_volumes().iter().zip(f).map(|(v, x)| v * x).sum(),
        }
    }

    /// Volume quadrature weights, `Σ w_i f_i ≈ ∫ f 4πr² dr`.
    pub fn volume_weights(&self) -> Vec<f64> {
        match self.layout {
            Layout::Nodes => {
                let mut w = vec![0.0; self.len()];
                for rule in &self.rules {
                    for (&k, wk) in rule.nodes.iter().zip(&rule.weights) {
                        w[k] += wk;
                    }
                }
                for (wi, r) in w.iter_mut().zip(&self.nodes) {
                    *wi *= 4.0 * PI * r * r;
                }
                w
            }
            Layout::Cells => self.cell_volumes(),
        }
    }

    /// Index of the segment (between consecutive breaks) containing interval `j`.
    fn segment_bounds(&self, j: usize) -> (usize, usize) {
        let s = self.breaks.partition_point(|&b| b <= j);
        (self.breaks[s - 1], self.breaks[s])
    }

    /// Piecewise-cubic interpolation of node values at `r` within `[0, r_max]`,
    /// never mixing values across a break.
    pub fn interpolate(&self, values: &[f64], r: f64) -> f64 {
        assert_eq!(self.layout, Layout::Nodes);
        let n = self.len();
        if r <= 0.0 {
            return values[0];
        }
        if r >= self.r_max() {
            return values[n - 1];
        }
        let j = self.nodes.partition_point(|&x| x <= r) - 1;
        let (lo, hi) = self.segment_bounds(j);
        let idx = stencil(j, lo, hi);
        let xs: Vec<f64> = idx.iter().map(|&k| self.nodes[k]).collect();
        let ys: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
        quad::lagrange_eval(&xs, &ys, r)
    }
}

/// Four-point (or shorter) stencil for interval `[j, j+1]` within segment `[lo, hi]`.
fn stencil(j: usize, lo: usize, hi: usize) -> Vec<usize> {
    let len = (hi - lo + 1).min(4);
    let mut start = j.saturating_sub(1).max(lo);
    if start + len - 1 > hi {
        start = hi + 1 - len;
    }
    (start..start + len).collect()
}

fn build_rules(nodes: &[f64], breaks: &[usize]) -> Vec<IntervalRule> {
    let mut rules = Vec::with_capacity(nodes.len() - 1);
    for seg in breaks.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        for j in lo..hi {
            let idx = stencil(j, lo, hi);
            let xs: Vec<f64> = idx.iter().map(|&k| nodes[k]).collect();
            let weights = quad::interval_weights(&xs, nodes[j], nodes[j + 1]);
            rules.push(IntervalRule { nodes: idx, weights });
        }
    }
    rules
}

/// A nonnegative density on a radial grid with its cached total mass.
#[derive(Debug, Clone)]
pub struct GridDensity {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    mass: f64,
}

impl GridDensity {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "density has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("density must be finite and nonnegative; value {v} at index {i}")));
        }
        let mass = grid.volume_integral(&values);
        Ok(Self { grid, values, mass })
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], mass: 0.0 }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    /// Homogeneous ball of the given mass and radius.
    pub fn uniform_ball(grid: Arc<RadialGrid>, mass: f64, radius: f64) -> Result<Self> {
        if !(mass > 0.0 && radius > 0.0) {
            return Err(Error::Domain("uniform ball needs positive mass and radius".into()));
        }
        let rho = 3.0 * mass / (4.0 * PI * radius.powi(3));
        match grid.layout() {
            Layout::Nodes => Self::from_fn(grid, |r| if r <= radius * (1.0 + 1e-12) { rho } else { 0.0 }),
            Layout::Cells => {
                // cell averages of the indicator, so the mass is exact
                let values = grid
                    .edges()
                    .windows(2)
                    .map(|w| {
                        let hi = w[1].min(radius);
                        if hi <= w[0] {
                            0.0
                        } else {
                            rho * (hi.powi(3) - w[0].powi(3)) / (w[1].powi(3) - w[0].powi(3))
                        }
                    })
                    .collect();
                Self::new(grid, values)
            }
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    /// Rescaled to total mass `target`.
    pub fn renormalized(&self, target: f64) -> Result<Self> {
        if !(self.mass > 0.0) {
            return Err(Error::Domain("cannot renormalize a density of zero mass".into()));
        }
        self.scaled(target / self.mass)
    }

    /// Resamples onto `target` by monotone cubic interpolation (node source) or
    /// cell lookup (cell source); zero beyond the source domain.
    pub fn resample(&self, target: Arc<RadialGrid>) -> Result<Self> {
        if self.grid.same_as(&target) {
            return Ok(Self { grid: target, values: self.values.clone(), mass: self.mass });
        }
        let r_max = self.grid.r_max();
        let values: Vec<f64> = match self.grid.layout() {
            Layout::Nodes => {
                let interp = quad::MonotoneCubic::new(self.grid.nodes(), &self.values);
                target
                    .nodes()
                    .iter()
                    .map(|&r| if r > r_max { 0.0 } else { interp.eval(r).max(0.0) })
                    .collect()
            }
            Layout::Cells => {
                let edges = self.grid.edges();
                target
                    .nodes()
                    .iter()
                    .map(|&r| {
                        if r > r_max || r < edges[0] {
                            0.0
                        } else {
                            let i = (edges.partition_point(|&e| e <= r)).clamp(1, edges.len() - 1) - 1;
                            self.values[i]
                        }
                    })
                    .collect()
            }
        };
        Self::new(target, values)
    }
}

/// Radial velocity samples on a grid.
#[derive(Debug, Clone)]
pub struct FlowField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl FlowField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage("velocity field length does not match its grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("velocity field must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn uniform(grid: Arc<RadialGrid>, u: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![u; n] }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_quadrature_is_fourth_order_exact_for_cubics() {
        let g = RadialGrid::uniform(7, 2.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| r * r * r - r + 1.0).collect();
        let exact = 2.0f64.powi(4) / 4.0 - 2.0 + 2.0;
        assert!((g.line_integral(&f) - exact).abs() < 1e-13);
        let cum = g.cumulative_line(&f);
        for (r, c) in g.nodes().iter().zip(&cum) {
            assert!((c - (r.powi(4) / 4.0 - r * r / 2.0 + r)).abs() < 1e-13);
        }
    }

    #[test]
    fn breaks_keep_stencils_on_one_side() {
        let g = RadialGrid::two_zone(1.0, 8, 2.0).unwrap();
        // kinked integrand: (1 - r)_+ is linear on each side
        let f: Vec<f64> = g.nodes().iter().map(|r| (1.0 - r).max(0.0)).collect();
        assert!((g.line_integral(&f) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn ball_mass_is_exact_on_cells() {
        let g = Arc::new(RadialGrid::uniform_cells(10, 2.0).unwrap());
        let b = GridDensity::uniform_ball(g, 1.0, 0.73).unwrap();
        assert!((b.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negative_density_rejected() {
        let g = Arc::new(RadialGrid::uniform(4, 1.0).unwrap());
        assert!(GridDensity::new(g, vec![1.0, -1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn volume_weights_reproduce_volume_integral() {
        let g = RadialGrid::two_zone(1.0, 16, 1.7).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
        let w = g.volume_weights();
        let a: f64 = w.iter().zip(&f).map(|(w, f)| w * f).sum();
        assert!((a - g.volume_integral(&f)).abs() < 1e-14);
        assert!(w.iter().all(|&x| x >= 0.0));
    }
}
