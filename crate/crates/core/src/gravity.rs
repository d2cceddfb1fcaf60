//! Newtonian potential theory for spherically symmetric densities with the
//! sign convention `ΔV = 4πρ`, so `V ≤ 0` and `V' = m(r)/r² ≥ 0`.
//!
//! Everything beyond the grid's outer radius is vacuum: the potential there is
//! exactly `-M/r` and the field `M/r²`, and the corresponding tail integrals are
//! added analytically.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridDensity, Layout, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// The potential `V(r)`.
    Potential,
    /// The radial field `V'(r) = m(r)/r²`.
    Field,
}

/// A potential or field sampled on a grid, with the exterior law attached.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    mass: f64,
    kind: FieldKind,
    /// Exact in-cell representation for piecewise-constant densities.
    cells: Option<Arc<CellExact>>,
}

#[derive(Debug)]
struct CellExact {
    rho: Vec<f64>,
    gravity: CellGravity,
}

impl RadialField {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Value at any radius; beyond the grid the vacuum law `-M/r` (or `M/r²`)
    /// is used.
    pub fn eval(&self, r: f64) -> f64 {
        let r_max = self.grid.r_max();
        if r > r_max {
            return match self.kind {
                FieldKind::Potential => -self.mass / r,
                FieldKind::Field => self.mass / (r * r),
            };
        }
        match self.grid.layout() {
            Layout::Nodes => self.grid.interpolate(&self.values, r),
            Layout::Cells => {
                let exact = self.cells.as_ref().expect("cell fields carry their source density");
                let edges = self.grid.edges();
                let i = edges.partition_point(|&e| e <= r).clamp(1, edges.len() - 1) - 1;
                let (a, b) = (edges[i], edges[i + 1]);
                let r = r.max(a);
                let beta = 4.0 * PI * exact.rho[i] / 3.0;
                let alpha = exact.gravity.m_edges[i] - beta * a.powi(3);
                match self.kind {
                    FieldKind::Potential => exact.gravity.v_edges[i + 1] - shell_field_integral(alpha, beta, r, b),
                    FieldKind::Field => {
                        if r > 0.0 {
                            (alpha + beta * r.powi(3)) / (r * r)
                        } else {
                            0.0
                        }
                    }
                }
            }
        }
    }
}

/// Enclosed mass `m(r_i)` at the grid points and the total mass.
#[derive(Debug, Clone)]
pub struct MassProfile {
    pub m: Vec<f64>,
    pub total: f64,
}

/// Gravity of a piecewise-constant density on shells, evaluated exactly.
#[derive(Debug, Clone)]
pub struct CellGravity {
    /// Enclosed mass at every cell edge.
    pub m_edges: Vec<f64>,
    /// Potential at every cell edge.
    pub v_edges: Vec<f64>,
    /// Potential at every cell center.
    pub v_centers: Vec<f64>,
}

/// `∫_a^r m(s)/s² ds` for `m(s) = α + βs³` on a shell starting at `a`
/// (`α = 0` on the innermost shell, where `a` may be zero).
fn shell_field_integral(alpha: f64, beta: f64, a: f64, r: f64) -> f64 {
    let inv = if alpha != 0.0 { alpha * (1.0 / a - 1.0 / r) } else { 0.0 };
    inv + beta * (r * r - a * a) / 2.0
}

/// Exact monopole gravity of cell averages `rho` on shells with the given edges
/// (`edges[0] = 0`). The potential is normalized by `V(R_max) = -M/R_max`.
pub fn cell_gravity(edges: &[f64], rho: &[f64]) -> CellGravity {
    let n = rho.len();
    debug_assert_eq!(edges.len(), n + 1);
    let mut m_edges = Vec::with_capacity(n + 1);
    m_edges.push(0.0);
    for i in 0..n {
        let (a, b) = (edges[i], edges[i + 1]);
        m_edges.push(m_edges[i] + 4.0 * PI * rho[i] * (b.powi(3) - a.powi(3)) / 3.0);
    }
    let total = m_edges[n];
    let r_max = edges[n];
    let mut v_edges = vec![0.0; n + 1];
    v_edges[n] = -total / r_max;
    let mut v_centers = vec![0.0; n];
    for i in (0..n).rev() {
        let (a, b) = (edges[i], edges[i + 1]);
        let beta = 4.0 * PI * rho[i] / 3.0;
        let alpha = m_edges[i] - beta * a.powi(3);
        let c = 0.5 * (a + b);
        let whole = shell_field_integral(alpha, beta, a, b);
        v_edges[i] = v_edges[i + 1] - whole;
        v_centers[i] = v_edges[i] + shell_field_integral(alpha, beta, a, c);
    }
    CellGravity { m_edges, v_edges, v_centers }
}

pub fn enclosed_mass(rho: &GridDensity) -> MassProfile {
    let grid = rho.grid();
    match grid.layout() {
        Layout::Nodes => {
            let f: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(rho.values())
                .map(|(r, v)| 4.0 * PI * r * r * v)
                .collect();
            let m = grid.cumulative_line(&f);
            let total = *m.last().unwrap();
            MassProfile { m, total }
        }
        Layout::Cells => {
            let edges = grid.edges();
            let mut m = Vec::with_capacity(grid.len());
            let mut acc = 0.0;
            for (i, &v) in rho.values().iter().enumerate() {
                let (a, b) = (edges[i], edges[i + 1]);
                let c = 0.5 * (a + b);
                m.push(acc + 4.0 * PI * v * (c.powi(3) - a.powi(3)) / 3.0);
                acc += 4.0 * PI * v * (b.powi(3) - a.powi(3)) / 3.0;
            }
            MassProfile { m, total: acc }
        }
    }
}

/// `V(r) = -4π[(1/r)∫₀^r s²ρ ds + ∫_r^∞ sρ ds]`.
pub fn potential_of(rho: &GridDensity) -> RadialField {
    let grid = rho.grid();
    let values = match grid.layout() {
        Layout::Nodes => {
            let mass = enclosed_mass(rho);
            let f: Vec<f64> = grid.nodes().iter().zip(rho.values()).map(|(r, v)| r * v).collect();
            let inner = grid.cumulative_line(&f);
            let total = *inner.last().unwrap();
            grid.nodes()
                .iter()
                .zip(mass.m.iter().zip(&inner))
                .map(|(&r, (&m, &i))| {
                    let interior = if r > 0.0 { m / r } else { 0.0 };
                    -interior - 4.0 * PI * (total - i)
                })
                .collect()
        }
        Layout::Cells => {
            let gravity = cell_gravity(grid.edges(), rho.values());
            let values = gravity.v_centers.clone();
            let exact = CellExact { rho: rho.values().to_vec(), gravity };
            return RadialField {
                grid: grid.clone(),
                values,
                mass: rho.mass(),
                kind: FieldKind::Potential,
                cells: Some(Arc::new(exact)),
            };
        }
    };
    RadialField { grid: grid.clone(), values, mass: rho.mass(), kind: FieldKind::Potential, cells: None }
}

/// `V'(r) = m(r)/r²`, with `V'(0) = 0`.
pub fn field_of(rho: &GridDensity) -> RadialField {
    let grid = rho.grid();
    let mass = enclosed_mass(rho);
    let values = grid
        .nodes()
        .iter()
        .zip(&mass.m)
        .map(|(&r, &m)| if r > 0.0 { m / (r * r) } else { 0.0 })
        .collect();
    let cells = (grid.layout() == Layout::Cells).then(|| {
        Arc::new(CellExact { rho: rho.values().to_vec(), gravity: cell_gravity(grid.edges(), rho.values()) })
    });
    RadialField { grid: grid.clone(), values, mass: mass.total, kind: FieldKind::Field, cells }
}

/// `‖∇V_a - ∇V_b‖₂² = ∫₀^∞ (V_a' - V_b')² 4πr² dr`, including the exterior tail.
///
/// Densities on different grids are resampled onto the grid of `a` when
/// `resample` is set, and rejected otherwise.
pub fn field_norm_sq(a: &GridDensity, b: &GridDensity, resample: bool) -> Result<f64> {
    let b = if a.grid().same_as(b.grid()) {
        b.clone()
    } else if resample {
        b.resample(a.grid().clone())?
    } else {
        return Err(Error::Usage(
            "field_norm_sq: densities live on different grids and resampling is disabled".into(),
        ));
    };
    let grid = a.grid();
    let r_max = grid.r_max();
    let interior = match grid.layout() {
        Layout::Nodes => {
            let (ma, mb) = (enclosed_mass(a), enclosed_mass(&b));
            let f: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(ma.m.iter().zip(&mb.m))
                .map(|(&r, (x, y))| if r > 0.0 { (x - y).powi(2) / (r * r) } else { 0.0 })
                .collect();
            4.0 * PI * grid.line_integral(&f)
        }
        Layout::Cells => {
            let delta: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
            4.0 * PI * cell_mass_sq_over_r2(grid.edges(), &delta)
        }
    };
    let dm = a.mass() - b.mass();
    Ok(interior + 4.0 * PI * dm * dm / r_max)
}

/// `∫ m(r)²/r² dr` over the cells for a piecewise-constant density, exactly.
fn cell_mass_sq_over_r2(edges: &[f64], rho: &[f64]) -> f64 {
    let mut m_lo = 0.0;
    let mut sum = 0.0;
    for (i, &v) in rho.iter().enumerate() {
        let (a, b) = (edges[i], edges[i + 1]);
        let beta = 4.0 * PI * v / 3.0;
        let alpha = m_lo - beta * a.powi(3);
        let inv = if a > 0.0 { alpha * alpha * (1.0 / a - 1.0 / b) } else { 0.0 };
        sum += inv + alpha * beta * (b * b - a * a) + beta * beta * (b.powi(5) - a.powi(5)) / 5.0;
        m_lo += beta * (b.powi(3) - a.powi(3));
    }
    sum
}

/// The three classical expressions for the gravitational potential energy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PotentialEnergyForms {
    /// Shell assembly `-∫ m(r) ρ(r) 4πr dr`, the radial form of the pair sum.
    pub shell: f64,
    /// `½∫ρ V_ρ`.
    pub density_potential: f64,
    /// `-(1/8π)‖∇V_ρ‖₂²`.
    pub field: f64,
}

impl PotentialEnergyForms {
    /// Largest pairwise relative disagreement between the three forms.
    pub fn max_relative_spread(&self) -> f64 {
        let v = [self.shell, self.density_potential, self.field];
        let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / scale
    }
}

pub fn potential_energy_forms(rho: &GridDensity) -> PotentialEnergyForms {
    let grid = rho.grid();
    let field = potential_energy(rho);
    match grid.layout() {
        Layout::Nodes => {
            let mass = enclosed_mass(rho);
            let shell_f: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(rho.values().iter().zip(&mass.m))
                .map(|(&r, (&v, &m))| -4.0 * PI * r * v * m)
                .collect();
            let pot = potential_of(rho);
            let dp: Vec<f64> = rho.values().iter().zip(pot.values()).map(|(r, v)| r * v).collect();
            PotentialEnergyForms {
                shell: grid.line_integral(&shell_f),
                density_potential: 0.5 * grid.volume_integral(&dp),
                field,
            }
        }
        Layout::Cells => {
            let edges = grid.edges();
            let g = cell_gravity(edges, rho.values());
            let (mut shell, mut dp) = (0.0, 0.0);
            for (i, &v) in rho.values().iter().enumerate() {
                let (a, b) = (edges[i], edges[i + 1]);
                let beta = 4.0 * PI * v / 3.0;
                let alpha = g.m_edges[i] - beta * a.powi(3);
                shell -= 4.0 * PI * v * (alpha * (b * b - a * a) / 2.0 + beta * (b.powi(5) - a.powi(5)) / 5.0);
                // ∫_a^b 4πr² V(r) dr with V(r) = V(b) - ∫_r^b m/s² ds
                let vol = 4.0 * PI * (b.powi(3) - a.powi(3)) / 3.0;
                let inv_part = if b > 0.0 { alpha * ((b * b - a * a) / 2.0 - (b.powi(3) - a.powi(3)) / (3.0 * b)) } else { 0.0 };
                let cube_part = beta / 2.0 * (b * b * (b.powi(3) - a.powi(3)) / 3.0 - (b.powi(5) - a.powi(5)) / 5.0);
                dp += 0.5 * v * (g.v_edges[i + 1] * vol - 4.0 * PI * (inv_part + cube_part));
            }
            PotentialEnergyForms { shell, density_potential: dp, field }
        }
    }
}

/// `E_pot(ρ) = -(1/8π)‖∇V_ρ‖₂²`, the best-conditioned of the three forms.
pub fn potential_energy(rho: &GridDensity) -> f64 {
    let grid = rho.grid();
    let r_max = grid.r_max();
    let m = rho.mass();
    let interior = match grid.layout() {
        Layout::Nodes => {
            let mass = enclosed_mass(rho);
            let f: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(&mass.m)
                .map(|(&r, &m)| if r > 0.0 { m * m / (r * r) } else { 0.0 })
                .collect();
            grid.line_integral(&f)
        }
        Layout::Cells => cell_mass_sq_over_r2(grid.edges(), rho.values()),
    };
    -0.5 * interior - m * m / (2.0 * r_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `ρ = 1 - r²` on the unit ball: `m = 4π(r³/3 - r⁵/5)`, `V(0) = -π`.
    fn parabola_on_nodes() -> GridDensity {
        let g = Arc::new(RadialGrid::two_zone(1.0, 128, 3.0).unwrap());
        GridDensity::from_fn(g, |r| (1.0 - r * r).max(0.0)).unwrap()
    }

    #[test]
    fn parabola_potential_and_field() {
        let rho = parabola_on_nodes();
        let m_total = 8.0 * PI / 15.0;
        // fourth-order quadrature: errors ~ h⁴ with h = 1/128
        assert!((rho.mass() - m_total).abs() < 1e-7);
        let v = potential_of(&rho);
        assert!((v.eval(0.0) + PI).abs() < 1e-7);
        assert!((v.eval(1.0) + m_total).abs() < 1e-7);
        assert!((v.eval(2.5) * 2.5 + rho.mass()).abs() < 1e-7);
        assert!((v.eval(30.0) * 30.0 + rho.mass()).abs() < 1e-13);
        let f = field_of(&rho);
        for (&r, &x) in rho.grid().nodes().iter().zip(f.values()) {
            let m = if r < 1.0 { 4.0 * PI * (r.powi(3) / 3.0 - r.powi(5) / 5.0) } else { m_total };
            let expect = if r > 0.0 { m / (r * r) } else { 0.0 };
            // m ~ r³ near the centre while the quadrature error is ~ h⁵, so the
            // first few nodes carry an O(h²) relative error
            assert!((x - expect).abs() < 1e-5, "r={r} {x} {expect}");
        }
    }

    #[test]
    fn parabola_energy_forms_agree() {
        let rho = parabola_on_nodes();
        let forms = potential_energy_forms(&rho);
        assert!(forms.max_relative_spread() < 1e-7, "{forms:?}");
        let zero = GridDensity::zero(rho.grid().clone());
        let n = field_norm_sq(&rho, &zero, false).unwrap();
        assert!((n / (-8.0 * PI) - forms.field).abs() < 1e-14);
        let doubled = rho.scaled(2.0).unwrap();
        assert!((field_norm_sq(&doubled, &zero, false).unwrap() - 4.0 * n).abs() < 1e-10 * n);
    }

    #[test]
    fn cells_reproduce_ball_exactly() {
        let g = Arc::new(RadialGrid::uniform_cells(50, 2.0).unwrap());
        let ball = GridDensity::uniform_ball(g, 1.0, 1.0).unwrap();
        let zero = GridDensity::zero(ball.grid().clone());
        assert!((field_norm_sq(&ball, &zero, false).unwrap() - 24.0 * PI / 5.0).abs() < 1e-12);
        let forms = potential_energy_forms(&ball);
        assert!((forms.field + 0.6).abs() < 1e-13);
        assert!((forms.shell + 0.6).abs() < 1e-13);
        assert!((forms.density_potential + 0.6).abs() < 1e-13);
        let v = potential_of(&ball);
        assert!((v.eval(0.0) + 1.5).abs() < 1e-13);
        assert!((v.eval(0.37) + 1.5 - 0.5 * 0.37 * 0.37).abs() < 1e-13);
        assert!((v.eval(1.0) + 1.0).abs() < 1e-13);
        assert!((v.eval(1.7) + 1.0 / 1.7).abs() < 1e-13);
        assert!((v.eval(2.0) + 0.5).abs() < 1e-13);
        let f = field_of(&ball);
        assert!((f.eval(0.5) - 0.5).abs() < 1e-13);
        assert!((f.eval(1.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mismatched_grids_need_resampling() {
        let a = parabola_on_nodes();
        let g = Arc::new(RadialGrid::uniform(40, 3.0).unwrap());
        let b = GridDensity::zero(g);
        assert!(matches!(field_norm_sq(&a, &b, false), Err(Error::Usage(_))));
        assert!(field_norm_sq(&a, &b, true).is_ok());
    }
}
