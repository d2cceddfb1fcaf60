//! Finite-volume evolution of the spherically symmetric Euler–Poisson system
//!
//! ```text
//! ∂t(r²ρ)  + ∂r(r²ρu)        = 0
//! ∂t(r²ρu) + ∂r(r²(ρu² + p)) = 2rp - r²ρ m(r)/r²
//! ```
//!
//! with a barotropic closure `p = P(ρ)`.
//!
//! The scheme is well balanced: each wet cell reconstructs the equilibrium
//! variable `q = Φ'(ρ) + V` (constant across a hydrostatic star) and face
//! densities follow as `ρ = (Φ')⁻¹((q - V)₊)` with the exact face potential.
//! The momentum source is the exact integral of `2rp - r²ρV'` over the
//! reconstructed in-cell hydrostatic profile, so flux and source cancel to
//! rounding error on a discrete equilibrium. Fluxes are Rusanov between wet
//! cells and a free-surface closure against vacuum; time stepping is the
//! two-stage SSP Runge–Kutta (Heun) method.

mod equilibrium;
mod run;

pub use equilibrium::{discrete_equilibrium, perturb, perturb_equilibrium, Equilibrium, Perturbation, PerturbationKind};
pub use run::{run, ConservationLedger, LedgerRow, MetricRow, RunOptions, RunOutcome};

use std::f64::consts::PI;
use std::sync::Arc;

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::gravity;
use crate::grid::{FlowField, GridDensity, RadialGrid};

/// Density floor relative to the central density.
pub const FLOOR_FRACTION: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Spherical,
    /// Planar test mode for validating the Riemann solver.
    Slab,
}

/// Cell averages of density and momentum at one instant.
#[derive(Debug, Clone)]
pub struct HydroState {
    eos: EosSpec,
    grid: Arc<RadialGrid>,
    geometry: Geometry,
    gravity: bool,
    rho: Vec<f64>,
    mom: Vec<f64>,
    t: f64,
    rho_floor: f64,
}

/// Largest face density allowed, relative to the cell average, before the
/// face potential is raised to keep the update positivity preserving.
const FACE_CAP: f64 = 1.5;

/// Reconstructed equilibrium variable and velocity at both sides of each cell.
struct Faces {
    q_l: Vec<f64>,
    q_r: Vec<f64>,
    u_l: Vec<f64>,
    u_r: Vec<f64>,
    slope_q: Vec<f64>,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

impl HydroState {
    pub fn new(
        eos: EosSpec,
        grid: Arc<RadialGrid>,
        geometry: Geometry,
        gravity: bool,
        rho: Vec<f64>,
        mom: Vec<f64>,
        rho_floor: f64,
    ) -> Result<Self> {
        if grid.layout() != crate::grid::Layout::Cells {
            return Err(Error::Usage("hydro states live on cell grids".into()));
        }
        if rho.len() != grid.len() || mom.len() != grid.len() {
            return Err(Error::Usage("state arrays do not match the number of cells".into()));
        }
        if gravity && geometry == Geometry::Slab {
            return Err(Error::Unsupported("self-gravity is only available in spherical geometry".into()));
        }
        if geometry == Geometry::Spherical && grid.edges()[0] != 0.0 {
            return Err(Error::Usage("spherical grids must start at r = 0".into()));
        }
        if !(rho_floor > 0.0) {
            return Err(Error::Usage("density floor must be positive".into()));
        }
        if rho.iter().chain(&mom).any(|v| !v.is_finite()) {
            return Err(Error::Domain("state contains non-finite values".into()));
        }
        let mut s = Self { eos, grid, geometry, gravity, rho, mom, t: 0.0, rho_floor };
        s.apply_floor();
        Ok(s)
    }

    /// A state from primitive density and velocity.
    pub fn from_primitive(
        eos: EosSpec,
        grid: Arc<RadialGrid>,
        geometry: Geometry,
        gravity: bool,
        rho: Vec<f64>,
        u: &[f64],
        rho_floor: f64,
    ) -> Result<Self> {
        let mom = rho.iter().zip(u).map(|(r, v)| r * v).collect();
        Self::new(eos, grid, geometry, gravity, rho, mom, rho_floor)
    }

    pub fn eos(&self) -> &EosSpec {
        &self.eos
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn gravity(&self) -> bool {
        self.gravity
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn momentum(&self) -> &[f64] {
        &self.mom
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn rho_floor(&self) -> f64 {
        self.rho_floor
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    fn wet(&self, rho: f64) -> bool {
        rho > 2.0 * self.rho_floor
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.rho
            .iter()
            .zip(&self.mom)
            .map(|(&r, &m)| if self.wet(r) { m / r } else { 0.0 })
            .collect()
    }

    fn area(&self, r: f64) -> f64 {
        match self.geometry {
            Geometry::Spherical => r * r,
            Geometry::Slab => 1.0,
        }
    }

    /// Cell volumes in the measure of the conservation law (`∫r² dr` per
    /// steradian, or `Δx`).
    fn volumes(&self) -> Vec<f64> {
        self.grid
            .edges()
            .windows(2)
            .map(|w| match self.geometry {
                Geometry::Spherical => (w[1].powi(3) - w[0].powi(3)) / 3.0,
                Geometry::Slab => w[1] - w[0],
            })
            .collect()
    }

    /// Physical measure factor: `4π` for spherical shells.
    fn measure(&self) -> f64 {
        match self.geometry {
            Geometry::Spherical => 4.0 * PI,
            Geometry::Slab => 1.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        let k = self.measure();
        self.volumes().iter().zip(&self.rho).map(|(v, r)| k * v * r).sum()
    }

    pub fn density(&self) -> Result<GridDensity> {
        GridDensity::new(self.grid.clone(), self.rho.clone())
    }

    pub fn flow(&self) -> Result<FlowField> {
        FlowField::new(self.grid.clone(), self.velocity())
    }

    /// `H(ρ, u)`, evaluated exactly for the piecewise-constant state.
    pub fn energy(&self) -> Result<f64> {
        let rho = self.density()?;
        let u = self.flow()?;
        if self.geometry == Geometry::Spherical {
            if self.gravity {
                crate::energetics::total_energy(&self.eos, &rho, &u)
            } else {
                Ok(crate::energetics::internal_energy(&self.eos, &rho)? + crate::energetics::kinetic_energy(&rho, &u)?)
            }
        } else {
            let vol = self.volumes();
            let mut e = 0.0;
            for ((r, m), v) in self.rho.iter().zip(&self.mom).zip(&vol) {
                let u = if self.wet(*r) { m / r } else { 0.0 };
                e += v * (self.eos.phi(*r)? + 0.5 * r * u * u);
            }
            Ok(e)
        }
    }

    fn apply_floor(&mut self) -> f64 {
        let vol = self.volumes();
        let k = self.measure();
        let mut added = 0.0;
        for i in 0..self.rho.len() {
            if self.rho[i] < self.rho_floor {
                added += k * vol[i] * (self.rho_floor - self.rho[i]);
                self.rho[i] = self.rho_floor;
            }
            if !self.wet(self.rho[i]) {
                self.mom[i] = 0.0;
            }
        }
        added
    }

    /// Potential at cell edges and centres (zero without gravity).
    fn potential(&self, rho: &[f64]) -> (Vec<f64>, Vec<f64>) {
        if self.gravity {
            let g = gravity::cell_gravity(self.grid.edges(), rho);
            (g.v_edges, g.v_centers)
        } else {
            (vec![0.0; rho.len() + 1], vec![0.0; rho.len()])
        }
    }

    fn reconstruct(&self, rho: &[f64], mom: &[f64], wet: &[bool], v_centers: &[f64]) -> Result<Faces> {
        let n = rho.len();
        let edges = self.grid.edges();
        let centers = self.grid.nodes();
        let mut q = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 0..n {
            if wet[i] {
                q[i] = self.eos.phi_prime(rho[i])? + v_centers[i];
                u[i] = mom[i] / rho[i];
            }
        }
        let mut f = Faces {
            q_l: vec![0.0; n],
            q_r: vec![0.0; n],
            u_l: vec![0.0; n],
            u_r: vec![0.0; n],
            slope_q: vec![0.0; n],
        };
        for i in 0..n {
            if !wet[i] {
                continue;
            }
            // neighbours: mirror at the inner boundary, copy at the outer one
            let left = if i == 0 {
                Some((q[0], -u[0], 2.0 * (centers[0] - edges[0])))
            } else if wet[i - 1] {
                Some((q[i - 1], u[i - 1], centers[i] - centers[i - 1]))
            } else {
                None
            };
            let right = if i == n - 1 {
                Some((q[i], u[i], 2.0 * (edges[n] - centers[i])))
            } else if wet[i + 1] {
                Some((q[i + 1], u[i + 1], centers[i + 1] - centers[i]))
            } else {
                None
            };
            let (sq, su) = match (left, right) {
                (Some((ql, ul, hl)), Some((qr, ur, hr))) => (
                    minmod((q[i] - ql) / hl, (qr - q[i]) / hr),
                    minmod((u[i] - ul) / hl, (ur - u[i]) / hr),
                ),
                _ => (0.0, 0.0),
            };
            let (dl, dr) = (edges[i] - centers[i], edges[i + 1] - centers[i]);
            f.slope_q[i] = sq;
            f.q_l[i] = q[i] + sq * dl;
            f.q_r[i] = q[i] + sq * dr;
            f.u_l[i] = u[i] + su * dl;
            f.u_r[i] = u[i] + su * dr;
        }
        Ok(f)
    }

    /// Face densities seen from the left and right of every edge.
    ///
    /// Both sides use one shared face potential, so the two values agree on
    /// a hydrostatic state. The potential is the exact edge value unless a
    /// side would exceed `FACE_CAP` times its cell average, in which case it
    /// is raised just enough to respect the cap on both sides.
    fn face_densities(
        &self,
        rho: &[f64],
        wet: &[bool],
        faces: &Faces,
        v_edges: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = rho.len();
        let mut left = vec![0.0; n + 1];
        let mut right = vec![0.0; n + 1];
        for k in 0..=n {
            let l = (k > 0 && wet[k - 1]).then(|| k - 1);
            let r = (k < n && wet[k]).then_some(k);
            let mut v_star = v_edges[k];
            if let Some(i) = l {
                v_star = v_star.max(faces.q_r[i] - self.eos.phi_prime(FACE_CAP * rho[i])?);
            }
            if let Some(i) = r {
                v_star = v_star.max(faces.q_l[i] - self.eos.phi_prime(FACE_CAP * rho[i])?);
            }
            if let Some(i) = l {
                left[k] = self.eos.phi_prime_inv(faces.q_r[i] - v_star)?;
            }
            if let Some(i) = r {
                right[k] = self.eos.phi_prime_inv(faces.q_l[i] - v_star)?;
            }
        }
        Ok((left, right))
    }

    fn physical_flux(&self, rho: f64, u: f64) -> Result<(f64, f64)> {
        Ok((rho * u, rho * u * u + self.eos.pressure(rho)?))
    }

    fn rusanov(&self, (rl, ul): (f64, f64), (rr, ur): (f64, f64)) -> Result<(f64, f64)> {
        let (fl0, fl1) = self.physical_flux(rl, ul)?;
        let (fr0, fr1) = self.physical_flux(rr, ur)?;
        let a = (ul.abs() + self.eos.sound_speed(rl)?).max(ur.abs() + self.eos.sound_speed(rr)?);
        Ok((
            0.5 * (fl0 + fr0) - 0.5 * a * (rr - rl),
            0.5 * (fl1 + fr1) - 0.5 * a * (rr * ur - rl * ul),
        ))
    }

    /// Time derivatives of `(ρ, ρu)` and the mass outflow rate at `R_max`.
    fn rates(&self, rho: &[f64], mom: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let n = rho.len();
        let edges = self.grid.edges();
        let wet: Vec<bool> = rho.iter().map(|&r| self.wet(r)).collect();
        let (v_edges, v_centers) = self.potential(rho);
        let faces = self.reconstruct(rho, mom, &wet, &v_centers)?;
        let (rho_left, rho_right) = self.face_densities(rho, &wet, &faces, &v_edges)?;
        let mut flux = vec![(0.0, 0.0); n + 1];
        for (k, fk) in flux.iter_mut().enumerate() {
            if k == 0 && self.geometry == Geometry::Spherical {
                // zero area at the centre
                continue;
            }
            let left = if k == 0 {
                wet[0].then(|| (rho_right[0], -faces.u_l[0]))
            } else {
                wet[k - 1].then(|| (rho_left[k], faces.u_r[k - 1]))
            };
            let right = if k == n {
                // outflow without inflow
                wet[n - 1].then(|| (rho_left[n], faces.u_r[n - 1].max(0.0)))
            } else {
                wet[k].then(|| (rho_right[k], faces.u_l[k]))
            };
            *fk = match (left, right) {
                (Some(l), Some(r)) => self.rusanov(l, r)?,
                (Some((rl, ul)), None) => {
                    let up = ul.max(0.0);
                    (rl * up, rl * ul * up + self.eos.pressure(rl)?)
                }
                (None, Some((rr, ur))) => {
                    let um = ur.min(0.0);
                    (rr * um, rr * ur * um + self.eos.pressure(rr)?)
                }
                (None, None) => (0.0, 0.0),
            };
        }
        let vol = self.volumes();
        let mut drho = vec![0.0; n];
        let mut dmom = vec![0.0; n];
        for i in 0..n {
            let (a_l, a_r) = (self.area(edges[i]), self.area(edges[i + 1]));
            let source = if !wet[i] {
                0.0
            } else if self.gravity {
                a_r * self.eos.pressure(rho_left[i + 1])? - a_l * self.eos.pressure(rho_right[i])?
                    - faces.slope_q[i] * rho[i] * vol[i]
            } else if self.geometry == Geometry::Spherical {
                self.eos.pressure(rho[i])? * (a_r - a_l)
            } else {
                0.0
            };
            drho[i] = -(a_r * flux[i + 1].0 - a_l * flux[i].0) / vol[i];
            dmom[i] = (-(a_r * flux[i + 1].1 - a_l * flux[i].1) + source) / vol[i];
        }
        let outflow = self.measure() * self.area(edges[n]) * flux[n].0;
        Ok((drho, dmom, outflow))
    }

    /// Largest stable step `cfl · min Δr/(|u| + c_s)`.
    pub fn cfl_dt(&self, cfl: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Usage("cfl_dt of an empty state".into()));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Usage(format!("CFL factor must lie in (0, 1], got {cfl}")));
        }
        let edges = self.grid.edges();
        let mut dt = f64::INFINITY;
        for (i, (&r, &m)) in self.rho.iter().zip(&self.mom).enumerate() {
            let u = if self.wet(r) { m / r } else { 0.0 };
            let speed = u.abs() + self.eos.sound_speed(r)?;
            if speed > 0.0 {
                dt = dt.min((edges[i + 1] - edges[i]) / speed);
            }
        }
        if !dt.is_finite() {
            return Err(Error::Numeric("no signal speed anywhere: cannot choose a time step".into()));
        }
        Ok(cfl * dt)
    }

    /// One Heun step of size `dt`; returns the new state with the mass that
    /// left through `R_max` and the mass added by the floor.
    pub fn step(&self, dt: f64) -> Result<StepResult> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Usage(format!("time step must be positive, got {dt}")));
        }
        let (r0, m0, out0) = self.rates(&self.rho, &self.mom)?;
        let rho1: Vec<f64> = self.rho.iter().zip(&r0).map(|(a, b)| a + dt * b).collect();
        let mom1: Vec<f64> = self.mom.iter().zip(&m0).map(|(a, b)| a + dt * b).collect();
        let (r1, m1, out1) = self.rates(&rho1, &mom1)?;
        let mut next = self.clone();
        for i in 0..self.rho.len() {
            next.rho[i] = 0.5 * (self.rho[i] + rho1[i] + dt * r1[i]);
            next.mom[i] = 0.5 * (self.mom[i] + mom1[i] + dt * m1[i]);
        }
        if let Some(i) = next.rho.iter().zip(&next.mom).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite state in cell {i} (r = {:.6e}) at t = {:.6e}",
                self.grid.nodes()[i],
                self.t + dt
            )));
        }
        let floor_added = next.apply_floor();
        next.t = self.t + dt;
        Ok(StepResult { state: next, outflow: 0.5 * dt * (out0 + out1), floor_added })
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: HydroState,
    pub outflow: f64,
    pub floor_added: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eos() -> EosSpec {
        EosSpec::polytrope(1.0, 2.0).unwrap()
    }

    #[test]
    fn uniform_gas_is_steady_without_gravity() {
        let grid = Arc::new(RadialGrid::uniform_cells(64, 1.0).unwrap());
        let s = HydroState::new(eos(), grid, Geometry::Spherical, false, vec![0.7; 64], vec![0.0; 64], 1e-15).unwrap();
        let dt = s.cfl_dt(0.4).unwrap();
        let next = s.step(dt).unwrap().state;
        for (a, b) in next.rho().iter().zip(s.rho()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(next.momentum().iter().all(|m| m.abs() < 1e-14));
    }

    #[test]
    fn cfl_scales_with_spacing_and_speed() {
        let make = |n: usize, u: f64| {
            let grid = Arc::new(RadialGrid::uniform_cells(n, 1.0).unwrap());
            HydroState::from_primitive(eos(), grid, Geometry::Slab, false, vec![0.5; n], &vec![u; n], 1e-15).unwrap()
        };
        let c = (2.0f64 * 0.5).sqrt();
        assert!((make(10, 0.0).cfl_dt(0.5).unwrap() - 0.5 * 0.1 / c).abs() < 1e-15);
        assert!((make(20, 0.0).cfl_dt(0.5).unwrap() - 0.5 * 0.05 / c).abs() < 1e-15);
        assert!((make(10, 1.0).cfl_dt(0.5).unwrap() - 0.5 * 0.1 / (1.0 + c)).abs() < 1e-15);
        assert!(make(10, 0.0).cfl_dt(1.5).is_err());
    }

    #[test]
    fn slab_gravity_is_unsupported() {
        let grid = Arc::new(RadialGrid::uniform_cells(8, 1.0).unwrap());
        let r = HydroState::new(eos(), grid, Geometry::Slab, true, vec![1.0; 8], vec![0.0; 8], 1e-15);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn mass_is_conserved_in_a_closed_slab() {
        let grid = Arc::new(RadialGrid::uniform_cells(100, 1.0).unwrap());
        let rho: Vec<f64> = grid.nodes().iter().map(|&x| if x < 0.5 { 1.0 } else { 0.125 }).collect();
        let mut s = HydroState::new(eos(), grid, Geometry::Slab, false, rho, vec![0.0; 100], 1e-15).unwrap();
        let m0 = s.total_mass();
        let mut out = 0.0;
        while s.time() < 0.1 {
            let r = s.step(s.cfl_dt(0.4).unwrap()).unwrap();
            out += r.outflow;
            s = r.state;
        }
        assert!(((s.total_mass() + out - m0) / m0).abs() < 1e-14);
    }
}
