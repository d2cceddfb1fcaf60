//! Energy functionals of a fluid state and the stability quantities measured
//! against a steady star.
//!
//! * reduced energy `H_r(ρ) = ∫Φ(ρ) + E_pot(ρ)`;
//! * total energy `H(ρ, u) = H_r(ρ) + ½∫|u|²ρ`;
//! * distance `d(ρ, ρ₀) = ∫[Φ(ρ) - Φ(ρ₀) + (V₀ - E₀)(ρ - ρ₀)]`;
//! * the stability metric `d + (1/8π)‖∇V_ρ - ∇V₀‖² + ½∫|u|²ρ`.
//!
//! The reference star is always sampled onto the grid of the state being
//! measured, so `ρ₀` and `V₀` satisfy the Euler–Lagrange relation exactly at
//! every quadrature point.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::gravity;
use crate::grid::{FlowField, GridDensity, RadialGrid};
use crate::steady::RadialProfile;

/// Relative mass mismatch tolerated by the distance functional.
pub const MASS_TOLERANCE: f64 = 1e-8;

/// `∫Φ(ρ) dx`.
pub fn internal_energy(eos: &EosSpec, rho: &GridDensity) -> Result<f64> {
    let phi = rho.values().iter().map(|&r| eos.phi(r)).collect::<Result<Vec<_>>>()?;
    let v = rho.grid().volume_integral(&phi);
    if !v.is_finite() {
        return Err(Error::Membership(format!("internal energy integral is not finite ({v})")));
    }
    Ok(v)
}

/// `H_r(ρ) = ∫Φ(ρ) + E_pot(ρ)` with the field form of the potential energy.
pub fn reduced_energy(eos: &EosSpec, rho: &GridDensity) -> Result<f64> {
    let total = internal_energy(eos, rho)? + gravity::potential_energy(rho);
    if !total.is_finite() {
        return Err(Error::Membership(format!("reduced energy is not finite ({total})")));
    }
    Ok(total)
}

fn check_same_grid(rho: &GridDensity, u: &FlowField) -> Result<()> {
    if !rho.grid().same_as(u.grid()) {
        return Err(Error::Usage("density and velocity live on different grids".into()));
    }
    Ok(())
}

/// `½∫|u|²ρ dx`.
pub fn kinetic_energy(rho: &GridDensity, u: &FlowField) -> Result<f64> {
    check_same_grid(rho, u)?;
    let f: Vec<f64> = rho.values().iter().zip(u.values()).map(|(r, v)| 0.5 * r * v * v).collect();
    Ok(rho.grid().volume_integral(&f))
}

/// `H(ρ, u) = H_r(ρ) + ½∫|u|²ρ`.
pub fn total_energy(eos: &EosSpec, rho: &GridDensity, u: &FlowField) -> Result<f64> {
    Ok(reduced_energy(eos, rho)? + kinetic_energy(rho, u)?)
}

/// The steady star sampled at the points of another grid.
#[derive(Debug, Clone)]
pub struct SampledReference {
    pub rho0: GridDensity,
    /// `E₀ - V₀` at the grid points.
    pub z: Vec<f64>,
}

/// Samples `ρ₀` and `E₀ - V₀` at the points of `grid` (nodes, or cell centres).
pub fn reference_on(profile: &RadialProfile, grid: &Arc<RadialGrid>) -> Result<SampledReference> {
    if grid.same_as(profile.grid()) {
        return Ok(SampledReference { rho0: profile.density(), z: profile.z().to_vec() });
    }
    let mut rho = Vec::with_capacity(grid.len());
    let mut z = Vec::with_capacity(grid.len());
    for &r in grid.nodes() {
        let p = profile.eval(r)?;
        rho.push(p.rho);
        z.push(p.z);
    }
    Ok(SampledReference { rho0: GridDensity::new(grid.clone(), rho)?, z })
}

/// Samples the reference on the trial's grid and checks that both carry the
/// same quadrature mass.
fn matched_reference(rho: &GridDensity, profile: &RadialProfile) -> Result<SampledReference> {
    let reference = reference_on(profile, rho.grid())?;
    let (m, m0) = (rho.mass(), reference.rho0.mass());
    if ((m - m0) / m0).abs() > MASS_TOLERANCE {
        return Err(Error::Precondition(format!(
            "distance needs equal masses: trial mass {m:.12e}, steady-state mass {m0:.12e}"
        )));
    }
    Ok(reference)
}

/// Pointwise integrand of `d` against a sampled reference.
fn distance_integrand(eos: &EosSpec, rho: &GridDensity, reference: &SampledReference) -> Result<Vec<f64>> {
    rho.values()
        .iter()
        .zip(reference.rho0.values().iter().zip(&reference.z))
        .map(|(&r, (&r0, &z))| Ok(eos.phi(r)? - eos.phi(r0)? - z * (r - r0)))
        .collect()
}

/// `d(ρ, ρ₀) = ∫[Φ(ρ) - Φ(ρ₀) + (V₀ - E₀)(ρ - ρ₀)]`.
pub fn distance_d(rho: &GridDensity, profile: &RadialProfile) -> Result<f64> {
    let reference = matched_reference(rho, profile)?;
    let f = distance_integrand(profile.eos(), rho, &reference)?;
    Ok(rho.grid().volume_integral(&f))
}

/// The three nonnegative parts of the stability metric.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityMetric {
    pub d_part: f64,
    /// `(1/8π)‖∇V_ρ - ∇V₀‖₂²`.
    pub field_part: f64,
    /// `½∫|u|²ρ`.
    pub kinetic_part: f64,
    pub total: f64,
}

pub fn stability_metric(rho: &GridDensity, u: &FlowField, profile: &RadialProfile) -> Result<StabilityMetric> {
    let reference = matched_reference(rho, profile)?;
    metric_against(profile.eos(), rho, u, &reference)
}

/// Metric against a reference already sampled on the state's grid.
pub fn metric_against(
    eos: &EosSpec,
    rho: &GridDensity,
    u: &FlowField,
    reference: &SampledReference,
) -> Result<StabilityMetric> {
    let f = distance_integrand(eos, rho, reference)?;
    let d_part = rho.grid().volume_integral(&f);
    let field_part = gravity::field_norm_sq(rho, &reference.rho0, false)? / (8.0 * PI);
    let kinetic_part = kinetic_energy(rho, u)?;
    Ok(StabilityMetric { d_part, field_part, kinetic_part, total: d_part + field_part + kinetic_part })
}

/// Both sides of `H(ρ,u) - H(ρ₀,0) = d - (1/8π)‖∇V_ρ - ∇V₀‖² + ½∫|u|²ρ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpansionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `residual / (1 + |lhs|)`.
    pub relative: f64,
}

pub fn expansion_identity_check(rho: &GridDensity, u: &FlowField, profile: &RadialProfile) -> Result<ExpansionCheck> {
    let reference = matched_reference(rho, profile)?;
    let eos = profile.eos();
    let lhs = total_energy(eos, rho, u)? - reduced_energy(eos, &reference.rho0)?;
    let m = metric_against(eos, rho, u, &reference)?;
    let rhs = m.d_part - m.field_part + m.kinetic_part;
    let residual = (lhs - rhs).abs();
    Ok(ExpansionCheck { lhs, rhs, residual, relative: residual / (1.0 + lhs.abs()) })
}

/// Outcome of testing `d(ρ, ρ₀) ≥ C ‖ρ - ρ₀‖₂²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadraticBound {
    pub d: f64,
    /// `∫(ρ - ρ₀)²` over points where both densities lie in the density window.
    pub l2_sq: f64,
    pub c_bound: f64,
    pub holds: bool,
}

/// Checks `d ≥ c_bound ∫(ρ-ρ₀)² - 1e-10`, the squared norm being restricted to
/// points where both densities lie in `window` (on which `Φ'' ≥ 2 c_bound` is
/// the caller's responsibility).
pub fn quadratic_lower_bound_check(
    rho: &GridDensity,
    profile: &RadialProfile,
    c_bound: f64,
    window: Option<(f64, f64)>,
) -> Result<QuadraticBound> {
    let reference = matched_reference(rho, profile)?;
    let f = distance_integrand(profile.eos(), rho, &reference)?;
    let d = rho.grid().volume_integral(&f);
    let (lo, hi) = window.unwrap_or((0.0, f64::INFINITY));
    let sq: Vec<f64> = rho
        .values()
        .iter()
        .zip(reference.rho0.values())
        .map(|(&a, &b)| {
            if a >= lo && a <= hi && b >= lo && b <= hi {
                (a - b).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let l2_sq = rho.grid().volume_integral(&sq);
    Ok(QuadraticBound { d, l2_sq, c_bound, holds: d >= c_bound * l2_sq - 1e-10 })
}

/// Reproducible random trial states around a steady star.
///
/// Interior trials are `ρ₀(1 + A b(r))` with `b` a sum of three Gaussian bumps
/// of random centre, width and sign, clipped at zero; extended trials add a
/// compactly supported bump just outside the star. Every trial is rescaled to
/// the quadrature mass of `ρ₀` on the same grid.
#[derive(Debug, Clone)]
pub struct TrialGenerator {
    rng: ChaCha8Rng,
}

impl TrialGenerator {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn bumps(&mut self, radius: f64) -> Vec<(f64, f64, f64)> {
        (0..3)
            .map(|_| {
                let c = self.rng.gen_range(0.0..radius);
                let w = self.rng.gen_range(0.05..0.3) * radius;
                let a = self.rng.gen_range(-1.0..1.0);
                (c, w, a)
            })
            .collect()
    }

    /// A perturbation supported inside the star, of relative size up to `amplitude`.
    pub fn interior(&mut self, reference: &GridDensity, radius: f64, amplitude: f64) -> Result<GridDensity> {
        let a = amplitude * self.rng.gen_range(0.1..1.0);
        let bumps = self.bumps(radius);
        let values: Vec<f64> = reference
            .grid()
            .nodes()
            .iter()
            .zip(reference.values())
            .map(|(&r, &r0)| {
                let b: f64 = bumps.iter().map(|(c, w, s)| s * (-(r - c).powi(2) / (2.0 * w * w)).exp()).sum();
                (r0 * (1.0 + a * b)).max(0.0)
            })
            .collect();
        GridDensity::new(reference.grid().clone(), values)?.renormalized(reference.mass())
    }

    /// An interior perturbation plus mass placed outside the support of the star.
    pub fn extended(&mut self, reference: &GridDensity, radius: f64, amplitude: f64) -> Result<GridDensity> {
        let inner = self.interior(reference, radius, amplitude)?;
        let r_max = reference.grid().r_max();
        let outer = (r_max - radius).min(0.45 * radius);
        let c = radius + self.rng.gen_range(0.3..0.7) * outer;
        let w = 0.3 * outer;
        let height = amplitude * self.rng.gen_range(0.1..1.0) * reference.values()[0];
        let values: Vec<f64> = inner
            .grid()
            .nodes()
            .iter()
            .zip(inner.values())
            .map(|(&r, &v)| v + height * (1.0 - ((r - c) / w).powi(2)).max(0.0).powi(3))
            .collect();
        GridDensity::new(reference.grid().clone(), values)?.renormalized(reference.mass())
    }

    /// A smooth radial velocity field vanishing at the centre.
    pub fn velocity(&mut self, grid: &Arc<RadialGrid>, radius: f64, amplitude: f64) -> Result<FlowField> {
        let a = amplitude * self.rng.gen_range(-1.0..1.0);
        let k = self.rng.gen_range(0.5..2.0);
        let values = grid.nodes().iter().map(|&r| a * (PI * k * r / radius).sin()).collect();
        FlowField::new(grid.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady::shoot;

    fn ball() -> GridDensity {
        let g = Arc::new(RadialGrid::uniform_cells(40, 2.0).unwrap());
        GridDensity::uniform_ball(g, 1.0, 1.0).unwrap()
    }

    #[test]
    fn ball_energies() {
        let eos = EosSpec::polytrope(1.0, 2.0).unwrap();
        let b = ball();
        let hr = reduced_energy(&eos, &b).unwrap();
        assert!((hr - (3.0 / (4.0 * PI) - 0.6)).abs() < 1e-13);
        let u = FlowField::uniform(b.grid().clone(), 1.0);
        assert!((total_energy(&eos, &b, &u).unwrap() - hr - 0.5).abs() < 1e-13);
        let u2 = u.scaled(2.0);
        assert!((kinetic_energy(&b, &u2).unwrap() - 2.0).abs() < 1e-13);
        let zero = GridDensity::zero(b.grid().clone());
        assert_eq!(reduced_energy(&eos, &zero).unwrap(), 0.0);
    }

    #[test]
    fn steady_star_has_negative_energy_and_zero_distance() {
        let p = shoot(&EosSpec::polytrope(1.0, 2.0).unwrap(), 1.0).unwrap();
        let rho = p.density();
        assert!(reduced_energy(p.eos(), &rho).unwrap() < 0.0);
        assert!(distance_d(&rho, &p).unwrap().abs() < 1e-14);
        let u = FlowField::zero(rho.grid().clone());
        let m = stability_metric(&rho, &u, &p).unwrap();
        assert!(m.total.abs() < 1e-14);
        let eps = 1e-2;
        let m = stability_metric(&rho, &FlowField::uniform(rho.grid().clone(), eps), &p).unwrap();
        assert!((m.total - 0.5 * eps * eps * rho.mass()).abs() < 1e-14);
    }

    #[test]
    fn mass_mismatch_is_a_precondition_error() {
        let p = shoot(&EosSpec::polytrope(1.0, 2.0).unwrap(), 1.0).unwrap();
        let rho = p.density().scaled(1.01).unwrap();
        let err = distance_d(&rho, &p).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn bregman_equality_for_quadratic_phi() {
        let p = shoot(&EosSpec::polytrope(1.0, 2.0).unwrap(), 1.0).unwrap();
        let mut gen = TrialGenerator::new(7);
        let rho0 = p.density();
        for _ in 0..5 {
            let rho = gen.interior(&rho0, p.r_support(), 0.3).unwrap();
            let q = quadratic_lower_bound_check(&rho, &p, 1.0, None).unwrap();
            assert!(q.holds);
            assert!((q.d - q.l2_sq).abs() <= 1e-10 * q.l2_sq, "{q:?}");
            let ext = gen.extended(&rho0, p.r_support(), 0.3).unwrap();
            let q = quadratic_lower_bound_check(&ext, &p, 1.0, None).unwrap();
            assert!(q.holds && q.d > q.l2_sq);
        }
    }

    #[test]
    fn expansion_identity_holds_for_trials() {
        let p = shoot(&EosSpec::polytrope(1.0, 2.0).unwrap(), 1.0).unwrap();
        let mut gen = TrialGenerator::new(11);
        let rho0 = p.density();
        for _ in 0..5 {
            let rho = gen.extended(&rho0, p.r_support(), 0.5).unwrap();
            let u = gen.velocity(rho.grid(), p.r_support(), 0.3).unwrap();
            let c = expansion_identity_check(&rho, &u, &p).unwrap();
            assert!(c.relative < 1e-8, "{c:?}");
        }
    }
}
