//! Discrete hydrostatic equilibria and the perturbations applied to them.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Geometry, HydroState, FLOOR_FRACTION};
use crate::energetics::{self, SampledReference, StabilityMetric};
use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::gravity;
use crate::grid::{FlowField, RadialGrid};
use crate::quad;
use crate::steady::RadialProfile;

/// The steady star as a fixed point of the finite-volume scheme.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub state: HydroState,
    /// `ρ_eq` and `E - V` at the cell centres, for the stability metric.
    pub reference: SampledReference,
    /// Discrete analogue of `E₀`.
    pub level: f64,
    /// Stability metric of the discrete equilibrium against the continuous
    /// profile: the discretisation gap.
    pub profile_gap: StabilityMetric,
}

/// Solves `Φ'(ρ) + bρ = y` for `ρ ≥ 0` (left side increasing in ρ).
fn solve_cell(eos: &EosSpec, b: f64, y: f64) -> Result<f64> {
    if y <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, eos.phi_prime_inv(y)?);
    let mut rho = hi;
    for _ in 0..200 {
        let f = eos.phi_prime(rho)? + b * rho - y;
        if f == 0.0 {
            return Ok(rho);
        }
        if f > 0.0 {
            hi = rho;
        } else {
            lo = rho;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let slope = if rho > 0.0 { eos.phi_second(rho)? + b } else { f64::INFINITY };
        let newton = rho - f / slope;
        rho = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Ok(0.5 * (lo + hi))
}

/// Marches outward from the centre with `Φ'(ρ_i) + Ṽ_i = level`, where `Ṽ`
/// is the exact potential of the piecewise-constant density normalised to
/// `Ṽ(0) = 0`. Returns the densities, the total mass and `Ṽ(R_max)`.
fn march(eos: &EosSpec, edges: &[f64], level: f64) -> Result<(Vec<f64>, f64, f64)> {
    let n = edges.len() - 1;
    let mut rho = vec![0.0; n];
    let (mut m, mut v) = (0.0, 0.0);
    let k = 4.0 * PI / 3.0;
    for i in 0..n {
        let (a, b) = (edges[i], edges[i + 1]);
        let c = 0.5 * (a + b);
        // r₋³(1/r₋ - 1/r) written to stay finite at r₋ = 0
        let tail = |r: f64| a * a - a.powi(3) / r;
        let inv = |r: f64| if a > 0.0 { 1.0 / a - 1.0 / r } else { 0.0 };
        let a_i = v + m * inv(c);
        let b_i = k * ((c * c - a * a) / 2.0 - tail(c));
        rho[i] = solve_cell(eos, b_i, level - a_i)?;
        v += m * inv(b) + k * rho[i] * ((b * b - a * a) / 2.0 - tail(b));
        m += k * rho[i] * (b.powi(3) - a.powi(3));
    }
    Ok((rho, m, v))
}

/// Builds the discrete equilibrium of `profile` on `cells` uniform cells over
/// `[0, r_max_factor · R]`, with the same mass as the profile.
pub fn discrete_equilibrium(profile: &RadialProfile, cells: usize, r_max_factor: f64) -> Result<Equilibrium> {
    if cells < 4 {
        return Err(Error::Usage(format!("need at least 4 cells, got {cells}")));
    }
    if !(r_max_factor > 1.0) {
        return Err(Error::Usage(format!("outer radius factor must exceed 1, got {r_max_factor}")));
    }
    let eos = profile.eos().clone();
    let grid = Arc::new(RadialGrid::uniform_cells(cells, r_max_factor * profile.r_support())?);
    let edges = grid.edges().to_vec();
    let target = profile.mass();
    let mut hi = profile.kappa();
    let mut iters = 0;
    while march(&eos, &edges, hi)?.1 < target {
        hi *= 2.0;
        iters += 1;
        if iters > 60 {
            return Err(Error::Numeric("could not bracket the equilibrium level".into()));
        }
    }
    let mut failure = None;
    let level = quad::brent(
        0.0,
        hi,
        |c| match march(&eos, &edges, c) {
            Ok((_, m, _)) => m - target,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        1e-15 * hi,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let (rho, _, _) = march(&eos, &edges, level)?;
    let floor = FLOOR_FRACTION * profile.central_density();
    let state = HydroState::new(eos.clone(), grid.clone(), Geometry::Spherical, true, rho, vec![0.0; cells], floor)?;

    let g = gravity::cell_gravity(&edges, state.rho());
    let wet: Vec<usize> = (0..cells).filter(|&i| state.wet(state.rho()[i])).collect();
    let mut q = Vec::with_capacity(wet.len());
    for &i in &wet {
        q.push(eos.phi_prime(state.rho()[i])? + g.v_centers[i]);
    }
    let e_level = q.iter().sum::<f64>() / q.len().max(1) as f64;
    let mut z: Vec<f64> = g.v_centers.iter().map(|v| e_level - v).collect();
    for &i in &wet {
        z[i] = eos.phi_prime(state.rho()[i])?;
    }
    let reference = SampledReference { rho0: state.density()?, z };
    let continuous = energetics::reference_on(profile, &grid)?;
    let profile_gap = energetics::metric_against(&eos, &reference.rho0, &FlowField::zero(grid), &continuous)?;
    Ok(Equilibrium { state, reference, level: e_level, profile_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Smooth, mass-preserving density bump inside the star.
    DensityBump,
    /// Radial velocity `u = A·r/R` inside the star.
    VelocityKick,
    /// Homologous rescaling `ρ(r) → λ³ρ(λr)` with `λ = 1 + A`.
    Contraction,
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density_bump" => Ok(Self::DensityBump),
            "velocity_kick" => Ok(Self::VelocityKick),
            "contraction" => Ok(Self::Contraction),
            other => Err(Error::Config(format!(
                "unknown perturbation '{other}' (expected density_bump, velocity_kick or contraction)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub state: HydroState,
    pub equilibrium: Equilibrium,
    pub initial_metric: StabilityMetric,
}

/// Rescales the wet cells so the total mass equals `target`.
fn renormalize(state: &mut HydroState, target: f64) -> Result<()> {
    let vol = state.volumes();
    let k = state.measure();
    let (mut wet_mass, mut dry_mass) = (0.0, 0.0);
    for (r, v) in state.rho.iter().zip(&vol) {
        if state.wet(*r) {
            wet_mass += k * v * r;
        } else {
            dry_mass += k * v * r;
        }
    }
    if !(wet_mass > 0.0) {
        return Err(Error::Domain("perturbed state has no mass left inside the star".into()));
    }
    let factor = (target - dry_mass) / wet_mass;
    for r in state.rho.iter_mut() {
        if *r > 2.0 * state.rho_floor {
            *r *= factor;
        }
    }
    Ok(())
}

/// Perturbs the discrete equilibrium of `profile` (uniform cells over
/// `[0, 2R]`) and reports the initial stability metric.
pub fn perturb(profile: &RadialProfile, kind: PerturbationKind, amplitude: f64, cells: usize) -> Result<Perturbation> {
    let equilibrium = discrete_equilibrium(profile, cells, 2.0)?;
    perturb_equilibrium(&equilibrium, profile.r_support(), kind, amplitude)
}

pub fn perturb_equilibrium(
    equilibrium: &Equilibrium,
    radius: f64,
    kind: PerturbationKind,
    amplitude: f64,
) -> Result<Perturbation> {
    if !amplitude.is_finite() {
        return Err(Error::Usage("perturbation amplitude must be finite".into()));
    }
    let base = &equilibrium.state;
    let mut state = base.clone();
    let centers = base.grid().nodes().to_vec();
    let target = base.total_mass();
    match kind {
        PerturbationKind::DensityBump => {
            let vol = base.volumes();
            let shape: Vec<f64> = centers.iter().map(|&r| (-((r - 0.5 * radius) / (0.15 * radius)).powi(2)).exp()).collect();
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..base.len() {
                if base.wet(base.rho[i]) {
                    num += base.rho[i] * shape[i] * vol[i];
                    den += base.rho[i] * vol[i];
                }
            }
            let mean = num / den;
            for i in 0..base.len() {
                if base.wet(base.rho[i]) {
                    let factor = 1.0 + amplitude * (shape[i] - mean);
                    if factor < 0.0 {
                        return Err(Error::Domain(format!(
                            "amplitude {amplitude} makes the density negative at r = {:.4e}",
                            centers[i]
                        )));
                    }
                    state.rho[i] *= factor;
                }
            }
            renormalize(&mut state, target)?;
        }
        PerturbationKind::VelocityKick => {
            for i in 0..base.len() {
                if base.wet(base.rho[i]) {
                    state.mom[i] = base.rho[i] * amplitude * centers[i] / radius;
                }
            }
        }
        PerturbationKind::Contraction => {
            let lambda = 1.0 + amplitude;
            if !(lambda > 0.0) {
                return Err(Error::Domain(format!("contraction factor {lambda} must be positive")));
            }
            let edges = base.grid().edges();
            let n = base.len();
            let cube = |r: f64| r.powi(3);
            for i in 0..n {
                let (lo, hi) = (lambda * edges[i], lambda * edges[i + 1]);
                let mut acc = 0.0;
                for j in 0..n {
                    let (a, b) = (edges[j].max(lo), edges[j + 1].min(hi));
                    if b > a {
                        acc += base.rho[j] * (cube(b) - cube(a));
                    }
                }
                state.rho[i] = acc / (cube(edges[i + 1]) - cube(edges[i]));
            }
            state.apply_floor();
            renormalize(&mut state, target)?;
        }
    }
    state.apply_floor();
    let initial_metric = energetics::metric_against(
        base.eos(),
        &state.density()?,
        &state.flow()?,
        &equilibrium.reference,
    )?;
    Ok(Perturbation { state, equilibrium: equilibrium.clone(), initial_metric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady;

    fn star() -> RadialProfile {
        steady::shoot(&EosSpec::polytrope(1.0, 2.0).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn equilibrium_matches_profile_mass_and_is_close() {
        let p = star();
        let eq = discrete_equilibrium(&p, 256, 2.0).unwrap();
        assert!(((eq.state.total_mass() - p.mass()) / p.mass()).abs() < 1e-12);
        assert!(eq.profile_gap.total >= 0.0);
        assert!(eq.profile_gap.total < 1e-4 * p.mass(), "gap {:?} rho0 {}", eq.profile_gap, eq.state.rho()[0]);
        assert!((eq.state.rho()[0] / p.central_density() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_one_step() {
        let p = star();
        let eq = discrete_equilibrium(&p, 256, 2.0).unwrap();
        let dt = eq.state.cfl_dt(0.4).unwrap();
        let next = eq.state.step(dt).unwrap().state;
        let umax = next.velocity().iter().fold(0.0f64, |a, u| a.max(u.abs()));
        assert!(umax <= 1e-10, "max |u| = {umax:e}");
    }

    #[test]
    fn zero_amplitude_gives_zero_metric() {
        let p = star();
        for kind in [PerturbationKind::DensityBump, PerturbationKind::VelocityKick, PerturbationKind::Contraction] {
            let pt = perturb(&p, kind, 0.0, 128).unwrap();
            assert!(pt.initial_metric.total.abs() < 1e-14, "{kind:?}: {:e}", pt.initial_metric.total);
        }
    }

    #[test]
    fn density_bump_metric_is_quadratic() {
        let p = star();
        let eq = discrete_equilibrium(&p, 128, 2.0).unwrap();
        let a = perturb_equilibrium(&eq, p.r_support(), PerturbationKind::DensityBump, 1e-3).unwrap();
        let b = perturb_equilibrium(&eq, p.r_support(), PerturbationKind::DensityBump, 2e-3).unwrap();
        let ratio = b.initial_metric.total / a.initial_metric.total;
        assert!((ratio - 4.0).abs() < 0.02, "ratio {ratio}");
        assert!(((a.state.total_mass() - p.mass()) / p.mass()).abs() < 1e-13);
    }

    #[test]
    fn contraction_preserves_mass() {
        let p = star();
        let pt = perturb(&p, PerturbationKind::Contraction, 1e-2, 128).unwrap();
        assert!(((pt.state.total_mass() - p.mass()) / p.mass()).abs() < 1e-13);
        assert!(pt.initial_metric.total > 0.0);
    }

    #[test]
    fn oversized_bump_is_rejected() {
        let p = star();
        let r = perturb(&p, PerturbationKind::DensityBump, 50.0, 64);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
