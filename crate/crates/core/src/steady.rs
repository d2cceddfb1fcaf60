//! Static stars as solutions of the semilinear Poisson problem
//!
//! ```text
//! z'' + (2/r) z' = -4π g(z₊),   z(0) = κ,  z'(0) = 0,
//! ```
//!
//! for `z = E₀ - V₀` and `g = (Φ')⁻¹`. The first zero of `z` is the stellar
//! radius `R`; outside, the potential is the vacuum law `-M/r` with
//! `M = -R² z'(R)` and `E₀ = -M/R`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::eos::{EosKind, EosSpec};
use crate::error::{Error, Result};
use crate::grid::{GridDensity, RadialGrid};
use crate::quad;

/// Intervals across the support used when no grid size is requested.
pub const DEFAULT_INTERVALS: usize = 2048;

/// Radius cap for the search of the first zero, in units of the initial guess.
const RADIUS_CAP_FACTOR: f64 = 1e4;

/// Tolerance on the located zero crossing.
const CROSSING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    /// Uniform intervals on `[0, R]`.
    pub intervals: usize,
    /// Outer radius of the profile grid in units of `R`.
    pub exterior_factor: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { intervals: DEFAULT_INTERVALS, exterior_factor: 1.5 }
    }
}

impl ShootOptions {
    pub fn with_intervals(intervals: usize) -> Self {
        Self { intervals, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.intervals < 4 {
            return Err(Error::Usage(format!("need at least 4 intervals across the star, got {}", self.intervals)));
        }
        if !(self.exterior_factor > 1.0 && self.exterior_factor.is_finite()) {
            return Err(Error::Usage(format!("exterior factor must exceed 1, got {}", self.exterior_factor)));
        }
        Ok(())
    }
}

/// Solution of the semilinear Poisson problem on a uniform grid over `[0, R]`.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub nodes: Vec<f64>,
    pub z: Vec<f64>,
    pub dz: Vec<f64>,
    pub radius: f64,
    pub mass: f64,
    pub kappa: f64,
}

type Source<'a> = dyn Fn(f64) -> Result<f64> + 'a;

fn rhs(src: &Source, r: f64, z: f64, dz: f64) -> Result<(f64, f64)> {
    let g = if z > 0.0 { src(z)? } else { 0.0 };
    Ok((dz, -2.0 * dz / r - 4.0 * PI * g))
}

fn rk4(src: &Source, r: f64, z: f64, dz: f64, h: f64) -> Result<(f64, f64)> {
    let (k1z, k1d) = rhs(src, r, z, dz)?;
    let (k2z, k2d) = rhs(src, r + 0.5 * h, z + 0.5 * h * k1z, dz + 0.5 * h * k1d)?;
    let (k3z, k3d) = rhs(src, r + 0.5 * h, z + 0.5 * h * k2z, dz + 0.5 * h * k2d)?;
    let (k4z, k4d) = rhs(src, r + h, z + h * k3z, dz + h * k3d)?;
    Ok((
        z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
        dz + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
    ))
}

/// Regular expansion `z = κ + a₂r² + a₄r⁴` about the centre.
struct Series {
    kappa: f64,
    a2: f64,
    a4: f64,
}

impl Series {
    fn new(src: &Source, kappa: f64) -> Result<Self> {
        let g = src(kappa)?;
        let dk = 1e-6 * kappa;
        let slope = (src(kappa + dk)? - src(kappa - dk)?) / (2.0 * dk);
        let a2 = -2.0 * PI / 3.0 * g;
        Ok(Self { kappa, a2, a4: -PI / 5.0 * slope * a2 })
    }

    fn eval(&self, r: f64) -> (f64, f64) {
        let r2 = r * r;
        (self.kappa + self.a2 * r2 + self.a4 * r2 * r2, 2.0 * self.a2 * r + 4.0 * self.a4 * r2 * r)
    }
}

/// First pass: march outward with a step proportional to `max(r_guess, r)` and
/// locate the zero of `z` by bisection on single RK4 steps. Returns the radius
/// and the mass `-R² z'(R)` of this coarse integration.
fn locate_radius(src: &Source, kappa: f64) -> Result<(f64, f64)> {
    let g0 = src(kappa)?;
    if !(g0 > 0.0 && g0.is_finite()) {
        return Err(Error::Numeric(format!("source vanishes at the central value {kappa}")));
    }
    let r_guess = (3.0 * kappa / (2.0 * PI * g0)).sqrt();
    let cap = RADIUS_CAP_FACTOR * r_guess;
    let series = Series::new(src, kappa)?;
    let h_base = r_guess / 200.0;
    let mut r = 1e-6 * r_guess;
    let (mut z, mut dz) = series.eval(r);
    while r < cap {
        let h = h_base.max(5e-3 * r);
        let (zn, dzn) = rk4(src, r, z, dz, h)?;
        if !zn.is_finite() || !dzn.is_finite() {
            return Err(Error::Numeric(format!("non-finite solution at r = {r:e}")));
        }
        if zn <= 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > CROSSING_TOL * (r + h).max(1.0) {
                let mid = 0.5 * (lo + hi);
                if rk4(src, r, z, dz, mid)?.0 > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let delta = 0.5 * (lo + hi);
            let radius = r + delta;
            let (_, dz_r) = rk4(src, r, z, dz, delta)?;
            return Ok((radius, -radius * radius * dz_r));
        }
        r += h;
        z = zn;
        dz = dzn;
    }
    Err(Error::InfiniteRadius { r_reached: r, r_cap: cap })
}

/// Second pass: RK4 on the uniform grid `r_i = iR/N`.
fn integrate_uniform(src: &Source, series: &Series, radius: f64, intervals: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = radius / intervals as f64;
    let mut z = Vec::with_capacity(intervals + 1);
    let mut dz = Vec::with_capacity(intervals + 1);
    z.push(series.kappa);
    dz.push(0.0);
    let r_s = 1e-3 * h;
    let (zs, dzs) = series.eval(r_s);
    let (z1, dz1) = rk4(src, r_s, zs, dzs, h - r_s)?;
    z.push(z1);
    dz.push(dz1);
    for i in 1..intervals {
        let (zn, dzn) = rk4(src, i as f64 * h, z[i], dz[i], h)?;
        if !zn.is_finite() || !dzn.is_finite() {
            return Err(Error::Numeric(format!("non-finite solution at r = {:e}", i as f64 * h)));
        }
        z.push(zn);
        dz.push(dzn);
    }
    Ok((z, dz))
}

/// Solves `z'' + (2/r)z' = -4π g(z₊)` with `z(0) = κ` on a uniform grid whose
/// last node is the first zero of `z`.
pub fn solve_semilinear(src: &Source, kappa: f64, intervals: usize) -> Result<PoissonSolution> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("central value kappa must be positive, got {kappa}")));
    }
    if intervals < 4 {
        return Err(Error::Usage("need at least 4 intervals".into()));
    }
    let (mut radius, _) = locate_radius(src, kappa)?;
    let series = Series::new(src, kappa)?;
    let (mut z, mut dz) = integrate_uniform(src, &series, radius, intervals)?;
    // Newton on R so that the discrete solution vanishes exactly at the last node
    for _ in 0..12 {
        let (zn, dzn) = (z[intervals], dz[intervals]);
        if !(dzn < 0.0) {
            return Err(Error::Numeric(format!("z'(R) = {dzn} is not negative at the surface")));
        }
        let step = zn / dzn;
        radius -= step;
        let next = integrate_uniform(src, &series, radius, intervals)?;
        z = next.0;
        dz = next.1;
        if step.abs() <= 1e-14 * radius {
            break;
        }
    }
    z[intervals] = 0.0;
    let h = radius / intervals as f64;
    let mut nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
    nodes[intervals] = radius;
    let mass = -radius * radius * dz[intervals];
    Ok(PoissonSolution { nodes, z, dz, radius, mass, kappa })
}

/// A steady star: density, potential and enclosed mass on a two-zone grid,
/// together with its cutoff energy and support radius.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    eos: EosSpec,
    grid: Arc<RadialGrid>,
    z: Vec<f64>,
    dz: Vec<f64>,
    rho0: Vec<f64>,
    v0: Vec<f64>,
    m: Vec<f64>,
    support_index: usize,
    e0: f64,
    r_support: f64,
    mass: f64,
    kappa: f64,
}

/// Pointwise data from the profile evaluator.
#[derive(Debug, Clone, Copy)]
pub struct ProfilePoint {
    pub z: f64,
    pub dz: f64,
    pub rho: f64,
    pub v: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileHeader {
    pub eos: String,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "R_support")]
    pub r_support: f64,
    #[serde(rename = "M")]
    pub mass: f64,
    pub kappa: f64,
    pub intervals: usize,
    pub r_max: f64,
    pub central_density: f64,
}

impl RadialProfile {
    fn from_solution(eos: &EosSpec, sol: PoissonSolution, opts: &ShootOptions) -> Result<Self> {
        let n = sol.nodes.len() - 1;
        let (radius, mass) = (sol.radius, sol.mass);
        let grid = Arc::new(RadialGrid::two_zone(radius, n, opts.exterior_factor * radius)?);
        let e0 = -mass / radius;
        let mut z = sol.z;
        let mut dz = sol.dz;
        for &r in &grid.nodes()[n + 1..] {
            z.push(e0 + mass / r);
            dz.push(-mass / (r * r));
        }
        let rho0 = z.iter().map(|&x| eos.phi_prime_inv(x)).collect::<Result<Vec<_>>>()?;
        let v0 = z.iter().map(|&x| e0 - x).collect();
        let m = grid
            .nodes()
            .iter()
            .zip(&dz)
            .enumerate()
            .map(|(i, (&r, &d))| if i > n { mass } else { (-r * r * d).max(0.0) })
            .collect();
        Ok(Self {
            eos: eos.clone(),
            grid,
            z,
            dz,
            rho0,
            v0,
            m,
            support_index: n,
            e0,
            r_support: radius,
            mass,
            kappa: sol.kappa,
        })
    }

    pub fn eos(&self) -> &EosSpec {
        &self.eos
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    /// `z = E₀ - V₀` at the nodes.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn dz(&self) -> &[f64] {
        &self.dz
    }

    pub fn enclosed_mass(&self) -> &[f64] {
        &self.m
    }

    /// Index of the node at `r = R`.
    pub fn support_index(&self) -> usize {
        self.support_index
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn r_support(&self) -> f64 {
        self.r_support
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn intervals(&self) -> usize {
        self.support_index
    }

    pub fn central_density(&self) -> f64 {
        self.rho0[0]
    }

    pub fn density(&self) -> GridDensity {
        GridDensity::new(self.grid.clone(), self.rho0.clone()).expect("profile densities are valid")
    }

    pub fn header(&self) -> ProfileHeader {
        ProfileHeader {
            eos: self.eos.describe(),
            e0: self.e0,
            r_support: self.r_support,
            mass: self.mass,
            kappa: self.kappa,
            intervals: self.support_index,
            r_max: self.grid.r_max(),
            central_density: self.central_density(),
        }
    }

    /// `z`, `ρ₀`, `V₀` and `m` at any radius: Hermite interpolation of the ODE
    /// solution inside the star, the vacuum law outside.
    pub fn eval(&self, r: f64) -> Result<ProfilePoint> {
        if r >= self.r_support {
            let r = r.max(self.r_support);
            let v = -self.mass / r;
            return Ok(ProfilePoint { z: self.e0 - v, dz: -self.mass / (r * r), rho: 0.0, v, m: self.mass });
        }
        let r = r.max(0.0);
        let nodes = self.grid.nodes();
        let j = (nodes.partition_point(|&x| x <= r) - 1).min(self.support_index - 1);
        let (z, dz) =
            quad::hermite(nodes[j], nodes[j + 1], self.z[j], self.z[j + 1], self.dz[j], self.dz[j + 1], r);
        let rho = self.eos.phi_prime_inv(z)?;
        Ok(ProfilePoint { z, dz, rho, v: self.e0 - z, m: -r * r * dz })
    }

    /// Member `λ z(μ r)` of the polytropic scaling family, `μ = λ^{(n-1)/2}`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        scaling_family(self, lambda)
    }

    /// Time for sound to cross the star, `∫₀^R dr / c_s(ρ₀(r))`.
    pub fn sound_crossing_time(&self) -> Result<f64> {
        let failure = std::cell::RefCell::new(None);
        let t = quad::adaptive(
            |r| {
                let c = self.eval(r).and_then(|p| self.eos.sound_speed(p.rho));
                match c {
                    Ok(c) if c > 0.0 => 1.0 / c,
                    Ok(_) => 0.0,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            self.r_support,
            1e-10,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        t
    }
}

fn eos_source(eos: &EosSpec) -> impl Fn(f64) -> Result<f64> + '_ {
    move |z| eos.phi_prime_inv(z)
}

/// Shoots the steady star with central value `κ` on the default grid.
pub fn shoot(eos: &EosSpec, kappa: f64) -> Result<RadialProfile> {
    shoot_with(eos, kappa, &ShootOptions::default())
}

pub fn shoot_with(eos: &EosSpec, kappa: f64, opts: &ShootOptions) -> Result<RadialProfile> {
    opts.validate()?;
    let src = eos_source(eos);
    let sol = solve_semilinear(&src, kappa, opts.intervals)?;
    RadialProfile::from_solution(eos, sol, opts)
}

/// Mass of the star with central value `κ`, from the coarse first pass only.
fn quick_mass(eos: &EosSpec, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain(format!("central value kappa must be positive, got {kappa}")));
    }
    let src = eos_source(eos);
    Ok(locate_radius(&src, kappa)?.1)
}

/// One row of a mass scan over central values.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassSample {
    pub kappa: f64,
    pub mass: Option<f64>,
}

/// `M(κ)` over the given central values from a coarse integration (relative
/// accuracy about 1e-8); failures are recorded as `None`.
pub fn mass_scan(eos: &EosSpec, kappas: &[f64]) -> Vec<MassSample> {
    kappas.iter().map(|&kappa| MassSample { kappa, mass: quick_mass(eos, kappa).ok() }).collect()
}

/// Outcome of matching a prescribed mass.
#[derive(Debug, Clone)]
pub struct MassMatch {
    pub profile: RadialProfile,
    /// Every `[κ_lo, κ_hi]` of the scan whose masses straddle the target.
    pub brackets: Vec<(f64, f64)>,
    pub scan: Vec<MassSample>,
}

/// Steady star with total mass `m_target`.
pub fn match_mass(eos: &EosSpec, m_target: f64) -> Result<RadialProfile> {
    Ok(match_mass_with(eos, m_target, &ShootOptions::default())?.profile)
}

pub fn match_mass_with(eos: &EosSpec, m_target: f64, opts: &ShootOptions) -> Result<MassMatch> {
    if !(m_target > 0.0 && m_target.is_finite()) {
        return Err(Error::Domain(format!("target mass must be positive, got {m_target}")));
    }
    opts.validate()?;
    if let EosKind::Polytrope { gamma, .. } = eos.kind() {
        let n = 1.0 / (gamma - 1.0);
        if (n - 3.0).abs() > 1e-12 {
            let base = shoot_with(eos, 1.0, opts)?;
            let lambda = (m_target / base.mass()).powf(2.0 / (3.0 - n));
            let profile = scaling_family(&base, lambda)?;
            return Ok(MassMatch { profile, brackets: vec![(lambda, lambda)], scan: Vec::new() });
        }
    }
    let kappas: Vec<f64> = (-24..=24).map(|j| 2f64.powi(j)).collect();
    let scan = mass_scan(eos, &kappas);
    let mut brackets = Vec::new();
    for w in scan.windows(2) {
        if let (Some(a), Some(b)) = (w[0].mass, w[1].mass) {
            if (a - m_target) * (b - m_target) <= 0.0 {
                brackets.push((w[0].kappa, w[1].kappa));
            }
        }
    }
    let Some(&(lo, hi)) = brackets.first() else {
        let table = scan
            .iter()
            .map(|s| match s.mass {
                Some(m) => format!("  kappa = {:<12.6e} M = {m:.6e}", s.kappa),
                None => format!("  kappa = {:<12.6e} M = (failed)", s.kappa),
            })
            .collect::<Vec<_>>()
            .join("\n");
        return Err(Error::MassUnreachable { target: m_target, table });
    };
    let failure = std::cell::RefCell::new(None);
    let log_kappa = quad::brent(
        lo.ln(),
        hi.ln(),
        |t| match quick_mass(eos, t.exp()) {
            Ok(m) => m / m_target - 1.0,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        1e-10,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut kappa = log_kappa.exp();
    let mut profile = shoot_with(eos, kappa, opts)?;
    // polish on the final grid with secant steps in log κ
    let mut prev = (kappa.ln(), profile.mass().ln() - m_target.ln());
    for _ in 0..8 {
        if ((profile.mass() - m_target) / m_target).abs() <= 1e-10 {
            break;
        }
        let dk = 1e-4;
        let trial = shoot_with(eos, (prev.0 + dk).exp(), opts)?;
        let slope = (trial.mass().ln() - m_target.ln() - prev.1) / dk;
        let next = prev.0 - prev.1 / slope;
        kappa = next.exp();
        profile = shoot_with(eos, kappa, opts)?;
        prev = (next, profile.mass().ln() - m_target.ln());
    }
    if ((profile.mass() - m_target) / m_target).abs() > 1e-8 {
        return Err(Error::Numeric(format!(
            "mass matching stalled at kappa = {kappa:e}: M = {:e}, target {m_target:e}",
            profile.mass()
        )));
    }
    Ok(MassMatch { profile, brackets, scan })
}

/// `z_λ(r) = λ z(μ r)` with `μ = λ^{(n-1)/2}`: the rescaled polytropic star,
/// obtained without re-integration.
pub fn scaling_family(profile: &RadialProfile, lambda: f64) -> Result<RadialProfile> {
    let EosKind::Polytrope { gamma, .. } = profile.eos.kind() else {
        return Err(Error::Unsupported("the scaling family exists for polytropes only".into()));
    };
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("scale lambda must be positive, got {lambda}")));
    }
    let n = 1.0 / (gamma - 1.0);
    let mu = lambda.powf((n - 1.0) / 2.0);
    let nodes: Vec<f64> = profile.grid.nodes().iter().map(|r| r / mu).collect();
    let grid = Arc::new(RadialGrid::from_nodes(nodes, &[profile.support_index])?);
    let z: Vec<f64> = profile.z.iter().map(|v| lambda * v).collect();
    let dz: Vec<f64> = profile.dz.iter().map(|v| lambda * mu * v).collect();
    let rho0 = z.iter().map(|&x| profile.eos.phi_prime_inv(x)).collect::<Result<Vec<_>>>()?;
    let e0 = lambda * profile.e0;
    let v0 = z.iter().map(|x| e0 - x).collect();
    let mass_factor = lambda / mu;
    let m = profile.m.iter().map(|v| v * mass_factor).collect();
    Ok(RadialProfile {
        eos: profile.eos.clone(),
        grid,
        z,
        dz,
        rho0,
        v0,
        m,
        support_index: profile.support_index,
        e0,
        r_support: profile.r_support / mu,
        mass: profile.mass * mass_factor,
        kappa: profile.kappa * lambda,
    })
}

/// Euler–Lagrange diagnostics: `max |Φ'(ρ₀) + V₀ - E₀|` where `ρ₀ > 0`, and the
/// cutoff slack `V₀ - E₀` where `ρ₀ = 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EulerLagrangeResidual {
    pub support: f64,
    /// `max (E₀ - V₀)₊` over vacuum nodes.
    pub exterior: f64,
    /// `min (V₀ - E₀)` over vacuum nodes (`+∞` if there are none).
    pub min_slack: f64,
}

impl EulerLagrangeResidual {
    pub fn max(&self) -> f64 {
        self.support.max(self.exterior)
    }
}

pub fn euler_lagrange_residual_of(eos: &EosSpec, rho: &[f64], v: &[f64], e0: f64) -> Result<EulerLagrangeResidual> {
    let mut out = EulerLagrangeResidual { support: 0.0, exterior: 0.0, min_slack: f64::INFINITY };
    for (&r, &vi) in rho.iter().zip(v) {
        if r > 0.0 {
            out.support = out.support.max((eos.phi_prime(r)? + vi - e0).abs());
        } else {
            out.exterior = out.exterior.max(e0 - vi);
            out.min_slack = out.min_slack.min(vi - e0);
        }
    }
    Ok(out)
}

pub fn euler_lagrange_residual(profile: &RadialProfile) -> Result<EulerLagrangeResidual> {
    euler_lagrange_residual_of(&profile.eos, &profile.rho0, &profile.v0, profile.e0)
}

/// `|p' + ρ V'|` at every node from central differences of `p` (zero at the
/// centre, the surface and in vacuum).
pub fn hydrostatic_residuals(nodes: &[f64], p: &[f64], rho: &[f64], dv: &[f64], support_index: usize) -> Vec<f64> {
    let mut out = vec![0.0; nodes.len()];
    for i in 1..support_index.min(nodes.len() - 1) {
        if rho[i] == 0.0 && p[i] == 0.0 {
            continue;
        }
        let (h0, h1) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
        // three-point derivative, second order on nonuniform spacing
        let dp = (h0 * h0 * p[i + 1] - h1 * h1 * p[i - 1] + (h1 * h1 - h0 * h0) * p[i]) / (h0 * h1 * (h0 + h1));
        out[i] = (dp + rho[i] * dv[i]).abs();
    }
    out
}

/// Max over interior support nodes of `|p₀' + ρ₀ V₀'|`.
pub fn static_euler_residual(profile: &RadialProfile) -> Result<f64> {
    let p = profile.rho0.iter().map(|&r| profile.eos.pressure(r)).collect::<Result<Vec<_>>>()?;
    let dv: Vec<f64> = profile.dz.iter().map(|d| -d).collect();
    let res = hydrostatic_residuals(profile.grid.nodes(), &p, &profile.rho0, &dv, profile.support_index);
    Ok(res.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n1() -> EosSpec {
        EosSpec::polytrope(1.0, 2.0).unwrap()
    }

    #[test]
    fn lane_emden_n1_matches_sinc() {
        let p = shoot(&n1(), 1.0).unwrap();
        let w = (2.0 * PI).sqrt();
        let half_pi = (PI / 2.0).sqrt();
        assert!((p.r_support() - half_pi).abs() < 1e-9);
        assert!((p.mass() - half_pi).abs() < 1e-9);
        assert!((p.e0() + 1.0).abs() < 1e-9);
        for (&r, &z) in p.grid().nodes().iter().zip(p.z()).take(p.support_index() + 1) {
            let exact = if r == 0.0 { 1.0 } else { (w * r).sin() / (w * r) };
            assert!((z - exact).abs() < 1e-9, "r={r}");
        }
    }

    #[test]
    fn n1_radius_is_kappa_independent() {
        let p = shoot(&n1(), 2.0).unwrap();
        assert!((p.r_support() - (PI / 2.0).sqrt()).abs() < 1e-9);
        assert!((p.mass() - 2.0 * (PI / 2.0).sqrt()).abs() < 1e-8);
        assert!((p.e0() + 2.0).abs() < 1e-9);
    }

    #[test]
    fn n5_is_not_compact() {
        let e = EosSpec::polytrope(1.0, 1.2).unwrap();
        let err = shoot_with(&e, 1.0, &ShootOptions::with_intervals(64)).unwrap_err();
        assert!(matches!(err, Error::InfiniteRadius { .. }));
        assert!(err.to_string().contains("infinite-radius"));
    }

    #[test]
    fn nonpositive_kappa_rejected() {
        assert!(matches!(shoot(&n1(), 0.0), Err(Error::Domain(_))));
        assert!(matches!(match_mass(&n1(), 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn match_mass_inverts_n1_formula() {
        let m = 2.0 * (PI / 2.0).sqrt();
        let p = match_mass(&n1(), m).unwrap();
        assert!((p.kappa() - 2.0).abs() < 1e-8);
        assert!(((p.mass() - m) / m).abs() < 1e-12);
    }

    #[test]
    fn scaling_family_matches_reshoot() {
        let e = EosSpec::polytrope(1.0, 5.0 / 3.0).unwrap();
        let base = shoot(&e, 1.0).unwrap();
        let scaled = scaling_family(&base, 2.0).unwrap();
        let direct = shoot(&e, 2.0).unwrap();
        assert!((scaled.r_support() - direct.r_support()).abs() < 1e-8 * direct.r_support());
        assert!((scaled.mass() - direct.mass()).abs() < 1e-8 * direct.mass());
        assert!((scaled.e0() - direct.e0()).abs() < 1e-8 * direct.e0().abs());
        for i in 0..=direct.support_index() {
            assert!((scaled.z()[i] - direct.z()[i]).abs() < 1e-8);
        }
        let same = scaling_family(&base, 1.0).unwrap();
        assert_eq!(same.z(), base.z());
    }

    #[test]
    fn scaling_requires_polytrope() {
        let e = EosSpec::blended(1.0, 1.0, 2.0).unwrap();
        let p = shoot_with(&e, 1.0, &ShootOptions::with_intervals(64)).unwrap();
        assert!(matches!(scaling_family(&p, 2.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn euler_lagrange_and_static_residuals() {
        let p = shoot(&n1(), 1.0).unwrap();
        let el = euler_lagrange_residual(&p).unwrap();
        assert!(el.max() < 1e-12 && el.min_slack >= 0.0, "{el:?}");
        let shifted: Vec<f64> = p
            .v0()
            .iter()
            .zip(p.rho0())
            .map(|(v, r)| if *r > 0.0 { v + 1e-3 } else { *v })
            .collect();
        let el = euler_lagrange_residual_of(p.eos(), p.rho0(), &shifted, p.e0()).unwrap();
        assert!((el.support - 1e-3).abs() < 1e-9);
        assert!(static_euler_residual(&p).unwrap() < 1e-5);
    }

    #[test]
    fn exterior_potential_is_keplerian() {
        let p = shoot(&n1(), 1.0).unwrap();
        for (i, (&r, &v)) in p.grid().nodes().iter().zip(p.v0()).enumerate() {
            if i >= p.support_index() {
                assert!((r * v + p.mass()).abs() < 1e-10);
                assert_eq!(p.rho0()[i], 0.0);
            }
        }
        assert!((p.central_density() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn generalized_law_matches_its_polytrope() {
        let e = EosSpec::generalized("2 tau", Arc::new(|t: f64| 2.0 * t), 1.0, 1.0).unwrap();
        let opts = ShootOptions::with_intervals(128);
        let p = shoot_with(&e, 1.0, &opts).unwrap();
        assert!((p.r_support() - (PI / 2.0).sqrt()).abs() < 1e-8);
        let target = 1.7;
        let mm = match_mass_with(&e, target, &opts).unwrap();
        assert!(((mm.profile.mass() - target) / target).abs() < 1e-8);
        assert!(!mm.brackets.is_empty());
    }
}
