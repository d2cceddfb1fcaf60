//! The kinetic side of the fluid functional: isotropic Vlasov steady states,
//! the energy-Casimir functional and its reduction to `H_r`.
//!
//! With particle energy `E = ½|v|² + V₀(x)` an isotropic state
//! `f₀ = φ(E)` has density and pressure
//!
//! ```text
//! g_φ(V) = 2^{5/2}π ∫_V^∞ φ(E)(E - V)^{1/2} dE
//! h_φ(V) = (2^{7/2}/3)π ∫_V^∞ φ(E)(E - V)^{3/2} dE
//! ```
//!
//! so `Δ V₀ = 4π g_φ(V₀)` is the steady Euler–Poisson problem with
//! `p = h_φ ∘ g_φ⁻¹(ρ)`. For the polytropic family `φ = A(E₀ - E)₊^k` the
//! Casimir is `Q(f) = (k/(k+1))A^{-1/k} f^{1+1/k}`, and `Φ` and `Q` are linked
//! by `Φ*(λ) = ∫Q*(λ - ½|v|²) dv`, giving a polytrope of index `n = k + 3/2`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::beta::beta;

use crate::energetics::{self, TrialGenerator};
use crate::eos::{EosKind, EosSpec};
use crate::error::{Error, Result};
use crate::gravity;
use crate::grid::{GridDensity, RadialGrid};
use crate::quad;
use crate::steady::{self, RadialProfile, ShootOptions};

/// Upper end (exclusive) of the admissible polytropic exponents.
pub const K_MAX: f64 = 1.5;

fn check_k(k: f64, allow_zero: bool) -> Result<()> {
    if !k.is_finite() || k < 0.0 || (k == 0.0 && !allow_zero) {
        return Err(Error::Domain(format!("exponent k must be positive, got {k}")));
    }
    if k >= K_MAX {
        return Err(Error::Admissibility(format!(
            "k = {k} lies outside (0, 3/2); exponents k ≥ 3/2 belong to the mass-Casimir \
             formulation, which this reduction does not cover"
        )));
    }
    Ok(())
}

/// Polytropic Casimir `Q(f) = (k/(k+1)) A^{-1/k} f^{1+1/k}`, chosen so that
/// `(Q')⁻¹(μ) = A μ₊^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Casimir {
    pub k: f64,
    pub a: f64,
}

impl Casimir {
    pub fn new(k: f64, a: f64) -> Result<Self> {
        check_k(k, false)?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("Casimir coefficient must be positive, got {a}")));
        }
        Ok(Self { k, a })
    }

    /// `Q(f) = f²`.
    pub fn quadratic() -> Self {
        Self { k: 1.0, a: 0.5 }
    }

    pub fn q(&self, f: f64) -> f64 {
        if f <= 0.0 {
            return 0.0;
        }
        self.k / (self.k + 1.0) * self.a.powf(-1.0 / self.k) * f.powf(1.0 + 1.0 / self.k)
    }

    /// `(Q')⁻¹(μ)`, zero for `μ ≤ 0`.
    pub fn q_prime_inv(&self, mu: f64) -> f64 {
        if mu <= 0.0 { 0.0 } else { self.a * mu.powf(self.k) }
    }

    /// `Q*(μ) = A μ₊^{k+1}/(k+1)`.
    pub fn q_star(&self, mu: f64) -> f64 {
        if mu <= 0.0 { 0.0 } else { self.a * mu.powf(self.k + 1.0) / (self.k + 1.0) }
    }

    /// Closed form of `Φ*(λ) = 4π ∫ Q*(λ - s²/2) s² ds`.
    pub fn phi_star_exact(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        4.0 * PI * 2f64.powf(1.5) * self.a / (self.k + 1.0)
            * 0.5
            * beta(1.5, self.k + 2.0)
            * lambda.powf(self.k + 2.5)
    }
}

type PhiFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum AnsatzKind {
    /// `φ(E) = A (E₀ - E)₊^k`.
    Polytropic { a: f64, k: f64 },
    /// Any non-increasing `φ ≥ 0` vanishing for `E ≥ E₀`.
    General { name: String, phi: PhiFn },
}

impl std::fmt::Debug for AnsatzKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Polytropic { a, k } => write!(f, "Polytropic {{ a: {a}, k: {k} }}"),
            Self::General { name, .. } => write!(f, "General({name})"),
        }
    }
}

/// Isotropic distribution `f₀(x, v) = φ(E(x, v))` with cutoff energy `E₀`.
#[derive(Debug, Clone)]
pub struct KineticAnsatz {
    kind: AnsatzKind,
    e0: f64,
}

impl KineticAnsatz {
    /// `A (E₀ - E)₊^k` with `0 ≤ k < 3/2`; `k = 0` is the step function.
    pub fn polytropic(a: f64, k: f64, e0: f64) -> Result<Self> {
        check_k(k, true)?;
        if !(a > 0.0 && a.is_finite()) || !e0.is_finite() {
            return Err(Error::Domain("ansatz coefficient must be positive and the cutoff finite".into()));
        }
        Ok(Self { kind: AnsatzKind::Polytropic { a, k }, e0 })
    }

    pub fn general(name: impl Into<String>, phi: PhiFn, e0: f64) -> Result<Self> {
        if !e0.is_finite() {
            return Err(Error::Domain("cutoff energy must be finite".into()));
        }
        Ok(Self { kind: AnsatzKind::General { name: name.into(), phi }, e0 })
    }

    /// The polytropic ansatz whose density `g_φ(V₀)` reproduces a polytropic
    /// profile with index in `(3/2, 3)`.
    pub fn matching(profile: &RadialProfile) -> Result<Self> {
        let EosKind::Polytrope { c, gamma } = *profile.eos().kind() else {
            return Err(Error::Unsupported("only polytropic profiles can be lifted in closed form".into()));
        };
        let n = 1.0 / (gamma - 1.0);
        let k = n - 1.5;
        if k <= 0.0 {
            return Err(Error::Admissibility(format!(
                "index n = {n} needs k = n - 3/2 = {k}, outside (0, 3/2)"
            )));
        }
        check_k(k, false)?;
        // ρ = (z/K)^n must equal C_g z^n
        let big_k = c * gamma / (gamma - 1.0);
        let a = big_k.powf(-n) / (2f64.powf(2.5) * PI * beta(k + 1.0, 1.5));
        Self::polytropic(a, k, profile.e0())
    }

    pub fn with_cutoff(&self, e0: f64) -> Self {
        Self { kind: self.kind.clone(), e0 }
    }

    pub fn kind(&self) -> &AnsatzKind {
        &self.kind
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn phi(&self, e: f64) -> f64 {
        match &self.kind {
            AnsatzKind::Polytropic { a, k } => {
                let x = self.e0 - e;
                if x <= 0.0 {
                    0.0
                } else if *k == 0.0 {
                    *a
                } else {
                    a * x.powf(*k)
                }
            }
            AnsatzKind::General { phi, .. } => {
                if e >= self.e0 { 0.0 } else { phi(e) }
            }
        }
    }

    /// The Casimir whose minimiser is this ansatz.
    pub fn casimir(&self) -> Result<Casimir> {
        match self.kind {
            AnsatzKind::Polytropic { a, k } => Casimir::new(k, a),
            AnsatzKind::General { .. } => Err(Error::Unsupported("Casimir of a general ansatz".into())),
        }
    }

    /// Polytropic index `n = k + 3/2`.
    pub fn index(&self) -> Option<f64> {
        match self.kind {
            AnsatzKind::Polytropic { k, .. } => Some(k + 1.5),
            AnsatzKind::General { .. } => None,
        }
    }

    /// `(C_g, C_h)` with `g_φ = C_g z^n`, `h_φ = C_h z^{n+1}`, `z = E₀ - V`.
    fn constants(&self) -> Option<(f64, f64)> {
        match self.kind {
            AnsatzKind::Polytropic { a, k } => Some((
                2f64.powf(2.5) * PI * beta(k + 1.0, 1.5) * a,
                2f64.powf(3.5) / 3.0 * PI * beta(k + 1.0, 2.5) * a,
            )),
            AnsatzKind::General { .. } => None,
        }
    }

    /// Density of the isotropic state at potential `V`.
    pub fn g_phi(&self, v: f64) -> Result<f64> {
        match self.constants() {
            Some((cg, _)) => {
                let z = self.e0 - v;
                Ok(if z <= 0.0 { 0.0 } else { cg * z.powf(self.index().unwrap_or(0.0)) })
            }
            None => self.g_phi_quadrature(v),
        }
    }

    /// Pressure of the isotropic state at potential `V`.
    pub fn h_phi(&self, v: f64) -> Result<f64> {
        match self.constants() {
            Some((_, ch)) => {
                let z = self.e0 - v;
                Ok(if z <= 0.0 { 0.0 } else { ch * z.powf(self.index().unwrap_or(0.0) + 1.0) })
            }
            None => self.h_phi_quadrature(v),
        }
    }

    fn energy_integral(&self, v: f64, power: f64) -> Result<f64> {
        let z = self.e0 - v;
        if z <= 0.0 {
            return Ok(0.0);
        }
        // E = V + z t
        let scale = z.powf(power + 1.0);
        let f = |t: f64| self.phi(v + z * t) * t.powf(power);
        Ok(scale * quad::adaptive(f, 0.0, 1.0, 1e-13)?)
    }

    pub fn g_phi_quadrature(&self, v: f64) -> Result<f64> {
        Ok(2f64.powf(2.5) * PI * self.energy_integral(v, 0.5)?)
    }

    pub fn h_phi_quadrature(&self, v: f64) -> Result<f64> {
        Ok(2f64.powf(3.5) / 3.0 * PI * self.energy_integral(v, 1.5)?)
    }

    /// The barotropic law `p = h_φ ∘ g_φ⁻¹(ρ)`, a polytrope of index `k + 3/2`.
    pub fn induced_eos(&self) -> Result<EosSpec> {
        let (cg, ch) = self
            .constants()
            .ok_or_else(|| Error::Unsupported("induced equation of state of a general ansatz".into()))?;
        let n = self.index().unwrap_or(0.0);
        let gamma = 1.0 + 1.0 / n;
        EosSpec::polytrope(ch * cg.powf(-gamma), gamma)
    }
}

/// A sampled convex function and its Legendre transform.
#[derive(Debug, Clone, Serialize)]
pub struct ConjugatePair {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub lambda: Vec<f64>,
    pub h_star: Vec<f64>,
    /// Maximiser of `λx - h(x)` for each `λ`.
    pub argmax: Vec<f64>,
    /// Whether the maximiser lies strictly inside the sample range.
    pub interior: Vec<bool>,
}

fn check_convex(x: &[f64], h: &[f64]) -> Result<()> {
    if x.len() < 3 || h.len() != x.len() {
        return Err(Error::Usage("need at least three samples of equal length".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Usage("sample points must increase strictly".into()));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("sampled function has non-finite values".into()));
    }
    let slopes: Vec<f64> = (0..x.len() - 1).map(|i| (h[i + 1] - h[i]) / (x[i + 1] - x[i])).collect();
    let scale = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs())).max(1e-300);
    for (i, w) in slopes.windows(2).enumerate() {
        if w[1] - w[0] < -1e-10 * scale {
            return Err(Error::Domain(format!(
                "sampled function is not convex near x = {:.6e} (slopes {:.6e} then {:.6e})",
                x[i + 1],
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

/// `sup_x (λx - h(x))` near the discrete maximiser `j`, refined with the
/// parabola through the neighbouring samples.
fn refine(x: &[f64], h: &[f64], j: usize, lambda: f64) -> (f64, f64, bool) {
    let n = x.len();
    let discrete = lambda * x[j] - h[j];
    if j == 0 || j == n - 1 {
        return (discrete, x[j], false);
    }
    let (x0, x1, x2) = (x[j - 1], x[j], x[j + 1]);
    let (d0, d1) = ((h[j] - h[j - 1]) / (x1 - x0), (h[j + 1] - h[j]) / (x2 - x1));
    let c = (d1 - d0) / (x2 - x0);
    if !(c > 0.0) {
        return (discrete, x[j], true);
    }
    // P(t) = h_j + b (t - x_j) + c (t - x_j)²
    let b = d0 + c * (x1 - x0);
    let t = (x1 + (lambda - b) / (2.0 * c)).clamp(x0, x2);
    let p = h[j] + b * (t - x1) + c * (t - x1) * (t - x1);
    let value = lambda * t - p;
    if value > discrete { (value, t, true) } else { (discrete, x[j], true) }
}

/// Legendre transform of the convex samples `(x, h)` (extended by `+∞`
/// outside the sample range) at ascending `lambda`, by a monotone sweep of
/// the maximiser.
pub fn legendre(x: &[f64], h: &[f64], lambda: &[f64]) -> Result<ConjugatePair> {
    check_convex(x, h)?;
    if lambda.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Usage("lambda grid must be ascending".into()));
    }
    let n = x.len();
    let mut j = 0;
    let mut out = ConjugatePair {
        x: x.to_vec(),
        h: h.to_vec(),
        lambda: lambda.to_vec(),
        h_star: Vec::with_capacity(lambda.len()),
        argmax: Vec::with_capacity(lambda.len()),
        interior: Vec::with_capacity(lambda.len()),
    };
    for &l in lambda {
        // convexity makes the maximiser non-decreasing in λ
        while j + 1 < n && l * x[j + 1] - h[j + 1] >= l * x[j] - h[j] {
            j += 1;
        }
        let (v, t, interior) = refine(x, h, j, l);
        out.h_star.push(v);
        out.argmax.push(t);
        out.interior.push(interior);
    }
    Ok(out)
}

/// Legendre transform at a single `λ`, locating the maximiser by binary
/// search on the chord slopes.
pub fn conjugate_at(x: &[f64], h: &[f64], lambda: f64) -> Result<f64> {
    check_convex(x, h)?;
    let slopes: Vec<f64> = (0..x.len() - 1).map(|i| (h[i + 1] - h[i]) / (x[i + 1] - x[i])).collect();
    let j = slopes.partition_point(|&s| s <= lambda);
    Ok(refine(x, h, j, lambda).0)
}

/// `Φ*` from the Casimir and the `Φ` recovered from it by conjugating back.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedLaw {
    pub lambda: Vec<f64>,
    pub phi_star: Vec<f64>,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    /// Recovered values whose maximiser is interior to the `λ` grid.
    pub interior: Vec<bool>,
}

impl ReducedLaw {
    /// Polytropic index from a log–log fit of the recovered `Φ ∝ ρ^{1+1/n}`.
    pub fn fitted_index(&self) -> Result<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .rho
            .iter()
            .zip(&self.phi)
            .zip(&self.interior)
            .filter(|((r, p), &i)| i && **r > 0.0 && **p > 0.0)
            .map(|((r, p), _)| (*r, *p))
            .unzip();
        if xs.len() < 3 {
            return Err(Error::Numeric("too few interior samples to fit an exponent".into()));
        }
        let (slope, _) = quad::fit_power_law(&xs, &ys);
        Ok(1.0 / (slope - 1.0))
    }
}

/// `Φ*(λ) = 4π ∫₀^{√(2λ)} Q*(λ - s²/2) s² ds` by adaptive quadrature.
pub fn phi_star(casimir: &Casimir, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    // s = √(2λ) t
    let scale = 4.0 * PI * (2.0 * lambda).powf(1.5);
    let f = |t: f64| casimir.q_star(lambda * (1.0 - t * t)) * t * t;
    let norm = casimir.q_star(lambda).max(1e-300);
    let integral = quad::adaptive(|t| f(t) / norm, 0.0, 1.0, 1e-14)?;
    Ok(scale * norm * integral)
}

/// Max relative `|Φ** - Φ|/Φ` over the interior of the density samples `rho`,
/// conjugating through the slopes `lambda`.
pub fn biconjugation_error(eos: &EosSpec, rho: &[f64], lambda: &[f64]) -> Result<f64> {
    let phi = rho.iter().map(|&r| eos.phi(r)).collect::<Result<Vec<_>>>()?;
    let star = legendre(rho, &phi, lambda)?;
    let back = legendre(lambda, &star.h_star, rho)?;
    let mut worst = 0.0f64;
    for (i, (v, &interior)) in back.h_star.iter().zip(&back.interior).enumerate() {
        if interior && i > 0 && i + 1 < rho.len() {
            worst = worst.max(((v - phi[i]) / phi[i]).abs());
        }
    }
    Ok(worst)
}

/// Samples `Φ*` on `lambda` (ascending, starting at or above 0) and recovers
/// `Φ` on `rho_points` logarithmically spaced densities spanning the
/// slopes of `Φ*`.
pub fn phi_from_q(casimir: &Casimir, lambda: &[f64], rho_points: usize) -> Result<ReducedLaw> {
    if lambda.len() < 8 {
        return Err(Error::Usage("need at least 8 lambda samples".into()));
    }
    let phi_star = lambda.iter().map(|&l| phi_star(casimir, l)).collect::<Result<Vec<_>>>()?;
    let n = lambda.len();
    let slope = |i: usize| (phi_star[i + 1] - phi_star[i]) / (lambda[i + 1] - lambda[i]);
    let (lo, hi) = (slope(2).max(1e-300), slope(n - 4));
    if !(hi > lo) {
        return Err(Error::Numeric("Φ* is flat on the lambda grid".into()));
    }
    let rho = quad::logspace(lo, hi, rho_points.max(3));
    let back = legendre(lambda, &phi_star, &rho)?;
    Ok(ReducedLaw { lambda: lambda.to_vec(), phi_star, rho, phi: back.h_star, interior: back.interior })
}

/// Phase-space samples of an isotropic distribution: `f(r_i, s)` at
/// Gauss–Legendre speeds `s = s_i sin θ`, `θ ∈ (0, π/2)`, where `s_i` is the
/// largest speed with `f > 0` at `r_i`.
#[derive(Debug, Clone)]
pub struct IsotropicSample {
    grid: Arc<RadialGrid>,
    s_edge: Vec<f64>,
    theta: Vec<f64>,
    weights: Vec<f64>,
    f: Vec<Vec<f64>>,
}

impl IsotropicSample {
    pub fn from_fn(
        grid: Arc<RadialGrid>,
        s_edge: Vec<f64>,
        speed_nodes: usize,
        f: impl Fn(usize, f64) -> f64,
    ) -> Result<Self> {
        if s_edge.len() != grid.len() {
            return Err(Error::Usage("one speed cutoff per grid point is required".into()));
        }
        if speed_nodes < 2 {
            return Err(Error::Usage("need at least 2 speed nodes".into()));
        }
        let (x, w) = quad::gauss_legendre(speed_nodes);
        let theta: Vec<f64> = x.iter().map(|t| 0.25 * PI * (t + 1.0)).collect();
        let weights: Vec<f64> = w.iter().map(|w| 0.25 * PI * w).collect();
        let mut values = Vec::with_capacity(grid.len());
        for (i, &se) in s_edge.iter().enumerate() {
            let row: Vec<f64> = theta.iter().map(|t| if se > 0.0 { f(i, se * t.sin()) } else { 0.0 }).collect();
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Domain(format!("distribution is negative or non-finite at r = {:.6e}", grid.nodes()[i])));
            }
            values.push(row);
        }
        Ok(Self { grid, s_edge, theta, weights, f: values })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// `∫ g(s, f) dv = 4π ∫ g s² ds` at grid point `i`.
    fn velocity_integral(&self, i: usize, g: impl Fn(f64, f64) -> f64) -> f64 {
        let se = self.s_edge[i];
        if se <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for ((t, w), f) in self.theta.iter().zip(&self.weights).zip(&self.f[i]) {
            let s = se * t.sin();
            acc += w * g(s, *f) * s * s * se * t.cos();
        }
        4.0 * PI * acc
    }

    /// `ρ_f = ∫ f dv`.
    pub fn density(&self) -> Result<GridDensity> {
        let values = (0..self.grid.len()).map(|i| self.velocity_integral(i, |_, f| f)).collect();
        GridDensity::new(self.grid.clone(), values)
    }

    /// Phase-space mass `∬ f`.
    pub fn mass(&self) -> Result<f64> {
        Ok(self.density()?.mass())
    }

    /// `(r, s, f)` triples for export.
    pub fn slices(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for (i, &r) in self.grid.nodes().iter().enumerate() {
            for (t, f) in self.theta.iter().zip(&self.f[i]) {
                out.push((r, self.s_edge[i] * t.sin(), *f));
            }
        }
        out
    }
}

/// Lifts a steady star to phase space: `f₀ = φ(½s² + V₀(r))`. Fails with a
/// mismatch error when `g_φ(V₀)` or the quadrature of `f₀` misses `ρ₀` by more
/// than `1e-6` relative at any node.
pub fn lift_minimizer(profile: &RadialProfile, ansatz: &KineticAnsatz, speed_nodes: usize) -> Result<IsotropicSample> {
    let e0 = ansatz.e0();
    let v0 = profile.v0();
    let s_edge: Vec<f64> = v0.iter().map(|v| (2.0 * (e0 - v)).max(0.0).sqrt()).collect();
    let sample = IsotropicSample::from_fn(profile.grid().clone(), s_edge, speed_nodes, |i, s| ansatz.phi(0.5 * s * s + v0[i]))?;
    let rho_q = sample.density()?;
    let mut worst: Option<(usize, f64)> = None;
    for (i, &r0) in profile.rho0().iter().enumerate() {
        let g = ansatz.g_phi(v0[i])?;
        let q = rho_q.values()[i];
        let err = if r0 > 0.0 {
            ((g - r0).abs().max((q - r0).abs())) / r0
        } else if g == 0.0 && q == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if worst.is_none_or(|(_, e)| err > e) {
            worst = Some((i, err));
        }
    }
    if let Some((i, err)) = worst {
        if err > 1e-6 {
            return Err(Error::Mismatch(format!(
                "lifted density misses the profile by {err:.3e} (relative) at node {i}, r = {:.6e}",
                profile.grid().nodes()[i]
            )));
        }
    }
    Ok(sample)
}

/// The three terms of `H_C(f) = ∬Q(f) + ½∬|v|²f + E_pot(ρ_f)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CasimirEnergy {
    pub casimir: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

pub fn casimir_energy(sample: &IsotropicSample, casimir: &Casimir) -> Result<CasimirEnergy> {
    let grid = &sample.grid;
    let n = grid.len();
    let c: Vec<f64> = (0..n).map(|i| sample.velocity_integral(i, |_, f| casimir.q(f))).collect();
    let k: Vec<f64> = (0..n).map(|i| sample.velocity_integral(i, |s, f| 0.5 * s * s * f)).collect();
    let casimir_part = grid.volume_integral(&c);
    let kinetic = grid.volume_integral(&k);
    let potential = gravity::potential_energy(&sample.density()?);
    let total = casimir_part + kinetic + potential;
    if !total.is_finite() {
        return Err(Error::Membership("energy-Casimir functional diverges for this distribution".into()));
    }
    Ok(CasimirEnergy { casimir: casimir_part, kinetic, potential, total })
}

/// `f = N(r)(1 - s²/w(r)²)₊^p` with `N` chosen so that `∫f dv = ρ(r)`.
pub fn isotropic_trial(rho: &GridDensity, width: &[f64], p: f64, speed_nodes: usize) -> Result<IsotropicSample> {
    if width.len() != rho.values().len() || width.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Usage("one positive speed width per grid point is required".into()));
    }
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("trial exponent must be nonnegative, got {p}")));
    }
    let b = beta(1.5, p + 1.0);
    let norm: Vec<f64> = rho.values().iter().zip(width).map(|(r, w)| r / (2.0 * PI * w.powi(3) * b)).collect();
    IsotropicSample::from_fn(rho.grid().clone(), width.to_vec(), speed_nodes, |i, s| {
        norm[i] * (1.0 - (s / width[i]).powi(2)).max(0.0).powf(p)
    })
}

/// One comparison `H_C(f) ≥ H_r(ρ_f)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReductionGap {
    pub h_c: f64,
    pub h_r: f64,
    pub gap: f64,
}

/// `H_C(f) - H_r(ρ_f)` for a sampled distribution, with `H_r` from the
/// equation of state induced by the Casimir.
pub fn reduction_gap(sample: &IsotropicSample, casimir: &Casimir) -> Result<ReductionGap> {
    let eos = KineticAnsatz::polytropic(casimir.a, casimir.k, 0.0)?.induced_eos()?;
    let h_c = casimir_energy(sample, casimir)?.total;
    let h_r = energetics::reduced_energy(&eos, &sample.density()?)?;
    Ok(ReductionGap { h_c, h_r, gap: h_c - h_r })
}

/// Seeded isotropic trial states around a profile: perturbed densities of
/// the same mass carried by distributions of random width and shape.
pub fn reduction_trials(
    profile: &RadialProfile,
    casimir: &Casimir,
    count: usize,
    seed: u64,
    speed_nodes: usize,
) -> Result<Vec<ReductionGap>> {
    let mut gen = TrialGenerator::new(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let rho0 = profile.density();
    let scale = (2.0 * profile.kappa()).sqrt();
    let radius = profile.r_support();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let rho = gen.interior(&rho0, radius, 0.3)?;
        let (w0, amp, p) = (rng.gen_range(0.3..1.5) * scale, rng.gen_range(0.0..0.5), rng.gen_range(1.0..4.0));
        let width: Vec<f64> = profile
            .grid()
            .nodes()
            .iter()
            .map(|&r| w0 * (1.0 + amp * (PI * r / radius).cos()))
            .collect();
        out.push(reduction_gap(&isotropic_trial(&rho, &width, p, speed_nodes)?, casimir)?);
    }
    Ok(out)
}

/// Max interior `|p₀' + ρ₀V₀'|` with `p₀ = h_φ(V₀)`, `ρ₀ = g_φ(V₀)`.
pub fn tov_residual(profile: &RadialProfile, ansatz: &KineticAnsatz) -> Result<f64> {
    let v0 = profile.v0();
    let p = v0.iter().map(|&v| ansatz.h_phi(v)).collect::<Result<Vec<_>>>()?;
    let rho = v0.iter().map(|&v| ansatz.g_phi(v)).collect::<Result<Vec<_>>>()?;
    let dv: Vec<f64> = profile.dz().iter().map(|d| -d).collect();
    let res = steady::hydrostatic_residuals(profile.grid().nodes(), &p, &rho, &dv, profile.support_index());
    Ok(res.into_iter().fold(0.0, f64::max))
}

/// Largest difference in `z = E₀ - V` on `[0, R]` between the shot profile of
/// the induced equation of state and the solution of `ΔV = 4π g_φ(V)`, both
/// with central value `kappa`.
pub fn steady_equivalence(ansatz: &KineticAnsatz, kappa: f64, intervals: usize) -> Result<f64> {
    let eos = ansatz.induced_eos()?;
    let profile = steady::shoot_with(&eos, kappa, &ShootOptions::with_intervals(intervals))?;
    let shifted = ansatz.with_cutoff(0.0);
    let direct = steady::solve_semilinear(&|z: f64| shifted.g_phi(-z), kappa, intervals)?;
    let mut worst = ((profile.r_support() - direct.radius) / direct.radius).abs();
    for (a, b) in profile.z().iter().zip(&direct.z) {
        worst = worst.max((a - b).abs() / kappa);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReduceOptions {
    pub intervals: usize,
    pub lambda_points: usize,
    pub rho_points: usize,
    pub speed_nodes: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self { intervals: 2048, lambda_points: 3000, rho_points: 1500, speed_nodes: 48, trials: 20, seed: 0 }
    }
}

/// Closed form against quadrature for `g_φ`, `h_φ` at `E₀ - V = 1`, `A = 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstantCheck {
    pub k: f64,
    pub g_closed: f64,
    pub g_quadrature: f64,
    pub h_closed: f64,
    pub h_quadrature: f64,
    pub max_relative_error: f64,
}

pub fn constant_check(k: f64) -> Result<ConstantCheck> {
    let ans = KineticAnsatz::polytropic(1.0, k, 1.0)?;
    let (g, gq) = (ans.g_phi(0.0)?, ans.g_phi_quadrature(0.0)?);
    let (h, hq) = (ans.h_phi(0.0)?, ans.h_phi_quadrature(0.0)?);
    Ok(ConstantCheck {
        k,
        g_closed: g,
        g_quadrature: gq,
        h_closed: h,
        h_quadrature: hq,
        max_relative_error: ((g - gq) / g).abs().max(((h - hq) / h).abs()),
    })
}

/// Everything `reduce` measures for one exponent `k`.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub k: f64,
    pub n_expected: f64,
    /// Index fitted from `Φ` recovered through the conjugate formula.
    pub n_fitted: Option<f64>,
    /// Index fitted from `p = h_φ ∘ g_φ⁻¹(ρ)`.
    pub n_fitted_eos: f64,
    pub constants: Vec<ConstantCheck>,
    /// Max relative error of numeric `Φ*` against its closed form.
    pub phi_star_error: Option<f64>,
    /// Max relative deviation of `Φ` recovered from `Q` against the induced law.
    pub phi_recovery_error: Option<f64>,
    /// Max relative deviation of `Φ**` from `Φ` on interior nodes.
    pub biconjugation_error: Option<f64>,
    pub h_c: Option<f64>,
    pub h_r: Option<f64>,
    pub h_c_relative_error: Option<f64>,
    pub lifted_mass_error: Option<f64>,
    pub min_trial_gap: Option<f64>,
    pub tov_residual: Option<f64>,
    pub tov_refinement_ratio: Option<f64>,
    pub steady_equivalence: Option<f64>,
}

/// Runs the kinetic checks for exponent `k`: closed forms (at `A = 1`), and for
/// the `c = 1` polytrope of index `k + 3/2` with `κ = 1` the conjugate route
/// `Q → Φ`, the lifted minimiser, trial states and the hydrostatic (TOV)
/// residual.
pub fn reduce(k: f64, opts: &ReduceOptions) -> Result<ReductionReport> {
    check_k(k, true)?;
    let mut constants = Vec::new();
    for kc in [0.0, 0.5, 1.0] {
        constants.push(constant_check(kc)?);
    }
    if !constants.iter().any(|c| c.k == k) {
        constants.push(constant_check(k)?);
    }
    let ansatz = KineticAnsatz::polytropic(1.0, k, 0.0)?;
    let n = k + 1.5;
    let zs = quad::logspace(1e-3, 1.0, 50);
    let rho: Vec<f64> = zs.iter().map(|&z| ansatz.g_phi(-z)).collect::<Result<_>>()?;
    let p: Vec<f64> = zs.iter().map(|&z| ansatz.h_phi(-z)).collect::<Result<_>>()?;
    let (slope, _) = quad::fit_power_law(&rho, &p);
    let mut report = ReductionReport {
        k,
        n_expected: n,
        n_fitted: None,
        n_fitted_eos: 1.0 / (slope - 1.0),
        constants,
        phi_star_error: None,
        phi_recovery_error: None,
        biconjugation_error: None,
        h_c: None,
        h_r: None,
        h_c_relative_error: None,
        lifted_mass_error: None,
        min_trial_gap: None,
        tov_residual: None,
        tov_refinement_ratio: None,
        steady_equivalence: None,
    };
    if k == 0.0 {
        return Ok(report);
    }
    // the c = 1 polytrope of index k + 3/2 and the ansatz that lifts it
    let eos = EosSpec::polytrope(1.0, 1.0 + 1.0 / n)?;
    let shoot = |intervals: usize| steady::shoot_with(&eos, 1.0, &ShootOptions::with_intervals(intervals));
    let profile = shoot(opts.intervals)?;
    let lifted_ansatz = KineticAnsatz::matching(&profile)?;
    let casimir = lifted_ansatz.casimir()?;

    let mut lambda = vec![0.0];
    lambda.extend(quad::logspace(1e-4, 1.0, opts.lambda_points.max(8)));
    let law = phi_from_q(&casimir, &lambda, opts.rho_points)?;
    report.n_fitted = Some(law.fitted_index()?);
    let mut star_err = 0.0f64;
    for (&l, &v) in law.lambda.iter().zip(&law.phi_star) {
        if l > 0.0 {
            star_err = star_err.max(((v - casimir.phi_star_exact(l)) / casimir.phi_star_exact(l)).abs());
        }
    }
    report.phi_star_error = Some(star_err);
    let mut rec_err = 0.0f64;
    for ((&r, &v), &i) in law.rho.iter().zip(&law.phi).zip(&law.interior) {
        if i {
            let exact = eos.phi(r)?;
            rec_err = rec_err.max(((v - exact) / exact).abs());
        }
    }
    report.phi_recovery_error = Some(rec_err);
    report.biconjugation_error = Some(biconjugation_error(&eos, &law.rho, &law.lambda)?);

    let f0 = lift_minimizer(&profile, &lifted_ansatz, opts.speed_nodes)?;
    let h_c = casimir_energy(&f0, &casimir)?.total;
    let h_r = energetics::reduced_energy(&eos, &profile.density())?;
    report.h_c = Some(h_c);
    report.h_r = Some(h_r);
    report.h_c_relative_error = Some(((h_c - h_r) / h_r).abs());
    report.lifted_mass_error = Some(((f0.mass()? - profile.mass()) / profile.mass()).abs());
    let gaps = reduction_trials(&profile, &casimir, opts.trials, opts.seed, opts.speed_nodes)?;
    report.min_trial_gap = gaps.iter().map(|g| g.gap).reduce(f64::min);

    let fine = tov_residual(&profile, &lifted_ansatz)?;
    let coarse_profile = shoot(opts.intervals / 2)?;
    let coarse = tov_residual(&coarse_profile, &KineticAnsatz::matching(&coarse_profile)?)?;
    report.tov_residual = Some(fine);
    report.tov_refinement_ratio = Some(coarse / fine);
    report.steady_equivalence = Some(steady_equivalence(&lifted_ansatz, 1.0, opts.intervals)?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn step_function_constants() {
        let a = KineticAnsatz::polytropic(1.0, 0.0, 1.0).unwrap();
        let g = a.g_phi(0.0).unwrap();
        assert!(rel(g, 2f64.powf(3.5) * PI / 3.0) < 1e-14);
        assert!((g - 11.847).abs() < 1e-3);
        let h = a.h_phi(0.0).unwrap();
        assert!(rel(h, 2f64.powf(3.5) / 3.0 * PI * 0.4) < 1e-14);
        assert_eq!(a.g_phi(1.0).unwrap(), 0.0);
        assert_eq!(a.h_phi(2.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for k in [0.0, 0.5, 1.0] {
            let c = constant_check(k).unwrap();
            assert!(c.max_relative_error < 1e-6, "k = {k}: {c:?}");
        }
        let a = KineticAnsatz::polytropic(1.0, 1.0, 1.0).unwrap();
        assert!(rel(a.g_phi(0.0).unwrap(), 2f64.powf(2.5) * PI * 4.0 / 15.0) < 1e-14);
    }

    #[test]
    fn general_ansatz_uses_quadrature() {
        let a = KineticAnsatz::general("linear", Arc::new(|e: f64| (1.0 - e).max(0.0)), 1.0).unwrap();
        let b = KineticAnsatz::polytropic(1.0, 1.0, 1.0).unwrap();
        assert!(rel(a.g_phi(0.3).unwrap(), b.g_phi(0.3).unwrap()) < 1e-8);
        assert!(rel(a.h_phi(0.3).unwrap(), b.h_phi(0.3).unwrap()) < 1e-8);
    }

    #[test]
    fn admissibility_guard() {
        assert!(matches!(KineticAnsatz::polytropic(1.0, 2.0, 0.0), Err(Error::Admissibility(_))));
        assert!(matches!(Casimir::new(1.5, 1.0), Err(Error::Admissibility(_))));
        assert!(matches!(Casimir::new(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(reduce(2.0, &ReduceOptions::default()), Err(Error::Admissibility(_))));
    }

    #[test]
    fn legendre_of_square() {
        let x: Vec<f64> = (0..=200).map(|i| i as f64 * 0.02).collect();
        let h: Vec<f64> = x.iter().map(|v| v * v).collect();
        let pair = legendre(&x, &h, &[-1.0, 0.0, 2.0, 3.0]).unwrap();
        assert_eq!(pair.h_star[0], 0.0);
        assert_eq!(pair.argmax[0], 0.0);
        assert!((pair.h_star[2] - 1.0).abs() < 1e-14);
        assert!((pair.argmax[2] - 1.0).abs() < 1e-14);
        assert!((pair.h_star[3] - 2.25).abs() < 1e-14);
        assert!((conjugate_at(&x, &h, 2.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn biconjugation_recovers_convex_samples() {
        let x = quad::logspace(1e-3, 2.0, 300);
        let h: Vec<f64> = x.iter().map(|v| v.powf(1.4)).collect();
        let lambda = quad::logspace(1e-2, 3.0, 600);
        let star = legendre(&x, &h, &lambda).unwrap();
        let back = legendre(&lambda, &star.h_star, &x).unwrap();
        for ((xi, hi), (v, int)) in x.iter().zip(&h).zip(back.h_star.iter().zip(&back.interior)) {
            if *int && *xi > 0.05 && *xi < 1.0 {
                assert!((v - hi).abs() < 1e-6 * hi.max(1e-3), "x = {xi}: {v} vs {hi}");
            }
        }
    }

    #[test]
    fn non_convex_input_is_rejected() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let h: Vec<f64> = x.iter().map(|v| v.sqrt()).collect();
        assert!(matches!(legendre(&x, &h, &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_star_of_quadratic_casimir() {
        let q = Casimir::quadratic();
        assert_eq!(q.q(2.0), 4.0);
        for l in [0.01f64, 0.3, 1.0, 7.0] {
            let exact = 16.0 * 2f64.sqrt() * PI / 105.0 * l.powf(3.5);
            assert!(rel(phi_star(&q, l).unwrap(), exact) < 1e-10);
            assert!(rel(q.phi_star_exact(l), exact) < 1e-13);
        }
        assert_eq!(phi_star(&q, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn matching_ansatz_reproduces_profile() {
        let eos = EosSpec::polytrope(1.0, 1.4).unwrap();
        let p = steady::shoot_with(&eos, 1.0, &ShootOptions::with_intervals(256)).unwrap();
        let a = KineticAnsatz::matching(&p).unwrap();
        assert!((a.index().unwrap() - 2.5).abs() < 1e-12);
        for (&v, &r) in p.v0().iter().zip(p.rho0()).step_by(17) {
            let g = a.g_phi(v).unwrap();
            assert!((g - r).abs() <= 1e-12 * r.max(1e-300) || (g == 0.0 && r == 0.0));
        }
        let induced = a.induced_eos().unwrap();
        assert!(rel(induced.pressure(0.3).unwrap(), eos.pressure(0.3).unwrap()) < 1e-12);
    }

    #[test]
    fn lift_rejects_inconsistent_ansatz() {
        let eos = EosSpec::polytrope(1.0, 1.4).unwrap();
        let p = steady::shoot_with(&eos, 1.0, &ShootOptions::with_intervals(128)).unwrap();
        let a = KineticAnsatz::matching(&p).unwrap();
        let AnsatzKind::Polytropic { a: coef, k } = *a.kind() else { unreachable!() };
        let wrong = KineticAnsatz::polytropic(1.01 * coef, k, a.e0()).unwrap();
        assert!(matches!(lift_minimizer(&p, &wrong, 32), Err(Error::Mismatch(_))));
    }

    #[test]
    fn zero_distribution_has_zero_energy() {
        let grid = Arc::new(RadialGrid::uniform(16, 1.0).unwrap());
        let s = IsotropicSample::from_fn(grid, vec![1.0; 17], 8, |_, _| 0.0).unwrap();
        let e = casimir_energy(&s, &Casimir::quadratic()).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn trial_normalisation_reproduces_density() {
        let grid = Arc::new(RadialGrid::uniform(16, 1.0).unwrap());
        let rho = GridDensity::from_fn(grid, |r| 1.0 - r * r).unwrap();
        let w = vec![0.7; 17];
        let s = isotropic_trial(&rho, &w, 2.0, 48).unwrap();
        for (a, b) in s.density().unwrap().values().iter().zip(rho.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
