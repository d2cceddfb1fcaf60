//! The invariant suite: every end-to-end property the library promises,
//! each reduced to a pass/fail verdict with the measured quantities.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::energetics::{self, TrialGenerator};
use crate::gravity;
use crate::hydro::{self, PerturbationKind, RunOptions};
use crate::kinetic::{self, Casimir, ReduceOptions};
use crate::steady::{self, ShootOptions};
use crate::varmin::{self, MinimizeOptions};
use crate::{EosSpec, Error, FlowField, GridDensity, RadialGrid, RadialProfile};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    format!("error: {e}")
}

fn n1_star() -> Result<RadialProfile, String> {
    steady::shoot(&EosSpec::polytrope(1.0, 2.0).map_err(fail)?, 1.0).map_err(fail)
}

fn lane_emden_n1(_seed: u64) -> Outcome {
    let t0 = Instant::now();
    let p = n1_star()?;
    let elapsed = t0.elapsed().as_secs_f64();
    let k = (2.0 * PI).sqrt();
    let mut z_err = 0.0f64;
    for (&r, &z) in p.grid().nodes().iter().zip(p.z()).take(p.support_index() + 1) {
        let exact = if r == 0.0 { 1.0 } else { (k * r).sin() / (k * r) };
        z_err = z_err.max((z - exact).abs());
    }
    let half_pi = (PI / 2.0).sqrt();
    let r_err = (p.r_support() - half_pi).abs();
    let m_err = (p.mass() - half_pi).abs() / p.mass();
    let e_err = (p.e0() + 1.0).abs();
    check(
        z_err <= 1e-6 && r_err <= 1e-6 && m_err <= 1e-6 && e_err <= 1e-6 && elapsed < 1.0,
        format!("max|z-sinc|={z_err:.2e} |R-R*|={r_err:.2e} dM/M={m_err:.2e} |E0+1|={e_err:.2e} t={elapsed:.3}s"),
    )
}

fn negative_infimum(_seed: u64) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for gamma in [1.4, 5.0 / 3.0, 2.0] {
        let eos = EosSpec::polytrope(1.0, gamma).map_err(fail)?;
        let p = steady::match_mass(&eos, 1.0).map_err(fail)?;
        let hr = energetics::reduced_energy(&eos, &p.density()).map_err(fail)?;
        ok &= hr < 0.0;
        parts.push(format!("gamma={gamma:.4}: Hr={hr:.6e}"));
    }
    check(ok, parts.join(", "))
}

fn constructed_profiles() -> Result<Vec<RadialProfile>, String> {
    let mut out = Vec::new();
    for gamma in [1.4, 5.0 / 3.0, 2.0] {
        let eos = EosSpec::polytrope(1.0, gamma).map_err(fail)?;
        out.push(steady::shoot(&eos, 1.0).map_err(fail)?);
        out.push(steady::match_mass(&eos, 1.0).map_err(fail)?);
    }
    out.push(steady::shoot(&EosSpec::blended(1.0, 1.0, 2.0).map_err(fail)?, 1.0).map_err(fail)?);
    Ok(out)
}

fn euler_lagrange(_seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    let mut min_slack = f64::INFINITY;
    let profiles = constructed_profiles()?;
    for p in &profiles {
        let el = steady::euler_lagrange_residual(p).map_err(fail)?;
        worst = worst.max(el.support);
        min_slack = min_slack.min(el.min_slack);
    }
    check(
        worst <= 1e-8 && min_slack >= 0.0,
        format!("{} profiles: max support residual={worst:.2e}, min exterior slack={min_slack:.3e}", profiles.len()),
    )
}

fn potential_energy_identity(_seed: u64) -> Outcome {
    let p = n1_star()?;
    let le = gravity::potential_energy_forms(&p.density()).max_relative_spread();
    let g = Arc::new(RadialGrid::uniform_cells(1024, 2.0).map_err(fail)?);
    let ball = GridDensity::uniform_ball(g, 1.0, 1.0).map_err(fail)?;
    let forms = gravity::potential_energy_forms(&ball);
    let oracle = -3.0 / 5.0;
    let ball_err = ((gravity::potential_energy(&ball) - oracle) / oracle).abs();
    let spread = forms.max_relative_spread();
    check(
        le <= 1e-6 && spread <= 1e-6 && ball_err <= 1e-6,
        format!("Lane-Emden spread={le:.2e}, ball spread={spread:.2e}, ball vs -3M^2/5R={ball_err:.2e}"),
    )
}

/// The 100 seeded trial states shared by the expansion and distance checks.
fn trials(p: &RadialProfile, seed: u64) -> Result<Vec<(GridDensity, FlowField)>, String> {
    let mut gen = TrialGenerator::new(seed);
    let rho0 = p.density();
    let mut out = Vec::new();
    for i in 0..100 {
        let rho = if i % 2 == 0 {
            gen.interior(&rho0, p.r_support(), 0.3)
        } else {
            gen.extended(&rho0, p.r_support(), 0.3)
        }
        .map_err(fail)?;
        let u = gen.velocity(p.grid(), p.r_support(), 0.2).map_err(fail)?;
        out.push((rho, u));
    }
    Ok(out)
}

fn expansion_identity(seed: u64) -> Outcome {
    let p = n1_star()?;
    let mut worst = 0.0f64;
    for (rho, u) in trials(&p, seed)? {
        worst = worst.max(energetics::expansion_identity_check(&rho, &u, &p).map_err(fail)?.relative);
    }
    check(worst <= 1e-8, format!("100 trials: max relative residual={worst:.2e}"))
}

fn distance_properties(seed: u64) -> Outcome {
    let p = n1_star()?;
    let mut min_d = f64::INFINITY;
    for (rho, _) in trials(&p, seed)? {
        min_d = min_d.min(energetics::distance_d(&rho, &p).map_err(fail)?);
    }
    // in-support trials: d is exactly c ∫(ρ-ρ₀)² for Φ = cρ²
    let mut gen = TrialGenerator::new(seed.wrapping_add(1));
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rho = gen.interior(&p.density(), p.r_support(), 0.3).map_err(fail)?;
        let q = energetics::quadratic_lower_bound_check(&rho, &p, 1.0, None).map_err(fail)?;
        worst = worst.max(((q.d - q.l2_sq) / q.l2_sq).abs());
    }
    check(
        min_d >= -1e-10 && worst <= 1e-10,
        format!("min d={min_d:.3e} over 100 trials, max |d - c||drho||^2|/(c||drho||^2)={worst:.2e}"),
    )
}

fn variational_cross_check(_seed: u64) -> Outcome {
    let eos = EosSpec::polytrope(1.0, 2.0).map_err(fail)?;
    let p = steady::shoot(&eos, 1.0).map_err(fail)?;
    let m = p.mass();
    let g = Arc::new(RadialGrid::uniform(512, 2.0 * p.r_support()).map_err(fail)?);
    let ball = GridDensity::uniform_ball(g.clone(), m, p.r_support()).map_err(fail)?.renormalized(m).map_err(fail)?;
    let t0 = Instant::now();
    let trace = varmin::minimize_hr(&eos, m, &ball, &MinimizeOptions::default()).map_err(fail)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let hr0 = energetics::reduced_energy(&eos, &p.density()).map_err(fail)?;
    let r0 = energetics::reference_on(&p, &g).map_err(fail)?.rho0;
    let diff: Vec<f64> = trace.final_density.values().iter().zip(r0.values()).map(|(a, b)| (a - b).abs()).collect();
    let l1 = g.volume_integral(&diff) / m;
    let hr = trace.final_hr();
    check(
        hr <= hr0 + 1e-4 * hr0.abs() && l1 <= 1e-2 && trace.is_monotone() && elapsed < 60.0,
        format!(
            "{} iterations, (Hr-Hr0)/|Hr0|={:.2e}, L1/M={l1:.2e}, monotone={}, t={elapsed:.1}s",
            trace.rows.len() - 1,
            (hr - hr0) / hr0.abs(),
            trace.is_monotone()
        ),
    )
}

fn reduction_oracle(_seed: u64) -> Outcome {
    let q = Casimir::quadratic();
    let mut star = 0.0f64;
    for lambda in (1..=20).map(|i| 0.05 * i as f64) {
        let exact = 16.0 * 2f64.sqrt() * PI / 105.0 * lambda.powf(3.5);
        star = star.max(((kinetic::phi_star(&q, lambda).map_err(fail)? - exact) / exact).abs());
    }
    let mut constants = 0.0f64;
    for k in [0.0, 0.5, 1.0] {
        constants = constants.max(kinetic::constant_check(k).map_err(fail)?.max_relative_error);
    }
    let mut fits = Vec::new();
    let mut fit_err = 0.0f64;
    for k in [0.5, 1.0] {
        let r = kinetic::reduce(k, &ReduceOptions { trials: 0, ..Default::default() }).map_err(fail)?;
        let n = r.n_fitted.ok_or("no fitted index")?;
        fit_err = fit_err.max((n - (k + 1.5)).abs());
        fits.push(format!("k={k}: n={n:.6}"));
    }
    check(
        star <= 1e-6 && constants <= 1e-6 && fit_err <= 1e-3,
        format!("Phi* error={star:.2e} (20 lambdas), closed forms={constants:.2e}, {}", fits.join(", ")),
    )
}

fn energy_casimir(seed: u64) -> Outcome {
    let r = kinetic::reduce(1.0, &ReduceOptions { trials: 20, seed, ..Default::default() }).map_err(fail)?;
    let rel = r.h_c_relative_error.ok_or("no H_C comparison")?;
    let gap = r.min_trial_gap.ok_or("no trial states")?;
    check(
        rel <= 1e-4 && gap >= -1e-8,
        format!(
            "H_C={:.10e} H_r={:.10e} rel={rel:.2e}, min H_C(f)-H_r(rho_f) over 20 trials={gap:.3e}",
            r.h_c.unwrap_or(f64::NAN),
            r.h_r.unwrap_or(f64::NAN)
        ),
    )
}

fn hydrostatic_residuals(_seed: u64) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for gamma in [1.4, 5.0 / 3.0, 2.0] {
        let eos = EosSpec::polytrope(1.0, gamma).map_err(fail)?;
        let fine = steady::shoot_with(&eos, 1.0, &ShootOptions::with_intervals(2048)).map_err(fail)?;
        let coarse = steady::shoot_with(&eos, 1.0, &ShootOptions::with_intervals(1024)).map_err(fail)?;
        let rf = steady::static_euler_residual(&fine).map_err(fail)?;
        let ratio = steady::static_euler_residual(&coarse).map_err(fail)? / rf;
        ok &= rf <= 1e-5 && ratio >= 3.5;
        parts.push(format!("Euler gamma={gamma:.3}: {rf:.2e} (x{ratio:.2})"));
    }
    let r = kinetic::reduce(1.0, &ReduceOptions { trials: 0, ..Default::default() }).map_err(fail)?;
    let tov = r.tov_residual.ok_or("no TOV residual")?;
    let ratio = r.tov_refinement_ratio.ok_or("no TOV refinement")?;
    ok &= tov <= 1e-5 && ratio >= 3.5;
    parts.push(format!("TOV k=1: {tov:.2e} (x{ratio:.2})"));
    check(ok, parts.join(", "))
}

fn hydro_conservation(_seed: u64) -> Outcome {
    let t0 = Instant::now();
    let p = n1_star()?;
    let t_sc = p.sound_crossing_time().map_err(fail)?;
    let opts = RunOptions { t_end: 10.0 * t_sc, output_interval: 0.5 * t_sc, ..Default::default() };

    let eq = hydro::discrete_equilibrium(&p, 1024, 2.0).map_err(fail)?;
    let still = hydro::run(&eq.state, &eq.reference, &opts).map_err(fail)?;
    let bump = hydro::perturb(&p, PerturbationKind::DensityBump, 1e-3, 1024).map_err(fail)?;
    let moved = hydro::run(&bump.state, &bump.equilibrium.reference, &opts).map_err(fail)?;
    let elapsed = t0.elapsed().as_secs_f64();

    let mass_drift = still.mass_drift.max(moved.mass_drift);
    let ratio = moved.max_metric_ratio.unwrap_or(f64::INFINITY);
    let aborted = still.abort.is_some() || moved.abort.is_some();
    check(
        !aborted
            && mass_drift <= 1e-12
            && still.max_metric <= 1e-8
            && ratio <= 10.0
            && !moved.conservation_violated
            && moved.energy_drift <= 1e-3
            && elapsed < 120.0,
        format!(
            "1024 cells, 10 t_sc: mass drift={mass_drift:.2e}, steady metric={:.2e}, bump ratio={ratio:.3}, energy drift={:.2e}, t={elapsed:.1}s{}",
            still.max_metric,
            moved.energy_drift,
            if aborted { " (aborted)" } else { "" }
        ),
    )
}

fn non_compact_detection(_seed: u64) -> Outcome {
    let eos = EosSpec::polytrope(1.0, 1.2).map_err(fail)?;
    match steady::shoot(&eos, 1.0) {
        Err(e @ Error::InfiniteRadius { .. }) => check(e.to_string().contains("infinite-radius"), e.to_string()),
        Err(e) => Err(format!("wrong error: {e}")),
        Ok(p) => Err(format!("found a star of radius {}", p.r_support())),
    }
}

/// Verdict for one criterion of the suite.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

/// A criterion: trial-state seed in, verdict with details out.
pub type Criterion = fn(u64) -> Outcome;

pub const CRITERIA: [(&str, Criterion); 12] = [
    ("Lane-Emden n=1 oracle", lane_emden_n1),
    ("negative infimum of Hr", negative_infimum),
    ("Euler-Lagrange residual and cutoff slack", euler_lagrange),
    ("potential energy triple identity", potential_energy_identity),
    ("energy expansion identity", expansion_identity),
    ("stability distance properties", distance_properties),
    ("variational cross-check", variational_cross_check),
    ("reduction oracle", reduction_oracle),
    ("energy-Casimir consistency", energy_casimir),
    ("TOV and static Euler residuals", hydrostatic_residuals),
    ("hydrodynamic conservation and equilibrium", hydro_conservation),
    ("non-compact detection", non_compact_detection),
];

/// Runs every criterion in order with trial states drawn from `seed`,
/// reporting each verdict to `on_result` as soon as it is known.
pub fn run_all(seed: u64, mut on_result: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    CRITERIA
        .iter()
        .enumerate()
        .map(|(i, (name, f))| {
            let t0 = Instant::now();
            let (passed, detail) = match f(seed) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            let out = CheckOutcome { id: i + 1, name, passed, detail, seconds: t0.elapsed().as_secs_f64() };
            on_result(&out);
            out
        })
        .collect()
}
