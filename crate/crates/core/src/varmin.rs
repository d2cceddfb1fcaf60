//! Direct minimization of the reduced energy over densities of fixed mass by
//! projected gradient descent.
//!
//! The first variation of `H_r` at `ρ` is `Φ'(ρ) + V_ρ`. A step moves `ρ`
//! against it and projects back onto `{ρ ≥ 0, ∫ρ = M}` in the metric of the
//! volume quadrature, which is `ρ_i = (y_i + μ)₊` for the unique shift `μ`
//! that restores the mass. Backtracking guarantees descent.

use serde::Serialize;

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::energetics::reduced_energy;
use crate::gravity::potential_of;
use crate::grid::GridDensity;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Initial step; by default `1/(max Φ''(ρ_init) + 4π R_max²)`.
    pub initial_step: Option<f64>,
    /// Step growth factor after an accepted step.
    pub step_growth: f64,
    /// Maximum halvings of the step within one iteration.
    pub max_backtracks: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Relative mass tolerance of every iterate.
    pub mass_tol: f64,
    /// Stop once `|ΔH_r| < tol_dh · max(1, |H_r|)`.
    pub tol_dh: f64,
    /// Iterations below `tol_dh` required in a row before stopping.
    pub patience: usize,
    /// Stop as soon as the first variation deviates from a constant by at
    /// most this much on the support (the first-order optimality condition).
    pub kkt_tol: f64,
    /// Recorded for provenance; the descent itself is deterministic.
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            initial_step: None,
            step_growth: 1.5,
            max_backtracks: 60,
            armijo: 1e-4,
            mass_tol: 1e-12,
            tol_dh: 1e-14,
            patience: 5,
            kkt_tol: 1e-8,
            seed: 0,
        }
    }
}

impl MinimizeOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.step_growth >= 1.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.mass_tol > 0.0
            && self.tol_dh > 0.0
            && self.kkt_tol >= 0.0
            && self.initial_step.is_none_or(|s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Usage(format!("invalid minimization options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    /// No descent after the maximal number of backtracking steps.
    Stagnated,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    #[serde(rename = "Hr")]
    pub hr: f64,
    pub mass: f64,
    pub kkt_dev: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeTrace {
    pub rows: Vec<TraceRow>,
    pub status: MinimizeStatus,
    pub final_density: GridDensity,
}

impl MinimizeTrace {
    pub fn final_hr(&self) -> f64 {
        self.rows.last().map(|r| r.hr).unwrap_or(f64::NAN)
    }

    /// Whether `H_r` never increased along accepted iterations.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].hr <= w[0].hr)
    }
}

/// First variation `Φ'(ρ) + V_ρ` at the grid points.
pub fn first_variation(eos: &EosSpec, rho: &GridDensity) -> Result<Vec<f64>> {
    let v = potential_of(rho);
    rho.values()
        .iter()
        .zip(v.values())
        .map(|(&r, &vi)| Ok(eos.phi_prime(r)? + vi))
        .collect()
}

/// Projection of `y` onto `{ρ ≥ 0, Σ w ρ = mass}` in the `w`-weighted norm.
fn project(y: &[f64], weights: &[f64], mass: f64) -> Vec<f64> {
    let mass_of = |mu: f64| -> f64 { y.iter().zip(weights).map(|(v, w)| w * (v + mu).max(0.0)).sum() };
    let total_w: f64 = weights.iter().sum();
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    // mass_of is continuous and non-decreasing in μ
    let mut lo = -ymax;
    let mut hi = mass / total_w - ymin;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass_of(mid) < mass {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * (1.0 + hi.abs()) {
            break;
        }
    }
    let mut out: Vec<f64> = y.iter().map(|v| (v + hi).max(0.0)).collect();
    let m: f64 = out.iter().zip(weights).map(|(v, w)| v * w).sum();
    if m > 0.0 {
        let s = mass / m;
        out.iter_mut().for_each(|v| *v *= s);
    }
    out
}

/// KKT diagnostics of a density: estimated cutoff energy, deviation of
/// `Φ'(ρ) + V_ρ` from it on the support, and the slack off the support.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KktReport {
    pub e0_estimate: f64,
    pub max_deviation: f64,
    /// `min (Φ'(ρ) + V_ρ - Ê₀)` where `ρ` vanishes (`+∞` without vacuum points).
    pub min_slack: f64,
    pub support_points: usize,
}

pub fn kkt_report(rho: &GridDensity, eos: &EosSpec) -> Result<KktReport> {
    let g = first_variation(eos, rho)?;
    let rho_max = rho.values().iter().copied().fold(0.0, f64::max);
    if rho_max == 0.0 {
        return Err(Error::Domain("KKT report of the zero density".into()));
    }
    let tol = 1e-10 * rho_max;
    let mut on: Vec<f64> = rho.values().iter().zip(&g).filter(|(r, _)| **r > tol).map(|(_, v)| *v).collect();
    on.sort_by(f64::total_cmp);
    let e0 = if on.len() % 2 == 1 { on[on.len() / 2] } else { 0.5 * (on[on.len() / 2 - 1] + on[on.len() / 2]) };
    let max_deviation = on.iter().map(|v| (v - e0).abs()).fold(0.0, f64::max);
    let min_slack = rho
        .values()
        .iter()
        .zip(&g)
        .filter(|(r, _)| **r <= tol)
        .map(|(_, v)| v - e0)
        .fold(f64::INFINITY, f64::min);
    Ok(KktReport { e0_estimate: e0, max_deviation, min_slack, support_points: on.len() })
}

fn max_phi_second(eos: &EosSpec, rho: &GridDensity) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &r in rho.values() {
        if r > 0.0 {
            m = m.max(eos.phi_second(r)?);
        }
    }
    Ok(m)
}

/// Minimizes `H_r` over `{ρ ≥ 0, ∫ρ = mass}` on the grid of `init`.
pub fn minimize_hr(eos: &EosSpec, mass: f64, init: &GridDensity, opts: &MinimizeOptions) -> Result<MinimizeTrace> {
    opts.validate()?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Domain(format!("target mass must be positive, got {mass}")));
    }
    if ((init.mass() - mass) / mass).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "initial density has mass {:.12e}, expected {mass:.12e}",
            init.mass()
        )));
    }
    let grid = init.grid().clone();
    let weights = grid.volume_weights();
    let r_max = grid.r_max();
    let mut rho = GridDensity::new(grid.clone(), project(init.values(), &weights, mass))?;
    let mut hr = reduced_energy(eos, &rho)?;
    let mut step = match opts.initial_step {
        Some(s) => s,
        None => 1.0 / (max_phi_second(eos, &rho)? + 4.0 * std::f64::consts::PI * r_max * r_max),
    };
    let mut rows = vec![TraceRow { iter: 0, hr, mass: rho.mass(), kkt_dev: kkt_report(&rho, eos)?.max_deviation, step }];
    let mut quiet = 0;
    let mut status = MinimizeStatus::MaxIterations;
    if rows[0].kkt_dev <= opts.kkt_tol {
        return Ok(MinimizeTrace { rows, status: MinimizeStatus::Converged, final_density: rho });
    }
    for iter in 1..=opts.max_iters {
        let g = first_variation(eos, &rho)?;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let y: Vec<f64> = rho.values().iter().zip(&g).map(|(r, gi)| r - step * gi).collect();
            let cand = GridDensity::new(grid.clone(), project(&y, &weights, mass))?;
            let h_new = reduced_energy(eos, &cand)?;
            let slope: f64 = cand
                .values()
                .iter()
                .zip(rho.values())
                .zip(g.iter().zip(&weights))
                .map(|((a, b), (gi, w))| w * gi * (a - b))
                .sum();
            if h_new <= hr + opts.armijo * slope && h_new <= hr {
                accepted = Some((cand, h_new));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, h_new)) = accepted else {
            status = MinimizeStatus::Stagnated;
            break;
        };
        if ((cand.mass() - mass) / mass).abs() > opts.mass_tol {
            return Err(Error::Numeric(format!("projection lost mass: {:.15e} vs {mass:.15e}", cand.mass())));
        }
        let dh = hr - h_new;
        rho = cand;
        hr = h_new;
        rows.push(TraceRow { iter, hr, mass: rho.mass(), kkt_dev: kkt_report(&rho, eos)?.max_deviation, step });
        step *= opts.step_growth;
        if rows[rows.len() - 1].kkt_dev <= opts.kkt_tol {
            status = MinimizeStatus::Converged;
            break;
        }
        if dh.abs() < opts.tol_dh * hr.abs().max(1.0) {
            quiet += 1;
            if quiet >= opts.patience {
                status = MinimizeStatus::Converged;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(MinimizeTrace { rows, status, final_density: rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::steady::shoot;
    use std::sync::Arc;

    #[test]
    fn projection_is_feasible_and_idempotent() {
        let g = RadialGrid::uniform(20, 2.0).unwrap();
        let w = g.volume_weights();
        let y: Vec<f64> = g.nodes().iter().map(|r| 1.0 - r).collect();
        let p = project(&y, &w, 1.0);
        assert!(p.iter().all(|&v| v >= 0.0));
        let m: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((m - 1.0).abs() < 1e-14);
        let q = project(&p, &w, 1.0);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn steady_star_is_stationary() {
        let p = shoot(&EosSpec::polytrope(1.0, 2.0).unwrap(), 1.0).unwrap();
        let k = kkt_report(&p.density(), p.eos()).unwrap();
        assert!(k.max_deviation < 1e-8, "{k:?}");
        assert!(k.min_slack >= 0.0);
        assert!((k.e0_estimate - p.e0()).abs() < 1e-8);
        let t = minimize_hr(p.eos(), p.density().mass(), &p.density(), &MinimizeOptions::default()).unwrap();
        assert_eq!(t.status, MinimizeStatus::Converged);
        assert!(t.rows.len() <= 3);
    }

    #[test]
    fn uniform_ball_is_far_from_stationary() {
        let g = Arc::new(RadialGrid::uniform(128, 2.5).unwrap());
        let ball = GridDensity::uniform_ball(g, 1.0, 1.0).unwrap();
        let k = kkt_report(&ball, &EosSpec::polytrope(1.0, 2.0).unwrap()).unwrap();
        assert!(k.max_deviation > 0.1);
    }

    #[test]
    fn descent_is_monotone_and_feasible() {
        let eos = EosSpec::polytrope(1.0, 2.0).unwrap();
        let g = Arc::new(RadialGrid::uniform(64, 2.5).unwrap());
        let ball = GridDensity::uniform_ball(g, 1.0, 1.0).unwrap().renormalized(1.0).unwrap();
        let opts = MinimizeOptions { max_iters: 200, ..Default::default() };
        let t = minimize_hr(&eos, 1.0, &ball, &opts).unwrap();
        assert!(t.is_monotone());
        assert!(t.rows.iter().all(|r| (r.mass - 1.0).abs() < 1e-12));
        assert!(t.final_density.values().iter().all(|&v| v >= 0.0));
    }
}
