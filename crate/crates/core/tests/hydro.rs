//! Spherical self-gravitating runs of the finite-volume solver.

use epstar::hydro::{self, PerturbationKind, RunOptions};
use epstar::steady;
use epstar::{EosSpec, RadialProfile};

fn star(gamma: f64) -> RadialProfile {
    steady::shoot(&EosSpec::polytrope(1.0, gamma).unwrap(), 1.0).unwrap()
}

fn options(p: &RadialProfile, crossings: f64) -> RunOptions {
    let t_sc = p.sound_crossing_time().unwrap();
    RunOptions { t_end: crossings * t_sc, output_interval: 0.25 * t_sc, ..Default::default() }
}

#[test]
fn discrete_equilibria_are_fixed_points() {
    for gamma in [1.4, 5.0 / 3.0, 2.0] {
        let p = star(gamma);
        let eq = hydro::discrete_equilibrium(&p, 256, 2.0).unwrap();
        let out = hydro::run(&eq.state, &eq.reference, &options(&p, 1.0)).unwrap();
        assert!(out.abort.is_none());
        assert!(out.max_metric <= 1e-12, "gamma {gamma}: {}", out.max_metric);
        assert!(out.mass_drift <= 1e-12, "gamma {gamma}: {}", out.mass_drift);
        let u_max = out.state.velocity().iter().fold(0.0f64, |m, u| m.max(u.abs()));
        assert!(u_max < 1e-10, "gamma {gamma}: {u_max}");
    }
}

#[test]
fn discretisation_gap_shrinks_under_refinement() {
    let p = star(2.0);
    let coarse = hydro::discrete_equilibrium(&p, 128, 2.0).unwrap().profile_gap.total;
    let fine = hydro::discrete_equilibrium(&p, 512, 2.0).unwrap().profile_gap.total;
    assert!(fine < coarse / 4.0, "{coarse} -> {fine}");
}

#[test]
fn every_perturbation_conserves_mass_and_energy() {
    let p = star(2.0);
    for (kind, amplitude) in [
        (PerturbationKind::DensityBump, 1e-2),
        (PerturbationKind::VelocityKick, 1e-2),
        (PerturbationKind::Contraction, 1e-2),
    ] {
        let start = hydro::perturb(&p, kind, amplitude, 256).unwrap();
        assert!(start.initial_metric.total > 0.0);
        let out = hydro::run(&start.state, &start.equilibrium.reference, &options(&p, 2.0)).unwrap();
        assert!(out.abort.is_none(), "{kind:?}: {:?}", out.abort);
        assert!(out.mass_drift <= 1e-12, "{kind:?}: mass drift {}", out.mass_drift);
        assert!(out.energy_drift <= 1e-3, "{kind:?}: energy drift {}", out.energy_drift);
        assert!(!out.conservation_violated);
        let ratio = out.max_metric_ratio.unwrap();
        assert!(ratio <= 10.0, "{kind:?}: metric ratio {ratio}");
    }
}

#[test]
fn ledger_samples_every_output_interval() {
    let p = star(2.0);
    let start = hydro::perturb(&p, PerturbationKind::DensityBump, 1e-3, 64).unwrap();
    let opts = options(&p, 1.0);
    let out = hydro::run(&start.state, &start.equilibrium.reference, &opts).unwrap();
    assert_eq!(out.ledger.rows.len(), 5);
    assert_eq!(out.metrics.len(), 5);
    for (i, row) in out.ledger.rows.iter().enumerate() {
        let expected = i as f64 * opts.output_interval;
        assert!((row.t - expected).abs() < 1e-9 * opts.t_end, "{} vs {expected}", row.t);
    }
}
