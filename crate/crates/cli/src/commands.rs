//! The five subcommands. Each validates its configuration block, dispatches
//! to the library, writes its artifacts and prints a short summary.

use std::sync::Arc;

use epstar::energetics;
use epstar::hydro::{self, HydroState};
use epstar::invariants;
use epstar::kinetic::{self, KineticAnsatz};
use epstar::steady::{self, RadialProfile};
use epstar::varmin;
use epstar::{EosSpec, GridDensity, RadialGrid};
use serde::Serialize;

use crate::config::{MinimizeInit, RunConfig, Selector};
use crate::output::{Column, OutputDir};
use crate::{CliError, Status};

/// Lines printed to stdout unless `--quiet` is given.
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn core(module: &'static str) -> impl Fn(epstar::Error) -> CliError {
    move |e| CliError::from_core(module, e)
}

fn build_profile(cfg: &RunConfig, eos: &EosSpec) -> Result<RadialProfile, CliError> {
    let opts = cfg.steady.options()?;
    match cfg.steady.selector()? {
        Selector::Kappa(kappa) => steady::shoot_with(eos, kappa, &opts).map_err(core("steady")),
        Selector::Mass(m) => Ok(steady::match_mass_with(eos, m, &opts).map_err(core("steady"))?.profile),
    }
}

const PROFILE_COLUMNS: [Column; 5] = [
    ("r", "length"),
    ("rho", "mass/length^3"),
    ("V", "energy/mass"),
    ("z", "energy/mass"),
    ("m", "mass"),
];

#[derive(Serialize)]
struct SteadySummary {
    header: steady::ProfileHeader,
    #[serde(rename = "Hr")]
    hr: f64,
    euler_lagrange: steady::EulerLagrangeResidual,
    static_euler_residual: f64,
}

pub fn steady(cfg: &RunConfig, out: &mut OutputDir, console: &Console) -> Result<Status, CliError> {
    let eos = cfg.eos()?;
    cfg.steady.options()?;
    cfg.steady.selector()?;
    let profile = build_profile(cfg, &eos)?;
    let summary = SteadySummary {
        header: profile.header(),
        hr: energetics::reduced_energy(&eos, &profile.density()).map_err(core("energetics"))?,
        euler_lagrange: steady::euler_lagrange_residual(&profile).map_err(core("steady"))?,
        static_euler_residual: steady::static_euler_residual(&profile).map_err(core("steady"))?,
    };
    let rows = (0..profile.grid().len()).map(|i| {
        [profile.grid().nodes()[i], profile.rho0()[i], profile.v0()[i], profile.z()[i], profile.enclosed_mass()[i]]
    });
    out.csv("profile.csv", &PROFILE_COLUMNS, rows)?;
    out.json("steady.json", &summary)?;

    console.say(format!("eos        {}", eos.describe()));
    console.say(format!("M          {:.10e}", profile.mass()));
    console.say(format!("E0         {:.10e}", profile.e0()));
    console.say(format!("R          {:.10e}", profile.r_support()));
    console.say(format!("Hr(rho0)   {:.10e}", summary.hr));
    console.say(format!(
        "Euler-Lagrange residual {:.3e} (min exterior slack {:.3e})",
        summary.euler_lagrange.support, summary.euler_lagrange.min_slack
    ));
    console.say(format!("static Euler residual   {:.3e}", summary.static_euler_residual));
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct MinimizeSummary {
    status: varmin::MinimizeStatus,
    iterations: usize,
    monotone: bool,
    mass: f64,
    hr_final: f64,
    hr_shoot: f64,
    /// `1e-4 |H_r(shoot)|`.
    tolerance: f64,
    within_tolerance: bool,
    l1_distance_over_mass: f64,
}

pub fn minimize(cfg: &RunConfig, out: &mut OutputDir, console: &Console) -> Result<Status, CliError> {
    let eos = cfg.eos()?;
    cfg.steady.options()?;
    cfg.steady.selector()?;
    let mc = &cfg.minimize;
    mc.validate()?;
    let profile = build_profile(cfg, &eos)?;
    let (m, radius) = (profile.mass(), profile.r_support());
    let grid = Arc::new(RadialGrid::uniform(mc.intervals, mc.r_max_factor * radius).map_err(core("grid"))?);
    let reference = energetics::reference_on(&profile, &grid).map_err(core("energetics"))?.rho0;
    let init = match mc.init {
        MinimizeInit::Ball => GridDensity::uniform_ball(grid.clone(), m, mc.ball_radius_factor * radius),
        MinimizeInit::Steady => Ok(reference.clone()),
    }
    .and_then(|rho| rho.renormalized(m))
    .map_err(core("grid"))?;
    let trace = varmin::minimize_hr(&eos, m, &init, &mc.options(cfg.seed)).map_err(core("varmin"))?;

    let hr_shoot = energetics::reduced_energy(&eos, &profile.density()).map_err(core("energetics"))?;
    let diff: Vec<f64> =
        trace.final_density.values().iter().zip(reference.values()).map(|(a, b)| (a - b).abs()).collect();
    let tolerance = 1e-4 * hr_shoot.abs();
    let summary = MinimizeSummary {
        status: trace.status,
        iterations: trace.rows.len() - 1,
        monotone: trace.is_monotone(),
        mass: m,
        hr_final: trace.final_hr(),
        hr_shoot,
        tolerance,
        within_tolerance: trace.final_hr() <= hr_shoot + tolerance,
        l1_distance_over_mass: grid.volume_integral(&diff) / m,
    };
    out.csv(
        "trace.csv",
        &[("iter", "1"), ("Hr", "energy"), ("mass", "mass"), ("kkt_dev", "energy/mass"), ("step", "length^3/mass")],
        trace.rows.iter().map(|r| [r.iter as f64, r.hr, r.mass, r.kkt_dev, r.step]),
    )?;
    out.csv(
        "density.csv",
        &[("r", "length"), ("rho", "mass/length^3"), ("rho_shoot", "mass/length^3")],
        (0..grid.len()).map(|i| [grid.nodes()[i], trace.final_density.values()[i], reference.values()[i]]),
    )?;
    out.json("minimize.json", &summary)?;

    console.say(format!("status     {:?} after {} iterations", summary.status, summary.iterations));
    console.say(format!("Hr(final)  {:.10e}", summary.hr_final));
    console.say(format!("Hr(shoot)  {:.10e}", summary.hr_shoot));
    if summary.within_tolerance {
        console.say(format!("Hr(final) ≤ Hr(shoot)+tol (tol {tolerance:.3e})"));
    } else {
        console.say(format!("Hr(final) exceeds Hr(shoot)+tol (tol {tolerance:.3e})"));
    }
    console.say(format!("L1 distance to the shooting profile / M = {:.3e}", summary.l1_distance_over_mass));
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct EvolveSummary {
    perturbation: hydro::PerturbationKind,
    amplitude: f64,
    cells: usize,
    sound_crossing_time: f64,
    t_end: f64,
    steps: usize,
    initial_metric: f64,
    max_metric: f64,
    max_metric_ratio: Option<f64>,
    mass_drift: f64,
    energy_drift: f64,
    drift_bound: f64,
    conservation_violated: bool,
    /// Metric of the discrete equilibrium against the continuous star.
    discretisation_gap: f64,
    abort: Option<String>,
}

fn dump_state(out: &mut OutputDir, state: &HydroState) -> Result<std::path::PathBuf, CliError> {
    let u = state.velocity();
    out.csv(
        "state_dump.csv",
        &[("r", "length"), ("rho", "mass/length^3"), ("u", "length/time"), ("momentum", "mass/(length^2 time)")],
        (0..state.len()).map(|i| [state.grid().nodes()[i], state.rho()[i], u[i], state.momentum()[i]]),
    )
}

pub fn evolve(cfg: &RunConfig, out: &mut OutputDir, console: &Console) -> Result<Status, CliError> {
    let eos = cfg.eos()?;
    cfg.steady.options()?;
    cfg.steady.selector()?;
    let ec = &cfg.evolve;
    ec.validate()?;
    let profile = build_profile(cfg, &eos)?;
    let t_sc = profile.sound_crossing_time().map_err(core("steady"))?;
    let opts = ec.options(t_sc);
    let equilibrium = hydro::discrete_equilibrium(&profile, ec.cells, ec.r_max_factor).map_err(core("hydro1d"))?;
    let start = hydro::perturb_equilibrium(&equilibrium, profile.r_support(), ec.perturbation, ec.amplitude)
        .map_err(core("hydro1d"))?;
    let outcome = match hydro::run(&start.state, &equilibrium.reference, &opts) {
        Ok(o) => o,
        Err(e) => {
            let err = CliError::from_core("hydro1d", e);
            if let CliError::Numeric(msg) = err {
                let path = dump_state(out, &start.state)?;
                return Err(CliError::Numeric(format!("{msg}; initial state dumped to {}", path.display())));
            }
            return Err(err);
        }
    };

    let summary = EvolveSummary {
        perturbation: ec.perturbation,
        amplitude: ec.amplitude,
        cells: ec.cells,
        sound_crossing_time: t_sc,
        t_end: opts.t_end,
        steps: outcome.steps,
        initial_metric: outcome.initial_metric,
        max_metric: outcome.max_metric,
        max_metric_ratio: outcome.max_metric_ratio,
        mass_drift: outcome.mass_drift,
        energy_drift: outcome.energy_drift,
        drift_bound: opts.drift_bound,
        conservation_violated: outcome.conservation_violated,
        discretisation_gap: equilibrium.profile_gap.total,
        abort: outcome.abort.clone(),
    };
    out.csv(
        "ledger.csv",
        &[
            ("t", "time"),
            ("mass", "mass"),
            ("energy", "energy"),
            ("drift", "1"),
            ("rho_max", "mass/length^3"),
            ("rho_min", "mass/length^3"),
            ("outflow", "mass"),
            ("floor_added", "mass"),
        ],
        outcome.ledger.rows.iter().map(|r| [r.t, r.mass, r.energy, r.drift, r.rho_max, r.rho_min, r.outflow, r.floor_added]),
    )?;
    out.csv(
        "metric.csv",
        &[
            ("t", "time"),
            ("d", "energy"),
            ("field", "energy"),
            ("kinetic", "energy"),
            ("total", "energy"),
            ("mass", "mass"),
            ("energy", "energy"),
        ],
        outcome.metrics.iter().map(|m| [m.t, m.d, m.field, m.kinetic, m.total, m.mass, m.energy]),
    )?;
    out.json("evolve.json", &summary)?;

    if let Some(reason) = &outcome.abort {
        let path = dump_state(out, &outcome.state)?;
        return Err(CliError::Numeric(format!(
            "hydro1d: run aborted at t = {:.6e}: {reason}; state dumped to {}",
            outcome.state.time(),
            path.display()
        )));
    }
    console.say(format!("t_end      {:.6e} ({} steps, sound-crossing time {t_sc:.6e})", opts.t_end, outcome.steps));
    match outcome.max_metric_ratio {
        Some(r) => console.say(format!("max metric ratio {r:.6e} (initial metric {:.3e})", outcome.initial_metric)),
        None => console.say(format!("max metric {:.3e} (started on the equilibrium)", outcome.max_metric)),
    }
    console.say(format!("mass drift       {:.3e}", outcome.mass_drift));
    console.say(format!("energy drift     {:.3e} (bound {:.1e})", outcome.energy_drift, opts.drift_bound));
    if outcome.conservation_violated {
        eprintln!(
            "conservation hypothesis violated: energy drift {:.3e} exceeds {:.1e}; stability is untested for this run",
            outcome.energy_drift, opts.drift_bound
        );
        return Ok(Status::ConservationFlag);
    }
    Ok(Status::Ok)
}

pub fn reduce(cfg: &RunConfig, out: &mut OutputDir, console: &Console) -> Result<Status, CliError> {
    let rc = &cfg.reduce;
    rc.validate()?;
    let opts = rc.options(cfg.seed);
    let report = kinetic::reduce(rc.k, &opts).map_err(core("kinetic"))?;
    out.json("reduction.json", &report)?;
    if rc.k > 0.0 {
        // the star `reduce` lifts: the c = 1 polytrope of index k + 3/2 at κ = 1
        let eos = EosSpec::polytrope(1.0, 1.0 + 1.0 / (rc.k + 1.5)).map_err(core("eos"))?;
        let profile =
            steady::shoot_with(&eos, 1.0, &steady::ShootOptions::with_intervals(rc.intervals)).map_err(core("steady"))?;
        let ansatz = KineticAnsatz::matching(&profile).map_err(core("kinetic"))?;
        let lifted = kinetic::lift_minimizer(&profile, &ansatz, rc.speed_nodes).map_err(core("kinetic"))?;
        out.csv(
            "f0.csv",
            &[("r", "length"), ("s", "length/time"), ("f0", "mass time^3/length^6")],
            lifted.slices().into_iter().map(|(r, s, f)| [r, s, f]),
        )?;
    }

    console.say(format!("k          {}  (expected n = {})", report.k, report.n_expected));
    if let Some(n) = report.n_fitted {
        console.say(format!("n_fitted   {n:.8}  (from Q through the conjugate formula)"));
    }
    console.say(format!("n_fitted   {:.8}  (from h_phi and g_phi)", report.n_fitted_eos));
    for c in &report.constants {
        console.say(format!(
            "constants k={}: g={:.10e} h={:.10e} (quadrature rel. error {:.2e})",
            c.k, c.g_closed, c.h_closed, c.max_relative_error
        ));
    }
    if let (Some(hc), Some(hr), Some(rel)) = (report.h_c, report.h_r, report.h_c_relative_error) {
        console.say(format!("H_C(f0) {hc:.10e}  H_r(rho0) {hr:.10e}  rel. difference {rel:.2e}"));
    }
    if let Some(gap) = report.min_trial_gap {
        console.say(format!("min H_C(f) - H_r(rho_f) over {} trial states: {gap:.3e}", opts.trials));
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct CheckSummary {
    passed: usize,
    total: usize,
    results: Vec<invariants::CheckOutcome>,
}

pub fn check(cfg: &RunConfig, out: &mut OutputDir, console: &Console) -> Result<Status, CliError> {
    let results = invariants::run_all(cfg.seed, |r| console.say(r.to_string()));
    let passed = results.iter().filter(|r| r.passed).count();
    let total = results.len();
    out.json("check.json", &CheckSummary { passed, total, results })?;
    console.say(format!("{passed} of {total} criteria passed"));
    if passed == total {
        Ok(Status::Ok)
    } else {
        Err(CliError::Numeric(format!("{} invariant check(s) failed", total - passed)))
    }
}
