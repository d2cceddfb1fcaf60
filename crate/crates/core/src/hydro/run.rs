//! Time integration with conservation bookkeeping and the stability metric.

use serde::{Deserialize, Serialize};

use super::HydroState;
use crate::energetics::{self, SampledReference, StabilityMetric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub t_end: f64,
    pub cfl: f64,
    /// Spacing of ledger and metric samples.
    pub output_interval: f64,
    /// Relative energy drift above which the run is flagged.
    pub drift_bound: f64,
    pub max_steps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { t_end: 1.0, cfl: 0.4, output_interval: 0.1, drift_bound: 1e-3, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// `|H(t) - H(0)| / |H(0)|`.
    pub drift: f64,
    pub rho_max: f64,
    pub rho_min: f64,
    /// Cumulative mass that left through the outer boundary.
    pub outflow: f64,
    /// Cumulative mass added by the density floor.
    pub floor_added: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConservationLedger {
    pub rows: Vec<LedgerRow>,
}

impl ConservationLedger {
    /// Largest relative mass error after accounting for outflow and floor.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.rows.first() else { return 0.0 };
        self.rows
            .iter()
            .map(|r| ((r.mass + r.outflow - r.floor_added - first.mass) / first.mass).abs())
            .fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.drift).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricRow {
    pub t: f64,
    pub d: f64,
    pub field: f64,
    pub kinetic: f64,
    pub total: f64,
    pub mass: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Last state reached (the state before the failing step on abort).
    pub state: HydroState,
    pub ledger: ConservationLedger,
    pub metrics: Vec<MetricRow>,
    pub steps: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub initial_metric: f64,
    pub max_metric: f64,
    /// `max_t metric / metric(0)`; undefined when the run starts on the
    /// reference itself.
    pub max_metric_ratio: Option<f64>,
    pub conservation_violated: bool,
    pub abort: Option<String>,
}

fn sample(
    state: &HydroState,
    reference: &SampledReference,
    h0: Option<f64>,
    outflow: f64,
    floor_added: f64,
) -> Result<(LedgerRow, MetricRow)> {
    let mass = state.total_mass();
    let energy = state.energy()?;
    let h0 = h0.unwrap_or(energy);
    let drift = if h0 != 0.0 { ((energy - h0) / h0).abs() } else { (energy - h0).abs() };
    let rho_max = state.rho().iter().copied().fold(f64::MIN, f64::max);
    let rho_min = state.rho().iter().copied().fold(f64::MAX, f64::min);
    let m: StabilityMetric =
        energetics::metric_against(state.eos(), &state.density()?, &state.flow()?, reference)?;
    Ok((
        LedgerRow { t: state.time(), mass, energy, drift, rho_max, rho_min, outflow, floor_added },
        MetricRow { t: state.time(), d: m.d_part, field: m.field_part, kinetic: m.kinetic_part, total: m.total, mass, energy },
    ))
}

/// Advances `state0` to `opts.t_end`, sampling the ledger and the stability
/// metric against `reference` every `opts.output_interval`. A failing step
/// ends the run early with `abort` set and the partial ledger kept.
pub fn run(state0: &HydroState, reference: &SampledReference, opts: &RunOptions) -> Result<RunOutcome> {
    if !reference.rho0.grid().same_as(state0.grid()) {
        return Err(Error::Usage("reference must be sampled on the state's grid".into()));
    }
    if !(opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(Error::Config(format!("t_end must be finite and nonnegative, got {}", opts.t_end)));
    }
    if !(opts.output_interval > 0.0) {
        return Err(Error::Config("output_interval must be positive".into()));
    }
    if !(opts.drift_bound > 0.0) {
        return Err(Error::Config("drift_bound must be positive".into()));
    }
    let mut state = state0.clone();
    let (mut outflow, mut floor_added) = (0.0, 0.0);
    let (row, metric) = sample(&state, reference, None, 0.0, 0.0)?;
    let h0 = row.energy;
    let mut ledger = ConservationLedger { rows: vec![row] };
    let mut metrics = vec![metric];
    let t0 = state.time();
    let t_end = t0 + opts.t_end;
    let mut next_output = t0 + opts.output_interval;
    let mut steps = 0;
    let mut abort = None;
    while state.time() < t_end * (1.0 - 1e-14) {
        if steps >= opts.max_steps {
            abort = Some(format!("step limit {} reached at t = {:.6e}", opts.max_steps, state.time()));
            break;
        }
        let target = next_output.min(t_end);
        let result = state.cfl_dt(opts.cfl).and_then(|dt| state.step(dt.min(target - state.time())));
        let step = match result {
            Ok(s) => s,
            Err(e) => {
                abort = Some(e.to_string());
                break;
            }
        };
        outflow += step.outflow;
        floor_added += step.floor_added;
        state = step.state;
        steps += 1;
        if state.time() >= target * (1.0 - 1e-14) {
            let (row, metric) = sample(&state, reference, Some(h0), outflow, floor_added)?;
            ledger.rows.push(row);
            metrics.push(metric);
            next_output += opts.output_interval;
        }
    }
    let mass_drift = ledger.mass_drift();
    let energy_drift = ledger.energy_drift();
    let initial_metric = metrics[0].total;
    let max_metric = metrics.iter().map(|m| m.total).fold(0.0, f64::max);
    let max_metric_ratio = (initial_metric > 0.0).then(|| max_metric / initial_metric);
    Ok(RunOutcome {
        state,
        ledger,
        metrics,
        steps,
        mass_drift,
        energy_drift,
        initial_metric,
        max_metric,
        max_metric_ratio,
        conservation_violated: energy_drift > opts.drift_bound,
        abort,
    })
}
