//! Coupled time loop, snapshots, invariant monitoring and run diagnostics.
//!
//! One step, from state n:
//! 1. rate fields from the cell positions X^n (cached in the state),
//! 2. the four protein solves with diffusivities from f^n → c^{n+1},
//! 3. the volume-fraction update from c^n and c^{n+1} → f^{n+1},
//! 4. Euler–Maruyama with drift built from (c^{n+1}, f^{n+1}) (or the time-n
//!    fields with `drift_fields = old`) → X^{n+1}, then rates for X^{n+1}.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cells::{em_step, sigma_profile, CellPopulation, DriftContext};
use crate::fractions::{init_fractions, step_fractions, FractionError, VolumeFractions};
use crate::grid::{Grid, GridError, ScalarField};
use crate::io::{write_snapshot, BUILD_ID};
use crate::params::{ConfigError, DriftFields, ModelParams, SimConfig, Species};
use crate::protein::{step_concentrations, Concentrations, SolverError, StepReport, StepSettings};
use crate::scalar::{Real, Vec2};
use crate::sources::{assemble_rates_with, MollifierPotential, RateFields};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step {step}: {source}")]
    Grid { step: u64, source: GridError },
    #[error("step {step}: {source}")]
    Solver { step: u64, source: SolverError },
    #[error("step {step}: {source}")]
    Fractions { step: u64, source: FractionError },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Number of nearest stalk cells averaged in the tip-following diagnostic.
pub const NEAREST_STALKS: usize = 20;

/// Full model state at time step n.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub step: u64,
    pub concentrations: Concentrations<T>,
    pub fractions: VolumeFractions<T>,
    pub cells: CellPopulation<T>,
    /// Rate fields for the current cell positions.
    pub rates: RateFields<T>,
}

impl<T: Real> SimState<T> {
    /// t = n τ.
    pub fn time(&self, tau: f64) -> f64 {
        self.step as f64 * tau
    }

    /// Named fields in snapshot order.
    pub fn fields(&self) -> Vec<(&'static str, &ScalarField<T>)> {
        let mut out: Vec<(&'static str, &ScalarField<T>)> =
            self.concentrations.iter().map(|(s, f)| (s.field_name(), f)).collect();
        out.push(("f_B", &self.fractions.f_b));
        out.push(("f_E", &self.fractions.f_e));
        out.push(("f_F", &self.fractions.f_f));
        out
    }
}

/// c_V⁰(x) = 0.1 exp(-R_V / √(R_V² - |x|²)) inside |x| < R_V, zero outside.
pub fn initial_vegf<T: Real>(p: Vec2<T>, support: T) -> T {
    let r2 = p.norm_sq();
    let s2 = support * support;
    if r2 >= s2 {
        T::zero()
    } else {
        T::lit(0.1) * (-support / (s2 - r2).sqrt()).exp()
    }
}

/// Builds the grid described by a validated config.
pub fn build_grid<T: Real>(config: &SimConfig) -> Result<Arc<Grid<T>>, ConfigError> {
    let k = config.grid_half_width()?;
    Ok(Arc::new(Grid::disk(T::lit(config.h), k)))
}

/// Initial state: cells drawn in the first-quadrant annulus, VEGF bump at the
/// origin, other proteins zero, fractions from the fibrin profile.
pub fn init_state<T: Real>(
    config: &SimConfig,
    params: &ModelParams<T>,
    grid: &Arc<Grid<T>>,
    potential: &MollifierPotential<T>,
) -> Result<SimState<T>, EngineError> {
    let cells = CellPopulation::initial(config.n1, config.n2, params.domain_radius, config.seed, config.replica);
    let support = params.vegf_radius;
    let c_v = ScalarField::from_fn(grid.clone(), |p| initial_vegf(p, support));
    let zero = ScalarField::zeros(grid.clone());
    let concentrations = Concentrations::new(c_v, zero.clone(), zero.clone(), zero);
    let fractions = init_fractions(grid.clone(), params);
    let rates = assemble_rates_with(&cells.tips, &cells.stalks, params, grid, potential)
        .map_err(|source| EngineError::Grid { step: 0, source })?;
    Ok(SimState { step: 0, concentrations, fractions, cells, rates })
}

/// Checked step invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    FieldsFinite,
    ConcentrationsNonnegative,
    VegfMaxNonincreasing,
    FractionsInUnitInterval,
    PartitionOfUnity,
    FractionsNonincreasing,
    CellsContained,
}

impl Invariant {
    pub const ALL: [Invariant; 7] = [
        Invariant::FieldsFinite,
        Invariant::ConcentrationsNonnegative,
        Invariant::VegfMaxNonincreasing,
        Invariant::FractionsInUnitInterval,
        Invariant::PartitionOfUnity,
        Invariant::FractionsNonincreasing,
        Invariant::CellsContained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Invariant::FieldsFinite => "fields_finite",
            Invariant::ConcentrationsNonnegative => "concentrations_nonnegative",
            Invariant::VegfMaxNonincreasing => "vegf_max_nonincreasing",
            Invariant::FractionsInUnitInterval => "fractions_in_unit_interval",
            Invariant::PartitionOfUnity => "partition_of_unity",
            Invariant::FractionsNonincreasing => "fractions_nonincreasing",
            Invariant::CellsContained => "cells_contained",
        }
    }
}

/// Invariants that hold for a single state.
pub fn state_violations<T: Real>(state: &SimState<T>, radius: T) -> Vec<(Invariant, String)> {
    let mut out = Vec::new();
    for (name, field) in state.fields() {
        if let Some((node, v)) = field.active_values().find(|(_, v)| !v.is_finite()) {
            out.push((Invariant::FieldsFinite, format!("{name} = {v} at node {node}")));
            break;
        }
    }
    for (species, field) in state.concentrations.iter() {
        if let Some((node, v)) = field.active_values().find(|&(_, v)| v < T::zero()) {
            out.push((
                Invariant::ConcentrationsNonnegative,
                format!("{} = {v:e} at node {node}", species.field_name()),
            ));
            break;
        }
    }
    let f = &state.fractions;
    let unit = |v: T| v >= T::zero() && v <= T::one();
    for (idx, _) in f.f_b.active_values() {
        let t = f.at_node(idx);
        if !(unit(t.b) && unit(t.e) && unit(t.f)) {
            out.push((Invariant::FractionsInUnitInterval, format!("({}, {}, {}) at node {idx}", t.b, t.e, t.f)));
            break;
        }
    }
    for (idx, _) in f.f_b.active_values() {
        let t = f.at_node(idx);
        if (t.b + t.f) + t.e != T::one() {
            out.push((Invariant::PartitionOfUnity, format!("sum {} at node {idx}", (t.b + t.f) + t.e)));
            break;
        }
    }
    if let Some(p) = state.cells.positions().find(|p| !(p.norm() <= radius)) {
        out.push((Invariant::CellsContained, format!("cell at ({}, {}) with |X| = {}", p.x, p.y, p.norm())));
    }
    out
}

/// Invariants relating consecutive states.
pub fn transition_violations<T: Real>(prev: &SimState<T>, next: &SimState<T>) -> Vec<(Invariant, String)> {
    let mut out = Vec::new();
    let old_max = prev.concentrations.get(Species::Vegf).max();
    let new_max = next.concentrations.get(Species::Vegf).max();
    if new_max > old_max {
        out.push((Invariant::VegfMaxNonincreasing, format!("max c_V rose from {old_max:e} to {new_max:e}")));
    }
    for (name, a, b) in
        [("f_B", &prev.fractions.f_b, &next.fractions.f_b), ("f_F", &prev.fractions.f_f, &next.fractions.f_f)]
    {
        if let Some((idx, v)) = b.active_values().find(|&(idx, v)| v > a.values()[idx]) {
            out.push((
                Invariant::FractionsNonincreasing,
                format!("{name} rose from {} to {v} at node {idx}", a.values()[idx]),
            ));
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantStatus {
    pub name: String,
    pub passed: bool,
    pub violations: u64,
    /// First violation: step and description.
    pub first: Option<(u64, String)>,
}

/// Accumulates invariant checks over a run.
#[derive(Debug, Clone)]
pub struct InvariantMonitor {
    statuses: Vec<InvariantStatus>,
    pub states_checked: u64,
}

impl Default for InvariantMonitor {
    fn default() -> Self {
        Self {
            statuses: Invariant::ALL
                .iter()
                .map(|i| InvariantStatus { name: i.name().to_string(), passed: true, violations: 0, first: None })
                .collect(),
            states_checked: 0,
        }
    }
}

impl InvariantMonitor {
    fn record(&mut self, step: u64, found: Vec<(Invariant, String)>) {
        for (inv, detail) in found {
            let pos = Invariant::ALL.iter().position(|&i| i == inv).unwrap();
            let s = &mut self.statuses[pos];
            s.passed = false;
            s.violations += 1;
            if s.first.is_none() {
                s.first = Some((step, detail));
            }
        }
    }

    pub fn observe_initial<T: Real>(&mut self, state: &SimState<T>, radius: T) {
        self.states_checked += 1;
        self.record(state.step, state_violations(state, radius));
    }

    pub fn observe_step<T: Real>(&mut self, prev: &SimState<T>, next: &SimState<T>, radius: T) {
        self.states_checked += 1;
        let mut found = state_violations(next, radius);
        found.extend(transition_violations(prev, next));
        self.record(next.step, found);
    }

    pub fn statuses(&self) -> &[InvariantStatus] {
        &self.statuses
    }

    pub fn all_passed(&self) -> bool {
        self.statuses.iter().all(|s| s.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub integral: f64,
}

/// Scalar diagnostics of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDiagnostics {
    pub step: u64,
    pub time_s: f64,
    pub fields: Vec<FieldStats>,
    /// Per tip: mean distance to its nearest stalk cells (up to 20).
    pub tip_stalk_mean_distance: Vec<f64>,
    /// Minimum of f_B / f_F over nodes within R_m of any tip position so far.
    pub visited_min_f_b: Option<f64>,
    pub visited_min_f_f: Option<f64>,
    /// Largest drop f⁰ - f over the same nodes.
    pub visited_max_drop_f_b: Option<f64>,
    pub visited_max_drop_f_f: Option<f64>,
    pub max_cell_radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTotals {
    pub solves: u64,
    pub iterations: u64,
    pub max_iterations: usize,
    pub max_residual: f64,
    pub clamped_nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub build: String,
    pub seed: u64,
    pub replica: u32,
    pub n_steps: u64,
    pub snapshots: Vec<SnapshotDiagnostics>,
    pub invariants: Vec<InvariantStatus>,
    pub solver: SolverTotals,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Mean distance from `tip` to its `count` nearest stalk cells.
pub fn nearest_stalk_distance<T: Real>(tip: Vec2<T>, stalks: &[Vec2<T>], count: usize) -> Option<f64> {
    if stalks.is_empty() || count == 0 {
        return None;
    }
    let mut d: Vec<f64> = stalks.iter().map(|&s| (s - tip).norm().as_f64()).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let take = count.min(d.len());
    Some(d[..take].iter().sum::<f64>() / take as f64)
}

/// A configured simulation: state plus everything needed to advance it.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    config: SimConfig,
    params: ModelParams<T>,
    grid: Arc<Grid<T>>,
    potential: MollifierPotential<T>,
    state: SimState<T>,
    initial_fractions: VolumeFractions<T>,
    visited: Vec<bool>,
    monitor: InvariantMonitor,
    solver: SolverTotals,
}

impl<T: Real> Simulation<T> {
    pub fn new(config: SimConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let params: ModelParams<T> = config.params.cast();
        let grid = build_grid::<T>(&config)?;
        let potential = MollifierPotential::new(params.mollifier_radius);
        let state = init_state(&config, &params, &grid, &potential)?;
        let initial_fractions = state.fractions.clone();
        let mut sim = Self {
            visited: vec![false; grid.len()],
            config,
            params,
            grid,
            potential,
            state,
            initial_fractions,
            monitor: InvariantMonitor::default(),
            solver: SolverTotals::default(),
        };
        sim.mark_visited();
        let radius = sim.params.domain_radius;
        sim.monitor.observe_initial(&sim.state, radius);
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn state(&self) -> &SimState<T> {
        &self.state
    }

    /// Direct access to the state, e.g. to prescribe fields or positions in
    /// experiments. Call [`Simulation::refresh_rates`] after moving cells.
    pub fn state_mut(&mut self) -> &mut SimState<T> {
        &mut self.state
    }

    /// Recomputes the rate fields from the current cell positions.
    pub fn refresh_rates(&mut self) -> Result<(), EngineError> {
        let step = self.state.step;
        let cells = &self.state.cells;
        self.state.rates = assemble_rates_with(&cells.tips, &cells.stalks, &self.params, &self.grid, &self.potential)
            .map_err(|source| EngineError::Grid { step, source })?;
        self.mark_visited();
        Ok(())
    }

    pub fn monitor(&self) -> &InvariantMonitor {
        &self.monitor
    }

    pub fn solver_totals(&self) -> &SolverTotals {
        &self.solver
    }

    pub fn time(&self) -> f64 {
        self.state.time(self.config.tau)
    }

    /// Nodes within R_m of any tip position seen so far.
    pub fn visited_mask(&self) -> &[bool] {
        &self.visited
    }

    fn mark_visited(&mut self) {
        let g = &*self.grid;
        let rm = self.params.mollifier_radius;
        let n = g.n();
        for tip in &self.state.cells.tips {
            for i in 0..n {
                for j in 0..n {
                    let idx = g.index(i, j);
                    if g.is_active(idx) && !self.visited[idx] && (g.node(i, j) - *tip).norm() <= rm {
                        self.visited[idx] = true;
                    }
                }
            }
        }
    }

    fn settings(&self) -> StepSettings<T> {
        StepSettings {
            mode: self.config.reaction_mode,
            tau: T::lit(self.config.tau),
            tol: T::lit(self.config.linear_tol),
            max_iter: self.config.linear_max_iter,
        }
    }

    /// Advances one full step.
    pub fn advance(&mut self) -> Result<StepReport, EngineError> {
        self.advance_with(true)
    }

    /// Advances one step; with `move_cells = false` the cells stay where they
    /// are (fields still evolve), which separates the deterministic layer
    /// from the stochastic one.
    pub fn advance_with(&mut self, move_cells: bool) -> Result<StepReport, EngineError> {
        let step = self.state.step;
        let tau = T::lit(self.config.tau);
        let prev = &self.state;

        let (c_new, report) =
            step_concentrations(&prev.concentrations, &prev.fractions, &prev.rates, &self.settings(), &self.params)
                .map_err(|source| EngineError::Solver { step, source })?;
        let f_new = step_fractions(
            &prev.fractions,
            prev.concentrations.get(Species::Mmp),
            c_new.get(Species::Mmp),
            prev.concentrations.get(Species::Upa),
            c_new.get(Species::Upa),
            &self.params,
            tau,
        )
        .map_err(|source| EngineError::Fractions { step, source })?;

        let (cells, rates) = if move_cells {
            let ctx = match self.config.drift_fields {
                DriftFields::New => DriftContext::new(
                    &c_new,
                    &f_new,
                    &self.params,
                    self.config.drift_cutoff,
                    self.config.hertz_in_strain,
                ),
                DriftFields::Old => DriftContext::new(
                    &prev.concentrations,
                    &prev.fractions,
                    &self.params,
                    self.config.drift_cutoff,
                    self.config.hertz_in_strain,
                ),
            };
            let radius = self.params.domain_radius;
            let cells = em_step(&prev.cells, |pop, m| ctx.drift(pop, m), |x| sigma_profile(x, radius), tau, radius)
                .map_err(|source| EngineError::Grid { step, source })?;
            let rates = assemble_rates_with(&cells.tips, &cells.stalks, &self.params, &self.grid, &self.potential)
                .map_err(|source| EngineError::Grid { step, source })?;
            (cells, rates)
        } else {
            (prev.cells.clone(), prev.rates.clone())
        };

        let next = SimState { step: step + 1, concentrations: c_new, fractions: f_new, cells, rates };
        self.monitor.observe_step(&self.state, &next, self.params.domain_radius);
        self.state = next;
        self.mark_visited();
        for s in &report.solves {
            self.solver.solves += 1;
            self.solver.iterations += s.iterations as u64;
            self.solver.max_iterations = self.solver.max_iterations.max(s.iterations);
            self.solver.max_residual = self.solver.max_residual.max(s.residual);
            self.solver.clamped_nodes += s.clamped as u64;
        }
        Ok(report)
    }

    pub fn diagnostics(&self) -> SnapshotDiagnostics {
        let state = &self.state;
        let fields = state
            .fields()
            .into_iter()
            .map(|(name, f)| FieldStats {
                name: name.to_string(),
                min: f.min().as_f64(),
                max: f.max().as_f64(),
                integral: f.integrate().as_f64(),
            })
            .collect();
        let tip_stalk_mean_distance = state
            .cells
            .tips
            .iter()
            .filter_map(|&t| nearest_stalk_distance(t, &state.cells.stalks, NEAREST_STALKS))
            .collect();
        let visited = || self.visited.iter().enumerate().filter(|(_, &v)| v).map(|(idx, _)| idx);
        let min_over = |f: &ScalarField<T>| visited().map(|idx| f.values()[idx].as_f64()).reduce(f64::min);
        let drop_over = |f0: &ScalarField<T>, f: &ScalarField<T>| {
            visited().map(|idx| (f0.values()[idx] - f.values()[idx]).as_f64()).reduce(f64::max)
        };
        SnapshotDiagnostics {
            step: state.step,
            time_s: self.time(),
            fields,
            tip_stalk_mean_distance,
            visited_min_f_b: min_over(&state.fractions.f_b),
            visited_min_f_f: min_over(&state.fractions.f_f),
            visited_max_drop_f_b: drop_over(&self.initial_fractions.f_b, &state.fractions.f_b),
            visited_max_drop_f_f: drop_over(&self.initial_fractions.f_f, &state.fractions.f_f),
            max_cell_radius: state.cells.max_radius().as_f64(),
        }
    }

    /// Writes the current state as `step_<n>` under `output_dir`.
    pub fn write_snapshot(&self, output_dir: &Path) -> std::io::Result<()> {
        let mut fields = self.state.fields();
        if self.config.dump_rates {
            fields.extend(self.state.rates.fields());
        }
        write_snapshot(output_dir, &self.grid, self.state.step, self.time(), &fields, &self.state.cells)?;
        Ok(())
    }

    /// Runs `n_steps` steps, writing snapshots and the summary to the output
    /// directory. With `write` false nothing touches the filesystem.
    pub fn run_to_end(&mut self, write: bool) -> Result<RunSummary, EngineError> {
        let out = self.config.output_dir.clone();
        let every = self.config.snapshot_every;
        let n_steps = self.config.n_steps;
        let mut log = if write && self.config.solver_log {
            fs::create_dir_all(&out)?;
            let mut w = BufWriter::new(fs::File::create(out.join("solver_log.csv"))?);
            writeln!(w, "step,species,iterations,residual,clamped")?;
            Some(w)
        } else {
            None
        };
        let mut snapshots = Vec::new();
        if write {
            fs::create_dir_all(&out)?;
            self.write_snapshot(&out)?;
        }
        snapshots.push(self.diagnostics());
        while self.state.step < n_steps {
            let report = self.advance()?;
            let step = self.state.step;
            if let Some(w) = log.as_mut() {
                for (species, s) in Species::ALL.iter().zip(&report.solves) {
                    writeln!(w, "{step},{},{},{:e},{}", species.field_name(), s.iterations, s.residual, s.clamped)?;
                }
            }
            if step.is_multiple_of(every) || step == n_steps {
                if write {
                    self.write_snapshot(&out)?;
                }
                snapshots.push(self.diagnostics());
            }
        }
        if let Some(mut w) = log {
            w.flush()?;
        }
        let summary = RunSummary {
            build: BUILD_ID.to_string(),
            seed: self.config.seed,
            replica: self.config.replica,
            n_steps,
            snapshots,
            invariants: self.monitor.statuses().to_vec(),
            solver: self.solver.clone(),
        };
        if write {
            fs::write(out.join("summary.json"), summary.to_json() + "\n")?;
            fs::write(out.join("config.json"), self.config.to_json() + "\n")?;
        }
        Ok(summary)
    }
}

/// Runs a full simulation from a config and writes its outputs.
pub fn run(config: SimConfig) -> Result<RunSummary, EngineError> {
    Simulation::<f64>::new(config)?.run_to_end(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ReactionMode;
    use approx::assert_relative_eq;

    fn small_config() -> SimConfig {
        SimConfig { n_steps: 5, n2: 20, ..SimConfig::default() }
    }

    #[test]
    fn initial_vegf_values() {
        assert_relative_eq!(initial_vegf(Vec2::new(0.0, 0.0), 375.0), 0.1 * (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(initial_vegf(Vec2::new(0.0, 0.0), 375.0), 0.036788, max_relative = 1e-5);
        assert_eq!(initial_vegf(Vec2::new(375.0, 0.0), 375.0), 0.0);
        assert_eq!(initial_vegf(Vec2::new(300.0, 300.0), 375.0), 0.0);
    }

    #[test]
    fn initial_state_layout() {
        let sim = Simulation::<f64>::new(SimConfig::default()).unwrap();
        let s = sim.state();
        assert_eq!(s.step, 0);
        assert_eq!(s.cells.tips.len(), 2);
        assert_eq!(s.cells.stalks.len(), 200);
        for p in s.cells.positions() {
            let r = p.norm();
            assert!((325.0..=375.0).contains(&r));
            let phi = p.x.atan2(p.y);
            assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&phi));
        }
        for sp in [Species::Dll4, Species::Mmp, Species::Upa] {
            assert!(s.concentrations.get(sp).values().iter().all(|&v| v == 0.0));
        }
        assert_eq!(s.concentrations.get(Species::Vegf).at(50, 50), 0.1 * (-1.0f64).exp());
        assert!(sim.monitor().all_passed());
    }

    #[test]
    fn empty_system_is_fixed_point() {
        let config = SimConfig { n1: 0, n2: 0, n_steps: 3, ..SimConfig::default() };
        let mut sim = Simulation::<f64>::new(config).unwrap();
        let g = sim.grid().clone();
        *sim.state.concentrations.get_mut(Species::Vegf) = ScalarField::zeros(g);
        let before = sim.state().clone();
        for _ in 0..3 {
            sim.advance().unwrap();
        }
        assert_eq!(sim.state().concentrations, before.concentrations);
        assert_eq!(sim.state().fractions, before.fractions);
        assert_eq!(sim.state().step, 3);
    }

    #[test]
    fn seeds_reproduce_exactly() {
        let mut a = Simulation::<f64>::new(small_config()).unwrap();
        let mut b = Simulation::<f64>::new(small_config()).unwrap();
        for _ in 0..5 {
            a.advance().unwrap();
            b.advance().unwrap();
            assert_eq!(a.state(), b.state());
        }
    }

    #[test]
    fn short_run_keeps_invariants() {
        let config = SimConfig { reaction_mode: ReactionMode::ImplicitSinks, n_steps: 20, ..SimConfig::default() };
        let mut sim = Simulation::<f64>::new(config).unwrap();
        let summary = sim.run_to_end(false).unwrap();
        for s in &summary.invariants {
            assert!(s.passed, "{s:?}");
        }
        assert_eq!(summary.snapshots.len(), 2);
        assert_eq!(summary.snapshots[1].step, 20);
    }

    #[test]
    fn nearest_stalk_mean() {
        let stalks: Vec<Vec2<f64>> = (1..=30).map(|k| Vec2::new(k as f64, 0.0)).collect();
        let d = nearest_stalk_distance(Vec2::zero(), &stalks, 20).unwrap();
        assert_relative_eq!(d, 10.5, max_relative = 1e-15);
        assert_eq!(nearest_stalk_distance(Vec2::<f64>::zero(), &[], 20), None);
        assert_eq!(nearest_stalk_distance(Vec2::zero(), &stalks[..2], 20), Some(1.5));
    }

    #[test]
    fn f32_simulation_runs() {
        let config = SimConfig { n_steps: 3, n2: 10, linear_tol: 1e-5, h: 20.0, ..SimConfig::default() };
        let mut sim = Simulation::<f32>::new(config).unwrap();
        for _ in 0..3 {
            sim.advance().unwrap();
        }
        assert!(sim.state().cells.max_radius() <= 500.0);
    }
}
