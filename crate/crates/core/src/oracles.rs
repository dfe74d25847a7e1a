//! Independent reference computations: analytic solutions, brute-force
//! solvers and Monte-Carlo estimators used to check the production kernels.
//!
//! Everything here is single-threaded and written for clarity, not speed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cells::{em_step, CellPopulation};
use crate::fractions::{step_fractions, VolumeFractions};
use crate::grid::{Grid, ScalarField};
use crate::params::default_params;
use crate::protein::{assemble_diffusion, project_to_bounds, solve_system, PentaSystem, SolverError};
use crate::scalar::Vec2;
use crate::sources::{bump_normalizer_with_tol, deposit, MollifierPotential, NORMALIZER_TOL};

/// Errors at a ladder of resolutions plus the least-squares observed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    /// Grid spacing or time step, coarse to fine.
    pub resolutions: Vec<f64>,
    pub errors: Vec<f64>,
    /// Slope of log(error) against log(resolution); `None` if any error is zero.
    pub order: Option<f64>,
}

impl ConvergenceReport {
    pub fn new(label: impl Into<String>, resolutions: Vec<f64>, errors: Vec<f64>) -> Self {
        let order = fit_order(&resolutions, &errors);
        Self { label: label.into(), resolutions, errors, order }
    }

    /// Aligned text table.
    pub fn table(&self) -> String {
        let mut s = format!("# {}\n{:>14} {:>14}\n", self.label, "resolution", "error");
        for (r, e) in self.resolutions.iter().zip(&self.errors) {
            s.push_str(&format!("{r:>14.6e} {e:>14.6e}\n"));
        }
        match self.order {
            Some(p) => s.push_str(&format!("observed order {p:.4}\n")),
            None => s.push_str("observed order n/a (zero error)\n"),
        }
        s
    }
}

/// Least-squares slope of log e against log r.
pub fn fit_order(resolutions: &[f64], errors: &[f64]) -> Option<f64> {
    if resolutions.len() < 2 || errors.iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = resolutions.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// E₁(x) for x > 0 from its convergent power series.
pub fn exp_integral_e1(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Closed form of the bump normalizer: π(e⁻¹ - E₁(1)).
pub fn bump_normalizer_closed_form() -> f64 {
    std::f64::consts::PI * ((-1.0f64).exp() - exp_integral_e1(1.0))
}

/// Change of the quadrature value when the requested tolerance is tightened
/// a hundredfold.
pub fn bump_normalizer_refinement_change() -> f64 {
    (bump_normalizer_with_tol(NORMALIZER_TOL) - bump_normalizer_with_tol(NORMALIZER_TOL * 1e-2)).abs()
}

/// u = cos(πx'/L) cos(πy'/L) exp(-2D(π/L)² t) + 1 on a full square grid.
///
/// Nodes are cell centres of a finite-volume partition, so the zero-flux
/// walls sit half a cell outside the outermost nodes: L = n h and
/// x' = x + k h + h/2 ∈ (0, L).
pub fn analytic_heat_mode(grid: &Arc<Grid<f64>>, diffusivity: f64, t: f64) -> ScalarField<f64> {
    let h = grid.h();
    let l = grid.n() as f64 * h;
    let shift = grid.half_width() as f64 * h + 0.5 * h;
    let k = std::f64::consts::PI / l;
    let amp = (-2.0 * diffusivity * k * k * t).exp();
    ScalarField::from_fn(grid.clone(), |p| (k * (p.x + shift)).cos() * (k * (p.y + shift)).cos() * amp + 1.0)
}

/// Integrates pure diffusion with the production step kernel and returns the
/// max-node error against [`analytic_heat_mode`] at `t_end`.
pub fn diffusion_error(h: f64, half_width: usize, diffusivity: f64, tau: f64, t_end: f64) -> Result<f64, SolverError> {
    let grid = Arc::new(Grid::square(h, half_width));
    let steps = (t_end / tau).round() as usize;
    let d = vec![diffusivity; grid.len()];
    let mut u = analytic_heat_mode(&grid, diffusivity, 0.0).values().to_vec();
    for _ in 0..steps {
        let sys = assemble_diffusion(&grid, &d, None, u, tau);
        let (mut x, _) = solve_system(&sys, 1e-13, 100_000)?;
        project_to_bounds(&sys, &mut x);
        u = x;
    }
    let exact = analytic_heat_mode(&grid, diffusivity, steps as f64 * tau);
    Ok(u.iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Spatial study: h ∈ {20, 10, 5} on a square of half-side 200 µm, with
/// τ ∝ h² so the O(τ) time error shrinks at the spatial rate.
pub fn spatial_convergence() -> Result<ConvergenceReport, SolverError> {
    let (diffusivity, half_side, t_end) = (400.0, 200.0, 20.0);
    let hs = [20.0, 10.0, 5.0];
    let mut errors = Vec::new();
    for &h in &hs {
        let tau = h * h / 400.0;
        errors.push(diffusion_error(h, (half_side / h) as usize, diffusivity, tau, t_end)?);
    }
    Ok(ConvergenceReport::new("diffusion, space (tau = h^2/400)", hs.to_vec(), errors))
}

/// Temporal study: τ ∈ {4, 2, 1} at h = 5, where the spatial error is three
/// orders of magnitude below the time error.
pub fn temporal_convergence() -> Result<ConvergenceReport, SolverError> {
    let (diffusivity, h, t_end) = (400.0, 5.0, 100.0);
    let taus = [4.0, 2.0, 1.0];
    let mut errors = Vec::new();
    for &tau in &taus {
        errors.push(diffusion_error(h, 40, diffusivity, tau, t_end)?);
    }
    Ok(ConvergenceReport::new("diffusion, time (h = 5)", taus.to_vec(), errors))
}

/// Dense Gaussian elimination with partial pivoting on the expanded system.
pub fn dense_solve_oracle(sys: &PentaSystem<f64>) -> Option<Vec<f64>> {
    dense_solve(sys.to_dense(), sys.rhs.clone())
}

#[allow(clippy::needless_range_loop)]
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// A random step system: disk or square grid with n ≤ 19 (≤ 361 unknowns),
/// log-uniform node diffusivities over the phase range, random τ, sinks and
/// nonnegative right-hand side.
pub fn random_step_system(seed: u64) -> PentaSystem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(3..=9);
    let h = [2.5, 5.0, 10.0][rng.random_range(0..3)];
    let grid = if rng.random_bool(0.5) { Grid::disk(h, k) } else { Grid::square(h, k) };
    let len = grid.len();
    let d: Vec<f64> = (0..len).map(|_| 10f64.powf(rng.random_range(-1.5..2.5))).collect();
    let sink: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..0.1)).collect();
    let rhs: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
    let tau = rng.random_range(0.1..4.0);
    assemble_diffusion(&grid, &d, Some(&sink), rhs, tau)
}

/// Max relative discrepancy between the CG solve and dense elimination over
/// `count` random systems.
pub fn solver_discrepancy(count: u64, tol: f64) -> Result<f64, SolverError> {
    let mut worst: f64 = 0.0;
    for seed in 0..count {
        let sys = random_step_system(seed);
        let (x, _) = solve_system(&sys, tol, 100_000)?;
        let y = dense_solve_oracle(&sys).expect("nonsingular step system");
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(if scale > 0.0 { diff / scale } else { diff });
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub target: f64,
}

impl MomentEstimate {
    /// |mean - target| in units of the standard error.
    pub fn z_score(&self) -> f64 {
        if self.standard_error == 0.0 {
            if self.mean == self.target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - self.target).abs() / self.standard_error
        }
    }
}

/// Sample mean of |X_m - X_0|² over `n_paths` zero-drift paths with constant
/// noise amplitude, stepped by the production Euler–Maruyama kernel.
pub fn brownian_moment_oracle(sigma: f64, tau: f64, m_steps: usize, n_paths: usize, seed: u64) -> MomentEstimate {
    let radius = 1e12;
    let mut pop = CellPopulation::from_positions(Vec::new(), vec![Vec2::zero(); n_paths], seed, 0);
    for _ in 0..m_steps {
        pop = em_step(&pop, |_, _| Ok(Vec2::zero()), |_| sigma, tau, radius).expect("zero drift cannot fail");
    }
    let sq: Vec<f64> = pop.stalks.iter().map(|p| p.norm_sq()).collect();
    let n = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / n;
    let var = sq.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MomentEstimate { mean, standard_error: (var / n).sqrt(), target: 2.0 * sigma * sigma * m_steps as f64 * tau }
}

/// Steps one node of f_B with the production trapezoid update under a
/// prescribed c(t) and compares with f₀ exp(-s ∫₀ᵀ c). Errors are relative.
pub fn ode_trapezoid_oracle(
    c: impl Fn(f64) -> f64,
    c_antiderivative: impl Fn(f64) -> f64,
    s: f64,
    t_end: f64,
    taus: &[f64],
) -> ConvergenceReport {
    let grid = Arc::new(Grid::square(1.0, 1));
    let mut params = default_params();
    params.s_b = s;
    params.s_f = s;
    let f0 = 0.5;
    let exact = f0 * (-s * (c_antiderivative(t_end) - c_antiderivative(0.0))).exp();
    let mut errors = Vec::new();
    for &tau in taus {
        let steps = (t_end / tau).round() as usize;
        let mut f = VolumeFractions::from_solid(
            ScalarField::constant(grid.clone(), f0),
            ScalarField::constant(grid.clone(), 0.0),
        );
        for n in 0..steps {
            let old = ScalarField::constant(grid.clone(), c(n as f64 * tau));
            let new = ScalarField::constant(grid.clone(), c((n + 1) as f64 * tau));
            f = step_fractions(&f, &old, &new, &old, &new, &params, tau).expect("nonnegative c");
        }
        errors.push((f.f_b.values()[0] - exact).abs() / exact);
    }
    ConvergenceReport::new("trapezoid fraction update", taus.to_vec(), errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeRow {
    pub h: f64,
    /// Grid integral with the cell on a node.
    pub integral_node: f64,
    /// Grid integral with the cell at a cell centre (h/2, h/2).
    pub integral_centre: f64,
}

impl NormalizeRow {
    pub fn error_node(&self) -> f64 {
        (self.integral_node - 1.0).abs()
    }

    pub fn error_centre(&self) -> f64 {
        (self.integral_centre - 1.0).abs()
    }
}

/// Refinement ladder for the mollifier normalization check.
pub const NORMALIZE_LADDER: [f64; 6] = [10.0, 5.0, 2.5, 1.25, 1.0, 0.5];

/// h² Σ V over the grid for a single deposited cell, on each spacing.
pub fn normalize_check(mollifier_radius: f64, hs: &[f64]) -> Vec<NormalizeRow> {
    let potential = MollifierPotential::new(mollifier_radius);
    hs.iter()
        .map(|&h| {
            let k = (mollifier_radius / h).ceil() as usize + 2;
            let grid = Arc::new(Grid::square(h, k));
            let at = |p: Vec2<f64>| deposit(&[p], &potential, &grid).expect("inside grid").integrate();
            NormalizeRow { h, integral_node: at(Vec2::zero()), integral_centre: at(Vec2::new(0.5 * h, 0.5 * h)) }
        })
        .collect()
}
