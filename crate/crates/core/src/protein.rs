//! Semi-implicit step for the four protein concentrations.
//!
//! Diffusion is implicit at n+1 with face diffusivities frozen at time n
//! (arithmetic mean of the mixing-rule values at the two nodes). Faces that
//! join an active node to an inactive one carry no flux, which is the no-flux
//! boundary on the disk. The resulting matrix is symmetric, has a positive
//! diagonal, nonpositive off-diagonals and is strictly diagonally dominant,
//! so it is an SPD M-matrix.

use std::sync::Arc;

use thiserror::Error;

use crate::fractions::{FractionTriple, VolumeFractions};
use crate::grid::{Grid, ScalarField};
use crate::params::{ModelParams, ReactionMode, Species};
use crate::scalar::Real;
use crate::sources::RateFields;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("input fields live on different grids")]
    GridMismatch,
    #[error("non-finite value in {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },
    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// D_j(f) = D_j^B f_B + D_j^E f_E + D_j^F f_F.
pub fn mix_diffusivity<T: Real>(f: FractionTriple<T>, species: Species, params: &ModelParams<T>) -> T {
    let d = params.diffusivities(species);
    d.b * f.b + d.e * f.e + d.f * f.f
}

/// Symmetric five-diagonal system over all n×n grid nodes. Inactive nodes
/// carry identity rows with zero right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct PentaSystem<T> {
    n: usize,
    /// Main diagonal.
    pub diag: Vec<T>,
    /// Coupling between node p and p + 1 (same row); zero at row ends.
    pub east: Vec<T>,
    /// Coupling between node p and p + n.
    pub south: Vec<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> PentaSystem<T> {
    /// Identity matrix with the given right-hand side on an n×n layout.
    pub fn identity(n: usize, rhs: Vec<T>) -> Self {
        assert_eq!(rhs.len(), n * n);
        Self { n, diag: vec![T::one(); n * n], east: vec![T::zero(); n * n], south: vec![T::zero(); n * n], rhs }
    }

    /// Points per axis of the underlying layout.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// y = A x.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.n;
        let len = self.len();
        for p in 0..len {
            let mut acc = self.diag[p] * x[p];
            if p + 1 < len {
                acc = acc + self.east[p] * x[p + 1];
            }
            if p >= 1 {
                acc = acc + self.east[p - 1] * x[p - 1];
            }
            if p + n < len {
                acc = acc + self.south[p] * x[p + n];
            }
            if p >= n {
                acc = acc + self.south[p - n] * x[p - n];
            }
            y[p] = acc;
        }
    }

    /// Dense copy, row-major. Only for small systems.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let len = self.len();
        let mut a = vec![vec![T::zero(); len]; len];
        for p in 0..len {
            a[p][p] = self.diag[p];
            if p + 1 < len {
                a[p][p + 1] = self.east[p];
                a[p + 1][p] = self.east[p];
            }
            if p + self.n < len {
                a[p][p + self.n] = self.south[p];
                a[p + self.n][p] = self.south[p];
            }
        }
        a
    }

    /// Relative residual ‖b - A x‖ / ‖b‖ (absolute when b = 0).
    pub fn relative_residual(&self, x: &[T]) -> T {
        let mut ax = vec![T::zero(); self.len()];
        self.apply(x, &mut ax);
        let r = ax.iter().zip(&self.rhs).map(|(&a, &b)| (b - a) * (b - a)).sum::<T>().sqrt();
        let b = dot(&self.rhs, &self.rhs).sqrt();
        if b > T::zero() {
            r / b
        } else {
            r
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Builds I + τ(-div D ∇) + τ diag(sink) with rhs `rhs`, from node
/// diffusivities. `sink` may be absent.
pub fn assemble_diffusion<T: Real>(
    grid: &Grid<T>,
    diffusivity: &[T],
    sink: Option<&[T]>,
    rhs: Vec<T>,
    tau: T,
) -> PentaSystem<T> {
    let n = grid.n();
    let len = grid.len();
    let scale = tau / (grid.h() * grid.h());
    let half = T::lit(0.5);
    let mut sys =
        PentaSystem { n, diag: vec![T::one(); len], east: vec![T::zero(); len], south: vec![T::zero(); len], rhs };
    for i in 0..n {
        for j in 0..n {
            let p = grid.index(i, j);
            if !grid.is_active(p) {
                sys.rhs[p] = T::zero();
                continue;
            }
            if j + 1 < n && grid.is_active(p + 1) {
                let w = scale * half * (diffusivity[p] + diffusivity[p + 1]);
                sys.east[p] = -w;
                sys.diag[p] = sys.diag[p] + w;
                sys.diag[p + 1] = sys.diag[p + 1] + w;
            }
            if i + 1 < n && grid.is_active(p + n) {
                let w = scale * half * (diffusivity[p] + diffusivity[p + n]);
                sys.south[p] = -w;
                sys.diag[p] = sys.diag[p] + w;
                sys.diag[p + n] = sys.diag[p + n] + w;
            }
            if let Some(s) = sink {
                sys.diag[p] = sys.diag[p] + tau * s[p];
            }
        }
    }
    sys
}

/// Assembles the linear system for one species.
///
/// `c_old` is the species field at time n, `c_v_old` the VEGF field at time n
/// (drives the production terms of DLL4, MMP and uPA).
#[allow(clippy::too_many_arguments)]
pub fn assemble_system<T: Real>(
    species: Species,
    c_old: &ScalarField<T>,
    c_v_old: &ScalarField<T>,
    f_old: &VolumeFractions<T>,
    rates: &RateFields<T>,
    mode: ReactionMode,
    tau: T,
    params: &ModelParams<T>,
) -> Result<PentaSystem<T>, SolverError> {
    let inputs: [(&'static str, &ScalarField<T>); 10] = [
        ("concentration", c_old),
        ("c_V", c_v_old),
        ("f_B", &f_old.f_b),
        ("f_E", &f_old.f_e),
        ("f_F", &f_old.f_f),
        ("alpha_V", &rates.alpha_v),
        ("alpha_D", &rates.alpha_d),
        ("alpha_M", &rates.alpha_m),
        ("alpha_U", &rates.alpha_u),
        ("beta_D", &rates.beta_d),
    ];
    for (what, field) in inputs {
        if !field.same_grid(c_old) {
            return Err(SolverError::GridMismatch);
        }
        if let Some((node, _)) = field.active_values().find(|(_, v)| !v.is_finite()) {
            return Err(SolverError::NonFinite { what, node });
        }
    }

    let grid = c_old.grid();
    let len = grid.len();
    let c = c_old.values();
    let cv = c_v_old.values();
    let mut diffusivity = vec![T::zero(); len];
    let mut sink = vec![T::zero(); len];
    let mut production = vec![T::zero(); len];
    for p in 0..len {
        if !grid.is_active(p) {
            continue;
        }
        diffusivity[p] = mix_diffusivity(f_old.at_node(p), species, params);
        let (s, q) = match species {
            Species::Vegf => (rates.alpha_v.values()[p], T::zero()),
            Species::Dll4 => (rates.beta_d.values()[p], rates.alpha_d.values()[p] * cv[p]),
            Species::Mmp => (params.s_m * f_old.f_b.values()[p], rates.alpha_m.values()[p] * cv[p]),
            Species::Upa => (params.s_u * f_old.f_f.values()[p], rates.alpha_u.values()[p] * cv[p]),
        };
        sink[p] = s;
        production[p] = q;
    }

    let mut rhs = vec![T::zero(); len];
    for p in 0..len {
        if grid.is_active(p) {
            rhs[p] = match mode {
                ReactionMode::Explicit => c[p] + tau * (production[p] - sink[p] * c[p]),
                ReactionMode::ImplicitSinks => c[p] + tau * production[p],
            };
        }
    }
    let implicit_sink = matches!(mode, ReactionMode::ImplicitSinks).then_some(sink.as_slice());
    Ok(assemble_diffusion(grid, &diffusivity, implicit_sink, rhs, tau))
}

/// Outcome of one linear solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// True relative residual of the returned iterate.
    pub residual: f64,
    /// Nodes moved by [`project_to_bounds`] after the solve.
    pub clamped: usize,
}

/// Jacobi-preconditioned conjugate gradients, starting from the right-hand
/// side. All reductions run in index order, so the iterate sequence is
/// deterministic.
pub fn solve_system<T: Real>(
    sys: &PentaSystem<T>,
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, SolveStats), SolverError> {
    let len = sys.len();
    let b_norm = dot(&sys.rhs, &sys.rhs).sqrt();
    if b_norm == T::zero() {
        return Ok((vec![T::zero(); len], SolveStats { iterations: 0, residual: 0.0, clamped: 0 }));
    }
    let inv_diag: Vec<T> = sys.diag.iter().map(|&d| T::one() / d).collect();
    let mut x = sys.rhs.clone();
    let mut r = vec![T::zero(); len];
    let mut z = vec![T::zero(); len];
    let mut p = vec![T::zero(); len];
    let mut ap = vec![T::zero(); len];
    let mut iterations = 0;

    // Outer loop restarts from the true residual if the recursive one drifted.
    loop {
        sys.apply(&x, &mut ap);
        for m in 0..len {
            r[m] = sys.rhs[m] - ap[m];
        }
        let mut r_norm = dot(&r, &r).sqrt();
        if r_norm <= tol * b_norm {
            return Ok((x, SolveStats { iterations, residual: (r_norm / b_norm).as_f64(), clamped: 0 }));
        }
        if iterations >= max_iter {
            return Err(SolverError::NotConverged { iterations, residual: (r_norm / b_norm).as_f64() });
        }
        for m in 0..len {
            z[m] = inv_diag[m] * r[m];
            p[m] = z[m];
        }
        let mut rz = dot(&r, &z);
        let restart_at = iterations;
        while iterations < max_iter {
            sys.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            for m in 0..len {
                x[m] = x[m] + alpha * p[m];
                r[m] = r[m] - alpha * ap[m];
            }
            iterations += 1;
            r_norm = dot(&r, &r).sqrt();
            if r_norm <= tol * b_norm {
                break;
            }
            for m in 0..len {
                z[m] = inv_diag[m] * r[m];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for m in 0..len {
                p[m] = z[m] + beta * p[m];
            }
        }
        if iterations >= max_iter || iterations == restart_at {
            let residual = sys.relative_residual(&x);
            if residual <= tol {
                return Ok((x, SolveStats { iterations, residual: residual.as_f64(), clamped: 0 }));
            }
            return Err(SolverError::NotConverged { iterations, residual: residual.as_f64() });
        }
    }
}

/// Clamps a solution of an assembled step system into [0, max b].
///
/// Every assembled matrix is an M-matrix with row sums ≥ 1, so for a
/// nonnegative right-hand side the exact solution satisfies
/// 0 ≤ x ≤ max b componentwise. Clamping into that box can only move an
/// iterate closer to the exact solution at every node; it removes sign and
/// overshoot noise left by the iterative solve. Values below the smallest
/// normal float are flushed to zero. Returns the number of clamped nodes, or
/// `None` when b has a negative entry and no bound applies.
pub fn project_to_bounds<T: Real>(sys: &PentaSystem<T>, x: &mut [T]) -> Option<usize> {
    if sys.rhs.iter().any(|&b| b < T::zero()) {
        return None;
    }
    let upper = sys.rhs.iter().fold(T::zero(), |m, &b| m.max(b));
    let mut clamped = 0;
    for v in x.iter_mut() {
        if *v < T::min_positive_value() {
            if *v < T::zero() {
                clamped += 1;
            }
            *v = T::zero();
        } else if *v > upper {
            *v = upper;
            clamped += 1;
        }
    }
    Some(clamped)
}

/// c_V, c_D, c_M, c_U on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Concentrations<T> {
    fields: [ScalarField<T>; 4],
}

impl<T: Real> Concentrations<T> {
    pub fn new(c_v: ScalarField<T>, c_d: ScalarField<T>, c_m: ScalarField<T>, c_u: ScalarField<T>) -> Self {
        Self { fields: [c_v, c_d, c_m, c_u] }
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let z = ScalarField::zeros(grid);
        Self::new(z.clone(), z.clone(), z.clone(), z)
    }

    pub fn get(&self, species: Species) -> &ScalarField<T> {
        &self.fields[species.index()]
    }

    pub fn get_mut(&mut self, species: Species) -> &mut ScalarField<T> {
        &mut self.fields[species.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Species, &ScalarField<T>)> {
        Species::ALL.into_iter().zip(self.fields.iter())
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.fields[0].grid()
    }
}

/// Linear-solver and reaction settings for a concentration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings<T> {
    pub mode: ReactionMode,
    pub tau: T,
    pub tol: T,
    pub max_iter: usize,
}

/// A node left negative by an explicit-reaction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeNode {
    pub species: Species,
    pub node: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Solve statistics in species order V, D, M, U.
    pub solves: [SolveStats; 4],
    pub negative: Vec<NegativeNode>,
}

fn step_species<T: Real>(
    species: Species,
    c_old: &Concentrations<T>,
    f_old: &VolumeFractions<T>,
    rates: &RateFields<T>,
    settings: &StepSettings<T>,
    params: &ModelParams<T>,
) -> Result<(ScalarField<T>, SolveStats), SolverError> {
    let sys = assemble_system(
        species,
        c_old.get(species),
        c_old.get(Species::Vegf),
        f_old,
        rates,
        settings.mode,
        settings.tau,
        params,
    )?;
    let (mut x, mut stats) = solve_system(&sys, settings.tol, settings.max_iter)?;
    stats.clamped = project_to_bounds(&sys, &mut x).unwrap_or(0);
    let field = ScalarField::from_values(c_old.grid().clone(), x).map_err(|_| SolverError::GridMismatch)?;
    Ok((field, stats))
}

/// Advances all four species by one step. The species are independent within
/// a step (productions use c_V at time n), so they are solved concurrently.
pub fn step_concentrations<T: Real>(
    c_old: &Concentrations<T>,
    f_old: &VolumeFractions<T>,
    rates: &RateFields<T>,
    settings: &StepSettings<T>,
    params: &ModelParams<T>,
) -> Result<(Concentrations<T>, StepReport), SolverError> {
    let results: Vec<Result<(ScalarField<T>, SolveStats), SolverError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = Species::ALL
            .into_iter()
            .map(|s| scope.spawn(move || step_species(s, c_old, f_old, rates, settings, params)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("species solve panicked")).collect()
    });

    let mut fields = Vec::with_capacity(4);
    let mut solves = [SolveStats { iterations: 0, residual: 0.0, clamped: 0 }; 4];
    for (m, res) in results.into_iter().enumerate() {
        let (field, stats) = res?;
        solves[m] = stats;
        fields.push(field);
    }
    let mut negative = Vec::new();
    for (species, field) in Species::ALL.into_iter().zip(&fields) {
        for (node, v) in field.active_values() {
            if v < T::zero() {
                negative.push(NegativeNode { species, node, value: v.as_f64() });
            }
        }
    }
    if let Some(first) = negative.first() {
        log::warn!(
            "{} negative concentration value(s) after step; first: {} = {:e} at node {}",
            negative.len(),
            first.species.field_name(),
            first.value,
            first.node
        );
    }
    let mut it = fields.into_iter();
    let next = Concentrations::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok((next, StepReport { solves, negative }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractions::init_fractions;
    use crate::params::default_params;
    use crate::scalar::Vec2;
    use crate::sources::assemble_rates;
    use approx::assert_relative_eq;

    fn setup() -> (Arc<Grid<f64>>, ModelParams<f64>) {
        (Arc::new(Grid::disk(10.0, 50)), default_params())
    }

    fn uniform_fractions(g: &Arc<Grid<f64>>, b: f64, f: f64) -> VolumeFractions<f64> {
        VolumeFractions::from_solid(ScalarField::constant(g.clone(), b), ScalarField::constant(g.clone(), f))
    }

    #[test]
    fn mixing_rule_values() {
        let p = default_params();
        assert_eq!(mix_diffusivity(FractionTriple::new(1.0, 0.0, 0.0), Species::Vegf, &p), 100.0);
        assert_eq!(mix_diffusivity(FractionTriple::new(0.0, 1.0, 0.0), Species::Vegf, &p), 10.0);
        let third = 1.0 / 3.0;
        let d = mix_diffusivity(FractionTriple::new(third, third, third), Species::Upa, &p);
        assert_relative_eq!(d, (0.53 + 0.053 + 1.06) / 3.0, max_relative = 1e-15);
        assert_relative_eq!(d, 0.5477, max_relative = 1e-4);
    }

    #[test]
    fn constant_coefficient_limit_is_five_point_laplacian() {
        let (g, p) = setup();
        let f = uniform_fractions(&g, 1.0, 0.0);
        let z = ScalarField::zeros(g.clone());
        let rates = RateFields::zeros(g.clone());
        let sys = assemble_system(Species::Vegf, &z, &z, &f, &rates, ReactionMode::Explicit, 1.0, &p).unwrap();
        let w = 1.0 * 100.0 / 100.0;
        let c = g.index(50, 50);
        assert_eq!(sys.diag[c], 1.0 + 4.0 * w);
        assert_eq!(sys.east[c], -w);
        assert_eq!(sys.south[c], -w);
        // Rim node (0, 50) = (500, 0) has a single active neighbour.
        let b = g.index(0, 50);
        assert_eq!(sys.diag[b], 1.0 + w);
        // (5, 30) = (450, 200) misses only its +x neighbour.
        assert_eq!(sys.diag[g.index(5, 30)], 1.0 + 3.0 * w);
        // Inactive corner: identity row.
        assert_eq!(sys.diag[0], 1.0);
        assert_eq!((sys.east[0], sys.south[0]), (0.0, 0.0));
    }

    #[test]
    fn diffusion_rows_sum_to_one() {
        let (g, p) = setup();
        let f = init_fractions(g.clone(), &p);
        let z = ScalarField::zeros(g.clone());
        let rates = RateFields::zeros(g.clone());
        let sys = assemble_system(Species::Mmp, &z, &z, &f, &rates, ReactionMode::Explicit, 1.0, &p).unwrap();
        let ones = vec![1.0; g.len()];
        let mut y = vec![0.0; g.len()];
        sys.apply(&ones, &mut y);
        for (idx, _) in z.active_values() {
            // Explicit mode keeps the s_M f_B sink off the diagonal.
            assert!((y[idx] - 1.0).abs() < 1e-15);
        }
        for idx in 0..g.len() {
            assert!(sys.east[idx] <= 0.0 && sys.south[idx] <= 0.0);
        }
    }

    #[test]
    fn implicit_sink_adds_to_diagonal() {
        let (g, p) = setup();
        let f = init_fractions(g.clone(), &p);
        let z = ScalarField::zeros(g.clone());
        let mut rates = RateFields::zeros(g.clone());
        rates.alpha_v.set(30, 60, 0.37);
        let ex = assemble_system(Species::Vegf, &z, &z, &f, &rates, ReactionMode::Explicit, 2.0, &p).unwrap();
        let im = assemble_system(Species::Vegf, &z, &z, &f, &rates, ReactionMode::ImplicitSinks, 2.0, &p).unwrap();
        let idx = g.index(30, 60);
        assert_relative_eq!(im.diag[idx] - ex.diag[idx], 2.0 * 0.37, max_relative = 1e-14);
        for m in 0..g.len() {
            if m != idx {
                assert_eq!(im.diag[m], ex.diag[m]);
            }
        }
    }

    #[test]
    fn rhs_carries_reactions() {
        let (g, p) = setup();
        let f = init_fractions(g.clone(), &p);
        let cv = ScalarField::constant(g.clone(), 0.5);
        let cd = ScalarField::constant(g.clone(), 0.2);
        let rates = assemble_rates(&[Vec2::new(0.0, 0.0)], &[Vec2::new(0.0, 0.0)], &p, &g).unwrap();
        let idx = g.index(50, 50);
        let ex = assemble_system(Species::Dll4, &cd, &cv, &f, &rates, ReactionMode::Explicit, 1.0, &p).unwrap();
        let a = rates.alpha_d.values()[idx];
        let b = rates.beta_d.values()[idx];
        assert_eq!(ex.rhs[idx], 0.2 + (a * 0.5 - b * 0.2));
        let im = assemble_system(Species::Dll4, &cd, &cv, &f, &rates, ReactionMode::ImplicitSinks, 1.0, &p).unwrap();
        assert_eq!(im.rhs[idx], 0.2 + a * 0.5);
    }

    #[test]
    fn nan_and_mismatch_rejected() {
        let (g, p) = setup();
        let f = init_fractions(g.clone(), &p);
        let mut c = ScalarField::zeros(g.clone());
        c.set(50, 50, f64::NAN);
        let rates = RateFields::zeros(g.clone());
        let err = assemble_system(Species::Vegf, &c, &c, &f, &rates, ReactionMode::Explicit, 1.0, &p).unwrap_err();
        assert!(matches!(err, SolverError::NonFinite { .. }));
        let other = ScalarField::zeros(Arc::new(Grid::disk(20.0, 25)));
        let err =
            assemble_system(Species::Vegf, &other, &other, &f, &rates, ReactionMode::Explicit, 1.0, &p).unwrap_err();
        assert_eq!(err, SolverError::GridMismatch);
    }

    #[test]
    fn identity_solve_is_immediate() {
        let rhs: Vec<f64> = (0..25).map(|m| m as f64 * 0.1 - 1.0).collect();
        let sys = PentaSystem::identity(5, rhs.clone());
        let (x, stats) = solve_system(&sys, 1e-12, 10).unwrap();
        assert!(stats.iterations <= 1);
        assert_eq!(x, rhs);
    }

    #[test]
    fn non_convergence_reported() {
        let (g, p) = setup();
        let f = uniform_fractions(&g, 0.0, 1.0);
        let c = ScalarField::from_fn(g.clone(), |x| (x.x * 0.02).cos());
        let rates = RateFields::zeros(g.clone());
        let sys = assemble_system(Species::Vegf, &c, &c, &f, &rates, ReactionMode::Explicit, 50.0, &p).unwrap();
        assert!(matches!(solve_system(&sys, 1e-12, 3), Err(SolverError::NotConverged { iterations: 3, .. })));
    }

    #[test]
    fn constant_field_is_stationary() {
        let (g, p) = setup();
        let f = init_fractions(g.clone(), &p);
        let c = Concentrations::new(
            ScalarField::constant(g.clone(), 0.25),
            ScalarField::zeros(g.clone()),
            ScalarField::zeros(g.clone()),
            ScalarField::zeros(g.clone()),
        );
        let rates = RateFields::zeros(g.clone());
        let settings = StepSettings { mode: ReactionMode::Explicit, tau: 1.0, tol: 1e-10, max_iter: 1000 };
        let (next, report) = step_concentrations(&c, &f, &rates, &settings, &p).unwrap();
        for (idx, v) in next.get(Species::Vegf).active_values() {
            assert!((v - 0.25).abs() < 1e-14, "node {idx}: {v}");
        }
        assert!(next.get(Species::Dll4).values().iter().all(|&v| v == 0.0));
        assert!(report.negative.is_empty());
    }
}
