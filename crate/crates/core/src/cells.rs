//! Tip and stalk cell motion: drift (strain energy, chemotaxis, durotaxis),
//! the radial noise profile, and the Euler–Maruyama update with containment.
//!
//! Every cell owns a ChaCha8 stream. The stream key is derived from the run
//! seed and the stream id packs `(replica << 40) | (kind << 32) | index`, so a
//! cell's noise depends only on (seed, replica, kind, index) and never on the
//! order in which cells are processed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fractions::{FractionTriple, VolumeFractions};
use crate::grid::{GradientField, GridError};
use crate::params::ModelParams;
use crate::params::Species;
use crate::protein::Concentrations;
use crate::scalar::{Real, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Tip,
    Stalk,
}

impl CellKind {
    pub fn label(self) -> &'static str {
        match self {
            CellKind::Tip => "tip",
            CellKind::Stalk => "stalk",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            CellKind::Tip => 1,
            CellKind::Stalk => 2,
        }
    }
}

/// Random stream for one cell.
pub fn cell_stream(seed: u64, replica: u32, kind: CellKind, index: usize) -> ChaCha8Rng {
    assert!(index < (1 << 32), "cell index exceeds stream id range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((replica as u64) << 40) | (kind.stream_tag() << 32) | index as u64);
    rng
}

/// Cell positions (μm) and their random streams; tips first, then stalks.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPopulation<T> {
    pub tips: Vec<Vec2<T>>,
    pub stalks: Vec<Vec2<T>>,
    streams: Vec<ChaCha8Rng>,
}

impl<T: Real> CellPopulation<T> {
    /// Population at given positions with streams derived from (seed, replica).
    pub fn from_positions(tips: Vec<Vec2<T>>, stalks: Vec<Vec2<T>>, seed: u64, replica: u32) -> Self {
        let streams = (0..tips.len())
            .map(|k| cell_stream(seed, replica, CellKind::Tip, k))
            .chain((0..stalks.len()).map(|k| cell_stream(seed, replica, CellKind::Stalk, k)))
            .collect();
        Self { tips, stalks, streams }
    }

    /// Initial draw: (r, φ) uniform on [0.65R, 0.75R] × [0, π/2],
    /// X = (r sin φ, r cos φ). Each cell draws from its own stream.
    pub fn initial(n_tips: usize, n_stalks: usize, radius: T, seed: u64, replica: u32) -> Self {
        let mut pop = Self::from_positions(vec![Vec2::zero(); n_tips], vec![Vec2::zero(); n_stalks], seed, replica);
        let lo = T::lit(0.65) * radius;
        let width = T::lit(0.1) * radius;
        for m in 0..pop.len() {
            let rng = &mut pop.streams[m];
            let r = lo + width * T::lit(rng.random::<f64>());
            let phi = T::FRAC_PI_2() * T::lit(rng.random::<f64>());
            let x = Vec2::new(r * phi.sin(), r * phi.cos());
            *pop.position_mut(m) = x;
        }
        pop
    }

    pub fn len(&self) -> usize {
        self.tips.len() + self.stalks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index → (kind, index within kind).
    pub fn identify(&self, m: usize) -> (CellKind, usize) {
        if m < self.tips.len() {
            (CellKind::Tip, m)
        } else {
            (CellKind::Stalk, m - self.tips.len())
        }
    }

    pub fn position(&self, m: usize) -> Vec2<T> {
        match self.identify(m) {
            (CellKind::Tip, k) => self.tips[k],
            (CellKind::Stalk, k) => self.stalks[k],
        }
    }

    fn position_mut(&mut self, m: usize) -> &mut Vec2<T> {
        let n_tips = self.tips.len();
        if m < n_tips {
            &mut self.tips[m]
        } else {
            &mut self.stalks[m - n_tips]
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec2<T>> + '_ {
        self.tips.iter().chain(self.stalks.iter()).copied()
    }

    /// Largest |X| over all cells.
    pub fn max_radius(&self) -> T {
        self.positions().fold(T::zero(), |m, p| m.max(p.norm()))
    }
}

/// Isotropic noise amplitude: 1/10 up to 0.9R, quarter-circle decay to zero at R.
pub fn sigma_profile<T: Real>(p: Vec2<T>, radius: T) -> T {
    let r = p.norm();
    let tenth = radius / T::lit(10.0);
    if r >= radius {
        T::zero()
    } else if r <= radius - tenth {
        T::lit(0.1)
    } else {
        let gap = tenth - (radius - r);
        (tenth * tenth - gap * gap).max(T::zero()).sqrt() / radius
    }
}

/// α₀ = b R_c³ / (F μ).
pub fn alpha0<T: Real>(params: &ModelParams<T>) -> T {
    params.b_i * params.cell_radius.powi(3) / (params.force * params.mu)
}

/// γ(f) = 0.1 b F (1 - f_E) / (ρ_B f_B + ρ_F f_F + ρ_E f_E).
pub fn chemotaxis_coefficient<T: Real>(f: FractionTriple<T>, params: &ModelParams<T>) -> T {
    let density = params.rho_b * f.b + params.rho_f * f.f + params.rho_e * f.e;
    T::lit(0.1) * params.b_i * params.force * (T::one() - f.e) / density
}

/// λ(f) = (4³ b F λ̃ / 30)(1 - f_E)(1/2 - f_E) f_E.
pub fn durotaxis_coefficient<T: Real>(f: FractionTriple<T>, params: &ModelParams<T>) -> T {
    let pre = T::lit(64.0) * params.b_i * params.force * params.lambda_tilde / T::lit(30.0);
    pre * (T::one() - f.e) * (T::lit(0.5) - f.e) * f.e
}

/// Strain energy magnitude M and unit direction z for cell `m` of `pop`.
///
/// Each other cell contributes F²/(20π²R_c⁴)(1 - f_E) exp(-d/R_c) to M and
/// the same weight times the unit vector pointing away from it to v; z = v/|v|
/// (zero when v vanishes). The cell itself is excluded; coincident cells add
/// to M but not to v. With `hertz`, the contact term
/// -(2√2/π)(max(0, R_c - d/2)/R_c)^{5/2} is added to M.
pub fn strain_energy<T: Real>(
    pop: &CellPopulation<T>,
    m: usize,
    f_e: T,
    params: &ModelParams<T>,
    hertz: bool,
) -> (T, Vec2<T>) {
    let rc = params.cell_radius;
    let weight = params.force * params.force / (T::lit(20.0) * T::PI() * T::PI() * rc.powi(4)) * (T::one() - f_e);
    let hertz_pre = T::lit(2.0) * T::SQRT_2() / T::PI();
    let x = pop.position(m);
    let mut magnitude = T::zero();
    let mut v = Vec2::zero();
    for (other, y) in pop.positions().enumerate() {
        if other == m {
            continue;
        }
        let d_vec = x - y;
        let d = d_vec.norm();
        let w = weight * (-d / rc).exp();
        magnitude = magnitude + w;
        if hertz {
            let overlap = (rc - T::lit(0.5) * d).max(T::zero()) / rc;
            magnitude = magnitude - hertz_pre * overlap.powf(T::lit(2.5));
        }
        if d > T::zero() {
            v += d_vec.scale(w / d);
        }
    }
    let len = v.norm();
    let z = if len > T::zero() { v.scale(T::one() / len) } else { Vec2::zero() };
    (magnitude, z)
}

/// Frozen fields and coefficients used to evaluate drifts during one step.
#[derive(Debug, Clone)]
pub struct DriftContext<T> {
    grad_vegf: GradientField<T>,
    grad_dll4: GradientField<T>,
    grad_solid: GradientField<T>,
    fractions: VolumeFractions<T>,
    params: ModelParams<T>,
    alpha0: T,
    cutoff: bool,
    hertz: bool,
}

impl<T: Real> DriftContext<T> {
    pub fn new(
        c: &Concentrations<T>,
        f: &VolumeFractions<T>,
        params: &ModelParams<T>,
        cutoff: bool,
        hertz: bool,
    ) -> Self {
        Self {
            grad_vegf: c.get(Species::Vegf).gradient_field(),
            grad_dll4: c.get(Species::Dll4).gradient_field(),
            grad_solid: f.solid().gradient_field(),
            fractions: f.clone(),
            params: params.clone(),
            alpha0: alpha0(params),
            cutoff,
            hertz,
        }
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    /// g = α₀ M z + γ ∇c + λ ∇f_S at the position of cell `m`, with c = c_V
    /// for tips and c_D for stalks; scaled by σ/0.1 when the cutoff is on.
    pub fn drift(&self, pop: &CellPopulation<T>, m: usize) -> Result<Vec2<T>, GridError> {
        let x = pop.position(m);
        let f = self.fractions.sample(x)?;
        let (magnitude, z) = strain_energy(pop, m, f.e, &self.params, self.hertz);
        let chem = match pop.identify(m).0 {
            CellKind::Tip => self.grad_vegf.at(x)?,
            CellKind::Stalk => self.grad_dll4.at(x)?,
        };
        let duro = self.grad_solid.at(x)?;
        let g = z.scale(self.alpha0 * magnitude)
            + chem.scale(chemotaxis_coefficient(f, &self.params))
            + duro.scale(durotaxis_coefficient(f, &self.params));
        if self.cutoff {
            let radius = self.params.domain_radius;
            Ok(g.scale(sigma_profile(x, radius) / T::lit(0.1)))
        } else {
            Ok(g)
        }
    }
}

/// Radial projection onto the closed disk, guaranteeing |X| ≤ R in floating point.
pub fn contain<T: Real>(p: Vec2<T>, radius: T) -> Vec2<T> {
    if p.norm() <= radius {
        return p;
    }
    let mut q = p.scale(radius / p.norm());
    while q.norm() > radius {
        q = q.scale(T::one() - T::epsilon());
    }
    q
}

/// X^{n+1} = X^n + g(X^n) τ + σ(X^n) √τ ξ, then projection onto |X| ≤ R.
///
/// All drifts and noise amplitudes are evaluated at the frozen positions X^n.
/// `sigma` maps a position to the isotropic noise amplitude.
pub fn em_step<T: Real, D, S>(
    pop: &CellPopulation<T>,
    drift: D,
    sigma: S,
    tau: T,
    radius: T,
) -> Result<CellPopulation<T>, GridError>
where
    D: Fn(&CellPopulation<T>, usize) -> Result<Vec2<T>, GridError>,
    S: Fn(Vec2<T>) -> T,
{
    let drifts = (0..pop.len()).map(|m| drift(pop, m)).collect::<Result<Vec<_>, _>>()?;
    let mut next = pop.clone();
    let sqrt_tau = tau.sqrt();
    for (m, g) in drifts.into_iter().enumerate() {
        let x = pop.position(m);
        let rng = &mut next.streams[m];
        let xi = Vec2::new(T::lit(rng.sample::<f64, _>(StandardNormal)), T::lit(rng.sample::<f64, _>(StandardNormal)));
        let moved = x + g.scale(tau) + xi.scale(sigma(x) * sqrt_tau);
        *next.position_mut(m) = contain(moved, radius);
    }
    Ok(next)
}
