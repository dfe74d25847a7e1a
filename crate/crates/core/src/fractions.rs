//! Volume fractions of basement membrane (f_B), extracellular fluid (f_E) and
//! fibrin matrix (f_F).
//!
//! Only f_B and f_F are integrated; f_E is always recomputed as
//! 1 - (f_B + f_F), so `(f_B + f_F) + f_E == 1` holds bit-exactly whenever
//! f_B + f_F ≤ 1.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{Grid, ScalarField};
use crate::params::ModelParams;
use crate::scalar::{Real, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum FractionError {
    #[error("negative {field} concentration {value} at node {node}")]
    NegativeConcentration { field: &'static str, node: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeFractions<T> {
    pub f_b: ScalarField<T>,
    pub f_e: ScalarField<T>,
    pub f_f: ScalarField<T>,
}

/// Fractions at a single point, (f_B, f_E, f_F).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionTriple<T> {
    pub b: T,
    pub e: T,
    pub f: T,
}

impl<T: Real> FractionTriple<T> {
    pub fn new(b: T, e: T, f: T) -> Self {
        Self { b, e, f }
    }

    /// Solid fraction f_S = f_B + f_F.
    pub fn solid(&self) -> T {
        self.b + self.f
    }
}

/// Initial fibrin profile: plateau 0.8 inside 0.7 R_f, cosine ramp to zero at R_f.
pub fn initial_fibrin<T: Real>(r: T, fibrin_radius: T) -> T {
    let inner = T::lit(0.7) * fibrin_radius;
    if r <= inner {
        T::lit(0.8)
    } else if r < fibrin_radius {
        let arg = T::PI() / (T::lit(0.3) * fibrin_radius) * (fibrin_radius - r);
        T::lit(0.4) * (T::one() - arg.cos())
    } else {
        T::zero()
    }
}

impl<T: Real> VolumeFractions<T> {
    /// Builds the triple from f_B and f_F, deriving f_E.
    pub fn from_solid(f_b: ScalarField<T>, f_f: ScalarField<T>) -> Self {
        let mut f_e = f_b.clone();
        for (idx, v) in f_e.values_mut().iter_mut().enumerate() {
            if f_b.grid().is_active(idx) {
                *v = T::one() - (f_b.values()[idx] + f_f.values()[idx]);
            }
        }
        Self { f_b, f_e, f_f }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.f_b.grid()
    }

    /// f_S = f_B + f_F as a field.
    pub fn solid(&self) -> ScalarField<T> {
        self.f_b.axpby(T::one(), &self.f_f, T::one()).expect("fraction fields share a grid")
    }

    pub fn at_node(&self, idx: usize) -> FractionTriple<T> {
        FractionTriple::new(self.f_b.values()[idx], self.f_e.values()[idx], self.f_f.values()[idx])
    }

    /// Bilinear sample of the three fractions at an off-grid point.
    pub fn sample(&self, p: Vec2<T>) -> Result<FractionTriple<T>, crate::grid::GridError> {
        Ok(FractionTriple::new(self.f_b.interpolate_at(p)?, self.f_e.interpolate_at(p)?, self.f_f.interpolate_at(p)?))
    }
}

pub fn init_fractions<T: Real>(grid: Arc<Grid<T>>, params: &ModelParams<T>) -> VolumeFractions<T> {
    let rf = params.fibrin_radius;
    let f_f = ScalarField::from_fn(grid, |p| initial_fibrin(p.norm(), rf));
    let f_b = f_f.map(|v| T::lit(0.2) * v);
    VolumeFractions::from_solid(f_b, f_f)
}

fn check_nonnegative<T: Real>(field: &ScalarField<T>, name: &'static str) -> Result<(), FractionError> {
    match field.active_values().find(|&(_, v)| !(v >= T::zero())) {
        Some((node, value)) => Err(FractionError::NegativeConcentration { field: name, node, value: value.as_f64() }),
        None => Ok(()),
    }
}

/// f^{n+1} = f^n exp(-s τ/2 (c^n + c^{n+1})) for f_B (driven by c_M) and f_F
/// (driven by c_U).
pub fn step_fractions<T: Real>(
    f: &VolumeFractions<T>,
    c_m_old: &ScalarField<T>,
    c_m_new: &ScalarField<T>,
    c_u_old: &ScalarField<T>,
    c_u_new: &ScalarField<T>,
    params: &ModelParams<T>,
    tau: T,
) -> Result<VolumeFractions<T>, FractionError> {
    for c in [c_m_old, c_m_new, c_u_old, c_u_new] {
        if !c.same_grid(&f.f_b) {
            return Err(FractionError::GridMismatch);
        }
    }
    check_nonnegative(c_m_old, "c_M")?;
    check_nonnegative(c_m_new, "c_M")?;
    check_nonnegative(c_u_old, "c_U")?;
    check_nonnegative(c_u_new, "c_U")?;

    let half_tau = tau / T::lit(2.0);
    let decay = |old: &ScalarField<T>, new: &ScalarField<T>, frac: &ScalarField<T>, rate: T| {
        let mut out = frac.clone();
        for (idx, v) in out.values_mut().iter_mut().enumerate() {
            if frac.grid().is_active(idx) {
                let integral = half_tau * (old.values()[idx] + new.values()[idx]);
                *v = *v * (-rate * integral).exp();
            }
        }
        out
    };
    let f_b = decay(c_m_old, c_m_new, &f.f_b, params.s_b);
    let f_f = decay(c_u_old, c_u_new, &f.f_f, params.s_f);
    Ok(VolumeFractions::from_solid(f_b, f_f))
}
