//! Smooth compactly supported source kernels and the reaction-rate fields
//! they induce around tip and stalk cells.

use std::sync::Arc;

use crate::grid::{Grid, GridError, ScalarField};
use crate::params::ModelParams;
use crate::scalar::{Real, Vec2};

/// Relative accuracy requested from [`bump_normalizer`].
pub const NORMALIZER_TOL: f64 = 1e-13;

/// I = ∫_{|u|<1} exp(-1/(1-|u|²)) du, evaluated as π ∫₀¹ e^{-1/t} dt.
pub fn bump_normalizer() -> f64 {
    bump_normalizer_with_tol(NORMALIZER_TOL)
}

pub fn bump_normalizer_with_tol(rel_tol: f64) -> f64 {
    let f = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    std::f64::consts::PI * adaptive_gauss_kronrod(&f, 0.0, 1.0, rel_tol)
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (m, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let pair = f(c - half * x) + f(c + half * x);
        kronrod += w * pair;
        if m % 2 == 1 {
            gauss += WG[m / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adaptive_gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut intervals = vec![(a, b, gk15(f, a, b))];
    for _ in 0..10_000 {
        let total: f64 = intervals.iter().map(|(_, _, (v, _))| v).sum();
        let err: f64 = intervals.iter().map(|(_, _, (_, e))| e).sum();
        if err <= rel_tol * total.abs() {
            break;
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(f, lo, mid)));
        intervals.push((mid, hi, gk15(f, mid, hi)));
    }
    intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    intervals.iter().map(|(_, _, (v, _))| v).sum()
}

/// V(x) = exp(-R_m²/(R_m² - |x|²)) / (I R_m²) for |x| < R_m, zero outside.
/// Integrates to one over the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierPotential<T> {
    radius: T,
    normalizer: T,
}

impl<T: Real> MollifierPotential<T> {
    pub fn new(radius: T) -> Self {
        Self { radius, normalizer: T::lit(bump_normalizer()) }
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn normalizer(&self) -> T {
        self.normalizer
    }

    pub fn eval(&self, p: Vec2<T>) -> T {
        let r2 = self.radius * self.radius;
        let d2 = p.norm_sq();
        if d2 >= r2 {
            return T::zero();
        }
        (-r2 / (r2 - d2)).exp() / (self.normalizer * r2)
    }
}

/// Reaction-rate fields (1/s) induced by the current cell positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFields<T> {
    /// VEGF consumption by tips, s_V α̃.
    pub alpha_v: ScalarField<T>,
    /// DLL4, MMP, uPA production by tips, r_j α̃.
    pub alpha_d: ScalarField<T>,
    pub alpha_m: ScalarField<T>,
    pub alpha_u: ScalarField<T>,
    /// DLL4 consumption by stalks, s_D β̃.
    pub beta_d: ScalarField<T>,
}

impl<T: Real> RateFields<T> {
    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let z = ScalarField::zeros(grid);
        Self { alpha_v: z.clone(), alpha_d: z.clone(), alpha_m: z.clone(), alpha_u: z.clone(), beta_d: z }
    }

    pub fn fields(&self) -> [(&'static str, &ScalarField<T>); 5] {
        [
            ("alpha_V", &self.alpha_v),
            ("alpha_D", &self.alpha_d),
            ("alpha_M", &self.alpha_m),
            ("alpha_U", &self.alpha_u),
            ("beta_D", &self.beta_d),
        ]
    }
}

fn total_order<T: Real>(a: &Vec2<T>, b: &Vec2<T>) -> std::cmp::Ordering {
    a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap())
}

/// Σ_k V(X^k - x) at every active node. Cells are summed in a fixed
/// (lexicographic position) order so the result does not depend on the order
/// of `cells`.
pub fn deposit<T: Real>(
    cells: &[Vec2<T>],
    potential: &MollifierPotential<T>,
    grid: &Arc<Grid<T>>,
) -> Result<ScalarField<T>, GridError> {
    let mut sorted = cells.to_vec();
    for p in &sorted {
        if !grid.contains(*p) || !p.x.is_finite() || !p.y.is_finite() {
            return Err(GridError::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64(), radius: grid.radius().as_f64() });
        }
    }
    sorted.sort_by(total_order);

    let mut field = ScalarField::zeros(grid.clone());
    let n = grid.n() as isize;
    let k = T::from_usize_lossy(grid.half_width());
    let h = grid.h();
    let rm = potential.radius();
    let to_range = |lo: T, hi: T| -> (isize, isize) {
        let a = lo.ceil().to_isize().unwrap_or(0).max(0);
        let b = hi.floor().to_isize().unwrap_or(n - 1).min(n - 1);
        (a, b)
    };
    for p in &sorted {
        let (i_lo, i_hi) = to_range(k - (p.x + rm) / h, k - (p.x - rm) / h);
        let (j_lo, j_hi) = to_range(k - (p.y + rm) / h, k - (p.y - rm) / h);
        for i in i_lo..=i_hi {
            for j in j_lo..=j_hi {
                let (i, j) = (i as usize, j as usize);
                let idx = grid.index(i, j);
                if !grid.is_active(idx) {
                    continue;
                }
                let v = potential.eval(*p - grid.node(i, j));
                if v > T::zero() {
                    field.values_mut()[idx] = field.values()[idx] + v;
                }
            }
        }
    }
    Ok(field)
}

/// Builds α_V, α_D, α_M, α_U from tip positions and β_D from stalk positions.
pub fn assemble_rates<T: Real>(
    tips: &[Vec2<T>],
    stalks: &[Vec2<T>],
    params: &ModelParams<T>,
    grid: &Arc<Grid<T>>,
) -> Result<RateFields<T>, GridError> {
    let potential = MollifierPotential::new(params.mollifier_radius);
    assemble_rates_with(tips, stalks, params, grid, &potential)
}

pub fn assemble_rates_with<T: Real>(
    tips: &[Vec2<T>],
    stalks: &[Vec2<T>],
    params: &ModelParams<T>,
    grid: &Arc<Grid<T>>,
    potential: &MollifierPotential<T>,
) -> Result<RateFields<T>, GridError> {
    let tip_sum = deposit(tips, potential, grid)?;
    let stalk_sum = deposit(stalks, potential, grid)?;
    Ok(RateFields {
        alpha_v: tip_sum.map(|v| params.s_v * v),
        alpha_d: tip_sum.map(|v| params.r_d * v),
        alpha_m: tip_sum.map(|v| params.r_m * v),
        alpha_u: tip_sum.map(|v| params.r_u * v),
        beta_d: stalk_sum.map(|v| params.s_d * v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_params;
    use approx::assert_relative_eq;

    fn setup() -> (Arc<Grid<f64>>, ModelParams<f64>) {
        (Arc::new(Grid::disk(10.0, 50)), default_params())
    }

    #[test]
    fn normalizer_converges() {
        let i = bump_normalizer();
        assert!((i - 0.46651).abs() < 1e-5);
        let coarse = bump_normalizer_with_tol(1e-10);
        let fine = bump_normalizer_with_tol(1e-14);
        assert!((coarse - fine).abs() < 1e-10 * fine);
    }

    #[test]
    fn potential_values() {
        let v = MollifierPotential::<f64>::new(12.5);
        let i = v.normalizer();
        assert_eq!(v.eval(Vec2::new(12.5, 0.0)), 0.0);
        assert_eq!(v.eval(Vec2::new(0.0, -13.0)), 0.0);
        assert_relative_eq!(v.eval(Vec2::zero()), (-1.0f64).exp() / (i * 156.25), max_relative = 1e-15);
        assert_relative_eq!(v.eval(Vec2::zero()), 0.005046, max_relative = 1e-3);
        assert_relative_eq!(v.eval(Vec2::new(0.0, 6.25)), (-4.0f64 / 3.0).exp() / (i * 156.25), max_relative = 1e-14);
        assert!(v.eval(Vec2::new(12.4999, 0.0)) >= 0.0);
    }

    #[test]
    fn no_cells_no_rates() {
        let (g, p) = setup();
        let r = assemble_rates(&[], &[], &p, &g).unwrap();
        for (_, f) in r.fields() {
            assert!(f.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_tip_at_node() {
        let (g, p) = setup();
        let pos = g.node(40, 55);
        let r = assemble_rates(&[pos], &[], &p, &g).unwrap();
        let v0 = MollifierPotential::new(12.5).eval(Vec2::zero());
        assert_eq!(r.alpha_v.at(40, 55), p.s_v * v0);
        assert_eq!(r.alpha_d.at(40, 55), p.r_d * v0);
        assert!(r.beta_d.values().iter().all(|&v| v == 0.0));
        // Support: nothing further than R_m from the cell.
        for (idx, v) in r.alpha_m.active_values() {
            let node = g.node(idx / g.n(), idx % g.n());
            if (node - pos).norm() >= 12.5 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn coincident_tips_double() {
        let (g, p) = setup();
        let x = Vec2::new(101.3, -57.2);
        let one = assemble_rates(&[x], &[x], &p, &g).unwrap();
        let two = assemble_rates(&[x, x], &[x, x], &p, &g).unwrap();
        for ((_, a), (_, b)) in one.fields().iter().zip(two.fields().iter()) {
            for (u, v) in a.values().iter().zip(b.values()) {
                assert_eq!(2.0 * u, *v);
            }
        }
    }

    #[test]
    fn outside_position_rejected() {
        let (g, p) = setup();
        assert!(assemble_rates(&[Vec2::new(400.0, 400.0)], &[], &p, &g).is_err());
        assert!(assemble_rates(&[], &[Vec2::new(0.0, 500.5)], &p, &g).is_err());
    }

    #[test]
    fn permutation_invariant_bitwise() {
        let (g, p) = setup();
        let cells: Vec<Vec2<f64>> =
            (0..30).map(|m| Vec2::new(3.7 * m as f64 - 40.0, (m as f64 * 0.7).sin() * 8.0)).collect();
        let mut rev = cells.clone();
        rev.reverse();
        rev.swap(3, 17);
        let a = assemble_rates(&cells, &cells, &p, &g).unwrap();
        let b = assemble_rates(&rev, &rev, &p, &g).unwrap();
        assert_eq!(a, b);
    }
}
