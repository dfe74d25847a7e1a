//! Uniform node grid over the square [-R, R]², with a disk mask selecting the
//! model domain, plus scalar field storage and the off-grid sampling used by
//! the cell dynamics.
//!
//! Node (i, j) sits at x_ij = ((k - i) h, (k - j) h) for i, j = 0..=2k, so
//! node (0, 0) is the corner (R, R) and node (k, k) is the origin. Storage is
//! row-major with `i` as the row index.

use std::sync::Arc;

use thiserror::Error;

use crate::scalar::{Real, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("point ({x}, {y}) lies outside the domain of radius {radius}")]
    OutOfDomain { x: f64, y: f64, radius: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    h: T,
    k: usize,
    n: usize,
    radius: T,
    active: Vec<bool>,
    n_active: usize,
    disk: bool,
}

impl<T: Real> Grid<T> {
    /// Grid on B_R(0) with R = k·h; nodes with |x| > R are inactive.
    pub fn disk(h: T, k: usize) -> Self {
        Self::build(h, k, true)
    }

    /// Same node layout with every node active (square domain, used by the
    /// convergence harness).
    pub fn square(h: T, k: usize) -> Self {
        Self::build(h, k, false)
    }

    fn build(h: T, k: usize, disk: bool) -> Self {
        assert!(k >= 1, "grid needs at least one interior node");
        assert!(h > T::zero(), "grid spacing must be positive");
        let n = 2 * k + 1;
        let kk = (k * k) as i64;
        let mut active = vec![true; n * n];
        if disk {
            for i in 0..n {
                for j in 0..n {
                    let di = i as i64 - k as i64;
                    let dj = j as i64 - k as i64;
                    active[i * n + j] = di * di + dj * dj <= kk;
                }
            }
        }
        let n_active = active.iter().filter(|&&a| a).count();
        Self { h, k, n, radius: h * T::from_usize_lossy(k), active, n_active, disk }
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn half_width(&self) -> usize {
        self.k
    }

    /// Points per axis, 2k + 1.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn is_disk(&self) -> bool {
        self.disk
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    #[inline]
    pub fn is_active(&self, idx: usize) -> bool {
        self.active[idx]
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    /// Coordinates of node (i, j).
    pub fn node(&self, i: usize, j: usize) -> Vec2<T> {
        let k = self.k as f64;
        Vec2::new(self.h * T::lit(k - i as f64), self.h * T::lit(k - j as f64))
    }

    /// Whether `p` lies in the closed domain (disk or square).
    pub fn contains(&self, p: Vec2<T>) -> bool {
        if self.disk {
            p.norm() <= self.radius
        } else {
            p.x.abs() <= self.radius && p.y.abs() <= self.radius
        }
    }

    fn check_inside(&self, p: Vec2<T>) -> Result<(), GridError> {
        if self.contains(p) && p.x.is_finite() && p.y.is_finite() {
            Ok(())
        } else {
            Err(GridError::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64(), radius: self.radius.as_f64() })
        }
    }

    /// Fractional grid index of a physical point, clamped to the node range.
    fn locate(&self, p: Vec2<T>) -> (usize, usize, T, T) {
        let k = T::from_usize_lossy(self.k);
        let last = T::from_usize_lossy(self.n - 1);
        let fi = (k - p.x / self.h).max(T::zero()).min(last);
        let fj = (k - p.y / self.h).max(T::zero()).min(last);
        let i0 = fi.floor().to_usize().unwrap().min(self.n - 2);
        let j0 = fj.floor().to_usize().unwrap().min(self.n - 2);
        (i0, j0, fi - T::from_usize_lossy(i0), fj - T::from_usize_lossy(j0))
    }

    /// Bilinear weights of the enclosing cell renormalized over active corners.
    /// Returns up to four (node index, weight) pairs.
    pub fn stencil(&self, p: Vec2<T>) -> Result<[(usize, T); 4], GridError> {
        self.check_inside(p)?;
        let (i0, j0, ti, tj) = self.locate(p);
        let one = T::one();
        let mut st = [
            (self.index(i0, j0), (one - ti) * (one - tj)),
            (self.index(i0 + 1, j0), ti * (one - tj)),
            (self.index(i0, j0 + 1), (one - ti) * tj),
            (self.index(i0 + 1, j0 + 1), ti * tj),
        ];
        let mut total = T::zero();
        for (idx, w) in st.iter_mut() {
            if !self.active[*idx] {
                *w = T::zero();
            }
            total = total + *w;
        }
        if total > T::zero() {
            for (_, w) in st.iter_mut() {
                *w = *w / total;
            }
        } else {
            // Only reachable when p sits exactly on an inactive corner's weight
            // pattern; fall back to the nearest active corner.
            let near = st
                .iter()
                .filter(|(idx, _)| self.active[*idx])
                .map(|(idx, _)| *idx)
                .min_by(|a, b| {
                    let da = (self.node(a / self.n, a % self.n) - p).norm_sq();
                    let db = (self.node(b / self.n, b % self.n) - p).norm_sq();
                    da.partial_cmp(&db).unwrap()
                })
                .expect("a point inside the disk has an active enclosing corner");
            for (idx, w) in st.iter_mut() {
                *w = if *idx == near { one } else { T::zero() };
            }
        }
        Ok(st)
    }
}

/// Values at every node of a grid; inactive nodes hold zero and are excluded
/// from reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid<T>>, value: T) -> Self {
        Self::from_fn(grid, |_| value)
    }

    /// Samples `f` at every active node position.
    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(Vec2<T>) -> T) -> Self {
        let n = grid.n();
        let mut values = vec![T::zero(); grid.len()];
        for i in 0..n {
            for j in 0..n {
                let idx = grid.index(i, j);
                if grid.is_active(idx) {
                    values[idx] = f(grid.node(i, j));
                }
            }
        }
        Self { grid, values }
    }

    /// Wraps raw row-major values; inactive entries are zeroed.
    pub fn from_values(grid: Arc<Grid<T>>, mut values: Vec<T>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::GridMismatch);
        }
        for (v, &a) in values.iter_mut().zip(grid.active_mask()) {
            if !a {
                *v = T::zero();
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Raw storage, including the zeroed inactive entries.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        let idx = self.grid.index(i, j);
        debug_assert!(self.grid.is_active(idx), "read of inactive node ({i}, {j})");
        self.values[idx]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let idx = self.grid.index(i, j);
        debug_assert!(self.grid.is_active(idx), "write to inactive node ({i}, {j})");
        self.values[idx] = v;
    }

    /// Iterator over (flat index, value) of active nodes in storage order.
    pub fn active_values(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.values.iter().enumerate().filter(|(idx, _)| self.grid.is_active(*idx)).map(|(idx, &v)| (idx, v))
    }

    pub fn max(&self) -> T {
        self.active_values().fold(T::neg_infinity(), |m, (_, v)| m.max(v))
    }

    pub fn min(&self) -> T {
        self.active_values().fold(T::infinity(), |m, (_, v)| m.min(v))
    }

    pub fn all_finite(&self) -> bool {
        self.active_values().all(|(_, v)| v.is_finite())
    }

    /// h² times the sum over active nodes.
    pub fn integrate(&self) -> T {
        let s: T = self.active_values().map(|(_, v)| v).sum();
        s * self.grid.h() * self.grid.h()
    }

    /// Pointwise map over active nodes.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        for (idx, v) in out.values.iter_mut().enumerate() {
            if self.grid.is_active(idx) {
                *v = f(*v);
            }
        }
        out
    }

    /// Pointwise a·self + b·other.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self, GridError> {
        if !self.same_grid(other) {
            return Err(GridError::GridMismatch);
        }
        let mut out = self.clone();
        for (idx, v) in out.values.iter_mut().enumerate() {
            if self.grid.is_active(idx) {
                *v = a * *v + b * other.values[idx];
            }
        }
        Ok(out)
    }

    /// Bilinear interpolation; corner weights renormalized over active nodes.
    pub fn interpolate_at(&self, p: Vec2<T>) -> Result<T, GridError> {
        let st = self.grid.stencil(p)?;
        Ok(st.iter().fold(T::zero(), |acc, &(idx, w)| if w > T::zero() { acc + w * self.values[idx] } else { acc }))
    }

    /// Gradient at node (i, j): central differences, one-sided where a
    /// 4-neighbour is inactive, zero along an axis with no active neighbour.
    pub fn node_gradient(&self, i: usize, j: usize) -> Vec2<T> {
        let g = &*self.grid;
        let n = g.n();
        let h = g.h();
        let two = T::lit(2.0);
        let centre = self.at(i, j);
        let nb = |ii: Option<usize>, jj: Option<usize>| -> Option<T> {
            let (ii, jj) = (ii?, jj?);
            if ii >= n || jj >= n {
                return None;
            }
            let idx = g.index(ii, jj);
            g.is_active(idx).then(|| self.values[idx])
        };
        // Decreasing i increases x.
        let plus_x = nb(i.checked_sub(1), Some(j));
        let minus_x = nb(Some(i + 1), Some(j));
        let plus_y = nb(Some(i), j.checked_sub(1));
        let minus_y = nb(Some(i), Some(j + 1));
        let diff = |plus: Option<T>, minus: Option<T>| match (plus, minus) {
            (Some(p), Some(m)) => (p - m) / (two * h),
            (Some(p), None) => (p - centre) / h,
            (None, Some(m)) => (centre - m) / h,
            (None, None) => T::zero(),
        };
        Vec2::new(diff(plus_x, minus_x), diff(plus_y, minus_y))
    }

    /// Node gradients interpolated bilinearly to `p`.
    pub fn gradient_at(&self, p: Vec2<T>) -> Result<Vec2<T>, GridError> {
        let st = self.grid.stencil(p)?;
        let n = self.grid.n();
        let mut out = Vec2::zero();
        for &(idx, w) in &st {
            if w > T::zero() {
                out += self.node_gradient(idx / n, idx % n).scale(w);
            }
        }
        Ok(out)
    }

    /// Precomputes node gradients for repeated off-grid queries.
    pub fn gradient_field(&self) -> GradientField<T> {
        let n = self.grid.n();
        let mut gx = ScalarField::zeros(self.grid.clone());
        let mut gy = ScalarField::zeros(self.grid.clone());
        for i in 0..n {
            for j in 0..n {
                if self.grid.is_active(self.grid.index(i, j)) {
                    let g = self.node_gradient(i, j);
                    gx.set(i, j, g.x);
                    gy.set(i, j, g.y);
                }
            }
        }
        GradientField { gx, gy }
    }
}

/// Node gradients of a field, sampled with the same bilinear stencil as
/// [`ScalarField::gradient_at`].
#[derive(Debug, Clone)]
pub struct GradientField<T> {
    pub gx: ScalarField<T>,
    pub gy: ScalarField<T>,
}

impl<T: Real> GradientField<T> {
    pub fn at(&self, p: Vec2<T>) -> Result<Vec2<T>, GridError> {
        let st = self.gx.grid().stencil(p)?;
        let mut out = Vec2::zero();
        for &(idx, w) in &st {
            if w > T::zero() {
                out += Vec2::new(self.gx.values()[idx], self.gy.values()[idx]).scale(w);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn default_grid() -> Arc<Grid<f64>> {
        Arc::new(Grid::disk(10.0, 50))
    }

    #[test]
    fn indexing_convention() {
        let g = default_grid();
        assert_eq!(g.n(), 101);
        assert_eq!(g.node(50, 50), Vec2::new(0.0, 0.0));
        assert_eq!(g.node(0, 0), Vec2::new(500.0, 500.0));
        assert!(!g.is_active(g.index(0, 0)));
        assert!(g.is_active(g.index(0, 50)));
        let n = g.n();
        for i in 0..n {
            for j in 0..n {
                let a = g.is_active(g.index(i, j));
                assert_eq!(a, g.is_active(g.index(n - 1 - i, j)));
                assert_eq!(a, g.is_active(g.index(i, n - 1 - j)));
            }
        }
    }

    #[test]
    fn constant_gradient_is_zero() {
        let g = default_grid();
        let f = ScalarField::constant(g, 5.0);
        for p in [Vec2::new(0.0, 0.0), Vec2::new(499.0, 0.0), Vec2::new(-300.0, 371.3), Vec2::new(0.0, -500.0)] {
            assert_eq!(f.gradient_at(p).unwrap(), Vec2::zero());
        }
    }

    #[test]
    fn linear_field_gradient_exact() {
        let g = default_grid();
        let f = ScalarField::from_fn(g, |p| p.x);
        for p in [Vec2::new(0.0, 0.0), Vec2::new(13.7, -42.1), Vec2::new(-250.5, 100.25)] {
            let d = f.gradient_at(p).unwrap();
            assert_abs_diff_eq!(d.x, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(d.y, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn quadratic_field_gradient_matches_analytic() {
        let g = default_grid();
        let f = ScalarField::from_fn(g, |p| p.x * p.x);
        let d0 = f.gradient_at(Vec2::new(0.0, 0.0)).unwrap();
        assert!(d0.x.abs() <= 1e-9 && d0.y.abs() <= 1e-9);
        // Central differences reproduce 2x at nodes and bilinear reproduces a linear gradient.
        for p in [Vec2::new(37.0, 5.0), Vec2::new(-120.3, 64.9), Vec2::new(200.0, -200.0)] {
            let d = f.gradient_at(p).unwrap();
            assert_abs_diff_eq!(d.x, 2.0 * p.x, epsilon = 1e-9);
            assert_abs_diff_eq!(d.y, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn one_sided_at_disk_edge() {
        let g = default_grid();
        let f = ScalarField::from_fn(g.clone(), |p| 3.0 * p.x - p.y);
        // Node (5, 30) is (450, 200): (460, 200) lies outside the disk.
        assert!(!g.is_active(g.index(4, 30)));
        let d = f.node_gradient(5, 30);
        assert_abs_diff_eq!(d.x, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_domain_rejected() {
        let g = default_grid();
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(f.interpolate_at(Vec2::new(400.0, 400.0)), Err(GridError::OutOfDomain { .. })));
        assert!(f.gradient_at(Vec2::new(500.1, 0.0)).is_err());
        assert!(f.interpolate_at(Vec2::new(500.0, 0.0)).is_ok());
    }

    #[test]
    fn interpolation_values() {
        let g = default_grid();
        let f = ScalarField::from_fn(g.clone(), |p| 2.0 * p.x - 0.5 * p.y + 7.0);
        assert_eq!(f.interpolate_at(g.node(17, 63)).unwrap(), f.at(17, 63));
        let p = Vec2::new(-33.3, 71.9);
        assert_abs_diff_eq!(f.interpolate_at(p).unwrap(), 2.0 * p.x - 0.5 * p.y + 7.0, epsilon = 1e-12);
        // Corners (0,0), (0,10), (10,0), (10,10) of x·y give 0, 0, 0, 100; the centre gets 25.
        let xy = ScalarField::from_fn(g, |p| p.x * p.y);
        assert_abs_diff_eq!(xy.interpolate_at(Vec2::new(5.0, 5.0)).unwrap(), 25.0, epsilon = 1e-12);
    }

    #[test]
    fn integrate_values() {
        let g = default_grid();
        assert_eq!(ScalarField::zeros(g.clone()).integrate(), 0.0);
        let count = (0..101i64)
            .flat_map(|i| (0..101i64).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                let (x, y) = ((50 - i) as f64 * 10.0, (50 - j) as f64 * 10.0);
                (x * x + y * y).sqrt() <= 500.0
            })
            .count();
        assert_eq!(g.n_active(), count);
        assert_eq!(ScalarField::constant(g.clone(), 1.0).integrate(), 100.0 * count as f64);
        let mut one = ScalarField::zeros(g);
        one.set(12, 40, 1.0);
        assert_eq!(one.integrate(), 100.0);
    }

    #[test]
    fn f32_grid_works() {
        let g = Arc::new(Grid::<f32>::disk(10.0, 50));
        let f = ScalarField::from_fn(g, |p| p.y);
        let d = f.gradient_at(Vec2::new(12.0, -7.0)).unwrap();
        assert!((d.y - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn interpolation_is_monotone(
            r in 0.0f64..500.0, th in 0.0f64..std::f64::consts::TAU, seed in any::<u64>()
        ) {
            let g = default_grid();
            let f = ScalarField::from_fn(g.clone(), |p| (p.x * 0.37 + p.y * 1.3 + seed as f64 * 1e-3).sin() * 10.0);
            let p = Vec2::new(r * th.cos(), r * th.sin());
            let st = g.stencil(p).unwrap();
            let used: Vec<f64> = st.iter().filter(|(_, w)| *w > 0.0).map(|&(i, _)| f.values()[i]).collect();
            let lo = used.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = used.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let v = f.interpolate_at(p).unwrap();
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }

        #[test]
        fn integrate_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let g = default_grid();
            let f = ScalarField::from_fn(g.clone(), |p| (p.x * 0.01).cos());
            let q = ScalarField::from_fn(g, |p| p.y * p.y * 1e-4);
            let lhs = f.axpby(a, &q, b).unwrap().integrate();
            let rhs = a * f.integrate() + b * q.integrate();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
