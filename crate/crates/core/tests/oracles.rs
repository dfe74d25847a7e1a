//! Pinned constants (values from 30-digit quadrature, see `golden/derived.json`)
//! checked against the production code and the oracles.

use std::sync::Arc;

use angio_core::engine::initial_vegf;
use angio_core::oracles::{
    analytic_heat_mode, brownian_moment_oracle, bump_normalizer_closed_form, dense_solve_oracle, ode_trapezoid_oracle,
    random_step_system, solver_discrepancy,
};
use angio_core::protein::solve_system;
use angio_core::sources::bump_normalizer;
use angio_core::{Grid, MollifierPotential, Vec2};
use approx::assert_relative_eq;
use serde_json::Value;

fn golden(key: &str) -> f64 {
    let doc: Value = serde_json::from_str(include_str!("golden/derived.json")).unwrap();
    doc[key].as_f64().unwrap_or_else(|| panic!("missing {key}"))
}

#[test]
fn normalizer_matches_pinned_value() {
    assert_relative_eq!(bump_normalizer(), golden("bump_normalizer"), max_relative = 1e-14);
    assert_relative_eq!(bump_normalizer_closed_form(), golden("bump_normalizer"), max_relative = 1e-14);
}

#[test]
fn kernel_peak_matches_pinned_value() {
    let v = MollifierPotential::<f64>::new(12.5).eval(Vec2::zero());
    assert_relative_eq!(v, golden("mollifier_peak_rm_12_5"), max_relative = 1e-14);
}

#[test]
fn initial_vegf_matches_pinned_value() {
    assert_relative_eq!(initial_vegf(Vec2::zero(), 375.0), golden("initial_vegf_at_origin"), max_relative = 1e-15);
}

#[test]
fn heat_amplitude_matches_pinned_value() {
    // n h = 1000 with the centre node at x' = L/2 where cos vanishes; use a
    // corner node and divide out the spatial factor.
    let g = Arc::new(Grid::square(200.0, 2));
    let u0 = analytic_heat_mode(&g, 10.0, 0.0);
    let u = analytic_heat_mode(&g, 10.0, 100.0);
    let ratio = (u.at(0, 0) - 1.0) / (u0.at(0, 0) - 1.0);
    assert_relative_eq!(ratio, golden("heat_amplitude_d10_l1000_t100"), max_relative = 1e-13);
}

#[test]
fn brownian_target_and_linearity() {
    let m = brownian_moment_oracle(0.1, 1.0, 100, 10_000, 5);
    assert_relative_eq!(m.target, golden("brownian_target_sigma_0_1_m_100"), max_relative = 1e-15);
    assert!(m.z_score() <= 4.0, "{m:?}");
    let doubled = brownian_moment_oracle(0.1, 1.0, 200, 10_000, 5);
    assert_eq!(doubled.target, 2.0 * m.target);
}

#[test]
fn trapezoid_reference_value() {
    let r = ode_trapezoid_oracle(|t| t * t, |t| t * t * t / 3.0, 1.0, 1.0, &[1.0 / 1024.0]);
    // Relative error vs 0.5 e^{-1/3} is tiny at this step.
    assert!(r.errors[0] < 1e-6);
    assert_relative_eq!(0.5 * (-1.0f64 / 3.0).exp(), 0.5 * golden("trapezoid_exact_t2_s1_t1"), max_relative = 1e-15);
}

#[test]
fn dense_and_cg_agree_on_random_systems() {
    assert!(solver_discrepancy(10, 1e-14).unwrap() <= 1e-10);
    let sys = random_step_system(3);
    assert!(sys.len() <= 400);
    let (x, stats) = solve_system(&sys, 1e-12, 10_000).unwrap();
    assert!(stats.residual <= 1e-12);
    let y = dense_solve_oracle(&sys).unwrap();
    for (a, b) in x.iter().zip(&y) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-3));
    }
}

#[test]
fn recovers_constructed_solution() {
    let mut sys = random_step_system(8);
    let known: Vec<f64> = (0..sys.len()).map(|m| ((m * 37) % 11) as f64 * 0.1).collect();
    let mut b = vec![0.0; sys.len()];
    sys.apply(&known, &mut b);
    sys.rhs = b;
    let (x, _) = solve_system(&sys, 1e-13, 10_000).unwrap();
    for (m, (a, k)) in x.iter().zip(&known).enumerate() {
        if sys.diag[m] != 1.0 || sys.east[m] != 0.0 {
            assert!((a - k).abs() < 1e-10, "node {m}: {a} vs {k}");
        }
    }
}
