use std::sync::Arc;

use angio_core::sources::{assemble_rates, deposit};
use angio_core::{default_params, Grid, MollifierPotential, Vec2};
use proptest::prelude::*;

fn kernel_mass(h: f64, p: Vec2<f64>) -> f64 {
    let k = (40.0 / h) as usize;
    let g = Arc::new(Grid::square(h, k));
    deposit(&[p], &MollifierPotential::new(12.5), &g).unwrap().integrate()
}

#[test]
fn node_centred_mass_on_default_grid() {
    // h = 10 is coarse against R_m = 12.5: only 9 nodes see the kernel.
    let m = kernel_mass(10.0, Vec2::zero());
    assert!((m - 1.0).abs() <= 0.25, "{m}");
}

#[test]
fn tip_rate_field_integrates_to_cell_count() {
    let g = Arc::new(Grid::disk(1.0, 100));
    let p = default_params();
    let tips = vec![Vec2::new(10.3, -4.1), Vec2::new(-40.0, 22.7), Vec2::new(0.5, 60.0)];
    let rates = assemble_rates(&tips, &[], &p, &g).unwrap();
    let n = rates.alpha_v.integrate() / p.s_v;
    assert!((n - 3.0).abs() < 0.03, "{n}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_mass_anywhere_on_coarse_grid(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        // Worst case is a cell centre, about 26% high.
        let m = kernel_mass(10.0, Vec2::new(x, y));
        prop_assert!((m - 1.0).abs() <= 0.27, "{}", m);
    }

    #[test]
    fn kernel_mass_on_fine_grid(x in -0.5f64..0.5, y in -0.5f64..0.5) {
        let m = kernel_mass(1.0, Vec2::new(x, y));
        prop_assert!((m - 1.0).abs() < 0.01, "{}", m);
    }
}
