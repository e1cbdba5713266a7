use proptest::prelude::*;

use nullwave_core::fields::{spatial_jet, Comp, TimeSlice};
use nullwave_core::geometry::{build_grid, ExteriorGrid, NodeKind, ObstacleShape};

fn sampled(grid: &ExteriorGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            let (x, y) = grid.coord(k);
            f(x, y)
        })
        .collect()
}

fn interior(grid: &ExteriorGrid) -> impl Iterator<Item = usize> + '_ {
    let n = grid.n();
    (0..grid.len()).filter(move |&k| {
        let (i, j) = grid.ij(k);
        grid.kind(k) == NodeKind::Interior && i > 1 && j > 1 && i + 2 < n && j + 2 < n
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratics_are_differentiated_exactly(c in prop::array::uniform6(-2.0f64..2.0)) {
        let g = ExteriorGrid::free(0.1, 1.5).unwrap();
        let f = sampled(&g, |x, y| c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y);
        for k in interior(&g) {
            let (x, y) = g.coord(k);
            let j = spatial_jet(&g, Comp::plain(&f), k);
            prop_assert!((j.f1 - (c[1] + 2.0 * c[3] * x + c[4] * y)).abs() < 1e-11);
            prop_assert!((j.f2 - (c[2] + c[4] * x + 2.0 * c[5] * y)).abs() < 1e-11);
            prop_assert!((j.f11 - 2.0 * c[3]).abs() < 1e-9);
            prop_assert!((j.f12 - c[4]).abs() < 1e-9);
            prop_assert!((j.f22 - 2.0 * c[5]).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_annihilates_radial_quadratics(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = ExteriorGrid::free(0.1, 1.5).unwrap();
        let f = sampled(&g, |x, y| a + b * (x * x + y * y));
        for k in interior(&g) {
            let (x, y) = g.coord(k);
            prop_assert!(spatial_jet(&g, Comp::plain(&f), k).omega(x, y).abs() < 1e-11);
        }
    }

    #[test]
    fn good_derivative_norm_is_sum_of_components(w in 0.5f64..3.0, t in 0.0f64..2.0) {
        let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 3.0).unwrap();
        let dt = 0.045;
        let lv = |s: f64| sampled(&g, |x, y| (w * (s - x) + y).sin() * (-(x * x + y * y) / 4.0).exp());
        let (p, c, n) = (lv(t - dt), lv(t), lv(t + dt));
        let slice = TimeSlice { prev: &p, curr: &c, next: &n, m: 1, t, dt };
        for k in (0..g.len()).step_by(37) {
            let (x, y) = g.coord(k);
            let r = x.hypot(y);
            if r < g.h() || g.kind(k) != NodeKind::Interior {
                continue;
            }
            let j = slice.jet(&g, 0, k);
            let b1 = x / r * j.ut + j.u1;
            let b2 = y / r * j.ut + j.u2;
            let full = j.ut * j.ut + 2.0 * j.ut * (x * j.u1 + y * j.u2) / r + j.u1 * j.u1 + j.u2 * j.u2;
            prop_assert!((b1 * b1 + b2 * b2 - full).abs() < 1e-10 * (1.0 + full));
        }
    }
}

#[test]
fn time_derivative_is_centred() {
    let g = ExteriorGrid::free(0.1, 1.5).unwrap();
    let (t, dt) = (0.7, 0.05);
    let lv = |s: f64| vec![s.sin(); g.len()];
    let (p, c, n) = (lv(t - dt), lv(t), lv(t + dt));
    let slice = TimeSlice { prev: &p, curr: &c, next: &n, m: 1, t, dt };
    let ut = slice.jet(&g, 0, g.len() / 2).ut;
    assert!((ut - t.cos()).abs() <= dt * dt / 6.0 + 1e-14);
}
