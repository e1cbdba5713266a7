use proptest::prelude::*;

use nullwave_core::geometry::{build_grid, NodeKind, ObstacleShape};
use nullwave_core::initdata::{sample_data, timederivs_at_zero, Bump, ComponentProfile, DataProfile};
use nullwave_core::nullforms::preset_registry;

fn profile(eps: f64, center: [f64; 2], amp: f64) -> DataProfile {
    DataProfile {
        components: vec![ComponentProfile {
            u0: vec![Bump::new(center, 0.8, amp)],
            u1: vec![Bump::new([-center[1], center[0]], 0.7, -amp)],
        }],
        epsilon: eps,
        m0: 3.5,
    }
}

fn center() -> impl Strategy<Value = [f64; 2]> {
    (1.8f64..2.5, 0.0f64..6.28).prop_map(|(r, th)| [r * th.cos(), r * th.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn recursion_is_linear_at_leading_order(c in center(), amp in 0.5f64..1.5) {
        let cubic = preset_registry().get("cubic").unwrap().build().cubic();
        let (e, h) = (0.01, 0.1);
        let a = timederivs_at_zero(&profile(e, c, amp), &cubic, h, 2).unwrap();
        let b = timederivs_at_zero(&profile(2.0 * e, c, amp), &cubic, h, 2).unwrap();
        let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..2 {
            let d: Vec<f64> = b.fields[k].iter().zip(&a.fields[k]).map(|(y, x)| y - 2.0 * x).collect();
            prop_assert_eq!(max(&d), 0.0);
        }
        let d2: Vec<f64> = b.fields[2].iter().zip(&a.fields[2]).map(|(y, x)| y - 2.0 * x).collect();
        prop_assert!(max(&d2) <= 5e-3 * max(&a.fields[2]));
    }

    #[test]
    fn sampled_state_is_eps_times_data(c in center(), amp in -1.5f64..1.5, eps in 0.01f64..0.5) {
        let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 4.0).unwrap();
        let cubic = preset_registry().get("cubic").unwrap().build().cubic();
        let p = profile(eps, c, amp);
        let st = sample_data(&p, &g, &cubic, 0.045, false).unwrap();
        for k in 0..g.len() {
            let (x, y) = g.coord(k);
            let want = if g.kind(k) == NodeKind::Obstacle { 0.0 } else { eps * p.components[0].u0[0].eval(x, y) };
            prop_assert!((st.curr()[k] - want).abs() <= 1e-15);
        }
    }
}

#[test]
fn support_bound_is_enforced() {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 4.0).unwrap();
    let cubic = preset_registry().get("linear").unwrap().build().cubic();
    let mut p = DataProfile {
        components: vec![ComponentProfile {
            u0: vec![Bump::new([2.0, 0.0], 0.5, 1.0)],
            u1: vec![],
        }],
        epsilon: 1.0,
        m0: 3.0,
    };
    assert!(sample_data(&p, &g, &cubic, 0.045, false).is_ok());
    p.m0 = 2.0;
    assert!(sample_data(&p, &g, &cubic, 0.045, false).is_err());
}
