use std::sync::Arc;

use nullwave_core::diagnostics::{Diagnostics, DiagnosticsConfig};
use nullwave_core::fields::FieldState;
use nullwave_core::geometry::{build_grid, ExteriorGrid, ObstacleShape};
use nullwave_core::initdata::{sample_data, Bump, ComponentProfile, DataProfile};
use nullwave_core::nullforms::{preset_registry, CubicTerm};
use nullwave_core::solver::{run, ExactCone, Solver, SolverConfig};

fn cubic(name: &str) -> CubicTerm {
    preset_registry().get(name).unwrap().build().cubic()
}

fn bump_data(eps: f64, center: [f64; 2]) -> DataProfile {
    DataProfile {
        components: vec![ComponentProfile {
            u0: vec![Bump::new(center, 1.0, 1.0)],
            u1: vec![Bump::new(center, 1.0, 0.5)],
        }],
        epsilon: eps,
        m0: 3.5,
    }
}

fn evolve(grid: &ExteriorGrid, cub: &CubicTerm, p: &DataProfile, steps: usize) -> FieldState {
    let dt = 0.45 * grid.h();
    let mut st = sample_data(p, grid, cub, dt, false).unwrap();
    let s = Solver::new(grid, cub, Arc::new(ExactCone), None, dt).unwrap();
    for _ in 0..steps {
        s.step(&mut st).unwrap();
    }
    st
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn zero_data_stays_zero() {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 3.0).unwrap();
    let cub = cubic("cubic");
    let st = evolve(&g, &cub, &DataProfile::zero(1, 3.5), 50);
    assert!(st.curr().iter().all(|&v| v == 0.0));
}

#[test]
fn far_data_ignores_the_obstacle_early_on() {
    // support starts 1.2 from the boundary; compare at t = 0.9
    let cub = cubic("linear");
    let p = bump_data(1.0, [2.5, 0.0]);
    let mut diffs = Vec::new();
    for h in [0.1, 0.05] {
        let g = build_grid(&ObstacleShape::disk(0.3), h, 4.0).unwrap();
        let free = g.unobstructed();
        let steps = (0.9 / (0.45 * h)).round() as usize;
        let a = evolve(&g, &cub, &p, steps);
        let b = evolve(&free, &cub, &p, steps);
        diffs.push(max_abs(a.curr().iter().zip(b.curr()).map(|(x, y)| x - y)));
    }
    assert!(diffs[0] < 1e-3 && diffs[1] <= diffs[0], "{diffs:?}");
}

#[test]
fn small_data_scales_linearly() {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 5.0).unwrap();
    let cub = cubic("cubic");
    let eps = 0.02;
    let a = evolve(&g, &cub, &bump_data(eps, [2.0, 0.0]), 40);
    let b = evolve(&g, &cub, &bump_data(eps / 2.0, [2.0, 0.0]), 40);
    let dev = max_abs(a.curr().iter().zip(b.curr()).map(|(x, y)| x - 2.0 * y));
    let size = max_abs(a.curr().iter().copied());
    assert!(dev > 0.0 && dev <= 10.0 * eps * eps * size, "{dev} vs {size}");
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 5.0).unwrap();
    let cub = cubic("wavemap");
    let p = DataProfile {
        components: vec![
            ComponentProfile {
                u0: vec![Bump::new([2.0, 0.0], 1.0, 1.0)],
                u1: vec![],
            },
            ComponentProfile {
                u0: vec![],
                u1: vec![Bump::new([0.0, -2.0], 1.0, 1.0)],
            },
        ],
        epsilon: 0.3,
        m0: 3.5,
    };
    let go = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let cfg = SolverConfig {
                t_final: 1.5,
                sample_every: 10,
                ..Default::default()
            };
            let st = sample_data(&p, &g, &cub, cfg.dt(0.1), false).unwrap();
            let mut d = Diagnostics::new(DiagnosticsConfig::default()).unwrap();
            let out = run(&g, &cub, st, &cfg, None, &mut d).unwrap();
            let mut csv = Vec::new();
            d.series().write_csv(&mut csv).unwrap();
            (out.state.curr().to_vec(), csv)
        })
    };
    assert_eq!(go(1), go(3));
}

#[test]
fn zero_length_run_records_initial_state() {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 4.0).unwrap();
    let cub = cubic("linear");
    let cfg = SolverConfig {
        t_final: 0.0,
        ..Default::default()
    };
    let st = sample_data(&bump_data(1.0, [2.0, 0.0]), &g, &cub, 0.045, false).unwrap();
    let mut d = Diagnostics::new(DiagnosticsConfig::default()).unwrap();
    let out = run(&g, &cub, st, &cfg, None, &mut d);
    match out {
        Ok(o) => {
            assert_eq!(o.steps, 0);
            assert_eq!(d.series().len(), 1);
            assert_eq!(d.series().records[0].t, 0.0);
        }
        Err(e) => panic!("zero-length run failed: {}", e.error),
    }
}
