//! Quick property battery behind `nullwave verify`: one registered check
//! per module, each taking at most a few seconds.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nullwave_core::diagnostics::{elliptic_ratio, fit_decay, weight_w, WeightSpec};
use nullwave_core::fields::{laplacian, FieldState};
use nullwave_core::geometry::{build_grid, Dir, ExteriorGrid, NodeKind, ObstacleShape};
use nullwave_core::initdata::{check_compatibility, Bump, ComponentProfile, DataProfile};
use nullwave_core::io::{read_field, write_field};
use nullwave_core::nullforms::{check_null, eval_q0, preset_registry, DerivTriple};
use nullwave_core::registry::{Named, Registry};
use nullwave_core::solver::{ExactCone, Solver};

use crate::oracles::{null_by_sampling, random_tensor};

pub trait Check: Named + Send + Sync {
    fn description(&self) -> &'static str;
    /// A short summary on success, the failure reason otherwise.
    fn run(&self) -> Result<String, String>;
}

macro_rules! check {
    ($ty:ident, $name:literal, $desc:literal, $body:expr) => {
        struct $ty;
        impl Named for $ty {
            fn name(&self) -> &'static str {
                $name
            }
        }
        impl Check for $ty {
            fn description(&self) -> &'static str {
                $desc
            }
            fn run(&self) -> Result<String, String> {
                $body()
            }
        }
    };
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sample(grid: &ExteriorGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            if grid.kind(k) == NodeKind::Obstacle {
                return 0.0;
            }
            let (x, y) = grid.coord(k);
            f(x, y)
        })
        .collect()
}

check!(GeometryCheck, "geometry", "disk mask classes and cut fractions", || {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 3.0).map_err(|e| e.to_string())?;
    let idx = g.node_at(0.4, 0.0).ok_or("no node at (0.4, 0)")?;
    ensure(g.kind(idx) == NodeKind::BoundaryAdjacent, || "(0.4, 0) is not boundary-adjacent".into())?;
    let frac = g.cut(idx).and_then(|c| c.frac[Dir::West as usize]);
    ensure(frac.is_some_and(|f| (f - 1.0).abs() < 1e-12), || format!("west fraction {frac:?}, expected 1"))?;
    Ok(format!("{} boundary-adjacent nodes", g.count(NodeKind::BoundaryAdjacent)))
});

check!(NullCheck, "nullforms", "checker agrees with a sampling oracle", || {
    let d = DerivTriple::new(0.625, -0.375, -0.5);
    ensure(eval_q0(&d, &d) == 0.0, || "Q0 of a plane wave is not zero".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut disagree = 0;
    for k in 0..200 {
        let t = random_tensor(&mut rng, 1 + k % 3);
        if check_null(&t).all_null != null_by_sampling(&t) {
            disagree += 1;
        }
    }
    ensure(disagree == 0, || format!("{disagree} disagreements in 200 tensors"))?;
    for p in preset_registry().iter() {
        let null = check_null(&p.build()).all_null;
        ensure(null == (p.name() != "nonnull"), || format!("preset {} verdict {null}", p.name()))?;
    }
    Ok("200 random tensors, 0 disagreements".into())
});

check!(FieldsCheck, "fields", "Laplacian converges at second order", || {
    let err = |h: f64| -> Result<f64, String> {
        let g = build_grid(&ObstacleShape::disk(0.3), h, 4.0).map_err(|e| e.to_string())?;
        let f = sample(&g, |x, y| x.sin() * y.cos());
        let lap = laplacian(&g, &f);
        let mut e = 0.0f64;
        for idx in 0..g.len() {
            if g.kind(idx) == NodeKind::Interior {
                let (x, y) = g.coord(idx);
                e = e.max((lap[idx] + 2.0 * x.sin() * y.cos()).abs());
            }
        }
        Ok(e)
    };
    let (e1, e2) = (err(0.05)?, err(0.025)?);
    let order = (e1 / e2).log2();
    ensure(order > 1.8, || format!("observed order {order:.2}"))?;
    Ok(format!("order {order:.2}"))
});

check!(SolverCheck, "solver", "linear run reverses to its initial state", || {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 6.0).map_err(|e| e.to_string())?;
    let cubic = preset_registry().get("linear").map_err(|e| e.to_string())?.build().cubic();
    let b = Bump::new([2.0, 0.0], 1.0, 1.0);
    let u0 = sample(&g, |x, y| b.eval(x, y));
    let dt = 0.045;
    let s = Solver::new(&g, &cubic, Arc::new(ExactCone), None, dt).map_err(|e| e.to_string())?;
    let mut st = s.initial_state(&u0, &vec![0.0; g.len()], dt).map_err(|e| e.to_string())?;
    let start = st.curr().to_vec();
    for _ in 0..40 {
        s.step(&mut st).map_err(|e| e.to_string())?;
    }
    st.reverse_time();
    let back = Solver::new(&g, &cubic, Arc::new(ExactCone), None, -dt).map_err(|e| e.to_string())?;
    for _ in 0..39 {
        back.step(&mut st).map_err(|e| e.to_string())?;
    }
    let err = st.curr().iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(err < 1e-10, || format!("reversal error {err:e}"))?;
    Ok(format!("reversal error {err:.1e}"))
});

check!(InitCheck, "initdata", "annulus data is compatible to order 4", || {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 4.0).map_err(|e| e.to_string())?;
    let cubic = preset_registry().get("cubic").map_err(|e| e.to_string())?.build().cubic();
    let p = DataProfile {
        components: vec![ComponentProfile {
            u0: vec![Bump::new([1.8, 0.0], 1.0, 1.0)],
            u1: vec![Bump::new([0.0, -2.0], 1.0, 0.5)],
        }],
        epsilon: 0.1,
        m0: 3.5,
    };
    let r = check_compatibility(&p, &cubic, &g, 4, 1e-12).map_err(|e| e.to_string())?;
    ensure(r.pass, || format!("residual {:e}", r.max_residual))?;
    Ok(format!("residual {:.1e}", r.max_residual))
});

check!(DiagnosticsCheck, "diagnostics", "weights, fits and the free-space elliptic ratio", || {
    let w = weight_w(WeightSpec { mu: 1.0, nu: 1.0 }, 0.0, 2.0);
    ensure((w - 5.0).abs() < 1e-12, || format!("W_11(0, 2) = {w}"))?;
    let s: Vec<(f64, f64)> = (0..20).map(|k| (20.0 + 4.0 * k as f64, 3.0 / (20.0 + 4.0 * k as f64))).collect();
    let f = fit_decay(&s, (20.0, 100.0)).map_err(|e| e.to_string())?;
    ensure((f.exponent + 1.0).abs() < 1e-12, || format!("fitted {}", f.exponent))?;
    let g = ExteriorGrid::free(0.05, 4.0).map_err(|e| e.to_string())?;
    let b = Bump::new([0.5, 0.0], 1.5, 1.0);
    let r = elliptic_ratio(&sample(&g, |x, y| b.eval(x, y)), &g).map_err(|e| e.to_string())?;
    ensure(r <= 1.0 + 1e-3, || format!("free-space elliptic ratio {r}"))?;
    Ok(format!("elliptic ratio {r:.3}"))
});

check!(IoCheck, "io", "field snapshots round-trip bit for bit", || {
    let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 2.0).map_err(|e| e.to_string())?;
    let lv = |s: f64| (0..g.len()).map(|k| (k as f64 * s).cos()).collect::<Vec<_>>();
    let st = FieldState::from_levels(&g, 1, 0.5, 0.04, lv(0.1), lv(0.2), lv(0.3)).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_field(&st, &g, &mut buf).map_err(|e| e.to_string())?;
    let back = read_field(&g, &mut buf.as_slice()).map_err(|e| e.to_string())?;
    ensure(back.curr() == st.curr() && back.history() == st.history(), || "levels differ".into())?;
    Ok(format!("{} bytes", buf.len()))
});

pub fn check_registry() -> Registry<dyn Check> {
    let mut r: Registry<dyn Check> = Registry::new("check");
    let all: [Arc<dyn Check>; 7] = [
        Arc::new(GeometryCheck),
        Arc::new(NullCheck),
        Arc::new(FieldsCheck),
        Arc::new(SolverCheck),
        Arc::new(InitCheck),
        Arc::new(DiagnosticsCheck),
        Arc::new(IoCheck),
    ];
    for c in all {
        r.register(c).expect("unique");
    }
    r
}

/// Run every check (or the named ones) and print a table; exit 0 iff all pass.
pub fn cmd_verify(only: &[String], out: &mut dyn Write) -> i32 {
    let reg = check_registry();
    let names: Vec<&str> = if only.is_empty() {
        reg.names()
    } else {
        only.iter().map(|s| s.as_str()).collect()
    };
    let mut failed = 0;
    let _ = writeln!(out, "{:<12} {:<6} detail", "check", "result");
    for name in names {
        let (verdict, detail) = match reg.get(name) {
            Ok(c) => match c.run() {
                Ok(d) => ("PASS", d),
                Err(d) => ("FAIL", d),
            },
            Err(e) => ("FAIL", e.to_string()),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        let _ = writeln!(out, "{name:<12} {verdict:<6} {detail}");
    }
    i32::from(failed > 0)
}
