//! Hardy, weighted Sobolev and elliptic inequality monitors.
//!
//! Each monitor reports the ratio of the two sides of its inequality for a
//! single time-independent field. The constants involved are not known, so
//! callers judge a monitor by whether its ratios stay bounded and stable
//! under refinement.

use std::sync::Arc;

use super::{bracket, map_rows, DiagnosticsError};
use crate::fields::{spatial_jet, ActiveBox, Comp};
use crate::geometry::{ExteriorGrid, NodeKind};
use crate::registry::{Named, Registry};

/// Local region radius `R + 1` of the elliptic monitor's lower-order term.
pub const ELLIPTIC_LOCAL_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorContext {
    pub t: f64,
    pub m0: f64,
    /// Reject fields that are nonzero beyond `|x| = t + m0`.
    pub check_support: bool,
}

pub trait Monitor: Named + Send + Sync {
    fn description(&self) -> &'static str;
    fn ratio(&self, grid: &ExteriorGrid, f: Comp, ctx: &MonitorContext) -> Result<f64, DiagnosticsError>;
}

fn field_box(grid: &ExteriorGrid, f: Comp) -> ActiveBox {
    let n = grid.n();
    let mut b = ActiveBox::empty();
    for idx in 0..grid.len() {
        if f.get(idx) != 0.0 {
            let (i, j) = grid.ij(idx);
            b.include(i, j);
        }
    }
    if b.is_empty() {
        b
    } else {
        b.grown(2, n)
    }
}

fn skip(grid: &ExteriorGrid, idx: usize) -> bool {
    matches!(grid.kind(idx), NodeKind::Obstacle | NodeKind::ExteriorCone)
}

fn finish(monitor: &'static str, num: f64, den: f64) -> Result<f64, DiagnosticsError> {
    if num == 0.0 {
        Ok(0.0)
    } else if den == 0.0 {
        Err(DiagnosticsError::Inconsistent { monitor, numerator: num })
    } else {
        Ok(num / den)
    }
}

/// Fails when `f` is nonzero at some node with `|x| > bound`.
fn check_support(grid: &ExteriorGrid, f: Comp, bound: f64) -> Result<(), DiagnosticsError> {
    let slack = 1e-9 * bound.max(1.0);
    let mut worst = 0.0f64;
    for idx in 0..grid.len() {
        if f.get(idx) != 0.0 {
            let (x, y) = grid.coord(idx);
            worst = worst.max(x.hypot(y));
        }
    }
    if worst > bound + slack {
        return Err(DiagnosticsError::Support { radius: worst, bound });
    }
    Ok(())
}

/// `‖f/⟨t−|x|⟩‖_{L²} / ‖∇_h f‖_{L²}`.
pub struct Hardy;

impl Named for Hardy {
    fn name(&self) -> &'static str {
        "hardy"
    }
}

impl Monitor for Hardy {
    fn description(&self) -> &'static str {
        "‖f/⟨t−|x|⟩‖ / ‖∇f‖ for f supported in |x| ≤ t + M0"
    }

    fn ratio(&self, grid: &ExteriorGrid, f: Comp, ctx: &MonitorContext) -> Result<f64, DiagnosticsError> {
        if ctx.check_support {
            check_support(grid, f, ctx.t + ctx.m0)?;
        }
        let bx = field_box(grid, f);
        let n = grid.n();
        let rows = map_rows(bx, |j| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in bx.i0..=bx.i1 {
                let idx = j * n + i;
                if skip(grid, idx) {
                    continue;
                }
                let (x, y) = grid.coord(idx);
                let jet = spatial_jet(grid, f, idx);
                let q = jet.f / bracket(ctx.t - x.hypot(y));
                num += q * q;
                den += jet.gradient_sq();
            }
            (num, den)
        });
        let (num, den) = rows.iter().fold((0.0, 0.0), |a, r| (a.0 + r.0, a.1 + r.1));
        finish(self.name(), num.sqrt(), den.sqrt())
    }
}

/// `max ⟨x⟩^{1/2}|f| / Σ_{|a|≤2} ‖Z^a f‖_{L²}` over the spatial fields `∂_1, ∂_2, Ω`.
pub struct Sobolev;

impl Named for Sobolev {
    fn name(&self) -> &'static str {
        "sobolev"
    }
}

impl Monitor for Sobolev {
    fn description(&self) -> &'static str {
        "max ⟨x⟩^{1/2}|f| / Σ_{|a|≤2} ‖Z^a f‖ with spatial Z"
    }

    fn ratio(&self, grid: &ExteriorGrid, f: Comp, _ctx: &MonitorContext) -> Result<f64, DiagnosticsError> {
        let bx = field_box(grid, f);
        let n = grid.n();
        let rows = map_rows(bx, |j| {
            let mut sup = 0.0f64;
            let mut sq = [0.0; 10];
            for i in bx.i0..=bx.i1 {
                let idx = j * n + i;
                if skip(grid, idx) {
                    continue;
                }
                let (x, y) = grid.coord(idx);
                let jet = spatial_jet(grid, f, idx);
                sup = sup.max(bracket(x.hypot(y)).sqrt() * jet.f.abs());
                for (s, z) in sq.iter_mut().zip(jet.z_up_to_two(x, y)) {
                    *s += z * z;
                }
            }
            (sup, sq)
        });
        let mut sup = 0.0f64;
        let mut sq = [0.0; 10];
        for (s, q) in &rows {
            sup = sup.max(*s);
            for (a, b) in sq.iter_mut().zip(q) {
                *a += b;
            }
        }
        let h = grid.h();
        let den: f64 = sq.iter().map(|s| (s * h * h).sqrt()).sum();
        finish(self.name(), sup, den)
    }
}

/// `‖D²w‖_{L²} / (‖Δ_h w‖_{L²} + ‖w‖_{H¹(K_2)})`, with the Frobenius norm of
/// the Hessian, so that the ratio is at most one in free space.
pub struct Elliptic;

impl Named for Elliptic {
    fn name(&self) -> &'static str {
        "elliptic"
    }
}

impl Monitor for Elliptic {
    fn description(&self) -> &'static str {
        "‖D²w‖ / (‖Δw‖ + ‖w‖_{H¹(K_2)}) for w vanishing on the obstacle"
    }

    fn ratio(&self, grid: &ExteriorGrid, f: Comp, _ctx: &MonitorContext) -> Result<f64, DiagnosticsError> {
        let bx = field_box(grid, f);
        let n = grid.n();
        let rows = map_rows(bx, |j| {
            let mut acc = [0.0; 3];
            for i in bx.i0..=bx.i1 {
                let idx = j * n + i;
                if skip(grid, idx) {
                    continue;
                }
                let jet = spatial_jet(grid, f, idx);
                acc[0] += jet.f11 * jet.f11 + 2.0 * jet.f12 * jet.f12 + jet.f22 * jet.f22;
                acc[1] += jet.laplacian() * jet.laplacian();
                let (x, y) = grid.coord(idx);
                if x.hypot(y) <= ELLIPTIC_LOCAL_RADIUS {
                    acc[2] += jet.f * jet.f + jet.gradient_sq();
                }
            }
            acc
        });
        let mut acc = [0.0; 3];
        for r in &rows {
            for (a, b) in acc.iter_mut().zip(r) {
                *a += b;
            }
        }
        let h2 = grid.h() * grid.h();
        let [hess, lap, local] = acc.map(|v| (v * h2).sqrt());
        finish(self.name(), hess, lap + local)
    }
}

pub fn monitor_registry() -> Registry<dyn Monitor> {
    let mut r: Registry<dyn Monitor> = Registry::new("monitor");
    r.register(Arc::new(Hardy)).expect("unique");
    r.register(Arc::new(Sobolev)).expect("unique");
    r.register(Arc::new(Elliptic)).expect("unique");
    r
}

/// Hardy ratio of a scalar field at time `t`; the field must vanish outside
/// `|x| ≤ t + m0`.
pub fn hardy_ratio(f: &[f64], grid: &ExteriorGrid, t: f64, m0: f64) -> Result<f64, DiagnosticsError> {
    let ctx = MonitorContext { t, m0, check_support: true };
    Hardy.ratio(grid, Comp::plain(f), &ctx)
}

pub fn sobolev_ratio(f: &[f64], grid: &ExteriorGrid) -> Result<f64, DiagnosticsError> {
    let ctx = MonitorContext {
        t: 0.0,
        m0: 0.0,
        check_support: false,
    };
    Sobolev.ratio(grid, Comp::plain(f), &ctx)
}

pub fn elliptic_ratio(w: &[f64], grid: &ExteriorGrid) -> Result<f64, DiagnosticsError> {
    let ctx = MonitorContext {
        t: 0.0,
        m0: 0.0,
        check_support: false,
    };
    Elliptic.ratio(grid, Comp::plain(w), &ctx)
}
