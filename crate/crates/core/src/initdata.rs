//! Compactly supported initial data and the compatibility conditions.
//!
//! Data are sums of smooth bumps `b(x) = exp(1 − 1/(1 − |x−c|²/r²))`. The
//! time derivatives `F_k = ∂_t^k u(0)` implied by the equation are computed on
//! the smooth extension of the data (sampled with the obstacle removed), so
//! their traces on `∂K` can be interpolated from both sides of each cut.

use crate::fields::{d1, d2, Comp, Trace};
use crate::geometry::{Dir, ExteriorGrid, NodeKind, ObstacleShape};
use crate::nullforms::CubicTerm;
use serde::{Deserialize, Serialize};

/// Largest `k` for which `F_k` may be requested.
pub const K_MAX_CAP: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum InitError {
    #[error("invalid data profile: {0}")]
    Invalid(String),
    #[error("bump support of component {component} ({field}) at |c| + r = {extent} exceeds M0 = {m0}")]
    Support {
        component: usize,
        field: &'static str,
        extent: f64,
        m0: f64,
    },
    #[error("bump of component {component} ({field}) centred at ({x}, {y}) meets the obstacle; request a compatibility check to allow it")]
    Overlap {
        component: usize,
        field: &'static str,
        x: f64,
        y: f64,
    },
    #[error("k_max = {0} exceeds the cap {K_MAX_CAP}")]
    Cap(usize),
    #[error("non-finite value in F_{0}")]
    NonFinite(usize),
    #[error("profile has {profile} components but the nonlinearity has {tensor}")]
    Components { profile: usize, tensor: usize },
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

/// Value, gradient and Laplacian of a bump at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BumpJet {
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
    pub lap: f64,
}

impl Bump {
    pub fn new(center: [f64; 2], radius: f64, amplitude: f64) -> Self {
        Self {
            center,
            radius,
            amplitude,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let w = (dx * dx + dy * dy) / (self.radius * self.radius);
        if w >= 1.0 {
            return 0.0;
        }
        self.amplitude * (1.0 - 1.0 / (1.0 - w)).exp()
    }

    pub fn jet(&self, x: f64, y: f64) -> BumpJet {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let r2 = self.radius * self.radius;
        let w = (dx * dx + dy * dy) / r2;
        if w >= 1.0 {
            return BumpJet::default();
        }
        let s = 1.0 - w;
        let b = self.amplitude * (1.0 - 1.0 / s).exp();
        let bw = -b / (s * s);
        let bww = b / s.powi(4) - 2.0 * b / s.powi(3);
        BumpJet {
            b,
            b1: bw * 2.0 * dx / r2,
            b2: bw * 2.0 * dy / r2,
            lap: 4.0 * w / r2 * bww + 4.0 / r2 * bw,
        }
    }

    /// `|c| + r`: radius of the smallest origin-centred disk containing the support.
    pub fn extent(&self) -> f64 {
        self.center[0].hypot(self.center[1]) + self.radius
    }

    /// Whether the open support disk meets the closed obstacle.
    pub fn meets(&self, shape: &ObstacleShape) -> bool {
        let [cx, cy] = self.center;
        if shape.contains(cx, cy) {
            return true;
        }
        let samples = 8192;
        (0..samples).any(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let rho = shape.radius_at(th);
            let (px, py) = (rho * th.cos(), rho * th.sin());
            (px - cx).hypot(py - cy) < self.radius
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentProfile {
    pub u0: Vec<Bump>,
    pub u1: Vec<Bump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataProfile {
    pub components: Vec<ComponentProfile>,
    pub epsilon: f64,
    pub m0: f64,
}

impl DataProfile {
    pub fn zero(m: usize, m0: f64) -> Self {
        Self {
            components: vec![ComponentProfile::default(); m],
            epsilon: 1.0,
            m0,
        }
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    fn bumps(&self) -> impl Iterator<Item = (usize, &'static str, &Bump)> {
        self.components.iter().enumerate().flat_map(|(c, p)| {
            p.u0.iter()
                .map(move |b| (c, "u0", b))
                .chain(p.u1.iter().map(move |b| (c, "u1", b)))
        })
    }

    pub fn validate(&self) -> Result<(), InitError> {
        if self.components.is_empty() {
            return Err(InitError::Invalid("no components".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(InitError::Invalid(format!("epsilon = {} must be finite and ≥ 0", self.epsilon)));
        }
        if !(self.m0.is_finite() && self.m0 > 1.0) {
            return Err(InitError::Invalid(format!("M0 = {} must exceed 1", self.m0)));
        }
        for (component, field, b) in self.bumps() {
            if !(b.radius.is_finite() && b.radius > 0.0) || !b.amplitude.is_finite() || !b.center.iter().all(|v| v.is_finite()) {
                return Err(InitError::Invalid(format!("bump {b:?} of component {component} ({field})")));
            }
            if b.extent() > self.m0 * (1.0 + 1e-12) {
                return Err(InitError::Support {
                    component,
                    field,
                    extent: b.extent(),
                    m0: self.m0,
                });
            }
        }
        Ok(())
    }

    /// First bump whose support meets the obstacle.
    pub fn overlap(&self, shape: &ObstacleShape) -> Option<InitError> {
        self.bumps().find(|(_, _, b)| b.meets(shape)).map(|(component, field, b)| InitError::Overlap {
            component,
            field,
            x: b.center[0],
            y: b.center[1],
        })
    }

    /// `(ε u0, ε u1)` at a point, written per component.
    pub fn eval(&self, x: f64, y: f64, u0: &mut [f64], u1: &mut [f64]) {
        for (c, p) in self.components.iter().enumerate() {
            u0[c] = self.epsilon * p.u0.iter().map(|b| b.eval(x, y)).sum::<f64>();
            u1[c] = self.epsilon * p.u1.iter().map(|b| b.eval(x, y)).sum::<f64>();
        }
    }
}

/// Interleaved `(ε u0, ε u1)` on every domain node of `grid` (zero on obstacle
/// and frame nodes).
pub fn sample_fields(profile: &DataProfile, grid: &ExteriorGrid) -> (Vec<f64>, Vec<f64>) {
    let m = profile.m();
    let mut u0 = vec![0.0; grid.len() * m];
    let mut u1 = vec![0.0; grid.len() * m];
    for idx in 0..grid.len() {
        if matches!(grid.kind(idx), NodeKind::Obstacle | NodeKind::ExteriorCone) {
            continue;
        }
        let (x, y) = grid.coord(idx);
        profile.eval(x, y, &mut u0[idx * m..(idx + 1) * m], &mut u1[idx * m..(idx + 1) * m]);
    }
    (u0, u1)
}

/// State at `t = 0` with a second-order Taylor start for the older levels.
/// Data touching the obstacle are refused unless `allow_overlap` is set, in
/// which case the caller is expected to run [`check_compatibility`].
pub fn sample_data(
    profile: &DataProfile,
    grid: &ExteriorGrid,
    cubic: &CubicTerm,
    dt: f64,
    allow_overlap: bool,
) -> Result<crate::fields::FieldState, InitError> {
    profile.validate()?;
    if cubic.components() != profile.m() {
        return Err(InitError::Components {
            profile: profile.m(),
            tensor: cubic.components(),
        });
    }
    if !allow_overlap {
        if let Some(e) = grid.shape().and_then(|s| profile.overlap(s)) {
            return Err(e);
        }
    }
    let (u0, u1) = sample_fields(profile, grid);
    let solver = crate::solver::Solver::new(grid, cubic, std::sync::Arc::new(crate::solver::ExactCone), None, dt)?;
    Ok(solver.initial_state(&u0, &u1, dt)?)
}

/// Same as [`sample_fields`] but on every node, ignoring the obstacle.
fn sample_smooth(profile: &DataProfile, grid: &ExteriorGrid) -> (Vec<f64>, Vec<f64>) {
    let m = profile.m();
    let mut u0 = vec![0.0; grid.len() * m];
    let mut u1 = vec![0.0; grid.len() * m];
    for idx in 0..grid.len() {
        let (x, y) = grid.coord(idx);
        profile.eval(x, y, &mut u0[idx * m..(idx + 1) * m], &mut u1[idx * m..(idx + 1) * m]);
    }
    (u0, u1)
}

/// Obstacle-free lattice covering the data support with room for `pad`
/// stencil widths, on the same node positions as any grid of spacing `h`.
pub fn local_grid(profile: &DataProfile, h: f64, pad: usize) -> ExteriorGrid {
    let r = profile.m0 + (pad as f64 + 2.0) * h;
    ExteriorGrid::free(h, r).expect("M0 > 1 and h > 0 give a valid extent")
}

/// `F_0, …, F_{k_max}` on an obstacle-free lattice.
#[derive(Debug, Clone)]
pub struct TimeDerivs {
    pub grid: ExteriorGrid,
    pub m: usize,
    /// `fields[k]` is `F_k`, components interleaved.
    pub fields: Vec<Vec<f64>>,
}

impl TimeDerivs {
    /// `F_k^c` at the lattice point `(x, y)`, zero off the lattice.
    pub fn at(&self, k: usize, c: usize, x: f64, y: f64) -> f64 {
        self.grid.node_at(x, y).map_or(0.0, |idx| self.fields[k][idx * self.m + c])
    }
}

fn multinomial3(k: usize, p: usize, q: usize) -> f64 {
    let f = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    f(k) / (f(p) * f(q) * f(k - p - q))
}

/// The time-derivative recursion `F_k = Δ F_{k−2} + ∂_t^{k−2} N(u)` at `t = 0`
/// with the Leibniz rule over each cubic term `u^J ∂_α u^K ∂_β u^L`.
pub fn timederivs_at_zero(profile: &DataProfile, cubic: &CubicTerm, h: f64, k_max: usize) -> Result<TimeDerivs, InitError> {
    if k_max > K_MAX_CAP {
        return Err(InitError::Cap(k_max));
    }
    profile.validate()?;
    let m = profile.m();
    if cubic.components() != m {
        return Err(InitError::Components {
            profile: m,
            tensor: cubic.components(),
        });
    }
    let grid = local_grid(profile, h, k_max + 2);
    let len = grid.len();
    let (u0, u1) = sample_smooth(profile, &grid);
    let mut fields = vec![u0, u1];
    fields.truncate(k_max + 1);
    // Spatial gradients of each F_j, computed once per level.
    let grad = |f: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut g1 = vec![0.0; len * m];
        let mut g2 = vec![0.0; len * m];
        for idx in 0..len {
            for c in 0..m {
                g1[idx * m + c] = d1(&grid, Comp::of(f, m, c), idx, 0, Trace::Free);
                g2[idx * m + c] = d1(&grid, Comp::of(f, m, c), idx, 1, Trace::Free);
            }
        }
        (g1, g2)
    };
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = fields.iter().map(|f| grad(f)).collect();
    for k in 2..=k_max {
        let base = &fields[k - 2];
        let mut fk = vec![0.0; len * m];
        for idx in 0..len {
            for c in 0..m {
                let f = Comp::of(base, m, c);
                fk[idx * m + c] = d2(&grid, f, idx, 0, Trace::Free) + d2(&grid, f, idx, 1, Trace::Free);
            }
        }
        // ∂_t^j of u, ∂_t u, ∂_1 u, ∂_2 u at a node, components interleaved
        let kk = k - 2;
        let deriv = |j: usize, slot: usize, idx: usize, c: usize| -> f64 {
            match slot {
                0 => fields[j][idx * m + c],
                1 => fields[j + 1][idx * m + c],
                2 => grads[j].0[idx * m + c],
                _ => grads[j].1[idx * m + c],
            }
        };
        for e in cubic.entries() {
            let (i, j, kc, l) = (e.i as usize, e.j as usize, e.k as usize, e.l as usize);
            let (sa, sb) = (1 + e.alpha as usize, 1 + e.beta as usize);
            for p in 0..=kk {
                for q in 0..=kk - p {
                    let r = kk - p - q;
                    let w = e.value * multinomial3(kk, p, q);
                    for idx in 0..len {
                        fk[idx * m + i] += w * deriv(p, 0, idx, j) * deriv(q, sa, idx, kc) * deriv(r, sb, idx, l);
                    }
                }
            }
        }
        if fk.iter().any(|v| !v.is_finite()) {
            return Err(InitError::NonFinite(k));
        }
        grads.push(grad(&fk));
        fields.push(fk);
    }
    Ok(TimeDerivs { grid, m, fields })
}

/// Residuals of the compatibility conditions on `∂K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatReport {
    pub order: usize,
    pub tol: f64,
    /// `max |F_k|` over boundary points, for each `k ≤ order`.
    pub per_order: Vec<f64>,
    pub max_residual: f64,
    /// `(k, x, y)` of the boundary point attaining the maximum.
    pub worst: Option<(usize, f64, f64)>,
    pub pass: bool,
}

/// Interpolate each `F_k` to the boundary point of every cut grid segment.
pub fn check_compatibility(
    profile: &DataProfile,
    cubic: &CubicTerm,
    grid: &ExteriorGrid,
    order: usize,
    tol: f64,
) -> Result<CompatReport, InitError> {
    let td = timederivs_at_zero(profile, cubic, grid.h(), order)?;
    let m = td.m;
    let mut per_order = vec![0.0f64; order + 1];
    let mut worst: Option<(usize, f64, f64)> = None;
    let mut max_residual = 0.0f64;
    for cut in grid.cuts() {
        let (px, py) = grid.coord(cut.node);
        for d in Dir::ALL {
            let Some(theta) = cut.frac[d as usize] else {
                continue;
            };
            let (dx, dy) = d.offset();
            let (qx, qy) = (px + dx as f64 * grid.h(), py + dy as f64 * grid.h());
            for (k, slot) in per_order.iter_mut().enumerate() {
                for c in 0..m {
                    let v = ((1.0 - theta) * td.at(k, c, px, py) + theta * td.at(k, c, qx, qy)).abs();
                    *slot = slot.max(v);
                    if v > max_residual {
                        max_residual = v;
                        worst = Some((k, px + theta * dx as f64 * grid.h(), py + theta * dy as f64 * grid.h()));
                    }
                }
            }
        }
    }
    Ok(CompatReport {
        order,
        tol,
        per_order,
        max_residual,
        worst,
        pass: max_residual <= tol,
    })
}

/// Discrete `‖u0‖_{H^4} + ‖u1‖_{H^3}` of the unscaled data (ε = 1), summing
/// all partial derivatives `∂_1^p ∂_2^q` with `p + q` up to the order.
pub fn data_norm_h4(profile: &DataProfile, h: f64) -> f64 {
    let grid = local_grid(profile, h, 6);
    let mut unit = profile.clone();
    unit.epsilon = 1.0;
    let (u0, u1) = sample_smooth(&unit, &grid);
    let m = profile.m();
    let norm = |f: &[f64], order: usize| -> f64 {
        let mut total = 0.0;
        for c in 0..m {
            let base: Vec<f64> = f.iter().skip(c).step_by(m).copied().collect();
            // rows[p] holds ∂_1^p of the component
            let mut by_p = vec![base];
            for p in 1..=order {
                let prev = &by_p[p - 1];
                by_p.push((0..grid.len()).map(|idx| d1(&grid, Comp::plain(prev), idx, 0, Trace::Free)).collect());
            }
            for (p, fp) in by_p.iter().enumerate() {
                let mut g = fp.clone();
                for q in 0..=order - p {
                    if q > 0 {
                        g = (0..grid.len()).map(|idx| d1(&grid, Comp::plain(&g), idx, 1, Trace::Free)).collect();
                    }
                    total += g.iter().map(|v| v * v).sum::<f64>() * h * h;
                }
            }
        }
        total.sqrt()
    };
    norm(&u0, 4) + norm(&u1, 3)
}
