//! The evolving field and its difference operators.
//!
//! Levels are stored node-major with components interleaved:
//! `level[idx * M + I]`. All operators read through [`Comp`], a strided view
//! of one component, so plain single-component arrays and state levels share
//! one code path.
//!
//! Derivatives near the obstacle come in two flavours. Fields that vanish on
//! `∂K` (the solution and its time derivatives) use [`Trace::Dirichlet`]:
//! the boundary point at fractional distance `θh` enters the stencil with
//! value zero. Everything else (spatial derivatives, rotated fields) uses
//! [`Trace::Free`], which falls back to one-sided differences on grid nodes.

use crate::geometry::{Closure, Dir, ExteriorGrid, NodeKind};

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("component {0} out of range (M = {1})")]
    Component(usize, usize),
    #[error("vector-field order |a| = {order} exceeds z_max = {z_max}")]
    Order { order: usize, z_max: usize },
    #[error("{0} time derivatives need more than the three stored levels")]
    TimeLevels(usize),
    #[error("non-finite value at node {node} (x = {x:.4}, y = {y:.4}), component {component}, t = {t}")]
    NonFinite {
        node: usize,
        x: f64,
        y: f64,
        component: usize,
        t: f64,
    },
    #[error("level length {got} does not match grid ({expected})")]
    Shape { got: usize, expected: usize },
}

/// Strided read-only view of one component.
#[derive(Clone, Copy)]
pub struct Comp<'a> {
    data: &'a [f64],
    stride: usize,
    offset: usize,
}

impl<'a> Comp<'a> {
    pub fn plain(data: &'a [f64]) -> Self {
        Self {
            data,
            stride: 1,
            offset: 0,
        }
    }

    pub fn of(data: &'a [f64], m: usize, component: usize) -> Self {
        Self {
            data,
            stride: m,
            offset: component,
        }
    }

    #[inline(always)]
    pub fn get(&self, idx: usize) -> f64 {
        self.data[idx * self.stride + self.offset]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trace {
    Dirichlet,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Node(usize),
    Cut(f64),
    Missing,
}

#[inline]
fn side(grid: &ExteriorGrid, idx: usize, d: Dir) -> Side {
    match grid.neighbor(idx, d) {
        None => Side::Missing,
        Some(nb) if grid.kind(nb) == NodeKind::Obstacle => {
            let theta = grid.cut(idx).and_then(|c| c.frac[d as usize]).unwrap_or(1.0);
            Side::Cut(theta)
        }
        Some(nb) => Side::Node(nb),
    }
}

#[inline]
fn axis_dirs(axis: usize) -> (Dir, Dir) {
    if axis == 0 {
        (Dir::West, Dir::East)
    } else {
        (Dir::South, Dir::North)
    }
}

/// One-sided first derivative from `idx` going in direction `d`, in the
/// coordinate orientation of the positive direction of that axis.
fn one_sided_d1(grid: &ExteriorGrid, f: Comp, idx: usize, d: Dir, sign: f64) -> f64 {
    let h = grid.h();
    let Some(n1) = grid.neighbor(idx, d).filter(|&k| grid.in_domain(k)) else {
        return 0.0;
    };
    match grid.neighbor(n1, d).filter(|&k| grid.in_domain(k)) {
        Some(n2) => sign * (-3.0 * f.get(idx) + 4.0 * f.get(n1) - f.get(n2)) / (2.0 * h),
        None => sign * (f.get(n1) - f.get(idx)) / h,
    }
}

fn one_sided_d2(grid: &ExteriorGrid, f: Comp, idx: usize, d: Dir) -> f64 {
    let h = grid.h();
    let Some(n1) = grid.neighbor(idx, d).filter(|&k| grid.in_domain(k)) else {
        return 0.0;
    };
    match grid.neighbor(n1, d).filter(|&k| grid.in_domain(k)) {
        Some(n2) => (f.get(idx) - 2.0 * f.get(n1) + f.get(n2)) / (h * h),
        None => 0.0,
    }
}

/// First derivative along `axis` (0 = x, 1 = y) at `idx`.
pub fn d1(grid: &ExteriorGrid, f: Comp, idx: usize, axis: usize, trace: Trace) -> f64 {
    if grid.kind(idx) == NodeKind::Obstacle {
        return 0.0;
    }
    let h = grid.h();
    let (dm, dp) = axis_dirs(axis);
    match (side(grid, idx, dm), side(grid, idx, dp)) {
        (Side::Node(m), Side::Node(p)) => (f.get(p) - f.get(m)) / (2.0 * h),
        (sm, sp) => match trace {
            Trace::Dirichlet if matches!(sm, Side::Cut(_)) || matches!(sp, Side::Cut(_)) => {
                let (a, fm) = match sm {
                    Side::Node(m) => (h, f.get(m)),
                    Side::Cut(t) => (t * h, 0.0),
                    Side::Missing => (h, 0.0),
                };
                let (b, fp) = match sp {
                    Side::Node(p) => (h, f.get(p)),
                    Side::Cut(t) => (t * h, 0.0),
                    Side::Missing => (h, 0.0),
                };
                let f0 = f.get(idx);
                -b / (a * (a + b)) * fm + (b - a) / (a * b) * f0 + a / (b * (a + b)) * fp
            }
            _ => match (sm, sp) {
                (_, Side::Node(_)) => one_sided_d1(grid, f, idx, dp, 1.0),
                (Side::Node(_), _) => one_sided_d1(grid, f, idx, dm, -1.0),
                _ => 0.0,
            },
        },
    }
}

/// Second derivative along `axis`. With the Dirichlet trace this is the
/// Shortley–Weller three-point formula on the fractional stencil.
pub fn d2(grid: &ExteriorGrid, f: Comp, idx: usize, axis: usize, trace: Trace) -> f64 {
    if grid.kind(idx) == NodeKind::Obstacle {
        return 0.0;
    }
    let h = grid.h();
    let (dm, dp) = axis_dirs(axis);
    match (side(grid, idx, dm), side(grid, idx, dp)) {
        (Side::Node(m), Side::Node(p)) => (f.get(p) - 2.0 * f.get(idx) + f.get(m)) / (h * h),
        (sm, sp) => {
            let cut = matches!(sm, Side::Cut(_)) || matches!(sp, Side::Cut(_));
            let has_missing = matches!(sm, Side::Missing) || matches!(sp, Side::Missing);
            if trace == Trace::Dirichlet && cut && !has_missing {
                let (a, fm) = match sm {
                    Side::Node(m) => (h, f.get(m)),
                    Side::Cut(t) => (t * h, 0.0),
                    Side::Missing => unreachable!(),
                };
                let (b, fp) = match sp {
                    Side::Node(p) => (h, f.get(p)),
                    Side::Cut(t) => (t * h, 0.0),
                    Side::Missing => unreachable!(),
                };
                shortley_weller(a, b, fm, f.get(idx), fp)
            } else {
                match (sm, sp) {
                    (_, Side::Node(_)) => one_sided_d2(grid, f, idx, dp),
                    (Side::Node(_), _) => one_sided_d2(grid, f, idx, dm),
                    _ => 0.0,
                }
            }
        }
    }
}

/// `f''(0)` from samples at `-a`, `0`, `b`.
#[inline]
pub fn shortley_weller(a: f64, b: f64, fm: f64, f0: f64, fp: f64) -> f64 {
    2.0 * (fm / (a * (a + b)) - f0 / (a * b) + fp / (b * (a + b)))
}

/// Mixed derivative `∂_1 ∂_2 f`: free x-difference of the y-derivative.
pub fn d12(grid: &ExteriorGrid, f: Comp, idx: usize, trace: Trace) -> f64 {
    if grid.kind(idx) == NodeKind::Obstacle {
        return 0.0;
    }
    let h = grid.h();
    let g = |k: usize| d1(grid, f, k, 1, trace);
    let w = grid.neighbor(idx, Dir::West).filter(|&k| grid.in_domain(k));
    let e = grid.neighbor(idx, Dir::East).filter(|&k| grid.in_domain(k));
    match (w, e) {
        (Some(w), Some(e)) => (g(e) - g(w)) / (2.0 * h),
        (None, Some(e)) => match grid.neighbor(e, Dir::East).filter(|&k| grid.in_domain(k)) {
            Some(ee) => (-3.0 * g(idx) + 4.0 * g(e) - g(ee)) / (2.0 * h),
            None => (g(e) - g(idx)) / h,
        },
        (Some(w), None) => match grid.neighbor(w, Dir::West).filter(|&k| grid.in_domain(k)) {
            Some(ww) => (3.0 * g(idx) - 4.0 * g(w) + g(ww)) / (2.0 * h),
            None => (g(idx) - g(w)) / h,
        },
        (None, None) => 0.0,
    }
}

/// Discrete Laplacian used by the solver (Shortley–Weller at cut nodes).
#[inline]
pub fn laplacian_at(grid: &ExteriorGrid, f: Comp, idx: usize) -> f64 {
    d2(grid, f, idx, 0, Trace::Dirichlet) + d2(grid, f, idx, 1, Trace::Dirichlet)
}

/// Laplacian of a single-component field at every node (zero on obstacle
/// and frame nodes).
pub fn laplacian(grid: &ExteriorGrid, f: &[f64]) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| match grid.kind(idx) {
            NodeKind::Interior | NodeKind::BoundaryAdjacent => laplacian_at(grid, Comp::plain(f), idx),
            _ => 0.0,
        })
        .collect()
}

/// Value and spatial derivatives up to second order at a node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpatialJet {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f11: f64,
    pub f12: f64,
    pub f22: f64,
}

impl SpatialJet {
    pub fn gradient_sq(&self) -> f64 {
        self.f1 * self.f1 + self.f2 * self.f2
    }

    pub fn laplacian(&self) -> f64 {
        self.f11 + self.f22
    }

    /// `Ω f = x_1 ∂_2 f − x_2 ∂_1 f`.
    pub fn omega(&self, x: f64, y: f64) -> f64 {
        x * self.f2 - y * self.f1
    }

    /// `Z^a f` for every spatial multi-index `|a| ≤ 2` over `(∂_1, ∂_2, Ω)`,
    /// composed in the fixed order `∂_1^{a1} ∂_2^{a2} Ω^{a3}`.
    ///
    /// Order: `1, ∂1, ∂2, Ω, ∂1², ∂1∂2, ∂1Ω, ∂2², ∂2Ω, Ω²`.
    pub fn z_up_to_two(&self, x: f64, y: f64) -> [f64; 10] {
        let j = self;
        let om = j.omega(x, y);
        let d1_om = j.f2 + x * j.f12 - y * j.f11;
        let d2_om = -j.f1 + x * j.f22 - y * j.f12;
        let om_om = x * d2_om - y * d1_om;
        [j.f, j.f1, j.f2, om, j.f11, j.f12, d1_om, j.f22, d2_om, om_om]
    }
}

#[inline]
fn fast_path(grid: &ExteriorGrid, idx: usize) -> bool {
    grid.kind(idx) == NodeKind::Interior
        && Dir::ALL
            .iter()
            .all(|&d| grid.neighbor(idx, d).is_some_and(|k| grid.kind(k) == NodeKind::Interior))
}

/// Spatial jet of a field vanishing on `∂K`.
pub fn spatial_jet(grid: &ExteriorGrid, f: Comp, idx: usize) -> SpatialJet {
    if grid.kind(idx) == NodeKind::Obstacle {
        return SpatialJet::default();
    }
    if fast_path(grid, idx) {
        let n = grid.n();
        let h = grid.h();
        let c = f.get(idx);
        let (e, w, no, s) = (f.get(idx + 1), f.get(idx - 1), f.get(idx + n), f.get(idx - n));
        let (ne, nw, se, sw) = (
            f.get(idx + n + 1),
            f.get(idx + n - 1),
            f.get(idx - n + 1),
            f.get(idx - n - 1),
        );
        let h2 = h * h;
        return SpatialJet {
            f: c,
            f1: (e - w) / (2.0 * h),
            f2: (no - s) / (2.0 * h),
            f11: (e - 2.0 * c + w) / h2,
            f12: (ne - se - nw + sw) / (4.0 * h2),
            f22: (no - 2.0 * c + s) / h2,
        };
    }
    SpatialJet {
        f: f.get(idx),
        f1: d1(grid, f, idx, 0, Trace::Dirichlet),
        f2: d1(grid, f, idx, 1, Trace::Dirichlet),
        f11: d2(grid, f, idx, 0, Trace::Dirichlet),
        f12: d12(grid, f, idx, Trace::Dirichlet),
        f22: d2(grid, f, idx, 1, Trace::Dirichlet),
    }
}

/// Space-time jet: value and all derivatives up to second order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub ut: f64,
    pub utt: f64,
    pub u1: f64,
    pub u2: f64,
    pub ut1: f64,
    pub ut2: f64,
    pub u11: f64,
    pub u12: f64,
    pub u22: f64,
}

impl Jet {
    /// `[∂_t, ∂_1, ∂_2]` of `Z^a u` for `a ∈ {0, ∂_t, ∂_1, ∂_2, Ω}`, and the
    /// value `Z^a u` itself, at the point `(x, y)`.
    pub fn z_first_order(&self, x: f64, y: f64) -> [(f64, [f64; 3]); 5] {
        let j = self;
        [
            (j.u, [j.ut, j.u1, j.u2]),
            (j.ut, [j.utt, j.ut1, j.ut2]),
            (j.u1, [j.ut1, j.u11, j.u12]),
            (j.u2, [j.ut2, j.u12, j.u22]),
            (
                x * j.u2 - y * j.u1,
                [
                    x * j.ut2 - y * j.ut1,
                    j.u2 + x * j.u12 - y * j.u11,
                    -j.u1 + x * j.u22 - y * j.u12,
                ],
            ),
        ]
    }

    /// `Z^a u` for every `|a| ≤ 2`, composed as `∂_t^{a1} ∂_1^{a2} ∂_2^{a3} Ω^{a4}`.
    ///
    /// Order: `1, ∂t, ∂1, ∂2, Ω`, then `∂t², ∂t∂1, ∂t∂2, ∂tΩ, ∂1², ∂1∂2, ∂1Ω,
    /// ∂2², ∂2Ω, Ω²`.
    pub fn z_values(&self, x: f64, y: f64) -> [f64; 15] {
        let j = self;
        let d1_om = j.u2 + x * j.u12 - y * j.u11;
        let d2_om = -j.u1 + x * j.u22 - y * j.u12;
        [
            j.u,
            j.ut,
            j.u1,
            j.u2,
            x * j.u2 - y * j.u1,
            j.utt,
            j.ut1,
            j.ut2,
            x * j.ut2 - y * j.ut1,
            j.u11,
            j.u12,
            d1_om,
            j.u22,
            d2_om,
            x * d2_om - y * d1_om,
        ]
    }

    /// Squares of all pure derivatives `∂^a u` with `|a| ≤ 2`, summed by order.
    pub fn derivative_orders_sq(&self) -> [f64; 3] {
        let j = self;
        [
            j.u * j.u,
            j.ut * j.ut + j.u1 * j.u1 + j.u2 * j.u2,
            j.utt * j.utt + j.ut1 * j.ut1 + j.ut2 * j.ut2 + j.u11 * j.u11 + j.u12 * j.u12 + j.u22 * j.u22,
        ]
    }
}

/// Three consecutive levels centred at `t`; the view used by diagnostics.
#[derive(Clone, Copy)]
pub struct TimeSlice<'a> {
    pub prev: &'a [f64],
    pub curr: &'a [f64],
    pub next: &'a [f64],
    pub m: usize,
    pub t: f64,
    pub dt: f64,
}

impl<'a> TimeSlice<'a> {
    pub fn jet(&self, grid: &ExteriorGrid, component: usize, idx: usize) -> Jet {
        if grid.kind(idx) == NodeKind::Obstacle {
            return Jet::default();
        }
        let (m, c) = (self.m, component);
        let cur = spatial_jet(grid, Comp::of(self.curr, m, c), idx);
        let (nx, px) = (Comp::of(self.next, m, c), Comp::of(self.prev, m, c));
        let inv2dt = 0.5 / self.dt;
        let (n1, n2, p1, p2);
        if fast_path(grid, idx) {
            let n = grid.n();
            let h2 = 2.0 * grid.h();
            n1 = (nx.get(idx + 1) - nx.get(idx - 1)) / h2;
            n2 = (nx.get(idx + n) - nx.get(idx - n)) / h2;
            p1 = (px.get(idx + 1) - px.get(idx - 1)) / h2;
            p2 = (px.get(idx + n) - px.get(idx - n)) / h2;
        } else {
            n1 = d1(grid, nx, idx, 0, Trace::Dirichlet);
            n2 = d1(grid, nx, idx, 1, Trace::Dirichlet);
            p1 = d1(grid, px, idx, 0, Trace::Dirichlet);
            p2 = d1(grid, px, idx, 1, Trace::Dirichlet);
        }
        let (un, up) = (nx.get(idx), px.get(idx));
        Jet {
            u: cur.f,
            ut: (un - up) * inv2dt,
            utt: (un - 2.0 * cur.f + up) / (self.dt * self.dt),
            u1: cur.f1,
            u2: cur.f2,
            ut1: (n1 - p1) * inv2dt,
            ut2: (n2 - p2) * inv2dt,
            u11: cur.f11,
            u12: cur.f12,
            u22: cur.f22,
        }
    }
}

/// Inclusive index box outside of which every stored level is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveBox {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl ActiveBox {
    pub fn empty() -> Self {
        Self {
            i0: usize::MAX,
            i1: 0,
            j0: usize::MAX,
            j1: 0,
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            i0: 0,
            i1: n - 1,
            j0: 0,
            j1: n - 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.i0 > self.i1 || self.j0 > self.j1
    }

    pub fn include(&mut self, i: usize, j: usize) {
        self.i0 = self.i0.min(i);
        self.i1 = self.i1.max(i);
        self.j0 = self.j0.min(j);
        self.j1 = self.j1.max(j);
    }

    pub fn union(&self, other: &ActiveBox) -> ActiveBox {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        ActiveBox {
            i0: self.i0.min(other.i0),
            i1: self.i1.max(other.i1),
            j0: self.j0.min(other.j0),
            j1: self.j1.max(other.j1),
        }
    }

    /// Grow by `k` nodes, clipped to `[0, n-1]`.
    pub fn grown(&self, k: usize, n: usize) -> ActiveBox {
        if self.is_empty() {
            return *self;
        }
        ActiveBox {
            i0: self.i0.saturating_sub(k),
            i1: (self.i1 + k).min(n - 1),
            j0: self.j0.saturating_sub(k),
            j1: (self.j1 + k).min(n - 1),
        }
    }

    /// Bounding box of the nonzero nodes of interleaved levels.
    pub fn of_support(levels: &[&[f64]], m: usize, n: usize) -> ActiveBox {
        let mut b = ActiveBox::empty();
        for lvl in levels {
            for (node, chunk) in lvl.chunks_exact(m).enumerate() {
                if chunk.iter().any(|&v| v != 0.0) {
                    b.include(node % n, node / n);
                }
            }
        }
        b
    }
}

/// The M-component solution at the current and previous time levels, plus
/// one older level used for the second-order one-sided time derivative in
/// the nonlinearity.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub(crate) m: usize,
    pub(crate) t: f64,
    pub(crate) dt: f64,
    pub(crate) history: Vec<f64>,
    pub(crate) prev: Vec<f64>,
    pub(crate) curr: Vec<f64>,
    /// Workspace for the level being built; zero outside the active box.
    pub(crate) scratch: Vec<f64>,
    pub(crate) steps: u64,
    pub(crate) active: ActiveBox,
}

impl FieldState {
    pub fn zeros(grid: &ExteriorGrid, m: usize, dt: f64) -> Self {
        let len = grid.len() * m;
        Self {
            m,
            t: 0.0,
            dt,
            history: vec![0.0; len],
            prev: vec![0.0; len],
            curr: vec![0.0; len],
            scratch: vec![0.0; len],
            steps: 0,
            active: ActiveBox::empty(),
        }
    }

    /// State from explicit levels `(u(t-2dt), u(t-dt), u(t))`.
    pub fn from_levels(
        grid: &ExteriorGrid,
        m: usize,
        t: f64,
        dt: f64,
        history: Vec<f64>,
        prev: Vec<f64>,
        curr: Vec<f64>,
    ) -> Result<Self, FieldError> {
        let expected = grid.len() * m;
        for l in [&history, &prev, &curr] {
            if l.len() != expected {
                return Err(FieldError::Shape {
                    got: l.len(),
                    expected,
                });
            }
        }
        let active = ActiveBox::of_support(&[&history, &prev, &curr], m, grid.n());
        Ok(Self {
            m,
            t,
            dt,
            history,
            prev,
            curr,
            scratch: vec![0.0; expected],
            steps: 0,
            active,
        })
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn curr(&self) -> &[f64] {
        &self.curr
    }

    pub fn prev(&self) -> &[f64] {
        &self.prev
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn active_box(&self) -> ActiveBox {
        self.active
    }

    pub fn component(&self, c: usize) -> Result<Comp<'_>, FieldError> {
        if c >= self.m {
            return Err(FieldError::Component(c, self.m));
        }
        Ok(Comp::of(&self.curr, self.m, c))
    }

    /// Copy of one component of the current level.
    pub fn extract(&self, c: usize) -> Vec<f64> {
        self.curr.iter().skip(c).step_by(self.m).copied().collect()
    }

    /// Run time backwards from here: swap the two newest levels and negate
    /// `dt`. Exact for the linear scheme; the older history level is rebuilt
    /// by linear extrapolation, so the nonlinear update is only approximately
    /// reversed.
    pub fn reverse_time(&mut self) {
        std::mem::swap(&mut self.prev, &mut self.curr);
        self.t -= self.dt;
        self.dt = -self.dt;
        for ((h, &p), &c) in self.history.iter_mut().zip(&self.prev).zip(&self.curr) {
            *h = 2.0 * p - c;
        }
    }

    pub fn check_finite(&self, grid: &ExteriorGrid) -> Result<(), FieldError> {
        if let Some(pos) = self.curr.iter().position(|v| !v.is_finite()) {
            let node = pos / self.m;
            let (x, y) = grid.coord(node);
            return Err(FieldError::NonFinite {
                node,
                x,
                y,
                component: pos % self.m,
                t: self.t,
            });
        }
        Ok(())
    }

    /// Largest `|x|` over nodes where the current level is nonzero.
    pub fn support_radius(&self, grid: &ExteriorGrid) -> f64 {
        let mut r = 0.0f64;
        for (node, chunk) in self.curr.chunks_exact(self.m).enumerate() {
            if chunk.iter().any(|&v| v != 0.0) {
                let (x, y) = grid.coord(node);
                r = r.max(x.hypot(y));
            }
        }
        r
    }
}

/// `(∂_1 f, ∂_2 f)` of component `c` of the current level.
pub fn spatial_derivs(grid: &ExteriorGrid, state: &FieldState, c: usize) -> Result<(Vec<f64>, Vec<f64>), FieldError> {
    let f = state.component(c)?;
    let mut g1 = vec![0.0; grid.len()];
    let mut g2 = vec![0.0; grid.len()];
    for idx in 0..grid.len() {
        g1[idx] = d1(grid, f, idx, 0, Trace::Dirichlet);
        g2[idx] = d1(grid, f, idx, 1, Trace::Dirichlet);
    }
    Ok((g1, g2))
}

/// How [`time_derivative`] approximated `∂_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDifference {
    /// `(u^{n+1} − u^{n−1}) / 2dt`.
    Centered,
    /// `(3u^n − 4u^{n−1} + u^{n−2}) / 2dt`.
    Backward2,
}

/// `∂_t u^c` at the current level: centred when the next level is supplied,
/// otherwise the second-order backward difference over the stored levels.
pub fn time_derivative(state: &FieldState, c: usize, next: Option<&[f64]>) -> Result<(Vec<f64>, TimeDifference), FieldError> {
    state.component(c)?;
    let m = state.m;
    let dt = state.dt;
    let at = |lvl: &[f64], node: usize| lvl[node * m + c];
    let nodes = state.curr.len() / m;
    Ok(match next {
        Some(nx) => (
            (0..nodes).map(|k| (at(nx, k) - at(&state.prev, k)) / (2.0 * dt)).collect(),
            TimeDifference::Centered,
        ),
        None => (
            (0..nodes)
                .map(|k| (3.0 * at(&state.curr, k) - 4.0 * at(&state.prev, k) + at(&state.history, k)) / (2.0 * dt))
                .collect(),
            TimeDifference::Backward2,
        ),
    })
}

/// `Ω f` at every node.
pub fn apply_omega(grid: &ExteriorGrid, f: &[f64], trace: Trace) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            let (x, y) = grid.coord(idx);
            let c = Comp::plain(f);
            x * d1(grid, c, idx, 1, trace) - y * d1(grid, c, idx, 0, trace)
        })
        .collect()
}

fn apply_d(grid: &ExteriorGrid, f: &[f64], axis: usize, trace: Trace) -> Vec<f64> {
    (0..grid.len()).map(|idx| d1(grid, Comp::plain(f), idx, axis, trace)).collect()
}

/// Multi-index over `Z = (∂_t, ∂_1, ∂_2, Ω)`.
pub type ZIndex = [usize; 4];

pub fn z_order(a: &ZIndex) -> usize {
    a.iter().sum()
}

/// `Z^a f = ∂_t^{a1} ∂_1^{a2} ∂_2^{a3} Ω^{a4} f` for a field given on three
/// time levels `[prev, curr, next]` (single component). The first spatial
/// operator uses `trace`; later ones differentiate derived fields and use
/// the free trace.
pub fn apply_z_levels(
    grid: &ExteriorGrid,
    a: &ZIndex,
    levels: [&[f64]; 3],
    dt: f64,
    trace: Trace,
    z_max: usize,
) -> Result<Vec<f64>, FieldError> {
    let order = z_order(a);
    if order > z_max {
        return Err(FieldError::Order { order, z_max });
    }
    if a[0] > 2 {
        return Err(FieldError::TimeLevels(a[0]));
    }
    let spatial = |f: &[f64]| -> Vec<f64> {
        let mut cur = f.to_vec();
        let mut tr = trace;
        for _ in 0..a[3] {
            cur = apply_omega(grid, &cur, tr);
            tr = Trace::Free;
        }
        for _ in 0..a[2] {
            cur = apply_d(grid, &cur, 1, tr);
            tr = Trace::Free;
        }
        for _ in 0..a[1] {
            cur = apply_d(grid, &cur, 0, tr);
            tr = Trace::Free;
        }
        cur
    };
    Ok(match a[0] {
        0 => spatial(levels[1]),
        1 => {
            let (p, n) = (spatial(levels[0]), spatial(levels[2]));
            p.iter().zip(&n).map(|(p, n)| (n - p) / (2.0 * dt)).collect()
        }
        _ => {
            let (p, c, n) = (spatial(levels[0]), spatial(levels[1]), spatial(levels[2]));
            p.iter()
                .zip(&c)
                .zip(&n)
                .map(|((p, c), n)| (n - 2.0 * c + p) / (dt * dt))
                .collect()
        }
    })
}

/// `Z^a u^c` on a time slice of the solution.
pub fn apply_z(grid: &ExteriorGrid, a: &ZIndex, slice: &TimeSlice, c: usize, z_max: usize) -> Result<Vec<f64>, FieldError> {
    if c >= slice.m {
        return Err(FieldError::Component(c, slice.m));
    }
    let take = |l: &[f64]| -> Vec<f64> { l.iter().skip(c).step_by(slice.m).copied().collect() };
    let (p, cu, n) = (take(slice.prev), take(slice.curr), take(slice.next));
    apply_z_levels(grid, a, [&p, &cu, &n], slice.dt, Trace::Dirichlet, z_max)
}

/// `∂̄_i u = (x_i/|x|) ∂_t u + ∂_i u` with `i ∈ {1, 2}`; zero at nodes with
/// `|x| < h`, which every reduction excludes.
pub fn good_derivative(grid: &ExteriorGrid, dt_u: &[f64], di_u: &[f64], i: usize) -> Vec<f64> {
    let h = grid.h();
    (0..grid.len())
        .map(|idx| {
            let (x, y) = grid.coord(idx);
            let r = x.hypot(y);
            if r < h {
                return 0.0;
            }
            let w = if i == 1 { x / r } else { y / r };
            w * dt_u[idx] + di_u[idx]
        })
        .collect()
}

/// Whether `idx` is a node whose value comes from an interpolation closure.
pub fn is_interpolated(grid: &ExteriorGrid, idx: usize) -> bool {
    matches!(grid.cut(idx).map(|c| c.closure), Some(Closure::Interpolated { .. }))
}
