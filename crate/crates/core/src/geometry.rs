//! Star-shaped obstacles and the masked Cartesian grid of the exterior domain.
//!
//! The obstacle is the region `r < ρ(θ)` with
//! `ρ(θ) = r0 · (1 + Σ_k a_k cos kθ + b_k sin kθ)`. A positive radial graph is
//! star-shaped with respect to the origin by construction, so every shape
//! that passes [`validate_shape`] is admissible.
//!
//! The grid is uniform on `[-R, R]²` with a node at the origin. Nodes next to
//! the obstacle carry the fractional distance to the boundary along each cut
//! grid line, which the solver uses for second-order Dirichlet closure.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative slack used when deciding whether a node lies in the closed
/// obstacle. Nodes sitting on the boundary up to rounding carry the
/// Dirichlet value and are treated as obstacle nodes.
const CLOSURE_RTOL: f64 = 1e-12;

/// Fractions below this use the interpolation closure instead of the
/// Shortley–Weller stencil (explicit stability of the leapfrog update).
pub const DEFAULT_MIN_FRACTION: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("non-finite shape parameter: {0}")]
    NonFinite(String),
    #[error("radial graph is not positive: rho({theta:.6}) = {rho:.6e}")]
    NonPositiveRadius { theta: f64, rho: f64 },
    #[error("disk obstacles take no Fourier coefficients (got {0})")]
    DiskWithCoefficients(usize),
    #[error("shape violates the boundary normalization: {0}")]
    Rejected(String),
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("outer radius must exceed 1, got {0}")]
    BadOuterRadius(f64),
    #[error("obstacle under-resolved: h = {h} > min rho / 3 = {limit}")]
    UnderResolved { h: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleShape {
    pub kind: ShapeKind,
    pub r0: f64,
    /// `(a_k, b_k)` for `k = 1, 2, ...`.
    #[serde(default)]
    pub fourier: Vec<(f64, f64)>,
}

impl ObstacleShape {
    pub fn disk(r0: f64) -> Self {
        Self {
            kind: ShapeKind::Disk,
            r0,
            fourier: Vec::new(),
        }
    }

    pub fn star(r0: f64, fourier: Vec<(f64, f64)>) -> Self {
        Self {
            kind: ShapeKind::Star,
            r0,
            fourier,
        }
    }

    /// `ρ(θ)`.
    pub fn radius_at(&self, theta: f64) -> f64 {
        if self.fourier.is_empty() {
            return self.r0;
        }
        let mut s = 1.0;
        for (k, &(a, b)) in self.fourier.iter().enumerate() {
            let kt = (k + 1) as f64 * theta;
            s += a * kt.cos() + b * kt.sin();
        }
        self.r0 * s
    }

    /// Whether `(x, y)` lies in the closed obstacle.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let r = x.hypot(y);
        if r == 0.0 {
            return true;
        }
        let rho = if self.fourier.is_empty() {
            self.r0
        } else {
            self.radius_at(y.atan2(x))
        };
        r <= rho * (1.0 + CLOSURE_RTOL)
    }

    /// Signed radial distance `|p| - ρ(arg p)`; negative inside.
    fn radial_gap(&self, x: f64, y: f64) -> f64 {
        let r = x.hypot(y);
        if self.fourier.is_empty() {
            return r - self.r0;
        }
        r - self.radius_at(y.atan2(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub min_rho: f64,
    pub max_rho: f64,
    pub theta_at_min: f64,
    pub theta_at_max: f64,
    pub passes: bool,
    pub violations: Vec<String>,
}

/// Check positivity and the normalization `0 < min ρ`, `max ρ < 1/2`.
///
/// Extrema are located by dense sampling followed by golden-section
/// refinement inside the bracketing samples.
pub fn validate_shape(shape: &ObstacleShape) -> Result<ValidationReport, GeometryError> {
    if !shape.r0.is_finite() {
        return Err(GeometryError::NonFinite(format!("r0 = {}", shape.r0)));
    }
    for (k, &(a, b)) in shape.fourier.iter().enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(GeometryError::NonFinite(format!(
                "coefficient {} = ({a}, {b})",
                k + 1
            )));
        }
    }
    if shape.kind == ShapeKind::Disk && !shape.fourier.is_empty() {
        return Err(GeometryError::DiskWithCoefficients(shape.fourier.len()));
    }

    let samples = (512 * shape.fourier.len()).max(4096);
    let step = 2.0 * PI / samples as f64;
    let (mut imin, mut imax) = (0usize, 0usize);
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..samples {
        let v = shape.radius_at(i as f64 * step);
        if v < vmin {
            vmin = v;
            imin = i;
        }
        if v > vmax {
            vmax = v;
            imax = i;
        }
    }
    let (theta_min, min_rho) = golden(|t| shape.radius_at(t), imin as f64 * step, step, false);
    let (theta_max, max_rho) = golden(|t| shape.radius_at(t), imax as f64 * step, step, true);
    let min_rho = min_rho.min(vmin);
    let max_rho = max_rho.max(vmax);

    if min_rho <= 0.0 {
        return Err(GeometryError::NonPositiveRadius {
            theta: theta_min,
            rho: min_rho,
        });
    }
    let mut violations = Vec::new();
    if max_rho >= 0.5 {
        violations.push(format!("max rho = {max_rho} is not below 1/2"));
    }
    Ok(ValidationReport {
        min_rho,
        max_rho,
        theta_at_min: theta_min,
        theta_at_max: theta_max,
        passes: violations.is_empty(),
        violations,
    })
}

/// Golden-section search for an extremum of `f` in `[c - w, c + w]`.
fn golden(f: impl Fn(f64) -> f64, c: f64, w: f64, maximize: bool) -> (f64, f64) {
    let g = |t: f64| if maximize { -f(t) } else { f(t) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (c - w, c + w);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..80 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = g(x2);
        }
    }
    let t = 0.5 * (a + b);
    (t.rem_euclid(2.0 * PI), f(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[repr(u8)]
pub enum NodeKind {
    /// Inside the closed obstacle; the field is pinned to zero.
    Obstacle = 0,
    /// All four neighbours are regular exterior nodes.
    Interior = 1,
    /// At least one neighbour lies in the obstacle.
    BoundaryAdjacent = 2,
    /// Outer frame of the square. Beyond the influence cone when the
    /// domain is sized for exact-cone truncation; held at zero.
    ExteriorCone = 3,
}

/// Grid directions in the order east, west, north, south.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    East = 0,
    West = 1,
    North = 2,
    South = 3,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::West, Dir::North, Dir::South];

    pub fn opposite(self) -> Dir {
        match self {
            Dir::East => Dir::West,
            Dir::West => Dir::East,
            Dir::North => Dir::South,
            Dir::South => Dir::North,
        }
    }

    pub fn offset(self) -> (isize, isize) {
        match self {
            Dir::East => (1, 0),
            Dir::West => (-1, 0),
            Dir::North => (0, 1),
            Dir::South => (0, -1),
        }
    }
}

/// How a boundary-adjacent node is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Closure {
    /// Fractional-distance (Shortley–Weller) Laplacian with zero boundary value.
    ShortleyWeller,
    /// Value set by linear interpolation between the boundary point (zero)
    /// and the regular node `from` on the opposite side.
    Interpolated { from: usize, weight: f64 },
    /// Held at zero; used when no regular donor node exists.
    Pinned,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub node: usize,
    /// Distance to the boundary in units of `h` for each cut direction,
    /// indexed by [`Dir`].
    pub frac: [Option<f64>; 4],
    pub closure: Closure,
}

impl Cut {
    pub fn min_fraction(&self) -> Option<(Dir, f64)> {
        Dir::ALL
            .iter()
            .filter_map(|&d| self.frac[d as usize].map(|f| (d, f)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

#[derive(Debug, Clone)]
pub struct ExteriorGrid {
    h: f64,
    r_out: f64,
    n: usize,
    center: usize,
    kind: Vec<NodeKind>,
    cut_of: Vec<u32>,
    cuts: Vec<Cut>,
    shape: Option<ObstacleShape>,
    min_fraction: f64,
}

const NO_CUT: u32 = u32::MAX;

/// Build the masked grid on `[-R, R]²`; `R` is rounded up to a multiple of `h`.
pub fn build_grid(shape: &ObstacleShape, h: f64, r_out: f64) -> Result<ExteriorGrid, GeometryError> {
    build_grid_with(shape, h, r_out, DEFAULT_MIN_FRACTION)
}

pub fn build_grid_with(
    shape: &ObstacleShape,
    h: f64,
    r_out: f64,
    min_fraction: f64,
) -> Result<ExteriorGrid, GeometryError> {
    check_grid_params(shape, h, r_out)?;
    let mut grid = ExteriorGrid::skeleton(h, r_out, Some(shape.clone()), min_fraction);
    grid.classify();
    Ok(grid)
}

/// Every check [`build_grid`] performs, without allocating the grid.
pub fn check_grid_params(shape: &ObstacleShape, h: f64, r_out: f64) -> Result<ValidationReport, GeometryError> {
    let report = validate_shape(shape)?;
    if !report.passes {
        return Err(GeometryError::Rejected(report.violations.join("; ")));
    }
    check_extent(h, r_out)?;
    let limit = report.min_rho / 3.0;
    if h > limit * (1.0 + 1e-9) {
        return Err(GeometryError::UnderResolved { h, limit });
    }
    Ok(report)
}

fn check_extent(h: f64, r_out: f64) -> Result<(), GeometryError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(GeometryError::BadSpacing(h));
    }
    if !(r_out.is_finite() && r_out > 1.0) {
        return Err(GeometryError::BadOuterRadius(r_out));
    }
    Ok(())
}

impl ExteriorGrid {
    /// Obstacle-free grid, used for twin runs and free-space oracles.
    pub fn free(h: f64, r_out: f64) -> Result<Self, GeometryError> {
        check_extent(h, r_out)?;
        let mut grid = Self::skeleton(h, r_out, None, DEFAULT_MIN_FRACTION);
        grid.classify();
        Ok(grid)
    }

    /// The same lattice with the obstacle removed.
    pub fn unobstructed(&self) -> Self {
        let mut grid = Self::skeleton(self.h, self.r_out, None, self.min_fraction);
        grid.n = self.n;
        grid.center = self.center;
        grid.r_out = self.r_out;
        grid.kind = vec![NodeKind::Interior; self.n * self.n];
        grid.cut_of = vec![NO_CUT; self.n * self.n];
        grid.classify();
        grid
    }

    fn skeleton(h: f64, r_out: f64, shape: Option<ObstacleShape>, min_fraction: f64) -> Self {
        let half = (r_out / h - 1e-9).ceil().max(2.0) as usize;
        let n = 2 * half + 1;
        Self {
            h,
            r_out: half as f64 * h,
            n,
            center: half,
            kind: vec![NodeKind::Interior; n * n],
            cut_of: vec![NO_CUT; n * n],
            cuts: Vec::new(),
            shape,
            min_fraction,
        }
    }

    fn classify(&mut self) {
        let n = self.n;
        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                let (x, y) = self.coord(idx);
                self.kind[idx] = if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    NodeKind::ExteriorCone
                } else if self.shape.as_ref().is_some_and(|s| s.contains(x, y)) {
                    NodeKind::Obstacle
                } else {
                    NodeKind::Interior
                };
            }
        }
        let Some(shape) = self.shape.clone() else {
            return;
        };
        for idx in 0..n * n {
            if self.kind[idx] != NodeKind::Interior {
                continue;
            }
            let mut frac = [None; 4];
            for d in Dir::ALL {
                let nb = self.neighbor(idx, d).expect("interior nodes have four neighbours");
                if self.kind[nb] == NodeKind::Obstacle {
                    frac[d as usize] = Some(self.cut_fraction(&shape, idx, d));
                }
            }
            if frac.iter().any(Option::is_some) {
                self.kind[idx] = NodeKind::BoundaryAdjacent;
                self.cut_of[idx] = self.cuts.len() as u32;
                self.cuts.push(Cut {
                    node: idx,
                    frac,
                    closure: Closure::ShortleyWeller,
                });
            }
        }
        // Small fractions switch to interpolation; donors must be nodes that
        // are themselves advanced by a stencil.
        let wants: Vec<bool> = self
            .cuts
            .iter()
            .map(|c| c.min_fraction().is_some_and(|(_, f)| f < self.min_fraction))
            .collect();
        for k in 0..self.cuts.len() {
            if !wants[k] {
                continue;
            }
            let (d, theta) = self.cuts[k].min_fraction().unwrap();
            let node = self.cuts[k].node;
            let donor = self.neighbor(node, d.opposite()).filter(|&o| match self.kind[o] {
                NodeKind::Interior => true,
                NodeKind::BoundaryAdjacent => !wants[self.cut_of[o] as usize],
                _ => false,
            });
            self.cuts[k].closure = match donor {
                Some(from) => Closure::Interpolated {
                    from,
                    weight: theta / (1.0 + theta),
                },
                None => Closure::Pinned,
            };
        }
    }

    /// Fraction `s ∈ (0, 1]` at which the segment from `idx` toward its
    /// neighbour in direction `d` meets the boundary, by bisection.
    fn cut_fraction(&self, shape: &ObstacleShape, idx: usize, d: Dir) -> f64 {
        let (x, y) = self.coord(idx);
        let (dx, dy) = d.offset();
        let (ex, ey) = (dx as f64 * self.h, dy as f64 * self.h);
        let gap = |s: f64| shape.radial_gap(x + s * ex, y + s * ey);
        if gap(1.0) >= 0.0 {
            // Neighbour sits on the boundary up to rounding.
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 {
                break;
            }
        }
        let s = 0.5 * (lo + hi);
        if s > 1.0 - 1e-10 {
            1.0
        } else {
            s.max(1e-12)
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Actual half-width (requested radius rounded up to a multiple of `h`).
    pub fn r_out(&self) -> f64 {
        self.r_out
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn shape(&self) -> Option<&ObstacleShape> {
        self.shape.as_ref()
    }

    pub fn min_fraction(&self) -> f64 {
        self.min_fraction
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    /// Coordinate of grid line `i` (same for both axes).
    #[inline]
    pub fn line(&self, i: usize) -> f64 {
        (i as f64 - self.center as f64) * self.h
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (self.line(i), self.line(j))
    }

    /// Index of the node nearest to `(x, y)`, if inside the square.
    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        let fi = (x / self.h).round() + self.center as f64;
        let fj = (y / self.h).round() + self.center as f64;
        if fi < 0.0 || fj < 0.0 || fi >= self.n as f64 || fj >= self.n as f64 {
            return None;
        }
        Some(self.idx(fi as usize, fj as usize))
    }

    #[inline]
    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kind[idx]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kind
    }

    #[inline]
    pub fn cut(&self, idx: usize) -> Option<&Cut> {
        match self.cut_of[idx] {
            NO_CUT => None,
            k => Some(&self.cuts[k as usize]),
        }
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    #[inline]
    pub fn neighbor(&self, idx: usize, d: Dir) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let (di, dj) = d.offset();
        let ni = i as isize + di;
        let nj = j as isize + dj;
        if ni < 0 || nj < 0 || ni >= self.n as isize || nj >= self.n as isize {
            return None;
        }
        Some(nj as usize * self.n + ni as usize)
    }

    /// Non-obstacle node: part of the discrete domain `K`.
    #[inline]
    pub fn in_domain(&self, idx: usize) -> bool {
        self.kind[idx] != NodeKind::Obstacle
    }

    /// Nodes advanced by a difference stencil (interior, or boundary nodes
    /// with the Shortley–Weller closure).
    #[inline]
    pub fn is_stencil_node(&self, idx: usize) -> bool {
        match self.kind[idx] {
            NodeKind::Interior => true,
            NodeKind::BoundaryAdjacent => {
                matches!(self.cut(idx).map(|c| c.closure), Some(Closure::ShortleyWeller))
            }
            _ => false,
        }
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kind.iter().filter(|&&k| k == kind).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_report() {
        let r = validate_shape(&ObstacleShape::disk(0.3)).unwrap();
        assert!(r.passes);
        assert_eq!(r.min_rho, 0.3);
        assert_eq!(r.max_rho, 0.3);
    }

    #[test]
    fn star_report_extrema() {
        let s = ObstacleShape::star(0.3, vec![(0.0, 0.0), (0.5, 0.0)]);
        let r = validate_shape(&s).unwrap();
        assert!(r.passes);
        assert!((r.min_rho - 0.15).abs() < 1e-6);
        assert!((r.max_rho - 0.45).abs() < 1e-6);
    }

    #[test]
    fn oversized_disk_fails() {
        let r = validate_shape(&ObstacleShape::disk(0.6)).unwrap();
        assert!(!r.passes);
        assert_eq!(r.max_rho, 0.6);
    }

    #[test]
    fn rejects_bad_coefficients() {
        let s = ObstacleShape::star(0.3, vec![(f64::NAN, 0.0)]);
        assert!(matches!(validate_shape(&s), Err(GeometryError::NonFinite(_))));
        let s = ObstacleShape::star(0.3, vec![(1.5, 0.0)]);
        assert!(matches!(
            validate_shape(&s),
            Err(GeometryError::NonPositiveRadius { .. })
        ));
    }

    #[test]
    fn extrema_of_high_harmonic_are_accurate() {
        // ρ = 0.3 (1 + 0.2 cos 7θ + 0.1 sin 3θ); brute-force on a very fine grid
        let s = ObstacleShape::star(
            0.3,
            vec![(0.0, 0.0), (0.0, 0.0), (0.0, 0.1), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.2, 0.0)],
        );
        let r = validate_shape(&s).unwrap();
        let m = 2_000_000;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..m {
            let v = s.radius_at(2.0 * PI * i as f64 / m as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!((r.min_rho - lo).abs() < 1e-6, "{} vs {}", r.min_rho, lo);
        assert!((r.max_rho - hi).abs() < 1e-6, "{} vs {}", r.max_rho, hi);
        assert!(r.min_rho <= lo + 1e-12 && r.max_rho >= hi - 1e-12);
    }

    #[test]
    fn disk_grid_examples() {
        let g = build_grid(&ObstacleShape::disk(0.3), 0.1, 2.0).unwrap();
        let origin = g.node_at(0.0, 0.0).unwrap();
        assert_eq!(g.kind(origin), NodeKind::Obstacle);
        let p = g.node_at(0.4, 0.0).unwrap();
        assert_eq!(g.kind(p), NodeKind::BoundaryAdjacent);
        let cut = g.cut(p).unwrap();
        assert_eq!(cut.frac[Dir::West as usize], Some(1.0));
        assert_eq!(cut.frac[Dir::East as usize], None);
    }

    #[test]
    fn under_resolved_rejected() {
        assert!(build_grid(&ObstacleShape::disk(0.3), 0.1, 2.0).is_ok());
        assert!(matches!(
            build_grid(&ObstacleShape::disk(0.3), 0.11, 2.0).map(|_| ()),
            Err(GeometryError::UnderResolved { .. })
        ));
        assert!(matches!(
            build_grid(&ObstacleShape::disk(0.3), 0.05, 1.0).map(|_| ()),
            Err(GeometryError::BadOuterRadius(_))
        ));
    }

    #[test]
    fn boundary_nodes_have_obstacle_neighbours() {
        let s = ObstacleShape::star(0.35, vec![(0.05, 0.02), (0.1, 0.0), (0.0, 0.03)]);
        let g = build_grid(&s, 0.02, 1.5).unwrap();
        assert!(!g.cuts().is_empty());
        for c in g.cuts() {
            let mut any = false;
            for d in Dir::ALL {
                let nb = g.neighbor(c.node, d).unwrap();
                let obstacle = g.kind(nb) == NodeKind::Obstacle;
                assert_eq!(obstacle, c.frac[d as usize].is_some());
                if let Some(f) = c.frac[d as usize] {
                    assert!(f > 0.0 && f <= 1.0);
                    any = true;
                }
            }
            assert!(any);
        }
        for idx in 0..g.len() {
            if g.kind(idx) == NodeKind::Interior {
                for d in Dir::ALL {
                    let nb = g.neighbor(idx, d).unwrap();
                    assert_ne!(g.kind(nb), NodeKind::Obstacle);
                }
            }
        }
    }
}
