//! Energies, ghost-weight functionals, weighted sup-norms and inequality
//! monitors, measured on time slices of a run.
//!
//! Every reduction runs row by row in parallel and combines the row results
//! in row order, so the numbers do not depend on the thread count.

pub mod fit;
pub mod monitors;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::fields::{z_order, ActiveBox, TimeSlice, ZIndex};
use crate::geometry::{ExteriorGrid, NodeKind};
use crate::solver::Sampler;

pub use fit::{fit_decay, DecayFit, FitError};
pub use monitors::{elliptic_ratio, hardy_ratio, monitor_registry, sobolev_ratio, Monitor, MonitorContext};

pub const EPS2: f64 = 1e-3;
/// Exponent of `⟨t − |x|⟩` in the ghost-weight integrand.
pub const GHOST_POWER: f64 = 1.1;
/// Sup-norms ignore the boundary layer `|x| < 1`.
pub const SUP_EXCLUSION: f64 = 1.0;
pub const Z_MAX_CAP: usize = 2;
/// Relative threshold below which a value counts as outside the support.
pub const SUPPORT_REL_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("invalid diagnostics config: {0}")]
    Config(String),
    #[error("field is nonzero at |x| = {radius:.4} outside the support bound {bound:.4}")]
    Support { radius: f64, bound: f64 },
    #[error("{monitor}: zero denominator with numerator {numerator:e}")]
    Inconsistent { monitor: &'static str, numerator: f64 },
    #[error("non-finite {quantity} at t = {t}")]
    NonFinite { quantity: String, t: f64 },
}

/// `⟨s⟩ = √(1 + s²)`.
#[inline]
pub fn bracket(s: f64) -> f64 {
    s.hypot(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub mu: f64,
    pub nu: f64,
}

/// `W_{μ,ν}(t, x) = ⟨t + |x|⟩^μ · min(⟨x⟩, ⟨t − |x|⟩)^ν`, with `r = |x|`.
pub fn weight_w(spec: WeightSpec, t: f64, r: f64) -> f64 {
    bracket(t + r).powf(spec.mu) * bracket(r).min(bracket(t - r)).powf(spec.nu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Radii of the local regions `K_R`; `R = 2` is always measured.
    pub r_list: Vec<f64>,
    pub z_max: usize,
    /// Support radius of the data, used by the Hardy monitor.
    pub m0: f64,
    /// Names from [`monitor_registry`]; columns of disabled monitors hold 0.
    pub monitors: Vec<String>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            r_list: vec![2.0],
            z_max: 2,
            m0: 3.0,
            monitors: monitor_registry().names().iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<(), DiagnosticsError> {
        if self.z_max == 0 || self.z_max > Z_MAX_CAP {
            return Err(DiagnosticsError::Config(format!("z_max must be 1 or {Z_MAX_CAP}, got {}", self.z_max)));
        }
        if let Some(r) = self.r_list.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(DiagnosticsError::Config(format!("local radius {r} must be positive")));
        }
        if !(self.m0.is_finite() && self.m0 > 0.0) {
            return Err(DiagnosticsError::Config(format!("m0 = {} must be positive", self.m0)));
        }
        let reg = monitor_registry();
        for name in &self.monitors {
            reg.get(name).map_err(|e| DiagnosticsError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Sorted, deduplicated radii including `R = 2`.
    pub fn radii(&self) -> Vec<f64> {
        let mut rs = self.r_list.clone();
        rs.push(2.0);
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        rs
    }
}

/// Norms of the solution restricted to `K_R = K ∩ {|x| ≤ R}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalNorms {
    pub r: f64,
    /// `‖u‖²_{L²(K_R)}`
    pub l2_sq: f64,
    /// `Σ_{|a| ≤ z_max} ‖∂^a u‖²_{L²(K_R)}`, with `∂ = (∂_t, ∂_1, ∂_2)`.
    pub energy: f64,
    /// `‖u‖_{L∞(K_R)}`
    pub linf: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub energy: f64,
    pub local: Vec<LocalNorms>,
    pub ghost_increment: f64,
    pub ghost_cumulative: f64,
    pub s_grad: f64,
    pub s_good: f64,
    /// `S_good` over all `|x| ≥ 1` instead of `|x| ≥ 1 + t/2`.
    pub s_good_global: f64,
    pub s_u: f64,
    pub support_radius: f64,
    pub hardy: f64,
    pub sobolev: f64,
    pub elliptic: f64,
}

impl DiagnosticRecord {
    pub fn local_at(&self, r: f64) -> Option<&LocalNorms> {
        self.local.iter().find(|l| l.r == r)
    }

    pub fn is_valid(&self) -> bool {
        let mut all = vec![
            self.energy,
            self.ghost_increment,
            self.ghost_cumulative,
            self.s_grad,
            self.s_good,
            self.s_good_global,
            self.s_u,
            self.support_radius,
            self.hardy,
            self.sobolev,
            self.elliptic,
        ];
        for l in &self.local {
            all.extend([l.l2_sq, l.energy, l.linf]);
        }
        self.t.is_finite() && all.iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

pub const SERIES_COLUMNS: [&str; 11] = [
    "t",
    "energy",
    "local_energy_R2",
    "ghost_cum",
    "S_grad",
    "S_good",
    "S_u",
    "support_radius",
    "hardy",
    "sobolev",
    "elliptic",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    pub records: Vec<DiagnosticRecord>,
}

impl DiagnosticSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Names of the supplementary columns written by [`Self::write_extras`].
    pub fn extra_columns(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string(), "ghost_increment".to_string(), "S_good_global".to_string()];
        if let Some(r) = self.records.first() {
            for l in &r.local {
                cols.push(format!("linf_R{}", l.r));
                cols.push(format!("l2sq_R{}", l.r));
                cols.push(format!("local_energy_R{}", l.r));
            }
        }
        cols
    }

    /// Time series of a named column from either CSV table.
    pub fn column(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        let pick = |f: &dyn Fn(&DiagnosticRecord) -> Option<f64>| -> Option<Vec<(f64, f64)>> {
            self.records.iter().map(|r| f(r).map(|v| (r.t, v))).collect()
        };
        let local = |prefix: &str| -> Option<(f64, usize)> {
            let r: f64 = name.strip_prefix(prefix)?.parse().ok()?;
            Some((r, ["linf_R", "l2sq_R", "local_energy_R"].iter().position(|p| *p == prefix)?))
        };
        match name {
            "t" => pick(&|r| Some(r.t)),
            "energy" => pick(&|r| Some(r.energy)),
            "ghost_cum" => pick(&|r| Some(r.ghost_cumulative)),
            "ghost_increment" => pick(&|r| Some(r.ghost_increment)),
            "S_grad" => pick(&|r| Some(r.s_grad)),
            "S_good" => pick(&|r| Some(r.s_good)),
            "S_good_global" => pick(&|r| Some(r.s_good_global)),
            "S_u" => pick(&|r| Some(r.s_u)),
            "support_radius" => pick(&|r| Some(r.support_radius)),
            "hardy" => pick(&|r| Some(r.hardy)),
            "sobolev" => pick(&|r| Some(r.sobolev)),
            "elliptic" => pick(&|r| Some(r.elliptic)),
            _ => {
                let (radius, which) = ["linf_R", "l2sq_R", "local_energy_R"].iter().find_map(|p| local(p))?;
                pick(&|r| {
                    r.local_at(radius).map(|l| match which {
                        0 => l.linf,
                        1 => l.l2_sq,
                        _ => l.energy,
                    })
                })
            }
        }
    }

    fn write_table(&self, w: &mut dyn Write, cols: &[String]) -> std::io::Result<()> {
        writeln!(w, "{}", cols.join(","))?;
        let data: Vec<Vec<(f64, f64)>> = cols
            .iter()
            .map(|c| self.column(c).expect("column names come from the series"))
            .collect();
        for k in 0..self.records.len() {
            let row: Vec<String> = data.iter().map(|c| format!("{:e}", c[k].1)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// The main series table, columns [`SERIES_COLUMNS`].
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let cols: Vec<String> = SERIES_COLUMNS.iter().map(|s| s.to_string()).collect();
        self.write_table(w, &cols)
    }

    /// Per-radius local norms, the per-sample ghost integrand and the global `S_good`.
    pub fn write_extras(&self, w: &mut dyn Write) -> std::io::Result<()> {
        self.write_table(w, &self.extra_columns())
    }
}

/// The weighted sup-norms at one time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WeightedSups {
    pub s_grad: f64,
    pub s_good: f64,
    pub s_good_global: f64,
    pub s_u: f64,
}

#[derive(Debug, Clone, Default)]
struct RowAcc {
    energy: f64,
    local: Vec<[f64; 3]>,
    ghost: f64,
    sups: WeightedSups,
}

struct Pass<'r> {
    radii: &'r [f64],
    z_max: usize,
    /// Restrict the ghost integrand to one entry of `Jet::z_first_order`.
    ghost_only: Option<usize>,
}

/// Box around every nonzero entry of the slice, grown by the stencil reach.
pub(crate) fn slice_box(grid: &ExteriorGrid, slice: &TimeSlice) -> ActiveBox {
    let n = grid.n();
    let b = ActiveBox::of_support(&[slice.prev, slice.curr, slice.next], slice.m, n);
    if b.is_empty() {
        b
    } else {
        b.grown(2, n)
    }
}

/// Run `f` on every row of the box in parallel; results come back in row order.
pub(crate) fn map_rows<A: Send>(bx: ActiveBox, f: impl Fn(usize) -> A + Sync + Send) -> Vec<A> {
    if bx.is_empty() {
        return Vec::new();
    }
    (bx.j0..=bx.j1).into_par_iter().map(f).collect()
}

fn fused(grid: &ExteriorGrid, slice: &TimeSlice, pass: &Pass) -> RowAcc {
    let bx = slice_box(grid, slice);
    let (t, h, n) = (slice.t, grid.h(), grid.n());
    let n_first = if pass.z_max >= 2 { 5 } else { 1 };
    let n_values = if pass.z_max >= 2 { 15 } else { 5 };
    let good_floor = 1.0 + 0.5 * t;
    let rows = map_rows(bx, |j| {
        let mut acc = RowAcc {
            local: vec![[0.0; 3]; pass.radii.len()],
            ..Default::default()
        };
        for i in bx.i0..=bx.i1 {
            let idx = j * n + i;
            if matches!(grid.kind(idx), NodeKind::Obstacle | NodeKind::ExteriorCone) {
                continue;
            }
            let (x, y) = grid.coord(idx);
            let r = x.hypot(y);
            let ghost_w = bracket(t - r).powf(-GHOST_POWER);
            let w_grad = bracket(r).sqrt() * bracket(t - r);
            let w_good = bracket(r).sqrt() * bracket(t + r).powf(1.0 - EPS2);
            let w_u = bracket(t + r).powf(0.5 - EPS2);
            let (nx, ny) = if r >= h { (x / r, y / r) } else { (0.0, 0.0) };
            for c in 0..slice.m {
                let jet = slice.jet(grid, c, idx);
                let (un, up) = (slice.next[idx * slice.m + c], slice.prev[idx * slice.m + c]);
                let (fwd, bwd) = ((un - jet.u) / slice.dt, (jet.u - up) / slice.dt);
                acc.energy += 0.5 * (fwd * fwd + bwd * bwd) - 0.5 * (un + up) * (jet.u11 + jet.u22);
                let orders = jet.derivative_orders_sq();
                let d_sq: f64 = orders[..=pass.z_max].iter().sum();
                for (k, &radius) in pass.radii.iter().enumerate() {
                    if r <= radius {
                        let l = &mut acc.local[k];
                        l[0] += jet.u * jet.u;
                        l[1] += d_sq;
                        l[2] = l[2].max(jet.u.abs());
                    }
                }
                for (a, (_, d)) in jet.z_first_order(x, y).iter().take(n_first).enumerate() {
                    let g1 = nx * d[0] + d[1];
                    let g2 = ny * d[0] + d[2];
                    let good_sq = g1 * g1 + g2 * g2;
                    if r >= h && pass.ghost_only.is_none_or(|s| s == a) {
                        acc.ghost += good_sq * ghost_w;
                    }
                    if r >= SUP_EXCLUSION {
                        let s = &mut acc.sups;
                        let grad = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                        s.s_grad = s.s_grad.max(w_grad * grad);
                        let good = w_good * good_sq.sqrt();
                        s.s_good_global = s.s_good_global.max(good);
                        if r >= good_floor {
                            s.s_good = s.s_good.max(good);
                        }
                    }
                }
                if r >= SUP_EXCLUSION {
                    for v in jet.z_values(x, y).iter().take(n_values) {
                        acc.sups.s_u = acc.sups.s_u.max(w_u * v.abs());
                    }
                }
            }
        }
        acc
    });
    let h2 = h * h;
    let mut total = RowAcc {
        local: vec![[0.0; 3]; pass.radii.len()],
        ..Default::default()
    };
    for row in rows {
        total.energy += row.energy;
        total.ghost += row.ghost;
        for (a, b) in total.local.iter_mut().zip(&row.local) {
            a[0] += b[0];
            a[1] += b[1];
            a[2] = a[2].max(b[2]);
        }
        let (s, o) = (&mut total.sups, row.sups);
        s.s_grad = s.s_grad.max(o.s_grad);
        s.s_good = s.s_good.max(o.s_good);
        s.s_good_global = s.s_good_global.max(o.s_good_global);
        s.s_u = s.s_u.max(o.s_u);
    }
    total.energy *= h2;
    total.ghost *= h2;
    for l in &mut total.local {
        l[0] *= h2;
        l[1] *= h2;
    }
    total
}

/// `Σ_I ‖∂u^I‖²_{L²(K)}` in the form the leapfrog update conserves: the
/// mean of the two staggered kinetic terms plus `−½⟨u^{n+1} + u^{n−1}, Δ_h u^n⟩`.
/// Pointwise it can be negative; only the sum is an energy.
pub fn energy(grid: &ExteriorGrid, slice: &TimeSlice) -> f64 {
    fused(grid, slice, &Pass { radii: &[], z_max: 1, ghost_only: None }).energy
}

/// `∫_K |∂̄Z^a u|² / ⟨t − |x|⟩^{1.1} dx` at the slice centre, summed over
/// components; nodes with `|x| < h` are excluded. Requires `|a| ≤ 1`.
pub fn ghost_increment(grid: &ExteriorGrid, slice: &TimeSlice, a: &ZIndex) -> Result<f64, DiagnosticsError> {
    let sel = match (z_order(a), a.iter().position(|&k| k == 1)) {
        (0, _) => 0,
        (1, Some(p)) => p + 1,
        _ => {
            return Err(DiagnosticsError::Config(format!(
                "ghost integrand needs |a| ≤ {}, got {a:?}",
                Z_MAX_CAP - 1
            )))
        }
    };
    Ok(fused(
        grid,
        slice,
        &Pass {
            radii: &[],
            z_max: 2,
            ghost_only: Some(sel),
        },
    )
    .ghost)
}

/// `S_grad`, `S_good` (restricted and global) and `S_u` at the slice centre.
pub fn weighted_sups(grid: &ExteriorGrid, slice: &TimeSlice, z_max: usize) -> Result<WeightedSups, DiagnosticsError> {
    if z_max == 0 || z_max > Z_MAX_CAP {
        return Err(DiagnosticsError::Config(format!("z_max must be 1 or {Z_MAX_CAP}")));
    }
    Ok(fused(grid, slice, &Pass { radii: &[], z_max, ghost_only: None }).sups)
}

/// Local norms over each `K_R`.
pub fn local_norms(grid: &ExteriorGrid, slice: &TimeSlice, radii: &[f64], z_max: usize) -> Vec<LocalNorms> {
    let acc = fused(grid, slice, &Pass { radii, z_max, ghost_only: None });
    radii
        .iter()
        .zip(acc.local)
        .map(|(&r, l)| LocalNorms {
            r,
            l2_sq: l[0],
            energy: l[1],
            linf: l[2],
        })
        .collect()
}

/// Largest `|x|` where some component exceeds `1e-10 · max |u|`.
pub fn support_radius(grid: &ExteriorGrid, level: &[f64], m: usize) -> f64 {
    let umax = level.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if umax == 0.0 {
        return 0.0;
    }
    let cut = SUPPORT_REL_TOL * umax;
    level
        .chunks_exact(m)
        .enumerate()
        .filter(|(_, c)| c.iter().any(|v| v.abs() > cut))
        .map(|(node, _)| {
            let (x, y) = grid.coord(node);
            x.hypot(y)
        })
        .fold(0.0, f64::max)
}

/// Collects a [`DiagnosticSeries`] while attached to a run as its sampler.
pub struct Diagnostics {
    config: DiagnosticsConfig,
    radii: Vec<f64>,
    monitors: Vec<std::sync::Arc<dyn Monitor>>,
    series: DiagnosticSeries,
    /// Skip the support pre-check of the Hardy monitor (the discrete cone
    /// reaches a few cells past `t + M0`).
    relaxed_support: bool,
}

impl Diagnostics {
    pub fn new(config: DiagnosticsConfig) -> Result<Self, DiagnosticsError> {
        config.validate()?;
        let reg = monitor_registry();
        let monitors = config
            .monitors
            .iter()
            .map(|n| reg.get(n).map_err(|e| DiagnosticsError::Config(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            radii: config.radii(),
            config,
            monitors,
            series: DiagnosticSeries::default(),
            relaxed_support: true,
        })
    }

    pub fn config(&self) -> &DiagnosticsConfig {
        &self.config
    }

    pub fn series(&self) -> &DiagnosticSeries {
        &self.series
    }

    pub fn into_series(self) -> DiagnosticSeries {
        self.series
    }

    /// Measure one slice and append it to the series.
    pub fn record(&mut self, grid: &ExteriorGrid, slice: &TimeSlice) -> Result<&DiagnosticRecord, DiagnosticsError> {
        let acc = fused(
            grid,
            slice,
            &Pass {
                radii: &self.radii,
                z_max: self.config.z_max,
                ghost_only: None,
            },
        );
        let ghost_cumulative = match self.series.records.last() {
            Some(p) => p.ghost_cumulative + 0.5 * (slice.t - p.t).abs() * (acc.ghost + p.ghost_increment),
            None => 0.0,
        };
        let mut rec = DiagnosticRecord {
            t: slice.t,
            energy: acc.energy,
            local: self
                .radii
                .iter()
                .zip(&acc.local)
                .map(|(&r, l)| LocalNorms {
                    r,
                    l2_sq: l[0],
                    energy: l[1],
                    linf: l[2],
                })
                .collect(),
            ghost_increment: acc.ghost,
            ghost_cumulative,
            s_grad: acc.sups.s_grad,
            s_good: acc.sups.s_good,
            s_good_global: acc.sups.s_good_global,
            s_u: acc.sups.s_u,
            support_radius: support_radius(grid, slice.curr, slice.m),
            ..Default::default()
        };
        let ctx = MonitorContext {
            t: slice.t,
            m0: self.config.m0,
            check_support: !self.relaxed_support,
        };
        for mon in &self.monitors {
            let mut worst = 0.0f64;
            for c in 0..slice.m {
                worst = worst.max(mon.ratio(grid, crate::fields::Comp::of(slice.curr, slice.m, c), &ctx)?);
            }
            match mon.name() {
                "hardy" => rec.hardy = worst,
                "sobolev" => rec.sobolev = worst,
                "elliptic" => rec.elliptic = worst,
                _ => {}
            }
        }
        if !rec.is_valid() {
            return Err(DiagnosticsError::NonFinite {
                quantity: "diagnostic record".into(),
                t: slice.t,
            });
        }
        self.series.records.push(rec);
        Ok(self.series.records.last().expect("just pushed"))
    }
}

impl Sampler for Diagnostics {
    fn sample(&mut self, grid: &ExteriorGrid, slice: &TimeSlice) -> Result<(), String> {
        self.record(grid, slice).map(|_| ()).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        let w11 = WeightSpec { mu: 1.0, nu: 1.0 };
        assert!((weight_w(w11, 3.0, 3.0) - 37f64.sqrt()).abs() < 1e-12);
        assert!((weight_w(w11, 0.0, 2.0) - 5.0).abs() < 1e-12);
        let w00 = WeightSpec { mu: 0.0, nu: 0.0 };
        assert_eq!(weight_w(w00, 17.0, 0.3), 1.0);
    }

    #[test]
    fn config_rules() {
        assert!(DiagnosticsConfig::default().validate().is_ok());
        let bad = DiagnosticsConfig {
            z_max: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let unknown = DiagnosticsConfig {
            monitors: vec!["poincare".into()],
            ..Default::default()
        };
        assert!(unknown.validate().unwrap_err().to_string().contains("poincare"));
        let c = DiagnosticsConfig {
            r_list: vec![5.0, 1.0, 2.0],
            ..Default::default()
        };
        assert_eq!(c.radii(), vec![1.0, 2.0, 5.0]);
    }
}
