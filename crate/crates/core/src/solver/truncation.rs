//! Outer-boundary treatments, selected by name from the run config.

use crate::fields::ActiveBox;
use crate::geometry::ExteriorGrid;
use crate::registry::{Named, Registry};
use std::sync::Arc;

pub trait Truncation: Named + Send + Sync {
    fn description(&self) -> &'static str;

    /// Nodes to update for the next level, given the box that holds the
    /// support of every stored level.
    fn update_box(&self, active: ActiveBox, n: usize) -> ActiveBox;

    /// Per-node factor applied to each new level, if any.
    fn damping(&self, grid: &ExteriorGrid, dt: f64) -> Option<Vec<f64>>;
}

/// Domain large enough that the physical cone never reaches the frame; nodes
/// outside the discrete domain of influence are never touched.
pub struct ExactCone;

impl Named for ExactCone {
    fn name(&self) -> &'static str {
        "exact_cone"
    }
}

impl Truncation for ExactCone {
    fn description(&self) -> &'static str {
        "skip nodes beyond the discrete domain of influence; frame held at zero"
    }

    fn update_box(&self, active: ActiveBox, n: usize) -> ActiveBox {
        active.grown(1, n)
    }

    fn damping(&self, _: &ExteriorGrid, _: f64) -> Option<Vec<f64>> {
        None
    }
}

/// Absorbing layer: each new level is multiplied by `1 − σ(|x|) dt` with a
/// quadratic ramp from zero at `start · R` to `sigma_max` at `R`.
pub struct Sponge {
    pub start: f64,
    pub sigma_max: f64,
}

impl Default for Sponge {
    fn default() -> Self {
        Self {
            start: 0.9,
            sigma_max: 5.0,
        }
    }
}

impl Sponge {
    pub fn sigma(&self, r: f64, r_out: f64) -> f64 {
        let s = ((r - self.start * r_out) / ((1.0 - self.start) * r_out)).clamp(0.0, 1.0);
        self.sigma_max * s * s
    }
}

impl Named for Sponge {
    fn name(&self) -> &'static str {
        "sponge"
    }
}

impl Truncation for Sponge {
    fn description(&self) -> &'static str {
        "quadratic damping ramp over the outer tenth of the domain"
    }

    fn update_box(&self, _: ActiveBox, n: usize) -> ActiveBox {
        ActiveBox::full(n)
    }

    fn damping(&self, grid: &ExteriorGrid, dt: f64) -> Option<Vec<f64>> {
        Some(
            (0..grid.len())
                .map(|idx| {
                    let (x, y) = grid.coord(idx);
                    1.0 - self.sigma(x.hypot(y), grid.r_out()) * dt.abs()
                })
                .collect(),
        )
    }
}

pub fn truncation_registry() -> Registry<dyn Truncation> {
    let mut r: Registry<dyn Truncation> = Registry::new("truncation");
    r.register(Arc::new(ExactCone)).expect("unique");
    r.register(Arc::new(Sponge::default())).expect("unique");
    r
}
