//! Explicit leapfrog integration of `□u^I = F^I(u, ∂u) + g^I`.
//!
//! `u^{n+1} = 2u^n − u^{n−1} + dt² (Δ_h u^n + F(u^n, ∂u^n) + g^n)`, with the
//! time derivative inside `F` taken as the second-order backward difference
//! over the three stored levels. Boundary-adjacent nodes use the
//! Shortley–Weller Laplacian with zero boundary value; nodes whose nearest
//! cut is too close to the boundary are instead interpolated from the
//! opposite neighbour after the sweep.

pub mod mms;
pub mod truncation;

pub use mms::{Forcing, MmsForcing, MmsSpec};
pub use truncation::{truncation_registry, ExactCone, Sponge, Truncation};

use crate::fields::{d1, laplacian_at, ActiveBox, Comp, FieldError, FieldState, TimeSlice, Trace};
use crate::geometry::{Closure, ExteriorGrid, NodeKind};
use crate::nullforms::CubicTerm;
use rayon::prelude::*;
use std::sync::Arc;

pub use crate::nullforms::MAX_COMPONENTS;

/// Upper bound on `dt/h`, below the `1/√2` von Neumann limit of the 5-point scheme.
pub const CFL_CAP: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("numerical abort: non-finite value at node {node} (x = {x:.4}, y = {y:.4}), component {component}, t = {t}")]
    NonFinite {
        node: usize,
        x: f64,
        y: f64,
        component: usize,
        t: f64,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("diagnostics failed at t = {t}: {msg}")]
    Diagnostics { t: f64, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_final: f64,
    pub truncation: String,
    pub sample_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.45,
            t_final: 1.0,
            truncation: "exact_cone".into(),
            sample_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= CFL_CAP) {
            return Err(SolverError::Config(format!("cfl = {} must lie in (0, {CFL_CAP}]", self.cfl)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(SolverError::Config(format!("t_final = {} must be finite and ≥ 0", self.t_final)));
        }
        if self.sample_every == 0 {
            return Err(SolverError::Config("sample_every must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps; `dt` is shrunk slightly so that they land on `t_final`.
    pub fn steps(&self, h: f64) -> usize {
        (self.t_final / (self.cfl * h) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn dt(&self, h: f64) -> f64 {
        match self.steps(h) {
            0 => self.cfl * h,
            n => self.t_final / n as f64,
        }
    }
}

/// A prepared stepper for one grid, nonlinearity and time step.
pub struct Solver<'a> {
    grid: &'a ExteriorGrid,
    cubic: CubicTerm,
    m: usize,
    truncation: Arc<dyn Truncation>,
    forcing: Option<&'a dyn Forcing>,
    damping: Option<Vec<f64>>,
    closures: Vec<(usize, usize, f64)>,
}

impl<'a> Solver<'a> {
    pub fn new(
        grid: &'a ExteriorGrid,
        cubic: &CubicTerm,
        truncation: Arc<dyn Truncation>,
        forcing: Option<&'a dyn Forcing>,
        dt: f64,
    ) -> Result<Self, SolverError> {
        let m = cubic.components();
        if m == 0 || m > MAX_COMPONENTS {
            return Err(SolverError::Config(format!("component count {m} outside 1..={MAX_COMPONENTS}")));
        }
        if let Some(f) = forcing {
            if f.components() != m {
                return Err(SolverError::Config("forcing and nonlinearity disagree on M".into()));
            }
        }
        let closures = grid
            .cuts()
            .iter()
            .filter_map(|c| match c.closure {
                Closure::Interpolated { from, weight } => Some((c.node, from, weight)),
                _ => None,
            })
            .collect();
        let damping = truncation.damping(grid, dt);
        Ok(Self {
            grid,
            cubic: cubic.clone(),
            m,
            truncation,
            forcing,
            damping,
            closures,
        })
    }

    pub fn components(&self) -> usize {
        self.m
    }

    fn check_state(&self, state: &FieldState) -> Result<(), SolverError> {
        if state.m != self.m || state.curr.len() != self.grid.len() * self.m {
            return Err(SolverError::Config("state does not match solver grid or component count".into()));
        }
        Ok(())
    }

    /// Apply interpolation closures to one level and return the box of
    /// nodes that became nonzero.
    fn close(&self, level: &mut [f64]) -> ActiveBox {
        let m = self.m;
        let mut touched = ActiveBox::empty();
        for &(node, from, w) in &self.closures {
            let mut any = false;
            for c in 0..m {
                let v = w * level[from * m + c];
                level[node * m + c] = v;
                any |= v != 0.0;
            }
            if any {
                let (i, j) = self.grid.ij(node);
                touched.include(i, j);
            }
        }
        touched
    }

    /// Right-hand side `Δ_h u + F(u, ∂u) + g(t)` at one stencil node, given
    /// the level `u` and its time derivative `ut`.
    fn rhs_at(&self, u: &[f64], ut: &dyn Fn(usize) -> f64, t: f64, idx: usize, out: &mut [f64]) {
        let (grid, m) = (self.grid, self.m);
        let mut jets = [[0.0; 4]; MAX_COMPONENTS];
        let mut f = [0.0; MAX_COMPONENTS];
        for c in 0..m {
            let comp = Comp::of(u, m, c);
            out[c] = laplacian_at(grid, comp, idx);
            if !self.cubic.is_linear() {
                jets[c] = [
                    comp.get(idx),
                    ut(idx * m + c),
                    d1(grid, comp, idx, 0, Trace::Dirichlet),
                    d1(grid, comp, idx, 1, Trace::Dirichlet),
                ];
            }
        }
        if !self.cubic.is_linear() {
            self.cubic.eval(&jets[..m], &mut f[..m]);
            for c in 0..m {
                out[c] += f[c];
            }
        }
        if let Some(g) = self.forcing {
            g.add(t, idx, out);
        }
    }

    /// State at `t = 0` from data `(u0, u1)` by a Taylor start:
    /// `u(−dt) = u0 − dt u1 + dt²/2 A`, `u(−2dt) = u0 − 2dt u1 + 2dt² A` with
    /// `A = Δ_h u0 + F(u0, ∂u0; ∂_t u0 = u1) + g(0)`. The older level makes the
    /// backward difference in the first step reproduce `u1` exactly.
    pub fn initial_state(&self, u0: &[f64], u1: &[f64], dt: f64) -> Result<FieldState, SolverError> {
        let (grid, m) = (self.grid, self.m);
        if u0.len() != grid.len() * m || u1.len() != u0.len() {
            return Err(SolverError::Config("initial data do not match the grid".into()));
        }
        let mut curr = vec![0.0; u0.len()];
        let mut v = vec![0.0; u0.len()];
        for idx in 0..grid.len() {
            if grid.is_stencil_node(idx) {
                curr[idx * m..(idx + 1) * m].copy_from_slice(&u0[idx * m..(idx + 1) * m]);
                v[idx * m..(idx + 1) * m].copy_from_slice(&u1[idx * m..(idx + 1) * m]);
            }
        }
        self.close(&mut curr);
        self.close(&mut v);
        let mut prev = vec![0.0; u0.len()];
        let mut history = vec![0.0; u0.len()];
        let mut a = [0.0; MAX_COMPONENTS];
        for idx in 0..grid.len() {
            if !grid.is_stencil_node(idx) {
                continue;
            }
            self.rhs_at(&curr, &|k| v[k], 0.0, idx, &mut a[..m]);
            for c in 0..m {
                let k = idx * m + c;
                prev[k] = curr[k] - dt * v[k] + 0.5 * dt * dt * a[c];
                history[k] = curr[k] - 2.0 * dt * v[k] + 2.0 * dt * dt * a[c];
            }
        }
        self.close(&mut prev);
        self.close(&mut history);
        let mut state = FieldState::from_levels(grid, m, 0.0, dt, history, prev, curr)?;
        if let Some(g) = self.forcing {
            state.active = state.active.union(&g.support());
        }
        check_finite(grid, &state.curr, m, 0.0)?;
        check_finite(grid, &state.prev, m, -dt)?;
        Ok(state)
    }

    /// Advance one step.
    pub fn step(&self, state: &mut FieldState) -> Result<(), SolverError> {
        self.advance(state, None, true)
    }

    /// Build the next level; `hook` sees `(u^{n−1}, u^n, u^{n+1})` before the
    /// levels rotate. With `commit == false` the state is left at `u^n`.
    pub fn advance(
        &self,
        state: &mut FieldState,
        hook: Option<&mut dyn FnMut(&TimeSlice) -> Result<(), SolverError>>,
        commit: bool,
    ) -> Result<(), SolverError> {
        self.check_state(state)?;
        let (grid, m, n) = (self.grid, self.m, self.grid.n());
        let mut bx = self.truncation.update_box(state.active, n);
        if let Some(g) = self.forcing {
            bx = bx.union(&g.support());
        }
        let dt = state.dt;
        let t = state.t;
        if !bx.is_empty() {
            let row = n * m;
            let levels = Levels {
                hist: &state.history,
                prev: &state.prev,
                curr: &state.curr,
                t,
                dt,
            };
            let next = &mut state.scratch[bx.j0 * row..(bx.j1 + 1) * row];
            let bad = next
                .par_chunks_mut(row)
                .enumerate()
                .filter_map(|(jj, out)| self.update_row(&levels, bx, bx.j0 + jj, out))
                .min();
            if let Some(k) = bad {
                return Err(non_finite(grid, k, m, t + dt));
            }
            let touched = {
                let scratch = &mut state.scratch;
                let mut touched = ActiveBox::empty();
                for &(node, from, w) in &self.closures {
                    let (i, j) = grid.ij(node);
                    let (fi, fj) = grid.ij(from);
                    let inside = |i: usize, j: usize| i >= bx.i0 && i <= bx.i1 && j >= bx.j0 && j <= bx.j1;
                    if !inside(fi, fj) && !inside(i, j) {
                        continue;
                    }
                    let mut any = false;
                    for c in 0..m {
                        let v = w * scratch[from * m + c];
                        scratch[node * m + c] = v;
                        any |= v != 0.0;
                    }
                    if any {
                        touched.include(i, j);
                    }
                }
                touched
            };
            bx = bx.union(&touched);
        }
        if let Some(hook) = hook {
            let slice = TimeSlice {
                prev: &state.prev,
                curr: &state.curr,
                next: &state.scratch,
                m,
                t,
                dt,
            };
            hook(&slice)?;
        }
        if commit {
            std::mem::swap(&mut state.history, &mut state.prev);
            std::mem::swap(&mut state.prev, &mut state.curr);
            std::mem::swap(&mut state.curr, &mut state.scratch);
            state.t = t + dt;
            state.steps += 1;
            state.active = state.active.union(&bx);
        }
        Ok(())
    }
}

struct Levels<'s> {
    hist: &'s [f64],
    prev: &'s [f64],
    curr: &'s [f64],
    t: f64,
    dt: f64,
}

impl<'a> Solver<'a> {
    /// New values for row `j` of the box; returns the first non-finite
    /// entry, as an index into the full level.
    fn update_row(&self, lv: &Levels, bx: ActiveBox, j: usize, out: &mut [f64]) -> Option<usize> {
        match self.m {
            1 => self.update_row_m(lv, bx, j, out, 1),
            2 => self.update_row_m(lv, bx, j, out, 2),
            m => self.update_row_m(lv, bx, j, out, m),
        }
    }

    #[inline(always)]
    fn update_row_m(&self, lv: &Levels, bx: ActiveBox, j: usize, out: &mut [f64], m: usize) -> Option<usize> {
        let (grid, n) = (self.grid, self.grid.n());
        let row = n * m;
        let (hist, prev, curr) = (lv.hist, lv.prev, lv.curr);
        let h = grid.h();
        let inv_h2 = 1.0 / (h * h);
        let inv_2h = 0.5 / h;
        let inv_2dt = 0.5 / lv.dt;
        let dt2 = lv.dt * lv.dt;
        let linear = self.cubic.is_linear();
        let plain = linear && self.forcing.is_none();
        let kinds = grid.kinds();
        let damping = self.damping.as_deref();
        let mut jets = [0.0; 4 * MAX_COMPONENTS];
        let mut f = [0.0; MAX_COMPONENTS];
        let mut lap = [0.0; MAX_COMPONENTS];
        for i in bx.i0..=bx.i1 {
            let idx = j * n + i;
            let o = i * m;
            let d = damping.map_or(1.0, |d| d[idx]);
            match kinds[idx] {
                NodeKind::Obstacle | NodeKind::ExteriorCone => {
                    for c in 0..m {
                        out[o + c] = 0.0;
                    }
                    continue;
                }
                NodeKind::Interior if plain => {
                    for c in 0..m {
                        let k = idx * m + c;
                        let u = curr[k];
                        let l = (curr[k + m] + curr[k - m] + curr[k + row] + curr[k - row] - 4.0 * u) * inv_h2;
                        out[o + c] = d * (2.0 * u - prev[k] + dt2 * l);
                    }
                    continue;
                }
                NodeKind::Interior => {
                    for c in 0..m {
                        let k = idx * m + c;
                        let u = curr[k];
                        let (e, w) = (curr[k + m], curr[k - m]);
                        let (no, so) = (curr[k + row], curr[k - row]);
                        lap[c] = (e + w + no + so - 4.0 * u) * inv_h2;
                        jets[4 * c] = u;
                        jets[4 * c + 1] = (3.0 * u - 4.0 * prev[k] + hist[k]) * inv_2dt;
                        jets[4 * c + 2] = (e - w) * inv_2h;
                        jets[4 * c + 3] = (no - so) * inv_2h;
                    }
                }
                NodeKind::BoundaryAdjacent => {
                    if !grid.is_stencil_node(idx) {
                        for c in 0..m {
                            out[o + c] = 0.0;
                        }
                        continue;
                    }
                    for c in 0..m {
                        let k = idx * m + c;
                        let comp = Comp::of(curr, m, c);
                        lap[c] = laplacian_at(grid, comp, idx);
                        jets[4 * c] = curr[k];
                        jets[4 * c + 1] = (3.0 * curr[k] - 4.0 * prev[k] + hist[k]) * inv_2dt;
                        jets[4 * c + 2] = d1(grid, comp, idx, 0, Trace::Dirichlet);
                        jets[4 * c + 3] = d1(grid, comp, idx, 1, Trace::Dirichlet);
                    }
                }
            }
            for v in &mut f[..m] {
                *v = 0.0;
            }
            if !linear {
                self.cubic.eval_fixed(&jets, &mut f);
            }
            if let Some(g) = self.forcing {
                g.add(lv.t, idx, &mut f[..m]);
            }
            for c in 0..m {
                let k = idx * m + c;
                out[o + c] = d * (2.0 * curr[k] - prev[k] + dt2 * (lap[c] + f[c]));
            }
        }
        out[bx.i0 * m..(bx.i1 + 1) * m]
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (j * n + bx.i0) * m + p)
    }
}

fn non_finite(grid: &ExteriorGrid, k: usize, m: usize, t: f64) -> SolverError {
    let node = k / m;
    let (x, y) = grid.coord(node);
    SolverError::NonFinite {
        node,
        x,
        y,
        component: k % m,
        t,
    }
}

fn check_finite(grid: &ExteriorGrid, level: &[f64], m: usize, t: f64) -> Result<(), SolverError> {
    match level.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(non_finite(grid, k, m, t)),
        None => Ok(()),
    }
}

/// Receives a centred time slice at every sample time.
pub trait Sampler {
    fn sample(&mut self, grid: &ExteriorGrid, slice: &TimeSlice) -> Result<(), String>;
}

/// Result of [`run`]: the final state at `t_final` and the step count.
#[derive(Debug)]
pub struct RunOutcome {
    pub state: FieldState,
    pub steps: usize,
}

/// A run that stopped early; the sampler keeps whatever it recorded.
#[derive(Debug)]
pub struct RunAbort {
    pub error: SolverError,
    pub state: FieldState,
    pub steps: usize,
}

/// Step from the given state to `t_final`, sampling every `sample_every`
/// steps and at the final step.
pub fn run(
    grid: &ExteriorGrid,
    cubic: &CubicTerm,
    mut state: FieldState,
    config: &SolverConfig,
    forcing: Option<&dyn Forcing>,
    sampler: &mut dyn Sampler,
) -> Result<RunOutcome, Box<RunAbort>> {
    let abort = |error, state, steps| Box::new(RunAbort { error, state, steps });
    if let Err(e) = config.validate() {
        return Err(abort(e, state, 0));
    }
    let truncation = match truncation_registry().get(&config.truncation) {
        Ok(t) => t,
        Err(e) => return Err(abort(SolverError::Config(e.to_string()), state, 0)),
    };
    let n_steps = config.steps(grid.h());
    let solver = match Solver::new(grid, cubic, truncation, forcing, state.dt) {
        Ok(s) => s,
        Err(e) => return Err(abort(e, state, 0)),
    };
    for k in 0..=n_steps {
        let sample = k % config.sample_every == 0 || k == n_steps;
        let commit = k < n_steps;
        if !sample && !commit {
            break;
        }
        let result = if sample {
            let mut hook = |s: &TimeSlice| -> Result<(), SolverError> {
                sampler.sample(grid, s).map_err(|msg| SolverError::Diagnostics { t: s.t, msg })
            };
            solver.advance(&mut state, Some(&mut hook), commit)
        } else {
            solver.advance(&mut state, None, commit)
        };
        if let Err(e) = result {
            return Err(abort(e, state, k));
        }
    }
    Ok(RunOutcome { state, steps: n_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dt_lands_on_t_final() {
        let c = SolverConfig {
            cfl: 0.45,
            t_final: 1.0,
            ..Default::default()
        };
        let n = c.steps(0.1);
        assert_eq!(n, 23);
        assert!((c.dt(0.1) * n as f64 - 1.0).abs() < 1e-15);
        assert!(c.dt(0.1) <= 0.045);
        let z = SolverConfig {
            t_final: 0.0,
            ..Default::default()
        };
        assert_eq!(z.steps(0.1), 0);
    }

    #[test]
    fn cfl_cap_enforced() {
        let c = SolverConfig {
            cfl: 0.9,
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("0.5"));
    }
}
