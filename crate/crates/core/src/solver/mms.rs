//! Manufactured solutions `u*^I(t, x) = sin(ω t) b_I(x)` and their forcing.

use super::{SolverError, MAX_COMPONENTS};
use crate::fields::ActiveBox;
use crate::geometry::{ExteriorGrid, NodeKind, ObstacleShape};
use crate::initdata::{Bump, BumpJet};
use crate::nullforms::CubicTerm;

/// Source term added to the right-hand side at every stencil node.
pub trait Forcing: Send + Sync {
    fn components(&self) -> usize;

    /// Add `g(t)` at node `idx` to `out` (one entry per component).
    fn add(&self, t: f64, idx: usize, out: &mut [f64]);

    /// Box containing every node where `g` can be nonzero.
    fn support(&self) -> ActiveBox;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsSpec {
    pub omega: f64,
    /// One bump per component; `None` makes that component identically zero.
    pub bumps: Vec<Option<Bump>>,
}

pub struct MmsForcing {
    spec: MmsSpec,
    cubic: CubicTerm,
    m: usize,
    slot_of: Vec<u32>,
    jets: Vec<BumpJet>,
    support: ActiveBox,
}

const NO_SLOT: u32 = u32::MAX;

impl MmsForcing {
    pub fn new(spec: MmsSpec, cubic: &CubicTerm, grid: &ExteriorGrid) -> Result<Self, SolverError> {
        let m = spec.bumps.len();
        if m != cubic.components() {
            return Err(SolverError::Config(format!(
                "manufactured solution has {m} components, nonlinearity has {}",
                cubic.components()
            )));
        }
        if m > MAX_COMPONENTS {
            return Err(SolverError::Config(format!("at most {MAX_COMPONENTS} components are supported")));
        }
        if let Some(shape) = grid.shape() {
            check_clear(&spec, shape)?;
        }
        let mut slot_of = vec![NO_SLOT; grid.len()];
        let mut jets = Vec::new();
        let mut support = ActiveBox::empty();
        for idx in 0..grid.len() {
            if !matches!(grid.kind(idx), NodeKind::Interior | NodeKind::BoundaryAdjacent) {
                continue;
            }
            let (x, y) = grid.coord(idx);
            let node: Vec<BumpJet> = spec.bumps.iter().map(|b| b.map_or(BumpJet::default(), |b| b.jet(x, y))).collect();
            if node.iter().all(|j| *j == BumpJet::default()) {
                continue;
            }
            slot_of[idx] = (jets.len() / m) as u32;
            jets.extend(node);
            let (i, j) = grid.ij(idx);
            support.include(i, j);
        }
        Ok(Self {
            spec,
            cubic: cubic.clone(),
            m,
            slot_of,
            jets,
            support,
        })
    }

    pub fn spec(&self) -> &MmsSpec {
        &self.spec
    }

    /// `u*(t)` and `∂_t u*(t)` sampled on the domain nodes, components interleaved.
    pub fn exact(&self, grid: &ExteriorGrid, t: f64) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let (s, c) = ((self.spec.omega * t).sin(), (self.spec.omega * t).cos());
        let mut u = vec![0.0; grid.len() * m];
        let mut ut = vec![0.0; grid.len() * m];
        for idx in 0..grid.len() {
            let slot = self.slot_of[idx];
            if slot == NO_SLOT {
                continue;
            }
            for k in 0..m {
                let b = self.jets[slot as usize * m + k].b;
                u[idx * m + k] = s * b;
                ut[idx * m + k] = self.spec.omega * c * b;
            }
        }
        (u, ut)
    }
}

fn check_clear(spec: &MmsSpec, shape: &ObstacleShape) -> Result<(), SolverError> {
    for (c, b) in spec.bumps.iter().enumerate() {
        if let Some(b) = b {
            if b.meets(shape) {
                return Err(SolverError::Config(format!(
                    "manufactured solution of component {c} touches the obstacle"
                )));
            }
        }
    }
    Ok(())
}

impl Forcing for MmsForcing {
    fn components(&self) -> usize {
        self.m
    }

    fn add(&self, t: f64, idx: usize, out: &mut [f64]) {
        let slot = self.slot_of[idx];
        if slot == NO_SLOT {
            return;
        }
        let m = self.m;
        let w = self.spec.omega;
        let (s, c) = ((w * t).sin(), (w * t).cos());
        let node = &self.jets[slot as usize * m..(slot as usize + 1) * m];
        let mut jets = [[0.0; 4]; MAX_COMPONENTS];
        let mut f = [0.0; MAX_COMPONENTS];
        for (k, j) in node.iter().enumerate() {
            jets[k] = [s * j.b, w * c * j.b, s * j.b1, s * j.b2];
        }
        if !self.cubic.is_linear() {
            self.cubic.eval(&jets[..m], &mut f[..m]);
        }
        for (k, j) in node.iter().enumerate() {
            let utt = -w * w * s * j.b;
            out[k] += utt - s * j.lap - f[k];
        }
    }

    fn support(&self) -> ActiveBox {
        self.support
    }
}
