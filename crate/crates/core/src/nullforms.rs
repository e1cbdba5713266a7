//! Null forms, the null condition, and the cubic right-hand side.
//!
//! A coefficient tensor `q[I][J][K][L][α][β]` defines the nonlinearity
//!
//! ```text
//! F^I = Σ_{J,K,L} Σ_{α,β} q^{αβ}_{IJKL} u^J ∂_α u^K ∂_β u^L
//! ```
//!
//! For null tensors the same right-hand side is `Σ c0 u^J Q0(u^K,u^L) +
//! Σ_{α<β} c_{αβ} u^J Q_{αβ}(u^K,u^L)`; [`decompose_null`] produces those
//! coefficients.

use crate::registry::{Named, Registry};
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum NullFormError {
    #[error("null-form index out of range: ({0}, {1})")]
    Index(usize, usize),
    #[error("tensor has non-finite entry at {0:?}")]
    NonFinite([usize; 6]),
    #[error("tensor is not null: {0}")]
    NotNull(String),
    #[error("tensor file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// `(∂_t f, ∂_1 f, ∂_2 f)` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivTriple(pub [f64; 3]);

impl DerivTriple {
    pub fn new(dt: f64, d1: f64, d2: f64) -> Self {
        Self([dt, d1, d2])
    }

    /// Replace `d_i` by `d_i + ω_i d_0`, the good-derivative combination for
    /// the direction `ω` on the unit circle.
    pub fn good(&self, omega: (f64, f64)) -> [f64; 2] {
        [self.0[1] + omega.0 * self.0[0], self.0[2] + omega.1 * self.0[0]]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `Q0(f, g) = ∂_t f ∂_t g − ∂_1 f ∂_1 g − ∂_2 f ∂_2 g`.
#[inline]
pub fn eval_q0(df: &DerivTriple, dg: &DerivTriple) -> f64 {
    df.0[0] * dg.0[0] - df.0[1] * dg.0[1] - df.0[2] * dg.0[2]
}

/// `Q_{αβ}(f, g) = ∂_α f ∂_β g − ∂_β f ∂_α g`.
pub fn eval_qab(alpha: usize, beta: usize, df: &DerivTriple, dg: &DerivTriple) -> Result<f64, NullFormError> {
    if alpha > 2 || beta > 2 {
        return Err(NullFormError::Index(alpha, beta));
    }
    Ok(df.0[alpha] * dg.0[beta] - df.0[beta] * dg.0[alpha])
}

/// Largest component count the solver's fixed-size scratch supports.
pub const MAX_COMPONENTS: usize = 16;

/// Dense tensor of the constants `q^{αβ}_{IJKL}`, zero-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    m: usize,
    q: Vec<f64>,
}

impl CoefficientTensor {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            q: vec![0.0; m.pow(4) * 9],
        }
    }

    pub fn components(&self) -> usize {
        self.m
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        (((i * self.m + j) * self.m + k) * self.m + l) * 9
    }

    pub fn get(&self, ijkl: [usize; 4], alpha: usize, beta: usize) -> f64 {
        self.q[self.offset(ijkl[0], ijkl[1], ijkl[2], ijkl[3]) + 3 * alpha + beta]
    }

    pub fn set(&mut self, ijkl: [usize; 4], alpha: usize, beta: usize, v: f64) {
        let o = self.offset(ijkl[0], ijkl[1], ijkl[2], ijkl[3]);
        self.q[o + 3 * alpha + beta] = v;
    }

    pub fn add(&mut self, ijkl: [usize; 4], alpha: usize, beta: usize, v: f64) {
        let o = self.offset(ijkl[0], ijkl[1], ijkl[2], ijkl[3]);
        self.q[o + 3 * alpha + beta] += v;
    }

    /// The 3×3 block `q^{αβ}` for one `(I,J,K,L)`.
    pub fn block(&self, ijkl: [usize; 4]) -> [[f64; 3]; 3] {
        let o = self.offset(ijkl[0], ijkl[1], ijkl[2], ijkl[3]);
        let s = &self.q[o..o + 9];
        [[s[0], s[1], s[2]], [s[3], s[4], s[5]], [s[6], s[7], s[8]]]
    }

    pub fn blocks(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        let m = self.m;
        (0..m.pow(4)).map(move |n| [n / (m * m * m), (n / (m * m)) % m, (n / m) % m, n % m])
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|&v| v == 0.0)
    }

    pub fn validate(&self) -> Result<(), NullFormError> {
        for ijkl in self.blocks() {
            let b = self.block(ijkl);
            for a in 0..3 {
                for c in 0..3 {
                    if !b[a][c].is_finite() {
                        return Err(NullFormError::NonFinite([ijkl[0], ijkl[1], ijkl[2], ijkl[3], a, c]));
                    }
                }
            }
        }
        Ok(())
    }

    /// `Σ_{αβ} q^{αβ}_{IJKL} d_α e_β`.
    pub fn contract(&self, ijkl: [usize; 4], d: &DerivTriple, e: &DerivTriple) -> f64 {
        let b = self.block(ijkl);
        let mut s = 0.0;
        for a in 0..3 {
            for c in 0..3 {
                s += b[a][c] * d.0[a] * e.0[c];
            }
        }
        s
    }

    /// Sparse form used in the per-node right-hand side.
    pub fn cubic(&self) -> CubicTerm {
        let mut entries = Vec::new();
        for ijkl in self.blocks() {
            let b = self.block(ijkl);
            for (a, row) in b.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        entries.push(CubicEntry {
                            i: ijkl[0] as u32,
                            j: ijkl[1] as u32,
                            k: ijkl[2] as u32,
                            l: ijkl[3] as u32,
                            alpha: a as u8,
                            beta: c as u8,
                            value: v,
                        });
                    }
                }
            }
        }
        CubicTerm::from_entries(self.m, entries)
    }

    /// Parse the text format: one nonzero entry per line, `I J K L alpha beta value`
    /// with one-based component indices and `alpha, beta ∈ {0,1,2}`. Blank lines
    /// and `#` comments are ignored. The component count is the largest index.
    pub fn parse_text(text: &str) -> Result<Self, NullFormError> {
        let mut rows = Vec::new();
        let mut m = 0usize;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| NullFormError::Parse { line: ln + 1, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 7 {
                return Err(err(format!("expected 7 fields, found {}", toks.len())));
            }
            let mut idx = [0usize; 6];
            for (n, t) in toks[..6].iter().enumerate() {
                idx[n] = t.parse().map_err(|_| err(format!("bad index '{t}'")))?;
            }
            let value: f64 = toks[6].parse().map_err(|_| err(format!("bad value '{}'", toks[6])))?;
            if !value.is_finite() {
                return Err(err("non-finite value".into()));
            }
            if idx[..4].iter().any(|&v| v == 0) {
                return Err(err("component indices are one-based".into()));
            }
            if idx[4] > 2 || idx[5] > 2 {
                return Err(err(format!("alpha/beta must be 0..2, got {} {}", idx[4], idx[5])));
            }
            m = m.max(*idx[..4].iter().max().unwrap());
            rows.push((idx, value));
        }
        if m == 0 {
            return Err(NullFormError::Parse {
                line: 0,
                msg: "no entries".into(),
            });
        }
        let mut t = Self::zeros(m);
        for (idx, v) in rows {
            t.add([idx[0] - 1, idx[1] - 1, idx[2] - 1, idx[3] - 1], idx[4], idx[5], v);
        }
        Ok(t)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# I J K L alpha beta value (M = {})", self.m);
        for ijkl in self.blocks() {
            let b = self.block(ijkl);
            for (a, row) in b.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        let _ = writeln!(
                            out,
                            "{} {} {} {} {} {} {}",
                            ijkl[0] + 1,
                            ijkl[1] + 1,
                            ijkl[2] + 1,
                            ijkl[3] + 1,
                            a,
                            c,
                            v
                        );
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicEntry {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub l: u32,
    pub alpha: u8,
    pub beta: u8,
    pub value: f64,
}

/// Sparse cubic nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicTerm {
    m: usize,
    entries: Vec<CubicEntry>,
    /// Entries grouped by `(I, J)`: output slot, offset of `u^J` in the
    /// flattened jets, and the range of `terms` summed before multiplying by `u^J`.
    groups: Vec<(usize, usize, std::ops::Range<usize>)>,
    /// Offsets of the two derivative factors and the coefficient.
    terms: Vec<(usize, usize, f64)>,
}

impl CubicTerm {
    fn from_entries(m: usize, entries: Vec<CubicEntry>) -> Self {
        let mut sorted = entries.clone();
        sorted.sort_by_key(|e| (e.i, e.j));
        let mut groups: Vec<(usize, usize, std::ops::Range<usize>)> = Vec::new();
        let mut terms = Vec::with_capacity(sorted.len());
        for e in &sorted {
            let (i, j4) = (e.i as usize, 4 * e.j as usize);
            match groups.last_mut() {
                Some(g) if g.0 == i && g.1 == j4 => g.2.end += 1,
                _ => groups.push((i, j4, terms.len()..terms.len() + 1)),
            }
            terms.push((
                4 * e.k as usize + 1 + e.alpha as usize,
                4 * e.l as usize + 1 + e.beta as usize,
                e.value,
            ));
        }
        Self {
            m,
            entries,
            groups,
            terms,
        }
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn is_linear(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CubicEntry] {
        &self.entries
    }

    /// Hot-path form of [`CubicTerm::eval`] on fixed-size scratch arrays;
    /// requires `M ≤ MAX_COMPONENTS` and adds into `out`, which the caller
    /// clears. Masking the offsets keeps every access provably in bounds.
    #[inline(always)]
    pub fn eval_fixed(&self, jets: &[f64; 4 * MAX_COMPONENTS], out: &mut [f64; MAX_COMPONENTS]) {
        const J: usize = 4 * MAX_COMPONENTS - 1;
        for (i, j4, range) in &self.groups {
            let mut acc = 0.0;
            for &(b, c, v) in &self.terms[range.clone()] {
                acc += v * jets[b & J] * jets[c & J];
            }
            out[i & (MAX_COMPONENTS - 1)] += jets[j4 & J] * acc;
        }
    }

    /// `jets[K] = [u, ∂_t u, ∂_1 u, ∂_2 u]`; writes `F^I` into `out`.
    #[inline]
    pub fn eval(&self, jets: &[[f64; 4]], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let j = jets.as_flattened();
        for (i, j4, range) in &self.groups {
            let acc: f64 = self.terms[range.clone()].iter().map(|&(b, c, v)| v * j[b] * j[c]).sum();
            out[*i] += j[*j4] * acc;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockVerdict {
    /// One-based `(I, J, K, L)`.
    pub block: [usize; 4],
    pub null: bool,
    /// `max |Σ q^{αβ} ξ_α ξ_β|` over the 32-point sample of `{±1} × S¹`.
    pub sampled_max: f64,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullReport {
    pub components: usize,
    pub all_null: bool,
    /// Verdicts for the blocks that have at least one nonzero entry.
    pub blocks: Vec<BlockVerdict>,
}

impl NullReport {
    pub fn offending(&self) -> impl Iterator<Item = &BlockVerdict> {
        self.blocks.iter().filter(|b| !b.null)
    }
}

/// Value of the symbol `Σ q^{αβ} ξ_α ξ_β` at `ξ = (sign, cos θ, sin θ)`.
pub fn symbol(block: &[[f64; 3]; 3], sign: f64, theta: f64) -> f64 {
    let xi = [sign, theta.cos(), theta.sin()];
    let mut s = 0.0;
    for a in 0..3 {
        for c in 0..3 {
            s += block[a][c] * xi[a] * xi[c];
        }
    }
    s
}

/// Algebraic characterization of the null condition for one block. The
/// symbol is a trigonometric polynomial of degree two on `{±1} × S¹`, so it
/// vanishes identically iff the listed identities hold.
fn block_violations(b: &[[f64; 3]; 3]) -> Vec<String> {
    let mut v = Vec::new();
    for (a, c) in [(0, 1), (0, 2), (1, 2)] {
        let s = b[a][c] + b[c][a];
        if s != 0.0 {
            v.push(format!("q^{a}{c} + q^{c}{a} = {s} (must be 0)"));
        }
    }
    if b[1][1] != -b[0][0] {
        v.push(format!("q^11 = {} but -q^00 = {}", b[1][1], -b[0][0]));
    }
    if b[2][2] != -b[0][0] {
        v.push(format!("q^22 = {} but -q^00 = {}", b[2][2], -b[0][0]));
    }
    v
}

pub fn check_null(tensor: &CoefficientTensor) -> NullReport {
    let mut blocks = Vec::new();
    for ijkl in tensor.blocks() {
        let b = tensor.block(ijkl);
        if b.iter().flatten().all(|&v| v == 0.0) {
            continue;
        }
        let mut sampled_max = 0.0f64;
        for k in 0..16 {
            let theta = 2.0 * PI * k as f64 / 16.0;
            for sign in [1.0, -1.0] {
                sampled_max = sampled_max.max(symbol(&b, sign, theta).abs());
            }
        }
        let violations = block_violations(&b);
        blocks.push(BlockVerdict {
            block: [ijkl[0] + 1, ijkl[1] + 1, ijkl[2] + 1, ijkl[3] + 1],
            null: violations.is_empty(),
            sampled_max,
            violations,
        });
    }
    NullReport {
        components: tensor.components(),
        all_null: blocks.iter().all(|b| b.null),
        blocks,
    }
}

/// Coefficients of a null tensor in the `Q0`, `Q_{αβ}` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDecomposition {
    m: usize,
    c0: Vec<f64>,
    /// `[c_01, c_02, c_12]` per block.
    cab: Vec<[f64; 3]>,
}

pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

impl NullDecomposition {
    fn index(&self, ijkl: [usize; 4]) -> usize {
        ((ijkl[0] * self.m + ijkl[1]) * self.m + ijkl[2]) * self.m + ijkl[3]
    }

    pub fn c0(&self, ijkl: [usize; 4]) -> f64 {
        self.c0[self.index(ijkl)]
    }

    /// `c_{αβ}` for the pair at position `p` in [`PAIRS`].
    pub fn cab(&self, ijkl: [usize; 4]) -> [f64; 3] {
        self.cab[self.index(ijkl)]
    }

    /// `c0 Q0(d, e) + Σ_{α<β} c_{αβ} Q_{αβ}(d, e)` for one block.
    pub fn apply(&self, ijkl: [usize; 4], d: &DerivTriple, e: &DerivTriple) -> f64 {
        let k = self.index(ijkl);
        let mut s = self.c0[k] * eval_q0(d, e);
        for (p, &(a, b)) in PAIRS.iter().enumerate() {
            s += self.cab[k][p] * (d.0[a] * e.0[b] - d.0[b] * e.0[a]);
        }
        s
    }

    pub fn reconstruct(&self) -> CoefficientTensor {
        let mut t = CoefficientTensor::zeros(self.m);
        let blocks: Vec<_> = t.blocks().collect();
        for ijkl in blocks {
            let k = self.index(ijkl);
            let c0 = self.c0[k];
            t.set(ijkl, 0, 0, c0);
            t.set(ijkl, 1, 1, -c0);
            t.set(ijkl, 2, 2, -c0);
            for (p, &(a, b)) in PAIRS.iter().enumerate() {
                t.set(ijkl, a, b, self.cab[k][p]);
                t.set(ijkl, b, a, -self.cab[k][p]);
            }
        }
        t
    }

    /// Nonzero coefficients as `(block, label, value)` with one-based blocks.
    pub fn nonzero(&self) -> Vec<([usize; 4], &'static str, f64)> {
        let labels = ["c_01", "c_02", "c_12"];
        let mut out = Vec::new();
        let m = self.m;
        for n in 0..m.pow(4) {
            let b = [n / (m * m * m) + 1, (n / (m * m)) % m + 1, (n / m) % m + 1, n % m + 1];
            if self.c0[n] != 0.0 {
                out.push((b, "c0", self.c0[n]));
            }
            for p in 0..3 {
                if self.cab[n][p] != 0.0 {
                    out.push((b, labels[p], self.cab[n][p]));
                }
            }
        }
        out
    }
}

pub fn decompose_null(tensor: &CoefficientTensor) -> Result<NullDecomposition, NullFormError> {
    let report = check_null(tensor);
    if let Some(bad) = report.offending().next() {
        return Err(NullFormError::NotNull(format!(
            "block {:?}: {}",
            bad.block,
            bad.violations.join("; ")
        )));
    }
    let m = tensor.components();
    let mut c0 = Vec::with_capacity(m.pow(4));
    let mut cab = Vec::with_capacity(m.pow(4));
    for ijkl in tensor.blocks() {
        let b = tensor.block(ijkl);
        c0.push(b[0][0]);
        cab.push(PAIRS.map(|(a, c)| 0.5 * (b[a][c] - b[c][a])));
    }
    Ok(NullDecomposition { m, c0, cab })
}

/// A named coefficient tensor shipped with the tool.
pub trait CoefficientPreset: Named + Send + Sync {
    fn description(&self) -> &'static str;
    fn build(&self) -> CoefficientTensor;
}

fn add_q0(t: &mut CoefficientTensor, ijkl: [usize; 4], c: f64) {
    t.add(ijkl, 0, 0, c);
    t.add(ijkl, 1, 1, -c);
    t.add(ijkl, 2, 2, -c);
}

fn add_qab(t: &mut CoefficientTensor, ijkl: [usize; 4], a: usize, b: usize, c: f64) {
    t.add(ijkl, a, b, c);
    t.add(ijkl, b, a, -c);
}

struct Linear;
struct Cubic;
struct WaveMap;
struct Mixed;
struct NonNull;

impl Named for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }
}
impl CoefficientPreset for Linear {
    fn description(&self) -> &'static str {
        "M = 1, no nonlinearity (linear wave equation)"
    }
    fn build(&self) -> CoefficientTensor {
        CoefficientTensor::zeros(1)
    }
}

impl Named for Cubic {
    fn name(&self) -> &'static str {
        "cubic"
    }
}
impl CoefficientPreset for Cubic {
    fn description(&self) -> &'static str {
        "M = 1, F = u Q0(u, u)"
    }
    fn build(&self) -> CoefficientTensor {
        let mut t = CoefficientTensor::zeros(1);
        add_q0(&mut t, [0, 0, 0, 0], 1.0);
        t
    }
}

fn wavemap_tensor() -> CoefficientTensor {
    let mut t = CoefficientTensor::zeros(2);
    for i in 0..2 {
        for k in 0..2 {
            add_q0(&mut t, [i, i, k, k], 1.0);
        }
    }
    t
}

impl Named for WaveMap {
    fn name(&self) -> &'static str {
        "wavemap"
    }
}
impl CoefficientPreset for WaveMap {
    fn description(&self) -> &'static str {
        "M = 2, C_IJKL = δ_IJ δ_KL with Q0 only: F^I = u^I Σ_K Q0(u^K, u^K)"
    }
    fn build(&self) -> CoefficientTensor {
        wavemap_tensor()
    }
}

impl Named for Mixed {
    fn name(&self) -> &'static str {
        "mixed"
    }
}
impl CoefficientPreset for Mixed {
    fn description(&self) -> &'static str {
        "wavemap plus 0.5 u^2 Q_01(u^1, u^2) in F^1 and 0.5 u^1 Q_12(u^2, u^1) in F^2"
    }
    fn build(&self) -> CoefficientTensor {
        let mut t = wavemap_tensor();
        add_qab(&mut t, [0, 1, 0, 1], 0, 1, 0.5);
        add_qab(&mut t, [1, 0, 1, 0], 1, 2, 0.5);
        t
    }
}

impl Named for NonNull {
    fn name(&self) -> &'static str {
        "nonnull"
    }
}
impl CoefficientPreset for NonNull {
    fn description(&self) -> &'static str {
        "wavemap plus u^2 (∂_t u^1)^2 in F^1, which violates the null condition"
    }
    fn build(&self) -> CoefficientTensor {
        let mut t = wavemap_tensor();
        t.add([0, 1, 0, 0], 0, 0, 1.0);
        t
    }
}

pub fn preset_registry() -> Registry<dyn CoefficientPreset> {
    let mut r: Registry<dyn CoefficientPreset> = Registry::new("coefficient preset");
    let all: [Arc<dyn CoefficientPreset>; 5] = [
        Arc::new(Linear),
        Arc::new(Cubic),
        Arc::new(WaveMap),
        Arc::new(Mixed),
        Arc::new(NonNull),
    ];
    for p in all {
        r.register(p).expect("preset names are unique");
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(a: f64, b: f64, c: f64) -> DerivTriple {
        DerivTriple::new(a, b, c)
    }

    #[test]
    fn q0_examples() {
        assert_eq!(eval_q0(&t(1.0, 0.0, 0.0), &t(1.0, 0.0, 0.0)), 1.0);
        for g in [-2.5, 0.0, 0.7, 13.0] {
            let d = t(g, -g, 0.0);
            assert_eq!(eval_q0(&d, &d), 0.0);
        }
        assert_eq!(eval_q0(&t(1.0, 2.0, 3.0), &t(4.0, 5.0, 6.0)), -24.0);
    }

    #[test]
    fn qab_examples() {
        let d = t(0.3, -1.2, 7.0);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(eval_qab(a, b, &d, &d).unwrap(), 0.0);
            }
        }
        assert_eq!(eval_qab(1, 2, &t(0.0, 1.0, 0.0), &t(0.0, 0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(eval_qab(0, 1, &t(1.0, 2.0, 3.0), &t(4.0, 5.0, 6.0)).unwrap(), -3.0);
        assert!(matches!(eval_qab(3, 0, &d, &d), Err(NullFormError::Index(3, 0))));
    }

    #[test]
    fn presets_verdicts() {
        let reg = preset_registry();
        assert_eq!(reg.names(), vec!["cubic", "linear", "mixed", "nonnull", "wavemap"]);
        for name in ["linear", "cubic", "wavemap", "mixed"] {
            assert!(check_null(&reg.get(name).unwrap().build()).all_null, "{name}");
        }
        let r = check_null(&reg.get("nonnull").unwrap().build());
        assert!(!r.all_null);
        let bad: Vec<_> = r.offending().collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].block, [1, 2, 1, 1]);
        assert_eq!(bad[0].sampled_max, 1.0);
    }

    #[test]
    fn q0_block_and_q00_block() {
        let mut q0 = CoefficientTensor::zeros(1);
        add_q0(&mut q0, [0, 0, 0, 0], 1.0);
        let r = check_null(&q0);
        assert!(r.all_null);
        assert!(r.blocks[0].sampled_max < 1e-15);

        let mut bad = CoefficientTensor::zeros(1);
        bad.set([0, 0, 0, 0], 0, 0, 1.0);
        let r = check_null(&bad);
        assert!(!r.all_null);
        assert_eq!(r.blocks[0].sampled_max, 1.0);
    }

    #[test]
    fn decomposition_examples() {
        let mut q0 = CoefficientTensor::zeros(1);
        add_q0(&mut q0, [0, 0, 0, 0], 1.0);
        let d = decompose_null(&q0).unwrap();
        assert_eq!(d.c0([0, 0, 0, 0]), 1.0);
        assert_eq!(d.cab([0, 0, 0, 0]), [0.0; 3]);

        let mut anti = CoefficientTensor::zeros(1);
        anti.set([0, 0, 0, 0], 0, 1, 1.0);
        anti.set([0, 0, 0, 0], 1, 0, -1.0);
        let d = decompose_null(&anti).unwrap();
        assert_eq!(d.c0([0, 0, 0, 0]), 0.0);
        assert_eq!(d.cab([0, 0, 0, 0]), [1.0, 0.0, 0.0]);
        assert_eq!(d.reconstruct(), anti);

        let nonnull = preset_registry().get("nonnull").unwrap().build();
        assert!(matches!(decompose_null(&nonnull), Err(NullFormError::NotNull(_))));
    }

    #[test]
    fn mixed_lists_couplings() {
        let d = decompose_null(&preset_registry().get("mixed").unwrap().build()).unwrap();
        let nz = d.nonzero();
        assert!(nz.contains(&([1, 2, 1, 2], "c_01", 0.5)));
        assert!(nz.contains(&([2, 1, 2, 1], "c_12", 0.5)));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let t = preset_registry().get("mixed").unwrap().build();
        let back = CoefficientTensor::parse_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(matches!(
            CoefficientTensor::parse_text("1 1 1 1 0 3 1.0"),
            Err(NullFormError::Parse { line: 1, .. })
        ));
        assert!(CoefficientTensor::parse_text("# nothing\n").is_err());
        assert!(CoefficientTensor::parse_text("0 1 1 1 0 0 1.0").is_err());
    }

    #[test]
    fn cubic_term_matches_contraction() {
        let t = preset_registry().get("mixed").unwrap().build();
        let c = t.cubic();
        let jets = [[0.3, 1.1, -0.4, 0.9], [-0.7, 0.2, 0.5, -1.3]];
        let mut out = [0.0; 2];
        c.eval(&jets, &mut out);
        let tri = |k: usize| DerivTriple::new(jets[k][1], jets[k][2], jets[k][3]);
        for i in 0..2 {
            let mut expect = 0.0;
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        expect += jets[j][0] * t.contract([i, j, k, l], &tri(k), &tri(l));
                    }
                }
            }
            assert!((out[i] - expect).abs() < 1e-15);
        }
    }
}
