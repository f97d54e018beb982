//! Pairwise convexity certificates.
//!
//! K-convexity of a C¹ potential is the statement
//! `⟨Du(x1) - Du(x0), x1 - x0⟩ >= K |x1 - x0|²` for all pairs. Checking all
//! pairs is O(N²), so certificates are sampled: every lattice pair within a
//! fixed stencil radius, the corner pairs (which catch the extremes of
//! monotone families), and a seeded batch of random long-range pairs.

use super::{gradient, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::MAX_DIM;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Deterministic sampling plan over node pairs.
#[derive(Debug, Clone, Serialize)]
pub struct PairPlan {
    /// Index-space radius: every pair `(p, p + d)` with `|d|_inf <= radius`.
    pub stencil_radius: usize,
    /// Number of seeded random long-range pairs.
    pub long_range: usize,
    pub seed: u64,
}

impl PairPlan {
    pub fn with_seed(seed: u64) -> Self {
        PairPlan {
            stencil_radius: 1,
            long_range: 4096,
            seed,
        }
    }

    /// Materialise the pair list for a grid. Deterministic for a fixed seed.
    pub fn pairs(&self, grid: &Grid) -> Vec<(usize, usize)> {
        let n = grid.dim();
        let r = self.stencil_radius as i64;
        // lexicographically positive offsets within the stencil radius
        let mut offsets: Vec<[i64; MAX_DIM]> = Vec::new();
        let lim = |k: usize| if k < n { r } else { 0 };
        for a in -lim(0)..=lim(0) {
            for b in -lim(1)..=lim(1) {
                for c in -lim(2)..=lim(2) {
                    let d = [a, b, c];
                    if d[..n].iter().find(|&&x| x != 0).map(|&x| x > 0) == Some(true) {
                        offsets.push(d);
                    }
                }
            }
        }
        let mut pairs = Vec::new();
        for p in 0..grid.len() {
            let m = grid.multi(p);
            'offs: for d in &offsets {
                let mut q = 0usize;
                for k in 0..n {
                    let t = m[k] as i64 + d[k];
                    if t < 0 || t >= grid.shape()[k] as i64 {
                        continue 'offs;
                    }
                    q += t as usize * grid.stride(k);
                }
                pairs.push((p, q));
            }
        }
        // all pairs among the 2^n corner nodes
        let mut corners = Vec::new();
        for mask in 0..(1usize << n) {
            let multi: Vec<usize> = (0..n)
                .map(|k| {
                    if mask >> k & 1 == 1 {
                        grid.shape()[k] - 1
                    } else {
                        0
                    }
                })
                .collect();
            corners.push(grid.flat(&multi));
        }
        for i in 0..corners.len() {
            for j in i + 1..corners.len() {
                pairs.push((corners[i], corners[j]));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let len = grid.len();
        for _ in 0..self.long_range {
            let a = rng.gen_range(0..len);
            let b = rng.gen_range(0..len);
            if a != b {
                pairs.push((a, b));
            }
        }
        pairs
    }
}

/// Scalar certificate from a sampled pairwise check, together with the plan
/// that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    /// Min (for convexity margins) or max (for discrepancy checks) over the
    /// sampled pairs of the normalized quantity.
    pub margin: f64,
    /// Pairs actually evaluated.
    pub pairs: usize,
    /// Nodes or pairs skipped (degenerate or underdetermined).
    pub skipped: usize,
    pub plan: PairPlan,
    /// Coordinates of the extremal pair.
    pub worst_x0: Option<Vec<f64>>,
    pub worst_x1: Option<Vec<f64>>,
}

/// Minimum over sampled pairs of
/// `(⟨Du(x1) - Du(x0), x1 - x0⟩ - K |x1 - x0|²) / |x1 - x0|²`.
/// A nonnegative margin certifies discrete K-convexity on the sample.
pub fn k_convexity_margin(u: &ScalarField, k: f64, plan: &PairPlan) -> Result<MarginReport> {
    let du = gradient(u)?;
    let grid = u.grid();
    let pairs = plan.pairs(grid);
    if pairs.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let eval = |i: usize| -> f64 {
        let (p, q) = pairs[i];
        let mut x0 = [0.0; MAX_DIM];
        let mut x1 = [0.0; MAX_DIM];
        grid.node_coord(p, &mut x0);
        grid.node_coord(q, &mut x1);
        let mut dot = 0.0;
        let mut dist2 = 0.0;
        for c in 0..grid.dim() {
            let dx = x1[c] - x0[c];
            dot += (du.get(q, c) - du.get(p, c)) * dx;
            dist2 += dx * dx;
        }
        dot / dist2 - k
    };
    let (margin, arg) = exec::min_indexed(pairs.len(), eval).expect("nonempty");
    let (p, q) = pairs[arg];
    Ok(MarginReport {
        margin,
        pairs: pairs.len(),
        skipped: 0,
        plan: plan.clone(),
        worst_x0: Some(grid.node_vec(p)),
        worst_x1: Some(grid.node_vec(q)),
    })
}
