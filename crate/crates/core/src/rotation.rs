//! Lewy-Yuan rotation of sampled potentials.
//!
//! The diagonal unitary `e^{-iσ}` maps the gradient graph of u to the
//! gradient graph of a new potential ū over rotated coordinates:
//!
//! ```text
//! x̄ =  cos(σ) x + sin(σ) Du(x)
//! ȳ = -sin(σ) x + cos(σ) Du(x)
//! ū(x) = u(x) + sin(σ)cos(σ) (|Du|² - |x|²)/2 - sin²(σ) Du·x
//! ```
//!
//! Semi-convexity (`u + (cot σ - ε)|x|²/2` convex) makes `x̄(x)` strongly
//! monotone with modulus `sin(σ) ε`, so the coordinate change inverts by a
//! damped fixed-point iteration with an explicit contraction rate, and the
//! rotated potential resamples onto a regular grid. Rotating by `-σ` is the
//! conjugate operation `negate ∘ rotate(σ) ∘ negate`, which recovers the
//! original potential up to an additive constant.

use crate::error::{Error, InversionFailure, Result};
use crate::exec;
use crate::fields::{
    gradient, hessian, k_convexity_margin, Grid, MarginReport, PairPlan, ScalarField, VectorField,
};
use crate::linalg::{solve, sym_eigen, MAX_DIM};
use serde::Serialize;

/// Rotation angle and the semi-convexity margin it relies on.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RotationParams {
    /// Rotation angle σ, radians, in (0, π/2) for downward rotations.
    pub sigma: f64,
    /// Margin ε > 0 in the hypothesis `u + (cot σ - ε)|x|²/2 convex`.
    pub eps_margin: f64,
}

impl RotationParams {
    pub fn new(sigma: f64, eps_margin: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0 && sigma < std::f64::consts::FRAC_PI_2) {
            return Err(Error::BadAngle(sigma));
        }
        if !(eps_margin.is_finite() && eps_margin > 0.0) {
            return Err(Error::BadMargin(eps_margin));
        }
        Ok(RotationParams { sigma, eps_margin })
    }

    /// K in the pairwise form of the semi-convexity hypothesis:
    /// `⟨ΔDu, Δx⟩ >= (ε - cot σ) |Δx|²`.
    pub fn convexity_threshold(&self) -> f64 {
        self.eps_margin - 1.0 / self.sigma.tan()
    }
}

/// Scattered image of a rotated gradient graph: per source node the rotated
/// coordinates, the claimed gradient, and the rotated potential value.
#[derive(Debug, Clone)]
pub struct RotatedGraph {
    grid: Grid,
    pub sigma: f64,
    pub eps_margin: f64,
    du: VectorField,
    ubar: ScalarField,
    xbar: VectorField,
    ybar: VectorField,
    /// Sup over nodes of the Hessian operator norm, used for the inversion
    /// damping constant.
    pub hessian_sup: f64,
    /// Min over sampled pairs of `(⟨Δx̄, Δx⟩ - sin(σ)ε|Δx|²)/|Δx|²`.
    pub monotone_margin: f64,
    /// Margin of the semi-convexity hypothesis on the sampled pairs.
    pub semiconvex_margin: f64,
}

impl RotatedGraph {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn xbar(&self) -> &VectorField {
        &self.xbar
    }

    pub fn ybar(&self) -> &VectorField {
        &self.ybar
    }

    pub fn ubar_samples(&self) -> &ScalarField {
        &self.ubar
    }

    /// CSV serialization: source coordinates, x̄, ȳ, ū — one row per node.
    pub fn to_csv(&self) -> String {
        let n = self.grid.dim();
        let mut s = String::new();
        for k in 0..n {
            s.push_str(&format!("x{k},"));
        }
        for k in 0..n {
            s.push_str(&format!("xbar{k},"));
        }
        for k in 0..n {
            s.push_str(&format!("ybar{k},"));
        }
        s.push_str("ubar\n");
        for p in 0..self.grid.len() {
            let x = self.grid.node_vec(p);
            for v in &x {
                s.push_str(&format!("{v:.16e},"));
            }
            for k in 0..n {
                s.push_str(&format!("{:.16e},", self.xbar.get(p, k)));
            }
            for k in 0..n {
                s.push_str(&format!("{:.16e},", self.ybar.get(p, k)));
            }
            s.push_str(&format!("{:.16e}\n", self.ubar.values()[p]));
        }
        s
    }

    /// Largest axis box inside the image of the coordinate change: per axis,
    /// the max of x̄_k over the low face against the min over the high face,
    /// shrunk by `shrink` of the extent on each side.
    pub fn inscribed_box(&self, shrink: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.grid.dim();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for p in 0..self.grid.len() {
            for k in 0..n {
                let pos = self.grid.axis_pos(p, k);
                if pos == 0 {
                    lo[k] = lo[k].max(self.xbar.get(p, k));
                }
                if pos == self.grid.shape()[k] - 1 {
                    hi[k] = hi[k].min(self.xbar.get(p, k));
                }
            }
        }
        for k in 0..n {
            let ext = hi[k] - lo[k];
            if !(ext.is_finite() && ext > 0.0) {
                return Err(Error::BadParameter(format!(
                    "degenerate rotated image on axis {k}"
                )));
            }
            lo[k] += shrink * ext;
            hi[k] -= shrink * ext;
        }
        Ok((lo, hi))
    }

    /// Regular grid with the given shape spanning the inscribed box.
    pub fn target_grid(&self, shape: &[usize], shrink: f64) -> Result<Grid> {
        let (lo, hi) = self.inscribed_box(shrink)?;
        let spacing: Vec<f64> = (0..self.grid.dim())
            .map(|k| (hi[k] - lo[k]) / (shape[k] as f64 - 1.0))
            .collect();
        Grid::new(lo, spacing, shape.to_vec())
    }

    /// x̄ at an arbitrary point via the interpolated gradient field.
    fn xbar_at(&self, x: &[f64; MAX_DIM], out: &mut [f64; MAX_DIM]) {
        let n = self.grid.dim();
        let mut du = [0.0; MAX_DIM];
        self.du.eval(x, &mut du);
        let (c, s) = (self.sigma.cos(), self.sigma.sin());
        for k in 0..n {
            out[k] = c * x[k] + s * du[k];
        }
    }
}

fn rotation_samples(
    u: &ScalarField,
    du: &VectorField,
    sigma: f64,
) -> (VectorField, VectorField, ScalarField) {
    let grid = u.grid();
    let n = grid.dim();
    let (c, s) = (sigma.cos(), sigma.sin());
    let xbar = exec::map_collect(grid.len() * n, |i| {
        let (p, k) = (i / n, i % n);
        let mut x = [0.0; MAX_DIM];
        grid.node_coord(p, &mut x);
        c * x[k] + s * du.get(p, k)
    });
    let ybar = exec::map_collect(grid.len() * n, |i| {
        let (p, k) = (i / n, i % n);
        let mut x = [0.0; MAX_DIM];
        grid.node_coord(p, &mut x);
        -s * x[k] + c * du.get(p, k)
    });
    let ubar = exec::map_collect(grid.len(), |p| {
        let mut x = [0.0; MAX_DIM];
        grid.node_coord(p, &mut x);
        let mut du2 = 0.0;
        let mut x2 = 0.0;
        let mut dot = 0.0;
        for k in 0..n {
            let d = du.get(p, k);
            du2 += d * d;
            x2 += x[k] * x[k];
            dot += d * x[k];
        }
        u.values()[p] + s * c * (du2 - x2) / 2.0 - s * s * dot
    });
    (
        VectorField::new(grid.clone(), xbar).expect("finite"),
        VectorField::new(grid.clone(), ybar).expect("finite"),
        ScalarField::new(grid.clone(), ubar).expect("finite"),
    )
}

/// Forward Lewy-Yuan rotation. Refuses potentials that violate the sampled
/// semi-convexity hypothesis, and certifies strong monotonicity
/// `⟨Δx̄, Δx⟩ >= sin(σ) ε |Δx|²` on the sampled pairs.
pub fn rotate_graph(
    u: &ScalarField,
    params: &RotationParams,
    plan: &PairPlan,
) -> Result<RotatedGraph> {
    let check = k_convexity_margin(u, params.convexity_threshold(), plan)?;
    if check.margin < -1e-10 {
        return Err(Error::SemiconvexityViolated {
            margin: check.margin,
            x0: check.worst_x0.unwrap_or_default(),
            x1: check.worst_x1.unwrap_or_default(),
        });
    }
    let du = gradient(u)?;
    let hu = hessian(u)?;
    let grid = u.grid();
    let n = grid.dim();
    let hessian_sup = (0..grid.len())
        .map(|p| {
            let (evals, _) = sym_eigen(n, &hu.mat(p));
            evals[..n].iter().fold(0.0f64, |a, &l| a.max(l.abs()))
        })
        .fold(0.0f64, f64::max);
    let (xbar, ybar, mut ubar) = rotation_samples(u, &du, params.sigma);
    ubar.gauge_at_center();

    // monotonicity certificate over the same sampling plan
    let pairs = plan.pairs(grid);
    let floor = params.sigma.sin() * params.eps_margin;
    let eval = |i: usize| -> f64 {
        let (p, q) = pairs[i];
        let mut x0 = [0.0; MAX_DIM];
        let mut x1 = [0.0; MAX_DIM];
        grid.node_coord(p, &mut x0);
        grid.node_coord(q, &mut x1);
        let mut dot = 0.0;
        let mut dist2 = 0.0;
        for k in 0..n {
            let dx = x1[k] - x0[k];
            dot += (xbar.get(q, k) - xbar.get(p, k)) * dx;
            dist2 += dx * dx;
        }
        dot / dist2 - floor
    };
    let (monotone_margin, _) = exec::min_indexed(pairs.len(), eval).ok_or(Error::EmptyPlan)?;

    Ok(RotatedGraph {
        grid: grid.clone(),
        sigma: params.sigma,
        eps_margin: params.eps_margin,
        du,
        ubar,
        xbar,
        ybar,
        hessian_sup,
        monotone_margin,
        semiconvex_margin: check.margin,
    })
}

/// Check the derivative identity `Dū(x̄₀) = cos(σ) Du(x₀) - sin(σ) x₀` (the
/// ȳ-component of the rotation) by fitting least-squares planes to the
/// scattered `(x̄, ū)` samples over the 2n axis neighbours of each interior
/// node. Reports the max discrepancy; nodes with fewer than n+1 usable
/// neighbours are skipped and counted.
pub fn rotated_gradient_check(
    u: &ScalarField,
    params: &RotationParams,
    plan: &PairPlan,
) -> Result<MarginReport> {
    let rg = rotate_graph(u, params, plan)?;
    let grid = rg.grid();
    let n = grid.dim();
    struct NodeOut {
        disc: f64,
        skipped: bool,
    }
    let nodes = exec::map_collect(grid.len(), |p| {
        let m = grid.multi(p);
        let mut neighbours = Vec::with_capacity(2 * n);
        for k in 0..n {
            if m[k] == 0 || m[k] + 1 == grid.shape()[k] {
                return NodeOut {
                    disc: 0.0,
                    skipped: true,
                };
            }
            neighbours.push(p - grid.stride(k));
            neighbours.push(p + grid.stride(k));
        }
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for &q in &neighbours {
            let mut d = [0.0; MAX_DIM];
            for k in 0..n {
                d[k] = rg.xbar.get(q, k) - rg.xbar.get(p, k);
            }
            let dv = rg.ubar.values()[q] - rg.ubar.values()[p];
            for i in 0..n {
                for j in 0..n {
                    a[i][j] += d[i] * d[j];
                }
                b[i] += dv * d[i];
            }
        }
        match solve(n, &a, &b) {
            Some(fit) => {
                let mut disc2 = 0.0;
                for k in 0..n {
                    let e = rg.ybar.get(p, k) - fit[k];
                    disc2 += e * e;
                }
                NodeOut {
                    disc: disc2.sqrt(),
                    skipped: false,
                }
            }
            None => NodeOut {
                disc: 0.0,
                skipped: true,
            },
        }
    });
    let mut max_disc = 0.0f64;
    let mut worst = 0usize;
    let mut skipped = 0usize;
    let mut checked = 0usize;
    for (p, node) in nodes.iter().enumerate() {
        if node.skipped {
            skipped += 1;
        } else {
            checked += 1;
            if node.disc > max_disc {
                max_disc = node.disc;
                worst = p;
            }
        }
    }
    Ok(MarginReport {
        margin: max_disc,
        pairs: checked,
        skipped,
        plan: plan.clone(),
        worst_x0: Some(grid.node_vec(worst)),
        worst_x1: None,
    })
}

const INVERT_MAX_STEPS: usize = 10_000;
const INVERT_TOL_FACTOR: f64 = 1e-10;

/// Invert the coordinate change on a regular target grid by the damped fixed
/// point `x ← x - τ (x̄(x) - x̄*)` with `τ = sin(σ) ε / L²`,
/// `L = cos(σ) + sin(σ) ‖D²u‖`. Strong monotonicity makes this a global
/// contraction. Emits `ū(x̄*)` interpolated at the solved preimage.
pub fn invert_coordinates(rg: &RotatedGraph, target: &Grid) -> Result<ScalarField> {
    if target.dim() != rg.grid().dim() {
        return Err(Error::BadDimension(target.dim()));
    }
    let n = rg.grid().dim();
    let (sig, eps) = (rg.sigma, rg.eps_margin);
    let lip = sig.cos() + sig.sin() * rg.hessian_sup;
    let tau = sig.sin() * eps / (lip * lip);
    let tol = INVERT_TOL_FACTOR * rg.grid().diameter();
    let lo = rg.grid().origin().to_vec();
    let hi = rg.grid().box_hi();

    // warm starts: bin each source node into the target cell its image lands in
    let mut start: Vec<usize> = vec![usize::MAX; target.len()];
    let mut start_dist = vec![f64::INFINITY; target.len()];
    for p in 0..rg.grid().len() {
        let mut idx = 0usize;
        let mut dist = 0.0f64;
        let mut inside = true;
        for k in 0..n {
            let s = (rg.xbar.get(p, k) - target.origin()[k]) / target.spacing()[k];
            let c = s.round();
            if c < 0.0 || c >= target.shape()[k] as f64 {
                inside = false;
                break;
            }
            idx += c as usize * target.stride(k);
            let d = (s - c) * target.spacing()[k];
            dist += d * d;
        }
        if inside && dist < start_dist[idx] {
            start_dist[idx] = dist;
            start[p_guard(idx)] = p;
        }
    }

    struct NodeOut {
        value: f64,
        residual: f64,
    }
    let center = rg.grid().center_node();
    let out = exec::map_collect(target.len(), |q| {
        let mut xstar = [0.0; MAX_DIM];
        target.node_coord(q, &mut xstar);
        let mut x = [0.0; MAX_DIM];
        let seed = if start[q] != usize::MAX {
            start[q]
        } else {
            center
        };
        rg.grid().node_coord(seed, &mut x);
        let mut residual = f64::INFINITY;
        for _ in 0..INVERT_MAX_STEPS {
            let mut xb = [0.0; MAX_DIM];
            rg.xbar_at(&x, &mut xb);
            let mut r2 = 0.0;
            for k in 0..n {
                r2 += (xb[k] - xstar[k]) * (xb[k] - xstar[k]);
            }
            residual = r2.sqrt();
            if residual < tol {
                break;
            }
            for k in 0..n {
                x[k] = (x[k] - tau * (xb[k] - xstar[k])).clamp(lo[k], hi[k]);
            }
        }
        NodeOut {
            value: rg.ubar.eval(&x),
            residual,
        }
    });
    let failures: Vec<InversionFailure> = out
        .iter()
        .enumerate()
        .filter(|(_, o)| !(o.residual < tol))
        .map(|(q, o)| InversionFailure {
            node: q,
            target: target.node_vec(q),
            residual: o.residual,
        })
        .collect();
    if !failures.is_empty() {
        return Err(Error::InversionFailed { failures });
    }
    let mut field = ScalarField::new(target.clone(), out.into_iter().map(|o| o.value).collect())?;
    field.gauge_at_center();
    Ok(field)
}

#[inline]
fn p_guard(idx: usize) -> usize {
    idx
}

/// Rotate and resample: ū on a regular grid over the rotated domain.
pub fn rotate_to_grid(
    u: &ScalarField,
    params: &RotationParams,
    target: &Grid,
    plan: &PairPlan,
) -> Result<ScalarField> {
    let rg = rotate_graph(u, params, plan)?;
    invert_coordinates(&rg, target)
}

/// Inverse rotation through the conjugation identity: rotating by -σ is
/// `negate ∘ rotate(σ) ∘ negate`. Recovers the original potential on the
/// target grid up to an additive constant, fixed at the grid center.
pub fn inverse_rotate(
    ubar: &ScalarField,
    params: &RotationParams,
    target: &Grid,
    plan: &PairPlan,
) -> Result<ScalarField> {
    let neg = ScalarField::new(
        ubar.grid().clone(),
        ubar.values().iter().map(|v| -v).collect(),
    )?;
    let rg = rotate_graph(&neg, params, plan)?;
    let inv = invert_coordinates(&rg, target)?;
    let mut rec = ScalarField::new(
        target.clone(),
        inv.values().iter().map(|v| -v).collect(),
    )?;
    rec.gauge_at_center();
    Ok(rec)
}

/// Closed-form C^{1,1} bound for the rotated potential:
/// `max{ (cos²σ + 1)/(sin²σ ε), (cos²σ + 1)/(sin σ cos σ) }`.
pub fn c11_bound(params: &RotationParams) -> f64 {
    let (s, c) = (params.sigma.sin(), params.sigma.cos());
    let num = c * c + 1.0;
    (num / (s * s * params.eps_margin)).max(num / (s * c))
}

/// Max over sampled pairs of the rotated difference ratio `|Δȳ|/|Δx̄|`, the
/// quantity the C^{1,1} bound controls.
pub fn lipschitz_ratio_max(rg: &RotatedGraph, plan: &PairPlan) -> Result<f64> {
    let grid = rg.grid();
    let n = grid.dim();
    let pairs = plan.pairs(grid);
    if pairs.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let eval = |i: usize| -> f64 {
        let (p, q) = pairs[i];
        let mut dy2 = 0.0;
        let mut dx2 = 0.0;
        for k in 0..n {
            let dy = rg.ybar.get(q, k) - rg.ybar.get(p, k);
            let dx = rg.xbar.get(q, k) - rg.xbar.get(p, k);
            dy2 += dy * dy;
            dx2 += dx * dx;
        }
        if dx2 == 0.0 {
            return 0.0;
        }
        -(dy2 / dx2).sqrt()
    };
    let (neg_max, _) = exec::min_indexed(pairs.len(), eval).ok_or(Error::EmptyPlan)?;
    Ok(-neg_max)
}

/// Convexity propagation: if u is tan(κ)-convex then the rotated samples must
/// be tan(κ-σ)-convex in the pairwise sense
/// `⟨Δȳ, Δx̄⟩ >= tan(κ-σ) |Δx̄|²`. Returns the sampled margin.
pub fn convexity_propagation_check(
    u: &ScalarField,
    kappa: f64,
    params: &RotationParams,
    plan: &PairPlan,
) -> Result<MarginReport> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    if !(kappa.abs() < half_pi && (kappa - params.sigma).abs() < half_pi) {
        return Err(Error::BadParameter(format!(
            "kappa = {kappa} and kappa - sigma must lie in (-pi/2, pi/2)"
        )));
    }
    let input = k_convexity_margin(u, kappa.tan(), plan)?;
    if input.margin < -1e-10 {
        return Err(Error::InputConvexityViolated {
            margin: input.margin,
            x0: input.worst_x0.unwrap_or_default(),
            x1: input.worst_x1.unwrap_or_default(),
        });
    }
    let du = gradient(u)?;
    let (xbar, ybar, _) = rotation_samples(u, &du, params.sigma);
    let grid = u.grid();
    let n = grid.dim();
    let k_target = (kappa - params.sigma).tan();
    let pairs = plan.pairs(grid);
    let eval = |i: usize| -> f64 {
        let (p, q) = pairs[i];
        let mut dot = 0.0;
        let mut dx2 = 0.0;
        for k in 0..n {
            let dxb = xbar.get(q, k) - xbar.get(p, k);
            let dyb = ybar.get(q, k) - ybar.get(p, k);
            dot += dyb * dxb;
            dx2 += dxb * dxb;
        }
        if dx2 == 0.0 {
            return f64::INFINITY; // degenerate pair, cannot constrain
        }
        dot / dx2 - k_target
    };
    let (margin, arg) = exec::min_indexed(pairs.len(), eval).ok_or(Error::EmptyPlan)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::hessian;
    use crate::phase::phase;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn plan() -> PairPlan {
        PairPlan {
            stencil_radius: 1,
            long_range: 512,
            seed: 42,
        }
    }

    fn quad_iso(grid: &Grid, lam: f64) -> ScalarField {
        ScalarField::from_fn(grid.clone(), move |x| {
            0.5 * lam * x.iter().map(|v| v * v).sum::<f64>()
        })
    }

    #[test]
    fn rotate_quadratic_closed_form() {
        let g = Grid::uniform_box(2, 17, 0.0, 1.0).unwrap();
        let u = quad_iso(&g, 1.0);
        let params = RotationParams::new(FRAC_PI_4, 1.0).unwrap();
        let rg = rotate_graph(&u, &params, &plan()).unwrap();
        let r2 = 2.0f64.sqrt();
        for p in 0..g.len() {
            let x = g.node_vec(p);
            for k in 0..2 {
                assert!((rg.xbar().get(p, k) - r2 * x[k]).abs() < 1e-12);
                assert!(rg.ybar().get(p, k).abs() < 1e-12);
            }
            assert!(rg.ubar_samples().values()[p].abs() < 1e-12);
        }
        assert!(rg.monotone_margin >= -1e-12);
    }

    #[test]
    fn rotate_zero_section() {
        let g = Grid::uniform_box(1, 33, 0.0, 1.0).unwrap();
        let u = ScalarField::zeros(g.clone());
        let sigma = 0.3;
        let params = RotationParams::new(sigma, 1.0).unwrap();
        let rg = rotate_graph(&u, &params, &plan()).unwrap();
        let xc = g.node_vec(g.center_node())[0];
        for p in 0..g.len() {
            let x = g.node_vec(p)[0];
            assert!((rg.xbar().get(p, 0) - sigma.cos() * x).abs() < 1e-12);
            assert!((rg.ybar().get(p, 0) + sigma.sin() * x).abs() < 1e-12);
            // ubar(xbar) = -tan(sigma)|xbar|²/2, gauged at the center node
            let xb = sigma.cos() * x;
            let want = -sigma.tan() * xb * xb / 2.0 + sigma.tan() * (sigma.cos() * xc).powi(2) / 2.0;
            assert!(
                (rg.ubar_samples().values()[p] - want).abs() < 1e-12,
                "node {p}"
            );
        }
    }

    #[test]
    fn rotate_refuses_non_semiconvex() {
        let g = Grid::uniform_box(2, 17, 0.0, 1.0).unwrap();
        let u = quad_iso(&g, -3.0);
        let params = RotationParams::new(FRAC_PI_4, 0.5).unwrap();
        match rotate_graph(&u, &params, &plan()) {
            Err(Error::SemiconvexityViolated { margin, x0, x1 }) => {
                assert!(margin < 0.0);
                assert_eq!(x0.len(), 2);
                assert_eq!(x1.len(), 2);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn gradient_check_quadratic_and_zero() {
        let g = Grid::uniform_box(2, 17, 0.0, 1.0).unwrap();
        let params = RotationParams::new(FRAC_PI_4, 1.0).unwrap();
        let u = quad_iso(&g, 1.0);
        let r = rotated_gradient_check(&u, &params, &plan()).unwrap();
        assert!(r.margin < 1e-8, "discrepancy {}", r.margin);
        assert!(r.pairs > 0);

        let z = ScalarField::zeros(g);
        let r = rotated_gradient_check(&z, &params, &plan()).unwrap();
        assert!(r.margin < 1e-10);
    }

    #[test]
    fn gradient_check_decays_under_refinement() {
        let params = RotationParams::new(FRAC_PI_8, 0.2).unwrap();
        let run = |nodes: usize| {
            let g = Grid::uniform_box(2, nodes, 0.0, 1.0).unwrap();
            let u = ScalarField::from_fn(g, |x| x[0] * x[0] - x[1] * x[1]);
            rotated_gradient_check(&u, &params, &plan())
                .unwrap()
                .margin
        };
        let r = run(17) / run(33);
        assert!(r > 1.5, "decay ratio {r}");
    }

    #[test]
    fn invert_quadratic_is_exact() {
        let g = Grid::uniform_box(2, 17, 0.0, 1.0).unwrap();
        let u = quad_iso(&g, 2.0);
        // eps = cot(pi/4) + 2 = 3 is the sharp margin for lambda = 2
        let params = RotationParams::new(FRAC_PI_4, 3.0).unwrap();
        let rg = rotate_graph(&u, &params, &plan()).unwrap();
        let target = rg.target_grid(&[17, 17], 0.01).unwrap();
        let ub = invert_coordinates(&rg, &target).unwrap();
        // ubar is the quadratic with eigenvalue tan(arctan 2 - pi/4) = 1/3
        let lam_bar = (2.0f64.atan() - FRAC_PI_4).tan();
        let cnode = target.center_node();
        let c = target.node_vec(cnode);
        for q in 0..target.len() {
            let x = target.node_vec(q);
            let want = 0.5
                * lam_bar
                * ((x[0] * x[0] + x[1] * x[1]) - (c[0] * c[0] + c[1] * c[1]));
            assert!(
                (ub.values()[q] - want).abs() < 1e-9,
                "node {q}: {} vs {want}",
                ub.values()[q]
            );
        }
    }

    #[test]
    fn invert_zero_potential() {
        let g = Grid::uniform_box(1, 33, 0.0, 1.0).unwrap();
        let u = ScalarField::zeros(g);
        let sigma = 0.3;
        let params = RotationParams::new(sigma, 1.0).unwrap();
        let rg = rotate_graph(&u, &params, &plan()).unwrap();
        let target = rg.target_grid(&[17], 0.05).unwrap();
        // x = xbar / cos(sigma): round-trip through ubar values
        let ub = invert_coordinates(&rg, &target).unwrap();
        let cnode = target.center_node();
        let xc = target.node_vec(cnode)[0] / sigma.cos();
        for q in 0..target.len() {
            let xb = target.node_vec(q)[0];
            let x = xb / sigma.cos();
            let want = -sigma.sin() * sigma.cos() * (x * x) / 2.0
                + sigma.sin() * sigma.cos() * (xc * xc) / 2.0;
            assert!((ub.values()[q] - want).abs() < 1e-9, "node {q}");
        }
    }

    #[test]
    fn rotated_hessian_eigenvalues_through_pipeline() {
        let g = Grid::uniform_box(2, 33, 0.0, 1.0).unwrap();
        let u = quad_iso(&g, 2.0);
        let params = RotationParams::new(FRAC_PI_4, 3.0).unwrap();
        let rg = rotate_graph(&u, &params, &plan()).unwrap();
        let target = rg.target_grid(&[33, 33], 0.01).unwrap();
        let ub = invert_coordinates(&rg, &target).unwrap();
        let h = hessian(&ub).unwrap();
        let want = 1.0 / 3.0;
        let ph = phase(&h);
        for q in 0..target.len() {
            for &l in ph.eigenvalues(q) {
                assert!((l - want).abs() < 1e-8, "node {q}: eigenvalue {l}");
            }
        }
    }

    #[test]
    fn round_trip_quadratic_identity() {
        let g = Grid::uniform_box(2, 33, 0.0, 1.0).unwrap();
        let u = quad_iso(&g, 1.0);
        let params = RotationParams::new(FRAC_PI_4, 2.0).unwrap();
        let rg = rotate_graph(&u, &params, &plan()).unwrap();
        let mid = rg.target_grid(&[33, 33], 0.01).unwrap();
        let ub = invert_coordinates(&rg, &mid).unwrap();
        let back = Grid::uniform_box(2, 33, 0.25, 0.75).unwrap();
        let rec = inverse_rotate(&ub, &params, &back, &plan()).unwrap();
        let c = back.node_vec(back.center_node());
        for q in 0..back.len() {
            let x = back.node_vec(q);
            let want = 0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.5 * (c[0] * c[0] + c[1] * c[1]);
            assert!(
                (rec.values()[q] - want).abs() < 1e-8,
                "node {q}: {} vs {want}",
                rec.values()[q]
            );
        }
    }

    #[test]
    fn inverse_of_constant_recovers_isotropic_quadratic() {
        // the sigma = pi/4 image of |x|²/2 is flat; going back must bend it up
        let gbar = Grid::uniform_box(2, 33, 0.0, 2.0f64.sqrt()).unwrap();
        let ub = ScalarField::zeros(gbar.clone());
        let params = RotationParams::new(FRAC_PI_4, 1.0).unwrap();
        let target = Grid::uniform_box(2, 17, 0.2, 0.8).unwrap();
        let rec = inverse_rotate(&ub, &params, &target, &plan()).unwrap();
        let c = target.node_vec(target.center_node());
        for q in 0..target.len() {
            let x = target.node_vec(q);
            let want = 0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.5 * (c[0] * c[0] + c[1] * c[1]);
            assert!(
                (rec.values()[q] - want).abs() < 1e-8,
                "node {q}: {} vs {want}",
                rec.values()[q]
            );
        }
    }

    #[test]
    fn c11_bound_closed_forms() {
        let p = RotationParams::new(FRAC_PI_4, 1.0).unwrap();
        assert!((c11_bound(&p) - 3.0).abs() < 1e-14);
        let p = RotationParams::new(FRAC_PI_4, 0.5).unwrap();
        assert!((c11_bound(&p) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn lipschitz_ratio_below_bound() {
        let g = Grid::uniform_box(2, 17, 0.0, 1.0).unwrap();
        let params = RotationParams::new(FRAC_PI_4, 1.0).unwrap();
        for u in [quad_iso(&g, 2.0), quad_iso(&g, 0.0), quad_iso(&g, 1.0)] {
            let rg = rotate_graph(&u, &params, &plan()).unwrap();
            let ratio = lipschitz_ratio_max(&rg, &plan()).unwrap();
            assert!(ratio <= c11_bound(&params) + 1e-9, "ratio {ratio}");
        }
    }

    #[test]
    fn convexity_propagation_cases() {
        let g = Grid::uniform_box(2, 17, 0.0, 1.0).unwrap();
        let params = RotationParams::new(FRAC_PI_8, 0.5).unwrap();
        // equality case: u = tan(kappa) |x|²/2
        let kappa = 0.6_f64;
        let u = quad_iso(&g, kappa.tan());
        let r = convexity_propagation_check(&u, kappa, &params, &plan()).unwrap();
        assert!(r.margin.abs() < 1e-9, "margin {}", r.margin);

        // |x|²/2 is tan(pi/4)-convex; rotated by pi/8 it stays tan(pi/8)-convex
        let u = quad_iso(&g, 1.0);
        let r = convexity_propagation_check(&u, FRAC_PI_4, &params, &plan()).unwrap();
        assert!(r.margin >= -1e-9);

        // mixed-spectrum potential with kappa from its smallest eigenvalue
        let u = ScalarField::from_fn(g.clone(), |x| {
            x[0] * x[0] - x[1] * x[1] + x[0] * x[0] + x[1] * x[1]
        });
        let r = convexity_propagation_check(&u, 0.0, &params, &plan()).unwrap();
        assert!(r.margin >= -1e-9, "margin {}", r.margin);

        // non-convex input refused
        let v = quad_iso(&g, -1.0);
        assert!(matches!(
            convexity_propagation_check(&v, 0.0, &params, &plan()),
            Err(Error::InputConvexityViolated { .. })
        ));
    }

    #[test]
    fn phase_shift_on_quadratics() {
        // theta(xbar) = theta(x) - n*sigma for quadratic potentials
        let g = Grid::uniform_box(2, 33, 0.0, 1.0).unwrap();
        let u = quad_iso(&g, 1.0);
        let sigma = FRAC_PI_8;
        let params = RotationParams::new(sigma, 1.0).unwrap();
        let rg = rotate_graph(&u, &params, &plan()).unwrap();
        let target = rg.target_grid(&[33, 33], 0.01).unwrap();
        let ub = invert_coordinates(&rg, &target).unwrap();
        let theta_src = phase(&hessian(&u).unwrap());
        let theta_rot = phase(&hessian(&ub).unwrap());
        let want = theta_src.theta()[0] - 2.0 * sigma;
        for q in 0..target.len() {
            assert!(
                (theta_rot.theta()[q] - want).abs() < 1e-8,
                "node {q}: {}",
                theta_rot.theta()[q]
            );
        }
    }

    #[test]
    fn volume_isometry_on_quadratic() {
        // for isotropic quadratics the image box maps back to a box, so the
        // volumes over corresponding boxes agree to rounding
        let g = Grid::uniform_box(2, 33, 0.0, 1.0).unwrap();
        let lam = 1.0f64;
        let u = quad_iso(&g, lam);
        let params = RotationParams::new(FRAC_PI_8, 1.0).unwrap();
        let rg = rotate_graph(&u, &params, &plan()).unwrap();
        let target = rg.target_grid(&[33, 33], 0.0).unwrap();
        let ub = invert_coordinates(&rg, &target).unwrap();
        let vol_rot = crate::phase::volume(&ub).unwrap();
        // preimage of the target box under xbar = (cos + lam sin) x
        let scale = params.sigma.cos() + lam * params.sigma.sin();
        let lo = target.origin()[0] / scale;
        let hi = target.box_hi()[0] / scale;
        let src = Grid::uniform_box(2, 33, lo, hi).unwrap();
        let usrc = quad_iso(&src, lam);
        let vol_src = crate::phase::volume(&usrc).unwrap();
        assert!(
            (vol_rot - vol_src).abs() < 1e-8 * vol_src,
            "{vol_rot} vs {vol_src}"
        );
    }
}
