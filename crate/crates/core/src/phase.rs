//! Lagrangian geometry of the gradient graph.
//!
//! For a potential u the graph `Γ_u = {(x, Du(x))}` carries the induced
//! metric `g = I + (D²u)ᵀ D²u` and the Lagrangian phase
//! `θ = Σᵢ arctan λᵢ` over the eigenvalues of `D²u`. The volume of the graph
//! is `∫ √det g`, and the mean curvature magnitude is `|∇θ|_g`, which
//! vanishes exactly when the graph is special Lagrangian.

use crate::error::{Error, Result};
use crate::exec;
use crate::fields::{
    gradient, hessian, integrate, Grid, PairPlan, ScalarField, SymmetricMatrixField, tri_idx,
    tri_len,
};
use crate::linalg::{arctan_sum, mat_mul, sym_eigen, sym_from_eigen, Mat};
use num_complex::Complex64;
use serde::Serialize;

/// Induced metric data per node: `g`, its inverse, and `√det g`.
///
/// `g` shares eigenvectors with the Hessian it was built from; its
/// eigenvalues are `1 + λᵢ²`, so it is always positive definite and
/// `√det g >= 1`.
#[derive(Debug, Clone)]
pub struct MetricField {
    grid: Grid,
    g: Vec<f64>,
    g_inv: Vec<f64>,
    sqrt_det: Vec<f64>,
}

impl MetricField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn g_mat(&self, node: usize) -> Mat {
        unpack_tri(self.grid.dim(), &self.g, node)
    }

    pub fn g_inv_mat(&self, node: usize) -> Mat {
        unpack_tri(self.grid.dim(), &self.g_inv, node)
    }

    #[inline]
    pub fn g_inv_entry(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.grid.dim();
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.g_inv[node * tri_len(n) + tri_idx(n, i, j)]
    }

    #[inline]
    pub fn sqrt_det(&self, node: usize) -> f64 {
        self.sqrt_det[node]
    }

    pub fn sqrt_det_values(&self) -> &[f64] {
        &self.sqrt_det
    }
}

fn unpack_tri(n: usize, data: &[f64], node: usize) -> Mat {
    let t = tri_len(n);
    let mut m = [[0.0; 3]; 3];
    for i in 0..n {
        for j in i..n {
            let v = data[node * t + tri_idx(n, i, j)];
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Lagrangian phase per node, with the sorted Hessian eigenvalues that
/// produced it.
#[derive(Debug, Clone)]
pub struct PhaseField {
    grid: Grid,
    theta: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl PhaseField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Eigenvalues at a node, sorted ascending.
    pub fn eigenvalues(&self, node: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.eigenvalues[node * n..(node + 1) * n]
    }

    pub fn theta_field(&self) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.theta.clone()).expect("finite by construction")
    }
}

/// `g = I + MᵀM` per node, with the inverse and `√det` computed through the
/// symmetric eigen-decomposition of M.
pub fn induced_metric(m: &SymmetricMatrixField) -> MetricField {
    let grid = m.grid().clone();
    let n = grid.dim();
    let t = tri_len(n);
    struct NodeOut {
        g: [f64; 6],
        ginv: [f64; 6],
        sd: f64,
    }
    let nodes = exec::map_collect(grid.len(), |p| {
        let mat = m.mat(p);
        let (evals, evecs) = sym_eigen(n, &mat);
        let g = sym_from_eigen(n, &evals, &evecs, |l| 1.0 + l * l);
        let ginv = sym_from_eigen(n, &evals, &evecs, |l| 1.0 / (1.0 + l * l));
        let mut sd = 1.0;
        for &l in &evals[..n] {
            sd *= (1.0 + l * l).sqrt();
        }
        let mut out = NodeOut {
            g: [0.0; 6],
            ginv: [0.0; 6],
            sd,
        };
        for i in 0..n {
            for j in i..n {
                out.g[tri_idx(n, i, j)] = g[i][j];
                out.ginv[tri_idx(n, i, j)] = ginv[i][j];
            }
        }
        out
    });
    let mut g = Vec::with_capacity(grid.len() * t);
    let mut g_inv = Vec::with_capacity(grid.len() * t);
    let mut sqrt_det = Vec::with_capacity(grid.len());
    for node in nodes {
        g.extend_from_slice(&node.g[..t]);
        g_inv.extend_from_slice(&node.ginv[..t]);
        sqrt_det.push(node.sd);
    }
    MetricField {
        grid,
        g,
        g_inv,
        sqrt_det,
    }
}

/// Phase `θ = Σ arctan λᵢ` per node. Branch-free: each arctan lies in
/// (-π/2, π/2). The arctan sum is accumulated in magnitude order so the
/// result is exactly odd in M.
pub fn phase(m: &SymmetricMatrixField) -> PhaseField {
    let grid = m.grid().clone();
    let n = grid.dim();
    struct NodeOut {
        theta: f64,
        evals: [f64; 3],
    }
    let nodes = exec::map_collect(grid.len(), |p| {
        let mat = m.mat(p);
        let (evals, _) = sym_eigen(n, &mat);
        NodeOut {
            theta: arctan_sum(n, &evals),
            evals,
        }
    });
    let mut theta = Vec::with_capacity(grid.len());
    let mut eigenvalues = Vec::with_capacity(grid.len() * n);
    for node in nodes {
        theta.push(node.theta);
        eigenvalues.extend_from_slice(&node.evals[..n]);
    }
    PhaseField {
        grid,
        theta,
        eigenvalues,
    }
}

/// Phase of a single symmetric matrix via `Im log det(I + iM)` on the
/// principal branch. Cross-check route only: it refuses matrices whose
/// eigenvalue-sum phase leaves the window (-π, π) where the principal branch
/// is unambiguous.
pub fn phase_via_complex_det(n: usize, m: &Mat) -> Result<f64> {
    let (evals, _) = sym_eigen(n, m);
    let theta = arctan_sum(n, &evals);
    if !(theta.abs() < std::f64::consts::PI) {
        return Err(Error::BranchAmbiguity { theta });
    }
    let mut a = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = Complex64::new(if i == j { 1.0 } else { 0.0 }, m[i][j]);
        }
    }
    let det = match n {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        3 => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
        _ => return Err(Error::BadDimension(n)),
    };
    Ok(det.arg())
}

/// Volume of the gradient graph: `∫ √det(I + (D²u)ᵀ D²u)`.
pub fn volume(u: &ScalarField) -> Result<f64> {
    let h = hessian(u)?;
    let metric = induced_metric(&h);
    let sd = ScalarField::new(u.grid().clone(), metric.sqrt_det.clone())?;
    Ok(integrate(&sd))
}

/// Mean curvature magnitude `|∇θ|_g = √(gⁱʲ θᵢ θⱼ)` per node. Vanishes
/// identically exactly when the discrete graph is special Lagrangian.
pub fn mean_curvature_norm(u: &ScalarField) -> Result<ScalarField> {
    let h = hessian(u)?;
    let metric = induced_metric(&h);
    let ph = phase(&h);
    let theta = ph.theta_field();
    let dtheta = gradient(&theta)?;
    let grid = u.grid();
    let n = grid.dim();
    let out = exec::map_collect(grid.len(), |p| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += metric.g_inv_entry(p, i, j) * dtheta.get(p, i) * dtheta.get(p, j);
            }
        }
        s.max(0.0).sqrt()
    });
    ScalarField::new(grid.clone(), out)
}

/// Spread of the tangent planes of the graph in the Grassmannian, measured as
/// the largest principal angle between sampled pairs, plus the sup operator
/// norm of the Hessian.
#[derive(Debug, Clone, Serialize)]
pub struct SpreadReport {
    /// Max over sampled pairs of the largest principal angle (radians).
    pub spread: f64,
    /// Sup over nodes of the Hessian operator norm (max |eigenvalue|).
    pub hessian_sup_norm: f64,
    pub pairs: usize,
    pub plan: PairPlan,
}

/// Tangent plane spread of `Γ_u`. The plane at x is spanned by the columns of
/// `[I; D²u(x)]`, orthonormalized by `g^{-1/2}`; the distance between two
/// planes is `arccos` of the smallest singular value of `Q0ᵀ Q1`.
pub fn grassmannian_spread(u: &ScalarField, plan: &PairPlan) -> Result<SpreadReport> {
    let grid = u.grid();
    let n = grid.dim();
    let h = hessian(u)?;
    // per node: orthonormal basis Q = [I; M] (I + M²)^{-1/2}, stored 2n x n
    struct Basis {
        q: [[f64; 3]; 6],
        op_norm: f64,
    }
    let bases = exec::map_collect(grid.len(), |p| {
        let m = h.mat(p);
        let (evals, evecs) = sym_eigen(n, &m);
        let ginv_half = sym_from_eigen(n, &evals, &evecs, |l| 1.0 / (1.0 + l * l).sqrt());
        let mut q = [[0.0; 3]; 6];
        for j in 0..n {
            for i in 0..n {
                q[i][j] = ginv_half[i][j];
            }
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += m[i][k] * ginv_half[k][j];
                }
                q[n + i][j] = s;
            }
        }
        let op_norm = evals[..n].iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        Basis { q, op_norm }
    });
    let sup_norm = bases.iter().fold(0.0f64, |a, b| a.max(b.op_norm));
    let pairs = plan.pairs(grid);
    if pairs.is_empty() {
        return Err(Error::EmptyPlan);
    }
    // negated angle so the shared min-reduction yields the max
    let eval = |i: usize| -> f64 {
        let (p, q) = pairs[i];
        let (b0, b1) = (&bases[p], &bases[q]);
        let mut a = [[0.0; 3]; 3];
        for r in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for k in 0..2 * n {
                    s += b0.q[k][r] * b1.q[k][c];
                }
                a[r][c] = s;
            }
        }
        let mut ata = [[0.0; 3]; 3];
        for r in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += a[k][r] * a[k][c];
                }
                ata[r][c] = s;
            }
        }
        let (evals, _) = sym_eigen(n, &ata);
        let sigma_min = evals[0].max(0.0).sqrt().min(1.0);
        -sigma_min.acos()
    };
    let (neg_spread, _) = exec::min_indexed(pairs.len(), eval).expect("nonempty");
    Ok(SpreadReport {
        spread: -neg_spread,
        hessian_sup_norm: sup_norm,
        pairs: pairs.len(),
        plan: plan.clone(),
    })
}

/// Dense product helper kept for tests of metric identities.
#[allow(dead_code)]
pub(crate) fn metric_product(n: usize, a: &Mat, b: &Mat) -> Mat {
    mat_mul(n, a, b)
}
