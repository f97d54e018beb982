//! Structured grids and the fields that live on them.
//!
//! A [`Grid`] is an axis-aligned lattice over a box in ℝⁿ (n = 1..3) with
//! uniform spacing per axis; values are stored row-major with the last axis
//! fastest. Scalar, vector and symmetric-matrix fields share the same grid
//! type. The calculus submodule provides the finite-difference operators,
//! quadrature and mollification; convexity holds the pairwise sampling plan
//! and margin certificates; io reads and writes the `.fld`/`.fldb` formats.

pub(crate) mod calculus;
mod convexity;
mod io;

pub use calculus::{difference_quotient, gradient, hessian, integrate, mollify};
pub use convexity::{k_convexity_margin, MarginReport, PairPlan};
pub use io::{read_scalar_field, write_scalar_field};

use crate::error::{Error, Result};
use crate::linalg::{Mat, MAX_DIM};

/// Length of the packed upper triangle of a symmetric n x n matrix.
pub const fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of entry (i, j), i <= j, in the packed upper triangle.
pub const fn tri_idx(n: usize, i: usize, j: usize) -> usize {
    i * (2 * n - i + 1) / 2 + (j - i)
}

/// Axis-aligned rectangular lattice over a box domain.
///
/// Node with multi-index `m` sits at `origin + m ∘ spacing`. The structural
/// minimum is two nodes per axis so that restricted grids produced by
/// difference quotients and mollification stay representable; operators that
/// need wider stencils enforce their own minima.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    origin: Vec<f64>,
    spacing: Vec<f64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let n = shape.len();
        if n == 0 || n > MAX_DIM || origin.len() != n || spacing.len() != n {
            return Err(Error::BadDimension(n));
        }
        for &h in &spacing {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::BadSpacing(h));
            }
        }
        for (axis, &s) in shape.iter().enumerate() {
            if s < 2 {
                return Err(Error::GridTooSmall {
                    axis,
                    nodes: s,
                    need: 2,
                });
            }
        }
        for &o in &origin {
            if !o.is_finite() {
                return Err(Error::BadSpacing(o));
            }
        }
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        Ok(Grid {
            origin,
            spacing,
            shape,
            strides,
        })
    }

    /// Uniform grid with `nodes` per axis over the box `[lo, hi]^n`.
    pub fn uniform_box(n: usize, nodes: usize, lo: f64, hi: f64) -> Result<Self> {
        let h = (hi - lo) / (nodes as f64 - 1.0);
        Grid::new(vec![lo; n], vec![h; n], vec![nodes; n])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Position along `axis` of the node with flat index `flat`.
    #[inline]
    pub fn axis_pos(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.shape[axis]
    }

    #[inline]
    pub fn flat(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .map(|(m, s)| m * s)
            .sum()
    }

    pub fn multi(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut m = [0usize; MAX_DIM];
        for k in 0..self.dim() {
            m[k] = self.axis_pos(flat, k);
        }
        m
    }

    /// Coordinates of a node, written into the first `dim` slots of `out`.
    #[inline]
    pub fn node_coord(&self, flat: usize, out: &mut [f64; MAX_DIM]) {
        for k in 0..self.dim() {
            out[k] = self.origin[k] + self.axis_pos(flat, k) as f64 * self.spacing[k];
        }
    }

    pub fn node_vec(&self, flat: usize) -> Vec<f64> {
        let mut buf = [0.0; MAX_DIM];
        self.node_coord(flat, &mut buf);
        buf[..self.dim()].to_vec()
    }

    /// Upper corner of the box, `origin + (shape - 1) ∘ spacing`.
    pub fn box_hi(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.origin[k] + (self.shape[k] - 1) as f64 * self.spacing[k])
            .collect()
    }

    /// Lebesgue measure of the box domain.
    pub fn measure(&self) -> f64 {
        (0..self.dim())
            .map(|k| (self.shape[k] - 1) as f64 * self.spacing[k])
            .product()
    }

    /// Euclidean diameter of the box domain.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|k| {
                let d = (self.shape[k] - 1) as f64 * self.spacing[k];
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Flat index of the node nearest the box center (ties toward the lower
    /// index, so the choice is deterministic).
    pub fn center_node(&self) -> usize {
        let multi: Vec<usize> = self.shape.iter().map(|s| (s - 1) / 2).collect();
        self.flat(&multi)
    }

    pub fn min_shape(&self) -> usize {
        *self.shape.iter().min().unwrap()
    }

    /// Trapezoidal quadrature weight of a node: `∏ spacing` with a 1/2 factor
    /// per axis where the node sits on the boundary.
    #[inline]
    pub fn quad_weight(&self, flat: usize) -> f64 {
        let mut w = 1.0;
        for k in 0..self.dim() {
            let pos = self.axis_pos(flat, k);
            let edge = pos == 0 || pos == self.shape[k] - 1;
            w *= if edge {
                0.5 * self.spacing[k]
            } else {
                self.spacing[k]
            };
        }
        w
    }

}

/// Per-axis weights of the 3-point Lagrange interpolation used for off-lattice
/// evaluation. Exact on polynomials of per-axis degree <= 2, which keeps the
/// rotation pipeline exact on quadratic potentials.
fn lagrange_axis(grid: &Grid, axis: usize, x: f64) -> (usize, [f64; 3], usize) {
    let l = grid.shape[axis];
    let s = ((x - grid.origin[axis]) / grid.spacing[axis]).clamp(0.0, (l - 1) as f64);
    if l == 2 {
        let d = s; // linear fallback on a two-node axis
        return (0, [1.0 - d, d, 0.0], 2);
    }
    let c = (s.round() as usize).clamp(1, l - 2);
    let d = s - c as f64;
    (
        c - 1,
        [0.5 * d * (d - 1.0), 1.0 - d * d, 0.5 * d * (d + 1.0)],
        3,
    )
}

fn interp(grid: &Grid, x: &[f64; MAX_DIM], sample: impl Fn(usize) -> f64) -> f64 {
    let n = grid.dim();
    let mut base = [0usize; MAX_DIM];
    let mut w = [[0.0; 3]; MAX_DIM];
    let mut cnt = [0usize; MAX_DIM];
    for k in 0..n {
        let (b, wk, c) = lagrange_axis(grid, k, x[k]);
        base[k] = b;
        w[k] = wk;
        cnt[k] = c;
    }
    let mut acc = 0.0;
    match n {
        1 => {
            for a in 0..cnt[0] {
                acc += w[0][a] * sample(base[0] + a);
            }
        }
        2 => {
            for a in 0..cnt[0] {
                let row = (base[0] + a) * grid.strides[0];
                for b in 0..cnt[1] {
                    acc += w[0][a] * w[1][b] * sample(row + base[1] + b);
                }
            }
        }
        3 => {
            for a in 0..cnt[0] {
                let pa = (base[0] + a) * grid.strides[0];
                for b in 0..cnt[1] {
                    let pb = pa + (base[1] + b) * grid.strides[1];
                    for c in 0..cnt[2] {
                        acc += w[0][a] * w[1][b] * w[2][c] * sample(pb + base[2] + c);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    acc
}

/// Scalar samples on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                got: values.len(),
                want: grid.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        ScalarField {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Sample `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut x = [0.0; MAX_DIM];
        for p in 0..grid.len() {
            grid.node_coord(p, &mut x);
            values.push(f(&x[..grid.dim()]));
        }
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// 3-point Lagrange evaluation at an arbitrary point (clamped to the box).
    pub fn eval(&self, x: &[f64; MAX_DIM]) -> f64 {
        interp(&self.grid, x, |p| self.values[p])
    }

    /// Subtract the value at the node nearest the domain center, fixing the
    /// additive gauge of a potential.
    pub fn gauge_at_center(&mut self) {
        let c = self.values[self.grid.center_node()];
        for v in &mut self.values {
            *v -= c;
        }
    }
}

/// One n-vector per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * grid.dim() {
            return Err(Error::LengthMismatch {
                got: values.len(),
                want: grid.len() * grid.dim(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i / grid.dim()));
        }
        Ok(VectorField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, node: usize, comp: usize) -> f64 {
        self.values[node * self.grid.dim() + comp]
    }

    pub fn node(&self, node: usize, out: &mut [f64; MAX_DIM]) {
        let n = self.grid.dim();
        out[..n].copy_from_slice(&self.values[node * n..node * n + n]);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Componentwise 3-point Lagrange evaluation.
    pub fn eval(&self, x: &[f64; MAX_DIM], out: &mut [f64; MAX_DIM]) {
        let n = self.grid.dim();
        for c in 0..n {
            out[c] = interp(&self.grid, x, |p| self.values[p * n + c]);
        }
    }
}

/// One symmetric n x n matrix per node, stored as the packed upper triangle
/// so symmetry is exact by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrixField {
    grid: Grid,
    values: Vec<f64>,
}

impl SymmetricMatrixField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let want = grid.len() * tri_len(grid.dim());
        if values.len() != want {
            return Err(Error::LengthMismatch {
                got: values.len(),
                want,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i / tri_len(grid.dim())));
        }
        Ok(SymmetricMatrixField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tri(&self, node: usize) -> &[f64] {
        let t = tri_len(self.grid.dim());
        &self.values[node * t..(node + 1) * t]
    }

    #[inline]
    pub fn entry(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.grid.dim();
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.values[node * tri_len(n) + tri_idx(n, i, j)]
    }

    /// Dense copy of the matrix at a node.
    pub fn mat(&self, node: usize) -> Mat {
        let n = self.grid.dim();
        let mut m = [[0.0; 3]; 3];
        for i in 0..n {
            for j in i..n {
                let v = self.entry(node, i, j);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
