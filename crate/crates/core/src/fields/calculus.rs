//! Finite-difference calculus on structured grids.
//!
//! Interior nodes use second-order central stencils. Boundary nodes use
//! one-sided stencils: second-order for first derivatives, shifted three-point
//! for second derivatives (first-order on general smooth fields, exact on
//! quadratics). All operators are pure gathers over the flat index, so they
//! parallelise without shared state.

use super::{tri_idx, tri_len, Grid, ScalarField, SymmetricMatrixField, VectorField};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::MAX_DIM;

/// First derivative along `axis`: central inside, one-sided second-order at
/// the two boundary nodes.
pub(crate) fn axis_d1(grid: &Grid, v: &[f64], axis: usize, out_idx: usize) -> f64 {
    let l = grid.shape()[axis];
    let s = grid.stride(axis);
    let h = grid.spacing()[axis];
    let pos = grid.axis_pos(out_idx, axis);
    let p = out_idx;
    if pos == 0 {
        (-3.0 * v[p] + 4.0 * v[p + s] - v[p + 2 * s]) / (2.0 * h)
    } else if pos == l - 1 {
        (3.0 * v[p] - 4.0 * v[p - s] + v[p - 2 * s]) / (2.0 * h)
    } else {
        (v[p + s] - v[p - s]) / (2.0 * h)
    }
}

/// Second derivative along `axis`: three-point central inside, shifted
/// three-point at the two boundary nodes.
pub(crate) fn axis_d2(grid: &Grid, v: &[f64], axis: usize, out_idx: usize) -> f64 {
    let l = grid.shape()[axis];
    let s = grid.stride(axis);
    let h = grid.spacing()[axis];
    let pos = grid.axis_pos(out_idx, axis);
    let p = out_idx;
    let num = if pos == 0 {
        v[p] - 2.0 * v[p + s] + v[p + 2 * s]
    } else if pos == l - 1 {
        v[p] - 2.0 * v[p - s] + v[p - 2 * s]
    } else {
        v[p - s] - 2.0 * v[p] + v[p + s]
    };
    num / (h * h)
}

/// Adjoint of [`axis_d1`] as a gather: `out[q] = sum_r D1[r, q] t[r]`.
pub(crate) fn axis_d1_adjoint(grid: &Grid, t: &[f64], axis: usize, out_idx: usize) -> f64 {
    let l = grid.shape()[axis];
    let s = grid.stride(axis);
    let h = grid.spacing()[axis];
    let q = grid.axis_pos(out_idx, axis);
    let base = out_idx - q * s;
    let mut acc = 0.0;
    // central rows r in [1, l-2] with coefficients -1 at r-1 and +1 at r+1
    if q >= 2 {
        acc += t[out_idx - s];
    }
    if q + 1 <= l - 2 {
        acc -= t[out_idx + s];
    }
    // one-sided boundary rows
    let t0 = t[base];
    let t1 = t[base + (l - 1) * s];
    match q {
        0 => acc += -3.0 * t0,
        1 => acc += 4.0 * t0,
        2 => acc += -1.0 * t0,
        _ => {}
    }
    if q + 3 >= l {
        let c = [1.0, -4.0, 3.0][q + 3 - l];
        acc += c * t1;
    }
    acc / (2.0 * h)
}

/// Adjoint of [`axis_d2`] as a gather.
pub(crate) fn axis_d2_adjoint(grid: &Grid, t: &[f64], axis: usize, out_idx: usize) -> f64 {
    let l = grid.shape()[axis];
    let s = grid.stride(axis);
    let h = grid.spacing()[axis];
    let q = grid.axis_pos(out_idx, axis);
    let base = out_idx - q * s;
    let mut acc = 0.0;
    if q >= 2 {
        acc += t[out_idx - s];
    }
    if q >= 1 && q <= l - 2 {
        acc -= 2.0 * t[out_idx];
    }
    if q + 1 <= l - 2 {
        acc += t[out_idx + s];
    }
    let t0 = t[base];
    let t1 = t[base + (l - 1) * s];
    if q <= 2 {
        acc += [1.0, -2.0, 1.0][q] * t0;
    }
    if q + 3 >= l {
        acc += [1.0, -2.0, 1.0][q + 3 - l] * t1;
    }
    acc / (h * h)
}

/// One-dimensional first-derivative stencil row at a given axis position, as
/// (offset, coefficient) pairs.
fn d1_row(len: usize, pos: usize, h: f64) -> [(i64, f64); 3] {
    let c = 1.0 / (2.0 * h);
    if pos == 0 {
        [(0, -3.0 * c), (1, 4.0 * c), (2, -c)]
    } else if pos == len - 1 {
        [(0, 3.0 * c), (-1, -4.0 * c), (-2, c)]
    } else {
        [(-1, -c), (0, 0.0), (1, c)]
    }
}

/// Sparse representation of a cross-derivative operator together with its
/// exact transpose, built from the same entries.
pub(crate) struct PairOp {
    fwd_ptr: Vec<u32>,
    fwd_col: Vec<u32>,
    fwd_val: Vec<f64>,
    adj_ptr: Vec<u32>,
    adj_row: Vec<u32>,
    adj_val: Vec<f64>,
}

impl PairOp {
    #[inline]
    pub(crate) fn apply(&self, v: &[f64], p: usize) -> f64 {
        let (a, b) = (self.fwd_ptr[p] as usize, self.fwd_ptr[p + 1] as usize);
        let mut s = 0.0;
        for e in a..b {
            s += self.fwd_val[e] * v[self.fwd_col[e] as usize];
        }
        s
    }

    #[inline]
    pub(crate) fn apply_adjoint(&self, t: &[f64], q: usize) -> f64 {
        let (a, b) = (self.adj_ptr[q] as usize, self.adj_ptr[q + 1] as usize);
        let mut s = 0.0;
        for e in a..b {
            s += self.adj_val[e] * t[self.adj_row[e] as usize];
        }
        s
    }
}

/// Cross-derivative operator for the axis pair (k, l).
///
/// Interior nodes use the compact stencil
/// `u_kl = (T - h_k² u_kk - h_l² u_ll) / (2 h_k h_l)` with T the second
/// difference along the lattice diagonal. The four-point stencil
/// (composition of central first differences) is blind to the checkerboard
/// mode, which would hand the discrete volume functional spurious descent
/// directions at grid scale; the compact stencil has no such null mode. On
/// the boundary frame the operator falls back to composing the one-sided
/// first-derivative rows, which keeps it exact on quadratics everywhere.
pub(crate) fn cross_op(grid: &Grid, k: usize, l: usize) -> PairOp {
    let n = grid.len();
    let (sk, sl) = (grid.stride(k) as i64, grid.stride(l) as i64);
    let (hk, hl) = (grid.spacing()[k], grid.spacing()[l]);
    let (lk, ll) = (grid.shape()[k], grid.shape()[l]);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut scratch: Vec<(i64, f64)> = Vec::with_capacity(9);
    for p in 0..n {
        let (pk, pl) = (grid.axis_pos(p, k), grid.axis_pos(p, l));
        scratch.clear();
        if pk > 0 && pk + 1 < lk && pl > 0 && pl + 1 < ll {
            let c = 1.0 / (2.0 * hk * hl);
            scratch.extend_from_slice(&[
                (sk + sl, c),
                (-sk - sl, c),
                (0, 2.0 * c),
                (sk, -c),
                (-sk, -c),
                (sl, -c),
                (-sl, -c),
            ]);
        } else {
            for (ak, ck) in d1_row(lk, pk, hk) {
                if ck == 0.0 {
                    continue;
                }
                for (al, cl) in d1_row(ll, pl, hl) {
                    if cl == 0.0 {
                        continue;
                    }
                    scratch.push((ak * sk + al * sl, ck * cl));
                }
            }
        }
        let mut row = Vec::with_capacity(scratch.len());
        for &(off, c) in &scratch {
            row.push(((p as i64 + off) as usize, c));
        }
        rows.push(row);
    }
    let nnz: usize = rows.iter().map(|r| r.len()).sum();
    let mut fwd_ptr = Vec::with_capacity(n + 1);
    let mut fwd_col = Vec::with_capacity(nnz);
    let mut fwd_val = Vec::with_capacity(nnz);
    let mut adj_count = vec![0u32; n];
    fwd_ptr.push(0u32);
    for row in &rows {
        for &(col, c) in row {
            fwd_col.push(col as u32);
            fwd_val.push(c);
            adj_count[col] += 1;
        }
        fwd_ptr.push(fwd_col.len() as u32);
    }
    let mut adj_ptr = vec![0u32; n + 1];
    for q in 0..n {
        adj_ptr[q + 1] = adj_ptr[q] + adj_count[q];
    }
    let mut cursor: Vec<u32> = adj_ptr[..n].to_vec();
    let mut adj_row = vec![0u32; nnz];
    let mut adj_val = vec![0.0f64; nnz];
    for (r, row) in rows.iter().enumerate() {
        for &(col, c) in row {
            let slot = cursor[col] as usize;
            adj_row[slot] = r as u32;
            adj_val[slot] = c;
            cursor[col] += 1;
        }
    }
    PairOp {
        fwd_ptr,
        fwd_col,
        fwd_val,
        adj_ptr,
        adj_row,
        adj_val,
    }
}

/// Discrete gradient `Du`. Exact on affine and quadratic fields.
pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    let grid = f.grid();
    grid_min(grid, 3)?;
    let n = grid.dim();
    let v = f.values();
    let out = exec::map_collect(grid.len() * n, |i| {
        let (node, comp) = (i / n, i % n);
        axis_d1(grid, v, comp, node)
    });
    VectorField::new(grid.clone(), out)
}

/// Discrete Hessian `D²u`. Pure second derivatives use the three-point
/// stencil; cross derivatives use the compact diagonal stencil of
/// [`cross_op`]. Each entry is computed once and stored in the packed upper
/// triangle, so the output is symmetric by construction and exact on
/// quadratics.
pub fn hessian(f: &ScalarField) -> Result<SymmetricMatrixField> {
    let grid = f.grid();
    grid_min(grid, 5)?;
    let n = grid.dim();
    let t = tri_len(n);
    let v = f.values();
    let mut cross: Vec<Option<PairOp>> = Vec::new();
    for a in 0..n {
        for b in a..n {
            cross.push(if a == b {
                None
            } else {
                Some(cross_op(grid, a, b))
            });
        }
    }
    let out = exec::map_collect(grid.len() * t, |i| {
        let (node, e) = (i / t, i % t);
        let (a, b) = tri_unpack(n, e);
        if a == b {
            axis_d2(grid, v, a, node)
        } else {
            cross[e].as_ref().unwrap().apply(v, node)
        }
    });
    SymmetricMatrixField::new(grid.clone(), out)
}

fn tri_unpack(n: usize, e: usize) -> (usize, usize) {
    for i in 0..n {
        for j in i..n {
            if tri_idx(n, i, j) == e {
                return (i, j);
            }
        }
    }
    unreachable!()
}

/// Forward difference quotient `(f(x + h e_m) - f(x)) / h` on the sub-grid
/// where `x + h e_m` stays inside the domain. `h` must be a nonzero integer
/// multiple of the spacing along `m`; negative `h` shifts the origin.
pub fn difference_quotient(f: &ScalarField, m: usize, h: f64) -> Result<ScalarField> {
    let grid = f.grid();
    let n = grid.dim();
    if m >= n {
        return Err(Error::BadDimension(m));
    }
    let hm = grid.spacing()[m];
    let ratio = h / hm;
    let k = ratio.round() as i64;
    if h == 0.0 || !ratio.is_finite() || (ratio - k as f64).abs() > 1e-9 * ratio.abs().max(1.0) || k == 0
    {
        return Err(Error::BadQuotientStep(h));
    }
    let steps = k.unsigned_abs() as usize;
    if steps >= grid.shape()[m] {
        return Err(Error::GridTooSmall {
            axis: m,
            nodes: grid.shape()[m],
            need: steps + 1,
        });
    }
    let mut shape = grid.shape().to_vec();
    shape[m] -= steps;
    let mut origin = grid.origin().to_vec();
    if k < 0 {
        origin[m] += steps as f64 * hm;
    }
    let sub = Grid::new(origin, grid.spacing().to_vec(), shape)?;
    let v = f.values();
    let s = grid.stride(m);
    let out = exec::map_collect(sub.len(), |q| {
        // map sub-grid multi-index to the parent flat index
        let mut parent = 0usize;
        for axis in 0..n {
            let mut pos = sub.axis_pos(q, axis);
            if axis == m && k < 0 {
                pos += steps;
            }
            parent += pos * grid.stride(axis);
        }
        let (a, b) = if k > 0 {
            (parent + steps * s, parent)
        } else {
            (parent - steps * s, parent)
        };
        (v[a] - v[b]) / h
    });
    ScalarField::new(sub, out)
}

/// Discrete mollification with a quartic bump `(1 - r²/ε²)²` sampled on the
/// lattice and renormalized to unit mass. The output lives on the interior
/// grid of nodes at distance > ε from the boundary.
pub fn mollify(f: &ScalarField, eps: f64) -> Result<ScalarField> {
    let grid = f.grid();
    let n = grid.dim();
    let h_min = grid
        .spacing()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(eps.is_finite() && eps >= h_min) {
        return Err(Error::EpsBelowResolution { eps, h: h_min });
    }
    // margin per axis: smallest node count m with m * h > eps
    let mut margin = vec![0usize; n];
    let mut shape = Vec::with_capacity(n);
    let mut origin = Vec::with_capacity(n);
    for k in 0..n {
        let h = grid.spacing()[k];
        let mut m = (eps / h).floor() as usize;
        if (m as f64) * h <= eps {
            m += 1;
        }
        margin[k] = m;
        if grid.shape()[k] <= 2 * m + 1 {
            return Err(Error::EpsTooLarge(eps));
        }
        shape.push(grid.shape()[k] - 2 * m);
        origin.push(grid.origin()[k] + m as f64 * h);
    }
    // Shape >= 2 holds after the check above, so this cannot fail.
    let sub = Grid::new(origin, grid.spacing().to_vec(), shape)?;

    // lattice offsets with |z| < eps and their bump weights
    let mut offsets: Vec<(i64, i64, i64, f64)> = Vec::new();
    let im = |k: usize| margin[k] as i64;
    let (m0, m1, m2) = (
        im(0),
        if n > 1 { im(1) } else { 0 },
        if n > 2 { im(2) } else { 0 },
    );
    let mut total = 0.0;
    for a in -m0..=m0 {
        for b in -m1..=m1 {
            for c in -m2..=m2 {
                let mut r2 = (a as f64 * grid.spacing()[0]).powi(2);
                if n > 1 {
                    r2 += (b as f64 * grid.spacing()[1]).powi(2);
                }
                if n > 2 {
                    r2 += (c as f64 * grid.spacing()[2]).powi(2);
                }
                if r2 < eps * eps {
                    let t = 1.0 - r2 / (eps * eps);
                    let w = t * t;
                    offsets.push((a, b, c, w));
                    total += w;
                }
            }
        }
    }
    for o in &mut offsets {
        o.3 /= total;
    }

    let v = f.values();
    let out = exec::map_collect(sub.len(), |q| {
        let mut parent = 0usize;
        for axis in 0..n {
            parent += (sub.axis_pos(q, axis) + margin[axis]) * grid.stride(axis);
        }
        let mut acc = 0.0;
        for &(a, b, c, w) in &offsets {
            let mut idx = parent as i64 + a * grid.stride(0) as i64;
            if n > 1 {
                idx += b * grid.stride(1) as i64;
            }
            if n > 2 {
                idx += c * grid.stride(2) as i64;
            }
            acc += w * v[idx as usize];
        }
        acc
    });
    ScalarField::new(sub, out)
}

/// Tensor-product trapezoidal quadrature over the grid box.
pub fn integrate(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let v = f.values();
    exec::sum_indexed(grid.len(), |p| grid.quad_weight(p) * v[p])
}

fn grid_min(grid: &Grid, need: usize) -> Result<()> {
    for (axis, &s) in grid.shape().iter().enumerate() {
        if s < need {
            return Err(Error::GridTooSmall {
                axis,
                nodes: s,
                need,
            });
        }
    }
    Ok(())
}

/// Weighted L² norm of a value array over selected nodes.
pub(crate) fn weighted_l2(grid: &Grid, v: &[f64], include: impl Fn(usize) -> bool + Sync) -> f64 {
    exec::sum_indexed(grid.len(), |p| {
        if include(p) {
            grid.quad_weight(p) * v[p] * v[p]
        } else {
            0.0
        }
    })
    .sqrt()
}

#[allow(dead_code)]
pub(crate) fn interior_probe(_: &mut [f64; MAX_DIM]) {}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(nodes: usize, lo: f64, hi: f64) -> Grid {
        Grid::uniform_box(1, nodes, lo, hi).unwrap()
    }

    #[test]
    fn gradient_exact_on_constants_and_linears() {
        let g = Grid::uniform_box(2, 7, 0.0, 1.0).unwrap();
        let c = ScalarField::from_fn(g.clone(), |_| 4.2);
        let dc = gradient(&c).unwrap();
        // exact at interior nodes; boundary one-sided stencils cancel to
        // rounding only
        for p in 0..c.grid().len() {
            for comp in 0..2 {
                let v = dc.get(p, comp);
                let interior = (0..2).all(|k| {
                    let pos = c.grid().axis_pos(p, k);
                    pos > 0 && pos < c.grid().shape()[k] - 1
                });
                if interior {
                    assert_eq!(v, 0.0);
                } else {
                    assert!(v.abs() < 1e-13);
                }
            }
        }

        let lin = ScalarField::from_fn(g, |x| 2.0 * x[0] - 0.5 * x[1] + 1.0);
        let dl = gradient(&lin).unwrap();
        for p in 0..lin.grid().len() {
            assert!((dl.get(p, 0) - 2.0).abs() < 1e-13);
            assert!((dl.get(p, 1) + 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_second_order_convergence() {
        // interior error on sin(x) shrinks ~4x when h halves
        let err = |nodes: usize| {
            let g = grid1(nodes, 0.0, std::f64::consts::PI);
            let f = ScalarField::from_fn(g.clone(), |x| x[0].sin());
            let d = gradient(&f).unwrap();
            let mut e: f64 = 0.0;
            for p in 1..g.len() - 1 {
                let x = g.node_vec(p)[0];
                e = e.max((d.get(p, 0) - x.cos()).abs());
            }
            e
        };
        let r = err(41) / err(81);
        assert!(r > 3.5 && r < 4.5, "ratio {r}");
    }

    #[test]
    fn gradient_needs_three_nodes() {
        let g = grid1(2, 0.0, 1.0);
        let f = ScalarField::zeros(g);
        assert!(matches!(
            gradient(&f),
            Err(Error::GridTooSmall { need: 3, .. })
        ));
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        let g = Grid::uniform_box(2, 9, -1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let h = hessian(&f).unwrap();
        for p in 0..g.len() {
            assert!((h.entry(p, 0, 0) - 1.0).abs() < 1e-12);
            assert!((h.entry(p, 1, 1) - 1.0).abs() < 1e-12);
            assert!(h.entry(p, 0, 1).abs() < 1e-12);
        }
        let lin = ScalarField::from_fn(g, |x| 3.0 * x[0] - x[1]);
        let hl = hessian(&lin).unwrap();
        assert!(hl.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn hessian_cross_terms_exact_on_xy() {
        let g = Grid::uniform_box(2, 7, 0.0, 1.0).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| x[0] * x[1]);
        let h = hessian(&f).unwrap();
        for p in 0..g.len() {
            assert!((h.entry(p, 0, 1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_cubic_interior_exact_boundary_first_order() {
        let run = |nodes: usize| {
            let g = grid1(nodes, 0.0, 1.0);
            let f = ScalarField::from_fn(g.clone(), |x| x[0].powi(3) / 6.0);
            let h = hessian(&f).unwrap();
            for p in 1..g.len() - 1 {
                let x = g.node_vec(p)[0];
                assert!((h.entry(p, 0, 0) - x).abs() < 1e-11);
            }
            // boundary error is O(h): exactly one spacing step for the cubic
            (h.entry(0, 0, 0) - 0.0).abs()
        };
        let e1 = run(11);
        let e2 = run(21);
        assert!((e1 / e2 - 2.0).abs() < 0.2, "boundary ratio {}", e1 / e2);
    }

    #[test]
    fn difference_quotient_examples() {
        let g = grid1(11, 0.0, 1.0);
        let lin = ScalarField::from_fn(g.clone(), |x| 3.0 * x[0] + 1.0);
        let d = difference_quotient(&lin, 0, 0.2).unwrap();
        assert_eq!(d.grid().shape(), &[9]);
        assert!(d.values().iter().all(|v| (v - 3.0).abs() < 1e-12));

        // f = x^2: quotient is exactly 2x + h
        let sq = ScalarField::from_fn(g.clone(), |x| x[0] * x[0]);
        let h = 0.1;
        let d = difference_quotient(&sq, 0, h).unwrap();
        for q in 0..d.grid().len() {
            let x = d.grid().node_vec(q)[0];
            assert!((d.values()[q] - (2.0 * x + h)).abs() < 1e-12);
        }

        // negative step shifts the origin
        let d = difference_quotient(&sq, 0, -0.1).unwrap();
        assert!((d.grid().origin()[0] - 0.1).abs() < 1e-12);
        for q in 0..d.grid().len() {
            let x = d.grid().node_vec(q)[0];
            assert!((d.values()[q] - (2.0 * x - h)).abs() < 1e-12);
        }

        assert!(difference_quotient(&sq, 0, 0.0).is_err());
        assert!(difference_quotient(&sq, 0, 0.15).is_err());
    }

    #[test]
    fn difference_quotient_converges_to_gradient() {
        // first-order in h on a smooth field
        let g = grid1(257, 0.0, 1.0);
        let f = ScalarField::from_fn(g.clone(), |x| (2.0 * x[0]).sin());
        let grad = gradient(&f).unwrap();
        let err = |h: f64| {
            let d = difference_quotient(&f, 0, h).unwrap();
            let mut e: f64 = 0.0;
            for q in 0..d.grid().len() {
                e = e.max((d.values()[q] - grad.get(q, 0)).abs());
            }
            e
        };
        let h = 1.0 / 256.0;
        let r = err(16.0 * h) / err(8.0 * h);
        assert!(r > 1.7 && r < 2.3, "ratio {r}");
    }

    #[test]
    fn mollify_preserves_constants_and_linears() {
        let g = Grid::uniform_box(2, 17, 0.0, 1.0).unwrap();
        let c = ScalarField::from_fn(g.clone(), |_| 2.5);
        let mc = mollify(&c, 0.2).unwrap();
        assert!(mc.values().iter().all(|v| (v - 2.5).abs() < 1e-12));

        let lin = ScalarField::from_fn(g.clone(), |x| 1.0 - 3.0 * x[0] + 0.5 * x[1]);
        let ml = mollify(&lin, 0.2).unwrap();
        for q in 0..ml.grid().len() {
            let x = ml.grid().node_vec(q);
            let want = 1.0 - 3.0 * x[0] + 0.5 * x[1];
            assert!((ml.values()[q] - want).abs() < 1e-12);
        }
        // interior grid sits strictly inside
        assert!(ml.grid().origin()[0] > 0.2 - 1e-12);
    }

    #[test]
    fn mollify_rejects_bad_radius() {
        let g = Grid::uniform_box(1, 9, 0.0, 1.0).unwrap();
        let f = ScalarField::zeros(g);
        assert!(matches!(
            mollify(&f, 0.01),
            Err(Error::EpsBelowResolution { .. })
        ));
        assert!(matches!(mollify(&f, 0.49), Err(Error::EpsTooLarge(_))));
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::uniform_box(2, 33, 0.0, 1.0).unwrap();
        let one = ScalarField::from_fn(g, |_| 1.0);
        assert!((integrate(&one) - 1.0).abs() < 1e-13);

        let g1 = grid1(17, 0.0, 1.0);
        let x = ScalarField::from_fn(g1, |x| x[0]);
        assert!((integrate(&x) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn integrate_second_order_on_smooth() {
        let run = |nodes: usize| {
            let g = grid1(nodes, 0.0, 1.0);
            let f = ScalarField::from_fn(g, |x| (std::f64::consts::PI * x[0]).sin());
            (integrate(&f) - 2.0 / std::f64::consts::PI).abs()
        };
        let r = run(33) / run(65);
        assert!(r > 3.5 && r < 4.5, "ratio {r}");
    }

    #[test]
    fn adjoints_match_inner_products() {
        let g = Grid::new(vec![0.0, 0.0], vec![0.1, 0.2], vec![7, 5]).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let t: Vec<f64> = (0..g.len()).map(|i| ((i * 53 % 13) as f64).cos()).collect();
        for axis in 0..2 {
            for (op, adj) in [
                (axis_d1 as fn(&Grid, &[f64], usize, usize) -> f64, axis_d1_adjoint as fn(&Grid, &[f64], usize, usize) -> f64),
                (axis_d2, axis_d2_adjoint),
            ] {
                let lhs: f64 = (0..g.len()).map(|p| op(&g, &f, axis, p) * t[p]).sum();
                let rhs: f64 = (0..g.len()).map(|q| f[q] * adj(&g, &t, axis, q)).sum();
                assert!(
                    (lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0),
                    "axis {axis}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn adjoints_on_minimal_grid() {
        // length-5 lines make the boundary corrections overlap
        let g = Grid::uniform_box(1, 5, 0.0, 1.0).unwrap();
        let f: Vec<f64> = (0..5).map(|i| (i as f64 + 0.3).powi(2)).collect();
        let t: Vec<f64> = (0..5).map(|i| (i as f64).cos()).collect();
        let lhs: f64 = (0..5).map(|p| axis_d2(&g, &f, 0, p) * t[p]).sum();
        let rhs: f64 = (0..5).map(|q| f[q] * axis_d2_adjoint(&g, &t, 0, q)).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
