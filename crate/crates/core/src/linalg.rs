//! Dense linear algebra for symmetric matrices of dimension 1..=3.
//!
//! Everything works on `[[f64; 3]; 3]` buffers with an explicit runtime
//! dimension `n`; unused rows and columns are ignored. The eigen solver is a
//! cyclic Jacobi sweep, which is deterministic and plenty for fixed n <= 3.

/// Maximum spatial dimension supported by the crate.
pub const MAX_DIM: usize = 3;

pub type Mat = [[f64; 3]; 3];

pub fn zero() -> Mat {
    [[0.0; 3]; 3]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zero();
    for i in 0..n {
        m[i][i] = 1.0;
    }
    m
}

pub fn mat_mul(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut c = zero();
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub fn mat_add(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut c = zero();
    for i in 0..n {
        for j in 0..n {
            c[i][j] = a[i][j] + b[i][j];
        }
    }
    c
}

pub fn mat_scale(n: usize, a: &Mat, s: f64) -> Mat {
    let mut c = zero();
    for i in 0..n {
        for j in 0..n {
            c[i][j] = a[i][j] * s;
        }
    }
    c
}

pub fn mat_trace(n: usize, a: &Mat) -> f64 {
    (0..n).map(|i| a[i][i]).sum()
}

pub fn mat_transpose(n: usize, a: &Mat) -> Mat {
    let mut c = zero();
    for i in 0..n {
        for j in 0..n {
            c[i][j] = a[j][i];
        }
    }
    c
}

pub fn mat_det(n: usize, a: &Mat) -> f64 {
    match n {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        3 => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Frobenius (Hilbert-Schmidt) norm squared over the full n x n block.
pub fn hs_norm_sq(n: usize, a: &Mat) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * a[i][j];
        }
    }
    s
}

/// Entrywise sup norm over the n x n block.
pub fn sup_norm(n: usize, a: &Mat) -> f64 {
    let mut s: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            s = s.max(a[i][j].abs());
        }
    }
    s
}

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted ascending and the matching orthonormal
/// eigenvectors as the columns of the returned matrix. Ascending order with
/// index-based ties keeps the per-node output deterministic.
pub fn sym_eigen(n: usize, m: &Mat) -> ([f64; 3], Mat) {
    let mut a = *m;
    let mut v = identity(n);
    if n > 1 {
        let scale = sup_norm(n, &a).max(1.0);
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off: f64 = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(a[p][q].abs());
                }
            }
            if off <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    // Classic stable rotation choice (Numerical Recipes 11.1).
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    a[p][q] = 0.0;
                    a[q][p] = 0.0;
                    for k in 0..n {
                        let vkp = v[k][p];
                        let vkq = v[k][q];
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order[..n].sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap());
    let mut evals = [0.0; 3];
    let mut evecs = zero();
    for (slot, &idx) in order[..n].iter().enumerate() {
        evals[slot] = a[idx][idx];
        for k in 0..n {
            evecs[k][slot] = v[k][idx];
        }
    }
    (evals, evecs)
}

/// Rebuild `Q diag(f(lambda_i)) Q^T` from an eigen-decomposition.
pub fn sym_from_eigen(n: usize, evals: &[f64; 3], evecs: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let mut m = zero();
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += evecs[i][k] * f(evals[k]) * evecs[j][k];
            }
            m[i][j] = s;
        }
    }
    m
}

/// Solve `A x = b` for a small (possibly unsymmetric) system by Gaussian
/// elimination with partial pivoting. Returns None when the pivot underflows.
pub fn solve(n: usize, a: &Mat, b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..n).rev() {
        let mut s = rhs[col];
        for c in col + 1..n {
            s -= m[col][c] * x[c];
        }
        x[col] = s / m[col][col];
    }
    Some(x)
}

/// Sum of `arctan` over eigenvalues, accumulated in order of increasing
/// magnitude. The fixed magnitude order makes the sum exactly odd: negating
/// every eigenvalue negates each addend and replays the same rounding
/// sequence.
pub fn arctan_sum(n: usize, evals: &[f64; 3]) -> f64 {
    let mut idx = [0usize, 1, 2];
    idx[..n].sort_by(|&i, &j| {
        evals[i]
            .abs()
            .partial_cmp(&evals[j].abs())
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut s = 0.0;
    for &i in &idx[..n] {
        s += evals[i].atan();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: usize, entries: &[(usize, usize, f64)]) -> Mat {
        let mut m = zero();
        for &(i, j, v) in entries {
            m[i][j] = v;
            m[j][i] = v;
        }
        let _ = n;
        m
    }

    #[test]
    fn eigen_diagonal_sorted() {
        let m = sym(3, &[(0, 0, 3.0), (1, 1, -1.0), (2, 2, 2.0)]);
        let (evals, _) = sym_eigen(3, &m);
        assert_eq!(&evals[..3], &[-1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigen_reconstructs() {
        let m = sym(3, &[(0, 0, 2.0), (0, 1, 1.0), (0, 2, -0.5), (1, 1, 3.0), (1, 2, 0.25), (2, 2, -1.0)]);
        let (evals, evecs) = sym_eigen(3, &m);
        let r = sym_from_eigen(3, &evals, &evecs, |x| x);
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - m[i][j]).abs() < 1e-12, "{i}{j}");
            }
        }
    }

    #[test]
    fn eigen_2x2_exact() {
        let m = sym(2, &[(0, 0, 0.0), (0, 1, 1.0), (1, 1, 0.0)]);
        let (evals, _) = sym_eigen(2, &m);
        assert!((evals[0] + 1.0).abs() < 1e-15);
        assert!((evals[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solve_small_system() {
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let x = solve(3, &a, &b).unwrap();
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                s += a[i][j] * x[j];
            }
            assert!((s - b[i]).abs() < 1e-12);
        }
        // singular
        let s = [[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(solve(3, &s, &b).is_none());
    }

    #[test]
    fn arctan_sum_is_odd() {
        let e = [0.3, -1.7, 0.9];
        let ne = [-0.3, 1.7, -0.9];
        assert_eq!(arctan_sum(3, &e), -arctan_sum(3, &ne));
    }
}
