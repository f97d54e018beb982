//! Coefficient tensor algebra and seeded coercivity certification.
//!
//! The double-divergence form of the stationarity equation has coefficient
//! tensor `a^{ijkl}(M) = √det g · gⁱʲ δᵏˡ` with `g = I + M²`. This module
//! builds the tensor, its exact derivative in the Hessian entries, the
//! ellipticity lower bound `minᵢ √det g / (1 + λᵢ²)`, and a seeded sampler
//! for the perturbed quadratic form
//!
//! ```text
//! (∂a/∂u_pq)(M*) M'_ik W_pq W_jl + a(M) W_ik W_jl  >=  β ‖W‖²_HS
//! ```
//!
//! over Hessians of sup norm at most c. Bisection on c locates the largest
//! radius whose sampled margin stays above a tolerance.

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{identity, mat_mul, sym_eigen, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

#[inline]
fn a_idx(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

#[inline]
fn d_idx(n: usize, i: usize, j: usize, k: usize, l: usize, r: usize, s: usize) -> usize {
    ((((i * n + j) * n + k) * n + l) * n + r) * n + s
}

fn metric_parts(n: usize, m: &Mat) -> (Mat, f64) {
    // inverse by adjugate so that M = 0 gives the identity bit-exactly
    let g = {
        let mm = mat_mul(n, m, m);
        let mut g = identity(n);
        for i in 0..n {
            for j in 0..n {
                g[i][j] += mm[i][j];
            }
        }
        g
    };
    let mut inv = [[0.0; 3]; 3];
    let det = match n {
        1 => {
            inv[0][0] = 1.0 / g[0][0];
            g[0][0]
        }
        2 => {
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            inv[0][0] = g[1][1] / det;
            inv[1][1] = g[0][0] / det;
            inv[0][1] = -g[0][1] / det;
            inv[1][0] = -g[1][0] / det;
            det
        }
        3 => {
            let c00 = g[1][1] * g[2][2] - g[1][2] * g[2][1];
            let c01 = g[1][2] * g[2][0] - g[1][0] * g[2][2];
            let c02 = g[1][0] * g[2][1] - g[1][1] * g[2][0];
            let det = g[0][0] * c00 + g[0][1] * c01 + g[0][2] * c02;
            inv[0][0] = c00 / det;
            inv[1][0] = c01 / det;
            inv[2][0] = c02 / det;
            inv[0][1] = (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det;
            inv[1][1] = (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det;
            inv[2][1] = (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / det;
            inv[0][2] = (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det;
            inv[1][2] = (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det;
            inv[2][2] = (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det;
            det
        }
        _ => panic!("unsupported dimension {n}"),
    };
    (inv, det.sqrt())
}

/// Rank-4 coefficient tensor `a^{ijkl} = √det g gⁱʲ δᵏˡ`.
#[derive(Debug, Clone)]
pub struct CoefficientTensor {
    pub n: usize,
    a: Vec<f64>,
}

impl CoefficientTensor {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.a[a_idx(self.n, i, j, k, l)]
    }

    /// `a^{ijkl} W_ik W_jl`. The accumulation visits (i,k) in the same order
    /// as a plain Hilbert-Schmidt sum, so at M = 0 the ratio against
    /// `‖W‖²_HS` is exactly one.
    pub fn quadratic_form(&self, w: &Mat) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += self.a[a_idx(n, i, j, k, l)] * w[i][k] * w[j][l];
                    }
                }
            }
        }
        acc
    }
}

fn assemble_tensor_into(n: usize, m: &Mat, out: &mut [f64]) {
    let (ginv, sd) = metric_parts(n, m);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out[a_idx(n, i, j, k, l)] = if k == l { sd * ginv[i][j] } else { 0.0 };
                }
            }
        }
    }
}

/// Build the coefficient tensor at a symmetric matrix M.
pub fn coefficient_tensor(n: usize, m: &Mat) -> CoefficientTensor {
    let mut a = vec![0.0; n * n * n * n];
    assemble_tensor_into(n, m, &mut a);
    CoefficientTensor { n, a }
}

/// Rank-6 exact derivative `∂a^{ijkl}/∂u_rs`.
#[derive(Debug, Clone)]
pub struct CoefficientDerivative {
    pub n: usize,
    d: Vec<f64>,
}

impl CoefficientDerivative {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize, r: usize, s: usize) -> f64 {
        self.d[d_idx(self.n, i, j, k, l, r, s)]
    }

    /// Contraction `(∂a^{ijkl}/∂u_rs) M'_ik W_rs W_jl`.
    pub fn perturbation_form(&self, mp: &Mat, w: &Mat) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        for r in 0..n {
                            for s in 0..n {
                                acc += self.d[d_idx(n, i, j, k, l, r, s)]
                                    * mp[i][k]
                                    * w[r][s]
                                    * w[j][l];
                            }
                        }
                    }
                }
            }
        }
        acc
    }

    /// Directional derivative of the tensor along a symmetric direction V.
    pub fn directional(&self, v: &Mat, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for r in 0..n {
            for s in 0..n {
                acc += self.d[d_idx(n, i, j, k, l, r, s)] * v[r][s];
            }
        }
        acc
    }

    pub fn sup_norm(&self) -> f64 {
        self.d.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

fn assemble_derivative_into(n: usize, mstar: &Mat, out: &mut [f64]) {
    let (ginv, sd) = metric_parts(n, mstar);
    for r in 0..n {
        for s in r..n {
            // symmetric differentiation basis: ∂u_ab/∂u_rs
            let mut basis = [[0.0; 3]; 3];
            if r == s {
                basis[r][r] = 1.0;
            } else {
                basis[r][s] = 0.5;
                basis[s][r] = 0.5;
            }
            // ∂g/∂u_rs = S M* + M* S
            let sm = mat_mul(n, &basis, mstar);
            let ms = mat_mul(n, mstar, &basis);
            let mut p = [[0.0; 3]; 3];
            for a in 0..n {
                for b in 0..n {
                    p[a][b] = sm[a][b] + ms[a][b];
                }
            }
            let mut half_tr = 0.0;
            for a in 0..n {
                for b in 0..n {
                    half_tr += ginv[a][b] * p[a][b];
                }
            }
            half_tr *= 0.5;
            let gpg = mat_mul(n, &ginv, &mat_mul(n, &p, &ginv));
            for i in 0..n {
                for j in 0..n {
                    let val = sd * (half_tr * ginv[i][j] - gpg[i][j]);
                    for k in 0..n {
                        for l in 0..n {
                            let v = if k == l { val } else { 0.0 };
                            out[d_idx(n, i, j, k, l, r, s)] = v;
                            out[d_idx(n, i, j, k, l, s, r)] = v;
                        }
                    }
                }
            }
        }
    }
}

/// Exact derivative of the coefficient tensor at a symmetric matrix, with the
/// convention `∂u_ab/∂u_rs = (δ_ar δ_bs + δ_as δ_br)/2` for r ≠ s.
pub fn coefficient_derivative(n: usize, mstar: &Mat) -> CoefficientDerivative {
    let mut d = vec![0.0; n * n * n * n * n * n];
    assemble_derivative_into(n, mstar, &mut d);
    CoefficientDerivative { n, d }
}

/// Ellipticity lower bound `minᵢ √det g / (1 + λᵢ²)` over the eigenvalues of
/// M. The quadratic form of the coefficient tensor dominates this multiple of
/// the Hilbert-Schmidt norm.
pub fn ellipticity_lower_bound(n: usize, m: &Mat) -> f64 {
    let (evals, _) = sym_eigen(n, m);
    let mut sd = 1.0;
    for &l in &evals[..n] {
        sd *= (1.0 + l * l).sqrt();
    }
    evals[..n]
        .iter()
        .map(|&l| sd / (1.0 + l * l))
        .fold(f64::INFINITY, f64::min)
}

/// Sampled lower estimate of the (condition4) margin.
#[derive(Debug, Clone, Serialize)]
pub struct SampledMargin {
    pub n: usize,
    /// Sup-norm radius of the sampled Hessian neighbourhood.
    pub c: f64,
    /// Estimated min of the normalized quadratic form.
    pub margin: f64,
    pub samples: usize,
    pub seed: u64,
}

struct Scratch {
    a: Vec<f64>,
    d: Vec<f64>,
}

fn draw_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Mat {
    let mut m = [[0.0; 3]; 3];
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.gen_range(-1.0..=1.0) * scale;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

fn draw_w(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let mut w = [[0.0; 3]; 3];
    for i in 0..n {
        for j in i..n {
            let v: f64 = StandardNormal.sample(rng);
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    w
}

/// Minimise the normalized perturbed quadratic form over `samples` seeded
/// draws of `M, M*, M'` with sup norm at most c and Gaussian symmetric W.
/// Draws are unit draws scaled by c, so sweeps over c with a fixed seed are
/// coupled; each sample runs on its own ChaCha stream, so the result is
/// independent of the parallel partition.
pub fn condition4_margin(n: usize, c: f64, samples: usize, seed: u64) -> Result<SampledMargin> {
    if n == 0 || n > 3 {
        return Err(Error::BadDimension(n));
    }
    if samples == 0 {
        return Err(Error::BadParameter("samples must be positive".into()));
    }
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::BadParameter(format!(
            "radius c must be nonnegative, got {c}"
        )));
    }
    let init = || Scratch {
        a: vec![0.0; n * n * n * n],
        d: vec![0.0; n * n * n * n * n * n],
    };
    let eval = |scratch: &mut Scratch, sample: usize| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample as u64 + 1);
        let m = draw_sym(&mut rng, n, c);
        let mstar = draw_sym(&mut rng, n, c);
        let mprime = draw_sym(&mut rng, n, c);
        let w = draw_w(&mut rng, n);
        let mut hs2 = 0.0;
        for r in 0..n {
            for s in 0..n {
                hs2 += w[r][s] * w[r][s];
            }
        }
        assemble_tensor_into(n, &m, &mut scratch.a);
        assemble_derivative_into(n, &mstar, &mut scratch.d);
        let mut form = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        form += scratch.a[a_idx(n, i, j, k, l)] * w[i][k] * w[j][l];
                        for r in 0..n {
                            for s in 0..n {
                                form += scratch.d[d_idx(n, i, j, k, l, r, s)]
                                    * mprime[i][k]
                                    * w[r][s]
                                    * w[j][l];
                            }
                        }
                    }
                }
            }
        }
        form / hs2
    };
    let (margin, _) = exec::min_indexed_with(samples, init, eval).expect("samples > 0");
    Ok(SampledMargin {
        n,
        c,
        margin,
        samples,
        seed,
    })
}

/// Result of the bisection search for the admissible radius.
#[derive(Debug, Clone, Serialize)]
pub struct CnSearch {
    pub n: usize,
    /// Largest certified radius: sampled margin at this c stays >= tol.
    pub c: f64,
    pub margin: f64,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
}

const BISECT_WIDTH: f64 = 1e-3;

/// Bisection on c in [0, 1] for the largest radius whose sampled margin is at
/// least `tol`. Every margin evaluation reuses the same seed, so the draws
/// are coupled across the sweep.
pub fn find_c_n(n: usize, tol: f64, samples: usize, seed: u64) -> Result<CnSearch> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::BadParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let at = |c: f64| -> Result<f64> { Ok(condition4_margin(n, c, samples, seed)?.margin) };
    let m0 = at(0.0)?;
    if m0 < tol {
        return Err(Error::DegenerateMargin(m0));
    }
    let mut lo = 0.0;
    let mut lo_margin = m0;
    let m1 = at(1.0)?;
    if m1 >= tol {
        return Ok(CnSearch {
            n,
            c: 1.0,
            margin: m1,
            tol,
            samples,
            seed,
        });
    }
    let mut hi = 1.0;
    while hi - lo >= BISECT_WIDTH {
        let mid = 0.5 * (lo + hi);
        let m = at(mid)?;
        if m >= tol {
            lo = mid;
            lo_margin = m;
        } else {
            hi = mid;
        }
    }
    Ok(CnSearch {
        n,
        c: lo,
        margin: lo_margin,
        tol,
        samples,
        seed,
    })
}
