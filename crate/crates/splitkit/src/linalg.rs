//! Dense linear-algebra kernels: scaling-and-squaring matrix exponential,
//! pivoted LU solves, and power-iteration operator norms.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Result, SplitkitError};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120., 60., 12., 1.];
const PADE_5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const PADE_7: [f64; 8] = [
    17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.,
];
const PADE_9: [f64; 10] = [
    17643225600.,
    8821612800.,
    2075673600.,
    302702400.,
    30270240.,
    2162160.,
    110880.,
    3960.,
    90.,
    1.,
];
const PADE_13: [f64; 14] = [
    64764752532480000.,
    32382376266240000.,
    7771770303897600.,
    1187353796428800.,
    129060195264000.,
    10559470521600.,
    670442572800.,
    33522128640.,
    1323241920.,
    40840800.,
    960960.,
    16380.,
    182.,
    1.,
];

/// One-norm (maximum absolute column sum).
pub fn one_norm(a: &Array2<f64>) -> f64 {
    let mut best = 0.0_f64;
    for col in a.columns() {
        let s: f64 = col.iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Frobenius norm.
pub fn frobenius_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean vector norm.
pub fn vec_norm(x: ArrayView1<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Matrix exponential by Pade approximation with scaling and squaring.
///
/// Degree is chosen from the one-norm so that small arguments use low-degree
/// approximants and large ones are scaled down to the degree-13 window.
pub fn expm(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SplitkitError::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SplitkitError::NonFiniteInput);
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let norm = one_norm(a);
    if norm <= THETA_3 {
        return pade_low(a, &PADE_3);
    }
    if norm <= THETA_5 {
        return pade_low(a, &PADE_5);
    }
    if norm <= THETA_7 {
        return pade_low(a, &PADE_7);
    }
    if norm <= THETA_9 {
        return pade_low(a, &PADE_9);
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
    let scaled = a.mapv(|v| v / 2f64.powi(s as i32));
    let mut r = pade_13(&scaled)?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

fn pade_low(a: &Array2<f64>, b: &[f64]) -> Result<Array2<f64>> {
    let n = a.nrows();
    let eye = Array2::<f64>::eye(n);
    let a2 = a.dot(a);
    // even and odd coefficient sums in powers of a2
    let mut even = &eye * b[0];
    let mut odd_core = &eye * b[1];
    let mut pow = Array2::eye(n);
    for k in 1..=(b.len() - 2) / 2 {
        pow = pow.dot(&a2);
        even = even + &pow * b[2 * k];
        if 2 * k + 1 < b.len() {
            odd_core = odd_core + &pow * b[2 * k + 1];
        }
    }
    let u = a.dot(&odd_core);
    solve_pade(&even, &u)
}

fn pade_13(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let b = &PADE_13;
    let eye = Array2::<f64>::eye(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let u_inner = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a.dot(&(a6.dot(&u_inner) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &eye * b[1]));
    let v_inner = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = a6.dot(&v_inner) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &eye * b[0];
    solve_pade(&v, &u)
}

/// Solves (v - u) r = (v + u) for the Pade quotient r.
fn solve_pade(v: &Array2<f64>, u: &Array2<f64>) -> Result<Array2<f64>> {
    let lhs = v - u;
    let rhs = v + u;
    lu_solve(&lhs, &rhs)
}

/// Solves `a x = b` for possibly many right-hand sides by pivoted LU.
pub fn lu_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SplitkitError::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if b.nrows() != n {
        return Err(SplitkitError::DimensionMismatch {
            expected: n,
            got: b.nrows(),
        });
    }
    let m = b.ncols();
    let mut lu: Vec<f64> = a.iter().copied().collect();
    let mut pivots: Vec<usize> = Vec::with_capacity(n);
    for k in 0..n {
        let mut p = k;
        let mut max_v = lu[k * n + k].abs();
        for i in k + 1..n {
            let v = lu[i * n + k].abs();
            if v > max_v {
                max_v = v;
                p = i;
            }
        }
        if max_v == 0.0 {
            return Err(SplitkitError::NormEstimation(
                "singular matrix in linear solve".into(),
            ));
        }
        pivots.push(p);
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
        }
        let piv = lu[k * n + k];
        for i in k + 1..n {
            let factor = lu[i * n + k] / piv;
            lu[i * n + k] = factor;
            if factor != 0.0 {
                for j in k + 1..n {
                    lu[i * n + j] -= factor * lu[k * n + j];
                }
            }
        }
    }
    let mut x: Vec<f64> = b.iter().copied().collect();
    // row swaps recorded during factorization
    for (k, &p) in pivots.iter().enumerate() {
        if p != k {
            for j in 0..m {
                x.swap(k * m + j, p * m + j);
            }
        }
    }
    // forward substitution with unit lower triangle
    for i in 1..n {
        for k in 0..i {
            let l = lu[i * n + k];
            if l != 0.0 {
                for j in 0..m {
                    x[i * m + j] -= l * x[k * m + j];
                }
            }
        }
    }
    // back substitution
    for i in (0..n).rev() {
        let d = lu[i * n + i];
        for k in i + 1..n {
            let u = lu[i * n + k];
            if u != 0.0 {
                for j in 0..m {
                    x[i * m + j] -= u * x[k * m + j];
                }
            }
        }
        for j in 0..m {
            x[i * m + j] /= d;
        }
    }
    Array2::from_shape_vec((n, m), x).map_err(|_| SplitkitError::NonFiniteInput)
}

/// Induced 2-norm (largest singular value) by power iteration on `a' a`.
///
/// Deterministic start vector; iterates until the Rayleigh estimate is
/// stationary to 1e-12 relative or the iteration cap is reached.
pub fn spectral_norm(a: ArrayView2<f64>) -> Result<f64> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SplitkitError::NormEstimation(
            "non-finite entries in operator".into(),
        ));
    }
    let (r, c) = a.dim();
    if r == 0 || c == 0 {
        return Ok(0.0);
    }
    let mut v = Array1::from_shape_fn(c, |i| 1.0 + (i as f64 + 1.0) / (c as f64 + 1.0));
    let nv = vec_norm(v.view());
    v.mapv_inplace(|x| x / nv);
    let mut sigma = 0.0_f64;
    for _ in 0..500 {
        let w = a.dot(&v);
        let sigma_new = vec_norm(w.view());
        if sigma_new == 0.0 {
            return Ok(0.0);
        }
        let z = a.t().dot(&w);
        let nz = vec_norm(z.view());
        if nz == 0.0 {
            return Ok(sigma_new);
        }
        v = z.mapv(|x| x / nz);
        if (sigma_new - sigma).abs() <= 1e-12 * sigma_new {
            return Ok(sigma_new);
        }
        sigma = sigma_new;
    }
    Ok(sigma)
}

/// Largest eigenvalue of a symmetric matrix via shifted power iteration.
pub fn sym_eig_max(s: &Array2<f64>) -> Result<f64> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(SplitkitError::DimensionMismatch {
            expected: n,
            got: s.ncols(),
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    // Gershgorin shift makes s + c I positive semidefinite.
    let c = (0..n)
        .map(|i| (0..n).map(|j| s[[i, j]].abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let shifted = s + &(Array2::<f64>::eye(n) * c);
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + (i as f64 + 1.0) / (n as f64 + 1.0));
    let nv = vec_norm(v.view());
    v.mapv_inplace(|x| x / nv);
    let mut lambda = 0.0_f64;
    for _ in 0..500 {
        let w = shifted.dot(&v);
        let nw = vec_norm(w.view());
        if nw == 0.0 {
            return Ok(-c);
        }
        let rayleigh = v.dot(&w);
        v = w.mapv(|x| x / nw);
        if (rayleigh - lambda).abs() <= 1e-13 * rayleigh.abs().max(1.0) {
            return Ok(rayleigh - c);
        }
        lambda = rayleigh;
    }
    Ok(lambda - c)
}

/// Symmetric part (a + a')/2.
pub fn symmetric_part(a: &Array2<f64>) -> Array2<f64> {
    (a + &a.t().to_owned()) / 2.0
}

/// Frobenius norm of the commutator `ab - ba`.
pub fn commutator_norm(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    frobenius_norm(&(a.dot(b) - b.dot(a)))
}

/// Vector norms used for error and stability measurements.
///
/// `L2` is the plain Euclidean norm; `GridL2` carries a uniform mesh weight
/// so that grid functions approximate their continuum L2 norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VecNorm {
    L2,
    GridL2 { h: f64 },
}

impl VecNorm {
    pub fn eval(&self, x: ArrayView1<f64>) -> f64 {
        match self {
            VecNorm::L2 => vec_norm(x),
            VecNorm::GridL2 { h } => h.sqrt() * vec_norm(x),
        }
    }

    /// Induced operator norm of a matrix mapping `(space, from)` to `(space, self)`.
    pub fn operator_norm(&self, a: ArrayView2<f64>, from: VecNorm) -> Result<f64> {
        let sigma = spectral_norm(a)?;
        let scale_to = match self {
            VecNorm::L2 => 1.0,
            VecNorm::GridL2 { h } => h.sqrt(),
        };
        let scale_from = match from {
            VecNorm::L2 => 1.0,
            VecNorm::GridL2 { h } => h.sqrt(),
        };
        Ok(sigma * scale_to / scale_from)
    }
}
