//! Dense row-major matrix kernels used by the network and the optimizer.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// `out[m x n] (+)= a[m x k] * b[n x k]^T`.
pub fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64], acc: bool) {
    debug_assert!(a.len() == m * k && b.len() == n * k && out.len() == m * n);
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let br = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for t in 0..k {
                s += ar[t] * br[t];
            }
            if acc {
                out[i * n + j] += s;
            } else {
                out[i * n + j] = s;
            }
        }
    }
}

/// `out[m x n] = a[m x k] * b[k x n]`.
pub fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert!(a.len() == m * k && b.len() == k * n && out.len() == m * n);
    out.fill(0.0);
    for i in 0..m {
        let o = &mut out[i * n..(i + 1) * n];
        for t in 0..k {
            let x = a[i * k + t];
            if x == 0.0 {
                continue;
            }
            let br = &b[t * n..(t + 1) * n];
            for j in 0..n {
                o[j] += x * br[j];
            }
        }
    }
}

/// `out[m x n] (+)= a[k x m]^T * b[k x n]`.
pub fn matmul_tn(a: &[f64], b: &[f64], k: usize, m: usize, n: usize, out: &mut [f64], acc: bool) {
    debug_assert!(a.len() == k * m && b.len() == k * n && out.len() == m * n);
    if !acc {
        out.fill(0.0);
    }
    for t in 0..k {
        let ar = &a[t * m..(t + 1) * m];
        let br = &b[t * n..(t + 1) * n];
        for i in 0..m {
            let x = ar[i];
            if x == 0.0 {
                continue;
            }
            let o = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                o[j] += x * br[j];
            }
        }
    }
}

/// In-place lower Cholesky factor of an SPD matrix. Returns `false` when a
/// pivot is not positive.
pub fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

/// Inverse of an SPD matrix via its Cholesky factor.
pub fn spd_inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    if !cholesky(&mut l, n) {
        return None;
    }
    // Invert L in place (lower triangular), then A^-1 = L^-T L^-1.
    let mut li = vec![0.0; n * n];
    for i in 0..n {
        li[i * n + i] = 1.0 / l[i * n + i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i * n + k] * li[k * n + j];
            }
            li[i * n + j] = s / l[i * n + i];
        }
    }
    let mut inv = vec![0.0; n * n];
    matmul_tn(&li, &li, n, n, n, &mut inv, false);
    // Exact symmetry.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = v;
            inv[j * n + i] = v;
        }
    }
    Some(inv)
}

pub fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
