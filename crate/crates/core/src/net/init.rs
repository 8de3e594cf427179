//! Orthogonal weight initialization.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math::sqrt;

/// A `rows x cols` matrix whose rows (if `rows <= cols`) or columns are
/// orthonormal, scaled by `gain`.
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    // Gram-Schmidt (twice, for stability) on n Gaussian vectors of length m.
    let (m, n) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let mut q: Vec<f64> = (0..m * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    // Columns of q are stored as q[j * m .. (j + 1) * m].
    for j in 0..n {
        for _pass in 0..2 {
            for p in 0..j {
                let mut d = 0.0;
                for i in 0..m {
                    d += q[p * m + i] * q[j * m + i];
                }
                for i in 0..m {
                    q[j * m + i] -= d * q[p * m + i];
                }
            }
        }
        let norm = sqrt((0..m).map(|i| q[j * m + i] * q[j * m + i]).sum());
        for i in 0..m {
            q[j * m + i] /= norm;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for j in 0..n {
        for i in 0..m {
            let v = gain * q[j * m + i];
            if rows >= cols {
                out[i * cols + j] = v;
            } else {
                out[j * cols + i] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_or_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (r, c) in [(8, 3), (3, 8), (5, 5)] {
            let w = orthogonal(r, c, 2.0, &mut rng);
            let (k, along_rows) = if r <= c { (r, true) } else { (c, false) };
            for a in 0..k {
                for b in 0..k {
                    let d: f64 = if along_rows {
                        (0..c).map(|j| w[a * c + j] * w[b * c + j]).sum()
                    } else {
                        (0..r).map(|i| w[i * c + a] * w[i * c + b]).sum()
                    };
                    let e = if a == b { 4.0 } else { 0.0 };
                    assert!((d - e).abs() < 1e-10, "{r}x{c} {a} {b} {d}");
                }
            }
        }
    }
}
