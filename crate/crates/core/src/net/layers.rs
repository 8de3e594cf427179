//! Fully connected layers and the patch geometry of valid convolutions.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{matmul_nn, matmul_nt, matmul_tn};

/// `z = x W^T + b` over a batch of rows. A convolution is the same product
/// applied to im2col patch rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out x n_in`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut z = vec![0.0; rows * self.n_out];
        for r in 0..rows {
            z[r * self.n_out..(r + 1) * self.n_out].copy_from_slice(&self.b);
        }
        matmul_nt(x, &self.w, rows, self.n_in, self.n_out, &mut z, true);
        z
    }

    /// Parameter gradients from the layer input and the output gradient.
    pub fn grads(&self, x: &[f64], gz: &[f64], rows: usize) -> LinearGrad {
        let mut w = vec![0.0; self.w.len()];
        matmul_tn(gz, x, rows, self.n_out, self.n_in, &mut w, false);
        let mut b = vec![0.0; self.n_out];
        for r in 0..rows {
            for (bj, g) in b.iter_mut().zip(&gz[r * self.n_out..(r + 1) * self.n_out]) {
                *bj += g;
            }
        }
        LinearGrad { w, b }
    }

    /// Gradient with respect to the layer input.
    pub fn input_grad(&self, gz: &[f64], rows: usize) -> Vec<f64> {
        let mut gx = vec![0.0; rows * self.n_in];
        matmul_nn(gz, &self.w, rows, self.n_out, self.n_in, &mut gx);
        gx
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearGrad {
    pub fn zeros_like(l: &Linear) -> Self {
        Self {
            w: vec![0.0; l.w.len()],
            b: vec![0.0; l.b.len()],
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|v| *v *= s);
    }

    pub fn add_scaled(&mut self, o: &LinearGrad, s: f64) {
        for (a, b) in self.w.iter_mut().zip(&o.w).chain(self.b.iter_mut().zip(&o.b)) {
            *a += s * b;
        }
    }

    pub fn dot(&self, o: &LinearGrad) -> f64 {
        crate::linalg::dot(&self.w, &o.w) + crate::linalg::dot(&self.b, &o.b)
    }
}

/// Valid (unpadded) convolution over NHWC activations. Patch columns are
/// ordered `(ky, kx, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_c
    }

    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    pub fn out_len(&self) -> usize {
        self.positions() * self.out_c
    }

    pub fn im2col(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (oh, ow, k, c, pl) = (self.out_h(), self.out_w(), self.kernel, self.in_c, self.patch_len());
        let mut p = vec![0.0; batch * oh * ow * pl];
        for b in 0..batch {
            let xb = &x[b * self.in_len()..(b + 1) * self.in_len()];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = &mut p[((b * oh + oy) * ow + ox) * pl..][..pl];
                    for ky in 0..k {
                        let y = oy * self.stride + ky;
                        let src = (y * self.in_w + ox * self.stride) * c;
                        row[ky * k * c..(ky + 1) * k * c].copy_from_slice(&xb[src..src + k * c]);
                    }
                }
            }
        }
        p
    }

    /// Adjoint of [`ConvGeom::im2col`].
    pub fn col2im(&self, p: &[f64], batch: usize) -> Vec<f64> {
        let (oh, ow, k, c, pl) = (self.out_h(), self.out_w(), self.kernel, self.in_c, self.patch_len());
        let mut x = vec![0.0; batch * self.in_len()];
        for b in 0..batch {
            let xb = &mut x[b * self.in_len()..(b + 1) * self.in_len()];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = &p[((b * oh + oy) * ow + ox) * pl..][..pl];
                    for ky in 0..k {
                        let y = oy * self.stride + ky;
                        let dst = (y * self.in_w + ox * self.stride) * c;
                        for (d, s) in xb[dst..dst + k * c].iter_mut().zip(&row[ky * k * c..(ky + 1) * k * c]) {
                            *d += s;
                        }
                    }
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn col2im_is_adjoint() {
        let g = ConvGeom {
            in_h: 7,
            in_w: 6,
            in_c: 2,
            out_c: 1,
            kernel: 3,
            stride: 2,
        };
        let x: Vec<f64> = (0..2 * g.in_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let p = g.im2col(&x, 2);
        let q: Vec<f64> = (0..p.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        let back = g.col2im(&q, 2);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
