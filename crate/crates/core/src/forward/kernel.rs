//! Discrete volume potential `(V w)(x_i) = sum_j K(x_i - x_j) w_j` on a uniform
//! grid, applied by zero-padded FFT.
//!
//! `K(d) = Phi(d) h^2` with `Phi(x) = (i/4) H_0^{(1)}(k|x|)` off the diagonal.
//! The self cell uses the integral of `Phi` over the disc of equal area,
//! `rho = h / sqrt(pi)`:
//!
//! ```text
//! int_{|y|<rho} Phi(y) dy = (i pi rho / (2k)) H_1^{(1)}(k rho) - 1/k^2
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::special::{hankel1_0, hankel1_1};

/// `int_{|y|<rho} (i/4) H_0^{(1)}(k|y|) dy`.
pub fn self_cell_integral(k: f64, rho: f64) -> Complex64 {
    Complex64::new(0.0, PI * rho / (2.0 * k)) * hankel1_1(k * rho) - 1.0 / (k * k)
}

/// `Phi(x) = (i/4) H_0^{(1)}(k r)` for `r > 0`.
pub fn fundamental_solution(k: f64, r: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel1_0(k * r)
}

pub(crate) struct GreenConvolution {
    m: usize,
    p: usize,
    kernel_hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Per-thread buffers for [`GreenConvolution::apply`].
pub(crate) struct ConvolutionWorkspace {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl GreenConvolution {
    pub fn new(k: f64, cell_size: f64, m: usize) -> Self {
        let p = 2 * m;
        let h2 = cell_size * cell_size;
        // distinct |d| offsets, tabulated once
        let mut table = vec![Complex64::default(); m * m];
        for a in 0..m {
            for b in a..m {
                let v = if a == 0 && b == 0 {
                    self_cell_integral(k, cell_size / PI.sqrt())
                } else {
                    fundamental_solution(k, cell_size * (a as f64).hypot(b as f64)) * h2
                };
                table[a * m + b] = v;
                table[b * m + a] = v;
            }
        }
        let offset = |i: usize| -> Option<usize> {
            match i {
                _ if i < m => Some(i),
                _ if i == m => None,
                _ => Some(p - i),
            }
        };
        // stored transposed: index [col * p + row]
        let mut kernel = vec![Complex64::default(); p * p];
        for col in 0..p {
            for row in 0..p {
                if let (Some(a), Some(b)) = (offset(row), offset(col)) {
                    kernel[col * p + row] = table[a * m + b];
                }
            }
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(p);
        let inverse = planner.plan_fft_inverse(p);
        let mut scratch = vec![Complex64::default(); forward.get_inplace_scratch_len()];
        // The kernel is symmetric in both axes, so transform order does not matter.
        forward.process_with_scratch(&mut kernel, &mut scratch);
        transpose_in_place(&mut kernel, p);
        forward.process_with_scratch(&mut kernel, &mut scratch);
        transpose_in_place(&mut kernel, p);
        let scale = 1.0 / (p * p) as f64;
        for v in kernel.iter_mut() {
            *v *= scale;
        }
        Self { m, p, kernel_hat: kernel, forward, inverse }
    }

    pub fn workspace(&self) -> ConvolutionWorkspace {
        let scratch_len = self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len());
        ConvolutionWorkspace {
            a: vec![Complex64::default(); self.p * self.p],
            b: vec![Complex64::default(); self.p * self.p],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    /// `out = V w` on the `m x m` grid. `rows` bounds the rows where `w` is
    /// nonzero and where the output is needed; other output rows are left as is.
    pub fn apply(&self, w: &[Complex64], rows: (usize, usize), out: &mut [Complex64], ws: &mut ConvolutionWorkspace) {
        let (m, p) = (self.m, self.p);
        let (r0, r1) = rows;
        ws.a.iter_mut().for_each(|v| *v = Complex64::default());
        for r in r0..=r1 {
            ws.a[r * p..r * p + m].copy_from_slice(&w[r * m..(r + 1) * m]);
        }
        self.forward.process_with_scratch(&mut ws.a[r0 * p..(r1 + 1) * p], &mut ws.scratch);
        transpose(&ws.a, &mut ws.b, p);
        self.forward.process_with_scratch(&mut ws.b, &mut ws.scratch);
        for (v, kh) in ws.b.iter_mut().zip(&self.kernel_hat) {
            *v *= kh;
        }
        self.inverse.process_with_scratch(&mut ws.b, &mut ws.scratch);
        transpose(&ws.b, &mut ws.a, p);
        self.inverse.process_with_scratch(&mut ws.a[r0 * p..(r1 + 1) * p], &mut ws.scratch);
        for r in r0..=r1 {
            out[r * m..(r + 1) * m].copy_from_slice(&ws.a[r * p..r * p + m]);
        }
    }
}

const BLOCK: usize = 32;

fn transpose(src: &[Complex64], dst: &mut [Complex64], p: usize) {
    for rb in (0..p).step_by(BLOCK) {
        for cb in (0..p).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(p) {
                for c in cb..(cb + BLOCK).min(p) {
                    dst[c * p + r] = src[r * p + c];
                }
            }
        }
    }
}

fn transpose_in_place(a: &mut [Complex64], p: usize) {
    for r in 0..p {
        for c in r + 1..p {
            a.swap(r * p + c, c * p + r);
        }
    }
}
