//! Two-dimensional FFTs on an `n × n` row-major buffer.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); len],
        }
    }

    fn rows(&mut self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse {
            &self.inverse
        } else {
            &self.forward
        };
        plan.process_with_scratch(data, &mut self.scratch);
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    /// Unnormalized forward transform with the spectrum left transposed
    /// (`[kx][ky]` as row and column). Multipliers that are symmetric in the
    /// two axes may be applied directly in this layout.
    pub fn forward_transposed(&mut self, data: &mut [Complex64]) {
        self.rows(data, false);
        self.transpose(data);
        self.rows(data, false);
    }

    /// Inverse of [`Fft2::forward_transposed`], including the `1/n²` factor.
    pub fn inverse_transposed(&mut self, data: &mut [Complex64]) {
        self.rows(data, true);
        self.transpose(data);
        self.rows(data, true);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Unnormalized forward transform; `out[iy * n + ix]` is the mode with
    /// wavenumber `(k[ix], k[iy])`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward_transposed(data);
        self.transpose(data);
    }

    /// Inverse of [`Fft2::forward`], including the `1/n²` factor.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transpose(data);
        self.inverse_transposed(data);
    }
}

/// Angular wavenumbers in FFT order for `n` points on a period `l`.
pub fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / l;
    (0..n)
        .map(|j| {
            let m = if j <= n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            m * dk
        })
        .collect()
}

/// Wavenumbers for odd-order derivatives: the Nyquist mode is dropped.
pub fn derivative_wavenumbers(n: usize, l: f64) -> Vec<f64> {
    let mut k = wavenumbers(n, l);
    if n % 2 == 0 {
        k[n / 2] = 0.0;
    }
    k
}
