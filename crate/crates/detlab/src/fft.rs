//! Thin 2-D complex FFT wrapper around `rustfft`.
//!
//! Convention: `forward` maps physical samples to Fourier coefficients
//! (normalized by `1/(n1 n2)`, so coefficients multiply `exp(i kappa . x)`),
//! `inverse` synthesizes physical samples without further scaling.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    n1: usize,
    n2: usize,
    fwd_rows: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tbuf: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n1: usize, n2: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_rows = planner.plan_fft_forward(n2);
        let inv_rows = planner.plan_fft_inverse(n2);
        let fwd_cols = planner.plan_fft_forward(n1);
        let inv_cols = planner.plan_fft_inverse(n1);
        let scratch_len = fwd_rows
            .get_inplace_scratch_len()
            .max(inv_rows.get_inplace_scratch_len())
            .max(fwd_cols.get_inplace_scratch_len())
            .max(inv_cols.get_inplace_scratch_len());
        Fft2 {
            n1,
            n2,
            fwd_rows,
            inv_rows,
            fwd_cols,
            inv_cols,
            scratch: vec![Complex64::default(); scratch_len],
            tbuf: vec![Complex64::default(); n1 * n2],
        }
    }

    pub fn size(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    fn transform(&mut self, data: &mut Array2<Complex64>, forward: bool) {
        assert_eq!(data.dim(), (self.n1, self.n2), "fft grid mismatch");
        let slice = data.as_slice_mut().expect("standard layout");
        let rows = if forward {
            self.fwd_rows.clone()
        } else {
            self.inv_rows.clone()
        };
        rows.process_with_scratch(slice, &mut self.scratch);

        // Columns: transpose, run length-n1 transforms, transpose back.
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                self.tbuf[j * self.n1 + i] = slice[i * self.n2 + j];
            }
        }
        let cols = if forward {
            self.fwd_cols.clone()
        } else {
            self.inv_cols.clone()
        };
        cols.process_with_scratch(&mut self.tbuf, &mut self.scratch);
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                slice[i * self.n2 + j] = self.tbuf[j * self.n1 + i];
            }
        }
    }

    /// Physical samples -> Fourier coefficients (with the `1/(n1 n2)` factor).
    pub fn forward(&mut self, data: &mut Array2<Complex64>) {
        self.transform(data, true);
        let scale = 1.0 / (self.n1 as f64 * self.n2 as f64);
        data.mapv_inplace(|c| c * scale);
    }

    /// Fourier coefficients -> physical samples.
    pub fn inverse(&mut self, data: &mut Array2<Complex64>) {
        self.transform(data, false);
    }
}

/// Signed integer frequency of row/column index `idx` on a length-`n` grid.
#[inline]
pub fn signed_freq(idx: usize, n: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Grid index storing frequency `k` on a length-`n` grid.
#[inline]
pub fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Re-embeds a coefficient array on a larger grid (zero padding in spectral
/// space). The source band must fit strictly inside the target grid.
pub fn pad_spectrum(src: &Array2<Complex64>, n1: usize, n2: usize) -> Array2<Complex64> {
    let (m1, m2) = src.dim();
    assert!(n1 >= m1 && n2 >= m2, "padding must not shrink the grid");
    let mut out = Array2::zeros((n1, n2));
    for i1 in 0..m1 {
        let k1 = signed_freq(i1, m1);
        for i2 in 0..m2 {
            let k2 = signed_freq(i2, m2);
            out[[index_of(k1, n1), index_of(k2, n2)]] = src[[i1, i2]];
        }
    }
    out
}
