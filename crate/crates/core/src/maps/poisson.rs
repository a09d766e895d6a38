//! Fast Poisson integration of gradient fields with a zero border.
//!
//! Solves the least-squares problem `min ||D z - g||^2` where `D` is the
//! forward-difference gradient on pixel edges, `g` is averaged onto the same
//! edges, and `z = 0` on the outermost ring of pixels. The normal equations
//! are the 5-point Laplacian against the central-difference divergence of
//! `g`, which the type-I discrete sine transform diagonalizes.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{GradientMap, Grid, GridGeometry, HeightMap};

/// Type-I DST of a fixed length, computed through a real-odd FFT of length `2(n+1)`.
struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Dst1 {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        let fft = planner.plan_fft_forward(2 * (n + 1));
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Dst1 {
            n,
            fft,
            buf: vec![Complex::default(); 2 * (n + 1)],
            scratch,
        }
    }

    /// In place: `x_k <- sum_j x_j sin(pi (j+1)(k+1) / (n+1))`.
    fn apply(&mut self, x: &mut [f64]) {
        let n = self.n;
        let len = 2 * (n + 1);
        self.buf[0] = Complex::default();
        self.buf[n + 1] = Complex::default();
        for (j, &v) in x.iter().enumerate() {
            self.buf[j + 1] = Complex::new(v, 0.0);
            self.buf[len - 1 - j] = Complex::new(-v, 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for (k, out) in x.iter_mut().enumerate() {
            *out = -0.5 * self.buf[k + 1].im;
        }
    }
}

/// Integrates `g` (dimensionless slopes) into heights in millimeters.
pub fn poisson_integrate(g: &GradientMap, geom: &GridGeometry) -> HeightMap {
    let (rows, cols) = g.shape();
    debug_assert_eq!((rows, cols), (geom.height_px, geom.width_px));
    let h = geom.pixel_pitch;
    let (m, n) = (rows - 2, cols - 2);

    // Central-difference divergence on the interior, row-major m x n.
    let mut f = vec![0.0; m * n];
    let inv2h = 0.5 / h;
    for i in 1..rows - 1 {
        for j in 1..cols - 1 {
            let du = g.get(i, j + 1)[0] - g.get(i, j - 1)[0];
            let dv = g.get(i + 1, j)[1] - g.get(i - 1, j)[1];
            f[(i - 1) * n + (j - 1)] = (du + dv) * inv2h;
        }
    }

    let mut planner = FftPlanner::new();
    let mut row_dst = Dst1::new(&mut planner, n);
    let mut col_dst = Dst1::new(&mut planner, m);
    let mut column = vec![0.0; m];

    let mut transform_2d = |f: &mut [f64]| {
        for r in f.chunks_exact_mut(n) {
            row_dst.apply(r);
        }
        for j in 0..n {
            for i in 0..m {
                column[i] = f[i * n + j];
            }
            col_dst.apply(&mut column);
            for i in 0..m {
                f[i * n + j] = column[i];
            }
        }
    };

    transform_2d(&mut f);

    let eig = |k: usize, len: usize| {
        2.0 * (std::f64::consts::PI * (k + 1) as f64 / (len + 1) as f64).cos() - 2.0
    };
    let row_eig: Vec<f64> = (0..m).map(|k| eig(k, m)).collect();
    let col_eig: Vec<f64> = (0..n).map(|k| eig(k, n)).collect();
    // Inverse DST-I is the forward transform scaled by 2/(len+1) per axis.
    let scale = h * h * (2.0 / (m + 1) as f64) * (2.0 / (n + 1) as f64);
    for i in 0..m {
        for j in 0..n {
            f[i * n + j] *= scale / (row_eig[i] + col_eig[j]);
        }
    }

    transform_2d(&mut f);

    Grid::from_fn(rows, cols, |i, j| {
        if i == 0 || j == 0 || i == rows - 1 || j == cols - 1 {
            0.0
        } else {
            f[(i - 1) * n + (j - 1)]
        }
    })
}
