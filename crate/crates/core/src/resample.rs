//! Evaluation of a trigonometric interpolant on a dilated copy of its grid.
//!
//! For coefficients `F_q`, `q = -n/2 .. n/2 - 1`, the sums
//! `z_u = sum_q F_q exp(2 pi i beta q (u - n/2))` are a chirp-z transform,
//! computed with Bluestein's identity `q v = (q^2 + v^2 - (v - q)^2) / 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::spectral::{to_spectrum, Field, Grid2D};

struct Chirp {
    n: usize,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn chirp(beta: f64, v: i64) -> Complex64 {
    // exp(i pi beta v^2); v^2 is exact in f64 for the grid sizes in use.
    Complex64::from_polar(1.0, PI * beta * (v * v) as f64)
}

impl Chirp {
    fn new(n: usize, beta: f64, planner: &mut FftPlanner<f64>) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let half = (n / 2) as i64;
        let post: Vec<Complex64> = (0..n as i64).map(|t| chirp(beta, t - half)).collect();
        // FFT coefficients refer to index 0; (-1)^q moves the reference to n/2.
        let pre = post
            .iter()
            .enumerate()
            .map(|(t, z)| if (t as i64 - half) % 2 == 0 { *z } else { -z })
            .collect();
        let mut b = vec![Complex64::new(0.0, 0.0); m];
        for d in 0..n {
            let w = chirp(beta, d as i64).conj();
            b[d] = w;
            if d > 0 {
                b[m - d] = w;
            }
        }
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        fwd.process(&mut b);
        Self {
            n,
            pre,
            post,
            kernel_hat: b,
            fwd,
            inv,
        }
    }

    /// `coeffs` in FFT order; the Nyquist entry is ignored.
    fn eval(&self, coeffs: &[Complex64], out: &mut [Complex64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        let m = self.kernel_hat.len();
        buf.clear();
        buf.resize(m, Complex64::new(0.0, 0.0));
        // t = 0 is the Nyquist mode q = -n/2.
        for (t, (b, pre)) in buf.iter_mut().zip(&self.pre).enumerate().take(n).skip(1) {
            let q = t as i64 - (n / 2) as i64;
            *b = coeffs[q.rem_euclid(n as i64) as usize] * pre;
        }
        self.fwd.process(buf);
        for (a, b) in buf.iter_mut().zip(&self.kernel_hat) {
            *a *= b;
        }
        self.inv.process(buf);
        let norm = 1.0 / m as f64;
        for u in 0..n {
            out[u] = buf[u] * self.post[u] * norm;
        }
    }
}

/// Samples the band-limited interpolant of `f` at `(sx x_i, sy y_j)`.
/// Nyquist modes are dropped. Points outside the box `[-lx, lx) x [-ly, ly)`
/// get zero instead of a periodic copy, since the fields
/// being dilated are localized and not periodic.
pub(crate) fn dilate(f: &Field, sx: f64, sy: f64) -> Field {
    let g: Grid2D = *f.grid();
    let (nx, ny) = g.shape();
    let s = to_spectrum(f);
    let mut planner = FftPlanner::new();
    let cy = Chirp::new(ny, sy / ny as f64, &mut planner);
    let cx = Chirp::new(nx, sx / nx as f64, &mut planner);
    let mut buf = Vec::new();

    // Stage 1: y-series for every x-mode, giving G[r, j] stored column-major in r.
    let mut g_rj = vec![Complex64::new(0.0, 0.0); nx * ny];
    let mut row = vec![Complex64::new(0.0, 0.0); ny];
    let mut out = vec![Complex64::new(0.0, 0.0); ny];
    for r in 0..nx {
        for (m, z) in row.iter_mut().enumerate() {
            *z = s.coeff(r, m);
        }
        cy.eval(&row, &mut out, &mut buf);
        for j in 0..ny {
            g_rj[j * nx + r] = out[j];
        }
    }

    // Stage 2: x-series for every output column.
    let mut vals = vec![0.0; nx * ny];
    let mut col_out = vec![Complex64::new(0.0, 0.0); nx];
    let norm = 1.0 / (nx * ny) as f64;
    for j in 0..ny {
        cx.eval(&g_rj[j * nx..(j + 1) * nx], &mut col_out, &mut buf);
        let yin = inside(sy * g.y(j), g.ly());
        for i in 0..nx {
            if yin && inside(sx * g.x(i), g.lx()) {
                vals[i * ny + j] = col_out[i].re * norm;
            }
        }
    }
    Field::from_vec(g, vals).expect("shape preserved")
}

fn inside(v: f64, half_width: f64) -> bool {
    v >= -half_width && v < half_width
}
