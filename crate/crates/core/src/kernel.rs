//! The resolvent kernel `K` with symbol `1 / (c - alpha |kx| + epsilon ky^2)`.
//!
//! Two constructions are provided: the truncated Fourier series on a grid
//! and a real-space representation
//! `K(x, y) = C int_0^inf |alpha| sqrt(t) / (alpha^2 t^2 + x^2) e^{-(c t + y^2 / 4t)} dt`,
//! evaluated without the constant `C`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::functionals::Params;
use crate::quadrature;
use crate::spectral::{apply_real_symbol, to_field, Field, Grid2D, Spectrum};

/// Evaluation budget for one kernel quadrature.
const QUAD_BUDGET: usize = 200_000;

/// Kernel of the positive operator `L`, built from the canonical branch of
/// the parameters (`c > 0`, `alpha < 0`, `epsilon = +1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    params: Params,
    canonical: Params,
}

impl KernelSpec {
    pub fn new(params: Params) -> Result<Self> {
        params.validate()?;
        let (canonical, _) = params
            .canonical()
            .ok_or_else(|| Error::Regime("kernel needs a sign map to the c > 0 branch".into()))?;
        if !(canonical.alpha < 0.0 && canonical.epsilon > 0.0) {
            return Err(Error::Regime(format!(
                "symbol c - alpha|kx| + epsilon ky^2 is not positive for alpha = {}, epsilon = {}, c = {}",
                params.alpha, params.epsilon, params.c
            )));
        }
        Ok(Self { params, canonical })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// The positive symbol of `L` on the canonical branch.
    pub fn l_symbol(&self, kx: f64, ky: f64) -> f64 {
        self.canonical.symbol(kx, ky)
    }

    /// `K^(kx, ky) = 1 / L(kx, ky)`.
    pub fn symbol(&self, kx: f64, ky: f64) -> f64 {
        1.0 / self.l_symbol(kx, ky)
    }
}

/// Samples of the periodic kernel `(4 lx ly)^{-1} sum_k K^(k) e^{i k x}`,
/// arranged so the singular point sits at the origin index.
pub fn kernel_field(spec: &KernelSpec, grid: &Grid2D) -> Field {
    let mut s = Spectrum::zeros(*grid);
    for ((r, m), z) in s.coeffs_mut().indexed_iter_mut() {
        z.re = spec.symbol(grid.kx(r), grid.ky(m));
    }
    let raw = to_field(&s).scaled(1.0 / grid.cell());
    raw.roll((grid.nx() / 2) as isize, (grid.ny() / 2) as isize)
}

/// Solves `L w = g`.
pub fn convolve_kernel(g: &Field, spec: &KernelSpec) -> Field {
    let grid = *g.grid();
    apply_real_symbol(g, |r, m| spec.symbol(grid.kx(r), grid.ky(m)))
}

/// Applies `L = c - alpha H d/dx - epsilon d^2/dy^2`.
pub fn apply_operator(w: &Field, spec: &KernelSpec) -> Field {
    let grid = *w.grid();
    apply_real_symbol(w, |r, m| spec.l_symbol(grid.kx(r), grid.ky(m)))
}

/// Real-space kernel at `(x, y)` without its constant, to relative tolerance `tol`.
pub fn kernel_quadrature(x: f64, y: f64, params: &Params, tol: f64) -> Result<f64> {
    let spec = KernelSpec::new(*params)?;
    quadrature_value(x, y, &spec.canonical, tol)
}

fn quadrature_value(x: f64, y: f64, p: &Params, tol: f64) -> Result<f64> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::Domain("the kernel is singular at the origin".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Precondition(format!("tolerance {tol} must be positive")));
    }
    let a = p.alpha.abs();
    let c = p.c;
    let (x2, y2) = (x * x, y * y);
    // t = e^s balances the decay at t -> 0 and t -> infinity.
    let integrand = |s: f64| {
        let t = s.exp();
        a * t.sqrt() * t / (a * a * t * t + x2) * (-(c * t + 0.25 * y2 / t)).exp()
    };
    quadrature::integrate(integrand, -30.0, 30.0, tol, QUAD_BUDGET).map(|q| q.value)
}

/// Quadrature kernel summed over the periodic images `(x + 2 n lx, y + 2 m ly)`,
/// `|n| <= x_images`, `|m| <= 1`, for comparison with [`kernel_field`].
pub fn kernel_quadrature_periodic(
    x: f64,
    y: f64,
    params: &Params,
    tol: f64,
    grid: &Grid2D,
    x_images: usize,
) -> Result<f64> {
    let spec = KernelSpec::new(*params)?;
    let n = x_images as i64;
    let mut total = 0.0;
    for my in -1i64..=1 {
        for nx in -n..=n {
            let xs = x + 2.0 * nx as f64 * grid.lx();
            let ys = y + 2.0 * my as f64 * grid.ly();
            total += quadrature_value(xs, ys, &spec.canonical, tol)?;
        }
    }
    Ok(total)
}

/// Agreement of the two kernel constructions up to one constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    /// Least-squares `C` in `quadrature = C * field`.
    pub constant: f64,
    /// Coefficient of variation of the pointwise ratios.
    pub cv: f64,
    pub ratios: Vec<f64>,
}

/// Compares [`kernel_field`] with the image-summed quadrature at grid indices.
pub fn cross_validate(
    spec: &KernelSpec,
    grid: &Grid2D,
    points: &[(usize, usize)],
    tol: f64,
    x_images: usize,
) -> Result<CrossValidation> {
    if points.len() < 2 {
        return Err(Error::WindowTooSmall {
            points: points.len(),
            required: 2,
        });
    }
    let k = kernel_field(spec, grid);
    let mut field = Vec::with_capacity(points.len());
    let mut quad = Vec::with_capacity(points.len());
    for &(i, j) in points {
        field.push(k.get(i, j));
        quad.push(kernel_quadrature_periodic(
            grid.x(i),
            grid.y(j),
            spec.params(),
            tol,
            grid,
            x_images,
        )?);
    }
    let constant = quad.iter().zip(&field).map(|(q, f)| q * f).sum::<f64>()
        / field.iter().map(|f| f * f).sum::<f64>();
    let ratios: Vec<f64> = quad.iter().zip(&field).map(|(q, f)| q / f).collect();
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(CrossValidation {
        constant,
        cv: var.sqrt() / mean.abs(),
        ratios,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDecayFit {
    /// Slope of `log ||K(., y)||_{L1_x}` against `|y|`.
    pub slope_y_exp: f64,
    /// Slope of `log K(x, 0)` against `log |x|`.
    pub slope_x_alg: f64,
}

/// Minimum number of samples in a decay-fit window.
pub const MIN_FIT_POINTS: usize = 10;

/// Grid indices on the positive half-axis with `2 <= coord <= half_width / 2`.
pub(crate) fn fit_window(coords: &[f64], half_width: f64) -> Result<Vec<usize>> {
    let idx: Vec<usize> = coords
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= 2.0 && v <= 0.5 * half_width)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::WindowTooSmall {
            points: idx.len(),
            required: MIN_FIT_POINTS,
        });
    }
    Ok(idx)
}

pub fn kernel_decay_fit(spec: &KernelSpec, grid: &Grid2D) -> Result<KernelDecayFit> {
    let xs = grid.xs();
    let ys = grid.ys();
    let wx = fit_window(&xs, grid.lx())?;
    let wy = fit_window(&ys, grid.ly())?;
    let k = kernel_field(spec, grid);
    let v = k.values();
    let j0 = grid.ny() / 2;
    let mut ypts = Vec::with_capacity(wy.len());
    for &j in &wy {
        let l1: f64 = v.column(j).iter().map(|z| z.abs()).sum::<f64>() * grid.dx();
        ypts.push((ys[j], l1.ln()));
    }
    let mut xpts = Vec::with_capacity(wx.len());
    for &i in &wx {
        let val = v[(i, j0)];
        if val <= 0.0 {
            return Err(Error::Degenerate(format!(
                "kernel not positive at x = {} on the propagation axis",
                xs[i]
            )));
        }
        xpts.push((xs[i].ln(), val.ln()));
    }
    Ok(KernelDecayFit {
        slope_y_exp: fit::line(&ypts)?.slope,
        slope_x_alg: fit::line(&xpts)?.slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{integrate, to_spectrum};
    use std::f64::consts::PI;

    fn spec(c: f64) -> KernelSpec {
        KernelSpec::new(Params::new(1.0, -1.0, 1.0, c).unwrap()).unwrap()
    }

    #[test]
    fn regime_is_checked() {
        assert!(KernelSpec::new(Params::new(1.0, 1.0, 1.0, 1.0).unwrap()).is_err());
        assert!(KernelSpec::new(Params::new(1.0, -1.0, -1.0, 1.0).unwrap()).is_err());
        // Mirror of the canonical branch.
        assert!(KernelSpec::new(Params::new(1.0, 1.0, -1.0, -1.0).unwrap()).is_ok());
    }

    #[test]
    fn zero_mode_and_mean() {
        let g = Grid2D::new(64, 32, 10.0, 4.0).unwrap();
        let k = kernel_field(&spec(2.0), &g);
        let s = to_spectrum(&k);
        assert!((s.coeffs()[(0, 0)].re * g.cell() - 0.5).abs() < 1e-12);
        let mean = integrate(&k) / g.area();
        assert!((mean - 1.0 / (2.0 * g.area())).abs() < 1e-12 * mean);
    }

    #[test]
    fn field_is_even_positive_and_peaked() {
        let g = Grid2D::new(512, 128, 20.0, 6.0).unwrap();
        let k = kernel_field(&spec(1.0), &g);
        let peak = k.get(256, 64);
        assert_eq!(k.argmax_abs(), (256, 64));
        for i in 0..512 {
            for j in 0..128 {
                let v = k.get(i, j);
                assert!((v - k.get((512 - i) % 512, j)).abs() <= 1e-12 * peak);
                assert!((v - k.get(i, (128 - j) % 128)).abs() <= 1e-12 * peak);
                assert!(v > -1e-10 * peak, "K({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn single_mode_response() {
        let g = Grid2D::new(64, 16, PI, 2.0).unwrap();
        let k = 3.0;
        let src = Field::from_fn(g, |x, _| (k * x).cos());
        let out = convolve_kernel(&src, &spec(1.5));
        let back = apply_operator(&out, &spec(1.5));
        for n in 0..g.len() {
            assert!((out.as_slice()[n] - src.as_slice()[n] / (1.5 + k)).abs() < 1e-13);
            assert!((back.as_slice()[n] - src.as_slice()[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn point_source_reproduces_kernel() {
        let g = Grid2D::new(64, 32, 8.0, 4.0).unwrap();
        let mut delta = Field::zeros(g);
        delta.values_mut()[(32, 16)] = 1.0 / g.cell();
        let out = convolve_kernel(&delta, &spec(1.0));
        let k = kernel_field(&spec(1.0), &g);
        let peak = k.get(32, 16);
        for n in 0..g.len() {
            assert!((out.as_slice()[n] - k.as_slice()[n]).abs() < 1e-12 * peak);
        }
    }

    #[test]
    fn convolution_preserves_positivity() {
        let g = Grid2D::new(256, 64, 20.0, 6.0).unwrap();
        let src = Field::from_fn(g, |x, y| (-(x - 1.0).powi(2) - 2.0 * y * y).exp() + 0.5 * (-(x + 4.0).powi(2)).exp());
        let out = convolve_kernel(&src, &spec(1.0));
        let m = out.max_abs();
        assert!(out.as_slice().iter().all(|&v| v > -1e-10 * m));
    }

    #[test]
    fn quadrature_matches_closed_form_on_axis() {
        // x = 0: int |alpha|^{-1} t^{-3/2} e^{-ct - y^2/4t} dt = sqrt(pi) 2 e^{-sqrt(c)|y|} / |y|.
        let p = Params::new(1.0, -1.0, 1.0, 1.0).unwrap();
        for y in [0.5, 1.0, 3.0] {
            let q = kernel_quadrature(0.0, y, &p, 1e-12).unwrap();
            let exact = 2.0 * PI.sqrt() * (-y).exp() / y;
            assert!((q - exact).abs() < 1e-10 * exact, "y = {y}: {q} vs {exact}");
        }
    }

    #[test]
    fn quadrature_properties() {
        let p = Params::new(1.0, -1.0, 1.0, 1.0).unwrap();
        let v = |y| kernel_quadrature(1.0, y, &p, 1e-10).unwrap();
        assert!(v(1.0) > v(2.0) && v(2.0) > v(3.0));
        let a = kernel_quadrature(2.0, 3.0, &p, 1e-10).unwrap();
        let b = kernel_quadrature(-2.0, 3.0, &p, 1e-10).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
        assert!(matches!(kernel_quadrature(0.0, 0.0, &p, 1e-8), Err(Error::Domain(_))));
    }

    #[test]
    fn quadrature_l1_norm_in_x() {
        // int K(x, y) dx = e^{-sqrt(c)|y|} / (2 sqrt(c)) once the constant
        // 1 / (2 pi^{3/2}) is restored; integrate the quadrature in x.
        let p = Params::new(1.0, -1.0, 1.0, 4.0).unwrap();
        let y: f64 = 1.5;
        let inner = |x: f64| kernel_quadrature(x, y, &p, 1e-11).unwrap();
        // x = sinh(s) keeps the x^{-2} tail integrable on a finite interval.
        let q = quadrature::integrate(|s: f64| inner(s.sinh()) * s.cosh(), -25.0, 25.0, 1e-9, 20_000).unwrap();
        let l1 = q.value / (2.0 * PI.powf(1.5));
        let exact = (-2.0 * y).exp() / 4.0;
        assert!((l1 - exact).abs() < 1e-7 * exact, "{l1} vs {exact}");
    }

    #[test]
    fn decay_fit_window_is_checked() {
        let g = Grid2D::new(32, 32, 4.0, 4.0).unwrap();
        assert!(matches!(
            kernel_decay_fit(&spec(1.0), &g),
            Err(Error::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn decay_rates() {
        for (c, target) in [(1.0, -1.0), (4.0, -2.0)] {
            let g = Grid2D::new(1024, 256, 50.0, 8.0).unwrap();
            let fit = kernel_decay_fit(&spec(c), &g).unwrap();
            assert!((fit.slope_y_exp - target).abs() <= 0.1 * target.abs(), "{fit:?}");
            assert!((-2.5..=-1.5).contains(&fit.slope_x_alg), "{fit:?}");
        }
    }
}
