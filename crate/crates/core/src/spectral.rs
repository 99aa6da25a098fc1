//! Periodic grids, real fields and their half-spectra.
//!
//! The box is `[-lx, lx) x [-ly, ly)` sampled at `x_i = (i - nx/2) dx`,
//! `y_j = (j - ny/2) dy`, so the origin sits at index `(nx/2, ny/2)` and
//! the point set is symmetric under `i -> (nx - i) % nx`.
//!
//! The forward transform is unnormalised; the inverse divides by `nx * ny`.
//! Spectra store the non-redundant half `nx x (ny/2 + 1)`. Odd multipliers
//! (derivatives of odd order, the Hilbert transform) vanish on the Nyquist
//! mode of the axis they act on; even multipliers keep it.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Deserialize)]
struct GridRepr {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl TryFrom<GridRepr> for Grid2D {
    type Error = Error;
    fn try_from(g: GridRepr) -> Result<Self> {
        Grid2D::new(g.nx, g.ny, g.lx, g.ly)
    }
}

/// Uniform periodic grid on `[-lx, lx) x [-ly, ly)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr")]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid2D {
    /// Both point counts must be even and at least 8; half-lengths positive.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be even and >= 8"
                )));
            }
        }
        for (name, l) in [("lx", lx), ("ly", ly)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} = {l} must be positive")));
            }
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn dx(&self) -> f64 {
        2.0 * self.lx / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        2.0 * self.ly / self.ny as f64
    }
    /// Area element `dx * dy`.
    pub fn cell(&self) -> f64 {
        self.dx() * self.dy()
    }
    pub fn area(&self) -> f64 {
        4.0 * self.lx * self.ly
    }
    /// Number of stored y-modes in a half spectrum.
    pub fn nyh(&self) -> usize {
        self.ny / 2 + 1
    }
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - (self.nx / 2) as f64) * self.dx()
    }
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - (self.ny / 2) as f64) * self.dy()
    }
    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    /// Signed x-mode number of spectral row `r`.
    pub fn mode_x(&self, r: usize) -> i64 {
        signed_mode(r, self.nx)
    }
    /// x-wavenumber of spectral row `r`; the Nyquist row is reported as `+pi/dx`.
    pub fn kx(&self, r: usize) -> f64 {
        let s = self.mode_x(r);
        std::f64::consts::PI * s.unsigned_abs() as f64 / self.lx * sign_of(s, r == self.nx / 2)
    }
    /// x-wavenumber for odd multipliers: zero on the Nyquist row.
    pub fn kx_odd(&self, r: usize) -> f64 {
        if r == self.nx / 2 {
            0.0
        } else {
            self.kx(r)
        }
    }
    /// y-wavenumber of half-spectrum column `m` (`0 <= m <= ny/2`).
    pub fn ky(&self, m: usize) -> f64 {
        std::f64::consts::PI * m as f64 / self.ly
    }
    /// y-wavenumber for odd multipliers: zero on the Nyquist column.
    pub fn ky_odd(&self, m: usize) -> f64 {
        if m == self.ny / 2 {
            0.0
        } else {
            self.ky(m)
        }
    }
    pub fn is_nyquist_x(&self, r: usize) -> bool {
        r == self.nx / 2
    }
    pub fn is_nyquist_y(&self, m: usize) -> bool {
        m == self.ny / 2
    }

    fn check(&self, other: &Grid2D) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::SizeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        if self != other {
            return Err(Error::InvalidGrid(format!(
                "box mismatch: [{}, {}] vs [{}, {}]",
                self.lx, self.ly, other.lx, other.ly
            )));
        }
        Ok(())
    }
}

fn signed_mode(r: usize, n: usize) -> i64 {
    if r < n / 2 {
        r as i64
    } else {
        r as i64 - n as i64
    }
}

fn sign_of(s: i64, nyquist: bool) -> f64 {
    if nyquist || s >= 0 {
        1.0
    } else {
        -1.0
    }
}

/// Real-valued grid function.
#[derive(Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    values: Array2<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("shape", &self.grid.shape())
            .field("lx", &self.grid.lx)
            .field("ly", &self.grid.ly)
            .finish_non_exhaustive()
    }
}

impl Field {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn from_values(grid: Grid2D, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::SizeMismatch {
                expected: grid.shape(),
                actual: values.dim(),
            });
        }
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        Ok(Self { grid, values })
    }

    pub fn from_vec(grid: Grid2D, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.shape(),
                actual: (data.len() / grid.ny, data.len() % grid.ny),
            });
        }
        let values = Array2::from_shape_vec(grid.shape(), data)
            .map_err(|e| Error::InvalidGrid(e.to_string()))?;
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = grid.xs();
        let ys = grid.ys();
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(xs[i], ys[j]));
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }
    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }
    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        self.values.as_slice_mut().expect("standard layout")
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index of the entry with the largest absolute value.
    pub fn argmax_abs(&self) -> (usize, usize) {
        let (k, _) = self
            .as_slice()
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bk, bv), (k, v)| if v.abs() > bv { (k, v.abs()) } else { (bk, bv) });
        (k / self.grid.ny, k % self.grid.ny)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.mapv(f),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check(&other.grid)?;
        let mut out = self.clone();
        out.as_slice_mut()
            .iter_mut()
            .zip(other.as_slice())
            .for_each(|(a, &b)| *a = f(*a, b));
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.zip_map(other, |u, v| u + a * v)
    }

    /// Periodic index shift: `out[i, j] = self[i - di, j - dj]`.
    pub fn roll(&self, di: isize, dj: isize) -> Field {
        let (nx, ny) = self.grid.shape();
        let di = di.rem_euclid(nx as isize) as usize;
        let dj = dj.rem_euclid(ny as isize) as usize;
        let values = Array2::from_shape_fn((nx, ny), |(i, j)| {
            self.values[((i + nx - di) % nx, (j + ny - dj) % ny)]
        });
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Reflection about the grid origin along `axis`.
    pub fn reflect(&self, axis: Axis) -> Field {
        let (nx, ny) = self.grid.shape();
        let values = Array2::from_shape_fn((nx, ny), |(i, j)| match axis {
            Axis::X => self.values[((nx - i) % nx, j)],
            Axis::Y => self.values[(i, (ny - j) % ny)],
        });
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Discrete `L2` norm, `sqrt(sum f^2 dx dy)`.
    pub fn l2_norm(&self) -> f64 {
        (self.as_slice().iter().map(|v| v * v).sum::<f64>() * self.grid.cell()).sqrt()
    }
}

/// Half-spectrum of a real field: rows are x-modes in FFT order, columns
/// are the non-negative y-modes `0..=ny/2`.
#[derive(Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid2D,
    coeffs: Array2<Complex64>,
}

impl fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrum")
            .field("shape", &self.coeffs.dim())
            .finish_non_exhaustive()
    }
}

impl Spectrum {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            coeffs: Array2::from_elem((grid.nx, grid.nyh()), ZERO),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    /// Coefficient at full-spectrum index `(r, m)` with `0 <= m < ny`,
    /// reconstructed from Hermitian symmetry when `m > ny/2`.
    pub fn coeff(&self, r: usize, m: usize) -> Complex64 {
        let (nx, ny) = self.grid.shape();
        if m <= ny / 2 {
            self.coeffs[(r, m)]
        } else {
            self.coeffs[((nx - r) % nx, ny - m)].conj()
        }
    }

    /// Multiplies every stored mode by `sym(row, col)`.
    pub fn apply(&mut self, sym: impl Fn(usize, usize) -> Complex64) {
        for ((r, m), c) in self.coeffs.indexed_iter_mut() {
            *c *= sym(r, m);
        }
    }

    pub fn apply_real(&mut self, sym: impl Fn(usize, usize) -> f64) {
        for ((r, m), c) in self.coeffs.indexed_iter_mut() {
            *c *= sym(r, m);
        }
    }

    /// Sum of `w(r, m) |F|^2` over the full spectrum, counting each stored
    /// interior column twice.
    pub fn weighted_power(&self, w: impl Fn(usize, usize) -> f64) -> f64 {
        self.weighted_cross(self, w)
    }

    /// Sum of `w(r, m) Re(F conj G)` over the full spectrum. For an even real
    /// weight this is `N / (dx dy)` times the physical inner product of the
    /// multiplied fields.
    pub fn weighted_cross(&self, other: &Spectrum, w: impl Fn(usize, usize) -> f64) -> f64 {
        let ny = self.grid.ny;
        let mut total = 0.0;
        for ((r, m), a) in self.coeffs.indexed_iter() {
            let mult = if m == 0 || m == ny / 2 { 1.0 } else { 2.0 };
            let b = other.coeffs[(r, m)];
            total += mult * w(r, m) * (a.re * b.re + a.im * b.im);
        }
        total
    }

    /// Physical inner product `int f g dx dy` of the fields behind two spectra,
    /// with the even real multiplier `w` applied once.
    pub fn inner_with(&self, other: &Spectrum, w: impl Fn(usize, usize) -> f64) -> f64 {
        self.weighted_cross(other, w) * self.grid.cell() / self.grid.len() as f64
    }

    /// Translates the underlying field by `(sx, sy)`: `f(x, y) -> f(x - sx, y - sy)`.
    /// Nyquist modes, whose sign is ambiguous, get the real part of the phase.
    pub fn translate(&mut self, sx: f64, sy: f64) {
        let g = self.grid;
        let px: Vec<Complex64> = (0..g.nx)
            .map(|r| phase(g.kx(r), g.is_nyquist_x(r), sx))
            .collect();
        let py: Vec<Complex64> = (0..g.nyh())
            .map(|m| phase(g.ky(m), g.is_nyquist_y(m), sy))
            .collect();
        self.apply(|r, m| px[r] * py[m]);
    }
}

fn phase(k: f64, nyquist: bool, s: f64) -> Complex64 {
    if nyquist {
        Complex64::new((k * s).cos(), 0.0)
    } else {
        Complex64::from_polar(1.0, -k * s)
    }
}

struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

type PlanCache = Mutex<HashMap<(usize, usize), Arc<Plans>>>;

fn plans(nx: usize, ny: usize) -> Arc<Plans> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry((nx, ny))
        .or_insert_with(|| {
            let mut real = RealFftPlanner::<f64>::new();
            let mut cplx = FftPlanner::<f64>::new();
            Arc::new(Plans {
                r2c: real.plan_fft_forward(ny),
                c2r: real.plan_fft_inverse(ny),
                fwd: cplx.plan_fft_forward(nx),
                inv: cplx.plan_fft_inverse(nx),
            })
        })
        .clone()
}

/// Unnormalised forward transform.
pub fn to_spectrum(f: &Field) -> Spectrum {
    let g = *f.grid();
    let (nx, ny) = g.shape();
    let nyh = g.nyh();
    let p = plans(nx, ny);
    let mut half = vec![ZERO; nx * nyh];
    let mut row = vec![0.0; ny];
    let mut scratch = p.r2c.make_scratch_vec();
    for (src, dst) in f.as_slice().chunks_exact(ny).zip(half.chunks_exact_mut(nyh)) {
        row.copy_from_slice(src);
        p.r2c
            .process_with_scratch(&mut row, dst, &mut scratch)
            .expect("buffer lengths match plan");
    }
    let mut cols = vec![ZERO; nx * nyh];
    transpose::transpose(&half, &mut cols, nyh, nx);
    p.fwd.process(&mut cols);
    transpose::transpose(&cols, &mut half, nx, nyh);
    Spectrum {
        grid: g,
        coeffs: Array2::from_shape_vec((nx, nyh), half).expect("shape"),
    }
}

/// Normalised inverse transform. Imaginary parts that a real field cannot
/// carry (self-conjugate modes) are discarded.
pub fn to_field(s: &Spectrum) -> Field {
    let g = *s.grid();
    let (nx, ny) = g.shape();
    let nyh = g.nyh();
    let p = plans(nx, ny);
    let src = s.coeffs.as_slice().expect("standard layout");
    let mut cols = vec![ZERO; nx * nyh];
    transpose::transpose(src, &mut cols, nyh, nx);
    p.inv.process(&mut cols);
    let mut half = vec![ZERO; nx * nyh];
    transpose::transpose(&cols, &mut half, nx, nyh);
    let mut out = vec![0.0; nx * ny];
    let mut scratch = p.c2r.make_scratch_vec();
    let norm = 1.0 / (nx * ny) as f64;
    for (src, dst) in half.chunks_exact_mut(nyh).zip(out.chunks_exact_mut(ny)) {
        src[0].im = 0.0;
        src[nyh - 1].im = 0.0;
        p.c2r
            .process_with_scratch(src, dst, &mut scratch)
            .expect("buffer lengths match plan");
        dst.iter_mut().for_each(|v| *v *= norm);
    }
    Field {
        grid: g,
        values: Array2::from_shape_vec((nx, ny), out).expect("shape"),
    }
}

/// Applies a real Fourier multiplier.
pub fn apply_real_symbol(f: &Field, sym: impl Fn(usize, usize) -> f64) -> Field {
    let mut s = to_spectrum(f);
    s.apply_real(sym);
    to_field(&s)
}

/// Applies a complex Fourier multiplier.
pub fn apply_symbol(f: &Field, sym: impl Fn(usize, usize) -> Complex64) -> Field {
    let mut s = to_spectrum(f);
    s.apply(sym);
    to_field(&s)
}

/// Hilbert transform in x, symbol `-i sgn(kx)`.
pub fn hilbert_x(f: &Field) -> Field {
    let g = *f.grid();
    apply_symbol(f, |r, _| {
        let k = g.kx_odd(r);
        if k == 0.0 {
            ZERO
        } else {
            Complex64::new(0.0, -k.signum())
        }
    })
}

/// `|D_x|^{1/2}`, symbol `|kx|^{1/2}`.
pub fn dx_half(f: &Field) -> Field {
    let g = *f.grid();
    apply_real_symbol(f, |r, _| g.kx(r).abs().sqrt())
}

/// `|D_x| = H d/dx` as a single even multiplier `|kx|`.
///
/// Unlike `hilbert_x(deriv(f, X, 1))` this keeps the Nyquist row, so that
/// `|D_x| = |D_x|^{1/2} |D_x|^{1/2}` holds exactly on the grid.
pub fn abs_dx(f: &Field) -> Field {
    let g = *f.grid();
    apply_real_symbol(f, |r, _| g.kx(r).abs())
}

/// Symbol of `d^order / d axis^order` at half-spectrum index `(r, m)`.
pub fn deriv_symbol(g: &Grid2D, axis: Axis, order: u32, r: usize, m: usize) -> Complex64 {
    let k = match (axis, order % 2 == 1) {
        (Axis::X, true) => g.kx_odd(r),
        (Axis::X, false) => g.kx(r),
        (Axis::Y, true) => g.ky_odd(m),
        (Axis::Y, false) => g.ky(m),
    };
    let ik = Complex64::new(0.0, k);
    ik.powu(order)
}

/// Spectral derivative of order 1 to 4 along `axis`.
pub fn deriv(f: &Field, axis: Axis, order: u32) -> Result<Field> {
    if !(1..=4).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let g = *f.grid();
    Ok(apply_symbol(f, |r, m| deriv_symbol(&g, axis, order, r, m)))
}

/// Rectangle-rule integral, spectrally exact for periodic band-limited data.
pub fn integrate(f: &Field) -> f64 {
    f.as_slice().iter().sum::<f64>() * f.grid().cell()
}

pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    f.grid().check(g.grid())?;
    Ok(f.as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * f.grid().cell())
}

/// Periodic translation `f(x, y) -> f(x - sx, y - sy)` by Fourier phase shift.
pub fn translate(f: &Field, sx: f64, sy: f64) -> Field {
    let mut s = to_spectrum(f);
    s.translate(sx, sy);
    to_field(&s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(g: Grid2D, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        Field::from_vec(g, data).unwrap()
    }

    /// Naive O(N^2) DFT used as the reference transform.
    fn naive_dft(f: &Field) -> Array2<Complex64> {
        let (nx, ny) = f.grid().shape();
        Array2::from_shape_fn((nx, ny / 2 + 1), |(r, m)| {
            let mut acc = ZERO;
            for i in 0..nx {
                for j in 0..ny {
                    let th = -2.0 * PI * ((r * i) as f64 / nx as f64 + (m * j) as f64 / ny as f64);
                    acc += f.get(i, j) * Complex64::from_polar(1.0, th);
                }
            }
            acc
        })
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid2D::new(7, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 2, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn grid_points_are_symmetric() {
        let g = Grid2D::new(16, 12, 3.0, 2.0).unwrap();
        assert_eq!(g.x(8), 0.0);
        assert_eq!(g.y(6), 0.0);
        for i in 1..16 {
            assert_eq!(g.x(i), -g.x(16 - i));
        }
        assert_eq!(g.x(0), -3.0);
    }

    #[test]
    fn wavenumbers_are_antisymmetric() {
        let g = Grid2D::new(16, 8, 2.5, 1.0).unwrap();
        assert_eq!(g.kx(0), 0.0);
        for r in 1..16 {
            if r != 8 {
                assert_eq!(g.kx(r), -g.kx(16 - r));
            }
        }
        assert!((g.kx(1) - PI / 2.5).abs() < 1e-15);
        assert_eq!(g.kx_odd(8), 0.0);
        assert_eq!(g.ky_odd(4), 0.0);
    }

    #[test]
    fn transform_matches_naive_dft() {
        let g = Grid2D::new(8, 10, 1.0, 2.0).unwrap();
        let f = random_field(g, 1);
        let s = to_spectrum(&f);
        let reference = naive_dft(&f);
        for (a, b) in s.coeffs().iter().zip(reference.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let g = Grid2D::new(32, 16, 4.0, 3.0).unwrap();
        let f = random_field(g, 2);
        let back = to_field(&to_spectrum(&f));
        for (a, b) in f.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn parseval_holds() {
        let g = Grid2D::new(16, 10, 2.0, 1.5).unwrap();
        let f = random_field(g, 3);
        let s = to_spectrum(&f);
        let phys = inner(&f, &f).unwrap();
        let spec = s.inner_with(&s, |_, _| 1.0);
        assert!((phys - spec).abs() < 1e-12 * phys);
    }

    #[test]
    fn full_coefficient_uses_hermitian_symmetry() {
        let g = Grid2D::new(8, 8, 1.0, 1.0).unwrap();
        let f = random_field(g, 4);
        let s = to_spectrum(&f);
        let (nx, ny) = (8, 8);
        for r in 0..nx {
            for m in 0..ny {
                let mut acc = ZERO;
                for i in 0..nx {
                    for j in 0..ny {
                        let th = -2.0 * PI * ((r * i) as f64 / nx as f64 + (m * j) as f64 / ny as f64);
                        acc += f.get(i, j) * Complex64::from_polar(1.0, th);
                    }
                }
                assert!((s.coeff(r, m) - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_of_trig_modes_are_exact() {
        let g = Grid2D::new(32, 16, PI, PI).unwrap();
        let f = Field::from_fn(g, |x, y| (3.0 * x).sin() * (2.0 * y).cos());
        let fx = deriv(&f, Axis::X, 1).unwrap();
        let fyy = deriv(&f, Axis::Y, 2).unwrap();
        let fx4 = deriv(&f, Axis::X, 4).unwrap();
        let ex = Field::from_fn(g, |x, y| 3.0 * (3.0 * x).cos() * (2.0 * y).cos());
        for k in 0..g.len() {
            assert!((fx.as_slice()[k] - ex.as_slice()[k]).abs() < 1e-12);
            assert!((fyy.as_slice()[k] + 4.0 * f.as_slice()[k]).abs() < 1e-12);
            assert!((fx4.as_slice()[k] - 81.0 * f.as_slice()[k]).abs() < 1e-10);
        }
        assert!(matches!(deriv(&f, Axis::X, 5), Err(Error::UnsupportedOrder(5))));
        assert!(matches!(deriv(&f, Axis::X, 0), Err(Error::UnsupportedOrder(0))));
    }

    #[test]
    fn hilbert_of_cosine_is_sine() {
        let g = Grid2D::new(32, 8, PI, PI).unwrap();
        let f = Field::from_fn(g, |x, y| (2.0 * x).cos() * (1.0 + y.cos()));
        let h = hilbert_x(&f);
        let e = Field::from_fn(g, |x, y| (2.0 * x).sin() * (1.0 + y.cos()));
        for k in 0..g.len() {
            assert!((h.as_slice()[k] - e.as_slice()[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn hilbert_squared_is_minus_identity_off_mean_and_nyquist() {
        let g = Grid2D::new(16, 8, 2.0, 2.0).unwrap();
        let f = random_field(g, 5);
        let mut s = to_spectrum(&f);
        s.apply_real(|r, _| if r == 0 || r == 8 { 0.0 } else { 1.0 });
        let f0 = to_field(&s);
        let hh = hilbert_x(&hilbert_x(&f0));
        for k in 0..g.len() {
            assert!((hh.as_slice()[k] + f0.as_slice()[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn half_derivative_composes_to_abs_derivative() {
        let g = Grid2D::new(32, 8, 3.0, 2.0).unwrap();
        let f = random_field(g, 6);
        let twice = dx_half(&dx_half(&f));
        let once = abs_dx(&f);
        for k in 0..g.len() {
            assert!((twice.as_slice()[k] - once.as_slice()[k]).abs() < 1e-11);
        }
        let n2 = dx_half(&f).l2_norm().powi(2);
        let hx = inner(&f, &abs_dx(&f)).unwrap();
        assert!((n2 - hx).abs() < 1e-11 * n2);
    }

    #[test]
    fn translation_by_grid_steps_is_a_roll() {
        let g = Grid2D::new(16, 8, 2.0, 1.0).unwrap();
        let f = random_field(g, 7);
        let t = translate(&f, 3.0 * g.dx(), -2.0 * g.dy());
        let r = f.roll(3, -2);
        for k in 0..g.len() {
            assert!((t.as_slice()[k] - r.as_slice()[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn reflection_is_an_involution() {
        let g = Grid2D::new(8, 10, 1.0, 1.0).unwrap();
        let f = random_field(g, 8);
        assert_eq!(f.reflect(Axis::X).reflect(Axis::X), f);
        assert_eq!(f.reflect(Axis::Y).reflect(Axis::Y), f);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Field::zeros(Grid2D::new(8, 8, 1.0, 1.0).unwrap());
        let b = Field::zeros(Grid2D::new(8, 10, 1.0, 1.0).unwrap());
        assert!(matches!(inner(&a, &b), Err(Error::SizeMismatch { .. })));
        assert!(Field::from_values(*a.grid(), Array2::zeros((4, 4))).is_err());
    }

    #[test]
    fn debug_prints_shape_only() {
        let f = Field::zeros(Grid2D::new(8, 10, 1.0, 1.0).unwrap());
        let s = format!("{f:?}");
        assert!(s.contains("(8, 10)"));
        assert!(s.len() < 80);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn hilbert_x_d_is_nonnegative(seed in any::<u64>(), nx in 4usize..10, ny in 4usize..8) {
                let g = Grid2D::new(2 * nx, 2 * ny, 1.7, 0.9).unwrap();
                let f = random_field(g, seed);
                let hd = hilbert_x(&deriv(&f, Axis::X, 1).unwrap());
                prop_assert!(inner(&f, &hd).unwrap() >= -1e-12);
            }

            #[test]
            fn round_trip_random(seed in any::<u64>(), nx in 4usize..12, ny in 4usize..12) {
                let g = Grid2D::new(2 * nx, 2 * ny, 1.0, 2.0).unwrap();
                let f = random_field(g, seed);
                let back = to_field(&to_spectrum(&f));
                for (a, b) in f.as_slice().iter().zip(back.as_slice()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
