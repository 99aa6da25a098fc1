//! Time integration by integrating-factor RK4 and the orbital-stability
//! experiment.
//!
//! In Fourier variables the linear part is `u^_t = -i omega u^` with
//! `omega(xi, eta) = alpha xi |xi| - eps xi eta^2`, applied exactly. The
//! nonlinear term `u^p u_x` is advanced by classical RK4 in the moving frame.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{energy, mass, Params, Power};
use crate::solver::SolitaryWave;
use crate::spectral::{to_field, to_spectrum, Field, Grid2D, Spectrum};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    /// Zero modes with `|q| >= n/3` in the nonlinear term.
    #[default]
    TwoThirds,
    /// Evaluate products on a grid refined by `ceil((p + 2) / 2)`; integer `p` only.
    ZeroPad,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    pub dealias: Dealias,
    /// Steps between recorded samples; the final state is always recorded.
    pub record_every: usize,
    /// Integrate backwards in time.
    pub reverse: bool,
    /// Wave to measure the orbital distance from.
    #[serde(skip)]
    pub reference: Option<Field>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dealias: Dealias::TwoThirds,
            record_every: 10,
            reverse: false,
            reference: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolveReport {
    /// Elapsed time of each sample.
    pub times: Vec<f64>,
    pub mass_drift: Vec<f64>,
    pub energy_drift: Vec<f64>,
    /// Empty unless a reference wave was supplied.
    pub orbital_distance: Vec<f64>,
    pub final_field: Field,
    pub dt: f64,
    pub steps: usize,
    pub dealias_rule: String,
}

/// Blow-up threshold relative to the initial maximum.
pub const BLOWUP_FACTOR: f64 = 1e6;

struct Stepper {
    grid: Grid2D,
    fine: Option<Grid2D>,
    omega: Array2<f64>,
    keep: Array2<bool>,
    kx: Vec<f64>,
    kx_fine: Vec<f64>,
    p_pow: Power,
    p1_pow: Power,
    inv_p2: f64,
    skew: bool,
}

impl Stepper {
    fn new(grid: Grid2D, params: &Params, dealias: Dealias) -> Result<Self> {
        let integer = params.p.fract() == 0.0;
        let fine = match dealias {
            Dealias::TwoThirds => None,
            Dealias::ZeroPad => {
                if !integer {
                    return Err(Error::Precondition(format!(
                        "zero-padding needs an integer p, got {}",
                        params.p
                    )));
                }
                let k = ((params.p + 2.0) / 2.0).ceil() as usize;
                Some(Grid2D::new(
                    k * grid.nx(),
                    k * grid.ny(),
                    grid.lx(),
                    grid.ly(),
                )?)
            }
        };
        let (nx, nyh) = (grid.nx(), grid.nyh());
        let omega = Array2::from_shape_fn((nx, nyh), |(r, m)| {
            let xi = grid.kx_odd(r);
            let eta = grid.ky(m);
            params.alpha * xi * xi.abs() - params.epsilon * xi * eta * eta
        });
        let keep = Array2::from_shape_fn((nx, nyh), |(r, m)| {
            fine.is_some() || (3 * grid.mode_x(r).unsigned_abs() as usize) < nx && 3 * m < grid.ny()
        });
        let kx = (0..nx).map(|r| grid.kx_odd(r)).collect();
        let kx_fine = fine
            .map(|f| (0..f.nx()).map(|r| f.kx_odd(r)).collect())
            .unwrap_or_default();
        Ok(Self {
            grid,
            fine,
            omega,
            keep,
            kx,
            kx_fine,
            p_pow: params.power(0),
            p1_pow: params.power(1),
            inv_p2: 1.0 / (params.p + 2.0),
            skew: integer,
        })
    }

    fn phases(&self, h: f64) -> Array2<Complex64> {
        self.omega.mapv(|w| Complex64::from_polar(1.0, -w * h))
    }

    /// Fourier transform of `-u^p u_x`, dealiased.
    fn rhs(&self, uhat: &Spectrum) -> Spectrum {
        let (work, kx) = match &self.fine {
            Some(f) => (pad(uhat, f), &self.kx_fine),
            None => (uhat.clone(), &self.kx),
        };
        let u = to_field(&work);
        let mut dx = work;
        dx.apply(|r, _| Complex64::new(0.0, kx[r]));
        let ux = to_field(&dx);
        let prod = u.zip_map(&ux, |a, b| self.p_pow.eval(a) * b).expect("same grid");
        let mut out = to_spectrum(&prod);
        if self.skew {
            let flux = to_spectrum(&self.p1_pow.field(&u));
            let c = -self.inv_p2;
            for ((r, _), (o, f)) in out
                .coeffs_mut()
                .indexed_iter_mut()
                .zip(flux.coeffs().iter())
                .map(|((ix, o), f)| (ix, (o, f)))
            {
                *o = c * (*o + Complex64::new(0.0, kx[r]) * f);
            }
        } else {
            out.coeffs_mut().mapv_inplace(|z| -z);
        }
        let mut coarse = match &self.fine {
            Some(_) => unpad(&out, &self.grid),
            None => out,
        };
        for (z, &k) in coarse.coeffs_mut().iter_mut().zip(self.keep.iter()) {
            if !k {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        coarse
    }

    fn step(&self, uhat: &Spectrum, h: f64, e_half: &Array2<Complex64>, e_full: &Array2<Complex64>) -> Spectrum {
        let lin = |s: &Spectrum, e: &Array2<Complex64>| {
            let mut o = s.clone();
            *o.coeffs_mut() *= e;
            o
        };
        let comb = |a: &Spectrum, b: &Spectrum, t: f64| {
            let mut o = a.clone();
            o.coeffs_mut().zip_mut_with(b.coeffs(), |x, y| *x += y * t);
            o
        };
        let k1 = self.rhs(uhat);
        let k2 = self.rhs(&lin(&comb(uhat, &k1, 0.5 * h), e_half));
        let u_half = lin(uhat, e_half);
        let k3 = self.rhs(&comb(&u_half, &k2, 0.5 * h));
        let k4 = self.rhs(&comb(&lin(uhat, e_full), &lin(&k3, e_half), h));
        let mut next = lin(uhat, e_full);
        let mid = comb(&k2, &k3, 1.0);
        let k1e = lin(&k1, e_full);
        let mide = lin(&mid, e_half);
        let w = h / 6.0;
        next.coeffs_mut()
            .zip_mut_with(k1e.coeffs(), |x, y| *x += y * w);
        next.coeffs_mut()
            .zip_mut_with(mide.coeffs(), |x, y| *x += y * (2.0 * w));
        next.coeffs_mut()
            .zip_mut_with(k4.coeffs(), |x, y| *x += y * w);
        next
    }
}

/// Copies the coarse modes into a finer grid's spectrum so that both
/// represent the same trigonometric interpolant. Nyquist modes are dropped.
fn pad(s: &Spectrum, fine: &Grid2D) -> Spectrum {
    let g = s.grid();
    let scale = fine.len() as f64 / g.len() as f64;
    let mut out = Spectrum::zeros(*fine);
    let c = out.coeffs_mut();
    for ((r, m), z) in s.coeffs().indexed_iter() {
        if g.is_nyquist_x(r) || g.is_nyquist_y(m) {
            continue;
        }
        let q = g.mode_x(r).rem_euclid(fine.nx() as i64) as usize;
        c[(q, m)] = z * scale;
    }
    out
}

fn unpad(s: &Spectrum, coarse: &Grid2D) -> Spectrum {
    let fine = s.grid();
    let scale = coarse.len() as f64 / fine.len() as f64;
    let mut out = Spectrum::zeros(*coarse);
    for ((r, m), z) in out.coeffs_mut().indexed_iter_mut() {
        if coarse.is_nyquist_x(r) || coarse.is_nyquist_y(m) {
            continue;
        }
        let q = coarse.mode_x(r).rem_euclid(fine.nx() as i64) as usize;
        *z = s.coeffs()[(q, m)] * scale;
    }
    out
}

fn blown_up(peak: f64, peak0: f64) -> bool {
    !peak.is_finite() || (peak0 > 0.0 && peak > BLOWUP_FACTOR * peak0)
}

fn drift(v: f64, v0: f64) -> f64 {
    if v0 == 0.0 {
        (v - v0).abs()
    } else {
        ((v - v0) / v0).abs()
    }
}

/// Integrates `u_t + u^p u_x + alpha H u_xx + eps u_xyy = 0` from `u0` over
/// `[0, t_end]`. The step is shortened so that a whole number of steps
/// reaches `t_end`.
pub fn evolve(u0: &Field, params: &Params, dt: f64, t_end: f64, opts: &EvolveOptions) -> Result<EvolveReport> {
    evolve_observed(u0, params, dt, t_end, opts, &mut |_, _| Ok(()))
}

/// [`evolve`] with a callback on every recorded sample (elapsed time and
/// field), e.g. for writing snapshots.
pub fn evolve_observed(
    u0: &Field,
    params: &Params,
    dt: f64,
    t_end: f64,
    opts: &EvolveOptions,
    observer: &mut dyn FnMut(f64, &Field) -> Result<()>,
) -> Result<EvolveReport> {
    params.validate()?;
    if !(dt > 0.0 && dt.is_finite() && t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Precondition(format!(
            "need dt > 0 and t_end >= 0 (got dt = {dt}, t_end = {t_end})"
        )));
    }
    if !u0.is_finite() {
        return Err(Error::NonFinite("initial field"));
    }
    let grid = *u0.grid();
    if !params.signed_powers_defined() && u0.as_slice().iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition(format!(
            "u^p is undefined for negative u when p = {}",
            params.p
        )));
    }
    if let Some(r) = &opts.reference {
        if r.grid() != &grid {
            return Err(Error::SizeMismatch {
                expected: grid.shape(),
                actual: r.grid().shape(),
            });
        }
    }
    let peak0 = u0.max_abs();
    let advect = params.power(0).eval(peak0).abs();
    let dmin = grid.dx().min(grid.dy());
    if dt * advect > 0.5 * dmin {
        return Err(Error::Precondition(format!(
            "dt * max|u|^p = {:.3e} exceeds half the grid spacing {:.3e}",
            dt * advect,
            0.5 * dmin
        )));
    }

    let steps = if t_end == 0.0 {
        0
    } else {
        (t_end / dt - 1e-9).ceil().max(1.0) as usize
    };
    let dt_eff = if steps == 0 { dt } else { t_end / steps as f64 };
    let h = if opts.reverse { -dt_eff } else { dt_eff };
    let stepper = Stepper::new(grid, params, opts.dealias)?;
    let e_half = stepper.phases(0.5 * h);
    let e_full = stepper.phases(h);
    let record_every = opts.record_every.max(1);

    let mass0 = mass(u0);
    let energy0 = energy(u0, params)?;
    let mut report = EvolveReport {
        times: Vec::new(),
        mass_drift: Vec::new(),
        energy_drift: Vec::new(),
        orbital_distance: Vec::new(),
        final_field: u0.clone(),
        dt: dt_eff,
        steps: 0,
        dealias_rule: match opts.dealias {
            Dealias::TwoThirds => "two-thirds".to_string(),
            Dealias::ZeroPad => format!(
                "zero-pad x{}",
                ((params.p + 2.0) / 2.0).ceil() as usize
            ),
        },
    };
    let mut record = |report: &mut EvolveReport, u: &Field, step: usize| -> Result<()> {
        observer(step as f64 * dt_eff, u)?;
        report.times.push(step as f64 * dt_eff);
        report.mass_drift.push(drift(mass(u), mass0));
        report.energy_drift.push(drift(energy(u, params)?, energy0));
        if let Some(r) = &opts.reference {
            report.orbital_distance.push(orbital_distance(u, r)?);
        }
        Ok(())
    };
    record(&mut report, u0, 0)?;

    let mut uhat = to_spectrum(u0);
    for n in 1..=steps {
        uhat = stepper.step(&uhat, h, &e_half, &e_full);
        let u = to_field(&uhat);
        let peak = u.max_abs();
        if blown_up(peak, peak0) {
            report.steps = n;
            report.final_field = u;
            return Err(Error::BlowUp {
                t: n as f64 * dt_eff,
                max_abs: peak,
                report: Box::new(report),
            });
        }
        if n % record_every == 0 || n == steps {
            record(&mut report, &u, n)?;
        }
        report.steps = n;
        report.final_field = u;
    }
    Ok(report)
}

fn z_weight(g: &Grid2D) -> impl Fn(usize, usize) -> f64 + '_ {
    move |r, m| 1.0 + g.kx(r).abs() + g.ky(m).powi(2)
}

/// `inf_r || u - phi(. - r) ||_Z`: exhaustive search over grid shifts by
/// cross-correlation, then one Newton step on a quadratic fit of the
/// correlation peak.
pub fn orbital_distance(u: &Field, phi: &Field) -> Result<f64> {
    let g = *u.grid();
    if phi.grid() != &g {
        return Err(Error::SizeMismatch {
            expected: g.shape(),
            actual: phi.grid().shape(),
        });
    }
    let uh = to_spectrum(u);
    let ph = to_spectrum(phi);
    let w = z_weight(&g);

    // corr[i, j] is proportional to <u, phi(. - (i dx, j dy))>_Z.
    let mut cross = Spectrum::zeros(g);
    for ((ix, c), (a, b)) in cross
        .coeffs_mut()
        .indexed_iter_mut()
        .zip(uh.coeffs().iter().zip(ph.coeffs().iter()))
    {
        *c = a * b.conj() * w(ix.0, ix.1);
    }
    let corr = to_field(&cross);
    let (nx, ny) = g.shape();
    let (mut bi, mut bj) = (0, 0);
    let v = corr.values();
    for ((i, j), &c) in v.indexed_iter() {
        if c > v[(bi, bj)] {
            bi = i;
            bj = j;
        }
    }
    let signed = |k: usize, n: usize| if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
    let at = |di: isize, dj: isize| {
        v[(
            (bi as isize + di).rem_euclid(nx as isize) as usize,
            (bj as isize + dj).rem_euclid(ny as isize) as usize,
        )]
    };
    let dist = |sx: f64, sy: f64| -> f64 {
        let mut shifted = ph.clone();
        shifted.translate(sx, sy);
        let mut total = 0.0;
        for ((ix, a), b) in uh.coeffs().indexed_iter().zip(shifted.coeffs().iter()) {
            let mult = if ix.1 == 0 || ix.1 == ny / 2 { 1.0 } else { 2.0 };
            total += mult * w(ix.0, ix.1) * (a - b).norm_sqr();
        }
        (total * g.cell() / g.len() as f64).sqrt()
    };
    let (x0, y0) = (signed(bi, nx) * g.dx(), signed(bj, ny) * g.dy());
    let best = dist(x0, y0);

    // Newton step on the 3x3 quadratic model in index units.
    let gx = 0.5 * (at(1, 0) - at(-1, 0));
    let gy = 0.5 * (at(0, 1) - at(0, -1));
    let hxx = at(1, 0) - 2.0 * at(0, 0) + at(-1, 0);
    let hyy = at(0, 1) - 2.0 * at(0, 0) + at(0, -1);
    let hxy = 0.25 * (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1));
    let det = hxx * hyy - hxy * hxy;
    if hxx < 0.0 && det > 0.0 {
        let di = -(hyy * gx - hxy * gy) / det;
        let dj = -(hxx * gy - hxy * gx) / det;
        if di.abs() <= 1.0 && dj.abs() <= 1.0 {
            let refined = dist(x0 + di * g.dx(), y0 + dj * g.dy());
            return Ok(best.min(refined));
        }
    }
    Ok(best)
}

/// Smooth random field, even in `x` and `y`, with `max |eta| = 1`: a
/// combination of `cos(a kx x) cos(b ky y)` for `a, b < 4`.
pub fn even_perturbation(grid: &Grid2D, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coef = [[0.0; 4]; 4];
    for row in coef.iter_mut() {
        for c in row.iter_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
    }
    let (kx, ky) = (grid.kx(1), grid.ky(1));
    let eta = Field::from_fn(*grid, |x, y| {
        let mut s = 0.0;
        for (a, row) in coef.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                s += c * (a as f64 * kx * x).cos() * (b as f64 * ky * y).cos();
            }
        }
        s
    });
    let m = eta.max_abs();
    eta.scaled(1.0 / m)
}

/// Evolves `phi (1 + size eta)` for the seeded even perturbation `eta` and
/// records the orbital distance to `phi`.
pub fn stability_experiment(
    wave: &SolitaryWave,
    perturbation_size: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
    opts: &EvolveOptions,
) -> Result<EvolveReport> {
    if !(0.0..=0.1).contains(&perturbation_size) {
        return Err(Error::Precondition(format!(
            "perturbation size {perturbation_size} outside [0, 0.1]"
        )));
    }
    let phi = &wave.profile;
    let eta = even_perturbation(phi.grid(), seed);
    let u0 = phi
        .zip_map(&eta, |a, b| a * (1.0 + perturbation_size * b))
        .expect("same grid");
    let opts = EvolveOptions {
        reference: Some(phi.clone()),
        ..opts.clone()
    };
    evolve(&u0, &wave.params, dt, t_end, &opts)
}
