//! Solitary waves: regime classification, Petviashvili iteration, rescaling
//! across speeds, Steiner symmetrization and shape diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::functionals::{
    pohojaev_residuals, quadratics, zk_functionals, FunctionalReport, Mapping, Params,
    PohojaevResiduals,
};
use crate::kernel::fit_window;
use crate::resample;
use crate::spectral::{to_field, to_spectrum, translate, Axis, Field, Grid2D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Exists,
    NoSolitaryWave,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// `"(i)"` to `"(iv)"` for the four sign patterns, `"p=4"`, or `"none"`.
    pub matched_case: String,
}

/// Decision table for existence of solitary waves.
///
/// Waves exist for `alpha eps < 0`, `c alpha < 0`, `p < 4`: patterns (i)
/// `eps = 1, c > 0, alpha < 0` and (ii) `eps = -1, c < 0, alpha > 0`. The
/// mirrored patterns with `p > 4`, (iii) `eps = 1, c < 0, alpha < 0` and
/// (iv) `eps = -1, c > 0, alpha > 0`, are open. Everything else, including
/// `p = 4`, admits no nontrivial wave.
pub fn classify(params: &Params) -> Classification {
    let Params { p, alpha, epsilon, c } = *params;
    let up = epsilon > 0.0;
    let (verdict, case) = if p == 4.0 {
        (Verdict::NoSolitaryWave, "p=4")
    } else if p < 4.0 && up && c > 0.0 && alpha < 0.0 {
        (Verdict::Exists, "(i)")
    } else if p < 4.0 && !up && c < 0.0 && alpha > 0.0 {
        (Verdict::Exists, "(ii)")
    } else if p > 4.0 && up && c < 0.0 && alpha < 0.0 {
        (Verdict::Unknown, "(iii)")
    } else if p > 4.0 && !up && c > 0.0 && alpha > 0.0 {
        (Verdict::Unknown, "(iv)")
    } else {
        (Verdict::NoSolitaryWave, "none")
    };
    Classification {
        verdict,
        matched_case: case.to_string(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Stabilizer exponent; `(p + 1) / p` when absent.
    pub gamma: Option<f64>,
    /// Bound on `sup |L phi - N(phi)| / max |phi|`.
    pub tol: f64,
    /// Bound on `|M_n - 1|`.
    pub stabilizer_tol: f64,
    pub max_iter: usize,
    /// Run outside the existence regime.
    pub force: bool,
    #[serde(skip)]
    pub initial_guess: Option<Field>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gamma: None,
            tol: 1e-8,
            stabilizer_tol: 1e-8,
            max_iter: 500,
            force: false,
            initial_guess: None,
        }
    }
}

/// A computed wave with its diagnostic record.
#[derive(Clone, Debug)]
pub struct SolitaryWave {
    pub profile: Field,
    pub params: Params,
    pub iterations: usize,
    pub converged: bool,
    pub eq_residual_inf: f64,
    pub functional_report: FunctionalReport,
    pub pohojaev: PohojaevResiduals,
    pub stabilizer_history: Vec<f64>,
    pub boundary_contamination: f64,
    pub mapping: Mapping,
    pub classification: Classification,
}

/// Everything in [`SolitaryWave`] except the profile samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveDiagnostics {
    pub params: Params,
    pub grid: Grid2D,
    pub iterations: usize,
    pub converged: bool,
    pub eq_residual_inf: f64,
    pub functional_report: FunctionalReport,
    pub pohojaev: PohojaevResiduals,
    pub stabilizer_history: Vec<f64>,
    pub boundary_contamination: f64,
    pub mapping: Mapping,
    pub classification: Classification,
    pub peak: f64,
}

impl SolitaryWave {
    pub fn diagnostics(&self) -> WaveDiagnostics {
        WaveDiagnostics {
            params: self.params,
            grid: *self.profile.grid(),
            iterations: self.iterations,
            converged: self.converged,
            eq_residual_inf: self.eq_residual_inf,
            functional_report: self.functional_report.clone(),
            pohojaev: self.pohojaev,
            stabilizer_history: self.stabilizer_history.clone(),
            boundary_contamination: self.boundary_contamination,
            mapping: self.mapping,
            classification: self.classification.clone(),
            peak: self.profile.max_abs(),
        }
    }
}

/// Default guess `A e^{-(x^2 + y^2)/4}`, with `A` chosen so that the first
/// stabilizer equals one.
pub fn default_guess(params: &Params, grid: &Grid2D) -> Result<Field> {
    let g = Field::from_fn(*grid, |x, y| (-(x * x + y * y) / 4.0).exp());
    let q = quadratics(&g);
    let lgg = params.c * q.a - params.alpha * q.h + params.epsilon * q.b;
    let j = crate::functionals::j_functional(&g, params)?;
    if !(lgg > 0.0 && j > 0.0) {
        return Err(Error::Degenerate(
            "Gaussian guess has a non-positive quadratic form".into(),
        ));
    }
    let amp = ((params.p + 1.0) * lgg / j).powf(1.0 / params.p);
    Ok(g.scaled(amp))
}

/// Largest `|f|` on the box edges relative to `max |f|`.
pub fn boundary_contamination(f: &Field) -> f64 {
    let (nx, ny) = f.grid().shape();
    let v = f.values();
    let mut edge: f64 = 0.0;
    for i in [0, nx - 1] {
        edge = v.row(i).iter().fold(edge, |m, z| m.max(z.abs()));
    }
    for j in [0, ny - 1] {
        edge = v.column(j).iter().fold(edge, |m, z| m.max(z.abs()));
    }
    let peak = f.max_abs();
    if peak == 0.0 {
        0.0
    } else {
        edge / peak
    }
}

/// `||f - f reflected|| / ||f||` about the origin index.
pub fn asymmetry(f: &Field, axis: Axis) -> f64 {
    let norm = f.l2_norm();
    if norm == 0.0 {
        return 0.0;
    }
    let r = f.reflect(axis);
    f.axpy(-1.0, &r).expect("same grid").l2_norm() / norm
}

/// Moves the extremum of `f` to the origin index, then removes any sub-cell
/// offset with a Fourier phase shift if the result is not yet even.
pub fn center(f: &Field) -> Field {
    let g = *f.grid();
    let (i0, j0) = f.argmax_abs();
    let rolled = f.roll(
        (g.nx() / 2) as isize - i0 as isize,
        (g.ny() / 2) as isize - j0 as isize,
    );
    if asymmetry(&rolled, Axis::X) <= 1e-8 && asymmetry(&rolled, Axis::Y) <= 1e-8 {
        return rolled;
    }
    // For an even profile displaced by x0 the lowest mode is e^{-i k x0} times
    // a real positive number, so its phase locates the centre.
    let s = to_spectrum(&rolled);
    let sign = rolled.get(g.nx() / 2, g.ny() / 2).signum();
    let fx = s.coeffs()[(1, 0)] * sign;
    let fy = s.coeffs()[(0, 1)] * sign;
    let x0 = -fx.arg() / g.kx(1);
    let y0 = -fy.arg() / g.ky(1);
    translate(&rolled, -x0, -y0)
}

/// Stationary-equation residual `sup |L phi - N(phi)| / max |phi|` in the
/// canonical frame.
fn equation_residual(phi: &Field, canon: &Params) -> f64 {
    let g = *phi.grid();
    let mut s = to_spectrum(phi);
    s.apply_real(|r, m| canon.symbol(g.kx(r), g.ky(m)));
    let lphi = to_field(&s);
    let pw = canon.power(1);
    let inv = 1.0 / (canon.p + 1.0);
    let sup = lphi
        .as_slice()
        .iter()
        .zip(phi.as_slice())
        .fold(0.0f64, |m, (l, &u)| m.max((l - pw.eval(u) * inv).abs()));
    sup / phi.max_abs()
}

/// Petviashvili iteration `phi <- M^gamma L^{-1} N(phi)` with
/// `M = <L phi, phi> / <N(phi), phi>` and `N(phi) = phi^{p+1} / (p+1)`.
///
/// Mirrored parameters are solved on the canonical branch and mapped back.
/// Non-convergence returns [`Error::NotConverged`] carrying the last iterate
/// and its diagnostics.
pub fn petviashvili_solve(params: &Params, grid: &Grid2D, opts: &SolveOptions) -> Result<SolitaryWave> {
    params.validate()?;
    let classification = classify(params);
    if classification.verdict != Verdict::Exists && !opts.force {
        return Err(Error::Regime(format!(
            "no solitary wave is known for p = {}, alpha = {}, epsilon = {}, c = {} (case {})",
            params.p, params.alpha, params.epsilon, params.c, classification.matched_case
        )));
    }
    let (canon, mapping) = match params.canonical() {
        Some(cm) => cm,
        None if opts.force => (*params, Mapping::Identity),
        None => {
            return Err(Error::Regime(format!(
                "p = {} has an even numerator, so u -> -u does not map c = {} to the c > 0 branch",
                params.p, params.c
            )))
        }
    };
    let gamma = opts.gamma.unwrap_or((canon.p + 1.0) / canon.p);
    if !(gamma.is_finite() && opts.tol > 0.0 && opts.stabilizer_tol > 0.0 && opts.max_iter > 0) {
        return Err(Error::InvalidParams(
            "solver needs finite gamma, positive tolerances and max_iter >= 1".into(),
        ));
    }
    let g = *grid;
    let mut phi = match &opts.initial_guess {
        Some(f) => {
            if f.grid() != grid {
                return Err(Error::SizeMismatch {
                    expected: grid.shape(),
                    actual: f.grid().shape(),
                });
            }
            mapping.apply(f)
        }
        None => default_guess(&canon, grid)?,
    };
    if phi.max_abs() == 0.0 {
        return Err(Error::Degenerate("initial guess is identically zero".into()));
    }

    let kx: Vec<f64> = (0..g.nx()).map(|r| g.kx(r)).collect();
    let ky: Vec<f64> = (0..g.nyh()).map(|m| g.ky(m)).collect();
    let pw = canon.power(1);
    let inv_p1 = 1.0 / (canon.p + 1.0);

    let mut phi_hat = to_spectrum(&phi);
    // L phi_n in physical space, known exactly from the previous update.
    let mut l_phi: Option<Field> = None;
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for n in 0..opts.max_iter {
        let nl = phi.map(|u| pw.eval(u) * inv_p1);
        if !nl.is_finite() {
            return Err(Error::NonFinite("nonlinear term"));
        }
        let mut nl_hat = to_spectrum(&nl);
        let lpp = phi_hat.weighted_power(|r, m| canon.symbol(kx[r], ky[m]));
        let npp = phi_hat.weighted_cross(&nl_hat, |_, _| 1.0);
        if n == 0 && !(lpp > 0.0 && npp > 0.0) {
            return Err(Error::Degenerate(format!(
                "stabilizer undefined for the initial guess (<L u, u> = {lpp:e}, <N(u), u> = {npp:e})"
            )));
        }
        let stab = lpp / npp;
        if !(stab.is_finite() && stab > 0.0) {
            return Err(Error::NonFinite("stabilizer"));
        }
        history.push(stab);
        if let Some(lp) = &l_phi {
            let sup = lp
                .as_slice()
                .iter()
                .zip(nl.as_slice())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            residual = sup / phi.max_abs();
        }
        if residual <= opts.tol && (stab - 1.0).abs() <= opts.stabilizer_tol {
            converged = true;
            break;
        }
        let factor = stab.powf(gamma);
        nl_hat.apply_real(|r, m| factor / canon.symbol(kx[r], ky[m]));
        phi_hat = nl_hat;
        phi = to_field(&phi_hat);
        l_phi = Some(nl.scaled(factor));
        iterations = n + 1;
    }

    let eq_residual_inf = equation_residual(&phi, &canon);
    converged &= eq_residual_inf <= opts.tol;
    let profile = mapping.apply(&center(&phi));
    let wave = build_wave(profile, params, iterations, converged, eq_residual_inf, history, mapping, classification, opts.force)?;
    if converged {
        Ok(wave)
    } else {
        Err(Error::NotConverged {
            iterations,
            residual: eq_residual_inf,
            wave: Box::new(wave),
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn build_wave(
    profile: Field,
    params: &Params,
    iterations: usize,
    converged: bool,
    eq_residual_inf: f64,
    stabilizer_history: Vec<f64>,
    mapping: Mapping,
    classification: Classification,
    force: bool,
) -> Result<SolitaryWave> {
    let functional_report = zk_functionals(&profile, params, force)?;
    let pohojaev = pohojaev_residuals(&profile, params).unwrap_or(PohojaevResiduals {
        pairing: f64::NAN,
        x_dilation: f64::NAN,
        y_dilation: f64::NAN,
        dispersive_balance: f64::NAN,
        transverse_balance: f64::NAN,
    });
    Ok(SolitaryWave {
        boundary_contamination: boundary_contamination(&profile),
        profile,
        params: *params,
        iterations,
        converged,
        eq_residual_inf,
        functional_report,
        pohojaev,
        stabilizer_history,
        mapping,
        classification,
    })
}

/// Largest out-of-band amplitude fraction tolerated when narrowing a wave.
pub const RESCALE_BAND_TOL: f64 = 1e-5;
/// Largest boundary contamination tolerated after widening a wave.
pub const RESCALE_EDGE_TOL: f64 = 1e-3;

/// Maps a wave of speed `c` to speed `c_new` through
/// `phi_new(x, y) = s^{1/p} phi(s x, sqrt(s) y)`, `s = c_new / c`.
pub fn rescale_wave(w: &SolitaryWave, c_new: f64) -> Result<Field> {
    let c = w.params.c;
    if !(c_new.is_finite() && c_new != 0.0 && c_new.signum() == c.signum()) {
        return Err(Error::InvalidParams(format!(
            "target speed {c_new} must be nonzero with the sign of {c}"
        )));
    }
    rescale_field(&w.profile, w.params.p, c_new / c)
}

/// The dilation behind [`rescale_wave`] for ratio `s > 0`.
pub fn rescale_field(f: &Field, p: f64, s: f64) -> Result<Field> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidParams(format!("speed ratio {s} must be positive")));
    }
    if s == 1.0 {
        return Ok(f.clone());
    }
    let (sx, sy) = (s, s.sqrt());
    if s > 1.0 {
        let g = *f.grid();
        let kxmax = std::f64::consts::PI / g.dx() / sx;
        let kymax = std::f64::consts::PI / g.dy() / sy;
        let spec = to_spectrum(f);
        let total = spec.weighted_power(|_, _| 1.0);
        let outside = spec.weighted_power(|r, m| {
            if g.kx(r).abs() > kxmax || g.ky(m) > kymax {
                1.0
            } else {
                0.0
            }
        });
        let frac = (outside / total).sqrt();
        if frac > RESCALE_BAND_TOL {
            return Err(Error::Unresolvable(format!(
                "narrowing by {s} leaves {frac:.2e} of the amplitude beyond the grid band"
            )));
        }
    }
    let out = resample::dilate(f, sx, sy).scaled(s.powf(1.0 / p));
    let edge = boundary_contamination(&out);
    if edge > RESCALE_EDGE_TOL {
        return Err(Error::Unresolvable(format!(
            "widening by {:.3} pushes the wave to the box edge (contamination {edge:.2e})",
            1.0 / s
        )));
    }
    Ok(out)
}

/// Symmetric-decreasing rearrangement of `|f|` along every line parallel to
/// `axis`. The largest value lands on the origin index, the next ones at
/// `+1, -1, +2, -2, ...`, the smallest on index 0.
pub fn steiner_symmetrize(f: &Field, axis: Axis) -> Field {
    let (nx, ny) = f.grid().shape();
    let mut out = f.clone();
    let (lines, len) = match axis {
        Axis::X => (ny, nx),
        Axis::Y => (nx, ny),
    };
    let order = placement(len);
    let mut buf = vec![0.0; len];
    for line in 0..lines {
        for (t, b) in buf.iter_mut().enumerate() {
            *b = match axis {
                Axis::X => f.get(t, line),
                Axis::Y => f.get(line, t),
            }
            .abs();
        }
        buf.sort_by(|a, b| b.total_cmp(a));
        let v = out.values_mut();
        for (rank, &idx) in order.iter().enumerate() {
            match axis {
                Axis::X => v[(idx, line)] = buf[rank],
                Axis::Y => v[(line, idx)] = buf[rank],
            }
        }
    }
    out
}

fn placement(n: usize) -> Vec<usize> {
    let c = n / 2;
    let mut order = Vec::with_capacity(n);
    order.push(c);
    for k in 1..n / 2 {
        order.push(c + k);
        order.push(c - k);
    }
    order.push(0);
    order
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveDecay {
    /// Exponential rate of `phi(0, y)` in `|y|` (negative for decay).
    pub y_rate: f64,
    /// Algebraic exponent of `phi(x, 0)` in `|x|`.
    pub x_exponent: f64,
    /// Exponential decay rate of the radial maximum of `|phi^|`.
    pub fourier_strip: f64,
}

/// Boundary contamination above which decay fits are refused.
pub const DECAY_CONTAMINATION_LIMIT: f64 = 1e-6;

pub fn wave_decay_report(w: &SolitaryWave) -> Result<WaveDecay> {
    let contamination = boundary_contamination(&w.profile);
    if contamination > DECAY_CONTAMINATION_LIMIT {
        return Err(Error::UnreliableFit {
            contamination,
            limit: DECAY_CONTAMINATION_LIMIT,
        });
    }
    let phi = w.profile.map(f64::abs);
    let g = *phi.grid();
    let (i0, j0) = (g.nx() / 2, g.ny() / 2);
    let xs = g.xs();
    let ys = g.ys();
    let mut ypts = Vec::new();
    for j in fit_window(&ys, g.ly())? {
        ypts.push((ys[j], positive_ln(phi.get(i0, j), "phi(0, y)")?));
    }
    let mut xpts = Vec::new();
    for i in fit_window(&xs, g.lx())? {
        xpts.push((xs[i].ln(), positive_ln(phi.get(i, j0), "phi(x, 0)")?));
    }
    Ok(WaveDecay {
        y_rate: fit::line(&ypts)?.slope,
        x_exponent: fit::line(&xpts)?.slope,
        fourier_strip: fourier_strip(&phi)?,
    })
}

fn positive_ln(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v.ln())
    } else {
        Err(Error::Degenerate(format!("{what} is not positive inside the fit window")))
    }
}

/// Fits `log max_{|k| in shell} |f^(k)|` against the shell radius over the
/// shells that stay above `1e-12` of the peak; returns minus the slope, a
/// proxy for the width of the analyticity strip.
pub fn fourier_strip(f: &Field) -> Result<f64> {
    let g = *f.grid();
    let s = to_spectrum(f);
    let dk = g.kx(1).max(g.ky(1));
    let kmax = (g.kx(g.nx() / 2).powi(2) + g.ky(g.ny() / 2).powi(2)).sqrt();
    let nbins = (kmax / dk).ceil() as usize + 1;
    let mut shell = vec![0.0f64; nbins];
    for ((r, m), z) in s.coeffs().indexed_iter() {
        let k = (g.kx(r).powi(2) + g.ky(m).powi(2)).sqrt();
        let b = (k / dk) as usize;
        shell[b] = shell[b].max(z.norm());
    }
    let peak = shell.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-12 * peak;
    let mut pts = Vec::new();
    for (b, &v) in shell.iter().enumerate().skip(1) {
        if v <= floor {
            break;
        }
        pts.push(((b as f64 + 0.5) * dk, v.ln()));
    }
    Ok(-fit::line(&pts)?.slope)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub x_asym: f64,
    pub y_asym: f64,
}

pub fn symmetry_report(w: &SolitaryWave) -> SymmetryReport {
    SymmetryReport {
        x_asym: asymmetry(&w.profile, Axis::X),
        y_asym: asymmetry(&w.profile, Axis::Y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::mass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(p: f64) -> Params {
        Params::new(p, -1.0, 1.0, 1.0).unwrap()
    }

    /// Every sign pattern over p in {2, 4, 5}, checked against the existence
    /// conditions written out case by case.
    #[test]
    fn classification_table_is_exhaustive() {
        let mut seen = 0;
        for eps in [1.0, -1.0] {
            for c in [1.0, -1.0] {
                for alpha in [1.0, -1.0] {
                    for p in [2.0, 4.0, 5.0] {
                        let got = classify(&Params::new(p, alpha, eps, c).unwrap());
                        let expected = match (eps > 0.0, c > 0.0, alpha > 0.0, p) {
                            (_, _, _, 4.0) => (Verdict::NoSolitaryWave, "p=4"),
                            (true, true, false, p) if p < 4.0 => (Verdict::Exists, "(i)"),
                            (false, false, true, p) if p < 4.0 => (Verdict::Exists, "(ii)"),
                            (true, false, false, p) if p > 4.0 => (Verdict::Unknown, "(iii)"),
                            (false, true, true, p) if p > 4.0 => (Verdict::Unknown, "(iv)"),
                            _ => (Verdict::NoSolitaryWave, "none"),
                        };
                        assert_eq!((got.verdict, got.matched_case.as_str()), expected);
                        seen += 1;
                    }
                }
            }
        }
        assert_eq!(seen, 24);
    }

    #[test]
    fn classification_examples() {
        let c = |p, a, e, s| classify(&Params::new(p, a, e, s).unwrap());
        assert_eq!(c(2.0, -1.0, 1.0, 1.0).verdict, Verdict::Exists);
        assert_eq!(c(2.0, -1.0, 1.0, 1.0).matched_case, "(i)");
        assert_eq!(c(2.0, 1.0, 1.0, 1.0).verdict, Verdict::NoSolitaryWave);
        assert_eq!(c(5.0, -1.0, 1.0, -1.0).verdict, Verdict::Unknown);
        assert_eq!(c(5.0, -1.0, 1.0, -1.0).matched_case, "(iii)");
        assert_eq!(c(4.0, -1.0, 1.0, 1.0).verdict, Verdict::NoSolitaryWave);
    }

    #[test]
    fn zero_guess_is_rejected() {
        let g = Grid2D::new(32, 32, 10.0, 10.0).unwrap();
        let opts = SolveOptions {
            initial_guess: Some(Field::zeros(g)),
            ..Default::default()
        };
        assert!(matches!(
            petviashvili_solve(&params(1.0), &g, &opts),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn regime_gate_blocks_before_compute() {
        let g = Grid2D::new(32, 32, 10.0, 10.0).unwrap();
        let bad = Params::new(2.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            petviashvili_solve(&bad, &g, &SolveOptions::default()),
            Err(Error::Regime(_))
        ));
        // Pattern (ii) with an even numerator has no sign map.
        let even = Params::new(2.0, 1.0, -1.0, -1.0).unwrap();
        assert!(matches!(
            petviashvili_solve(&even, &g, &SolveOptions::default()),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn non_convergence_carries_diagnostics() {
        let g = Grid2D::new(64, 32, 20.0, 8.0).unwrap();
        let opts = SolveOptions {
            max_iter: 3,
            ..Default::default()
        };
        match petviashvili_solve(&params(1.0), &g, &opts) {
            Err(Error::NotConverged { iterations, wave, .. }) => {
                assert_eq!(iterations, 3);
                assert!(!wave.converged);
                assert_eq!(wave.stabilizer_history.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn small_wave(p: f64) -> SolitaryWave {
        let g = Grid2D::new(512, 64, 40.0, 8.0).unwrap();
        petviashvili_solve(&params(p), &g, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn small_box_wave_is_positive_even_and_stable() {
        let w = small_wave(1.0);
        assert!(w.converged && w.eq_residual_inf <= 1e-8);
        let peak = w.profile.max_abs();
        assert_eq!(w.profile.argmax_abs(), (256, 32));
        assert!(w.profile.as_slice().iter().all(|&v| v >= -1e-8 * peak));
        let s = symmetry_report(&w);
        assert!(s.x_asym <= 1e-12 && s.y_asym <= 1e-12, "{s:?}");
        // Monotone approach of the stabilizer down to the round-off floor.
        let tail: Vec<f64> = w.stabilizer_history.iter().rev().take(11).map(|m| (m - 1.0).abs()).collect();
        assert!(tail.windows(2).all(|p| p[1] <= 1e-13 || p[0] <= p[1]), "{tail:?}");
        assert!(tail[0] <= 1e-8);
        // The pairing identity is exact on the grid.
        assert!(w.pohojaev.pairing < 1e-9);
    }

    #[test]
    fn mirrored_regime_maps_back() {
        let g = Grid2D::new(256, 64, 30.0, 8.0).unwrap();
        let canon = petviashvili_solve(&params(1.0), &g, &SolveOptions::default()).unwrap();
        let mirror = Params::new(1.0, 1.0, -1.0, -1.0).unwrap();
        let w = petviashvili_solve(&mirror, &g, &SolveOptions::default()).unwrap();
        assert_eq!(w.mapping, Mapping::Mirror);
        let expected = Mapping::Mirror.apply(&canon.profile);
        let diff = w.profile.axpy(-1.0, &expected).unwrap().l2_norm() / expected.l2_norm();
        assert!(diff < 1e-12, "{diff}");
        assert!(w.profile.as_slice().iter().all(|&v| v <= 1e-8 * canon.profile.max_abs()));
    }

    #[test]
    fn shifted_wave_is_asymmetric_until_centered() {
        let w = small_wave(1.0);
        let shifted = w.profile.roll(7, 0);
        assert!(asymmetry(&shifted, Axis::X) >= 1e-2);
        let sub = translate(&w.profile, 0.37, -0.21);
        let back = center(&sub);
        assert!(asymmetry(&back, Axis::X) < 1e-9);
        assert!(asymmetry(&back, Axis::Y) < 1e-9);
    }

    #[test]
    fn identity_rescale_and_resolvability() {
        let w = small_wave(1.0);
        assert_eq!(rescale_wave(&w, 1.0).unwrap(), w.profile);
        assert!(rescale_wave(&w, -1.0).is_err());
        assert!(matches!(rescale_wave(&w, 40.0), Err(Error::Unresolvable(_))));
        assert!(matches!(rescale_wave(&w, 0.05), Err(Error::Unresolvable(_))));
    }

    #[test]
    fn round_trip_rescale_of_localized_profile() {
        let g = Grid2D::new(512, 128, 20.0, 12.0).unwrap();
        let f = Field::from_fn(g, |x, y| 2.0 / (1.0 + 0.5 * x * x).powi(4) * (-(y * y) / 2.0).exp());
        for s in [1.3, 0.75] {
            let there = rescale_field(&f, 1.0, s).unwrap();
            let back = rescale_field(&there, 1.0, 1.0 / s).unwrap();
            let diff = back.axpy(-1.0, &f).unwrap().max_abs() / f.max_abs();
            assert!(diff < 1e-8, "{s}: {diff}");
        }
    }

    #[test]
    fn rescaled_mass_follows_scaling_law() {
        let w = small_wave(1.0);
        let m1 = mass(&w.profile);
        let r = rescale_wave(&w, 1.2).unwrap();
        let expected = 1.2f64.powf(2.0 - 1.5) * m1;
        assert!((mass(&r) - expected).abs() < 1e-6 * expected, "{}", (mass(&r) - expected) / expected);
    }

    #[test]
    fn steiner_fixed_point_and_norms() {
        let g = Grid2D::new(64, 32, 6.0, 4.0).unwrap();
        let gauss = Field::from_fn(g, |x, y| (-(x * x) - 0.5 * y * y).exp());
        for axis in [Axis::X, Axis::Y] {
            let s = steiner_symmetrize(&gauss, axis);
            assert!(s.axpy(-1.0, &gauss).unwrap().max_abs() <= 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Field::from_vec(g, data).unwrap();
        let s = steiner_symmetrize(&f, Axis::X);
        assert_eq!(s.l2_norm(), f.map(f64::abs).l2_norm());
        for j in 0..32 {
            let mut a: Vec<f64> = (0..64).map(|i| f.get(i, j).abs()).collect();
            let mut b: Vec<f64> = (0..64).map(|i| s.get(i, j)).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
            // Decreasing away from the centre on both sides.
            for k in 1..31 {
                assert!(s.get(32 + k, j) >= s.get(32 + k + 1, j));
                assert!(s.get(32 - k, j) >= s.get(32 - k - 1, j));
            }
        }
    }

    #[test]
    fn steiner_of_even_wave_is_exactly_even() {
        let w = small_wave(1.0);
        let s = steiner_symmetrize(&steiner_symmetrize(&w.profile, Axis::X), Axis::Y);
        assert!(asymmetry(&s, Axis::X) <= 1e-12);
        assert!(asymmetry(&s, Axis::Y) <= 1e-12);
    }

    #[test]
    fn decay_report_refuses_contaminated_boxes() {
        let g = Grid2D::new(128, 32, 10.0, 4.0).unwrap();
        let w = petviashvili_solve(&params(1.0), &g, &SolveOptions::default()).unwrap();
        assert!(matches!(wave_decay_report(&w), Err(Error::UnreliableFit { .. })));
    }
}
