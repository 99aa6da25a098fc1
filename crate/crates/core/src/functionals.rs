//! Model parameters and the scalar functionals evaluated on fields.
//!
//! With `L` the operator of symbol `c - alpha |kx| + epsilon ky^2` the
//! stationary equation reads `L phi = phi^{p+1} / (p+1)`. Quadratic pieces
//! are evaluated spectrally from one transform:
//!
//! * `a = int phi^2`
//! * `h = int phi H phi_x = sum |kx| |phi^|^2` (non-negative)
//! * `b = int phi_y^2 = -int phi phi_yy`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{integrate, to_spectrum, Field};

/// Largest denominator accepted when reading `p` as a fraction.
const MAX_DENOMINATOR: u64 = 10_000;

#[derive(Deserialize)]
struct ParamsRepr {
    p: f64,
    alpha: f64,
    epsilon: f64,
    c: f64,
}

impl TryFrom<ParamsRepr> for Params {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        Params::new(r.p, r.alpha, r.epsilon, r.c)
    }
}

/// The model tuple `(p, alpha, epsilon, c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr")]
pub struct Params {
    pub p: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub c: f64,
}

impl Params {
    pub fn new(p: f64, alpha: f64, epsilon: f64, c: f64) -> Result<Self> {
        let params = Self { p, alpha, epsilon, c };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(Error::InvalidParams(format!("p = {} must be positive", self.p)));
        }
        if !(self.alpha.is_finite() && self.alpha != 0.0) {
            return Err(Error::InvalidParams(format!("alpha = {} must be nonzero", self.alpha)));
        }
        if self.epsilon != 1.0 && self.epsilon != -1.0 {
            return Err(Error::InvalidParams(format!(
                "epsilon = {} must be +1 or -1",
                self.epsilon
            )));
        }
        if !(self.c.is_finite() && self.c != 0.0) {
            return Err(Error::InvalidParams(format!("c = {} must be nonzero", self.c)));
        }
        Ok(())
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..*self }
    }

    /// `p` as a reduced fraction, if it is one with a modest denominator.
    pub fn exponent(&self) -> Option<Exponent> {
        Exponent::from_f64(self.p)
    }

    /// True when `u^p` is defined for negative `u` (`p = k/m`, `m` odd).
    pub fn signed_powers_defined(&self) -> bool {
        self.exponent().is_some_and(|e| e.den % 2 == 1)
    }

    /// `1 / ((p+1)(p+2))`.
    pub fn cp(&self) -> f64 {
        1.0 / ((self.p + 1.0) * (self.p + 2.0))
    }

    /// Symbol of `L` at wavenumbers `(kx, ky)`.
    pub fn symbol(&self, kx: f64, ky: f64) -> f64 {
        self.c - self.alpha * kx.abs() + self.epsilon * ky * ky
    }

    /// `u -> u^{p + shift}` with odd-root semantics for negative `u`.
    pub fn power(&self, shift: u64) -> Power {
        Power::new(self.p, self.exponent(), shift)
    }

    /// Parameters of the canonical branch (`c > 0`) and whether the
    /// mirror `(x, u, alpha, epsilon, c) -> (-x, -u, -alpha, -epsilon, -c)`
    /// was needed to get there.
    ///
    /// The mirror preserves the equation only when `u -> -u` commutes with
    /// `u^p`, i.e. for an odd numerator `k` and odd denominator `m`.
    pub fn canonical(&self) -> Option<(Params, Mapping)> {
        if self.c > 0.0 {
            return Some((*self, Mapping::Identity));
        }
        let e = self.exponent()?;
        if e.num % 2 == 1 && e.den % 2 == 1 {
            let mirrored = Params {
                alpha: -self.alpha,
                epsilon: -self.epsilon,
                c: -self.c,
                ..*self
            };
            Some((mirrored, Mapping::Mirror))
        } else {
            None
        }
    }

    /// Whether the canonical branch has a positive symbol (`c > 0`,
    /// `alpha < 0`, `epsilon = +1`), the regime of the existence theory.
    pub fn in_existence_regime(&self) -> bool {
        self.canonical()
            .is_some_and(|(q, _)| q.c > 0.0 && q.alpha < 0.0 && q.epsilon > 0.0 && q.p < 4.0)
    }
}

/// The sign map applied before evaluating the variational functionals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mapping {
    Identity,
    Mirror,
}

impl Mapping {
    /// Applies the field part of the map: `u(x, y) -> -u(-x, y)` for a mirror.
    pub fn apply(&self, u: &Field) -> Field {
        match self {
            Mapping::Identity => u.clone(),
            Mapping::Mirror => u.reflect(crate::spectral::Axis::X).scaled(-1.0),
        }
    }
}

/// A positive rational `num / den` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exponent {
    pub num: u64,
    pub den: u64,
}

impl Exponent {
    /// Continued-fraction recovery of `num / den` with `den <= 10_000`.
    pub fn from_f64(p: f64) -> Option<Self> {
        if !(p.is_finite() && p > 0.0) {
            return None;
        }
        let (mut h0, mut h1) = (0u64, 1u64);
        let (mut k0, mut k1) = (1u64, 0u64);
        let mut x = p;
        for _ in 0..64 {
            let a = x.floor();
            if a > 1e12 {
                break;
            }
            let a = a as u64;
            let h2 = a.checked_mul(h1)?.checked_add(h0)?;
            let k2 = a.checked_mul(k1)?.checked_add(k0)?;
            if k2 > MAX_DENOMINATOR {
                break;
            }
            (h0, h1, k0, k1) = (h1, h2, k1, k2);
            if ((h1 as f64 / k1 as f64) - p).abs() <= 1e-12 * p {
                return Some(Self { num: h1, den: k1 });
            }
            let frac = x - a as f64;
            if frac <= 0.0 {
                break;
            }
            x = 1.0 / frac;
        }
        None
    }
}

/// Pointwise power `u^{p + shift}`.
#[derive(Clone, Copy, Debug)]
pub struct Power {
    exponent: f64,
    integer: Option<i32>,
    /// Sign factor applied to `|u|^q` for negative `u`; `None` when undefined.
    negative_sign: Option<f64>,
}

impl Power {
    fn new(p: f64, frac: Option<Exponent>, shift: u64) -> Self {
        let exponent = p + shift as f64;
        let integer = frac
            .filter(|e| e.den == 1 && e.num + shift <= i32::MAX as u64)
            .map(|e| (e.num + shift) as i32);
        let negative_sign = frac.filter(|e| e.den % 2 == 1).map(|e| {
            let top = e.num + shift * e.den;
            if top % 2 == 1 {
                -1.0
            } else {
                1.0
            }
        });
        Self {
            exponent,
            integer,
            negative_sign,
        }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Evaluates the power; negative input with an even denominator gives NaN.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if let Some(n) = self.integer {
            return u.powi(n);
        }
        if u >= 0.0 {
            return u.powf(self.exponent);
        }
        match self.negative_sign {
            Some(s) => s * (-u).powf(self.exponent),
            None => f64::NAN,
        }
    }

    pub fn field(&self, u: &Field) -> Field {
        u.map(|v| self.eval(v))
    }
}

/// Spectral quadratic pieces of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratics {
    /// `int u^2`
    pub a: f64,
    /// `int u_y^2`, taken as `-int u u_yy`
    pub b: f64,
    /// `int u H u_x`
    pub h: f64,
}

pub fn quadratics(u: &Field) -> Quadratics {
    let g = *u.grid();
    let s = to_spectrum(u);
    let scale = g.cell() / g.len() as f64;
    let mut a = 0.0;
    let mut b = 0.0;
    let mut h = 0.0;
    let ny = g.ny();
    for ((r, m), z) in s.coeffs().indexed_iter() {
        let w = if m == 0 || m == ny / 2 { 1.0 } else { 2.0 } * z.norm_sqr();
        let ky = g.ky(m);
        a += w;
        b += w * ky * ky;
        h += w * g.kx(r).abs();
    }
    Quadratics {
        a: a * scale,
        b: b * scale,
        h: h * scale,
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `F(u) = 1/2 int u^2`.
pub fn mass(u: &Field) -> f64 {
    0.5 * u.as_slice().iter().map(|v| v * v).sum::<f64>() * u.grid().cell()
}

/// `J(u) = int u^{p+2}`.
pub fn j_functional(u: &Field, params: &Params) -> Result<f64> {
    let pw = params.power(2);
    let s: f64 = u.as_slice().iter().map(|&v| pw.eval(v)).sum();
    finite(s * u.grid().cell(), "J")
}

/// `E(u) = 1/2 int (eps u_y^2 - alpha u H u_x - 2/((p+1)(p+2)) u^{p+2})`.
pub fn energy(u: &Field, params: &Params) -> Result<f64> {
    params.validate()?;
    let q = quadratics(u);
    let j = j_functional(u, params)?;
    finite(
        0.5 * (params.epsilon * q.b - params.alpha * q.h) - params.cp() * j,
        "energy",
    )
}

/// Squared Z-norm `int u^2 + int u_y^2 + int |D_x^{1/2} u|^2`.
pub fn znorm_sq(u: &Field) -> f64 {
    let q = quadratics(u);
    q.a + q.b + q.h
}

pub fn znorm(u: &Field) -> f64 {
    znorm_sq(u).sqrt()
}

/// Scalar functionals of one field.
///
/// `mass`, `energy` and `action = energy + c mass` use the parameters as
/// given. `I = 1/2 <L u, u>`, `J`, `K` are evaluated after the sign map to
/// the `c > 0` branch, recorded in `mapping`; the scale change to `|c| = 1`
/// is not applied, so their values carry the original speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub energy: f64,
    pub action: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "K")]
    pub k_func: f64,
    pub znorm: f64,
    pub params: Params,
    pub mapping: Mapping,
}

/// Evaluates every functional. Outside the existence regime this fails
/// unless `allow_any_regime` is set, in which case parameters without a
/// valid sign map are used as given.
pub fn zk_functionals(u: &Field, params: &Params, allow_any_regime: bool) -> Result<FunctionalReport> {
    params.validate()?;
    if !allow_any_regime && !params.in_existence_regime() {
        return Err(Error::Regime(format!(
            "functionals requested for p = {}, alpha = {}, epsilon = {}, c = {} \
             outside the existence regime",
            params.p, params.alpha, params.epsilon, params.c
        )));
    }
    let (canon, mapping) = params.canonical().unwrap_or((*params, Mapping::Identity));
    let q = quadratics(u);
    let j_orig = j_functional(u, params)?;
    // The mirror negates u and reflects x; a, b, h are unchanged and J flips
    // sign because its numerator is odd.
    let j = match mapping {
        Mapping::Identity => j_orig,
        Mapping::Mirror => -j_orig,
    };
    let mass = 0.5 * q.a;
    let energy = finite(
        0.5 * (params.epsilon * q.b - params.alpha * q.h) - params.cp() * j_orig,
        "energy",
    )?;
    let i = 0.5 * (canon.c * q.a - canon.alpha * q.h + canon.epsilon * q.b);
    let k_func = 0.5 * (canon.c * q.a + canon.epsilon * q.b) - canon.cp() * j;
    Ok(FunctionalReport {
        mass,
        energy,
        action: energy + params.c * mass,
        i,
        j,
        k_func,
        znorm: (q.a + q.b + q.h).sqrt(),
        params: *params,
        mapping,
    })
}

/// `K` divided by the sum of its term magnitudes.
pub fn k_relative(u: &Field, params: &Params) -> Result<f64> {
    let (canon, mapping) = params
        .canonical()
        .ok_or_else(|| Error::Regime("no sign map to the c > 0 branch".into()))?;
    let v = mapping.apply(u);
    let q = quadratics(&v);
    let j = j_functional(&v, &canon)?;
    let terms = [0.5 * canon.c * q.a, 0.5 * canon.epsilon * q.b, -canon.cp() * j];
    relative(&terms, "K")
}

fn relative(terms: &[f64], what: &str) -> Result<f64> {
    let denom: f64 = terms.iter().map(|t| t.abs()).sum();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Degenerate(format!("{what}: all terms vanish")));
    }
    Ok(terms.iter().sum::<f64>().abs() / denom)
}

/// Normalised residuals of the five integral identities satisfied by every
/// solitary wave. Each is `|sum of terms| / sum |terms|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PohojaevResiduals {
    /// Pairing with `phi`: `int(-c phi^2 + alpha phi H phi_x - eps phi_y^2 + phi^{p+2}/(p+1)) = 0`.
    pub pairing: f64,
    /// x-dilation: `int(c phi^2 + eps phi_y^2 - 2 phi^{p+2}/((p+1)(p+2))) = 0`.
    pub x_dilation: f64,
    /// y-dilation: `int(c phi^2 - alpha phi H phi_x - eps phi_y^2 - 2 phi^{p+2}/((p+1)(p+2))) = 0`.
    pub y_dilation: f64,
    /// `int(2 p c phi^2 + alpha (4 - p) phi H phi_x) = 0`.
    pub dispersive_balance: f64,
    /// `int(p c phi^2 + eps (p - 4) phi_y^2) = 0`.
    pub transverse_balance: f64,
}

impl PohojaevResiduals {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.pairing,
            self.x_dilation,
            self.y_dilation,
            self.dispersive_balance,
            self.transverse_balance,
        ]
    }

    pub fn max(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }
}

pub fn pohojaev_residuals(phi: &Field, params: &Params) -> Result<PohojaevResiduals> {
    params.validate()?;
    if phi.max_abs() == 0.0 {
        return Err(Error::Degenerate(
            "identity residuals are undefined for the zero field".into(),
        ));
    }
    let q = quadratics(phi);
    let j = j_functional(phi, params)?;
    let Params { p, alpha, epsilon: e, c } = *params;
    let cp = params.cp();
    Ok(PohojaevResiduals {
        pairing: relative(&[-c * q.a, alpha * q.h, -e * q.b, j / (p + 1.0)], "pairing")?,
        x_dilation: relative(&[c * q.a, e * q.b, -2.0 * cp * j], "x-dilation")?,
        y_dilation: relative(&[c * q.a, -alpha * q.h, -e * q.b, -2.0 * cp * j], "y-dilation")?,
        dispersive_balance: relative(
            &[2.0 * p * c * q.a, alpha * (4.0 - p) * q.h],
            "dispersive balance",
        )?,
        transverse_balance: relative(&[p * c * q.a, e * (p - 4.0) * q.b], "transverse balance")?,
    })
}

/// `d(c) = p / (2 (p+1)(p+2)) J(phi_c)`.
pub fn d_value(phi: &Field, params: &Params) -> Result<f64> {
    let (canon, mapping) = params
        .canonical()
        .ok_or_else(|| Error::Regime("no sign map to the c > 0 branch".into()))?;
    let j = j_functional(&mapping.apply(phi), &canon)?;
    Ok(0.5 * params.p * params.cp() * j)
}

/// Samples `d(c)` along the wave branch. `solve` returns a converged
/// profile for the given parameters; a failure is tagged with its speed.
pub fn d_of_c_curve<F>(base: &Params, c_values: &[f64], mut solve: F) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(&Params) -> Result<Field>,
{
    base.validate()?;
    let mut out = Vec::with_capacity(c_values.len());
    for &c in c_values {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParams(format!("speed {c} must be positive")));
        }
        let params = base.with_c(c);
        let d = solve(&params)
            .and_then(|phi| d_value(&phi, &params))
            .map_err(|e| Error::Sweep {
                c,
                source: Box::new(e),
            })?;
        out.push((c, d));
    }
    Ok(out)
}

/// Least-squares slope of `log d` against `log c`.
pub fn loglog_slope(curve: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve.iter().map(|&(c, d)| (c.ln(), d.ln())).collect();
    crate::fit::line(&pts).map(|f| f.slope)
}

/// Relative mismatch in `J / ((p+1)(p+2)) = 4 c F / (4 - p)`.
pub fn mass_ratio_check(phi: &Field, params: &Params) -> Result<f64> {
    params.validate()?;
    if params.p == 4.0 {
        return Err(Error::Domain("mass ratio identity is singular at p = 4".into()));
    }
    let (canon, mapping) = params
        .canonical()
        .ok_or_else(|| Error::Regime("no sign map to the c > 0 branch".into()))?;
    let v = mapping.apply(phi);
    let lhs = canon.cp() * j_functional(&v, &canon)?;
    let rhs = 4.0 * canon.c * mass(&v) / (4.0 - canon.p);
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        return Err(Error::Degenerate("both sides of the mass ratio vanish".into()));
    }
    Ok((lhs - rhs).abs() / scale)
}

/// Rectangle-rule check used by tests: `int u` over the box.
pub fn total(u: &Field) -> f64 {
    integrate(u)
}
