//! Discrete heat equation on `{0, ..., n}` with Dirichlet data `rho`,
//! solved through its sine-mode expansion.
//!
//! `u_t(x) = rho + sum_l c_l exp(-lambda_l t) phi_l(x)` with
//! `phi_l(x) = sqrt(2) sin(pi l x / n)` and `lambda_l = 4 n^2 sin^2(pi l / 2n)`.

mod dst;
pub mod lemmas;
mod profile;

use std::f64::consts::{PI, SQRT_2};

pub use profile::{DiscreteField, LatticeSize, ProfileKind, ProfileSpec, SineTerm};

use crate::error::{domain, Error, Result};
use crate::quad::adaptive_simpson;

/// Default threshold below which a continuum coefficient counts as zero.
pub const LEADING_MODE_TOL: f64 = 1e-9;
/// Absolute tolerance for quadrature of continuum coefficients.
pub const COEFF_QUAD_TOL: f64 = 1e-10;
/// Largest `n` evaluated by direct summation when no method is requested.
pub const DIRECT_SUM_LIMIT: usize = 512;

pub fn eigenvalue(n: LatticeSize, ell: usize) -> Result<f64> {
    if ell == 0 || ell >= n.get() {
        return domain(format!("mode {ell} outside 1..={}", n.get() - 1));
    }
    Ok(eigenvalue_unchecked(n.get(), ell))
}

#[inline]
pub(crate) fn eigenvalue_unchecked(n: usize, ell: usize) -> f64 {
    let nf = n as f64;
    let s = (PI * ell as f64 / (2.0 * nf)).sin();
    4.0 * nf * nf * s * s
}

pub fn eigenfunction(n: LatticeSize, ell: usize, x: usize) -> Result<f64> {
    if x > n.get() {
        return domain(format!("site {x} outside 0..={}", n.get()));
    }
    Ok(eigenfunction_unchecked(n.get(), ell, x))
}

#[inline]
pub(crate) fn eigenfunction_unchecked(n: usize, ell: usize, x: usize) -> f64 {
    // reduce ell * x mod 2n first so large products keep full precision
    let k = (ell * x) % (2 * n);
    SQRT_2 * (PI * k as f64 / n as f64).sin()
}

/// `c_l^n = (1/n) sum_{x in bulk} (u(x) - rho) phi_l(x)`, with `rho` read
/// from the field's boundary entries.
pub fn discrete_fourier_coeff(field: &DiscreteField, ell: usize) -> Result<f64> {
    let n = field.n();
    let rho = field
        .boundary_value()
        .ok_or_else(|| Error::Domain("field boundary entries differ".into()))?;
    if ell == 0 || ell >= n.get() {
        return domain(format!("mode {ell} outside 1..={}", n.get() - 1));
    }
    let sum: f64 = field
        .bulk()
        .iter()
        .enumerate()
        .map(|(i, u)| (u - rho) * eigenfunction_unchecked(n.get(), ell, i + 1))
        .sum();
    Ok(sum / n.as_f64())
}

/// `c_l(u_0) = sqrt(2) int_0^1 (u_0(x) - rho) sin(pi l x) dx`.
///
/// Sine families use the closed form; tabulated profiles are integrated
/// segment by segment with adaptive Simpson.
pub fn continuum_fourier_coeff(profile: &ProfileSpec, ell: usize) -> Result<f64> {
    if ell == 0 {
        return domain("mode index starts at 1");
    }
    match profile.kind() {
        ProfileKind::Flat => Ok(0.0),
        ProfileKind::Sine { amplitude, mode } => {
            Ok(if *mode == ell { amplitude / SQRT_2 } else { 0.0 })
        }
        ProfileKind::SineMixture(terms) => Ok(terms
            .iter()
            .filter(|t| t.mode == ell)
            .map(|t| t.amplitude / SQRT_2)
            .sum()),
        ProfileKind::Tabulated(values) => {
            let rho = profile.rho();
            let k = PI * ell as f64;
            let segments = values.len() - 1;
            let tol = COEFF_QUAD_TOL / segments as f64;
            // oscillations per segment decide the initial panel count
            let panels = 2 + ell / segments.max(1);
            let mut total = 0.0;
            for s in 0..segments {
                let (a, b) = (s as f64 / segments as f64, (s + 1) as f64 / segments as f64);
                total += adaptive_simpson(
                    |x| (profile.eval(x) - rho) * (k * x).sin(),
                    a,
                    b,
                    tol / SQRT_2,
                    panels,
                )?;
            }
            Ok(SQRT_2 * total)
        }
    }
}

/// Smallest `l <= ell_max` with `|c_l(u_0)| > tol`.
pub fn find_leading_mode(profile: &ProfileSpec, ell_max: usize, tol: f64) -> Result<usize> {
    for ell in 1..=ell_max {
        if continuum_fourier_coeff(profile, ell)?.abs() > tol {
            return Ok(ell);
        }
    }
    Err(Error::NoDetectableMode { ell_max, tol })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumMethod {
    /// `O(n)` sum per site; the reference path.
    Direct,
    /// Fast sine transform over all sites at once.
    Transform,
}

impl SumMethod {
    fn auto(n: LatticeSize) -> Self {
        if n.get() <= DIRECT_SUM_LIMIT {
            Self::Direct
        } else {
            Self::Transform
        }
    }
}

/// Spectral data of the discrete heat flow started from a given field.
#[derive(Debug, Clone)]
pub struct HeatSolution {
    n: LatticeSize,
    rho: f64,
    initial: DiscreteField,
    /// `coeffs[l - 1] = c_l^n`.
    coeffs: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl HeatSolution {
    pub fn from_profile(profile: &ProfileSpec, n: LatticeSize) -> Self {
        Self::from_field(&profile.sample(n)).expect("sampled profiles have equal boundary values")
    }

    /// Heat flow from an arbitrary initial field; the boundary entries fix `rho`.
    pub fn from_field(field: &DiscreteField) -> Result<Self> {
        Self::from_field_with(field, SumMethod::auto(field.n()))
    }

    pub fn from_field_with(field: &DiscreteField, method: SumMethod) -> Result<Self> {
        let n = field.n();
        let rho = field
            .boundary_value()
            .ok_or_else(|| Error::Domain("field boundary entries differ".into()))?;
        let coeffs = match method {
            SumMethod::Direct => (1..n.get())
                .map(|ell| discrete_fourier_coeff(field, ell))
                .collect::<Result<Vec<_>>>()?,
            SumMethod::Transform => {
                let centered: Vec<f64> = field.bulk().iter().map(|u| u - rho).collect();
                let scale = SQRT_2 / n.as_f64();
                dst::dst1(&centered).into_iter().map(|v| v * scale).collect()
            }
        };
        let eigenvalues = (1..n.get()).map(|ell| eigenvalue_unchecked(n.get(), ell)).collect();
        Ok(Self { n, rho, initial: field.clone(), coeffs, eigenvalues })
    }

    pub fn n(&self) -> LatticeSize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn initial(&self) -> &DiscreteField {
        &self.initial
    }

    /// `c_l^n` for `l = 1, ..., n-1`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn solve_heat_at(&self, t: f64) -> Result<DiscreteField> {
        self.solve_heat_at_with(t, SumMethod::auto(self.n))
    }

    pub fn solve_heat_at_with(&self, t: f64, method: SumMethod) -> Result<DiscreteField> {
        let amps = self.mode_amplitudes(t, |_| 1.0)?;
        let bulk = self.synthesize(&amps, method);
        let bulk: Vec<f64> = bulk.into_iter().map(|v| self.rho + v).collect();
        DiscreteField::from_bulk(self.n, self.rho, &bulk)
    }

    /// `d/dt u_t = Delta_n u_t`, evaluated from the spectral form; the
    /// boundary entries are zero.
    pub fn time_derivative_at(&self, t: f64) -> Result<DiscreteField> {
        let amps = self.mode_amplitudes(t, |lambda| -lambda)?;
        let bulk = self.synthesize(&amps, SumMethod::auto(self.n));
        DiscreteField::from_bulk(self.n, 0.0, &bulk)
    }

    fn mode_amplitudes(&self, t: f64, weight: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return domain(format!("time must be finite and >= 0, got {t}"));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, &lambda)| c * weight(lambda) * (-lambda * t).exp())
            .collect())
    }

    /// `sum_l amps[l-1] phi_l(x)` for every bulk `x`.
    fn synthesize(&self, amps: &[f64], method: SumMethod) -> Vec<f64> {
        let n = self.n.get();
        match method {
            SumMethod::Direct => (1..n)
                .map(|x| {
                    amps.iter()
                        .enumerate()
                        .map(|(i, a)| a * eigenfunction_unchecked(n, i + 1, x))
                        .sum()
                })
                .collect(),
            SumMethod::Transform => dst::dst1(amps).into_iter().map(|v| v * SQRT_2).collect(),
        }
    }
}

/// `max_{x in 0..n} n |u(x+1) - u(x)|`.
pub fn discrete_gradient_sup(field: &DiscreteField) -> f64 {
    let n = field.n().as_f64();
    field
        .values()
        .windows(2)
        .map(|w| n * (w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

/// Cutoff time, clamped at zero when the formula goes negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffTime {
    pub t: f64,
    pub clamped: bool,
}

/// `t^n(b) = log(n) / (2 pi^2 l0^2) + b / (pi^2 l0^2)`.
///
/// `n` is real-valued so that the schedule can be evaluated off the integers.
pub fn cutoff_time(n: f64, ell0: usize, b: f64) -> CutoffTime {
    let scale = PI * PI * (ell0 * ell0) as f64;
    let t = 0.5 * n.ln() / scale + b / scale;
    if t < 0.0 {
        CutoffTime { t: 0.0, clamped: true }
    } else {
        CutoffTime { t, clamped: false }
    }
}
