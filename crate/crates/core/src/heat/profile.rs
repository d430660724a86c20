//! Lattice sizes, macroscopic initial profiles and fields on `{0, ..., n}`.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Points used to validate profile class membership on `[0, 1]`.
const VALIDATION_GRID: usize = 4096;
const CLASS_SLACK: f64 = 1e-12;

/// Scaling parameter `n >= 2`; the bulk is `{1, ..., n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeSize(usize);

impl LatticeSize {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return domain(format!("lattice size must be at least 2, got {n}"));
        }
        Ok(Self(n))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Number of bulk sites, `n - 1`.
    #[inline]
    pub fn bulk_len(self) -> usize {
        self.0 - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineTerm {
    pub mode: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `u_0 = rho`.
    Flat,
    /// `u_0(x) = rho + amplitude * sin(pi * mode * x)`.
    Sine { amplitude: f64, mode: usize },
    /// `u_0(x) = rho + sum_k a_k sin(pi * k * x)`.
    SineMixture(Vec<SineTerm>),
    /// Piecewise-linear interpolant through values at the uniform nodes `i / (m - 1)`.
    Tabulated(Vec<f64>),
}

/// An initial density profile together with its class parameters
/// `(rho, eps0, kappa)`.
///
/// Construction validates that `eps0 <= u_0 <= 1 - eps0`, that
/// `u_0(0) = u_0(1) = rho` and that `|u_0'| <= kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    kind: ProfileKind,
    rho: f64,
    eps0: f64,
    kappa: f64,
}

impl ProfileSpec {
    pub fn new(kind: ProfileKind, rho: f64, eps0: f64, kappa: f64) -> Result<Self> {
        check_rho(rho)?;
        check_kind(&kind)?;
        let cap = rho.min(1.0 - rho);
        if !(eps0 > 0.0 && eps0 <= cap + CLASS_SLACK) {
            return Err(Error::InvalidProfile(format!(
                "eps0 = {eps0} must lie in (0, min(rho, 1 - rho)] = (0, {cap}]"
            )));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidProfile(format!("kappa = {kappa} must be positive")));
        }
        let spec = Self { kind, rho, eps0, kappa };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a profile with the tightest class parameters its shape admits:
    /// `eps0` is the smallest distance of `u_0` to `{0, 1}` (capped at
    /// `min(rho, 1 - rho)`) and `kappa` the largest slope.
    pub fn with_fitted_class(kind: ProfileKind, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        check_kind(&kind)?;
        let probe = Self { kind, rho, eps0: 0.0, kappa: 0.0 };
        let mut eps0 = rho.min(1.0 - rho);
        let mut kappa: f64 = 0.0;
        for x in probe.validation_points() {
            let u = probe.eval(x);
            eps0 = eps0.min(u).min(1.0 - u);
            kappa = kappa.max(probe.derivative(x).abs());
        }
        if !matches!(probe.kind, ProfileKind::Tabulated(_)) {
            // grid maximum of a smooth slope undershoots the supremum slightly
            kappa *= 1.0 + 1e-6;
        }
        Self::new(probe.kind, rho, eps0, kappa.max(1e-9))
    }

    pub fn flat(rho: f64) -> Result<Self> {
        Self::with_fitted_class(ProfileKind::Flat, rho)
    }

    pub fn sine(rho: f64, amplitude: f64, mode: usize) -> Result<Self> {
        Self::with_fitted_class(ProfileKind::Sine { amplitude, mode }, rho)
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Evaluates `u_0(x)` for `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Flat => self.rho,
            ProfileKind::Sine { amplitude, mode } => {
                self.rho + amplitude * (PI * *mode as f64 * x).sin()
            }
            ProfileKind::SineMixture(terms) => {
                self.rho
                    + terms
                        .iter()
                        .map(|t| t.amplitude * (PI * t.mode as f64 * x).sin())
                        .sum::<f64>()
            }
            ProfileKind::Tabulated(values) => {
                let (i, w) = locate(values.len(), x);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// Slope of `u_0` at `x`; for tabulated profiles the slope of the
    /// segment containing `x` (right segment at interior nodes).
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            ProfileKind::Flat => 0.0,
            ProfileKind::Sine { amplitude, mode } => {
                let k = PI * *mode as f64;
                amplitude * k * (k * x).cos()
            }
            ProfileKind::SineMixture(terms) => terms
                .iter()
                .map(|t| {
                    let k = PI * t.mode as f64;
                    t.amplitude * k * (k * x).cos()
                })
                .sum(),
            ProfileKind::Tabulated(values) => {
                let (i, _) = locate(values.len(), x);
                (values[i + 1] - values[i]) * (values.len() - 1) as f64
            }
        }
    }

    /// Samples `u_0^n(x) = u_0(x / n)` on `{0, ..., n}`; the two ends are set to `rho`.
    pub fn sample(&self, n: LatticeSize) -> DiscreteField {
        let nf = n.as_f64();
        let mut values: Vec<f64> = (0..=n.get()).map(|x| self.eval(x as f64 / nf)).collect();
        values[0] = self.rho;
        values[n.get()] = self.rho;
        DiscreteField { n, values }
    }

    fn validation_points(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = (0..=VALIDATION_GRID)
            .map(|i| i as f64 / VALIDATION_GRID as f64)
            .collect();
        if let ProfileKind::Tabulated(values) = &self.kind {
            let m = values.len() - 1;
            xs.extend((0..=m).map(|i| i as f64 / m as f64));
        }
        xs
    }

    fn validate(&self) -> Result<()> {
        for end in [0.0, 1.0] {
            let u = self.eval(end);
            if (u - self.rho).abs() > 1e-10 {
                return Err(Error::InvalidProfile(format!(
                    "u_0({end}) = {u} differs from rho = {}",
                    self.rho
                )));
            }
        }
        let (lo, hi) = (self.eps0 - CLASS_SLACK, 1.0 - self.eps0 + CLASS_SLACK);
        let slope_cap = self.kappa * (1.0 + 1e-9) + CLASS_SLACK;
        for x in self.validation_points() {
            let u = self.eval(x);
            if !(lo..=hi).contains(&u) {
                return Err(Error::InvalidProfile(format!(
                    "u_0({x}) = {u} leaves [eps0, 1 - eps0] = [{}, {}]",
                    self.eps0,
                    1.0 - self.eps0
                )));
            }
            let d = self.derivative(x).abs();
            if d > slope_cap {
                return Err(Error::InvalidProfile(format!(
                    "|u_0'({x})| = {d} exceeds kappa = {}",
                    self.kappa
                )));
            }
        }
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidProfile(format!("rho = {rho} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_kind(kind: &ProfileKind) -> Result<()> {
    let bad_mode = |m: usize| m == 0;
    match kind {
        ProfileKind::Flat => Ok(()),
        ProfileKind::Sine { amplitude, mode } => {
            if bad_mode(*mode) || !amplitude.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "sine mode must be >= 1 with finite amplitude (mode {mode}, amplitude {amplitude})"
                )));
            }
            Ok(())
        }
        ProfileKind::SineMixture(terms) => {
            if terms.iter().any(|t| bad_mode(t.mode) || !t.amplitude.is_finite()) {
                return Err(Error::InvalidProfile(
                    "sine mixture terms need mode >= 1 and finite amplitude".into(),
                ));
            }
            Ok(())
        }
        ProfileKind::Tabulated(values) => {
            if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidProfile(
                    "tabulated profile needs at least two finite values".into(),
                ));
            }
            Ok(())
        }
    }
}

/// Segment index and interpolation weight of `x` on `m` uniform nodes.
fn locate(m: usize, x: f64) -> (usize, f64) {
    let segments = (m - 1) as f64;
    let pos = (x.clamp(0.0, 1.0) * segments).max(0.0);
    let i = (pos.floor() as usize).min(m - 2);
    (i, pos - i as f64)
}

/// Real values on `{0, ..., n}`, ghost boundary entries included.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    n: LatticeSize,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(n: LatticeSize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n.get() + 1 {
            return domain(format!(
                "field on {{0..{}}} needs {} values, got {}",
                n.get(),
                n.get() + 1,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("field entries must be finite");
        }
        Ok(Self { n, values })
    }

    /// Field with the given bulk values and `boundary` at both ends.
    pub fn from_bulk(n: LatticeSize, boundary: f64, bulk: &[f64]) -> Result<Self> {
        if bulk.len() != n.bulk_len() {
            return domain(format!(
                "bulk of size {} expected, got {}",
                n.bulk_len(),
                bulk.len()
            ));
        }
        let mut values = Vec::with_capacity(n.get() + 1);
        values.push(boundary);
        values.extend_from_slice(bulk);
        values.push(boundary);
        Self::new(n, values)
    }

    pub fn constant(n: LatticeSize, value: f64) -> Self {
        Self { n, values: vec![value; n.get() + 1] }
    }

    pub fn n(&self) -> LatticeSize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries at `x = 1, ..., n-1`.
    pub fn bulk(&self) -> &[f64] {
        &self.values[1..self.n.get()]
    }

    pub fn at(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// Common value at both ends, or `None` when they differ.
    pub fn boundary_value(&self) -> Option<f64> {
        let (a, b) = (self.values[0], self.values[self.n.get()]);
        (a == b).then_some(a)
    }
}
