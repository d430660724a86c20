//! Small curve fits used to summarize decay curves.

use crate::error::{domain, Result};

/// `y ~ c e^(-rate t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub c: f64,
    pub rate: f64,
    /// Sum of squared residuals in the scale the fit was made in.
    pub residual: f64,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.c * (-self.rate * t).exp()
    }
}

fn check(t: &[f64], y: &[f64]) -> Result<()> {
    if t.len() != y.len() || t.len() < 2 {
        return domain(format!("need matching samples, at least two; got {} and {}", t.len(), y.len()));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return domain("samples must be finite");
    }
    Ok(())
}

/// Ordinary least squares of `y - c e^(-rate t)`.
///
/// For fixed `rate` the best `c` is explicit, which leaves a one-dimensional
/// profile over `rate`; it is bracketed on a log grid and refined by golden
/// section search.
pub fn exponential_least_squares(t: &[f64], y: &[f64]) -> Result<ExpFit> {
    check(t, y)?;
    let profile = |rate: f64| -> (f64, f64) {
        let (mut sy, mut ss) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let e = (-rate * ti).exp();
            sy += yi * e;
            ss += e * e;
        }
        let c = if ss > 0.0 { sy / ss } else { 0.0 };
        let res = t.iter().zip(y).map(|(&ti, &yi)| (yi - c * (-rate * ti).exp()).powi(2)).sum();
        (c, res)
    };
    let span = t.iter().copied().fold(f64::NEG_INFINITY, f64::max) - t.iter().copied().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return domain("sample times must not all coincide");
    }
    // rates from essentially flat to decaying by e^-200 over the span
    let grid: Vec<f64> = (0..=400).map(|k| 1e-6 * (2e8f64).powf(k as f64 / 400.0) / span).collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(k, &r)| (k, profile(r).1))
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (profile(x1).1, profile(x2).1);
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = profile(x1).1;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = profile(x2).1;
        }
        if (b - a) <= 1e-13 * b {
            break;
        }
    }
    let rate = 0.5 * (a + b);
    let (c, residual) = profile(rate);
    Ok(ExpFit { c, rate, residual })
}

/// Least-squares line through `(t, log y)`; requires `y > 0`.
pub fn log_linear_fit(t: &[f64], y: &[f64]) -> Result<ExpFit> {
    check(t, y)?;
    if y.iter().any(|v| *v <= 0.0) {
        return domain("log-linear fit needs positive values");
    }
    let m = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let tm = t.iter().sum::<f64>() / m;
    let lm = ly.iter().sum::<f64>() / m;
    let sxx: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
    if sxx == 0.0 {
        return domain("sample times must not all coincide");
    }
    let sxy: f64 = t.iter().zip(&ly).map(|(a, b)| (a - tm) * (b - lm)).sum();
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let residual = t.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(ExpFit { c: intercept.exp(), rate: -slope, residual })
}
