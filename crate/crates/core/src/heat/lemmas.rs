//! Checkable forms of the eigenvalue, gradient, Riemann-sum and
//! leading-mode estimates for the discrete heat flow.

use std::f64::consts::{LN_2, PI, SQRT_2};

use super::{
    continuum_fourier_coeff, cutoff_time, discrete_fourier_coeff, discrete_gradient_sup,
    eigenfunction_unchecked, eigenvalue_unchecked, find_leading_mode, HeatSolution, LatticeSize,
    ProfileSpec, LEADING_MODE_TOL,
};
use crate::check::Check;
use crate::error::Result;

const FP_SLACK: f64 = 1e-12;

/// `lambda_l / lambda_{l0} >= l / l0` whenever `l0 <= min(l, n/2)`, for every `n <= n_max`.
pub fn eigenvalue_ratio(n_max: usize) -> Check {
    let mut worst = f64::INFINITY;
    let mut at = (0, 0, 0);
    for n in 2..=n_max {
        let lambda: Vec<f64> = (1..n).map(|l| eigenvalue_unchecked(n, l)).collect();
        for l0 in 1..=(n / 2) {
            for l in l0..n {
                let margin = lambda[l - 1] / lambda[l0 - 1] - l as f64 / l0 as f64;
                if margin < worst {
                    worst = margin;
                    at = (n, l0, l);
                }
            }
        }
    }
    Check::new(
        format!("eigenvalue ratio, n <= {n_max}"),
        worst >= -FP_SLACK,
        worst,
        format!("tightest at (n, l0, l) = {at:?}"),
    )
}

/// `lambda_1 >= 3 pi^2 / 4` and `|lambda_l / (pi l)^2 - 1| <= (pi l)^2 / (12 n^2)`.
pub fn eigenvalue_bounds(n_max: usize) -> Check {
    let floor = 0.75 * PI * PI;
    let mut worst_gap = f64::INFINITY;
    let mut worst_rel = f64::INFINITY;
    for n in 2..=n_max {
        let nf = n as f64;
        worst_gap = worst_gap.min(eigenvalue_unchecked(n, 1) - floor);
        for l in 1..n {
            let pl2 = (PI * l as f64).powi(2);
            let dev = (eigenvalue_unchecked(n, l) / pl2 - 1.0).abs();
            worst_rel = worst_rel.min(pl2 / (12.0 * nf * nf) - dev);
        }
    }
    let margin = worst_gap.min(worst_rel);
    Check::new(
        format!("eigenvalue bounds, n <= {n_max}"),
        worst_gap >= -FP_SLACK && worst_rel >= -FP_SLACK,
        margin,
        format!("min(lambda_1 - 3pi^2/4) = {worst_gap:.4e}, min relative-bound slack = {worst_rel:.3e}"),
    )
}

/// `n |u_t(x+1) - u_t(x)| <= 8 pi exp(-lambda_1 t)` for `t >= log 2 / lambda_1`.
///
/// `multiples` scales the threshold time. The detail string also reports
/// the worst ratio against the sharper `8 pi exp(-pi^2 t)`, which is a
/// diagnostic only.
pub fn gradient_decay(profiles: &[ProfileSpec], ns: &[usize], multiples: &[f64]) -> Result<Check> {
    let mut worst = f64::INFINITY;
    let mut sharp_worst: f64 = 0.0;
    for p in profiles {
        for &n in ns {
            let n = LatticeSize::new(n)?;
            let sol = HeatSolution::from_profile(p, n);
            let lambda1 = eigenvalue_unchecked(n.get(), 1);
            for &m in multiples {
                let t = m.max(1.0) * LN_2 / lambda1;
                let grad = discrete_gradient_sup(&sol.solve_heat_at(t)?);
                let bound = 8.0 * PI * (-lambda1 * t).exp();
                worst = worst.min((bound - grad) / bound);
                sharp_worst = sharp_worst.max(grad / (8.0 * PI * (-PI * PI * t).exp()));
            }
        }
    }
    Ok(Check::from_margin(
        "gradient decay",
        worst,
        format!("relative slack; diagnostic sup grad / 8pi e^(-pi^2 t) = {sharp_worst:.3}"),
    ))
}

#[derive(Debug, Clone)]
pub struct RiemannFit {
    /// `(n, max_l n |c_l^n - c_l|)` per lattice size.
    pub scaled_errors: Vec<(usize, f64)>,
    /// Fitted constant `C`: the largest scaled error.
    pub fitted: f64,
    /// `max_l sup |((u_0 - rho) phi_l)'| / 2`, the a-priori constant.
    pub bound: f64,
}

/// `|c_l^n - c_l| <= C / n` for `l <= ell_max`, with `C` fitted over `ns`.
pub fn riemann_error(profile: &ProfileSpec, ell_max: usize, ns: &[usize]) -> Result<(Check, RiemannFit)> {
    let continuum: Vec<f64> = (1..=ell_max)
        .map(|l| continuum_fourier_coeff(profile, l))
        .collect::<Result<_>>()?;
    let mut scaled_errors = Vec::with_capacity(ns.len());
    for &n in ns {
        let lattice = LatticeSize::new(n)?;
        let field = profile.sample(lattice);
        let mut worst: f64 = 0.0;
        for l in 1..=ell_max.min(n - 1) {
            let err = (discrete_fourier_coeff(&field, l)? - continuum[l - 1]).abs();
            worst = worst.max(n as f64 * err);
        }
        scaled_errors.push((n, worst));
    }
    let fitted = scaled_errors.iter().map(|e| e.1).fold(0.0, f64::max);
    // |(g phi_l)'| <= sqrt(2) (kappa + pi l sup|g|) with g = u_0 - rho
    let sup_dev = (0..=4096)
        .map(|i| (profile.eval(i as f64 / 4096.0) - profile.rho()).abs())
        .fold(0.0, f64::max);
    let bound = SQRT_2 * (profile.kappa() + PI * ell_max as f64 * sup_dev) / 2.0;
    let check = Check::new(
        "Riemann-sum coefficient error",
        fitted.is_finite() && fitted <= bound + FP_SLACK,
        bound - fitted,
        format!("fitted C = {fitted:.4e}, a-priori C = {bound:.4e}"),
    );
    Ok((check, RiemannFit { scaled_errors, fitted, bound }))
}

/// `sup_{x, |b| <= b_max} |sqrt(n)(u_{t^n(b)}(x) - rho) - c_{l0} e^{-b} phi_{l0}(x)|`.
pub fn leading_mode_deviation(profile: &ProfileSpec, n: usize, b_grid: &[f64]) -> Result<f64> {
    let l0 = find_leading_mode(profile, 64, LEADING_MODE_TOL)?;
    let c0 = continuum_fourier_coeff(profile, l0)?;
    let lattice = LatticeSize::new(n)?;
    let sol = HeatSolution::from_profile(profile, lattice);
    let sqrt_n = (n as f64).sqrt();
    let mut worst: f64 = 0.0;
    for &b in b_grid {
        let t = cutoff_time(n as f64, l0, b).t;
        let u = sol.solve_heat_at(t)?;
        for x in 1..n {
            let dev = sqrt_n * (u.at(x) - profile.rho())
                - c0 * (-b).exp() * eigenfunction_unchecked(n, l0, x);
            worst = worst.max(dev.abs());
        }
    }
    Ok(worst)
}

/// The leading-mode deviation decreases strictly along `ns`.
pub fn leading_mode(profile: &ProfileSpec, ns: &[usize], b_grid: &[f64]) -> Result<(Check, Vec<(usize, f64)>)> {
    let devs: Vec<(usize, f64)> = ns
        .iter()
        .map(|&n| leading_mode_deviation(profile, n, b_grid).map(|d| (n, d)))
        .collect::<Result<_>>()?;
    let margin = devs
        .windows(2)
        .map(|w| w[0].1 - w[1].1)
        .fold(f64::INFINITY, f64::min);
    let detail = devs
        .iter()
        .map(|(n, d)| format!("n={n}: {d:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((Check::new("leading-mode asymptotics", margin > 0.0, margin, detail), devs))
}

/// The flow started in `[eps0, 1 - eps0]` stays there.
pub fn maximum_principle(profile: &ProfileSpec, ns: &[usize], times: &[f64]) -> Result<Check> {
    let lo = profile.eps0() - FP_SLACK;
    let hi = 1.0 - profile.eps0() + FP_SLACK;
    let mut worst = f64::INFINITY;
    for &n in ns {
        let sol = HeatSolution::from_profile(profile, LatticeSize::new(n)?);
        for &t in times {
            for &u in sol.solve_heat_at(t)?.values() {
                worst = worst.min(u - lo).min(hi - u);
            }
        }
    }
    Ok(Check::from_margin("maximum principle", worst, format!("eps' = eps0 - {FP_SLACK:e}")))
}
