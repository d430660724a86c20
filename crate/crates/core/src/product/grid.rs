//! Certified total variation for product laws by convolution on a grid.
//!
//! With `C = sum_x a(x)(eta_x - rho)` and `g(z) = (e^z - 1)_+`, the
//! distance is `E g(C - b)` because `E e^(C - b) = 1`. `g` is convex, so
//! two discretizations of the law of `C` bracket it:
//!
//! * spreading every atom linearly onto its two neighbouring grid points
//!   keeps the mean and only adds spread, which can only raise `E g`;
//! * merging the atoms that fall into one bin into a single atom at their
//!   mean is a conditional expectation, which can only lower `E g`.
//!
//! The sites are convolved one at a time inside a window `[-W, W]`. The
//! spread law drops mass leaving the window and charges it through
//! Cauchy-Schwarz and the Azuma-Hoeffding exponential-moment bound; the
//! merged law keeps such atoms in the edge bins.

use super::{check_rho, llr_coefficients, BernoulliField};
use crate::error::{Error, Result};

pub const DEFAULT_GRID_BINS: usize = 1 << 15;
/// Target for the Hoeffding tail term when sizing the window.
const TAIL_TARGET: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub bins: usize,
    /// Fail with [`Error::UnreachableTolerance`] when the certified error exceeds this.
    pub tol: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { bins: DEFAULT_GRID_BINS, tol: None }
    }
}

/// Discretized law of the centered statistic `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    pub origin: f64,
    pub spacing: f64,
    pub mass: Vec<f64>,
    /// Mass pushed outside the window during the convolution.
    pub escaped: f64,
    /// Upper bound on `|E g(C - b) - E g(C_grid - b)|` from rounding onto the grid.
    pub rounding_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTv {
    /// Midpoint of the certified bracket.
    pub value: f64,
    /// Half-width of the bracket; `|TV - value| <= error_bound`.
    pub error_bound: f64,
    pub lower: f64,
    pub upper: f64,
    /// Hoeffding charge for escaped mass, already included in `upper`.
    pub tail_bound: f64,
    /// The upper (mean-preserving spread) discretization.
    pub law: GridDistribution,
}

#[inline]
fn excess(z: f64) -> f64 {
    if z > 0.0 {
        z.exp_m1()
    } else {
        0.0
    }
}

pub fn tv_grid_dp(field: &BernoulliField, rho: f64, spec: GridSpec) -> Result<GridTv> {
    check_rho(rho)?;
    if spec.bins < 3 {
        return Err(Error::Domain(format!("grid needs at least 3 bins, got {}", spec.bins)));
    }
    let coeffs = llr_coefficients(field, rho)?;
    if coeffs.is_trivial() {
        return Ok(GridTv {
            value: 0.0,
            error_bound: 0.0,
            lower: 0.0,
            upper: 0.0,
            tail_bound: 0.0,
            law: GridDistribution {
                origin: 0.0,
                spacing: 0.0,
                mass: vec![1.0],
                escaped: 0.0,
                rounding_bound: 0.0,
            },
        });
    }
    let a = &coeffs.a;
    let bsum = coeffs.bsum;

    // every partial sum lies within the full support
    let full = a.iter().map(|v| v.abs()).sum::<f64>() * rho.max(1.0 - rho);
    // Hoeffding window, sized with the spacing a window of `full` would give
    let h_guess = 2.0 * full / (spec.bins - 1) as f64;
    // conditional ranges of the spread increments, plus the split of the start atom
    let sum_c2 =
        |h: f64| a.iter().map(|v| (v.abs() + 2.0 * h).powi(2)).sum::<f64>() + (2.0 * h).powi(2);
    let c2 = sum_c2(h_guess);
    let log_budget = (c2 / 4.0 - bsum + (std::f64::consts::SQRT_2 / TAIL_TARGET).ln()).max(0.0);
    let hoeffding = (c2 * log_budget).sqrt();
    let half = (full * 1.05).min(hoeffding);
    let h = 2.0 * half / (spec.bins - 1) as f64;
    let origin = -half;

    let upper_law = spread_convolution(a, rho, origin, h, spec.bins);
    let (lo_mass, lo_moment) = merge_convolution(a, rho, origin, h, spec.bins);

    let upper_in: f64 = upper_law
        .0
        .iter()
        .enumerate()
        .map(|(j, m)| m * excess(origin + j as f64 * h - bsum))
        .sum();
    let lower: f64 = lo_mass
        .iter()
        .zip(&lo_moment)
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, mom)| m * excess(mom / m - bsum))
        .sum();
    let escaped = upper_law.1;
    // E[e^(C~ - b); escaped] <= e^-b sqrt(E e^(2 C~)) sqrt(P(escaped))
    let tail_bound = if escaped > 0.0 {
        (-bsum + sum_c2(h) / 4.0).exp() * escaped.sqrt()
    } else {
        0.0
    };
    let upper = upper_in + tail_bound;
    // floating-point accumulation over sites and bins
    let fp = 1e-13 * (1.0 + upper.abs()) * (a.len() as f64).sqrt();
    let lower = lower.min(upper);
    let value = 0.5 * (upper + lower);
    let error_bound = 0.5 * (upper - lower) + fp;
    if let Some(tol) = spec.tol {
        if error_bound > tol {
            return Err(Error::UnreachableTolerance { requested: tol, achieved: error_bound });
        }
    }
    Ok(GridTv {
        value,
        error_bound,
        lower,
        upper,
        tail_bound,
        law: GridDistribution {
            origin,
            spacing: h,
            mass: upper_law.0,
            escaped,
            rounding_bound: 0.5 * (upper_in - lower).max(0.0),
        },
    })
}

/// Convolution where each shifted atom is split linearly between its two
/// neighbouring grid points. Returns the grid masses and the escaped mass.
fn spread_convolution(a: &[f64], rho: f64, origin: f64, h: f64, bins: usize) -> (Vec<f64>, f64) {
    let mut cur = vec![0.0; bins];
    let mut next = vec![0.0; bins];
    // the start atom sits at 0, which need not be a grid point
    let zpos = -origin / h;
    let j0 = (zpos.floor() as usize).min(bins - 2);
    let f0 = zpos - j0 as f64;
    cur[j0] = 1.0 - f0;
    cur[j0 + 1] = f0;
    let (mut lo, mut hi) = (j0, j0 + 1);
    let mut escaped = 0.0;
    let last = bins as isize - 1;
    for &ax in a {
        let moves = [(-ax * rho, 1.0 - rho), (ax * (1.0 - rho), rho)];
        let (mut new_lo, mut new_hi) = (last, 0isize);
        for (shift, weight) in moves {
            let s = shift / h;
            let k = s.floor();
            let frac = s - k;
            let k = k as isize;
            let w_near = weight * (1.0 - frac);
            let w_far = weight * frac;
            for j in lo..=hi {
                let m = cur[j];
                if m == 0.0 {
                    continue;
                }
                let t = j as isize + k;
                for (t, w) in [(t, w_near), (t + 1, w_far)] {
                    if (0..=last).contains(&t) {
                        next[t as usize] += m * w;
                    } else {
                        escaped += m * w;
                    }
                }
            }
            new_lo = new_lo.min(lo as isize + k);
            new_hi = new_hi.max(hi as isize + k + 1);
        }
        cur[lo..=hi].fill(0.0);
        std::mem::swap(&mut cur, &mut next);
        lo = new_lo.clamp(0, last) as usize;
        hi = new_hi.clamp(0, last) as usize;
    }
    (cur, escaped)
}

/// Convolution where each bin keeps one atom at the mean of the mass it
/// received. Nothing is dropped: atoms leaving the window are merged into
/// the edge bins. Returns masses and first moments.
fn merge_convolution(
    a: &[f64],
    rho: f64,
    origin: f64,
    h: f64,
    bins: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut mass = vec![0.0; bins];
    let mut moment = vec![0.0; bins];
    let mut next_mass = vec![0.0; bins];
    let mut next_moment = vec![0.0; bins];
    let bin_of = |pos: f64| ((pos - origin) / h).round();
    let start = bin_of(0.0) as usize;
    mass[start] = 1.0;
    let (mut lo, mut hi) = (start, start);
    for &ax in a {
        let moves = [(-ax * rho, 1.0 - rho), (ax * (1.0 - rho), rho)];
        let (mut new_lo, mut new_hi) = (usize::MAX, 0usize);
        for j in lo..=hi {
            let m = mass[j];
            if m == 0.0 {
                continue;
            }
            let mean = moment[j] / m;
            for (shift, weight) in moves {
                let pos = mean + shift;
                // atoms beyond the window join the edge bin
                let t = bin_of(pos).clamp(0.0, (bins - 1) as f64) as usize;
                let mw = m * weight;
                next_mass[t] += mw;
                next_moment[t] += mw * pos;
                new_lo = new_lo.min(t);
                new_hi = new_hi.max(t);
            }
        }
        mass[lo..=hi].fill(0.0);
        moment[lo..=hi].fill(0.0);
        std::mem::swap(&mut mass, &mut next_mass);
        std::mem::swap(&mut moment, &mut next_moment);
        lo = new_lo;
        hi = new_hi;
    }
    (mass, moment)
}

#[cfg(test)]
mod tests {
    use super::super::tv_exact_enum;
    use super::*;
    use proptest::prelude::*;

    fn field(p: &[f64]) -> BernoulliField {
        BernoulliField::new(p.to_vec()).unwrap()
    }

    #[test]
    fn constant_field_is_exactly_zero() {
        let r = tv_grid_dp(&field(&[0.4; 6]), 0.4, GridSpec::default()).unwrap();
        assert_eq!((r.value, r.error_bound), (0.0, 0.0));
    }

    #[test]
    fn two_site_example() {
        let r = tv_grid_dp(&field(&[0.6, 0.6]), 0.5, GridSpec::default()).unwrap();
        assert!(r.error_bound <= 1e-4, "{r:?}");
        assert!((r.value - 0.11).abs() <= r.error_bound);
    }

    #[test]
    fn masses_are_a_probability_vector() {
        let p: Vec<f64> = (1..40).map(|x| 0.5 + 0.3 * (x as f64 / 40.0 * 3.0).sin()).collect();
        let r = tv_grid_dp(&field(&p), 0.5, GridSpec { bins: 4096, tol: None }).unwrap();
        assert!(r.law.mass.iter().all(|&m| m >= 0.0));
        let total: f64 = r.law.mass.iter().sum::<f64>() + r.law.escaped;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_tolerance_reports_bound() {
        let p: Vec<f64> = (1..200).map(|x| 0.5 + 0.2 * (x as f64 / 200.0 * 3.14).sin()).collect();
        let err = tv_grid_dp(&field(&p), 0.5, GridSpec { bins: 16, tol: Some(1e-12) }).unwrap_err();
        match err {
            Error::UnreachableTolerance { achieved, .. } => assert!(achieved > 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bracket_contains_exact_value(
            p in prop::collection::vec(0.05f64..0.95, 1..12),
            rho in 0.1f64..0.9,
            bins in prop::sample::select(vec![257usize, 2048, 1 << 15]),
        ) {
            let f = field(&p);
            let exact = tv_exact_enum(&f, rho).unwrap();
            let r = tv_grid_dp(&f, rho, GridSpec { bins, tol: None }).unwrap();
            prop_assert!(r.lower <= exact + 1e-12, "lower {} > exact {}", r.lower, exact);
            prop_assert!(r.upper >= exact - 1e-12, "upper {} < exact {}", r.upper, exact);
            prop_assert!((r.value - exact).abs() <= r.error_bound);
        }
    }
}
