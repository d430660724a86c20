//! Forward evolution `mu_t = mu_0 e^{t L}` by uniformization.
//!
//! With `R` the dominating rate and `P = I + L / R`, `mu_t` is the
//! Poisson(`R t`) mixture of `mu_0 P^k`. Every term is a probability vector,
//! so nonnegativity and mass are preserved by construction; the only error
//! is the discarded Poisson tail, which is bounded explicitly.

use super::{DistributionVector, GeneratorSpec};
use crate::error::{domain, Error, Result};

/// Total-variation budget for the discarded Poisson tails of one evolution.
pub const EVOLVE_TOL: f64 = 1e-13;

/// Normalized Poisson weights on `first..first + weights.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonWindow {
    pub first: usize,
    pub weights: Vec<f64>,
    /// Poisson mass outside the window (before normalization).
    pub tail: f64,
}

/// Poisson(`lambda`) weights covering all but `tol` of the mass.
///
/// Weights are generated by the ratio recurrence outwards from the mode,
/// which avoids the cancellation of `-lambda + k log(lambda)` for large
/// `lambda`; the window is then normalized.
pub fn poisson_window(lambda: f64, tol: f64) -> Result<PoissonWindow> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return domain(format!("Poisson mean {lambda} must be finite and nonnegative"));
    }
    if lambda == 0.0 {
        return Ok(PoissonWindow { first: 0, weights: vec![1.0], tail: 0.0 });
    }
    let mode = lambda.floor() as usize;
    // relative weights, mode = 1
    let cut = tol * 1e-3;
    let mut up = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    loop {
        w *= lambda / (k + 1) as f64;
        k += 1;
        if w < cut {
            break;
        }
        up.push(w);
    }
    let mut down = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k > 0 {
        w *= k as f64 / lambda;
        k -= 1;
        if w < cut {
            break;
        }
        down.push(w);
    }
    let first = mode - down.len();
    let mut weights: Vec<f64> = down.into_iter().rev().collect();
    weights.push(1.0);
    weights.extend(up);
    // past the window the ratios are at most those at its edges, so the
    // tails are dominated by geometric series
    let total: f64 = weights.iter().sum();
    let last = first + weights.len() - 1;
    let r_up = lambda / (last + 2) as f64;
    let w_up = weights[weights.len() - 1] * lambda / (last + 1) as f64;
    let tail_up = w_up / (1.0 - r_up);
    let tail_down = if first > 0 {
        let r_down = (first - 1) as f64 / lambda;
        weights[0] * first as f64 / lambda / (1.0 - r_down)
    } else {
        0.0
    };
    // the mode weight itself is at most 1 in absolute terms
    let tail = (tail_up + tail_down) / total;
    if tail > tol {
        return Err(Error::Numerical {
            routine: "poisson_window",
            detail: format!("tail {tail:e} exceeds {tol:e} for mean {lambda}"),
        });
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(PoissonWindow { first, weights, tail })
}

/// One uniformized step `mu -> mu P`, written into `out`.
fn step(g: &GeneratorSpec, rate: f64, mu: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (s, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let mut leave = 0.0;
        g.for_each_move(s, |t, r| {
            let p = m * r / rate;
            out[t] += p;
            leave += p;
        });
        out[s] += m - leave;
    }
}

/// `v e^{t L}` for any row vector `v`, by uniformization.
///
/// Linear in `v`, so it also evolves signed deviations such as
/// `mu_0 - nu_rho` with an error relative to their own size.
pub fn evolve_vector(g: &GeneratorSpec, v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time {t} must be finite and nonnegative"));
    }
    let size = g.space()?.size();
    if v.len() != size {
        return Err(Error::MismatchedSpaces(v.len(), size));
    }
    if t == 0.0 {
        return Ok(v.to_vec());
    }
    let rate = g.uniform_rate();
    let window = poisson_window(rate * t, EVOLVE_TOL)?;
    let mut cur = v.to_vec();
    let mut next = vec![0.0; size];
    let mut acc = vec![0.0; size];
    let last = window.first + window.weights.len();
    for k in 0..last {
        if k >= window.first {
            let w = window.weights[k - window.first];
            for (a, c) in acc.iter_mut().zip(&cur) {
                *a += w * c;
            }
        }
        if k + 1 < last {
            step(g, rate, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    Ok(acc)
}

/// Law at time `t` of the chain started from `mu0`.
pub fn forward_evolve(g: &GeneratorSpec, mu0: &DistributionVector, t: f64) -> Result<DistributionVector> {
    if mu0.space() != g.space()? {
        return Err(Error::MismatchedSpaces(mu0.space().sites(), g.sites()));
    }
    let mass = evolve_vector(g, mu0.mass(), t)?;
    Ok(DistributionVector::from_raw(mu0.space(), mass))
}

/// Laws at each of the nondecreasing `times`, evolved incrementally.
pub fn forward_trajectory(
    g: &GeneratorSpec,
    mu0: &DistributionVector,
    times: &[f64],
) -> Result<Vec<DistributionVector>> {
    let mut out = Vec::with_capacity(times.len());
    let mut cur = mu0.clone();
    let mut now = 0.0;
    for &t in times {
        if !(t >= now) {
            return domain(format!("times must be nondecreasing and nonnegative, got {t} after {now}"));
        }
        cur = forward_evolve(g, &cur, t - now)?;
        now = t;
        out.push(cur.clone());
    }
    Ok(out)
}
