//! Yau's relative entropy inequality and the objects it involves.
//!
//! Along the chain started from `nu_{u_0}`, the reference law at time `t`
//! is the product law `nu_t` of the heat solution `u_t`. The entropy
//! `H_n(t) = H(mu_t | nu_t)` satisfies
//! `dH/dt <= -int Gamma_n sqrt(f_t) dnu_t - sum_x n^2 (u_t(x+1) - u_t(x))^2 E[omega_x omega_{x+1}]`
//! with `omega_x = (eta(x) - u_t(x)) / (u_t(x)(1 - u_t(x)))`.

use super::evolve::evolve_vector;
use super::{carre_du_champ_integral, density, product_distribution, DistributionVector, GeneratorSpec};
use crate::error::{domain, Error, Result};
use crate::heat::{HeatSolution, ProfileSpec};
use crate::product::BernoulliField;

#[inline]
pub fn omega(u: f64, occupied: bool) -> f64 {
    (if occupied { 1.0 } else { 0.0 } - u) / (u * (1.0 - u))
}

fn check_field(g: &GeneratorSpec, u: &BernoulliField) -> Result<()> {
    if u.sites() != g.sites() {
        return Err(Error::MismatchedSpaces(u.sites(), g.sites()));
    }
    Ok(())
}

/// `E_mu[omega_x omega_{x+1}]` for `x = 1, ..., n-2`.
pub fn omega_correlations(mu: &DistributionVector, u: &BernoulliField) -> Result<Vec<f64>> {
    if u.sites() != mu.space().sites() {
        return Err(Error::MismatchedSpaces(u.sites(), mu.space().sites()));
    }
    let p = u.probs();
    let mut out = vec![0.0; p.len() - 1];
    for (s, &m) in mu.mass().iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (i, acc) in out.iter_mut().enumerate() {
            let a = omega(p[i], (s >> i) & 1 == 1);
            let b = omega(p[i + 1], (s >> (i + 1)) & 1 == 1);
            *acc += m * a * b;
        }
    }
    Ok(out)
}

/// Right-hand side of Yau's inequality for the law `mu` against `nu_u`.
pub fn yau_rhs(g: &GeneratorSpec, mu: &DistributionVector, u: &BernoulliField) -> Result<f64> {
    check_field(g, u)?;
    let nu = product_distribution(u)?;
    let f = density(mu, &nu)?;
    let gamma = carre_du_champ_integral(g, &f, &nu)?;
    let corr = omega_correlations(mu, u)?;
    let p = u.probs();
    let drift: f64 = corr
        .iter()
        .enumerate()
        .map(|(i, c)| g.speed() * (p[i + 1] - p[i]).powi(2) * c)
        .sum();
    Ok(-gamma - drift)
}

/// Adjoint of `L_n` in `L^2(nu)` applied to `h`, written out move by move.
pub fn adjoint_apply(g: &GeneratorSpec, nu: &DistributionVector, h: &[f64]) -> Result<Vec<f64>> {
    let size = nu.mass().len();
    if h.len() != size {
        return Err(Error::MismatchedSpaces(h.len(), size));
    }
    if nu.space() != g.space()? {
        return Err(Error::MismatchedSpaces(nu.space().sites(), g.sites()));
    }
    let w = nu.mass();
    if let Some(s) = w.iter().position(|&v| v <= 0.0) {
        return domain(format!("reference law has zero mass at state {s}"));
    }
    let m = g.sites();
    let n2 = g.speed();
    let mut out = vec![0.0; size];
    for s in 0..size {
        let mut acc = 0.0;
        for i in 0..m - 1 {
            let t = if ((s >> i) ^ (s >> (i + 1))) & 1 == 1 { s ^ (0b11 << i) } else { s };
            acc += n2 * (h[t] * w[t] / w[s] - h[s]);
        }
        for i in [0, m - 1] {
            let occupied = (s >> i) & 1 == 1;
            let t = s ^ (1 << i);
            // rate of the reverse flip t -> s, and of the flip s -> t
            let back = g.flip_rate(!occupied);
            let out_rate = g.flip_rate(occupied);
            acc += n2 * (back * h[t] * w[t] / w[s] - out_rate * h[s]);
        }
        out[s] = acc;
    }
    Ok(out)
}

/// Largest pointwise residual of
/// `L*1 - d/dt log psi = -sum_x n^2 (u(x+1) - u(x))^2 omega_x omega_{x+1}`
/// where `du` is the time derivative of the field `u`.
pub fn adjoint_identity_check(g: &GeneratorSpec, u: &BernoulliField, du: &[f64]) -> Result<f64> {
    check_field(g, u)?;
    if du.len() != u.sites() {
        return Err(Error::MismatchedSpaces(du.len(), u.sites()));
    }
    let nu = product_distribution(u)?;
    let size = nu.mass().len();
    let l_star_one = adjoint_apply(g, &nu, &vec![1.0; size])?;
    let p = u.probs();
    let rho = g.rho();
    let mut worst: f64 = 0.0;
    for (s, lhs0) in l_star_one.iter().enumerate() {
        let bit = |i: usize| (s >> i) & 1 == 1;
        // d/dt log psi from the product form of psi
        let dlog_psi: f64 = (0..p.len())
            .map(|i| {
                let factor = if bit(i) { p[i] / rho } else { (1.0 - p[i]) / (1.0 - rho) };
                let dfactor = if bit(i) { du[i] / rho } else { -du[i] / (1.0 - rho) };
                dfactor / factor
            })
            .sum();
        let lhs = lhs0 - dlog_psi;
        let rhs: f64 = -(0..p.len() - 1)
            .map(|i| g.speed() * (p[i + 1] - p[i]).powi(2) * omega(p[i], bit(i)) * omega(p[i + 1], bit(i + 1)))
            .sum::<f64>();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// One time point of an exact entropy trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyPoint {
    pub t: f64,
    /// `H(mu_t | nu_t)`.
    pub entropy: f64,
    /// `D_n(t) = TV(mu_t, nu_rho)`.
    pub distance: f64,
    /// `TV(nu_t, nu_rho)`.
    pub product_tv: f64,
    pub yau_rhs: f64,
    /// `max_x |E[omega_x omega_{x+1}]|`.
    pub max_correlation: f64,
}

impl EntropyPoint {
    /// `|D_n(t) - TV(nu_t, nu_rho)| <= sqrt(H / 2)` up to `slack`.
    pub fn triangle_holds(&self, slack: f64) -> bool {
        (self.distance - self.product_tv).abs() <= (self.entropy / 2.0).sqrt() + slack
    }
}

fn check_profile(g: &GeneratorSpec, profile: &ProfileSpec) -> Result<()> {
    if (profile.rho() - g.rho()).abs() > 1e-15 {
        return domain(format!(
            "profile boundary density {} differs from reservoir density {}",
            profile.rho(),
            g.rho()
        ));
    }
    Ok(())
}

/// The chain started from a profile law, tracked through its deviation
/// `mu_t - nu_rho` so that entropies far below machine epsilon relative to
/// one are still resolved.
struct Tracker<'a> {
    g: &'a GeneratorSpec,
    sol: HeatSolution,
    reservoir: Vec<f64>,
    deviation: Vec<f64>,
    now: f64,
}

/// Quantities of the chain at one time.
struct Snapshot {
    u: BernoulliField,
    nu_t: DistributionVector,
    mu: DistributionVector,
    /// `mu_t / nu_t - 1`.
    excess: Vec<f64>,
    reference_deviation: Vec<f64>,
}

impl<'a> Tracker<'a> {
    fn new(g: &'a GeneratorSpec, profile: &ProfileSpec) -> Result<Self> {
        check_profile(g, profile)?;
        let sol = HeatSolution::from_profile(profile, g.n());
        let reservoir = product_distribution(&BernoulliField::constant(g.n(), g.rho())?)?.mass().to_vec();
        let u0 = BernoulliField::from_field(sol.initial())?;
        let deviation = product_deviation(&u0, g.rho(), &reservoir);
        Ok(Self { g, sol, reservoir, deviation, now: 0.0 })
    }

    fn advance(&mut self, t: f64) -> Result<()> {
        if !(t >= self.now) {
            return domain(format!("times must be nondecreasing and nonnegative, got {t} after {}", self.now));
        }
        self.deviation = evolve_vector(self.g, &self.deviation, t - self.now)?;
        self.now = t;
        Ok(())
    }

    fn snapshot(&self) -> Result<Snapshot> {
        let u = BernoulliField::from_field(&self.sol.solve_heat_at(self.now)?)?;
        let nu_t = product_distribution(&u)?;
        let reference_deviation = product_deviation(&u, self.g.rho(), &self.reservoir);
        let excess = self
            .deviation
            .iter()
            .zip(&reference_deviation)
            .zip(nu_t.mass())
            .map(|((d, e), w)| (d - e) / w)
            .collect();
        let mass = self.reservoir.iter().zip(&self.deviation).map(|(r, d)| (r + d).max(0.0)).collect();
        let mu = DistributionVector::from_raw(nu_t.space(), mass);
        Ok(Snapshot { u, nu_t, mu, excess, reference_deviation })
    }
}

/// `nu_u - nu_rho`, computed as `nu_rho (psi - 1)` with `expm1`.
fn product_deviation(u: &BernoulliField, rho: f64, reservoir: &[f64]) -> Vec<f64> {
    let p = u.probs();
    let up: Vec<f64> = p.iter().map(|v| ((v - rho) / rho).ln_1p()).collect();
    let down: Vec<f64> = p.iter().map(|v| (-(v - rho) / (1.0 - rho)).ln_1p()).collect();
    reservoir
        .iter()
        .enumerate()
        .map(|(s, w)| {
            let log_psi: f64 = (0..p.len()).map(|i| if (s >> i) & 1 == 1 { up[i] } else { down[i] }).sum();
            w * log_psi.exp_m1()
        })
        .collect()
}

/// `int phi(f) dnu` with `phi(f) = f log f - f + 1`, from `x = f - 1`.
fn entropy_from_excess(nu: &[f64], excess: &[f64]) -> f64 {
    nu.iter()
        .zip(excess)
        .map(|(w, &x)| {
            let phi = if x <= -1.0 { 1.0 } else { (1.0 + x) * x.ln_1p() - x };
            w * phi.max(0.0)
        })
        .sum()
}

impl Snapshot {
    fn entropy(&self) -> f64 {
        entropy_from_excess(self.nu_t.mass(), &self.excess)
    }

    fn yau_rhs(&self, g: &GeneratorSpec) -> Result<f64> {
        let f: Vec<f64> = self.excess.iter().map(|x| (1.0 + x).max(0.0)).collect();
        let gamma = carre_du_champ_integral(g, &f, &self.nu_t)?;
        let corr = omega_correlations(&self.mu, &self.u)?;
        let p = self.u.probs();
        let drift: f64 = corr.iter().enumerate().map(|(i, c)| g.speed() * (p[i + 1] - p[i]).powi(2) * c).sum();
        Ok(-gamma - drift)
    }
}

/// Exact entropy, distance and Yau bound along the chain started from the
/// profile law, at nondecreasing `times`.
pub fn entropy_trajectory(g: &GeneratorSpec, profile: &ProfileSpec, times: &[f64]) -> Result<Vec<EntropyPoint>> {
    let mut tracker = Tracker::new(g, profile)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        tracker.advance(t)?;
        let snap = tracker.snapshot()?;
        let corr = omega_correlations(&snap.mu, &snap.u)?;
        out.push(EntropyPoint {
            t,
            entropy: snap.entropy(),
            distance: 0.5 * tracker.deviation.iter().map(|d| d.abs()).sum::<f64>(),
            product_tv: 0.5 * snap.reference_deviation.iter().map(|d| d.abs()).sum::<f64>(),
            yau_rhs: snap.yau_rhs(g)?,
            max_correlation: corr.iter().fold(0.0, |a: f64, c| a.max(c.abs())),
        });
    }
    Ok(out)
}

/// Finite-difference check of Yau's inequality at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct YauPoint {
    pub t: f64,
    /// Richardson-extrapolated `dH/dt`.
    pub derivative: f64,
    /// Difference between the central quotients with steps `h` and `h/2`.
    pub richardson_gap: f64,
    pub rhs: f64,
}

impl YauPoint {
    pub fn holds(&self, slack: f64) -> bool {
        self.derivative <= self.rhs + slack
    }
}

/// `dH/dt` by central differences with steps `step` and `step / 2`,
/// compared with the Yau bound. A Richardson mismatch above `max_gap`
/// aborts instead of reporting an unreliable comparison.
pub fn yau_finite_difference(
    g: &GeneratorSpec,
    profile: &ProfileSpec,
    times: &[f64],
    step: f64,
    max_gap: f64,
) -> Result<Vec<YauPoint>> {
    if !(step > 0.0) {
        return domain(format!("step {step} must be positive"));
    }
    let mut tracker = Tracker::new(g, profile)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !(t - step >= tracker.now) {
            return domain(format!("time {t} is too close to the previous one or to 0 for step {step}"));
        }
        let mut values = [0.0; 5];
        let mut rhs = 0.0;
        for (k, off) in [-step, -step / 2.0, 0.0, step / 2.0, step].iter().enumerate() {
            tracker.advance(t + off)?;
            let snap = tracker.snapshot()?;
            values[k] = snap.entropy();
            if k == 2 {
                rhs = snap.yau_rhs(g)?;
            }
        }
        let coarse = (values[4] - values[0]) / (2.0 * step);
        let fine = (values[3] - values[1]) / step;
        let gap = (fine - coarse).abs();
        if gap > max_gap {
            return Err(Error::Numerical {
                routine: "yau_finite_difference",
                detail: format!("Richardson mismatch {gap:e} at t = {t} exceeds {max_gap:e}"),
            });
        }
        out.push(YauPoint { t, derivative: (4.0 * fine - coarse) / 3.0, richardson_gap: gap, rhs });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::testing::rate_matrix;
    use super::*;
    use crate::heat::{LatticeSize, ProfileKind, SineTerm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gen(n: usize, rho: f64) -> GeneratorSpec {
        GeneratorSpec::new(LatticeSize::new(n).unwrap(), rho).unwrap()
    }

    fn sine() -> ProfileSpec {
        ProfileSpec::sine(0.5, 0.2, 1).unwrap()
    }

    #[test]
    fn adjoint_matches_rate_matrix_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 3..=8 {
            let g = gen(n, 0.4);
            let field = BernoulliField::new((1..n).map(|_| 0.15 + 0.7 * rng.random::<f64>()).collect()).unwrap();
            let nu = product_distribution(&field).unwrap();
            let size = nu.mass().len();
            let f: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
            let h: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
            let lf = super::super::generator_apply(&g, &f).unwrap();
            let lsh = adjoint_apply(&g, &nu, &h).unwrap();
            let lhs: f64 = (0..size).map(|s| nu.mass()[s] * lf[s] * h[s]).sum();
            let rhs: f64 = (0..size).map(|s| nu.mass()[s] * f[s] * lsh[s]).sum();
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "n={n}");
            // independent oracle: L* h = (Q^T (h nu)) / nu
            let q = rate_matrix(&g);
            for s in 0..size {
                let expect: f64 = (0..size).map(|t| q[t][s] * h[t] * nu.mass()[t]).sum::<f64>() / nu.mass()[s];
                assert!((lsh[s] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn adjoint_identity_flat_and_sine() {
        let g = gen(5, 0.5);
        let flat = BernoulliField::constant(g.n(), 0.5).unwrap();
        assert!(adjoint_identity_check(&g, &flat, &[0.0; 4]).unwrap() < 1e-12);
        for n in [3, 6, 10] {
            let g = gen(n, 0.5);
            let sol = HeatSolution::from_profile(&sine(), g.n());
            let u = BernoulliField::from_field(&sol.solve_heat_at(0.05).unwrap()).unwrap();
            let du = sol.time_derivative_at(0.05).unwrap();
            assert!(adjoint_identity_check(&g, &u, du.bulk()).unwrap() < 1e-8, "n={n}");
        }
    }

    #[test]
    fn adjoint_identity_needs_the_heat_derivative() {
        let g = gen(6, 0.5);
        let sol = HeatSolution::from_profile(&sine(), g.n());
        let u = BernoulliField::from_field(&sol.solve_heat_at(0.05).unwrap()).unwrap();
        let wrong = vec![0.0; 5];
        assert!(adjoint_identity_check(&g, &u, &wrong).unwrap() > 1e-3);
    }

    #[test]
    fn yau_rhs_vanishes_at_the_reference() {
        let g = gen(6, 0.5);
        let u = BernoulliField::new(vec![0.3, 0.4, 0.55, 0.6, 0.45]).unwrap();
        let nu = product_distribution(&u).unwrap();
        assert!(yau_rhs(&g, &nu, &u).unwrap().abs() < 1e-10);
        let flat = BernoulliField::constant(g.n(), 0.5).unwrap();
        // flat reference: only the carré du champ remains
        let nu_flat = product_distribution(&flat).unwrap();
        let f = density(&nu, &nu_flat).unwrap();
        let gamma = carre_du_champ_integral(&g, &f, &nu_flat).unwrap();
        assert!((yau_rhs(&g, &nu, &flat).unwrap() + gamma).abs() < 1e-10);
    }

    #[test]
    fn trajectory_matches_direct_evaluation() {
        use crate::exact::{forward_evolve, relative_entropy_h, tv_distance};
        let g = gen(6, 0.5);
        let profile = sine();
        let sol = HeatSolution::from_profile(&profile, g.n());
        let mu0 = product_distribution(&BernoulliField::from_field(sol.initial()).unwrap()).unwrap();
        let reservoir = product_distribution(&BernoulliField::constant(g.n(), 0.5).unwrap()).unwrap();
        for p in entropy_trajectory(&g, &profile, &[0.01, 0.05, 0.1]).unwrap() {
            let mu = forward_evolve(&g, &mu0, p.t).unwrap();
            let u = BernoulliField::from_field(&sol.solve_heat_at(p.t).unwrap()).unwrap();
            let nu_t = product_distribution(&u).unwrap();
            assert!((p.entropy - relative_entropy_h(&mu, &nu_t).unwrap()).abs() < 1e-12);
            assert!((p.distance - tv_distance(&mu, &reservoir).unwrap()).abs() < 1e-12);
            assert!((p.product_tv - tv_distance(&nu_t, &reservoir).unwrap()).abs() < 1e-12);
            assert!((p.yau_rhs - yau_rhs(&g, &mu, &u).unwrap()).abs() < 1e-8 * (1.0 + p.yau_rhs.abs()));
        }
    }

    #[test]
    fn late_entropy_decays_below_machine_epsilon() {
        let g = gen(6, 0.5);
        let pts = entropy_trajectory(&g, &sine(), &[0.8, 1.0, 1.2]).unwrap();
        assert!(pts[0].entropy < 1e-14);
        assert!(pts[1].entropy < pts[0].entropy && pts[2].entropy < pts[1].entropy);
        assert!(pts[2].entropy > 0.0);
    }

    #[test]
    fn flat_profile_trajectory_is_zero() {
        let g = gen(6, 0.5);
        let flat = ProfileSpec::flat(0.5).unwrap();
        for p in entropy_trajectory(&g, &flat, &[0.0, 0.1, 0.5]).unwrap() {
            assert!(p.entropy.abs() < 1e-12 && p.distance < 1e-12 && p.product_tv < 1e-12);
        }
    }

    #[test]
    fn trajectory_satisfies_triangle_and_correlation_bounds() {
        let profile = sine();
        let bound_scale = profile.kappa().powi(2) / profile.eps0().powi(2);
        for n in [4, 7, 9] {
            let g = gen(n, 0.5);
            let times: Vec<f64> = (1..=8).map(|k| 0.02 * k as f64).collect();
            for p in entropy_trajectory(&g, &profile, &times).unwrap() {
                assert!(p.triangle_holds(1e-10), "n={n} t={}", p.t);
                assert!(p.max_correlation <= bound_scale / n as f64);
            }
        }
    }

    #[test]
    fn yau_inequality_by_finite_differences() {
        let profile = ProfileSpec::with_fitted_class(
            ProfileKind::SineMixture(vec![
                SineTerm { mode: 1, amplitude: 0.25 },
                SineTerm { mode: 2, amplitude: 0.1 },
            ]),
            0.5,
        )
        .unwrap();
        for n in [3, 5] {
            let g = gen(n, 0.5);
            let times: Vec<f64> = (1..=5).map(|k| 0.03 * k as f64).collect();
            for p in yau_finite_difference(&g, &profile, &times, 5e-4, 1e-5).unwrap() {
                assert!(p.holds(1e-6), "n={n} {p:?}");
            }
        }
    }
}
