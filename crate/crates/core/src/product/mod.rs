//! Total variation and relative entropy between product Bernoulli laws on
//! the bulk, and the Gaussian cutoff profile.
//!
//! Against the reference law `nu_rho` the likelihood ratio of `nu_u` is
//! `psi = exp(sum_x a(x) (eta_x - rho) - b)`, so every distance here is a
//! functional of the weighted sum `C = sum_x a(x) (eta_x - rho)` under
//! i.i.d. Bernoulli(`rho`) occupations.

mod grid;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use grid::{tv_grid_dp, GridDistribution, GridSpec, GridTv, DEFAULT_GRID_BINS};

use crate::error::{domain, Error, Result};
use crate::heat::{
    continuum_fourier_coeff, find_leading_mode, DiscreteField, LatticeSize, ProfileSpec,
    LEADING_MODE_TOL,
};
use crate::quad::adaptive_simpson;

/// Largest bulk handled by exhaustive enumeration.
pub const ENUM_MAX_SITES: usize = 22;
/// Modes searched for the leading coefficient.
pub const LEADING_MODE_SEARCH: usize = 64;

/// Site densities of a product Bernoulli law on `{1, ..., n-1}`, all in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliField {
    p: Vec<f64>,
}

impl BernoulliField {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return domain("a Bernoulli field needs at least one site");
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return domain(format!("site {} has density {v}, outside (0, 1)", i + 1));
        }
        Ok(Self { p })
    }

    pub fn constant(n: LatticeSize, rho: f64) -> Result<Self> {
        Self::new(vec![rho; n.bulk_len()])
    }

    /// Bulk entries of a density field.
    pub fn from_field(field: &DiscreteField) -> Result<Self> {
        Self::new(field.bulk().to_vec())
    }

    pub fn n(&self) -> LatticeSize {
        LatticeSize::new(self.p.len() + 1).expect("non-empty bulk")
    }

    pub fn sites(&self) -> usize {
        self.p.len()
    }

    /// `p[x - 1]` is the density at site `x`.
    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn is_constant(&self, rho: f64) -> bool {
        self.p.iter().all(|&v| v == rho)
    }
}

/// Log-likelihood-ratio coefficients of `nu_u` against `nu_rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrCoefficients {
    pub rho: f64,
    /// `a(x) = log(u/rho) - log((1-u)/(1-rho))`.
    pub a: Vec<f64>,
    /// `b(x) = -rho log(u/rho) - (1-rho) log((1-u)/(1-rho))`.
    pub b: Vec<f64>,
    pub bsum: f64,
    /// `s = sqrt(rho (1 - rho) sum a(x)^2)`.
    pub s: f64,
}

impl LlrCoefficients {
    /// `log psi(eta)` for a configuration given as occupation bits.
    pub fn log_ratio(&self, occupied: impl Fn(usize) -> bool) -> f64 {
        self.a
            .iter()
            .enumerate()
            .map(|(i, a)| a * (if occupied(i) { 1.0 } else { 0.0 } - self.rho))
            .sum::<f64>()
            - self.bsum
    }

    pub fn is_trivial(&self) -> bool {
        self.a.iter().all(|&a| a == 0.0)
    }

    /// `sum a(x)^4 / s^4`; the fourth-moment Lyapounov ratio of the normalized sum.
    pub fn lyapounov_ratio(&self) -> f64 {
        if self.s == 0.0 {
            return 0.0;
        }
        self.a.iter().map(|a| a.powi(4)).sum::<f64>() / self.s.powi(4)
    }
}

pub fn llr_coefficients(field: &BernoulliField, rho: f64) -> Result<LlrCoefficients> {
    check_rho(rho)?;
    let mut a = Vec::with_capacity(field.sites());
    let mut b = Vec::with_capacity(field.sites());
    for &u in field.probs() {
        let up = (u / rho).ln();
        let down = ((1.0 - u) / (1.0 - rho)).ln();
        a.push(up - down);
        b.push(-rho * up - (1.0 - rho) * down);
    }
    let bsum = b.iter().sum();
    let s = (rho * (1.0 - rho) * a.iter().map(|v| v * v).sum::<f64>()).sqrt();
    Ok(LlrCoefficients { rho, a, b, bsum, s })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return domain(format!("rho = {rho} must lie in (0, 1)"));
    }
    Ok(())
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const GAUSS_TOL: f64 = 1e-10;
const GAUSS_TAIL: f64 = 12.0;

/// `G(m) = ||N(m, 1) - N(0, 1)||_TV = E|exp(mX - m^2/2) - 1| / 2`, by quadrature.
pub fn gaussian_profile(m: f64) -> f64 {
    let m = m.abs();
    if m == 0.0 {
        return 0.0;
    }
    // exp(mx - m^2/2) phi(x) = phi(x - m); the integrand changes sign at x = m/2
    let integrand = |x: f64| {
        let shifted = (-(x - m) * (x - m) / 2.0).exp();
        let base = (-x * x / 2.0).exp();
        0.5 * INV_SQRT_2PI * (shifted - base).abs()
    };
    let mid = m / 2.0;
    let panels = 16 + (m as usize);
    let left = adaptive_simpson(integrand, -GAUSS_TAIL, mid, GAUSS_TOL / 2.0, panels);
    let right = adaptive_simpson(integrand, mid, m + GAUSS_TAIL, GAUSS_TOL / 2.0, panels);
    match (left, right) {
        (Ok(l), Ok(r)) => (l + r).min(1.0),
        // the integrand is smooth and bounded; quadrature cannot fail here
        _ => unreachable!("Gaussian profile quadrature failed for m = {m}"),
    }
}

/// Exact `||nu_u - nu_rho||_TV` by enumerating all `2^(n-1)` configurations.
pub fn tv_exact_enum(field: &BernoulliField, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if field.sites() > ENUM_MAX_SITES {
        return Err(Error::TooLarge {
            sites: field.sites(),
            cap: ENUM_MAX_SITES,
            hint: "use tv_grid_dp for larger systems",
        });
    }
    if field.is_constant(rho) {
        return Ok(0.0);
    }
    fn walk(p: &[f64], rho: f64, pu: f64, pr: f64) -> f64 {
        match p.split_first() {
            None => 0.5 * (pu - pr).abs(),
            Some((&u, rest)) => {
                walk(rest, rho, pu * u, pr * rho) + walk(rest, rho, pu * (1.0 - u), pr * (1.0 - rho))
            }
        }
    }
    Ok(walk(field.probs(), rho, 1.0, 1.0))
}

/// Monte Carlo estimate of `E|psi - 1| / 2` under `nu_rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct McTv {
    pub estimate: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub half_width: f64,
    pub samples: usize,
    /// Empirical `E[psi^2]`.
    pub psi_second_moment: f64,
    /// Hoeffding cap `exp(sum a^2 / 2 - 2 b)` on `E[psi^2]`.
    pub psi_second_moment_cap: f64,
}

impl McTv {
    /// Whether the empirical second moment of `psi` respects its Hoeffding cap.
    pub fn within_cap(&self) -> bool {
        self.psi_second_moment <= self.psi_second_moment_cap * (1.0 + 1e-9)
    }
}

const Z95: f64 = 1.959_963_984_540_054;

/// Splits `samples` across `workers` ChaCha streams derived from `seed`;
/// the result depends only on `(seed, samples, workers)`.
pub fn tv_monte_carlo(
    field: &BernoulliField,
    rho: f64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<McTv> {
    let coeffs = llr_coefficients(field, rho)?;
    let cap = (0.5 * coeffs.a.iter().map(|a| a * a).sum::<f64>() - 2.0 * coeffs.bsum).exp();
    if coeffs.is_trivial() {
        return Ok(McTv {
            estimate: 0.0,
            half_width: 0.0,
            samples,
            psi_second_moment: 1.0,
            psi_second_moment_cap: cap,
        });
    }
    if samples == 0 {
        return domain("Monte Carlo needs at least one sample");
    }
    let workers = workers.clamp(1, samples);
    // P(eta = 1) = P(next_u64 < threshold)
    let threshold = (rho * 2f64.powi(64)) as u64;
    let occupied_shift: Vec<f64> = coeffs.a.iter().map(|a| a * (1.0 - rho)).collect();
    let empty_shift: Vec<f64> = coeffs.a.iter().map(|a| -a * rho).collect();
    let partial: Vec<[f64; 3]> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let count = samples / workers + usize::from(w < samples % workers);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w as u64);
            let mut acc = [0.0; 3];
            for _ in 0..count {
                let mut centered = 0.0;
                for (up, down) in occupied_shift.iter().zip(&empty_shift) {
                    centered += if rng.next_u64() < threshold { *up } else { *down };
                }
                let psi = (centered - coeffs.bsum).exp();
                let v = 0.5 * (psi - 1.0).abs();
                acc[0] += v;
                acc[1] += v * v;
                acc[2] += psi * psi;
            }
            acc
        })
        .collect();
    let tot = partial.iter().fold([0.0; 3], |a, p| [a[0] + p[0], a[1] + p[1], a[2] + p[2]]);
    let nf = samples as f64;
    let mean = tot[0] / nf;
    let var = if samples > 1 {
        ((tot[1] - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McTv {
        estimate: mean,
        half_width: Z95 * (var / nf).sqrt(),
        samples,
        psi_second_moment: tot[2] / nf,
        psi_second_moment_cap: cap,
    })
}

/// `H(nu_u | nu_v) = sum_x u log(u/v) + (1-u) log((1-u)/(1-v))`.
pub fn product_relative_entropy(u: &BernoulliField, v: &BernoulliField) -> Result<f64> {
    if u.sites() != v.sites() {
        return Err(Error::MismatchedSpaces(u.sites(), v.sites()));
    }
    Ok(u.probs()
        .iter()
        .zip(v.probs())
        .map(|(&p, &q)| bernoulli_kl(p, q))
        .sum())
}

pub(crate) fn bernoulli_kl(p: f64, q: f64) -> f64 {
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

/// `gamma = |c_{l0}(u_0)| / sqrt(rho (1 - rho))` for the leading mode `l0`.
pub fn gamma_const(profile: &ProfileSpec) -> Result<f64> {
    let (_, gamma) = leading_mode_and_gamma(profile)?;
    Ok(gamma)
}

pub fn leading_mode_and_gamma(profile: &ProfileSpec) -> Result<(usize, f64)> {
    let l0 = find_leading_mode(profile, LEADING_MODE_SEARCH, LEADING_MODE_TOL)?;
    let c = continuum_fourier_coeff(profile, l0)?;
    let rho = profile.rho();
    Ok((l0, c.abs() / (rho * (1.0 - rho)).sqrt()))
}

/// `2 tv^2 <= entropy`, with `1e-12` slack.
pub fn pinsker_holds(tv: f64, entropy: f64) -> bool {
    2.0 * tv * tv <= entropy + 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(p: &[f64]) -> BernoulliField {
        BernoulliField::new(p.to_vec()).unwrap()
    }

    /// Mass of a configuration (bit `i` = site `i + 1`) under a product law.
    fn mass(p: &[f64], bits: usize) -> f64 {
        p.iter()
            .enumerate()
            .map(|(i, &u)| if bits >> i & 1 == 1 { u } else { 1.0 - u })
            .product()
    }

    #[test]
    fn rejects_boundary_densities() {
        assert!(BernoulliField::new(vec![0.5, 1.0]).is_err());
        assert!(BernoulliField::new(vec![0.0]).is_err());
        assert!(BernoulliField::new(vec![]).is_err());
    }

    #[test]
    fn llr_examples() {
        let c = llr_coefficients(&field(&[0.3, 0.3, 0.3]), 0.3).unwrap();
        assert!(c.a.iter().all(|&a| a == 0.0));
        assert_eq!(c.bsum, 0.0);
        assert_eq!(c.s, 0.0);
        let c = llr_coefficients(&field(&[0.6, 0.5]), 0.5).unwrap();
        assert!((c.a[0] - 1.5f64.ln()).abs() < 1e-15);
        assert!((c.a[0] - 0.405_465).abs() < 1e-6);
        assert_eq!(c.a[1], 0.0);
    }

    #[test]
    fn psi_reconstruction_is_exact_on_every_state() {
        let p = [0.2, 0.7, 0.45, 0.9];
        let rho = 0.4;
        let c = llr_coefficients(&field(&p), rho).unwrap();
        let reference = [rho; 4];
        for bits in 0..16usize {
            let psi = c.log_ratio(|i| bits >> i & 1 == 1).exp();
            let ratio = mass(&p, bits) / mass(&reference, bits);
            assert!((psi - ratio).abs() <= 1e-12 * ratio.max(1.0));
        }
    }

    #[test]
    fn gaussian_profile_examples() {
        assert_eq!(gaussian_profile(0.0), 0.0);
        assert!((gaussian_profile(2.0) - 0.682_689).abs() < 1e-6);
        let g10 = gaussian_profile(10.0);
        assert!((0.999..=1.0).contains(&g10));
        assert!(gaussian_profile(20.0) >= 1.0 - 1e-6);
        assert_eq!(gaussian_profile(-1.3), gaussian_profile(1.3));
    }

    #[test]
    fn gaussian_profile_matches_closed_form() {
        // G(m) = 2 Phi(|m|/2) - 1 = erf(|m| / (2 sqrt 2))
        for i in 1..=50 {
            let m = 0.1 * i as f64;
            let q = gaussian_profile(m);
            let c = statrs::function::erf::erf(m / (2.0 * std::f64::consts::SQRT_2));
            assert!((q - c).abs() < 1e-9, "m={m}: {q} vs {c}");
        }
    }

    #[test]
    fn gaussian_profile_strictly_increasing() {
        let vals: Vec<f64> = (0..200).map(|i| gaussian_profile(0.05 * i as f64)).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tv_enum_examples() {
        assert_eq!(tv_exact_enum(&field(&[0.5, 0.5]), 0.5).unwrap(), 0.0);
        assert!((tv_exact_enum(&field(&[0.6, 0.5]), 0.5).unwrap() - 0.1).abs() < 1e-15);
        // masses under u: 0.16, 0.24, 0.24, 0.36; under rho: 0.25 each
        assert!((tv_exact_enum(&field(&[0.6, 0.6]), 0.5).unwrap() - 0.11).abs() < 1e-15);
        let big = BernoulliField::new(vec![0.5; 23]).unwrap();
        assert!(matches!(tv_exact_enum(&big, 0.5), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn relative_entropy_examples() {
        let u = field(&[0.3, 0.8]);
        assert_eq!(product_relative_entropy(&u, &u).unwrap(), 0.0);
        let h = product_relative_entropy(&field(&[0.6]), &field(&[0.5])).unwrap();
        let closed = 0.6 * 1.2f64.ln() + 0.4 * 0.8f64.ln();
        assert!((h - closed).abs() < 1e-15);
        assert!((h - 0.020_136).abs() < 1e-6);
    }

    #[test]
    fn gamma_examples() {
        let p = ProfileSpec::sine(0.5, 0.2, 1).unwrap();
        assert!((gamma_const(&p).unwrap() - 0.282_843).abs() < 1e-6);
        let p2 = ProfileSpec::sine(0.5, 0.4, 1).unwrap();
        assert!((gamma_const(&p2).unwrap() - 2.0 * gamma_const(&p).unwrap()).abs() < 1e-15);
        let p3 = ProfileSpec::sine(0.5, 0.1, 2).unwrap();
        let (l0, g) = leading_mode_and_gamma(&p3).unwrap();
        assert_eq!(l0, 2);
        assert!((g - 0.141_421).abs() < 1e-6);
        assert!(matches!(
            gamma_const(&ProfileSpec::flat(0.5).unwrap()),
            Err(Error::NoDetectableMode { .. })
        ));
    }

    #[test]
    fn pinsker_examples() {
        assert!(pinsker_holds(0.0, 0.0));
        assert!(!pinsker_holds(0.5, 0.1));
    }

    #[test]
    fn monte_carlo_examples() {
        let flat = tv_monte_carlo(&field(&[0.5, 0.5]), 0.5, 1000, 1, 4).unwrap();
        assert_eq!((flat.estimate, flat.half_width), (0.0, 0.0));
        let mc = tv_monte_carlo(&field(&[0.6, 0.6]), 0.5, 1_000_000, 7, 8).unwrap();
        assert!((mc.estimate - 0.11).abs() <= 3.0 * mc.half_width, "{mc:?}");
        assert!(mc.within_cap());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let f = field(&[0.3, 0.7, 0.5, 0.61]);
        let a = tv_monte_carlo(&f, 0.5, 20_000, 99, 3).unwrap();
        let b = tv_monte_carlo(&f, 0.5, 20_000, 99, 3).unwrap();
        assert_eq!(a, b);
    }

    fn random_field(sites: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.02f64..0.98, sites)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_entropy_matches_enumeration(u in random_field(5), v in random_field(5)) {
            let h = product_relative_entropy(&field(&u), &field(&v)).unwrap();
            let brute: f64 = (0..32usize)
                .map(|bits| {
                    let (mu, nu) = (mass(&u, bits), mass(&v, bits));
                    mu * (mu / nu).ln()
                })
                .sum();
            prop_assert!((h - brute).abs() < 1e-10);
        }

        #[test]
        fn pinsker_on_product_pairs(u in random_field(5), rho in 0.05f64..0.95) {
            let reference = BernoulliField::new(vec![rho; 5]).unwrap();
            let tv = tv_exact_enum(&field(&u), rho).unwrap();
            let h = product_relative_entropy(&field(&u), &reference).unwrap();
            prop_assert!(pinsker_holds(tv, h));
        }

        #[test]
        fn tv_bounded_by_sum_of_density_gaps(u in random_field(7), rho in 0.05f64..0.95) {
            let tv = tv_exact_enum(&field(&u), rho).unwrap();
            let bound: f64 = u.iter().map(|p| (p - rho).abs()).sum();
            prop_assert!(tv <= bound + 1e-12);
            prop_assert!((0.0..=1.0).contains(&tv));
        }

        #[test]
        fn llr_invariants(u in random_field(9), rho in 0.05f64..0.95) {
            let c = llr_coefficients(&field(&u), rho).unwrap();
            let s2 = rho * (1.0 - rho) * c.a.iter().map(|a| a * a).sum::<f64>();
            prop_assert!((c.s * c.s - s2).abs() <= 1e-12 * s2.max(1e-300));
            prop_assert!(c.bsum >= 0.0);
            // psi reconstruction on every state
            for bits in 0..(1usize << 9) {
                let psi = c.log_ratio(|i| bits >> i & 1 == 1).exp();
                let ratio = mass(&u, bits) / mass(&[rho; 9], bits);
                prop_assert!((psi - ratio).abs() <= 1e-12 * ratio.max(1.0));
            }
        }
    }
}
