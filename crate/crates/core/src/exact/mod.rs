//! Exact analysis of the chain for small `n`: the generator, the law of
//! `eta_t` by uniformization, distances to equilibrium, and the quadratic
//! forms and entropy-production identities of the relative entropy method.
//!
//! Functions on `Omega_n` are plain slices indexed by bit pattern (site `x`
//! is bit `x - 1`).

mod evolve;
mod forms;
mod logsob;
mod state;
mod yau;

pub use evolve::{evolve_vector, forward_evolve, forward_trajectory, poisson_window, PoissonWindow, EVOLVE_TOL};
pub use forms::{
    carre_du_champ_dual, carre_du_champ_integral, comparison_constant, comparison_ratio,
    comparison_sweep,
    default_theta, dirichlet_forms, gamma_integral, DirichletForms,
};
pub use logsob::{ls_ratio_minimize, LsOptions, LsResult};
pub use state::{Configuration, StateSpace, MAX_CHAIN_SITES};
pub use yau::{
    adjoint_apply, adjoint_identity_check, entropy_trajectory, omega, omega_correlations,
    yau_finite_difference, yau_rhs, EntropyPoint, YauPoint,
};

use crate::error::{domain, Error, Result};
use crate::heat::LatticeSize;
use crate::product::BernoulliField;

/// SSEP on `{1, ..., n-1}` with reservoirs of density `rho` at sites `1`
/// and `n-1`, all rates sped up by `n^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    n: LatticeSize,
    rho: f64,
}

impl GeneratorSpec {
    /// `n = 2` is refused: its single site would be both reservoirs at once.
    pub fn new(n: LatticeSize, rho: f64) -> Result<Self> {
        if n.get() < 3 {
            return domain("the chain needs n >= 3 so that the two reservoir sites are distinct");
        }
        if !(rho > 0.0 && rho < 1.0) {
            return domain(format!("rho = {rho} must lie in (0, 1)"));
        }
        Ok(Self { n, rho })
    }

    pub fn n(&self) -> LatticeSize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sites(&self) -> usize {
        self.n.bulk_len()
    }

    pub fn speed(&self) -> f64 {
        let n = self.n.as_f64();
        n * n
    }

    pub fn space(&self) -> Result<StateSpace> {
        StateSpace::new(self.n)
    }

    /// Flip rate of a reservoir site: inject at `rho`, remove at `1 - rho`.
    #[inline]
    pub fn flip_rate(&self, occupied: bool) -> f64 {
        if occupied {
            1.0 - self.rho
        } else {
            self.rho
        }
    }

    /// Dominating total rate used for uniformization.
    pub fn uniform_rate(&self) -> f64 {
        let m = self.sites() as f64;
        self.speed() * ((m - 1.0) + 2.0 * self.rho.max(1.0 - self.rho))
    }

    /// Calls `visit(target, rate)` for every transition out of `state`
    /// with a nonzero effect. Exchanges across equal occupations are skipped.
    #[inline]
    pub fn for_each_move(&self, state: usize, mut visit: impl FnMut(usize, f64)) {
        let m = self.sites();
        let speed = self.speed();
        for i in 0..m - 1 {
            if ((state >> i) ^ (state >> (i + 1))) & 1 == 1 {
                visit(state ^ (0b11 << i), speed);
            }
        }
        for i in [0, m - 1] {
            let occupied = (state >> i) & 1 == 1;
            visit(state ^ (1 << i), speed * self.flip_rate(occupied));
        }
    }
}

/// Probability vector over `Omega_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionVector {
    space: StateSpace,
    mass: Vec<f64>,
}

impl DistributionVector {
    pub fn new(space: StateSpace, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != space.size() {
            return Err(Error::MismatchedSpaces(mass.len(), space.size()));
        }
        if let Some(v) = mass.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return domain(format!("mass {v} is not a nonnegative number"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return domain(format!("masses sum to {total}, not 1"));
        }
        Ok(Self { space, mass })
    }

    /// Point mass at one configuration.
    pub fn dirac(space: StateSpace, index: usize) -> Result<Self> {
        if index >= space.size() {
            return domain(format!("state {index} outside a space of {}", space.size()));
        }
        let mut mass = vec![0.0; space.size()];
        mass[index] = 1.0;
        Ok(Self { space, mass })
    }

    pub(crate) fn from_raw(space: StateSpace, mass: Vec<f64>) -> Self {
        debug_assert_eq!(mass.len(), space.size());
        Self { space, mass }
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.mass.iter().zip(f).map(|(m, v)| m * v).sum()
    }

    /// `E[eta(x)]` for `x = 1, ..., n-1`.
    pub fn site_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.space.sites()];
        for (s, m) in self.mass.iter().enumerate() {
            for (i, acc) in means.iter_mut().enumerate() {
                if (s >> i) & 1 == 1 {
                    *acc += m;
                }
            }
        }
        means
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::MismatchedSpaces(self.space.sites(), other.space.sites()));
        }
        Ok(())
    }
}

/// `(L_n f)(eta)` for every configuration.
pub fn generator_apply(g: &GeneratorSpec, f: &[f64]) -> Result<Vec<f64>> {
    let space = g.space()?;
    if f.len() != space.size() {
        return Err(Error::MismatchedSpaces(f.len(), space.size()));
    }
    if let Some(v) = f.iter().find(|v| !v.is_finite()) {
        return domain(format!("function value {v} is not finite"));
    }
    Ok((0..space.size())
        .map(|s| {
            let mut acc = 0.0;
            g.for_each_move(s, |t, rate| acc += rate * (f[t] - f[s]));
            acc
        })
        .collect())
}

/// Product Bernoulli law with the given site densities.
pub fn product_distribution(field: &BernoulliField) -> Result<DistributionVector> {
    let space = StateSpace::new(field.n())?;
    let mut mass = Vec::with_capacity(space.size());
    mass.push(1.0);
    for &p in field.probs() {
        let len = mass.len();
        mass.extend_from_within(..len);
        for (i, v) in mass.iter_mut().enumerate() {
            *v *= if i < len { 1.0 - p } else { p };
        }
    }
    Ok(DistributionVector::from_raw(space, mass))
}

/// `1/2 sum |mu - nu|`.
pub fn tv_distance(mu: &DistributionVector, nu: &DistributionVector) -> Result<f64> {
    mu.check_same(nu)?;
    let l1: f64 = mu.mass.iter().zip(&nu.mass).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

/// `H(mu | nu) = sum mu log(mu / nu)` with `0 log 0 = 0`.
pub fn relative_entropy_h(mu: &DistributionVector, nu: &DistributionVector) -> Result<f64> {
    mu.check_same(nu)?;
    if let Some(s) = nu.mass.iter().position(|&v| v <= 0.0) {
        return domain(format!("reference law has zero mass at state {s}"));
    }
    let h: f64 = mu
        .mass
        .iter()
        .zip(&nu.mass)
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, v)| m * (m / v).ln())
        .sum();
    Ok(h.max(0.0))
}

/// Density `mu / nu` of `mu` against a strictly positive `nu`.
pub fn density(mu: &DistributionVector, nu: &DistributionVector) -> Result<Vec<f64>> {
    mu.check_same(nu)?;
    if let Some(s) = nu.mass.iter().position(|&v| v <= 0.0) {
        return domain(format!("reference law has zero mass at state {s}"));
    }
    Ok(mu.mass.iter().zip(&nu.mass).map(|(m, v)| m / v).collect())
}


#[cfg(test)]
mod tests {
    use super::testing::rate_matrix;
    use super::*;
    use crate::product::{product_relative_entropy, tv_exact_enum};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gen(n: usize, rho: f64) -> GeneratorSpec {
        GeneratorSpec::new(LatticeSize::new(n).unwrap(), rho).unwrap()
    }

    fn field(p: &[f64]) -> BernoulliField {
        BernoulliField::new(p.to_vec()).unwrap()
    }

    #[test]
    fn refuses_n_two() {
        assert!(GeneratorSpec::new(LatticeSize::new(2).unwrap(), 0.5).is_err());
    }

    #[test]
    fn generator_hand_value() {
        // f = eta(1) at the empty configuration: only injection at site 1 acts
        let g = gen(3, 0.5);
        let f: Vec<f64> = (0..4).map(|s| (s & 1) as f64).collect();
        let lf = generator_apply(&g, &f).unwrap();
        assert!((lf[0] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn generator_annihilates_constants() {
        for n in 3..9 {
            let lf = generator_apply(&gen(n, 0.3), &vec![2.5; 1 << (n - 1)]).unwrap();
            assert!(lf.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn generator_matches_rate_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 3..8 {
            let g = gen(n, 0.35);
            let q = rate_matrix(&g);
            let f: Vec<f64> = (0..q.len()).map(|_| rng.random::<f64>()).collect();
            let lf = generator_apply(&g, &f).unwrap();
            for (s, row) in q.iter().enumerate() {
                let expect: f64 = row.iter().zip(&f).map(|(a, b)| a * b).sum();
                assert!((lf[s] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn generator_is_stationary_for_the_reservoir_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 3..=10 {
            for rho in [0.2, 0.5, 0.8] {
                let g = gen(n, rho);
                let nu = product_distribution(&BernoulliField::constant(g.n(), rho).unwrap()).unwrap();
                let f: Vec<f64> = (0..nu.mass().len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let lf = generator_apply(&g, &f).unwrap();
                assert!(nu.expectation(&lf).abs() < 1e-10, "n={n} rho={rho}");
            }
        }
    }

    #[test]
    fn product_distribution_examples() {
        let uni = product_distribution(&field(&[0.5, 0.5])).unwrap();
        assert!(uni.mass().iter().all(|&m| (m - 0.25).abs() < 1e-15));
        let d = product_distribution(&field(&[0.6, 0.5])).unwrap();
        let by_pair = |e1: usize, e2: usize| d.mass()[e1 | (e2 << 1)];
        let got = [by_pair(0, 0), by_pair(0, 1), by_pair(1, 0), by_pair(1, 1)];
        for (g, e) in got.iter().zip([0.2, 0.2, 0.3, 0.3]) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn tv_and_entropy_basics() {
        let space = StateSpace::new(LatticeSize::new(4).unwrap()).unwrap();
        let a = DistributionVector::dirac(space, 1).unwrap();
        let b = DistributionVector::dirac(space, 6).unwrap();
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        assert!(relative_entropy_h(&a, &b).is_err());
        let other = StateSpace::new(LatticeSize::new(5).unwrap()).unwrap();
        assert!(tv_distance(&a, &DistributionVector::dirac(other, 0).unwrap()).is_err());
        let nu = product_distribution(&field(&[0.3, 0.4, 0.5])).unwrap();
        assert!(relative_entropy_h(&nu, &nu).unwrap().abs() < 1e-15);
    }

    #[test]
    fn pinsker_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let space = StateSpace::new(LatticeSize::new(6).unwrap()).unwrap();
        for _ in 0..100 {
            let mut draw = || {
                let raw: Vec<f64> = (0..space.size()).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = raw.iter().sum();
                DistributionVector::new(space, raw.iter().map(|v| v / total).collect()).unwrap()
            };
            let (mu, nu) = (draw(), draw());
            let tv = tv_distance(&mu, &nu).unwrap();
            assert!(2.0 * tv * tv <= relative_entropy_h(&mu, &nu).unwrap() + 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn product_laws_agree_with_product_formulas(
            p in prop::collection::vec(0.05f64..0.95, 2..9),
            q_shift in prop::collection::vec(-0.04f64..0.04, 9),
            rho in 0.1f64..0.9,
        ) {
            let u = field(&p);
            let v = field(&p.iter().zip(&q_shift).map(|(a, d)| (a + d).clamp(0.01, 0.99)).collect::<Vec<_>>());
            let mu = product_distribution(&u).unwrap();
            prop_assert!((mu.total() - 1.0).abs() < 1e-12);
            for (m, e) in mu.site_means().iter().zip(&p) {
                prop_assert!((m - e).abs() < 1e-12);
            }
            let reservoir = BernoulliField::constant(u.n(), rho).unwrap();
            let nu_bar = product_distribution(&reservoir).unwrap();
            let tv = tv_distance(&mu, &nu_bar).unwrap();
            prop_assert!((tv - tv_exact_enum(&u, rho).unwrap()).abs() < 1e-12);
            let h = relative_entropy_h(&mu, &product_distribution(&v).unwrap()).unwrap();
            prop_assert!((h - product_relative_entropy(&u, &v).unwrap()).abs() < 1e-10);
        }
    }
}
