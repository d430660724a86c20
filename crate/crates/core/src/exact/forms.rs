//! Carré du champ, Dirichlet forms and the comparison of quadratic forms.

use super::{generator_apply, product_distribution, DistributionVector, GeneratorSpec};
use crate::error::{domain, Error, Result};
use crate::heat::LatticeSize;
use crate::product::BernoulliField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn check_len(f: &[f64], size: usize) -> Result<()> {
    if f.len() != size {
        return Err(Error::MismatchedSpaces(f.len(), size));
    }
    Ok(())
}

fn sqrt_density(f: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = f.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return domain(format!("density value {v} is not a nonnegative number"));
    }
    Ok(f.iter().map(|v| v.sqrt()).collect())
}

/// `int Gamma_n h dnu` as the sum over moves of `rate * (h(eta') - h(eta))^2`.
pub fn gamma_integral(g: &GeneratorSpec, h: &[f64], nu: &DistributionVector) -> Result<f64> {
    check_len(h, nu.mass().len())?;
    if nu.space() != g.space()? {
        return Err(Error::MismatchedSpaces(nu.space().sites(), g.sites()));
    }
    let mut total = 0.0;
    for (s, &w) in nu.mass().iter().enumerate() {
        let mut local = 0.0;
        g.for_each_move(s, |t, rate| local += rate * (h[t] - h[s]).powi(2));
        total += w * local;
    }
    Ok(total)
}

/// `int Gamma_n sqrt(f) dnu` for a nonnegative `f`, by the move-sum form.
pub fn carre_du_champ_integral(g: &GeneratorSpec, f: &[f64], nu: &DistributionVector) -> Result<f64> {
    gamma_integral(g, &sqrt_density(f)?, nu)
}

/// The same quantity from the definition `Gamma h = L h^2 - 2 h L h`.
pub fn carre_du_champ_dual(g: &GeneratorSpec, f: &[f64], nu: &DistributionVector) -> Result<f64> {
    check_len(f, nu.mass().len())?;
    let h = sqrt_density(f)?;
    let h2: Vec<f64> = h.iter().map(|v| v * v).collect();
    let l_h2 = generator_apply(g, &h2)?;
    let l_h = generator_apply(g, &h)?;
    Ok(nu
        .mass()
        .iter()
        .enumerate()
        .map(|(s, w)| w * (l_h2[s] - 2.0 * h[s] * l_h[s]))
        .sum())
}

/// `theta = n min(rho, 1 - rho)`, the reservoir weight that makes
/// `n^2 D(f) <= int Gamma_n f` hold.
pub fn default_theta(n: LatticeSize, rho: f64) -> f64 {
    n.as_f64() * rho.min(1.0 - rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletForms {
    /// `D_x(f)` for `x = 1, ..., n-1`.
    pub site: Vec<f64>,
    /// `D_{x,x+1}(f)` for `x = 1, ..., n-2`.
    pub edge: Vec<f64>,
    /// `(theta / n) D_1(f) + sum_x D_{x,x+1}(f)`.
    pub aggregate: f64,
}

/// Flip and exchange forms of `f` under the product law `nu_u`.
pub fn dirichlet_forms(f: &[f64], field: &BernoulliField, theta: f64) -> Result<DirichletForms> {
    if !(theta > 0.0 && theta.is_finite()) {
        return domain(format!("theta = {theta} must be positive"));
    }
    let nu = product_distribution(field)?;
    check_len(f, nu.mass().len())?;
    let m = field.sites();
    let mut site = vec![0.0; m];
    let mut edge = vec![0.0; m.saturating_sub(1)];
    for (s, &w) in nu.mass().iter().enumerate() {
        for (i, acc) in site.iter_mut().enumerate() {
            *acc += w * (f[s ^ (1 << i)] - f[s]).powi(2);
        }
        for (i, acc) in edge.iter_mut().enumerate() {
            if ((s >> i) ^ (s >> (i + 1))) & 1 == 1 {
                *acc += w * (f[s ^ (0b11 << i)] - f[s]).powi(2);
            }
        }
    }
    let aggregate = theta / field.n().as_f64() * site[0] + edge.iter().sum::<f64>();
    Ok(DirichletForms { site, edge, aggregate })
}

/// `max_{l in 2..n-1} D_l(f) / (n D(f))`; `None` when `D(f) = 0`.
pub fn comparison_ratio(f: &[f64], field: &BernoulliField, theta: f64) -> Result<Option<f64>> {
    let forms = dirichlet_forms(f, field, theta)?;
    if forms.aggregate <= 0.0 {
        return Ok(None);
    }
    let n = field.n().as_f64();
    let worst = forms.site[1..].iter().copied().fold(0.0, f64::max);
    Ok(Some(worst / (n * forms.aggregate)))
}

/// Constant of the comparison of quadratic forms for fields with
/// `eps0 <= u <= 1 - eps0` and `n |u(x+1) - u(x)| <= kappa`:
/// `max(2 / eps0, 1 / theta) e^(kappa / eps0^2 + 1)`.
pub fn comparison_constant(eps0: f64, kappa: f64, theta: f64) -> f64 {
    (2.0 / eps0).max(1.0 / theta) * (kappa / (eps0 * eps0) + 1.0).exp()
}

/// Largest [`comparison_ratio`] over `samples` random functions.
///
/// Each function is `exp(sigma Z)` with independent standard normal `Z`
/// per state and a spread `sigma` drawn uniformly from `[0, 3]`, so the
/// sample mixes nearly constant and strongly peaked functions.
pub fn comparison_sweep(field: &BernoulliField, theta: f64, samples: usize, seed: u64) -> Result<f64> {
    let size = 1usize << field.sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let sigma = 3.0 * rng.random::<f64>();
        let f: Vec<f64> = (0..size)
            .map(|_| (sigma * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        if let Some(r) = comparison_ratio(&f, field, theta)? {
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::StateSpace;

    fn gen(n: usize, rho: f64) -> GeneratorSpec {
        GeneratorSpec::new(LatticeSize::new(n).unwrap(), rho).unwrap()
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize) -> BernoulliField {
        BernoulliField::new((1..n).map(|_| 0.2 + 0.6 * rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn constant_density_has_no_energy() {
        let g = gen(5, 0.4);
        let nu = product_distribution(&BernoulliField::constant(g.n(), 0.4).unwrap()).unwrap();
        let one = vec![1.0; 16];
        assert_eq!(carre_du_champ_integral(&g, &one, &nu).unwrap(), 0.0);
        let forms = dirichlet_forms(&one, &BernoulliField::constant(g.n(), 0.4).unwrap(), 2.0).unwrap();
        assert!(forms.site.iter().chain(&forms.edge).all(|&v| v == 0.0));
        assert_eq!(forms.aggregate, 0.0);
    }

    #[test]
    fn spike_density_has_positive_energy() {
        let g = gen(3, 0.5);
        let space = StateSpace::new(g.n()).unwrap();
        let nu = product_distribution(&BernoulliField::constant(g.n(), 0.5).unwrap()).unwrap();
        let mut f = vec![0.0; space.size()];
        f[2] = 4.0;
        // h = 2 at state 2; its three neighbours each contribute
        // 9 * rate * 4 weighted by 1/4 from both sides
        let value = carre_du_champ_integral(&g, &f, &nu).unwrap();
        let by_hand = {
            let mut acc = 0.0;
            for s in 0..4usize {
                g.for_each_move(s, |t, r| {
                    let (hs, ht) = (if s == 2 { 2.0 } else { 0.0 }, if t == 2 { 2.0 } else { 0.0 });
                    acc += 0.25 * r * (ht - hs) * (ht - hs);
                });
            }
            acc
        };
        assert!(value > 0.0);
        assert!((value - by_hand).abs() < 1e-12);
        assert!(carre_du_champ_integral(&g, &[-1.0, 1.0, 1.0, 1.0], &nu).is_err());
    }

    #[test]
    fn two_formulas_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 3..=7 {
            let g = gen(n, 0.3);
            let nu = product_distribution(&random_field(&mut rng, n)).unwrap();
            let f: Vec<f64> = (0..nu.mass().len()).map(|_| rng.random::<f64>() * 3.0).collect();
            let a = carre_du_champ_integral(&g, &f, &nu).unwrap();
            let b = carre_du_champ_dual(&g, &f, &nu).unwrap();
            assert!((a - b).abs() < 1e-10 * (1.0 + a), "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn hand_enumerated_forms() {
        let field = BernoulliField::new(vec![0.5, 0.5]).unwrap();
        let f: Vec<f64> = (0..4).map(|s| (s & 1) as f64).collect();
        let forms = dirichlet_forms(&f, &field, 1.5).unwrap();
        assert!((forms.site[0] - 1.0).abs() < 1e-15);
        assert!((forms.edge[0] - 0.5).abs() < 1e-15);
        assert!((forms.aggregate - (0.5 * 1.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_form_is_dominated_by_carre_du_champ() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 3..=9 {
            for rho in [0.2, 0.5, 0.7] {
                let g = gen(n, rho);
                let field = random_field(&mut rng, n);
                let nu = product_distribution(&field).unwrap();
                let f: Vec<f64> = (0..nu.mass().len()).map(|_| rng.random::<f64>() - 0.5).collect();
                let theta = default_theta(g.n(), rho);
                let d = dirichlet_forms(&f, &field, theta).unwrap().aggregate;
                let gamma = gamma_integral(&g, &f, &nu).unwrap();
                assert!(g.speed() * d <= gamma * (1.0 + 1e-12), "n={n} rho={rho}");
            }
        }
    }

    #[test]
    fn comparison_ratio_is_below_the_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 4..=8 {
            let size = LatticeSize::new(n).unwrap();
            let u: Vec<f64> = (1..n).map(|x| 0.5 + 0.2 * (std::f64::consts::PI * x as f64 / n as f64).sin()).collect();
            let field = BernoulliField::new(u.clone()).unwrap();
            let eps0 = u.iter().map(|v| v.min(1.0 - v)).fold(0.5, f64::min);
            let kappa = u.windows(2).map(|w| n as f64 * (w[1] - w[0]).abs()).fold(0.0, f64::max);
            let theta = default_theta(size, 0.5);
            let bound = comparison_constant(eps0, kappa, theta);
            for _ in 0..20 {
                let f: Vec<f64> = (0..1 << (n - 1)).map(|_| rng.random::<f64>()).collect();
                let r = comparison_ratio(&f, &field, theta).unwrap().unwrap();
                assert!(r <= bound);
            }
        }
    }

    #[test]
    fn sweep_is_reproducible_and_bounded() {
        let size = LatticeSize::new(6).unwrap();
        let field = BernoulliField::new(vec![0.4, 0.5, 0.6, 0.5, 0.45]).unwrap();
        let theta = default_theta(size, 0.5);
        let a = comparison_sweep(&field, theta, 50, 3).unwrap();
        assert_eq!(a, comparison_sweep(&field, theta, 50, 3).unwrap());
        assert!(a > 0.0 && a <= comparison_constant(0.4, 6.0 * 0.1, theta));
    }
}
