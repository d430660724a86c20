//! The exact chain against the heat flow, the entropy inequalities and the
//! simulator.

use ssep_core::exact::{
    carre_du_champ_integral, density, entropy_trajectory, forward_evolve, ls_ratio_minimize, omega_correlations,
    product_distribution, relative_entropy_h, tv_distance, default_theta, GeneratorSpec, LsOptions,
};
use ssep_core::heat::{HeatSolution, LatticeSize, ProfileSpec};
use ssep_core::mc::{estimate_occupation, tv_lower_bound_statistic, SimConfig};
use ssep_core::product::{pinsker_holds, BernoulliField};

fn lat(n: usize) -> LatticeSize {
    LatticeSize::new(n).unwrap()
}

fn sine() -> ProfileSpec {
    ProfileSpec::sine(0.5, 0.2, 1).unwrap()
}

#[test]
fn exact_law_is_close_to_the_local_product_law() {
    for n in [4usize, 7, 10] {
        let g = GeneratorSpec::new(lat(n), 0.5).unwrap();
        let sol = HeatSolution::from_profile(&sine(), lat(n));
        let mu0 = product_distribution(&BernoulliField::from_field(sol.initial()).unwrap()).unwrap();
        for t in [0.02, 0.1, 0.4] {
            let mu = forward_evolve(&g, &mu0, t).unwrap();
            let nu_t = product_distribution(&BernoulliField::from_field(&sol.solve_heat_at(t).unwrap()).unwrap()).unwrap();
            let h = relative_entropy_h(&mu, &nu_t).unwrap();
            let tv = tv_distance(&mu, &nu_t).unwrap();
            assert!(h >= 0.0 && pinsker_holds(tv, h), "n={n} t={t}");
            // site means agree exactly; only correlations separate the laws
            for (m, e) in mu.site_means().iter().zip(nu_t.site_means()) {
                assert!((m - e).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn trajectory_matches_direct_evaluation() {
    let n = 6;
    let g = GeneratorSpec::new(lat(n), 0.5).unwrap();
    let sol = HeatSolution::from_profile(&sine(), lat(n));
    let mu0 = product_distribution(&BernoulliField::from_field(sol.initial()).unwrap()).unwrap();
    let nu = product_distribution(&BernoulliField::constant(lat(n), 0.5).unwrap()).unwrap();
    let times = [0.05, 0.15, 0.3];
    for p in entropy_trajectory(&g, &sine(), &times).unwrap() {
        let mu = forward_evolve(&g, &mu0, p.t).unwrap();
        let u = BernoulliField::from_field(&sol.solve_heat_at(p.t).unwrap()).unwrap();
        let nu_t = product_distribution(&u).unwrap();
        assert!((p.distance - tv_distance(&mu, &nu).unwrap()).abs() < 1e-12);
        assert!((p.product_tv - tv_distance(&nu_t, &nu).unwrap()).abs() < 1e-12);
        assert!((p.entropy - relative_entropy_h(&mu, &nu_t).unwrap()).abs() < 1e-12);
        let corr = omega_correlations(&mu, &u).unwrap();
        let max = corr.iter().map(|c| c.abs()).fold(0.0, f64::max);
        assert!((p.max_correlation - max).abs() < 1e-12);
        assert!(p.triangle_holds(1e-12));
    }
}

#[test]
fn log_sobolev_floor_bounds_the_densities_of_the_flow() {
    // the entropy production of every density met along the flow respects
    // the minimized ratio
    let n = 5;
    let g = GeneratorSpec::new(lat(n), 0.5).unwrap();
    let sol = HeatSolution::from_profile(&sine(), lat(n));
    let mu0 = product_distribution(&BernoulliField::from_field(sol.initial()).unwrap()).unwrap();
    for t in [0.01, 0.05, 0.2] {
        let mu = forward_evolve(&g, &mu0, t).unwrap();
        let u = BernoulliField::from_field(&sol.solve_heat_at(t).unwrap()).unwrap();
        let nu_t = product_distribution(&u).unwrap();
        let floor = ls_ratio_minimize(&u, default_theta(lat(n), 0.5), LsOptions::default()).unwrap();
        let f = density(&mu, &nu_t).unwrap();
        let h = relative_entropy_h(&mu, &nu_t).unwrap();
        let energy = carre_du_champ_integral(&g, &f, &nu_t).unwrap() / g.speed();
        if h > 1e-12 {
            assert!(energy / h >= floor.ratio * (1.0 - 1e-6), "t={t}: {} < {}", energy / h, floor.ratio);
        }
    }
}

#[test]
fn simulated_statistics_match_the_exact_chain() {
    let n = 7;
    let g = GeneratorSpec::new(lat(n), 0.5).unwrap();
    let sol = HeatSolution::from_profile(&sine(), lat(n));
    let mu0 = product_distribution(&BernoulliField::from_field(sol.initial()).unwrap()).unwrap();
    let t = 0.1;
    let mu = forward_evolve(&g, &mu0, t).unwrap();
    let u = BernoulliField::from_field(&sol.solve_heat_at(t).unwrap()).unwrap();
    let corr = omega_correlations(&mu, &u).unwrap();
    let sim = SimConfig::new(lat(n), sine(), t, 40_000, 77).unwrap();
    let stats = estimate_occupation(&sim, t).unwrap();
    for ((m, e), se) in stats.mean.iter().zip(mu.site_means()).zip(stats.mean_se()) {
        assert!((m - e).abs() < 4.0 * se, "{m} vs {e}");
    }
    for ((m, e), se) in stats.omega_mean.iter().zip(&corr).zip(&stats.omega_se) {
        assert!((m - e).abs() < 4.0 * se, "{m} vs {e}");
    }
}

#[test]
fn simulated_lower_bound_sits_below_the_exact_distance() {
    let n = 10;
    let g = GeneratorSpec::new(lat(n), 0.5).unwrap();
    let times = [0.05, 0.1, 0.2];
    let exact = entropy_trajectory(&g, &sine(), &times).unwrap();
    let sim = SimConfig::new(lat(n), sine(), 0.2, 20_000, 3).unwrap();
    for p in exact {
        let lb = tv_lower_bound_statistic(&sim, p.t, 1, None).unwrap();
        assert!(lb.estimate <= p.distance + 3.0 * lb.se, "t={}: {} vs {}", p.t, lb.estimate, p.distance);
        assert!(lb.estimate > 0.0);
    }
}
