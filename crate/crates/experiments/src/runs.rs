//! The experiments. Each runner turns an [`ExperimentConfig`] into a
//! [`Report`]: result rows plus the pass/fail checks it declares.
//!
//! Independent cells run in parallel; rows are sorted when emitted, so the
//! output never depends on scheduling.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use ssep_core::exact::{
    comparison_constant, comparison_sweep, default_theta, entropy_trajectory, yau_finite_difference, GeneratorSpec,
};
use ssep_core::fit::exponential_least_squares;
use ssep_core::heat::{
    cutoff_time, discrete_gradient_sup, lemmas, HeatSolution, LatticeSize, ProfileKind, ProfileSpec, SineTerm,
};
use ssep_core::mc::{estimate_occupation, tv_lower_bound_statistic, SimConfig};
use ssep_core::product::{
    gaussian_profile, leading_mode_and_gamma, llr_coefficients, product_relative_entropy, tv_exact_enum, tv_grid_dp,
    tv_monte_carlo, BernoulliField, GridSpec,
};
use ssep_core::Check;

use crate::config::{Experiment, ExperimentConfig, Methods, TvMethod};
use crate::emit::ResultRow;
use crate::error::{ExpError, Result};

/// Independent streams used by Monte Carlo TV estimates; fixed so that
/// results do not depend on the worker count.
pub const MC_TV_STREAMS: usize = 64;

/// Floating-point slack for inequalities between exactly computed numbers.
const FP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub checks: Vec<Check>,
    /// Cells that could not be computed; the run continued without them.
    pub skipped: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Records `check` and a row carrying its margin.
    fn check(&mut self, experiment: &str, check: Check) {
        let slug: String = check
            .name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect();
        let verdict = if check.passed { "pass" } else { "fail" };
        self.rows.push(ResultRow::exact(experiment, &format!("check:{slug}"), check.margin, verdict));
        self.checks.push(check);
    }

    fn absorb(&mut self, part: Part, record_walltime: bool) {
        let mut rows = part.rows;
        if record_walltime {
            for r in &mut rows {
                r.walltime_ms = part.walltime_ms;
            }
        }
        self.rows.extend(rows);
    }
}

/// Output of one independent job.
struct Part {
    rows: Vec<ResultRow>,
    walltime_ms: u64,
}

fn timed(f: impl FnOnce() -> Result<Vec<ResultRow>>) -> Result<Part> {
    let start = Instant::now();
    let rows = f()?;
    Ok(Part { rows, walltime_ms: start.elapsed().as_millis() as u64 })
}

/// Runs the experiment selected in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        Experiment::Cutoff => run_cutoff_curve(cfg),
        Experiment::Entropy => run_entropy_decay(cfg),
        Experiment::Lemmas => run_lemma_suite(cfg),
        Experiment::Heat => run_heat(cfg),
        Experiment::Tv => run_tv(cfg),
        Experiment::Mc => run_mc(cfg),
    }
}

/// Product-measure total variation together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvValue {
    pub value: f64,
    /// Certified half-width (grid), standard error (Monte Carlo) or 0.
    pub uncertainty: f64,
    pub method: &'static str,
    pub samples: Option<usize>,
}

/// Resolves `auto` by size: enumeration, then grid, then Monte Carlo.
pub fn select_tv_method(methods: &Methods, n: usize) -> TvMethod {
    match methods.tv {
        TvMethod::Auto if n - 1 <= methods.enum_max_sites => TvMethod::Enum,
        TvMethod::Auto if n <= methods.grid_max_n => TvMethod::Grid,
        TvMethod::Auto => TvMethod::Mc,
        m => m,
    }
}

/// `||nu_u - nu_rho||_TV` by the configured method.
pub fn product_tv(field: &BernoulliField, rho: f64, methods: &Methods, seed: u64) -> Result<TvValue> {
    Ok(match select_tv_method(methods, field.n().get()) {
        TvMethod::Enum => TvValue { value: tv_exact_enum(field, rho)?, uncertainty: 0.0, method: "enum", samples: None },
        TvMethod::Grid => {
            let g = tv_grid_dp(field, rho, GridSpec { bins: methods.grid_bins, tol: methods.grid_tol })?;
            TvValue { value: g.value, uncertainty: g.error_bound, method: "grid", samples: None }
        }
        TvMethod::Mc | TvMethod::Auto => {
            let mc = tv_monte_carlo(field, rho, methods.mc_samples, seed, MC_TV_STREAMS)?;
            let se = mc.half_width / 1.959_963_984_540_054;
            TvValue {
                value: mc.estimate,
                uncertainty: se.max(1.0 / mc.samples as f64),
                method: "mc",
                samples: Some(mc.samples),
            }
        }
    })
}

/// Seed of the Monte Carlo stream family for cell `(n, k)`.
fn cell_seed(seed: u64, n: usize, k: usize) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (k as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

fn lattice(n: usize) -> Result<LatticeSize> {
    LatticeSize::new(n).map_err(ExpError::from)
}

/// Leading mode and `gamma`; a profile without one cannot have a cutoff.
fn mode_and_gamma(profile: &ProfileSpec) -> Result<(usize, f64)> {
    leading_mode_and_gamma(profile).map_err(|e| match e {
        ssep_core::Error::NoDetectableMode { .. } => {
            ExpError::Config(format!("the profile has no detectable Fourier mode ({e}); cutoff curves need one"))
        }
        other => other.into(),
    })
}

fn tv_row(cfg: &ExperimentConfig, quantity: &str, v: f64, tv: &TvValue, seed: u64) -> ResultRow {
    match tv.samples {
        Some(s) => ResultRow::sampled(&cfg.id, quantity, v, tv.uncertainty, s, tv.method, seed),
        None => ResultRow::exact(&cfg.id, quantity, v, tv.method).with_uncertainty(tv.uncertainty),
    }
}

/// Rows of one product cell `(n, b)`: cutoff time, TV, Gaussian target, gap.
fn product_cell(cfg: &ExperimentConfig, n: usize, k: usize, l0: usize, gamma: f64, extra: bool) -> Result<Vec<ResultRow>> {
    let b = cfg.bs[k];
    let id = cfg.id.as_str();
    let rho = cfg.profile.rho();
    let ct = cutoff_time(n as f64, l0, b);
    let u = HeatSolution::from_profile(&cfg.profile, lattice(n)?).solve_heat_at(ct.t)?;
    let field = BernoulliField::from_field(&u)?;
    let seed = cell_seed(cfg.seed, n, k);
    let tv = product_tv(&field, rho, &cfg.methods, seed)?;
    let target = gaussian_profile(gamma * (-b).exp());
    let mut rows = vec![
        ResultRow::exact(id, "cutoff_time", ct.t, "closed-form"),
        tv_row(cfg, "tv", tv.value, &tv, seed),
        ResultRow::exact(id, "target", target, "quadrature"),
        tv_row(cfg, "gap", (tv.value - target).abs(), &tv, seed),
    ];
    if ct.clamped {
        rows.push(ResultRow::exact(id, "t_clamped", 1.0, "closed-form"));
    }
    if extra {
        let coeffs = llr_coefficients(&field, rho)?;
        let entropy = product_relative_entropy(&field, &BernoulliField::constant(field.n(), rho)?)?;
        rows.push(ResultRow::exact(id, "s", coeffs.s, "closed-form"));
        rows.push(ResultRow::exact(id, "bsum_gap", (coeffs.bsum - 0.5 * coeffs.s * coeffs.s).abs(), "closed-form"));
        if !coeffs.is_trivial() {
            rows.push(ResultRow::exact(id, "lyapounov_ratio", coeffs.lyapounov_ratio(), "closed-form"));
        }
        rows.push(ResultRow::exact(id, "product_entropy", entropy, "closed-form"));
        // Pinsker: TV <= sqrt(H / 2); the TV uncertainty is granted as slack
        let slack = (entropy / 2.0).sqrt() + tv.uncertainty.max(FP_SLACK) - tv.value;
        rows.push(ResultRow::exact(id, "pinsker_slack", slack, "closed-form"));
    }
    Ok(rows.into_iter().map(|r| r.at_n(n).at_b(b)).collect())
}

/// Exact-chain rows at every `b` for one `n`: distance, entropy, triangle slack.
fn exact_cells(cfg: &ExperimentConfig, n: usize, l0: usize, gamma: f64) -> Result<Vec<ResultRow>> {
    let id = cfg.id.as_str();
    let g = GeneratorSpec::new(lattice(n)?, cfg.profile.rho())?;
    let mut order: Vec<usize> = (0..cfg.bs.len()).collect();
    let times: Vec<f64> = cfg.bs.iter().map(|&b| cutoff_time(n as f64, l0, b).t).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let points = entropy_trajectory(&g, &cfg.profile, &sorted)?;
    let mut rows = Vec::new();
    for (&i, p) in order.iter().zip(&points) {
        let b = cfg.bs[i];
        let target = gaussian_profile(gamma * (-b).exp());
        let slack = (p.entropy / 2.0).sqrt() - (p.distance - p.product_tv).abs();
        for r in [
            ResultRow::exact(id, "distance", p.distance, "exact-chain"),
            ResultRow::exact(id, "entropy", p.entropy, "exact-chain"),
            ResultRow::exact(id, "triangle_slack", slack, "exact-chain"),
            ResultRow::exact(id, "distance_gap", (p.distance - target).abs(), "exact-chain"),
        ] {
            rows.push(r.at_n(n).at_b(b));
        }
    }
    Ok(rows)
}

enum Job {
    Product { n: usize, k: usize },
    Exact { n: usize },
}

fn product_runs(cfg: &ExperimentConfig, with_exact: bool, extra: bool) -> Result<Report> {
    let (l0, gamma) = mode_and_gamma(&cfg.profile)?;
    let mut report = Report::default();
    report.rows.push(ResultRow::exact(&cfg.id, "gamma", gamma, "closed-form"));
    report.rows.push(ResultRow::exact(&cfg.id, "leading_mode", l0 as f64, "closed-form"));
    let mut jobs = Vec::new();
    for &n in &cfg.ns {
        jobs.extend((0..cfg.bs.len()).map(|k| Job::Product { n, k }));
        if with_exact && n - 1 <= cfg.methods.exact_max_sites {
            jobs.push(Job::Exact { n });
        }
    }
    let parts: Vec<(String, Result<Part>)> = jobs
        .par_iter()
        .map(|job| match *job {
            Job::Product { n, k } => (
                format!("n={n} b={}", cfg.bs[k]),
                timed(|| product_cell(cfg, n, k, l0, gamma, extra)),
            ),
            Job::Exact { n } => (format!("exact chain n={n}"), timed(|| exact_cells(cfg, n, l0, gamma))),
        })
        .collect();
    for (label, part) in parts {
        match part {
            Ok(p) => report.absorb(p, cfg.record_walltime),
            Err(e) => report.skipped.push(format!("{label}: {e}")),
        }
    }
    Ok(report)
}

fn min_of(rows: &[ResultRow], quantity: &str) -> Option<f64> {
    rows.iter().filter(|r| r.quantity == quantity).map(|r| r.value).reduce(f64::min)
}

/// Product TV at the cutoff schedule against the Gaussian target, plus the
/// exact chain where it is tractable.
///
/// Declared check: the triangle inequality
/// `|D_n - TV(nu_t, nu_rho)| <= sqrt(H_n / 2)` at every exact cell.
pub fn run_cutoff_curve(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = product_runs(cfg, true, false)?;
    if let Some(margin) = min_of(&report.rows, "triangle_slack") {
        report.check(&cfg.id, Check::from_margin("triangle inequality", margin + FP_SLACK, "min over exact cells"));
    }
    Ok(report)
}

/// Product TV on the `(n, b)` grid with its likelihood-ratio diagnostics.
///
/// Declared check: Pinsker's inequality for each product law.
pub fn run_tv(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = product_runs(cfg, false, true)?;
    if let Some(margin) = min_of(&report.rows, "pinsker_slack") {
        report.check(&cfg.id, Check::from_margin("pinsker", margin, "TV <= sqrt(H/2) up to the TV uncertainty"));
    }
    Ok(report)
}

/// `kappa^2 / (eps0^2 n)`.
fn correlation_bound(profile: &ProfileSpec, n: usize) -> f64 {
    profile.kappa().powi(2) / (profile.eps0().powi(2) * n as f64)
}

/// Exact entropy trajectory, distance, Yau bound and correlations for each
/// `n`, with an exponential fit of the entropy tail.
///
/// Declared checks: Yau's inequality (finite differences), the triangle
/// inequality, the two-point correlation bound, and a positive fitted rate
/// whenever the entropy is not identically zero.
pub fn run_entropy_decay(cfg: &ExperimentConfig) -> Result<Report> {
    let id = cfg.id.as_str();
    let e = &cfg.entropy;
    let parts: Vec<Result<Part>> = cfg
        .ns
        .par_iter()
        .map(|&n| {
            timed(|| {
                let g = GeneratorSpec::new(lattice(n)?, cfg.profile.rho())?;
                let points = entropy_trajectory(&g, &cfg.profile, &cfg.ts)?;
                let yau = yau_finite_difference(&g, &cfg.profile, &cfg.ts, e.fd_step, e.max_gap)?;
                let bound = correlation_bound(&cfg.profile, n);
                let mut rows = Vec::new();
                for (p, y) in points.iter().zip(&yau) {
                    let triangle = (p.entropy / 2.0).sqrt() - (p.distance - p.product_tv).abs();
                    for r in [
                        ResultRow::exact(id, "entropy", p.entropy, "exact-chain"),
                        ResultRow::exact(id, "distance", p.distance, "exact-chain"),
                        ResultRow::exact(id, "product_tv", p.product_tv, "enum"),
                        ResultRow::exact(id, "yau_rhs", p.yau_rhs, "exact-chain"),
                        ResultRow::exact(id, "max_correlation", p.max_correlation, "exact-chain"),
                        ResultRow::exact(id, "correlation_slack", bound - p.max_correlation, "exact-chain"),
                        ResultRow::exact(id, "triangle_slack", triangle, "exact-chain"),
                        ResultRow::exact(id, "dH_dt", y.derivative, "finite-difference")
                            .with_uncertainty(y.richardson_gap.abs()),
                        ResultRow::exact(id, "yau_slack", y.rhs + e.yau_slack - y.derivative, "finite-difference"),
                    ] {
                        rows.push(r.at_n(n).at_t(p.t));
                    }
                }
                let tail: Vec<(f64, f64)> = points
                    .iter()
                    .filter(|p| p.t >= e.fit_from && p.entropy > 0.0)
                    .map(|p| (p.t, p.entropy))
                    .collect();
                if tail.len() >= 2 {
                    let (t, h): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
                    let fit = exponential_least_squares(&t, &h)?;
                    let envelope = tail.iter().map(|(t, h)| h / fit.eval(*t)).fold(0.0, f64::max);
                    rows.push(ResultRow::exact(id, "fit_rate", fit.rate, "least-squares").at_n(n));
                    rows.push(ResultRow::exact(id, "fit_c", fit.c, "least-squares").at_n(n));
                    rows.push(ResultRow::exact(id, "envelope_ratio", envelope, "least-squares").at_n(n));
                }
                Ok(rows)
            })
        })
        .collect();
    let mut report = Report::default();
    for part in parts {
        report.absorb(part?, cfg.record_walltime);
    }
    let checks = [
        ("yau inequality", "yau_slack", 0.0, "dH/dt <= Yau bound + slack"),
        ("triangle inequality", "triangle_slack", FP_SLACK, "|D - TV(nu_t)| <= sqrt(H/2)"),
        ("correlation bound", "correlation_slack", FP_SLACK, "|E omega_x omega_x+1| <= kappa^2/(eps0^2 n)"),
        ("positive decay rate", "fit_rate", 0.0, "fitted exponential rate of the entropy"),
    ];
    for (name, quantity, slack, detail) in checks {
        if let Some(margin) = min_of(&report.rows, quantity) {
            report.check(id, Check::from_margin(name, margin + slack, detail));
        }
    }
    Ok(report)
}

/// Auxiliary profiles that exercise the lemmas beyond the configured one.
fn lemma_profiles() -> Result<Vec<ProfileSpec>> {
    let mixture = ProfileSpec::with_fitted_class(
        ProfileKind::SineMixture(vec![
            SineTerm { mode: 1, amplitude: 0.15 },
            SineTerm { mode: 2, amplitude: 0.05 },
        ]),
        0.5,
    )?;
    let rough = ProfileSpec::with_fitted_class(ProfileKind::Tabulated(vec![0.5, 0.9, 0.1, 0.9, 0.1, 0.5]), 0.5)?;
    let tent = ProfileSpec::with_fitted_class(ProfileKind::Tabulated(vec![0.5, 0.7, 0.6, 0.5]), 0.5)?;
    Ok(vec![mixture, rough, tent])
}

/// Sizes for the eigenvalue lemmas.
pub const LEMMA_N_MAX: usize = 512;
/// Sizes for the Riemann-sum lemma.
pub const RIEMANN_NS: [usize; 8] = [32, 64, 128, 256, 512, 1024, 2048, 4096];
/// Sizes for the leading-mode asymptotics.
pub const LEADING_MODE_NS: [usize; 4] = [64, 256, 1024, 4096];
/// Random functions per size in the comparison lemma.
pub const COMPARISON_SAMPLES: usize = 200;

/// The spectral lemmas, the comparison of quadratic forms and the
/// two-point correlation bound, one check each.
pub fn run_lemma_suite(cfg: &ExperimentConfig) -> Result<Report> {
    let id = cfg.id.as_str();
    let profile = &cfg.profile;
    let aux = lemma_profiles()?;
    let mut all = vec![profile.clone()];
    all.extend(aux.iter().cloned());
    let mut report = Report::default();

    report.check(id, lemmas::eigenvalue_ratio(LEMMA_N_MAX));
    report.check(id, lemmas::eigenvalue_bounds(LEMMA_N_MAX));
    report.check(id, lemmas::gradient_decay(&all, &[4, 17, 64, 256, 512], &[1.0, 2.0, 5.0])?);
    for (k, p) in all.iter().enumerate() {
        let (mut check, fit) = lemmas::riemann_error(p, 5, &RIEMANN_NS)?;
        check.name = format!("{} (profile {k})", check.name);
        for (n, e) in &fit.scaled_errors {
            report
                .rows
                .push(ResultRow::exact(id, &format!("riemann_scaled_error_p{k}"), *e, "quadrature").at_n(*n));
        }
        report.check(id, check);
    }
    let b_grid: Vec<f64> = (0..=8).map(|k| -2.0 + 0.5 * k as f64).collect();
    match lemmas::leading_mode(profile, &LEADING_MODE_NS, &b_grid) {
        Ok((check, devs)) => {
            for (n, d) in devs {
                report.rows.push(ResultRow::exact(id, "leading_mode_deviation", d, "spectral").at_n(n));
            }
            report.check(id, check);
        }
        Err(ssep_core::Error::NoDetectableMode { .. }) => {
            report.skipped.push("leading-mode asymptotics: the profile has no mode to follow".into())
        }
        Err(e) => return Err(e.into()),
    }
    report.check(id, lemmas::maximum_principle(profile, &[16, 64, 256], &[0.0, 1e-3, 1e-2, 0.1, 1.0])?);

    // comparison of quadratic forms, one constant for all n
    let rho = profile.rho();
    let sweeps: Vec<Result<(usize, f64, f64)>> = (4..=10usize)
        .into_par_iter()
        .map(|n| {
            let size = lattice(n)?;
            let field = BernoulliField::from_field(&profile.sample(size))?;
            let theta = default_theta(size, rho);
            let worst = comparison_sweep(&field, theta, COMPARISON_SAMPLES, cfg.seed.wrapping_add(n as u64))?;
            Ok((n, worst, comparison_constant(profile.eps0(), profile.kappa(), theta)))
        })
        .collect();
    let mut margin = f64::INFINITY;
    for s in sweeps {
        let (n, worst, bound) = s?;
        report.rows.push(
            ResultRow::sampled(id, "comparison_ratio_max", worst, 0.0, COMPARISON_SAMPLES, "random-sweep", cfg.seed)
                .at_n(n),
        );
        report.rows.push(ResultRow::exact(id, "comparison_constant", bound, "closed-form").at_n(n));
        margin = margin.min((bound - worst) / bound);
    }
    report.check(id, Check::from_margin("comparison of quadratic forms", margin, "relative slack, n = 4..10"));

    // two-point correlations along the exact flow
    let times = [0.01, 0.05, 0.1, 0.2, 0.5];
    let corr: Vec<Result<f64>> = (3..=10usize)
        .into_par_iter()
        .map(|n| {
            let g = GeneratorSpec::new(lattice(n)?, rho)?;
            let bound = correlation_bound(profile, n);
            let points = entropy_trajectory(&g, profile, &times)?;
            Ok(points.iter().map(|p| bound - p.max_correlation).fold(f64::INFINITY, f64::min))
        })
        .collect();
    let mut margin = f64::INFINITY;
    for c in corr {
        margin = margin.min(c?);
    }
    report.check(id, Check::from_margin("correlation bound", margin + FP_SLACK, "exact, n = 3..10"));
    Ok(report)
}

/// Heat-flow summaries: extreme values, deviation and gradient for each
/// `(n, t)`, and the cutoff schedule on the `b` grid.
///
/// Declared check: the maximum principle on the configured times.
pub fn run_heat(cfg: &ExperimentConfig) -> Result<Report> {
    let id = cfg.id.as_str();
    let rho = cfg.profile.rho();
    let eps0 = cfg.profile.eps0();
    let mode = leading_mode_and_gamma(&cfg.profile).ok();
    let parts: Vec<Result<Part>> = cfg
        .ns
        .par_iter()
        .map(|&n| {
            timed(|| {
                let sol = HeatSolution::from_profile(&cfg.profile, lattice(n)?);
                let mut rows = Vec::new();
                for &t in &cfg.ts {
                    let u = sol.solve_heat_at(t)?;
                    let bulk = u.bulk();
                    let lo = bulk.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = bulk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let dev = bulk.iter().map(|v| (v - rho).abs()).fold(0.0, f64::max);
                    for r in [
                        ResultRow::exact(id, "min_u", lo, "spectral"),
                        ResultRow::exact(id, "max_u", hi, "spectral"),
                        ResultRow::exact(id, "max_deviation", dev, "spectral"),
                        ResultRow::exact(id, "gradient_sup", discrete_gradient_sup(&u), "spectral"),
                        ResultRow::exact(id, "class_slack", (lo - eps0).min(1.0 - eps0 - hi), "spectral"),
                    ] {
                        rows.push(r.at_n(n).at_t(t));
                    }
                }
                if let Some((l0, _)) = mode {
                    for &b in &cfg.bs {
                        let ct = cutoff_time(n as f64, l0, b);
                        rows.push(ResultRow::exact(id, "cutoff_time", ct.t, "closed-form").at_n(n).at_b(b));
                    }
                }
                Ok(rows)
            })
        })
        .collect();
    let mut report = Report::default();
    if let Some((l0, gamma)) = mode {
        report.rows.push(ResultRow::exact(id, "gamma", gamma, "closed-form"));
        report.rows.push(ResultRow::exact(id, "leading_mode", l0 as f64, "closed-form"));
        report.rows.push(ResultRow::exact(id, "relaxation_rate", PI * PI * (l0 * l0) as f64, "closed-form"));
    }
    for part in parts {
        report.absorb(part?, cfg.record_walltime);
    }
    if let Some(margin) = min_of(&report.rows, "class_slack") {
        report.check(id, Check::from_margin("maximum principle", margin + FP_SLACK, "eps0 <= u_t <= 1 - eps0"));
    }
    Ok(report)
}

/// Simulated occupations and two-point correlations against the heat flow
/// and the correlation bound, and the histogram lower bound on the distance.
///
/// Declared check: every simulated `|E omega_x omega_{x+1}|` lies below the
/// bound plus three standard errors.
pub fn run_mc(cfg: &ExperimentConfig) -> Result<Report> {
    let id = cfg.id.as_str();
    let horizon = cfg.ts.iter().copied().fold(0.0, f64::max);
    let l0 = leading_mode_and_gamma(&cfg.profile).map(|m| m.0).unwrap_or(1);
    let mut report = Report::default();
    let mut margin = f64::INFINITY;
    for &n in &cfg.ns {
        let size = lattice(n)?;
        let sim = SimConfig::new(size, cfg.profile.clone(), horizon, cfg.mc.replicas, cfg.seed)?;
        let sol = HeatSolution::from_profile(&cfg.profile, size);
        let bound = correlation_bound(&cfg.profile, n);
        let r = cfg.mc.replicas;
        for &t in &cfg.ts {
            let part = timed(|| {
                let stats = estimate_occupation(&sim, t)?;
                let u = sol.solve_heat_at(t)?;
                let se = stats.mean_se();
                let floor = 1.0 / r as f64;
                let (mut max_err, mut max_err_se, mut max_z) = (0.0f64, floor, 0.0f64);
                for ((m, e), s) in stats.mean.iter().zip(u.bulk()).zip(&se) {
                    let err = (m - e).abs();
                    if err > max_err {
                        max_err = err;
                        max_err_se = s.max(floor);
                    }
                    max_z = max_z.max(err / s.max(floor));
                }
                let (mut worst, mut worst_se, mut slack) = (0.0f64, floor, f64::INFINITY);
                for (m, s) in stats.omega_mean.iter().zip(&stats.omega_se) {
                    if m.abs() >= worst {
                        worst = m.abs();
                        worst_se = s.max(floor);
                    }
                    slack = slack.min(bound + 3.0 * s.max(floor) - m.abs());
                }
                let mut rows = vec![
                    ResultRow::sampled(id, "occupation_max_error", max_err, max_err_se, r, "mc", cfg.seed),
                    ResultRow::sampled(id, "occupation_max_z", max_z, 1.0, r, "mc", cfg.seed),
                    ResultRow::sampled(id, "omega_max", worst, worst_se, r, "mc", cfg.seed),
                    ResultRow::exact(id, "correlation_bound", bound, "closed-form"),
                    ResultRow::sampled(id, "correlation_slack", slack, worst_se, r, "mc", cfg.seed),
                ];
                if cfg.mc.lower_bound && r >= 1000 {
                    let lb = tv_lower_bound_statistic(&sim, t, l0, cfg.mc.bins)?;
                    rows.push(ResultRow::sampled(
                        id,
                        "tv_lower_bound",
                        lb.estimate,
                        lb.se,
                        r,
                        "mc-histogram-estimated-lower-bound-nonrigorous",
                        cfg.seed,
                    ));
                    rows.push(ResultRow::exact(id, "histogram_bins", lb.bins as f64, "freedman-diaconis"));
                    if lb.widened {
                        rows.push(ResultRow::exact(id, "histogram_widened", 1.0, "freedman-diaconis"));
                    }
                }
                Ok(rows.into_iter().map(|row| row.at_n(n).at_t(t)).collect())
            })?;
            if let Some(s) = min_of(&part.rows, "correlation_slack") {
                margin = margin.min(s);
            }
            report.absorb(part, cfg.record_walltime);
        }
    }
    report.check(id, Check::from_margin("correlation bound (simulated)", margin, "|omega-hat| <= bound + 3 SE"));
    Ok(report)
}
