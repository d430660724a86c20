//! Continuous-time simulation of the chain for large `n`.
//!
//! Every edge carries an exchange clock of rate `n^2` and each reservoir
//! site a clock of rate `n^2` that resamples the site from Bernoulli(`rho`).
//! A resampling clock changes an empty site with probability `rho` and an
//! occupied one with probability `1 - rho`, which are exactly the injection
//! and removal rates of the reservoirs. All `n` clocks have state-independent
//! rates, so the state at time `t` is obtained by drawing the Poisson number
//! of rings of their superposition and applying that many uniformly chosen
//! clocks in order; event times are not needed.
//!
//! Replica `r` draws from the ChaCha8 stream `r` of the master seed, and
//! replicas are reduced in fixed-size chunks in index order, so results do
//! not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{domain, Error, Result};
use crate::exact::{omega, Configuration, MAX_CHAIN_SITES};
use crate::heat::{eigenfunction, HeatSolution, LatticeSize, ProfileSpec};

/// Replicas folded sequentially before chunk results are merged.
const CHUNK: usize = 256;
/// Stream offset separating reference samples from chain replicas.
const REFERENCE_STREAM: u64 = 1 << 40;
/// Smallest expected count per histogram bin before bins are widened.
const MIN_PER_BIN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: LatticeSize,
    pub rho: f64,
    pub profile: ProfileSpec,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n: LatticeSize, profile: ProfileSpec, horizon: f64, replicas: usize, seed: u64) -> Result<Self> {
        if n.get() < 3 {
            return domain("simulation needs n >= 3 so that the two reservoir sites are distinct");
        }
        if replicas == 0 {
            return domain("replicas must be at least 1");
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return domain(format!("horizon {horizon} must be finite and nonnegative"));
        }
        Ok(Self { n, rho: profile.rho(), profile, horizon, replicas, seed })
    }

    /// Number of clocks: `n - 2` edges and two reservoir sites.
    pub fn slots(&self) -> usize {
        self.n.get()
    }

    /// Total ring rate `n^2 (n - 2) + 2 n^2`.
    pub fn total_rate(&self) -> f64 {
        let n = self.n.as_f64();
        n * n * n
    }
}

/// Generator for replica (or stream) `stream` of the master seed.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent Bernoulli(`u_0(x / n)`) occupations.
pub fn sample_initial<R: Rng + ?Sized>(profile: &ProfileSpec, n: LatticeSize, rng: &mut R) -> Configuration {
    let field = profile.sample(n);
    let bits: Vec<bool> = field.bulk().iter().map(|&p| rng.random::<f64>() < p).collect();
    Configuration::from_bits(&bits)
}

/// [`sample_initial`] from a seed, reproducible across runs.
pub fn sample_initial_seeded(profile: &ProfileSpec, n: LatticeSize, seed: u64) -> Configuration {
    sample_initial(profile, n, &mut replica_rng(seed, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub config: Configuration,
    pub events: u64,
}

/// Applies one ring of clock `slot`.
#[inline]
fn apply_slot<R: Rng + ?Sized>(eta: &mut Configuration, slot: usize, rho: f64, rng: &mut R) {
    let sites = eta.len();
    if slot + 1 < sites {
        eta.swap(slot + 1, slot + 2);
    } else {
        let x = if slot + 1 == sites { 1 } else { sites };
        eta.set(x, rng.random::<f64>() < rho);
    }
}

/// Exact sample of the state at time `t` started from `config0`.
pub fn simulate_to<R: Rng + ?Sized>(config0: &Configuration, cfg: &SimConfig, t: f64, rng: &mut R) -> Result<SimOutcome> {
    if !(t >= 0.0 && t <= cfg.horizon) {
        return domain(format!("time {t} outside [0, horizon = {}]", cfg.horizon));
    }
    if config0.len() != cfg.n.bulk_len() {
        return Err(Error::MismatchedSpaces(config0.len(), cfg.n.bulk_len()));
    }
    let mut eta = config0.clone();
    let lambda = cfg.total_rate() * t;
    if lambda == 0.0 {
        return Ok(SimOutcome { config: eta, events: 0 });
    }
    let events = Poisson::new(lambda)
        .map_err(|e| Error::Numerical { routine: "simulate_to", detail: e.to_string() })?
        .sample(rng) as u64;
    let slots = cfg.slots();
    for _ in 0..events {
        let slot = rng.random_range(0..slots);
        apply_slot(&mut eta, slot, cfg.rho, rng);
    }
    Ok(SimOutcome { config: eta, events })
}

/// Runs every replica from its own initial draw and folds the outcomes in
/// replica order within chunks, merging chunks in order.
fn fold_replicas<A, I, F, M>(cfg: &SimConfig, t: f64, init: I, fold: F, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &SimOutcome) + Sync,
    M: Fn(&mut A, A),
{
    let chunks: Vec<Result<A>> = (0..cfg.replicas.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for r in c * CHUNK..((c + 1) * CHUNK).min(cfg.replicas) {
                let mut rng = replica_rng(cfg.seed, r as u64);
                let start = sample_initial(&cfg.profile, cfg.n, &mut rng);
                let out = simulate_to(&start, cfg, t, &mut rng)?;
                fold(&mut acc, &out);
            }
            Ok(acc)
        })
        .collect();
    let mut iter = chunks.into_iter();
    let mut total = iter.next().expect("at least one replica")?;
    for chunk in iter {
        merge(&mut total, chunk?);
    }
    Ok(total)
}

/// Per-site and per-edge sample statistics at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationStats {
    pub t: f64,
    pub replicas: usize,
    /// Sample mean of `eta_t(x)`, `x = 1, ..., n-1`.
    pub mean: Vec<f64>,
    /// Sample variance of `eta_t(x)`.
    pub variance: Vec<f64>,
    /// Sample mean of `omega_x omega_{x+1}`, `x = 1, ..., n-2`, with `omega`
    /// taken against the heat solution at time `t`.
    pub omega_mean: Vec<f64>,
    pub omega_se: Vec<f64>,
}

impl OccupationStats {
    /// Standard error of the site means.
    pub fn mean_se(&self) -> Vec<f64> {
        let r = self.replicas as f64;
        self.variance.iter().map(|v| (v / r).sqrt()).collect()
    }
}

#[derive(Clone)]
struct OccAcc {
    count: Vec<u64>,
    omega: Vec<f64>,
    omega2: Vec<f64>,
}

pub fn estimate_occupation(cfg: &SimConfig, t: f64) -> Result<OccupationStats> {
    if cfg.replicas < 2 {
        return domain("occupation statistics need at least two replicas");
    }
    let u = HeatSolution::from_profile(&cfg.profile, cfg.n).solve_heat_at(t)?;
    let u = u.bulk().to_vec();
    let m = u.len();
    let acc = fold_replicas(
        cfg,
        t,
        || OccAcc { count: vec![0; m], omega: vec![0.0; m - 1], omega2: vec![0.0; m - 1] },
        |acc, out| {
            let eta = &out.config;
            let mut prev = omega(u[0], eta.get(1));
            if eta.get(1) {
                acc.count[0] += 1;
            }
            for x in 2..=m {
                let occ = eta.get(x);
                if occ {
                    acc.count[x - 1] += 1;
                }
                let cur = omega(u[x - 1], occ);
                let prod = prev * cur;
                acc.omega[x - 2] += prod;
                acc.omega2[x - 2] += prod * prod;
                prev = cur;
            }
        },
        |total, part| {
            for (a, b) in total.count.iter_mut().zip(part.count) {
                *a += b;
            }
            for (a, b) in total.omega.iter_mut().zip(part.omega) {
                *a += b;
            }
            for (a, b) in total.omega2.iter_mut().zip(part.omega2) {
                *a += b;
            }
        },
    )?;
    let r = cfg.replicas as f64;
    let mean: Vec<f64> = acc.count.iter().map(|&c| c as f64 / r).collect();
    let variance = mean.iter().map(|p| p * (1.0 - p) * r / (r - 1.0)).collect();
    let omega_mean: Vec<f64> = acc.omega.iter().map(|s| s / r).collect();
    let omega_se = acc
        .omega2
        .iter()
        .zip(&omega_mean)
        .map(|(s2, mu)| ((s2 / r - mu * mu).max(0.0) * r / (r - 1.0) / r).sqrt())
        .collect();
    Ok(OccupationStats { t, replicas: cfg.replicas, mean, variance, omega_mean, omega_se })
}

/// Counts of final states over all replicas, indexed by bit pattern.
pub fn state_histogram(cfg: &SimConfig, t: f64) -> Result<Vec<u64>> {
    let sites = cfg.n.bulk_len();
    if sites > MAX_CHAIN_SITES {
        return Err(Error::TooLarge { sites, cap: MAX_CHAIN_SITES, hint: "histograms need an enumerable state space" });
    }
    let size = 1usize << sites;
    fold_replicas(
        cfg,
        t,
        || vec![0u64; size],
        |acc, out| acc[out.config.index().expect("small configuration")] += 1,
        |total, part| {
            for (a, b) in total.iter_mut().zip(part) {
                *a += b;
            }
        },
    )
}

/// Sample mean and variance of the number of clock rings per replica.
pub fn event_count_stats(cfg: &SimConfig, t: f64) -> Result<(f64, f64)> {
    let (s, s2) = fold_replicas(
        cfg,
        t,
        || (0.0f64, 0.0f64),
        |acc, out| {
            let e = out.events as f64;
            acc.0 += e;
            acc.1 += e * e;
        },
        |total, part| {
            total.0 += part.0;
            total.1 += part.1;
        },
    )?;
    let r = cfg.replicas as f64;
    let mean = s / r;
    Ok((mean, (s2 / r - mean * mean).max(0.0)))
}

/// Rate matrix implied by the clock description: for each state, each
/// clock rings at rate `n^2` and the ring is resolved into its outcomes
/// with their probabilities.
pub fn resampling_rate_matrix(n: LatticeSize, rho: f64) -> Result<Vec<Vec<f64>>> {
    let sites = n.bulk_len();
    if sites < 2 || sites > 10 {
        return domain("rate matrices are written out for 3 <= n <= 11");
    }
    let size = 1usize << sites;
    let ring = n.as_f64() * n.as_f64();
    let mut q = vec![vec![0.0; size]; size];
    for s in 0..size {
        // exchange clocks: a deterministic outcome
        for i in 0..sites - 1 {
            let bits = (s >> i) & 0b11;
            let target = if bits == 0b01 || bits == 0b10 { s ^ (0b11 << i) } else { s };
            q[s][target] += ring;
        }
        // reservoir clocks: the site becomes 1 with probability rho, else 0
        for i in [0, sites - 1] {
            q[s][s | (1 << i)] += ring * rho;
            q[s][s & !(1 << i)] += ring * (1.0 - rho);
        }
        // self-loops do not change the state and carry no rate
        q[s][s] = 0.0;
        let out: f64 = q[s].iter().sum();
        q[s][s] = -out;
    }
    Ok(q)
}

/// Histogram distance between the laws of
/// `S = n^{-1/2} sum_x phi_{l0}(x) (eta(x) - rho)` under the chain at time
/// `t` and under `nu_rho`, with a per-bin noise correction.
///
/// This is an estimated lower bound on `D_n(t)` (data processing), not a
/// rigorous one.
#[derive(Debug, Clone, PartialEq)]
pub struct TvLowerBound {
    pub estimate: f64,
    pub se: f64,
    pub bins: usize,
    /// Bins were widened because too few samples fell into each.
    pub widened: bool,
    pub label: &'static str,
}

pub const LOWER_BOUND_LABEL: &str = "estimated lower bound (non-rigorous)";

fn statistic(eta: &Configuration, weights: &[f64], rho: f64) -> f64 {
    weights.iter().enumerate().map(|(i, w)| w * (if eta.get(i + 1) { 1.0 } else { 0.0 } - rho)).sum()
}

pub fn tv_lower_bound_statistic(cfg: &SimConfig, t: f64, ell0: usize, bins: Option<usize>) -> Result<TvLowerBound> {
    if cfg.replicas < 1000 {
        return domain("the lower-bound statistic needs at least 1000 replicas");
    }
    let n = cfg.n;
    let scale = 1.0 / n.as_f64().sqrt();
    let weights: Vec<f64> = (1..n.get())
        .map(|x| eigenfunction(n, ell0, x).map(|v| v * scale))
        .collect::<Result<_>>()?;
    let rho = cfg.rho;
    let chain: Vec<f64> = fold_replicas(
        cfg,
        t,
        Vec::new,
        |acc: &mut Vec<f64>, out| acc.push(statistic(&out.config, &weights, rho)),
        |total, part| total.extend(part),
    )?;
    let reference: Vec<f64> = (0..cfg.replicas.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(cfg.replicas))
                .map(|r| {
                    let mut rng = replica_rng(cfg.seed, REFERENCE_STREAM + r as u64);
                    let bits: Vec<bool> = (0..n.bulk_len()).map(|_| rng.random::<f64>() < rho).collect();
                    statistic(&Configuration::from_bits(&bits), &weights, rho)
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();

    let count = cfg.replicas as f64;
    let lo = chain.iter().chain(&reference).copied().fold(f64::INFINITY, f64::min);
    let hi = chain.iter().chain(&reference).copied().fold(f64::NEG_INFINITY, f64::max);
    let mut k = match bins {
        Some(b) => b.max(1),
        None => {
            let mut sorted = reference.clone();
            sorted.sort_by(f64::total_cmp);
            let q = |p: f64| sorted[((p * (sorted.len() - 1) as f64).round()) as usize];
            let iqr = q(0.75) - q(0.25);
            let width = 2.0 * iqr / count.cbrt();
            if width > 0.0 {
                ((hi - lo) / width).ceil().max(1.0) as usize
            } else {
                1
            }
        }
    };
    let mut widened = false;
    let cap = ((count / MIN_PER_BIN).floor() as usize).max(1);
    if k > cap {
        k = cap;
        widened = true;
    }
    let width = if hi > lo { (hi - lo) / k as f64 } else { 1.0 };
    let bin = |v: f64| (((v - lo) / width) as usize).min(k - 1);
    let mut p = vec![0.0; k];
    let mut q = vec![0.0; k];
    for &v in &chain {
        p[bin(v)] += 1.0 / count;
    }
    for &v in &reference {
        q[bin(v)] += 1.0 / count;
    }
    let mut estimate = 0.0;
    let mut var = 0.0;
    for (pb, qb) in p.iter().zip(&q) {
        let d = pb - qb;
        let sigma2 = (pb * (1.0 - pb) + qb * (1.0 - qb)) / count;
        let sigma = sigma2.sqrt();
        // E|Z| for Z ~ N(0, sigma^2) removes the noise floor of the bin
        estimate += 0.5 * (d.abs() - sigma * (2.0 / std::f64::consts::PI).sqrt());
        if sigma > 0.0 {
            let z = d / sigma;
            let mean_abs = sigma * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp()
                + d * (1.0 - erfc(z / std::f64::consts::SQRT_2));
            var += 0.25 * (d * d + sigma2 - mean_abs * mean_abs).max(0.0);
        }
    }
    Ok(TvLowerBound { estimate, se: var.sqrt(), bins: k, widened, label: LOWER_BOUND_LABEL })
}
