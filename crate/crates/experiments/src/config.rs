//! Experiment configuration: a TOML file with sections, overridden by
//! command-line flags, resolved and validated into [`ExperimentConfig`].
//!
//! ```toml
//! [experiment]
//! id = "cutoff-sine"
//! seed = 7
//!
//! [profile]
//! kind = "sine"        # flat | sine | mixture | tabulated
//! rho = 0.5
//! amplitude = 0.2
//! mode = 1
//!
//! [grid]
//! n = [64, 256, 1024]
//! b = [-2, -1, 0, 1, 2]
//!
//! [methods]
//! tv = "auto"          # auto | enum | grid | mc
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use ssep_core::exact::MAX_CHAIN_SITES;
use ssep_core::heat::{LatticeSize, ProfileKind, ProfileSpec, SineTerm};
use ssep_core::product::{DEFAULT_GRID_BINS, ENUM_MAX_SITES};

use crate::error::{config, ExpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Cutoff,
    Entropy,
    Lemmas,
    Heat,
    Tv,
    Mc,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Cutoff => "cutoff",
            Experiment::Entropy => "entropy",
            Experiment::Lemmas => "lemmas",
            Experiment::Heat => "heat",
            Experiment::Tv => "tv",
            Experiment::Mc => "mc",
        }
    }

    fn default_ns(self) -> Vec<usize> {
        match self {
            Experiment::Cutoff => vec![8, 10, 12, 64, 256, 1024],
            Experiment::Entropy => vec![8],
            Experiment::Lemmas => vec![],
            Experiment::Heat => vec![64, 256],
            Experiment::Tv => vec![64, 256, 1024, 4096],
            Experiment::Mc => vec![64],
        }
    }

    fn default_ts(self) -> Vec<f64> {
        match self {
            Experiment::Entropy => (0..=28).map(|k| 0.1 + 0.05 * k as f64).collect(),
            Experiment::Heat => vec![0.0, 0.01, 0.05, 0.1, 0.2, 0.5],
            Experiment::Mc => vec![0.05, 0.1, 0.2],
            _ => vec![],
        }
    }
}

/// How product-measure total variation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TvMethod {
    /// Exact enumeration, then the grid convolution, then Monte Carlo, by size.
    #[default]
    Auto,
    Enum,
    Grid,
    Mc,
}

impl FromStr for TvMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(TvMethod::Auto),
            "enum" => Ok(TvMethod::Enum),
            "grid" => Ok(TvMethod::Grid),
            "mc" => Ok(TvMethod::Mc),
            other => Err(format!("unknown method `{other}` (expected auto, enum, grid or mc)")),
        }
    }
}

impl fmt::Display for TvMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TvMethod::Auto => "auto",
            TvMethod::Enum => "enum",
            TvMethod::Grid => "grid",
            TvMethod::Mc => "mc",
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    id: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSection {
    mode: usize,
    amplitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ProfileSection {
    kind: String,
    rho: f64,
    amplitude: f64,
    mode: usize,
    terms: Vec<TermSection>,
    nodes: Vec<f64>,
    eps0: Option<f64>,
    kappa: Option<f64>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            kind: "sine".into(),
            rho: 0.5,
            amplitude: 0.2,
            mode: 1,
            terms: Vec::new(),
            nodes: Vec::new(),
            eps0: None,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n: Option<Vec<usize>>,
    b: Option<Vec<f64>>,
    t: Option<Vec<f64>>,
}

/// Method selection and size thresholds.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Methods {
    pub tv: TvMethod,
    /// Largest `n - 1` for exact enumeration of product TV.
    pub enum_max_sites: usize,
    /// Largest `n - 1` for the exact chain.
    pub exact_max_sites: usize,
    /// Largest `n` for the grid convolution.
    pub grid_max_n: usize,
    pub grid_bins: usize,
    /// Required certified accuracy of the grid convolution, if any.
    pub grid_tol: Option<f64>,
    pub mc_samples: usize,
}

impl Default for Methods {
    fn default() -> Self {
        Self {
            tv: TvMethod::Auto,
            enum_max_sites: ENUM_MAX_SITES,
            exact_max_sites: 14,
            grid_max_n: 1 << 13,
            grid_bins: DEFAULT_GRID_BINS,
            grid_tol: None,
            mc_samples: 200_000,
        }
    }
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub replicas: usize,
    /// Also estimate the histogram lower bound on the distance.
    pub lower_bound: bool,
    /// Histogram bins for the lower bound; Freedman–Diaconis when absent.
    pub bins: Option<usize>,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { replicas: 10_000, lower_bound: true, bins: None }
    }
}

/// Entropy-trajectory settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropySettings {
    /// Finite-difference step for `dH/dt`.
    pub fd_step: f64,
    /// Largest tolerated mismatch between the two difference quotients.
    pub max_gap: f64,
    /// Slack allowed in Yau's inequality.
    pub yau_slack: f64,
    /// Only times at or after this enter the exponential fit.
    pub fit_from: f64,
}

impl Default for EntropySettings {
    fn default() -> Self {
        Self { fd_step: 5e-4, max_gap: 1e-5, yau_slack: 1e-6, fit_from: 0.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    profile: ProfileSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    methods: Methods,
    #[serde(default)]
    mc: McSettings,
    #[serde(default)]
    entropy: EntropySettings,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<Vec<usize>>,
    pub b: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub method: Option<TvMethod>,
    pub replicas: Option<usize>,
    pub record_walltime: bool,
}

/// A fully resolved and validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub id: String,
    pub profile: ProfileSpec,
    pub ns: Vec<usize>,
    pub bs: Vec<f64>,
    pub ts: Vec<f64>,
    pub seed: u64,
    pub methods: Methods,
    pub mc: McSettings,
    pub entropy: EntropySettings,
    pub out: PathBuf,
    /// Fill `walltime_ms`; off by default so that outputs are byte-stable.
    pub record_walltime: bool,
}

pub const DEFAULT_B_GRID: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
pub const DEFAULT_OUT: &str = "results";

impl ExperimentConfig {
    /// Defaults for `experiment` with no file and no overrides.
    pub fn defaults(experiment: Experiment) -> Result<Self> {
        Self::resolve(experiment, None, &Overrides::default())
    }

    /// Reads `path` (if any), applies `overrides` and validates.
    pub fn load(experiment: Experiment, path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let text = match path {
            Some(p) => Some((
                p,
                std::fs::read_to_string(p).map_err(|source| ExpError::Read { path: p.into(), source })?,
            )),
            None => None,
        };
        let file = match &text {
            Some((p, s)) => Some(
                toml::from_str::<ConfigFile>(s).map_err(|source| ExpError::Parse { path: (*p).into(), source })?,
            ),
            None => None,
        };
        Self::resolve(experiment, file, overrides)
    }

    /// Parses configuration text directly.
    pub fn from_toml(experiment: Experiment, text: &str, overrides: &Overrides) -> Result<Self> {
        let file = toml::from_str::<ConfigFile>(text)
            .map_err(|source| ExpError::Parse { path: "<inline>".into(), source })?;
        Self::resolve(experiment, Some(file), overrides)
    }

    fn resolve(experiment: Experiment, file: Option<ConfigFile>, ov: &Overrides) -> Result<Self> {
        let file = file.unwrap_or_default();
        let id = file.experiment.id.unwrap_or_else(|| experiment.name().to_string());
        let mut methods = file.methods;
        if let Some(m) = ov.method {
            methods.tv = m;
        }
        let mut mc = file.mc;
        if let Some(r) = ov.replicas {
            mc.replicas = r;
        }
        let cfg = Self {
            experiment,
            id,
            profile: build_profile(&file.profile)?,
            ns: ov.n.clone().or(file.grid.n).unwrap_or_else(|| experiment.default_ns()),
            bs: ov.b.clone().or(file.grid.b).unwrap_or_else(|| DEFAULT_B_GRID.to_vec()),
            ts: ov.t.clone().or(file.grid.t).unwrap_or_else(|| experiment.default_ts()),
            seed: ov.seed.or(file.experiment.seed).unwrap_or(0),
            methods,
            mc,
            entropy: file.entropy,
            out: ov.out.clone().or(file.experiment.out).unwrap_or_else(|| DEFAULT_OUT.into()),
            record_walltime: ov.record_walltime,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return config(format!("experiment id `{}` must be nonempty and use only [A-Za-z0-9_-]", self.id));
        }
        if let Some(b) = self.bs.iter().find(|b| !b.is_finite()) {
            return config(format!("b grid value {b} is not finite"));
        }
        if let Some(t) = self.ts.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return config(format!("time grid value {t} must be finite and nonnegative"));
        }
        for &n in &self.ns {
            LatticeSize::new(n).map_err(|e| ExpError::Config(e.to_string()))?;
            if n < 3 {
                return config(format!("n = {n}: the reservoirs need n >= 3"));
            }
        }
        let m = &self.methods;
        if m.exact_max_sites > MAX_CHAIN_SITES {
            return config(format!("exact_max_sites {} exceeds the cap {MAX_CHAIN_SITES}", m.exact_max_sites));
        }
        if m.enum_max_sites > ENUM_MAX_SITES {
            return config(format!("enum_max_sites {} exceeds the cap {ENUM_MAX_SITES}", m.enum_max_sites));
        }
        if m.grid_bins < 16 {
            return config("grid_bins must be at least 16");
        }
        if m.mc_samples == 0 {
            return config("mc_samples must be positive");
        }
        let product_tv = matches!(self.experiment, Experiment::Cutoff | Experiment::Tv);
        if product_tv {
            for &n in &self.ns {
                match m.tv {
                    TvMethod::Enum if n - 1 > m.enum_max_sites => {
                        return config(format!("n = {n} is beyond exact enumeration (n - 1 <= {})", m.enum_max_sites))
                    }
                    TvMethod::Grid if n > m.grid_max_n => {
                        return config(format!("n = {n} is beyond the grid method (n <= {})", m.grid_max_n))
                    }
                    _ => {}
                }
            }
            if self.bs.is_empty() {
                return config("the b grid is empty");
            }
        }
        match self.experiment {
            Experiment::Entropy => {
                for &n in &self.ns {
                    if n - 1 > m.exact_max_sites {
                        return config(format!(
                            "entropy runs need the exact chain: n = {n} exceeds n - 1 <= {}",
                            m.exact_max_sites
                        ));
                    }
                }
                let e = &self.entropy;
                if !(e.fd_step > 0.0 && e.max_gap > 0.0 && e.yau_slack >= 0.0) {
                    return config("fd_step and max_gap must be positive, yau_slack nonnegative");
                }
                if self.ts.windows(2).any(|w| w[1] - w[0] < 2.0 * e.fd_step) {
                    return config("entropy times must increase by at least twice fd_step");
                }
                if self.ts.first().is_some_and(|&t| t < e.fd_step) {
                    return config("the first entropy time must be at least fd_step");
                }
            }
            Experiment::Mc => {
                if self.mc.replicas < 2 {
                    return config("mc needs at least two replicas");
                }
                if self.ts.is_empty() {
                    return config("the time grid is empty");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn build_profile(p: &ProfileSection) -> Result<ProfileSpec> {
    let kind = match p.kind.as_str() {
        "flat" => ProfileKind::Flat,
        "sine" => ProfileKind::Sine { amplitude: p.amplitude, mode: p.mode },
        "mixture" => ProfileKind::SineMixture(
            p.terms.iter().map(|t| SineTerm { mode: t.mode, amplitude: t.amplitude }).collect(),
        ),
        "tabulated" => ProfileKind::Tabulated(p.nodes.clone()),
        other => return config(format!("unknown profile kind `{other}` (flat, sine, mixture, tabulated)")),
    };
    let spec = match (p.eps0, p.kappa) {
        (None, None) => ProfileSpec::with_fitted_class(kind, p.rho),
        (Some(eps0), Some(kappa)) => ProfileSpec::new(kind, p.rho, eps0, kappa),
        _ => return config("give both eps0 and kappa, or neither"),
    };
    spec.map_err(|e| ExpError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for e in [
            Experiment::Cutoff,
            Experiment::Entropy,
            Experiment::Lemmas,
            Experiment::Heat,
            Experiment::Tv,
            Experiment::Mc,
        ] {
            let cfg = ExperimentConfig::defaults(e).unwrap();
            assert_eq!(cfg.id, e.name());
            assert_eq!(cfg.bs, DEFAULT_B_GRID.to_vec());
        }
    }

    #[test]
    fn flags_override_file_values() {
        let text = "[experiment]\nseed = 3\nid = \"x\"\n[grid]\nn = [16]\n";
        let ov = Overrides { seed: Some(9), n: Some(vec![32]), ..Default::default() };
        let cfg = ExperimentConfig::from_toml(Experiment::Tv, text, &ov).unwrap();
        assert_eq!((cfg.seed, cfg.ns.clone(), cfg.id.as_str()), (9, vec![32], "x"));
        let cfg = ExperimentConfig::from_toml(Experiment::Tv, text, &Overrides::default()).unwrap();
        assert_eq!((cfg.seed, cfg.ns), (3, vec![16]));
    }

    #[test]
    fn profile_section_builds_each_kind() {
        let mix = "[profile]\nkind = \"mixture\"\nterms = [{ mode = 1, amplitude = 0.1 }, { mode = 3, amplitude = 0.05 }]\n";
        assert!(ExperimentConfig::from_toml(Experiment::Heat, mix, &Overrides::default()).is_ok());
        let tab = "[profile]\nkind = \"tabulated\"\nnodes = [0.5, 0.6, 0.5]\n";
        assert!(ExperimentConfig::from_toml(Experiment::Heat, tab, &Overrides::default()).is_ok());
        let flat = "[profile]\nkind = \"flat\"\nrho = 0.3\n";
        let cfg = ExperimentConfig::from_toml(Experiment::Heat, flat, &Overrides::default()).unwrap();
        assert_eq!(cfg.profile.rho(), 0.3);
    }

    #[test]
    fn class_violations_are_configuration_errors() {
        let text = "[profile]\nkind = \"sine\"\namplitude = 0.2\neps0 = 0.4\nkappa = 5.0\n";
        let err = ExperimentConfig::from_toml(Experiment::Lemmas, text, &Overrides::default()).unwrap_err();
        assert!(matches!(err, ExpError::Config(_)) && err.exit_code() == 2, "{err}");
        let text = "[profile]\nkind = \"sine\"\namplitude = 0.6\n";
        assert!(ExperimentConfig::from_toml(Experiment::Lemmas, text, &Overrides::default()).is_err());
    }

    #[test]
    fn inconsistent_grids_are_rejected() {
        let bad = |text: &str, e: Experiment| ExperimentConfig::from_toml(e, text, &Overrides::default()).is_err();
        assert!(bad("[grid]\nn = [2]\n", Experiment::Tv));
        assert!(bad("[grid]\nn = [40]\n[methods]\ntv = \"enum\"\n", Experiment::Tv));
        assert!(bad("[grid]\nn = [20000]\n[methods]\ntv = \"grid\"\n", Experiment::Tv));
        assert!(bad("[grid]\nn = [16]\n", Experiment::Entropy));
        assert!(bad("[grid]\nt = [0.1, 0.1005]\n", Experiment::Entropy));
        assert!(bad("[grid]\nt = [-1.0]\n", Experiment::Heat));
        assert!(bad("[experiment]\nid = \"a,b\"\n", Experiment::Heat));
        assert!(bad("[methods]\nunknown = 1\n", Experiment::Heat));
        assert!(bad("[profile]\nkind = \"triangle\"\n", Experiment::Heat));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [TvMethod::Auto, TvMethod::Enum, TvMethod::Grid, TvMethod::Mc] {
            assert_eq!(m.to_string().parse::<TvMethod>().unwrap(), m);
        }
        assert!("exact".parse::<TvMethod>().is_err());
    }
}
