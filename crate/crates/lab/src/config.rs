//! Experiment configuration, read from a single TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use fpp_core::deviations::{MuStatistic, TailSampling, TailSide};
use fpp_core::{DistributionSpec, LatticePoint};

use crate::LabError;

/// Statistical acceptance knobs. The defaults are the values used by the
/// acceptance suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Confidence level of the intervals the harness computes itself.
    pub level: f64,
    /// Largest tolerated fraction of censored (not window-exact) results
    /// before `--strict` fails the run.
    pub censor_limit: f64,
    /// Increment-ratio threshold of the partial-sum trend test.
    pub trend_ratio: f64,
    /// Smallest acceptable R² of log-linear fits.
    pub min_r2: f64,
    /// Expected log-log slope of an upper tail, with its tolerance.
    pub slope_target: Option<f64>,
    pub slope_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            level: 0.95,
            censor_limit: 0.05,
            trend_ratio: 0.9,
            min_r2: 0.9,
            slope_target: None,
            slope_tolerance: 0.5,
        }
    }
}

/// How the reference time constant is estimated: on the canonical fan of ℓ1
/// norm `fan_norm`, at scale `n`, with its own seed so that runs differing
/// only in `master_seed` share it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuReference {
    pub fan_norm: i64,
    pub n: u64,
    pub replicas: u64,
    pub seed: u64,
    pub statistic: MuStatistic,
}

impl Default for MuReference {
    fn default() -> Self {
        MuReference {
            fan_norm: 4,
            n: 20,
            replicas: 200,
            seed: 7,
            statistic: MuStatistic::Mean,
        }
    }
}

fn default_delta() -> f64 {
    0.02
}

fn default_spacing() -> i32 {
    20
}

fn default_pairs() -> usize {
    15
}

fn default_fit_k() -> [i64; 2] {
    [4, 30]
}

fn default_tbar_quantile() -> f64 {
    0.9
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// T(0, n·z)/n over `n_grid`.
    Mu {
        z: Vec<i32>,
        n_grid: Vec<u64>,
        #[serde(default)]
        statistic: MuStatistic,
    },
    Tails {
        side: TailSide,
        z: Vec<i32>,
        eps: f64,
        /// Multiply `eps` by the upper fan value μ̄.
        #[serde(default)]
        eps_relative: bool,
        x_grid: Vec<f64>,
        #[serde(default)]
        sampling: TailSampling,
        #[serde(default)]
        mu: MuReference,
    },
    /// Shells on a grid of centers spaced `spacing` apart, within ℓ∞ distance
    /// `centers_radius` of the origin.
    Shells {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_spacing")]
        spacing: i32,
        centers_radius: Option<i32>,
        /// Consecutive complete shells compared through the travel-time
        /// inequality, per replica.
        #[serde(default = "default_pairs")]
        pairs: usize,
        /// Range of k for the log-survival fit of diam(S_z).
        #[serde(default = "default_fit_k")]
        fit_k: [i64; 2],
    },
    Regen {
        z: Vec<i32>,
        r: f64,
        #[serde(default = "default_tbar_quantile")]
        tbar_quantile: f64,
        m_max: u64,
    },
    DeviationSets {
        eps: f64,
        #[serde(default)]
        eps_relative: bool,
        radii: Vec<i32>,
        #[serde(default)]
        mu: MuReference,
    },
    HreSum {
        #[serde(default = "default_alpha")]
        alpha: f64,
        eps: f64,
        #[serde(default)]
        eps_relative: bool,
        radii: Vec<u64>,
        #[serde(default)]
        mu: MuReference,
    },
    RadialSum {
        z: Vec<i32>,
        #[serde(default = "default_alpha")]
        alpha: f64,
        eps: f64,
        #[serde(default)]
        eps_relative: bool,
        checkpoints: Vec<u64>,
        #[serde(default)]
        mu: MuReference,
    },
    Lp {
        p: f64,
        z_grid: Vec<Vec<i32>>,
        #[serde(default)]
        mu: MuReference,
    },
    PointToShape {
        n_grid: Vec<u64>,
        #[serde(default)]
        mu: MuReference,
    },
    TubeSweep {
        z: Vec<i32>,
        radii: Vec<f64>,
        n: u64,
    },
    YRecords {
        beta: f64,
        eps: f64,
        #[serde(default)]
        eps_relative: bool,
        #[serde(default)]
        mu: MuReference,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Mu { .. } => "mu",
            Experiment::Tails { .. } => "tails",
            Experiment::Shells { .. } => "shells",
            Experiment::Regen { .. } => "regen",
            Experiment::DeviationSets { .. } => "deviation-sets",
            Experiment::HreSum { .. } => "hre-sum",
            Experiment::RadialSum { .. } => "radial-sum",
            Experiment::Lp { .. } => "lp",
            Experiment::PointToShape { .. } => "point-to-shape",
            Experiment::TubeSweep { .. } => "tube-sweep",
            Experiment::YRecords { .. } => "y-records",
        }
    }

    pub fn mu_reference(&self) -> Option<&MuReference> {
        match self {
            Experiment::Tails { mu, .. }
            | Experiment::DeviationSets { mu, .. }
            | Experiment::HreSum { mu, .. }
            | Experiment::RadialSum { mu, .. }
            | Experiment::Lp { mu, .. }
            | Experiment::PointToShape { mu, .. }
            | Experiment::YRecords { mu, .. } => Some(mu),
            _ => None,
        }
    }
}

fn default_window_radius() -> i32 {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub distribution: DistributionSpec,
    /// TOML integers are signed, so seeds are limited to 63 bits.
    pub master_seed: u64,
    pub replicas: u64,
    /// Half-width of the simulation window for shells, deviation sets and
    /// Y records. Path experiments size their own windows.
    #[serde(default = "default_window_radius")]
    pub window_radius: i32,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub experiment: Experiment,
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, LabError> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    /// The same config with another master seed.
    pub fn with_seed(&self, master_seed: u64) -> Self {
        ExperimentConfig {
            master_seed,
            ..self.clone()
        }
    }

    pub fn point(&self, coords: &[i32]) -> Result<LatticePoint, LabError> {
        if coords.len() != self.dimension {
            return Err(bad(format!("point {coords:?} does not have dimension {}", self.dimension)));
        }
        LatticePoint::try_new(coords).map_err(|e| bad(e.to_string()))
    }

    fn nonzero_point(&self, coords: &[i32]) -> Result<LatticePoint, LabError> {
        let p = self.point(coords)?;
        if p.is_origin() {
            return Err(bad("z must be nonzero"));
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if !(2..=4).contains(&self.dimension) {
            return Err(bad(format!("dimension {} is not supported (2, 3 or 4)", self.dimension)));
        }
        self.distribution.validate().map_err(|e| bad(e.to_string()))?;
        if self.master_seed > i64::MAX as u64 {
            return Err(bad("master_seed must fit in 63 bits"));
        }
        if self.replicas == 0 {
            return Err(bad("replicas must be positive"));
        }
        if self.window_radius < 2 {
            return Err(bad("window_radius must be at least 2"));
        }
        let t = &self.thresholds;
        if !(t.level > 0.0 && t.level < 1.0) {
            return Err(bad("thresholds.level must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&t.censor_limit) {
            return Err(bad("thresholds.censor_limit must lie in [0, 1]"));
        }
        if !(t.trend_ratio > 0.0) || !(t.slope_tolerance >= 0.0) {
            return Err(bad("thresholds.trend_ratio and slope_tolerance must be positive"));
        }
        if let Some(mu) = self.experiment.mu_reference() {
            if mu.fan_norm < 1 || mu.n == 0 || mu.replicas < 2 || mu.seed > i64::MAX as u64 {
                return Err(bad("mu: fan_norm and n must be positive, replicas at least 2, seed 63-bit"));
            }
        }
        // exact laws skip simulation
        let simulated = !matches!(self.distribution, DistributionSpec::Deterministic { .. });
        let estimator = matches!(
            self.experiment,
            Experiment::Mu { .. } | Experiment::Tails { .. } | Experiment::HreSum { .. } | Experiment::RadialSum { .. } | Experiment::Lp { .. }
        );
        let min = fpp_core::deviations::MIN_REPLICAS as u64;
        if simulated && estimator && self.replicas < min {
            return Err(bad(format!("{} needs at least {min} replicas", self.experiment.name())));
        }
        if simulated && self.experiment.mu_reference().is_some_and(|mu| mu.replicas < min) {
            return Err(bad(format!("mu.replicas must be at least {min}")));
        }
        let increasing = |v: &[u64]| !v.is_empty() && v[0] > 0 && v.windows(2).all(|w| w[0] < w[1]);
        let positive_eps = |eps: f64| {
            if eps > 0.0 && eps.is_finite() {
                Ok(())
            } else {
                Err(bad("eps must be positive"))
            }
        };
        match &self.experiment {
            Experiment::Mu { z, n_grid, .. } => {
                self.nonzero_point(z)?;
                if !increasing(n_grid) {
                    return Err(bad("n_grid must be increasing positive integers"));
                }
            }
            Experiment::Tails {
                z,
                eps,
                x_grid,
                sampling,
                ..
            } => {
                let z = self.nonzero_point(z)?;
                positive_eps(*eps)?;
                if x_grid.is_empty() || x_grid.iter().any(|&x| !(x >= z.l1() as f64 && x.is_finite())) {
                    return Err(bad("x_grid must be nonempty with every x at least ‖z‖"));
                }
                if let TailSampling::EndpointMixture { scales } = sampling {
                    if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) {
                        return Err(bad("mixture scales must be positive"));
                    }
                }
            }
            Experiment::Shells {
                delta,
                spacing,
                centers_radius,
                fit_k,
                ..
            } => {
                if self.dimension != 2 {
                    return Err(bad("shells are implemented for d = 2"));
                }
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(bad("delta must lie in (0, 1)"));
                }
                if *spacing < 1 {
                    return Err(bad("spacing must be positive"));
                }
                if centers_radius.is_some_and(|c| c < 0 || c >= self.window_radius) {
                    return Err(bad("centers_radius must lie inside the window"));
                }
                if fit_k[0] < 0 || fit_k[0] >= fit_k[1] {
                    return Err(bad("fit_k must be an increasing pair"));
                }
            }
            Experiment::Regen {
                z, r, tbar_quantile, m_max,
            } => {
                let z = self.nonzero_point(z)?;
                if z.coords().iter().any(|&c| c < 0) {
                    return Err(bad("regeneration direction must have nonnegative coordinates"));
                }
                if !(*r >= 0.0 && r.is_finite()) || *m_max == 0 {
                    return Err(bad("r must be nonnegative and m_max positive"));
                }
                if !(*tbar_quantile > 0.0 && *tbar_quantile < 1.0) {
                    return Err(bad("tbar_quantile must lie in (0, 1)"));
                }
                if (self.replicas as usize) < fpp_core::regen::MIN_TRACES {
                    return Err(bad(format!("regen needs at least {} replicas", fpp_core::regen::MIN_TRACES)));
                }
            }
            Experiment::DeviationSets { eps, radii, .. } => {
                positive_eps(*eps)?;
                let ok = !radii.is_empty()
                    && radii[0] >= 1
                    && radii.windows(2).all(|w| w[0] < w[1])
                    && *radii.last().unwrap() <= self.window_radius;
                if !ok {
                    return Err(bad("radii must be increasing, positive and within the window"));
                }
            }
            Experiment::HreSum { alpha, eps, radii, .. } => {
                positive_eps(*eps)?;
                if !(*alpha > 0.0) || !increasing(radii) {
                    return Err(bad("alpha must be positive and radii increasing"));
                }
            }
            Experiment::RadialSum {
                z,
                alpha,
                eps,
                checkpoints,
                ..
            } => {
                self.nonzero_point(z)?;
                positive_eps(*eps)?;
                if !(*alpha > 0.0) || !increasing(checkpoints) {
                    return Err(bad("alpha must be positive and checkpoints increasing"));
                }
            }
            Experiment::Lp { p, z_grid, .. } => {
                if !(*p > 0.0 && p.is_finite()) || z_grid.is_empty() {
                    return Err(bad("p must be positive and z_grid nonempty"));
                }
                for z in z_grid {
                    self.nonzero_point(z)?;
                }
            }
            Experiment::PointToShape { n_grid, .. } => {
                if !increasing(n_grid) {
                    return Err(bad("n_grid must be increasing positive integers"));
                }
            }
            Experiment::TubeSweep { z, radii, n } => {
                let z = self.nonzero_point(z)?;
                if z.coords().iter().any(|&c| c < 0) {
                    return Err(bad("tube direction must have nonnegative coordinates"));
                }
                let ok = !radii.is_empty()
                    && radii.iter().all(|r| *r >= 0.0 && r.is_finite())
                    && radii.windows(2).all(|w| w[0] < w[1]);
                if !ok || *n == 0 {
                    return Err(bad("radii must be increasing and nonnegative, n positive"));
                }
                if (self.replicas as usize) < fpp_core::regen::MIN_TRACES {
                    return Err(bad(format!("tube-sweep needs at least {} replicas", fpp_core::regen::MIN_TRACES)));
                }
            }
            Experiment::YRecords { beta, eps, .. } => {
                positive_eps(*eps)?;
                if !(*beta > 0.0) {
                    return Err(bad("beta must be positive"));
                }
            }
        }
        Ok(())
    }
}
