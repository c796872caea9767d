use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use crate::ei::FeatureTarget;
use crate::error::{Error, Result};
use crate::testbed::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Study,
    Direct,
    Longrun,
    Derivplots,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Study => "study",
            Self::Direct => "direct",
            Self::Longrun => "longrun",
            Self::Derivplots => "derivplots",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "study" => Ok(Self::Study),
            "direct" => Ok(Self::Direct),
            "longrun" => Ok(Self::Longrun),
            "derivplots" => Ok(Self::Derivplots),
            _ => Err(Error::Config(format!("unknown experiment '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionName {
    Branin,
    Levy2,
    Levy4,
}

impl FunctionName {
    pub fn build(self) -> TestFunction {
        match self {
            Self::Branin => TestFunction::Branin,
            Self::Levy2 => TestFunction::Levy { dim: 2 },
            Self::Levy4 => TestFunction::Levy { dim: 4 },
        }
    }

    pub fn dim(self) -> usize {
        self.build().dim()
    }

    /// Output band counted as "near the contour" in the local/global study.
    pub fn default_band(self) -> (f64, f64) {
        match self {
            Self::Branin => (40.0, 50.0),
            Self::Levy2 => (60.0, 80.0),
            Self::Levy4 => (170.0, 190.0),
        }
    }
}

impl FromStr for FunctionName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "branin" => Ok(Self::Branin),
            "levy2" => Ok(Self::Levy2),
            "levy4" => Ok(Self::Levy4),
            _ => Err(Error::Config(format!("unknown function '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

/// Config as read from a file or flags; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub experiment: Option<ExperimentKind>,
    pub function: Option<FunctionName>,
    pub target: Option<String>,
    #[serde(default, deserialize_with = "de_n0")]
    pub n0: Option<Vec<usize>>,
    pub n_new: Option<usize>,
    pub replications: Option<usize>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub k_values: Option<Vec<usize>>,
    pub band: Option<(f64, f64)>,
    pub contour_resolution: Option<usize>,
    pub lhd_candidates: Option<usize>,
    pub threads: Option<usize>,
}

fn de_n0<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Vec<usize>>, D::Error> {
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(n) => vec![n],
        OneOrMany::Many(v) => v,
    }))
}

impl PartialConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: PartialConfig) -> PartialConfig {
        PartialConfig {
            experiment: other.experiment.or(self.experiment),
            function: other.function.or(self.function),
            target: other.target.or(self.target),
            n0: other.n0.or(self.n0),
            n_new: other.n_new.or(self.n_new),
            replications: other.replications.or(self.replications),
            budget: other.budget.or(self.budget),
            seed: other.seed.or(self.seed),
            output_dir: other.output_dir.or(self.output_dir),
            k_values: other.k_values.or(self.k_values),
            band: other.band.or(self.band),
            contour_resolution: other.contour_resolution.or(self.contour_resolution),
            lhd_candidates: other.lhd_candidates.or(self.lhd_candidates),
            threads: other.threads.or(self.threads),
        }
    }

    /// Fills defaults for `kind` and validates.
    pub fn resolve(self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(Error::Config(format!(
                    "config is for '{k}' but '{kind}' was requested"
                )));
            }
        }
        let function = self.function.unwrap_or(FunctionName::Branin);
        let d = function.dim();
        let target = match self.target {
            Some(t) => t.parse()?,
            None => FeatureTarget::MaxMin,
        };
        let (reps, n0, n_new) = match kind {
            ExperimentKind::Direct => (50, vec![10, 20, 30, 40], 0),
            ExperimentKind::Longrun => (
                10,
                vec![if d > 2 { 30 } else { 20 }],
                if d > 2 { 20 } else { 30 },
            ),
            ExperimentKind::Study => (20, vec![20], 30),
            ExperimentKind::Derivplots => (1, vec![20], 0),
        };
        let k_values = self.k_values.unwrap_or_else(|| vec![5, 10, 20, 30]);
        let n_new = self.n_new.unwrap_or_else(|| {
            if kind == ExperimentKind::Study {
                k_values.iter().copied().max().unwrap_or(n_new)
            } else {
                n_new
            }
        });
        let cfg = ExperimentConfig {
            experiment: kind,
            function,
            target,
            n0: self.n0.unwrap_or(n0),
            n_new,
            replications: self.replications.unwrap_or(reps),
            budget: self.budget.unwrap_or(if d <= 2 { 500 } else { 3000 }),
            seed: self.seed.unwrap_or(20_100_101),
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            k_values,
            band: self.band.unwrap_or_else(|| function.default_band()),
            contour_resolution: self
                .contour_resolution
                .unwrap_or(if d <= 2 { 201 } else { 21 }),
            lhd_candidates: self
                .lhd_candidates
                .unwrap_or(crate::seq::DEFAULT_LHD_CANDIDATES),
            threads: self.threads,
            inject_fit_failures: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub function: FunctionName,
    pub target: FeatureTarget,
    pub n0: Vec<usize>,
    pub n_new: usize,
    pub replications: usize,
    pub budget: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Checkpoints for the local/global study.
    pub k_values: Vec<usize>,
    /// Open output interval counted as local to the contour.
    pub band: (f64, f64),
    pub contour_resolution: usize,
    pub lhd_candidates: usize,
    pub threads: Option<usize>,
    /// Replication indices whose fit is treated as failed (testing hook).
    pub inject_fit_failures: Vec<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.function.dim();
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.n0.is_empty() {
            return Err(Error::Config(
                "n0 must name at least one design size".into(),
            ));
        }
        if let Some(n) = self.n0.iter().find(|&&n| n < d + 2) {
            return Err(Error::Config(format!(
                "n0 = {n} is below d + 2 = {}",
                d + 2
            )));
        }
        if self.band.0 >= self.band.1 {
            return Err(Error::Config("band must be an increasing interval".into()));
        }
        if self.lhd_candidates == 0 {
            return Err(Error::Config("lhd_candidates must be positive".into()));
        }
        self.target.validate()?;
        match self.experiment {
            ExperimentKind::Study if !self.target.is_contour() => {
                Err(Error::Config("the local/global study needs a contour target".into()))
            }
            ExperimentKind::Direct | ExperimentKind::Longrun
                if matches!(self.target, FeatureTarget::ContourFull { .. }) =>
            {
                Err(Error::Config(
                    "branch and bound needs the modified contour criterion (target 'contour:<level>')".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn sim(&self) -> TestFunction {
        self.function.build()
    }

    /// Seed of replication `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        crate::seq::derive_seed(self.seed, 0xe7, rep as u64)
    }
}
