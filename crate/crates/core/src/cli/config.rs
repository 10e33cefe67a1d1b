//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conditional::{ClampSpec, Grid1D, InterpScheme};
use crate::kernel::MAX_STATES;
use crate::norm::Norm;
use crate::sampler::{default_burn_in, ChainConfig};
use crate::target::{
    beta_mixture_2d, exp_decay_model, linear_model, load_series_csv, residual_posterior, truncate, BoxDomain,
    StandardGaussian, TargetDensity, TruncationSpec,
};

use super::CliError;

pub const TARGET_NAMES: [&str; 4] = ["beta_mixture", "residual_linear", "residual_exp", "gaussian"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    /// One of [`TARGET_NAMES`].
    pub name: String,
    /// Two-column CSV `time,value` for the residual targets.
    pub data: Option<PathBuf>,
    /// Box for the residual targets.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Half-width and dimension for the truncated Gaussian.
    pub t: Option<f64>,
    pub dim: Option<usize>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            name: "beta_mixture".into(),
            data: None,
            lower: None,
            upper: None,
            t: None,
            dim: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Gibbs,
    Griddy,
    Metropolized,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Gibbs => "gibbs",
            SamplerKind::Griddy => "griddy",
            SamplerKind::Metropolized => "metropolized",
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gibbs" => Ok(SamplerKind::Gibbs),
            "griddy" => Ok(SamplerKind::Griddy),
            "metropolized" => Ok(SamplerKind::Metropolized),
            other => Err(format!(
                "unknown sampler `{other}` (expected gibbs, griddy or metropolized)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Knots per axis.
    pub n: usize,
    /// `pc`, `pl` or `poly:k`.
    pub scheme: String,
    pub clamp: bool,
    pub eps_rel: f64,
    pub m_rel: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Griddy,
            n: 11,
            scheme: "pl".into(),
            clamp: true,
            eps_rel: 1e-8,
            m_rel: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub n_steps: usize,
    /// Defaults to 10% of `n_steps`.
    pub burn_in: Option<usize>,
    pub seed: u64,
    /// Defaults to the domain center.
    pub initial_point: Option<Vec<f64>>,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            n_steps: 1000,
            burn_in: None,
            seed: 1,
            initial_point: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    /// Knot counts for `grid-study` and `kernel-verify`.
    pub ns: Vec<usize>,
    /// Cells per axis for `kernel-verify`.
    pub states: usize,
    /// Norm indices for `kernel-verify`.
    pub p: Vec<Norm>,
    pub replicates: usize,
    /// Samplers compared by `acf`; empty means `sampler.kind`.
    pub samplers: Vec<SamplerKind>,
    pub max_lag: usize,
    pub coordinate: usize,
    /// Chains per sampler for `acf` (seeds `seed, seed+1, ..`).
    pub chains: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            ns: vec![6, 11, 21, 41, 81],
            states: 16,
            p: vec![Norm::L2, Norm::P(4.0), Norm::Inf],
            replicates: 1,
            samplers: Vec::new(),
            max_lag: 50,
            coordinate: 0,
            chains: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("griddy-out"),
        }
    }
}

/// Full experiment description. Every section is optional in the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub target: TargetConfig,
    pub sampler: SamplerConfig,
    pub chain: ChainSection,
    pub study: StudyConfig,
    /// Tail constants for the truncation bound in `kernel-verify`.
    pub truncation: Option<TruncationSpec>,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn scheme(&self) -> Result<InterpScheme, CliError> {
        self.sampler
            .scheme
            .parse()
            .map_err(|e| CliError::Validation(format!("sampler.scheme: {e}")))
    }

    pub fn clamp(&self) -> Result<ClampSpec, CliError> {
        if !self.sampler.clamp {
            return Ok(ClampSpec::Disabled);
        }
        ClampSpec::relative(self.sampler.eps_rel, self.sampler.m_rel)
            .map_err(|e| CliError::Validation(format!("sampler.eps_rel / sampler.m_rel: {e}")))
    }

    /// Checks every field that does not need the target or the file system.
    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |field: &str, msg: String| Err(CliError::Validation(format!("{field}: {msg}")));
        if !TARGET_NAMES.contains(&self.target.name.as_str()) {
            return invalid(
                "target.name",
                format!(
                    "unknown target `{}` (expected one of {})",
                    self.target.name,
                    TARGET_NAMES.join(", ")
                ),
            );
        }
        if self.sampler.n < 2 {
            return invalid("sampler.n", format!("need at least 2 knots, got {}", self.sampler.n));
        }
        let scheme = self.scheme()?;
        scheme
            .validate(self.sampler.n)
            .map_err(|e| CliError::Validation(format!("sampler.scheme: {e}")))?;
        self.clamp()?;
        if self.chain.n_steps == 0 {
            return invalid("chain.n_steps", "must be positive".into());
        }
        if let Some(b) = self.chain.burn_in {
            if b >= self.chain.n_steps {
                return invalid(
                    "chain.burn_in",
                    format!("{b} must be below chain.n_steps {}", self.chain.n_steps),
                );
            }
        }
        if self.study.ns.is_empty() {
            return invalid("study.ns", "must list at least one knot count".into());
        }
        if let Some(&n) = self.study.ns.iter().find(|&&n| n < 2) {
            return invalid("study.ns", format!("knot count {n} below 2"));
        }
        for &n in &self.study.ns {
            scheme
                .validate(n)
                .map_err(|e| CliError::Validation(format!("study.ns: {e}")))?;
        }
        if self.study.states == 0 {
            return invalid("study.states", "must be positive".into());
        }
        if self.study.replicates == 0 {
            return invalid("study.replicates", "must be positive".into());
        }
        if self.study.chains == 0 {
            return invalid("study.chains", "must be positive".into());
        }
        if let Some(spec) = &self.truncation {
            spec.validate()
                .map_err(|e| CliError::Validation(format!("truncation: {e}")))?;
        }
        Ok(())
    }

    /// Instantiates the named target.
    pub fn build_target(&self) -> Result<Box<dyn TargetDensity>, CliError> {
        let t = &self.target;
        match t.name.as_str() {
            "beta_mixture" => Ok(Box::new(beta_mixture_2d())),
            "residual_linear" | "residual_exp" => {
                let data = t
                    .data
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("target.data: required for residual targets".into()))?;
                let (lower, upper) = match (&t.lower, &t.upper) {
                    (Some(l), Some(u)) => (l.clone(), u.clone()),
                    _ => {
                        return Err(CliError::Validation(
                            "target.lower / target.upper: required for residual targets".into(),
                        ))
                    }
                };
                if lower.len() != 2 {
                    return Err(CliError::Validation(
                        "target.lower: residual models have 2 parameters".into(),
                    ));
                }
                let domain = BoxDomain::new(lower, upper)
                    .map_err(|e| CliError::Validation(format!("target.lower / target.upper: {e}")))?;
                let series = load_series_csv(data).map_err(|e| CliError::Runtime(e.into()))?;
                let model = if t.name == "residual_linear" {
                    linear_model()
                } else {
                    exp_decay_model()
                };
                Ok(Box::new(
                    residual_posterior(model, series, domain).map_err(|e| CliError::Runtime(e.into()))?,
                ))
            }
            "gaussian" => {
                let dim = t.dim.unwrap_or(2);
                if dim == 0 {
                    return Err(CliError::Validation("target.dim: must be positive".into()));
                }
                let spec = TruncationSpec::new(t.t.unwrap_or(5.0));
                truncate(StandardGaussian { dim }, spec)
                    .map(|g| Box::new(g) as Box<dyn TargetDensity>)
                    .map_err(|e| CliError::Validation(format!("target.t: {e}")))
            }
            other => Err(CliError::Validation(format!("target.name: unknown target `{other}`"))),
        }
    }

    /// Chain config against a built target.
    pub fn chain_config(&self, target: &dyn TargetDensity) -> Result<ChainConfig, CliError> {
        let initial = self
            .chain
            .initial_point
            .clone()
            .unwrap_or_else(|| target.domain().center());
        if initial.len() != target.dim() || !target.domain().contains(&initial) {
            return Err(CliError::Validation(format!(
                "chain.initial_point: {initial:?} is not a point of the target domain"
            )));
        }
        Ok(ChainConfig {
            n_steps: self.chain.n_steps,
            burn_in: self
                .chain
                .burn_in
                .unwrap_or_else(|| default_burn_in(self.chain.n_steps)),
            seed: self.chain.seed,
            initial_point: initial,
        })
    }

    /// `n` equally spaced knots spanning each axis of the target.
    pub fn grids(&self, target: &dyn TargetDensity, n: usize) -> Result<Vec<Grid1D>, CliError> {
        let d = target.domain();
        (0..target.dim())
            .map(|i| Grid1D::uniform(d.lower()[i], d.upper()[i], n))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Validation(format!("sampler.n: {e}")))
    }

    /// Cell counts for the kernel lab, checked against the state cap.
    pub fn state_counts(&self, target: &dyn TargetDensity) -> Result<Vec<usize>, CliError> {
        let counts = vec![self.study.states; target.dim()];
        let total = counts.iter().try_fold(1usize, |a, &m| a.checked_mul(m));
        match total {
            Some(t) if t <= MAX_STATES => Ok(counts),
            _ => Err(CliError::Validation(format!(
                "study.states: {}^{} states exceed the cap of {MAX_STATES}",
                self.study.states,
                target.dim()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn sections_and_mixed_norms() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            [target]
            name = "beta_mixture"
            [sampler]
            kind = "metropolized"
            n = 6
            scheme = "poly:3"
            [chain]
            n_steps = 500
            seed = 42
            [study]
            p = [2, 4.5, "inf"]
            [truncation]
            t = 2.0
            c3 = 1.0
            c4 = 1.0
            "#,
        )
        .unwrap();
        assert_eq!(c.sampler.kind, SamplerKind::Metropolized);
        assert_eq!(c.scheme().unwrap(), InterpScheme::Polynomial(3));
        assert_eq!(c.study.p, vec![Norm::L2, Norm::P(4.5), Norm::Inf]);
        assert_eq!(c.truncation.unwrap().c4, Some(1.0));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let err = ExperimentConfig::from_toml_str("[chain]\nn_stpes = 10\n").unwrap_err();
        match err {
            CliError::Parse(msg) => assert!(msg.contains("n_stpes"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ExperimentConfig::from_toml_str("[extra]\n"),
            Err(CliError::Parse(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str("[sampler]\nkind = \"hmc\"\n"),
            Err(CliError::Parse(_))
        ));
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ExperimentConfig::default();
        c.chain.burn_in = Some(1000);
        assert!(matches!(c.validate(), Err(CliError::Validation(m)) if m.starts_with("chain.burn_in")));
        let mut c = ExperimentConfig::default();
        c.target.name = "rosenbrock".into();
        assert!(matches!(c.validate(), Err(CliError::Validation(m)) if m.starts_with("target.name")));
        let mut c = ExperimentConfig::default();
        c.sampler.scheme = "poly:12".into();
        assert!(matches!(c.validate(), Err(CliError::Validation(m)) if m.starts_with("sampler.scheme")));
        let mut c = ExperimentConfig::default();
        c.sampler.eps_rel = 20.0;
        assert!(matches!(c.validate(), Err(CliError::Validation(m)) if m.starts_with("sampler.eps_rel")));
    }
}
