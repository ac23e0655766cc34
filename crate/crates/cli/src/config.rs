//! Experiment configuration: a TOML file, command-line overrides, and
//! per-problem defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use pielm::{
    Activation, DerivativeBackend, NoiseMode, OracleOptions, PipelineSettings, SeedBundle,
    SolveOptions,
};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Heat,
    BlackScholes,
    Heston,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Heat => "heat",
            ProblemKind::BlackScholes => "black_scholes",
            ProblemKind::Heston => "heston",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "heat" => Ok(ProblemKind::Heat),
            "black_scholes" | "black-scholes" | "bs" => Ok(ProblemKind::BlackScholes),
            "heston" => Ok(ProblemKind::Heston),
            other => Err(format!(
                "unknown problem `{other}` (expected heat, black_scholes or heston)"
            )),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fully resolved settings of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub d: usize,
    pub activation: Activation,
    pub width: usize,
    pub n_int: usize,
    pub n_sb: usize,
    pub n_tb: usize,
    pub n_s: usize,
    pub n_test: usize,
    pub weight_range: (f64, f64),
    pub beta1: f64,
    pub beta2: f64,
    pub backend: DerivativeBackend,
    pub solver: SolveOptions,
    pub seeds: SeedBundle,
    pub oracle: OracleOptions,
    pub repeats: usize,
}

/// Defaults for `(problem, d)`.
pub fn defaults_for(problem: ProblemKind, d: usize) -> ExperimentConfig {
    let base = ExperimentConfig {
        problem,
        d,
        activation: Activation::Tanh,
        width: 800,
        n_int: 32768,
        n_sb: 16384,
        n_tb: 16384,
        n_s: 16384,
        n_test: 100_000,
        weight_range: (-0.1, 0.1),
        beta1: 5.0,
        beta2: 10.0,
        backend: DerivativeBackend::Analytic,
        solver: SolveOptions::default(),
        seeds: SeedBundle::default(),
        oracle: OracleOptions::default(),
        repeats: 1,
    };
    match problem {
        ProblemKind::Heat => ExperimentConfig {
            n_int: 8192,
            n_sb: 2048,
            n_tb: 6144,
            weight_range: (-0.01, 0.01),
            beta1: 1.0,
            beta2: 1.0,
            ..base
        },
        ProblemKind::BlackScholes => ExperimentConfig {
            width: if d >= 20 { 3200 } else { 800 },
            beta2: if d >= 50 { 100.0 } else { 10.0 },
            ..base
        },
        ProblemKind::Heston => {
            let (width, beta1, beta2) = match d {
                0..=2 => (800, 800.0, 800.0),
                3..=4 => (800, 5.0, 50.0),
                5..=29 => (800, 5.0, 10.0),
                30..=49 => (3200, 5.0, 10.0),
                _ => (3200, 10.0, 100.0),
            };
            ExperimentConfig {
                width,
                beta1,
                beta2,
                ..base
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rcond: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collocation: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_mc: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    /// `per_point` or `shared`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
}

/// Partial configuration as written in a file or given by flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_int: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sb: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_tb: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub seeds: SeedSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub oracle: OracleSection,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &ConfigFile) {
        overlay!(
            self,
            other,
            problem,
            d,
            activation,
            width,
            n_int,
            n_sb,
            n_tb,
            n_s,
            n_test,
            weight_range,
            beta1,
            beta2,
            backend,
            repeats
        );
        overlay!(self.solver, other.solver, method, rcond);
        overlay!(
            self.seeds,
            other.seeds,
            weights,
            collocation,
            boundary_mc,
            test,
            oracle
        );
        overlay!(self.oracle, other.oracle, n_samples, noise);
    }

    /// Fills unset fields from the defaults for the chosen problem and
    /// dimension, then validates.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let problem: ProblemKind = parse_field(
            "problem",
            self.problem
                .as_deref()
                .ok_or(ConfigError::Missing("problem"))?,
        )?;
        let d = self.d.ok_or(ConfigError::Missing("d"))?;
        let mut c = defaults_for(problem, d);
        if let Some(v) = &self.activation {
            c.activation = parse_field("activation", v)?;
        }
        if let Some(v) = &self.backend {
            c.backend = parse_field("backend", v)?;
        }
        if let Some(v) = &self.solver.method {
            c.solver.method = parse_field("solver.method", v)?;
        }
        if let Some(v) = self.solver.rcond {
            c.solver.rcond = v;
        }
        if let Some(v) = &self.oracle.noise {
            c.oracle.noise = match v.as_str() {
                "per_point" => NoiseMode::PerPoint,
                "shared" => NoiseMode::Shared,
                other => {
                    return Err(invalid(
                        "oracle.noise",
                        format!("`{other}` is not per_point or shared"),
                    ))
                }
            };
        }
        c.oracle.n_samples = self.oracle.n_samples.unwrap_or(c.oracle.n_samples);
        c.width = self.width.unwrap_or(c.width);
        c.n_int = self.n_int.unwrap_or(c.n_int);
        c.n_sb = self.n_sb.unwrap_or(c.n_sb);
        c.n_tb = self.n_tb.unwrap_or(c.n_tb);
        c.n_s = self.n_s.unwrap_or(c.n_s);
        c.n_test = self.n_test.unwrap_or(c.n_test);
        c.beta1 = self.beta1.unwrap_or(c.beta1);
        c.beta2 = self.beta2.unwrap_or(c.beta2);
        c.repeats = self.repeats.unwrap_or(c.repeats);
        if let Some([lo, hi]) = self.weight_range {
            c.weight_range = (lo, hi);
        }
        let s = &self.seeds;
        c.seeds = SeedBundle {
            weights: s.weights.unwrap_or(c.seeds.weights),
            collocation: s.collocation.unwrap_or(c.seeds.collocation),
            boundary_mc: s.boundary_mc.unwrap_or(c.seeds.boundary_mc),
            test: s.test.unwrap_or(c.seeds.test),
            oracle: s.oracle.unwrap_or(c.seeds.oracle),
        };
        c.validate()?;
        Ok(c)
    }
}

fn parse_field<T: FromStr>(field: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| invalid(field, e.to_string()))
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if self.problem == ProblemKind::Heston && !self.d.is_multiple_of(2) {
            return Err(invalid(
                "d",
                format!("heston needs an even dimension, got {}", self.d),
            ));
        }
        let counts = [
            ("width", self.width),
            ("n_int", self.n_int),
            ("n_sb", self.n_sb),
            ("n_tb", self.n_tb),
            ("n_s", self.n_s),
            ("n_test", self.n_test),
            ("repeats", self.repeats),
            ("oracle.n_samples", self.oracle.n_samples),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        let (lo, hi) = self.weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(
                "weight_range",
                format!("need low < high, got [{lo}, {hi}]"),
            ));
        }
        for (field, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.solver.rcond) {
            return Err(invalid(
                "solver.rcond",
                format!("must lie in [0, 1), got {}", self.solver.rcond),
            ));
        }
        Ok(())
    }

    /// The same configuration as a complete file.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            problem: Some(self.problem.name().into()),
            d: Some(self.d),
            activation: Some(self.activation.name().into()),
            width: Some(self.width),
            n_int: Some(self.n_int),
            n_sb: Some(self.n_sb),
            n_tb: Some(self.n_tb),
            n_s: Some(self.n_s),
            n_test: Some(self.n_test),
            weight_range: Some([self.weight_range.0, self.weight_range.1]),
            beta1: Some(self.beta1),
            beta2: Some(self.beta2),
            backend: Some(backend_name(self.backend).into()),
            repeats: Some(self.repeats),
            solver: SolverSection {
                method: Some(self.solver.method.name().into()),
                rcond: Some(self.solver.rcond),
            },
            seeds: SeedSection {
                weights: Some(self.seeds.weights),
                collocation: Some(self.seeds.collocation),
                boundary_mc: Some(self.seeds.boundary_mc),
                test: Some(self.seeds.test),
                oracle: Some(self.seeds.oracle),
            },
            oracle: OracleSection {
                n_samples: Some(self.oracle.n_samples),
                noise: Some(noise_name(self.oracle.noise).into()),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }

    pub fn pipeline_settings(&self) -> PipelineSettings {
        PipelineSettings {
            activation: self.activation,
            width: self.width,
            weight_low: self.weight_range.0,
            weight_high: self.weight_range.1,
            n_int: self.n_int,
            n_sb: self.n_sb,
            n_tb: self.n_tb,
            n_samples: self.n_s,
            n_test: self.n_test,
            oracle: self.oracle,
            beta1: self.beta1,
            beta2: self.beta2,
            backend: self.backend,
            solver: self.solver,
            seeds: self.seeds.clone(),
            dump_system: None,
        }
    }
}

pub fn backend_name(backend: DerivativeBackend) -> &'static str {
    match backend {
        DerivativeBackend::Analytic => "analytic",
        DerivativeBackend::FiniteDifference { .. } => "fd",
    }
}

pub fn noise_name(noise: NoiseMode) -> &'static str {
    match noise {
        NoiseMode::PerPoint => "per_point",
        NoiseMode::Shared => "shared",
    }
}

/// Reads the optional file, applies the flag overrides and resolves.
pub fn parse_config(
    path: Option<&Path>,
    flags: &ConfigFile,
) -> Result<ExperimentConfig, ConfigError> {
    let mut file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.overlay(flags);
    file.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use pielm::SolveMethod;

    #[test]
    fn solver_method_round_trips() {
        let c = defaults_for(ProblemKind::Heat, 3);
        let mut f = c.to_file();
        f.solver.method = Some("qr".into());
        assert_eq!(
            f.resolve().unwrap().solver.method,
            SolveMethod::ColumnPivotedQr
        );
    }

    #[test]
    fn echo_parses_back() {
        let c = defaults_for(ProblemKind::Heston, 4);
        let back = ConfigFile::from_toml(&c.to_toml())
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn heston_defaults_follow_dimension() {
        let c = defaults_for(ProblemKind::Heston, 2);
        assert_eq!((c.width, c.beta1, c.beta2), (800, 800.0, 800.0));
        let c = defaults_for(ProblemKind::Heston, 50);
        assert_eq!((c.width, c.beta1, c.beta2), (3200, 10.0, 100.0));
    }

    #[test]
    fn odd_heston_dimension_rejected() {
        let f = ConfigFile {
            problem: Some("heston".into()),
            d: Some(3),
            ..Default::default()
        };
        match f.resolve() {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "d"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_problem_named() {
        let f = ConfigFile {
            d: Some(3),
            ..Default::default()
        };
        assert!(matches!(f.resolve(), Err(ConfigError::Missing("problem"))));
    }
}
