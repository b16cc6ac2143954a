//! Experiment configuration files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smp_core::geometry::BrokenLine;
use smp_core::operators::{make_operator, OperatorDescriptor, OperatorSpec};

use crate::error::LabError;
use crate::shapes::Shape;

/// Named scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    AxisStrictness,
    Inclined,
    BrokenLine,
    StrongComparison,
    Positivity,
    TruncatedCounterexample,
    EllipticReduction,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::AxisStrictness,
        Scenario::Inclined,
        Scenario::BrokenLine,
        Scenario::StrongComparison,
        Scenario::Positivity,
        Scenario::TruncatedCounterexample,
        Scenario::EllipticReduction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::AxisStrictness => "axis_strictness",
            Scenario::Inclined => "inclined",
            Scenario::BrokenLine => "broken_line",
            Scenario::StrongComparison => "strong_comparison",
            Scenario::Positivity => "positivity",
            Scenario::TruncatedCounterexample => "truncated_counterexample",
            Scenario::EllipticReduction => "elliptic_reduction",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::AxisStrictness => "non-constant data keeps the interior max strictly below M; barrier bound at the top center",
            Scenario::Inclined => "tilted run and straightened run agree within the scheme error",
            Scenario::BrokenLine => "constants propagate exactly along a cylinder chain; perturbed data keeps a strict gap on the axis",
            Scenario::StrongComparison => "w = u - v is a discrete M+ subsolution and stays <= 0",
            Scenario::Positivity => "nonnegative compactly supported data becomes strictly positive",
            Scenario::TruncatedCounterexample => "x2^2 is a truncated-Pucci supersolution with an interior minimum (expected failure)",
            Scenario::EllipticReduction => "stationary elliptic solution has zero time drift and max on the boundary",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainShape {
    Ball,
    Box,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub center: Option<Vec<f64>>,
    /// Ball radius or box half-width; chain cylinder radius for `broken_line`.
    pub radius: Option<f64>,
    pub domain: Option<DomainShape>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    /// Axis slope for `inclined`.
    pub drift: Option<Vec<f64>>,
    /// Barrier radius for `axis_strictness`.
    pub r0: Option<f64>,
    pub broken_line: Option<BrokenLine>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: Option<f64>,
    pub cfl_safety: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Scenario,
    #[serde(default)]
    pub operator: Option<OperatorDescriptor>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: Option<Shape>,
    #[serde(default)]
    pub boundary: Option<Shape>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Config with every optional field left to the scenario defaults.
    pub fn new(experiment: Scenario) -> Self {
        Self {
            experiment,
            operator: None,
            geometry: GeometryConfig::default(),
            grid: GridConfig::default(),
            initial: None,
            boundary: None,
            tolerances: BTreeMap::new(),
            seed: 0,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LabError> {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fills in scenario defaults and checks consistency.
    pub fn resolve(&self) -> Result<Setup, LabError> {
        crate::scenarios::resolve(self)
    }
}

/// Tolerances and thresholds, all strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    /// Residual slack for discrete sub/supersolution checks.
    pub tau: f64,
    /// Floor for "strictly positive" and ordering checks.
    pub zero_tol: f64,
    /// Time after which strict gaps are asserted.
    pub gap_start: f64,
    /// Time after which strict positivity is asserted.
    pub t_pos: f64,
    /// Allowed discrepancy in units of the measured self-error.
    pub self_error_factor: f64,
    pub covariance_tol: f64,
    /// Fraction of the barrier bound the observed gap must reach.
    pub barrier_factor: f64,
    /// Allowed time drift of stationary data.
    pub drift_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tau: 1e-9,
            zero_tol: 1e-12,
            gap_start: 0.01,
            t_pos: 0.05,
            self_error_factor: 2.0,
            covariance_tol: 1e-10,
            barrier_factor: 0.5,
            drift_tol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self, LabError> {
        let mut t = Self::default();
        for (key, &value) in map {
            if !(value.is_finite() && value > 0.0) {
                return Err(LabError::Config(format!("tolerance `{key}` must be positive, got {value}")));
            }
            let slot = match key.as_str() {
                "tau" => &mut t.tau,
                "zero_tol" => &mut t.zero_tol,
                "gap_start" => &mut t.gap_start,
                "t_pos" => &mut t.t_pos,
                "self_error_factor" => &mut t.self_error_factor,
                "covariance_tol" => &mut t.covariance_tol,
                "barrier_factor" => &mut t.barrier_factor,
                "drift_tol" => &mut t.drift_tol,
                other => return Err(LabError::Config(format!("unknown tolerance `{other}`"))),
            };
            *slot = value;
        }
        Ok(t)
    }
}

/// A config with all defaults applied.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scenario: Scenario,
    pub spec: OperatorSpec,
    pub descriptor: OperatorDescriptor,
    pub center: Vec<f64>,
    pub radius: f64,
    pub domain: DomainShape,
    pub t_start: f64,
    pub t_end: f64,
    pub h: f64,
    pub cfl_safety: f64,
    pub initial: Shape,
    pub boundary: Shape,
    pub drift: Vec<f64>,
    pub r0: f64,
    pub broken_line: Option<BrokenLine>,
    pub tol: Tolerances,
    pub seed: u64,
}

pub(crate) fn build_spec(d: &OperatorDescriptor) -> Result<OperatorSpec, LabError> {
    make_operator(d).map_err(|e| LabError::Config(format!("operator: {e}")))
}
