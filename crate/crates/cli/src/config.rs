//! JSON job configuration.

use std::f64::consts::PI;
use std::path::PathBuf;

use cmc_core::cmc::BoundaryData;
use cmc_core::verify::ExactSolution;
use cmc_core::{make_support_function, GridDomain, MinkVector, SolverOptions, SupportError, SupportFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Support(#[from] SupportError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub dimension: usize,
    pub support: SupportSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Spacetime points (x₁, …, xₙ, t).
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub asymptotics: AsymptoticsSpec,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum SupportSpec {
    /// Future cone of `apex` = (x₁, …, xₙ, t), origin by default.
    Cone {
        #[serde(default)]
        apex: Option<Vec<f64>>,
        #[serde(default = "default_cone_samples")]
        samples: usize,
    },
    Wedge {
        axis: Vec<f64>,
        #[serde(default)]
        offsets: [f64; 2],
    },
    /// `count` directions (stratified in angle for n = 2) with values uniform in
    /// [−spread, spread].
    Random {
        count: usize,
        seed: u64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    Custom {
        samples: Vec<SampleRecord>,
    },
}

fn default_cone_samples() -> usize {
    64
}

fn default_spread() -> f64 {
    0.5
}

/// One support sample: exactly one of `angle_degrees` (n = 2), `sign` (n = 1) or
/// `vector` (any n), plus the value φ(θ).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    #[serde(default)]
    pub angle_degrees: Option<f64>,
    #[serde(default)]
    pub sign: Option<f64>,
    #[serde(default)]
    pub vector: Option<Vec<f64>>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySpec {
    #[default]
    Auto,
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(rename = "H", default)]
    pub curvature: Option<f64>,
    #[serde(rename = "H_list", default)]
    pub curvatures: Option<Vec<f64>>,
    /// Half-width R of the window [−R, R]ⁿ.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_spacing")]
    pub h: f64,
    #[serde(default)]
    pub tol_newton: Option<f64>,
    #[serde(default)]
    pub slope_margin: Option<f64>,
    #[serde(default)]
    pub stabilization_tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub max_boxes: Option<usize>,
    #[serde(default)]
    pub grading: Option<f64>,
    #[serde(default)]
    pub boundary: BoundarySpec,
}

fn default_window() -> f64 {
    2.0
}

fn default_spacing() -> f64 {
    0.1
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            curvature: None,
            curvatures: None,
            window: default_window(),
            h: default_spacing(),
            tol_newton: None,
            slope_margin: None,
            stabilization_tol: None,
            max_iter: None,
            max_boxes: None,
            grading: None,
            boundary: BoundarySpec::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default = "default_flow_time")]
    pub t: f64,
    /// Also write the flowed surface re-graphed over the plane.
    #[serde(default)]
    pub regraph: bool,
}

fn default_flow_time() -> f64 {
    1.0
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self { t: default_flow_time(), regraph: false }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_probe_count")]
    pub probe_count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_probe_count() -> usize {
    100
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { probe_count: default_probe_count(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsSpec {
    /// Unit directions; the support directions when absent.
    #[serde(default)]
    pub directions: Option<Vec<Vec<f64>>>,
    /// Increasing radii inside the window; fractions of R when absent.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    /// Largest accepted |f₀ − φ| in the verify summary.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactKind {
    Hyperboloid,
    Trough,
    Plane,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    #[serde(default = "default_exact")]
    pub exact: ExactKind,
    #[serde(default = "default_spacings")]
    pub spacings: Vec<f64>,
    /// Slope and offset of the plane oracle.
    #[serde(default)]
    pub slope: [f64; 2],
    #[serde(default)]
    pub offset: f64,
}

fn default_exact() -> ExactKind {
    ExactKind::Hyperboloid
}

fn default_spacings() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self { exact: default_exact(), spacings: default_spacings(), slope: [0.0; 2], offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// Command-line values that replace the corresponding config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub curvature: Option<f64>,
    pub window: Option<f64>,
    pub h: Option<f64>,
    pub out: Option<PathBuf>,
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Parses and validates, applying `overrides` in between.
    pub fn load(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = Self::from_json(text)?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.curvature {
            self.solver.curvature = Some(v);
        }
        if let Some(v) = o.window {
            self.solver.window = v;
        }
        if let Some(v) = o.h {
            self.solver.h = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.dimension;
        if !(1..=2).contains(&n) {
            return Err(invalid("dimension", format!("must be 1 or 2, got {n}")));
        }
        self.support_function()?;
        let s = &self.solver;
        if let Some(h) = s.curvature {
            if !positive(h) {
                return Err(invalid("solver.H", format!("must be positive, got {h}")));
            }
        }
        if let Some(list) = &s.curvatures {
            if list.len() < 2 {
                return Err(invalid("solver.H_list", "needs at least two values"));
            }
            if let Some(h) = list.iter().find(|h| !positive(**h)) {
                return Err(invalid("solver.H_list", format!("must be positive, got {h}")));
            }
            if list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("solver.H_list", "must be strictly increasing"));
            }
        }
        if !positive(s.window) {
            return Err(invalid("solver.window", format!("must be positive, got {}", s.window)));
        }
        if !positive(s.h) {
            return Err(invalid("solver.h", format!("must be positive, got {}", s.h)));
        }
        self.window_grid()?;
        self.solver_options()?;
        for (i, p) in self.probes.iter().enumerate() {
            if p.len() != n + 1 {
                return Err(invalid(
                    format!("probes[{i}]"),
                    format!("expected {} coordinates, got {}", n + 1, p.len()),
                ));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(invalid(format!("probes[{i}]"), "non-finite coordinate"));
            }
        }
        if !self.flow.t.is_finite() {
            return Err(invalid("flow.t", "must be finite"));
        }
        if self.verify.probe_count == 0 {
            return Err(invalid("verify.probe_count", "must be at least 1"));
        }
        self.asymptotic_directions()?;
        self.asymptotic_radii()?;
        if let Some(t) = self.asymptotics.tolerance {
            if !positive(t) {
                return Err(invalid("asymptotics.tolerance", format!("must be positive, got {t}")));
            }
        }
        let c = &self.convergence;
        if c.spacings.len() < 2 {
            return Err(invalid("convergence.spacings", "needs at least two spacings"));
        }
        if let Some(h) = c.spacings.iter().find(|h| !positive(**h)) {
            return Err(invalid("convergence.spacings", format!("must be positive, got {h}")));
        }
        if c.slope.iter().map(|a| a * a).sum::<f64>() >= 1.0 {
            return Err(invalid("convergence.slope", "plane must be spacelike (|slope| < 1)"));
        }
        Ok(())
    }

    pub fn support_function(&self) -> Result<SupportFunction, ConfigError> {
        let n = self.dimension;
        match &self.support {
            SupportSpec::Cone { apex, samples } => {
                let apex = match apex {
                    Some(a) if a.len() != n + 1 => {
                        return Err(invalid("support.apex", format!("expected {} coordinates, got {}", n + 1, a.len())))
                    }
                    Some(a) => MinkVector::from_components(a).map_err(|e| invalid("support.apex", e.to_string()))?,
                    None => MinkVector::origin(n),
                };
                Ok(SupportFunction::cone(apex, *samples)?)
            }
            SupportSpec::Wedge { axis, offsets } => {
                if axis.len() != n {
                    return Err(invalid("support.axis", format!("expected {n} components, got {}", axis.len())));
                }
                Ok(SupportFunction::wedge(axis.clone(), (offsets[0], offsets[1]))?)
            }
            SupportSpec::Random { count, seed, spread } => {
                if !(spread.is_finite() && *spread >= 0.0) {
                    return Err(invalid("support.spread", format!("must be non-negative, got {spread}")));
                }
                Ok(make_support_function(n, random_samples(n, *count, *seed, *spread))?)
            }
            SupportSpec::Custom { samples } => Ok(make_support_function(n, parse_samples(n, samples)?)?),
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions, ConfigError> {
        let s = &self.solver;
        let mut o = SolverOptions::default();
        if let Some(v) = s.tol_newton {
            o.tol_newton = v;
        }
        if let Some(v) = s.slope_margin {
            o.slope_margin = v;
        }
        if let Some(v) = s.stabilization_tol {
            o.stabilization_tol = v;
        }
        if let Some(v) = s.max_iter {
            o.max_iter = v;
        }
        if let Some(v) = s.max_boxes {
            o.max_boxes = v;
        }
        if let Some(v) = s.grading {
            o.grading = v;
        }
        o.boundary = match s.boundary {
            BoundarySpec::Auto => BoundaryData::Auto,
            BoundarySpec::Upper => BoundaryData::Upper,
            BoundarySpec::Lower => BoundaryData::Lower,
        };
        o.validate().map_err(|e| match e {
            cmc_core::SolveError::InvalidOption(name) => invalid(format!("solver.{name}"), "out of range"),
            other => invalid("solver", other.to_string()),
        })?;
        Ok(o)
    }

    pub fn window_grid(&self) -> Result<GridDomain, ConfigError> {
        GridDomain::new(self.dimension, self.solver.window, self.solver.h)
            .map_err(|e| invalid("solver.window", e.to_string()))
    }

    /// The single curvature H, required by `command`.
    pub fn curvature(&self, command: &str) -> Result<f64, ConfigError> {
        self.solver.curvature.ok_or_else(|| invalid("solver.H", format!("required by {command}")))
    }

    pub fn curvature_list(&self, command: &str) -> Result<Vec<f64>, ConfigError> {
        self.solver.curvatures.clone().ok_or_else(|| invalid("solver.H_list", format!("required by {command}")))
    }

    /// Explicit directions (normalized), or `None` to use the support directions.
    pub fn asymptotic_directions(&self) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        let Some(dirs) = &self.asymptotics.directions else { return Ok(None) };
        dirs.iter()
            .enumerate()
            .map(|(i, d)| {
                let field = format!("asymptotics.directions[{i}]");
                if d.len() != self.dimension {
                    return Err(invalid(field, format!("expected {} components, got {}", self.dimension, d.len())));
                }
                let norm = d.iter().map(|c| c * c).sum::<f64>().sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(invalid(field, "must be a non-zero finite vector"));
                }
                Ok(d.iter().map(|c| c / norm).collect())
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }

    pub fn asymptotic_radii(&self) -> Result<Vec<f64>, ConfigError> {
        let r = self.solver.window;
        let radii = match &self.asymptotics.radii {
            Some(v) => v.clone(),
            None => [0.2, 0.4, 0.6, 0.8, 0.95].iter().map(|f| f * r).collect(),
        };
        if radii.len() < 2 || radii.windows(2).any(|w| w[1] <= w[0]) || !positive(radii[0]) {
            return Err(invalid("asymptotics.radii", "need at least two positive, strictly increasing radii"));
        }
        if radii[radii.len() - 1] > r {
            return Err(invalid("asymptotics.radii", format!("must lie inside the window (R = {r})")));
        }
        Ok(radii)
    }

    /// Oracle for `convergence`, scaled to the configured curvature.
    pub fn exact_solution(&self, h: f64) -> ExactSolution {
        let c = &self.convergence;
        match c.exact {
            ExactKind::Hyperboloid => ExactSolution::Hyperboloid { radius: 1.0 / h },
            ExactKind::Trough => ExactSolution::Trough { radius: 1.0 / (self.dimension as f64 * h) },
            ExactKind::Plane => ExactSolution::Plane { slope: c.slope, offset: c.offset },
        }
    }
}

/// Turns sample records into raw `(direction, value)` pairs for dimension `n`.
pub fn parse_samples(n: usize, records: &[SampleRecord]) -> Result<Vec<(Vec<f64>, f64)>, ConfigError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let field = format!("support.samples[{i}]");
            let given = [r.angle_degrees.is_some(), r.sign.is_some(), r.vector.is_some()];
            if given.iter().filter(|g| **g).count() != 1 {
                return Err(invalid(field, "exactly one of angle_degrees, sign, vector is required"));
            }
            let direction = if let Some(a) = r.angle_degrees {
                if n != 2 {
                    return Err(invalid(field, "angle_degrees needs dimension 2"));
                }
                let a = a.to_radians();
                vec![a.cos(), a.sin()]
            } else if let Some(s) = r.sign {
                if n != 1 {
                    return Err(invalid(field, "sign needs dimension 1"));
                }
                if s == 0.0 || !s.is_finite() {
                    return Err(invalid(field, "sign must be +1 or -1"));
                }
                vec![s.signum()]
            } else {
                r.vector.clone().unwrap_or_default()
            };
            Ok((direction, r.value))
        })
        .collect()
}

/// Seeded random samples; see [`SupportSpec::Random`].
pub fn random_samples(n: usize, count: usize, seed: u64, spread: f64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let value = |rng: &mut ChaCha8Rng| if spread > 0.0 { rng.gen_range(-spread..=spread) } else { 0.0 };
    match n {
        1 => vec![(vec![1.0], value(&mut rng)), (vec![-1.0], value(&mut rng))],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + rng.gen::<f64>()) / count as f64;
                (vec![a.cos(), a.sin()], value(&mut rng))
            })
            .collect(),
        _ => (0..count)
            .map(|_| {
                let d: Vec<f64> = loop {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                    let r2: f64 = v.iter().map(|c| c * c).sum();
                    if r2 > 1e-6 && r2 <= 1.0 {
                        break v;
                    }
                };
                (d, value(&mut rng))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<JobConfig, ConfigError> {
        JobConfig::load(text, &Overrides::default())
    }

    #[test]
    fn minimal_cone() {
        let c = cfg(r#"{"dimension": 2, "support": {"preset": "cone"}, "solver": {"H": 1.0}}"#).unwrap();
        assert_eq!(c.curvature("solve").unwrap(), 1.0);
        assert_eq!(c.window_grid().unwrap().nodes_per_axis(), 41);
    }

    #[test]
    fn single_direction() {
        let err =
            cfg(r#"{"dimension": 2, "support": {"preset": "custom", "samples": [{"angle_degrees": 0, "value": 0}]}}"#)
                .unwrap_err();
        assert_eq!(err.to_string(), "support: fewer than two directions");
    }

    #[test]
    fn unknown_field_is_named() {
        let err = cfg(r#"{"dimension": 2, "support": {"preset": "cone"}, "solvr": {}}"#).unwrap_err();
        assert!(err.to_string().contains("solvr"), "{err}");
        let err = cfg(r#"{"dimension": 2, "support": {"preset": "cone", "apexx": [0,0,0]}}"#).unwrap_err();
        assert!(err.to_string().contains("apexx"), "{err}");
    }

    #[test]
    fn invalid_fields_are_named() {
        let cases = [
            (r#"{"dimension": 3, "support": {"preset": "cone"}}"#, "dimension:"),
            (r#"{"dimension": 2, "support": {"preset": "cone"}, "solver": {"H": -1}}"#, "solver.H:"),
            (r#"{"dimension": 2, "support": {"preset": "cone"}, "solver": {"H_list": [1, 0.5]}}"#, "solver.H_list:"),
            (r#"{"dimension": 2, "support": {"preset": "cone"}, "solver": {"window": 1, "h": 0.3}}"#, "solver.window:"),
            (r#"{"dimension": 2, "support": {"preset": "cone"}, "solver": {"grading": 0}}"#, "solver.grading:"),
            (r#"{"dimension": 2, "support": {"preset": "cone"}, "probes": [[0, 1]]}"#, "probes[0]:"),
            (
                r#"{"dimension": 1, "support": {"preset": "custom", "samples": [{"sign": 1, "angle_degrees": 3, "value": 0}]}}"#,
                "support.samples[0]:",
            ),
            (r#"{"dimension": 2, "support": {"preset": "wedge", "axis": [1]}}"#, "support.axis:"),
        ];
        for (text, field) in cases {
            let err = cfg(text).unwrap_err().to_string();
            assert!(err.starts_with(field), "{text}: {err}");
        }
    }

    #[test]
    fn overrides_replace_config() {
        let o = Overrides { curvature: Some(0.5), window: Some(1.0), h: Some(0.25), out: Some("x".into()) };
        let c =
            JobConfig::load(r#"{"dimension": 1, "support": {"preset": "cone"}, "solver": {"H": 1.0}}"#, &o).unwrap();
        assert_eq!(c.solver.curvature, Some(0.5));
        assert_eq!(c.window_grid().unwrap().nodes_per_axis(), 9);
        assert_eq!(c.output.dir, PathBuf::from("x"));
    }

    #[test]
    fn random_preset_is_seeded() {
        assert_eq!(random_samples(2, 7, 3, 0.5), random_samples(2, 7, 3, 0.5));
        assert_ne!(random_samples(2, 7, 3, 0.5), random_samples(2, 7, 4, 0.5));
        let s = random_samples(2, 7, 3, 0.5);
        assert!(s.iter().all(|(_, v)| v.abs() <= 0.5));
    }
}
