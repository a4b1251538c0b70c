use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curvfun::FunctionSpec;
use crate::diagnostics::DEFAULT_SIGMAS;
use crate::dual::polar_dual;
use crate::error::{Error, Result};
use crate::flow::{Direction, FlowSpec, StopRule};
use crate::hypersurface::{perturbed_sphere, sphere, AxiGrid, GraphFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureName {
    Mean,
    Sigma,
    Quotient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    pub name: CurvatureName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub inverse: bool,
}

impl CurvatureConfig {
    pub fn to_spec(&self) -> Result<FunctionSpec> {
        let need_k = || {
            self.k
                .ok_or_else(|| Error::Config(format!("curvature {:?} needs k", self.name)))
        };
        let base = match self.name {
            CurvatureName::Mean => FunctionSpec::MeanNormalized,
            CurvatureName::Sigma => FunctionSpec::SigmaK(need_k()?),
            CurvatureName::Quotient => FunctionSpec::QuotientQ(need_k()?),
        };
        Ok(if self.inverse { base.inverse() } else { base })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialShape {
    Sphere {
        r: f64,
    },
    PerturbedSphere {
        r: f64,
        amp: f64,
        mode: usize,
    },
    /// Polar dual of a perturbed sphere, for expanding runs.
    DualPerturbedSphere {
        r: f64,
        amp: f64,
        mode: usize,
    },
}

fn default_cfl() -> f64 {
    0.2
}

fn default_stride() -> usize {
    100
}

fn default_sigmas() -> Vec<f64> {
    DEFAULT_SIGMAS.to_vec()
}

/// One scenario, read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub intervals: usize,
    pub curvature: CurvatureConfig,
    pub initial: InitialShape,
    pub direction: Direction,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub stop: StopRule,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// A validated scenario, ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub flow: FlowSpec,
    pub initial: GraphFunction,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks every parameter against the owning module and builds the
    /// initial graph.
    pub fn build(&self) -> Result<Scenario> {
        let bad = |e: Error| Error::Config(format!("scenario {:?}: {e}", self.name));
        let safe = |c: char| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.');
        if self.name.is_empty() || self.name.starts_with('.') || !self.name.chars().all(safe) {
            return Err(Error::Config(format!(
                "scenario name {:?} must be nonempty, not start with '.', and use only [A-Za-z0-9_.-]",
                self.name
            )));
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !s.is_finite()) {
            return Err(bad(Error::Argument(
                "sigmas must be a nonempty list of finite numbers".into(),
            )));
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(bad(Error::Argument(format!(
                    "tolerance must be positive, got {tol}"
                ))));
            }
        }
        let grid = AxiGrid::new(self.intervals, self.n).map_err(bad)?;
        let flow = FlowSpec {
            direction: self.direction,
            curvature: self.curvature.to_spec().map_err(bad)?,
            cfl: self.cfl,
            snapshot_stride: self.snapshot_stride,
            stop: self.stop,
        };
        flow.validate(self.n).map_err(bad)?;
        let initial = match self.initial {
            InitialShape::Sphere { r } => sphere(grid, r),
            InitialShape::PerturbedSphere { r, amp, mode } => perturbed_sphere(grid, r, amp, mode),
            InitialShape::DualPerturbedSphere { r, amp, mode } => {
                perturbed_sphere(grid, r, amp, mode)
                    .and_then(|g| polar_dual(&g))
                    .map(|p| p.dual)
            }
        }
        .map_err(bad)?;
        if self.direction == Direction::Expanding && initial.u_max() >= FRAC_PI_2 {
            return Err(bad(Error::Argument(
                "expanding initial data must lie in the open hemisphere".into(),
            )));
        }
        Ok(Scenario {
            config: self.clone(),
            flow,
            initial,
        })
    }

    /// Radius of the initial sphere, if the initial shape is one.
    pub fn sphere_radius(&self) -> Option<f64> {
        match self.initial {
            InitialShape::Sphere { r } => Some(r),
            _ => None,
        }
    }
}
