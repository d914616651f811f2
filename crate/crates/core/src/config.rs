//! Experiment configuration files (strict JSON).
//!
//! Every block is optional. Relative paths are resolved against the
//! directory of the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beam_model::{CoriolisVariant, CraneModel, PhysicalParams};
use crate::error::{Error, Result};
use crate::planner_ff::{PlanSpec, RestPosition, REST_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub start: RestPosition,
    pub goal: RestPosition,
    #[serde(rename = "N")]
    pub n: usize,
    pub head_len: usize,
    pub tail_len: usize,
    pub blend_degree: u32,
    /// Defaults to 1 m.
    pub q3_min: Option<f64>,
    /// Defaults to `L − 1` m.
    pub q3_max: Option<f64>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            start: RestPosition::new(0.0, 1.0),
            goal: RestPosition::new(10.0, 8.0),
            n: 300,
            head_len: 10,
            tail_len: 10,
            blend_degree: 9,
            q3_min: None,
            q3_max: None,
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
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Open-loop deviation relative to `1 + max ‖x_d‖∞`.
    pub open_loop_rel: f64,
    /// Rest states and holding forces at the plan ends.
    pub rest: f64,
    /// Final simulated state against the goal rest position.
    pub final_state: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            open_loop_rel: 1e-8,
            rest: REST_TOL,
            final_state: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Initial state; defaults to the plan's start rest state.
    pub x0: Option<[f64; 6]>,
    /// CSV with `u1,u2` columns; defaults to the feedforward of the plan.
    pub u_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub params: PhysicalParams,
    pub plan: PlanConfig,
    pub variant: CoriolisVariant,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
    pub simulate: SimulateConfig,
}

impl ExperimentConfig {
    pub fn model(&self) -> Result<CraneModel> {
        Ok(CraneModel::new(self.params.clone())?.with_variant(self.variant))
    }

    pub fn plan_spec(&self) -> PlanSpec {
        let p = &self.plan;
        PlanSpec {
            start: p.start,
            goal: p.goal,
            n: p.n,
            head_len: p.head_len,
            tail_len: p.tail_len,
            blend_degree: p.blend_degree,
            q3_min: p.q3_min.unwrap_or(1.0),
            q3_max: p.q3_max.unwrap_or(self.params.length - 1.0),
        }
    }

    /// Checks every invariant; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        self.plan_spec().validate(&model)?;
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.open_loop_rel", t.open_loop_rel),
            ("tolerances.rest", t.rest),
            ("tolerances.final_state", t.final_state),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        if let Some(x0) = &self.simulate.x0 {
            if x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("simulate.x0", "non-finite entry"));
            }
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &Path| {
            if p.is_relative() {
                base.join(p)
            } else {
                p.to_path_buf()
            }
        };
        self.output.dir = join(&self.output.dir);
        if let Some(u) = &self.simulate.u_csv {
            self.simulate.u_csv = Some(join(u));
        }
    }
}

/// Parses configuration text without touching paths.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => Error::ConfigSchema {
                path,
                message: inner.to_string(),
            },
            _ => Error::ConfigParse {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            },
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}
