//! Sampled-data model of a stacker crane with a flexible mast, its
//! discrete-time flat parameterization and rest-to-rest feedforward design.
//!
//! The explicit-Euler model `x_{k+1} = x_k + T_s f(x_k, u_k)` is flat: the
//! payload height `y¹` and a time-variant linear combination `y²` of the
//! horizontal states determine every state and input through a fixed
//! window of samples. Planning a reference for `(y¹, y²)` therefore yields
//! a feedforward that reproduces the planned motion exactly in the
//! discrete model.
//!
//! ```
//! use flatcrane::{feedforward, plan_reference, CraneModel, PhysicalParams, PlanSpec, RestPosition};
//!
//! let model = CraneModel::new(PhysicalParams::default())?;
//! let spec = PlanSpec {
//!     start: RestPosition::new(0.0, 2.0),
//!     goal: RestPosition::new(4.0, 6.0),
//!     n: 120,
//!     head_len: 10,
//!     tail_len: 10,
//!     blend_degree: 9,
//!     q3_min: 1.0,
//!     q3_max: 9.0,
//! };
//! let reference = plan_reference(&model, &spec)?;
//! let ff = feedforward(&model, &reference)?;
//! assert!(ff.diagnostics.relative_dev() < 1e-8);
//! # Ok::<(), flatcrane::Error>(())
//! ```

pub mod beam_model;
pub mod config;
pub mod decoupling;
pub mod error;
pub mod experiment;
pub mod flat_param;
pub mod linalg;
pub mod ltv_canonical;
pub mod planner_ff;

pub use beam_model::{
    AnsatzShape, CoriolisVariant, CraneModel, CraneState, ForceInput, PhysicalParams,
};
pub use config::{load_config, ExperimentConfig};
pub use decoupling::{LtvSample, TransformedInput};
pub use error::{Error, ErrorClass, Result};
pub use experiment::{run_subcommand, RunReport, Subcommand};
pub use flat_param::{
    flat_output_crane, parameterize_crane, CraneSample, FlatReference, ZetaHistory,
};
pub use ltv_canonical::{CanonicalData, LtvProvider, LtvStep};
pub use planner_ff::{
    feedforward, plan_reference, rollout, FeedforwardResult, PlanSpec, RestPosition,
};
