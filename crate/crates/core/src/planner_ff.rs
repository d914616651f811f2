//! Rest-to-rest reference design, feedforward and open-loop verification.

use serde::{Deserialize, Serialize};

use crate::beam_model::{CraneModel, CraneState, ForceInput};
use crate::decoupling::TransformedInput;
use crate::error::{Error, Result};
use crate::flat_param::{
    parameterize_all, reference_regularity, rest_covector, FlatReference, Y1_WINDOW, Y2_WINDOW,
};

/// Tolerance of the rest-state and holding-force checks.
pub const REST_TOL: f64 = 1e-9;

pub const MIN_RUN: usize = Y1_WINDOW;

/// Straight beam and no motion at `(q¹, q³)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestPosition {
    pub q1: f64,
    pub q3: f64,
}

impl RestPosition {
    pub fn new(q1: f64, q3: f64) -> Self {
        Self { q1, q3 }
    }

    pub fn state(&self) -> CraneState {
        CraneState::rest(self.q1, self.q3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSpec {
    pub start: RestPosition,
    pub goal: RestPosition,
    /// Horizon `N` in steps.
    pub n: usize,
    pub head_len: usize,
    pub tail_len: usize,
    /// `2d + 1` for a smoothstep with `d` vanishing derivatives at both ends.
    pub blend_degree: u32,
    pub q3_min: f64,
    pub q3_max: f64,
}

impl PlanSpec {
    pub fn validate(&self, model: &CraneModel) -> Result<()> {
        let l = model.params().length;
        if !(self.q3_min.is_finite() && self.q3_max.is_finite())
            || self.q3_min < 0.0
            || self.q3_max > l
            || self.q3_min >= self.q3_max
        {
            return Err(Error::invalid(
                "q3_min",
                format!("need 0 <= q3_min < q3_max <= L = {l}"),
            ));
        }
        for (field, rest) in [("start", &self.start), ("goal", &self.goal)] {
            if !rest.q1.is_finite() {
                return Err(Error::invalid(format!("{field}.q1"), "must be finite"));
            }
            if !(self.q3_min..=self.q3_max).contains(&rest.q3) {
                return Err(Error::invalid(
                    format!("{field}.q3"),
                    format!("{} outside [{}, {}]", rest.q3, self.q3_min, self.q3_max),
                ));
            }
        }
        for (field, len) in [("head_len", self.head_len), ("tail_len", self.tail_len)] {
            if len < MIN_RUN {
                return Err(Error::invalid(field, format!("must be at least {MIN_RUN}")));
            }
        }
        if self.blend_degree < 5 || self.blend_degree.is_multiple_of(2) {
            return Err(Error::invalid("blend_degree", "must be odd and at least 5"));
        }
        let required = self.head_len + self.tail_len;
        if self.n <= required {
            return Err(Error::HorizonTooShort {
                n: self.n,
                required,
            });
        }
        Ok(())
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Polynomial of degree `2d + 1` rising from 0 to 1 on `[0, 1]` with `d`
/// vanishing derivatives at both ends; clamped outside.
pub fn smoothstep(d: u32, tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    if t > 0.5 {
        return 1.0 - smoothstep(d, 1.0 - t);
    }
    let sum: f64 = (0..=d)
        .map(|i| binomial(d + i, i) * binomial(2 * d + 1, d - i) * (-t).powi(i as i32))
        .sum();
    t.powi(d as i32 + 1) * sum
}

/// `(y¹*, y²*)` of a rest position, verified by parameterizing the
/// constant reference back to the rest state and holding force.
pub fn rest_flat_values(model: &CraneModel, rest: &RestPosition) -> Result<(f64, f64)> {
    let c = rest_covector(model, rest.q3)?;
    let y = (rest.q3, c[0] * rest.q1);
    let r = FlatReference::new(vec![y.0; Y1_WINDOW], vec![y.1; Y2_WINDOW], model.ts())?;
    let s = parameterize_all(model, &r)?[0];
    let scale = 1.0 + rest.q1.abs().max(rest.q3.abs());
    let dx = (s.x.0 - rest.state().0).amax() / scale;
    let du = (s.u.0 - model.holding_force().0).amax();
    let residual = dx.max(du / (1.0 + model.holding_force().0.amax()));
    if !(residual <= REST_TOL) {
        return Err(Error::Consistency {
            what: "rest inverse",
            residual,
            tolerance: REST_TOL,
        });
    }
    Ok(y)
}

fn blend(spec: &PlanSpec, len: usize, from: f64, to: f64) -> Vec<f64> {
    let d = (spec.blend_degree - 1) / 2;
    let (head, end) = (spec.head_len, spec.n - spec.tail_len);
    let span = (end - head) as f64;
    (0..len)
        .map(|k| {
            if k <= head {
                from
            } else if k >= end {
                to
            } else {
                from + (to - from) * smoothstep(d, (k - head) as f64 / span)
            }
        })
        .collect()
}

/// Constant head, smoothstep blend, constant tail in both components.
pub fn plan_reference(model: &CraneModel, spec: &PlanSpec) -> Result<FlatReference> {
    spec.validate(model)?;
    let a = rest_flat_values(model, &spec.start)?;
    let b = rest_flat_values(model, &spec.goal)?;
    let n = spec.n;
    let r = FlatReference::new(
        blend(spec, n + Y1_WINDOW, a.0, b.0),
        blend(spec, n + Y2_WINDOW, a.1, b.1),
        model.ts(),
    )?;
    r.check_heights(spec.q3_min, spec.q3_max)?;
    Ok(r)
}

pub fn euler_step(model: &CraneModel, x: &CraneState, u: &ForceInput) -> Result<CraneState> {
    model.euler_step(x, u)
}

/// `x_0 … x_M` under `u_0 … u_{M−1}`.
pub fn rollout(model: &CraneModel, x0: &CraneState, us: &[ForceInput]) -> Result<Vec<CraneState>> {
    let mut xs = Vec::with_capacity(us.len() + 1);
    xs.push(*x0);
    for (k, u) in us.iter().enumerate() {
        let next = model
            .euler_step(&xs[k], u)
            .map_err(|e| e.at_step(k as i64))?;
        xs.push(next);
    }
    Ok(xs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardDiagnostics {
    /// `max_k ‖x̂_k − x_{d,k}‖∞` of the open-loop rollout.
    pub max_open_loop_dev: f64,
    /// `1 + max_k ‖x_{d,k}‖∞`.
    pub scale: f64,
    pub min_sv_mk: f64,
    pub min_sv_ratio: f64,
    pub rank_failures: Vec<i64>,
    /// Largest deviation from the holding force over steps whose windows
    /// lie in constant runs of the reference.
    pub rest_force_error: f64,
}

impl FeedforwardDiagnostics {
    pub fn relative_dev(&self) -> f64 {
        self.max_open_loop_dev / self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardResult {
    /// `x_{d,0} … x_{d,N}`.
    pub x_d: Vec<CraneState>,
    /// `u_{d,0} … u_{d,N−1}`.
    pub u_d: Vec<ForceInput>,
    pub ubar_d: Vec<TransformedInput>,
    pub diagnostics: FeedforwardDiagnostics,
}

fn constant(s: &[f64]) -> bool {
    s.iter().all(|&v| v == s[0])
}

/// Parameterizes every step, then verifies by open-loop rollout.
pub fn feedforward(model: &CraneModel, r: &FlatReference) -> Result<FeedforwardResult> {
    let n = r.horizon();
    let regularity = reference_regularity(model, r)?;
    let samples = parameterize_all(model, r)?;
    let x_d: Vec<CraneState> = samples.iter().map(|s| s.x).collect();
    let u_d: Vec<ForceInput> = samples[..n].iter().map(|s| s.u).collect();
    let ubar_d = samples[..n].iter().map(|s| s.ubar).collect();

    let sim = rollout(model, &x_d[0], &u_d)?;
    let max_open_loop_dev = sim
        .iter()
        .zip(&x_d)
        .map(|(a, b)| (a.0 - b.0).amax())
        .fold(0.0, f64::max);
    let scale = 1.0 + x_d.iter().map(|x| x.0.amax()).fold(0.0, f64::max);
    let hold = model.holding_force();
    let rest_force_error = (0..n)
        .filter(|&k| constant(&r.y1()[k..k + Y1_WINDOW]) && constant(&r.y2()[k..k + Y2_WINDOW]))
        .map(|k| (u_d[k].0 - hold.0).amax())
        .fold(0.0, f64::max);
    log::debug!("feedforward N = {n}: open-loop deviation {max_open_loop_dev:.3e}");

    Ok(FeedforwardResult {
        x_d,
        u_d,
        ubar_d,
        diagnostics: FeedforwardDiagnostics {
            max_open_loop_dev,
            scale,
            min_sv_mk: regularity.min_sigma(),
            min_sv_ratio: regularity.min_ratio(),
            rank_failures: regularity.rank_failures(),
            rest_force_error,
        },
    })
}
