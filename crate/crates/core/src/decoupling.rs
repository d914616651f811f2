//! Input transformation `ū = (f⁴(x,u), f⁶(x,u))` and the decoupled
//! horizontal subsystem it exposes.
//!
//! With the accelerations of `q¹` and `q³` prescribed, the remaining
//! dynamics of `x₁ = (x¹, x², x⁴, x⁵)` are linear in `(x₁, ū¹)` with
//! coefficients depending on `(x³, x⁶, ū²)` only. `A₁` and `b₁` are read off
//! numerically by probing that map at basis vectors; a probe at a generic
//! point certifies the result.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2, Vector4, Vector6};

use crate::beam_model::{CraneModel, CraneState, ForceInput};
use crate::error::{Error, Result};
use crate::ltv_canonical::LtvStep;

/// Tolerance on the zero offset and the superposition residual of the
/// extracted subsystem.
pub const AFFINITY_TOL: f64 = 1e-9;

/// Condition estimate above which the input sensitivity is singular.
pub const SENSITIVITY_MAX_CONDITION: f64 = 1e12;

const PROBE_STATE: [f64; 4] = [0.37, -0.21, 0.83, -0.55];
const PROBE_INPUT: f64 = 0.61;

/// `ū = (ū¹, ū²)`: prescribed accelerations of `q¹` and `q³` [m/s²].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedInput(pub Vector2<f64>);

impl TransformedInput {
    pub fn new(u1: f64, u2: f64) -> Self {
        Self(Vector2::new(u1, u2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeDomain {
    Continuous,
    Discrete { ts: f64 },
}

/// `(A₁, b₁)` of the horizontal subsystem at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtvSample {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub domain: TimeDomain,
}

impl LtvSample {
    pub fn to_step(&self) -> LtvStep {
        LtvStep {
            a: DMatrix::from_iterator(4, 4, self.a.iter().copied()),
            b: DVector::from_iterator(4, self.b.iter().copied()),
        }
    }
}

/// Euler-discretized vertical double integrator `(A₂, b₂)`.
pub fn vertical_discrete(ts: f64) -> (Matrix2<f64>, Vector2<f64>) {
    (Matrix2::new(1.0, ts, 0.0, 1.0), Vector2::new(0.0, ts))
}

fn sensitivity(model: &CraneModel, x: &CraneState) -> Result<(Vector2<f64>, Matrix2<f64>)> {
    let acc = model.acceleration_map(x, model.variant())?;
    let offset = Vector2::new(acc.drift[0], acc.drift[2]);
    let s = Matrix2::new(
        acc.gain[(0, 0)],
        acc.gain[(0, 1)],
        acc.gain[(2, 0)],
        acc.gain[(2, 1)],
    );
    Ok((offset, s))
}

pub fn transformed_input(
    model: &CraneModel,
    x: &CraneState,
    u: &ForceInput,
) -> Result<TransformedInput> {
    let f = model.dynamics_rhs(x, u)?;
    Ok(TransformedInput::new(f[3], f[5]))
}

/// Solves the affine 2×2 system `offset + S u = ū` for `u`.
pub fn invert_input_transform(
    model: &CraneModel,
    x: &CraneState,
    ubar: &TransformedInput,
) -> Result<ForceInput> {
    let (offset, s) = sensitivity(model, x)?;
    let inv = s.try_inverse().ok_or(Error::SingularMatrix {
        context: "input sensitivity",
        condition: f64::INFINITY,
    })?;
    let cond = s.abs().row_sum().max() * inv.abs().row_sum().max();
    if !cond.is_finite() || cond > SENSITIVITY_MAX_CONDITION {
        return Err(Error::SingularMatrix {
            context: "input sensitivity",
            condition: cond,
        });
    }
    Ok(ForceInput(inv * (ubar.0 - offset)))
}

/// Vector field of the input-transformed system, `f(x, u(x, ū))`.
pub fn transformed_rhs(
    model: &CraneModel,
    x: &CraneState,
    ubar: &TransformedInput,
) -> Result<Vector6<f64>> {
    let u = invert_input_transform(model, x, ubar)?;
    model.dynamics_rhs(x, &u)
}

fn horizontal_rhs(
    model: &CraneModel,
    x1: &Vector4<f64>,
    x3: f64,
    x6: f64,
    u1: f64,
    u2: f64,
) -> Result<Vector4<f64>> {
    let x = CraneState::from_parts(x1, x3, x6);
    let f = transformed_rhs(model, &x, &TransformedInput::new(u1, u2))?;
    Ok(Vector4::new(f[0], f[1], f[3], f[4]))
}

/// Continuous-time `A₁(x³, x⁶, ū²)`, `b₁(x³)`.
pub fn extract_ltv(model: &CraneModel, x3: f64, x6: f64, u2: f64) -> Result<LtvSample> {
    let l = model.params().length;
    if !(0.0..=l).contains(&x3) {
        return Err(Error::Domain {
            what: "x3",
            value: x3,
            lo: 0.0,
            hi: l,
        });
    }
    let eval = |x1: &Vector4<f64>, u1: f64| horizontal_rhs(model, x1, x3, x6, u1, u2);

    let offset = eval(&Vector4::zeros(), 0.0)?;
    let off = offset.amax();
    if off > AFFINITY_TOL {
        return Err(Error::DecouplingViolation {
            what: "offset",
            residual: off,
            tolerance: AFFINITY_TOL,
        });
    }
    let mut a = Matrix4::zeros();
    for i in 0..4 {
        let col = eval(&Vector4::ith(i, 1.0), 0.0)? - offset;
        a.set_column(i, &col);
    }
    let b = eval(&Vector4::zeros(), 1.0)? - offset;

    let probe = Vector4::from(PROBE_STATE);
    let residual = (eval(&probe, PROBE_INPUT)? - (a * probe + b * PROBE_INPUT)).amax();
    if residual > AFFINITY_TOL {
        return Err(Error::DecouplingViolation {
            what: "superposition",
            residual,
            tolerance: AFFINITY_TOL,
        });
    }
    Ok(LtvSample {
        a,
        b,
        domain: TimeDomain::Continuous,
    })
}

/// `A₁d = I + T_s A₁`, `b₁d = T_s b₁`. Already discrete samples pass through.
pub fn discretize_ltv(sample: &LtvSample, ts: f64) -> LtvSample {
    match sample.domain {
        TimeDomain::Discrete { .. } => *sample,
        TimeDomain::Continuous => LtvSample {
            a: Matrix4::identity() + sample.a * ts,
            b: sample.b * ts,
            domain: TimeDomain::Discrete { ts },
        },
    }
}
