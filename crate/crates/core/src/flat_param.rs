//! Flat output and parameterizing map of the sampled crane.
//!
//! `y¹` is the (re-indexed) payload height: `x³_k = y¹_{k+4}`. The vertical
//! subsystem is a double integrator in `y¹`; given the heights, the
//! horizontal subsystem is linear time-variant and `y²` is its canonical
//! flat output. The parameterization at step `k` reads `y¹[k..=k+9]` and
//! `y²[k..=k+4]`.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector, Vector4};

use crate::beam_model::{CraneModel, CraneState, ForceInput};
use crate::decoupling::{discretize_ltv, extract_ltv, invert_input_transform, TransformedInput};
use crate::error::{Error, Result};
use crate::linalg::{lower_vector, rank_by_ratio, singular_values, Dd};
use crate::ltv_canonical::{
    canonical_covector_in, check_regularity, flat_output_ltv_in, reachability_matrix_in,
    CanonicalSolver, LtvStep, RegularityReport, TabulatedLtv, RANK_RATIO_TOL,
};

/// Samples of `y¹` read by one parameterization step.
pub const Y1_WINDOW: usize = 10;
/// Samples of `y²` read by one parameterization step.
pub const Y2_WINDOW: usize = 5;
/// Offset between `y¹` and the payload height, `x³_k = y¹_{k+4}`.
pub const HEIGHT_SHIFT: usize = 4;

const FD_STEP: f64 = 1e-6;

/// `(x³, x⁶, ū²)` from three consecutive heights.
pub fn param_vertical(y0: f64, y1: f64, y2: f64, ts: f64) -> (f64, f64, f64) {
    (y0, (y1 - y0) / ts, (y2 - 2.0 * y1 + y0) / (ts * ts))
}

/// Flat-output samples: `y1` over `[0, N+9]`, `y2` over `[0, N+4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatReference {
    y1: Vec<f64>,
    y2: Vec<f64>,
    ts: f64,
}

impl FlatReference {
    pub fn new(y1: Vec<f64>, y2: Vec<f64>, ts: f64) -> Result<Self> {
        if !(ts.is_finite() && ts > 0.0) {
            return Err(Error::invalid("T_s", "must be positive and finite"));
        }
        if y2.len() < Y2_WINDOW {
            return Err(Error::ReferenceLength {
                what: "y2",
                needed: Y2_WINDOW,
                got: y2.len(),
            });
        }
        let needed = y2.len() + Y1_WINDOW - Y2_WINDOW;
        if y1.len() != needed {
            return Err(Error::ReferenceLength {
                what: "y1",
                needed,
                got: y1.len(),
            });
        }
        if let Some(i) = y1.iter().chain(&y2).position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "reference",
                format!("non-finite sample {i}"),
            ));
        }
        Ok(Self { y1, y2, ts })
    }

    /// `N`: states exist for `k ∈ [0, N]`.
    pub fn horizon(&self) -> usize {
        self.y2.len() - Y2_WINDOW
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn y2(&self) -> &[f64] {
        &self.y2
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// All heights the reference induces lie in `[lo, hi]`.
    pub fn check_heights(&self, lo: f64, hi: f64) -> Result<()> {
        for (i, &h) in self.y1.iter().enumerate() {
            if !(lo..=hi).contains(&h) {
                return Err(Error::Domain {
                    what: "y1",
                    value: h,
                    lo,
                    hi,
                }
                .at_step(i as i64 - HEIGHT_SHIFT as i64));
            }
        }
        Ok(())
    }
}

/// Past values `ζ_{k−4} … ζ_{k−1}`, oldest first. `ζ¹ = x³`, `ζ² = x¹`;
/// the flat output only reads `ζ¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaHistory {
    pub zeta1: [f64; 4],
    pub zeta2: [f64; 4],
}

impl ZetaHistory {
    pub fn at_rest(q1: f64, q3: f64) -> Self {
        Self {
            zeta1: [q3; 4],
            zeta2: [q1; 4],
        }
    }
}

/// One parameterized sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CraneSample {
    pub x: CraneState,
    pub u: ForceInput,
    pub ubar: TransformedInput,
}

fn crane_step(model: &CraneModel, h: &[f64]) -> Result<LtvStep> {
    let ts = model.ts();
    let (x3, x6, u2) = param_vertical(h[0], h[1], h[2], ts);
    Ok(discretize_ltv(&extract_ltv(model, x3, x6, u2)?, ts).to_step())
}

/// Provider whose step `first_index + i` reads `heights[i..=i+2]`.
pub fn crane_ltv_provider(
    model: &CraneModel,
    heights: &[f64],
    first_index: i64,
) -> Result<TabulatedLtv> {
    if heights.len() < 3 {
        return Err(Error::ReferenceLength {
            what: "height sequence",
            needed: 3,
            got: heights.len(),
        });
    }
    let steps = heights
        .windows(3)
        .enumerate()
        .map(|(i, h)| crane_step(model, h).map_err(|e| e.at_step(first_index + i as i64)))
        .collect::<Result<Vec<_>>>()?;
    TabulatedLtv::new(first_index, steps)
}

/// `(y¹, y²) = (ζ¹_{k−4}, c_kᵀ x₁)` with `c_k` from the history-induced `M_k`.
pub fn flat_output_crane(
    model: &CraneModel,
    zeta: &ZetaHistory,
    x: &CraneState,
) -> Result<(f64, f64)> {
    let x3 = x.0[2];
    let heights = [
        zeta.zeta1[0],
        zeta.zeta1[1],
        zeta.zeta1[2],
        zeta.zeta1[3],
        x3,
        x3 + model.ts() * x.0[5],
    ];
    let provider = crane_ltv_provider(model, &heights, -4)?;
    let x1 = x.horizontal();
    let y2 = flat_output_ltv_in::<_, Dd>(&provider, 0, &DVector::from_column_slice(x1.as_slice()))?;
    Ok((zeta.zeta1[0], y2))
}

fn check_window(r: &FlatReference, k: usize) -> Result<()> {
    let n = r.horizon();
    if k > n {
        return Err(Error::Window {
            index: k as i64,
            lo: 0,
            hi: n as i64,
        });
    }
    Ok(())
}

fn assemble(
    model: &CraneModel,
    r: &FlatReference,
    k: usize,
    x1: &DVector<f64>,
    ubar1: f64,
) -> Result<CraneSample> {
    let y1 = &r.y1[k + HEIGHT_SHIFT..];
    let (x3, x6, u2) = param_vertical(y1[0], y1[1], y1[2], model.ts());
    let x = CraneState::from_parts(&Vector4::new(x1[0], x1[1], x1[2], x1[3]), x3, x6);
    let ubar = TransformedInput::new(ubar1, u2);
    let u = invert_input_transform(model, &x, &ubar).map_err(|e| e.at_step(k as i64))?;
    Ok(CraneSample { x, u, ubar })
}

/// `(x_k, u_k, ū_k)` from `y¹[k..=k+9]`, `y²[k..=k+4]`.
pub fn parameterize_crane(model: &CraneModel, r: &FlatReference, k: usize) -> Result<CraneSample> {
    check_window(r, k)?;
    let ki = k as i64;
    let provider = crane_ltv_provider(model, &r.y1[k..k + Y1_WINDOW], ki - 4)?;
    let solver = CanonicalSolver::<_, Dd>::new(&provider, ki..=ki)?;
    let (x1, ubar1) = solver.parameterize(ki, &r.y2[k..k + Y2_WINDOW])?;
    assemble(model, r, k, &x1, ubar1)
}

/// Provider over the full window `[−4, N+3]` of a reference.
pub fn reference_provider(model: &CraneModel, r: &FlatReference) -> Result<TabulatedLtv> {
    crane_ltv_provider(model, &r.y1, -(HEIGHT_SHIFT as i64))
}

/// Indices `j` whose `M_j` enters the parameterization of `k ∈ [0, N]`.
pub fn reachability_range(r: &FlatReference) -> RangeInclusive<i64> {
    0..=(r.horizon() + HEIGHT_SHIFT) as i64
}

/// Rank of every `M_j` used along the reference.
pub fn reference_regularity(model: &CraneModel, r: &FlatReference) -> Result<RegularityReport> {
    check_regularity(&reference_provider(model, r)?, reachability_range(r))
}

/// `parameterize_crane` for every `k ∈ [0, N]`, sharing one provider.
/// Results are bit-identical to the single-step calls.
pub fn parameterize_all(model: &CraneModel, r: &FlatReference) -> Result<Vec<CraneSample>> {
    let provider = reference_provider(model, r)?;
    let n = r.horizon();
    let solver = CanonicalSolver::<_, Dd>::new(&provider, 0..=n as i64)?;
    (0..=n)
        .map(|k| {
            let (x1, ubar1) = solver.parameterize(k as i64, &r.y2[k..k + Y2_WINDOW])?;
            assemble(model, r, k, &x1, ubar1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmersivityReport {
    /// `∂(x + T_s f)/∂(x, u)`, 6×8.
    pub jacobian: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

/// Numerical rank of the Jacobian of the Euler map by central differences.
pub fn check_submersivity(
    model: &CraneModel,
    x: &CraneState,
    u: &ForceInput,
) -> Result<SubmersivityReport> {
    model.euler_step(x, u)?;
    let mut z = DVector::from_iterator(8, x.0.iter().chain(u.0.iter()).copied());
    let mut jac = DMatrix::zeros(6, 8);
    let eval = |z: &DVector<f64>| {
        let x = CraneState::new(z[0], z[1], z[2], z[3], z[4], z[5]);
        model.euler_step(&x, &ForceInput::new(z[6], z[7]))
    };
    for j in 0..8 {
        let z0 = z[j];
        z[j] = z0 + FD_STEP;
        let plus = eval(&z)?;
        z[j] = z0 - FD_STEP;
        let minus = eval(&z)?;
        z[j] = z0;
        jac.set_column(j, &((plus.0 - minus.0) / (2.0 * FD_STEP)));
    }
    let sv = singular_values(&jac);
    Ok(SubmersivityReport {
        rank: rank_by_ratio(&sv, RANK_RATIO_TOL),
        singular_values: sv,
        jacobian: jac,
    })
}

/// `c(h)`: canonical covector of the time-invariant subsystem at rest height `h`.
pub fn rest_covector(model: &CraneModel, h: f64) -> Result<DVector<f64>> {
    let provider = crane_ltv_provider(model, &[h; 6], -4)?;
    let m = reachability_matrix_in::<_, Dd>(&provider, 0)?;
    Ok(lower_vector(&canonical_covector_in(&m)?))
}
