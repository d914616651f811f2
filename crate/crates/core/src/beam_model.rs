//! Finite-dimensional single mast stacker crane.
//!
//! Generalized coordinates are `q¹` (driving unit position), `q²` (modal
//! coordinate of the one-term Rayleigh-Ritz beam deflection
//! `w(z,t) = Φ(z) q²(t)`) and `q³` (lifting unit height). The equations of
//! motion are `M(q) q̈ + C(q, q̇) = G u` with `u = (F₁, F₂)`.

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition estimate above which `M(q)` is treated as singular.
pub const MASS_MATRIX_MAX_CONDITION: f64 = 1e12;

const NORMALIZATION_TOL: f64 = 1e-12;

/// Polynomial mode shape `Φ(z) = Σ cᵢ (z/L)ⁱ`.
///
/// A clamped base needs `c₀ = c₁ = 0`, the tip normalization `Φ(L) = 1`
/// needs `Σ cᵢ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AnsatzShape {
    coeffs: Vec<f64>,
}

impl AnsatzShape {
    /// Static tip-load deflection of a clamped-free beam, `(3Lz² − z³)/(2L³)`.
    pub fn clamped_cubic() -> Self {
        Self {
            coeffs: vec![0.0, 0.0, 1.5, -0.5],
        }
    }

    pub fn from_coefficients(coeffs: Vec<f64>) -> Result<Self> {
        let field = "ansatz";
        if coeffs.len() < 3 {
            return Err(Error::invalid(field, "needs at least a quadratic term"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(field, "non-finite coefficient"));
        }
        if coeffs[0] != 0.0 || coeffs[1] != 0.0 {
            return Err(Error::invalid(
                field,
                "clamped base requires Φ(0) = Φ'(0) = 0 (c0 = c1 = 0)",
            ));
        }
        let tip: f64 = coeffs.iter().sum();
        if (tip - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(
                field,
                format!("normalization requires Φ(L) = 1, got {tip}"),
            ));
        }
        let shape = Self { coeffs };
        if shape.curvature_integral() <= 0.0 {
            return Err(Error::invalid(field, "zero curvature gives no stiffness"));
        }
        Ok(shape)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `(Φ, dΦ/dξ, d²Φ/dξ²)` at the normalized coordinate `ξ = z/L`.
    fn eval_normalized(&self, xi: f64) -> (f64, f64, f64) {
        let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            let fi = i as f64;
            p = p * xi + c;
            if i >= 1 {
                dp = dp * xi + fi * c;
            }
            if i >= 2 {
                ddp = ddp * xi + fi * (fi - 1.0) * c;
            }
        }
        (p, dp, ddp)
    }

    /// `∫₀¹ Φ dξ`
    fn integral(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c / (i + 1) as f64)
            .sum()
    }

    /// `∫₀¹ Φ² dξ`
    fn square_integral(&self) -> f64 {
        let mut s = 0.0;
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in self.coeffs.iter().enumerate() {
                s += a * b / (i + j + 1) as f64;
            }
        }
        s
    }

    /// `∫₀¹ (d²Φ/dξ²)² dξ`
    fn curvature_integral(&self) -> f64 {
        let mut s = 0.0;
        for (i, a) in self.coeffs.iter().enumerate().skip(2) {
            for (j, b) in self.coeffs.iter().enumerate().skip(2) {
                let w = (i * (i - 1) * j * (j - 1)) as f64;
                s += w * a * b / (i + j - 3) as f64;
            }
        }
        s
    }
}

impl Default for AnsatzShape {
    fn default() -> Self {
        Self::clamped_cubic()
    }
}

impl TryFrom<Vec<f64>> for AnsatzShape {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_coefficients(v)
    }
}

impl From<AnsatzShape> for Vec<f64> {
    fn from(s: AnsatzShape) -> Self {
        s.coeffs
    }
}

/// Model constants. JSON field names follow the usual symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    /// Driving unit mass [kg].
    pub m_w: f64,
    /// Lifting unit mass [kg].
    pub m_h: f64,
    /// Beam mass per length [kg/m].
    #[serde(rename = "rhoA")]
    pub rho_a: f64,
    /// Flexural rigidity [N·m²].
    #[serde(rename = "EI")]
    pub ei: f64,
    /// Mast length [m].
    #[serde(rename = "L")]
    pub length: f64,
    /// Gravitational acceleration [m/s²].
    pub g: f64,
    /// Sampling time [s].
    #[serde(rename = "T_s")]
    pub ts: f64,
    pub ansatz: AnsatzShape,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            m_w: 450.0,
            m_h: 200.0,
            rho_a: 15.0,
            // first mast mode roughly 0.3 Hz to 0.7 Hz over the lift range
            ei: 2.0e5,
            length: 10.0,
            g: 9.81,
            ts: 0.05,
            ansatz: AnsatzShape::clamped_cubic(),
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_w", self.m_w),
            ("m_h", self.m_h),
            ("rhoA", self.rho_a),
            ("EI", self.ei),
            ("L", self.length),
            ("T_s", self.ts),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::invalid(
                "g",
                format!("must be finite and >= 0, got {}", self.g),
            ));
        }
        Ok(())
    }
}

/// Which Coriolis/centrifugal vector enters the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoriolisVariant {
    /// Closed-form `C(q, q̇)` whose first row carries a `2 m_h q̇³ q² Φ'`
    /// term in place of the Christoffel value.
    Printed,
    /// Christoffel construction from `M(q)` and the potential energy.
    #[default]
    Lagrange,
}

impl std::str::FromStr for CoriolisVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(Self::Printed),
            "lagrange" => Ok(Self::Lagrange),
            other => Err(Error::invalid(
                "variant",
                format!("expected `printed` or `lagrange`, got `{other}`"),
            )),
        }
    }
}

/// `x = (q¹, q², q³, v¹, v², v³)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CraneState(pub Vector6<f64>);

impl CraneState {
    pub fn new(q1: f64, q2: f64, q3: f64, v1: f64, v2: f64, v3: f64) -> Self {
        Self(Vector6::new(q1, q2, q3, v1, v2, v3))
    }

    /// Straight beam, no motion.
    pub fn rest(q1: f64, q3: f64) -> Self {
        Self::new(q1, 0.0, q3, 0.0, 0.0, 0.0)
    }

    pub fn q(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into()
    }

    pub fn v(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into()
    }

    /// Horizontal subsystem `(x¹, x², x⁴, x⁵)`.
    pub fn horizontal(&self) -> nalgebra::Vector4<f64> {
        nalgebra::Vector4::new(self.0[0], self.0[1], self.0[3], self.0[4])
    }

    pub fn from_parts(horizontal: &nalgebra::Vector4<f64>, x3: f64, x6: f64) -> Self {
        Self::new(
            horizontal[0],
            horizontal[1],
            x3,
            horizontal[2],
            horizontal[3],
            x6,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// `u = (F₁, F₂)` [N].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceInput(pub Vector2<f64>);

impl ForceInput {
    pub fn new(f1: f64, f2: f64) -> Self {
        Self(Vector2::new(f1, f2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeValue {
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
}

/// Acceleration as an affine function of the input: `q̈ = drift + gain·u`.
#[derive(Debug, Clone, Copy)]
pub struct AffineAcceleration {
    pub drift: Vector3<f64>,
    pub gain: Matrix3x2<f64>,
}

/// Printed and Lagrange Coriolis vectors side by side.
#[derive(Debug, Clone, Copy)]
pub struct CoriolisDiscrepancy {
    pub printed: Vector3<f64>,
    pub lagrange: Vector3<f64>,
    /// `lagrange − printed`
    pub difference: Vector3<f64>,
    /// Difference in the scalar `C₁` alone.
    pub c1_delta: f64,
    /// What is left of `difference` after removing `c1_delta·(1, Φ, q²Φ')`,
    /// i.e. the part not explained by the `C₁` entry.
    pub unexplained: Vector3<f64>,
}

fn input_matrix() -> Matrix3x2<f64> {
    Matrix3x2::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
}

/// Validated parameters plus the derived modal constants.
#[derive(Debug, Clone)]
pub struct CraneModel {
    params: PhysicalParams,
    variant: CoriolisVariant,
    m11: f64,
    m12: f64,
    m22: f64,
    k_el: f64,
}

impl CraneModel {
    pub fn new(params: PhysicalParams) -> Result<Self> {
        params.validate()?;
        let l = params.length;
        let shape = &params.ansatz;
        let m11 = params.m_w + params.rho_a * l + params.m_h;
        let m12 = params.rho_a * l * shape.integral();
        let m22 = params.rho_a * l * shape.square_integral();
        // Φ''(z) = Φ_ξξ / L², dz = L dξ
        let k_el = params.ei * shape.curvature_integral() / l.powi(3);
        Ok(Self {
            params,
            variant: CoriolisVariant::default(),
            m11,
            m12,
            m22,
            k_el,
        })
    }

    pub fn with_variant(mut self, variant: CoriolisVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn variant(&self) -> CoriolisVariant {
        self.variant
    }

    pub fn ts(&self) -> f64 {
        self.params.ts
    }

    pub fn m11(&self) -> f64 {
        self.m11
    }

    pub fn m12(&self) -> f64 {
        self.m12
    }

    pub fn m22(&self) -> f64 {
        self.m22
    }

    /// `EI ∫₀ᴸ (Φ'')² dz` [N/m]
    pub fn k_el(&self) -> f64 {
        self.k_el
    }

    /// Force input holding a rest position against gravity.
    pub fn holding_force(&self) -> ForceInput {
        ForceInput::new(0.0, self.params.m_h * self.params.g)
    }

    fn check_height(&self, z: f64) -> Result<()> {
        let l = self.params.length;
        if !(0.0..=l).contains(&z) {
            return Err(Error::Domain {
                what: "q3",
                value: z,
                lo: 0.0,
                hi: l,
            });
        }
        Ok(())
    }

    /// `(Φ, ∂zΦ, ∂²zΦ)` at `z ∈ [0, L]`.
    pub fn eval_ansatz(&self, z: f64) -> Result<ShapeValue> {
        self.check_height(z)?;
        let l = self.params.length;
        let (p, dp, ddp) = self.params.ansatz.eval_normalized(z / l);
        Ok(ShapeValue {
            phi: p,
            dphi: dp / l,
            ddphi: ddp / (l * l),
        })
    }

    pub fn mass_matrix(&self, q: &Vector3<f64>) -> Result<Matrix3<f64>> {
        let s = self.eval_ansatz(q[2])?;
        let mh = self.params.m_h;
        let q2 = q[1];
        let m12 = self.m12 + mh * s.phi;
        let m13 = mh * q2 * s.dphi;
        let m22 = self.m22 + mh * s.phi * s.phi;
        let m23 = mh * q2 * s.phi * s.dphi;
        let m33 = mh + mh * (q2 * s.dphi).powi(2);
        Ok(Matrix3::new(
            self.m11, m12, m13, //
            m12, m22, m23, //
            m13, m23, m33,
        ))
    }

    /// `∂M/∂qˡ` for `l = 1, 2, 3` (the first is zero).
    pub fn mass_matrix_partials(&self, q: &Vector3<f64>) -> Result<[Matrix3<f64>; 3]> {
        let s = self.eval_ansatz(q[2])?;
        let mh = self.params.m_h;
        let q2 = q[1];
        let (p, dp, ddp) = (s.phi, s.dphi, s.ddphi);

        let d13 = mh * dp;
        let d23 = mh * p * dp;
        let d33 = 2.0 * mh * q2 * dp * dp;
        let by_q2 = Matrix3::new(0.0, 0.0, d13, 0.0, 0.0, d23, d13, d23, d33);

        let e12 = mh * dp;
        let e13 = mh * q2 * ddp;
        let e22 = 2.0 * mh * p * dp;
        let e23 = mh * q2 * (dp * dp + p * ddp);
        let e33 = 2.0 * mh * q2 * q2 * dp * ddp;
        let by_q3 = Matrix3::new(0.0, e12, e13, e12, e22, e23, e13, e23, e33);

        Ok([Matrix3::zeros(), by_q2, by_q3])
    }

    /// Cholesky succeeds.
    pub fn is_positive_definite(m: &Matrix3<f64>) -> bool {
        m.cholesky().is_some()
    }

    pub fn kinetic_energy(&self, q: &Vector3<f64>, v: &Vector3<f64>) -> Result<f64> {
        Ok(0.5 * v.dot(&(self.mass_matrix(q)? * v)))
    }

    /// `½ k_el (q²)² + m_h g q³`
    pub fn potential_energy(&self, q: &Vector3<f64>) -> f64 {
        0.5 * self.k_el * q[1] * q[1] + self.params.m_h * self.params.g * q[2]
    }

    pub fn potential_gradient(&self, q: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(0.0, self.k_el * q[1], self.params.m_h * self.params.g)
    }

    pub fn coriolis_printed(&self, q: &Vector3<f64>, v: &Vector3<f64>) -> Result<Vector3<f64>> {
        let s = self.eval_ansatz(q[2])?;
        let mh = self.params.m_h;
        let q2 = q[1];
        let c1 = mh * v[2] * v[2] * q2 * s.ddphi + 2.0 * mh * v[2] * q2 * s.dphi;
        Ok(Vector3::new(
            c1,
            q2 * self.k_el + s.phi * c1,
            c1 * q2 * s.dphi + mh * self.params.g,
        ))
    }

    /// `Ṁ v − ½ ∂q(vᵀ M v) + ∂q V` via Christoffel symbols of the first kind.
    pub fn coriolis_lagrange(&self, q: &Vector3<f64>, v: &Vector3<f64>) -> Result<Vector3<f64>> {
        let dm = self.mass_matrix_partials(q)?;
        let mut c = self.potential_gradient(q);
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    let gamma = 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]);
                    acc += gamma * v[j] * v[k];
                }
            }
            c[i] += acc;
        }
        Ok(c)
    }

    pub fn coriolis(
        &self,
        q: &Vector3<f64>,
        v: &Vector3<f64>,
        variant: CoriolisVariant,
    ) -> Result<Vector3<f64>> {
        match variant {
            CoriolisVariant::Printed => self.coriolis_printed(q, v),
            CoriolisVariant::Lagrange => self.coriolis_lagrange(q, v),
        }
    }

    pub fn coriolis_discrepancy(
        &self,
        q: &Vector3<f64>,
        v: &Vector3<f64>,
    ) -> Result<CoriolisDiscrepancy> {
        let printed = self.coriolis_printed(q, v)?;
        let lagrange = self.coriolis_lagrange(q, v)?;
        let s = self.eval_ansatz(q[2])?;
        let difference = lagrange - printed;
        let c1_delta = difference[0];
        let pattern = Vector3::new(1.0, s.phi, q[1] * s.dphi);
        Ok(CoriolisDiscrepancy {
            printed,
            lagrange,
            difference,
            c1_delta,
            unexplained: difference - pattern * c1_delta,
        })
    }

    fn inverse_mass(&self, q: &Vector3<f64>) -> Result<Matrix3<f64>> {
        let m = self.mass_matrix(q)?;
        let inv = m.try_inverse().ok_or(Error::SingularMatrix {
            context: "mass matrix",
            condition: f64::INFINITY,
        })?;
        let cond = m.abs().row_sum().max() * inv.abs().row_sum().max();
        if !cond.is_finite() || cond > MASS_MATRIX_MAX_CONDITION {
            return Err(Error::SingularMatrix {
                context: "mass matrix",
                condition: cond,
            });
        }
        Ok(inv)
    }

    fn check_state(&self, x: &CraneState) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::invalid("state", "non-finite entry"));
        }
        self.check_height(x.0[2])
    }

    /// `q̈ = −M⁻¹C + M⁻¹G u` split into drift and input gain.
    pub fn acceleration_map(
        &self,
        x: &CraneState,
        variant: CoriolisVariant,
    ) -> Result<AffineAcceleration> {
        self.check_state(x)?;
        let (q, v) = (x.q(), x.v());
        let inv = self.inverse_mass(&q)?;
        let c = self.coriolis(&q, &v, variant)?;
        Ok(AffineAcceleration {
            drift: -(inv * c),
            gain: inv * input_matrix(),
        })
    }

    /// `f(x, u)` with the model's configured Coriolis variant.
    pub fn dynamics_rhs(&self, x: &CraneState, u: &ForceInput) -> Result<Vector6<f64>> {
        self.dynamics_rhs_with(x, u, self.variant)
    }

    pub fn dynamics_rhs_with(
        &self,
        x: &CraneState,
        u: &ForceInput,
        variant: CoriolisVariant,
    ) -> Result<Vector6<f64>> {
        if !u.0.iter().all(|f| f.is_finite()) {
            return Err(Error::invalid("input", "non-finite force"));
        }
        self.check_state(x)?;
        let (q, v) = (x.q(), x.v());
        let inv = self.inverse_mass(&q)?;
        let c = self.coriolis(&q, &v, variant)?;
        let acc = inv * (input_matrix() * u.0 - c);
        let mut f = Vector6::zeros();
        f.fixed_rows_mut::<3>(0).copy_from(&v);
        f.fixed_rows_mut::<3>(3).copy_from(&acc);
        Ok(f)
    }

    /// Explicit Euler map `x + T_s f(x, u)`.
    pub fn euler_step(&self, x: &CraneState, u: &ForceInput) -> Result<CraneState> {
        Ok(CraneState(x.0 + self.dynamics_rhs(x, u)? * self.params.ts))
    }

    /// `(x¹ + Φ(x³)x², x¹(m22 − m12 Φ(x³)))`; evaluation only.
    pub fn configuration_flat_output(&self, x: &CraneState) -> Result<Vector2<f64>> {
        let s = self.eval_ansatz(x.0[2])?;
        Ok(Vector2::new(
            x.0[0] + s.phi * x.0[1],
            x.0[0] * (self.m22 - self.m12 * s.phi),
        ))
    }

    pub fn total_energy(&self, x: &CraneState) -> Result<f64> {
        let q = x.q();
        Ok(self.kinetic_energy(&q, &x.v())? + self.potential_energy(&q))
    }
}
