//! Controller canonical form of single-input linear time-variant
//! discrete-time systems `x_{k+1} = A_k x_k + b_k u_k`.
//!
//! The flat output is `y_k = c_kᵀ x_k` with `c_kᵀ M_k = e_nᵀ`, where
//!
//! ```text
//! M_k = [b_{k-1}, A_{k-1} b_{k-2}, …, A_{k-1}⋯A_{k-n+1} b_{k-n}]
//! ```
//!
//! and the transform `x̄_k = T_k⁻¹ x_k` stacks `c_kᵀ, c_{k+1}ᵀA_k, …`.
//! Every computation names the index range it reads; providers reject
//! indices outside their window.
//!
//! The routines are generic over [`Real`]: `f64` for everyday use and
//! [`Dd`](crate::linalg::Dd) where the parameterization is evaluated on
//! nearly constant flat-output windows and `f64` cancellation dominates.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    condition_1, lift_matrix, lift_vector, lower_matrix, lower_vector, rank_by_ratio,
    singular_values, Lu, Real,
};

/// `σ_min / σ_max` below which `M_k` counts as rank deficient.
pub const RANK_RATIO_TOL: f64 = 1e-10;

/// Relative residual allowed for `c_kᵀ M_k = e_nᵀ`.
pub const COVECTOR_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LtvStep {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// `k ↦ (A_k, b_k)` on a contiguous window of indices.
pub trait LtvProvider {
    fn dim(&self) -> usize;

    /// Inclusive index window.
    fn window(&self) -> RangeInclusive<i64>;

    fn step(&self, k: i64) -> Result<&LtvStep>;

    fn require(&self, needed: RangeInclusive<i64>) -> Result<()> {
        let w = self.window();
        for k in [*needed.start(), *needed.end()] {
            if !w.contains(&k) {
                return Err(Error::Window {
                    index: k,
                    lo: *w.start(),
                    hi: *w.end(),
                });
            }
        }
        Ok(())
    }
}

fn window_error(k: i64, w: &RangeInclusive<i64>) -> Error {
    Error::Window {
        index: k,
        lo: *w.start(),
        hi: *w.end(),
    }
}

fn check_step(step: &LtvStep, n: usize) -> Result<()> {
    if step.a.shape() != (n, n) || step.b.len() != n {
        return Err(Error::invalid(
            "ltv step",
            format!("expected dimension {n}"),
        ));
    }
    if step.a.iter().chain(step.b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("ltv step", "non-finite entry"));
    }
    Ok(())
}

/// Samples stored for consecutive indices starting at `first`.
#[derive(Debug, Clone)]
pub struct TabulatedLtv {
    n: usize,
    first: i64,
    steps: Vec<LtvStep>,
}

impl TabulatedLtv {
    pub fn new(first: i64, steps: Vec<LtvStep>) -> Result<Self> {
        let n = steps
            .first()
            .map(|s| s.b.len())
            .ok_or_else(|| Error::invalid("ltv provider", "empty"))?;
        for s in &steps {
            check_step(s, n)?;
        }
        Ok(Self { n, first, steps })
    }

    pub fn steps(&self) -> &[LtvStep] {
        &self.steps
    }
}

impl LtvProvider for TabulatedLtv {
    fn dim(&self) -> usize {
        self.n
    }

    fn window(&self) -> RangeInclusive<i64> {
        self.first..=self.first + self.steps.len() as i64 - 1
    }

    fn step(&self, k: i64) -> Result<&LtvStep> {
        let w = self.window();
        if !w.contains(&k) {
            return Err(window_error(k, &w));
        }
        Ok(&self.steps[(k - self.first) as usize])
    }
}

/// Time-invariant pair on a finite window.
#[derive(Debug, Clone)]
pub struct ConstantLtv {
    step: LtvStep,
    window: RangeInclusive<i64>,
}

impl ConstantLtv {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, window: RangeInclusive<i64>) -> Result<Self> {
        let step = LtvStep { a, b };
        check_step(&step, step.b.len())?;
        Ok(Self { step, window })
    }
}

impl LtvProvider for ConstantLtv {
    fn dim(&self) -> usize {
        self.step.b.len()
    }

    fn window(&self) -> RangeInclusive<i64> {
        self.window.clone()
    }

    fn step(&self, k: i64) -> Result<&LtvStep> {
        if !self.window.contains(&k) {
            return Err(window_error(k, &self.window));
        }
        Ok(&self.step)
    }
}

/// `M_k` in the working precision.
pub fn reachability_matrix_in<P: LtvProvider + ?Sized, T: Real>(
    p: &P,
    k: i64,
) -> Result<DMatrix<T>> {
    let n = p.dim() as i64;
    p.require(k - n..=k - 1)?;
    let mut m = DMatrix::from_element(n as usize, n as usize, T::zero());
    for j in 1..=n {
        let mut v: DVector<T> = lift_vector(&p.step(k - j)?.b);
        for i in k - j + 1..k {
            v = lift_matrix::<T>(&p.step(i)?.a) * v;
        }
        m.set_column((j - 1) as usize, &v);
    }
    Ok(m)
}

/// `M_k`; reads indices `[k−n, k−1]`.
pub fn reachability_matrix<P: LtvProvider + ?Sized>(p: &P, k: i64) -> Result<DMatrix<f64>> {
    reachability_matrix_in::<P, f64>(p, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityEntry {
    pub k: i64,
    pub rank: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl RegularityEntry {
    pub fn ratio(&self) -> f64 {
        self.sigma_min / self.sigma_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub n: usize,
    pub entries: Vec<RegularityEntry>,
}

impl RegularityReport {
    pub fn all_full_rank(&self) -> bool {
        self.entries.iter().all(|e| e.rank == self.n)
    }

    pub fn rank_failures(&self) -> Vec<i64> {
        self.entries
            .iter()
            .filter(|e| e.rank < self.n)
            .map(|e| e.k)
            .collect()
    }

    pub fn min_sigma(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.sigma_min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_ratio(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.ratio())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn regularity_entry(k: i64, m: &DMatrix<f64>) -> RegularityEntry {
    let sv = singular_values(m);
    RegularityEntry {
        k,
        rank: rank_by_ratio(&sv, RANK_RATIO_TOL),
        sigma_min: *sv.last().unwrap_or(&0.0),
        sigma_max: *sv.first().unwrap_or(&0.0),
    }
}

/// Rank of `M_k` over `ks`; reads `[ks.start − n, ks.end − 1]`.
pub fn check_regularity<P: LtvProvider + ?Sized>(
    p: &P,
    ks: RangeInclusive<i64>,
) -> Result<RegularityReport> {
    let entries = ks
        .map(|k| reachability_matrix(p, k).map(|m| regularity_entry(k, &m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RegularityReport {
        n: p.dim(),
        entries,
    })
}

/// `c` with `cᵀ M = e_nᵀ` in the working precision.
pub fn canonical_covector_in<T: Real>(m: &DMatrix<T>) -> Result<DVector<T>> {
    let n = m.nrows();
    let singular = || Error::SingularMatrix {
        context: "reachability matrix",
        condition: condition_1(m),
    };
    let lu = Lu::new(m).ok_or_else(singular)?;
    let mut e = DVector::from_element(n, T::zero());
    e[n - 1] = T::one();
    let c = lu.solve_transpose(&e);
    let residual = lower_vector(&(m.transpose() * &c - &e)).amax();
    let scale = lower_vector(&c).norm() * lower_matrix(m).norm();
    if !residual.is_finite() || residual > COVECTOR_RESIDUAL_TOL * scale.max(1.0) {
        return Err(singular());
    }
    Ok(c)
}

/// Solves `cᵀ M = e_nᵀ` with a pivoted LU factorization.
pub fn canonical_covector(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    canonical_covector_in(m)
}

/// Canonical data at one index, in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalData {
    pub k: i64,
    pub c: DVector<f64>,
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// Companion coefficients `a_{0,k} … a_{n−1,k}`.
    pub a: DVector<f64>,
}

/// Canonical data in the working precision.
#[derive(Debug, Clone)]
pub struct CanonicalDataIn<T: Real> {
    pub k: i64,
    pub c: DVector<T>,
    pub t: DMatrix<T>,
    pub t_inv: DMatrix<T>,
    pub a: DVector<T>,
}

impl<T: Real> CanonicalDataIn<T> {
    pub fn lower(&self) -> CanonicalData {
        CanonicalData {
            k: self.k,
            c: lower_vector(&self.c),
            t: lower_matrix(&self.t),
            t_inv: lower_matrix(&self.t_inv),
            a: lower_vector(&self.a),
        }
    }
}

/// Precomputes the covectors needed for indices `ks` and serves canonical
/// data, flat outputs and parameterizations there.
///
/// For `ks = [lo, hi]` the covectors `c_lo … c_{hi+n}` are computed, which
/// reads provider indices `[lo − n, hi + n − 1]`.
pub struct CanonicalSolver<'p, P: LtvProvider + ?Sized, T: Real = f64> {
    n: usize,
    lo: i64,
    hi: i64,
    first_step: i64,
    steps: Vec<(DMatrix<T>, DVector<T>)>,
    covectors: Vec<DVector<T>>,
    provider: &'p P,
}

impl<'p, P: LtvProvider + ?Sized, T: Real> CanonicalSolver<'p, P, T> {
    pub fn new(provider: &'p P, ks: RangeInclusive<i64>) -> Result<Self> {
        let n = provider.dim();
        let (lo, hi) = (*ks.start(), *ks.end());
        if hi < lo {
            return Err(Error::invalid("index range", "empty"));
        }
        let ni = n as i64;
        let first_step = lo - ni;
        provider.require(first_step..=hi + ni - 1)?;
        let steps = (first_step..=hi + ni - 1)
            .map(|i| {
                provider
                    .step(i)
                    .map(|s| (lift_matrix::<T>(&s.a), lift_vector::<T>(&s.b)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut solver = Self {
            n,
            lo,
            hi,
            first_step,
            steps,
            covectors: Vec::new(),
            provider,
        };
        solver.covectors = (lo..=hi + ni)
            .map(|j| {
                let m = solver.reachability(j);
                canonical_covector_in(&m).map_err(|e| e.at_step(j))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(solver)
    }

    pub fn provider(&self) -> &'p P {
        self.provider
    }

    pub fn range(&self) -> RangeInclusive<i64> {
        self.lo..=self.hi
    }

    fn a(&self, i: i64) -> &DMatrix<T> {
        &self.steps[(i - self.first_step) as usize].0
    }

    fn b(&self, i: i64) -> &DVector<T> {
        &self.steps[(i - self.first_step) as usize].1
    }

    fn reachability(&self, k: i64) -> DMatrix<T> {
        let n = self.n as i64;
        let mut m = DMatrix::from_element(self.n, self.n, T::zero());
        for j in 1..=n {
            let mut v = self.b(k - j).clone();
            for i in k - j + 1..k {
                v = self.a(i) * v;
            }
            m.set_column((j - 1) as usize, &v);
        }
        m
    }

    fn check_index(&self, k: i64) -> Result<()> {
        if k < self.lo || k > self.hi {
            return Err(Error::Window {
                index: k,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    /// `c_j` for `j ∈ [lo, hi + n]`.
    pub fn covector(&self, j: i64) -> Result<&DVector<T>> {
        let top = self.hi + self.n as i64;
        if j < self.lo || j > top {
            return Err(Error::Window {
                index: j,
                lo: self.lo,
                hi: top,
            });
        }
        Ok(&self.covectors[(j - self.lo) as usize])
    }

    /// Row `i` of `T_k⁻¹`: `c_{k+i}ᵀ A_{k+i−1} ⋯ A_k`.
    fn transform_row(&self, k: i64, i: i64) -> DVector<T> {
        let mut r = self.covectors[(k + i - self.lo) as usize].clone();
        for j in (k..k + i).rev() {
            r = self.a(j).tr_mul(&r);
        }
        r
    }

    fn inverse_transform(&self, k: i64) -> DMatrix<T> {
        let mut t_inv = DMatrix::from_element(self.n, self.n, T::zero());
        for i in 0..self.n {
            t_inv.set_row(i, &self.transform_row(k, i as i64).transpose());
        }
        t_inv
    }

    pub fn data_in(&self, k: i64) -> Result<CanonicalDataIn<T>> {
        self.check_index(k)?;
        let t_inv = self.inverse_transform(k);
        let lu = Lu::new(&t_inv).ok_or_else(|| {
            Error::SingularMatrix {
                context: "canonical transform",
                condition: condition_1(&t_inv),
            }
            .at_step(k)
        })?;
        let t = lu.inverse();
        // last row of T_{k+1}⁻¹ is c_{k+n}ᵀ A_{k+n−1} ⋯ A_{k+1}
        let last = self.transform_row(k + 1, self.n as i64 - 1);
        let row = (self.a(k).tr_mul(&last)).transpose() * &t;
        let a = -row.transpose();
        Ok(CanonicalDataIn {
            k,
            c: self.covectors[(k - self.lo) as usize].clone(),
            t,
            t_inv,
            a,
        })
    }

    pub fn data(&self, k: i64) -> Result<CanonicalData> {
        Ok(self.data_in(k)?.lower())
    }

    /// `y_k = c_kᵀ x_k`.
    pub fn flat_output(&self, k: i64, x: &DVector<f64>) -> Result<f64> {
        self.check_index(k)?;
        let c = self.covector(k)?;
        Ok(c.dot(&lift_vector::<T>(x)).to_f64())
    }

    /// `(x_k, u_k)` from the window `y_k … y_{k+n}`.
    pub fn parameterize(&self, k: i64, y: &[f64]) -> Result<(DVector<f64>, f64)> {
        if y.len() != self.n + 1 {
            return Err(Error::ReferenceLength {
                what: "flat output window",
                needed: self.n + 1,
                got: y.len(),
            });
        }
        let d = self.data_in(k)?;
        let w = DVector::from_iterator(self.n, y[..self.n].iter().map(|&v| T::from_f64(v)));
        let x = &d.t * &w;
        let u = T::from_f64(y[self.n]) + d.a.dot(&w);
        Ok((lower_vector(&x), u.to_f64()))
    }
}

/// Canonical data at `k`; reads `[k − n, k + n − 1]`.
pub fn canonical_transform<P: LtvProvider + ?Sized>(p: &P, k: i64) -> Result<CanonicalData> {
    CanonicalSolver::<P, f64>::new(p, k..=k)?.data(k)
}

/// `c_kᵀ x_k`; reads `[k − n, k − 1]`.
pub fn flat_output_ltv<P: LtvProvider + ?Sized>(p: &P, k: i64, x: &DVector<f64>) -> Result<f64> {
    flat_output_ltv_in::<P, f64>(p, k, x)
}

/// `c_kᵀ x_k` evaluated in the working precision.
pub fn flat_output_ltv_in<P: LtvProvider + ?Sized, T: Real>(
    p: &P,
    k: i64,
    x: &DVector<f64>,
) -> Result<f64> {
    let m = reachability_matrix_in::<P, T>(p, k)?;
    let c = canonical_covector_in(&m).map_err(|e| e.at_step(k))?;
    Ok(c.dot(&lift_vector::<T>(x)).to_f64())
}

/// `x_k = T_k (y_k … y_{k+n−1})`, `u_k = y_{k+n} + Σ a_{i,k} y_{k+i}`.
pub fn parameterize_ltv<P: LtvProvider + ?Sized>(
    p: &P,
    k: i64,
    y: &[f64],
) -> Result<(DVector<f64>, f64)> {
    CanonicalSolver::<P, f64>::new(p, k..=k)?.parameterize(k, y)
}
