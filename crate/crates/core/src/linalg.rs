//! Small dense linear algebra shared by the canonical-form machinery.
//!
//! The canonical transform is evaluated either in `f64` or in double-double
//! arithmetic ([`Dd`]); everything here is generic over [`Real`] so both
//! paths run the same code. Singular values are only ever needed in `f64`.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use num_traits::{Float, NumAssign};

pub use twofloat::TwoFloat as Dd;

/// Scalar usable by the generic canonical-form routines.
pub trait Real: Float + NumAssign + Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Quotient to working precision.
    #[inline]
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for Dd {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Dd::from(v)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    /// Long division with three quotient digits. The `Div` impl of
    /// `TwoFloat` forms its reciprocal residual without a fused
    /// multiply-add and is only accurate to `f64` precision.
    fn quot(self, rhs: Self) -> Self {
        let d = rhs.hi();
        let q1 = self.hi() / d;
        let r = self - rhs * q1;
        let q2 = r.hi() / d;
        let r = r - rhs * q2;
        let q3 = r.hi() / d;
        Dd::new_add(q1, q2) + q3
    }
}

pub fn lift_matrix<T: Real>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::from_f64)
}

pub fn lift_vector<T: Real>(v: &DVector<f64>) -> DVector<T> {
    v.map(T::from_f64)
}

pub fn lower_matrix<T: Real>(m: &DMatrix<T>) -> DMatrix<f64> {
    m.map(|x| x.to_f64())
}

pub fn lower_vector<T: Real>(v: &DVector<T>) -> DVector<f64> {
    v.map(|x| x.to_f64())
}

/// LU factorization with partial (row) pivoting, `P A = L U` packed in place.
#[derive(Debug, Clone)]
pub struct Lu<T: Real> {
    lu: DMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Returns `None` when an exactly zero pivot is met.
    pub fn new(a: &DMatrix<T>) -> Option<Self> {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = lu[(col, col)].abs();
            for r in col + 1..n {
                let v = lu[(r, col)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return None;
            }
            if piv != col {
                lu.swap_rows(piv, col);
                perm.swap(piv, col);
            }
            let d = lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)].quot(d);
                lu[(r, col)] = f;
                for c in col + 1..n {
                    let t = lu[(col, c)];
                    lu[(r, c)] -= f * t;
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.lu.nrows();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[(i, j)] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[(i, j)] * x[j];
                x[i] -= t;
            }
            x[i] = x[i].quot(self.lu[(i, i)]);
        }
        x
    }

    /// Solves `xᵀ A = bᵀ`, i.e. `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.lu.nrows();
        // Aᵀ = Uᵀ Lᵀ P
        let mut z = b.clone();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[(j, i)] * z[j];
                z[i] -= t;
            }
            z[i] = z[i].quot(self.lu[(i, i)]);
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[(j, i)] * z[j];
                z[i] -= t;
            }
        }
        let mut x = DVector::from_element(n, T::zero());
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<T> {
        let n = self.lu.nrows();
        let mut inv = DMatrix::from_element(n, n, T::zero());
        for c in 0..n {
            let mut e = DVector::from_element(n, T::zero());
            e[c] = T::one();
            inv.set_column(c, &self.solve(&e));
        }
        inv
    }
}

pub fn norm1<T: Real>(a: &DMatrix<T>) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|v| v.abs().to_f64()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁`; infinite when the factorization fails.
pub fn condition_1<T: Real>(a: &DMatrix<T>) -> f64 {
    match Lu::new(a) {
        Some(lu) => norm1(a) * norm1(&lu.inverse()),
        None => f64::INFINITY,
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank: singular values with `σ / σ_max < ratio_tol` are dropped.
pub fn rank_by_ratio(sv: &[f64], ratio_tol: f64) -> usize {
    match sv.first() {
        Some(&max) if max > 0.0 => sv.iter().filter(|&&s| s / max >= ratio_tol).count(),
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, -1.0, 3.0, 4.0, 0.5, -2.0])
    }

    #[test]
    fn solve_and_transpose_solve() {
        let a = sample();
        let lu = Lu::new(&a).unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.25]);
        let x = lu.solve(&b);
        assert!((&a * &x - &b).norm() < 1e-13);
        let y = lu.solve_transpose(&b);
        assert!((a.transpose() * &y - &b).norm() < 1e-13);
        let inv = lu.inverse();
        assert!((&a * inv - DMatrix::identity(3, 3)).norm() < 1e-13);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(Lu::new(&a).is_none());
        assert!(condition_1(&a).is_infinite());
    }

    #[test]
    fn double_double_resolves_cancellation() {
        // Hilbert system with a right-hand side exact in double-double.
        let n = 8;
        let h = DMatrix::from_fn(n, n, |i, j| 1.0 / (i + j + 1) as f64);
        let ones = DVector::from_element(n, 1.0);
        let hdd: DMatrix<Dd> = lift_matrix(&h);
        let bdd = &hdd * lift_vector::<Dd>(&ones);
        let x64 = Lu::new(&h).unwrap().solve(&lower_vector(&bdd));
        let xdd = Lu::new(&hdd).unwrap().solve(&bdd);
        let err64 = (x64 - &ones).amax();
        let errdd = (lower_vector(&xdd) - &ones).amax();
        assert!(errdd < err64 * 1e-3, "dd {errdd:e} vs f64 {err64:e}");
    }

    #[test]
    fn double_double_quotient() {
        let third = Dd::from(1.0).quot(Dd::from(3.0));
        assert!(third.lo() != 0.0);
        let r = third * Dd::from(3.0) - Dd::from(1.0);
        assert!(r.hi().abs() < 1e-31, "{:e}", r.hi());
        let a = Dd::new_add(2.0, 1e-17);
        let b = Dd::new_add(7.0, -3e-17);
        let r = a.quot(b) * b - a;
        assert!(r.hi().abs() < 1e-31, "{:e}", r.hi());
    }

    #[test]
    fn rank_threshold() {
        assert_eq!(rank_by_ratio(&[1.0, 1e-3, 1e-12], 1e-10), 2);
        assert_eq!(rank_by_ratio(&[0.0, 0.0], 1e-10), 0);
    }
}
