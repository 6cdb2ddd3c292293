//! Small dense complex matrices and vectors.
//!
//! The Hilbert spaces in this crate are tiny (at most 49 states), so a plain
//! row-major `Vec` is all that is needed.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::{creal, Cplx, Real};

/// Complex state vector.
pub type StateVector<T> = Vec<Cplx<T>>;

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorMatrix<T: Real> {
    dim: usize,
    entries: Vec<Cplx<T>>,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Cplx::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Cplx::one();
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if the length is not a square.
    pub fn from_row_major(dim: usize, entries: Vec<Cplx<T>>) -> Self {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim^2");
        Self { dim, entries }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Cplx<T>) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    /// `|ket⟩⟨bra|` for basis indices.
    pub fn outer_basis(dim: usize, ket: usize, bra: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(ket, bra)] = Cplx::one();
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Cplx<T>] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[Cplx<T>] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Cplx<T> {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.entries
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Maximum absolute row sum; an upper bound on the spectral norm.
    pub fn inf_norm(&self) -> T {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<T>())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Largest element of `|H - H†|`.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest element of `|U†U - I|`.
    pub fn unitarity_defect(&self) -> T {
        let prod = self.adjoint().matmul(self);
        let id = Self::identity(self.dim);
        (&prod - &id).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.entries[i * n..(i + 1) * n];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Writes `self · v` into `out`.
    pub fn apply_into(&self, v: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let n = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum();
        }
    }

    pub fn apply(&self, v: &[Cplx<T>]) -> StateVector<T> {
        let mut out = vec![Cplx::zero(); self.dim];
        self.apply_into(v, &mut out);
        out
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (a, b) = (self.dim, rhs.dim);
        Self::from_fn(a * b, |i, j| {
            self[(i / b, j / b)] * rhs[(i % b, j % b)]
        })
    }

    /// Commutator `[self, rhs]`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> StateVector<T> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[Cplx<T>]) {
        for (i, &c) in col.iter().enumerate().take(self.dim) {
            self[(i, j)] = c;
        }
    }

    /// Non-zero entries as `(row, col, value)` triplets.
    pub fn nonzeros(&self) -> Vec<(usize, usize, Cplx<T>)> {
        let n = self.dim;
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, z)| !z.is_zero())
            .map(|(k, &z)| (k / n, k % n, z))
            .collect()
    }
}

impl<T: Real> Index<(usize, usize)> for OperatorMatrix<T> {
    type Output = Cplx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cplx<T> {
        &self.entries[i * self.dim + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for OperatorMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cplx<T> {
        &mut self.entries[i * self.dim + j]
    }
}

impl<T: Real> Add for &OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn add(self, rhs: Self) -> OperatorMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        OperatorMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<T: Real> Sub for &OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn sub(self, rhs: Self) -> OperatorMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        OperatorMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl<T: Real> Mul for &OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn mul(self, rhs: Self) -> OperatorMatrix<T> {
        self.matmul(rhs)
    }
}

/// Squared Euclidean norm.
pub fn norm_sqr<T: Real>(v: &[Cplx<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨a|b⟩`.
pub fn inner<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Basis vector `|k⟩` in dimension `dim`.
pub fn basis<T: Real>(dim: usize, k: usize) -> StateVector<T> {
    let mut v = vec![Cplx::zero(); dim];
    v[k] = creal(T::one());
    v
}

/// Kronecker product of two vectors.
pub fn kron_vec<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> StateVector<T> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Trapezoidal integral of uniformly sampled data.
pub fn trapezoid<T: Real>(values: &[T], dt: T) -> T {
    match values.len() {
        0 | 1 => T::zero(),
        n => {
            let interior: T = values[1..n - 1].iter().copied().sum();
            dt * (interior + (values[0] + values[n - 1]) / T::lit(2.0))
        }
    }
}
