//! Dense complex linear algebra on square operators.
//!
//! Everything downstream (propagators, generators, density matrices) is a
//! square complex matrix in row-major layout, wrapped in [`OperatorMatrix`].
//! The kernels that dominate runtime — matrix products, Hermitian
//! eigendecompositions, matrix exponentials — are implemented here directly
//! on contiguous buffers so the whole crate stays pure Rust and results are
//! bit-reproducible across machines and thread counts.

mod eig;
mod expm;
mod lu;
mod sparse;

pub use eig::{eigh, eigh_values, HermitianEig};
pub use expm::expm;
pub use sparse::{apply_expm, SparseOperator};

pub(crate) use eig::eig_normal;
pub(crate) use lu::{determinant, lu_factor};

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Dense square complex matrix, row-major.
///
/// Entries are stored as one contiguous `Vec<Complex64>` of length `dim²`;
/// `(i, j)` lives at index `i * dim + j`. The dimension is always ≥ 1.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl OperatorMatrix {
    /// Zero matrix of the given dimension.
    ///
    /// # Panics
    /// If `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from a row-major buffer of length `dim²`.
    ///
    /// Rejects non-square buffers and non-finite entries.
    pub fn from_buffer(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "buffer of length {} does not form a {dim}x{dim} matrix",
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidInput(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix entrywise from `f(i, j)`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Immutable view of the row-major entry buffer.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    /// Transpose (no conjugation).
    pub fn transpose(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i])
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Entrywise scaling by a complex factor.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// In-place `self += c · other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &Self) {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum (induced 1-norm).
    pub fn one_norm(&self) -> f64 {
        let n = self.dim;
        let mut col = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..n {
                col[j] += self.data[i * n + j].norm();
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry modulus of `M − M†`; zero iff Hermitian.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Frobenius norm of the commutator `M M† − M† M`; zero iff normal.
    pub fn normality_defect(&self) -> f64 {
        let md = self.dagger();
        let mut c = self.matmul(&md);
        c.add_scaled(Complex64::new(-1.0, 0.0), &md.matmul(self));
        c.frobenius_norm()
    }

    /// Matrix product `self · rhs`.
    ///
    /// The kernel works on split real/imaginary planes so the inner loop is
    /// two fused multiply-add streams; rows of the result are independent, so
    /// the parallel path is bitwise identical to the sequential one.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let (ar, ai) = planes(&self.data);
        let (br, bi) = planes(&rhs.data);
        let mut cr = vec![0.0f64; n * n];
        let mut ci = vec![0.0f64; n * n];

        let row_kernel = |i: usize, crow: &mut [f64], cirow: &mut [f64]| {
            for k in 0..n {
                let are = ar[i * n + k];
                let aim = ai[i * n + k];
                if are == 0.0 && aim == 0.0 {
                    continue;
                }
                let brow = &br[k * n..(k + 1) * n];
                let birow = &bi[k * n..(k + 1) * n];
                for j in 0..n {
                    crow[j] += are * brow[j] - aim * birow[j];
                    cirow[j] += are * birow[j] + aim * brow[j];
                }
            }
        };

        if n >= PARALLEL_MATMUL_MIN_DIM {
            use rayon::prelude::*;
            cr.par_chunks_mut(n)
                .zip(ci.par_chunks_mut(n))
                .enumerate()
                .for_each(|(i, (crow, cirow))| row_kernel(i, crow, cirow));
        } else {
            for i in 0..n {
                row_kernel(i, &mut cr[i * n..(i + 1) * n], &mut ci[i * n..(i + 1) * n]);
            }
        }

        Self {
            dim: n,
            data: unplanes(&cr, &ci),
        }
    }

    /// Matrix-vector product `self · v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim, "vector length mismatch");
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.data[i * n + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Scales column `j` by `c[j]` in place (right multiplication by a
    /// diagonal matrix).
    pub(crate) fn scale_columns(&mut self, c: &[Complex64]) {
        assert_eq!(c.len(), self.dim);
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] *= c[j];
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for OperatorMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for OperatorMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl std::ops::Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(1.0, 0.0), rhs);
        out
    }
}

impl std::ops::Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(-1.0, 0.0), rhs);
        out
    }
}

/// Dimension at which `matmul` switches to the row-parallel path.
const PARALLEL_MATMUL_MIN_DIM: usize = 128;

fn planes(data: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut re = Vec::with_capacity(data.len());
    let mut im = Vec::with_capacity(data.len());
    for z in data {
        re.push(z.re);
        im.push(z.im);
    }
    (re, im)
}

fn unplanes(re: &[f64], im: &[f64]) -> Vec<Complex64> {
    re.iter()
        .zip(im)
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect()
}

/// Kronecker product of the factors, left factor slowest.
///
/// `kron(&[A, B])[(i1·n2 + i2, j1·n2 + j2)] = A[(i1, j1)] · B[(i2, j2)]`, and
/// the operation is associative, so nested and flat calls agree.
///
/// # Errors
/// `InvalidInput` when `factors` is empty.
pub fn kron(factors: &[&OperatorMatrix]) -> Result<OperatorMatrix> {
    if factors.is_empty() {
        return Err(Error::InvalidInput(
            "kron requires at least one factor".into(),
        ));
    }
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = kron_pair(&acc, f);
    }
    Ok(acc)
}

fn kron_pair(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    let (na, nb) = (a.dim(), b.dim());
    let n = na * nb;
    let mut out = OperatorMatrix::zeros(n);
    for i1 in 0..na {
        for j1 in 0..na {
            let av = a[(i1, j1)];
            if av.re == 0.0 && av.im == 0.0 {
                continue;
            }
            for i2 in 0..nb {
                for j2 in 0..nb {
                    out[(i1 * nb + i2, j1 * nb + j2)] = av * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Rank-one projector `|v⟩⟨v|` (no normalization applied).
pub fn outer_product(v: &[Complex64]) -> OperatorMatrix {
    let n = v.len();
    OperatorMatrix::from_fn(n, |i, j| v[i] * v[j].conj())
}
