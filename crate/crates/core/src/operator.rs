//! Dense complex-matrix kernel.
//!
//! Matrices are stored densely; all dimensions in this crate are small
//! (at most a few dozen per factor). Bipartite operators use the index
//! convention `(i1, i2) -> i1 * d2 + i2`, which is also the convention of
//! [`tensor`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance on `‖A - A†‖_max` and on projection idempotency.
pub const HERM_TOL: f64 = 1e-10;
/// Default tolerance on spectral reconstruction.
pub const EIG_TOL: f64 = 1e-9;
/// Default tolerance for flow group-law checks.
pub const FLOW_TOL: f64 = 1e-9;

const EIG_MAX_SWEEPS: usize = 10_000;

/// A dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixJson", try_from = "MatrixJson")]
pub struct ComplexMatrix(DMatrix<C64>);

/// Wire format of a matrix: row-major real and imaginary parts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dims: [usize; 2],
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<ComplexMatrix> for MatrixJson {
    fn from(m: ComplexMatrix) -> Self {
        let entries = m.row_major();
        MatrixJson {
            dims: [m.nrows(), m.ncols()],
            re: entries.iter().map(|z| z.re).collect(),
            im: entries.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        let [r, c] = j.dims;
        if j.re.len() != r * c || j.im.len() != r * c {
            return Err(Error::Dimension(format!(
                "matrix JSON declares {r}x{c} but carries {} real and {} imaginary entries",
                j.re.len(),
                j.im.len()
            )));
        }
        let entries = j.re.iter().zip(&j.im).map(|(&re, &im)| C64::new(re, im)).collect();
        ComplexMatrix::from_row_major(r, c, entries)
    }
}

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Dimension("matrix dimensions must be positive".into()));
        }
        if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidOperator("matrix has non-finite entries".into()));
        }
        Ok(ComplexMatrix(m))
    }

    /// Wraps a matrix produced by arithmetic on already-validated matrices.
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        ComplexMatrix(m)
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, &entries))
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        ComplexMatrix(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// The matrix unit `|i⟩⟨j|` on `ℂ^n`.
    pub fn matrix_unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = C64::new(1.0, 0.0);
        ComplexMatrix(m)
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        ComplexMatrix(DMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj()))
    }

    pub fn column_vector(v: &[C64]) -> Self {
        ComplexMatrix(DMatrix::from_column_slice(v.len(), 1, v))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn row_major(&self) -> Vec<C64> {
        let (r, c) = self.0.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.0.column(j).iter().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix(self.0.map(|z| z.conj()))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        self.0.clone().singular_values().max()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (self - &self.adjoint()).max_norm()
    }

    fn require_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.0.shape() != other.0.shape() {
            return Err(Error::Dimension(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.0.shape(),
                other.0.shape()
            )));
        }
        Ok(())
    }

    /// `{a, b} = ab + ba`.
    pub fn anticommutator(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other, "anticommutator")?;
        Ok(&(self * other) + &(other * self))
    }

    /// `[a, b] = ab - ba`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other, "commutator")?;
        Ok(&(self * other) - &(other * self))
    }
}

impl AsRef<ComplexMatrix> for ComplexMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        self
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                let z = self.0[(i, j)];
                write!(f, "{:>10.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

/// A Hermitian operator, stored in explicitly symmetrized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixJson", try_from = "MatrixJson")]
pub struct HermitianOperator(ComplexMatrix);

impl From<HermitianOperator> for MatrixJson {
    fn from(h: HermitianOperator) -> Self {
        h.0.into()
    }
}

impl TryFrom<MatrixJson> for HermitianOperator {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        HermitianOperator::new(ComplexMatrix::try_from(j)?, HERM_TOL)
    }
}

impl HermitianOperator {
    /// Checks `‖A - A†‖_max ≤ tol` and stores `(A + A†)/2`.
    pub fn new(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "Hermitian operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let defect = m.hermiticity_defect();
        if defect > tol {
            return Err(Error::InvalidOperator(format!(
                "Hermiticity defect {defect:e} exceeds {tol:e}"
            )));
        }
        Ok(Self::hermitian_part(&m))
    }

    /// `(A + A†)/2` without any check on the size of the anti-Hermitian part.
    pub fn hermitian_part(m: &ComplexMatrix) -> Self {
        assert!(m.is_square(), "Hermitian part of a non-square matrix");
        HermitianOperator((m + &m.adjoint()).scale_real(0.5))
    }

    pub fn identity(n: usize) -> Self {
        HermitianOperator(ComplexMatrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianOperator(ComplexMatrix::zeros(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        HermitianOperator(ComplexMatrix::from_real_diagonal(diag))
    }

    /// `|v⟩⟨v|` (unnormalized).
    pub fn ket_bra(v: &[C64]) -> Self {
        Self::hermitian_part(&ComplexMatrix::outer(v, v))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianOperator(self.0.scale_real(s))
    }

    pub fn transpose(&self) -> Self {
        HermitianOperator(self.0.transpose())
    }

    /// `tr[self · other]`, real for Hermitian arguments.
    pub fn expectation(&self, other: &ComplexMatrix) -> C64 {
        let a = self.0.inner();
        let b = other.inner();
        let n = a.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += a[(i, k)] * b[(k, i)];
            }
        }
        acc
    }

    /// `⟨v| self |v⟩`.
    pub fn quadratic_form(&self, v: &[C64]) -> f64 {
        let a = self.0.inner();
        let n = v.len();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += a[(i, j)] * v[j];
            }
            acc += v[i].conj() * row;
        }
        acc.re
    }
}

impl AsRef<ComplexMatrix> for HermitianOperator {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        HermitianOperator(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        HermitianOperator(&self.0 - &rhs.0)
    }
}

/// An orthogonal projection.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(into = "MatrixJson")]
pub struct Projection {
    op: HermitianOperator,
    rank: usize,
}

impl From<Projection> for MatrixJson {
    fn from(p: Projection) -> Self {
        p.op.into()
    }
}

impl<'de> Deserialize<'de> for Projection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let op = HermitianOperator::deserialize(d)?;
        Projection::new(op, HERM_TOL).map_err(serde::de::Error::custom)
    }
}

impl Projection {
    /// Checks idempotency and integrality of the trace within `tol`.
    pub fn new(op: HermitianOperator, tol: f64) -> Result<Self> {
        let sq = op.matrix() * op.matrix();
        let defect = (&sq - op.matrix()).max_norm();
        if defect > tol {
            return Err(Error::InvalidOperator(format!(
                "projection defect ‖P² - P‖ = {defect:e} exceeds {tol:e}"
            )));
        }
        let tr = op.trace();
        let rank = tr.round();
        // trace of an idempotent sums n eigenvalues, each within ~tol of 0 or 1
        if (tr - rank).abs() > tol * op.dim() as f64 * 10.0 + 1e-12 || rank < 0.0 {
            return Err(Error::InvalidOperator(format!(
                "projection trace {tr} is not an integer"
            )));
        }
        Ok(Projection {
            op,
            rank: rank as usize,
        })
    }

    /// Projection onto the span of the given orthonormal columns.
    pub fn onto_columns(basis: &ComplexMatrix, columns: &[usize]) -> Self {
        let n = basis.nrows();
        let mut acc = ComplexMatrix::zeros(n, n);
        for &c in columns {
            let v = basis.column(c);
            acc = &acc + &ComplexMatrix::outer(&v, &v);
        }
        Projection {
            op: HermitianOperator::hermitian_part(&acc),
            rank: columns.len(),
        }
    }

    /// Rank-one projection onto the ray of `v` (normalized internally).
    pub fn onto_vector(v: &[C64]) -> Result<Self> {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidOperator("cannot project onto a zero vector".into()));
        }
        let u: Vec<C64> = v.iter().map(|z| z / norm).collect();
        Ok(Projection {
            op: HermitianOperator::ket_bra(&u),
            rank: 1,
        })
    }

    pub fn identity(n: usize) -> Self {
        Projection {
            op: HermitianOperator::identity(n),
            rank: n,
        }
    }

    pub fn zero(n: usize) -> Self {
        Projection {
            op: HermitianOperator::zeros(n),
            rank: 0,
        }
    }

    pub fn complement(&self) -> Self {
        let n = self.dim();
        Projection {
            op: &HermitianOperator::identity(n) - &self.op,
            rank: n - self.rank,
        }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Max-norm distance to another projection.
    pub fn distance(&self, other: &Projection) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (self.matrix() - other.matrix()).max_norm()
    }
}

impl AsRef<ComplexMatrix> for Projection {
    fn as_ref(&self) -> &ComplexMatrix {
        self.matrix()
    }
}

/// Eigen-decomposition of a Hermitian operator, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    /// `U f(Λ) U†`.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> ComplexMatrix {
        let u = self.eigenvectors.inner();
        let n = u.nrows();
        let mut scaled = u.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let fk = f(lam);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        ComplexMatrix::wrap(scaled * u.adjoint())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|l| C64::new(l, 0.0))
    }
}

/// Full eigendecomposition of a Hermitian operator.
///
/// Eigenvectors inside a degenerate cluster form an orthonormal basis of the
/// cluster in no particular order.
pub fn eig_hermitian(a: &HermitianOperator) -> Result<Spectrum> {
    let m = a.matrix().inner().clone();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, EIG_MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    if !eigenvalues.iter().all(|l| l.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    let spectrum = Spectrum {
        eigenvalues,
        eigenvectors: ComplexMatrix::new(vecs)?,
    };
    let scale = a.matrix().max_norm().max(1.0);
    let residual = (&spectrum.reconstruct() - a.matrix()).max_norm();
    if residual > EIG_TOL * scale {
        return Err(Error::Numerical(format!(
            "eigendecomposition reconstruction residual {residual:e} exceeds {:e}",
            EIG_TOL * scale
        )));
    }
    Ok(spectrum)
}

/// Outcome of a positive-semidefiniteness test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdWitness {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    /// Eigenvector of the minimal eigenvalue.
    #[serde(with = "crate::operator::vector_json")]
    pub witness: Vec<C64>,
}

/// `min eigenvalue ≥ -tol`, together with the minimizing eigenvector.
pub fn is_psd(a: &HermitianOperator, tol: f64) -> Result<PsdWitness> {
    let s = eig_hermitian(a)?;
    let k = s.eigenvalues.len() - 1;
    Ok(PsdWitness {
        is_psd: s.eigenvalues[k] >= -tol,
        min_eigenvalue: s.eigenvalues[k],
        witness: s.eigenvector(k),
    })
}

/// Kronecker product: `(i1 i2, j1 j2) ↦ a[i1, j1] · b[i2, j2]`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::wrap(a.inner().kronecker(b.inner()))
}

/// `a ⊗ b` for Hermitian factors.
pub fn tensor_hermitian(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::hermitian_part(&tensor(a.matrix(), b.matrix()))
}

/// Tensor factor of a bipartite system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    First,
    Second,
}

impl Subsystem {
    /// Parses the 1-based index used on the command line.
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Subsystem::First),
            2 => Ok(Subsystem::Second),
            _ => Err(Error::InvalidInput(format!("subsystem index must be 1 or 2, got {i}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Subsystem::First => Subsystem::Second,
            Subsystem::Second => Subsystem::First,
        }
    }
}

fn check_bipartite(m: &ComplexMatrix, dims: (usize, usize)) -> Result<()> {
    let n = dims.0 * dims.1;
    if dims.0 == 0 || dims.1 == 0 || m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!(
            "expected a {n}x{n} operator on ℂ^{}⊗ℂ^{}, got {}x{}",
            dims.0,
            dims.1,
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Traces out the factor that is not `keep`.
pub fn partial_trace(m: &ComplexMatrix, dims: (usize, usize), keep: Subsystem) -> Result<ComplexMatrix> {
    check_bipartite(m, dims)?;
    let (d1, d2) = dims;
    let a = m.inner();
    let out = match keep {
        Subsystem::First => DMatrix::from_fn(d1, d1, |i, j| (0..d2).map(|k| a[(i * d2 + k, j * d2 + k)]).sum()),
        Subsystem::Second => DMatrix::from_fn(d2, d2, |i, j| (0..d1).map(|k| a[(k * d2 + i, k * d2 + j)]).sum()),
    };
    Ok(ComplexMatrix::wrap(out))
}

/// Transposes the chosen tensor factor in the computational basis.
pub fn partial_transpose(m: &ComplexMatrix, dims: (usize, usize), side: Subsystem) -> Result<ComplexMatrix> {
    check_bipartite(m, dims)?;
    let (d1, d2) = dims;
    let a = m.inner();
    let n = d1 * d2;
    let out = DMatrix::from_fn(n, n, |r, c| {
        let (i1, i2) = (r / d2, r % d2);
        let (j1, j2) = (c / d2, c % d2);
        match side {
            Subsystem::First => a[(j1 * d2 + i2, i1 * d2 + j2)],
            Subsystem::Second => a[(i1 * d2 + j2, j1 * d2 + i2)],
        }
    });
    Ok(ComplexMatrix::wrap(out))
}

/// Partial transpose of a Hermitian operator (Hermiticity is preserved).
pub fn partial_transpose_hermitian(
    a: &HermitianOperator,
    dims: (usize, usize),
    side: Subsystem,
) -> Result<HermitianOperator> {
    Ok(HermitianOperator::hermitian_part(&partial_transpose(
        a.matrix(),
        dims,
        side,
    )?))
}

/// `{a, b} = ab + ba`.
pub fn anticommutator(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    Ok(HermitianOperator::hermitian_part(
        &a.matrix().anticommutator(b.matrix())?,
    ))
}

/// `[a, b] = ab - ba`, anti-Hermitian for Hermitian arguments.
pub fn commutator(a: &HermitianOperator, b: &HermitianOperator) -> Result<ComplexMatrix> {
    a.matrix().commutator(b.matrix())
}

/// Sign selecting one of the two associative products on the Jordan algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductSign {
    Plus,
    Minus,
}

/// `a ·± b = ½{a,b} ± ½[a,b]`; `·₊` is the ordinary product and `·₋` the opposite one.
pub fn jordan_product_pm(a: &HermitianOperator, b: &HermitianOperator, sign: ProductSign) -> Result<ComplexMatrix> {
    let sym = anticommutator(a, b)?.into_matrix().scale_real(0.5);
    let anti = commutator(a, b)?.scale_real(0.5);
    Ok(match sign {
        ProductSign::Plus => &sym + &anti,
        ProductSign::Minus => &sym - &anti,
    })
}

/// `e^{ita}` for Hermitian `a`.
pub fn unitary_exp(t: f64, a: &HermitianOperator) -> Result<ComplexMatrix> {
    let s = eig_hermitian(a)?;
    Ok(s.apply(|l| C64::from_polar(1.0, t * l)))
}

/// `Ψ(t, a) b = e^{ita} b e^{-ita}`.
pub fn conjugation_flow(t: f64, a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "flow generator has dimension {} but the operand has {}",
            a.dim(),
            b.dim()
        )));
    }
    let u = unitary_exp(t, a)?;
    Ok(HermitianOperator::hermitian_part(&(&(&u * b.matrix()) * &u.adjoint())))
}

/// Same flow acting on an arbitrary square matrix.
pub fn conjugation_flow_matrix(t: f64, a: &HermitianOperator, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.dim() != b.nrows() || !b.is_square() {
        return Err(Error::Dimension("flow generator and operand dimensions differ".into()));
    }
    let u = unitary_exp(t, a)?;
    Ok(&(&u * b) * &u.adjoint())
}

/// Square root of the positive part of `a` (negative eigenvalues are clipped).
pub fn psd_sqrt(a: &HermitianOperator) -> Result<HermitianOperator> {
    let s = eig_hermitian(a)?;
    Ok(HermitianOperator::hermitian_part(
        &s.apply(|l| C64::new(l.max(0.0).sqrt(), 0.0)),
    ))
}

/// Matrix sign with the convention `sign(0) = +1`; the result squares to the identity.
pub fn hermitian_sign(a: &HermitianOperator) -> Result<HermitianOperator> {
    let s = eig_hermitian(a)?;
    Ok(HermitianOperator::hermitian_part(
        &s.apply(|l| C64::new(if l >= 0.0 { 1.0 } else { -1.0 }, 0.0)),
    ))
}

/// Serde helper: complex vectors as `{"re": [...], "im": [...]}`.
pub mod vector_json {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct VectorJson {
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        VectorJson {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let j = VectorJson::deserialize(d)?;
        if j.re.len() != j.im.len() {
            return Err(serde::de::Error::custom("vector re/im lengths differ"));
        }
        Ok(j.re.into_iter().zip(j.im).map(|(r, i)| C64::new(r, i)).collect())
    }
}
