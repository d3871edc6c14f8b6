//! Naimark and Stinespring dilations, orthomorphism conditions on lifted
//! projection maps, and consistency of per-context dilations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contexts::{random_context, random_shape, Context, Pvm, CONTEXT_TOL};
use crate::error::{Error, Result};
use crate::jordan::{LinearMapRep, OperatorMap};
use crate::measures::ConstraintReport;
use crate::operator::{
    eig_hermitian, is_psd, psd_sqrt, tensor, ComplexMatrix, HermitianOperator, Projection, C64, EIG_TOL,
};
use crate::random::seeded;

/// Residual allowed for compression identities.
pub const COMPRESSION_TOL: f64 = 1e-8;
/// Choi eigenvalues above this count towards the Stinespring multiplicity.
pub const RANK_CUTOFF: f64 = 1e-10;
const POVM_TOL: f64 = 1e-9;

/// Positive operators summing to `total`, where `total ≤ 𝟙` or equals a
/// declared weight operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmJson", into = "PovmJson")]
pub struct Povm {
    elements: Vec<HermitianOperator>,
    total: HermitianOperator,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmJson {
    pub elements: Vec<HermitianOperator>,
    #[serde(default)]
    pub weight: Option<HermitianOperator>,
}

impl TryFrom<PovmJson> for Povm {
    type Error = Error;
    fn try_from(j: PovmJson) -> Result<Self> {
        match j.weight {
            Some(w) => Povm::with_weight(j.elements, &w),
            None => Povm::new(j.elements),
        }
    }
}

impl From<Povm> for PovmJson {
    fn from(p: Povm) -> Self {
        PovmJson {
            elements: p.elements,
            weight: Some(p.total),
        }
    }
}

impl Povm {
    fn checked_total(elements: &[HermitianOperator]) -> Result<HermitianOperator> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let d = first.dim();
        let mut total = HermitianOperator::zeros(d);
        for (i, e) in elements.iter().enumerate() {
            if e.dim() != d {
                return Err(Error::InvalidPovm(format!(
                    "element {i} has dimension {}, expected {d}",
                    e.dim()
                )));
            }
            let w = is_psd(e, POVM_TOL)?;
            if !w.is_psd {
                return Err(Error::InvalidPovm(format!(
                    "element {i} has negative eigenvalue {}",
                    w.min_eigenvalue
                )));
            }
            total = &total + e;
        }
        Ok(total)
    }

    /// Sub-normalized POVM: `Σ E_i ≤ 𝟙`.
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let total = Self::checked_total(&elements)?;
        let gap = &HermitianOperator::identity(total.dim()) - &total;
        let w = is_psd(&gap, POVM_TOL)?;
        if !w.is_psd {
            return Err(Error::InvalidPovm(format!(
                "elements sum above the identity (eigenvalue of 𝟙 − ΣE: {})",
                w.min_eigenvalue
            )));
        }
        Ok(Povm { elements, total })
    }

    /// POVM normalized to a declared weight operator.
    pub fn with_weight(elements: Vec<HermitianOperator>, weight: &HermitianOperator) -> Result<Self> {
        let total = Self::checked_total(&elements)?;
        if weight.dim() != total.dim() || (total.matrix() - weight.matrix()).max_norm() > POVM_TOL {
            return Err(Error::InvalidPovm("elements do not sum to the declared weight".into()));
        }
        Ok(Povm { elements, total })
    }

    pub fn from_pvm(pvm: &Pvm) -> Self {
        let elements = pvm.elements().iter().map(|p| p.op().clone()).collect();
        Povm::new(elements).expect("projection-valued measures are POVMs")
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn total(&self) -> &HermitianOperator {
        &self.total
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// `Φ(a) = U (a ⊗ 𝟙_m) U†`, or `U (aᵀ ⊗ 𝟙_m) U†` when reversed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    d_in: usize,
    multiplicity: usize,
    u: ComplexMatrix,
    reversed: bool,
}

impl Representation {
    pub fn new(u: ComplexMatrix, d_in: usize, multiplicity: usize) -> Result<Self> {
        let k = d_in * multiplicity;
        if !u.is_square() || u.nrows() != k {
            return Err(Error::Dimension(format!("U must be {k}x{k}")));
        }
        if (&(&u.adjoint() * &u) - &ComplexMatrix::identity(k)).max_norm() > 1e-10 {
            return Err(Error::InvalidOperator("U is not unitary".into()));
        }
        Ok(Representation {
            d_in,
            multiplicity,
            u,
            reversed: false,
        })
    }

    /// Same representation precomposed with the transpose.
    pub fn reversed(mut self) -> Self {
        self.reversed = !self.reversed;
        self
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn apply(&self, a: &ComplexMatrix) -> ComplexMatrix {
        assert!(
            a.nrows() == self.d_in && a.ncols() == self.d_in,
            "representation input must be {0}x{0}",
            self.d_in
        );
        let a = if self.reversed { a.transpose() } else { a.clone() };
        let lifted = tensor(&a, &ComplexMatrix::identity(self.multiplicity));
        &(&self.u * &lifted) * &self.u.adjoint()
    }
}

impl OperatorMap for Representation {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_in * self.multiplicity
    }

    fn apply_matrix(&self, a: &ComplexMatrix) -> ComplexMatrix {
        self.apply(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DilationData {
    Naimark {
        #[serde(rename = "pvm_K")]
        pvm_k: Pvm,
    },
    Stinespring {
        #[serde(rename = "U")]
        u: ComplexMatrix,
        multiplicity: usize,
    },
}

/// An isometry-like `v: ℂ^{d} → ℂ^K` together with a PVM or a
/// representation on `ℂ^K` that it compresses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dilation {
    #[serde(rename = "K")]
    pub dim_k: usize,
    pub v: ComplexMatrix,
    #[serde(flatten)]
    pub data: DilationData,
    /// Max-norm residual of the compression identity.
    pub residual: f64,
}

impl Dilation {
    /// `v† x v`.
    pub fn compress(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &(&self.v.adjoint() * x) * &self.v
    }

    pub fn representation(&self) -> Result<Representation> {
        match &self.data {
            DilationData::Stinespring { u, multiplicity } => {
                Representation::new(u.clone(), self.dim_k / multiplicity, *multiplicity)
            }
            DilationData::Naimark { .. } => Err(Error::InvalidInput(
                "a Naimark dilation carries no representation".into(),
            )),
        }
    }

    pub fn pvm(&self) -> Option<&Pvm> {
        match &self.data {
            DilationData::Naimark { pvm_k } => Some(pvm_k),
            DilationData::Stinespring { .. } => None,
        }
    }
}

/// Block square-root dilation: `v = Σ_i |i⟩ ⊗ √E_i`, `Q_i = |i⟩⟨i| ⊗ 𝟙`,
/// so that `v† Q_i v = E_i` and `v† v = Σ_i E_i`.
pub fn naimark_dilate(povm: &Povm) -> Result<Dilation> {
    let d = povm.dim();
    let k = povm.len();
    let dim_k = d * k;
    let mut v = nalgebra::DMatrix::from_element(dim_k, d, C64::new(0.0, 0.0));
    for (i, e) in povm.elements().iter().enumerate() {
        let root = psd_sqrt(e)?;
        v.view_mut((i * d, 0), (d, d)).copy_from(root.matrix().inner());
    }
    let v = ComplexMatrix::new(v)?;
    let basis = ComplexMatrix::identity(dim_k);
    let blocks: Vec<Projection> = (0..k)
        .map(|i| Projection::onto_columns(&basis, &(i * d..(i + 1) * d).collect::<Vec<_>>()))
        .collect();
    let pvm_k = Pvm::new(blocks, CONTEXT_TOL)?;
    let mut dilation = Dilation {
        dim_k,
        v,
        data: DilationData::Naimark { pvm_k },
        residual: 0.0,
    };
    let pvm = dilation.pvm().expect("naimark data").clone();
    dilation.residual = povm
        .elements()
        .iter()
        .zip(pvm.elements())
        .map(|(e, q)| (&dilation.compress(q.matrix()) - e.matrix()).max_norm())
        .fold(0.0, f64::max);
    Ok(dilation)
}

/// Kraus decomposition from the eigenvectors of the standard Choi matrix
/// `C = Σ_ij |i⟩⟨j| ⊗ φ(|i⟩⟨j|)`, assembled into `v = Σ_k K_k† ⊗ |k⟩` with
/// `φ(a) = v† (a ⊗ 𝟙_m) v`.
///
/// Without `require_cp`, negative eigenvalues are dropped and the residual
/// reports how far the compression is from `φ`.
pub fn stinespring_dilate(phi: &LinearMapRep, require_cp: bool) -> Result<Dilation> {
    let (d_in, d_out) = (phi.d_in, phi.d_out);
    let choi = phi.standard_choi();
    let s = eig_hermitian(&choi)?;
    if require_cp && s.min() < -EIG_TOL {
        return Err(Error::NotCompletelyPositive {
            min_eigenvalue: s.min(),
        });
    }
    let kept: Vec<usize> = (0..s.eigenvalues.len())
        .filter(|&k| s.eigenvalues[k] > RANK_CUTOFF)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidInput("the zero map has no Stinespring dilation".into()));
    }
    let m = kept.len();
    let dim_k = d_in * m;
    let mut v = nalgebra::DMatrix::from_element(dim_k, d_out, C64::new(0.0, 0.0));
    for (slot, &k) in kept.iter().enumerate() {
        let w = s.eigenvector(k);
        let root = s.eigenvalues[k].sqrt();
        // K_k[x][i] = √λ w[i d_out + x];  v[(i, slot)][x] = conj(K_k[x][i])
        for i in 0..d_in {
            for x in 0..d_out {
                v[(i * m + slot, x)] = (w[i * d_out + x] * root).conj();
            }
        }
    }
    let v = ComplexMatrix::new(v)?;
    let mut dilation = Dilation {
        dim_k,
        v,
        data: DilationData::Stinespring {
            u: ComplexMatrix::identity(dim_k),
            multiplicity: m,
        },
        residual: 0.0,
    };
    let rep = dilation.representation()?;
    let mut residual = 0.0f64;
    for i in 0..d_in {
        for j in 0..d_in {
            let e = ComplexMatrix::matrix_unit(d_in, i, j);
            let lifted = dilation.compress(&rep.apply(&e));
            residual = residual.max((&lifted - &phi.apply_matrix(&e)).max_norm());
        }
    }
    dilation.residual = residual;
    Ok(dilation)
}

/// Per-condition maximal defects of a projection map on orthogonal pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthomorphismReport {
    /// `‖φ(0)‖`
    pub zero: f64,
    /// `‖φ(𝟙 − p) − (𝟙 − φ(p))‖`
    pub complement: f64,
    /// `‖φ(p) φ(q)‖` for `pq = 0`
    pub orthogonality: f64,
    /// `‖φ(p + q) − φ(p) − φ(q)‖`
    pub additivity: f64,
    /// `‖φ(p)² − φ(p)‖`, i.e. whether images are projections at all.
    pub projection: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl OrthomorphismReport {
    pub fn max_defect(&self) -> f64 {
        [
            self.zero,
            self.complement,
            self.orthogonality,
            self.additivity,
            self.projection,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Checks the four orthomorphism conditions on orthogonal pairs `p, q`
/// taken as two blocks of random contexts.
pub fn orthomorphism_check(phi: &dyn OperatorMap, samples: usize, seed: u64, tol: f64) -> Result<OrthomorphismReport> {
    let d = phi.d_in();
    if d < 2 {
        return Err(Error::Dimension("orthogonal pairs need dimension at least 2".into()));
    }
    let k = phi.d_out();
    let id_k = ComplexMatrix::identity(k);
    let zero = phi.apply_matrix(&ComplexMatrix::zeros(d, d)).max_norm();
    let mut r = OrthomorphismReport {
        zero,
        complement: 0.0,
        orthogonality: 0.0,
        additivity: 0.0,
        projection: 0.0,
        samples,
        tolerance: tol,
        passed: false,
    };
    let mut rng = seeded(seed);
    for _ in 0..samples {
        let shape = random_shape(&mut rng, d, 2);
        let ctx = random_context(d, &shape, rng.random())?;
        let blocks = ctx.projectors();
        let (p, q) = (blocks[0].matrix(), blocks[1].matrix());
        let (fp, fq) = (phi.apply_matrix(p), phi.apply_matrix(q));
        let f_comp = phi.apply_matrix(&(&ComplexMatrix::identity(d) - p));
        r.complement = r.complement.max((&f_comp - &(&id_k - &fp)).max_norm());
        r.orthogonality = r.orthogonality.max((&fp * &fq).max_norm());
        let f_sum = phi.apply_matrix(&(p + q));
        r.additivity = r.additivity.max((&f_sum - &(&fp + &fq)).max_norm());
        r.projection = r.projection.max((&(&fp * &fp) - &fp).max_norm());
    }
    r.passed = r.max_defect() <= tol;
    Ok(r)
}

/// A context together with the PVM on `ℂ^K` assigned to its blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextDilation {
    pub context: Context,
    pub v: ComplexMatrix,
    /// One element per block of `context`.
    pub pvm: Pvm,
}

/// Whenever a block projector of one context is a sum of blocks of another,
/// both dilations must assign it the same projector on `ℂ^K`; the
/// discrepancy is measured in operator norm.
pub fn context_dilation_consistency(per_context: &[ContextDilation], tol: f64) -> Result<ConstraintReport> {
    if let Some(first) = per_context.first() {
        let k = first.pvm.dim();
        for (n, c) in per_context.iter().enumerate() {
            if c.pvm.dim() != k {
                return Err(Error::InvalidInput(format!(
                    "dilation {n} acts on ℂ^{}, expected ℂ^{k}",
                    c.pvm.dim()
                )));
            }
            if c.pvm.len() != c.context.num_blocks() {
                return Err(Error::InvalidInput(format!(
                    "dilation {n} has {} projectors for {} blocks",
                    c.pvm.len(),
                    c.context.num_blocks()
                )));
            }
            if c.v.nrows() != first.v.nrows()
                || c.v.ncols() != first.v.ncols()
                || (&c.v - &first.v).max_norm() > tol.max(CONTEXT_TOL)
            {
                return Err(Error::InvalidInput(format!("dilation {n} uses a different isometry")));
            }
        }
    }
    let mut max = 0.0f64;
    let mut witness = None;
    let mut checks = 0;
    for (a, ca) in per_context.iter().enumerate() {
        let blocks_a = ca.context.projectors();
        for (b, cb) in per_context.iter().enumerate() {
            if a == b {
                continue;
            }
            let blocks_b = cb.context.projectors();
            for (i, q) in blocks_a.iter().enumerate() {
                let inside: Vec<usize> = (0..blocks_b.len())
                    .filter(|&s| {
                        (&(q.matrix() * blocks_b[s].matrix()) - blocks_b[s].matrix()).max_norm() <= CONTEXT_TOL
                    })
                    .collect();
                if inside.is_empty() {
                    continue;
                }
                let mut sum = ComplexMatrix::zeros(q.dim(), q.dim());
                let mut image = ComplexMatrix::zeros(ca.pvm.dim(), ca.pvm.dim());
                for &s in &inside {
                    sum = &sum + blocks_b[s].matrix();
                    image = &image + cb.pvm.elements()[s].matrix();
                }
                if (&sum - q.matrix()).max_norm() > CONTEXT_TOL {
                    continue;
                }
                checks += 1;
                let gap = (ca.pvm.elements()[i].matrix() - &image).op_norm();
                if gap > max || witness.is_none() {
                    max = max.max(gap);
                    witness = Some(format!("block {i} of context {a} is shared with context {b}"));
                }
            }
        }
    }
    Ok(ConstraintReport {
        satisfied: max <= tol,
        max_violation: max,
        tolerance: tol,
        witness,
        checks,
    })
}
