//! Induced maps `φ_μ(a) = tr₁[ρ(a ⊗ 𝟙)]`, their Choi representation,
//! Jordan and commutator structure, and the state classifier.

use serde::{Deserialize, Serialize};

use crate::dilation::stinespring_dilate;
use crate::error::{Error, Result};
use crate::measures::{check_dims, check_popt, PoptCertificate, PoptOptions};
use crate::operator::{
    conjugation_flow_matrix, is_psd, partial_transpose_hermitian, ComplexMatrix, HermitianOperator, PsdWitness,
    Subsystem, C64, EIG_TOL, HERM_TOL,
};
use crate::random::{gue, seeded};

/// Defect tolerance of the finite-time flow check.
pub const FINITE_TIME_TOL: f64 = 1e-6;
/// Flow times used by the finite-time check.
pub const FLOW_TIMES: [f64; 3] = [0.1, 1.0, std::f64::consts::PI];
pub const ORIENTATION_TOL: f64 = 1e-8;
pub const DEFAULT_SAMPLES: usize = 50;

/// A complex-linear map `ℒ(ℂ^{d_in}) → ℒ(ℂ^{d_out})`.
pub trait OperatorMap: Sync {
    fn d_in(&self) -> usize;
    fn d_out(&self) -> usize;

    /// Panics if `a` is not `d_in × d_in`.
    fn apply_matrix(&self, a: &ComplexMatrix) -> ComplexMatrix;
}

/// A linear map stored through `ρ = Σ_ij |i⟩⟨j| ⊗ φ(|j⟩⟨i|)` in the
/// computational basis, so that `φ(a) = tr₁[ρ (a ⊗ 𝟙)]`.
///
/// `ρ` is the standard Choi matrix of `φ ∘ T`; `ρ ⪰ 0` therefore means that
/// `φ` composed with the transpose is completely positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMapRep {
    pub d_in: usize,
    pub d_out: usize,
    pub choi: HermitianOperator,
}

impl LinearMapRep {
    /// Tabulates `f` on matrix units. Fails unless `f` preserves Hermiticity.
    pub fn from_fn<F>(d_in: usize, d_out: usize, f: F) -> Result<Self>
    where
        F: Fn(&ComplexMatrix) -> ComplexMatrix,
    {
        let n = d_in * d_out;
        let mut choi = ComplexMatrix::zeros(n, n);
        for i in 0..d_in {
            for j in 0..d_in {
                let block = f(&ComplexMatrix::matrix_unit(d_in, j, i));
                if block.nrows() != d_out || block.ncols() != d_out {
                    return Err(Error::Dimension(format!(
                        "map returned a {}x{} matrix, expected {d_out}x{d_out}",
                        block.nrows(),
                        block.ncols()
                    )));
                }
                choi = &choi + &crate::operator::tensor(&ComplexMatrix::matrix_unit(d_in, i, j), &block);
            }
        }
        let choi = HermitianOperator::new(choi, HERM_TOL)
            .map_err(|_| Error::InvalidOperator("map does not preserve Hermiticity".into()))?;
        Ok(LinearMapRep { d_in, d_out, choi })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_fn(d, d, |a| a.clone()).expect("identity preserves Hermiticity")
    }

    pub fn transpose(d: usize) -> Self {
        Self::from_fn(d, d, |a| a.transpose()).expect("transpose preserves Hermiticity")
    }

    /// `a ↦ u a u†`.
    pub fn unitary_conjugation(u: &ComplexMatrix) -> Result<Self> {
        let d = u.nrows();
        Self::from_fn(d, d, |a| &(u * a) * &u.adjoint())
    }

    /// `a ↦ tr(a) 𝟙/d`.
    pub fn trace_map(d: usize) -> Self {
        Self::from_fn(d, d, |a| ComplexMatrix::identity(d).scale(a.trace() / d as f64))
            .expect("trace map preserves Hermiticity")
    }

    /// `φ ∘ T`.
    pub fn compose_transpose(&self) -> Self {
        Self::from_fn(self.d_in, self.d_out, |a| self.apply_matrix(&a.transpose()))
            .expect("composition of Hermiticity-preserving maps")
    }

    /// `Σ_ij |i⟩⟨j| ⊗ φ(|i⟩⟨j|)`.
    pub fn standard_choi(&self) -> HermitianOperator {
        let n = self.d_in * self.d_out;
        let mut c = ComplexMatrix::zeros(n, n);
        for i in 0..self.d_in {
            for j in 0..self.d_in {
                let unit = ComplexMatrix::matrix_unit(self.d_in, i, j);
                c = &c + &crate::operator::tensor(&unit, &self.apply_matrix(&unit));
            }
        }
        HermitianOperator::hermitian_part(&c)
    }

    /// Block `(i, j)` of the stored matrix, i.e. `φ(|j⟩⟨i|)`.
    fn block(&self, i: usize, j: usize) -> ComplexMatrix {
        let d = self.d_out;
        let m = self.choi.matrix().inner();
        ComplexMatrix::wrap(m.view((i * d, j * d), (d, d)).into_owned())
    }
}

impl OperatorMap for LinearMapRep {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn apply_matrix(&self, a: &ComplexMatrix) -> ComplexMatrix {
        assert!(
            a.nrows() == self.d_in && a.ncols() == self.d_in,
            "map input must be {0}x{0}",
            self.d_in
        );
        let mut out = ComplexMatrix::zeros(self.d_out, self.d_out);
        for i in 0..self.d_in {
            for j in 0..self.d_in {
                let coeff = a.entry(j, i);
                if coeff != C64::new(0.0, 0.0) {
                    out = &out + &self.block(i, j).scale(coeff);
                }
            }
        }
        out
    }
}

/// `φ_μ` for the measure with operator `ρ` on `ℂ^{d1} ⊗ ℂ^{d2}`.
pub fn map_from_state(rho: &HermitianOperator, dims: (usize, usize)) -> Result<LinearMapRep> {
    check_dims(rho, dims)?;
    Ok(LinearMapRep {
        d_in: dims.0,
        d_out: dims.1,
        choi: rho.clone(),
    })
}

/// `ρ = Σ_ij |i⟩⟨j| ⊗ φ(|j⟩⟨i|)`, assembled from the action of the map.
pub fn state_from_map(phi: &LinearMapRep) -> HermitianOperator {
    let n = phi.d_in * phi.d_out;
    let mut rho = ComplexMatrix::zeros(n, n);
    for i in 0..phi.d_in {
        for j in 0..phi.d_in {
            let image = phi.apply_matrix(&ComplexMatrix::matrix_unit(phi.d_in, j, i));
            rho = &rho + &crate::operator::tensor(&ComplexMatrix::matrix_unit(phi.d_in, i, j), &image);
        }
    }
    HermitianOperator::hermitian_part(&rho)
}

pub fn apply_map(phi: &dyn OperatorMap, a: &HermitianOperator) -> Result<HermitianOperator> {
    if a.dim() != phi.d_in() {
        return Err(Error::Dimension(format!(
            "map acts on dimension {}, got {}",
            phi.d_in(),
            a.dim()
        )));
    }
    Ok(HermitianOperator::hermitian_part(&phi.apply_matrix(a.matrix())))
}

/// Positivity of `state_from_map(φ)`, i.e. complete positivity of `φ ∘ T`.
pub fn is_completely_positive(phi: &LinearMapRep, tol: f64) -> Result<PsdWitness> {
    is_psd(&state_from_map(phi), tol)
}

fn anticomm(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) + &(b * a)
}

fn comm(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

fn sample_pairs(d: usize, samples: usize, seed: u64) -> Vec<(HermitianOperator, HermitianOperator)> {
    let mut rng = seeded(seed);
    (0..samples).map(|_| (gue(&mut rng, d), gue(&mut rng, d))).collect()
}

/// `‖φ({a,b}) − {φ(a),φ(b)}‖_max / (‖a‖_max ‖b‖_max)`.
pub fn jordan_defect_at(phi: &dyn OperatorMap, a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    let (fa, fb) = (phi.apply_matrix(a.matrix()), phi.apply_matrix(b.matrix()));
    let lhs = phi.apply_matrix(&anticomm(a.matrix(), b.matrix()));
    (&lhs - &anticomm(&fa, &fb)).max_norm() / (a.matrix().max_norm() * b.matrix().max_norm())
}

/// Maximal normalized Jordan defect over Gaussian Hermitian pairs.
pub fn jordan_defect(phi: &dyn OperatorMap, samples: usize, seed: u64) -> f64 {
    sample_pairs(phi.d_in(), samples, seed)
        .iter()
        .map(|(a, b)| jordan_defect_at(phi, a, b))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationTag {
    Preserving,
    Reversing,
    Neither,
}

impl OrientationTag {
    pub fn flipped(self) -> Self {
        match self {
            OrientationTag::Preserving => OrientationTag::Reversing,
            OrientationTag::Reversing => OrientationTag::Preserving,
            OrientationTag::Neither => OrientationTag::Neither,
        }
    }
}

/// Returns the tag and whether both defects vanish (commutative image).
fn assign_tag(preserving: f64, reversing: f64, tol: f64) -> (OrientationTag, bool) {
    if preserving <= tol && reversing <= tol {
        (OrientationTag::Neither, true)
    } else if preserving <= tol && preserving < reversing {
        (OrientationTag::Preserving, false)
    } else if reversing <= tol && reversing < preserving {
        (OrientationTag::Reversing, false)
    } else {
        (OrientationTag::Neither, false)
    }
}

/// Finite-time flow intertwining, evaluated at [`FLOW_TIMES`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteTimeCheck {
    pub times: Vec<f64>,
    /// `max ‖Φ(Ψ(t,a)b) − Ψ(t,Φ(a))Φ(b)‖ / ‖b‖`
    pub max_defect_preserving: f64,
    /// `max ‖Φ(Ψ(−t,a)b) − Ψ(t,Φ(a))Φ(b)‖ / ‖b‖`
    pub max_defect_reversing: f64,
    pub tag: OrientationTag,
    pub tolerance: f64,
    /// The finite-time tag equals the commutator-sign tag.
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationVerdict {
    pub tag: OrientationTag,
    pub max_defect_preserving: f64,
    pub max_defect_reversing: f64,
    pub sample_count: usize,
    pub tolerance: f64,
    /// Both defects vanish: the image is commutative and no orientation is
    /// distinguished.
    pub degenerate: bool,
    pub finite_time: FiniteTimeCheck,
}

/// Commutator-sign classification of `phi` on sampled Hermitian pairs,
/// cross-checked against the finite-time flows.
pub fn orientation_verdict(phi: &dyn OperatorMap, samples: usize, seed: u64, tol: f64) -> Result<OrientationVerdict> {
    let mut pres = 0.0f64;
    let mut rev = 0.0f64;
    for (a, b) in sample_pairs(phi.d_in(), samples, seed) {
        let norm = a.matrix().max_norm() * b.matrix().max_norm();
        let lhs = phi.apply_matrix(&comm(a.matrix(), b.matrix()));
        let rhs = comm(&phi.apply_matrix(a.matrix()), &phi.apply_matrix(b.matrix()));
        pres = pres.max((&lhs - &rhs).max_norm() / norm);
        rev = rev.max((&lhs + &rhs).max_norm() / norm);
    }
    let (tag, degenerate) = assign_tag(pres, rev, tol);
    let finite_time = finite_time_check(phi, seed, tag)?;
    Ok(OrientationVerdict {
        tag,
        max_defect_preserving: pres,
        max_defect_reversing: rev,
        sample_count: samples,
        tolerance: tol,
        degenerate,
        finite_time,
    })
}

fn finite_time_check(phi: &dyn OperatorMap, seed: u64, differential: OrientationTag) -> Result<FiniteTimeCheck> {
    let pairs = sample_pairs(phi.d_in(), FLOW_TIMES.len(), seed.wrapping_add(0x5EED));
    let mut pres = 0.0f64;
    let mut rev = 0.0f64;
    for (&t, (a, b)) in FLOW_TIMES.iter().zip(&pairs) {
        let a = a.scale(1.0 / a.matrix().max_norm());
        let fa = HermitianOperator::hermitian_part(&phi.apply_matrix(a.matrix()));
        let fb = phi.apply_matrix(b.matrix());
        let rhs = conjugation_flow_matrix(t, &fa, &fb)?;
        let forward = phi.apply_matrix(&conjugation_flow_matrix(t, &a, b.matrix())?);
        let backward = phi.apply_matrix(&conjugation_flow_matrix(-t, &a, b.matrix())?);
        let norm = b.matrix().max_norm();
        pres = pres.max((&forward - &rhs).max_norm() / norm);
        rev = rev.max((&backward - &rhs).max_norm() / norm);
    }
    let (tag, _) = assign_tag(pres, rev, FINITE_TIME_TOL);
    Ok(FiniteTimeCheck {
        times: FLOW_TIMES.to_vec(),
        max_defect_preserving: pres,
        max_defect_reversing: rev,
        tag,
        tolerance: FINITE_TIME_TOL,
        agrees: tag == differential,
    })
}

/// Direction of a conjugation flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    Canonical,
    Reverse,
}

/// The pair of local time orientations `(Ψ*₁, Ψ₂)` under which positive
/// operators correspond to completely positive maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeFlowPair {
    pub left: FlowDirection,
    pub right: FlowDirection,
}

impl Default for TimeFlowPair {
    fn default() -> Self {
        TimeFlowPair {
            left: FlowDirection::Reverse,
            right: FlowDirection::Canonical,
        }
    }
}

impl TimeFlowPair {
    /// `Ψ(t,a)b` for the canonical direction, `(Ψ(t,aᵀ) bᵀ)ᵀ` for the reverse one.
    pub fn flow(direction: FlowDirection, t: f64, a: &HermitianOperator, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        match direction {
            FlowDirection::Canonical => conjugation_flow_matrix(t, a, b),
            FlowDirection::Reverse => Ok(conjugation_flow_matrix(t, &a.transpose(), &b.transpose())?.transpose()),
        }
    }

    pub fn left_flow(&self, t: f64, a: &HermitianOperator, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        Self::flow(self.left, t, a, b)
    }

    pub fn right_flow(&self, t: f64, a: &HermitianOperator, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        Self::flow(self.right, t, a, b)
    }

    /// `‖Ψ*(t,a)b − Ψ(−t,a)b‖_max`.
    pub fn reverse_flow_defect(t: f64, a: &HermitianOperator, b: &ComplexMatrix) -> Result<f64> {
        let reverse = Self::flow(FlowDirection::Reverse, t, a, b)?;
        Ok((&reverse - &conjugation_flow_matrix(-t, a, b)?).max_norm())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    QuantumState,
    PoptOnly,
    NotPopt,
    Invalid,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::QuantumState => "quantum_state",
            Verdict::PoptOnly => "popt_only",
            Verdict::NotPopt => "not_popt",
            Verdict::Invalid => "invalid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub herm_tol: f64,
    pub eig_tol: f64,
    pub trace_tol: f64,
    pub popt: PoptOptions,
    pub orientation_tol: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            herm_tol: HERM_TOL,
            eig_tol: EIG_TOL,
            trace_tol: 1e-9,
            popt: PoptOptions::default(),
            orientation_tol: ORIENTATION_TOL,
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftKind {
    /// `φ_μ ∘ T` is completely positive; lifted to `a ↦ U(a ⊗ 𝟙)U†`.
    Homomorphism,
    /// `φ_μ` is completely positive; `φ_μ ∘ T` lifts to `a ↦ U(aᵀ ⊗ 𝟙)U†`.
    AntiHomomorphism,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub kind: LiftKind,
    pub multiplicity: usize,
    pub compression_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationTarget {
    LiftedRepresentation,
    CompressedMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub subsystems: [usize; 2],
    pub trace: Option<f64>,
    pub is_hermitian: Option<bool>,
    pub hermiticity_defect: Option<f64>,
    pub is_psd: Option<bool>,
    pub psd_witness: Option<PsdWitness>,
    pub is_popt: Option<bool>,
    pub popt_certificate: Option<PoptCertificate>,
    pub is_ppt: Option<bool>,
    pub ppt_witness: Option<PsdWitness>,
    pub lift: Option<LiftReport>,
    pub jordan_defect: Option<f64>,
    pub orientation_target: Option<OrientationTarget>,
    pub orientation: Option<OrientationVerdict>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

impl ClassificationReport {
    fn invalid(dims: (usize, usize), reasons: Vec<String>) -> Self {
        ClassificationReport {
            subsystems: [dims.0, dims.1],
            trace: None,
            is_hermitian: None,
            hermiticity_defect: None,
            is_psd: None,
            psd_witness: None,
            is_popt: None,
            popt_certificate: None,
            is_ppt: None,
            ppt_witness: None,
            lift: None,
            jordan_defect: None,
            orientation_target: None,
            orientation: None,
            verdict: Verdict::Invalid,
            reasons,
        }
    }
}

/// Validity, positivity, POPT, PPT, Choi lift and time orientation of the
/// measure with operator `rho`.
///
/// The orientation reported is that of `φ_μ ∘ T`: on its lifted
/// representation when `ρ` or `ρ^{T₁}` is positive, otherwise on the
/// compressed map itself.
pub fn classify(rho: &ComplexMatrix, dims: (usize, usize), config: &ClassifyConfig) -> Result<ClassificationReport> {
    let mut reasons = Vec::new();
    if !rho.is_square() || rho.nrows() != dims.0 * dims.1 {
        reasons.push(format!(
            "operator is {}x{}, expected {n}x{n} for subsystems ({}, {})",
            rho.nrows(),
            rho.ncols(),
            dims.0,
            dims.1,
            n = dims.0 * dims.1
        ));
        return Ok(ClassificationReport::invalid(dims, reasons));
    }
    if dims.0 < 3 || dims.1 < 3 {
        reasons.push(format!(
            "local dimensions ({}, {}) are below 3; measures there need not come from operators",
            dims.0, dims.1
        ));
    }
    let defect = rho.hermiticity_defect();
    let is_hermitian = defect <= config.herm_tol;
    if !is_hermitian {
        reasons.push(format!("hermiticity defect {defect:e} exceeds {:e}", config.herm_tol));
    }
    let trace = rho.trace();
    if (trace.re - 1.0).abs() > config.trace_tol || trace.im.abs() > config.trace_tol {
        reasons.push(format!("trace {trace} is not 1"));
    }
    if !reasons.is_empty() {
        let mut report = ClassificationReport::invalid(dims, reasons);
        report.trace = Some(trace.re);
        report.is_hermitian = Some(is_hermitian);
        report.hermiticity_defect = Some(defect);
        return Ok(report);
    }
    let rho = HermitianOperator::hermitian_part(rho);

    let psd = is_psd(&rho, config.eig_tol)?;
    let popt = check_popt(&rho, dims, &config.popt)?;
    let pt = partial_transpose_hermitian(&rho, dims, Subsystem::First)?;
    let ppt = is_psd(&pt, config.eig_tol)?;

    let phi = map_from_state(&rho, dims)?;
    let lifted = if psd.is_psd {
        let d = stinespring_dilate(&phi.compose_transpose(), true)?;
        Some((LiftKind::Homomorphism, d.representation()?, d.residual))
    } else if ppt.is_psd {
        let d = stinespring_dilate(&phi, true)?;
        Some((LiftKind::AntiHomomorphism, d.representation()?.reversed(), d.residual))
    } else {
        None
    };
    let (lift, jordan, target, orientation) = match lifted {
        Some((kind, rep, residual)) => {
            let lift = LiftReport {
                kind,
                multiplicity: rep.multiplicity(),
                compression_residual: residual,
            };
            let jd = jordan_defect(&rep, config.samples, config.seed);
            let o = orientation_verdict(&rep, config.samples, config.seed, config.orientation_tol)?;
            (Some(lift), Some(jd), OrientationTarget::LiftedRepresentation, o)
        }
        None => {
            let o = orientation_verdict(
                &phi.compose_transpose(),
                config.samples,
                config.seed,
                config.orientation_tol,
            )?;
            (None, None, OrientationTarget::CompressedMap, o)
        }
    };

    let verdict = if psd.is_psd {
        Verdict::QuantumState
    } else if popt.is_popt {
        Verdict::PoptOnly
    } else {
        Verdict::NotPopt
    };
    Ok(ClassificationReport {
        subsystems: [dims.0, dims.1],
        trace: Some(trace.re),
        is_hermitian: Some(true),
        hermiticity_defect: Some(defect),
        is_psd: Some(psd.is_psd),
        psd_witness: Some(psd),
        is_popt: Some(popt.is_popt),
        popt_certificate: Some(popt),
        is_ppt: Some(ppt.is_psd),
        ppt_witness: Some(ppt),
        lift,
        jordan_defect: jordan,
        orientation_target: Some(target),
        orientation: Some(orientation),
        verdict,
        reasons,
    })
}

/// Orientation for any operator, independent of the verdict; used to compare
/// an operator against its partial transposes.
pub fn orientation_of(
    rho: &HermitianOperator,
    dims: (usize, usize),
    config: &ClassifyConfig,
) -> Result<OrientationTag> {
    let report = classify(rho.matrix(), dims, config)?;
    report
        .orientation
        .map(|o| o.tag)
        .ok_or_else(|| Error::InvalidInput(report.reasons.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::operator::{partial_transpose, tensor};
    use crate::random::{self, haar_unitary, unit_trace_hermitian};

    fn sigma_y() -> HermitianOperator {
        let z = C64::new(0.0, 0.0);
        let m = ComplexMatrix::from_rows(&[vec![z, C64::new(0.0, -1.0)], vec![C64::new(0.0, 1.0), z]]).unwrap();
        HermitianOperator::new(m, 0.0).unwrap()
    }

    #[test]
    fn maximally_mixed_map() {
        let rho = HermitianOperator::identity(12).scale(1.0 / 12.0);
        let phi = map_from_state(&rho, (3, 4)).unwrap();
        let image = apply_map(&phi, &HermitianOperator::identity(3)).unwrap();
        let expected = ComplexMatrix::identity(4).scale_real(0.25);
        assert!((image.matrix() - &expected).max_norm() < 1e-15);
        assert!(matches!(map_from_state(&rho, (3, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn maximally_entangled_map_is_scaled_transpose() {
        let phi = map_from_state(&fixtures::max_entangled(3), (3, 3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = ComplexMatrix::matrix_unit(3, i, j);
                let expected = e.transpose().scale_real(1.0 / 3.0);
                assert!((&phi.apply_matrix(&e) - &expected).max_norm() < 1e-15);
            }
        }
    }

    #[test]
    fn state_map_roundtrip() {
        let mut rng = seeded(20);
        for k in 0..100 {
            let rho = if k % 2 == 0 {
                random::ginibre_density(&mut rng, 12, 12)
            } else {
                unit_trace_hermitian(&mut rng, 12)
            };
            let back = state_from_map(&map_from_state(&rho, (3, 4)).unwrap());
            assert!((back.matrix() - rho.matrix()).max_norm() <= 1e-10);
        }
    }

    #[test]
    fn assembled_states_of_basic_maps() {
        let swap = fixtures::swap_operator(2);
        assert!((state_from_map(&LinearMapRep::identity(2)).matrix() - swap.matrix()).max_norm() == 0.0);
        let phi2 = fixtures::max_entangled(2).scale(2.0);
        let t = state_from_map(&LinearMapRep::transpose(2));
        assert!((t.matrix() - phi2.matrix()).max_norm() < 1e-15);
        assert!(is_psd(&t, 1e-12).unwrap().is_psd);
        let tr = state_from_map(&LinearMapRep::trace_map(3));
        assert!((tr.matrix() - &ComplexMatrix::identity(9).scale_real(1.0 / 3.0)).max_norm() < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let a = random::gue(&mut seeded(21), 4);
        let out = apply_map(&LinearMapRep::identity(4), &a).unwrap();
        assert!((out.matrix() - a.matrix()).max_norm() < 1e-15);
        let y = apply_map(&LinearMapRep::transpose(2), &sigma_y()).unwrap();
        assert!((y.matrix() + sigma_y().matrix()).max_norm() < 1e-15);
        assert!(matches!(
            apply_map(&LinearMapRep::identity(3), &a),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn complete_positivity_examples() {
        let rho = random::ginibre_density(&mut seeded(22), 9, 4);
        assert!(
            is_completely_positive(&map_from_state(&rho, (3, 3)).unwrap(), 1e-9)
                .unwrap()
                .is_psd
        );
        let swap = fixtures::swap_operator(3).scale(1.0 / 3.0);
        let w = is_completely_positive(&map_from_state(&swap, (3, 3)).unwrap(), 1e-9).unwrap();
        assert!(!w.is_psd);
        assert!((w.min_eigenvalue + 1.0 / 3.0).abs() < 1e-12);
        assert!(
            is_completely_positive(&LinearMapRep::trace_map(3), 1e-9)
                .unwrap()
                .is_psd
        );
    }

    #[test]
    fn standard_choi_is_partial_transpose() {
        let rho = unit_trace_hermitian(&mut seeded(23), 12);
        let phi = map_from_state(&rho, (3, 4)).unwrap();
        let pt = partial_transpose(rho.matrix(), (3, 4), Subsystem::First).unwrap();
        assert!((phi.standard_choi().matrix() - &pt).max_norm() < 1e-14);
        assert!((phi.compose_transpose().choi.matrix() - &pt).max_norm() < 1e-14);
    }

    #[test]
    fn jordan_defect_examples() {
        let u = haar_unitary(&mut seeded(24), 3);
        assert!(jordan_defect(&LinearMapRep::unitary_conjugation(&u).unwrap(), 50, 1) <= 1e-10);
        assert!(jordan_defect(&LinearMapRep::transpose(3), 50, 1) <= 1e-10);
        let a = HermitianOperator::from_real_diagonal(&[1.0, -1.0, 0.0]);
        assert!(jordan_defect_at(&LinearMapRep::trace_map(3), &a, &a) > 0.1);
        assert!(jordan_defect(&LinearMapRep::trace_map(3), 50, 1) > 0.1);
    }

    #[test]
    fn orientation_examples() {
        let u = haar_unitary(&mut seeded(25), 3);
        let v = orientation_verdict(&LinearMapRep::unitary_conjugation(&u).unwrap(), 50, 2, 1e-8).unwrap();
        assert_eq!(v.tag, OrientationTag::Preserving);
        assert!(v.max_defect_preserving <= 1e-10 && v.max_defect_reversing > 0.1);
        assert!(v.finite_time.agrees);

        let v = orientation_verdict(&LinearMapRep::transpose(3), 50, 2, 1e-8).unwrap();
        assert_eq!(v.tag, OrientationTag::Reversing);
        assert!(v.finite_time.agrees);

        let v = orientation_verdict(&LinearMapRep::trace_map(3), 50, 2, 1e-8).unwrap();
        assert_eq!(v.tag, OrientationTag::Neither);
        assert!(v.degenerate);
        assert!(v.finite_time.agrees);
    }

    #[test]
    fn generic_compressed_maps_carry_no_orientation() {
        let rho = random::ginibre_density(&mut seeded(26), 9, 9);
        let v = orientation_verdict(&map_from_state(&rho, (3, 3)).unwrap(), 50, 3, 1e-8).unwrap();
        assert_eq!(v.tag, OrientationTag::Neither);
        assert!(!v.degenerate);
        assert!(v.finite_time.agrees);
    }

    #[test]
    fn reverse_flow_is_backwards_flow() {
        let mut rng = seeded(27);
        for t in FLOW_TIMES {
            let a = random::gue(&mut rng, 3);
            let b = random::gaussian_matrix(&mut rng, 3, 3);
            assert!(TimeFlowPair::reverse_flow_defect(t, &a, &b).unwrap() <= 1e-12);
        }
        let pair = TimeFlowPair::default();
        assert_eq!(pair.left, FlowDirection::Reverse);
        assert_eq!(pair.right, FlowDirection::Canonical);
    }

    #[test]
    fn classify_maximally_entangled() {
        let r = classify(fixtures::max_entangled(3).matrix(), (3, 3), &Default::default()).unwrap();
        assert_eq!(r.verdict, Verdict::QuantumState);
        assert_eq!(r.is_ppt, Some(false));
        assert!((r.ppt_witness.unwrap().min_eigenvalue + 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.orientation.unwrap().tag, OrientationTag::Preserving);
        assert!(r.jordan_defect.unwrap() <= 1e-8);
    }

    #[test]
    fn classify_swap() {
        let swap = fixtures::swap_operator(3).scale(1.0 / 3.0);
        let r = classify(swap.matrix(), (3, 3), &Default::default()).unwrap();
        assert_eq!(r.verdict, Verdict::PoptOnly);
        assert_eq!(r.is_psd, Some(false));
        assert!((r.psd_witness.unwrap().min_eigenvalue + 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.is_ppt, Some(true));
        assert_eq!(r.lift.unwrap().kind, LiftKind::AntiHomomorphism);
        assert_eq!(r.orientation.unwrap().tag, OrientationTag::Reversing);
    }

    #[test]
    fn classify_maximally_mixed() {
        let r = classify(
            &ComplexMatrix::identity(9).scale_real(1.0 / 9.0),
            (3, 3),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::QuantumState);
        assert_eq!(r.is_ppt, Some(true));
        assert_eq!(r.orientation.unwrap().tag, OrientationTag::Preserving);
    }

    #[test]
    fn classify_flags_invalid_input() {
        let mut m = ComplexMatrix::identity(9).scale_real(1.0 / 9.0).into_inner();
        m[(0, 1)] = C64::new(0.1, 0.0);
        let r = classify(&ComplexMatrix::new(m).unwrap(), (3, 3), &Default::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Invalid);
        assert!(r.reasons[0].contains("hermiticity"));

        let r = classify(&ComplexMatrix::identity(9), (3, 3), &Default::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Invalid);
        let r = classify(
            &ComplexMatrix::identity(4).scale_real(0.25),
            (2, 2),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Invalid);
        let r = classify(
            &ComplexMatrix::identity(9).scale_real(1.0 / 9.0),
            (3, 4),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Invalid);
    }

    #[test]
    fn classify_planted_non_popt() {
        let (rho, _, _) = fixtures::planted_non_popt(3, 3, 1.5, 28).unwrap();
        let r = classify(rho.matrix(), (3, 3), &Default::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotPopt);
    }

    #[test]
    fn partial_transpose_of_entangled_state_reverses_orientation() {
        let psi = random::unit_vector(&mut seeded(29), 9);
        let rho = HermitianOperator::ket_bra(&psi);
        let cfg = ClassifyConfig::default();
        assert_eq!(orientation_of(&rho, (3, 3), &cfg).unwrap(), OrientationTag::Preserving);
        let pt = partial_transpose_hermitian(&rho, (3, 3), Subsystem::First).unwrap();
        assert_eq!(orientation_of(&pt, (3, 3), &cfg).unwrap(), OrientationTag::Reversing);
        let pt2 = partial_transpose_hermitian(&rho, (3, 3), Subsystem::Second).unwrap();
        assert_eq!(orientation_of(&pt2, (3, 3), &cfg).unwrap(), OrientationTag::Reversing);
        let both = partial_transpose_hermitian(&pt, (3, 3), Subsystem::Second).unwrap();
        assert_eq!(orientation_of(&both, (3, 3), &cfg).unwrap(), OrientationTag::Preserving);
    }

    #[test]
    fn lifted_representation_compresses_to_the_map() {
        let rho = random::ginibre_density(&mut seeded(30), 9, 3);
        let phi_t = map_from_state(&rho, (3, 3)).unwrap().compose_transpose();
        let d = stinespring_dilate(&phi_t, true).unwrap();
        let rep = d.representation().unwrap();
        let a = random::gue(&mut seeded(31), 3);
        let lifted = rep.apply(a.matrix());
        let compressed = &(&d.v.adjoint() * &lifted) * &d.v;
        assert!((&compressed - &phi_t.apply_matrix(a.matrix())).max_norm() <= 1e-8);
        let expected = tensor(a.matrix(), &ComplexMatrix::identity(rep.multiplicity()));
        assert!((&lifted - &expected).max_norm() <= 1e-12);
    }
}
