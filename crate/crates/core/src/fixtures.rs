//! Named example families: random states, maximally entangled and SWAP
//! operators, partial transposes, Werner states, planted tables and POVMs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contexts::{coarse_grain, pvm_of_context, Context, Pvm, CONTEXT_TOL};
use crate::dilation::Povm;
use crate::error::{Error, Result};
use crate::jordan::Verdict;
use crate::measures::{
    check_no_disturbance, check_no_signalling, check_popt, tomography_family, CoarseDeclaration, ConstraintReport,
    OperatorMeasure, PoptCertificate, PoptOptions, ProductMeasure, SamplePlan, Side, TabulatedMeasure,
};
use crate::operator::{
    is_psd, partial_transpose_hermitian, ComplexMatrix, HermitianOperator, Projection, Subsystem, C64, EIG_TOL,
};
use crate::random::{self, seeded, SeededRng};

/// `SWAP |i j⟩ = |j i⟩` on `ℂ^d ⊗ ℂ^d`.
pub fn swap_operator(d: usize) -> HermitianOperator {
    let n = d * d;
    let mut m = ComplexMatrix::zeros(n, n).into_inner();
    for i in 0..d {
        for j in 0..d {
            m[(j * d + i, i * d + j)] = C64::new(1.0, 0.0);
        }
    }
    HermitianOperator::hermitian_part(&ComplexMatrix::new(m).expect("finite"))
}

/// `|Φ⁺⟩⟨Φ⁺|` with `|Φ⁺⟩ = Σ_i |ii⟩/√d`.
pub fn max_entangled(d: usize) -> HermitianOperator {
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        v[i * d + i] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    HermitianOperator::ket_bra(&v)
}

/// Singlet `(|01⟩ − |10⟩)/√2`.
pub fn singlet() -> HermitianOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    HermitianOperator::ket_bra(&[z, C64::new(s, 0.0), C64::new(-s, 0.0), z])
}

/// `(1 − p) 𝟙/d² + p · 2 P₋/(d(d − 1))` with `P₋ = (𝟙 − SWAP)/2`.
pub fn werner(d: usize, p: f64) -> Result<HermitianOperator> {
    if d < 2 || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidSpec(format!(
            "werner state needs d ≥ 2 and p in [0, 1], got d = {d}, p = {p}"
        )));
    }
    let n = d * d;
    let anti = (&HermitianOperator::identity(n) - &swap_operator(d)).scale(0.5);
    let mixed = HermitianOperator::identity(n).scale((1.0 - p) / n as f64);
    Ok(&mixed + &anti.scale(2.0 * p / (d * (d - 1)) as f64))
}

/// `(𝟙 − s |ψ₀φ₀⟩⟨ψ₀φ₀|)/(d₁d₂ − s)` for Haar-random `ψ₀, φ₀`; negative on
/// the planted product direction once `s > 1`.
pub fn planted_non_popt(
    d1: usize,
    d2: usize,
    strength: f64,
    seed: u64,
) -> Result<(HermitianOperator, Vec<C64>, Vec<C64>)> {
    let n = d1 * d2;
    if strength <= 1.0 || strength >= n as f64 {
        return Err(Error::InvalidSpec(format!("strength must lie in (1, {n})")));
    }
    let mut rng = seeded(seed);
    let psi = random::unit_vector(&mut rng, d1);
    let phi = random::unit_vector(&mut rng, d2);
    let prod: Vec<C64> = psi.iter().flat_map(|a| phi.iter().map(move |b| a * b)).collect();
    let rho = (&HermitianOperator::identity(n) - &HermitianOperator::ket_bra(&prod).scale(strength))
        .scale(1.0 / (n as f64 - strength));
    Ok((rho, psi, phi))
}

/// `{(2/3)|θ_j⟩⟨θ_j|}` with `θ_j` at angles `2πj/3` in the real plane.
pub fn trine_povm() -> Povm {
    let elements = (0..3)
        .map(|j| {
            let a = 2.0 * std::f64::consts::PI * j as f64 / 3.0;
            HermitianOperator::ket_bra(&[C64::new(a.cos(), 0.0), C64::new(a.sin(), 0.0)]).scale(2.0 / 3.0)
        })
        .collect();
    Povm::new(elements).expect("trine is a POVM")
}

/// `E_i = S^{-1/2} G_i S^{-1/2}` with `G_i` full-rank Wishart and `S = Σ G_i`.
pub fn random_povm(rng: &mut SeededRng, d: usize, k: usize) -> Povm {
    let gs: Vec<HermitianOperator> = (0..k).map(|_| random::ginibre_density(rng, d, d)).collect();
    let total = gs.iter().fold(HermitianOperator::zeros(d), |acc, g| &acc + g);
    let s = crate::operator::eig_hermitian(&total).expect("Hermitian eigensolve");
    let inv_root = s.apply(|l| C64::new(1.0 / l.sqrt(), 0.0));
    let elements = gs
        .iter()
        .map(|g| HermitianOperator::hermitian_part(&(&(&inv_root * g.matrix()) * &inv_root)))
        .collect();
    Povm::new(elements).expect("normalized Wishart POVM")
}

/// Settings `{q, 𝟙 − q}` for every tomography projector, tabulated from `ρ`.
/// Requires `ρ` to be positive on product projections.
pub fn tomography_grid_table(rho: &HermitianOperator, dims: (usize, usize)) -> Result<TabulatedMeasure> {
    let settings = |d: usize| -> Vec<Pvm> { tomography_family(d).into_iter().map(Pvm::binary).collect() };
    OperatorMeasure::new(rho.clone(), dims)?.tabulate(settings(dims.0), settings(dims.1), Vec::new())
}

fn maximal_settings(d: usize) -> Result<Vec<Pvm>> {
    let ones = vec![1; d];
    Ok(vec![
        pvm_of_context(&Context::computational(d, &ones)?),
        pvm_of_context(&Context::fourier(d, &ones)?),
    ])
}

/// Uniform table on computational and Fourier settings with mass
/// `magnitude` moved from outcome `(1,0)` to `(0,0)` in the first setting
/// pair: the left marginal then depends on the right setting by `magnitude`.
pub fn planted_signalling_table(d1: usize, d2: usize, magnitude: f64) -> Result<TabulatedMeasure> {
    if d1 < 2 || d2 < 2 {
        return Err(Error::InvalidSpec(
            "planted signalling needs local dimensions ≥ 2".into(),
        ));
    }
    let u = 1.0 / (d1 * d2) as f64;
    if !(0.0..=u).contains(&magnitude) {
        return Err(Error::InvalidSpec(format!("magnitude must lie in [0, {u}]")));
    }
    let mut table = vec![vec![vec![vec![u; d2]; d1]; 2]; 2];
    table[0][0][0][0] += magnitude;
    table[0][0][1][0] -= magnitude;
    TabulatedMeasure::new(d1, d2, maximal_settings(d1)?, maximal_settings(d2)?, Vec::new(), table)
}

/// Product table in which the left projector `|0⟩⟨0|`, shared by two maximal
/// contexts, gets probability `1/d₁` in one and `1/d₁ + magnitude` in the
/// other, while their common coarse-graining `{|0⟩⟨0|, 𝟙 − |0⟩⟨0|}` keeps
/// `1/d₁`. Non-signalling by construction.
pub fn planted_contextual_table(d1: usize, d2: usize, magnitude: f64) -> Result<TabulatedMeasure> {
    if d1 < 3 || d2 < 2 {
        return Err(Error::InvalidSpec(
            "planted contextuality needs d1 ≥ 3 and d2 ≥ 2".into(),
        ));
    }
    let base = 1.0 / d1 as f64;
    let rest = (1.0 - base - magnitude) / (d1 - 1) as f64;
    if magnitude < 0.0 || rest < 0.0 {
        return Err(Error::InvalidSpec(format!("magnitude must lie in [0, {}]", 1.0 - base)));
    }
    let v = Context::computational(d1, &vec![1; d1])?;
    let w = v.sharing_block(0, &mut seeded(0x0C0E))?;
    let pv = pvm_of_context(&v);
    let pw = pvm_of_context(&w);
    let others: Vec<usize> = (1..d1).collect();
    let merge = vec![vec![0], others];
    let coarse = coarse_grain(&pv, &merge)?;
    let left = vec![pv, pw, coarse];
    let right = vec![pvm_of_context(&Context::computational(d2, &vec![1; d2])?)];
    let local: [Vec<f64>; 3] = [
        vec![base; d1],
        std::iter::once(base + magnitude)
            .chain(std::iter::repeat_n(rest, d1 - 1))
            .collect(),
        vec![base, 1.0 - base],
    ];
    let r = 1.0 / d2 as f64;
    let table = local
        .iter()
        .map(|l| vec![l.iter().map(|&p| vec![p * r; d2]).collect::<Vec<_>>()])
        .collect();
    let decls = vec![
        CoarseDeclaration {
            side: Side::Left,
            fine: 0,
            coarse: 2,
            merge: merge.clone(),
        },
        CoarseDeclaration {
            side: Side::Left,
            fine: 1,
            coarse: 2,
            merge,
        },
    ];
    TabulatedMeasure::new(d1, d2, left, right, decls, table)
}

/// Family of generated objects.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorKind {
    HaarPure,
    /// Rank defaults to full.
    GinibreMixed {
        rank: Option<usize>,
    },
    MaxEntangled,
    SwapPopt,
    PtOf(Box<GeneratorKind>),
    Werner {
        p: f64,
    },
    PlantedSignalling {
        magnitude: f64,
    },
    PlantedContextual {
        magnitude: f64,
    },
}

pub const DEFAULT_PLANTED_MAGNITUDE: f64 = 0.05;

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::HaarPure => write!(f, "haar_pure"),
            GeneratorKind::GinibreMixed { rank: None } => write!(f, "ginibre_mixed"),
            GeneratorKind::GinibreMixed { rank: Some(r) } => write!(f, "ginibre_mixed({r})"),
            GeneratorKind::MaxEntangled => write!(f, "max_entangled"),
            GeneratorKind::SwapPopt => write!(f, "swap_popt"),
            GeneratorKind::PtOf(k) => write!(f, "pt_of({k})"),
            GeneratorKind::Werner { p } => write!(f, "werner({p})"),
            GeneratorKind::PlantedSignalling { magnitude } => write!(f, "planted_signalling({magnitude})"),
            GeneratorKind::PlantedContextual { magnitude } => write!(f, "planted_contextual({magnitude})"),
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    /// Accepts `name` or `name(arg)`, e.g. `werner(0.3)`, `pt_of(haar_pure)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(Error::InvalidSpec(format!("unbalanced parentheses in {s:?}")));
                }
                (&s[..open], Some(s[open + 1..s.len() - 1].trim()))
            }
            None => (s, None),
        };
        let number = |a: Option<&str>, what: &str| -> Result<Option<f64>> {
            a.map(|a| {
                a.parse::<f64>()
                    .map_err(|_| Error::InvalidSpec(format!("{what} expects a number, got {a:?}")))
            })
            .transpose()
        };
        let no_arg = |k: GeneratorKind| match arg {
            None => Ok(k),
            Some(_) => Err(Error::InvalidSpec(format!("{name} takes no argument"))),
        };
        match name {
            "haar_pure" => no_arg(GeneratorKind::HaarPure),
            "max_entangled" => no_arg(GeneratorKind::MaxEntangled),
            "swap_popt" => no_arg(GeneratorKind::SwapPopt),
            "ginibre_mixed" => {
                let rank = arg
                    .map(|a| {
                        a.parse::<usize>()
                            .map_err(|_| Error::InvalidSpec(format!("ginibre_mixed expects a rank, got {a:?}")))
                    })
                    .transpose()?;
                Ok(GeneratorKind::GinibreMixed { rank })
            }
            "pt_of" => {
                let inner = arg.ok_or_else(|| Error::InvalidSpec("pt_of needs an inner kind".into()))?;
                Ok(GeneratorKind::PtOf(Box::new(inner.parse()?)))
            }
            "werner" => {
                let p = number(arg, "werner")?.ok_or_else(|| Error::InvalidSpec("werner needs p".into()))?;
                Ok(GeneratorKind::Werner { p })
            }
            "planted_signalling" => Ok(GeneratorKind::PlantedSignalling {
                magnitude: number(arg, name)?.unwrap_or(DEFAULT_PLANTED_MAGNITUDE),
            }),
            "planted_contextual" => Ok(GeneratorKind::PlantedContextual {
                magnitude: number(arg, name)?.unwrap_or(DEFAULT_PLANTED_MAGNITUDE),
            }),
            other => Err(Error::InvalidSpec(format!("unknown generator kind {other:?}"))),
        }
    }
}

impl Serialize for GeneratorKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GeneratorKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dims: (usize, usize),
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, dims: (usize, usize), seed: u64) -> Self {
        GeneratorSpec { kind, dims, seed }
    }
}

/// Machine-checkable facts about a generated operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateCertificate {
    pub min_eigenvalue: f64,
    pub min_pt_eigenvalue: f64,
    pub popt: PoptCertificate,
    pub expected_class: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableCertificate {
    pub planted_magnitude: f64,
    pub no_signalling: ConstraintReport,
    pub no_disturbance: ConstraintReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Generated {
    State {
        kind: GeneratorKind,
        seed: u64,
        subsystems: [usize; 2],
        rho: HermitianOperator,
        certificate: StateCertificate,
    },
    Table {
        kind: GeneratorKind,
        seed: u64,
        #[serde(flatten)]
        table: TabulatedMeasure,
        certificate: TableCertificate,
    },
}

impl Generated {
    pub fn state(&self) -> Option<&HermitianOperator> {
        match self {
            Generated::State { rho, .. } => Some(rho),
            Generated::Table { .. } => None,
        }
    }

    pub fn table(&self) -> Option<&TabulatedMeasure> {
        match self {
            Generated::State { .. } => None,
            Generated::Table { table, .. } => Some(table),
        }
    }
}

fn square(kind: &GeneratorKind, dims: (usize, usize)) -> Result<usize> {
    if dims.0 != dims.1 {
        return Err(Error::InvalidSpec(format!(
            "{kind} needs equal local dimensions, got {dims:?}"
        )));
    }
    Ok(dims.0)
}

/// Operator and the class it belongs to by construction.
fn build_state(
    kind: &GeneratorKind,
    dims: (usize, usize),
    rng: &mut SeededRng,
) -> Result<(HermitianOperator, Verdict)> {
    let n = dims.0 * dims.1;
    Ok(match kind {
        GeneratorKind::HaarPure => (
            HermitianOperator::ket_bra(&random::unit_vector(rng, n)),
            Verdict::QuantumState,
        ),
        GeneratorKind::GinibreMixed { rank } => {
            let r = rank.unwrap_or(n);
            if r == 0 || r > n {
                return Err(Error::InvalidSpec(format!("ginibre rank must lie in 1..={n}")));
            }
            (random::ginibre_density(rng, n, r), Verdict::QuantumState)
        }
        GeneratorKind::MaxEntangled => (max_entangled(square(kind, dims)?), Verdict::QuantumState),
        GeneratorKind::SwapPopt => {
            let d = square(kind, dims)?;
            (swap_operator(d).scale(1.0 / d as f64), Verdict::PoptOnly)
        }
        GeneratorKind::Werner { p } => (werner(square(kind, dims)?, *p)?, Verdict::QuantumState),
        GeneratorKind::PtOf(inner) => {
            let (base, base_class) = build_state(inner, dims, rng)?;
            let pt = partial_transpose_hermitian(&base, dims, Subsystem::First)?;
            let class = if is_psd(&pt, EIG_TOL)?.is_psd {
                Verdict::QuantumState
            } else if base_class == Verdict::QuantumState {
                // ⟨ψφ|ρ^{T₁}|ψφ⟩ = ⟨ψ̄φ|ρ|ψ̄φ⟩ ≥ 0
                Verdict::PoptOnly
            } else {
                return Err(Error::InvalidSpec(format!(
                    "{kind}: partial transpose of a non-positive operator has no certified class"
                )));
            };
            (pt, class)
        }
        GeneratorKind::PlantedSignalling { .. } | GeneratorKind::PlantedContextual { .. } => {
            return Err(Error::InvalidSpec(format!("{kind} generates a table, not an operator")))
        }
    })
}

/// Builds the object described by `spec` together with its certificate.
pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    let dims = spec.dims;
    if dims.0 < 2 || dims.1 < 2 {
        return Err(Error::InvalidSpec(format!(
            "local dimensions must be ≥ 2, got {dims:?}"
        )));
    }
    let table = match &spec.kind {
        GeneratorKind::PlantedSignalling { magnitude } => {
            Some((planted_signalling_table(dims.0, dims.1, *magnitude)?, *magnitude))
        }
        GeneratorKind::PlantedContextual { magnitude } => {
            Some((planted_contextual_table(dims.0, dims.1, *magnitude)?, *magnitude))
        }
        _ => None,
    };
    if let Some((table, magnitude)) = table {
        let mu = ProductMeasure::Tabulated(table.clone());
        let plan = SamplePlan::default();
        let certificate = TableCertificate {
            planted_magnitude: magnitude,
            no_signalling: check_no_signalling(&mu, &plan, crate::measures::TAB_TOL)?,
            no_disturbance: check_no_disturbance(&mu, &plan, crate::measures::TAB_TOL)?,
        };
        return Ok(Generated::Table {
            kind: spec.kind.clone(),
            seed: spec.seed,
            table,
            certificate,
        });
    }
    let mut rng = seeded(spec.seed);
    let (rho, expected_class) = build_state(&spec.kind, dims, &mut rng)?;
    let min_eigenvalue = is_psd(&rho, EIG_TOL)?.min_eigenvalue;
    let min_pt_eigenvalue =
        is_psd(&partial_transpose_hermitian(&rho, dims, Subsystem::First)?, EIG_TOL)?.min_eigenvalue;
    let popt = check_popt(
        &rho,
        dims,
        &PoptOptions {
            seed: spec.seed,
            ..Default::default()
        },
    )?;
    Ok(Generated::State {
        kind: spec.kind.clone(),
        seed: spec.seed,
        subsystems: [dims.0, dims.1],
        rho,
        certificate: StateCertificate {
            min_eigenvalue,
            min_pt_eigenvalue,
            popt,
            expected_class,
        },
    })
}

/// Rank-one projector onto a computational basis vector.
pub fn basis_projection(d: usize, k: usize) -> Projection {
    let mut v = vec![C64::new(0.0, 0.0); d];
    v[k] = C64::new(1.0, 0.0);
    Projection::onto_vector(&v).expect("unit vector")
}

/// Two-outcome PVM `{q, 𝟙 − q}` checked against the context tolerance.
pub fn binary_pvm(q: Projection) -> Result<Pvm> {
    let c = q.complement();
    Pvm::new(vec![q, c], CONTEXT_TOL)
}
