//! Product measures on pairs of local projections: constraint checks,
//! linear reconstruction of the underlying operator, and the POPT test.

use std::fmt;

use nalgebra::{DMatrix, DVector, SVD};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contexts::{pvm_of_context, random_shape, Context, Pvm, CONTEXT_TOL};
use crate::error::{Error, Result};
use crate::operator::{eig_hermitian, tensor, ComplexMatrix, HermitianOperator, Projection, C64};
use crate::random::{self, seeded};

/// Tolerance on tabulated probabilities leaving `[0, 1]`.
pub const TAB_TOL: f64 = 1e-9;
/// Tolerance on normalization (`tr ρ = 1`, rows of a table summing to one).
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Tolerance used to match a queried projection against tabulated PVM elements.
pub const MATCH_TOL: f64 = 1e-9;

/// Which local factor a setting lives on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// A measure `μ(q₁, q₂) = tr[ρ (q₁ ⊗ q₂)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateDocument", into = "StateDocument")]
pub struct OperatorMeasure {
    rho: HermitianOperator,
    dims: (usize, usize),
}

/// Wire format of a bipartite operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateDocument {
    pub subsystems: [usize; 2],
    pub rho: HermitianOperator,
}

impl TryFrom<StateDocument> for OperatorMeasure {
    type Error = Error;
    fn try_from(s: StateDocument) -> Result<Self> {
        OperatorMeasure::new(s.rho, (s.subsystems[0], s.subsystems[1]))
    }
}

impl From<OperatorMeasure> for StateDocument {
    fn from(m: OperatorMeasure) -> Self {
        StateDocument {
            subsystems: [m.dims.0, m.dims.1],
            rho: m.rho,
        }
    }
}

pub(crate) fn check_dims(rho: &HermitianOperator, dims: (usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || rho.dim() != dims.0 * dims.1 {
        return Err(Error::Dimension(format!(
            "operator of dimension {} does not act on ℂ^{}⊗ℂ^{}",
            rho.dim(),
            dims.0,
            dims.1
        )));
    }
    Ok(())
}

impl OperatorMeasure {
    /// Requires `tr ρ = 1` within [`NORMALIZATION_TOL`]; `ρ` need not be positive.
    pub fn new(rho: HermitianOperator, dims: (usize, usize)) -> Result<Self> {
        check_dims(&rho, dims)?;
        let tr = rho.trace();
        if (tr - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidInput(format!("measure is not normalized: tr ρ = {tr}")));
        }
        Ok(OperatorMeasure { rho, dims })
    }

    pub fn rho(&self) -> &HermitianOperator {
        &self.rho
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn eval(&self, q1: &Projection, q2: &Projection) -> Result<f64> {
        if q1.dim() != self.dims.0 || q2.dim() != self.dims.1 {
            return Err(Error::Dimension(format!(
                "projections of dimensions ({}, {}) queried on ℂ^{}⊗ℂ^{}",
                q1.dim(),
                q2.dim(),
                self.dims.0,
                self.dims.1
            )));
        }
        let v = self.rho.expectation(&tensor(q1.matrix(), q2.matrix()));
        assert!(
            v.im.abs() <= 1e-10 * (1.0 + v.re.abs()),
            "imaginary part {} in a Hermitian expectation",
            v.im
        );
        Ok(v.re)
    }

    /// Restricts the measure to the given local settings, without checking
    /// that the resulting values lie in `[0, 1]`.
    pub fn tabulate_raw(&self, left: &[Pvm], right: &[Pvm]) -> Result<Table> {
        let mut table = Vec::with_capacity(left.len());
        for l in left {
            let mut row = Vec::with_capacity(right.len());
            for r in right {
                let mut block = Vec::with_capacity(l.len());
                for q1 in l.elements() {
                    block.push(
                        r.elements()
                            .iter()
                            .map(|q2| self.eval(q1, q2))
                            .collect::<Result<Vec<f64>>>()?,
                    );
                }
                row.push(block);
            }
            table.push(row);
        }
        Ok(table)
    }

    /// Restriction to the given settings as a validated tabulated measure.
    pub fn tabulate(
        &self,
        left: Vec<Pvm>,
        right: Vec<Pvm>,
        coarse: Vec<CoarseDeclaration>,
    ) -> Result<TabulatedMeasure> {
        let table = self.tabulate_raw(&left, &right)?;
        TabulatedMeasure::new(self.dims.0, self.dims.1, left, right, coarse, table)
    }
}

/// Probabilities indexed as `table[x][y][i][j]`: left setting `x`, right
/// setting `y`, left outcome `i`, right outcome `j`.
pub type Table = Vec<Vec<Vec<Vec<f64>>>>;

/// Declares that setting `coarse` on `side` is the coarse-graining of setting
/// `fine` obtained by merging fine outcomes `merge[k]` into coarse outcome `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseDeclaration {
    #[serde(default)]
    pub side: Side,
    pub fine: usize,
    pub coarse: usize,
    pub merge: Vec<Vec<usize>>,
}

/// A finite scenario: local PVM settings and a probability table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedJson", into = "TabulatedJson")]
pub struct TabulatedMeasure {
    d1: usize,
    d2: usize,
    left_pvms: Vec<Pvm>,
    right_pvms: Vec<Pvm>,
    coarse: Vec<CoarseDeclaration>,
    table: Table,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabulatedJson {
    pub d1: usize,
    pub d2: usize,
    pub left_pvms: Vec<Pvm>,
    pub right_pvms: Vec<Pvm>,
    #[serde(default)]
    pub coarse: Vec<CoarseDeclaration>,
    pub table: Table,
}

impl TryFrom<TabulatedJson> for TabulatedMeasure {
    type Error = Error;
    fn try_from(j: TabulatedJson) -> Result<Self> {
        TabulatedMeasure::new(j.d1, j.d2, j.left_pvms, j.right_pvms, j.coarse, j.table)
    }
}

impl From<TabulatedMeasure> for TabulatedJson {
    fn from(t: TabulatedMeasure) -> Self {
        TabulatedJson {
            d1: t.d1,
            d2: t.d2,
            left_pvms: t.left_pvms,
            right_pvms: t.right_pvms,
            coarse: t.coarse,
            table: t.table,
        }
    }
}

fn check_table_shape(left: &[Pvm], right: &[Pvm], table: &Table) -> Result<()> {
    if table.len() != left.len() {
        return Err(Error::Dimension(format!(
            "table has {} left settings, expected {}",
            table.len(),
            left.len()
        )));
    }
    for (x, row) in table.iter().enumerate() {
        if row.len() != right.len() {
            return Err(Error::Dimension(format!("table[{x}] has {} right settings", row.len())));
        }
        for (y, block) in row.iter().enumerate() {
            if block.len() != left[x].len() || block.iter().any(|b| b.len() != right[y].len()) {
                return Err(Error::Dimension(format!(
                    "table[{x}][{y}] does not match {} x {} outcomes",
                    left[x].len(),
                    right[y].len()
                )));
            }
        }
    }
    Ok(())
}

impl TabulatedMeasure {
    pub fn new(
        d1: usize,
        d2: usize,
        left_pvms: Vec<Pvm>,
        right_pvms: Vec<Pvm>,
        coarse: Vec<CoarseDeclaration>,
        table: Table,
    ) -> Result<Self> {
        if left_pvms.is_empty() || right_pvms.is_empty() {
            return Err(Error::InvalidInput(
                "a tabulated measure needs settings on both sides".into(),
            ));
        }
        if left_pvms.iter().any(|p| p.dim() != d1) || right_pvms.iter().any(|p| p.dim() != d2) {
            return Err(Error::Dimension(format!("settings do not act on ℂ^{d1}⊗ℂ^{d2}")));
        }
        check_table_shape(&left_pvms, &right_pvms, &table)?;
        for (x, row) in table.iter().enumerate() {
            for (y, block) in row.iter().enumerate() {
                let mut total = 0.0;
                for (i, outcomes) in block.iter().enumerate() {
                    for (j, &p) in outcomes.iter().enumerate() {
                        if !p.is_finite() || !(-TAB_TOL..=1.0 + TAB_TOL).contains(&p) {
                            return Err(Error::InvalidInput(format!(
                                "table[{x}][{y}][{i}][{j}] = {p} is not a probability"
                            )));
                        }
                        total += p;
                    }
                }
                if (total - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::InvalidInput(format!(
                        "setting pair ({x}, {y}) sums to {total}, not 1"
                    )));
                }
            }
        }
        for decl in &coarse {
            let pvms = match decl.side {
                Side::Left => &left_pvms,
                Side::Right => &right_pvms,
            };
            validate_declaration(decl, pvms)?;
        }
        Ok(TabulatedMeasure {
            d1,
            d2,
            left_pvms,
            right_pvms,
            coarse,
            table,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn left_pvms(&self) -> &[Pvm] {
        &self.left_pvms
    }

    pub fn right_pvms(&self) -> &[Pvm] {
        &self.right_pvms
    }

    pub fn coarse(&self) -> &[CoarseDeclaration] {
        &self.coarse
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn prob(&self, x: usize, y: usize, i: usize, j: usize) -> f64 {
        self.table[x][y][i][j]
    }

    fn pvms(&self, side: Side) -> &[Pvm] {
        match side {
            Side::Left => &self.left_pvms,
            Side::Right => &self.right_pvms,
        }
    }

    fn resolve(&self, side: Side, q: &Projection) -> Result<Query> {
        let d = match side {
            Side::Left => self.d1,
            Side::Right => self.d2,
        };
        if q.dim() != d {
            return Err(Error::Dimension(format!(
                "{side} projection has dimension {}, expected {d}",
                q.dim()
            )));
        }
        if q.distance(&Projection::identity(d)) <= MATCH_TOL {
            return Ok(Query::Identity);
        }
        self.pvms(side)
            .iter()
            .enumerate()
            .find_map(|(x, pvm)| pvm.position(q, MATCH_TOL).map(|i| Query::Element(x, i)))
            .ok_or_else(|| {
                Error::UnsupportedQuery(format!("{side} projection is not an element of any tabulated setting"))
            })
    }

    /// Looks the pair up among the tabulated settings. The identity is
    /// answered by summing over the outcomes of the first matching setting.
    pub fn eval(&self, q1: &Projection, q2: &Projection) -> Result<f64> {
        let a = self.resolve(Side::Left, q1)?;
        let b = self.resolve(Side::Right, q2)?;
        Ok(match (a, b) {
            (Query::Element(x, i), Query::Element(y, j)) => self.table[x][y][i][j],
            (Query::Element(x, i), Query::Identity) => self.table[x][0][i].iter().sum(),
            (Query::Identity, Query::Element(y, j)) => self.table[0][y].iter().map(|r| r[j]).sum(),
            (Query::Identity, Query::Identity) => self.table[0][0].iter().flatten().sum(),
        })
    }

    /// Tomography-family projectors that are not elements of any setting.
    pub fn missing_grid_entries(&self) -> Vec<String> {
        let mut missing = Vec::new();
        for (side, d) in [(Side::Left, self.d1), (Side::Right, self.d2)] {
            for (q, label) in tomography_family(d).iter().zip(tomography_labels(d)) {
                if self.resolve(side, q).is_err() {
                    missing.push(format!("{side} {label}"));
                }
            }
        }
        missing
    }
}

#[derive(Clone, Copy, Debug)]
enum Query {
    Identity,
    Element(usize, usize),
}

fn validate_declaration(decl: &CoarseDeclaration, pvms: &[Pvm]) -> Result<()> {
    let fine = pvms
        .get(decl.fine)
        .ok_or_else(|| Error::Partition(format!("{} setting {} does not exist", decl.side, decl.fine)))?;
    let coarse = pvms
        .get(decl.coarse)
        .ok_or_else(|| Error::Partition(format!("{} setting {} does not exist", decl.side, decl.coarse)))?;
    if decl.merge.len() != coarse.len() {
        return Err(Error::Partition(format!(
            "merge has {} groups but {} setting {} has {} outcomes",
            decl.merge.len(),
            decl.side,
            decl.coarse,
            coarse.len()
        )));
    }
    let merged = crate::contexts::coarse_grain(fine, &decl.merge)?;
    for (k, (m, c)) in merged.elements().iter().zip(coarse.elements()).enumerate() {
        if m.distance(c) > CONTEXT_TOL {
            return Err(Error::Partition(format!(
                "{} setting {} outcome {k} is not the declared merge of setting {}",
                decl.side, decl.coarse, decl.fine
            )));
        }
    }
    Ok(())
}

/// Either operator-backed or a finite table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProductMeasure {
    OperatorBacked(OperatorMeasure),
    Tabulated(TabulatedMeasure),
}

impl ProductMeasure {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            ProductMeasure::OperatorBacked(m) => m.dims(),
            ProductMeasure::Tabulated(t) => t.dims(),
        }
    }

    /// `μ(q₁, q₂)`; tabulated measures answer only on their own settings.
    pub fn eval(&self, q1: &Projection, q2: &Projection) -> Result<f64> {
        match self {
            ProductMeasure::OperatorBacked(m) => m.eval(q1, q2),
            ProductMeasure::Tabulated(t) => t.eval(q1, q2),
        }
    }

    /// `μ(q₁) = μ(q₁, 𝟙₂)`.
    pub fn marginal_left(&self, q1: &Projection) -> Result<f64> {
        self.eval(q1, &Projection::identity(self.dims().1))
    }

    /// `μ(q₂) = μ(𝟙₁, q₂)`.
    pub fn marginal_right(&self, q2: &Projection) -> Result<f64> {
        self.eval(&Projection::identity(self.dims().0), q2)
    }

    /// Reconstructs the operator behind the measure. Tabulated measures must
    /// contain the full tomography grid.
    pub fn gleason_extend(&self, opts: &ReconstructionOptions) -> Result<Reconstruction> {
        if let ProductMeasure::Tabulated(t) = self {
            let missing = t.missing_grid_entries();
            if !missing.is_empty() {
                return Err(Error::UnsupportedQuery(format!(
                    "table does not cover the tomography grid; missing: {}",
                    missing.join(", ")
                )));
            }
        }
        gleason_extend(|q1, q2| self.eval(q1, q2), self.dims(), opts)
    }
}

/// Outcome of a constraint check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub satisfied: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    /// Where the maximal violation was found.
    pub witness: Option<String>,
    /// Number of individual equalities tested.
    pub checks: usize,
}

#[derive(Default)]
struct ViolationTracker {
    max: f64,
    witness: Option<String>,
    checks: usize,
}

impl ViolationTracker {
    fn record(&mut self, violation: f64, witness: impl FnOnce() -> String) {
        self.checks += 1;
        if violation > self.max || self.witness.is_none() {
            if violation > self.max {
                self.max = violation;
            }
            self.witness = Some(witness());
        }
    }

    fn merge(&mut self, other: ViolationTracker) {
        self.checks += other.checks;
        if other.max > self.max || self.witness.is_none() {
            self.max = self.max.max(other.max);
            self.witness = other.witness;
        }
    }

    fn report(self, tol: f64) -> ConstraintReport {
        ConstraintReport {
            satisfied: self.max <= tol,
            max_violation: self.max,
            tolerance: tol,
            witness: self.witness,
            checks: self.checks,
        }
    }
}

/// How contexts are sampled for operator-backed checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    /// Number of random context pairs.
    pub contexts: usize,
    pub seed: u64,
    /// Also include computational and Fourier contexts.
    pub structured: bool,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            contexts: 200,
            seed: 0,
            structured: true,
        }
    }
}

impl SamplePlan {
    fn contexts_for(&self, dim: usize, stream: u64) -> Result<Vec<Context>> {
        let mut out = Vec::new();
        if self.structured {
            let ones = vec![1; dim];
            out.push(Context::computational(dim, &ones)?);
            out.push(Context::fourier(dim, &ones)?);
            if dim > 2 {
                out.push(Context::computational(dim, &[dim - 1, 1])?);
                out.push(Context::fourier(dim, &[1, dim - 1])?);
            }
        }
        let mut rng = seeded(self.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for _ in 0..self.contexts {
            let shape = random_shape(&mut rng, dim, 2);
            let seed = rng.random::<u64>();
            out.push(crate::contexts::random_context(dim, &shape, seed)?);
        }
        Ok(out)
    }
}

/// No-signalling: for every sampled context pair, summing over one side's
/// outcomes reproduces the other side's marginal.
pub fn check_no_signalling(mu: &ProductMeasure, plan: &SamplePlan, tol: f64) -> Result<ConstraintReport> {
    match mu {
        ProductMeasure::Tabulated(t) => Ok(table_no_signalling(&t.left_pvms, &t.right_pvms, &t.table).report(tol)),
        ProductMeasure::OperatorBacked(m) => {
            let (d1, d2) = m.dims();
            let left = plan.contexts_for(d1, 1)?;
            let right = plan.contexts_for(d2, 2)?;
            let trackers = left
                .par_iter()
                .zip(right.par_iter())
                .enumerate()
                .map(|(k, (v1, v2))| operator_no_signalling_pair(m, k, v1, v2))
                .collect::<Result<Vec<_>>>()?;
            let mut all = ViolationTracker::default();
            for t in trackers {
                all.merge(t);
            }
            Ok(all.report(tol))
        }
    }
}

fn operator_no_signalling_pair(m: &OperatorMeasure, k: usize, v1: &Context, v2: &Context) -> Result<ViolationTracker> {
    let (d1, d2) = m.dims();
    let p1 = pvm_of_context(v1);
    let p2 = pvm_of_context(v2);
    let mut t = ViolationTracker::default();
    for (i, q1) in p1.elements().iter().enumerate() {
        let mut sum = 0.0;
        for q2 in p2.elements() {
            sum += m.eval(q1, q2)?;
        }
        let marginal = m.eval(q1, &Projection::identity(d2))?;
        t.record((sum - marginal).abs(), || format!("context pair {k}: left outcome {i}"));
    }
    for (j, q2) in p2.elements().iter().enumerate() {
        let mut sum = 0.0;
        for q1 in p1.elements() {
            sum += m.eval(q1, q2)?;
        }
        let marginal = m.eval(&Projection::identity(d1), q2)?;
        t.record((sum - marginal).abs(), || {
            format!("context pair {k}: right outcome {j}")
        });
    }
    Ok(t)
}

fn table_no_signalling(left: &[Pvm], right: &[Pvm], table: &Table) -> ViolationTracker {
    let mut t = ViolationTracker::default();
    for x in 0..left.len() {
        for i in 0..left[x].len() {
            let marg: Vec<f64> = (0..right.len()).map(|y| table[x][y][i].iter().sum()).collect();
            for y in 0..marg.len() {
                for y2 in y + 1..marg.len() {
                    t.record((marg[y] - marg[y2]).abs(), || {
                        format!("left setting {x} outcome {i}: marginal differs between right settings {y} and {y2}")
                    });
                }
            }
        }
    }
    for y in 0..right.len() {
        for j in 0..right[y].len() {
            let marg: Vec<f64> = (0..left.len())
                .map(|x| table[x][y].iter().map(|r| r[j]).sum())
                .collect();
            for x in 0..marg.len() {
                for x2 in x + 1..marg.len() {
                    t.record((marg[x] - marg[x2]).abs(), || {
                        format!("right setting {y} outcome {j}: marginal differs between left settings {x} and {x2}")
                    });
                }
            }
        }
    }
    t
}

fn table_marginalisation(left: &[Pvm], right: &[Pvm], coarse: &[CoarseDeclaration], table: &Table) -> ViolationTracker {
    let mut t = ViolationTracker::default();
    for decl in coarse {
        let (f, c) = (decl.fine, decl.coarse);
        match decl.side {
            Side::Left => {
                for y in 0..right.len() {
                    for (k, group) in decl.merge.iter().enumerate() {
                        let mut coarse_marg = 0.0;
                        let mut fine_marg = 0.0;
                        for j in 0..right[y].len() {
                            let fine: f64 = group.iter().map(|&i| table[f][y][i][j]).sum();
                            let coarse_v = table[c][y][k][j];
                            coarse_marg += coarse_v;
                            fine_marg += fine;
                            t.record((fine - coarse_v).abs(), || {
                                format!("left setting {c} outcome {k} vs merge of setting {f}, right setting {y} outcome {j}")
                            });
                        }
                        t.record((fine_marg - coarse_marg).abs(), || {
                            format!(
                                "left setting {c} outcome {k} vs merge of setting {f}, right setting {y} traced out"
                            )
                        });
                    }
                }
            }
            Side::Right => {
                for x in 0..left.len() {
                    for (k, group) in decl.merge.iter().enumerate() {
                        let mut coarse_marg = 0.0;
                        let mut fine_marg = 0.0;
                        for i in 0..left[x].len() {
                            let fine: f64 = group.iter().map(|&j| table[x][f][i][j]).sum();
                            let coarse_v = table[x][c][i][k];
                            coarse_marg += coarse_v;
                            fine_marg += fine;
                            t.record((fine - coarse_v).abs(), || {
                                format!("right setting {c} outcome {k} vs merge of setting {f}, left setting {x} outcome {i}")
                            });
                        }
                        t.record((fine_marg - coarse_marg).abs(), || {
                            format!(
                                "right setting {c} outcome {k} vs merge of setting {f}, left setting {x} traced out"
                            )
                        });
                    }
                }
            }
        }
    }
    t
}

/// No-disturbance: every declared coarse-graining agrees with the
/// marginalisation of each of its supercontexts, jointly with every context
/// of the other side (including the trivial one), plus no-signalling.
///
/// Tabulated measures use their declarations and ignore `plan`. Operator-backed
/// measures are restricted to `plan.contexts` random scenarios, each made of two
/// maximal contexts per side sharing a projector, their common two-outcome
/// coarse-graining, and the trivial context.
pub fn check_no_disturbance(mu: &ProductMeasure, plan: &SamplePlan, tol: f64) -> Result<ConstraintReport> {
    match mu {
        ProductMeasure::Tabulated(t) => {
            let mut tracker = table_marginalisation(&t.left_pvms, &t.right_pvms, &t.coarse, &t.table);
            tracker.merge(table_no_signalling(&t.left_pvms, &t.right_pvms, &t.table));
            Ok(tracker.report(tol))
        }
        ProductMeasure::OperatorBacked(m) => {
            let trackers = (0..plan.contexts)
                .into_par_iter()
                .map(|k| {
                    let mut rng = seeded(plan.seed.wrapping_add(k as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
                    let (left, left_decl) = overlapping_settings(m.dims().0, Side::Left, &mut rng)?;
                    let (right, right_decl) = overlapping_settings(m.dims().1, Side::Right, &mut rng)?;
                    let table = m.tabulate_raw(&left, &right)?;
                    let decls: Vec<CoarseDeclaration> = left_decl.into_iter().chain(right_decl).collect();
                    let mut t = table_marginalisation(&left, &right, &decls, &table);
                    t.merge(table_no_signalling(&left, &right, &table));
                    if let Some(w) = t.witness.take() {
                        t.witness = Some(format!("scenario {k}: {w}"));
                    }
                    Ok(t)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut all = ViolationTracker::default();
            for t in trackers {
                all.merge(t);
            }
            Ok(all.report(tol))
        }
    }
}

/// Settings `[V, V', {P, 𝟙-P}, 𝟙]` where `V` and `V'` are random contexts
/// sharing the projector `P`.
fn overlapping_settings(
    dim: usize,
    side: Side,
    rng: &mut random::SeededRng,
) -> Result<(Vec<Pvm>, Vec<CoarseDeclaration>)> {
    let shared_rank = rng.random_range(1..dim);
    let mut shape = vec![shared_rank];
    shape.extend(std::iter::repeat_n(1, dim - shared_rank));
    let v = crate::contexts::random_context(dim, &shape, rng.random())?;
    let w = v.sharing_block(0, rng)?;
    let pv = pvm_of_context(&v);
    let pw = pvm_of_context(&w);
    let rest_v: Vec<usize> = (1..pv.len()).collect();
    let rest_w: Vec<usize> = (1..pw.len()).collect();
    let coarse = crate::contexts::coarse_grain(&pv, &[vec![0], rest_v.clone()])?;
    let trivial = Pvm::new(vec![Projection::identity(dim)], CONTEXT_TOL)?;
    let all_v: Vec<usize> = (0..pv.len()).collect();
    let all_w: Vec<usize> = (0..pw.len()).collect();
    let decls = vec![
        CoarseDeclaration {
            side,
            fine: 0,
            coarse: 2,
            merge: vec![vec![0], rest_v],
        },
        CoarseDeclaration {
            side,
            fine: 1,
            coarse: 2,
            merge: vec![vec![0], rest_w],
        },
        CoarseDeclaration {
            side,
            fine: 0,
            coarse: 3,
            merge: vec![all_v],
        },
        CoarseDeclaration {
            side,
            fine: 1,
            coarse: 3,
            merge: vec![all_w],
        },
    ];
    Ok((vec![pv, pw, coarse, trivial], decls))
}

/// Rank-one projectors onto `|j⟩`, `(|j⟩+|k⟩)/√2` and `(|j⟩+i|k⟩)/√2` for
/// `j < k`; their real span is the full space of Hermitian operators.
pub fn tomography_family(d: usize) -> Vec<Projection> {
    let mut out = Vec::with_capacity(d * d);
    let zero = C64::new(0.0, 0.0);
    for j in 0..d {
        let mut v = vec![zero; d];
        v[j] = C64::new(1.0, 0.0);
        out.push(Projection::onto_vector(&v).expect("unit vector"));
    }
    for j in 0..d {
        for k in j + 1..d {
            for phase in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut v = vec![zero; d];
                v[j] = C64::new(1.0, 0.0);
                v[k] = phase;
                out.push(Projection::onto_vector(&v).expect("non-zero vector"));
            }
        }
    }
    out
}

/// Labels aligned with [`tomography_family`].
pub fn tomography_labels(d: usize) -> Vec<String> {
    let mut out: Vec<String> = (0..d).map(|j| format!("|{j}>")).collect();
    for j in 0..d {
        for k in j + 1..d {
            out.push(format!("|{j}>+|{k}>"));
            out.push(format!("|{j}>+i|{k}>"));
        }
    }
    out
}

/// Rank of the Hilbert–Schmidt Gram matrix of a family of operators.
pub fn gram_rank(family: &[Projection]) -> usize {
    let n = family.len();
    let g = DMatrix::from_fn(n, n, |a, b| family[a].op().expectation(family[b].matrix()).re);
    let sv = g.singular_values();
    let cutoff = 1e-10 * sv.max().max(1.0);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Orthonormal (Hilbert–Schmidt) basis of Hermitian `d × d` matrices.
fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        out.push(ComplexMatrix::matrix_unit(d, j, j));
    }
    for j in 0..d {
        for k in j + 1..d {
            let ejk = ComplexMatrix::matrix_unit(d, j, k);
            let ekj = ComplexMatrix::matrix_unit(d, k, j);
            out.push((&ejk + &ekj).scale_real(s));
            out.push((&ejk - &ekj).scale(C64::new(0.0, s)));
        }
    }
    out
}

/// Options for [`gleason_extend`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionOptions {
    /// Permit local dimension 2 (only meaningful for operator-backed oracles).
    pub allow_qubit: bool,
    pub residual_threshold: f64,
    pub max_condition: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        ReconstructionOptions {
            allow_qubit: false,
            residual_threshold: 1e-8,
            max_condition: 1e10,
        }
    }
}

/// Oracle values on the product of the local tomography families, each
/// extended by the identity (stored last).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductGrid {
    pub dims: (usize, usize),
    pub values: Vec<Vec<f64>>,
}

impl ProductGrid {
    fn local(d: usize) -> Vec<Projection> {
        let mut f = tomography_family(d);
        f.push(Projection::identity(d));
        f
    }

    pub fn tabulate<F>(mut oracle: F, dims: (usize, usize)) -> Result<Self>
    where
        F: FnMut(&Projection, &Projection) -> Result<f64>,
    {
        let left = Self::local(dims.0);
        let right = Self::local(dims.1);
        let mut values = Vec::with_capacity(left.len());
        for q1 in &left {
            values.push(right.iter().map(|q2| oracle(q1, q2)).collect::<Result<Vec<f64>>>()?);
        }
        Ok(ProductGrid { dims, values })
    }
}

/// Reconstructed operator together with the quality of the solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub subsystems: [usize; 2],
    pub rho: HermitianOperator,
    /// Max-abs residual of the least-squares solve.
    pub residual: f64,
    pub condition_number: f64,
}

fn check_reconstruction_dims(dims: (usize, usize), opts: &ReconstructionOptions) -> Result<()> {
    let min = if opts.allow_qubit { 2 } else { 3 };
    if dims.0 < min || dims.1 < min {
        return Err(Error::Dimension(format!(
            "reconstruction needs local dimensions ≥ {min}, got ({}, {})",
            dims.0, dims.1
        )));
    }
    Ok(())
}

/// Solves `tr[ρ (q₁ ⊗ q₂)] = value` over the grid for Hermitian `ρ` in the
/// product Hermitian basis, as one least-squares system.
pub fn reconstruct(grid: &ProductGrid, opts: &ReconstructionOptions) -> Result<Reconstruction> {
    let (d1, d2) = grid.dims;
    check_reconstruction_dims(grid.dims, opts)?;
    let (left, right) = (ProductGrid::local(d1), ProductGrid::local(d2));
    if grid.values.len() != left.len() || grid.values.iter().any(|r| r.len() != right.len()) {
        return Err(Error::Dimension(
            "grid shape does not match the tomography families".into(),
        ));
    }
    let (b1, b2) = (hermitian_basis(d1), hermitian_basis(d2));
    let local_design = |fam: &[Projection], basis: &[ComplexMatrix]| {
        DMatrix::from_fn(fam.len(), basis.len(), |r, k| fam[r].op().expectation(&basis[k]).re)
    };
    let m1 = local_design(&left, &b1);
    let m2 = local_design(&right, &b2);
    let a = m1.kronecker(&m2);
    let b = DVector::from_iterator(left.len() * right.len(), grid.values.iter().flatten().copied());

    let svd = SVD::new(a.clone(), true, true);
    let sv = &svd.singular_values;
    let condition_number = sv.max() / sv.min();
    if !condition_number.is_finite() || condition_number > opts.max_condition {
        return Err(Error::Reconstruction(format!(
            "design matrix is ill-conditioned (condition number {condition_number:e})"
        )));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Reconstruction(format!("least-squares solve failed: {e}")))?;
    let residual = (&a * &x - &b).amax();

    let n = d1 * d2;
    let mut rho = ComplexMatrix::zeros(n, n);
    for (k, g1) in b1.iter().enumerate() {
        for (l, g2) in b2.iter().enumerate() {
            let coeff = x[k * b2.len() + l];
            if coeff != 0.0 {
                rho = &rho + &tensor(g1, g2).scale_real(coeff);
            }
        }
    }
    if residual > opts.residual_threshold {
        return Err(Error::InconsistentOracle {
            reason: "oracle values are not those of any linear functional".into(),
            residual,
            threshold: opts.residual_threshold,
        });
    }
    let norm = grid.values[left.len() - 1][right.len() - 1];
    if (norm - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InconsistentOracle {
            reason: "oracle is not normalized on (𝟙, 𝟙)".into(),
            residual: (norm - 1.0).abs(),
            threshold: NORMALIZATION_TOL,
        });
    }
    Ok(Reconstruction {
        subsystems: [d1, d2],
        rho: HermitianOperator::hermitian_part(&rho),
        residual,
        condition_number,
    })
}

/// Queries `oracle` on the product tomography grid and reconstructs the
/// unique Hermitian operator reproducing it.
pub fn gleason_extend<F>(oracle: F, dims: (usize, usize), opts: &ReconstructionOptions) -> Result<Reconstruction>
where
    F: FnMut(&Projection, &Projection) -> Result<f64>,
{
    check_reconstruction_dims(dims, opts)?;
    let grid = ProductGrid::tabulate(oracle, dims)?;
    reconstruct(&grid, opts)
}

/// Options for [`check_popt`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoptOptions {
    pub restarts: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for PoptOptions {
    fn default() -> Self {
        PoptOptions {
            restarts: 64,
            tol: 1e-8,
            seed: 0,
            max_sweeps: 500,
        }
    }
}

/// Result of the product-state minimization. `is_popt = true` is only
/// certified up to sampling; a negative `min_value` is a definitive disproof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoptCertificate {
    pub is_popt: bool,
    /// `⟨ψ⊗φ|ρ|ψ⊗φ⟩` at the witness.
    pub min_value: f64,
    #[serde(with = "crate::operator::vector_json")]
    pub witness_left: Vec<C64>,
    #[serde(with = "crate::operator::vector_json")]
    pub witness_right: Vec<C64>,
    pub restarts_used: usize,
    pub tolerance: f64,
    /// Every sweep of every restart was non-increasing.
    pub monotone: bool,
}

struct RestartResult {
    value: f64,
    psi: Vec<C64>,
    phi: Vec<C64>,
    monotone: bool,
}

/// `(𝟙 ⊗ ⟨φ|) ρ (𝟙 ⊗ |φ⟩)` on the first factor.
fn condition_on_right(rho: &ComplexMatrix, dims: (usize, usize), phi: &[C64]) -> HermitianOperator {
    let (d1, d2) = dims;
    let r = rho.inner();
    let m = DMatrix::from_fn(d1, d1, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..d2 {
            for l in 0..d2 {
                acc += phi[k].conj() * r[(i * d2 + k, j * d2 + l)] * phi[l];
            }
        }
        acc
    });
    HermitianOperator::hermitian_part(&ComplexMatrix::wrap(m))
}

/// `(⟨ψ| ⊗ 𝟙) ρ (|ψ⟩ ⊗ 𝟙)` on the second factor.
fn condition_on_left(rho: &ComplexMatrix, dims: (usize, usize), psi: &[C64]) -> HermitianOperator {
    let (d1, d2) = dims;
    let r = rho.inner();
    let m = DMatrix::from_fn(d2, d2, |k, l| {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d1 {
            for j in 0..d1 {
                acc += psi[i].conj() * r[(i * d2 + k, j * d2 + l)] * psi[j];
            }
        }
        acc
    });
    HermitianOperator::hermitian_part(&ComplexMatrix::wrap(m))
}

fn product_vector(psi: &[C64], phi: &[C64]) -> Vec<C64> {
    psi.iter().flat_map(|a| phi.iter().map(move |b| a * b)).collect()
}

fn popt_restart(rho: &HermitianOperator, dims: (usize, usize), seed: u64, max_sweeps: usize) -> Result<RestartResult> {
    let mut rng = seeded(seed);
    let mut phi = random::unit_vector(&mut rng, dims.1);
    let mut psi = vec![C64::new(0.0, 0.0); dims.0];
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for _ in 0..max_sweeps {
        let s = eig_hermitian(&condition_on_right(rho.matrix(), dims, &phi))?;
        psi = s.eigenvector(dims.0 - 1);
        let after_left = s.min();
        let s = eig_hermitian(&condition_on_left(rho.matrix(), dims, &psi))?;
        phi = s.eigenvector(dims.1 - 1);
        let value = s.min();
        let slack = 1e-12 * (1.0 + value.abs());
        if after_left > prev + slack || value > after_left + slack {
            monotone = false;
        }
        debug_assert!(monotone, "alternating minimization increased the objective");
        let done = prev - value <= 1e-15 * (1.0 + value.abs());
        prev = value;
        if done {
            break;
        }
    }
    let value = rho.quadratic_form(&product_vector(&psi, &phi));
    Ok(RestartResult {
        value,
        psi,
        phi,
        monotone,
    })
}

/// Minimizes `⟨ψ⊗φ|ρ|ψ⊗φ⟩` over unit product vectors by multistart
/// alternating eigen-iteration; `is_popt` iff the minimum is `≥ -tol`.
pub fn check_popt(rho: &HermitianOperator, dims: (usize, usize), opts: &PoptOptions) -> Result<PoptCertificate> {
    check_dims(rho, dims)?;
    let tr = rho.trace();
    if (tr - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidInput(format!("POPT test needs tr ρ = 1, got {tr}")));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("POPT test needs at least one restart".into()));
    }
    let results = (0..opts.restarts)
        .into_par_iter()
        .map(|r| popt_restart(rho, dims, opts.seed.wrapping_add(r as u64), opts.max_sweeps))
        .collect::<Result<Vec<_>>>()?;
    let monotone = results.iter().all(|r| r.monotone);
    let best = results
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one restart");
    Ok(PoptCertificate {
        is_popt: best.value >= -opts.tol,
        min_value: best.value,
        witness_left: best.psi,
        witness_right: best.phi,
        restarts_used: opts.restarts,
        tolerance: opts.tol,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::operator::HERM_TOL;

    fn swap_over(d: usize) -> HermitianOperator {
        fixtures::swap_operator(d).scale(1.0 / d as f64)
    }

    fn op_measure(rho: HermitianOperator, dims: (usize, usize)) -> ProductMeasure {
        ProductMeasure::OperatorBacked(OperatorMeasure::new(rho, dims).unwrap())
    }

    fn rank_one(d: usize, k: usize) -> Projection {
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[k] = C64::new(1.0, 0.0);
        Projection::onto_vector(&v).unwrap()
    }

    #[test]
    fn eval_examples() {
        let mu = op_measure(HermitianOperator::identity(9).scale(1.0 / 9.0), (3, 3));
        let q1 = Projection::onto_vector(&random::unit_vector(&mut seeded(1), 3)).unwrap();
        let q2 = Projection::onto_vector(&random::unit_vector(&mut seeded(2), 3)).unwrap();
        assert!((mu.eval(&q1, &q2).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((mu.eval(&Projection::identity(3), &Projection::identity(3)).unwrap() - 1.0).abs() < 1e-14);

        let phi = op_measure(fixtures::max_entangled(3), (3, 3));
        assert!((phi.eval(&rank_one(3, 0), &rank_one(3, 0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            phi.eval(&rank_one(2, 0), &rank_one(3, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn marginal_examples() {
        let werner = fixtures::werner(3, 0.6).unwrap();
        let mu = op_measure(werner, (3, 3));
        assert!((mu.marginal_left(&Projection::identity(3)).unwrap() - 1.0).abs() < 1e-14);
        let q = Projection::onto_vector(&random::unit_vector(&mut seeded(3), 3)).unwrap();
        assert!((mu.marginal_left(&q).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(
            mu.marginal_left(&q).unwrap(),
            mu.eval(&q, &Projection::identity(3)).unwrap()
        );
        assert!((mu.marginal_right(&q).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn operator_backed_measures_are_non_signalling() {
        let rho = random::ginibre_density(&mut seeded(4), 9, 9);
        let mu = op_measure(rho, (3, 3));
        let r = check_no_signalling(&mu, &SamplePlan::default(), 1e-10).unwrap();
        assert!(r.satisfied, "{r:?}");
        assert!(r.checks > 200 * 3);

        let h = random::unit_trace_hermitian(&mut seeded(5), 12);
        let mu = op_measure(h, (3, 4));
        let r = check_no_signalling(
            &mu,
            &SamplePlan {
                contexts: 50,
                ..Default::default()
            },
            1e-10,
        )
        .unwrap();
        assert!(r.satisfied);
    }

    #[test]
    fn operator_backed_measures_are_non_disturbing() {
        let rho = random::ginibre_density(&mut seeded(6), 12, 3);
        let mu = op_measure(rho, (4, 3));
        let r = check_no_disturbance(
            &mu,
            &SamplePlan {
                contexts: 40,
                ..Default::default()
            },
            1e-10,
        )
        .unwrap();
        assert!(r.satisfied, "{r:?}");
    }

    #[test]
    fn pr_box_is_non_signalling() {
        let pr = ProductMeasure::Tabulated(crate::bell::pr_box_table());
        let r = check_no_signalling(&pr, &SamplePlan::default(), 1e-12).unwrap();
        assert!(r.satisfied);
        assert_eq!(r.max_violation, 0.0);
        // only trivial shared sub-contexts: no-disturbance reduces to no-signalling
        let r = check_no_disturbance(&pr, &SamplePlan::default(), 1e-12).unwrap();
        assert!(r.satisfied);
    }

    #[test]
    fn planted_signalling_is_detected_at_its_magnitude() {
        let t = fixtures::planted_signalling_table(3, 3, 0.05).unwrap();
        let r = check_no_signalling(&ProductMeasure::Tabulated(t), &SamplePlan::default(), 1e-9).unwrap();
        assert!(!r.satisfied);
        assert!((r.max_violation - 0.05).abs() <= 1e-12, "{}", r.max_violation);
        assert!(r.witness.unwrap().contains("left setting 0 outcome 0"));
    }

    #[test]
    fn planted_contextuality_is_detected_at_its_magnitude() {
        let t = fixtures::planted_contextual_table(3, 3, 0.07).unwrap();
        let mu = ProductMeasure::Tabulated(t);
        let ns = check_no_signalling(&mu, &SamplePlan::default(), 1e-12).unwrap();
        assert!(ns.satisfied, "the planted table is non-signalling: {ns:?}");
        let nd = check_no_disturbance(&mu, &SamplePlan::default(), 1e-9).unwrap();
        assert!(!nd.satisfied);
        assert!((nd.max_violation - 0.07).abs() <= 1e-12);
    }

    #[test]
    fn operator_restriction_with_shared_subcontexts_is_consistent() {
        let rho = random::ginibre_density(&mut seeded(7), 9, 4);
        let m = OperatorMeasure::new(rho, (3, 3)).unwrap();
        let mut rng = seeded(8);
        let (left, ld) = overlapping_settings(3, Side::Left, &mut rng).unwrap();
        let (right, rd) = overlapping_settings(3, Side::Right, &mut rng).unwrap();
        let t = m.tabulate(left, right, ld.into_iter().chain(rd).collect()).unwrap();
        let r = check_no_disturbance(&ProductMeasure::Tabulated(t), &SamplePlan::default(), 1e-10).unwrap();
        assert!(r.satisfied);
    }

    #[test]
    fn inconsistent_declarations_are_rejected() {
        let t = fixtures::planted_contextual_table(3, 3, 0.0).unwrap();
        let mut j: TabulatedJson = t.into();
        j.coarse[0].merge = vec![vec![0, 1], vec![2]];
        assert!(matches!(
            TabulatedMeasure::try_from(j.clone()),
            Err(Error::Partition(_))
        ));
        j.coarse[0].merge = vec![vec![0], vec![1]];
        assert!(matches!(TabulatedMeasure::try_from(j), Err(Error::Partition(_))));
    }

    #[test]
    fn tomography_family_spans_hermitian_operators() {
        for (d, n) in [(2, 4), (3, 9), (4, 16)] {
            let f = tomography_family(d);
            assert_eq!(f.len(), n);
            assert_eq!(gram_rank(&f), n);
            for p in &f {
                assert!(Projection::new(p.op().clone(), HERM_TOL).is_ok());
                assert_eq!(p.rank(), 1);
            }
        }
    }

    #[test]
    fn gleason_roundtrip_on_density_matrix() {
        let rho0 = random::ginibre_density(&mut seeded(9), 9, 9);
        let m = OperatorMeasure::new(rho0.clone(), (3, 3)).unwrap();
        let rec = gleason_extend(|a, b| m.eval(a, b), (3, 3), &Default::default()).unwrap();
        assert!((rec.rho.matrix() - rho0.matrix()).max_norm() <= 1e-8);
        assert!(rec.residual <= 1e-8);
    }

    #[test]
    fn gleason_reconstructs_popt_non_state() {
        let s = swap_over(3);
        let m = OperatorMeasure::new(s.clone(), (3, 3)).unwrap();
        let rec = gleason_extend(|a, b| m.eval(a, b), (3, 3), &Default::default()).unwrap();
        assert!((rec.rho.matrix() - s.matrix()).max_norm() <= 1e-8);
        assert!(!crate::operator::is_psd(&rec.rho, 1e-9).unwrap().is_psd);
    }

    #[test]
    fn gleason_uniform_oracle_gives_maximally_mixed() {
        let rec = gleason_extend(
            |a, b| Ok(a.rank() as f64 * b.rank() as f64 / 12.0),
            (3, 4),
            &Default::default(),
        )
        .unwrap();
        let expected = ComplexMatrix::identity(12).scale_real(1.0 / 12.0);
        assert!((rec.rho.matrix() - &expected).max_norm() <= 1e-12);
    }

    #[test]
    fn gleason_rejects_contextual_oracle() {
        let a = random::ginibre_density(&mut seeded(10), 9, 9);
        let b = random::ginibre_density(&mut seeded(11), 9, 9);
        let (ma, mb) = (
            OperatorMeasure::new(a, (3, 3)).unwrap(),
            OperatorMeasure::new(b, (3, 3)).unwrap(),
        );
        // the identity is answered by a different state than its rank-one parts
        let oracle = |q1: &Projection, q2: &Projection| {
            if q1.rank() == 1 {
                ma.eval(q1, q2)
            } else {
                mb.eval(q1, q2)
            }
        };
        match gleason_extend(oracle, (3, 3), &Default::default()) {
            Err(Error::InconsistentOracle { residual, .. }) => assert!(residual > 1e-8),
            other => panic!("expected InconsistentOracle, got {other:?}"),
        }
    }

    #[test]
    fn gleason_enforces_dimension_bound() {
        let rho = random::ginibre_density(&mut seeded(12), 4, 4);
        let m = OperatorMeasure::new(rho.clone(), (2, 2)).unwrap();
        assert!(matches!(
            gleason_extend(|a, b| m.eval(a, b), (2, 2), &Default::default()),
            Err(Error::Dimension(_))
        ));
        let opts = ReconstructionOptions {
            allow_qubit: true,
            ..Default::default()
        };
        let rec = gleason_extend(|a, b| m.eval(a, b), (2, 2), &opts).unwrap();
        assert!((rec.rho.matrix() - rho.matrix()).max_norm() <= 1e-10);
    }

    #[test]
    fn pr_box_cannot_be_extended() {
        let pr = ProductMeasure::Tabulated(crate::bell::pr_box_table());
        let opts = ReconstructionOptions {
            allow_qubit: true,
            ..Default::default()
        };
        match pr.gleason_extend(&opts) {
            Err(Error::UnsupportedQuery(msg)) => assert!(msg.contains("|0>+i|1>")),
            other => panic!("expected UnsupportedQuery, got {other:?}"),
        }
        let foreign = Projection::onto_vector(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        assert!(matches!(
            pr.eval(&foreign, &rank_one(2, 0)),
            Err(Error::UnsupportedQuery(_))
        ));
    }

    #[test]
    fn grid_tables_reconstruct() {
        let s = swap_over(3);
        let t = fixtures::tomography_grid_table(&s, (3, 3)).unwrap();
        assert!(t.missing_grid_entries().is_empty());
        let rec = ProductMeasure::Tabulated(t)
            .gleason_extend(&Default::default())
            .unwrap();
        assert!((rec.rho.matrix() - s.matrix()).max_norm() <= 1e-8);
    }

    #[test]
    fn popt_of_states_is_nonnegative() {
        let rho = random::ginibre_density(&mut seeded(13), 9, 3);
        let c = check_popt(
            &rho,
            (3, 3),
            &PoptOptions {
                restarts: 16,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(c.is_popt && c.min_value >= -1e-12 && c.monotone);
    }

    #[test]
    fn swap_is_popt_but_not_psd() {
        let s = swap_over(3);
        let c = check_popt(&s, (3, 3), &Default::default()).unwrap();
        assert!(c.is_popt);
        assert!(c.min_value.abs() <= 1e-8, "{}", c.min_value);
        // ⟨ψφ|SWAP|ψφ⟩ = |⟨ψ|φ⟩|²
        let overlap: C64 = c
            .witness_left
            .iter()
            .zip(&c.witness_right)
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((overlap.norm_sqr() / 3.0 - c.min_value).abs() <= 1e-10);
    }

    #[test]
    fn planted_negative_direction_is_recovered() {
        let (rho, psi0, phi0) = fixtures::planted_non_popt(3, 3, 1.5, 14).unwrap();
        let c = check_popt(&rho, (3, 3), &Default::default()).unwrap();
        assert!(!c.is_popt);
        let ov = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm();
        assert!(ov(&c.witness_left, &psi0) * ov(&c.witness_right, &phi0) >= 0.99);
        let recomputed = rho.quadratic_form(&product_vector(&c.witness_left, &c.witness_right));
        assert!((recomputed - c.min_value).abs() <= 1e-10);
    }

    #[test]
    fn popt_is_deterministic() {
        let s = random::unit_trace_hermitian(&mut seeded(15), 9);
        let a = check_popt(&s, (3, 3), &Default::default()).unwrap();
        let b = check_popt(&s, (3, 3), &Default::default()).unwrap();
        assert_eq!(a, b);
    }
}
