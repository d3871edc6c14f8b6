//! Contexts (commutative subalgebras given by a basis and a block partition)
//! and their projection-valued measures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{ComplexMatrix, HermitianOperator, Projection};
use crate::random::{self, SeededRng};

/// Tolerance used by the order relations when none is given.
pub const CONTEXT_TOL: f64 = 1e-9;

/// A context: an orthonormal basis plus a partition of its indices into
/// degenerate blocks. The associated algebra is spanned by the block projectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContextJson")]
pub struct Context {
    dim: usize,
    basis: ComplexMatrix,
    partition: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct ContextJson {
    dim: usize,
    basis: ComplexMatrix,
    partition: Vec<Vec<usize>>,
}

impl TryFrom<ContextJson> for Context {
    type Error = Error;
    fn try_from(j: ContextJson) -> Result<Self> {
        let ctx = Context::new(j.basis, j.partition)?;
        if ctx.dim != j.dim {
            return Err(Error::Dimension(format!(
                "context declares dim {} but its basis is {}x{}",
                j.dim, ctx.dim, ctx.dim
            )));
        }
        Ok(ctx)
    }
}

fn validate_partition(dim: usize, partition: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; dim];
    for block in partition {
        if block.is_empty() {
            return Err(Error::Partition("empty block".into()));
        }
        for &i in block {
            if i >= dim {
                return Err(Error::Partition(format!("index {i} out of range for dimension {dim}")));
            }
            if seen[i] {
                return Err(Error::Partition(format!("index {i} appears in two blocks")));
            }
            seen[i] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Partition(format!("index {missing} is not covered")));
    }
    Ok(())
}

fn partition_from_shape(dim: usize, shape: &[usize]) -> Result<Vec<Vec<usize>>> {
    if shape.iter().sum::<usize>() != dim || shape.contains(&0) {
        return Err(Error::Partition(format!(
            "block sizes {shape:?} do not form a partition of {dim}"
        )));
    }
    let mut start = 0;
    Ok(shape
        .iter()
        .map(|&s| {
            let block = (start..start + s).collect();
            start += s;
            block
        })
        .collect())
}

impl Context {
    pub fn new(basis: ComplexMatrix, partition: Vec<Vec<usize>>) -> Result<Self> {
        if !basis.is_square() {
            return Err(Error::Dimension("context basis must be square".into()));
        }
        let dim = basis.nrows();
        let gram = &basis.adjoint() * &basis;
        let defect = (&gram - &ComplexMatrix::identity(dim)).max_norm();
        if defect > CONTEXT_TOL {
            return Err(Error::InvalidOperator(format!(
                "context basis is not unitary (defect {defect:e})"
            )));
        }
        validate_partition(dim, &partition)?;
        Ok(Context { dim, basis, partition })
    }

    /// Computational basis with consecutive blocks of the given sizes.
    pub fn computational(dim: usize, shape: &[usize]) -> Result<Self> {
        Self::new(ComplexMatrix::identity(dim), partition_from_shape(dim, shape)?)
    }

    /// Discrete Fourier basis with consecutive blocks of the given sizes.
    pub fn fourier(dim: usize, shape: &[usize]) -> Result<Self> {
        let n = dim as f64;
        let mut entries = Vec::with_capacity(dim * dim);
        for j in 0..dim {
            for k in 0..dim {
                let angle = 2.0 * std::f64::consts::PI * (j * k) as f64 / n;
                entries.push(crate::operator::C64::from_polar(1.0 / n.sqrt(), angle));
            }
        }
        Self::new(
            ComplexMatrix::from_row_major(dim, dim, entries)?,
            partition_from_shape(dim, shape)?,
        )
    }

    /// The trivial context `ℂ𝟙`.
    pub fn trivial(dim: usize) -> Self {
        Context {
            dim,
            basis: ComplexMatrix::identity(dim),
            partition: vec![(0..dim).collect()],
        }
    }

    /// Replaces the basis columns of every block except `keep` by a random
    /// rotation of their span, and splits those blocks into singletons.
    /// The result shares the projector of block `keep` with `self`.
    pub fn sharing_block(&self, keep: usize, rng: &mut SeededRng) -> Result<Self> {
        let shared = self
            .partition
            .get(keep)
            .ok_or_else(|| Error::Partition(format!("block {keep} does not exist")))?;
        let rest: Vec<usize> = (0..self.dim).filter(|i| !shared.contains(i)).collect();
        let u = random::haar_unitary(rng, rest.len().max(1));
        let b = self.basis.inner();
        let mut cols: Vec<Vec<crate::operator::C64>> = shared.iter().map(|&i| self.basis.column(i)).collect();
        for k in 0..rest.len() {
            let col = (0..self.dim)
                .map(|r| {
                    rest.iter()
                        .enumerate()
                        .map(|(m, &src)| b[(r, src)] * u.entry(m, k))
                        .sum()
                })
                .collect();
            cols.push(col);
        }
        let mut entries = Vec::with_capacity(self.dim * self.dim);
        for r in 0..self.dim {
            for col in &cols {
                entries.push(col[r]);
            }
        }
        let basis = ComplexMatrix::from_row_major(self.dim, self.dim, entries)?;
        let mut partition = vec![(0..shared.len()).collect::<Vec<_>>()];
        partition.extend((shared.len()..self.dim).map(|i| vec![i]));
        Context::new(basis, partition)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn partition(&self) -> &[Vec<usize>] {
        &self.partition
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.partition.len() == 1
    }

    pub fn projectors(&self) -> Vec<Projection> {
        self.partition
            .iter()
            .map(|block| Projection::onto_columns(&self.basis, block))
            .collect()
    }

    /// Coarse-grains the partition: block `k` of the result is the union of
    /// the blocks listed in `merge[k]`.
    pub fn merged(&self, merge: &[Vec<usize>]) -> Result<Self> {
        validate_partition(self.partition.len(), merge)?;
        let partition = merge
            .iter()
            .map(|group| {
                let mut b: Vec<usize> = group.iter().flat_map(|&g| self.partition[g].clone()).collect();
                b.sort_unstable();
                b
            })
            .collect();
        Ok(Context {
            dim: self.dim,
            basis: self.basis.clone(),
            partition,
        })
    }

    /// Whether `q` is a sum of block projectors of this context.
    pub fn contains_projection(&self, q: &Projection, tol: f64) -> bool {
        if q.dim() != self.dim {
            return false;
        }
        let blocks = self.projectors();
        let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
        for p in &blocks {
            // p ≤ q  ⇔  q p = p
            if (&(q.matrix() * p.matrix()) - p.matrix()).max_norm() <= tol {
                sum = &sum + p.matrix();
            }
        }
        (&sum - q.matrix()).max_norm() <= tol
    }
}

/// Haar-random basis with the given block structure, deterministic in `seed`.
pub fn random_context(dim: usize, partition_shape: &[usize], seed: u64) -> Result<Context> {
    let partition = partition_from_shape(dim, partition_shape)?;
    let basis = random::haar_unitary(&mut random::seeded(seed), dim);
    Context::new(basis, partition)
}

/// Random composition of `dim` into at least `min_blocks` parts.
pub fn random_shape<R: Rng + ?Sized>(rng: &mut R, dim: usize, min_blocks: usize) -> Vec<usize> {
    loop {
        let mut shape = Vec::new();
        let mut left = dim;
        while left > 0 {
            let s = rng.random_range(1..=left);
            shape.push(s);
            left -= s;
        }
        if shape.len() >= min_blocks.min(dim) {
            return shape;
        }
    }
}

/// A projection-valued measure; outcome labels are the element indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Projection>", into = "Vec<Projection>")]
pub struct Pvm {
    elements: Vec<Projection>,
}

impl TryFrom<Vec<Projection>> for Pvm {
    type Error = Error;
    fn try_from(elements: Vec<Projection>) -> Result<Self> {
        Pvm::new(elements, CONTEXT_TOL)
    }
}

impl From<Pvm> for Vec<Projection> {
    fn from(p: Pvm) -> Self {
        p.elements
    }
}

impl Pvm {
    /// Checks pairwise orthogonality and completeness within `tol`.
    pub fn new(elements: Vec<Projection>, tol: f64) -> Result<Self> {
        let dim = elements
            .first()
            .ok_or_else(|| Error::InvalidInput("a PVM needs at least one element".into()))?
            .dim();
        if elements.iter().any(|e| e.dim() != dim) {
            return Err(Error::Dimension("PVM elements have different dimensions".into()));
        }
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for (i, p) in elements.iter().enumerate() {
            for q in &elements[i + 1..] {
                let overlap = (p.matrix() * q.matrix()).max_norm();
                if overlap > tol {
                    return Err(Error::InvalidOperator(format!(
                        "PVM elements are not orthogonal (‖PQ‖ = {overlap:e})"
                    )));
                }
            }
            sum = &sum + p.matrix();
        }
        let defect = (&sum - &ComplexMatrix::identity(dim)).max_norm();
        if defect > tol {
            return Err(Error::InvalidOperator(format!(
                "PVM elements do not sum to the identity (defect {defect:e})"
            )));
        }
        Ok(Pvm { elements })
    }

    /// Two-outcome PVM `{q, 𝟙 - q}`.
    pub fn binary(q: Projection) -> Self {
        let c = q.complement();
        Pvm { elements: vec![q, c] }
    }

    pub fn elements(&self) -> &[Projection] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Same element set up to ordering.
    pub fn same_elements(&self, other: &Pvm, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .elements
                .iter()
                .all(|p| other.elements.iter().any(|q| p.distance(q) <= tol))
    }

    /// Index of the element equal to `q` within `tol`.
    pub fn position(&self, q: &Projection, tol: f64) -> Option<usize> {
        self.elements.iter().position(|p| p.distance(q) <= tol)
    }
}

/// One projector per partition block.
pub fn pvm_of_context(v: &Context) -> Pvm {
    Pvm {
        elements: v.projectors(),
    }
}

/// Merges outcomes: element `k` of the result is the sum of `merge[k]`.
pub fn coarse_grain(pvm: &Pvm, merge: &[Vec<usize>]) -> Result<Pvm> {
    validate_partition(pvm.len(), merge)?;
    let dim = pvm.dim();
    let elements = merge
        .iter()
        .map(|group| {
            let mut acc = ComplexMatrix::zeros(dim, dim);
            for &g in group {
                acc = &acc + pvm.elements[g].matrix();
            }
            let rank: usize = group.iter().map(|&g| pvm.elements[g].rank()).sum();
            Projection::new(HermitianOperator::hermitian_part(&acc), CONTEXT_TOL).inspect(|p| {
                debug_assert_eq!(p.rank(), rank);
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Pvm::new(elements, CONTEXT_TOL)
}

/// Whether every projector of `coarse` is a sum of projectors of `fine`,
/// i.e. the algebra of `coarse` is contained in that of `fine`.
pub fn refines(fine: &Context, coarse: &Context, tol: f64) -> bool {
    if fine.dim() != coarse.dim() {
        return false;
    }
    let fine_p = fine.projectors();
    coarse.projectors().iter().all(|c| {
        let mut sum = ComplexMatrix::zeros(fine.dim(), fine.dim());
        for f in &fine_p {
            if (&(c.matrix() * f.matrix()) - f.matrix()).max_norm() <= tol {
                sum = &sum + f.matrix();
            }
        }
        (&sum - c.matrix()).max_norm() <= tol
    })
}

/// Equality of contexts as projector sets.
pub fn equivalent(a: &Context, b: &Context, tol: f64) -> bool {
    refines(a, b, tol) && refines(b, a, tol)
}

/// A pair of local contexts `(V₁, V₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductContext {
    pub left: Context,
    pub right: Context,
}

/// Componentwise order: `a ≤ b` iff each component of `a` is a sub-context
/// of the corresponding component of `b`.
pub fn product_order_leq(a: &ProductContext, b: &ProductContext) -> bool {
    refines(&b.left, &a.left, CONTEXT_TOL) && refines(&b.right, &a.right, CONTEXT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn pvm_is_valid(p: &Pvm) -> bool {
        Pvm::new(p.elements().to_vec(), CONTEXT_TOL).is_ok()
    }

    #[test]
    fn random_context_examples() {
        let v = random_context(3, &[1, 1, 1], 42).unwrap();
        let gram = &v.basis().adjoint() * v.basis();
        assert!((&gram - &ComplexMatrix::identity(3)).max_norm() <= 1e-9);
        assert_eq!(v.num_blocks(), 3);

        let t = random_context(3, &[3], 7).unwrap();
        let p = pvm_of_context(&t);
        assert_eq!(p.len(), 1);
        assert!((p.elements()[0].matrix() - &ComplexMatrix::identity(3)).max_norm() < 1e-12);

        assert_eq!(
            random_context(4, &[2, 2], 9).unwrap(),
            random_context(4, &[2, 2], 9).unwrap()
        );
        assert!(matches!(random_context(3, &[1, 1], 1), Err(Error::Partition(_))));
    }

    #[test]
    fn pvm_examples() {
        let p = pvm_of_context(&Context::trivial(3));
        assert!(p.elements()[0].distance(&Projection::identity(3)) < 1e-15);

        let p = pvm_of_context(&Context::computational(3, &[1, 1, 1]).unwrap());
        for (k, e) in p.elements().iter().enumerate() {
            let mut d = [0.0; 3];
            d[k] = 1.0;
            assert_eq!(e.matrix(), &ComplexMatrix::from_real_diagonal(&d));
        }

        let p = pvm_of_context(&Context::computational(3, &[2, 1]).unwrap());
        assert_eq!(
            p.elements()[0].matrix(),
            &ComplexMatrix::from_real_diagonal(&[1., 1., 0.])
        );
        assert_eq!(
            p.elements()[1].matrix(),
            &ComplexMatrix::from_real_diagonal(&[0., 0., 1.])
        );
        assert_eq!(p.elements()[0].rank(), 2);
    }

    #[test]
    fn refines_examples() {
        let fine = random_context(3, &[1, 1, 1], 5).unwrap();
        let coarse = fine.merged(&[vec![0, 1], vec![2]]).unwrap();
        assert!(refines(&fine, &coarse, CONTEXT_TOL));
        assert!(!refines(&coarse, &fine, CONTEXT_TOL));

        let other = random_context(3, &[1, 1, 1], 6).unwrap();
        assert!(!refines(&fine, &other, CONTEXT_TOL));
        assert!(!refines(&other, &fine, CONTEXT_TOL));

        for v in [&fine, &coarse, &other] {
            assert!(refines(v, &Context::trivial(3), CONTEXT_TOL));
            assert!(refines(v, v, CONTEXT_TOL));
        }
    }

    #[test]
    fn product_order_examples() {
        let l = random_context(3, &[1, 1, 1], 11).unwrap();
        let r = random_context(4, &[1, 1, 2], 12).unwrap();
        let big = ProductContext {
            left: l.clone(),
            right: r.clone(),
        };
        let small = ProductContext {
            left: l.merged(&[vec![0, 1], vec![2]]).unwrap(),
            right: r.merged(&[vec![0], vec![1, 2]]).unwrap(),
        };
        assert!(product_order_leq(&small, &big));
        assert!(!product_order_leq(&big, &small));

        let mixed = ProductContext {
            left: small.left.clone(),
            right: random_context(4, &[1, 1, 1, 1], 13).unwrap(),
        };
        assert!(!product_order_leq(&mixed, &big));

        let trivial = ProductContext {
            left: Context::trivial(3),
            right: Context::trivial(4),
        };
        assert!(product_order_leq(&trivial, &big));
        assert!(product_order_leq(&trivial, &small));
    }

    #[test]
    fn coarse_grain_examples() {
        let p = pvm_of_context(&random_context(3, &[1, 1, 1], 21).unwrap());
        let all = coarse_grain(&p, &[vec![0, 1, 2]]).unwrap();
        assert!(all.elements()[0].distance(&Projection::identity(3)) < 1e-12);

        let same = coarse_grain(&p, &[vec![0], vec![1], vec![2]]).unwrap();
        assert!(same.same_elements(&p, 1e-14));

        let two = coarse_grain(&p, &[vec![0, 1], vec![2]]).unwrap();
        let expected = p.elements()[0].matrix() + p.elements()[1].matrix();
        assert!((two.elements()[0].matrix() - &expected).max_norm() < 1e-15);
        assert!(two.elements()[1].distance(&p.elements()[2]) < 1e-15);

        assert!(matches!(coarse_grain(&p, &[vec![0, 1]]), Err(Error::Partition(_))));
        assert!(matches!(
            coarse_grain(&p, &[vec![0, 1], vec![1, 2]]),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn sharing_block_keeps_the_projector() {
        let mut rng = random::seeded(3);
        let v = random_context(4, &[2, 1, 1], 31).unwrap();
        let w = v.sharing_block(0, &mut rng).unwrap();
        let shared = &v.projectors()[0];
        assert!(w.contains_projection(shared, 1e-10));
        assert!(!equivalent(&v, &w, 1e-6));
    }

    #[test]
    fn context_json_roundtrip() {
        let v = random_context(3, &[2, 1], 77).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        let back: Context = serde_json::from_str(&s).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn pvm_of_random_contexts_is_always_valid() {
        let mut rng = random::seeded(1000);
        for i in 0..1000u64 {
            let dim = rng.random_range(2..=5);
            let shape = random_shape(&mut rng, dim, 1);
            let v = random_context(dim, &shape, i).unwrap();
            assert!(pvm_is_valid(&pvm_of_context(&v)));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn coarse_grain_commutes_with_merging(seed in any::<u64>(), dim in 2usize..6) {
            let mut rng = random::seeded(seed);
            let shape = random_shape(&mut rng, dim, 2);
            let v = random_context(dim, &shape, seed).unwrap();
            let k = v.num_blocks();
            let split = rng.random_range(1..k.max(2));
            let merge = vec![(0..split.min(k)).collect::<Vec<_>>(), (split.min(k)..k).collect()];
            let merge: Vec<Vec<usize>> = merge.into_iter().filter(|g| !g.is_empty()).collect();
            let a = coarse_grain(&pvm_of_context(&v), &merge).unwrap();
            let b = pvm_of_context(&v.merged(&merge).unwrap());
            prop_assert!(a.same_elements(&b, 1e-12));
        }

        #[test]
        fn refinement_chain_is_transitive(seed in any::<u64>()) {
            let a = random_context(4, &[1, 1, 1, 1], seed).unwrap();
            let b = a.merged(&[vec![0], vec![1, 2], vec![3]]).unwrap();
            let c = b.merged(&[vec![0, 2], vec![1]]).unwrap();
            prop_assert!(refines(&a, &b, CONTEXT_TOL));
            prop_assert!(refines(&b, &c, CONTEXT_TOL));
            prop_assert!(refines(&a, &c, CONTEXT_TOL));
        }

        #[test]
        fn product_order_is_a_partial_order(seed in any::<u64>()) {
            let l = random_context(3, &[1, 1, 1], seed).unwrap();
            let r = random_context(3, &[1, 1, 1], seed.wrapping_add(1)).unwrap();
            let top = ProductContext { left: l.clone(), right: r.clone() };
            let mid = ProductContext {
                left: l.merged(&[vec![0, 1], vec![2]]).unwrap(),
                right: r.clone(),
            };
            let bottom = ProductContext { left: Context::trivial(3), right: r.merged(&[vec![0], vec![1, 2]]).unwrap() };
            for x in [&top, &mid, &bottom] {
                prop_assert!(product_order_leq(x, x));
            }
            prop_assert!(product_order_leq(&bottom, &mid) && product_order_leq(&mid, &top));
            prop_assert!(product_order_leq(&bottom, &top));
            prop_assert!(!product_order_leq(&top, &mid));
            // antisymmetry up to projector-set equality
            let relabeled = ProductContext {
                left: l.merged(&[vec![2], vec![0], vec![1]]).unwrap(),
                right: r.clone(),
            };
            prop_assert!(product_order_leq(&top, &relabeled) && product_order_leq(&relabeled, &top));
            prop_assert!(equivalent(&top.left, &relabeled.left, CONTEXT_TOL));
        }
    }
}
