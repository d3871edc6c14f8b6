//! Seeded random ensembles: Gaussian matrices, Haar unitaries, GUE, Ginibre states.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{ComplexMatrix, HermitianOperator, C64};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex standard normal with `E|z|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    // filled row by row so the stream order does not depend on storage layout
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        entries.push(complex_normal(rng));
    }
    ComplexMatrix::from_row_major(rows, cols, entries).expect("finite gaussian entries")
}

/// Gaussian Hermitian matrix `(G + G†)/2`.
pub fn gue<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianOperator {
    HermitianOperator::hermitian_part(&gaussian_matrix(rng, n, n))
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = gaussian_matrix(rng, n, n).into_inner();
    let qr = g.qr();
    let (q, r) = qr.unpack();
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        } else {
            C64::new(0.0, 0.0)
        }
    });
    ComplexMatrix::new(q * phases).expect("finite unitary")
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// `G G† / tr(G G†)` with `G` an `n × rank` Gaussian matrix.
pub fn ginibre_density<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> HermitianOperator {
    let g = gaussian_matrix(rng, n, rank);
    let ggd = &g * &g.adjoint();
    let tr = ggd.trace().re;
    HermitianOperator::hermitian_part(&ggd.scale_real(1.0 / tr))
}

/// Gaussian Hermitian matrix shifted along the identity to unit trace.
/// Generally not positive semidefinite.
pub fn unit_trace_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianOperator {
    let h = gue(rng, n).scale(1.0 / n as f64);
    let shift = (h.trace() - 1.0) / n as f64;
    &h - &HermitianOperator::identity(n).scale(shift)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_unitary_is_unitary_and_deterministic() {
        let u = haar_unitary(&mut seeded(42), 5);
        let uu = &u.adjoint() * &u;
        assert!((&uu - &ComplexMatrix::identity(5)).max_norm() < 1e-12);
        assert_eq!(u, haar_unitary(&mut seeded(42), 5));
    }

    #[test]
    fn ginibre_is_a_density_matrix() {
        let rho = ginibre_density(&mut seeded(1), 6, 2);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        let w = crate::operator::is_psd(&rho, 1e-12).unwrap();
        assert!(w.is_psd);
    }

    #[test]
    fn unit_trace_hermitian_has_unit_trace() {
        let h = unit_trace_hermitian(&mut seeded(3), 9);
        assert!((h.trace() - 1.0).abs() < 1e-13);
    }
}
