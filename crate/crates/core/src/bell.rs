//! CHSH correlations: evaluation, multistart optimization over dichotomic
//! observables, and the PR box.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contexts::{Pvm, CONTEXT_TOL};
use crate::error::{Error, Result};
use crate::measures::{check_dims, TabulatedMeasure};
use crate::operator::{
    hermitian_sign, partial_trace, tensor, ComplexMatrix, HermitianOperator, Projection, Subsystem, C64,
};
use crate::random::{self, seeded, SeededRng};

pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;
const SETTING_TOL: f64 = 1e-9;
const GRADIENT_STEP: f64 = 1e-6;
const MAX_ITERATIONS: usize = 2000;

/// A ±1-valued observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HermitianOperator", into = "HermitianOperator")]
pub struct DichotomicSetting {
    observable: HermitianOperator,
}

impl TryFrom<HermitianOperator> for DichotomicSetting {
    type Error = Error;
    fn try_from(a: HermitianOperator) -> Result<Self> {
        DichotomicSetting::new(a)
    }
}

impl From<DichotomicSetting> for HermitianOperator {
    fn from(s: DichotomicSetting) -> Self {
        s.observable
    }
}

impl DichotomicSetting {
    pub fn new(observable: HermitianOperator) -> Result<Self> {
        let d = observable.dim();
        let sq = observable.matrix() * observable.matrix();
        let defect = (&sq - &ComplexMatrix::identity(d)).max_norm();
        if defect > SETTING_TOL {
            return Err(Error::InvalidSetting(format!("A² differs from 𝟙 by {defect:e}")));
        }
        Ok(DichotomicSetting { observable })
    }

    /// `n · σ` for a unit vector `n`.
    pub fn from_bloch(n: [f64; 3]) -> Result<Self> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidSetting("zero Bloch vector".into()));
        }
        Self::new(bloch_observable(n[0] / norm, n[1] / norm, n[2] / norm))
    }

    pub fn observable(&self) -> &HermitianOperator {
        &self.observable
    }

    pub fn dim(&self) -> usize {
        self.observable.dim()
    }
}

fn bloch_observable(x: f64, y: f64, z: f64) -> HermitianOperator {
    let m = ComplexMatrix::from_rows(&[
        vec![C64::new(z, 0.0), C64::new(x, -y)],
        vec![C64::new(x, y), C64::new(-z, 0.0)],
    ])
    .expect("finite entries");
    HermitianOperator::hermitian_part(&m)
}

fn angles_observable(theta: f64, phi: f64) -> HermitianOperator {
    bloch_observable(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Operator and settings `(A₀, A₁, B₀, B₁)` of a CHSH experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshInstance {
    pub rho: HermitianOperator,
    pub dims: (usize, usize),
    pub settings: [DichotomicSetting; 4],
}

impl ChshInstance {
    pub fn new(rho: HermitianOperator, dims: (usize, usize), settings: [DichotomicSetting; 4]) -> Result<Self> {
        check_dims(&rho, dims)?;
        for (k, s) in settings.iter().enumerate() {
            let expected = if k < 2 { dims.0 } else { dims.1 };
            if s.dim() != expected {
                return Err(Error::Dimension(format!(
                    "setting {k} has dimension {}, expected {expected}",
                    s.dim()
                )));
            }
        }
        Ok(ChshInstance { rho, dims, settings })
    }
}

fn correlator(rho: &HermitianOperator, a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    rho.expectation(&tensor(a.matrix(), b.matrix())).re
}

fn chsh_of(rho: &HermitianOperator, s: [&HermitianOperator; 4]) -> f64 {
    let [a0, a1, b0, b1] = s;
    correlator(rho, a0, b0) + correlator(rho, a0, b1) + correlator(rho, a1, b0) - correlator(rho, a1, b1)
}

/// `S = ⟨A₀B₀⟩ + ⟨A₀B₁⟩ + ⟨A₁B₀⟩ − ⟨A₁B₁⟩` with `⟨AB⟩ = tr[ρ(A⊗B)]`.
/// `|S| ≤ 4` whenever `ρ` is positive on product states.
pub fn chsh_value(inst: &ChshInstance) -> f64 {
    let [a0, a1, b0, b1] = &inst.settings;
    chsh_of(
        &inst.rho,
        [a0.observable(), a1.observable(), b0.observable(), b1.observable()],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshOptimum {
    pub value: f64,
    /// `[A₀, A₁, B₀, B₁]`
    pub settings: Vec<DichotomicSetting>,
    pub restarts: usize,
    /// Every accepted step increased the objective.
    pub monotone: bool,
}

/// Local parametrization of one side's pair of observables.
#[derive(Clone)]
enum SidePair {
    /// `(θ₀, φ₀, θ₁, φ₁)` for qubits.
    Angles([f64; 4]),
    /// Observables with spectrum ±1 for `d ≥ 3`.
    Observables([HermitianOperator; 2]),
}

impl SidePair {
    fn random(rng: &mut SeededRng, d: usize) -> Self {
        if d == 2 {
            let mut a = [0.0; 4];
            for k in 0..2 {
                a[2 * k] = (1.0 - 2.0 * rng.random::<f64>()).acos();
                a[2 * k + 1] = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            }
            SidePair::Angles(a)
        } else {
            let plus = d.div_ceil(2);
            let signature: Vec<f64> = (0..d).map(|i| if i < plus { 1.0 } else { -1.0 }).collect();
            let diag = ComplexMatrix::from_real_diagonal(&signature);
            let mut obs = || {
                let u = random::haar_unitary(rng, d);
                HermitianOperator::hermitian_part(&(&(&u * &diag) * &u.adjoint()))
            };
            SidePair::Observables([obs(), obs()])
        }
    }

    fn observables(&self) -> [HermitianOperator; 2] {
        match self {
            SidePair::Angles(a) => [angles_observable(a[0], a[1]), angles_observable(a[2], a[3])],
            SidePair::Observables(o) => o.clone(),
        }
    }
}

/// With the other side fixed, `S = tr[A₀ M₀] + tr[A₁ M₁]` with `M_x` the
/// reduced operators below.
fn effective_operators(
    rho: &HermitianOperator,
    dims: (usize, usize),
    other: &[HermitianOperator; 2],
    for_left: bool,
) -> [HermitianOperator; 2] {
    let (plus, minus) = (&other[0] + &other[1], &other[0] - &other[1]);
    let reduce = |b: &HermitianOperator| {
        let m = if for_left {
            let lifted = tensor(&ComplexMatrix::identity(dims.0), b.matrix());
            partial_trace(&(rho.matrix() * &lifted), dims, Subsystem::First)
        } else {
            let lifted = tensor(b.matrix(), &ComplexMatrix::identity(dims.1));
            partial_trace(&(rho.matrix() * &lifted), dims, Subsystem::Second)
        }
        .expect("dimensions checked");
        // tr[(A ⊗ B) ρ] = tr[A · tr₂(ρ (𝟙 ⊗ B))]; the Hermitian part carries the real value
        HermitianOperator::hermitian_part(&m)
    };
    [reduce(&plus), reduce(&minus)]
}

fn side_value(eff: &[HermitianOperator; 2], obs: &[HermitianOperator; 2]) -> f64 {
    eff[0].expectation(obs[0].matrix()).re + eff[1].expectation(obs[1].matrix()).re
}

/// One ascent step on one side. Returns the new parametrization, its value
/// and whether a strict improvement was found.
fn ascend(side: &SidePair, eff: &[HermitianOperator; 2]) -> Result<(SidePair, f64, bool)> {
    let current = side_value(eff, &side.observables());
    match side {
        SidePair::Angles(a) => {
            let f = |p: &[f64; 4]| side_value(eff, &[angles_observable(p[0], p[1]), angles_observable(p[2], p[3])]);
            let mut grad = [0.0; 4];
            for k in 0..4 {
                let (mut up, mut down) = (*a, *a);
                up[k] += GRADIENT_STEP;
                down[k] -= GRADIENT_STEP;
                grad[k] = (f(&up) - f(&down)) / (2.0 * GRADIENT_STEP);
            }
            let mut step = 1.0;
            for _ in 0..40 {
                let mut trial = *a;
                for k in 0..4 {
                    trial[k] += step * grad[k];
                }
                let v = f(&trial);
                if v > current {
                    return Ok((SidePair::Angles(trial), v, true));
                }
                step *= 0.5;
            }
            Ok((side.clone(), current, false))
        }
        SidePair::Observables(o) => {
            // the gradient of tr[A M] in A is M; project A + ηM back onto ±1 spectra
            let mut step = 1e6;
            for _ in 0..40 {
                let next = [
                    hermitian_sign(&(&o[0] + &eff[0].scale(step)))?,
                    hermitian_sign(&(&o[1] + &eff[1].scale(step)))?,
                ];
                let v = side_value(eff, &next);
                if v > current {
                    return Ok((SidePair::Observables(next), v, true));
                }
                step *= 0.25;
            }
            Ok((side.clone(), current, false))
        }
    }
}

fn chsh_restart(
    rho: &HermitianOperator,
    dims: (usize, usize),
    seed: u64,
) -> Result<(f64, [HermitianOperator; 4], bool)> {
    let mut rng = seeded(seed);
    let mut left = SidePair::random(&mut rng, dims.0);
    let mut right = SidePair::random(&mut rng, dims.1);
    let mut value = {
        let (a, b) = (left.observables(), right.observables());
        chsh_of(rho, [&a[0], &a[1], &b[0], &b[1]])
    };
    let mut monotone = true;
    for _ in 0..MAX_ITERATIONS {
        let start = value;
        let eff = effective_operators(rho, dims, &right.observables(), true);
        let (l, v, _) = ascend(&left, &eff)?;
        monotone &= v >= value - 1e-12;
        left = l;
        value = v;
        let eff = effective_operators(rho, dims, &left.observables(), false);
        let (r, v, _) = ascend(&right, &eff)?;
        monotone &= v >= value - 1e-12;
        right = r;
        value = v;
        if value - start <= 1e-13 * (1.0 + value.abs()) {
            break;
        }
    }
    let (a, b) = (left.observables(), right.observables());
    let value = chsh_of(rho, [&a[0], &a[1], &b[0], &b[1]]);
    Ok((
        value,
        [a[0].clone(), a[1].clone(), b[0].clone(), b[1].clone()],
        monotone,
    ))
}

/// Multistart ascent of the CHSH value over local dichotomic observables:
/// Bloch angles with central-difference gradients and backtracking for
/// qubit sides, projected gradient steps onto `±1` spectra otherwise.
pub fn optimize_chsh(rho: &HermitianOperator, dims: (usize, usize), restarts: usize, seed: u64) -> Result<ChshOptimum> {
    check_dims(rho, dims)?;
    if dims.0 < 2 || dims.1 < 2 {
        return Err(Error::Dimension("CHSH settings need local dimension at least 2".into()));
    }
    if restarts == 0 {
        return Err(Error::InvalidInput("at least one restart is required".into()));
    }
    let runs = (0..restarts)
        .into_par_iter()
        .map(|r| chsh_restart(rho, dims, seed.wrapping_add(r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let monotone = runs.iter().all(|r| r.2);
    let (value, obs, _) = runs
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one restart");
    let settings = obs
        .into_iter()
        .map(DichotomicSetting::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(ChshOptimum {
        value,
        settings,
        restarts,
        monotone,
    })
}

fn qubit_pvm(v0: [C64; 2], v1: [C64; 2]) -> Pvm {
    Pvm::new(
        vec![
            Projection::onto_vector(&v0).expect("unit vector"),
            Projection::onto_vector(&v1).expect("unit vector"),
        ],
        CONTEXT_TOL,
    )
    .expect("orthogonal rank-one projections")
}

/// `σ_z` and `σ_x` eigenbases; outcome 0 is the `+1` eigenvector.
fn pr_settings() -> Vec<Pvm> {
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    vec![qubit_pvm([l, o], [o, l]), qubit_pvm([l, l], [l, -l])]
}

/// `p(ab|xy) = 1/2` iff `a ⊕ b = xy`.
pub fn pr_box_table() -> TabulatedMeasure {
    let table = (0..2)
        .map(|x| {
            (0..2)
                .map(|y| {
                    (0..2)
                        .map(|a| (0..2).map(|b| if (a ^ b) == (x & y) { 0.5 } else { 0.0 }).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    TabulatedMeasure::new(2, 2, pr_settings(), pr_settings(), Vec::new(), table).expect("valid PR box")
}

/// CHSH functional of a two-setting, two-outcome table, reading outcome 0
/// as `+1`.
pub fn chsh_from_table(t: &TabulatedMeasure) -> Result<f64> {
    if t.left_pvms().len() != 2
        || t.right_pvms().len() != 2
        || t.left_pvms().iter().chain(t.right_pvms()).any(|p| p.len() != 2)
    {
        return Err(Error::InvalidInput(
            "CHSH needs two settings with two outcomes on each side".into(),
        ));
    }
    let e = |x: usize, y: usize| {
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let sign = if a == b { 1.0 } else { -1.0 };
                s += sign * t.prob(x, y, a, b);
            }
        }
        s
    };
    Ok(e(0, 0) + e(0, 1) + e(1, 0) - e(1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::measures::{check_no_signalling, ProductMeasure, SamplePlan};

    fn z() -> DichotomicSetting {
        DichotomicSetting::from_bloch([0.0, 0.0, 1.0]).unwrap()
    }

    fn x() -> DichotomicSetting {
        DichotomicSetting::from_bloch([1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn maximally_mixed_gives_zero() {
        let rho = HermitianOperator::identity(4).scale(0.25);
        let s = [z(), x(), DichotomicSetting::from_bloch([1.0, 0.0, 1.0]).unwrap(), z()];
        assert!(chsh_value(&ChshInstance::new(rho, (2, 2), s).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn singlet_with_optimal_angles() {
        let s = [
            z(),
            x(),
            DichotomicSetting::from_bloch([-1.0, 0.0, -1.0]).unwrap(),
            DichotomicSetting::from_bloch([1.0, 0.0, -1.0]).unwrap(),
        ];
        let v = chsh_value(&ChshInstance::new(fixtures::singlet(), (2, 2), s).unwrap());
        assert!((v - TSIRELSON).abs() <= 1e-9, "{v}");
    }

    #[test]
    fn deterministic_product_state() {
        let rho = HermitianOperator::from_real_diagonal(&[1.0, 0.0, 0.0, 0.0]);
        let v = chsh_value(&ChshInstance::new(rho, (2, 2), [z(), z(), z(), z()]).unwrap());
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn non_dichotomic_settings_are_rejected() {
        let half = HermitianOperator::identity(2).scale(0.5);
        assert!(matches!(DichotomicSetting::new(half), Err(Error::InvalidSetting(_))));
    }

    #[test]
    fn singlet_optimizes_to_tsirelson() {
        let o = optimize_chsh(&fixtures::singlet(), (2, 2), 16, 1).unwrap();
        assert!((o.value - TSIRELSON).abs() <= 1e-4, "{}", o.value);
        assert!(o.monotone);
        let settings: [DichotomicSetting; 4] = o.settings.clone().try_into().unwrap();
        let direct = chsh_value(&ChshInstance::new(fixtures::singlet(), (2, 2), settings).unwrap());
        assert!(o.value - direct <= 1e-10);
    }

    #[test]
    fn maximally_mixed_optimizes_to_zero() {
        let o = optimize_chsh(&HermitianOperator::identity(4).scale(0.25), (2, 2), 8, 2).unwrap();
        assert!(o.value.abs() <= 1e-6);
    }

    #[test]
    fn qutrit_maximally_entangled_stays_below_tsirelson() {
        let o = optimize_chsh(&fixtures::max_entangled(3), (3, 3), 16, 3).unwrap();
        assert!(o.value <= TSIRELSON + 1e-3);
        assert!(o.value > 2.5, "{}", o.value);
        assert!(o.monotone);
    }

    #[test]
    fn pr_box_properties() {
        let t = pr_box_table();
        assert_eq!(chsh_from_table(&t).unwrap(), 4.0);
        let mu = ProductMeasure::Tabulated(t.clone());
        for pvm in t.left_pvms() {
            for q in pvm.elements() {
                assert_eq!(mu.marginal_left(q).unwrap(), 0.5);
            }
        }
        for pvm in t.right_pvms() {
            for q in pvm.elements() {
                assert_eq!(mu.marginal_right(q).unwrap(), 0.5);
            }
        }
        let r = check_no_signalling(&mu, &SamplePlan::default(), 0.0).unwrap();
        assert!(r.satisfied && r.max_violation == 0.0);
    }
}
