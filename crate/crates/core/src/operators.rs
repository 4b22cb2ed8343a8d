//! Dense complex operators on the qutrit–qutrit–resonator–resonator space.
//!
//! The composite space is the tensor product, in this fixed order, of
//! qutrit 1, qutrit 2, resonator `a` and resonator `b`. Qutrit levels are
//! ordered `(g, e, f)` and Fock states ascend from the vacuum, so the basis
//! index of `|q1, q2, n_a, n_b⟩` is
//!
//! ```text
//! ((q1 · 3 + q2) · N + n_a) · N + n_b
//! ```
//!
//! with `N` the number of Fock levels kept per resonator. Every embedding in
//! the crate goes through [`SpaceLayout`], so there is exactly one index map.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense square complex matrix in double precision.
pub type ComplexMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Level of a three-level system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    G,
    E,
    F,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::E, Level::F];

    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
            Level::F => 2,
        }
    }
}

/// Tensor factor of the composite space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    Qutrit1,
    Qutrit2,
    ResonatorA,
    ResonatorB,
}

impl Factor {
    pub const ORDER: [Factor; 4] = [
        Factor::Qutrit1,
        Factor::Qutrit2,
        Factor::ResonatorA,
        Factor::ResonatorB,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Factor::Qutrit1 => "qutrit1",
            Factor::Qutrit2 => "qutrit2",
            Factor::ResonatorA => "res_a",
            Factor::ResonatorB => "res_b",
        }
    }

    pub fn from_label(label: &str) -> Result<Factor> {
        Factor::ORDER
            .into_iter()
            .find(|f| f.label() == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown factor label `{label}`")))
    }
}

/// Ordered factor description with a shared photon truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    n_photon: usize,
}

impl SpaceLayout {
    /// `n_photon` counts the Fock states `0..n_photon` kept per resonator.
    pub fn new(n_photon: usize) -> Result<Self> {
        if n_photon < 2 {
            return Err(Error::InvalidArgument(format!(
                "photon truncation must keep at least 2 levels, got {n_photon}"
            )));
        }
        Ok(SpaceLayout { n_photon })
    }

    pub fn n_photon(&self) -> usize {
        self.n_photon
    }

    pub fn local_dim(&self, factor: Factor) -> usize {
        match factor {
            Factor::Qutrit1 | Factor::Qutrit2 => 3,
            Factor::ResonatorA | Factor::ResonatorB => self.n_photon,
        }
    }

    pub fn dim(&self) -> usize {
        9 * self.n_photon * self.n_photon
    }

    /// Basis index of `|q1, q2, n_a, n_b⟩`.
    pub fn index(&self, q1: Level, q2: Level, n_a: usize, n_b: usize) -> usize {
        debug_assert!(n_a < self.n_photon && n_b < self.n_photon);
        ((q1.index() * 3 + q2.index()) * self.n_photon + n_a) * self.n_photon + n_b
    }

    /// Inverse of [`SpaceLayout::index`].
    pub fn decompose(&self, index: usize) -> (Level, Level, usize, usize) {
        let n = self.n_photon;
        let n_b = index % n;
        let n_a = (index / n) % n;
        let q2 = Level::ALL[(index / (n * n)) % 3];
        let q1 = Level::ALL[index / (3 * n * n)];
        (q1, q2, n_a, n_b)
    }
}

/// Bosonic lowering operator on `n_levels` Fock states.
pub fn annihilation(n_levels: usize) -> Result<ComplexMatrix> {
    if n_levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "annihilation operator needs at least 2 levels, got {n_levels}"
        )));
    }
    let mut a = ComplexMatrix::zeros(n_levels, n_levels);
    for n in 1..n_levels {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// `|to⟩⟨from|` on a single qutrit. Equal levels give the projector.
pub fn qutrit_transition(from: Level, to: Level) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(3, 3);
    m[(to.index(), from.index())] = ONE;
    m
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Extends `local` to the full space, acting as the identity on every other
/// factor.
pub fn embed(local: &ComplexMatrix, factor: Factor, layout: &SpaceLayout) -> Result<ComplexMatrix> {
    let expected = layout.local_dim(factor);
    if local.nrows() != expected || local.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: local.nrows().max(local.ncols()),
        });
    }
    let mut out = DMatrix::from_element(1, 1, ONE);
    for f in Factor::ORDER {
        out = if f == factor {
            out.kronecker(local)
        } else {
            out.kronecker(&identity(layout.local_dim(f)))
        };
    }
    Ok(out)
}

/// Lowering operator of a resonator, embedded in the full space.
pub fn resonator_lowering(factor: Factor, layout: &SpaceLayout) -> Result<ComplexMatrix> {
    match factor {
        Factor::ResonatorA | Factor::ResonatorB => embed(&annihilation(layout.n_photon())?, factor, layout),
        _ => Err(Error::InvalidArgument(format!(
            "{} is not a resonator",
            factor.label()
        ))),
    }
}

/// `|to⟩⟨from|` on one qutrit, embedded in the full space.
pub fn qutrit_operator(factor: Factor, from: Level, to: Level, layout: &SpaceLayout) -> Result<ComplexMatrix> {
    match factor {
        Factor::Qutrit1 | Factor::Qutrit2 => embed(&qutrit_transition(from, to), factor, layout),
        _ => Err(Error::InvalidArgument(format!("{} is not a qutrit", factor.label()))),
    }
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entry of `|M − M†|`.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// `Tr(op · ρ)`.
pub fn expectation(op: &ComplexMatrix, rho: &DensityMatrix) -> Result<Complex64> {
    let r = rho.matrix();
    if op.nrows() != r.nrows() || op.ncols() != r.ncols() {
        return Err(Error::DimensionMismatch {
            expected: r.nrows(),
            found: op.nrows(),
        });
    }
    Ok(trace_of_product(op, r))
}

pub(crate) fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Pure state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct KetVector(DVector<Complex64>);

impl KetVector {
    /// Accepts any finite vector; use [`KetVector::normalized`] to enforce unit norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument("empty state vector".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite amplitude".into()));
        }
        Ok(KetVector(DVector::from_vec(amplitudes)))
    }

    /// Like [`KetVector::from_amplitudes`] but requires unit norm within 1e-10.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let ket = Self::from_amplitudes(amplitudes)?;
        let norm_sq = ket.norm_sqr();
        if (norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(ket)
    }

    pub fn basis(layout: &SpaceLayout, q1: Level, q2: Level, n_a: usize, n_b: usize) -> Self {
        let mut v = DVector::from_element(layout.dim(), ZERO);
        v[layout.index(q1, q2, n_a, n_b)] = ONE;
        KetVector(v)
    }

    pub(crate) fn from_vector(v: DVector<Complex64>) -> Self {
        KetVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.0[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &KetVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.0.dotc(&other.0))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }

    /// `⟨ψ|M|ψ⟩`.
    pub fn sandwich(&self, m: &ComplexMatrix) -> Result<Complex64> {
        if m.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        Ok(self.0.dotc(&(m * &self.0)))
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-8;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    /// Validates every invariant before wrapping.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidDensityMatrix(format!(
                "not square ({}×{})",
                m.nrows(),
                m.ncols()
            )));
        }
        if !is_finite(&m) {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        let herm = hermiticity_error(&m);
        if herm > Self::HERMITICITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("hermiticity error {herm:e}")));
        }
        let rho = DensityMatrix(m);
        let tr = rho.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr:.12}")));
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -Self::POSITIVITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("minimum eigenvalue {min_eig:e}")));
        }
        Ok(rho)
    }

    /// Wraps without validation; the engine checks trace and positivity on
    /// its own schedule.
    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        DensityMatrix(m)
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
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        trace_of_product(&self.0, &self.0).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.0)
    }

    /// `⟨ψ|ρ|ψ⟩`, real part.
    pub fn overlap(&self, psi: &KetVector) -> Result<f64> {
        Ok(psi.sandwich(&self.0)?.re)
    }
}

pub(crate) fn min_hermitian_eigenvalue(m: &ComplexMatrix) -> f64 {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout3() -> SpaceLayout {
        SpaceLayout::new(3).unwrap()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn annihilation_small_cases() {
        let a2 = annihilation(2).unwrap();
        assert_eq!(a2[(0, 1)], ONE);
        assert_eq!(a2.iter().filter(|z| z.norm() > 0.0).count(), 1);

        let a3 = annihilation(3).unwrap();
        assert!((a3[(1, 2)].re - 1.414_213_56).abs() < 1e-8);

        let n = a3.adjoint() * &a3;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { i as f64 } else { 0.0 };
                assert!((n[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-14);
            }
        }
        assert!(annihilation(1).is_err());
        assert!(annihilation(0).is_err());
    }

    #[test]
    fn truncated_commutator() {
        for n in 2..7 {
            let a = annihilation(n).unwrap();
            let c = commutator(&a, &a.adjoint());
            let mut want = identity(n);
            want[(n - 1, n - 1)] = Complex64::new(1.0 - n as f64, 0.0);
            assert!((c - want).norm() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn qutrit_transitions() {
        let raise = qutrit_transition(Level::G, Level::E);
        assert_eq!(raise[(1, 0)], ONE);
        assert_eq!(raise.iter().filter(|z| z.norm() > 0.0).count(), 1);

        let p = qutrit_transition(Level::E, Level::E);
        assert_eq!(p, DMatrix::from_diagonal(&DVector::from_vec(vec![ZERO, ONE, ZERO])));

        let lower = qutrit_transition(Level::E, Level::G);
        assert_eq!(&raise * &lower, p);
    }

    #[test]
    fn embed_identity_and_trace() {
        let l = layout3();
        let id = embed(&identity(3), Factor::Qutrit1, &l).unwrap();
        assert_eq!(id, identity(81));

        let see = embed(&qutrit_transition(Level::E, Level::E), Factor::Qutrit1, &l).unwrap();
        assert!((see.trace() - Complex64::new(27.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn embed_rejects_bad_input() {
        let l = layout3();
        assert!(matches!(
            embed(&identity(2), Factor::Qutrit1, &l),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Factor::from_label("res_c").is_err());
        assert_eq!(Factor::from_label("res_b").unwrap(), Factor::ResonatorB);
    }

    #[test]
    fn embed_respects_index_map() {
        let l = layout3();
        let a = resonator_lowering(Factor::ResonatorA, &l).unwrap();
        let from = l.index(Level::E, Level::F, 2, 1);
        let to = l.index(Level::E, Level::F, 1, 1);
        assert!((a[(to, from)].re - 2f64.sqrt()).abs() < 1e-14);

        let s = qutrit_operator(Factor::Qutrit2, Level::G, Level::F, &l).unwrap();
        let from = l.index(Level::F, Level::G, 0, 2);
        let to = l.index(Level::F, Level::F, 0, 2);
        assert_eq!(s[(to, from)], ONE);

        for idx in 0..l.dim() {
            let (q1, q2, na, nb) = l.decompose(idx);
            assert_eq!(l.index(q1, q2, na, nb), idx);
        }
    }

    #[test]
    fn disjoint_factors_commute() {
        let l = layout3();
        let a = embed(&qutrit_transition(Level::G, Level::F), Factor::Qutrit1, &l).unwrap();
        let b = resonator_lowering(Factor::ResonatorA, &l).unwrap();
        assert!(commutator(&a, &b).norm() < 1e-14);
    }

    #[test]
    fn expectation_basics() {
        let l = layout3();
        let vac = KetVector::basis(&l, Level::G, Level::G, 0, 0).to_density();
        assert!((expectation(&identity(81), &vac).unwrap() - ONE).norm() < 1e-14);

        let a = resonator_lowering(Factor::ResonatorA, &l).unwrap();
        let n = a.adjoint() * &a;
        assert!(expectation(&n, &vac).unwrap().norm() < 1e-14);

        let excited = KetVector::basis(&l, Level::E, Level::G, 0, 0).to_density();
        let see = qutrit_operator(Factor::Qutrit1, Level::E, Level::E, &l).unwrap();
        assert!((expectation(&see, &excited).unwrap() - ONE).norm() < 1e-14);

        assert!(expectation(&identity(3), &vac).is_err());
    }

    #[test]
    fn density_validation() {
        let mut m = identity(2) * Complex64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 0)] = Complex64::new(0.0, -0.1);
        assert!(DensityMatrix::new(m).is_ok());

        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.2, 0.0),
            Complex64::new(-0.2, 0.0),
        ]));
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::new(identity(2)).is_err());
    }

    #[test]
    fn normalized_ket_check() {
        assert!(KetVector::normalized(vec![ONE, ONE]).is_err());
        let h = Complex64::new(0.5f64.sqrt(), 0.0);
        assert!(KetVector::normalized(vec![h, h]).is_ok());
    }
}
