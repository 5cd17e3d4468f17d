//! Truncated Fock spaces, symmetric Dicke sectors and their tensor product.
//!
//! Composite bases are ordered (spin, field): the product state
//! `|k⟩ ⊗ |n⟩` sits at index `k * field_dim + n`, where `k = m + S` counts
//! emitter excitations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const STATE_TRACE_TOL: f64 = 1e-10;
pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_FLOOR: f64 = -1e-8;
/// Population allowed on the highest retained Fock level.
pub const TRUNCATION_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockSpace {
    n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(invalid("n_max", "Fock truncation needs n_max >= 1"));
        }
        Ok(FockSpace { n_max })
    }

    /// Default truncation `4 (n̄ + 1)` for an expected photon number `n̄`.
    pub fn for_mean_photons(mean: f64) -> Result<Self> {
        if !(mean >= 0.0) {
            return Err(invalid("mean photon number", "must be >= 0"));
        }
        Self::new((4.0 * (mean + 1.0)).ceil() as usize)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn number_state(&self, n: usize) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim());
        v[n.min(self.n_max)] = C64::new(1.0, 0.0);
        v
    }

    /// Coherent state `|α⟩` restricted to the truncated basis and renormalised.
    pub fn coherent(&self, alpha: C64) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim());
        let mut amp = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        v[0] = amp;
        for n in 1..self.dim() {
            amp = amp * alpha / (n as f64).sqrt();
            v[n] = amp;
        }
        let norm = v.norm();
        v / C64::new(norm, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DickeSpace {
    emitters: usize,
}

impl DickeSpace {
    pub fn new(emitters: usize) -> Result<Self> {
        if emitters == 0 {
            return Err(invalid("N", "need at least one emitter"));
        }
        Ok(DickeSpace { emitters })
    }

    pub fn emitters(&self) -> usize {
        self.emitters
    }

    pub fn dim(&self) -> usize {
        self.emitters + 1
    }

    /// Collective spin `S = N/2`.
    pub fn spin(&self) -> f64 {
        self.emitters as f64 / 2.0
    }

    /// `m` quantum number of basis index `k`.
    pub fn m(&self, k: usize) -> f64 {
        k as f64 - self.spin()
    }

    /// `|S, m = -S + k⟩`.
    pub fn state(&self, k: usize) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim());
        v[k.min(self.emitters)] = C64::new(1.0, 0.0);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompositeSpace {
    pub spin: DickeSpace,
    pub field: FockSpace,
}

impl CompositeSpace {
    pub fn new(spin: DickeSpace, field: FockSpace) -> Self {
        CompositeSpace { spin, field }
    }

    pub fn dim(&self) -> usize {
        self.spin.dim() * self.field.dim()
    }

    pub fn index(&self, k: usize, n: usize) -> usize {
        k * self.field.dim() + n
    }

    /// Inverse of [`CompositeSpace::index`].
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.field.dim(), idx % self.field.dim())
    }

    pub fn product(&self, spin: &DVector<C64>, field: &DVector<C64>) -> DVector<C64> {
        spin.kronecker(field)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Fock(FockSpace),
    Dicke(DickeSpace),
    Composite(CompositeSpace),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Fock(f) => f.dim(),
            Space::Dicke(d) => d.dim(),
            Space::Composite(c) => c.dim(),
        }
    }
}

impl From<FockSpace> for Space {
    fn from(s: FockSpace) -> Self {
        Space::Fock(s)
    }
}

impl From<DickeSpace> for Space {
    fn from(s: DickeSpace) -> Self {
        Space::Dicke(s)
    }
}

impl From<CompositeSpace> for Space {
    fn from(s: CompositeSpace) -> Self {
        Space::Composite(s)
    }
}

/// Largest entry of `|M - M†|`.
pub fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: Space,
    matrix: DMatrix<C64>,
    hermitian: bool,
}

impl Operator {
    pub fn new(space: impl Into<Space>, matrix: DMatrix<C64>) -> Result<Self> {
        let space = space.into();
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows(),
            });
        }
        Ok(Operator {
            space,
            matrix,
            hermitian: false,
        })
    }

    /// Builds an operator flagged Hermitian, checking the flag to [`HERMITIAN_TOL`].
    pub fn hermitian(space: impl Into<Space>, matrix: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::new(space, matrix)?;
        let deviation = hermiticity_error(&op.matrix);
        if deviation > HERMITIAN_TOL * max_abs(&op.matrix).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn zero(space: impl Into<Space>) -> Self {
        let space = space.into();
        let d = space.dim();
        Operator {
            space,
            matrix: DMatrix::zeros(d, d),
            hermitian: true,
        }
    }

    pub fn identity(space: impl Into<Space>) -> Self {
        let space = space.into();
        let d = space.dim();
        Operator {
            space,
            matrix: DMatrix::identity(d, d),
            hermitian: true,
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            space: self.space,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    fn check_same(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Product `self · other`.  The Hermitian flag is dropped.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Operator {
            space: self.space,
            matrix: &self.matrix * &other.matrix,
            hermitian: false,
        })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Operator {
            space: self.space,
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
            hermitian: false,
        })
    }

    /// `self + s · other`; Hermitian when both are and `s` is real.
    pub fn add_scaled(&self, s: C64, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Operator {
            space: self.space,
            matrix: &self.matrix + &other.matrix * s,
            hermitian: self.hermitian && other.hermitian && s.im == 0.0,
        })
    }

    pub fn scale(&self, s: f64) -> Operator {
        Operator {
            space: self.space,
            matrix: &self.matrix * C64::new(s, 0.0),
            hermitian: self.hermitian,
        }
    }

    /// Tensor product of a spin operator with a field operator.
    pub fn tensor(spin: &Operator, field: &Operator) -> Result<Operator> {
        match (spin.space, field.space) {
            (Space::Dicke(s), Space::Fock(f)) => Ok(Operator {
                space: Space::Composite(CompositeSpace::new(s, f)),
                matrix: spin.matrix.kronecker(&field.matrix),
                hermitian: spin.hermitian && field.hermitian,
            }),
            _ => Err(invalid("tensor", "factor order is (spin, field)")),
        }
    }

    pub fn expectation(&self, psi: &DVector<C64>) -> C64 {
        psi.dotc(&(&self.matrix * psi))
    }

    /// `‖self - other‖_max`.
    pub fn max_diff(&self, other: &Operator) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    /// Eigenvalues in ascending order; only meaningful for Hermitian operators.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Annihilation and creation operators with hard truncation (`a†|n_max⟩ = 0`).
pub fn fock_ladder(space: FockSpace) -> (Operator, Operator) {
    let d = space.dim();
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = real((n as f64).sqrt());
    }
    let a_dag = a.adjoint();
    (
        Operator {
            space: space.into(),
            matrix: a,
            hermitian: false,
        },
        Operator {
            space: space.into(),
            matrix: a_dag,
            hermitian: false,
        },
    )
}

pub fn number_operator(space: FockSpace) -> Operator {
    let d = space.dim();
    Operator {
        space: space.into(),
        matrix: DMatrix::from_diagonal(&DVector::from_fn(d, |n, _| real(n as f64))),
        hermitian: true,
    }
}

/// `(Sᶻ, S⁺, S⁻)` in the maximal sector `S = N/2`.
pub fn collective_spin(space: DickeSpace) -> (Operator, Operator, Operator) {
    let d = space.dim();
    let s = space.spin();
    let sz = DMatrix::from_diagonal(&DVector::from_fn(d, |k, _| real(space.m(k))));
    let mut sp = DMatrix::zeros(d, d);
    for k in 0..d - 1 {
        let m = space.m(k);
        sp[(k + 1, k)] = real((s * (s + 1.0) - m * (m + 1.0)).sqrt());
    }
    let sm = sp.adjoint();
    (
        Operator {
            space: space.into(),
            matrix: sz,
            hermitian: true,
        },
        Operator {
            space: space.into(),
            matrix: sp,
            hermitian: false,
        },
        Operator {
            space: space.into(),
            matrix: sm,
            hermitian: false,
        },
    )
}

pub fn lift_spin(op: &Operator, field: FockSpace) -> Result<Operator> {
    Operator::tensor(op, &Operator::identity(field))
}

pub fn lift_field(spin: DickeSpace, op: &Operator) -> Result<Operator> {
    Operator::tensor(&Operator::identity(spin), op)
}

/// Composite space and the excitation number `C = Sᶻ ⊗ I + I ⊗ a†a`.
pub fn tensor_and_excitation(spin: DickeSpace, field: FockSpace) -> (CompositeSpace, Operator) {
    let space = CompositeSpace::new(spin, field);
    let d = space.dim();
    let diag = DVector::from_fn(d, |idx, _| {
        let (k, n) = space.split(idx);
        real(spin.m(k) + n as f64)
    });
    (
        space,
        Operator {
            space: space.into(),
            matrix: DMatrix::from_diagonal(&diag),
            hermitian: true,
        },
    )
}

/// Invariant diagnostics of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hygiene {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Hygiene {
    pub fn holds(&self) -> bool {
        self.trace_error <= STATE_TRACE_TOL
            && self.hermiticity_error <= STATE_HERMITIAN_TOL
            && self.min_eigenvalue >= POSITIVITY_FLOOR
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and the positivity floor.
    pub fn new(space: impl Into<Space>, matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::unchecked(space.into(), matrix)?;
        let h = rho.hygiene();
        if !h.holds() {
            return Err(Error::InvalidState(format!(
                "trace error {:.3e}, hermiticity error {:.3e}, min eigenvalue {:.3e}",
                h.trace_error, h.hermiticity_error, h.min_eigenvalue
            )));
        }
        Ok(rho)
    }

    pub(crate) fn unchecked(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows(),
            });
        }
        Ok(DensityMatrix { space, matrix })
    }

    /// `|ψ⟩⟨ψ|` for a normalised `ψ` (normalised here if it is not).
    pub fn pure(space: impl Into<Space>, psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi / real(norm);
        Self::new(space, &psi * psi.adjoint())
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `tr(A ρ)`.
    pub fn expectation(&self, op: &Operator) -> C64 {
        let a = op.matrix();
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                acc += a[(i, k)] * self.matrix[(k, i)];
            }
        }
        acc
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * real(0.5);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn hygiene(&self) -> Hygiene {
        Hygiene {
            trace_error: (self.trace() - real(1.0)).norm(),
            hermiticity_error: hermiticity_error(&self.matrix),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }

    /// Total population of the top Fock level (zero for spaces without a field).
    pub fn top_fock_population(&self) -> f64 {
        top_fock_population(self.space, self.matrix.as_slice())
    }
}

/// Population of `|n_max⟩` summed over the spin factor.  Only diagonal entries
/// are read, so the storage order of `data` does not matter.
pub(crate) fn top_fock_population(space: Space, data: &[C64]) -> f64 {
    let d = space.dim();
    match space {
        Space::Fock(f) => data[f.n_max() * d + f.n_max()].re,
        Space::Composite(c) => (0..c.spin.dim())
            .map(|k| {
                let i = c.index(k, c.field.n_max());
                data[i * d + i].re
            })
            .sum(),
        Space::Dicke(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_spaces() {
        assert!(FockSpace::new(0).is_err());
        assert!(DickeSpace::new(0).is_err());
    }

    #[test]
    fn annihilator_on_vacuum_and_creator() {
        let f = FockSpace::new(4).unwrap();
        let (a, ad) = fock_ladder(f);
        let vac = f.number_state(0);
        assert!((a.matrix() * &vac).norm() == 0.0);
        let one = ad.matrix() * &vac;
        assert_eq!(one[1], real(1.0));
        assert!((one.norm() - 1.0).abs() < 1e-15);
        // top level is annihilated by a†
        assert!((ad.matrix() * f.number_state(4)).norm() == 0.0);
        assert!((a.matrix() * f.number_state(4) - f.number_state(3) * real(2.0)).norm() < 1e-15);
    }

    #[test]
    fn truncated_commutator() {
        let f = FockSpace::new(6).unwrap();
        let (a, ad) = fock_ladder(f);
        let comm = a.commutator(&ad).unwrap();
        let d = f.dim();
        let mut expected = DMatrix::<C64>::identity(d, d);
        expected[(d - 1, d - 1)] -= real(d as f64);
        assert!(max_abs(&(comm.matrix() - expected)) < 1e-13);
    }

    #[test]
    fn spin_half_and_ladder_coefficients() {
        let one = DickeSpace::new(1).unwrap();
        let (sz, _, _) = collective_spin(one);
        assert_eq!(sz.eigenvalues(), vec![-0.5, 0.5]);

        let two = DickeSpace::new(2).unwrap();
        let (_, sp, _) = collective_spin(two);
        let raised = sp.matrix() * two.state(0);
        assert!((raised[1].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(raised[0].norm() == 0.0 && raised[2].norm() == 0.0);
    }

    #[test]
    fn su2_algebra() {
        for n in 1..=12 {
            let s = DickeSpace::new(n).unwrap();
            let (sz, sp, sm) = collective_spin(s);
            let lhs = sp.commutator(&sm).unwrap();
            assert!(lhs.max_diff(&sz.scale(2.0)) < 1e-12, "N = {n}");
        }
    }

    #[test]
    fn composite_dims_and_excitation_eigenvalue() {
        let (space, _) = tensor_and_excitation(DickeSpace::new(2).unwrap(), FockSpace::new(3).unwrap());
        assert_eq!(space.dim(), 12);

        let spin = DickeSpace::new(1).unwrap();
        let field = FockSpace::new(3).unwrap();
        let (space, c) = tensor_and_excitation(spin, field);
        let psi = space.product(&spin.state(0), &field.number_state(1));
        let val = c.expectation(&psi);
        assert!((val.re - 0.5).abs() < 1e-15 && val.im == 0.0);
    }

    #[test]
    fn hermitian_flag_is_verified() {
        let f = FockSpace::new(3).unwrap();
        let (a, _) = fock_ladder(f);
        assert!(matches!(
            Operator::hermitian(f, a.matrix().clone()),
            Err(Error::NotHermitian { .. })
        ));
        assert!(Operator::hermitian(f, number_operator(f).into_matrix()).is_ok());
        assert!(Operator::new(f, DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn tensor_requires_spin_then_field() {
        let f = FockSpace::new(2).unwrap();
        let s = DickeSpace::new(1).unwrap();
        assert!(Operator::tensor(&Operator::identity(f), &Operator::identity(s)).is_err());
        assert_eq!(
            Operator::tensor(&Operator::identity(s), &Operator::identity(f))
                .unwrap()
                .dim(),
            6
        );
    }

    #[test]
    fn density_matrix_validation() {
        let f = FockSpace::new(3).unwrap();
        let rho = DensityMatrix::pure(f, &f.coherent(C64::new(0.8, 0.3))).unwrap();
        assert!(rho.hygiene().holds());
        assert!((rho.purity() - 1.0).abs() < 1e-12);

        let mut bad = DMatrix::<C64>::zeros(4, 4);
        bad[(0, 0)] = real(1.5);
        bad[(1, 1)] = real(-0.5);
        assert!(DensityMatrix::new(f, bad).is_err());
    }

    proptest! {
        #[test]
        fn coherent_state_mean_photon_number(re in -1.5f64..1.5, im in -1.5f64..1.5) {
            let f = FockSpace::new(40).unwrap();
            let alpha = C64::new(re, im);
            let psi = f.coherent(alpha);
            let n = number_operator(f).expectation(&psi).re;
            prop_assert!((n - alpha.norm_sqr()).abs() < 1e-10);
            let (a, _) = fock_ladder(f);
            prop_assert!((a.expectation(&psi) - alpha).norm() < 1e-10);
        }

        #[test]
        fn excitation_is_diagonal_sum(n in 1usize..6, nmax in 1usize..6) {
            let spin = DickeSpace::new(n).unwrap();
            let field = FockSpace::new(nmax).unwrap();
            let (_, c) = tensor_and_excitation(spin, field);
            let (sz, _, _) = collective_spin(spin);
            let expected = lift_spin(&sz, field).unwrap()
                .add_scaled(real(1.0), &lift_field(spin, &number_operator(field)).unwrap()).unwrap();
            prop_assert!(c.max_diff(&expected) < 1e-14);
        }
    }
}
