//! Tavis-Cummings and dispersive Hamiltonians, and density-matrix evolution
//! under cavity leakage, secular damping and pure phase damping.
//!
//! Units are ħ = 1.  Dissipators follow the convention
//! `-r (L†L ρ - 2 L ρ L† + ρ L†L)`, so a cavity rate κ damps the field
//! amplitude at κ and the photon number at 2κ.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::ode::{Dopri5, Tolerance};
use crate::qspace::{
    collective_spin, fock_ladder, lift_field, lift_spin, number_operator, tensor_and_excitation, top_fock_population,
    CompositeSpace, DensityMatrix, DickeSpace, FockSpace, Operator, Space, C64, TRUNCATION_LIMIT,
};

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Nonzero entries of a square matrix.
#[derive(Clone, Debug)]
pub(crate) struct Sparse {
    pub entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        Sparse { entries }
    }
}

#[derive(Clone, Debug)]
struct Jump {
    rate: f64,
    op: Sparse,
    op_dag_op: Sparse,
}

/// Generator `ρ ↦ -i[H, ρ] + Σ dissipators` acting on row-major flat matrices.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    h: Sparse,
    jumps: Vec<Jump>,
}

impl Liouvillian {
    pub fn new(h: &DMatrix<C64>) -> Self {
        Liouvillian {
            dim: h.nrows(),
            h: Sparse::from_dense(h),
            jumps: Vec::new(),
        }
    }

    /// Adds `-rate (L†L ρ - 2 L ρ L† + ρ L†L)`.
    pub fn with_jump(mut self, rate: f64, op: &DMatrix<C64>) -> Self {
        if rate > 0.0 {
            self.jumps.push(Jump {
                rate,
                op: Sparse::from_dense(op),
                op_dag_op: Sparse::from_dense(&(op.adjoint() * op)),
            });
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        out.iter_mut().for_each(|z| *z = ZERO);
        for &(i, k, v) in &self.h.entries {
            let c = -I * v;
            let (src, dst) = (k * d, i * d);
            for j in 0..d {
                out[dst + j] += c * rho[src + j];
            }
        }
        for &(k, j, v) in &self.h.entries {
            let c = I * v;
            for i in 0..d {
                out[i * d + j] += c * rho[i * d + k];
            }
        }
        for jump in &self.jumps {
            let r = jump.rate;
            for &(i, k, v) in &jump.op_dag_op.entries {
                let c = -r * v;
                let (src, dst) = (k * d, i * d);
                for j in 0..d {
                    out[dst + j] += c * rho[src + j];
                }
            }
            for &(k, j, v) in &jump.op_dag_op.entries {
                let c = -r * v;
                for i in 0..d {
                    out[i * d + j] += c * rho[i * d + k];
                }
            }
            for &(i, k, v1) in &jump.op.entries {
                for &(j, l, v2) in &jump.op.entries {
                    out[i * d + j] += 2.0 * r * v1 * v2.conj() * rho[k * d + l];
                }
            }
        }
    }

    /// Dense `d² × d²` superoperator on row-major vectorised matrices
    /// (`vec(ρ)[i d + j] = ρ_ij`).
    pub fn superoperator(&self) -> DMatrix<C64> {
        let d = self.dim;
        let mut s = DMatrix::zeros(d * d, d * d);
        // H ρ  ->  H ⊗ I ;  ρ H  ->  I ⊗ Hᵀ
        let left = |m: &Sparse, c: C64, s: &mut DMatrix<C64>| {
            for &(i, k, v) in &m.entries {
                for j in 0..d {
                    s[(i * d + j, k * d + j)] += c * v;
                }
            }
        };
        left(&self.h, -I, &mut s);
        for jump in &self.jumps {
            left(&jump.op_dag_op, C64::new(-jump.rate, 0.0), &mut s);
        }
        let right = |m: &Sparse, c: C64, s: &mut DMatrix<C64>| {
            for &(k, j, v) in &m.entries {
                for i in 0..d {
                    s[(i * d + j, i * d + k)] += c * v;
                }
            }
        };
        right(&self.h, I, &mut s);
        for jump in &self.jumps {
            right(&jump.op_dag_op, C64::new(-jump.rate, 0.0), &mut s);
            for &(i, k, v1) in &jump.op.entries {
                for &(j, l, v2) in &jump.op.entries {
                    s[(i * d + j, k * d + l)] += 2.0 * jump.rate * v1 * v2.conj();
                }
            }
        }
        s
    }
}

pub(crate) fn to_row_major(m: &DMatrix<C64>) -> Vec<C64> {
    m.transpose().as_slice().to_vec()
}

pub(crate) fn from_row_major(d: usize, v: &[C64]) -> DMatrix<C64> {
    DMatrix::from_row_slice(d, d, v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TavisCummingsParams {
    pub omega0: f64,
    pub omega: f64,
    pub lambda: f64,
    pub emitters: usize,
    pub n_max: usize,
}

impl TavisCummingsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(invalid("omega0", "must be > 0"));
        }
        if !(self.omega > 0.0) {
            return Err(invalid("omega", "must be > 0"));
        }
        if !(self.lambda >= 0.0) {
            return Err(invalid("lambda", "must be >= 0"));
        }
        DickeSpace::new(self.emitters)?;
        FockSpace::new(self.n_max)?;
        Ok(())
    }

    /// `Δ = ω₀ - ω`.
    pub fn detuning(&self) -> f64 {
        self.omega0 - self.omega
    }

    pub fn space(&self) -> Result<CompositeSpace> {
        Ok(CompositeSpace::new(
            DickeSpace::new(self.emitters)?,
            FockSpace::new(self.n_max)?,
        ))
    }
}

/// Elementary operators lifted to a composite (spin, field) space.
#[derive(Clone, Debug)]
pub struct CavityOperators {
    pub space: CompositeSpace,
    pub a: Operator,
    pub a_dag: Operator,
    pub number: Operator,
    pub sz: Operator,
    pub s_plus: Operator,
    pub s_minus: Operator,
    pub excitation: Operator,
}

impl CavityOperators {
    pub fn new(space: CompositeSpace) -> Result<Self> {
        let (a, a_dag) = fock_ladder(space.field);
        let (sz, sp, sm) = collective_spin(space.spin);
        let (_, excitation) = tensor_and_excitation(space.spin, space.field);
        Ok(CavityOperators {
            space,
            a: lift_field(space.spin, &a)?,
            a_dag: lift_field(space.spin, &a_dag)?,
            number: lift_field(space.spin, &number_operator(space.field))?,
            sz: lift_spin(&sz, space.field)?,
            s_plus: lift_spin(&sp, space.field)?,
            s_minus: lift_spin(&sm, space.field)?,
            excitation,
        })
    }
}

/// `H = ω₀ Sᶻ + ω a†a + λ (S⁺a + S⁻a†)`.
pub fn build_tc_hamiltonian(p: &TavisCummingsParams) -> Result<Operator> {
    tc_hamiltonian_on(p, p.space()?)
}

/// As [`build_tc_hamiltonian`] on a caller-supplied space, which must match
/// the emitter count and truncation in `p`.
pub fn tc_hamiltonian_on(p: &TavisCummingsParams, space: CompositeSpace) -> Result<Operator> {
    p.validate()?;
    let expected = p.space()?;
    if space != expected {
        return Err(Error::DimensionMismatch {
            expected: expected.dim(),
            found: space.dim(),
        });
    }
    let ops = CavityOperators::new(space)?;
    let coupling = ops
        .s_plus
        .compose(&ops.a)?
        .add_scaled(C64::new(1.0, 0.0), &ops.s_minus.compose(&ops.a_dag)?)?;
    let m = ops.sz.matrix() * C64::new(p.omega0, 0.0)
        + ops.number.matrix() * C64::new(p.omega, 0.0)
        + coupling.matrix() * C64::new(p.lambda, 0.0);
    Operator::hermitian(space, m)
}

/// Cavity-damped master equation with an optional collective emitter decay.
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    pub hamiltonian: Operator,
    pub kappa: f64,
    /// Rate of the `S⁻` dissipator (same convention as `kappa`); zero by default.
    pub emitter_gamma: f64,
}

impl LindbladSpec {
    pub fn new(hamiltonian: Operator, kappa: f64) -> Result<Self> {
        let spec = LindbladSpec {
            hamiltonian,
            kappa,
            emitter_gamma: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_emitter_damping(mut self, gamma: f64) -> Result<Self> {
        self.emitter_gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(invalid("kappa", "must be >= 0"));
        }
        if !(self.emitter_gamma >= 0.0) {
            return Err(invalid("emitter_gamma", "must be >= 0"));
        }
        if !self.hamiltonian.is_hermitian() {
            return Err(invalid("hamiltonian", "must be flagged Hermitian"));
        }
        if matches!(self.hamiltonian.space(), Space::Dicke(_)) {
            return Err(invalid("hamiltonian", "cavity damping needs a field factor"));
        }
        Ok(())
    }

    pub fn liouvillian(&self) -> Result<Liouvillian> {
        let mut l = Liouvillian::new(self.hamiltonian.matrix());
        match self.hamiltonian.space() {
            Space::Fock(f) => {
                let (a, _) = fock_ladder(f);
                l = l.with_jump(self.kappa, a.matrix());
            }
            Space::Composite(c) => {
                let ops = CavityOperators::new(c)?;
                l = l.with_jump(self.kappa, ops.a.matrix());
                l = l.with_jump(self.emitter_gamma, ops.s_minus.matrix());
            }
            Space::Dicke(_) => unreachable!("rejected by validate"),
        }
        Ok(l)
    }
}

/// Step control for density matrices: `tol` relative, with an absolute floor
/// three decades lower so near-zero eigenvalues stay above the positivity floor.
pub(crate) fn state_tolerance(tol: f64) -> Tolerance {
    Tolerance {
        rtol: tol,
        atol: tol * 1e-3,
    }
}

fn check_state_space(rho: &DensityMatrix, space: Space) -> Result<()> {
    if rho.space() != space {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

fn finish_state(space: Space, d: usize, v: &[C64]) -> Result<DensityMatrix> {
    let m = from_row_major(d, v);
    // restore exact Hermiticity lost to round-off
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(space, m)
}

/// Integrates the master equation, returning validated states at `times`.
/// Every accepted step is checked against the Fock truncation limit.
pub fn lindblad_trajectory(
    spec: &LindbladSpec,
    rho0: &DensityMatrix,
    times: &[f64],
    tol: f64,
) -> Result<Vec<DensityMatrix>> {
    let space = spec.hamiltonian.space();
    check_state_space(rho0, space)?;
    if times.iter().any(|&t| !(t >= 0.0)) {
        return Err(invalid("t", "evolution times must be >= 0"));
    }
    let liou = spec.liouvillian()?;
    let d = liou.dim();
    let y0 = to_row_major(rho0.matrix());
    let solver = Dopri5::new(state_tolerance(tol));
    let check = |t: f64, y: &[C64]| {
        let population = top_fock_population(space, y);
        if population > TRUNCATION_LIMIT {
            Err(Error::TruncationBreach { population, t })
        } else {
            Ok(())
        }
    };
    check(0.0, &y0)?;
    let (states, _) = solver.solve(|_, y, dy| liou.apply(y, dy), 0.0, &y0, times, check)?;
    states.iter().map(|v| finish_state(space, d, v)).collect()
}

pub fn lindblad_evolve(spec: &LindbladSpec, rho0: &DensityMatrix, t: f64, tol: f64) -> Result<DensityMatrix> {
    let mut out = lindblad_trajectory(spec, rho0, &[t], tol)?;
    Ok(out.pop().expect("single output time"))
}

/// Energies and damping matrix for the secular equation
/// `∂ρ_ij = -i (E_i - E_j) ρ_ij - Γ_ij ρ_ij`.
#[derive(Clone, Debug)]
pub struct SecularSpec {
    pub energies: Vec<f64>,
    pub gammas: DMatrix<f64>,
}

impl SecularSpec {
    pub fn new(energies: Vec<f64>, gammas: DMatrix<f64>) -> Result<Self> {
        let n = energies.len();
        if gammas.nrows() != n || gammas.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gammas.nrows(),
            });
        }
        for i in 0..n {
            if gammas[(i, i)] != 0.0 {
                return Err(invalid("gammas", "diagonal must be zero"));
            }
            for j in 0..n {
                if !(gammas[(i, j)] >= 0.0) || gammas[(i, j)] != gammas[(j, i)] {
                    return Err(invalid("gammas", "must be symmetric and non-negative"));
                }
            }
        }
        Ok(SecularSpec { energies, gammas })
    }

    /// Same damping `gamma` for every off-diagonal pair.
    pub fn uniform(energies: Vec<f64>, gamma: f64) -> Result<Self> {
        let n = energies.len();
        Self::new(
            energies,
            DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { gamma }),
        )
    }
}

/// Closed-form secular evolution of a state given in the energy eigenbasis.
pub fn secular_evolve(spec: &SecularSpec, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let n = spec.energies.len();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.dim(),
        });
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rho0.matrix()[(i, i)]
        } else {
            let phase = C64::new(-spec.gammas[(i, j)] * t, -(spec.energies[i] - spec.energies[j]) * t);
            rho0.matrix()[(i, j)] * phase.exp()
        }
    });
    DensityMatrix::unchecked(rho0.space(), m)
}

/// Eigen-decomposition of a Hermitian operator, ascending energies.
#[derive(Clone, Debug)]
pub struct EnergyBasis {
    pub energies: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: DMatrix<C64>,
}

impl EnergyBasis {
    pub fn new(h: &Operator) -> Self {
        let eig = SymmetricEigen::new(h.matrix().clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let d = h.dim();
        let vectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
        EnergyBasis {
            energies: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
            vectors,
        }
    }

    /// `U† ρ U`.
    pub fn to_eigenbasis(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        self.vectors.adjoint() * rho * &self.vectors
    }

    pub fn from_eigenbasis(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        &self.vectors * rho * self.vectors.adjoint()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseDampingSpec {
    pub omega: f64,
    pub kappa: f64,
}

impl PhaseDampingSpec {
    pub fn new(omega: f64, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(invalid("kappa", "phase-damping rate must be >= 0"));
        }
        if !omega.is_finite() {
            return Err(invalid("omega", "must be finite"));
        }
        Ok(PhaseDampingSpec { omega, kappa })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseDampingMode {
    Analytic,
    Numeric { tol_exp: i32 },
}

impl PhaseDampingMode {
    pub fn numeric(tol: f64) -> Self {
        PhaseDampingMode::Numeric {
            tol_exp: tol.log10().round() as i32,
        }
    }
}

/// Phase damping of an oscillator state in the number basis, under
/// `H = ω a†a` and `∂ρ = (κ/2)(2NρN - ρN² - N²ρ)`.  Set `omega = 0` for the
/// frame co-rotating with the oscillator.
pub fn phase_damping_evolve(
    spec: &PhaseDampingSpec,
    rho0: &DensityMatrix,
    t: f64,
    mode: PhaseDampingMode,
) -> Result<DensityMatrix> {
    let field = match rho0.space() {
        Space::Fock(f) => f,
        _ => return Err(invalid("rho0", "phase damping acts on a single oscillator")),
    };
    let d = field.dim();
    match mode {
        PhaseDampingMode::Analytic => {
            let m = DMatrix::from_fn(d, d, |n, m| {
                if n == m {
                    return rho0.matrix()[(n, n)];
                }
                let k = n as f64 - m as f64;
                let factor = C64::new(-spec.kappa * k * k * t / 2.0, -spec.omega * k * t).exp();
                rho0.matrix()[(n, m)] * factor
            });
            DensityMatrix::unchecked(rho0.space(), m)
        }
        PhaseDampingMode::Numeric { tol_exp } => {
            let number = number_operator(field);
            let h = number.matrix() * C64::new(spec.omega, 0.0);
            let liou = Liouvillian::new(&h).with_jump(spec.kappa / 2.0, number.matrix());
            let solver = Dopri5::new(state_tolerance(10f64.powi(tol_exp)));
            let y = solver.integrate(|_, y, dy| liou.apply(y, dy), 0.0, &to_row_major(rho0.matrix()), t)?;
            DensityMatrix::unchecked(rho0.space(), from_row_major(d, &y))
        }
    }
}

/// Heisenberg-picture evolution `dA/dt = i [H, A]`.
pub fn evolve_heisenberg(h: &Operator, a: &Operator, t: f64, tol: f64) -> Result<Operator> {
    if h.space() != a.space() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: a.dim(),
        });
    }
    let liou = Liouvillian::new(h.matrix());
    let solver = Dopri5::new(Tolerance::uniform(tol));
    // -i[H, A] integrated backwards in time is i[H, A] forwards
    let y = solver.integrate(
        |_, y, dy| {
            liou.apply(y, dy);
            dy.iter_mut().for_each(|z| *z = -*z);
        },
        0.0,
        &to_row_major(a.matrix()),
        t,
    )?;
    Operator::new(a.space(), from_row_major(a.dim(), &y))
}

/// Dispersive two-level probe coupled to a cavity: `bare = ω_ef D⁺D⁻` and
/// `interaction = (λ²/Δ) a†a D⁺D⁻`.  Their sum is `ω_eff D⁺D⁻` with the
/// photon number promoted to the operator `a†a`.
#[derive(Clone, Debug)]
pub struct DispersiveHamiltonian {
    pub space: CompositeSpace,
    pub bare: Operator,
    pub interaction: Operator,
    /// `λ² n_max / Δ² < 0.1` over the retained photon numbers.
    pub valid: bool,
}

impl DispersiveHamiltonian {
    pub fn total(&self) -> Operator {
        self.bare
            .add_scaled(C64::new(1.0, 0.0), &self.interaction)
            .expect("same space by construction")
    }

    /// `A_P = (D⁺ - D⁻) / 2i`.
    pub fn probe_dipole(&self) -> Result<Operator> {
        let (_, dp, dm) = collective_spin(self.space.spin);
        let diff = dp.add_scaled(C64::new(-1.0, 0.0), &dm)?;
        let m = diff.matrix() / (C64::new(0.0, 2.0));
        let ap = Operator::hermitian(self.space.spin, m)?;
        lift_spin(&ap, self.space.field)
    }
}

fn dispersive_validity(lambda: f64, delta: f64, n: f64) -> bool {
    lambda * lambda * n / (delta * delta) < 0.1
}

pub fn dispersive_hamiltonian(
    lambda: f64,
    delta: f64,
    omega_ef: f64,
    field: FockSpace,
) -> Result<DispersiveHamiltonian> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(invalid("Delta", "dispersive regime needs a nonzero detuning"));
    }
    let spin = DickeSpace::new(1)?;
    let (_, dp, dm) = collective_spin(spin);
    let excited = Operator::hermitian(spin, dp.compose(&dm)?.into_matrix())?;
    let excited = lift_spin(&excited, field)?;
    let n = lift_field(spin, &number_operator(field))?;
    let interaction = Operator::hermitian(
        CompositeSpace::new(spin, field),
        n.compose(&excited)?.into_matrix() * C64::new(lambda * lambda / delta, 0.0),
    )?;
    Ok(DispersiveHamiltonian {
        space: CompositeSpace::new(spin, field),
        bare: excited.scale(omega_ef),
        interaction,
        valid: dispersive_validity(lambda, delta, field.n_max() as f64),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbePhase {
    /// `Δφ = ω_ef t + λ² n t / Δ`.
    pub total: f64,
    /// Rabi part `λ² n t / Δ`.
    pub rabi: f64,
    pub valid: bool,
}

pub fn probe_phase(t: f64, lambda: f64, delta: f64, n: f64, omega_ef: f64) -> Result<ProbePhase> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(invalid("Delta", "dispersive regime needs a nonzero detuning"));
    }
    let rabi = lambda * lambda * n * t / delta;
    Ok(ProbePhase {
        total: omega_ef * t + rabi,
        rabi,
        valid: dispersive_validity(lambda, delta, n),
    })
}

/// Block of `ρ` between emitter excitation indices `k_row` and `k_col`, as a
/// field-space matrix.
pub fn spin_block(space: CompositeSpace, rho: &DMatrix<C64>, k_row: usize, k_col: usize) -> DMatrix<C64> {
    let fd = space.field.dim();
    DMatrix::from_fn(fd, fd, |n, m| rho[(space.index(k_row, n), space.index(k_col, m))])
}

/// Product state `|k⟩ ⊗ |field⟩`.
pub fn product_state(space: CompositeSpace, k: usize, field: &DVector<C64>) -> DVector<C64> {
    space.product(&space.spin.state(k), field)
}
