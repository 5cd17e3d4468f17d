//! Absorption spectra of the damped Tavis-Cummings system.
//!
//! [`im_chi`] evaluates the dressed-state doublet in closed form.
//! [`numeric_spectrum`] is the independent route: the steady state of the
//! master equation with a weak coherent probe on the emitters, solved per
//! probe frequency in the rotating frame.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{build_tc_hamiltonian, CavityOperators, Liouvillian, TavisCummingsParams};
use crate::error::{invalid, Error, Result};
use crate::par::{self, Execution};
use crate::qspace::{CompositeSpace, DickeSpace, FockSpace, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SusceptibilityParams {
    pub omega0: f64,
    pub omega: f64,
    pub lambda: f64,
    pub emitters: usize,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

impl SusceptibilityParams {
    pub fn validate(&self) -> Result<()> {
        if self.emitters == 0 {
            return Err(invalid("N", "need at least one emitter"));
        }
        if !(self.gamma_plus > 0.0) || !(self.gamma_minus > 0.0) {
            return Err(invalid("gamma", "line damping factors must be > 0"));
        }
        if !(self.lambda >= 0.0) {
            return Err(invalid("lambda", "must be >= 0"));
        }
        Ok(())
    }

    pub fn detuning(&self) -> f64 {
        self.omega0 - self.omega
    }

    /// `√(Δ² + 4Nλ²)`.
    pub fn rabi_width(&self) -> f64 {
        let d = self.detuning();
        (d * d + 4.0 * self.emitters as f64 * self.lambda * self.lambda).sqrt()
    }

    /// Dressed-state mixing angle with `tan 2θ = 2λ√N / Δ`, taken on the
    /// branch that keeps the larger weight on the emitter-like line
    /// (θ ∈ (0, π/4] for Δ ≥ 0, θ ∈ (π/4, π/2) for Δ < 0).
    pub fn mixing_angle(&self) -> f64 {
        0.5 * (2.0 * self.lambda * (self.emitters as f64).sqrt()).atan2(self.detuning())
    }
}

fn lorentzian(gamma: f64, x: f64) -> f64 {
    (gamma / PI) / (gamma * gamma + x * x)
}

/// `Im χ(Ω)`: the two dressed lines weighted by `cos²θ` and `sin²θ`.
pub fn im_chi(p: &SusceptibilityParams, omega_probe: f64) -> f64 {
    let delta = p.detuning();
    let r = p.rabi_width();
    let theta = p.mixing_angle();
    let x = omega_probe - p.omega0 + delta / 2.0;
    theta.cos().powi(2) * lorentzian(p.gamma_minus, x - r / 2.0)
        + theta.sin().powi(2) * lorentzian(p.gamma_plus, x + r / 2.0)
}

/// Far-detuned approximation of the doublet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersiveShifts {
    /// `ω₀ + Nλ²/Δ`.
    pub emitter_line: f64,
    /// `ω₀ - Δ - Nλ²/Δ`.
    pub cavity_line: f64,
    /// The symmetric pair `ω₀ ± Nλ²/|Δ|`.
    pub symmetric: (f64, f64),
    /// `λ²N/Δ² < 0.1`; always false on resonance.
    pub valid: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiPeaks {
    /// `ω₀ - Δ/2 + ½√(Δ² + 4Nλ²)`.
    pub upper: f64,
    /// `ω₀ - Δ/2 - ½√(Δ² + 4Nλ²)`.
    pub lower: f64,
    /// `√(Δ² + 4Nλ²)`, kept separately so it does not suffer cancellation
    /// against a large carrier frequency.
    pub width: f64,
    pub dispersive: DispersiveShifts,
}

impl RabiPeaks {
    pub fn splitting(&self) -> f64 {
        self.width
    }
}

pub fn rabi_peaks(omega0: f64, delta: f64, lambda: f64, emitters: usize) -> RabiPeaks {
    let n = emitters as f64;
    let width = (delta * delta + 4.0 * n * lambda * lambda).sqrt();
    let half = 0.5 * width;
    let centre = omega0 - delta / 2.0;
    let dispersive = if delta == 0.0 {
        DispersiveShifts {
            emitter_line: f64::NAN,
            cavity_line: f64::NAN,
            symmetric: (f64::NAN, f64::NAN),
            valid: false,
        }
    } else {
        let shift = n * lambda * lambda / delta;
        DispersiveShifts {
            emitter_line: omega0 + shift,
            cavity_line: omega0 - delta - shift,
            symmetric: (omega0 + shift.abs(), omega0 - shift.abs()),
            valid: n * lambda * lambda / (delta * delta) < 0.1,
        }
    };
    RabiPeaks {
        upper: centre + half,
        lower: centre - half,
        width,
        dispersive,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    Analytic,
    Numeric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSeries {
    pub omega: Vec<f64>,
    pub value: Vec<f64>,
    pub generator: Generator,
}

impl SpectrumSeries {
    pub fn new(omega: Vec<f64>, value: Vec<f64>, generator: Generator) -> Result<Self> {
        if omega.len() != value.len() {
            return Err(Error::DimensionMismatch {
                expected: omega.len(),
                found: value.len(),
            });
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("omega", "scan must be strictly increasing"));
        }
        if value.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("value", "absorption samples must be finite and >= 0"));
        }
        Ok(SpectrumSeries {
            omega,
            value,
            generator,
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `omega,value` with 17 significant digits, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,value\n");
        for (w, v) in self.omega.iter().zip(&self.value) {
            let _ = writeln!(out, "{w:.16e},{v:.16e}");
        }
        out
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

pub fn analytic_spectrum(p: &SusceptibilityParams, grid: &[f64], exec: Execution) -> Result<SpectrumSeries> {
    p.validate()?;
    let value = par::map(exec, grid, |&w| im_chi(p, w));
    SpectrumSeries::new(grid.to_vec(), value, Generator::Analytic)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub value: f64,
}

/// Local maxima by three-point comparison (plateaus resolve to their lowest
/// Ω), refined by a parabola through the neighbouring samples.  Maxima below
/// `1e-9` of the global maximum are treated as round-off ripple.
pub fn find_peaks(s: &SpectrumSeries) -> Result<Vec<Peak>> {
    let n = s.len();
    let top = s.value.iter().copied().fold(0.0, f64::max);
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        let (l, c) = (s.value[i - 1], s.value[i]);
        if c > l {
            // walk across a plateau
            let mut j = i;
            while j + 1 < n && s.value[j + 1] == c {
                j += 1;
            }
            if j + 1 < n && s.value[j + 1] < c && c > 1e-9 * top {
                peaks.push(if j > i {
                    Peak {
                        omega: s.omega[i],
                        value: c,
                    }
                } else {
                    refine(s, i)
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    if peaks.is_empty() {
        return Err(Error::NoPeakFound);
    }
    Ok(peaks)
}

fn refine(s: &SpectrumSeries, i: usize) -> Peak {
    let (x0, x1, x2) = (s.omega[i - 1], s.omega[i], s.omega[i + 1]);
    let (y0, y1, y2) = (s.value[i - 1], s.value[i], s.value[i + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if !(a < 0.0) {
        return Peak { omega: x1, value: y1 };
    }
    let c = y0 - a * x0 * x0 - b * x0;
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    Peak {
        omega: xv,
        value: a * xv * xv + b * xv + c,
    }
}

/// The two highest peaks ordered by frequency.
pub fn doublet(peaks: &[Peak]) -> Result<(Peak, Peak)> {
    if peaks.len() < 2 {
        return Err(Error::NoPeakFound);
    }
    let mut sorted = peaks.to_vec();
    sorted.sort_by(|a, b| b.value.total_cmp(&a.value));
    let (mut p, mut q) = (sorted[0], sorted[1]);
    if p.omega > q.omega {
        std::mem::swap(&mut p, &mut q);
    }
    Ok((p, q))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericSpectrumParams {
    pub tc: TavisCummingsParams,
    /// Cavity amplitude damping.
    pub kappa: f64,
    /// Per-emitter dipole damping.
    pub emitter_gamma: f64,
    /// Probe Rabi amplitude on the collective dipole.
    pub probe: f64,
    /// Highest total number of excitations above the ground state retained.
    pub excitation_cutoff: usize,
}

impl NumericSpectrumParams {
    /// Emitter damping equal to κ, probe `10⁻³ λ` (or `10⁻³ κ` when
    /// uncoupled), two-excitation cutoff.
    pub fn new(tc: TavisCummingsParams, kappa: f64) -> Self {
        let probe = if tc.lambda > 0.0 {
            1e-3 * tc.lambda
        } else {
            1e-3 * kappa
        };
        NumericSpectrumParams {
            tc,
            kappa,
            emitter_gamma: kappa,
            probe,
            excitation_cutoff: 2,
        }
    }

    fn validate(&self) -> Result<()> {
        DickeSpace::new(self.tc.emitters)?;
        if !(self.tc.omega0 > 0.0) || !(self.tc.omega > 0.0) || !(self.tc.lambda >= 0.0) {
            return Err(invalid("tc", "need omega0 > 0, omega > 0, lambda >= 0"));
        }
        if !(self.kappa >= 0.0) || !(self.emitter_gamma >= 0.0) || self.kappa + self.emitter_gamma == 0.0 {
            return Err(invalid("kappa", "need non-negative damping, not all zero"));
        }
        if !(self.probe > 0.0) {
            return Err(invalid("probe", "must be > 0"));
        }
        if self.excitation_cutoff == 0 {
            return Err(invalid("excitation_cutoff", "must be >= 1"));
        }
        Ok(())
    }
}

/// Frequency-independent pieces of the probed Liouvillian on the
/// excitation-truncated basis.
pub struct ProbeModel {
    dim: usize,
    /// Superoperator at Ω = 0.
    base: DMatrix<C64>,
    /// Diagonal of the Ω-proportional part (`ρ ↦ i[C, ρ]`).
    omega_diag: Vec<C64>,
    s_minus: DMatrix<C64>,
    probe: f64,
    emitters: f64,
}

impl ProbeModel {
    pub fn new(p: &NumericSpectrumParams) -> Result<Self> {
        p.validate()?;
        let cut = p.excitation_cutoff;
        let full = CompositeSpace::new(DickeSpace::new(p.tc.emitters)?, FockSpace::new(cut)?);
        let tc = TavisCummingsParams { n_max: cut, ..p.tc };
        let h = build_tc_hamiltonian(&tc)?;
        let ops = CavityOperators::new(full)?;
        // product states with at most `cut` excitations above |−S⟩ ⊗ |0⟩;
        // the Hamiltonian and both dissipators never leave this set upwards
        let keep: Vec<usize> = (0..full.dim())
            .filter(|&i| {
                let (k, n) = full.split(i);
                k + n <= cut
            })
            .collect();
        let project = |m: &DMatrix<C64>| DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])]);
        let drive = (ops.s_plus.matrix() + ops.s_minus.matrix()) * C64::new(p.probe, 0.0);
        let h0 = project(&(h.matrix() + drive));
        let n = p.tc.emitters as f64;
        let liou = Liouvillian::new(&h0)
            .with_jump(p.kappa, &project(ops.a.matrix()))
            // collective decay at γ/N damps the one-excitation manifold at γ
            .with_jump(p.emitter_gamma / n, &project(ops.s_minus.matrix()));
        let d = keep.len();
        let c_diag: Vec<f64> = keep.iter().map(|&i| ops.excitation.matrix()[(i, i)].re).collect();
        let mut omega_diag = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                // H → H − ΩC adds +iΩ[C, ρ]_ij = iΩ (c_i − c_j) ρ_ij
                omega_diag.push(C64::new(0.0, c_diag[i] - c_diag[j]));
            }
        }
        Ok(ProbeModel {
            dim: d,
            base: liou.superoperator(),
            omega_diag,
            s_minus: project(ops.s_minus.matrix()),
            probe: p.probe,
            emitters: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Steady state at probe frequency `omega_probe`, row-major.
    pub fn steady_state(&self, omega_probe: f64) -> Result<DMatrix<C64>> {
        let d = self.dim;
        let mut s = self.base.clone();
        for (k, z) in self.omega_diag.iter().enumerate() {
            s[(k, k)] += z * omega_probe;
        }
        // swap the ρ_00 equation for the trace condition
        let mut rhs = DVector::zeros(d * d);
        for c in 0..d * d {
            s[(0, c)] = C64::new(0.0, 0.0);
        }
        for i in 0..d {
            s[(0, i * d + i)] = C64::new(1.0, 0.0);
        }
        rhs[0] = C64::new(1.0, 0.0);
        let x = s
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("steady state at Ω = {omega_probe}")))?;
        Ok(DMatrix::from_row_slice(d, d, x.as_slice()))
    }

    /// Absorption `−Im⟨S⁻⟩ / (π ε N)`, normalised so an uncoupled emitter
    /// line integrates to one.
    pub fn absorption(&self, omega_probe: f64) -> Result<f64> {
        let rho = self.steady_state(omega_probe)?;
        let dipole = (&self.s_minus * &rho).trace();
        Ok(-dipole.im / (PI * self.probe * self.emitters))
    }
}

pub fn numeric_response(p: &NumericSpectrumParams, omega_probe: f64) -> Result<f64> {
    ProbeModel::new(p)?.absorption(omega_probe)
}

pub fn numeric_spectrum(p: &NumericSpectrumParams, grid: &[f64], exec: Execution) -> Result<SpectrumSeries> {
    let model = ProbeModel::new(p)?;
    let value = par::try_map(exec, grid, |&w| model.absorption(w))?;
    // solver round-off in far tails can dip a hair below zero
    let floor = 1e-12 * value.iter().copied().fold(0.0, f64::max);
    let value = value
        .into_iter()
        .map(|v| if v < 0.0 && v > -floor { 0.0 } else { v })
        .collect();
    SpectrumSeries::new(grid.to_vec(), value, Generator::Numeric)
}
