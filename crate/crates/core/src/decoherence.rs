//! Cat-state decoherence: pointer distance, collapse-time laws and a
//! numerical check of the `D²` rate scaling under cavity damping.
//!
//! Damping times follow the photon-energy convention `T_r = 1/(2κ)`, where
//! κ is the amplitude rate of the cavity jump operator.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::dynamics::{lindblad_trajectory, spin_block, LindbladSpec};
use crate::error::{invalid, Error, Result};
use crate::fit::linear_fit;
use crate::par::{self, Execution};
use crate::qspace::{CompositeSpace, DensityMatrix, DickeSpace, FockSpace, Operator, C64};

/// `D = 2√n sin φ`.
pub fn pointer_distance(n: f64, phi: f64) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(invalid("n", "photon number must be >= 0"));
    }
    Ok(2.0 * n.sqrt() * phi.sin())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersiveDistance {
    pub distance: f64,
    /// Accumulated phase `nλ²t/Δ`.
    pub phase: f64,
    /// Small-angle regime, `|φ| ≤ 0.1`.
    pub valid: bool,
}

/// `D ≈ 2n^{3/2}λ²t/Δ`.
pub fn pointer_distance_dispersive(n: f64, lambda: f64, t: f64, delta: f64) -> Result<DispersiveDistance> {
    if !(n >= 0.0) {
        return Err(invalid("n", "photon number must be >= 0"));
    }
    if delta == 0.0 || !delta.is_finite() {
        return Err(invalid("delta", "dispersive form needs a finite non-zero detuning"));
    }
    let phase = n * lambda * lambda * t / delta;
    Ok(DispersiveDistance {
        distance: 2.0 * n.sqrt() * phase,
        phase,
        valid: phase.abs() <= 0.1,
    })
}

pub fn time_from_kappa(kappa: f64) -> f64 {
    1.0 / (2.0 * kappa)
}

/// `t = 2T_r / D²`.
pub fn collapse_time(t_r: f64, d: f64) -> Result<f64> {
    if !(t_r > 0.0) {
        return Err(invalid("T_r", "must be > 0"));
    }
    if d == 0.0 || !d.is_finite() {
        return Err(invalid("D", "identical pointers do not decohere"));
    }
    Ok(2.0 * t_r / (d * d))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseParams {
    pub t_r: f64,
    pub n: f64,
    pub emitters: f64,
    pub lambda0: f64,
    pub delta: f64,
    pub t: f64,
}

impl CollapseParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("T_r", self.t_r),
            ("n", self.n),
            ("N", self.emitters),
            ("lambda0", self.lambda0),
            ("delta", self.delta),
            ("t", self.t),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CollapseMode {
    /// `sin²` of the accumulated phase as written.
    Literal,
    /// `sin²` replaced by its mean 1/2.
    #[default]
    Mean,
}

/// Collapse time for the many-emitter dispersive cat,
/// `T_r / (2nN sin²(Nnλ₀²t/Δ))`.
pub fn mt_collapse_time(p: &CollapseParams, mode: CollapseMode) -> Result<f64> {
    p.validate()?;
    let s2 = match mode {
        CollapseMode::Mean => 0.5,
        CollapseMode::Literal => {
            let s = (p.emitters * p.n * p.lambda0 * p.lambda0 * p.t / p.delta).sin();
            s * s
        }
    };
    if s2 < 1e-12 {
        return Err(invalid(
            "t",
            format!("sin² of accumulated phase is {s2:e}, too small to be meaningful"),
        ));
    }
    Ok(p.t_r / (2.0 * p.n * p.emitters * s2))
}

/// `(|e, αe^{iφ}⟩ + |g, αe^{-iφ}⟩)/√2` with real `α = √n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatSpec {
    pub n_avg: f64,
    pub phi: f64,
    pub space: CompositeSpace,
}

impl CatSpec {
    /// Chooses the smallest Fock cutoff at or above `n + 6√n` whose Poisson
    /// weight at the cutoff is below `10⁻⁸`.
    pub fn new(n_avg: f64, phi: f64) -> Result<Self> {
        if !(n_avg >= 0.0) || !n_avg.is_finite() {
            return Err(invalid("n_avg", "must be finite and >= 0"));
        }
        if !phi.is_finite() {
            return Err(invalid("phi", "must be finite"));
        }
        let mut n_max = (n_avg + 6.0 * n_avg.sqrt()).ceil().max(1.0) as usize;
        while poisson_pmf(n_avg, n_max) >= 1e-8 {
            n_max += 1;
        }
        Self::with_cutoff(n_avg, phi, n_max)
    }

    pub fn with_cutoff(n_avg: f64, phi: f64, n_max: usize) -> Result<Self> {
        if (n_max as f64) < n_avg + 6.0 * n_avg.sqrt() {
            return Err(invalid(
                "n_max",
                format!("cutoff {n_max} does not cover n + 6√n for n = {n_avg}"),
            ));
        }
        Ok(CatSpec {
            n_avg,
            phi,
            space: CompositeSpace::new(DickeSpace::new(1)?, FockSpace::new(n_max)?),
        })
    }

    pub fn distance(&self) -> f64 {
        2.0 * self.n_avg.sqrt() * self.phi.sin()
    }

    pub fn state(&self) -> Result<DensityMatrix> {
        let field = self.space.field;
        let alpha = self.n_avg.sqrt();
        let plus = field.coherent(C64::from_polar(alpha, self.phi));
        let minus = field.coherent(C64::from_polar(alpha, -self.phi));
        let dicke = self.space.spin;
        // Dicke index 1 is |e⟩ (m = +½), index 0 is |g⟩
        let psi = (self.space.product(&dicke.state(1), &plus) + self.space.product(&dicke.state(0), &minus))
            * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let norm = psi.norm();
        DensityMatrix::pure(self.space, &(psi / C64::new(norm, 0.0)))
    }
}

fn poisson_pmf(mean: f64, k: usize) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
    (k as f64 * mean.ln() - mean - ln_fact).exp()
}

/// Size of the `⟨e|ρ|g⟩` block: `‖ρ_eg‖_F`.
pub fn cat_coherence(space: CompositeSpace, rho: &DMatrix<C64>) -> f64 {
    spin_block(space, rho, 1, 0).norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatDecay {
    pub distance: f64,
    pub times: Vec<f64>,
    pub coherence: Vec<f64>,
    pub rate_fit: f64,
    /// `D²/(2T_r)`.
    pub rate_pred: f64,
}

impl CatDecay {
    /// `rate_fit / rate_pred`; NaN when no decay is predicted.
    pub fn ratio(&self) -> f64 {
        if self.rate_pred == 0.0 {
            f64::NAN
        } else {
            self.rate_fit / self.rate_pred
        }
    }
}

/// Damps the cat in a frame co-rotating with the field, samples the
/// coherence on `times` and fits `ln|c| = a − Γt` over samples above `10⁻⁸`.
pub fn simulate_cat_decoherence(cat: &CatSpec, kappa: f64, times: &[f64], tol: f64) -> Result<CatDecay> {
    if !(kappa > 0.0) {
        return Err(invalid("kappa", "must be > 0"));
    }
    if times.len() < 2 {
        return Err(invalid("times", "need at least two samples"));
    }
    let spec = LindbladSpec::new(Operator::zero(cat.space), kappa)?;
    let rho0 = cat.state()?;
    let traj = lindblad_trajectory(&spec, &rho0, times, tol)?;
    let coherence: Vec<f64> = traj.iter().map(|r| cat_coherence(cat.space, r.matrix())).collect();
    if coherence[0] < 1e-12 {
        return Err(Error::FitFailure(format!(
            "coherence {:e} at first sample",
            coherence[0]
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&coherence)
        .filter(|(_, c)| **c > 1e-8)
        .map(|(t, c)| (*t, c.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::FitFailure("fewer than two samples above 1e-8".into()));
    }
    let fit = linear_fit(&xs, &ys)?;
    let d = cat.distance();
    Ok(CatDecay {
        distance: d,
        times: times.to_vec(),
        coherence,
        rate_fit: -fit.slope,
        rate_pred: d * d / (2.0 * time_from_kappa(kappa)),
    })
}

/// Evenly spaced samples on `[0, 0.05/κ]`, short enough that the field
/// energy barely moves while the coherence decays.
pub fn default_times(kappa: f64, samples: usize) -> Vec<f64> {
    crate::spectra::linspace(0.0, 0.05 / kappa, samples.max(2))
}

pub fn cat_scan(
    n_avg: f64,
    phis: &[f64],
    kappa: f64,
    times: &[f64],
    tol: f64,
    exec: Execution,
) -> Result<Vec<CatDecay>> {
    par::try_map(exec, phis, |&phi| {
        simulate_cat_decoherence(&CatSpec::new(n_avg, phi)?, kappa, times, tol)
    })
}

/// `D,rate_fit,rate_pred,ratio` with 17 significant digits.
pub fn rate_table_csv(rows: &[CatDecay]) -> String {
    let mut out = String::from("D,rate_fit,rate_pred,ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            r.distance,
            r.rate_fit,
            r.rate_pred,
            r.ratio()
        );
    }
    out
}
