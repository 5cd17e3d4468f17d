//! Scenario commands.  Each returns the primary output document plus a flat
//! record of headline numbers that `sweep` turns into one row.

use std::fmt::Write as _;

use mtqed::decoherence::{cat_scan, default_times, rate_table_csv};
use mtqed::dynamics::{
    build_tc_hamiltonian, lindblad_trajectory, phase_damping_evolve, product_state, secular_evolve, CavityOperators,
    EnergyBasis, LindbladSpec, PhaseDampingMode, PhaseDampingSpec, SecularSpec, TavisCummingsParams,
};
use mtqed::fit::power_law;
use mtqed::mtlab::{run_pipeline, MtConstants, KEYS as MT_KEYS};
use mtqed::par::Execution;
use mtqed::qspace::{DensityMatrix, FockSpace, C64};
use mtqed::soliton::{traveling_kink, Friction, KinkProblem, Polynomial};
use mtqed::spectra::{
    analytic_spectrum, doublet, find_peaks, linspace, numeric_spectrum, rabi_peaks, NumericSpectrumParams,
    SusceptibilityParams,
};

use crate::config::Config;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Evolve,
    Cat,
    Soliton,
    Estimate,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Spectrum,
        Command::Evolve,
        Command::Cat,
        Command::Soliton,
        Command::Estimate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Cat => "cat",
            Command::Soliton => "soliton",
            Command::Estimate => "estimate",
        }
    }

    pub fn from_name(s: &str) -> Result<Self, CliError> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            CliError::Config(format!(
                "`command` must be one of spectrum|evolve|cat|soliton|estimate, got `{s}`"
            ))
        })
    }

    pub fn keys(self) -> Vec<&'static str> {
        match self {
            Command::Spectrum => vec![
                "mode",
                "omega0",
                "omega",
                "lambda",
                "N",
                "gamma",
                "gamma_plus",
                "gamma_minus",
                "emitter_gamma",
                "probe",
                "cutoff",
                "omega_min",
                "omega_max",
                "points",
            ],
            Command::Evolve => vec![
                "model",
                "omega0",
                "omega",
                "lambda",
                "N",
                "n_max",
                "kappa",
                "emitter_gamma",
                "gamma",
                "initial",
                "photons",
                "t_max",
                "samples",
                "tol",
                "levels",
                "alpha",
                "pd_mode",
            ],
            Command::Cat => vec!["n_avg", "kappa", "d_min", "d_max", "points", "samples", "t_max", "tol"],
            Command::Soliton => vec![
                "coeffs", "roots", "u_minus", "u_plus", "rho_f", "rho_lo", "rho_hi", "step",
            ],
            Command::Estimate => MT_KEYS.iter().map(|(k, _)| *k).collect(),
        }
    }

    pub fn run(self, cfg: &Config, exec: Execution) -> Result<Outcome, CliError> {
        cfg.restrict(self.name(), &self.keys())?;
        match self {
            Command::Spectrum => spectrum(cfg, exec),
            Command::Evolve => evolve(cfg),
            Command::Cat => cat(cfg, exec),
            Command::Soliton => soliton(cfg),
            Command::Estimate => estimate(cfg),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub body: String,
    pub summary: String,
    pub record: Vec<(&'static str, f64)>,
    /// False when an acceptance gate failed.
    pub gates_pass: bool,
}

fn spectrum(cfg: &Config, exec: Execution) -> Result<Outcome, CliError> {
    let mode = cfg.choice("mode", "analytic", &["analytic", "numeric"])?;
    let omega0 = cfg.real("omega0", 1.0)?;
    let omega = cfg.real("omega", omega0)?;
    let lambda = cfg.real("lambda", 0.1)?;
    let n = cfg.count("N", 1)?;
    let gamma = cfg.real("gamma", 0.01)?;
    let delta = omega0 - omega;
    let peaks = rabi_peaks(omega0, delta, lambda, n);
    let half = 0.5 * (peaks.upper - peaks.lower) + 10.0 * gamma;
    let centre = 0.5 * (peaks.upper + peaks.lower);
    let lo = cfg.real("omega_min", centre - half)?;
    let hi = cfg.real("omega_max", centre + half)?;
    let points = cfg.count("points", 801)?;
    if points < 3 || !(hi > lo) {
        return Err(CliError::Config(
            "`points` must be >= 3 and omega_max > omega_min".into(),
        ));
    }
    let grid = linspace(lo, hi, points);
    let series = if mode == "analytic" {
        let p = SusceptibilityParams {
            omega0,
            omega,
            lambda,
            emitters: n,
            gamma_plus: cfg.real("gamma_plus", gamma)?,
            gamma_minus: cfg.real("gamma_minus", gamma)?,
        };
        analytic_spectrum(&p, &grid, exec)?
    } else {
        let tc = TavisCummingsParams {
            omega0,
            omega,
            lambda,
            emitters: n,
            n_max: 2,
        };
        let mut p = NumericSpectrumParams::new(tc, gamma);
        p.emitter_gamma = cfg.real("emitter_gamma", gamma)?;
        p.probe = cfg.real("probe", p.probe)?;
        p.excitation_cutoff = cfg.count("cutoff", 2)?;
        numeric_spectrum(&p, &grid, exec)?
    };
    let found = find_peaks(&series)?;
    let (lower, upper) = if found.len() >= 2 {
        let (a, b) = doublet(&found)?;
        (a.omega, b.omega)
    } else {
        (found[0].omega, found[0].omega)
    };
    Ok(Outcome {
        body: series.to_csv(),
        summary: format!(
            "spectrum ({mode}): {} points, peaks at {lower:.6e} and {upper:.6e}, splitting {:.6e} (exact {:.6e})",
            series.len(),
            upper - lower,
            peaks.splitting()
        ),
        record: vec![
            ("N", n as f64),
            ("lambda", lambda),
            ("delta", delta),
            ("lower", lower),
            ("upper", upper),
            ("splitting", upper - lower),
            ("splitting_exact", peaks.splitting()),
        ],
        gates_pass: true,
    })
}

fn evolve(cfg: &Config) -> Result<Outcome, CliError> {
    let model = cfg.choice("model", "lindblad", &["lindblad", "secular", "phase_damping"])?;
    let t_max = cfg.real("t_max", 10.0)?;
    let samples = cfg.count("samples", 101)?.max(2);
    let tol = cfg.real("tol", 1e-8)?;
    let times = linspace(0.0, t_max, samples);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(samples);

    let header: &[&'static str] = if model == "phase_damping" {
        let levels = cfg.count("levels", 6)?;
        if levels < 2 {
            return Err(CliError::Config("`levels` must be >= 2".into()));
        }
        let field = FockSpace::new(levels - 1)?;
        let alpha = cfg.real("alpha", 1.0)?;
        let rho0 = DensityMatrix::pure(field, &field.coherent(C64::new(alpha, 0.0)))?;
        let spec = PhaseDampingSpec::new(cfg.real("omega", 0.0)?, cfg.real("kappa", 0.3)?)?;
        let mode = match cfg.choice("pd_mode", "numeric", &["numeric", "analytic"])? {
            "numeric" => PhaseDampingMode::numeric(tol),
            _ => PhaseDampingMode::Analytic,
        };
        for &t in &times {
            let rho = phase_damping_evolve(&spec, &rho0, t, mode)?;
            let h = rho.hygiene();
            check_hygiene(t, &h)?;
            let m = rho.matrix();
            rows.push(vec![
                t,
                m[(0, 1)].norm(),
                m[(0, levels - 1)].norm(),
                rho.trace().re,
                rho.purity(),
                h.min_eigenvalue,
            ]);
        }
        &[
            "t",
            "coherence_01",
            "coherence_0top",
            "trace",
            "purity",
            "min_eigenvalue",
        ]
    } else {
        let omega0 = cfg.real("omega0", 1.0)?;
        let tc = TavisCummingsParams {
            omega0,
            omega: cfg.real("omega", omega0)?,
            lambda: cfg.real("lambda", 0.1)?,
            emitters: cfg.count("N", 1)?,
            n_max: cfg.count("n_max", 4)?,
        };
        let h = build_tc_hamiltonian(&tc)?;
        let space = tc.space()?;
        let ops = CavityOperators::new(space)?;
        let start = match cfg.choice("initial", "excited", &["excited", "photons"])? {
            "excited" => product_state(space, tc.emitters, &space.field.number_state(0)),
            _ => {
                let n = cfg.count("photons", 1)?;
                if n > tc.n_max {
                    return Err(CliError::Config(format!(
                        "`photons` = {n} exceeds n_max = {}",
                        tc.n_max
                    )));
                }
                product_state(space, 0, &space.field.number_state(n))
            }
        };
        let rho0 = DensityMatrix::pure(space, &start)?;
        let states: Vec<DensityMatrix> = if model == "lindblad" {
            let spec = LindbladSpec::new(h, cfg.real("kappa", 0.01)?)?
                .with_emitter_damping(cfg.real("emitter_gamma", 0.0)?)?;
            lindblad_trajectory(&spec, &rho0, &times, tol)?
        } else {
            let basis = EnergyBasis::new(&h);
            let spec = SecularSpec::uniform(basis.energies.clone(), cfg.real("gamma", 0.01)?)?;
            let eig0 = DensityMatrix::new(space, basis.to_eigenbasis(rho0.matrix()))?;
            times
                .iter()
                .map(|&t| {
                    let r = secular_evolve(&spec, &eig0, t)?;
                    DensityMatrix::new(space, basis.from_eigenbasis(r.matrix()))
                })
                .collect::<mtqed::Result<_>>()?
        };
        for (t, rho) in times.iter().zip(&states) {
            let h = rho.hygiene();
            check_hygiene(*t, &h)?;
            rows.push(vec![
                *t,
                rho.expectation(&ops.number).re,
                rho.expectation(&ops.sz).re,
                rho.expectation(&ops.excitation).re,
                rho.trace().re,
                rho.purity(),
                h.min_eigenvalue,
            ]);
        }
        &["t", "photons", "sz", "excitation", "trace", "purity", "min_eigenvalue"]
    };

    let body = csv(header, &rows);
    let last = rows.last().expect("at least two samples");
    Ok(Outcome {
        body,
        summary: format!(
            "evolve ({model}): {} samples to t = {t_max:.6e}, final {} = {:.6e}",
            rows.len(),
            header[1],
            last[1]
        ),
        record: header.iter().copied().zip(last.iter().copied()).collect(),
        gates_pass: true,
    })
}

fn check_hygiene(t: f64, h: &mtqed::qspace::Hygiene) -> Result<(), CliError> {
    if h.holds() {
        Ok(())
    } else {
        Err(CliError::Solver(mtqed::Error::InvalidState(format!(
            "state hygiene lost at t = {t:.6e}: {h:?}"
        ))))
    }
}

fn cat(cfg: &Config, exec: Execution) -> Result<Outcome, CliError> {
    let n_avg = cfg.real("n_avg", 6.0)?;
    let kappa = cfg.real("kappa", 1.0)?;
    let d_min = cfg.real("d_min", 0.5)?;
    let d_max = cfg.real("d_max", 4.0)?;
    let points = cfg.count("points", 6)?;
    let samples = cfg.count("samples", 11)?;
    let tol = cfg.real("tol", 1e-9)?;
    if !(kappa > 0.0) {
        return Err(CliError::Config("`kappa` must be > 0".into()));
    }
    let reach = 2.0 * n_avg.sqrt();
    if !(d_min > 0.0 && d_max > d_min && d_max <= reach) || points < 2 {
        return Err(CliError::Config(format!(
            "need 0 < d_min < d_max <= 2 sqrt(n_avg) = {reach:.6} and points >= 2"
        )));
    }
    let times = match cfg.opt_real("t_max")? {
        Some(t) => linspace(0.0, t, samples.max(2)),
        None => default_times(kappa, samples),
    };
    // geometric grid in D
    let phis: Vec<f64> = (0..points)
        .map(|k| {
            let d = d_min * (d_max / d_min).powf(k as f64 / (points - 1) as f64);
            (d / reach).min(1.0).asin()
        })
        .collect();
    let rows = cat_scan(n_avg, &phis, kappa, &times, tol, exec)?;
    let ds: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let rates: Vec<f64> = rows.iter().map(|r| r.rate_fit).collect();
    let fit = power_law(&ds, &rates)?;
    let (ci_lo, ci_hi) = fit.slope_ci95();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio()).collect();
    let (r_lo, r_hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(Outcome {
        body: rate_table_csv(&rows),
        summary: format!(
            "cat: {} distances, rate ~ D^{:.4} (95% CI [{ci_lo:.4}, {ci_hi:.4}]), rate ratios in [{r_lo:.4}, {r_hi:.4}]",
            rows.len(),
            fit.slope
        ),
        record: vec![
            ("exponent", fit.slope),
            ("ci95_lo", ci_lo),
            ("ci95_hi", ci_hi),
            ("ratio_min", r_lo),
            ("ratio_max", r_hi),
        ],
        gates_pass: true,
    })
}

fn soliton(cfg: &Config) -> Result<Outcome, CliError> {
    let (coeffs, outer) = match cfg.list("roots")? {
        Some(mut roots) => {
            if cfg.get("coeffs").is_some() {
                return Err(CliError::Config("give either `roots` or `coeffs`, not both".into()));
            }
            roots.sort_by(f64::total_cmp);
            let outer = (roots[0], roots[roots.len() - 1]);
            (Polynomial::from_roots(&roots).0, outer)
        }
        None => (
            cfg.list("coeffs")?.unwrap_or_else(|| vec![0.0, -1.0, 0.0, 1.0]),
            (-1.0, 1.0),
        ),
    };
    let mut problem = KinkProblem::new(coeffs, cfg.real("u_minus", outer.0)?, cfg.real("u_plus", outer.1)?)?;
    problem.step = cfg.real("step", 0.01)?;
    let friction = match cfg.opt_real("rho_f")? {
        Some(r) => Friction::Fixed(r),
        None => Friction::Select {
            lo: cfg.real("rho_lo", -5.0)?,
            hi: cfg.real("rho_hi", 5.0)?,
        },
    };
    let problem = problem.with_friction(friction)?;
    let s = traveling_kink(&problem)?;
    Ok(Outcome {
        body: s.to_csv(),
        summary: format!(
            "soliton: rho_f = {:.10e}, width = {:.6e}, residual = {:.3e}, {} samples",
            s.rho_selected,
            s.width,
            s.residual,
            s.samples.len()
        ),
        record: vec![
            ("rho_selected", s.rho_selected),
            ("width", s.width),
            ("residual", s.residual),
            ("mismatch", s.mismatch),
        ],
        gates_pass: s.residual < 1e-8,
    })
}

fn estimate(cfg: &Config) -> Result<Outcome, CliError> {
    let mut c = MtConstants::default();
    for &(key, dims) in MT_KEYS {
        if let Some(q) = cfg.quantity(key, dims)? {
            c.set(key, q)?;
        }
    }
    let report = run_pipeline(&c)?;
    let failing: Vec<&str> = report
        .entries
        .iter()
        .filter(|e| !e.pass)
        .map(|e| e.name)
        .chain(report.ranges.iter().filter(|r| !r.pass).map(|r| r.name))
        .collect();
    let pass = report.gates_pass();
    let value = |name: &str| report.entry(name).map_or(f64::NAN, |e| e.value);
    Ok(Outcome {
        body: report.to_json(),
        summary: format!(
            "estimate: {} quantities, {} ranges, {} flags, gates {}{}",
            report.entries.len(),
            report.ranges.len(),
            report.flags.len(),
            if pass { "pass" } else { "FAIL" },
            if failing.is_empty() {
                String::new()
            } else {
                format!(" (failing: {})", failing.join(", "))
            }
        ),
        record: vec![
            ("pass", if pass { 1.0 } else { 0.0 }),
            ("feasible_n_max", report.feasible_n_max().map_or(0.0, f64::from)),
            ("T_r", report.t_r),
            ("lambda_MT", value("lambda_MT")),
            ("t_superrad", value("t_superrad")),
            ("E_vac_quoted", value("E_vac_quoted")),
            ("Q_MT", value("Q_MT")),
        ],
        gates_pass: pass,
    })
}

/// Comma-separated table with 17-significant-digit fields.
pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}
