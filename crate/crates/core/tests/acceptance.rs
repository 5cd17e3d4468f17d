//! End-to-end acceptance criteria, one line of output each.
//!
//! Runs without the libtest harness so the verdict lines are always printed.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::process::ExitCode;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{rngs::StdRng, Rng, SeedableRng};

use mtqed::decoherence::{cat_scan, collapse_time, default_times, simulate_cat_decoherence, CatSpec};
use mtqed::dynamics::{
    build_tc_hamiltonian, lindblad_trajectory, phase_damping_evolve, product_state, secular_evolve, CavityOperators,
    EnergyBasis, LindbladSpec, PhaseDampingMode, PhaseDampingSpec, SecularSpec, TavisCummingsParams,
};
use mtqed::fit::power_law;
use mtqed::mtlab::{run_pipeline, MtConstants};
use mtqed::par::Execution;
use mtqed::qspace::{DensityMatrix, FockSpace, C64};
use mtqed::soliton::{cubic_speed, select_friction, transport_time, traveling_kink, KinkProblem};
use mtqed::spectra::{
    analytic_spectrum, doublet, find_peaks, linspace, numeric_spectrum, rabi_peaks, NumericSpectrumParams,
    SusceptibilityParams,
};
use mtqed::units::Quantity;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn tc(lambda: f64, n: usize, n_max: usize) -> TavisCummingsParams {
    TavisCummingsParams {
        omega0: 1.0,
        omega: 1.0,
        lambda,
        emitters: n,
        n_max,
    }
}

fn resonant_splitting() -> Outcome {
    let lambda = 0.1;
    let mut worst: f64 = 0.0;
    for n in [1, 2, 4, 9, 16] {
        let p = tc(lambda, n, 1);
        let h = build_tc_hamiltonian(&p).map_err(err)?;
        let ops = CavityOperators::new(p.space().map_err(err)?).map_err(err)?;
        let c1 = 1.0 - n as f64 / 2.0;
        let one: Vec<usize> = (0..h.dim())
            .filter(|&i| (ops.excitation.matrix()[(i, i)].re - c1).abs() < 1e-9)
            .collect();
        let block = DMatrix::from_fn(one.len(), one.len(), |i, j| h.matrix()[(one[i], one[j])]);
        let e = SymmetricEigen::new(block).eigenvalues;
        let split = e.max() - e.min();
        let want = 2.0 * lambda * (n as f64).sqrt();
        worst = worst.max((split / want - 1.0).abs());
        worst = worst.max((rabi_peaks(1.0, 0.0, lambda, n).splitting() / want - 1.0).abs());
    }
    ensure(
        worst <= 1e-12,
        format!("max relative deviation {worst:.2e} (limit 1e-12)"),
    )
}

fn numeric_sqrt_law() -> Outcome {
    let (lambda, kappa) = (0.1, 0.01);
    let ns = [1usize, 2, 4, 9, 16];
    let mut splits = Vec::new();
    for &n in &ns {
        let p = NumericSpectrumParams::new(tc(lambda, n, 2), kappa);
        let half = lambda * (n as f64).sqrt() + 10.0 * kappa;
        let grid = linspace(1.0 - half, 1.0 + half, 2001);
        let s = numeric_spectrum(&p, &grid, Execution::default()).map_err(err)?;
        let (a, b) = doublet(&find_peaks(&s).map_err(err)?).map_err(err)?;
        splits.push(b.omega - a.omega);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = power_law(&x, &splits).map_err(err)?;
    ensure(
        (fit.slope - 0.5).abs() <= 0.01,
        format!("exponent {:.5} (target 0.50 +/- 0.01)", fit.slope),
    )
}

fn analytic_doublet() -> Outcome {
    // (Δ, λ, N, Γ)
    let cases = [
        (0.0, 1.0, 1, 0.1),
        (0.0, 0.5, 4, 0.05),
        (1.0, 0.5, 1, 0.05),
        (-2.0, 0.3, 9, 0.1),
        (3.0, 0.2, 16, 0.02),
    ];
    let mut worst: f64 = 0.0;
    for (delta, lambda, n, gamma) in cases {
        let omega0 = 10.0;
        let p = SusceptibilityParams {
            omega0,
            omega: omega0 - delta,
            lambda,
            emitters: n,
            gamma_plus: gamma,
            gamma_minus: gamma,
        };
        let r = rabi_peaks(omega0, delta, lambda, n);
        let (lo, hi) = (r.lower - 10.0 * gamma, r.upper + 10.0 * gamma);
        let points = ((hi - lo) / (gamma / 50.0)).ceil() as usize + 1;
        let s = analytic_spectrum(&p, &linspace(lo, hi, points), Execution::default()).map_err(err)?;
        let (a, b) = doublet(&find_peaks(&s).map_err(err)?).map_err(err)?;
        worst = worst
            .max((a.omega - r.lower).abs() / gamma)
            .max((b.omega - r.upper).abs() / gamma);
    }
    ensure(
        worst <= 0.1,
        format!("max peak offset {worst:.2e} Gamma over 5 cases (limit 0.1)"),
    )
}

fn brune_anchor() -> Outcome {
    let r = rabi_peaks(2.0 * PI * 51.1e9, 0.0, 2.0 * PI * 24e3, 1);
    let khz = r.splitting() / (2.0 * PI) / 1e3;
    let t = collapse_time(1.0, 8.33f64.sqrt()).map_err(err)?;
    ensure(
        (khz - 48.0).abs() <= 1e-12 * 48.0 && (t / 0.24 - 1.0).abs() <= 0.01,
        format!("splitting {khz:.12} kHz, collapse {t:.5} T_r at D^2 = 8.33"),
    )
}

fn phase_damping() -> Outcome {
    let field = FockSpace::new(5).map_err(err)?;
    let rho0 = DensityMatrix::pure(field, &field.coherent(C64::new(1.2, 0.4))).map_err(err)?;
    let spec = PhaseDampingSpec::new(1.0, 0.3).map_err(err)?;
    let a = phase_damping_evolve(&spec, &rho0, 2.0, PhaseDampingMode::Analytic).map_err(err)?;
    let n = phase_damping_evolve(&spec, &rho0, 2.0, PhaseDampingMode::numeric(1e-11)).map_err(err)?;
    let diff = (a.matrix() - n.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    ensure(
        diff <= 1e-8,
        format!("max entry error {diff:.2e} on 6 levels (limit 1e-8)"),
    )
}

fn cat_scaling() -> Outcome {
    let (n, kappa) = (6.0, 1.0);
    let reach = 2.0 * f64::sqrt(n);
    let ds: Vec<f64> = (0..6).map(|k| 0.5 * 8f64.powf(k as f64 / 5.0)).collect();
    let phis: Vec<f64> = ds.iter().map(|d| (d / reach).asin()).collect();
    let times = default_times(kappa, 11);
    let rows = cat_scan(n, &phis, kappa, &times, 1e-9, Execution::default()).map_err(err)?;
    let d: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let rates: Vec<f64> = rows.iter().map(|r| r.rate_fit).collect();
    let fit = power_law(&d, &rates).map_err(err)?;
    let single =
        simulate_cat_decoherence(&CatSpec::new(n, FRAC_PI_4).map_err(err)?, kappa, &times, 1e-9).map_err(err)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio()).chain([single.ratio()]).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    ensure(
        (fit.slope - 2.0).abs() <= 0.1 && lo >= 0.8 && hi <= 1.25,
        format!("exponent {:.4}, ratios in [{lo:.4}, {hi:.4}]", fit.slope),
    )
}

fn kink_oracle() -> Outcome {
    let s = traveling_kink(&KinkProblem::new(vec![0.0, -1.0, 0.0, 1.0], -1.0, 1.0).map_err(err)?).map_err(err)?;
    let tanh_err = s
        .samples
        .iter()
        .map(|(x, u, _)| (u - (x / SQRT_2).tanh()).abs())
        .fold(0.0, f64::max);
    let mut rng = StdRng::seed_from_u64(20);
    let mut law_err: f64 = 0.0;
    for _ in 0..20 {
        let u1 = rng.random_range(-2.0..0.0);
        let u2 = u1 + rng.random_range(0.2..1.5);
        let u3 = u2 + rng.random_range(0.2..1.5);
        let rho = select_friction(&KinkProblem::cubic(u1, u2, u3).map_err(err)?).map_err(err)?;
        law_err = law_err.max((rho.abs() - cubic_speed(u1, u2, u3).abs()).abs());
    }
    let t = transport_time(
        Quantity::parse("1e-6 m").map_err(err)?,
        Quantity::parse("2 m/s").map_err(err)?,
    )
    .map_err(err)?;
    ensure(
        tanh_err <= 1e-6 && law_err <= 1e-4 && t.value() == 5e-7,
        format!(
            "tanh error {tanh_err:.2e}, speed law error {law_err:.2e} over 20 triples, t_F = {:e} s",
            t.value()
        ),
    )
}

fn pipeline_windows() -> Outcome {
    let r = run_pipeline(&MtConstants::default()).map_err(err)?;
    let names = [
        "d_dimer",
        "omega_c",
        "M_s",
        "lambda_MT",
        "t_owdecoh",
        "t_superrad",
        "Q_MT",
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for name in names {
        let e = r.entry(name).ok_or_else(|| format!("missing {name}"))?;
        ok &= e.pass;
        detail.push(format!("{name}={:.3e}{}", e.value, if e.pass { "" } else { "(!)" }));
    }
    for name in ["t_collapse", "T_r_min"] {
        let g = r.range(name).ok_or_else(|| format!("missing {name}"))?;
        ok &= g.pass;
        detail.push(format!(
            "{name}=[{:.2e},{:.2e}]{}",
            g.lo,
            g.hi,
            if g.pass { "" } else { "(!)" }
        ));
    }
    ensure(ok, detail.join(" "))
}

fn vacuum_field_gate() -> Outcome {
    let r = run_pipeline(&MtConstants::default()).map_err(err)?;
    let e = r.entry("E_vac_quoted").ok_or("missing E_vac_quoted")?;
    let flagged = r.has_flag("e_vac_mismatch");
    ensure(
        e.pass && flagged && r.gates_pass(),
        format!(
            "E_vac = {:.4e} V/m, ratio {:.2} (window x30), mismatch flag {}",
            e.value,
            e.ratio,
            if flagged { "present" } else { "ABSENT" }
        ),
    )
}

fn state_hygiene() -> Outcome {
    let tol = 1e-8;
    let p = TavisCummingsParams {
        omega0: 1.0,
        omega: 0.9,
        lambda: 0.2,
        emitters: 2,
        n_max: 4,
    };
    let space = p.space().map_err(err)?;
    let ops = CavityOperators::new(space).map_err(err)?;
    let h = build_tc_hamiltonian(&p).map_err(err)?;
    let rho0 = DensityMatrix::pure(space, &product_state(space, 2, &space.field.number_state(1))).map_err(err)?;
    let times = linspace(0.0, 20.0, 41);
    let mut checked = 0;
    let mut worst_c: f64 = 0.0;
    let c0 = rho0.expectation(&ops.excitation).re;

    let damped = LindbladSpec::new(h.clone(), 0.05)
        .map_err(err)?
        .with_emitter_damping(0.02)
        .map_err(err)?;
    for rho in lindblad_trajectory(&damped, &rho0, &times, tol).map_err(err)? {
        if !rho.hygiene().holds() {
            return Err(format!("damped run lost hygiene: {:?}", rho.hygiene()));
        }
        checked += 1;
    }
    let closed = LindbladSpec::new(h.clone(), 0.0).map_err(err)?;
    for rho in lindblad_trajectory(&closed, &rho0, &times, tol).map_err(err)? {
        if !rho.hygiene().holds() {
            return Err(format!("closed run lost hygiene: {:?}", rho.hygiene()));
        }
        worst_c = worst_c.max((rho.expectation(&ops.excitation).re - c0).abs());
        checked += 1;
    }
    let basis = EnergyBasis::new(&h);
    let secular = SecularSpec::uniform(basis.energies.clone(), 0.1).map_err(err)?;
    let eig0 = DensityMatrix::new(space, basis.to_eigenbasis(rho0.matrix())).map_err(err)?;
    for &t in &times {
        let rho = secular_evolve(&secular, &eig0, t).map_err(err)?;
        if !rho.hygiene().holds() {
            return Err(format!("secular run lost hygiene at t = {t}"));
        }
        checked += 1;
    }
    let field = FockSpace::new(5).map_err(err)?;
    let pd0 = DensityMatrix::pure(field, &field.coherent(C64::new(1.0, 0.0))).map_err(err)?;
    let pd = PhaseDampingSpec::new(1.0, 0.3).map_err(err)?;
    for &t in &times {
        let rho = phase_damping_evolve(&pd, &pd0, t, PhaseDampingMode::numeric(tol)).map_err(err)?;
        if !rho.hygiene().holds() {
            return Err(format!("phase-damping run lost hygiene at t = {t}"));
        }
        checked += 1;
    }
    ensure(
        worst_c <= 10.0 * tol,
        format!(
            "{checked} states clean, closed-system drift in tr(C rho) {worst_c:.2e} (limit {:.0e})",
            10.0 * tol
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("resonant Rabi splitting", resonant_splitting),
        ("sqrt(N) law from weak-probe spectra", numeric_sqrt_law),
        ("analytic doublet maxima", analytic_doublet),
        ("Brune anchor", brune_anchor),
        ("phase damping", phase_damping),
        ("cat decoherence scaling", cat_scaling),
        ("kink oracle", kink_oracle),
        ("pipeline windows", pipeline_windows),
        ("vacuum-field discrepancy gate", vacuum_field_gate),
        ("state hygiene", state_hygiene),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("[PASS] {:>2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {d}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
