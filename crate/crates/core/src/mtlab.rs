//! Order-of-magnitude pipeline for microtubule cavity estimates.
//!
//! Every stage works on dimension-checked [`Quantity`] values.  The result
//! is a [`PipelineReport`] that pairs each derived value with its quoted
//! target and an explicit acceptance window, plus flags for places where
//! the quoted arithmetic and a direct SI evaluation disagree.

use serde_json::{json, Map, Number, Value};

use crate::error::{invalid, Result};
use crate::units::{
    Dims, Quantity, Unit, ACTION, CHARGE, DIMENSIONLESS, DIPOLE, ENERGY, EPSILON_0, E_CHARGE, FIELD, FREQUENCY, HBAR,
    LENGTH, MOMENT_OF_INERTIA, PERMITTIVITY, SPEED_OF_LIGHT, TIME, VELOCITY, VOLUME,
};

fn hbar() -> Quantity {
    Quantity::new(HBAR, ACTION)
}

fn epsilon0() -> Quantity {
    Quantity::new(EPSILON_0, PERMITTIVITY)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MtConstants {
    pub mobile_charge: Quantity,
    pub epsilon_rel: f64,
    pub pocket_distance: Quantity,
    pub dimer_spacing: Quantity,
    /// Two-level gap of the ordered water.
    pub water_gap: Quantity,
    /// Electron displacement; the water dipole is `2e·d_e`.
    pub d_e: Quantity,
    /// Sound speed along the chain.
    pub v0: Quantity,
    pub d_min: Quantity,
    pub e_kin: Quantity,
    pub omega0_dimer: Quantity,
    pub n_water: f64,
    pub length: Quantity,
    pub volume: Quantity,
    pub kink_speed: Quantity,
    /// Dimer count used downstream (couplings, collapse times).
    pub dimer_count: f64,
    pub water_inertia: Quantity,
    /// Vacuum field fed to the coupling; defaults to the quoted value.
    pub e_ow: Quantity,
    /// Replaces the superradiant lifetime as cavity damping time.
    pub t_r: Option<Quantity>,
    pub string_coupling: f64,
    pub n_min: u32,
    pub n_max: u32,
}

impl Default for MtConstants {
    fn default() -> Self {
        MtConstants {
            mobile_charge: Quantity::new(36.0 * E_CHARGE, CHARGE),
            epsilon_rel: 80.0,
            pocket_distance: Quantity::new(4e-9, LENGTH),
            dimer_spacing: Quantity::new(8e-9, LENGTH),
            water_gap: Quantity::new(4e-3 * E_CHARGE, ENERGY),
            d_e: Quantity::new(0.2e-10, LENGTH),
            v0: Quantity::new(1e3, VELOCITY),
            d_min: Quantity::new(4e-9, LENGTH),
            e_kin: Quantity::new(5e-8 * E_CHARGE, ENERGY),
            omega0_dimer: Quantity::new(1e12, FREQUENCY),
            n_water: 1e8,
            length: Quantity::new(1e-6, LENGTH),
            volume: Quantity::new(5e-22, VOLUME),
            kink_speed: Quantity::new(2.0, VELOCITY),
            dimer_count: 100.0,
            // 2πI/ħ = 10⁻¹⁴ s
            water_inertia: Quantity::new(1e-14 * HBAR / (2.0 * std::f64::consts::PI), MOMENT_OF_INERTIA),
            e_ow: Quantity::new(1e4, FIELD),
            t_r: None,
            string_coupling: 0.1,
            n_min: 1,
            n_max: 10,
        }
    }
}

/// Configurable keys with the dimensions each expects.
pub const KEYS: &[(&str, Dims)] = &[
    ("mobile_charge", CHARGE),
    ("epsilon_rel", DIMENSIONLESS),
    ("pocket_distance", LENGTH),
    ("dimer_spacing", LENGTH),
    ("water_gap", ENERGY),
    ("d_e", LENGTH),
    ("v0", VELOCITY),
    ("d_min", LENGTH),
    ("e_kin", ENERGY),
    ("omega0_dimer", FREQUENCY),
    ("n_water", DIMENSIONLESS),
    ("length", LENGTH),
    ("volume", VOLUME),
    ("kink_speed", VELOCITY),
    ("dimer_count", DIMENSIONLESS),
    ("water_inertia", MOMENT_OF_INERTIA),
    ("e_ow", FIELD),
    ("t_r", TIME),
    ("string_coupling", DIMENSIONLESS),
    ("n_min", DIMENSIONLESS),
    ("n_max", DIMENSIONLESS),
];

impl MtConstants {
    /// Sets `key` from a parsed quantity, checking its dimensions.
    pub fn set(&mut self, key: &str, q: Quantity) -> Result<()> {
        let &(name, dims) = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| invalid("key", format!("unknown constant `{key}`")))?;
        let q = q.require(dims, name)?;
        let count = |v: f64| -> Result<u32> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(invalid(
                    "n_range",
                    format!("`{key}` must be a positive integer, got {v}"),
                ))
            }
        };
        match name {
            "mobile_charge" => self.mobile_charge = q,
            "epsilon_rel" => self.epsilon_rel = q.value(),
            "pocket_distance" => self.pocket_distance = q,
            "dimer_spacing" => self.dimer_spacing = q,
            "water_gap" => self.water_gap = q,
            "d_e" => self.d_e = q,
            "v0" => self.v0 = q,
            "d_min" => self.d_min = q,
            "e_kin" => self.e_kin = q,
            "omega0_dimer" => self.omega0_dimer = q,
            "n_water" => self.n_water = q.value(),
            "length" => self.length = q,
            "volume" => self.volume = q,
            "kink_speed" => self.kink_speed = q,
            "dimer_count" => self.dimer_count = q.value(),
            "water_inertia" => self.water_inertia = q,
            "e_ow" => self.e_ow = q,
            "t_r" => self.t_r = Some(q),
            "string_coupling" => self.string_coupling = q.value(),
            "n_min" => self.n_min = count(q.value())?,
            "n_max" => self.n_max = count(q.value())?,
            _ => unreachable!("key table and setter agree"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("mobile_charge", self.mobile_charge, CHARGE),
            ("pocket_distance", self.pocket_distance, LENGTH),
            ("dimer_spacing", self.dimer_spacing, LENGTH),
            ("water_gap", self.water_gap, ENERGY),
            ("d_e", self.d_e, LENGTH),
            ("v0", self.v0, VELOCITY),
            ("d_min", self.d_min, LENGTH),
            ("e_kin", self.e_kin, ENERGY),
            ("omega0_dimer", self.omega0_dimer, FREQUENCY),
            ("length", self.length, LENGTH),
            ("volume", self.volume, VOLUME),
            ("kink_speed", self.kink_speed, VELOCITY),
            ("water_inertia", self.water_inertia, MOMENT_OF_INERTIA),
            ("e_ow", self.e_ow, FIELD),
            ("epsilon_rel", Quantity::scalar(self.epsilon_rel), DIMENSIONLESS),
            ("n_water", Quantity::scalar(self.n_water), DIMENSIONLESS),
            ("dimer_count", Quantity::scalar(self.dimer_count), DIMENSIONLESS),
            ("string_coupling", Quantity::scalar(self.string_coupling), DIMENSIONLESS),
        ];
        for (name, q, dims) in checks {
            q.require(dims, name)?;
            if !(q.value() > 0.0) || !q.value().is_finite() {
                return Err(invalid("constants", format!("`{name}` must be finite and > 0")));
            }
        }
        if let Some(t) = self.t_r {
            t.require(TIME, "t_r")?;
            if !(t.value() > 0.0) {
                return Err(invalid("t_r", "must be > 0"));
            }
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(invalid("n_range", "need 1 <= n_min <= n_max"));
        }
        Ok(())
    }

    pub fn permittivity(&self) -> Quantity {
        epsilon0() * self.epsilon_rel
    }

    /// Chain length over dimer spacing.
    pub fn dimers_in_length(&self) -> f64 {
        (self.length / self.dimer_spacing).value()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmQuantities {
    /// `(q/ε_r)·pocket distance`.
    pub d_dimer: Quantity,
    /// `ℰ/ħ`.
    pub omega_c: Quantity,
    /// `√(2πħω_c/(εV))` as quoted.
    pub e_vac_quoted: Quantity,
    /// `√(ħω_c/(2εV))`.
    pub e_vac_standard: Quantity,
}

pub fn derive_em_quantities(c: &MtConstants) -> Result<EmQuantities> {
    let d_dimer = (c.mobile_charge * (1.0 / c.epsilon_rel) * c.pocket_distance).require(DIPOLE, "d_dimer")?;
    let omega_c = (c.water_gap / hbar()).require(FREQUENCY, "omega_c")?;
    let zero_point = hbar() * omega_c / (c.permittivity() * c.volume);
    let e_vac_quoted = (zero_point * (2.0 * std::f64::consts::PI))
        .sqrt("E_vac_quoted")?
        .require(FIELD, "E_vac_quoted")?;
    let e_vac_standard = (zero_point * 0.5)
        .sqrt("E_vac_standard")?
        .require(FIELD, "E_vac_standard")?;
    Ok(EmQuantities {
        d_dimer,
        omega_c,
        e_vac_quoted,
        e_vac_standard,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Couplings {
    /// `d_dimer·E/ħ`.
    pub lambda0: Quantity,
    /// `√N·λ₀`.
    pub lambda_mt: Quantity,
    /// `|ω_c − ω₀|`.
    pub delta: Quantity,
    pub detuning_ratio: f64,
    pub hbar_lambda_mt: Quantity,
}

pub fn derive_couplings(c: &MtConstants, em: &EmQuantities, e_ow: Quantity) -> Result<Couplings> {
    let e_ow = e_ow.require(FIELD, "E_ow")?;
    let lambda0 = (em.d_dimer * e_ow / hbar()).require(FREQUENCY, "lambda0")?;
    let lambda_mt = lambda0 * c.dimer_count.sqrt();
    let delta = em.omega_c.try_sub(c.omega0_dimer, "omega_c - omega0")?.abs();
    let detuning_ratio = (delta / lambda0).require(DIMENSIONLESS, "Delta/lambda0")?.value();
    let hbar_lambda_mt = (hbar() * lambda_mt).require(ENERGY, "hbar lambda_MT")?;
    Ok(Couplings {
        lambda0,
        lambda_mt,
        delta,
        detuning_ratio,
        hbar_lambda_mt,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiouvilleTimes {
    /// `ħv₀/d_min`.
    pub m_s: Quantity,
    pub beta_recoil: f64,
    /// `1/(N β M_s/ħ)`.
    pub t_owdecoh: Quantity,
}

/// Environmental coupling `(E/M_s)²`.
pub fn beta_u(energy: Quantity, m_s: Quantity) -> Result<f64> {
    Ok((energy / m_s).require(DIMENSIONLESS, "E/M_s")?.value().powi(2))
}

/// `v_d²/(16π g_s)` with `v_d² = 2E_kin/m_defect` and
/// `m_defect = M_s / (8√2 π g_s)`.
pub fn beta_recoil(e_kin: Quantity, m_s: Quantity, g_s: f64) -> Result<f64> {
    if !(g_s > 0.0) {
        return Err(invalid("string_coupling", "must be > 0"));
    }
    let pi = std::f64::consts::PI;
    let m_defect = 1.0 / (8.0 * std::f64::consts::SQRT_2 * pi * g_s);
    let v_d2 = 2.0 * (e_kin / m_s).require(DIMENSIONLESS, "E_kin/M_s")?.value() / m_defect;
    Ok(v_d2 / (16.0 * pi * g_s))
}

pub fn derive_liouville_times(c: &MtConstants) -> Result<LiouvilleTimes> {
    let m_s = (hbar() * c.v0 / c.d_min).require(ENERGY, "M_s")?;
    let beta = beta_recoil(c.e_kin, m_s, c.string_coupling)?;
    let rate = m_s / hbar() * (c.dimer_count * beta);
    let t_owdecoh = (Quantity::scalar(1.0) / rate).require(TIME, "t_owdecoh")?;
    Ok(LiouvilleTimes {
        m_s,
        beta_recoil: beta,
        t_owdecoh,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CavityTimes {
    /// Quoted lifetime expression, closed to seconds with a 1 F/m factor.
    pub t_superrad: Quantity,
    /// The same expression with `4πε₀` supplying the missing SI factor.
    pub t_superrad_si: Quantity,
    pub t_r: Quantity,
    pub q_mt: f64,
    pub t_f: Quantity,
    /// `(n, T_r/(nN), t_collapse ≥ t_F)`.
    pub per_n: Vec<(u32, Quantity, bool)>,
    /// `(n, t_F·nN)`.
    pub t_r_min: Vec<(u32, Quantity)>,
    /// `2πI/ħ`.
    pub water_time: Quantity,
}

pub fn derive_cavity_times_and_verdict(c: &MtConstants, em: &EmQuantities) -> Result<CavityTimes> {
    let water_dipole = Quantity::new(2.0 * E_CHARGE, CHARGE) * c.d_e;
    let numer = Quantity::new(SPEED_OF_LIGHT, VELOCITY) * hbar().powi(2) * c.volume;
    let denom = water_dipole.powi(2) * c.water_gap * (4.0 * std::f64::consts::PI * c.n_water) * c.length;
    let raw = numer / denom;
    let t_superrad = (raw * Quantity::new(1.0, PERMITTIVITY)).require(TIME, "t_superrad")?;
    let t_superrad_si = (raw * epsilon0() * (4.0 * std::f64::consts::PI)).require(TIME, "t_superrad_si")?;
    let t_r = c.t_r.unwrap_or(t_superrad);
    let q_mt = (em.omega_c * t_r).require(DIMENSIONLESS, "Q_MT")?.value();
    let t_f = (c.length / c.kink_speed).require(TIME, "t_F")?;
    let per_n = (c.n_min..=c.n_max)
        .map(|n| {
            let t = t_r * (1.0 / (n as f64 * c.dimer_count));
            (n, t, t.value() >= t_f.value() * (1.0 - 1e-12))
        })
        .collect();
    let t_r_min = (c.n_min..=c.n_max)
        .map(|n| (n, t_f * (n as f64 * c.dimer_count)))
        .collect();
    let water_time = (c.water_inertia * (2.0 * std::f64::consts::PI) / hbar()).require(TIME, "water_time")?;
    Ok(CavityTimes {
        t_superrad,
        t_superrad_si,
        t_r,
        q_mt,
        t_f,
        per_n,
        t_r_min,
        water_time,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    /// `|ratio − 1| ≤ rel`.
    Relative(f64),
    /// `1/f ≤ ratio ≤ f`.
    Factor(f64),
    /// `lo ≤ ratio ≤ hi`.
    Ratio(f64, f64),
}

impl Window {
    pub fn contains(&self, ratio: f64) -> bool {
        match *self {
            Window::Relative(r) => (ratio - 1.0).abs() <= r,
            Window::Factor(f) => ratio >= 1.0 / f && ratio <= f,
            Window::Ratio(lo, hi) => ratio >= lo && ratio <= hi,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Window::Relative(r) => format!("relative {r:e}"),
            Window::Factor(f) => format!("factor {f}"),
            Window::Ratio(lo, hi) => format!("ratio [{lo}, {hi}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: &'static str,
    pub value: f64,
    pub unit: &'static str,
    pub quoted_value: f64,
    pub ratio: f64,
    pub window: Window,
    pub pass: bool,
}

/// Span of a derived family compared with a quoted interval; passes when
/// they overlap.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeCheck {
    pub name: &'static str,
    pub unit: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub target: (f64, f64),
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Flag {
    pub id: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub entries: Vec<Entry>,
    pub ranges: Vec<RangeCheck>,
    pub t_r: f64,
    pub t_f: f64,
    /// `(n, feasible)`.
    pub verdict: Vec<(u32, bool)>,
    pub flags: Vec<Flag>,
}

impl PipelineReport {
    pub fn entry(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn range(&self, name: &str) -> Option<&RangeCheck> {
        self.ranges.iter().find(|r| r.name == name)
    }

    pub fn has_flag(&self, id: &str) -> bool {
        self.flags.iter().any(|f| f.id == id)
    }

    /// Largest photon number for which transfer beats collapse.
    pub fn feasible_n_max(&self) -> Option<u32> {
        self.verdict.iter().filter(|(_, ok)| *ok).map(|(n, _)| *n).max()
    }

    /// Every window passes and the vacuum-field discrepancy is flagged
    /// whenever it is present.
    pub fn gates_pass(&self) -> bool {
        let windows = self.entries.iter().all(|e| e.pass) && self.ranges.iter().all(|r| r.pass);
        let vac_flag = match self.entry("E_vac_quoted") {
            Some(e) => !vac_mismatch(e.ratio) || self.has_flag("e_vac_mismatch"),
            None => false,
        };
        windows && vac_flag
    }

    pub fn to_json_value(&self) -> Value {
        let mut quantities = Map::new();
        for e in &self.entries {
            quantities.insert(
                e.name.to_string(),
                json!({
                    "value": num(e.value),
                    "unit": e.unit,
                    "quoted_value": num(e.quoted_value),
                    "ratio": num(e.ratio),
                    "window": e.window.describe(),
                    "pass": e.pass,
                }),
            );
        }
        let mut ranges = Map::new();
        for r in &self.ranges {
            ranges.insert(
                r.name.to_string(),
                json!({
                    "lo": num(r.lo),
                    "hi": num(r.hi),
                    "unit": r.unit,
                    "target": [num(r.target.0), num(r.target.1)],
                    "pass": r.pass,
                }),
            );
        }
        let mut flags = Map::new();
        for f in &self.flags {
            flags.insert(f.id.to_string(), Value::String(f.message.clone()));
        }
        let per_n: Vec<Value> = self
            .verdict
            .iter()
            .map(|(n, ok)| json!({"n": n, "feasible": ok}))
            .collect();
        json!({
            "quantities": quantities,
            "ranges": ranges,
            "verdict": {
                "T_r": num(self.t_r),
                "t_F": num(self.t_f),
                "per_n": per_n,
                "feasible_n_max": self.feasible_n_max(),
            },
            "flags": flags,
            "pass": self.gates_pass(),
        })
    }

    /// Pretty JSON with sorted keys and 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("report serialises");
        s.push('\n');
        s
    }
}

/// JSON number with 17 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    format!("{x:.16e}")
        .parse::<Number>()
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn vac_mismatch(ratio: f64) -> bool {
    !Window::Factor(3.0).contains(ratio)
}

fn entry(name: &'static str, q: Quantity, unit: &'static str, quoted_value: f64, window: Window) -> Result<Entry> {
    let value = q.in_unit(&Unit::named(unit), name)?;
    let ratio = value / quoted_value;
    Ok(Entry {
        name,
        value,
        unit,
        quoted_value,
        ratio,
        window,
        pass: window.contains(ratio),
    })
}

fn span(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

fn overlap(name: &'static str, unit: &'static str, (lo, hi): (f64, f64), target: (f64, f64)) -> RangeCheck {
    RangeCheck {
        name,
        unit,
        lo,
        hi,
        target,
        pass: lo <= target.1 && hi >= target.0,
    }
}

pub fn run_pipeline(c: &MtConstants) -> Result<PipelineReport> {
    c.validate()?;
    let em = derive_em_quantities(c)?;
    let cp = derive_couplings(c, &em, c.e_ow)?;
    let lv = derive_liouville_times(c)?;
    let cav = derive_cavity_times_and_verdict(c, &em)?;

    let entries = vec![
        entry("d_dimer", em.d_dimer, "C*m", 2.88e-28, Window::Relative(1e-12))?,
        entry("omega_c", em.omega_c, "1/s", 6e12, Window::Relative(0.05))?,
        entry("E_vac_quoted", em.e_vac_quoted, "V/m", 1e4, Window::Factor(30.0))?,
        entry("E_vac_standard", em.e_vac_standard, "V/m", 1e4, Window::Factor(30.0))?,
        entry(
            "dimers_in_length",
            Quantity::scalar(c.dimers_in_length()),
            "1",
            1e2,
            Window::Factor(2.0),
        )?,
        entry("lambda0", cp.lambda0, "1/s", 2.7e10, Window::Factor(2.0))?,
        entry("lambda_MT", cp.lambda_mt, "1/s", 3e11, Window::Factor(2.0))?,
        entry("hbar_lambda_MT", cp.hbar_lambda_mt, "meV", 0.1, Window::Factor(2.0))?,
        entry(
            "Delta_over_lambda0",
            Quantity::scalar(cp.detuning_ratio),
            "1",
            1e2,
            Window::Ratio(0.1, 10.0),
        )?,
        entry("M_s", lv.m_s, "eV", 1.5e-4, Window::Relative(0.15))?,
        entry("t_owdecoh", lv.t_owdecoh, "s", 1e-10, Window::Factor(3.0))?,
        entry("t_superrad", cav.t_superrad, "s", 1e-4, Window::Factor(3.0))?,
        entry("Q_MT", Quantity::scalar(cav.q_mt), "1", 1e8, Window::Factor(10.0))?,
        entry("t_F", cav.t_f, "s", 5e-7, Window::Relative(1e-12))?,
        entry("water_time", cav.water_time, "s", 1e-14, Window::Factor(3.0))?,
    ];
    let ranges = vec![
        overlap(
            "t_collapse",
            "s",
            span(cav.per_n.iter().map(|(_, t, _)| t.value())),
            (1e-7, 1e-6),
        ),
        overlap(
            "T_r_min",
            "s",
            span(cav.t_r_min.iter().map(|(_, t)| t.value())),
            (1e-5, 1e-4),
        ),
    ];

    let mut flags = Vec::new();
    let vac_ratio = entries[2].ratio;
    if vac_mismatch(vac_ratio) {
        flags.push(Flag {
            id: "e_vac_mismatch",
            message: format!(
                "vacuum field from the quoted formula is {:.4e} V/m, {vac_ratio:.3}x the quoted 1e4 V/m (standard SI form: {:.4e} V/m); downstream couplings use E_ow = {:.4e} V/m",
                em.e_vac_quoted.value(),
                em.e_vac_standard.value(),
                c.e_ow.value()
            ),
        });
    }
    flags.push(Flag {
        id: "t_superrad_units",
        message: format!(
            "lifetime expression is not a time in SI; closed with a 1 F/m factor to give {:.4e} s, while the 4*pi*eps0 form gives {:.4e} s; the energy symbol is read as the water gap",
            cav.t_superrad.value(),
            cav.t_superrad_si.value()
        ),
    });
    let standard_inertia = 1.9e-47;
    let standard_time = 2.0 * std::f64::consts::PI * standard_inertia / HBAR;
    if !Window::Factor(10.0).contains(cav.water_time.value() / standard_time) {
        flags.push(Flag {
            id: "water_inertia",
            message: format!(
                "moment of inertia {:.4e} kg m^2 gives {:.4e} s; a molecular value near {standard_inertia:e} kg m^2 gives {standard_time:.4e} s",
                c.water_inertia.value(),
                cav.water_time.value()
            ),
        });
    }
    if (c.dimers_in_length() - c.dimer_count).abs() > 1e-9 * c.dimer_count {
        flags.push(Flag {
            id: "dimer_count",
            message: format!(
                "chain holds {:.4} dimers at the given spacing; downstream formulas use N = {}",
                c.dimers_in_length(),
                c.dimer_count
            ),
        });
    }
    if c.t_r.is_some() {
        flags.push(Flag {
            id: "t_r_override",
            message: format!(
                "cavity damping time set to {:.4e} s instead of the superradiant lifetime",
                cav.t_r.value()
            ),
        });
    }

    Ok(PipelineReport {
        entries,
        ranges,
        t_r: cav.t_r.value(),
        t_f: cav.t_f.value(),
        verdict: cav.per_n.iter().map(|(n, _, ok)| (*n, *ok)).collect(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report() -> PipelineReport {
        run_pipeline(&MtConstants::default()).unwrap()
    }

    #[test]
    fn electromagnetic_stage() {
        let em = derive_em_quantities(&MtConstants::default()).unwrap();
        assert!((em.d_dimer.value() / 2.88e-28 - 1.0).abs() < 1e-12);
        assert!((em.omega_c.value() - 6.4e-22 / HBAR).abs() < 1.0);
        assert!((em.e_vac_quoted.value() / 1.0656e5 - 1.0).abs() < 1e-3);
        assert!((em.e_vac_standard.value() / 3.006e4 - 1.0).abs() < 1e-3);
        let ratio = em.e_vac_quoted.value() / em.e_vac_standard.value();
        assert!((ratio - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn couplings_and_detuning() {
        let c = MtConstants::default();
        let em = derive_em_quantities(&c).unwrap();
        let cp = derive_couplings(&c, &em, c.e_ow).unwrap();
        assert!((cp.lambda0.value() / 2.731e10 - 1.0).abs() < 1e-3);
        assert!((cp.lambda_mt.value() / cp.lambda0.value() - 10.0).abs() < 1e-12);
        assert!((cp.hbar_lambda_mt.value() / (1e-3 * E_CHARGE) - 0.18).abs() < 0.005);
        assert!((cp.detuning_ratio - 185.6).abs() < 0.5);
        assert!(derive_couplings(&c, &em, Quantity::new(1.0, TIME)).is_err());
    }

    #[test]
    fn recoil_is_coupling_independent() {
        let c = MtConstants::default();
        let m_s = derive_liouville_times(&c).unwrap().m_s;
        let b = [0.01, 0.1, 1.0].map(|g| beta_recoil(c.e_kin, m_s, g).unwrap());
        assert!(b.iter().all(|x| (x / b[1] - 1.0).abs() < 1e-12));
        let ratio = (c.e_kin / m_s).value();
        assert!((b[1] - std::f64::consts::SQRT_2 * ratio).abs() < 1e-15);
        assert!((beta_u(m_s * 0.5, m_s).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn liouville_stage() {
        let lv = derive_liouville_times(&MtConstants::default()).unwrap();
        assert!((lv.m_s.value() / E_CHARGE / 1.6477e-4 - 1.0).abs() < 1e-3);
        assert!((lv.t_owdecoh.value() / 9.3e-11 - 1.0).abs() < 0.01);
    }

    #[test]
    fn cavity_stage() {
        let c = MtConstants::default();
        let em = derive_em_quantities(&c).unwrap();
        let cav = derive_cavity_times_and_verdict(&c, &em).unwrap();
        assert!((cav.t_superrad.value() / 5.06e-5 - 1.0).abs() < 2e-3);
        assert!((cav.t_superrad_si.value() / 5.63e-15 - 1.0).abs() < 2e-3);
        assert!((cav.q_mt / 3.07e8 - 1.0).abs() < 0.01);
        assert_eq!(cav.t_f.value(), 5e-7);
        assert!((cav.water_time.value() - 1e-14).abs() < 1e-28);
        assert_eq!(cav.per_n.len(), 10);
    }

    #[test]
    fn default_report_passes_and_flags() {
        let r = report();
        for e in &r.entries {
            assert!(e.pass, "{e:?}");
        }
        assert!(r.ranges.iter().all(|g| g.pass));
        assert!(r.has_flag("e_vac_mismatch"));
        assert!(r.has_flag("t_superrad_units"));
        assert!(r.has_flag("water_inertia"));
        assert!(r.has_flag("dimer_count"));
        assert!(r.gates_pass());
        assert_eq!(r.feasible_n_max(), Some(1));
    }

    #[test]
    fn override_damping_time() {
        let mut c = MtConstants::default();
        c.set("t_r", Quantity::parse("1e-4 s").unwrap()).unwrap();
        let r = run_pipeline(&c).unwrap();
        assert_eq!(r.feasible_n_max(), Some(2));
        let tmin = r.range("T_r_min").unwrap();
        assert!((tmin.lo - 5e-5).abs() < 1e-18 && (tmin.hi - 5e-4).abs() < 1e-17);
        let tc = r.range("t_collapse").unwrap();
        assert!((tc.lo - 1e-7).abs() < 1e-20 && (tc.hi - 1e-6).abs() < 1e-19);
        assert!(r.has_flag("t_r_override"));
    }

    #[test]
    fn missing_flag_fails_gate() {
        let mut r = report();
        r.flags.retain(|f| f.id != "e_vac_mismatch");
        assert!(!r.gates_pass());
    }

    #[test]
    fn setter_checks_dimensions() {
        let mut c = MtConstants::default();
        assert!(c.set("volume", Quantity::parse("5e-22 m").unwrap()).is_err());
        assert!(c.set("nope", Quantity::scalar(1.0)).is_err());
        assert!(c.set("n_max", Quantity::scalar(2.5)).is_err());
        c.set("epsilon_rel", Quantity::scalar(40.0)).unwrap();
        assert_eq!(c.epsilon_rel, 40.0);
        c.n_min = 5;
        c.n_max = 2;
        assert!(run_pipeline(&c).is_err());
    }

    #[test]
    fn json_is_deterministic_and_precise() {
        let a = report().to_json();
        assert_eq!(a, report().to_json());
        let v: Value = serde_json::from_str(&a).unwrap();
        let d = &v["quantities"]["d_dimer"];
        assert_eq!(d["unit"], "C*m");
        assert!(d["value"].to_string().contains("e-28"));
        assert_eq!(d["value"].to_string().split('e').next().unwrap().len(), 18);
        assert!(v["flags"]["e_vac_mismatch"].is_string());
        assert_eq!(num(f64::NAN), Value::Null);
    }

    #[test]
    fn reported_dimensions() {
        let c = MtConstants::default();
        let em = derive_em_quantities(&c).unwrap();
        assert_eq!(em.e_vac_quoted.dims(), FIELD);
        assert_eq!(em.d_dimer.dims(), DIPOLE);
        let cav = derive_cavity_times_and_verdict(&c, &em).unwrap();
        assert_eq!(cav.t_superrad.dims(), TIME);
        assert!(cav.per_n.iter().all(|(_, t, _)| t.dims() == TIME));
    }

    proptest! {
        #[test]
        fn collapse_and_bound_monotone(n_dimers in 10.0f64..1000.0, factor in 1.01f64..4.0) {
            let mut c = MtConstants { dimer_count: n_dimers, ..MtConstants::default() };
            let em = derive_em_quantities(&c).unwrap();
            let a = derive_cavity_times_and_verdict(&c, &em).unwrap();
            for w in a.per_n.windows(2) {
                prop_assert!(w[1].1.value() < w[0].1.value());
            }
            for w in a.t_r_min.windows(2) {
                prop_assert!(w[1].1.value() > w[0].1.value());
            }
            c.dimer_count *= factor;
            let b = derive_cavity_times_and_verdict(&c, &em).unwrap();
            prop_assert!(b.per_n[0].1.value() < a.per_n[0].1.value());
            prop_assert!(b.t_r_min[0].1.value() > a.t_r_min[0].1.value());
        }
    }
}
