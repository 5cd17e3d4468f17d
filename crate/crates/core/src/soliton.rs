//! Travelling kinks of `u'' + ρ u' = P(u)` by shooting in the phase plane.
//!
//! A kink leaves the saddle `u₋` along its unstable direction and enters
//! `u₊` along the stable one.  Both shots are integrated with `u` as the
//! independent variable towards the midpoint, where the slopes are matched;
//! ρ is selected by bisection on the slope mismatch.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::ode::{Dopri5, Tolerance};
use crate::units::{Quantity, LENGTH, TIME, VELOCITY};

/// Polynomial with ascending coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut c = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= r * ci;
            }
            c = next;
        }
        Polynomial(c)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * u + k as f64 * c)
    }

    /// Sum of `|c_k u^k|`, the scale against which a root is judged.
    fn magnitude(&self, u: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, c)| (c * u.powi(k as i32)).abs())
            .sum()
    }

    /// `s P(s v)` for `s = ±1`.
    fn reflected(&self, s: f64) -> Self {
        Polynomial(
            self.0
                .iter()
                .enumerate()
                .map(|(k, c)| c * s.powi(k as i32 + 1))
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Friction {
    /// Bisection for ρ on `[lo, hi]`.
    Select { lo: f64, hi: f64 },
    /// ρ is given; the connection must close at it.
    Fixed(f64),
}

impl Default for Friction {
    fn default() -> Self {
        Friction::Select { lo: -5.0, hi: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinkProblem {
    pub poly: Polynomial,
    pub friction: Friction,
    /// Limit as `ξ → -∞`.
    pub u_minus: f64,
    /// Limit as `ξ → +∞`.
    pub u_plus: f64,
    /// Spacing of the exported profile.
    pub step: f64,
}

impl KinkProblem {
    pub fn new(coeffs: Vec<f64>, u_minus: f64, u_plus: f64) -> Result<Self> {
        let p = KinkProblem {
            poly: Polynomial(coeffs),
            friction: Friction::default(),
            u_minus,
            u_plus,
            step: 0.01,
        };
        p.validate()?;
        Ok(p)
    }

    /// Front between the outer roots of the monic cubic with roots
    /// `u1 < u2 < u3`, rising from `u1` to `u3`.
    pub fn cubic(u1: f64, u2: f64, u3: f64) -> Result<Self> {
        if !(u1 < u2 && u2 < u3) {
            return Err(invalid("roots", "need u1 < u2 < u3"));
        }
        Self::new(Polynomial::from_roots(&[u1, u2, u3]).0, u1, u3)
    }

    pub fn with_friction(mut self, friction: Friction) -> Result<Self> {
        self.friction = friction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.poly.0.is_empty() || self.poly.0.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coeffs", "need finite coefficients"));
        }
        if !self.u_minus.is_finite() || !self.u_plus.is_finite() || self.u_minus == self.u_plus {
            return Err(invalid("u_minus", "boundary values must be finite and distinct"));
        }
        for (name, u) in [("u_minus", self.u_minus), ("u_plus", self.u_plus)] {
            let r = self.poly.eval(u);
            if r.abs() > 1e-10 * self.poly.magnitude(u).max(1.0) {
                return Err(invalid(name, format!("P({u}) = {r:e} is not a root")));
            }
            if !(self.poly.derivative(u) > 0.0) {
                return Err(invalid(name, format!("P'({u}) must be > 0 for a saddle")));
            }
        }
        match self.friction {
            Friction::Select { lo, hi } if !(lo < hi) || !lo.is_finite() || !hi.is_finite() => {
                Err(invalid("friction", "bracket must satisfy lo < hi"))
            }
            Friction::Fixed(r) if !r.is_finite() => Err(invalid("friction", "must be finite")),
            _ if !(self.step > 0.0) => Err(invalid("step", "must be > 0")),
            _ => Ok(()),
        }
    }
}

/// Rising form of a problem: `v = s u` with `v₋ < v₊`.
struct Rising {
    poly: Polynomial,
    lo: f64,
    hi: f64,
    sign: f64,
}

impl Rising {
    fn new(p: &KinkProblem) -> Self {
        let sign = if p.u_plus > p.u_minus { 1.0 } else { -1.0 };
        Rising {
            poly: if sign > 0.0 {
                p.poly.clone()
            } else {
                p.poly.reflected(sign)
            },
            lo: sign * p.u_minus,
            hi: sign * p.u_plus,
            sign,
        }
    }

    fn jump(&self) -> f64 {
        self.hi - self.lo
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn offset(&self) -> f64 {
        1e-6 * self.jump()
    }

    /// Unstable rate at `lo` and stable rate at `hi`.
    fn rates(&self, rho: f64) -> (f64, f64) {
        let up = self.poly.derivative(self.lo);
        let down = self.poly.derivative(self.hi);
        (
            0.5 * (-rho + (rho * rho + 4.0 * up).sqrt()),
            0.5 * (-rho - (rho * rho + 4.0 * down).sqrt()),
        )
    }
}

fn shoot_tol() -> Dopri5 {
    Dopri5::new(Tolerance {
        rtol: 1e-12,
        atol: 1e-15,
    })
}

/// Slope at the midpoint and ξ-length of one shot; `None` when the orbit
/// turns back before reaching the midpoint.
#[derive(Clone, Copy, Debug)]
struct Shot {
    slope: f64,
    length: f64,
}

fn shoot(r: &Rising, rho: f64, forward: bool) -> Option<Shot> {
    let (mu_up, mu_down) = r.rates(rho);
    let d = r.offset();
    let poly = &r.poly;
    // state (w, ξ) against u; the backward shot runs in s = −u
    let (s0, s1, w0, dir) = if forward {
        (r.lo + d, r.mid(), mu_up * d, 1.0)
    } else {
        (-(r.hi - d), -r.mid(), -mu_down * d, -1.0)
    };
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let u = dir * s;
        dy[0] = dir * (poly.eval(u) / y[0] - rho);
        dy[1] = 1.0 / y[0];
    };
    let stalled = |_: f64, y: &[f64]| {
        if y[0] > 0.0 && y[0].is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState("shot turned back".into()))
        }
    };
    let (out, _) = shoot_tol().solve(rhs, s0, &[w0, 0.0], &[s1], stalled).ok()?;
    Some(Shot {
        slope: out[0][0],
        length: out[0][1],
    })
}

/// Forward minus backward slope at the midpoint.  A stalled forward shot
/// means too much friction (negative); a stalled backward shot too little.
fn mismatch(r: &Rising, rho: f64) -> (f64, Option<(Shot, Shot)>) {
    match (shoot(r, rho, true), shoot(r, rho, false)) {
        (Some(f), Some(b)) => ((f.slope - b.slope) / r.jump(), Some((f, b))),
        (None, _) => (-f64::INFINITY, None),
        (_, None) => (f64::INFINITY, None),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinkSolution {
    /// `(ξ, u, u')` on a uniform grid, `ξ = 0` at the midpoint value.
    pub samples: Vec<(f64, f64, f64)>,
    pub rho_selected: f64,
    /// ξ-distance between the 10% and 90% crossings of the jump.
    pub width: f64,
    /// Max of `|u'' + ρ u' − P(u)|` over interior samples.
    pub residual: f64,
    /// Relative slope mismatch at the midpoint.
    pub mismatch: f64,
    /// Departure rate at `u₋`.
    pub rate_minus: f64,
    /// Approach rate at `u₊` (negative).
    pub rate_plus: f64,
}

impl KinkSolution {
    /// `xi,u,uprime` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,u,uprime\n");
        for (x, u, w) in &self.samples {
            let _ = writeln!(out, "{x:.16e},{u:.16e},{w:.16e}");
        }
        out
    }
}

/// Selects ρ without building the profile.
pub fn select_friction(p: &KinkProblem) -> Result<f64> {
    p.validate()?;
    Ok(select(p, &Rising::new(p))?.0)
}

fn select(p: &KinkProblem, r: &Rising) -> Result<(f64, f64, Shot, Shot)> {
    let (rho, g, shots) = match p.friction {
        Friction::Fixed(rho) => {
            let (g, shots) = mismatch(r, rho);
            (rho, g, shots)
        }
        Friction::Select { lo, hi } => {
            let (g_lo, _) = mismatch(r, lo);
            let (g_hi, _) = mismatch(r, hi);
            if !(g_lo > 0.0 && g_hi < 0.0) {
                return Err(Error::NoConnection { lo, hi });
            }
            let (mut a, mut b) = (lo, hi);
            let mut best = (0.5 * (a + b), f64::INFINITY, None);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let (g, shots) = mismatch(r, m);
                if g.abs() < best.1.abs() || shots.is_some() && best.2.is_none() {
                    best = (m, g, shots);
                }
                if g == 0.0 || b - a < 1e-15 * (1.0 + m.abs()) {
                    break;
                }
                if g > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            best
        }
    };
    match shots {
        Some((f, b)) if g.abs() <= 1e-8 => Ok((rho, g, f, b)),
        _ => match p.friction {
            Friction::Select { lo, hi } => Err(Error::NoConnection { lo, hi }),
            Friction::Fixed(_) => Err(Error::NoConnection { lo: rho, hi: rho }),
        },
    }
}

pub fn traveling_kink(p: &KinkProblem) -> Result<KinkSolution> {
    p.validate()?;
    let r = Rising::new(p);
    let (rho, g, fwd, bwd) = select(p, &r)?;
    let (mu_up, mu_down) = r.rates(rho);
    let d = r.offset();
    let h = p.step;
    let xi_max = (40.0 / mu_up.min(-mu_down)).max(fwd.length.max(bwd.length) + 2.0 * h);
    let k_max = (xi_max / h).ceil() as i64;
    let grid: Vec<f64> = (-k_max..=k_max).map(|k| k as f64 * h).collect();

    let poly = &r.poly;
    let ode = shoot_tol();
    // left half in ξ from the unstable manifold
    let left: Vec<f64> = grid.iter().copied().filter(|&x| x >= -fwd.length && x <= 0.0).collect();
    let (left_states, _) = ode.solve(
        |_, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = poly.eval(y[0]) - rho * y[1];
        },
        -fwd.length,
        &[r.lo + d, mu_up * d],
        &left,
        |_, _| Ok(()),
    )?;
    // right half in s = −ξ from the stable manifold
    let right: Vec<f64> = grid
        .iter()
        .rev()
        .copied()
        .filter(|&x| x > 0.0 && x <= bwd.length)
        .map(|x| -x)
        .collect();
    let (right_states, _) = ode.solve(
        |_, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[1];
            dy[1] = -(poly.eval(y[0]) - rho * y[1]);
        },
        -bwd.length,
        &[r.hi - d, -mu_down * d],
        &right,
        |_, _| Ok(()),
    )?;

    let mut samples = Vec::with_capacity(grid.len());
    let mut li = 0;
    let mut ri = right_states.len();
    for &x in &grid {
        let (u, w) = if x < -fwd.length {
            let e = d * (mu_up * (x + fwd.length)).exp();
            (r.lo + e, mu_up * e)
        } else if x <= 0.0 {
            let s = &left_states[li];
            li += 1;
            (s[0], s[1])
        } else if x <= bwd.length {
            ri -= 1;
            let s = &right_states[ri];
            (s[0], s[1])
        } else {
            let e = d * (mu_down * (x - bwd.length)).exp();
            (r.hi - e, -mu_down * e)
        };
        samples.push((x, r.sign * u, r.sign * w));
    }

    // the rising form satisfies the same equation up to the sign flip
    let residual = stencil_residual(&samples, h, |u| p.poly.eval(u), rho);
    if samples.windows(2).any(|s| (s[1].1 - s[0].1) * r.sign < 0.0) {
        let bad = samples
            .windows(2)
            .find(|s| (s[1].1 - s[0].1) * r.sign < 0.0)
            .map(|s| s[0].0)
            .unwrap_or(0.0);
        return Err(Error::NonMonotoneProfile { xi: bad });
    }
    let width = transition_width(&samples, p.u_minus, p.u_plus)?;
    Ok(KinkSolution {
        samples,
        rho_selected: rho,
        width,
        residual,
        mismatch: g,
        rate_minus: mu_up,
        rate_plus: mu_down,
    })
}

/// Max of `|u'' + ρu' − P(u)|` with `u''` from a five-point stencil on `u'`.
pub fn stencil_residual(samples: &[(f64, f64, f64)], h: f64, poly: impl Fn(f64) -> f64, rho: f64) -> f64 {
    samples
        .windows(5)
        .map(|s| {
            let upp = (-s[4].2 + 8.0 * s[3].2 - 8.0 * s[1].2 + s[0].2) / (12.0 * h);
            let (_, u, w) = s[2];
            (upp + rho * w - poly(u)).abs()
        })
        .fold(0.0, f64::max)
}

/// ξ-distance between the 10% and 90% crossings, by linear interpolation.
pub fn transition_width(samples: &[(f64, f64, f64)], u_minus: f64, u_plus: f64) -> Result<f64> {
    let crossing = |frac: f64| -> Option<f64> {
        let level = u_minus + frac * (u_plus - u_minus);
        samples.windows(2).find_map(|s| {
            let (a, b) = (
                (s[0].1 - level) * (u_plus - u_minus),
                (s[1].1 - level) * (u_plus - u_minus),
            );
            (a <= 0.0 && b > 0.0).then(|| s[0].0 + (s[1].0 - s[0].0) * (-a) / (b - a))
        })
    };
    match (crossing(0.1), crossing(0.9)) {
        (Some(a), Some(b)) if b > a => Ok(b - a),
        (Some(a), _) => Err(Error::NonMonotoneProfile { xi: a }),
        _ => Err(Error::NonMonotoneProfile { xi: f64::NAN }),
    }
}

/// `|ρ| = |u₁ + u₃ − 2u₂| / √2`, signed for a front rising from `u₁`.
pub fn cubic_speed(u1: f64, u2: f64, u3: f64) -> f64 {
    (2.0 * u2 - u1 - u3) / std::f64::consts::SQRT_2
}

/// `t_F = L / v`.
pub fn transport_time(length: Quantity, speed: Quantity) -> Result<Quantity> {
    let l = length.require(LENGTH, "L")?;
    let v = speed.require(VELOCITY, "v")?;
    if !(l.value() > 0.0) || !(v.value() > 0.0) {
        return Err(invalid("L", "length and speed must be > 0"));
    }
    Ok((l / v).require(TIME, "L/v")?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn double_well() -> KinkProblem {
        KinkProblem::new(vec![0.0, -1.0, 0.0, 1.0], -1.0, 1.0).unwrap()
    }

    #[test]
    fn polynomial_helpers() {
        let p = Polynomial::from_roots(&[-1.0, 0.0, 1.0]);
        assert_eq!(p.0, vec![0.0, -1.0, 0.0, 1.0]);
        assert_eq!(p.derivative(2.0), 11.0);
        assert_eq!(p.reflected(-1.0).eval(0.5), -p.eval(-0.5));
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(KinkProblem::new(vec![0.0, -1.0, 0.0, 1.0], -1.0, 0.5).is_err());
        // (u+1)u(u-1) has P'(0) < 0: not a saddle
        assert!(KinkProblem::new(vec![0.0, -1.0, 0.0, 1.0], -1.0, 0.0).is_err());
        assert!(KinkProblem::new(vec![0.0, -1.0, 0.0, 1.0], 1.0, 1.0).is_err());
        assert!(KinkProblem::cubic(0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn symmetric_kink_is_tanh() {
        let s = traveling_kink(&double_well()).unwrap();
        assert!(s.rho_selected.abs() < 1e-8);
        let err = s
            .samples
            .iter()
            .map(|(x, u, _)| (u - (x / std::f64::consts::SQRT_2).tanh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
        assert!(s.residual < 1e-8, "residual {}", s.residual);
        let want = 2.0 * std::f64::consts::SQRT_2 * 0.8f64.atanh();
        assert!((s.width - want).abs() < 1e-4);
    }

    #[test]
    fn fixed_friction_closes_only_at_the_right_value() {
        let p = double_well().with_friction(Friction::Fixed(0.0)).unwrap();
        assert!(traveling_kink(&p).is_ok());
        let q = double_well().with_friction(Friction::Fixed(0.3)).unwrap();
        assert!(matches!(traveling_kink(&q), Err(Error::NoConnection { .. })));
    }

    #[test]
    fn asymmetric_cubic() {
        let p = KinkProblem::cubic(-1.0, 0.2, 1.0).unwrap();
        let s = traveling_kink(&p).unwrap();
        assert!((s.rho_selected.abs() - 0.2 * std::f64::consts::SQRT_2).abs() < 1e-6);
        assert!((s.rho_selected - cubic_speed(-1.0, 0.2, 1.0)).abs() < 1e-6);
        assert!(s.residual < 1e-8);
    }

    #[test]
    fn falling_front_mirrors_rising_one() {
        let up = traveling_kink(&KinkProblem::cubic(-1.0, 0.2, 1.0).unwrap()).unwrap();
        let p = KinkProblem::new(Polynomial::from_roots(&[-1.0, 0.2, 1.0]).0, 1.0, -1.0).unwrap();
        let down = traveling_kink(&p).unwrap();
        assert!((down.rho_selected + up.rho_selected).abs() < 1e-8);
        assert!((down.width - up.width).abs() < 1e-8);
        assert!(down.samples.first().unwrap().1 > 0.99 && down.samples.last().unwrap().1 < -0.99);
    }

    #[test]
    fn exponential_approach() {
        let p = KinkProblem::cubic(-1.0, 0.2, 1.0).unwrap();
        let s = traveling_kink(&p).unwrap();
        let tail = |lo: f64, hi: f64, base: f64| -> f64 {
            let pts: Vec<(f64, f64)> = s
                .samples
                .iter()
                .filter(|(_, u, _)| (u - base).abs() > lo && (u - base).abs() < hi)
                .map(|(x, u, _)| (*x, (u - base).abs().ln()))
                .collect();
            let (x, y): (Vec<_>, Vec<_>) = pts.into_iter().unzip();
            crate::fit::linear_fit(&x, &y).unwrap().slope
        };
        let left = tail(1e-5, 1e-3, -1.0);
        let right = tail(1e-5, 1e-3, 1.0);
        assert!((left / s.rate_minus - 1.0).abs() < 0.02);
        assert!((right / s.rate_plus - 1.0).abs() < 0.02);
    }

    #[test]
    fn no_connection_outside_narrow_bracket() {
        let p = KinkProblem::cubic(-1.0, 0.2, 1.0)
            .unwrap()
            .with_friction(Friction::Select { lo: 1.0, hi: 2.0 })
            .unwrap();
        assert!(matches!(traveling_kink(&p), Err(Error::NoConnection { .. })));
    }

    #[test]
    fn transport() {
        let t = transport_time(Quantity::parse("1e-6 m").unwrap(), Quantity::parse("2 m/s").unwrap()).unwrap();
        assert_eq!(t.value(), 5e-7);
        let t2 = transport_time(Quantity::parse("2e-6 m").unwrap(), Quantity::parse("2 m/s").unwrap()).unwrap();
        assert_eq!(t2.value(), 2.0 * t.value());
        let sound = transport_time(Quantity::parse("1e-6 m").unwrap(), Quantity::parse("1 km/s").unwrap()).unwrap();
        assert!((sound.value() - 1e-9).abs() < 1e-24);
        assert!(transport_time(Quantity::parse("1 s").unwrap(), Quantity::parse("2 m/s").unwrap()).is_err());
        assert!(transport_time(Quantity::parse("-1 m").unwrap(), Quantity::parse("2 m/s").unwrap()).is_err());
    }

    #[test]
    fn csv_header() {
        let s = traveling_kink(&double_well()).unwrap();
        assert!(s.to_csv().starts_with("xi,u,uprime\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn cubic_speed_law(a in -2.0f64..0.0, g1 in 0.3f64..1.5, g2 in 0.3f64..1.5) {
            let (u1, u2, u3) = (a, a + g1, a + g1 + g2);
            let rho = select_friction(&KinkProblem::cubic(u1, u2, u3).unwrap()).unwrap();
            prop_assert!((rho - cubic_speed(u1, u2, u3)).abs() < 1e-4);
        }

        #[test]
        fn root_shift_keeps_speed_and_width(c in -1.0f64..1.0) {
            let base = traveling_kink(&KinkProblem::cubic(-1.0, 0.2, 1.0).unwrap()).unwrap();
            let moved = traveling_kink(&KinkProblem::cubic(-1.0 + c, 0.2 + c, 1.0 + c).unwrap()).unwrap();
            prop_assert!((base.rho_selected - moved.rho_selected).abs() < 1e-7);
            prop_assert!((base.width - moved.width).abs() < 1e-6);
        }

        #[test]
        fn width_ignores_xi_origin(shift in -10.0f64..10.0) {
            let s = traveling_kink(&double_well()).unwrap();
            let moved: Vec<_> = s.samples.iter().map(|(x, u, w)| (x + shift, *u, *w)).collect();
            prop_assert!((transition_width(&moved, -1.0, 1.0).unwrap() - s.width).abs() < 1e-9);
        }
    }
}
