//! SI quantities with a runtime dimension vector over (m, kg, s, A).
//!
//! Multiplication and division combine exponents; addition, subtraction and
//! comparison demand equal dimensions and fail with the offending expression.

use std::fmt;
use std::ops::{Div, Mul};

use serde::Serialize;
use thiserror::Error;

/// Rounded elementary charge carried by the microtubule estimate.  The `e`,
/// `eV` and `meV` units are defined through it.
pub const E_CHARGE: f64 = 1.6e-19;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("dimension mismatch in `{expr}`: expected [{expected}], found [{found}]")]
    Mismatch { expr: String, expected: Dims, found: Dims },

    #[error("square root of odd dimension [{dims}] in `{expr}`")]
    OddRoot { expr: String, dims: Dims },

    #[error("unknown unit `{0}`")]
    UnknownUnit(String),

    #[error("cannot parse quantity `{0}`")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Dims {
    pub m: i8,
    pub kg: i8,
    pub s: i8,
    pub a: i8,
}

impl Dims {
    pub const fn new(m: i8, kg: i8, s: i8, a: i8) -> Self {
        Dims { m, kg, s, a }
    }

    pub const fn mul(self, o: Dims) -> Dims {
        Dims::new(self.m + o.m, self.kg + o.kg, self.s + o.s, self.a + o.a)
    }

    pub const fn inv(self) -> Dims {
        Dims::new(-self.m, -self.kg, -self.s, -self.a)
    }

    pub const fn powi(self, k: i8) -> Dims {
        Dims::new(self.m * k, self.kg * k, self.s * k, self.a * k)
    }

    pub fn is_dimensionless(self) -> bool {
        self == DIMENSIONLESS
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = [("m", self.m), ("kg", self.kg), ("s", self.s), ("A", self.a)]
            .iter()
            .filter(|(_, e)| *e != 0)
            .map(|(sym, e)| if *e == 1 { sym.to_string() } else { format!("{sym}^{e}") })
            .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join(" "))
        }
    }
}

pub const DIMENSIONLESS: Dims = Dims::new(0, 0, 0, 0);
pub const LENGTH: Dims = Dims::new(1, 0, 0, 0);
pub const MASS: Dims = Dims::new(0, 1, 0, 0);
pub const TIME: Dims = Dims::new(0, 0, 1, 0);
pub const CURRENT: Dims = Dims::new(0, 0, 0, 1);
pub const FREQUENCY: Dims = Dims::new(0, 0, -1, 0);
pub const VELOCITY: Dims = Dims::new(1, 0, -1, 0);
pub const VOLUME: Dims = Dims::new(3, 0, 0, 0);
pub const ENERGY: Dims = Dims::new(2, 1, -2, 0);
pub const ACTION: Dims = Dims::new(2, 1, -1, 0);
pub const CHARGE: Dims = Dims::new(0, 0, 1, 1);
pub const DIPOLE: Dims = Dims::new(1, 0, 1, 1);
pub const VOLTAGE: Dims = Dims::new(2, 1, -3, -1);
pub const FIELD: Dims = Dims::new(1, 1, -3, -1);
pub const PERMITTIVITY: Dims = Dims::new(-3, -1, 4, 2);
pub const MOMENT_OF_INERTIA: Dims = Dims::new(2, 1, 0, 0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantity {
    value: f64,
    dims: Dims,
}

impl Quantity {
    pub const fn new(value: f64, dims: Dims) -> Self {
        Quantity { value, dims }
    }

    pub const fn scalar(value: f64) -> Self {
        Quantity {
            value,
            dims: DIMENSIONLESS,
        }
    }

    /// SI value.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Asserts the dimensions, naming `expr` on failure.
    pub fn require(self, dims: Dims, expr: &str) -> Result<Self, UnitError> {
        if self.dims != dims {
            return Err(UnitError::Mismatch {
                expr: expr.to_string(),
                expected: dims,
                found: self.dims,
            });
        }
        Ok(self)
    }

    pub fn try_add(self, other: Quantity, expr: &str) -> Result<Self, UnitError> {
        other.require(self.dims, expr)?;
        Ok(Quantity::new(self.value + other.value, self.dims))
    }

    pub fn try_sub(self, other: Quantity, expr: &str) -> Result<Self, UnitError> {
        other.require(self.dims, expr)?;
        Ok(Quantity::new(self.value - other.value, self.dims))
    }

    pub fn try_cmp(self, other: Quantity, expr: &str) -> Result<std::cmp::Ordering, UnitError> {
        other.require(self.dims, expr)?;
        Ok(self.value.total_cmp(&other.value))
    }

    pub fn abs(self) -> Self {
        Quantity::new(self.value.abs(), self.dims)
    }

    pub fn powi(self, k: i8) -> Self {
        Quantity::new(self.value.powi(k as i32), self.dims.powi(k))
    }

    pub fn sqrt(self, expr: &str) -> Result<Self, UnitError> {
        let d = self.dims;
        if d.m % 2 != 0 || d.kg % 2 != 0 || d.s % 2 != 0 || d.a % 2 != 0 {
            return Err(UnitError::OddRoot {
                expr: expr.to_string(),
                dims: d,
            });
        }
        Ok(Quantity::new(
            self.value.sqrt(),
            Dims::new(d.m / 2, d.kg / 2, d.s / 2, d.a / 2),
        ))
    }

    /// Numeric value expressed in `unit`.
    pub fn in_unit(self, unit: &Unit, expr: &str) -> Result<f64, UnitError> {
        self.require(unit.dims, expr)?;
        Ok(self.value / unit.scale)
    }

    /// Parses `"<number> <unit>"`, e.g. `"1e-4 s"` or `"4 meV"`.  A bare
    /// number is dimensionless.
    pub fn parse(text: &str) -> Result<Self, UnitError> {
        let text = text.trim();
        let (num, unit) = match text.find(char::is_whitespace) {
            Some(pos) => (&text[..pos], text[pos..].trim()),
            None => (text, ""),
        };
        let value: f64 = num.parse().map_err(|_| UnitError::Malformed(text.to_string()))?;
        if unit.is_empty() {
            return Ok(Quantity::scalar(value));
        }
        let u = Unit::parse(unit)?;
        Ok(Quantity::new(value * u.scale, u.dims))
    }
}

impl Mul for Quantity {
    type Output = Quantity;
    fn mul(self, o: Quantity) -> Quantity {
        Quantity::new(self.value * o.value, self.dims.mul(o.dims))
    }
}

impl Div for Quantity {
    type Output = Quantity;
    fn div(self, o: Quantity) -> Quantity {
        Quantity::new(self.value / o.value, self.dims.mul(o.dims.inv()))
    }
}

impl Mul<f64> for Quantity {
    type Output = Quantity;
    fn mul(self, k: f64) -> Quantity {
        Quantity::new(self.value * k, self.dims)
    }
}

impl Div<f64> for Quantity {
    type Output = Quantity;
    fn div(self, k: f64) -> Quantity {
        Quantity::new(self.value / k, self.dims)
    }
}

impl Mul<Quantity> for f64 {
    type Output = Quantity;
    fn mul(self, q: Quantity) -> Quantity {
        q * self
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dims.is_dimensionless() {
            write!(f, "{:e}", self.value)
        } else {
            write!(f, "{:e} {}", self.value, self.dims)
        }
    }
}

/// A named scale for display and parsing.
#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub name: String,
    pub scale: f64,
    pub dims: Dims,
}

fn symbol(sym: &str) -> Option<(f64, Dims)> {
    let joule_per_ev = E_CHARGE;
    Some(match sym {
        "1" => (1.0, DIMENSIONLESS),
        "m" => (1.0, LENGTH),
        "km" => (1e3, LENGTH),
        "cm" => (1e-2, LENGTH),
        "mm" => (1e-3, LENGTH),
        "um" => (1e-6, LENGTH),
        "nm" => (1e-9, LENGTH),
        "Angstrom" => (1e-10, LENGTH),
        "kg" => (1.0, MASS),
        "g" => (1e-3, MASS),
        "s" => (1.0, TIME),
        "ms" => (1e-3, TIME),
        "us" => (1e-6, TIME),
        "ns" => (1e-9, TIME),
        "ps" => (1e-12, TIME),
        "fs" => (1e-15, TIME),
        "Hz" => (1.0, FREQUENCY),
        "kHz" => (1e3, FREQUENCY),
        "A" => (1.0, CURRENT),
        "C" => (1.0, CHARGE),
        "e" => (E_CHARGE, CHARGE),
        "V" => (1.0, VOLTAGE),
        "J" => (1.0, ENERGY),
        "eV" => (joule_per_ev, ENERGY),
        "meV" => (joule_per_ev * 1e-3, ENERGY),
        "F" => (1.0, Dims::new(-2, -1, 4, 2)),
        _ => return None,
    })
}

impl Unit {
    /// Parses products and quotients of symbols with integer powers:
    /// `m/s`, `kg*m^2`, `s^-1`, `V/m`, `1/s`.
    pub fn parse(text: &str) -> Result<Unit, UnitError> {
        let mut scale = 1.0;
        let mut dims = DIMENSIONLESS;
        let mut sign = 1i8;
        let mut token = String::new();
        let flush = |token: &mut String, sign: i8, scale: &mut f64, dims: &mut Dims| -> Result<(), UnitError> {
            if token.is_empty() {
                return Err(UnitError::UnknownUnit(text.to_string()));
            }
            let (sym, pow) = match token.split_once('^') {
                Some((s, p)) => (
                    s,
                    p.parse::<i8>().map_err(|_| UnitError::UnknownUnit(text.to_string()))?,
                ),
                None => (token.as_str(), 1),
            };
            let (sc, d) = symbol(sym).ok_or_else(|| UnitError::UnknownUnit(sym.to_string()))?;
            let p = pow * sign;
            *scale *= sc.powi(p as i32);
            *dims = dims.mul(d.powi(p));
            token.clear();
            Ok(())
        };
        for ch in text.chars() {
            match ch {
                '*' | '/' => {
                    flush(&mut token, sign, &mut scale, &mut dims)?;
                    sign = if ch == '/' { -1 } else { 1 };
                }
                c if c.is_whitespace() => {}
                c => token.push(c),
            }
        }
        flush(&mut token, sign, &mut scale, &mut dims)?;
        Ok(Unit {
            name: text.to_string(),
            scale,
            dims,
        })
    }

    pub fn named(name: &str) -> Unit {
        Unit::parse(name).expect("built-in unit")
    }
}
