//! Dormand-Prince 5(4) integrator with embedded error control.
//!
//! The state is a flat slice of real or complex numbers.  Error is measured in
//! the max norm, scaled per component by `atol + rtol * max(|y|, |y_new|)`.

#![allow(clippy::needless_range_loop)]

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait OdeScalar: Copy + Default + Send + Sync + Add<Output = Self> + Mul<f64, Output = Self> {
    fn modulus(self) -> f64;
}

impl OdeScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    /// Same value for relative and absolute tolerance; suits states whose
    /// entries are bounded by one (density matrices).
    pub fn uniform(tol: f64) -> Self {
        Tolerance { rtol: tol, atol: tol }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::uniform(1e-8)
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus the embedded fourth-order ones
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub tol: Tolerance,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            tol: Tolerance::default(),
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

struct Work<T> {
    k: [Vec<T>; 7],
    tmp: Vec<T>,
    y_new: Vec<T>,
}

impl Dopri5 {
    pub fn new(tol: Tolerance) -> Self {
        Dopri5 {
            tol,
            ..Default::default()
        }
    }

    /// Integrates from `t0` through each of `times` (non-decreasing, all
    /// `>= t0`), returning the state at every requested time.  `observer`
    /// sees every accepted step and may abort the run.
    pub fn solve<T, F, O>(
        &self,
        mut rhs: F,
        t0: f64,
        y0: &[T],
        times: &[f64],
        mut observer: O,
    ) -> Result<(Vec<Vec<T>>, Stats)>
    where
        T: OdeScalar,
        F: FnMut(f64, &[T], &mut [T]),
        O: FnMut(f64, &[T]) -> Result<()>,
    {
        let n = y0.len();
        let mut work = Work {
            k: std::array::from_fn(|_| vec![T::default(); n]),
            tmp: vec![T::default(); n],
            y_new: vec![T::default(); n],
        };
        let mut stats = Stats::default();
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut out = Vec::with_capacity(times.len());

        rhs(t, &y, &mut work.k[0]);
        stats.evaluations += 1;
        let mut h = self.initial_step(&mut rhs, t, &y, &mut work, &mut stats);

        for &target in times {
            if target < t {
                return Err(crate::error::invalid(
                    "times",
                    "output times must be non-decreasing and >= t0",
                ));
            }
            while t < target {
                if stats.accepted + stats.rejected >= self.max_steps {
                    return Err(Error::TooManySteps {
                        steps: self.max_steps,
                        t,
                    });
                }
                let remaining = target - t;
                let last = h >= remaining;
                let step = if last { remaining } else { h };
                if step < 1e-14 * t.abs().max(1.0) && !last {
                    return Err(Error::StepSizeUnderflow { t, h: step });
                }
                let err = self.attempt(&mut rhs, t, &y, step, &mut work, &mut stats);
                if err <= 1.0 {
                    t = if last { target } else { t + step };
                    std::mem::swap(&mut y, &mut work.y_new);
                    // FSAL: the seventh stage is f(t + h, y_new)
                    work.k.swap(0, 6);
                    stats.accepted += 1;
                    observer(t, &y)?;
                    let grow = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // keep the pre-clamp step when the final step was shortened
                    h = (step.max(if last { h } else { 0.0 }) * grow).min(self.h_max);
                } else {
                    stats.rejected += 1;
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                    if h < 1e-14 * t.abs().max(1.0) {
                        return Err(Error::StepSizeUnderflow { t, h });
                    }
                }
            }
            out.push(y.clone());
        }
        Ok((out, stats))
    }

    /// Integrates to `t1` and returns the final state.
    pub fn integrate<T, F>(&self, rhs: F, t0: f64, y0: &[T], t1: f64) -> Result<Vec<T>>
    where
        T: OdeScalar,
        F: FnMut(f64, &[T], &mut [T]),
    {
        let (mut out, _) = self.solve(rhs, t0, y0, &[t1], |_, _| Ok(()))?;
        Ok(out.pop().expect("one output time"))
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.atol + self.tol.rtol * a.max(b)
    }

    fn initial_step<T, F>(&self, rhs: &mut F, t: f64, y: &[T], work: &mut Work<T>, stats: &mut Stats) -> f64
    where
        T: OdeScalar,
        F: FnMut(f64, &[T], &mut [T]),
    {
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for (yi, fi) in y.iter().zip(&work.k[0]) {
            let sc = self.scale(yi.modulus(), 0.0);
            d0 = d0.max(yi.modulus() / sc);
            d1 = d1.max(fi.modulus() / sc);
        }
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..y.len() {
            work.tmp[i] = y[i] + work.k[0][i] * h0;
        }
        rhs(t + h0, &work.tmp, &mut work.k[1]);
        stats.evaluations += 1;
        let mut d2: f64 = 0.0;
        for i in 0..y.len() {
            let diff = (work.k[1][i] + work.k[0][i] * -1.0).modulus();
            d2 = d2.max(diff / self.scale(y[i].modulus(), 0.0));
        }
        d2 /= h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    fn attempt<T, F>(&self, rhs: &mut F, t: f64, y: &[T], h: f64, w: &mut Work<T>, stats: &mut Stats) -> f64
    where
        T: OdeScalar,
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, [$(($j:expr, $a:expr)),*]) => {{
                for i in 0..n {
                    let mut acc = T::default();
                    $( acc = acc + w.k[$j][i] * $a; )*
                    w.tmp[i] = y[i] + acc * h;
                }
                let (head, tail) = w.k.split_at_mut($dst);
                let _ = head;
                rhs(t + $c * h, &w.tmp, &mut tail[0]);
            }};
        }
        stage!(1, C2, [(0, A21)]);
        stage!(2, C3, [(0, A31), (1, A32)]);
        stage!(3, C4, [(0, A41), (1, A42), (2, A43)]);
        stage!(4, C5, [(0, A51), (1, A52), (2, A53), (3, A54)]);
        stage!(5, 1.0, [(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        for i in 0..n {
            let acc = w.k[0][i] * A71 + w.k[2][i] * A73 + w.k[3][i] * A74 + w.k[4][i] * A75 + w.k[5][i] * A76;
            w.y_new[i] = y[i] + acc * h;
        }
        rhs(t + h, &w.y_new, &mut w.k[6]);
        stats.evaluations += 6;

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e =
                (w.k[0][i] * E1 + w.k[2][i] * E3 + w.k[3][i] * E4 + w.k[4][i] * E5 + w.k[5][i] * E6 + w.k[6][i] * E7)
                    * h;
            let sc = self.scale(y[i].modulus(), w.y_new[i].modulus());
            err = err.max(e.modulus() / sc);
        }
        if err.is_nan() {
            f64::INFINITY
        } else {
            err
        }
    }
}
