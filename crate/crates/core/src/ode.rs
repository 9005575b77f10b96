//! Dormand-Prince 5(4) with embedded error control.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Sub;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::operators::Amplitude;
use crate::C64;

pub trait OdeScalar: Amplitude + Sub<Output = Self> {
    fn modulus(self) -> f64;
}

impl OdeScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for C64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dp5Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the problem scale when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dp5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dp5Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0`, landing exactly on every time in
/// `stops` (ascending, all `> t0`) and calling `on_stop(index, t, y)` there.
/// `on_step` runs after every accepted step and may project the state; it
/// returns `true` when it changed `y`.
pub fn integrate<T, F, S, O>(
    mut f: F,
    t0: f64,
    y0: &[T],
    stops: &[f64],
    opts: &Dp5Options,
    mut on_step: S,
    mut on_stop: O,
) -> Result<(Vec<T>, Dp5Stats)>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]) -> Result<()>,
    S: FnMut(f64, &mut [T]) -> Result<bool>,
    O: FnMut(usize, f64, &[T]) -> Result<()>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut stats = Dp5Stats::default();
    let Some(&t_end) = stops.last() else {
        return Ok((y, stats));
    };
    let mut k: Vec<Vec<T>> = vec![vec![T::default(); n]; 7];
    let mut tmp = vec![T::default(); n];
    f(t, &y, &mut k[0])?;
    stats.evaluations += 1;

    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(&y, &k[0], opts, t_end - t0),
    };
    let mut next_stop = 0;
    while next_stop < stops.len() && stops[next_stop] <= t {
        on_stop(next_stop, t, &y)?;
        next_stop += 1;
    }
    let mut fac_max: f64 = 5.0;
    while next_stop < stops.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integrator {
                t,
                reason: format!("step budget {} exhausted", opts.max_steps),
            });
        }
        let target = stops[next_stop];
        h = h.min(opts.h_max);
        let mut landing = false;
        if t + h >= target || (target - t - h) < 1e-12 * target.abs().max(1.0) {
            h = target - t;
            landing = true;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Integrator {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += kj[i] * (h * a);
                    }
                }
                tmp[i] = acc;
            }
            f(t + C[s] * h, &tmp, &mut k[s])?;
            stats.evaluations += 1;
        }
        // tmp now holds the fifth-order solution (stage 7 input).
        let mut err_acc = 0.0;
        for i in 0..n {
            let mut e = T::default();
            for (s, ks) in k.iter().enumerate() {
                if E[s] != 0.0 {
                    e += ks[i] * (h * E[s]);
                }
            }
            let scale = opts.atol + opts.rtol * y[i].modulus().max(tmp[i].modulus());
            let r = e.modulus() / scale;
            err_acc += r * r;
        }
        let err = (err_acc / n.max(1) as f64).sqrt();
        if err <= 1.0 {
            t = if landing { target } else { t + h };
            y.copy_from_slice(&tmp);
            k.swap(0, 6);
            stats.accepted += 1;
            if on_step(t, &mut y)? {
                f(t, &y, &mut k[0])?;
                stats.evaluations += 1;
            }
            while next_stop < stops.len() && stops[next_stop] <= t {
                on_stop(next_stop, t, &y)?;
                next_stop += 1;
            }
            let fac = if err == 0.0 {
                fac_max
            } else {
                (0.9 * err.powf(-0.2)).min(fac_max)
            };
            h *= fac.max(0.2);
            fac_max = 5.0;
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.1)
            } else {
                0.1
            };
            h *= fac;
            fac_max = 1.0;
        }
    }
    Ok((y, stats))
}

fn initial_step<T: OdeScalar>(y: &[T], dy: &[T], opts: &Dp5Options, span: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (a, b) in y.iter().zip(dy) {
        let sc = opts.atol + opts.rtol * a.modulus();
        d0 += (a.modulus() / sc).powi(2);
        d1 += (b.modulus() / sc).powi(2);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * (d0 / d1).sqrt()
    };
    h.min(span.abs().max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let stops = [0.5, 1.0, 2.0];
        let mut seen = Vec::new();
        let (y, _) = integrate(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &stops,
            &Dp5Options::default(),
            |_, _| Ok(false),
            |i, t, y| {
                seen.push((i, t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-10);
        assert_eq!(seen.len(), 3);
        for (i, t, v) in seen {
            assert_eq!(t, stops[i]);
            assert!((v - (-t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_rotation() {
        let (y, _) = integrate(
            |_, y: &[C64], dy: &mut [C64]| {
                dy[0] = y[0] * C64::new(0.0, -1.0);
                Ok(())
            },
            0.0,
            &[C64::new(1.0, 0.0)],
            &[3.0],
            &Dp5Options::default(),
            |_, _| Ok(false),
            |_, _, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - C64::from_polar(1.0, -3.0)).norm() < 1e-9);
    }
}
