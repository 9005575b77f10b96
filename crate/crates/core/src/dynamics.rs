//! Schedules and Schrödinger propagation.
//!
//! A [`Drive`] turns up to two [`Schedule`]s into the instantaneous
//! coefficients `(a, b)` of `a H_d + b H_p (+ H_b)`. Piecewise-constant
//! drives are propagated exactly segment by segment in the segment's
//! eigenbasis; anything smooth goes through the adaptive integrator.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::ode::{self, Dp5Options};
use crate::operators::{Eigensystem, HamiltonianSpec};
use crate::statmech::diagonal_entropy;
use crate::C64;

/// Which coefficient a schedule drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Driver coefficient `A(t)`.
    A,
    /// Problem coefficient `B(t)`.
    B,
    /// Problem coefficient in `H_d + Gamma(t) H_p`.
    Gamma,
    /// Driver coefficient in `H_p + H_b + G(t) H_d`.
    G,
}

impl Channel {
    pub fn on_driver(self) -> bool {
        matches!(self, Channel::A | Channel::G)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// `(t_k, v_k)`: value `v_k` on `(t_{k-1}, t_k]`, with `t_0 = 0` and
    /// `v_1` also at `t = 0`.
    PiecewiseConstant {
        breakpoints: Vec<(f64, f64)>,
    },
    Linear {
        start: f64,
        end: f64,
    },
    /// `amplitude * exp(-|(t - centre) / width|^exponent)`.
    SquareGaussian {
        amplitude: f64,
        centre: f64,
        width: f64,
        exponent: f64,
    },
    /// Piecewise-linear interpolation through `(t, v)` points.
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub channel: Channel,
    pub kind: ScheduleKind,
    pub t_final: f64,
}

fn check_times(ts: impl Iterator<Item = f64>, first_positive: bool) -> Result<()> {
    let mut prev = if first_positive {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    for t in ts {
        if !t.is_finite() || t <= prev {
            return Err(invalid(
                "schedule times must be finite and strictly increasing",
            ));
        }
        prev = t;
    }
    Ok(())
}

impl Schedule {
    pub fn piecewise_constant(channel: Channel, breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(invalid(
                "piecewise-constant schedule needs at least one stage",
            ));
        }
        check_times(breakpoints.iter().map(|b| b.0), true)?;
        let t_final = breakpoints[breakpoints.len() - 1].0;
        Ok(Self {
            channel,
            kind: ScheduleKind::PiecewiseConstant { breakpoints },
            t_final,
        })
    }

    /// Equal-length stages with the given values.
    pub fn staircase(channel: Channel, values: &[f64], stage_length: f64) -> Result<Self> {
        Self::piecewise_constant(
            channel,
            values
                .iter()
                .enumerate()
                .map(|(k, &v)| ((k + 1) as f64 * stage_length, v))
                .collect(),
        )
    }

    pub fn linear(channel: Channel, start: f64, end: f64, t_final: f64) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(invalid("schedule duration must be positive"));
        }
        Ok(Self {
            channel,
            kind: ScheduleKind::Linear { start, end },
            t_final,
        })
    }

    pub fn constant(channel: Channel, value: f64, t_final: f64) -> Result<Self> {
        Self::linear(channel, value, value, t_final)
    }

    pub fn square_gaussian(
        channel: Channel,
        amplitude: f64,
        centre: f64,
        width: f64,
        exponent: f64,
        t_final: f64,
    ) -> Result<Self> {
        if !(t_final > 0.0) || !(width > 0.0) || !(exponent > 0.0) {
            return Err(invalid(
                "square-Gaussian needs positive duration, width and exponent",
            ));
        }
        Ok(Self {
            channel,
            kind: ScheduleKind::SquareGaussian {
                amplitude,
                centre,
                width,
                exponent,
            },
            t_final,
        })
    }

    /// Cyclic drive with the declared defaults: centre `t_f / 2`, width
    /// `t_f / 5`, exponent 4.
    pub fn cyclic_pulse(channel: Channel, amplitude: f64, t_final: f64) -> Result<Self> {
        Self::square_gaussian(
            channel,
            amplitude,
            t_final / 2.0,
            t_final / 5.0,
            4.0,
            t_final,
        )
    }

    pub fn tabulated(channel: Channel, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 || points[0].0 != 0.0 {
            return Err(invalid(
                "tabulated schedule needs at least two points starting at t = 0",
            ));
        }
        check_times(points.iter().map(|p| p.0), false)?;
        let t_final = points[points.len() - 1].0;
        Ok(Self {
            channel,
            kind: ScheduleKind::Tabulated { points },
            t_final,
        })
    }

    fn pc_index(breakpoints: &[(f64, f64)], t: f64, right: bool) -> usize {
        let k = breakpoints
            .iter()
            .position(|&(tk, _)| if right { t < tk } else { t <= tk });
        k.unwrap_or(breakpoints.len() - 1)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t, false)
    }

    /// Limit from the right; differs from [`value`](Self::value) only at jumps.
    pub fn value_right(&self, t: f64) -> f64 {
        self.eval(t, true)
    }

    fn eval(&self, t: f64, right: bool) -> f64 {
        match &self.kind {
            ScheduleKind::PiecewiseConstant { breakpoints } => {
                breakpoints[Self::pc_index(breakpoints, t, right)].1
            }
            ScheduleKind::Linear { start, end } => {
                let s = (t / self.t_final).clamp(0.0, 1.0);
                start + (end - start) * s
            }
            ScheduleKind::SquareGaussian {
                amplitude,
                centre,
                width,
                exponent,
            } => {
                let u = ((t - centre) / width).abs();
                amplitude * (-u.powf(*exponent)).exp()
            }
            ScheduleKind::Tabulated { points } => {
                let t = t.clamp(0.0, self.t_final);
                let k = points
                    .iter()
                    .position(|p| p.0 >= t)
                    .unwrap_or(points.len() - 1)
                    .max(1);
                let ((t0, v0), (t1, v1)) = (points[k - 1], points[k]);
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Time derivative (right derivative at kinks, zero at jumps).
    pub fn derivative(&self, t: f64) -> f64 {
        self.slope(t, false)
    }

    /// Left derivative; differs from [`derivative`](Self::derivative) only
    /// at kinks.
    pub fn derivative_left(&self, t: f64) -> f64 {
        self.slope(t, true)
    }

    fn slope(&self, t: f64, left: bool) -> f64 {
        match &self.kind {
            ScheduleKind::PiecewiseConstant { .. } => 0.0,
            ScheduleKind::Linear { start, end } => {
                if (0.0..=self.t_final).contains(&t) {
                    (end - start) / self.t_final
                } else {
                    0.0
                }
            }
            ScheduleKind::SquareGaussian {
                amplitude,
                centre,
                width,
                exponent,
            } => {
                let x = (t - centre) / width;
                let u = x.abs();
                if u == 0.0 {
                    return 0.0;
                }
                let g = amplitude * (-u.powf(*exponent)).exp();
                -g * exponent * u.powf(exponent - 1.0) * x.signum() / width
            }
            ScheduleKind::Tabulated { points } => {
                if t < 0.0 || t > self.t_final {
                    return 0.0;
                }
                let k = points
                    .iter()
                    .position(|p| if left { p.0 >= t } else { p.0 > t })
                    .unwrap_or(points.len() - 1)
                    .max(1);
                let ((t0, v0), (t1, v1)) = (points[k - 1], points[k]);
                (v1 - v0) / (t1 - t0)
            }
        }
    }

    /// Interior times where the value jumps.
    pub fn jumps(&self) -> Vec<f64> {
        match &self.kind {
            ScheduleKind::PiecewiseConstant { breakpoints } => breakpoints
                .windows(2)
                .filter(|w| w[0].1 != w[1].1)
                .map(|w| w[0].0)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Interior times where the value or its derivative is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ScheduleKind::Tabulated { points } => {
                points[1..points.len() - 1].iter().map(|p| p.0).collect()
            }
            _ => self.jumps(),
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        match &self.kind {
            ScheduleKind::PiecewiseConstant { .. } => true,
            ScheduleKind::Linear { start, end } => start == end,
            _ => false,
        }
    }

    /// Checked on the breakpoints plus a 1000-point uniform grid.
    pub fn is_monotone_nondecreasing(&self) -> bool {
        let mut ts: Vec<f64> = (0..=1000)
            .map(|i| self.t_final * i as f64 / 1000.0)
            .collect();
        for b in self.breakpoints() {
            ts.push(b);
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let mut prev = f64::NEG_INFINITY;
        for t in ts {
            for v in [self.value(t), self.value_right(t)] {
                if v < prev {
                    return false;
                }
                prev = v;
            }
        }
        true
    }

    pub fn require_monotone(self) -> Result<Self> {
        if self.is_monotone_nondecreasing() {
            Ok(self)
        } else {
            Err(invalid(
                "schedule is flagged monotone but decreases somewhere",
            ))
        }
    }

    /// The same shape on a time axis stretched by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        let kind = match &self.kind {
            ScheduleKind::PiecewiseConstant { breakpoints } => ScheduleKind::PiecewiseConstant {
                breakpoints: breakpoints.iter().map(|&(t, v)| (t * factor, v)).collect(),
            },
            ScheduleKind::Tabulated { points } => ScheduleKind::Tabulated {
                points: points.iter().map(|&(t, v)| (t * factor, v)).collect(),
            },
            ScheduleKind::SquareGaussian {
                amplitude,
                centre,
                width,
                exponent,
            } => ScheduleKind::SquareGaussian {
                amplitude: *amplitude,
                centre: centre * factor,
                width: width * factor,
                exponent: *exponent,
            },
            k @ ScheduleKind::Linear { .. } => k.clone(),
        };
        Self {
            channel: self.channel,
            kind,
            t_final: self.t_final * factor,
        }
    }
}

/// The coefficient pair of a composite Hamiltonian over time.
///
/// `a(t)` comes from an `A` or `G` schedule and `b(t)` from a `B` or `Gamma`
/// schedule; a missing side is held at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Drive {
    pub driver: Option<Schedule>,
    pub problem: Option<Schedule>,
    pub t_final: f64,
}

impl Drive {
    pub fn new(schedules: Vec<Schedule>) -> Result<Self> {
        let mut driver = None;
        let mut problem = None;
        for s in schedules {
            let slot = if s.channel.on_driver() {
                &mut driver
            } else {
                &mut problem
            };
            if slot.is_some() {
                return Err(invalid("two schedules drive the same coefficient"));
            }
            *slot = Some(s);
        }
        let t_final = match (&driver, &problem) {
            (Some(d), Some(p)) => {
                if (d.t_final - p.t_final).abs() > 1e-12 * d.t_final.max(1.0) {
                    return Err(invalid("schedules disagree on the final time"));
                }
                d.t_final
            }
            (Some(s), None) | (None, Some(s)) => s.t_final,
            (None, None) => return Err(invalid("drive needs at least one schedule")),
        };
        Ok(Self {
            driver,
            problem,
            t_final,
        })
    }

    /// Linear `A: a0 -> a1`, `B: b0 -> b1` over `[0, t_final]`.
    pub fn linear(a: (f64, f64), b: (f64, f64), t_final: f64) -> Result<Self> {
        Self::new(vec![
            Schedule::linear(Channel::A, a.0, a.1, t_final)?,
            Schedule::linear(Channel::B, b.0, b.1, t_final)?,
        ])
    }

    pub fn coeffs(&self, t: f64) -> (f64, f64) {
        (
            self.driver.as_ref().map_or(1.0, |s| s.value(t)),
            self.problem.as_ref().map_or(1.0, |s| s.value(t)),
        )
    }

    pub fn coeffs_right(&self, t: f64) -> (f64, f64) {
        (
            self.driver.as_ref().map_or(1.0, |s| s.value_right(t)),
            self.problem.as_ref().map_or(1.0, |s| s.value_right(t)),
        )
    }

    pub fn rates(&self, t: f64) -> (f64, f64) {
        (
            self.driver.as_ref().map_or(0.0, |s| s.derivative(t)),
            self.problem.as_ref().map_or(0.0, |s| s.derivative(t)),
        )
    }

    pub fn rates_left(&self, t: f64) -> (f64, f64) {
        (
            self.driver.as_ref().map_or(0.0, |s| s.derivative_left(t)),
            self.problem.as_ref().map_or(0.0, |s| s.derivative_left(t)),
        )
    }

    fn merged(&self, f: impl Fn(&Schedule) -> Vec<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .driver
            .iter()
            .chain(self.problem.iter())
            .flat_map(f)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.retain(|&t| t > 0.0 && t < self.t_final);
        v
    }

    pub fn jumps(&self) -> Vec<f64> {
        self.merged(Schedule::jumps)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.merged(Schedule::breakpoints)
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.driver
            .iter()
            .chain(self.problem.iter())
            .all(Schedule::is_piecewise_constant)
    }

    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            driver: self.driver.as_ref().map(|s| s.rescaled(factor)),
            problem: self.problem.as_ref().map(|s| s.rescaled(factor)),
            t_final: self.t_final * factor,
        }
    }

    /// Intervals between consecutive breakpoints.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        let mut edges = vec![0.0];
        edges.extend(self.breakpoints());
        edges.push(self.t_final);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// `n` equally spaced samples on `[t0, t1]` including both ends.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t1],
        _ => (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact segments when the drive is piecewise constant, else the integrator.
    Auto,
    Exact,
    Integrator,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Record diagonal entropy in the instantaneous eigenbasis.
    pub entropy: bool,
    pub store_states: bool,
    /// Allowed norm drift before the run aborts.
    pub norm_guard: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            rtol: 1e-10,
            atol: 1e-12,
            entropy: false,
            store_states: false,
            norm_guard: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub hp: Vec<f64>,
    pub hd: Vec<f64>,
    pub energy: Vec<f64>,
    pub sd: Option<Vec<f64>>,
    pub norm: Vec<f64>,
    pub states: Option<Vec<Vec<C64>>>,
    pub final_state: Vec<C64>,
}

/// Expectations of `H_p`, `H_d` and the full `H` in one pass.
pub fn observe(h: &HamiltonianSpec, psi: &[C64]) -> (f64, f64, f64) {
    let e = &h.problem.energies;
    let mut hp = 0.0;
    let mut hb = 0.0;
    for (z, a) in psi.iter().enumerate() {
        let p = a.norm_sqr();
        hp += p * e[z];
        if let Some(b) = &h.bias {
            hb += p * b.diagonal_value(z);
        }
    }
    let mut buf = vec![C64::new(0.0, 0.0); psi.len()];
    h.driver.apply_add(1.0, psi, &mut buf);
    let hd = linalg::cdot(psi, &buf).re;
    (hp, hd, h.a * hd + h.b * hp + hb)
}

struct Recorder {
    traj: Trajectory,
    opts: EvolveOptions,
}

impl Recorder {
    fn new(opts: EvolveOptions) -> Self {
        let traj = Trajectory {
            sd: opts.entropy.then(Vec::new),
            states: opts.store_states.then(Vec::new),
            ..Trajectory::default()
        };
        Self { traj, opts }
    }

    fn push(&mut self, t: f64, h: &HamiltonianSpec, psi: &[C64], sd: Option<f64>) -> Result<()> {
        let norm = linalg::norm(psi);
        if (norm - 1.0).abs() > self.opts.norm_guard {
            return Err(Error::Integrator {
                t,
                reason: format!("norm drifted to {norm}"),
            });
        }
        let (hp, hd, en) = observe(h, psi);
        self.traj.times.push(t);
        self.traj.hp.push(hp);
        self.traj.hd.push(hd);
        self.traj.energy.push(en);
        self.traj.norm.push(norm);
        if let (Some(v), Some(s)) = (self.traj.sd.as_mut(), sd) {
            v.push(s);
        }
        if let Some(v) = self.traj.states.as_mut() {
            v.push(psi.to_vec());
        }
        Ok(())
    }
}

/// Spectra keyed by the exact coefficient pair.
#[derive(Default)]
pub struct SpectrumCache {
    map: BTreeMap<(u64, u64), alloc::sync::Arc<Eigensystem>>,
}

impl SpectrumCache {
    pub fn get(&mut self, h: &HamiltonianSpec) -> Result<alloc::sync::Arc<Eigensystem>> {
        let key = (h.a.to_bits(), h.b.to_bits());
        if let Some(e) = self.map.get(&key) {
            return Ok(e.clone());
        }
        let e = alloc::sync::Arc::new(h.eig()?);
        self.map.insert(key, e.clone());
        Ok(e)
    }
}

fn check_grid(grid: &[f64], t_final: f64) -> Result<()> {
    let slack = 1e-12 * t_final.max(1.0);
    for w in grid.windows(2) {
        if w[1] < w[0] {
            return Err(invalid("sample grid must be ascending"));
        }
    }
    if grid.first().is_some_and(|&t| t < 0.0) || grid.last().is_some_and(|&t| t > t_final + slack) {
        return Err(invalid("sample grid leaves the schedule's time range"));
    }
    Ok(())
}

/// Evolves `psi0` under `template` with coefficients taken from `drive`,
/// sampling observables on `grid`.
pub fn evolve(
    template: &HamiltonianSpec,
    drive: &Drive,
    psi0: &[C64],
    grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if psi0.len() != template.dim() {
        return Err(Error::DimensionMismatch {
            expected: template.dim(),
            got: psi0.len(),
        });
    }
    let n0 = linalg::norm(psi0);
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalised(n0));
    }
    check_grid(grid, drive.t_final)?;
    let exact = match opts.method {
        Method::Auto => drive.is_piecewise_constant(),
        Method::Exact => {
            if !drive.is_piecewise_constant() {
                return Err(invalid(
                    "exact propagation needs a piecewise-constant drive",
                ));
            }
            true
        }
        Method::Integrator => false,
    };
    if exact {
        evolve_exact(
            template,
            drive,
            psi0,
            grid,
            opts,
            &mut SpectrumCache::default(),
        )
    } else {
        evolve_integrated(template, drive, psi0, grid, opts)
    }
}

/// Exact segment propagation reusing `cache` across calls.
pub fn evolve_exact(
    template: &HamiltonianSpec,
    drive: &Drive,
    psi0: &[C64],
    grid: &[f64],
    opts: &EvolveOptions,
    cache: &mut SpectrumCache,
) -> Result<Trajectory> {
    let mut rec = Recorder::new(*opts);
    let mut psi = psi0.to_vec();
    let mut gi = 0;
    let segments = drive.segments();
    for (si, &(s0, s1)) in segments.iter().enumerate() {
        let (a, b) = drive.coeffs_right(s0);
        let h = template.with_coeffs(a, b);
        let last = si + 1 == segments.len();
        let in_segment = |t: f64| if last { true } else { t <= s1 };
        let eig = cache.get(&h)?;
        let c = eig.project(&psi);
        let sd = if opts.entropy {
            Some(diagonal_entropy(
                &c.iter().map(|x| x.norm_sqr()).collect::<Vec<_>>(),
            )?)
        } else {
            None
        };
        let at = |dt: f64| -> Vec<C64> {
            let ph: Vec<C64> = c
                .iter()
                .zip(&eig.values)
                .map(|(c, &e)| c * C64::from_polar(1.0, -e * dt))
                .collect();
            eig.reconstruct(&ph)
        };
        while gi < grid.len() && in_segment(grid[gi]) {
            let t = grid[gi];
            let dt = t - s0;
            let state = if dt == 0.0 { psi.clone() } else { at(dt) };
            rec.push(t, &h, &state, sd)?;
            gi += 1;
        }
        psi = at(s1 - s0);
    }
    rec.traj.final_state = psi;
    Ok(rec.traj)
}

fn evolve_integrated(
    template: &HamiltonianSpec,
    drive: &Drive,
    psi0: &[C64],
    grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let mut rec = Recorder::new(*opts);
    let mut psi = psi0.to_vec();
    let mut gi = 0;
    let entropy_at = |h: &HamiltonianSpec, psi: &[C64]| -> Result<Option<f64>> {
        if !opts.entropy {
            return Ok(None);
        }
        Ok(Some(diagonal_entropy(&h.eig()?.populations(psi))?))
    };
    while gi < grid.len() && grid[gi] <= 0.0 {
        let (a, b) = drive.coeffs(0.0);
        let h = template.with_coeffs(a, b);
        let sd = entropy_at(&h, &psi)?;
        rec.push(grid[gi], &h, &psi, sd)?;
        gi += 1;
    }
    let dp = Dp5Options {
        rtol: opts.rtol,
        atol: opts.atol,
        ..Dp5Options::default()
    };
    for (s0, s1) in drive.segments() {
        let mut stops: Vec<f64> = Vec::new();
        let first = gi;
        while gi < grid.len() && grid[gi] <= s1 {
            stops.push(grid[gi]);
            gi += 1;
        }
        stops.push(s1);
        let rhs = |t: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
            let (a, b) = if t <= s0 {
                drive.coeffs_right(s0)
            } else {
                drive.coeffs(t)
            };
            template.with_coeffs(a, b).apply_into(y, dy);
            for v in dy.iter_mut() {
                *v = C64::new(v.im, -v.re);
            }
            Ok(())
        };
        let guard = opts.norm_guard;
        let mut samples: Vec<(f64, Vec<C64>)> = Vec::new();
        let (end, _) = ode::integrate(
            rhs,
            s0,
            &psi,
            &stops,
            &dp,
            |t, y: &mut [C64]| {
                // Drift beyond the guard means the step control failed;
                // anything smaller is truncation error and is projected out.
                let nrm = linalg::norm(y);
                if (nrm - 1.0).abs() > guard {
                    return Err(Error::Integrator {
                        t,
                        reason: format!("norm drifted to {nrm}"),
                    });
                }
                for v in y.iter_mut() {
                    *v /= nrm;
                }
                Ok(true)
            },
            |i, t, y| {
                if first + i < gi {
                    samples.push((t, y.to_vec()));
                }
                Ok(())
            },
        )?;
        for (t, y) in samples {
            let (a, b) = drive.coeffs(t);
            let h = template.with_coeffs(a, b);
            let sd = entropy_at(&h, &y)?;
            rec.push(t, &h, &y, sd)?;
        }
        psi = end;
    }
    rec.traj.final_state = psi;
    Ok(rec.traj)
}

/// Mean and spread of `<H_p>` over part of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageStats {
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
}

/// Trapezoid-weighted statistics of `series` over `[t0 + burn_in, t1]`.
pub fn window_stats(times: &[f64], series: &[f64], t0: f64, t1: f64) -> Result<StageStats> {
    let idx: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= t0 && times[i] <= t1)
        .collect();
    match idx.len() {
        0 => Err(invalid("empty averaging window")),
        1 => Ok(StageStats {
            mean: series[idx[0]],
            std: 0.0,
            samples: 1,
        }),
        m => {
            let mut w = vec![0.0; m];
            for k in 0..m - 1 {
                let dt = times[idx[k + 1]] - times[idx[k]];
                w[k] += 0.5 * dt;
                w[k + 1] += 0.5 * dt;
            }
            let total: f64 = w.iter().sum();
            if total == 0.0 {
                w.iter_mut().for_each(|x| *x = 1.0);
            }
            let total: f64 = w.iter().sum();
            let mean = idx
                .iter()
                .zip(&w)
                .map(|(&i, wi)| wi * series[i])
                .sum::<f64>()
                / total;
            let var = idx
                .iter()
                .zip(&w)
                .map(|(&i, wi)| wi * (series[i] - mean) * (series[i] - mean))
                .sum::<f64>()
                / total;
            Ok(StageStats {
                mean,
                std: var.sqrt(),
                samples: m,
            })
        }
    }
}

pub fn stage_stats(traj: &Trajectory, stage: (f64, f64), burn_in: f64) -> Result<StageStats> {
    if burn_in >= stage.1 - stage.0 {
        return Err(invalid("burn-in is not shorter than the stage"));
    }
    window_stats(&traj.times, &traj.hp, stage.0 + burn_in, stage.1)
}

/// Time-averaged `<H_p>` over a stage after discarding `burn_in`.
pub fn stage_average(traj: &Trajectory, stage: (f64, f64), burn_in: f64) -> Result<f64> {
    Ok(stage_stats(traj, stage, burn_in)?.mean)
}

/// Work `dgamma (<H_p(t2)> - <H_p(t1)>)` extracted by quenching
/// `gamma1 -> gamma2` at `t1` and back at `t2`.
pub fn cyclic_quench_work(
    template: &HamiltonianSpec,
    gamma1: f64,
    gamma2: f64,
    t1: f64,
    t2: f64,
    psi0: &[C64],
) -> Result<f64> {
    if !(gamma2 >= gamma1) || !(t2 > t1) || !(t1 > 0.0) {
        return Err(invalid("need gamma2 >= gamma1 and 0 < t1 < t2"));
    }
    let drive = Drive::new(vec![
        Schedule::constant(Channel::A, template.a, t2)?,
        Schedule::piecewise_constant(Channel::Gamma, vec![(t1, gamma1), (t2, gamma2)])?,
    ])?;
    let traj = evolve(template, &drive, psi0, &[t1, t2], &EvolveOptions::default())?;
    Ok((gamma2 - gamma1) * (traj.hp[1] - traj.hp[0]))
}
