//! Pure-state thermal annealing.
//!
//! The state is modelled at every instant as a Gibbs state of
//! `A(t) H_d + B(t) H_p` whose inverse temperature is fixed by the energy,
//! and the energy obeys `dE/dt = A' <H_d> + B' <H_p>`. A backend supplies
//! `ln Z(beta, A, B)` and the thermal expectations; the solver integrates `E`
//! and re-solves `beta` at every evaluation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::dynamics::Drive;
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::ode::{self, Dp5Options};
use crate::operators::HamiltonianSpec;
use crate::statmech::fit_beta_from;

/// Everything a backend knows at one `(beta, A, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalPoint {
    pub beta: f64,
    pub log_z: f64,
    pub energy: f64,
    pub hd: f64,
    pub hp: f64,
    /// `dE/dbeta` at fixed `(A, B)`.
    pub d_energy: f64,
    pub d_hd: f64,
    pub d_hp: f64,
}

impl ThermalPoint {
    /// `(d/dbeta, d/dA, d/dB)` of `ln Z` implied by the expectations.
    pub fn log_z_gradient(&self) -> [f64; 3] {
        [-self.energy, -self.beta * self.hd, -self.beta * self.hp]
    }

    /// Diagonal entropy of the Gibbs state, `ln Z + beta E`.
    pub fn entropy(&self) -> f64 {
        self.log_z + self.beta * self.energy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PstqaIntegrator {
    /// Chebyshev-Lobatto collocation on adaptively bisected intervals.
    Collocation,
    /// Dormand-Prince 5(4).
    Dp5,
}

pub trait PartitionBackend {
    fn name(&self) -> &'static str;
    fn log_z(&self, beta: f64, a: f64, b: f64) -> Result<f64>;
    fn thermal(&self, beta: f64, a: f64, b: f64) -> Result<ThermalPoint>;
    /// Non-negative `beta` with `E(beta, A, B) = energy`.
    fn beta_from_energy(&self, energy: f64, a: f64, b: f64, guess: Option<f64>) -> Result<f64>;
    fn preferred_integrator(&self) -> PstqaIntegrator {
        PstqaIntegrator::Dp5
    }
}

/// Spectrum of `H(A, B)` with the diagonal matrix elements of `H_d` and
/// `H_p` in its eigenbasis.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub values: Vec<f64>,
    pub hd: Vec<f64>,
    pub hp: Vec<f64>,
}

impl Spectral {
    pub fn thermal(&self, beta: f64) -> ThermalPoint {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = self
            .values
            .iter()
            .map(|&e| (-beta * (e - lo)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        let mean = |x: &[f64]| linalg::dot(&w, x) / z;
        let (e, d, q) = (mean(&self.values), mean(&self.hd), mean(&self.hp));
        let mut cov = [0.0; 3];
        for k in 0..w.len() {
            let de = self.values[k] - e;
            cov[0] += w[k] * de * de;
            cov[1] += w[k] * de * (self.hd[k] - d);
            cov[2] += w[k] * de * (self.hp[k] - q);
        }
        ThermalPoint {
            beta,
            log_z: z.ln() - beta * lo,
            energy: e,
            hd: d,
            hp: q,
            d_energy: -cov[0] / z,
            d_hd: -cov[1] / z,
            d_hp: -cov[2] / z,
        }
    }
}

/// Exact partition function from the full spectrum of the template
/// Hamiltonian at each `(A, B)`.
///
/// Spectra are cached per coefficient pair, so repeated evaluations at the
/// same instant (Newton iterations, the final sampling pass) cost no extra
/// diagonalisations. The cache uses interior mutability: share one backend
/// per thread.
pub struct ExactBackend<'p> {
    template: HamiltonianSpec<'p>,
    cache: RefCell<BTreeMap<(u64, u64), Arc<Spectral>>>,
    capacity: usize,
    diagonalisations: Cell<usize>,
}

impl<'p> ExactBackend<'p> {
    pub fn new(template: HamiltonianSpec<'p>) -> Self {
        Self {
            template,
            cache: RefCell::new(BTreeMap::new()),
            capacity: 512,
            diagonalisations: Cell::new(0),
        }
    }

    pub fn template(&self) -> &HamiltonianSpec<'p> {
        &self.template
    }

    /// How many eigendecompositions have been computed so far.
    pub fn diagonalisations(&self) -> usize {
        self.diagonalisations.get()
    }

    pub fn spectral(&self, a: f64, b: f64) -> Result<Arc<Spectral>> {
        let key = (a.to_bits(), b.to_bits());
        if let Some(s) = self.cache.borrow().get(&key) {
            return Ok(s.clone());
        }
        let h = self.template.with_coeffs(a, b);
        let eig = h.eig()?;
        self.diagonalisations.set(self.diagonalisations.get() + 1);
        let s = Arc::new(Spectral {
            hd: eig.driver_expectations(&h.driver),
            hp: eig.diagonal_expectations(&h.problem.energies),
            values: eig.values,
        });
        let mut cache = self.cache.borrow_mut();
        if cache.len() >= self.capacity {
            cache.clear();
        }
        cache.insert(key, s.clone());
        Ok(s)
    }
}

impl PartitionBackend for ExactBackend<'_> {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn log_z(&self, beta: f64, a: f64, b: f64) -> Result<f64> {
        Ok(crate::statmech::log_partition(
            &self.spectral(a, b)?.values,
            beta,
        ))
    }

    fn thermal(&self, beta: f64, a: f64, b: f64) -> Result<ThermalPoint> {
        Ok(self.spectral(a, b)?.thermal(beta))
    }

    fn beta_from_energy(&self, energy: f64, a: f64, b: f64, guess: Option<f64>) -> Result<f64> {
        fit_beta_from(&self.spectral(a, b)?.values, energy, guess)
    }

    fn preferred_integrator(&self) -> PstqaIntegrator {
        PstqaIntegrator::Collocation
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PstqaOptions {
    /// Backend default when `None`.
    pub integrator: Option<PstqaIntegrator>,
    pub rtol: f64,
    pub atol: f64,
    /// Starting collocation polynomial degree per interval.
    pub nodes: usize,
    /// Degree is doubled up to this before an interval is bisected. The
    /// nodes nest, so refinement reuses every spectrum already computed.
    pub max_nodes: usize,
}

impl Default for PstqaOptions {
    fn default() -> Self {
        Self {
            integrator: None,
            rtol: 1e-10,
            atol: 1e-10,
            nodes: 16,
            max_nodes: 64,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PstqaTrajectory {
    pub backend: &'static str,
    pub times: Vec<f64>,
    /// Normalised time `t / t_f`.
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub energy: Vec<f64>,
    pub beta: Vec<f64>,
    pub hd: Vec<f64>,
    pub hp: Vec<f64>,
    pub log_z: Vec<f64>,
    pub sd: Vec<f64>,
    /// Right-hand-side evaluations spent by the integrator.
    pub evaluations: usize,
}

impl PstqaTrajectory {
    pub fn final_hp(&self) -> Option<f64> {
        self.hp.last().copied()
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.energy.last().copied()
    }
}

fn breakdown(t: f64, e: Error) -> Error {
    match e {
        Error::NegativeTemperature { .. } | Error::BelowGroundState { .. } => {
            Error::ThermalBreakdown {
                t,
                reason: e.to_string(),
            }
        }
        other => other,
    }
}

/// Evaluates `dE/dt` and its derivative in `E` inside one smooth segment.
struct Rhs<'a, B: PartitionBackend + ?Sized> {
    backend: &'a B,
    drive: &'a Drive,
    segment: (f64, f64),
    evaluations: usize,
    /// Most recent point where no Gibbs state matched the energy.
    breakdown: Option<Error>,
}

impl<B: PartitionBackend + ?Sized> Rhs<'_, B> {
    fn coeffs(&self, t: f64) -> (f64, f64) {
        if t <= self.segment.0 {
            self.drive.coeffs_right(self.segment.0)
        } else {
            self.drive.coeffs(t)
        }
    }

    fn rates(&self, t: f64) -> (f64, f64) {
        if t >= self.segment.1 {
            self.drive.rates_left(t)
        } else {
            self.drive.rates(t)
        }
    }

    /// Energy at node time `t` for a given inverse temperature.
    fn isothermal(&self, t: f64, beta: f64) -> Result<f64> {
        let (a, b) = self.coeffs(t);
        Ok(self.backend.thermal(beta, a, b)?.energy)
    }

    fn eval(&mut self, t: f64, e: f64, guess: &mut Option<f64>) -> Result<(f64, f64)> {
        self.evaluations += 1;
        let (a, b) = self.coeffs(t);
        let (ra, rb) = self.rates(t);
        let beta = match self.backend.beta_from_energy(e, a, b, *guess) {
            Ok(beta) => beta,
            Err(err) => {
                let err = breakdown(t, err);
                if matches!(err, Error::ThermalBreakdown { .. }) {
                    self.breakdown = Some(err.clone());
                }
                return Err(err);
            }
        };
        *guess = Some(beta);
        let p = self.backend.thermal(beta, a, b)?;
        let f = ra * p.hd + rb * p.hp;
        let df = if p.d_energy != 0.0 {
            (ra * p.d_hd + rb * p.d_hp) / p.d_energy
        } else {
            0.0
        };
        Ok((f, df))
    }
}

/// Chebyshev-Lobatto nodes on `[-1, 1]` (ascending) with the spectral
/// integration matrix and barycentric weights.
struct Lobatto {
    x: Vec<f64>,
    /// Row-major; row `j` integrates the interpolant from `-1` to `x_j`.
    integ: Vec<f64>,
    bary: Vec<f64>,
}

impl Lobatto {
    fn new(n: usize) -> Self {
        let x: Vec<f64> = (0..=n).map(|j| -(PI * j as f64 / n as f64).cos()).collect();
        let m = n + 1;
        let mut integ = vec![0.0; m * m];
        let mut unit = vec![0.0; m];
        for l in 0..m {
            unit.iter_mut().for_each(|v| *v = 0.0);
            unit[l] = 1.0;
            let a = Self::coefficients(&unit);
            let mut c = vec![0.0; m + 1];
            c[1] += a[0];
            if n >= 1 {
                c[2] += a[1] / 4.0;
            }
            for (k, &ak) in a.iter().enumerate().skip(2) {
                c[k + 1] += ak / (2.0 * (k + 1) as f64);
                c[k - 1] -= ak / (2.0 * (k - 1) as f64);
            }
            let at_minus_one: f64 = c
                .iter()
                .enumerate()
                .map(|(k, ck)| if k % 2 == 0 { *ck } else { -ck })
                .sum();
            for j in 0..m {
                let theta = PI * (n - j) as f64 / n as f64;
                let v: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(k, ck)| ck * (k as f64 * theta).cos())
                    .sum();
                integ[j * m + l] = v - at_minus_one;
            }
        }
        let bary = (0..m)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Self { x, integ, bary }
    }

    /// Chebyshev coefficients of the interpolant through ascending-node values.
    fn coefficients(vals: &[f64]) -> Vec<f64> {
        let n = vals.len() - 1;
        (0..=n)
            .map(|k| {
                let mut s = 0.0;
                for m in 0..=n {
                    let f = vals[n - m];
                    let w = if m == 0 || m == n { 0.5 } else { 1.0 };
                    s += w * f * (PI * (k * m) as f64 / n as f64).cos();
                }
                let s = 2.0 * s / n as f64;
                if k == 0 || k == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect()
    }

    fn interpolate(&self, vals: &[f64], x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &wj)) in self.x.iter().zip(&self.bary).enumerate() {
            let d = x - xj;
            if d == 0.0 {
                return vals[j];
            }
            num += wj * vals[j] / d;
            den += wj / d;
        }
        num / den
    }
}

struct Interval {
    energies: Vec<f64>,
    t0: f64,
    t1: f64,
}

fn collocate<B: PartitionBackend + ?Sized>(
    rhs: &mut Rhs<'_, B>,
    nodes: &Lobatto,
    t0: f64,
    t1: f64,
    e0: f64,
    opts: &PstqaOptions,
    guess0: Option<f64>,
) -> Result<Option<Interval>> {
    let m = nodes.x.len();
    let n = m - 1;
    let half = 0.5 * (t1 - t0);
    let tau: Vec<f64> = nodes
        .x
        .iter()
        .enumerate()
        .map(|(j, x)| if j == n { t1 } else { t0 + (x + 1.0) * half })
        .collect();
    let mut guesses = vec![guess0; m];
    let mut f = vec![0.0; m];
    let mut df = vec![0.0; m];
    let (f0, df0) = rhs.eval(t0, e0, &mut guesses[0])?;
    f[0] = f0;
    df[0] = df0;
    // Heun sweep across the nodes as the starting guess; node spectra are
    // cached, so this costs beta solves only. Where an explicit stage would
    // leave the thermal range, fall back to the previous node's temperature.
    let mut e = vec![e0; m];
    for j in 1..m {
        let dt = tau[j] - tau[j - 1];
        let mut g = guesses[j - 1];
        let pred = e[j - 1] + dt * f[j - 1];
        let heun = rhs
            .eval(tau[j], pred, &mut g)
            .map(|(fp, _)| e[j - 1] + 0.5 * dt * (f[j - 1] + fp));
        guesses[j] = guesses[j - 1];
        let mut evaluated = None;
        if let Ok(cand) = heun {
            if let Ok(v) = rhs.eval(tau[j], cand, &mut guesses[j]) {
                e[j] = cand;
                evaluated = Some(v);
            }
        }
        if evaluated.is_none() {
            let beta = guesses[j - 1].unwrap_or(0.0);
            e[j] = rhs.isothermal(tau[j], beta)?;
            guesses[j] = Some(beta);
            match rhs.eval(tau[j], e[j], &mut guesses[j]) {
                Ok(v) => evaluated = Some(v),
                Err(_) => return Ok(None),
            }
        }
        if let Some((fj, dfj)) = evaluated {
            f[j] = fj;
            df[j] = dfj;
        }
    }
    let scale = e0.abs().max(1.0);
    let mut converged = false;
    let mut last_step = f64::INFINITY;
    for _ in 0..30 {
        let mut jac = vec![0.0; n * n];
        let mut res = vec![0.0; n];
        for j in 1..m {
            let row = &nodes.integ[j * m..(j + 1) * m];
            res[j - 1] = -(e[j] - e0 - half * linalg::dot(row, &f));
            for l in 1..m {
                jac[(j - 1) * n + (l - 1)] = -half * row[l] * df[l];
            }
            jac[(j - 1) * n + (j - 1)] += 1.0;
        }
        linalg::solve_small(&mut jac, &mut res)?;
        let step = res.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        if !step.is_finite() {
            return Ok(None);
        }
        // Backtrack if the update leaves the range where beta exists.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..6 {
            let trial: Vec<f64> = (0..m)
                .map(|j| {
                    if j == 0 {
                        e0
                    } else {
                        e[j] + lambda * res[j - 1]
                    }
                })
                .collect();
            let mut tg = guesses.clone();
            let mut tf = f.clone();
            let mut tdf = df.clone();
            let ok = (1..m).all(|j| match rhs.eval(tau[j], trial[j], &mut tg[j]) {
                Ok((fj, dfj)) => {
                    tf[j] = fj;
                    tdf[j] = dfj;
                    true
                }
                Err(_) => false,
            });
            if ok {
                e = trial;
                guesses = tg;
                f = tf;
                df = tdf;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Ok(None);
        }
        let tol = opts.atol + opts.rtol * scale;
        let stalled = step <= 0.1 * tol && step >= 0.5 * last_step;
        if lambda == 1.0 && (step <= 1e-3 * tol || stalled) {
            converged = true;
            break;
        }
        last_step = step;
    }
    if !converged {
        return Ok(None);
    }
    let c = Lobatto::coefficients(&e);
    let tail = c[n].abs() + c[n - 1].abs();
    let emax = e.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if tail > opts.atol + opts.rtol * emax {
        return Ok(None);
    }
    Ok(Some(Interval {
        energies: e,
        t0,
        t1,
    }))
}

/// Integrates the thermal energy balance along `drive` from `e0`, sampling on
/// `grid` (ascending, inside `[0, t_f]`).
///
/// At a jump of the coefficients the energy changes by the sudden-quench
/// amount `dA <H_d> + dB <H_p>` evaluated just before the jump.
pub fn pstqa_solve<B: PartitionBackend + ?Sized>(
    backend: &B,
    drive: &Drive,
    e0: f64,
    grid: &[f64],
    opts: &PstqaOptions,
) -> Result<PstqaTrajectory> {
    let tf = drive.t_final;
    if grid.windows(2).any(|w| w[1] < w[0])
        || grid.first().is_some_and(|&t| t < 0.0)
        || grid.last().is_some_and(|&t| t > tf * (1.0 + 1e-12))
    {
        return Err(invalid(
            "grid must be ascending inside the schedule's time range",
        ));
    }
    if !e0.is_finite() {
        return Err(invalid("initial energy is not finite"));
    }
    if opts.nodes < 2 {
        return Err(invalid("collocation needs at least two nodes"));
    }
    let (a0, b0) = drive.coeffs(0.0);
    backend
        .beta_from_energy(e0, a0, b0, None)
        .map_err(|err| breakdown(0.0, err))?;
    let method = opts
        .integrator
        .unwrap_or_else(|| backend.preferred_integrator());
    let mut levels = Vec::new();
    if method == PstqaIntegrator::Collocation {
        let mut k = opts.nodes;
        while levels.is_empty() || k <= opts.max_nodes {
            levels.push(Lobatto::new(k));
            k *= 2;
        }
    }

    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    let mut gi = 0;
    while gi < grid.len() && grid[gi] <= 0.0 {
        samples.push((grid[gi], e0));
        gi += 1;
    }
    let mut e = e0;
    let mut evaluations = 0;
    let mut beta_guess = None;
    for (si, (s0, s1)) in drive.segments().into_iter().enumerate() {
        if si > 0 {
            let (al, bl) = drive.coeffs(s0);
            let (ar, br) = drive.coeffs_right(s0);
            if al != ar || bl != br {
                let beta = backend
                    .beta_from_energy(e, al, bl, beta_guess)
                    .map_err(|err| breakdown(s0, err))?;
                let p = backend.thermal(beta, al, bl)?;
                e += (ar - al) * p.hd + (br - bl) * p.hp;
            }
        }
        let mut rhs = Rhs {
            backend,
            drive,
            segment: (s0, s1),
            evaluations: 0,
            breakdown: None,
        };
        let first = gi;
        while gi < grid.len() && grid[gi] <= s1 {
            gi += 1;
        }
        let stops = &grid[first..gi];
        if !levels.is_empty() {
            let mut t = s0;
            let mut h = s1 - s0;
            let mut next = 0;
            let min_h = 1e-7 * (s1 - s0);
            while t < s1 {
                let t1 = if t + h >= s1 - 1e-14 * s1.abs() {
                    s1
                } else {
                    t + h
                };
                let mut res = Ok(None);
                let mut used = 0;
                for (li, nodes) in levels.iter().enumerate() {
                    res = collocate(&mut rhs, nodes, t, t1, e, opts, beta_guess);
                    used = li;
                    // A failed Newton solve is not cured by a higher degree.
                    if !matches!(res, Ok(None)) {
                        break;
                    }
                }
                match res {
                    Ok(Some(iv)) => {
                        rhs.breakdown = None;
                        let nodes = &levels[used];
                        while next < stops.len() && stops[next] <= iv.t1 {
                            let x = 2.0 * (stops[next] - iv.t0) / (iv.t1 - iv.t0) - 1.0;
                            samples.push((stops[next], nodes.interpolate(&iv.energies, x)));
                            next += 1;
                        }
                        e = iv.energies[iv.energies.len() - 1];
                        h = if used == 0 { 2.0 * (t1 - t) } else { t1 - t };
                        t = t1;
                    }
                    outcome => {
                        h *= 0.5;
                        // Short intervals that still leave the thermal range
                        // mean the trajectory itself does, not the step size.
                        if h < 1e-4 * (s1 - s0) {
                            if let Some(err) = rhs.breakdown.take() {
                                return Err(err);
                            }
                        }
                        if h < min_h {
                            return Err(match outcome {
                                Err(err) => err,
                                _ => Error::Integrator {
                                    t,
                                    reason: "collocation interval underflow".to_string(),
                                },
                            });
                        }
                    }
                }
            }
        } else {
            let mut guess = beta_guess;
            let mut stop_list: Vec<f64> = stops.to_vec();
            stop_list.push(s1);
            let n_samples = stops.len();
            let dp = Dp5Options {
                rtol: opts.rtol,
                atol: opts.atol,
                ..Dp5Options::default()
            };
            let mut found: Vec<(f64, f64)> = Vec::new();
            let (end, _) = ode::integrate(
                |t, y: &[f64], dy: &mut [f64]| {
                    dy[0] = rhs.eval(t, y[0], &mut guess)?.0;
                    Ok(())
                },
                s0,
                &[e],
                &stop_list,
                &dp,
                |_, _| Ok(false),
                |i, t, y| {
                    if i < n_samples {
                        found.push((t, y[0]));
                    }
                    Ok(())
                },
            )?;
            samples.extend(found);
            e = end[0];
            beta_guess = guess;
        }
        evaluations += rhs.evaluations;
    }

    let mut traj = PstqaTrajectory {
        backend: backend.name(),
        evaluations,
        ..PstqaTrajectory::default()
    };
    let mut guess = None;
    for (t, en) in samples {
        let (a, b) = drive.coeffs(t);
        let beta = backend
            .beta_from_energy(en, a, b, guess)
            .map_err(|err| breakdown(t, err))?;
        guess = Some(beta);
        let p = backend.thermal(beta, a, b)?;
        traj.times.push(t);
        traj.s.push(t / tf);
        traj.a.push(a);
        traj.b.push(b);
        traj.energy.push(en);
        traj.beta.push(beta);
        traj.hd.push(p.hd);
        traj.hp.push(p.hp);
        traj.log_z.push(p.log_z);
        traj.sd.push(p.log_z + beta * en);
    }
    Ok(traj)
}

/// `S_d = ln Z + beta E` along a trajectory and its largest deviation from
/// the first sample.
pub fn pstqa_entropy(traj: &PstqaTrajectory) -> (Vec<f64>, f64) {
    let sd: Vec<f64> = traj
        .log_z
        .iter()
        .zip(&traj.beta)
        .zip(&traj.energy)
        .map(|((l, b), e)| l + b * e)
        .collect();
    let drift = match sd.first() {
        Some(&s0) => sd.iter().fold(0.0f64, |acc, s| acc.max((s - s0).abs())),
        None => 0.0,
    };
    (sd, drift)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDiscrepancy {
    pub energy: f64,
    pub hp: f64,
    /// `|dhp| / |hp|` at the shared endpoint.
    pub relative: f64,
}

/// Runs two drives with shared endpoints in the `(A, B)` plane from the same
/// initial energy and compares where they land.
pub fn path_independence_check<B: PartitionBackend + ?Sized>(
    backend: &B,
    paths: (&Drive, &Drive),
    e0: f64,
    opts: &PstqaOptions,
) -> Result<PathDiscrepancy> {
    let (p, q) = paths;
    let close = |x: (f64, f64), y: (f64, f64)| {
        (x.0 - y.0).abs() <= 1e-12 * x.0.abs().max(1.0)
            && (x.1 - y.1).abs() <= 1e-12 * x.1.abs().max(1.0)
    };
    if !close(p.coeffs(0.0), q.coeffs(0.0)) || !close(p.coeffs(p.t_final), q.coeffs(q.t_final)) {
        return Err(invalid("paths do not share their endpoints"));
    }
    let x = pstqa_solve(backend, p, e0, &[p.t_final], opts)?;
    let y = pstqa_solve(backend, q, e0, &[q.t_final], opts)?;
    let dh = (x.hp[0] - y.hp[0]).abs();
    Ok(PathDiscrepancy {
        energy: (x.energy[0] - y.energy[0]).abs(),
        hp: dh,
        relative: dh / x.hp[0].abs().max(f64::MIN_POSITIVE),
    })
}

/// Largest difference in `<H_p>(s)` between runs whose time axis is stretched
/// by each factor, sampled at `samples` points of normalised time.
pub fn timescale_invariance_check<B: PartitionBackend + ?Sized>(
    backend: &B,
    drive: &Drive,
    e0: f64,
    scales: &[f64],
    samples: usize,
    opts: &PstqaOptions,
) -> Result<f64> {
    if scales.iter().any(|&s| !(s > 0.0)) {
        return Err(invalid("time scales must be positive"));
    }
    let s_grid = crate::dynamics::uniform_grid(0.0, 1.0, samples.max(2));
    let mut reference: Option<Vec<f64>> = None;
    let mut worst = 0.0f64;
    for &k in scales {
        let d = drive.rescaled(k);
        let grid: Vec<f64> = s_grid.iter().map(|s| s * d.t_final).collect();
        let hp = pstqa_solve(backend, &d, e0, &grid, opts)?.hp;
        match &reference {
            None => reference = Some(hp),
            Some(r) => {
                for (x, y) in r.iter().zip(&hp) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Runs the solver and reports the drift of `S_d` as an error if it exceeds
/// `tol * |S_d(0)|`.
pub fn require_conserved_entropy(traj: &PstqaTrajectory, tol: f64) -> Result<f64> {
    let (sd, drift) = pstqa_entropy(traj);
    let s0 = sd.first().copied().unwrap_or(0.0);
    if drift > tol * s0.abs() {
        return Err(Error::Integrator {
            t: traj.times.last().copied().unwrap_or(0.0),
            reason: format!("diagonal entropy drifted by {drift:e}"),
        });
    }
    Ok(drift)
}
