//! Experiment protocols assembled from the lower layers.
//!
//! - Multi-stage walks: per-stage averages with diagonal-ensemble and
//!   thermal overlays, and the two- versus three-stage comparison.
//! - Warm-started walks from a basis string or a classical ensemble.
//! - Cyclic processes `H_p + H_b + G(t) H_d`, their transition matrices and
//!   the reverse/biased annealing shot loops built on them.
//! - Two-register entropy bookkeeping and passive-state ramps.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;

use crate::dynamics::{
    evolve, evolve_exact, observe, uniform_grid, window_stats, Channel, Drive, EvolveOptions,
    Method, Schedule, SpectrumCache, StageStats, Trajectory,
};
use crate::error::{invalid, Error, Result};
use crate::operators::{basis_state, plus_state, DriverKind, DriverSpec, HamiltonianSpec};
use crate::problems::IsingProblem;
use crate::statmech::{
    diagonal_entropy, diagonal_entropy_bits, eth_prediction, gibbs_weights, is_passive,
    DiagonalEnsemble,
};
use crate::{linalg, rng, C64, MAX_QUBITS};

/// Largest qubit count for which a full cycle unitary is materialised.
pub const DENSE_UNITARY_CAP: usize = 11;

/// Ground state of the driver alone: `|+...+>` for the transverse field, the
/// lowest diagonal entry's basis string otherwise.
pub fn driver_ground_state(driver: &DriverSpec) -> Vec<C64> {
    match driver.kind {
        DriverKind::TransverseField => plus_state(driver.n),
        _ => {
            let z = (0..driver.dim())
                .min_by(|&x, &y| {
                    driver
                        .diagonal_value(x)
                        .total_cmp(&driver.diagonal_value(y))
                })
                .unwrap_or(0);
            basis_state(driver.n, z)
        }
    }
}

fn problem_side(s: &Schedule) -> Result<()> {
    match s.channel {
        Channel::B | Channel::Gamma => Ok(()),
        _ => Err(invalid("staircase must drive the problem coefficient")),
    }
}

// ---------------------------------------------------------------------------
// Multi-stage walks

/// One stage of a multi-stage walk.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub start: f64,
    pub end: f64,
    /// Problem coefficient during the stage.
    pub gamma: f64,
    /// Time statistics of `<H_p>` after burn-in.
    pub stats: StageStats,
    /// Long-time `<H_p>` of the post-quench diagonal ensemble.
    pub diagonal: f64,
    /// Energy-matched thermal `<H_p>`; `None` outside positive temperature.
    pub eth: Option<f64>,
    pub eth_beta: Option<f64>,
    /// Diagonal entropy at the start of the stage.
    pub sd: f64,
}

impl StageReport {
    /// Stage average minus the diagonal-ensemble value; large values flag a
    /// burn-in that is too short.
    pub fn dephasing_gap(&self) -> f64 {
        self.stats.mean - self.diagonal
    }
}

#[derive(Debug, Clone)]
pub struct MsqwRun {
    pub trajectory: Trajectory,
    pub stages: Vec<StageReport>,
}

impl MsqwRun {
    /// Stages whose average rises above the previous one by more than
    /// `nsigma` times the larger of the two fluctuation widths.
    pub fn violations(&self, nsigma: f64) -> Vec<usize> {
        self.stages
            .windows(2)
            .enumerate()
            .filter(|(_, w)| {
                let band = nsigma * w[0].stats.std.max(w[1].stats.std);
                w[1].stats.mean > w[0].stats.mean + band
            })
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn is_monotone_within(&self, nsigma: f64) -> bool {
        self.violations(nsigma).is_empty()
    }
}

/// Runs `H_d + Gamma(t) H_p` from the driver ground state through a
/// monotone piecewise-constant staircase. Each stage is sampled at
/// `samples_per_stage` points; the first `burn_in_fraction` of every stage
/// is left out of its statistics.
pub fn msqw_run(
    problem: &IsingProblem,
    driver: DriverSpec,
    staircase: &Schedule,
    burn_in_fraction: f64,
    samples_per_stage: usize,
) -> Result<MsqwRun> {
    problem_side(staircase)?;
    if !staircase.is_piecewise_constant() || !staircase.is_monotone_nondecreasing() {
        return Err(invalid(
            "multi-stage walks need a non-decreasing piecewise-constant schedule",
        ));
    }
    if !(0.0..1.0).contains(&burn_in_fraction) || samples_per_stage < 2 {
        return Err(invalid(
            "burn-in fraction must lie in [0, 1) and stages need two samples",
        ));
    }
    let template = HamiltonianSpec::new(1.0, 1.0, driver, problem)?;
    let drive = Drive::new(vec![staircase.clone()])?;
    let mut psi = driver_ground_state(&driver);
    let mut cache = SpectrumCache::default();
    let mut traj = Trajectory::default();
    let mut stages = Vec::new();
    let opts = EvolveOptions::default();
    for (si, (s0, s1)) in drive.segments().into_iter().enumerate() {
        let (a, gamma) = drive.coeffs_right(s0);
        let h = template.with_coeffs(a, gamma);
        let eig = cache.get(&h)?;
        let q = eig.diagonal_expectations(&problem.energies);
        let ens = DiagonalEnsemble::from_state(&psi, eig.clone())?;
        let diagonal = ens.average(&q);
        let energy = observe(&h, &psi).2;
        let eth = eth_prediction(&eig, energy, &q).ok();

        let len = s1 - s0;
        let local = uniform_grid(0.0, len, samples_per_stage);
        let stage = Drive::new(vec![Schedule::piecewise_constant(
            staircase.channel,
            vec![(len, gamma)],
        )?])?;
        let part = evolve_exact(&template, &stage, &psi, &local, &opts, &mut cache)?;
        let times: Vec<f64> = part.times.iter().map(|t| t + s0).collect();
        let stats = window_stats(&times, &part.hp, s0 + burn_in_fraction * len, s1)?;
        // The quench instant belongs to the previous stage's record.
        let skip = usize::from(si > 0);
        traj.times.extend_from_slice(&times[skip..]);
        traj.hp.extend_from_slice(&part.hp[skip..]);
        traj.hd.extend_from_slice(&part.hd[skip..]);
        traj.energy.extend_from_slice(&part.energy[skip..]);
        traj.norm.extend_from_slice(&part.norm[skip..]);
        psi = part.final_state;
        stages.push(StageReport {
            start: s0,
            end: s1,
            gamma,
            stats,
            diagonal,
            eth: eth.map(|e| e.1),
            eth_beta: eth.map(|e| e.0),
            sd: ens.entropy(),
        });
    }
    traj.final_state = psi;
    Ok(MsqwRun {
        trajectory: traj,
        stages,
    })
}

/// [`msqw_run`] over a set of instances with the transverse-field driver.
pub fn msqw_campaign(
    problems: &[IsingProblem],
    staircase: &Schedule,
    burn_in_fraction: f64,
    samples_per_stage: usize,
) -> Result<Vec<MsqwRun>> {
    problems
        .iter()
        .map(|p| {
            msqw_run(
                p,
                DriverSpec::transverse_field(p.n),
                staircase,
                burn_in_fraction,
                samples_per_stage,
            )
        })
        .collect()
}

/// Two schedules sharing their first stage `gamma1` on `[0, t1]` and final
/// value `gamma3`; the three-stage one inserts `gamma2` on `(t1, t2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageComparison {
    /// `<H(gamma3)>` just after the last quench, two-stage schedule.
    pub energy_two: f64,
    pub energy_three: f64,
    pub hp_t1: f64,
    pub hp_t2: f64,
    /// `energy_three - energy_two`.
    pub difference: f64,
    /// Fluctuation width of `<H_p>` over the middle stage.
    pub sigma: f64,
    /// `(gamma3 - gamma2) * 3 sigma`.
    pub tolerance: f64,
    /// Long-time `<H_p>` at `gamma3` for each schedule.
    pub steady_two: f64,
    pub steady_three: f64,
}

impl StageComparison {
    pub fn three_not_worse(&self) -> bool {
        self.difference <= self.tolerance
    }
}

/// Matched-endpoint comparison of a two-stage and a three-stage walk.
/// Energies are conserved after the final quench, so they are read off at
/// the quench instant. `samples` points resolve the middle stage.
pub fn stage_comparison(
    problem: &IsingProblem,
    driver: DriverSpec,
    gammas: [f64; 3],
    t1: f64,
    t2: f64,
    samples: usize,
) -> Result<StageComparison> {
    let [g1, g2, g3] = gammas;
    if !(g1 < g2 && g2 < g3) || !(0.0 < t1 && t1 < t2) || samples < 2 {
        return Err(invalid(
            "need gamma1 < gamma2 < gamma3, 0 < t1 < t2 and two samples",
        ));
    }
    let template = HamiltonianSpec::new(1.0, g1, driver, problem)?;
    let psi0 = driver_ground_state(&driver);
    let mut cache = SpectrumCache::default();
    let opts = EvolveOptions::default();
    let first = Drive::new(vec![Schedule::piecewise_constant(
        Channel::Gamma,
        vec![(t1, g1)],
    )?])?;
    let psi1 = evolve_exact(&template, &first, &psi0, &[t1], &opts, &mut cache)?.final_state;
    let middle = Drive::new(vec![Schedule::piecewise_constant(
        Channel::Gamma,
        vec![(t2 - t1, g2)],
    )?])?;
    let grid = uniform_grid(0.0, t2 - t1, samples);
    let part = evolve_exact(&template, &middle, &psi1, &grid, &opts, &mut cache)?;
    let psi2 = part.final_state;
    let stats = window_stats(&grid, &part.hp, 0.2 * (t2 - t1), t2 - t1)?;

    let h3 = template.with_coeffs(1.0, g3);
    let (hp1, _, e_two) = observe(&h3, &psi1);
    let (hp2, _, e_three) = observe(&h3, &psi2);
    let eig3 = cache.get(&h3)?;
    let q = eig3.diagonal_expectations(&problem.energies);
    let steady_two = DiagonalEnsemble::from_state(&psi1, eig3.clone())?.average(&q);
    let steady_three = DiagonalEnsemble::from_state(&psi2, eig3)?.average(&q);
    Ok(StageComparison {
        energy_two: e_two,
        energy_three: e_three,
        hp_t1: hp1,
        hp_t2: hp2,
        difference: e_three - e_two,
        sigma: stats.std,
        tolerance: (g3 - g2) * 3.0 * stats.std,
        steady_two,
        steady_three,
    })
}

// ---------------------------------------------------------------------------
// Warm starts

#[derive(Debug, Clone, PartialEq)]
pub enum WarmStartInitial {
    String(usize),
    /// Classical mixture `(string, weight)`; weights are normalised here.
    Ensemble(Vec<(usize, f64)>),
}

/// Uniform mixture over every string whose energy is below the
/// infinite-temperature mean.
pub fn below_mean_ensemble(problem: &IsingProblem) -> Vec<(usize, f64)> {
    let mean = problem.mean();
    let members: Vec<usize> = (0..problem.dim())
        .filter(|&z| problem.energies[z] < mean)
        .collect();
    let w = 1.0 / members.len().max(1) as f64;
    members.into_iter().map(|z| (z, w)).collect()
}

#[derive(Debug, Clone)]
pub struct WarmStartResult {
    pub hp_initial: f64,
    /// Long-time average of `<H_p>` (diagonal ensemble of `g H_d + H_p`).
    pub hp_time_avg: f64,
    pub hd_initial: f64,
    pub hd_time_avg: f64,
    /// Long-time outcome distribution over distinct `H_p` values, ascending.
    pub distribution: Vec<(f64, f64)>,
    /// Every initial string lies strictly below the mean of `H_p`.
    pub precondition: bool,
    /// `|g (hd_avg - hd_0) - (hp_0 - hp_avg)|`.
    pub conservation_residual: f64,
    /// Sampled trajectory for a single-string start when a grid is given.
    pub trajectory: Option<Trajectory>,
    /// Largest energy-conservation residual along `trajectory`.
    pub trajectory_residual: Option<f64>,
}

impl WarmStartResult {
    /// The walk did not improve on its start (the no-go outcome).
    pub fn heated(&self, tol: f64) -> bool {
        self.hp_time_avg >= self.hp_initial - tol
    }
}

/// Quantum walk under `g H_d + H_p` from a warm start.
pub fn warmstart_ctqw(
    problem: &IsingProblem,
    driver: DriverSpec,
    g: f64,
    initial: &WarmStartInitial,
    grid: &[f64],
) -> Result<WarmStartResult> {
    let d = problem.dim();
    let members: Vec<(usize, f64)> = match initial {
        WarmStartInitial::String(z) => vec![(*z, 1.0)],
        WarmStartInitial::Ensemble(m) => {
            let total: f64 = m.iter().map(|x| x.1).sum();
            if m.is_empty() || !(total > 0.0) || m.iter().any(|x| x.1 < 0.0) {
                return Err(invalid("ensemble weights must be non-negative and sum > 0"));
            }
            m.iter().map(|&(z, w)| (z, w / total)).collect()
        }
    };
    if members.iter().any(|&(z, _)| z >= d) {
        return Err(invalid("initial string out of range"));
    }
    let mean = problem.mean();
    let precondition = members
        .iter()
        .all(|&(z, w)| w == 0.0 || problem.energies[z] < mean);
    if !precondition {
        log::warn!("warm start is not below the mean of H_p; the no-go does not apply");
    }
    let mut p = vec![0.0; d];
    for &(z, w) in &members {
        p[z] += w;
    }
    let h = HamiltonianSpec::new(g, 1.0, driver, problem)?;
    let eig = alloc::sync::Arc::new(h.eig()?);
    let ens = DiagonalEnsemble::from_classical(&p, eig.clone())?;
    let hp_time_avg = ens.average(&eig.diagonal_expectations(&problem.energies));
    let hd_time_avg = ens.average(&eig.driver_expectations(&driver));
    let hp_initial = linalg::dot(&p, &problem.energies);
    let hd_initial = members
        .iter()
        .map(|&(z, w)| w * driver.diagonal_value(z))
        .sum::<f64>();
    let conservation_residual = (g * (hd_time_avg - hd_initial) - (hp_initial - hp_time_avg)).abs();

    // Long-time string probabilities sum_k p_k |<s|k>|^2.
    let mut ps = vec![0.0; d];
    for (k, &pk) in ens.populations.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        for (x, v) in ps.iter_mut().zip(linalg::col(&eig.vectors, k)) {
            *x += pk * v * v;
        }
    }
    let mut levels: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for (z, &x) in ps.iter().enumerate() {
        let e = problem.energies[z];
        let key = (e * 1e9).round() as i64;
        let slot = levels.entry(key).or_insert((e, 0.0));
        slot.1 += x;
    }
    let distribution = levels.into_values().collect();

    let (trajectory, trajectory_residual) = match initial {
        WarmStartInitial::String(z) if !grid.is_empty() => {
            let t_final = grid[grid.len() - 1].max(f64::MIN_POSITIVE);
            let drive = Drive::new(vec![Schedule::piecewise_constant(
                Channel::A,
                vec![(t_final, g)],
            )?])?;
            let mut cache = SpectrumCache::default();
            let traj = evolve_exact(
                &h,
                &drive,
                &basis_state(problem.n, *z),
                grid,
                &EvolveOptions::default(),
                &mut cache,
            )?;
            let res = traj
                .hp
                .iter()
                .zip(&traj.hd)
                .map(|(hp, hd)| (g * (hd - hd_initial) - (hp_initial - hp)).abs())
                .fold(0.0, f64::max);
            (Some(traj), Some(res))
        }
        _ => (None, None),
    };

    Ok(WarmStartResult {
        hp_initial,
        hp_time_avg,
        hd_initial,
        hd_time_avg,
        distribution,
        precondition,
        conservation_residual,
        trajectory,
        trajectory_residual,
    })
}

// ---------------------------------------------------------------------------
// Cyclic processes

/// Square-Gaussian drive `G(t)` of one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleDrive {
    pub amplitude: f64,
    pub t_cycle: f64,
    pub centre: f64,
    pub width: f64,
    pub exponent: f64,
}

impl Default for CycleDrive {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            t_cycle: 10.0,
            centre: 5.0,
            width: 2.0,
            exponent: 4.0,
        }
    }
}

impl CycleDrive {
    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::square_gaussian(
            Channel::G,
            self.amplitude,
            self.centre,
            self.width,
            self.exponent,
            self.t_cycle,
        )
    }
}

/// One cycle of `H_p + H_b + G(t) H_d`, applied lazily.
#[derive(Debug, Clone)]
pub struct CyclicUnitary<'p> {
    template: HamiltonianSpec<'p>,
    drive: Drive,
    opts: EvolveOptions,
    idle: bool,
}

/// Builds the cycle propagator. `G` must vanish at both ends to within
/// `1e-8` of its peak magnitude.
pub fn cyclic_unitary<'p>(
    problem: &'p IsingProblem,
    driver: DriverSpec,
    bias: Option<DriverSpec>,
    schedule: &Schedule,
) -> Result<CyclicUnitary<'p>> {
    if !schedule.channel.on_driver() {
        return Err(invalid("the cycle drive must act on the driver"));
    }
    let tf = schedule.t_final;
    let peak = (0..=2000)
        .map(|i| schedule.value(tf * i as f64 / 2000.0).abs())
        .fold(0.0, f64::max);
    let (start, end) = (schedule.value(0.0), schedule.value(tf));
    if start.abs() > 1e-8 * peak || end.abs() > 1e-8 * peak {
        return Err(Error::NonCyclic { start, end });
    }
    let mut template = HamiltonianSpec::new(0.0, 1.0, driver, problem)?;
    if let Some(b) = bias {
        template = template.with_bias(b)?;
    }
    Ok(CyclicUnitary {
        template,
        drive: Drive::new(vec![schedule.clone()])?,
        opts: EvolveOptions {
            method: Method::Integrator,
            ..EvolveOptions::default()
        },
        idle: peak == 0.0,
    })
}

impl<'p> CyclicUnitary<'p> {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.opts.rtol = rtol;
        self.opts.atol = atol;
        // Norm drift of the integrator grows with the local tolerance.
        self.opts.norm_guard = (1e4 * rtol).max(1e-8);
        self
    }

    pub fn dim(&self) -> usize {
        self.template.dim()
    }

    pub fn t_cycle(&self) -> f64 {
        self.drive.t_final
    }

    /// The static Hamiltonian at the ends of the cycle, `H_p + H_b`.
    pub fn endpoint_hamiltonian(&self) -> HamiltonianSpec<'p> {
        self.template
    }

    pub fn apply(&self, psi: &[C64]) -> Result<Vec<C64>> {
        if self.idle {
            // G = 0: only the diagonal phases of H_p + H_b.
            let diag = self.template.diagonal();
            let t = self.t_cycle();
            return Ok(psi
                .iter()
                .zip(diag)
                .map(|(a, e)| a * C64::from_polar(1.0, -e * t))
                .collect());
        }
        let traj = evolve(
            &self.template,
            &self.drive,
            psi,
            &[self.t_cycle()],
            &self.opts,
        )?;
        Ok(traj.final_state)
    }

    pub fn apply_basis(&self, z: usize) -> Result<Vec<C64>> {
        if z >= self.dim() {
            return Err(invalid("basis string out of range"));
        }
        self.apply(&basis_state(self.template.n(), z))
    }

    /// Every column `U|s>`.
    pub fn dense(&self) -> Result<DenseUnitary> {
        let n = self.template.n();
        if n > DENSE_UNITARY_CAP {
            return Err(Error::SizeCap {
                n,
                cap: DENSE_UNITARY_CAP,
            });
        }
        let d = self.dim();
        let mut data = Vec::with_capacity(d * d);
        for s in 0..d {
            data.extend(self.apply_basis(s)?);
        }
        Ok(DenseUnitary { dim: d, data })
    }
}

/// Column-major unitary: `data[s * dim + j] = <j|U|s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseUnitary {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl DenseUnitary {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for s in 0..dim {
            data[s * dim + s] = C64::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    pub fn get(&self, j: usize, s: usize) -> C64 {
        self.data[s * self.dim + j]
    }

    pub fn column(&self, s: usize) -> &[C64] {
        &self.data[s * self.dim..(s + 1) * self.dim]
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (s, a) in psi.iter().enumerate() {
            for (o, u) in out.iter_mut().zip(self.column(s)) {
                *o += u * a;
            }
        }
        out
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in a..self.dim {
                let c = linalg::cdot(self.column(a), self.column(b));
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((c - want).norm());
            }
        }
        worst
    }
}

/// `P[j][s] = |<j|U|s>|^2`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub dim: usize,
    pub p: Vec<f64>,
}

pub fn transition_matrix(u: &DenseUnitary) -> Result<TransitionMatrix> {
    if u.dim > 1 << DENSE_UNITARY_CAP {
        return Err(Error::SizeCap {
            n: u.dim.trailing_zeros() as usize,
            cap: DENSE_UNITARY_CAP,
        });
    }
    let d = u.dim;
    let mut p = vec![0.0; d * d];
    for s in 0..d {
        for (j, x) in u.column(s).iter().enumerate() {
            p[j * d + s] = x.norm_sqr();
        }
    }
    Ok(TransitionMatrix { dim: d, p })
}

impl TransitionMatrix {
    pub fn get(&self, j: usize, s: usize) -> f64 {
        self.p[j * self.dim + s]
    }

    /// `max |row sum - 1|, |column sum - 1|`.
    pub fn stochasticity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        let mut cols = vec![0.0; d];
        for j in 0..d {
            let row = &self.p[j * d..(j + 1) * d];
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            for (c, x) in cols.iter_mut().zip(row) {
                *c += x;
            }
        }
        cols.iter().fold(worst, |w, c| w.max((c - 1.0).abs()))
    }

    /// `max |P[j][s] - P[s][j]|`.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.dim {
            for s in 0..j {
                worst = worst.max((self.get(j, s) - self.get(s, j)).abs());
            }
        }
        worst
    }

    /// `P p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|j| linalg::dot(&self.p[j * self.dim..(j + 1) * self.dim], p))
            .collect()
    }

    /// Change of the mean of `values` when `p` is pushed through `P`.
    pub fn mean_shift(&self, values: &[f64], p: &[f64]) -> f64 {
        linalg::dot(values, &self.apply(p)) - linalg::dot(values, p)
    }

    /// `sum_m P[g][m] p_m - p_g`: change of the probability of string `g`.
    pub fn probability_change(&self, p: &[f64], g: usize) -> f64 {
        self.apply(p)[g] - p[g]
    }
}

// ---------------------------------------------------------------------------
// Reverse and biased annealing

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasKind {
    /// `-alpha sum_i (-1)^{z_i} Z_i`.
    Local,
    /// `-alpha |z><z|`.
    Projector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaDirection {
    /// Start from an overshoot and lower the bias on every failed shot.
    Decrease,
    /// Start low and raise it.
    Increase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolMode {
    /// Shots only; one propagation per distinct (input, bias).
    Sampled,
    /// Also materialise the cycle's transition matrix and the exact
    /// post-selected ensemble series (reverse annealing only).
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Shot budget.
    pub k_max: usize,
    /// Consecutive non-improving shots before stopping.
    pub k: usize,
    /// Initial bias; `sqrt(Tr' (H_p - Tr' H_p)^2)` when `None`.
    pub alpha0: Option<f64>,
    /// Bias change per failed shot; `alpha0 / k` when `None`.
    pub alpha_step: Option<f64>,
    pub alpha_direction: AlphaDirection,
    pub reset_alpha_on_accept: bool,
    pub bias: BiasKind,
    pub drive: CycleDrive,
    pub seed: u64,
    pub mode: ProtocolMode,
    /// Dense mode only: stop once `1 / p_suc` of the next stage exceeds this.
    pub psuc_cutoff: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            k_max: 100,
            k: 10,
            alpha0: None,
            alpha_step: None,
            alpha_direction: AlphaDirection::Decrease,
            reset_alpha_on_accept: true,
            bias: BiasKind::Local,
            drive: CycleDrive::default(),
            seed: 0,
            mode: ProtocolMode::Sampled,
            psuc_cutoff: None,
            rtol: 1e-7,
            atol: 1e-9,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k_max < self.k {
            return Err(invalid("need k_max >= k >= 1"));
        }
        if self.alpha0.is_some_and(|a| !(a >= 0.0)) {
            return Err(invalid("alpha0 must be non-negative"));
        }
        if self.alpha_step.is_some_and(|a| !(a >= 0.0)) {
            return Err(invalid("alpha step must be non-negative"));
        }
        if self.psuc_cutoff.is_some_and(|c| !(c >= 1.0)) {
            return Err(invalid("the 1/p_suc cutoff must be at least 1"));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Default bias scale: the standard deviation of the problem spectrum.
pub fn default_alpha0(problem: &IsingProblem) -> f64 {
    problem.central_moment(2).sqrt()
}

/// Uniform distribution on strings strictly below the mean of `H_p`.
pub fn uniform_below_mean(problem: &IsingProblem) -> Vec<f64> {
    let mut p = vec![0.0; problem.dim()];
    for (z, w) in below_mean_ensemble(problem) {
        p[z] = w;
    }
    p
}

/// Draws uniform strings until one lies strictly below the mean.
pub fn random_initial_string(problem: &IsingProblem, rng: &mut rng::Rng) -> Result<usize> {
    let mean = problem.mean();
    if !problem.energies.iter().any(|&e| e < mean) {
        return Err(invalid("no string lies below the mean"));
    }
    loop {
        let z = rng.random_range(0..problem.dim());
        if problem.energies[z] < mean {
            return Ok(z);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord {
    pub shot_index: usize,
    pub input: usize,
    pub output: usize,
    pub hp_in: f64,
    pub hp_out: f64,
    pub alpha: f64,
    pub accepted: bool,
    /// `<H_p + H_b>` after the cycle minus before it.
    pub work: f64,
    /// `<H_p>` of the post-cycle state before measurement.
    pub hp_mean_out: f64,
}

impl ShotRecord {
    /// The cycle raised `<H_p>` above the post-selected input.
    pub fn heated(&self) -> bool {
        self.hp_mean_out > self.hp_in
    }
}

/// Exact ensemble bookkeeping for one stage of reverse annealing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStage {
    pub stage: usize,
    /// Probability that the cycle lowers the energy.
    pub psuc: f64,
    /// `<H_p>` of the post-selected input to the stage.
    pub hp_in: f64,
    /// `<H_p>` after the cycle, before post-selection.
    pub hp_cycled: f64,
    /// `<H_p>` after post-selection.
    pub hp_selected: f64,
    pub sd_in_bits: f64,
    pub sd_cycled_bits: f64,
    pub sd_selected_bits: f64,
}

/// Pushes `p0` through `P` stage by stage, keeping only strictly descending
/// paths. Stops after `stages`, when nothing descends, or when `1 / p_suc`
/// exceeds `cutoff`.
pub fn rqa_ensemble(
    p: &TransitionMatrix,
    energies: &[f64],
    p0: &[f64],
    stages: usize,
    cutoff: Option<f64>,
) -> Result<Vec<EnsembleStage>> {
    let d = p.dim;
    if energies.len() != d || p0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p0.len(),
        });
    }
    let total: f64 = p0.iter().sum();
    if !(total > 0.0) {
        return Err(invalid("initial distribution is empty"));
    }
    let mut w: Vec<f64> = p0.iter().map(|x| x / total).collect();
    let mut out = Vec::new();
    for stage in 1..=stages {
        let mut cycled = vec![0.0; d];
        let mut kept = vec![0.0; d];
        for j in 0..d {
            let row = &p.p[j * d..(j + 1) * d];
            for (s, (&pjs, &ws)) in row.iter().zip(&w).enumerate() {
                let x = pjs * ws;
                cycled[j] += x;
                if energies[j] < energies[s] {
                    kept[j] += x;
                }
            }
        }
        let psuc: f64 = kept.iter().sum();
        let norm_cycled: f64 = cycled.iter().sum();
        let cycled: Vec<f64> = cycled.iter().map(|x| x / norm_cycled).collect();
        let (hp_selected, sd_selected_bits) = if psuc > 0.0 {
            let sel: Vec<f64> = kept.iter().map(|x| x / psuc).collect();
            (linalg::dot(energies, &sel), diagonal_entropy_bits(&sel)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        out.push(EnsembleStage {
            stage,
            psuc,
            hp_in: linalg::dot(energies, &w),
            hp_cycled: linalg::dot(energies, &cycled),
            hp_selected,
            sd_in_bits: diagonal_entropy_bits(&w)?,
            sd_cycled_bits: diagonal_entropy_bits(&cycled)?,
            sd_selected_bits,
        });
        if !(psuc > 0.0) || cutoff.is_some_and(|c| 1.0 / psuc > c) {
            break;
        }
        w = kept.iter().map(|x| x / psuc).collect();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Rqa,
    Bqa,
}

#[derive(Debug, Clone)]
pub struct ShotLog {
    pub protocol: Protocol,
    pub initial: usize,
    pub shots: Vec<ShotRecord>,
    pub best: usize,
    pub best_hp: f64,
    pub ground_energy: f64,
    pub found_ground: bool,
    /// `best_hp / ground_energy` (1 at the ground state).
    pub approx_ratio: f64,
    /// Dense-mode ensemble series (reverse annealing only).
    pub ensemble: Option<Vec<EnsembleStage>>,
    pub precondition: bool,
    /// Bias after the last shot.
    pub final_alpha: f64,
}

impl ShotLog {
    pub fn shots_used(&self) -> usize {
        self.shots.len()
    }

    /// `(heated shots, all shots)`.
    pub fn heating_count(&self) -> (usize, usize) {
        (
            self.shots.iter().filter(|s| s.heated()).count(),
            self.shots.len(),
        )
    }
}

fn bias_for(n: usize, kind: BiasKind, z: usize, alpha: f64) -> Result<DriverSpec> {
    match kind {
        BiasKind::Local => DriverSpec::biased_local(n, z, alpha),
        BiasKind::Projector => DriverSpec::projector_bias(n, z, alpha),
    }
}

/// Outcome of one cycle from a basis string.
struct CycleOutcome {
    probs: Vec<f64>,
    work: f64,
    hp_mean: f64,
}

fn run_cycle(u: &CyclicUnitary, z: usize) -> Result<CycleOutcome> {
    let psi = u.apply_basis(z)?;
    outcome_of(u, z, &psi)
}

fn outcome_of(u: &CyclicUnitary, z: usize, psi: &[C64]) -> Result<CycleOutcome> {
    let h = u.endpoint_hamiltonian();
    let (hp_mean, _, e_out) = observe(&h, psi);
    let e_in = h.diagonal()[z];
    let probs = psi.iter().map(|a| a.norm_sqr()).collect();
    Ok(CycleOutcome {
        probs,
        work: e_out - e_in,
        hp_mean,
    })
}

fn sample(probs: &[f64], rng: &mut rng::Rng) -> Result<usize> {
    let dist =
        WeightedIndex::new(probs).map_err(|e| invalid(format!("bad output distribution: {e}")))?;
    Ok(dist.sample(rng))
}

fn finish(
    protocol: Protocol,
    problem: &IsingProblem,
    initial: usize,
    shots: Vec<ShotRecord>,
    best: usize,
    ensemble: Option<Vec<EnsembleStage>>,
    precondition: bool,
    final_alpha: f64,
) -> ShotLog {
    let ground_energy = problem.ground_state_energy();
    let best_hp = problem.energies[best];
    let scale = problem.central_moment(2).sqrt().max(1.0);
    let found_ground = best_hp <= ground_energy + 1e-9 * scale;
    let approx_ratio = if ground_energy == 0.0 {
        if best_hp == 0.0 {
            1.0
        } else {
            f64::NAN
        }
    } else {
        best_hp / ground_energy
    };
    ShotLog {
        protocol,
        initial,
        shots,
        best,
        best_hp,
        ground_energy,
        found_ground,
        approx_ratio,
        ensemble,
        precondition,
        final_alpha,
    }
}

const PURPOSE_INITIAL: u64 = 1;
const PURPOSE_SHOTS: u64 = 2;

/// Reverse annealing: cycle the current best string, keep strict
/// improvements, stop after `k` consecutive failures or `k_max` shots.
/// The first input is drawn from `initial` (a distribution over strings).
pub fn rqa_run(
    problem: &IsingProblem,
    driver: DriverSpec,
    config: &ProtocolConfig,
    initial: &[f64],
) -> Result<ShotLog> {
    config.validate()?;
    let d = problem.dim();
    if initial.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: initial.len(),
        });
    }
    let start = sample(initial, &mut rng::substream(config.seed, PURPOSE_INITIAL))?;
    let mut shots_rng = rng::substream(config.seed, PURPOSE_SHOTS);
    let u = cyclic_unitary(problem, driver, None, &config.drive.schedule()?)?
        .with_tolerances(config.rtol, config.atol);

    let (dense, ensemble) = match config.mode {
        ProtocolMode::Sampled => (None, None),
        ProtocolMode::Dense => {
            let du = u.dense()?;
            let tm = transition_matrix(&du)?;
            let ens = rqa_ensemble(&tm, &problem.energies, initial, config.k_max, None)?;
            (Some(du), Some(ens))
        }
    };
    let mut cache: BTreeMap<usize, CycleOutcome> = BTreeMap::new();
    let mut current = start;
    let mut stalls = 0;
    let mut accepts = 0;
    let mut shots = Vec::new();
    while shots.len() < config.k_max && stalls < config.k {
        if let (Some(c), Some(ens)) = (config.psuc_cutoff, ensemble.as_ref()) {
            if ens.get(accepts).is_some_and(|st| 1.0 / st.psuc > c) {
                break;
            }
        }
        if !cache.contains_key(&current) {
            let out = match &dense {
                Some(du) => outcome_of(&u, current, du.column(current))?,
                None => run_cycle(&u, current)?,
            };
            cache.insert(current, out);
        }
        let out = &cache[&current];
        let j = sample(&out.probs, &mut shots_rng)?;
        let (hp_in, hp_out) = (problem.energies[current], problem.energies[j]);
        let accepted = hp_out < hp_in;
        shots.push(ShotRecord {
            shot_index: shots.len(),
            input: current,
            output: j,
            hp_in,
            hp_out,
            alpha: 0.0,
            accepted,
            work: out.work,
            hp_mean_out: out.hp_mean,
        });
        if accepted {
            current = j;
            stalls = 0;
            accepts += 1;
        } else {
            stalls += 1;
        }
    }
    let precondition = problem.energies[start] < problem.mean();
    Ok(finish(
        Protocol::Rqa,
        problem,
        start,
        shots,
        current,
        ensemble,
        precondition,
        0.0,
    ))
}

/// Biased annealing: as [`rqa_run`] but each cycle carries a bias whose
/// ground state is the current best string. The bias strength follows the
/// configured direction on every failed shot (clamped at zero) and resets
/// to `alpha0` on acceptance unless disabled.
pub fn bqa_run(
    problem: &IsingProblem,
    driver: DriverSpec,
    config: &ProtocolConfig,
    initial: usize,
) -> Result<ShotLog> {
    config.validate()?;
    if initial >= problem.dim() {
        return Err(invalid("initial string out of range"));
    }
    if problem.energies[initial] >= problem.mean() {
        return Err(invalid(
            "biased annealing needs a start strictly below the mean of H_p",
        ));
    }
    if config.alpha_direction == AlphaDirection::Increase {
        log::warn!(
            "bias strength increases on failure: deviating from the numerically tested rule"
        );
    }
    let n = problem.n;
    let alpha0 = config.alpha0.unwrap_or_else(|| default_alpha0(problem));
    let step = config.alpha_step.unwrap_or(alpha0 / config.k as f64);
    let schedule = config.drive.schedule()?;
    let mut shots_rng = rng::substream(config.seed, PURPOSE_SHOTS);
    let mut current = initial;
    let mut alpha = alpha0;
    let mut stalls = 0;
    let mut shots = Vec::new();
    while shots.len() < config.k_max && stalls < config.k {
        let bias = bias_for(n, config.bias, current, alpha)?;
        let u = cyclic_unitary(problem, driver, Some(bias), &schedule)?
            .with_tolerances(config.rtol, config.atol);
        let out = run_cycle(&u, current)?;
        let j = sample(&out.probs, &mut shots_rng)?;
        let (hp_in, hp_out) = (problem.energies[current], problem.energies[j]);
        let accepted = hp_out < hp_in;
        shots.push(ShotRecord {
            shot_index: shots.len(),
            input: current,
            output: j,
            hp_in,
            hp_out,
            alpha,
            accepted,
            work: out.work,
            hp_mean_out: out.hp_mean,
        });
        if accepted {
            current = j;
            stalls = 0;
            if config.reset_alpha_on_accept {
                alpha = alpha0;
            }
        } else {
            stalls += 1;
            alpha = match config.alpha_direction {
                AlphaDirection::Decrease => alpha - step,
                AlphaDirection::Increase => alpha + step,
            };
            // Rounding of alpha0 - k * (alpha0 / k) leaves a residue of either sign.
            if alpha < -1e-9 * alpha0.max(1.0) {
                log::warn!("bias strength {alpha} clamped to zero");
            }
            if alpha < 1e-12 * alpha0 {
                alpha = 0.0;
            }
        }
    }
    Ok(finish(
        Protocol::Bqa,
        problem,
        initial,
        shots,
        current,
        None,
        true,
        alpha,
    ))
}

// ---------------------------------------------------------------------------
// Two-register entropy bookkeeping

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyLedger {
    /// Entropy of the input distribution.
    pub s0: f64,
    /// Diagonal entropy of the joint state in the product computational basis.
    pub sd_joint: f64,
    /// Diagonal entropy of the processed register's marginal.
    pub sd_q: f64,
    /// Diagonal entropy of the record register's marginal.
    pub sd_c: f64,
}

/// Entropies of `sum_z p_z U_z|z><z|U_z^dagger (x) |z><z|`. `cycle(z)` returns
/// `U_z|z>`; it is only called for strings with `p_z > 0`, and each output is
/// renormalised so the block structure holds to rounding.
pub fn entropy_accounting<F>(p: &[f64], mut cycle: F) -> Result<EntropyLedger>
where
    F: FnMut(usize) -> Result<Vec<C64>>,
{
    let d = p.len();
    if !d.is_power_of_two() || d.trailing_zeros() as usize > MAX_QUBITS {
        return Err(invalid(
            "distribution length must be 2^n with n within the cap",
        ));
    }
    let total: f64 = p.iter().sum();
    if !((total - 1.0).abs() < 1e-9) || p.iter().any(|&x| x < 0.0) {
        return Err(invalid("input is not a probability distribution"));
    }
    let mut q_marginal = vec![0.0; d];
    let mut c_marginal = vec![0.0; d];
    let mut sd_joint = 0.0;
    for (z, &pz) in p.iter().enumerate() {
        if pz == 0.0 {
            continue;
        }
        let out = cycle(z)?;
        if out.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: out.len(),
            });
        }
        let nrm2 = linalg::norm_sqr(&out);
        for (j, a) in out.iter().enumerate() {
            let x = pz * a.norm_sqr() / nrm2;
            if x > 0.0 {
                sd_joint -= x * x.ln();
            }
            q_marginal[j] += x;
            c_marginal[z] += x;
        }
    }
    Ok(EntropyLedger {
        s0: diagonal_entropy(p)?,
        sd_joint,
        sd_q: diagonal_entropy(&q_marginal)?,
        sd_c: diagonal_entropy(&c_marginal)?,
    })
}

/// Per-string cycles of biased annealing: `U_z` carries the bias whose
/// ground state is `z`.
pub fn biased_cycle_family<'p>(
    problem: &'p IsingProblem,
    driver: DriverSpec,
    config: &ProtocolConfig,
    alpha: f64,
) -> impl FnMut(usize) -> Result<Vec<C64>> + 'p {
    let cfg = *config;
    move |z| {
        let bias = bias_for(problem.n, cfg.bias, z, alpha)?;
        cyclic_unitary(problem, driver, Some(bias), &cfg.drive.schedule()?)?
            .with_tolerances(cfg.rtol, cfg.atol)
            .apply_basis(z)
    }
}

// ---------------------------------------------------------------------------
// Passive states under monotone ramps

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PassiveInitial {
    /// Ground state of `H(t_0)` (spread evenly over a degenerate level).
    Ground,
    /// Gibbs state of `H(t_0)` at this inverse temperature.
    Gibbs(f64),
}

#[derive(Debug, Clone)]
pub struct PassivityRun {
    pub times: Vec<f64>,
    pub hp: Vec<f64>,
    pub hp0: f64,
    /// `max_t <H_p(t)> - <H_p(t_0)>`.
    pub max_excess: f64,
    /// Temporal standard deviation of `<H_p(t)>` over the run.
    pub sigma: f64,
    pub initial_passive: bool,
}

impl PassivityRun {
    pub fn within(&self, nsigma: f64) -> bool {
        self.max_excess <= nsigma * self.sigma
    }
}

/// Mixed-state evolution of a passive state of `H(t_0) = H_d + gamma(0) H_p`
/// under `H_d + gamma(t) H_p` for a monotone piecewise-constant `gamma`.
/// The density matrix is carried in each segment's eigenbasis.
pub fn passivity_ramp(
    problem: &IsingProblem,
    driver: DriverSpec,
    ramp: &Schedule,
    initial: PassiveInitial,
    grid: &[f64],
) -> Result<PassivityRun> {
    problem_side(ramp)?;
    if !ramp.is_piecewise_constant() || !ramp.is_monotone_nondecreasing() {
        return Err(invalid("ramp must be monotone and piecewise constant"));
    }
    if grid.windows(2).any(|w| w[1] < w[0])
        || grid.first().is_some_and(|&t| t < 0.0)
        || grid
            .last()
            .is_some_and(|&t| t > ramp.t_final * (1.0 + 1e-12))
    {
        return Err(invalid("grid must be ascending within the ramp"));
    }
    let template = HamiltonianSpec::new(1.0, 1.0, driver, problem)?;
    let drive = Drive::new(vec![ramp.clone()])?;
    let mut cache = SpectrumCache::default();
    let (a0, g0) = drive.coeffs(0.0);
    let eig0 = cache.get(&template.with_coeffs(a0, g0))?;
    let d = eig0.dim();
    let weights = match initial {
        PassiveInitial::Gibbs(beta) => {
            if !(beta >= 0.0) {
                return Err(invalid("beta must be non-negative"));
            }
            gibbs_weights(&eig0.values, beta)
        }
        PassiveInitial::Ground => {
            let e0 = eig0.values[0];
            let width = (eig0.values[d - 1] - e0).max(1.0);
            let m = eig0
                .values
                .iter()
                .take_while(|&&e| e - e0 <= 1e-9 * width)
                .count();
            (0..d)
                .map(|k| if k < m { 1.0 / m as f64 } else { 0.0 })
                .collect()
        }
    };
    let initial_passive = is_passive(&weights, &eig0.values)?;

    // rho in the current eigenbasis, as real and imaginary parts.
    let mut re = Mat::<f64>::from_fn(d, d, |i, j| if i == j { weights[i] } else { 0.0 });
    let mut im = Mat::<f64>::zeros(d, d);
    let mut basis = eig0.clone();
    let hp0 = linalg::dot(&weights, &eig0.diagonal_expectations(&problem.energies));
    let mut times = Vec::with_capacity(grid.len());
    let mut hp = Vec::with_capacity(grid.len());
    let mut gi = 0;
    let segments = drive.segments();
    for (si, &(s0, s1)) in segments.iter().enumerate() {
        let (a, g) = drive.coeffs_right(s0);
        let eig = cache.get(&template.with_coeffs(a, g))?;
        if !alloc::sync::Arc::ptr_eq(&eig, &basis) {
            // Change of basis W = V_old^T V_new; rho' = W^T rho W.
            let w = basis.vectors.transpose() * &eig.vectors;
            re = w.transpose() * &re * &w;
            im = w.transpose() * &im * &w;
            basis = eig.clone();
        }
        let last = si + 1 == segments.len();
        let mut q: Option<Mat<f64>> = None;
        while gi < grid.len() && (last || grid[gi] <= s1) {
            let tau = grid[gi] - s0;
            let q = q.get_or_insert_with(|| {
                let mut scaled = basis.vectors.clone();
                for i in 0..d {
                    for k in 0..d {
                        scaled[(i, k)] *= problem.energies[i];
                    }
                }
                basis.vectors.transpose() * &scaled
            });
            let mut acc = 0.0;
            for l in 0..d {
                for k in 0..d {
                    let (s, c) = ((basis.values[k] - basis.values[l]) * tau).sin_cos();
                    acc += q[(l, k)] * (re[(k, l)] * c + im[(k, l)] * s);
                }
            }
            times.push(grid[gi]);
            hp.push(acc);
            gi += 1;
        }
        // Advance to the end of the segment: rho_kl *= exp(-i (E_k - E_l) dt).
        let dt = s1 - s0;
        for l in 0..d {
            for k in 0..d {
                let (s, c) = ((basis.values[k] - basis.values[l]) * dt).sin_cos();
                let (x, y) = (re[(k, l)], im[(k, l)]);
                re[(k, l)] = x * c + y * s;
                im[(k, l)] = y * c - x * s;
            }
        }
    }
    let max_excess = hp.iter().map(|h| h - hp0).fold(f64::NEG_INFINITY, f64::max);
    let sigma = if hp.len() > 1 {
        let m = hp.iter().sum::<f64>() / hp.len() as f64;
        (hp.iter().map(|h| (h - m) * (h - m)).sum::<f64>() / hp.len() as f64).sqrt()
    } else {
        0.0
    };
    Ok(PassivityRun {
        times,
        hp,
        hp0,
        max_excess,
        sigma,
        initial_passive,
    })
}
