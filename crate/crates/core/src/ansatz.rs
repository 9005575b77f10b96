//! Closed-form density-of-states models for the thermal annealing equations.
//!
//! Both models only need the first three trace moments of `A H_d + B H_p`,
//! which are polynomials in `(A, B)` (see [`MomentCoefficients`]). For
//! MAX-CUT under a transverse field those polynomials follow from the edge
//! and triangle counts alone, so nothing of size `2^n` is ever built.

use alloc::format;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::dynamics::Drive;
use crate::error::{invalid, Error, Result};
use crate::operators::{DriverKind, DriverSpec, MomentCoefficients};
use crate::problems::{Family, IsingProblem};
use crate::pstqa::{pstqa_solve, PartitionBackend, PstqaOptions, PstqaTrajectory, ThermalPoint};

/// Moment polynomials of MAX-CUT under a transverse field.
///
/// `Tr' H_p = 0`, `Tr' H_p^2 = kappa2` and `Tr' H_p^3 = 6 kappa3`, while every
/// trace mixing the driver with the problem vanishes.
pub fn maxcut_coefficients(n: usize, kappa2: f64, kappa3: f64) -> MomentCoefficients {
    MomentCoefficients {
        mu_d: 0.0,
        mu_p: 0.0,
        vdd: n as f64,
        vdp: 0.0,
        vpp: kappa2,
        c: [0.0, 0.0, 0.0, 6.0 * kappa3],
    }
}

/// Analytic moments where the problem allows it, dense traces otherwise.
pub fn coefficients_for(problem: &IsingProblem, driver: &DriverSpec) -> MomentCoefficients {
    match (problem.family, &driver.kind, problem.kappa3) {
        (Family::MaxCut, DriverKind::TransverseField, Some(k3)) => {
            maxcut_coefficients(problem.n, problem.kappa2, k3)
        }
        _ => MomentCoefficients::new(driver, problem),
    }
}

/// Gaussian density of states: `ln Z = ln D - beta mu + beta^2 sigma^2 / 2`.
///
/// The `ln D` constant makes `ln Z + beta E` comparable with the exact
/// backend's diagonal entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel {
    pub coeffs: MomentCoefficients,
    pub log_dim: f64,
}

impl GaussianModel {
    pub fn new(coeffs: MomentCoefficients, n: usize) -> Self {
        Self {
            coeffs,
            log_dim: n as f64 * core::f64::consts::LN_2,
        }
    }

    pub fn for_problem(problem: &IsingProblem, driver: &DriverSpec) -> Self {
        Self::new(coefficients_for(problem, driver), problem.n)
    }

    fn sigma2(&self, a: f64, b: f64) -> Result<f64> {
        let s2 = self.coeffs.sigma2(a, b);
        if !(s2 > 0.0) {
            return Err(Error::Ansatz(format!(
                "spectral variance {s2} at (A, B) = ({a}, {b})"
            )));
        }
        Ok(s2)
    }
}

impl PartitionBackend for GaussianModel {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn log_z(&self, beta: f64, a: f64, b: f64) -> Result<f64> {
        let s2 = self.sigma2(a, b)?;
        Ok(self.log_dim - beta * self.coeffs.mu(a, b) + 0.5 * beta * beta * s2)
    }

    fn thermal(&self, beta: f64, a: f64, b: f64) -> Result<ThermalPoint> {
        let s2 = self.sigma2(a, b)?;
        let c = &self.coeffs;
        let (s2a, s2b) = c.d_sigma2(a, b);
        Ok(ThermalPoint {
            beta,
            log_z: self.log_z(beta, a, b)?,
            energy: c.mu(a, b) - beta * s2,
            hd: c.mu_d - 0.5 * beta * s2a,
            hp: c.mu_p - 0.5 * beta * s2b,
            d_energy: -s2,
            d_hd: -0.5 * s2a,
            d_hp: -0.5 * s2b,
        })
    }

    fn beta_from_energy(&self, energy: f64, a: f64, b: f64, _guess: Option<f64>) -> Result<f64> {
        let s2 = self.sigma2(a, b)?;
        let mean = self.coeffs.mu(a, b);
        let beta = (mean - energy) / s2;
        if beta < -1e-12 * (1.0 / s2.sqrt()) {
            return Err(Error::NegativeTemperature { energy, mean });
        }
        Ok(beta.max(0.0))
    }
}

/// Gaussian thermal trajectory without integration.
///
/// Conservation of `ln Z + beta E` makes `c = (E - mu) / sigma` constant, so
/// `E = mu + c sigma` and `beta = -c / sigma` at every instant.
pub fn gaussian_closed_form(
    model: &GaussianModel,
    drive: &Drive,
    e0: f64,
    grid: &[f64],
) -> Result<PstqaTrajectory> {
    if !drive.jumps().is_empty() {
        return Err(invalid("the closed form needs a continuous schedule"));
    }
    let (a0, b0) = drive.coeffs(0.0);
    let sigma0 = model.sigma2(a0, b0)?.sqrt();
    let c = (e0 - model.coeffs.mu(a0, b0)) / sigma0;
    if c > 0.0 {
        return Err(Error::NegativeTemperature {
            energy: e0,
            mean: model.coeffs.mu(a0, b0),
        });
    }
    let mut traj = PstqaTrajectory {
        backend: "gaussian-closed-form",
        ..PstqaTrajectory::default()
    };
    for &t in grid {
        let (a, b) = drive.coeffs(t);
        let sigma = model.sigma2(a, b)?.sqrt();
        let beta = -c / sigma;
        let p = model.thermal(beta, a, b)?;
        traj.times.push(t);
        traj.s.push(t / drive.t_final);
        traj.a.push(a);
        traj.b.push(b);
        traj.energy.push(model.coeffs.mu(a, b) + c * sigma);
        traj.beta.push(beta);
        traj.hd.push(p.hd);
        traj.hp.push(p.hp);
        traj.log_z.push(p.log_z);
        traj.sd
            .push(p.log_z + beta * (model.coeffs.mu(a, b) + c * sigma));
    }
    Ok(traj)
}

/// `<H_p>` of the Gaussian model for MAX-CUT started in `|+...+>`, the ground
/// state of the driver at `(a0, b0)`.
pub fn maxcut_gaussian_hp(n: usize, kappa2: f64, a0: f64, b0: f64, a: f64, b: f64) -> f64 {
    let nf = n as f64;
    -nf * a0 * b * kappa2
        / ((a0 * a0 * nf + b0 * b0 * kappa2).sqrt() * (a * a * nf + b * b * kappa2).sqrt())
}

/// Exponentially modified Gaussian density of states: a Gaussian of mean
/// `nu = mu - Delta` and variance `s^2 = sigma^2 - Delta^2` convolved with an
/// exponential of mean `Delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmgModel {
    pub coeffs: MomentCoefficients,
    pub log_dim: f64,
}

/// EMG shape at one `(A, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmgParams {
    pub mu: f64,
    pub sigma2: f64,
    pub delta: f64,
}

impl EmgParams {
    pub fn nu(&self) -> f64 {
        self.mu - self.delta
    }

    pub fn s2(&self) -> f64 {
        self.sigma2 - self.delta * self.delta
    }

    /// Energy at inverse temperature `beta`.
    pub fn energy(&self, beta: f64) -> f64 {
        let d = self.delta;
        self.mu - beta * self.sigma2 + beta * beta * d * d * d / (1.0 + beta * d)
    }

    /// Skewness of the density of states.
    pub fn skewness(&self) -> f64 {
        2.0 * self.delta.powi(3) / self.sigma2.powf(1.5)
    }
}

impl EmgModel {
    pub fn new(coeffs: MomentCoefficients, n: usize) -> Self {
        Self {
            coeffs,
            log_dim: n as f64 * core::f64::consts::LN_2,
        }
    }

    pub fn for_problem(problem: &IsingProblem, driver: &DriverSpec) -> Self {
        Self::new(coefficients_for(problem, driver), problem.n)
    }

    pub fn params(&self, a: f64, b: f64) -> Result<EmgParams> {
        let p = EmgParams {
            mu: self.coeffs.mu(a, b),
            sigma2: self.coeffs.sigma2(a, b),
            delta: self.coeffs.delta(a, b),
        };
        if !(p.s2() > 0.0) {
            return Err(Error::Ansatz(format!(
                "skew too large for the variance at (A, B) = ({a}, {b}): Delta^2 = {} >= sigma^2 = {}",
                p.delta * p.delta,
                p.sigma2
            )));
        }
        Ok(p)
    }
}

fn pole(beta: f64, delta: f64) -> Result<f64> {
    let q = 1.0 + beta * delta;
    if !(q > 0.0) {
        return Err(Error::Ansatz(format!(
            "1 + beta Delta = {q} is not positive"
        )));
    }
    Ok(q)
}

/// Inverts the EMG energy relation for `beta`.
///
/// Uses the root of `Delta (sigma^2 - Delta^2) beta^2 + (sigma^2 + Delta x)
/// beta + x = 0`, `x = E - mu`, that tends to the Gaussian value as
/// `Delta -> 0`, written without the cancellation of the textbook form. The
/// other root is tried, with a warning, if the round trip fails.
pub fn emg_beta(p: &EmgParams, energy: f64) -> Result<f64> {
    let (s2, d) = (p.sigma2, p.delta);
    let x = energy - p.mu;
    if !(s2 > 0.0) {
        return Err(Error::Ansatz(format!("variance {s2} is not positive")));
    }
    let width = s2.sqrt();
    if x > 1e-12 * width {
        return Err(Error::NegativeTemperature { energy, mean: p.mu });
    }
    if x >= 0.0 {
        return Ok(0.0);
    }
    if d == 0.0 {
        return Ok(-x / s2);
    }
    if d * d >= s2 {
        return Err(Error::Ansatz(format!(
            "Delta^2 = {} >= sigma^2 = {s2}",
            d * d
        )));
    }
    let lin = s2 + d * x;
    let disc = lin * lin + 4.0 * d * x * (d * d - s2);
    if disc < 0.0 {
        return Err(Error::Ansatz(format!("negative discriminant {disc}")));
    }
    let omega = disc.sqrt();
    let tol = 1e-9 * width;
    let ok =
        |beta: f64| beta >= 0.0 && 1.0 + beta * d > 0.0 && (p.energy(beta) - energy).abs() <= tol;
    let printed = -2.0 * x / (lin + omega);
    if ok(printed) {
        return Ok(printed);
    }
    let other = (-lin - omega) / (2.0 * d * (s2 - d * d));
    if ok(other) {
        log::warn!(
            "EMG beta: printed branch failed the round trip at E = {energy}; using the other root"
        );
        return Ok(other);
    }
    Err(Error::Ansatz(format!(
        "no admissible beta for E = {energy} (mu = {}, sigma^2 = {s2}, Delta = {d})",
        p.mu
    )))
}

/// `(<H_d>, <H_p>)` of the EMG model.
pub fn emg_expectations(model: &EmgModel, a: f64, b: f64, beta: f64) -> Result<(f64, f64)> {
    let t = model.thermal(beta, a, b)?;
    Ok((t.hd, t.hp))
}

impl PartitionBackend for EmgModel {
    fn name(&self) -> &'static str {
        "emg"
    }

    fn log_z(&self, beta: f64, a: f64, b: f64) -> Result<f64> {
        let p = self.params(a, b)?;
        let q = pole(beta, p.delta)?;
        Ok(self.log_dim - q.ln() - p.nu() * beta + 0.5 * beta * beta * p.s2())
    }

    fn thermal(&self, beta: f64, a: f64, b: f64) -> Result<ThermalPoint> {
        let p = self.params(a, b)?;
        let d = p.delta;
        let q = pole(beta, d)?;
        let c = &self.coeffs;
        let (s2a, s2b) = c.d_sigma2(a, b);
        let (da, db) = c.d_delta(a, b);
        let r = beta * d / q;
        let hd = c.mu_d - da * r - beta * (0.5 * s2a - d * da);
        let hp = c.mu_p - db * r - beta * (0.5 * s2b - d * db);
        let dr = d / (q * q);
        Ok(ThermalPoint {
            beta,
            log_z: self.log_z(beta, a, b)?,
            energy: p.energy(beta),
            hd,
            hp,
            d_energy: -p.sigma2 + d * d * d * beta * (2.0 + beta * d) / (q * q),
            d_hd: -da * dr - (0.5 * s2a - d * da),
            d_hp: -db * dr - (0.5 * s2b - d * db),
        })
    }

    fn beta_from_energy(&self, energy: f64, a: f64, b: f64, _guess: Option<f64>) -> Result<f64> {
        emg_beta(&self.params(a, b)?, energy)
    }
}

/// Thermal trajectory under the EMG model of `problem` driven by `driver`.
pub fn emg_pstqa(
    problem: &IsingProblem,
    driver: &DriverSpec,
    drive: &Drive,
    e0: f64,
    grid: &[f64],
    opts: &PstqaOptions,
) -> Result<PstqaTrajectory> {
    pstqa_solve(
        &EmgModel::for_problem(problem, driver),
        drive,
        e0,
        grid,
        opts,
    )
}

/// Gaussian counterpart of [`emg_pstqa`], integrated rather than closed form.
pub fn gaussian_pstqa(
    problem: &IsingProblem,
    driver: &DriverSpec,
    drive: &Drive,
    e0: f64,
    grid: &[f64],
    opts: &PstqaOptions,
) -> Result<PstqaTrajectory> {
    pstqa_solve(
        &GaussianModel::for_problem(problem, driver),
        drive,
        e0,
        grid,
        opts,
    )
}

/// Tabulates `(beta, E)` pairs of an EMG shape, for plotting.
pub fn emg_energy_curve(p: &EmgParams, betas: &[f64]) -> Vec<(f64, f64)> {
    betas.iter().map(|&b| (b, p.energy(b))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_zero_at_the_mean() {
        let p = EmgParams {
            mu: 0.3,
            sigma2: 2.0,
            delta: 0.7,
        };
        assert_eq!(emg_beta(&p, 0.3).unwrap(), 0.0);
        assert!(matches!(
            emg_beta(&p, 0.5),
            Err(Error::NegativeTemperature { .. })
        ));
    }

    #[test]
    fn zero_skew_is_gaussian() {
        let p = EmgParams {
            mu: 0.0,
            sigma2: 4.0,
            delta: 0.0,
        };
        assert_eq!(emg_beta(&p, -2.0).unwrap(), 0.5);
    }

    #[test]
    fn ill_posed_fit_rejected() {
        let p = EmgParams {
            mu: 0.0,
            sigma2: 1.0,
            delta: 1.0,
        };
        assert!(matches!(emg_beta(&p, -0.5), Err(Error::Ansatz(_))));
    }
}
