//! Diagonal ensembles, Gibbs states, temperature fitting, work and passivity.

use alloc::sync::Arc;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::operators::{Eigensystem, HamiltonianSpec};
use crate::problems::IsingProblem;
use crate::{linalg, C64};

/// `-sum p ln p`, with `0 ln 0 = 0`.
pub fn diagonal_entropy(p: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &x in p {
        if x < 0.0 {
            return Err(invalid("negative probability"));
        }
        if x > 0.0 {
            s -= x * x.ln();
        }
    }
    Ok(s)
}

/// Diagonal entropy in bits.
pub fn diagonal_entropy_bits(p: &[f64]) -> Result<f64> {
    Ok(diagonal_entropy(p)? / core::f64::consts::LN_2)
}

/// Populations of a state in an energy eigenbasis.
#[derive(Debug, Clone)]
pub struct DiagonalEnsemble {
    pub populations: Vec<f64>,
    pub basis: Arc<Eigensystem>,
    pub energy: f64,
}

impl DiagonalEnsemble {
    pub fn from_state(psi: &[C64], basis: Arc<Eigensystem>) -> Result<Self> {
        if psi.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: psi.len(),
            });
        }
        let populations = basis.populations(psi);
        let energy = linalg::dot(&populations, &basis.values);
        Ok(Self {
            populations,
            basis,
            energy,
        })
    }

    /// Ensemble of a classical mixture `sum_z p_z |z><z|`.
    pub fn from_classical(p: &[f64], basis: Arc<Eigensystem>) -> Result<Self> {
        if p.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: p.len(),
            });
        }
        let populations = basis.diagonal_expectations(p);
        let energy = linalg::dot(&populations, &basis.values);
        Ok(Self {
            populations,
            basis,
            energy,
        })
    }

    pub fn entropy(&self) -> f64 {
        diagonal_entropy(&self.populations).unwrap_or(f64::NAN)
    }

    /// Long-time average of an observable, given its eigenbasis diagonal.
    pub fn average(&self, diag: &[f64]) -> f64 {
        linalg::dot(&self.populations, diag)
    }
}

pub fn diagonal_ensemble(psi: &[C64], h: &HamiltonianSpec) -> Result<DiagonalEnsemble> {
    DiagonalEnsemble::from_state(psi, Arc::new(h.eig()?))
}

/// `<E_k|A|E_k>` for every eigenvector of `basis`.
pub fn eigen_expectations(basis: &Eigensystem, a: &HamiltonianSpec) -> Vec<f64> {
    let mut out = basis.diagonal_expectations(&a.problem.energies);
    out.iter_mut().for_each(|x| *x *= a.b);
    if a.a != 0.0 {
        for (o, d) in out.iter_mut().zip(basis.driver_expectations(&a.driver)) {
            *o += a.a * d;
        }
    }
    if let Some(bias) = &a.bias {
        let t = bias.diagonal_table().unwrap_or_default();
        for (o, d) in out.iter_mut().zip(basis.diagonal_expectations(&t)) {
            *o += d;
        }
    }
    out
}

/// Steady-state value `sum_k p_k <E_k|A|E_k>`.
pub fn steady_expectation(ens: &DiagonalEnsemble, observable: &HamiltonianSpec) -> Result<f64> {
    if observable.dim() != ens.basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: ens.basis.dim(),
            got: observable.dim(),
        });
    }
    Ok(ens.average(&eigen_expectations(&ens.basis, observable)))
}

/// `ln sum_k exp(-beta E_k)`, stabilised by shifting to the ground energy.
pub fn log_partition(values: &[f64], beta: f64) -> f64 {
    let e0 = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    s.ln() - beta * e0
}

/// Normalised Boltzmann weights.
pub fn gibbs_weights(values: &[f64], beta: f64) -> Vec<f64> {
    let e0 = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = values.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// Thermal mean and variance of the spectrum.
pub fn thermal_moments(values: &[f64], beta: f64) -> (f64, f64) {
    let w = gibbs_weights(values, beta);
    let mean = linalg::dot(&w, values);
    let var = w
        .iter()
        .zip(values)
        .map(|(p, e)| p * (e - mean) * (e - mean))
        .sum();
    (mean, var)
}

pub fn thermal_energy(values: &[f64], beta: f64) -> f64 {
    thermal_moments(values, beta).0
}

/// Largest inverse temperature tried, in units of `1 / width`.
pub const BETA_CAP: f64 = 1e4;
/// Initial upper bracket, in units of `1 / width`.
pub const BETA_BRACKET: f64 = 50.0;

/// Solves `<H>_beta = energy` for `beta >= 0`.
pub fn fit_beta(values: &[f64], energy: f64) -> Result<f64> {
    fit_beta_from(values, energy, None)
}

/// [`fit_beta`] warm-started from a previous solution.
pub fn fit_beta_from(values: &[f64], energy: f64, guess: Option<f64>) -> Result<f64> {
    let lo_e = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_e = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi_e - lo_e;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let tol = 1e-10 * width.max(f64::MIN_POSITIVE);
    if !energy.is_finite() {
        return Err(invalid("energy is not finite"));
    }
    if width == 0.0 || (energy - mean).abs() <= tol {
        if energy > mean + tol {
            return Err(Error::NegativeTemperature { energy, mean });
        }
        return Ok(0.0);
    }
    if energy > mean {
        return Err(Error::NegativeTemperature { energy, mean });
    }
    if energy <= lo_e {
        return Err(Error::BelowGroundState {
            energy,
            ground: lo_e,
        });
    }
    solve_decreasing(|b| thermal_moments(values, b), energy, width, guess).ok_or(
        Error::BelowGroundState {
            energy,
            ground: lo_e,
        },
    )
}

/// Safeguarded Newton on a strictly decreasing `E(beta)` with `E'(beta) =
/// -var`. Returns `None` if `target` is below `E(BETA_CAP / width)`.
pub(crate) fn solve_decreasing(
    mut eval: impl FnMut(f64) -> (f64, f64),
    target: f64,
    width: f64,
    guess: Option<f64>,
) -> Option<f64> {
    // Tighter than the 1e-10 contract so round trips in beta stay accurate.
    let tol = 1e-13 * width;
    let mut lo = 0.0;
    let mut hi = BETA_BRACKET / width;
    loop {
        let (e, _) = eval(hi);
        if e <= target {
            break;
        }
        lo = hi;
        if hi >= BETA_CAP / width {
            return None;
        }
        hi = (hi * 2.0).min(BETA_CAP / width);
    }
    let mut b = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => 0.5 * (lo + hi),
    };
    for _ in 0..200 {
        let (e, var) = eval(b);
        let f = e - target;
        if f.abs() <= tol {
            // One more Newton step squares the residual, which keeps
            // quantities derived from beta smooth in the target energy.
            let polished = b + f / var;
            return Some(if var > 0.0 && polished > lo && polished < hi {
                polished
            } else {
                b
            });
        }
        if f > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let newton = if var > 0.0 { b + f / var } else { f64::NAN };
        b = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Some(b);
        }
    }
    Some(b)
}

/// A Gibbs state over a fixed spectrum.
#[derive(Debug, Clone)]
pub struct GibbsModel {
    pub beta: f64,
    pub basis: Arc<Eigensystem>,
    pub log_z: f64,
    pub weights: Vec<f64>,
}

impl GibbsModel {
    pub fn new(basis: Arc<Eigensystem>, beta: f64) -> Self {
        let log_z = log_partition(&basis.values, beta);
        let weights = gibbs_weights(&basis.values, beta);
        Self {
            beta,
            basis,
            log_z,
            weights,
        }
    }

    pub fn energy(&self) -> f64 {
        linalg::dot(&self.weights, &self.basis.values)
    }

    /// `ln Z + beta E`.
    pub fn entropy(&self) -> f64 {
        self.log_z + self.beta * self.energy()
    }

    pub fn average(&self, diag: &[f64]) -> f64 {
        linalg::dot(&self.weights, diag)
    }
}

pub fn gibbs_expectation(model: &GibbsModel, observable: &HamiltonianSpec) -> Result<f64> {
    if observable.dim() != model.basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.basis.dim(),
            got: observable.dim(),
        });
    }
    Ok(model.average(&eigen_expectations(&model.basis, observable)))
}

/// Energy-matched thermal prediction `(beta, <A>_beta)` for a diagonal
/// observable given by its eigenbasis expectations.
pub fn eth_prediction(basis: &Eigensystem, energy: f64, diag: &[f64]) -> Result<(f64, f64)> {
    let beta = fit_beta(&basis.values, energy)?;
    Ok((beta, linalg::dot(&gibbs_weights(&basis.values, beta), diag)))
}

/// A mixed state as weighted pure states.
pub type Mixture = [(f64, Vec<C64>)];

pub fn mixture_energy(h: &HamiltonianSpec, rho: &Mixture) -> Result<f64> {
    let mut e = 0.0;
    for (p, psi) in rho {
        e += p * h.expectation(psi)?;
    }
    Ok(e)
}

/// `Tr[H (rho_i - rho_f)]`.
pub fn extractable_work(
    h: &HamiltonianSpec,
    rho_initial: &Mixture,
    rho_final: &Mixture,
) -> Result<f64> {
    Ok(mixture_energy(h, rho_initial)? - mixture_energy(h, rho_final)?)
}

/// `sum_k E_k (p_k - q_k)` for populations over one spectrum.
pub fn work_from_populations(values: &[f64], initial: &[f64], fin: &[f64]) -> f64 {
    values
        .iter()
        .zip(initial)
        .zip(fin)
        .map(|((e, p), q)| e * (p - q))
        .sum()
}

/// Work extracted when a cyclic unitary `u` (column-major, as from
/// [`linalg::haar_unitary`]) acts on a state diagonal in the eigenbasis of
/// `values` with the given populations: `sum_j E_j (p_j - q_j)` where
/// `q_j = sum_k |U_jk|^2 p_k`.
pub fn cyclic_work(values: &[f64], populations: &[f64], u: &[C64]) -> Result<f64> {
    let d = values.len();
    if populations.len() != d || u.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: populations.len(),
        });
    }
    let mut q = alloc::vec![0.0; d];
    for (k, &pk) in populations.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        for (qj, x) in q.iter_mut().zip(&u[k * d..(k + 1) * d]) {
            *qj += pk * x.norm_sqr();
        }
    }
    Ok(work_from_populations(values, populations, &q))
}

/// Populations non-increasing with energy; members of a degenerate level
/// never constrain each other.
pub fn is_passive(populations: &[f64], spectrum: &[f64]) -> Result<bool> {
    if populations.len() != spectrum.len() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.len(),
            got: populations.len(),
        });
    }
    let width = spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    let etol = 1e-9 * width.max(1.0);
    let mut idx: Vec<usize> = (0..spectrum.len()).collect();
    idx.sort_by(|&i, &j| spectrum[i].total_cmp(&spectrum[j]));
    // Minimum population over all lower levels seen so far.
    let mut floor = f64::INFINITY;
    let mut k = 0;
    while k < idx.len() {
        let e = spectrum[idx[k]];
        let mut end = k;
        let (mut lmin, mut lmax) = (f64::INFINITY, f64::NEG_INFINITY);
        while end < idx.len() && spectrum[idx[end]] - e <= etol {
            let p = populations[idx[end]];
            lmin = lmin.min(p);
            lmax = lmax.max(p);
            end += 1;
        }
        if lmax > floor + 1e-12 {
            return Ok(false);
        }
        floor = floor.min(lmin);
        k = end;
    }
    Ok(true)
}

/// Fixed-temperature sweep of `H_d + gamma H_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSweep {
    pub gammas: Vec<f64>,
    pub hp: Vec<f64>,
    /// `-ln Z / beta` at each gamma; empty when `beta = 0`.
    pub free_energy: Vec<f64>,
    /// Second differences of the free energy at interior grid points.
    pub d2_free_energy: Vec<f64>,
}

pub fn gibbs_hp_sweep(
    problem: &IsingProblem,
    driver: &crate::operators::DriverSpec,
    beta: f64,
    gammas: &[f64],
) -> Result<GibbsSweep> {
    if !(beta >= 0.0) {
        return Err(invalid("beta must be non-negative"));
    }
    let mut hp = Vec::with_capacity(gammas.len());
    let mut free_energy = Vec::new();
    for &g in gammas {
        let h = HamiltonianSpec::new(1.0, g, *driver, problem)?;
        let eig = h.eig()?;
        let q = eig.diagonal_expectations(&problem.energies);
        hp.push(linalg::dot(&gibbs_weights(&eig.values, beta), &q));
        if beta > 0.0 {
            free_energy.push(-log_partition(&eig.values, beta) / beta);
        }
    }
    let d2_free_energy = if free_energy.len() >= 3 {
        (1..gammas.len() - 1)
            .map(|i| {
                let (h0, h1) = (gammas[i] - gammas[i - 1], gammas[i + 1] - gammas[i]);
                2.0 * (h0 * free_energy[i + 1] - (h0 + h1) * free_energy[i]
                    + h1 * free_energy[i - 1])
                    / (h0 * h1 * (h0 + h1))
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(GibbsSweep {
        gammas: gammas.to_vec(),
        hp,
        free_energy,
        d2_free_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn entropy_cases() {
        assert_eq!(diagonal_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        let u = [0.25; 4];
        assert!((diagonal_entropy(&u).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!((diagonal_entropy(&[0.5, 0.5, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((diagonal_entropy_bits(&[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert!(diagonal_entropy(&[1.1, -0.1]).is_err());
    }

    #[test]
    fn two_level_beta() {
        let v = [-1.0, 1.0];
        let b = fit_beta(&v, -1f64.tanh()).unwrap();
        assert!((b - 1.0).abs() < 1e-9);
        assert_eq!(fit_beta(&v, 0.0).unwrap(), 0.0);
        assert!(matches!(
            fit_beta(&v, 0.5),
            Err(Error::NegativeTemperature { .. })
        ));
        assert!(matches!(
            fit_beta(&v, -1.0),
            Err(Error::BelowGroundState { .. })
        ));
    }

    #[test]
    fn swapped_two_level_work() {
        let w = work_from_populations(&[-1.0, 1.0], &[0.9, 0.1], &[0.1, 0.9]);
        assert!((w + 1.6).abs() < 1e-15);
    }

    #[test]
    fn passivity_cases() {
        let e = [-1.0, 0.0, 1.0];
        assert!(is_passive(&[1.0, 0.0, 0.0], &e).unwrap());
        assert!(is_passive(&gibbs_weights(&e, 0.7), &e).unwrap());
        assert!(!is_passive(&[0.1, 0.9], &[-1.0, 1.0]).unwrap());
        // Ties never violate, whatever the order inside the level.
        assert!(is_passive(&[0.5, 0.1, 0.4], &[0.0, 1.0, 0.0]).unwrap());
        assert!(!is_passive(&[0.2, 0.3, 0.5], &[0.0, 1.0, 1.0]).unwrap());
    }

    #[test]
    fn log_partition_shift_invariance() {
        let v = vec![-3.0, -1.0, 0.5, 2.0];
        let shifted: Vec<f64> = v.iter().map(|x| x + 7.0).collect();
        let b = 0.8;
        assert!((log_partition(&shifted, b) - (log_partition(&v, b) - 7.0 * b)).abs() < 1e-12);
        let (w1, w2) = (gibbs_weights(&v, b), gibbs_weights(&shifted, b));
        for (x, y) in w1.iter().zip(&w2) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
