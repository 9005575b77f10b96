//! Driver, problem and bias Hamiltonians.
//!
//! A composite Hamiltonian is `a * H_d + b * H_p + H_b`, where `H_p` is the
//! diagonal problem table and `H_b` an optional diagonal bias. All matrices
//! are real symmetric in the computational basis.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul};

use faer::Mat;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, SymEig};
use crate::problems::{spin, IsingProblem};
use crate::{C64, MAX_QUBITS};

/// Amplitude types the matrix-free kernels accept.
pub trait Amplitude:
    Copy + Default + Add<Output = Self> + AddAssign + Mul<f64, Output = Self>
{
}
impl Amplitude for f64 {}
impl Amplitude for C64 {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriverKind {
    /// `-sum_i X_i`.
    TransverseField,
    /// Diagonal `-alpha sum_i (-1)^{z*_i} Z_i`, ground state `|z*>`.
    BiasedLocal { pattern: usize, alpha: f64 },
    /// `-alpha |z*><z*|`.
    ProjectorBias { target: usize, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverSpec {
    pub n: usize,
    pub kind: DriverKind,
}

impl DriverSpec {
    pub fn transverse_field(n: usize) -> Self {
        Self {
            n,
            kind: DriverKind::TransverseField,
        }
    }

    pub fn biased_local(n: usize, pattern: usize, alpha: f64) -> Result<Self> {
        check_bias(n, pattern, alpha)?;
        Ok(Self {
            n,
            kind: DriverKind::BiasedLocal { pattern, alpha },
        })
    }

    pub fn projector_bias(n: usize, target: usize, alpha: f64) -> Result<Self> {
        check_bias(n, target, alpha)?;
        Ok(Self {
            n,
            kind: DriverKind::ProjectorBias { target, alpha },
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self.kind, DriverKind::TransverseField)
    }

    /// Diagonal matrix element at `z` (zero for the transverse field).
    pub fn diagonal_value(&self, z: usize) -> f64 {
        match self.kind {
            DriverKind::TransverseField => 0.0,
            DriverKind::BiasedLocal { pattern, alpha } => {
                let mism = ((z ^ pattern) & (self.dim() - 1)).count_ones() as f64;
                -alpha * (self.n as f64 - 2.0 * mism)
            }
            DriverKind::ProjectorBias { target, alpha } => {
                if z == target {
                    -alpha
                } else {
                    0.0
                }
            }
        }
    }

    pub fn diagonal_table(&self) -> Option<Vec<f64>> {
        self.is_diagonal()
            .then(|| (0..self.dim()).map(|z| self.diagonal_value(z)).collect())
    }

    /// `out += coef * H psi`.
    pub fn apply_add<T: Amplitude>(&self, coef: f64, psi: &[T], out: &mut [T]) {
        match self.kind {
            DriverKind::TransverseField => {
                let c = -coef;
                for (z, o) in out.iter_mut().enumerate() {
                    let mut acc = T::default();
                    for i in 0..self.n {
                        acc += psi[z ^ (1 << i)];
                    }
                    *o += acc * c;
                }
            }
            _ => {
                for (z, o) in out.iter_mut().enumerate() {
                    *o += psi[z] * (coef * self.diagonal_value(z));
                }
            }
        }
    }
}

fn check_bias(n: usize, z: usize, alpha: f64) -> Result<()> {
    if z >= 1 << n {
        return Err(invalid("bias bitstring out of range"));
    }
    if !(alpha >= 0.0) {
        return Err(invalid("bias strength must be non-negative"));
    }
    Ok(())
}

/// `a * H_d + b * H_p + H_b`.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianSpec<'p> {
    pub a: f64,
    pub b: f64,
    pub driver: DriverSpec,
    pub problem: &'p IsingProblem,
    pub bias: Option<DriverSpec>,
}

impl<'p> HamiltonianSpec<'p> {
    pub fn new(a: f64, b: f64, driver: DriverSpec, problem: &'p IsingProblem) -> Result<Self> {
        if driver.n != problem.n {
            return Err(Error::DimensionMismatch {
                expected: problem.n,
                got: driver.n,
            });
        }
        Ok(Self {
            a,
            b,
            driver,
            problem,
            bias: None,
        })
    }

    /// Transverse-field driver over `problem`.
    pub fn transverse(a: f64, b: f64, problem: &'p IsingProblem) -> Self {
        Self {
            a,
            b,
            driver: DriverSpec::transverse_field(problem.n),
            problem,
            bias: None,
        }
    }

    pub fn with_bias(mut self, bias: DriverSpec) -> Result<Self> {
        if !bias.is_diagonal() || bias.n != self.problem.n {
            return Err(invalid("bias must be a diagonal kind on the same qubits"));
        }
        self.bias = Some(bias);
        Ok(self)
    }

    pub fn with_coeffs(mut self, a: f64, b: f64) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn n(&self) -> usize {
        self.problem.n
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    /// Full diagonal of the composite operator.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|z| {
                self.b * self.problem.energies[z]
                    + self.a * self.driver.diagonal_value(z)
                    + self.bias.map_or(0.0, |h| h.diagonal_value(z))
            })
            .collect()
    }

    /// Unchecked `out = H psi`.
    pub fn apply_into<T: Amplitude>(&self, psi: &[T], out: &mut [T]) {
        let e = &self.problem.energies;
        match (self.driver.kind, self.bias) {
            (DriverKind::TransverseField, None) => {
                let (n, a, b) = (self.n(), -self.a, self.b);
                for (z, o) in out.iter_mut().enumerate() {
                    let mut acc = T::default();
                    for i in 0..n {
                        acc += psi[z ^ (1 << i)];
                    }
                    *o = psi[z] * (b * e[z]) + acc * a;
                }
            }
            _ => {
                for (z, o) in out.iter_mut().enumerate() {
                    *o = psi[z] * (self.b * e[z]);
                }
                self.driver.apply_add(self.a, psi, out);
                if let Some(h) = &self.bias {
                    h.apply_add(1.0, psi, out);
                }
            }
        }
    }

    pub fn apply<T: Amplitude>(&self, psi: &[T]) -> Result<Vec<T>> {
        self.check_dim(psi.len())?;
        let mut out = vec![T::default(); psi.len()];
        self.apply_into(psi, &mut out);
        Ok(out)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// `<psi|H|psi>` for a normalised state.
    pub fn expectation(&self, psi: &[C64]) -> Result<f64> {
        let h = self.apply(psi)?;
        Ok(linalg::cdot(psi, &h).re)
    }

    /// Dense materialisation, column by column from the matrix-free action.
    pub fn dense(&self) -> Result<Mat<f64>> {
        if self.n() > MAX_QUBITS {
            return Err(Error::SizeCap {
                n: self.n(),
                cap: MAX_QUBITS,
            });
        }
        let d = self.dim();
        let diag = self.diagonal();
        let mut m = Mat::zeros(d, d);
        for z in 0..d {
            m[(z, z)] = diag[z];
        }
        if matches!(self.driver.kind, DriverKind::TransverseField) {
            for z in 0..d {
                for i in 0..self.n() {
                    m[(z ^ (1 << i), z)] += -self.a;
                }
            }
        }
        Ok(m)
    }

    /// The global spin flip commutes with `H` when the diagonal is flip
    /// symmetric and the driver is the transverse field.
    pub fn has_flip_symmetry(&self) -> bool {
        matches!(self.driver.kind, DriverKind::TransverseField)
            && self.bias.is_none()
            && self.problem.is_flip_symmetric()
    }

    /// Full eigendecomposition, using the spin-flip sectors when available.
    pub fn eig(&self) -> Result<Eigensystem> {
        if self.n() > MAX_QUBITS {
            return Err(Error::SizeCap {
                n: self.n(),
                cap: MAX_QUBITS,
            });
        }
        if self.has_flip_symmetry() && self.n() >= 2 {
            return self.eig_sectors();
        }
        let SymEig { values, vectors } = linalg::sym_eig(&self.dense()?)?;
        Ok(Eigensystem { values, vectors })
    }

    /// Eigenvalues only.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.has_flip_symmetry() && self.n() >= 2 {
            let mut v = linalg::sym_eigenvalues(&self.sector_matrix(1.0))?;
            v.extend(linalg::sym_eigenvalues(&self.sector_matrix(-1.0))?);
            v.sort_by(f64::total_cmp);
            return Ok(v);
        }
        linalg::sym_eigenvalues(&self.dense()?)
    }

    /// Block of `H` on `(|z> + parity |~z>)/sqrt 2`, `z` with the top bit clear.
    fn sector_matrix(&self, parity: f64) -> Mat<f64> {
        let n = self.n();
        let half = self.dim() / 2;
        let low = half - 1;
        let e = &self.problem.energies;
        let mut m = Mat::zeros(half, half);
        for z in 0..half {
            m[(z, z)] += self.b * e[z];
            for i in 0..n - 1 {
                m[(z ^ (1 << i), z)] += -self.a;
            }
            m[(z ^ low, z)] += -self.a * parity;
        }
        m
    }

    fn eig_sectors(&self) -> Result<Eigensystem> {
        let d = self.dim();
        let half = d / 2;
        let mask = d - 1;
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let plus = linalg::sym_eig(&self.sector_matrix(1.0))?;
        let minus = linalg::sym_eig(&self.sector_matrix(-1.0))?;
        let mut order: Vec<(f64, bool, usize)> = plus
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| (v, true, k))
            .chain(minus.values.iter().enumerate().map(|(k, &v)| (v, false, k)))
            .collect();
        order.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut vectors = Mat::zeros(d, d);
        for (col, &(_, is_plus, k)) in order.iter().enumerate() {
            let (src, sign) = if is_plus {
                (&plus.vectors, 1.0)
            } else {
                (&minus.vectors, -1.0)
            };
            for z in 0..half {
                let v = src[(z, k)] * r;
                vectors[(z, col)] = v;
                vectors[(z ^ mask, col)] = sign * v;
            }
        }
        Ok(Eigensystem {
            values: order.iter().map(|o| o.0).collect(),
            vectors,
        })
    }
}

/// Ascending eigenvalues and orthonormal eigenvector columns of a composite
/// Hamiltonian.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Coefficients `<E_k|psi>`.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        linalg::cmatvec_t(&self.vectors, psi)
    }

    /// `sum_k c_k |E_k>`.
    pub fn reconstruct(&self, c: &[C64]) -> Vec<C64> {
        linalg::cmatvec(&self.vectors, c)
    }

    /// Populations `|<E_k|psi>|^2`.
    pub fn populations(&self, psi: &[C64]) -> Vec<f64> {
        self.project(psi).iter().map(|c| c.norm_sqr()).collect()
    }

    /// `<E_k|F|E_k>` for a diagonal operator with table `f`.
    pub fn diagonal_expectations(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                linalg::col(&self.vectors, k)
                    .iter()
                    .zip(f)
                    .map(|(v, x)| v * v * x)
                    .sum()
            })
            .collect()
    }

    /// `<E_k|D|E_k>` for a driver.
    pub fn driver_expectations(&self, driver: &DriverSpec) -> Vec<f64> {
        if let Some(t) = driver.diagonal_table() {
            return self.diagonal_expectations(&t);
        }
        let mut buf = vec![0.0; self.dim()];
        (0..self.dim())
            .map(|k| {
                let v = linalg::col(&self.vectors, k);
                buf.iter_mut().for_each(|x| *x = 0.0);
                driver.apply_add(1.0, v, &mut buf);
                linalg::dot(v, &buf)
            })
            .collect()
    }

    /// `exp(-i H t) psi`.
    pub fn evolve(&self, psi: &[C64], t: f64) -> Vec<C64> {
        let c = self.project(psi);
        let c: Vec<C64> = c
            .iter()
            .zip(&self.values)
            .map(|(c, &e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        self.reconstruct(&c)
    }

    /// `max |H - V diag(E) V^T|` against a dense reference.
    pub fn reconstruction_error(&self, h: &Mat<f64>) -> f64 {
        let d = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            for i in 0..d {
                scaled[(i, k)] *= self.values[k];
            }
        }
        let r = &scaled * self.vectors.transpose();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..d {
                worst = worst.max((r[(i, j)] - h[(i, j)]).abs());
            }
        }
        worst
    }
}

/// Normalised trace moments of `a * H_d + b * H_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `Tr' H`.
    pub mu: f64,
    /// `Tr' (H - mu)^2`.
    pub sigma2: f64,
    /// Signed cube root of half the third central moment.
    pub delta: f64,
    /// Third central moment itself.
    pub m3: f64,
    pub trp2: f64,
    pub trd2: f64,
    pub trdp: f64,
    pub trp_mean: f64,
    pub trd_mean: f64,
}

/// Trace coefficients that make every moment a polynomial in `(a, b)`.
///
/// With `~` marking centred operators:
/// `sigma^2 = a^2 vdd + 2ab vdp + b^2 vpp` and
/// `m3 = a^3 c0 + 3a^2 b c1 + 3ab^2 c2 + b^3 c3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCoefficients {
    pub mu_d: f64,
    pub mu_p: f64,
    pub vdd: f64,
    pub vdp: f64,
    pub vpp: f64,
    pub c: [f64; 4],
}

impl MomentCoefficients {
    /// Exact traces for every supported driver kind.
    ///
    /// For the transverse field the mixed traces vanish identically: odd
    /// powers of `~H_d` have zero diagonal and `H_d^2 = n + off-diagonal`.
    pub fn new(driver: &DriverSpec, problem: &IsingProblem) -> Self {
        let mu_p = problem.mean();
        let vpp = problem.central_moment(2);
        let c3 = problem.central_moment(3);
        match driver.diagonal_table() {
            None => Self {
                mu_d: 0.0,
                mu_p,
                vdd: driver.n as f64,
                vdp: 0.0,
                vpp,
                c: [0.0, 0.0, 0.0, c3],
            },
            Some(dt) => {
                let nd = dt.len() as f64;
                let mu_d = dt.iter().sum::<f64>() / nd;
                let mut s = [0.0; 6];
                for (d, p) in dt.iter().zip(&problem.energies) {
                    let (d, p) = (d - mu_d, p - mu_p);
                    s[0] += d * d;
                    s[1] += d * p;
                    s[2] += d * d * d;
                    s[3] += d * d * p;
                    s[4] += d * p * p;
                    s[5] += p * p * p;
                }
                let s = s.map(|x| x / nd);
                Self {
                    mu_d,
                    mu_p,
                    vdd: s[0],
                    vdp: s[1],
                    vpp,
                    c: [s[2], s[3], s[4], s[5]],
                }
            }
        }
    }

    pub fn mu(&self, a: f64, b: f64) -> f64 {
        a * self.mu_d + b * self.mu_p
    }

    pub fn sigma2(&self, a: f64, b: f64) -> f64 {
        a * a * self.vdd + 2.0 * a * b * self.vdp + b * b * self.vpp
    }

    pub fn m3(&self, a: f64, b: f64) -> f64 {
        let c = &self.c;
        a * a * a * c[0] + 3.0 * a * a * b * c[1] + 3.0 * a * b * b * c[2] + b * b * b * c[3]
    }

    pub fn delta(&self, a: f64, b: f64) -> f64 {
        (0.5 * self.m3(a, b)).cbrt()
    }

    /// `(d/da, d/db)` of `sigma^2`.
    pub fn d_sigma2(&self, a: f64, b: f64) -> (f64, f64) {
        (
            2.0 * a * self.vdd + 2.0 * b * self.vdp,
            2.0 * a * self.vdp + 2.0 * b * self.vpp,
        )
    }

    /// `(d/da, d/db)` of `Delta`.
    pub fn d_delta(&self, a: f64, b: f64) -> (f64, f64) {
        let c = &self.c;
        if c[0] == 0.0 && c[1] == 0.0 && c[2] == 0.0 {
            // Delta = b (c3/2)^(1/3) exactly; avoids the 0/0 at b = 0.
            return (0.0, (0.5 * c[3]).cbrt());
        }
        let dl = self.delta(a, b);
        if dl == 0.0 {
            return (0.0, 0.0);
        }
        let dm_a = 3.0 * a * a * c[0] + 6.0 * a * b * c[1] + 3.0 * b * b * c[2];
        let dm_b = 3.0 * a * a * c[1] + 6.0 * a * b * c[2] + 3.0 * b * b * c[3];
        let s = 1.0 / (6.0 * dl * dl);
        (dm_a * s, dm_b * s)
    }

    pub fn at(&self, a: f64, b: f64) -> Moments {
        Moments {
            mu: self.mu(a, b),
            sigma2: self.sigma2(a, b),
            delta: self.delta(a, b),
            m3: self.m3(a, b),
            trp2: self.vpp,
            trd2: self.vdd,
            trdp: self.vdp,
            trp_mean: self.mu_p,
            trd_mean: self.mu_d,
        }
    }
}

pub fn moments(driver: &DriverSpec, problem: &IsingProblem, a: f64, b: f64) -> Moments {
    MomentCoefficients::new(driver, problem).at(a, b)
}

/// The `Gamma` above which shrinking `Gamma` in `H_d + Gamma H_p` shrinks
/// the spectral variance.
pub fn gcond_threshold(m: &Moments) -> Result<f64> {
    if m.trp2 <= 0.0 {
        return Err(invalid(
            "problem Hamiltonian is proportional to the identity",
        ));
    }
    Ok(-m.trdp / m.trp2)
}

/// The uniform superposition `|+...+>`.
pub fn plus_state(n: usize) -> Vec<C64> {
    let d = 1usize << n;
    vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d]
}

/// The computational basis state `|z>`.
pub fn basis_state(n: usize, z: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); 1 << n];
    v[z] = C64::new(1.0, 0.0);
    v
}

/// `<psi|Z_i|psi>`.
pub fn z_expectation(psi: &[C64], i: usize) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(z, a)| a.norm_sqr() * spin(z, i))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{maxcut_problem, Graph, IsingProblem};

    fn k2() -> IsingProblem {
        maxcut_problem(&Graph::complete(2).unwrap()).unwrap()
    }

    #[test]
    fn single_qubit_dense_forms() {
        let p = IsingProblem::from_terms(1, vec![], vec![(0, 1.0)]).unwrap();
        let h = HamiltonianSpec::transverse(1.0, 0.0, &p).dense().unwrap();
        assert_eq!(
            (h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]),
            (0.0, -1.0, -1.0, 0.0)
        );
        let h = HamiltonianSpec::transverse(0.0, 1.0, &p).dense().unwrap();
        assert_eq!((h[(0, 0)], h[(1, 1)], h[(0, 1)]), (1.0, -1.0, 0.0));
    }

    #[test]
    fn plus_state_is_driver_ground_state() {
        let p = k2();
        let h = HamiltonianSpec::transverse(1.0, 0.0, &p);
        let psi = plus_state(2);
        let out = h.apply(&psi).unwrap();
        for (o, s) in out.iter().zip(&psi) {
            assert!((o - s * -2.0).norm() < 1e-14);
        }
    }

    #[test]
    fn biased_local_ground_state_is_pattern() {
        let d = DriverSpec::biased_local(3, 0b101, 2.0).unwrap();
        assert_eq!(d.diagonal_value(0b101), -6.0);
        assert_eq!(d.diagonal_value(0b010), 6.0);
        assert_eq!(d.diagonal_value(0b100), -2.0);
    }

    #[test]
    fn gcond_arithmetic() {
        let mut m = moments(&DriverSpec::transverse_field(2), &k2(), 1.0, 1.0);
        assert_eq!(gcond_threshold(&m).unwrap(), 0.0);
        m.trdp = -2.0;
        m.trp2 = 4.0;
        assert_eq!(gcond_threshold(&m).unwrap(), 0.5);
        m.trp2 = 0.0;
        assert!(gcond_threshold(&m).is_err());
    }

    #[test]
    fn driver_only_variance_single_qubit() {
        let p = IsingProblem::from_terms(1, vec![], vec![(0, 1.0)]).unwrap();
        let m = moments(&DriverSpec::transverse_field(1), &p, 1.0, 0.0);
        assert!((m.sigma2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = k2();
        let h = HamiltonianSpec::transverse(1.0, 1.0, &p);
        assert!(matches!(
            h.apply(&[C64::new(1.0, 0.0); 3]),
            Err(Error::DimensionMismatch {
                expected: 4,
                got: 3
            })
        ));
    }
}
