//! Ising problem instances and their diagonal energy tables.
//!
//! Bit `i` of a basis index `z` is qubit `i`; bit value 0 is spin +1.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::MAX_QUBITS;

/// Spin value of qubit `i` in basis state `z`.
#[inline]
pub fn spin(z: usize, i: usize) -> f64 {
    if (z >> i) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Undirected simple graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub n: usize,
    /// Sorted pairs `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub seed: Option<u64>,
}

impl Graph {
    /// Validates and normalises an edge list.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("graph needs at least one vertex"));
        }
        let mut out = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(invalid("edge endpoint out of range"));
            }
            if a == b {
                return Err(invalid("self-loop"));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        let before = out.len();
        out.dedup();
        if out.len() != before {
            return Err(invalid("duplicate edge"));
        }
        Ok(Self {
            n,
            edges: out,
            seed: None,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|j| (0..j).map(move |i| (i, j))))
    }

    fn adjacency(&self) -> Vec<bool> {
        let mut adj = alloc::vec![false; self.n * self.n];
        for &(i, j) in &self.edges {
            adj[i * self.n + j] = true;
            adj[j * self.n + i] = true;
        }
        adj
    }

    /// Number of triangles, by direct enumeration of vertex triples.
    pub fn triangle_count(&self) -> usize {
        let n = self.n;
        let adj = self.adjacency();
        let mut count = 0;
        for i in 0..n {
            for j in i + 1..n {
                if !adj[i * n + j] {
                    continue;
                }
                for k in j + 1..n {
                    if adj[j * n + k] && adj[i * n + k] {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Each of the `n(n-1)/2` candidate edges is kept independently with
/// probability `p`, in lexicographic `(i, j)` order from the seeded stream.
pub fn gen_binomial_graph(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(invalid("graph needs at least one vertex"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("edge probability must lie in [0, 1]"));
    }
    let mut r = rng::stream(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Ok(Graph {
        n,
        edges,
        seed: Some(seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    MaxCut,
    Sk,
    Custom,
}

/// A diagonal Ising Hamiltonian stored as its full energy table.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    pub n: usize,
    pub family: Family,
    /// `energies[z]` for every basis state.
    pub energies: Vec<f64>,
    /// Sum of squared coefficients; equals the edge count for MAX-CUT.
    pub kappa2: f64,
    /// Triangle count (MAX-CUT only).
    pub kappa3: Option<f64>,
    /// `(i, j, J_ij)` with `i > j` for SK and `i < j` for graphs.
    pub couplings: Vec<(usize, usize, f64)>,
    pub fields: Vec<(usize, f64)>,
    pub seed: Option<u64>,
}

fn check_cap(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        Err(Error::SizeCap { n, cap: MAX_QUBITS })
    } else if n == 0 {
        Err(invalid("problem needs at least one qubit"))
    } else {
        Ok(())
    }
}

impl IsingProblem {
    /// Builds a problem from explicit couplings and fields.
    pub fn from_terms(
        n: usize,
        couplings: Vec<(usize, usize, f64)>,
        fields: Vec<(usize, f64)>,
    ) -> Result<Self> {
        check_cap(n)?;
        for &(i, j, _) in &couplings {
            if i >= n || j >= n || i == j {
                return Err(invalid("bad coupling indices"));
            }
        }
        for &(i, _) in &fields {
            if i >= n {
                return Err(invalid("bad field index"));
            }
        }
        let mut p = Self {
            n,
            family: Family::Custom,
            energies: Vec::new(),
            kappa2: couplings.iter().map(|c| c.2 * c.2).sum::<f64>()
                + fields.iter().map(|f| f.1 * f.1).sum::<f64>(),
            kappa3: None,
            couplings,
            fields,
            seed: None,
        };
        p.energies = (0..1usize << n).map(|z| p.energy_of(z)).collect();
        Ok(p)
    }

    /// Symbolic evaluation of the coupling list at one basis state.
    pub fn energy_of(&self, z: usize) -> f64 {
        let c: f64 = self
            .couplings
            .iter()
            .map(|&(i, j, w)| w * spin(z, i) * spin(z, j))
            .sum();
        let f: f64 = self.fields.iter().map(|&(i, h)| h * spin(z, i)).sum();
        c + f
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Normalised trace `Tr' H_p`.
    pub fn mean(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.dim() as f64
    }

    /// `Tr' (H_p - Tr' H_p)^k`.
    pub fn central_moment(&self, k: i32) -> f64 {
        let m = self.mean();
        self.energies.iter().map(|e| (e - m).powi(k)).sum::<f64>() / self.dim() as f64
    }

    pub fn ground_state_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// All basis states within `tol` of the ground energy.
    pub fn ground_states(&self, tol: f64) -> Vec<usize> {
        let g = self.ground_state_energy();
        (0..self.dim())
            .filter(|&z| self.energies[z] <= g + tol)
            .collect()
    }

    /// True when `energies[z] == energies[!z]` for every `z`.
    pub fn is_flip_symmetric(&self) -> bool {
        let mask = self.dim() - 1;
        (0..self.dim() / 2).all(|z| self.energies[z] == self.energies[z ^ mask])
    }
}

/// MAX-CUT energies `sum_{(i,j) in E} s_i s_j`.
pub fn maxcut_problem(graph: &Graph) -> Result<IsingProblem> {
    check_cap(graph.n)?;
    let couplings = graph.edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
    let mut p = IsingProblem::from_terms(graph.n, couplings, Vec::new())?;
    p.family = Family::MaxCut;
    p.kappa2 = graph.edges.len() as f64;
    p.kappa3 = Some(graph.triangle_count() as f64);
    p.seed = graph.seed;
    Ok(p)
}

/// Sherrington-Kirkpatrick instance with standard-normal couplings and fields.
///
/// Draw order: `J_ij` for `i` ascending and `j < i` ascending, then `h_0..h_{n-1}`.
pub fn sk_problem(n: usize, seed: u64) -> Result<IsingProblem> {
    check_cap(n)?;
    let mut r = rng::stream(seed);
    let mut couplings = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in 0..i {
            let w: f64 = StandardNormal.sample(&mut r);
            couplings.push((i, j, w));
        }
    }
    let fields = (0..n).map(|i| (i, StandardNormal.sample(&mut r))).collect();
    let mut p = IsingProblem::from_terms(n, couplings, fields)?;
    p.family = Family::Sk;
    p.seed = Some(seed);
    Ok(p)
}

pub fn ground_state_energy(problem: &IsingProblem) -> f64 {
    problem.ground_state_energy()
}
