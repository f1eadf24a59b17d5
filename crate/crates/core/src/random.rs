//! Seeded random models for verification runs and tests.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::kernel::MAX_NESTING;
use crate::model::{operator_norm, EdgeTerm, SpinModel, TwoQubitOperator};
use crate::setalg::VertexSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Path(usize),
    Ring(usize),
    Grid(usize, usize),
    /// Random simple graph on n vertices with every degree at most d.
    BoundedDegree(usize, usize),
}

impl Topology {
    pub fn vertex_count(self) -> usize {
        match self {
            Topology::Path(n) | Topology::Ring(n) | Topology::BoundedDegree(n, _) => n,
            Topology::Grid(r, c) => r * c,
        }
    }

    pub fn edges<R: Rng>(self, rng: &mut R) -> Vec<(usize, usize)> {
        match self {
            Topology::Path(n) => (1..n).map(|i| (i - 1, i)).collect(),
            Topology::Ring(n) if n >= 3 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Topology::Ring(n) => Topology::Path(n).edges(rng),
            Topology::Grid(rows, cols) => {
                let mut out = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        let id = r * cols + c;
                        if c + 1 < cols {
                            out.push((id, id + 1));
                        }
                        if r + 1 < rows {
                            out.push((id, id + cols));
                        }
                    }
                }
                out
            }
            Topology::BoundedDegree(n, d) => bounded_degree_edges(n, d, rng),
        }
    }
}

fn bounded_degree_edges<R: Rng>(n: usize, d: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut degree = vec![0usize; n];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let target = n * d / 2;
    let mut failures = 0;
    while edges.len() < target && failures < 50 * n.max(1) {
        let open: Vec<usize> = (0..n).filter(|&u| degree[u] < d).collect();
        if open.len() < 2 {
            break;
        }
        let picked: Vec<&usize> = open.choose_multiple(rng, 2).collect();
        let (a, b) = (*picked[0], *picked[1]);
        let key = (a.min(b), a.max(b));
        if edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == key) {
            failures += 1;
            continue;
        }
        degree[a] += 1;
        degree[b] += 1;
        edges.push((a, b));
    }
    edges
}

/// Random Hermitian two-qubit operator with spectral norm `norm`.
pub fn random_hermitian<R: Rng>(rng: &mut R, norm: f64) -> TwoQubitOperator {
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in r..4 {
            let re = rng.gen_range(-1.0..1.0);
            let im = if r == c { 0.0 } else { rng.gen_range(-1.0..1.0) };
            m[r][c] = Complex64::new(re, im);
            m[c][r] = Complex64::new(re, -im);
        }
    }
    let op = TwoQubitOperator::new(m);
    let scale = norm / operator_norm(&op);
    op.scale(Complex64::new(scale, 0.0))
}

/// Random Hermitian model: gaps in [1, 2), unit-norm couplings, random orientation.
pub fn random_model<R: Rng>(rng: &mut R, topology: Topology) -> SpinModel {
    let n = topology.vertex_count();
    let gaps: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..2.0)).collect();
    let edges = topology
        .edges(rng)
        .into_iter()
        .map(|(a, b)| {
            let (u, v) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            EdgeTerm::new(u, v, random_hermitian(rng, 1.0))
        })
        .collect();
    SpinModel::from_parts(&gaps, edges).expect("generated model is valid")
}

/// A kernel matrix-element query on `n` qubits.
#[derive(Clone, Debug)]
pub struct KernelQuery {
    pub n: usize,
    pub target: VertexSet,
    pub sets: Vec<VertexSet>,
    pub edge: EdgeTerm,
}

fn random_subset<R: Rng>(rng: &mut R, n: usize) -> VertexSet {
    let mask: u32 = rng.gen_range(1..(1u32 << n));
    VertexSet::from_ids((0..n as u32).filter(|i| mask & (1 << i) != 0))
}

/// Random query with 0..=4 nested sets, biased towards sets touching the edge so
/// that a fair share of the answers is nonzero.
pub fn random_kernel_query<R: Rng>(rng: &mut R, max_qubits: usize) -> KernelQuery {
    let n = rng.gen_range(2..=max_qubits.max(2));
    let u = rng.gen_range(0..n);
    let v = (u + rng.gen_range(1..n)) % n;
    let k = rng.gen_range(0..=MAX_NESTING);
    let sets: Vec<VertexSet> = (0..k)
        .map(|_| {
            let s = random_subset(rng, n);
            if rng.gen_bool(0.7) && !s.contains(u as u32) && !s.contains(v as u32) {
                s.insert(if rng.gen_bool(0.5) { u as u32 } else { v as u32 })
            } else {
                s
            }
        })
        .collect();
    let target = if rng.gen_bool(0.7) {
        let mut t = sets.iter().fold(VertexSet::empty(), |acc, s| acc.union(s));
        for w in [u, v] {
            if rng.gen_bool(0.5) {
                t = t.insert(w as u32);
            }
        }
        t
    } else {
        random_subset(rng, n)
    };
    let edge = EdgeTerm::new(u, v, random_operator(rng));
    KernelQuery { n, target, sets, edge }
}

/// Random (generally non-Hermitian) two-qubit operator with entries in the unit box.
pub fn random_operator<R: Rng>(rng: &mut R) -> TwoQubitOperator {
    let m = std::array::from_fn(|_| {
        std::array::from_fn(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    });
    TwoQubitOperator::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bounded_degree_respects_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = random_model(&mut rng, Topology::BoundedDegree(200, 3));
        assert_eq!(model.n(), 200);
        assert!(model.max_degree() <= 3);
        assert!(model.edges().len() >= 280);
    }

    #[test]
    fn operators_are_normalised_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let op = random_hermitian(&mut rng, 1.0);
            assert!(op.is_hermitian(1e-15));
            assert!((operator_norm(&op) - 1.0).abs() < 1e-12);
        }
        let grid = random_model(&mut rng, Topology::Grid(3, 3));
        assert_eq!(grid.edges().len(), 12);
        assert_eq!(grid.max_degree(), 4);
    }
}
