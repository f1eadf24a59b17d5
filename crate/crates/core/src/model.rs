//! Hamiltonian data model `H(ε) = Σ_u Δ_u |1⟩⟨1|_u + ε Σ_(u,v) V_uv`.
//!
//! Edge operators are 4×4 matrices in the local basis `2·b_u + b_v`, where `u` is the
//! edge's first listed vertex. Rows index the output state, columns the input state,
//! so `op.get(2, 0)` is `⟨10|V|00⟩`.

use std::path::Path;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::parse_pauli_expression;

/// 2⁻¹⁸, the prefactor in the convergence threshold.
pub const THRESHOLD_PREFACTOR: f64 = 1.0 / 262_144.0;

pub type Mat4 = [[Complex64; 4]; 4];

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitOperator {
    entries: Mat4,
}

impl TwoQubitOperator {
    pub fn new(entries: Mat4) -> Self {
        TwoQubitOperator { entries }
    }

    pub fn zero() -> Self {
        TwoQubitOperator::new([[Complex64::new(0.0, 0.0); 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = TwoQubitOperator::zero();
        for i in 0..4 {
            m.entries[i][i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn diagonal(d: [f64; 4]) -> Self {
        let mut m = TwoQubitOperator::zero();
        for (i, x) in d.into_iter().enumerate() {
            m.entries[i][i] = Complex64::new(x, 0.0);
        }
        m
    }

    pub fn entries(&self) -> &Mat4 {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row][col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row][col] = value;
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut m = self.clone();
        m.entries.iter_mut().flatten().for_each(|x| *x *= c);
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = self.clone();
        for (a, b) in m.entries.iter_mut().flatten().zip(other.entries.iter().flatten()) {
            *a += *b;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = TwoQubitOperator::zero();
        for r in 0..4 {
            for c in 0..4 {
                m.entries[r][c] = self.entries[c][r].conj();
            }
        }
        m
    }

    /// Same operator with the roles of the two qubits exchanged (`SWAP · V · SWAP`).
    pub fn swapped(&self) -> Self {
        const SWAP: [usize; 4] = [0, 2, 1, 3];
        let mut m = TwoQubitOperator::zero();
        for r in 0..4 {
            for c in 0..4 {
                m.entries[SWAP[r]][SWAP[c]] = self.entries[r][c];
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..4).all(|r| {
            (0..4).all(|c| (self.entries[r][c] - self.entries[c][r].conj()).norm() <= tol)
        })
    }

    pub fn is_diagonal(&self) -> bool {
        (0..4).all(|r| (0..4).all(|c| r == c || self.entries[r][c] == Complex64::new(0.0, 0.0)))
    }

    fn to_matrix(&self) -> Matrix4<Complex64> {
        Matrix4::from_fn(|r, c| self.entries[r][c])
    }

    /// Spectral norm (largest singular value).
    pub fn norm(&self) -> f64 {
        operator_norm(self)
    }
}

/// Largest singular value of a two-qubit operator.
pub fn operator_norm(op: &TwoQubitOperator) -> f64 {
    if op.entries.iter().flatten().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return 0.0;
    }
    let m = op.to_matrix();
    snap_to_short_dyadic(m.singular_values().max())
}

// The SVD lands a few ulp off exact norms such as 1 or 2. A value within 8 ulp of a
// number with a 26-bit mantissa is taken to be that number.
fn snap_to_short_dyadic(x: f64) -> f64 {
    if !(x.is_finite() && x > 0.0) {
        return x;
    }
    let scale = 2f64.powi(26 - x.log2().floor() as i32);
    let short = (x * scale).round() / scale;
    if (short - x).abs() <= 8.0 * f64::EPSILON * x {
        short
    } else {
        x
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeTerm {
    pub u: usize,
    pub v: usize,
    pub op: TwoQubitOperator,
    pub tag: Option<String>,
}

impl EdgeTerm {
    pub fn new(u: usize, v: usize, op: TwoQubitOperator) -> Self {
        EdgeTerm { u, v, op, tag: None }
    }

    pub fn tagged(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }
}

/// Validated model with its derived global parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinModel {
    vertices: Vec<Vertex>,
    edges: Vec<EdgeTerm>,
    declared_hermitian: bool,
    delta: f64,
    coupling: f64,
    degree: usize,
    degrees: Vec<usize>,
}

impl SpinModel {
    /// Validates the raw parts and derives Δ, J and d.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<EdgeTerm>) -> Result<Self> {
        Self::build(vertices, edges, false)
    }

    /// As [`SpinModel::new`], additionally requiring every edge operator to be Hermitian.
    pub fn new_hermitian(vertices: Vec<Vertex>, edges: Vec<EdgeTerm>) -> Result<Self> {
        Self::build(vertices, edges, true)
    }

    /// Convenience constructor: vertex `i` gets gap `deltas[i]`.
    pub fn from_parts(deltas: &[f64], edges: Vec<EdgeTerm>) -> Result<Self> {
        let vertices = deltas
            .iter()
            .enumerate()
            .map(|(id, &delta)| Vertex { id, delta })
            .collect();
        Self::new(vertices, edges)
    }

    fn build(mut vertices: Vec<Vertex>, edges: Vec<EdgeTerm>, declared_hermitian: bool) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyModel);
        }
        vertices.sort_by_key(|v| v.id);
        for (position, v) in vertices.iter().enumerate() {
            if v.id != position {
                return Err(Error::NonContiguousIds { id: v.id, position });
            }
            if !(v.delta > 0.0) || !v.delta.is_finite() {
                return Err(Error::NonPositiveGap {
                    vertex: v.id,
                    delta: v.delta,
                });
            }
        }
        let n = vertices.len();
        let mut degrees = vec![0usize; n];
        let mut coupling = 0.0f64;
        for (idx, e) in edges.iter().enumerate() {
            for w in [e.u, e.v] {
                if w >= n {
                    return Err(Error::DanglingVertexId { edge: idx, vertex: w });
                }
            }
            if e.u == e.v {
                return Err(Error::SelfLoop { edge: idx, vertex: e.u });
            }
            if !e.op.is_finite() {
                return Err(Error::NonFiniteEntry { edge: idx });
            }
            if declared_hermitian && !e.op.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::NotHermitian { edge: idx });
            }
            degrees[e.u] += 1;
            degrees[e.v] += 1;
            coupling = coupling.max(operator_norm(&e.op));
        }
        let delta = vertices.iter().map(|v| v.delta).fold(f64::INFINITY, f64::min);
        let degree = degrees.iter().copied().max().unwrap_or(0);
        Ok(SpinModel {
            vertices,
            edges,
            declared_hermitian,
            delta,
            coupling,
            degree,
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[EdgeTerm] {
        &self.edges
    }

    pub fn gap(&self, u: usize) -> f64 {
        self.vertices[u].delta
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.vertices.iter().map(|v| v.delta).collect()
    }

    /// Δ = min_u Δ_u.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// J = max_(u,v) ‖V_uv‖.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// d = max incident-edge count, parallel edges counted separately.
    pub fn max_degree(&self) -> usize {
        self.degree
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degrees[u]
    }

    /// ε₀ = 2⁻¹⁸ Δ / (d J); infinite when there is no interaction.
    pub fn eps0(&self) -> f64 {
        threshold(self.delta, self.degree, self.coupling)
    }

    /// ε₀* = 2⁻¹⁸ Δ / ((d + 1) J), the threshold after adding one observable edge.
    pub fn eps0_star(&self) -> f64 {
        threshold(self.delta, self.degree + 1, self.coupling)
    }

    pub fn declared_hermitian(&self) -> bool {
        self.declared_hermitian
    }

    pub fn is_hermitian(&self) -> bool {
        self.edges.iter().all(|e| e.op.is_hermitian(HERMITIAN_TOL))
    }

    /// A copy with one more edge appended (revalidated).
    pub fn with_edge(&self, edge: EdgeTerm) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.push(edge);
        Self::build(self.vertices.clone(), edges, self.declared_hermitian)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_model(self))?)
    }
}

fn threshold(delta: f64, degree: usize, coupling: f64) -> f64 {
    let dj = degree as f64 * coupling;
    if dj == 0.0 {
        f64::INFINITY
    } else {
        THRESHOLD_PREFACTOR * (delta / dj)
    }
}

/// On-disk JSON layout of a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub vertices: Vec<VertexRecord>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hermitian: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[[f64; 2]; 4]; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl ModelFile {
    pub fn into_model(self) -> Result<SpinModel> {
        let vertices = self
            .vertices
            .into_iter()
            .map(|v| Vertex { id: v.id, delta: v.delta })
            .collect();
        let mut edges = Vec::with_capacity(self.edges.len());
        for (idx, e) in self.edges.into_iter().enumerate() {
            let op = match (e.matrix, e.pauli) {
                (Some(m), None) => {
                    let mut entries = [[Complex64::new(0.0, 0.0); 4]; 4];
                    for r in 0..4 {
                        for c in 0..4 {
                            entries[r][c] = Complex64::new(m[r][c][0], m[r][c][1]);
                        }
                    }
                    TwoQubitOperator::new(entries)
                }
                (None, Some(expr)) => parse_pauli_expression(&expr)?,
                _ => return Err(Error::EdgeOperatorSpec { edge: idx }),
            };
            edges.push(EdgeTerm {
                u: e.u,
                v: e.v,
                op,
                tag: e.tag,
            });
        }
        if self.hermitian.unwrap_or(false) {
            SpinModel::new_hermitian(vertices, edges)
        } else {
            SpinModel::new(vertices, edges)
        }
    }

    pub fn from_model(model: &SpinModel) -> Self {
        ModelFile {
            vertices: model
                .vertices
                .iter()
                .map(|v| VertexRecord { id: v.id, delta: v.delta })
                .collect(),
            edges: model
                .edges
                .iter()
                .map(|e| {
                    let mut m = [[[0.0; 2]; 4]; 4];
                    for r in 0..4 {
                        for c in 0..4 {
                            let z = e.op.get(r, c);
                            m[r][c] = [z.re, z.im];
                        }
                    }
                    EdgeRecord {
                        u: e.u,
                        v: e.v,
                        matrix: Some(m),
                        pauli: None,
                        tag: e.tag.clone(),
                    }
                })
                .collect(),
            hermitian: model.declared_hermitian.then_some(true),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::pauli_pair;
    use proptest::prelude::*;

    fn xx() -> TwoQubitOperator {
        pauli_pair('X', 'X').unwrap()
    }

    #[test]
    fn single_xx_edge_parameters() {
        let m = SpinModel::from_parts(&[1.0, 1.0], vec![EdgeTerm::new(0, 1, xx())]).unwrap();
        assert_eq!(m.delta(), 1.0);
        assert_eq!(m.coupling(), 1.0);
        assert_eq!(m.max_degree(), 1);
        assert_eq!(m.eps0(), 2f64.powi(-18));
    }

    #[test]
    fn exact_norms_survive_the_svd() {
        let tf = crate::pauli::parse_pauli_expression("-1*XI - 1*IX").unwrap();
        assert_eq!(operator_norm(&tf), 2.0);
        let mixed = crate::pauli::parse_pauli_expression("XX + 0.5*ZZ").unwrap();
        assert_eq!(operator_norm(&mixed), 1.5);
        let irrational = crate::pauli::parse_pauli_expression("XI + ZI").unwrap();
        assert!((operator_norm(&irrational) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn star_of_degree_four() {
        let edges = (1..5).map(|v| EdgeTerm::new(0, v, TwoQubitOperator::diagonal([1.0, -1.0, -1.0, 1.0]))).collect();
        let m = SpinModel::from_parts(&[1.0; 5], edges).unwrap();
        assert_eq!(m.max_degree(), 4);
        assert_eq!(m.coupling(), 1.0);
        assert_eq!(m.eps0(), 2f64.powi(-20));
        assert_eq!(m.eps0_star(), 2f64.powi(-18) / 5.0);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            SpinModel::from_parts(&[1.0, 0.0], vec![]),
            Err(Error::NonPositiveGap { vertex: 1, .. })
        ));
        assert!(matches!(
            SpinModel::from_parts(&[1.0], vec![EdgeTerm::new(0, 3, xx())]),
            Err(Error::DanglingVertexId { vertex: 3, .. })
        ));
        assert!(matches!(
            SpinModel::from_parts(&[1.0, 1.0], vec![EdgeTerm::new(1, 1, xx())]),
            Err(Error::SelfLoop { .. })
        ));
        let gap = vec![Vertex { id: 0, delta: 1.0 }, Vertex { id: 2, delta: 1.0 }];
        assert!(matches!(SpinModel::new(gap, vec![]), Err(Error::NonContiguousIds { .. })));
        assert!(matches!(SpinModel::from_parts(&[], vec![]), Err(Error::EmptyModel)));
        let mut bad = xx();
        bad.set(0, 3, Complex64::new(0.0, 1.0));
        assert!(matches!(
            SpinModel::new_hermitian(vec![Vertex { id: 0, delta: 1.0 }, Vertex { id: 1, delta: 1.0 }], vec![EdgeTerm::new(0, 1, bad)]),
            Err(Error::NotHermitian { edge: 0 })
        ));
    }

    #[test]
    fn parallel_edges_count_towards_degree() {
        let m = SpinModel::from_parts(&[1.0, 1.0], vec![EdgeTerm::new(0, 1, xx()), EdgeTerm::new(1, 0, xx()).tagged("obs")]).unwrap();
        assert_eq!(m.max_degree(), 2);
    }

    #[test]
    fn norms() {
        assert!((operator_norm(&xx()) - 1.0).abs() < 1e-12);
        assert_eq!(operator_norm(&TwoQubitOperator::zero()), 0.0);
        let tf = pauli_pair('X', 'I').unwrap().add(&pauli_pair('I', 'X').unwrap()).scale(Complex64::new(-1.0, 0.0));
        assert!((operator_norm(&tf) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transverse_field_norm_matches_dense_eigensolve() {
        // X_u + X_v is Hermitian, so its norm is the largest |eigenvalue|.
        let tf = pauli_pair('X', 'I').unwrap().add(&pauli_pair('I', 'X').unwrap());
        let eig = nalgebra::SymmetricEigen::new(tf.to_matrix());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let want = [-2.0, 0.0, 0.0, 2.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((operator_norm(&tf) - ev.iter().fold(0.0f64, |m, x| m.max(x.abs()))).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip_and_pauli_form() {
        let text = r#"{"vertices":[{"id":1,"delta":2.0},{"id":0,"delta":1.0}],
            "edges":[{"u":0,"v":1,"pauli":"-1.0*XI - 1.0*IX"},
                     {"u":1,"v":0,"matrix":[[[1,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0.5,0]]]}]}"#;
        let m = SpinModel::from_json_str(text).unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.gap(1), 2.0);
        assert_eq!(m.edges()[1].op.get(3, 3), Complex64::new(0.5, 0.0));
        let again = SpinModel::from_json_str(&m.to_json_string().unwrap()).unwrap();
        assert_eq!(again, m);
        let both = r#"{"vertices":[{"id":0,"delta":1.0},{"id":1,"delta":1.0}],"edges":[{"u":0,"v":1}]}"#;
        assert!(matches!(SpinModel::from_json_str(both), Err(Error::EdgeOperatorSpec { edge: 0 })));
    }

    fn arb_op() -> impl Strategy<Value = TwoQubitOperator> {
        proptest::collection::vec(-2.0f64..2.0, 32).prop_map(|xs| {
            let mut m = TwoQubitOperator::zero();
            for r in 0..4 {
                for c in 0..4 {
                    let k = 2 * (4 * r + c);
                    m.set(r, c, Complex64::new(xs[k], xs[k + 1]));
                }
            }
            m
        })
    }

    proptest! {
        #[test]
        fn norm_invariant_under_swap_and_phase(op in arb_op(), phase in 0.0f64..6.3) {
            let n = operator_norm(&op);
            prop_assert!((operator_norm(&op.swapped()) - n).abs() <= 1e-12 * n.max(1.0));
            let rotated = op.scale(Complex64::from_polar(1.0, phase));
            prop_assert!((operator_norm(&rotated) - n).abs() <= 1e-12 * n.max(1.0));
        }

        #[test]
        fn threshold_identity(delta in 0.01f64..10.0, j_scale in 0.1f64..5.0, degree in 1usize..6) {
            let edges = (1..=degree).map(|v| EdgeTerm::new(0, v, xx().scale(Complex64::new(j_scale, 0.0)))).collect();
            let m = SpinModel::from_parts(&vec![delta; degree + 1], edges).unwrap();
            let ratio = m.eps0() * m.max_degree() as f64 * m.coupling() / m.delta();
            prop_assert!((ratio / THRESHOLD_PREFACTOR - 1.0).abs() < 4.0 * f64::EPSILON);
        }

        #[test]
        fn parsed_pauli_sums_match_kronecker(a in -3.0f64..3.0, b in -3.0f64..3.0, p in 0usize..4, q in 0usize..4) {
            let letters = ['I', 'X', 'Y', 'Z'];
            let expr = format!("{a}*{}{} + {b}*ZX", letters[p], letters[q]);
            let parsed = parse_pauli_expression(&expr).unwrap();
            let built = pauli_pair(letters[p], letters[q]).unwrap().scale(Complex64::new(a, 0.0))
                .add(&pauli_pair('Z', 'X').unwrap().scale(Complex64::new(b, 0.0)));
            for r in 0..4 { for c in 0..4 {
                prop_assert!((parsed.get(r, c) - built.get(r, c)).norm() < 1e-14);
            }}
        }
    }
}
