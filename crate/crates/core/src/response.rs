//! Two-point correlators by linear response.
//!
//! The observable is attached as an extra parallel edge whose operator lives entirely in
//! the η¹ channel of a dual number. One solver run over [`DualScalar`] then yields the
//! energies Ẽ_r of H₀ + ε(V + ηO) to first order in η, and K = Σ_r ∂_η Ẽ_r ε^{r−1}.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::energy::{energy_coefficient_in, EnergyDiagnostics};
use crate::error::{Error, Result};
use crate::model::{operator_norm, EdgeTerm, SpinModel, TwoQubitOperator, Vertex};
use crate::scalar::Scalar;
use crate::solver::{lift, solve_weighted, SolveOptions, WeightedEdge, WeightedModel};

/// First-order jet `val + der·η` with η² = 0.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct DualScalar {
    pub val: Complex64,
    pub der: Complex64,
}

impl DualScalar {
    pub fn new(val: Complex64, der: Complex64) -> Self {
        DualScalar { val, der }
    }

    /// Pure η term.
    pub fn eta(der: Complex64) -> Self {
        DualScalar::new(Complex64::new(0.0, 0.0), der)
    }
}

impl fmt::Debug for DualScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}η)", self.val, self.der)
    }
}

impl Add for DualScalar {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        DualScalar::new(self.val + rhs.val, self.der + rhs.der)
    }
}

impl Sub for DualScalar {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        DualScalar::new(self.val - rhs.val, self.der - rhs.der)
    }
}

impl Mul for DualScalar {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        DualScalar::new(self.val * rhs.val, self.val * rhs.der + self.der * rhs.val)
    }
}

impl Div for DualScalar {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let val = self.val / rhs.val;
        DualScalar::new(val, (self.der - val * rhs.der) / rhs.val)
    }
}

impl Neg for DualScalar {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        DualScalar::new(-self.val, -self.der)
    }
}

impl AddAssign for DualScalar {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.val += rhs.val;
        self.der += rhs.der;
    }
}

impl Scalar for DualScalar {
    type Real = f64;

    fn zero() -> Self {
        DualScalar::default()
    }
    fn one() -> Self {
        DualScalar::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }
    fn from_complex(z: Complex64) -> Self {
        DualScalar::new(z, Complex64::new(0.0, 0.0))
    }
    fn real(x: f64) -> f64 {
        x
    }
    #[inline]
    fn div_real(&self, r: &f64) -> Self {
        DualScalar::new(self.val / *r, self.der / *r)
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.val.is_zero() && self.der.is_zero()
    }
    fn magnitude(&self) -> f64 {
        self.val.norm()
    }
    fn leading(&self) -> Complex64 {
        self.val
    }
    fn conj(&self) -> Self {
        DualScalar::new(self.val.conj(), self.der.conj())
    }
}

/// Submodel around an observable edge, with the id mapping back to the full model.
#[derive(Clone, Debug)]
pub struct Restriction {
    pub model: SpinModel,
    pub s: usize,
    pub t: usize,
    /// `original[i]` is the full-model id of restricted vertex `i`.
    pub original: Vec<usize>,
}

/// Hop distance of every vertex from {s, t}; `usize::MAX` when unreachable.
fn vertex_distances(model: &SpinModel, s: usize, t: usize) -> Vec<usize> {
    let n = model.n();
    let mut adj = vec![Vec::new(); n];
    for e in model.edges() {
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for src in [s, t] {
        if dist[src] != 0 {
            dist[src] = 0;
            queue.push_back(src);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Distance of each edge from the edge (s, t): 0 for copies of (s, t) itself,
/// otherwise one more than the nearer endpoint's vertex distance.
pub fn edge_distances(model: &SpinModel, s: usize, t: usize) -> Vec<usize> {
    let dist = vertex_distances(model, s, t);
    model
        .edges()
        .iter()
        .map(|e| {
            if (e.u == s && e.v == t) || (e.u == t && e.v == s) {
                0
            } else {
                dist[e.u].min(dist[e.v]).saturating_add(1)
            }
        })
        .collect()
}

/// Keeps the vertices within distance p+1 of {s, t} and the edges within distance p of
/// (s, t). Ids are relabelled in increasing order and edge order is preserved.
pub fn restrict_neighborhood(model: &SpinModel, s: usize, t: usize, p: usize) -> Result<Restriction> {
    check_pair(model, s, t)?;
    let dist = vertex_distances(model, s, t);
    let edist = edge_distances(model, s, t);
    let mut new_id = vec![usize::MAX; model.n()];
    let mut original = Vec::new();
    let mut vertices = Vec::new();
    for (u, &d) in dist.iter().enumerate() {
        if d <= p + 1 {
            new_id[u] = original.len();
            vertices.push(Vertex {
                id: original.len(),
                delta: model.gap(u),
            });
            original.push(u);
        }
    }
    let edges = model
        .edges()
        .iter()
        .zip(&edist)
        .filter(|(_, &d)| d <= p)
        .map(|(e, _)| EdgeTerm {
            u: new_id[e.u],
            v: new_id[e.v],
            op: e.op.clone(),
            tag: e.tag.clone(),
        })
        .collect();
    let restricted = if model.declared_hermitian() {
        SpinModel::new_hermitian(vertices, edges)?
    } else {
        SpinModel::new(vertices, edges)?
    };
    Ok(Restriction {
        model: restricted,
        s: new_id[s],
        t: new_id[t],
        original,
    })
}

fn check_pair(model: &SpinModel, s: usize, t: usize) -> Result<()> {
    for w in [s, t] {
        if w >= model.n() {
            return Err(Error::InvalidVertex(w));
        }
    }
    if s == t {
        return Err(Error::InvalidArgument(format!("observable sites must differ (s = t = {s})")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct CorrelatorQuery {
    pub s: usize,
    pub t: usize,
    pub observable: TwoQubitOperator,
    pub eps: f64,
    pub order: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// |ε| ≤ ε₀*/(2d): the correlator error bound applies.
    Bounded,
    None,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Bounded => "lemma9",
            Regime::None => "none",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Correlator {
    pub value: Complex64,
    pub bound: Option<f64>,
    pub order: usize,
    pub regime: Regime,
    /// E_{q,1} for q = 0..=p, in the caller's normalisation of the observable.
    pub coefficients: Vec<Complex64>,
    /// Power of two the observable was multiplied by so that ‖O‖ ≤ J.
    pub scale: f64,
}

impl Correlator {
    pub fn real(&self) -> f64 {
        self.value.re
    }
}

/// Largest 2^{−k} (k ≥ 0) bringing ‖O‖ under J; exact in binary arithmetic.
fn observable_scale(norm: f64, coupling: f64) -> f64 {
    let mut scale = 1.0;
    if coupling > 0.0 {
        while norm * scale > coupling {
            scale *= 0.5;
        }
    }
    scale
}

/// The base model lifted into dual numbers, plus the η-weighted observable edge.
pub fn augmented_model(model: &SpinModel, s: usize, t: usize, observable: &TwoQubitOperator) -> WeightedModel<DualScalar> {
    let mut edges: Vec<WeightedEdge<DualScalar>> = model
        .edges()
        .iter()
        .map(|e| WeightedEdge::new(e.u, e.v, lift(e.op.entries())))
        .collect();
    let obs = observable.entries();
    let op = std::array::from_fn(|r| std::array::from_fn(|c| DualScalar::eta(obs[r][c])));
    edges.push(WeightedEdge::new(s, t, op));
    WeightedModel::new(model.gaps(), edges)
}

/// Correlator error bound 2^{−16−p}·J·d·(d+1).
pub fn correlator_bound(p: usize, coupling: f64, degree: usize) -> f64 {
    2f64.powi(-16 - p as i32) * coupling * (degree * (degree + 1)) as f64
}

pub fn correlator(model: &SpinModel, query: &CorrelatorQuery) -> Result<Correlator> {
    correlator_with(model, query, SolveOptions::default())
}

pub fn correlator_with(model: &SpinModel, query: &CorrelatorQuery, options: SolveOptions) -> Result<Correlator> {
    check_pair(model, query.s, query.t)?;
    if !query.eps.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be finite, got {}", query.eps)));
    }
    if !query.observable.is_finite() {
        return Err(Error::InvalidObservable("non-finite entry".into()));
    }
    if !query.observable.is_hermitian(1e-12) {
        return Err(Error::InvalidObservable("operator is not Hermitian".into()));
    }
    let p = query.order;
    let coupling = model.coupling();
    let scale = observable_scale(operator_norm(&query.observable), coupling);
    let scaled = query.observable.scale(Complex64::new(scale, 0.0));
    let augmented = augmented_model(model, query.s, query.t, &scaled);
    let state = solve_weighted(augmented, p.max(1), options);
    let mut diag = EnergyDiagnostics::default();
    let coefficients: Vec<Complex64> = (1..=p + 1)
        .map(|r| energy_coefficient_in(&state, r, &mut diag).der / scale)
        .collect();
    let mut value = Complex64::new(0.0, 0.0);
    for c in coefficients.iter().rev() {
        value = value * query.eps + c;
    }
    let d = model.max_degree();
    let limit = model.eps0_star() / (2.0 * d as f64);
    let regime = if query.eps.abs() <= limit || d == 0 {
        Regime::Bounded
    } else {
        Regime::None
    };
    let bound = (regime == Regime::Bounded).then(|| correlator_bound(p, coupling, d) / scale);
    Ok(Correlator {
        value,
        bound,
        order: p,
        regime,
        coefficients,
        scale,
    })
}

/// Smallest p ≥ 0 with 2^{−16−p}·J·d·(d+1) ≤ δ.
pub fn choose_correlator_order(precision: f64, coupling: f64, degree: usize) -> Result<usize> {
    if !(precision > 0.0) {
        return Err(Error::NonPositivePrecision(precision));
    }
    let mut p = 0usize;
    while correlator_bound(p, coupling, degree) > precision {
        p += 1;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy_coefficients_in;
    use crate::pauli::parse_pauli_expression;
    use crate::solver::solve_with;

    fn op(expr: &str) -> TwoQubitOperator {
        parse_pauli_expression(expr).unwrap()
    }

    fn transverse_edge() -> SpinModel {
        SpinModel::from_parts(&[1.0, 1.0], vec![EdgeTerm::new(0, 1, op("-1.0*XI - 1.0*IX"))]).unwrap()
    }

    fn path(n: usize, expr: &str) -> SpinModel {
        let edges = (0..n - 1).map(|i| EdgeTerm::new(i, i + 1, op(expr))).collect();
        let gaps: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        SpinModel::from_parts(&gaps, edges).unwrap()
    }

    fn query(s: usize, t: usize, expr: &str, eps: f64, order: usize) -> CorrelatorQuery {
        CorrelatorQuery {
            s,
            t,
            observable: op(expr),
            eps,
            order,
        }
    }

    #[test]
    fn dual_ring_laws() {
        let a = DualScalar::new(Complex64::new(1.5, 0.5), Complex64::new(-2.0, 1.0));
        let b = DualScalar::new(Complex64::new(0.25, -1.0), Complex64::new(3.0, 0.0));
        let p = a * b;
        assert_eq!(p.val, a.val * b.val);
        assert_eq!(p.der, a.val * b.der + a.der * b.val);
        let back = p / b;
        assert!((back.val - a.val).norm() < 1e-14 && (back.der - a.der).norm() < 1e-13);
        let eta = DualScalar::eta(Complex64::new(1.0, 0.0));
        assert!((eta * eta).is_zero());
    }

    #[test]
    fn transverse_field_magnetisation() {
        let c = correlator(&transverse_edge(), &query(0, 1, "ZI", 1e-7, 4)).unwrap();
        let want = [1.0, 0.0, -2.0, 0.0, 6.0];
        for (q, w) in want.iter().enumerate() {
            assert!((c.coefficients[q].re - w).abs() < 1e-9, "E_{q},1 = {}", c.coefficients[q]);
        }
        assert_eq!(c.regime, Regime::Bounded);
        assert!(c.bound.is_some());
    }

    #[test]
    fn zero_epsilon_and_identity() {
        let model = path(4, "0.3*XX - 0.5*ZI + 0.2*YY");
        let c = correlator(&model, &query(1, 2, "0.7*ZZ + 0.2*XI", 0.0, 3)).unwrap();
        assert_eq!(c.value, Complex64::new(0.7, 0.0));
        let c = correlator(&model, &query(0, 3, "II", 1e-6, 4)).unwrap();
        assert_eq!(c.coefficients[0], Complex64::new(1.0, 0.0));
        assert!(c.coefficients[1..].iter().all(|z| z.norm() < 1e-14));
        assert!((c.value.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_observables() {
        let model = path(3, "XX");
        let mut bad = op("XX");
        bad.set(0, 3, Complex64::new(0.0, 1.0));
        let q = CorrelatorQuery {
            s: 0,
            t: 1,
            observable: bad,
            eps: 0.0,
            order: 2,
        };
        assert!(matches!(correlator(&model, &q), Err(Error::InvalidObservable(_))));
        assert!(matches!(correlator(&model, &query(1, 1, "ZZ", 0.0, 2)), Err(Error::InvalidArgument(_))));
        assert!(matches!(correlator(&model, &query(0, 7, "ZZ", 0.0, 2)), Err(Error::InvalidVertex(7))));
    }

    #[test]
    fn large_observable_is_rescaled_exactly() {
        let model = path(3, "0.5*XX + 0.25*ZI");
        let small = correlator(&model, &query(0, 2, "ZZ", 1e-7, 3)).unwrap();
        let big = correlator(&model, &query(0, 2, "8.0*ZZ", 1e-7, 3)).unwrap();
        assert!(big.scale < 1.0);
        for (a, b) in small.coefficients.iter().zip(&big.coefficients) {
            assert_eq!(*a * 8.0, *b);
        }
        assert_eq!(big.bound.unwrap(), small.bound.unwrap() * 8.0);
    }

    #[test]
    fn dual_run_without_eta_matches_plain_run_bitwise() {
        let model = path(5, "(0.3+0.1i)*XY + (0.3-0.1i)*YX - 0.4*ZX - 0.4*XZ + 0.2*ZZ");
        let plain = solve_with(&model, 5, SolveOptions::default());
        let dual = solve_weighted(WeightedModel::<DualScalar>::from_model(&model), 5, SolveOptions::default());
        for q in 1..=5 {
            let a = plain.table().order(q).unwrap().entries();
            let b = dual.table().order(q).unwrap().entries();
            assert_eq!(a.len(), b.len());
            for ((ma, ca), (mb, cb)) in a.iter().zip(b) {
                assert_eq!(ma, mb);
                assert_eq!(*ca, cb.val);
                assert!(cb.der.is_zero());
            }
        }
    }

    #[test]
    fn dual_matches_finite_differences() {
        let model = path(4, "0.6*XX + 0.3*YY - 0.5*ZX - 0.5*XZ + 0.2*IZ");
        let obs = op("0.8*ZZ + 0.3*XI + 0.3*IX");
        let (s, t, p) = (1, 3, 5);
        let dual = solve_weighted(augmented_model(&model, s, t, &obs), p, SolveOptions::default());
        let dual_e = energy_coefficients_in(&dual, p + 1, &mut EnergyDiagnostics::default());
        let h = 1e-5;
        let plain = |eta: f64| {
            let m = model.with_edge(EdgeTerm::new(s, t, obs.scale(Complex64::new(eta, 0.0)))).unwrap();
            let st = solve_with(&m, p, SolveOptions::default());
            energy_coefficients_in(&st, p + 1, &mut EnergyDiagnostics::default())
        };
        let (plus, minus) = (plain(h), plain(-h));
        for r in 0..=p {
            let fd = (plus[r] - minus[r]) / (2.0 * h);
            let d = dual_e[r].der;
            assert!((fd - d).norm() <= 1e-6 * d.norm().max(1.0), "r={} fd={fd} dual={d}", r + 1);
        }
    }

    #[test]
    fn restriction_of_a_path() {
        let model = path(5, "XX");
        let r = restrict_neighborhood(&model, 0, 1, 1).unwrap();
        assert_eq!(r.model.edges().len(), 2);
        assert_eq!((r.model.edges()[0].u, r.model.edges()[0].v), (0, 1));
        assert_eq!((r.model.edges()[1].u, r.model.edges()[1].v), (1, 2));
        assert_eq!(r.original, vec![0, 1, 2, 3]);
        let d = edge_distances(&model, 0, 1);
        assert_eq!(d, vec![0, 1, 2, 3]);
        let full = restrict_neighborhood(&model, 0, 1, 10).unwrap();
        assert_eq!(full.model, model);
    }

    #[test]
    fn restriction_drops_far_components() {
        let edges = vec![
            EdgeTerm::new(0, 1, op("XX")),
            EdgeTerm::new(2, 3, op("XX")),
        ];
        let model = SpinModel::from_parts(&[1.0; 4], edges).unwrap();
        let r = restrict_neighborhood(&model, 0, 1, 6).unwrap();
        assert_eq!(r.original, vec![0, 1]);
        assert_eq!(r.model.edges().len(), 1);
    }

    #[test]
    fn restricted_correlator_is_bit_identical() {
        let model = path(9, "0.6*XX + 0.3*YY - 0.5*ZX - 0.5*XZ + 0.2*IZ");
        for p in 0..=4 {
            let q = query(3, 4, "ZI + 0.5*XX", 1e-7, p);
            let full = correlator(&model, &q).unwrap();
            let r = restrict_neighborhood(&model, 3, 4, p).unwrap();
            let rq = CorrelatorQuery { s: r.s, t: r.t, ..q.clone() };
            let local = correlator(&r.model, &rq).unwrap();
            assert!(r.model.n() < model.n() || p >= 3);
            assert_eq!(full.coefficients, local.coefficients, "p={p}");
            assert_eq!(full.value, local.value);
        }
    }

    #[test]
    fn correlator_order_selection() {
        assert_eq!(choose_correlator_order(1.0, 1.0, 1).unwrap(), 0);
        assert_eq!(choose_correlator_order(2f64.powi(-20), 1.0, 4).unwrap(), 9);
        assert_eq!(choose_correlator_order(f64::INFINITY, 1.0, 4).unwrap(), 0);
        assert_eq!(choose_correlator_order(1e300, 1.0, 4).unwrap(), 0);
        assert!(matches!(choose_correlator_order(0.0, 1.0, 1), Err(Error::NonPositivePrecision(_))));
    }
}
