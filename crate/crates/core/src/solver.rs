//! Order-by-order solution of the Kirkwood–Thomas equations.
//!
//! Order q+1 is built by forward accumulation: for every edge, every composition of q
//! into k ≤ 4 parts and every tuple of stored coefficients meeting the edge, the nested
//! commutator is evaluated against the (at most four) targets it can reach, and the
//! product of coefficients is scattered into those targets. Division by E₀(M) happens
//! once per target after all edges are merged.

use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::kernel::{LocalKernel, LocalOp, MAX_NESTING};
use crate::model::SpinModel;
use crate::scalar::Scalar;
use crate::setalg::{e0_in, CoefficientTable, VertexSet};

/// One edge with its operator and precomputed 1/k!-weighted local kernel.
#[derive(Clone, Debug)]
pub struct WeightedEdge<S: Scalar> {
    pub u: u32,
    pub v: u32,
    pub op: LocalOp<S>,
    kernel: LocalKernel<S>,
}

impl<S: Scalar> WeightedEdge<S> {
    pub fn new(u: usize, v: usize, op: LocalOp<S>) -> Self {
        let kernel = LocalKernel::new(&op, true);
        WeightedEdge {
            u: u as u32,
            v: v as u32,
            op,
            kernel,
        }
    }

    pub fn kernel(&self) -> &LocalKernel<S> {
        &self.kernel
    }
}

/// A model with its edge operators lifted into the scalar ring `S`.
#[derive(Clone, Debug)]
pub struct WeightedModel<S: Scalar> {
    gaps: Vec<f64>,
    gaps_wide: Vec<S::Real>,
    edges: Vec<WeightedEdge<S>>,
}

impl<S: Scalar> WeightedModel<S> {
    pub fn new(gaps: Vec<f64>, edges: Vec<WeightedEdge<S>>) -> Self {
        let gaps_wide = gaps.iter().map(|&g| S::real(g)).collect();
        WeightedModel {
            gaps,
            gaps_wide,
            edges,
        }
    }

    pub fn from_model(model: &SpinModel) -> Self {
        let edges = model
            .edges()
            .iter()
            .map(|e| WeightedEdge::new(e.u, e.v, lift(e.op.entries())))
            .collect();
        Self::new(model.gaps(), edges)
    }

    pub fn n(&self) -> usize {
        self.gaps.len()
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn edges(&self) -> &[WeightedEdge<S>] {
        &self.edges
    }

    pub(crate) fn e0(&self, set: &VertexSet) -> S::Real {
        e0_in::<S>(set, &self.gaps_wide)
    }
}

pub fn lift<S: Scalar>(m: &[[Complex64; 4]; 4]) -> LocalOp<S> {
    std::array::from_fn(|r| std::array::from_fn(|c| S::from_complex(m[r][c])))
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Entries with |C_q(M)| below this are dropped. 0 keeps every nonzero entry.
    pub prune_threshold: f64,
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            prune_threshold: 0.0,
            parallel: true,
        }
    }
}

/// Coefficient table solved through `order`, with the per-order norms χ_q.
#[derive(Clone, Debug)]
pub struct SolverState<S: Scalar> {
    model: WeightedModel<S>,
    table: CoefficientTable<S>,
    norms: Vec<f64>,
    options: SolveOptions,
}

impl<S: Scalar> SolverState<S> {
    pub fn model(&self) -> &WeightedModel<S> {
        &self.model
    }

    pub fn table(&self) -> &CoefficientTable<S> {
        &self.table
    }

    pub fn order(&self) -> usize {
        self.norms.len()
    }

    /// χ₁..χ_q.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Σ_{q≤p} C_q(M) ε^q, Horner-evaluated in the table's ring.
    pub fn partial_sum(&self, set: &VertexSet, p: usize, eps: &S) -> S {
        let mut acc = S::zero();
        for q in (1..=p.min(self.order())).rev() {
            if let Some(c) = self.table.get(q, set) {
                acc += c.clone();
            }
            acc = acc * eps.clone();
        }
        acc
    }
}

/// C₁(M) = ⟨M|V|Ω⟩ / E₀(M).
pub fn first_order<S: Scalar>(model: WeightedModel<S>, options: SolveOptions) -> SolverState<S> {
    let mut sums: FxHashMap<VertexSet, S> = FxHashMap::default();
    for e in &model.edges {
        for mask in 1..4u8 {
            let value = &e.op[mask as usize][0];
            if value.is_zero() {
                continue;
            }
            let target = local_set(&VertexSet::empty(), mask, e.u, e.v);
            add_into(&mut sums, target, value.clone());
        }
    }
    let mut state = SolverState {
        table: CoefficientTable::new(model.n()),
        model,
        norms: Vec::new(),
        options,
    };
    state.install(1, sums);
    state
}

/// Solves through order `p` (at least 1).
pub fn solve_weighted<S: Scalar>(model: WeightedModel<S>, p: usize, options: SolveOptions) -> SolverState<S> {
    let mut state = first_order(model, options);
    while state.order() < p {
        advance_order(&mut state);
    }
    state
}

/// Solves a validated model in double precision.
pub fn solve(model: &SpinModel, p: usize) -> SolverState<Complex64> {
    solve_weighted(WeightedModel::from_model(model), p, SolveOptions::default())
}

pub fn solve_with(model: &SpinModel, p: usize, options: SolveOptions) -> SolverState<Complex64> {
    solve_weighted(WeightedModel::from_model(model), p, options)
}

/// Builds order q+1 from orders 1..=q.
pub fn advance_order<S: Scalar>(state: &mut SolverState<S>) {
    let q = state.order();
    assert!(q >= 1, "first order must be computed first");
    let partials: Vec<FxHashMap<VertexSet, S>> = if state.options.parallel {
        (0..state.model.edges.len())
            .into_par_iter()
            .map(|e| edge_contributions(state, e, q))
            .collect()
    } else {
        (0..state.model.edges.len())
            .map(|e| edge_contributions(state, e, q))
            .collect()
    };
    let mut sums: FxHashMap<VertexSet, S> = FxHashMap::default();
    for partial in partials {
        for (set, value) in partial {
            add_into(&mut sums, set, value);
        }
    }
    state.install(q + 1, sums);
}

impl<S: Scalar> SolverState<S> {
    fn install(&mut self, q: usize, sums: FxHashMap<VertexSet, S>) {
        let values: Vec<(VertexSet, S)> = sums
            .into_iter()
            .map(|(set, value)| {
                let e0 = self.model.e0(&set);
                (set, value.div_real(&e0))
            })
            .collect();
        self.table.install_order(q, values, self.options.prune_threshold);
        self.norms.push(self.table.one_norm(q));
    }
}

fn add_into<S: Scalar>(sums: &mut FxHashMap<VertexSet, S>, set: VertexSet, value: S) {
    match sums.get_mut(&set) {
        Some(slot) => *slot += value,
        None => {
            sums.insert(set, value);
        }
    }
}

fn local_set(outside: &VertexSet, mask: u8, u: u32, v: u32) -> VertexSet {
    let mut set = outside.clone();
    if mask & 2 != 0 {
        set = set.insert(u);
    }
    if mask & 1 != 0 {
        set = set.insert(v);
    }
    set
}

/// Stored coefficient seen from one edge: its part away from the edge and its two-bit
/// footprint on the edge.
struct Candidate<'a, S> {
    outside: VertexSet,
    mask: u8,
    coeff: &'a S,
}

/// Ordered compositions of `total` into `parts` positive integers.
pub fn compositions(total: usize, parts: usize) -> Vec<SmallVec<[usize; MAX_NESTING]>> {
    fn rec(left: usize, parts: usize, cur: &mut SmallVec<[usize; MAX_NESTING]>, out: &mut Vec<SmallVec<[usize; MAX_NESTING]>>) {
        if parts == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for first in 1..=left.saturating_sub(parts - 1) {
            cur.push(first);
            rec(left - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts >= 1 && total >= parts {
        rec(total, parts, &mut SmallVec::new(), &mut out);
    }
    out
}

struct Walk<'a, S: Scalar> {
    edge: &'a WeightedEdge<S>,
    candidates: &'a [Vec<Candidate<'a, S>>],
    parts: &'a [usize],
    masks: [u8; MAX_NESTING],
    sums: FxHashMap<VertexSet, S>,
}

impl<S: Scalar> Walk<'_, S> {
    fn descend(&mut self, depth: usize, outside: &VertexSet, prod: Option<&S>) {
        let k = self.parts.len();
        if depth == k {
            let prod = prod.expect("at least one factor");
            let row = self.edge.kernel.row(&self.masks[..k]);
            for (target_mask, value) in row.iter().enumerate() {
                if value.is_zero() || (target_mask == 0 && outside.is_empty()) {
                    continue;
                }
                let target = local_set(outside, target_mask as u8, self.edge.u, self.edge.v);
                add_into(&mut self.sums, target, prod.clone() * value.clone());
            }
            return;
        }
        let candidates = self.candidates;
        let list = &candidates[self.parts[depth] - 1];
        for cand in list {
            if !cand.outside.is_disjoint(outside) {
                continue;
            }
            self.masks[depth] = cand.mask;
            let next_prod = match prod {
                None => cand.coeff.clone(),
                Some(p) => p.clone() * cand.coeff.clone(),
            };
            if cand.outside.is_empty() {
                self.descend(depth + 1, outside, Some(&next_prod));
            } else {
                let merged = outside.union(&cand.outside);
                self.descend(depth + 1, &merged, Some(&next_prod));
            }
        }
    }
}

fn edge_contributions<S: Scalar>(state: &SolverState<S>, e: usize, q: usize) -> FxHashMap<VertexSet, S> {
    let edge = &state.model.edges[e];
    let (u, v) = (edge.u, edge.v);
    let candidates: Vec<Vec<Candidate<S>>> = (1..=q)
        .map(|p| {
            let order = state.table.order(p).expect("lower orders are complete");
            state
                .table
                .bin_candidate_indices(u as usize, v as usize, p)
                .into_iter()
                .map(|i| {
                    let (set, coeff) = &order.entries()[i as usize];
                    Candidate {
                        outside: set.without_pair(u, v),
                        mask: set.local_mask(u, v),
                        coeff,
                    }
                })
                .collect()
        })
        .collect();
    let mut sums = FxHashMap::default();
    for k in 1..=MAX_NESTING.min(q) {
        for parts in compositions(q, k) {
            if parts.iter().any(|&p| candidates[p - 1].is_empty()) {
                continue;
            }
            let mut walk = Walk {
                edge,
                candidates: &candidates,
                parts: &parts,
                masks: [0; MAX_NESTING],
                sums,
            };
            walk.descend(0, &VertexSet::empty(), None);
            sums = walk.sums;
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EdgeTerm, TwoQubitOperator};
    use crate::pauli::parse_pauli_expression;

    fn set(ids: &[u32]) -> VertexSet {
        VertexSet::from_ids(ids.iter().copied())
    }

    fn single_edge(expr: &str) -> SpinModel {
        SpinModel::from_parts(&[1.0, 1.0], vec![EdgeTerm::new(0, 1, parse_pauli_expression(expr).unwrap())]).unwrap()
    }

    fn re(state: &SolverState<Complex64>, q: usize, ids: &[u32]) -> f64 {
        let z = state.table().lookup(q, &set(ids)).unwrap();
        assert!(z.im.abs() < 1e-15);
        z.re
    }

    #[test]
    fn compositions_are_ordered_and_complete() {
        let c = compositions(4, 2);
        let got: Vec<Vec<usize>> = c.into_iter().map(|x| x.to_vec()).collect();
        assert_eq!(got, vec![vec![1, 3], vec![2, 2], vec![3, 1]]);
        assert_eq!(compositions(3, 4).len(), 0);
        assert_eq!(compositions(6, 3).len(), 10);
    }

    #[test]
    fn first_order_examples() {
        let s = solve(&single_edge("XX"), 1);
        assert_eq!(re(&s, 1, &[0, 1]), 0.5);
        assert_eq!(re(&s, 1, &[0]), 0.0);
        let s = solve(&single_edge("-1.0*XI - 1.0*IX"), 1);
        assert_eq!(re(&s, 1, &[0]), -1.0);
        assert_eq!(re(&s, 1, &[1]), -1.0);
        assert_eq!(re(&s, 1, &[0, 1]), 0.0);
        assert_eq!(s.table().order(1).unwrap().len(), 2);
    }

    #[test]
    fn transverse_field_orders() {
        // C({u}) = −α with α = ε/(1 − E(ε)); the series is −ε + ε³ − ...
        let s = solve(&single_edge("-1.0*XI - 1.0*IX"), 5);
        assert_eq!(s.norms()[..3], [1.0, 0.0, 1.0]);
        assert!((re(&s, 3, &[0]) - 1.0).abs() < 1e-14);
        assert_eq!(re(&s, 2, &[0]), 0.0);
        for q in 1..=5 {
            assert!(s.table().lookup(q, &set(&[0, 1])).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn diagonal_coupling_gives_zero_table() {
        let op = TwoQubitOperator::diagonal([0.3, -1.0, 0.5, 2.0]);
        let model = SpinModel::from_parts(&[1.0, 2.0, 1.5], vec![EdgeTerm::new(0, 1, op.clone()), EdgeTerm::new(1, 2, op)]).unwrap();
        let s = solve(&model, 5);
        assert_eq!(s.table().total_entries(), 0);
        assert!(s.norms().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let op = parse_pauli_expression("0.3*XX + (0.2-0.1i)*XY + (0.2+0.1i)*YX - 0.4*ZX + 0.7*IZ").unwrap();
        let edges = (0..5).map(|i| EdgeTerm::new(i, (i + 1) % 6, op.clone())).collect();
        let model = SpinModel::from_parts(&[1.0, 1.5, 1.2, 1.1, 2.0, 1.0], edges).unwrap();
        let a = solve_with(&model, 5, SolveOptions { prune_threshold: 0.0, parallel: true });
        let b = solve_with(&model, 5, SolveOptions { prune_threshold: 0.0, parallel: false });
        for q in 1..=5 {
            assert_eq!(a.table().order(q).unwrap().entries(), b.table().order(q).unwrap().entries());
        }
    }
}
