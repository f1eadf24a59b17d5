//! Matrix elements ⟨M| â†_{M₁}···â†_{M_k}(V_uv) |Ω⟩ of nested commutators with a single
//! edge operator, where â†_A(X) = [a†_A, X].
//!
//! Expanding the commutators gives Σ_T (−1)^{|T|} ⟨M| a†_{L(T)} V a†_{R(T)} |Ω⟩ over the
//! subsets T of factors moved to the right of V. Each surviving term is a single entry of
//! the 4×4 edge matrix, so the expansion is first reduced to an integer pattern over the
//! sixteen entries and only then contracted with the operator. Terms that cancel
//! algebraically therefore cancel exactly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::EdgeTerm;
use crate::scalar::Scalar;
use crate::setalg::VertexSet;

/// Edge operator in the local `2·b_u + b_v` basis over an arbitrary scalar ring.
pub type LocalOp<S> = [[S; 4]; 4];

/// Integer multiplicities of each operator entry in a matrix element.
pub type Pattern = [[i32; 4]; 4];

pub fn local_op(edge: &EdgeTerm) -> LocalOp<Complex64> {
    *edge.op.entries()
}

fn union_disjoint(sets: &[&VertexSet], pick: impl Fn(usize) -> bool) -> Option<VertexSet> {
    let mut acc = VertexSet::empty();
    for (j, s) in sets.iter().enumerate() {
        if pick(j) {
            if !acc.is_disjoint(s) {
                return None;
            }
            acc = acc.union(s);
        }
    }
    Some(acc)
}

/// True when the element is provably zero: some factor misses the edge, or the target
/// is not sandwiched as N∖{u,v} ⊆ M ⊆ N∪{u,v} with N the union of the factors.
pub fn prune(target: &VertexSet, sets: &[&VertexSet], u: u32, v: u32) -> bool {
    if sets.iter().any(|s| !s.contains(u) && !s.contains(v)) {
        return true;
    }
    let n = sets.iter().fold(VertexSet::empty(), |acc, s| acc.union(s));
    let lower = n.without_pair(u, v);
    let upper = n.insert(u).insert(v);
    !(lower.is_subset(target) && target.is_subset(&upper))
}

/// Multiplicity pattern of the commutator expansion for arbitrary sets.
pub fn element_pattern(target: &VertexSet, sets: &[&VertexSet], u: u32, v: u32) -> Pattern {
    let mut pattern = [[0i32; 4]; 4];
    let k = sets.len();
    assert!(k < 31, "too many factors");
    for t in 0u32..(1 << k) {
        let in_right = |j: usize| t & (1 << j) != 0;
        let Some(left) = union_disjoint(sets, |j| !in_right(j)) else {
            continue;
        };
        let Some(right) = union_disjoint(sets, in_right) else {
            continue;
        };
        if !left.is_subset(target) {
            continue;
        }
        let bra = target.difference(&left);
        if bra.without_pair(u, v) != right.without_pair(u, v) {
            continue;
        }
        let sign = if t.count_ones() % 2 == 0 { 1 } else { -1 };
        pattern[bra.local_mask(u, v) as usize][right.local_mask(u, v) as usize] += sign;
    }
    pattern
}

/// Contracts a multiplicity pattern with an operator; exact zero when the pattern is empty.
pub fn contract<S: Scalar>(pattern: &Pattern, op: &LocalOp<S>) -> S {
    let mut acc = S::zero();
    for (r, row) in pattern.iter().enumerate() {
        for (c, &m) in row.iter().enumerate() {
            match m {
                0 => {}
                1 => acc += op[r][c].clone(),
                -1 => acc += -op[r][c].clone(),
                m => acc += op[r][c].clone() * S::from_f64(m as f64),
            }
        }
    }
    acc
}

/// ⟨M| â†_{M₁}···â†_{M_k}(V) |Ω⟩ for any sets and any k.
pub fn matrix_element(target: &VertexSet, sets: &[&VertexSet], edge: &EdgeTerm) -> Complex64 {
    matrix_element_in(target, sets, edge.u as u32, edge.v as u32, &local_op(edge))
}

pub fn matrix_element_in<S: Scalar>(
    target: &VertexSet,
    sets: &[&VertexSet],
    u: u32,
    v: u32,
    op: &LocalOp<S>,
) -> S {
    contract(&element_pattern(target, sets, u, v), op)
}

/// Sign-adjusted vacuum element (−1)^k ⟨Ω| V a†_{M_k}···a†_{M_1} |Ω⟩ for sets inside {u,v}.
pub fn vacuum_element(sets: &[&VertexSet], edge: &EdgeTerm) -> Result<Complex64> {
    let (u, v) = (edge.u as u32, edge.v as u32);
    let mut masks = Vec::with_capacity(sets.len());
    for s in sets {
        if s.is_empty() || s.members().iter().any(|&w| w != u && w != v) {
            return Err(Error::InvalidSubset {
                set: s.members().to_vec(),
                u: edge.u,
                v: edge.v,
            });
        }
        masks.push(s.local_mask(u, v));
    }
    Ok(vacuum_value(&masks, &local_op(edge)))
}

/// Vacuum element from local masks: zero unless the masks are pairwise disjoint.
pub fn vacuum_value<S: Scalar>(masks: &[u8], op: &LocalOp<S>) -> S {
    let mut union = 0u8;
    for &m in masks {
        if union & m != 0 {
            return S::zero();
        }
        union |= m;
    }
    let value = op[0][union as usize].clone();
    if masks.len() % 2 == 0 {
        value
    } else {
        -value
    }
}

/// Pattern of an element whose factors only differ from the target through the edge.
///
/// Valid when the factors' parts outside {u,v} are pairwise disjoint and the target's
/// outside part is exactly their union; `target_mask` then fixes the target.
pub fn local_pattern(masks: &[u8], target_mask: u8) -> Pattern {
    let mut pattern = [[0i32; 4]; 4];
    let k = masks.len();
    'terms: for t in 0u32..(1 << k) {
        let (mut left, mut right) = (0u8, 0u8);
        for (j, &m) in masks.iter().enumerate() {
            let side = if t & (1 << j) != 0 { &mut right } else { &mut left };
            if *side & m != 0 {
                continue 'terms;
            }
            *side |= m;
        }
        if left & !target_mask != 0 {
            continue;
        }
        let sign = if t.count_ones() % 2 == 0 { 1 } else { -1 };
        pattern[(target_mask & !left) as usize][right as usize] += sign;
    }
    pattern
}

/// Upper limit on the number of nested commutators; five or more vanish identically.
pub const MAX_NESTING: usize = 4;

const OFFSETS: [usize; MAX_NESTING + 1] = [0, 0, 3, 12, 39];
const TABLE_LEN: usize = 120;

/// Position of a mask tuple (each mask in 1..=3) in the flattened local table.
#[inline]
pub(crate) fn tuple_index(masks: &[u8]) -> usize {
    let mut idx = 0usize;
    for &m in masks.iter().rev() {
        idx = idx * 3 + (m as usize - 1);
    }
    OFFSETS[masks.len()] + idx
}

/// Precomputed values of every local element of one edge, for 1 ≤ k ≤ 4 and every
/// target mask, optionally scaled by 1/k!.
#[derive(Clone, Debug)]
pub struct LocalKernel<S> {
    values: Vec<[S; 4]>,
}

impl<S: Scalar> LocalKernel<S> {
    pub fn new(op: &LocalOp<S>, with_factorial: bool) -> Self {
        let mut values: Vec<[S; 4]> = (0..TABLE_LEN)
            .map(|_| [S::zero(), S::zero(), S::zero(), S::zero()])
            .collect();
        let mut factorial = 1.0;
        for k in 1..=MAX_NESTING {
            factorial *= k as f64;
            let count = 3usize.pow(k as u32);
            for code in 0..count {
                let mut masks = [0u8; MAX_NESTING];
                let mut c = code;
                for m in masks.iter_mut().take(k) {
                    *m = (c % 3) as u8 + 1;
                    c /= 3;
                }
                let masks = &masks[..k];
                let idx = tuple_index(masks);
                for target in 0..4u8 {
                    let raw = contract(&local_pattern(masks, target), op);
                    values[idx][target as usize] = if with_factorial && !raw.is_zero() {
                        raw.div_real(&S::real(factorial))
                    } else {
                        raw
                    };
                }
            }
        }
        LocalKernel { values }
    }

    #[inline]
    pub fn row(&self, masks: &[u8]) -> &[S; 4] {
        &self.values[tuple_index(masks)]
    }

    #[inline]
    pub fn value(&self, masks: &[u8], target_mask: u8) -> &S {
        &self.row(masks)[target_mask as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TwoQubitOperator;
    use crate::pauli::parse_pauli_expression;
    use proptest::prelude::*;

    fn set(ids: &[u32]) -> VertexSet {
        VertexSet::from_ids(ids.iter().copied())
    }

    fn edge(expr: &str) -> EdgeTerm {
        EdgeTerm::new(0, 1, parse_pauli_expression(expr).unwrap())
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn prune_examples() {
        assert!(prune(&set(&[0]), &[&set(&[5])], 0, 1));
        assert!(prune(&set(&[0, 7]), &[&set(&[0, 3])], 0, 1));
        assert!(!prune(&set(&[0, 1]), &[&set(&[0])], 0, 1));
        assert!(prune(&set(&[0]), &[&set(&[0, 3])], 0, 1));
        assert!(!prune(&set(&[1, 3]), &[&set(&[0, 3])], 0, 1));
    }

    #[test]
    fn bare_element() {
        let e = edge("XX");
        assert_eq!(matrix_element(&set(&[0, 1]), &[], &e), c(1.0));
        assert_eq!(matrix_element(&set(&[0]), &[], &e), c(0.0));
    }

    #[test]
    fn single_commutator_on_vacuum() {
        let e = edge("XI");
        assert_eq!(matrix_element(&VertexSet::empty(), &[&set(&[0])], &e), c(-1.0));
    }

    #[test]
    fn repeated_singleton_outside_target_vanishes() {
        let e = edge("(0.3+0.1i)*XY - 1.2*ZX + 0.7*YY + XI");
        let u = set(&[0]);
        for target in [set(&[]), set(&[1]), set(&[1, 4])] {
            assert!(matrix_element(&target, &[&u, &u], &e).is_zero());
        }
    }

    #[test]
    fn repeated_singleton_inside_target() {
        // Only the split with one copy on each side survives, twice.
        let e = edge("(0.3+0.1i)*XY - 1.2*ZX + 0.7*YY + XI");
        let u = set(&[0]);
        let got = matrix_element(&set(&[0, 1]), &[&u, &u], &e);
        assert_eq!(got, -c(2.0) * e.op.get(1, 2));
    }

    #[test]
    fn vacuum_examples() {
        let e = edge("-1.0*XI - 1.0*IX");
        assert_eq!(vacuum_element(&[&set(&[0])], &e).unwrap(), c(1.0));
        let mut op = TwoQubitOperator::zero();
        op.set(0, 3, Complex64::new(0.4, -0.2));
        let e2 = EdgeTerm::new(0, 1, op);
        let got = vacuum_element(&[&set(&[0]), &set(&[1])], &e2).unwrap();
        assert_eq!(got, Complex64::new(0.4, -0.2));
        assert!(vacuum_element(&[&set(&[0]), &set(&[0])], &e2).unwrap().is_zero());
        assert!(matches!(
            vacuum_element(&[&set(&[0, 2])], &e2),
            Err(Error::InvalidSubset { .. })
        ));
    }

    #[test]
    fn five_nested_commutators_vanish() {
        let e = edge("(0.3+0.1i)*XY - 1.2*ZX + 0.7*YY + XI + 0.5*IZ");
        let sets = [set(&[0]), set(&[1]), set(&[0, 1]), set(&[0, 2]), set(&[1, 3])];
        let refs: Vec<&VertexSet> = sets.iter().collect();
        for target in [set(&[]), set(&[0, 1, 2, 3]), set(&[2, 3]), set(&[0, 2, 3])] {
            for perm in [[0, 1, 2, 3, 4], [4, 3, 2, 1, 0], [0, 0, 1, 1, 3]] {
                let chosen: Vec<&VertexSet> = perm.iter().map(|&i| refs[i]).collect();
                assert_eq!(element_pattern(&target, &chosen, 0, 1), [[0; 4]; 4]);
                assert!(matrix_element(&target, &chosen, &e).is_zero());
            }
        }
    }

    #[test]
    fn local_table_matches_general_expansion() {
        let e = edge("(0.3+0.1i)*XY - 1.2*ZX + 0.7*YY + XI + 0.5*IZ - 2i*ZY");
        let op = local_op(&e);
        let table = LocalKernel::new(&op, false);
        let locals = [set(&[1]), set(&[0]), set(&[0, 1])];
        // Give each factor a private outside vertex so the target is N_out ∪ S.
        for k in 1..=4usize {
            for code in 0..3usize.pow(k as u32) {
                let mut c = code;
                let mut masks = Vec::new();
                let mut sets = Vec::new();
                for j in 0..k {
                    let m = c % 3 + 1;
                    c /= 3;
                    masks.push(m as u8);
                    let mut s = locals[m - 1].clone();
                    if j % 2 == 0 {
                        s = s.insert(10 + j as u32);
                    }
                    sets.push(s);
                }
                let refs: Vec<&VertexSet> = sets.iter().collect();
                let outside = sets.iter().fold(VertexSet::empty(), |a, s| a.union(s)).without_pair(0, 1);
                for target_mask in 0..4u8 {
                    let mut target = outside.clone();
                    if target_mask & 2 != 0 {
                        target = target.insert(0);
                    }
                    if target_mask & 1 != 0 {
                        target = target.insert(1);
                    }
                    let want = matrix_element_in(&target, &refs, 0, 1, &op);
                    assert_eq!(*table.value(&masks, target_mask), want);
                    if target_mask == 0 && outside.is_empty() {
                        assert_eq!(vacuum_value(&masks, &op), want);
                    }
                }
            }
        }
    }

    fn arb_set() -> impl Strategy<Value = VertexSet> {
        proptest::collection::vec(0u32..6, 1..4).prop_map(VertexSet::from_ids)
    }

    fn arb_op() -> impl Strategy<Value = TwoQubitOperator> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16).prop_map(|xs| {
            let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
            for (i, (re, im)) in xs.into_iter().enumerate() {
                m[i / 4][i % 4] = Complex64::new(re, im);
            }
            TwoQubitOperator::new(m)
        })
    }

    proptest! {
        #[test]
        fn pruning_is_sound(
            target in proptest::collection::vec(0u32..6, 0..5).prop_map(VertexSet::from_ids),
            sets in proptest::collection::vec(arb_set(), 1..5),
            op in arb_op(),
        ) {
            let refs: Vec<&VertexSet> = sets.iter().collect();
            let e = EdgeTerm::new(0, 1, op);
            if prune(&target, &refs, 0, 1) {
                prop_assert!(matrix_element(&target, &refs, &e).is_zero());
            }
        }

        #[test]
        fn vacuum_agrees_with_general_element(
            masks in proptest::collection::vec(1u8..4, 1..5),
            op in arb_op(),
        ) {
            let sets: Vec<VertexSet> = masks
                .iter()
                .map(|&m| VertexSet::from_ids([(m & 2 != 0).then_some(0u32), (m & 1 != 0).then_some(1u32)].into_iter().flatten()))
                .collect();
            let refs: Vec<&VertexSet> = sets.iter().collect();
            let e = EdgeTerm::new(0, 1, op);
            let vac = vacuum_element(&refs, &e).unwrap();
            prop_assert_eq!(vac, matrix_element(&VertexSet::empty(), &refs, &e));
            if masks.len() >= 3 {
                prop_assert!(vac.is_zero());
            }
        }
    }
}
