//! Vertex sets, unperturbed energies and the per-order coefficient tables with their
//! per-vertex bins.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Strictly increasing list of vertex ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VertexSet(SmallVec<[u32; 8]>);

impl VertexSet {
    pub fn empty() -> Self {
        VertexSet(SmallVec::new())
    }

    pub fn singleton(u: u32) -> Self {
        VertexSet(smallvec::smallvec![u])
    }

    /// Builds a set from arbitrary ids (sorted and deduplicated).
    pub fn from_ids<I: IntoIterator<Item = u32>>(ids: I) -> Self {
        let mut v: SmallVec<[u32; 8]> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VertexSet(v)
    }

    pub fn from_usizes<I: IntoIterator<Item = usize>>(ids: I) -> Self {
        Self::from_ids(ids.into_iter().map(|u| u as u32))
    }

    pub fn members(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, u: u32) -> bool {
        self.0.binary_search(&u).is_ok()
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.0.iter().all(|&u| other.contains(u))
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut out = SmallVec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            let next = match (self.0.get(i), other.0.get(j)) {
                (Some(&a), Some(&b)) if a == b => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(&a), Some(&b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(_), Some(&b)) => {
                    j += 1;
                    b
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            };
            out.push(next);
        }
        VertexSet(out)
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        VertexSet(self.0.iter().copied().filter(|&u| !other.contains(u)).collect())
    }

    /// Members other than `u` and `v`.
    pub fn without_pair(&self, u: u32, v: u32) -> VertexSet {
        VertexSet(self.0.iter().copied().filter(|&w| w != u && w != v).collect())
    }

    /// Two-bit local mask on an edge: bit 1 for `u`, bit 0 for `v`.
    #[inline]
    pub fn local_mask(&self, u: u32, v: u32) -> u8 {
        (u8::from(self.contains(u)) << 1) | u8::from(self.contains(v))
    }

    pub fn insert(&self, u: u32) -> VertexSet {
        match self.0.binary_search(&u) {
            Ok(_) => self.clone(),
            Err(pos) => {
                let mut v = self.0.clone();
                v.insert(pos, u);
                VertexSet(v)
            }
        }
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

/// E₀(M) = Σ_{u∈M} Δ_u.
pub fn e0(set: &VertexSet, gaps: &[f64]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut total = 0.0;
    for u in set.iter() {
        total += *gaps.get(u as usize).ok_or(Error::InvalidVertex(u as usize))?;
    }
    Ok(total)
}

/// E₀(M) accumulated in the scalar's own real type (members in increasing order).
pub(crate) fn e0_in<S: Scalar>(set: &VertexSet, gaps: &[S::Real]) -> S::Real {
    let mut it = set.iter();
    let first = it.next().expect("E0 of an empty set");
    it.fold(gaps[first as usize].clone(), |acc, u| acc + gaps[u as usize].clone())
}

/// Coefficients of a single order q, with bins `B_u` listing entry positions.
#[derive(Clone, Debug)]
pub struct OrderTable<S> {
    entries: Vec<(VertexSet, S)>,
    index: FxHashMap<VertexSet, usize>,
    bins: Vec<Vec<u32>>,
}

impl<S: Scalar> OrderTable<S> {
    fn new(n: usize) -> Self {
        OrderTable {
            entries: Vec::new(),
            index: FxHashMap::default(),
            bins: vec![Vec::new(); n],
        }
    }

    pub fn entries(&self) -> &[(VertexSet, S)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bin(&self, u: usize) -> &[u32] {
        &self.bins[u]
    }

    pub fn get(&self, set: &VertexSet) -> Option<&S> {
        self.index.get(set).map(|&i| &self.entries[i].1)
    }

    fn set(&mut self, set: VertexSet, value: S) {
        if let Some(&i) = self.index.get(&set) {
            self.entries[i].1 = value;
            return;
        }
        let pos = self.entries.len() as u32;
        for u in set.iter() {
            self.bins[u as usize].push(pos);
        }
        self.index.insert(set.clone(), pos as usize);
        self.entries.push((set, value));
    }

    /// χ_q = max_u Σ_{M∋u} |C_q(M)|, evaluated through the bins.
    pub fn one_norm(&self) -> f64 {
        self.bins
            .iter()
            .map(|bin| bin.iter().map(|&i| self.entries[i as usize].1.magnitude()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// C_q(M) for q = 1..=max_order, indexed by order and through per-vertex bins.
#[derive(Clone, Debug)]
pub struct CoefficientTable<S> {
    n: usize,
    orders: Vec<OrderTable<S>>,
}

impl<S: Scalar> CoefficientTable<S> {
    pub fn new(n: usize) -> Self {
        CoefficientTable { n, orders: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_order(&self) -> usize {
        self.orders.len()
    }

    fn order_mut(&mut self, q: usize) -> &mut OrderTable<S> {
        assert!(q >= 1, "orders start at 1");
        while self.orders.len() < q {
            self.orders.push(OrderTable::new(self.n));
        }
        &mut self.orders[q - 1]
    }

    pub fn order(&self, q: usize) -> Option<&OrderTable<S>> {
        q.checked_sub(1).and_then(|i| self.orders.get(i))
    }

    /// Stores C_q(M), replacing any previous value.
    pub fn insert(&mut self, q: usize, set: VertexSet, value: S) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(&bad) = set.members().iter().find(|&&u| u as usize >= self.n) {
            return Err(Error::InvalidVertex(bad as usize));
        }
        self.order_mut(q).set(set, value);
        Ok(())
    }

    /// C_q(M), zero when absent.
    pub fn lookup(&self, q: usize, set: &VertexSet) -> Result<S> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(self.get(q, set).cloned().unwrap_or_else(S::zero))
    }

    pub fn get(&self, q: usize, set: &VertexSet) -> Option<&S> {
        self.order(q).and_then(|t| t.get(set))
    }

    /// Installs a complete order from accumulated sums, in increasing set order.
    /// Exact zeros, and entries whose magnitude is below `threshold`, are dropped.
    pub(crate) fn install_order(&mut self, q: usize, mut values: Vec<(VertexSet, S)>, threshold: f64) {
        values.sort_by(|a, b| a.0.cmp(&b.0));
        let table = self.order_mut(q);
        for (set, value) in values {
            if value.is_zero() || (threshold > 0.0 && value.magnitude() < threshold) {
                continue;
            }
            table.set(set, value);
        }
    }

    /// Entries of order q whose set meets {u, v}: all of `B_u`, then the part of `B_v`
    /// not already containing `u`.
    pub fn bin_candidates(&self, u: usize, v: usize, q: usize) -> Vec<(&VertexSet, &S)> {
        self.bin_candidate_indices(u, v, q)
            .into_iter()
            .map(|i| {
                let (m, c) = &self.orders[q - 1].entries[i as usize];
                (m, c)
            })
            .collect()
    }

    pub(crate) fn bin_candidate_indices(&self, u: usize, v: usize, q: usize) -> Vec<u32> {
        let Some(table) = self.order(q) else {
            return Vec::new();
        };
        let mut out: Vec<u32> = table.bins[u].clone();
        out.extend(
            table.bins[v]
                .iter()
                .copied()
                .filter(|&i| !table.entries[i as usize].0.contains(u as u32)),
        );
        out
    }

    pub fn one_norm(&self, q: usize) -> f64 {
        self.order(q).map_or(0.0, OrderTable::one_norm)
    }

    /// Every stored (M, q) appears in `B_u` for each u ∈ M and nowhere else.
    pub fn bins_consistent(&self) -> bool {
        self.orders.iter().all(|t| {
            let mut expected = 0usize;
            for (i, (set, _)) in t.entries.iter().enumerate() {
                expected += set.len();
                for u in set.iter() {
                    if !t.bins[u as usize].contains(&(i as u32)) {
                        return false;
                    }
                }
            }
            let listed: usize = t.bins.iter().map(Vec::len).sum();
            let each_valid = t.bins.iter().enumerate().all(|(u, bin)| {
                bin.iter().all(|&i| t.entries[i as usize].0.contains(u as u32))
            });
            listed == expected && each_valid && t.index.len() == t.entries.len()
        })
    }

    pub fn total_entries(&self) -> usize {
        self.orders.iter().map(OrderTable::len).sum()
    }

    /// Maps the table into another scalar ring channel by channel.
    pub fn map<T: Scalar>(&self, mut f: impl FnMut(&S) -> T) -> CoefficientTable<T> {
        let mut out = CoefficientTable::new(self.n);
        for (qi, t) in self.orders.iter().enumerate() {
            let dst = out.order_mut(qi + 1);
            for (set, value) in &t.entries {
                dst.set(set.clone(), f(value));
            }
        }
        out
    }
}

#[derive(Serialize)]
struct DumpLine<'a> {
    q: usize,
    #[serde(rename = "M")]
    set: &'a [u32],
    re: f64,
    im: f64,
}

/// Writes the table as JSON lines sorted by (q, M).
pub fn dump_coefficients<S: Scalar, W: Write>(table: &CoefficientTable<S>, mut out: W) -> Result<()> {
    for (qi, t) in table.orders.iter().enumerate() {
        let mut rows: Vec<&(VertexSet, S)> = t.entries.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        for (set, value) in rows {
            let z: Complex64 = value.leading();
            let line = DumpLine {
                q: qi + 1,
                set: set.members(),
                re: z.re,
                im: z.im,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
