//! Linked clusters: enumeration of connected vertex sets, the counting bound and the
//! connected size |M|_c (minimum-vertex Steiner tree).

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::SpinModel;
use crate::setalg::VertexSet;

/// Simple undirected graph; parallel edges collapse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyGraph {
    adj: Vec<Vec<u32>>,
}

impl AdjacencyGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            if a != b {
                adj[a].push(b as u32);
                adj[b].push(a as u32);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        AdjacencyGraph { adj }
    }

    pub fn from_model(model: &SpinModel) -> Self {
        Self::new(model.n(), model.edges().iter().map(|e| (e.u, e.v)))
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adj[u]
    }

    /// Maximum number of distinct neighbours.
    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_connected_set(&self, set: &VertexSet) -> bool {
        let Some(start) = set.iter().next() else {
            return false;
        };
        let mut seen = vec![start];
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for &y in &self.adj[x as usize] {
                if set.contains(y) && !seen.contains(&y) {
                    seen.push(y);
                    stack.push(y);
                }
            }
        }
        seen.len() == set.len()
    }

    fn distances_from(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            for &y in &self.adj[x] {
                if dist[y as usize] == usize::MAX {
                    dist[y as usize] = dist[x] + 1;
                    queue.push_back(y as usize);
                }
            }
        }
        dist
    }
}

struct Enumeration<'a> {
    graph: &'a AdjacencyGraph,
    size: usize,
    current: Vec<u32>,
    in_set: Vec<bool>,
    banned: Vec<bool>,
    out: Vec<VertexSet>,
}

impl Enumeration<'_> {
    // Branch on the first frontier vertex: take it, or forbid it for the rest of this branch.
    fn grow(&mut self, frontier: &[u32]) {
        if self.current.len() == self.size {
            self.out.push(VertexSet::from_ids(self.current.iter().copied()));
            return;
        }
        let Some((&w, rest)) = frontier.split_first() else {
            return;
        };
        let mut next = rest.to_vec();
        for &y in self.graph.neighbors(w as usize) {
            if !self.in_set[y as usize] && !self.banned[y as usize] && y != w && !next.contains(&y) {
                next.push(y);
            }
        }
        self.current.push(w);
        self.in_set[w as usize] = true;
        self.grow(&next);
        self.in_set[w as usize] = false;
        self.current.pop();

        self.banned[w as usize] = true;
        self.grow(rest);
        self.banned[w as usize] = false;
    }
}

/// All connected vertex sets of size `p` containing `u`, sorted.
pub fn enumerate_clusters(graph: &AdjacencyGraph, u: usize, p: usize) -> Vec<VertexSet> {
    if p == 0 || u >= graph.n() {
        return Vec::new();
    }
    let mut e = Enumeration {
        graph,
        size: p,
        current: vec![u as u32],
        in_set: vec![false; graph.n()],
        banned: vec![false; graph.n()],
        out: Vec::new(),
    };
    e.in_set[u] = true;
    let frontier: Vec<u32> = graph.neighbors(u).to_vec();
    e.grow(&frontier);
    e.out.sort();
    e.out
}

/// (4d)^{p−1} with d the maximum number of distinct neighbours, saturating.
pub fn cluster_count_bound(graph: &AdjacencyGraph, p: usize) -> u128 {
    let base = 4 * graph.max_degree() as u128;
    (1..p).fold(1u128, |acc, _| acc.saturating_mul(base))
}

pub fn count_bound_holds(graph: &AdjacencyGraph, u: usize, p: usize) -> bool {
    enumerate_clusters(graph, u, p).len() as u128 <= cluster_count_bound(graph, p)
}

/// |M|_c: the fewest vertices of a connected set containing `set`.
pub fn connected_size(graph: &AdjacencyGraph, set: &VertexSet) -> Result<usize> {
    let terminals: Vec<usize> = set.iter().map(|u| u as usize).collect();
    let Some(&first) = terminals.first() else {
        return Err(Error::EmptySet);
    };
    if let Some(&bad) = terminals.iter().find(|&&u| u >= graph.n()) {
        return Err(Error::InvalidVertex(bad));
    }
    if terminals.len() == 1 {
        return Ok(1);
    }
    let from_first = graph.distances_from(first);
    if terminals.iter().any(|&t| from_first[t] == usize::MAX) {
        return Err(Error::Disconnected);
    }
    // Work inside the component of the terminals.
    let component: Vec<usize> = (0..graph.n()).filter(|&v| from_first[v] != usize::MAX).collect();
    let mut local = vec![usize::MAX; graph.n()];
    for (i, &v) in component.iter().enumerate() {
        local[v] = i;
    }
    let m = component.len();
    let dist: Vec<Vec<usize>> = component
        .iter()
        .map(|&v| {
            let d = graph.distances_from(v);
            component.iter().map(|&w| d[w]).collect()
        })
        .collect();
    let k = terminals.len();
    let full = (1usize << k) - 1;
    // best[S][v]: fewest vertices of a tree spanning terminals S and vertex v.
    let mut best = vec![vec![usize::MAX; m]; 1 << k];
    for (i, &t) in terminals.iter().enumerate() {
        let ti = local[t];
        for v in 0..m {
            best[1 << i][v] = dist[ti][v] + 1;
        }
    }
    for subset in 1..=full {
        if subset.count_ones() < 2 {
            continue;
        }
        let mut row = vec![usize::MAX; m];
        let mut part = (subset - 1) & subset;
        while part > 0 {
            let other = subset ^ part;
            if part < other {
                for v in 0..m {
                    let (a, b) = (best[part][v], best[other][v]);
                    if a != usize::MAX && b != usize::MAX {
                        row[v] = row[v].min(a + b - 1);
                    }
                }
            }
            part = (part - 1) & subset;
        }
        let mut relaxed = row.clone();
        for v in 0..m {
            for w in 0..m {
                if row[w] != usize::MAX {
                    relaxed[v] = relaxed[v].min(row[w] + dist[w][v]);
                }
            }
        }
        best[subset] = relaxed;
    }
    Ok(best[full][local[first]])
}
