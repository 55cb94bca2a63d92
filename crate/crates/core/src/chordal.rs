//! Chordal graph machinery: elimination orderings, symbolic fill, chordal
//! extension, maximal cliques, and clique merging.
//!
//! A symmetric sparsity pattern is treated as an undirected graph.  Patterns
//! that are chordal admit a perfect elimination ordering (PEO); general
//! patterns are extended to chordal ones by running symbolic elimination
//! under a minimum-degree ordering and keeping the fill.  The maximal cliques
//! of the extended pattern are what the semidefinite solver projects onto,
//! so small cliques are merged into larger blocks up to a size threshold to
//! cut per-iteration overhead.

use std::collections::BTreeSet;

use crate::sparsemat::{SymPattern, TrilIndexMap};

#[derive(Debug, thiserror::Error)]
pub enum ChordalError {
    #[error("ordering is not a permutation of 0..{n}")]
    InvalidOrdering { n: usize },
    #[error("pattern is not chordal under the supplied ordering")]
    NotChordal,
    #[error("clique block threshold must be at least 1")]
    BadThreshold,
}

/// A permutation of the vertices.  Which end is eliminated first is a
/// property of the producing routine; see [`mcs_order`] and
/// [`min_degree_order`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationOrdering {
    order: Vec<usize>,
    inverse: Vec<usize>,
}

impl EliminationOrdering {
    pub fn new(order: Vec<usize>) -> Result<Self, ChordalError> {
        let n = order.len();
        let mut inverse = vec![usize::MAX; n];
        for (pos, &v) in order.iter().enumerate() {
            if v >= n || inverse[v] != usize::MAX {
                return Err(ChordalError::InvalidOrdering { n });
            }
            inverse[v] = pos;
        }
        Ok(EliminationOrdering { order, inverse })
    }

    /// Vertex at each position.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of each vertex.
    pub fn position(&self, v: usize) -> usize {
        self.inverse[v]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn reversed(&self) -> EliminationOrdering {
        let mut order = self.order.clone();
        order.reverse();
        EliminationOrdering::new(order).expect("reversal preserves permutation")
    }
}

/// Maximum cardinality search.  Returns the visit order: each step picks the
/// unvisited vertex with the most visited neighbors, ties to the smallest
/// index.  On a chordal pattern the reverse of this order is a perfect
/// elimination ordering.
pub fn mcs_order(p: &SymPattern) -> EliminationOrdering {
    let n = p.n();
    let adj = p.adjacency();
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !visited[v])
            .max_by_key(|&v| (weight[v], usize::MAX - v))
            .expect("unvisited vertex remains");
        visited[v] = true;
        order.push(v);
        for &w in &adj[v] {
            if !visited[w] {
                weight[w] += 1;
            }
        }
    }
    EliminationOrdering::new(order).expect("visit order is a permutation")
}

/// Greedy minimum-degree ordering: `order[0]` is eliminated first, with
/// fill edges inserted as elimination proceeds.  Ties go to the smallest
/// vertex index.
pub fn min_degree_order(p: &SymPattern) -> EliminationOrdering {
    let n = p.n();
    let mut adj: Vec<BTreeSet<usize>> = p
        .adjacency()
        .into_iter()
        .map(|list| list.into_iter().collect())
        .collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !eliminated[v])
            .min_by_key(|&v| (adj[v].len(), v))
            .expect("vertex remains");
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nbrs {
            adj[a].remove(&v);
        }
        for (x, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[x + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    EliminationOrdering::new(order).expect("elimination order is a permutation")
}

/// Symbolic elimination: processes vertices in `ord` order (`ord.order()[0]`
/// first), connecting the not-yet-eliminated neighbors of each eliminated
/// vertex.  Returns the input pattern plus all fill edges.
pub fn symbolic_fill(p: &SymPattern, ord: &EliminationOrdering) -> SymPattern {
    assert_eq!(ord.len(), p.n(), "ordering length mismatch");
    let n = p.n();
    let mut adj: Vec<BTreeSet<usize>> = p
        .adjacency()
        .into_iter()
        .map(|list| list.into_iter().collect())
        .collect();
    let mut edges: Vec<(usize, usize)> = p
        .entries()
        .iter()
        .copied()
        .filter(|&(i, j)| i != j)
        .collect();
    let mut eliminated = vec![false; n];
    for &v in ord.order() {
        eliminated[v] = true;
        let nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !eliminated[w]).collect();
        for (x, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[x + 1..] {
                if adj[a].insert(b) {
                    adj[b].insert(a);
                    edges.push((a.max(b), a.min(b)));
                }
            }
        }
    }
    SymPattern::from_edges(n, edges).expect("fill pattern")
}

/// Whether the pattern is chordal: the reverse of a maximum cardinality
/// search order must eliminate with zero fill.
pub fn is_chordal(p: &SymPattern) -> bool {
    let elim = mcs_order(p).reversed();
    symbolic_fill(p, &elim).len() == p.len()
}

/// Chordal extension: symbolic fill under a minimum-degree ordering.
///
/// Returns the extended pattern together with an ordering whose *reverse* is
/// a perfect elimination ordering of it, which is the form
/// [`maximal_cliques`] consumes.
pub fn chordal_extension(p: &SymPattern) -> (SymPattern, EliminationOrdering) {
    let elim = min_degree_order(p);
    let extended = symbolic_fill(p, &elim);
    (extended, elim.reversed())
}

/// One dense block of the decomposition: a sorted set of vertices plus the
/// lower-triangle layout of its full local matrix.
#[derive(Clone, Debug)]
pub struct Clique {
    vertices: Vec<usize>,
    tril: TrilIndexMap,
}

impl Clique {
    fn from_vertices(vertices: Vec<usize>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        let tril = TrilIndexMap::new(SymPattern::full(vertices.len()));
        Clique { vertices, tril }
    }

    /// Member vertices, ascending.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Lower-triangle layout of the dense local block.
    pub fn tril(&self) -> &TrilIndexMap {
        &self.tril
    }

    /// Length of the compressed local block.
    pub fn tril_len(&self) -> usize {
        self.tril.len()
    }

    /// Local index of a global vertex, if it is a member.
    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.local_index(v).is_some()
    }
}

/// The blocks covering a chordal pattern.
#[derive(Clone, Debug)]
pub struct CliqueSet {
    n: usize,
    cliques: Vec<Clique>,
}

impl CliqueSet {
    /// Number of vertices of the underlying pattern.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cliques(&self) -> &[Clique] {
        &self.cliques
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// Union of all within-block pairs, as a pattern.
    pub fn pair_union(&self) -> SymPattern {
        let edges = self.cliques.iter().flat_map(|c| {
            let vs = c.vertices.clone();
            (0..vs.len())
                .flat_map(move |x| (0..x).map(move |y| (x, y)))
                .map(move |(x, y)| (vs[x], vs[y]))
                .collect::<Vec<_>>()
        });
        SymPattern::from_edges(self.n, edges).expect("pair union")
    }

    /// (min, max, mean) block size.
    pub fn size_stats(&self) -> (usize, usize, f64) {
        let min = self.cliques.iter().map(Clique::len).min().unwrap_or(0);
        let max = self.cliques.iter().map(Clique::len).max().unwrap_or(0);
        let total: usize = self.cliques.iter().map(Clique::len).sum();
        let mean = if self.cliques.is_empty() {
            0.0
        } else {
            total as f64 / self.cliques.len() as f64
        };
        (min, max, mean)
    }
}

/// Sorts vertex-sorted cliques by descending size, keeps those not contained
/// in an already accepted one, and returns the survivors in ascending
/// lexicographic order.
fn dedup_subsets(mut candidates: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    candidates.sort_unstable_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut accepted: Vec<Vec<usize>> = Vec::new();
    for cand in candidates {
        let contained = accepted
            .iter()
            .any(|acc| cand.iter().all(|v| acc.binary_search(v).is_ok()));
        if !contained {
            accepted.push(cand);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// Maximal cliques of a chordal pattern.
///
/// `ord` must list the vertices so that reading it back to front gives a
/// perfect elimination ordering, as produced by [`mcs_order`] and
/// [`chordal_extension`].  Each vertex contributes the candidate clique
/// {itself} + {later-eliminated neighbors}; non-maximal candidates are
/// dropped by subset testing in descending size order.
pub fn maximal_cliques(
    c: &SymPattern,
    ord: &EliminationOrdering,
) -> Result<CliqueSet, ChordalError> {
    if ord.len() != c.n() {
        return Err(ChordalError::InvalidOrdering { n: c.n() });
    }
    let elim = ord.reversed();
    if symbolic_fill(c, &elim).len() != c.len() {
        return Err(ChordalError::NotChordal);
    }
    let adj = c.adjacency();
    let candidates: Vec<Vec<usize>> = (0..c.n())
        .map(|v| {
            let mut cand: Vec<usize> = adj[v]
                .iter()
                .copied()
                .filter(|&w| elim.position(w) > elim.position(v))
                .collect();
            cand.push(v);
            cand.sort_unstable();
            cand
        })
        .collect();
    let cliques = dedup_subsets(candidates)
        .into_iter()
        .map(Clique::from_vertices)
        .collect();
    Ok(CliqueSet { n: c.n(), cliques })
}

/// Merges cliques into larger blocks, bounded by `threshold` vertices per
/// block.
///
/// A maximum-weight spanning forest over pairwise intersection sizes gives a
/// clique tree; each component is rooted at its lexicographically smallest
/// clique.  Non-root cliques are visited in ascending lexicographic order and
/// folded into their parent's current block whenever the union stays within
/// the threshold.  The result is deterministic and always covers the same
/// pairs as the input.
pub fn merge_cliques(cs: &CliqueSet, threshold: usize) -> Result<CliqueSet, ChordalError> {
    if threshold == 0 {
        return Err(ChordalError::BadThreshold);
    }
    let p = cs.len();
    if p <= 1 {
        return Ok(cs.clone());
    }
    // Input cliques arrive lex-sorted, so the node index doubles as lex rank.
    let lists: Vec<&[usize]> = cs.cliques.iter().map(|c| c.vertices()).collect();

    let mut weighted: Vec<(usize, usize, usize)> = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            let w = sorted_intersection_len(lists[a], lists[b]);
            if w > 0 {
                weighted.push((w, a, b));
            }
        }
    }
    weighted.sort_unstable_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut forest_rep: Vec<usize> = (0..p).collect();
    let mut tree_adj: Vec<Vec<usize>> = vec![Vec::new(); p];
    for &(_, a, b) in &weighted {
        if find(&mut forest_rep, a) != find(&mut forest_rep, b) {
            union(&mut forest_rep, a, b);
            tree_adj[a].push(b);
            tree_adj[b].push(a);
        }
    }
    for list in &mut tree_adj {
        list.sort_unstable();
    }

    // Root every component at its smallest node; BFS assigns parents.
    let mut parent = vec![usize::MAX; p];
    let mut seen = vec![false; p];
    for root in 0..p {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &w in &tree_adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
    }

    let mut block_rep: Vec<usize> = (0..p).collect();
    let mut blocks: Vec<BTreeSet<usize>> =
        lists.iter().map(|l| l.iter().copied().collect()).collect();
    for v in 0..p {
        if parent[v] == usize::MAX {
            continue;
        }
        let child = find(&mut block_rep, v);
        let par = find(&mut block_rep, parent[v]);
        if child == par {
            continue;
        }
        let union_size = blocks[par].union(&blocks[child]).count();
        if union_size <= threshold {
            let absorbed = std::mem::take(&mut blocks[child]);
            blocks[par].extend(absorbed);
            block_rep[child] = par;
        }
    }

    let survivors: Vec<Vec<usize>> = blocks
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|b| b.into_iter().collect())
        .collect();
    let cliques = dedup_subsets(survivors)
        .into_iter()
        .map(Clique::from_vertices)
        .collect();
    Ok(CliqueSet { n: cs.n, cliques })
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut x, mut y, mut count) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                x += 1;
                y += 1;
            }
        }
    }
    count
}

fn find(rep: &mut [usize], mut v: usize) -> usize {
    while rep[v] != v {
        rep[v] = rep[rep[v]];
        v = rep[v];
    }
    v
}

fn union(rep: &mut Vec<usize>, a: usize, b: usize) {
    let (ra, rb) = (find(rep, a), find(rep, b));
    if ra != rb {
        rep[rb.max(ra)] = ra.min(rb);
    }
}
