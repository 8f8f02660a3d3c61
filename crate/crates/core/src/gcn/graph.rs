use std::collections::BTreeSet;

use ndarray::Array2;

use super::GcnError;
use crate::corpus::{DepArc, Head};

/// Undirected word graph of one sentence. Edges are stored as `(i, j)`
/// with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SentenceGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GcnError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(GcnError::IndexOutOfRange { index: a.max(b), n });
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        Ok(SentenceGraph { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Apply a node relabeling: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> SentenceGraph {
        let edges = self.edges.iter().map(|&(a, b)| {
            let (a, b) = (perm[a], perm[b]);
            (a.min(b), a.max(b))
        });
        SentenceGraph {
            n: self.n,
            edges: edges.collect(),
        }
    }
}

/// One undirected edge per non-root arc; duplicates merge.
pub fn build_graph(arcs: &[DepArc], n: usize) -> Result<SentenceGraph, GcnError> {
    let mut edges = Vec::with_capacity(arcs.len());
    for arc in arcs {
        if arc.dependent >= n {
            return Err(GcnError::IndexOutOfRange {
                index: arc.dependent,
                n,
            });
        }
        if let Head::Token(h) = arc.head {
            if h >= n {
                return Err(GcnError::IndexOutOfRange { index: h, n });
            }
            edges.push((arc.dependent, h));
        }
    }
    SentenceGraph::new(n, edges)
}

/// Sparse symmetric operator `D^-1/2 (A + I) D^-1/2` in CSR form, possibly
/// holding several sentence graphs as diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    offsets: Vec<usize>,
}

impl NormAdj {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Start row of each block.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `(start, len)` of each block.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        self.offsets
            .iter()
            .enumerate()
            .map(|(k, &start)| {
                let end = self.offsets.get(k + 1).copied().unwrap_or(self.n);
                (start, end - start)
            })
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzeros of row `i` as `(column, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// `self * x`. Each output row is accumulated in column order, so the
    /// result does not depend on threading or batching.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(
            x.nrows(),
            self.n,
            "operator is {}x{}, input has {} rows",
            self.n,
            self.n,
            x.nrows()
        );
        let mut out = Array2::zeros((self.n, x.ncols()));
        for i in 0..self.n {
            let mut dst = out.row_mut(i);
            for (j, v) in self.row(i) {
                dst.scaled_add(v, &x.row(j));
            }
        }
        out
    }
}

pub fn normalize_adjacency(g: &SentenceGraph) -> NormAdj {
    let n = g.n();
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in g.edges() {
        neighbours[a].push(b);
        neighbours[b].push(a);
    }
    let degree: Vec<f64> = neighbours.iter().map(|nb| (nb.len() + 1) as f64).collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for (i, nb) in neighbours.iter_mut().enumerate() {
        nb.push(i);
        nb.sort_unstable();
        for &j in nb.iter() {
            cols.push(j);
            // Multiplication commutes exactly, so (i, j) and (j, i) agree bitwise.
            vals.push(1.0 / (degree[i] * degree[j]).sqrt());
        }
        row_ptr.push(cols.len());
    }
    NormAdj {
        n,
        row_ptr,
        cols,
        vals,
        offsets: if n == 0 { Vec::new() } else { vec![0] },
    }
}

/// Stack operators along the diagonal. Zero-node blocks are kept as
/// zero-length entries in the offsets.
pub fn block_diag(blocks: &[NormAdj]) -> NormAdj {
    let mut n = 0;
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut offsets = Vec::with_capacity(blocks.len());
    for block in blocks {
        offsets.push(n);
        for i in 0..block.n {
            for (j, v) in block.row(i) {
                cols.push(j + n);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        n += block.n;
    }
    NormAdj {
        n,
        row_ptr,
        cols,
        vals,
        offsets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arc(d: usize, h: Option<usize>) -> DepArc {
        DepArc {
            dependent: d,
            head: h.map_or(Head::Root, Head::Token),
            relation: "dep".into(),
        }
    }

    /// Dense `D^-1/2 (A + I) D^-1/2` straight from the definition.
    fn dense_oracle(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n]; n];
        for &(i, j) in edges {
            if i != j {
                a[i][j] = 1.0;
                a[j][i] = 1.0;
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        (0..n)
            .map(|i| (0..n).map(|j| a[i][j] / d[i].sqrt() / d[j].sqrt()).collect())
            .collect()
    }

    #[test]
    fn root_arcs_are_dropped() {
        let g = build_graph(&[arc(0, Some(1)), arc(1, None)], 2).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        let single = build_graph(&[arc(0, None)], 1).unwrap();
        assert_eq!(single.edge_count(), 0);
    }

    #[test]
    fn reverse_arcs_merge() {
        let g = build_graph(&[arc(0, Some(1)), arc(1, Some(0))], 2).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn out_of_range_arc() {
        assert!(matches!(
            build_graph(&[arc(0, Some(5))], 2),
            Err(GcnError::IndexOutOfRange { index: 5, n: 2 })
        ));
    }

    #[test]
    fn two_node_edge_is_all_halves() {
        let adj = normalize_adjacency(&SentenceGraph::new(2, [(0, 1)]).unwrap());
        assert_eq!(adj.to_dense(), ndarray::array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn isolated_node_is_one() {
        let adj = normalize_adjacency(&SentenceGraph::new(1, []).unwrap());
        assert_eq!(adj.to_dense(), ndarray::array![[1.0]]);
    }

    #[test]
    fn path_graph_values() {
        let adj = normalize_adjacency(&SentenceGraph::new(3, [(0, 1), (1, 2)]).unwrap());
        assert!((adj.get(1, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((adj.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!((adj.get(0, 0) - 0.5).abs() < 1e-12);
        assert_eq!(adj.get(0, 2), 0.0);
    }

    #[test]
    fn regular_graph_entries() {
        // 5-cycle: 2-regular, every nonzero is 1/3
        let g = SentenceGraph::new(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap();
        let adj = normalize_adjacency(&g);
        for i in 0..5 {
            for (_, v) in adj.row(i) {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn block_diag_offsets_and_zeros() {
        let two = normalize_adjacency(&SentenceGraph::new(2, [(0, 1)]).unwrap());
        let stacked = block_diag(&[two.clone(), two]);
        assert_eq!(stacked.n(), 4);
        assert_eq!(stacked.offsets(), &[0, 2]);
        assert_eq!(stacked.get(0, 2), 0.0);
        assert_eq!(stacked.get(3, 2), 0.5);

        let empty = block_diag(&[]);
        assert_eq!(empty.n(), 0);
        assert!(empty.offsets().is_empty());

        let one = normalize_adjacency(&SentenceGraph::new(1, []).unwrap());
        let three = normalize_adjacency(&SentenceGraph::new(3, [(0, 1)]).unwrap());
        let mixed = block_diag(&[one, three]);
        assert_eq!(mixed.offsets(), &[0, 1]);
        assert_eq!(mixed.blocks(), vec![(0, 1), (1, 3)]);
    }

    fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1usize..=10).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..20)))
    }

    proptest! {
        #[test]
        fn matches_dense_definition((n, edges) in arb_graph()) {
            let adj = normalize_adjacency(&SentenceGraph::new(n, edges.clone()).unwrap());
            let oracle = dense_oracle(n, &edges);
            let dense = adj.to_dense();
            for i in 0..n {
                prop_assert!(adj.get(i, i) > 0.0);
                for j in 0..n {
                    prop_assert_eq!(dense[[i, j]], dense[[j, i]]);
                    prop_assert!((dense[[i, j]] - oracle[i][j]).abs() < 1e-12);
                    prop_assert!(dense[[i, j]] <= 1.0);
                }
            }
        }
    }
}
