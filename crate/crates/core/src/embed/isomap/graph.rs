use std::collections::VecDeque;

use crate::error::{config, Result};
use crate::linalg::{euclidean, nearest_k, Rows};

/// Weighted undirected neighbor graph; edge weights are Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub k: usize,
    /// For every node, `(neighbor, weight)` sorted by neighbor index.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Edges added to join disconnected components, in insertion order.
    pub augmentations: Vec<(usize, usize, f64)>,
}

impl NeighborGraph {
    /// Builds a graph from an explicit undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            insert_edge(&mut adjacency, a, b, w);
        }
        NeighborGraph {
            k: 0,
            adjacency,
            augmentations: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search_by_key(&b, |e| e.0).is_ok()
    }

    /// Component label of every node, labels in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

fn insert_edge(adj: &mut [Vec<(usize, f64)>], a: usize, b: usize, w: f64) {
    for (u, v) in [(a, b), (b, a)] {
        match adj[u].binary_search_by_key(&v, |e| e.0) {
            Ok(pos) => adj[u][pos].1 = adj[u][pos].1.min(w),
            Err(pos) => adj[u].insert(pos, (v, w)),
        }
    }
}

/// Symmetrized k-nearest-neighbor graph: `(i, j)` is an edge when either
/// endpoint is among the other's `k` nearest rows. Disconnected graphs are
/// joined by repeatedly adding the globally shortest edge between two
/// different components.
pub fn knn_graph(rows: &Rows, k: usize) -> Result<NeighborGraph> {
    let m = rows.len();
    if k == 0 || m <= k {
        return Err(config(format!("k-NN graph needs more rows ({m}) than neighbors ({k}), k > 0")));
    }
    let nn = nearest_k(rows, rows, k, true);
    let mut adjacency = vec![Vec::with_capacity(2 * k); m];
    for (i, list) in nn.iter().enumerate() {
        for &(j, d) in list {
            insert_edge(&mut adjacency, i, j, d);
        }
    }
    let mut graph = NeighborGraph {
        k,
        adjacency,
        augmentations: Vec::new(),
    };
    connect_components(&mut graph, rows);
    Ok(graph)
}

type Edge = (f64, usize, usize);

fn edge_less(a: &Edge, b: &Edge) -> bool {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).is_lt()
}

fn connect_components(graph: &mut NeighborGraph, rows: &Rows) {
    let mut label = graph.components();
    let mut count = label.iter().copied().max().map_or(0, |m| m + 1);
    if count <= 1 {
        return;
    }
    let shortest_out = |label: &[usize], c: usize| -> Edge {
        let mut best: Edge = (f64::INFINITY, usize::MAX, usize::MAX);
        for a in (0..label.len()).filter(|&a| label[a] == c) {
            for b in (0..label.len()).filter(|&b| label[b] != c) {
                let e = (euclidean(rows.row(a), rows.row(b)), a.min(b), a.max(b));
                if edge_less(&e, &best) {
                    best = e;
                }
            }
        }
        best
    };
    let mut best: Vec<Option<Edge>> = (0..count).map(|c| Some(shortest_out(&label, c))).collect();
    while count > 1 {
        let (_, &(w, a, b)) = best
            .iter()
            .enumerate()
            .filter_map(|(c, e)| e.as_ref().map(|e| (c, e)))
            .min_by(|x, y| if edge_less(x.1, y.1) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater })
            .expect("at least two components");
        insert_edge(&mut graph.adjacency, a, b, w);
        graph.augmentations.push((a, b, w));
        log::info!("k-NN graph disconnected: joined components with edge ({a}, {b}) of length {w}");
        let (keep, gone) = (label[a].min(label[b]), label[a].max(label[b]));
        for l in label.iter_mut() {
            if *l == gone {
                *l = keep;
            }
        }
        best[gone] = None;
        count -= 1;
        if count > 1 {
            best[keep] = Some(shortest_out(&label, keep));
        }
    }
}
