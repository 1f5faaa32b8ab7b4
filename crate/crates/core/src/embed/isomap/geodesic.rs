use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::graph::NeighborGraph;
use crate::error::{Error, Result};

/// Dense symmetric distance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        crate::error::check_width(n * n, data.len())?;
        Ok(DistanceMatrix { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// All-pairs shortest-path distances by Dijkstra from every node.
///
/// The two directed results for each pair are reconciled by taking the
/// smaller one, so the output is exactly symmetric.
pub fn geodesic_distances(g: &NeighborGraph) -> Result<DistanceMatrix> {
    let n = g.len();
    let mut data = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    for s in 0..n {
        let row = &mut data[s * n..(s + 1) * n];
        row[s] = 0.0;
        heap.push(Reverse((Dist(0.0), s)));
        while let Some(Reverse((Dist(du), u))) = heap.pop() {
            if du > row[u] {
                continue;
            }
            for &(v, w) in &g.adjacency[u] {
                let alt = du + w;
                if alt < row[v] {
                    row[v] = alt;
                    heap.push(Reverse((Dist(alt), v)));
                }
            }
        }
        if let Some(j) = row.iter().position(|d| d.is_infinite()) {
            return Err(Error::Integrity(format!(
                "neighbor graph is disconnected: node {j} unreachable from {s}"
            )));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let m = data[i * n + j].min(data[j * n + i]);
            data[i * n + j] = m;
            data[j * n + i] = m;
        }
    }
    Ok(DistanceMatrix { n, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::isomap::graph::knn_graph;
    use crate::linalg::{euclidean, Rows};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn floyd_warshall(g: &NeighborGraph) -> Vec<f64> {
        let n = g.len();
        let mut d = vec![f64::INFINITY; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
            for &(j, w) in &g.adjacency[i] {
                d[i * n + j] = d[i * n + j].min(w);
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i * n + k] + d[k * n + j];
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                    }
                }
            }
        }
        d
    }

    #[test]
    fn unit_square_diagonal_goes_around() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let g = knn_graph(&Rows::new(&x), 2).unwrap();
        let d = geodesic_distances(&g).unwrap();
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(1, 3), 2.0);
    }

    #[test]
    fn path_graph() {
        let g = NeighborGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let d = geodesic_distances(&g).unwrap();
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(2, 0), 2.0);
    }

    #[test]
    fn disconnected_is_an_error() {
        let g = NeighborGraph::from_edges(3, &[(0, 1, 1.0)]);
        assert!(matches!(geodesic_distances(&g), Err(Error::Integrity(_))));
    }

    #[test]
    fn matches_floyd_warshall_on_knn_graphs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
        for _ in 0..10 {
            let x = DMatrix::from_fn(30, 3, |_, _| rng.random::<f64>());
            let rows = Rows::new(&x);
            let g = knn_graph(&rows, 5).unwrap();
            let d = geodesic_distances(&g).unwrap();
            let fw = floyd_warshall(&g);
            for i in 0..30 {
                for j in 0..30 {
                    let (a, b) = (d.get(i, j), fw[i * 30 + j]);
                    assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
                    assert!(a + 1e-12 >= euclidean(rows.row(i), rows.row(j)));
                    assert_eq!(a, d.get(j, i));
                }
            }
        }
    }

    #[test]
    fn matches_floyd_warshall_exactly_on_dyadic_weights() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n = rng.random_range(5..40);
            let mut edges: Vec<(usize, usize, f64)> =
                (1..n).map(|i| (rng.random_range(0..i), i, rng.random_range(1..256) as f64 / 64.0)).collect();
            for _ in 0..2 * n {
                let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
                if a != b {
                    edges.push((a, b, rng.random_range(1..256) as f64 / 64.0));
                }
            }
            let g = NeighborGraph::from_edges(n, &edges);
            let d = geodesic_distances(&g).unwrap();
            assert_eq!(d.as_slice(), floyd_warshall(&g).as_slice());
        }
    }
}
