//! Static adjacency graphs and the uniform grid used for range queries in
//! mobile scenarios.

use std::collections::VecDeque;

use super::geometry::Vec2;
use crate::crypto::PrngState;
use crate::error::{Error, Result};

/// Undirected graph over `0..n`, adjacency lists kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    adj: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Adjacency {
            adj: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Adjacency::empty(n);
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::config(
                    format!("topology.edges[{k}]"),
                    format!("edge ({a}, {b}) references a node outside 0..{n}"),
                ));
            }
            if a == b {
                return Err(Error::config(format!("topology.edges[{k}]"), "self loop"));
            }
            g.add_edge(a, b);
        }
        Ok(g)
    }

    /// Complete `branching`-ary tree in heap order: the children of `i` are
    /// `branching * i + 1 ..= branching * i + branching`.
    pub fn complete_tree(n: usize, branching: usize) -> Self {
        assert!(branching >= 1);
        let mut g = Adjacency::empty(n);
        for child in 1..n {
            g.add_edge((child - 1) / branching, child);
        }
        g
    }

    /// Random connected graph: a random spanning tree plus each remaining
    /// pair with probability `extra_edge_prob`.
    pub fn random_connected(n: usize, extra_edge_prob: f64, rng: &mut PrngState) -> Self {
        let mut g = Adjacency::empty(n);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            order.swap(i, j);
        }
        for k in 1..n {
            let parent = order[rng.below(k as u64) as usize];
            g.add_edge(parent, order[k]);
        }
        for a in 0..n {
            for b in a + 1..n {
                if rng.chance(extra_edge_prob) {
                    g.add_edge(a, b);
                }
            }
        }
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if let Err(pos) = self.adj[a].binary_search(&b) {
            self.adj[a].insert(pos, b);
        }
        if let Err(pos) = self.adj[b].binary_search(&a) {
            self.adj[b].insert(pos, a);
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[src] = Some(0);
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            let d = dist[u].unwrap();
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.bfs(0).iter().all(Option::is_some)
    }

    /// Longest shortest path, or `None` when disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.len() {
            for d in self.bfs(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }
}

/// Uniform bucket grid with cell side equal to the radio range.
#[derive(Debug, Clone)]
pub struct RangeGrid {
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl RangeGrid {
    pub fn new(width: f64, height: f64, range: f64) -> Self {
        let cell = range.max(1e-9);
        let cols = ((width / cell).ceil() as usize).max(1);
        let rows = ((height / cell).ceil() as usize).max(1);
        RangeGrid {
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        }
    }

    fn cell_of(&self, p: Vec2<f64>) -> (usize, usize) {
        let cx = ((p.x / self.cell) as usize).min(self.cols - 1);
        let cy = ((p.y / self.cell) as usize).min(self.rows - 1);
        (cx, cy)
    }

    pub fn rebuild(&mut self, positions: &[Vec2<f64>]) {
        self.buckets.iter_mut().for_each(Vec::clear);
        for (i, &p) in positions.iter().enumerate() {
            let (cx, cy) = self.cell_of(p);
            self.buckets[cy * self.cols + cx].push(i);
        }
    }

    /// Nodes other than `i` within `range` of `positions[i]`, ascending.
    pub fn within(&self, i: usize, positions: &[Vec2<f64>], range: f64, out: &mut Vec<usize>) {
        out.clear();
        let p = positions[i];
        let (cx, cy) = self.cell_of(p);
        let r2 = range * range;
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                for &j in &self.buckets[y * self.cols + x] {
                    if j != i && p.distance_sq(positions[j]) <= r2 {
                        out.push(j);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_tree_shape() {
        let g = Adjacency::complete_tree(7, 2);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.neighbors(1), &[0, 3, 4]);
        assert_eq!(g.neighbors(6), &[2]);
        assert_eq!(g.edge_count(), 6);
        assert_eq!(g.diameter(), Some(4));
    }

    #[test]
    fn random_graphs_are_connected() {
        let mut rng = PrngState::new(4);
        for n in 1..40 {
            let g = Adjacency::random_connected(n, 0.05, &mut rng);
            assert!(g.is_connected());
            assert!(g.edge_count() >= n.saturating_sub(1));
        }
    }

    #[test]
    fn edge_list_validation() {
        assert!(Adjacency::from_edges(3, &[(0, 1), (1, 2)]).is_ok());
        assert!(Adjacency::from_edges(3, &[(0, 3)]).is_err());
        assert!(Adjacency::from_edges(3, &[(1, 1)]).is_err());
    }

    #[test]
    fn disconnected_has_no_diameter() {
        let g = Adjacency::from_edges(3, &[(0, 1)]).unwrap();
        assert_eq!(g.diameter(), None);
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = PrngState::new(8);
        let positions: Vec<Vec2<f64>> = (0..300)
            .map(|_| Vec2::new(rng.next_f64() * 700.0, rng.next_f64() * 500.0))
            .collect();
        let mut grid = RangeGrid::new(700.0, 500.0, 75.0);
        grid.rebuild(&positions);
        let mut out = Vec::new();
        for i in 0..positions.len() {
            grid.within(i, &positions, 75.0, &mut out);
            let brute: Vec<usize> = (0..positions.len())
                .filter(|&j| j != i && positions[i].distance(positions[j]) <= 75.0)
                .collect();
            assert_eq!(out, brute);
        }
    }

    #[test]
    fn range_threshold() {
        let positions = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(50.0, 0.0),
            Vec2::new(130.0, 0.0),
        ];
        let mut grid = RangeGrid::new(200.0, 10.0, 75.0);
        grid.rebuild(&positions);
        let mut out = Vec::new();
        grid.within(0, &positions, 75.0, &mut out);
        assert_eq!(out, vec![1]);
        grid.within(1, &positions, 75.0, &mut out);
        assert_eq!(out, vec![0]); // 80 m away from node 2
    }
}
