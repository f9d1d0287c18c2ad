//! Dinic's max-flow / min-cut on small graphs with floating-point
//! capacities; exact enough for the CRF energies this crate builds.

use crate::scalar::Scalar;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: f64,
}

/// s-t flow network; node 0 is the source, node 1 the sink.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<Edge>>,
}

pub const SOURCE: usize = 0;
pub const SINK: usize = 1;

impl FlowNetwork {
    /// `extra` inner nodes are numbered from 2.
    pub fn new(extra: usize) -> Self {
        Self {
            adj: vec![Vec::new(); extra + 2],
        }
    }

    pub fn node(inner_index: usize) -> usize {
        inner_index + 2
    }

    /// Directed edge with capacity `cap` and a zero-capacity reverse edge.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        debug_assert!(cap >= 0.0);
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge {
            to,
            rev: rev_from,
            cap,
        });
        self.adj[to].push(Edge {
            to: from,
            rev: rev_to,
            cap: 0.0,
        });
    }

    /// Undirected edge: capacity in both directions.
    pub fn add_undirected(&mut self, a: usize, b: usize, cap: f64) {
        debug_assert!(cap >= 0.0);
        let ra = self.adj[b].len();
        let rb = self.adj[a].len();
        self.adj[a].push(Edge { to: b, rev: ra, cap });
        self.adj[b].push(Edge { to: a, rev: rb, cap });
    }

    fn bfs_levels(&self) -> Option<Vec<i32>> {
        let mut level = vec![-1i32; self.adj.len()];
        let mut queue = std::collections::VecDeque::new();
        level[SOURCE] = 0;
        queue.push_back(SOURCE);
        while let Some(u) = queue.pop_front() {
            for e in &self.adj[u] {
                if e.cap > EPS && level[e.to] < 0 {
                    level[e.to] = level[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        if level[SINK] >= 0 {
            Some(level)
        } else {
            None
        }
    }

    fn dfs_push(&mut self, u: usize, pushed: f64, level: &[i32], iter: &mut [usize]) -> f64 {
        if u == SINK {
            return pushed;
        }
        while iter[u] < self.adj[u].len() {
            let (to, cap, rev) = {
                let e = &self.adj[u][iter[u]];
                (e.to, e.cap, e.rev)
            };
            if cap > EPS && level[to] == level[u] + 1 {
                let d = self.dfs_push(to, pushed.min(cap), level, iter);
                if d > EPS {
                    self.adj[u][iter[u]].cap -= d;
                    self.adj[to][rev].cap += d;
                    return d;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    /// Run max-flow and return (flow value, source-side reachability in the
    /// residual graph).
    pub fn max_flow(&mut self) -> (f64, Vec<bool>) {
        let mut flow = 0.0;
        while let Some(level) = self.bfs_levels() {
            let mut iter = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.dfs_push(SOURCE, f64::INFINITY, &level, &mut iter);
                if pushed <= EPS {
                    break;
                }
                flow += pushed;
            }
        }
        // min-cut side: nodes reachable from the source in the residual graph
        let mut side = vec![false; self.adj.len()];
        let mut queue = std::collections::VecDeque::new();
        side[SOURCE] = true;
        queue.push_back(SOURCE);
        while let Some(u) = queue.pop_front() {
            for e in &self.adj[u] {
                if e.cap > EPS && !side[e.to] {
                    side[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        (flow, side)
    }
}

/// Helper for scalar-generic callers: capacities go in as `T`, flow comes out
/// as `T`.
pub fn to_f64_cap<T: Scalar>(v: T) -> f64 {
    v.to_f64().expect("capacity fits f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_bottleneck() {
        // source -> a -> sink with caps 3 and 2
        let mut net = FlowNetwork::new(1);
        let a = FlowNetwork::node(0);
        net.add_edge(SOURCE, a, 3.0);
        net.add_edge(a, SINK, 2.0);
        let (flow, side) = net.max_flow();
        assert!((flow - 2.0).abs() < 1e-12);
        assert!(side[SOURCE] && side[a] && !side[SINK]);
    }

    #[test]
    fn parallel_paths_add_up() {
        let mut net = FlowNetwork::new(2);
        let (a, b) = (FlowNetwork::node(0), FlowNetwork::node(1));
        net.add_edge(SOURCE, a, 1.5);
        net.add_edge(SOURCE, b, 2.5);
        net.add_edge(a, SINK, 1.0);
        net.add_edge(b, SINK, 4.0);
        let (flow, _) = net.max_flow();
        assert!((flow - 3.5).abs() < 1e-12);
    }

    #[test]
    fn undirected_edge_carries_flow_either_way() {
        let mut net = FlowNetwork::new(2);
        let (a, b) = (FlowNetwork::node(0), FlowNetwork::node(1));
        net.add_edge(SOURCE, a, 5.0);
        net.add_undirected(a, b, 1.25);
        net.add_edge(b, SINK, 5.0);
        let (flow, _) = net.max_flow();
        assert!((flow - 1.25).abs() < 1e-12);
    }
}
