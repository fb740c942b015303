use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::PureState;
use crate::rng::substream;
use crate::scalar::{Real, C};

/// Simple undirected graph. Serialized as `{"n": int, "edges": [[i, j], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = Error;
    fn try_from(raw: RawGraph) -> Result<Self> {
        Graph::new(raw.n, raw.edges)
    }
}

impl Graph {
    /// Edges are normalized to `i < j`, sorted and deduplicated.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut norm = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::OutOfRange(format!("self-loop at vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::OutOfRange(format!("edge ({a}, {b}) outside {n} vertices")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(Self { n, edges: norm })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
        Self::new(n, edges).expect("valid edges")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("valid edges")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Breadth-first connectivity check.
pub fn is_connected(g: &Graph) -> bool {
    if g.n <= 1 {
        return true;
    }
    let mut adj = vec![Vec::new(); g.n];
    for &(a, b) in &g.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                queue.push_back(u);
            }
        }
    }
    count == g.n
}

/// Erdős–Rényi graph `G(n, edge_prob)`.
pub fn random_graph(n: usize, edge_prob: f64, seed: u64) -> Result<Graph> {
    random_graph_from(n, edge_prob, &mut substream(seed, 0))
}

pub fn random_graph_from<R: Rng + ?Sized>(n: usize, edge_prob: f64, rng: &mut R) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidDimension("graph with no vertices".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::OutOfRange(format!("edge probability {edge_prob}")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(edge_prob) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges)
}

/// Edge probabilities drawn per graph for the balanced ensemble.
pub const GRAPH_EDGE_PROBS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

/// Graph `index` of a connected/disconnected balanced ensemble: even indices
/// are connected, odd indices disconnected. Each draw picks its edge
/// probability uniformly from [`GRAPH_EDGE_PROBS`] and is redrawn until the
/// connectivity matches.
pub fn balanced_graph(n: usize, root: u64, index: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidDimension("balanced ensemble needs n ≥ 2".into()));
    }
    let want_connected = index.is_multiple_of(2);
    let mut rng = substream(root, index);
    loop {
        let p = GRAPH_EDGE_PROBS[rng.gen_range(0..GRAPH_EDGE_PROBS.len())];
        let g = random_graph_from(n, p, &mut rng)?;
        if is_connected(&g) == want_connected {
            return Ok(g);
        }
    }
}

/// `|G⟩ = Π_{(i,j)∈E} CZᵢⱼ |+⟩^{⊗n}`; vertex 0 is the most significant qubit.
pub fn graph_state<T: Real>(g: &Graph) -> Result<PureState<T>> {
    let n = g.n;
    if n == 0 || n > 24 {
        return Err(Error::InvalidDimension(format!("graph state on {n} qubits")));
    }
    let amp = T::of((0.5f64).powf(n as f64 / 2.0));
    let masks: Vec<usize> = g.edges.iter().map(|&(a, b)| (1 << (n - 1 - a)) | (1 << (n - 1 - b))).collect();
    let amps = (0..1usize << n)
        .map(|x| {
            let parity = masks.iter().filter(|&&m| x & m == m).count() % 2;
            if parity == 0 {
                C::new(amp, T::zero())
            } else {
                C::new(-amp, T::zero())
            }
        })
        .collect();
    Ok(PureState::from_parts_unchecked(vec![2; n], amps))
}
