//! Directed sensing graph with source links, balanced normalization,
//! source reachability and the augmented Laplacian.
//!
//! Agents are numbered `1..=m` in edge lists (agent 0 is the source) and
//! stored 0-based internally. Weight `w_ij` lives in row `i`: agent `i`
//! receives information from agent `j`.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix};

/// Row sums must equal one within this tolerance to count as balanced.
pub const BALANCE_TOL: f64 = 1e-12;

/// `min Re λ(𝕃)` must exceed this for positive stability.
pub const POSITIVE_STABLE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network needs at least one agent")]
    NoAgents,
    #[error("edge {edge}: self-loop")]
    SelfLoop { edge: EdgeLabel },
    #[error("edge {edge}: agent index out of range 1..={m}")]
    OutOfRange { edge: EdgeLabel, m: usize },
    #[error("edge {edge}: weight {weight} must be positive and finite")]
    NonPositiveWeight { edge: EdgeLabel, weight: f64 },
    #[error("edge {edge}: duplicate")]
    Duplicate { edge: EdgeLabel },
    #[error("no agent receives information from the source")]
    NoSourceLink,
    #[error("agent {agent} has zero total incoming weight")]
    Isolated { agent: usize },
    #[error("network is not balanced: agent {agent} has row sum {row_sum}")]
    Unbalanced { agent: usize, row_sum: f64 },
    #[error("agents {unreached:?} are not reachable from the source")]
    Unreachable { unreached: Vec<usize> },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// 1-based description of an edge, used in error messages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeLabel {
    Sensing { receiver: usize, sender: usize },
    Source { receiver: usize },
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLabel::Sensing { receiver, sender } => write!(f, "({receiver}<-{sender})"),
            EdgeLabel::Source { receiver } => write!(f, "({receiver}<-0)"),
        }
    }
}

/// Sensing edge `(receiver, sender, weight)`, 1-based.
pub type SensingEdge = (usize, usize, f64);
/// Source edge `(receiver, weight)`, 1-based.
pub type SourceEdge = (usize, f64);

/// Weighted directed graph over `m` sensing agents plus the source.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorNetwork {
    m: usize,
    sensing: Matrix,
    source: Vec<f64>,
    /// `in_neighbors[i]` = `(j, w_ij)` for every `w_ij > 0`, 0-based.
    in_neighbors: Vec<Vec<(usize, f64)>>,
    /// `out_neighbors[j]` = `(i, w_ij)` for every `w_ij > 0`, 0-based.
    out_neighbors: Vec<Vec<(usize, f64)>>,
}

/// Validates edges and builds a network with exactly the given weights.
pub fn build_network(
    sensing_edges: &[SensingEdge],
    source_edges: &[SourceEdge],
    m: usize,
) -> Result<SensorNetwork, NetworkError> {
    if m == 0 {
        return Err(NetworkError::NoAgents);
    }
    let mut sensing = Matrix::zeros(m, m);
    let mut seen = HashSet::new();
    for &(i, j, w) in sensing_edges {
        let edge = EdgeLabel::Sensing {
            receiver: i,
            sender: j,
        };
        if i == 0 || j == 0 || i > m || j > m {
            return Err(NetworkError::OutOfRange { edge, m });
        }
        if i == j {
            return Err(NetworkError::SelfLoop { edge });
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(NetworkError::NonPositiveWeight { edge, weight: w });
        }
        if !seen.insert((i, j)) {
            return Err(NetworkError::Duplicate { edge });
        }
        sensing[(i - 1, j - 1)] = w;
    }
    let mut source = vec![0.0; m];
    let mut seen = HashSet::new();
    for &(i, w) in source_edges {
        let edge = EdgeLabel::Source { receiver: i };
        if i == 0 || i > m {
            return Err(NetworkError::OutOfRange { edge, m });
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(NetworkError::NonPositiveWeight { edge, weight: w });
        }
        if !seen.insert(i) {
            return Err(NetworkError::Duplicate { edge });
        }
        source[i - 1] = w;
    }
    if source.iter().all(|&w| w == 0.0) {
        return Err(NetworkError::NoSourceLink);
    }
    Ok(SensorNetwork::from_parts(sensing, source))
}

impl SensorNetwork {
    fn from_parts(sensing: Matrix, source: Vec<f64>) -> Self {
        let m = source.len();
        let mut in_neighbors = vec![Vec::new(); m];
        let mut out_neighbors = vec![Vec::new(); m];
        for i in 0..m {
            for j in 0..m {
                let w = sensing[(i, j)];
                if w > 0.0 {
                    in_neighbors[i].push((j, w));
                    out_neighbors[j].push((i, w));
                }
            }
        }
        Self {
            m,
            sensing,
            source,
            in_neighbors,
            out_neighbors,
        }
    }

    /// Every agent linked to the source with weight 1 and no sensing edges.
    pub fn star(m: usize) -> Self {
        let source: Vec<SourceEdge> = (1..=m).map(|i| (i, 1.0)).collect();
        build_network(&[], &source, m).expect("star topology is valid")
    }

    /// Bidirectional ring of 0.3 weights, every agent 0.4 to the source.
    /// Degenerates to a single 0.6 link for `m = 2` and to the star for `m = 1`.
    pub fn cyclic(m: usize) -> Self {
        let mut edges = Vec::new();
        match m {
            0 | 1 => return Self::star(m.max(1)),
            2 => {
                edges.push((1, 2, 0.6));
                edges.push((2, 1, 0.6));
            }
            _ => {
                for i in 1..=m {
                    let next = i % m + 1;
                    let prev = (i + m - 2) % m + 1;
                    edges.push((i, next, 0.3));
                    edges.push((i, prev, 0.3));
                }
            }
        }
        let source: Vec<SourceEdge> = (1..=m).map(|i| (i, 0.4)).collect();
        build_network(&edges, &source, m).expect("cyclic topology is valid")
    }

    /// Directed chain `0 → 1 → 2 → … → m`, all weights 1.
    pub fn path(m: usize) -> Self {
        let edges: Vec<SensingEdge> = (2..=m).map(|i| (i, i - 1, 1.0)).collect();
        build_network(&edges, &[(1, 1.0)], m.max(1)).expect("path topology is valid")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Sensing weights `w_ij` (row = receiver), 0-based.
    pub fn sensing_weights(&self) -> &Matrix {
        &self.sensing
    }

    /// Source weights `w_i0`, 0-based.
    pub fn source_weights(&self) -> &[f64] {
        &self.source
    }

    pub fn in_neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.in_neighbors[i]
    }

    pub fn out_neighbors(&self, j: usize) -> &[(usize, f64)] {
        &self.out_neighbors[j]
    }

    /// In-degree `d_i` over sensing links.
    pub fn in_degree(&self, i: usize) -> f64 {
        self.in_neighbors[i].iter().map(|(_, w)| w).sum()
    }

    /// Total incoming weight `w_i = d_i + w_i0`.
    pub fn total_weight(&self, i: usize) -> f64 {
        self.in_degree(i) + self.source[i]
    }

    /// Number of nonzero sensing weights.
    pub fn edge_count(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.first_unbalanced().is_none()
    }

    fn first_unbalanced(&self) -> Option<(usize, f64)> {
        (0..self.m)
            .map(|i| (i, self.total_weight(i)))
            .find(|(_, s)| (s - 1.0).abs() > BALANCE_TOL)
    }

    /// Sensing edges in 1-based form, for reports and config round-trips.
    pub fn sensing_edges(&self) -> Vec<SensingEdge> {
        let mut edges = Vec::new();
        for (i, nbrs) in self.in_neighbors.iter().enumerate() {
            for &(j, w) in nbrs {
                edges.push((i + 1, j + 1, w));
            }
        }
        edges
    }

    pub fn source_edges(&self) -> Vec<SourceEdge> {
        self.source
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, &w)| (i + 1, w))
            .collect()
    }
}

/// Rescales every row by `1/w_i` so that `d_i + w_i0 = 1`.
pub fn normalize_balanced(net: &SensorNetwork) -> Result<SensorNetwork, NetworkError> {
    let m = net.m;
    let mut sensing = net.sensing.clone();
    let mut source = net.source.clone();
    for i in 0..m {
        let w = net.total_weight(i);
        if w <= 0.0 {
            return Err(NetworkError::Isolated { agent: i + 1 });
        }
        if (w - 1.0).abs() <= BALANCE_TOL {
            continue;
        }
        for j in 0..m {
            sensing[(i, j)] /= w;
        }
        source[i] /= w;
    }
    Ok(SensorNetwork::from_parts(sensing, source))
}

/// Agents (1-based) not reached by a breadth-first search from the source
/// along the information flow `j → i` whenever `w_ij > 0`.
pub fn unreachable_agents(net: &SensorNetwork) -> Vec<usize> {
    let mut visited = vec![false; net.m];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, &w) in net.source.iter().enumerate() {
        if w > 0.0 {
            visited[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(j) = queue.pop_front() {
        for &(i, _) in &net.out_neighbors[j] {
            if !visited[i] {
                visited[i] = true;
                queue.push_back(i);
            }
        }
    }
    visited
        .iter()
        .enumerate()
        .filter(|(_, &v)| !v)
        .map(|(i, _)| i + 1)
        .collect()
}

pub fn check_source_reachability(net: &SensorNetwork) -> bool {
    unreachable_agents(net).is_empty()
}

/// Network matrices `𝔸_m`, `𝔸₀`, `𝕎` and `𝕃 = 𝕎 − 𝔸_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianBundle {
    pub adjacency_m: Matrix,
    pub adjacency_0: Matrix,
    pub total_weight: Matrix,
    pub laplacian: Matrix,
    pub min_real_eig: f64,
    pub positive_stable: bool,
}

impl LaplacianBundle {
    pub fn m(&self) -> usize {
        self.laplacian.rows()
    }
}

/// Builds the Laplacian bundle of a balanced, source-reachable network.
pub fn laplacian_bundle(net: &SensorNetwork) -> Result<LaplacianBundle, NetworkError> {
    if let Some((agent, row_sum)) = net.first_unbalanced() {
        return Err(NetworkError::Unbalanced {
            agent: agent + 1,
            row_sum,
        });
    }
    let unreached = unreachable_agents(net);
    if !unreached.is_empty() {
        return Err(NetworkError::Unreachable { unreached });
    }
    let m = net.m;
    let adjacency_m = net.sensing.clone();
    let adjacency_0 = Matrix::from_diag(&net.source);
    let weights: Vec<f64> = (0..m).map(|i| net.total_weight(i)).collect();
    let total_weight = Matrix::from_diag(&weights);
    let laplacian = &total_weight - &adjacency_m;
    let spectrum = linalg::eigenvalues(&laplacian)?;
    Ok(LaplacianBundle {
        adjacency_m,
        adjacency_0,
        total_weight,
        laplacian,
        min_real_eig: spectrum.min_real_part,
        positive_stable: spectrum.min_real_part > POSITIVE_STABLE_TOL,
    })
}
