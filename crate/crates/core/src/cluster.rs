//! Permutation cluster correction for mass bivariate tests over sensors,
//! timepoints or frequencies.
//!
//! Nodes whose test is significant at the cluster-forming threshold are
//! grouped into connected components of the adjacency graph; the mass of
//! a component is the sum of its F values. The null distribution holds
//! the largest mass found in each permutation. One-sample and paired
//! designs permute by reflecting each unit's (centred) observation
//! through the origin, independent designs by shuffling condition
//! labels; the same relabelling is applied at every node.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ComplexObservation, ComplexSample, Design, GroupedDataset};
use crate::error::{Result, StatsError};
use crate::hypothesis::{
    paired_differences, t2_one_sample, t2_two_sample, t2circ_one_sample, t2circ_two_sample,
    TestResult,
};
use crate::rng::substream;

/// Undirected graph over `node_count` nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl AdjacencyGraph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(i, j) in &edges {
            if i >= node_count || j >= node_count {
                return Err(StatsError::InvalidGraph(format!(
                    "edge ({i}, {j}) refers to a node ≥ {node_count}"
                )));
            }
            if i == j {
                return Err(StatsError::InvalidGraph(format!("self-loop at node {i}")));
            }
        }
        Ok(Self { node_count, edges })
    }

    /// A path 0 – 1 – … – (n − 1), e.g. adjacent timepoints or frequencies.
    pub fn chain(node_count: usize) -> Self {
        Self {
            node_count,
            edges: (1..node_count).map(|i| (i - 1, i)).collect(),
        }
    }

    /// Parses one `i j` pair per line (0-based). Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse_edge_list(text: &str, node_count: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok()).ok_or_else(|| StatsError::Parse {
                    line: lineno as u64 + 1,
                    message: format!("expected two node indices, got '{line}'"),
                })
            };
            let mut parts = line.split_whitespace();
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(StatsError::Parse {
                    line: lineno as u64 + 1,
                    message: format!("expected two node indices, got '{line}'"),
                });
            }
            edges.push((i, j));
        }
        Self::new(node_count, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }
}

/// Connected components of the nodes with `active[i]`, each sorted.
pub fn connected_components(neighbours: &[Vec<usize>], active: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; active.len()];
    let mut components = Vec::new();
    for start in 0..active.len() {
        if !active[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for &w in &neighbours[v] {
                if active[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterTest {
    T2,
    T2circ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub test: ClusterTest,
    pub alpha_forming: f64,
    pub n_perm: usize,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            test: ClusterTest::T2circ,
            alpha_forming: 0.05,
            n_perm: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub clusters: Vec<Vec<usize>>,
    pub cluster_masses: Vec<f64>,
    /// Largest cluster mass of each permutation, ascending.
    pub null_distribution: Vec<f64>,
    pub corrected_p: Vec<f64>,
    pub alpha_forming: f64,
    pub node_f: Vec<f64>,
    pub node_p: Vec<f64>,
}

// Per-node data reduced to what the permutation scheme acts on.
enum NodeData {
    /// Centred one-sample data (x − μ, or paired differences), tested against 0.
    Reflect(Vec<ComplexObservation>),
    /// Pooled observations; the first `n_a` belong to the first condition.
    Shuffle { pooled: Vec<ComplexObservation>, n_a: usize },
}

fn prepare(ds: &GroupedDataset) -> Result<NodeData> {
    match ds.design() {
        Design::OneSample => {
            let mu = ds.mu();
            Ok(NodeData::Reflect(
                ds.samples()[0].observations().iter().map(|&x| x - mu).collect(),
            ))
        }
        Design::Paired => {
            let d = paired_differences(&ds.samples()[0], &ds.samples()[1])?;
            Ok(NodeData::Reflect(d.observations().to_vec()))
        }
        Design::TwoSampleIndependent => {
            let (a, b) = (&ds.samples()[0], &ds.samples()[1]);
            let mut pooled = a.observations().to_vec();
            pooled.extend_from_slice(b.observations());
            Ok(NodeData::Shuffle {
                pooled,
                n_a: a.len(),
            })
        }
        other => Err(StatsError::DesignMismatch(format!(
            "cluster correction supports one-sample, paired and two-sample designs, not {}",
            other.as_str()
        ))),
    }
}

fn run_test(test: ClusterTest, node: &NodeData, perm: &Relabel) -> Result<TestResult> {
    match node {
        NodeData::Reflect(obs) => {
            let obs = match perm {
                Relabel::Identity => obs.clone(),
                Relabel::Flip(flips) => obs
                    .iter()
                    .zip(flips)
                    .map(|(&x, &f)| if f { -x } else { x })
                    .collect(),
                Relabel::Order(_) => unreachable!("reflection node with a shuffle"),
            };
            let s = ComplexSample::new("node", obs)?;
            match test {
                ClusterTest::T2 => t2_one_sample(&s, ComplexObservation::ZERO),
                ClusterTest::T2circ => t2circ_one_sample(&s, ComplexObservation::ZERO),
            }
        }
        NodeData::Shuffle { pooled, n_a } => {
            let ordered: Vec<ComplexObservation> = match perm {
                Relabel::Identity => pooled.clone(),
                Relabel::Order(order) => order.iter().map(|&i| pooled[i]).collect(),
                Relabel::Flip(_) => unreachable!("shuffle node with a reflection"),
            };
            let a = ComplexSample::new("a", ordered[..*n_a].to_vec())?;
            let b = ComplexSample::new("b", ordered[*n_a..].to_vec())?;
            match test {
                ClusterTest::T2 => t2_two_sample(&a, &b),
                ClusterTest::T2circ => t2circ_two_sample(&a, &b),
            }
        }
    }
}

enum Relabel {
    Identity,
    Flip(Vec<bool>),
    Order(Vec<usize>),
}

fn draw_relabel(reflect: bool, n: usize, seed: u64, index: u64) -> Relabel {
    let mut rng = substream(seed, 0, index);
    if reflect {
        Relabel::Flip((0..n).map(|_| rng.gen::<bool>()).collect())
    } else {
        // Fisher–Yates with 32-bit draws
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i as u32) as usize;
            order.swap(i, j);
        }
        Relabel::Order(order)
    }
}

fn node_stats(test: ClusterTest, nodes: &[NodeData], perm: &Relabel) -> (Vec<f64>, Vec<f64>) {
    nodes
        .iter()
        .map(|node| match run_test(test, node, perm) {
            Ok(r) => (r.f_value.unwrap_or(0.0), r.p_value),
            Err(_) => (0.0, 1.0),
        })
        .unzip()
}

fn clusters_and_masses(
    neighbours: &[Vec<usize>],
    f: &[f64],
    p: &[f64],
    alpha: f64,
) -> (Vec<Vec<usize>>, Vec<f64>) {
    let active: Vec<bool> = p.iter().map(|&p| p < alpha).collect();
    let clusters = connected_components(neighbours, &active);
    let masses = clusters
        .iter()
        .map(|c| c.iter().map(|&i| f[i]).sum())
        .collect();
    (clusters, masses)
}

pub fn cluster_correct(
    data: &[GroupedDataset],
    graph: &AdjacencyGraph,
    options: &ClusterOptions,
) -> Result<ClusterResult> {
    if data.len() != graph.node_count() {
        return Err(StatsError::InvalidGraph(format!(
            "graph has {} nodes but {} datasets were given",
            graph.node_count(),
            data.len()
        )));
    }
    if !(options.alpha_forming > 0.0 && options.alpha_forming < 1.0) {
        return Err(StatsError::Domain(format!(
            "alpha_forming must be in (0, 1), got {}",
            options.alpha_forming
        )));
    }
    let Some(first) = data.first() else {
        return Err(StatsError::InvalidGraph("no nodes".into()));
    };
    let design = first.design();
    let nodes = data
        .iter()
        .map(|ds| {
            if ds.design() != design {
                return Err(StatsError::DesignMismatch(
                    "all nodes must share one design".into(),
                ));
            }
            prepare(ds)
        })
        .collect::<Result<Vec<_>>>()?;
    let (reflect, n) = match &nodes[0] {
        NodeData::Reflect(obs) => (true, obs.len()),
        NodeData::Shuffle { pooled, .. } => (false, pooled.len()),
    };
    let consistent = nodes.iter().all(|node| match (node, &nodes[0]) {
        (NodeData::Reflect(a), NodeData::Reflect(b)) => a.len() == b.len(),
        (
            NodeData::Shuffle { pooled: a, n_a: x },
            NodeData::Shuffle { pooled: b, n_a: y },
        ) => a.len() == b.len() && x == y,
        _ => false,
    });
    if !consistent {
        return Err(StatsError::DesignMismatch(
            "every node must have the same group sizes".into(),
        ));
    }

    let neighbours = graph.neighbours();
    let (node_f, node_p) = node_stats(options.test, &nodes, &Relabel::Identity);
    let (clusters, cluster_masses) =
        clusters_and_masses(&neighbours, &node_f, &node_p, options.alpha_forming);

    let mut null_distribution: Vec<f64> = (0..options.n_perm as u64)
        .into_par_iter()
        .map(|i| {
            let perm = draw_relabel(reflect, n, options.seed, i);
            let (f, p) = node_stats(options.test, &nodes, &perm);
            let (_, masses) = clusters_and_masses(&neighbours, &f, &p, options.alpha_forming);
            masses.into_iter().fold(0.0, f64::max)
        })
        .collect();
    null_distribution.sort_by(f64::total_cmp);

    let corrected_p = cluster_masses
        .iter()
        .map(|&m| {
            let exceed = null_distribution.len() - null_distribution.partition_point(|&x| x < m);
            (1 + exceed) as f64 / (1 + options.n_perm) as f64
        })
        .collect();

    Ok(ClusterResult {
        clusters,
        cluster_masses,
        null_distribution,
        corrected_p,
        alpha_forming: options.alpha_forming,
        node_f,
        node_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_validation() {
        assert!(AdjacencyGraph::new(3, vec![(0, 3)]).is_err());
        assert!(AdjacencyGraph::new(3, vec![(1, 1)]).is_err());
        let g = AdjacencyGraph::parse_edge_list("# chain\n0 1\n\n1 2\n", 3).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(matches!(
            AdjacencyGraph::parse_edge_list("0 1\n1 x\n", 3),
            Err(StatsError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn components() {
        let g = AdjacencyGraph::new(6, vec![(0, 1), (1, 2), (3, 4), (4, 5)]).unwrap();
        let active = [true, false, true, true, true, false];
        assert_eq!(
            connected_components(&g.neighbours(), &active),
            vec![vec![0], vec![2], vec![3, 4]]
        );
    }
}
