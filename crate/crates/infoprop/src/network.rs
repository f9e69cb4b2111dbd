//! Configuration-model network construction and component analysis.
//!
//! Half-links are paired uniformly at random under a simple-graph
//! constraint (no self-loops, no parallel edges). Draws that would violate
//! the constraint are rejected and redrawn; when no valid pair remains the
//! residual half-links are discarded and reported.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::degree::{DegreeError, Pmf};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("degree sequence is empty")]
    EmptyDegreeSequence,
    #[error("cannot build a histogram over an empty node selection")]
    EmptySelection,
    #[error(transparent)]
    Degree(#[from] DegreeError),
}

/// Immutable simple graph in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Network {
    fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &degree {
            acc += d;
            offsets.push(acc);
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0u32; acc];
        for &(u, v) in edges {
            neighbors[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Self { offsets, neighbors }
    }

    /// Builds a network from an explicit edge list (validated simple graph).
    pub fn from_edge_list(n: usize, edges: &[(u32, u32)]) -> Result<Self, NetworkError> {
        if n == 0 {
            return Err(NetworkError::EmptyDegreeSequence);
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in edges {
            assert!(
                (u as usize) < n && (v as usize) < n,
                "edge endpoint out of range"
            );
            assert_ne!(u, v, "self-loop in edge list");
            let key = (u.min(v) as u64) * n as u64 + u.max(v) as u64;
            assert!(seen.insert(key), "parallel edge in edge list");
        }
        Ok(Self::from_edges(n, edges))
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree_sequence(&self) -> Vec<u32> {
        (0..self.node_count())
            .map(|v| self.degree(v) as u32)
            .collect()
    }

    /// Writes `u v` edge lines with a header comment carrying `n` and the seed.
    pub fn write_edge_list<W: Write>(&self, seed: u64, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# n={} seed={}", self.node_count(), seed)?;
        for u in 0..self.node_count() {
            for &v in self.neighbors(u) {
                if (v as usize) > u {
                    writeln!(w, "{} {}", u, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Result of a configuration-model build, including the repairs applied.
#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub network: Network,
    /// Half-links dropped because only self-loop/parallel pairings remained.
    pub discarded_half_links: usize,
    /// Node whose degree was decremented to fix an odd half-link total.
    pub parity_repaired_node: Option<usize>,
}

/// Pairs half-links uniformly at random into a simple graph.
///
/// If the degree sum is odd, one uniformly chosen node (among those with a
/// half-link) loses one half-link first. Pairing rejects self-loops and
/// parallel edges; when only invalid pairs remain, the residual half-links
/// are discarded and counted in the outcome.
pub fn build_configuration_model<R: Rng + ?Sized>(
    degree_seq: &[usize],
    rng: &mut R,
) -> Result<BuildOutcome, NetworkError> {
    if degree_seq.is_empty() {
        return Err(NetworkError::EmptyDegreeSequence);
    }
    let n = degree_seq.len();
    let mut degrees = degree_seq.to_vec();
    let total: usize = degrees.iter().sum();
    let mut parity_repaired_node = None;
    if total % 2 == 1 {
        let positive: Vec<usize> = (0..n).filter(|&v| degrees[v] > 0).collect();
        let v = positive[rng.random_range(0..positive.len())];
        degrees[v] -= 1;
        parity_repaired_node = Some(v);
    }

    let mut stubs: Vec<u32> = Vec::with_capacity(degrees.iter().sum());
    for (v, &d) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat_n(v as u32, d));
    }

    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(stubs.len() / 2);
    let mut edge_set: HashSet<u64> = HashSet::with_capacity(stubs.len() / 2 * 2);
    let key = |u: u32, v: u32| {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        a as u64 * n as u64 + b as u64
    };

    let mut rejects = 0usize;
    let mut budget = 256usize;
    let mut discarded = 0usize;
    while stubs.len() >= 2 {
        let i = rng.random_range(0..stubs.len());
        let mut j = rng.random_range(0..stubs.len() - 1);
        if j >= i {
            j += 1;
        }
        let (u, v) = (stubs[i], stubs[j]);
        if u != v && !edge_set.contains(&key(u, v)) {
            edge_set.insert(key(u, v));
            edges.push((u, v));
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            stubs.swap_remove(hi);
            stubs.swap_remove(lo);
            rejects = 0;
            continue;
        }
        rejects += 1;
        if rejects < budget {
            continue;
        }
        // exact feasibility check: count valid stub pairs without enumerating
        let valid = count_valid_pairs(&stubs, &edge_set, n);
        if valid == 0 {
            discarded = stubs.len();
            break;
        }
        let total_pairs = stubs.len() as u64 * (stubs.len() as u64 - 1) / 2;
        // renew the rejection budget in proportion to the acceptance odds
        budget = 64 + 32 * (total_pairs / valid).max(1) as usize;
        rejects = 0;
    }
    discarded += stubs.len() % 2; // a single unpaired stub cannot connect

    Ok(BuildOutcome {
        network: Network::from_edges(n, &edges),
        discarded_half_links: discarded,
        parity_repaired_node,
    })
}

fn count_valid_pairs(stubs: &[u32], edge_set: &HashSet<u64>, n: usize) -> u64 {
    let mut counts: std::collections::HashMap<u32, u64> = std::collections::HashMap::new();
    for &s in stubs {
        *counts.entry(s).or_insert(0) += 1;
    }
    let total = stubs.len() as u64 * (stubs.len() as u64 - 1) / 2;
    let self_pairs: u64 = counts.values().map(|&c| c * (c - 1) / 2).sum();
    let mut parallel = 0u64;
    for &k in edge_set {
        let u = (k / n as u64) as u32;
        let v = (k % n as u64) as u32;
        if let (Some(&cu), Some(&cv)) = (counts.get(&u), counts.get(&v)) {
            parallel += cu * cv;
        }
    }
    total - self_pairs - parallel
}

/// Connected components with sizes sorted descending.
#[derive(Debug, Clone)]
pub struct ComponentLabeling {
    pub component_id: Vec<usize>,
    pub component_sizes: Vec<usize>,
}

pub fn components(net: &Network) -> ComponentLabeling {
    let n = net.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut rank = vec![0u8; n];

    fn find(parent: &mut [usize], mut node: usize) -> usize {
        let mut root = node;
        while parent[root] != root {
            root = parent[root];
        }
        while parent[node] != root {
            let next = parent[node];
            parent[node] = root;
            node = next;
        }
        root
    }

    for u in 0..n {
        for &v in net.neighbors(u) {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v as usize));
            if ru != rv {
                match rank[ru].cmp(&rank[rv]) {
                    std::cmp::Ordering::Less => parent[ru] = rv,
                    std::cmp::Ordering::Greater => parent[rv] = ru,
                    std::cmp::Ordering::Equal => {
                        parent[rv] = ru;
                        rank[ru] += 1;
                    }
                }
            }
        }
    }

    let mut size_by_root = vec![0usize; n];
    for v in 0..n {
        size_by_root[find(&mut parent, v)] += 1;
    }
    let mut roots: Vec<usize> = (0..n).filter(|&v| size_by_root[v] > 0).collect();
    roots.sort_by(|&a, &b| size_by_root[b].cmp(&size_by_root[a]).then(a.cmp(&b)));
    let mut id_by_root = vec![usize::MAX; n];
    for (id, &r) in roots.iter().enumerate() {
        id_by_root[r] = id;
    }
    let component_id: Vec<usize> = (0..n).map(|v| id_by_root[find(&mut parent, v)]).collect();
    let component_sizes: Vec<usize> = roots.iter().map(|&r| size_by_root[r]).collect();
    ComponentLabeling {
        component_id,
        component_sizes,
    }
}

/// Normalized histogram of realized degrees over the selected nodes.
pub fn degree_histogram(
    net: &Network,
    node_filter: Option<&dyn Fn(usize) -> bool>,
) -> Result<Pmf, NetworkError> {
    let mut counts: Vec<f64> = Vec::new();
    let mut any = false;
    for v in 0..net.node_count() {
        if let Some(f) = node_filter {
            if !f(v) {
                continue;
            }
        }
        any = true;
        let d = net.degree(v);
        if counts.len() <= d {
            counts.resize(d + 1, 0.0);
        }
        counts[d] += 1.0;
    }
    if !any {
        return Err(NetworkError::EmptySelection);
    }
    Ok(Pmf::new(0, counts)?)
}
