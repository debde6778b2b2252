//! Random graph generators, hop distances and complete-linkage clustering.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spectral::{laplacian_of, GraphShift, ShiftKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    ErdosRenyi { p: f64 },
    StochasticBlock { sizes: Vec<usize>, p: f64, q: f64 },
    /// Ring lattice where every node has `degree` neighbours, each edge
    /// rewired with probability `q`.
    SmallWorld { degree: usize, q: f64 },
    DirectedCycle,
    Path,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    #[serde(flatten)]
    pub family: GraphFamily,
    #[serde(default = "default_shift")]
    pub shift: ShiftKind,
}

fn default_shift() -> ShiftKind {
    ShiftKind::Adjacency
}

impl GraphSpec {
    pub fn new(n: usize, family: GraphFamily) -> Self {
        Self { n, family, shift: ShiftKind::Adjacency }
    }

    pub fn laplacian(mut self) -> Self {
        self.shift = ShiftKind::Laplacian;
        self
    }

    /// `count` equal communities of `size` nodes.
    pub fn sbm(count: usize, size: usize, p: f64, q: f64) -> Self {
        Self::new(count * size, GraphFamily::StochasticBlock { sizes: vec![size; count], p, q })
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} = {v} is not a probability")))
            }
        };
        if self.n == 0 {
            return Err(Error::InvalidSpec("graph needs at least one node".into()));
        }
        if !matches!(self.shift, ShiftKind::Adjacency | ShiftKind::Laplacian) {
            return Err(Error::InvalidSpec("generated shifts are adjacency or laplacian".into()));
        }
        match &self.family {
            GraphFamily::ErdosRenyi { p } => prob("p", *p),
            GraphFamily::StochasticBlock { sizes, p, q } => {
                prob("p", *p)?;
                prob("q", *q)?;
                if sizes.iter().sum::<usize>() != self.n {
                    return Err(Error::InvalidSpec(format!(
                        "community sizes sum to {} but n = {}",
                        sizes.iter().sum::<usize>(),
                        self.n
                    )));
                }
                Ok(())
            }
            GraphFamily::SmallWorld { degree, q } => {
                prob("q", *q)?;
                if degree % 2 != 0 || *degree >= self.n {
                    return Err(Error::InvalidSpec(format!(
                        "small-world degree {degree} must be even and below n = {}",
                        self.n
                    )));
                }
                Ok(())
            }
            GraphFamily::DirectedCycle | GraphFamily::Path => Ok(()),
        }
    }

    /// Community label of every node (SBM only).
    pub fn communities(&self) -> Option<Vec<Vec<usize>>> {
        match &self.family {
            GraphFamily::StochasticBlock { sizes, .. } => {
                let mut start = 0;
                Some(
                    sizes
                        .iter()
                        .map(|&s| {
                            let block = (start..start + s).collect();
                            start += s;
                            block
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

/// Generates the graph described by `spec`; identical `(spec, seed)` pairs
/// give identical shifts.
pub fn generate_graph(spec: &GraphSpec, seed: u64) -> Result<GraphShift> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = rng::rng(rng::derive_seed(seed, rng::tags::GRAPH, 0));
    let mut a = DMatrix::<f64>::zeros(n, n);
    let link = |a: &mut DMatrix<f64>, i: usize, j: usize| {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    };
    match &spec.family {
        GraphFamily::ErdosRenyi { p } => {
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < *p {
                        link(&mut a, i, j);
                    }
                }
            }
        }
        GraphFamily::StochasticBlock { sizes, p, q } => {
            let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
            for i in 0..n {
                for j in i + 1..n {
                    let prob = if labels[i] == labels[j] { *p } else { *q };
                    if rng.random::<f64>() < prob {
                        link(&mut a, i, j);
                    }
                }
            }
        }
        GraphFamily::SmallWorld { degree, q } => {
            let half = degree / 2;
            for i in 0..n {
                for d in 1..=half {
                    link(&mut a, i, (i + d) % n);
                }
            }
            // Rewire edge (i, i+d) to (i, k) with probability q.
            for d in 1..=half {
                for i in 0..n {
                    let j = (i + d) % n;
                    if a[(i, j)] == 0.0 || rng.random::<f64>() >= *q {
                        continue;
                    }
                    let free: Vec<usize> = (0..n).filter(|&k| k != i && a[(i, k)] == 0.0).collect();
                    if let Some(&k) = free.get(rng.random_range(0..free.len().max(1))) {
                        a[(i, j)] = 0.0;
                        a[(j, i)] = 0.0;
                        link(&mut a, i, k);
                    }
                }
            }
        }
        GraphFamily::DirectedCycle => {
            for i in 0..n {
                if n > 1 {
                    a[((i + 1) % n, i)] = 1.0;
                }
            }
        }
        GraphFamily::Path => {
            for i in 0..n.saturating_sub(1) {
                link(&mut a, i, i + 1);
            }
        }
    }
    match spec.shift {
        ShiftKind::Laplacian => GraphShift::from_real(laplacian_of(&a), ShiftKind::Laplacian),
        _ => GraphShift::from_real(a, ShiftKind::Adjacency),
    }
}

/// Shortest-path hop counts on the undirected support of a shift.
#[derive(Clone, Debug, PartialEq)]
pub struct HopDistanceTable {
    dist: Vec<Vec<usize>>,
}

impl HopDistanceTable {
    pub const UNREACHABLE: usize = usize::MAX;

    pub fn from_rows(dist: Vec<Vec<usize>>) -> Self {
        Self { dist }
    }

    pub fn n(&self) -> usize {
        self.dist.len()
    }

    /// `None` when `j` is unreachable from `i`.
    pub fn get(&self, i: usize, j: usize) -> Option<usize> {
        let d = self.dist[i][j];
        (d != Self::UNREACHABLE).then_some(d)
    }

    pub fn is_connected(&self) -> bool {
        self.dist.iter().flatten().all(|&d| d != Self::UNREACHABLE)
    }

    /// Smallest hop distance between any node of `a` and any node of `b`.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> usize {
        a.iter().flat_map(|&i| b.iter().map(move |&j| self.dist[i][j])).min().unwrap_or(Self::UNREACHABLE)
    }
}

pub fn hop_distances(shift: &GraphShift) -> HopDistanceTable {
    let neighbors = shift.support_neighbors();
    let n = neighbors.len();
    let dist = (0..n)
        .map(|src| {
            let mut row = vec![HopDistanceTable::UNREACHABLE; n];
            row[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in &neighbors[u] {
                    if row[v] == HopDistanceTable::UNREACHABLE {
                        row[v] = row[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            row
        })
        .collect();
    HopDistanceTable { dist }
}

/// One agglomeration step: clusters `a` and `b` (identified by their
/// smallest vertex) merged at complete-linkage distance `height`.
#[derive(Clone, Debug, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: usize,
}

/// Complete-linkage dendrogram cut into `m` blocks.
///
/// Merges always take the closest pair; ties go to the pair whose smallest
/// vertices are lexicographically smallest. Blocks come back sorted by their
/// smallest vertex, members ascending.
pub fn cluster_complete_linkage(dist: &HopDistanceTable, m: usize) -> Result<Vec<Vec<usize>>> {
    let (blocks, _) = complete_linkage(dist, m)?;
    Ok(blocks)
}

/// Like [`cluster_complete_linkage`] but also returns the merge history.
pub fn complete_linkage(dist: &HopDistanceTable, m: usize) -> Result<(Vec<Vec<usize>>, Vec<Merge>)> {
    let n = dist.n();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("cannot cut {n} vertices into {m} blocks")));
    }
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut d: Vec<Vec<usize>> = dist.dist.clone();
    let mut merges = Vec::new();
    let mut active = n;
    while active > m {
        let mut best: Option<(usize, usize, usize)> = None;
        for a in 0..n {
            if clusters[a].is_none() {
                continue;
            }
            for b in a + 1..n {
                if clusters[b].is_none() {
                    continue;
                }
                // cluster slots are indexed by their smallest vertex, so the
                // scan order already realizes the tie-break
                if best.is_none_or(|(h, _, _)| d[a][b] < h) {
                    best = Some((d[a][b], a, b));
                }
            }
        }
        let (height, a, b) = best.expect("at least two active clusters");
        if height == HopDistanceTable::UNREACHABLE {
            return Err(Error::Disconnected { blocks: active });
        }
        let absorbed = clusters[b].take().unwrap();
        let target = clusters[a].as_mut().unwrap();
        target.extend(absorbed);
        target.sort_unstable();
        for c in 0..n {
            let merged = d[a][c].max(d[b][c]);
            d[a][c] = merged;
            d[c][a] = merged;
        }
        merges.push(Merge { a, b, height });
        active -= 1;
    }
    Ok((clusters.into_iter().flatten().collect(), merges))
}

/// `m` blocks of near-equal size (sizes differ by at most one).
pub fn equal_block_sizes(n: usize, m: usize) -> Vec<usize> {
    (0..m).map(|i| n / m + usize::from(i < n % m)).collect()
}

/// Random partition of `0..n` into blocks of the given sizes.
pub fn random_partition(n: usize, sizes: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    if sizes.iter().sum::<usize>() != n || sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!("block sizes {sizes:?} do not partition {n} vertices")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::rng(rng::derive_seed(seed, rng::tags::WINDOWS, 0)));
    let mut start = 0;
    Ok(sizes
        .iter()
        .map(|&s| {
            let mut block = perm[start..start + s].to_vec();
            block.sort_unstable();
            start += s;
            block
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges_to_shift(n: usize, undirected: &[(usize, usize)]) -> GraphShift {
        let e: Vec<_> = undirected.iter().flat_map(|&(i, j)| [(i, j, 1.0), (j, i, 1.0)]).collect();
        GraphShift::adjacency_from_edges(n, &e).unwrap()
    }

    #[test]
    fn directed_cycle_is_circulant() {
        let s = generate_graph(&GraphSpec::new(4, GraphFamily::DirectedCycle), 0).unwrap();
        let a = s.real_entries().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a[(i, j)], if i == (j + 1) % 4 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn erdos_renyi_full_probability_is_complete() {
        let s = generate_graph(&GraphSpec::new(5, GraphFamily::ErdosRenyi { p: 1.0 }), 3).unwrap();
        let a = s.real_entries().unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn sbm_densities_match_probabilities() {
        let spec = GraphSpec::sbm(10, 10, 0.9, 0.1);
        let (mut within, mut within_n, mut across, mut across_n) = (0.0, 0.0, 0.0, 0.0);
        for seed in 0..100 {
            let a = generate_graph(&spec, seed).unwrap().real_entries().unwrap().clone();
            for i in 0..100 {
                for j in i + 1..100 {
                    if i / 10 == j / 10 {
                        within += a[(i, j)];
                        within_n += 1.0;
                    } else {
                        across += a[(i, j)];
                        across_n += 1.0;
                    }
                }
            }
        }
        assert!((within / within_n - 0.9).abs() < 0.05);
        assert!((across / across_n - 0.1).abs() < 0.05);
    }

    #[test]
    fn small_world_keeps_edge_count_and_symmetry() {
        let spec = GraphSpec::new(30, GraphFamily::SmallWorld { degree: 4, q: 0.3 });
        let a = generate_graph(&spec, 11).unwrap().real_entries().unwrap().clone();
        assert_eq!(a.sum(), 30.0 * 4.0);
        assert_eq!(a.transpose(), a);
        assert!((0..30).all(|i| a[(i, i)] == 0.0));
        let lattice = generate_graph(&GraphSpec::new(30, GraphFamily::SmallWorld { degree: 4, q: 0.0 }), 11).unwrap();
        assert!((0..30).all(|i| lattice.real_entries().unwrap().row(i).sum() == 4.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GraphSpec::new(40, GraphFamily::ErdosRenyi { p: 0.2 });
        let a = generate_graph(&spec, 5).unwrap();
        let b = generate_graph(&spec, 5).unwrap();
        let c = generate_graph(&spec, 6).unwrap();
        assert_eq!(a.entries(), b.entries());
        assert_ne!(a.entries(), c.entries());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate_graph(&GraphSpec::new(5, GraphFamily::ErdosRenyi { p: 1.5 }), 0).is_err());
        let bad_sizes = GraphSpec::new(10, GraphFamily::StochasticBlock { sizes: vec![3, 3], p: 0.5, q: 0.1 });
        assert!(matches!(generate_graph(&bad_sizes, 0), Err(Error::InvalidSpec(_))));
        assert!(generate_graph(&GraphSpec::new(10, GraphFamily::SmallWorld { degree: 3, q: 0.1 }), 0).is_err());
    }

    #[test]
    fn hop_distance_examples() {
        let path = edges_to_shift(3, &[(0, 1), (1, 2)]);
        assert_eq!(hop_distances(&path).get(0, 2), Some(2));

        let complete = generate_graph(&GraphSpec::new(6, GraphFamily::ErdosRenyi { p: 1.0 }), 0).unwrap();
        let d = hop_distances(&complete);
        assert!((0..6).all(|i| (0..6).all(|j| d.get(i, j) == Some(usize::from(i != j)))));

        let ring: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        let d = hop_distances(&edges_to_shift(6, &ring));
        assert!((0..6).all(|i| d.get(i, (i + 3) % 6) == Some(3)));

        let split = edges_to_shift(4, &[(0, 1), (2, 3)]);
        let d = hop_distances(&split);
        assert_eq!(d.get(0, 3), None);
        assert!(!d.is_connected());
    }

    fn two_cliques() -> GraphShift {
        let mut e = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    e.push((base + i, base + j));
                }
            }
        }
        e.push((4, 5));
        edges_to_shift(10, &e)
    }

    #[test]
    fn complete_linkage_edge_cases() {
        let d = hop_distances(&two_cliques());
        let singletons = cluster_complete_linkage(&d, 10).unwrap();
        assert_eq!(singletons, (0..10).map(|i| vec![i]).collect::<Vec<_>>());
        assert_eq!(cluster_complete_linkage(&d, 1).unwrap(), vec![(0..10).collect::<Vec<_>>()]);
        assert!(cluster_complete_linkage(&d, 0).is_err());
    }

    #[test]
    fn complete_linkage_separates_cliques() {
        let d = hop_distances(&two_cliques());
        let blocks = cluster_complete_linkage(&d, 2).unwrap();
        assert_eq!(blocks, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
    }

    #[test]
    fn complete_linkage_reports_disconnection() {
        let d = hop_distances(&edges_to_shift(4, &[(0, 1), (2, 3)]));
        assert_eq!(cluster_complete_linkage(&d, 2).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        assert!(matches!(cluster_complete_linkage(&d, 1), Err(Error::Disconnected { blocks: 2 })));
    }

    #[test]
    fn random_partition_covers_vertices() {
        let blocks = random_partition(10, &equal_block_sizes(10, 3), 4).unwrap();
        assert_eq!(blocks.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 3]);
        let mut all: Vec<usize> = blocks.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
