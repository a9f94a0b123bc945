//! Chemical distance, shortest paths, graph diameter, and the binary
//! hierarchy machinery built on top of them.

mod hierarchy;

pub use hierarchy::{
    audit_hierarchy, bridge_gaps, check_regularity, extract_hierarchy, gap_product,
    gap_product_ln, gap_product_satisfied, greedy_build, validate_hierarchy, BridgeOutcome,
    BridgeReport, Extraction, GreedyOutcome, Hierarchy, HierarchyAudit, HierarchyValidation,
    HierarchyViolation,
};

use crate::bondspace::GraphSample;
use crate::error::{Error, Result};
use crate::lattice::{NormKind, Point};
use serde::Serialize;
use std::collections::VecDeque;

const UNSEEN: u32 = u32::MAX;

/// Hop distances from `start`, `UNSEEN` where unreachable.
fn bfs_distances(graph: &GraphSample, start: u32) -> Vec<u32> {
    let mut dist = vec![UNSEEN; graph.site_count() as usize];
    dist[start as usize] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(site) = queue.pop_front() {
        let next = dist[site as usize] + 1;
        for &nb in graph.neighbors(site) {
            if dist[nb as usize] == UNSEEN {
                dist[nb as usize] = next;
                queue.push_back(nb);
            }
        }
    }
    dist
}

fn site_index(graph: &GraphSample, p: &Point) -> Result<u32> {
    graph
        .site_of(p)
        .ok_or_else(|| Error::invalid(format!("site {p} outside sample box")))
}

/// Graph (hop) distance between two sites; `None` when no path exists.
pub fn chemical_distance(graph: &GraphSample, x: &Point, y: &Point) -> Result<Option<u64>> {
    let sx = site_index(graph, x)?;
    let sy = site_index(graph, y)?;
    if sx == sy {
        return Ok(Some(0));
    }
    let mut dist = vec![UNSEEN; graph.site_count() as usize];
    dist[sx as usize] = 0;
    let mut queue = VecDeque::from([sx]);
    while let Some(site) = queue.pop_front() {
        let next = dist[site as usize] + 1;
        for &nb in graph.neighbors(site) {
            if dist[nb as usize] == UNSEEN {
                if nb == sy {
                    return Ok(Some(next as u64));
                }
                dist[nb as usize] = next;
                queue.push_back(nb);
            }
        }
    }
    Ok(None)
}

/// A path through the sample: consecutive sites are joined by sampled bonds
/// and all sites are distinct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathRecord {
    sites: Vec<Point>,
}

impl PathRecord {
    pub(crate) fn new(sites: Vec<Point>) -> Self {
        PathRecord { sites }
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    /// Number of bonds.
    pub fn len(&self) -> u64 {
        (self.sites.len().max(1) - 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.sites.len() <= 1
    }

    /// Bond lengths |z_{i-1} - z_i| under the given norm.
    pub fn bond_lengths(&self, norm: NormKind) -> Result<Vec<f64>> {
        self.sites
            .windows(2)
            .map(|w| norm.distance(&w[0], &w[1]))
            .collect()
    }

    /// Consistency against a sample: distinct sites, all bonds occupied.
    pub fn check_against(&self, graph: &GraphSample) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for p in &self.sites {
            if !seen.insert(p.clone()) {
                return Err(Error::invalid(format!("path revisits site {p}")));
            }
        }
        for w in self.sites.windows(2) {
            let a = site_index(graph, &w[0])?;
            let b = site_index(graph, &w[1])?;
            if !graph.has_edge(a, b) {
                return Err(Error::invalid(format!(
                    "path step {} - {} is not a sampled bond",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// A minimal-hop path from `x` to `y`, or `None` when unreachable.
///
/// Deterministic tie-break: the path is reconstructed backwards from `y`
/// choosing the lexicographically smallest predecessor at every step.
pub fn shortest_path(graph: &GraphSample, x: &Point, y: &Point) -> Result<Option<PathRecord>> {
    let sx = site_index(graph, x)?;
    let sy = site_index(graph, y)?;
    if sx == sy {
        return Ok(Some(PathRecord::new(vec![x.clone()])));
    }
    let dist = bfs_distances(graph, sx);
    if dist[sy as usize] == UNSEEN {
        return Ok(None);
    }
    let mut rev = vec![sy];
    let mut cur = sy;
    while cur != sx {
        let want = dist[cur as usize] - 1;
        // neighbor lists are sorted by site index, which is lexicographic
        let prev = graph
            .neighbors(cur)
            .iter()
            .copied()
            .find(|&nb| dist[nb as usize] == want)
            .expect("BFS predecessor must exist");
        rev.push(prev);
        cur = prev;
    }
    rev.reverse();
    Ok(Some(PathRecord::new(
        rev.into_iter().map(|s| graph.point_of(s)).collect(),
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiameterMode {
    Exact,
    TwoSweepLower,
}

/// Diameter of the largest component, either exact or as the double-sweep
/// lower bound; the variant keeps the distinction visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiameterEstimate {
    Exact(u64),
    LowerBound(u64),
}

impl DiameterEstimate {
    pub fn value(&self) -> u64 {
        match self {
            DiameterEstimate::Exact(v) | DiameterEstimate::LowerBound(v) => *v,
        }
    }
}

pub fn graph_diameter(graph: &GraphSample, mode: DiameterMode) -> Result<DiameterEstimate> {
    let labeling = crate::clusters::label_components(graph);
    let giant = labeling.largest_id();
    let members: Vec<u32> = (0..graph.site_count() as u32)
        .filter(|&s| labeling.component_of(s) == giant)
        .collect();
    match mode {
        DiameterMode::Exact => {
            if graph.site_count() > 10_000 {
                return Err(Error::invalid(
                    "exact diameter is limited to 10^4 sites; use the two-sweep bound",
                ));
            }
            let mut best = 0u64;
            for &s in &members {
                let dist = bfs_distances(graph, s);
                for &t in &members {
                    if dist[t as usize] != UNSEEN {
                        best = best.max(dist[t as usize] as u64);
                    }
                }
            }
            Ok(DiameterEstimate::Exact(best))
        }
        DiameterMode::TwoSweepLower => {
            // double sweep: BFS from the smallest site of the giant, then
            // from the farthest site found
            let start = members[0];
            let dist = bfs_distances(graph, start);
            let (far, _) = members
                .iter()
                .map(|&s| (s, dist[s as usize]))
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .unwrap();
            let dist2 = bfs_distances(graph, far);
            let best = members
                .iter()
                .map(|&s| dist2[s as usize])
                .filter(|&d| d != UNSEEN)
                .max()
                .unwrap_or(0);
            Ok(DiameterEstimate::LowerBound(best as u64))
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::bondspace::{BondModel, ConnectionProfile};
    use crate::lattice::BoxSpec;

    pub fn pt<const N: usize>(c: [i64; N]) -> Point {
        Point::from(c)
    }

    pub fn zero_model(dim: usize) -> BondModel {
        BondModel::new(
            dim,
            ConnectionProfile::shifted_power(0.0, 1.5),
            0.0,
            NormKind::Euclidean,
        )
        .unwrap()
    }

    pub fn line_sample(edges: &[(i64, i64)], side: u64) -> GraphSample {
        let bx = BoxSpec::cornered(pt([0]), side).unwrap();
        let e: Vec<(Point, Point)> = edges.iter().map(|&(a, b)| (pt([a]), pt([b]))).collect();
        GraphSample::from_edges(bx, zero_model(1), 0, &e).unwrap()
    }

    /// Exhaustive minimal path length by DFS over simple paths with pruning.
    pub fn brute_force_distance(graph: &GraphSample, sx: u32, sy: u32) -> Option<u64> {
        fn dfs(
            graph: &GraphSample,
            cur: u32,
            target: u32,
            used: &mut Vec<bool>,
            depth: u64,
            best: &mut Option<u64>,
        ) {
            if let Some(b) = *best {
                if depth >= b {
                    return;
                }
            }
            for &nb in graph.neighbors(cur) {
                if nb == target {
                    let found = depth + 1;
                    if best.map_or(true, |b| found < b) {
                        *best = Some(found);
                    }
                    continue;
                }
                if !used[nb as usize] {
                    used[nb as usize] = true;
                    dfs(graph, nb, target, used, depth + 1, best);
                    used[nb as usize] = false;
                }
            }
        }
        if sx == sy {
            return Some(0);
        }
        let mut used = vec![false; graph.site_count() as usize];
        used[sx as usize] = true;
        let mut best = None;
        dfs(graph, sx, sy, &mut used, 0, &mut best);
        best
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::bondspace::{BondModel, ConnectionProfile};
    use crate::lattice::BoxSpec;

    #[test]
    fn chemical_distance_basics() {
        let g = line_sample(&[(0, 1), (1, 2), (0, 2)], 5);
        assert_eq!(chemical_distance(&g, &pt([3]), &pt([3])).unwrap(), Some(0));
        assert_eq!(chemical_distance(&g, &pt([0]), &pt([2])).unwrap(), Some(1));
        assert_eq!(chemical_distance(&g, &pt([0]), &pt([4])).unwrap(), None);
        assert!(chemical_distance(&g, &pt([0]), &pt([77])).is_err());
    }

    #[test]
    fn distance_matches_brute_force_on_random_graphs() {
        let m = BondModel::new(
            1,
            ConnectionProfile::shifted_power(1.2, 1.3),
            0.25,
            NormKind::Euclidean,
        )
        .unwrap();
        let bx = BoxSpec::cornered(pt([0]), 12).unwrap();
        for seed in 0..1000u64 {
            let g = m.sample_graph(&bx, seed).unwrap();
            let (a, b) = (seed % 12, (seed / 12) % 12);
            let (x, y) = (pt([a as i64]), pt([b as i64]));
            let fast = chemical_distance(&g, &x, &y).unwrap();
            let brute = brute_force_distance(&g, a as u32, b as u32);
            assert_eq!(fast, brute, "seed {seed} pair ({a},{b})");
            // the witness path always matches the distance
            let sp = shortest_path(&g, &x, &y).unwrap();
            match (fast, sp) {
                (Some(d), Some(p)) => {
                    assert_eq!(p.len(), d);
                    p.check_against(&g).unwrap();
                }
                (None, None) => {}
                other => panic!("distance/path disagree: {other:?}"),
            }
        }
    }

    #[test]
    fn shortest_path_trivial_and_deterministic() {
        let g = line_sample(&[(0, 1), (1, 2), (0, 3), (3, 2)], 6);
        let p = shortest_path(&g, &pt([2]), &pt([2])).unwrap().unwrap();
        assert_eq!(p.len(), 0);
        assert_eq!(p.sites().len(), 1);

        // two shortest routes 0-1-2 and 0-3-2: the lex tie-break picks 0-1-2
        let p = shortest_path(&g, &pt([0]), &pt([2])).unwrap().unwrap();
        assert_eq!(p.sites(), &[pt([0]), pt([1]), pt([2])]);
    }

    #[test]
    fn metric_axioms_on_components() {
        let m = BondModel::new(
            1,
            ConnectionProfile::shifted_power(1.0, 1.4),
            0.5,
            NormKind::Euclidean,
        )
        .unwrap();
        let bx = BoxSpec::cornered(pt([0]), 24).unwrap();
        for seed in 0..40u64 {
            let g = m.sample_graph(&bx, seed).unwrap();
            for (a, b, c) in [(0i64, 7, 15), (3, 11, 22), (1, 2, 20)] {
                let d = |u: i64, v: i64| chemical_distance(&g, &pt([u]), &pt([v])).unwrap();
                assert_eq!(d(a, b), d(b, a));
                if let (Some(ab), Some(bc), Some(ac)) = (d(a, b), d(b, c), d(a, c)) {
                    assert!(ac <= ab + bc);
                }
                assert_eq!(d(a, a), Some(0));
            }
        }
    }

    #[test]
    fn distance_monotone_under_coupled_edge_addition() {
        let bx = BoxSpec::cornered(pt([0]), 32).unwrap();
        let lo = BondModel::new(
            1,
            ConnectionProfile::shifted_power(0.6, 1.5),
            0.3,
            NormKind::Euclidean,
        )
        .unwrap();
        let hi = BondModel::new(
            1,
            ConnectionProfile::shifted_power(1.8, 1.5),
            0.3,
            NormKind::Euclidean,
        )
        .unwrap();
        for seed in 0..30u64 {
            let gl = lo.sample_graph_coupled(&bx, seed).unwrap();
            let gh = hi.sample_graph_coupled(&bx, seed).unwrap();
            for (a, b) in [(0i64, 31), (4, 20), (7, 8)] {
                let dl = chemical_distance(&gl, &pt([a]), &pt([b])).unwrap();
                let dh = chemical_distance(&gh, &pt([a]), &pt([b])).unwrap();
                if let Some(dl) = dl {
                    let dh = dh.expect("connected pairs stay connected under edge addition");
                    assert!(dh <= dl, "seed {seed}: D grew from {dl} to {dh}");
                }
            }
        }
    }

    #[test]
    fn diameter_cases() {
        let g = line_sample(&[], 1);
        assert_eq!(
            graph_diameter(&g, DiameterMode::Exact).unwrap(),
            DiameterEstimate::Exact(0)
        );

        let n = 9i64;
        let edges: Vec<(i64, i64)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let g = line_sample(&edges, n as u64);
        assert_eq!(
            graph_diameter(&g, DiameterMode::Exact).unwrap(),
            DiameterEstimate::Exact(n as u64 - 1)
        );
        // on a path the double sweep is tight
        assert_eq!(
            graph_diameter(&g, DiameterMode::TwoSweepLower).unwrap(),
            DiameterEstimate::LowerBound(n as u64 - 1)
        );
    }

    #[test]
    fn two_sweep_never_exceeds_exact() {
        let m = BondModel::new(
            1,
            ConnectionProfile::shifted_power(0.7, 1.6),
            0.6,
            NormKind::Euclidean,
        )
        .unwrap();
        let bx = BoxSpec::cornered(pt([0]), 100).unwrap();
        for seed in 0..50u64 {
            let g = m.sample_graph(&bx, seed).unwrap();
            let exact = graph_diameter(&g, DiameterMode::Exact).unwrap().value();
            let sweep = graph_diameter(&g, DiameterMode::TwoSweepLower)
                .unwrap()
                .value();
            assert!(sweep <= exact, "seed {seed}: sweep {sweep} > exact {exact}");
        }
    }

    #[test]
    fn exact_diameter_rejects_oversize() {
        let m = zero_model(1);
        let bx = BoxSpec::cornered(pt([0]), 10_001).unwrap();
        let g = m.sample_graph(&bx, 0).unwrap();
        assert!(graph_diameter(&g, DiameterMode::Exact).is_err());
        assert!(graph_diameter(&g, DiameterMode::TwoSweepLower).is_ok());
    }
}
