//! Connected-component analysis on bond samples: global labeling, local
//! clusters `C_l(x)`, dense points and block renormalization.

use crate::bondspace::GraphSample;
use crate::error::{Error, Result};
use crate::lattice::{BoxSpec, NormKind, Point};
use serde::Serialize;
use std::collections::HashMap;

/// Union-find with path halving and union by size.
pub(crate) struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    pub(crate) fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// A partition of the box sites into connected components.
///
/// Component ids are assigned by the lexicographically smallest member site,
/// so the labeling is independent of edge order. The largest id breaks size
/// ties toward the component containing the smallest site.
#[derive(Debug, Clone)]
pub struct Labeling {
    component: Vec<u32>,
    sizes: Vec<u64>,
    largest: u32,
}

impl Labeling {
    pub fn component_of(&self, site: u32) -> u32 {
        self.component[site as usize]
    }

    pub fn size_of(&self, id: u32) -> u64 {
        self.sizes[id as usize]
    }

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn largest_id(&self) -> u32 {
        self.largest
    }

    pub fn largest_size(&self) -> u64 {
        self.sizes[self.largest as usize]
    }

    pub fn site_count(&self) -> u64 {
        self.component.len() as u64
    }
}

/// Label all components of a sample.
pub fn label_components(graph: &GraphSample) -> Labeling {
    let n = graph.site_count() as usize;
    let mut uf = UnionFind::new(n);
    for (a, b) in graph.edges() {
        uf.union(a, b);
    }
    // canonical ids in order of first (lexicographically smallest) member
    let mut id_of_root: HashMap<u32, u32> = HashMap::new();
    let mut component = vec![0u32; n];
    let mut sizes: Vec<u64> = Vec::new();
    for site in 0..n as u32 {
        let root = uf.find(site);
        let next = sizes.len() as u32;
        let id = *id_of_root.entry(root).or_insert_with(|| {
            sizes.push(0);
            next
        });
        component[site as usize] = id;
        sizes[id as usize] += 1;
    }
    let mut largest = 0u32;
    for id in 1..sizes.len() as u32 {
        // strict: ties stay with the earlier id, i.e. the smaller lex site
        if sizes[id as usize] > sizes[largest as usize] {
            largest = id;
        }
    }
    Labeling {
        component,
        sizes,
        largest,
    }
}

/// `|C_L| / L^d`.
pub fn largest_component_fraction(graph: &GraphSample) -> f64 {
    let labeling = label_components(graph);
    labeling.largest_size() as f64 / graph.site_count() as f64
}

/// The local cluster `C_l(x)`: sites reachable from `x` by paths staying in
/// the window of side `ell` centered at `x`. `clipped` records whether the
/// window stuck out of the sample box.
#[derive(Debug, Clone)]
pub struct LocalCluster {
    sites: Vec<u32>,
    window: BoxSpec,
    clipped: bool,
}

impl LocalCluster {
    pub fn len(&self) -> u64 {
        self.sites.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Member site indices, ascending.
    pub fn sites(&self) -> &[u32] {
        &self.sites
    }

    pub fn contains(&self, site: u32) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    pub fn points(&self, graph: &GraphSample) -> Vec<Point> {
        self.sites.iter().map(|&s| graph.point_of(s)).collect()
    }

    pub fn window(&self) -> &BoxSpec {
        &self.window
    }

    pub fn clipped(&self) -> bool {
        self.clipped
    }
}

/// BFS from `x` using only edges with both endpoints inside the window.
pub fn local_cluster(graph: &GraphSample, x: &Point, ell: u64) -> Result<LocalCluster> {
    if ell % 2 == 0 {
        return Err(Error::invalid("local window side must be odd"));
    }
    let start = graph
        .site_of(x)
        .ok_or_else(|| Error::invalid(format!("site {x} outside sample box")))?;
    let window = BoxSpec::centered(x.clone(), ell)?;
    let clipped = window.sites().any(|p| !graph.box_spec().contains(&p));
    let mut visited = std::collections::HashSet::new();
    visited.insert(start);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(site) = queue.pop_front() {
        for &nb in graph.neighbors(site) {
            if visited.contains(&nb) {
                continue;
            }
            if window.contains(&graph.point_of(nb)) {
                visited.insert(nb);
                queue.push_back(nb);
            }
        }
    }
    let mut sites: Vec<u32> = visited.into_iter().collect();
    sites.sort_unstable();
    Ok(LocalCluster {
        sites,
        window,
        clipped,
    })
}

/// `(rho, ell)`-density: `|C_l(x)| >= rho * ell^d`. The threshold always uses
/// the full window volume, also for clipped windows.
pub fn is_dense(graph: &GraphSample, x: &Point, rho: f64, ell: u64) -> Result<bool> {
    let cluster = local_cluster(graph, x, ell)?;
    let volume = (ell as f64).powi(graph.model().dim() as i32);
    Ok(cluster.len() as f64 >= rho * volume)
}

/// Same decision as `is_dense`, but the BFS stops as soon as the threshold
/// is reached and window membership is tested without allocating. Assumes a
/// valid site index and odd `ell`.
pub(crate) fn is_dense_fast(graph: &GraphSample, site: u32, rho: f64, ell: u64) -> bool {
    let dim = graph.model().dim();
    let side = graph.box_spec().side();
    let min = graph.box_spec().min_corner();
    let center = graph.point_of(site);
    let half = (ell / 2) as i64;
    let volume = (ell as f64).powi(dim as i32);
    let threshold = (rho * volume).ceil().max(1.0) as u64;

    // per-axis window test straight off the site index
    let in_window = |s: u32| -> bool {
        let mut rem = s as u64;
        for axis in (0..dim).rev() {
            let coord = min.coords()[axis] + (rem % side) as i64;
            rem /= side;
            if (coord - center.coords()[axis]).abs() > half {
                return false;
            }
        }
        true
    };

    let mut count = 1u64;
    if count >= threshold {
        return true;
    }
    let mut visited = std::collections::HashSet::new();
    visited.insert(site);
    let mut queue = std::collections::VecDeque::from([site]);
    while let Some(s) = queue.pop_front() {
        for &nb in graph.neighbors(s) {
            if visited.contains(&nb) || !in_window(nb) {
                continue;
            }
            visited.insert(nb);
            count += 1;
            if count >= threshold {
                return true;
            }
            queue.push_back(nb);
        }
    }
    false
}

/// Dense points of a region.
#[derive(Debug, Clone, Serialize)]
pub struct DenseReport {
    pub region: BoxSpec,
    pub rho: f64,
    pub ell: u64,
    /// Sites passing the density test, lexicographic.
    pub dense_sites: Vec<Point>,
    pub count: u64,
    /// Sites whose window was clipped by the sample-box boundary; the
    /// density test still ran against the full window volume.
    pub clipped_sites: Vec<Point>,
}

/// Evaluate the density test on every site of `region`.
pub fn dense_set(graph: &GraphSample, region: &BoxSpec, rho: f64, ell: u64) -> Result<DenseReport> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in (0, 1), got {rho}")));
    }
    let mut dense_sites = Vec::new();
    let mut clipped_sites = Vec::new();
    for p in region.sites() {
        if !graph.box_spec().contains(&p) {
            return Err(Error::invalid(format!("region site {p} outside sample box")));
        }
        let cluster = local_cluster(graph, &p, ell)?;
        if cluster.clipped() {
            clipped_sites.push(p.clone());
        }
        let volume = (ell as f64).powi(graph.model().dim() as i32);
        if cluster.len() as f64 >= rho * volume {
            dense_sites.push(p);
        }
    }
    let count = dense_sites.len() as u64;
    Ok(DenseReport {
        region: region.clone(),
        rho,
        ell,
        dense_sites,
        count,
        clipped_sites,
    })
}

/// Output of one block-renormalization pass: the box is partitioned into
/// `K`-blocks, a block is occupied when its largest internal component holds
/// at least `delta * K^d` sites, and occupied blocks are joined when a
/// sampled bond connects their chosen components.
#[derive(Debug, Clone, Serialize)]
pub struct BlockGraph {
    k: u64,
    delta: f64,
    blocks_per_axis: u64,
    dim: usize,
    occupied: Vec<bool>,
    /// Size of each block's chosen (largest, lex tie-break) component.
    chosen_sizes: Vec<u64>,
    /// Block edges as index pairs `(a, b)`, `a < b`, sorted.
    edges: Vec<(u32, u32)>,
}

impl BlockGraph {
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn blocks_per_axis(&self) -> u64 {
        self.blocks_per_axis
    }

    pub fn block_count(&self) -> u64 {
        (self.blocks_per_axis).pow(self.dim as u32)
    }

    pub fn occupied(&self, block: u32) -> bool {
        self.occupied[block as usize]
    }

    pub fn occupied_count(&self) -> u64 {
        self.occupied.iter().filter(|o| **o).count() as u64
    }

    pub fn chosen_size(&self, block: u32) -> u64 {
        self.chosen_sizes[block as usize]
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).is_ok()
    }

    /// Block coordinates of a block index.
    pub fn block_coords(&self, block: u32) -> Vec<i64> {
        let mut rem = block as u64;
        let mut coords = vec![0i64; self.dim];
        for axis in (0..self.dim).rev() {
            coords[axis] = (rem % self.blocks_per_axis) as i64;
            rem /= self.blocks_per_axis;
        }
        coords
    }
}

/// Partition the sample box into `K`-blocks and coarse-grain.
///
/// The chosen component of every block is fixed before any inter-block bond
/// is examined; bonds touching non-chosen components never produce block
/// edges.
pub fn block_renormalize(graph: &GraphSample, k: u64, delta: f64) -> Result<BlockGraph> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::invalid("block side K must be odd and positive"));
    }
    let side = graph.box_spec().side();
    if side % k != 0 {
        return Err(Error::invalid(format!(
            "box side {side} is not divisible by block side {k}"
        )));
    }
    let dim = graph.model().dim();
    let blocks_per_axis = side / k;
    let block_count = (blocks_per_axis as u128).pow(dim as u32);
    if block_count > u32::MAX as u128 {
        return Err(Error::invalid("too many blocks"));
    }
    let block_count = block_count as usize;
    let n = graph.site_count() as usize;
    let min = graph.box_spec().min_corner();

    let block_of = |site: u32| -> u32 {
        let p = graph.point_of(site);
        let mut idx = 0u64;
        for (c, lo) in p.coords().iter().zip(min.coords()) {
            let block_axis = ((*c - *lo) as u64) / k;
            idx = idx * blocks_per_axis + block_axis;
        }
        idx as u32
    };

    // label components *within* each block: union only intra-block edges
    let mut uf = UnionFind::new(n);
    let mut site_block = vec![0u32; n];
    for site in 0..n as u32 {
        site_block[site as usize] = block_of(site);
    }
    for (a, b) in graph.edges() {
        if site_block[a as usize] == site_block[b as usize] {
            uf.union(a, b);
        }
    }

    // per block: root of the chosen component (max size, lex tie-break via
    // the scan order over sites)
    let mut best_root = vec![u32::MAX; block_count];
    let mut best_size = vec![0u64; block_count];
    let mut root_size: HashMap<u32, u64> = HashMap::new();
    for site in 0..n as u32 {
        let root = uf.find(site);
        *root_size.entry(root).or_insert(0) += 1;
    }
    for site in 0..n as u32 {
        let blk = site_block[site as usize] as usize;
        let root = uf.find(site);
        let size = root_size[&root];
        // strict >: the first maximal component in site order wins, and sites
        // are scanned lexicographically
        if size > best_size[blk] {
            best_size[blk] = size;
            best_root[blk] = root;
        }
    }

    let volume = (k as f64).powi(dim as i32);
    let occupied: Vec<bool> = best_size
        .iter()
        .map(|&s| s as f64 >= delta * volume)
        .collect();

    let mut in_chosen = vec![false; n];
    for site in 0..n as u32 {
        let blk = site_block[site as usize] as usize;
        in_chosen[site as usize] = uf.find(site) == best_root[blk];
    }

    let mut edges = Vec::new();
    for (a, b) in graph.edges() {
        let (ba, bb) = (site_block[a as usize], site_block[b as usize]);
        if ba == bb {
            continue;
        }
        if !occupied[ba as usize] || !occupied[bb as usize] {
            continue;
        }
        if in_chosen[a as usize] && in_chosen[b as usize] {
            edges.push((ba.min(bb), ba.max(bb)));
        }
    }
    edges.sort_unstable();
    edges.dedup();

    Ok(BlockGraph {
        k,
        delta,
        blocks_per_axis,
        dim,
        occupied,
        chosen_sizes: best_size,
        edges,
    })
}

/// One row of the block-connection table: all block pairs at one distance.
#[derive(Debug, Clone, Serialize)]
pub struct BlockDistanceRow {
    pub distance: f64,
    /// Pairs examined: (trial, unordered block pair) combinations.
    pub pairs: u64,
    pub connected: u64,
    pub frequency: f64,
    /// `1 - exp(-beta_fit * distance^{-s})` at the fitted amplitude.
    pub fitted_curve: f64,
    pub residual: f64,
}

/// Frequency of direct block connections per block distance, with the decay
/// curve `1 - e^{-beta |x-y|^{-s}}` fitted over the rows (reported, not
/// assumed).
#[derive(Debug, Clone, Serialize)]
pub struct BlockConnectionStats {
    pub rows: Vec<BlockDistanceRow>,
    pub beta_fit: f64,
}

pub fn block_connection_stats(
    graphs: &[BlockGraph],
    norm: NormKind,
    s: f64,
) -> Result<BlockConnectionStats> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::invalid("block connection stats need at least one trial"))?;
    for g in graphs {
        if g.k != first.k || g.blocks_per_axis != first.blocks_per_axis || g.dim != first.dim {
            return Err(Error::invalid("all block graphs must share K and box geometry"));
        }
    }
    let count = first.block_count() as u32;
    // distance keyed by bits for exact grouping
    let mut table: HashMap<u64, (u64, u64)> = HashMap::new();
    for g in graphs {
        for a in 0..count {
            let pa = Point::new(g.block_coords(a));
            for b in (a + 1)..count {
                let pb = Point::new(g.block_coords(b));
                let dist = norm.distance(&pa, &pb)?;
                let entry = table.entry(dist.to_bits()).or_insert((0, 0));
                entry.0 += 1;
                if g.has_edge(a, b) {
                    entry.1 += 1;
                }
            }
        }
    }
    let mut keyed: Vec<(f64, u64, u64)> = table
        .into_iter()
        .map(|(bits, (pairs, hits))| (f64::from_bits(bits), pairs, hits))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));

    // least squares for beta in -log(1 - freq) = beta * r^{-s}, through the
    // origin, weighted by pair counts; saturated rows (freq == 1) are skipped
    let mut num = 0.0;
    let mut den = 0.0;
    for &(dist, pairs, hits) in &keyed {
        let freq = hits as f64 / pairs as f64;
        if freq >= 1.0 {
            continue;
        }
        let x = dist.powf(-s);
        let y = -(1.0 - freq).ln();
        num += pairs as f64 * x * y;
        den += pairs as f64 * x * x;
    }
    let beta_fit = if den > 0.0 { num / den } else { 0.0 };

    let rows = keyed
        .into_iter()
        .map(|(distance, pairs, hits)| {
            let frequency = hits as f64 / pairs as f64;
            let fitted_curve = 1.0 - (-beta_fit * distance.powf(-s)).exp();
            BlockDistanceRow {
                distance,
                pairs,
                connected: hits,
                frequency,
                fitted_curve,
                residual: frequency - fitted_curve,
            }
        })
        .collect();

    Ok(BlockConnectionStats { rows, beta_fit })
}
