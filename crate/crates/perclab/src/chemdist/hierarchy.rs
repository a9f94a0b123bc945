//! Binary hierarchies of sites: extraction from paths by longest-bond
//! splitting, validation, gap statistics, greedy dense-annulus construction
//! and gap bridging.
//!
//! A hierarchy of depth `n` assigns a site `z_sigma` to every binary string
//! `sigma` of length 1..=n. Level `k+1` refines level `k`: the pair
//! `(z_{s0}, z_{s1})` is a "gap", and the pair `(z_{s01}, z_{s10})` is the
//! bond spanning it. Strings map to indices MSB-first, so the sites of one
//! level read left to right along the underlying path.

use super::{chemical_distance, shortest_path, PathRecord};
use crate::bondspace::GraphSample;
use crate::error::{Error, Result};
use crate::lattice::{AnnulusSpec, BoxSpec, NormKind, Point};
use serde::Serialize;
use std::collections::{HashSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hierarchy {
    /// `levels[k - 1]` holds the `2^k` sites of level `k`.
    levels: Vec<Vec<Point>>,
}

impl Hierarchy {
    /// Build from explicit levels; level `k` (1-based) must hold `2^k` sites.
    pub fn from_levels(levels: Vec<Vec<Point>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("hierarchy needs at least depth 1"));
        }
        for (i, level) in levels.iter().enumerate() {
            let want = 1usize << (i + 1);
            if level.len() != want {
                return Err(Error::invalid(format!(
                    "level {} must have {} sites, got {}",
                    i + 1,
                    want,
                    level.len()
                )));
            }
        }
        Ok(Hierarchy { levels })
    }

    pub fn depth(&self) -> u32 {
        self.levels.len() as u32
    }

    /// Site `z_sigma` for `sigma` of length `level` at MSB-first index `idx`.
    pub fn site(&self, level: u32, idx: usize) -> &Point {
        &self.levels[level as usize - 1][idx]
    }

    pub fn x(&self) -> &Point {
        self.site(1, 0)
    }

    pub fn y(&self) -> &Point {
        self.site(1, 1)
    }

    /// Gap endpoints `(z_{s0}, z_{s1})` for `sigma` of length `k <= depth-1`.
    pub fn gap(&self, k: u32, idx: usize) -> (&Point, &Point) {
        (self.site(k + 1, 2 * idx), self.site(k + 1, 2 * idx + 1))
    }

    /// Gap vector `t_sigma = z_{s0} - z_{s1}`.
    pub fn gap_vector(&self, k: u32, idx: usize) -> Result<Point> {
        let (a, b) = self.gap(k, idx);
        a.displacement_to(b)
    }

    /// Spanning pair `(z_{s01}, z_{s10})` for `sigma` of length
    /// `k <= depth-2`.
    pub fn spanning_pair(&self, k: u32, idx: usize) -> (&Point, &Point) {
        (self.site(k + 2, 4 * idx + 1), self.site(k + 2, 4 * idx + 2))
    }

    /// All distinct-endpoint spanning bonds, top level first.
    pub fn bonds(&self) -> Vec<(Point, Point)> {
        let mut out = Vec::new();
        for k in 0..self.depth().saturating_sub(1) {
            for idx in 0..(1usize << k) {
                let (a, b) = self.spanning_pair(k, idx);
                if a != b {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// Indented binary-tree rendering for debugging.
    pub fn tree_text(&self) -> String {
        fn visit(h: &Hierarchy, level: u32, idx: usize, sigma: String, out: &mut String) {
            out.push_str(&"  ".repeat(level as usize - 1));
            out.push_str(&format!("{} -> ({})\n", sigma, h.site(level, idx)));
            if level < h.depth() {
                visit(h, level + 1, 2 * idx, format!("{sigma}0"), out);
                visit(h, level + 1, 2 * idx + 1, format!("{sigma}1"), out);
            }
        }
        let mut out = String::new();
        visit(self, 1, 0, "0".into(), &mut out);
        visit(self, 1, 1, "1".into(), &mut out);
        out
    }
}

/// Where one segment split: the selected bond joins path positions
/// `bond_at - 1` and `bond_at` inside the segment `[seg_start, seg_end]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SplitRecord {
    pub seg_start: usize,
    pub seg_end: usize,
    pub bond_at: usize,
}

/// Result of extracting a hierarchy from a path.
#[derive(Debug, Clone, Serialize)]
pub struct Extraction {
    pub hierarchy: Hierarchy,
    pub requested_depth: u32,
    /// Depth actually built; smaller than requested when every bottom
    /// segment collapsed first.
    pub achieved_depth: u32,
    pub truncated: bool,
    path: PathRecord,
    splits: Vec<SplitRecord>,
    /// Path index range spanning each bottom-level gap.
    bottom_ranges: Vec<(usize, usize)>,
}

impl Extraction {
    pub fn path(&self) -> &PathRecord {
        &self.path
    }

    pub fn splits(&self) -> &[SplitRecord] {
        &self.splits
    }

    /// Hop count of the sub-path spanning each bottom gap.
    pub fn bottom_segment_hops(&self) -> Vec<u64> {
        self.bottom_ranges
            .iter()
            .map(|&(a, b)| (b - a) as u64)
            .collect()
    }

    /// The splitting mechanism guarantees that each selected bond is at
    /// least as long as the segment span divided by the segment hop count
    /// (pigeonhole with the triangle inequality). Verified exactly in
    /// integer arithmetic.
    pub fn pigeonhole_holds(&self, norm: NormKind) -> Result<bool> {
        let sites = self.path.sites();
        for s in &self.splits {
            let bond = norm.exact_distance(&sites[s.bond_at - 1], &sites[s.bond_at])?;
            let span = norm.exact_distance(&sites[s.seg_start], &sites[s.seg_end])?;
            let hops = (s.seg_end - s.seg_start) as u128;
            if !bond.scaled_ge(hops, &span) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Extract a hierarchy from a path by recursive longest-bond splitting.
///
/// At every level each active segment contributes its maximal-length bond
/// (ties break toward the earliest bond along the path); the bond endpoints
/// become the new interior sites and the flanks recurse. Segments without
/// bonds collapse: all their descendants repeat the segment site. When every
/// bottom segment has collapsed before the requested depth, the achieved
/// depth is returned with `truncated` set.
pub fn extract_hierarchy(path: &PathRecord, depth: u32, norm: NormKind) -> Result<Extraction> {
    let sites = path.sites();
    if sites.len() < 2 {
        return Err(Error::invalid("hierarchy extraction needs distinct endpoints"));
    }
    if sites.first() == sites.last() {
        return Err(Error::invalid("path endpoints must be distinct"));
    }
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }

    let mut levels = vec![vec![sites[0].clone(), sites[sites.len() - 1].clone()]];
    let mut ranges: Vec<(usize, usize)> = vec![(0, sites.len() - 1)];
    let mut splits = Vec::new();

    while (levels.len() as u32) < depth {
        if ranges.iter().all(|&(a, b)| a == b) {
            break;
        }
        let mut next_level = Vec::with_capacity(ranges.len() * 4);
        let mut next_ranges = Vec::with_capacity(ranges.len() * 2);
        for &(a, b) in &ranges {
            if a == b {
                let z = sites[a].clone();
                next_level.extend([z.clone(), z.clone(), z.clone(), z]);
                next_ranges.extend([(a, a), (b, b)]);
                continue;
            }
            // longest bond of the segment, earliest on ties; exact lengths
            let mut best_at = a + 1;
            let mut best_len = norm.exact_distance(&sites[a], &sites[a + 1])?;
            for j in (a + 2)..=b {
                let len = norm.exact_distance(&sites[j - 1], &sites[j])?;
                if !best_len.scaled_ge(1, &len) {
                    best_len = len;
                    best_at = j;
                }
            }
            splits.push(SplitRecord {
                seg_start: a,
                seg_end: b,
                bond_at: best_at,
            });
            next_level.extend([
                sites[a].clone(),
                sites[best_at - 1].clone(),
                sites[best_at].clone(),
                sites[b].clone(),
            ]);
            next_ranges.extend([(a, best_at - 1), (best_at, b)]);
        }
        levels.push(next_level);
        ranges = next_ranges;
    }

    let achieved = levels.len() as u32;
    Ok(Extraction {
        hierarchy: Hierarchy { levels },
        requested_depth: depth,
        achieved_depth: achieved,
        truncated: achieved < depth,
        path: path.clone(),
        splits,
        bottom_ranges: ranges,
    })
}

/// A violated clause of the hierarchy definition. `level`/`index` name the
/// string `sigma` owning the gap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum HierarchyViolation {
    /// The connected sites themselves coincide.
    EndpointsEqual,
    /// Clause 2: `z_{s00} != z_{s0}` or `z_{s11} != z_{s1}`.
    ChildMismatch { level: u32, index: usize },
    /// Clause 3: a distinct spanning pair is not a sampled bond.
    MissingBond { level: u32, index: usize },
    /// Clause 4: the same bond spans two different gaps.
    RepeatedBond { level: u32, index: usize },
    /// A spanning-bond endpoint lies outside the sample box.
    SiteOutsideBox { level: u32, index: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct HierarchyValidation {
    pub violations: Vec<HierarchyViolation>,
}

impl HierarchyValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check all four defining clauses against a sample.
pub fn validate_hierarchy(h: &Hierarchy, graph: &GraphSample) -> HierarchyValidation {
    let mut violations = Vec::new();
    if h.x() == h.y() {
        violations.push(HierarchyViolation::EndpointsEqual);
    }
    let mut seen_bonds: HashSet<(Point, Point)> = HashSet::new();
    for k in 0..h.depth().saturating_sub(1) {
        for idx in 0..(1usize << k) {
            let (g0, g1) = h.gap(k, idx);
            let (c00, c11) = (h.site(k + 2, 4 * idx), h.site(k + 2, 4 * idx + 3));
            if c00 != g0 || c11 != g1 {
                violations.push(HierarchyViolation::ChildMismatch { level: k, index: idx });
            }
            let (a, b) = h.spanning_pair(k, idx);
            if a == b {
                continue;
            }
            let key = if a <= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            if !seen_bonds.insert(key) {
                violations.push(HierarchyViolation::RepeatedBond { level: k, index: idx });
            }
            match (graph.site_of(a), graph.site_of(b)) {
                (Some(sa), Some(sb)) => {
                    if !graph.has_edge(sa, sb) {
                        violations.push(HierarchyViolation::MissingBond { level: k, index: idx });
                    }
                }
                _ => violations.push(HierarchyViolation::SiteOutsideBox { level: k, index: idx }),
            }
        }
    }
    HierarchyValidation { violations }
}

/// `prod over sigma of length k of (|t_sigma| v 1)`.
pub fn gap_product(h: &Hierarchy, k: u32, norm: NormKind) -> Result<f64> {
    Ok(gap_product_ln(h, k, norm)?.exp())
}

/// Natural log of the gap product; preferred at depth, where the product
/// overflows f64.
pub fn gap_product_ln(h: &Hierarchy, k: u32, norm: NormKind) -> Result<f64> {
    if k == 0 || k >= h.depth() {
        return Err(Error::invalid(format!(
            "gap level k={k} out of range 1..={}",
            h.depth().saturating_sub(1)
        )));
    }
    let mut ln_sum = 0.0;
    for idx in 0..(1usize << k) {
        let t = h.gap_vector(k, idx)?;
        let len = norm.length(&t)?;
        ln_sum += len.max(1.0).ln();
    }
    Ok(ln_sum)
}

/// The averaged gap-size condition: gap product at level `k` at least
/// `N^{(2 gamma)^k}`.
pub fn gap_product_satisfied(
    h: &Hierarchy,
    k: u32,
    norm: NormKind,
    n_value: f64,
    gamma: f64,
) -> Result<bool> {
    if n_value <= 1.0 {
        return Err(Error::invalid("scale N must exceed 1"));
    }
    let ln_sum = gap_product_ln(h, k, norm)?;
    Ok(ln_sum >= (2.0 * gamma).powi(k as i32) * n_value.ln())
}

/// Regularity of each gap: the spanning bond is no shorter than the gap
/// span shrunk by `(log N)^{-exponent}`. Collapsed gaps pass vacuously.
/// Returns flags indexed `[k][sigma]` for `k = 0..=depth-2`.
pub fn check_regularity(
    h: &Hierarchy,
    norm: NormKind,
    n_value: f64,
    exponent: f64,
) -> Result<Vec<Vec<bool>>> {
    if n_value <= std::f64::consts::E {
        return Err(Error::invalid("regularity scale N must exceed e"));
    }
    let shrink = n_value.ln().powf(-exponent);
    let mut flags = Vec::new();
    for k in 0..h.depth().saturating_sub(1) {
        let mut row = Vec::with_capacity(1 << k);
        for idx in 0..(1usize << k) {
            let (g0, g1) = h.gap(k, idx);
            let span = norm.distance(g0, g1)?;
            let (a, b) = h.spanning_pair(k, idx);
            let bond = norm.distance(a, b)?;
            row.push(bond >= span * shrink);
        }
        flags.push(row);
    }
    Ok(flags)
}

/// Outcome of the greedy construction.
#[derive(Debug, Clone, Serialize)]
pub enum GreedyOutcome {
    Built(Hierarchy),
    /// No bond joined the dense annulus sets of some gap at this level.
    Failed { level: u32 },
}

/// Greedy top-down construction: at stage `k` (scale `N_k = |x-y|^{gamma^k}`)
/// every open gap `(u, v)` is spanned by the first sampled bond, in
/// lexicographic scan order, with one endpoint a `(rho, ell)`-dense site of
/// the annulus `B_{N_{k+1}}(u)` and the other a dense site of
/// `B_{N_{k+1}}(v)`. Bonds already used by the hierarchy are skipped. The
/// recursion stops once `N_k <= ell`.
pub fn greedy_build(
    graph: &GraphSample,
    x: &Point,
    y: &Point,
    gamma: f64,
    rho: f64,
    ell: u64,
) -> Result<GreedyOutcome> {
    if x == y {
        return Err(Error::invalid("greedy construction needs distinct endpoints"));
    }
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::invalid("gamma must lie in (0, 1)"));
    }
    if ell % 2 == 0 {
        return Err(Error::invalid("ell must be odd"));
    }
    let norm = graph.model().norm();
    let n_value = norm.distance(x, y)?;
    let bx = graph.box_spec().clone();
    if !bx.contains(x) || !bx.contains(y) {
        return Err(Error::invalid("endpoints must lie in the sample box"));
    }

    // density is shared across gaps and stages; memoize per site, with the
    // early-exit BFS so large windows stay cheap
    let mut dense_memo: std::collections::HashMap<u32, bool> = std::collections::HashMap::new();
    let mut dense = |site: u32| -> bool {
        *dense_memo
            .entry(site)
            .or_insert_with(|| crate::clusters::is_dense_fast(graph, site, rho, ell))
    };

    let mut levels = vec![vec![x.clone(), y.clone()]];
    let mut used_bonds: HashSet<(u32, u32)> = HashSet::new();
    for stage in 0u32..64 {
        let scale_here = n_value.powf(gamma.powi(stage as i32));
        if scale_here <= ell as f64 {
            break;
        }
        let scale_next = n_value.powf(gamma.powi(stage as i32 + 1));
        let bottom = levels.last().unwrap().clone();
        let mut next = Vec::with_capacity(bottom.len() * 2);
        for gap in bottom.chunks(2) {
            let (u, v) = (&gap[0], &gap[1]);
            if u == v {
                next.extend([u.clone(), u.clone(), v.clone(), v.clone()]);
                continue;
            }
            // first bond in lexicographic (a, b) scan order joining dense
            // sites of the two annuli; the density of a candidate is only
            // evaluated when the scan reaches it
            let ann_u = AnnulusSpec::around(u.clone(), scale_next)?;
            let ann_v = AnnulusSpec::around(v.clone(), scale_next)?;
            let mut found = None;
            'scan: for p in ann_u.sites() {
                if !bx.contains(&p) {
                    continue;
                }
                let a = graph.site_of(&p).unwrap();
                if !dense(a) {
                    continue;
                }
                for &nb in graph.neighbors(a) {
                    if !ann_v.contains(&graph.point_of(nb)) {
                        continue;
                    }
                    let key = (a.min(nb), a.max(nb));
                    if used_bonds.contains(&key) || !dense(nb) {
                        continue;
                    }
                    found = Some((a, nb));
                    break 'scan;
                }
            }
            match found {
                Some((a, b)) => {
                    used_bonds.insert((a.min(b), a.max(b)));
                    next.extend([
                        u.clone(),
                        graph.point_of(a),
                        graph.point_of(b),
                        v.clone(),
                    ]);
                }
                None => return Ok(GreedyOutcome::Failed { level: stage + 1 }),
            }
        }
        levels.push(next);
    }
    Ok(GreedyOutcome::Built(Hierarchy { levels }))
}

#[derive(Debug, Clone, Serialize)]
pub struct BridgeReport {
    /// Hop count of the bridging path for each bottom gap, in order.
    pub per_gap: Vec<u64>,
    pub total_extra_steps: u64,
    /// Extra steps plus the distinct hierarchy bonds: length of the explicit
    /// x-y walk assembled from the hierarchy.
    pub end_to_end_length: u64,
}

#[derive(Debug, Clone, Serialize)]
pub enum BridgeOutcome {
    Bridged(BridgeReport),
    /// The BFS inside the two local windows found no connection for this
    /// bottom gap (index at the bottom level).
    Unbridgeable { gap_index: usize },
}

/// Span every bottom-level gap by a path inside the union of the two local
/// windows of side `ell` around the gap endpoints.
pub fn bridge_gaps(graph: &GraphSample, h: &Hierarchy, ell: u64) -> Result<BridgeOutcome> {
    if ell % 2 == 0 {
        return Err(Error::invalid("ell must be odd"));
    }
    let n = h.depth();
    let bottom = n;
    let gaps = 1usize << (n - 1);
    let mut per_gap = Vec::with_capacity(gaps);
    for i in 0..gaps {
        let (u, v) = (h.site(bottom, 2 * i), h.site(bottom, 2 * i + 1));
        if u == v {
            per_gap.push(0);
            continue;
        }
        match window_bfs(graph, u, v, ell)? {
            Some(steps) => per_gap.push(steps),
            None => return Ok(BridgeOutcome::Unbridgeable { gap_index: i }),
        }
    }
    let total: u64 = per_gap.iter().sum();
    // walk = bridges plus one step per distinct consecutive bond pair
    let mut bonds = 0u64;
    for i in 0..gaps.saturating_sub(1) {
        if h.site(bottom, 2 * i + 1) != h.site(bottom, 2 * i + 2) {
            bonds += 1;
        }
    }
    Ok(BridgeOutcome::Bridged(BridgeReport {
        per_gap,
        total_extra_steps: total,
        end_to_end_length: total + bonds,
    }))
}

/// BFS restricted to the union of the windows around `u` and `v`.
fn window_bfs(graph: &GraphSample, u: &Point, v: &Point, ell: u64) -> Result<Option<u64>> {
    let wu = BoxSpec::centered(u.clone(), ell)?;
    let wv = BoxSpec::centered(v.clone(), ell)?;
    let su = graph
        .site_of(u)
        .ok_or_else(|| Error::invalid(format!("site {u} outside sample box")))?;
    let sv = graph
        .site_of(v)
        .ok_or_else(|| Error::invalid(format!("site {v} outside sample box")))?;
    let allowed = |p: &Point| wu.contains(p) || wv.contains(p);
    let mut dist = std::collections::HashMap::new();
    dist.insert(su, 0u64);
    let mut queue = VecDeque::from([su]);
    while let Some(site) = queue.pop_front() {
        let here = dist[&site];
        if site == sv {
            return Ok(Some(here));
        }
        for &nb in graph.neighbors(site) {
            if !dist.contains_key(&nb) && allowed(&graph.point_of(nb)) {
                dist.insert(nb, here + 1);
                queue.push_back(nb);
            }
        }
    }
    Ok(None)
}

/// Everything measured on the hierarchy extracted from one shortest path.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchyAudit {
    pub x: Point,
    pub y: Point,
    pub distance: f64,
    pub requested_depth: u32,
    pub achieved_depth: u32,
    pub path_length: u64,
    /// Distinct bonds selected by the extraction.
    pub bond_count: u64,
    /// Natural log of the gap product per level `k = 1..=depth-1`.
    pub gap_products_ln: Vec<f64>,
    /// Whether each level clears `N^{(2 gamma)^k}`.
    pub gap_product_ok: Vec<bool>,
    /// Regular gaps (spanning bond at least the span shrunk by
    /// `(log N)^{-Delta}`) out of all non-bottom gaps.
    pub regular_gaps: u64,
    pub total_gaps: u64,
    pub pigeonhole_ok: bool,
    /// Hop counts of the bottom sub-paths, one per bottom gap.
    pub spanning_steps: Vec<u64>,
    pub spanning_total: u64,
    pub extraction: Extraction,
}

/// Extract the hierarchy from the canonical shortest path between `x` and
/// `y` and audit gap products, regularity and spanning-step counts.
///
/// The events quantifying over *every* hierarchy cannot be checked
/// exhaustively; the audit reports the canonical longest-bond extraction.
pub fn audit_hierarchy(
    graph: &GraphSample,
    x: &Point,
    y: &Point,
    gamma: f64,
    depth: u32,
) -> Result<HierarchyAudit> {
    let model = graph.model();
    let s = model
        .profile()
        .s_exponent()
        .ok_or_else(|| Error::invalid("hierarchy audit needs a power-law profile"))?;
    let delta = crate::theory::delta(s, model.dim() as u32)?;
    let norm = model.norm();
    let n_value = norm.distance(x, y)?;
    if n_value <= std::f64::consts::E {
        return Err(Error::invalid("audit requires |x - y| > e"));
    }
    let path = shortest_path(graph, x, y)?
        .ok_or_else(|| Error::invalid("audit requires a connected pair"))?;
    debug_assert_eq!(Some(path.len()), chemical_distance(graph, x, y)?);

    let extraction = extract_hierarchy(&path, depth, norm)?;
    let h = &extraction.hierarchy;
    let n = extraction.achieved_depth;

    let mut gap_products_ln = Vec::new();
    let mut gap_product_ok = Vec::new();
    for k in 1..n {
        gap_products_ln.push(gap_product_ln(h, k, norm)?);
        gap_product_ok.push(gap_product_satisfied(h, k, norm, n_value, gamma)?);
    }

    let flags = check_regularity(h, norm, n_value, delta)?;
    let total_gaps: u64 = flags.iter().map(|row| row.len() as u64).sum();
    let regular_gaps: u64 = flags
        .iter()
        .map(|row| row.iter().filter(|f| **f).count() as u64)
        .sum();

    let pigeonhole_ok = extraction.pigeonhole_holds(norm)?;
    let spanning_steps = extraction.bottom_segment_hops();
    let spanning_total = spanning_steps.iter().sum();

    Ok(HierarchyAudit {
        x: x.clone(),
        y: y.clone(),
        distance: n_value,
        requested_depth: depth,
        achieved_depth: n,
        path_length: path.len(),
        bond_count: extraction.splits.len() as u64,
        gap_products_ln,
        gap_product_ok,
        regular_gaps,
        total_gaps,
        pigeonhole_ok,
        spanning_steps,
        spanning_total,
        extraction,
    })
}
