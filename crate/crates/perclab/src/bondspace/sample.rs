//! Samplers and the immutable [`GraphSample`].
//!
//! The skip sampler works per displacement class: all in-box translates of a
//! fixed displacement vector share one probability, so edge positions along
//! the linearized translate index follow a Bernoulli process that we jump
//! through with geometric skips. Expected work per class is one geometric
//! draw plus one per realized edge.

use super::{class_seed, BondModel};
use crate::error::{Error, Result};
use crate::lattice::{BoxSpec, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use std::io::Write;

/// Rough per-site and per-edge memory cost used for the admission check.
const BYTES_PER_SITE: u128 = 48;
/// Refuse samples whose bookkeeping would exceed this budget.
const MEMORY_BUDGET_BYTES: u64 = 8 << 30;

/// One sampled bond configuration on a finite box.
///
/// Adjacency is stored in compressed sparse rows over the lexicographic site
/// index; neighbor lists are sorted, so the layout is identical however the
/// edges were produced.
#[derive(Debug, Clone)]
pub struct GraphSample {
    bx: BoxSpec,
    model: BondModel,
    seed: u64,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    edge_count: u64,
}

impl GraphSample {
    pub fn box_spec(&self) -> &BoxSpec {
        &self.bx
    }

    pub fn model(&self) -> &BondModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }

    pub fn site_count(&self) -> u64 {
        self.offsets.len() as u64 - 1
    }

    /// Sorted neighbor list of a site index.
    pub fn neighbors(&self, site: u32) -> &[u32] {
        &self.neighbors[self.offsets[site as usize]..self.offsets[site as usize + 1]]
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn degree(&self, site: u32) -> usize {
        self.offsets[site as usize + 1] - self.offsets[site as usize]
    }

    /// Undirected edges as `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.site_count() as u32).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .copied()
                .filter(move |&b| b > a)
                .map(move |b| (a, b))
        })
    }

    pub fn point_of(&self, site: u32) -> Point {
        self.bx.site_at(site as u64)
    }

    pub fn site_of(&self, p: &Point) -> Option<u32> {
        self.bx.index_of(p).map(|i| i as u32)
    }

    /// Build a sample from an explicit edge list (test and import path).
    pub fn from_edges(
        bx: BoxSpec,
        model: BondModel,
        seed: u64,
        edges: &[(Point, Point)],
    ) -> Result<GraphSample> {
        let n = check_site_count(&bx)?;
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (x, y) in edges {
            let a = bx
                .index_of(x)
                .ok_or_else(|| Error::invalid(format!("edge endpoint {x} outside box")))?;
            let b = bx
                .index_of(y)
                .ok_or_else(|| Error::invalid(format!("edge endpoint {y} outside box")))?;
            if a == b {
                return Err(Error::invalid("self-loop in edge list"));
            }
            idx_edges.push((a.min(b) as u32, a.max(b) as u32));
        }
        idx_edges.sort_unstable();
        idx_edges.dedup();
        Ok(assemble(bx, model, seed, n, idx_edges))
    }

    /// Edge-list text export: a header with the model parameters and seed,
    /// then one line per edge, `x-coords<TAB>y-coords`, in index order.
    /// Byte-identical across runs with equal seeds.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = &self.model;
        let profile = match m.profile() {
            super::ConnectionProfile::ShiftedPower { beta, s } => {
                format!("profile=shifted-power beta={beta} s={s}")
            }
            super::ConnectionProfile::PurePower { beta, s } => {
                format!("profile=pure-power beta={beta} s={s}")
            }
            super::ConnectionProfile::CustomTable { entries } => {
                format!("profile=custom-table entries={}", entries.len())
            }
        };
        writeln!(
            w,
            "# perclab edge-list v1 dim={} {} nn_prob={} norm={} box={:?} anchor={} side={} seed={} edges={}",
            m.dim(),
            profile,
            m.nn_prob(),
            m.norm().as_str(),
            self.bx.mode(),
            self.bx.anchor(),
            self.bx.side(),
            self.seed,
            self.edge_count
        )?;
        for (a, b) in self.edges() {
            writeln!(w, "{}\t{}", self.point_of(a), self.point_of(b))?;
        }
        Ok(())
    }
}

fn check_site_count(bx: &BoxSpec) -> Result<u64> {
    let n = bx.site_count();
    if n > u32::MAX as u128 {
        return Err(Error::Resource {
            required_bytes: n * BYTES_PER_SITE,
            budget_bytes: MEMORY_BUDGET_BYTES,
        });
    }
    let required = n * BYTES_PER_SITE;
    if required > MEMORY_BUDGET_BYTES as u128 {
        return Err(Error::Resource {
            required_bytes: required,
            budget_bytes: MEMORY_BUDGET_BYTES,
        });
    }
    Ok(n as u64)
}

/// Sorted CSR assembly from a deduplicated edge list.
fn assemble(
    bx: BoxSpec,
    model: BondModel,
    seed: u64,
    n: u64,
    edges: Vec<(u32, u32)>,
) -> GraphSample {
    let n = n as usize;
    let mut offsets = vec![0usize; n + 1];
    for &(a, b) in &edges {
        offsets[a as usize + 1] += 1;
        offsets[b as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut neighbors = vec![0u32; edges.len() * 2];
    for &(a, b) in &edges {
        neighbors[cursor[a as usize]] = b;
        cursor[a as usize] += 1;
        neighbors[cursor[b as usize]] = a;
        cursor[b as usize] += 1;
    }
    for i in 0..n {
        neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
    }
    let edge_count = edges.len() as u64;
    GraphSample {
        bx,
        model,
        seed,
        offsets,
        neighbors,
        edge_count,
    }
}

/// Per-class geometry scratch: extents and offsets of the translate set of
/// one displacement vector, written in place to keep the class loop
/// allocation free.
struct ClassScratch {
    /// Extent of the position sub-box per axis (`side - |v_i|`).
    extents: Vec<u64>,
    /// Per-axis offset of the sub-box inside the sample box.
    rel_lo: Vec<u64>,
    /// Number of in-box positions of the displacement.
    count: u64,
    /// Constant site-index offset from x to y = x + v.
    v_offset: i64,
}

impl ClassScratch {
    fn new(dim: usize) -> Self {
        ClassScratch {
            extents: vec![0; dim],
            rel_lo: vec![0; dim],
            count: 0,
            v_offset: 0,
        }
    }

    fn load(&mut self, side: u64, strides: &[u64], v: &[i64]) {
        self.count = 1;
        self.v_offset = 0;
        for axis in 0..v.len() {
            let abs = v[axis].unsigned_abs();
            let ext = side - abs;
            self.count = self.count.saturating_mul(ext);
            self.extents[axis] = ext;
            self.rel_lo[axis] = if v[axis] < 0 { abs } else { 0 };
            self.v_offset += v[axis] * strides[axis] as i64;
        }
    }

    /// Map a position index to the `(x, y)` site-index pair.
    fn edge_at(&self, pos: u64, strides: &[u64]) -> (u32, u32) {
        let mut rem = pos;
        let mut x_idx = 0u64;
        for axis in (0..self.extents.len()).rev() {
            let digit = rem % self.extents[axis];
            rem /= self.extents[axis];
            x_idx += (self.rel_lo[axis] + digit) * strides[axis];
        }
        let y_idx = (x_idx as i64 + self.v_offset) as u64;
        if x_idx < y_idx {
            (x_idx as u32, y_idx as u32)
        } else {
            (y_idx as u32, x_idx as u32)
        }
    }
}

/// Row-major strides of a box of the given side.
fn box_strides(side: u64, dim: usize) -> Vec<u64> {
    let mut strides = vec![0u64; dim];
    let mut acc = 1u64;
    for axis in (0..dim).rev() {
        strides[axis] = acc;
        acc = acc.saturating_mul(side);
    }
    strides
}

/// Visit every canonical displacement class of a box: nonzero vectors in
/// `[-(side-1), side-1]^d` whose first nonzero coordinate is positive, with
/// their in-box position counts.
pub(super) fn for_each_class(
    side: u64,
    dim: usize,
    mut f: impl FnMut(&[i64], u64) -> Result<()>,
) -> Result<()> {
    let m = 2 * side - 1;
    let total = (m as u128).pow(dim as u32);
    if total > u64::MAX as u128 {
        return Err(Error::invalid("box too large to enumerate displacement classes"));
    }
    let mut v = vec![0i64; dim];
    for code in 0..total as u64 {
        if !decode_class(code, m, side, &mut v) {
            continue;
        }
        let count = v
            .iter()
            .map(|c| side - c.unsigned_abs())
            .product::<u64>();
        f(&v, count)?;
    }
    Ok(())
}

/// Decode a class code to its displacement vector; false when the code is not
/// canonical (zero or lexicographically negative).
fn decode_class(code: u64, m: u64, side: u64, v: &mut [i64]) -> bool {
    let mut rem = code;
    for axis in (0..v.len()).rev() {
        v[axis] = (rem % m) as i64 - (side as i64 - 1);
        rem /= m;
    }
    match v.iter().find(|c| **c != 0) {
        Some(first) => *first > 0,
        None => false,
    }
}

/// Sparse sampler: geometric skips through each displacement class.
pub(super) fn sample_skip(model: &BondModel, bx: &BoxSpec, seed: u64) -> Result<GraphSample> {
    sample_classwise(model, bx, seed, ClassMode::Skip)
}

/// Coupled sampler: one uniform per candidate position, stream keyed by the
/// class alone, so models sharing a seed share their variates.
pub(super) fn sample_coupled(model: &BondModel, bx: &BoxSpec, seed: u64) -> Result<GraphSample> {
    sample_classwise(model, bx, seed, ClassMode::PerPosition)
}

#[derive(Clone, Copy)]
enum ClassMode {
    Skip,
    PerPosition,
}

fn sample_classwise(
    model: &BondModel,
    bx: &BoxSpec,
    seed: u64,
    mode: ClassMode,
) -> Result<GraphSample> {
    if bx.dim() != model.dim() {
        return Err(Error::invalid("box dimension mismatch"));
    }
    let n = check_site_count(bx)?;
    let side = bx.side();
    let m = 2 * side - 1;
    let total = (m as u128).pow(bx.dim() as u32);
    if total > u64::MAX as u128 {
        return Err(Error::Resource {
            required_bytes: total * 8,
            budget_bytes: MEMORY_BUDGET_BYTES,
        });
    }
    let total = total as u64;
    let dim = bx.dim();
    let strides = box_strides(side, dim);

    // Probability evaluation can fail (custom table gaps); surface the first
    // error after the parallel pass. The accumulator carries scratch buffers
    // so the per-class loop stays allocation free.
    struct Acc {
        edges: Vec<(u32, u32)>,
        buf: Vec<i64>,
        scratch: ClassScratch,
    }
    let chunks: Vec<Result<Acc>> = (0..total as usize)
        .into_par_iter()
        .with_min_len(1 << 14)
        .fold(
            || {
                Ok(Acc {
                    edges: Vec::new(),
                    buf: vec![0i64; dim],
                    scratch: ClassScratch::new(dim),
                })
            },
            |acc: Result<Acc>, code| {
                let mut acc = acc?;
                if !decode_class(code as u64, m, side, &mut acc.buf) {
                    return Ok(acc);
                }
                let p = model.class_probability(&acc.buf)?;
                if p <= 0.0 {
                    return Ok(acc);
                }
                acc.scratch.load(side, &strides, &acc.buf);
                if acc.scratch.count == 0 {
                    return Ok(acc);
                }
                let mut rng = Pcg64Mcg::seed_from_u64(class_seed(seed, &acc.buf));
                let (scratch, edges) = (&acc.scratch, &mut acc.edges);
                match mode {
                    ClassMode::Skip => {
                        if p >= 1.0 {
                            for pos in 0..scratch.count {
                                edges.push(scratch.edge_at(pos, &strides));
                            }
                        } else {
                            // geometric skips by inversion; ln(1 - p) is
                            // cached for the whole class
                            let ln_q = (-p).ln_1p();
                            let mut cur = 0u64;
                            loop {
                                let u: f64 = rng.random();
                                let skip = ((-u).ln_1p() / ln_q).floor();
                                if !(skip < (scratch.count - cur) as f64) {
                                    break;
                                }
                                let pos = cur + skip as u64;
                                edges.push(scratch.edge_at(pos, &strides));
                                cur = pos + 1;
                                if cur >= scratch.count {
                                    break;
                                }
                            }
                        }
                    }
                    ClassMode::PerPosition => {
                        for pos in 0..scratch.count {
                            let u: f64 = rng.random();
                            if u < p {
                                edges.push(scratch.edge_at(pos, &strides));
                            }
                        }
                    }
                }
                Ok(acc)
            },
        )
        .collect();

    let mut edges = Vec::new();
    for chunk in chunks {
        edges.extend(chunk?.edges);
    }
    Ok(assemble(bx.clone(), model.clone(), seed, n, edges))
}

/// Per-pair coin flips from a single stream; oracle for the skip sampler.
pub(super) fn sample_naive(model: &BondModel, bx: &BoxSpec, seed: u64) -> Result<GraphSample> {
    if bx.dim() != model.dim() {
        return Err(Error::invalid("box dimension mismatch"));
    }
    let n = bx.site_count();
    if n > 10_000 {
        return Err(Error::invalid(format!(
            "naive sampler is limited to 10^4 sites, box has {n}"
        )));
    }
    let n = n as u64;
    let sites: Vec<Point> = bx.sites().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..sites.len() {
        for j in (i + 1)..sites.len() {
            let p = model.pair_probability(&sites[i], &sites[j])?;
            if rng.random_bool(p) {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Ok(assemble(bx.clone(), model.clone(), seed, n, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bondspace::ConnectionProfile;
    use crate::lattice::NormKind;

    fn pt<const N: usize>(c: [i64; N]) -> Point {
        Point::from(c)
    }

    fn shifted(dim: usize, beta: f64, s: f64, nn: f64) -> BondModel {
        BondModel::new(dim, ConnectionProfile::shifted_power(beta, s), nn, NormKind::Euclidean)
            .unwrap()
    }

    #[test]
    fn zero_beta_yields_zero_edges() {
        let m = shifted(1, 0.0, 1.5, 0.0);
        let bx = BoxSpec::cornered(pt([0]), 128).unwrap();
        for sampler in [BondModel::sample_graph, BondModel::sample_graph_naive] {
            let g = sampler(&m, &bx, 7).unwrap();
            assert_eq!(g.edge_count(), 0);
        }
    }

    #[test]
    fn full_overlay_gives_all_nearest_neighbor_edges() {
        let m = shifted(2, 0.0, 3.0, 1.0);
        let bx = BoxSpec::cornered(pt([0, 0]), 6).unwrap();
        let g = m.sample_graph(&bx, 3).unwrap();
        // 2 * side * (side-1) nearest-neighbor pairs in d=2
        assert_eq!(g.edge_count(), 2 * 6 * 5);
        for (a, b) in g.edges() {
            let d = NormKind::Taxicab
                .distance(&g.point_of(a), &g.point_of(b))
                .unwrap();
            assert_eq!(d, 1.0);
        }
    }

    #[test]
    fn adjacency_symmetric_and_in_box() {
        let m = shifted(2, 1.5, 2.2, 0.4);
        let bx = BoxSpec::centered(pt([3, -2]), 11).unwrap();
        let g = m.sample_graph(&bx, 99).unwrap();
        assert!(g.edge_count() > 0);
        for site in 0..g.site_count() as u32 {
            assert!(bx.contains(&g.point_of(site)));
            for &nb in g.neighbors(site) {
                assert_ne!(nb, site, "no self loops");
                assert!(g.neighbors(nb).binary_search(&site).is_ok(), "symmetry");
            }
        }
        let total: usize = (0..g.site_count() as u32).map(|s| g.degree(s)).sum();
        assert_eq!(total as u64, 2 * g.edge_count());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = shifted(1, 1.0, 1.5, 0.2);
        let bx = BoxSpec::cornered(pt([0]), 256).unwrap();
        let a = m.sample_graph(&bx, 42).unwrap();
        let b = m.sample_graph(&bx, 42).unwrap();
        assert_eq!(a.neighbors, b.neighbors);
        assert_eq!(a.offsets, b.offsets);
        let c = m.sample_graph(&bx, 43).unwrap();
        assert_ne!(a.neighbors, c.neighbors);
    }

    #[test]
    fn determinism_is_thread_count_independent() {
        let m = shifted(1, 1.0, 1.5, 0.2);
        let bx = BoxSpec::cornered(pt([0]), 512).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| m.sample_graph(&bx, 5).unwrap());
        let multi = m.sample_graph(&bx, 5).unwrap();
        assert_eq!(single.neighbors, multi.neighbors);
    }

    #[test]
    fn coupled_sampler_is_monotone_in_beta() {
        let bx = BoxSpec::cornered(pt([0]), 96).unwrap();
        for seed in 0..20u64 {
            let lo = shifted(1, 0.5, 1.5, 0.1).sample_graph_coupled(&bx, seed).unwrap();
            let hi = shifted(1, 2.0, 1.5, 0.1).sample_graph_coupled(&bx, seed).unwrap();
            let hi_edges: std::collections::HashSet<(u32, u32)> = hi.edges().collect();
            for e in lo.edges() {
                assert!(hi_edges.contains(&e), "edge {e:?} lost when beta grew");
            }
        }
    }

    #[test]
    fn skip_marginals_match_pair_probability() {
        // side 16, 4000 seeds, 5 sigma: a light version of the acceptance
        // criterion, kept here as a fast regression guard.
        let m = shifted(1, 1.0, 1.5, 0.0);
        let bx = BoxSpec::cornered(pt([0]), 16).unwrap();
        let trials = 4000u32;
        let n = 16usize;
        let mut counts = vec![vec![0u32; n]; n];
        for seed in 0..trials {
            let g = m.sample_graph(&bx, seed as u64).unwrap();
            for (a, b) in g.edges() {
                counts[a as usize][b as usize] += 1;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let p = m
                    .pair_probability(&pt([i as i64]), &pt([j as i64]))
                    .unwrap();
                let freq = counts[i][j] as f64 / trials as f64;
                let sigma = (p * (1.0 - p) / trials as f64).sqrt();
                assert!(
                    (freq - p).abs() <= 5.0 * sigma,
                    "pair ({i},{j}): freq={freq} p={p} sigma={sigma}"
                );
            }
        }
    }

    #[test]
    fn naive_marginals_match_pair_probability() {
        let m = shifted(1, 2.0, 1.2, 0.3);
        let bx = BoxSpec::cornered(pt([0]), 8).unwrap();
        let trials = 4000u32;
        let mut counts = vec![vec![0u32; 8]; 8];
        for seed in 0..trials {
            let g = m.sample_graph_naive(&bx, seed as u64).unwrap();
            for (a, b) in g.edges() {
                counts[a as usize][b as usize] += 1;
            }
        }
        for i in 0..8 {
            for j in (i + 1)..8 {
                let p = m
                    .pair_probability(&pt([i as i64]), &pt([j as i64]))
                    .unwrap();
                let freq = counts[i][j] as f64 / trials as f64;
                let sigma = (p * (1.0 - p) / trials as f64).sqrt();
                assert!((freq - p).abs() <= 5.0 * sigma);
            }
        }
    }

    #[test]
    fn expected_edge_count_matches_realized_mean() {
        let m = shifted(1, 1.0, 1.5, 0.4);
        let bx = BoxSpec::cornered(pt([0]), 64).unwrap();
        let trials = 1000u64;
        let counts: Vec<f64> = (0..trials)
            .map(|seed| m.sample_graph(&bx, seed).unwrap().edge_count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / trials as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
            / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        let expect = m.expected_edge_count(&bx).unwrap();
        assert!(
            (mean - expect).abs() <= 4.0 * se,
            "mean {mean} vs expected {expect} (se {se})"
        );
    }

    #[test]
    fn naive_rejects_oversize_boxes() {
        let m = shifted(1, 1.0, 1.5, 0.0);
        let bx = BoxSpec::cornered(pt([0]), 10_001).unwrap();
        assert!(m.sample_graph_naive(&bx, 0).is_err());
    }

    #[test]
    fn oversize_box_is_a_resource_error() {
        let m = shifted(2, 1.0, 2.5, 0.0);
        let bx = BoxSpec::cornered(pt([0, 0]), 70_000).unwrap();
        let err = m.sample_graph(&bx, 0).unwrap_err();
        assert!(matches!(err, crate::error::Error::Resource { .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn edge_list_export_is_stable() {
        let m = shifted(1, 1.0, 1.5, 0.0);
        let bx = BoxSpec::cornered(pt([0]), 12).unwrap();
        let g = m.sample_graph(&bx, 11).unwrap();
        let mut out1 = Vec::new();
        g.write_edge_list(&mut out1).unwrap();
        let g2 = m.sample_graph(&bx, 11).unwrap();
        let mut out2 = Vec::new();
        g2.write_edge_list(&mut out2).unwrap();
        assert_eq!(out1, out2);
        let text = String::from_utf8(out1).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# perclab edge-list v1"));
        assert!(header.contains("seed=11"));
        for line in lines {
            let (a, b) = line.split_once('\t').unwrap();
            let a: i64 = a.parse().unwrap();
            let b: i64 = b.parse().unwrap();
            assert!((0..12).contains(&a) && (0..12).contains(&b));
        }
    }

    #[test]
    fn from_edges_round_trip_and_validation() {
        let m = shifted(1, 0.0, 1.5, 0.0);
        let bx = BoxSpec::cornered(pt([0]), 5).unwrap();
        let g = GraphSample::from_edges(
            bx.clone(),
            m.clone(),
            0,
            &[(pt([0]), pt([1])), (pt([1]), pt([0])), (pt([3]), pt([4]))],
        )
        .unwrap();
        assert_eq!(g.edge_count(), 2); // duplicate collapsed
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(3, 4));
        assert!(!g.has_edge(1, 2));

        assert!(GraphSample::from_edges(bx.clone(), m.clone(), 0, &[(pt([0]), pt([0]))]).is_err());
        assert!(GraphSample::from_edges(bx, m, 0, &[(pt([0]), pt([9]))]).is_err());
    }
}
