//! The experiments: cluster fractions, distance scaling, dense density,
//! complete-graph checks, block renormalization and hierarchy audits.
//!
//! Every experiment maps trials onto a worker pool; trial seeds derive from
//! the master seed and the trial index alone, and results are assembled in
//! trial order, so reports are identical at any `threads` setting.

use super::report::{BoundComparison, Report, SummaryRow};
use super::stats;
use crate::bondspace::{trial_seed, BondModel, GraphSample};
use crate::chemdist::{audit_hierarchy, chemical_distance};
use crate::clusters::{
    block_connection_stats, block_renormalize, dense_set, label_components,
    largest_component_fraction, BlockGraph,
};
use crate::error::{Error, Result};
use crate::lattice::{BoxSpec, Point};
use crate::theory::{
    complete_graph_exact_distribution, complete_graph_sample, complete_graph_tail_bound,
    depth_n, CompleteGraphParams,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: BondModel,
    /// Box sides, ascending.
    pub sides: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    /// Density / fraction threshold.
    pub rho: f64,
    /// Block occupancy threshold.
    pub delta: f64,
    /// Local window side.
    pub ell: u64,
    /// Hierarchy scale exponent.
    pub gamma: f64,
    /// Comparison-curve exponent, in (s, 2d).
    pub s_prime: f64,
    /// Sample-box side per unit of pair distance in the distance-scaling
    /// and audit experiments.
    #[serde(default = "default_box_factor")]
    pub box_factor: u64,
    /// Worker threads; 0 uses the global pool. Operational only: excluded
    /// from the config echo so reports stay byte-identical at any width.
    #[serde(skip)]
    pub threads: usize,
}

fn default_box_factor() -> u64 {
    4
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.sides.is_empty() || self.sides.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sides must be nonempty and strictly ascending"));
        }
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::invalid("gamma must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Run trials on a pool of the requested width, preserving trial order.
fn run_trials<T: Send>(
    threads: usize,
    trials: u64,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let body = || (0..trials).into_par_iter().map(|t| f(t)).collect();
    if threads == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(body)
    }
}

fn summarize(report: &mut Report, quantity: &str, key: f64, values: &[f64]) {
    report.summary.push(SummaryRow {
        quantity: quantity.to_string(),
        key,
        n: values.len() as u64,
        mean: stats::mean(values),
        median: stats::median(values),
        std_error: stats::std_error(values),
    });
}

/// Mixes a per-side stream tag into the master seed.
fn side_stream(master: u64, side: u64, salt: u64) -> u64 {
    crate::bondspace::splitmix64(master ^ side.wrapping_mul(0x9E37_79B9).wrapping_add(salt))
}

/// Largest-component fractions against the finite-box tail curve
/// `exp(-rho L^{2d - s'})`.
pub fn run_cluster_fraction(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut report = Report::new("cluster-fraction", cfg)?;
    let d = cfg.model.dim() as i32;
    for &side in &cfg.sides {
        let stream = side_stream(cfg.seed, side, 1);
        let bx = BoxSpec::cornered(Point::origin(cfg.model.dim()), side)?;
        let fractions = run_trials(cfg.threads, cfg.trials, |t| {
            let seed = trial_seed(stream, t);
            let g = cfg.model.sample_graph(&bx, seed)?;
            Ok(largest_component_fraction(&g))
        })?;
        for (t, f) in fractions.iter().enumerate() {
            report.push_row(t as u64, trial_seed(stream, t as u64), side, "largest_component_fraction", *f);
        }
        summarize(&mut report, "largest_component_fraction", side as f64, &fractions);
        let below = fractions.iter().filter(|&&f| f < cfg.rho).count() as f64
            / cfg.trials as f64;
        let curve = (-cfg.rho * (side as f64).powf(2.0 * d as f64 - cfg.s_prime)).exp();
        report.comparisons.push(BoundComparison {
            quantity: "tail_below_rho".into(),
            key: side as f64,
            empirical: below,
            std_error: stats::binomial_std_error(below, cfg.trials),
            reference: curve,
            passes: None,
        });
    }
    report.wall_clock = t0.elapsed();
    Ok(report)
}

/// Dense-site counts against the same tail curve.
pub fn run_dense_density(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    if cfg.ell % 2 == 0 {
        return Err(Error::invalid("ell must be odd"));
    }
    let t0 = Instant::now();
    let mut report = Report::new("dense-density", cfg)?;
    let d = cfg.model.dim() as i32;
    for &side in &cfg.sides {
        if cfg.ell > side / cfg.ell {
            return Err(Error::invalid(format!(
                "window {} too large for side {side}: need ell <= side / ell",
                cfg.ell
            )));
        }
        let stream = side_stream(cfg.seed, side, 2);
        let bx = BoxSpec::cornered(Point::origin(cfg.model.dim()), side)?;
        let volume = (side as f64).powi(d);
        let fractions = run_trials(cfg.threads, cfg.trials, |t| {
            let seed = trial_seed(stream, t);
            let g = cfg.model.sample_graph(&bx, seed)?;
            let rep = dense_set(&g, &bx, cfg.rho, cfg.ell)?;
            Ok(rep.count as f64 / volume)
        })?;
        for (t, f) in fractions.iter().enumerate() {
            report.push_row(t as u64, trial_seed(stream, t as u64), side, "dense_fraction", *f);
        }
        summarize(&mut report, "dense_fraction", side as f64, &fractions);
        let below = fractions.iter().filter(|&&f| f < cfg.rho).count() as f64
            / cfg.trials as f64;
        let curve = (-cfg.rho * (side as f64).powf(2.0 * d as f64 - cfg.s_prime)).exp();
        report.comparisons.push(BoundComparison {
            quantity: "dense_tail_below_rho".into(),
            key: side as f64,
            empirical: below,
            std_error: stats::binomial_std_error(below, cfg.trials),
            reference: curve,
            passes: None,
        });
    }
    report.wall_clock = t0.elapsed();
    Ok(report)
}

/// Chemical-distance medians over a distance schedule, with the fitted
/// slope of `log(median D)` against `log log |x|`.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaEstimate {
    /// Distances that survived the connectivity filter.
    pub distances: Vec<u64>,
    pub medians: Vec<f64>,
    pub dropped_fraction: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub reference_delta: f64,
}

/// The default dyadic schedule `2^8 ..= 2^20`, trimmed in higher dimensions
/// so the sample boxes stay inside the memory budget.
pub fn default_distance_schedule(dim: usize) -> Vec<u64> {
    let mut out = Vec::new();
    for e in 8u32..=20 {
        let dist = 1u64 << e;
        let side = 4 * dist;
        if (side as u128).pow(dim as u32) <= u32::MAX as u128 {
            out.push(dist);
        }
    }
    out
}

/// Both endpoints of each measured pair must lie in the box's largest
/// component: the finite-volume stand-in for membership in the infinite
/// cluster. The box side is four times the pair distance, centered on the
/// pair, to limit boundary distortion.
pub fn run_distance_scaling(
    cfg: &ExperimentConfig,
    distances: &[u64],
) -> Result<(Report, DeltaEstimate)> {
    if cfg.trials < 1 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if distances.is_empty() {
        return Err(Error::invalid("distance schedule is empty"));
    }
    let t0 = Instant::now();
    let mut report = Report::new("distance-scaling", cfg)?;
    report.summary.push(SummaryRow {
        quantity: "box_factor".into(),
        key: cfg.box_factor as f64,
        n: 0,
        mean: cfg.box_factor as f64,
        median: cfg.box_factor as f64,
        std_error: 0.0,
    });
    let dim = cfg.model.dim();
    let s = cfg
        .model
        .profile()
        .s_exponent()
        .ok_or_else(|| Error::invalid("distance scaling needs a power-law profile"))?;
    let reference_delta = crate::theory::delta(s, dim as u32)?;

    if cfg.box_factor < 2 {
        return Err(Error::invalid("box factor must be at least 2"));
    }
    let mut kept_distances = Vec::new();
    let mut medians = Vec::new();
    let mut dropped_fraction = Vec::new();
    for &dist in distances {
        let side = cfg.box_factor * dist;
        if (side as u128).pow(dim as u32) > u32::MAX as u128 {
            // memory cap: compute and record, then skip
            report.summary.push(SummaryRow {
                quantity: "distance_skipped_memory_cap".into(),
                key: dist as f64,
                n: 0,
                mean: f64::NAN,
                median: f64::NAN,
                std_error: f64::NAN,
            });
            continue;
        }
        let bx = BoxSpec::cornered(Point::origin(dim), side)?;
        let mut xa = vec![(side / 2) as i64; dim];
        let mut xb = xa.clone();
        xa[0] = (side / 2 - dist / 2) as i64;
        xb[0] = xa[0] + dist as i64;
        let (pa, pb) = (Point::new(xa), Point::new(xb));
        let stream = side_stream(cfg.seed, dist, 3);
        let outcomes = run_trials(cfg.threads, cfg.trials, |t| {
            let seed = trial_seed(stream, t);
            let g = cfg.model.sample_graph(&bx, seed)?;
            let lab = label_components(&g);
            let (sa, sb) = (g.site_of(&pa).unwrap(), g.site_of(&pb).unwrap());
            if lab.component_of(sa) != lab.largest_id()
                || lab.component_of(sb) != lab.largest_id()
            {
                return Ok(None);
            }
            chemical_distance(&g, &pa, &pb)
        })?;
        let mut kept = Vec::new();
        for (t, outcome) in outcomes.iter().enumerate() {
            let seed = trial_seed(stream, t as u64);
            report.push_row(
                t as u64,
                seed,
                side,
                "pair_in_giant",
                outcome.is_some() as u64 as f64,
            );
            if let Some(d) = outcome {
                report.push_row(t as u64, seed, side, "chemical_distance", *d as f64);
                kept.push(*d as f64);
            }
        }
        let dropped = 1.0 - kept.len() as f64 / cfg.trials as f64;
        summarize(&mut report, "chemical_distance", dist as f64, &kept);
        report.summary.push(SummaryRow {
            quantity: "dropped_pair_fraction".into(),
            key: dist as f64,
            n: cfg.trials,
            mean: dropped,
            median: dropped,
            std_error: stats::binomial_std_error(dropped, cfg.trials),
        });
        if kept.len() as u64 >= (cfg.trials / 4).max(3) {
            kept_distances.push(dist);
            medians.push(stats::median(&kept));
            dropped_fraction.push(dropped);
        }
    }

    if kept_distances.len() < 3 {
        return Err(Error::invalid(
            "fewer than three usable distances; cannot fit a slope",
        ));
    }
    let xs: Vec<f64> = kept_distances
        .iter()
        .map(|&d| (d as f64).ln().ln())
        .collect();
    let ys: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let fit = stats::linear_fit(&xs, &ys)?;
    let estimate = DeltaEstimate {
        distances: kept_distances,
        medians,
        dropped_fraction,
        slope: fit.slope,
        intercept: fit.intercept,
        residuals: fit.residuals,
        reference_delta,
    };
    report.comparisons.push(BoundComparison {
        quantity: "loglog_slope_vs_delta".into(),
        key: s,
        empirical: estimate.slope,
        std_error: f64::NAN,
        reference: reference_delta,
        passes: None,
    });
    report.wall_clock = t0.elapsed();
    Ok((report, estimate))
}

/// Empirical complete-graph tail against the closed-form bound, plus the
/// exact enumeration cross-check for small `n`.
pub fn run_complete_graph_check(
    params: &CompleteGraphParams,
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Report> {
    if trials < 1 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let t0 = Instant::now();
    let mut report = Report::new("complete-graph", params)?;
    let sizes = run_trials(threads, trials, |t| {
        Ok(complete_graph_sample(params, trial_seed(seed, t)))
    })?;
    let threshold = params.p_prime * params.r_prime * params.n as f64;
    let below = sizes.iter().filter(|&&s| s as f64 <= threshold).count() as f64
        / trials as f64;
    let bound = complete_graph_tail_bound(params)?;
    let se = stats::binomial_std_error(below, trials);
    for (t, s) in sizes.iter().enumerate() {
        report.push_row(t as u64, trial_seed(seed, t as u64), params.n, "largest_component", *s as f64);
    }
    let values: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    summarize(&mut report, "largest_component", params.n as f64, &values);
    report.comparisons.push(BoundComparison {
        quantity: "tail_probability_vs_bound".into(),
        key: params.n as f64,
        empirical: below,
        std_error: se,
        reference: bound,
        passes: Some(below <= bound + 3.0 * se),
    });

    if params.n <= 6 {
        let exact = complete_graph_exact_distribution(params.n, params.r, params.p)?;
        let mut counts = vec![0u64; params.n as usize + 1];
        for &s in &sizes {
            counts[s as usize] += 1;
        }
        let tv: f64 = exact
            .iter()
            .zip(&counts)
            .map(|(ex, c)| (ex - *c as f64 / trials as f64).abs())
            .sum::<f64>()
            / 2.0;
        report.comparisons.push(BoundComparison {
            quantity: "total_variation_vs_exact".into(),
            key: params.n as f64,
            empirical: tv,
            std_error: f64::NAN,
            reference: 0.01,
            passes: Some(tv <= 0.01),
        });
    }
    report.wall_clock = t0.elapsed();
    Ok(report)
}

/// Block occupancy rates and the per-distance connection table with its
/// fitted decay amplitude.
pub fn run_block_renorm(cfg: &ExperimentConfig, k: u64, delta: f64) -> Result<Report> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut report = Report::new("block-renorm", cfg)?;
    let s = cfg
        .model
        .profile()
        .s_exponent()
        .ok_or_else(|| Error::invalid("block renormalization needs a power-law profile"))?;
    for &side in &cfg.sides {
        if side % k != 0 {
            return Err(Error::invalid(format!(
                "side {side} is not divisible by block side {k}"
            )));
        }
        let stream = side_stream(cfg.seed, side, 4);
        let bx = BoxSpec::cornered(Point::origin(cfg.model.dim()), side)?;
        let blocks: Vec<BlockGraph> = run_trials(cfg.threads, cfg.trials, |t| {
            let g = cfg.model.sample_graph(&bx, trial_seed(stream, t))?;
            block_renormalize(&g, k, delta)
        })?;
        let rates: Vec<f64> = blocks
            .iter()
            .map(|b| b.occupied_count() as f64 / b.block_count() as f64)
            .collect();
        for (t, r) in rates.iter().enumerate() {
            report.push_row(t as u64, trial_seed(stream, t as u64), side, "block_occupancy_rate", *r);
        }
        summarize(&mut report, "block_occupancy_rate", side as f64, &rates);
        let stats_table = block_connection_stats(&blocks, cfg.model.norm(), s)?;
        for row in &stats_table.rows {
            report.comparisons.push(BoundComparison {
                quantity: format!("block_connection_frequency_L{side}"),
                key: row.distance,
                empirical: row.frequency,
                std_error: stats::binomial_std_error(row.frequency, row.pairs),
                reference: row.fitted_curve,
                passes: None,
            });
        }
        report.summary.push(SummaryRow {
            quantity: format!("block_beta_fit_L{side}"),
            key: side as f64,
            n: cfg.trials,
            mean: stats_table.beta_fit,
            median: stats_table.beta_fit,
            std_error: f64::NAN,
        });
    }
    report.wall_clock = t0.elapsed();
    Ok(report)
}

/// Hierarchy audits over sampled pairs: extraction validity, pigeonhole,
/// gap-product and regularity satisfaction rates per distance.
pub fn run_hierarchy_audit(cfg: &ExperimentConfig, distances: &[u64]) -> Result<Report> {
    if distances.is_empty() {
        return Err(Error::invalid("distance schedule is empty"));
    }
    let t0 = Instant::now();
    let mut report = Report::new("hierarchy-audit", cfg)?;
    let dim = cfg.model.dim();
    for &dist in distances {
        let side = cfg.box_factor * dist;
        if (side as u128).pow(dim as u32) > u32::MAX as u128 {
            continue;
        }
        let bx = BoxSpec::cornered(Point::origin(dim), side)?;
        let mut xa = vec![(side / 2) as i64; dim];
        let mut xb = xa.clone();
        xa[0] = (side / 2 - dist / 2) as i64;
        xb[0] = xa[0] + dist as i64;
        let (pa, pb) = (Point::new(xa), Point::new(xb));
        let depth = depth_n(dist as f64, cfg.gamma, 1.0).unwrap_or(1);
        let stream = side_stream(cfg.seed, dist, 5);
        let audits = run_trials(cfg.threads, cfg.trials, |t| {
            let g = cfg.model.sample_graph(&bx, trial_seed(stream, t))?;
            let lab = label_components(&g);
            let (sa, sb) = (g.site_of(&pa).unwrap(), g.site_of(&pb).unwrap());
            if lab.component_of(sa) != lab.largest_id()
                || lab.component_of(sb) != lab.largest_id()
            {
                return Ok(None);
            }
            audit_hierarchy(&g, &pa, &pb, cfg.gamma, depth).map(Some)
        })?;
        let mut pigeonhole = Vec::new();
        let mut regular = Vec::new();
        let mut gap_ok = Vec::new();
        let mut span_ratio = Vec::new();
        for (t, audit) in audits.iter().enumerate() {
            let Some(a) = audit else { continue };
            let seed = trial_seed(stream, t as u64);
            report.push_row(t as u64, seed, side, "pigeonhole_ok", a.pigeonhole_ok as u64 as f64);
            pigeonhole.push(a.pigeonhole_ok as u64 as f64);
            if a.total_gaps > 0 {
                let rate = a.regular_gaps as f64 / a.total_gaps as f64;
                report.push_row(t as u64, seed, side, "regular_gap_rate", rate);
                regular.push(rate);
            }
            if !a.gap_product_ok.is_empty() {
                let rate = a.gap_product_ok.iter().filter(|x| **x).count() as f64
                    / a.gap_product_ok.len() as f64;
                report.push_row(t as u64, seed, side, "gap_product_rate", rate);
                gap_ok.push(rate);
            }
            let denom = (1u64 << (a.achieved_depth - 1)) as f64;
            let ratio = a.spanning_total as f64 / denom;
            report.push_row(t as u64, seed, side, "spanning_steps_over_gaps", ratio);
            span_ratio.push(ratio);
        }
        summarize(&mut report, "pigeonhole_ok", dist as f64, &pigeonhole);
        summarize(&mut report, "regular_gap_rate", dist as f64, &regular);
        summarize(&mut report, "gap_product_rate", dist as f64, &gap_ok);
        summarize(&mut report, "spanning_steps_over_gaps", dist as f64, &span_ratio);
    }
    report.wall_clock = t0.elapsed();
    Ok(report)
}

/// Coupled-variate sweep used for monotonicity checks: sample each seed at
/// both amplitudes with shared uniforms and report the fraction of seeds
/// where the larger-amplitude sample lost an edge or shrank its giant
/// fraction (both must be zero by the coupling).
pub fn coupled_monotonicity_check(
    lo: &BondModel,
    hi: &BondModel,
    side: u64,
    trials: u64,
    seed: u64,
) -> Result<(u64, u64)> {
    let bx = BoxSpec::cornered(Point::origin(lo.dim()), side)?;
    let mut edge_regressions = 0;
    let mut fraction_regressions = 0;
    for t in 0..trials {
        let s = trial_seed(seed, t);
        let gl = lo.sample_graph_coupled(&bx, s)?;
        let gh = hi.sample_graph_coupled(&bx, s)?;
        let hi_edges: std::collections::HashSet<(u32, u32)> = gh.edges().collect();
        if gl.edges().any(|e| !hi_edges.contains(&e)) {
            edge_regressions += 1;
        }
        if largest_component_fraction(&gh) < largest_component_fraction(&gl) {
            fraction_regressions += 1;
        }
    }
    Ok((edge_regressions, fraction_regressions))
}

/// Convenience wrapper tying a `GraphSample` to the edge-list export used by
/// the CLI `sample` subcommand.
pub fn render_edge_list(graph: &GraphSample) -> String {
    let mut buf = Vec::new();
    graph.write_edge_list(&mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("edge list is utf-8")
}
