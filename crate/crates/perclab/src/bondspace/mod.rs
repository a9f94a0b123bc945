//! Connection-probability law and bond-configuration sampling on finite boxes.
//!
//! A [`BondModel`] fixes the dimension, a radial connection profile
//! `q(z) >= 0`, an optional nearest-neighbor overlay and a norm. A pair of
//! distinct sites is occupied independently with probability
//! `p_xy = 1 - exp(-q(x - y))`, composed with the overlay on unit steps.

mod sample;

pub use sample::GraphSample;

use crate::error::{Error, Result};
use crate::lattice::{BoxSpec, NormKind, Point};
use serde::{Deserialize, Serialize};

/// Radial profile `q` as a function of the displacement magnitude.
///
/// `ShiftedPower` is `beta * (1 + |z|)^(-s)`, `PurePower` is
/// `beta * |z|^(-s)` (well defined on the lattice where `|z| >= 1`), and
/// `CustomTable` carries explicit values per magnitude. Missing table entries
/// are a hard error: a silent zero would corrupt exact box-connection
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConnectionProfile {
    ShiftedPower { beta: f64, s: f64 },
    PurePower { beta: f64, s: f64 },
    CustomTable { entries: Vec<(f64, f64)> },
}

impl ConnectionProfile {
    pub fn shifted_power(beta: f64, s: f64) -> Self {
        ConnectionProfile::ShiftedPower { beta, s }
    }

    pub fn pure_power(beta: f64, s: f64) -> Self {
        ConnectionProfile::PurePower { beta, s }
    }

    /// Table of `(magnitude, q)` pairs. Magnitudes must be positive, distinct
    /// and exactly equal to the values the chosen norm produces.
    pub fn custom_table(mut entries: Vec<(f64, f64)>) -> Result<Self> {
        for &(m, q) in &entries {
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::invalid(format!("table magnitude must be positive, got {m}")));
            }
            if !q.is_finite() || q < 0.0 {
                return Err(Error::invalid(format!("table q must be nonnegative, got {q}")));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate magnitude in custom table"));
        }
        Ok(ConnectionProfile::CustomTable { entries })
    }

    fn validate(&self) -> Result<()> {
        match self {
            ConnectionProfile::ShiftedPower { beta, s }
            | ConnectionProfile::PurePower { beta, s } => {
                if !beta.is_finite() || *beta < 0.0 {
                    return Err(Error::invalid(format!("beta must be nonnegative, got {beta}")));
                }
                if !s.is_finite() || *s <= 0.0 {
                    return Err(Error::invalid(format!("s must be positive, got {s}")));
                }
                Ok(())
            }
            ConnectionProfile::CustomTable { entries } => {
                // re-run the constructor checks in case of hand-built values
                Self::custom_table(entries.clone()).map(|_| ())
            }
        }
    }

    /// `q` evaluated at a displacement magnitude.
    pub fn q_of_magnitude(&self, magnitude: f64) -> Result<f64> {
        if magnitude <= 0.0 {
            return Err(Error::invalid("q is undefined at zero displacement"));
        }
        match self {
            ConnectionProfile::ShiftedPower { beta, s } => {
                Ok(beta * (1.0 + magnitude).powf(-s))
            }
            ConnectionProfile::PurePower { beta, s } => Ok(beta * magnitude.powf(-s)),
            ConnectionProfile::CustomTable { entries } => {
                match entries.binary_search_by(|probe| probe.0.total_cmp(&magnitude)) {
                    Ok(i) => Ok(entries[i].1),
                    Err(_) => Err(Error::invalid(format!(
                        "custom table has no entry for magnitude {magnitude}"
                    ))),
                }
            }
        }
    }

    /// The decay exponent, when the profile is one of the power laws.
    pub fn s_exponent(&self) -> Option<f64> {
        match self {
            ConnectionProfile::ShiftedPower { s, .. } | ConnectionProfile::PurePower { s, .. } => {
                Some(*s)
            }
            ConnectionProfile::CustomTable { .. } => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConnectionProfile::ShiftedPower { .. } => "shifted-power",
            ConnectionProfile::PurePower { .. } => "pure-power",
            ConnectionProfile::CustomTable { .. } => "custom-table",
        }
    }
}

/// The bond model: dimension, profile, nearest-neighbor overlay and norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondModel {
    dim: usize,
    profile: ConnectionProfile,
    nn_prob: f64,
    norm: NormKind,
}

impl BondModel {
    pub fn new(dim: usize, profile: ConnectionProfile, nn_prob: f64, norm: NormKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(0.0..=1.0).contains(&nn_prob) {
            return Err(Error::invalid(format!(
                "nn_prob must lie in [0, 1], got {nn_prob}"
            )));
        }
        profile.validate()?;
        Ok(BondModel {
            dim,
            profile,
            nn_prob,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> &ConnectionProfile {
        &self.profile
    }

    pub fn nn_prob(&self) -> f64 {
        self.nn_prob
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    /// `q(z)` for a nonzero displacement.
    pub fn q_value(&self, displacement: &Point) -> Result<f64> {
        if displacement.dim() != self.dim {
            return Err(Error::invalid("displacement dimension mismatch"));
        }
        if displacement.is_zero() {
            return Err(Error::invalid("q is undefined at zero displacement"));
        }
        let mag = self.norm.length(displacement)?;
        self.profile.q_of_magnitude(mag)
    }

    /// `p_xy = 1 - e^{-q(x-y)}`, composed with the nearest-neighbor overlay
    /// as an independent extra bond: `1 - (1 - p)(1 - nn_prob)` on unit steps.
    pub fn pair_probability(&self, x: &Point, y: &Point) -> Result<f64> {
        let z = x.displacement_to(y)?;
        if z.is_zero() {
            return Err(Error::invalid("pair probability is undefined for x = y"));
        }
        let p_long = 1.0 - (-self.q_value(&z)?).exp();
        if self.nn_prob > 0.0 && is_unit_step(&z) {
            Ok(1.0 - (1.0 - p_long) * (1.0 - self.nn_prob))
        } else {
            Ok(p_long)
        }
    }

    /// Expected number of edges in a box, summed per displacement class in
    /// `O(classes)` instead of `O(pairs^2)`.
    pub fn expected_edge_count(&self, bx: &BoxSpec) -> Result<f64> {
        if bx.dim() != self.dim {
            return Err(Error::invalid("box dimension mismatch"));
        }
        let mut total = 0.0;
        sample::for_each_class(bx.side(), self.dim, |v, n_positions| {
            let p = self.class_probability(v)?;
            total += p * n_positions as f64;
            Ok(())
        })?;
        Ok(total)
    }

    /// Exact probability that some bond joins the two disjoint site sets:
    /// `1 - exp(-sum_{z in b0} sum_{z' in b1} q(z - z'))`.
    pub fn box_connection_probability(&self, b0: &[Point], b1: &[Point]) -> Result<f64> {
        if b0.is_empty() || b1.is_empty() {
            return Err(Error::invalid("box connection requires nonempty sets"));
        }
        let set: std::collections::HashSet<&Point> = b0.iter().collect();
        if b1.iter().any(|p| set.contains(p)) {
            return Err(Error::invalid("box connection requires disjoint sets"));
        }
        let mut total_q = 0.0;
        for z in b0 {
            for zp in b1 {
                total_q += self.q_value(&z.displacement_to(zp)?)?;
            }
        }
        Ok(1.0 - (-total_q).exp())
    }

    /// Per-class edge probability for a canonical displacement vector.
    /// Allocation-free: this sits on the sampler's per-class hot path.
    pub(crate) fn class_probability(&self, v: &[i64]) -> Result<f64> {
        let mag = self.norm.length_of_coords(v)?;
        let q = self.profile.q_of_magnitude(mag)?;
        let p_long = 1.0 - (-q).exp();
        let unit = v.iter().map(|c| c.unsigned_abs()).sum::<u64>() == 1;
        if self.nn_prob > 0.0 && unit {
            Ok(1.0 - (1.0 - p_long) * (1.0 - self.nn_prob))
        } else {
            Ok(p_long)
        }
    }

    /// Draw one bond configuration with the sparse skip sampler. Runtime is
    /// `O(sites + realized edges + displacement classes)`.
    pub fn sample_graph(&self, bx: &BoxSpec, seed: u64) -> Result<GraphSample> {
        sample::sample_skip(self, bx, seed)
    }

    /// Reference sampler flipping an explicit coin per pair; limited to 10^4
    /// sites. Same law as `sample_graph`, different stream layout.
    pub fn sample_graph_naive(&self, bx: &BoxSpec, seed: u64) -> Result<GraphSample> {
        sample::sample_naive(self, bx, seed)
    }

    /// Coupled sampler: one uniform variate per candidate pair, drawn from a
    /// substream keyed by (seed, displacement class) only. Two models sampled
    /// with equal seeds share their variates, so raising `beta` (or any
    /// pointwise increase of the pair probabilities) yields a superset of
    /// edges.
    pub fn sample_graph_coupled(&self, bx: &BoxSpec, seed: u64) -> Result<GraphSample> {
        sample::sample_coupled(self, bx, seed)
    }
}

/// True when the displacement is a single +-1 step along one axis.
fn is_unit_step(z: &Point) -> bool {
    let mut sum = 0u64;
    for c in z.coords() {
        sum += c.unsigned_abs();
        if sum > 1 {
            return false;
        }
    }
    sum == 1
}

/// splitmix64: stable, platform-independent mixing for substream derivation.
pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed for the substream of one displacement class.
pub(crate) fn class_seed(master: u64, v: &[i64]) -> u64 {
    let mut h = splitmix64(master ^ 0x706572636C6162);
    for &c in v {
        h = splitmix64(h ^ c as u64);
    }
    h
}

/// Seed for an independent trial substream of an experiment.
pub(crate) fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(trial.wrapping_add(0x5DEECE66D)))
}
