//! Integer-lattice geometry: points, norms, boxes and annuli.
//!
//! Boxes come in two flavors: `Centered` boxes have an odd side and sit
//! symmetrically around their anchor, `Cornered` boxes have their anchor at
//! the lexicographically smallest site. An annulus is the set difference of
//! two centered boxes whose sides are the minimal odd integers above `L` and
//! `L/2`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A site of `Z^d`. Coordinates are `i64`, sized for |coordinate| up to 2^40
/// with headroom; norm computations use 128-bit intermediates and report
/// overflow as an error instead of wrapping.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    coords: Vec<i64>,
}

impl Point {
    pub fn new(coords: Vec<i64>) -> Self {
        Point { coords }
    }

    /// Origin of `Z^d`.
    pub fn origin(dim: usize) -> Self {
        Point {
            coords: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    /// The displacement `self - other`.
    pub fn displacement_to(&self, other: &Point) -> Result<Point> {
        if self.dim() != other.dim() {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| {
                a.checked_sub(*b)
                    .ok_or_else(|| Error::invalid("coordinate overflow in displacement"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Point { coords })
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.coords {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

impl From<Vec<i64>> for Point {
    fn from(coords: Vec<i64>) -> Self {
        Point { coords }
    }
}

impl<const N: usize> From<[i64; N]> for Point {
    fn from(coords: [i64; N]) -> Self {
        Point {
            coords: coords.to_vec(),
        }
    }
}

/// Exact length representation used for comparisons that must not go through
/// floating point: squared Euclidean length, or the plain integer value for
/// the sup and taxicab norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ExactLength {
    /// Sum of squared coordinates.
    Squared(u128),
    /// Integer-valued norm (sup or taxicab).
    Linear(u128),
}

/// Norm on `Z^d`. All experiments take the norm explicitly; `Euclidean` is
/// the default used by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Euclidean,
    Sup,
    Taxicab,
}

impl NormKind {
    /// |p - q| under this norm.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        Ok(self.exact_distance(p, q)?.into_f64())
    }

    /// Norm of a displacement vector.
    pub fn length(&self, z: &Point) -> Result<f64> {
        Ok(self.exact_length(z)?.into_f64())
    }

    /// Norm of a raw coordinate slice.
    pub fn length_of_coords(&self, coords: &[i64]) -> Result<f64> {
        Ok(self
            .exact_over(coords.iter().map(|c| c.unsigned_abs() as u128))?
            .into_f64())
    }

    pub(crate) fn exact_distance(&self, p: &Point, q: &Point) -> Result<ExactLength> {
        if p.dim() != q.dim() {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                p.dim(),
                q.dim()
            )));
        }
        self.exact_over(p.coords.iter().zip(&q.coords).map(|(a, b)| {
            // |a - b| never overflows in i128
            ((*a as i128) - (*b as i128)).unsigned_abs()
        }))
    }

    pub(crate) fn exact_length(&self, z: &Point) -> Result<ExactLength> {
        self.exact_over(z.coords.iter().map(|c| c.unsigned_abs() as u128))
    }

    fn exact_over(&self, diffs: impl Iterator<Item = u128>) -> Result<ExactLength> {
        let overflow = || Error::invalid("norm computation overflowed 128 bits");
        match self {
            NormKind::Euclidean => {
                let mut sum: u128 = 0;
                for d in diffs {
                    let sq = d.checked_mul(d).ok_or_else(overflow)?;
                    sum = sum.checked_add(sq).ok_or_else(overflow)?;
                }
                Ok(ExactLength::Squared(sum))
            }
            NormKind::Sup => Ok(ExactLength::Linear(diffs.max().unwrap_or(0))),
            NormKind::Taxicab => {
                let mut sum: u128 = 0;
                for d in diffs {
                    sum = sum.checked_add(d).ok_or_else(overflow)?;
                }
                Ok(ExactLength::Linear(sum))
            }
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::Euclidean => "euclidean",
            NormKind::Sup => "sup",
            NormKind::Taxicab => "taxicab",
        }
    }
}

impl ExactLength {
    pub(crate) fn into_f64(self) -> f64 {
        match self {
            ExactLength::Squared(s) => (s as f64).sqrt(),
            ExactLength::Linear(v) => v as f64,
        }
    }

    /// Exact test of `self * scale >= other` where lengths came from the same
    /// norm. For the squared representation the comparison is
    /// `self * scale^2 >= other` on the squares.
    pub(crate) fn scaled_ge(&self, scale: u128, other: &ExactLength) -> bool {
        match (self, other) {
            (ExactLength::Squared(a), ExactLength::Squared(b)) => match a
                .checked_mul(scale)
                .and_then(|v| v.checked_mul(scale))
            {
                Some(lhs) => lhs >= *b,
                None => true, // overflow means the left side is astronomically large
            },
            (ExactLength::Linear(a), ExactLength::Linear(b)) => match a.checked_mul(scale) {
                Some(lhs) => lhs >= *b,
                None => true,
            },
            _ => unreachable!("mixed norm comparison"),
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(NormKind::Euclidean),
            "sup" | "linf" => Ok(NormKind::Sup),
            "taxicab" | "l1" => Ok(NormKind::Taxicab),
            other => Err(Error::invalid(format!("unknown norm {other:?}"))),
        }
    }
}

/// Convenience free function mirroring `NormKind::distance`.
pub fn distance(p: &Point, q: &Point, norm: NormKind) -> Result<f64> {
    norm.distance(p, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxMode {
    Centered,
    Cornered,
}

/// An axis-aligned box `Λ_L(x)` of `side^d` sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSpec {
    anchor: Point,
    side: u64,
    mode: BoxMode,
}

impl BoxSpec {
    /// Box of odd side `side` centered at `center`.
    pub fn centered(center: Point, side: u64) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("box side must be positive"));
        }
        if side % 2 == 0 {
            return Err(Error::invalid(format!(
                "centered box requires an odd side, got {side}"
            )));
        }
        Ok(BoxSpec {
            anchor: center,
            side,
            mode: BoxMode::Centered,
        })
    }

    /// Box with `corner` as its lexicographically smallest site.
    pub fn cornered(corner: Point, side: u64) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("box side must be positive"));
        }
        Ok(BoxSpec {
            anchor: corner,
            side,
            mode: BoxMode::Cornered,
        })
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }

    pub fn side(&self) -> u64 {
        self.side
    }

    pub fn mode(&self) -> BoxMode {
        self.mode
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    /// Smallest coordinate per axis.
    pub fn min_corner(&self) -> Point {
        match self.mode {
            BoxMode::Cornered => self.anchor.clone(),
            BoxMode::Centered => {
                let half = (self.side / 2) as i64;
                Point::new(self.anchor.coords().iter().map(|c| c - half).collect())
            }
        }
    }

    pub fn site_count(&self) -> u128 {
        (self.side as u128).pow(self.dim() as u32)
    }

    pub fn contains(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        let min = self.min_corner();
        p.coords()
            .iter()
            .zip(min.coords())
            .all(|(c, lo)| *c >= *lo && (*c - *lo) < self.side as i64)
    }

    /// Lexicographic enumeration of all sites.
    pub fn sites(&self) -> BoxSites {
        BoxSites {
            min: self.min_corner(),
            side: self.side,
            next: 0,
            total: self.site_count(),
        }
    }

    /// Linear (lexicographic) index of a contained site.
    pub fn index_of(&self, p: &Point) -> Option<u64> {
        if !self.contains(p) {
            return None;
        }
        let min = self.min_corner();
        let mut idx: u128 = 0;
        for (c, lo) in p.coords().iter().zip(min.coords()) {
            idx = idx * self.side as u128 + (*c - *lo) as u128;
        }
        u64::try_from(idx).ok()
    }

    /// Inverse of `index_of`.
    pub fn site_at(&self, index: u64) -> Point {
        let min = self.min_corner();
        let d = self.dim();
        let mut rem = index as u128;
        let mut coords = vec![0i64; d];
        for axis in (0..d).rev() {
            coords[axis] = min.coords()[axis] + (rem % self.side as u128) as i64;
            rem /= self.side as u128;
        }
        Point::new(coords)
    }

    /// Maximal pairwise distance, in closed form: every axis contributes an
    /// extreme difference of `side - 1`.
    pub fn diameter(&self, norm: NormKind) -> f64 {
        let span = (self.side - 1) as f64;
        match norm {
            NormKind::Euclidean => span * (self.dim() as f64).sqrt(),
            NormKind::Sup => span,
            NormKind::Taxicab => span * self.dim() as f64,
        }
    }
}

/// Iterator over box sites in lexicographic order.
pub struct BoxSites {
    min: Point,
    side: u64,
    next: u128,
    total: u128,
}

impl Iterator for BoxSites {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        if self.next >= self.total {
            return None;
        }
        let mut rem = self.next;
        let d = self.min.dim();
        let mut coords = vec![0i64; d];
        for axis in (0..d).rev() {
            coords[axis] = self.min.coords()[axis] + (rem % self.side as u128) as i64;
            rem /= self.side as u128;
        }
        self.next += 1;
        Some(Point::new(coords))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = (self.total - self.next) as usize;
        (rem, Some(rem))
    }
}

/// Minimal odd integer strictly larger than `x`.
fn minimal_odd_above(x: f64) -> u64 {
    let mut k = x.floor() as i64 + 1;
    if (k as f64) <= x {
        k += 1; // guards against floor(x) + 1 == x for integral x
    }
    if k < 1 {
        k = 1;
    }
    if k % 2 == 0 {
        k += 1;
    }
    k as u64
}

/// The annulus `B_L(x)`: sites of the centered box of side `L^+` outside the
/// centered box of side `L^-`, where `L^+`/`L^-` are the minimal odd integers
/// above `L` and `L/2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    outer: BoxSpec,
    inner: BoxSpec,
}

impl AnnulusSpec {
    pub fn around(center: Point, l: f64) -> Result<Self> {
        if !l.is_finite() || l <= 0.0 {
            return Err(Error::invalid(format!("annulus scale must be positive, got {l}")));
        }
        let outer_side = minimal_odd_above(l);
        let inner_side = minimal_odd_above(l / 2.0);
        let outer = BoxSpec::centered(center.clone(), outer_side)?;
        let inner = BoxSpec::centered(center, inner_side)?;
        Ok(AnnulusSpec { outer, inner })
    }

    pub fn outer(&self) -> &BoxSpec {
        &self.outer
    }

    pub fn inner(&self) -> &BoxSpec {
        &self.inner
    }

    /// An annulus degenerates to empty when `L^+ = L^-`.
    pub fn is_empty(&self) -> bool {
        self.inner.side() >= self.outer.side()
    }

    pub fn site_count(&self) -> u128 {
        if self.is_empty() {
            0
        } else {
            self.outer.site_count() - self.inner.site_count()
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.outer.contains(p) && !self.inner.contains(p)
    }

    /// Sites of the annulus in lexicographic order.
    pub fn sites(&self) -> impl Iterator<Item = Point> + '_ {
        self.outer.sites().filter(move |p| !self.inner.contains(p))
    }
}

/// Free function mirroring the construction of `B_L(x)`.
pub fn annulus(center: Point, l: f64) -> Result<AnnulusSpec> {
    AnnulusSpec::around(center, l)
}
