//! Closed-form quantities and bound calculators: the chemical-distance
//! exponent, Chernoff large-deviation rates, scale ladders, the
//! complete-graph site-bond model, shell sums and the geometric-series
//! inequality used by the lower-bound iteration.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::{E, LN_2};

/// The chemical-distance exponent `Delta(s, d) = log 2 / log(2d / s)`.
///
/// Well defined for `0 < s < 2d`; the interesting regime is `d <= s < 2d`
/// where `Delta >= 1`, growing without bound as `s` approaches `2d`.
pub fn delta(s: f64, d: u32) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::invalid(format!("s must be positive, got {s}")));
    }
    let two_d = 2.0 * d as f64;
    if s >= two_d {
        return Err(Error::invalid(format!(
            "Delta diverges for s >= 2d (s = {s}, 2d = {two_d})"
        )));
    }
    Ok(LN_2 / (two_d / s).ln())
}

/// Depth scale `K = log log N / log(1 / gamma)`: the level at which the
/// recursive box scales `N^{gamma^k}` reach order `(log N)^{o(1)}`.
pub fn depth_k(n_value: f64, gamma: f64) -> Result<f64> {
    if !(n_value > E) {
        return Err(Error::invalid("N must exceed e"));
    }
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::invalid("gamma must lie in (0, 1)"));
    }
    Ok(n_value.ln().ln() / (1.0 / gamma).ln())
}

/// The companion integer depth: the maximal positive `n` with
/// `n log(1/gamma) <= log log N - eps * log log log N`.
pub fn depth_n(n_value: f64, gamma: f64, eps: f64) -> Result<u32> {
    if !(n_value > E) {
        return Err(Error::invalid("N must exceed e"));
    }
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::invalid("gamma must lie in (0, 1)"));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::invalid("eps must be nonnegative"));
    }
    let loglog = n_value.ln().ln();
    let rhs = loglog - eps * loglog.ln();
    let step = (1.0 / gamma).ln();
    let n = (rhs / step).floor();
    if !(n >= 1.0) {
        return Err(Error::invalid(format!(
            "no positive depth: N = {n_value} is too small for gamma = {gamma}, eps = {eps}"
        )));
    }
    Ok(n as u32)
}

/// The Chernoff rate for a Bernoulli(q) mean pushed below `q' <= q`:
/// `psi(q', q) = (1 - q') log((1 - q') / (1 - q)) - q' log(q / q')`,
/// with `0 log 0 = 0` and `psi = +inf` when `q = 1 > q'`.
pub fn chernoff_rate(q_prime: f64, q: f64) -> Result<f64> {
    for v in [q_prime, q] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("probability out of range: {v}")));
        }
    }
    if q_prime > q {
        return Err(Error::invalid(format!(
            "rate needs q' <= q, got q' = {q_prime}, q = {q}"
        )));
    }
    if q_prime == q {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(f64::INFINITY);
    }
    let first = (1.0 - q_prime) * ((1.0 - q_prime) / (1.0 - q)).ln();
    let second = if q_prime == 0.0 {
        0.0
    } else {
        q_prime * (q / q_prime).ln()
    };
    Ok(first - second)
}

/// The explicit lower comparator for the rate:
/// `(1 - alpha)(1 - q')[log(1/(1-q)) - C]`, valid when
/// `(1 - q') >= (1 - q)^alpha`. `C` is caller-supplied; the inequality is
/// certified empirically for concrete values rather than assumed.
pub fn chernoff_rate_floor(q_prime: f64, q: f64, alpha: f64, c: f64) -> Result<f64> {
    for v in [q_prime, q] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("probability out of range: {v}")));
        }
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha must lie in [0, 1)"));
    }
    if (1.0 - q_prime) < (1.0 - q).powf(alpha) {
        return Err(Error::invalid(
            "floor requires (1 - q') >= (1 - q)^alpha",
        ));
    }
    if q_prime == 1.0 {
        return Ok(0.0);
    }
    Ok((1.0 - alpha) * (1.0 - q_prime) * ((1.0 / (1.0 - q)).ln() - c))
}

/// The scale ladder: `ell_n` from the single-parameter family
/// `exp((1 + a)^(n-1))` with `a = (2d - s') / s'`, rescaled so the first
/// rung is about `ell_0`, and everything derived from it.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleSequence {
    pub s: f64,
    pub s_prime: f64,
    pub d: u32,
    pub a: f64,
    pub rho0: f64,
    /// `ell_1 ..= ell_depth`.
    pub ell: Vec<u64>,
    /// `N_0 ..= N_depth`, exact: `N_n = N_0 * prod ell_k`.
    #[serde(serialize_with = "serialize_biguints")]
    pub n_values: Vec<BigUint>,
    /// `ln N_0 ..= ln N_depth`.
    pub ln_n: Vec<f64>,
    /// `r_n = 1 - 6 ell_n^{d-s}`.
    pub r: Vec<f64>,
    /// `p_n = 1 - N_n^{s-s'}`.
    pub p: Vec<f64>,
    /// `rho_0 ..= rho_depth`, `rho_n = rho_0 prod r_k p_k`.
    pub rho: Vec<f64>,
    /// `inf_n ell_{n+1}^{-s'} prod_{k<=n} ell_k^{2d-s'}` over the built
    /// rungs; infinite when depth < 2.
    pub c0: f64,
}

fn serialize_biguints<S: serde::Serializer>(v: &[BigUint], ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.to_string())?;
    }
    seq.end()
}

impl ScaleSequence {
    pub fn depth(&self) -> u32 {
        self.ell.len() as u32
    }

    /// `ell_n`, 1-based.
    pub fn ell_at(&self, n: u32) -> u64 {
        self.ell[n as usize - 1]
    }

    /// `N_n`, 0-based.
    pub fn n_at(&self, n: u32) -> &BigUint {
        &self.n_values[n as usize]
    }
}

/// Natural log of the ladder term `ell_{n+1}^{-s'} prod_{k<=n} ell_k^{2d-s'}`
/// for the un-rounded rungs `ell_k = exp((1+a)^(k-1))`. The growth rate `a`
/// is tuned exactly so this telescopes to `-s'` independently of `n`.
pub fn unrounded_ladder_term_ln(s_prime: f64, d: u32, n: u32) -> f64 {
    let a = (2.0 * d as f64 - s_prime) / s_prime;
    let g = (1.0 + a).powi(n as i32);
    -s_prime * g + (2.0 * d as f64 - s_prime) * (g - 1.0) / a
}

/// Build the ladder of depth `depth` (that many `ell` rungs).
pub fn make_scale_sequence(
    ell0: u64,
    n0: u64,
    s: f64,
    s_prime: f64,
    d: u32,
    rho0: f64,
    depth: u32,
) -> Result<ScaleSequence> {
    if d == 0 || ell0 == 0 || n0 == 0 || depth == 0 {
        return Err(Error::invalid("d, ell0, N0 and depth must be positive"));
    }
    if !(s > 0.0) || !(s_prime > s) || !(s_prime < 2.0 * d as f64) {
        return Err(Error::invalid(format!(
            "need 0 < s < s' < 2d, got s = {s}, s' = {s_prime}, d = {d}"
        )));
    }
    if !(0.0 < rho0 && rho0 < 1.0) {
        return Err(Error::invalid("rho0 must lie in (0, 1)"));
    }
    let a = (2.0 * d as f64 - s_prime) / s_prime;
    let scale = (ell0 as f64 / E).max(1.0);

    let mut ell = Vec::with_capacity(depth as usize);
    for k in 1..=depth {
        let ln_rung = scale.ln() + (1.0 + a).powi(k as i32 - 1);
        if ln_rung > 43.0 {
            return Err(Error::invalid(format!(
                "ladder rung ell_{k} overflows 64 bits; lower the depth"
            )));
        }
        ell.push(ln_rung.exp().round() as u64);
    }

    let mut n_values = vec![BigUint::from(n0)];
    let mut ln_n = vec![(n0 as f64).ln()];
    for &l in &ell {
        let prev = n_values.last().unwrap().clone();
        n_values.push(prev * BigUint::from(l));
        ln_n.push(ln_n.last().unwrap() + (l as f64).ln());
    }

    let r: Vec<f64> = ell
        .iter()
        .map(|&l| 1.0 - 6.0 * (l as f64).powf(d as f64 - s))
        .collect();
    let p: Vec<f64> = ln_n[1..]
        .iter()
        .map(|&ln| 1.0 - ((s - s_prime) * ln).exp())
        .collect();
    let mut rho = vec![rho0];
    for k in 0..ell.len() {
        rho.push(rho[k] * r[k] * p[k]);
    }

    let mut c0 = f64::INFINITY;
    let mut ln_prod = 0.0;
    for n in 1..ell.len() {
        ln_prod += (2.0 * d as f64 - s_prime) * (ell[n - 1] as f64).ln();
        let term = ln_prod - s_prime * (ell[n] as f64).ln();
        c0 = c0.min(term.exp());
    }

    Ok(ScaleSequence {
        s,
        s_prime,
        d,
        a,
        rho0,
        ell,
        n_values,
        ln_n,
        r,
        p,
        rho,
        c0,
    })
}

/// Parameters of the complete-graph site-bond model and its thresholds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompleteGraphParams {
    pub n: u64,
    pub r: f64,
    pub p: f64,
    pub r_prime: f64,
    pub p_prime: f64,
}

impl CompleteGraphParams {
    pub fn new(n: u64, r: f64, p: f64, r_prime: f64, p_prime: f64) -> Result<Self> {
        for v in [r, p, r_prime, p_prime] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("probability out of range: {v}")));
            }
        }
        Ok(CompleteGraphParams {
            n,
            r,
            p,
            r_prime,
            p_prime,
        })
    }
}

/// Sample the model once: occupy each of the `n` vertices with probability
/// `r`, then each bond between occupied vertices with probability `p`, and
/// return the size of the largest component of occupied sites (0 when no
/// vertex is occupied). Bonds with an unoccupied endpoint never matter, so
/// their coins are not drawn; the stream is vertices first, then the
/// occupied pairs in lexicographic order.
pub fn complete_graph_sample(params: &CompleteGraphParams, seed: u64) -> u64 {
    let n = params.n as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let occupied: Vec<bool> = (0..n).map(|_| rng.random_bool(params.r)).collect();
    let mut uf = crate::clusters::UnionFind::new(n);
    for i in 0..n {
        if !occupied[i] {
            continue;
        }
        for j in (i + 1)..n {
            if occupied[j] && rng.random_bool(params.p) {
                uf.union(i as u32, j as u32);
            }
        }
    }
    let mut best = 0u64;
    let mut sizes = std::collections::HashMap::new();
    for i in 0..n {
        if occupied[i] {
            let root = uf.find(i as u32);
            let e = sizes.entry(root).or_insert(0u64);
            *e += 1;
            best = best.max(*e);
        }
    }
    best
}

/// Exact distribution of the largest-component size by enumeration over all
/// `2^(n + n(n-1)/2)` configurations; `dist[k] = P(|C_n| = k)`. Feasible for
/// `n <= 6`.
pub fn complete_graph_exact_distribution(n: u64, r: f64, p: f64) -> Result<Vec<f64>> {
    if n == 0 || n > 6 {
        return Err(Error::invalid("exact enumeration supports 1 <= n <= 6"));
    }
    let n = n as usize;
    let mut dist = vec![0.0; n + 1];
    for vmask in 0u32..(1 << n) {
        let occupied = vmask.count_ones() as usize;
        let pv = r.powi(occupied as i32) * (1.0 - r).powi((n - occupied) as i32);
        let pairs: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|i| ((i + 1)..n as u32).map(move |j| (i, j)))
            .filter(|&(i, j)| vmask & (1 << i) != 0 && vmask & (1 << j) != 0)
            .collect();
        let e = pairs.len();
        for emask in 0u32..(1 << e) {
            let on = emask.count_ones() as usize;
            let pe = p.powi(on as i32) * (1.0 - p).powi((e - on) as i32);
            let mut uf = crate::clusters::UnionFind::new(n);
            for (bit, &(i, j)) in pairs.iter().enumerate() {
                if emask & (1 << bit) != 0 {
                    uf.union(i, j);
                }
            }
            let mut best = 0u64;
            let mut sizes = std::collections::HashMap::new();
            for i in 0..n as u32 {
                if vmask & (1 << i) != 0 {
                    let root = uf.find(i);
                    let c = sizes.entry(root).or_insert(0u64);
                    *c += 1;
                    best = best.max(*c);
                }
            }
            dist[best as usize] += pv * pe;
        }
    }
    Ok(dist)
}

/// The tail bound
/// `P(|C_n| <= p' r' n) <= e^{-n psi(r', r)} + e^{-(1/2)(n^2 r'^2 - n) psi(p', p)}`.
/// Values above 1 are returned as-is (the bound is vacuous there). Equal
/// thresholds are allowed and give a vacuous bound; reversed ones are an
/// error.
pub fn complete_graph_tail_bound(params: &CompleteGraphParams) -> Result<f64> {
    if params.r_prime > params.r || params.p_prime > params.p {
        return Err(Error::invalid(
            "tail bound needs r' <= r and p' <= p",
        ));
    }
    let n = params.n as f64;
    let psi_r = chernoff_rate(params.r_prime, params.r)?;
    let psi_p = chernoff_rate(params.p_prime, params.p)?;
    let term1 = (-n * psi_r).exp();
    let factor = 0.5 * (n * n * params.r_prime * params.r_prime - n);
    let exponent = factor * psi_p;
    let term2 = if exponent.is_nan() { 1.0 } else { (-exponent).exp() };
    Ok(term1 + term2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShellMode {
    /// Tuples with `prod n_i >= b^kappa`, summed with weight `n^-(1+alpha)`.
    AtLeast,
    /// Tuples with `prod n_i < b^kappa`, summed with weight `n^(alpha-1)`.
    Below,
}

/// A shell sum over `kappa`-tuples of positive integers constrained by the
/// product `b^kappa`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShellSumSpec {
    pub kappa: u32,
    pub b: f64,
    pub alpha: f64,
    pub mode: ShellMode,
}

impl ShellSumSpec {
    pub fn new(kappa: u32, b: f64, alpha: f64, mode: ShellMode) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::invalid("kappa must be positive"));
        }
        if !(b > 1.0) || !b.is_finite() {
            return Err(Error::invalid(format!("b must exceed 1, got {b}")));
        }
        if !alpha.is_finite() {
            return Err(Error::invalid("alpha must be finite"));
        }
        Ok(ShellSumSpec {
            kappa,
            b,
            alpha,
            mode,
        })
    }
}

/// Sum `prod n_i^(expo)` over tuples with `prod n_i < bound`, by exhaustive
/// recursion.
fn below_sum(kappa: u32, bound: f64, expo: f64, visited: &mut u64) -> Result<f64> {
    const BUDGET: u64 = 50_000_000;
    fn rec(
        dims_left: u32,
        bound: f64,
        prod_so_far: f64,
        weight: f64,
        expo: f64,
        visited: &mut u64,
        total: &mut f64,
    ) -> Result<()> {
        if dims_left == 0 {
            *total += weight;
            return Ok(());
        }
        let mut v = 1u64;
        loop {
            let prod = prod_so_far * v as f64;
            if prod >= bound {
                break;
            }
            *visited += 1;
            if *visited > BUDGET {
                return Err(Error::invalid(
                    "below-mode enumeration exceeds the iteration budget",
                ));
            }
            rec(
                dims_left - 1,
                bound,
                prod,
                weight * (v as f64).powf(expo),
                expo,
                visited,
                total,
            )?;
            v += 1;
        }
        Ok(())
    }
    let mut total = 0.0;
    rec(kappa, bound, 1.0, 1.0, expo, visited, &mut total)?;
    Ok(total)
}

/// Riemann zeta for `s > 1` by a truncated series plus the Euler-Maclaurin
/// integral tail; absolute error far below 1e-12 at this cutoff.
fn zeta(s: f64) -> f64 {
    let m = 2000u64;
    let mut sum = 0.0;
    for k in 1..m {
        sum += (k as f64).powf(-s);
    }
    let mf = m as f64;
    sum + mf.powf(1.0 - s) / (s - 1.0) + 0.5 * mf.powf(-s) + s * mf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * mf.powf(-s - 3.0) / 720.0
}

/// Evaluate the shell sum.
///
/// Below mode is an exact finite enumeration. At-least mode is the
/// complement: the full product sum `zeta(1 + alpha)^kappa` minus the
/// enumeration below the cutoff, with the zeta tail controlled by integral
/// comparison; relative error is far inside 1e-6.
pub fn shell_sum(spec: &ShellSumSpec) -> Result<f64> {
    let bound = spec.b.powi(spec.kappa as i32);
    let mut visited = 0u64;
    match spec.mode {
        ShellMode::Below => below_sum(spec.kappa, bound, spec.alpha - 1.0, &mut visited),
        ShellMode::AtLeast => {
            if !(spec.alpha > 0.0) {
                return Err(Error::invalid(
                    "at-least mode diverges for alpha <= 0",
                ));
            }
            let full = zeta(1.0 + spec.alpha).powi(spec.kappa as i32);
            let below = below_sum(spec.kappa, bound, -(1.0 + spec.alpha), &mut visited)?;
            Ok(full - below)
        }
    }
}

/// The closed-form right sides certified against the sums:
/// `(g b^{-alpha} log b)^kappa` for the at-least sum and
/// `(g b^{alpha} log b)^kappa` for the below sum.
pub fn shell_bound_rhs(spec: &ShellSumSpec, g: f64) -> Result<f64> {
    match spec.mode {
        ShellMode::AtLeast => {
            if !(spec.b > 1.0) {
                return Err(Error::invalid("the at-least bound needs b > 1"));
            }
            Ok((g * spec.b.powf(-spec.alpha) * spec.b.ln()).powi(spec.kappa as i32))
        }
        ShellMode::Below => {
            if !(spec.b >= E / 4.0) {
                return Err(Error::invalid("the below bound needs b >= e/4"));
            }
            Ok((g * spec.b.powf(spec.alpha) * spec.b.ln()).powi(spec.kappa as i32))
        }
    }
}

/// Both sides of the geometric-series inequality
/// `s - d (2g)^n + (s - d) sum_{k=1}^{n-1} (2g)^k >= (s - 2dg)(2g)^{n-1}`,
/// with equality at `n = 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn identity_2_9(s: f64, d: u32, gamma: f64, n: u32) -> Result<IdentityCheck> {
    let df = d as f64;
    if d == 0 || !(s > df && s < 2.0 * df) {
        return Err(Error::invalid("need s in (d, 2d)"));
    }
    if !(gamma > 0.0 && gamma < s / (2.0 * df)) {
        return Err(Error::invalid("need gamma in (0, s/(2d))"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let twog = 2.0 * gamma;
    let mut geom_sum = 0.0;
    for k in 1..n {
        geom_sum += twog.powi(k as i32);
    }
    let lhs = s - df * twog.powi(n as i32) + (s - df) * geom_sum;
    let rhs = (s - 2.0 * df * gamma) * twog.powi(n as i32 - 1);
    Ok(IdentityCheck {
        lhs,
        rhs,
        holds: lhs >= rhs,
    })
}
