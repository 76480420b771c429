//! Observation patterns, the row/column coverage event, and the
//! balls-in-bins analysis behind it.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SeedSpec;

/// Distinct observed cells in sampling order, 0-based `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLocations")]
pub struct LocationSequence {
    m: usize,
    locations: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLocations {
    m: usize,
    locations: Vec<(usize, usize)>,
}

impl TryFrom<RawLocations> for LocationSequence {
    type Error = Error;

    fn try_from(raw: RawLocations) -> Result<Self> {
        LocationSequence::new(raw.m, raw.locations)
    }
}

impl LocationSequence {
    pub fn new(m: usize, locations: Vec<(usize, usize)>) -> Result<Self> {
        if locations.len() > m * m {
            return Err(Error::TooManySamples { n: locations.len(), m });
        }
        let mut seen = HashSet::with_capacity(locations.len());
        for &(i, j) in &locations {
            if i >= m || j >= m {
                return Err(Error::InvalidInput(format!("cell ({i}, {j}) is outside a {m}x{m} grid")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidInput(format!("cell ({i}, {j}) sampled twice")));
            }
        }
        Ok(LocationSequence { m, locations })
    }

    /// Cells given as row-major indices `i*m + j`.
    pub fn from_cell_indices(m: usize, cells: &[usize]) -> Result<Self> {
        Self::new(m, cells.iter().map(|&c| (c / m, c % m)).collect())
    }

    pub fn empty(m: usize) -> Self {
        LocationSequence { m, locations: Vec::new() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[(usize, usize)] {
        &self.locations
    }

    /// The first `n` samples.
    pub fn prefix(&self, n: usize) -> LocationSequence {
        LocationSequence { m: self.m, locations: self.locations[..n.min(self.len())].to_vec() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A uniformly random `n`-subset of the `m^2` cells in random order.
///
/// Built as the length-`n` prefix of a lazily materialized Fisher-Yates
/// shuffle, so the same seed with a larger `n` extends the same sequence.
pub fn sample_locations(m: usize, n: usize, seed: SeedSpec) -> Result<LocationSequence> {
    let cells = m * m;
    if n > cells {
        return Err(Error::TooManySamples { n, m });
    }
    let mut rng = seed.rng();
    // Positions whose content differs from the identity permutation.
    let mut displaced: HashMap<usize, usize> = HashMap::with_capacity(2 * n);
    let mut locations = Vec::with_capacity(n);
    for k in 0..n {
        let j = rng.gen_range(k..cells);
        let at_j = *displaced.get(&j).unwrap_or(&j);
        let at_k = *displaced.get(&k).unwrap_or(&k);
        displaced.insert(j, at_k);
        locations.push((at_j / m, at_j % m));
    }
    Ok(LocationSequence { m, locations })
}

/// Per-row and per-column sample counts and the coverage event for threshold `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageStats {
    pub row_counts: Vec<usize>,
    pub col_counts: Vec<usize>,
    pub min_row: usize,
    pub min_col: usize,
    pub r: usize,
    pub in_g: bool,
}

pub fn coverage_check(locs: &LocationSequence, r: usize) -> CoverageStats {
    let m = locs.m;
    let mut row_counts = vec![0; m];
    let mut col_counts = vec![0; m];
    for &(i, j) in &locs.locations {
        row_counts[i] += 1;
        col_counts[j] += 1;
    }
    let min_row = row_counts.iter().copied().min().unwrap_or(0);
    let min_col = col_counts.iter().copied().min().unwrap_or(0);
    CoverageStats { in_g: min_row >= r && min_col >= r, row_counts, col_counts, min_row, min_col, r }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln C(n, k)` for every `k < r` (and `k <= n`), by running sums of logs.
fn ln_binomials(n: u64, upto: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(upto as usize);
    let mut acc = 0.0;
    for k in 0..upto.min(n + 1) {
        if k > 0 {
            acc += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        out.push(acc);
    }
    out
}

/// Exact `Pr(Binomial(n, p) < r)`, summed in log space.
pub fn binomial_tail_below(n: u64, p: f64, r: u64) -> f64 {
    if r == 0 {
        return 0.0;
    }
    if r > n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms: Vec<f64> = ln_binomials(n, r)
        .into_iter()
        .enumerate()
        .map(|(k, lc)| lc + k as f64 * lp + (n - k as u64) as f64 * lq)
        .collect();
    log_sum_exp(&terms).exp().min(1.0)
}

/// Exact `Pr(X < r)` for `X` hypergeometric: `draws` cells taken without
/// replacement from `population`, of which `marked` are of interest. With
/// `population = m^2` and `marked = m` this is the true marginal law of a
/// row count.
pub fn hypergeometric_tail_below(population: u64, marked: u64, draws: u64, r: u64) -> f64 {
    let ln_c = |n: u64, k: u64| -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        let k = k.min(n - k);
        (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
    };
    let total = ln_c(population, draws);
    let terms: Vec<f64> = (0..r)
        .map(|k| ln_c(marked, k) + ln_c(population - marked, draws.saturating_sub(k)) - total)
        .filter(|t| t.is_finite())
        .collect();
    if terms.is_empty() {
        return 0.0;
    }
    log_sum_exp(&terms).exp().min(1.0)
}

/// Multiplicative Chernoff lower-tail bound `exp(-(mu/2)(1 - r/mu)^2)` on
/// `Pr(X < r)` for a sum of independent indicators with mean `mu >= r`.
pub fn chernoff_lower_tail(mu: f64, r: f64) -> Result<f64> {
    if !(mu > 0.0) || r > mu || r < 0.0 {
        return Err(Error::PreconditionFailed(format!(
            "Chernoff lower tail needs 0 <= r <= mu with mu > 0 (r={r}, mu={mu})"
        )));
    }
    let d = 1.0 - r / mu;
    Ok((-(mu / 2.0) * d * d).exp())
}

/// Per-bin Chernoff bound for `n = alpha m ln m` balls in `m` bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernoffBinBound {
    /// Mean balls per bin, `alpha ln m`.
    pub mu: f64,
    pub chernoff: f64,
    /// `m^{-alpha/2}`, the `r -> 0` form.
    pub simplified: f64,
}

pub fn chernoff_bin_bound(m: usize, r: usize, alpha: f64) -> Result<ChernoffBinBound> {
    if m == 0 || !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!("need m >= 1 and alpha > 0 (m={m}, alpha={alpha})")));
    }
    let mu = alpha * (m as f64).ln();
    let chernoff = chernoff_lower_tail(mu, r as f64)?;
    Ok(ChernoffBinBound { mu, chernoff, simplified: (m as f64).powf(-alpha / 2.0) })
}

/// `ceil(alpha m ln m)` clamped to `m^2`.
pub fn samples_for_alpha(m: usize, alpha: f64) -> usize {
    let raw = (alpha * m as f64 * (m as f64).ln()).ceil();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(m * m)
    }
}

/// Normal-approximation interval `p_hat +- z sqrt(p_hat(1-p_hat)/trials)`, clipped to `[0, 1]`.
pub fn normal_ci(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let p = successes as f64 / trials as f64;
    let half = z * (p * (1.0 - p) / trials as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

pub const Z95: f64 = 1.959_963_984_540_054;
pub const Z99: f64 = 2.575_829_303_548_901;

/// Coverage failure: measured, exact single-bin tail, and bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinsReport {
    pub m: usize,
    pub r: usize,
    pub alpha: f64,
    pub n_used: usize,
    /// `Pr(Binomial(n_used, 1/m) < r)`.
    pub exact_marginal_tail: f64,
    /// `2m * exact_marginal_tail`; may exceed 1.
    pub union_reference: f64,
    /// `None` when `r > alpha ln m`, where the bound does not apply.
    pub chernoff_bound: Option<f64>,
    /// `2m * m^{-alpha/2}`; may exceed 1.
    pub paper_bound: f64,
    pub mc_failures: u64,
    pub mc_estimate: f64,
    pub mc_ci95: (f64, f64),
    pub trials: u64,
}

pub fn coverage_failure_report(m: usize, r: usize, alpha: f64, trials: u64, seed: SeedSpec) -> Result<BinsReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    if m == 0 || !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!("need m >= 1 and alpha > 0 (m={m}, alpha={alpha})")));
    }
    let n_used = samples_for_alpha(m, alpha);
    let exact_marginal_tail = binomial_tail_below(n_used as u64, 1.0 / m as f64, r as u64);
    let chernoff_bound = match chernoff_bin_bound(m, r, alpha) {
        Ok(b) => Some(b.chernoff),
        Err(Error::PreconditionFailed(_)) => None,
        Err(e) => return Err(e),
    };
    let paper_bound = 2.0 * m as f64 * (m as f64).powf(-alpha / 2.0);

    let failures = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let locs = sample_locations(m, n_used, seed.child(t))?;
            Ok(u64::from(!coverage_check(&locs, r).in_g))
        })
        .sum::<Result<u64>>()?;

    Ok(BinsReport {
        m,
        r,
        alpha,
        n_used,
        exact_marginal_tail,
        union_reference: 2.0 * m as f64 * exact_marginal_tail,
        chernoff_bound,
        paper_bound,
        mc_failures: failures,
        mc_estimate: failures as f64 / trials as f64,
        mc_ci95: normal_ci(failures, trials, Z95),
        trials,
    })
}
