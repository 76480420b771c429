//! The uniqueness decoder: find every product matrix that agrees with the
//! observed entries and succeed exactly when there is only one.
//!
//! The factors are exactly uniform, so every realization is typical and the
//! search runs over the full product set.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_budget, Error, Result};
use crate::model::{for_each_source, generate_source, multiply_into, product, ModelParams, ProductMatrix, Semiring, SeedSpec};
use crate::sampling::{normal_ci, sample_locations, LocationSequence, Z95};

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;
pub const DEFAULT_LOCATION_BUDGET: u128 = 100_000;

/// Observed cells and the source values found there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Observation {
    pub locs: LocationSequence,
    pub values: Vec<u64>,
}

impl Observation {
    pub fn new(locs: LocationSequence, values: Vec<u64>, params: &ModelParams) -> Result<Self> {
        if locs.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} locations but {} values",
                locs.len(),
                values.len()
            )));
        }
        if locs.m() != params.m() {
            return Err(Error::DimensionMismatch(format!(
                "locations are on a {0}x{0} grid, params have m={1}",
                locs.m(),
                params.m()
            )));
        }
        let (_, max) = params.entry_range();
        if let Some(v) = values.iter().find(|&&v| v > max) {
            return Err(Error::InvalidInput(format!("observed value {v} exceeds the entry maximum {max}")));
        }
        Ok(Observation { locs, values })
    }

    /// Reveal `s` at `locs`.
    pub fn reveal(s: &ProductMatrix, locs: &LocationSequence) -> Self {
        let values = locs.locations().iter().map(|&(i, j)| s.get(i, j)).collect();
        Observation { locs: locs.clone(), values }
    }

    fn cell_indices(&self) -> Vec<usize> {
        let m = self.locs.m();
        self.locs.locations().iter().map(|&(i, j)| i * m + j).collect()
    }

    fn matches(&self, cells: &[usize], s: &[u64]) -> bool {
        cells.iter().zip(&self.values).all(|(&c, &y)| s[c] == y)
    }
}

fn to_product(m: usize, s: &[u64]) -> ProductMatrix {
    ProductMatrix::from_raw(m, s.to_vec())
}

fn check_obs(obs: &Observation, params: &ModelParams) -> Result<()> {
    Observation::new(obs.locs.clone(), obs.values.clone(), params).map(|_| ())
}

/// Brute force: every factor pair, multiplied out and compared.
pub fn enumerate_consistent(obs: &Observation, params: &ModelParams, budget: u128) -> Result<BTreeSet<ProductMatrix>> {
    check_obs(obs, params)?;
    let cells = obs.cell_indices();
    let mut out = BTreeSet::new();
    for_each_source(params, budget, |_, _, s| {
        if obs.matches(&cells, s) {
            out.insert(to_product(params.m(), s));
        }
    })?;
    Ok(out)
}

/// Backtracking search over the factor digits.
///
/// Digits are assigned in the order `U` row 0, `V` column 0, `U` row 1,
/// `V` column 1, and so on. Each observed cell `(i, j)` is checked as soon
/// as both `U` row `i` and `V` column `j` are complete, and the branch is
/// cut on the first mismatch.
pub fn pruned_consistent(obs: &Observation, params: &ModelParams, budget: u128) -> Result<BTreeSet<ProductMatrix>> {
    check_obs(obs, params)?;
    check_budget(params.num_factor_pairs(), budget)?;
    let mut search = Search::new(obs, params);
    search.descend(0);
    Ok(search.found)
}

struct Search<'a> {
    params: &'a ModelParams,
    m: usize,
    r: usize,
    /// Observed value per cell, row-major.
    observed: Vec<Option<u64>>,
    /// Variable order as (is_v, index into u or v buffer).
    order: Vec<(bool, usize)>,
    /// Cells that become checkable after assigning position `p` of `order`.
    checks: Vec<Vec<(usize, usize)>>,
    u: Vec<u64>,
    v: Vec<u64>,
    s: Vec<u64>,
    found: BTreeSet<ProductMatrix>,
}

impl<'a> Search<'a> {
    fn new(obs: &Observation, params: &'a ModelParams) -> Self {
        let (m, r) = (params.m(), params.r());
        let mut observed = vec![None; m * m];
        for (&(i, j), &y) in obs.locs.locations().iter().zip(&obs.values) {
            observed[i * m + j] = Some(y);
        }
        let mut order = Vec::with_capacity(2 * m * r);
        let mut checks = Vec::with_capacity(2 * m * r);
        for t in 0..m {
            for k in 0..r {
                order.push((false, t * r + k));
                checks.push(Vec::new());
            }
            // U row t done: cells (t, j) for every finished V column j < t.
            *checks.last_mut().unwrap() = (0..t).filter(|&j| observed[t * m + j].is_some()).map(|j| (t, j)).collect();
            for k in 0..r {
                order.push((true, k * m + t));
                checks.push(Vec::new());
            }
            // V column t done: cells (i, t) for every finished U row i <= t.
            *checks.last_mut().unwrap() = (0..=t).filter(|&i| observed[i * m + t].is_some()).map(|i| (i, t)).collect();
        }
        Search {
            params,
            m,
            r,
            observed,
            order,
            checks,
            u: vec![0; m * r],
            v: vec![0; r * m],
            s: vec![0; m * m],
            found: BTreeSet::new(),
        }
    }

    fn cell_value(&self, i: usize, j: usize) -> u64 {
        let acc: u64 = (0..self.r).map(|k| self.u[i * self.r + k] * self.v[k * self.m + j]).sum();
        match self.params.semiring() {
            Semiring::IntegerProduct => acc,
            Semiring::ModQProduct => acc % self.params.q(),
        }
    }

    fn descend(&mut self, pos: usize) {
        if pos == self.order.len() {
            multiply_into(&self.u, &self.v, self.m, self.r, self.params.q(), self.params.semiring(), &mut self.s);
            self.found.insert(to_product(self.m, &self.s));
            return;
        }
        let (is_v, idx) = self.order[pos];
        for digit in 0..self.params.q() {
            if is_v {
                self.v[idx] = digit;
            } else {
                self.u[idx] = digit;
            }
            let ok = self.checks[pos]
                .iter()
                .all(|&(i, j)| self.observed[i * self.m + j] == Some(self.cell_value(i, j)));
            if ok {
                self.descend(pos + 1);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecodeKind {
    Unique,
    Ambiguous,
}

/// Decoder verdict. Ambiguous outcomes still commit to the lexicographically
/// least consistent matrix so the estimator is a deterministic function of
/// the observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeOutcome {
    pub kind: DecodeKind,
    pub reconstruction: ProductMatrix,
    pub consistent_count: usize,
}

impl DecodeOutcome {
    fn from_set(set: BTreeSet<ProductMatrix>) -> Result<Self> {
        let count = set.len();
        let reconstruction = set
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidInput("no source is consistent with the observation".into()))?;
        let kind = if count == 1 { DecodeKind::Unique } else { DecodeKind::Ambiguous };
        Ok(DecodeOutcome { kind, reconstruction, consistent_count: count })
    }

    pub fn is_unique(&self) -> bool {
        self.kind == DecodeKind::Unique
    }
}

pub fn decode(obs: &Observation, params: &ModelParams, budget: u128) -> Result<DecodeOutcome> {
    DecodeOutcome::from_set(pruned_consistent(obs, params, budget)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorRateMode {
    ExactAverage,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRateReport {
    pub params: ModelParams,
    pub n: usize,
    pub mode: ErrorRateMode,
    pub pe: f64,
    /// Failure weight: ambiguous trials (Monte Carlo) or ambiguous
    /// (factor pair, location set) combinations (exact).
    pub failures: u128,
    pub trials: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_pairs: Option<u128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location_sets: Option<u128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95: Option<(f64, f64)>,
}

/// `C(n, k)`, saturating.
pub(crate) fn binomial_count(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(x) => x / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { return };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Distinct products with their factor-pair multiplicities, in lexicographic order.
pub(crate) fn product_distribution(params: &ModelParams, budget: u128) -> Result<Vec<(Vec<u64>, u64)>> {
    let mut tally: HashMap<Vec<u64>, u64> = HashMap::new();
    for_each_source(params, budget, |_, _, s| {
        *tally.entry(s.to_vec()).or_default() += 1;
    })?;
    let mut out: Vec<_> = tally.into_iter().collect();
    out.sort();
    Ok(out)
}

/// Exact `P_e` averaged over all factor pairs and all `n`-subsets of cells.
///
/// For each location set the distinct products are grouped by their
/// observed values; a group holding more than one product is exactly the
/// set of sources on which `decode` reports ambiguity.
pub fn exact_error_rate(params: &ModelParams, n: usize, budget: u128, location_budget: u128) -> Result<ErrorRateReport> {
    let m = params.m();
    let cells = m * m;
    if n > cells {
        return Err(Error::TooManySamples { n, m });
    }
    let subsets = binomial_count(cells as u64, n as u64);
    check_budget(subsets, location_budget)?;
    let dist = product_distribution(params, budget)?;
    let pairs = params.num_factor_pairs();

    let mut subset_list = Vec::new();
    for_each_subset(cells, n, |c| subset_list.push(c.to_vec()));
    let failures: u128 = subset_list
        .par_iter()
        .map(|subset| {
            let mut groups: HashMap<Vec<u64>, (u32, u64)> = HashMap::new();
            for (s, weight) in &dist {
                let key: Vec<u64> = subset.iter().map(|&c| s[c]).collect();
                let g = groups.entry(key).or_insert((0, 0));
                g.0 += 1;
                g.1 += weight;
            }
            groups.values().filter(|(k, _)| *k > 1).map(|&(_, w)| w as u128).sum::<u128>()
        })
        .sum();
    let trials = pairs * subsets;
    Ok(ErrorRateReport {
        params: *params,
        n,
        mode: ErrorRateMode::ExactAverage,
        pe: failures as f64 / trials as f64,
        failures,
        trials,
        factor_pairs: Some(pairs),
        location_sets: Some(subsets),
        ci95: None,
    })
}

/// Monte Carlo `P_e`: each trial draws a fresh source and location set from
/// its own seed stream and runs the pruned decoder.
pub fn mc_error_rate(params: &ModelParams, n: usize, trials: u64, seed: SeedSpec, budget: u128) -> Result<ErrorRateReport> {
    check_budget(params.num_factor_pairs(), budget)?;
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let m = params.m();
    if n > m * m {
        return Err(Error::TooManySamples { n, m });
    }
    let failures = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let trial = seed.child(t);
            let s = product(&generate_source(params, trial.child(0)), params)?;
            let locs = sample_locations(m, n, trial.child(1))?;
            let outcome = decode(&Observation::reveal(&s, &locs), params, budget)?;
            Ok(u64::from(!(outcome.is_unique() && outcome.reconstruction == s)))
        })
        .sum::<Result<u64>>()?;
    Ok(ErrorRateReport {
        params: *params,
        n,
        mode: ErrorRateMode::MonteCarlo,
        pe: failures as f64 / trials as f64,
        failures: failures as u128,
        trials: trials as u128,
        factor_pairs: None,
        location_sets: None,
        ci95: Some(normal_ci(failures, trials, Z95)),
    })
}
