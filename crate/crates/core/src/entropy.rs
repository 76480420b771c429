//! Exact entropies of small instances, by exhaustive tally.
//!
//! Everything here is in bits. Distributions are induced by the uniform
//! factor pairs: when two pairs share a product, that product carries both
//! pairs' mass, so `H(S)` is generally below `2rm log2 q`.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use crate::decoder::{product_distribution, Observation};
use crate::error::{check_budget, saturating_pow, Error, Result};
use crate::model::{for_each_source, is_prime, ModelParams, Semiring};
use crate::sampling::LocationSequence;

/// Slack for comparisons between exactly tallied entropies.
pub const ENTROPY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub value_bits: f64,
    /// Number of outcomes with positive probability.
    pub support_size: u128,
    /// Number of equally likely underlying states that were enumerated.
    pub states_enumerated: u128,
    pub exact: bool,
    pub method: String,
}

/// Entropy in bits of the empirical distribution given by `counts`.
pub fn entropy_from_counts<I: IntoIterator<Item = u64>>(counts: I) -> f64 {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    if total == 0.0 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

fn tally_entropy<K: Eq + Hash>(tally: &HashMap<K, u64>) -> f64 {
    entropy_from_counts(tally.values().copied())
}

/// `h2(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Calls `f` on every length-`len` digit string over `{0..q}`, lexicographically.
fn for_each_digits(len: usize, q: u64, mut f: impl FnMut(&[u64])) {
    let mut digits = vec![0u64; len];
    loop {
        f(&digits);
        let mut carried = true;
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < q {
                carried = false;
                break;
            }
            *d = 0;
        }
        if carried {
            return;
        }
    }
}

/// Exact `H(S)` of the product distribution induced by uniform factors.
pub fn exact_source_entropy(params: &ModelParams, budget: u128) -> Result<EntropyReport> {
    let dist = product_distribution(params, budget)?;
    Ok(EntropyReport {
        value_bits: entropy_from_counts(dist.iter().map(|(_, w)| *w)),
        support_size: dist.len() as u128,
        states_enumerated: params.num_factor_pairs(),
        exact: true,
        method: "tally of products over all factor pairs".into(),
    })
}

/// Rank over the rationals of a row-major integer matrix.
pub fn rank_over_rationals(rows: usize, cols: usize, data: &[u64]) -> usize {
    let mut a: Vec<Vec<i128>> = data.chunks(cols.max(1)).take(rows).map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&i| a[i][col] != 0) else { continue };
        a.swap(rank, p);
        for i in rank + 1..rows {
            if a[i][col] == 0 {
                continue;
            }
            let (pivot, factor) = (a[rank][col], a[i][col]);
            let mut g = 0i128;
            for j in 0..cols {
                a[i][j] = a[i][j] * pivot - a[rank][j] * factor;
                g = gcd(g, a[i][j]);
            }
            if g > 1 {
                a[i].iter_mut().for_each(|x| *x /= g);
            }
        }
        rank += 1;
    }
    rank
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ((acc as u128 * base as u128) % p as u128) as u64;
        }
        base = ((base as u128 * base as u128) % p as u128) as u64;
        exp >>= 1;
    }
    acc
}

/// Rank over the prime field with `p` elements.
pub fn rank_mod_prime(rows: usize, cols: usize, data: &[u64], p: u64) -> usize {
    let mut a: Vec<Vec<u64>> = data.chunks(cols.max(1)).take(rows).map(|r| r.iter().map(|&x| x % p).collect()).collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(piv) = (rank..rows).find(|&i| a[i][col] != 0) else { continue };
        a.swap(rank, piv);
        let inv = pow_mod(a[rank][col], p - 2, p);
        for i in rank + 1..rows {
            let factor = (a[i][col] as u128 * inv as u128 % p as u128) as u64;
            if factor == 0 {
                continue;
            }
            for j in 0..cols {
                let sub = (factor as u128 * a[rank][j] as u128 % p as u128) as u64;
                a[i][j] = (a[i][j] + p - sub) % p;
            }
        }
        rank += 1;
    }
    rank
}

fn rank_in(semiring: Semiring, q: u64, rows: usize, cols: usize, data: &[u64]) -> usize {
    match semiring {
        Semiring::IntegerProduct => rank_over_rationals(rows, cols, data),
        Semiring::ModQProduct => rank_mod_prime(rows, cols, data, q),
    }
}

/// `H(UV | V)` and how it splits between full-rank and singular `V`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VConditionalEntropy {
    pub h_total_bits: f64,
    /// `H(UV | V = v)` averaged over full-rank `v`; `None` when no `v` has rank `r`.
    pub h_given_fullrank_v_bits: Option<f64>,
    pub prob_v_fullrank: f64,
    /// `mr log2 q`, the value every full-rank conditional should equal.
    pub mr_log2_q: f64,
}

pub fn conditional_source_entropy_given_v(params: &ModelParams, budget: u128) -> Result<VConditionalEntropy> {
    check_budget(params.num_factor_pairs(), budget)?;
    let (m, r, q) = (params.m(), params.r(), params.q());
    let v_count = saturating_pow(q, (r * m) as u64) as f64;
    let mut h_total = 0.0;
    let mut h_fullrank = 0.0;
    let mut fullrank = 0u64;
    let mut s = vec![0u64; m * m];
    for_each_digits(r * m, q, |v| {
        let mut tally: HashMap<Vec<u64>, u64> = HashMap::new();
        for_each_digits(m * r, q, |u| {
            crate::model::multiply_into(u, v, m, r, q, params.semiring(), &mut s);
            *tally.entry(s.clone()).or_default() += 1;
        });
        let h = tally_entropy(&tally);
        h_total += h;
        if rank_in(params.semiring(), q, r, m, v) == r {
            h_fullrank += h;
            fullrank += 1;
        }
    });
    Ok(VConditionalEntropy {
        h_total_bits: h_total / v_count,
        h_given_fullrank_v_bits: (fullrank > 0).then(|| h_fullrank / fullrank as f64),
        prob_v_fullrank: fullrank as f64 / v_count,
        mr_log2_q: (m * r) as f64 * (q as f64).log2(),
    })
}

/// Conditional entropy of one random linear form given others, with its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma32Report {
    pub r: usize,
    pub q: u64,
    pub semiring: Semiring,
    /// Rows `i` whose products `C_i A` are conditioned on (0-based).
    pub conditioning_rows: Vec<usize>,
    pub entropy: EntropyReport,
    /// `(1 - r^2/q) log2 q`; negative bounds hold vacuously.
    pub bound_bits: f64,
    pub holds: bool,
}

/// `H(C_r A | C_1 A, ..., C_{r-1} A, C)` for uniform `C` (`r x r`) and `A`
/// (length `r`) over `{0..q}`, where `C_i` is the `i`-th row of `C`.
pub fn lemma32_conditional_entropy(r: usize, q: u64, semiring: Semiring, budget: u128) -> Result<Lemma32Report> {
    let rows: Vec<usize> = (0..r.saturating_sub(1)).collect();
    lemma32_subset_entropy(r, q, semiring, &rows, budget)
}

/// Like [`lemma32_conditional_entropy`] but conditioning only on the
/// products of the listed rows (each `< r - 1`).
pub fn lemma32_subset_entropy(r: usize, q: u64, semiring: Semiring, conditioning_rows: &[usize], budget: u128) -> Result<Lemma32Report> {
    if r == 0 || q == 0 {
        return Err(Error::InvalidParams(format!("need r >= 1 and q >= 1 (got r={r}, q={q})")));
    }
    if semiring == Semiring::ModQProduct && !is_prime(q) {
        return Err(Error::InvalidParams(format!("modq products need a prime alphabet size, {q} is not prime")));
    }
    if let Some(&bad) = conditioning_rows.iter().find(|&&i| i + 1 >= r) {
        return Err(Error::InvalidParams(format!("conditioning row {bad} must be below the target row {}", r - 1)));
    }
    let states = saturating_pow(q, (r * r + r) as u64);
    check_budget(states, budget)?;

    let c_count = saturating_pow(q, (r * r) as u64) as f64;
    let target = r - 1;
    let mut total = 0.0;
    let mut products = vec![0u64; r];
    for_each_digits(r * r, q, |c| {
        let mut joint: HashMap<Vec<u64>, u64> = HashMap::new();
        let mut cond: HashMap<Vec<u64>, u64> = HashMap::new();
        for_each_digits(r, q, |a| {
            for (i, p) in products.iter_mut().enumerate() {
                let acc: u64 = (0..r).map(|k| c[i * r + k] * a[k]).sum();
                *p = match semiring {
                    Semiring::IntegerProduct => acc,
                    Semiring::ModQProduct => acc % q,
                };
            }
            let key: Vec<u64> = conditioning_rows.iter().map(|&i| products[i]).collect();
            let mut full = key.clone();
            full.push(products[target]);
            *joint.entry(full).or_default() += 1;
            *cond.entry(key).or_default() += 1;
        });
        total += tally_entropy(&joint) - tally_entropy(&cond);
    });
    let value_bits = (total / c_count).max(0.0);
    let bound_bits = (1.0 - (r * r) as f64 / q as f64) * (q as f64).log2();
    Ok(Lemma32Report {
        r,
        q,
        semiring,
        conditioning_rows: conditioning_rows.to_vec(),
        entropy: EntropyReport {
            value_bits,
            support_size: entry_count(r, q, semiring) as u128,
            states_enumerated: states,
            exact: true,
            method: "per-C tally of row products over all A".into(),
        },
        bound_bits,
        holds: value_bits >= bound_bits - ENTROPY_TOLERANCE,
    })
}

/// Alphabet size of one linear form `C_i A`.
fn entry_count(r: usize, q: u64, semiring: Semiring) -> u64 {
    match semiring {
        Semiring::IntegerProduct => r as u64 * (q - 1) * (q - 1) + 1,
        Semiring::ModQProduct => q,
    }
}

/// Exact `H(Y^n | Z^n = z^n)`: entropy of the observed values at `locs`.
pub fn observation_entropy(params: &ModelParams, locs: &LocationSequence, budget: u128) -> Result<EntropyReport> {
    check_locs(params, locs)?;
    let m = params.m();
    let cells: Vec<usize> = locs.locations().iter().map(|&(i, j)| i * m + j).collect();
    let mut tally: HashMap<Vec<u64>, u64> = HashMap::new();
    for_each_source(params, budget, |_, _, s| {
        *tally.entry(cells.iter().map(|&c| s[c]).collect()).or_default() += 1;
    })?;
    Ok(EntropyReport {
        value_bits: tally_entropy(&tally),
        support_size: tally.len() as u128,
        states_enumerated: params.num_factor_pairs(),
        exact: true,
        method: "tally of observed values over all factor pairs".into(),
    })
}

/// `log2 q - H(Y^n | Z^n = z^n) / 2rm`: how far an observation falls short
/// of carrying the full factor entropy. Diagnostic only.
pub fn achieved_beta(params: &ModelParams, observation_bits: f64) -> f64 {
    (params.q() as f64).log2() - observation_bits / params.factor_digits() as f64
}

fn check_locs(params: &ModelParams, locs: &LocationSequence) -> Result<()> {
    if locs.m() != params.m() {
        return Err(Error::DimensionMismatch(format!(
            "locations are on a {0}x{0} grid, params have m={1}",
            locs.m(),
            params.m()
        )));
    }
    Ok(())
}

/// Probability that a fresh uniform factor pair reproduces `obs`, i.e. `p(y^n | z^n)`.
pub fn agreement_probability(obs: &Observation, params: &ModelParams, budget: u128) -> Result<f64> {
    let obs = Observation::new(obs.locs.clone(), obs.values.clone(), params)?;
    let m = params.m();
    let cells: Vec<(usize, u64)> = obs.locs.locations().iter().zip(&obs.values).map(|(&(i, j), &y)| (i * m + j, y)).collect();
    let mut hits = 0u128;
    for_each_source(params, budget, |_, _, s| {
        if cells.iter().all(|&(c, y)| s[c] == y) {
            hits += 1;
        }
    })?;
    Ok(hits as f64 / params.num_factor_pairs() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanoCheck {
    pub h_s_given_obs_bits: f64,
    /// Error probability of the committed (lexicographically least) estimate.
    pub pe: f64,
    /// Distinct product matrices with positive probability.
    pub support_size: u128,
    /// `h2(pe) + pe log2(support_size - 1)`.
    pub fano_rhs_bits: f64,
    pub holds: bool,
}

/// Checks Fano's inequality on one location set, with the binary-entropy term.
pub fn fano_verify(params: &ModelParams, locs: &LocationSequence, budget: u128) -> Result<FanoCheck> {
    check_locs(params, locs)?;
    let m = params.m();
    let cells: Vec<usize> = locs.locations().iter().map(|&(i, j)| i * m + j).collect();
    // Lexicographic order, so the first product of each group is the committed estimate.
    let dist = product_distribution(params, budget)?;
    let total: u64 = dist.iter().map(|(_, w)| w).sum();

    let mut groups: HashMap<Vec<u64>, Vec<u64>> = HashMap::new();
    for (s, w) in &dist {
        groups.entry(cells.iter().map(|&c| s[c]).collect()).or_default().push(*w);
    }
    let mut h = 0.0;
    let mut wrong = 0u64;
    for weights in groups.values() {
        let mass: u64 = weights.iter().sum();
        h += mass as f64 / total as f64 * entropy_from_counts(weights.iter().copied());
        wrong += mass - weights[0];
    }
    let pe = wrong as f64 / total as f64;
    let support_size = dist.len() as u128;
    let log_rest = if support_size > 1 { ((support_size - 1) as f64).log2() } else { 0.0 };
    let fano_rhs_bits = binary_entropy(pe) + pe * log_rest;
    Ok(FanoCheck {
        h_s_given_obs_bits: h,
        pe,
        support_size,
        fano_rhs_bits,
        holds: h <= fano_rhs_bits + ENTROPY_TOLERANCE,
    })
}
