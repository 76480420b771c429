//! Closed-form lower bounds: the Fano converse on the sample count, the
//! Hamming-distortion sample bound, and the squared-error information bound.
//!
//! All bounds are clamped at zero; `clamped` records when the raw value was
//! negative.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogUnit {
    Bits,
    #[default]
    Nats,
}

impl LogUnit {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogUnit::Bits => x.log2(),
            LogUnit::Nats => x.ln(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LogUnit::Bits => "bits",
            LogUnit::Nats => "nats",
        }
    }
}

impl std::fmt::Display for LogUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LogUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" => Ok(LogUnit::Bits),
            "nats" => Ok(LogUnit::Nats),
            other => Err(Error::InvalidParams(format!("unknown unit {other:?} (expected bits or nats)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverseInput {
    pub m: usize,
    pub r: usize,
    pub q: u64,
    pub pe: f64,
}

/// Inputs of the distortion bounds. `delta_slack` and `h_star` are in `unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionInput {
    pub m: usize,
    pub r: usize,
    #[serde(default)]
    pub q: u64,
    pub d_level: f64,
    pub beta_exp: f64,
    #[serde(default)]
    pub delta_slack: f64,
    #[serde(default)]
    pub h_star: f64,
    #[serde(default)]
    pub unit: LogUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub formula: &'static str,
    pub bound_value: f64,
    /// Smallest integer sample count meeting the bound (sample bounds only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ceil: Option<u64>,
    pub raw_value: f64,
    pub clamped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit: Option<LogUnit>,
    pub inputs: BTreeMap<&'static str, f64>,
}

impl BoundReport {
    fn new(formula: &'static str, raw: f64, samples: bool, unit: Option<LogUnit>, inputs: BTreeMap<&'static str, f64>) -> Self {
        let clamped = raw < 0.0;
        let bound_value = raw.max(0.0);
        BoundReport {
            formula,
            bound_value,
            ceil: samples.then(|| ceil_count(bound_value)),
            raw_value: raw,
            clamped,
            unit,
            inputs,
        }
    }
}

/// `ceil`, ignoring float noise just above an integer.
fn ceil_count(x: f64) -> u64 {
    let rounded = x.round();
    if (x - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as u64
    } else {
        x.ceil() as u64
    }
}

fn check_dims(m: usize, r: usize) -> Result<()> {
    if m == 0 || r == 0 {
        return Err(Error::InvalidParams(format!("m and r must be at least 1 (got m={m}, r={r})")));
    }
    Ok(())
}

/// Minimum `n` with `mr log q <= n log(rq^2) + pe 2rm log q`. Independent of
/// the log base.
pub fn fano_min_samples(inp: &ConverseInput) -> Result<BoundReport> {
    check_dims(inp.m, inp.r)?;
    if !(0.0..=1.0).contains(&inp.pe) {
        return Err(Error::InvalidParams(format!("pe must lie in [0, 1], got {}", inp.pe)));
    }
    let inputs = BTreeMap::from([("m", inp.m as f64), ("r", inp.r as f64), ("q", inp.q as f64), ("pe", inp.pe)]);
    if inp.q < 2 {
        return Ok(BoundReport::new("fano_converse", 0.0, true, None, inputs));
    }
    let (m, r, q) = (inp.m as f64, inp.r as f64, inp.q as f64);
    let raw = (m * r * q.ln() - inp.pe * 2.0 * r * m * q.ln()) / (r * q * q).ln();
    Ok(BoundReport::new("fano_converse", raw, true, None, inputs))
}

/// `D m^beta log(2rq^2)`: the maximum entropy of an error matrix with at
/// most `D m^beta` nonzero entries in `[-rq^2, rq^2]`.
pub fn hamming_error_entropy_cap(m: usize, r: usize, q: u64, d_level: f64, beta_exp: f64, unit: LogUnit) -> f64 {
    if d_level == 0.0 {
        return 0.0;
    }
    d_level * (m as f64).powf(beta_exp) * unit.log(2.0 * r as f64 * (q as f64).powi(2))
}

fn check_distortion(inp: &DistortionInput) -> Result<()> {
    check_dims(inp.m, inp.r)?;
    if !(inp.d_level >= 0.0) {
        return Err(Error::InvalidParams(format!("distortion level must be non-negative, got {}", inp.d_level)));
    }
    if !(inp.delta_slack >= 0.0) {
        return Err(Error::InvalidParams(format!("delta must be non-negative, got {}", inp.delta_slack)));
    }
    Ok(())
}

fn hamming_inputs(inp: &DistortionInput) -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("m", inp.m as f64),
        ("r", inp.r as f64),
        ("q", inp.q as f64),
        ("d_level", inp.d_level),
        ("beta_exp", inp.beta_exp),
        ("delta_slack", inp.delta_slack),
    ])
}

/// Minimum `n` with `n log(rq^2) >= 2rm(log q - delta) - D m^beta log(2rq^2)`.
pub fn hamming_rd_min_samples(inp: &DistortionInput) -> Result<BoundReport> {
    check_distortion(inp)?;
    if inp.q < 2 {
        return Err(Error::InvalidParams(format!("the Hamming bound needs q >= 2, got {}", inp.q)));
    }
    let source = 2.0 * (inp.r * inp.m) as f64 * (inp.unit.log(inp.q as f64) - inp.delta_slack);
    Ok(hamming_from_source(inp, source, "hamming_rd", hamming_inputs(inp)))
}

/// The Hamming sample bound with the source-entropy term replaced by an
/// exactly computed `H(S)` (in `inp.unit`); `delta_slack` is ignored.
pub fn hamming_rd_min_samples_with_entropy(inp: &DistortionInput, source_entropy: f64) -> Result<BoundReport> {
    check_distortion(inp)?;
    if inp.q < 2 {
        return Err(Error::InvalidParams(format!("the Hamming bound needs q >= 2, got {}", inp.q)));
    }
    let mut inputs = hamming_inputs(inp);
    inputs.remove("delta_slack");
    inputs.insert("source_entropy", source_entropy);
    Ok(hamming_from_source(inp, source_entropy, "hamming_rd_exact_hs", inputs))
}

fn hamming_from_source(inp: &DistortionInput, source: f64, formula: &'static str, inputs: BTreeMap<&'static str, f64>) -> BoundReport {
    let cap = hamming_error_entropy_cap(inp.m, inp.r, inp.q, inp.d_level, inp.beta_exp, inp.unit);
    let per_sample = inp.unit.log(inp.r as f64 * (inp.q as f64).powi(2));
    BoundReport::new(formula, (source - cap) / per_sample, true, Some(inp.unit), inputs)
}

/// Both forms of the squared-error bound on `I(S; S_hat)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianBoundReport {
    /// `rm h* - m^beta log(2 pi e D)`, as stated for the final bound.
    pub variant_paper: BoundReport,
    /// `rm h* - (m^beta / 2) log(2 pi e D)`, from the Gaussian maximum-entropy step.
    pub variant_derivation: BoundReport,
    /// `variant_derivation.raw_value - variant_paper.raw_value`.
    pub discrepancy: f64,
}

pub fn gaussian_rd_info_bound(inp: &DistortionInput) -> Result<GaussianBoundReport> {
    check_dims(inp.m, inp.r)?;
    if inp.d_level < 0.0 || inp.d_level.is_nan() {
        return Err(Error::InvalidParams(format!("distortion level must be non-negative, got {}", inp.d_level)));
    }
    if inp.d_level == 0.0 {
        return Err(Error::InfiniteBound(
            "zero squared-error distortion requires unbounded information; only full observation reconstructs".into(),
        ));
    }
    let inputs = BTreeMap::from([
        ("m", inp.m as f64),
        ("r", inp.r as f64),
        ("d_level", inp.d_level),
        ("beta_exp", inp.beta_exp),
        ("h_star", inp.h_star),
    ]);
    let source = (inp.r * inp.m) as f64 * inp.h_star;
    let error_term = (inp.m as f64).powf(inp.beta_exp) * inp.unit.log(2.0 * PI * E * inp.d_level);
    let paper = source - error_term;
    let derivation = source - error_term / 2.0;
    Ok(GaussianBoundReport {
        variant_paper: BoundReport::new("gaussian_rd_paper", paper, false, Some(inp.unit), inputs.clone()),
        variant_derivation: BoundReport::new("gaussian_rd_derivation", derivation, false, Some(inp.unit), inputs),
        discrepancy: derivation - paper,
    })
}

/// One row of a bound table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundQuery {
    Fano {
        m: usize,
        r: usize,
        q: u64,
        pe: f64,
    },
    Hamming {
        m: usize,
        r: usize,
        q: u64,
        #[serde(rename = "D")]
        d_level: f64,
        beta: f64,
        #[serde(default)]
        delta: f64,
        #[serde(default)]
        unit: LogUnit,
    },
    Gaussian {
        m: usize,
        r: usize,
        #[serde(rename = "D")]
        d_level: f64,
        beta: f64,
        hstar: f64,
        #[serde(default)]
        unit: LogUnit,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSweep {
    pub rows: Vec<BoundQuery>,
}

/// Evaluates every query; Gaussian queries yield both variants.
pub fn evaluate_queries(queries: &[BoundQuery]) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for query in queries {
        match *query {
            BoundQuery::Fano { m, r, q, pe } => out.push(fano_min_samples(&ConverseInput { m, r, q, pe })?),
            BoundQuery::Hamming { m, r, q, d_level, beta, delta, unit } => out.push(hamming_rd_min_samples(&DistortionInput {
                m,
                r,
                q,
                d_level,
                beta_exp: beta,
                delta_slack: delta,
                h_star: 0.0,
                unit,
            })?),
            BoundQuery::Gaussian { m, r, d_level, beta, hstar, unit } => {
                let rep = gaussian_rd_info_bound(&DistortionInput {
                    m,
                    r,
                    q: 0,
                    d_level,
                    beta_exp: beta,
                    delta_slack: 0.0,
                    h_star: hstar,
                    unit,
                })?;
                out.push(rep.variant_paper);
                out.push(rep.variant_derivation);
            }
        }
    }
    Ok(out)
}

const TABLE_INPUTS: [&str; 8] = ["m", "r", "q", "pe", "d_level", "beta_exp", "delta_slack", "h_star"];

/// CSV with one row per report; absent inputs are left blank.
pub fn write_bounds_csv<W: Write>(reports: &[BoundReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["formula"];
    header.extend(TABLE_INPUTS);
    header.extend(["unit", "bound_value", "ceil", "clamped"]);
    w.write_record(&header)?;
    for rep in reports {
        let mut record = vec![rep.formula.to_string()];
        record.extend(TABLE_INPUTS.iter().map(|k| rep.inputs.get(k).map_or(String::new(), |v| v.to_string())));
        record.push(rep.unit.map_or("", LogUnit::as_str).to_string());
        record.push(rep.bound_value.to_string());
        record.push(rep.ceil.map_or(String::new(), |c| c.to_string()));
        record.push(rep.clamped.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
