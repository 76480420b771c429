//! The finite-alphabet low-rank source `S = UV`.
//!
//! `U` is `m x r`, `V` is `r x m`, and every factor entry is drawn
//! uniformly from `{0, ..., q-1}`. The product is taken either over the
//! integers ([`Semiring::IntegerProduct`], the default) or modulo a prime
//! `q` ([`Semiring::ModQProduct`]).

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, saturating_pow, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Semiring {
    #[default]
    #[serde(rename = "integer")]
    IntegerProduct,
    #[serde(rename = "modq")]
    ModQProduct,
}

impl Semiring {
    pub fn as_str(self) -> &'static str {
        match self {
            Semiring::IntegerProduct => "integer",
            Semiring::ModQProduct => "modq",
        }
    }
}

impl fmt::Display for Semiring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Semiring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integer" | "int" => Ok(Semiring::IntegerProduct),
            "modq" | "mod" => Ok(Semiring::ModQProduct),
            other => Err(Error::InvalidParams(format!(
                "unknown semiring {other:?} (expected \"integer\" or \"modq\")"
            ))),
        }
    }
}

pub(crate) fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Dimensions and alphabet of an experiment. Construct through [`ModelParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    m: usize,
    r: usize,
    q: u64,
    semiring: Semiring,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    m: usize,
    r: usize,
    q: u64,
    #[serde(default)]
    semiring: Semiring,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.m, raw.r, raw.q, raw.semiring)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { m: p.m, r: p.r, q: p.q, semiring: p.semiring }
    }
}

impl ModelParams {
    pub fn new(m: usize, r: usize, q: u64, semiring: Semiring) -> Result<Self> {
        if m == 0 || r == 0 || q == 0 {
            return Err(Error::InvalidParams(format!(
                "m, r and q must all be at least 1 (got m={m}, r={r}, q={q})"
            )));
        }
        if semiring == Semiring::ModQProduct && !is_prime(q) {
            return Err(Error::InvalidParams(format!(
                "modq products need a prime alphabet size, {q} is not prime"
            )));
        }
        // The largest integer entry must fit in u64.
        (q - 1)
            .checked_mul(q - 1)
            .and_then(|x| x.checked_mul(r as u64))
            .ok_or_else(|| {
                Error::InvalidParams(format!("entries of a rank-{r} product over q={q} overflow u64"))
            })?;
        Ok(ModelParams { m, r, q, semiring })
    }

    pub fn integer(m: usize, r: usize, q: u64) -> Result<Self> {
        Self::new(m, r, q, Semiring::IntegerProduct)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn semiring(&self) -> Semiring {
        self.semiring
    }

    /// Number of free factor digits, `2rm`.
    pub fn factor_digits(&self) -> usize {
        2 * self.r * self.m
    }

    /// `q^{2rm}`, saturating.
    pub fn num_factor_pairs(&self) -> u128 {
        saturating_pow(self.q, self.factor_digits() as u64)
    }

    /// Inclusive range of a product entry.
    pub fn entry_range(&self) -> (u64, u64) {
        entry_range(self)
    }
}

/// `(0, r(q-1)^2)` over the integers, `(0, q-1)` modulo q.
pub fn entry_range(params: &ModelParams) -> (u64, u64) {
    let qm1 = params.q - 1;
    match params.semiring {
        Semiring::IntegerProduct => (0, params.r as u64 * qm1 * qm1),
        Semiring::ModQProduct => (0, qm1),
    }
}

/// Dense row-major matrix of small non-negative integers.
///
/// Ordering is lexicographic on the row-major entry list, which is the
/// tie-breaking order used throughout the decoder.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<u64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Matrix { rows: nrows, cols: ncols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: u64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[u64]>::to_vec).collect()
    }

    pub fn max_entry(&self) -> u64 {
        self.data.iter().copied().max().unwrap_or(0)
    }
}

/// A realization `(U, V)` of the factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactorPair {
    pub u: Matrix,
    pub v: Matrix,
}

impl FactorPair {
    pub fn new(u: Matrix, v: Matrix, params: &ModelParams) -> Result<Self> {
        let pair = FactorPair { u, v };
        pair.validate(params)?;
        Ok(pair)
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let (m, r) = (params.m, params.r);
        if (self.u.rows, self.u.cols) != (m, r) || (self.v.rows, self.v.cols) != (r, m) {
            return Err(Error::DimensionMismatch(format!(
                "expected U {m}x{r} and V {r}x{m}, got U {}x{} and V {}x{}",
                self.u.rows, self.u.cols, self.v.rows, self.v.cols
            )));
        }
        if self.u.max_entry() >= params.q || self.v.max_entry() >= params.q {
            return Err(Error::InvalidInput(format!(
                "factor entries must lie in [0, {}]",
                params.q - 1
            )));
        }
        Ok(())
    }
}

/// The `m x m` source matrix `S = UV`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductMatrix(Matrix);

impl ProductMatrix {
    pub fn new(s: Matrix, params: &ModelParams) -> Result<Self> {
        if s.rows != params.m || s.cols != params.m {
            return Err(Error::DimensionMismatch(format!(
                "expected a {0}x{0} product, got {1}x{2}",
                params.m, s.rows, s.cols
            )));
        }
        let (_, max) = params.entry_range();
        if s.max_entry() > max {
            return Err(Error::InvalidInput(format!("product entry exceeds the maximum {max}")));
        }
        Ok(ProductMatrix(s))
    }

    /// Wraps an `m x m` buffer produced by [`multiply_into`] from in-range factors.
    pub(crate) fn from_raw(m: usize, data: Vec<u64>) -> Self {
        debug_assert_eq!(data.len(), m * m);
        ProductMatrix(Matrix { rows: m, cols: m, data })
    }

    pub fn m(&self) -> usize {
        self.0.rows
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.0.to_rows()
    }
}

impl Serialize for ProductMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// Row-major `u` (`m*r` digits) times row-major `v` (`r*m` digits), written into `out` (`m*m`).
pub(crate) fn multiply_into(u: &[u64], v: &[u64], m: usize, r: usize, q: u64, semiring: Semiring, out: &mut [u64]) {
    for i in 0..m {
        let urow = &u[i * r..(i + 1) * r];
        for j in 0..m {
            let mut acc = 0u64;
            for (k, &uk) in urow.iter().enumerate() {
                acc += uk * v[k * m + j];
            }
            out[i * m + j] = match semiring {
                Semiring::IntegerProduct => acc,
                Semiring::ModQProduct => acc % q,
            };
        }
    }
}

/// `S = UV` in the semiring of `params`.
pub fn product(pair: &FactorPair, params: &ModelParams) -> Result<ProductMatrix> {
    pair.validate(params)?;
    let m = params.m;
    let mut out = vec![0; m * m];
    multiply_into(pair.u.as_slice(), pair.v.as_slice(), m, params.r, params.q, params.semiring, &mut out);
    Ok(ProductMatrix(Matrix { rows: m, cols: m, data: out }))
}

/// Reproducible randomness: identical `(master_seed, stream_index)` always
/// yields the same generator, independent of scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec { master_seed, stream_index }
    }

    /// Seed for sub-stream `index` of this stream.
    pub fn child(&self, index: u64) -> SeedSpec {
        SeedSpec {
            master_seed: self.master_seed,
            stream_index: splitmix64(self.stream_index ^ splitmix64(index)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Draws all `2rm` factor digits independently and uniformly, `U` first.
pub fn generate_source(params: &ModelParams, seed: SeedSpec) -> FactorPair {
    let (m, r, q) = (params.m, params.r, params.q);
    let mut rng = seed.rng();
    let mut draw = |len: usize| (0..len).map(|_| rng.gen_range(0..q)).collect::<Vec<_>>();
    let u = draw(m * r);
    let v = draw(r * m);
    FactorPair { u: Matrix { rows: m, cols: r, data: u }, v: Matrix { rows: r, cols: m, data: v } }
}

/// Odometer over all `q^{2rm}` digit strings in lexicographic order
/// (last digit fastest). The first `mr` digits are `U`, the rest `V`.
#[derive(Debug, Clone)]
pub struct SourceIter {
    params: ModelParams,
    digits: Vec<u64>,
    done: bool,
}

impl SourceIter {
    fn advance(&mut self) {
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.params.q {
                return;
            }
            *d = 0;
        }
        self.done = true;
    }
}

impl Iterator for SourceIter {
    type Item = FactorPair;

    fn next(&mut self) -> Option<FactorPair> {
        if self.done {
            return None;
        }
        let (m, r) = (self.params.m, self.params.r);
        let (u, v) = self.digits.split_at(m * r);
        let pair = FactorPair {
            u: Matrix { rows: m, cols: r, data: u.to_vec() },
            v: Matrix { rows: r, cols: m, data: v.to_vec() },
        };
        self.advance();
        Some(pair)
    }
}

/// Every factor pair exactly once, provided `q^{2rm} <= budget`.
pub fn enumerate_all_sources(params: &ModelParams, budget: u128) -> Result<SourceIter> {
    check_budget(params.num_factor_pairs(), budget)?;
    Ok(SourceIter { params: *params, digits: vec![0; params.factor_digits()], done: false })
}

/// Calls `visit(u, v, s)` for every factor pair in enumeration order without
/// allocating per pair. All slices are row-major.
pub(crate) fn for_each_source<F>(params: &ModelParams, budget: u128, mut visit: F) -> Result<()>
where
    F: FnMut(&[u64], &[u64], &[u64]),
{
    check_budget(params.num_factor_pairs(), budget)?;
    let (m, r, q) = (params.m, params.r, params.q);
    let mut digits = vec![0u64; params.factor_digits()];
    let mut s = vec![0u64; m * m];
    loop {
        let (u, v) = digits.split_at(m * r);
        multiply_into(u, v, m, r, q, params.semiring, &mut s);
        visit(u, v, &s);
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
            return Ok(());
        }
    }
}

/// On-disk instance: `{"m","r","q","semiring","u","v","s"}` with `s` optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub m: usize,
    pub r: usize,
    pub q: u64,
    #[serde(default)]
    pub semiring: Semiring,
    pub u: Vec<Vec<u64>>,
    pub v: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Vec<u64>>>,
}

/// A validated instance: parameters, factors, and their product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub params: ModelParams,
    pub pair: FactorPair,
    pub product: ProductMatrix,
}

impl Instance {
    pub fn new(params: ModelParams, pair: FactorPair) -> Result<Self> {
        let product = product(&pair, &params)?;
        Ok(Instance { params, pair, product })
    }

    pub fn from_file_repr(file: InstanceFile) -> Result<Self> {
        let params = ModelParams::new(file.m, file.r, file.q, file.semiring)?;
        let pair = FactorPair::new(Matrix::from_rows(&file.u)?, Matrix::from_rows(&file.v)?, &params)?;
        let instance = Instance::new(params, pair)?;
        if let Some(s) = file.s {
            if Matrix::from_rows(&s)? != *instance.product.matrix() {
                return Err(Error::InvalidInput("stored s does not equal u*v".into()));
            }
        }
        Ok(instance)
    }

    pub fn to_file_repr(&self) -> InstanceFile {
        InstanceFile {
            m: self.params.m,
            r: self.params.r,
            q: self.params.q,
            semiring: self.params.semiring,
            u: self.pair.u.to_rows(),
            v: self.pair.v.to_rows(),
            s: Some(self.product.to_rows()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file_repr(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file_repr())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
