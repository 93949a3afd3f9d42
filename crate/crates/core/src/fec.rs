//! Code-family-agnostic FEC arithmetic.
//!
//! Everything here is analytical: a configuration is a `(n, k, S, codec)`
//! tuple and the functions derive overhead, coverage, decode feasibility and
//! encoding latency from it. No Galois-field work happens in this crate.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured RaptorQ encoding cost.
pub const RAPTORQ_NS_PER_BYTE: f64 = 22.0;
/// Measured Reed-Solomon encoding cost.
pub const REED_SOLOMON_NS_PER_BYTE: f64 = 35.0;
/// Fixed per-block cost charged for XOR parity.
pub const XOR_BLOCK_LATENCY_S: f64 = 1e-7;
/// Default recovery efficiency assumed for XOR parity.
pub const XOR_EFFICIENCY: f64 = 0.8;

/// Slack used when rounding `r * n` up, so that e.g. `0.075 * 40` is 3 and not 4.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodecKind {
    #[serde(alias = "rs")]
    ReedSolomon,
    #[serde(rename = "raptorq", alias = "rq")]
    RaptorQ,
    Xor,
}

impl CodecKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodecKind::ReedSolomon => "reed-solomon",
            CodecKind::RaptorQ => "raptorq",
            CodecKind::Xor => "xor",
        }
    }
}

impl fmt::Display for CodecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rs" | "reed-solomon" | "reedsolomon" | "reed_solomon" => Ok(CodecKind::ReedSolomon),
            "rq" | "raptorq" => Ok(CodecKind::RaptorQ),
            "xor" => Ok(CodecKind::Xor),
            other => Err(Error::invalid(format!("unknown codec {other:?}"))),
        }
    }
}

/// A code family together with its recovery efficiency (beta) and encoding cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecFamily {
    pub kind: CodecKind,
    /// Fraction of repair symbols that are usable for recovery, in (0, 1].
    pub efficiency: f64,
    pub encode_ns_per_byte: f64,
}

impl CodecFamily {
    pub const fn reed_solomon() -> Self {
        CodecFamily {
            kind: CodecKind::ReedSolomon,
            efficiency: 1.0,
            encode_ns_per_byte: REED_SOLOMON_NS_PER_BYTE,
        }
    }

    pub const fn raptorq() -> Self {
        CodecFamily {
            kind: CodecKind::RaptorQ,
            efficiency: 0.99,
            encode_ns_per_byte: RAPTORQ_NS_PER_BYTE,
        }
    }

    pub const fn xor() -> Self {
        CodecFamily {
            kind: CodecKind::Xor,
            efficiency: XOR_EFFICIENCY,
            encode_ns_per_byte: 0.0,
        }
    }

    pub const fn of(kind: CodecKind) -> Self {
        match kind {
            CodecKind::ReedSolomon => Self::reed_solomon(),
            CodecKind::RaptorQ => Self::raptorq(),
            CodecKind::Xor => Self::xor(),
        }
    }

    /// Overrides the XOR efficiency; other families keep their fixed values.
    pub fn with_efficiency(mut self, efficiency: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::invalid(format!(
                "codec efficiency must be in (0, 1], got {efficiency}"
            )));
        }
        self.efficiency = efficiency;
        Ok(self)
    }
}

/// An exact, unreduced ratio of two integers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        u128::from(self.num) * u128::from(other.den) == u128::from(other.num) * u128::from(self.den)
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (u128::from(self.num) * u128::from(other.den))
            .cmp(&(u128::from(other.num) * u128::from(self.den)))
    }
}

/// One FEC configuration: `n` source symbols, `k` repair symbols of `symbol_size` bytes.
///
/// `k == 0` is the No-FEC sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FecConfig {
    pub n: u32,
    pub k: u32,
    pub symbol_size: u32,
    pub codec: CodecFamily,
}

impl FecConfig {
    pub fn new(n: u32, k: u32, symbol_size: u32, codec: CodecFamily) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("source-symbol count n must be positive"));
        }
        if symbol_size == 0 {
            return Err(Error::invalid("symbol size must be positive"));
        }
        Ok(FecConfig {
            n,
            k,
            symbol_size,
            codec,
        })
    }

    pub fn no_fec(codec: CodecFamily) -> Self {
        FecConfig {
            n: 1,
            k: 0,
            symbol_size: 1,
            codec,
        }
    }

    /// The `(n=20, k=10, S=64)` setting used by static RS/RQ baselines.
    pub fn static_default(codec: CodecFamily) -> Self {
        FecConfig {
            n: 20,
            k: 10,
            symbol_size: 64,
            codec,
        }
    }

    /// XOR parity only exists as 2 source / 1 parity.
    pub fn xor_fixed(symbol_size: u32) -> Self {
        FecConfig {
            n: 2,
            k: 1,
            symbol_size: symbol_size.max(1),
            codec: CodecFamily::xor(),
        }
    }

    pub fn is_no_fec(&self) -> bool {
        self.k == 0
    }

    pub fn overhead(&self) -> Ratio {
        overhead(self)
    }

    pub fn coverage(&self) -> f64 {
        coverage(self)
    }

    /// Source-block size `n * S` in bytes.
    pub fn block_bytes(&self) -> u64 {
        u64::from(self.n) * u64::from(self.symbol_size)
    }

    /// Canonical ordering key.
    pub fn sort_key(&self) -> (u32, u32, u32, CodecKind) {
        (self.n, self.k, self.symbol_size, self.codec.kind)
    }
}

impl fmt::Display for FecConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_no_fec() {
            write!(f, "{}(no-fec)", self.codec.kind)
        } else {
            write!(
                f,
                "{}(n={},k={},S={})",
                self.codec.kind, self.n, self.k, self.symbol_size
            )
        }
    }
}

pub fn symbolize(payload_bytes: u64, symbol_size: u32) -> Result<u64> {
    if payload_bytes == 0 {
        return Err(Error::invalid("payload must be non-empty"));
    }
    if symbol_size == 0 {
        return Err(Error::invalid("symbol size must be positive"));
    }
    Ok(payload_bytes.div_ceil(u64::from(symbol_size)))
}

pub fn repair_count(n: u32, redundancy: f64) -> Result<u32> {
    if n == 0 {
        return Err(Error::invalid("source-symbol count n must be positive"));
    }
    if !(redundancy >= 0.0) || !redundancy.is_finite() {
        return Err(Error::invalid(format!(
            "redundancy must be a non-negative number, got {redundancy}"
        )));
    }
    let raw = redundancy * f64::from(n);
    if raw == 0.0 {
        return Ok(0);
    }
    Ok((raw - CEIL_SLACK).ceil().max(0.0) as u32)
}

pub fn overhead(cfg: &FecConfig) -> Ratio {
    Ratio {
        num: u64::from(cfg.k),
        den: u64::from(cfg.n),
    }
}

/// Fraction of the transmitted block that is repair data, `k / (n + k)`.
pub fn coverage(cfg: &FecConfig) -> f64 {
    f64::from(cfg.k) / (f64::from(cfg.n) + f64::from(cfg.k))
}

pub fn decode_feasible(n_recv: u32, k_recv: u32, n: u32) -> Result<bool> {
    if n_recv > n {
        return Err(Error::invalid(format!(
            "received {n_recv} source symbols out of only {n}"
        )));
    }
    Ok(u64::from(n_recv) + u64::from(k_recv) >= u64::from(n))
}

/// Which bytes the per-byte encoding cost is charged on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodeCostBasis {
    /// `n * S`: the encoder reads each source byte once.
    #[default]
    SourceBlock,
    /// `(n + k) * S`.
    TransmittedBlock,
}

/// Per-block encoding latency in seconds, charged on the source block.
pub fn encoding_latency(cfg: &FecConfig) -> f64 {
    encoding_latency_with(cfg, EncodeCostBasis::SourceBlock)
}

pub fn encoding_latency_with(cfg: &FecConfig, basis: EncodeCostBasis) -> f64 {
    if cfg.codec.kind == CodecKind::Xor {
        return XOR_BLOCK_LATENCY_S;
    }
    let symbols = match basis {
        EncodeCostBasis::SourceBlock => u64::from(cfg.n),
        EncodeCostBasis::TransmittedBlock => u64::from(cfg.n) + u64::from(cfg.k),
    };
    let bytes = symbols * u64::from(cfg.symbol_size);
    bytes as f64 * cfg.codec.encode_ns_per_byte * 1e-9
}

/// The `(n, r, S, codec)` grid a candidate library is generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: Vec<u32>,
    pub r: Vec<f64>,
    #[serde(rename = "S")]
    pub symbol_sizes: Vec<u32>,
    pub codec: CodecKind,
}

impl GridSpec {
    pub const DEFAULT_N: [u32; 10] = [4, 8, 10, 16, 20, 32, 40, 50, 64, 100];
    pub const DEFAULT_R: [f64; 15] = [
        0.01, 0.02, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5,
    ];
    pub const DEFAULT_S: [u32; 4] = [64, 128, 256, 512];

    /// The default grid; it de-duplicates to exactly 400 candidates.
    pub fn default_for(codec: CodecKind) -> Self {
        GridSpec {
            n: Self::DEFAULT_N.to_vec(),
            r: Self::DEFAULT_R.to_vec(),
            symbol_sizes: Self::DEFAULT_S.to_vec(),
            codec,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("grid spec line {}", e.line()), e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// An immutable, canonically ordered set of candidate configurations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateLibrary {
    candidates: Vec<FecConfig>,
    grid: Option<GridSpec>,
}

impl CandidateLibrary {
    pub fn build(grid: &GridSpec) -> Result<Self> {
        Self::build_with_codec(grid, CodecFamily::of(grid.codec))
    }

    /// Like [`build`](Self::build), with an explicit codec parameterisation.
    pub fn build_with_codec(grid: &GridSpec, codec: CodecFamily) -> Result<Self> {
        if grid.n.is_empty() || grid.r.is_empty() || grid.symbol_sizes.is_empty() {
            return Err(Error::invalid("candidate grid has an empty axis"));
        }
        if codec.kind != grid.codec {
            return Err(Error::invalid("codec parameters do not match the grid codec"));
        }
        let mut out = Vec::with_capacity(grid.n.len() * grid.r.len() * grid.symbol_sizes.len());
        for &n in &grid.n {
            for &r in &grid.r {
                let k = repair_count(n, r)?;
                for &s in &grid.symbol_sizes {
                    out.push(FecConfig::new(n, k, s, codec)?);
                }
            }
        }
        let mut lib = Self::from_configs(out)?;
        lib.grid = Some(grid.clone());
        Ok(lib)
    }

    /// Builds a library from explicit configurations, sorting and de-duplicating them.
    pub fn from_configs(mut configs: Vec<FecConfig>) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::invalid("candidate library must not be empty"));
        }
        configs.sort_by_key(FecConfig::sort_key);
        configs.dedup_by_key(|c| c.sort_key());
        Ok(CandidateLibrary {
            candidates: configs,
            grid: None,
        })
    }

    pub fn default_for(codec: CodecKind) -> Self {
        Self::build(&GridSpec::default_for(codec)).expect("default grid is valid")
    }

    pub fn candidates(&self) -> &[FecConfig] {
        &self.candidates
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FecConfig> {
        self.candidates.iter()
    }
}

impl<'a> IntoIterator for &'a CandidateLibrary {
    type Item = &'a FecConfig;
    type IntoIter = std::slice::Iter<'a, FecConfig>;

    fn into_iter(self) -> Self::IntoIter {
        self.candidates.iter()
    }
}
