//! Bitrate selection: a throughput rule and a buffer/throughput hybrid.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    /// bits/s
    pub bitrate: f64,
    /// Monotone quality index, 0-100 by default.
    pub quality: f64,
}

/// Representations in strictly increasing bitrate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitrateLadder {
    representations: Vec<Representation>,
}

impl BitrateLadder {
    /// Builds a ladder; without explicit qualities a log-bitrate scale mapped to `[0, 100]` is used.
    pub fn new(bitrates: &[f64], quality: Option<&[f64]>) -> Result<Self> {
        if bitrates.is_empty() {
            return Err(Error::invalid("bitrate ladder is empty"));
        }
        if bitrates.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::invalid("bitrates must be positive and finite"));
        }
        if bitrates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("bitrates must be strictly increasing"));
        }
        let quality = match quality {
            Some(q) => {
                if q.len() != bitrates.len() {
                    return Err(Error::invalid(format!(
                        "{} quality values for {} bitrates",
                        q.len(),
                        bitrates.len()
                    )));
                }
                if q.windows(2).any(|w| w[1] < w[0]) || q.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("quality values must be finite and non-decreasing"));
                }
                q.to_vec()
            }
            None => default_quality(bitrates),
        };
        Ok(BitrateLadder {
            representations: bitrates
                .iter()
                .zip(quality)
                .map(|(&bitrate, quality)| Representation { bitrate, quality })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.representations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representations.is_empty()
    }

    pub fn get(&self, index: usize) -> &Representation {
        &self.representations[index]
    }

    pub fn representations(&self) -> &[Representation] {
        &self.representations
    }

    pub fn bitrates(&self) -> impl Iterator<Item = f64> + '_ {
        self.representations.iter().map(|r| r.bitrate)
    }

    pub fn top(&self) -> usize {
        self.representations.len() - 1
    }
}

fn default_quality(bitrates: &[f64]) -> Vec<f64> {
    let lo = bitrates[0];
    let hi = bitrates[bitrates.len() - 1];
    if hi <= lo {
        return vec![100.0; bitrates.len()];
    }
    let span = (hi / lo).ln();
    bitrates.iter().map(|b| 100.0 * (b / lo).ln() / span).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    /// Media payload delivered.
    pub payload_bits: f64,
    /// Payload plus repair data on the wire.
    pub wire_bits: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputHistory {
    window: usize,
    samples: VecDeque<ThroughputSample>,
}

impl ThroughputHistory {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("throughput window must be at least 1"));
        }
        Ok(ThroughputHistory {
            window,
            samples: VecDeque::with_capacity(window),
        })
    }

    pub fn push(&mut self, sample: ThroughputSample) {
        if self.samples.len() == self.window {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> impl Iterator<Item = &ThroughputSample> {
        self.samples.iter()
    }

    /// Harmonic mean of per-sample payload rates, or `startup` with no history.
    pub fn estimate(&self, startup: f64) -> f64 {
        estimate_throughput(self, startup)
    }

    /// Harmonic mean of per-sample wire rates (payload plus repair).
    pub fn wire_estimate(&self, startup: f64) -> f64 {
        harmonic(self.samples.iter().map(|s| (s.wire_bits, s.seconds)), startup)
    }
}

fn harmonic(samples: impl Iterator<Item = (f64, f64)>, startup: f64) -> f64 {
    let mut count = 0usize;
    let mut inverse = 0.0;
    for (bits, secs) in samples {
        if bits <= 0.0 {
            continue;
        }
        count += 1;
        inverse += secs.max(0.0) / bits;
    }
    if count == 0 {
        return startup;
    }
    if inverse == 0.0 {
        return f64::INFINITY;
    }
    count as f64 / inverse
}

pub fn estimate_throughput(history: &ThroughputHistory, startup: f64) -> f64 {
    harmonic(history.samples.iter().map(|s| (s.payload_bits, s.seconds)), startup)
}

/// Highest representation with bitrate at most `safety * estimate`; the lowest if none fits.
pub fn throughput_abr_decide(estimate: f64, ladder: &BitrateLadder, safety: f64) -> usize {
    let budget = safety * estimate.max(0.0);
    ladder
        .representations
        .iter()
        .rposition(|r| r.bitrate <= budget)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicParams {
    /// Buffer level (s) at which buffer-based decisions take over.
    pub switch_threshold: f64,
    pub gamma_p: f64,
    pub buffer_cap: f64,
    pub segment_duration: f64,
    pub safety: f64,
}

impl DynamicParams {
    /// Lyapunov trade-off parameter sized so the top representation is reached
    /// when the buffer is one segment short of full.
    pub fn v(&self, ladder: &BitrateLadder) -> f64 {
        let u_top = (ladder.get(ladder.top()).bitrate / ladder.get(0).bitrate).ln();
        (self.buffer_cap - self.segment_duration) / (u_top + self.gamma_p)
    }
}

/// Buffer-utility choice: argmax of `(V * (u_i + gamma_p) - buffer) / size_i`.
pub fn bola_decide(buffer_level: f64, ladder: &BitrateLadder, params: &DynamicParams) -> usize {
    let v = params.v(ladder);
    let base = ladder.get(0).bitrate;
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, r) in ladder.representations.iter().enumerate() {
        let utility = (r.bitrate / base).ln();
        let score = (v * (utility + params.gamma_p) - buffer_level) / r.bitrate;
        if score >= best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

pub fn dynamic_abr_decide(buffer_level: f64, estimate: f64, ladder: &BitrateLadder, params: &DynamicParams) -> usize {
    if buffer_level < params.switch_threshold {
        throughput_abr_decide(estimate, ladder, params.safety)
    } else {
        bola_decide(buffer_level, ladder, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbrKind {
    Throughput,
    Dynamic,
}

impl AbrKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AbrKind::Throughput => "throughput",
            AbrKind::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for AbrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AbrKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "throughput" | "thr" => Ok(AbrKind::Throughput),
            "dynamic" => Ok(AbrKind::Dynamic),
            other => Err(Error::invalid(format!("unknown ABR {other:?} (throughput | dynamic)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbrConfig {
    pub kind: AbrKind,
    pub safety: f64,
    pub window: usize,
    /// Estimate used before the first download completes, bits/s.
    pub startup_estimate: f64,
    pub switch_threshold: f64,
    pub gamma_p: f64,
}

impl Default for AbrConfig {
    fn default() -> Self {
        AbrConfig {
            kind: AbrKind::Throughput,
            safety: 0.9,
            window: 3,
            startup_estimate: 1e6,
            switch_threshold: 10.0,
            gamma_p: 5.0,
        }
    }
}
