//! Piecewise-constant network traces and exact transfer integration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    /// seconds
    pub duration: f64,
    /// bits/s; may be `+inf` for in-memory traces
    pub bandwidth: f64,
    /// seconds
    pub latency: f64,
}

/// On-disk period record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodRecord {
    pub duration_ms: f64,
    pub bandwidth_kbps: f64,
    pub latency_ms: f64,
}

/// A looping sequence of constant-bandwidth periods.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTrace {
    periods: Vec<Period>,
    total: f64,
}

/// Position inside a trace: period index and seconds elapsed in that period.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TraceCursor {
    pub index: usize,
    pub offset: f64,
}

const LONG_PERIOD_S: f64 = 86_400.0;

impl NetworkTrace {
    pub fn new(periods: Vec<Period>) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::invalid("trace has no periods"));
        }
        for (i, p) in periods.iter().enumerate() {
            if !(p.duration > 0.0) || !p.duration.is_finite() {
                return Err(Error::invalid(format!("period {i}: duration must be positive, got {}", p.duration)));
            }
            if !(p.bandwidth >= 0.0) {
                return Err(Error::invalid(format!("period {i}: bandwidth must be non-negative, got {}", p.bandwidth)));
            }
            if !(p.latency >= 0.0) || !p.latency.is_finite() {
                return Err(Error::invalid(format!("period {i}: latency must be non-negative, got {}", p.latency)));
            }
        }
        if periods.iter().all(|p| p.bandwidth == 0.0) {
            return Err(Error::invalid("trace has zero bandwidth everywhere"));
        }
        let total = periods.iter().map(|p| p.duration).sum();
        Ok(NetworkTrace { periods, total })
    }

    /// A single very long period, so transfers never straddle a boundary.
    pub fn constant(bandwidth: f64, latency: f64) -> Result<Self> {
        NetworkTrace::new(vec![Period {
            duration: LONG_PERIOD_S,
            bandwidth,
            latency,
        }])
    }

    pub fn from_records(records: &[PeriodRecord]) -> Result<Self> {
        NetworkTrace::new(
            records
                .iter()
                .map(|r| Period {
                    duration: r.duration_ms / 1e3,
                    bandwidth: r.bandwidth_kbps * 1e3,
                    latency: r.latency_ms / 1e3,
                })
                .collect(),
        )
    }

    pub fn to_records(&self) -> Vec<PeriodRecord> {
        self.periods
            .iter()
            .map(|p| PeriodRecord {
                duration_ms: p.duration * 1e3,
                bandwidth_kbps: p.bandwidth / 1e3,
                latency_ms: p.latency * 1e3,
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<PeriodRecord> = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("trace line {} column {}", e.line(), e.column()), e.to_string()))?;
        NetworkTrace::from_records(&records).map_err(|e| Error::parse("trace", e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        NetworkTrace::from_json(&text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    /// Length of one loop in seconds.
    pub fn cycle_duration(&self) -> f64 {
        self.total
    }

    /// Time-weighted mean bandwidth over one loop.
    pub fn mean_bandwidth(&self) -> f64 {
        self.periods.iter().map(|p| p.bandwidth * p.duration).sum::<f64>() / self.total
    }

    pub fn period_at(&self, cursor: TraceCursor) -> &Period {
        &self.periods[cursor.index]
    }

    pub fn latency_at(&self, cursor: TraceCursor) -> f64 {
        self.period_at(cursor).latency
    }

    fn next(&self, cursor: TraceCursor) -> TraceCursor {
        TraceCursor {
            index: (cursor.index + 1) % self.periods.len(),
            offset: 0.0,
        }
    }

    /// Moves the cursor forward by `seconds` of wall time.
    pub fn advance(&self, mut cursor: TraceCursor, seconds: f64) -> TraceCursor {
        let mut left = seconds.max(0.0);
        if left > self.total {
            left %= self.total;
        }
        loop {
            let remaining = self.periods[cursor.index].duration - cursor.offset;
            if left < remaining {
                cursor.offset += left;
                return cursor;
            }
            left -= remaining;
            cursor = self.next(cursor);
            if left == 0.0 {
                return cursor;
            }
        }
    }

    /// Seconds needed to move `bits` starting at `cursor`, where `rate` maps a
    /// period's link bandwidth to the usable rate. Returns the end cursor too.
    pub fn transfer(&self, mut cursor: TraceCursor, bits: f64, rate: impl Fn(f64) -> f64) -> Result<(f64, TraceCursor)> {
        let mut left = bits.max(0.0);
        let mut elapsed = 0.0;
        let mut idle_periods = 0usize;
        while left > 0.0 {
            let p = &self.periods[cursor.index];
            let remaining = p.duration - cursor.offset;
            let r = rate(p.bandwidth);
            if r == f64::INFINITY {
                return Ok((elapsed, cursor));
            }
            if r > 0.0 {
                idle_periods = 0;
                let need = left / r;
                if need < remaining {
                    cursor.offset += need;
                    return Ok((elapsed + need, cursor));
                }
                left -= r * remaining;
            } else {
                idle_periods += 1;
                if idle_periods > self.periods.len() {
                    return Err(Error::InvalidState("usable rate is zero across the whole trace".into()));
                }
            }
            elapsed += remaining;
            cursor = self.next(cursor);
        }
        Ok((elapsed, cursor))
    }
}

/// Synthetic stand-ins for the measured traces, matched on mean and spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceArchetype {
    Netflix5g,
    Amazon5g,
    LteBelgium,
    Cascade,
}

impl TraceArchetype {
    pub const ALL: [TraceArchetype; 4] = [
        TraceArchetype::Netflix5g,
        TraceArchetype::Amazon5g,
        TraceArchetype::LteBelgium,
        TraceArchetype::Cascade,
    ];

    /// `(mean, std)` in Mbps.
    pub fn stats_mbps(self) -> (f64, f64) {
        match self {
            TraceArchetype::Netflix5g => (33.0, 18.0),
            TraceArchetype::Amazon5g => (25.0, 10.0),
            TraceArchetype::LteBelgium => (20.0, 5.0),
            TraceArchetype::Cascade => (30.0, 15.0),
        }
    }

    pub fn latency(self) -> f64 {
        match self {
            TraceArchetype::Netflix5g | TraceArchetype::Amazon5g => 0.020,
            TraceArchetype::LteBelgium => 0.040,
            TraceArchetype::Cascade => 0.030,
        }
    }

    fn correlation(self) -> f64 {
        match self {
            TraceArchetype::Cascade => 0.95,
            _ => 0.8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TraceArchetype::Netflix5g => "netflix5g",
            TraceArchetype::Amazon5g => "amazon5g",
            TraceArchetype::LteBelgium => "lte-belgium",
            TraceArchetype::Cascade => "cascade",
        }
    }

    /// AR(1) bandwidth process with 1 s periods, floored at 0.2 Mbps.
    pub fn synthesize(self, seed: u64, periods: usize) -> NetworkTrace {
        let (mean, sd) = self.stats_mbps();
        let rho = self.correlation();
        let innovation = sd * (1.0 - rho * rho).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = mean;
        let mut out = Vec::with_capacity(periods.max(1));
        for _ in 0..periods.max(1) {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = mean + rho * (x - mean) + innovation * z;
            out.push(Period {
                duration: 1.0,
                bandwidth: x.max(0.2) * 1e6,
                latency: self.latency(),
            });
        }
        NetworkTrace::new(out).expect("synthetic periods are valid")
    }
}

impl fmt::Display for TraceArchetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceArchetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "netflix5g" | "netflix" => Ok(TraceArchetype::Netflix5g),
            "amazon5g" | "amazon" => Ok(TraceArchetype::Amazon5g),
            "lte-belgium" | "lte" | "belgium" => Ok(TraceArchetype::LteBelgium),
            "cascade" => Ok(TraceArchetype::Cascade),
            other => Err(Error::invalid(format!(
                "unknown trace archetype {other:?} (netflix5g | amazon5g | lte-belgium | cascade)"
            ))),
        }
    }
}

/// Number of 1 s periods in generated traces; longer than any default session.
pub const SYNTHETIC_PERIODS: usize = 900;

/// Resolves `synthetic:<archetype>[:<seed>]`, `constant:<mbps>[:<latency_ms>]` or a file path.
pub fn resolve_trace(source: &str) -> Result<NetworkTrace> {
    if let Some(rest) = source.strip_prefix("synthetic:") {
        let mut parts = rest.split(':');
        let archetype: TraceArchetype = parts.next().unwrap_or_default().parse()?;
        let seed = match parts.next() {
            Some(s) => s.parse().map_err(|_| Error::invalid(format!("bad trace seed {s:?}")))?,
            None => 0,
        };
        return Ok(archetype.synthesize(seed, SYNTHETIC_PERIODS));
    }
    if let Some(rest) = source.strip_prefix("constant:") {
        let mut parts = rest.split(':');
        let num = |v: Option<&str>, default: f64| -> Result<f64> {
            match v {
                Some(v) => v.parse().map_err(|_| Error::invalid(format!("bad number {v:?} in {source:?}"))),
                None => Ok(default),
            }
        };
        let mbps = num(parts.next(), f64::NAN)?;
        let latency_ms = num(parts.next(), 20.0)?;
        return NetworkTrace::constant(mbps * 1e6, latency_ms / 1e3);
    }
    NetworkTrace::load(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_period() -> NetworkTrace {
        NetworkTrace::new(vec![
            Period { duration: 1.0, bandwidth: 10e6, latency: 0.05 },
            Period { duration: 2.0, bandwidth: 0.0, latency: 0.1 },
        ])
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(NetworkTrace::new(vec![]).is_err());
        assert!(NetworkTrace::new(vec![Period { duration: 0.0, bandwidth: 1.0, latency: 0.0 }]).is_err());
        assert!(NetworkTrace::new(vec![Period { duration: 1.0, bandwidth: -1.0, latency: 0.0 }]).is_err());
        assert!(NetworkTrace::new(vec![Period { duration: 1.0, bandwidth: 0.0, latency: 0.0 }]).is_err());
        assert!(two_period().periods().len() == 2);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"[{"duration_ms": 1000, "bandwidth_kbps": 33000, "latency_ms": 20}]"#;
        let t = NetworkTrace::from_json(text).unwrap();
        assert_eq!(t.periods()[0].bandwidth, 33e6);
        assert_eq!(t.periods()[0].latency, 0.02);
        let back = serde_json::to_string(&t.to_records()).unwrap();
        assert_eq!(NetworkTrace::from_json(&back).unwrap(), t);
        assert!(matches!(NetworkTrace::from_json("[]"), Err(Error::Parse { .. })));
        assert!(matches!(NetworkTrace::from_json("{"), Err(Error::Parse { .. })));
        let neg = r#"[{"duration_ms": 1000, "bandwidth_kbps": -5, "latency_ms": 20}]"#;
        assert!(NetworkTrace::from_json(neg).is_err());
    }

    #[test]
    fn single_period_loops() {
        let t = NetworkTrace::new(vec![Period { duration: 1.0, bandwidth: 8e6, latency: 0.0 }]).unwrap();
        let c = t.advance(TraceCursor::default(), 12.25);
        assert_eq!(c.index, 0);
        assert_abs_diff_eq!(c.offset, 0.25, epsilon = 1e-12);
        let (secs, _) = t.transfer(TraceCursor::default(), 80e6, |b| b).unwrap();
        assert_abs_diff_eq!(secs, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn outage_stalls_transfer() {
        let t = two_period();
        // 5 Mb in the first period, then a 2 s outage, then 5 Mb more
        let (secs, c) = t.transfer(TraceCursor::default(), 15e6, |b| b).unwrap();
        assert_abs_diff_eq!(secs, 3.5, epsilon = 1e-12);
        assert_eq!(c.index, 0);
        assert_abs_diff_eq!(c.offset, 0.5, epsilon = 1e-12);
        assert!(t.transfer(TraceCursor::default(), 1.0, |_| 0.0).is_err());
    }

    #[test]
    fn infinite_bandwidth_is_instant() {
        let t = NetworkTrace::constant(f64::INFINITY, 0.0).unwrap();
        let (secs, _) = t.transfer(TraceCursor::default(), 1e9, |b| b).unwrap();
        assert_eq!(secs, 0.0);
    }

    #[test]
    fn archetypes_match_means() {
        for a in TraceArchetype::ALL {
            let t = a.synthesize(0, 5000);
            let (mean, _) = a.stats_mbps();
            let got = t.mean_bandwidth() / 1e6;
            assert!((got - mean).abs() < 0.15 * mean, "{a}: {got} vs {mean}");
            assert_eq!(a.synthesize(0, 50), a.synthesize(0, 50));
            assert_eq!(a.as_str().parse::<TraceArchetype>().unwrap(), a);
        }
    }

    #[test]
    fn resolve_sources() {
        let c = resolve_trace("constant:33").unwrap();
        assert_eq!(c.periods()[0].bandwidth, 33e6);
        assert_eq!(c.periods()[0].latency, 0.02);
        assert_eq!(resolve_trace("synthetic:cascade").unwrap().periods().len(), SYNTHETIC_PERIODS);
        assert_ne!(resolve_trace("synthetic:cascade:1").unwrap(), resolve_trace("synthetic:cascade:2").unwrap());
        assert!(resolve_trace("synthetic:dialup").is_err());
        assert!(resolve_trace("/nonexistent/trace.json").is_err());
    }

    proptest! {
        #[test]
        fn transfer_time_additive(a in 1e3f64..2e7, b in 1e3f64..2e7, start in 0.0f64..3.0) {
            let t = NetworkTrace::new(vec![
                Period { duration: 0.7, bandwidth: 3e6, latency: 0.0 },
                Period { duration: 1.3, bandwidth: 11e6, latency: 0.0 },
                Period { duration: 0.4, bandwidth: 0.0, latency: 0.0 },
            ]).unwrap();
            let c0 = t.advance(TraceCursor::default(), start);
            let (whole, _) = t.transfer(c0, a + b, |x| x).unwrap();
            let (first, c1) = t.transfer(c0, a, |x| x).unwrap();
            let (second, _) = t.transfer(c1, b, |x| x).unwrap();
            prop_assert!((whole - first - second).abs() < 1e-7);
        }

        #[test]
        fn advance_matches_transfer_end(bits in 1e3f64..5e7) {
            let t = two_period();
            let (secs, end) = t.transfer(TraceCursor::default(), bits, |x| x).unwrap();
            let moved = t.advance(TraceCursor::default(), secs);
            prop_assert_eq!(moved.index, end.index);
            prop_assert!((moved.offset - end.offset).abs() < 1e-7);
        }
    }
}
