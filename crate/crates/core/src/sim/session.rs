//! Per-segment session engine.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::abr::{
    dynamic_abr_decide, throughput_abr_decide, AbrConfig, AbrKind, DynamicParams, ThroughputHistory, ThroughputSample,
};
use crate::controller::{rfec_select, select, Hyperparameters, LossSmoother, Outcome, TelemetryState};
use crate::error::{Error, Result};
use crate::fec::{encoding_latency_with, symbolize, CandidateLibrary, CodecFamily, CodecKind, EncodeCostBasis, FecConfig};
use crate::loss::{payload_rate, residual_loss, LossModelParams, LossProfile};

use super::manifest::Manifest;
use super::trace::{NetworkTrace, TraceCursor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Vod,
    Lll,
}

impl Mode {
    pub fn buffer_cap(self) -> f64 {
        match self {
            Mode::Vod => 60.0,
            Mode::Lll => 6.0,
        }
    }

    pub fn segment_duration(self) -> f64 {
        match self {
            Mode::Vod => 4.0,
            Mode::Lll => 2.0,
        }
    }

    pub fn ewma_lambda(self, hp: &Hyperparameters) -> f64 {
        match self {
            Mode::Vod => hp.ewma_lambda_vod,
            Mode::Lll => hp.ewma_lambda_lll,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Vod => "vod",
            Mode::Lll => "lll",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vod" => Ok(Mode::Vod),
            "lll" => Ok(Mode::Lll),
            other => Err(Error::invalid(format!("unknown mode {other:?} (vod | lll)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "rs")]
    StaticRs,
    #[serde(rename = "rq")]
    StaticRq,
    #[serde(rename = "xor")]
    StaticXor,
    #[serde(rename = "rs-tarot")]
    TarotRs,
    #[serde(rename = "rq-tarot")]
    TarotRq,
    #[serde(rename = "rfec")]
    RFec,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::None,
        Strategy::StaticRs,
        Strategy::StaticRq,
        Strategy::StaticXor,
        Strategy::TarotRs,
        Strategy::TarotRq,
        Strategy::RFec,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::StaticRs => "rs",
            Strategy::StaticRq => "rq",
            Strategy::StaticXor => "xor",
            Strategy::TarotRs => "rs-tarot",
            Strategy::TarotRq => "rq-tarot",
            Strategy::RFec => "rfec",
        }
    }

    pub fn is_tarot(self) -> bool {
        matches!(self, Strategy::TarotRs | Strategy::TarotRq)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown FEC strategy {s:?} (none | rs | rq | xor | rs-tarot | rq-tarot | rfec)"
                ))
            })
    }
}

/// Fixed block shape of the redundancy-only baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RFecParams {
    pub n: u32,
    pub symbol_size: u32,
    pub codec: CodecKind,
}

impl Default for RFecParams {
    fn default() -> Self {
        RFecParams {
            n: 20,
            symbol_size: 64,
            codec: CodecKind::RaptorQ,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub mode: Mode,
    /// Defaults to the mode preset.
    pub buffer_cap: Option<f64>,
    /// Defaults to the mode preset; the manifest is re-chunked when it differs.
    pub segment_duration: Option<f64>,
    pub abr: AbrConfig,
    pub strategy: Strategy,
    pub loss: LossProfile,
    pub loss_model: LossModelParams,
    pub seed: u64,
    pub hp: Hyperparameters,
    pub rfec: RFecParams,
    /// Candidate library for the TAROT strategies; the default grid when `None`.
    pub library: Option<CandidateLibrary>,
    pub encode_basis: EncodeCostBasis,
    /// Segments that must complete before playback starts.
    pub startup_segments: usize,
    /// Record wall-clock decision time. Off makes reports fully reproducible.
    pub measure_decision_latency: bool,
}

impl SessionConfig {
    pub fn new(mode: Mode, strategy: Strategy, abr: AbrKind, loss: LossProfile) -> Self {
        SessionConfig {
            mode,
            buffer_cap: None,
            segment_duration: None,
            abr: AbrConfig {
                kind: abr,
                ..AbrConfig::default()
            },
            strategy,
            loss,
            loss_model: LossModelParams::default(),
            seed: 0,
            hp: Hyperparameters::default(),
            rfec: RFecParams::default(),
            library: None,
            encode_basis: EncodeCostBasis::default(),
            startup_segments: 1,
            measure_decision_latency: true,
        }
    }

    pub fn buffer_cap(&self) -> f64 {
        self.buffer_cap.unwrap_or(self.mode.buffer_cap())
    }

    pub fn segment_duration(&self) -> f64 {
        self.segment_duration.unwrap_or(self.mode.segment_duration())
    }

    pub fn validate(&self) -> Result<()> {
        let cap = self.buffer_cap();
        let seg = self.segment_duration();
        if !(seg > 0.0) || !seg.is_finite() {
            return Err(Error::invalid(format!("segment duration must be positive, got {seg}")));
        }
        if !(cap > seg) || !cap.is_finite() {
            return Err(Error::invalid(format!("buffer cap {cap} s must exceed segment duration {seg} s")));
        }
        if self.startup_segments == 0 || self.startup_segments as f64 * seg > cap {
            return Err(Error::invalid("startup segments must be at least 1 and fit in the buffer"));
        }
        if !(self.abr.safety > 0.0) || self.abr.window == 0 || !(self.abr.startup_estimate > 0.0) {
            return Err(Error::invalid("ABR safety, window and startup estimate must be positive"));
        }
        if !(self.loss_model.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        self.hp.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub index: usize,
    pub representation: usize,
    pub bitrate: f64,
    pub quality: f64,
    pub fec: FecConfig,
    /// Selection came from the empty-feasible-set fallback.
    pub fallback: bool,
    pub source_bytes: u64,
    pub repair_bytes: f64,
    /// Request latency + encoding + transfer.
    pub download_s: f64,
    pub encoding_s: f64,
    pub idle_s: f64,
    pub buffer_before: f64,
    pub buffer_after: f64,
    pub rebuffer_s: f64,
    pub sampled_loss: f64,
    pub smoothed_loss: f64,
    pub residual_loss: f64,
    pub decision_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub mode: Mode,
    pub strategy: Strategy,
    pub abr: AbrKind,
    pub loss: String,
    pub seed: u64,
    pub segment_duration: f64,
    pub buffer_cap: f64,
    pub segments: Vec<SegmentRecord>,
    pub startup_s: f64,
    /// Playback that overlapped a download.
    pub play_s: f64,
    pub rebuffer_s: f64,
    /// Playback while waiting for buffer room, no download in flight.
    pub idle_s: f64,
    /// Time of the last download completion.
    pub wall_s: f64,
}

impl SessionReport {
    pub fn total_source_bytes(&self) -> u64 {
        self.segments.iter().map(|s| s.source_bytes).sum()
    }

    pub fn total_repair_bytes(&self) -> f64 {
        self.segments.iter().map(|s| s.repair_bytes).sum()
    }

    /// Residual of `startup + play + rebuffer + idle = wall`.
    pub fn time_conservation_error(&self) -> f64 {
        (self.startup_s + self.play_s + self.rebuffer_s + self.idle_s - self.wall_s).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Download {
    pub total_s: f64,
    pub latency_s: f64,
    pub encoding_s: f64,
    pub transfer_s: f64,
    pub cursor: TraceCursor,
}

/// Encoding time for a whole segment: one per-block latency per source block.
pub fn segment_encoding_time(source_bytes: u64, cfg: &FecConfig, basis: EncodeCostBasis) -> Result<f64> {
    if cfg.is_no_fec() || source_bytes == 0 {
        return Ok(0.0);
    }
    let symbols = symbolize(source_bytes, cfg.symbol_size)?;
    let blocks = symbols.div_ceil(u64::from(cfg.n));
    Ok(blocks as f64 * encoding_latency_with(cfg, basis))
}

/// Fetches one segment: request latency, then encoding, then the payload
/// transfer integrated against the per-period payload rate.
#[allow(clippy::too_many_arguments)]
pub fn download_segment(
    source_bytes: u64,
    cfg: &FecConfig,
    trace: &NetworkTrace,
    cursor: TraceCursor,
    loss: f64,
    params: &LossModelParams,
    request_latency: f64,
    basis: EncodeCostBasis,
) -> Result<Download> {
    if source_bytes == 0 {
        return Err(Error::invalid("segment payload must be non-empty"));
    }
    let encoding_s = segment_encoding_time(source_bytes, cfg, basis)?;
    let start = trace.advance(cursor, request_latency + encoding_s);
    let bits = 8.0 * source_bytes as f64;
    let (transfer_s, end) = trace.transfer(start, bits, |bw| payload_rate(bw, loss, cfg, params))?;
    Ok(Download {
        total_s: request_latency + encoding_s + transfer_s,
        latency_s: request_latency,
        encoding_s,
        transfer_s,
        cursor: end,
    })
}

enum Decider {
    Fixed(FecConfig),
    Tarot(CandidateLibrary),
    RFec(RFecParams),
}

impl Decider {
    fn for_config(config: &SessionConfig) -> Result<Self> {
        Ok(match config.strategy {
            Strategy::None => Decider::Fixed(FecConfig::no_fec(CodecFamily::raptorq())),
            Strategy::StaticRs => Decider::Fixed(FecConfig::static_default(CodecFamily::reed_solomon())),
            Strategy::StaticRq => Decider::Fixed(FecConfig::static_default(CodecFamily::raptorq())),
            Strategy::StaticXor => Decider::Fixed(FecConfig::xor_fixed(64)),
            Strategy::TarotRs | Strategy::TarotRq => {
                let kind = if config.strategy == Strategy::TarotRs {
                    CodecKind::ReedSolomon
                } else {
                    CodecKind::RaptorQ
                };
                let library = match &config.library {
                    Some(lib) => CandidateLibrary::from_configs(
                        lib.iter()
                            .map(|c| FecConfig {
                                codec: CodecFamily::of(kind),
                                ..*c
                            })
                            .collect(),
                    )?,
                    None => CandidateLibrary::default_for(kind),
                };
                Decider::Tarot(library)
            }
            Strategy::RFec => {
                FecConfig::new(config.rfec.n, 0, config.rfec.symbol_size, CodecFamily::of(config.rfec.codec))?;
                Decider::RFec(config.rfec)
            }
        })
    }

    fn decide(&self, state: &TelemetryState, hp: &Hyperparameters) -> Result<(FecConfig, bool)> {
        match self {
            Decider::Fixed(cfg) => Ok((*cfg, false)),
            Decider::Tarot(lib) => {
                let s = select(state, lib, hp)?;
                Ok((s.config, matches!(s.outcome, Outcome::Fallback)))
            }
            Decider::RFec(p) => Ok((rfec_select(state, p.n, p.symbol_size, CodecFamily::of(p.codec), hp)?, false)),
        }
    }
}

/// Runs one streaming session to the end of the manifest.
pub fn run_session(manifest: &Manifest, trace: &NetworkTrace, config: &SessionConfig) -> Result<SessionReport> {
    config.validate()?;
    let seg_dur = config.segment_duration();
    let cap = config.buffer_cap();
    let manifest = manifest.resample(seg_dur)?;
    let ladder = manifest.ladder();
    let decider = Decider::for_config(config)?;
    let profile = config.loss.with_seed(config.seed);
    let mut smoother = LossSmoother::new(config.mode.ewma_lambda(&config.hp));
    let mut history = ThroughputHistory::new(config.abr.window)?;
    let dyn_params = DynamicParams {
        switch_threshold: config.abr.switch_threshold,
        gamma_p: config.abr.gamma_p,
        buffer_cap: cap,
        segment_duration: seg_dur,
        safety: config.abr.safety,
    };

    let mut cursor = TraceCursor::default();
    let mut buffer = 0.0f64;
    let mut playing = false;
    let mut report = SessionReport {
        mode: config.mode,
        strategy: config.strategy,
        abr: config.abr.kind,
        loss: config.loss.to_string(),
        seed: config.seed,
        segment_duration: seg_dur,
        buffer_cap: cap,
        segments: Vec::with_capacity(manifest.segment_count()),
        startup_s: 0.0,
        play_s: 0.0,
        rebuffer_s: 0.0,
        idle_s: 0.0,
        wall_s: 0.0,
    };

    for i in 0..manifest.segment_count() {
        let mut idle = 0.0;
        if playing && buffer + seg_dur > cap {
            idle = buffer + seg_dur - cap;
            buffer = cap - seg_dur;
            cursor = trace.advance(cursor, idle);
            report.idle_s += idle;
            report.wall_s += idle;
        }

        let sampled = profile.sample(i as u64);
        let pl = smoother.update(sampled).clamp(0.0, 1.0);

        let estimate = history.estimate(config.abr.startup_estimate);
        let rep = match config.abr.kind {
            AbrKind::Throughput => throughput_abr_decide(estimate, ladder, config.abr.safety),
            AbrKind::Dynamic => dynamic_abr_decide(buffer, estimate, ladder, &dyn_params),
        };
        let representation = *ladder.get(rep);
        let gp = history.wire_estimate(config.abr.startup_estimate);
        let state = TelemetryState::new(representation.bitrate, buffer, pl, gp)?;

        let started = Instant::now();
        let (cfg, fallback) = decider.decide(&state, &config.hp)?;
        let decision_us = if config.measure_decision_latency {
            started.elapsed().as_secs_f64() * 1e6
        } else {
            0.0
        };

        let source_bytes = manifest.segment_bits(i, rep).div_ceil(8);
        let latency = trace.latency_at(cursor);
        let dl = download_segment(
            source_bytes,
            &cfg,
            trace,
            cursor,
            sampled,
            &config.loss_model,
            latency,
            config.encode_basis,
        )?;
        cursor = dl.cursor;
        let repair_bytes = source_bytes as f64 * f64::from(cfg.k) / f64::from(cfg.n);

        let buffer_before = buffer;
        let mut rebuffer = 0.0;
        if playing {
            let played = dl.total_s.min(buffer);
            rebuffer = dl.total_s - played;
            buffer -= played;
            report.play_s += played;
            report.rebuffer_s += rebuffer;
        } else {
            report.startup_s += dl.total_s;
        }
        report.wall_s += dl.total_s;
        buffer = (buffer + seg_dur).min(cap);
        if i + 1 >= config.startup_segments {
            playing = true;
        }

        history.push(ThroughputSample {
            payload_bits: 8.0 * source_bytes as f64,
            wire_bits: 8.0 * (source_bytes as f64 + repair_bytes),
            seconds: dl.total_s,
        });

        report.segments.push(SegmentRecord {
            index: i,
            representation: rep,
            bitrate: representation.bitrate,
            quality: representation.quality,
            fec: cfg,
            fallback,
            source_bytes,
            repair_bytes,
            download_s: dl.total_s,
            encoding_s: dl.encoding_s,
            idle_s: idle,
            buffer_before,
            buffer_after: buffer,
            rebuffer_s: rebuffer,
            sampled_loss: sampled,
            smoothed_loss: pl,
            residual_loss: if cfg.is_no_fec() {
                sampled
            } else {
                residual_loss(sampled, cfg.coverage())
            },
            decision_us,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abr::BitrateLadder;
    use crate::sim::trace::{Period, TraceArchetype};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    const MBPS: f64 = 1e6;

    fn config(mode: Mode, strategy: Strategy, loss: LossProfile) -> SessionConfig {
        let mut c = SessionConfig::new(mode, strategy, AbrKind::Throughput, loss);
        c.measure_decision_latency = false;
        c
    }

    fn const5() -> LossProfile {
        LossProfile::constant(0.05).unwrap()
    }

    #[test]
    fn download_examples() {
        let trace = NetworkTrace::constant(10.0 * MBPS, 0.05).unwrap();
        let bytes = 2_500_000 / 8;
        let params = LossModelParams::default();
        let none = FecConfig::no_fec(CodecFamily::raptorq());
        let basis = EncodeCostBasis::SourceBlock;
        let c0 = TraceCursor::default();

        let d = download_segment(bytes, &none, &trace, c0, 0.0, &params, 0.05, basis).unwrap();
        assert_abs_diff_eq!(d.total_s, 0.30, epsilon = 1e-12);

        let d = download_segment(bytes, &none, &trace, c0, 0.05, &params, 0.05, basis).unwrap();
        assert_abs_diff_eq!(d.total_s, 0.05 + 2.5 / 6.413_740_8, epsilon = 1e-4);
        assert_abs_diff_eq!(d.total_s, 0.4398, epsilon = 1e-4);

        let rq = FecConfig::static_default(CodecFamily::raptorq());
        let d = download_segment(bytes, &rq, &trace, c0, 0.0, &params, 0.05, basis).unwrap();
        assert!(d.encoding_s > 0.0);
        assert_abs_diff_eq!(d.total_s - d.encoding_s, 0.425, epsilon = 1e-9);
        // 312500 bytes in 1280-byte blocks at 22 ns/byte
        let blocks = 312_500u64.div_ceil(64).div_ceil(20) as f64;
        assert_abs_diff_eq!(d.encoding_s, blocks * 1280.0 * 22e-9, epsilon = 1e-15);

        assert!(download_segment(0, &none, &trace, c0, 0.0, &params, 0.05, basis).is_err());
    }

    #[test]
    fn plain_run_matches_bits_over_bandwidth() {
        let manifest = Manifest::default_synthetic();
        let trace = NetworkTrace::constant(12.0 * MBPS, 0.03).unwrap();
        let r = run_session(&manifest, &trace, &config(Mode::Vod, Strategy::None, LossProfile::none())).unwrap();
        for s in &r.segments {
            assert_eq!(s.download_s, 0.03 + 8.0 * s.source_bytes as f64 / (12.0 * MBPS));
            assert_eq!(s.repair_bytes, 0.0);
            assert_eq!(s.encoding_s, 0.0);
        }
    }

    #[test]
    fn infinite_bandwidth_reaches_top() {
        let manifest = Manifest::default_synthetic();
        let trace = NetworkTrace::constant(f64::INFINITY, 0.0).unwrap();
        for mode in [Mode::Vod, Mode::Lll] {
            let r = run_session(&manifest, &trace, &config(mode, Strategy::None, LossProfile::none())).unwrap();
            assert_eq!(r.rebuffer_s, 0.0);
            let top = manifest.ladder().top();
            assert!(r.segments.iter().skip(3).all(|s| s.representation == top));
        }
    }

    #[test]
    fn static_overhead_is_half() {
        let manifest = Manifest::default_synthetic();
        let trace = TraceArchetype::Amazon5g.synthesize(1, 600);
        for strategy in [Strategy::StaticRq, Strategy::StaticRs, Strategy::StaticXor] {
            let r = run_session(&manifest, &trace, &config(Mode::Vod, strategy, const5())).unwrap();
            assert_eq!(r.total_repair_bytes() * 2.0, r.total_source_bytes() as f64);
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let manifest = Manifest::default_synthetic();
        let trace = TraceArchetype::Cascade.synthesize(3, 600);
        let mut c = config(Mode::Lll, Strategy::TarotRq, LossProfile::variable(0.0, 0.05, 0).unwrap());
        c.seed = 11;
        let a = serde_json::to_string(&run_session(&manifest, &trace, &c).unwrap()).unwrap();
        let b = serde_json::to_string(&run_session(&manifest, &trace, &c).unwrap()).unwrap();
        assert_eq!(a, b);
        c.seed = 12;
        let d = serde_json::to_string(&run_session(&manifest, &trace, &c).unwrap()).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn record_count_and_lll_rechunking() {
        let manifest = Manifest::default_synthetic();
        let trace = NetworkTrace::constant(20.0 * MBPS, 0.02).unwrap();
        let r = run_session(&manifest, &trace, &config(Mode::Lll, Strategy::None, LossProfile::none())).unwrap();
        assert_eq!(r.segments.len(), 270);
        assert_eq!(r.segment_duration, 2.0);
        assert_eq!(r.buffer_cap, 6.0);
    }

    #[test]
    fn tarot_idle_without_loss() {
        let manifest = Manifest::default_synthetic();
        let trace = TraceArchetype::Netflix5g.synthesize(0, 600);
        for strategy in [Strategy::TarotRq, Strategy::TarotRs, Strategy::RFec] {
            let r = run_session(&manifest, &trace, &config(Mode::Vod, strategy, LossProfile::none())).unwrap();
            assert_eq!(r.total_repair_bytes(), 0.0);
        }
    }

    #[test]
    fn outage_causes_rebuffer() {
        let manifest = Manifest::default_synthetic();
        let trace = NetworkTrace::new(vec![
            Period { duration: 30.0, bandwidth: 20.0 * MBPS, latency: 0.02 },
            Period { duration: 20.0, bandwidth: 0.0, latency: 0.02 },
        ])
        .unwrap();
        let r = run_session(&manifest, &trace, &config(Mode::Lll, Strategy::None, LossProfile::none())).unwrap();
        assert!(r.rebuffer_s > 0.0);
        assert!(r.time_conservation_error() < 1e-6);
    }

    #[test]
    fn config_validation() {
        let mut c = config(Mode::Lll, Strategy::None, LossProfile::none());
        c.buffer_cap = Some(2.0);
        assert!(c.validate().is_err());
        c.buffer_cap = None;
        c.startup_segments = 0;
        assert!(c.validate().is_err());
        assert!(config(Mode::Vod, Strategy::RFec, const5()).validate().is_ok());
        assert_eq!("rq-tarot".parse::<Strategy>().unwrap(), Strategy::TarotRq);
        assert!("tarot".parse::<Strategy>().is_err());
        assert_eq!("LLL".parse::<Mode>().unwrap(), Mode::Lll);
    }

    #[test]
    fn single_representation_manifest() {
        let ladder = BitrateLadder::new(&[2.0 * MBPS], None).unwrap();
        let m = Manifest::synthetic(ladder, 4.0, 10, 5).unwrap();
        let trace = NetworkTrace::constant(5.0 * MBPS, 0.01).unwrap();
        let r = run_session(&m, &trace, &config(Mode::Vod, Strategy::TarotRs, const5())).unwrap();
        assert_eq!(r.segments.len(), 10);
        assert!(r.segments.iter().all(|s| s.quality == 100.0));
    }

    fn any_strategy() -> impl proptest::strategy::Strategy<Value = Strategy> {
        proptest::sample::select(Strategy::ALL.to_vec())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn session_invariants(
            st in any_strategy(),
            lll in any::<bool>(),
            dynamic in any::<bool>(),
            archetype in 0usize..4,
            trace_seed in 0u64..50,
            lo in 0.0f64..0.1,
            width in 0.0f64..0.1,
            seed in any::<u64>(),
        ) {
            let manifest = Manifest::default_synthetic();
            let trace = TraceArchetype::ALL[archetype].synthesize(trace_seed, 300);
            let mode = if lll { Mode::Lll } else { Mode::Vod };
            let abr = if dynamic { AbrKind::Dynamic } else { AbrKind::Throughput };
            let mut c = SessionConfig::new(mode, st, abr, LossProfile::variable(lo, lo + width, 0).unwrap());
            c.seed = seed;
            let r = run_session(&manifest, &trace, &c).unwrap();
            prop_assert_eq!(r.segments.len(), manifest.resample(mode.segment_duration()).unwrap().segment_count());
            prop_assert!(r.time_conservation_error() < 1e-6);
            for s in &r.segments {
                prop_assert!(s.buffer_before >= 0.0 && s.buffer_before <= r.buffer_cap);
                prop_assert!(s.buffer_after >= 0.0 && s.buffer_after <= r.buffer_cap);
                let expect = s.source_bytes as f64 * f64::from(s.fec.k) / f64::from(s.fec.n);
                prop_assert_eq!(s.repair_bytes, expect);
                prop_assert!(s.download_s >= 0.0 && s.rebuffer_s >= 0.0 && s.idle_s >= 0.0);
                prop_assert!(s.residual_loss >= 0.0 && s.residual_loss <= s.sampled_loss);
            }
        }

        #[test]
        fn loss_never_speeds_up_downloads(l1 in 0.0f64..0.3, l2 in 0.0f64..0.3, archetype in 0usize..4) {
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let manifest = Manifest::default_synthetic();
            let trace = TraceArchetype::ALL[archetype].synthesize(7, 300);
            let base = run_session(&manifest, &trace, &config(Mode::Lll, Strategy::None, LossProfile::none())).unwrap();
            // replay the same representation sequence under both loss levels
            let mut ta = 0.0;
            let mut tb = 0.0;
            let mut ca = TraceCursor::default();
            let mut cb = TraceCursor::default();
            let none = FecConfig::no_fec(CodecFamily::raptorq());
            let params = LossModelParams::default();
            for s in &base.segments {
                let a = download_segment(s.source_bytes, &none, &trace, ca, lo, &params, 0.02, EncodeCostBasis::SourceBlock).unwrap();
                let b = download_segment(s.source_bytes, &none, &trace, cb, hi, &params, 0.02, EncodeCostBasis::SourceBlock).unwrap();
                ta += a.total_s;
                tb += b.total_s;
                ca = a.cursor;
                cb = b.cursor;
            }
            prop_assert!(tb >= ta - 1e-9);
        }
    }
}
