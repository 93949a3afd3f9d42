use serde::{Deserialize, Serialize};

use crate::sim::SessionReport;

/// Aggregate QoE and cost figures for one session (or an average of several).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Mean per-segment quality index (0-100 scale by default).
    pub quality: f64,
    pub rebuffer_s: f64,
    /// Rebuffer time as a percentage of session wall time.
    pub rebuffer_pct: f64,
    /// Repair bytes over source bytes, percent.
    pub overhead_pct: f64,
    pub avg_bitrate_bps: f64,
    pub decision_us_mean: f64,
    pub decision_us_p99: f64,
}

/// Nearest-rank percentile; `p` in `[0, 100]`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn summarize(report: &SessionReport) -> MetricsSummary {
    let n = report.segments.len();
    if n == 0 {
        return MetricsSummary::default();
    }
    let count = n as f64;
    let source = report.total_source_bytes() as f64;
    let decisions: Vec<f64> = report.segments.iter().map(|s| s.decision_us).collect();
    MetricsSummary {
        quality: report.segments.iter().map(|s| s.quality).sum::<f64>() / count,
        rebuffer_s: report.rebuffer_s,
        rebuffer_pct: if report.wall_s > 0.0 {
            100.0 * report.rebuffer_s / report.wall_s
        } else {
            0.0
        },
        overhead_pct: if source > 0.0 {
            100.0 * report.total_repair_bytes() / source
        } else {
            0.0
        },
        avg_bitrate_bps: report.segments.iter().map(|s| s.bitrate).sum::<f64>() / count,
        decision_us_mean: decisions.iter().sum::<f64>() / count,
        decision_us_p99: percentile(&decisions, 99.0),
    }
}

/// Field-wise arithmetic mean.
pub fn mean(summaries: &[MetricsSummary]) -> MetricsSummary {
    if summaries.is_empty() {
        return MetricsSummary::default();
    }
    let k = summaries.len() as f64;
    let avg = |f: fn(&MetricsSummary) -> f64| summaries.iter().map(f).sum::<f64>() / k;
    MetricsSummary {
        quality: avg(|m| m.quality),
        rebuffer_s: avg(|m| m.rebuffer_s),
        rebuffer_pct: avg(|m| m.rebuffer_pct),
        overhead_pct: avg(|m| m.overhead_pct),
        avg_bitrate_bps: avg(|m| m.avg_bitrate_bps),
        decision_us_mean: avg(|m| m.decision_us_mean),
        decision_us_p99: avg(|m| m.decision_us_p99),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abr::AbrKind;
    use crate::fec::{CodecFamily, FecConfig};
    use crate::sim::{Mode, SegmentRecord, Strategy};

    fn record(source: u64, cfg: FecConfig) -> SegmentRecord {
        SegmentRecord {
            index: 0,
            representation: 0,
            bitrate: 1e6,
            quality: 50.0,
            fec: cfg,
            fallback: false,
            source_bytes: source,
            repair_bytes: source as f64 * f64::from(cfg.k) / f64::from(cfg.n),
            download_s: 1.0,
            encoding_s: 0.0,
            idle_s: 0.0,
            buffer_before: 0.0,
            buffer_after: 4.0,
            rebuffer_s: 0.0,
            sampled_loss: 0.0,
            smoothed_loss: 0.0,
            residual_loss: 0.0,
            decision_us: 0.0,
        }
    }

    fn report(segments: Vec<SegmentRecord>) -> SessionReport {
        SessionReport {
            mode: Mode::Vod,
            strategy: Strategy::StaticRq,
            abr: AbrKind::Throughput,
            loss: "none".into(),
            seed: 0,
            segment_duration: 4.0,
            buffer_cap: 60.0,
            segments,
            startup_s: 1.0,
            play_s: 7.0,
            rebuffer_s: 2.0,
            idle_s: 0.0,
            wall_s: 10.0,
        }
    }

    #[test]
    fn overhead_is_byte_weighted() {
        let rq = CodecFamily::raptorq();
        let mut a = record(1000, FecConfig::new(10, 1, 64, rq).unwrap());
        a.repair_bytes = 100.0;
        let b = record(1000, FecConfig::no_fec(rq));
        let m = summarize(&report(vec![a, b]));
        assert_eq!(m.overhead_pct, 5.0);
        assert_eq!(m.rebuffer_pct, 20.0);
        assert_eq!(m.rebuffer_s, 2.0);
    }

    #[test]
    fn static_and_none() {
        let rq = CodecFamily::raptorq();
        let m = summarize(&report(vec![record(1234, FecConfig::static_default(rq)); 5]));
        assert_eq!(m.overhead_pct, 50.0);
        let m = summarize(&report(vec![record(1234, FecConfig::no_fec(rq)); 5]));
        assert_eq!(m.overhead_pct, 0.0);
        assert_eq!(summarize(&report(vec![])), MetricsSummary::default());
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&[3.0], 99.0), 3.0);
        assert_eq!(percentile(&[], 99.0), 0.0);
    }
}
