//! Batch experiments over traces, loss profiles, strategies, ABRs and modes.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abr::AbrKind;
use crate::controller::Hyperparameters;
use crate::error::{Error, Result};
use crate::loss::{LossModelParams, LossProfile, DEFAULT_GAMMA};
use crate::sim::{resolve_manifest, resolve_trace, run_session, Mode, SessionConfig, Strategy};

use super::emit::SummaryRow;
use super::metrics::{mean, summarize, MetricsSummary};

fn one() -> usize {
    1
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_abrs() -> Vec<AbrKind> {
    vec![AbrKind::Throughput]
}

/// Sweep description. Axes are crossed in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Manifest path; the synthetic default when absent.
    #[serde(default)]
    pub manifest: Option<String>,
    /// Trace paths or `synthetic:<archetype>` / `constant:<mbps>` sources.
    pub traces: Vec<String>,
    /// Loss profile strings (`none`, `const:L`, `var:lo:hi`).
    pub losses: Vec<String>,
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_abrs")]
    pub abrs: Vec<AbrKind>,
    pub modes: Vec<Mode>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Runs per seed; replication `r` uses seed `seed + r * REPLICATION_STRIDE`.
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Hyperparameter override file.
    #[serde(default)]
    pub hp: Option<String>,
    /// Record wall-clock decision latency (makes results timing dependent).
    #[serde(default)]
    pub measure_decision_latency: bool,
}

pub const REPLICATION_STRIDE: u64 = 1_000_003;

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("sweep spec line {} column {}", e.line(), e.column()), e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SweepSpec::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("traces", self.traces.is_empty()),
            ("losses", self.losses.is_empty()),
            ("strategies", self.strategies.is_empty()),
            ("abrs", self.abrs.is_empty()),
            ("modes", self.modes.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::invalid(format!("sweep axis {name:?} is empty")));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        for l in &self.losses {
            l.parse::<LossProfile>()?;
        }
        LossModelParams::new(self.gamma)?;
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.traces.len() * self.losses.len() * self.strategies.len() * self.abrs.len() * self.modes.len()
    }
}

/// Position of a cell on every axis; orders results in spec order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct CellKey {
    mode: usize,
    loss: usize,
    strategy: usize,
    abr: usize,
    trace: usize,
    seed: usize,
    replication: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub mode: Mode,
    pub loss: String,
    pub strategy: Strategy,
    pub abr: AbrKind,
    pub trace: String,
    pub seed: u64,
    pub metrics: MetricsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub mode: Mode,
    pub loss: String,
    pub strategy: Strategy,
    pub abr: AbrKind,
    pub trace: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// One averaged row per (mode, loss, strategy, abr) with at least one successful run.
    pub rows: Vec<SummaryRow>,
    /// Every successful run.
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, true)
}

/// Runs the sweep; `parallel = false` forces serial execution.
pub fn run_sweep_with(spec: &SweepSpec, parallel: bool) -> Result<SweepResult> {
    spec.validate()?;
    let manifest = resolve_manifest(spec.manifest.as_deref());
    let hp = match &spec.hp {
        Some(path) => Hyperparameters::load(path)?,
        None => Hyperparameters::default(),
    };
    let traces: Vec<std::result::Result<_, String>> =
        spec.traces.iter().map(|t| resolve_trace(t).map_err(|e| e.to_string())).collect();
    let losses: Vec<LossProfile> = spec.losses.iter().map(|l| l.parse()).collect::<Result<_>>()?;
    let loss_model = LossModelParams::new(spec.gamma)?;

    let mut keys = Vec::new();
    for mode in 0..spec.modes.len() {
        for loss in 0..spec.losses.len() {
            for strategy in 0..spec.strategies.len() {
                for abr in 0..spec.abrs.len() {
                    for trace in 0..spec.traces.len() {
                        for seed in 0..spec.seeds.len() {
                            for replication in 0..spec.replications {
                                keys.push(CellKey {
                                    mode,
                                    loss,
                                    strategy,
                                    abr,
                                    trace,
                                    seed,
                                    replication,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let run_cell = |key: &CellKey| -> (CellKey, std::result::Result<MetricsSummary, String>) {
        let outcome = (|| {
            let manifest = manifest.as_ref().map_err(|e| e.to_string())?;
            let trace = traces[key.trace].as_ref().map_err(|e| e.clone())?;
            let mut cfg = SessionConfig::new(
                spec.modes[key.mode],
                spec.strategies[key.strategy],
                spec.abrs[key.abr],
                losses[key.loss],
            );
            cfg.seed = cell_seed(spec, key);
            cfg.hp = hp;
            cfg.loss_model = loss_model;
            cfg.measure_decision_latency = spec.measure_decision_latency;
            run_session(manifest, trace, &cfg)
                .map(|r| summarize(&r))
                .map_err(|e| e.to_string())
        })();
        (*key, outcome)
    };

    let results: BTreeMap<CellKey, std::result::Result<MetricsSummary, String>> = if parallel {
        keys.par_iter().map(run_cell).collect()
    } else {
        keys.iter().map(run_cell).collect()
    };

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let mut groups: BTreeMap<(usize, usize, usize, usize), Vec<MetricsSummary>> = BTreeMap::new();
    for (key, outcome) in &results {
        let mode = spec.modes[key.mode];
        let loss = spec.losses[key.loss].clone();
        let strategy = spec.strategies[key.strategy];
        let abr = spec.abrs[key.abr];
        let trace = spec.traces[key.trace].clone();
        let seed = cell_seed(spec, key);
        match outcome {
            Ok(metrics) => {
                groups
                    .entry((key.mode, key.loss, key.strategy, key.abr))
                    .or_default()
                    .push(*metrics);
                cells.push(CellResult {
                    mode,
                    loss,
                    strategy,
                    abr,
                    trace,
                    seed,
                    metrics: *metrics,
                });
            }
            Err(error) => failures.push(CellFailure {
                mode,
                loss,
                strategy,
                abr,
                trace,
                seed,
                error: error.clone(),
            }),
        }
    }
    let rows = groups
        .into_iter()
        .map(|((mode, loss, strategy, abr), ms)| SummaryRow {
            mode: spec.modes[mode].to_string(),
            loss: spec.losses[loss].clone(),
            strategy: spec.strategies[strategy].to_string(),
            abr: spec.abrs[abr].to_string(),
            metrics: mean(&ms),
        })
        .collect();
    Ok(SweepResult { rows, cells, failures })
}

fn cell_seed(spec: &SweepSpec, key: &CellKey) -> u64 {
    spec.seeds[key.seed].wrapping_add(key.replication as u64 * REPLICATION_STRIDE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SweepSpec {
        SweepSpec::from_json(
            r#"{
                "traces": ["constant:20", "synthetic:lte-belgium"],
                "losses": ["none", "var:0:0.05"],
                "strategies": ["none", "rq-tarot"],
                "modes": ["lll"],
                "seeds": [3]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn spec_defaults_and_validation() {
        let s = spec();
        assert_eq!(s.abrs, vec![AbrKind::Throughput]);
        assert_eq!(s.replications, 1);
        assert_eq!(s.gamma, 0.5);
        assert_eq!(s.cell_count(), 8);
        let mut bad = s.clone();
        bad.traces.clear();
        assert!(bad.validate().is_err());
        assert!(SweepSpec::from_json(r#"{"traces": ["x"], "losses": ["lots"], "strategies": ["none"], "modes": ["vod"]}"#).is_err());
        assert!(SweepSpec::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn full_grid_cell_count() {
        let s = SweepSpec::from_json(
            r#"{
                "traces": ["synthetic:netflix5g", "synthetic:amazon5g", "synthetic:lte-belgium", "synthetic:cascade"],
                "losses": ["none", "const:0.01", "const:0.05", "var:0:0.05"],
                "strategies": ["none", "rq", "rs", "rq-tarot", "rs-tarot"],
                "modes": ["vod", "lll"]
            }"#,
        )
        .unwrap();
        assert_eq!(s.cell_count(), 160);
    }

    #[test]
    fn parallel_equals_serial_and_is_repeatable() {
        let s = spec();
        let a = run_sweep_with(&s, true).unwrap();
        let b = run_sweep_with(&s, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 8);
        assert_eq!(a.rows.len(), 4);
        assert!(a.failures.is_empty());
        assert_eq!(a.rows[0].strategy, "none");
        assert_eq!(a.rows[0].loss, "none");
        assert_eq!(run_sweep(&s).unwrap(), a);
    }

    #[test]
    fn missing_trace_fails_only_its_cells() {
        let mut s = spec();
        s.traces.push("/nonexistent/trace.json".into());
        let r = run_sweep(&s).unwrap();
        assert_eq!(r.cells.len(), 8);
        assert_eq!(r.failures.len(), 4);
        assert!(r.failures.iter().all(|f| f.trace.contains("nonexistent")));
    }

    #[test]
    fn single_cell_single_row() {
        let s = SweepSpec::from_json(
            r#"{"traces": ["constant:10"], "losses": ["const:0.01"], "strategies": ["rs"], "modes": ["vod"]}"#,
        )
        .unwrap();
        let r = run_sweep(&s).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].metrics.overhead_pct, 50.0);
    }

    #[test]
    fn replications_vary_the_seed() {
        let mut s = spec();
        s.replications = 2;
        let r = run_sweep(&s).unwrap();
        assert_eq!(r.cells.len(), 16);
        assert!(r.cells.iter().any(|c| c.seed == 3 + REPLICATION_STRIDE));
    }
}
