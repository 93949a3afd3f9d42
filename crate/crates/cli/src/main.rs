use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tarot_core::abr::AbrKind;
use tarot_core::controller::Hyperparameters;
use tarot_core::loss::{LossModelParams, LossProfile};
use tarot_core::report::{
    run_sweep, write_segments_csv, write_summary_csv, Format, RunDocument, SummaryRow, SummaryTable, SweepSpec,
    SCHEMA_VERSION,
};
use tarot_core::sim::{
    resolve_manifest, resolve_trace, run_session, Manifest, Mode, SessionConfig, Strategy, TraceArchetype,
};

#[derive(Parser)]
#[command(name = "tarot-sim", version, about = "Per-segment FEC control experiments on an analytical HAS simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one streaming session.
    Run(RunArgs),
    /// Run a batch of sessions described by a JSON spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// `.csv` writes the aggregated table, anything else a JSON document with cells.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic trace file.
    GenTrace {
        #[arg(long, default_value = "netflix5g")]
        archetype: TraceArchetype,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of one-second periods.
        #[arg(long, default_value_t = 900)]
        periods: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthetic 10-representation manifest.
    GenManifest {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Manifest file, or `synthetic` for the built-in one.
    #[arg(long, default_value = "synthetic")]
    manifest: String,
    /// Trace file, `synthetic:<archetype>[:<seed>]` or `constant:<mbps>[:<latency_ms>]`.
    #[arg(long)]
    trace: String,
    #[arg(long, default_value = "vod")]
    mode: Mode,
    #[arg(long, default_value = "throughput")]
    abr: AbrKind,
    /// none | rs | rq | xor | rs-tarot | rq-tarot | rfec
    #[arg(long, default_value = "rq-tarot")]
    fec: Strategy,
    /// none | const:<L> | var:<lo>:<hi>
    #[arg(long, default_value = "none")]
    loss: LossProfile,
    #[arg(long, default_value_t = tarot_core::loss::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `.csv` writes a one-row summary, anything else a JSON document.
    #[arg(long)]
    out: PathBuf,
    /// Include per-segment records (JSON) or write `<out>.segments.csv` (CSV).
    #[arg(long)]
    per_segment: bool,
    /// Hyperparameter overrides (JSON).
    #[arg(long)]
    hp: Option<PathBuf>,
    /// Do not record wall-clock decision latency; output becomes reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn segments_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    out.with_file_name(format!("{stem}.segments.csv"))
}

fn run(args: RunArgs) -> Result<()> {
    let manifest = resolve_manifest(Some(&args.manifest)).context("loading manifest")?;
    let trace = resolve_trace(&args.trace).context("loading trace")?;
    let mut cfg = SessionConfig::new(args.mode, args.fec, args.abr, args.loss);
    cfg.seed = args.seed;
    cfg.loss_model = LossModelParams::new(args.gamma)?;
    cfg.measure_decision_latency = !args.no_timing;
    if let Some(path) = &args.hp {
        cfg.hp = Hyperparameters::load(path).context("loading hyperparameters")?;
    }
    let report = run_session(&manifest, &trace, &cfg)?;

    let mut out = create(&args.out)?;
    match Format::from_path(&args.out) {
        Format::Csv => {
            write_summary_csv(&[SummaryRow::from_report(&report)], &mut out)?;
            if args.per_segment {
                let path = segments_path(&args.out);
                let mut seg = create(&path)?;
                write_segments_csv(&report.segments, &mut seg)?;
                seg.flush()?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &RunDocument::new(&report, args.per_segment))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn sweep(spec_path: &Path, out_path: &Path) -> Result<()> {
    let spec = SweepSpec::load(spec_path).context("loading sweep spec")?;
    let result = run_sweep(&spec)?;
    for f in &result.failures {
        eprintln!(
            "cell failed: mode={} loss={} strategy={} abr={} trace={} seed={}: {}",
            f.mode, f.loss, f.strategy, f.abr, f.trace, f.seed, f.error
        );
    }
    let mut out = create(out_path)?;
    match Format::from_path(out_path) {
        Format::Csv => write_summary_csv(&result.rows, &mut out)?,
        Format::Json => {
            let table = SummaryTable::new(&result.rows);
            let doc = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "columns": table.columns,
                "rows": table.rows,
                "cells": result.cells,
                "failures": result.failures,
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Sweep { spec, out } => sweep(&spec, &out),
        Command::GenTrace {
            archetype,
            seed,
            periods,
            out,
        } => {
            let trace = archetype.synthesize(seed, periods);
            let mut w = create(&out)?;
            serde_json::to_writer_pretty(&mut w, &trace.to_records())?;
            writeln!(w)?;
            w.flush()?;
            Ok(())
        }
        Command::GenManifest { out } => {
            let mut w = create(&out)?;
            serde_json::to_writer(&mut w, &Manifest::default_synthetic().to_document())?;
            writeln!(w)?;
            w.flush()?;
            Ok(())
        }
    }
}
