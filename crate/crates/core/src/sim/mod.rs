//! Analytical streaming simulator: trace replay, manifests and the session loop.

pub mod manifest;
pub mod session;
pub mod trace;

pub use manifest::{resolve_manifest, Manifest, ManifestDocument};
pub use session::{
    download_segment, run_session, segment_encoding_time, Download, Mode, RFecParams, SegmentRecord, SessionConfig,
    SessionReport, Strategy,
};
pub use trace::{resolve_trace, NetworkTrace, Period, PeriodRecord, TraceArchetype, TraceCursor};
