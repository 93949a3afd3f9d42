//! Segment manifests: ladder plus per-segment sizes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abr::BitrateLadder;
use crate::error::{Error, Result};

/// On-disk manifest. `segment_sizes_bits[i][r]` is segment `i` at representation `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDocument {
    pub segment_duration_ms: f64,
    pub bitrates_kbps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<Vec<f64>>,
    pub segment_sizes_bits: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    segment_duration: f64,
    ladder: BitrateLadder,
    /// `[segment][representation]`, bits
    sizes: Vec<Vec<u64>>,
}

/// Bitrates of the default 10-step ladder, Mbps.
pub const DEFAULT_LADDER_MBPS: [f64; 10] = [0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 16.0, 25.0, 40.0];
pub const DEFAULT_SEGMENTS: usize = 135;
pub const DEFAULT_SEGMENT_DURATION: f64 = 4.0;

impl Manifest {
    pub fn new(segment_duration: f64, ladder: BitrateLadder, sizes: Vec<Vec<u64>>) -> Result<Self> {
        if !(segment_duration > 0.0) || !segment_duration.is_finite() {
            return Err(Error::invalid(format!("segment duration must be positive, got {segment_duration}")));
        }
        if sizes.is_empty() {
            return Err(Error::invalid("manifest has no segments"));
        }
        for (i, row) in sizes.iter().enumerate() {
            if row.len() != ladder.len() {
                return Err(Error::parse(
                    format!("segment_sizes_bits[{i}]"),
                    format!("{} sizes for {} representations", row.len(), ladder.len()),
                ));
            }
            if let Some(r) = row.iter().position(|&b| b == 0) {
                return Err(Error::parse(format!("segment_sizes_bits[{i}][{r}]"), "segment size must be positive"));
            }
        }
        Ok(Manifest {
            segment_duration,
            ladder,
            sizes,
        })
    }

    pub fn from_document(doc: &ManifestDocument) -> Result<Self> {
        let bitrates: Vec<f64> = doc.bitrates_kbps.iter().map(|k| k * 1e3).collect();
        let ladder = BitrateLadder::new(&bitrates, doc.quality.as_deref())
            .map_err(|e| Error::parse("bitrates_kbps", e.to_string()))?;
        Manifest::new(doc.segment_duration_ms / 1e3, ladder, doc.segment_sizes_bits.clone())
    }

    pub fn to_document(&self) -> ManifestDocument {
        ManifestDocument {
            segment_duration_ms: self.segment_duration * 1e3,
            bitrates_kbps: self.ladder.bitrates().map(|b| b / 1e3).collect(),
            quality: Some(self.ladder.representations().iter().map(|r| r.quality).collect()),
            segment_sizes_bits: self.sizes.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ManifestDocument = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("manifest line {} column {}", e.line(), e.column()), e.to_string()))?;
        Manifest::from_document(&doc).map_err(|e| match e {
            Error::InvalidArgument(message) => Error::parse("manifest", message),
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::from_json(&text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }

    /// Deterministic VBR content: each segment scales every representation by a
    /// shared factor in `[0.9, 1.1]`.
    pub fn synthetic(ladder: BitrateLadder, segment_duration: f64, segments: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = (0..segments)
            .map(|_| {
                let factor = 0.9 + 0.2 * rng.random::<f64>();
                ladder
                    .bitrates()
                    .map(|b| ((b * segment_duration * factor).round() as u64).max(1))
                    .collect()
            })
            .collect();
        Manifest::new(segment_duration, ladder, sizes)
    }

    /// Ten representations, 135 four-second segments.
    pub fn default_synthetic() -> Self {
        let rates: Vec<f64> = DEFAULT_LADDER_MBPS.iter().map(|m| m * 1e6).collect();
        let ladder = BitrateLadder::new(&rates, None).expect("default ladder is valid");
        Manifest::synthetic(ladder, DEFAULT_SEGMENT_DURATION, DEFAULT_SEGMENTS, 0).expect("default manifest is valid")
    }

    /// Re-chunks to a new segment duration. Each representation's bits are
    /// treated as a piecewise-constant rate; totals are preserved exactly.
    pub fn resample(&self, segment_duration: f64) -> Result<Self> {
        if !(segment_duration > 0.0) || !segment_duration.is_finite() {
            return Err(Error::invalid(format!("segment duration must be positive, got {segment_duration}")));
        }
        if segment_duration == self.segment_duration {
            return Ok(self.clone());
        }
        let total = self.duration();
        let count = ((total / segment_duration) - 1e-9).ceil().max(1.0) as usize;
        let reps = self.ladder.len();
        let mut out = vec![vec![0u64; reps]; count];
        for r in 0..reps {
            let mut prefix = Vec::with_capacity(self.sizes.len() + 1);
            prefix.push(0u64);
            for row in &self.sizes {
                prefix.push(prefix.last().unwrap() + row[r]);
            }
            let cumulative = |t: f64| -> f64 {
                let pos = (t / self.segment_duration).clamp(0.0, self.sizes.len() as f64);
                let i = (pos.floor() as usize).min(self.sizes.len() - 1);
                let frac = pos - i as f64;
                prefix[i] as f64 + frac * self.sizes[i][r] as f64
            };
            let mut prev = 0u64;
            for (j, row) in out.iter_mut().enumerate() {
                let end = if j + 1 == count {
                    prefix[self.sizes.len()]
                } else {
                    cumulative((j + 1) as f64 * segment_duration).round() as u64
                };
                row[r] = end - prev;
                prev = end;
            }
        }
        for row in &mut out {
            for b in row.iter_mut() {
                *b = (*b).max(1);
            }
        }
        Manifest::new(segment_duration, self.ladder.clone(), out)
    }

    pub fn segment_duration(&self) -> f64 {
        self.segment_duration
    }

    pub fn ladder(&self) -> &BitrateLadder {
        &self.ladder
    }

    pub fn segment_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn duration(&self) -> f64 {
        self.segment_duration * self.sizes.len() as f64
    }

    pub fn segment_bits(&self, segment: usize, representation: usize) -> u64 {
        self.sizes[segment][representation]
    }

    pub fn total_bits(&self, representation: usize) -> u64 {
        self.sizes.iter().map(|row| row[representation]).sum()
    }
}

/// `synthetic` (or an empty string) selects the default synthetic manifest; anything else is a path.
pub fn resolve_manifest(source: Option<&str>) -> Result<Manifest> {
    match source {
        None | Some("") | Some("synthetic") => Ok(Manifest::default_synthetic()),
        Some(path) => Manifest::load(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_manifest_shape() {
        let m = Manifest::default_synthetic();
        assert_eq!(m.segment_count(), 135);
        assert_eq!(m.ladder().len(), 10);
        assert_eq!(m.duration(), 540.0);
        for i in 0..m.segment_count() {
            let nominal = m.ladder().get(3).bitrate * 4.0;
            let got = m.segment_bits(i, 3) as f64;
            assert!(got >= 0.9 * nominal - 1.0 && got <= 1.1 * nominal + 1.0);
        }
    }

    #[test]
    fn document_round_trip() {
        let m = Manifest::default_synthetic();
        let text = serde_json::to_string(&m.to_document()).unwrap();
        let back = Manifest::from_json(&text).unwrap();
        assert_eq!(back.segment_count(), m.segment_count());
        for r in 0..10 {
            assert_eq!(back.total_bits(r), m.total_bits(r));
            assert!((back.ladder().get(r).bitrate - m.ladder().get(r).bitrate).abs() < 1e-6);
        }
    }

    #[test]
    fn minimal_document_is_valid() {
        let m = Manifest::from_json(
            r#"{"segment_duration_ms": 4000, "bitrates_kbps": [1000], "segment_sizes_bits": [[4000000]]}"#,
        )
        .unwrap();
        assert_eq!(m.segment_count(), 1);
        assert_eq!(m.ladder().get(0).quality, 100.0);
    }

    #[test]
    fn ragged_and_bad_documents_fail() {
        let ragged = r#"{"segment_duration_ms": 4000, "bitrates_kbps": [1000, 2000],
            "segment_sizes_bits": [[1, 2], [3]]}"#;
        match Manifest::from_json(ragged) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "segment_sizes_bits[1]"),
            other => panic!("expected parse error, got {other:?}"),
        }
        let descending = r#"{"segment_duration_ms": 4000, "bitrates_kbps": [2000, 1000],
            "segment_sizes_bits": [[1, 2]]}"#;
        assert!(matches!(Manifest::from_json(descending), Err(Error::Parse { .. })));
        assert!(matches!(Manifest::from_json("{\"segment_duration_ms\": 1"), Err(Error::Parse { .. })));
        let zero = r#"{"segment_duration_ms": 4000, "bitrates_kbps": [1000], "segment_sizes_bits": [[0]]}"#;
        assert!(Manifest::from_json(zero).is_err());
    }

    #[test]
    fn resample_preserves_bits() {
        let m = Manifest::default_synthetic();
        let half = m.resample(2.0).unwrap();
        assert_eq!(half.segment_count(), 270);
        for r in 0..10 {
            assert_eq!(half.total_bits(r), m.total_bits(r));
        }
        assert_eq!(half.segment_bits(0, 0) + half.segment_bits(1, 0), m.segment_bits(0, 0));
        let odd = m.resample(3.0).unwrap();
        assert_eq!(odd.segment_count(), 180);
        assert_eq!(odd.total_bits(9), m.total_bits(9));
        assert_eq!(m.resample(4.0).unwrap(), m);
    }
}
