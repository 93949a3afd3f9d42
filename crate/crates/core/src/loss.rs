//! Analytical loss/goodput models and deterministic per-segment loss samplers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fec::FecConfig;

pub const DEFAULT_GAMMA: f64 = 0.5;

/// How the simulator derives payload rate when FEC is active.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FecRateModel {
    /// Thin the link rate by residual loss and divide by the overhead factor.
    #[default]
    Direct,
    /// Apply the transport collapse model to the residual loss first.
    Compose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModelParams {
    pub gamma: f64,
    #[serde(default)]
    pub fec_rate_model: FecRateModel,
}

impl Default for LossModelParams {
    fn default() -> Self {
        LossModelParams {
            gamma: DEFAULT_GAMMA,
            fec_rate_model: FecRateModel::Direct,
        }
    }
}

impl LossModelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(LossModelParams {
            gamma,
            ..Default::default()
        })
    }
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be in [0, 1], got {v}")))
    }
}

/// Transport goodput under random loss: `B / (1 + gamma * 100 L * sqrt(L))`.
pub fn goodput_under_loss(link_bps: f64, loss: f64, gamma: f64) -> Result<f64> {
    check_fraction("loss", loss)?;
    if !(link_bps >= 0.0) {
        return Err(Error::invalid(format!("link bandwidth must be non-negative, got {link_bps}")));
    }
    Ok(collapse(link_bps, loss, gamma))
}

#[inline]
fn collapse(link_bps: f64, loss: f64, gamma: f64) -> f64 {
    link_bps / (1.0 + gamma * (100.0 * loss) * loss.sqrt())
}

/// Loss left over after FEC recovery, for loss ratio `loss` and coverage `k/(n+k)`.
///
/// The two branches are not continuous at `loss == coverage`.
pub fn residual_loss(loss: f64, coverage: f64) -> f64 {
    let raw = if loss <= coverage && coverage > 0.0 {
        let headroom = coverage - loss;
        let reduction = headroom / coverage;
        loss * (0.4 + 0.6 * (1.0 - reduction))
    } else {
        loss - 0.8 * coverage
    };
    raw.min(loss).max(0.0)
}

/// Payload goodput seen by the player when `cfg` protects the transfer.
///
/// With `k == 0` this is exactly `B * (1 - L)`.
pub fn fec_payload_goodput(link_bps: f64, loss: f64, cfg: &FecConfig) -> f64 {
    let l_eff = residual_loss(loss, cfg.coverage());
    link_bps * (1.0 - l_eff) / overhead_factor(cfg)
}

/// `(n + k) / n`.
pub fn overhead_factor(cfg: &FecConfig) -> f64 {
    (f64::from(cfg.n) + f64::from(cfg.k)) / f64::from(cfg.n)
}

/// Payload rate used by the session engine for one constant-bandwidth period.
///
/// Unprotected transfers go through the collapse model; protected ones through
/// the FEC goodput model (optionally composed with the collapse model).
pub fn payload_rate(link_bps: f64, loss: f64, cfg: &FecConfig, params: &LossModelParams) -> f64 {
    if cfg.is_no_fec() {
        return collapse(link_bps, loss, params.gamma);
    }
    match params.fec_rate_model {
        FecRateModel::Direct => fec_payload_goodput(link_bps, loss, cfg),
        FecRateModel::Compose => {
            let l_eff = residual_loss(loss, cfg.coverage());
            collapse(link_bps, l_eff, params.gamma) / overhead_factor(cfg)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    None,
    Constant { loss: f64 },
    Variable { lo: f64, hi: f64 },
}

/// A per-segment loss process. Sampling is a pure function of `(profile, seed, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossProfile {
    pub kind: LossKind,
    pub seed: u64,
}

impl LossProfile {
    pub fn none() -> Self {
        LossProfile {
            kind: LossKind::None,
            seed: 0,
        }
    }

    pub fn constant(loss: f64) -> Result<Self> {
        check_fraction("loss", loss)?;
        Ok(LossProfile {
            kind: LossKind::Constant { loss },
            seed: 0,
        })
    }

    pub fn variable(lo: f64, hi: f64, seed: u64) -> Result<Self> {
        check_fraction("lo", lo)?;
        check_fraction("hi", hi)?;
        if lo > hi {
            return Err(Error::invalid(format!("variable loss needs lo <= hi, got {lo} > {hi}")));
        }
        Ok(LossProfile {
            kind: LossKind::Variable { lo, hi },
            seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sample(&self, segment_index: u64) -> f64 {
        sample_loss(self, segment_index)
    }
}

impl fmt::Display for LossProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::None => f.write_str("none"),
            LossKind::Constant { loss } => write!(f, "const:{loss}"),
            LossKind::Variable { lo, hi } => write!(f, "var:{lo}:{hi}"),
        }
    }
}

impl FromStr for LossProfile {
    type Err = Error;

    /// Parses `none`, `const:<L>` or `var:<lo>:<hi>`; the seed is left at 0.
    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad loss value {v:?} in {s:?}")))
        };
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["none"] => Ok(LossProfile::none()),
            ["const", l] => LossProfile::constant(num(l)?),
            ["var", lo, hi] => LossProfile::variable(num(lo)?, num(hi)?, 0),
            _ => Err(Error::invalid(format!(
                "loss profile must be none | const:<L> | var:<lo>:<hi>, got {s:?}"
            ))),
        }
    }
}

pub fn sample_loss(profile: &LossProfile, segment_index: u64) -> f64 {
    match profile.kind {
        LossKind::None => 0.0,
        LossKind::Constant { loss } => loss,
        LossKind::Variable { lo, hi } => {
            let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
            rng.set_stream(segment_index);
            let u: f64 = rng.random();
            (lo + u * (hi - lo)).clamp(lo, hi)
        }
    }
}
