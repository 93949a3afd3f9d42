//! The per-segment FEC optimizer.
//!
//! For every segment the controller receives a telemetry state
//! `(bitrate, buffer, smoothed loss, goodput)`, prunes the candidate library
//! to configurations whose redundancy covers `alpha * loss`, scores the
//! survivors with a weighted sum of loss, overhead and blockization
//! penalties, and returns the minimum. The scoring steps run in this order:
//!
//! 1. clamp the buffer to `[0, B_sat]` and compute the raw goodput headroom;
//! 2. derive the protection margin `alpha` from buffer deficit and raw headroom;
//! 3. per candidate: feasibility, residual loss, FEC-aware headroom,
//!    overhead allowance and penalty, block time with hard cap, loss penalty,
//!    adaptive weights, weighted score.
//!
//! [`oracle::brute_force_select`] is a separate naive implementation of the
//! same selection used to cross-check [`select_config`].

pub mod oracle;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fec::{encoding_latency, CandidateLibrary, CodecFamily, FecConfig};
use crate::loss::residual_loss;

/// Tunable constants of the scoring model. Defaults are the calibrated values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    // buffer management
    pub b_sat: f64,
    pub b_crit: f64,
    pub h_cap: f64,
    // loss protection
    pub alpha_min: f64,
    pub alpha_b: f64,
    pub alpha_h: f64,
    // overhead control
    pub o_0: f64,
    pub k_b: f64,
    pub k_h: f64,
    pub o_cap: f64,
    pub alpha_over: f64,
    // blockization control
    pub eta: f64,
    pub hardcap_tblk: f64,
    // weight adaptation
    pub w_loss_min: f64,
    pub lambda_p: f64,
    pub p_cap: f64,
    pub w_over_min: f64,
    pub lambda_b: f64,
    pub lambda_h: f64,
    pub w_blk_min: f64,
    pub lambda_risk: f64,
    pub lambda_hneg: f64,
    // numerics and loss estimation
    pub epsilon: f64,
    pub epsilon_pl: f64,
    pub ewma_lambda_lll: f64,
    pub ewma_lambda_vod: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            b_sat: 6.0,
            b_crit: 3.0,
            h_cap: 2.0,
            alpha_min: 1.0,
            alpha_b: 0.5,
            alpha_h: 0.5,
            o_0: 0.01,
            k_b: 0.02,
            k_h: 0.03,
            o_cap: 0.35,
            alpha_over: 1.5,
            eta: 0.5,
            hardcap_tblk: 1.5,
            w_loss_min: 0.5,
            lambda_p: 6.0,
            p_cap: 0.15,
            w_over_min: 0.5,
            lambda_b: 0.5,
            lambda_h: 0.4,
            w_blk_min: 0.3,
            lambda_risk: 0.6,
            lambda_hneg: 0.6,
            epsilon: 1e-9,
            epsilon_pl: 1e-4,
            ewma_lambda_lll: 0.5,
            ewma_lambda_vod: 0.25,
        }
    }
}

/// Lower clamp applied to the protection margin.
pub const ALPHA_FLOOR: f64 = 0.5;
/// Headroom is clamped to `[-HEADROOM_LIMIT, HEADROOM_LIMIT]`.
pub const HEADROOM_LIMIT: f64 = 10.0;

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("b_sat", self.b_sat),
            ("b_crit", self.b_crit),
            ("h_cap", self.h_cap),
            ("alpha_min", self.alpha_min),
            ("alpha_b", self.alpha_b),
            ("alpha_h", self.alpha_h),
            ("o_0", self.o_0),
            ("k_b", self.k_b),
            ("k_h", self.k_h),
            ("o_cap", self.o_cap),
            ("alpha_over", self.alpha_over),
            ("eta", self.eta),
            ("hardcap_tblk", self.hardcap_tblk),
            ("w_loss_min", self.w_loss_min),
            ("lambda_p", self.lambda_p),
            ("p_cap", self.p_cap),
            ("w_over_min", self.w_over_min),
            ("lambda_b", self.lambda_b),
            ("lambda_h", self.lambda_h),
            ("w_blk_min", self.w_blk_min),
            ("lambda_risk", self.lambda_risk),
            ("lambda_hneg", self.lambda_hneg),
            ("epsilon", self.epsilon),
            ("epsilon_pl", self.epsilon_pl),
            ("ewma_lambda_lll", self.ewma_lambda_lll),
            ("ewma_lambda_vod", self.ewma_lambda_vod),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("hyperparameter {name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("ewma_lambda_lll", self.ewma_lambda_lll), ("ewma_lambda_vod", self.ewma_lambda_vod)] {
            if v > 1.0 {
                return Err(Error::invalid(format!("{name} must be at most 1, got {v}")));
            }
        }
        Ok(())
    }

    /// Parses a JSON document; missing fields keep their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let hp: Hyperparameters = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("hyperparameters line {}", e.line()), e.to_string()))?;
        hp.validate()?;
        Ok(hp)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Cross-layer input for one segment decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryState {
    /// Requested playback bitrate, bits/s.
    pub br: f64,
    /// Buffer level, seconds.
    pub bl: f64,
    /// Smoothed loss fraction.
    pub pl: f64,
    /// Measured goodput, bits/s.
    pub gp: f64,
}

impl TelemetryState {
    pub fn new(br: f64, bl: f64, pl: f64, gp: f64) -> Result<Self> {
        if !(br > 0.0) {
            return Err(Error::invalid(format!("bitrate must be positive, got {br}")));
        }
        if !(bl >= 0.0) {
            return Err(Error::invalid(format!("buffer level must be non-negative, got {bl}")));
        }
        if !(0.0..=1.0).contains(&pl) {
            return Err(Error::invalid(format!("loss must be in [0, 1], got {pl}")));
        }
        if !(gp >= 0.0) {
            return Err(Error::invalid(format!("goodput must be non-negative, got {gp}")));
        }
        Ok(TelemetryState { br, bl, pl, gp })
    }
}

/// Clamped headroom together with its positive and negative parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Headroom {
    pub h: f64,
    pub pos: f64,
    pub neg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub loss: f64,
    pub over: f64,
    pub blk: f64,
}

impl Weights {
    pub fn sum(&self) -> f64 {
        self.loss + self.over + self.blk
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub loss: f64,
    pub over: f64,
    pub blk: f64,
}

impl Penalties {
    /// True when `self` is no worse on every objective and strictly better on one.
    pub fn dominates(&self, other: &Penalties) -> bool {
        let le = self.loss <= other.loss && self.over <= other.over && self.blk <= other.blk;
        let lt = self.loss < other.loss || self.over < other.over || self.blk < other.blk;
        le && lt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub cfg: FecConfig,
    pub score: f64,
    pub penalties: Penalties,
    pub weights: Weights,
    /// Block delivery time including encoding, seconds.
    pub t_blk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Scored(ScoredCandidate),
    /// Redundancy below `alpha * pl`.
    Infeasible,
    /// Block delivery time over the hard cap.
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockPenalty {
    Penalty { value: f64, t_blk: f64 },
    Rejected { t_blk: f64 },
}

pub fn smooth_loss(p_seg: f64, p_prev: f64, lambda: f64) -> f64 {
    lambda * p_seg + (1.0 - lambda) * p_prev
}

/// Exponentially smoothed loss estimate; the only state the controller keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSmoother {
    lambda: f64,
    estimate: f64,
}

impl LossSmoother {
    pub fn new(lambda: f64) -> Self {
        LossSmoother { lambda, estimate: 0.0 }
    }

    pub fn update(&mut self, sample: f64) -> f64 {
        self.estimate = smooth_loss(sample, self.estimate, self.lambda);
        self.estimate
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }
}

pub fn effective_buffer(bl: f64, hp: &Hyperparameters) -> f64 {
    bl.max(0.0).min(hp.b_sat)
}

pub fn headroom(rate: f64, br: f64, hp: &Hyperparameters) -> Headroom {
    let raw = (rate - br) / br.max(hp.epsilon);
    let h = raw.max(-HEADROOM_LIMIT).min(HEADROOM_LIMIT);
    Headroom {
        h,
        pos: h.max(0.0),
        neg: (-h).max(0.0),
    }
}

/// Protection margin from buffer deficit and the raw (pre-FEC) headroom.
pub fn protection_margin(state: &TelemetryState, hp: &Hyperparameters) -> f64 {
    let b_eff = effective_buffer(state.bl, hp);
    let h = headroom(state.gp, state.br, hp);
    margin(b_eff, &h, hp)
}

fn margin(b_eff: f64, h: &Headroom, hp: &Hyperparameters) -> f64 {
    let alpha = hp.alpha_min + hp.alpha_b * (hp.b_crit - b_eff).max(0.0) - hp.alpha_h * h.pos.min(hp.h_cap);
    alpha.max(ALPHA_FLOOR)
}

/// Headroom recomputed on the payload goodput left after `cfg` is applied.
pub fn fec_aware_headroom(state: &TelemetryState, cfg: &FecConfig, hp: &Hyperparameters) -> Result<Headroom> {
    if state.pl >= 1.0 {
        return Err(Error::InvalidState("loss estimate of 1 leaves no goodput to rescale".into()));
    }
    Ok(fec_headroom(state, cfg.overhead().value(), cfg.coverage(), hp))
}

fn fec_headroom(state: &TelemetryState, overhead: f64, coverage: f64, hp: &Hyperparameters) -> Headroom {
    let l_eff = residual_loss(state.pl, coverage);
    let denom = ((1.0 - state.pl) * (1.0 + overhead)).max(hp.epsilon);
    let payload = state.gp * (1.0 - l_eff) / denom;
    headroom(payload, state.br, hp)
}

pub fn overhead_allowance(b_eff: f64, h: &Headroom, hp: &Hyperparameters) -> f64 {
    let free = hp.o_0 + hp.k_b * (hp.b_crit - b_eff).max(0.0) + hp.k_h * h.pos.min(hp.h_cap);
    free.min(hp.o_cap).max(0.0)
}

pub fn loss_penalty(n: u32, k: u32, pl: f64, efficiency: f64) -> f64 {
    let shortfall = (f64::from(n) * pl - efficiency * f64::from(k)).max(0.0);
    shortfall * shortfall
}

pub fn overhead_penalty(overhead: f64, allowance: f64, alpha_over: f64) -> f64 {
    (overhead - allowance).max(0.0).powf(alpha_over)
}

/// Block delivery time (transmission plus encoding) for one block of `cfg`.
pub fn block_time(cfg: &FecConfig, gp: f64, hp: &Hyperparameters) -> f64 {
    let bits = 8.0 * (f64::from(cfg.n) + f64::from(cfg.k)) * f64::from(cfg.symbol_size);
    bits / gp.max(hp.epsilon) + encoding_latency(cfg)
}

pub fn block_penalty(cfg: &FecConfig, gp: f64, b_eff: f64, hp: &Hyperparameters) -> BlockPenalty {
    let t_blk = block_time(cfg, gp, hp);
    blk_from_time(t_blk, b_eff, hp)
}

fn blk_from_time(t_blk: f64, b_eff: f64, hp: &Hyperparameters) -> BlockPenalty {
    if t_blk > hp.hardcap_tblk * b_eff {
        return BlockPenalty::Rejected { t_blk };
    }
    let deadline = (hp.eta * b_eff).max(hp.epsilon);
    BlockPenalty::Penalty {
        value: (t_blk / deadline - 1.0).max(0.0).min(1.0),
        t_blk,
    }
}

/// Raw weights from loss, buffer and FEC-aware headroom, normalised to sum to one.
pub fn adaptive_weights(pl: f64, b_eff: f64, h: &Headroom, hp: &Hyperparameters) -> Weights {
    let raw = raw_weights(pl, b_eff, h, hp);
    let sum = raw.sum();
    Weights {
        loss: raw.loss / sum,
        over: raw.over / sum,
        blk: raw.blk / sum,
    }
}

pub fn raw_weights(pl: f64, b_eff: f64, h: &Headroom, hp: &Hyperparameters) -> Weights {
    Weights {
        loss: hp.w_loss_min + hp.lambda_p * pl.min(hp.p_cap),
        over: hp.w_over_min + hp.lambda_b * (b_eff / hp.b_sat) + hp.lambda_h * h.pos.min(hp.h_cap),
        blk: hp.w_blk_min + hp.lambda_risk * (1.0 - b_eff / hp.b_crit).max(0.0) + hp.lambda_hneg * h.neg,
    }
}

/// State-dependent quantities shared by every candidate of one decision.
#[derive(Debug, Clone, Copy)]
struct DecisionContext {
    b_eff: f64,
    alpha: f64,
    r_min: f64,
}

impl DecisionContext {
    fn new(state: &TelemetryState, hp: &Hyperparameters) -> Self {
        let b_eff = effective_buffer(state.bl, hp);
        let raw = headroom(state.gp, state.br, hp);
        let alpha = margin(b_eff, &raw, hp);
        DecisionContext {
            b_eff,
            alpha,
            r_min: alpha * state.pl,
        }
    }
}

fn evaluate(cfg: &FecConfig, state: &TelemetryState, ctx: &DecisionContext, hp: &Hyperparameters) -> Score {
    let o = cfg.overhead().value();
    if o < ctx.r_min {
        return Score::Infeasible;
    }
    let fec_h = fec_headroom(state, o, cfg.coverage(), hp);
    let allowance = overhead_allowance(ctx.b_eff, &fec_h, hp);
    let p_over = overhead_penalty(o, allowance, hp.alpha_over);
    let (p_blk, t_blk) = match block_penalty(cfg, state.gp, ctx.b_eff, hp) {
        BlockPenalty::Rejected { .. } => return Score::Rejected,
        BlockPenalty::Penalty { value, t_blk } => (value, t_blk),
    };
    let p_loss = loss_penalty(cfg.n, cfg.k, state.pl, cfg.codec.efficiency);
    let w = adaptive_weights(state.pl, ctx.b_eff, &fec_h, hp);
    Score::Scored(ScoredCandidate {
        cfg: *cfg,
        score: w.loss * p_loss + w.over * p_over + w.blk * p_blk,
        penalties: Penalties {
            loss: p_loss,
            over: p_over,
            blk: p_blk,
        },
        weights: w,
        t_blk,
    })
}

pub fn score_candidate(cfg: &FecConfig, state: &TelemetryState, hp: &Hyperparameters) -> Score {
    evaluate(cfg, state, &DecisionContext::new(state, hp), hp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// Loss below the activation threshold; no protection.
    NoFec,
    Optimal(ScoredCandidate),
    /// No candidate satisfied the feasibility constraint (or all were rejected).
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub config: FecConfig,
    pub outcome: Outcome,
    pub alpha: f64,
}

impl Selection {
    /// Score of the selected candidate; `+inf` for fallbacks, `0` without FEC.
    pub fn score(&self) -> f64 {
        match self.outcome {
            Outcome::NoFec => 0.0,
            Outcome::Optimal(sc) => sc.score,
            Outcome::Fallback => f64::INFINITY,
        }
    }
}

/// Runs the full selection and reports how the answer was reached.
pub fn select(state: &TelemetryState, library: &CandidateLibrary, hp: &Hyperparameters) -> Result<Selection> {
    let first = library
        .candidates()
        .first()
        .ok_or_else(|| Error::invalid("candidate library is empty"))?;
    let ctx = DecisionContext::new(state, hp);
    if state.pl < hp.epsilon_pl {
        return Ok(Selection {
            config: FecConfig::no_fec(first.codec),
            outcome: Outcome::NoFec,
            alpha: ctx.alpha,
        });
    }
    let mut best: Option<ScoredCandidate> = None;
    for cfg in library {
        if let Score::Scored(sc) = evaluate(cfg, state, &ctx, hp) {
            if best.is_none_or(|b| sc.score < b.score) {
                best = Some(sc);
            }
        }
    }
    Ok(match best {
        Some(sc) => Selection {
            config: sc.cfg,
            outcome: Outcome::Optimal(sc),
            alpha: ctx.alpha,
        },
        None => Selection {
            config: fallback(state, library, &ctx, hp),
            outcome: Outcome::Fallback,
            alpha: ctx.alpha,
        },
    })
}

/// Maximum-coverage candidate within the block hard cap, else maximum coverage outright.
fn fallback(state: &TelemetryState, library: &CandidateLibrary, ctx: &DecisionContext, hp: &Hyperparameters) -> FecConfig {
    let max_cov = |it: &mut dyn Iterator<Item = &FecConfig>| -> Option<FecConfig> {
        let mut best: Option<&FecConfig> = None;
        for c in it {
            if best.is_none_or(|b| c.coverage() > b.coverage()) {
                best = Some(c);
            }
        }
        best.copied()
    };
    let mut within_cap = library
        .iter()
        .filter(|c| matches!(block_penalty(c, state.gp, ctx.b_eff, hp), BlockPenalty::Penalty { .. }));
    max_cov(&mut within_cap)
        .or_else(|| max_cov(&mut library.iter()))
        .expect("library is non-empty")
}

pub fn select_config(state: &TelemetryState, library: &CandidateLibrary, hp: &Hyperparameters) -> Result<FecConfig> {
    select(state, library, hp).map(|s| s.config)
}

/// Redundancy-only baseline: keeps `(n, S)` fixed and picks the smallest
/// feasible `k`.
pub fn rfec_select(
    state: &TelemetryState,
    fixed_n: u32,
    fixed_symbol_size: u32,
    codec: CodecFamily,
    hp: &Hyperparameters,
) -> Result<FecConfig> {
    let mut cfg = FecConfig::new(fixed_n, 0, fixed_symbol_size, codec)?;
    if state.pl < hp.epsilon_pl {
        return Ok(cfg);
    }
    let r_min = protection_margin(state, hp) * state.pl;
    let n = f64::from(fixed_n);
    let mut k = (r_min * n).ceil().max(0.0) as u32;
    while k > 0 && f64::from(k - 1) / n >= r_min {
        k -= 1;
    }
    while f64::from(k) / n < r_min {
        k += 1;
    }
    cfg.k = k;
    Ok(cfg)
}

/// Library, hyperparameters and loss estimate for one streaming session.
#[derive(Debug, Clone)]
pub struct TarotController {
    library: CandidateLibrary,
    hp: Hyperparameters,
    smoother: LossSmoother,
}

impl TarotController {
    pub fn new(library: CandidateLibrary, hp: Hyperparameters, ewma_lambda: f64) -> Result<Self> {
        hp.validate()?;
        if library.is_empty() {
            return Err(Error::invalid("candidate library is empty"));
        }
        Ok(TarotController {
            library,
            hp,
            smoother: LossSmoother::new(ewma_lambda),
        })
    }

    pub fn observe_loss(&mut self, sample: f64) -> f64 {
        self.smoother.update(sample)
    }

    pub fn loss_estimate(&self) -> f64 {
        self.smoother.estimate()
    }

    pub fn decide(&self, br: f64, bl: f64, gp: f64) -> Result<Selection> {
        let state = TelemetryState::new(br, bl, self.smoother.estimate().clamp(0.0, 1.0), gp)?;
        select(&state, &self.library, &self.hp)
    }

    pub fn library(&self) -> &CandidateLibrary {
        &self.library
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }
}
