//! Naive reference selector.
//!
//! Deliberately written without calling any of the scoring helpers in the
//! parent module: every candidate is scored in full from the raw formulas,
//! then the feasible, in-cap rows are filtered and the minimum taken. Only the
//! domain types are shared with [`super::select_config`].

use crate::error::{Error, Result};
use crate::fec::{CandidateLibrary, CodecKind, FecConfig};

use super::{Hyperparameters, TelemetryState};

#[derive(Debug, Clone, Copy)]
struct Row {
    cfg: FecConfig,
    feasible: bool,
    within_cap: bool,
    score: f64,
    coverage: f64,
}

fn clamp_headroom(rate: f64, br: f64, eps: f64) -> f64 {
    let h = (rate - br) / br.max(eps);
    h.max(-10.0).min(10.0)
}

fn score_all(state: &TelemetryState, library: &CandidateLibrary, hp: &Hyperparameters) -> Vec<Row> {
    let (br, bl, pl, gp) = (state.br, state.bl, state.pl, state.gp);
    let b_eff = bl.max(0.0).min(hp.b_sat);
    let h0 = clamp_headroom(gp, br, hp.epsilon);
    let h0_pos = h0.max(0.0);
    let alpha = (hp.alpha_min + hp.alpha_b * (hp.b_crit - b_eff).max(0.0) - hp.alpha_h * h0_pos.min(hp.h_cap)).max(0.5);

    let mut rows = Vec::with_capacity(library.len());
    for cfg in library.candidates() {
        let n = f64::from(cfg.n);
        let k = f64::from(cfg.k);
        let s = f64::from(cfg.symbol_size);
        let t = n + k;
        let o = k / n;
        let cov = k / t;

        let mut l_eff = if pl <= cov && cov > 0.0 {
            let room = cov - pl;
            pl * (0.4 + 0.6 * (1.0 - room / cov))
        } else {
            pl - 0.8 * cov
        };
        l_eff = l_eff.min(pl).max(0.0);

        let g_payload = gp * (1.0 - l_eff) / ((1.0 - pl) * (1.0 + o)).max(hp.epsilon);
        let h = clamp_headroom(g_payload, br, hp.epsilon);
        let h_pos = h.max(0.0);
        let h_neg = (-h).max(0.0);

        let o_free = (hp.o_0 + hp.k_b * (hp.b_crit - b_eff).max(0.0) + hp.k_h * h_pos.min(hp.h_cap))
            .min(hp.o_cap)
            .max(0.0);
        let p_over = (o - o_free).max(0.0).powf(hp.alpha_over);

        let t_enc = match cfg.codec.kind {
            CodecKind::Xor => crate::fec::XOR_BLOCK_LATENCY_S,
            _ => (n * s) * cfg.codec.encode_ns_per_byte * 1e-9,
        };
        let t_blk = 8.0 * t * s / gp.max(hp.epsilon) + t_enc;
        let within_cap = !(t_blk > hp.hardcap_tblk * b_eff);
        let p_blk = (t_blk / (hp.eta * b_eff).max(hp.epsilon) - 1.0).max(0.0).min(1.0);

        let short = (n * pl - cfg.codec.efficiency * k).max(0.0);
        let p_loss = short * short;

        let w_loss = hp.w_loss_min + hp.lambda_p * pl.min(hp.p_cap);
        let w_over = hp.w_over_min + hp.lambda_b * (b_eff / hp.b_sat) + hp.lambda_h * h_pos.min(hp.h_cap);
        let w_blk = hp.w_blk_min + hp.lambda_risk * (1.0 - b_eff / hp.b_crit).max(0.0) + hp.lambda_hneg * h_neg;
        let sum = w_loss + w_over + w_blk;
        let score = (w_loss / sum) * p_loss + (w_over / sum) * p_over + (w_blk / sum) * p_blk;

        rows.push(Row {
            cfg: *cfg,
            feasible: !(o < alpha * pl),
            within_cap,
            score,
            coverage: cov,
        });
    }
    rows
}

/// Exhaustive argmin with the same outcome conventions as the fast selector:
/// No-FEC below the loss threshold, first-in-library on ties, and the
/// maximum-coverage fallback when nothing is feasible.
pub fn brute_force_select(state: &TelemetryState, library: &CandidateLibrary, hp: &Hyperparameters) -> Result<FecConfig> {
    if library.is_empty() {
        return Err(Error::invalid("candidate library is empty"));
    }
    if state.pl < hp.epsilon_pl {
        return Ok(FecConfig::no_fec(library.candidates()[0].codec));
    }
    let rows = score_all(state, library, hp);

    let mut best: Option<Row> = None;
    for row in rows.iter().filter(|r| r.feasible && r.within_cap) {
        match best {
            Some(b) if !(row.score < b.score) => {}
            _ => best = Some(*row),
        }
    }
    if let Some(b) = best {
        return Ok(b.cfg);
    }

    let pick = |pred: &dyn Fn(&Row) -> bool| {
        let mut out: Option<Row> = None;
        for row in rows.iter().filter(|r| pred(r)) {
            match out {
                Some(b) if !(row.coverage > b.coverage) => {}
                _ => out = Some(*row),
            }
        }
        out
    };
    let chosen = pick(&|r| r.within_cap).or_else(|| pick(&|_| true)).expect("non-empty");
    Ok(chosen.cfg)
}

/// Score of `cfg` as computed by the reference path, `None` if it would be
/// pruned (infeasible or over the hard cap).
pub fn reference_score(state: &TelemetryState, cfg: &FecConfig, hp: &Hyperparameters) -> Option<f64> {
    let lib = CandidateLibrary::from_configs(vec![*cfg]).ok()?;
    let row = score_all(state, &lib, hp)[0];
    (row.feasible && row.within_cap).then_some(row.score)
}
