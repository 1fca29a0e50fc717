//! Behavior bookkeeping and trust-value evolution: delivery-rate and
//! path-correctness components folded into a weighted trust score, with
//! adaptive, average, and random weight schemes.
//!
//! Trust is only ever recomputed from committed behavior reports; the
//! ledger applies them to cumulative counters once per slot, then every
//! node's score is refreshed and threshold crossings are flagged.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum TrustError {
    #[error("trust value must be positive to compute weights, got {0}")]
    NonPositiveTrust(f64),
}

/// How the three trust weights are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Adaptive,
    Average,
    Random,
}

/// Which denominator the adaptive scheme uses for its component weights.
///
/// The corrected form `2 - T_dr - T_tp` keeps the three weights summing to
/// one; the printed form `2 - T_dr + T_tp` is retained behind this switch
/// for comparison but does not normalize in general.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptiveDenominator {
    Corrected,
    Printed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrustConfig {
    pub scheme: WeightScheme,
    /// Safety threshold: a node whose trust falls below is flagged.
    pub thr: f64,
    /// Upper cap on the prior-trust weight so component weights stay
    /// non-negative once trust sinks below the threshold.
    pub psi0_cap: f64,
    pub denominator: AdaptiveDenominator,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            scheme: WeightScheme::Adaptive,
            thr: 0.8,
            psi0_cap: 0.9,
            denominator: AdaptiveDenominator::Corrected,
        }
    }
}

/// Per-node cumulative behavior counters and the current trust score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrustRecord {
    pub node: NodeId,
    /// Comprehensive trust value.
    pub trust: f64,
    /// Delivery-rate component.
    pub t_dr: f64,
    /// Path-correctness component.
    pub t_tp: f64,
    /// Cumulative resolved receipts (each receipt later resolves into a
    /// forward or a drop).
    pub cum_rx: u64,
    /// Cumulative onward transmissions.
    pub cum_tx: u64,
    /// Cumulative path checks observed by receivers.
    pub cum_paths: u64,
    /// Cumulative checks that deviated from the specified path.
    pub cum_bad_paths: u64,
    pub flagged: bool,
    pub flag_slot: Option<u64>,
}

impl TrustRecord {
    pub fn new(node: NodeId) -> Self {
        TrustRecord {
            node,
            trust: 1.0,
            t_dr: 1.0,
            t_tp: 1.0,
            cum_rx: 0,
            cum_tx: 0,
            cum_paths: 0,
            cum_bad_paths: 0,
            flagged: false,
            flag_slot: None,
        }
    }
}

/// One witnessed behavior observation, uploaded to the consensus layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub reporter: NodeId,
    pub subject: NodeId,
    pub slot: u64,
    pub kind: ReportKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportKind {
    /// A resolved holding: the subject took a demand and either forwarded
    /// it (`tx = 1`) or dropped it (`tx = 0`).
    Delivery { rx: u32, tx: u32 },
    /// A receiver-side path check: `bad` of `total` forwards deviated from
    /// the specified next hop.
    PathCheck { total: u32, bad: u32 },
}

/// Delivery-rate component: `cum_tx / cum_rx`; with no receipts yet the
/// component keeps its current (initial) value.
pub fn delivery_rate_eval(rec: &TrustRecord) -> f64 {
    if rec.cum_rx > 0 {
        rec.cum_tx as f64 / rec.cum_rx as f64
    } else {
        rec.t_dr
    }
}

/// Path-correctness component: `1 - cum_bad / cum_paths`; with no checks
/// yet the component keeps its current (initial) value.
pub fn path_eval(rec: &TrustRecord) -> f64 {
    if rec.cum_paths > 0 {
        1.0 - rec.cum_bad_paths as f64 / rec.cum_paths as f64
    } else {
        rec.t_tp
    }
}

/// The three trust weights `(psi0, psi1, psi2)`.
pub type Weights = (f64, f64, f64);

/// Computes the weights for one update step.
///
/// `psi0 = min(0.5 * thr / trust, psi0_cap)` for every scheme; the split of
/// the remaining mass depends on the scheme. Under the corrected adaptive
/// denominator the weights always sum to one.
pub fn compute_weights<R: Rng>(
    cfg: &TrustConfig,
    trust: f64,
    t_dr: f64,
    t_tp: f64,
    rng: &mut R,
) -> Result<Weights, TrustError> {
    if trust <= 0.0 {
        return Err(TrustError::NonPositiveTrust(trust));
    }
    let psi0 = (0.5 * cfg.thr / trust).min(cfg.psi0_cap);
    let rest = 1.0 - psi0;
    let (psi1, psi2) = match cfg.scheme {
        WeightScheme::Average => (rest / 2.0, rest / 2.0),
        WeightScheme::Random => {
            let psi1 = rng.gen_range(0.2 * rest..=0.8 * rest);
            (psi1, rest - psi1)
        }
        WeightScheme::Adaptive => {
            if t_dr == 1.0 && t_tp == 1.0 {
                (rest / 2.0, rest / 2.0)
            } else {
                let denom = match cfg.denominator {
                    AdaptiveDenominator::Corrected => 2.0 - t_dr - t_tp,
                    AdaptiveDenominator::Printed => 2.0 - t_dr + t_tp,
                };
                (rest * (1.0 - t_dr) / denom, rest * (1.0 - t_tp) / denom)
            }
        }
    };
    Ok((psi0, psi1, psi2))
}

/// Applies one trust update: `T' = psi0*T + psi1*T_dr + psi2*T_tp`,
/// clamped to [0, 1]; a first crossing below the threshold flags the node.
pub fn update_trust(rec: &TrustRecord, weights: Weights, thr: f64, slot: u64) -> TrustRecord {
    let (psi0, psi1, psi2) = weights;
    let t_dr = delivery_rate_eval(rec);
    let t_tp = path_eval(rec);
    let trust = (psi0 * rec.trust + psi1 * t_dr + psi2 * t_tp).clamp(0.0, 1.0);
    let mut out = rec.clone();
    out.t_dr = t_dr;
    out.t_tp = t_tp;
    out.trust = trust;
    if !out.flagged && trust < thr {
        out.flagged = true;
        out.flag_slot = Some(slot);
    }
    out
}

/// Detection step of one node: the first slot at which its trust history
/// fell below the threshold.
pub fn detection_step(history: &[(u64, f64)], thr: f64) -> Option<u64> {
    history.iter().find(|(_, t)| *t < thr).map(|(slot, _)| *slot)
}

/// One exported trust-table row, for metrics and audits.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRow {
    pub node: NodeId,
    pub slot: u64,
    pub trust: f64,
    pub t_dr: f64,
    pub t_tp: f64,
    pub flagged: bool,
}

/// The full per-node trust state of a run, owned by the ledger-application
/// step.
#[derive(Debug, Clone)]
pub struct TrustTable {
    records: Vec<TrustRecord>,
    cfg: TrustConfig,
    /// Per-node trust history (slot, value) for detection metrics.
    history: Vec<Vec<(u64, f64)>>,
}

impl TrustTable {
    pub fn new(n: usize, cfg: TrustConfig) -> Self {
        TrustTable {
            records: (0..n).map(|i| TrustRecord::new(NodeId(i as u32))).collect(),
            history: vec![Vec::new(); n],
            cfg,
        }
    }

    pub fn cfg(&self) -> &TrustConfig {
        &self.cfg
    }

    pub fn record(&self, i: NodeId) -> &TrustRecord {
        &self.records[i.idx()]
    }

    pub fn records(&self) -> &[TrustRecord] {
        &self.records
    }

    pub fn trust_of(&self, i: NodeId) -> f64 {
        self.records[i.idx()].trust
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.trust).collect()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.flagged).collect()
    }

    pub fn flagged_count(&self) -> usize {
        self.records.iter().filter(|r| r.flagged).count()
    }

    /// Folds one committed report into the cumulative counters.
    pub fn fold_report(&mut self, report: &BehaviorReport) {
        let rec = &mut self.records[report.subject.idx()];
        match report.kind {
            ReportKind::Delivery { rx, tx } => {
                rec.cum_rx += rx as u64;
                rec.cum_tx += tx as u64;
            }
            ReportKind::PathCheck { total, bad } => {
                rec.cum_paths += total as u64;
                rec.cum_bad_paths += bad as u64;
            }
        }
    }

    /// Recomputes every node's trust from its (already folded) counters:
    /// component refresh, weight computation, weighted update, flagging.
    pub fn update_all<R: Rng>(&mut self, slot: u64, rng: &mut R) -> Result<(), TrustError> {
        for i in 0..self.records.len() {
            let rec = &self.records[i];
            let t_dr = delivery_rate_eval(rec);
            let t_tp = path_eval(rec);
            let weights = compute_weights(&self.cfg, rec.trust, t_dr, t_tp, rng)?;
            let updated = update_trust(rec, weights, self.cfg.thr, slot);
            self.history[i].push((slot, updated.trust));
            self.records[i] = updated;
        }
        Ok(())
    }

    /// First slot at which node `i` was seen below the threshold.
    pub fn detection_step_of(&self, i: NodeId) -> Option<u64> {
        detection_step(&self.history[i.idx()], self.cfg.thr)
    }

    /// Trust table export for metrics: one row per node at `slot`.
    pub fn export_rows(&self, slot: u64) -> Vec<TrustRow> {
        self.records
            .iter()
            .map(|r| TrustRow {
                node: r.node,
                slot,
                trust: r.trust,
                t_dr: r.t_dr,
                t_tp: r.t_tp,
                flagged: r.flagged,
            })
            .collect()
    }
}
