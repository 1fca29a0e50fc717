//! Deliberate attack selection by node importance, and the probabilistic
//! misbehavior of compromised nodes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{NodeId, TopologySnapshot};

/// Compromise parameters: how many nodes are attacked and how faithfully a
/// compromised node still behaves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Number of compromised nodes.
    pub f: usize,
    /// Demand delivery probability of a compromised node.
    pub p1: f64,
    /// Correct path selection probability of a compromised node.
    pub p2: f64,
    /// Slot at which the attack takes effect (0 = compromised from launch).
    pub trigger_slot: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { f: 2, p1: 0.5, p2: 0.5, trigger_slot: 0 }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.p1) {
            return Err(format!("p1 must lie in [0,1], got {}", self.p1));
        }
        if !(0.0..=1.0).contains(&self.p2) {
            return Err(format!("p2 must lie in [0,1], got {}", self.p2));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceScore {
    pub node: NodeId,
    pub lambda: f64,
}

/// Number of triangles containing the link (i, j).
fn triangles_on_link(i: NodeId, j: NodeId, snap: &TopologySnapshot) -> usize {
    snap.neighbors(i).iter().filter(|&&k| k != j && snap.has_link(j, k)).count()
}

/// Connectivity weight of an effective link: with `m` triangles on the
/// link and degrees `zi`, `zj`, the weight is
/// `(zi - m - 1)(zj - m - 1) * 2 / (m + 2)`.
pub fn link_weight(i: NodeId, j: NodeId, snap: &TopologySnapshot) -> f64 {
    let m = triangles_on_link(i, j, snap) as f64;
    let zi = snap.degree(i) as f64;
    let zj = snap.degree(j) as f64;
    let z = (zi - m - 1.0) * (zj - m - 1.0);
    z * 2.0 / (m + 2.0)
}

/// Importance of a node: its degree plus, per neighbor, the link weight
/// scaled by a degree-sharing correction. The correction fraction is
/// defined as 0 when both endpoint degrees are 1 (removable singularity in
/// the shared-degree denominator).
pub fn node_importance(i: NodeId, snap: &TopologySnapshot) -> ImportanceScore {
    let zi = snap.degree(i) as f64;
    let mut lambda = zi;
    for &j in snap.neighbors(i) {
        let zj = snap.degree(j) as f64;
        let denom = zi + zj - 2.0;
        let fraction = if denom == 0.0 { 0.0 } else { (zj - 1.0) / denom };
        lambda += link_weight(i, j, snap) * (1.0 - fraction);
    }
    ImportanceScore { node: i, lambda }
}

/// Scores every node in the snapshot.
pub fn rank_importance(snap: &TopologySnapshot) -> Vec<ImportanceScore> {
    (0..snap.n()).map(|i| node_importance(NodeId(i as u32), snap)).collect()
}

/// Picks the `f` highest-importance nodes as attack targets, skipping
/// nodes already compromised. Ties break to the lower id.
pub fn select_attack_targets(
    scores: &[ImportanceScore],
    f: usize,
    already_compromised: &[NodeId],
) -> Vec<NodeId> {
    let mut ranked: Vec<&ImportanceScore> =
        scores.iter().filter(|s| !already_compromised.contains(&s.node)).collect();
    ranked.sort_by(|a, b| b.lambda.partial_cmp(&a.lambda).unwrap().then(a.node.cmp(&b.node)));
    ranked.into_iter().take(f).map(|s| s.node).collect()
}

/// What a compromised node does with a demand it holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardDecision {
    Correct,
    Drop,
    WrongPath,
}

/// Draws the misbehavior of a compromised node: first the delivery coin
/// (drop with probability `1 - p1`), then the path coin (wrong next hop
/// with probability `1 - p2`).
pub fn malicious_forward_decision<R: Rng>(cfg: &AttackConfig, rng: &mut R) -> ForwardDecision {
    if rng.gen_range(0.0..1.0) >= cfg.p1 {
        return ForwardDecision::Drop;
    }
    if rng.gen_range(0.0..1.0) >= cfg.p2 {
        return ForwardDecision::WrongPath;
    }
    ForwardDecision::Correct
}
