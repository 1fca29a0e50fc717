//! Geometry, mobility, and per-slot topology construction for the
//! time-slotted network.
//!
//! Nodes move at constant speed with a fresh random direction each slot,
//! bouncing off the arena walls. Links are formed from the in-range
//! candidate set by keeping the `q` nearest sufficiently-trusted nodes,
//! then symmetrized: an undirected link exists only if both endpoints
//! selected each other.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{link_rate, ChannelParams};

/// Dense node identifier: ids are `0..N-1` for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Position (m) or velocity (m/s) in Cartesian coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    a.sub(b).norm()
}

/// Axis-aligned flight volume: `[0,x] x [0,y] x [z_min,z_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArenaBounds {
    pub x: f64,
    pub y: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl ArenaBounds {
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= 0.0 && p.x <= self.x && p.y >= 0.0 && p.y <= self.y && p.z >= self.z_min && p.z <= self.z_max
    }
}

/// Slotting and geometry parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotConfig {
    /// Seconds per slot.
    pub tau: f64,
    /// Horizon in slots.
    pub horizon: u64,
    /// Maximum communication distance (m).
    pub d_max: f64,
    /// Minimum safe separation (m).
    pub d_min: f64,
    /// Maximum links a node keeps per slot.
    pub q: usize,
    /// Constant cruise speed (m/s); direction is redrawn each slot.
    pub speed: f64,
    pub arena: ArenaBounds,
}

impl SlotConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.tau <= 0.0 {
            return Err("tau must be > 0".into());
        }
        if !(0.0 < self.d_min && self.d_min < self.d_max) {
            return Err("require 0 < d_min < d_max".into());
        }
        if self.q < 1 {
            return Err("q must be >= 1".into());
        }
        if self.arena.z_min > self.arena.z_max || self.arena.x <= 0.0 || self.arena.y <= 0.0 {
            return Err("invalid arena bounds".into());
        }
        Ok(())
    }
}

impl Default for SlotConfig {
    fn default() -> Self {
        SlotConfig {
            tau: 1.0,
            horizon: 100,
            d_max: 500.0,
            d_min: 10.0,
            q: 3,
            speed: 3.0,
            arena: ArenaBounds { x: 1500.0, y: 1500.0, z_min: 120.0, z_max: 140.0 },
        }
    }
}

/// Per-node kinematic and bookkeeping state as captured in a snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub position: Vec3,
    pub velocity: Vec3,
    /// Queue occupancy at snapshot time.
    pub queue_len: usize,
    /// Energy consumed during the previous slot (J).
    pub energy_used_slot: f64,
    /// Ground truth: the node is compromised.
    pub is_malicious: bool,
    /// The trust layer has flagged and isolated this node.
    pub is_isolated: bool,
}

/// Immutable per-slot view of the network: who is where, which links are
/// effective, and at what rate.
#[derive(Debug, Clone)]
pub struct TopologySnapshot {
    pub slot: u64,
    pub states: Vec<NodeState>,
    /// `gamma[i]` is the ordered effective-link set of node `i`
    /// (nearest first, ties by lower id).
    pub gamma: Vec<Vec<NodeId>>,
    /// Symmetric link rates in bits/s, keyed by the ordered pair (lo, hi).
    pub rates: BTreeMap<(u32, u32), f64>,
}

impl TopologySnapshot {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.gamma[i.idx()]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.gamma[i.idx()].len()
    }

    pub fn has_link(&self, i: NodeId, j: NodeId) -> bool {
        self.gamma[i.idx()].contains(&j)
    }

    /// Link rate in bits/s; `None` when the link is not effective.
    pub fn rate(&self, i: NodeId, j: NodeId) -> Option<f64> {
        let key = (i.0.min(j.0), i.0.max(j.0));
        self.rates.get(&key).copied()
    }

    pub fn position(&self, i: NodeId) -> Vec3 {
        self.states[i.idx()].position
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("safety violation: nodes {a} and {b} at {d:.3} m are closer than d_min {d_min} m")]
    SafetyViolation { a: NodeId, b: NodeId, d: f64, d_min: f64 },
    #[error("could not satisfy d_min after {attempts} mobility resampling attempts")]
    ResampleExhausted { attempts: u32 },
}

/// In-range candidate set `K_i`: every other node within `d_max`.
///
/// Fails with [`ModelError::SafetyViolation`] if any pair involving `i`
/// is closer than `d_min` (mobility must resample before links form).
pub fn candidate_neighbors(
    i: NodeId,
    states: &[NodeState],
    cfg: &SlotConfig,
) -> Result<Vec<NodeId>, ModelError> {
    let me = &states[i.idx()];
    let mut out = Vec::new();
    for other in states {
        if other.id == i {
            continue;
        }
        let d = distance(me.position, other.position);
        if d < cfg.d_min {
            return Err(ModelError::SafetyViolation {
                a: i.min(other.id),
                b: i.max(other.id),
                d,
                d_min: cfg.d_min,
            });
        }
        if d <= cfg.d_max {
            out.push(other.id);
        }
    }
    Ok(out)
}

/// Selects up to `q` link partners for node `i`: candidates below the trust
/// threshold or already flagged are dropped, then the nearest survive.
/// Ordering and ties are deterministic (distance, then lower id).
pub fn select_links(
    i: NodeId,
    candidates: &[NodeId],
    states: &[NodeState],
    trust: &[f64],
    flagged: &[bool],
    q: usize,
    thr: f64,
) -> Vec<NodeId> {
    let me = states[i.idx()].position;
    let mut eligible: Vec<(f64, NodeId)> = candidates
        .iter()
        .copied()
        .filter(|k| !flagged[k.idx()] && !states[k.idx()].is_isolated && trust[k.idx()] >= thr)
        .map(|k| (distance(me, states[k.idx()].position), k))
        .collect();
    eligible.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    eligible.into_iter().take(q).map(|(_, k)| k).collect()
}

const MAX_RESAMPLE_ATTEMPTS: u32 = 100;

fn random_direction<R: Rng>(rng: &mut R) -> Vec3 {
    // Uniform on the unit sphere.
    let u: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - u * u).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), u)
}

fn reflect_axis(p: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    if *p < lo {
        *p = lo + (lo - *p);
        *v = -*v;
    } else if *p > hi {
        *p = hi - (*p - hi);
        *v = -*v;
    }
}

fn advance(position: Vec3, velocity: Vec3, tau: f64, arena: &ArenaBounds) -> (Vec3, Vec3) {
    let mut p = position.add(velocity.scale(tau));
    let mut v = velocity;
    reflect_axis(&mut p.x, &mut v.x, 0.0, arena.x);
    reflect_axis(&mut p.y, &mut v.y, 0.0, arena.y);
    reflect_axis(&mut p.z, &mut v.z, arena.z_min, arena.z_max);
    (p, v)
}

fn pairwise_min_ok(positions: &[Vec3], d_min: f64) -> bool {
    for a in 0..positions.len() {
        for b in (a + 1)..positions.len() {
            if distance(positions[a], positions[b]) < d_min {
                return false;
            }
        }
    }
    true
}

/// Advances every node by one slot: a fresh direction is drawn per node at
/// the slot boundary, speed stays at `cfg.speed`, the walls reflect.
/// Directions are redrawn wholesale (bounded attempts) if the step would
/// violate `d_min`.
pub fn step_mobility<R: Rng>(
    states: &mut [NodeState],
    cfg: &SlotConfig,
    rng: &mut R,
) -> Result<(), ModelError> {
    for attempt in 0..MAX_RESAMPLE_ATTEMPTS {
        let proposal: Vec<(Vec3, Vec3)> = states
            .iter()
            .map(|s| {
                let v = random_direction(rng).scale(cfg.speed);
                advance(s.position, v, cfg.tau, &cfg.arena)
            })
            .collect();
        let positions: Vec<Vec3> = proposal.iter().map(|(p, _)| *p).collect();
        if pairwise_min_ok(&positions, cfg.d_min) {
            for (s, (p, v)) in states.iter_mut().zip(proposal) {
                s.position = p;
                s.velocity = v;
            }
            return Ok(());
        }
        let _ = attempt;
    }
    Err(ModelError::ResampleExhausted { attempts: MAX_RESAMPLE_ATTEMPTS })
}

/// Deterministic single-node advance used when velocities are fixed by the
/// caller (tests, fixtures).
pub fn advance_node(state: &mut NodeState, cfg: &SlotConfig) {
    let (p, v) = advance(state.position, state.velocity, cfg.tau, &cfg.arena);
    state.position = p;
    state.velocity = v;
}

/// Places `n` nodes uniformly in the arena, rejection-sampled to satisfy
/// `d_min`.
pub fn place_nodes<R: Rng>(n: usize, cfg: &SlotConfig, rng: &mut R) -> Result<Vec<Vec3>, ModelError> {
    let mut positions: Vec<Vec3> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..MAX_RESAMPLE_ATTEMPTS {
            let p = Vec3::new(
                rng.gen_range(0.0..=cfg.arena.x),
                rng.gen_range(0.0..=cfg.arena.y),
                rng.gen_range(cfg.arena.z_min..=cfg.arena.z_max),
            );
            if positions.iter().all(|&o| distance(p, o) >= cfg.d_min) {
                positions.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(ModelError::ResampleExhausted { attempts: MAX_RESAMPLE_ATTEMPTS });
        }
    }
    Ok(positions)
}

/// Builds the per-slot snapshot: candidate sets, trust-filtered link
/// selection, symmetrization (a link survives only if both endpoints kept
/// it), and Shannon rates for the surviving links.
pub fn build_topology(
    slot: u64,
    states: &[NodeState],
    trust: &[f64],
    flagged: &[bool],
    thr: f64,
    cfg: &SlotConfig,
    chan: &ChannelParams,
) -> Result<TopologySnapshot, ModelError> {
    let n = states.len();
    let mut proposed: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for s in states {
        if flagged[s.id.idx()] || s.is_isolated {
            continue;
        }
        let k = candidate_neighbors(s.id, states, cfg)?;
        proposed[s.id.idx()] = select_links(s.id, &k, states, trust, flagged, cfg.q, thr);
    }

    let mut gamma: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut rates = BTreeMap::new();
    for i in 0..n {
        let id = NodeId(i as u32);
        gamma[i] = proposed[i]
            .iter()
            .copied()
            .filter(|j| proposed[j.idx()].contains(&id))
            .collect();
        for &j in &gamma[i] {
            let key = (id.0.min(j.0), id.0.max(j.0));
            if !rates.contains_key(&key) {
                let d = distance(states[i].position, states[j.idx()].position);
                // d >= d_min > 0, so the rate is well-defined.
                let rate = link_rate(d, chan).expect("positive link distance");
                rates.insert(key, rate);
            }
        }
    }

    Ok(TopologySnapshot { slot, states: states.to_vec(), gamma, rates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use approx::assert_relative_eq;

    fn node(id: u32, pos: Vec3) -> NodeState {
        NodeState {
            id: NodeId(id),
            position: pos,
            velocity: Vec3::ZERO,
            queue_len: 0,
            energy_used_slot: 0.0,
            is_malicious: false,
            is_isolated: false,
        }
    }

    fn cfg() -> SlotConfig {
        SlotConfig::default()
    }

    #[test]
    fn distance_3_4_5() {
        assert_relative_eq!(distance(Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 4.0, 0.0)), 5.0);
    }

    #[test]
    fn distance_altitude_only() {
        assert_relative_eq!(distance(Vec3::new(0.0, 0.0, 120.0), Vec3::new(0.0, 0.0, 140.0)), 20.0);
    }

    #[test]
    fn distance_identity() {
        let a = Vec3::new(17.0, -2.5, 130.0);
        assert_eq!(distance(a, a), 0.0);
    }

    #[test]
    fn candidates_respect_d_max() {
        let states = vec![
            node(0, Vec3::new(0.0, 0.0, 130.0)),
            node(1, Vec3::new(100.0, 0.0, 130.0)),
            node(2, Vec3::new(400.0, 0.0, 130.0)),
        ];
        let mut c = cfg();
        c.d_max = 300.0;
        let k = candidate_neighbors(NodeId(0), &states, &c).unwrap();
        assert_eq!(k, vec![NodeId(1)]);
    }

    #[test]
    fn candidate_boundary_inclusive() {
        let states = vec![node(0, Vec3::new(0.0, 0.0, 130.0)), node(1, Vec3::new(500.0, 0.0, 130.0))];
        let k = candidate_neighbors(NodeId(0), &states, &cfg()).unwrap();
        assert_eq!(k, vec![NodeId(1)]);
    }

    #[test]
    fn too_close_is_a_safety_violation() {
        let states = vec![node(0, Vec3::new(0.0, 0.0, 130.0)), node(1, Vec3::new(5.0, 0.0, 130.0))];
        let err = candidate_neighbors(NodeId(0), &states, &cfg()).unwrap_err();
        assert!(matches!(err, ModelError::SafetyViolation { .. }));
    }

    #[test]
    fn select_links_filters_by_trust_then_distance() {
        let states = vec![
            node(0, Vec3::new(0.0, 0.0, 130.0)),
            node(1, Vec3::new(100.0, 0.0, 130.0)),
            node(2, Vec3::new(200.0, 0.0, 130.0)),
            node(3, Vec3::new(300.0, 0.0, 130.0)),
        ];
        let trust = [1.0, 0.9, 0.7, 0.85];
        let flagged = [false; 4];
        let cands = vec![NodeId(1), NodeId(2), NodeId(3)];
        let picked = select_links(NodeId(0), &cands, &states, &trust, &flagged, 2, 0.8);
        assert_eq!(picked, vec![NodeId(1), NodeId(3)]);
    }

    #[test]
    fn select_links_single_candidate() {
        let states = vec![node(0, Vec3::new(0.0, 0.0, 130.0)), node(1, Vec3::new(100.0, 0.0, 130.0))];
        let picked = select_links(NodeId(0), &[NodeId(1)], &states, &[1.0, 1.0], &[false, false], 3, 0.8);
        assert_eq!(picked, vec![NodeId(1)]);
    }

    #[test]
    fn select_links_tie_breaks_to_lower_id() {
        let states = vec![
            node(0, Vec3::new(0.0, 0.0, 130.0)),
            node(1, Vec3::new(0.0, 100.0, 130.0)),
            node(2, Vec3::new(100.0, 0.0, 130.0)),
        ];
        let picked = select_links(
            NodeId(0),
            &[NodeId(2), NodeId(1)],
            &states,
            &[1.0, 1.0, 1.0],
            &[false; 3],
            1,
            0.8,
        );
        assert_eq!(picked, vec![NodeId(1)]);
    }

    #[test]
    fn fixed_velocity_advance() {
        let mut s = node(0, Vec3::new(0.0, 0.0, 130.0));
        s.velocity = Vec3::new(3.0, 0.0, 0.0);
        advance_node(&mut s, &cfg());
        assert_eq!(s.position, Vec3::new(3.0, 0.0, 130.0));
    }

    #[test]
    fn zero_velocity_is_identity() {
        let mut s = node(0, Vec3::new(10.0, 20.0, 130.0));
        advance_node(&mut s, &cfg());
        assert_eq!(s.position, Vec3::new(10.0, 20.0, 130.0));
    }

    #[test]
    fn outward_motion_reflects_at_bound() {
        let c = cfg();
        let mut s = node(0, Vec3::new(c.arena.x - 1.0, 0.0, 130.0));
        s.velocity = Vec3::new(3.0, 0.0, 0.0);
        advance_node(&mut s, &c);
        // Overshoot of 2 m folds back inside; velocity flips.
        assert_relative_eq!(s.position.x, c.arena.x - 2.0);
        assert!(s.velocity.x < 0.0);
        assert!(c.arena.contains(s.position));
    }

    #[test]
    fn mobility_is_deterministic_under_seed() {
        let c = cfg();
        let run = |seed: u64| {
            let mut rng = crate::rng::stream(seed, "mobility");
            let mut states: Vec<NodeState> = place_nodes(6, &c, &mut rng)
                .unwrap()
                .into_iter()
                .enumerate()
                .map(|(i, p)| node(i as u32, p))
                .collect();
            for _ in 0..20 {
                step_mobility(&mut states, &c, &mut rng).unwrap();
            }
            states.iter().map(|s| s.position).collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn mobility_preserves_safety_and_bounds() {
        let c = cfg();
        let mut rng = crate::rng::stream(3, "mobility");
        let mut states: Vec<NodeState> = place_nodes(10, &c, &mut rng)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(i, p)| node(i as u32, p))
            .collect();
        for _ in 0..50 {
            step_mobility(&mut states, &c, &mut rng).unwrap();
            let positions: Vec<Vec3> = states.iter().map(|s| s.position).collect();
            assert!(pairwise_min_ok(&positions, c.d_min));
            for p in &positions {
                assert!(c.arena.contains(*p));
            }
            for s in &states {
                assert_relative_eq!(s.velocity.norm(), c.speed, max_relative = 1e-12);
            }
        }
    }

    fn chan() -> ChannelParams {
        ChannelParams::default()
    }

    #[test]
    fn two_trusted_nodes_link_up() {
        let states = vec![node(0, Vec3::new(0.0, 0.0, 130.0)), node(1, Vec3::new(200.0, 0.0, 130.0))];
        let snap = build_topology(0, &states, &[1.0, 1.0], &[false, false], 0.8, &cfg(), &chan()).unwrap();
        assert_eq!(snap.neighbors(NodeId(0)), &[NodeId(1)]);
        assert_eq!(snap.neighbors(NodeId(1)), &[NodeId(0)]);
        assert!(snap.rate(NodeId(0), NodeId(1)).unwrap() > 0.0);
        assert_eq!(snap.rate(NodeId(0), NodeId(1)), snap.rate(NodeId(1), NodeId(0)));
    }

    #[test]
    fn flagged_endpoint_kills_the_link() {
        let states = vec![node(0, Vec3::new(0.0, 0.0, 130.0)), node(1, Vec3::new(200.0, 0.0, 130.0))];
        let snap = build_topology(0, &states, &[1.0, 1.0], &[false, true], 0.8, &cfg(), &chan()).unwrap();
        assert!(snap.neighbors(NodeId(0)).is_empty());
        assert!(snap.neighbors(NodeId(1)).is_empty());
        assert!(snap.rates.is_empty());
    }

    #[test]
    fn four_node_ring_with_q2() {
        // Square of side 400 m: adjacent corners in range, diagonal (566 m) out.
        let states = vec![
            node(0, Vec3::new(0.0, 0.0, 130.0)),
            node(1, Vec3::new(400.0, 0.0, 130.0)),
            node(2, Vec3::new(400.0, 400.0, 130.0)),
            node(3, Vec3::new(0.0, 400.0, 130.0)),
        ];
        let mut c = cfg();
        c.q = 2;
        let snap = build_topology(0, &states, &[1.0; 4], &[false; 4], 0.8, &c, &chan()).unwrap();
        for i in 0..4u32 {
            assert_eq!(snap.degree(NodeId(i)), 2, "node {i} should sit on the ring");
        }
        assert!(snap.has_link(NodeId(0), NodeId(1)));
        assert!(snap.has_link(NodeId(1), NodeId(2)));
        assert!(snap.has_link(NodeId(2), NodeId(3)));
        assert!(snap.has_link(NodeId(3), NodeId(0)));
        assert!(!snap.has_link(NodeId(0), NodeId(2)));
    }
}
